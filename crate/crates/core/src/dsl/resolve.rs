use std::collections::{BTreeMap, BTreeSet};

use serde::de::DeserializeOwned;

use super::lexer::Tok;
use super::parser::{Elem, ElemKind, Statement};
use super::*;
use crate::douts::{parse_rational, DoutsInput, LiftConditions, Rational};
use crate::patterns::{abstract_pattern, check_lot, Bid, Binding, Constraint, Lot, Sort};
use crate::transformations::{DevelopPayload, ServicePayload, Subject, TransformationKind, TransformationSpec};
use crate::transitions::PrimitiveStep;

type Pairs = BTreeMap<String, Elem>;

const FACT_FAMILIES: [&str; 7] = ["unit", "source", "source_type", "theme", "contract", "commitment", "sourcement"];

/// Lookup order for untyped overlay references.
const REF_ORDER: [&str; 9] =
    ["unit", "source", "source_type", "theme", "sourcement", "contract", "commitment", "business", "contract_config"];

struct Cursor<'e> {
    elems: &'e [Elem],
    i: usize,
    end: Span,
}

impl<'e> Cursor<'e> {
    fn new(elems: &'e [Elem], end: Span) -> Self {
        Self { elems, i: 0, end }
    }

    fn peek(&self) -> Option<&'e Elem> {
        self.elems.get(self.i)
    }

    fn next(&mut self) -> Option<&'e Elem> {
        let e = self.elems.get(self.i);
        self.i += 1;
        e
    }

    fn here(&self) -> Span {
        self.peek().map_or(self.end, |e| e.span)
    }

    fn peek_word(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Elem { kind: ElemKind::Word(w), .. }) if w == word)
    }
}

struct Deferred<'s> {
    sourcements: Vec<&'s Statement>,
    patterns: Vec<&'s Statement>,
    bids: Vec<&'s Statement>,
}

struct Builder<'a> {
    lines: &'a [&'a str],
    diags: &'a mut Vec<ParseDiagnostic>,
    declared: BTreeMap<&'static str, BTreeMap<String, Span>>,
    ref_errors: bool,
    scenario: Scenario,
}

pub fn build(statements: Vec<Statement>, lines: &[&str], diags: &mut Vec<ParseDiagnostic>) -> Scenario {
    let mut b = Builder { lines, diags, declared: BTreeMap::new(), ref_errors: false, scenario: Scenario::default() };
    for st in &statements {
        b.declare(st);
    }
    let mut deferred = Deferred { sourcements: Vec::new(), patterns: Vec::new(), bids: Vec::new() };
    for st in &statements {
        match st.keyword.as_str() {
            "sourcement" => deferred.sourcements.push(st),
            "pattern" => deferred.patterns.push(st),
            "bid" => deferred.bids.push(st),
            _ => b.statement(st),
        }
    }
    for st in deferred.sourcements {
        b.sourcement(st);
    }
    b.scenario.world.refresh_sourcements();
    if !b.ref_errors {
        b.validate_world();
    }
    for st in deferred.patterns {
        b.pattern(st);
    }
    b.check_lots();
    for st in deferred.bids {
        b.bid(st);
    }
    let s = &mut b.scenario;
    s.business.sort_by(|x, y| x.id.cmp(&y.id));
    s.contract_configs.sort_by(|x, y| x.id.cmp(&y.id));
    s.douts.sort_by(|x, y| x.id.cmp(&y.id));
    s.patterns.sort_by(|x, y| x.id.cmp(&y.id));
    s.lots.sort_by(|x, y| x.id.cmp(&y.id));
    s.bids.sort_by(|x, y| x.id.cmp(&y.id));
    b.scenario
}

fn family_of_keyword(keyword: &str) -> Option<&'static str> {
    Some(match keyword {
        "unit" => "unit",
        "source_type" => "source_type",
        "source" => "source",
        "theme" => "theme",
        "contract" => "contract",
        "commit" => "commitment",
        "sourcement" => "sourcement",
        "business" => "business",
        "contract_config" => "contract_config",
        "douts" => "douts",
        "pattern" => "pattern",
        "lot" => "lot",
        "bid" => "bid",
        _ => return None,
    })
}

fn word_of(e: &Elem) -> Option<&str> {
    match &e.kind {
        ElemKind::Word(w) | ElemKind::Str(w) => Some(w),
        _ => None,
    }
}

fn entity_ref(family: &str, id: &str) -> Option<EntityRef> {
    Some(match family {
        "unit" => EntityRef::Unit(id.into()),
        "source" => EntityRef::Source(id.into()),
        "source_type" => EntityRef::SourceType(id.into()),
        "theme" => EntityRef::Theme(id.into()),
        "contract" => EntityRef::Contract(id.into()),
        "commitment" => EntityRef::Commitment(id.into()),
        "sourcement" => EntityRef::Sourcement(id.into()),
        "business" => EntityRef::Business(id.into()),
        "contract_config" => EntityRef::ContractConfig(id.into()),
        _ => return None,
    })
}

/// Id a `commit` statement declares: the `as` name or `unit@source`.
fn commitment_decl_id(elems: &[Elem]) -> Option<(String, Span)> {
    if let Some(pos) = elems.iter().position(|e| matches!(&e.kind, ElemKind::Word(w) if w == "as")) {
        let e = elems.get(pos + 1)?;
        return word_of(e).map(|w| (w.to_owned(), e.span));
    }
    let unit = word_of(elems.first()?)?;
    let source = word_of(elems.get(2)?)?;
    Some((format!("{unit}@{source}"), elems[0].span))
}

impl Builder<'_> {
    fn err(&mut self, span: Span, code: &str, msg: impl Into<String>) {
        self.diags.push(ParseDiagnostic::new(span, code, msg, self.lines));
    }

    fn declare(&mut self, st: &Statement) {
        let Some(family) = family_of_keyword(&st.keyword) else { return };
        let decl = if family == "commitment" {
            commitment_decl_id(&st.elems)
        } else {
            match st.elems.first() {
                Some(Elem { kind: ElemKind::Typed(id, _), span }) if family == "source" => Some((id.clone(), *span)),
                Some(Elem { kind: ElemKind::Pair(id, _), span }) if family == "lot" => Some((id.clone(), *span)),
                Some(e) => word_of(e).map(|w| (w.to_owned(), e.span)),
                None => None,
            }
        };
        let Some((id, span)) = decl else { return };
        let table = self.declared.entry(family).or_default();
        if let Some(first) = table.get(&id) {
            let msg = format!("{family} `{id}` is already declared at line {}", first.line);
            self.err(span, "DUPLICATE_ID", msg);
        } else {
            table.insert(id, span);
        }
    }

    fn is_declared(&self, family: &str, id: &str) -> bool {
        self.declared.get(family).is_some_and(|t| t.contains_key(id))
    }

    /// Check a fact-layer reference. Names of overlay configurations are a
    /// layering error rather than a missing declaration.
    fn refer(&mut self, family: &'static str, id: &str, span: Span) -> bool {
        if self.is_declared(family, id) {
            return true;
        }
        self.ref_errors = true;
        if let Some(overlay) = ["business", "contract_config"].into_iter().find(|f| self.is_declared(f, id)) {
            let msg =
                format!("{family} position refers to {overlay} `{id}`; the fact layer may not reference overlays");
            self.err(span, codes::STRATIFICATION_VIOLATION, msg);
        } else {
            self.err(span, codes::UNRESOLVED_REF, format!("undeclared {family} `{id}`"));
        }
        false
    }

    fn syntax(&mut self, span: Span, msg: impl Into<String>) {
        self.err(span, "SYNTAX", msg);
    }

    fn ident(&mut self, e: &Elem, what: &str) -> Option<String> {
        match word_of(e) {
            Some(w) if !w.is_empty() => Some(w.to_owned()),
            _ => {
                self.syntax(e.span, format!("expected {what}, found {}", e.describe()));
                None
            }
        }
    }

    fn pos_ident(&mut self, cur: &mut Cursor, what: &str) -> Option<(String, Span)> {
        match cur.next() {
            Some(e) => self.ident(e, what).map(|w| (w, e.span)),
            None => {
                self.syntax(cur.end, format!("expected {what}"));
                None
            }
        }
    }

    fn literal(&mut self, cur: &mut Cursor, word: &str) -> bool {
        if cur.peek_word(word) {
            cur.i += 1;
            return true;
        }
        let found = cur.peek().map_or("the end of the statement".to_owned(), |e| e.describe());
        let span = cur.here();
        self.syntax(span, format!("expected `{word}`, found {found}"));
        false
    }

    fn text(&mut self, e: &Elem) -> Option<String> {
        match &e.kind {
            ElemKind::Str(s) | ElemKind::Word(s) => Some(s.clone()),
            _ => {
                self.syntax(e.span, format!("expected a string, found {}", e.describe()));
                None
            }
        }
    }

    fn boolean(&mut self, e: &Elem) -> Option<bool> {
        match word_of(e) {
            Some("true") => Some(true),
            Some("false") => Some(false),
            _ => {
                self.err(e.span, "INVALID_VALUE", format!("expected true or false, found {}", e.describe()));
                None
            }
        }
    }

    fn int(&mut self, e: &Elem) -> Option<i64> {
        match word_of(e).and_then(|w| w.parse().ok()) {
            Some(n) => Some(n),
            None => {
                self.err(e.span, "INVALID_VALUE", format!("expected an integer, found {}", e.describe()));
                None
            }
        }
    }

    fn rational(&mut self, e: &Elem) -> Option<Rational> {
        match word_of(e).map(parse_rational) {
            Some(Ok(r)) => Some(r),
            Some(Err(msg)) => {
                self.err(e.span, "INVALID_VALUE", msg);
                None
            }
            None => {
                self.err(e.span, "INVALID_VALUE", format!("expected a number, found {}", e.describe()));
                None
            }
        }
    }

    /// A snake_case tag of a serde enum.
    fn tag<T: DeserializeOwned>(&mut self, e: &Elem, what: &str) -> Option<T> {
        let word = word_of(e).unwrap_or_default();
        match serde_json::from_value(serde_json::Value::String(word.to_owned())) {
            Ok(v) => Some(v),
            Err(_) => {
                self.err(e.span, "INVALID_VALUE", format!("`{word}` is not a valid {what}"));
                None
            }
        }
    }

    fn list<'e>(&mut self, e: &'e Elem) -> Option<&'e [Elem]> {
        match &e.kind {
            ElemKind::List(items) => Some(items),
            _ => {
                self.syntax(e.span, format!("expected a list, found {}", e.describe()));
                None
            }
        }
    }

    fn ident_list(&mut self, e: &Elem, what: &str) -> Option<Vec<(String, Span)>> {
        let items = self.list(e)?;
        let mut out = Vec::new();
        for item in items {
            out.push((self.ident(item, what)?, item.span));
        }
        Some(out)
    }

    fn checked_list<T: From<String> + Ord>(&mut self, e: &Elem, family: &'static str) -> BTreeSet<T> {
        let mut out = BTreeSet::new();
        for (id, span) in self.ident_list(e, &format!("a {family} id")).unwrap_or_default() {
            self.refer(family, &id, span);
            out.insert(T::from(id));
        }
        out
    }

    fn block_pairs(&mut self, items: &[Vec<Elem>], pairs: &mut Pairs) {
        for e in items.iter().flatten() {
            self.add_pair(e, pairs);
        }
    }

    fn add_pair(&mut self, e: &Elem, pairs: &mut Pairs) {
        match &e.kind {
            ElemKind::Pair(k, v) => {
                if pairs.contains_key(k) {
                    self.err(e.span, "DUPLICATE_KEY", format!("`{k}` is given twice"));
                } else {
                    pairs.insert(k.clone(), (**v).clone());
                }
            }
            _ => self.syntax(e.span, format!("expected `key=value`, found {}", e.describe())),
        }
    }

    /// Remaining `key=value` elements, optionally with one trailing block
    /// returned as raw items.
    fn rest(&mut self, cur: &mut Cursor, allowed: &[&str], block_as_pairs: bool) -> (Pairs, Option<Vec<Vec<Elem>>>) {
        let mut pairs = Pairs::new();
        let mut block = None;
        while let Some(e) = cur.next() {
            match &e.kind {
                ElemKind::Block(items) if block_as_pairs => self.block_pairs(items, &mut pairs),
                ElemKind::Block(items) if block.is_none() => block = Some(items.clone()),
                ElemKind::Pair(..) => self.add_pair(e, &mut pairs),
                _ => self.syntax(e.span, format!("unexpected {}", e.describe())),
            }
        }
        self.only(&pairs, allowed);
        (pairs, block)
    }

    fn only(&mut self, pairs: &Pairs, allowed: &[&str]) {
        for (k, v) in pairs {
            if !allowed.contains(&k.as_str()) {
                let msg = format!("unknown attribute `{k}`; expected one of {}", allowed.join(", "));
                self.syntax(v.span, msg);
            }
        }
    }

    fn required<'p>(&mut self, pairs: &'p Pairs, key: &str, span: Span) -> Option<&'p Elem> {
        let v = pairs.get(key);
        if v.is_none() {
            self.syntax(span, format!("missing attribute `{key}=`"));
        }
        v
    }

    fn ref_attr(&mut self, pairs: &Pairs, key: &str, family: &'static str, span: Span) -> Option<String> {
        let e = self.required(pairs, key, span)?;
        let id = self.ident(e, &format!("a {family} id"))?;
        self.refer(family, &id, e.span);
        Some(id)
    }

    fn statement(&mut self, st: &Statement) {
        let mut cur = Cursor::new(&st.elems, st.span);
        match st.keyword.as_str() {
            "clock" => {
                if let Some(e) = cur.next() {
                    if let Some(n) = self.int(e) {
                        self.scenario.world.timestamp = n;
                    }
                } else {
                    self.syntax(st.span, "expected a timestamp");
                }
                self.rest(&mut cur, &[], false);
            }
            "unit" => self.unit(st, &mut cur),
            "source_type" => {
                let Some((id, _)) = self.pos_ident(&mut cur, "a source type id") else { return };
                let (pairs, _) = self.rest(&mut cur, &["singleton"], true);
                let singleton = pairs.get("singleton").and_then(|e| self.boolean(e)).unwrap_or(false);
                self.scenario.world.add_source_type(id, singleton);
            }
            "source" => self.source(st, &mut cur),
            "theme" => {
                let Some((id, _)) = self.pos_ident(&mut cur, "a theme id") else { return };
                if !self.literal(&mut cur, "by") {
                    return;
                }
                let Some((maintainer, span)) = self.pos_ident(&mut cur, "a unit id") else { return };
                self.refer("unit", &maintainer, span);
                let (pairs, _) = self.rest(&mut cur, &["name", "cluster"], true);
                let name = pairs.get("name").and_then(|e| self.text(e)).unwrap_or_else(|| id.clone());
                let cluster = pairs.get("cluster").and_then(|e| self.text(e));
                self.scenario.world.add_theme(Theme { id: id.into(), maintainer: maintainer.into(), name, cluster });
            }
            "use" => {
                let Some((user, us)) = self.pos_ident(&mut cur, "a unit id") else { return };
                let Some((source, ss)) = self.pos_ident(&mut cur, "a source id") else { return };
                if !self.literal(&mut cur, "for") {
                    return;
                }
                let Some((theme, ts)) = self.pos_ident(&mut cur, "a theme id") else { return };
                self.rest(&mut cur, &[], false);
                self.refer("unit", &user, us);
                self.refer("source", &source, ss);
                self.refer("theme", &theme, ts);
                let relation = UseRelation::new(user, source, theme);
                if !self.scenario.world.use_relations.insert(relation) {
                    self.err(st.span, "DUPLICATE_ID", "this use relation is already declared");
                }
            }
            "contract" => {
                let Some((id, _)) = self.pos_ident(&mut cur, "a contract id") else { return };
                let (pairs, _) = self.rest(&mut cur, &CONTRACT_KEYS, true);
                if let Some(c) = self.contract_body(id, &pairs, st.span) {
                    self.scenario.world.add_contract(c);
                }
            }
            "commit" => self.commit(st, &mut cur),
            "business" => self.business(st, &mut cur),
            "contract_config" => self.contract_config(st, &mut cur),
            "douts" => self.douts(st, &mut cur),
            "lot" => {
                let Some(Elem { kind: ElemKind::Pair(id, list), .. }) = cur.next() else {
                    self.syntax(st.span, "expected `lot <id> = [<pattern>, ...]`");
                    return;
                };
                let mut patterns = Vec::new();
                for (p, span) in self.ident_list(list, "a pattern id").unwrap_or_default() {
                    if !self.is_declared("pattern", &p) {
                        self.err(span, codes::UNRESOLVED_REF, format!("undeclared pattern `{p}`"));
                    }
                    patterns.push(p);
                }
                self.rest(&mut cur, &[], false);
                self.scenario.lots.push(LotDecl { id: id.clone(), patterns });
            }
            "apply" => {
                if let Some(action) = self.apply(st, &mut cur) {
                    self.scenario.script.push(ScriptItem { span: st.span, action });
                }
            }
            "step" => {
                if let Some(action) = self.step(st, &mut cur) {
                    self.scenario.script.push(ScriptItem { span: st.span, action });
                }
            }
            "assert" => {
                if let Some(a) = self.assertion(st, &mut cur) {
                    self.scenario.script.push(ScriptItem { span: st.span, action: ScriptAction::Assert(a) });
                }
            }
            other => self.syntax(st.span, format!("`{other}` cannot start a statement")),
        }
    }

    fn unit(&mut self, _st: &Statement, cur: &mut Cursor) {
        let Some((id, _)) = self.pos_ident(cur, "a unit id") else { return };
        let (pairs, _) = self.rest(cur, &["name", "parent", "mission"], true);
        let name = pairs.get("name").and_then(|e| self.text(e)).unwrap_or_else(|| id.clone());
        let parent = pairs.get("parent").and_then(|e| {
            let p = self.ident(e, "a unit id")?;
            self.refer("unit", &p, e.span);
            Some(UnitId::from(p))
        });
        let mission = pairs.get("mission").and_then(|e| self.text(e));
        self.scenario.world.add_unit(Unit { id: id.into(), name, parent, mission });
    }

    fn source(&mut self, _st: &Statement, cur: &mut Cursor) {
        let (id, (ty, ty_span)) = match cur.peek() {
            Some(Elem { kind: ElemKind::Typed(id, ty), span }) => {
                cur.i += 1;
                (id.clone(), (ty.clone(), *span))
            }
            _ => {
                let Some((id, _)) = self.pos_ident(cur, "a source id") else { return };
                match cur.next() {
                    Some(Elem { kind: ElemKind::Op(Tok::Colon), .. }) => {}
                    _ => {
                        self.syntax(cur.end, "expected `:` and a source type");
                        return;
                    }
                }
                let Some(ty) = self.pos_ident(cur, "a source type id") else { return };
                (id, ty)
            }
        };
        self.refer("source_type", &ty, ty_span);
        if !self.literal(cur, "owned_by") {
            return;
        }
        let Some((owner, os)) = self.pos_ident(cur, "a unit id") else { return };
        self.refer("unit", &owner, os);
        let (pairs, _) = self.rest(cur, &["descriptor", "depends_on"], true);
        let descriptor = pairs.get("descriptor").and_then(|e| self.text(e)).unwrap_or_default();
        let depends_on = pairs.get("depends_on").map(|e| self.checked_list(e, "source")).unwrap_or_default();
        self.scenario.world.add_source(Source {
            id: id.into(),
            source_type: ty.into(),
            owner: owner.into(),
            descriptor,
            depends_on,
        });
    }

    fn period(&mut self, e: &Elem) -> Option<Period> {
        match &e.kind {
            ElemKind::Tuple(items) if items.len() == 2 => {
                let start = self.int(&items[0])?;
                let end = self.int(&items[1])?;
                Some(Period { start, end })
            }
            _ => {
                self.syntax(e.span, format!("expected a period `(start, end)`, found {}", e.describe()));
                None
            }
        }
    }

    fn contract_body(&mut self, id: String, pairs: &Pairs, span: Span) -> Option<ServiceContract> {
        let provider = self.ref_attr(pairs, "provider", "unit", span);
        let consumer = self.ref_attr(pairs, "consumer", "unit", span);
        let theme = self.ref_attr(pairs, "theme", "theme", span);
        let period = self.required(pairs, "period", span).and_then(|e| self.period(e));
        let notice = self.required(pairs, "notice", span).and_then(|e| self.int(e));
        let termination_protocol = pairs.get("protocol").and_then(|e| self.text(e)).unwrap_or_default();
        let compensation = match pairs.get("compensation") {
            Some(e) => self.tag(e, "compensation")?,
            None => Compensation::None,
        };
        let terms = match pairs.get("terms") {
            Some(e) => self.tag(e, "commitment terms")?,
            None => CommitmentTerms::Unspecified,
        };
        let unit_commitment = match pairs.get("unit_commitment") {
            Some(e) => self.boolean(e)?,
            None => false,
        };
        let management_source = match pairs.get("management") {
            Some(e) => {
                let s = self.ident(e, "a source id")?;
                self.refer("source", &s, e.span);
                Some(SourceId::from(s))
            }
            None => None,
        };
        Some(ServiceContract {
            id: id.into(),
            provider: provider?.into(),
            consumer: consumer?.into(),
            theme: theme?.into(),
            period: period?,
            termination_protocol,
            notice_interval: notice?,
            compensation,
            intentional_commitment_terms: terms,
            unit_commitment,
            management_source,
        })
    }

    fn commit(&mut self, _st: &Statement, cur: &mut Cursor) {
        let Some((unit, us)) = self.pos_ident(cur, "a unit id") else { return };
        if !self.literal(cur, "to") {
            return;
        }
        let Some((source, ss)) = self.pos_ident(cur, "a source id") else { return };
        self.refer("unit", &unit, us);
        self.refer("source", &source, ss);
        let origin = if cur.peek_word("via") {
            cur.i += 1;
            let Some((contract, cs)) = self.pos_ident(cur, "a contract id") else { return };
            self.refer("contract", &contract, cs);
            CommitmentOrigin::Contract(contract.into())
        } else {
            match cur.next() {
                Some(Elem { kind: ElemKind::Pair(k, v), .. }) if k == "event" => {
                    let Some(n) = self.int(v) else { return };
                    match u64::try_from(n) {
                        Ok(n) => CommitmentOrigin::Event(n),
                        Err(_) => {
                            self.err(v.span, "INVALID_VALUE", "event numbers are non-negative");
                            return;
                        }
                    }
                }
                other => {
                    let span = other.map_or(cur.end, |e| e.span);
                    self.syntax(span, "expected `via <contract>` or `event=<n>`");
                    return;
                }
            }
        };
        let id = if cur.peek_word("as") {
            cur.i += 1;
            let Some((id, _)) = self.pos_ident(cur, "a commitment id") else { return };
            id
        } else {
            format!("{unit}@{source}")
        };
        self.rest(cur, &[], false);
        self.scenario.world.add_commitment(SourceCommitment {
            id: id.into(),
            committed_unit: unit.into(),
            source: source.into(),
            origin,
        });
    }

    fn sourcement(&mut self, st: &Statement) {
        let mut cur = Cursor::new(&st.elems, st.span);
        let Some((id, _)) = self.pos_ident(&mut cur, "a sourcement id") else { return };
        let (pairs, block) = self.rest(&mut cur, &["principal", "themes", "stability", "deadline", "history"], false);
        let Some(principal) = self.ref_attr(&pairs, "principal", "unit", st.span) else { return };
        let mut sm = Sourcement::new(id, principal.clone());
        if let Some(e) = pairs.get("themes") {
            sm.themes = self.checked_list(e, "theme");
        }
        let deadline = pairs.get("deadline").and_then(|e| self.int(e));
        sm.stability = match pairs.get("stability").and_then(word_of) {
            None | Some("stable") if deadline.is_none() => Stability::Stable,
            None | Some("unstable") => match deadline {
                Some(deadline) => Stability::Unstable { deadline },
                None => {
                    self.syntax(st.span, "an unstable sourcement needs `deadline=`");
                    return;
                }
            },
            Some(other) => {
                let span = pairs["stability"].span;
                self.err(span, "INVALID_VALUE", format!("`{other}` is not a stability; expected stable or unstable"));
                return;
            }
        };
        if let Some(e) = pairs.get("history") {
            if let Some(items) = self.list(e) {
                for item in items {
                    match self.int(item).map(u64::try_from) {
                        Some(Ok(n)) => sm.history.push(n),
                        Some(Err(_)) => self.err(item.span, "INVALID_VALUE", "event numbers are non-negative"),
                        None => {}
                    }
                }
            }
        }
        for item in block.unwrap_or_default() {
            let first = &item[0];
            match &first.kind {
                ElemKind::Word(w) if w == "basic" => {
                    let Some(list) = item.get(1) else {
                        self.syntax(first.span, "expected a list of sources after `basic`");
                        continue;
                    };
                    let sources: BTreeSet<SourceId> = self.checked_list(list, "source");
                    if sources.is_empty() {
                        self.err(list.span, "INVALID_VALUE", "a basic sourcement needs at least one source");
                    }
                    for extra in &item[2..] {
                        self.syntax(extra.span, format!("unexpected {}", extra.describe()));
                    }
                    if !sm.basics.insert(BasicSourcement { sources, owner: principal.clone().into() }) {
                        self.err(first.span, "DUPLICATE_ID", "this basic sourcement is already listed");
                    }
                }
                _ => {
                    for e in &item {
                        self.attribute(e, &mut sm.attributes);
                    }
                }
            }
        }
        self.scenario.world.add_sourcement(sm);
    }

    fn attribute(&mut self, e: &Elem, attrs: &mut AttributeRecord) {
        let ElemKind::Pair(key, value) = &e.kind else {
            self.syntax(e.span, format!("expected `basic [..]` or `attribute=value`, found {}", e.describe()));
            return;
        };
        let text_slot = match key.as_str() {
            "thematic_operations" => Some(&mut attrs.thematic_operations),
            "intellectual_property" => Some(&mut attrs.intellectual_property),
            "data_knowledge_software" => Some(&mut attrs.data_knowledge_software),
            _ => None,
        };
        if let Some(slot) = text_slot {
            *slot = self.text(value);
            return;
        }
        if !SOURCE_ATTRIBUTES.contains(&key.as_str()) {
            self.syntax(e.span, format!("unknown sourcement attribute `{key}`"));
            return;
        }
        let set = self.checked_list(value, "source");
        if let Some(slot) = attrs.source_ref_mut(key) {
            *slot = Some(set);
        }
    }

    /// An overlay reference: `family:id` or a bare id looked up by family.
    fn overlay_ref(&mut self, e: &Elem) -> Option<EntityRef> {
        match &e.kind {
            ElemKind::Typed(family, id) => {
                let r = entity_ref(family, id);
                if r.is_none() {
                    self.err(e.span, "INVALID_VALUE", format!("`{family}` is not an entity family"));
                }
                r
            }
            _ => {
                let id = self.ident(e, "an entity reference")?;
                match REF_ORDER.into_iter().find(|f| self.is_declared(f, &id)) {
                    Some(family) => entity_ref(family, &id),
                    None => {
                        self.err(e.span, codes::UNRESOLVED_REF, format!("`{id}` names no declared entity"));
                        None
                    }
                }
            }
        }
    }

    fn refs(&mut self, e: &Elem) -> Vec<EntityRef> {
        let Some(items) = self.list(e) else { return Vec::new() };
        items.iter().filter_map(|item| self.overlay_ref(item)).collect()
    }

    fn labeled(&mut self, item: &[Elem]) -> Option<LabeledRefs> {
        let label = self.text(item.get(1).or_else(|| item.first())?)?;
        let refs = match item.get(2) {
            Some(e) => self.refs(e),
            None => Vec::new(),
        };
        for extra in item.iter().skip(3) {
            self.syntax(extra.span, format!("unexpected {}", extra.describe()));
        }
        Some(LabeledRefs { label, refs })
    }

    fn item_text(&mut self, item: &[Elem]) -> Option<String> {
        let Some(e) = item.get(1) else {
            self.syntax(item[0].span, "expected a string");
            return None;
        };
        for extra in item.iter().skip(2) {
            self.syntax(extra.span, format!("unexpected {}", extra.describe()));
        }
        self.text(e)
    }

    fn business(&mut self, st: &Statement, cur: &mut Cursor) {
        let Some((id, _)) = self.pos_ident(cur, "a business id") else { return };
        if !self.literal(cur, "for") {
            return;
        }
        let Some((unit, _)) = self.pos_ident(cur, "a unit id") else { return };
        let (_, block) = self.rest(cur, &[], false);
        let mut b = BusinessConfig {
            id: id.into(),
            unit: unit.into(),
            operational_options: Vec::new(),
            business_category: String::new(),
            profit_centers: Vec::new(),
            bleeders: Vec::new(),
            market_acquisition_motives: Vec::new(),
        };
        for item in block.unwrap_or_default() {
            let head = word_of(&item[0]).unwrap_or_default().to_owned();
            match head.as_str() {
                "category" => b.business_category = self.item_text(&item).unwrap_or_default(),
                "option" => b.operational_options.extend(self.item_text(&item)),
                "motive" => b.market_acquisition_motives.extend(self.item_text(&item)),
                "profit_center" => b.profit_centers.extend(self.labeled(&item)),
                "bleeder" => b.bleeders.extend(self.labeled(&item)),
                _ => self.syntax(
                    item[0].span,
                    format!(
                        "expected category, option, profit_center, bleeder, or motive, found {}",
                        item[0].describe()
                    ),
                ),
            }
        }
        let _ = st;
        self.scenario.business.push(b);
    }

    fn contract_config(&mut self, _st: &Statement, cur: &mut Cursor) {
        let Some((id, _)) = self.pos_ident(cur, "a contract configuration id") else { return };
        let (pairs, block) = self.rest(cur, &["scope"], false);
        let mut c = ContractConfig {
            id: id.into(),
            scope: BTreeSet::new(),
            general_law: Vec::new(),
            rules_of_trade: Vec::new(),
            sustainability_charters: Vec::new(),
            promises: Vec::new(),
            agreements: Vec::new(),
            contracts: Vec::new(),
            refs: Vec::new(),
        };
        if let Some(e) = pairs.get("scope") {
            c.scope = self.ident_list(e, "a unit id").unwrap_or_default().into_iter().map(|(u, _)| u.into()).collect();
        }
        for item in block.unwrap_or_default() {
            let head = word_of(&item[0]).unwrap_or_default().to_owned();
            match head.as_str() {
                "law" => c.general_law.extend(self.item_text(&item)),
                "trade" => c.rules_of_trade.extend(self.item_text(&item)),
                "charter" => c.sustainability_charters.extend(self.item_text(&item)),
                "promise" => {
                    let ok = item.len() == 6 && matches!(item[3].kind, ElemKind::Op(Tok::Arrow));
                    if !ok {
                        self.syntax(item[0].span, "expected `promise <id> <unit> -> <unit> \"text\"`");
                        continue;
                    }
                    let (Some(pid), Some(from), Some(to), Some(text)) = (
                        self.ident(&item[1], "a promise id"),
                        self.ident(&item[2], "a unit id"),
                        self.ident(&item[4], "a unit id"),
                        self.text(&item[5]),
                    ) else {
                        continue;
                    };
                    c.promises.push(Promise { id: pid, from: from.into(), to: to.into(), text });
                }
                "agreement" => {
                    if item.len() != 3 {
                        self.syntax(item[0].span, "expected `agreement <promise> <promise>`");
                        continue;
                    }
                    if let (Some(first), Some(second)) =
                        (self.ident(&item[1], "a promise id"), self.ident(&item[2], "a promise id"))
                    {
                        c.agreements.push(Agreement { first, second });
                    }
                }
                "contracts" => {
                    if let Some(e) = item.get(1) {
                        let ids = self.ident_list(e, "a contract id").unwrap_or_default();
                        c.contracts.extend(ids.into_iter().map(|(id, _)| ContractId::from(id)));
                    }
                }
                "refs" => {
                    if let Some(e) = item.get(1) {
                        let refs = self.refs(e);
                        c.refs.extend(refs);
                    }
                }
                _ => self.syntax(
                    item[0].span,
                    format!(
                        "expected law, trade, charter, promise, agreement, contracts, or refs, found {}",
                        item[0].describe()
                    ),
                ),
            }
        }
        self.scenario.contract_configs.push(c);
    }

    fn douts(&mut self, st: &Statement, cur: &mut Cursor) {
        let Some((id, _)) = self.pos_ident(cur, "a D_outs id") else { return };
        let (pairs, _) = self.rest(cur, &DOUTS_KEYS, true);
        let flag = |b: &mut Self, key: &str| pairs.get(key).and_then(|e| b.boolean(e)).unwrap_or(false);
        let service_contracted = self.required(&pairs, "service_contracted", st.span).and_then(|e| self.boolean(e));
        let sources_transferred = self.required(&pairs, "sources_transferred", st.span).and_then(|e| self.boolean(e));
        let service_volume = self.required(&pairs, "service_volume", st.span).and_then(|e| self.rational(e));
        let production = self.required(&pairs, "transferred_production_volume", st.span).and_then(|e| self.rational(e));
        let mut lift = LiftConditions::default();
        if let Some(e) = pairs.get("lift") {
            for (name, span) in self.ident_list(e, "a lift condition").unwrap_or_default() {
                if !lift.set(&name, true) {
                    let msg = format!(
                        "unknown lift condition `{name}`; expected one of {}",
                        LiftConditions::NAMES.join(", ")
                    );
                    self.err(span, "INVALID_VALUE", msg);
                }
            }
        }
        let input = DoutsInput {
            service_contracted: match service_contracted {
                Some(v) => v,
                None => return,
            },
            sources_transferred: match sources_transferred {
                Some(v) => v,
                None => return,
            },
            independent_markets_as_economic: flag(self, "independent_markets_as_economic"),
            initial_production_by_transferred_sources: flag(self, "initial_production_by_transferred_sources"),
            lift_conditions: lift,
            service_volume: match service_volume {
                Some(v) => v,
                None => return,
            },
            transferred_production_volume: match production {
                Some(v) => v,
                None => return,
            },
            multi_party: flag(self, "multi_party"),
        };
        if let Err(e) = input.validate() {
            self.err(st.span, "INVALID_VALUE", e.to_string());
            return;
        }
        self.scenario.douts.push(DoutsDecl { id, input });
    }

    fn pattern(&mut self, st: &Statement) {
        let mut cur = Cursor::new(&st.elems, st.span);
        let Some((id, _)) = self.pos_ident(&mut cur, "a pattern id") else { return };
        if !self.literal(&mut cur, "from") || !self.literal(&mut cur, "sourcement") {
            return;
        }
        let Some((sm_id, sm_span)) = self.pos_ident(&mut cur, "a sourcement id") else { return };
        if !self.literal(&mut cur, "vary") {
            return;
        }
        let Some(vary_elem) = cur.next() else {
            self.syntax(st.span, "expected a list of names to vary");
            return;
        };
        let vary: BTreeSet<String> = self
            .ident_list(vary_elem, "a unit or source name")
            .unwrap_or_default()
            .into_iter()
            .map(|(v, _)| v)
            .collect();
        let (_, block) = self.rest(&mut cur, &[], false);
        let mut extra = Vec::new();
        for item in block.unwrap_or_default() {
            if !matches!(&item[0].kind, ElemKind::Word(w) if w == "require") {
                self.syntax(item[0].span, format!("expected `require`, found {}", item[0].describe()));
                continue;
            }
            let Some(var) = item.get(1).and_then(|e| self.ident(e, "a variable name")) else { continue };
            let mut c = Constraint { variable: var, text: String::new(), source_type: None, singleton: None };
            for e in &item[2..] {
                match &e.kind {
                    ElemKind::Str(s) => c.text = s.clone(),
                    ElemKind::Pair(k, v) if k == "type" => {
                        c.source_type = self.ident(v, "a source type").map(Into::into)
                    }
                    ElemKind::Pair(k, v) if k == "singleton" => c.singleton = self.boolean(v),
                    _ => self.syntax(e.span, format!("unexpected {} in a requirement", e.describe())),
                }
            }
            extra.push(c);
        }
        let Some(sourcement) = self.scenario.world.sourcements.get(sm_id.as_str()).cloned() else {
            self.err(sm_span, codes::UNRESOLVED_REF, format!("undeclared sourcement `{sm_id}`"));
            return;
        };
        let mut pattern = match abstract_pattern(&self.scenario.world, &id, &sourcement, &vary) {
            Ok(p) => p,
            Err(e) => {
                self.err(vary_elem.span, e.code(), e.to_string());
                return;
            }
        };
        for c in &extra {
            if pattern.variable(&c.variable).is_none() {
                self.err(st.span, codes::UNRESOLVED_REF, format!("pattern {id} has no variable `{}`", c.variable));
            }
        }
        pattern.constraints.extend(extra.iter().cloned());
        self.scenario.patterns.push(PatternDecl {
            id,
            sourcement: sm_id.into(),
            vary,
            extra_constraints: extra,
            pattern,
        });
    }

    fn check_lots(&mut self) {
        let lots: Vec<Lot> = self.scenario.lots.iter().filter_map(|l| self.scenario.lot(&l.id)).collect();
        for lot in lots {
            for d in check_lot(&lot) {
                if d.severity == Severity::Error {
                    let span = self.declared.get("lot").and_then(|t| t.get(&lot.id)).copied().unwrap_or_default();
                    self.err(span, &d.code, d.message);
                }
            }
        }
    }

    fn bid(&mut self, st: &Statement) {
        let mut cur = Cursor::new(&st.elems, st.span);
        let Some((id, _)) = self.pos_ident(&mut cur, "a bid id") else { return };
        if !self.literal(&mut cur, "on") {
            return;
        }
        let Some((lot_id, lot_span)) = self.pos_ident(&mut cur, "a lot id") else { return };
        if !self.is_declared("lot", &lot_id) {
            self.err(lot_span, codes::UNRESOLVED_REF, format!("undeclared lot `{lot_id}`"));
        }
        let lot = self.scenario.lot(&lot_id);
        let mut bid = Bid { id, lot: lot_id, bindings: BTreeMap::new(), offered_insourcing: BTreeSet::new() };
        if cur.peek_word("bind") {
            cur.i += 1;
            while let Some(Elem { kind: ElemKind::Pair(name, value), span }) = cur.peek() {
                cur.i += 1;
                let binding = match &value.kind {
                    ElemKind::Typed(sort, target) => match sort.as_str() {
                        "unit" => Binding::Unit(target.as_str().into()),
                        "source" => Binding::Source(target.as_str().into()),
                        _ => {
                            self.err(
                                value.span,
                                "INVALID_VALUE",
                                format!("`{sort}` is not a binding sort; expected unit or source"),
                            );
                            continue;
                        }
                    },
                    _ => {
                        let Some(target) = self.ident(value, "a unit or source") else { continue };
                        self.infer_binding(lot.as_ref(), name, target)
                    }
                };
                if bid.bindings.insert(name.clone(), binding).is_some() {
                    self.err(*span, "DUPLICATE_KEY", format!("`{name}` is bound twice"));
                }
            }
        }
        if cur.peek_word("offer") {
            cur.i += 1;
            match cur.next() {
                Some(e) => {
                    let ids = self.ident_list(e, "a source id").unwrap_or_default();
                    bid.offered_insourcing = ids.into_iter().map(|(s, _)| s.into()).collect();
                }
                None => self.syntax(st.span, "expected a list of sources after `offer`"),
            }
        }
        self.rest(&mut cur, &[], false);
        self.scenario.bids.push(bid);
    }

    fn infer_binding(&self, lot: Option<&Lot>, name: &str, target: String) -> Binding {
        let declared_sort = lot.and_then(|lot| {
            lot.variables()
                .into_iter()
                .find(|lv| lv.qualified == name || lv.variable.name == name)
                .map(|lv| lv.variable.sort)
        });
        let sort =
            declared_sort.unwrap_or(if self.is_declared("source", &target) && !self.is_declared("unit", &target) {
                Sort::SourceVar
            } else {
                Sort::UnitVar
            });
        match sort {
            Sort::UnitVar => Binding::Unit(target.into()),
            Sort::SourceVar => Binding::Source(target.into()),
        }
    }

    fn validate_world(&mut self) {
        let diagnostics = validate_state(&self.scenario.world);
        let layers = validate_layers(&self.scenario.world, &self.scenario.business, &self.scenario.contract_configs);
        for d in diagnostics.into_iter().chain(layers) {
            let span = self.span_of(&d.entities);
            self.err(span, &d.code, d.message);
        }
    }

    fn span_of(&self, entities: &[String]) -> Span {
        for e in entities {
            let (family, id) = match e.split_once(':') {
                Some((f, id)) if self.declared.contains_key(f) => (Some(f), id),
                _ => (None, e.as_str()),
            };
            let families: Vec<&str> = match family {
                Some(f) => vec![f],
                None => FACT_FAMILIES.iter().copied().chain(["business", "contract_config"]).collect(),
            };
            for f in families {
                if let Some(span) = self.declared.get(f).and_then(|t| t.get(id)) {
                    return *span;
                }
            }
        }
        Span::new((1, 1), (1, 1))
    }

    fn apply(&mut self, st: &Statement, cur: &mut Cursor) -> Option<ScriptAction> {
        let (kind_word, kind_span) = self.pos_ident(cur, "a transformation kind")?;
        let kind: TransformationKind = match kind_word.parse() {
            Ok(k) => k,
            Err(msg) => {
                self.err(kind_span, "INVALID_VALUE", msg);
                return None;
            }
        };
        let (pairs, _) = self.rest(cur, &APPLY_KEYS, false);
        let actor = self.required(&pairs, "actor", st.span).and_then(|e| self.ident(e, "a unit id"))?;
        let subjects: Vec<&str> = ["sources", "type", "theme", "sourcement", "contract"]
            .into_iter()
            .filter(|k| pairs.contains_key(*k))
            .collect();
        let subject = match subjects.as_slice() {
            [one] => {
                let e = &pairs[*one];
                match *one {
                    "sources" => Subject::Sources(self.ids(e, "a source id")?),
                    "type" => Subject::Type(self.ident(e, "a source type id")?.into()),
                    "theme" => Subject::Theme(self.ident(e, "a theme id")?.into()),
                    "sourcement" => Subject::Sourcement(self.ident(e, "a sourcement id")?.into()),
                    _ => Subject::Contract(self.ident(e, "a contract id")?.into()),
                }
            }
            [] => {
                self.syntax(st.span, "missing subject: give one of sources=, type=, theme=, sourcement=, contract=");
                return None;
            }
            _ => {
                self.syntax(st.span, format!("more than one subject given: {}", subjects.join(", ")));
                return None;
            }
        };
        let mut spec = TransformationSpec::new(kind, actor, subject);
        if let Some(e) = pairs.get("to") {
            spec.counterparties = self.ident_list(e, "a unit id")?.into_iter().map(|(u, _)| u.into()).collect();
        }
        if let Some(e) = pairs.get("service") {
            spec.service = Some(self.service(e)?);
        }
        if let Some(e) = pairs.get("commit") {
            spec.commitments_to_create = self.ids(e, "a source id")?;
        }
        if let Some(e) = pairs.get("compensation") {
            spec.compensation = self.tag(e, "compensation")?;
        }
        if let Some(e) = pairs.get("assign") {
            let ElemKind::Block(items) = &e.kind else {
                self.syntax(e.span, "expected `{source=unit ...}`");
                return None;
            };
            let mut map = Pairs::new();
            self.block_pairs(items, &mut map);
            for (s, u) in map {
                spec.assignments.insert(s.into(), self.ident(&u, "a unit id")?.into());
            }
        }
        if let Some(e) = pairs.get("develop") {
            spec.develop = Some(self.develop(e)?);
        }
        if let Some(e) = pairs.get("split") {
            for part in self.list(e)? {
                spec.split.push(self.ids(part, "a source id")?);
            }
        }
        if let Some(e) = pairs.get("mission_tied") {
            spec.mission_tied = Some(self.boolean(e)?);
        }
        if let Some(e) = pairs.get("at") {
            spec.at = Some(self.int(e)?);
        }
        let expect = match pairs.get("expect") {
            Some(e) => Some(self.ident(e, "an error code")?),
            None => None,
        };
        Some(ScriptAction::Apply { spec, expect })
    }

    fn ids<T: From<String> + Ord>(&mut self, e: &Elem, what: &str) -> Option<BTreeSet<T>> {
        Some(self.ident_list(e, what)?.into_iter().map(|(id, _)| T::from(id)).collect())
    }

    fn map_block(&mut self, e: &Elem, allowed: &[&str]) -> Option<Pairs> {
        let ElemKind::Block(items) = &e.kind else {
            self.syntax(e.span, format!("expected `{{key=value ...}}`, found {}", e.describe()));
            return None;
        };
        let mut pairs = Pairs::new();
        self.block_pairs(items, &mut pairs);
        self.only(&pairs, allowed);
        Some(pairs)
    }

    fn service(&mut self, e: &Elem) -> Option<ServicePayload> {
        let pairs = self.map_block(e, &SERVICE_KEYS)?;
        let contract = self.required(&pairs, "contract", e.span).and_then(|v| self.ident(v, "a contract id"));
        let theme = self.required(&pairs, "theme", e.span).and_then(|v| self.ident(v, "a theme id"));
        let period = self.required(&pairs, "period", e.span).and_then(|v| self.period(v));
        let notice = self.required(&pairs, "notice", e.span).and_then(|v| self.int(v));
        let termination_protocol = pairs.get("protocol").and_then(|v| self.text(v)).unwrap_or_default();
        let terms = match pairs.get("terms") {
            Some(v) => self.tag(v, "commitment terms")?,
            None => CommitmentTerms::Unspecified,
        };
        let unit_commitment = match pairs.get("unit_commitment") {
            Some(v) => self.boolean(v)?,
            None => false,
        };
        let management_source = match pairs.get("management") {
            Some(v) => Some(self.ident(v, "a source id")?.into()),
            None => None,
        };
        Some(ServicePayload {
            contract: contract?.into(),
            theme: theme?.into(),
            period: period?,
            notice_interval: notice?,
            termination_protocol,
            terms,
            unit_commitment,
            management_source,
        })
    }

    fn develop(&mut self, e: &Elem) -> Option<DevelopPayload> {
        let pairs = self.map_block(e, &["type", "descriptor", "depends_on", "use_for"])?;
        let source_type = self.required(&pairs, "type", e.span).and_then(|v| self.ident(v, "a source type id"))?;
        let descriptor = pairs.get("descriptor").and_then(|v| self.text(v)).unwrap_or_default();
        let depends_on = match pairs.get("depends_on") {
            Some(v) => self.ids(v, "a source id")?,
            None => BTreeSet::new(),
        };
        let use_for = match pairs.get("use_for") {
            Some(v) => Some(self.ident(v, "a theme id")?.into()),
            None => None,
        };
        Some(DevelopPayload { source_type: source_type.into(), descriptor, depends_on, use_for })
    }

    fn json(&mut self, e: &Elem) -> Option<serde_json::Value> {
        use serde_json::Value as J;
        Some(match &e.kind {
            ElemKind::Word(w) => match w.as_str() {
                "true" => J::Bool(true),
                "false" => J::Bool(false),
                _ => match w.parse::<i64>() {
                    Ok(n) => J::from(n),
                    Err(_) => J::String(w.clone()),
                },
            },
            ElemKind::Str(s) => J::String(s.clone()),
            ElemKind::Typed(f, id) => J::String(format!("{f}:{id}")),
            ElemKind::List(items) | ElemKind::Tuple(items) => {
                J::Array(items.iter().map(|i| self.json(i)).collect::<Option<Vec<_>>>()?)
            }
            ElemKind::Block(items) => {
                let mut map = serde_json::Map::new();
                for item in items.iter().flatten() {
                    let ElemKind::Pair(k, v) = &item.kind else {
                        self.syntax(item.span, format!("expected `key=value`, found {}", item.describe()));
                        return None;
                    };
                    let v = self.json(v)?;
                    map.insert(k.clone(), v);
                }
                J::Object(map)
            }
            ElemKind::Pair(..) | ElemKind::Op(_) => {
                self.syntax(e.span, format!("unexpected {}", e.describe()));
                return None;
            }
        })
    }

    fn step(&mut self, st: &Statement, cur: &mut Cursor) -> Option<ScriptAction> {
        let (op, _) = self.pos_ident(cur, "a step operation")?;
        let mut map = serde_json::Map::new();
        map.insert("op".into(), serde_json::Value::String(op));
        let mut expect = None;
        while let Some(e) = cur.next() {
            match &e.kind {
                ElemKind::Pair(k, v) if k == "expect" => expect = Some(self.ident(v, "an error code")?),
                ElemKind::Pair(k, v) => {
                    let v = self.json(v)?;
                    if map.insert(k.clone(), v).is_some() {
                        self.err(e.span, "DUPLICATE_KEY", format!("`{k}` is given twice"));
                    }
                }
                _ => {
                    self.syntax(e.span, format!("expected `key=value`, found {}", e.describe()));
                    return None;
                }
            }
        }
        match serde_json::from_value::<PrimitiveStep>(serde_json::Value::Object(map)) {
            Ok(step) => Some(ScriptAction::Step { step, expect }),
            Err(err) => {
                self.err(st.span, "INVALID_VALUE", format!("malformed step: {err}"));
                None
            }
        }
    }

    fn assertion(&mut self, st: &Statement, cur: &mut Cursor) -> Option<Assertion> {
        let (name, name_span) = self.pos_ident(cur, "a query name")?;
        let mut arg = |b: &mut Self, what: &str| b.pos_ident(cur, what).map(|(w, _)| w);
        let query = match name.as_str() {
            "uses" | "selfsourcing" | "non_selfsourcing" | "provenance" => {
                let unit = arg(self, "a unit id")?.into();
                let source = arg(self, "a source id")?.into();
                match name.as_str() {
                    "uses" => Query::Uses { unit, source },
                    "selfsourcing" => Query::Selfsourcing { unit, source },
                    "non_selfsourcing" => Query::NonSelfsourcing { unit, source },
                    _ => Query::Provenance { unit, source },
                }
            }
            "type_status" => Query::TypeStatus {
                unit: arg(self, "a unit id")?.into(),
                source_type: arg(self, "a source type id")?.into(),
            },
            "closure" => Query::Closure { source: arg(self, "a source id")?.into() },
            "owner" => Query::Owner { source: arg(self, "a source id")?.into() },
            "maintainer" => Query::Maintainer { theme: arg(self, "a theme id")?.into() },
            "contracts" => Query::Contracts { unit: arg(self, "a unit id")?.into() },
            "service" => Query::Service { contract: arg(self, "a contract id")?.into() },
            "douts" => Query::Douts { id: arg(self, "a D_outs id")? },
            "fit" => Query::Fit { lot: arg(self, "a lot id")? },
            "bid_valid" => Query::BidValid { bid: arg(self, "a bid id")? },
            "valid" => Query::Valid,
            "classify" | "commitments" => {
                let unit = arg(self, "a unit id")?.into();
                let states = match cur.peek() {
                    Some(Elem { kind: ElemKind::Pair(k, v), .. }) if k == "states" => {
                        cur.i += 1;
                        let ElemKind::Tuple(items) = &v.kind else {
                            self.syntax(v.span, "expected `states=(from, to)`");
                            return None;
                        };
                        let [a, b] = items.as_slice() else {
                            self.syntax(v.span, "expected `states=(from, to)`");
                            return None;
                        };
                        let (from, to) = (self.int(a)?, self.int(b)?);
                        let (Ok(from), Ok(to)) = (usize::try_from(from), usize::try_from(to)) else {
                            self.err(v.span, "INVALID_VALUE", "state indices are non-negative");
                            return None;
                        };
                        Some(StateRange { from, to })
                    }
                    _ => None,
                };
                if name == "classify" {
                    Query::Classify { unit, states }
                } else {
                    Query::Commitments { unit, states }
                }
            }
            other => match TypeFlag::ALL.into_iter().find(|f| f.tag() == other) {
                Some(flag) => Query::TypeFlag {
                    flag,
                    unit: arg(self, "a unit id")?.into(),
                    source_type: arg(self, "a source type id")?.into(),
                },
                None => {
                    self.err(name_span, "INVALID_VALUE", format!("unknown query `{other}`"));
                    return None;
                }
            },
        };
        let expectation = self.expectation(st, cur)?;
        if let Some(extra) = cur.next() {
            self.syntax(extra.span, format!("unexpected {}", extra.describe()));
        }
        Some(Assertion { query, expectation })
    }

    fn expectation(&mut self, st: &Statement, cur: &mut Cursor) -> Option<Expectation> {
        let Some(e) = cur.next() else {
            self.syntax(st.span, "expected `==`, `!=`, `contains`, or `count` after the query");
            return None;
        };
        match &e.kind {
            ElemKind::Op(Tok::EqEq) | ElemKind::Op(Tok::NotEq) => {
                let Some(v) = cur.next() else {
                    self.syntax(e.span, "expected a value");
                    return None;
                };
                let value = self.value(v)?;
                Some(if matches!(e.kind, ElemKind::Op(Tok::EqEq)) {
                    Expectation::Equals(value)
                } else {
                    Expectation::NotEquals(value)
                })
            }
            ElemKind::Word(w) if w == "contains" => {
                let Some(v) = cur.next() else {
                    self.syntax(e.span, "expected a value after `contains`");
                    return None;
                };
                Some(Expectation::Contains(self.ident(v, "a value")?))
            }
            ElemKind::Word(w) if w == "count" => {
                let op = match cur.next().map(|o| &o.kind) {
                    Some(ElemKind::Op(Tok::EqEq)) => CmpOp::Eq,
                    Some(ElemKind::Op(Tok::NotEq)) => CmpOp::Ne,
                    Some(ElemKind::Op(Tok::Ge)) => CmpOp::Ge,
                    Some(ElemKind::Op(Tok::Le)) => CmpOp::Le,
                    Some(ElemKind::Op(Tok::Gt)) => CmpOp::Gt,
                    Some(ElemKind::Op(Tok::Lt)) => CmpOp::Lt,
                    _ => {
                        self.syntax(e.span, "expected a comparison after `count`");
                        return None;
                    }
                };
                let Some(n) = cur.next() else {
                    self.syntax(e.span, "expected a number");
                    return None;
                };
                let n = self.int(n)?;
                match usize::try_from(n) {
                    Ok(n) => Some(Expectation::Count(op, n)),
                    Err(_) => {
                        self.err(e.span, "INVALID_VALUE", "counts are non-negative");
                        None
                    }
                }
            }
            _ => {
                self.syntax(e.span, format!("expected `==`, `!=`, `contains`, or `count`, found {}", e.describe()));
                None
            }
        }
    }

    fn value(&mut self, e: &Elem) -> Option<Value> {
        match &e.kind {
            ElemKind::Word(w) if w == "true" => Some(Value::Bool(true)),
            ElemKind::Word(w) if w == "false" => Some(Value::Bool(false)),
            ElemKind::Word(w) | ElemKind::Str(w) => Some(Value::Word(w.clone())),
            ElemKind::List(items) => {
                let mut out = Vec::new();
                for item in items {
                    out.push(self.ident(item, "a value")?);
                }
                Some(Value::List(out))
            }
            _ => {
                self.syntax(e.span, format!("expected a value, found {}", e.describe()));
                None
            }
        }
    }
}

const CONTRACT_KEYS: [&str; 10] = [
    "provider",
    "consumer",
    "theme",
    "period",
    "notice",
    "protocol",
    "compensation",
    "terms",
    "unit_commitment",
    "management",
];

const SERVICE_KEYS: [&str; 8] =
    ["contract", "theme", "period", "notice", "protocol", "terms", "unit_commitment", "management"];

const DOUTS_KEYS: [&str; 8] = [
    "service_contracted",
    "sources_transferred",
    "independent_markets_as_economic",
    "initial_production_by_transferred_sources",
    "lift",
    "service_volume",
    "transferred_production_volume",
    "multi_party",
];

const APPLY_KEYS: [&str; 16] = [
    "actor",
    "to",
    "sources",
    "type",
    "theme",
    "sourcement",
    "contract",
    "service",
    "commit",
    "compensation",
    "assign",
    "develop",
    "split",
    "mission_tied",
    "at",
    "expect",
];
