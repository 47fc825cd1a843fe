use std::fmt::Write as _;

use super::lexer::is_word_char;
use super::*;
use crate::douts::format_rational;
use crate::patterns::Binding;
use crate::transformations::{Subject, TransformationSpec};

/// Canonical text of a scenario: declarations grouped by kind and sorted
/// by id, then the script in order. Always LF line endings.
pub fn print(scenario: &Scenario) -> String {
    let mut out = String::new();
    let w = &scenario.world;
    let section = |out: &mut String, lines: Vec<String>| {
        if lines.is_empty() {
            return;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
    };

    if w.timestamp != 0 {
        section(&mut out, vec![format!("clock {}", w.timestamp)]);
    }
    section(&mut out, w.units.values().map(unit).collect());
    section(
        &mut out,
        w.source_types
            .values()
            .map(|t| format!("source_type {} singleton={}", word(t.id.as_str()), t.singleton))
            .collect(),
    );
    section(&mut out, w.sources.values().map(source).collect());
    section(&mut out, w.themes.values().map(theme).collect());
    section(
        &mut out,
        w.use_relations
            .iter()
            .map(|u| {
                format!("use {} {} for {}", word(u.user.as_str()), word(u.source.as_str()), word(u.theme.as_str()))
            })
            .collect(),
    );
    section(&mut out, w.contracts.values().map(contract).collect());
    section(&mut out, w.commitments.values().map(commitment).collect());
    section(&mut out, w.sourcements.values().map(sourcement).collect());
    section(&mut out, sorted(&scenario.business, |b| b.id.as_str()).into_iter().map(business).collect());
    section(&mut out, sorted(&scenario.contract_configs, |c| c.id.as_str()).into_iter().map(contract_config).collect());
    section(&mut out, sorted(&scenario.douts, |d| d.id.as_str()).into_iter().map(douts).collect());
    section(&mut out, sorted(&scenario.patterns, |p| p.id.as_str()).into_iter().map(pattern).collect());
    section(
        &mut out,
        sorted(&scenario.lots, |l| l.id.as_str())
            .into_iter()
            .map(|l| format!("lot {} = {}", word(&l.id), list(l.patterns.iter().map(|p| word(p)))))
            .collect(),
    );
    section(&mut out, sorted(&scenario.bids, |b| b.id.as_str()).into_iter().map(bid).collect());
    section(&mut out, scenario.script.iter().map(|item| script_item(&item.action)).collect());
    out
}

fn sorted<T>(items: &[T], key: impl Fn(&T) -> &str) -> Vec<&T> {
    let mut v: Vec<&T> = items.iter().collect();
    v.sort_by(|a, b| key(a).cmp(key(b)));
    v
}

fn is_plain(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_word_char) && !s.contains("->") && !KEYWORDS.contains(&s)
}

/// An identifier, quoted when it would not lex as one word.
fn word(s: &str) -> String {
    if is_plain(s) {
        s.to_owned()
    } else {
        quote(s)
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn list(items: impl IntoIterator<Item = String>) -> String {
    format!("[{}]", items.into_iter().collect::<Vec<_>>().join(", "))
}

fn ids<'a, T: AsRef<str> + 'a>(items: impl IntoIterator<Item = &'a T>) -> String {
    list(items.into_iter().map(|i| word(i.as_ref())))
}

fn tag<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_value(value).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

fn unit(u: &Unit) -> String {
    let mut s = format!("unit {}", word(u.id.as_str()));
    if u.name != u.id.as_str() {
        let _ = write!(s, " name={}", quote(&u.name));
    }
    if let Some(p) = &u.parent {
        let _ = write!(s, " parent={}", word(p.as_str()));
    }
    if let Some(m) = &u.mission {
        let _ = write!(s, " mission={}", quote(m));
    }
    s
}

fn source(src: &Source) -> String {
    let mut s = format!(
        "source {} : {} owned_by {}",
        word(src.id.as_str()),
        word(src.source_type.as_str()),
        word(src.owner.as_str())
    );
    if !src.descriptor.is_empty() {
        let _ = write!(s, " descriptor={}", quote(&src.descriptor));
    }
    if !src.depends_on.is_empty() {
        let _ = write!(s, " depends_on={}", ids(&src.depends_on));
    }
    s
}

fn theme(t: &Theme) -> String {
    let mut s = format!("theme {} by {}", word(t.id.as_str()), word(t.maintainer.as_str()));
    if t.name != t.id.as_str() {
        let _ = write!(s, " name={}", quote(&t.name));
    }
    if let Some(c) = &t.cluster {
        let _ = write!(s, " cluster={}", quote(c));
    }
    s
}

fn period(p: &Period) -> String {
    format!("({}, {})", p.start, p.end)
}

fn contract(c: &ServiceContract) -> String {
    let mut s = format!(
        "contract {} provider={} consumer={} theme={} period={} notice={}",
        word(c.id.as_str()),
        word(c.provider.as_str()),
        word(c.consumer.as_str()),
        word(c.theme.as_str()),
        period(&c.period),
        c.notice_interval
    );
    if !c.termination_protocol.is_empty() {
        let _ = write!(s, " protocol={}", quote(&c.termination_protocol));
    }
    if c.compensation != Compensation::None {
        let _ = write!(s, " compensation={}", tag(&c.compensation));
    }
    if c.intentional_commitment_terms != CommitmentTerms::Unspecified {
        let _ = write!(s, " terms={}", tag(&c.intentional_commitment_terms));
    }
    if c.unit_commitment {
        s.push_str(" unit_commitment=true");
    }
    if let Some(m) = &c.management_source {
        let _ = write!(s, " management={}", word(m.as_str()));
    }
    s
}

fn commitment(c: &SourceCommitment) -> String {
    let mut s = format!("commit {} to {}", word(c.committed_unit.as_str()), word(c.source.as_str()));
    match &c.origin {
        CommitmentOrigin::Contract(id) => {
            let _ = write!(s, " via {}", word(id.as_str()));
        }
        CommitmentOrigin::Event(n) => {
            let _ = write!(s, " event={n}");
        }
    }
    if c.id.as_str() != format!("{}@{}", c.committed_unit, c.source) {
        let _ = write!(s, " as {}", word(c.id.as_str()));
    }
    s
}

fn sourcement(sm: &Sourcement) -> String {
    let mut s = format!(
        "sourcement {} principal={} themes={}",
        word(sm.id.as_str()),
        word(sm.principal.as_str()),
        ids(&sm.themes)
    );
    if let Stability::Unstable { deadline } = sm.stability {
        let _ = write!(s, " stability=unstable deadline={deadline}");
    }
    if !sm.history.is_empty() {
        let _ = write!(s, " history={}", list(sm.history.iter().map(|h| h.to_string())));
    }
    let mut body = Vec::new();
    for b in &sm.basics {
        body.push(format!("basic {}", ids(&b.sources)));
    }
    let a = &sm.attributes;
    if let Some(t) = &a.thematic_operations {
        body.push(format!("thematic_operations={}", quote(t)));
    }
    for (name, refs) in a.source_refs() {
        body.push(format!("{name}={}", ids(refs)));
    }
    if let Some(t) = &a.intellectual_property {
        body.push(format!("intellectual_property={}", quote(t)));
    }
    if let Some(t) = &a.data_knowledge_software {
        body.push(format!("data_knowledge_software={}", quote(t)));
    }
    block(s, body)
}

fn block(head: String, body: Vec<String>) -> String {
    if body.is_empty() {
        return format!("{head} {{}}");
    }
    let mut s = format!("{head} {{\n");
    for line in body {
        let _ = writeln!(s, "  {line}");
    }
    s.push('}');
    s
}

fn entity_ref(r: &EntityRef) -> String {
    let id = r.id();
    if is_plain(id) {
        format!("{}:{id}", r.family())
    } else {
        quote(id)
    }
}

fn refs(rs: &[EntityRef]) -> String {
    list(rs.iter().map(entity_ref))
}

fn business(b: &BusinessConfig) -> String {
    let mut body = Vec::new();
    if !b.business_category.is_empty() {
        body.push(format!("category {}", quote(&b.business_category)));
    }
    body.extend(b.operational_options.iter().map(|o| format!("option {}", quote(o))));
    body.extend(b.profit_centers.iter().map(|l| format!("profit_center {} {}", quote(&l.label), refs(&l.refs))));
    body.extend(b.bleeders.iter().map(|l| format!("bleeder {} {}", quote(&l.label), refs(&l.refs))));
    body.extend(b.market_acquisition_motives.iter().map(|m| format!("motive {}", quote(m))));
    block(format!("business {} for {}", word(b.id.as_str()), word(b.unit.as_str())), body)
}

fn contract_config(c: &ContractConfig) -> String {
    let mut body = Vec::new();
    body.extend(c.general_law.iter().map(|t| format!("law {}", quote(t))));
    body.extend(c.rules_of_trade.iter().map(|t| format!("trade {}", quote(t))));
    body.extend(c.sustainability_charters.iter().map(|t| format!("charter {}", quote(t))));
    body.extend(c.promises.iter().map(|p| {
        format!("promise {} {} -> {} {}", word(&p.id), word(p.from.as_str()), word(p.to.as_str()), quote(&p.text))
    }));
    body.extend(c.agreements.iter().map(|a| format!("agreement {} {}", word(&a.first), word(&a.second))));
    if !c.contracts.is_empty() {
        body.push(format!("contracts {}", ids(&c.contracts)));
    }
    if !c.refs.is_empty() {
        body.push(format!("refs {}", refs(&c.refs)));
    }
    block(format!("contract_config {} scope={}", word(c.id.as_str()), ids(&c.scope)), body)
}

fn douts(d: &DoutsDecl) -> String {
    let i = &d.input;
    let lift: Vec<String> = LiftConditionsExt::names(&i.lift_conditions);
    let body = vec![
        format!("service_contracted={}", i.service_contracted),
        format!("sources_transferred={}", i.sources_transferred),
        format!("independent_markets_as_economic={}", i.independent_markets_as_economic),
        format!("initial_production_by_transferred_sources={}", i.initial_production_by_transferred_sources),
        format!("lift={}", list(lift)),
        format!("service_volume={}", format_rational(&i.service_volume)),
        format!("transferred_production_volume={}", format_rational(&i.transferred_production_volume)),
        format!("multi_party={}", i.multi_party),
    ];
    block(format!("douts {}", word(&d.id)), body)
}

trait LiftConditionsExt {
    fn names(&self) -> Vec<String>;
}

impl LiftConditionsExt for crate::douts::LiftConditions {
    fn names(&self) -> Vec<String> {
        Self::NAMES.iter().zip(self.as_array()).filter(|(_, on)| *on).map(|(n, _)| (*n).to_owned()).collect()
    }
}

fn pattern(p: &PatternDecl) -> String {
    let head = format!(
        "pattern {} from sourcement {} vary {}",
        word(&p.id),
        word(p.sourcement.as_str()),
        list(p.vary.iter().map(|v| word(v)))
    );
    let body = p
        .extra_constraints
        .iter()
        .map(|c| {
            let mut s = format!("require {}", word(&c.variable));
            if !c.text.is_empty() {
                let _ = write!(s, " {}", quote(&c.text));
            }
            if let Some(t) = &c.source_type {
                let _ = write!(s, " type={}", word(t.as_str()));
            }
            if let Some(b) = c.singleton {
                let _ = write!(s, " singleton={b}");
            }
            s
        })
        .collect();
    block(head, body)
}

fn bid(b: &crate::patterns::Bid) -> String {
    let mut s = format!("bid {} on {}", word(&b.id), word(&b.lot));
    if !b.bindings.is_empty() {
        let binds: Vec<String> = b
            .bindings
            .iter()
            .map(|(k, v)| match v {
                Binding::Unit(u) => format!("{k}=unit:{u}"),
                Binding::Source(src) => format!("{k}=source:{src}"),
            })
            .collect();
        let _ = write!(s, " bind {}", binds.join(", "));
    }
    if !b.offered_insourcing.is_empty() {
        let _ = write!(s, " offer {}", ids(&b.offered_insourcing));
    }
    s
}

pub fn script_item(action: &ScriptAction) -> String {
    match action {
        ScriptAction::Apply { spec, expect } => {
            let mut s = apply(spec);
            if let Some(code) = expect {
                let _ = write!(s, " expect={}", word(code));
            }
            s
        }
        ScriptAction::Step { step, expect } => {
            let mut s = format!("step {}", step.op());
            if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(step) {
                for (k, v) in map {
                    if k == "op" || k == "lane" || v.is_null() {
                        continue;
                    }
                    let _ = write!(s, " {k}={}", json(&v));
                }
            }
            if step.lane != 0 {
                let _ = write!(s, " lane={}", step.lane);
            }
            if let Some(code) = expect {
                let _ = write!(s, " expect={}", word(code));
            }
            s
        }
        ScriptAction::Assert(a) => assertion(a),
    }
}

fn json(v: &serde_json::Value) -> String {
    use serde_json::Value as J;
    match v {
        J::Null => "\"\"".to_owned(),
        J::Bool(b) => b.to_string(),
        J::Number(n) => n.to_string(),
        J::String(s) => {
            let ambiguous = s == "true" || s == "false" || s.parse::<i64>().is_ok();
            if ambiguous {
                quote(s)
            } else {
                word(s)
            }
        }
        J::Array(items) => list(items.iter().map(json)),
        J::Object(map) => {
            let fields: Vec<String> =
                map.iter().filter(|(_, v)| !v.is_null()).map(|(k, v)| format!("{k}={}", json(v))).collect();
            format!("{{{}}}", fields.join(" "))
        }
    }
}

fn apply(spec: &TransformationSpec) -> String {
    let mut s = format!("apply {} actor={}", spec.kind.tag(), word(spec.actor.as_str()));
    if !spec.counterparties.is_empty() {
        let _ = write!(s, " to={}", ids(&spec.counterparties));
    }
    let _ = match &spec.subject {
        Subject::Sources(set) => write!(s, " sources={}", ids(set)),
        Subject::Type(t) => write!(s, " type={}", word(t.as_str())),
        Subject::Theme(t) => write!(s, " theme={}", word(t.as_str())),
        Subject::Sourcement(x) => write!(s, " sourcement={}", word(x.as_str())),
        Subject::Contract(c) => write!(s, " contract={}", word(c.as_str())),
    };
    if let Some(p) = &spec.service {
        let mut f = vec![
            format!("contract={}", word(p.contract.as_str())),
            format!("theme={}", word(p.theme.as_str())),
            format!("period={}", period(&p.period)),
            format!("notice={}", p.notice_interval),
        ];
        if !p.termination_protocol.is_empty() {
            f.push(format!("protocol={}", quote(&p.termination_protocol)));
        }
        if p.terms != CommitmentTerms::Unspecified {
            f.push(format!("terms={}", tag(&p.terms)));
        }
        if p.unit_commitment {
            f.push("unit_commitment=true".to_owned());
        }
        if let Some(m) = &p.management_source {
            f.push(format!("management={}", word(m.as_str())));
        }
        let _ = write!(s, " service={{{}}}", f.join(" "));
    }
    if !spec.commitments_to_create.is_empty() {
        let _ = write!(s, " commit={}", ids(&spec.commitments_to_create));
    }
    if spec.compensation != Compensation::None {
        let _ = write!(s, " compensation={}", tag(&spec.compensation));
    }
    if !spec.assignments.is_empty() {
        let pairs: Vec<String> =
            spec.assignments.iter().map(|(src, u)| format!("{}={}", src, word(u.as_str()))).collect();
        let _ = write!(s, " assign={{{}}}", pairs.join(" "));
    }
    if let Some(d) = &spec.develop {
        let mut f = vec![format!("type={}", word(d.source_type.as_str()))];
        if !d.descriptor.is_empty() {
            f.push(format!("descriptor={}", quote(&d.descriptor)));
        }
        if !d.depends_on.is_empty() {
            f.push(format!("depends_on={}", ids(&d.depends_on)));
        }
        if let Some(t) = &d.use_for {
            f.push(format!("use_for={}", word(t.as_str())));
        }
        let _ = write!(s, " develop={{{}}}", f.join(" "));
    }
    if !spec.split.is_empty() {
        let _ = write!(s, " split={}", list(spec.split.iter().map(ids)));
    }
    if let Some(b) = spec.mission_tied {
        let _ = write!(s, " mission_tied={b}");
    }
    if let Some(at) = spec.at {
        let _ = write!(s, " at={at}");
    }
    s
}

fn value(v: &Value) -> String {
    match v {
        Value::Bool(b) => b.to_string(),
        Value::Word(w) => word(w),
        Value::List(items) => list(items.iter().map(|i| word(i))),
    }
}

fn assertion(a: &Assertion) -> String {
    let q = match &a.query {
        Query::Uses { unit, source } => format!("uses {} {}", word(unit.as_str()), word(source.as_str())),
        Query::Selfsourcing { unit, source } => {
            format!("selfsourcing {} {}", word(unit.as_str()), word(source.as_str()))
        }
        Query::NonSelfsourcing { unit, source } => {
            format!("non_selfsourcing {} {}", word(unit.as_str()), word(source.as_str()))
        }
        Query::Provenance { unit, source } => format!("provenance {} {}", word(unit.as_str()), word(source.as_str())),
        Query::TypeStatus { unit, source_type } => {
            format!("type_status {} {}", word(unit.as_str()), word(source_type.as_str()))
        }
        Query::TypeFlag { flag, unit, source_type } => {
            format!("{} {} {}", flag.tag(), word(unit.as_str()), word(source_type.as_str()))
        }
        Query::Closure { source } => format!("closure {}", word(source.as_str())),
        Query::Owner { source } => format!("owner {}", word(source.as_str())),
        Query::Maintainer { theme } => format!("maintainer {}", word(theme.as_str())),
        Query::Contracts { unit } => format!("contracts {}", word(unit.as_str())),
        Query::Service { contract } => format!("service {}", word(contract.as_str())),
        Query::Douts { id } => format!("douts {}", word(id)),
        Query::Fit { lot } => format!("fit {}", word(lot)),
        Query::BidValid { bid } => format!("bid_valid {}", word(bid)),
        Query::Valid => "valid".to_owned(),
        Query::Classify { unit, states } | Query::Commitments { unit, states } => {
            let name = if matches!(a.query, Query::Classify { .. }) { "classify" } else { "commitments" };
            let mut s = format!("{name} {}", word(unit.as_str()));
            if let Some(r) = states {
                let _ = write!(s, " states=({}, {})", r.from, r.to);
            }
            s
        }
    };
    let e = match &a.expectation {
        Expectation::Equals(v) => format!("== {}", value(v)),
        Expectation::NotEquals(v) => format!("!= {}", value(v)),
        Expectation::Contains(w) => format!("contains {}", word(w)),
        Expectation::Count(op, n) => format!("count {} {n}", op.symbol()),
    };
    format!("assert {q} {e}")
}
