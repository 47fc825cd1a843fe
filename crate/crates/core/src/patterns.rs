//! Sourcement description patterns, lots, and bids: abstraction of closed
//! descriptions into patterns, bid validation against a market, closing
//! instantiation, and best-fit ranking.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::*;

/// A unit or source position that is either fixed or a variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term<T> {
    Const(T),
    Var(String),
}

impl<T: fmt::Display> fmt::Display for Term<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => c.fmt(f),
            Term::Var(v) => write!(f, "?{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sort {
    UnitVar,
    SourceVar,
}

impl Sort {
    pub fn noun(self) -> &'static str {
        match self {
            Sort::UnitVar => "unit",
            Sort::SourceVar => "source",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub sort: Sort,
    /// The name the variable replaced when it was made by abstraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

/// Requirement on a variable: text for readers, predicates for the engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub variable: String,
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_type: Option<SourceTypeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singleton: Option<bool>,
}

pub type Skeleton = Sourcement<Term<UnitId>, Term<SourceId>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    pub id: String,
    pub skeleton: Skeleton,
    pub variables: Vec<Variable>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
}

/// A concrete value bound to a variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    Unit(UnitId),
    Source(SourceId),
}

impl Binding {
    pub fn sort(&self) -> Sort {
        match self {
            Binding::Unit(_) => Sort::UnitVar,
            Binding::Source(_) => Sort::SourceVar,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Binding::Unit(u) => u.as_str(),
            Binding::Source(s) => s.as_str(),
        }
    }
}

pub type Bindings = BTreeMap<String, Binding>;

impl Pattern {
    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn is_closed(&self) -> bool {
        self.variables.is_empty()
    }

    /// Bindings that send every variable back to the name it replaced.
    pub fn origin_bindings(&self) -> Bindings {
        self.variables
            .iter()
            .filter_map(|v| {
                let origin = v.origin.clone()?;
                Some((
                    v.name.clone(),
                    match v.sort {
                        Sort::UnitVar => Binding::Unit(origin.into()),
                        Sort::SourceVar => Binding::Source(origin.into()),
                    },
                ))
            })
            .collect()
    }

    /// Variables that occur in the skeleton.
    pub fn occurring_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let _ = self.skeleton.try_map::<(), (), ()>(
            |u| {
                if let Term::Var(v) = u {
                    out.insert(v.clone());
                }
                Ok(())
            },
            |_| Ok(()),
        );
        let mut sources = BTreeSet::new();
        let _ = self.skeleton.try_map::<(), (), ()>(
            |_| Ok(()),
            |s| {
                if let Term::Var(v) = s {
                    sources.insert(v.clone());
                }
                Ok(())
            },
        );
        out.extend(sources);
        out
    }
}

/// Replace the listed unit and source names of a sourcement by variables.
/// Source variables keep the original source type and singleton status as
/// machine constraints.
pub fn abstract_pattern(
    world: &WorldState,
    pattern_id: &str,
    sourcement: &Sourcement,
    to_vary: &BTreeSet<String>,
) -> Result<Pattern> {
    if to_vary.contains(sourcement.principal.as_str()) {
        return Err(Error::PrincipalNotAbstractable(sourcement.principal.to_string()));
    }
    let units: BTreeSet<&str> = sourcement
        .basics
        .iter()
        .map(|b| b.owner.as_str())
        .chain(sourcement.providers.iter().map(|p| p.as_str()))
        .collect();
    let sources: BTreeSet<SourceId> = sourcement
        .all_sources()
        .into_iter()
        .chain(sourcement.attributes.source_refs().flat_map(|(_, refs)| refs.iter().cloned()))
        .collect();
    for name in to_vary {
        if !units.contains(name.as_str()) && !sources.contains(name.as_str()) {
            return Err(Error::unknown("entity", name.as_str()));
        }
    }
    let source_var = |name: &str| {
        if units.contains(name) && to_vary.contains(name) {
            format!("{name}'")
        } else {
            name.to_owned()
        }
    };
    let mut variables = Vec::new();
    let mut constraints = Vec::new();
    for name in to_vary {
        if units.contains(name.as_str()) {
            variables.push(Variable { name: name.clone(), sort: Sort::UnitVar, origin: Some(name.clone()) });
        }
        if let Some(source) = sources.get(name.as_str()) {
            let var = source_var(name);
            let ty = world.sources.get(source).map(|s| s.source_type.clone());
            let singleton = ty.as_ref().and_then(|t| world.source_types.get(t)).map(|t| t.singleton);
            constraints.push(Constraint {
                variable: var.clone(),
                text: ty.as_ref().map(|t| format!("a source of type {t}")).unwrap_or_default(),
                source_type: ty,
                singleton,
            });
            variables.push(Variable { name: var, sort: Sort::SourceVar, origin: Some(name.clone()) });
        }
    }
    let skeleton = sourcement
        .try_map::<_, _, std::convert::Infallible>(
            |u| Ok(if to_vary.contains(u.as_str()) { Term::Var(u.to_string()) } else { Term::Const(u.clone()) }),
            |s| {
                Ok(if to_vary.contains(s.as_str()) {
                    Term::Var(source_var(s.as_str()))
                } else {
                    Term::Const(s.clone())
                })
            },
        )
        .unwrap_or_else(|never| match never {});
    Ok(Pattern { id: pattern_id.to_owned(), skeleton, variables, constraints })
}

/// Close a pattern under total, sort-correct bindings.
pub fn instantiate(pattern: &Pattern, bindings: &Bindings) -> Result<Sourcement> {
    for v in &pattern.variables {
        match bindings.get(&v.name) {
            None => return Err(Error::UnboundVariable(v.name.clone())),
            Some(b) if b.sort() != v.sort => {
                return Err(Error::SortMismatch {
                    variable: v.name.clone(),
                    expected: v.sort.noun(),
                    found: b.name().to_owned(),
                })
            }
            Some(_) => {}
        }
    }
    let lookup = |name: &String, sort: Sort| -> Result<Binding> {
        let declared = pattern.variable(name).map(|v| v.sort);
        if declared != Some(sort) {
            return Err(Error::SortMismatch {
                variable: name.clone(),
                expected: sort.noun(),
                found: declared.map_or("an undeclared variable", |s| s.noun()).to_owned(),
            });
        }
        bindings.get(name).cloned().ok_or_else(|| Error::UnboundVariable(name.clone()))
    };
    let mut closed = pattern.skeleton.try_map(
        |u| match u {
            Term::Const(c) => Ok(c.clone()),
            Term::Var(v) => match lookup(v, Sort::UnitVar)? {
                Binding::Unit(unit) => Ok(unit),
                Binding::Source(s) => {
                    Err(Error::SortMismatch { variable: v.clone(), expected: "unit", found: s.to_string() })
                }
            },
        },
        |s| match s {
            Term::Const(c) => Ok(c.clone()),
            Term::Var(v) => match lookup(v, Sort::SourceVar)? {
                Binding::Source(source) => Ok(source),
                Binding::Unit(u) => {
                    Err(Error::SortMismatch { variable: v.clone(), expected: "source", found: u.to_string() })
                }
            },
        },
    )?;
    closed.recompute_providers();
    Ok(closed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lot {
    pub id: String,
    pub patterns: Vec<Pattern>,
}

/// A lot variable: the pattern variable qualified by its pattern index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LotVariable<'a> {
    pub qualified: String,
    pub pattern: usize,
    pub variable: &'a Variable,
}

impl Lot {
    pub fn qualify(index: usize, name: &str) -> String {
        format!("{index}.{name}")
    }

    pub fn variables(&self) -> Vec<LotVariable<'_>> {
        self.patterns
            .iter()
            .enumerate()
            .flat_map(|(i, p)| {
                p.variables.iter().map(move |v| LotVariable {
                    qualified: Self::qualify(i, &v.name),
                    pattern: i,
                    variable: v,
                })
            })
            .collect()
    }

    /// Pattern-level bindings for pattern `index`, accepting qualified names
    /// and plain names that occur in only one pattern of the lot.
    pub fn bindings_for(&self, index: usize, bid: &Bid) -> Bindings {
        let Some(pattern) = self.patterns.get(index) else { return Bindings::new() };
        pattern
            .variables
            .iter()
            .filter_map(|v| self.lookup(bid, index, &v.name).map(|b| (v.name.clone(), b.clone())))
            .collect()
    }

    fn plain_is_unique(&self, name: &str) -> bool {
        self.patterns.iter().filter(|p| p.variable(name).is_some()).count() == 1
    }

    fn lookup<'b>(&self, bid: &'b Bid, index: usize, name: &str) -> Option<&'b Binding> {
        bid.bindings
            .get(&Self::qualify(index, name))
            .or_else(|| self.plain_is_unique(name).then(|| bid.bindings.get(name)).flatten())
    }

    /// The qualified namespaces of the patterns are pairwise disjoint.
    pub fn namespaces_disjoint(&self) -> bool {
        let all: Vec<String> = self.variables().into_iter().map(|v| v.qualified).collect();
        let unique: BTreeSet<&String> = all.iter().collect();
        unique.len() == all.len()
    }

    pub fn principals(&self) -> BTreeSet<&UnitId> {
        self.patterns.iter().map(|p| &p.skeleton.principal).collect()
    }
}

/// Warnings about a lot's composition.
pub fn check_lot(lot: &Lot) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if lot.patterns.is_empty() {
        out.push(Diagnostic::error("EMPTY_LOT", vec![lot.id.clone()], format!("lot {} has no patterns", lot.id)));
    }
    let principals = lot.principals();
    if principals.len() > 1 {
        out.push(Diagnostic::warning(
            "MIXED_PRINCIPALS",
            principals.iter().map(|p| p.to_string()).collect(),
            format!("lot {} mixes patterns of different principal units", lot.id),
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bid {
    pub id: String,
    pub lot: String,
    pub bindings: Bindings,
    #[serde(default)]
    pub offered_insourcing: BTreeSet<SourceId>,
}

/// Check a bid against a lot and a market state. Empty iff the bid is
/// total, sort-correct, meets every constraint, and binds existing
/// entities.
pub fn validate_bid(lot: &Lot, bid: &Bid, market: &WorldState) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut error = |code: &str, entities: Vec<String>, message: String| {
        out.push(Diagnostic::error(code, entities, message));
    };
    if bid.lot != lot.id {
        error("LOT_MISMATCH", vec![bid.id.clone()], format!("bid {} is for lot {}, not {}", bid.id, bid.lot, lot.id));
    }
    let mut used_names = BTreeSet::new();
    for lv in lot.variables() {
        let var = lv.variable;
        let Some(binding) = lot.lookup(bid, lv.pattern, &var.name) else {
            error("UNBOUND_VARIABLE", vec![lv.qualified.clone()], format!("variable {} is not bound", lv.qualified));
            continue;
        };
        used_names.insert(lv.qualified.clone());
        used_names.insert(var.name.clone());
        if binding.sort() != var.sort {
            error(
                "SORT_MISMATCH",
                vec![lv.qualified.clone(), binding.name().to_owned()],
                format!(
                    "{} needs a {} but is bound to {} `{}`",
                    lv.qualified,
                    var.sort.noun(),
                    binding.sort().noun(),
                    binding.name()
                ),
            );
            continue;
        }
        match binding {
            Binding::Unit(u) => {
                if !market.units.contains_key(u) {
                    error("UNKNOWN_ENTITY", vec![u.to_string()], format!("unit {u} is not in the market"));
                }
            }
            Binding::Source(s) => {
                let Some(source) = market.sources.get(s) else {
                    error("UNKNOWN_ENTITY", vec![s.to_string()], format!("source {s} is not in the market"));
                    continue;
                };
                let pattern = &lot.patterns[lv.pattern];
                for c in pattern.constraints.iter().filter(|c| c.variable == var.name) {
                    if let Some(ty) = &c.source_type {
                        if &source.source_type != ty {
                            error(
                                "TYPE_CONSTRAINT",
                                vec![lv.qualified.clone(), s.to_string()],
                                format!(
                                    "{} needs a source of type {ty}, {s} is of type {}",
                                    lv.qualified, source.source_type
                                ),
                            );
                        }
                    }
                    if let Some(singleton) = c.singleton {
                        let actual = market.source_types.get(&source.source_type).map(|t| t.singleton);
                        if actual != Some(singleton) {
                            error(
                                "SINGLETON_CONSTRAINT",
                                vec![lv.qualified.clone(), s.to_string()],
                                format!(
                                    "{} needs a source of a {}singleton type",
                                    lv.qualified,
                                    if singleton { "" } else { "non-" }
                                ),
                            );
                        }
                    }
                }
            }
        }
    }
    for name in bid.bindings.keys() {
        if !used_names.contains(name) {
            error("UNKNOWN_VARIABLE", vec![name.clone()], format!("lot {} has no variable {name}", lot.id));
        }
    }
    for s in &bid.offered_insourcing {
        if !market.sources.contains_key(s) {
            error("UNKNOWN_ENTITY", vec![s.to_string()], format!("offered source {s} is not in the market"));
        }
    }
    out
}

pub const RANKING_RULE: &str = "valid_first_then_fewest_counterparty_units_then_bid_order";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedBid {
    pub bid: Bid,
    pub valid: bool,
    pub counterparty_units: usize,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub rule: String,
    pub ranked: Vec<RankedBid>,
}

/// Units a bid would make the principal depend on: bound units and the
/// owners of bound sources, principals excluded.
pub fn counterparty_units(lot: &Lot, bid: &Bid, market: &WorldState) -> BTreeSet<UnitId> {
    let principals = lot.principals();
    bid.bindings
        .values()
        .filter_map(|b| match b {
            Binding::Unit(u) => Some(u.clone()),
            Binding::Source(s) => market.owner_of(s).cloned(),
        })
        .filter(|u| !principals.contains(u))
        .collect()
}

pub fn select_fit(lot: &Lot, bids: &[Bid], market: &WorldState) -> Ranking {
    let mut ranked: Vec<(usize, RankedBid)> = bids
        .iter()
        .enumerate()
        .map(|(i, bid)| {
            let diagnostics = validate_bid(lot, bid, market);
            (
                i,
                RankedBid {
                    bid: bid.clone(),
                    valid: diagnostics.is_empty(),
                    counterparty_units: counterparty_units(lot, bid, market).len(),
                    diagnostics,
                },
            )
        })
        .collect();
    ranked.sort_by_key(|(i, r)| (!r.valid, if r.valid { r.counterparty_units } else { 0 }, *i));
    Ranking { rule: RANKING_RULE.to_owned(), ranked: ranked.into_iter().map(|(_, r)| r).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> WorldState {
        let mut w = WorldState::new();
        for u in ["U", "V", "W"] {
            w.add_unit(Unit::new(u));
        }
        w.add_source_type("Staff", false);
        w.add_source_type("Site", true);
        w.add_theme(Theme { id: "T".into(), maintainer: "U".into(), name: "T".into(), cluster: None });
        for (s, ty, owner) in [("S", "Staff", "V"), ("S2", "Staff", "W"), ("L", "Site", "U"), ("L2", "Site", "W")] {
            w.add_source(Source {
                id: s.into(),
                source_type: ty.into(),
                owner: owner.into(),
                descriptor: String::new(),
                depends_on: BTreeSet::new(),
            });
        }
        let mut sm = Sourcement::new("X", "U");
        sm.themes.insert("T".into());
        sm.basics.insert(BasicSourcement { sources: BTreeSet::from(["S".into()]), owner: "V".into() });
        sm.basics.insert(BasicSourcement { sources: BTreeSet::from(["L".into()]), owner: "U".into() });
        sm.recompute_providers();
        w.add_sourcement(sm);
        w
    }

    fn vary(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn closed_abstraction_has_no_variables() {
        let w = world();
        let p = abstract_pattern(&w, "P", &w.sourcements[&SourcementId::from("X")], &vary(&[])).unwrap();
        assert!(p.is_closed());
        assert_eq!(instantiate(&p, &Bindings::new()).unwrap(), w.sourcements[&SourcementId::from("X")]);
    }

    #[test]
    fn principal_cannot_vary() {
        let w = world();
        let e = abstract_pattern(&w, "P", &w.sourcements[&SourcementId::from("X")], &vary(&["U"])).unwrap_err();
        assert_eq!(e.code(), "PRINCIPAL_NOT_ABSTRACTABLE");
        let e = abstract_pattern(&w, "P", &w.sourcements[&SourcementId::from("X")], &vary(&["Q"])).unwrap_err();
        assert_eq!(e.code(), "UNKNOWN_ENTITY");
    }

    #[test]
    fn provider_and_source_become_variables() {
        let w = world();
        let x = &w.sourcements[&SourcementId::from("X")];
        let p = abstract_pattern(&w, "P", x, &vary(&["V", "S"])).unwrap();
        assert_eq!(p.variables.len(), 2);
        assert_eq!(p.constraints[0].source_type, Some("Staff".into()));
        assert_eq!(&instantiate(&p, &p.origin_bindings()).unwrap(), x);
        let mut partial = p.origin_bindings();
        partial.remove("V");
        assert_eq!(instantiate(&p, &partial).unwrap_err().code(), "UNBOUND_VARIABLE");
        let mut wrong = p.origin_bindings();
        wrong.insert("V".into(), Binding::Source("S".into()));
        assert_eq!(instantiate(&p, &wrong).unwrap_err().code(), "SORT_MISMATCH");
    }

    fn lot(w: &WorldState) -> Lot {
        let x = &w.sourcements[&SourcementId::from("X")];
        Lot { id: "L".into(), patterns: vec![abstract_pattern(w, "P", x, &vary(&["V", "S"])).unwrap()] }
    }

    fn bid(id: &str, pairs: &[(&str, Binding)]) -> Bid {
        Bid {
            id: id.into(),
            lot: "L".into(),
            bindings: pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            offered_insourcing: BTreeSet::new(),
        }
    }

    #[test]
    fn bid_checks() {
        let w = world();
        let l = lot(&w);
        let good = bid("B1", &[("V", Binding::Unit("W".into())), ("S", Binding::Source("S2".into()))]);
        assert!(validate_bid(&l, &good, &w).is_empty());
        let sort = bid("B2", &[("V", Binding::Source("S".into())), ("S", Binding::Source("S2".into()))]);
        assert_eq!(validate_bid(&l, &sort, &w)[0].code, "SORT_MISMATCH");
        let ty = bid("B3", &[("0.V", Binding::Unit("W".into())), ("0.S", Binding::Source("L2".into()))]);
        let codes: Vec<_> = validate_bid(&l, &ty, &w).into_iter().map(|d| d.code).collect();
        assert!(codes.contains(&"TYPE_CONSTRAINT".to_string()));
        assert!(codes.contains(&"SINGLETON_CONSTRAINT".to_string()));
        let unbound = bid("B4", &[("V", Binding::Unit("W".into()))]);
        assert_eq!(validate_bid(&l, &unbound, &w)[0].code, "UNBOUND_VARIABLE");
    }

    #[test]
    fn ranking_prefers_valid_then_fewer_units() {
        let w = world();
        let l = lot(&w);
        let invalid = bid("B0", &[("V", Binding::Unit("W".into()))]);
        let two = bid("B1", &[("V", Binding::Unit("V".into())), ("S", Binding::Source("S2".into()))]);
        let one = bid("B2", &[("V", Binding::Unit("W".into())), ("S", Binding::Source("S2".into()))]);
        let ranking = select_fit(&l, &[invalid, two, one], &w);
        let order: Vec<_> = ranking.ranked.iter().map(|r| r.bid.id.as_str()).collect();
        assert_eq!(order, ["B2", "B1", "B0"]);
        assert!(select_fit(&l, &[], &w).ranked.is_empty());
    }
}
