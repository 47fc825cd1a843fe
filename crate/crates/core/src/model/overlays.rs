//! Business and contract layers laid over the fact layer.
//!
//! References flow strictly downward: a contract configuration may point
//! into the business and fact layers, a business configuration only into
//! the fact layer. Any reference that points sideways into a contract, or
//! upward from the fact layer, is a stratification violation.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::diagnostic::{codes, Diagnostic};
use super::ids::*;
use super::world::WorldState;

/// A typed reference to any named entity of a scenario.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum EntityRef {
    Unit(UnitId),
    Source(SourceId),
    SourceType(SourceTypeId),
    Theme(ThemeId),
    Contract(ContractId),
    Commitment(CommitmentId),
    Sourcement(SourcementId),
    Business(BusinessId),
    ContractConfig(ContractConfigId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Layer {
    Fact,
    Business,
    Contract,
}

impl EntityRef {
    pub fn id(&self) -> &str {
        match self {
            EntityRef::Unit(id) => id.as_str(),
            EntityRef::Source(id) => id.as_str(),
            EntityRef::SourceType(id) => id.as_str(),
            EntityRef::Theme(id) => id.as_str(),
            EntityRef::Contract(id) => id.as_str(),
            EntityRef::Commitment(id) => id.as_str(),
            EntityRef::Sourcement(id) => id.as_str(),
            EntityRef::Business(id) => id.as_str(),
            EntityRef::ContractConfig(id) => id.as_str(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            EntityRef::Unit(_) => UnitId::FAMILY,
            EntityRef::Source(_) => SourceId::FAMILY,
            EntityRef::SourceType(_) => SourceTypeId::FAMILY,
            EntityRef::Theme(_) => ThemeId::FAMILY,
            EntityRef::Contract(_) => ContractId::FAMILY,
            EntityRef::Commitment(_) => CommitmentId::FAMILY,
            EntityRef::Sourcement(_) => SourcementId::FAMILY,
            EntityRef::Business(_) => BusinessId::FAMILY,
            EntityRef::ContractConfig(_) => ContractConfigId::FAMILY,
        }
    }

    /// Layer the referenced entity belongs to. Service contracts and
    /// commitments are contract-layer notions even though their records sit
    /// in the world state.
    pub fn layer(&self) -> Layer {
        match self {
            EntityRef::Contract(_) | EntityRef::Commitment(_) | EntityRef::ContractConfig(_) => Layer::Contract,
            EntityRef::Business(_) => Layer::Business,
            _ => Layer::Fact,
        }
    }

    pub fn resolves_in(&self, world: &WorldState, business: &[BusinessConfig], configs: &[ContractConfig]) -> bool {
        match self {
            EntityRef::Unit(id) => world.units.contains_key(id),
            EntityRef::Source(id) => world.sources.contains_key(id),
            EntityRef::SourceType(id) => world.source_types.contains_key(id),
            EntityRef::Theme(id) => world.themes.contains_key(id),
            EntityRef::Contract(id) => world.contracts.contains_key(id),
            EntityRef::Commitment(id) => world.commitments.contains_key(id),
            EntityRef::Sourcement(id) => world.sourcements.contains_key(id),
            EntityRef::Business(id) => business.iter().any(|b| &b.id == id),
            EntityRef::ContractConfig(id) => configs.iter().any(|c| &c.id == id),
        }
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.family(), self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledRefs {
    pub label: String,
    pub refs: Vec<EntityRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusinessConfig {
    pub id: BusinessId,
    pub unit: UnitId,
    #[serde(default)]
    pub operational_options: Vec<String>,
    #[serde(default)]
    pub business_category: String,
    #[serde(default)]
    pub profit_centers: Vec<LabeledRefs>,
    #[serde(default)]
    pub bleeders: Vec<LabeledRefs>,
    #[serde(default)]
    pub market_acquisition_motives: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Promise {
    pub id: String,
    pub from: UnitId,
    pub to: UnitId,
    pub text: String,
}

/// Two mutually dependent promises.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agreement {
    pub first: String,
    pub second: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractConfig {
    pub id: ContractConfigId,
    pub scope: BTreeSet<UnitId>,
    #[serde(default)]
    pub general_law: Vec<String>,
    #[serde(default)]
    pub rules_of_trade: Vec<String>,
    #[serde(default)]
    pub sustainability_charters: Vec<String>,
    #[serde(default)]
    pub promises: Vec<Promise>,
    #[serde(default)]
    pub agreements: Vec<Agreement>,
    #[serde(default)]
    pub contracts: Vec<ContractId>,
    /// Further references into the business and fact layers.
    #[serde(default)]
    pub refs: Vec<EntityRef>,
}

fn unit_check(world: &WorldState, unit: &UnitId, owner: String, out: &mut Vec<Diagnostic>) {
    if !world.units.contains_key(unit) {
        out.push(Diagnostic::error(
            codes::UNRESOLVED_REF,
            vec![owner.clone(), unit.to_string()],
            format!("{owner} references undeclared unit {unit}"),
        ));
    }
}

/// Check that overlay references resolve and only flow downward.
pub fn validate_layers(world: &WorldState, business: &[BusinessConfig], configs: &[ContractConfig]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for b in business {
        let owner = format!("business:{}", b.id);
        unit_check(world, &b.unit, owner.clone(), &mut out);
        for r in b.profit_centers.iter().chain(&b.bleeders).flat_map(|l| &l.refs) {
            if r.layer() == Layer::Contract {
                out.push(Diagnostic::error(
                    codes::STRATIFICATION_VIOLATION,
                    vec![owner.clone(), r.to_string()],
                    format!("business configuration {} references contract-layer entity {r}", b.id),
                ));
            } else if !r.resolves_in(world, business, configs) {
                out.push(Diagnostic::error(
                    codes::UNRESOLVED_REF,
                    vec![owner.clone(), r.to_string()],
                    format!("business configuration {} references undeclared {r}", b.id),
                ));
            }
        }
    }
    for c in configs {
        let owner = format!("contract_config:{}", c.id);
        for unit in &c.scope {
            unit_check(world, unit, owner.clone(), &mut out);
        }
        let mut promise_ids = BTreeSet::new();
        for p in &c.promises {
            unit_check(world, &p.from, owner.clone(), &mut out);
            unit_check(world, &p.to, owner.clone(), &mut out);
            promise_ids.insert(p.id.as_str());
        }
        for a in &c.agreements {
            for p in [&a.first, &a.second] {
                if !promise_ids.contains(p.as_str()) {
                    out.push(Diagnostic::error(
                        codes::UNRESOLVED_REF,
                        vec![owner.clone(), p.clone()],
                        format!("agreement in {} names unknown promise {p}", c.id),
                    ));
                }
            }
        }
        for contract in &c.contracts {
            if !world.contracts.contains_key(contract) {
                out.push(Diagnostic::error(
                    codes::UNRESOLVED_REF,
                    vec![owner.clone(), contract.to_string()],
                    format!("{} lists undeclared contract {contract}", c.id),
                ));
            }
        }
        for r in &c.refs {
            if matches!(r, EntityRef::ContractConfig(_)) {
                out.push(Diagnostic::error(
                    codes::STRATIFICATION_VIOLATION,
                    vec![owner.clone(), r.to_string()],
                    format!("contract configuration {} references another contract configuration {r}", c.id),
                ));
            } else if !r.resolves_in(world, business, configs) {
                out.push(Diagnostic::error(
                    codes::UNRESOLVED_REF,
                    vec![owner.clone(), r.to_string()],
                    format!("contract configuration {} references undeclared {r}", c.id),
                ));
            }
        }
    }
    out
}
