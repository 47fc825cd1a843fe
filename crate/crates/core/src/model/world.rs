use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ids::*;
use super::sourcement::Sourcement;

/// Logical time supplied by the scenario, never wall clock.
pub type Timestamp = i64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub id: UnitId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<UnitId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mission: Option<String>,
}

impl Unit {
    pub fn new(id: impl Into<UnitId>) -> Self {
        let id = id.into();
        Self { name: id.to_string(), id, parent: None, mission: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceType {
    pub id: SourceTypeId,
    pub singleton: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Source {
    pub id: SourceId,
    #[serde(rename = "type")]
    pub source_type: SourceTypeId,
    pub owner: UnitId,
    #[serde(default)]
    pub descriptor: String,
    #[serde(default)]
    pub depends_on: BTreeSet<SourceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theme {
    pub id: ThemeId,
    pub maintainer: UnitId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<String>,
}

/// `user` uses `source` for `theme`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UseRelation {
    pub user: UnitId,
    pub source: SourceId,
    pub theme: ThemeId,
}

impl UseRelation {
    pub fn new(user: impl Into<UnitId>, source: impl Into<SourceId>, theme: impl Into<ThemeId>) -> Self {
        Self { user: user.into(), source: source.into(), theme: theme.into() }
    }
}

/// Outsourcer compensation transaction type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compensation {
    SingleTransaction,
    TemporallyDivided,
    ForContractDuration,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitmentTerms {
    IntentionallyNonCommitting,
    #[default]
    Unspecified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Period {
    pub start: Timestamp,
    pub end: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceContract {
    pub id: ContractId,
    pub provider: UnitId,
    pub consumer: UnitId,
    pub theme: ThemeId,
    pub period: Period,
    #[serde(default)]
    pub termination_protocol: String,
    pub notice_interval: Timestamp,
    #[serde(default)]
    pub compensation: Compensation,
    #[serde(default)]
    pub intentional_commitment_terms: CommitmentTerms,
    /// Consumer has committed to return to this provider on renewal.
    #[serde(default)]
    pub unit_commitment: bool,
    /// Provider-side contract management function, excluded when judging
    /// whether the service is fully source committing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub management_source: Option<SourceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitmentOrigin {
    Contract(ContractId),
    Event(u64),
}

/// A unit's obligation toward a source it does not own. Commitments to
/// owned sources are implied by ownership and never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCommitment {
    pub id: CommitmentId,
    pub committed_unit: UnitId,
    pub source: SourceId,
    pub origin: CommitmentOrigin,
}

/// Global sourcing state: every entity of the fact layer at one instant.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WorldState {
    #[serde(default)]
    pub timestamp: Timestamp,
    #[serde(default, with = "keyed")]
    pub units: BTreeMap<UnitId, Unit>,
    #[serde(default, with = "keyed")]
    pub source_types: BTreeMap<SourceTypeId, SourceType>,
    #[serde(default, with = "keyed")]
    pub sources: BTreeMap<SourceId, Source>,
    #[serde(default, with = "keyed")]
    pub themes: BTreeMap<ThemeId, Theme>,
    #[serde(default)]
    pub use_relations: BTreeSet<UseRelation>,
    #[serde(default, with = "keyed")]
    pub contracts: BTreeMap<ContractId, ServiceContract>,
    #[serde(default, with = "keyed")]
    pub commitments: BTreeMap<CommitmentId, SourceCommitment>,
    #[serde(default, with = "keyed")]
    pub sourcements: BTreeMap<SourcementId, Sourcement>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_unit(&mut self, unit: Unit) {
        self.units.insert(unit.id.clone(), unit);
    }

    pub fn add_source_type(&mut self, id: impl Into<SourceTypeId>, singleton: bool) {
        let id = id.into();
        self.source_types.insert(id.clone(), SourceType { id, singleton });
    }

    pub fn add_source(&mut self, source: Source) {
        self.sources.insert(source.id.clone(), source);
    }

    pub fn add_theme(&mut self, theme: Theme) {
        self.themes.insert(theme.id.clone(), theme);
    }

    pub fn add_use(&mut self, relation: UseRelation) {
        self.use_relations.insert(relation);
    }

    pub fn add_contract(&mut self, contract: ServiceContract) {
        self.contracts.insert(contract.id.clone(), contract);
    }

    pub fn add_commitment(&mut self, commitment: SourceCommitment) {
        self.commitments.insert(commitment.id.clone(), commitment);
    }

    pub fn add_sourcement(&mut self, sourcement: Sourcement) {
        self.sourcements.insert(sourcement.id.clone(), sourcement);
    }

    pub fn owner_of(&self, source: &SourceId) -> Option<&UnitId> {
        self.sources.get(source).map(|s| &s.owner)
    }

    /// Sources explicitly committed to by `unit` (owned sources excluded).
    pub fn explicit_commitments_of<'a>(&'a self, unit: &'a UnitId) -> impl Iterator<Item = &'a SourceCommitment> + 'a {
        self.commitments.values().filter(move |c| &c.committed_unit == unit)
    }

    /// The effective commitment set of `unit`: owned sources plus explicit
    /// commitments.
    pub fn commitment_set(&self, unit: &UnitId) -> BTreeSet<SourceId> {
        let mut set: BTreeSet<SourceId> =
            self.sources.values().filter(|s| &s.owner == unit).map(|s| s.id.clone()).collect();
        set.extend(self.explicit_commitments_of(unit).map(|c| c.source.clone()));
        set
    }

    /// Equality ignoring the logical clock.
    pub fn same_content(&self, other: &WorldState) -> bool {
        self.units == other.units
            && self.source_types == other.source_types
            && self.sources == other.sources
            && self.themes == other.themes
            && self.use_relations == other.use_relations
            && self.contracts == other.contracts
            && self.commitments == other.commitments
            && self.sourcements == other.sourcements
    }

    /// Recompute derived sourcement fields (basic owners, providers) after
    /// ownership changes.
    pub fn refresh_sourcements(&mut self) {
        let sources = &self.sources;
        for sourcement in self.sourcements.values_mut() {
            sourcement.basics = std::mem::take(&mut sourcement.basics)
                .into_iter()
                .map(|mut basic| {
                    if let Some(owner) = basic.sources.iter().find_map(|s| sources.get(s).map(|s| s.owner.clone())) {
                        basic.owner = owner;
                    }
                    basic
                })
                .collect();
            sourcement.recompute_providers();
        }
    }
}

/// Serde adapter storing an id-keyed map as an array sorted by id.
pub(crate) mod keyed {
    use std::collections::BTreeMap;

    use serde::de::DeserializeOwned;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub trait Keyed {
        type Key: Ord + Clone;
        fn key(&self) -> &Self::Key;
    }

    pub fn serialize<K, V, S>(map: &BTreeMap<K, V>, serializer: S) -> Result<S::Ok, S::Error>
    where
        V: Serialize,
        S: Serializer,
    {
        serializer.collect_seq(map.values())
    }

    pub fn deserialize<'de, V, D>(deserializer: D) -> Result<BTreeMap<V::Key, V>, D::Error>
    where
        V: Keyed + DeserializeOwned,
        D: Deserializer<'de>,
    {
        let items = Vec::<V>::deserialize(deserializer)?;
        let mut map = BTreeMap::new();
        for item in items {
            let key = item.key().clone();
            if map.insert(key, item).is_some() {
                return Err(serde::de::Error::custom("duplicate id in collection"));
            }
        }
        Ok(map)
    }

    macro_rules! keyed_by_id {
        ($($ty:ty => $key:ty),* $(,)?) => {
            $(impl Keyed for $ty {
                type Key = $key;
                fn key(&self) -> &$key {
                    &self.id
                }
            })*
        };
    }

    use crate::model::ids::*;
    use crate::model::*;

    keyed_by_id! {
        Unit => UnitId,
        SourceType => SourceTypeId,
        Source => SourceId,
        Theme => ThemeId,
        ServiceContract => ContractId,
        SourceCommitment => CommitmentId,
        Sourcement => SourcementId,
        BusinessConfig => BusinessId,
        ContractConfig => ContractConfigId,
    }
}
