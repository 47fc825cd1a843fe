use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ids::*;
use super::world::Timestamp;

/// A group of sources with one owner that will not evolve into divergent
/// ownership.
///
/// Generic over the unit and source term so that description patterns can
/// reuse the same shape with variables in place of names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(bound(
    serialize = "U: Serialize, S: Serialize + Ord",
    deserialize = "U: Deserialize<'de>, S: Deserialize<'de> + Ord"
))]
pub struct BasicSourcement<U = UnitId, S = SourceId> {
    pub sources: BTreeSet<S>,
    pub owner: U,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum Stability {
    #[default]
    Stable,
    Unstable {
        deadline: Timestamp,
    },
}

/// Optional attribute entries. A missing entry means "not modeled".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize + Ord", deserialize = "S: Deserialize<'de> + Ord"))]
pub struct AttributeRecord<S = SourceId> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thematic_operations: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<BTreeSet<S>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facilities: Option<BTreeSet<S>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operational_staff: Option<BTreeSet<S>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub managing_staff: Option<BTreeSet<S>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contract_management_staff: Option<BTreeSet<S>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directing_staff: Option<BTreeSet<S>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intellectual_property: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_knowledge_software: Option<String>,
}

impl<S> Default for AttributeRecord<S> {
    fn default() -> Self {
        Self {
            thematic_operations: None,
            location: None,
            facilities: None,
            operational_staff: None,
            managing_staff: None,
            contract_management_staff: None,
            directing_staff: None,
            intellectual_property: None,
            data_knowledge_software: None,
        }
    }
}

/// Names of the source-reference attribute entries, in canonical order.
pub const SOURCE_ATTRIBUTES: [&str; 6] =
    ["location", "facilities", "operational_staff", "managing_staff", "contract_management_staff", "directing_staff"];

impl<S: Ord> AttributeRecord<S> {
    pub fn source_refs(&self) -> impl Iterator<Item = (&'static str, &BTreeSet<S>)> {
        [
            ("location", &self.location),
            ("facilities", &self.facilities),
            ("operational_staff", &self.operational_staff),
            ("managing_staff", &self.managing_staff),
            ("contract_management_staff", &self.contract_management_staff),
            ("directing_staff", &self.directing_staff),
        ]
        .into_iter()
        .filter_map(|(name, set)| set.as_ref().map(|s| (name, s)))
    }

    pub fn source_ref_mut(&mut self, name: &str) -> Option<&mut Option<BTreeSet<S>>> {
        Some(match name {
            "location" => &mut self.location,
            "facilities" => &mut self.facilities,
            "operational_staff" => &mut self.operational_staff,
            "managing_staff" => &mut self.managing_staff,
            "contract_management_staff" => &mut self.contract_management_staff,
            "directing_staff" => &mut self.directing_staff,
            _ => return None,
        })
    }

    pub fn try_map<T: Ord, E>(&self, mut f: impl FnMut(&S) -> Result<T, E>) -> Result<AttributeRecord<T>, E> {
        let mut map_set = |set: &Option<BTreeSet<S>>| -> Result<Option<BTreeSet<T>>, E> {
            set.as_ref().map(|s| s.iter().map(&mut f).collect()).transpose()
        };
        Ok(AttributeRecord {
            thematic_operations: self.thematic_operations.clone(),
            location: map_set(&self.location)?,
            facilities: map_set(&self.facilities)?,
            operational_staff: map_set(&self.operational_staff)?,
            managing_staff: map_set(&self.managing_staff)?,
            contract_management_staff: map_set(&self.contract_management_staff)?,
            directing_staff: map_set(&self.directing_staff)?,
            intellectual_property: self.intellectual_property.clone(),
            data_knowledge_software: self.data_knowledge_software.clone(),
        })
    }
}

/// The family of basic sourcements realizing one or more themes for a
/// principal unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "U: Serialize + Ord, S: Serialize + Ord",
    deserialize = "U: Deserialize<'de> + Ord, S: Deserialize<'de> + Ord"
))]
pub struct Sourcement<U = UnitId, S = SourceId> {
    pub id: SourcementId,
    pub principal: UnitId,
    pub themes: BTreeSet<ThemeId>,
    pub basics: BTreeSet<BasicSourcement<U, S>>,
    pub providers: BTreeSet<U>,
    #[serde(default)]
    pub attributes: AttributeRecord<S>,
    #[serde(default)]
    pub stability: Stability,
    #[serde(default)]
    pub history: Vec<u64>,
}

impl<U: Ord + Clone, S: Ord + Clone> Sourcement<U, S> {
    pub fn all_sources(&self) -> BTreeSet<S> {
        self.basics.iter().flat_map(|b| b.sources.iter().cloned()).collect()
    }

    /// Structure-preserving translation of unit and source terms.
    pub fn try_map<U2: Ord, S2: Ord, E>(
        &self,
        mut fu: impl FnMut(&U) -> Result<U2, E>,
        mut fs: impl FnMut(&S) -> Result<S2, E>,
    ) -> Result<Sourcement<U2, S2>, E> {
        let basics = self
            .basics
            .iter()
            .map(|b| {
                Ok(BasicSourcement {
                    sources: b.sources.iter().map(&mut fs).collect::<Result<_, E>>()?,
                    owner: fu(&b.owner)?,
                })
            })
            .collect::<Result<_, E>>()?;
        Ok(Sourcement {
            id: self.id.clone(),
            principal: self.principal.clone(),
            themes: self.themes.clone(),
            basics,
            providers: self.providers.iter().map(&mut fu).collect::<Result<_, E>>()?,
            attributes: self.attributes.try_map(&mut fs)?,
            stability: self.stability,
            history: self.history.clone(),
        })
    }
}

impl Sourcement {
    pub fn new(id: impl Into<SourcementId>, principal: impl Into<UnitId>) -> Self {
        Self {
            id: id.into(),
            principal: principal.into(),
            themes: BTreeSet::new(),
            basics: BTreeSet::new(),
            providers: BTreeSet::new(),
            attributes: AttributeRecord::default(),
            stability: Stability::Stable,
            history: Vec::new(),
        }
    }

    pub fn recompute_providers(&mut self) {
        self.providers = self.basics.iter().map(|b| b.owner.clone()).filter(|o| o != &self.principal).collect();
    }

    pub fn basic_containing(&self, source: &SourceId) -> Option<&BasicSourcement> {
        self.basics.iter().find(|b| b.sources.contains(source))
    }
}

/// A unit's sourcements under a one-level hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourcementPortfolio {
    pub owner: UnitId,
    pub sourcements: Vec<Sourcement>,
}

impl SourcementPortfolio {
    pub fn of(world: &super::WorldState, owner: &UnitId) -> Self {
        Self {
            owner: owner.clone(),
            sourcements: world.sourcements.values().filter(|s| &s.principal == owner).cloned().collect(),
        }
    }

    /// Every member has the portfolio owner as principal.
    pub fn is_coherent(&self) -> bool {
        self.sourcements.iter().all(|s| s.principal == self.owner)
    }
}
