//! Source-to-unit predicates over a world state: use, selfsourcing and
//! non-selfsourcing for sources and source types, and dependency closure.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SourceId, SourceTypeId, UnitId, WorldState};

fn require_unit(state: &WorldState, u: &UnitId) -> Result<()> {
    if state.units.contains_key(u) {
        Ok(())
    } else {
        Err(Error::unknown(UnitId::FAMILY, u.as_str()))
    }
}

fn require_source(state: &WorldState, s: &SourceId) -> Result<()> {
    if state.sources.contains_key(s) {
        Ok(())
    } else {
        Err(Error::unknown(SourceId::FAMILY, s.as_str()))
    }
}

fn require_type(state: &WorldState, tau: &SourceTypeId) -> Result<()> {
    if state.source_types.contains_key(tau) {
        Ok(())
    } else {
        Err(Error::unknown(SourceTypeId::FAMILY, tau.as_str()))
    }
}

/// Unchecked use test: some use relation (u, s, t) with t maintained by u.
pub(crate) fn uses_unchecked(state: &WorldState, u: &UnitId, s: &SourceId) -> bool {
    state
        .use_relations
        .iter()
        .any(|r| &r.user == u && &r.source == s && state.themes.get(&r.theme).is_some_and(|t| &t.maintainer == u))
}

pub fn uses(state: &WorldState, u: &UnitId, s: &SourceId) -> Result<bool> {
    require_unit(state, u)?;
    require_source(state, s)?;
    Ok(uses_unchecked(state, u, s))
}

pub fn selfsourcing_for_source(state: &WorldState, u: &UnitId, s: &SourceId) -> Result<bool> {
    Ok(uses(state, u, s)? && state.owner_of(s) == Some(u))
}

pub fn non_selfsourcing_for_source(state: &WorldState, u: &UnitId, s: &SourceId) -> Result<bool> {
    Ok(uses(state, u, s)? && state.owner_of(s) != Some(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourcingStatus {
    SelfsourcingSource,
    NonSelfsourcingSource,
    SelfsourcingType,
    PartialSelfsourcingType,
    NonSelfsourcingType,
    PartialNonSelfsourcingType,
    NotUsing,
}

impl SourcingStatus {
    pub fn tag(self) -> &'static str {
        match self {
            SourcingStatus::SelfsourcingSource => "selfsourcing_source",
            SourcingStatus::NonSelfsourcingSource => "non_selfsourcing_source",
            SourcingStatus::SelfsourcingType => "selfsourcing_type",
            SourcingStatus::PartialSelfsourcingType => "partial_selfsourcing_type",
            SourcingStatus::NonSelfsourcingType => "non_selfsourcing_type",
            SourcingStatus::PartialNonSelfsourcingType => "partial_non_selfsourcing_type",
            SourcingStatus::NotUsing => "not_using",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        [
            SourcingStatus::SelfsourcingSource,
            SourcingStatus::NonSelfsourcingSource,
            SourcingStatus::SelfsourcingType,
            SourcingStatus::PartialSelfsourcingType,
            SourcingStatus::NonSelfsourcingType,
            SourcingStatus::PartialNonSelfsourcingType,
            SourcingStatus::NotUsing,
        ]
        .into_iter()
        .find(|s| s.tag() == tag)
    }
}

/// Status of a unit for a source type. The four variants overlap, so all
/// of them are exposed next to the most specific tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeStatus {
    pub status: SourcingStatus,
    pub selfsourcing_type: bool,
    pub partial_selfsourcing_type: bool,
    pub non_selfsourcing_type: bool,
    pub partial_non_selfsourcing_type: bool,
}

pub(crate) fn type_status_unchecked(state: &WorldState, u: &UnitId, tau: &SourceTypeId) -> TypeStatus {
    let used: Vec<&SourceId> = state
        .sources
        .values()
        .filter(|s| &s.source_type == tau && uses_unchecked(state, u, &s.id))
        .map(|s| &s.id)
        .collect();
    let owned = used.iter().filter(|s| state.owner_of(s) == Some(u)).count();
    let any = !used.is_empty();
    let selfsourcing_type = any && owned == used.len();
    let partial_selfsourcing_type = owned > 0;
    let non_selfsourcing_type = any && owned == 0;
    let partial_non_selfsourcing_type = owned < used.len();
    let status = if !any {
        SourcingStatus::NotUsing
    } else if selfsourcing_type {
        SourcingStatus::SelfsourcingType
    } else if non_selfsourcing_type {
        SourcingStatus::NonSelfsourcingType
    } else {
        // Mixed ownership: both partial variants hold; the selfsourcing one
        // is reported as the tag.
        SourcingStatus::PartialSelfsourcingType
    };
    TypeStatus {
        status,
        selfsourcing_type,
        partial_selfsourcing_type,
        non_selfsourcing_type,
        partial_non_selfsourcing_type,
    }
}

pub fn type_status(state: &WorldState, u: &UnitId, tau: &SourceTypeId) -> Result<TypeStatus> {
    require_unit(state, u)?;
    require_type(state, tau)?;
    Ok(type_status_unchecked(state, u, tau))
}

/// Least set containing `s` closed under `depends_on`, read in both
/// directions.
pub fn dependency_closure(state: &WorldState, s: &SourceId) -> Result<BTreeSet<SourceId>> {
    require_source(state, s)?;
    let mut adjacent: BTreeMap<&SourceId, Vec<&SourceId>> = BTreeMap::new();
    for source in state.sources.values() {
        for dep in &source.depends_on {
            if state.sources.contains_key(dep) {
                adjacent.entry(&source.id).or_default().push(dep);
                adjacent.entry(dep).or_default().push(&source.id);
            }
        }
    }
    let mut closure = BTreeSet::new();
    let mut stack = vec![s];
    while let Some(next) = stack.pop() {
        if closure.insert(next.clone()) {
            stack.extend(adjacent.get(next).into_iter().flatten().copied());
        }
    }
    Ok(closure)
}
