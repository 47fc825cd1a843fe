use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::digest::Fingerprint;
use super::ids::*;
use super::world::Timestamp;
use crate::transformations::{TransformationKind, TransformationSpec};
use crate::transitions::PrimitiveStep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMarker {
    PrimitiveStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EventKind {
    Transformation(TransformationKind),
    Step(StepMarker),
}

impl EventKind {
    pub fn transformation(&self) -> Option<TransformationKind> {
        match self {
            EventKind::Transformation(kind) => Some(*kind),
            EventKind::Step(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
#[serde(tag = "form", content = "value", rename_all = "snake_case")]
pub enum EventParameters {
    Transformation(TransformationSpec),
    Step(PrimitiveStep),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transfer {
    pub source: SourceId,
    pub from: UnitId,
    pub to: UnitId,
}

/// The observable effect of one event on ownership and contracts, kept so
/// that provenance and history-dependent preconditions need not replay
/// states.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventEffects {
    #[serde(default)]
    pub transfers: Vec<Transfer>,
    #[serde(default)]
    pub created_sources: BTreeSet<SourceId>,
    #[serde(default)]
    pub removed_sources: BTreeSet<SourceId>,
    #[serde(default)]
    pub contracts_created: BTreeSet<ContractId>,
    #[serde(default)]
    pub contracts_terminated: BTreeSet<ContractId>,
}

impl EventEffects {
    pub fn involves(&self, source: &SourceId) -> bool {
        self.transfers.iter().any(|t| &t.source == source)
            || self.created_sources.contains(source)
            || self.removed_sources.contains(source)
    }

    pub fn transfer_of(&self, source: &SourceId) -> Option<&Transfer> {
        self.transfers.iter().find(|t| &t.source == source)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEvent {
    pub seq: u64,
    pub time: Timestamp,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<UnitId>,
    pub parameters: EventParameters,
    pub pre_digest: Fingerprint,
    pub post_digest: Fingerprint,
    #[serde(default)]
    pub effects: EventEffects,
}

impl HistoryEvent {
    pub fn transformation(&self) -> Option<&TransformationSpec> {
        match &self.parameters {
            EventParameters::Transformation(spec) => Some(spec),
            EventParameters::Step(_) => None,
        }
    }
}

/// Ordered record of applied events. Serializes as a JSON array.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HistoryLog {
    pub events: Vec<HistoryEvent>,
}

impl HistoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn next_seq(&self) -> u64 {
        self.events.last().map_or(1, |e| e.seq + 1)
    }

    pub fn push(&mut self, event: HistoryEvent) {
        self.events.push(event);
    }

    /// Checks strictly increasing sequence numbers and the digest chain;
    /// returns a description of the first break.
    pub fn verify_chain(&self) -> Result<(), String> {
        for pair in self.events.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.seq <= a.seq {
                return Err(format!("event {} follows event {} out of order", b.seq, a.seq));
            }
            if a.post_digest != b.pre_digest {
                return Err(format!(
                    "event {} starts from {} but event {} ended at {}",
                    b.seq,
                    b.pre_digest.short(),
                    a.seq,
                    a.post_digest.short()
                ));
            }
        }
        Ok(())
    }

    /// Most recent event that moved, created, or removed `source`.
    pub fn last_involving(&self, source: &SourceId) -> Option<&HistoryEvent> {
        self.events.iter().rev().find(|e| e.effects.involves(source))
    }

    pub fn involving<'a>(&'a self, source: &'a SourceId) -> impl Iterator<Item = &'a HistoryEvent> + 'a {
        self.events.iter().filter(move |e| e.effects.involves(source))
    }
}
