//! The fundamental sourcement transformations as a precondition-checked
//! state machine, with classification of observed deltas, commitment and
//! service-characteristic judgments, and provenance queries over history.

pub(crate) mod apply;
mod classify;
mod commitments;
pub(crate) mod effect;
mod provenance;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{
    CommitmentTerms, Compensation, ContractId, Period, SourceId, SourceTypeId, SourcementId, ThemeId, Timestamp, UnitId,
};

pub use apply::apply;
pub use classify::{classify, labels, TransformationKindResult};
pub use commitments::{classify_commitments, service_characteristic, CommitmentClassification, ServiceCharacteristic};
pub use provenance::{provenance, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformationKind {
    Outsource,
    OutsourceOfType,
    Insource,
    Backsource,
    FollowUpOutsource,
    SourceExternalization,
    SourceInternalization,
    ProgressiveOutsource,
    DecomposeSourcement,
    DropSource,
    DevelopSource,
}

impl TransformationKind {
    pub const ALL: [TransformationKind; 11] = [
        TransformationKind::Outsource,
        TransformationKind::OutsourceOfType,
        TransformationKind::Insource,
        TransformationKind::Backsource,
        TransformationKind::FollowUpOutsource,
        TransformationKind::SourceExternalization,
        TransformationKind::SourceInternalization,
        TransformationKind::ProgressiveOutsource,
        TransformationKind::DecomposeSourcement,
        TransformationKind::DropSource,
        TransformationKind::DevelopSource,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            TransformationKind::Outsource => "outsource",
            TransformationKind::OutsourceOfType => "outsource_of_type",
            TransformationKind::Insource => "insource",
            TransformationKind::Backsource => "backsource",
            TransformationKind::FollowUpOutsource => "follow_up_outsource",
            TransformationKind::SourceExternalization => "source_externalization",
            TransformationKind::SourceInternalization => "source_internalization",
            TransformationKind::ProgressiveOutsource => "progressive_outsource",
            TransformationKind::DecomposeSourcement => "decompose_sourcement",
            TransformationKind::DropSource => "drop_source",
            TransformationKind::DevelopSource => "develop_source",
        }
    }

    /// Kinds that act on another unit and therefore need counterparties.
    pub fn needs_counterparties(self) -> bool {
        !matches!(
            self,
            TransformationKind::DropSource
                | TransformationKind::DevelopSource
                | TransformationKind::DecomposeSourcement
        )
    }
}

impl fmt::Display for TransformationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for TransformationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.tag() == s).ok_or_else(|| format!("unknown transformation kind `{s}`"))
    }
}

/// What a transformation acts on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Sources(BTreeSet<SourceId>),
    Type(SourceTypeId),
    Theme(ThemeId),
    Sourcement(SourcementId),
    /// The running service contract a follow-up or progressive outsourcing
    /// replaces.
    Contract(ContractId),
}

impl Subject {
    pub fn tag(&self) -> &'static str {
        match self {
            Subject::Sources(_) => "sources",
            Subject::Type(_) => "type",
            Subject::Theme(_) => "theme",
            Subject::Sourcement(_) => "sourcement",
            Subject::Contract(_) => "contract",
        }
    }
}

/// Terms of the service contract a transformation creates. Provider and
/// consumer follow from the kind, actor, and counterparties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServicePayload {
    pub contract: ContractId,
    pub theme: ThemeId,
    pub period: Period,
    pub notice_interval: Timestamp,
    #[serde(default)]
    pub termination_protocol: String,
    #[serde(default)]
    pub terms: CommitmentTerms,
    #[serde(default)]
    pub unit_commitment: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub management_source: Option<SourceId>,
}

/// Description of a source created by `develop_source`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DevelopPayload {
    pub source_type: SourceTypeId,
    #[serde(default)]
    pub descriptor: String,
    #[serde(default)]
    pub depends_on: BTreeSet<SourceId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub use_for: Option<ThemeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformationSpec {
    pub kind: TransformationKind,
    pub actor: UnitId,
    #[serde(default)]
    pub counterparties: Vec<UnitId>,
    pub subject: Subject,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<ServicePayload>,
    #[serde(default)]
    pub commitments_to_create: BTreeSet<SourceId>,
    #[serde(default)]
    pub compensation: Compensation,
    /// Receiving counterparty per source; unlisted sources go to the first
    /// counterparty.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub assignments: BTreeMap<SourceId, UnitId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub develop: Option<DevelopPayload>,
    /// Parts a basic sourcement group is split into.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub split: Vec<BTreeSet<SourceId>>,
    /// Declared attestation that the new provider is more strongly tied by
    /// mission to the service (progressive outsourcing).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mission_tied: Option<bool>,
    /// Logical time the transformation completes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<Timestamp>,
}

impl TransformationSpec {
    pub fn new(kind: TransformationKind, actor: impl Into<UnitId>, subject: Subject) -> Self {
        Self {
            kind,
            actor: actor.into(),
            counterparties: Vec::new(),
            subject,
            service: None,
            commitments_to_create: BTreeSet::new(),
            compensation: Compensation::None,
            assignments: BTreeMap::new(),
            develop: None,
            split: Vec::new(),
            mission_tied: None,
            at: None,
        }
    }

    pub fn with_counterparties<I, U>(mut self, units: I) -> Self
    where
        I: IntoIterator<Item = U>,
        U: Into<UnitId>,
    {
        self.counterparties = units.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_service(mut self, service: ServicePayload) -> Self {
        self.service = Some(service);
        self
    }

    pub fn with_commitments<I, S>(mut self, sources: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<SourceId>,
    {
        self.commitments_to_create = sources.into_iter().map(Into::into).collect();
        self
    }
}

pub fn sources<I, S>(ids: I) -> Subject
where
    I: IntoIterator<Item = S>,
    S: Into<SourceId>,
{
    Subject::Sources(ids.into_iter().map(Into::into).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_tags_round_trip() {
        for kind in TransformationKind::ALL {
            assert_eq!(kind.tag().parse::<TransformationKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.tag()));
        }
    }
}
