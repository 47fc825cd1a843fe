use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitmentClassification {
    Engaging,
    Preserving,
    PartiallyPreservingPartiallyDischarging,
    FullyDischarging,
}

impl CommitmentClassification {
    pub const ALL: [CommitmentClassification; 4] = [
        CommitmentClassification::Engaging,
        CommitmentClassification::Preserving,
        CommitmentClassification::PartiallyPreservingPartiallyDischarging,
        CommitmentClassification::FullyDischarging,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            CommitmentClassification::Engaging => "engaging",
            CommitmentClassification::Preserving => "preserving",
            CommitmentClassification::PartiallyPreservingPartiallyDischarging => {
                "partially_preserving_partially_discharging"
            }
            CommitmentClassification::FullyDischarging => "fully_discharging",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.tag() == tag)
    }
}

/// Compare the effective commitment sets (owned plus explicitly committed
/// sources) of `u` before and after a transition.
pub fn classify_commitments(pre: &WorldState, post: &WorldState, u: &UnitId) -> Result<CommitmentClassification> {
    if !pre.units.contains_key(u) || !post.units.contains_key(u) {
        return Err(Error::unknown(UnitId::FAMILY, u.as_str()));
    }
    Ok(compare(&pre.commitment_set(u), &post.commitment_set(u)))
}

pub(crate) fn compare(before: &BTreeSet<SourceId>, after: &BTreeSet<SourceId>) -> CommitmentClassification {
    if !after.is_subset(before) {
        CommitmentClassification::Engaging
    } else if before.is_subset(after) {
        CommitmentClassification::Preserving
    } else if after.is_disjoint(before) {
        CommitmentClassification::FullyDischarging
    } else {
        CommitmentClassification::PartiallyPreservingPartiallyDischarging
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceCharacteristic {
    FullySourceNonCommittingIntentional,
    FullySourceNonCommittingUnintentional,
    PartiallySourceCommitting,
    FullySourceCommitting,
}

impl ServiceCharacteristic {
    pub const ALL: [ServiceCharacteristic; 4] = [
        ServiceCharacteristic::FullySourceNonCommittingIntentional,
        ServiceCharacteristic::FullySourceNonCommittingUnintentional,
        ServiceCharacteristic::PartiallySourceCommitting,
        ServiceCharacteristic::FullySourceCommitting,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ServiceCharacteristic::FullySourceNonCommittingIntentional => "fully_source_non_committing_intentional",
            ServiceCharacteristic::FullySourceNonCommittingUnintentional => "fully_source_non_committing_unintentional",
            ServiceCharacteristic::PartiallySourceCommitting => "partially_source_committing",
            ServiceCharacteristic::FullySourceCommitting => "fully_source_committing",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.tag() == tag)
    }
}

/// Judge how far the consumer of a contract is committed to the provider
/// sources behind the service.
pub fn service_characteristic(state: &WorldState, contract: &ContractId) -> Result<ServiceCharacteristic> {
    let c = state.contracts.get(contract).ok_or_else(|| Error::unknown(ContractId::FAMILY, contract.as_str()))?;
    let mut relevant: BTreeSet<&SourceId> = state
        .use_relations
        .iter()
        .filter(|r| r.user == c.consumer && r.theme == c.theme && state.owner_of(&r.source) == Some(&c.provider))
        .map(|r| &r.source)
        .collect();
    relevant.extend(
        state
            .commitments
            .values()
            .filter(|k| k.origin == CommitmentOrigin::Contract(c.id.clone()))
            .filter(|k| state.owner_of(&k.source) == Some(&c.provider))
            .map(|k| &k.source),
    );
    if let Some(management) = &c.management_source {
        relevant.remove(management);
    }
    let committed: BTreeSet<&SourceId> =
        state.explicit_commitments_of(&c.consumer).map(|k| &k.source).filter(|s| relevant.contains(s)).collect();
    Ok(if committed.is_empty() {
        match c.intentional_commitment_terms {
            CommitmentTerms::IntentionallyNonCommitting => ServiceCharacteristic::FullySourceNonCommittingIntentional,
            CommitmentTerms::Unspecified => ServiceCharacteristic::FullySourceNonCommittingUnintentional,
        }
    } else if committed.len() == relevant.len() {
        ServiceCharacteristic::FullySourceCommitting
    } else {
        ServiceCharacteristic::PartiallySourceCommitting
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<SourceId> {
        items.iter().map(|s| SourceId::from(*s)).collect()
    }

    #[test]
    fn subset_transitions_of_two_commitments() {
        let subsets: [&[&str]; 4] = [&[], &["c1"], &["c2"], &["c1", "c2"]];
        for before in subsets {
            for after in subsets {
                let (b, a) = (set(before), set(after));
                let expected = if a.difference(&b).next().is_some() {
                    CommitmentClassification::Engaging
                } else if a == b || b.is_empty() {
                    CommitmentClassification::Preserving
                } else if a.is_empty() {
                    CommitmentClassification::FullyDischarging
                } else {
                    CommitmentClassification::PartiallyPreservingPartiallyDischarging
                };
                assert_eq!(compare(&b, &a), expected, "{before:?} -> {after:?}");
            }
        }
    }

    #[test]
    fn tags_round_trip() {
        for c in CommitmentClassification::ALL {
            assert_eq!(CommitmentClassification::from_tag(c.tag()), Some(c));
        }
        for c in ServiceCharacteristic::ALL {
            assert_eq!(ServiceCharacteristic::from_tag(c.tag()), Some(c));
        }
    }
}
