use serde::{Deserialize, Serialize};

use super::TransformationKind as Kind;
use crate::error::{Error, Result};
use crate::model::*;

/// How a source came to be where it is, seen from one unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    DevelopedInsideNeverOutsourced,
    InsourcedFrom(UnitId),
    /// The third unit and the provider it moved the source away from.
    FollowUpOutsourcedByThird(UnitId, UnitId),
    Backsourced,
    OutsourcedTo(UnitId),
    /// Previous and current provider.
    FollowUpOutsourcedTo(UnitId, UnitId),
    DevelopedInProviderNeverOutsourced(UnitId),
    /// Successive owners from the developing unit to the current one.
    DevelopedThenChained(Vec<UnitId>),
}

impl Provenance {
    pub const TAGS: [&'static str; 8] = [
        "developed_inside_never_outsourced",
        "insourced_from",
        "follow_up_outsourced_by_third",
        "backsourced",
        "outsourced_to",
        "follow_up_outsourced_to",
        "developed_in_provider_never_outsourced",
        "developed_then_chained",
    ];

    pub fn tag(&self) -> &'static str {
        let i = match self {
            Provenance::DevelopedInsideNeverOutsourced => 0,
            Provenance::InsourcedFrom(_) => 1,
            Provenance::FollowUpOutsourcedByThird(..) => 2,
            Provenance::Backsourced => 3,
            Provenance::OutsourcedTo(_) => 4,
            Provenance::FollowUpOutsourcedTo(..) => 5,
            Provenance::DevelopedInProviderNeverOutsourced(_) => 6,
            Provenance::DevelopedThenChained(_) => 7,
        };
        Self::TAGS[i]
    }
}

/// Classify the history of `s` relative to `u`. Sources present before the
/// first event count as developed by their first recorded owner.
pub fn provenance(log: &HistoryLog, state: &WorldState, u: &UnitId, s: &SourceId) -> Result<Provenance> {
    let source = state.sources.get(s).ok_or_else(|| Error::unknown(SourceId::FAMILY, s.as_str()))?;
    if !state.units.contains_key(u) {
        return Err(Error::unknown(UnitId::FAMILY, u.as_str()));
    }
    log.verify_chain().map_err(Error::InconsistentLog)?;
    if let Some(last) = log.events.last() {
        if last.post_digest != fingerprint(state) {
            return Err(Error::InconsistentLog("the log does not end in the given state".into()));
        }
    }
    let owner = &source.owner;
    let moves: Vec<(&HistoryEvent, &Transfer)> =
        log.involving(s).filter_map(|e| e.effects.transfer_of(s).map(|t| (e, t))).collect();
    let Some(&(event, transfer)) = moves.last() else {
        return Ok(if owner == u {
            Provenance::DevelopedInsideNeverOutsourced
        } else {
            Provenance::DevelopedInProviderNeverOutsourced(owner.clone())
        });
    };
    let kind = event.kind.transformation();
    let actor = event.actor.as_ref();
    if owner == u {
        return Ok(match kind {
            Some(Kind::Backsource) if actor == Some(u) => Provenance::Backsourced,
            Some(Kind::FollowUpOutsource | Kind::ProgressiveOutsource) if actor.is_some_and(|a| a != u) => {
                Provenance::FollowUpOutsourcedByThird(actor.expect("checked").clone(), transfer.from.clone())
            }
            _ => Provenance::InsourcedFrom(transfer.from.clone()),
        });
    }
    let outsourced_by_u = match kind {
        Some(Kind::Outsource | Kind::OutsourceOfType) => actor == Some(u),
        Some(Kind::Insource) => event.transformation().is_some_and(|t| t.counterparties.first() == Some(u)),
        _ => false,
    };
    if outsourced_by_u && &transfer.from == u {
        return Ok(Provenance::OutsourcedTo(owner.clone()));
    }
    if matches!(kind, Some(Kind::FollowUpOutsource | Kind::ProgressiveOutsource)) && actor == Some(u) {
        return Ok(Provenance::FollowUpOutsourcedTo(transfer.from.clone(), transfer.to.clone()));
    }
    let mut chain = vec![moves[0].1.from.clone()];
    chain.extend(moves.iter().map(|(_, t)| t.to.clone()));
    Ok(Provenance::DevelopedThenChained(chain))
}
