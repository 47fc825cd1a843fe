use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::TransformationKind as Kind;
use crate::error::{Error, Result};
use crate::model::*;
use crate::relations::{type_status_unchecked, uses_unchecked, SourcingStatus};

/// Transformation kinds consistent with an observed delta. Empty when no
/// kind explains it, plural when the delta is ambiguous.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransformationKindResult {
    pub kinds: BTreeSet<Kind>,
}

impl TransformationKindResult {
    pub fn contains(&self, kind: Kind) -> bool {
        self.kinds.contains(&kind)
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn tags(&self) -> Vec<&'static str> {
        self.kinds.iter().map(|k| k.tag()).collect()
    }
}

struct Delta<'a> {
    outgoing: BTreeMap<&'a SourceId, &'a UnitId>,
    incoming: BTreeMap<&'a SourceId, &'a UnitId>,
    /// Transfers between two other units: source → (from, to).
    foreign: Vec<(&'a UnitId, &'a UnitId)>,
    created: Vec<&'a ServiceContract>,
    terminated: Vec<&'a ServiceContract>,
}

fn delta<'a>(pre: &'a WorldState, post: &'a WorldState, u: &UnitId) -> Delta<'a> {
    let mut d = Delta {
        outgoing: BTreeMap::new(),
        incoming: BTreeMap::new(),
        foreign: Vec::new(),
        created: Vec::new(),
        terminated: Vec::new(),
    };
    for (id, before) in &pre.sources {
        let Some(after) = post.sources.get(id) else { continue };
        if before.owner == after.owner {
            continue;
        }
        if &before.owner == u {
            d.outgoing.insert(id, &after.owner);
        } else if &after.owner == u {
            d.incoming.insert(id, &before.owner);
        } else {
            d.foreign.push((&before.owner, &after.owner));
        }
    }
    for (id, c) in &post.contracts {
        if pre.contracts.get(id) != Some(c) {
            d.created.push(c);
        }
    }
    for (id, c) in &pre.contracts {
        if post.contracts.get(id) != Some(c) {
            d.terminated.push(c);
        }
    }
    d
}

/// Kinds of transformation that could have carried `pre` to `post`, seen
/// from `focus`.
pub fn classify(pre: &WorldState, post: &WorldState, focus: &UnitId) -> Result<TransformationKindResult> {
    for state in [pre, post] {
        let diagnostics = validate_state(state);
        if !diagnostics.is_empty() {
            return Err(Error::InvalidState(diagnostics));
        }
    }
    if !pre.units.contains_key(focus) && !post.units.contains_key(focus) {
        return Err(Error::unknown(UnitId::FAMILY, focus.as_str()));
    }
    if pre.same_content(post) {
        return Err(Error::NoDelta);
    }
    let d = delta(pre, post, focus);
    let mut kinds = BTreeSet::new();

    let theme_receivers: BTreeSet<&UnitId> = pre
        .themes
        .values()
        .filter(|t| &t.maintainer == focus)
        .filter_map(|t| post.themes.get(&t.id).map(|after| &after.maintainer))
        .filter(|m| *m != focus)
        .collect();
    let recipients: BTreeSet<&UnitId> = d.outgoing.values().copied().chain(theme_receivers.iter().copied()).collect();
    let buys_from_recipient = d.created.iter().any(|c| &c.consumer == focus && recipients.contains(&c.provider));
    if !recipients.is_empty() && buys_from_recipient {
        kinds.insert(Kind::Outsource);
        if type_abandoned(pre, post, focus, d.outgoing.keys().copied()) {
            kinds.insert(Kind::OutsourceOfType);
        }
    }

    let givers: BTreeSet<&UnitId> = d.incoming.values().copied().collect();
    if !givers.is_empty() {
        if d.created.iter().any(|c| &c.provider == focus && givers.contains(&c.consumer)) {
            kinds.insert(Kind::Insource);
        }
        if d.terminated.iter().any(|c| &c.consumer == focus && givers.contains(&c.provider)) {
            kinds.insert(Kind::Backsource);
        }
    }

    let touches_focus = |c: &&ServiceContract| &c.consumer == focus || &c.provider == focus;
    let contracts_unchanged = !d.created.iter().any(touches_focus) && !d.terminated.iter().any(touches_focus);
    if contracts_unchanged && !d.outgoing.is_empty() && d.incoming.is_empty() {
        kinds.insert(Kind::SourceExternalization);
    }
    if contracts_unchanged && !d.incoming.is_empty() && d.outgoing.is_empty() {
        kinds.insert(Kind::SourceInternalization);
    }

    if d.outgoing.is_empty() && d.incoming.is_empty() {
        for old in d.terminated.iter().filter(|c| &c.consumer == focus) {
            for new in d.created.iter().filter(|c| &c.consumer == focus && c.theme == old.theme) {
                let only_onward = d.foreign.iter().all(|(from, to)| *from == &old.provider && *to == &new.provider);
                if !only_onward {
                    continue;
                }
                kinds.insert(Kind::FollowUpOutsource);
                if !d.foreign.is_empty() && new.provider != old.provider {
                    kinds.insert(Kind::ProgressiveOutsource);
                }
            }
        }
    }

    let removed: Vec<&Source> =
        pre.sources.values().filter(|s| &s.owner == focus && !post.sources.contains_key(&s.id)).collect();
    if !removed.is_empty() {
        kinds.insert(Kind::DropSource);
    }
    if post.sources.values().any(|s| &s.owner == focus && !pre.sources.contains_key(&s.id)) {
        kinds.insert(Kind::DevelopSource);
    }

    // A used own source of some type gave way to a used foreign source of
    // the same type: whether the old source was outsourced cannot be told.
    let replaced = pre.source_types.keys().any(|tau| {
        let lost_own = pre.sources.values().any(|s| {
            &s.source_type == tau
                && &s.owner == focus
                && uses_unchecked(pre, focus, &s.id)
                && !(post.sources.get(&s.id).is_some_and(|after| &after.owner == focus)
                    && uses_unchecked(post, focus, &s.id))
        });
        let gained_foreign = post.sources.values().any(|s| {
            &s.source_type == tau
                && &s.owner != focus
                && uses_unchecked(post, focus, &s.id)
                && !(pre.sources.get(&s.id).is_some_and(|before| &before.owner != focus)
                    && uses_unchecked(pre, focus, &s.id))
                && !d.outgoing.contains_key(&s.id)
        });
        lost_own && gained_foreign
    });
    if replaced {
        kinds.insert(Kind::Outsource);
        kinds.insert(Kind::DropSource);
        if type_abandoned(pre, post, focus, removed.iter().map(|s| &s.id)) {
            kinds.insert(Kind::OutsourceOfType);
        }
    }

    let split = post.sourcements.values().any(|after| {
        &after.principal == focus
            && pre.sourcements.get(&after.id).is_some_and(|before| {
                before.basics != after.basics
                    && before.all_sources() == after.all_sources()
                    && before.basics.len() < after.basics.len()
            })
    });
    if split {
        kinds.insert(Kind::DecomposeSourcement);
    }
    Ok(TransformationKindResult { kinds })
}

/// Labels that name a delta without being a transformation kind of their
/// own. `backservicing`: `focus` drops a service that carried no source
/// commitments and develops a source of its own for the same theme.
pub fn labels(pre: &WorldState, post: &WorldState, focus: &UnitId) -> Result<BTreeSet<&'static str>> {
    classify(pre, post, focus)?;
    let d = delta(pre, post, focus);
    let mut out = BTreeSet::new();
    let developed: Vec<&Source> =
        post.sources.values().filter(|s| &s.owner == focus && !pre.sources.contains_key(&s.id)).collect();
    let backservicing = d.terminated.iter().filter(|c| &c.consumer == focus).any(|c| {
        let discharged = matches!(
            super::service_characteristic(pre, &c.id),
            Ok(super::ServiceCharacteristic::FullySourceNonCommittingIntentional
                | super::ServiceCharacteristic::FullySourceNonCommittingUnintentional)
        );
        let self_served = developed
            .iter()
            .any(|s| post.use_relations.iter().any(|r| &r.user == focus && r.source == s.id && r.theme == c.theme));
        discharged && self_served
    });
    if backservicing {
        out.insert("backservicing");
    }
    Ok(out)
}

/// Some type of the given sources went from (partially) selfsourced to
/// fully non-selfsourced for `u`.
fn type_abandoned<'a>(
    pre: &WorldState,
    post: &WorldState,
    u: &UnitId,
    sources: impl Iterator<Item = &'a SourceId>,
) -> bool {
    let types: BTreeSet<&SourceTypeId> = sources.filter_map(|s| pre.sources.get(s).map(|s| &s.source_type)).collect();
    types.into_iter().any(|tau| {
        type_status_unchecked(pre, u, tau).partial_selfsourcing_type
            && post.source_types.contains_key(tau)
            && type_status_unchecked(post, u, tau).status == SourcingStatus::NonSelfsourcingType
    })
}
