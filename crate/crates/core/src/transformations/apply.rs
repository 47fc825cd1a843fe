use std::collections::BTreeSet;

use super::effect::{resolve, Effect};
use super::TransformationSpec;
use crate::error::{Error, Result};
use crate::model::*;

/// Apply a transformation to a valid state, returning the successor state
/// and the log extended by one event.
pub fn apply(state: &WorldState, spec: &TransformationSpec, log: &HistoryLog) -> Result<(WorldState, HistoryLog)> {
    let pre_digest = state_digest(state)?;
    log.verify_chain().map_err(Error::InconsistentLog)?;
    if let Some(last) = log.events.last() {
        if last.post_digest != pre_digest {
            return Err(Error::InconsistentLog(format!(
                "log ends at {} but the state is {}",
                last.post_digest.short(),
                pre_digest.short()
            )));
        }
    }
    let effect = resolve(state, spec, log)?;
    let mut next = state.clone();
    commit(&mut next, &effect);
    let diagnostics = validate_state(&next);
    if let Some(first) = diagnostics.first() {
        return Err(Error::precondition(&first.code, format!("the result would be invalid: {}", first.message)));
    }
    let post_digest = fingerprint(&next);
    let mut log = log.clone();
    log.push(HistoryEvent {
        seq: log.next_seq(),
        time: next.timestamp,
        kind: EventKind::Transformation(spec.kind),
        actor: Some(spec.actor.clone()),
        parameters: EventParameters::Transformation(spec.clone()),
        pre_digest,
        post_digest,
        effects: effect.effects_record(),
    });
    Ok((next, log))
}

/// Apply a resolved delta in one move.
pub(crate) fn commit(state: &mut WorldState, effect: &Effect) {
    if let Some(clock) = effect.clock {
        state.timestamp = clock;
    }
    for id in &effect.terminate_contracts {
        state.contracts.remove(id);
    }
    for id in &effect.discharge_commitments {
        state.commitments.remove(id);
    }
    for r in &effect.remove_uses {
        state.use_relations.remove(r);
    }
    if let Some(m) = &effect.move_theme {
        move_theme(state, &m.theme, &m.from, &m.to);
    }
    for group in &effect.transfers {
        for s in &group.sources {
            if let Some(source) = state.sources.get_mut(s) {
                source.owner = group.to.clone();
            }
        }
    }
    if let Some(split) = &effect.split {
        split_basic(state, &split.sourcement, &split.group, &split.parts);
    }
    if let Some(source) = &effect.create_source {
        state.add_source(source.clone());
    }
    for r in &effect.add_uses {
        state.use_relations.insert(r.clone());
    }
    for id in &effect.remove_sources {
        remove_source(state, id);
    }
    for c in &effect.create_contracts {
        state.add_contract(c.clone());
    }
    for (id, origin) in &effect.repoint_commitments {
        if let Some(c) = state.commitments.get_mut(id) {
            c.origin = origin.clone();
        }
    }
    for c in &effect.create_commitments {
        state.add_commitment(c.clone());
    }
    state.refresh_sourcements();
}

/// Hand a theme to another maintainer together with the uses and
/// sourcements that hang on it.
pub(crate) fn move_theme(state: &mut WorldState, theme: &ThemeId, from: &UnitId, to: &UnitId) {
    if let Some(t) = state.themes.get_mut(theme) {
        t.maintainer = to.clone();
    }
    let moved: Vec<UseRelation> =
        state.use_relations.iter().filter(|r| &r.theme == theme && &r.user == from).cloned().collect();
    for r in moved {
        state.use_relations.remove(&r);
        state.use_relations.insert(UseRelation { user: to.clone(), ..r });
    }
    for sm in state.sourcements.values_mut() {
        if &sm.principal == from && sm.themes.contains(theme) {
            sm.principal = to.clone();
        }
    }
}

pub(crate) fn split_basic(
    state: &mut WorldState,
    sourcement: &SourcementId,
    group: &BTreeSet<SourceId>,
    parts: &[BTreeSet<SourceId>],
) -> bool {
    let Some(sm) = state.sourcements.get_mut(sourcement) else { return false };
    let Some(basic) = sm.basics.iter().find(|b| &b.sources == group).cloned() else { return false };
    sm.basics.remove(&basic);
    for part in parts {
        sm.basics.insert(BasicSourcement { sources: part.clone(), owner: basic.owner.clone() });
    }
    true
}

/// Remove a source and every structural mention of it.
pub(crate) fn remove_source(state: &mut WorldState, id: &SourceId) {
    state.sources.remove(id);
    for s in state.sources.values_mut() {
        s.depends_on.remove(id);
    }
    for sm in state.sourcements.values_mut() {
        sm.basics = std::mem::take(&mut sm.basics)
            .into_iter()
            .filter_map(|mut b| {
                b.sources.remove(id);
                (!b.sources.is_empty()).then_some(b)
            })
            .collect();
    }
}
