//! Transition plans: step sequences that implement a transformation, with
//! lane annotations for steps that may proceed in parallel.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::*;
use crate::transformations::effect::{resolve, Effect};
use crate::transformations::{apply, TransformationSpec};
use crate::transformations::{apply::move_theme, apply::remove_source, apply::split_basic};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum StepAction {
    /// Moves one basic sourcement group (or a lone source) as a whole, so
    /// no intermediate state splits a group between owners.
    TransferOwnership {
        sources: BTreeSet<SourceId>,
        from: UnitId,
        to: UnitId,
    },
    CreateContract {
        contract: ServiceContract,
    },
    TerminateContract {
        id: ContractId,
    },
    CreateCommitment {
        id: CommitmentId,
        unit: UnitId,
        source: SourceId,
        origin: CommitmentOrigin,
    },
    DischargeCommitment {
        id: CommitmentId,
    },
    CreateSource {
        source: Source,
    },
    RemoveSource {
        id: SourceId,
    },
    AddUseRelation {
        user: UnitId,
        source: SourceId,
        theme: ThemeId,
    },
    RemoveUseRelation {
        user: UnitId,
        source: SourceId,
        theme: ThemeId,
    },
    MoveTheme {
        theme: ThemeId,
        from: UnitId,
        to: UnitId,
    },
    SplitBasic {
        sourcement: SourcementId,
        group: BTreeSet<SourceId>,
        parts: Vec<BTreeSet<SourceId>>,
    },
    AdvanceClock {
        to: Timestamp,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitiveStep {
    #[serde(flatten)]
    pub action: StepAction,
    #[serde(default)]
    pub lane: u32,
}

impl PrimitiveStep {
    pub fn new(action: StepAction, lane: u32) -> Self {
        Self { action, lane }
    }

    pub fn op(&self) -> &'static str {
        match &self.action {
            StepAction::TransferOwnership { .. } => "transfer_ownership",
            StepAction::CreateContract { .. } => "create_contract",
            StepAction::TerminateContract { .. } => "terminate_contract",
            StepAction::CreateCommitment { .. } => "create_commitment",
            StepAction::DischargeCommitment { .. } => "discharge_commitment",
            StepAction::CreateSource { .. } => "create_source",
            StepAction::RemoveSource { .. } => "remove_source",
            StepAction::AddUseRelation { .. } => "add_use_relation",
            StepAction::RemoveUseRelation { .. } => "remove_use_relation",
            StepAction::MoveTheme { .. } => "move_theme",
            StepAction::SplitBasic { .. } => "split_basic",
            StepAction::AdvanceClock { .. } => "advance_clock",
        }
    }

    /// Entities the step reads or writes, as `family:id` keys.
    pub fn touches(&self, state: &WorldState) -> BTreeSet<String> {
        let key = |family: &str, id: &str| format!("{family}:{id}");
        let mut out = BTreeSet::new();
        match &self.action {
            StepAction::TransferOwnership { sources, .. } => {
                out.extend(sources.iter().map(|s| key("source", s.as_str())));
            }
            StepAction::CreateContract { contract } => {
                out.insert(key("contract", contract.id.as_str()));
            }
            StepAction::TerminateContract { id } => {
                out.insert(key("contract", id.as_str()));
            }
            StepAction::CreateCommitment { id, source, .. } => {
                out.insert(key("commitment", id.as_str()));
                out.insert(key("source", source.as_str()));
            }
            StepAction::DischargeCommitment { id } => {
                out.insert(key("commitment", id.as_str()));
                if let Some(c) = state.commitments.get(id) {
                    out.insert(key("source", c.source.as_str()));
                }
            }
            StepAction::CreateSource { source } => {
                out.insert(key("source", source.id.as_str()));
            }
            StepAction::RemoveSource { id } => {
                out.insert(key("source", id.as_str()));
            }
            StepAction::AddUseRelation { source, .. } | StepAction::RemoveUseRelation { source, .. } => {
                out.insert(key("source", source.as_str()));
            }
            StepAction::MoveTheme { theme, .. } => {
                out.insert(key("theme", theme.as_str()));
            }
            StepAction::SplitBasic { sourcement, .. } => {
                out.insert(key("sourcement", sourcement.as_str()));
            }
            StepAction::AdvanceClock { .. } => {
                out.insert("clock".to_owned());
            }
        }
        out
    }
}

/// An ordered step list between two declared state fingerprints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionPlan {
    pub steps: Vec<PrimitiveStep>,
    pub declared_pre: Fingerprint,
    pub declared_post: Fingerprint,
    /// Free-text risk and role annotations; never interpreted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<String>,
}

impl TransitionPlan {
    pub fn lanes(&self) -> BTreeSet<u32> {
        self.steps.iter().map(|s| s.lane).collect()
    }
}

/// Outcome of checking a plan against a transformation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub valid: bool,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn plan(state: &WorldState, spec: &TransformationSpec) -> Result<TransitionPlan> {
    plan_with_log(state, spec, &HistoryLog::new())
}

/// Plan against a state with history, which history-dependent kinds
/// (backsourcing) need.
pub fn plan_with_log(state: &WorldState, spec: &TransformationSpec, log: &HistoryLog) -> Result<TransitionPlan> {
    let (post, _) = apply(state, spec, log)?;
    let effect = resolve(state, spec, log)?;
    Ok(TransitionPlan {
        steps: steps_for(state, &effect),
        declared_pre: fingerprint(state),
        declared_post: fingerprint(&post),
        annotations: Vec::new(),
    })
}

fn steps_for(state: &WorldState, effect: &Effect) -> Vec<PrimitiveStep> {
    let mut lane_of: BTreeMap<&SourceId, u32> = BTreeMap::new();
    for (i, group) in effect.transfers.iter().enumerate() {
        for s in &group.sources {
            lane_of.insert(s, i as u32 + 1);
        }
    }
    let lane = |s: &SourceId| lane_of.get(s).copied().unwrap_or(0);
    let mut steps = Vec::new();
    let mut push = |action: StepAction, lane: u32| steps.push(PrimitiveStep::new(action, lane));

    if let Some(to) = effect.clock {
        if to != state.timestamp {
            push(StepAction::AdvanceClock { to }, 0);
        }
    }
    for id in &effect.terminate_contracts {
        push(StepAction::TerminateContract { id: id.clone() }, 0);
    }
    for id in &effect.discharge_commitments {
        let l = state.commitments.get(id).map_or(0, |c| lane(&c.source));
        push(StepAction::DischargeCommitment { id: id.clone() }, l);
    }
    for r in &effect.remove_uses {
        push(
            StepAction::RemoveUseRelation { user: r.user.clone(), source: r.source.clone(), theme: r.theme.clone() },
            lane(&r.source),
        );
    }
    if let Some(m) = &effect.move_theme {
        push(StepAction::MoveTheme { theme: m.theme.clone(), from: m.from.clone(), to: m.to.clone() }, 0);
    }
    for (i, g) in effect.transfers.iter().enumerate() {
        push(
            StepAction::TransferOwnership { sources: g.sources.clone(), from: g.from.clone(), to: g.to.clone() },
            i as u32 + 1,
        );
    }
    if let Some(split) = &effect.split {
        push(
            StepAction::SplitBasic {
                sourcement: split.sourcement.clone(),
                group: split.group.clone(),
                parts: split.parts.clone(),
            },
            0,
        );
    }
    if let Some(source) = &effect.create_source {
        push(StepAction::CreateSource { source: source.clone() }, 0);
    }
    for r in &effect.add_uses {
        push(
            StepAction::AddUseRelation { user: r.user.clone(), source: r.source.clone(), theme: r.theme.clone() },
            lane(&r.source),
        );
    }
    for id in &effect.remove_sources {
        push(StepAction::RemoveSource { id: id.clone() }, 0);
    }
    for c in &effect.create_contracts {
        push(StepAction::CreateContract { contract: c.clone() }, 0);
    }
    for (id, origin) in &effect.repoint_commitments {
        let Some(c) = state.commitments.get(id) else { continue };
        let l = lane(&c.source);
        push(StepAction::DischargeCommitment { id: id.clone() }, l);
        push(
            StepAction::CreateCommitment {
                id: id.clone(),
                unit: c.committed_unit.clone(),
                source: c.source.clone(),
                origin: origin.clone(),
            },
            l,
        );
    }
    for c in &effect.create_commitments {
        push(
            StepAction::CreateCommitment {
                id: c.id.clone(),
                unit: c.committed_unit.clone(),
                source: c.source.clone(),
                origin: c.origin.clone(),
            },
            lane(&c.source),
        );
    }
    steps
}

fn step_error(index: usize, code: &str, entities: Vec<String>, message: impl Into<String>) -> Error {
    Error::StepFailed { index, diagnostic: Diagnostic::error(code, entities, message) }
}

/// Reject plans where one entity is touched from two different lanes.
pub fn check_lanes(state: &WorldState, plan: &TransitionPlan) -> Result<()> {
    let mut owner: BTreeMap<String, u32> = BTreeMap::new();
    for (index, step) in plan.steps.iter().enumerate() {
        for entity in step.touches(state) {
            match owner.get(&entity) {
                Some(&lane) if lane != step.lane => {
                    return Err(step_error(
                        index,
                        "LANE_CONFLICT",
                        vec![entity.clone()],
                        format!("{entity} is touched in lanes {lane} and {}", step.lane),
                    ));
                }
                _ => {
                    owner.insert(entity, step.lane);
                }
            }
        }
    }
    Ok(())
}

/// Execute a plan, returning every state from the start state to the final
/// one. Each intermediate state must validate.
pub fn apply_plan(state: &WorldState, plan: &TransitionPlan) -> Result<Vec<WorldState>> {
    let actual = fingerprint(state);
    if actual != plan.declared_pre {
        return Err(Error::PreMismatch { expected: plan.declared_pre.clone(), actual });
    }
    check_lanes(state, plan)?;
    let mut states = vec![state.clone()];
    let mut current = state.clone();
    for (index, step) in plan.steps.iter().enumerate() {
        apply_step(&mut current, step).map_err(|diagnostic| Error::StepFailed { index, diagnostic })?;
        if let Some(diagnostic) = validate_state(&current).into_iter().next() {
            return Err(Error::StepFailed { index, diagnostic });
        }
        states.push(current.clone());
    }
    let actual = fingerprint(&current);
    if actual != plan.declared_post {
        return Err(Error::PostMismatch { expected: plan.declared_post.clone(), actual });
    }
    Ok(states)
}

pub fn verify_plan(state: &WorldState, plan: &TransitionPlan, spec: &TransformationSpec) -> Verification {
    verify_plan_with_log(state, plan, spec, &HistoryLog::new())
}

pub fn verify_plan_with_log(
    state: &WorldState,
    plan: &TransitionPlan,
    spec: &TransformationSpec,
    log: &HistoryLog,
) -> Verification {
    let failure = |code: &str, message: String| Verification {
        valid: false,
        diagnostics: vec![Diagnostic::error(code, Vec::new(), message)],
    };
    let expected = match apply(state, spec, log) {
        Ok((post, _)) => fingerprint(&post),
        Err(e) => return failure(e.code(), e.to_string()),
    };
    let states = match apply_plan(state, plan) {
        Ok(states) => states,
        Err(Error::StepFailed { index, diagnostic }) => {
            return Verification {
                valid: false,
                diagnostics: vec![Diagnostic {
                    message: format!("step {index}: {}", diagnostic.message),
                    ..diagnostic
                }],
            }
        }
        Err(e) => return failure(e.code(), e.to_string()),
    };
    let reached = fingerprint(states.last().expect("apply_plan yields the start state"));
    if reached != expected {
        return failure(
            "POST_MISMATCH",
            format!("the plan ends in {} but the transformation yields {}", reached.short(), expected.short()),
        );
    }
    Verification { valid: true, diagnostics: Vec::new() }
}

fn refuse(code: &str, entity: &str, message: String) -> Diagnostic {
    Diagnostic::error(code, vec![entity.to_owned()], message)
}

/// Apply one step in place after checking that it fits the state.
pub fn apply_step(state: &mut WorldState, step: &PrimitiveStep) -> std::result::Result<(), Diagnostic> {
    const INAPPLICABLE: &str = "STEP_INAPPLICABLE";
    match &step.action {
        StepAction::TransferOwnership { sources, from, to } => {
            if sources.is_empty() {
                return Err(refuse(INAPPLICABLE, from.as_str(), "transfer of no sources".into()));
            }
            if !state.units.contains_key(to) {
                return Err(refuse(INAPPLICABLE, to.as_str(), format!("unknown receiving unit {to}")));
            }
            for s in sources {
                match state.sources.get(s) {
                    Some(src) if &src.owner == from => {}
                    Some(src) => {
                        return Err(refuse(
                            INAPPLICABLE,
                            s.as_str(),
                            format!("{s} is owned by {}, not {from}", src.owner),
                        ))
                    }
                    None => return Err(refuse(INAPPLICABLE, s.as_str(), format!("unknown source {s}"))),
                }
            }
            for s in sources {
                if let Some(src) = state.sources.get_mut(s) {
                    src.owner = to.clone();
                }
            }
        }
        StepAction::CreateContract { contract } => {
            if state.contracts.contains_key(&contract.id) {
                return Err(refuse(INAPPLICABLE, contract.id.as_str(), format!("contract {} exists", contract.id)));
            }
            state.add_contract(contract.clone());
        }
        StepAction::TerminateContract { id } => {
            if state.contracts.remove(id).is_none() {
                return Err(refuse(INAPPLICABLE, id.as_str(), format!("no active contract {id}")));
            }
        }
        StepAction::CreateCommitment { id, unit, source, origin } => {
            if state.commitments.contains_key(id) {
                return Err(refuse(INAPPLICABLE, id.as_str(), format!("commitment {id} exists")));
            }
            state.add_commitment(SourceCommitment {
                id: id.clone(),
                committed_unit: unit.clone(),
                source: source.clone(),
                origin: origin.clone(),
            });
        }
        StepAction::DischargeCommitment { id } => {
            if state.commitments.remove(id).is_none() {
                return Err(refuse(INAPPLICABLE, id.as_str(), format!("no commitment {id}")));
            }
        }
        StepAction::CreateSource { source } => {
            if state.sources.contains_key(&source.id) {
                return Err(refuse(INAPPLICABLE, source.id.as_str(), format!("source {} exists", source.id)));
            }
            state.add_source(source.clone());
        }
        StepAction::RemoveSource { id } => {
            if !state.sources.contains_key(id) {
                return Err(refuse(INAPPLICABLE, id.as_str(), format!("no source {id}")));
            }
            remove_source(state, id);
        }
        StepAction::AddUseRelation { user, source, theme } => {
            let r = UseRelation::new(user.clone(), source.clone(), theme.clone());
            if !state.use_relations.insert(r) {
                return Err(refuse(INAPPLICABLE, source.as_str(), format!("{user} already uses {source} for {theme}")));
            }
        }
        StepAction::RemoveUseRelation { user, source, theme } => {
            let r = UseRelation::new(user.clone(), source.clone(), theme.clone());
            if !state.use_relations.remove(&r) {
                return Err(refuse(INAPPLICABLE, source.as_str(), format!("{user} does not use {source} for {theme}")));
            }
        }
        StepAction::MoveTheme { theme, from, to } => {
            match state.themes.get(theme) {
                Some(t) if &t.maintainer == from => {}
                _ => return Err(refuse(INAPPLICABLE, theme.as_str(), format!("{from} does not maintain {theme}"))),
            }
            move_theme(state, theme, from, to);
        }
        StepAction::SplitBasic { sourcement, group, parts } => {
            let covers = parts.iter().flatten().cloned().collect::<BTreeSet<_>>() == *group
                && parts.iter().map(|p| p.len()).sum::<usize>() == group.len();
            if !covers || !split_basic(state, sourcement, group, parts) {
                return Err(refuse(
                    INAPPLICABLE,
                    sourcement.as_str(),
                    format!("cannot split that group of {sourcement}"),
                ));
            }
        }
        StepAction::AdvanceClock { to } => {
            if *to < state.timestamp {
                return Err(refuse(INAPPLICABLE, "clock", format!("clock cannot go back to {to}")));
            }
            state.timestamp = *to;
        }
    }
    state.refresh_sourcements();
    Ok(())
}

/// Apply one step as a logged event of its own.
pub fn execute_step(state: &WorldState, step: &PrimitiveStep, log: &HistoryLog) -> Result<(WorldState, HistoryLog)> {
    let pre_digest = state_digest(state)?;
    let mut next = state.clone();
    apply_step(&mut next, step).map_err(|diagnostic| Error::StepFailed { index: 0, diagnostic })?;
    if let Some(diagnostic) = validate_state(&next).into_iter().next() {
        return Err(Error::StepFailed { index: 0, diagnostic });
    }
    let mut effects = EventEffects::default();
    match &step.action {
        StepAction::TransferOwnership { sources, from, to } => {
            effects.transfers =
                sources.iter().map(|s| Transfer { source: s.clone(), from: from.clone(), to: to.clone() }).collect();
        }
        StepAction::CreateSource { source } => {
            effects.created_sources.insert(source.id.clone());
        }
        StepAction::RemoveSource { id } => {
            effects.removed_sources.insert(id.clone());
        }
        StepAction::CreateContract { contract } => {
            effects.contracts_created.insert(contract.id.clone());
        }
        StepAction::TerminateContract { id } => {
            effects.contracts_terminated.insert(id.clone());
        }
        _ => {}
    }
    let mut log = log.clone();
    log.push(HistoryEvent {
        seq: log.next_seq(),
        time: next.timestamp,
        kind: EventKind::Step(StepMarker::PrimitiveStep),
        actor: None,
        parameters: EventParameters::Step(step.clone()),
        pre_digest,
        post_digest: fingerprint(&next),
        effects,
    });
    Ok((next, log))
}
