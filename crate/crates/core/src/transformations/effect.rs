//! Precondition checking and resolution of a transformation spec into the
//! concrete state delta it causes. Both the direct state update and the
//! transition plan generator consume the resolved delta.

use std::collections::{BTreeMap, BTreeSet};

use super::{Subject, TransformationKind as Kind, TransformationSpec};
use crate::error::{Error, Result};
use crate::model::*;
use crate::relations::{type_status_unchecked, uses_unchecked};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct TransferGroup {
    pub sources: BTreeSet<SourceId>,
    pub from: UnitId,
    pub to: UnitId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ThemeMove {
    pub theme: ThemeId,
    pub from: UnitId,
    pub to: UnitId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Split {
    pub sourcement: SourcementId,
    pub group: BTreeSet<SourceId>,
    pub parts: Vec<BTreeSet<SourceId>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct Effect {
    pub clock: Option<Timestamp>,
    pub terminate_contracts: BTreeSet<ContractId>,
    pub create_contracts: Vec<ServiceContract>,
    pub discharge_commitments: BTreeSet<CommitmentId>,
    pub repoint_commitments: BTreeMap<CommitmentId, CommitmentOrigin>,
    pub create_commitments: Vec<SourceCommitment>,
    pub remove_uses: BTreeSet<UseRelation>,
    pub add_uses: BTreeSet<UseRelation>,
    pub transfers: Vec<TransferGroup>,
    pub move_theme: Option<ThemeMove>,
    pub create_source: Option<Source>,
    pub remove_sources: BTreeSet<SourceId>,
    pub split: Option<Split>,
}

impl Effect {
    pub fn effects_record(&self) -> EventEffects {
        let mut transfers: Vec<Transfer> = self
            .transfers
            .iter()
            .flat_map(|g| {
                g.sources.iter().map(|s| Transfer { source: s.clone(), from: g.from.clone(), to: g.to.clone() })
            })
            .collect();
        transfers.sort();
        EventEffects {
            transfers,
            created_sources: self.create_source.iter().map(|s| s.id.clone()).collect(),
            removed_sources: self.remove_sources.clone(),
            contracts_created: self.create_contracts.iter().map(|c| c.id.clone()).collect(),
            contracts_terminated: self.terminate_contracts.clone(),
        }
    }
}

fn fail(code: &str, detail: impl Into<String>) -> Error {
    Error::precondition(code, detail)
}

fn unit(state: &WorldState, id: &UnitId) -> Result<()> {
    if state.units.contains_key(id) {
        Ok(())
    } else {
        Err(Error::unknown(UnitId::FAMILY, id.as_str()))
    }
}

fn source<'a>(state: &'a WorldState, id: &SourceId) -> Result<&'a Source> {
    state.sources.get(id).ok_or_else(|| Error::unknown(SourceId::FAMILY, id.as_str()))
}

/// Commitment id used when a unit commits to a source.
pub(crate) fn commitment_id(unit: &UnitId, source: &SourceId) -> CommitmentId {
    CommitmentId::new(format!("{unit}@{source}"))
}

/// Contract id for one provider of a service payload.
pub(crate) fn contract_id(base: &ContractId, provider: &UnitId, providers: usize) -> ContractId {
    if providers == 1 {
        base.clone()
    } else {
        ContractId::new(format!("{base}-{provider}"))
    }
}

pub(crate) fn resolve(state: &WorldState, spec: &TransformationSpec, log: &HistoryLog) -> Result<Effect> {
    unit(state, &spec.actor)?;
    check_counterparties(state, spec)?;
    let mut effect = Effect::default();
    if let Some(at) = spec.at {
        if at < state.timestamp {
            return Err(fail(
                "TIME_REGRESSION",
                format!("cannot apply at {at}, the state is already at {}", state.timestamp),
            ));
        }
        effect.clock = Some(at);
    }
    match spec.kind {
        Kind::Outsource => outsource(state, spec, &mut effect)?,
        Kind::OutsourceOfType => outsource_of_type(state, spec, &mut effect)?,
        Kind::Insource => insource(state, spec, &mut effect)?,
        Kind::Backsource => backsource(state, spec, log, &mut effect)?,
        Kind::FollowUpOutsource => follow_up(state, spec, &mut effect)?,
        Kind::ProgressiveOutsource => progressive(state, spec, &mut effect)?,
        Kind::SourceExternalization => {
            let sources = subject_sources(spec)?;
            externalize(state, spec, &spec.actor, sources, &mut effect)?
        }
        Kind::SourceInternalization => internalize(state, spec, &mut effect)?,
        Kind::DecomposeSourcement => decompose(state, spec, &mut effect)?,
        Kind::DevelopSource => develop(state, spec, &mut effect)?,
        Kind::DropSource => drop_source(state, spec, &mut effect)?,
    }
    Ok(effect)
}

fn check_counterparties(state: &WorldState, spec: &TransformationSpec) -> Result<()> {
    if spec.kind.needs_counterparties() && spec.counterparties.is_empty() {
        return Err(fail("NO_COUNTERPARTY", format!("{} needs at least one counterparty", spec.kind)));
    }
    let mut seen = BTreeSet::new();
    for c in &spec.counterparties {
        unit(state, c)?;
        if c == &spec.actor {
            return Err(fail("SELF_COUNTERPARTY", format!("{} cannot be its own counterparty", spec.actor)));
        }
        if !seen.insert(c) {
            return Err(fail("DUPLICATE_COUNTERPARTY", format!("{c} is listed twice")));
        }
    }
    for (s, to) in &spec.assignments {
        if !spec.counterparties.contains(to) {
            return Err(fail("ASSIGNMENT", format!("{s} is assigned to {to}, which is not a counterparty")));
        }
    }
    Ok(())
}

fn subject_mismatch(spec: &TransformationSpec) -> Error {
    fail("SUBJECT_MISMATCH", format!("{} does not accept a {} subject", spec.kind, spec.subject.tag()))
}

fn subject_sources(spec: &TransformationSpec) -> Result<&BTreeSet<SourceId>> {
    match &spec.subject {
        Subject::Sources(s) if !s.is_empty() => Ok(s),
        Subject::Sources(_) => Err(fail("EMPTY_SUBJECT", "no sources given")),
        _ => Err(subject_mismatch(spec)),
    }
}

fn subject_contract<'a>(state: &'a WorldState, spec: &TransformationSpec) -> Result<&'a ServiceContract> {
    match &spec.subject {
        Subject::Contract(id) => state.contracts.get(id).ok_or_else(|| Error::unknown(ContractId::FAMILY, id.as_str())),
        _ => Err(subject_mismatch(spec)),
    }
}

fn payload(spec: &TransformationSpec) -> Result<&super::ServicePayload> {
    spec.service.as_ref().ok_or_else(|| fail("MISSING_SERVICE", format!("{} requires a service payload", spec.kind)))
}

fn receiver_of<'a>(spec: &'a TransformationSpec, s: &SourceId) -> &'a UnitId {
    spec.assignments.get(s).unwrap_or(&spec.counterparties[0])
}

/// Group moved sources into atomic transfer units: every basic sourcement
/// group touched by a move must move whole and to one receiver.
fn group_transfers(state: &WorldState, moves: &BTreeMap<SourceId, UnitId>) -> Result<Vec<TransferGroup>> {
    let mut groups: Vec<BTreeSet<SourceId>> = moves.keys().map(|s| BTreeSet::from([s.clone()])).collect();
    for sourcement in state.sourcements.values() {
        for basic in &sourcement.basics {
            if !basic.sources.iter().any(|s| moves.contains_key(s)) {
                continue;
            }
            if let Some(missing) = basic.sources.iter().find(|s| !moves.contains_key(*s)) {
                return Err(fail(
                    "NEEDS_DECOMPOSITION",
                    format!(
                        "{missing} shares a basic sourcement of {} with a moved source; decompose first",
                        sourcement.id
                    ),
                ));
            }
            let (mut touching, rest): (Vec<_>, Vec<_>) =
                groups.into_iter().partition(|g| !g.is_disjoint(&basic.sources));
            let mut merged = BTreeSet::new();
            for g in touching.drain(..) {
                merged.extend(g);
            }
            groups = rest;
            groups.push(merged);
        }
    }
    let mut out = Vec::new();
    for g in groups {
        let first = g.iter().next().expect("groups are non-empty");
        let to = &moves[first];
        let from = &source(state, first)?.owner;
        for s in &g {
            if &moves[s] != to {
                return Err(fail(
                    "SPLIT_ASSIGNMENT",
                    format!("{first} and {s} share a basic sourcement but go to different units"),
                ));
            }
            if &source(state, s)?.owner != from {
                return Err(fail("MIXED_OWNERS", format!("{first} and {s} have different owners")));
            }
        }
        if from == to {
            continue;
        }
        out.push(TransferGroup { sources: g, from: from.clone(), to: to.clone() });
    }
    out.sort_by(|a, b| a.sources.cmp(&b.sources));
    Ok(out)
}

/// Discharge commitments a receiver holds to sources it is about to own.
fn discharge_for_receivers(state: &WorldState, moves: &BTreeMap<SourceId, UnitId>, effect: &mut Effect) {
    for c in state.commitments.values() {
        if moves.get(&c.source) == Some(&c.committed_unit) {
            effect.discharge_commitments.insert(c.id.clone());
        }
    }
}

fn make_contracts(
    state: &WorldState,
    spec: &TransformationSpec,
    consumer: &UnitId,
    providers: &[UnitId],
) -> Result<Vec<ServiceContract>> {
    let p = payload(spec)?;
    if !state.themes.contains_key(&p.theme) {
        return Err(Error::unknown(ThemeId::FAMILY, p.theme.as_str()));
    }
    let mut out = Vec::new();
    for provider in providers {
        let id = contract_id(&p.contract, provider, providers.len());
        if state.contracts.contains_key(&id) {
            return Err(fail("CONTRACT_EXISTS", format!("contract {id} already exists")));
        }
        out.push(ServiceContract {
            id,
            provider: provider.clone(),
            consumer: consumer.clone(),
            theme: p.theme.clone(),
            period: p.period,
            termination_protocol: p.termination_protocol.clone(),
            notice_interval: p.notice_interval,
            compensation: spec.compensation,
            intentional_commitment_terms: p.terms,
            unit_commitment: p.unit_commitment,
            management_source: p.management_source.clone(),
        });
    }
    Ok(out)
}

/// Commitments of `committed` to sources that end up owned by providers.
fn plan_commitments(
    state: &WorldState,
    spec: &TransformationSpec,
    committed: &UnitId,
    post_owner: impl Fn(&SourceId) -> Option<UnitId>,
    contracts: &[ServiceContract],
    effect: &mut Effect,
) -> Result<()> {
    for s in &spec.commitments_to_create {
        source(state, s)?;
        let owner = post_owner(s).expect("source exists");
        let Some(contract) = contracts.iter().find(|c| c.provider == owner) else {
            return Err(fail(
                "COMMITMENT_TARGET",
                format!("{s} will not be owned by a provider of this transformation"),
            ));
        };
        let id = commitment_id(committed, s);
        if state.commitments.contains_key(&id) {
            continue;
        }
        effect.create_commitments.push(SourceCommitment {
            id,
            committed_unit: committed.clone(),
            source: s.clone(),
            origin: CommitmentOrigin::Contract(contract.id.clone()),
        });
    }
    Ok(())
}

/// Shared core of outsourcing `sources` from `giver` to the counterparties,
/// with `consumer` buying the service.
fn outsource_sources(
    state: &WorldState,
    spec: &TransformationSpec,
    giver: &UnitId,
    sources: &BTreeSet<SourceId>,
    require_use: bool,
    effect: &mut Effect,
) -> Result<()> {
    for s in sources {
        let src = source(state, s)?;
        if &src.owner != giver {
            return Err(fail("NOT_OWNED", format!("{s} is owned by {}, not {giver}", src.owner)));
        }
        if require_use && !uses_unchecked(state, giver, s) {
            return Err(fail("NOT_USED", format!("{giver} does not use {s}")));
        }
    }
    let p = payload(spec)?;
    if effect.move_theme.is_none() && state.themes.get(&p.theme).is_some_and(|t| &t.maintainer != giver) {
        return Err(fail("SERVICE_THEME", format!("theme {} is not maintained by {giver}", p.theme)));
    }
    let moves: BTreeMap<SourceId, UnitId> = sources.iter().map(|s| (s.clone(), receiver_of(spec, s).clone())).collect();
    effect.transfers = group_transfers(state, &moves)?;
    discharge_for_receivers(state, &moves, effect);
    effect.create_contracts = make_contracts(state, spec, giver, &spec.counterparties)?;
    let contracts = effect.create_contracts.clone();
    plan_commitments(
        state,
        spec,
        giver,
        |s| moves.get(s).cloned().or_else(|| state.owner_of(s).cloned()),
        &contracts,
        effect,
    )
}

fn outsource(state: &WorldState, spec: &TransformationSpec, effect: &mut Effect) -> Result<()> {
    match &spec.subject {
        Subject::Sources(_) => {
            let sources = subject_sources(spec)?;
            outsource_sources(state, spec, &spec.actor, sources, true, effect)
        }
        Subject::Sourcement(id) => {
            let sm = state.sourcements.get(id).ok_or_else(|| Error::unknown(SourcementId::FAMILY, id.as_str()))?;
            if sm.principal != spec.actor {
                return Err(fail("NOT_PRINCIPAL", format!("{} is not the principal of {id}", spec.actor)));
            }
            let owned: BTreeSet<SourceId> =
                sm.basics.iter().filter(|b| b.owner == spec.actor).flat_map(|b| b.sources.iter().cloned()).collect();
            if owned.is_empty() {
                return Err(fail("NOTHING_TO_TRANSFER", format!("{} owns no source of {id}", spec.actor)));
            }
            outsource_sources(state, spec, &spec.actor, &owned, true, effect)
        }
        Subject::Theme(theme) => outsource_theme(state, spec, theme, effect),
        _ => Err(subject_mismatch(spec)),
    }
}

fn outsource_theme(state: &WorldState, spec: &TransformationSpec, theme: &ThemeId, effect: &mut Effect) -> Result<()> {
    let t = state.themes.get(theme).ok_or_else(|| Error::unknown(ThemeId::FAMILY, theme.as_str()))?;
    if t.maintainer != spec.actor {
        return Err(fail("NOT_MAINTAINER", format!("{} does not maintain {theme}", spec.actor)));
    }
    if payload(spec)?.theme != *theme {
        return Err(fail("SERVICE_THEME", format!("the service must be for the outsourced theme {theme}")));
    }
    for sm in state.sourcements.values() {
        if sm.principal == spec.actor && sm.themes.contains(theme) && sm.themes.len() > 1 {
            return Err(fail(
                "NEEDS_DECOMPOSITION",
                format!("sourcement {} realizes {theme} together with other themes", sm.id),
            ));
        }
    }
    let receiver = spec.counterparties[0].clone();
    effect.move_theme = Some(ThemeMove { theme: theme.clone(), from: spec.actor.clone(), to: receiver });
    let sources: BTreeSet<SourceId> = state
        .use_relations
        .iter()
        .filter(|r| r.user == spec.actor && &r.theme == theme)
        .filter(|r| state.owner_of(&r.source) == Some(&spec.actor))
        .map(|r| r.source.clone())
        .collect();
    outsource_sources(state, spec, &spec.actor, &sources, false, effect)
}

fn outsource_of_type(state: &WorldState, spec: &TransformationSpec, effect: &mut Effect) -> Result<()> {
    let Subject::Type(tau) = &spec.subject else { return Err(subject_mismatch(spec)) };
    if !state.source_types.contains_key(tau) {
        return Err(Error::unknown(SourceTypeId::FAMILY, tau.as_str()));
    }
    let status = type_status_unchecked(state, &spec.actor, tau);
    if status.status == crate::relations::SourcingStatus::NotUsing {
        return Err(fail("NOT_USING_TYPE", format!("{} uses no source of type {tau}", spec.actor)));
    }
    let sources: BTreeSet<SourceId> = state
        .sources
        .values()
        .filter(|s| &s.source_type == tau && s.owner == spec.actor && uses_unchecked(state, &spec.actor, &s.id))
        .map(|s| s.id.clone())
        .collect();
    if sources.is_empty() {
        return Err(fail("NOTHING_TO_TRANSFER", format!("{} is already non-selfsourcing for {tau}", spec.actor)));
    }
    outsource_sources(state, spec, &spec.actor, &sources, true, effect)
}

fn insource(state: &WorldState, spec: &TransformationSpec, effect: &mut Effect) -> Result<()> {
    if spec.counterparties.len() != 1 {
        return Err(fail(
            "MULTIPARTY_INSOURCING",
            "an insourcing is the dual of exactly one outsourcing; list one outsourcing unit",
        ));
    }
    let sources = subject_sources(spec)?;
    let outsourcer = spec.counterparties[0].clone();
    // Dual view: the counterparty outsources to the actor.
    let dual =
        TransformationSpec { counterparties: vec![spec.actor.clone()], assignments: BTreeMap::new(), ..spec.clone() };
    outsource_sources(state, &dual, &outsourcer, sources, true, effect)
}

fn backsource(state: &WorldState, spec: &TransformationSpec, log: &HistoryLog, effect: &mut Effect) -> Result<()> {
    let sources = subject_sources(spec)?;
    let mut originating = Vec::new();
    for s in sources {
        let src = source(state, s)?;
        if src.owner == spec.actor {
            return Err(fail("ALREADY_OWNED", format!("{} already owns {s}", spec.actor)));
        }
        if !spec.counterparties.contains(&src.owner) {
            return Err(fail(
                "OWNER_NOT_COUNTERPARTY",
                format!("{s} is owned by {}, which is not a counterparty", src.owner),
            ));
        }
        let Some(event) = log.last_involving(s) else {
            return Err(fail("NOT_OUTSOURCED", format!("no recorded outsourcing of {s}")));
        };
        let Some(t) = event.transformation() else {
            return Err(fail("NOT_OUTSOURCED_BY_ACTOR", format!("{s} last changed hands through a primitive step")));
        };
        let by_actor = match t.kind {
            Kind::Insource => t.counterparties.first() == Some(&spec.actor),
            Kind::Outsource | Kind::FollowUpOutsource | Kind::ProgressiveOutsource | Kind::OutsourceOfType => {
                t.actor == spec.actor
            }
            _ => false,
        };
        if t.kind == Kind::OutsourceOfType && by_actor {
            return Err(Error::UndefinedOperation(format!(
                "{s} was last moved by an outsourcing of type; backsourcing is undefined after it"
            )));
        }
        if !by_actor {
            return Err(fail("NOT_OUTSOURCED_BY_ACTOR", format!("{s} was last moved by {} of {}", t.kind, t.actor)));
        }
        originating.push((event, src.owner.clone()));
    }
    for (event, provider) in &originating {
        for id in &event.effects.contracts_created {
            if let Some(c) = state.contracts.get(id) {
                if c.consumer == spec.actor && &c.provider == provider {
                    effect.terminate_contracts.insert(id.clone());
                }
            }
        }
    }
    if effect.terminate_contracts.is_empty() {
        return Err(fail("NO_ACTIVE_CONTRACT", "no running service contract to end"));
    }
    let moves: BTreeMap<SourceId, UnitId> = sources.iter().map(|s| (s.clone(), spec.actor.clone())).collect();
    effect.transfers = group_transfers(state, &moves)?;
    discharge_for_receivers(state, &moves, effect);
    for id in effect.terminate_contracts.clone() {
        let c = &state.contracts[&id];
        drop_service_uses(state, &spec.actor, &c.provider, &c.theme, sources, effect);
    }
    Ok(())
}

/// The consumer stops using the provider's sources for a theme, except
/// `keep`.
fn drop_service_uses(
    state: &WorldState,
    consumer: &UnitId,
    provider: &UnitId,
    theme: &ThemeId,
    keep: &BTreeSet<SourceId>,
    effect: &mut Effect,
) {
    for r in &state.use_relations {
        if &r.user == consumer
            && &r.theme == theme
            && state.owner_of(&r.source) == Some(provider)
            && !keep.contains(&r.source)
        {
            effect.remove_uses.insert(r.clone());
        }
    }
}

fn repoint(
    state: &WorldState,
    consumer: &UnitId,
    moved: &BTreeSet<SourceId>,
    receiver: impl Fn(&SourceId) -> UnitId,
    contracts: &[ServiceContract],
    effect: &mut Effect,
) {
    for c in state.commitments.values() {
        if &c.committed_unit == consumer && moved.contains(&c.source) {
            let to = receiver(&c.source);
            if let Some(contract) = contracts.iter().find(|k| k.provider == to) {
                effect.repoint_commitments.insert(c.id.clone(), CommitmentOrigin::Contract(contract.id.clone()));
            }
        }
    }
}

fn follow_up(state: &WorldState, spec: &TransformationSpec, effect: &mut Effect) -> Result<()> {
    let old = subject_contract(state, spec)?;
    if old.consumer != spec.actor {
        return Err(fail("NOT_CONSUMER", format!("{} is not the consumer of {}", spec.actor, old.id)));
    }
    if old.unit_commitment && spec.counterparties != [old.provider.clone()] {
        return Err(fail("UNIT_COMMITMENT", format!("{} is committed to renew with {}", spec.actor, old.provider)));
    }
    let previous = old.provider.clone();
    let committed: BTreeSet<SourceId> = state
        .explicit_commitments_of(&spec.actor)
        .filter(|c| state.owner_of(&c.source) == Some(&previous))
        .map(|c| c.source.clone())
        .collect();
    let moves: BTreeMap<SourceId, UnitId> =
        committed.iter().map(|s| (s.clone(), receiver_of(spec, s).clone())).collect();
    effect.transfers = group_transfers(state, &moves)?;
    discharge_for_receivers(state, &moves, effect);
    effect.terminate_contracts.insert(old.id.clone());
    effect.create_contracts = make_contracts(state, spec, &spec.actor, &spec.counterparties)?;
    if !spec.counterparties.contains(&previous) {
        drop_service_uses(state, &spec.actor, &previous, &old.theme, &committed, effect);
    }
    let contracts = effect.create_contracts.clone();
    repoint(state, &spec.actor, &committed, |s| receiver_of(spec, s).clone(), &contracts, effect);
    plan_commitments(
        state,
        spec,
        &spec.actor,
        |s| moves.get(s).cloned().or_else(|| state.owner_of(s).cloned()),
        &contracts,
        effect,
    )
}

fn clients_of(state: &WorldState, provider: &UnitId) -> BTreeSet<UnitId> {
    state.contracts.values().filter(|c| &c.provider == provider).map(|c| c.consumer.clone()).collect()
}

fn progressive(state: &WorldState, spec: &TransformationSpec, effect: &mut Effect) -> Result<()> {
    let old = subject_contract(state, spec)?;
    if old.consumer != spec.actor {
        return Err(fail("NOT_CONSUMER", format!("{} is not the consumer of {}", spec.actor, old.id)));
    }
    let previous = old.provider.clone();
    let [next] = spec.counterparties.as_slice() else {
        return Err(fail("PROGRESSIVE_TARGET", "progressive outsourcing moves the service to exactly one unit"));
    };
    if next == &previous {
        return Err(fail("PROGRESSIVE_TARGET", format!("{next} already provides the service")));
    }
    if spec.mission_tied != Some(true) {
        return Err(fail(
            "MISSION_TIE_NOT_ATTESTED",
            format!("no attestation that the service is more strongly tied to the mission of {next}"),
        ));
    }
    let (larger, smaller) = (clients_of(state, next).len(), clients_of(state, &previous).len());
    if larger <= smaller {
        return Err(fail(
            "NOT_LARGER_PROVIDER",
            format!("{next} serves {larger} clients, {previous} serves {smaller}"),
        ));
    }
    let postsourcement: BTreeSet<SourceId> = state
        .use_relations
        .iter()
        .filter(|r| r.user == spec.actor && r.theme == old.theme && state.owner_of(&r.source) == Some(&previous))
        .map(|r| r.source.clone())
        .collect();
    if postsourcement.is_empty() {
        return Err(fail("EMPTY_POSTSOURCEMENT", format!("{previous} supplies no source for {}", old.theme)));
    }
    let types: BTreeSet<&SourceTypeId> = postsourcement.iter().map(|s| &state.sources[s].source_type).collect();
    for other in state.contracts.values().filter(|c| c.provider == previous && c.id != old.id) {
        let still_serving = state.use_relations.iter().any(|r| {
            r.user == other.consumer
                && state.sources.get(&r.source).is_some_and(|s| s.owner == previous && types.contains(&s.source_type))
        });
        if still_serving {
            return Err(fail(
                "PROVIDER_STILL_SERVING",
                format!("{previous} still serves {} with sources of the same type", other.consumer),
            ));
        }
    }
    // Externalization by type: every source of those types leaves the
    // previous provider.
    let moved: BTreeSet<SourceId> = state
        .sources
        .values()
        .filter(|s| s.owner == previous && types.contains(&s.source_type))
        .map(|s| s.id.clone())
        .collect();
    let moves: BTreeMap<SourceId, UnitId> = moved.iter().map(|s| (s.clone(), next.clone())).collect();
    effect.transfers = group_transfers(state, &moves)?;
    discharge_for_receivers(state, &moves, effect);
    effect.terminate_contracts.insert(old.id.clone());
    effect.create_contracts = make_contracts(state, spec, &spec.actor, &spec.counterparties)?;
    let contracts = effect.create_contracts.clone();
    repoint(state, &spec.actor, &moved, |_| next.clone(), &contracts, effect);
    plan_commitments(
        state,
        spec,
        &spec.actor,
        |s| moves.get(s).cloned().or_else(|| state.owner_of(s).cloned()),
        &contracts,
        effect,
    )
}

fn externalize(
    state: &WorldState,
    spec: &TransformationSpec,
    giver: &UnitId,
    sources: &BTreeSet<SourceId>,
    effect: &mut Effect,
) -> Result<()> {
    if spec.service.is_some() {
        return Err(fail("SERVICE_NOT_ALLOWED", "a pure ownership transfer carries no service"));
    }
    for s in sources {
        let src = source(state, s)?;
        if &src.owner != giver {
            return Err(fail("NOT_OWNED", format!("{s} is owned by {}, not {giver}", src.owner)));
        }
    }
    let moves: BTreeMap<SourceId, UnitId> = sources.iter().map(|s| (s.clone(), receiver_of(spec, s).clone())).collect();
    effect.transfers = group_transfers(state, &moves)?;
    discharge_for_receivers(state, &moves, effect);
    for r in &state.use_relations {
        if &r.user == giver && sources.contains(&r.source) {
            effect.remove_uses.insert(r.clone());
        }
    }
    Ok(())
}

fn internalize(state: &WorldState, spec: &TransformationSpec, effect: &mut Effect) -> Result<()> {
    let sources = subject_sources(spec)?;
    let [giver] = spec.counterparties.as_slice() else {
        return Err(fail("MULTIPARTY_INTERNALIZATION", "internalize from exactly one unit"));
    };
    let dual =
        TransformationSpec { counterparties: vec![spec.actor.clone()], assignments: BTreeMap::new(), ..spec.clone() };
    externalize(state, &dual, giver, sources, effect)
}

fn decompose(state: &WorldState, spec: &TransformationSpec, effect: &mut Effect) -> Result<()> {
    let Subject::Sourcement(id) = &spec.subject else { return Err(subject_mismatch(spec)) };
    let sm = state.sourcements.get(id).ok_or_else(|| Error::unknown(SourcementId::FAMILY, id.as_str()))?;
    if sm.principal != spec.actor {
        return Err(fail("NOT_PRINCIPAL", format!("{} is not the principal of {id}", spec.actor)));
    }
    let parts: Vec<BTreeSet<SourceId>> = if spec.split.is_empty() {
        let multi: Vec<_> = sm.basics.iter().filter(|b| b.sources.len() > 1).collect();
        let [only] = multi.as_slice() else {
            return Err(fail("INVALID_SPLIT", format!("name the parts: {id} has {} divisible groups", multi.len())));
        };
        only.sources.iter().map(|s| BTreeSet::from([s.clone()])).collect()
    } else {
        spec.split.clone()
    };
    if parts.len() < 2 || parts.iter().any(|p| p.is_empty()) {
        return Err(fail("INVALID_SPLIT", "a split needs at least two non-empty parts"));
    }
    let union: BTreeSet<SourceId> = parts.iter().flatten().cloned().collect();
    if union.len() != parts.iter().map(|p| p.len()).sum::<usize>() {
        return Err(fail("INVALID_SPLIT", "split parts overlap"));
    }
    let Some(group) = sm.basics.iter().find(|b| b.sources == union) else {
        return Err(fail("INVALID_SPLIT", format!("the parts do not cover exactly one basic sourcement of {id}")));
    };
    effect.split = Some(Split { sourcement: id.clone(), group: group.sources.clone(), parts });
    Ok(())
}

fn develop(state: &WorldState, spec: &TransformationSpec, effect: &mut Effect) -> Result<()> {
    let sources = subject_sources(spec)?;
    let [id] = Vec::from_iter(sources).as_slice().to_owned()[..] else {
        return Err(fail("EMPTY_SUBJECT", "develop exactly one source"));
    };
    let Some(payload) = &spec.develop else {
        return Err(fail("MISSING_PAYLOAD", "develop_source requires a source description"));
    };
    if state.sources.contains_key(id) {
        return Err(fail("SOURCE_EXISTS", format!("{id} already exists")));
    }
    if !state.source_types.contains_key(&payload.source_type) {
        return Err(Error::unknown(SourceTypeId::FAMILY, payload.source_type.as_str()));
    }
    for dep in &payload.depends_on {
        source(state, dep)?;
    }
    if let Some(theme) = &payload.use_for {
        let t = state.themes.get(theme).ok_or_else(|| Error::unknown(ThemeId::FAMILY, theme.as_str()))?;
        if t.maintainer != spec.actor {
            return Err(fail("NOT_MAINTAINER", format!("{} does not maintain {theme}", spec.actor)));
        }
        effect.add_uses.insert(UseRelation::new(spec.actor.clone(), id.clone(), theme.clone()));
    }
    effect.create_source = Some(Source {
        id: id.clone(),
        source_type: payload.source_type.clone(),
        owner: spec.actor.clone(),
        descriptor: payload.descriptor.clone(),
        depends_on: payload.depends_on.clone(),
    });
    Ok(())
}

fn drop_source(state: &WorldState, spec: &TransformationSpec, effect: &mut Effect) -> Result<()> {
    let sources = subject_sources(spec)?;
    for s in sources {
        let src = source(state, s)?;
        if src.owner != spec.actor {
            return Err(fail("NOT_OWNED", format!("{s} is owned by {}, not {}", src.owner, spec.actor)));
        }
        for sm in state.sourcements.values() {
            if sm.attributes.source_refs().any(|(_, refs)| refs.contains(s)) {
                return Err(fail("SOURCE_REFERENCED", format!("attributes of {} name {s}", sm.id)));
            }
        }
        if let Some(c) = state.contracts.values().find(|c| c.management_source.as_ref() == Some(s)) {
            return Err(fail("SOURCE_REFERENCED", format!("{s} manages contract {}", c.id)));
        }
    }
    for r in &state.use_relations {
        if sources.contains(&r.source) {
            effect.remove_uses.insert(r.clone());
        }
    }
    for c in state.commitments.values() {
        if sources.contains(&c.source) {
            effect.discharge_commitments.insert(c.id.clone());
        }
    }
    effect.remove_sources = sources.clone();
    Ok(())
}
