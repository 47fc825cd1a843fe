use std::collections::{BTreeMap, BTreeSet};

use super::diagnostic::{codes, Diagnostic};
use super::ids::*;
use super::world::{CommitmentOrigin, WorldState};

/// Check every fact-layer invariant. Returns an empty list iff the state is
/// well formed. Warnings and informational findings are reported separately
/// by [`advisories`].
pub fn validate_state(state: &WorldState) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    check_keys(state, &mut out);
    check_units(state, &mut out);
    check_sources(state, &mut out);
    check_themes(state, &mut out);
    check_uses(state, &mut out);
    check_contracts(state, &mut out);
    check_commitments(state, &mut out);
    check_singletons(state, &mut out);
    check_sourcements(state, &mut out);
    out
}

/// Non-fatal findings: missing primary sourcement attributes and source
/// dependency cycles.
pub fn advisories(state: &WorldState) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for s in state.sourcements.values() {
        if s.attributes.thematic_operations.is_none() {
            out.push(Diagnostic::warning(
                codes::MISSING_ATTRIBUTE,
                vec![s.id.to_string()],
                format!("sourcement {} does not model its thematic operations", s.id),
            ));
        }
        if s.basics.is_empty() {
            out.push(Diagnostic::warning(
                codes::MISSING_ATTRIBUTE,
                vec![s.id.to_string()],
                format!("sourcement {} lists no basic sourcements", s.id),
            ));
        }
    }
    for cycle in dependency_cycles(state) {
        out.push(Diagnostic::info(
            codes::DEPENDENCY_CYCLE,
            cycle.iter().map(|s| s.to_string()).collect(),
            "mutually dependent sources",
        ));
    }
    out
}

fn err(out: &mut Vec<Diagnostic>, code: &str, entities: &[&str], message: String) {
    out.push(Diagnostic::error(code, entities.iter().map(|e| (*e).to_owned()).collect(), message));
}

fn check_keys(state: &WorldState, out: &mut Vec<Diagnostic>) {
    macro_rules! keys {
        ($map:expr, $family:literal) => {
            for (key, value) in &$map {
                if key.as_str().is_empty() {
                    err(out, codes::EMPTY_ID, &[], format!("empty {} id", $family));
                }
                if key != &value.id {
                    err(
                        out,
                        codes::KEY_MISMATCH,
                        &[key.as_str(), value.id.as_str()],
                        format!("{} stored under key {key} has id {}", $family, value.id),
                    );
                }
            }
        };
    }
    keys!(state.units, "unit");
    keys!(state.source_types, "source type");
    keys!(state.sources, "source");
    keys!(state.themes, "theme");
    keys!(state.contracts, "contract");
    keys!(state.commitments, "commitment");
    keys!(state.sourcements, "sourcement");
}

fn check_units(state: &WorldState, out: &mut Vec<Diagnostic>) {
    for unit in state.units.values() {
        let Some(parent) = &unit.parent else { continue };
        if !state.units.contains_key(parent) {
            err(
                out,
                codes::UNRESOLVED_PARENT,
                &[unit.id.as_str(), parent.as_str()],
                format!("unit {} names undeclared parent {parent}", unit.id),
            );
            continue;
        }
        // Walk up; a walk longer than the unit count has revisited a unit.
        let mut cursor = Some(parent);
        let mut steps = 0;
        while let Some(current) = cursor {
            if current == &unit.id {
                err(out, codes::PARENT_CYCLE, &[unit.id.as_str()], format!("unit {} is its own ancestor", unit.id));
                break;
            }
            steps += 1;
            if steps > state.units.len() {
                break;
            }
            cursor = state.units.get(current).and_then(|u| u.parent.as_ref());
        }
    }
}

fn check_sources(state: &WorldState, out: &mut Vec<Diagnostic>) {
    for source in state.sources.values() {
        let id = source.id.as_str();
        if !state.units.contains_key(&source.owner) {
            err(
                out,
                codes::UNRESOLVED_OWNER,
                &[id, source.owner.as_str()],
                format!("source {id} is owned by undeclared unit {}", source.owner),
            );
        }
        if !state.source_types.contains_key(&source.source_type) {
            err(
                out,
                codes::UNRESOLVED_SOURCE_TYPE,
                &[id, source.source_type.as_str()],
                format!("source {id} has undeclared type {}", source.source_type),
            );
        }
        for dep in &source.depends_on {
            if !state.sources.contains_key(dep) {
                err(
                    out,
                    codes::UNRESOLVED_DEPENDENCY,
                    &[id, dep.as_str()],
                    format!("source {id} depends on undeclared source {dep}"),
                );
            }
        }
    }
}

fn check_themes(state: &WorldState, out: &mut Vec<Diagnostic>) {
    let mut cluster_maintainers: BTreeMap<&str, &UnitId> = BTreeMap::new();
    for theme in state.themes.values() {
        if !state.units.contains_key(&theme.maintainer) {
            err(
                out,
                codes::UNRESOLVED_MAINTAINER,
                &[theme.id.as_str(), theme.maintainer.as_str()],
                format!("theme {} is maintained by undeclared unit {}", theme.id, theme.maintainer),
            );
        }
        if let Some(cluster) = &theme.cluster {
            match cluster_maintainers.get(cluster.as_str()) {
                Some(m) if *m != &theme.maintainer => err(
                    out,
                    codes::CLUSTER_MAINTAINER_MISMATCH,
                    &[theme.id.as_str(), cluster.as_str()],
                    format!("theme {} joins cluster {cluster} maintained by {m}", theme.id),
                ),
                Some(_) => {}
                None => {
                    cluster_maintainers.insert(cluster, &theme.maintainer);
                }
            }
        }
    }
}

fn check_uses(state: &WorldState, out: &mut Vec<Diagnostic>) {
    for rel in &state.use_relations {
        let ids = [rel.user.as_str(), rel.source.as_str(), rel.theme.as_str()];
        if !state.units.contains_key(&rel.user) || !state.sources.contains_key(&rel.source) {
            err(out, codes::UNRESOLVED_USE, &ids, format!("use {} {} for {} does not resolve", ids[0], ids[1], ids[2]));
            continue;
        }
        match state.themes.get(&rel.theme) {
            None => err(out, codes::UNRESOLVED_USE, &ids, format!("use relation names undeclared theme {}", rel.theme)),
            Some(theme) if theme.maintainer != rel.user => err(
                out,
                codes::USE_THEME_NOT_MAINTAINED,
                &ids,
                format!("{} uses {} for theme {} maintained by {}", rel.user, rel.source, rel.theme, theme.maintainer),
            ),
            Some(_) => {}
        }
    }
}

fn check_contracts(state: &WorldState, out: &mut Vec<Diagnostic>) {
    for c in state.contracts.values() {
        let id = c.id.as_str();
        for party in [&c.provider, &c.consumer] {
            if !state.units.contains_key(party) {
                err(
                    out,
                    codes::UNRESOLVED_CONTRACT_PARTY,
                    &[id, party.as_str()],
                    format!("contract {id} names undeclared unit {party}"),
                );
            }
        }
        if !state.themes.contains_key(&c.theme) {
            err(
                out,
                codes::UNRESOLVED_CONTRACT_PARTY,
                &[id, c.theme.as_str()],
                format!("contract {id} names undeclared theme {}", c.theme),
            );
        }
        if let Some(m) = &c.management_source {
            if !state.sources.contains_key(m) {
                err(
                    out,
                    codes::UNRESOLVED_CONTRACT_PARTY,
                    &[id, m.as_str()],
                    format!("contract {id} names undeclared management source {m}"),
                );
            }
        }
        if c.provider == c.consumer {
            err(
                out,
                codes::CONTRACT_SELF_SERVICE,
                &[id],
                format!("contract {id} has {} as both provider and consumer", c.provider),
            );
        }
        if c.period.start >= c.period.end {
            err(
                out,
                codes::CONTRACT_PERIOD,
                &[id],
                format!("contract {id} period ({}, {}) is empty", c.period.start, c.period.end),
            );
        } else if c.notice_interval < 0 || c.notice_interval >= c.period.end - c.period.start {
            err(
                out,
                codes::CONTRACT_NOTICE,
                &[id],
                format!("contract {id} notice {} does not fit inside its period", c.notice_interval),
            );
        }
    }
}

fn check_commitments(state: &WorldState, out: &mut Vec<Diagnostic>) {
    for c in state.commitments.values() {
        let id = c.id.as_str();
        if !state.units.contains_key(&c.committed_unit) {
            err(
                out,
                codes::UNRESOLVED_COMMITMENT,
                &[id, c.committed_unit.as_str()],
                format!("commitment {id} names undeclared unit {}", c.committed_unit),
            );
        }
        match state.sources.get(&c.source) {
            None => err(
                out,
                codes::UNRESOLVED_COMMITMENT,
                &[id, c.source.as_str()],
                format!("commitment {id} names undeclared source {}", c.source),
            ),
            Some(s) if s.owner == c.committed_unit => err(
                out,
                codes::COMMITMENT_TO_OWNED_SOURCE,
                &[id, c.source.as_str()],
                format!("commitment {id}: {} already owns {}", c.committed_unit, c.source),
            ),
            Some(_) => {}
        }
        if let CommitmentOrigin::Contract(contract) = &c.origin {
            if contract.as_str().is_empty() {
                err(out, codes::EMPTY_ID, &[id], format!("commitment {id} has an empty origin"));
            }
        }
    }
}

fn check_singletons(state: &WorldState, out: &mut Vec<Diagnostic>) {
    let mut counts: BTreeMap<(&UnitId, &SourceTypeId), Vec<&str>> = BTreeMap::new();
    for s in state.sources.values() {
        if state.source_types.get(&s.source_type).is_some_and(|t| t.singleton) {
            counts.entry((&s.owner, &s.source_type)).or_default().push(s.id.as_str());
        }
    }
    for ((unit, ty), sources) in counts {
        if sources.len() > 1 {
            let mut entities = vec![unit.as_str(), ty.as_str()];
            entities.extend(&sources);
            err(
                out,
                codes::SINGLETON_VIOLATION,
                &entities,
                format!("{unit} owns {} sources of singleton type {ty}", sources.len()),
            );
        }
    }
}

fn check_sourcements(state: &WorldState, out: &mut Vec<Diagnostic>) {
    for s in state.sourcements.values() {
        let id = s.id.as_str();
        if !state.units.contains_key(&s.principal) {
            err(
                out,
                codes::UNRESOLVED_REF,
                &[id, s.principal.as_str()],
                format!("sourcement {id} names undeclared principal {}", s.principal),
            );
        }
        if s.themes.is_empty() {
            err(out, codes::SOURCEMENT_THEME, &[id], format!("sourcement {id} has no theme"));
        }
        for t in &s.themes {
            match state.themes.get(t) {
                Some(theme) if theme.maintainer == s.principal => {}
                Some(theme) => err(
                    out,
                    codes::SOURCEMENT_THEME,
                    &[id, t.as_str()],
                    format!("theme {t} of sourcement {id} is maintained by {} not {}", theme.maintainer, s.principal),
                ),
                None => err(
                    out,
                    codes::SOURCEMENT_THEME,
                    &[id, t.as_str()],
                    format!("sourcement {id} names undeclared theme {t}"),
                ),
            }
        }
        let mut seen: BTreeSet<&SourceId> = BTreeSet::new();
        for basic in &s.basics {
            if basic.sources.is_empty() {
                err(out, codes::SOURCEMENT_BASIC, &[id], format!("sourcement {id} has an empty basic sourcement"));
            }
            for src in &basic.sources {
                if !seen.insert(src) {
                    err(
                        out,
                        codes::SOURCEMENT_BASIC,
                        &[id, src.as_str()],
                        format!("source {src} appears in two basic sourcements of {id}"),
                    );
                }
                match state.sources.get(src) {
                    None => err(
                        out,
                        codes::SOURCEMENT_BASIC,
                        &[id, src.as_str()],
                        format!("sourcement {id} names undeclared source {src}"),
                    ),
                    Some(found) if found.owner != basic.owner => err(
                        out,
                        codes::SOURCEMENT_BASIC,
                        &[id, src.as_str()],
                        format!(
                            "source {src} is owned by {} but its basic sourcement in {id} by {}",
                            found.owner, basic.owner
                        ),
                    ),
                    Some(_) => {}
                }
            }
        }
        let expected: BTreeSet<&UnitId> = s.basics.iter().map(|b| &b.owner).filter(|o| *o != &s.principal).collect();
        if expected != s.providers.iter().collect() {
            err(
                out,
                codes::SOURCEMENT_PROVIDERS,
                &[id],
                format!("providers of sourcement {id} do not match its basic sourcement owners"),
            );
        }
        for (name, refs) in s.attributes.source_refs() {
            for r in refs {
                if !state.sources.contains_key(r) {
                    err(
                        out,
                        codes::UNRESOLVED_ATTRIBUTE_REF,
                        &[id, r.as_str()],
                        format!("attribute {name} of sourcement {id} names undeclared source {r}"),
                    );
                }
            }
        }
    }
}

/// Strongly connected groups of size > 1 (or self-loops) in the directed
/// depends_on graph.
fn dependency_cycles(state: &WorldState) -> Vec<Vec<SourceId>> {
    let ids: Vec<&SourceId> = state.sources.keys().collect();
    let reach = |from: &SourceId| -> BTreeSet<SourceId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<SourceId> =
            state.sources.get(from).map(|s| s.depends_on.iter().cloned().collect()).unwrap_or_default();
        while let Some(next) = stack.pop() {
            if seen.insert(next.clone()) {
                if let Some(s) = state.sources.get(&next) {
                    stack.extend(s.depends_on.iter().cloned());
                }
            }
        }
        seen
    };
    let reachable: BTreeMap<&SourceId, BTreeSet<SourceId>> = ids.iter().map(|id| (*id, reach(id))).collect();
    let mut assigned: BTreeSet<&SourceId> = BTreeSet::new();
    let mut cycles = Vec::new();
    for id in &ids {
        if assigned.contains(id) || !reachable[id].contains(*id) {
            continue;
        }
        let group: Vec<SourceId> = ids
            .iter()
            .filter(|other| reachable[id].contains(**other) && reachable[**other].contains(*id))
            .map(|s| (*s).clone())
            .collect();
        for member in &group {
            assigned.insert(state.sources.get_key_value(member).unwrap().0);
        }
        cycles.push(group);
    }
    cycles
}
