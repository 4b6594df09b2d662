//! Protocol checks over an event log.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::engine::{EngineConfig, Event, EventKind};
use crate::graph::ItemStore;
use crate::model::{AgentId, FileId, ItemId};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub pushes: usize,
    pub rounds: usize,
    /// Pushes of a file to an agent that already had it.
    pub duplicate_pushes: usize,
    /// Item pushes in round k+1 without a passing vote on round k.
    pub gate_violations: usize,
    /// Rounds pushing zero agents or more than `ceil(rho * pool)`.
    pub round_bound_violations: usize,
    /// Item pushes to agents outside the item's membership.
    pub outsider_pushes: usize,
    /// Items whose founding file is absent from their file set.
    pub missing_founding: usize,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.duplicate_pushes == 0
            && self.gate_violations == 0
            && self.round_bound_violations == 0
            && self.outsider_pushes == 0
            && self.missing_founding == 0
    }
}

/// Replays `events` and counts protocol violations. When `items` is given,
/// the final item store is also checked for founding-file presence.
pub fn audit(events: &[Event], items: Option<&ItemStore>, cfg: &EngineConfig) -> AuditReport {
    let mut report = AuditReport::default();
    let mut seen: HashSet<(AgentId, FileId)> = HashSet::new();
    let mut members: BTreeMap<ItemId, BTreeSet<AgentId>> = BTreeMap::new();
    let mut founding: BTreeMap<ItemId, FileId> = BTreeMap::new();
    let mut file_sets: BTreeMap<ItemId, BTreeSet<FileId>> = BTreeMap::new();
    // pushes of the current file, and per-item vote outcomes for it
    let mut current: Option<FileId> = None;
    let mut pushed: BTreeSet<AgentId> = BTreeSet::new();
    let mut votes: BTreeMap<(ItemId, u32), bool> = BTreeMap::new();
    // (item, round) -> (pool at round start, pushes so far)
    let mut open_rounds: BTreeMap<(ItemId, u32), (usize, usize)> = BTreeMap::new();

    let close_rounds = |open: &mut BTreeMap<(ItemId, u32), (usize, usize)>, report: &mut AuditReport| {
        for (_, (pool, n)) in std::mem::take(open) {
            if n == 0 || n > cfg.round_size(pool) {
                report.round_bound_violations += 1;
            }
        }
    };

    for e in events {
        if current != Some(e.file) && e.kind == EventKind::Post {
            close_rounds(&mut open_rounds, &mut report);
            current = Some(e.file);
            pushed.clear();
            votes.clear();
        }
        match e.kind {
            EventKind::Post => {}
            EventKind::Push => {
                report.pushes += 1;
                let Some(agent) = e.agent else { continue };
                if !seen.insert((agent, e.file)) {
                    report.duplicate_pushes += 1;
                }
                if let (Some(item), Some(round)) = (e.item, e.round) {
                    if round > 1 && votes.get(&(item, round - 1)) != Some(&true) {
                        report.gate_violations += 1;
                    }
                    if votes.iter().any(|((i, _), passed)| *i == item && !passed) {
                        report.gate_violations += 1;
                    }
                    let m = members.get(&item);
                    if !m.is_some_and(|m| m.contains(&agent)) {
                        report.outsider_pushes += 1;
                    }
                    let entry = open_rounds.entry((item, round)).or_insert_with(|| {
                        let pool = m.map_or(0, |m| m.iter().filter(|a| !pushed.contains(a)).count());
                        (pool, 0)
                    });
                    entry.1 += 1;
                }
                pushed.insert(agent);
            }
            EventKind::Vote => {
                if let (Some(item), Some(round)) = (e.item, e.round) {
                    votes.insert((item, round), e.matched == Some(true));
                    report.rounds += 1;
                    let (pool, n) = open_rounds.remove(&(item, round)).unwrap_or((0, 0));
                    if n == 0 || n > cfg.round_size(pool) {
                        report.round_bound_violations += 1;
                    }
                }
            }
            EventKind::NewItem => {
                if let Some(item) = e.item {
                    founding.insert(item, e.file);
                    file_sets.entry(item).or_default().insert(e.file);
                }
            }
            EventKind::Add => {
                if let Some(item) = e.item {
                    file_sets.entry(item).or_default().insert(e.file);
                }
            }
            EventKind::Join => {
                if let (Some(item), Some(agent)) = (e.item, e.agent) {
                    members.entry(item).or_default().insert(agent);
                }
            }
        }
    }
    close_rounds(&mut open_rounds, &mut report);

    for (item, f) in &founding {
        let in_log = file_sets.get(item).is_some_and(|s| s.contains(f));
        let in_store = items.is_none_or(|st| st.get(item).is_some_and(|v| v.files.contains(f)));
        if !in_log || !in_store {
            report.missing_founding += 1;
        }
    }
    if let Some(st) = items {
        report.missing_founding += st
            .values()
            .filter(|v| !v.files.contains(&v.founding_file))
            .count();
    }
    report
}
