//! The push/vote dissemination engine.
//!
//! Each posted file goes through the same lifecycle:
//!
//! 1. **initial spread**: pushed to `n_init` agents sampled uniformly;
//! 2. **spread by the graph**: every item with at least `k_act` members
//!    that matched the file is activated, and the file is pushed to a
//!    `rho` fraction of the item's remaining members per round. A round
//!    passes when the matched/pushed ratio reaches `t_vote`; a failed round
//!    ends the spread in that item. Rounds of all live items are
//!    interleaved in ascending item order, and activation is re-evaluated
//!    after each global round as more agents match;
//! 3. **add into item**: a file that passed every round of an item and
//!    shares at least `t_add` units with the item's founding file joins it;
//! 4. **new item**: if at least `t_new` agents matched the file, it founds
//!    a new item with those agents as members;
//! 5. **membership growth**: agents that matched `t_join` of an item's
//!    files join it.
//!
//! An agent receives a given file at most once. The engine is the only
//! writer of simulation state and logs every mutation as an [`Event`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EciError, Result};
use crate::graph::{ItemStore, KnsGraph};
use crate::matching::match_file_file;
use crate::model::{
    Agent, AgentId, AgentResponder, FileId, Item, ItemId, KnowledgeFile, PushRecord,
    SyntheticResponder, UnitUniverse,
};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub n_init: usize,
    pub t_new: usize,
    pub t_vote: f64,
    pub rho: f64,
    pub max_rounds: u32,
    pub t_add: usize,
    pub k_act: usize,
    pub t_join: usize,
    pub edge_propagation: bool,
    pub rng_seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            n_init: 20,
            t_new: 3,
            t_vote: 0.5,
            rho: 0.3,
            max_rounds: 5,
            t_add: 1,
            k_act: 1,
            t_join: 1,
            edge_propagation: false,
            rng_seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_init", self.n_init),
            ("t_new", self.t_new),
            ("max_rounds", self.max_rounds as usize),
            ("k_act", self.k_act),
            ("t_join", self.t_join),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(invalid(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..=1.0).contains(&self.t_vote) {
            return Err(invalid(format!("t_vote {} outside [0, 1]", self.t_vote)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(invalid(format!("rho {} outside (0, 1]", self.rho)));
        }
        Ok(())
    }

    /// Number of agents pushed in a round drawn from a pool of `pool` agents.
    pub fn round_size(&self, pool: usize) -> usize {
        if pool == 0 {
            return 0;
        }
        // the epsilon keeps products such as 0.3 * 10 from rounding up to 4
        let k = (self.rho * pool as f64 - 1e-9).ceil() as usize;
        k.clamp(1, pool)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Arrived,
    InitialSpreadDone,
    Spreading,
    Settled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpreadStatus {
    Live,
    /// Every member was reached with all rounds passing.
    Exhausted,
    /// `max_rounds` rounds were run, all passing.
    RoundCap,
    /// A round's voting ratio fell below `t_vote`.
    Failed,
}

/// Progress of one file's spread inside one item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemSpread {
    pub rounds_completed: u32,
    pub status: SpreadStatus,
    /// Members not yet pushed this file, ascending.
    pub pool: Vec<AgentId>,
}

impl ItemSpread {
    pub fn all_passed(&self) -> bool {
        matches!(self.status, SpreadStatus::Exhausted | SpreadStatus::RoundCap)
    }

    pub fn is_live(&self) -> bool {
        self.status == SpreadStatus::Live
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileLifecycle {
    pub file: FileId,
    pub phase: Phase,
    pub spreads: BTreeMap<ItemId, ItemSpread>,
    /// Every agent pushed this file so far, from any path.
    pub pushed: BTreeSet<AgentId>,
    pub matched_agents: BTreeSet<AgentId>,
    pub added_to: Vec<ItemId>,
    pub created_item: Option<ItemId>,
}

impl FileLifecycle {
    fn new(file: FileId) -> Self {
        FileLifecycle {
            file,
            phase: Phase::Arrived,
            spreads: BTreeMap::new(),
            pushed: BTreeSet::new(),
            matched_agents: BTreeSet::new(),
            added_to: Vec::new(),
            created_item: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundOutcome {
    pub passed: bool,
    pub pushed: usize,
    pub matched: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Post,
    Push,
    Vote,
    Add,
    NewItem,
    Join,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Post => "post",
            EventKind::Push => "push",
            EventKind::Vote => "vote",
            EventKind::Add => "add",
            EventKind::NewItem => "new_item",
            EventKind::Join => "join",
        }
    }
}

impl FromStr for EventKind {
    type Err = EciError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "post" => EventKind::Post,
            "push" => EventKind::Push,
            "vote" => EventKind::Vote,
            "add" => EventKind::Add,
            "new_item" => EventKind::NewItem,
            "join" => EventKind::Join,
            other => return Err(invalid(format!("unknown event kind {other:?}"))),
        })
    }
}

/// One logged mutation.
///
/// * `push`: `item` is `None` for initial spread; `matched` is the response.
/// * `vote`: closes `round` of `item`; `matched` holds whether it passed.
/// * `add`, `new_item`: `file` joined / founded `item`.
/// * `join`: `agent` became a member of `item` (founders included).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub file: FileId,
    pub item: Option<ItemId>,
    pub agent: Option<AgentId>,
    pub round: Option<u32>,
    pub matched: Option<bool>,
}

impl Event {
    fn new(kind: EventKind, file: FileId) -> Self {
        Event {
            kind,
            file,
            item: None,
            agent: None,
            round: None,
            matched: None,
        }
    }

    /// Parses one `kind,file,item,agent,round,matched` record.
    pub fn parse_record(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 6 {
            return Err(invalid(format!("expected 6 fields in event record {line:?}")));
        }
        fn opt<T: FromStr>(s: &str) -> Result<Option<T>> {
            if s == "-" {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| invalid(format!("bad event field {s:?}")))
        }
        let file: u64 = fields[1]
            .parse()
            .map_err(|_| invalid(format!("bad file id {:?}", fields[1])))?;
        let matched = match fields[5] {
            "-" => None,
            "1" => Some(true),
            "0" => Some(false),
            other => return Err(invalid(format!("bad matched flag {other:?}"))),
        };
        Ok(Event {
            kind: fields[0].parse()?,
            file: FileId(file),
            item: opt::<u64>(fields[2])?.map(ItemId),
            agent: opt::<u64>(fields[3])?.map(AgentId),
            round: opt(fields[4])?,
            matched,
        })
    }
}

/// `kind,file,item,agent,round,matched`, with `-` for absent fields and
/// `1`/`0` for the flag.
impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn dash<T: fmt::Display>(v: Option<T>) -> String {
            v.map_or_else(|| "-".to_string(), |v| v.to_string())
        }
        write!(
            f,
            "{},{},{},{},{},{}",
            self.kind.as_str(),
            self.file,
            dash(self.item),
            dash(self.agent),
            dash(self.round),
            dash(self.matched.map(u8::from)),
        )
    }
}

/// The complete simulation state: population, posted files, items, graph
/// and event log.
#[derive(Debug, Clone)]
pub struct Simulation<R = SyntheticResponder> {
    universe: UnitUniverse,
    agents: BTreeMap<AgentId, Agent>,
    files: BTreeMap<FileId, KnowledgeFile>,
    items: ItemStore,
    graph: KnsGraph,
    file_items: BTreeMap<FileId, Vec<ItemId>>,
    events: Vec<Event>,
    next_item: u64,
    next_arrival: u64,
    init_rng: ChaCha8Rng,
    round_rng: ChaCha8Rng,
    responder: R,
}

impl Simulation<SyntheticResponder> {
    pub fn new(
        universe: UnitUniverse,
        population: Vec<Agent>,
        t_e: f64,
        cfg: &EngineConfig,
    ) -> Result<Self> {
        Simulation::with_responder(universe, population, t_e, cfg, SyntheticResponder)
    }
}

impl<R: AgentResponder> Simulation<R> {
    pub fn with_responder(
        universe: UnitUniverse,
        population: Vec<Agent>,
        t_e: f64,
        cfg: &EngineConfig,
        responder: R,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut agents = BTreeMap::new();
        for mut a in population {
            if a.interests.dim() != universe.dim() {
                return Err(invalid(format!(
                    "agent {} has dimension {}, universe has {}",
                    a.id,
                    a.interests.dim(),
                    universe.dim()
                )));
            }
            a.pushed_log.clear();
            a.memberships.clear();
            if agents.insert(a.id, a).is_some() {
                return Err(invalid("duplicate agent id in population"));
            }
        }
        Ok(Simulation {
            universe,
            agents,
            files: BTreeMap::new(),
            items: ItemStore::new(),
            graph: KnsGraph::new(t_e)?,
            file_items: BTreeMap::new(),
            events: Vec::new(),
            next_item: 0,
            next_arrival: 0,
            init_rng: rng::substream(cfg.rng_seed, rng::INITIAL_SPREAD),
            round_rng: rng::substream(cfg.rng_seed, rng::ROUNDS),
            responder,
        })
    }

    pub fn universe(&self) -> UnitUniverse {
        self.universe
    }

    pub fn agents(&self) -> &BTreeMap<AgentId, Agent> {
        &self.agents
    }

    pub fn files(&self) -> &BTreeMap<FileId, KnowledgeFile> {
        &self.files
    }

    pub fn items(&self) -> &ItemStore {
        &self.items
    }

    pub fn graph(&self) -> &KnsGraph {
        &self.graph
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Registers a file. Its arrival index is assigned from posting order.
    pub fn post_file(&mut self, mut file: KnowledgeFile) -> Result<FileLifecycle> {
        if file.units.dim() != self.universe.dim() {
            return Err(invalid(format!(
                "file {} has dimension {}, universe has {}",
                file.id,
                file.units.dim(),
                self.universe.dim()
            )));
        }
        if self.files.contains_key(&file.id) {
            return Err(invalid(format!("duplicate file id {}", file.id)));
        }
        file.arrival_index = self.next_arrival;
        self.next_arrival += 1;
        let id = file.id;
        self.files.insert(id, file);
        self.events.push(Event::new(EventKind::Post, id));
        Ok(FileLifecycle::new(id))
    }

    fn push(
        &mut self,
        lc: &mut FileLifecycle,
        agent: AgentId,
        item: Option<ItemId>,
        round: Option<u32>,
    ) -> Result<bool> {
        if !lc.pushed.insert(agent) {
            return Err(EciError::InvalidState(format!(
                "agent {agent} already received file {}",
                lc.file
            )));
        }
        let file = &self.files[&lc.file];
        let a = self
            .agents
            .get_mut(&agent)
            .ok_or_else(|| invalid(format!("unknown agent {agent}")))?;
        let matched = self.responder.respond(a, file);
        a.pushed_log.push(PushRecord {
            file: lc.file,
            matched,
        });
        if matched {
            lc.matched_agents.insert(agent);
        }
        self.events.push(Event {
            item,
            agent: Some(agent),
            round,
            matched: Some(matched),
            ..Event::new(EventKind::Push, lc.file)
        });
        Ok(matched)
    }

    pub fn initial_spread(&mut self, lc: &mut FileLifecycle, cfg: &EngineConfig) -> Result<()> {
        if lc.phase != Phase::Arrived {
            return Err(EciError::InvalidState(format!(
                "initial spread of file {} already done",
                lc.file
            )));
        }
        if self.agents.is_empty() {
            return Err(EciError::EmptyPopulation);
        }
        let eligible: Vec<AgentId> = self
            .agents
            .keys()
            .copied()
            .filter(|a| !lc.pushed.contains(a))
            .collect();
        let amount = cfg.n_init.min(eligible.len());
        let mut chosen: Vec<AgentId> = index::sample(&mut self.init_rng, eligible.len(), amount)
            .into_iter()
            .map(|i| eligible[i])
            .collect();
        chosen.sort_unstable();
        for a in chosen {
            self.push(lc, a, None, None)?;
        }
        lc.phase = Phase::InitialSpreadDone;
        Ok(())
    }

    /// Activates every item not yet visited by this file whose matched
    /// members reach `k_act` (plus, with edge propagation, everything
    /// reachable from such items over stored edges). Returns the newly
    /// activated items.
    pub fn activate_items(
        &mut self,
        lc: &mut FileLifecycle,
        cfg: &EngineConfig,
    ) -> Result<BTreeSet<ItemId>> {
        if lc.phase < Phase::InitialSpreadDone {
            return Err(EciError::InvalidState(format!(
                "file {} has not been initially spread",
                lc.file
            )));
        }
        let mut votes: BTreeMap<ItemId, usize> = BTreeMap::new();
        for a in &lc.matched_agents {
            for item in &self.agents[a].memberships {
                *votes.entry(*item).or_default() += 1;
            }
        }
        let mut active: BTreeSet<ItemId> = votes
            .into_iter()
            .filter(|(_, n)| *n >= cfg.k_act)
            .map(|(id, _)| id)
            .collect();
        if cfg.edge_propagation {
            let mut frontier: Vec<ItemId> = active.iter().copied().collect();
            while let Some(x) = frontier.pop() {
                for (y, _) in self.graph.out_edges(x) {
                    if active.insert(y) {
                        frontier.push(y);
                    }
                }
            }
        }
        active.retain(|id| !lc.spreads.contains_key(id));
        for id in &active {
            let pool: Vec<AgentId> = self.items[id]
                .agents
                .iter()
                .copied()
                .filter(|a| !lc.pushed.contains(a))
                .collect();
            let status = if pool.is_empty() {
                SpreadStatus::Exhausted
            } else {
                SpreadStatus::Live
            };
            lc.spreads.insert(
                *id,
                ItemSpread {
                    rounds_completed: 0,
                    status,
                    pool,
                },
            );
        }
        lc.phase = Phase::Spreading;
        Ok(active)
    }

    /// Drops already-pushed agents from every live pool, closing spreads
    /// whose pool emptied, and returns the items that can still run a round.
    pub fn live_items(&self, lc: &mut FileLifecycle) -> Vec<ItemId> {
        let mut live = Vec::new();
        for (id, spread) in lc.spreads.iter_mut() {
            if !spread.is_live() {
                continue;
            }
            spread.pool.retain(|a| !lc.pushed.contains(a));
            if spread.pool.is_empty() {
                spread.status = SpreadStatus::Exhausted;
            } else {
                live.push(*id);
            }
        }
        live
    }

    pub fn spread_round(
        &mut self,
        lc: &mut FileLifecycle,
        item: ItemId,
        cfg: &EngineConfig,
    ) -> Result<RoundOutcome> {
        let spread = lc.spreads.get_mut(&item).ok_or_else(|| {
            EciError::InvalidState(format!("item {item} not activated for file {}", lc.file))
        })?;
        if !spread.is_live() {
            return Err(EciError::InvalidState(format!(
                "spread of file {} in item {item} has terminated",
                lc.file
            )));
        }
        let pushed_already = &lc.pushed;
        spread.pool.retain(|a| !pushed_already.contains(a));
        if spread.pool.is_empty() {
            spread.status = SpreadStatus::Exhausted;
            return Err(EciError::InvalidState(format!(
                "pool of item {item} is exhausted for file {}",
                lc.file
            )));
        }
        let pool = spread.pool.clone();
        let round = spread.rounds_completed + 1;
        let amount = cfg.round_size(pool.len());
        let mut chosen: Vec<AgentId> = index::sample(&mut self.round_rng, pool.len(), amount)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        chosen.sort_unstable();

        let mut matched = 0;
        for a in &chosen {
            matched += self.push(lc, *a, Some(item), Some(round))? as usize;
        }
        let passed = matched as f64 / chosen.len() as f64 >= cfg.t_vote;
        self.events.push(Event {
            item: Some(item),
            round: Some(round),
            matched: Some(passed),
            ..Event::new(EventKind::Vote, lc.file)
        });

        let spread = lc.spreads.get_mut(&item).expect("spread exists");
        spread.pool.retain(|a| chosen.binary_search(a).is_err());
        spread.rounds_completed = round;
        spread.status = if !passed {
            SpreadStatus::Failed
        } else if spread.pool.is_empty() {
            SpreadStatus::Exhausted
        } else if round >= cfg.max_rounds {
            SpreadStatus::RoundCap
        } else {
            SpreadStatus::Live
        };
        Ok(RoundOutcome {
            passed,
            pushed: chosen.len(),
            matched,
        })
    }

    /// Marks the spreading stage finished; fails if any item spread is live.
    pub fn finish_spreading(&mut self, lc: &mut FileLifecycle) -> Result<()> {
        if lc.phase < Phase::InitialSpreadDone {
            return Err(EciError::InvalidState(format!(
                "file {} has not been initially spread",
                lc.file
            )));
        }
        if let Some((id, _)) = lc.spreads.iter().find(|(_, s)| s.is_live()) {
            return Err(EciError::InvalidState(format!(
                "spread of file {} in item {id} is still live",
                lc.file
            )));
        }
        lc.phase = Phase::Settled;
        Ok(())
    }

    fn index_file(&mut self, file: FileId, item: ItemId) {
        self.file_items.entry(file).or_default().push(item);
    }

    /// Adds the file into `item` when every executed round there passed (at
    /// least one round ran) and the file shares at least `t_add` units with
    /// the item's founding file.
    pub fn try_add_into_item(
        &mut self,
        lc: &mut FileLifecycle,
        item: ItemId,
        cfg: &EngineConfig,
    ) -> Result<bool> {
        let spread = lc.spreads.get(&item).ok_or_else(|| {
            EciError::InvalidState(format!("item {item} not activated for file {}", lc.file))
        })?;
        if spread.is_live() {
            return Err(EciError::InvalidState(format!(
                "spread of file {} in item {item} has not terminated",
                lc.file
            )));
        }
        if !spread.all_passed() || spread.rounds_completed == 0 {
            return Ok(false);
        }
        let founding = &self.files[&self.items[&item].founding_file];
        let degree = match_file_file(&self.files[&lc.file], founding)?.degree;
        if degree < cfg.t_add {
            return Ok(false);
        }
        let entry = self.items.get_mut(&item).expect("item exists");
        if !entry.files.insert(lc.file) {
            return Ok(false);
        }
        self.index_file(lc.file, item);
        lc.added_to.push(item);
        self.events.push(Event {
            item: Some(item),
            ..Event::new(EventKind::Add, lc.file)
        });
        self.graph
            .refresh_edges_indexed(item, &self.items, &self.file_items)?;
        Ok(true)
    }

    fn join(&mut self, file: FileId, item: ItemId, agent: AgentId) -> bool {
        let entry = self.items.get_mut(&item).expect("item exists");
        if !entry.agents.insert(agent) {
            return false;
        }
        self.agents
            .get_mut(&agent)
            .expect("agent exists")
            .memberships
            .insert(item);
        self.events.push(Event {
            item: Some(item),
            agent: Some(agent),
            ..Event::new(EventKind::Join, file)
        });
        true
    }

    /// Founds a new item on the file when at least `t_new` agents matched it.
    pub fn try_new_item(
        &mut self,
        lc: &mut FileLifecycle,
        cfg: &EngineConfig,
    ) -> Result<Option<ItemId>> {
        if lc.phase != Phase::Settled {
            return Err(EciError::InvalidState(format!(
                "file {} has not settled",
                lc.file
            )));
        }
        if lc.created_item.is_some() || lc.matched_agents.len() < cfg.t_new {
            return Ok(None);
        }
        let id = ItemId(self.next_item);
        self.next_item += 1;
        self.items.insert(id, Item::new(id, lc.file, []));
        self.index_file(lc.file, id);
        self.events.push(Event {
            item: Some(id),
            ..Event::new(EventKind::NewItem, lc.file)
        });
        for a in lc.matched_agents.clone() {
            self.join(lc.file, id, a);
        }
        self.graph.add_node(id);
        self.graph
            .refresh_edges_indexed(id, &self.items, &self.file_items)?;
        lc.created_item = Some(id);
        Ok(Some(id))
    }

    /// Adds agents that matched this file to the items it now belongs to,
    /// once they have matched `t_join` of that item's files.
    pub fn update_memberships(&mut self, lc: &FileLifecycle, cfg: &EngineConfig) -> Result<usize> {
        if lc.phase != Phase::Settled {
            return Err(EciError::InvalidState(format!(
                "file {} has not settled",
                lc.file
            )));
        }
        let mut joins = 0;
        let targets = lc.added_to.iter().chain(lc.created_item.iter());
        for item in targets.copied().collect::<Vec<_>>() {
            for a in &lc.matched_agents {
                let v = &self.items[&item];
                if v.agents.contains(a) {
                    continue;
                }
                let hits = self.agents[a]
                    .pushed_log
                    .iter()
                    .filter(|p| p.matched && v.files.contains(&p.file))
                    .count();
                if hits >= cfg.t_join && self.join(lc.file, item, *a) {
                    joins += 1;
                }
            }
        }
        Ok(joins)
    }

    /// Runs the full lifecycle of one file.
    pub fn process_file(&mut self, file: KnowledgeFile, cfg: &EngineConfig) -> Result<FileLifecycle> {
        let mut lc = self.post_file(file)?;
        self.initial_spread(&mut lc, cfg)?;
        loop {
            self.activate_items(&mut lc, cfg)?;
            let live = self.live_items(&mut lc);
            if live.is_empty() {
                break;
            }
            for item in live {
                // an earlier item this round may have drained this pool
                if self.refresh_pool(&mut lc, item) {
                    self.spread_round(&mut lc, item, cfg)?;
                }
            }
        }
        self.finish_spreading(&mut lc)?;
        let finished: Vec<ItemId> = lc.spreads.keys().copied().collect();
        for item in finished {
            self.try_add_into_item(&mut lc, item, cfg)?;
        }
        self.try_new_item(&mut lc, cfg)?;
        self.update_memberships(&lc, cfg)?;
        Ok(lc)
    }

    fn refresh_pool(&self, lc: &mut FileLifecycle, item: ItemId) -> bool {
        let spread = lc.spreads.get_mut(&item).expect("spread exists");
        spread.pool.retain(|a| !lc.pushed.contains(a));
        if spread.pool.is_empty() {
            spread.status = SpreadStatus::Exhausted;
        }
        spread.is_live()
    }

    /// Rebuilds the graph from scratch from the current items.
    pub fn rebuilt_graph(&self) -> Result<KnsGraph> {
        KnsGraph::rebuild(&self.items, self.graph.threshold())
    }
}

/// Runs every file of the stream through the engine, in order.
pub fn run_simulation(
    universe: UnitUniverse,
    population: Vec<Agent>,
    file_stream: Vec<KnowledgeFile>,
    t_e: f64,
    cfg: &EngineConfig,
) -> Result<Simulation> {
    let mut sim = Simulation::new(universe, population, t_e, cfg)?;
    for f in file_stream {
        sim.process_file(f, cfg)?;
    }
    Ok(sim)
}

/// State reconstructed purely from an event log.
#[derive(Debug, Clone, PartialEq)]
pub struct Replayed {
    pub agents: BTreeMap<AgentId, Agent>,
    pub items: ItemStore,
    pub graph: KnsGraph,
}

impl<R> Simulation<R> {
    pub fn snapshot(&self) -> Replayed {
        Replayed {
            agents: self.agents.clone(),
            items: self.items.clone(),
            graph: self.graph.clone(),
        }
    }
}

/// Applies a logged event sequence to a fresh population.
pub fn replay(population: Vec<Agent>, events: &[Event], t_e: f64) -> Result<Replayed> {
    let mut agents: BTreeMap<AgentId, Agent> = population
        .into_iter()
        .map(|mut a| {
            a.pushed_log.clear();
            a.memberships.clear();
            (a.id, a)
        })
        .collect();
    let mut items = ItemStore::new();
    let missing = |what: &str, e: &Event| invalid(format!("{what} missing in event {e}"));
    for e in events {
        match e.kind {
            EventKind::Post | EventKind::Vote => {}
            EventKind::Push => {
                let id = e.agent.ok_or_else(|| missing("agent", e))?;
                let matched = e.matched.ok_or_else(|| missing("matched", e))?;
                agents
                    .get_mut(&id)
                    .ok_or_else(|| invalid(format!("unknown agent {id}")))?
                    .pushed_log
                    .push(PushRecord {
                        file: e.file,
                        matched,
                    });
            }
            EventKind::NewItem => {
                let id = e.item.ok_or_else(|| missing("item", e))?;
                items.insert(id, Item::new(id, e.file, []));
            }
            EventKind::Add => {
                let id = e.item.ok_or_else(|| missing("item", e))?;
                items
                    .get_mut(&id)
                    .ok_or_else(|| invalid(format!("unknown item {id}")))?
                    .files
                    .insert(e.file);
            }
            EventKind::Join => {
                let id = e.item.ok_or_else(|| missing("item", e))?;
                let agent = e.agent.ok_or_else(|| missing("agent", e))?;
                items
                    .get_mut(&id)
                    .ok_or_else(|| invalid(format!("unknown item {id}")))?
                    .agents
                    .insert(agent);
                agents
                    .get_mut(&agent)
                    .ok_or_else(|| invalid(format!("unknown agent {agent}")))?
                    .memberships
                    .insert(id);
            }
        }
    }
    let graph = KnsGraph::rebuild(&items, t_e)?;
    Ok(Replayed {
        agents,
        items,
        graph,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn universe() -> UnitUniverse {
        UnitUniverse::new(6).unwrap()
    }

    fn agents(interests: &[&[usize]]) -> Vec<Agent> {
        interests
            .iter()
            .enumerate()
            .map(|(i, s)| Agent::new(AgentId(i as u64), universe().vector(s.iter().copied()).unwrap()))
            .collect()
    }

    fn file(id: u64, units: &[usize]) -> KnowledgeFile {
        KnowledgeFile::new(FileId(id), universe().vector(units.iter().copied()).unwrap())
    }

    fn sim(interests: &[&[usize]], cfg: &EngineConfig) -> Simulation {
        Simulation::new(universe(), agents(interests), 0.1, cfg).unwrap()
    }

    /// Installs an item directly, bypassing the protocol.
    fn seed_item(s: &mut Simulation, founding: KnowledgeFile, members: impl IntoIterator<Item = u64>) -> ItemId {
        let fid = founding.id;
        s.files.entry(fid).or_insert(founding);
        let id = ItemId(s.next_item);
        s.next_item += 1;
        s.items.insert(id, Item::new(id, fid, []));
        s.index_file(fid, id);
        for a in members {
            s.join(fid, id, AgentId(a));
        }
        s.graph.add_node(id);
        s.graph.refresh_edges(id, &s.items).unwrap();
        id
    }

    /// Stands in for a random initial spread with a chosen audience.
    fn force_initial(s: &mut Simulation, lc: &mut FileLifecycle, to: &[u64]) {
        for a in to {
            s.push(lc, AgentId(*a), None, None).unwrap();
        }
        lc.phase = Phase::InitialSpreadDone;
    }

    #[test]
    fn round_size_uses_ceiling() {
        let cfg = EngineConfig::default();
        assert_eq!(cfg.round_size(10), 3);
        assert_eq!(cfg.round_size(11), 4);
        assert_eq!(cfg.round_size(1), 1);
        assert_eq!(cfg.round_size(0), 0);
        let all = EngineConfig { rho: 1.0, ..cfg };
        assert_eq!(all.round_size(7), 7);
    }

    #[test]
    fn config_validation() {
        assert!(EngineConfig::default().validate().is_ok());
        for bad in [
            EngineConfig { t_vote: 1.5, ..Default::default() },
            EngineConfig { rho: 0.0, ..Default::default() },
            EngineConfig { n_init: 0, ..Default::default() },
            EngineConfig { k_act: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
        assert!(EngineConfig { t_add: 0, ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn post_file_contract() {
        let cfg = EngineConfig::default();
        let mut s = sim(&[&[0]], &cfg);
        let lc = s.post_file(file(0, &[0])).unwrap();
        assert_eq!(lc.phase, Phase::Arrived);
        assert!(lc.matched_agents.is_empty());
        assert!(s.agents()[&AgentId(0)].pushed_log.is_empty());
        assert!(s.post_file(file(0, &[1])).is_err());
        let wrong = KnowledgeFile::new(FileId(1), UnitUniverse::new(3).unwrap().vector([0]).unwrap());
        assert!(s.post_file(wrong).is_err());
    }

    #[test]
    fn initial_spread_sizes_and_determinism() {
        let cfg = EngineConfig { n_init: 10, ..Default::default() };
        let many: Vec<&[usize]> = vec![&[0]; 1000];
        let mut s = sim(&many, &cfg);
        let mut copy = s.clone();
        let mut lc = s.post_file(file(0, &[0])).unwrap();
        s.initial_spread(&mut lc, &cfg).unwrap();
        assert_eq!(lc.pushed.len(), 10);
        assert_eq!(lc.phase, Phase::InitialSpreadDone);
        let pushes = s.events().iter().filter(|e| e.kind == EventKind::Push).count();
        assert_eq!(pushes, 10);
        assert!(s.initial_spread(&mut lc, &cfg).is_err());

        let mut lc2 = copy.post_file(file(0, &[0])).unwrap();
        copy.initial_spread(&mut lc2, &cfg).unwrap();
        assert_eq!(lc.pushed, lc2.pushed);

        let mut few = sim(&[&[0], &[1], &[2], &[3]], &cfg);
        let mut lc = few.post_file(file(0, &[0])).unwrap();
        few.initial_spread(&mut lc, &cfg).unwrap();
        assert_eq!(lc.pushed.len(), 4);
        assert_eq!(lc.matched_agents, BTreeSet::from([AgentId(0)]));

        let mut empty = sim(&[], &cfg);
        let mut lc = empty.post_file(file(0, &[0])).unwrap();
        assert_eq!(empty.initial_spread(&mut lc, &cfg), Err(EciError::EmptyPopulation));
    }

    #[test]
    fn activation_rule() {
        let cfg = EngineConfig::default();
        let mut s = sim(&[&[0], &[0], &[0], &[1]], &cfg);
        let mut lc = s.post_file(file(0, &[0])).unwrap();
        assert!(s.activate_items(&mut lc, &cfg).is_err());
        force_initial(&mut s, &mut lc, &[0, 1, 2, 3]);
        assert!(s.activate_items(&mut lc, &cfg).unwrap().is_empty());

        let mut s = sim(&[&[0], &[0], &[0], &[1]], &cfg);
        let item = seed_item(&mut s, file(100, &[0]), [0, 1, 2]);
        let mut lc = s.post_file(file(0, &[0])).unwrap();
        force_initial(&mut s, &mut lc, &[0, 1, 2]);
        assert_eq!(s.activate_items(&mut lc, &cfg).unwrap(), BTreeSet::from([item]));
        // every member already pushed: nothing left to spread to
        assert_eq!(lc.spreads[&item].status, SpreadStatus::Exhausted);
        assert!(s.activate_items(&mut lc, &cfg).unwrap().is_empty());

        // k_act = 2 with a single matching member
        let strict = EngineConfig { k_act: 2, ..cfg.clone() };
        let mut s = sim(&[&[0], &[1], &[1], &[1]], &cfg);
        seed_item(&mut s, file(100, &[0, 1]), [0, 1, 2]);
        let mut lc = s.post_file(file(0, &[0])).unwrap();
        force_initial(&mut s, &mut lc, &[0, 1]);
        assert_eq!(lc.matched_agents.len(), 1);
        assert!(s.activate_items(&mut lc, &strict).unwrap().is_empty());
    }

    #[test]
    fn edge_propagation_reaches_neighbours() {
        let cfg = EngineConfig { edge_propagation: true, ..Default::default() };
        let mut s = sim(&[&[0], &[1], &[1]], &cfg);
        let a = seed_item(&mut s, file(100, &[0]), [0]);
        let b = seed_item(&mut s, file(101, &[1]), [1, 2]);
        // share file 100 so a -> b carries weight 1/2
        s.items.get_mut(&b).unwrap().files.insert(FileId(100));
        s.index_file(FileId(100), b);
        s.graph.refresh_edges(b, &s.items).unwrap();
        let mut lc = s.post_file(file(0, &[0])).unwrap();
        force_initial(&mut s, &mut lc, &[0]);
        assert_eq!(s.activate_items(&mut lc, &cfg).unwrap(), BTreeSet::from([a, b]));
        let off = EngineConfig { edge_propagation: false, ..cfg };
        let mut lc = s.post_file(file(1, &[0])).unwrap();
        force_initial(&mut s, &mut lc, &[0]);
        assert_eq!(s.activate_items(&mut lc, &off).unwrap(), BTreeSet::from([a]));
    }

    #[test]
    fn round_pushes_ceil_of_pool() {
        let cfg = EngineConfig::default();
        let interests: Vec<&[usize]> = vec![&[0]; 11];
        let mut s = sim(&interests, &cfg);
        let item = seed_item(&mut s, file(100, &[0]), 0..11);
        let mut lc = s.post_file(file(0, &[0])).unwrap();
        force_initial(&mut s, &mut lc, &[0]);
        s.activate_items(&mut lc, &cfg).unwrap();
        assert_eq!(lc.spreads[&item].pool.len(), 10);
        let out = s.spread_round(&mut lc, item, &cfg).unwrap();
        assert_eq!(out, RoundOutcome { passed: true, pushed: 3, matched: 3 });
        assert_eq!(lc.spreads[&item].pool.len(), 7);
        assert_eq!(lc.spreads[&item].rounds_completed, 1);
    }

    fn voting_fixture(matching: usize) -> (Simulation, FileLifecycle, ItemId, EngineConfig) {
        // agent 0 triggers activation; agents 1..=4 form the pool
        let cfg = EngineConfig { rho: 1.0, ..Default::default() };
        let mut interests: Vec<&[usize]> = vec![&[0]];
        for i in 0..4 {
            interests.push(if i < matching { &[0] } else { &[5] });
        }
        let mut s = sim(&interests, &cfg);
        let item = seed_item(&mut s, file(100, &[0, 1]), 0..5);
        let mut lc = s.post_file(file(0, &[0, 1])).unwrap();
        force_initial(&mut s, &mut lc, &[0]);
        s.activate_items(&mut lc, &cfg).unwrap();
        (s, lc, item, cfg)
    }

    #[test]
    fn voting_ratio_gates_spread() {
        let (mut s, mut lc, item, cfg) = voting_fixture(3);
        let out = s.spread_round(&mut lc, item, &cfg).unwrap();
        assert_eq!(out, RoundOutcome { passed: true, pushed: 4, matched: 3 });
        assert_eq!(lc.spreads[&item].status, SpreadStatus::Exhausted);
        assert!(matches!(
            s.spread_round(&mut lc, item, &cfg),
            Err(EciError::InvalidState(_))
        ));

        let (mut s, mut lc, item, cfg) = voting_fixture(1);
        let out = s.spread_round(&mut lc, item, &cfg).unwrap();
        assert_eq!(out, RoundOutcome { passed: false, pushed: 4, matched: 1 });
        assert_eq!(lc.spreads[&item].status, SpreadStatus::Failed);
        assert!(s.spread_round(&mut lc, item, &cfg).is_err());
        s.finish_spreading(&mut lc).unwrap();
        assert!(!s.try_add_into_item(&mut lc, item, &cfg).unwrap());
    }

    #[test]
    fn add_into_item_requires_passing_and_degree() {
        let (mut s, mut lc, item, cfg) = voting_fixture(3);
        assert!(s.try_add_into_item(&mut lc, item, &cfg).is_err(), "spread still live");
        s.spread_round(&mut lc, item, &cfg).unwrap();
        // founding file {0,1} and this file {0,1} share two units
        assert!(s.try_add_into_item(&mut lc, item, &cfg).unwrap());
        assert!(s.items()[&item].files.contains(&lc.file));
        assert_eq!(lc.added_to, vec![item]);

        // all agents like unit 2 but the founding file has none of it
        let cfg = EngineConfig { rho: 1.0, ..Default::default() };
        let mut s = sim(&[&[0, 2], &[0, 2], &[0, 2]], &cfg);
        let item = seed_item(&mut s, file(100, &[0, 1]), 0..3);
        let mut lc = s.post_file(file(0, &[2])).unwrap();
        force_initial(&mut s, &mut lc, &[0]);
        s.activate_items(&mut lc, &cfg).unwrap();
        assert!(s.spread_round(&mut lc, item, &cfg).unwrap().passed);
        assert!(!s.try_add_into_item(&mut lc, item, &cfg).unwrap());
        let lax = EngineConfig { t_add: 0, ..cfg };
        assert!(s.try_add_into_item(&mut lc, item, &lax).unwrap());
    }

    #[test]
    fn new_item_threshold() {
        let cfg = EngineConfig::default();
        let interests: Vec<&[usize]> = vec![&[0], &[0], &[0], &[0], &[0], &[1]];
        let mut s = sim(&interests, &cfg);
        let mut lc = s.post_file(file(0, &[0])).unwrap();
        force_initial(&mut s, &mut lc, &[0, 1, 2, 3, 4, 5]);
        assert!(s.try_new_item(&mut lc, &cfg).is_err(), "not settled");
        s.finish_spreading(&mut lc).unwrap();
        let id = s.try_new_item(&mut lc, &cfg).unwrap().unwrap();
        let item = &s.items()[&id];
        assert_eq!((item.k(), item.n()), (1, 5));
        assert_eq!(item.founding_file, FileId(0));
        for a in 0..5 {
            assert!(s.agents()[&AgentId(a)].memberships.contains(&id));
        }

        let mut lc = s.post_file(file(1, &[1])).unwrap();
        force_initial(&mut s, &mut lc, &[0, 5]);
        s.finish_spreading(&mut lc).unwrap();
        assert_eq!(s.try_new_item(&mut lc, &cfg).unwrap(), None);
    }

    #[test]
    fn added_file_still_founds_new_item() {
        let (mut s, mut lc, item, cfg) = voting_fixture(3);
        s.spread_round(&mut lc, item, &cfg).unwrap();
        s.finish_spreading(&mut lc).unwrap();
        assert!(s.try_add_into_item(&mut lc, item, &cfg).unwrap());
        let created = s.try_new_item(&mut lc, &cfg).unwrap().unwrap();
        assert_ne!(created, item);
        assert!(s.items()[&item].files.contains(&lc.file));
        assert_eq!(s.items()[&created].founding_file, lc.file);
        // both items hold the file, so an edge links them
        assert!(s.graph().weight(item, created).is_some());
    }

    #[test]
    fn membership_growth() {
        // agent 3 matches the file but is not a member of the item
        let cfg = EngineConfig { rho: 1.0, ..Default::default() };
        let mut s = sim(&[&[0], &[0], &[0], &[0]], &cfg);
        let item = seed_item(&mut s, file(100, &[0]), 0..3);
        let mut lc = s.post_file(file(0, &[0])).unwrap();
        force_initial(&mut s, &mut lc, &[0, 3]);
        s.activate_items(&mut lc, &cfg).unwrap();
        s.spread_round(&mut lc, item, &cfg).unwrap();
        s.finish_spreading(&mut lc).unwrap();
        assert!(s.try_add_into_item(&mut lc, item, &cfg).unwrap());

        let strict = EngineConfig { t_join: 2, ..cfg.clone() };
        assert_eq!(s.update_memberships(&lc, &strict).unwrap(), 0);
        assert_eq!(s.update_memberships(&lc, &cfg).unwrap(), 1);
        assert!(s.items()[&item].agents.contains(&AgentId(3)));
        assert!(s.agents()[&AgentId(3)].memberships.contains(&item));
        assert_eq!(s.update_memberships(&lc, &cfg).unwrap(), 0);
    }

    #[test]
    fn single_file_run_founds_one_item() {
        // five agents, three of which share unit 0 with the file
        let cfg = EngineConfig { n_init: 5, ..Default::default() };
        let pop = agents(&[&[0], &[0, 1], &[0], &[2], &[3]]);
        let s = run_simulation(universe(), pop, vec![file(0, &[0, 4])], 0.1, &cfg).unwrap();
        assert_eq!(s.items().len(), 1);
        let item = s.items().values().next().unwrap();
        assert_eq!(item.founding_file, FileId(0));
        assert_eq!(
            item.agents,
            BTreeSet::from([AgentId(0), AgentId(1), AgentId(2)])
        );

        let empty = run_simulation(universe(), agents(&[&[0]]), vec![], 0.1, &cfg).unwrap();
        assert!(empty.items().is_empty());
        assert_eq!(empty.graph().edge_count(), 0);
    }

    #[test]
    fn event_record_round_trip() {
        let e = Event {
            kind: EventKind::Push,
            file: FileId(12),
            item: None,
            agent: Some(AgentId(45)),
            round: None,
            matched: Some(true),
        };
        assert_eq!(e.to_string(), "push,12,-,45,-,1");
        assert_eq!(Event::parse_record("push,12,-,45,-,1").unwrap(), e);
        let v = Event::parse_record("vote,3,7,-,2,0").unwrap();
        assert_eq!((v.kind, v.item, v.round, v.matched), (EventKind::Vote, Some(ItemId(7)), Some(2), Some(false)));
        assert!(Event::parse_record("push,1,-,2,-").is_err());
        assert!(Event::parse_record("shout,1,-,2,-,1").is_err());
    }
}
