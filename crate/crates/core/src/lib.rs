//! Simulation of evolutionary collective intelligence: files are pushed to
//! agents through a random initial spread and multi-round voting inside
//! knowledge items, items accumulate the files their members vote for, and
//! the items form a directed weighted knowledge network.
//!
//! The crate covers the domain model ([`model`]), the match predicate
//! ([`matching`]), the dissemination engine ([`engine`]), the knowledge
//! network graph ([`graph`]), SNR/MSRE metrics with brute-force oracles
//! ([`metrics`]), synthetic populations ([`synth`]) and text artifacts
//! ([`export`]).

pub mod audit;
pub mod engine;
pub mod error;
pub mod export;
pub mod graph;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod report;
pub mod rng;
pub mod synth;

pub use engine::{run_simulation, EngineConfig, Event, EventKind, FileLifecycle, Simulation};
pub use error::{EciError, Result};
pub use graph::{HierarchyOrder, HierarchyReport, ItemStore, KnsGraph};
pub use matching::{match_agent_file, match_file_file, MatchResult};
pub use model::{
    Agent, AgentId, AgentResponder, FileId, Item, ItemId, KnowledgeFile, SyntheticResponder,
    UnitUniverse, UnitVector,
};
pub use synth::{generate, Population, PopulationSpec, Structure};
