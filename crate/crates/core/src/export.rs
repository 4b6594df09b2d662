//! Text artifacts: event log, edge list, graph description and the flat
//! metrics document.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::Event;
use crate::error::Result;
use crate::graph::{ItemStore, KnsGraph};

/// One event record per line.
pub fn event_log(events: &[Event]) -> String {
    let mut out = String::with_capacity(events.len() * 24);
    for e in events {
        writeln!(out, "{e}").expect("write to string");
    }
    out
}

pub fn parse_event_log(text: &str) -> Result<Vec<Event>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(Event::parse_record)
        .collect()
}

/// `src<TAB>dst<TAB>weight` rows, weight to six decimals.
pub fn edge_list(graph: &KnsGraph) -> String {
    let mut out = String::new();
    for (x, y, w) in graph.edges() {
        writeln!(out, "{x}\t{y}\t{w:.6}").expect("write to string");
    }
    out
}

pub fn node_label(items: &ItemStore, id: crate::model::ItemId) -> String {
    match items.get(&id) {
        Some(v) => format!("item:{id}(k={},n={})", v.k(), v.n()),
        None => format!("item:{id}"),
    }
}

/// Graphviz description of the graph.
pub fn dot(graph: &KnsGraph, items: &ItemStore) -> String {
    let mut out = String::from("digraph kns {\n");
    for id in graph.nodes() {
        writeln!(out, "  {id} [label=\"{}\"];", node_label(items, id)).expect("write to string");
    }
    for (x, y, w) in graph.edges() {
        writeln!(out, "  {x} -> {y} [weight={w:.6}, label=\"{w:.6}\"];").expect("write to string");
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub system_snr: f64,
    /// Expected SNR of uniformly random pushing over the same population.
    pub random_baseline_snr: f64,
    /// Independent-coordinate closed form at the configured densities.
    pub random_baseline_closed_form: f64,
    /// Matched/pushed over pushes made inside item rounds only.
    pub item_spread_snr: Option<f64>,
    /// Matched/pushed over initial-spread pushes only.
    pub initial_spread_snr: Option<f64>,
    pub system_msre: Option<f64>,
    pub n_items: usize,
    pub n_edges: usize,
    pub n_pushes: usize,
    pub item_ids: Vec<u64>,
    pub item_files: Vec<usize>,
    pub item_agents: Vec<usize>,
    pub item_msre: Vec<f64>,
}

impl MetricsDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }

    /// `key<TAB>value` lines; arrays comma-joined, absent values as `-`.
    pub fn to_tsv(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map_or_else(|| "-".into(), |v| v.to_string())
        }
        fn join<T: ToString>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        let rows = [
            ("system_snr", self.system_snr.to_string()),
            ("random_baseline_snr", self.random_baseline_snr.to_string()),
            (
                "random_baseline_closed_form",
                self.random_baseline_closed_form.to_string(),
            ),
            ("item_spread_snr", opt(self.item_spread_snr)),
            ("initial_spread_snr", opt(self.initial_spread_snr)),
            ("system_msre", opt(self.system_msre)),
            ("n_items", self.n_items.to_string()),
            ("n_edges", self.n_edges.to_string()),
            ("n_pushes", self.n_pushes.to_string()),
            ("item_ids", join(&self.item_ids)),
            ("item_files", join(&self.item_files)),
            ("item_agents", join(&self.item_agents)),
            ("item_msre", join(&self.item_msre)),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            writeln!(out, "{k}\t{v}").expect("write to string");
        }
        out
    }
}
