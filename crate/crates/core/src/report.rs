use crate::engine::{Event, EventKind, Simulation};
use crate::error::Result;
use crate::export::MetricsDocument;
use crate::metrics::{population_random_snr, random_baseline_snr, system_msre, system_snr};
use crate::model::{AgentResponder, UnitUniverse};

/// Matched/pushed ratios of the two push paths, `(initial, item)`.
pub fn push_path_ratios(events: &[Event]) -> (Option<f64>, Option<f64>) {
    let mut counts = [(0usize, 0usize); 2];
    for e in events.iter().filter(|e| e.kind == EventKind::Push) {
        let c = &mut counts[e.item.is_some() as usize];
        c.0 += 1;
        c.1 += e.matched.unwrap_or(false) as usize;
    }
    let ratio = |(p, m): (usize, usize)| (p > 0).then(|| m as f64 / p as f64);
    (ratio(counts[0]), ratio(counts[1]))
}

/// Collects the flat metrics of a finished run. `p_file` and `p_agent` are
/// the generating densities, used for the closed-form baseline.
pub fn metrics<R: AgentResponder>(
    sim: &Simulation<R>,
    p_file: f64,
    p_agent: f64,
) -> Result<MetricsDocument> {
    let agents: Vec<_> = sim.agents().values().cloned().collect();
    let files: Vec<_> = sim.files().values().cloned().collect();
    let snr = system_snr(&agents)?;
    let baseline = population_random_snr(&agents, &files)?;
    let closed = random_baseline_snr(UnitUniverse::new(sim.universe().dim())?, p_file, p_agent, 0, 0)?
        .closed_form;
    let msre = if sim.items().is_empty() {
        None
    } else {
        Some(system_msre(sim.items().values(), sim.files())?)
    };
    let (initial, item) = push_path_ratios(sim.events());
    let items = sim.items();
    Ok(MetricsDocument {
        system_snr: snr.system,
        random_baseline_snr: baseline,
        random_baseline_closed_form: closed,
        item_spread_snr: item,
        initial_spread_snr: initial,
        system_msre: msre.as_ref().map(|m| m.system),
        n_items: items.len(),
        n_edges: sim.graph().edge_count(),
        n_pushes: snr.total_pushed,
        item_ids: items.keys().map(|k| k.0).collect(),
        item_files: items.values().map(|v| v.k()).collect(),
        item_agents: items.values().map(|v| v.n()).collect(),
        item_msre: msre
            .map(|m| m.per_item.iter().map(|i| i.msre).collect())
            .unwrap_or_default(),
    })
}
