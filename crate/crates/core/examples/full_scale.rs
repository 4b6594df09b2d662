//! Runs the 1000-agent / 54-unit / 953-file setup and prints the headline
//! numbers. Usage: `full_scale [seed] [k_clusters] [intra_boost]`.

use std::time::Instant;

use eci_core::{generate, report, run_simulation, EngineConfig, PopulationSpec, Structure};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed = args.first().and_then(|s| s.parse().ok()).unwrap_or(1);
    let k_clusters = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let intra_boost = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(6.0);
    let spec = PopulationSpec {
        structure: Structure::Clustered {
            k_clusters,
            intra_boost,
        },
        seed,
        ..PopulationSpec::default()
    };
    let cfg = EngineConfig {
        rng_seed: seed,
        ..EngineConfig::default()
    };
    let started = Instant::now();
    let pop = generate(&spec).expect("population");
    let sim = run_simulation(pop.universe, pop.agents, pop.files, 0.1, &cfg).expect("run");
    let elapsed = started.elapsed();
    let m = report::metrics(&sim, spec.p_file, spec.p_agent).expect("metrics");
    println!("elapsed            {elapsed:?}");
    println!("system_snr         {:.4}", m.system_snr);
    println!("random baseline    {:.4}", m.random_baseline_snr);
    println!("closed form        {:.4}", m.random_baseline_closed_form);
    println!("initial-spread snr {:?}", m.initial_spread_snr);
    println!("item-spread snr    {:?}", m.item_spread_snr);
    println!("system_msre        {:?}", m.system_msre);
    println!("items / edges      {} / {}", m.n_items, m.n_edges);
    println!("pushes             {}", m.n_pushes);
    if std::env::var("ECI_DEBUG").is_ok() {
        use eci_core::EventKind;
        let votes: Vec<_> = sim.events().iter().filter(|e| e.kind == EventKind::Vote).collect();
        let passed = votes.iter().filter(|e| e.matched == Some(true)).count();
        println!("votes {} passed {}", votes.len(), passed);
        let adds = sim.events().iter().filter(|e| e.kind == EventKind::Add).count();
        let joins = sim.events().iter().filter(|e| e.kind == EventKind::Join).count();
        println!("adds {adds} joins {joins}");
        let mut n: Vec<usize> = sim.items().values().map(|v| v.n()).collect();
        n.sort();
        let mut k: Vec<usize> = sim.items().values().map(|v| v.k()).collect();
        k.sort();
        println!("item n quantiles {:?}", [n[0], n[n.len()/4], n[n.len()/2], n[3*n.len()/4], n[n.len()-1]]);
        println!("item k quantiles {:?}", [k[0], k[k.len()/4], k[k.len()/2], k[3*k.len()/4], k[k.len()-1]]);
        let mut pushes: Vec<usize> = sim.agents().values().map(|a| a.pushed()).collect();
        pushes.sort();
        println!("agent pushes quantiles {:?}", [pushes[0], pushes[250], pushes[500], pushes[750], pushes[999]]);
        let mems: usize = sim.agents().values().filter(|a| a.memberships.is_empty()).count();
        println!("agents without membership {mems}");
        let mut per_file = std::collections::BTreeMap::<u64, usize>::new();
        for e in sim.events().iter().filter(|e| e.kind == EventKind::Push && e.item.is_some()) {
            *per_file.entry(e.file.0).or_default() += 1;
        }
        let half: usize = per_file.iter().filter(|(f, _)| **f >= 476).map(|(_, n)| n).sum();
        println!("files with item pushes {} ; item pushes in second half {}", per_file.len(), half);
        let mut v: Vec<usize> = per_file.values().copied().collect();
        v.sort();
        println!("item pushes/file quantiles {:?}", [v[0], v[v.len()/4], v[v.len()/2], v[3*v.len()/4], v[v.len()-1]]);
    }
}
