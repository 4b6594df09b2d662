//! Protocol invariants over whole simulation runs.

use std::collections::BTreeSet;

use eci_core::audit::audit;
use eci_core::engine::replay;
use eci_core::export::event_log;
use eci_core::metrics::{system_msre, partition_msre_exact};
use eci_core::report::push_path_ratios;
use eci_core::rng;
use eci_core::{
    generate, run_simulation, EngineConfig, Item, ItemId, PopulationSpec, Simulation, Structure,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn clustered(seed: u64, n_agents: usize, n_files: usize) -> PopulationSpec {
    PopulationSpec {
        n_agents,
        n_files,
        structure: Structure::Clustered {
            k_clusters: 6,
            intra_boost: 6.0,
        },
        seed,
        ..PopulationSpec::default()
    }
}

fn run(spec: &PopulationSpec, cfg: &EngineConfig) -> Simulation {
    let pop = generate(spec).unwrap();
    run_simulation(pop.universe, pop.agents, pop.files, 0.1, cfg).unwrap()
}

fn check_memberships(sim: &Simulation) {
    for (id, a) in sim.agents() {
        let expected: BTreeSet<ItemId> = sim
            .items()
            .values()
            .filter(|v| v.agents.contains(id))
            .map(|v| v.id)
            .collect();
        assert_eq!(a.memberships, expected, "agent {id}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_respect_protocol(
        seed in 0u64..1000,
        n_init in 1usize..30,
        t_new in 1usize..5,
        t_vote in 0.0f64..1.0,
        rho in 0.05f64..1.0,
        max_rounds in 1u32..6,
        t_add in 0usize..3,
        k_act in 1usize..3,
        t_join in 1usize..3,
        edge_propagation in any::<bool>(),
        clustered_mode in any::<bool>(),
    ) {
        let mut spec = clustered(seed, 120, 80);
        if !clustered_mode {
            spec.structure = Structure::Independent;
        }
        let cfg = EngineConfig {
            n_init, t_new, t_vote, rho, max_rounds, t_add, k_act, t_join,
            edge_propagation, rng_seed: seed,
        };
        let pop = generate(&spec).unwrap();
        let sim = run_simulation(pop.universe, pop.agents.clone(), pop.files, 0.1, &cfg).unwrap();

        let report = audit(sim.events(), Some(sim.items()), &cfg);
        prop_assert!(report.is_clean(), "{report:?}");
        for a in sim.agents().values() {
            let files: BTreeSet<_> = a.pushed_log.iter().map(|p| p.file).collect();
            prop_assert_eq!(files.len(), a.pushed_log.len());
        }
        for v in sim.items().values() {
            prop_assert!(v.files.contains(&v.founding_file));
            prop_assert!(!v.agents.is_empty());
        }
        check_memberships(&sim);
        prop_assert_eq!(sim.graph(), &sim.rebuilt_graph().unwrap());
        prop_assert_eq!(replay(pop.agents, sim.events(), 0.1).unwrap(), sim.snapshot());
    }
}

#[test]
fn identical_inputs_give_identical_logs() {
    let spec = clustered(11, 300, 200);
    let cfg = EngineConfig {
        rng_seed: 5,
        ..EngineConfig::default()
    };
    let a = run(&spec, &cfg);
    let b = run(&spec, &cfg);
    assert_eq!(event_log(a.events()), event_log(b.events()));
    let c = run(
        &spec,
        &EngineConfig {
            rng_seed: 6,
            ..cfg
        },
    );
    assert_ne!(a.events(), c.events());
}

#[test]
fn item_rounds_beat_initial_spread() {
    // one-sided: item-round pushes match at least as often as random ones
    for seed in 0..10 {
        let cfg = EngineConfig {
            rng_seed: seed,
            ..EngineConfig::default()
        };
        let sim = run(&clustered(seed, 400, 300), &cfg);
        let (initial, item) = push_path_ratios(sim.events());
        let (initial, item) = (initial.unwrap(), item.unwrap());
        assert!(item >= initial, "seed {seed}: item {item} < initial {initial}");
    }
}

#[test]
fn items_are_more_cohesive_than_random_groupings() {
    for seed in 0..10 {
        let cfg = EngineConfig {
            rng_seed: seed,
            ..EngineConfig::default()
        };
        let sim = run(&clustered(seed, 400, 300), &cfg);
        let eci = system_msre(sim.items().values(), sim.files()).unwrap().system;

        // random items with the same sizes, filled from all posted files
        let mut rng = rng::substream(seed, 99);
        let ids: Vec<_> = sim.files().keys().copied().collect();
        let blocks: Vec<Vec<_>> = sim
            .items()
            .values()
            .map(|v: &Item| {
                ids.choose_multiple(&mut rng, v.k())
                    .map(|f| &sim.files()[f].units)
                    .collect()
            })
            .collect();
        let random = partition_msre_exact(&blocks).unwrap();
        let random = *random.numer() as f64 / *random.denom() as f64;
        assert!(eci <= random, "seed {seed}: eci {eci} > random {random}");
    }
}
