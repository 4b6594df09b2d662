//! Shared fixtures for the benchmarks.

use eci_core::{generate, Population, PopulationSpec, Structure};

/// A clustered population of the given size on 54 units.
pub fn clustered_population(n_agents: usize, n_files: usize, seed: u64) -> Population {
    generate(&PopulationSpec {
        n_agents,
        n_files,
        structure: Structure::Clustered {
            k_clusters: 6,
            intra_boost: 6.0,
        },
        seed,
        ..PopulationSpec::default()
    })
    .expect("valid spec")
}
