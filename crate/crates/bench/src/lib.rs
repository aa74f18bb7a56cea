//! Fixtures shared by the criterion benchmarks in `benches/`.

use relaysim_core::{generate, Architecture, ExperimentConfig, Scenario};

/// A reference deployment: 5 km side, default parameters, run index 0.
pub fn scenario(architecture: Architecture, n_eds: usize, n_relays: usize) -> Scenario {
    let cfg = ExperimentConfig {
        n_eds,
        n_relays,
        ..Default::default()
    }
    .with_architecture(architecture);
    generate(&cfg, 0).expect("default configuration is valid")
}
