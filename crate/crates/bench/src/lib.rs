//! Inputs shared by the benchmarks.

use dicke_core::config::reference_model;
use dicke_core::{DensityState, ExpectationSeries, HilbertSpec, ModelParams, QuantumSettings};

/// Reference model on the balanced ray at `lambda_khz`.
pub fn balanced(lambda_khz: f64) -> ModelParams {
    let l = dicke_core::units::to_angular(lambda_khz).expect("finite coupling");
    reference_model().with_couplings(l, l)
}

/// A mixed state reached after a short evolution, so the Lindblad kernel
/// sees a dense matrix.
pub fn evolved_state(n_atoms: u32, n_max: u32) -> DensityState {
    let spec = HilbertSpec::new(n_atoms, n_max).expect("valid size");
    let settings =
        QuantumSettings { horizon: 2e-6, dt_sample: 1e-6, max_top_population: 1.0, check_invariants: false, ..Default::default() };
    let series: ExpectationSeries =
        dicke_core::evolve_density(&DensityState::spin_up_vacuum(spec).expect("valid size"), &balanced(93.0), &settings)
            .expect("short evolution");
    series.final_state
}
