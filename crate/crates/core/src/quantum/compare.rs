//! Finite-N master equation against the mean-field photon plateau.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evolve_density, truncation_deviation, DensityState, HilbertSpec, QuantumSettings};
use crate::classifier::steady_window_stats;
use crate::error::Result;
use crate::model::ModelParams;
use crate::semiclassical::{integrate, perturbed_initial, IntegrationSettings, DEFAULT_EPSILON};
use crate::table::{self, TableKind};

/// Fock cutoff used when none is given: the photon number of the mean-field
/// plateau grows with `N`, so the cutoff does too.
pub fn default_fock_cutoff(n_atoms: u32) -> u32 {
    10 + 2 * n_atoms
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSettings {
    /// `(N, n_max)` pairs to run.
    pub sizes: Vec<(u32, u32)>,
    pub quantum: QuantumSettings,
    pub semiclassical: IntegrationSettings,
    /// Trailing fraction of each series averaged into its plateau.
    pub plateau_fraction: f64,
    /// Rerun each size with this many extra Fock states to measure
    /// truncation sensitivity; 0 skips the check.
    pub truncation_step: u32,
}

impl Default for CompareSettings {
    fn default() -> Self {
        CompareSettings {
            sizes: Vec::new(),
            quantum: QuantumSettings::default(),
            semiclassical: IntegrationSettings::default(),
            plateau_fraction: 0.25,
            truncation_step: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub n_atoms: u32,
    pub n_max: u32,
    /// Trailing mean of `⟨a†a⟩/(2N)`.
    pub quantum_plateau: f64,
    /// Trailing mean of the mean-field `|α|²`.
    pub semiclassical_plateau: f64,
    /// `|quantum − semiclassical| / semiclassical`
    pub gap: f64,
    pub truncation_deviation: Option<f64>,
    pub invariants_hold: bool,
    pub max_j2_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub model: ModelParams,
    pub rows: Vec<CompareRow>,
}

impl ComparisonReport {
    /// Gap strictly shrinks from each size to the next larger one.
    pub fn gap_decreasing(&self) -> bool {
        let mut rows = self.rows.clone();
        rows.sort_by_key(|r| r.n_atoms);
        rows.windows(2).all(|w| w[1].gap < w[0].gap)
    }

    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        table::write_preamble(&mut out, TableKind::Comparison)?;
        writeln!(
            out,
            "n_atoms,n_max,quantum_plateau,semiclassical_plateau,gap,truncation_deviation,invariants_hold,max_j2_drift"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:e},{:e},{:e},{},{},{:e}",
                r.n_atoms,
                r.n_max,
                r.quantum_plateau,
                r.semiclassical_plateau,
                r.gap,
                table::opt(r.truncation_deviation),
                r.invariants_hold,
                r.max_j2_drift
            )?;
        }
        Ok(())
    }
}

fn trailing_mean(x: &[f64], fraction: f64) -> f64 {
    let m = ((x.len() as f64 * fraction).round() as usize).clamp(1, x.len());
    x[x.len() - m..].iter().sum::<f64>() / m as f64
}

/// Run the master equation for each size from `|N, N⟩ ⊗ |0⟩` and compare
/// its photon plateau with the mean-field one for the same parameters.
pub fn compare(m: &ModelParams, settings: &CompareSettings) -> Result<ComparisonReport> {
    let traj = integrate(&perturbed_initial(DEFAULT_EPSILON, None)?, m, &settings.semiclassical)?;
    let semiclassical_plateau = steady_window_stats(&traj, settings.plateau_fraction)?.mean;

    let rows = settings
        .sizes
        .par_iter()
        .map(|&(n_atoms, n_max)| -> Result<CompareRow> {
            let spec = HilbertSpec::new(n_atoms, n_max)?;
            let series = evolve_density(&DensityState::spin_up_vacuum(spec)?, m, &settings.quantum)?;
            let quantum_plateau = trailing_mean(&series.scaled_photons(), settings.plateau_fraction);
            let truncation_deviation = if settings.truncation_step > 0 {
                let wider = HilbertSpec::new(n_atoms, n_max + settings.truncation_step)?;
                let quick = QuantumSettings { check_invariants: false, ..settings.quantum };
                let other = evolve_density(&DensityState::spin_up_vacuum(wider)?, m, &quick)?;
                Some(truncation_deviation(&series, &other))
            } else {
                None
            };
            Ok(CompareRow {
                n_atoms,
                n_max,
                quantum_plateau,
                semiclassical_plateau,
                gap: (quantum_plateau - semiclassical_plateau).abs() / semiclassical_plateau,
                truncation_deviation,
                invariants_hold: series.invariants.holds(),
                max_j2_drift: series.invariants.max_j2_drift,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport { model: *m, rows })
}
