use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::store::{load_partial, write_partial};
use crate::classifier::{classify, PhaseLabel, PhasePoint, Thresholds};
use crate::config::linspace;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::semiclassical::{integrate, perturbed_initial, IntegrationSettings, DEFAULT_EPSILON};
use crate::units::to_angular;

/// Parameter grid over `(λ₊/λ₋, max(λ₊, λ₋))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub ratio_axis: Vec<f64>,
    pub lambda_axis_khz: Vec<f64>,
    /// Detunings and decay; its couplings are ignored.
    pub base: ModelParams,
    pub integration: IntegrationSettings,
    pub thresholds: Thresholds,
    pub epsilon: f64,
    pub seed: Option<u64>,
}

impl SweepGrid {
    /// Ratio 0 to 2 in 81 steps, `λ_max` 0 to 150 kHz in 76 steps.
    pub fn default_for(base: ModelParams) -> Self {
        SweepGrid {
            ratio_axis: linspace(0.0, 2.0, 81).expect("non-empty"),
            lambda_axis_khz: linspace(0.0, 150.0, 76).expect("non-empty"),
            base: base.with_couplings(0.0, 0.0),
            integration: IntegrationSettings::default(),
            thresholds: Thresholds::default(),
            epsilon: DEFAULT_EPSILON,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn increasing(axis: &[f64], name: &'static str) -> Result<()> {
            if axis.is_empty() {
                return Err(Error::invalid(name, "axis is empty"));
            }
            if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::invalid(name, "axis must be finite and strictly increasing"));
            }
            Ok(())
        }
        increasing(&self.ratio_axis, "ratio_axis")?;
        increasing(&self.lambda_axis_khz, "lambda_axis")?;
        if self.ratio_axis[0] < 0.0 || *self.ratio_axis.last().unwrap() > 2.0 {
            return Err(Error::invalid("ratio_axis", "ratios must lie in [0, 2]"));
        }
        if self.lambda_axis_khz[0] < 0.0 {
            return Err(Error::invalid("lambda_axis", "couplings must be non-negative"));
        }
        self.base.validate()?;
        self.integration.validate()?;
        perturbed_initial(self.epsilon, None)?;
        Ok(())
    }

    /// `(ratios, couplings)`
    pub fn shape(&self) -> (usize, usize) {
        (self.ratio_axis.len(), self.lambda_axis_khz.len())
    }

    pub fn n_cells(&self) -> usize {
        self.ratio_axis.len() * self.lambda_axis_khz.len()
    }

    /// Flat index of cell `(ratio i, coupling j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.lambda_axis_khz.len() + j
    }

    pub fn model_at(&self, i: usize, j: usize) -> Result<ModelParams> {
        Ok(self.base.on_ray(self.ratio_axis[i], to_angular(self.lambda_axis_khz[j])?))
    }

    /// Hex SHA-256 of the canonical JSON form; identifies the grid in
    /// checkpoints.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("grid serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// Seed of one cell, independent of evaluation order.
pub fn cell_seed(seed: u64, i: usize, j: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((i as u64).to_le_bytes());
    h.update((j as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellStatus {
    Ok,
    /// Unresolved at the first horizon and rerun at twice the horizon.
    Retried,
    Failed(String),
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellStatus::Ok => f.write_str("ok"),
            CellStatus::Retried => f.write_str("retried"),
            CellStatus::Failed(msg) => write!(f, "failed: {msg}"),
        }
    }
}

impl FromStr for CellStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(CellStatus::Ok),
            "retried" => Ok(CellStatus::Retried),
            _ => s
                .strip_prefix("failed: ")
                .map(|m| CellStatus::Failed(m.to_string()))
                .ok_or_else(|| Error::invalid("status", format!("unknown cell status `{s}`"))),
        }
    }
}

/// Failure messages end up in a comma-separated table.
fn sanitize(msg: &str) -> String {
    msg.chars().map(|c| if c == ',' || c.is_control() { ';' } else { c }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub point: PhasePoint,
    /// Horizon of the run that produced `point`.
    pub horizon_ms: f64,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
    pub started_unix: Option<u64>,
    pub finished_unix: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    pub grid: SweepGrid,
    /// Ratio-major: `cells[grid.index(i, j)]`.
    pub cells: Vec<SweepCell>,
    pub provenance: Provenance,
}

impl PhaseMap {
    pub fn cell(&self, i: usize, j: usize) -> &SweepCell {
        &self.cells[self.grid.index(i, j)]
    }

    pub fn label(&self, i: usize, j: usize) -> PhaseLabel {
        self.cell(i, j).point.label
    }

    /// Labels along one ratio row, in coupling order.
    pub fn row(&self, i: usize) -> Vec<PhaseLabel> {
        (0..self.grid.lambda_axis_khz.len()).map(|j| self.label(i, j)).collect()
    }

    /// Labels along one coupling column, in ratio order.
    pub fn column(&self, j: usize) -> Vec<PhaseLabel> {
        (0..self.grid.ratio_axis.len()).map(|i| self.label(i, j)).collect()
    }
}

fn failed(horizon_ms: f64, e: &Error) -> SweepCell {
    SweepCell {
        point: PhasePoint {
            label: PhaseLabel::Unresolved,
            mean_photon_proxy: 0.0,
            rel_std: 0.0,
            w_final: 0.0,
            peak_freq_khz: None,
            peak_prominence: None,
        },
        horizon_ms,
        status: CellStatus::Failed(sanitize(&e.to_string())),
    }
}

/// Integrate and classify one cell, retrying once at twice the horizon if
/// the first attempt is unresolved. Errors are recorded, not returned.
pub fn run_cell(grid: &SweepGrid, i: usize, j: usize) -> SweepCell {
    let horizon_ms = grid.integration.horizon * 1e3;
    let attempt = |settings: &IntegrationSettings| -> Result<PhasePoint> {
        let model = grid.model_at(i, j)?;
        let state0 = perturbed_initial(grid.epsilon, grid.seed.map(|s| cell_seed(s, i, j)))?;
        classify(&integrate(&state0, &model, settings)?, &grid.thresholds)
    };
    match attempt(&grid.integration) {
        Ok(point) if point.label != PhaseLabel::Unresolved => SweepCell { point, horizon_ms, status: CellStatus::Ok },
        Ok(_) => {
            let longer = grid.integration.with_horizon(2.0 * grid.integration.horizon);
            match attempt(&longer) {
                Ok(point) => SweepCell { point, horizon_ms: 2.0 * horizon_ms, status: CellStatus::Retried },
                Err(e) => failed(2.0 * horizon_ms, &e),
            }
        }
        Err(e) => failed(horizon_ms, &e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub workers: usize,
    /// Written atomically after every `checkpoint_every` cells.
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_every: usize,
    /// Recorded in the provenance; `None` keeps output reproducible.
    pub timestamp: Option<u64>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { workers: 1, checkpoint: None, checkpoint_every: 256, timestamp: None }
    }
}

fn provenance(grid: &SweepGrid, started: Option<u64>, finished: Option<u64>) -> Provenance {
    Provenance {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: grid.hash(),
        started_unix: started,
        finished_unix: finished,
    }
}

fn fill(
    grid: &SweepGrid,
    mut cells: Vec<Option<SweepCell>>,
    started: Option<u64>,
    opts: &SweepOptions,
) -> Result<PhaseMap> {
    if opts.workers == 0 {
        return Err(Error::invalid("workers", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let (_, nl) = grid.shape();
    let pending: Vec<usize> = (0..cells.len()).filter(|&k| cells[k].is_none()).collect();
    for chunk in pending.chunks(opts.checkpoint_every.max(1)) {
        let done: Vec<SweepCell> = pool.install(|| chunk.par_iter().map(|&k| run_cell(grid, k / nl, k % nl)).collect());
        for (&k, c) in chunk.iter().zip(done) {
            cells[k] = Some(c);
        }
        if let Some(path) = &opts.checkpoint {
            write_partial(path, grid, &provenance(grid, started, None), &cells)?;
        }
    }
    let cells: Vec<SweepCell> = cells.into_iter().map(|c| c.expect("all cells computed")).collect();
    Ok(PhaseMap { grid: grid.clone(), cells, provenance: provenance(grid, started, opts.timestamp) })
}

/// Compute every cell of `grid`. The result does not depend on
/// `opts.workers`.
pub fn run_sweep(grid: &SweepGrid, opts: &SweepOptions) -> Result<PhaseMap> {
    grid.validate()?;
    fill(grid, vec![None; grid.n_cells()], opts.timestamp, opts)
}

/// Continue a sweep from a checkpoint, recomputing only missing and
/// unresolved cells. The checkpoint must belong to `grid`.
pub fn resume_sweep(partial: &std::path::Path, grid: &SweepGrid, opts: &SweepOptions) -> Result<PhaseMap> {
    grid.validate()?;
    let part = load_partial(partial)?;
    let expected = grid.hash();
    if part.provenance.config_hash != expected || part.grid.hash() != expected {
        return Err(Error::GridMismatch { found: part.provenance.config_hash, expected });
    }
    let cells = part
        .cells
        .into_iter()
        .map(|c| c.filter(|c| c.point.label != PhaseLabel::Unresolved))
        .collect();
    let started = part.provenance.started_unix.or(opts.timestamp);
    fill(grid, cells, started, opts)
}
