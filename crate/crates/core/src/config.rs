//! TOML run configuration. Frequencies are linear kHz, times carry their
//! unit in the key name.
//!
//! ```toml
//! [model]
//! omega_khz = 100.0
//! omega0_khz = -77.0
//! lambda_plus_khz = 0.0
//! lambda_minus_khz = 0.0
//! kappa_khz = 100.0
//!
//! [sweep]
//! lambda_max_khz = 150.0
//! seed = 7
//! ```
//!
//! Every section is optional. A `[physical]` section derives the model when
//! `[model]` is absent.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::Thresholds;
use crate::error::{Error, Result};
use crate::harness::SweepGrid;
use crate::model::{derive_model_params, ModelParams, PhysicalParams};
use crate::quantum::{HilbertSpec, QuantumSettings};
use crate::semiclassical::{IntegrationSettings, DEFAULT_EPSILON};
use crate::units::{khz, to_angular};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub omega_khz: f64,
    pub omega0_khz: f64,
    #[serde(default)]
    pub lambda_plus_khz: f64,
    #[serde(default)]
    pub lambda_minus_khz: f64,
    pub kappa_khz: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { omega_khz: 100.0, omega0_khz: -77.0, lambda_plus_khz: 0.0, lambda_minus_khz: 0.0, kappa_khz: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSection {
    pub g_khz: f64,
    pub delta_khz: f64,
    pub kappa_khz: f64,
    pub gamma_a_khz: f64,
    pub omega_z_khz: f64,
    pub n_atoms: u64,
    pub rabi_plus_khz: f64,
    pub rabi_minus_khz: f64,
    pub omega_c_khz: f64,
    pub omega_laser_plus_khz: f64,
    pub omega_laser_minus_khz: f64,
    pub omega_d_khz: Option<f64>,
}

impl PhysicalSection {
    pub fn to_params(&self) -> Result<PhysicalParams> {
        let p = PhysicalParams {
            g: to_angular(self.g_khz)?,
            delta: to_angular(self.delta_khz)?,
            kappa: to_angular(self.kappa_khz)?,
            gamma_a: to_angular(self.gamma_a_khz)?,
            omega_z: to_angular(self.omega_z_khz)?,
            n_atoms: self.n_atoms,
            rabi_plus: to_angular(self.rabi_plus_khz)?,
            rabi_minus: to_angular(self.rabi_minus_khz)?,
            omega_c: to_angular(self.omega_c_khz)?,
            omega_laser_plus: to_angular(self.omega_laser_plus_khz)?,
            omega_laser_minus: to_angular(self.omega_laser_minus_khz)?,
            omega_d_override: self.omega_d_khz.map(to_angular).transpose()?,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub horizon_ms: f64,
    pub dt_sample_us: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Size of the initial kick away from the normal state.
    pub epsilon: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let s = IntegrationSettings::default();
        IntegratorSection {
            horizon_ms: s.horizon * 1e3,
            dt_sample_us: s.dt_sample * 1e6,
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSection {
    pub eps_triv: f64,
    pub osc_std_min: f64,
    pub sr_std_max: f64,
    pub prominence_min: f64,
    pub f_min_khz: f64,
    pub window_fraction: f64,
    pub w_polarized: f64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let t = Thresholds::default();
        ClassifierSection {
            eps_triv: t.eps_triv,
            osc_std_min: t.osc_std_min,
            sr_std_max: t.sr_std_max,
            prominence_min: t.prominence_min,
            f_min_khz: t.f_min_hz / 1e3,
            window_fraction: t.window_fraction,
            w_polarized: t.w_polarized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub ratio_steps: usize,
    pub lambda_min_khz: f64,
    pub lambda_max_khz: f64,
    pub lambda_steps: usize,
    pub seed: Option<u64>,
    /// Cells between checkpoint writes.
    pub checkpoint_every: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            ratio_min: 0.0,
            ratio_max: 2.0,
            ratio_steps: 81,
            lambda_min_khz: 0.0,
            lambda_max_khz: 150.0,
            lambda_steps: 76,
            seed: None,
            checkpoint_every: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantumSection {
    pub n_atoms: u32,
    pub n_max: u32,
    pub horizon_us: f64,
    pub dt_sample_us: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_top_population: f64,
}

impl Default for QuantumSection {
    fn default() -> Self {
        let q = QuantumSettings::default();
        QuantumSection {
            n_atoms: 1,
            n_max: 12,
            horizon_us: q.horizon * 1e6,
            dt_sample_us: q.dt_sample * 1e6,
            rel_tol: q.rel_tol,
            abs_tol: q.abs_tol,
            max_top_population: q.max_top_population,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: Option<ModelSection>,
    pub physical: Option<PhysicalSection>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub classifier: ClassifierSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub quantum: QuantumSection,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// `[model]` if given, else derived from `[physical]`, else the default
    /// operating point with zero coupling.
    pub fn model_params(&self) -> Result<ModelParams> {
        match (&self.model, &self.physical) {
            (Some(m), _) => ModelParams::from_khz(m.omega_khz, m.omega0_khz, m.lambda_plus_khz, m.lambda_minus_khz, m.kappa_khz),
            (None, Some(p)) => derive_model_params(&p.to_params()?),
            (None, None) => {
                let m = ModelSection::default();
                ModelParams::from_khz(m.omega_khz, m.omega0_khz, m.lambda_plus_khz, m.lambda_minus_khz, m.kappa_khz)
            }
        }
    }

    pub fn physical_params(&self) -> Result<PhysicalParams> {
        self.physical.as_ref().ok_or_else(|| Error::Config("missing [physical] section".into()))?.to_params()
    }

    pub fn integration_settings(&self) -> Result<IntegrationSettings> {
        let i = &self.integrator;
        let s = IntegrationSettings {
            horizon: i.horizon_ms * 1e-3,
            dt_sample: i.dt_sample_us * 1e-6,
            rel_tol: i.rel_tol,
            abs_tol: i.abs_tol,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn thresholds(&self) -> Thresholds {
        let c = &self.classifier;
        Thresholds {
            eps_triv: c.eps_triv,
            osc_std_min: c.osc_std_min,
            sr_std_max: c.sr_std_max,
            prominence_min: c.prominence_min,
            f_min_hz: c.f_min_khz * 1e3,
            window_fraction: c.window_fraction,
            w_polarized: c.w_polarized,
        }
    }

    pub fn sweep_grid(&self) -> Result<SweepGrid> {
        let s = &self.sweep;
        let grid = SweepGrid {
            ratio_axis: linspace(s.ratio_min, s.ratio_max, s.ratio_steps)?,
            lambda_axis_khz: linspace(s.lambda_min_khz, s.lambda_max_khz, s.lambda_steps)?,
            base: self.model_params()?.with_couplings(0.0, 0.0),
            integration: self.integration_settings()?,
            thresholds: self.thresholds(),
            epsilon: self.integrator.epsilon,
            seed: s.seed,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn hilbert_spec(&self) -> Result<HilbertSpec> {
        HilbertSpec::new(self.quantum.n_atoms, self.quantum.n_max)
    }

    pub fn quantum_settings(&self) -> Result<QuantumSettings> {
        let q = &self.quantum;
        let s = QuantumSettings {
            horizon: q.horizon_us * 1e-6,
            dt_sample: q.dt_sample_us * 1e-6,
            rel_tol: q.rel_tol,
            abs_tol: q.abs_tol,
            max_top_population: q.max_top_population,
            check_invariants: true,
        };
        s.validate()?;
        Ok(s)
    }
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    match n {
        0 => Err(Error::invalid("steps", "must be at least 1")),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
    }
}

/// Convenience for tests and examples: the reference operating point.
pub fn reference_model() -> ModelParams {
    ModelParams::new(khz(100.0), khz(-77.0), 0.0, 0.0, khz(100.0)).expect("valid reference model")
}
