//! Mean-field equations of motion and their integration.
//!
//! With `α = ⟨a⟩/√(2N)`, `β = ⟨J₋⟩/(2N)` and `w = ⟨J_z⟩/(2N)`:
//!
//! ```text
//! α̇ = −κα − iωα − iλ₋β − iλ₊β*
//! β̇ = −iω₀β + 2iλ₋αw + 2iλ₊α*w
//! ẇ = iλ₋(α*β − αβ*) + iλ₊(αβ − α*β*)
//! ```
//!
//! `|β|² + w²` is a first integral of this flow and serves as the accuracy
//! sentinel of every integration.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::ode::{integrate_sampled, OdeSystem, Stats, Tolerances};
use crate::table::{self, TableKind};

pub const TRAJECTORY_HEADER: &str = "t_s,re_alpha,im_alpha,re_beta,im_beta,w,abs_alpha_sq";

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SemiclassicalState {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub w: f64,
}

impl SemiclassicalState {
    pub fn new(alpha: Complex64, beta: Complex64, w: f64) -> Self {
        SemiclassicalState { alpha, beta, w }
    }

    /// Unperturbed `(0, 0, +1/2)`: all atoms in `|+1⟩`, empty cavity.
    pub fn normal() -> Self {
        SemiclassicalState { w: 0.5, ..Default::default() }
    }

    /// Unperturbed `(0, 0, −1/2)`.
    pub fn inverted() -> Self {
        SemiclassicalState { w: -0.5, ..Default::default() }
    }

    pub fn spin_norm(&self) -> f64 {
        spin_norm(self)
    }

    pub fn photon_proxy(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    pub fn negated_field_and_coherence(&self) -> Self {
        SemiclassicalState { alpha: -self.alpha, beta: -self.beta, w: self.w }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.re.is_finite()
            && self.alpha.im.is_finite()
            && self.beta.re.is_finite()
            && self.beta.im.is_finite()
            && self.w.is_finite()
    }

    /// Real coordinates `(Re α, Im α, Re β, Im β, w)`.
    pub fn to_real(&self) -> [f64; 5] {
        [self.alpha.re, self.alpha.im, self.beta.re, self.beta.im, self.w]
    }

    pub fn from_real(x: &[f64]) -> Self {
        SemiclassicalState {
            alpha: Complex64::new(x[0], x[1]),
            beta: Complex64::new(x[2], x[3]),
            w: x[4],
        }
    }
}

/// `|β|² + w²`; equals 1/4 on the maximal-spin sphere.
pub fn spin_norm(state: &SemiclassicalState) -> f64 {
    state.beta.norm_sqr() + state.w * state.w
}

/// Time derivative of the mean-field state.
pub fn rhs(s: &SemiclassicalState, m: &ModelParams) -> SemiclassicalState {
    let (a, b, w) = (s.alpha, s.beta, s.w);
    let (ac, bc) = (a.conj(), b.conj());
    let alpha = -m.kappa * a - I * m.omega * a - I * m.lambda_minus * b - I * m.lambda_plus * bc;
    let beta = -I * m.omega0 * b + 2.0 * I * m.lambda_minus * a * w + 2.0 * I * m.lambda_plus * ac * w;
    // iλ(z − z*) = −2λ Im z keeps the inversion rate real
    let w_dot = -2.0 * (m.lambda_minus * (ac * b).im + m.lambda_plus * (a * b).im);
    SemiclassicalState { alpha, beta, w: w_dot }
}

struct MeanField<'a>(&'a ModelParams);

impl OdeSystem for MeanField<'_> {
    type Item = f64;

    #[inline]
    fn eval(&self, _t: f64, y: &[f64], dydt: &mut [f64]) {
        let d = rhs(&SemiclassicalState::from_real(y), self.0);
        dydt.copy_from_slice(&d.to_real());
    }
}

pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Start state slightly displaced from `(0, 0, 1/2)` along the spin sphere.
///
/// Without a seed the displacement is real and positive on β; a seed draws
/// a uniformly random phase for β instead. `w = √(1/4 − ε²)` in both cases.
pub fn perturbed_initial(epsilon: f64, seed: Option<u64>) -> Result<SemiclassicalState> {
    if !(epsilon > 0.0 && epsilon < 1e-2) {
        return Err(Error::invalid("epsilon", format!("must lie in (0, 1e-2), got {epsilon}")));
    }
    let beta = match seed {
        None => Complex64::new(epsilon, 0.0),
        Some(seed) => {
            let phase: f64 = ChaCha8Rng::seed_from_u64(seed).random::<f64>() * std::f64::consts::TAU;
            Complex64::from_polar(epsilon, phase)
        }
    };
    Ok(SemiclassicalState { alpha: Complex64::default(), beta, w: (0.25 - epsilon * epsilon).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSettings {
    /// Integration horizon in seconds.
    pub horizon: f64,
    /// Output sample spacing in seconds.
    pub dt_sample: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        IntegrationSettings { horizon: 20e-3, dt_sample: 1e-6, rel_tol: 1e-8, abs_tol: 1e-10 }
    }
}

impl IntegrationSettings {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances { rel: self.rel_tol, abs: self.abs_tol }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if !(self.dt_sample > 0.0 && self.dt_sample <= self.horizon) {
            return Err(Error::invalid("dt_sample", format!("must lie in (0, horizon], got {}", self.dt_sample)));
        }
        self.tolerances().validate()
    }

    /// Number of samples so that the last one lies at or beyond the horizon.
    pub fn n_samples(&self) -> usize {
        (self.horizon / self.dt_sample - 1e-9).ceil() as usize + 1
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        IntegrationSettings { horizon, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<SemiclassicalState>,
    pub model: ModelParams,
    pub settings: IntegrationSettings,
    /// Largest `|spin_norm(t) − spin_norm(0)|` over the samples.
    pub max_norm_drift: f64,
    #[serde(skip)]
    pub stats: Stats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt_sample(&self) -> f64 {
        self.settings.dt_sample
    }

    pub fn final_state(&self) -> &SemiclassicalState {
        self.states.last().expect("trajectory has at least two samples")
    }

    pub fn photon_proxy(&self) -> Vec<f64> {
        self.states.iter().map(SemiclassicalState::photon_proxy).collect()
    }

    /// Text table with one row per sample. `w` is clamped to [−1/2, 1/2]
    /// for reporting only.
    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        table::write_preamble(&mut out, TableKind::Trajectory)?;
        writeln!(out, "{TRAJECTORY_HEADER}")?;
        for (t, s) in self.t.iter().zip(&self.states) {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                t,
                s.alpha.re,
                s.alpha.im,
                s.beta.re,
                s.beta.im,
                s.w.clamp(-0.5, 0.5),
                s.photon_proxy()
            )?;
        }
        Ok(())
    }

    /// Read a table written by [`Trajectory::write_table`]. The table carries
    /// no model, so the caller supplies it; the sample spacing is taken from
    /// the first two rows.
    pub fn load_table(path: &Path, model: ModelParams) -> Result<Trajectory> {
        let text = std::fs::read_to_string(path)?;
        let corrupt = |offset: usize, reason: String| Error::Corrupt { path: path.to_path_buf(), offset, reason };
        let mut offset = 0;
        let mut lines = text.split_inclusive('\n');
        let mut next = |what: &str| -> Result<(usize, &str)> {
            let line = lines.next().ok_or_else(|| corrupt(text.len(), format!("file ends before {what}")))?;
            let at = offset;
            offset += line.len();
            Ok((at, line.trim_end_matches(['\n', '\r'])))
        };
        let (_, first) = next("preamble")?;
        let version =
            table::parse_preamble(first, TableKind::Trajectory).ok_or_else(|| corrupt(0, "not a trajectory table".into()))?;
        table::check_version(version)?;
        let (at, header) = next("header")?;
        if header != TRAJECTORY_HEADER {
            return Err(corrupt(at, "unexpected header row".into()));
        }
        let (mut t, mut states) = (Vec::new(), Vec::new());
        while let Ok((at, line)) = next("row") {
            if line.is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| corrupt(at, format!("{e}")))?;
            if v.len() != 7 {
                return Err(corrupt(at, format!("expected 7 columns, found {}", v.len())));
            }
            t.push(v[0]);
            states.push(SemiclassicalState::new(Complex64::new(v[1], v[2]), Complex64::new(v[3], v[4]), v[5]));
        }
        if t.len() < 2 {
            return Err(Error::TooShort { needed: 2, available: t.len() });
        }
        let settings = IntegrationSettings { horizon: t[t.len() - 1] - t[0], dt_sample: t[1] - t[0], ..Default::default() };
        let norm0 = states[0].spin_norm();
        let max_norm_drift = states.iter().map(|s| (s.spin_norm() - norm0).abs()).fold(0.0, f64::max);
        Ok(Trajectory { t, states, model, settings, max_norm_drift, stats: Stats::default() })
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema_version: u32,
            kind: &'static str,
            #[serde(flatten)]
            trajectory: &'a Trajectory,
        }
        let doc = Doc { schema_version: table::SCHEMA_VERSION, kind: "trajectory", trajectory: self };
        serde_json::to_writer_pretty(out, &doc).map_err(|e| Error::Io(e.into()))
    }
}

/// Integrate the mean-field equations from `state0` and sample uniformly.
pub fn integrate(state0: &SemiclassicalState, model: &ModelParams, settings: &IntegrationSettings) -> Result<Trajectory> {
    model.validate()?;
    settings.validate()?;
    if !state0.is_finite() {
        return Err(Error::invalid("state0", "non-finite initial state"));
    }
    let n = settings.n_samples();
    let mut t = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let norm0 = state0.spin_norm();
    let mut drift: f64 = 0.0;
    let stats = integrate_sampled(
        &MeanField(model),
        &state0.to_real(),
        0.0,
        settings.dt_sample,
        n,
        settings.tolerances(),
        |_, ti, y| {
            let s = SemiclassicalState::from_real(y);
            if !s.is_finite() {
                return Err(Error::Divergence { t: ti });
            }
            drift = drift.max((s.spin_norm() - norm0).abs());
            t.push(ti);
            states.push(s);
            Ok(())
        },
    )?;
    Ok(Trajectory { t, states, model: *model, settings: *settings, max_norm_drift: drift, stats })
}
