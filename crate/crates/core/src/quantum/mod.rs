//! Lindblad master equation for a few atoms in the maximal spin multiplet
//! coupled to a truncated cavity mode:
//!
//! ```text
//! ρ̇ = −i[H, ρ] + κ(2aρa† − a†aρ − ρa†a)
//! ```
//!
//! Used as a finite-N reference for the mean-field factorization.

mod compare;
mod operators;

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::ode::{integrate_sampled, OdeSystem, Stats, Tolerances};
use crate::table::{self, TableKind};

pub use compare::{compare, default_fock_cutoff, CompareRow, CompareSettings, ComparisonReport};
pub use operators::{
    annihilation, build_hamiltonian, full_operators, spin_matrices, FullOperators, HilbertSpec, SparseMatrix,
    MAX_ATOMS, MAX_DIM, MIN_FOCK,
};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Density matrix on a [`HilbertSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub spec: HilbertSpec,
    pub rho: DMatrix<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityCheck {
    /// Largest `|ρ_ij − ρ_ji*|`.
    pub hermiticity: f64,
    /// `|Tr ρ − 1|`
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-8;

impl DensityCheck {
    pub fn holds(&self) -> bool {
        self.hermiticity <= HERMITICITY_TOL && self.trace_error <= TRACE_TOL && self.min_eigenvalue >= -POSITIVITY_TOL
    }
}

impl DensityState {
    /// `|J = N, m = N⟩ ⊗ |0⟩`: every atom in the upper state, empty cavity.
    pub fn spin_up_vacuum(spec: HilbertSpec) -> Result<Self> {
        let mut amp = vec![ZERO; spec.dim()];
        amp[0] = Complex64::new(1.0, 0.0);
        Self::from_pure(spec, &amp)
    }

    /// `|ψ⟩⟨ψ|` for a normalized amplitude vector.
    pub fn from_pure(spec: HilbertSpec, amp: &[Complex64]) -> Result<Self> {
        spec.validate()?;
        if amp.len() != spec.dim() {
            return Err(Error::invalid("amplitudes", format!("expected {} entries, got {}", spec.dim(), amp.len())));
        }
        let norm: f64 = amp.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("amplitudes", format!("state is not normalized (norm² = {norm})")));
        }
        let d = spec.dim();
        let rho = DMatrix::from_fn(d, d, |i, j| amp[i] * amp[j].conj());
        Ok(DensityState { spec, rho })
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn check(&self) -> DensityCheck {
        let d = self.spec.dim();
        let mut herm: f64 = 0.0;
        for j in 0..d {
            for i in 0..=j {
                herm = herm.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        // real symmetric embedding [[Re, −Im], [Im, Re]] of the Hermitian
        // part; it has the same eigenvalues, each twice
        let embed = DMatrix::from_fn(2 * d, 2 * d, |i, j| {
            let z = 0.5 * (self.rho[(i % d, j % d)] + self.rho[(j % d, i % d)].conj());
            match (i < d, j < d) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        let eig = embed.symmetric_eigenvalues();
        let min_eigenvalue = if eig.iter().all(|x| x.is_finite()) { eig.min() } else { f64::NAN };
        DensityCheck { hermiticity: herm, trace_error: (self.trace() - 1.0).norm(), min_eigenvalue }
    }

    /// Population of the highest Fock level.
    pub fn top_fock_population(&self) -> f64 {
        top_population(&self.spec, self.rho.as_slice())
    }
}

fn top_population(spec: &HilbertSpec, rho: &[Complex64]) -> f64 {
    let d = spec.dim();
    (0..spec.spin_dim()).map(|s| rho[idx_top(spec, s) * (d + 1)].re).sum()
}

fn idx_top(spec: &HilbertSpec, spin_block: usize) -> usize {
    spin_block * spec.fock_dim() + spec.n_max as usize
}

/// Parse a pure initial state given as a JSON list of `[index, re, im]`
/// triples; unlisted amplitudes are zero. The norm must be within 1e-6 of
/// one and is then made exact.
pub fn parse_initial_state(json: &str, spec: HilbertSpec) -> Result<DensityState> {
    spec.validate()?;
    let triples: Vec<(usize, f64, f64)> =
        serde_json::from_str(json).map_err(|e| Error::Config(format!("initial state: {e}")))?;
    let mut amp = vec![ZERO; spec.dim()];
    let mut seen = vec![false; spec.dim()];
    for (idx, re, im) in triples {
        if idx >= spec.dim() {
            return Err(Error::invalid("initial state", format!("index {idx} outside dimension {}", spec.dim())));
        }
        if seen[idx] {
            return Err(Error::invalid("initial state", format!("index {idx} listed twice")));
        }
        if !(re.is_finite() && im.is_finite()) {
            return Err(Error::invalid("initial state", format!("non-finite amplitude at index {idx}")));
        }
        seen[idx] = true;
        amp[idx] = Complex64::new(re, im);
    }
    let norm: f64 = amp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::invalid("initial state", format!("norm {norm} differs from 1 by more than 1e-6")));
    }
    for z in &mut amp {
        *z /= norm;
    }
    DensityState::from_pure(spec, &amp)
}

/// `√(n+1)` for each basis index, 0 at the truncation edge: the nonzero
/// entries `a_{i,i+1}`.
fn ladder_weights(spec: &HilbertSpec) -> Vec<f64> {
    (0..spec.dim())
        .map(|i| {
            let (_, n) = spec.decode(i);
            if n < spec.n_max {
                (n as f64 + 1.0).sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

struct Lindblad<'a> {
    h: &'a SparseMatrix,
    kappa: f64,
    ladder: Vec<f64>,
    number: Vec<f64>,
}

impl<'a> Lindblad<'a> {
    fn new(spec: &HilbertSpec, h: &'a SparseMatrix, kappa: f64) -> Self {
        let number = (0..spec.dim()).map(|i| spec.decode(i).1 as f64).collect();
        Lindblad { h, kappa, ladder: ladder_weights(spec), number }
    }

    /// Column-major Hermitian `ρ` in, `ρ̇` out. Only the upper triangle is
    /// evaluated; the lower one is its mirror, so the output is exactly
    /// Hermitian.
    fn apply(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.h.dim();
        for j in 0..d {
            let col = &mut out[j * d..=j * d + j];
            let rho_j = &rho[j * d..(j + 1) * d];
            // −iHρ, column j
            for (i, o) in col.iter_mut().enumerate() {
                let mut acc = ZERO;
                for (k, h) in self.h.row(i) {
                    acc += rho_j[k] * h;
                }
                *o = -I * acc;
            }
            // +iρH, column j = Σ_k H_kj ρ[:, k]; H is real symmetric
            for (k, h) in self.h.row(j) {
                let ih = I * h;
                for (o, r) in col.iter_mut().zip(&rho[k * d..(k + 1) * d]) {
                    *o += ih * r;
                }
            }
            // κ(2aρa† − a†aρ − ρa†a)
            let (nj, sj) = (self.number[j], self.ladder[j]);
            for (i, o) in col.iter_mut().enumerate() {
                let mut v = -(self.number[i] + nj) * rho_j[i];
                if sj != 0.0 && self.ladder[i] != 0.0 {
                    v += 2.0 * self.ladder[i] * sj * rho[(j + 1) * d + i + 1];
                }
                *o += self.kappa * v;
            }
        }
        for j in 0..d {
            out[j * d + j].im = 0.0;
            for i in 0..j {
                out[i * d + j] = out[j * d + i].conj();
            }
        }
    }
}

impl OdeSystem for Lindblad<'_> {
    type Item = Complex64;

    fn eval(&self, _t: f64, y: &[Complex64], dydt: &mut [Complex64]) {
        self.apply(y, dydt);
    }
}

/// `ρ̇` for a given Hamiltonian and field decay rate.
pub fn lindblad_rhs(rho: &DensityState, h: &SparseMatrix, kappa: f64) -> DMatrix<Complex64> {
    assert_eq!(h.dim(), rho.spec.dim(), "Hamiltonian and state dimensions differ");
    let d = h.dim();
    let mut out = DMatrix::from_element(d, d, ZERO);
    Lindblad::new(&rho.spec, h, kappa).apply(rho.rho.as_slice(), out.as_mut_slice());
    out
}

/// Expectation values of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectations {
    pub a: Complex64,
    pub jm: Complex64,
    pub jz: f64,
    pub n: f64,
    pub j2: f64,
}

fn expectations(spec: &HilbertSpec, ladder: &[f64], rho: &[Complex64]) -> Expectations {
    let d = spec.dim();
    let big_j = spec.spin();
    let f = spec.fock_dim();
    let at = |i: usize, j: usize| rho[j * d + i];
    let mut e = Expectations { a: ZERO, jm: ZERO, jz: 0.0, n: 0.0, j2: 0.0 };
    for i in 0..d {
        let (m, n) = spec.decode(i);
        let p = at(i, i).re;
        let mf = m as f64;
        e.jz += mf * p;
        e.n += n as f64 * p;
        // J² = Jz² + (J₊J₋ + J₋J₊)/2 from the ladder coefficients
        let down = big_j * (big_j + 1.0) - mf * (mf - 1.0);
        let up = big_j * (big_j + 1.0) - mf * (mf + 1.0);
        e.j2 += (mf * mf + 0.5 * (down + up)) * p;
        // Tr(aρ) = Σ a_{i,i+1} ρ_{i+1,i}
        if ladder[i] != 0.0 {
            e.a += ladder[i] * at(i + 1, i);
        }
        // Tr(J₋ρ) = Σ (J₋)_{r,i} ρ_{i,r} with r the |m−1, n⟩ index
        if m > -(spec.n_atoms as i32) {
            e.jm += down.sqrt() * at(i, i + f);
        }
    }
    e
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumSettings {
    pub horizon: f64,
    pub dt_sample: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the top Fock level population.
    pub max_top_population: f64,
    /// Check Hermiticity, trace and positivity at every sample.
    pub check_invariants: bool,
}

impl Default for QuantumSettings {
    fn default() -> Self {
        QuantumSettings {
            horizon: 100e-6,
            dt_sample: 0.5e-6,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_top_population: 1e-4,
            check_invariants: true,
        }
    }
}

impl QuantumSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        if !(self.dt_sample > 0.0 && self.dt_sample <= self.horizon) {
            return Err(Error::invalid("dt_sample", "must lie in (0, horizon]"));
        }
        if !(self.max_top_population > 0.0) {
            return Err(Error::invalid("max_top_population", "must be positive"));
        }
        Tolerances { rel: self.rel_tol, abs: self.abs_tol }.validate()
    }

    pub fn n_samples(&self) -> usize {
        (self.horizon / self.dt_sample - 1e-9).ceil() as usize + 1
    }
}

/// Worst invariant values seen along an evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantLog {
    pub max_hermiticity: f64,
    pub max_trace_error: f64,
    pub min_eigenvalue: f64,
    /// Largest `|⟨J²⟩ − N(N+1)|`.
    pub max_j2_drift: f64,
    pub max_top_population: f64,
}

impl InvariantLog {
    pub fn holds(&self) -> bool {
        DensityCheck {
            hermiticity: self.max_hermiticity,
            trace_error: self.max_trace_error,
            min_eigenvalue: self.min_eigenvalue,
        }
        .holds()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationSeries {
    pub spec: HilbertSpec,
    pub t: Vec<f64>,
    pub exp_a: Vec<Complex64>,
    pub exp_jm: Vec<Complex64>,
    pub exp_jz: Vec<f64>,
    pub exp_n: Vec<f64>,
    pub exp_j2: Vec<f64>,
    pub invariants: InvariantLog,
    pub final_state: DensityState,
    pub stats: Stats,
}

impl ExpectationSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn two_n(&self) -> f64 {
        2.0 * self.spec.n_atoms as f64
    }

    /// `⟨a⟩/√(2N)`
    pub fn alpha(&self) -> Vec<Complex64> {
        let s = self.two_n().sqrt();
        self.exp_a.iter().map(|a| a / s).collect()
    }

    /// `⟨J₋⟩/(2N)`
    pub fn beta(&self) -> Vec<Complex64> {
        self.exp_jm.iter().map(|b| b / self.two_n()).collect()
    }

    /// `⟨Jz⟩/(2N)`
    pub fn w(&self) -> Vec<f64> {
        self.exp_jz.iter().map(|z| z / self.two_n()).collect()
    }

    /// `⟨a†a⟩/(2N)`, the counterpart of the mean-field `|α|²`.
    pub fn scaled_photons(&self) -> Vec<f64> {
        self.exp_n.iter().map(|n| n / self.two_n()).collect()
    }

    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        table::write_preamble(&mut out, TableKind::Expectation)?;
        writeln!(out, "t_s,re_alpha,im_alpha,re_beta,im_beta,w,n_photon")?;
        let (alpha, beta, w) = (self.alpha(), self.beta(), self.w());
        for k in 0..self.len() {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                self.t[k], alpha[k].re, alpha[k].im, beta[k].re, beta[k].im, w[k], self.exp_n[k]
            )?;
        }
        Ok(())
    }
}

/// Integrate the master equation from `rho0`, sampling expectations.
///
/// Fails with [`Error::TruncationOverflow`] at the first sample whose top
/// Fock level holds more than `max_top_population`.
pub fn evolve_density(rho0: &DensityState, m: &ModelParams, settings: &QuantumSettings) -> Result<ExpectationSeries> {
    settings.validate()?;
    m.validate()?;
    let spec = rho0.spec;
    let h = build_hamiltonian(m, &spec)?;
    let sys = Lindblad::new(&spec, &h, m.kappa);
    let n = settings.n_samples();
    let big_j = spec.spin();
    let j2_exact = big_j * (big_j + 1.0);
    let d = spec.dim();

    let mut series = ExpectationSeries {
        spec,
        t: Vec::with_capacity(n),
        exp_a: Vec::with_capacity(n),
        exp_jm: Vec::with_capacity(n),
        exp_jz: Vec::with_capacity(n),
        exp_n: Vec::with_capacity(n),
        exp_j2: Vec::with_capacity(n),
        invariants: InvariantLog {
            max_hermiticity: 0.0,
            max_trace_error: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_j2_drift: 0.0,
            max_top_population: 0.0,
        },
        final_state: rho0.clone(),
        stats: Stats::default(),
    };
    let tol = Tolerances { rel: settings.rel_tol, abs: settings.abs_tol };
    let mut last = Vec::new();
    let stats = integrate_sampled(&sys, rho0.rho.as_slice(), 0.0, settings.dt_sample, n, tol, |k, t, y| {
        let top = top_population(&spec, y);
        let log = &mut series.invariants;
        log.max_top_population = log.max_top_population.max(top);
        if top > settings.max_top_population {
            return Err(Error::TruncationOverflow { t, population: top });
        }
        let e = expectations(&spec, &sys.ladder, y);
        log.max_j2_drift = log.max_j2_drift.max((e.j2 - j2_exact).abs());
        if settings.check_invariants {
            let state = DensityState { spec, rho: DMatrix::from_column_slice(d, d, y) };
            let c = state.check();
            log.max_hermiticity = log.max_hermiticity.max(c.hermiticity);
            log.max_trace_error = log.max_trace_error.max(c.trace_error);
            log.min_eigenvalue = log.min_eigenvalue.min(c.min_eigenvalue);
        }
        series.t.push(t);
        series.exp_a.push(e.a);
        series.exp_jm.push(e.jm);
        series.exp_jz.push(e.jz);
        series.exp_n.push(e.n);
        series.exp_j2.push(e.j2);
        if k + 1 == n {
            last = y.to_vec();
        }
        Ok(())
    })?;
    series.final_state = DensityState { spec, rho: DMatrix::from_column_slice(d, d, &last) };
    series.stats = stats;
    Ok(series)
}

/// Largest deviation between two runs of the same evolution at different
/// truncations, relative to the largest magnitude of each expectation.
pub fn truncation_deviation(a: &ExpectationSeries, b: &ExpectationSeries) -> f64 {
    fn rel(x: impl Iterator<Item = f64> + Clone, y: impl Iterator<Item = f64>) -> f64 {
        let scale = x.clone().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return x.zip(y).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        }
        x.zip(y).fold(0.0f64, |m, (p, q)| m.max((p - q).abs() / scale))
    }
    let na = |s: &ExpectationSeries| s.exp_a.iter().map(|z| z.norm()).collect::<Vec<_>>();
    let nb = |s: &ExpectationSeries| s.exp_jm.iter().map(|z| z.norm()).collect::<Vec<_>>();
    let (aa, ab) = (na(a), na(b));
    let (ja, jb) = (nb(a), nb(b));
    [
        rel(aa.iter().copied(), ab.iter().copied()),
        rel(ja.iter().copied(), jb.iter().copied()),
        rel(a.exp_jz.iter().copied(), b.exp_jz.iter().copied()),
        rel(a.exp_n.iter().copied(), b.exp_n.iter().copied()),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests;
