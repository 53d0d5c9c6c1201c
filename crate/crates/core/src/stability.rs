//! Linear stability of the trivial fixed points and the boundaries where
//! they lose it.
//!
//! In real coordinates `(Re α, Im α, Re β, Im β, w)` the inversion enters the
//! linearization only through its fixed value `w₀ = ±1/2`; the `w` row and
//! column vanish, leaving one structural zero eigenvalue (the direction of
//! the conserved spin norm) which is excluded from the growth rate.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{Matrix5, Schur};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::semiclassical::SemiclassicalState;
use crate::table::{self, TableKind};
use crate::units;

/// Bisection tolerance on `λ_max` (rad/s).
pub const DEFAULT_BISECT_TOL: f64 = std::f64::consts::TAU * 10.0;

/// Eigenvalues smaller than this multiple of `κ` count as the structural zero.
pub const STRUCTURAL_ZERO: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FixedPointKind {
    /// `w = +1/2`
    NormalTrivial,
    /// `w = −1/2`
    InvertedTrivial,
}

impl FixedPointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FixedPointKind::NormalTrivial => "normal",
            FixedPointKind::InvertedTrivial => "inverted",
        }
    }

    pub fn w(self) -> f64 {
        match self {
            FixedPointKind::NormalTrivial => 0.5,
            FixedPointKind::InvertedTrivial => -0.5,
        }
    }
}

impl fmt::Display for FixedPointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FixedPointKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(FixedPointKind::NormalTrivial),
            "inverted" => Ok(FixedPointKind::InvertedTrivial),
            _ => Err(Error::invalid("fixed_point", format!("expected `normal` or `inverted`, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub state: SemiclassicalState,
    pub kind: FixedPointKind,
}

impl FixedPoint {
    pub fn new(kind: FixedPointKind) -> Self {
        FixedPoint { state: SemiclassicalState::new(Default::default(), Default::default(), kind.w()), kind }
    }

    pub fn normal() -> Self {
        Self::new(FixedPointKind::NormalTrivial)
    }

    pub fn inverted() -> Self {
        Self::new(FixedPointKind::InvertedTrivial)
    }
}

/// Jacobian of the real-coordinate flow at a trivial fixed point (1/s).
pub fn jacobian_at(fp: &FixedPoint, m: &ModelParams) -> Matrix5<f64> {
    let w0 = fp.state.w;
    let (lp, lm) = (m.lambda_plus, m.lambda_minus);
    #[rustfmt::skip]
    let j = Matrix5::new(
        -m.kappa,           m.omega,             0.0,        lm - lp,  0.0,
        -m.omega,           -m.kappa,            -(lm + lp), 0.0,      0.0,
        0.0,                2.0 * w0 * (lp - lm), 0.0,        m.omega0, 0.0,
        2.0 * w0 * (lm + lp), 0.0,                -m.omega0,  0.0,      0.0,
        0.0,                0.0,                 0.0,        0.0,      0.0,
    );
    j
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// All five eigenvalues, including the structural zero (1/s).
    pub eigenvalues: Vec<Complex64>,
    /// Largest real part among the non-structural eigenvalues (1/s).
    pub max_growth: f64,
    pub stable: bool,
}

/// Eigenvalues of the linearization and the resulting growth rate.
///
/// The pair `±iω₀` is exactly neutral when both couplings vanish, so an
/// undriven fixed point reports `max_growth = 0` and is not stable.
pub fn max_growth_rate(fp: &FixedPoint, m: &ModelParams) -> Result<StabilityReport> {
    m.validate()?;
    let j = jacobian_at(fp, m);
    let schur = Schur::try_new(j, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen { rows: 5, cols: 5, matrix: j.transpose().as_slice().to_vec() })?;
    let eigenvalues: Vec<Complex64> =
        schur.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect();

    let (structural, smallest) = eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, z)| (i, z.norm()))
        .expect("five eigenvalues");
    if smallest >= STRUCTURAL_ZERO * m.kappa {
        return Err(Error::Eigen { rows: 5, cols: 5, matrix: j.transpose().as_slice().to_vec() });
    }
    let max_growth = eigenvalues
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != structural)
        .map(|(_, z)| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(StabilityReport { eigenvalues, max_growth, stable: max_growth < 0.0 })
}

/// Growth rates this far below the Jacobian scale are treated as zero.
const GROWTH_FLOOR: f64 = 1e-12;

fn unstable_on_ray(fp: &FixedPoint, template: &ModelParams, ratio: f64, lambda_max: f64) -> Result<bool> {
    let m = template.on_ray(ratio, lambda_max);
    let r = max_growth_rate(fp, &m)?;
    let scale = m.kappa + m.omega.abs() + m.omega0.abs() + m.lambda_plus + m.lambda_minus;
    Ok(r.max_growth > GROWTH_FLOOR * scale)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    /// Critical `max(λ₊, λ₋)` (rad/s).
    pub lambda_star: f64,
    pub iterations: u32,
}

/// Bisect for the coupling at which `fp` changes stability along the ray
/// `λ₊/λ₋ = ratio`.
///
/// Returns `None` when both ends of the bracket have the same stability.
pub fn boundary_bisect(
    fp: &FixedPoint,
    template: &ModelParams,
    ratio: f64,
    bracket: (f64, f64),
    tol: f64,
) -> Result<Option<Threshold>> {
    let (mut lo, mut hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
        return Err(Error::InvalidBracket { lo, hi });
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if !(ratio.is_finite() && ratio >= 0.0) {
        return Err(Error::invalid("ratio", format!("must be finite and non-negative, got {ratio}")));
    }
    let lo_unstable = unstable_on_ray(fp, template, ratio, lo)?;
    if lo_unstable == unstable_on_ray(fp, template, ratio, hi)? {
        return Ok(None);
    }
    let mut iterations = 0;
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if unstable_on_ray(fp, template, ratio, mid)? == lo_unstable {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(Some(Threshold { lambda_star: 0.5 * (lo + hi), iterations }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoundaryStatus {
    Converged,
    NoSignChange,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub ratio: f64,
    /// rad/s
    pub lambda_star: Option<f64>,
    pub status: BoundaryStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub kind: FixedPointKind,
    pub points: Vec<BoundaryPoint>,
}

impl BoundaryCurve {
    pub fn ratios(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.ratio).collect()
    }

    pub fn thresholds(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.lambda_star).collect()
    }

    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        table::write_preamble(&mut out, TableKind::Boundary)?;
        writeln!(out, "ratio,lambda_star_khz,fixed_point_kind,converged")?;
        for p in &self.points {
            let lambda = p.lambda_star.map(units::as_khz);
            writeln!(
                out,
                "{},{},{},{}",
                p.ratio,
                table::opt(lambda),
                self.kind,
                p.status == BoundaryStatus::Converged
            )?;
        }
        Ok(())
    }
}

/// Thresholds for each ratio, computed independently and in input order.
/// A failure at one ratio is recorded there and does not stop the others.
pub fn trace_boundary(
    fp: &FixedPoint,
    template: &ModelParams,
    ratios: &[f64],
    bracket: (f64, f64),
    tol: f64,
) -> BoundaryCurve {
    let points = ratios
        .par_iter()
        .map(|&ratio| match boundary_bisect(fp, template, ratio, bracket, tol) {
            Ok(Some(t)) => BoundaryPoint { ratio, lambda_star: Some(t.lambda_star), status: BoundaryStatus::Converged },
            Ok(None) => BoundaryPoint { ratio, lambda_star: None, status: BoundaryStatus::NoSignChange },
            Err(e) => BoundaryPoint { ratio, lambda_star: None, status: BoundaryStatus::Failed(e.to_string()) },
        })
        .collect();
    BoundaryCurve { kind: fp.kind, points }
}
