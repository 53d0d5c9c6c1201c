//! Model parameters and the lab-frame calibration that produces them.
//!
//! [`ModelParams`] holds the rotating-frame numbers of the Hamiltonian
//! `H = ω a†a + ω₀ J_z + λ₋/√(2N) (a J₊ + a† J₋) + λ₊/√(2N) (a J₋ + a† J₊)`
//! together with the cavity field decay rate κ. [`PhysicalParams`] holds the
//! laboratory quantities (couplings, detunings, atom number) from which
//! [`derive_model_params`] computes them.
//!
//! All fields are angular frequencies in rad/s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::khz;

/// Largest `|δ±| / (2 ω_z)` for which the neglected Raman couplings are
/// considered far off resonance.
pub const RAMAN_VALIDITY_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Cavity detuning in the rotating frame.
    pub omega: f64,
    /// Effective Zeeman splitting; negative for the `|+1⟩` preparation.
    pub omega0: f64,
    /// Counter-rotating coupling (pairs `a†` with `J₊`).
    pub lambda_plus: f64,
    /// Co-rotating coupling (pairs `a†` with `J₋`).
    pub lambda_minus: f64,
    /// Cavity field decay rate (half-width).
    pub kappa: f64,
}

impl ModelParams {
    pub fn new(omega: f64, omega0: f64, lambda_plus: f64, lambda_minus: f64, kappa: f64) -> Result<Self> {
        let p = ModelParams { omega, omega0, lambda_plus, lambda_minus, kappa };
        p.validate()?;
        Ok(p)
    }

    /// Build from linear frequencies in kHz.
    pub fn from_khz(
        omega_khz: f64,
        omega0_khz: f64,
        lambda_plus_khz: f64,
        lambda_minus_khz: f64,
        kappa_khz: f64,
    ) -> Result<Self> {
        Self::new(
            khz(omega_khz),
            khz(omega0_khz),
            khz(lambda_plus_khz),
            khz(lambda_minus_khz),
            khz(kappa_khz),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega", self.omega),
            ("omega0", self.omega0),
            ("lambda_plus", self.lambda_plus),
            ("lambda_minus", self.lambda_minus),
            ("kappa", self.kappa),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(name, format!("non-finite value {v}")));
            }
        }
        if self.kappa <= 0.0 {
            return Err(Error::invalid("kappa", "must be positive"));
        }
        if self.lambda_plus < 0.0 {
            return Err(Error::invalid("lambda_plus", "must be non-negative"));
        }
        if self.lambda_minus < 0.0 {
            return Err(Error::invalid("lambda_minus", "must be non-negative"));
        }
        Ok(())
    }

    /// Same detunings and decay with new couplings.
    pub fn with_couplings(&self, lambda_plus: f64, lambda_minus: f64) -> Self {
        ModelParams { lambda_plus, lambda_minus, ..*self }
    }

    /// Couplings on the ray `λ₊/λ₋ = ratio` with `max(λ₊, λ₋) = lambda_max`.
    pub fn on_ray(&self, ratio: f64, lambda_max: f64) -> Self {
        let (lp, lm) = couplings_from_ratio(ratio, lambda_max);
        self.with_couplings(lp, lm)
    }

    /// Multiply every rate by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        ModelParams {
            omega: self.omega * s,
            omega0: self.omega0 * s,
            lambda_plus: self.lambda_plus * s,
            lambda_minus: self.lambda_minus * s,
            kappa: self.kappa * s,
        }
    }
}

/// Split `max(λ₊, λ₋)` and the ratio `λ₊/λ₋` into `(λ₊, λ₋)`.
///
/// Ratios up to 1 keep λ₋ at the maximum; above 1 λ₊ is the larger one.
pub fn couplings_from_ratio(ratio: f64, lambda_max: f64) -> (f64, f64) {
    if ratio <= 1.0 {
        (ratio * lambda_max, lambda_max)
    } else {
        (lambda_max, lambda_max / ratio)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Single-atom cavity coupling on the cycling transition.
    pub g: f64,
    /// Detuning of the cavity from the excited manifold (sign carrying).
    pub delta: f64,
    pub kappa: f64,
    /// Atomic dipole decay rate.
    pub gamma_a: f64,
    /// Zeeman splitting between neighbouring sub-levels.
    pub omega_z: f64,
    pub n_atoms: u64,
    /// Rabi couplings Ω± of the two drive lasers.
    pub rabi_plus: f64,
    pub rabi_minus: f64,
    /// Empty-cavity and laser frequencies, all relative to a common reference.
    pub omega_c: f64,
    pub omega_laser_plus: f64,
    pub omega_laser_minus: f64,
    /// Measured dispersive shift; replaces `(2/3) N g² / Δ` when set.
    pub omega_d_override: Option<f64>,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_atoms < 1 {
            return Err(Error::invalid("n_atoms", "must be at least 1"));
        }
        for (name, v) in [("g", self.g), ("kappa", self.kappa), ("gamma_a", self.gamma_a), ("omega_z", self.omega_z)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if self.delta == 0.0 {
            return Err(Error::Singular("detuning delta is zero"));
        }
        let rest = [
            ("delta", self.delta),
            ("rabi_plus", self.rabi_plus),
            ("rabi_minus", self.rabi_minus),
            ("omega_c", self.omega_c),
            ("omega_laser_plus", self.omega_laser_plus),
            ("omega_laser_minus", self.omega_laser_minus),
        ];
        for (name, v) in rest {
            if !v.is_finite() {
                return Err(Error::invalid(name, format!("non-finite value {v}")));
            }
        }
        Ok(())
    }
}

/// `ω_d = (2/3) N g² / Δ`; the sign follows Δ.
pub fn dispersive_shift_for(n_atoms: u64, g: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::Singular("detuning delta is zero"));
    }
    Ok(2.0 / 3.0 * n_atoms as f64 * g * g / delta)
}

pub fn dispersive_shift(phys: &PhysicalParams) -> Result<f64> {
    dispersive_shift_for(phys.n_atoms, phys.g, phys.delta)
}

/// Rotating-frame model parameters from lab-frame quantities.
///
/// `ω = ω_c − (ω₊+ω₋)/2 + ω_d`, `ω₀ = −(ω_z + (ω₊−ω₋)/2)` and
/// `λ± = |√(2N) g Ω± / (24 Δ)|`. The common sign of both couplings is a
/// gauge choice (`α → −α`) and is dropped.
pub fn derive_model_params(phys: &PhysicalParams) -> Result<ModelParams> {
    phys.validate()?;
    let omega_d = match phys.omega_d_override {
        Some(w) => w,
        None => dispersive_shift(phys)?,
    };
    let omega = phys.omega_c - 0.5 * (phys.omega_laser_plus + phys.omega_laser_minus) + omega_d;
    let omega0 = -(phys.omega_z + 0.5 * (phys.omega_laser_plus - phys.omega_laser_minus));
    let pref = (2.0 * phys.n_atoms as f64).sqrt() * phys.g / (24.0 * phys.delta);
    ModelParams::new(omega, omega0, (pref * phys.rabi_plus).abs(), (pref * phys.rabi_minus).abs(), phys.kappa)
}

/// Rabi coupling that produces the coupling `lambda` at the given atom number.
pub fn rabi_for_coupling(lambda: f64, n_atoms: u64, g: f64, delta: f64) -> Result<f64> {
    if g == 0.0 || n_atoms == 0 {
        return Err(Error::Singular("zero coupling g or atom number"));
    }
    Ok((lambda * 24.0 * delta / ((2.0 * n_atoms as f64).sqrt() * g)).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamanDetunings {
    pub delta_plus: f64,
    pub delta_minus: f64,
    /// `max |δ±| < 0.1 · 2ω_z`; outside this the neglected couplings matter.
    pub valid: bool,
}

/// Dispersively corrected laser detunings `δ± = −(ω ± ω₀)`.
pub fn raman_detunings(model: &ModelParams, omega_z: f64) -> RamanDetunings {
    let delta_plus = -(model.omega + model.omega0);
    let delta_minus = -(model.omega - model.omega0);
    let worst = delta_plus.abs().max(delta_minus.abs());
    RamanDetunings {
        delta_plus,
        delta_minus,
        valid: worst < RAMAN_VALIDITY_RATIO * 2.0 * omega_z.abs(),
    }
}

/// Single-atom cooperativity `C = g² / (κ γ_a)`.
pub fn cooperativity(g: f64, kappa: f64, gamma_a: f64) -> Result<f64> {
    if kappa == 0.0 || gamma_a == 0.0 {
        return Err(Error::Singular("zero kappa or gamma_a in cooperativity"));
    }
    Ok(g * g / (kappa * gamma_a))
}

/// Spontaneous emission rate per beam, `γ_s = 96 λ² / (N C κ)`, in 1/s.
pub fn spontaneous_emission_rate(lambda: f64, n_atoms: u64, cooperativity: f64, kappa: f64) -> Result<f64> {
    if n_atoms == 0 || cooperativity == 0.0 || kappa == 0.0 {
        return Err(Error::Singular("zero denominator in spontaneous emission rate"));
    }
    Ok(96.0 * lambda * lambda / (n_atoms as f64 * cooperativity * kappa))
}

/// Everything the `calibrate` command reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub model: ModelParams,
    pub omega_d: f64,
    pub detunings: RamanDetunings,
    pub cooperativity: f64,
    pub gamma_s_plus: f64,
    pub gamma_s_minus: f64,
}

pub fn calibrate(phys: &PhysicalParams) -> Result<Calibration> {
    let model = derive_model_params(phys)?;
    let omega_d = match phys.omega_d_override {
        Some(w) => w,
        None => dispersive_shift(phys)?,
    };
    let c = cooperativity(phys.g, phys.kappa, phys.gamma_a)?;
    Ok(Calibration {
        model,
        omega_d,
        detunings: raman_detunings(&model, phys.omega_z),
        cooperativity: c,
        gamma_s_plus: spontaneous_emission_rate(model.lambda_plus, phys.n_atoms, c, phys.kappa)?,
        gamma_s_minus: spontaneous_emission_rate(model.lambda_minus, phys.n_atoms, c, phys.kappa)?,
    })
}
