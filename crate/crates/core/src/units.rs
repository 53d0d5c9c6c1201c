//! Frequency conventions.
//!
//! Every file and command-line interface exchanges *linear* frequencies in
//! kHz. Internally all arithmetic uses angular frequencies in rad/s, so a
//! value quoted as `2π × 100 kHz` enters as `100.0` and becomes
//! `to_angular(100.0) = 6.283e5 rad/s`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

const HZ_PER_KHZ: f64 = 1.0e3;

/// Linear frequency in kHz to angular frequency in rad/s.
pub fn to_angular(nu_khz: f64) -> Result<f64> {
    if !nu_khz.is_finite() {
        return Err(Error::invalid("nu_khz", format!("non-finite value {nu_khz}")));
    }
    Ok(TAU * HZ_PER_KHZ * nu_khz)
}

/// Angular frequency in rad/s to linear frequency in kHz.
pub fn to_khz(omega: f64) -> Result<f64> {
    if !omega.is_finite() {
        return Err(Error::invalid("omega", format!("non-finite value {omega}")));
    }
    Ok(omega / (TAU * HZ_PER_KHZ))
}

/// Infallible conversion for values already known to be finite.
pub(crate) fn khz(nu_khz: f64) -> f64 {
    TAU * HZ_PER_KHZ * nu_khz
}

pub(crate) fn as_khz(omega: f64) -> f64 {
    omega / (TAU * HZ_PER_KHZ)
}
