//! Phase assignment from the tail of a trajectory.
//!
//! The cavity output is represented by `|α(t)|²`. Over a trailing window the
//! classifier looks at its mean (is there any output?), its relative
//! standard deviation (is it steady?) and its power spectrum (is there a
//! dominant oscillation frequency?), and combines them in a fixed cascade:
//!
//! 1. mean below `eps_triv`: a trivial state, `Normal` or `Inverted` by the
//!    sign of the final inversion, `Unresolved` if only partially polarized;
//! 2. a dominant spectral peak and `rel_std > osc_std_min`: `Oscillatory`;
//! 3. `rel_std < sr_std_max`: `Superradiant`;
//! 4. otherwise `Unresolved`.
//!
//! Oscillations that decay before the window starts therefore count as
//! superradiant; shortening the horizon moves the window onto the transient.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semiclassical::Trajectory;
use crate::table::{self, TableKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseLabel {
    Normal,
    Inverted,
    Superradiant,
    Oscillatory,
    Unresolved,
}

impl PhaseLabel {
    pub const ALL: [PhaseLabel; 5] = [
        PhaseLabel::Normal,
        PhaseLabel::Inverted,
        PhaseLabel::Superradiant,
        PhaseLabel::Oscillatory,
        PhaseLabel::Unresolved,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseLabel::Normal => "normal",
            PhaseLabel::Inverted => "inverted",
            PhaseLabel::Superradiant => "superradiant",
            PhaseLabel::Oscillatory => "oscillatory",
            PhaseLabel::Unresolved => "unresolved",
        }
    }

    /// Trivial states have no cavity output.
    pub fn is_trivial(self) -> bool {
        matches!(self, PhaseLabel::Normal | PhaseLabel::Inverted)
    }

    pub fn is_radiant(self) -> bool {
        matches!(self, PhaseLabel::Superradiant | PhaseLabel::Oscillatory)
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhaseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PhaseLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::invalid("label", format!("unknown phase label `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Mean `|α|²` below which the output counts as zero.
    pub eps_triv: f64,
    pub osc_std_min: f64,
    pub sr_std_max: f64,
    /// Minimum ratio of peak power to the median power above `f_min_hz`.
    pub prominence_min: f64,
    pub f_min_hz: f64,
    pub window_fraction: f64,
    /// `|w_final|` needed to call a trivial state polarized.
    pub w_polarized: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            eps_triv: 1e-6,
            osc_std_min: 0.02,
            sr_std_max: 0.02,
            prominence_min: 10.0,
            f_min_hz: 1e3,
            window_fraction: 0.25,
            w_polarized: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub label: PhaseLabel,
    /// Window mean of `|α|²`.
    pub mean_photon_proxy: f64,
    /// Window standard deviation of `|α|²` over its mean; 0 when the mean is 0.
    pub rel_std: f64,
    pub w_final: f64,
    /// Frequency of the dominant output oscillation (kHz), oscillatory only.
    pub peak_freq_khz: Option<f64>,
    pub peak_prominence: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub mean: f64,
    pub rel_std: f64,
    pub mean_w: f64,
}

pub const MIN_WINDOW_SAMPLES: usize = 64;
pub const MIN_SPECTRUM_SAMPLES: usize = 256;

fn window_len(total: usize, window_fraction: f64) -> Result<usize> {
    if !(window_fraction > 0.0 && window_fraction <= 0.5) {
        return Err(Error::invalid("window_fraction", format!("must lie in (0, 0.5], got {window_fraction}")));
    }
    Ok(((total as f64) * window_fraction).round() as usize)
}

/// Mean and relative spread of a series; `rel_std` is 0 for a zero mean.
pub fn series_stats(series: &[f64]) -> (f64, f64) {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return (0.0, 0.0);
    }
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt() / mean.abs())
}

/// Statistics of `|α|²` and `w` over the trailing `window_fraction`.
pub fn steady_window_stats(traj: &Trajectory, window_fraction: f64) -> Result<WindowStats> {
    let m = window_len(traj.len(), window_fraction)?;
    if m < MIN_WINDOW_SAMPLES {
        return Err(Error::TooShort { needed: MIN_WINDOW_SAMPLES, available: m });
    }
    let tail = &traj.states[traj.len() - m..];
    let proxy: Vec<f64> = tail.iter().map(|s| s.photon_proxy()).collect();
    let (mean, rel_std) = series_stats(&proxy);
    let mean_w = tail.iter().map(|s| s.w).sum::<f64>() / m as f64;
    Ok(WindowStats { mean, rel_std, mean_w })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Bin frequencies from 0 to Nyquist (Hz).
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    /// Length of each transformed segment (s).
    pub window_length: f64,
}

impl Spectrum {
    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        table::write_preamble(&mut out, TableKind::Spectrum)?;
        writeln!(out, "freq_hz,power")?;
        for (f, p) in self.freqs.iter().zip(&self.power) {
            writeln!(out, "{f},{p:e}")?;
        }
        Ok(())
    }
}

/// Number of half-overlapping segments averaged into each spectrum.
pub const SPECTRUM_SEGMENTS: usize = 3;

/// Averaged power spectrum of uniformly sampled data.
///
/// The series is cut into three half-overlapping segments of half its
/// length. Each segment has its Hann-weighted mean removed (so the DC bin
/// vanishes), is Hann windowed and transformed; the squared magnitudes are
/// averaged. Averaging keeps the ratio of the largest to the median bin of
/// broadband noise small, so a prominence test is meaningful.
pub fn power_spectrum(series: &[f64], dt: f64) -> Result<Spectrum> {
    if series.len() < MIN_SPECTRUM_SAMPLES {
        return Err(Error::TooShort { needed: MIN_SPECTRUM_SAMPLES, available: series.len() });
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "sample spacing must be positive"));
    }
    let seg = series.len() / 2;
    let hop = seg / 2;
    let window: Vec<f64> = (0..seg)
        .map(|n| 0.5 - 0.5 * (std::f64::consts::TAU * n as f64 / seg as f64).cos())
        .collect();
    let w_sum: f64 = window.iter().sum();
    let w_sq: f64 = window.iter().map(|w| w * w).sum();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let bins = seg / 2 + 1;
    let mut power = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); seg];
    for s in 0..SPECTRUM_SEGMENTS {
        let chunk = &series[s * hop..s * hop + seg];
        let mean = chunk.iter().zip(&window).map(|(x, w)| x * w).sum::<f64>() / w_sum;
        for ((b, x), w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (p, b) in power.iter_mut().zip(&buf) {
            *p += b.norm_sqr() / w_sq;
        }
    }
    for p in &mut power {
        *p /= SPECTRUM_SEGMENTS as f64;
    }
    let window_length = seg as f64 * dt;
    let freqs = (0..bins).map(|k| k as f64 / window_length).collect();
    Ok(Spectrum { freqs, power, window_length })
}

fn uniform_spacing(traj: &Trajectory, from: usize) -> Result<()> {
    let dt = traj.dt_sample();
    let worst = traj.t[from..]
        .windows(2)
        .map(|p| ((p[1] - p[0]) - dt).abs() / dt)
        .fold(0.0f64, f64::max);
    if worst > 1e-6 {
        return Err(Error::NonUniform { deviation: worst });
    }
    Ok(())
}

/// Power spectrum of `|α(t)|²` over the trailing window.
pub fn oscillation_spectrum(traj: &Trajectory, window_fraction: f64) -> Result<Spectrum> {
    let m = window_len(traj.len(), window_fraction)?;
    let from = traj.len() - m;
    uniform_spacing(traj, from)?;
    let proxy: Vec<f64> = traj.states[from..].iter().map(|s| s.photon_proxy()).collect();
    power_spectrum(&proxy, traj.dt_sample())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub freq_hz: f64,
    pub power: f64,
    /// Peak power over the median power of the searched bins.
    pub prominence: f64,
}

/// Highest bin at or above `f_min_hz` that stands `prominence_min` times
/// above the median of those bins.
///
/// Bins below two segment-frequency units are never searched, whatever
/// `f_min_hz` says.
pub fn dominant_peak(spec: &Spectrum, f_min_hz: f64, prominence_min: f64) -> Option<Peak> {
    let f_floor = f_min_hz.max(2.0 / spec.window_length);
    let start = spec.freqs.iter().position(|&f| f >= f_floor)?;
    let band = &spec.power[start..];
    let (imax, &pmax) = band.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(pmax > 0.0) {
        return None;
    }
    let mut sorted = band.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 { 0.5 * (sorted[mid - 1] + sorted[mid]) } else { sorted[mid] };
    let prominence = if median > 0.0 { pmax / median } else { f64::INFINITY };
    (prominence >= prominence_min).then_some(Peak { freq_hz: spec.freqs[start + imax], power: pmax, prominence })
}

/// Apply the decision cascade to a uniformly sampled output series.
pub fn classify_series(proxy: &[f64], w_final: f64, dt: f64, th: &Thresholds) -> Result<PhasePoint> {
    let m = window_len(proxy.len(), th.window_fraction)?;
    if m < MIN_WINDOW_SAMPLES {
        return Err(Error::TooShort { needed: MIN_WINDOW_SAMPLES, available: m });
    }
    let tail = &proxy[proxy.len() - m..];
    let (mean, rel_std) = series_stats(tail);
    let mut point = PhasePoint {
        label: PhaseLabel::Unresolved,
        mean_photon_proxy: mean,
        rel_std,
        w_final,
        peak_freq_khz: None,
        peak_prominence: None,
    };
    if mean < th.eps_triv {
        point.label = if w_final > th.w_polarized {
            PhaseLabel::Normal
        } else if w_final < -th.w_polarized {
            PhaseLabel::Inverted
        } else {
            PhaseLabel::Unresolved
        };
        return Ok(point);
    }
    if rel_std > th.osc_std_min {
        let spec = power_spectrum(tail, dt)?;
        if let Some(peak) = dominant_peak(&spec, th.f_min_hz, th.prominence_min) {
            point.label = PhaseLabel::Oscillatory;
            point.peak_freq_khz = Some(peak.freq_hz / 1e3);
            point.peak_prominence = Some(peak.prominence);
            return Ok(point);
        }
    }
    if rel_std < th.sr_std_max {
        point.label = PhaseLabel::Superradiant;
    }
    Ok(point)
}

/// Classify a trajectory by its trailing window.
pub fn classify(traj: &Trajectory, th: &Thresholds) -> Result<PhasePoint> {
    let m = window_len(traj.len(), th.window_fraction)?;
    uniform_spacing(traj, traj.len() - m.min(traj.len()))?;
    classify_series(&traj.photon_proxy(), traj.final_state().w, traj.dt_sample(), th)
}
