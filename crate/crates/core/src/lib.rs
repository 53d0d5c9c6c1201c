//! Semiclassical and quantum dynamics of a driven-dissipative
//! two-level Dicke model with unbalanced rotating and counter-rotating
//! couplings.
//!
//! Frequencies cross the public boundary in linear kHz (see [`units`]) and
//! are angular (rad/s) everywhere inside.

pub mod classifier;
pub mod config;
pub mod error;
pub mod harness;
pub mod model;
pub mod ode;
pub mod quantum;
pub mod semiclassical;
pub mod stability;
pub mod table;
pub mod units;

pub use classifier::{classify, PhaseLabel, PhasePoint, Thresholds};
pub use error::{Error, Result};
pub use model::{calibrate, Calibration, ModelParams, PhysicalParams};
pub use semiclassical::{integrate, perturbed_initial, IntegrationSettings, SemiclassicalState, Trajectory};
pub use config::Config;
pub use harness::{load_phase_map, run_sweep, save_phase_map, PhaseMap, SweepGrid, SweepOptions};
pub use quantum::{evolve_density, DensityState, ExpectationSeries, HilbertSpec, QuantumSettings};
pub use stability::{boundary_bisect, max_growth_rate, trace_boundary, BoundaryCurve, FixedPoint, FixedPointKind};
