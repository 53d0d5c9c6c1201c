//! Phase-diagram sweeps, their persistence and rendering.

mod render;
mod store;
mod sweep;

pub use render::{decode_ppm, encode_ppm, encode_svg, rasterize, render_phase_map, Image, Palette, Rgb};
pub use store::{load_partial, load_phase_map, phase_map_bytes, save_phase_map, PartialMap, HEADER};
pub use sweep::{
    cell_seed, resume_sweep, run_cell, run_sweep, CellStatus, PhaseMap, Provenance, SweepCell, SweepGrid, SweepOptions,
};
