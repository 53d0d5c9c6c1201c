//! Sweep table persistence.
//!
//! ```text
//! # dicke sweep schema_version=1
//! # tool_version=0.1.0
//! # config_hash=<sha256 of the grid>
//! # started_unix=
//! # finished_unix=
//! # grid=<grid as JSON>
//! ratio,lambda_max_khz,label,mean_alpha_sq,rel_std,w_final,peak_freq_khz,peak_prominence,horizon_ms,status
//! 0.5,0,normal,0e0,0e0,4.999999999e-1,,,20,ok
//! # end cells=<rows above>
//! ```
//!
//! Checkpoints use the same layout and list only the finished cells.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::sweep::{CellStatus, PhaseMap, Provenance, SweepCell, SweepGrid};
use crate::classifier::{PhaseLabel, PhasePoint};
use crate::error::{Error, Result};
use crate::table::{self, TableKind};

pub const HEADER: &str =
    "ratio,lambda_max_khz,label,mean_alpha_sq,rel_std,w_final,peak_freq_khz,peak_prominence,horizon_ms,status";

fn opt_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn render(grid: &SweepGrid, prov: &Provenance, cells: &[Option<SweepCell>]) -> Vec<u8> {
    let mut out = Vec::new();
    table::write_preamble(&mut out, TableKind::Sweep).expect("in-memory write");
    let grid_json = serde_json::to_string(grid).expect("grid serializes");
    let mut w = |s: String| out.extend_from_slice(s.as_bytes());
    w(format!("# tool_version={}\n", prov.tool_version));
    w(format!("# config_hash={}\n", prov.config_hash));
    w(format!("# started_unix={}\n", opt_u64(prov.started_unix)));
    w(format!("# finished_unix={}\n", opt_u64(prov.finished_unix)));
    w(format!("# grid={grid_json}\n"));
    w(format!("{HEADER}\n"));
    let nl = grid.lambda_axis_khz.len();
    let mut count = 0;
    for (k, cell) in cells.iter().enumerate() {
        let Some(c) = cell else { continue };
        let p = &c.point;
        w(format!(
            "{},{},{},{:e},{:e},{:e},{},{},{},{}\n",
            grid.ratio_axis[k / nl],
            grid.lambda_axis_khz[k % nl],
            p.label,
            p.mean_photon_proxy,
            p.rel_std,
            p.w_final,
            table::opt(p.peak_freq_khz),
            table::opt(p.peak_prominence),
            c.horizon_ms,
            c.status
        ));
        count += 1;
    }
    w(format!("# end cells={count}\n"));
    out
}

/// Write to a sibling temporary file, then rename over `path`.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_phase_map(map: &PhaseMap, path: &Path) -> Result<()> {
    let cells: Vec<Option<SweepCell>> = map.cells.iter().cloned().map(Some).collect();
    write_atomic(path, &render(&map.grid, &map.provenance, &cells))
}

pub(crate) fn write_partial(
    path: &Path,
    grid: &SweepGrid,
    prov: &Provenance,
    cells: &[Option<SweepCell>],
) -> Result<()> {
    write_atomic(path, &render(grid, prov, cells))
}

/// Serialized form of a map, as written by [`save_phase_map`].
pub fn phase_map_bytes(map: &PhaseMap) -> Vec<u8> {
    let cells: Vec<Option<SweepCell>> = map.cells.iter().cloned().map(Some).collect();
    render(&map.grid, &map.provenance, &cells)
}

/// A map with possibly missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialMap {
    pub grid: SweepGrid,
    pub cells: Vec<Option<SweepCell>>,
    pub provenance: Provenance,
}

impl PartialMap {
    pub fn completed(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }
}

struct Parser<'a> {
    path: &'a Path,
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn corrupt(&self, offset: usize, reason: impl Into<String>) -> Error {
        Error::Corrupt { path: self.path.to_path_buf(), offset, reason: reason.into() }
    }

    /// Next complete line and its starting offset; a final line without a
    /// newline counts as truncated.
    fn line(&mut self) -> Result<Option<(usize, &'a str)>> {
        if self.pos >= self.text.len() {
            return Ok(None);
        }
        let start = self.pos;
        match self.text[start..].find('\n') {
            Some(n) => {
                self.pos = start + n + 1;
                Ok(Some((start, &self.text[start..start + n])))
            }
            None => Err(self.corrupt(start, "truncated line")),
        }
    }

    fn expect_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.line()?.ok_or_else(|| self.corrupt(self.text.len(), format!("file ends before {what}")))
    }

    fn meta(&mut self, key: &str) -> Result<&'a str> {
        let (off, line) = self.expect_line(key)?;
        line.strip_prefix("# ")
            .and_then(|l| l.strip_prefix(key))
            .and_then(|l| l.strip_prefix('='))
            .ok_or_else(|| self.corrupt(off, format!("expected `# {key}=`")))
    }
}

fn parse_opt(s: &str) -> std::result::Result<Option<f64>, std::num::ParseFloatError> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

fn parse_row(line: &str, grid: &SweepGrid) -> std::result::Result<(usize, SweepCell), String> {
    let f: Vec<&str> = line.splitn(10, ',').collect();
    if f.len() != 10 {
        return Err(format!("expected 10 columns, found {}", f.len()));
    }
    let num = |k: usize| f[k].parse::<f64>().map_err(|e| format!("column {k}: {e}"));
    let ratio = num(0)?;
    let lambda = num(1)?;
    let i = grid.ratio_axis.iter().position(|&r| r == ratio).ok_or(format!("ratio {ratio} not on the grid"))?;
    let j = grid.lambda_axis_khz.iter().position(|&l| l == lambda).ok_or(format!("coupling {lambda} not on the grid"))?;
    let point = PhasePoint {
        label: f[2].parse::<PhaseLabel>().map_err(|e| e.to_string())?,
        mean_photon_proxy: num(3)?,
        rel_std: num(4)?,
        w_final: num(5)?,
        peak_freq_khz: parse_opt(f[6]).map_err(|e| format!("column 6: {e}"))?,
        peak_prominence: parse_opt(f[7]).map_err(|e| format!("column 7: {e}"))?,
    };
    let status = f[9].parse::<CellStatus>().map_err(|e| e.to_string())?;
    Ok((grid.index(i, j), SweepCell { point, horizon_ms: num(8)?, status }))
}

fn parse(path: &Path, text: &str) -> Result<PartialMap> {
    let mut p = Parser { path, text, pos: 0 };
    let (_, first) = p.expect_line("preamble")?;
    let version = table::parse_preamble(first, TableKind::Sweep).ok_or_else(|| p.corrupt(0, "not a sweep table"))?;
    table::check_version(version)?;

    let tool_version = p.meta("tool_version")?.to_string();
    let config_hash = p.meta("config_hash")?.to_string();
    let mut stamp = |key: &str| -> Result<Option<u64>> {
        let off = p.pos;
        let v = p.meta(key)?;
        if v.is_empty() {
            return Ok(None);
        }
        v.parse().map(Some).map_err(|_| p.corrupt(off, format!("bad {key}")))
    };
    let started_unix = stamp("started_unix")?;
    let finished_unix = stamp("finished_unix")?;
    let grid_off = p.pos;
    let grid: SweepGrid =
        serde_json::from_str(p.meta("grid")?).map_err(|e| p.corrupt(grid_off, format!("grid: {e}")))?;
    let (off, header) = p.expect_line("header")?;
    if header != HEADER {
        return Err(p.corrupt(off, "unexpected header row"));
    }

    let mut cells = vec![None; grid.n_cells()];
    let mut rows = 0usize;
    loop {
        let (off, line) = p.expect_line("end marker")?;
        if let Some(n) = line.strip_prefix("# end cells=") {
            let n: usize = n.parse().map_err(|_| p.corrupt(off, "bad end marker"))?;
            if n != rows {
                return Err(p.corrupt(off, format!("end marker counts {n} cells, found {rows}")));
            }
            if p.pos != text.len() {
                return Err(p.corrupt(p.pos, "data after end marker"));
            }
            break;
        }
        let (k, cell) = parse_row(line, &grid).map_err(|r| p.corrupt(off, r))?;
        if cells[k].is_some() {
            return Err(p.corrupt(off, "duplicate cell"));
        }
        cells[k] = Some(cell);
        rows += 1;
    }
    let provenance = Provenance { tool_version, config_hash, started_unix, finished_unix };
    Ok(PartialMap { grid, cells, provenance })
}

fn read(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    String::from_utf8(bytes).map_err(|e| Error::Corrupt {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
        reason: "invalid UTF-8".into(),
    })
}

pub fn load_partial(path: &Path) -> Result<PartialMap> {
    parse(path, &read(path)?)
}

/// Load a complete map; missing cells are a corruption.
pub fn load_phase_map(path: &Path) -> Result<PhaseMap> {
    let text = read(path)?;
    let part = parse(path, &text)?;
    let done = part.completed();
    if done != part.cells.len() {
        return Err(Error::Corrupt {
            path: path.to_path_buf(),
            offset: text.len(),
            reason: format!("incomplete map: {done} of {} cells", part.cells.len()),
        });
    }
    Ok(PhaseMap {
        grid: part.grid,
        cells: part.cells.into_iter().map(|c| c.expect("checked complete")).collect(),
        provenance: part.provenance,
    })
}
