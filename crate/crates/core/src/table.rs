//! Shared conventions for the plain-text tables written by this crate.
//!
//! Every table starts with one preamble line
//! `# dicke <kind> schema_version=<n>` followed by a comma-separated header
//! row. Additional `#` lines may carry metadata before the header.

use std::io::Write;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Trajectory,
    Spectrum,
    Boundary,
    Expectation,
    Sweep,
    Comparison,
}

impl TableKind {
    pub fn name(self) -> &'static str {
        match self {
            TableKind::Trajectory => "trajectory",
            TableKind::Spectrum => "spectrum",
            TableKind::Boundary => "boundary",
            TableKind::Expectation => "expectation",
            TableKind::Sweep => "sweep",
            TableKind::Comparison => "comparison",
        }
    }
}

pub fn write_preamble<W: Write>(out: &mut W, kind: TableKind) -> Result<()> {
    writeln!(out, "# dicke {} schema_version={}", kind.name(), SCHEMA_VERSION)?;
    Ok(())
}

/// Parse a preamble line, returning the schema version it declares.
pub fn parse_preamble(line: &str, kind: TableKind) -> Option<u32> {
    let rest = line.strip_prefix("# dicke ")?;
    let (k, v) = rest.split_once(' ')?;
    if k != kind.name() {
        return None;
    }
    v.trim().strip_prefix("schema_version=")?.parse().ok()
}

pub fn check_version(found: u32) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::VersionMismatch { found, expected: SCHEMA_VERSION });
    }
    Ok(())
}

/// Format an optional float, empty when absent.
pub fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preamble_round_trip() {
        let mut buf = Vec::new();
        write_preamble(&mut buf, TableKind::Sweep).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(parse_preamble(line.trim_end(), TableKind::Sweep), Some(1));
        assert_eq!(parse_preamble(line.trim_end(), TableKind::Boundary), None);
        assert!(check_version(2).is_err());
    }
}
