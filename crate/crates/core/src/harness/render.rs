//! Phase-map images: binary PPM (one block per cell) and SVG with axes.
//!
//! Coupling `λ_max` runs left to right and the ratio bottom to top.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::PhaseMap;
use crate::classifier::PhaseLabel;
use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub normal: Rgb,
    pub superradiant: Rgb,
    pub oscillatory: Rgb,
    pub inverted: Rgb,
    pub unresolved: Rgb,
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            normal: [255, 255, 255],
            superradiant: [220, 30, 30],
            oscillatory: [250, 210, 20],
            inverted: [150, 150, 150],
            unresolved: [0, 0, 0],
        }
    }
}

impl Palette {
    pub fn color(&self, label: PhaseLabel) -> Rgb {
        match label {
            PhaseLabel::Normal => self.normal,
            PhaseLabel::Superradiant => self.superradiant,
            PhaseLabel::Oscillatory => self.oscillatory,
            PhaseLabel::Inverted => self.inverted,
            PhaseLabel::Unresolved => self.unresolved,
        }
    }
}

/// Raster image, row-major from the top-left pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }
}

/// `block × block` pixels per cell.
pub fn rasterize(map: &PhaseMap, palette: &Palette, block: usize) -> Image {
    let block = block.max(1);
    let (nr, nl) = map.grid.shape();
    let (width, height) = (nl * block, nr * block);
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        let i = nr - 1 - y / block;
        for x in 0..width {
            pixels.push(palette.color(map.label(i, x / block)));
        }
    }
    Image { width, height, pixels }
}

pub fn encode_ppm(map: &PhaseMap, palette: &Palette, block: usize) -> Vec<u8> {
    let img = rasterize(map, palette, block);
    let g = &map.grid;
    let mut out = format!(
        "P6\n# x: lambda_max_khz {} to {}, y: ratio {} to {} (bottom to top)\n{} {}\n255\n",
        g.lambda_axis_khz[0],
        g.lambda_axis_khz.last().unwrap(),
        g.ratio_axis[0],
        g.ratio_axis.last().unwrap(),
        img.width,
        img.height
    )
    .into_bytes();
    for p in &img.pixels {
        out.extend_from_slice(p);
    }
    out
}

/// Decode a binary PPM with maxval 255, skipping header comments.
pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let bad = |r: &str| Error::invalid("ppm", r.to_string());
    let mut pos = 0;
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not text"))?);
    }
    pos += 1;
    if fields[0] != "P6" || fields[3] != "255" {
        return Err(bad("expected P6 with maxval 255"));
    }
    let width: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
    let height: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
    let data = bytes.get(pos..).ok_or_else(|| bad("missing pixel data"))?;
    if data.len() != 3 * width * height {
        return Err(bad("pixel data length does not match header"));
    }
    let pixels = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(Image { width, height, pixels })
}

pub fn encode_svg(map: &PhaseMap, palette: &Palette, block: usize) -> String {
    let block = block.max(1) as f64;
    let g = &map.grid;
    let (nr, nl) = g.shape();
    let (margin_l, margin_b, margin_t, margin_r) = (60.0, 45.0, 10.0, 10.0);
    let (w, h) = (nl as f64 * block, nr as f64 * block);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">"#,
        w + margin_l + margin_r,
        h + margin_t + margin_b
    );
    for i in 0..nr {
        for j in 0..nl {
            let [r, gg, b] = palette.color(map.label(i, j));
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{block}" height="{block}" fill="rgb({r},{gg},{b})"/>"#,
                margin_l + j as f64 * block,
                margin_t + (nr - 1 - i) as f64 * block
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{margin_l}" y="{margin_t}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
    );
    let x_end = margin_l + w;
    let y_end = margin_t + h;
    let (l0, l1) = (g.lambda_axis_khz[0], *g.lambda_axis_khz.last().unwrap());
    let (r0, r1) = (g.ratio_axis[0], *g.ratio_axis.last().unwrap());
    let _ = writeln!(s, r#"<text x="{margin_l}" y="{}" text-anchor="start">{l0}</text>"#, y_end + 15.0);
    let _ = writeln!(s, r#"<text x="{x_end}" y="{}" text-anchor="end">{l1}</text>"#, y_end + 15.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">max coupling λ_max (kHz)</text>"#,
        margin_l + w / 2.0,
        y_end + 35.0
    );
    let _ = writeln!(s, r#"<text x="{}" y="{y_end}" text-anchor="end">{r0}</text>"#, margin_l - 5.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{r1}</text>"#, margin_l - 5.0, margin_t + 10.0);
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">ratio λ₊/λ₋</text>"#,
        margin_t + h / 2.0,
        margin_t + h / 2.0
    );
    s.push_str("</svg>\n");
    s
}

/// Write a PPM or SVG depending on the file extension.
pub fn render_phase_map(map: &PhaseMap, path: &Path, palette: &Palette, block: usize) -> Result<()> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "svg" => std::fs::write(path, encode_svg(map, palette, block))?,
        _ => std::fs::write(path, encode_ppm(map, palette, block))?,
    }
    Ok(())
}
