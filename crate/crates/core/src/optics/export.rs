//! Pattern and image export: binary PGM, raw little-endian float32, LED CSV.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::geometry::Led;
use super::grid::RealGrid;
use crate::error::{Error, Result};

/// How real values map to 8-bit gray levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrayScale {
    /// `[0, 1]` to `[0, 255]`, clamped.
    Unit,
    /// Per-image min..max stretched to `[0, 255]`.
    Stretch,
}

/// Encodes an 8-bit binary (P5) PGM. `comment` lines are written into the
/// header as `# ...`.
pub fn encode_pgm(grid: &RealGrid, scale: GrayScale, comment: Option<&str>) -> Vec<u8> {
    let n = grid.n();
    let mut out = Vec::with_capacity(n * n + 64);
    out.extend_from_slice(b"P5\n");
    if let Some(text) = comment {
        for line in text.lines() {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
    }
    out.extend_from_slice(format!("{n} {n}\n255\n").as_bytes());
    let (lo, hi) = match scale {
        GrayScale::Unit => (0.0, 1.0),
        GrayScale::Stretch => (grid.min(), grid.max()),
    };
    let span = hi - lo;
    for &v in grid.data() {
        let t = if span > 0.0 { (v - lo) / span } else { 0.0 };
        out.push((t.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    out
}

pub fn write_pgm(path: &Path, grid: &RealGrid, scale: GrayScale, comment: Option<&str>) -> Result<()> {
    fs::write(path, encode_pgm(grid, scale, comment))?;
    Ok(())
}

/// Parses a P5 PGM back to `(width, height, pixels)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let bad = |m: &str| Error::Validation(format!("bad PGM: {m}"));
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
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
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?.to_string());
    }
    if tokens[0] != "P5" {
        return Err(bad("magic"));
    }
    let w: usize = tokens[1].parse().map_err(|_| bad("width"))?;
    let h: usize = tokens[2].parse().map_err(|_| bad("height"))?;
    if tokens[3] != "255" {
        return Err(bad("maxval"));
    }
    pos += 1;
    let pixels = bytes.get(pos..pos + w * h).ok_or_else(|| bad("short pixel data"))?;
    Ok((w, h, pixels.to_vec()))
}

/// Row-major float32 little-endian, no header.
pub fn write_f32_le(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for &v in values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_f32_le(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Validation(format!("{} is not a whole number of float32 values", path.display())));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect())
}

pub const LED_CSV_HEADER: &str = "index,ring,azimuth_deg,polar_deg,field_kind,weight";

/// LED layout and weights as CSV. A `comment` becomes leading `# ` lines.
pub fn led_csv(leds: &[Led], weights: &[f64], comment: Option<&str>) -> Result<String> {
    if leds.len() != weights.len() {
        return Err(Error::Shape(format!("{} LEDs but {} weights", leds.len(), weights.len())));
    }
    let mut s = String::new();
    if let Some(text) = comment {
        for line in text.lines() {
            s.push_str(&format!("# {line}\n"));
        }
    }
    s.push_str(LED_CSV_HEADER);
    s.push('\n');
    for (led, w) in leds.iter().zip(weights) {
        s.push_str(&format!(
            "{},{},{:.4},{:.4},{},{:.9}\n",
            led.index,
            led.ring,
            led.azimuth_deg,
            led.polar_deg,
            led.field_kind.as_str(),
            w
        ));
    }
    Ok(s)
}

pub fn write_led_csv(path: &Path, leds: &[Led], weights: &[f64], comment: Option<&str>) -> Result<()> {
    fs::write(path, led_csv(leds, weights, comment)?)?;
    Ok(())
}
