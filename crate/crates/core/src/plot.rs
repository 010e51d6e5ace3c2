//! Portable anymap output: graymaps for spectrograms, bitmaps for rasters
//! and masks, pixmaps for curves. The bytes depend only on the input.

use std::fs;
use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Binary PGM, min-max normalised; a constant grid renders mid-gray.
pub fn graymap(values: ArrayView2<f32>) -> Result<Vec<u8>> {
    let (lo, hi) = values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    graymap_range(values, lo, hi)
}

/// Binary PGM mapping `lo` to black and `hi` to white, clamping outside.
pub fn graymap_range(values: ArrayView2<f32>, lo: f32, hi: f32) -> Result<Vec<u8>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("cannot plot non-finite values".into()));
    }
    let (rows, cols) = values.dim();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| {
        if hi > lo {
            (((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0).round() as u8
        } else {
            128
        }
    }));
    Ok(out)
}

/// Binary PBM; set cells are black.
pub fn bitmap(bits: ArrayView2<bool>) -> Vec<u8> {
    let (rows, cols) = bits.dim();
    let mut out = format!("P4\n{cols} {rows}\n").into_bytes();
    for r in bits.rows() {
        for chunk in r.to_vec().chunks(8) {
            let mut byte = 0u8;
            for (k, &b) in chunk.iter().enumerate() {
                if b {
                    byte |= 0x80 >> k;
                }
            }
            out.push(byte);
        }
    }
    out
}

/// Binary PPM of a curve through points in the unit square, with axes.
pub fn curve_pixmap(points: &[(f64, f64)], width: usize, height: usize) -> Result<Vec<u8>> {
    if width < 8 || height < 8 {
        return Err(Error::Config("curve plots need at least 8x8 pixels".into()));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::Precondition("cannot plot non-finite points".into()));
    }
    let mut px = vec![[255u8; 3]; width * height];
    let margin = 4;
    let (w, h) = (width - 2 * margin - 1, height - 2 * margin - 1);
    let to_px = |(x, y): (f64, f64)| {
        let cx = margin as f64 + x.clamp(0.0, 1.0) * w as f64;
        let cy = (height - margin - 1) as f64 - y.clamp(0.0, 1.0) * h as f64;
        (cx.round() as i64, cy.round() as i64)
    };
    let mut set = |x: i64, y: i64, c: [u8; 3]| {
        if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
            px[y as usize * width + x as usize] = c;
        }
    };
    for x in margin..width - margin {
        set(x as i64, (height - margin - 1) as i64, [0, 0, 0]);
    }
    for y in margin..height - margin {
        set(margin as i64, y as i64, [0, 0, 0]);
    }
    for seg in points.windows(2) {
        let (x0, y0) = to_px(seg[0]);
        let (x1, y1) = to_px(seg[1]);
        let n = (x1 - x0).abs().max((y1 - y0).abs()).max(1);
        for k in 0..=n {
            let x = x0 + (x1 - x0) * k / n;
            let y = y0 + (y1 - y0) * k / n;
            set(x, y, [30, 80, 200]);
        }
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend(px.iter().flatten());
    Ok(out)
}

pub fn write_image(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
