use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::raster::Frame;

pub const CELLS: usize = 4;
pub const ORIENTATIONS: usize = 8;
pub const DESCRIPTOR_DIM: usize = CELLS * CELLS * ORIENTATIONS;

const CLAMP: f64 = 0.2;

/// One dense descriptor per pixel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorField {
    width: usize,
    height: usize,
    dim: usize,
    data: Vec<f64>,
}

impl DescriptorField {
    pub fn new(width: usize, height: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{width}x{height}x{dim} values"),
                found: format!("{} values", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("descriptor".into()));
        }
        Ok(Self {
            width,
            height,
            dim,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, row: usize, col: usize) -> &[f64] {
        let i = (row * self.width + col) * self.dim;
        &self.data[i..i + self.dim]
    }
}

/// Index of cell `(cx, cy)` and orientation bin `b` within a descriptor.
pub fn descriptor_index(cx: usize, cy: usize, b: usize) -> usize {
    (cy * CELLS + cx) * ORIENTATIONS + b
}

/// Dense SIFT: a 4x4-cell histogram of 8 gradient orientations around
/// every pixel, cells `cell_size` pixels wide.
///
/// Samples are Gaussian weighted and spread bilinearly over neighboring
/// cells and linearly over neighboring orientation bins. Gradients use
/// central differences with replicated borders.
pub fn dense_sift(frame: &Frame, cell_size: usize) -> Result<DescriptorField> {
    let mut data = histograms(frame, cell_size)?;
    for d in data.chunks_exact_mut(DESCRIPTOR_DIM) {
        normalize(d);
    }
    DescriptorField::new(frame.width(), frame.height(), DESCRIPTOR_DIM, data)
}

fn histograms(frame: &Frame, cell_size: usize) -> Result<Vec<f64>> {
    if cell_size == 0 {
        return Err(Error::InvalidParameter("cell_size must be >= 1".into()));
    }
    let (w, h) = frame.dims();
    let min = CELLS * cell_size;
    if w < min || h < min {
        return Err(Error::FrameTooSmall {
            width: w,
            height: h,
            min,
        });
    }
    let img = frame.data();
    let px = |r: isize, c: isize| {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        img[r * w + c]
    };
    let mut mag = vec![0.0; w * h];
    let mut ori = vec![0.0; w * h];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let gx = (px(r, c + 1) - px(r, c - 1)) / 2.0;
            let gy = (px(r + 1, c) - px(r - 1, c)) / 2.0;
            let i = r as usize * w + c as usize;
            mag[i] = gx.hypot(gy);
            let mut th = gy.atan2(gx);
            if th < 0.0 {
                th += 2.0 * PI;
            }
            ori[i] = th * ORIENTATIONS as f64 / (2.0 * PI);
        }
    }

    let cs = cell_size as isize;
    let half = 2 * cs;
    let sigma = half as f64;
    // per-offset cell weights and gaussian, shared by every pixel
    let mut taps = Vec::new();
    for dy in -half..=half {
        for dx in -half..=half {
            let g = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            let fx = dx as f64 / cs as f64 + 1.5;
            let fy = dy as f64 / cs as f64 + 1.5;
            for (cy, wy) in bilinear(fy) {
                for (cx, wx) in bilinear(fx) {
                    taps.push((dx, dy, cx, cy, g * wx * wy));
                }
            }
        }
    }

    let mut data = vec![0.0; w * h * DESCRIPTOR_DIM];
    for r in 0..h {
        for c in 0..w {
            let d = &mut data[(r * w + c) * DESCRIPTOR_DIM..(r * w + c + 1) * DESCRIPTOR_DIM];
            for &(dx, dy, cx, cy, wt) in &taps {
                let rr = (r as isize + dy).clamp(0, h as isize - 1) as usize;
                let cc = (c as isize + dx).clamp(0, w as isize - 1) as usize;
                let i = rr * w + cc;
                let m = mag[i] * wt;
                if m == 0.0 {
                    continue;
                }
                let o = ori[i];
                let b0 = o.floor();
                let frac = o - b0;
                let b0 = (b0 as usize) % ORIENTATIONS;
                let b1 = (b0 + 1) % ORIENTATIONS;
                d[descriptor_index(cx, cy, b0)] += m * (1.0 - frac);
                d[descriptor_index(cx, cy, b1)] += m * frac;
            }
        }
    }
    Ok(data)
}

/// Cells touched by fractional cell coordinate `f` with their weights.
fn bilinear(f: f64) -> impl Iterator<Item = (usize, f64)> {
    let f0 = f.floor();
    let t = f - f0;
    let i0 = f0 as isize;
    [(i0, 1.0 - t), (i0 + 1, t)]
        .into_iter()
        .filter(|&(i, wt)| (0..CELLS as isize).contains(&i) && wt > 0.0)
        .map(|(i, wt)| (i as usize, wt))
}

/// Unit-normalizes and clamps at 0.2; returns false for a zero histogram.
fn clamp_unit(d: &mut [f64]) -> bool {
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        d.iter_mut().for_each(|v| *v = 0.0);
        return false;
    }
    for v in d.iter_mut() {
        *v = (*v / norm).min(CLAMP);
    }
    true
}

fn normalize(d: &mut [f64]) {
    if clamp_unit(d) {
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        d.iter_mut().for_each(|v| *v /= norm);
    }
}
