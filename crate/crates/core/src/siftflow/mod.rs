//! Dense SIFT descriptors and discrete SIFT-flow matching.
//!
//! The matching energy of an integer displacement field `w = (u, v)` is
//!
//! ```text
//! E(w) = sum_p min(|s1(p) - s2(p + w(p))|_1, t)
//!      + eta * sum_p (|u(p)| + |v(p)|)
//!      + sum_{p~q} min(alpha |u(p) - u(q)|, d) + min(alpha |v(p) - v(q)|, d)
//! ```
//!
//! Targets that fall outside the frame cost `t`.

mod bp;
mod descriptor;

pub use bp::{match_siftflow, min_convolve_brute, min_convolve_truncated_l1};
pub use descriptor::{
    dense_sift, descriptor_index, DescriptorField, CELLS, DESCRIPTOR_DIM, ORIENTATIONS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Frame, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiftFlowParams {
    /// Weight of the displacement magnitude term.
    pub eta: f64,
    /// Smoothness weight.
    pub alpha: f64,
    /// Data term truncation.
    pub t: f64,
    /// Smoothness truncation.
    pub d: f64,
    pub search_radius: usize,
    pub bp_iters: usize,
    pub cell_size: usize,
}

impl Default for SiftFlowParams {
    fn default() -> Self {
        let eta = 0.005;
        let search_radius = 5;
        let alpha = 2.0 * eta * search_radius as f64;
        Self {
            eta,
            alpha,
            t: 0.5 * DESCRIPTOR_DIM as f64 * 0.04,
            d: alpha * 4.0,
            search_radius,
            bp_iters: 40,
            cell_size: 2,
        }
    }
}

impl SiftFlowParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("sift flow {m}")));
        if !(self.eta >= 0.0) || !(self.alpha >= 0.0) {
            return bad("eta and alpha must be >= 0");
        }
        if !(self.t > 0.0) || !(self.d > 0.0) {
            return bad("t and d must be > 0");
        }
        if self.search_radius == 0 || self.bp_iters == 0 || self.cell_size == 0 {
            return bad("search_radius, bp_iters and cell_size must be >= 1");
        }
        Ok(())
    }
}

/// Integer displacement per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisplacementField {
    width: usize,
    height: usize,
    u: Vec<i32>,
    v: Vec<i32>,
}

impl DisplacementField {
    pub fn new(width: usize, height: usize, u: Vec<i32>, v: Vec<i32>) -> Result<Self> {
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", width * height),
                found: format!("{} and {} values", u.len(), v.len()),
            });
        }
        Ok(Self {
            width,
            height,
            u,
            v,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0, 0)
    }

    pub fn constant(width: usize, height: usize, u: i32, v: i32) -> Self {
        Self {
            width,
            height,
            u: vec![u; width * height],
            v: vec![v; width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn u(&self) -> &[i32] {
        &self.u
    }

    pub fn v(&self) -> &[i32] {
        &self.v
    }

    pub fn max_abs(&self) -> i32 {
        self.u
            .iter()
            .chain(&self.v)
            .map(|x| x.abs())
            .max()
            .unwrap_or(0)
    }

    pub fn magnitude(&self) -> ScalarField {
        let data = self
            .u
            .iter()
            .zip(&self.v)
            .map(|(&u, &v)| (u as f64).hypot(v as f64))
            .collect();
        ScalarField::new(self.width, self.height, data).expect("finite magnitudes")
    }
}

pub fn siftflow_energy(
    d1: &DescriptorField,
    d2: &DescriptorField,
    w: &DisplacementField,
    p: &SiftFlowParams,
) -> Result<f64> {
    if d1.dims() != d2.dims() || d1.dims() != w.dims() || d1.dim() != d2.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", d1.width(), d1.height()),
            found: format!("{}x{} / {:?}", d2.width(), d2.height(), w.dims()),
        });
    }
    if w.max_abs() as usize > p.search_radius {
        return Err(Error::InvalidParameter(format!(
            "displacement {} exceeds search radius {}",
            w.max_abs(),
            p.search_radius
        )));
    }
    let (width, height) = d1.dims();
    let mut data = 0.0;
    let mut magnitude = 0.0;
    let mut smooth = 0.0;
    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            let (u, v) = (w.u[i], w.v[i]);
            let (tr, tc) = (r as i64 + v as i64, c as i64 + u as i64);
            data += if tr < 0 || tc < 0 || tr >= height as i64 || tc >= width as i64 {
                p.t
            } else {
                let l1: f64 = d1
                    .at(r, c)
                    .iter()
                    .zip(d2.at(tr as usize, tc as usize))
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                l1.min(p.t)
            };
            magnitude += (u.abs() + v.abs()) as f64;
            let mut pair = |j: usize| {
                smooth += (p.alpha * (u - w.u[j]).abs() as f64).min(p.d);
                smooth += (p.alpha * (v - w.v[j]).abs() as f64).min(p.d);
            };
            if c + 1 < width {
                pair(i + 1);
            }
            if r + 1 < height {
                pair(i + width);
            }
        }
    }
    Ok(data + p.eta * magnitude + smooth)
}

/// Magnitude of the SIFT flow from `f1` to `f2`, the optional feature channel.
pub fn sift_flow_magnitude(f1: &Frame, f2: &Frame, p: &SiftFlowParams) -> Result<ScalarField> {
    p.validate()?;
    if f1.dims() != f2.dims() {
        return Err(Error::dims(f1.dims(), f2.dims()));
    }
    let d1 = dense_sift(f1, p.cell_size)?;
    let d2 = dense_sift(f2, p.cell_size)?;
    Ok(match_siftflow(&d1, &d2, p)?.magnitude())
}
