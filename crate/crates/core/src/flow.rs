//! Horn-Schunck dense optical flow.
//!
//! Derivatives use the averaged forward differences over the 2x2x2 cube
//! spanning both frames; the smoothness average uses the 1/6 (edge) and
//! 1/12 (corner) kernel. Updates are Jacobi-style: every pixel of
//! iteration `k + 1` reads only iteration-`k` averages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{FlowField, Frame, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HsParams {
    /// Smoothness weight; larger values give smoother flow.
    pub alpha: f64,
    pub max_iters: usize,
    /// Stop once the mean of `|du| + |dv|` over one iteration drops below this.
    pub tol: f64,
}

impl Default for HsParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            max_iters: 100,
            tol: 1e-4,
        }
    }
}

impl HsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "hs alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("hs max_iters must be >= 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter("hs tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Spatial and temporal image derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub ix: ScalarField,
    pub iy: ScalarField,
    pub it: ScalarField,
}

impl Gradients {
    pub fn dims(&self) -> (usize, usize) {
        self.ix.dims()
    }
}

#[derive(Debug, Clone)]
pub struct HsOutput {
    pub flow: FlowField,
    pub iterations: usize,
    /// Discrete energy of the returned flow.
    pub energy: f64,
}

pub fn compute_gradients(f1: &Frame, f2: &Frame) -> Result<Gradients> {
    if f1.dims() != f2.dims() {
        return Err(Error::dims(f1.dims(), f2.dims()));
    }
    let (w, h) = f1.dims();
    let mut ix = vec![0.0; w * h];
    let mut iy = vec![0.0; w * h];
    let mut it = vec![0.0; w * h];
    for r in 0..h - 1 {
        for c in 0..w - 1 {
            let a = |f: &Frame, dr: usize, dc: usize| f.get(r + dr, c + dc);
            let i = r * w + c;
            ix[i] = 0.25
                * (a(f1, 0, 1) - a(f1, 0, 0) + a(f1, 1, 1) - a(f1, 1, 0) + a(f2, 0, 1)
                    - a(f2, 0, 0)
                    + a(f2, 1, 1)
                    - a(f2, 1, 0));
            iy[i] = 0.25
                * (a(f1, 1, 0) - a(f1, 0, 0) + a(f1, 1, 1) - a(f1, 0, 1) + a(f2, 1, 0)
                    - a(f2, 0, 0)
                    + a(f2, 1, 1)
                    - a(f2, 0, 1));
            it[i] = 0.25
                * (a(f2, 0, 0) - a(f1, 0, 0) + a(f2, 1, 0) - a(f1, 1, 0) + a(f2, 0, 1)
                    - a(f1, 0, 1)
                    + a(f2, 1, 1)
                    - a(f1, 1, 1));
        }
    }
    // replicate the last column, then the last row
    for buf in [&mut ix, &mut iy, &mut it] {
        for r in 0..h - 1 {
            buf[r * w + w - 1] = buf[r * w + w - 2];
        }
        let (head, last) = buf.split_at_mut((h - 1) * w);
        last.copy_from_slice(&head[(h - 2) * w..]);
    }
    Ok(Gradients {
        ix: ScalarField::new(w, h, ix)?,
        iy: ScalarField::new(w, h, iy)?,
        it: ScalarField::new(w, h, it)?,
    })
}

/// Weighted neighborhood average with replicated borders.
fn local_average(src: &[f64], w: usize, h: usize, dst: &mut [f64]) {
    let at = |r: isize, c: isize| {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        src[r * w + c]
    };
    for r in 0..h as isize {
        for c in 0..w as isize {
            let edges = at(r - 1, c) + at(r + 1, c) + at(r, c - 1) + at(r, c + 1);
            let corners = at(r - 1, c - 1) + at(r - 1, c + 1) + at(r + 1, c - 1) + at(r + 1, c + 1);
            dst[r as usize * w + c as usize] = edges / 6.0 + corners / 12.0;
        }
    }
}

/// Runs Horn-Schunck from zero flow.
pub fn horn_schunck(f1: &Frame, f2: &Frame, p: &HsParams) -> Result<HsOutput> {
    horn_schunck_traced(f1, f2, p, 0).map(|(out, _)| out)
}

/// Like [`horn_schunck`], additionally recording the energy every
/// `trace_every` iterations (`0` disables tracing). The trace starts with
/// the energy of the zero initialization.
pub fn horn_schunck_traced(
    f1: &Frame,
    f2: &Frame,
    p: &HsParams,
    trace_every: usize,
) -> Result<(HsOutput, Vec<f64>)> {
    p.validate()?;
    let g = compute_gradients(f1, f2)?;
    let (w, h) = g.dims();
    let n = w * h;
    let (ix, iy, it) = (g.ix.data(), g.iy.data(), g.it.data());
    let alpha2 = p.alpha * p.alpha;

    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut ubar = vec![0.0; n];
    let mut vbar = vec![0.0; n];
    let mut trace = Vec::new();
    if trace_every > 0 {
        trace.push(energy_raw(&u, &v, &g, p.alpha));
    }

    let mut iterations = 0;
    while iterations < p.max_iters {
        iterations += 1;
        local_average(&u, w, h, &mut ubar);
        local_average(&v, w, h, &mut vbar);
        let mut change = 0.0;
        for i in 0..n {
            let common = (ix[i] * ubar[i] + iy[i] * vbar[i] + it[i])
                / (alpha2 + ix[i] * ix[i] + iy[i] * iy[i]);
            let nu = ubar[i] - ix[i] * common;
            let nv = vbar[i] - iy[i] * common;
            change += (nu - u[i]).abs() + (nv - v[i]).abs();
            u[i] = nu;
            v[i] = nv;
        }
        if trace_every > 0 && iterations % trace_every == 0 {
            trace.push(energy_raw(&u, &v, &g, p.alpha));
        }
        if !change.is_finite() {
            return Err(Error::NonFinite("horn-schunck update".into()));
        }
        if change == 0.0 || change / (n as f64) < p.tol {
            break;
        }
    }
    let energy = energy_raw(&u, &v, &g, p.alpha);
    let flow = FlowField::new(w, h, u, v)?;
    Ok((
        HsOutput {
            flow,
            iterations,
            energy,
        },
        trace,
    ))
}

fn energy_raw(u: &[f64], v: &[f64], g: &Gradients, alpha: f64) -> f64 {
    let (w, h) = g.dims();
    let (ix, iy, it) = (g.ix.data(), g.iy.data(), g.it.data());
    let alpha2 = alpha * alpha;
    let mut e = 0.0;
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let data = ix[i] * u[i] + iy[i] * v[i] + it[i];
            // forward differences, zero past the last row/column
            let (dux, dvx) = if c + 1 < w {
                (u[i + 1] - u[i], v[i + 1] - v[i])
            } else {
                (0.0, 0.0)
            };
            let (duy, dvy) = if r + 1 < h {
                (u[i + w] - u[i], v[i + w] - v[i])
            } else {
                (0.0, 0.0)
            };
            e += data * data + alpha2 * (dux * dux + duy * duy + dvx * dvx + dvy * dvy);
        }
    }
    e
}

/// Discrete Horn-Schunck energy: data term plus `alpha^2`-weighted squared
/// forward-difference gradients of `u` and `v`.
pub fn hs_energy(flow: &FlowField, g: &Gradients, alpha: f64) -> Result<f64> {
    if flow.dims() != g.dims() {
        return Err(Error::dims(g.dims(), flow.dims()));
    }
    Ok(energy_raw(flow.u(), flow.v(), g, alpha))
}

pub fn flow_magnitude(flow: &FlowField) -> ScalarField {
    let (w, h) = flow.dims();
    let data = flow
        .u()
        .iter()
        .zip(flow.v())
        .map(|(u, v)| u.hypot(*v))
        .collect();
    ScalarField::new(w, h, data).expect("magnitude of a finite field is finite")
}

/// Writes `u` and `v` as `u.csv` / `v.csv` into `dir`.
pub fn dump_flow_csv(flow: &FlowField, dir: &std::path::Path) -> Result<()> {
    let (w, h) = flow.dims();
    crate::io::create_dir(dir)?;
    for (name, data) in [("u.csv", flow.u()), ("v.csv", flow.v())] {
        let field = ScalarField::new(w, h, data.to_vec())?;
        crate::io::write_atomic(
            &dir.join(name),
            crate::io::scalar_field_csv(&field).as_bytes(),
        )?;
    }
    Ok(())
}
