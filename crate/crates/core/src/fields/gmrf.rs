//! Gaussian Markov random field over per-class score fields.
//!
//! For every class `c` a continuous field `h_c` minimizes
//! `0.5 h' L h - h' b_c` with precision `L = kappa I + lambda Lap`, where
//! `Lap` is the 4-neighborhood graph Laplacian and `b_c(i)` is the log
//! posterior of class `c` at pixel `i`. Conditional modes of a Gaussian are
//! conditional means, so the coordinate-wise updates are Gauss-Seidel
//! iterations on `L h_c = b_c`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::for_each_neighbor;
use crate::cluster::GmmModel;
use crate::error::{Error, Result};
use crate::raster::{FeatureStack, LabelMap, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmrfParams {
    pub lambda: f64,
    pub kappa: f64,
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for GmrfParams {
    fn default() -> Self {
        Self {
            lambda: 4.0,
            kappa: 1.0,
            max_sweeps: 1000,
            tol: 1e-8,
        }
    }
}

impl GmrfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gmrf lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gmrf kappa must be > 0, got {}",
                self.kappa
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter(
                "gmrf max_sweeps must be >= 1".into(),
            ));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter("gmrf tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GmrfResult {
    pub labels: LabelMap,
    /// One score field per class.
    pub scores: Vec<ScalarField>,
    /// Max over classes of `||L h_c - b_c||_inf`, starting with the zero field.
    pub residual_history: Vec<f64>,
    pub sweeps: usize,
}

impl GmrfResult {
    pub fn residual_csv(&self) -> String {
        let mut s = String::from("sweep,residual\n");
        for (i, r) in self.residual_history.iter().enumerate() {
            let _ = writeln!(s, "{i},{r:.12e}");
        }
        s
    }
}

fn residual_inf(h: &[f64], b: &[f64], w: usize, hgt: usize, p: &GmrfParams) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..w * hgt {
        let mut deg = 0.0;
        let mut nb = 0.0;
        for_each_neighbor(i, w, hgt, |j| {
            deg += 1.0;
            nb += h[j];
        });
        let lh = (p.kappa + p.lambda * deg) * h[i] - p.lambda * nb;
        worst = worst.max((lh - b[i]).abs());
    }
    worst
}

fn sweep(h: &mut [f64], b: &[f64], w: usize, hgt: usize, p: &GmrfParams) {
    for i in 0..w * hgt {
        let mut deg = 0.0;
        let mut nb = 0.0;
        for_each_neighbor(i, w, hgt, |j| {
            deg += 1.0;
            nb += h[j];
        });
        h[i] = (b[i] + p.lambda * nb) / (p.kappa + p.lambda * deg);
    }
}

/// Solves `(kappa I + lambda Lap) h = b` on a `w x h` grid by raster-order
/// Gauss-Seidel from `h = 0`. Returns the solution and the residual history.
pub fn gauss_seidel(
    b: &[f64],
    w: usize,
    hgt: usize,
    p: &GmrfParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    p.validate()?;
    if b.len() != w * hgt {
        return Err(Error::DimensionMismatch {
            expected: format!("{} values", w * hgt),
            found: format!("{} values", b.len()),
        });
    }
    let mut h = vec![0.0; b.len()];
    let mut hist = vec![residual_inf(&h, b, w, hgt, p)];
    while hist.len() <= p.max_sweeps && *hist.last().unwrap() >= p.tol {
        sweep(&mut h, b, w, hgt, p);
        hist.push(residual_inf(&h, b, w, hgt, p));
    }
    Ok((h, hist))
}

pub fn gmrf_segment(stack: &FeatureStack, model: &GmmModel, p: &GmrfParams) -> Result<GmrfResult> {
    p.validate()?;
    let (w, hgt) = (stack.width(), stack.height());
    let n = w * hgt;
    let k = model.k;
    let post = model.log_posteriors(stack)?;
    let bs: Vec<Vec<f64>> = (0..k)
        .map(|c| (0..n).map(|i| post[i * k + c]).collect())
        .collect();
    let mut hs = vec![vec![0.0; n]; k];

    let residual = |hs: &[Vec<f64>]| -> f64 {
        hs.iter()
            .zip(&bs)
            .map(|(h, b)| residual_inf(h, b, w, hgt, p))
            .fold(0.0, f64::max)
    };
    let mut history = vec![residual(&hs)];
    let mut sweeps = 0;
    while sweeps < p.max_sweeps && *history.last().unwrap() >= p.tol {
        for (h, b) in hs.iter_mut().zip(&bs) {
            sweep(h, b, w, hgt, p);
        }
        sweeps += 1;
        let r = residual(&hs);
        if !r.is_finite() {
            return Err(Error::NonFinite("gmrf residual".into()));
        }
        history.push(r);
    }

    let labels = (0..n)
        .map(|i| {
            let mut best = 0;
            for c in 1..k {
                if hs[c][i] > hs[best][i] {
                    best = c;
                }
            }
            best
        })
        .collect();
    let scores = hs
        .into_iter()
        .map(|h| ScalarField::new(w, hgt, h))
        .collect::<Result<Vec<_>>>()?;
    Ok(GmrfResult {
        labels: LabelMap::new(w, hgt, k, labels)?,
        scores,
        residual_history: history,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::map_labels;
    use nalgebra::{DMatrix, DVector};

    fn dense_precision(w: usize, h: usize, lambda: f64, kappa: f64) -> DMatrix<f64> {
        let n = w * h;
        let mut m = DMatrix::<f64>::identity(n, n) * kappa;
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                let mut add = |j: usize| {
                    m[(i, i)] += lambda;
                    m[(i, j)] -= lambda;
                };
                if r > 0 {
                    add(i - w);
                }
                if r + 1 < h {
                    add(i + w);
                }
                if c > 0 {
                    add(i - 1);
                }
                if c + 1 < w {
                    add(i + 1);
                }
            }
        }
        m
    }

    fn model() -> GmmModel {
        GmmModel::new(
            vec![0.5, 0.3, 0.2],
            vec![vec![0.0], vec![1.0], vec![2.5]],
            vec![vec![0.4], vec![0.3], vec![0.6]],
            vec!["x".into()],
        )
        .unwrap()
    }

    #[test]
    fn matches_dense_solve_on_3x3() {
        let b = [0.3, -1.2, 2.0, 0.0, 0.7, -0.4, 1.5, -2.2, 0.9];
        let p = GmrfParams {
            lambda: 1.0,
            kappa: 1.0,
            max_sweeps: 1000,
            tol: 1e-12,
        };
        let (h, hist) = gauss_seidel(&b, 3, 3, &p).unwrap();
        let lu = dense_precision(3, 3, 1.0, 1.0).lu();
        let exact = lu.solve(&DVector::from_row_slice(&b)).unwrap();
        let err = h
            .iter()
            .zip(exact.iter())
            .map(|(a, e)| (a - e).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "err {err}");
        assert!(hist.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_lambda_is_gmm_map() {
        let xs: Vec<f64> = (0..20)
            .map(|i| (i as f64 * 0.37).sin() * 2.0 + 1.0)
            .collect();
        let s = FeatureStack::new(5, 4, vec!["x".into()], xs).unwrap();
        let m = model();
        let p = GmrfParams {
            lambda: 0.0,
            ..Default::default()
        };
        let out = gmrf_segment(&s, &m, &p).unwrap();
        assert_eq!(out.labels, map_labels(&m, &s).unwrap());
        assert_eq!(out.sweeps, 1);
        let post = m.log_posteriors(&s).unwrap();
        for c in 0..3 {
            for i in 0..20 {
                assert!((out.scores[c].data()[i] - post[i * 3 + c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_rhs_gives_constant_field() {
        let p = GmrfParams {
            lambda: 3.0,
            kappa: 2.0,
            max_sweeps: 2000,
            tol: 1e-12,
        };
        let (h, _) = gauss_seidel(&[-1.5; 12], 4, 3, &p).unwrap();
        assert!(h.iter().all(|v| (v + 0.75).abs() < 1e-10));
    }

    #[test]
    fn constant_posteriors_give_uniform_labels() {
        let s = FeatureStack::new(4, 4, vec!["x".into()], vec![2.5; 16]).unwrap();
        let out = gmrf_segment(&s, &model(), &GmrfParams::default()).unwrap();
        assert!(out.labels.labels().iter().all(|&l| l == 2));
    }

    #[test]
    fn residual_history_non_increasing() {
        let xs: Vec<f64> = (0..64)
            .map(|i| ((i * 29) % 11) as f64 * 0.3 - 0.2)
            .collect();
        let s = FeatureStack::new(8, 8, vec!["x".into()], xs).unwrap();
        let out = gmrf_segment(&s, &model(), &GmrfParams::default()).unwrap();
        assert!(out.residual_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(*out.residual_history.last().unwrap() < 1e-8);
    }

    #[test]
    fn params_rejected() {
        assert!(GmrfParams {
            kappa: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GmrfParams {
            lambda: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GmrfParams {
            max_sweeps: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(gauss_seidel(&[1.0; 3], 2, 2, &GmrfParams::default()).is_err());
    }
}
