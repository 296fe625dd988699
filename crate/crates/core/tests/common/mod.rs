//! Independent oracles and random instance builders shared by the
//! integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use irseg::cluster::GmmModel;
use irseg::{FeatureStack, LabelMap};

pub fn names(d: usize) -> Vec<String> {
    (0..d).map(|c| format!("c{c}")).collect()
}

/// `-log N(x | mean, cov)` through a dense inverse and determinant.
pub fn gauss_nll(x: &[f64], mean: &[f64], cov: &[f64]) -> f64 {
    let d = x.len();
    let s = DMatrix::from_row_slice(d, d, cov);
    let diff = DVector::from_iterator(d, x.iter().zip(mean).map(|(a, b)| a - b));
    let inv = s.clone().try_inverse().expect("invertible covariance");
    let maha = (diff.transpose() * inv * &diff)[(0, 0)];
    0.5 * maha + 0.5 * s.determinant().ln() + 0.5 * d as f64 * (2.0 * PI).ln()
}

/// Total Potts posterior energy of `labels`, recomputed from scratch.
pub fn potts_energy(
    stack: &FeatureStack,
    m: &GmmModel,
    labels: &[usize],
    w: usize,
    h: usize,
    beta: f64,
) -> f64 {
    let mut e = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        e += gauss_nll(stack.pixel(i), &m.means[y], &m.covariances[y]) - m.weights[y].ln();
    }
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w {
                e += if labels[i] == labels[i + 1] {
                    -beta
                } else {
                    beta
                };
            }
            if r + 1 < h {
                e += if labels[i] == labels[i + w] {
                    -beta
                } else {
                    beta
                };
            }
        }
    }
    e
}

/// Count of 4-neighbor pairs with different labels.
pub fn disagreeing_edges(map: &LabelMap) -> usize {
    let (w, h) = map.dims();
    let l = map.labels();
    let mut n = 0;
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            n += usize::from(c + 1 < w && l[i] != l[i + 1]);
            n += usize::from(r + 1 < h && l[i] != l[i + w]);
        }
    }
    n
}

/// `n` points in `d` dimensions drawn around three separated centers.
pub fn blob_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    let centers: Vec<Vec<f64>> = (0..3)
        .map(|j| {
            (0..d)
                .map(|c| 3.0 * j as f64 + rng.random_range(-0.5..0.5) * (c as f64 + 1.0))
                .collect()
        })
        .collect();
    (0..n)
        .map(|i| {
            let ctr = &centers[i % 3];
            ctr.iter()
                .map(|m| m + rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect()
}

/// A random well-conditioned mixture with `k` components in `d` dimensions.
pub fn random_gmm(rng: &mut ChaCha8Rng, k: usize, d: usize) -> GmmModel {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let means = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let covariances = (0..k)
        .map(|_| {
            // A A^T + 0.1 I
            let a: Vec<f64> = (0..d * d).map(|_| rng.random_range(-0.6..0.6)).collect();
            let mut s = vec![0.0; d * d];
            for r in 0..d {
                for c in 0..d {
                    s[r * d + c] = (0..d).map(|t| a[r * d + t] * a[c * d + t]).sum::<f64>();
                }
                s[r * d + r] += 0.1;
            }
            s
        })
        .collect();
    GmmModel::new(weights, means, covariances, names(d)).expect("valid mixture")
}

pub fn random_stack(rng: &mut ChaCha8Rng, w: usize, h: usize, d: usize) -> FeatureStack {
    let data = (0..w * h * d)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    FeatureStack::new(w, h, names(d), data).expect("valid stack")
}

pub fn random_labels(rng: &mut ChaCha8Rng, w: usize, h: usize, k: usize) -> LabelMap {
    LabelMap::new(
        w,
        h,
        k,
        (0..w * h).map(|_| rng.random_range(0..k)).collect(),
    )
    .expect("valid labels")
}

/// Interior mean endpoint error against a constant true flow.
pub fn interior_epe(
    u: &[f64],
    v: &[f64],
    w: usize,
    h: usize,
    margin: usize,
    truth: (f64, f64),
) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for r in margin..h - margin {
        for c in margin..w - margin {
            let i = r * w + c;
            sum += (u[i] - truth.0).hypot(v[i] - truth.1);
            n += 1;
        }
    }
    sum / n as f64
}

/// Relative non-decrease check: `b >= a - tol * max(1, |a|)`.
pub fn not_below(a: f64, b: f64, tol: f64) -> bool {
    b >= a - tol * a.abs().max(1.0)
}

/// `kappa I + lambda L` for the 4-connected `w x h` grid.
pub fn dense_precision(w: usize, h: usize, lambda: f64, kappa: f64) -> DMatrix<f64> {
    let n = w * h;
    let mut m = DMatrix::<f64>::identity(n, n) * kappa;
    for i in 0..n {
        let (r, c) = (i / w, i % w);
        let mut nbrs = Vec::new();
        if r > 0 {
            nbrs.push(i - w);
        }
        if r + 1 < h {
            nbrs.push(i + w);
        }
        if c > 0 {
            nbrs.push(i - 1);
        }
        if c + 1 < w {
            nbrs.push(i + 1);
        }
        for j in nbrs {
            m[(i, i)] += lambda;
            m[(i, j)] -= lambda;
        }
    }
    m
}

/// Direct solve of `(kappa I + lambda L) x = b`.
pub fn dense_solve(b: &[f64], w: usize, h: usize, lambda: f64, kappa: f64) -> Vec<f64> {
    let x = dense_precision(w, h, lambda, kappa)
        .lu()
        .solve(&DVector::from_row_slice(b))
        .expect("positive definite");
    x.iter().copied().collect()
}
