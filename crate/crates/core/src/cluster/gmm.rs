use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans_fit, KMeansOptions};
use super::{argmax, log_sum_exp};
use crate::error::{Error, Result};
use crate::raster::{FeatureStack, LabelMap};

/// Components whose summed responsibility falls below this are degenerate.
pub const MIN_EFFECTIVE_COUNT: f64 = 1e-8;

/// A full-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub k: usize,
    pub dims: usize,
    pub channel_names: Vec<String>,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Row-major `dims x dims` covariance per component.
    pub covariances: Vec<Vec<f64>>,
    /// Training log-likelihood, set by [`gmm_fit`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_likelihood: Option<f64>,
}

/// Cholesky-factored component used for density evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Component {
    mean: Vec<f64>,
    /// Lower-triangular factor, row-major.
    chol: Vec<f64>,
    /// `-(d/2) log 2pi - (1/2) log |Sigma|`
    log_norm: f64,
}

impl Component {
    fn new(mean: &[f64], cov: &[f64], k: usize) -> Result<Self> {
        let d = mean.len();
        let m = DMatrix::from_row_slice(d, d, cov);
        let chol = m.cholesky().ok_or_else(|| {
            Error::InvalidParameter(format!("covariance {k} is not positive definite"))
        })?;
        let l = chol.l();
        let mut flat = vec![0.0; d * d];
        let mut log_det = 0.0;
        for i in 0..d {
            for j in 0..=i {
                flat[i * d + j] = l[(i, j)];
            }
            log_det += 2.0 * l[(i, i)].ln();
        }
        Ok(Self {
            mean: mean.to_vec(),
            chol: flat,
            log_norm: -0.5 * d as f64 * (2.0 * PI).ln() - 0.5 * log_det,
        })
    }

    /// Squared Mahalanobis distance via forward substitution.
    #[inline]
    fn mahalanobis(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        let mut y = [0.0f64; 8];
        let mut heap;
        let y: &mut [f64] = if d <= 8 {
            &mut y[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut q = 0.0;
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for j in 0..i {
                s -= self.chol[i * d + j] * y[j];
            }
            y[i] = s / self.chol[i * d + i];
            q += y[i] * y[i];
        }
        q
    }

    #[inline]
    pub(crate) fn log_density(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis(x)
    }
}

impl GmmModel {
    /// Validates weights and covariances.
    pub fn new(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<f64>>,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        let k = weights.len();
        let dims = channel_names.len();
        if k == 0 || means.len() != k || covariances.len() != k {
            return Err(Error::InvalidParameter(
                "weights, means and covariances must have k >= 1 entries".into(),
            ));
        }
        if means.iter().any(|m| m.len() != dims)
            || covariances.iter().any(|c| c.len() != dims * dims)
        {
            return Err(Error::DimensionMismatch {
                expected: format!("{dims} channels"),
                found: "mismatched mean/covariance sizes".into(),
            });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 || weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "mixture weights must be positive and sum to 1 (sum = {total})"
            )));
        }
        for c in &covariances {
            for i in 0..dims {
                for j in 0..i {
                    if (c[i * dims + j] - c[j * dims + i]).abs()
                        > 1e-12 * (1.0 + c[i * dims + j].abs())
                    {
                        return Err(Error::InvalidParameter(
                            "covariance is not symmetric".into(),
                        ));
                    }
                }
            }
        }
        let model = Self {
            k,
            dims,
            channel_names,
            weights,
            means,
            covariances,
            log_likelihood: None,
        };
        model.components()?;
        Ok(model)
    }

    pub(crate) fn components(&self) -> Result<Vec<Component>> {
        self.means
            .iter()
            .zip(&self.covariances)
            .enumerate()
            .map(|(k, (m, c))| Component::new(m, c, k))
            .collect()
    }

    pub(crate) fn check_stack(&self, stack: &FeatureStack) -> Result<()> {
        if stack.dims() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: format!("{} channels", self.dims),
                found: format!("{} channels", stack.dims()),
            });
        }
        stack.ensure_channels(&self.channel_names)
    }

    /// `log N(x_i | mu_k, Sigma_k)` for every pixel, `n x k` row-major.
    pub fn component_log_densities(&self, stack: &FeatureStack) -> Result<Vec<f64>> {
        self.check_stack(stack)?;
        let comps = self.components()?;
        let mut out = Vec::with_capacity(stack.len() * self.k);
        for px in stack.pixels() {
            out.extend(comps.iter().map(|c| c.log_density(px)));
        }
        Ok(out)
    }

    /// `log pi_k + log N(x_i | mu_k, Sigma_k)`, `n x k` row-major.
    pub fn log_joint(&self, stack: &FeatureStack) -> Result<Vec<f64>> {
        let mut out = self.component_log_densities(stack)?;
        let log_w: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();
        for row in out.chunks_exact_mut(self.k) {
            for (v, lw) in row.iter_mut().zip(&log_w) {
                *v += lw;
            }
        }
        Ok(out)
    }

    /// Per-pixel log posterior `log gamma_ik`, `n x k` row-major.
    pub fn log_posteriors(&self, stack: &FeatureStack) -> Result<Vec<f64>> {
        let mut out = self.log_joint(stack)?;
        for row in out.chunks_exact_mut(self.k) {
            let lse = log_sum_exp(row);
            row.iter_mut().for_each(|v| *v -= lse);
        }
        Ok(out)
    }
}

/// Posterior component memberships, `n x k` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    pub n: usize,
    pub k: usize,
    pub gamma: Vec<f64>,
}

impl Responsibilities {
    pub fn new(n: usize, k: usize, gamma: Vec<f64>) -> Result<Self> {
        if gamma.len() != n * k {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{k}"),
                found: format!("{} entries", gamma.len()),
            });
        }
        if gamma.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::InvalidParameter(
                "responsibility outside [0, 1]".into(),
            ));
        }
        for row in gamma.chunks_exact(k) {
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(
                    "responsibility row does not sum to 1".into(),
                ));
            }
        }
        Ok(Self { n, k, gamma })
    }

    /// One-hot responsibilities from a hard labeling.
    pub fn from_labels(labels: &LabelMap) -> Self {
        let k = labels.k();
        let mut gamma = vec![0.0; labels.labels().len() * k];
        for (i, &l) in labels.labels().iter().enumerate() {
            gamma[i * k + l] = 1.0;
        }
        Self {
            n: labels.labels().len(),
            k,
            gamma,
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.gamma[i * self.k..(i + 1) * self.k]
    }
}

/// E-step plus the log-likelihood of `model`, sharing one density pass.
fn e_step_with_ll(model: &GmmModel, stack: &FeatureStack) -> Result<(Responsibilities, f64)> {
    let mut gamma = model.log_joint(stack)?;
    let mut ll = 0.0;
    for row in gamma.chunks_exact_mut(model.k) {
        let lse = log_sum_exp(row);
        ll += lse;
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
            s += *v;
        }
        // absorb rounding so rows sum to one
        row.iter_mut().for_each(|v| *v /= s);
    }
    if !ll.is_finite() {
        return Err(Error::NonFinite("gmm log-likelihood".into()));
    }
    Ok((
        Responsibilities {
            n: stack.len(),
            k: model.k,
            gamma,
        },
        ll,
    ))
}

pub fn gmm_e_step(model: &GmmModel, stack: &FeatureStack) -> Result<Responsibilities> {
    e_step_with_ll(model, stack).map(|(r, _)| r)
}

pub fn gmm_log_likelihood(model: &GmmModel, stack: &FeatureStack) -> Result<f64> {
    let lj = model.log_joint(stack)?;
    Ok(lj.chunks_exact(model.k).map(log_sum_exp).sum())
}

struct Moments {
    counts: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<Vec<f64>>,
}

fn weighted_moments(stack: &FeatureStack, r: &Responsibilities, reg: f64) -> Moments {
    let (k, d) = (r.k, stack.dims());
    let mut counts = vec![0.0; k];
    let mut means = vec![vec![0.0; d]; k];
    for (i, px) in stack.pixels().enumerate() {
        for (j, &g) in r.row(i).iter().enumerate() {
            counts[j] += g;
            for t in 0..d {
                means[j][t] += g * px[t];
            }
        }
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        if c > 0.0 {
            m.iter_mut().for_each(|x| *x /= c);
        }
    }
    let mut covs = vec![vec![0.0; d * d]; k];
    let mut diff = vec![0.0; d];
    for (i, px) in stack.pixels().enumerate() {
        for (j, &g) in r.row(i).iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for t in 0..d {
                diff[t] = px[t] - means[j][t];
            }
            for a in 0..d {
                for b in 0..=a {
                    covs[j][a * d + b] += g * diff[a] * diff[b];
                }
            }
        }
    }
    for (cov, &c) in covs.iter_mut().zip(&counts) {
        for a in 0..d {
            for b in 0..=a {
                let v = if c > 0.0 { cov[a * d + b] / c } else { 0.0 };
                cov[a * d + b] = v;
                cov[b * d + a] = v;
            }
            cov[a * d + a] += reg;
        }
    }
    Moments {
        counts,
        means,
        covs,
    }
}

/// M-step: weights, weighted means and full weighted covariances plus
/// `reg` on the diagonal.
pub fn gmm_m_step(stack: &FeatureStack, r: &Responsibilities, reg: f64) -> Result<GmmModel> {
    if r.n != stack.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} pixels", stack.len()),
            found: format!("{} responsibility rows", r.n),
        });
    }
    if !(reg > 0.0) {
        return Err(Error::InvalidParameter(
            "covariance floor must be > 0".into(),
        ));
    }
    let m = weighted_moments(stack, r, reg);
    if let Some(j) = m.counts.iter().position(|&c| c < MIN_EFFECTIVE_COUNT) {
        return Err(Error::DegenerateComponent(j));
    }
    let n = stack.len() as f64;
    let weights = normalized(m.counts.iter().map(|c| c / n).collect());
    GmmModel::new(weights, m.means, m.covs, stack.channel_names().to_vec())
}

fn normalized(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Replaces component `j` by a broad component centred on the point with
/// the lowest mixture log-density.
fn reseed_component(
    model: &GmmModel,
    stack: &FeatureStack,
    r: &Responsibilities,
    j: usize,
    reg: f64,
) -> Result<GmmModel> {
    let m = weighted_moments(stack, r, reg);
    let lj = model.log_joint(stack)?;
    let worst = lj
        .chunks_exact(model.k)
        .map(log_sum_exp)
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .ok_or(Error::EmptyInput)?;
    let all = Responsibilities::new(stack.len(), 1, vec![1.0; stack.len()])?;
    let global = weighted_moments(stack, &all, reg);
    let n = stack.len() as f64;
    let mut weights: Vec<f64> = m.counts.iter().map(|c| c / n).collect();
    let mut means = m.means;
    let mut covs = m.covs;
    weights[j] = 1.0 / n;
    means[j] = stack.pixel(worst).to_vec();
    covs[j] = global.covs[0].clone();
    if let Some(other) = weights.iter().position(|&w| w * n < MIN_EFFECTIVE_COUNT) {
        return Err(Error::DegenerateComponent(other));
    }
    GmmModel::new(
        normalized(weights),
        means,
        covs,
        stack.channel_names().to_vec(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmOptions {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop when the log-likelihood changes by less than this.
    pub tol: f64,
    /// Added to every covariance diagonal.
    pub reg: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            k: 3,
            seed: 0,
            max_iters: 100,
            tol: 1e-5,
            reg: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmModel,
    pub labels: LabelMap,
    pub iterations: usize,
    /// Log-likelihood of the initial model, then after every EM round.
    pub ll_history: Vec<f64>,
    /// History index at which a degenerate component was re-seeded.
    pub reseeded_at: Option<usize>,
}

/// Most probable component per pixel; ties go to the lowest index.
pub fn map_labels(model: &GmmModel, stack: &FeatureStack) -> Result<LabelMap> {
    let lj = model.log_joint(stack)?;
    let labels = lj
        .chunks_exact(model.k)
        .map(|row| argmax(row.iter().copied()))
        .collect();
    LabelMap::new(stack.width(), stack.height(), model.k, labels)
}

/// EM from a k-means start (same seed).
pub fn gmm_fit(stack: &FeatureStack, opts: &GmmOptions) -> Result<GmmFit> {
    let required = opts.k * (stack.dims() + 1);
    if opts.k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if stack.len() < required {
        return Err(Error::TooFewPoints {
            points: stack.len(),
            required,
        });
    }
    let km = kmeans_fit(
        stack,
        &KMeansOptions {
            k: opts.k,
            seed: opts.seed,
            max_iters: 100,
            tol: 1e-6,
            ..KMeansOptions::default()
        },
    )?;
    let init = Responsibilities::from_labels(&km.labels);
    let mut model = gmm_m_step(stack, &init, opts.reg)?;
    let (mut resp, mut ll) = e_step_with_ll(&model, stack)?;
    let mut history = vec![ll];
    let mut reseeded_at = None;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        model = match gmm_m_step(stack, &resp, opts.reg) {
            Ok(m) => m,
            Err(Error::DegenerateComponent(j)) if reseeded_at.is_none() => {
                log::warn!("gmm component {j} degenerated; re-seeding");
                reseeded_at = Some(history.len());
                reseed_component(&model, stack, &resp, j, opts.reg)?
            }
            Err(e) => return Err(e),
        };
        let prev = ll;
        (resp, ll) = e_step_with_ll(&model, stack)?;
        history.push(ll);
        if (ll - prev).abs() < opts.tol {
            break;
        }
    }
    model.log_likelihood = Some(ll);
    let labels = map_labels(&model, stack)?;
    Ok(GmmFit {
        model,
        labels,
        iterations,
        ll_history: history,
        reseeded_at,
    })
}
