//! Unsupervised pixel clustering.
//!
//! [`kmeans`] implements Lloyd iterations from a k-means++ start; [`gmm`]
//! fits a full-covariance Gaussian mixture by expectation maximization and
//! provides the class-conditional densities the random-field segmenters
//! reuse.

pub mod gmm;
pub mod kmeans;

pub use gmm::{
    gmm_e_step, gmm_fit, gmm_log_likelihood, gmm_m_step, map_labels, GmmFit, GmmModel, GmmOptions,
    Responsibilities,
};
pub use kmeans::{kmeans_assign, kmeans_fit, KMeansFit, KMeansModel, KMeansOptions};

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the smallest value; ties go to the lowest index.
#[inline]
pub(crate) fn argmin(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v < best_v || i == 0 {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Index of the largest value; ties go to the lowest index.
#[inline]
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    argmin(values.into_iter().map(|v| -v))
}

#[inline]
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}
