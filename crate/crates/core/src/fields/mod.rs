//! Spatially regularized segmentation on the 4-connected pixel grid.
//!
//! Both segmenters reuse a fitted [`GmmModel`](crate::cluster::GmmModel)
//! as their class-conditional likelihood.

pub mod gmrf;
pub mod mrf;

pub use gmrf::{gauss_seidel, gmrf_segment, GmrfParams, GmrfResult};
pub use mrf::{
    icm_segment, label_prior_energy, likelihood_energy, posterior_energy, prior_energy,
    EnergyBreakdown, IcmResult, MrfParams, VisitOrder,
};

/// Calls `f` with the index of every 4-neighbor of pixel `i`.
#[inline]
pub(crate) fn for_each_neighbor(i: usize, w: usize, h: usize, mut f: impl FnMut(usize)) {
    let (r, c) = (i / w, i % w);
    if r > 0 {
        f(i - w);
    }
    if c > 0 {
        f(i - 1);
    }
    if c + 1 < w {
        f(i + 1);
    }
    if r + 1 < h {
        f(i + w);
    }
}
