//! Potts Markov random field optimized by iterated conditional modes.
//!
//! The posterior energy of a labeling `y` is
//!
//! ```text
//! U(y | x) = sum_i -log N(x_i | mu_{y_i}, Sigma_{y_i})        likelihood
//!          + sum_i -log pi_{y_i}                              singleton cliques
//!          + sum_{i~j} (beta if y_i != y_j else -beta)         pair cliques
//! ```
//!
//! With `beta = 0` the minimizer is the per-pixel mixture MAP labeling.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::for_each_neighbor;
use crate::cluster::GmmModel;
use crate::error::{Error, Result};
use crate::raster::{FeatureStack, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VisitOrder {
    /// Row by row, left to right.
    #[default]
    Raster,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MrfParams {
    /// Potts coupling; larger values favor homogeneous regions.
    pub beta: f64,
    pub max_sweeps: usize,
    #[serde(default)]
    pub visit_order: VisitOrder,
}

impl Default for MrfParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            max_sweeps: 50,
            visit_order: VisitOrder::Raster,
        }
    }
}

impl MrfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mrf beta must be >= 0, got {}",
                self.beta
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter(
                "mrf max_sweeps must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub likelihood_energy: f64,
    /// Singleton plus pairwise clique potentials.
    pub prior_energy: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(likelihood_energy: f64, prior_energy: f64) -> Self {
        Self {
            likelihood_energy,
            prior_energy,
            total: likelihood_energy + prior_energy,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IcmResult {
    pub labels: LabelMap,
    pub sweeps: usize,
    /// Energy of the initial labeling followed by the energy after each sweep.
    pub history: Vec<EnergyBreakdown>,
}

impl IcmResult {
    /// `sweep,likelihood_energy,prior_energy,total` rows.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("sweep,likelihood_energy,prior_energy,total\n");
        for (i, e) in self.history.iter().enumerate() {
            let _ = writeln!(
                s,
                "{i},{:.12e},{:.12e},{:.12e}",
                e.likelihood_energy, e.prior_energy, e.total
            );
        }
        s
    }
}

fn check_inputs(stack: &FeatureStack, model: &GmmModel, labels: &LabelMap) -> Result<()> {
    if labels.k() != model.k {
        return Err(Error::ClassCountMismatch(labels.k(), model.k));
    }
    if labels.dims() != (stack.width(), stack.height()) {
        return Err(Error::dims((stack.width(), stack.height()), labels.dims()));
    }
    Ok(())
}

/// Sum of per-pixel negative log class-conditional densities.
pub fn likelihood_energy(stack: &FeatureStack, model: &GmmModel, labels: &LabelMap) -> Result<f64> {
    check_inputs(stack, model, labels)?;
    let ld = model.component_log_densities(stack)?;
    Ok(labels
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &y)| -ld[i * model.k + y])
        .sum())
}

/// Pairwise Potts energy over the 4-neighborhood, each pair counted once.
pub fn prior_energy(labels: &LabelMap, beta: f64) -> f64 {
    let (w, h) = labels.dims();
    let l = labels.labels();
    let mut agree = 0i64;
    let mut disagree = 0i64;
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w {
                if l[i] == l[i + 1] {
                    agree += 1;
                } else {
                    disagree += 1;
                }
            }
            if r + 1 < h {
                if l[i] == l[i + w] {
                    agree += 1;
                } else {
                    disagree += 1;
                }
            }
        }
    }
    beta * (disagree - agree) as f64
}

/// Singleton clique energy `sum_i -log pi_{y_i}`.
pub fn label_prior_energy(labels: &LabelMap, model: &GmmModel) -> Result<f64> {
    if labels.k() != model.k {
        return Err(Error::ClassCountMismatch(labels.k(), model.k));
    }
    Ok(labels
        .labels()
        .iter()
        .map(|&y| -model.weights[y].ln())
        .sum())
}

pub fn posterior_energy(
    stack: &FeatureStack,
    model: &GmmModel,
    labels: &LabelMap,
    beta: f64,
) -> Result<EnergyBreakdown> {
    let lik = likelihood_energy(stack, model, labels)?;
    let single = label_prior_energy(labels, model)?;
    Ok(EnergyBreakdown::new(
        lik,
        single + prior_energy(labels, beta),
    ))
}

/// Greedy coordinate descent on the posterior energy.
///
/// Each pixel moves to the label with the lowest local energy, reading its
/// neighbors' current labels; a label only changes on a strict decrease.
pub fn icm_segment(
    stack: &FeatureStack,
    model: &GmmModel,
    p: &MrfParams,
    init: &LabelMap,
) -> Result<IcmResult> {
    p.validate()?;
    check_inputs(stack, model, init)?;
    let k = model.k;
    let (w, h) = init.dims();
    let log_dens = model.component_log_densities(stack)?;
    let neg_log_w: Vec<f64> = model.weights.iter().map(|w| -w.ln()).collect();
    // unary[i*k + c] = -log pi_c - log N(x_i | c)
    let unary: Vec<f64> = log_dens
        .iter()
        .enumerate()
        .map(|(j, ld)| neg_log_w[j % k] - ld)
        .collect();

    let mut labels = init.labels().to_vec();
    let breakdown = |labels: &[usize]| -> Result<EnergyBreakdown> {
        let lik: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| -log_dens[i * k + y])
            .sum();
        let single: f64 = labels.iter().map(|&y| neg_log_w[y]).sum();
        let map = LabelMap::new(w, h, k, labels.to_vec())?;
        Ok(EnergyBreakdown::new(
            lik,
            single + prior_energy(&map, p.beta),
        ))
    };

    let mut history = vec![breakdown(&labels)?];
    let mut local = vec![0.0; k];
    let mut sweeps = 0;
    while sweeps < p.max_sweeps {
        sweeps += 1;
        let mut changed = 0usize;
        match p.visit_order {
            VisitOrder::Raster => {
                for i in 0..w * h {
                    local.copy_from_slice(&unary[i * k..(i + 1) * k]);
                    for_each_neighbor(i, w, h, |j| {
                        let yj = labels[j];
                        for (c, e) in local.iter_mut().enumerate() {
                            *e += if c == yj { -p.beta } else { p.beta };
                        }
                    });
                    let cur = labels[i];
                    let mut best = cur;
                    let mut best_e = local[cur];
                    for (c, &e) in local.iter().enumerate() {
                        if e < best_e {
                            best = c;
                            best_e = e;
                        }
                    }
                    if best != cur {
                        labels[i] = best;
                        changed += 1;
                    }
                }
            }
        }
        let e = breakdown(&labels)?;
        if !e.total.is_finite() {
            return Err(Error::NonFinite("icm energy".into()));
        }
        history.push(e);
        if changed == 0 {
            break;
        }
    }
    Ok(IcmResult {
        labels: LabelMap::new(w, h, k, labels)?,
        sweeps,
        history,
    })
}
