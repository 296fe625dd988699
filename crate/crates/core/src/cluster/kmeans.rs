use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmin, sq_dist};
use crate::error::{Error, Result};
use crate::raster::{FeatureStack, LabelMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub channel_names: Vec<String>,
    /// Within-cluster sum of squares of the training labeling.
    pub wcss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop when the WCSS improves by less than this.
    pub tol: f64,
    /// Independent k-means++ starts; the lowest final WCSS wins.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_restarts() -> usize {
    10
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            k: 3,
            seed: 0,
            max_iters: 100,
            tol: 1e-6,
            restarts: default_restarts(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub model: KMeansModel,
    pub labels: LabelMap,
    pub iterations: usize,
    /// WCSS after every assignment step.
    pub wcss_history: Vec<f64>,
}

fn assign_points(stack: &FeatureStack, centroids: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut wcss = 0.0;
    for (label, px) in labels.iter_mut().zip(stack.pixels()) {
        let j = argmin(centroids.iter().map(|c| sq_dist(px, c)));
        *label = j;
        wcss += sq_dist(px, &centroids[j]);
    }
    wcss
}

fn plus_plus_init(stack: &FeatureStack, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = stack.len();
    let mut centroids = vec![stack.pixel(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = stack.pixels().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = stack.pixel(pick).to_vec();
        for (d, p) in d2.iter_mut().zip(stack.pixels()) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Recomputes centroids as cluster means. An empty cluster takes over the
/// point lying farthest from its own centroid; a cluster that is still
/// empty afterwards is reported.
fn update_centroids(
    stack: &FeatureStack,
    labels: &mut [usize],
    centroids: &mut [Vec<f64>],
) -> Result<()> {
    let k = centroids.len();
    let d = stack.dims();
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let worst = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| {
                let da = sq_dist(stack.pixel(a), &centroids[labels[a]]);
                let db = sq_dist(stack.pixel(b), &centroids[labels[b]]);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .ok_or(Error::EmptyCluster(j))?;
        counts[labels[worst]] -= 1;
        labels[worst] = j;
        counts[j] = 1;
    }
    for c in centroids.iter_mut() {
        c.iter_mut().for_each(|x| *x = 0.0);
    }
    for (px, &l) in stack.pixels().zip(labels.iter()) {
        for t in 0..d {
            centroids[l][t] += px[t];
        }
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|x| *x /= n as f64);
    }
    Ok(())
}

/// Lloyd iterations from `restarts` k-means++ starts drawn from one seeded
/// stream. Returns the run with the lowest final WCSS, the earliest on ties.
pub fn kmeans_fit(stack: &FeatureStack, opts: &KMeansOptions) -> Result<KMeansFit> {
    let k = opts.k;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidParameter(
            "k-means restarts must be >= 1".into(),
        ));
    }
    if stack.len() < k {
        return Err(Error::TooFewPoints {
            points: stack.len(),
            required: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<KMeansFit> = None;
    let mut first_err = None;
    for _ in 0..opts.restarts {
        let init = plus_plus_init(stack, k, &mut rng);
        match lloyd(stack, opts, init) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.model.wcss < b.model.wcss) {
                    best = Some(fit);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one run"))
}

fn lloyd(
    stack: &FeatureStack,
    opts: &KMeansOptions,
    mut centroids: Vec<Vec<f64>>,
) -> Result<KMeansFit> {
    let k = opts.k;
    let mut labels = vec![0usize; stack.len()];
    let mut prev_labels: Option<Vec<usize>> = None;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut previously_empty = vec![false; k];

    while iterations < opts.max_iters {
        iterations += 1;
        let wcss = assign_points(stack, &centroids, &mut labels);
        let unchanged = prev_labels.as_deref() == Some(&labels[..]);
        let small_gain = history
            .last()
            .is_some_and(|&p: &f64| (p - wcss).abs() < opts.tol);
        history.push(wcss);
        if unchanged || small_gain {
            converged = true;
            break;
        }
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        for j in 0..k {
            if counts[j] == 0 && previously_empty[j] {
                return Err(Error::DegenerateComponent(j));
            }
            previously_empty[j] = counts[j] == 0;
        }
        update_centroids(stack, &mut labels, &mut centroids)?;
        prev_labels = Some(labels.clone());
    }
    if !converged {
        let wcss = assign_points(stack, &centroids, &mut labels);
        history.push(wcss);
    }
    let wcss = *history.last().expect("at least one assignment");
    Ok(KMeansFit {
        model: KMeansModel {
            k,
            centroids,
            channel_names: stack.channel_names().to_vec(),
            wcss,
        },
        labels: LabelMap::new(stack.width(), stack.height(), k, labels)?,
        iterations,
        wcss_history: history,
    })
}

/// Nearest-centroid labeling; ties go to the lowest cluster index.
pub fn kmeans_assign(model: &KMeansModel, stack: &FeatureStack) -> Result<LabelMap> {
    stack.ensure_channels(&model.channel_names)?;
    let mut labels = vec![0usize; stack.len()];
    assign_points(stack, &model.centroids, &mut labels);
    LabelMap::new(stack.width(), stack.height(), model.k, labels)
}
