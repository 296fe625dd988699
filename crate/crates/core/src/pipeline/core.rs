use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Method, PipelineConfig, CONFIG_VERSION};
use crate::cluster::{
    gmm_fit, kmeans_assign, kmeans_fit, map_labels, GmmModel, GmmOptions, KMeansModel,
    KMeansOptions,
};
use crate::error::{Error, Result};
use crate::eval::assign_semantics_pooled;
use crate::features::{
    build_feature_stack, divergence, fit_channel_stats, normalize, ChannelStats,
};
use crate::fields::{gmrf_segment, icm_segment};
use crate::flow::horn_schunck;
use crate::raster::{ClassSemantics, FeatureStack, Frame, LabelMap, ScalarField};
use crate::siftflow::sift_flow_magnitude;

/// Raw (unnormalized) features of frame `i`; motion channels use the pair
/// `(i, i + 1)`, or the last pair for the final frame.
pub fn frame_features(frames: &[Frame], i: usize, cfg: &PipelineConfig) -> Result<FeatureStack> {
    let n = frames.len();
    let f = &cfg.features;
    if (f.needs_flow() || f.use_sift_flow) && n < 2 {
        return Err(Error::TooFewFrames {
            found: n,
            needed: 2,
        });
    }
    let (a, b) = if i + 1 < n {
        (i, i + 1)
    } else {
        (n - 2, n - 1)
    };
    let flow = if f.needs_flow() {
        let out = horn_schunck(&frames[a], &frames[b], &cfg.hs)?;
        Some(out.flow)
    } else {
        None
    };
    let div = match (&flow, f.use_divergence) {
        (Some(fl), true) => Some(divergence(fl)),
        _ => None,
    };
    let sift = if f.use_sift_flow {
        Some(sift_flow_magnitude(&frames[a], &frames[b], &cfg.sift)?)
    } else {
        None
    };
    build_feature_stack(&frames[i], flow.as_ref(), div.as_ref(), sift.as_ref(), f)
}

/// Features of the frames at `indices`, computed in parallel.
pub fn sequence_features(
    frames: &[Frame],
    indices: &[usize],
    cfg: &PipelineConfig,
) -> Result<Vec<FeatureStack>> {
    indices
        .par_iter()
        .map(|&i| frame_features(frames, i, cfg))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClusterModel {
    Kmeans(KMeansModel),
    Gmm(GmmModel),
}

/// The serialized model: cluster parameters plus their semantic classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub method: Method,
    pub channel_names: Vec<String>,
    pub training_frames: usize,
    pub model: ClusterModel,
    pub semantics: ClassSemantics,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: ModelFile,
    pub stats: ChannelStats,
    /// WCSS per k-means iteration (k-means models only).
    pub wcss_history: Vec<f64>,
    /// Log-likelihood per EM round (mixture models only).
    pub ll_history: Vec<f64>,
}

fn stack_rows(stacks: &[FeatureStack]) -> Result<FeatureStack> {
    let first = stacks.first().ok_or(Error::EmptyInput)?;
    let data: Vec<f64> = stacks
        .iter()
        .flat_map(|s| s.data().iter().copied())
        .collect();
    FeatureStack::new(
        first.width(),
        first.height() * stacks.len(),
        first.channel_names().to_vec(),
        data,
    )
}

/// Fits statistics, the cluster model and semantics on training stacks
/// (raw features) and their frames.
pub fn train_on_stacks(
    stacks: &[FeatureStack],
    frames: &[Frame],
    cfg: &PipelineConfig,
) -> Result<Trained> {
    cfg.validate()?;
    let stats = fit_channel_stats(stacks)?;
    let normalized: Vec<FeatureStack> = stacks
        .iter()
        .map(|s| normalize(s, &stats))
        .collect::<Result<_>>()?;
    let pooled = stack_rows(&normalized)?;
    let (model, labels, wcss_history, ll_history) = match cfg.method {
        Method::Kmeans => {
            let fit = kmeans_fit(
                &pooled,
                &KMeansOptions {
                    k: cfg.k,
                    seed: cfg.seed,
                    max_iters: cfg.kmeans.max_iters,
                    tol: cfg.kmeans.tol,
                    restarts: cfg.kmeans.restarts,
                },
            )?;
            (
                ClusterModel::Kmeans(fit.model),
                fit.labels,
                fit.wcss_history,
                Vec::new(),
            )
        }
        _ => {
            let fit = gmm_fit(
                &pooled,
                &GmmOptions {
                    k: cfg.k,
                    seed: cfg.seed,
                    max_iters: cfg.gmm.max_iters,
                    tol: cfg.gmm.tol,
                    reg: cfg.gmm.reg,
                },
            )?;
            let labels = map_labels(&fit.model, &pooled)?;
            (
                ClusterModel::Gmm(fit.model),
                labels,
                Vec::new(),
                fit.ll_history,
            )
        }
    };
    let first = &frames[0];
    let intensity: Vec<f64> = frames
        .iter()
        .flat_map(|f| f.data().iter().copied())
        .collect();
    let intensity = ScalarField::new(first.width(), first.height() * frames.len(), intensity)?;
    let semantics = assign_semantics_pooled(&[(&labels, &intensity)])?;
    Ok(Trained {
        model: ModelFile {
            version: CONFIG_VERSION,
            method: cfg.method,
            channel_names: stats.channel_names.clone(),
            training_frames: stacks.len(),
            model,
            semantics,
        },
        stats,
        wcss_history,
        ll_history,
    })
}

/// Trains on the first `training_frames` frames of a sequence.
pub fn train(frames: &[Frame], cfg: &PipelineConfig) -> Result<Trained> {
    cfg.validate()?;
    let t = cfg.features.training_frames;
    if frames.len() < t + 1 {
        return Err(Error::TooFewFrames {
            found: frames.len(),
            needed: t + 1,
        });
    }
    let idx: Vec<usize> = (0..t).collect();
    let stacks = sequence_features(frames, &idx, cfg)?;
    train_on_stacks(&stacks, &frames[..t], cfg)
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    /// Cluster indices.
    pub clusters: LabelMap,
    /// Semantic class indices.
    pub semantic: LabelMap,
    /// Convergence trace for the random-field methods.
    pub energy_csv: Option<String>,
}

/// Segments one frame's raw features with a trained model.
pub fn segment_stack(
    stack: &FeatureStack,
    model: &ModelFile,
    stats: &ChannelStats,
    cfg: &PipelineConfig,
) -> Result<Segmentation> {
    if model.channel_names != stats.channel_names {
        return Err(Error::ChannelMismatch {
            expected: model.channel_names.clone(),
            found: stats.channel_names.clone(),
        });
    }
    let x = normalize(stack, stats)?;
    let (clusters, energy_csv) = match (&model.model, cfg.method) {
        (ClusterModel::Kmeans(m), Method::Kmeans) => (kmeans_assign(m, &x)?, None),
        (ClusterModel::Gmm(m), Method::Gmm) => (map_labels(m, &x)?, None),
        (ClusterModel::Gmm(m), Method::Mrf) => {
            let init = map_labels(m, &x)?;
            let out = icm_segment(&x, m, &cfg.mrf, &init)?;
            let csv = out.history_csv();
            (out.labels, Some(csv))
        }
        (ClusterModel::Gmm(m), Method::Gmrf) => {
            let out = gmrf_segment(&x, m, &cfg.gmrf)?;
            let csv = out.residual_csv();
            (out.labels, Some(csv))
        }
        (_, method) => {
            return Err(Error::Config(format!(
                "a {} model cannot segment with method {}",
                model.method.name(),
                method.name()
            )))
        }
    };
    let semantic = model.semantics.apply(&clusters)?;
    Ok(Segmentation {
        clusters,
        semantic,
        energy_csv,
    })
}
