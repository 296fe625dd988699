use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{Method, PipelineConfig};
use super::core::{segment_stack, sequence_features, train_on_stacks, Trained};
use crate::error::Result;
use crate::eval::{confusion, metrics, ConfusionMatrix, Metrics};
use crate::features::FeatureConfig;
use crate::raster::SemanticClass;
use crate::synth::{benchmark_suite, generate, SceneSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSet {
    Intensity,
    Full,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 2] = [FeatureSet::Intensity, FeatureSet::Full];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Intensity => "intensity",
            FeatureSet::Full => "full",
        }
    }

    pub fn config(self, training_frames: usize) -> FeatureConfig {
        let base = match self {
            FeatureSet::Intensity => FeatureConfig::intensity_only(),
            FeatureSet::Full => FeatureConfig::full(),
        };
        FeatureConfig {
            training_frames,
            ..base
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    /// Scene name, or `pooled` for the suite total.
    pub scene: String,
    pub method: Method,
    pub features: FeatureSet,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

/// Convergence traces of one training run.
#[derive(Debug, Clone)]
pub struct TrainingTrace {
    pub scene: String,
    pub features: FeatureSet,
    pub method: Method,
    pub wcss_history: Vec<f64>,
    pub ll_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    /// Per-scene rows in suite order, then the pooled rows.
    pub rows: Vec<BenchRow>,
    pub training: Vec<TrainingTrace>,
}

impl BenchReport {
    pub fn pooled(&self, method: Method, features: FeatureSet) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.scene == "pooled" && r.method == method && r.features == features)
    }

    /// `scene,method,features,accuracy,recall_*,precision_*` table.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scene,method,features,accuracy");
        for c in SemanticClass::ALL {
            let _ = write!(s, ",recall_{}", c.name());
        }
        for c in SemanticClass::ALL {
            let _ = write!(s, ",precision_{}", c.name());
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(
                s,
                "{},{},{},{:.6}",
                r.scene,
                r.method.name(),
                r.features.name(),
                r.metrics.accuracy
            );
            for v in r
                .metrics
                .per_class_recall
                .iter()
                .chain(&r.metrics.per_class_precision)
            {
                let _ = write!(s, ",{v:.6}");
            }
            s.push('\n');
        }
        s
    }
}

struct SceneResult {
    rows: Vec<BenchRow>,
    training: Vec<TrainingTrace>,
}

fn run_scene(spec: &SceneSpec, base: &PipelineConfig) -> Result<SceneResult> {
    let scene = generate(spec)?;
    let t = base.features.training_frames;
    let n = scene.frames.len();
    let mut rows = Vec::new();
    let mut training = Vec::new();
    for fs in FeatureSet::ALL {
        let cfg = PipelineConfig {
            features: fs.config(t),
            ..base.clone()
        };
        let all: Vec<usize> = (0..n).collect();
        let stacks = sequence_features(&scene.frames, &all, &cfg)?;
        let mut models: Vec<(Method, Trained)> = Vec::new();
        for method in [Method::Kmeans, Method::Gmm] {
            let c = PipelineConfig {
                method,
                ..cfg.clone()
            };
            let trained = train_on_stacks(&stacks[..t], &scene.frames[..t], &c)?;
            training.push(TrainingTrace {
                scene: spec.name.clone(),
                features: fs,
                method,
                wcss_history: trained.wcss_history.clone(),
                ll_history: trained.ll_history.clone(),
            });
            models.push((method, trained));
        }
        for method in Method::ALL {
            let trained = if method.uses_gmm() {
                &models[1].1
            } else {
                &models[0].1
            };
            let c = PipelineConfig {
                method,
                ..cfg.clone()
            };
            let mut cm = ConfusionMatrix::zeros(3);
            for i in t..n {
                let seg = segment_stack(&stacks[i], &trained.model, &trained.stats, &c)?;
                cm.add(&confusion(&seg.semantic, &scene.truth[i])?)?;
            }
            rows.push(BenchRow {
                scene: spec.name.clone(),
                method,
                features: fs,
                metrics: metrics(&cm)?,
                confusion: cm,
            });
        }
    }
    Ok(SceneResult { rows, training })
}

/// Runs every method with both feature sets on each scene and pools the
/// confusion matrices over the suite.
pub fn run_bench(scenes: &[SceneSpec], base: &PipelineConfig) -> Result<BenchReport> {
    let results: Vec<SceneResult> = scenes
        .par_iter()
        .map(|s| run_scene(s, base))
        .collect::<Result<_>>()?;
    let mut rows: Vec<BenchRow> = Vec::new();
    let mut training = Vec::new();
    for r in results {
        rows.extend(r.rows);
        training.extend(r.training);
    }
    let mut pooled = Vec::new();
    for fs in FeatureSet::ALL {
        for method in Method::ALL {
            let mut cm = ConfusionMatrix::zeros(3);
            for r in rows
                .iter()
                .filter(|r| r.method == method && r.features == fs)
            {
                cm.add(&r.confusion)?;
            }
            pooled.push(BenchRow {
                scene: "pooled".into(),
                method,
                features: fs,
                metrics: metrics(&cm)?,
                confusion: cm,
            });
        }
    }
    rows.extend(pooled);
    Ok(BenchReport { rows, training })
}

/// The pinned five-scene suite with default settings.
pub fn run_default_bench(base: &PipelineConfig) -> Result<BenchReport> {
    run_bench(&benchmark_suite(), base)
}
