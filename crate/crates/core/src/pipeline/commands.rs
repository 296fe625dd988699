use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bench::{run_default_bench, BenchReport};
use super::config::{PipelineConfig, CONFIG_VERSION};
use super::core::{frame_features, segment_stack, train, ModelFile, Trained};
use crate::error::{Error, Result};
use crate::eval::{class_names, confusion, render_overlay, ConfusionMatrix, Report};
use crate::features::ChannelStats;
use crate::io::{
    create_dir, list_matching, load_frame, load_labelmap, load_sequence, save_frame_pgm,
    save_labelmap, write_atomic,
};
use crate::raster::{ClassSemantics, Frame, SemanticClass};
use crate::synth::{generate, scene, Manifest};

pub const MODEL_FILE: &str = "model.json";
pub const STATS_FILE: &str = "stats.json";

fn identity_semantics() -> ClassSemantics {
    ClassSemantics::new(SemanticClass::ALL.to_vec()).expect("three classes")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::CorruptData(format!("{}: {e}", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn load_frames(cfg: &PipelineConfig) -> Result<(Vec<PathBuf>, Vec<Frame>)> {
    Ok(load_sequence(&cfg.input_dir, &cfg.input_glob)?
        .into_iter()
        .unzip())
}

/// Trains on the input sequence and writes `model.json`, `stats.json` and
/// the convergence history to the output directory.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<Trained> {
    cfg.validate()?;
    let (_, frames) = load_frames(cfg)?;
    let trained = thread_pool(cfg.jobs)?.install(|| train(&frames, cfg))?;
    create_dir(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join(MODEL_FILE), &trained.model)?;
    write_json(&cfg.output_dir.join(STATS_FILE), &trained.stats)?;
    let (name, values) = if trained.ll_history.is_empty() {
        ("wcss", &trained.wcss_history)
    } else {
        ("log_likelihood", &trained.ll_history)
    };
    let mut csv = format!("iteration,{name}\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(csv, "{i},{v:.12e}");
    }
    write_text(&cfg.output_dir.join("history.csv"), &csv)?;
    log::info!(
        "trained {} on {} frames",
        cfg.method.name(),
        trained.model.training_frames
    );
    Ok(trained)
}

/// Reads a model file and the `stats.json` beside it.
pub fn load_model(path: &Path) -> Result<(ModelFile, ChannelStats)> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let model: ModelFile = read_json(path)?;
    if model.version != CONFIG_VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported model version {}",
            path.display(),
            model.version
        )));
    }
    let stats_path = path.with_file_name(STATS_FILE);
    if !stats_path.exists() {
        return Err(Error::FileNotFound(stats_path));
    }
    let stats: ChannelStats = read_json(&stats_path)?;
    Ok((model, stats))
}

/// Segments every test frame (index >= `training_frames`), writing
/// `labels/<stem>.png`, `overlay/<stem>.png` and, for the random-field
/// methods, `energy/<stem>.csv`. Returns the label map paths in frame order.
pub fn cmd_segment(cfg: &PipelineConfig, model_path: Option<&Path>) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let default_model = cfg.output_dir.join(MODEL_FILE);
    let (model, stats) = load_model(model_path.unwrap_or(&default_model))?;
    let expected = cfg.features.channel_names();
    if model.channel_names != expected {
        return Err(Error::ChannelMismatch {
            expected: model.channel_names.clone(),
            found: expected,
        });
    }
    let (paths, frames) = load_frames(cfg)?;
    let t = cfg.features.training_frames;
    if frames.len() < t + 1 {
        return Err(Error::TooFewFrames {
            found: frames.len(),
            needed: t + 1,
        });
    }
    let dirs = ["labels", "overlay", "energy"].map(|d| cfg.output_dir.join(d));
    for d in &dirs {
        create_dir(d)?;
    }
    let semantics = identity_semantics();
    thread_pool(cfg.jobs)?.install(|| {
        (t..frames.len())
            .into_par_iter()
            .map(|i| {
                let stack = frame_features(&frames, i, cfg)?;
                let seg = segment_stack(&stack, &model, &stats, cfg)?;
                let name = stem(&paths[i]);
                let out = dirs[0].join(format!("{name}.png"));
                save_labelmap(&seg.semantic, &out)?;
                render_overlay(
                    &frames[i],
                    &seg.semantic,
                    &semantics,
                    dirs[1].join(format!("{name}.png")),
                )?;
                if let Some(csv) = &seg.energy_csv {
                    write_text(&dirs[2].join(format!("{name}.csv")), csv)?;
                }
                log::debug!("segmented {}", paths[i].display());
                Ok(out)
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub name: String,
    pub report: Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames: Vec<FrameReport>,
    /// Report of the elementwise sum of the per-frame matrices.
    pub pooled: Report,
}

/// Compares every `*.png` label map in `pred_dir` with the file of the
/// same name in `truth_dir`. Writes `eval.json`, `confusion.csv`,
/// `metrics.csv` and `frames.csv` to `out_dir`.
pub fn cmd_eval(pred_dir: &Path, truth_dir: &Path, out_dir: &Path) -> Result<EvalReport> {
    let preds = list_matching(pred_dir, "*.png")?;
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let k = SemanticClass::ALL.len();
    let mut pooled = ConfusionMatrix::zeros(k);
    let mut frames = Vec::with_capacity(preds.len());
    for p in &preds {
        let file_name = p.file_name().expect("listed files have names");
        let truth_path = truth_dir.join(file_name);
        if !truth_path.exists() {
            return Err(Error::MissingTruth(truth_path));
        }
        let cm = confusion(&load_labelmap(p, k)?, &load_labelmap(&truth_path, k)?)?;
        pooled.add(&cm)?;
        frames.push(FrameReport {
            name: file_name.to_string_lossy().into_owned(),
            report: Report::new(&cm)?,
        });
    }
    let report = EvalReport {
        frames,
        pooled: Report::new(&pooled)?,
    };
    create_dir(out_dir)?;
    write_json(&out_dir.join("eval.json"), &report)?;
    write_text(
        &out_dir.join("confusion.csv"),
        &pooled.to_csv(&class_names()),
    )?;
    write_text(&out_dir.join("metrics.csv"), &report.pooled.metrics_csv())?;
    let mut csv = String::from("frame,accuracy,fire_detected\n");
    for f in &report.frames {
        let _ = writeln!(
            csv,
            "{},{:.6},{}",
            f.name, f.report.accuracy, f.report.fire_detected
        );
    }
    write_text(&out_dir.join("frames.csv"), &csv)?;
    Ok(report)
}

/// Writes a pinned benchmark scene as `frames/frame_NNN.pgm`,
/// `truth/frame_NNN.png` and `manifest.json`.
pub fn cmd_synth(name: &str, out_dir: &Path) -> Result<Manifest> {
    let spec = scene(name)?;
    let generated = generate(&spec)?;
    let (frame_dir, truth_dir) = (out_dir.join("frames"), out_dir.join("truth"));
    create_dir(&frame_dir)?;
    create_dir(&truth_dir)?;
    let mut manifest = Manifest {
        scene: spec,
        frames: Vec::new(),
        truth: Vec::new(),
        classes: SemanticClass::ALL.to_vec(),
    };
    for (i, (frame, truth)) in generated.frames.iter().zip(&generated.truth).enumerate() {
        let f = format!("frames/frame_{i:03}.pgm");
        let t = format!("truth/frame_{i:03}.png");
        save_frame_pgm(frame, out_dir.join(&f))?;
        save_labelmap(truth, out_dir.join(&t))?;
        manifest.frames.push(f);
        manifest.truth.push(t);
    }
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Runs the benchmark suite and writes `bench.csv` and `training.csv`.
pub fn cmd_bench(cfg: &PipelineConfig, out_dir: &Path) -> Result<BenchReport> {
    cfg.validate()?;
    let report = thread_pool(cfg.jobs)?.install(|| run_default_bench(cfg))?;
    create_dir(out_dir)?;
    write_text(&out_dir.join("bench.csv"), &report.to_csv())?;
    let mut csv = String::from("scene,features,method,iteration,value\n");
    for t in &report.training {
        for (i, v) in t.wcss_history.iter().chain(&t.ll_history).enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{},{i},{v:.12e}",
                t.scene,
                t.features.name(),
                t.method.name()
            );
        }
    }
    write_text(&out_dir.join("training.csv"), &csv)?;
    Ok(report)
}

/// Renders a semantic label map over its frame.
pub fn cmd_overlay(frame_path: &Path, labels_path: &Path, out_path: &Path) -> Result<()> {
    let frame = load_frame(frame_path)?;
    let labels = load_labelmap(labels_path, SemanticClass::ALL.len())?;
    render_overlay(&frame, &labels, &identity_semantics(), out_path)
}
