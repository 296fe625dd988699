use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irseg::pipeline::{
    cmd_bench, cmd_eval, cmd_overlay, cmd_segment, cmd_synth, cmd_train, FeatureSet, Method,
    PipelineConfig,
};
use irseg::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "irseg",
    version,
    about = "Unsupervised fire and smoke segmentation for IR frame sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the cluster model on the first training frames
    Train(Overrides),
    /// Segment the frames after the training frames
    Segment {
        #[command(flatten)]
        cfg: Overrides,
        /// Model file (defaults to <output-dir>/model.json)
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Compare predicted label maps with ground truth
    Eval {
        #[command(flatten)]
        cfg: Overrides,
        /// Predicted label maps (defaults to <output-dir>/labels)
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Ground-truth label maps (defaults to truth_dir from the config)
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Write a pinned synthetic scene
    Synth {
        #[arg(long)]
        scene: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every method with both feature sets on the benchmark suite
    Bench {
        #[command(flatten)]
        cfg: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a semantic label map over its frame
    Overlay {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Config file plus flags that override its keys.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// JSON config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input_dir: Option<PathBuf>,
    #[arg(long)]
    input_glob: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    truth_dir: Option<PathBuf>,
    /// kmeans, gmm, mrf or gmrf
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    features_intensity: Option<bool>,
    #[arg(long)]
    features_flow_mag: Option<bool>,
    #[arg(long)]
    features_divergence: Option<bool>,
    #[arg(long)]
    features_sift_flow: Option<bool>,
    #[arg(long)]
    features_training_frames: Option<usize>,
    #[arg(long)]
    kmeans_max_iters: Option<usize>,
    #[arg(long)]
    kmeans_tol: Option<f64>,
    #[arg(long)]
    kmeans_restarts: Option<usize>,
    #[arg(long)]
    gmm_max_iters: Option<usize>,
    #[arg(long)]
    gmm_tol: Option<f64>,
    #[arg(long)]
    gmm_reg: Option<f64>,
    #[arg(long)]
    mrf_beta: Option<f64>,
    #[arg(long)]
    mrf_max_sweeps: Option<usize>,
    #[arg(long)]
    gmrf_lambda: Option<f64>,
    #[arg(long)]
    gmrf_kappa: Option<f64>,
    #[arg(long)]
    gmrf_max_sweeps: Option<usize>,
    #[arg(long)]
    gmrf_tol: Option<f64>,
    #[arg(long)]
    hs_alpha: Option<f64>,
    #[arg(long)]
    hs_max_iters: Option<usize>,
    #[arg(long)]
    hs_tol: Option<f64>,
    #[arg(long)]
    sift_search_radius: Option<usize>,
    #[arg(long)]
    sift_cell_size: Option<usize>,
    #[arg(long)]
    sift_bp_iters: Option<usize>,
}

macro_rules! apply {
    ($($flag:expr => $field:expr),* $(,)?) => {
        $(if let Some(v) = $flag.clone() { $field = v; })*
    };
}

impl Overrides {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(m) = &self.method {
            c.method = m.parse::<Method>()?;
        }
        if let Some(t) = &self.truth_dir {
            c.truth_dir = Some(t.clone());
        }
        apply! {
            self.input_dir => c.input_dir,
            self.input_glob => c.input_glob,
            self.output_dir => c.output_dir,
            self.k => c.k,
            self.seed => c.seed,
            self.jobs => c.jobs,
            self.features_intensity => c.features.use_intensity,
            self.features_flow_mag => c.features.use_flow_mag,
            self.features_divergence => c.features.use_divergence,
            self.features_sift_flow => c.features.use_sift_flow,
            self.features_training_frames => c.features.training_frames,
            self.kmeans_max_iters => c.kmeans.max_iters,
            self.kmeans_tol => c.kmeans.tol,
            self.kmeans_restarts => c.kmeans.restarts,
            self.gmm_max_iters => c.gmm.max_iters,
            self.gmm_tol => c.gmm.tol,
            self.gmm_reg => c.gmm.reg,
            self.mrf_beta => c.mrf.beta,
            self.mrf_max_sweeps => c.mrf.max_sweeps,
            self.gmrf_lambda => c.gmrf.lambda,
            self.gmrf_kappa => c.gmrf.kappa,
            self.gmrf_max_sweeps => c.gmrf.max_sweeps,
            self.gmrf_tol => c.gmrf.tol,
            self.hs_alpha => c.hs.alpha,
            self.hs_max_iters => c.hs.max_iters,
            self.hs_tol => c.hs.tol,
            self.sift_search_radius => c.sift.search_radius,
            self.sift_cell_size => c.sift.cell_size,
            self.sift_bp_iters => c.sift.bp_iters,
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(o) => {
            let cfg = o.resolve()?;
            let t = cmd_train(&cfg)?;
            println!(
                "trained {} on {} frames -> {}",
                cfg.method.name(),
                t.model.training_frames,
                cfg.output_dir.join("model.json").display()
            );
        }
        Command::Segment { cfg, model } => {
            let cfg = cfg.resolve()?;
            let written = cmd_segment(&cfg, model.as_deref())?;
            println!(
                "segmented {} frames -> {}",
                written.len(),
                cfg.output_dir.join("labels").display()
            );
        }
        Command::Eval { cfg, pred, truth } => {
            let cfg = cfg.resolve()?;
            let pred = pred.unwrap_or_else(|| cfg.output_dir.join("labels"));
            let truth = truth.or(cfg.truth_dir.clone()).ok_or_else(|| {
                Error::Config("no ground truth: pass --truth or set truth_dir".into())
            })?;
            let r = cmd_eval(&pred, &truth, &cfg.output_dir)?;
            println!(
                "accuracy {:.4} over {} frames",
                r.pooled.accuracy,
                r.frames.len()
            );
            for c in &r.pooled.per_class {
                println!(
                    "  {:<10} recall {:.4} precision {:.4}",
                    c.class.name(),
                    c.recall,
                    c.precision
                );
            }
        }
        Command::Synth { scene, out } => {
            let m = cmd_synth(&scene, &out)?;
            println!(
                "wrote {} frames of {} -> {}",
                m.frames.len(),
                scene,
                out.display()
            );
        }
        Command::Bench { cfg, out } => {
            let cfg = cfg.resolve()?;
            let r = cmd_bench(&cfg, &out)?;
            println!(
                "{:<8} {:<10} {:>8} {:>12}",
                "method", "features", "accuracy", "smoke recall"
            );
            for fs in FeatureSet::ALL {
                for m in Method::ALL {
                    if let Some(row) = r.pooled(m, fs) {
                        println!(
                            "{:<8} {:<10} {:>8.4} {:>12.4}",
                            m.name(),
                            fs.name(),
                            row.metrics.accuracy,
                            row.metrics.per_class_recall[1]
                        );
                    }
                }
            }
        }
        Command::Overlay { frame, labels, out } => cmd_overlay(&frame, &labels, &out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IRSEG_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("irseg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
