use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::fields::{GmrfParams, MrfParams};
use crate::flow::HsParams;
use crate::siftflow::SiftFlowParams;

pub const CONFIG_VERSION: u32 = 1;

/// Coupling used by the MRF unless configured otherwise, chosen once on
/// the benchmark suite from {0.5, 1, 2}.
pub const PINNED_BETA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kmeans,
    Gmm,
    Mrf,
    Gmrf,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Kmeans, Method::Gmm, Method::Mrf, Method::Gmrf];

    pub fn name(self) -> &'static str {
        match self {
            Method::Kmeans => "kmeans",
            Method::Gmm => "gmm",
            Method::Mrf => "mrf",
            Method::Gmrf => "gmrf",
        }
    }

    /// Methods that segment with a fitted mixture.
    pub fn uses_gmm(self) -> bool {
        self != Method::Kmeans
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (kmeans, gmm, mrf, gmrf)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansSettings {
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
}

impl Default for KMeansSettings {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
            restarts: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmSettings {
    pub max_iters: usize,
    pub tol: f64,
    pub reg: f64,
}

impl Default for GmmSettings {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-5,
            reg: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub input_dir: PathBuf,
    pub input_glob: String,
    pub output_dir: PathBuf,
    pub truth_dir: Option<PathBuf>,
    pub features: FeatureConfig,
    pub method: Method,
    pub k: usize,
    pub seed: u64,
    pub kmeans: KMeansSettings,
    pub gmm: GmmSettings,
    pub mrf: MrfParams,
    pub gmrf: GmrfParams,
    pub hs: HsParams,
    pub sift: SiftFlowParams,
    /// Worker threads for per-frame work; 0 uses every core.
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            input_dir: PathBuf::from("frames"),
            input_glob: "*.pgm".into(),
            output_dir: PathBuf::from("out"),
            truth_dir: None,
            features: FeatureConfig::full(),
            method: Method::Mrf,
            k: 3,
            seed: 0,
            kmeans: KMeansSettings::default(),
            gmm: GmmSettings::default(),
            mrf: MrfParams {
                beta: PINNED_BETA,
                ..MrfParams::default()
            },
            gmrf: GmrfParams::default(),
            hs: HsParams::default(),
            sift: SiftFlowParams::default(),
            jobs: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| match e {
            Error::TooFewFrames { .. } => e,
            other => Error::Config(other.to_string()),
        };
        self.features.validate().map_err(cfg_err)?;
        self.mrf.validate().map_err(cfg_err)?;
        self.gmrf.validate().map_err(cfg_err)?;
        self.hs.validate().map_err(cfg_err)?;
        self.sift.validate().map_err(cfg_err)?;
        if self.k != 3 {
            return Err(Error::WrongK(self.k));
        }
        if self.kmeans.max_iters == 0 || self.kmeans.restarts == 0 || self.gmm.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        if !(self.gmm.reg >= 0.0) || !(self.gmm.tol >= 0.0) || !(self.kmeans.tol >= 0.0) {
            return Err(Error::Config("tolerances and reg must be >= 0".into()));
        }
        Ok(())
    }
}
