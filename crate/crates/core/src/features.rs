//! Per-pixel feature fusion.
//!
//! Channels always appear in the order `intensity, flow_mag, divergence,
//! sift_mag`, restricted to the enabled ones.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{FeatureStack, FlowField, Frame, ScalarField};

pub const INTENSITY: &str = "intensity";
pub const FLOW_MAG: &str = "flow_mag";
pub const DIVERGENCE: &str = "divergence";
pub const SIFT_MAG: &str = "sift_mag";

/// Standard deviations below this are treated as a constant channel.
pub const MIN_STD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    #[serde(rename = "intensity")]
    pub use_intensity: bool,
    #[serde(rename = "flow_mag")]
    pub use_flow_mag: bool,
    #[serde(rename = "divergence")]
    pub use_divergence: bool,
    #[serde(rename = "sift_flow")]
    pub use_sift_flow: bool,
    /// Leading frames used to fit normalization statistics and the model.
    pub training_frames: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl FeatureConfig {
    /// Intensity, flow magnitude and divergence.
    pub fn full() -> Self {
        Self {
            use_intensity: true,
            use_flow_mag: true,
            use_divergence: true,
            use_sift_flow: false,
            training_frames: 10,
        }
    }

    pub fn intensity_only() -> Self {
        Self {
            use_flow_mag: false,
            use_divergence: false,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.use_intensity || self.use_flow_mag || self.use_divergence || self.use_sift_flow) {
            return Err(Error::InvalidParameter(
                "at least one feature channel must be enabled".into(),
            ));
        }
        if self.training_frames < 2 {
            return Err(Error::TooFewFrames {
                found: self.training_frames,
                needed: 2,
            });
        }
        Ok(())
    }

    pub fn needs_flow(&self) -> bool {
        self.use_flow_mag || self.use_divergence
    }

    pub fn channel_names(&self) -> Vec<String> {
        [
            (self.use_intensity, INTENSITY),
            (self.use_flow_mag, FLOW_MAG),
            (self.use_divergence, DIVERGENCE),
            (self.use_sift_flow, SIFT_MAG),
        ]
        .into_iter()
        .filter(|(on, _)| *on)
        .map(|(_, name)| name.to_string())
        .collect()
    }
}

/// `du/dx + dv/dy` with central differences inside and one-sided
/// differences on the border.
pub fn divergence(flow: &FlowField) -> ScalarField {
    let (w, h) = flow.dims();
    let (u, v) = (flow.u(), flow.v());
    let deriv = |data: &[f64], i: usize, pos: usize, len: usize, stride: usize| -> f64 {
        if len == 1 {
            0.0
        } else if pos == 0 {
            data[i + stride] - data[i]
        } else if pos == len - 1 {
            data[i] - data[i - stride]
        } else {
            (data[i + stride] - data[i - stride]) / 2.0
        }
    };
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            out[i] = deriv(u, i, c, w, 1) + deriv(v, i, r, h, w);
        }
    }
    ScalarField::new(w, h, out).expect("divergence of a finite field is finite")
}

/// Assembles the enabled channels into one stack.
pub fn build_feature_stack(
    frame: &Frame,
    flow: Option<&FlowField>,
    div: Option<&ScalarField>,
    sift_mag: Option<&ScalarField>,
    cfg: &FeatureConfig,
) -> Result<FeatureStack> {
    let dims = frame.dims();
    let mut channels: Vec<Vec<f64>> = Vec::new();
    if cfg.use_intensity {
        channels.push(frame.data().to_vec());
    }
    if cfg.use_flow_mag {
        let flow = flow.ok_or_else(|| Error::MissingChannel(FLOW_MAG.into()))?;
        if flow.dims() != dims {
            return Err(Error::dims(dims, flow.dims()));
        }
        channels.push(crate::flow::flow_magnitude(flow).into_data());
    }
    if cfg.use_divergence {
        let div = div.ok_or_else(|| Error::MissingChannel(DIVERGENCE.into()))?;
        if div.dims() != dims {
            return Err(Error::dims(dims, div.dims()));
        }
        channels.push(div.data().to_vec());
    }
    if cfg.use_sift_flow {
        let s = sift_mag.ok_or_else(|| Error::MissingChannel(SIFT_MAG.into()))?;
        if s.dims() != dims {
            return Err(Error::dims(dims, s.dims()));
        }
        channels.push(s.data().to_vec());
    }
    if channels.is_empty() {
        return Err(Error::InvalidParameter("no feature channel enabled".into()));
    }
    let n = frame.width() * frame.height();
    let mut data = Vec::with_capacity(n * channels.len());
    for i in 0..n {
        data.extend(channels.iter().map(|ch| ch[i]));
    }
    FeatureStack::new(frame.width(), frame.height(), cfg.channel_names(), data)
}

/// Pooled per-channel statistics of the training stacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub channel_names: Vec<String>,
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
    pub frame_count: usize,
}

pub fn fit_channel_stats(stacks: &[FeatureStack]) -> Result<ChannelStats> {
    let first = stacks.first().ok_or(Error::EmptyInput)?;
    let d = first.dims();
    for s in stacks {
        s.ensure_channels(first.channel_names())?;
    }
    let count: usize = stacks.iter().map(|s| s.len()).sum();
    if count == 0 {
        return Err(Error::EmptyInput);
    }
    let mut sum = vec![0.0; d];
    for px in stacks.iter().flat_map(|s| s.pixels()) {
        for (acc, x) in sum.iter_mut().zip(px) {
            *acc += x;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let mut sq = vec![0.0; d];
    for px in stacks.iter().flat_map(|s| s.pixels()) {
        for c in 0..d {
            let dx = px[c] - mean[c];
            sq[c] += dx * dx;
        }
    }
    let std = sq.iter().map(|s| (s / count as f64).sqrt()).collect();
    Ok(ChannelStats {
        channel_names: first.channel_names().to_vec(),
        mean,
        std,
        frame_count: stacks.len(),
    })
}

/// Z-scores every channel; constant channels map to 0.
pub fn normalize(stack: &FeatureStack, stats: &ChannelStats) -> Result<FeatureStack> {
    if stats.frame_count == 0 {
        return Err(Error::InvalidParameter(
            "channel stats fitted on zero frames".into(),
        ));
    }
    stack.ensure_channels(&stats.channel_names)?;
    let d = stack.dims();
    let data = stack
        .data()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = i % d;
            if stats.std[c] < MIN_STD {
                0.0
            } else {
                (x - stats.mean[c]) / stats.std[c]
            }
        })
        .collect();
    FeatureStack::new(
        stack.width(),
        stack.height(),
        stack.channel_names().to_vec(),
        data,
    )
}

/// CSV with one row per pixel: `row,col,<channels...>`.
pub fn feature_stack_csv(stack: &FeatureStack) -> String {
    let mut s = format!("row,col,{}\n", stack.channel_names().join(","));
    for (i, px) in stack.pixels().enumerate() {
        let _ = write!(s, "{},{}", i / stack.width(), i % stack.width());
        for x in px {
            let _ = write!(s, ",{x:.8e}");
        }
        s.push('\n');
    }
    s
}
