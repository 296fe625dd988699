//! Unsupervised segmentation of fire, smoke and background in infrared
//! frame sequences.
//!
//! Every pixel is described by its intensity, the magnitude of its
//! Horn-Schunck optical flow and the divergence of that flow (optionally a
//! SIFT-flow magnitude as well). The fused features are clustered with
//! k-means, a Gaussian mixture fitted by EM, a Potts Markov random field
//! optimized by iterated conditional modes, or a Gaussian Markov random
//! field. Clusters are named fire, smoke and background by their mean
//! intensity and compared with ground truth through confusion matrices.
//!
//! The runnable programs under `examples/` walk through each stage; the
//! `irseg` binary exposes the train / segment / eval workflow.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cluster;
pub mod error;
pub mod eval;
pub mod features;
pub mod fields;
pub mod flow;
pub mod io;
pub mod pipeline;
pub mod raster;
pub mod siftflow;
pub mod synth;

pub use error::{Error, Result};
pub use raster::{
    ClassSemantics, FeatureStack, FlowField, Frame, LabelMap, ScalarField, SemanticClass,
};
