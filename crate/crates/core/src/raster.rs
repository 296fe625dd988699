//! Raster containers shared by every stage of the segmentation pipeline.
//!
//! All grids are row-major and addressed as `(row, col)`, i.e. `(y, x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_len(what: &str, len: usize, width: usize, height: usize) -> Result<()> {
    if len != width * height {
        return Err(Error::CorruptData(format!(
            "{what}: {len} values for a {width}x{height} grid"
        )));
    }
    Ok(())
}

fn check_finite(what: &str, data: &[f64]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// One single-channel infrared frame with intensities normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::FrameTooSmall {
                width,
                height,
                min: 2,
            });
        }
        check_len("frame", data.len(), width, height)?;
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::CorruptData(format!(
                "frame intensity {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn to_scalar_field(&self) -> ScalarField {
        ScalarField {
            width: self.width,
            height: self.height,
            data: self.data.clone(),
        }
    }
}

/// A real-valued per-pixel field (divergence, flow magnitude, derivatives).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len("scalar field", data.len(), width, height)?;
        check_finite("scalar field", &data)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Dense per-pixel motion `(u, v)` in pixels per frame; `u` is horizontal.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        check_len("flow u", u.len(), width, height)?;
        check_len("flow v", v.len(), width, height)?;
        check_finite("flow u", &u)?;
        check_finite("flow v", &v)?;
        Ok(Self {
            width,
            height,
            u,
            v,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            u: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// Builds a field from a closure returning `(u, v)` at `(row, col)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> (f64, f64),
    ) -> Result<Self> {
        let (u, v) = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .unzip();
        Self::new(width, height, u, v)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }
}

/// Per-pixel feature vectors, `dims` values per pixel, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    width: usize,
    height: usize,
    dims: usize,
    data: Vec<f64>,
    channel_names: Vec<String>,
}

impl FeatureStack {
    pub fn new(
        width: usize,
        height: usize,
        channel_names: Vec<String>,
        data: Vec<f64>,
    ) -> Result<Self> {
        let dims = channel_names.len();
        if dims == 0 {
            return Err(Error::InvalidParameter(
                "feature stack needs at least one channel".into(),
            ));
        }
        if data.len() != width * height * dims {
            return Err(Error::CorruptData(format!(
                "feature stack: {} values for {width}x{height}x{dims}",
                data.len()
            )));
        }
        check_finite("feature stack", &data)?;
        Ok(Self {
            width,
            height,
            dims,
            data,
            channel_names,
        })
    }

    /// A stack whose pixels are the given points, laid out as a `n x 1` grid.
    pub fn from_points(points: &[Vec<f64>], channel_names: Vec<String>) -> Result<Self> {
        let dims = channel_names.len();
        if let Some(p) = points.iter().find(|p| p.len() != dims) {
            return Err(Error::DimensionMismatch {
                expected: format!("{dims} channels"),
                found: format!("{} channels", p.len()),
            });
        }
        let data = points.iter().flatten().copied().collect();
        Self::new(points.len(), 1, channel_names, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Feature vector of pixel `i` in row-major order.
    #[inline]
    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dims)
    }

    /// Values of one channel across all pixels.
    pub fn channel(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(c).step_by(self.dims).copied()
    }

    pub(crate) fn ensure_channels(&self, names: &[String]) -> Result<()> {
        if self.channel_names != names {
            return Err(Error::ChannelMismatch {
                expected: names.to_vec(),
                found: self.channel_names.clone(),
            });
        }
        Ok(())
    }
}

/// A per-pixel class index in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    k: usize,
    labels: Vec<usize>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, k: usize, labels: Vec<usize>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("label map needs k >= 1".into()));
        }
        check_len("label map", labels.len(), width, height)?;
        if let Some(l) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::CorruptData(format!("label {l} outside 0..{k}")));
        }
        Ok(Self {
            width,
            height,
            k,
            labels,
        })
    }

    pub fn uniform(width: usize, height: usize, k: usize, label: usize) -> Result<Self> {
        Self::new(width, height, k, vec![label; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.labels[row * self.width + col]
    }

    /// Relabels every pixel through `map` into a `new_k`-class map.
    pub fn remap(&self, map: &[usize], new_k: usize) -> Result<LabelMap> {
        if map.len() != self.k {
            return Err(Error::ClassCountMismatch(map.len(), self.k));
        }
        LabelMap::new(
            self.width,
            self.height,
            new_k,
            self.labels.iter().map(|&l| map[l]).collect(),
        )
    }
}

/// The three scene classes a cluster can be mapped to.
///
/// The discriminant doubles as the pixel value in ground-truth and
/// prediction label maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemanticClass {
    Background = 0,
    Smoke = 1,
    Fire = 2,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; 3] = [
        SemanticClass::Background,
        SemanticClass::Smoke,
        SemanticClass::Fire,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Background => "background",
            SemanticClass::Smoke => "smoke",
            SemanticClass::Fire => "fire",
        }
    }
}

/// Cluster index to semantic class mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSemantics {
    mapping: Vec<SemanticClass>,
}

impl ClassSemantics {
    pub fn new(mapping: Vec<SemanticClass>) -> Result<Self> {
        for (i, a) in mapping.iter().enumerate() {
            if mapping[..i].contains(a) {
                return Err(Error::InvalidParameter(format!(
                    "semantic class {} assigned twice",
                    a.name()
                )));
            }
        }
        Ok(Self { mapping })
    }

    pub fn mapping(&self) -> &[SemanticClass] {
        &self.mapping
    }

    pub fn class_of(&self, cluster: usize) -> SemanticClass {
        self.mapping[cluster]
    }

    /// Converts a cluster label map into a 3-class semantic label map.
    pub fn apply(&self, labels: &LabelMap) -> Result<LabelMap> {
        let map: Vec<usize> = self.mapping.iter().map(|c| c.index()).collect();
        labels.remap(&map, SemanticClass::ALL.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_rejects_out_of_range_values() {
        assert!(Frame::new(2, 2, vec![0.0, 0.5, 1.0, 1.2]).is_err());
        assert!(Frame::new(2, 2, vec![0.0, 0.5, 1.0, f64::NAN]).is_err());
        assert!(Frame::new(2, 2, vec![0.0; 3]).is_err());
        assert!(matches!(
            Frame::new(1, 4, vec![0.0; 4]),
            Err(Error::FrameTooSmall { .. })
        ));
    }

    #[test]
    fn label_map_validates_range() {
        assert!(LabelMap::new(2, 1, 2, vec![0, 2]).is_err());
        assert!(LabelMap::new(2, 1, 0, vec![0, 0]).is_err());
        let m = LabelMap::new(2, 1, 3, vec![0, 2]).unwrap();
        assert_eq!(m.get(0, 1), 2);
    }

    #[test]
    fn semantics_reject_duplicates_and_apply() {
        assert!(ClassSemantics::new(vec![SemanticClass::Fire, SemanticClass::Fire]).is_err());
        let s = ClassSemantics::new(vec![
            SemanticClass::Fire,
            SemanticClass::Background,
            SemanticClass::Smoke,
        ])
        .unwrap();
        let labels = LabelMap::new(3, 1, 3, vec![0, 1, 2]).unwrap();
        assert_eq!(s.apply(&labels).unwrap().labels(), &[2, 0, 1]);
    }

    #[test]
    fn feature_stack_channel_access() {
        let s = FeatureStack::new(
            2,
            1,
            vec!["a".into(), "b".into()],
            vec![1.0, 10.0, 2.0, 20.0],
        )
        .unwrap();
        assert_eq!(s.channel(1).collect::<Vec<_>>(), vec![10.0, 20.0]);
        assert_eq!(s.pixel(1), &[2.0, 20.0]);
    }
}
