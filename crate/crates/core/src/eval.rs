//! Cluster-to-class assignment, confusion matrices and overlays.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{encode_png_rgb, write_atomic};
use crate::raster::{ClassSemantics, Frame, LabelMap, ScalarField, SemanticClass};

/// Maps clusters to classes by mean raw intensity: brightest is fire,
/// then smoke, then background. Ties go to the lower cluster index.
pub fn assign_semantics(labels: &LabelMap, intensity: &ScalarField) -> Result<ClassSemantics> {
    assign_semantics_pooled(&[(labels, intensity)])
}

/// Like [`assign_semantics`] with cluster means pooled over several frames.
pub fn assign_semantics_pooled(frames: &[(&LabelMap, &ScalarField)]) -> Result<ClassSemantics> {
    let k = SemanticClass::ALL.len();
    let mut sum = vec![0.0; k];
    let mut count = vec![0usize; k];
    for (labels, intensity) in frames {
        if labels.k() != k {
            return Err(Error::WrongK(labels.k()));
        }
        if labels.dims() != intensity.dims() {
            return Err(Error::dims(labels.dims(), intensity.dims()));
        }
        for (&l, &v) in labels.labels().iter().zip(intensity.data()) {
            sum[l] += v;
            count[l] += 1;
        }
    }
    if let Some(empty) = count.iter().position(|&c| c == 0) {
        return Err(Error::EmptyCluster(empty));
    }
    let means: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    let mut order: Vec<usize> = (0..k).collect();
    // stable sort keeps index order among equal means
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]));
    let ranked = [
        SemanticClass::Fire,
        SemanticClass::Smoke,
        SemanticClass::Background,
    ];
    let mut mapping = vec![SemanticClass::Background; k];
    for (rank, &cluster) in order.iter().enumerate() {
        mapping[cluster] = ranked[rank];
    }
    ClassSemantics::new(mapping)
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub k: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            k,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.counts[i][i]).sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.k != self.k {
            return Err(Error::ClassCountMismatch(self.k, other.k));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.k);
        for m in 0..self.k {
            for n in 0..self.k {
                t.counts[n][m] = self.counts[m][n];
            }
        }
        t
    }

    /// Each row as percentages of its total; empty rows stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| {
                        if s == 0 {
                            0.0
                        } else {
                            100.0 * c as f64 / s as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn to_csv(&self, class_names: &[&str]) -> String {
        let mut s = String::from("truth\\pred");
        for n in class_names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (name, row) in class_names.iter().zip(&self.counts) {
            s.push_str(name);
            for c in row {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion(pred: &LabelMap, truth: &LabelMap) -> Result<ConfusionMatrix> {
    if pred.dims() != truth.dims() {
        return Err(Error::dims(truth.dims(), pred.dims()));
    }
    if pred.k() != truth.k() {
        return Err(Error::ClassCountMismatch(truth.k(), pred.k()));
    }
    let mut cm = ConfusionMatrix::zeros(truth.k());
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub per_class_recall: Vec<f64>,
    pub per_class_precision: Vec<f64>,
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let k = cm.k;
    let recall = (0..k)
        .map(|m| ratio(cm.counts[m][m], cm.counts[m].iter().sum()))
        .collect();
    let precision = (0..k)
        .map(|n| ratio(cm.counts[n][n], (0..k).map(|m| cm.counts[m][n]).sum()))
        .collect();
    Ok(Metrics {
        accuracy: cm.trace() as f64 / total as f64,
        per_class_recall: recall,
        per_class_precision: precision,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRates {
    pub class: SemanticClass,
    pub recall: f64,
    pub precision: f64,
}

/// JSON-serializable evaluation of a 3-class semantic confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub counts: Vec<Vec<u64>>,
    pub row_normalized: Vec<Vec<f64>>,
    pub accuracy: f64,
    pub per_class: Vec<ClassRates>,
    /// Whether any pixel was predicted as fire.
    pub fire_detected: bool,
}

impl Report {
    pub fn new(cm: &ConfusionMatrix) -> Result<Self> {
        if cm.k != SemanticClass::ALL.len() {
            return Err(Error::WrongK(cm.k));
        }
        let m = metrics(cm)?;
        let fire = SemanticClass::Fire.index();
        Ok(Self {
            counts: cm.counts.clone(),
            row_normalized: cm.row_normalized(),
            accuracy: m.accuracy,
            per_class: SemanticClass::ALL
                .iter()
                .map(|&c| ClassRates {
                    class: c,
                    recall: m.per_class_recall[c.index()],
                    precision: m.per_class_precision[c.index()],
                })
                .collect(),
            fire_detected: (0..cm.k).any(|t| cm.counts[t][fire] > 0),
        })
    }

    /// `class,recall,precision` rows followed by an accuracy row.
    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("class,recall,precision\n");
        for r in &self.per_class {
            let _ = writeln!(s, "{},{:.6},{:.6}", r.class.name(), r.recall, r.precision);
        }
        let _ = writeln!(s, "accuracy,{:.6},", self.accuracy);
        s
    }
}

pub fn class_names() -> [&'static str; 3] {
    SemanticClass::ALL.map(|c| c.name())
}

/// RGB pixels of the overlay: background stays gray, smoke is blended
/// half with blue and fire half with red.
pub fn overlay_rgb(
    frame: &Frame,
    labels: &LabelMap,
    semantics: &ClassSemantics,
) -> Result<Vec<u8>> {
    if frame.dims() != labels.dims() {
        return Err(Error::dims(frame.dims(), labels.dims()));
    }
    if semantics.mapping().len() != labels.k() {
        return Err(Error::ClassCountMismatch(
            semantics.mapping().len(),
            labels.k(),
        ));
    }
    let mut out = Vec::with_capacity(frame.data().len() * 3);
    for (&v, &l) in frame.data().iter().zip(labels.labels()) {
        let g = (v * 255.0).round() as u16;
        let px = match semantics.class_of(l) {
            SemanticClass::Background => [g, g, g],
            SemanticClass::Smoke => [g / 2, g / 2, (g + 255) / 2],
            SemanticClass::Fire => [(g + 255) / 2, g / 2, g / 2],
        };
        out.extend(px.iter().map(|&c| c as u8));
    }
    Ok(out)
}

pub fn render_overlay(
    frame: &Frame,
    labels: &LabelMap,
    semantics: &ClassSemantics,
    path: impl AsRef<Path>,
) -> Result<()> {
    let rgb = overlay_rgb(frame, labels, semantics)?;
    let png = encode_png_rgb(frame.width(), frame.height(), rgb)?;
    write_atomic(path.as_ref(), &png)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity() -> ClassSemantics {
        ClassSemantics::new(SemanticClass::ALL.to_vec()).unwrap()
    }

    fn field(values: &[f64]) -> ScalarField {
        ScalarField::new(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn semantics_follow_intensity_order() {
        let labels = LabelMap::new(3, 1, 3, vec![0, 1, 2]).unwrap();
        let s = assign_semantics(&labels, &field(&[0.9, 0.5, 0.1])).unwrap();
        assert_eq!(
            s.mapping(),
            [
                SemanticClass::Fire,
                SemanticClass::Smoke,
                SemanticClass::Background
            ]
        );
        let s = assign_semantics(&labels, &field(&[0.1, 0.9, 0.5])).unwrap();
        assert_eq!(
            s.mapping(),
            [
                SemanticClass::Background,
                SemanticClass::Fire,
                SemanticClass::Smoke
            ]
        );
    }

    #[test]
    fn semantics_ties_and_errors() {
        let labels = LabelMap::new(3, 1, 3, vec![0, 1, 2]).unwrap();
        let s = assign_semantics(&labels, &field(&[0.5, 0.5, 0.5])).unwrap();
        assert_eq!(
            s.mapping(),
            [
                SemanticClass::Fire,
                SemanticClass::Smoke,
                SemanticClass::Background
            ]
        );
        let two = LabelMap::new(3, 1, 2, vec![0, 1, 1]).unwrap();
        assert!(matches!(
            assign_semantics(&two, &field(&[0.1; 3])),
            Err(Error::WrongK(2))
        ));
        let missing = LabelMap::new(3, 1, 3, vec![0, 2, 2]).unwrap();
        assert!(matches!(
            assign_semantics(&missing, &field(&[0.1; 3])),
            Err(Error::EmptyCluster(1))
        ));
    }

    #[test]
    fn confusion_examples() {
        let truth: Vec<usize> = [0; 10]
            .iter()
            .chain(&[1; 20])
            .chain(&[2; 30])
            .copied()
            .collect();
        let truth = LabelMap::new(60, 1, 3, truth).unwrap();
        let cm = confusion(&truth, &truth).unwrap();
        assert_eq!(
            cm.counts,
            vec![vec![10, 0, 0], vec![0, 20, 0], vec![0, 0, 30]]
        );
        let zero = LabelMap::uniform(60, 1, 3, 0).unwrap();
        let cm = confusion(&zero, &truth).unwrap();
        assert_eq!(
            cm.counts,
            vec![vec![10, 0, 0], vec![20, 0, 0], vec![30, 0, 0]]
        );
        assert_eq!(confusion(&truth, &zero).unwrap(), cm.transpose());
        assert!(confusion(&zero, &LabelMap::uniform(30, 2, 3, 0).unwrap()).is_err());
        assert!(confusion(&zero, &LabelMap::uniform(60, 1, 2, 0).unwrap()).is_err());
    }

    #[test]
    fn metrics_examples() {
        let diag = ConfusionMatrix {
            k: 3,
            counts: vec![vec![10, 0, 0], vec![0, 20, 0], vec![0, 0, 30]],
        };
        let m = metrics(&diag).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.per_class_recall, vec![1.0; 3]);
        let m = metrics(&ConfusionMatrix {
            k: 2,
            counts: vec![vec![9, 1], vec![1, 9]],
        })
        .unwrap();
        assert!((m.accuracy - 0.9).abs() < 1e-15);
        assert_eq!(m.per_class_recall, vec![0.9, 0.9]);
        let gap = ConfusionMatrix {
            k: 3,
            counts: vec![vec![5, 1, 0], vec![0, 4, 0], vec![0, 0, 0]],
        };
        let m = metrics(&gap).unwrap();
        assert_eq!(m.per_class_recall[2], 0.0);
        assert_eq!(m.per_class_precision[2], 0.0);
        assert!(matches!(
            metrics(&ConfusionMatrix::zeros(3)),
            Err(Error::EmptyMatrix)
        ));
    }

    #[test]
    fn report_rows_and_flag() {
        let cm = ConfusionMatrix {
            k: 3,
            counts: vec![vec![3, 1, 0], vec![0, 0, 0], vec![0, 0, 2]],
        };
        let r = Report::new(&cm).unwrap();
        assert_eq!(r.row_normalized[0], vec![75.0, 25.0, 0.0]);
        assert_eq!(r.row_normalized[1], vec![0.0; 3]);
        assert!(r.fire_detected);
        assert!(r
            .metrics_csv()
            .starts_with("class,recall,precision\nbackground,0.750000,1.000000\n"));
        let csv = cm.to_csv(&class_names());
        assert_eq!(csv.lines().nth(1), Some("background,3,1,0"));
    }

    #[test]
    fn overlay_examples() {
        let frame = Frame::new(3, 2, vec![0.2, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let bg = LabelMap::uniform(3, 2, 3, 0).unwrap();
        let g = (0.2f64 * 255.0).round() as u8;
        let px = overlay_rgb(&frame, &bg, &identity()).unwrap();
        assert_eq!(&px[..9], &[g, g, g, 255, 255, 255, 0, 0, 0]);
        let mixed = LabelMap::new(3, 2, 3, vec![0, 2, 1, 0, 0, 0]).unwrap();
        let px = overlay_rgb(&frame, &mixed, &identity()).unwrap();
        assert_eq!(&px[3..6], &[255, 127, 127]);
        assert_eq!(&px[6..9], &[0, 0, 127]);
    }
}
