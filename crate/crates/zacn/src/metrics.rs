//! Segmentation metrics: overall/mean accuracy and (frequency-weighted)
//! intersection over union, computed from a confusion matrix.

use crate::error::{Error, Result};

/// A dense per-pixel class map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "label map {height}x{width} needs {} entries, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }
}

/// Aggregated metric values; all fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Overall pixel accuracy.
    pub acc: f64,
    /// Accuracy averaged over classes present in the ground truth.
    pub m_acc: f64,
    /// IoU averaged over classes present in the ground truth.
    pub m_iou: f64,
    /// IoU weighted by ground-truth class frequency.
    pub fw_iou: f64,
    /// Per-class IoU; zero for classes absent from the ground truth.
    pub per_class_iou: Vec<f64>,
}

impl MetricsReport {
    /// Serializes as `key=value` lines with shortest round-trip floats.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("acc={}\n", self.acc));
        out.push_str(&format!("m_acc={}\n", self.m_acc));
        out.push_str(&format!("m_iou={}\n", self.m_iou));
        out.push_str(&format!("fw_iou={}\n", self.fw_iou));
        for (i, iou) in self.per_class_iou.iter().enumerate() {
            out.push_str(&format!("iou_{i}={iou}\n"));
        }
        out
    }
}

/// Confusion counts accumulated over one or more prediction/truth pairs.
/// Rows index the ground-truth class, columns the predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        assert!(n_classes >= 1);
        Self {
            n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    pub fn count(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n_classes + pred]
    }

    /// Accumulates one prediction against its ground truth.
    pub fn record(&mut self, pred: &LabelMap, truth: &LabelMap) -> Result<()> {
        if pred.height() != truth.height() || pred.width() != truth.width() {
            return Err(Error::shape(format!(
                "prediction {}x{} but truth {}x{}",
                pred.height(),
                pred.width(),
                truth.height(),
                truth.width()
            )));
        }
        for (&p, &t) in pred.data().iter().zip(truth.data()) {
            if (p as usize) >= self.n_classes || (t as usize) >= self.n_classes {
                return Err(Error::domain(format!(
                    "label out of range: pred {p}, truth {t}, {} classes",
                    self.n_classes
                )));
            }
            self.counts[t as usize * self.n_classes + p as usize] += 1;
        }
        Ok(())
    }

    /// Computes the metric report. Classes absent from the ground truth are
    /// excluded from the mean-accuracy and mean-IoU averages.
    pub fn metrics(&self) -> MetricsReport {
        let nc = self.n_classes;
        let total: u64 = self.counts.iter().sum();
        let s = total as f64;

        let mut acc_num = 0u64;
        let mut m_acc_sum = 0.0;
        let mut m_iou_sum = 0.0;
        let mut fw_iou_sum = 0.0;
        let mut present = 0usize;
        let mut per_class_iou = vec![0.0; nc];

        for i in 0..nc {
            let tp = self.count(i, i);
            let s_i: u64 = (0..nc).map(|j| self.count(i, j)).sum();
            let predicted_i: u64 = (0..nc).map(|j| self.count(j, i)).sum();
            let union = s_i + predicted_i - tp;
            acc_num += tp;
            if union > 0 {
                per_class_iou[i] = tp as f64 / union as f64;
            }
            if s_i > 0 {
                present += 1;
                m_acc_sum += tp as f64 / s_i as f64;
                m_iou_sum += per_class_iou[i];
                fw_iou_sum += s_i as f64 * per_class_iou[i];
            }
        }

        MetricsReport {
            acc: if total > 0 { acc_num as f64 / s } else { 0.0 },
            m_acc: if present > 0 {
                m_acc_sum / present as f64
            } else {
                0.0
            },
            m_iou: if present > 0 {
                m_iou_sum / present as f64
            } else {
                0.0
            },
            fw_iou: if total > 0 { fw_iou_sum / s } else { 0.0 },
            per_class_iou,
        }
    }
}

/// One-shot evaluation of a prediction against its ground truth.
pub fn evaluate(pred: &LabelMap, truth: &LabelMap, n_classes: usize) -> Result<MetricsReport> {
    let mut matrix = ConfusionMatrix::new(n_classes);
    matrix.record(pred, truth)?;
    Ok(matrix.metrics())
}
