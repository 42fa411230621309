//! Grounding evaluation: temporal IoU, R@1 at IoU thresholds, mIoU, and the
//! robustness-consistency (RC) score between a high-bias and a low-bias
//! test set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Temporal IoU of two intervals. A degenerate prediction (`start >= end`)
/// scores 0 rather than erroring; evaluation must never crash on bad model
/// output.
pub fn iou<F: Real>(pred: (F, F), reference: (F, F)) -> F {
    let (ps, pe) = pred;
    let (rs, re) = reference;
    if ps >= pe {
        return F::zero();
    }
    let inter = pe.min(re) - ps.max(rs);
    if inter <= F::zero() {
        return F::zero();
    }
    let union = pe.max(re) - ps.min(rs);
    inter / union
}

/// Predicted and reference intervals keyed by sample id.
#[derive(Debug, Clone, Default)]
pub struct PredictionSet {
    pub samples: BTreeMap<String, PredictionSample>,
}

#[derive(Debug, Clone, Copy)]
pub struct PredictionSample {
    pub pred: (f64, f64),
    pub reference: (f64, f64),
}

/// One line of a prediction JSONL file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionLine {
    pub sample_id: String,
    pub pred_start: f64,
    pub pred_end: f64,
}

impl PredictionSet {
    pub fn insert(&mut self, id: impl Into<String>, pred: (f64, f64), reference: (f64, f64)) -> Result<()> {
        if reference.0 >= reference.1 {
            return Err(Error::InvalidArgument(format!(
                "reference interval must satisfy start < end, got {reference:?}"
            )));
        }
        self.samples.insert(id.into(), PredictionSample { pred, reference });
        Ok(())
    }
}

/// R@1 percentages per threshold plus mIoU, all in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Keyed by the threshold formatted as given (e.g. "0.5").
    pub r1_at: BTreeMap<String, f64>,
    pub miou: f64,
}

pub fn threshold_key(tau: f64) -> String {
    format!("{tau}")
}

/// Evaluates a prediction set at the given IoU thresholds.
pub fn evaluate(preds: &PredictionSet, thresholds: &[f64]) -> Result<MetricReport> {
    if preds.samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let ious: Vec<f64> = preds
        .samples
        .values()
        .map(|s| iou(s.pred, s.reference))
        .collect();
    let n = ious.len() as f64;
    let mut r1_at = BTreeMap::new();
    for &tau in thresholds {
        let hits = ious.iter().filter(|&&v| v >= tau).count() as f64;
        r1_at.insert(threshold_key(tau), 100.0 * hits / n);
    }
    Ok(MetricReport {
        r1_at,
        miou: 100.0 * ious.iter().sum::<f64>() / n,
    })
}

impl MetricReport {
    /// Builds a report from already-computed metric values (used when the
    /// per-metric numbers come from an external table rather than raw
    /// predictions).
    pub fn from_values(r1: &[(f64, f64)], miou: f64) -> Self {
        let mut r1_at = BTreeMap::new();
        for &(tau, v) in r1 {
            r1_at.insert(threshold_key(tau), v);
        }
        Self { r1_at, miou }
    }

    fn metric(&self, key: &str) -> Option<f64> {
        if key == "miou" {
            Some(self.miou)
        } else {
            self.r1_at.get(key).copied()
        }
    }
}

/// Metric keys entering the RC average: R@1 at 0.3/0.5/0.7/0.9 plus mIoU.
pub const RC_DEFAULT_KEYS: [&str; 5] = ["0.3", "0.5", "0.7", "0.9", "miou"];

/// Robustness consistency: mean of (high - low) over the metric keys.
pub fn rc(high: &MetricReport, low: &MetricReport, metric_keys: &[&str]) -> Result<f64> {
    if metric_keys.is_empty() {
        return Err(Error::InvalidArgument("rc needs at least one metric key".into()));
    }
    let mut sum = 0.0;
    for key in metric_keys {
        let h = high
            .metric(key)
            .ok_or_else(|| Error::InvalidArgument(format!("missing metric {key} in high report")))?;
        let l = low
            .metric(key)
            .ok_or_else(|| Error::InvalidArgument(format!("missing metric {key} in low report")))?;
        sum += h - l;
    }
    Ok(sum / metric_keys.len() as f64)
}
