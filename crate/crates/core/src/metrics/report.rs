use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::confusion::{accuracy, confusion, f1, precision, recall, ConfusionMatrix};
use super::roc::{roc_auc, RocCurve};
use crate::blocks::ModelGraph;
use crate::data::Dataset;
use crate::error::{shape_err, Error, Result};
use crate::optim::{argmax, categorical_cross_entropy, LossInput};
use crate::tensor::Tensor;

/// Anything that maps an image batch to class probabilities.
pub trait Predictor {
    fn predict_proba(&self, images: &Tensor) -> Result<Tensor>;
}

impl Predictor for ModelGraph {
    fn predict_proba(&self, images: &Tensor) -> Result<Tensor> {
        ModelGraph::predict_proba(self, images)
    }
}

/// One evaluation run. `None` marks a metric whose denominator is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub loss: f64,
    #[serde(flatten)]
    pub counts: ConfusionMatrix,
}

impl MetricsReport {
    /// Report with the count-derived metrics filled in.
    pub fn from_counts(counts: ConfusionMatrix, auc: Option<f64>, loss: f64) -> Self {
        Self {
            accuracy: accuracy(&counts),
            precision: precision(&counts),
            recall: recall(&counts),
            f1: f1(&counts),
            auc,
            loss,
            counts,
        }
    }

    pub fn to_kv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| x.to_string());
        format!(
            "accuracy={}\nprecision={}\nrecall={}\nf1={}\nauc={}\nloss={}\ntn={}\nfp={}\nfn={}\ntp={}\n",
            opt(self.accuracy),
            opt(self.precision),
            opt(self.recall),
            opt(self.f1),
            opt(self.auc),
            self.loss,
            self.counts.tn,
            self.counts.fp,
            self.counts.fn_,
            self.counts.tp
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let map: BTreeMap<&str, &str> = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim(), v.trim()))
            .collect();
        let get = |k: &str| {
            map.get(k)
                .copied()
                .ok_or_else(|| Error::Parse(format!("report lacks `{k}`")))
        };
        let real = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::Parse(format!("bad `{k}`"))) };
        let opt = |k: &str| -> Result<Option<f64>> {
            match get(k)? {
                "undefined" => Ok(None),
                _ => real(k).map(Some),
            }
        };
        let count = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| Error::Parse(format!("bad `{k}`"))) };
        Ok(Self {
            accuracy: opt("accuracy")?,
            precision: opt("precision")?,
            recall: opt("recall")?,
            f1: opt("f1")?,
            auc: opt("auc")?,
            loss: real("loss")?,
            counts: ConfusionMatrix::new(count("tn")?, count("fp")?, count("fn")?, count("tp")?),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricsReport,
    /// Absent when the labels hold a single class.
    pub roc: Option<RocCurve>,
}

/// Scores `[N, 2]` class probabilities against one-hot labels.
pub fn evaluate_probabilities(probs: &Tensor, labels: &Tensor) -> Result<Evaluation> {
    if probs.rank() != 2 || probs.shape()[1] != 2 {
        return shape_err(
            "evaluate",
            format!("binary metrics need [N, 2] probabilities, got {:?}", probs.shape()),
        );
    }
    let (loss, _) = categorical_cross_entropy(&LossInput::new(probs, labels)?)?;
    let predicted: Vec<usize> = probs.data().chunks_exact(2).map(argmax).collect();
    let truth: Vec<usize> = labels.data().chunks_exact(2).map(argmax).collect();
    let counts = confusion(&predicted, &truth)?;
    let scores: Vec<f64> = probs.data().chunks_exact(2).map(|r| r[1]).collect();
    let (roc, auc) = match roc_auc(&scores, &truth) {
        Ok((curve, auc)) => (Some(curve), Some(auc)),
        Err(Error::Undefined(_)) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(Evaluation {
        report: MetricsReport::from_counts(counts, auc, loss),
        roc,
    })
}

pub fn evaluate<P: Predictor + ?Sized>(predictor: &P, data: &Dataset) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    evaluate_probabilities(&predictor.predict_proba(data.images())?, data.labels())
}

/// A ratio as a percentage with two decimals, or `n/a`.
pub fn format_percent(value: Option<f64>) -> String {
    value.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}", 100.0 * v))
}

/// Per-model confusion counts, one line per model.
pub fn format_confusion_table(rows: &[(String, ConfusionMatrix)]) -> String {
    let width = name_width(rows.iter().map(|(n, _)| n.as_str()));
    let mut out = format!("{:<width$}  {:>6} {:>6} {:>6} {:>6}\n", "model", "TN", "FP", "FN", "TP");
    for (name, cm) in rows {
        let _ = writeln!(
            out,
            "{name:<width$}  {:>6} {:>6} {:>6} {:>6}",
            cm.tn, cm.fp, cm.fn_, cm.tp
        );
    }
    out
}

/// Per-model metric percentages and loss, one line per model.
pub fn format_metrics_table(rows: &[(String, MetricsReport)]) -> String {
    let width = name_width(rows.iter().map(|(n, _)| n.as_str()));
    let mut out = format!(
        "{:<width$}  {:>8} {:>9} {:>7} {:>7} {:>7} {:>7}\n",
        "model", "accuracy", "precision", "recall", "f1", "auc", "loss"
    );
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{name:<width$}  {:>8} {:>9} {:>7} {:>7} {:>7} {:>7.2}",
            format_percent(r.accuracy),
            format_percent(r.precision),
            format_percent(r.recall),
            format_percent(r.f1),
            format_percent(r.auc),
            r.loss
        );
    }
    out
}

fn name_width<'a>(names: impl Iterator<Item = &'a str>) -> usize {
    names.map(str::len).max().unwrap_or(0).max(5)
}
