//! Fractional confusion protocol for real-valued count predictions.
//!
//! For each pair, `TP = min(pred, actual)`, `FP = max(pred - actual, 0)`,
//! `FN = max(actual - pred, 0)`, summed over the union of the predicted and
//! actual pair sets. This keeps the classical identities: TP + FP is the
//! total predicted volume and TP + FN the total actual volume.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predict::ActivityPrediction;
use crate::stream::{LinkStream, NodePair};

/// Fractional true positives, false positives, and false negatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
}

impl Confusion {
    pub const ZERO: Confusion = Confusion {
        tp: 0.0,
        fp: 0.0,
        fn_: 0.0,
    };

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Per-pair min/max confusion summed over the union of both pair sets, in
/// canonical pair order. Negative predicted counts are rejected.
pub fn confusion(
    predicted: &BTreeMap<NodePair, f64>,
    actual: &BTreeMap<NodePair, u64>,
) -> Result<Confusion> {
    let mut pairs: BTreeSet<NodePair> = predicted.keys().copied().collect();
    pairs.extend(actual.keys().copied());

    let mut c = Confusion::ZERO;
    for pair in pairs {
        let pred = predicted.get(&pair).copied().unwrap_or(0.0);
        if pred < 0.0 {
            return Err(Error::Negative {
                what: "predicted count",
                value: pred,
            });
        }
        let act = actual.get(&pair).copied().unwrap_or(0) as f64;
        c.tp += pred.min(act);
        c.fp += (pred - act).max(0.0);
        c.fn_ += (act - pred).max(0.0);
    }
    Ok(c)
}

/// Precision, recall, and F-score with the 0/0 = 0 convention.
pub fn prf(c: &Confusion) -> (f64, f64, f64) {
    let precision = if c.tp + c.fp > 0.0 { c.tp / (c.tp + c.fp) } else { 0.0 };
    let recall = if c.tp + c.fn_ > 0.0 { c.tp / (c.tp + c.fn_) } else { 0.0 };
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f)
}

/// Confusion totals with derived scores, plus optional labeled breakdowns
/// (per class, per new/recurrent category).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub predicted_total: f64,
    pub actual_total: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub breakdowns: BTreeMap<String, EvaluationReport>,
}

impl EvaluationReport {
    pub fn new(
        predicted: &BTreeMap<NodePair, f64>,
        actual: &BTreeMap<NodePair, u64>,
    ) -> Result<Self> {
        let c = confusion(predicted, actual)?;
        let (precision, recall, f_score) = prf(&c);
        Ok(EvaluationReport {
            confusion: c,
            precision,
            recall,
            f_score,
            predicted_total: predicted.values().sum(),
            actual_total: actual.values().map(|&a| a as f64).sum(),
            breakdowns: BTreeMap::new(),
        })
    }

    pub fn from_prediction(
        predicted: &ActivityPrediction,
        actual: &BTreeMap<NodePair, u64>,
    ) -> Result<Self> {
        Self::new(predicted.counts(), actual)
    }

    /// Evaluates the restriction of both maps to `pairs` and stores it under
    /// `label`.
    pub fn add_breakdown(
        &mut self,
        label: impl Into<String>,
        predicted: &BTreeMap<NodePair, f64>,
        actual: &BTreeMap<NodePair, u64>,
        pairs: &BTreeSet<NodePair>,
    ) -> Result<()> {
        let sub_pred: BTreeMap<NodePair, f64> = predicted
            .iter()
            .filter(|(p, _)| pairs.contains(p))
            .map(|(&p, &v)| (p, v))
            .collect();
        let sub_act: BTreeMap<NodePair, u64> = actual
            .iter()
            .filter(|(p, _)| pairs.contains(p))
            .map(|(&p, &v)| (p, v))
            .collect();
        self.breakdowns
            .insert(label.into(), EvaluationReport::new(&sub_pred, &sub_act)?);
        Ok(())
    }
}

/// Split of a pair set into recurrent pairs (at least one link in the
/// observation stream) and new pairs (none).
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryPartition {
    pub new: BTreeSet<NodePair>,
    pub recurrent: BTreeSet<NodePair>,
}

pub fn categorize_pairs(observation: &LinkStream, pairs: &BTreeSet<NodePair>) -> CategoryPartition {
    let active: BTreeSet<NodePair> = observation.links().iter().map(|l| l.pair).collect();
    let mut new = BTreeSet::new();
    let mut recurrent = BTreeSet::new();
    for &p in pairs {
        if active.contains(&p) {
            recurrent.insert(p);
        } else {
            new.insert(p);
        }
    }
    CategoryPartition { new, recurrent }
}

/// Harmonic mean of per-class F-scores, generalized to `n` classes:
/// `n / sum(1/F_i)`. Any zero F-score collapses the mean to 0 (the limit of
/// the formula).
pub fn harmonic_f(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Config("harmonic mean of an empty score list".into()));
    }
    if scores.iter().any(|&f| f == 0.0) {
        return Ok(0.0);
    }
    Ok(scores.len() as f64 / scores.iter().map(|f| 1.0 / f).sum::<f64>())
}

/// [`harmonic_f`] over the F-scores of per-class reports.
pub fn macro_f(reports: &[EvaluationReport]) -> Result<f64> {
    harmonic_f(&reports.iter().map(|r| r.f_score).collect::<Vec<_>>())
}
