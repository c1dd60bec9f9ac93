//! Prediction index, global budget extrapolation, and proportional
//! allocation.
//!
//! Only the relative values of the index matter: the budget `N` is split
//! across pairs in proportion to their index, so scaling every index entry
//! by the same positive constant leaves the allocation unchanged.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metrics::{MetricId, ScoreTable};
use crate::stream::{Interval, LinkStream, NodePair};

/// Non-negative weight per metric, in a caller-chosen metric order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    entries: Vec<(MetricId, f64)>,
}

impl WeightVector {
    pub fn new(entries: Vec<(MetricId, f64)>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for (id, alpha) in &entries {
            id.validate()?;
            if !seen.insert(*id) {
                return Err(Error::Config(format!("duplicate weight for metric {id}")));
            }
            if !alpha.is_finite() {
                return Err(Error::Config(format!("non-finite weight for metric {id}")));
            }
            if *alpha < 0.0 {
                return Err(Error::Negative {
                    what: "metric weight",
                    value: *alpha,
                });
            }
        }
        Ok(WeightVector { entries })
    }

    pub fn from_alphas(metrics: &[MetricId], alphas: &[f64]) -> Result<Self> {
        if metrics.len() != alphas.len() {
            return Err(Error::Config(format!(
                "{} metrics but {} weights",
                metrics.len(),
                alphas.len()
            )));
        }
        Self::new(metrics.iter().copied().zip(alphas.iter().copied()).collect())
    }

    /// Single-metric vector with unit weight.
    pub fn single(metric: MetricId) -> Self {
        WeightVector {
            entries: vec![(metric, 1.0)],
        }
    }

    pub fn alpha(&self, metric: MetricId) -> Option<f64> {
        self.entries.iter().find(|(m, _)| *m == metric).map(|(_, a)| *a)
    }

    pub fn iter(&self) -> impl Iterator<Item = (MetricId, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Combines normalized tables linearly: `F(u,v) = sum_m alpha_m * m_hat(u,v)`
/// over the union of the tables' pair sets; pairs absent from a table score 0
/// there. Every weighted metric must have exactly one (normalized) table.
pub fn prediction_index(
    weights: &WeightVector,
    tables: &[ScoreTable],
) -> Result<BTreeMap<NodePair, f64>> {
    let mut union: std::collections::BTreeSet<NodePair> = std::collections::BTreeSet::new();
    for t in tables {
        union.extend(t.scores().keys().copied());
    }
    prediction_index_over(weights, tables, union)
}

/// Same combination restricted to an explicit pair set.
pub fn prediction_index_over(
    weights: &WeightVector,
    tables: &[ScoreTable],
    pairs: impl IntoIterator<Item = NodePair>,
) -> Result<BTreeMap<NodePair, f64>> {
    let mut picked: Vec<(&ScoreTable, f64)> = Vec::with_capacity(weights.len());
    for (metric, alpha) in weights.iter() {
        let mut found = None;
        for t in tables {
            if t.metric() == metric {
                if found.is_some() {
                    return Err(Error::Config(format!(
                        "multiple score tables supplied for metric {metric}"
                    )));
                }
                found = Some(t);
            }
        }
        let table = found.ok_or_else(|| {
            Error::Config(format!("weight on metric {metric} has no score table"))
        })?;
        if !table.is_normalized() {
            return Err(Error::Config(format!(
                "score table for {metric} is not normalized"
            )));
        }
        picked.push((table, alpha));
    }

    let mut index = BTreeMap::new();
    for pair in pairs {
        let f = picked
            .iter()
            .map(|(table, alpha)| alpha * table.get(pair))
            .sum();
        index.insert(pair, f);
    }
    Ok(index)
}

/// Linear extrapolation of the input stream's volume onto a window:
/// `N = |E| * |window| / |input interval|`.
pub fn extrapolate_total(input: &LinkStream, window: Interval) -> Result<f64> {
    let input_len = input.interval().length();
    if input_len <= 0.0 {
        return Err(Error::InvalidInterval {
            start: input.interval().start(),
            end: input.interval().end(),
        });
    }
    Ok(input.link_count() as f64 * window.length() / input_len)
}

/// Predicted link count per pair. Counts are real-valued; `total` is the
/// budget they were allocated from, and their sum matches it to within
/// floating-point accumulation error.
#[derive(Debug, Clone)]
pub struct ActivityPrediction {
    counts: BTreeMap<NodePair, f64>,
    total: f64,
}

impl ActivityPrediction {
    pub fn counts(&self) -> &BTreeMap<NodePair, f64> {
        &self.counts
    }

    pub fn get(&self, pair: NodePair) -> f64 {
        self.counts.get(&pair).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Sum of the allocated counts, in canonical pair order.
    pub fn count_sum(&self) -> f64 {
        self.counts.values().sum()
    }

    /// Builds a prediction directly from per-pair counts (e.g. parsed from a
    /// predictions file).
    pub fn from_counts(counts: BTreeMap<NodePair, f64>) -> Result<Self> {
        for (_, &c) in &counts {
            if !c.is_finite() {
                return Err(Error::Config("non-finite predicted count".into()));
            }
            if c < 0.0 {
                return Err(Error::Negative {
                    what: "predicted count",
                    value: c,
                });
            }
        }
        let total = counts.values().sum();
        Ok(ActivityPrediction { counts, total })
    }
}

/// Splits the budget `n` across pairs proportionally to the index. Pairs
/// with a zero index receive 0. An all-zero index with a positive budget is
/// an error: the proportional rule is undefined there and callers must
/// decide what to do.
pub fn allocate(n: f64, index: &BTreeMap<NodePair, f64>) -> Result<ActivityPrediction> {
    if !n.is_finite() {
        return Err(Error::Config(format!("non-finite budget {n}")));
    }
    if n < 0.0 {
        return Err(Error::Negative {
            what: "link budget",
            value: n,
        });
    }
    let mut sum = 0.0;
    for (_, &f) in index {
        if !f.is_finite() {
            return Err(Error::Config("non-finite prediction index value".into()));
        }
        if f < 0.0 {
            return Err(Error::Negative {
                what: "prediction index value",
                value: f,
            });
        }
        sum += f;
    }

    if n == 0.0 {
        return Ok(ActivityPrediction {
            counts: index.keys().map(|&p| (p, 0.0)).collect(),
            total: 0.0,
        });
    }
    if sum == 0.0 {
        return Err(Error::DegenerateIndex);
    }

    let counts = index.iter().map(|(&p, &f)| (p, n * f / sum)).collect();
    Ok(ActivityPrediction { counts, total: n })
}
