//! Activity classes of node pairs and per-class weight training.
//!
//! Pairs are stratified by their link count on a reference stream: C1 holds
//! pairs that never interacted, C2 pairs with 1..=k links, C3 pairs with
//! more than k links. Each class gets its own weight vector, trained
//! jointly against the harmonic mean of the per-class F-scores so that
//! high-activity classes cannot dominate the objective. For prediction,
//! pairs are reassigned on the observation stream and the global budget is
//! allocated over the concatenation of the per-class index maps, which
//! keeps the budget conserved overall.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{optimize, LearnerConfig, ObjectiveContext, OptimizeOutcome, TrainedWeights};
use crate::metrics::{score_all, MetricId};
use crate::predict::{allocate, prediction_index_over, ActivityPrediction, WeightVector};
use crate::stream::{LinkStream, NodePair};

/// Activity stratum of a node pair relative to a reference stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActivityClass {
    /// No links on the reference stream.
    C1,
    /// Between 1 and k links.
    C2,
    /// More than k links.
    C3,
}

impl ActivityClass {
    pub const ALL: [ActivityClass; 3] = [ActivityClass::C1, ActivityClass::C2, ActivityClass::C3];
}

impl fmt::Display for ActivityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivityClass::C1 => write!(f, "C1"),
            ActivityClass::C2 => write!(f, "C2"),
            ActivityClass::C3 => write!(f, "C3"),
        }
    }
}

/// Assignment of a pair set into the three classes for a given threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPartition {
    pub threshold_k: u32,
    pub assignment: BTreeMap<NodePair, ActivityClass>,
}

impl ClassPartition {
    pub fn class_of(&self, pair: NodePair) -> Option<ActivityClass> {
        self.assignment.get(&pair).copied()
    }

    /// Pairs assigned to `class`, in canonical order.
    pub fn members(&self, class: ActivityClass) -> BTreeSet<NodePair> {
        self.assignment
            .iter()
            .filter(|(_, &c)| c == class)
            .map(|(&p, _)| p)
            .collect()
    }
}

/// Classifies `pairs` by their activity on `reference`: 0 links is C1,
/// 1..=k is C2, more than k is C3.
pub fn assign_classes(
    reference: &LinkStream,
    pairs: &BTreeSet<NodePair>,
    k: u32,
) -> Result<ClassPartition> {
    if k < 1 {
        return Err(Error::Config(format!("class threshold k must be >= 1, got {k}")));
    }
    let counts = reference.pair_counts();
    let assignment = pairs
        .iter()
        .map(|&p| {
            let activity = counts.get(&p).copied().unwrap_or(0);
            let class = if activity == 0 {
                ActivityClass::C1
            } else if activity <= k as u64 {
                ActivityClass::C2
            } else {
                ActivityClass::C3
            };
            (p, class)
        })
        .collect();
    Ok(ClassPartition {
        threshold_k: k,
        assignment,
    })
}

/// Per-class prediction: pairs are reassigned on the observation stream,
/// each class's index is computed with its own weights over the shared
/// metric tables, and the budget `n` is allocated over the concatenated
/// index maps. A class whose index is all-zero simply receives nothing
/// (logged); the allocation fails only if every class is degenerate.
pub fn classed_predict(
    l_obs: &LinkStream,
    weights: &BTreeMap<ActivityClass, WeightVector>,
    k: u32,
    metrics: &[MetricId],
    n: f64,
) -> Result<(ActivityPrediction, ClassPartition)> {
    let candidates = l_obs.candidate_pairs();
    let partition = assign_classes(l_obs, &candidates, k)?;
    let tables = score_all(l_obs, metrics, &candidates)?;
    let prediction = classed_allocate(weights, &partition, &tables, n)?;
    Ok((prediction, partition))
}

/// Allocation step of [`classed_predict`], reusing already computed tables
/// and an existing partition (e.g. across optimizer restarts).
pub fn classed_allocate(
    weights: &BTreeMap<ActivityClass, WeightVector>,
    partition: &ClassPartition,
    tables: &[crate::metrics::ScoreTable],
    n: f64,
) -> Result<ActivityPrediction> {
    let mut merged: BTreeMap<NodePair, f64> = BTreeMap::new();
    for class in ActivityClass::ALL {
        let members = partition.members(class);
        if members.is_empty() {
            continue;
        }
        let class_weights = weights.get(&class).ok_or_else(|| {
            Error::Config(format!("no weight vector supplied for non-empty class {class}"))
        })?;
        let index = prediction_index_over(class_weights, tables, members)?;
        if index.values().all(|&f| f == 0.0) {
            log::warn!("class {class} has an all-zero prediction index; it will receive no links");
        }
        merged.extend(index);
    }
    allocate(n, &merged)
}

/// Outcome of per-class training.
#[derive(Debug, Clone)]
pub struct ClassedTrainOutcome {
    /// One weight vector per class (trained, or fallback for classes empty
    /// on the training stream).
    pub weights: BTreeMap<ActivityClass, WeightVector>,
    /// Best harmonic-mean objective value reached.
    pub value: f64,
    /// Optimizer outcome over the concatenated parameter vector.
    pub outcome: OptimizeOutcome,
    /// Classes that actually received a parameter block, in block order.
    pub trained_classes: Vec<ActivityClass>,
    /// Unclassed training used to fill weights for classes with no
    /// candidate pairs on the training stream, if any were needed.
    pub fallback: Option<TrainedWeights>,
}

impl ClassedTrainOutcome {
    /// Splits a concatenated parameter vector from the optimizer into one
    /// weight vector per trained class, using the fallback weights for the
    /// remaining classes.
    pub fn weights_for_alphas(
        &self,
        metrics: &[MetricId],
        alphas: &[f64],
    ) -> Result<BTreeMap<ActivityClass, WeightVector>> {
        split_class_weights(
            metrics,
            &self.trained_classes,
            alphas,
            self.fallback.as_ref().map(|f| &f.weights),
        )
    }
}

pub(crate) fn split_class_weights(
    metrics: &[MetricId],
    trained: &[ActivityClass],
    alphas: &[f64],
    fallback: Option<&WeightVector>,
) -> Result<BTreeMap<ActivityClass, WeightVector>> {
    let m = metrics.len();
    let mut out = BTreeMap::new();
    for (i, class) in trained.iter().enumerate() {
        out.insert(*class, WeightVector::from_alphas(metrics, &alphas[i * m..(i + 1) * m])?);
    }
    for class in ActivityClass::ALL {
        if !out.contains_key(&class) {
            if let Some(fb) = fallback {
                out.insert(class, fb.clone());
            }
        }
    }
    Ok(out)
}

/// Jointly trains one weight vector per class on `(L1 -> L2)` against the
/// harmonic mean of per-class F-scores, with classes assigned on `L1`.
/// Classes with no candidate pair on `L1` cannot be trained; they fall back
/// to a plain unclassed training run (logged).
pub fn classed_train(
    cfg: &LearnerConfig,
    l1: &LinkStream,
    l2: &LinkStream,
    k: u32,
    metrics: &[MetricId],
) -> Result<ClassedTrainOutcome> {
    let ctx = ObjectiveContext::classed(l1, l2, metrics, k)?;
    let trained_classes = ctx.trainable_classes();
    let outcome = optimize(cfg, ctx.dim(), |a| ctx.evaluate(a))?;

    let fallback = if trained_classes.len() < ActivityClass::ALL.len() {
        let missing: Vec<String> = ActivityClass::ALL
            .iter()
            .filter(|c| !trained_classes.contains(c))
            .map(|c| c.to_string())
            .collect();
        log::warn!(
            "classes {} hold no candidate pair on the training stream; \
             falling back to unclassed weights for them",
            missing.join(", ")
        );
        Some(crate::learn::train(cfg, l1, l2, metrics)?)
    } else {
        None
    };

    let weights = split_class_weights(
        metrics,
        &trained_classes,
        &outcome.best_alphas,
        fallback.as_ref().map(|f| &f.weights),
    )?;

    Ok(ClassedTrainOutcome {
        weights,
        value: outcome.best_value,
        outcome,
        trained_classes,
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::prediction_index;
    use crate::stream::Interval;

    // Triangle with activities ab=3, ac=2, bc=2 plus the inactive candidate
    // pair {a,z} is impossible here (z isolated), so tests use the candidate
    // closure set plus an explicit extra pair where needed.
    fn s2_with_z() -> LinkStream {
        LinkStream::from_triples_with_universe(
            Interval::new(0.0, 10.0).unwrap(),
            &[
                (1.0, "a", "b"),
                (2.0, "a", "c"),
                (3.0, "b", "c"),
                (4.0, "a", "b"),
                (5.0, "b", "c"),
                (6.0, "a", "c"),
                (9.0, "a", "b"),
            ],
            &["z"],
        )
        .unwrap()
    }

    fn pairs_with_az(s: &LinkStream) -> BTreeSet<NodePair> {
        let mut pairs = s.candidate_pairs();
        pairs.insert(s.pair("a", "z").unwrap());
        pairs
    }

    #[test]
    fn assignment_by_activity_threshold() {
        let s = s2_with_z();
        let pairs = pairs_with_az(&s);

        let p2 = assign_classes(&s, &pairs, 2).unwrap();
        assert_eq!(p2.class_of(s.pair("a", "z").unwrap()), Some(ActivityClass::C1));
        assert_eq!(p2.class_of(s.pair("a", "c").unwrap()), Some(ActivityClass::C2));
        assert_eq!(p2.class_of(s.pair("b", "c").unwrap()), Some(ActivityClass::C2));
        assert_eq!(p2.class_of(s.pair("a", "b").unwrap()), Some(ActivityClass::C3));

        let p5 = assign_classes(&s, &pairs, 5).unwrap();
        assert_eq!(p5.class_of(s.pair("a", "z").unwrap()), Some(ActivityClass::C1));
        assert_eq!(p5.class_of(s.pair("a", "b").unwrap()), Some(ActivityClass::C2));
        assert!(p5.members(ActivityClass::C3).is_empty());

        assert!(assign_classes(&s, &pairs, 0).is_err());
    }

    #[test]
    fn empty_reference_puts_everything_in_c1() {
        let s = s2_with_z();
        let empty = s.slice(Interval::new(100.0, 200.0).unwrap());
        let pairs = pairs_with_az(&s);
        let p = assign_classes(&empty, &pairs, 5).unwrap();
        assert_eq!(p.members(ActivityClass::C1).len(), pairs.len());
    }

    #[test]
    fn partition_is_disjoint_and_exhaustive() {
        let s = s2_with_z();
        let pairs = pairs_with_az(&s);
        let p = assign_classes(&s, &pairs, 2).unwrap();
        let c1 = p.members(ActivityClass::C1);
        let c2 = p.members(ActivityClass::C2);
        let c3 = p.members(ActivityClass::C3);
        assert_eq!(c1.len() + c2.len() + c3.len(), pairs.len());
        assert!(c1.intersection(&c2).next().is_none());
        assert!(c1.intersection(&c3).next().is_none());
        assert!(c2.intersection(&c3).next().is_none());

        // A larger threshold can only shrink C3.
        let p5 = assign_classes(&s, &pairs, 5).unwrap();
        assert!(p5
            .members(ActivityClass::C3)
            .is_subset(&p.members(ActivityClass::C3)));
    }

    #[test]
    fn identical_weights_reproduce_unclassed_prediction() {
        let s = s2_with_z();
        let metrics = [MetricId::PairActivity, MetricId::CommonNeighbors];
        let shared = WeightVector::from_alphas(&metrics, &[0.6, 0.4]).unwrap();
        let weights: BTreeMap<ActivityClass, WeightVector> = ActivityClass::ALL
            .iter()
            .map(|&c| (c, shared.clone()))
            .collect();

        let n = 12.0;
        let (classed, _) = classed_predict(&s, &weights, 2, &metrics, n).unwrap();

        let candidates = s.candidate_pairs();
        let tables = score_all(&s, &metrics, &candidates).unwrap();
        let index = prediction_index(&shared, &tables).unwrap();
        let unclassed = allocate(n, &index).unwrap();

        assert_eq!(classed.counts().len(), unclassed.counts().len());
        for (p, v) in classed.counts() {
            assert_eq!(unclassed.get(*p), *v, "bit-identical allocation expected");
        }
    }

    #[test]
    fn structural_c1_weights_reach_inactive_pairs() {
        // Star around hub a: the leaf pair {b,c} has a common neighbor but no
        // past links, so it sits in C1 and only structural weight reaches it.
        let s = LinkStream::from_triples(
            Interval::new(0.0, 10.0).unwrap(),
            &[(1.0, "a", "b"), (2.0, "a", "c"), (4.0, "a", "b")],
        )
        .unwrap();
        let metrics = [MetricId::CommonNeighbors, MetricId::PairActivity];
        let mut weights = BTreeMap::new();
        weights.insert(
            ActivityClass::C1,
            WeightVector::from_alphas(&metrics, &[1.0, 0.0]).unwrap(),
        );
        weights.insert(
            ActivityClass::C2,
            WeightVector::from_alphas(&metrics, &[0.0, 1.0]).unwrap(),
        );
        weights.insert(
            ActivityClass::C3,
            WeightVector::from_alphas(&metrics, &[0.0, 1.0]).unwrap(),
        );
        let (pred, partition) = classed_predict(&s, &weights, 1, &metrics, 6.0).unwrap();
        let bc = s.pair("b", "c").unwrap();
        assert_eq!(partition.class_of(bc), Some(ActivityClass::C1));
        assert!(pred.get(bc) > 0.0);
        assert!((pred.count_sum() - 6.0).abs() < 1e-6 * 6.0);
    }

    #[test]
    fn classed_predict_requires_weights_for_nonempty_classes() {
        let s = s2_with_z();
        let metrics = [MetricId::PairActivity];
        let weights: BTreeMap<ActivityClass, WeightVector> = [(
            ActivityClass::C2,
            WeightVector::single(MetricId::PairActivity),
        )]
        .into_iter()
        .collect();
        // k=2 gives a non-empty C3 (pair ab), which has no weights.
        assert!(classed_predict(&s, &weights, 2, &metrics, 5.0).is_err());
    }
}
