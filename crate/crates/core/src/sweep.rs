//! Two-metric mixing analysis: F-score as a function of the mixing
//! parameter, `F = alpha * m_a + (1 - alpha) * m_b`, overall and split into
//! new-link and recurrent-link categories.
//!
//! Both tables are computed once and reused across the whole grid.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::eval::{categorize_pairs, confusion, prf};
use crate::metrics::{score_all, MetricId};
use crate::predict::{allocate, prediction_index, WeightVector};
use crate::stream::{LinkStream, NodePair};

/// Sweep definition: the reference metric `metric_a` takes weight `alpha`,
/// `metric_b` takes `1 - alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub metric_a: MetricId,
    pub metric_b: MetricId,
    pub alphas: Vec<f64>,
    pub categories: bool,
}

impl SweepSpec {
    pub fn new(metric_a: MetricId, metric_b: MetricId, alphas: Vec<f64>) -> Result<Self> {
        metric_a.validate()?;
        metric_b.validate()?;
        if metric_a == metric_b {
            return Err(Error::Config(format!(
                "sweep needs two distinct metrics, got {metric_a} twice"
            )));
        }
        if alphas.is_empty() {
            return Err(Error::Config("sweep needs at least one alpha".into()));
        }
        for w in alphas.windows(2) {
            if w[0] > w[1] {
                return Err(Error::Config("sweep alphas must be sorted ascending".into()));
            }
        }
        if alphas.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return Err(Error::Config("sweep alphas must lie in [0, 1]".into()));
        }
        Ok(SweepSpec {
            metric_a,
            metric_b,
            alphas,
            categories: true,
        })
    }

    /// 101 evenly spaced mixing values, fine enough to resolve the sharp
    /// features near the pure-temporal end.
    pub fn default_grid() -> Vec<f64> {
        (0..=100).map(|i| i as f64 / 100.0).collect()
    }
}

/// One grid point. Category scores are present when the spec asked for
/// them; a degenerate mixing (all-zero index) yields zero scores and sets
/// the flag.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub f_all: f64,
    pub f_new: Option<f64>,
    pub f_recurrent: Option<f64>,
    pub degenerate: bool,
}

/// Evaluates every mixing value of the spec on `(l_obs -> l_target)` with
/// budget `n`.
pub fn run_sweep(
    spec: &SweepSpec,
    l_obs: &LinkStream,
    l_target: &LinkStream,
    n: f64,
) -> Result<Vec<SweepRow>> {
    let candidates = l_obs.candidate_pairs();
    let tables = score_all(l_obs, &[spec.metric_a, spec.metric_b], &candidates)?;
    let actual = l_target.pair_counts();

    let mut eval_pairs: BTreeSet<NodePair> = candidates.clone();
    eval_pairs.extend(actual.keys().copied());
    let categories = categorize_pairs(l_obs, &eval_pairs);

    let mut rows = Vec::with_capacity(spec.alphas.len());
    for &alpha in &spec.alphas {
        let weights = WeightVector::new(vec![
            (spec.metric_a, alpha),
            (spec.metric_b, 1.0 - alpha),
        ])?;
        let index = prediction_index(&weights, &tables)?;
        let prediction = match allocate(n, &index) {
            Ok(p) => p,
            Err(Error::DegenerateIndex) => {
                rows.push(SweepRow {
                    alpha,
                    f_all: 0.0,
                    f_new: spec.categories.then_some(0.0),
                    f_recurrent: spec.categories.then_some(0.0),
                    degenerate: true,
                });
                continue;
            }
            Err(e) => return Err(e),
        };

        let overall = confusion(prediction.counts(), &actual)?;
        let f_all = prf(&overall).2;
        let (f_new, f_recurrent) = if spec.categories {
            let f_for = |pairs: &BTreeSet<NodePair>| -> Result<f64> {
                let sub_pred = prediction
                    .counts()
                    .iter()
                    .filter(|(p, _)| pairs.contains(p))
                    .map(|(&p, &v)| (p, v))
                    .collect();
                let sub_act = actual
                    .iter()
                    .filter(|(p, _)| pairs.contains(p))
                    .map(|(&p, &v)| (p, v))
                    .collect();
                Ok(prf(&confusion(&sub_pred, &sub_act)?).2)
            };
            (Some(f_for(&categories.new)?), Some(f_for(&categories.recurrent)?))
        } else {
            (None, None)
        };

        rows.push(SweepRow {
            alpha,
            f_all,
            f_new,
            f_recurrent,
            degenerate: false,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::extrapolate_total;
    use crate::stream::Interval;

    // Observation: a-b interacts repeatedly, a-c once; b and c share the
    // neighbor a. Target: a-b recurs and the new pair b-c appears.
    fn fixture() -> (LinkStream, LinkStream, LinkStream) {
        let s = LinkStream::from_triples(
            Interval::new(0.0, 20.0).unwrap(),
            &[
                (1.0, "a", "b"),
                (3.0, "a", "b"),
                (5.0, "a", "c"),
                (7.0, "a", "b"),
                (11.0, "a", "b"),
                (13.0, "b", "c"),
                (15.0, "a", "b"),
                (17.0, "b", "c"),
            ],
        )
        .unwrap();
        let obs = s.slice(Interval::new(0.0, 10.0).unwrap());
        let target = s.slice(Interval::new(10.0, 20.0).unwrap());
        (s, obs, target)
    }

    #[test]
    fn sweep_rows_follow_the_grid_order() {
        let (_, obs, target) = fixture();
        let spec = SweepSpec::new(
            MetricId::PairActivity,
            MetricId::CommonNeighbors,
            vec![0.0, 0.5, 1.0],
        )
        .unwrap();
        let n = extrapolate_total(&obs, target.interval()).unwrap();
        let rows = run_sweep(&spec, &obs, &target, n).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].alpha, 0.0);
        assert_eq!(rows[2].alpha, 1.0);
    }

    #[test]
    fn temporal_reference_cannot_predict_new_links() {
        let (_, obs, target) = fixture();
        let spec = SweepSpec::new(
            MetricId::PairActivity,
            MetricId::CommonNeighbors,
            vec![1.0],
        )
        .unwrap();
        let n = extrapolate_total(&obs, target.interval()).unwrap();
        let rows = run_sweep(&spec, &obs, &target, n).unwrap();
        assert!(!rows[0].degenerate);
        assert_eq!(rows[0].f_new, Some(0.0));
        assert!(rows[0].f_recurrent.unwrap() > 0.0);
    }

    #[test]
    fn boundary_alpha_matches_single_metric_run() {
        let (_, obs, target) = fixture();
        let spec = SweepSpec::new(
            MetricId::PairActivity,
            MetricId::CommonNeighbors,
            vec![0.0, 1.0],
        )
        .unwrap();
        let n = extrapolate_total(&obs, target.interval()).unwrap();
        let rows = run_sweep(&spec, &obs, &target, n).unwrap();

        for (row, metric) in [
            (&rows[1], MetricId::PairActivity),
            (&rows[0], MetricId::CommonNeighbors),
        ] {
            let candidates = obs.candidate_pairs();
            let tables = score_all(&obs, &[metric], &candidates).unwrap();
            let index = prediction_index(&WeightVector::single(metric), &tables).unwrap();
            let pred = allocate(n, &index).unwrap();
            let f = prf(&confusion(pred.counts(), &target.pair_counts()).unwrap()).2;
            assert_eq!(row.f_all, f, "boundary run must equal the single-metric run");
        }
    }

    #[test]
    fn category_confusions_sum_to_overall() {
        let (_, obs, target) = fixture();
        let spec = SweepSpec::new(
            MetricId::PairActivity,
            MetricId::CommonNeighbors,
            vec![0.25, 0.75],
        )
        .unwrap();
        let n = extrapolate_total(&obs, target.interval()).unwrap();
        let candidates = obs.candidate_pairs();
        let tables =
            score_all(&obs, &[spec.metric_a, spec.metric_b], &candidates).unwrap();
        let actual = target.pair_counts();
        let mut eval_pairs = candidates.clone();
        eval_pairs.extend(actual.keys().copied());
        let cats = categorize_pairs(&obs, &eval_pairs);

        for &alpha in &spec.alphas {
            let weights = WeightVector::new(vec![
                (spec.metric_a, alpha),
                (spec.metric_b, 1.0 - alpha),
            ])
            .unwrap();
            let index = prediction_index(&weights, &tables).unwrap();
            let pred = allocate(n, &index).unwrap();
            let overall = confusion(pred.counts(), &actual).unwrap();
            let restrict = |pairs: &BTreeSet<NodePair>| {
                let sp = pred
                    .counts()
                    .iter()
                    .filter(|(p, _)| pairs.contains(p))
                    .map(|(&p, &v)| (p, v))
                    .collect();
                let sa = actual
                    .iter()
                    .filter(|(p, _)| pairs.contains(p))
                    .map(|(&p, &v)| (p, v))
                    .collect();
                confusion(&sp, &sa).unwrap()
            };
            let cn = restrict(&cats.new);
            let cr = restrict(&cats.recurrent);
            assert!((cn.tp + cr.tp - overall.tp).abs() < 1e-9);
            assert!((cn.fp + cr.fp - overall.fp).abs() < 1e-9);
            assert!((cn.fn_ + cr.fn_ - overall.fn_).abs() < 1e-9);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec::new(
            MetricId::PairActivity,
            MetricId::PairActivity,
            vec![0.5]
        )
        .is_err());
        assert!(SweepSpec::new(MetricId::PairActivity, MetricId::CommonNeighbors, vec![]).is_err());
        assert!(SweepSpec::new(
            MetricId::PairActivity,
            MetricId::CommonNeighbors,
            vec![0.5, 0.2]
        )
        .is_err());
        assert!(SweepSpec::new(
            MetricId::PairActivity,
            MetricId::CommonNeighbors,
            vec![1.5]
        )
        .is_err());
        assert_eq!(SweepSpec::default_grid().len(), 101);
    }
}
