//! Hold-out period scheduling and derivative-free weight optimization.
//!
//! The input stream is split into a training sub-stream and a validation
//! sub-stream (which doubles as the observation stream for the actual
//! prediction). Weights maximizing the validation objective are found by
//! finite-difference gradient ascent with backtracking step shrink and
//! projection onto the non-negative orthant. The objective is not smooth
//! (min/max switch points in the confusion), which is why derivatives are
//! estimated rather than derived.
//!
//! Metric tables are computed once per observation stream and reused by
//! every objective evaluation; only the linear combination changes.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classes::{assign_classes, ActivityClass};
use crate::error::{Error, Result};
use crate::eval::{confusion, harmonic_f, prf};
use crate::metrics::{score_all, MetricId, ScoreTable};
use crate::predict::{allocate, extrapolate_total, WeightVector};
use crate::stream::{Interval, LinkStream, NodePair};

/// Contiguous training / validation-observation / prediction windows.
/// Training ends exactly where observation starts; a gap before the
/// prediction window is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodSchedule {
    pub training: Interval,
    pub observation: Interval,
    pub prediction: Interval,
}

impl PeriodSchedule {
    pub fn new(training: Interval, observation: Interval, prediction: Interval) -> Result<Self> {
        if training.end() != observation.start() {
            return Err(Error::Config(format!(
                "training must end where observation starts: {} != {}",
                training.end(),
                observation.start()
            )));
        }
        if observation.end() > prediction.start() {
            return Err(Error::Config(format!(
                "observation must end at or before the prediction window: {} > {}",
                observation.end(),
                prediction.start()
            )));
        }
        Ok(PeriodSchedule {
            training,
            observation,
            prediction,
        })
    }
}

/// Splits the stream into the training and validation/observation
/// sub-streams of the schedule.
pub fn split_periods(stream: &LinkStream, schedule: &PeriodSchedule) -> (LinkStream, LinkStream) {
    (
        stream.slice(schedule.training),
        stream.slice(schedule.observation),
    )
}

/// Validation objective flavor: the overall F-score, or the harmonic mean of
/// per-class F-scores when training per-class weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    OverallF,
    MacroF,
}

/// Optimizer configuration. Defaults: 10 restarts, 200 iterations,
/// initial step 0.25 halved on rejection down to 1e-4, finite-difference
/// probe 1e-3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    pub initial_step: f64,
    pub step_shrink: f64,
    pub min_step: f64,
    pub fd_epsilon: f64,
    pub seed: u64,
    pub objective: ObjectiveKind,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            restarts: 10,
            max_iterations: 200,
            initial_step: 0.25,
            step_shrink: 0.5,
            min_step: 1e-4,
            fd_epsilon: 1e-3,
            seed: 42,
            objective: ObjectiveKind::OverallF,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::Config("learner needs at least one restart".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("learner needs at least one iteration".into()));
        }
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return Err(Error::Config("initial step must be positive".into()));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(Error::Config("step shrink must lie in (0, 1)".into()));
        }
        if !(self.min_step > 0.0) || self.min_step > self.initial_step {
            return Err(Error::Config(
                "min step must be positive and no larger than the initial step".into(),
            ));
        }
        if !(self.fd_epsilon > 0.0) || !self.fd_epsilon.is_finite() {
            return Err(Error::Config("finite-difference epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// One accepted iterate of a restart.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
    pub step: f64,
    pub alphas: Vec<f64>,
}

/// Full history of one restart.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartTrace {
    pub restart: usize,
    pub seed: u64,
    pub points: Vec<TracePoint>,
    pub final_alphas: Vec<f64>,
    pub final_value: f64,
}

/// Best weights across restarts plus the per-restart traces.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub best_alphas: Vec<f64>,
    pub best_value: f64,
    pub best_restart: usize,
    pub restarts: Vec<RestartTrace>,
}

/// Maximizes `objective` over the non-negative orthant of dimension `dim`.
///
/// Each restart draws its start uniformly from `[0, 1]^dim` using a seed
/// derived from the master seed, then ascends along clamped central
/// finite-difference gradients with a backtracking line search: starting
/// from `initial_step`, the step is shrunk until the objective does not
/// decrease. A restart ends at `max_iterations`, when a line search bottoms
/// out below `min_step` (no acceptable uphill step at any scale), or on an
/// exactly zero gradient.
pub fn optimize(
    cfg: &LearnerConfig,
    dim: usize,
    objective: impl Fn(&[f64]) -> f64,
) -> Result<OptimizeOutcome> {
    cfg.validate()?;
    if dim == 0 {
        return Err(Error::Config("optimizer needs at least one parameter".into()));
    }

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sub_seeds: Vec<u64> = (0..cfg.restarts).map(|_| master.random()).collect();

    let mut restarts = Vec::with_capacity(cfg.restarts);
    for (restart, &seed) in sub_seeds.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut alphas: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..=1.0)).collect();
        let mut value = objective(&alphas);
        let mut points = vec![TracePoint {
            iteration: 0,
            objective: value,
            step: cfg.initial_step,
            alphas: alphas.clone(),
        }];

        'iterations: for iteration in 1..=cfg.max_iterations {
            let grad = fd_gradient(&objective, &alphas, cfg.fd_epsilon);
            if grad.iter().all(|&g| g == 0.0) {
                break;
            }
            let mut step = cfg.initial_step;
            loop {
                if step < cfg.min_step {
                    break 'iterations;
                }
                let candidate: Vec<f64> = alphas
                    .iter()
                    .zip(&grad)
                    .map(|(&a, &g)| (a + step * g).max(0.0))
                    .collect();
                let cv = objective(&candidate);
                if cv >= value {
                    alphas = candidate;
                    value = cv;
                    points.push(TracePoint {
                        iteration,
                        objective: value,
                        step,
                        alphas: alphas.clone(),
                    });
                    break;
                }
                step *= cfg.step_shrink;
            }
        }

        restarts.push(RestartTrace {
            restart,
            seed,
            points,
            final_alphas: alphas,
            final_value: value,
        });
    }

    let mut best = 0usize;
    for (i, r) in restarts.iter().enumerate() {
        if r.final_value > restarts[best].final_value {
            best = i;
        }
    }
    Ok(OptimizeOutcome {
        best_alphas: restarts[best].final_alphas.clone(),
        best_value: restarts[best].final_value,
        best_restart: best,
        restarts,
    })
}

/// Central finite differences with the lower probe clamped at zero so the
/// objective is never queried at negative weights.
fn fd_gradient(objective: &impl Fn(&[f64]) -> f64, alphas: &[f64], eps: f64) -> Vec<f64> {
    let mut grad = vec![0.0; alphas.len()];
    let mut probe = alphas.to_vec();
    for i in 0..alphas.len() {
        let hi = alphas[i] + eps;
        let lo = (alphas[i] - eps).max(0.0);
        probe[i] = hi;
        let f_hi = objective(&probe);
        probe[i] = lo;
        let f_lo = objective(&probe);
        probe[i] = alphas[i];
        grad[i] = (f_hi - f_lo) / (hi - lo);
    }
    grad
}

/// Precomputed state for evaluating the training objective: normalized
/// metric tables on the observation stream, actual counts on the target
/// stream, and the extrapolated budget. Evaluations never rescore metrics.
pub struct ObjectiveContext {
    metrics: Vec<MetricId>,
    tables: Vec<ScoreTable>,
    candidates: BTreeSet<NodePair>,
    actual: BTreeMap<NodePair, u64>,
    budget: f64,
    classes: Option<ClassObjective>,
}

struct ClassObjective {
    /// Trainable classes (at least one candidate pair on the observation
    /// stream) with their candidate pairs, in class order.
    blocks: Vec<(ActivityClass, BTreeSet<NodePair>)>,
    /// Evaluation pair sets per trainable class: candidates plus pairs that
    /// only appear in the target, assigned by observation-stream activity.
    eval_sets: Vec<(ActivityClass, BTreeSet<NodePair>)>,
}

impl ObjectiveContext {
    /// Objective for a single weight vector: overall F-score of the
    /// allocation against the target counts.
    pub fn unclassed(
        l_obs: &LinkStream,
        l_target: &LinkStream,
        metrics: &[MetricId],
    ) -> Result<Self> {
        if metrics.is_empty() {
            return Err(Error::Config("objective needs at least one metric".into()));
        }
        let candidates = l_obs.candidate_pairs();
        let tables = score_all(l_obs, metrics, &candidates)?;
        Ok(ObjectiveContext {
            metrics: metrics.to_vec(),
            tables,
            candidates,
            actual: l_target.pair_counts(),
            budget: extrapolate_total(l_obs, l_target.interval())?,
            classes: None,
        })
    }

    /// Objective for per-class weight vectors (concatenated into one
    /// parameter vector): harmonic mean of per-class F-scores. Classes are
    /// assigned by activity on the observation stream with threshold `k`;
    /// classes without candidate pairs receive no parameter block.
    pub fn classed(
        l_obs: &LinkStream,
        l_target: &LinkStream,
        metrics: &[MetricId],
        k: u32,
    ) -> Result<Self> {
        if metrics.is_empty() {
            return Err(Error::Config("objective needs at least one metric".into()));
        }
        let candidates = l_obs.candidate_pairs();
        let tables = score_all(l_obs, metrics, &candidates)?;
        let actual = l_target.pair_counts();

        let mut eval_pairs = candidates.clone();
        eval_pairs.extend(actual.keys().copied());
        let candidate_partition = assign_classes(l_obs, &candidates, k)?;
        let eval_partition = assign_classes(l_obs, &eval_pairs, k)?;

        let mut blocks = Vec::new();
        let mut eval_sets = Vec::new();
        for class in ActivityClass::ALL {
            let members = candidate_partition.members(class);
            if members.is_empty() {
                continue;
            }
            blocks.push((class, members));
            eval_sets.push((class, eval_partition.members(class)));
        }
        if blocks.is_empty() {
            return Err(Error::Config(
                "no class holds any candidate pair on the observation stream".into(),
            ));
        }

        Ok(ObjectiveContext {
            metrics: metrics.to_vec(),
            tables,
            candidates,
            actual,
            budget: extrapolate_total(l_obs, l_target.interval())?,
            classes: Some(ClassObjective { blocks, eval_sets }),
        })
    }

    pub fn metrics(&self) -> &[MetricId] {
        &self.metrics
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Classes that received a parameter block, in block order.
    pub fn trainable_classes(&self) -> Vec<ActivityClass> {
        match &self.classes {
            Some(c) => c.blocks.iter().map(|(class, _)| *class).collect(),
            None => Vec::new(),
        }
    }

    /// Parameter-vector length: `M` unclassed, `M * trainable classes`
    /// otherwise.
    pub fn dim(&self) -> usize {
        match &self.classes {
            Some(c) => self.metrics.len() * c.blocks.len(),
            None => self.metrics.len(),
        }
    }

    fn combine(&self, alphas: &[f64], pairs: &BTreeSet<NodePair>) -> BTreeMap<NodePair, f64> {
        pairs
            .iter()
            .map(|&p| {
                let f = self
                    .tables
                    .iter()
                    .zip(alphas)
                    .map(|(t, &a)| a * t.get(p))
                    .sum();
                (p, f)
            })
            .collect()
    }

    /// Runs the cached pipeline for one parameter vector and returns the
    /// objective value. Degenerate allocations (all-zero index) evaluate to
    /// 0 so the optimizer can traverse them.
    pub fn evaluate(&self, alphas: &[f64]) -> f64 {
        assert_eq!(alphas.len(), self.dim(), "parameter vector length mismatch");
        match &self.classes {
            None => {
                let index = self.combine(alphas, &self.candidates);
                let Ok(pred) = allocate(self.budget, &index) else {
                    return 0.0;
                };
                match confusion(pred.counts(), &self.actual) {
                    Ok(c) => prf(&c).2,
                    Err(_) => 0.0,
                }
            }
            Some(cls) => {
                let m = self.metrics.len();
                let mut merged = BTreeMap::new();
                for (i, (_, pairs)) in cls.blocks.iter().enumerate() {
                    merged.extend(self.combine(&alphas[i * m..(i + 1) * m], pairs));
                }
                let Ok(pred) = allocate(self.budget, &merged) else {
                    return 0.0;
                };
                let mut scores = Vec::with_capacity(cls.eval_sets.len());
                for (_, pairs) in &cls.eval_sets {
                    let sub_pred: BTreeMap<NodePair, f64> = pred
                        .counts()
                        .iter()
                        .filter(|(p, _)| pairs.contains(p))
                        .map(|(&p, &v)| (p, v))
                        .collect();
                    let sub_act: BTreeMap<NodePair, u64> = self
                        .actual
                        .iter()
                        .filter(|(p, _)| pairs.contains(p))
                        .map(|(&p, &v)| (p, v))
                        .collect();
                    match confusion(&sub_pred, &sub_act) {
                        Ok(c) => scores.push(prf(&c).2),
                        Err(_) => return 0.0,
                    }
                }
                harmonic_f(&scores).unwrap_or(0.0)
            }
        }
    }
}

/// Learned weights together with the optimizer outcome they came from.
#[derive(Debug, Clone)]
pub struct TrainedWeights {
    pub weights: WeightVector,
    pub value: f64,
    pub outcome: OptimizeOutcome,
}

/// Trains a single weight vector on `(L1 -> L2)`: builds the cached
/// objective, optimizes, and wraps the best parameters.
pub fn train(
    cfg: &LearnerConfig,
    l_obs: &LinkStream,
    l_target: &LinkStream,
    metrics: &[MetricId],
) -> Result<TrainedWeights> {
    let ctx = ObjectiveContext::unclassed(l_obs, l_target, metrics)?;
    let outcome = optimize(cfg, ctx.dim(), |a| ctx.evaluate(a))?;
    let weights = WeightVector::from_alphas(metrics, &outcome.best_alphas)?;
    Ok(TrainedWeights {
        weights,
        value: outcome.best_value,
        outcome,
    })
}
