//! Experiment orchestration: load, split, train, predict, evaluate, and
//! write artifacts.
//!
//! A full run trains weights on the training/validation pair of
//! sub-streams, rescoring the observation stream once, predicts the
//! prediction window, evaluates against the ground-truth slice, and writes
//! the learned weights, the prediction, the optimizer trace, and the
//! report. Everything is deterministic for a fixed config and seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use serde::Serialize;

use crate::classes::{
    assign_classes, classed_allocate, classed_train, split_class_weights, ActivityClass,
};
use crate::config::{ReportFormat, ResolvedConfig};
use crate::error::{Error, Result};
use crate::eval::{categorize_pairs, prf, Confusion, EvaluationReport};
use crate::export;
use crate::learn::{split_periods, train, RestartTrace};
use crate::metrics::{correlation_matrix, score_all, score_all_raw, MetricId, ScoreTable};
use crate::predict::{allocate, extrapolate_total, prediction_index, ActivityPrediction, WeightVector};
use crate::stream::{LinkStream, NodePair};
use crate::sweep::{run_sweep, SweepRow, SweepSpec};

/// Dispersion of the final prediction quality across optimizer restarts.
/// Both aggregations are reported because averaging F-scores and averaging
/// confusion counts answer slightly different questions.
#[derive(Debug, Clone, Serialize)]
pub struct RealizationSummary {
    pub f_scores: Vec<f64>,
    pub mean_f: f64,
    pub std_f: f64,
    pub mean_confusion: Confusion,
    pub f_of_mean_confusion: f64,
}

/// Everything a run produces, also serialized to `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ResolvedConfig,
    /// Extrapolated link budget for the prediction window.
    pub budget: f64,
    /// Best validation objective reached during training.
    pub validation_objective: f64,
    /// Learned weights per label ("all", or "C1"/"C2"/"C3").
    pub weights: BTreeMap<String, BTreeMap<MetricId, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realizations: Option<RealizationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvaluationReport>,
}

/// A run's in-memory results plus the artifact files it wrote.
#[derive(Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub prediction: ActivityPrediction,
    pub files: Vec<PathBuf>,
}

/// Report produced by evaluating an external predictions file.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationDoc {
    pub config: ResolvedConfig,
    pub predictions_file: String,
    pub evaluation: EvaluationReport,
}

fn load_dataset(cfg: &ResolvedConfig) -> Result<LinkStream> {
    let universe = match &cfg.node_universe {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            Some(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(str::to_owned)
                    .collect::<Vec<_>>(),
            )
        }
        None => None,
    };
    let file = fs::File::open(&cfg.dataset)
        .map_err(|e| Error::io(cfg.dataset.display().to_string(), e))?;
    let stream = LinkStream::load(BufReader::new(file), universe.as_deref(), None)?;

    if let Some(gap) = stream.min_positive_gap() {
        for metric in &cfg.metrics {
            if let MetricId::RecentActivity { delta_s } = metric {
                if *delta_s < gap {
                    log::warn!(
                        "metric {metric}: window {delta_s}s is below the stream's minimum \
                         inter-event gap ({gap}s); its scores will be zero almost everywhere"
                    );
                }
            }
        }
    }
    Ok(stream)
}

/// Evaluation with the standard breakdowns: new/recurrent categories and
/// C1/C2/C3 activity classes, both determined on the observation stream
/// over the union of predicted and actual pairs.
fn build_report(
    l_obs: &LinkStream,
    predicted: &BTreeMap<NodePair, f64>,
    actual: &BTreeMap<NodePair, u64>,
    k: u32,
) -> Result<EvaluationReport> {
    let mut report = EvaluationReport::new(predicted, actual)?;
    let mut union: BTreeSet<NodePair> = predicted.keys().copied().collect();
    union.extend(actual.keys().copied());

    let categories = categorize_pairs(l_obs, &union);
    report.add_breakdown("new", predicted, actual, &categories.new)?;
    report.add_breakdown("recurrent", predicted, actual, &categories.recurrent)?;

    let partition = assign_classes(l_obs, &union, k)?;
    for class in ActivityClass::ALL {
        report.add_breakdown(class.to_string(), predicted, actual, &partition.members(class))?;
    }
    Ok(report)
}

struct Training {
    validation_objective: f64,
    /// Weight vectors per label for the best restart.
    best: BTreeMap<String, WeightVector>,
    /// Weight vectors per label for every restart.
    per_restart: BTreeMap<String, Vec<WeightVector>>,
    traces: Vec<RestartTrace>,
    trace_columns: Vec<String>,
    /// Class weights usable by the predictor, per restart (classed mode).
    restart_class_weights: Option<Vec<BTreeMap<ActivityClass, WeightVector>>>,
}

fn run_training(cfg: &ResolvedConfig, l1: &LinkStream, l2: &LinkStream) -> Result<Training> {
    if cfg.classes.enabled {
        let outcome = classed_train(&cfg.learner, l1, l2, cfg.classes.k, &cfg.metrics)?;

        let mut restart_maps = Vec::with_capacity(outcome.outcome.restarts.len());
        for (r, restart) in outcome.outcome.restarts.iter().enumerate() {
            let fallback_r = match &outcome.fallback {
                Some(fb) => Some(WeightVector::from_alphas(
                    &cfg.metrics,
                    &fb.outcome.restarts[r].final_alphas,
                )?),
                None => None,
            };
            restart_maps.push(split_class_weights(
                &cfg.metrics,
                &outcome.trained_classes,
                &restart.final_alphas,
                fallback_r.as_ref(),
            )?);
        }

        let mut best = BTreeMap::new();
        for (class, w) in &outcome.weights {
            best.insert(class.to_string(), w.clone());
        }
        let mut per_restart: BTreeMap<String, Vec<WeightVector>> = BTreeMap::new();
        for map in &restart_maps {
            for (class, w) in map {
                per_restart.entry(class.to_string()).or_default().push(w.clone());
            }
        }

        Ok(Training {
            validation_objective: outcome.value,
            best,
            per_restart,
            trace_columns: export::classed_trace_columns(&outcome.trained_classes, &cfg.metrics),
            traces: outcome.outcome.restarts.clone(),
            restart_class_weights: Some(restart_maps),
        })
    } else {
        let trained = train(&cfg.learner, l1, l2, &cfg.metrics)?;
        let per_restart: Vec<WeightVector> = trained
            .outcome
            .restarts
            .iter()
            .map(|r| WeightVector::from_alphas(&cfg.metrics, &r.final_alphas))
            .collect::<Result<_>>()?;
        Ok(Training {
            validation_objective: trained.value,
            best: [("all".to_owned(), trained.weights.clone())].into_iter().collect(),
            per_restart: [("all".to_owned(), per_restart)].into_iter().collect(),
            trace_columns: cfg.metrics.iter().map(|m| m.to_string()).collect(),
            traces: trained.outcome.restarts.clone(),
            restart_class_weights: None,
        })
    }
}

/// Full experiment: load, split, train on (L1 -> L2), score L2, predict the
/// prediction window, evaluate against its ground truth, and write
/// artifacts. With `predict_only` the evaluation (and its ground-truth
/// requirement) is skipped.
pub fn run_experiment(cfg: &ResolvedConfig, predict_only: bool) -> Result<RunOutput> {
    let stream = load_dataset(cfg)?;
    let (l1, l2) = split_periods(&stream, &cfg.schedule);
    let actual = stream.slice(cfg.schedule.prediction).pair_counts();
    if !predict_only && actual.is_empty() {
        return Err(Error::MissingGroundTruth);
    }

    let training = run_training(cfg, &l1, &l2)?;

    // One scoring pass per metric on the observation stream; reused for the
    // best-restart prediction and for every realization.
    let candidates = l2.candidate_pairs();
    let tables = score_all(&l2, &cfg.metrics, &candidates)?;
    let budget = extrapolate_total(&l2, cfg.schedule.prediction)?;
    let partition = cfg
        .classes
        .enabled
        .then(|| assign_classes(&l2, &candidates, cfg.classes.k))
        .transpose()?;

    let predict = |label_weights: &BTreeMap<String, WeightVector>,
                   class_weights: Option<&BTreeMap<ActivityClass, WeightVector>>|
     -> Result<ActivityPrediction> {
        match (&partition, class_weights) {
            (Some(partition), Some(cw)) => classed_allocate(cw, partition, &tables, budget),
            _ => {
                let weights = label_weights
                    .get("all")
                    .ok_or_else(|| Error::Config("missing overall weights".into()))?;
                let index = prediction_index(weights, &tables)?;
                allocate(budget, &index)
            }
        }
    };

    let best_class_weights = training.restart_class_weights.as_ref().map(|maps| {
        // The best restart's map was already folded into `training.best`;
        // rebuild it keyed by class for the predictor.
        let mut out = BTreeMap::new();
        for (label, w) in &training.best {
            let class = match label.as_str() {
                "C1" => ActivityClass::C1,
                "C2" => ActivityClass::C2,
                "C3" => ActivityClass::C3,
                _ => unreachable!("classed training labels are class names"),
            };
            out.insert(class, w.clone());
        }
        let _ = maps;
        out
    });
    let prediction = predict(&training.best, best_class_weights.as_ref())?;

    let evaluation = if predict_only {
        None
    } else {
        Some(build_report(&l2, prediction.counts(), &actual, cfg.classes.k)?)
    };

    let realizations = if predict_only {
        None
    } else {
        let restarts = cfg.learner.restarts;
        let mut f_scores = Vec::with_capacity(restarts);
        let mut confusion_sum = Confusion::ZERO;
        for r in 0..restarts {
            let pred_r = match &training.restart_class_weights {
                Some(maps) => predict(&training.best, Some(&maps[r])),
                None => {
                    let w = &training.per_restart["all"][r];
                    let single: BTreeMap<String, WeightVector> =
                        [("all".to_owned(), w.clone())].into_iter().collect();
                    predict(&single, None)
                }
            };
            match pred_r {
                Ok(p) => {
                    let c = crate::eval::confusion(p.counts(), &actual)?;
                    confusion_sum.add(&c);
                    f_scores.push(prf(&c).2);
                }
                Err(Error::DegenerateIndex) => {
                    // An all-zero restart predicts nothing: everything actual
                    // is missed.
                    let c = Confusion {
                        tp: 0.0,
                        fp: 0.0,
                        fn_: actual.values().map(|&a| a as f64).sum(),
                    };
                    confusion_sum.add(&c);
                    f_scores.push(0.0);
                }
                Err(e) => return Err(e),
            }
        }
        let (mean_f, std_f) = export::mean_std(&f_scores);
        let n = restarts as f64;
        let mean_confusion = Confusion {
            tp: confusion_sum.tp / n,
            fp: confusion_sum.fp / n,
            fn_: confusion_sum.fn_ / n,
        };
        Some(RealizationSummary {
            f_scores,
            mean_f,
            std_f,
            mean_confusion,
            f_of_mean_confusion: prf(&mean_confusion).2,
        })
    };

    let report = RunReport {
        config: cfg.clone(),
        budget,
        validation_objective: training.validation_objective,
        weights: training
            .best
            .iter()
            .map(|(label, w)| (label.clone(), w.iter().collect()))
            .collect(),
        realizations,
        evaluation,
    };

    // Artifacts.
    let mut files = Vec::new();
    let out = &cfg.output_dir;

    let predictions_path = out.join("predictions.csv");
    export::write_atomic(
        &predictions_path,
        &export::predictions_csv(&stream, &prediction, &training.best),
    )?;
    files.push(predictions_path);

    let weights_path = out.join("weights.csv");
    export::write_atomic(
        &weights_path,
        &export::weights_csv(&cfg.metrics, &training.best, &training.per_restart),
    )?;
    files.push(weights_path);

    let trace_path = out.join("trace.csv");
    export::write_atomic(
        &trace_path,
        &export::trace_csv(&training.trace_columns, &training.traces),
    )?;
    files.push(trace_path);

    if cfg.report_formats.contains(&ReportFormat::Json) {
        let path = out.join("report.json");
        let body = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
        export::write_atomic(&path, &(body + "\n"))?;
        files.push(path);
    }
    if cfg.report_formats.contains(&ReportFormat::Csv) {
        if let Some(evaluation) = &report.evaluation {
            let path = out.join("report.csv");
            export::write_atomic(&path, &export::report_csv(evaluation))?;
            files.push(path);
        }
    }

    Ok(RunOutput {
        report,
        prediction,
        files,
    })
}

/// Writes raw and normalized score tables for the observation stream.
pub fn score_command(cfg: &ResolvedConfig) -> Result<PathBuf> {
    let stream = load_dataset(cfg)?;
    let l2 = stream.slice(cfg.schedule.observation);
    let candidates = l2.candidate_pairs();
    let raw = score_all_raw(&l2, &cfg.metrics, &candidates)?;
    let normalized: Vec<ScoreTable> = raw.iter().cloned().map(ScoreTable::normalize).collect();
    let path = cfg.output_dir.join("scores.csv");
    export::write_atomic(&path, &export::score_tables_csv(&l2, &raw, &normalized))?;
    Ok(path)
}

/// Runs the two-metric mixing analysis on the training/validation pair of
/// sub-streams and writes the grid.
pub fn sweep_command(
    cfg: &ResolvedConfig,
    metric_a: MetricId,
    metric_b: MetricId,
    alphas: Vec<f64>,
) -> Result<(PathBuf, Vec<SweepRow>)> {
    let stream = load_dataset(cfg)?;
    let (l1, l2) = split_periods(&stream, &cfg.schedule);
    let spec = SweepSpec::new(metric_a, metric_b, alphas)?;
    let budget = extrapolate_total(&l1, cfg.schedule.observation)?;
    let rows = run_sweep(&spec, &l1, &l2, budget)?;
    let path = cfg.output_dir.join("sweep.csv");
    export::write_atomic(&path, &export::sweep_csv(&rows))?;
    Ok((path, rows))
}

/// Writes the metric correlation matrix over the training stream.
pub fn correlate_command(cfg: &ResolvedConfig) -> Result<PathBuf> {
    let stream = load_dataset(cfg)?;
    let l1 = stream.slice(cfg.schedule.training);
    let candidates = l1.candidate_pairs();
    let tables = score_all(&l1, &cfg.metrics, &candidates)?;
    let matrix = correlation_matrix(&tables)?;
    let path = cfg.output_dir.join("correlation.csv");
    export::write_atomic(&path, &export::correlation_csv(&matrix))?;
    Ok(path)
}

/// Writes the link-count time series of the whole input stream.
pub fn histogram_command(cfg: &ResolvedConfig, granularity: f64) -> Result<PathBuf> {
    let stream = load_dataset(cfg)?;
    let bins = stream.activity_histogram(granularity)?;
    let path = cfg.output_dir.join("histogram.csv");
    export::write_atomic(&path, &export::histogram_csv(&bins))?;
    Ok(path)
}

/// Scores an externally produced predictions file against the config's
/// prediction window, with the same breakdowns as a full run.
pub fn evaluate_command(cfg: &ResolvedConfig, predictions_path: &std::path::Path) -> Result<EvaluationDoc> {
    let stream = load_dataset(cfg)?;
    let l2 = stream.slice(cfg.schedule.observation);
    let actual = stream.slice(cfg.schedule.prediction).pair_counts();
    if actual.is_empty() {
        return Err(Error::MissingGroundTruth);
    }
    let text = fs::read_to_string(predictions_path)
        .map_err(|e| Error::io(predictions_path.display().to_string(), e))?;
    let prediction = export::read_predictions(&stream, &text)?;
    let evaluation = build_report(&l2, prediction.counts(), &actual, cfg.classes.k)?;
    Ok(EvaluationDoc {
        config: cfg.clone(),
        predictions_file: predictions_path.display().to_string(),
        evaluation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::load_config;
    use std::io::Write;
    use std::path::Path;

    /// Strictly periodic fixture: the same triangle pattern every 10 s over
    /// [0, 30]; training [0,10], observation [10,20], prediction [20,30].
    fn write_periodic_fixture(dir: &Path) -> PathBuf {
        let mut body = String::new();
        for period in 0..3 {
            let base = 10.0 * period as f64;
            for t in [1.0, 3.0, 5.0, 7.0] {
                body.push_str(&format!("{} a b\n", base + t));
            }
            body.push_str(&format!("{} a c\n", base + 2.0));
            body.push_str(&format!("{} b c\n", base + 6.0));
        }
        let data = dir.join("periodic.txt");
        fs::write(&data, body).unwrap();

        let config = dir.join("exp.toml");
        let mut f = fs::File::create(&config).unwrap();
        writeln!(
            f,
            r#"
dataset = "periodic.txt"
output_dir = "out"
metrics = ["PAE", "CN"]

[schedule]
training_start = 0.0
training_end = 10.0
observation_end = 20.0
prediction_end = 30.0

[learner]
restarts = 3
max_iterations = 60
seed = 7
"#
        )
        .unwrap();
        config
    }

    #[test]
    fn periodic_run_reaches_perfect_f() {
        let dir = tempfile::tempdir().unwrap();
        let config = write_periodic_fixture(dir.path());
        let cfg = load_config(&config).unwrap();
        let out = run_experiment(&cfg, false).unwrap();
        let eval = out.report.evaluation.as_ref().unwrap();
        assert!(
            eval.f_score > 0.99,
            "periodic stream should be almost perfectly predictable, got {}",
            eval.f_score
        );
        assert!(out.files.iter().any(|p| p.ends_with("report.json")));
        assert!(out.files.iter().any(|p| p.ends_with("predictions.csv")));
        let realizations = out.report.realizations.as_ref().unwrap();
        assert_eq!(realizations.f_scores.len(), 3);
    }

    #[test]
    fn predict_only_skips_evaluation_and_ground_truth() {
        let dir = tempfile::tempdir().unwrap();
        let config = write_periodic_fixture(dir.path());
        // Move the prediction window beyond the data.
        let body = fs::read_to_string(&config)
            .unwrap()
            .replace("prediction_end = 30.0", "prediction_start = 40.0\nprediction_end = 50.0");
        fs::write(&config, body).unwrap();
        let cfg = load_config(&config).unwrap();

        assert!(matches!(
            run_experiment(&cfg, false).unwrap_err(),
            Error::MissingGroundTruth
        ));
        let out = run_experiment(&cfg, true).unwrap();
        assert!(out.report.evaluation.is_none());
        assert!(out.report.realizations.is_none());
    }

    #[test]
    fn evaluate_reproduces_run_report_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let config = write_periodic_fixture(dir.path());
        let cfg = load_config(&config).unwrap();
        let out = run_experiment(&cfg, false).unwrap();
        let predictions = cfg.output_dir.join("predictions.csv");
        let doc = evaluate_command(&cfg, &predictions).unwrap();
        let run_eval = serde_json::to_string(out.report.evaluation.as_ref().unwrap()).unwrap();
        let ext_eval = serde_json::to_string(&doc.evaluation).unwrap();
        assert_eq!(run_eval, ext_eval);
    }

    #[test]
    fn runs_are_deterministic_for_a_fixed_seed() {
        let dir = tempfile::tempdir().unwrap();
        let config = write_periodic_fixture(dir.path());
        let cfg = load_config(&config).unwrap();

        run_experiment(&cfg, false).unwrap();
        let first: Vec<(PathBuf, String)> = ["predictions.csv", "weights.csv", "trace.csv", "report.json"]
            .iter()
            .map(|n| {
                let p = cfg.output_dir.join(n);
                let c = fs::read_to_string(&p).unwrap();
                (p, c)
            })
            .collect();
        run_experiment(&cfg, false).unwrap();
        for (path, content) in first {
            assert_eq!(
                fs::read_to_string(&path).unwrap(),
                content,
                "{} must be byte-identical across reruns",
                path.display()
            );
        }
    }

    #[test]
    fn classed_run_produces_per_class_weights_and_breakdowns() {
        let dir = tempfile::tempdir().unwrap();
        let config = write_periodic_fixture(dir.path());
        let body = fs::read_to_string(&config).unwrap()
            + "\n[classes]\nenabled = true\nk = 2\n";
        let body = body.replace("metrics = [\"PAE\", \"CN\"]", "metrics = [\"PAE\", \"CN\", \"WCN\"]");
        fs::write(&config, body).unwrap();
        let cfg = load_config(&config).unwrap();
        let out = run_experiment(&cfg, false).unwrap();
        assert!(out.report.weights.contains_key("C2"));
        assert!(out.report.weights.contains_key("C3"));
        let eval = out.report.evaluation.as_ref().unwrap();
        for label in ["new", "recurrent", "C1", "C2", "C3"] {
            assert!(eval.breakdowns.contains_key(label), "missing breakdown {label}");
        }
        // Budget conservation across the classed allocation.
        assert!((out.prediction.count_sum() - out.report.budget).abs() <= 1e-6 * out.report.budget);
    }

    #[test]
    fn subcommands_write_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config = write_periodic_fixture(dir.path());
        let cfg = load_config(&config).unwrap();

        let scores = score_command(&cfg).unwrap();
        let text = fs::read_to_string(scores).unwrap();
        assert!(text.starts_with("metric,u,v,raw,normalized"));
        assert!(text.contains("PAE,a,b,"));

        let (path, rows) = sweep_command(
            &cfg,
            MetricId::PairActivity,
            MetricId::CommonNeighbors,
            vec![0.0, 0.5, 1.0],
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        assert!(fs::read_to_string(path)
            .unwrap()
            .starts_with("alpha,f_all,f_new,f_recurrent,degenerate"));

        let corr = correlate_command(&cfg).unwrap();
        let text = fs::read_to_string(corr).unwrap();
        assert!(text.starts_with("metric,PAE,CN"));

        // The loaded stream's natural interval starts at the first link
        // (t = 1), so bins are anchored there.
        let hist = histogram_command(&cfg, 10.0).unwrap();
        let text = fs::read_to_string(hist).unwrap();
        assert_eq!(text, "bin_start,count\n1,6\n11,6\n21,6\n");
    }
}
