//! Experiment configuration: a TOML file with absolute-timestamp period
//! schedules, metric and learner settings, and output options.
//!
//! Paths inside the file are resolved relative to the file itself. Two
//! environment variables override resolved values: `LINKSTREAM_OUTPUT_DIR`
//! and `LINKSTREAM_SEED`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{LearnerConfig, ObjectiveKind, PeriodSchedule};
use crate::metrics::MetricId;
use crate::stream::Interval;

pub const ENV_OUTPUT_DIR: &str = "LINKSTREAM_OUTPUT_DIR";
pub const ENV_SEED: &str = "LINKSTREAM_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassesConfig {
    /// Train and predict with one weight vector per activity class.
    pub enabled: bool,
    /// Activity threshold between C2 and C3.
    pub k: u32,
}

impl Default for ClassesConfig {
    fn default() -> Self {
        ClassesConfig { enabled: false, k: 5 }
    }
}

/// Fully validated configuration with resolved paths, ready to run. The
/// whole struct is embedded in reports so a run can be reproduced from its
/// own output.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub dataset: PathBuf,
    pub node_universe: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub report_formats: Vec<ReportFormat>,
    pub schedule: PeriodSchedule,
    pub metrics: Vec<MetricId>,
    pub learner: LearnerConfig,
    pub classes: ClassesConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: String,
    node_universe: Option<String>,
    output_dir: Option<String>,
    report_formats: Option<Vec<ReportFormat>>,
    schedule: RawSchedule,
    metrics: Option<Vec<String>>,
    #[serde(default)]
    learner: RawLearner,
    #[serde(default)]
    classes: ClassesConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    training_start: f64,
    training_end: f64,
    /// Defaults to `training_end` (contiguous periods).
    observation_start: Option<f64>,
    observation_end: f64,
    /// Defaults to `observation_end`.
    prediction_start: Option<f64>,
    prediction_end: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawLearner {
    restarts: Option<usize>,
    max_iterations: Option<usize>,
    initial_step: Option<f64>,
    step_shrink: Option<f64>,
    min_step: Option<f64>,
    fd_epsilon: Option<f64>,
    seed: Option<u64>,
    objective: Option<ObjectiveKind>,
}

/// Loads, validates, and resolves a configuration file.
pub fn load_config(path: &Path) -> Result<ResolvedConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let raw: RawConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    resolve(raw, path)
}

fn resolve(raw: RawConfig, config_path: &Path) -> Result<ResolvedConfig> {
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));
    let against_base = |p: &str| -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };

    let schedule = {
        let s = &raw.schedule;
        let training = Interval::new(s.training_start, s.training_end)?;
        let observation = Interval::new(
            s.observation_start.unwrap_or(s.training_end),
            s.observation_end,
        )?;
        let prediction = Interval::new(
            s.prediction_start.unwrap_or(s.observation_end),
            s.prediction_end,
        )?;
        PeriodSchedule::new(training, observation, prediction)?
    };

    let classes = raw.classes;
    if classes.enabled && classes.k < 1 {
        return Err(Error::Config("classes.k must be >= 1".into()));
    }

    let metrics = match &raw.metrics {
        Some(names) => {
            let mut ids = Vec::with_capacity(names.len());
            let mut seen = BTreeSet::new();
            for name in names {
                let id: MetricId = name.parse()?;
                if !seen.insert(id) {
                    return Err(Error::Config(format!("duplicate metric {id} in config")));
                }
                ids.push(id);
            }
            if ids.is_empty() {
                return Err(Error::Config("metrics list must not be empty".into()));
            }
            ids
        }
        None if classes.enabled => MetricId::reduced_set(),
        None => MetricId::default_set(),
    };

    let defaults = LearnerConfig::default();
    let objective = match raw.learner.objective {
        Some(o) => {
            match (o, classes.enabled) {
                (ObjectiveKind::MacroF, false) => {
                    return Err(Error::Config(
                        "objective macro_f requires classes.enabled = true".into(),
                    ))
                }
                (ObjectiveKind::OverallF, true) => {
                    return Err(Error::Config(
                        "per-class training optimizes macro_f; set objective = \"macro_f\" or drop it"
                            .into(),
                    ))
                }
                _ => {}
            }
            o
        }
        None if classes.enabled => ObjectiveKind::MacroF,
        None => ObjectiveKind::OverallF,
    };
    let mut learner = LearnerConfig {
        restarts: raw.learner.restarts.unwrap_or(defaults.restarts),
        max_iterations: raw.learner.max_iterations.unwrap_or(defaults.max_iterations),
        initial_step: raw.learner.initial_step.unwrap_or(defaults.initial_step),
        step_shrink: raw.learner.step_shrink.unwrap_or(defaults.step_shrink),
        min_step: raw.learner.min_step.unwrap_or(defaults.min_step),
        fd_epsilon: raw.learner.fd_epsilon.unwrap_or(defaults.fd_epsilon),
        seed: raw.learner.seed.unwrap_or(defaults.seed),
        objective,
    };
    if let Ok(seed) = std::env::var(ENV_SEED) {
        learner.seed = seed
            .parse()
            .map_err(|_| Error::Config(format!("{ENV_SEED} must be an integer, got {seed:?}")))?;
    }
    learner.validate()?;

    let mut output_dir = against_base(raw.output_dir.as_deref().unwrap_or("output"));
    if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
        output_dir = PathBuf::from(dir);
    }

    let report_formats = raw
        .report_formats
        .unwrap_or_else(|| vec![ReportFormat::Json, ReportFormat::Csv]);
    if report_formats.is_empty() {
        return Err(Error::Config("report_formats must not be empty".into()));
    }

    Ok(ResolvedConfig {
        dataset: against_base(&raw.dataset),
        node_universe: raw.node_universe.as_deref().map(against_base),
        output_dir,
        report_formats,
        schedule,
        metrics,
        learner,
        classes,
    })
}
