//! File emission and ingestion for experiment artifacts.
//!
//! All writers are deterministic (canonical pair order, shortest
//! round-tripping float formatting) and atomic (write to a temporary file,
//! then rename), so reruns with identical inputs produce byte-identical
//! files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::classes::ActivityClass;
use crate::error::{Error, Result};
use crate::eval::EvaluationReport;
use crate::learn::RestartTrace;
use crate::metrics::{CorrelationMatrix, MetricId, ScoreTable};
use crate::predict::{ActivityPrediction, WeightVector};
use crate::stream::{LinkStream, NodePair};

/// Writes `content` to `path` via a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// `metric,u,v,raw,normalized` for each metric and pair. `raw` and
/// `normalized` must hold the same metrics in the same order.
pub fn score_tables_csv(
    stream: &LinkStream,
    raw: &[ScoreTable],
    normalized: &[ScoreTable],
) -> String {
    let mut out = String::from("metric,u,v,raw,normalized\n");
    for (r, n) in raw.iter().zip(normalized) {
        for (&pair, &value) in r.scores() {
            let (u, v) = stream.pair_names(pair);
            let _ = writeln!(out, "{},{u},{v},{value},{}", r.metric(), n.get(pair));
        }
    }
    out
}

/// Correlation matrix with a metric-id header row and column; undefined
/// entries (constant score vectors) are written as `NA`.
pub fn correlation_csv(matrix: &CorrelationMatrix) -> String {
    let mut out = String::from("metric");
    for m in &matrix.metrics {
        let _ = write!(out, ",{m}");
    }
    out.push('\n');
    for (i, m) in matrix.metrics.iter().enumerate() {
        let _ = write!(out, "{m}");
        for entry in &matrix.entries[i] {
            match entry {
                Some(r) => {
                    let _ = write!(out, ",{r}");
                }
                None => out.push_str(",NA"),
            }
        }
        out.push('\n');
    }
    out
}

/// `u,v,predicted_count` rows preceded by comment lines recording the
/// budget and the weight vectors the prediction came from.
pub fn predictions_csv(
    stream: &LinkStream,
    prediction: &ActivityPrediction,
    weights: &BTreeMap<String, WeightVector>,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# N={}", prediction.total());
    for (label, w) in weights {
        let _ = write!(out, "# weights {label}");
        for (metric, alpha) in w.iter() {
            let _ = write!(out, " {metric}={alpha}");
        }
        out.push('\n');
    }
    out.push_str("u,v,predicted_count\n");
    for (&pair, &count) in prediction.counts() {
        let (u, v) = stream.pair_names(pair);
        let _ = writeln!(out, "{u},{v},{count}");
    }
    out
}

/// Parses a predictions file written by [`predictions_csv`] (or any
/// `u,v,count` file with `#` comments). Node names must exist in `stream`.
pub fn read_predictions(stream: &LinkStream, text: &str) -> Result<ActivityPrediction> {
    let mut counts: BTreeMap<NodePair, f64> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed == "u,v,predicted_count" {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected `u,v,predicted_count`, got {trimmed:?}"),
            });
        }
        let pair = stream.pair(fields[0], fields[1]).ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("unknown node pair ({}, {})", fields[0], fields[1]),
        })?;
        let count: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("unparseable count {:?}", fields[2]),
        })?;
        if counts.insert(pair, count).is_some() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("duplicate pair ({}, {})", fields[0], fields[1]),
            });
        }
    }
    ActivityPrediction::from_counts(counts)
}

/// `class,metric,alpha,alpha_mean,alpha_std`: the best-restart weights plus
/// their mean and population standard deviation across restarts.
pub fn weights_csv(
    metrics: &[MetricId],
    best: &BTreeMap<String, WeightVector>,
    per_restart: &BTreeMap<String, Vec<WeightVector>>,
) -> String {
    let mut out = String::from("class,metric,alpha,alpha_mean,alpha_std\n");
    for (label, weights) in best {
        let restarts = per_restart.get(label);
        for &metric in metrics {
            let alpha = weights.alpha(metric).unwrap_or(0.0);
            let (mean, std) = match restarts {
                Some(rs) if !rs.is_empty() => {
                    let values: Vec<f64> =
                        rs.iter().map(|w| w.alpha(metric).unwrap_or(0.0)).collect();
                    mean_std(&values)
                }
                _ => (alpha, 0.0),
            };
            let _ = writeln!(out, "{label},{metric},{alpha},{mean},{std}");
        }
    }
    out
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `restart,iteration,objective,step,alpha_<name>...` for every accepted
/// iterate of every restart. `columns` names the parameter coordinates.
pub fn trace_csv(columns: &[String], restarts: &[RestartTrace]) -> String {
    let mut out = String::from("restart,iteration,objective,step");
    for c in columns {
        let _ = write!(out, ",alpha_{c}");
    }
    out.push('\n');
    for r in restarts {
        for p in &r.points {
            let _ = write!(out, "{},{},{},{}", r.restart, p.iteration, p.objective, p.step);
            for a in &p.alphas {
                let _ = write!(out, ",{a}");
            }
            out.push('\n');
        }
    }
    out
}

/// `bin_start,count` rows.
pub fn histogram_csv(bins: &[(f64, u64)]) -> String {
    let mut out = String::from("bin_start,count\n");
    for &(start, count) in bins {
        let _ = writeln!(out, "{start},{count}");
    }
    out
}

/// `alpha,f_all,f_new,f_recurrent,degenerate` rows; category columns are
/// empty when the sweep ran without categories.
pub fn sweep_csv(rows: &[crate::sweep::SweepRow]) -> String {
    let mut out = String::from("alpha,f_all,f_new,f_recurrent,degenerate\n");
    for row in rows {
        let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.alpha,
            row.f_all,
            fmt_opt(row.f_new),
            fmt_opt(row.f_recurrent),
            row.degenerate
        );
    }
    out
}

/// Flat summary rows: the overall report plus one row per breakdown label.
pub fn report_csv(report: &EvaluationReport) -> String {
    let mut out =
        String::from("label,tp,fp,fn,precision,recall,f_score,predicted_total,actual_total\n");
    let mut write_row = |label: &str, r: &EvaluationReport| {
        let _ = writeln!(
            out,
            "{label},{},{},{},{},{},{},{},{}",
            r.confusion.tp,
            r.confusion.fp,
            r.confusion.fn_,
            r.precision,
            r.recall,
            r.f_score,
            r.predicted_total,
            r.actual_total
        );
    };
    write_row("overall", report);
    for (label, sub) in &report.breakdowns {
        write_row(label, sub);
    }
    out
}

/// Column labels for a concatenated per-class parameter vector.
pub fn classed_trace_columns(classes: &[ActivityClass], metrics: &[MetricId]) -> Vec<String> {
    classes
        .iter()
        .flat_map(|c| metrics.iter().map(move |m| format!("{c}_{m}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::allocate;
    use crate::stream::Interval;

    fn stream() -> LinkStream {
        LinkStream::from_triples(
            Interval::new(0.0, 10.0).unwrap(),
            &[(1.0, "a", "b"), (2.0, "a", "c")],
        )
        .unwrap()
    }

    #[test]
    fn predictions_round_trip_bit_exactly() {
        let s = stream();
        let index: BTreeMap<NodePair, f64> = [
            (s.pair("a", "b").unwrap(), 1.0),
            (s.pair("a", "c").unwrap(), 3.0),
            (s.pair("b", "c").unwrap(), 0.0),
        ]
        .into_iter()
        .collect();
        let pred = allocate(7.3, &index).unwrap();
        let weights: BTreeMap<String, WeightVector> = [(
            "all".to_owned(),
            WeightVector::single(MetricId::PairActivity),
        )]
        .into_iter()
        .collect();
        let text = predictions_csv(&s, &pred, &weights);
        let parsed = read_predictions(&s, &text).unwrap();
        assert_eq!(parsed.counts().len(), pred.counts().len());
        for (p, v) in pred.counts() {
            assert_eq!(parsed.get(*p), *v, "f64 display must round-trip");
        }
    }

    #[test]
    fn read_predictions_rejects_bad_rows() {
        let s = stream();
        assert!(matches!(
            read_predictions(&s, "a,b\n").unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
        assert!(matches!(
            read_predictions(&s, "a,q,1.0\n").unwrap_err(),
            Error::Parse { .. }
        ));
        assert!(matches!(
            read_predictions(&s, "a,b,x\n").unwrap_err(),
            Error::Parse { .. }
        ));
        assert!(matches!(
            read_predictions(&s, "a,b,1\na,b,2\n").unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        assert!(read_predictions(&s, "a,b,-1\n").is_err());
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_atomic(&path, "one\n").unwrap();
        write_atomic(&path, "two\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two\n");
        assert!(!path.with_extension("tmp").exists());
    }

    #[test]
    fn mean_std_population() {
        let (mean, std) = mean_std(&[1.0, 3.0]);
        assert_eq!(mean, 2.0);
        assert_eq!(std, 1.0);
    }
}
