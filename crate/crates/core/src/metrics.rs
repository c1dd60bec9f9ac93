//! Per-pair similarity scores over a link stream.
//!
//! Three families are implemented:
//!
//! * structural — computed from neighborhoods only (CN, JI, SI, AA, RA);
//! * hybrid — structural shapes reweighted by pair activities
//!   (WCN, WSI, WAA, WRA);
//! * temporal — derived from the pair's own link timings
//!   (PAE, PAE&delta;S, PAEkL).
//!
//! All logarithms are natural. Scores are non-negative and finite;
//! degenerate denominators contribute zero rather than infinities.
//! Each table is normalized by its maximum over the scored pair set so that
//! weights on different metrics are comparable.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::stream::{LinkStream, Node, NodePair};

/// Metric identifier, carrying the window length &delta; (seconds) or the
/// link depth `k` for the parameterized temporal metrics.
#[derive(Debug, Clone, Copy)]
pub enum MetricId {
    /// CN: number of common neighbors.
    CommonNeighbors,
    /// JI: common neighbors over the neighborhood union.
    Jaccard,
    /// SI: common neighbors over the summed neighborhood sizes.
    Sorensen,
    /// AA: common neighbors downweighted by log-degree.
    AdamicAdar,
    /// RA: common neighbors downweighted by degree.
    ResourceAllocation,
    /// WCN: common neighbors weighted by activity toward both endpoints.
    WeightedCommonNeighbors,
    /// WSI: Sorensen shape over activities instead of degrees.
    WeightedSorensen,
    /// WAA: Adamic-Adar shape over log-activities.
    WeightedAdamicAdar,
    /// WRA: resource-allocation shape over activities.
    WeightedResourceAllocation,
    /// PAE: total pair activity over the stream.
    PairActivity,
    /// PAE{d}S: pair activity during the last `delta_s` seconds.
    RecentActivity { delta_s: f64 },
    /// PAE{k}L: activity rate over the pair's `k` most recent links.
    RecentRate { k: u32 },
}

/// Broad grouping of metrics, used when inspecting learned weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricFamily {
    Structural,
    Hybrid,
    Temporal,
}

impl MetricId {
    /// Validates parameter invariants (`delta > 0`, `k >= 1`).
    pub fn validate(&self) -> Result<()> {
        match *self {
            MetricId::RecentActivity { delta_s } if !delta_s.is_finite() || delta_s <= 0.0 => {
                Err(Error::Config(format!(
                    "recent-activity window must be positive and finite, got {delta_s}"
                )))
            }
            MetricId::RecentRate { k } if k < 1 => {
                Err(Error::Config("recent-rate depth k must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn family(&self) -> MetricFamily {
        match self {
            MetricId::CommonNeighbors
            | MetricId::Jaccard
            | MetricId::Sorensen
            | MetricId::AdamicAdar
            | MetricId::ResourceAllocation => MetricFamily::Structural,
            MetricId::WeightedCommonNeighbors
            | MetricId::WeightedSorensen
            | MetricId::WeightedAdamicAdar
            | MetricId::WeightedResourceAllocation => MetricFamily::Hybrid,
            MetricId::PairActivity | MetricId::RecentActivity { .. } | MetricId::RecentRate { .. } => {
                MetricFamily::Temporal
            }
        }
    }

    /// The full default metric set: five structural, four hybrid, and the
    /// temporal family at the default parameter grid
    /// (&delta; in {100, 1000, 10000} s, k = 10).
    pub fn default_set() -> Vec<MetricId> {
        vec![
            MetricId::CommonNeighbors,
            MetricId::Jaccard,
            MetricId::Sorensen,
            MetricId::AdamicAdar,
            MetricId::ResourceAllocation,
            MetricId::WeightedCommonNeighbors,
            MetricId::WeightedSorensen,
            MetricId::WeightedAdamicAdar,
            MetricId::WeightedResourceAllocation,
            MetricId::PairActivity,
            MetricId::RecentRate { k: 10 },
            MetricId::RecentActivity { delta_s: 100.0 },
            MetricId::RecentActivity { delta_s: 1000.0 },
            MetricId::RecentActivity { delta_s: 10000.0 },
        ]
    }

    /// Reduced set used by default for per-class experiments, keeping one
    /// metric per highly correlated group.
    pub fn reduced_set() -> Vec<MetricId> {
        vec![
            MetricId::CommonNeighbors,
            MetricId::Sorensen,
            MetricId::WeightedCommonNeighbors,
            MetricId::PairActivity,
            MetricId::RecentRate { k: 10 },
            MetricId::RecentActivity { delta_s: 1000.0 },
            MetricId::RecentActivity { delta_s: 10000.0 },
        ]
    }

    fn key(&self) -> (u8, u64) {
        match *self {
            MetricId::CommonNeighbors => (0, 0),
            MetricId::Jaccard => (1, 0),
            MetricId::Sorensen => (2, 0),
            MetricId::AdamicAdar => (3, 0),
            MetricId::ResourceAllocation => (4, 0),
            MetricId::WeightedCommonNeighbors => (5, 0),
            MetricId::WeightedSorensen => (6, 0),
            MetricId::WeightedAdamicAdar => (7, 0),
            MetricId::WeightedResourceAllocation => (8, 0),
            MetricId::PairActivity => (9, 0),
            MetricId::RecentActivity { delta_s } => (10, delta_s.to_bits()),
            MetricId::RecentRate { k } => (11, k as u64),
        }
    }
}

impl PartialEq for MetricId {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for MetricId {}

impl PartialOrd for MetricId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MetricId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl std::hash::Hash for MetricId {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MetricId::CommonNeighbors => write!(f, "CN"),
            MetricId::Jaccard => write!(f, "JI"),
            MetricId::Sorensen => write!(f, "SI"),
            MetricId::AdamicAdar => write!(f, "AA"),
            MetricId::ResourceAllocation => write!(f, "RA"),
            MetricId::WeightedCommonNeighbors => write!(f, "WCN"),
            MetricId::WeightedSorensen => write!(f, "WSI"),
            MetricId::WeightedAdamicAdar => write!(f, "WAA"),
            MetricId::WeightedResourceAllocation => write!(f, "WRA"),
            MetricId::PairActivity => write!(f, "PAE"),
            MetricId::RecentActivity { delta_s } => {
                if delta_s.fract() == 0.0 && delta_s <= u64::MAX as f64 {
                    write!(f, "PAE{}S", delta_s as u64)
                } else {
                    write!(f, "PAE{delta_s}S")
                }
            }
            MetricId::RecentRate { k } => write!(f, "PAE{k}L"),
        }
    }
}

impl std::str::FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let id = match s {
            "CN" => MetricId::CommonNeighbors,
            "JI" => MetricId::Jaccard,
            "SI" => MetricId::Sorensen,
            "AA" => MetricId::AdamicAdar,
            "RA" => MetricId::ResourceAllocation,
            "WCN" => MetricId::WeightedCommonNeighbors,
            "WSI" => MetricId::WeightedSorensen,
            "WAA" => MetricId::WeightedAdamicAdar,
            "WRA" => MetricId::WeightedResourceAllocation,
            "PAE" => MetricId::PairActivity,
            _ => {
                let err = || Error::Config(format!("unknown metric {s:?}"));
                let rest = s.strip_prefix("PAE").ok_or_else(err)?;
                if let Some(num) = rest.strip_suffix('S') {
                    let delta_s: f64 = num.parse().map_err(|_| err())?;
                    MetricId::RecentActivity { delta_s }
                } else if let Some(num) = rest.strip_suffix('L') {
                    let k: u32 = num.parse().map_err(|_| err())?;
                    MetricId::RecentRate { k }
                } else {
                    return Err(err());
                }
            }
        };
        id.validate()?;
        Ok(id)
    }
}

impl serde::Serialize for MetricId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for MetricId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

thread_local! {
    static SCORING_PASSES: Cell<u64> = const { Cell::new(0) };
}

/// Number of raw metric tables computed on the current thread since process
/// start. One training run over `M` metrics performs exactly `M` passes;
/// objective evaluations reuse the cached tables.
pub fn scoring_passes() -> u64 {
    SCORING_PASSES.with(|c| c.get())
}

/// Precomputed per-stream lookups shared by every metric.
pub struct StreamIndex {
    adjacency: BTreeMap<Node, BTreeSet<Node>>,
    pair_times: HashMap<NodePair, Vec<f64>>,
    /// Total activity per node: sum of A(u, k) over k in N(u).
    node_strength: HashMap<Node, f64>,
    /// Sum of ln A(w, k) over k in N(w), per node.
    log_strength: HashMap<Node, f64>,
    omega: f64,
    /// Substitute denominator for a zero recency gap: the smallest positive
    /// gap between distinct timestamps, or the interval length if none.
    resolution: f64,
}

impl StreamIndex {
    pub fn new(stream: &LinkStream) -> Self {
        let adjacency = stream.adjacency();
        let mut pair_times: HashMap<NodePair, Vec<f64>> = HashMap::new();
        for link in stream.links() {
            pair_times.entry(link.pair).or_default().push(link.t);
        }

        let mut node_strength = HashMap::new();
        let mut log_strength = HashMap::new();
        for (&node, neighbors) in &adjacency {
            let mut strength = 0.0;
            let mut logs = 0.0;
            for &other in neighbors {
                let pair = NodePair::new(node, other).expect("adjacency holds distinct nodes");
                let activity = pair_times.get(&pair).map_or(0, Vec::len) as f64;
                strength += activity;
                logs += activity.ln();
            }
            node_strength.insert(node, strength);
            log_strength.insert(node, logs);
        }

        let resolution = stream
            .min_positive_gap()
            .unwrap_or_else(|| stream.interval().length());

        StreamIndex {
            adjacency,
            pair_times,
            node_strength,
            log_strength,
            omega: stream.interval().end(),
            resolution,
        }
    }

    fn neighbors(&self, node: Node) -> Option<&BTreeSet<Node>> {
        self.adjacency.get(&node)
    }

    fn activity(&self, pair: NodePair) -> f64 {
        self.pair_times.get(&pair).map_or(0, Vec::len) as f64
    }

    fn common_neighbors(&self, pair: NodePair) -> Vec<Node> {
        match (self.neighbors(pair.a()), self.neighbors(pair.b())) {
            (Some(na), Some(nb)) => na.intersection(nb).copied().collect(),
            _ => Vec::new(),
        }
    }

    /// Raw score of `metric` on `pair`.
    pub fn score(&self, metric: MetricId, pair: NodePair) -> f64 {
        let degree = |n: Node| self.neighbors(n).map_or(0, BTreeSet::len);
        match metric {
            MetricId::CommonNeighbors => self.common_neighbors(pair).len() as f64,
            MetricId::Jaccard => {
                let inter = self.common_neighbors(pair).len();
                let union = degree(pair.a()) + degree(pair.b()) - inter;
                if union == 0 {
                    0.0
                } else {
                    inter as f64 / union as f64
                }
            }
            MetricId::Sorensen => {
                let inter = self.common_neighbors(pair).len();
                let total = degree(pair.a()) + degree(pair.b());
                if total == 0 {
                    0.0
                } else {
                    2.0 * inter as f64 / total as f64
                }
            }
            MetricId::AdamicAdar => self
                .common_neighbors(pair)
                .iter()
                .map(|&w| {
                    let d = degree(w);
                    // A shared neighbor has degree >= 2 except for malformed
                    // extra-pair queries; 1/ln(1) would be infinite.
                    if d <= 1 {
                        0.0
                    } else {
                        1.0 / (d as f64).ln()
                    }
                })
                .sum(),
            MetricId::ResourceAllocation => self
                .common_neighbors(pair)
                .iter()
                .map(|&w| 1.0 / degree(w) as f64)
                .sum(),
            MetricId::WeightedCommonNeighbors => self
                .common_neighbors(pair)
                .iter()
                .map(|&w| {
                    self.activity(NodePair::new(pair.a(), w).expect("w differs from endpoints"))
                        * self.activity(NodePair::new(pair.b(), w).expect("w differs from endpoints"))
                })
                .sum(),
            MetricId::WeightedSorensen => {
                let numer: f64 = self
                    .common_neighbors(pair)
                    .iter()
                    .map(|&w| {
                        self.activity(NodePair::new(pair.a(), w).expect("w differs from endpoints"))
                            + self.activity(
                                NodePair::new(pair.b(), w).expect("w differs from endpoints"),
                            )
                    })
                    .sum();
                let denom = self.node_strength.get(&pair.a()).copied().unwrap_or(0.0)
                    + self.node_strength.get(&pair.b()).copied().unwrap_or(0.0);
                if denom == 0.0 {
                    0.0
                } else {
                    numer / denom
                }
            }
            MetricId::WeightedAdamicAdar => self
                .common_neighbors(pair)
                .iter()
                .map(|&w| {
                    // All-unit activities give a zero log-sum; such a neighbor
                    // contributes nothing instead of blowing up.
                    let denom = self.log_strength.get(&w).copied().unwrap_or(0.0);
                    if denom <= 0.0 {
                        0.0
                    } else {
                        1.0 / denom
                    }
                })
                .sum(),
            MetricId::WeightedResourceAllocation => self
                .common_neighbors(pair)
                .iter()
                .map(|&w| {
                    let denom = self.node_strength.get(&w).copied().unwrap_or(0.0);
                    if denom <= 0.0 {
                        0.0
                    } else {
                        1.0 / denom
                    }
                })
                .sum(),
            MetricId::PairActivity => self.activity(pair),
            MetricId::RecentActivity { delta_s } => {
                let cutoff = self.omega - delta_s;
                self.pair_times
                    .get(&pair)
                    .map_or(0, |ts| ts.iter().filter(|&&t| t >= cutoff && t <= self.omega).count())
                    as f64
            }
            MetricId::RecentRate { k } => {
                let Some(times) = self.pair_times.get(&pair) else {
                    return 0.0;
                };
                if times.is_empty() {
                    return 0.0;
                }
                // Timestamps are ascending; the pair has m links, and the
                // k-th most recent is times[m - k]. With fewer than k links
                // the oldest one is used instead.
                let m = times.len();
                let depth = (k as usize).min(m);
                let t_k = times[m - depth];
                let gap = self.omega - t_k;
                let gap = if gap > 0.0 { gap } else { self.resolution };
                depth as f64 / gap
            }
        }
    }
}

/// Scores of one metric over a fixed pair set. Raw until
/// [`ScoreTable::normalize`] is applied.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    metric: MetricId,
    scores: BTreeMap<NodePair, f64>,
    normalization_max: Option<f64>,
}

impl ScoreTable {
    /// Computes the raw table for `metric` over `pairs`. Counts as one
    /// scoring pass.
    pub fn compute(index: &StreamIndex, metric: MetricId, pairs: &BTreeSet<NodePair>) -> Self {
        SCORING_PASSES.with(|c| c.set(c.get() + 1));
        let scores = pairs
            .iter()
            .map(|&p| (p, index.score(metric, p)))
            .collect();
        ScoreTable {
            metric,
            scores,
            normalization_max: None,
        }
    }

    pub fn metric(&self) -> MetricId {
        self.metric
    }

    pub fn scores(&self) -> &BTreeMap<NodePair, f64> {
        &self.scores
    }

    pub fn get(&self, pair: NodePair) -> f64 {
        self.scores.get(&pair).copied().unwrap_or(0.0)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization_max.is_some()
    }

    /// Maximum raw value the table was divided by, if normalized.
    pub fn normalization_max(&self) -> Option<f64> {
        self.normalization_max
    }

    /// Divides every score by the table maximum. An all-zero table stays
    /// all-zero and records a maximum of 0. Idempotent on the score values.
    pub fn normalize(mut self) -> Self {
        let max = self.scores.values().cloned().fold(0.0f64, f64::max);
        if max > 0.0 {
            for v in self.scores.values_mut() {
                *v /= max;
            }
        }
        self.normalization_max = Some(max);
        self
    }
}

/// Computes one normalized table per metric over `pairs`, reusing a single
/// stream index. Order follows `metric_ids`; duplicates are rejected.
pub fn score_all(
    stream: &LinkStream,
    metric_ids: &[MetricId],
    pairs: &BTreeSet<NodePair>,
) -> Result<Vec<ScoreTable>> {
    let mut seen = BTreeSet::new();
    for id in metric_ids {
        id.validate()?;
        if !seen.insert(*id) {
            return Err(Error::Config(format!("duplicate metric {id} in metric list")));
        }
    }
    if metric_ids.is_empty() {
        return Ok(Vec::new());
    }
    let index = StreamIndex::new(stream);
    Ok(metric_ids
        .iter()
        .map(|&m| ScoreTable::compute(&index, m, pairs).normalize())
        .collect())
}

/// Like [`score_all`] but leaves the tables raw, for exports that show both
/// raw and normalized values.
pub fn score_all_raw(
    stream: &LinkStream,
    metric_ids: &[MetricId],
    pairs: &BTreeSet<NodePair>,
) -> Result<Vec<ScoreTable>> {
    let mut seen = BTreeSet::new();
    for id in metric_ids {
        id.validate()?;
        if !seen.insert(*id) {
            return Err(Error::Config(format!("duplicate metric {id} in metric list")));
        }
    }
    if metric_ids.is_empty() {
        return Ok(Vec::new());
    }
    let index = StreamIndex::new(stream);
    Ok(metric_ids
        .iter()
        .map(|&m| ScoreTable::compute(&index, m, pairs))
        .collect())
}

/// Convenience single-pair scorer; builds a throwaway index, so prefer
/// [`score_all`] for bulk work.
pub fn metric_score(stream: &LinkStream, metric: MetricId, pair: NodePair) -> f64 {
    StreamIndex::new(stream).score(metric, pair)
}

/// Pearson correlations between metric score vectors over a common pair
/// set. Entries involving a constant vector are undefined (`None`); the
/// diagonal is 1 by convention.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub metrics: Vec<MetricId>,
    pub entries: Vec<Vec<Option<f64>>>,
}

pub fn correlation_matrix(tables: &[ScoreTable]) -> Result<CorrelationMatrix> {
    if tables.len() < 2 {
        return Err(Error::Config(
            "correlation matrix needs at least two score tables".into(),
        ));
    }
    let reference: Vec<NodePair> = tables[0].scores.keys().copied().collect();
    for t in &tables[1..] {
        if t.scores.len() != reference.len()
            || !t.scores.keys().copied().eq(reference.iter().copied())
        {
            return Err(Error::PairSetMismatch(format!(
                "table for {} scores a different pair set than table for {}",
                t.metric, tables[0].metric
            )));
        }
    }

    let vectors: Vec<Vec<f64>> = tables
        .iter()
        .map(|t| t.scores.values().copied().collect())
        .collect();
    let n = vectors.len();
    let mut entries = vec![vec![None; n]; n];
    for i in 0..n {
        entries[i][i] = Some(1.0);
        for j in i + 1..n {
            let r = pearson(&vectors[i], &vectors[j]);
            entries[i][j] = r;
            entries[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        metrics: tables.iter().map(|t| t.metric).collect(),
        entries,
    })
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        cov += (a - mean_x) * (b - mean_y);
        var_x += (a - mean_x) * (a - mean_x);
        var_y += (b - mean_y) * (b - mean_y);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return None;
    }
    Some(cov / (var_x * var_y).sqrt())
}
