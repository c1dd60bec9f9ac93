//! Brute-force reference implementation of every metric, written directly
//! from the definitions with explicit set enumeration and direct summation.
//!
//! This oracle deliberately shares no code with the engine: it works on raw
//! `(t, u, v)` string triples, canonicalizes pairs by lexicographic string
//! order, and derives recency quantities from a descending sort. It exists
//! only to check the optimized implementation.

use std::collections::{BTreeMap, BTreeSet};

use linkstream::metrics::MetricId;

pub struct RawStream {
    pub triples: Vec<(f64, String, String)>,
    pub start: f64,
    pub end: f64,
}

fn key(u: &str, v: &str) -> (String, String) {
    if u <= v {
        (u.to_owned(), v.to_owned())
    } else {
        (v.to_owned(), u.to_owned())
    }
}

impl RawStream {
    pub fn neighbors(&self, node: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (_, u, v) in &self.triples {
            if u == node {
                out.insert(v.clone());
            }
            if v == node {
                out.insert(u.clone());
            }
        }
        out
    }

    pub fn activity(&self, u: &str, v: &str) -> usize {
        let k = key(u, v);
        self.triples
            .iter()
            .filter(|(_, a, b)| key(a, b) == k)
            .count()
    }
}

/// One-time enumeration of neighborhoods, per-pair timestamps, and the
/// stream's time resolution, built by plain scans.
pub struct RawIndex {
    neighbors: BTreeMap<String, BTreeSet<String>>,
    /// Timestamps per canonical pair, most recent first.
    times_desc: BTreeMap<(String, String), Vec<f64>>,
    end: f64,
    /// Smallest positive gap between distinct timestamps, or the interval
    /// length if none exists.
    resolution: f64,
}

impl RawIndex {
    pub fn build(stream: &RawStream) -> Self {
        let mut neighbors: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut times_desc: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
        for (t, u, v) in &stream.triples {
            neighbors.entry(u.clone()).or_default().insert(v.clone());
            neighbors.entry(v.clone()).or_default().insert(u.clone());
            times_desc.entry(key(u, v)).or_default().push(*t);
        }
        for times in times_desc.values_mut() {
            times.sort_by(|a, b| b.total_cmp(a));
        }

        let mut all_times: Vec<f64> = stream.triples.iter().map(|(t, _, _)| *t).collect();
        all_times.sort_by(f64::total_cmp);
        let mut resolution = f64::INFINITY;
        for w in all_times.windows(2) {
            let gap = w[1] - w[0];
            if gap > 0.0 && gap < resolution {
                resolution = gap;
            }
        }
        if !resolution.is_finite() {
            resolution = stream.end - stream.start;
        }

        RawIndex {
            neighbors,
            times_desc,
            end: stream.end,
            resolution,
        }
    }

    fn neighbors_of(&self, node: &str) -> BTreeSet<String> {
        self.neighbors.get(node).cloned().unwrap_or_default()
    }

    fn activity(&self, u: &str, v: &str) -> f64 {
        self.times_desc.get(&key(u, v)).map_or(0, Vec::len) as f64
    }

    pub fn score(&self, metric: MetricId, u: &str, v: &str) -> f64 {
        let nu = self.neighbors_of(u);
        let nv = self.neighbors_of(v);
        let common: Vec<String> = nu.intersection(&nv).cloned().collect();
        match metric {
            MetricId::CommonNeighbors => common.len() as f64,
            MetricId::Jaccard => {
                let union = nu.union(&nv).count();
                if union == 0 {
                    0.0
                } else {
                    common.len() as f64 / union as f64
                }
            }
            MetricId::Sorensen => {
                let total = nu.len() + nv.len();
                if total == 0 {
                    0.0
                } else {
                    2.0 * common.len() as f64 / total as f64
                }
            }
            MetricId::AdamicAdar => {
                let mut sum = 0.0;
                for w in &common {
                    let deg = self.neighbors_of(w).len();
                    if deg > 1 {
                        sum += 1.0 / (deg as f64).ln();
                    }
                }
                sum
            }
            MetricId::ResourceAllocation => {
                let mut sum = 0.0;
                for w in &common {
                    sum += 1.0 / self.neighbors_of(w).len() as f64;
                }
                sum
            }
            MetricId::WeightedCommonNeighbors => {
                let mut sum = 0.0;
                for w in &common {
                    sum += self.activity(u, w) * self.activity(v, w);
                }
                sum
            }
            MetricId::WeightedSorensen => {
                let mut numer = 0.0;
                for w in &common {
                    numer += self.activity(u, w) + self.activity(v, w);
                }
                let mut denom = 0.0;
                for k in &nu {
                    denom += self.activity(u, k);
                }
                for k in &nv {
                    denom += self.activity(v, k);
                }
                if denom == 0.0 {
                    0.0
                } else {
                    numer / denom
                }
            }
            MetricId::WeightedAdamicAdar => {
                let mut sum = 0.0;
                for w in &common {
                    let mut denom = 0.0;
                    for k in &self.neighbors_of(w) {
                        denom += self.activity(w, k).ln();
                    }
                    if denom > 0.0 {
                        sum += 1.0 / denom;
                    }
                }
                sum
            }
            MetricId::WeightedResourceAllocation => {
                let mut sum = 0.0;
                for w in &common {
                    let mut denom = 0.0;
                    for k in &self.neighbors_of(w) {
                        denom += self.activity(w, k);
                    }
                    if denom > 0.0 {
                        sum += 1.0 / denom;
                    }
                }
                sum
            }
            MetricId::PairActivity => self.activity(u, v),
            MetricId::RecentActivity { delta_s } => self
                .times_desc
                .get(&key(u, v))
                .map_or(0, |ts| {
                    ts.iter()
                        .filter(|&&t| t >= self.end - delta_s && t <= self.end)
                        .count()
                }) as f64,
            MetricId::RecentRate { k } => {
                let Some(times) = self.times_desc.get(&key(u, v)) else {
                    return 0.0;
                };
                if times.is_empty() {
                    return 0.0;
                }
                let depth = (k as usize).min(times.len());
                let t_k = times[depth - 1];
                let mut gap = self.end - t_k;
                if gap <= 0.0 {
                    gap = self.resolution;
                }
                depth as f64 / gap
            }
        }
    }
}
