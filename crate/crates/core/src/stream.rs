//! Link streams: time-ordered sets of undirected timestamped links over a
//! node set, with a bounding interval.
//!
//! A stream is immutable after construction, so slices and queries can be
//! shared freely across threads. Node identifiers are opaque tokens interned
//! into a table shared by every slice of the same stream; the canonical order
//! on pairs is the interning order, which is stable for a given input.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Interned node identifier. Ordering follows the interning order of the
/// underlying token, which is stable for a fixed input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Node(u32);

impl Node {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Unordered pair of distinct nodes, stored in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodePair {
    a: Node,
    b: Node,
}

impl NodePair {
    /// Canonicalizes the endpoints; rejects self-pairs.
    pub fn new(u: Node, v: Node) -> Result<Self> {
        if u == v {
            return Err(Error::Config(format!(
                "node pair requires two distinct nodes, got node #{} twice",
                u.0
            )));
        }
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        Ok(NodePair { a, b })
    }

    pub fn a(&self) -> Node {
        self.a
    }

    pub fn b(&self) -> Node {
        self.b
    }
}

/// Closed time interval `[start, end]` with `start < end`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Interval {
    start: f64,
    end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() || start >= end {
            return Err(Error::InvalidInterval { start, end });
        }
        Ok(Interval { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }
}

/// A single undirected timestamped link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub t: f64,
    pub pair: NodePair,
}

/// Interning table mapping node tokens to dense indices.
#[derive(Debug, Default)]
struct NodeTable {
    names: Vec<String>,
    by_name: HashMap<String, Node>,
}

impl NodeTable {
    fn intern(&mut self, name: &str) -> Node {
        if let Some(&n) = self.by_name.get(name) {
            return n;
        }
        let n = Node(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.by_name.insert(name.to_owned(), n);
        n
    }
}

/// A link stream `(T, V, E)`: a bounding interval, a node set, and a
/// sequence of links sorted by timestamp. Duplicate `(t, u, v)` links are
/// retained as distinct links.
#[derive(Debug, Clone)]
pub struct LinkStream {
    interval: Interval,
    nodes: Arc<NodeTable>,
    links: Vec<Link>,
}

impl LinkStream {
    /// Parses a line-oriented `t u v` text source. Lines starting with `#`
    /// and blank lines are ignored. The interval defaults to
    /// `[min t, max t]` unless `interval` is given, in which case every link
    /// must fall inside it.
    ///
    /// `universe` optionally names nodes that belong to `V` even if they
    /// never interact; endpoints found in the input are added regardless.
    pub fn load(
        reader: impl BufRead,
        universe: Option<&[String]>,
        interval: Option<Interval>,
    ) -> Result<Self> {
        let mut table = NodeTable::default();
        if let Some(names) = universe {
            for name in names {
                validate_token(name, 0)?;
                table.intern(name);
            }
        }

        let mut links = Vec::new();
        let mut t_min = f64::INFINITY;
        let mut t_max = f64::NEG_INFINITY;
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(format!("<input>:{lineno}"), e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected 3 fields `t u v`, got {}", fields.len()),
                });
            }
            let t: f64 = fields[0].parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("unparseable timestamp {:?}", fields[0]),
            })?;
            if !t.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("non-finite timestamp {:?}", fields[0]),
                });
            }
            if fields[1] == fields[2] {
                return Err(Error::SelfLoop {
                    line: lineno,
                    node: fields[1].to_owned(),
                });
            }
            validate_token(fields[1], lineno)?;
            validate_token(fields[2], lineno)?;
            let u = table.intern(fields[1]);
            let v = table.intern(fields[2]);
            let pair = NodePair::new(u, v).expect("distinct tokens intern to distinct nodes");
            t_min = t_min.min(t);
            t_max = t_max.max(t);
            links.push(Link { t, pair });
        }

        if links.is_empty() {
            return Err(Error::EmptyStream);
        }
        links.sort_by(|a, b| a.t.total_cmp(&b.t));

        let interval = match interval {
            Some(iv) => {
                if t_min < iv.start() || t_max > iv.end() {
                    return Err(Error::Config(format!(
                        "links span [{t_min}, {t_max}] outside the configured interval [{}, {}]",
                        iv.start(),
                        iv.end()
                    )));
                }
                iv
            }
            // Degenerate single-instant input: widen by one unit so the
            // interval invariant start < end holds.
            None => Interval::new(t_min, if t_min < t_max { t_max } else { t_min + 1.0 })?,
        };

        Ok(LinkStream {
            interval,
            nodes: Arc::new(table),
            links,
        })
    }

    /// Builds a stream from `(t, u, v)` triples, mainly for tests and
    /// synthetic fixtures.
    pub fn from_triples(interval: Interval, triples: &[(f64, &str, &str)]) -> Result<Self> {
        Self::from_triples_with_universe(interval, triples, &[])
    }

    /// Like [`LinkStream::from_triples`], with extra isolated universe nodes.
    pub fn from_triples_with_universe(
        interval: Interval,
        triples: &[(f64, &str, &str)],
        universe: &[&str],
    ) -> Result<Self> {
        let mut table = NodeTable::default();
        for name in universe {
            table.intern(name);
        }
        let mut links = Vec::with_capacity(triples.len());
        for &(t, u, v) in triples {
            if u == v {
                return Err(Error::SelfLoop {
                    line: 0,
                    node: u.to_owned(),
                });
            }
            if !interval.contains(t) {
                return Err(Error::Config(format!(
                    "link at t={t} outside interval [{}, {}]",
                    interval.start(),
                    interval.end()
                )));
            }
            let pair = NodePair::new(table.intern(u), table.intern(v))?;
            links.push(Link { t, pair });
        }
        if links.is_empty() && universe.is_empty() {
            return Err(Error::EmptyStream);
        }
        links.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(LinkStream {
            interval,
            nodes: Arc::new(table),
            links,
        })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// Number of nodes in `V` (including isolated universe members).
    pub fn node_count(&self) -> usize {
        self.nodes.names.len()
    }

    pub fn node(&self, name: &str) -> Option<Node> {
        self.nodes.by_name.get(name).copied()
    }

    pub fn node_name(&self, node: Node) -> &str {
        &self.nodes.names[node.index()]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.nodes.names.len() as u32).map(Node)
    }

    /// Pair of node names in canonical order.
    pub fn pair_names(&self, pair: NodePair) -> (&str, &str) {
        (self.node_name(pair.a), self.node_name(pair.b))
    }

    /// Looks both names up and canonicalizes. `None` if either is unknown.
    pub fn pair(&self, u: &str, v: &str) -> Option<NodePair> {
        let (u, v) = (self.node(u)?, self.node(v)?);
        NodePair::new(u, v).ok()
    }

    /// Restriction of the stream to `window` (both endpoints included).
    /// The node set is shared with the parent; a disjoint window yields an
    /// empty stream.
    pub fn slice(&self, window: Interval) -> LinkStream {
        let lo = self
            .links
            .partition_point(|l| l.t < window.start());
        let hi = self.links.partition_point(|l| l.t <= window.end());
        LinkStream {
            interval: window,
            nodes: Arc::clone(&self.nodes),
            links: self.links[lo..hi].to_vec(),
        }
    }

    /// All nodes sharing at least one link with `node`; never contains
    /// `node` itself. Unknown nodes yield the empty set.
    pub fn neighborhood(&self, node: Node) -> BTreeSet<Node> {
        let mut out = BTreeSet::new();
        for link in &self.links {
            if link.pair.a == node {
                out.insert(link.pair.b);
            } else if link.pair.b == node {
                out.insert(link.pair.a);
            }
        }
        out
    }

    /// Number of links on `pair` within the stream.
    pub fn pair_activity(&self, pair: NodePair) -> u64 {
        self.links.iter().filter(|l| l.pair == pair).count() as u64
    }

    /// Link count per active pair.
    pub fn pair_counts(&self) -> BTreeMap<NodePair, u64> {
        let mut out = BTreeMap::new();
        for link in &self.links {
            *out.entry(link.pair).or_insert(0) += 1;
        }
        out
    }

    /// Adjacency sets for every node that appears in a link.
    pub(crate) fn adjacency(&self) -> BTreeMap<Node, BTreeSet<Node>> {
        let mut adj: BTreeMap<Node, BTreeSet<Node>> = BTreeMap::new();
        for link in &self.links {
            adj.entry(link.pair.a).or_default().insert(link.pair.b);
            adj.entry(link.pair.b).or_default().insert(link.pair.a);
        }
        adj
    }

    /// Pairs any metric can score above zero: pairs with at least one past
    /// link, plus pairs sharing at least one common neighbor.
    pub fn candidate_pairs(&self) -> BTreeSet<NodePair> {
        let mut out: BTreeSet<NodePair> = self.links.iter().map(|l| l.pair).collect();
        for neighbors in self.adjacency().values() {
            let nodes: Vec<Node> = neighbors.iter().copied().collect();
            for (i, &u) in nodes.iter().enumerate() {
                for &v in &nodes[i + 1..] {
                    out.insert(NodePair::new(u, v).expect("neighbor sets hold distinct nodes"));
                }
            }
        }
        out
    }

    /// Smallest positive gap between consecutive (sorted) timestamps, if
    /// any two distinct timestamps exist.
    pub fn min_positive_gap(&self) -> Option<f64> {
        let mut best = f64::INFINITY;
        for w in self.links.windows(2) {
            let gap = w[1].t - w[0].t;
            if gap > 0.0 && gap < best {
                best = gap;
            }
        }
        best.is_finite().then_some(best)
    }

    /// Link counts over `[start + i*g, start + (i+1)*g)` bins partitioning
    /// the interval; the last bin is closed so every link lands in a bin.
    pub fn activity_histogram(&self, granularity: f64) -> Result<Vec<(f64, u64)>> {
        if !(granularity > 0.0) || !granularity.is_finite() {
            return Err(Error::Config(format!(
                "histogram granularity must be positive and finite, got {granularity}"
            )));
        }
        let start = self.interval.start();
        let nbins = ((self.interval.length() / granularity).ceil() as usize).max(1);
        let mut counts = vec![0u64; nbins];
        for link in &self.links {
            let mut bin = ((link.t - start) / granularity).floor() as usize;
            if bin >= nbins {
                bin = nbins - 1;
            }
            counts[bin] += 1;
        }
        Ok(counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (start + i as f64 * granularity, c))
            .collect())
    }
}

fn validate_token(name: &str, line: usize) -> Result<()> {
    // Node tokens end up in comma-separated exports; a comma would make
    // those files ambiguous.
    if name.contains(',') {
        return Err(Error::Parse {
            line,
            msg: format!("node id {name:?} contains a comma"),
        });
    }
    Ok(())
}
