// Each integration-test binary compiles this module separately and uses a
// different subset of it.
#![allow(dead_code)]

pub mod oracle;

use linkstream::{Interval, LinkStream};
use rand::Rng;

/// Random stream over at most `max_nodes` nodes and `max_links` links with
/// timestamps in [0, 1000]; every node is registered so isolated nodes can
/// be queried.
pub fn random_stream(
    rng: &mut impl Rng,
    max_nodes: usize,
    max_links: usize,
) -> (oracle::RawStream, LinkStream) {
    let n = rng.random_range(2..=max_nodes);
    let m = rng.random_range(1..=max_links);
    let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();

    let mut triples = Vec::with_capacity(m);
    for _ in 0..m {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n);
        while b == a {
            b = rng.random_range(0..n);
        }
        let t = rng.random_range(0.0..=1000.0);
        triples.push((t, names[a].clone(), names[b].clone()));
    }

    let raw = oracle::RawStream {
        start: 0.0,
        end: 1000.0,
        triples: triples.clone(),
    };
    let borrowed: Vec<(f64, &str, &str)> = triples
        .iter()
        .map(|(t, u, v)| (*t, u.as_str(), v.as_str()))
        .collect();
    let universe: Vec<&str> = names.iter().map(String::as_str).collect();
    let stream = LinkStream::from_triples_with_universe(
        Interval::new(0.0, 1000.0).unwrap(),
        &borrowed,
        &universe,
    )
    .unwrap();
    (raw, stream)
}
