//! Random test networks.

use alloc::vec::Vec;
use core::ops::RangeInclusive;

use rand::Rng;

use crate::error::Result;
use crate::network::{Edge, Network, NetworkBuilder};

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOptions {
    /// Total node count, slack included.
    pub nodes: RangeInclusive<usize>,
    /// Independent loops added on top of a spanning tree.
    pub loops: RangeInclusive<usize>,
    pub lambda: RangeInclusive<f64>,
    pub alpha: RangeInclusive<f64>,
    /// Probability that an edge carries a compressor.
    pub compressor_prob: f64,
    /// Injection at each non-slack node; the slack balances the total.
    pub injection: RangeInclusive<f64>,
    pub slack_pi: f64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            nodes: 4..=8,
            loops: 0..=3,
            lambda: 0.5..=2.0,
            alpha: 1.0..=1.5,
            compressor_prob: 0.3,
            injection: -1.0..=-0.1,
            slack_pi: 50.0,
        }
    }
}

/// Random connected network; node 0 is the slack.
///
/// Loop edges join distinct node pairs not already adjacent, so the loop
/// count can come out lower than requested on very small graphs.
pub fn random_network<R: Rng>(opts: &GeneratorOptions, rng: &mut R) -> Result<Network> {
    let n_nodes = rng.random_range(opts.nodes.clone()).max(2);
    let want_loops = rng.random_range(opts.loops.clone());
    let mut builder = NetworkBuilder::new().slack(0, opts.slack_pi);
    for id in 1..n_nodes as i64 {
        builder = builder.node(id, rng.random_range(opts.injection.clone()));
    }

    let mut pairs: Vec<(i64, i64)> = Vec::new();
    for k in 1..n_nodes as i64 {
        let parent = rng.random_range(0..k);
        pairs.push((parent, k));
    }
    let adjacent =
        |pairs: &[(i64, i64)], a: i64, b: i64| pairs.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a));
    let mut attempts = 0;
    while pairs.len() < n_nodes - 1 + want_loops && attempts < 100 {
        attempts += 1;
        let a = rng.random_range(0..n_nodes as i64);
        let b = rng.random_range(0..n_nodes as i64);
        if a != b && !adjacent(&pairs, a, b) {
            pairs.push((a.min(b), a.max(b)));
        }
    }

    for (from, to) in pairs {
        let lambda = rng.random_range(opts.lambda.clone());
        let edge = if rng.random_bool(opts.compressor_prob) {
            Edge::compressor(
                from,
                to,
                lambda,
                rng.random_range(opts.alpha.clone()),
                rng.random_range(0.0..=1.0),
            )
        } else {
            Edge::pipe(from, to, lambda)
        };
        builder = builder.edge(edge);
    }
    builder.build()
}

/// Random tree (no loops) with the given options.
pub fn random_tree<R: Rng>(opts: &GeneratorOptions, rng: &mut R) -> Result<Network> {
    random_network(
        &GeneratorOptions {
            loops: 0..=0,
            ..opts.clone()
        },
        rng,
    )
}
