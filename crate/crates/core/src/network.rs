//! Gas network data model and validation.
//!
//! Node 0 of the internal numbering is always the slack node; the remaining
//! nodes keep the order in which they were supplied. Edges are indexed in
//! input order, and every edge-indexed vector in the crate follows that order.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A network node. `injection` is ignored for the slack node.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: i64,
    pub slack: bool,
    pub injection: f64,
    pub pi_max: Option<f64>,
}

/// A directed pipe, optionally carrying a multiplicative compressor.
///
/// The compressor boosts pressure in the `from -> to` direction by `alpha`
/// and sits at relative position `r` along the pipe.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: i64,
    pub to: i64,
    pub lambda: f64,
    pub alpha: f64,
    pub r: f64,
}

impl Edge {
    pub fn pipe(from: i64, to: i64, lambda: f64) -> Self {
        Self {
            from,
            to,
            lambda,
            alpha: 1.0,
            r: 0.0,
        }
    }

    pub fn compressor(from: i64, to: i64, lambda: f64, alpha: f64, r: f64) -> Self {
        Self {
            from,
            to,
            lambda,
            alpha,
            r,
        }
    }

    /// Effective friction `(alpha * r + 1 - r) * lambda`.
    pub fn effective_friction(&self) -> f64 {
        (self.alpha * self.r + (1.0 - self.r)) * self.lambda
    }
}

/// A validated gas network with exactly one slack node.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    slack_pi: f64,
    /// Node indices in internal order (slack first).
    order: Vec<usize>,
    /// Edge endpoints as internal node indices `(head, tail)`.
    endpoints: Vec<(usize, usize)>,
}

impl Network {
    /// Validates the inputs and builds the network.
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>, slack_pi: f64) -> Result<Self> {
        let invalid = |msg: alloc::string::String| Err(Error::Validation(msg));

        let slack_count = nodes.iter().filter(|n| n.slack).count();
        if slack_count != 1 {
            return invalid(format!("expected exactly one slack node, found {slack_count}"));
        }
        if nodes.len() < 2 {
            return invalid("network needs at least one non-slack node".into());
        }
        if !slack_pi.is_finite() || slack_pi < 0.0 {
            return invalid(format!("slack squared pressure {slack_pi} is negative"));
        }

        let mut order = Vec::with_capacity(nodes.len());
        order.push(nodes.iter().position(|n| n.slack).unwrap());
        order.extend((0..nodes.len()).filter(|&i| !nodes[i].slack));

        let mut index = BTreeMap::new();
        for (internal, &pos) in order.iter().enumerate() {
            let node = &nodes[pos];
            if index.insert(node.id, internal).is_some() {
                return invalid(format!("duplicate node id {}", node.id));
            }
            if !node.slack && !node.injection.is_finite() {
                return invalid(format!("injection at node {} is not finite", node.id));
            }
            if let Some(cap) = node.pi_max {
                if !cap.is_finite() || cap <= 0.0 {
                    return invalid(format!("pi_max at node {} must be positive", node.id));
                }
            }
        }

        let mut endpoints = Vec::with_capacity(edges.len());
        let mut pairs = BTreeMap::new();
        for (k, e) in edges.iter().enumerate() {
            let (Some(&head), Some(&tail)) = (index.get(&e.from), index.get(&e.to)) else {
                return invalid(format!("edge {k} references an unknown node"));
            };
            if head == tail {
                return invalid(format!("edge {k} is a self-loop"));
            }
            if pairs.insert((head.min(tail), head.max(tail)), k).is_some() {
                return invalid(format!(
                    "edge {k} duplicates the connection between nodes {} and {}",
                    e.from, e.to
                ));
            }
            if !(e.lambda.is_finite() && e.lambda > 0.0) {
                return invalid(format!("friction coefficient not positive on edge {k}"));
            }
            if !e.alpha.is_finite() || e.alpha < 1.0 {
                return invalid(format!("compression ratio below 1 on edge {k}"));
            }
            if !(0.0..=1.0).contains(&e.r) {
                return invalid(format!("compressor position outside [0, 1] on edge {k}"));
            }
            endpoints.push((head, tail));
        }

        // Connectivity by union-find over internal indices.
        let mut parent: Vec<usize> = (0..nodes.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(h, t) in &endpoints {
            let (a, b) = (find(&mut parent, h), find(&mut parent, t));
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        if (1..nodes.len()).any(|i| find(&mut parent, i) != root) {
            return invalid("disconnected graph".into());
        }

        Ok(Self {
            nodes,
            edges,
            slack_pi,
            order,
            endpoints,
        })
    }

    /// Number of non-slack nodes.
    pub fn n(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of edges.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn slack_pi(&self) -> f64 {
        self.slack_pi
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Nodes in input order.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Node at internal index `i` (0 is the slack node).
    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[self.order[i]]
    }

    /// Edge endpoints as internal node indices `(head, tail)`.
    pub fn endpoints(&self) -> &[(usize, usize)] {
        &self.endpoints
    }

    /// Injections of the non-slack nodes in internal order.
    pub fn injections(&self) -> Vec<f64> {
        (1..=self.n()).map(|i| self.node(i).injection).collect()
    }

    /// Independent loop count `m - n`.
    pub fn loops(&self) -> usize {
        self.m() - self.n()
    }

    pub fn is_tree(&self) -> bool {
        self.loops() == 0
    }

    pub fn has_compressors(&self) -> bool {
        self.edges.iter().any(|e| e.alpha != 1.0)
    }

    /// Copy of the network with every compressor ratio (`alpha > 1`) multiplied by `factor`.
    pub fn with_compression_scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "compression multiplier {factor} must be positive"
            )));
        }
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let mut e = e.clone();
                if e.alpha > 1.0 {
                    e.alpha *= factor;
                }
                e
            })
            .collect();
        Self::new(self.nodes.clone(), edges, self.slack_pi)
    }

    /// Copy of the network with new non-slack injections (internal order).
    pub fn with_injections(&self, q: &[f64]) -> Result<Self> {
        if q.len() != self.n() {
            return Err(Error::Dimension {
                what: "injections",
                expected: self.n(),
                found: q.len(),
            });
        }
        let mut nodes = self.nodes.clone();
        for (i, &value) in q.iter().enumerate() {
            nodes[self.order[i + 1]].injection = value;
        }
        Self::new(nodes, self.edges.clone(), self.slack_pi)
    }

    pub fn with_slack_pi(&self, slack_pi: f64) -> Result<Self> {
        Self::new(self.nodes.clone(), self.edges.clone(), slack_pi)
    }
}

/// Incremental construction of a [`Network`].
#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    slack_pi: f64,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn slack(mut self, id: i64, slack_pi: f64) -> Self {
        self.nodes.push(Node {
            id,
            slack: true,
            injection: 0.0,
            pi_max: None,
        });
        self.slack_pi = slack_pi;
        self
    }

    pub fn node(mut self, id: i64, injection: f64) -> Self {
        self.nodes.push(Node {
            id,
            slack: false,
            injection,
            pi_max: None,
        });
        self
    }

    pub fn pipe(mut self, from: i64, to: i64, lambda: f64) -> Self {
        self.edges.push(Edge::pipe(from, to, lambda));
        self
    }

    pub fn compressor(mut self, from: i64, to: i64, lambda: f64, alpha: f64, r: f64) -> Self {
        self.edges.push(Edge::compressor(from, to, lambda, alpha, r));
        self
    }

    pub fn edge(mut self, edge: Edge) -> Self {
        self.edges.push(edge);
        self
    }

    pub fn build(self) -> Result<Network> {
        Network::new(self.nodes, self.edges, self.slack_pi)
    }
}

/// Net flow out of every node (slack included, internal order) for flows `phi`.
pub fn node_balance(net: &Network, phi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; net.n() + 1];
    for (&(h, t), &f) in net.endpoints().iter().zip(phi) {
        out[h] += f;
        out[t] -= f;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_pipe(alpha: f64) -> Result<Network> {
        NetworkBuilder::new()
            .slack(0, 2.0)
            .node(1, -1.0)
            .compressor(0, 1, 1.0, alpha, 0.0)
            .build()
    }

    fn expect_validation(res: Result<Network>, needle: &str) {
        match res {
            Err(Error::Validation(msg)) => assert!(msg.contains(needle), "{msg}"),
            other => panic!("expected validation error containing {needle:?}, got {other:?}"),
        }
    }

    #[test]
    fn smallest_network() {
        let net = single_pipe(1.0).unwrap();
        assert_eq!((net.n(), net.m()), (1, 1));
        assert!(net.is_tree());
    }

    #[test]
    fn rejects_low_compression() {
        expect_validation(single_pipe(0.5), "compression ratio below 1");
    }

    #[test]
    fn triangle_dimensions() {
        let q2 = -(1.0 + 2f64.sqrt());
        let net = NetworkBuilder::new()
            .slack(0, 10.0)
            .node(1, 0.0)
            .node(2, q2)
            .pipe(0, 1, 1.0)
            .pipe(0, 2, 1.0)
            .pipe(1, 2, 1.0)
            .build()
            .unwrap();
        assert_eq!((net.n(), net.m(), net.loops()), (2, 3, 1));
    }

    #[test]
    fn rejects_structural_problems() {
        let two_slack = NetworkBuilder::new()
            .slack(0, 1.0)
            .slack(1, 1.0)
            .pipe(0, 1, 1.0)
            .build();
        expect_validation(two_slack, "exactly one slack");

        let disconnected = NetworkBuilder::new()
            .slack(0, 1.0)
            .node(1, -1.0)
            .node(2, 0.0)
            .node(3, 0.0)
            .pipe(0, 1, 1.0)
            .pipe(2, 3, 1.0)
            .build();
        expect_validation(disconnected, "disconnected");

        let parallel = NetworkBuilder::new()
            .slack(0, 1.0)
            .node(1, -1.0)
            .pipe(0, 1, 1.0)
            .pipe(1, 0, 1.0)
            .build();
        expect_validation(parallel, "duplicates");

        let bad_r = NetworkBuilder::new()
            .slack(0, 1.0)
            .node(1, -1.0)
            .compressor(0, 1, 1.0, 1.2, 1.5)
            .build();
        expect_validation(bad_r, "position");

        let bad_lambda = NetworkBuilder::new()
            .slack(0, 1.0)
            .node(1, -1.0)
            .pipe(0, 1, 0.0)
            .build();
        expect_validation(bad_lambda, "friction");

        let neg_slack = NetworkBuilder::new()
            .slack(0, -1.0)
            .node(1, -1.0)
            .pipe(0, 1, 1.0)
            .build();
        expect_validation(neg_slack, "negative");

        let unknown = NetworkBuilder::new()
            .slack(0, 1.0)
            .node(1, -1.0)
            .pipe(0, 7, 1.0)
            .build();
        expect_validation(unknown, "unknown node");
    }

    #[test]
    fn slack_is_internal_zero_regardless_of_position() {
        let net = NetworkBuilder::new()
            .node(5, -1.0)
            .slack(9, 3.0)
            .node(2, 0.5)
            .pipe(9, 5, 1.0)
            .pipe(5, 2, 1.0)
            .build()
            .unwrap();
        assert_eq!(net.node(0).id, 9);
        assert_eq!(net.node(1).id, 5);
        assert_eq!(net.node(2).id, 2);
        assert_eq!(net.endpoints(), &[(0, 1), (1, 2)]);
        assert_eq!(net.injections(), vec![-1.0, 0.5]);
    }

    #[test]
    fn positive_effective_friction() {
        for (alpha, r) in [(1.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.5, 0.3)] {
            let e = Edge::compressor(0, 1, 0.7, alpha, r);
            assert!(e.effective_friction() > 0.0);
        }
        // alpha = 2, r = 0, lambda = 1
        assert_eq!(Edge::compressor(0, 1, 1.0, 2.0, 0.0).effective_friction(), 1.0);
    }

    #[test]
    fn compression_scaling_leaves_plain_pipes() {
        let net = NetworkBuilder::new()
            .slack(0, 1.0)
            .node(1, -1.0)
            .node(2, -1.0)
            .pipe(0, 1, 1.0)
            .compressor(1, 2, 1.0, 1.5, 0.5)
            .build()
            .unwrap();
        let scaled = net.with_compression_scaled(2.0).unwrap();
        assert_eq!(scaled.edges()[0].alpha, 1.0);
        assert_eq!(scaled.edges()[1].alpha, 3.0);
    }
}
