use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::network::Network;

/// Matrices and vectors needed to evaluate the gas-flow operator.
///
/// Rows of the incidence-type matrices run over the non-slack nodes `1..=n`;
/// columns over edges in input order. The slack pressure enters only through
/// `c0`, so that `(a_alpha * pi + c0)_e = alpha_e * pi_head - pi_tail` with
/// `pi_0 = slack_pi`.
#[derive(Debug, Clone)]
pub struct OperatorContext {
    /// `A` (n x m): `+1` where the edge leaves the node, `-1` where it enters.
    pub incidence: DMatrix<f64>,
    /// `B` (n x m): `+1` where the edge leaves the node.
    pub head_indicator: DMatrix<f64>,
    /// `C` (n x m): `-1` where the edge enters the node.
    pub tail_indicator: DMatrix<f64>,
    /// `A_alpha` (m x n): `alpha_e` at the head column, `-1` at the tail column.
    pub a_alpha: DMatrix<f64>,
    /// Effective friction `b = (alpha r + 1 - r) lambda`.
    pub friction: DVector<f64>,
    /// Slack-pressure constants.
    pub c0: DVector<f64>,
    /// Non-slack injections `q`.
    pub injection: DVector<f64>,
    pub slack_pi: f64,
    /// Per-node squared-pressure caps from the network file, if any.
    pub node_pi_max: Vec<Option<f64>>,
    pub alpha: DVector<f64>,
    gram: Cholesky<f64, Dyn>,
}

impl OperatorContext {
    pub fn new(net: &Network) -> Result<Self> {
        let (n, m) = (net.n(), net.m());
        let mut incidence = DMatrix::zeros(n, m);
        let mut head_indicator = DMatrix::zeros(n, m);
        let mut tail_indicator = DMatrix::zeros(n, m);
        let mut a_alpha = DMatrix::zeros(m, n);
        let mut c0 = DVector::zeros(m);
        let slack_pi = net.slack_pi();

        for (k, (&(head, tail), edge)) in net.endpoints().iter().zip(net.edges()).enumerate() {
            if head == 0 {
                c0[k] += edge.alpha * slack_pi;
            } else {
                incidence[(head - 1, k)] = 1.0;
                head_indicator[(head - 1, k)] = 1.0;
                a_alpha[(k, head - 1)] = edge.alpha;
            }
            if tail == 0 {
                c0[k] -= slack_pi;
            } else {
                incidence[(tail - 1, k)] = -1.0;
                tail_indicator[(tail - 1, k)] = -1.0;
                a_alpha[(k, tail - 1)] = -1.0;
            }
        }

        let friction = DVector::from_iterator(m, net.edges().iter().map(|e| e.effective_friction()));
        let alpha = DVector::from_iterator(m, net.edges().iter().map(|e| e.alpha));
        let gram = Cholesky::new(&incidence * incidence.transpose())
            .ok_or(Error::RankDeficient("incidence matrix lacks full row rank"))?;

        Ok(Self {
            incidence,
            head_indicator,
            tail_indicator,
            a_alpha,
            friction,
            c0,
            injection: DVector::from_vec(net.injections()),
            slack_pi,
            node_pi_max: (1..=n).map(|i| net.node(i).pi_max).collect(),
            alpha,
            gram,
        })
    }

    pub fn n(&self) -> usize {
        self.incidence.nrows()
    }

    pub fn m(&self) -> usize {
        self.incidence.ncols()
    }

    /// State dimension `n + 2m`.
    pub fn dim(&self) -> usize {
        self.n() + 2 * self.m()
    }

    /// Solves `(A A^T) x = rhs`.
    pub fn solve_gram(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.gram.solve(rhs)
    }

    /// `A^T (A A^T)^{-1}` (m x n).
    pub fn incidence_pinv(&self) -> DMatrix<f64> {
        let inv = self.gram.inverse();
        self.incidence.transpose() * inv
    }

    /// Orthogonal projector onto the cycle space `ker A` (m x m).
    pub fn cycle_projector(&self) -> DMatrix<f64> {
        let m = self.m();
        DMatrix::identity(m, m) - self.incidence_pinv() * &self.incidence
    }

    /// Euclidean projection of a flow vector onto `{phi : A phi = q}`.
    pub fn project_flows(&self, phi: &DVector<f64>) -> DVector<f64> {
        let residual = &self.incidence * phi - &self.injection;
        phi - self.incidence.transpose() * self.solve_gram(&residual)
    }

    /// Total injection magnitude `||q||_1`, or 1 when all injections vanish.
    pub fn flow_scale(&self) -> f64 {
        let s = self.injection.iter().map(|v| v.abs()).sum::<f64>();
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// Squared-pressure caps: node caps where given, otherwise `10 * slack_pi`
    /// (or 10 when the slack pressure is zero).
    pub fn default_pi_caps(&self) -> DVector<f64> {
        let fallback = if self.slack_pi > 0.0 {
            10.0 * self.slack_pi
        } else {
            10.0
        };
        DVector::from_iterator(self.n(), self.node_pi_max.iter().map(|c| c.unwrap_or(fallback)))
    }
}
