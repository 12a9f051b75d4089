//! Extragradient solver for the monotone variational inequality and the
//! three-way certification of its result.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::context::OperatorContext;
use crate::domain::{DomainSpec, ProjectionOptions};
use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::{eval_f, eval_fw, GasState, ScalingMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViOptions {
    /// Target natural residual.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Initial and maximal step.
    pub step_init: f64,
    /// Step shrink factor in `(0, 1)`.
    pub backtrack: f64,
    /// Tolerance on `| |phi| - psi |`.
    pub eq_tol: f64,
    /// Tolerance on the pressure recovery residual and on `pi >= 0`.
    pub pi_tol: f64,
    pub projection: ProjectionOptions,
}

impl Default for ViOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            max_iters: 200_000,
            step_init: 1.0,
            backtrack: 0.5,
            eq_tol: 1e-6,
            pi_tol: 1e-6,
            projection: ProjectionOptions::default(),
        }
    }
}

impl ViOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.step_init > 0.0) || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidArgument(
                "epsilon and step_init must be positive and backtrack in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViResult {
    pub state: GasState,
    /// Natural residual `||x - P(x - tau F_W(x))|| / tau` at the last iterate.
    pub residual: f64,
    pub iters: usize,
    pub converged: bool,
}

/// States kept for the divergence report.
const TRAJECTORY_LEN: usize = 8;

/// Extragradient iteration with backtracking on the step.
///
/// Starts from the projection of `start` (or of the zero state).
pub fn solve_vi(
    ctx: &OperatorContext,
    w: &ScalingMatrix,
    spec: &DomainSpec,
    start: Option<&GasState>,
    opts: &ViOptions,
) -> Result<ViResult> {
    opts.validate()?;
    if w.dim() != ctx.dim() {
        return Err(Error::Dimension {
            what: "scaling matrix",
            expected: ctx.dim(),
            found: w.dim(),
        });
    }
    let (n, m) = (ctx.n(), ctx.m());
    let zero = GasState::zeros(n, m);
    let proj = |v: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(spec
            .project(ctx, &GasState::from_vector(n, m, v), &opts.projection)?
            .to_vector())
    };
    let op = |v: &DVector<f64>| eval_fw(ctx, w, &GasState::from_vector(n, m, v));

    let mut x = proj(&start.unwrap_or(&zero).to_vector())?;
    let mut tau = opts.step_init;
    let mut trajectory: VecDeque<GasState> = VecDeque::with_capacity(TRAJECTORY_LEN);
    let mut residual = f64::INFINITY;
    let mut iters = 0;

    while iters < opts.max_iters {
        let fx = op(&x);
        let (y, fy) = loop {
            let y = proj(&(&x - &fx * tau))?;
            let fy = op(&y);
            let dist = (&x - &y).norm();
            residual = dist / tau;
            if residual <= opts.epsilon || tau * (&fx - &fy).norm() <= 0.9 * dist {
                break (y, fy);
            }
            tau *= opts.backtrack;
            if tau < 1e-300 {
                return Err(diverged(iters, trajectory, &x, n, m));
            }
        };
        if residual <= opts.epsilon {
            return Ok(ViResult {
                state: GasState::from_vector(n, m, &x),
                residual,
                iters,
                converged: true,
            });
        }
        let next = proj(&(&x - &fy * tau))?;
        let _ = y;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(diverged(iters, trajectory, &next, n, m));
        }
        if trajectory.len() == TRAJECTORY_LEN {
            trajectory.pop_front();
        }
        trajectory.push_back(GasState::from_vector(n, m, &x));
        x = next;
        tau = (tau / libm::sqrt(opts.backtrack)).min(opts.step_init);
        iters += 1;
    }
    Ok(ViResult {
        state: GasState::from_vector(n, m, &x),
        residual,
        iters,
        converged: false,
    })
}

fn diverged(iteration: usize, trajectory: VecDeque<GasState>, last: &DVector<f64>, n: usize, m: usize) -> Error {
    let mut trajectory: Vec<GasState> = trajectory.into_iter().collect();
    trajectory.push(GasState::from_vector(n, m, last));
    Error::Diverged { iteration, trajectory }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Solution,
    NoSolutionInDomain,
    Inconclusive,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Solution => "Solution",
            Self::NoSolutionInDomain => "NoSolutionInDomain",
            Self::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub vi_residual: f64,
    /// `max | |phi| - psi |`.
    pub flow_eq_residual: f64,
    /// `max |A_alpha pi + c0 - b phi psi|` after least-squares recovery.
    pub pressure_ls_residual: f64,
    pub min_pi: f64,
    /// `max (pi - pi_max)`, nonpositive when the caps hold.
    pub pi_cap_excess: f64,
    /// `||F(state)||_inf` for the reported state.
    pub operator_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certification {
    pub status: Status,
    /// VI state with the recovered pressures substituted.
    pub state: GasState,
    pub residuals: Residuals,
}

/// Classifies a VI result.
///
/// `certified` says whether the scaling was certified monotone on `spec`;
/// without it a failed check is only `Inconclusive`.
pub fn certify(
    ctx: &OperatorContext,
    vi: &ViResult,
    spec: &DomainSpec,
    certified: bool,
    opts: &ViOptions,
) -> Certification {
    let z = &vi.state;
    let m = ctx.m();
    let flow_eq_residual = (0..m).map(|k| (z.phi[k].abs() - z.psi[k]).abs()).fold(0.0, f64::max);
    let drop = ctx.friction.component_mul(&z.phi).component_mul(&z.psi);
    let rhs = &drop - &ctx.c0;
    let pi = linalg::least_squares(&ctx.a_alpha, &rhs);
    let pressure_ls_residual = (&ctx.a_alpha * &pi - &rhs).amax();
    let min_pi = pi.min();
    let pi_cap_excess = (&pi - &spec.pi_max).max();

    let checks_pass = flow_eq_residual <= opts.eq_tol
        && pressure_ls_residual <= opts.pi_tol
        && min_pi >= -opts.pi_tol
        && pi_cap_excess <= opts.pi_tol;
    let clamped = pi.map(|p| p.max(0.0));
    let state = GasState::new(clamped, z.phi.clone(), z.psi.clone());
    let operator_residual = eval_f(ctx, &state).amax();

    let status = if !vi.converged {
        Status::Inconclusive
    } else if checks_pass {
        Status::Solution
    } else if certified {
        Status::NoSolutionInDomain
    } else {
        Status::Inconclusive
    };
    Certification {
        status,
        state,
        residuals: Residuals {
            vi_residual: vi.residual,
            flow_eq_residual,
            pressure_ls_residual,
            min_pi,
            pi_cap_excess,
            operator_residual,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::{build_w_tree, max_gamma, SearchOptions};
    use crate::domain::DomainKind;
    use crate::network::NetworkBuilder;

    fn single_pipe() -> OperatorContext {
        let net = NetworkBuilder::new()
            .slack(0, 2.0)
            .node(1, -1.0)
            .pipe(0, 1, 1.0)
            .build()
            .unwrap();
        OperatorContext::new(&net).unwrap()
    }

    fn triangle() -> OperatorContext {
        let net = NetworkBuilder::new()
            .slack(0, 10.0)
            .node(1, 0.0)
            .node(2, -(1.0 + 2f64.sqrt()))
            .pipe(0, 1, 1.0)
            .pipe(0, 2, 1.0)
            .pipe(1, 2, 1.0)
            .build()
            .unwrap();
        OperatorContext::new(&net).unwrap()
    }

    fn spec(ctx: &OperatorContext, kind: DomainKind, beta: f64, gamma: f64) -> DomainSpec {
        DomainSpec::new(kind, beta, gamma, ctx.default_pi_caps()).unwrap()
    }

    #[test]
    fn single_pipe_converges_to_known_solution() {
        let ctx = single_pipe();
        let w = build_w_tree(&ctx, 1e-10).unwrap();
        let s = spec(&ctx, DomainKind::BetaGamma, 0.5, 4.0);
        let opts = ViOptions::default();
        let vi = solve_vi(&ctx, &w, &s, None, &opts).unwrap();
        assert!(vi.converged && vi.residual <= 1e-8);
        let cert = certify(&ctx, &vi, &s, true, &opts);
        assert_eq!(cert.status, Status::Solution);
        for (got, want) in [
            (cert.state.pi[0], 1.0),
            (cert.state.phi[0], 1.0),
            (cert.state.psi[0], 1.0),
        ] {
            assert!((got - want).abs() < 1e-6);
        }
    }

    #[test]
    fn triangle_matches_closed_form() {
        let ctx = triangle();
        let w = build_w_tree(&ctx, 1e-10).unwrap();
        let s = spec(&ctx, DomainKind::Beta, 1e-6, f64::INFINITY);
        let opts = ViOptions::default();
        let vi = solve_vi(&ctx, &w, &s, None, &opts).unwrap();
        let cert = certify(&ctx, &vi, &s, true, &opts);
        assert_eq!(cert.status, Status::Solution, "{:?}", cert.residuals);
        let r2 = 2f64.sqrt();
        for (got, want) in cert.state.phi.iter().zip([1.0, r2, 1.0]) {
            assert!((got - want).abs() < 1e-6);
        }
        assert!((cert.state.pi[0] - 9.0).abs() < 1e-6 && (cert.state.pi[1] - 8.0).abs() < 1e-6);
        assert!(cert.residuals.pressure_ls_residual < 1e-9);
    }

    #[test]
    fn beta_above_all_flows_has_no_solution() {
        let ctx = single_pipe();
        let w = build_w_tree(&ctx, 1e-10).unwrap();
        let s = spec(&ctx, DomainKind::BetaGamma, 2.0, 4.0);
        let opts = ViOptions::default();
        let vi = solve_vi(&ctx, &w, &s, None, &opts).unwrap();
        assert!(vi.converged);
        let cert = certify(&ctx, &vi, &s, true, &opts);
        assert_eq!(cert.status, Status::NoSolutionInDomain);
        assert!(cert.residuals.flow_eq_residual > 0.5);
    }

    #[test]
    fn unconverged_is_inconclusive() {
        let ctx = triangle();
        let w = build_w_tree(&ctx, 1e-10).unwrap();
        let s = spec(&ctx, DomainKind::Beta, 1e-6, f64::INFINITY);
        let opts = ViOptions {
            max_iters: 2,
            ..ViOptions::default()
        };
        let vi = solve_vi(&ctx, &w, &s, None, &opts).unwrap();
        assert!(!vi.converged);
        assert_eq!(certify(&ctx, &vi, &s, true, &opts).status, Status::Inconclusive);
    }

    #[test]
    fn compressor_kite_matches_oracle() {
        let net = NetworkBuilder::new()
            .slack(0, 10.0)
            .node(1, -1.0)
            .node(2, -0.3)
            .node(3, -0.8)
            .pipe(0, 1, 1.0)
            .pipe(0, 2, 1.0)
            .compressor(1, 2, 1.0, 1.2, 0.5)
            .pipe(2, 3, 1.0)
            .pipe(1, 3, 1.0)
            .build()
            .unwrap();
        let ctx = OperatorContext::new(&net).unwrap();
        let cert = max_gamma(&ctx, &SearchOptions::default()).unwrap();
        let sols = crate::oracle::multistart(&ctx, &crate::oracle::OracleOptions::default());
        assert_eq!(sols.len(), 1);
        let z = &sols[0];
        let (lo, hi) = (z.psi.min(), z.psi.max());
        assert!(hi / lo < cert.gamma, "flow ratio {} vs gamma {}", hi / lo, cert.gamma);
        let beta = libm::sqrt(lo * hi / cert.gamma);
        let s = DomainSpec::new(DomainKind::BetaGamma, beta, cert.gamma, ctx.default_pi_caps()).unwrap();
        let opts = ViOptions::default();
        let vi = solve_vi(&ctx, &cert.scaling, &s, None, &opts).unwrap();
        let c = certify(&ctx, &vi, &s, true, &opts);
        assert_eq!(c.status, Status::Solution, "{:?}", c.residuals);
        assert!((&c.state.phi - &z.phi).amax() < 1e-6);
        assert!((&c.state.pi - &z.pi).amax() < 1e-6);
        assert!(c.residuals.operator_residual < 1e-6);
    }

    #[test]
    fn iterates_approach_solution_monotonically() {
        let ctx = triangle();
        let w = build_w_tree(&ctx, 1e-10).unwrap();
        let s = spec(&ctx, DomainKind::Beta, 1e-6, f64::INFINITY);
        let r2 = 2f64.sqrt();
        let star = GasState::from_slices(&[9.0, 8.0], &[1.0, r2, 1.0], &[1.0, r2, 1.0]);
        let start = GasState::from_slices(&[3.0, 3.0], &[-2.0, 0.5, 4.0], &[2.0, 1.0, 4.0]);
        let mut x = s.project(&ctx, &start, &ProjectionOptions::default()).unwrap();
        // pi never moves, so measure the flow part only.
        let gap = |z: &GasState| ((&z.phi - &star.phi).norm_squared() + (&z.psi - &star.psi).norm_squared()).sqrt();
        let mut last = gap(&x);
        let first = last;
        for _ in 0..200 {
            let opts = ViOptions {
                max_iters: 1,
                ..ViOptions::default()
            };
            x = solve_vi(&ctx, &w, &s, Some(&x), &opts).unwrap().state;
            let g = gap(&x);
            assert!(g <= last + 1e-12, "{g} > {last}");
            last = g;
        }
        assert!(last < 1e-3 * first, "{last} vs {first}");
    }
}
