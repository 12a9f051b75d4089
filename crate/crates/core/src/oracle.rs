//! Brute-force reference solver: damped Newton on `F(z) = 0` from many
//! random starts.

use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::context::OperatorContext;
use crate::operator::{eval_f, jacobian, GasState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub n_starts: usize,
    pub seed: u64,
    /// Residual tolerance, relative to `1 + max(||q||_inf, slack_pi)`.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Sufficient-decrease constant of the residual-norm backtracking.
    pub damping: f64,
    /// Two solutions closer than this in `(phi, psi)` (relative) are the same.
    pub dedupe_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            n_starts: 200,
            seed: 0,
            newton_tol: 1e-10,
            max_newton_iters: 200,
            damping: 1e-4,
            dedupe_tol: 1e-6,
        }
    }
}

fn scale(ctx: &OperatorContext) -> f64 {
    1.0 + ctx.injection.amax().max(ctx.slack_pi)
}

fn symmetrize(z: &mut GasState) {
    z.psi.apply(|v| *v = v.abs());
}

/// Damped Newton from `start`. Returns a solution with `psi = |phi|` and
/// `pi >= 0` (both to tolerance), or `None`.
pub fn newton_solve(ctx: &OperatorContext, start: &GasState, opts: &OracleOptions) -> Option<GasState> {
    if !start.is_finite() || start.check_dims(ctx).is_err() {
        return None;
    }
    let (n, m) = (ctx.n(), ctx.m());
    let tol = opts.newton_tol * scale(ctx);
    let mut z = start.clone();
    symmetrize(&mut z);
    let mut f = eval_f(ctx, &z);
    let mut perturbed = false;

    for _ in 0..opts.max_newton_iters {
        if f.amax() <= tol {
            break;
        }
        let j = jacobian(ctx, &z);
        let step = match j.lu().solve(&(-&f)) {
            Some(d) if d.iter().all(|v| v.is_finite()) => d,
            _ => {
                // Singular Jacobian: nudge the flows once, then give up.
                if perturbed {
                    return None;
                }
                perturbed = true;
                z.phi.apply(|v| *v += 1e-3 * (1.0 + v.abs()));
                symmetrize(&mut z);
                f = eval_f(ctx, &z);
                continue;
            }
        };
        let x = z.to_vector();
        let norm0 = f.norm();
        let mut t = 1.0;
        loop {
            let mut trial = GasState::from_vector(n, m, &(&x + &step * t));
            symmetrize(&mut trial);
            let ft = eval_f(ctx, &trial);
            if ft.norm() <= (1.0 - opts.damping * t) * norm0 || t < 1e-10 {
                z = trial;
                f = ft;
                break;
            }
            t *= 0.5;
        }
        if !z.is_finite() {
            return None;
        }
    }

    let coupled = (0..m).all(|k| (z.phi[k].abs() - z.psi[k]).abs() <= libm::sqrt(tol));
    let nonnegative = z.pi.iter().all(|&p| p >= -libm::sqrt(tol));
    (f.amax() <= tol && coupled && nonnegative).then_some(z)
}

/// Random start number `k`: `pi` uniform in `[0, pi_max]`, flows uniform in
/// `+-flow_scale`, `psi = |phi|`.
pub fn random_start(ctx: &OperatorContext, seed: u64, k: usize) -> GasState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    let caps = ctx.default_pi_caps();
    let flow = ctx.flow_scale();
    let pi = caps.map(|c| rng.random_range(0.0..=c));
    let phi = DVector::from_fn(ctx.m(), |_, _| rng.random_range(-flow..=flow));
    let psi = phi.abs();
    GasState::new(pi, phi, psi)
}

/// Distinct solutions found from `opts.n_starts` random starts, sorted by
/// `(phi, pi)` lexicographically.
pub fn multistart(ctx: &OperatorContext, opts: &OracleOptions) -> Vec<GasState> {
    let found = (0..opts.n_starts).filter_map(|k| newton_solve(ctx, &random_start(ctx, opts.seed, k), opts));
    dedupe(found, opts.dedupe_tol)
}

/// Merges solutions that agree in `(phi, psi)` and sorts the rest.
pub fn dedupe(found: impl IntoIterator<Item = GasState>, tol: f64) -> Vec<GasState> {
    let mut out: Vec<GasState> = Vec::new();
    for z in found {
        let same = |o: &GasState| {
            let d = (&o.phi - &z.phi).amax().max((&o.psi - &z.psi).amax());
            d <= tol * (1.0 + z.phi.amax())
        };
        if !out.iter().any(same) {
            out.push(z);
        }
    }
    out.sort_by(compare_states);
    out
}

fn compare_states(a: &GasState, b: &GasState) -> Ordering {
    a.phi
        .iter()
        .chain(a.pi.iter())
        .zip(b.phi.iter().chain(b.pi.iter()))
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkBuilder;
    use crate::operator::residual_inf;

    fn ctx(net: crate::Result<crate::Network>) -> OperatorContext {
        OperatorContext::new(&net.unwrap()).unwrap()
    }

    fn single_pipe(slack_pi: f64, q: f64) -> OperatorContext {
        ctx(NetworkBuilder::new()
            .slack(0, slack_pi)
            .node(1, q)
            .pipe(0, 1, 1.0)
            .build())
    }

    #[test]
    fn single_pipe_from_far_start() {
        let c = single_pipe(2.0, -1.0);
        let z = newton_solve(
            &c,
            &GasState::from_slices(&[5.0], &[0.1], &[0.1]),
            &OracleOptions::default(),
        )
        .unwrap();
        for v in [z.pi[0], z.phi[0], z.psi[0]] {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn solution_is_a_fixed_point() {
        let c = single_pipe(2.0, -1.0);
        let sol = GasState::from_slices(&[1.0], &[1.0], &[1.0]);
        let opts = OracleOptions {
            max_newton_iters: 2,
            ..OracleOptions::default()
        };
        assert_eq!(newton_solve(&c, &sol, &opts), Some(sol));
    }

    #[test]
    fn low_slack_pressure_has_no_solution() {
        // pi_1 = 1 - 2^2 < 0.
        let c = single_pipe(1.0, -2.0);
        assert!(multistart(&c, &OracleOptions::default()).is_empty());
    }

    #[test]
    fn triangle_has_one_solution() {
        let c = ctx(NetworkBuilder::new()
            .slack(0, 10.0)
            .node(1, 0.0)
            .node(2, -(1.0 + 2f64.sqrt()))
            .pipe(0, 1, 1.0)
            .pipe(1, 2, 1.0)
            .pipe(0, 2, 1.0)
            .build());
        let sols = multistart(&c, &OracleOptions::default());
        assert_eq!(sols.len(), 1);
        let z = &sols[0];
        for (got, want) in z.phi.iter().zip([1.0, 1.0, 2f64.sqrt()]) {
            assert!((got - want).abs() < 1e-9);
        }
        assert!((z.pi[0] - 9.0).abs() < 1e-9 && (z.pi[1] - 8.0).abs() < 1e-9);
    }

    #[test]
    fn tree_has_one_solution() {
        let c = ctx(NetworkBuilder::new()
            .slack(0, 50.0)
            .node(1, -1.0)
            .node(2, -0.5)
            .node(3, -2.0)
            .pipe(0, 1, 1.0)
            .compressor(1, 2, 0.7, 1.4, 0.3)
            .pipe(1, 3, 1.5)
            .build());
        let sols = multistart(&c, &OracleOptions::default());
        assert_eq!(sols.len(), 1);
        assert!(residual_inf(&c, &sols[0]) < 1e-8);
    }

    #[test]
    fn zero_injection_gives_zero_flow() {
        let c = ctx(NetworkBuilder::new()
            .slack(0, 4.0)
            .node(1, 0.0)
            .node(2, 0.0)
            .compressor(0, 1, 1.0, 1.5, 0.5)
            .pipe(1, 2, 1.0)
            .build());
        let sols = multistart(&c, &OracleOptions::default());
        assert_eq!(sols.len(), 1);
        let z = &sols[0];
        assert!(z.phi.amax() < 1e-4);
        // alpha pi_head = pi_tail along the chain.
        assert!((z.pi[0] - 6.0).abs() < 1e-6 && (z.pi[1] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn multistart_is_reproducible() {
        let c = single_pipe(2.0, -1.0);
        let opts = OracleOptions {
            n_starts: 20,
            seed: 7,
            ..OracleOptions::default()
        };
        assert_eq!(multistart(&c, &opts), multistart(&c, &opts));
        assert_ne!(random_start(&c, 7, 0), random_start(&c, 7, 1));
    }

    /// Solutions of the reduced system `A phi = q`, `A_alpha pi + c0 = b s phi^2`
    /// over every sign pattern `s`, keeping those whose flows carry the sign `s`.
    fn sign_enumerated(c: &OperatorContext) -> Vec<GasState> {
        let (n, m) = (c.n(), c.m());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut found = Vec::new();
        for mask in 0..1u32 << m {
            let s = DVector::from_fn(m, |k, _| if mask >> k & 1 == 1 { -1.0 } else { 1.0 });
            for _ in 0..20 {
                let mut pi = DVector::from_fn(n, |_, _| rng.random_range(0.0..c.slack_pi));
                let mut phi = DVector::from_fn(m, |k, _| s[k] * rng.random_range(0.1..2.0));
                for _ in 0..100 {
                    let drop = c.friction.component_mul(&s).component_mul(&phi).component_mul(&phi);
                    let mut f = DVector::zeros(n + m);
                    f.rows_mut(0, n).copy_from(&(&c.incidence * &phi - &c.injection));
                    f.rows_mut(n, m).copy_from(&(&c.a_alpha * &pi + &c.c0 - drop));
                    if f.amax() < 1e-12 {
                        break;
                    }
                    let mut j = nalgebra::DMatrix::zeros(n + m, n + m);
                    j.view_mut((0, n), (n, m)).copy_from(&c.incidence);
                    j.view_mut((n, 0), (m, n)).copy_from(&c.a_alpha);
                    for k in 0..m {
                        j[(n + k, n + k)] = -2.0 * c.friction[k] * s[k] * phi[k];
                    }
                    let Some(d) = j.lu().solve(&(-f)) else { break };
                    pi += d.rows(0, n);
                    phi += d.rows(n, m);
                }
                let z = GasState::new(pi, phi.clone(), phi.abs());
                let signs_ok = (0..m).all(|k| phi[k] * s[k] >= -1e-9);
                if signs_ok && residual_inf(c, &z) < 1e-9 && z.pi.iter().all(|&p| p >= -1e-9) {
                    found.push(z);
                }
            }
        }
        dedupe(found, 1e-6)
    }

    #[test]
    fn multistart_agrees_with_sign_enumeration() {
        let nets = [
            NetworkBuilder::new()
                .slack(0, 10.0)
                .node(1, 0.0)
                .node(2, -(1.0 + 2f64.sqrt()))
                .pipe(0, 1, 1.0)
                .pipe(1, 2, 1.0)
                .pipe(0, 2, 1.0)
                .build(),
            NetworkBuilder::new()
                .slack(0, 10.0)
                .node(1, -1.0)
                .node(2, -0.3)
                .node(3, -0.8)
                .pipe(0, 1, 1.0)
                .pipe(0, 2, 1.0)
                .compressor(1, 2, 1.0, 1.1, 0.5)
                .pipe(2, 3, 1.0)
                .pipe(1, 3, 1.0)
                .build(),
            NetworkBuilder::new()
                .slack(0, 50.0)
                .node(1, -1.0)
                .node(2, 0.5)
                .node(3, -2.0)
                .pipe(0, 1, 1.0)
                .compressor(1, 2, 0.7, 1.4, 0.3)
                .pipe(1, 3, 1.5)
                .build(),
        ];
        for net in nets {
            let c = ctx(net);
            let newton = multistart(&c, &OracleOptions::default());
            let enumerated = sign_enumerated(&c);
            assert_eq!(newton.len(), enumerated.len());
            for (a, b) in newton.iter().zip(&enumerated) {
                assert!((&a.phi - &b.phi).amax() < 1e-8 && (&a.pi - &b.pi).amax() < 1e-8);
            }
        }
    }
}
