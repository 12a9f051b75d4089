//! Scaling matrices that certify monotonicity: the closed form for trees and
//! uncompressed networks, otherwise the largest `gamma` found by bisection.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::context::OperatorContext;
use crate::error::{Error, Result};
use crate::lmi::{self, BarrierBackend, BarrierOptions, FeasibilityBackend, LmiWitness, ProbeOutcome};
use crate::operator::{sym_psd_witness, GasState, ScalingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    /// Valid for every `psi >= beta`, no cone or ratio bound needed.
    TreeExact,
    /// Valid on `|phi| <= psi`, `beta <= psi <= gamma beta`.
    GammaBounded,
}

impl CertificateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::TreeExact => "tree_exact",
            Self::GammaBounded => "gamma_bounded",
        }
    }
}

/// One probe of the bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionStep {
    pub gamma: f64,
    pub feasible: bool,
    /// `"feasible"`, `"infeasible"` or `"stagnated"`.
    pub outcome: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainCertificate {
    pub kind: CertificateKind,
    /// Certified ratio bound; infinite for [`CertificateKind::TreeExact`].
    pub gamma: f64,
    pub cap_limited: bool,
    pub scaling: ScalingMatrix,
    pub witness: Option<LmiWitness>,
    /// Residual of the closed-form condition.
    pub tree_residual: f64,
    pub trace: Vec<BisectionStep>,
    /// Smallest `lambda_min(Sym(W J0))` seen in the sampling post-check.
    pub sampled_min_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub gamma_cap: f64,
    /// Relative width at which bisection stops.
    pub tol_bisect: f64,
    /// Tolerance for the closed-form condition.
    pub tree_tol: f64,
    /// States sampled to validate a certificate.
    pub check_samples: usize,
    pub seed: u64,
    pub barrier: BarrierOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            gamma_cap: 1e4,
            tol_bisect: 1e-2,
            tree_tol: 1e-10,
            check_samples: 100,
            seed: 0,
            barrier: BarrierOptions::default(),
        }
    }
}

/// Result of [`tree_condition`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeCondition {
    pub holds: bool,
    /// `||A_alpha^T (A^T (A A^T)^-1 A - I)||_F`.
    pub residual_norm: f64,
}

/// Checks whether the closed-form scaling applies.
///
/// Holds for trees of any compression and for any topology without compression.
pub fn tree_condition(ctx: &OperatorContext, tol: f64) -> TreeCondition {
    let residual_norm = (ctx.a_alpha.transpose() * ctx.cycle_projector()).norm();
    TreeCondition {
        holds: residual_norm <= tol * (1.0 + ctx.a_alpha.norm()),
        residual_norm,
    }
}

/// `W = blockdiag(A_alpha^T A^T (A A^T)^-1, diag(b), diag(b))`.
pub fn build_w_tree(ctx: &OperatorContext, tol: f64) -> Result<ScalingMatrix> {
    let cond = tree_condition(ctx, tol);
    if !cond.holds {
        return Err(Error::Precondition(format!(
            "closed-form scaling needs a tree or an uncompressed network (residual {:e})",
            cond.residual_norm
        )));
    }
    let wa = ctx.a_alpha.transpose() * ctx.incidence_pinv();
    let b = &ctx.friction;
    ScalingMatrix::block(wa, DMatrix::from_diagonal(b), b.clone())
}

/// Largest certified `gamma` up to `opts.gamma_cap`.
pub fn max_gamma(ctx: &OperatorContext, opts: &SearchOptions) -> Result<DomainCertificate> {
    if !(opts.gamma_cap > 1.0) || !(opts.tol_bisect > 0.0) {
        return Err(Error::InvalidArgument(
            "gamma_cap must exceed 1 and tol_bisect must be positive".into(),
        ));
    }
    let cond = tree_condition(ctx, opts.tree_tol);
    if cond.holds {
        return tree_certificate(ctx, opts, cond.residual_norm);
    }
    let mut backend = BarrierBackend::new(ctx, opts.barrier)?;
    let (gamma, cap_limited, trace) = bisect(&mut backend, opts)?;
    finish(ctx, &mut backend, gamma, cap_limited, trace, cond.residual_norm, opts)
}

/// Certificate for a user-chosen `gamma` (no bisection).
pub fn certificate_for_gamma(ctx: &OperatorContext, gamma: f64, opts: &SearchOptions) -> Result<DomainCertificate> {
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument("gamma must be finite and greater than 1".into()));
    }
    let cond = tree_condition(ctx, opts.tree_tol);
    if cond.holds {
        let mut cert = tree_certificate(ctx, opts, cond.residual_norm)?;
        cert.gamma = gamma;
        return Ok(cert);
    }
    let mut backend = BarrierBackend::new(ctx, opts.barrier)?;
    finish(ctx, &mut backend, gamma, false, Vec::new(), cond.residual_norm, opts)
}

fn tree_certificate(ctx: &OperatorContext, opts: &SearchOptions, residual: f64) -> Result<DomainCertificate> {
    let scaling = build_w_tree(ctx, opts.tree_tol)?;
    let sampled = sample_check(ctx, &scaling, None, opts)?;
    Ok(DomainCertificate {
        kind: CertificateKind::TreeExact,
        gamma: f64::INFINITY,
        cap_limited: true,
        scaling,
        witness: None,
        tree_residual: residual,
        trace: Vec::new(),
        sampled_min_eigenvalue: sampled,
    })
}

fn record(trace: &mut Vec<BisectionStep>, gamma: f64, outcome: &ProbeOutcome) -> bool {
    trace.push(BisectionStep {
        gamma,
        feasible: outcome.is_feasible(),
        outcome: outcome.label(),
    });
    outcome.is_feasible()
}

/// Doubling from 2 to bracket the boundary, then geometric bisection.
fn bisect<B: FeasibilityBackend>(backend: &mut B, opts: &SearchOptions) -> Result<(f64, bool, Vec<BisectionStep>)> {
    let mut trace = Vec::new();
    let floor = 1.0 + opts.tol_bisect;
    let start = 2.0f64.min(opts.gamma_cap);
    let (mut lo, mut hi);
    if record(&mut trace, start, &backend.probe(start, true)) {
        lo = start;
        loop {
            if lo >= opts.gamma_cap {
                return Ok((opts.gamma_cap, true, trace));
            }
            let next = (2.0 * lo).min(opts.gamma_cap);
            if record(&mut trace, next, &backend.probe(next, true)) {
                lo = next;
            } else {
                hi = next;
                break;
            }
        }
    } else {
        if !record(&mut trace, floor, &backend.probe(floor, true)) {
            return Err(Error::NoCertificate(format!(
                "scaling LMI infeasible at gamma = {floor}"
            )));
        }
        lo = floor;
        hi = start;
    }
    while hi / lo > 1.0 + opts.tol_bisect {
        let mid = libm::sqrt(lo * hi);
        if record(&mut trace, mid, &backend.probe(mid, true)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, false, trace))
}

fn finish(
    ctx: &OperatorContext,
    backend: &mut BarrierBackend,
    gamma: f64,
    cap_limited: bool,
    mut trace: Vec<BisectionStep>,
    tree_residual: f64,
    opts: &SearchOptions,
) -> Result<DomainCertificate> {
    // Full solve at the chosen gamma for a well-centered witness.
    let outcome = backend.probe(gamma, false);
    let ProbeOutcome::Feasible(witness) = outcome else {
        record(&mut trace, gamma, &outcome);
        return Err(Error::NoCertificate(format!(
            "scaling LMI {} at gamma = {gamma}",
            outcome.label()
        )));
    };
    let check = lmi::verify_witness(ctx, &witness)?;
    if !check.valid {
        return Err(Error::NoCertificate(format!("witness failed verification: {check:?}")));
    }
    let scaling = ScalingMatrix::block(witness.wa.clone(), witness.wb.clone(), witness.wc.clone())?;
    let sampled = sample_check(ctx, &scaling, Some(gamma), opts)?;
    Ok(DomainCertificate {
        kind: CertificateKind::GammaBounded,
        gamma,
        cap_limited,
        scaling,
        witness: Some(witness),
        tree_residual,
        trace,
        sampled_min_eigenvalue: sampled,
    })
}

/// Draws a state with `1 <= psi <= gamma` and `|phi| <= psi`, or `0 <= psi`
/// and arbitrary `phi` when `gamma` is `None`. Half of the edges sit on a
/// vertex of their cell.
pub fn sample_cell_state<R: Rng>(ctx: &OperatorContext, gamma: Option<f64>, rng: &mut R) -> GasState {
    let (n, m) = (ctx.n(), ctx.m());
    let pi = DVector::from_fn(n, |_, _| rng.random_range(0.0..10.0));
    let mut phi = DVector::zeros(m);
    let mut psi = DVector::zeros(m);
    for k in 0..m {
        match gamma {
            Some(g) => {
                let vertex = rng.random_bool(0.5);
                psi[k] = if vertex {
                    if rng.random_bool(0.5) {
                        1.0
                    } else {
                        g
                    }
                } else {
                    rng.random_range(1.0..=g)
                };
                phi[k] = if vertex {
                    if rng.random_bool(0.5) {
                        psi[k]
                    } else {
                        -psi[k]
                    }
                } else {
                    rng.random_range(-psi[k]..=psi[k])
                };
            }
            None => {
                psi[k] = rng.random_range(0.0..10.0);
                phi[k] = rng.random_range(-10.0..10.0);
            }
        }
    }
    GasState::new(pi, phi, psi)
}

/// Smallest `lambda_min + tol` over sampled states; fails if any is negative.
fn sample_check(ctx: &OperatorContext, w: &ScalingMatrix, gamma: Option<f64>, opts: &SearchOptions) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = f64::INFINITY;
    for _ in 0..opts.check_samples {
        let z = sample_cell_state(ctx, gamma, &mut rng);
        let wit = sym_psd_witness(ctx, w, &z, None);
        worst = worst.min(wit.min_eigenvalue);
        if !wit.is_psd {
            return Err(Error::NoCertificate(format!(
                "sampled state violates monotonicity (lambda_min {:e})",
                wit.min_eigenvalue
            )));
        }
    }
    Ok(worst)
}
