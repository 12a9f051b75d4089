//! Monotonicity domains: membership tests and Euclidean projection.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::context::OperatorContext;
use crate::error::{Error, Result};
use crate::operator::GasState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    /// `psi >= beta`, flows only balanced.
    Beta,
    /// Adds `|phi| <= psi <= gamma beta`.
    BetaGamma,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Beta => "C_beta",
            Self::BetaGamma => "C_beta_gamma",
        }
    }
}

/// `{0 <= pi <= pi_max, A phi = q}` intersected with the per-edge cells of `kind`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub beta: f64,
    /// Ratio bound; may be infinite.
    pub gamma: f64,
    /// Per-node squared-pressure caps.
    pub pi_max: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub inside: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    pub max_sweeps: usize,
    /// Stop when successive iterates move by at most this much.
    pub tol: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 10_000,
            tol: 1e-10,
        }
    }
}

impl DomainSpec {
    pub fn new(kind: DomainKind, beta: f64, gamma: f64, pi_max: DVector<f64>) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        if !(gamma >= 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must be at least 1, got {gamma}")));
        }
        if pi_max.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidArgument("pi_max must be positive".into()));
        }
        Ok(Self {
            kind,
            beta,
            gamma,
            pi_max,
        })
    }

    /// Upper bound on `psi`, infinite for [`DomainKind::Beta`].
    pub fn psi_upper(&self) -> f64 {
        match self.kind {
            DomainKind::Beta => f64::INFINITY,
            DomainKind::BetaGamma => self.gamma * self.beta,
        }
    }

    fn check_dims(&self, ctx: &OperatorContext, z: &GasState) -> Result<()> {
        z.check_dims(ctx)?;
        if self.pi_max.len() != ctx.n() {
            return Err(Error::Dimension {
                what: "pi_max",
                expected: ctx.n(),
                found: self.pi_max.len(),
            });
        }
        Ok(())
    }

    pub fn membership(&self, ctx: &OperatorContext, z: &GasState, tol: f64) -> Result<Membership> {
        self.check_dims(ctx, z)?;
        let mut violations = Vec::new();
        let mut flag = |constraint: String, amount: f64| {
            if amount > tol {
                violations.push(Violation { constraint, amount });
            }
        };
        for i in 0..ctx.n() {
            flag(format!("pi >= 0 at node {}", i + 1), -z.pi[i]);
            flag(format!("pi <= pi_max at node {}", i + 1), z.pi[i] - self.pi_max[i]);
        }
        let balance = &ctx.incidence * &z.phi - &ctx.injection;
        for i in 0..ctx.n() {
            flag(format!("flow balance at node {}", i + 1), balance[i].abs());
        }
        let upper = self.psi_upper();
        for k in 0..ctx.m() {
            flag(format!("psi >= beta on edge {k}"), self.beta - z.psi[k]);
            if self.kind == DomainKind::BetaGamma {
                flag(format!("|phi| <= psi on edge {k}"), z.phi[k].abs() - z.psi[k]);
                flag(format!("psi <= gamma beta on edge {k}"), z.psi[k] - upper);
            }
        }
        Ok(Membership {
            inside: violations.is_empty(),
            violations,
        })
    }

    /// Projection onto the box-and-cell set, ignoring flow balance.
    fn project_cells(&self, z: &mut GasState) {
        for i in 0..z.pi.len() {
            z.pi[i] = z.pi[i].clamp(0.0, self.pi_max[i]);
        }
        let upper = self.psi_upper();
        for k in 0..z.phi.len() {
            match self.kind {
                DomainKind::Beta => z.psi[k] = z.psi[k].max(self.beta),
                DomainKind::BetaGamma => {
                    let (p, s) = project_edge_cell(z.phi[k], z.psi[k], self.beta, upper);
                    z.phi[k] = p;
                    z.psi[k] = s;
                }
            }
        }
    }

    /// Euclidean projection by Dykstra's method between the balanced-flow
    /// affine set and the product of pressure box and edge cells.
    pub fn project(&self, ctx: &OperatorContext, point: &GasState, opts: &ProjectionOptions) -> Result<GasState> {
        self.check_dims(ctx, point)?;
        let m = ctx.m();
        let mut x = point.clone();
        // Only the cell step needs a correction term: the affine step's
        // correction is normal to the affine set and cancels.
        let mut corr_phi = DVector::zeros(m);
        let mut corr_psi = DVector::zeros(m);
        let mut gap = f64::INFINITY;
        for _ in 0..opts.max_sweeps {
            let prev = x.clone();
            let y_phi = ctx.project_flows(&x.phi);
            let mut next = GasState::new(x.pi.clone(), &y_phi + &corr_phi, &x.psi + &corr_psi);
            self.project_cells(&mut next);
            corr_phi = &y_phi + &corr_phi - &next.phi;
            corr_psi = &x.psi + &corr_psi - &next.psi;
            x = next;
            let moved = (&x.phi - &prev.phi).norm() + (&x.psi - &prev.psi).norm() + (&x.pi - &prev.pi).norm();
            let infeas = (&ctx.incidence * &x.phi - &ctx.injection).norm();
            gap = moved.max(infeas);
            if !gap.is_finite() {
                break;
            }
            if gap <= opts.tol {
                return Ok(x);
            }
        }
        Err(Error::ProjectionNotConverged {
            sweeps: opts.max_sweeps,
            gap,
            last: x,
        })
    }
}

/// Exact Euclidean projection of `(phi, psi)` onto
/// `{|phi| <= psi, beta <= psi <= upper}`; `upper` may be infinite.
pub fn project_edge_cell(phi: f64, psi: f64, beta: f64, upper: f64) -> (f64, f64) {
    if phi.abs() <= psi && psi >= beta && psi <= upper {
        return (phi, psi);
    }
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let mut consider = |p: f64, s: f64| {
        let d = (p - phi) * (p - phi) + (s - psi) * (s - psi);
        if d < best.0 {
            best = (d, p, s);
        }
    };
    // Floor segment psi = beta.
    consider(phi.clamp(-beta, beta), beta);
    // Ceiling segment psi = upper.
    if upper.is_finite() {
        consider(phi.clamp(-upper, upper), upper);
    }
    // Cone faces phi = +-psi for psi in [beta, upper].
    for sign in [1.0, -1.0] {
        let t = (0.5 * (sign * phi + psi)).clamp(beta, upper);
        consider(sign * t, t);
    }
    (best.1, best.2)
}
