//! The gas-flow operator, its Jacobian and the scaled monotone operator.
//!
//! The state is `z = (pi, phi, psi)`: squared pressures at the non-slack
//! nodes, edge flows and auxiliary flow magnitudes. The operator is
//!
//! ```text
//! F(z) = ( A phi - q ;  A_alpha pi + c0 - b*phi*psi ;  (phi^2 - psi^2) / 2 )
//! ```
//!
//! The halved third block makes the Jacobian read
//! `[[0, A, 0]; [A_alpha, -diag(b psi), -diag(b phi)]; [0, diag(phi), -diag(psi)]]`
//! exactly, without changing the zero set.

use nalgebra::{DMatrix, DVector};

use crate::context::OperatorContext;
use crate::error::{Error, Result};
use crate::linalg;

/// A point `(pi, phi, psi)` of the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct GasState {
    pub pi: DVector<f64>,
    pub phi: DVector<f64>,
    pub psi: DVector<f64>,
}

impl GasState {
    pub fn new(pi: DVector<f64>, phi: DVector<f64>, psi: DVector<f64>) -> Self {
        Self { pi, phi, psi }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self::new(DVector::zeros(n), DVector::zeros(m), DVector::zeros(m))
    }

    pub fn from_slices(pi: &[f64], phi: &[f64], psi: &[f64]) -> Self {
        Self::new(
            DVector::from_row_slice(pi),
            DVector::from_row_slice(phi),
            DVector::from_row_slice(psi),
        )
    }

    /// Splits a concatenated `(pi, phi, psi)` vector.
    pub fn from_vector(n: usize, m: usize, v: &DVector<f64>) -> Self {
        debug_assert_eq!(v.len(), n + 2 * m);
        Self::new(
            v.rows(0, n).into_owned(),
            v.rows(n, m).into_owned(),
            v.rows(n + m, m).into_owned(),
        )
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let (n, m) = (self.pi.len(), self.phi.len());
        let mut v = DVector::zeros(n + 2 * m);
        v.rows_mut(0, n).copy_from(&self.pi);
        v.rows_mut(n, m).copy_from(&self.phi);
        v.rows_mut(n + m, m).copy_from(&self.psi);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.pi
            .iter()
            .chain(self.phi.iter())
            .chain(self.psi.iter())
            .all(|v| v.is_finite())
    }

    pub fn check_dims(&self, ctx: &OperatorContext) -> Result<()> {
        let checks = [
            ("pi", ctx.n(), self.pi.len()),
            ("phi", ctx.m(), self.phi.len()),
            ("psi", ctx.m(), self.psi.len()),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(Error::Dimension { what, expected, found });
            }
        }
        Ok(())
    }
}

/// Invertible scaling matrix `W` of size `n + 2m`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalingMatrix {
    /// `blockdiag(wa, wb, diag(wc))`.
    Block {
        wa: DMatrix<f64>,
        wb: DMatrix<f64>,
        wc: DVector<f64>,
    },
    Dense(DMatrix<f64>),
}

/// Smallest-to-largest singular value ratio below which `W` counts as singular.
pub const SINGULAR_RATIO: f64 = 1e-10;

impl ScalingMatrix {
    pub fn block(wa: DMatrix<f64>, wb: DMatrix<f64>, wc: DVector<f64>) -> Result<Self> {
        if !wa.is_square() || !wb.is_square() || wb.nrows() != wc.len() {
            return Err(Error::InvalidArgument(
                "scaling blocks must be square with matching diagonal block".into(),
            ));
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for block in [&wa, &wb] {
            if block.nrows() == 0 {
                continue;
            }
            let sv = block.clone().singular_values();
            lo = lo.min(sv.min());
            hi = hi.max(sv.max());
        }
        for &c in wc.iter() {
            lo = lo.min(c.abs());
            hi = hi.max(c.abs());
        }
        Self::check_ratio(lo, hi)?;
        Ok(Self::Block { wa, wb, wc })
    }

    pub fn dense(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::InvalidArgument("scaling matrix must be square".into()));
        }
        let sv = w.clone().singular_values();
        Self::check_ratio(sv.min(), sv.max())?;
        Ok(Self::Dense(w))
    }

    pub fn identity(dim: usize) -> Self {
        Self::Dense(DMatrix::identity(dim, dim))
    }

    fn check_ratio(lo: f64, hi: f64) -> Result<()> {
        let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
        if !(ratio > SINGULAR_RATIO) {
            return Err(Error::SingularScaling { ratio });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Block { wa, wb, .. } => wa.nrows() + 2 * wb.nrows(),
            Self::Dense(w) => w.nrows(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Self::Dense(w) => w.clone(),
            Self::Block { wa, wb, wc } => {
                let (n, m) = (wa.nrows(), wb.nrows());
                let mut w = DMatrix::zeros(n + 2 * m, n + 2 * m);
                w.view_mut((0, 0), (n, n)).copy_from(wa);
                w.view_mut((n, n), (m, m)).copy_from(wb);
                for (k, &c) in wc.iter().enumerate() {
                    w[(n + m + k, n + m + k)] = c;
                }
                w
            }
        }
    }

    /// `W v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Dense(w) => w * v,
            Self::Block { wa, wb, wc } => {
                let (n, m) = (wa.nrows(), wb.nrows());
                let mut out = DVector::zeros(n + 2 * m);
                out.rows_mut(0, n).copy_from(&(wa * v.rows(0, n)));
                out.rows_mut(n, m).copy_from(&(wb * v.rows(n, m)));
                out.rows_mut(n + m, m).copy_from(&wc.component_mul(&v.rows(n + m, m)));
                out
            }
        }
    }

    /// `W M`.
    pub fn mul_matrix(&self, mat: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Self::Dense(w) => w * mat,
            Self::Block { wa, wb, wc } => {
                let (n, m) = (wa.nrows(), wb.nrows());
                let mut out = DMatrix::zeros(mat.nrows(), mat.ncols());
                out.rows_mut(0, n).copy_from(&(wa * mat.rows(0, n)));
                out.rows_mut(n, m).copy_from(&(wb * mat.rows(n, m)));
                for k in 0..m {
                    let row = mat.row(n + m + k) * wc[k];
                    out.row_mut(n + m + k).copy_from(&row);
                }
                out
            }
        }
    }
}

/// Evaluates `F(z)`.
pub fn eval_f(ctx: &OperatorContext, z: &GasState) -> DVector<f64> {
    let (n, m) = (ctx.n(), ctx.m());
    let mut out = DVector::zeros(n + 2 * m);
    out.rows_mut(0, n)
        .copy_from(&(&ctx.incidence * &z.phi - &ctx.injection));
    let drop = ctx.friction.component_mul(&z.phi).component_mul(&z.psi);
    out.rows_mut(n, m).copy_from(&(&ctx.a_alpha * &z.pi + &ctx.c0 - drop));
    for k in 0..m {
        out[n + m + k] = 0.5 * (z.phi[k] * z.phi[k] - z.psi[k] * z.psi[k]);
    }
    out
}

/// Jacobian of [`eval_f`].
pub fn jacobian(ctx: &OperatorContext, z: &GasState) -> DMatrix<f64> {
    let (n, m) = (ctx.n(), ctx.m());
    let mut j = DMatrix::zeros(n + 2 * m, n + 2 * m);
    j.view_mut((0, n), (n, m)).copy_from(&ctx.incidence);
    j.view_mut((n, 0), (m, n)).copy_from(&ctx.a_alpha);
    for k in 0..m {
        let b = ctx.friction[k];
        j[(n + k, n + k)] = -b * z.psi[k];
        j[(n + k, n + m + k)] = -b * z.phi[k];
        j[(n + m + k, n + k)] = z.phi[k];
        j[(n + m + k, n + m + k)] = -z.psi[k];
    }
    j
}

/// The matrix `J0(z) = [[0, A, 0]; [-diag(b)^-1 A_alpha, diag(psi), diag(phi)]; [0, -diag(phi), diag(psi)]]`.
///
/// `jacobian(z) = blockdiag(I, -diag(b), -I) * J0(z)`.
pub fn j0_matrix(ctx: &OperatorContext, z: &GasState) -> DMatrix<f64> {
    let (n, m) = (ctx.n(), ctx.m());
    let mut j = DMatrix::zeros(n + 2 * m, n + 2 * m);
    j.view_mut((0, n), (n, m)).copy_from(&ctx.incidence);
    for k in 0..m {
        let inv_b = 1.0 / ctx.friction[k];
        for i in 0..n {
            j[(n + k, i)] = -ctx.a_alpha[(k, i)] * inv_b;
        }
        j[(n + k, n + k)] = z.psi[k];
        j[(n + k, n + m + k)] = z.phi[k];
        j[(n + m + k, n + k)] = -z.phi[k];
        j[(n + m + k, n + m + k)] = z.psi[k];
    }
    j
}

/// Applies `D = blockdiag(I, -diag(b)^-1, -I)` to an operator value.
pub fn apply_d(ctx: &OperatorContext, v: &mut DVector<f64>) {
    let (n, m) = (ctx.n(), ctx.m());
    for k in 0..m {
        v[n + k] /= -ctx.friction[k];
        v[n + m + k] = -v[n + m + k];
    }
}

/// Evaluates the scaled operator `F_W(z) = W D F(z)`, whose Jacobian is `W J0(z)`.
pub fn eval_fw(ctx: &OperatorContext, w: &ScalingMatrix, z: &GasState) -> DVector<f64> {
    let mut f = eval_f(ctx, z);
    apply_d(ctx, &mut f);
    w.apply(&f)
}

/// `<F_W(x) - F_W(y), x - y>`.
pub fn monotonicity_gap(ctx: &OperatorContext, w: &ScalingMatrix, x: &GasState, y: &GasState) -> f64 {
    let df = eval_fw(ctx, w, x) - eval_fw(ctx, w, y);
    df.dot(&(x.to_vector() - y.to_vector()))
}

/// Result of the positive-semidefiniteness test on `Sym(W J0(z))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdWitness {
    pub min_eigenvalue: f64,
    pub is_psd: bool,
    /// Tolerance that was applied.
    pub tol: f64,
}

/// `Sym(W J0(z)) = W J0 + (W J0)^T`.
pub fn sym_wj0(ctx: &OperatorContext, w: &ScalingMatrix, z: &GasState) -> DMatrix<f64> {
    let wj = w.mul_matrix(&j0_matrix(ctx, z));
    &wj + wj.transpose()
}

/// Smallest eigenvalue of `Sym(W J0(z))`; PSD when it is at least `-tol`.
///
/// With `tol = None` the tolerance is `1e-9 * (1 + ||Sym||_inf)`.
pub fn sym_psd_witness(ctx: &OperatorContext, w: &ScalingMatrix, z: &GasState, tol: Option<f64>) -> PsdWitness {
    let sym = sym_wj0(ctx, w, z);
    let tol = tol.unwrap_or_else(|| 1e-9 * (1.0 + linalg::inf_norm(&sym)));
    let min_eigenvalue = linalg::symmetric_eigenvalues(&sym).min();
    PsdWitness {
        min_eigenvalue,
        is_psd: min_eigenvalue >= -tol,
        tol,
    }
}

/// Componentwise `max(|x|)` over all residual blocks.
pub fn residual_inf(ctx: &OperatorContext, z: &GasState) -> f64 {
    eval_f(ctx, z).amax()
}
