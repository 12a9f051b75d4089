//! Feasibility of the scaling certificate for a fixed cone ratio `gamma`.
//!
//! A block scaling `W = blockdiag(Wa, Wb, diag(Wc))` makes `Sym(W J0(z))`
//! positive semidefinite on `{|phi| <= psi, beta <= psi <= gamma beta}` when
//!
//! * `N Wb M = 0`, with `N = I - A^T (A A^T)^-1 A` and `M = diag(b)^-1 A_alpha`,
//!   and `Wa = M^T Wb^T A^T (A A^T)^-1` (this removes the pressure coupling);
//! * `[[diag(eta), E], [E^T, diag(Wc) / gamma]]` is positive definite, where
//!   `E = Wb - diag(Wc)`;
//! * every row is dominant: `2 Wb_ii - eta_i >= sum_{j != i} c_ij` with
//!   `c_ij = max(gamma |Wb_ij + Wb_ji|, |gamma Wb_ij + Wb_ji|, |Wb_ij + gamma Wb_ji|)`.
//!
//! `c_ij` bounds `|Wb_ij psi_j + Wb_ji psi_i|` over `psi in [1, gamma]^2`, so the
//! conditions get weaker as `gamma` decreases. The scale is fixed by
//! `sum(Wc) = m`.
//!
//! The default backend is a log-barrier interior-point method that maximizes
//! the common slack `t` of all strict inequalities.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::context::OperatorContext;
use crate::error::{Error, Result};
use crate::linalg;

/// A certificate candidate for one value of `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiWitness {
    pub gamma: f64,
    pub wa: DMatrix<f64>,
    pub wb: DMatrix<f64>,
    pub wc: DVector<f64>,
    pub eta: DVector<f64>,
    /// Smallest slack over the LMI and the dominance rows.
    pub margin: f64,
}

/// Outcome of one feasibility probe.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeOutcome {
    Feasible(LmiWitness),
    /// The best achievable slack is provably below the strictness threshold.
    Infeasible {
        slack_bound: f64,
    },
    /// The solver stopped without deciding; treated as infeasible by callers.
    Stagnated {
        best_slack: f64,
    },
}

impl ProbeOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Self::Feasible(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Feasible(_) => "feasible",
            Self::Infeasible { .. } => "infeasible",
            Self::Stagnated { .. } => "stagnated",
        }
    }
}

/// Something that can decide feasibility for a given `gamma`.
pub trait FeasibilityBackend {
    /// With `early_exit` the probe may stop as soon as a strictly feasible
    /// point is found instead of maximizing the margin.
    fn probe(&mut self, gamma: f64, early_exit: bool) -> ProbeOutcome;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    /// Slack needed to call a point strictly feasible, per edge.
    pub strict_tol_per_edge: f64,
    /// Box bound on the entries of `Wb`, `Wc` and the scaled `eta`, per edge.
    pub box_per_edge: f64,
    pub max_outer: usize,
    pub max_newton: usize,
    /// Barrier weight growth factor.
    pub mu: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            strict_tol_per_edge: 1e-7,
            box_per_edge: 100.0,
            max_outer: 40,
            max_newton: 80,
            mu: 10.0,
        }
    }
}

/// Index layout of the raw variable vector
/// `(vec Wb row-major, Wc, eta / gamma, u_pairs, t)`.
#[derive(Debug, Clone)]
struct Layout {
    m: usize,
    pairs: Vec<(usize, usize)>,
    pair_index: Vec<usize>,
}

impl Layout {
    fn new(m: usize) -> Self {
        let mut pairs = Vec::new();
        let mut pair_index = vec![usize::MAX; m * m];
        for i in 0..m {
            for j in i + 1..m {
                pair_index[i * m + j] = pairs.len();
                pair_index[j * m + i] = pairs.len();
                pairs.push((i, j));
            }
        }
        Self { m, pairs, pair_index }
    }
    fn w(&self, i: usize, j: usize) -> usize {
        i * self.m + j
    }
    fn wc(&self, k: usize) -> usize {
        self.m * self.m + k
    }
    fn eta(&self, k: usize) -> usize {
        self.m * self.m + self.m + k
    }
    fn u(&self, i: usize, j: usize) -> usize {
        self.m * self.m + 2 * self.m + self.pair_index[i * self.m + j]
    }
    fn t(&self) -> usize {
        self.m * self.m + 2 * self.m + self.pairs.len()
    }
    fn raw_dim(&self) -> usize {
        self.t() + 1
    }
    /// Variables that enter the LMI block.
    fn lmi_vars(&self) -> usize {
        self.m * self.m + 2 * self.m
    }
}

/// Sparse affine constraint `c + sum coef * r_idx >= 0`.
#[derive(Debug, Clone)]
struct LinearRow {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

impl LinearRow {
    fn eval(&self, r: &DVector<f64>) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * r[i]).sum::<f64>()
    }
}

/// Context-dependent data shared by every `gamma`.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    layout: Layout,
    m_mat: DMatrix<f64>,
    pinv: DMatrix<f64>,
    /// Raw variables as `r0 + T v`.
    r0: DVector<f64>,
    transform: DMatrix<f64>,
    /// Derivative of the LMI matrix with respect to each raw LMI variable.
    lmi_entries: Vec<Vec<(usize, usize, f64)>>,
    options: BarrierOptions,
}

/// Barrier objective for one value of `gamma`.
struct Barrier<'a> {
    problem: &'a LmiProblem,
    rows: Vec<LinearRow>,
    nu: f64,
}

struct Eval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl LmiProblem {
    pub fn new(ctx: &OperatorContext, options: BarrierOptions) -> Result<Self> {
        let (n, m) = (ctx.n(), ctx.m());
        let layout = Layout::new(m);
        let cycle = ctx.cycle_projector();
        let mut m_mat = ctx.a_alpha.clone();
        for k in 0..m {
            let inv_b = 1.0 / ctx.friction[k];
            m_mat.row_mut(k).scale_mut(inv_b);
        }

        // Equality constraints on (Wb, Wc): N Wb M = 0 and sum(Wc) = m.
        let nw = m * m + m;
        let mut eq = DMatrix::zeros(m * n + 1, nw);
        for r in 0..m {
            for c in 0..n {
                let row = r * n + c;
                for i in 0..m {
                    if cycle[(r, i)] == 0.0 {
                        continue;
                    }
                    for j in 0..m {
                        eq[(row, layout.w(i, j))] = cycle[(r, i)] * m_mat[(j, c)];
                    }
                }
            }
        }
        for k in 0..m {
            eq[(m * n, layout.wc(k))] = 1.0;
        }
        let z = linalg::null_space(&eq, 1e-10);
        let dz = z.ncols();

        let raw = layout.raw_dim();
        let free = raw - nw;
        let mut transform = DMatrix::zeros(raw, dz + free);
        transform.view_mut((0, 0), (nw, dz)).copy_from(&z);
        for k in 0..free {
            transform[(nw + k, dz + k)] = 1.0;
        }
        let mut r0 = DVector::zeros(raw);
        for k in 0..m {
            r0[layout.wc(k)] = 1.0;
        }

        // LMI matrix S = [[diag(eta'), E], [E^T, diag(Wc)]] - t I.
        let mut lmi_entries = vec![Vec::new(); layout.lmi_vars()];
        for i in 0..m {
            for j in 0..m {
                lmi_entries[layout.w(i, j)] = vec![(i, m + j, 1.0), (m + j, i, 1.0)];
            }
        }
        for k in 0..m {
            lmi_entries[layout.wc(k)] = vec![(k, m + k, -1.0), (m + k, k, -1.0), (m + k, m + k, 1.0)];
            lmi_entries[layout.eta(k)] = vec![(k, k, 1.0)];
        }

        Ok(Self {
            pinv: ctx.incidence_pinv(),
            layout,
            m_mat,
            r0,
            transform,
            lmi_entries,
            options,
        })
    }

    pub fn m(&self) -> usize {
        self.layout.m
    }

    /// Dimension of the reduced search space.
    pub fn reduced_dim(&self) -> usize {
        self.transform.ncols()
    }

    fn strict_tol(&self) -> f64 {
        self.options.strict_tol_per_edge * self.layout.m as f64
    }

    fn lmi_matrix(&self, r: &DVector<f64>) -> DMatrix<f64> {
        let m = self.layout.m;
        let l = &self.layout;
        let t = r[l.t()];
        let mut s = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                let e = r[l.w(i, j)] - if i == j { r[l.wc(i)] } else { 0.0 };
                s[(i, m + j)] = e;
                s[(m + j, i)] = e;
            }
            s[(i, i)] = r[l.eta(i)] - t;
            s[(m + i, m + i)] = r[l.wc(i)] - t;
        }
        s
    }

    fn barrier(&self, gamma: f64) -> Barrier<'_> {
        let l = &self.layout;
        let m = l.m;
        let t = l.t();
        let bound = self.options.box_per_edge * m as f64;
        let mut rows = Vec::new();
        for i in 0..m {
            let mut terms = vec![(l.w(i, i), 2.0), (l.eta(i), -gamma), (t, -1.0)];
            for j in (0..m).filter(|&j| j != i) {
                terms.push((l.u(i, j), -1.0));
            }
            rows.push(LinearRow { constant: 0.0, terms });
        }
        for &(i, j) in &l.pairs {
            let (a, b) = (l.w(i, j), l.w(j, i));
            for (ca, cb) in [(gamma, gamma), (gamma, 1.0), (1.0, gamma)] {
                for sign in [1.0, -1.0] {
                    rows.push(LinearRow {
                        constant: 0.0,
                        terms: vec![(l.u(i, j), 1.0), (a, -sign * ca), (b, -sign * cb), (t, -1.0)],
                    });
                }
            }
        }
        for idx in 0..l.lmi_vars() {
            for sign in [1.0, -1.0] {
                rows.push(LinearRow {
                    constant: bound,
                    terms: vec![(idx, -sign), (t, -1.0)],
                });
            }
        }
        let nu = (2 * m + rows.len()) as f64;
        Barrier {
            problem: self,
            rows,
            nu,
        }
    }

    /// Raw point for `gamma`, starting from `warm` when given, with `t` set
    /// strictly below every constraint value.
    fn initial_point(&self, gamma: f64, warm: Option<&DVector<f64>>, barrier: &Barrier<'_>) -> DVector<f64> {
        let l = &self.layout;
        let m = l.m;
        let mut r = match warm {
            Some(w) => self.project(w),
            None => {
                let mut r = self.r0.clone();
                for k in 0..m {
                    r[l.eta(k)] = 0.5;
                }
                r
            }
        };
        for &(i, j) in &l.pairs {
            r[l.u(i, j)] = corner_bound(r[l.w(i, j)], r[l.w(j, i)], gamma);
        }
        r[l.t()] = 0.0;
        let lmi_min = linalg::symmetric_eigenvalues(&self.lmi_matrix(&r)).min();
        let lin_min = barrier
            .rows
            .iter()
            .map(|row| row.eval(&r))
            .fold(f64::INFINITY, f64::min);
        r[l.t()] = lmi_min.min(lin_min) - 1.0;
        r
    }

    /// Orthogonal projection of a raw vector onto the equality-constrained set.
    fn project(&self, r: &DVector<f64>) -> DVector<f64> {
        let v = self.transform.transpose() * (r - &self.r0);
        &self.r0 + &self.transform * v
    }

    /// Decides feasibility at `gamma`.
    pub fn solve(&self, gamma: f64, early_exit: bool, warm: Option<&DVector<f64>>) -> (ProbeOutcome, DVector<f64>) {
        let barrier = self.barrier(gamma);
        let strict = self.strict_tol();
        let tidx = self.layout.t();
        let mut r = self.initial_point(gamma, warm, &barrier);
        let mut s = barrier.nu;
        let mut best = r[tidx];

        for _ in 0..self.options.max_outer {
            let centered = barrier.center(&mut r, s, self.options.max_newton, early_exit.then_some(strict));
            let t = r[tidx];
            best = best.max(t);
            if t > strict && (early_exit || !centered) {
                return (ProbeOutcome::Feasible(self.witness(gamma, &r)), r);
            }
            if !centered {
                return (ProbeOutcome::Stagnated { best_slack: best }, r);
            }
            let gap = 1.05 * barrier.nu / s;
            if t + gap < strict {
                return (ProbeOutcome::Infeasible { slack_bound: t + gap }, r);
            }
            if barrier.nu / s < 1e-9 * (1.0 + t.abs()) {
                break;
            }
            s *= self.options.mu;
        }
        let t = r[tidx];
        if t > strict {
            (ProbeOutcome::Feasible(self.witness(gamma, &r)), r)
        } else {
            (
                ProbeOutcome::Infeasible {
                    slack_bound: t + barrier.nu / s,
                },
                r,
            )
        }
    }

    fn witness(&self, gamma: f64, r: &DVector<f64>) -> LmiWitness {
        let l = &self.layout;
        let m = l.m;
        let r = self.project(r);
        let wb = DMatrix::from_fn(m, m, |i, j| r[l.w(i, j)]);
        let wc = DVector::from_fn(m, |k, _| r[l.wc(k)]);
        let eta = DVector::from_fn(m, |k, _| gamma * r[l.eta(k)]);
        let wa = pressure_block(&self.m_mat, &wb, &self.pinv);
        let margin = witness_margin(gamma, &wb, &wc, &eta);
        LmiWitness {
            gamma,
            wa,
            wb,
            wc,
            eta,
            margin,
        }
    }

    /// Raw vector for a witness, for warm starts.
    pub fn raw_from_witness(&self, w: &LmiWitness) -> DVector<f64> {
        let l = &self.layout;
        let mut r = self.r0.clone();
        for i in 0..l.m {
            for j in 0..l.m {
                r[l.w(i, j)] = w.wb[(i, j)];
            }
            r[l.wc(i)] = w.wc[i];
            r[l.eta(i)] = w.eta[i] / w.gamma;
        }
        r
    }
}

impl Barrier<'_> {
    fn eval(&self, r: &DVector<f64>, s: f64, derivatives: bool) -> Option<Eval> {
        let p = self.problem;
        let l = &p.layout;
        let tidx = l.t();
        let sm = p.lmi_matrix(r);
        let chol = sm.clone().cholesky()?;
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| libm::log(*d)).sum::<f64>();
        let mut value = -s * r[tidx] - logdet;
        let mut gvals = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let g = row.eval(r);
            if !(g > 0.0) {
                return None;
            }
            value -= libm::log(g);
            gvals.push(g);
        }
        if !value.is_finite() {
            return None;
        }
        let raw = l.raw_dim();
        let mut grad = DVector::zeros(raw);
        let mut hess = DMatrix::zeros(raw, raw);
        if derivatives {
            grad[tidx] -= s;
            let pm = chol.inverse();
            let two_m = 2 * l.m;
            // The t variable enters as -I.
            let t_entries: Vec<(usize, usize, f64)> = (0..two_m).map(|a| (a, a, -1.0)).collect();
            let lmi_vars = l.lmi_vars();
            let entries = |idx: usize| -> &[(usize, usize, f64)] {
                if idx < lmi_vars {
                    &p.lmi_entries[idx]
                } else {
                    &t_entries
                }
            };
            let vars: Vec<usize> = (0..lmi_vars).chain(core::iter::once(tidx)).collect();
            for (a_pos, &pa) in vars.iter().enumerate() {
                let ea = entries(pa);
                grad[pa] -= ea.iter().map(|&(a, b, v)| v * pm[(b, a)]).sum::<f64>();
                for &pb in &vars[a_pos..] {
                    let eb = entries(pb);
                    let mut h = 0.0;
                    for &(a, b, v) in ea {
                        for &(c, d, w) in eb {
                            h += v * w * pm[(b, c)] * pm[(d, a)];
                        }
                    }
                    hess[(pa, pb)] += h;
                    if pa != pb {
                        hess[(pb, pa)] += h;
                    }
                }
            }
            for (row, &g) in self.rows.iter().zip(&gvals) {
                for &(i, ci) in &row.terms {
                    grad[i] -= ci / g;
                    for &(j, cj) in &row.terms {
                        hess[(i, j)] += ci * cj / (g * g);
                    }
                }
            }
        }
        Some(Eval { value, grad, hess })
    }

    /// Damped Newton centering for weight `s`. Returns false when no
    /// progress could be made. Stops early once `t` exceeds `stop_above`.
    fn center(&self, r: &mut DVector<f64>, s: f64, max_newton: usize, stop_above: Option<f64>) -> bool {
        let p = self.problem;
        let tidx = p.layout.t();
        let tr = &p.transform;
        for _ in 0..max_newton {
            let Some(ev) = self.eval(r, s, true) else {
                return false;
            };
            let g = tr.transpose() * &ev.grad;
            let mut h = tr.transpose() * (&ev.hess * tr);
            let scale = h.diagonal().amax().max(1e-300);
            let mut reg = 0.0;
            let step = loop {
                if let Some(ch) = h.clone().cholesky() {
                    break -ch.solve(&g);
                }
                reg = if reg == 0.0 { 1e-12 * scale } else { reg * 100.0 };
                if reg > scale {
                    return false;
                }
                for k in 0..h.nrows() {
                    h[(k, k)] += reg;
                }
            };
            let decrement = -g.dot(&step);
            if decrement / 2.0 <= 1e-9 {
                return true;
            }
            let dir = tr * &step;
            let mut alpha = 1.0;
            loop {
                let cand = &*r + &dir * alpha;
                if let Some(ce) = self.eval(&cand, s, false) {
                    if ce.value <= ev.value - 0.01 * alpha * decrement {
                        *r = cand;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-14 {
                    return false;
                }
            }
            if let Some(limit) = stop_above {
                if r[tidx] > limit {
                    return true;
                }
            }
        }
        // Out of Newton steps; accept the current point as approximately centered.
        true
    }
}

/// `max(gamma |x + y|, |gamma x + y|, |x + gamma y|)`.
pub fn corner_bound(x: f64, y: f64, gamma: f64) -> f64 {
    (gamma * (x + y).abs())
        .max((gamma * x + y).abs())
        .max((x + gamma * y).abs())
}

/// `Wa = M^T Wb^T A^T (A A^T)^-1`.
fn pressure_block(m_mat: &DMatrix<f64>, wb: &DMatrix<f64>, pinv: &DMatrix<f64>) -> DMatrix<f64> {
    m_mat.transpose() * wb.transpose() * pinv
}

/// `min(lambda_min(LMI scaled by gamma), min dominance slack)`.
fn witness_margin(gamma: f64, wb: &DMatrix<f64>, wc: &DVector<f64>, eta: &DVector<f64>) -> f64 {
    let m = wb.nrows();
    let lmi = scaled_lmi(gamma, wb, wc, eta);
    let mut margin = linalg::symmetric_eigenvalues(&lmi).min();
    for i in 0..m {
        margin = margin.min(dominance_slack(gamma, wb, eta, i));
    }
    margin
}

/// `[[diag(eta) / gamma, E], [E^T, diag(Wc)]]`, congruent to the LMI.
pub fn scaled_lmi(gamma: f64, wb: &DMatrix<f64>, wc: &DVector<f64>, eta: &DVector<f64>) -> DMatrix<f64> {
    let m = wb.nrows();
    let mut s = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let e = wb[(i, j)] - if i == j { wc[i] } else { 0.0 };
            s[(i, m + j)] = e;
            s[(m + j, i)] = e;
        }
        s[(i, i)] = eta[i] / gamma;
        s[(m + i, m + i)] = wc[i];
    }
    s
}

/// `2 Wb_ii - eta_i - sum_{j != i} c_ij`.
pub fn dominance_slack(gamma: f64, wb: &DMatrix<f64>, eta: &DVector<f64>, i: usize) -> f64 {
    let off: f64 = (0..wb.nrows())
        .filter(|&j| j != i)
        .map(|j| corner_bound(wb[(i, j)], wb[(j, i)], gamma))
        .sum();
    2.0 * wb[(i, i)] - eta[i] - off
}

/// Independent check of a witness against `ctx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessCheck {
    /// `||N Wb M||_F / (1 + ||Wb||_F)`.
    pub equality_residual: f64,
    /// `||Wa A - M^T Wb^T||_F / (1 + ||Wa||_F)`.
    pub coupling_residual: f64,
    pub lmi_min_eigenvalue: f64,
    pub dominance_slack: f64,
    pub valid: bool,
}

/// Residual tolerance for [`verify_witness`].
pub const WITNESS_TOL: f64 = 1e-9;

pub fn verify_witness(ctx: &OperatorContext, w: &LmiWitness) -> Result<WitnessCheck> {
    let m = ctx.m();
    if w.wb.shape() != (m, m) || w.wc.len() != m || w.eta.len() != m || w.wa.shape() != (ctx.n(), ctx.n()) {
        return Err(Error::Dimension {
            what: "witness",
            expected: m,
            found: w.wb.nrows(),
        });
    }
    let mut m_mat = ctx.a_alpha.clone();
    for k in 0..m {
        m_mat.row_mut(k).scale_mut(1.0 / ctx.friction[k]);
    }
    let equality_residual = (ctx.cycle_projector() * &w.wb * &m_mat).norm() / (1.0 + w.wb.norm());
    let coupling_residual =
        (&w.wa * &ctx.incidence - m_mat.transpose() * w.wb.transpose()).norm() / (1.0 + w.wa.norm());
    let lmi_min_eigenvalue = linalg::min_eig(&scaled_lmi(w.gamma, &w.wb, &w.wc, &w.eta))?;
    let dominance = (0..m)
        .map(|i| dominance_slack(w.gamma, &w.wb, &w.eta, i))
        .fold(f64::INFINITY, f64::min);
    Ok(WitnessCheck {
        equality_residual,
        coupling_residual,
        lmi_min_eigenvalue,
        dominance_slack: dominance,
        valid: equality_residual <= WITNESS_TOL
            && coupling_residual <= WITNESS_TOL
            && lmi_min_eigenvalue > 0.0
            && dominance > 0.0,
    })
}

/// Barrier backend with a warm start carried across probes.
#[derive(Debug, Clone)]
pub struct BarrierBackend {
    problem: LmiProblem,
    warm: Option<DVector<f64>>,
}

impl BarrierBackend {
    pub fn new(ctx: &OperatorContext, options: BarrierOptions) -> Result<Self> {
        Ok(Self {
            problem: LmiProblem::new(ctx, options)?,
            warm: None,
        })
    }

    pub fn problem(&self) -> &LmiProblem {
        &self.problem
    }

    /// Uses `w` as the starting point of the next probe.
    pub fn warm_start(&mut self, w: &LmiWitness) {
        self.warm = Some(self.problem.raw_from_witness(w));
    }
}

impl FeasibilityBackend for BarrierBackend {
    fn probe(&mut self, gamma: f64, early_exit: bool) -> ProbeOutcome {
        let (outcome, r) = self.problem.solve(gamma, early_exit, self.warm.as_ref());
        if outcome.is_feasible() {
            self.warm = Some(r);
        }
        outcome
    }
}

/// Convenience wrapper: a witness for `gamma`, maximizing the margin.
pub fn feasible_for_gamma(ctx: &OperatorContext, gamma: f64) -> Result<Option<LmiWitness>> {
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument("gamma must be finite and at least 1".into()));
    }
    let mut backend = BarrierBackend::new(ctx, BarrierOptions::default())?;
    Ok(match backend.probe(gamma, false) {
        ProbeOutcome::Feasible(w) => Some(w),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkBuilder;
    use crate::operator::{sym_psd_witness, GasState, ScalingMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kite(alpha: f64) -> OperatorContext {
        let net = NetworkBuilder::new()
            .slack(0, 10.0)
            .node(1, -0.5)
            .node(2, -0.5)
            .node(3, -1.0)
            .pipe(0, 1, 1.0)
            .pipe(0, 2, 1.0)
            .compressor(1, 2, 1.0, alpha, 0.5)
            .pipe(2, 3, 1.0)
            .pipe(1, 3, 1.0)
            .build()
            .unwrap();
        OperatorContext::new(&net).unwrap()
    }

    fn vertex_min_eig(ctx: &OperatorContext, w: &LmiWitness, samples: usize, seed: u64) -> f64 {
        let sc = ScalingMatrix::block(w.wa.clone(), w.wb.clone(), w.wc.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (ctx.n(), ctx.m());
        (0..samples)
            .map(|_| {
                let psi = DVector::from_fn(m, |_, _| if rng.random_bool(0.5) { 1.0 } else { w.gamma });
                let phi = DVector::from_fn(m, |k, _| if rng.random_bool(0.5) { psi[k] } else { -psi[k] });
                let z = GasState::new(DVector::zeros(n), phi, psi);
                let wit = sym_psd_witness(ctx, &sc, &z, None);
                wit.min_eigenvalue + wit.tol
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn corner_bound_is_max_over_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let (x, y) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let gamma = rng.random_range(1.0..20.0);
            let steps = 200;
            let mut best = 0.0f64;
            for a in 0..=steps {
                for b in 0..=steps {
                    let pj = 1.0 + (gamma - 1.0) * a as f64 / steps as f64;
                    let pi = 1.0 + (gamma - 1.0) * b as f64 / steps as f64;
                    best = best.max((x * pj + y * pi).abs());
                }
            }
            assert!((corner_bound(x, y, gamma) - best).abs() <= 1e-12 * (1.0 + best));
        }
    }

    #[test]
    fn uncompressed_loops_admit_any_gamma() {
        let ctx = kite(1.0);
        let w = feasible_for_gamma(&ctx, 1e4).unwrap().expect("feasible");
        assert!(verify_witness(&ctx, &w).unwrap().valid);
    }

    #[test]
    fn compressed_loop_limits_gamma() {
        let ctx = kite(2.0);
        assert!(feasible_for_gamma(&ctx, 1e3).unwrap().is_none());
        let w = feasible_for_gamma(&ctx, 3.0).unwrap().expect("feasible");
        let check = verify_witness(&ctx, &w).unwrap();
        assert!(check.valid, "{check:?}");
        assert!(w.margin > 0.0);
        assert!(vertex_min_eig(&ctx, &w, 2000, 1) >= 0.0);
    }

    #[test]
    fn feasibility_is_nested_in_gamma() {
        let ctx = kite(1.5);
        let problem = LmiProblem::new(&ctx, BarrierOptions::default()).unwrap();
        let grid = [1.01, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0, 40.0, 100.0];
        let feasible: Vec<bool> = grid
            .iter()
            .map(|&g| problem.solve(g, true, None).0.is_feasible())
            .collect();
        assert!(feasible[0]);
        assert!(!feasible[grid.len() - 1]);
        for k in 1..grid.len() {
            assert!(feasible[k - 1] || !feasible[k], "{feasible:?}");
        }
    }

    #[test]
    fn witness_at_gamma_is_feasible_below() {
        let ctx = kite(1.5);
        let w = feasible_for_gamma(&ctx, 6.0).unwrap().expect("feasible");
        for gamma in [1.0, 2.0, 4.0] {
            let lower = LmiWitness { gamma, ..w.clone() };
            assert!(verify_witness(&ctx, &lower).unwrap().valid);
        }
    }

    #[test]
    fn warm_start_matches_cold_decision() {
        let ctx = kite(2.0);
        let mut backend = BarrierBackend::new(&ctx, BarrierOptions::default()).unwrap();
        assert!(backend.probe(2.0, true).is_feasible());
        for gamma in [3.0, 5.0, 20.0] {
            let warm = backend.probe(gamma, true).is_feasible();
            let cold = backend.problem().solve(gamma, true, None).0.is_feasible();
            assert_eq!(warm, cold, "gamma {gamma}");
        }
    }

    #[test]
    fn rejects_bad_gamma() {
        let ctx = kite(1.0);
        assert!(feasible_for_gamma(&ctx, 0.5).is_err());
        assert!(feasible_for_gamma(&ctx, f64::NAN).is_err());
    }
}
