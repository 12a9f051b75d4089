//! Certificate, domain, VI solve and certification in one call.

use nalgebra::DVector;

use crate::certificate::{certificate_for_gamma, max_gamma, CertificateKind, DomainCertificate, SearchOptions};
use crate::context::OperatorContext;
use crate::domain::{DomainKind, DomainSpec};
use crate::error::{Error, Result};
use crate::operator::GasState;
use crate::vi::{certify, solve_vi, Certification, ViOptions, ViResult};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveOptions {
    /// Lower flow bound; defaults depend on the certificate kind.
    pub beta: Option<f64>,
    /// Use this `gamma` instead of searching for the largest one.
    pub gamma: Option<f64>,
    /// Uniform squared-pressure cap overriding the per-node defaults.
    pub pi_max: Option<f64>,
    pub start: Option<GasState>,
    pub search: SearchOptions,
    pub vi: ViOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub certificate: DomainCertificate,
    pub spec: DomainSpec,
    pub vi: ViResult,
    pub certification: Certification,
}

/// Certificate for `ctx`: the override `gamma` if given, else the largest found.
pub fn find_certificate(
    ctx: &OperatorContext,
    gamma: Option<f64>,
    search: &SearchOptions,
) -> Result<DomainCertificate> {
    match gamma {
        Some(g) => certificate_for_gamma(ctx, g, search),
        None => max_gamma(ctx, search),
    }
}

/// Default lower flow bound: `1e-6 ||q||_1` without a ratio bound, else `||q||_1 / gamma`.
pub fn default_beta(ctx: &OperatorContext, cert: &DomainCertificate) -> f64 {
    if cert.gamma.is_finite() {
        ctx.flow_scale() / cert.gamma
    } else {
        1e-6 * ctx.flow_scale()
    }
}

/// Domain matching a certificate.
pub fn domain_for(
    ctx: &OperatorContext,
    cert: &DomainCertificate,
    beta: Option<f64>,
    pi_max: Option<f64>,
) -> Result<DomainSpec> {
    let beta = beta.unwrap_or_else(|| default_beta(ctx, cert));
    let caps = match pi_max {
        Some(p) if !(p > 0.0 && p.is_finite()) => {
            return Err(Error::InvalidArgument(alloc::format!("pi_max {p} must be positive")));
        }
        Some(p) => DVector::from_element(ctx.n(), p),
        None => ctx.default_pi_caps(),
    };
    let kind = if cert.kind == CertificateKind::TreeExact && !cert.gamma.is_finite() {
        DomainKind::Beta
    } else {
        DomainKind::BetaGamma
    };
    DomainSpec::new(kind, beta, cert.gamma, caps)
}

pub fn solve(ctx: &OperatorContext, opts: &SolveOptions) -> Result<SolveOutcome> {
    let certificate = find_certificate(ctx, opts.gamma, &opts.search)?;
    solve_certified(ctx, certificate, opts)
}

/// Like [`solve`] with a certificate already in hand; `opts.gamma` and
/// `opts.search` are ignored.
pub fn solve_certified(
    ctx: &OperatorContext,
    certificate: DomainCertificate,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    let spec = domain_for(ctx, &certificate, opts.beta, opts.pi_max)?;
    let vi = solve_vi(ctx, &certificate.scaling, &spec, opts.start.as_ref(), &opts.vi)?;
    let certification = certify(ctx, &vi, &spec, true, &opts.vi);
    Ok(SolveOutcome {
        certificate,
        spec,
        vi,
        certification,
    })
}
