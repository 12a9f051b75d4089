//! Command-line front end: parses flags, runs one command, emits a JSON report.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use gasmono_core::certificate::sample_cell_state;
use gasmono_core::oracle::{multistart, OracleOptions};
use gasmono_core::pipeline::{domain_for, find_certificate, solve_certified};
use gasmono_core::{
    max_gamma, residual_inf, sym_psd_witness, OperatorContext, SearchOptions, SolveOptions, Status, ViOptions,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::io::{read_network, read_state, write_json, CertificateJson, DomainJson, ResidualsJson, StateFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Certify, solve the variational inequality and classify the result.
    Solve,
    /// Compute the monotonicity certificate only.
    Gamma,
    /// Check domain membership and monotonicity at a given state.
    Check,
    /// Multistart Newton reference solutions.
    Oracle,
    /// Certified gamma as a function of a compression multiplier.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Gamma => "gamma",
            Self::Check => "check",
            Self::Oracle => "oracle",
            Self::Sweep => "sweep",
        }
    }
}

/// Steady-state gas network solver with monotonicity certificates.
#[derive(Debug, Clone, Parser)]
#[command(name = "gasmono", version)]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// Network JSON file.
    #[arg(long)]
    pub network: PathBuf,
    /// Lower flow bound of the domain.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Use this ratio bound instead of searching for the largest one.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Uniform squared-pressure cap.
    #[arg(long = "pi-max")]
    pub pi_max: Option<f64>,
    /// Target natural residual of the VI solver.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Oracle starts.
    #[arg(long, default_value_t = 200)]
    pub starts: usize,
    /// States sampled by `check`.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Multiplier grid `A:STEP:B` for `sweep`.
    #[arg(long = "alpha-grid")]
    pub alpha_grid: Option<String>,
    /// State JSON file for `check`.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub exit_code: i32,
    pub report: Value,
}

/// Parses `A:STEP:B` into `A, A + STEP, ...` up to `B`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Input(format!("alpha grid {text:?} is not A:STEP:B with STEP > 0 and A <= B"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let [a, step, b] = parts[..] else { return Err(bad()) };
    if !(a.is_finite() && b.is_finite() && step > 0.0 && a <= b) {
        return Err(bad());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| a + k as f64 * step).collect())
}

impl RunConfig {
    fn search(&self) -> SearchOptions {
        SearchOptions {
            seed: self.seed,
            ..SearchOptions::default()
        }
    }

    fn vi(&self) -> ViOptions {
        let defaults = ViOptions::default();
        ViOptions {
            epsilon: self.epsilon.unwrap_or(defaults.epsilon),
            max_iters: self.max_iters.unwrap_or(defaults.max_iters),
            ..defaults
        }
    }

    fn oracle(&self) -> OracleOptions {
        OracleOptions {
            n_starts: self.starts,
            seed: self.seed,
            ..OracleOptions::default()
        }
    }

    fn echo(&self) -> Value {
        let search = self.search();
        let vi = self.vi();
        json!({
            "network": self.network,
            "beta": self.beta,
            "gamma": self.gamma,
            "piMax": self.pi_max,
            "epsilon": vi.epsilon,
            "maxIters": vi.max_iters,
            "eqTol": vi.eq_tol,
            "piTol": vi.pi_tol,
            "seed": self.seed,
            "starts": self.starts,
            "gammaCap": search.gamma_cap,
            "tolBisect": search.tol_bisect,
        })
    }
}

/// Runs one command. Errors are input problems or failed certificates.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let net = read_network(&config.network)?;
    let ctx = OperatorContext::new(&net)?;
    let (exit_code, mut report) = match config.command {
        Command::Solve => solve(config, &ctx)?,
        Command::Gamma => gamma(config, &ctx)?,
        Command::Check => check(config, &ctx)?,
        Command::Oracle => oracle(config, &ctx),
        Command::Sweep => sweep(config, &net)?,
    };
    report["command"] = json!(config.command.name());
    report["config"] = config.echo();
    report["wallMs"] = json!(start.elapsed().as_secs_f64() * 1e3);
    Ok(RunOutput { exit_code, report })
}

fn status_code(status: Status) -> i32 {
    match status {
        Status::Solution => 0,
        Status::NoSolutionInDomain => 2,
        Status::Inconclusive => 3,
    }
}

fn solve(config: &RunConfig, ctx: &OperatorContext) -> Result<(i32, Value)> {
    let opts = SolveOptions {
        beta: config.beta,
        gamma: config.gamma,
        pi_max: config.pi_max,
        start: None,
        search: config.search(),
        vi: config.vi(),
    };
    let cert = find_certificate(ctx, opts.gamma, &opts.search)?;
    let out = solve_certified(ctx, cert, &opts)?;
    let c = &out.certification;
    let report = json!({
        "method": "vi",
        "status": c.status.as_str(),
        "state": StateFile::from(&c.state),
        "residuals": ResidualsJson::from(&c.residuals),
        "iters": out.vi.iters,
        "domain": DomainJson::from(&out.spec),
        "certificate": CertificateJson::from(&out.certificate),
    });
    Ok((status_code(c.status), report))
}

fn gamma(config: &RunConfig, ctx: &OperatorContext) -> Result<(i32, Value)> {
    let cert = find_certificate(ctx, config.gamma, &config.search())?;
    let report = json!({
        "gamma": cert.gamma.is_finite().then_some(cert.gamma),
        "capLimited": cert.cap_limited,
        "certificate": CertificateJson::from(&cert),
    });
    Ok((0, report))
}

fn check(config: &RunConfig, ctx: &OperatorContext) -> Result<(i32, Value)> {
    let path = config
        .state
        .as_ref()
        .ok_or_else(|| CliError::Input("check needs --state".into()))?;
    let z = read_state(path)?;
    z.check_dims(ctx)?;
    let cert = find_certificate(ctx, config.gamma, &config.search())?;
    let spec = domain_for(ctx, &cert, config.beta, config.pi_max)?;
    let membership = spec.membership(ctx, &z, 1e-9)?;
    let at_state = sym_psd_witness(ctx, &cert.scaling, &z, None);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let gamma = cert.gamma.is_finite().then_some(cert.gamma);
    let mut sampled_min = f64::INFINITY;
    let mut sampled_ok = true;
    for _ in 0..config.samples {
        let s = sample_cell_state(ctx, gamma, &mut rng);
        let w = sym_psd_witness(ctx, &cert.scaling, &s, None);
        sampled_min = sampled_min.min(w.min_eigenvalue);
        sampled_ok &= w.is_psd;
    }

    let ok = membership.inside && at_state.is_psd && sampled_ok;
    let violations: Vec<Value> = membership
        .violations
        .iter()
        .map(|v| json!({"constraint": v.constraint, "amount": v.amount}))
        .collect();
    let report = json!({
        "inside": membership.inside,
        "violations": violations,
        "minEigenvalue": at_state.min_eigenvalue,
        "isPsd": at_state.is_psd,
        "samples": config.samples,
        "sampledMinEigenvalue": if config.samples > 0 { Some(sampled_min) } else { None },
        "sampledPsd": sampled_ok,
        "residual": residual_inf(ctx, &z),
        "domain": DomainJson::from(&spec),
    });
    Ok((if ok { 0 } else { 3 }, report))
}

fn oracle(config: &RunConfig, ctx: &OperatorContext) -> (i32, Value) {
    let opts = config.oracle();
    let sols = multistart(ctx, &opts);
    let states: Vec<StateFile> = sols.iter().map(StateFile::from).collect();
    let residuals: Vec<f64> = sols.iter().map(|z| residual_inf(ctx, z)).collect();
    let report = json!({
        "method": "oracle",
        "status": if sols.is_empty() { "NoSolution" } else { "Solution" },
        "state": states.first(),
        "solutions": states,
        "residuals": residuals,
        "starts": opts.n_starts,
    });
    (0, report)
}

fn sweep(config: &RunConfig, net: &gasmono_core::Network) -> Result<(i32, Value)> {
    let grid = parse_grid(
        config
            .alpha_grid
            .as_deref()
            .ok_or_else(|| CliError::Input("sweep needs --alpha-grid".into()))?,
    )?;
    let search = config.search();
    let points: Vec<Value> = grid
        .par_iter()
        .map(|&mult| {
            let result = net
                .with_compression_scaled(mult)
                .and_then(|scaled| OperatorContext::new(&scaled))
                .and_then(|ctx| max_gamma(&ctx, &search));
            match result {
                Ok(cert) => json!({
                    "multiplier": mult,
                    "gamma": cert.gamma.is_finite().then_some(cert.gamma),
                    "capLimited": cert.cap_limited,
                }),
                Err(e) => json!({"multiplier": mult, "gamma": null, "error": e.to_string()}),
            }
        })
        .collect();
    let rows: Vec<Value> = points.iter().map(|p| json!([p["multiplier"], p["gamma"]])).collect();
    let report = json!({
        "columns": ["multiplier", "gamma"],
        "rows": rows,
        "points": points,
    });
    Ok((0, report))
}

/// Parses `args`, runs, writes the report, and returns the process exit code.
pub fn execute<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&config) {
        Ok(out) => {
            let written = match &config.out {
                Some(path) => write_json(path, &out.report),
                None => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&out.report).expect("reports serialize")
                    );
                    Ok(())
                }
            };
            match written {
                Ok(()) => out.exit_code,
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1:0.5:3").unwrap(), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(parse_grid("2:1:2").unwrap(), vec![2.0]);
        assert_eq!(parse_grid("1:0.5:7").unwrap().len(), 13);
        for bad in ["1:0:3", "3:1:1", "1:2", "a:1:2", "1:1:2:3"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }
}
