//! Experiment runner: wires JSON/flag configs to the library operations and
//! emits machine-readable reports with pass/fail exit codes.
//!
//! Exit codes: 0 all requested checks passed, 1 a check failed (or a strict
//! run breached a boundary), 2 configuration error, 3 hypothesis violation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use backlund::classical::{conservation_report, flow_exact, flow_rk4, gradient_identity_residual};
use backlund::eigen::{eigen_residual, log_psi_drift, psi};
use backlund::stochastic::{
    pitman_paths, simulate_backlund, simulate_target, toda_exact_paths, InitialU, McConfig,
    PathEnsemble,
};
use backlund::todachain::{chain_residual, log_tau, toda2d_residuals, TauChainPoint};
use backlund::verify::{
    conditional_law_test, intertwining_kernel_residual, intertwining_operator_residual,
    marginal_law_pair, marginal_law_test, pitman_law_scaled, pitman_law_test, random_domain_grid,
    BumpSpec,
};
use backlund::{Error, PhasePoint, QuadratureSpec, SystemKind, SystemSpec};

#[derive(Parser)]
#[command(name = "backlund", version, about = "Stochastic Bäcklund transformation laboratory")]
struct Cli {
    /// JSON experiment config; flags override file values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// System kind: toda | rational | hyperbolic1 | hyperbolic2
    #[arg(long, global = true)]
    system: Option<String>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    x0: Option<f64>,
    /// Horizon / measurement time
    #[arg(long, global = true)]
    t: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    n_paths: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    noise_scale: Option<f64>,
    /// Semiclassical kernel power w
    #[arg(long, global = true)]
    kernel_power: Option<f64>,
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    #[arg(long, global = true)]
    n_panels: Option<usize>,
    /// Artifact output path (CSV, or .sbk for binary ensembles); omitted =
    /// report only
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Fail on any boundary-policy violation (default true)
    #[arg(long, global = true)]
    strict: Option<bool>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the deterministic flow by RK4 and report conservation residuals
    ClassicalFlow,
    /// Scan psi, its drift and the eigenvalue residual over an x-grid
    EigenScan {
        #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
        x_min: f64,
        #[arg(long, default_value_t = 2.5, allow_negative_numbers = true)]
        x_max: f64,
        #[arg(long, default_value_t = 22)]
        x_steps: usize,
        #[arg(long, default_value_t = 1e-3)]
        fd_step: f64,
    },
    /// Simulate a path ensemble and write it as CSV or SBK
    Simulate {
        /// backlund | target | toda-exact | pitman
        #[arg(long, default_value = "backlund")]
        process: String,
    },
    /// Kernel identities, Lax conservation and intertwining residuals
    VerifyIdentities {
        #[arg(long, default_value_t = 1e-3)]
        fd_step: f64,
        #[arg(long, default_value_t = 50)]
        grid_points: usize,
    },
    /// Monte Carlo law tests: marginal, conditional, Pitman, negative controls
    VerifyLaws {
        #[arg(long, default_value_t = 0.01)]
        threshold: f64,
        /// Skip the conditional-law bins (faster)
        #[arg(long, default_value_t = false)]
        skip_conditional: bool,
    },
    /// Residuals of the noise-off tau-function identities over an (n, t) grid
    TodaChainCheck {
        #[arg(long, default_value_t = 5)]
        nmax: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 2.0])]
        t_values: Vec<f64>,
        #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value_t = -0.2, allow_negative_numbers = true)]
        y: f64,
        #[arg(long, default_value_t = 1e-3)]
        fd_step: f64,
    },
}

#[derive(Debug, Default, Deserialize)]
struct FileConfig {
    #[serde(default)]
    system: FileSystemBlock,
    #[serde(default)]
    run: FileRunBlock,
    #[serde(default)]
    quad: FileQuadBlock,
    output: Option<String>,
    strict: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
struct FileSystemBlock {
    kind: Option<String>,
    epsilon: Option<f64>,
    mu: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct FileRunBlock {
    lambda: Option<f64>,
    x0: Option<f64>,
    t: Option<f64>,
    dt: Option<f64>,
    n_paths: Option<usize>,
    seed: Option<u64>,
    noise_scale: Option<f64>,
    kernel_power: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct FileQuadBlock {
    rel_tol: Option<f64>,
    n_panels: Option<usize>,
}

/// Fully resolved experiment parameters, echoed into every report.
#[derive(Debug, Clone, Serialize)]
struct Resolved {
    kind: String,
    epsilon: f64,
    mu: f64,
    lambda: f64,
    x0: f64,
    t: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    noise_scale: f64,
    kernel_power: f64,
    rel_tol: f64,
    n_panels: usize,
    strict: bool,
    output: Option<String>,
}

enum Failure {
    Config(String),
    Hypothesis(String),
    Check(String),
}

impl Resolved {
    fn from(cli: &Cli) -> Result<Self, Failure> {
        let file: FileConfig = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Failure::Config(format!("bad config {}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        Ok(Resolved {
            kind: cli.system.clone().or(file.system.kind).unwrap_or_else(|| "toda".into()),
            epsilon: cli.epsilon.or(file.system.epsilon).unwrap_or(1.0),
            mu: cli.mu.or(file.system.mu).unwrap_or(1.0),
            lambda: cli.lambda.or(file.run.lambda).unwrap_or(0.0),
            x0: cli.x0.or(file.run.x0).unwrap_or(1.0),
            t: cli.t.or(file.run.t).unwrap_or(1.0),
            dt: cli.dt.or(file.run.dt).unwrap_or(1e-3),
            n_paths: cli.n_paths.or(file.run.n_paths).unwrap_or(10_000),
            seed: cli.seed.or(file.run.seed).unwrap_or(42),
            noise_scale: cli.noise_scale.or(file.run.noise_scale).unwrap_or(1.0),
            kernel_power: cli.kernel_power.or(file.run.kernel_power).unwrap_or(1.0),
            rel_tol: cli.rel_tol.or(file.quad.rel_tol).unwrap_or(1e-10),
            n_panels: cli.n_panels.or(file.quad.n_panels).unwrap_or(16),
            strict: cli.strict.or(file.strict).unwrap_or(true),
            output: cli
                .output
                .as_ref()
                .map(|p| p.display().to_string())
                .or(file.output),
        })
    }

    fn kind_enum(&self) -> Result<SystemKind, Failure> {
        match self.kind.as_str() {
            "toda" => Ok(SystemKind::Toda),
            "rational" => Ok(SystemKind::RationalCm),
            "hyperbolic1" => Ok(SystemKind::HyperbolicI),
            "hyperbolic2" => Ok(SystemKind::HyperbolicII),
            other => Err(Failure::Config(format!(
                "unknown system '{other}' (expected toda|rational|hyperbolic1|hyperbolic2)"
            ))),
        }
    }

    /// The per-subcommand hypothesis table, checked before any computation.
    fn check_hypotheses(&self, needs_law_theorem: bool) -> Result<SystemSpec, Failure> {
        let kind = self.kind_enum()?;
        if !(self.epsilon > 0.0) {
            return Err(Failure::Hypothesis(format!(
                "epsilon > 0 required, got {}",
                self.epsilon
            )));
        }
        match kind {
            SystemKind::HyperbolicI => {
                if !(self.mu >= 1.0) {
                    return Err(Failure::Hypothesis(format!(
                        "mu >= 1 required for hyperbolic1, got {}",
                        self.mu
                    )));
                }
            }
            SystemKind::HyperbolicII => {
                if !(self.mu >= 0.5) {
                    return Err(Failure::Hypothesis(format!(
                        "mu >= 1/2 required for hyperbolic2, got {}",
                        self.mu
                    )));
                }
                let cap = self.epsilon * self.mu;
                if !(self.lambda.abs() < cap) {
                    return Err(Failure::Hypothesis(format!(
                        "|lambda| < eps*mu = {cap} required for hyperbolic2, got {}",
                        self.lambda
                    )));
                }
                if needs_law_theorem && !(self.mu > 0.5) {
                    return Err(Failure::Hypothesis(format!(
                        "mu > 1/2 required for hyperbolic2 law tests, got {}",
                        self.mu
                    )));
                }
            }
            _ => {}
        }
        if needs_law_theorem && kind == SystemKind::HyperbolicI {
            return Err(Failure::Hypothesis(
                "no law theorem is stated for hyperbolic1; use toda, rational or hyperbolic2"
                    .into(),
            ));
        }
        let spec = SystemSpec::new(kind, self.epsilon, self.mu)
            .map_err(|e| Failure::Config(e.to_string()))?;
        if !spec.x_in_domain(self.x0) {
            return Err(Failure::Hypothesis(format!(
                "x0 must lie in the x-section of D ({} requires x0 > 0), got {}",
                self.kind, self.x0
            )));
        }
        Ok(spec)
    }

    fn quad(&self) -> QuadratureSpec {
        QuadratureSpec {
            n_panels: self.n_panels,
            rel_tol: self.rel_tol,
            truncation_margin: 18.0,
            kernel_power: self.kernel_power,
        }
    }

    fn mc(&self) -> McConfig {
        McConfig {
            n_paths: self.n_paths,
            dt: self.dt,
            horizon: self.t,
            seed: self.seed,
            noise_scale: self.noise_scale,
            lambda: self.lambda,
        }
    }
}

fn map_core_error(e: Error) -> Failure {
    match e {
        Error::Range(m) | Error::Hypothesis(m) | Error::UnsupportedSystem(m) => {
            Failure::Hypothesis(m)
        }
        Error::Config(m) | Error::Domain(m) => Failure::Config(m),
        Error::BoundaryBreach { violations } => {
            Failure::Check(format!("boundary breached {violations} time(s) in strict mode"))
        }
        Error::Step(m) | Error::Convergence(m) => Failure::Check(m),
    }
}

/// Artifacts (CSV/SBK) are written only when an output path is configured;
/// stdout always carries exactly one JSON report.
fn artifact_writer(path: &Option<String>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {p}"))?,
        )),
        None => Box::new(io::sink()),
    })
}

fn emit_report(report: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
}

fn io_fail(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let cfg = Resolved::from(cli)?;
    match &cli.cmd {
        Cmd::ClassicalFlow => classical_flow(&cfg),
        Cmd::EigenScan {
            x_min,
            x_max,
            x_steps,
            fd_step,
        } => eigen_scan(&cfg, *x_min, *x_max, *x_steps, *fd_step),
        Cmd::Simulate { process } => simulate(&cfg, process),
        Cmd::VerifyIdentities {
            fd_step,
            grid_points,
        } => verify_identities(&cfg, *fd_step, *grid_points),
        Cmd::VerifyLaws {
            threshold,
            skip_conditional,
        } => verify_laws(&cfg, *threshold, *skip_conditional),
        Cmd::TodaChainCheck {
            nmax,
            t_values,
            x,
            y,
            fd_step,
        } => toda_chain_check(&cfg, *nmax, t_values, *x, *y, *fd_step),
    }
}

fn classical_flow(cfg: &Resolved) -> Result<bool, Failure> {
    let spec = cfg.check_hypotheses(false)?;
    let traj = flow_rk4(&spec, cfg.lambda, cfg.x0, cfg.t, cfg.dt).map_err(map_core_error)?;
    let mut out = artifact_writer(&cfg.output).map_err(io_fail)?;
    traj.write_csv(&mut out).map_err(io_fail)?;
    out.flush().map_err(io_fail)?;

    let report = conservation_report(&traj).map_err(map_core_error)?;
    let exact = flow_exact(&spec, cfg.lambda, cfg.x0, cfg.t).map_err(map_core_error)?;
    let endpoint_error = (traj.endpoint().x - exact.x).abs();
    let pass = report.r_u <= 1e-6 && report.r_lax <= 1e-4 && endpoint_error <= 1e-6;
    emit_report(&json!({
        "test": "classical-flow",
        "params": cfg,
        "r_u": report.r_u,
        "r_lax": report.r_lax,
        "r_eom": report.r_eom,
        "endpoint_error": endpoint_error,
        "pass": pass,
        "seed": cfg.seed,
    }));
    Ok(pass)
}

fn eigen_scan(
    cfg: &Resolved,
    x_min: f64,
    x_max: f64,
    x_steps: usize,
    fd_step: f64,
) -> Result<bool, Failure> {
    let spec = cfg.check_hypotheses(false)?;
    if !(x_min > 0.0) && spec.kind() != SystemKind::Toda {
        return Err(Failure::Hypothesis(format!(
            "x grid must stay in (0, inf) for {}, got x_min = {x_min}",
            cfg.kind
        )));
    }
    let quad = cfg.quad();
    let mut out = artifact_writer(&cfg.output).map_err(io_fail)?;
    writeln!(out, "x,psi,drift,eigen_residual").map_err(io_fail)?;
    let mut max_res: f64 = 0.0;
    for i in 0..=x_steps {
        let x = x_min + (x_max - x_min) * i as f64 / x_steps as f64;
        let p = psi(&spec, cfg.lambda, x, &quad).map_err(map_core_error)?;
        let d = log_psi_drift(&spec, cfg.lambda, x, &quad).map_err(map_core_error)?;
        let r = eigen_residual(&spec, cfg.lambda, x, &quad, fd_step).map_err(map_core_error)?;
        max_res = max_res.max(r);
        writeln!(out, "{x},{p},{d},{r}").map_err(io_fail)?;
    }
    out.flush().map_err(io_fail)?;
    let pass = max_res <= 1e-5;
    emit_report(&json!({
        "test": "eigen-scan",
        "params": cfg,
        "statistic": max_res,
        "pass": pass,
        "seed": cfg.seed,
    }));
    Ok(pass)
}

fn simulate(cfg: &Resolved, process: &str) -> Result<bool, Failure> {
    let spec = cfg.check_hypotheses(false)?;
    let quad = cfg.quad();
    let mc = cfg.mc();
    let ens: PathEnsemble = match process {
        "backlund" => simulate_backlund(&spec, cfg.x0, InitialU::Nu, &mc, &quad, cfg.strict)
            .map_err(map_core_error)?,
        "target" => simulate_target(&spec, cfg.lambda, cfg.x0, &mc, &quad, cfg.strict)
            .map_err(map_core_error)?,
        "toda-exact" => {
            toda_exact_paths(&spec, cfg.x0, InitialU::Nu, &mc, &quad).map_err(map_core_error)?
        }
        "pitman" => pitman_paths(cfg.lambda, cfg.x0, &mc).map_err(map_core_error)?,
        other => {
            return Err(Failure::Config(format!(
                "unknown process '{other}' (expected backlund|target|toda-exact|pitman)"
            )))
        }
    };
    let sbk = cfg.output.as_deref().is_some_and(|p| p.ends_with(".sbk"));
    let mut out = artifact_writer(&cfg.output).map_err(io_fail)?;
    if sbk {
        ens.write_sbk(&mut out).map_err(io_fail)?;
    } else {
        ens.write_csv(&mut out).map_err(io_fail)?;
    }
    out.flush().map_err(io_fail)?;
    let pass = ens.violations == 0;
    emit_report(&json!({
        "test": format!("simulate-{process}"),
        "params": cfg,
        "statistic": ens.violations,
        "pass": pass,
        "seed": cfg.seed,
    }));
    Ok(pass)
}

fn verify_identities(cfg: &Resolved, fd_step: f64, grid_points: usize) -> Result<bool, Failure> {
    let spec = cfg.check_hypotheses(false)?;
    let quad = QuadratureSpec {
        rel_tol: 1e-11,
        ..cfg.quad()
    };
    let grid = random_domain_grid(&spec, grid_points, cfg.seed);
    let mut results = Vec::new();

    let mut r_grad_max: f64 = 0.0;
    let mut r_lap_max: f64 = 0.0;
    for p in &grid {
        let (rg, rl) = spec.backlund_residuals(*p, fd_step).map_err(map_core_error)?;
        r_grad_max = r_grad_max.max(rg);
        r_lap_max = r_lap_max.max(rl);
    }
    results.push(json!({
        "test": "kernel-identity-gradient",
        "statistic": r_grad_max,
        "pass": r_grad_max <= 1e-10,
    }));
    results.push(json!({
        "test": "kernel-identity-laplacian",
        "statistic": r_lap_max,
        "pass": r_lap_max <= 1e-4,
    }));

    let cap = spec.lambda_cap().unwrap_or(1.0);
    let mut lax_max: f64 = 0.0;
    let mut crit_max: f64 = 0.0;
    let mut grad_id_max: f64 = 0.0;
    for lf in [0.0, 0.5, -0.9] {
        let lambda = lf * cap;
        for x in [0.5, 1.0, 1.7, 2.5] {
            lax_max = lax_max.max(spec.lax_residual(lambda, x).map_err(map_core_error)?);
            let u = spec.critical_point(lambda, x).map_err(map_core_error)?;
            let (_, gu) = spec
                .grad_log_kernel(lambda, PhasePoint::new(x, u))
                .map_err(map_core_error)?;
            crit_max = crit_max.max(gu.abs());
            grad_id_max = grad_id_max
                .max(gradient_identity_residual(&spec, lambda, x, 1e-4).map_err(map_core_error)?);
        }
    }
    results.push(json!({"test": "lax-eigenvalue", "statistic": lax_max, "pass": lax_max <= 1e-10}));
    results.push(json!({"test": "critical-point", "statistic": crit_max, "pass": crit_max <= 1e-12}));
    results.push(json!({
        "test": "gradient-flow-identity",
        "statistic": grad_id_max,
        "pass": grad_id_max <= 1e-7,
    }));

    let mut intw_max: f64 = 0.0;
    for lf in [0.0, 0.5, -0.9] {
        let rep = intertwining_kernel_residual(&spec, lf * cap, &grid, fd_step, 1e-5)
            .map_err(map_core_error)?;
        intw_max = intw_max.max(rep.max_abs);
    }
    results.push(json!({
        "test": "intertwining-kernel",
        "statistic": intw_max,
        "pass": intw_max <= 1e-5,
    }));

    let bump = match spec.kind() {
        SystemKind::Toda => BumpSpec {
            center: (0.0, 0.0),
            width: (1.0, 1.0),
        },
        _ => BumpSpec {
            center: (1.2, 0.0),
            width: (0.4, 0.4),
        },
    };
    let x_eval = bump.center.0 + 0.2 * bump.width.0;
    let op = intertwining_operator_residual(&spec, 0.4 * cap, &bump, x_eval, &quad, fd_step)
        .map_err(map_core_error)?;
    results.push(json!({
        "test": "intertwining-operator",
        "statistic": op,
        "pass": op <= 1e-4,
    }));

    let pass = results.iter().all(|r| r["pass"].as_bool().unwrap());
    emit_report(&json!({
        "test": "verify-identities",
        "params": cfg,
        "results": results,
        "pass": pass,
        "seed": cfg.seed,
    }));
    Ok(pass)
}

fn verify_laws(cfg: &Resolved, threshold: f64, skip_conditional: bool) -> Result<bool, Failure> {
    let spec = cfg.check_hypotheses(true)?;
    let quad = cfg.quad();
    let mc = cfg.mc();
    let mut results = Vec::new();

    let marginal = marginal_law_test(&spec, cfg.lambda, cfg.x0, cfg.t, &mc, &quad, threshold)
        .map_err(map_core_error)?;
    results.push(json!({
        "test": "marginal-law",
        "params": {"lambda": cfg.lambda, "x0": cfg.x0, "t": cfg.t},
        "statistic": marginal.statistic,
        "p_value": marginal.p_value,
        "pass": marginal.pass,
        "seed": cfg.seed,
    }));

    // a broken sampler must not silently pass: mismatched drift must reject.
    // Controls run at the full law-test path count and a horizon of at least
    // 1 so the drift mismatch has accumulated enough signal to have power.
    let cap = spec.lambda_cap().unwrap_or(1.0);
    let control_lambda = if cfg.lambda.abs() < 1e-12 {
        0.5 * cap.min(1.0)
    } else {
        0.0
    };
    let control_t = cfg.t.max(1.0);
    let mut control_mc = mc;
    control_mc.n_paths = control_mc.n_paths.max(20_000);
    control_mc.horizon = control_t;
    let control = marginal_law_pair(
        &spec,
        cfg.lambda,
        control_lambda,
        cfg.x0,
        control_t,
        &control_mc,
        &quad,
        threshold,
    )
    .map_err(map_core_error)?;
    let control_pass = control.p_value < 1e-3;
    results.push(json!({
        "test": "marginal-law-negative-control",
        "params": {"lambda": cfg.lambda, "target_lambda": control_lambda, "t": control_t},
        "statistic": control.statistic,
        "p_value": control.p_value,
        "pass": control_pass,
        "seed": cfg.seed,
    }));

    if !skip_conditional {
        for (name, g) in [("u", (|u: f64| u) as fn(f64) -> f64), ("tanh", |u: f64| u.tanh())] {
            let rep = conditional_law_test(&spec, cfg.lambda, cfg.x0, cfg.t, g, 8, &mc, &quad)
                .map_err(map_core_error)?;
            results.push(json!({
                "test": format!("conditional-law-{name}"),
                "params": {"lambda": cfg.lambda, "x0": cfg.x0, "t": cfg.t, "bins": 8},
                "statistic": rep.max_abs,
                "pass": rep.pass,
                "seed": cfg.seed,
            }));
        }
    }

    if spec.kind() == SystemKind::RationalCm {
        let rep =
            pitman_law_test(cfg.lambda, cfg.x0, cfg.t, &mc, threshold).map_err(map_core_error)?;
        results.push(json!({
            "test": "pitman-law",
            "params": {"lambda": cfg.lambda, "x": cfg.x0, "t": cfg.t},
            "statistic": rep.statistic,
            "p_value": rep.p_value,
            "pass": rep.pass,
            "seed": cfg.seed,
        }));
        let mut ctl_mc = mc;
        ctl_mc.n_paths = ctl_mc.n_paths.max(20_000);
        ctl_mc.horizon = cfg.t.max(1.0);
        let ctl = pitman_law_scaled(cfg.lambda, cfg.x0, cfg.t.max(1.0), &ctl_mc, threshold, 2.0)
            .map_err(map_core_error)?;
        let ctl_pass = ctl.p_value < 1e-3;
        results.push(json!({
            "test": "pitman-law-negative-control",
            "params": {"lambda": cfg.lambda, "x": cfg.x0, "t": cfg.t, "drift_scale": 2.0},
            "statistic": ctl.statistic,
            "p_value": ctl.p_value,
            "pass": ctl_pass,
            "seed": cfg.seed,
        }));
    }

    let pass = results.iter().all(|r| r["pass"].as_bool().unwrap());
    emit_report(&json!({
        "test": "verify-laws",
        "params": cfg,
        "results": results,
        "pass": pass,
        "seed": cfg.seed,
    }));
    Ok(pass)
}

fn toda_chain_check(
    cfg: &Resolved,
    nmax: usize,
    t_values: &[f64],
    x: f64,
    y: f64,
    fd_step: f64,
) -> Result<bool, Failure> {
    if nmax == 0 || nmax > 11 {
        return Err(Failure::Config(format!("nmax must be in 1..=11, got {nmax}")));
    }
    let mut rows = Vec::new();
    let mut max_res: f64 = 0.0;
    let mut max_alg: f64 = 0.0;
    for &t in t_values {
        for n in 1..=nmax {
            let p = TauChainPoint::new(n, t, x, y).map_err(map_core_error)?;
            let (r_xy, r_xx) = toda2d_residuals(p, fd_step).map_err(map_core_error)?;
            let chain = chain_residual(n, t, x, y, fd_step).map_err(map_core_error)?;
            let lt = |m: usize| -> Result<f64, Failure> {
                Ok(if m == 0 {
                    0.0
                } else {
                    log_tau(TauChainPoint::new(m, t, x, y).map_err(map_core_error)?)
                        .map_err(map_core_error)?
                })
            };
            let a_n = (lt(n - 1)? + lt(n + 1)? - 2.0 * lt(n)?).exp();
            let alg = (a_n - n as f64 / t).abs();
            max_res = max_res.max(r_xy).max(r_xx).max(chain);
            max_alg = max_alg.max(alg);
            rows.push(json!({
                "n": n, "t": t,
                "r_xy": r_xy, "r_xx": r_xx, "chain": chain, "a_n_error": alg,
            }));
        }
    }
    let pass = max_res <= 1e-5 && max_alg <= 1e-12;
    emit_report(&json!({
        "test": "toda-chain-check",
        "params": cfg,
        "results": rows,
        "statistic": max_res,
        "pass": pass,
        "seed": cfg.seed,
    }));
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Hypothesis(msg)) => {
            eprintln!("hypothesis violation: {msg}");
            ExitCode::from(3)
        }
    }
}
