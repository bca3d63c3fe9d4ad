//! CLI entry point: argument parsing, orchestration, exit codes.
//!
//! Exit code 0 means success, 2 means "computed: not admissible" from
//! `verify` (so scripts can branch on it), and 1 means an operational error;
//! errors also land in the report under a machine-readable `error` key.

use crate::classify::classify;
use crate::config;
use crate::constraint::{assemble, forward_check, theta_residual, BcKind, ThetaLayout};
use crate::flows::closed_form_flow;
use crate::maxwellian::{EvalPoint, MaxwellianParams};
use crate::report::{ClassifyReport, ConfigEcho, FactorReport, Report, VerifyReport};
use crate::transport::stationarity_test;
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_NOT_ADMISSIBLE: u8 = 2;

const MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BcArg {
    #[value(name = "bounce_back", alias = "bounce-back")]
    BounceBack,
    Specular,
}

impl From<BcArg> for BcKind {
    fn from(value: BcArg) -> BcKind {
        match value {
            BcArg::BounceBack => BcKind::BounceBack,
            BcArg::Specular => BcKind::Specular,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "eqkit",
    version,
    about = "Admissible local Maxwellians of a domain: constraint nullspace, symmetry class, flows and a particle-transport oracle"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a domain boundary, solve the boundary constraints, classify.
    Classify {
        /// Domain description (TOML)
        #[arg(long)]
        domain: PathBuf,
        /// Boundary condition
        #[arg(long, value_enum, default_value = "specular")]
        bc: BcArg,
        /// Number of boundary samples
        #[arg(long, default_value_t = 256)]
        samples: usize,
        /// RNG seed
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Relative singular-value tolerance for rank detection
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        /// Report destination (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the constraint matrix as CSV
        #[arg(long, value_name = "FILE")]
        dump_matrix: Option<PathBuf>,
    },
    /// Check a concrete parameter file against a domain and wall law.
    Verify {
        /// Maxwellian parameters (TOML)
        #[arg(long)]
        params: PathBuf,
        /// Domain description (TOML)
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, value_enum, default_value = "specular")]
        bc: BcArg,
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace the closed-form flow of an affine field as CSV.
    Trace {
        /// Field description (TOML)
        #[arg(long)]
        field: PathBuf,
        /// Start point, comma-separated
        #[arg(long)]
        x0: String,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        /// CSV destination (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Free-transport Monte Carlo stationarity test.
    Simulate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, value_enum, default_value = "specular")]
        bc: BcArg,
        /// Particle count
        #[arg(short = 'N', long = "particles", default_value_t = 100_000)]
        particles: usize,
        #[arg(long, default_value_t = 2.0)]
        t_end: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Checkpoint times, comma-separated (defaults to t_end/2 and t_end)
        #[arg(long)]
        checkpoints: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Factor a Maxwellian into (rho, a, u) at one (t, x).
    Factor {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        /// Position, comma-separated
        #[arg(long)]
        x: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_vector(text: &str) -> Result<DVector<f64>, String> {
    let parts: Result<Vec<f64>, _> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect();
    match parts {
        Ok(v) if v.len() == 2 || v.len() == 3 => Ok(DVector::from_vec(v)),
        Ok(v) => Err(format!("expected 2 or 3 components, got {}", v.len())),
        Err(e) => Err(format!("invalid number in \"{text}\": {e}")),
    }
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn check_samples(samples: usize) -> Result<(), String> {
    if samples < MIN_SAMPLES {
        return Err(format!("--samples must be at least {MIN_SAMPLES}"));
    }
    Ok(())
}

fn theta_order(dim: usize) -> String {
    if dim == 2 {
        "alpha, beta, lambda, w1_x, w1_y, w2_x, w2_y".to_string()
    } else {
        "alpha, beta, z_x, z_y, z_z, w1_x, w1_y, w1_z, w2_x, w2_y, w2_z".to_string()
    }
}

/// Worst normalized transport residual over seeded random phase points.
fn transport_residual_stats(params: &MaxwellianParams, points: usize, seed: u64) -> f64 {
    let dim = params.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let p = EvalPoint::new(
            rng.random_range(0.0..1.0),
            DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)),
            DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)),
        );
        let res = params.transport_residual(&p);
        let m = params.r0 * params.exponent(&p).exp();
        let normalizer =
            m * (1.0 + p.v.norm()) * (1.0 + p.x.norm() + p.t.abs() * p.v.norm()).powi(2);
        if normalizer > 0.0 {
            worst = worst.max(res.abs() / normalizer);
        }
    }
    worst
}

fn run_classify(
    domain_path: &Path,
    bc: BcKind,
    samples: usize,
    seed: u64,
    tol: f64,
    dump_matrix: Option<&Path>,
    echo: ConfigEcho,
) -> Result<Report, String> {
    check_samples(samples)?;
    let domain = config::load_domain(domain_path).map_err(|e| e.to_string())?;
    let boundary = domain
        .sample_boundary(samples, seed)
        .map_err(|e| e.to_string())?;
    let system = assemble(&boundary, bc, domain.dim()).map_err(|e| e.to_string())?;
    if let Some(path) = dump_matrix {
        let mut csv = String::new();
        for i in 0..system.rows.nrows() {
            let row: Vec<String> = (0..system.rows.ncols())
                .map(|j| format!("{:.16e}", system.rows[(i, j)]))
                .collect();
            let _ = writeln!(csv, "{}", row.join(","));
        }
        std::fs::write(path, csv).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    let family = system.nullspace(tol);
    let class = classify(&family);
    let fresh = domain
        .sample_boundary(samples, seed.wrapping_add(1))
        .map_err(|e| e.to_string())?;
    let residual = forward_check(&family, &fresh, bc);

    let mut report = Report::new(echo);
    report.classify = Some(ClassifyReport {
        singular_values: family.singular_values.clone(),
        null_dim: family.null_dim,
        gap_ratio: family.gap_ratio,
        low_gap_warning: family.low_gap_warning,
        basis: family
            .basis
            .iter()
            .map(|b| b.as_slice().to_vec())
            .collect(),
        theta_order: theta_order(domain.dim()),
        classification: class,
        forward_check_residual: residual,
    });
    Ok(report)
}

fn run_verify(
    params_path: &Path,
    domain_path: &Path,
    bc: BcKind,
    samples: usize,
    seed: u64,
    tol: f64,
    echo: ConfigEcho,
) -> Result<(Report, bool), String> {
    check_samples(samples)?;
    let params = config::load_params(params_path).map_err(|e| e.to_string())?;
    let domain = config::load_domain(domain_path).map_err(|e| e.to_string())?;
    if params.dim() != domain.dim() {
        return Err(format!(
            "parameter dimension {} does not match domain dimension {}",
            params.dim(),
            domain.dim()
        ));
    }
    let transport_points = 1000;
    let transport_max = transport_residual_stats(&params, transport_points, seed);
    let boundary = domain
        .sample_boundary(samples, seed)
        .map_err(|e| e.to_string())?;
    let layout = ThetaLayout::new(domain.dim());
    let theta = layout.from_params(&params);
    let boundary_residual = theta_residual(&theta, &boundary, bc, domain.dim());
    let admissible = boundary_residual <= tol;

    let mut report = Report::new(echo);
    report.verify = Some(VerifyReport {
        transport_residual_max: transport_max,
        transport_points,
        boundary_residual,
        admissible,
        tol,
    });
    Ok((report, admissible))
}

fn run_trace(
    field_path: &Path,
    x0: &str,
    t_end: f64,
    steps: usize,
) -> Result<String, String> {
    if steps == 0 {
        return Err("--steps must be positive".into());
    }
    let field = config::load_field(field_path).map_err(|e| e.to_string())?;
    let x0 = parse_vector(x0)?;
    if x0.len() != field.dim() {
        return Err(format!(
            "start point has {} components, field is {}-dimensional",
            x0.len(),
            field.dim()
        ));
    }
    let times: Vec<f64> = (0..=steps)
        .map(|i| t_end * i as f64 / steps as f64)
        .collect();
    let curve = closed_form_flow(&field, &x0, &times).map_err(|e| e.to_string())?;
    let mut csv = String::new();
    let headers: Vec<String> = (1..=x0.len()).map(|i| format!("x{i}")).collect();
    let _ = writeln!(csv, "t,{}", headers.join(","));
    for (t, p) in curve.times.iter().zip(&curve.points) {
        let cols: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(csv, "{t:.16e},{}", cols.join(","));
    }
    Ok(csv)
}

#[allow(clippy::too_many_arguments)]
fn run_simulate(
    params_path: &Path,
    domain_path: &Path,
    bc: BcKind,
    particles: usize,
    t_end: f64,
    seed: u64,
    checkpoints: Option<&str>,
    echo: ConfigEcho,
) -> Result<Report, String> {
    if particles == 0 {
        return Err("--particles must be positive".into());
    }
    let params = config::load_params(params_path).map_err(|e| e.to_string())?;
    let domain = config::load_domain(domain_path).map_err(|e| e.to_string())?;
    let checkpoints: Vec<f64> = match checkpoints {
        Some(text) => {
            let parsed: Result<Vec<f64>, _> =
                text.split(',').map(|p| p.trim().parse::<f64>()).collect();
            let mut v = parsed.map_err(|e| format!("invalid checkpoint list: {e}"))?;
            v.sort_by(f64::total_cmp);
            if v.is_empty() || v.iter().any(|&t| t <= 0.0) {
                return Err("checkpoints must be positive times".into());
            }
            v
        }
        None => vec![t_end / 2.0, t_end],
    };
    let sim = stationarity_test(&params, &domain, bc, particles, seed, &checkpoints)
        .map_err(|e| e.to_string())?;
    let mut report = Report::new(echo);
    report.simulate = Some(sim);
    Ok(report)
}

fn run_factor(
    params_path: &Path,
    t: f64,
    x: &str,
    echo: ConfigEcho,
) -> Result<Report, String> {
    let params = config::load_params(params_path).map_err(|e| e.to_string())?;
    let x = parse_vector(x)?;
    if x.len() != params.dim() {
        return Err(format!(
            "position has {} components, parameters are {}-dimensional",
            x.len(),
            params.dim()
        ));
    }
    let factored = params.factored();
    let window = factored.positivity_window();
    let result = factored.factor(t, &x).map_err(|e| e.to_string())?;
    let mut report = Report::new(echo);
    report.factor = Some(FactorReport {
        t,
        x: x.as_slice().to_vec(),
        rho: result.rho,
        rho_formula: result.rho_formula,
        a: result.a,
        u: result.u.as_slice().to_vec(),
        window_lo: window.lo,
        window_hi: window.hi,
    });
    Ok(report)
}

/// Execute a parsed command line; returns the process exit code.
pub fn execute(cli: Cli) -> u8 {
    match cli.command {
        Command::Classify {
            domain,
            bc,
            samples,
            seed,
            tol,
            out,
            dump_matrix,
        } => {
            let mut echo = ConfigEcho::new("classify");
            echo.domain_file = Some(domain.display().to_string());
            echo.bc = Some(bc.into());
            echo.samples = Some(samples);
            echo.seed = Some(seed);
            echo.tol = Some(tol);
            match run_classify(
                &domain,
                bc.into(),
                samples,
                seed,
                tol,
                dump_matrix.as_deref(),
                echo,
            ) {
                Ok(report) => emit(&out, &report, EXIT_OK),
                Err(message) => fail(&out, "classify", message),
            }
        }
        Command::Verify {
            params,
            domain,
            bc,
            samples,
            seed,
            tol,
            out,
        } => {
            let mut echo = ConfigEcho::new("verify");
            echo.params_file = Some(params.display().to_string());
            echo.domain_file = Some(domain.display().to_string());
            echo.bc = Some(bc.into());
            echo.samples = Some(samples);
            echo.seed = Some(seed);
            echo.tol = Some(tol);
            match run_verify(&params, &domain, bc.into(), samples, seed, tol, echo) {
                Ok((report, admissible)) => emit(
                    &out,
                    &report,
                    if admissible { EXIT_OK } else { EXIT_NOT_ADMISSIBLE },
                ),
                Err(message) => fail(&out, "verify", message),
            }
        }
        Command::Trace {
            field,
            x0,
            t_end,
            steps,
            out,
        } => match run_trace(&field, &x0, t_end, steps) {
            Ok(csv) => match write_output(&out, &csv) {
                Ok(()) => EXIT_OK,
                Err(message) => fail(&out, "trace", message),
            },
            Err(message) => fail(&out, "trace", message),
        },
        Command::Simulate {
            params,
            domain,
            bc,
            particles,
            t_end,
            seed,
            checkpoints,
            out,
        } => {
            let mut echo = ConfigEcho::new("simulate");
            echo.params_file = Some(params.display().to_string());
            echo.domain_file = Some(domain.display().to_string());
            echo.bc = Some(bc.into());
            echo.particles = Some(particles);
            echo.t_end = Some(t_end);
            echo.seed = Some(seed);
            match run_simulate(
                &params,
                &domain,
                bc.into(),
                particles,
                t_end,
                seed,
                checkpoints.as_deref(),
                echo,
            ) {
                Ok(report) => emit(&out, &report, EXIT_OK),
                Err(message) => fail(&out, "simulate", message),
            }
        }
        Command::Factor { params, t, x, out } => {
            let mut echo = ConfigEcho::new("factor");
            echo.params_file = Some(params.display().to_string());
            echo.t = Some(t);
            match run_factor(&params, t, &x, echo) {
                Ok(report) => emit(&out, &report, EXIT_OK),
                Err(message) => fail(&out, "factor", message),
            }
        }
    }
}

fn emit(out: &Option<PathBuf>, report: &Report, code: u8) -> u8 {
    let text = crate::report::to_json(report);
    match write_output(out, &text) {
        Ok(()) => code,
        Err(message) => {
            eprintln!("{message}");
            EXIT_ERROR
        }
    }
}

fn fail(out: &Option<PathBuf>, command: &str, message: String) -> u8 {
    let report = Report::error(command, message.clone());
    let text = crate::report::to_json(&report);
    // best effort: errors go to the requested destination and stderr
    let _ = write_output(out, &text);
    eprintln!("error: {message}");
    EXIT_ERROR
}
