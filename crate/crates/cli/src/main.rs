//! `frgrav` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration error, 2 identity failure,
//! 3 evolution failure (coercivity loss, non-finite values, failed sweep
//! member), 4 Picard iteration without contraction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use frgrav::dynamics::{ResidualReport, RhsOptions};
use frgrav::experiments::{kappa_sweep, picard_experiment, SweepConfig};
use frgrav::identities::{run_suite, IdentityOptions};
use frgrav::initialdata::build;
use frgrav::norms::{e_minus1, norm_report, x_norm, x_p_norm, NormReport};
use frgrav::solver::{evolve, Integrator};
use frgrav::tensor::Convention;
use frgrav::{Error, FRModel};

use config::RunConfig;
use output::Output;

#[derive(Parser)]
#[command(name = "frgrav", version, about = "Augmented conformal f(R) gravity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration; built-in defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; all cores when omitted
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Run the analytic-jet identity suite
    Identities,
    /// Evolve initial data and record residual and norm diagnostics
    Evolve,
    /// Compare augmented and Einstein evolutions over a list of kappa values
    SweepKappa,
    /// Run the Picard iteration and compare its fixed point with RK4
    Picard,
    /// Evaluate the norm family on the initial data
    Norms,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Identities => "identities",
            Command::Evolve => "evolve",
            Command::SweepKappa => "sweep-kappa",
            Command::Picard => "picard",
            Command::Norms => "norms",
        }
    }
}

const EXIT_CONFIG: u8 = 1;
const EXIT_IDENTITY: u8 = 2;
const EXIT_EVOLUTION: u8 = 3;
const EXIT_NO_CONTRACTION: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NoContraction { .. }) => EXIT_NO_CONTRACTION,
        Some(
            Error::CoercivityLost { .. }
            | Error::NaNDetected { .. }
            | Error::SingularMetric { .. }
            | Error::NonPositiveConformalFactor(_)
            | Error::NonSpacelikeSlice
            | Error::DivisionByZero(_),
        ) => EXIT_EVOLUTION,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let out = Output::new(&cli.out, cli.command.name(), &cfg)?;
    match cli.command {
        Command::Identities => cmd_identities(&cfg, &out),
        Command::Evolve => cmd_evolve(&cfg, &out),
        Command::SweepKappa => cmd_sweep_kappa(&cfg, &out),
        Command::Picard => cmd_picard(&cfg, &out),
        Command::Norms => cmd_norms(&cfg, &out),
    }
}

fn rhs_options(cfg: &RunConfig) -> RhsOptions {
    RhsOptions { kappa_terms: !cfg.debug.ablate_kappa_terms, ..RhsOptions::default() }
}

fn cmd_identities(cfg: &RunConfig, out: &Output) -> Result<u8> {
    let opts = IdentityOptions {
        seed: cfg.identities.seed,
        samples: cfg.identities.samples,
        kappa: cfg.kappa,
        stencil: cfg.grid()?.stencil,
        fd_step: cfg.identities.fd_step,
        convention: Convention { christoffel_sign: if cfg.debug.corrupt_christoffel { -1.0 } else { 1.0 } },
    };
    let report = match run_suite(&opts) {
        Ok(r) => r,
        Err(Error::InvalidConfig(msg)) => return Err(Error::InvalidConfig(msg).into()),
        Err(e) => {
            eprintln!("identity suite aborted: {e}");
            return Ok(EXIT_IDENTITY);
        }
    };
    let fmt_opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
    let rows: Vec<String> = report
        .results
        .iter()
        .map(|r| {
            format!(
                "{},{:.6e},{:.1e},{},{},{}",
                r.name,
                r.residual,
                r.threshold,
                fmt_opt(r.rate),
                fmt_opt(r.expected_rate),
                r.passed
            )
        })
        .collect();
    out.write_csv("identities.csv", "identity,residual,threshold,rate,expected_rate,passed", &rows)?;
    for r in &report.results {
        let rate = r.rate.map_or(String::new(), |v| format!("  rate {v:.3}"));
        println!(
            "{:<26} {:>10.3e} (threshold {:.0e}){rate}  {}",
            r.name,
            r.residual,
            r.threshold,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    Ok(if report.all_passed() { 0 } else { EXIT_IDENTITY })
}

fn cmd_evolve(cfg: &RunConfig, out: &Output) -> Result<u8> {
    let model = FRModel::new(cfg.kappa)?;
    let grid = cfg.grid()?;
    let ecfg = frgrav::solver::EvolveConfig {
        residuals: true,
        norm_order: Some(cfg.norm_order),
        keep_states: cfg.snapshots || cfg.evolve.integrator == Integrator::Picard,
        rhs: rhs_options(cfg),
        ..cfg.evolve
    };
    ecfg.schedule(&model, grid.min_spacing())?;
    let s0 = build(&cfg.data, grid, &model)?;

    if ecfg.integrator == Integrator::Picard {
        let report = picard_experiment(&model, &ecfg, &s0)?;
        write_picard(out, &report)?;
        let mut residuals = Vec::new();
        let mut norms = Vec::new();
        for (j, s) in report.result.states.iter().enumerate() {
            if j % ecfg.stride == 0 || j + 1 == report.result.states.len() {
                residuals.push(frgrav::dynamics::residual_report(&model, &ecfg.rhs, s)?.csv_row());
                norms.push(norm_report(s, cfg.norm_order, cfg.kappa)?.csv_row());
                if cfg.snapshots {
                    out.write_snapshot(j, s)?;
                }
            }
        }
        out.write_csv("residuals.csv", ResidualReport::CSV_HEADER, &residuals)?;
        out.write_csv("norms.csv", NormReport::CSV_HEADER, &norms)?;
        return Ok(if report.result.converged { 0 } else { EXIT_NO_CONTRACTION });
    }

    let traj = evolve(&model, &ecfg, &s0)?;
    let residuals: Vec<String> = traj.samples.iter().filter_map(|s| s.residuals.map(|r| r.csv_row())).collect();
    let norms: Vec<String> = traj.samples.iter().filter_map(|s| s.norms.map(|n| n.csv_row())).collect();
    out.write_csv("residuals.csv", ResidualReport::CSV_HEADER, &residuals)?;
    out.write_csv("norms.csv", NormReport::CSV_HEADER, &norms)?;
    if cfg.snapshots {
        for (j, smp) in traj.samples.iter().enumerate() {
            if let Some(s) = &smp.state {
                out.write_snapshot(j, s)?;
            }
        }
    }
    println!("steps {} dt {:.6e} samples {} final t {:.6}", traj.steps, traj.dt, traj.samples.len(), traj.last.t);
    match traj.failure {
        Some(e) => {
            eprintln!("evolution stopped at t = {:.6}: {e}", traj.last.t);
            Ok(exit_code(&e.into()))
        }
        None => Ok(0),
    }
}

fn cmd_sweep_kappa(cfg: &RunConfig, out: &Output) -> Result<u8> {
    let grid = cfg.grid()?;
    let ecfg = frgrav::solver::EvolveConfig { rhs: rhs_options(cfg), ..cfg.evolve };
    for &kappa in &cfg.kappas {
        ecfg.schedule(&FRModel::new(kappa)?, grid.min_spacing()).with_context(|| format!("member kappa = {kappa}"))?;
    }
    let sweep = SweepConfig {
        kappas: cfg.kappas.clone(),
        data: cfg.data,
        grid,
        t_end: cfg.evolve.t_end,
        stride: cfg.evolve.stride,
        order: cfg.norm_order,
        ablate_kappa_terms: cfg.debug.ablate_kappa_terms,
    };
    let result = match kappa_sweep(&sweep) {
        Ok(r) => r,
        Err(e @ Error::InvalidConfig(_)) => return Err(e.into()),
        Err(e) => {
            eprintln!("sweep member failed: {e}");
            return Ok(EXIT_EVOLUTION);
        }
    };
    for row in &result.rows {
        let rows: Vec<String> = row.series.iter().map(|(t, d)| format!("{t:.12e},{d:.12e}")).collect();
        out.write_csv(&format!("member_kappa_{:e}.csv", row.kappa), "t,distance", &rows)?;
    }
    let table: Vec<String> = result.rows.iter().map(|r| format!("{:e},{:.12e}", r.kappa, r.sup_distance)).collect();
    out.write_csv("sweep.csv", "kappa,sup_distance", &table)?;
    let slope = result.slope.map_or("undefined".to_string(), |s| format!("{s:.6}"));
    out.write_csv("sweep_fit.csv", "slope,points", &[format!("{slope},{}", result.rows.len())])?;
    for r in &result.rows {
        println!("kappa {:>8.1e}  sup D {:.6e}", r.kappa, r.sup_distance);
    }
    println!("log-log slope {slope}");
    Ok(0)
}

fn write_picard(out: &Output, report: &frgrav::experiments::PicardReport) -> Result<()> {
    let r = &report.result;
    let rows: Vec<String> = r
        .distances
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let ratio = if i == 0 { String::new() } else { format!("{:.12e}", r.ratios[i - 1]) };
            format!("{},{d:.12e},{ratio}", i + 1)
        })
        .collect();
    out.write_csv("picard.csv", "iteration,distance,ratio", &rows)?;
    out.write_csv(
        "picard_summary.csv",
        "iterations,converged,max_ratio,rk4_distance",
        &[format!("{},{},{:.12e},{:.12e}", r.iterations, r.converged, report.max_ratio, report.rk4_distance)],
    )?;
    println!(
        "iterations {} converged {} max ratio {:.4e} distance to RK4 {:.4e}",
        r.iterations, r.converged, report.max_ratio, report.rk4_distance
    );
    Ok(())
}

fn cmd_picard(cfg: &RunConfig, out: &Output) -> Result<u8> {
    let model = FRModel::new(cfg.kappa)?;
    let grid = cfg.grid()?;
    let ecfg = frgrav::solver::EvolveConfig { rhs: rhs_options(cfg), ..cfg.evolve };
    ecfg.schedule(&model, grid.min_spacing())?;
    let s0 = build(&cfg.data, grid, &model)?;
    let report = picard_experiment(&model, &ecfg, &s0)?;
    write_picard(out, &report)?;
    Ok(if report.result.converged { 0 } else { EXIT_NO_CONTRACTION })
}

fn cmd_norms(cfg: &RunConfig, out: &Output) -> Result<u8> {
    let model = FRModel::new(cfg.kappa)?;
    let grid = cfg.grid()?;
    let s0 = build(&cfg.data, grid, &model)?;
    let report = norm_report(&s0, cfg.norm_order, cfg.kappa)?;
    out.write_csv("norms.csv", NormReport::CSV_HEADER, &[report.csv_row()])?;
    let mut rows = Vec::new();
    for (slot, name) in frgrav::fields::slot::NAMES.iter().enumerate() {
        let u = s0.grid_function(slot);
        let x: Vec<String> = (0..=cfg.norm_order).map(|d| format!("{:.12e}", x_norm(&u, d))).collect();
        rows.push(format!("{name},{},{:.12e},{:.12e}", x.join(";"), x_p_norm(&u, cfg.norm_order), e_minus1(&u)));
    }
    out.write_csv("field_norms.csv", "field,x_norms,xp_norm,e_minus1", &rows)?;
    println!("{}", NormReport::CSV_HEADER);
    println!("{}", report.csv_row());
    Ok(0)
}
