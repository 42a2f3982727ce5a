use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use charflow::boundary::{delta_grid, growth_bound, truncated_norms};
use charflow::resolvent::{resolvent_apply, trace_norms};
use charflow::semigroup::{evolve_full, Marcher, Mode, TimeGrid, DEFAULT_DELTA_LEVELS};
use charflow::verify::{green_residual, run_checks};
use charflow::{Error, GridFunction, Scenario, Side};
use clap::{Args, Parser, Subcommand};

/// Relative tolerance on the tail of the boundary series in `resolvent`.
const RESOLVENT_TOL: f64 = 1e-12;

#[derive(Parser)]
#[command(name = "charflow", version, about = "Transport semigroups with re-entry boundary operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Norms and traces of U_H(t) f at the configured times.
    Evolve(Common),
    /// Resolvent (lambda - T_H)^{-1} g at the configured lambdas.
    Resolvent(Common),
    /// Run the numerical check suite; exits nonzero on any failure.
    Verify(Common),
    /// Truncated norms of H and the growth constants (M, omega).
    GrowthBound(Common),
    /// Trace-space norms of the initial function.
    Norms(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file or preset name.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "CHARFLOW_THREADS")]
    threads: Option<usize>,
    /// Seed for the random test data used by `verify`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn setup(c: &Common) -> Result<Scenario> {
    if let Some(n) = c.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let config = charflow::scenario::parse_config(&c.config)?;
    let scenario = Scenario::build(&config)?;
    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    Ok(scenario)
}

fn trace_lp(f: &GridFunction, side: Side) -> Result<f64> {
    if f.grid().has_boundary() {
        Ok(f.trace(side)?.lp_norm())
    } else {
        Ok(0.0)
    }
}

fn evolve(sc: &Scenario, out: &Path) -> Result<ExitCode> {
    let f0 = sc.initial()?;
    let mut text = String::from("time,norm_p,trace_in_lp,trace_out_lp,green_residual\n");
    let mut row = |t: f64, f: &GridFunction| -> Result<()> {
        let (tin, tout) = (trace_lp(f, Side::Incoming)?, trace_lp(f, Side::Outgoing)?);
        let line = [t, f.lp_norm(), tin, tout, green_residual(f)?].map(num).join(",");
        writeln!(text, "{line}")?;
        Ok(())
    };
    match sc.config.run.mode {
        Mode::ExactShift => {
            let mut m = Marcher::new(&f0, &sc.boundary)?;
            for &t in &sc.config.run.times {
                let steps = TimeGrid::aligned(&sc.grid, t)?.steps;
                if steps < m.steps() {
                    m = Marcher::new(&f0, &sc.boundary)?;
                }
                m.advance(steps - m.steps());
                row(t, &m.state())?;
            }
        }
        Mode::Interpolating => {
            for &t in &sc.config.run.times {
                row(t, &evolve_full(&f0, t, &sc.boundary, Mode::Interpolating)?)?;
            }
        }
    }
    write_file(out, "evolve.csv", &text)?;
    Ok(ExitCode::SUCCESS)
}

fn resolvent(sc: &Scenario, out: &Path) -> Result<ExitCode> {
    let g = sc.source()?;
    let mut text = String::from("lambda,terms,residual,rho\n");
    let mut diverged = Vec::new();
    for &lambda in &sc.config.run.lambdas {
        match resolvent_apply(&g, lambda, &sc.boundary, RESOLVENT_TOL) {
            Ok((_, rep)) => writeln!(text, "{},{},{},{}", num(lambda), rep.series_terms_used, num(rep.residual), num(rep.rho))?,
            Err(Error::Divergence { rho, .. }) => {
                writeln!(text, "{},0,{},{}", num(lambda), num(f64::NAN), num(rho))?;
                diverged.push(lambda);
            }
            Err(e) => return Err(e.into()),
        }
    }
    write_file(out, "resolvent.csv", &text)?;
    if diverged.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("boundary series not certified convergent for lambda = {diverged:?}");
        Ok(ExitCode::FAILURE)
    }
}

fn verify(sc: &Scenario, out: &Path, seed: u64) -> Result<ExitCode> {
    let results = run_checks(sc, seed);
    let mut csv = String::from("name,residual,tolerance,passed\n");
    let mut jsonl = String::new();
    for r in &results {
        let passed = if r.skipped { "skipped" } else if r.passed { "true" } else { "false" };
        writeln!(csv, "{},{},{},{}", r.name, num(r.residual), num(r.tolerance), passed)?;
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    write_file(out, "verify.csv", &csv)?;
    write_file(out, "verify.jsonl", &jsonl)?;
    let failed: Vec<_> = results.iter().filter(|r| r.failed()).collect();
    let skipped = results.iter().filter(|r| r.skipped).count();
    println!(
        "{}: {} passed, {} failed, {} skipped",
        sc.config.name,
        results.len() - failed.len() - skipped,
        failed.len(),
        skipped
    );
    for r in &failed {
        println!("FAIL {}: residual {:e} > tolerance {:e} {}", r.name, r.residual, r.tolerance, r.note);
    }
    Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn growth(sc: &Scenario, out: &Path) -> Result<ExitCode> {
    let p = sc.p();
    let norm = sc.boundary.operator_norm(&sc.grid, p)?;
    let delta = sc.config.delta0();
    let (rows, c) = truncated_norms(&sc.boundary, &sc.grid, p, &delta_grid(delta, DEFAULT_DELTA_LEVELS))?;
    let mut text = String::from("delta,truncated_norm,lower_bound_only\n");
    for (d, est) in &rows {
        writeln!(text, "{},{},{}", num(*d), num(est.value), est.lower_bound_only)?;
    }
    write_file(out, "growth_bound.csv", &text)?;
    let g = growth_bound(norm.value, c, delta)?;
    let summary = format!("A,C,delta,M,omega\n{}\n", [g.a, g.c, g.delta, g.m, g.omega].map(num).join(","));
    write_file(out, "growth_summary.csv", &summary)?;
    println!("A = {}, C = {}, M = {}, omega = {}", g.a, g.c, g.m, g.omega);
    Ok(ExitCode::SUCCESS)
}

fn norms(sc: &Scenario, out: &Path) -> Result<ExitCode> {
    let f = sc.initial()?;
    let mut text = String::from("side,lp,y,ytilde\n");
    for side in [Side::Incoming, Side::Outgoing] {
        let n = if sc.grid.has_boundary() { trace_norms(&f.trace(side)?) } else { [0.0; 3] };
        writeln!(text, "{},{}", side.name(), n.map(num).join(","))?;
    }
    write_file(out, "norms.csv", &text)?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Evolve(c) => evolve(&setup(c)?, &c.out),
        Command::Resolvent(c) => resolvent(&setup(c)?, &c.out),
        Command::Verify(c) => verify(&setup(c)?, &c.out, c.seed),
        Command::GrowthBound(c) => growth(&setup(c)?, &c.out),
        Command::Norms(c) => norms(&setup(c)?, &c.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
