//! Batch command-line front end for the vortex solver.
//!
//! Exit codes: 0 on success, 1 on failed verification or non-convergence,
//! 2 on configuration or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use csvortex::config::RunConfiguration;
use csvortex::radial::{solve_radial, RadialProblem};
use csvortex::{run, ConformalFactor, Error};

#[derive(Parser)]
#[command(name = "csvortex", version, about = "Self-dual Chern-Simons vortex solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a configuration and write the JSON report.
    Solve(SolveArgs),
    /// Run the one-dimensional radial oracle for a single origin vortex.
    Oracle(OracleArgs),
    /// Solve and grade the physics invariants; nonzero exit on failure.
    Verify(VerifyArgs),
    /// Print the default configuration as a template.
    Report,
}

#[derive(Args)]
struct SolveArgs {
    /// Path to a JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Where to write the report (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write w/bfield/a0 node values as CSV.
    #[arg(long)]
    dump_fields: bool,
    /// Also render SVG heatmaps of w and the magnetic field.
    #[arg(long)]
    heatmap: bool,
}

#[derive(Args)]
struct OracleArgs {
    /// Vortex multiplicity.
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Split regulator.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Metric family: "flat" or "gaussian_bump:A,sigma".
    #[arg(long, default_value = "flat")]
    metric: String,
    /// Outer truncation radius.
    #[arg(long, default_value_t = 40.0)]
    rmax: f64,
    /// Number of mesh intervals.
    #[arg(long, default_value_t = 8192)]
    nodes: usize,
    /// Write the profile as CSV to this path (stdout summary otherwise).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Path to a JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Skip the small-domain negative control.
    #[arg(long)]
    skip_negative_control: bool,
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("VORTEX_WORKERS") {
        if let Ok(workers) = v.parse::<usize>() {
            if workers >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build_global();
            }
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> ExitCode {
    if let Some(e) = err.downcast_ref::<Error>() {
        match e {
            Error::NonConvergence { .. } | Error::Overflow { .. } => ExitCode::from(1),
            _ => ExitCode::from(2),
        }
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Report => cmd_report(),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    }
}

fn cmd_solve(args: SolveArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = RunConfiguration::from_path(&args.config)?;
    if args.dump_fields {
        cfg.outputs.dump_fields = true;
    }
    if args.heatmap {
        cfg.outputs.heatmaps = true;
    }
    if cfg.outputs.directory.is_none() {
        if let Some(out) = &args.output {
            if let Some(parent) = out.parent() {
                if !parent.as_os_str().is_empty() {
                    cfg.outputs.directory = Some(parent.display().to_string());
                }
            }
        }
    }
    let output = run::execute(&cfg)?;
    run::emit_artifacts(&cfg, &output)?;
    let json = output.report.to_json()?;
    match &args.output {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    if output.report.solve.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "solver did not converge (residual {:.3e})",
            output.report.solve.final_residual
        );
        Ok(ExitCode::from(1))
    }
}

fn parse_metric(text: &str) -> anyhow::Result<ConformalFactor> {
    if text == "flat" {
        return Ok(ConformalFactor::flat());
    }
    if let Some(rest) = text.strip_prefix("gaussian_bump:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() == 2 {
            let a: f64 = parts[0].parse()?;
            let s: f64 = parts[1].parse()?;
            return Ok(ConformalFactor::gaussian_bump(a, s, (0.0, 0.0))?);
        }
    }
    anyhow::bail!("unrecognized metric '{text}' (expected flat or gaussian_bump:A,sigma)")
}

fn cmd_oracle(args: OracleArgs) -> anyhow::Result<ExitCode> {
    let metric = parse_metric(&args.metric)?;
    let mut problem = RadialProblem::new(args.n, args.mu, metric.clone())?;
    problem.r_max = args.rmax;
    problem.nodes = args.nodes;
    let profile = solve_radial(&problem)?;
    let flux = profile.flux(&metric)?;
    let target = 2.0 * std::f64::consts::PI * args.n as f64;
    eprintln!(
        "oracle converged in {} iterations, residual {:.3e}",
        profile.iterations, profile.residual
    );
    println!(
        "flux = {:.12} (2 pi n = {:.12}, rel dev {:.3e})",
        flux,
        target,
        ((flux - target) / target).abs()
    );
    if let Some(path) = &args.output {
        let mut csv = String::from("r,u,w,bfield\n");
        for j in 0..profile.r.len() {
            csv.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                profile.r[j], profile.u[j], profile.w[j], profile.bfield[j]
            ));
        }
        std::fs::write(path, csv)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<ExitCode> {
    let cfg = RunConfiguration::from_path(&args.config)?;
    let summary = run::verify(&cfg, !args.skip_negative_control)?;
    for c in &summary.checks {
        println!(
            "{} {} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if let Some(nc) = summary.negative_control_failed_as_expected {
        println!(
            "{} negative_control (small domain {})",
            if nc { "PASS" } else { "FAIL" },
            if nc { "failed as expected" } else { "unexpectedly passed" }
        );
    }
    Ok(if summary.all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_report() -> anyhow::Result<ExitCode> {
    let cfg = RunConfiguration::default();
    println!("{}", serde_json::to_string_pretty(&cfg)?);
    Ok(ExitCode::SUCCESS)
}
