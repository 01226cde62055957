//! Command-line front end for the transport lab.
//!
//! Three subcommands: `run` executes an experiment config and writes its
//! report files, `build-space` materializes a declarative space spec together
//! with its full metric, and `audit-example` runs the dyadic-arc-space audit
//! without needing a config file. The environment variable `OTLAB_THREADS`
//! bounds the worker pool used by the parallel slope scans.
//!
//! Exit codes: 0 — the run completed and every invariant passed; 1 — the run
//! completed but a recorded invariant failed; 2 — the run could not be
//! completed at all (unreadable config, unbuildable space, I/O failure).

use std::env;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use otlab_core::{
    emit_report, load_config, read_json, run, write_space, Error, ExperimentConfig,
    ExperimentName, Report, Result, SpaceSpec, Tolerances,
};

#[derive(Debug, Parser)]
#[command(
    name = "otlab",
    version,
    about = "Optimal transport experiments on finite geodesic metric spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment config and emit its report files.
    Run {
        /// Experiment config (JSON).
        config: PathBuf,
        /// Where to write report files; overrides the config's `output_dir`,
        /// and defaults to the current directory when both are absent.
        #[arg(short, long, value_name = "DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Build the space described by a spec file and save it with its metric.
    BuildSpace {
        /// Space spec (JSON).
        spec: PathBuf,
        /// Destination path for the saved space.
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Audit the dyadic arc space: exact distances and slopes, the Lipschitz
    /// constant, and the upper-gradient failure on the base segment.
    AuditExample {
        /// Nesting depth of the arc families.
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Edges per arc; must be even so arc midpoints are vertices.
        #[arg(long, default_value_t = 4)]
        resolution: usize,
        /// Optional directory for report files; print-only when absent.
        #[arg(short, long, value_name = "DIR")]
        output_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("otlab: {err}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<bool> {
    configure_threads()?;
    match command {
        Command::Run { config, output_dir } => {
            let cfg = load_config(&config)?;
            let report = run(&cfg)?;
            let dir = output_dir
                .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            print_report(&report);
            for path in emit_report(&report, &dir)? {
                println!("wrote {}", path.display());
            }
            Ok(report.passed)
        }
        Command::BuildSpace { spec, output } => {
            let spec: SpaceSpec = read_json(&spec)?;
            let space = spec.build()?;
            write_space(&space, &output)?;
            println!(
                "wrote {} ({} vertices, {} edges, diameter {})",
                output.display(),
                space.vertex_count(),
                space.edges().len(),
                space.diameter()
            );
            Ok(true)
        }
        Command::AuditExample { depth, resolution, output_dir } => {
            let cfg = audit_config(depth, resolution);
            let report = run(&cfg)?;
            print_report(&report);
            if let Some(dir) = output_dir {
                for path in emit_report(&report, &dir)? {
                    println!("wrote {}", path.display());
                }
            }
            Ok(report.passed)
        }
    }
}

/// Applies `OTLAB_THREADS` to the global worker pool before any parallel
/// work starts. Absent or empty means the default (one worker per core).
fn configure_threads() -> Result<()> {
    let raw = match env::var("OTLAB_THREADS") {
        Ok(raw) if !raw.is_empty() => raw,
        _ => return Ok(()),
    };
    let threads = raw.parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::InvalidParameter {
            reason: format!("OTLAB_THREADS={raw:?} is not a positive thread count"),
        }
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidParameter { reason: format!("thread pool setup: {e}") })
}

fn audit_config(depth: usize, resolution: usize) -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentName::ArcSpaceAudit,
        seed: 0,
        space: Some(SpaceSpec::DyadicArcs { depth, resolution }),
        source: None,
        target: None,
        reference: None,
        ladder: None,
        tolerances: Tolerances::default(),
        times: Vec::new(),
        map_tolerance: None,
        sample_pairs: None,
        basepoint: None,
        arc_depth: None,
        arc_resolution: None,
        output_dir: None,
    }
}

fn print_report(report: &Report) {
    println!("experiment {} (seed {})", report.experiment, report.seed);
    for inv in &report.invariants {
        let flag = if inv.passed { "  ok" } else { "FAIL" };
        println!(
            "{flag}  {:<34} {:>13.6e}  (limit {:.1e})",
            inv.name, inv.value, inv.threshold
        );
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    if report.passed {
        println!("all {} invariants passed", report.invariants.len());
    } else {
        let failed = report.invariants.iter().filter(|i| !i.passed).count();
        println!("{failed} of {} invariants FAILED", report.invariants.len());
    }
}
