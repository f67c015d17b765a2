//! `seamform` command-line tool: write gallery scenes, run them, and tabulate
//! refinement sweeps.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seamform::scene::{write_atomic, EXIT_SUITE_FAILED, EXIT_USAGE, THREADS_ENV};
use seamform::{gallery, run_scene, sweep, Error, Quantity, SceneSpec};

#[derive(Parser)]
#[command(name = "seamform", version, about = "Seam forms: convex surfaces sewn from planar pieces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the canonical scene file for a gallery item.
    Gallery {
        /// One of the gallery items; `antiprism-<n>` takes any n ≥ 3.
        item: String,
        /// Directory for `<item>.json`.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Triangulate, reconstruct, certify and analyze every level of a scene.
    #[command(after_help = format!("Worker threads come from {THREADS_ENV} (default: all cores)."))]
    Run {
        scene: PathBuf,
        /// Output directory; defaults to the scene's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate one quantity per refinement level with its convergence order.
    Sweep {
        scene: PathBuf,
        /// hull-gap, max-defect, antiprism-dihedral or crease-straightness.
        #[arg(long)]
        quantity: String,
        /// Output directory for `<scene>_<quantity>.json`; defaults to the scene's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

/// Exit code for errors raised outside the per-level stages: bad input is a
/// usage error, anything else (I/O) a plain failure.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::Scene(_) | Error::Json(_) => EXIT_USAGE,
        _ => EXIT_SUITE_FAILED,
    }
}

fn execute(command: Command) -> seamform::Result<i32> {
    match command {
        Command::Gallery { item, out } => {
            let spec = gallery(&item)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("{}.json", spec.name));
            write_atomic(&path, &spec.to_json()?)?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Run { scene, out } => {
            let spec = SceneSpec::load(&scene)?;
            let dir = out.unwrap_or_else(|| PathBuf::from(&spec.output_dir));
            let run = run_scene(&spec)?;
            run.write(&dir)?;
            print!("{}", summary(&run.report));
            println!("report: {}", dir.join(format!("{}.json", spec.name)).display());
            Ok(run.report.exit_code)
        }
        Command::Sweep { scene, quantity, out } => {
            let q: Quantity = quantity.parse()?;
            let spec = SceneSpec::load(&scene)?;
            let dir = out.unwrap_or_else(|| PathBuf::from(&spec.output_dir));
            let table = sweep(&spec, q)?;
            print!("{}", table.to_text());
            write_json(&dir, &format!("{}_{}.json", spec.name, q), &serde_json::to_string_pretty(&table)?)?;
            Ok(0)
        }
    }
}

fn write_json(dir: &Path, file: &str, contents: &str) -> seamform::Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(file);
    write_atomic(&path, contents)?;
    println!("table: {}", path.display());
    Ok(())
}

/// Aligned one-line-per-level summary of a run report.
fn summary(r: &seamform::RunReport) -> String {
    let mut s = format!("{}: exit code {}\n", r.scene, r.exit_code);
    s.push_str(&format!("{:>5}  {:>9}  {:>12}  {:>10}  {:>10}\n", "level", "vertices", "residual", "hull gap", "status"));
    for l in &r.levels {
        let vertices = l.metric.as_ref().map_or("-".into(), |m| m.vertices.to_string());
        let residual = l.max_residual.map_or("-".into(), |x| format!("{x:.3e}"));
        let gap = l.analysis.as_ref().map_or("-".into(), |a| format!("{:.3e}", a.hull_gap));
        let status = l.error.as_ref().map_or("ok".into(), |e| format!("{:?}", e.stage).to_lowercase());
        s.push_str(&format!("{:>5}  {:>9}  {:>12}  {:>10}  {:>10}\n", l.level, vertices, residual, gap, status));
    }
    if let Some(c) = &r.creases {
        s.push_str(&format!("persistent crease chains: {}\n", c.chains.len()));
    }
    for suite in &r.suites {
        s.push_str(&format!("{:<24} {}  {}\n", suite.name, if suite.passed { "pass" } else { "FAIL" }, suite.detail));
    }
    s
}
