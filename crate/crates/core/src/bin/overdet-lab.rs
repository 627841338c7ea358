//! Command-line front end: `run`, `compare` and `mesh`.
//!
//! Exit codes: 0 success, 1 solver failure (including failed sweep
//! points), 2 configuration or input errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use overdet_core::geometry::triangulate;
use overdet_core::report::{compare_runs, parse_config, parse_domain_spec, run_experiment};
use overdet_core::LabError;

const OUTPUT_ROOT_VAR: &str = "OVERDET_LAB_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "overdet-lab", version, about = "Overdetermined-problem finite-element laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config and the output root.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare two result directories metric by metric.
    Compare { dir_a: PathBuf, dir_b: PathBuf },
    /// Mesh a domain spec such as `type=sector;angle=pi/2` and write the mesh text.
    Mesh {
        spec: String,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        h: f64,
    },
}

/// Config `output`, else the config file stem, placed under the output root
/// when it is relative.
fn output_dir(config_path: &Path, configured: Option<&Path>) -> PathBuf {
    let name = configured.map(Path::to_path_buf).unwrap_or_else(|| {
        let stem = config_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        PathBuf::from("runs").join(stem)
    });
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if name.is_relative() => PathBuf::from(root).join(name),
        _ => name,
    }
}

fn usage_error(e: &LabError) -> bool {
    matches!(e, LabError::Config { .. } | LabError::Io(_) | LabError::Json(_) | LabError::Mismatch(_))
}

fn fail(context: &str, e: LabError) -> ExitCode {
    eprintln!("error: {context}: {e}");
    ExitCode::from(if usage_error(&e) { 2 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => return fail(&config.display().to_string(), e.into()),
            };
            let cfg = match parse_config(&text, config.parent()) {
                Ok(c) => c,
                Err(e) => return fail(&config.display().to_string(), e),
            };
            let dir = output.unwrap_or_else(|| output_dir(&config, cfg.output.as_deref()));
            let start = std::time::Instant::now();
            match run_experiment(&cfg, &dir) {
                Ok(summary) => {
                    eprintln!(
                        "{}: {} rows written to {} in {:.2}s",
                        cfg.kind,
                        summary.rows,
                        summary.out_dir.display(),
                        start.elapsed().as_secs_f64()
                    );
                    for e in &summary.errors {
                        eprintln!("failed point {}: {}", e.point, e.message);
                    }
                    if summary.errors.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail("run", e),
            }
        }
        Command::Compare { dir_a, dir_b } => match compare_runs(&dir_a, &dir_b) {
            Ok(cmp) => {
                println!("{}", serde_json::to_string_pretty(&cmp).expect("comparison serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => fail("compare", e),
        },
        Command::Mesh { spec, output, h } => {
            let result = parse_domain_spec(&spec)
                .and_then(|d| d.build())
                .and_then(|d| triangulate(&d, h))
                .and_then(|m| {
                    std::fs::write(&output, m.to_text())?;
                    Ok(m)
                });
            match result {
                Ok(m) => {
                    eprintln!("{} vertices, {} triangles written to {}", m.num_vertices(), m.num_triangles(), output.display());
                    ExitCode::SUCCESS
                }
                Err(e @ (LabError::InvalidDomain(_) | LabError::InvalidArgument(_))) => {
                    eprintln!("error: mesh: {e}");
                    ExitCode::from(2)
                }
                Err(e) => fail("mesh", e),
            }
        }
    }
}
