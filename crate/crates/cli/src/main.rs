use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use neckglue::app::{self, Command};

#[derive(Parser)]
#[command(name = "neckglue", version, about = "Lawlor-neck gluing toolkit")]
struct Cli {
    /// Seed for every random draw (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the JSON report here.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Leave timings out of the JSON report.
    #[arg(long, global = true)]
    no_timings: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check H1-H3 and solve for α.
    Validate { config: PathBuf },
    /// Γ and Λ with quadrature cross-checks.
    Interaction { config: PathBuf },
    /// Sample one neck and measure its mean curvature.
    Neck {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        /// Parameter step of the sampling grid.
        #[arg(long)]
        grid: Option<f64>,
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Indicial roots and mode-system checks.
    Spectrum {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
    },
    /// Assemble the glued surface and measure it.
    Glue {
        config: PathBuf,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Sphere Dirichlet-to-Neumann checks.
    Dtn {
        #[arg(long, default_value_t = 8)]
        degree: usize,
    },
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Validate { config } => Command::Validate { config },
            Cmd::Interaction { config } => Command::Interaction { config },
            Cmd::Neck {
                n,
                beta,
                eps,
                grid,
                export,
            } => Command::Neck {
                n,
                beta,
                eps,
                grid,
                export,
            },
            Cmd::Spectrum { n, k } => Command::Spectrum { n, k },
            Cmd::Glue {
                config,
                eps,
                export,
            } => Command::Glue {
                config,
                eps,
                export,
            },
            Cmd::Dtn { degree } => Command::Dtn { degree },
        }
    }
}

#[cfg(feature = "parallel")]
fn init_threads() {
    if let Some(n) = std::env::var("NECKGLUE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn init_threads() {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let cmd: Command = cli.cmd.into();
    let report = match app::run(&cmd, cli.seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("neckglue {}: {e}", cmd.name());
            return ExitCode::from(app::error_exit_code(&e) as u8);
        }
    };
    print!("{}", report.summary());
    if let Some(path) = &cli.report {
        let json = if cli.no_timings {
            report.deterministic_json()
        } else {
            report.to_json()
        };
        if let Err(e) = std::fs::write(path, json) {
            eprintln!("neckglue: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    ExitCode::from(report.exit_code() as u8)
}
