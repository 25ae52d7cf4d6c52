use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lodhelm::config::ExperimentConfig;
use lodhelm::experiments::{run, Command};

/// LOD experiments for the high-contrast Helmholtz equation.
///
/// Exit status: 0 on success, 2 for configuration errors, 3 for numerical
/// failures, 1 for I/O errors.
#[derive(Parser, Debug)]
#[command(name = "lodhelm", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Convergence study over the configured coarse levels and layer counts.
    Converge {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Solve once (single coarse level and m) and export the fields.
    Solve {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Localization error of one element corrector for m = 0..m_max.
    Decay {
        #[arg(short, long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (cmd, path) = match cli.command {
        Cmd::Converge { config } => (Command::Converge, config),
        Cmd::Solve { config } => (Command::Solve, config),
        Cmd::Decay { config } => (Command::Decay, config),
    };
    let result = ExperimentConfig::from_file(&path).and_then(|cfg| run(cmd, &cfg));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lodhelm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
