//! `blockconv` — simulate multichannel pulse-echo data, reconstruct sparse
//! reflectivity maps with an accelerated solver or a trained unrolled
//! network, benchmark the models, and render results.
//!
//! Exit codes: 0 success, 1 validation failure (arguments, config, shapes),
//! 2 I/O failure, 3 numerical failure.

use blockconv_cli::commands;
use blockconv_cli::config::RunConfig;
use blockconv_cli::error::CliError;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "blockconv",
    about = "Convolutional multichannel pulse-echo modeling, sparse reconstruction, and learned solvers",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate measurements for a random or user-supplied scatterer map.
    Simulate {
        /// Run configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output tensor file (a .scatterers.txt sidecar is written next to it).
        #[arg(long)]
        out: PathBuf,
        /// Optional scatterer list (one `i_x i_z a` per line) instead of random draws.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the convolutional model kernels and write them to a tensor file.
    BuildKernels {
        /// Run configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output tensor file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a sparse map from measurements with the accelerated solver.
    Fista {
        /// Run configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Input measurement tensor file (slices or a full volume).
        #[arg(long = "in")]
        input: PathBuf,
        /// Output tensor file (a .trace.csv sidecar is written next to it).
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the unrolled network on streaming synthetic maps.
    ListaTrain {
        /// Run configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output network tensor file (a .loss.csv sidecar is written next to it).
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a trained network on measurements.
    ListaInfer {
        /// Run configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Trained network tensor file.
        #[arg(long)]
        net: PathBuf,
        /// Input measurement tensor file.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output tensor file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep model sizes: storage by formula, solver timings where feasible.
    Bench {
        /// Run configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a rank-2 record of a tensor file as a binary PGM image.
    Render {
        /// Input tensor file.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output PGM file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if cfg.threads > 0 {
        // First initialization wins; a failure here only means a pool exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    Ok(cfg)
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Simulate { config, out, input, seed } => {
            let cfg = load_config(&config, seed)?;
            commands::cmd_simulate(&cfg, input.as_deref(), &out)
        }
        Cmd::BuildKernels { config, out } => {
            let cfg = load_config(&config, None)?;
            commands::cmd_build_kernels(&cfg, &out)
        }
        Cmd::Fista { config, input, out, seed } => {
            let cfg = load_config(&config, seed)?;
            commands::cmd_fista(&cfg, &input, &out)
        }
        Cmd::ListaTrain { config, out, seed } => {
            let cfg = load_config(&config, seed)?;
            commands::cmd_lista_train(&cfg, &out)
        }
        Cmd::ListaInfer { config, net, input, out } => {
            let cfg = load_config(&config, None)?;
            commands::cmd_lista_infer(&cfg, &net, &input, &out)
        }
        Cmd::Bench { config, out } => {
            let cfg = load_config(&config, None)?;
            commands::cmd_bench(&cfg, &out)
        }
        Cmd::Render { input, out } => commands::cmd_render(&input, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
