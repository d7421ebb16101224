use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lgca::bench::{BenchMode, DEFAULT_M_GRID, DEFAULT_N_GRID};
use lgca::cli::{self, BenchArgs, ClassifyArgs, TraceArgs};

#[derive(Parser)]
#[command(name = "lgca", version, about = "Zero-shot classification with crop alignment and region expansion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Lgca,
    Q,
}

#[derive(Subcommand)]
enum Command {
    /// Classify every image in a manifest.
    Classify {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// `toy:WORLD.json` or `remote:HOST:PORT`; LGCA_ENCODER takes precedence.
        #[arg(long)]
        encoder: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Count operations over an (N, M) grid and check the complexity bound.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_N_GRID)]
        n_grid: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_M_GRID)]
        m_grid: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[arg(long, value_enum, default_value = "lgca")]
        mode: Mode,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the per-step table for one image and label.
    Trace {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        label: String,
        #[arg(long)]
        descriptions: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        encoder: Option<String>,
    },
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Classify { manifest, config, encoder, seed, out } => cli::cmd_classify(&ClassifyArgs {
            manifest,
            config,
            encoder,
            seed,
            out,
        })
        .map(|s| {
            if let Some(acc) = s.accuracy {
                println!("{} images, accuracy {acc:.4}", s.images);
            } else {
                println!("{} images", s.images);
            }
        }),
        Command::Bench { n_grid, m_grid, trials, mode, out } => cli::cmd_bench(&BenchArgs {
            n_grid,
            m_grid,
            trials,
            mode: match mode {
                Mode::Lgca => BenchMode::Lgca,
                Mode::Q => BenchMode::Q,
            },
            out,
        })
        .map(|r| println!("{} grid points, fitted c = {:.4} (limit {})", r.points.len(), r.fitted_c, r.c_limit)),
        Command::Trace { image, label, descriptions, config, encoder } => cli::cmd_trace(
            &TraceArgs {
                image,
                label,
                descriptions,
                config,
                encoder,
            },
            &mut std::io::stdout().lock(),
        )
        .map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lgca: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
