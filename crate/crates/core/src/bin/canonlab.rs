use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use canonlab::canonical::solve_zero_loss;
use canonlab::disparity::{build_disparity, rank_report, DEFAULT_RANK_REL_TOL};
use canonlab::experiments::{run_experiment, run_init_rank_census, write_census, CensusSpec, ExperimentConfig};
use canonlab::fourier::{project_network, FrequencyIndexSet, QuadratureGrid};
use canonlab::nn::{MlpNetwork, TrainingSet};
use canonlab::Result;

#[derive(Parser)]
#[command(name = "canonlab", version, about = "Fourier canonical-space diagnostics for small dense networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured training experiment and write its report.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Disparity-matrix rank census over freshly initialised networks.
    Census {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        seeds: usize,
    },
    /// Print the truncated Fourier coefficients of a saved network as CSV.
    Fourier {
        #[arg(long)]
        net: PathBuf,
        /// Per-dimension frequency limits, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Grid points per dimension; defaults to 4N+4.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
    },
    /// Print the rank report of a saved network's disparity matrix as JSON.
    Rank {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        #[arg(long, default_value_t = DEFAULT_RANK_REL_TOL)]
        rel_tol: f64,
    },
    /// Solve the zero-loss canonical problem for a CSV training set.
    Solve {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Write the coefficients as CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn index_and_grid(n: Vec<usize>, grid: Option<Vec<usize>>) -> Result<(FrequencyIndexSet, QuadratureGrid)> {
    let idx = FrequencyIndexSet::new(n)?;
    let grid = match grid {
        Some(g) => QuadratureGrid::new(g)?,
        None => QuadratureGrid::default_for(&idx),
    };
    Ok((idx, grid))
}

fn execute(cmd: Command) -> Result<bool> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cmd {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_experiment(&cfg)?;
            writeln!(out, "{}", report.to_json())?;
            if let Some(e) = &report.error {
                eprintln!("run failed: {e}");
            }
            Ok(report.is_success())
        }
        Command::Census { config, seeds } => {
            let cfg = ExperimentConfig::load(&config)?;
            let result = run_init_rank_census(&CensusSpec::from_config(&cfg)?, seeds)?;
            write_census(&result, &cfg.output_dir)?;
            writeln!(out, "{}", result.summary_json())?;
            Ok(true)
        }
        Command::Fourier { net, n, grid } => {
            let net = MlpNetwork::load(&net)?;
            let (idx, grid) = index_and_grid(n, grid)?;
            project_network(&net, &idx, &grid)?.write_csv(&mut out)?;
            Ok(true)
        }
        Command::Rank { net, n, grid, rel_tol } => {
            let net = MlpNetwork::load(&net)?;
            let (idx, grid) = index_and_grid(n, grid)?;
            let h = build_disparity(&net, &idx, &grid)?;
            writeln!(out, "{}", rank_report(h.to_matrix(), rel_tol)?.to_json())?;
            Ok(true)
        }
        Command::Solve { data, n, out: target } => {
            let data = TrainingSet::read_csv(&data)?;
            let idx = FrequencyIndexSet::new(n)?;
            let fit = solve_zero_loss(&data, &idx)?;
            match target {
                Some(path) => {
                    fit.coeffs.save_csv(&path)?;
                    writeln!(out, "{}", fit.summary_json(&path.display().to_string()))?;
                }
                None => fit.coeffs.write_csv(&mut out)?,
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

