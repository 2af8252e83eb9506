use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use dpfts::accountant::{delta_default, epsilon};
use dpfts::domain::Domain;
use dpfts::experiments::{
    emit, run_experiment, sweep, write_sweep_csv, Algo, ExperimentConfig, SweepGrid,
};
use dpfts::objectives::Suite;
use dpfts::protocol::threads_from_env;
use dpfts::Error;

#[derive(Parser)]
#[command(
    name = "dpfts",
    version,
    about = "Differentially private federated Thompson sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace, curves and summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (defaults to DPFTS_THREADS, then all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grid over q, z, S and P and write one consolidated CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Privacy loss of the subsampled Gaussian mechanism after T rounds.
    #[command(group(ArgGroup::new("slack").required(true).args(["delta", "n_agents"])))]
    Accountant {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        z: f64,
        #[arg(long = "T", visible_alias = "rounds")]
        rounds: u64,
        #[arg(long)]
        delta: Option<f64>,
        /// Use δ = N^(-1.1).
        #[arg(long)]
        n_agents: Option<usize>,
        #[arg(long, default_value_t = dpfts::accountant::DEFAULT_MAX_ORDER)]
        max_order: u32,
        #[arg(long)]
        json: bool,
    },
    /// Generate an objective suite file.
    #[command(group(ArgGroup::new("kind").required(true).args(["synthetic", "hetero"])))]
    Gen {
        #[arg(long)]
        synthetic: bool,
        /// Heterogeneous agents mixing independent draws with weight α.
        #[arg(long, requires = "alpha")]
        hetero: bool,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 200)]
        agents: usize,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long, default_value_t = 0.03)]
        lengthscale: f64,
        #[arg(long, default_value_t = 0.02)]
        d: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a preset configuration as JSON.
    Preset {
        /// ts, fts, fts-de, dp-fts or dp-fts-de
        algo: String,
        #[arg(long, default_value_t = 2)]
        regions: usize,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn execute(cmd: Command) -> dpfts::Result<()> {
    match cmd {
        Command::Run {
            config,
            threads,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.output.dir = dir;
            }
            let result = run_experiment(&cfg, threads.or_else(threads_from_env))?;
            let files = emit(&result)?;
            let s = result.summary();
            println!(
                "{}: final simple regret {:.6} ± {:.6}, epsilon {}, trace {}",
                s.algo,
                s.final_simple_regret.mean,
                s.final_simple_regret.stderr,
                s.epsilon,
                files.trace.display()
            );
        }
        Command::Sweep {
            config,
            grid,
            threads,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.output.dir = dir;
            }
            let grid = SweepGrid::load(&grid)?;
            let rows = sweep(&cfg, &grid, threads.or_else(threads_from_env))?;
            let dir = &cfg.output.dir;
            std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            let path = dir.join(format!("{}_sweep.csv", cfg.name()));
            let file = File::create(&path).map_err(|e| io_error(&path, e))?;
            write_sweep_csv(&rows, BufWriter::new(file)).map_err(|e| io_error(&path, e))?;
            println!("{} sweep points written to {}", rows.len(), path.display());
        }
        Command::Accountant {
            q,
            z,
            rounds,
            delta,
            n_agents,
            max_order,
            json,
        } => {
            let delta = match (delta, n_agents) {
                (Some(d), _) => d,
                (None, Some(n)) => delta_default(n),
                (None, None) => unreachable!("clap requires one of them"),
            };
            let loss = epsilon(q, z, rounds, delta, max_order)?;
            if json {
                let v = serde_json::json!({
                    "q": q, "z": z, "T": rounds, "delta": delta,
                    "epsilon": loss.epsilon, "order": loss.order,
                });
                println!("{v}");
            } else {
                let order = loss.order.map_or("-".to_string(), |m| m.to_string());
                println!(
                    "epsilon = {} (delta = {delta}, order {order})",
                    loss.epsilon
                );
            }
        }
        Command::Gen {
            synthetic,
            hetero: _,
            alpha,
            agents,
            points,
            lengthscale,
            d,
            seed,
            out,
        } => {
            let domain = Domain::unit_interval(points)?;
            let suite = if synthetic {
                Suite::synthetic(&domain, agents, lengthscale, d, seed)?
            } else {
                let alpha = alpha.expect("clap requires --alpha with --hetero");
                Suite::heterogeneous(&domain, agents, alpha, lengthscale, seed)?
            };
            suite.save(&out)?;
            println!(
                "wrote {} agents x {} points to {}",
                agents,
                points,
                out.display()
            );
        }
        Command::Preset { algo, regions } => {
            let algo: Algo = serde_json::from_value(serde_json::Value::String(algo.clone()))
                .map_err(|_| Error::Config(vec![format!("unknown algorithm '{algo}'")]))?;
            let cfg = ExperimentConfig::synthetic(algo, regions);
            cfg.validate()?;
            println!("{}", cfg.to_json());
        }
    }
    Ok(())
}

fn io_error(path: &std::path::Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}
