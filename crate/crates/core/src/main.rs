use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use fedp2p::commcost::comm_table;
use fedp2p::datagen::write_dataset_csv;
use fedp2p::harness::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fedp2p", version, about = "Federated learning simulator: FedAvg vs FedP2P")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write metrics.csv / metrics.json.
    Run(Common),
    /// FedP2P at several (L, Q) pairs.
    SweepLq {
        #[command(flatten)]
        common: Common,
        /// Comma-separated LxQ pairs.
        #[arg(long, default_value = "2x50,4x25,10x10")]
        pairs: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
    },
    /// Both protocols at several straggler rates.
    Stragglers {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0,0.5")]
        rates: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
    },
    /// Normalised communication-time table over an (alpha, gamma, P) grid.
    CommcostTable {
        #[arg(long, value_delimiter = ',', default_value = "1,4,16")]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "50,100,1000")]
        gammas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,500,1000,2000,5000")]
        devices: Vec<f64>,
        #[arg(long, default_value = "comm_table.csv")]
        out: PathBuf,
    },
    /// Generate (or load and partition) the configured dataset and dump it as CSV.
    GenData(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set round.partitions=5`. Repeatable.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; falls back to `output_dir`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
        let cfg = ExperimentConfig::load(self.config.as_deref(), &self.overrides)?;
        let dir = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok((cfg, dir))
    }

    fn threads(&self) -> usize {
        self.threads.unwrap_or_else(rayon::current_num_threads)
    }
}

fn parse_pairs(s: &str) -> anyhow::Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|p| {
            let (l, q) = p
                .trim()
                .split_once('x')
                .with_context(|| format!("pair `{p}` is not LxQ"))?;
            Ok((l.parse()?, q.parse()?))
        })
        .collect()
}

fn report(dir: &Path, stem: &str) {
    println!("wrote {}", dir.join(format!("{stem}.csv")).display());
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(common) => {
            let (cfg, dir) = common.load()?;
            let log = harness::with_threads(common.threads(), || harness::run_experiment(&cfg))??;
            harness::write_experiment_outputs(std::slice::from_ref(&log), None, &dir, "metrics")?;
            println!(
                "best accuracy {:.4}, final {:.4}",
                log.best_accuracy(),
                log.final_accuracy()
            );
            report(&dir, "metrics");
        }
        Command::SweepLq { common, pairs, seeds } => {
            let (cfg, dir) = common.load()?;
            let pairs = parse_pairs(&pairs)?;
            let res = harness::with_threads(common.threads(), || harness::run_lq_sweep(&cfg, &pairs, &seeds))??;
            harness::write_experiment_outputs(&res.logs, Some(&res.summary), &dir, "lq_sweep")?;
            report(&dir, "lq_sweep");
        }
        Command::Stragglers { common, rates, seeds } => {
            let (cfg, dir) = common.load()?;
            let res = harness::with_threads(common.threads(), || {
                harness::run_straggler_comparison(&cfg, &rates, &seeds)
            })??;
            harness::write_experiment_outputs(&res.logs, Some(&res.summary), &dir, "stragglers")?;
            report(&dir, "stragglers");
        }
        Command::CommcostTable {
            alphas,
            gammas,
            devices,
            out,
        } => {
            let rows = comm_table(&alphas, &gammas, &devices)?;
            harness::emit_comm_table(&rows, &alphas, &gammas, &devices, &out)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::GenData(common) => {
            let (cfg, dir) = common.load()?;
            cfg.validate()?;
            let data = harness::build_dataset(&cfg)?;
            if data.n_devices() == 0 {
                bail!("dataset has no devices");
            }
            let path = dir.join("dataset.csv");
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            write_dataset_csv(&data, &path)?;
            println!(
                "wrote {} rows over {} devices to {}",
                data.total_rows(),
                data.n_devices(),
                path.display()
            );
        }
    }
    Ok(())
}
