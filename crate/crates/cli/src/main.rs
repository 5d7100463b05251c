//! `atsc`: train, evaluate and compare signal controllers on the
//! deterministic intersection laboratory.

use anyhow::{bail, Context, Result};
use atsc_core::config::ScenarioConfig;
use atsc_core::harness::{
    run_compare, run_eval, run_training, CompareOptions, EvalOptions, TrainOptions,
};
use atsc_core::signal::ControllerKind;
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "atsc",
    about = "Adaptive traffic signal control laboratory: D3QN agents vs fixed-time and actuated baselines",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent controller and write episodes.csv plus a checkpoint.
    Train {
        /// Scenario TOML file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Agent variant: te (efficiency-only reward) or sed (full reward).
        #[arg(long, default_value = "sed")]
        controller: String,
        /// Recompute entropy weights every N episodes (sed only).
        #[arg(long, value_name = "N")]
        entropy_reweight: Option<u64>,
    },
    /// Evaluate one controller over the held-out seeds.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// fixed | actuated | te | sed
        #[arg(long)]
        controller: String,
        /// Checkpoint file (required for te/sed).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-vehicle trajectory CSVs.
        #[arg(long)]
        log_trajectories: bool,
        /// Add cumulative conflict-event (onset) columns to the step CSVs.
        #[arg(long)]
        conflict_events: bool,
    },
    /// Evaluate several controllers over shared seeds into comparison.csv.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds; defaults to the config's eval seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated controllers (fixed,actuated,te,sed).
        #[arg(long, value_delimiter = ',', default_value = "fixed,actuated")]
        controllers: Vec<String>,
        #[arg(long)]
        te_checkpoint: Option<PathBuf>,
        #[arg(long)]
        sed_checkpoint: Option<PathBuf>,
    },
    /// Print the default scenario config as TOML.
    DumpConfig {
        /// Scale all arrival rates by this factor first.
        #[arg(long)]
        demand_scale: Option<f64>,
    },
}

fn parse_controller(s: &str) -> Result<ControllerKind> {
    s.parse::<ControllerKind>().map_err(|e| anyhow::anyhow!(e))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train {
            config,
            out,
            controller,
            entropy_reweight,
        } => {
            let scenario = ScenarioConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            let kind = parse_controller(&controller)?;
            let opts = TrainOptions {
                controller: kind,
                entropy_reweight,
            };
            let output = run_training(&scenario, &opts, &out)?;
            let last = output.episode_rewards.last().copied().unwrap_or(0.0);
            println!("trained {} episodes ({kind})", output.episode_rewards.len());
            println!("final episode reward: {last}");
            println!("episodes: {}", output.episodes_path.display());
            println!("checkpoint: {}", output.checkpoint_path.display());
        }
        Command::Eval {
            config,
            controller,
            checkpoint,
            out,
            log_trajectories,
            conflict_events,
        } => {
            let scenario = ScenarioConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            let kind = parse_controller(&controller)?;
            let opts = EvalOptions {
                controller: kind,
                checkpoint,
                log_trajectories,
                conflict_events,
            };
            let output = run_eval(&scenario, &opts, &out)?;
            println!("controller: {kind}");
            println!("seed,conflicts,waiting_s,co2_g,served,mean_speed_mps");
            for (seed, s) in &output.summaries {
                println!(
                    "{seed},{},{},{},{},{}",
                    s.conflicts, s.waiting_s, s.co2_g, s.served, s.mean_speed_mps
                );
            }
            println!("summary: {}", output.summary_path.display());
        }
        Command::Compare {
            config,
            seeds,
            out,
            controllers,
            te_checkpoint,
            sed_checkpoint,
        } => {
            let scenario = ScenarioConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if controllers.is_empty() {
                bail!("--controllers must name at least one controller");
            }
            let kinds = controllers
                .iter()
                .map(|c| parse_controller(c))
                .collect::<Result<Vec<_>>>()?;
            let opts = CompareOptions {
                controllers: kinds,
                seeds,
                te_checkpoint,
                sed_checkpoint,
            };
            let table = run_compare(&scenario, &opts, &out)?;
            println!(
                "{:<10} {:>22} {:>26} {:>26}",
                "controller", "conflicts (mean/d%)", "waiting_s (mean/d%)", "co2_g (mean/d%)"
            );
            for r in &table.rows {
                println!(
                    "{:<10} {:>14.1} {:>+6.1}% {:>18.0} {:>+6.1}% {:>18.0} {:>+6.1}%",
                    r.controller.to_string(),
                    r.conflicts_mean,
                    r.conflicts_delta_pct,
                    r.waiting_mean,
                    r.waiting_delta_pct,
                    r.co2_mean,
                    r.co2_delta_pct,
                );
            }
            println!("table: {}", table.csv_path.display());
        }
        Command::DumpConfig { demand_scale } => {
            let mut config = ScenarioConfig::default();
            if let Some(factor) = demand_scale {
                config = config.with_demand_scale(factor);
            }
            print!("{}", config.to_toml()?);
        }
    }
    Ok(())
}
