//! The training loop: one agent interacting with seeded episodes, writing
//! a per-episode CSV and a final checkpoint.

use super::runner::EpisodeRunner;
use super::{csv_row, HarnessError};
use crate::agent::{DqnAgent, Transition};
use crate::config::ScenarioConfig;
use crate::rewards::{MetricsRecord, RewardPipeline};
use crate::rng::episode_seed;
use crate::signal::{ControllerKind, PHASES};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug)]
pub struct TrainOptions {
    /// `AgentTe` (waiting-time reward only) or `AgentSed` (full reward).
    pub controller: ControllerKind,
    /// Recompute entropy weights every N episodes (SED only).
    pub entropy_reweight: Option<u64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            controller: ControllerKind::AgentSed,
            entropy_reweight: None,
        }
    }
}

#[derive(Debug)]
pub struct TrainOutput {
    pub checkpoint_path: PathBuf,
    pub episodes_path: PathBuf,
    /// Total combined reward per episode, in order.
    pub episode_rewards: Vec<f64>,
}

pub const EPISODES_CSV_HEADER: &str =
    "episode,reward,conflicts,waiting_s,co2_g,served,mean_speed_mps,epsilon,mean_loss";

pub fn run_training(
    config: &ScenarioConfig,
    opts: &TrainOptions,
    out_dir: &Path,
) -> Result<TrainOutput, HarnessError> {
    config.validate()?;
    if !opts.controller.is_agent() {
        return Err(HarnessError::InvalidOption(format!(
            "training requires an agent controller (te|sed), got `{}`",
            opts.controller
        )));
    }
    let efficiency_only = opts.controller == ControllerKind::AgentTe;
    if opts.entropy_reweight.is_some() && efficiency_only {
        return Err(HarnessError::InvalidOption(
            "entropy reweighting only applies to the sed controller".to_string(),
        ));
    }
    if opts.entropy_reweight == Some(0) {
        return Err(HarnessError::InvalidOption(
            "entropy reweight period must be >= 1".to_string(),
        ));
    }
    fs::create_dir_all(out_dir)?;

    let probe = EpisodeRunner::new(config, 0);
    let input_dim = probe.encoding_len();
    let mut agent = DqnAgent::new(
        config.seeds.train_base,
        input_dim,
        PHASES.len(),
        config.agent.clone(),
    );
    let mut pipeline = RewardPipeline::new(config.rewards, config.weights_for(efficiency_only));
    if opts.entropy_reweight.is_some() {
        pipeline.set_collect_samples(true);
    }

    let episodes_path = out_dir.join("episodes.csv");
    let mut csv = BufWriter::new(File::create(&episodes_path)?);
    csv.write_all(EPISODES_CSV_HEADER.as_bytes())?;
    csv.write_all(b"\n")?;

    let mut episode_rewards = Vec::with_capacity(config.episode.count as usize);
    for episode in 0..config.episode.count {
        let seed = episode_seed(config.seeds.train_base, episode);
        let mut runner = EpisodeRunner::new(config, seed);
        let mut prev = MetricsRecord::zero();
        let mut state = runner.encode();
        let mut total_reward = 0.0;
        let mut loss_sum = 0.0;
        let mut loss_count = 0u64;
        let mut epsilon = agent.epsilon();

        for t in 0..config.episode.length_s {
            let (action, eps) = agent.act_exploring(&state.values);
            epsilon = eps;
            runner.step(PHASES[action])?;
            let cur = runner.metrics_record();
            let breakdown = pipeline.step(&prev, &cur);
            prev = cur;
            let next_state = runner.encode();
            agent.observe(Transition {
                state: std::mem::take(&mut state.values),
                action,
                reward: breakdown.combined,
                next_state: next_state.values.clone(),
                done: t + 1 == config.episode.length_s,
            });
            if let Some(loss) = agent.maybe_train() {
                loss_sum += loss;
                loss_count += 1;
            }
            state = next_state;
            total_reward += breakdown.combined;
        }

        let summary = runner.summary();
        let mean_loss = if loss_count > 0 { loss_sum / loss_count as f64 } else { 0.0 };
        csv.write_all(
            csv_row(&[
                episode.to_string(),
                total_reward.to_string(),
                summary.conflicts.to_string(),
                summary.waiting_s.to_string(),
                summary.co2_g.to_string(),
                summary.served.to_string(),
                summary.mean_speed_mps.to_string(),
                epsilon.to_string(),
                mean_loss.to_string(),
            ])
            .as_bytes(),
        )?;
        episode_rewards.push(total_reward);

        if let Some(period) = opts.entropy_reweight {
            if (episode + 1) % period == 0 {
                // Not enough variation yet is fine; keep current weights.
                let _ = pipeline.reweight();
            }
        }
    }
    csv.flush()?;

    let checkpoint_path = out_dir.join(format!("checkpoint_{}.json", opts.controller));
    agent.checkpoint().save(&checkpoint_path)?;
    Ok(TrainOutput {
        checkpoint_path,
        episodes_path,
        episode_rewards,
    })
}
