//! Evaluation runs: a frozen controller over the held-out seeds, exporting
//! per-step metrics, optional trajectory logs and a per-seed summary.

use super::runner::{ControlLaw, EpisodeRunner, EpisodeSummary};
use super::{csv_row, HarnessError};
use crate::agent::Checkpoint;
use crate::config::ScenarioConfig;
use crate::signal::ControllerKind;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub controller: ControllerKind,
    /// Required for agent controllers.
    pub checkpoint: Option<PathBuf>,
    pub log_trajectories: bool,
    /// Adds the cumulative conflict-event column to the step CSVs.
    pub conflict_events: bool,
}

#[derive(Debug)]
pub struct EvalOutput {
    pub summary_path: PathBuf,
    pub step_paths: Vec<PathBuf>,
    pub summaries: Vec<(u64, EpisodeSummary)>,
}

pub const SUMMARY_CSV_HEADER: &str =
    "seed,conflicts,conflict_events,waiting_s,co2_g,served,mean_speed_mps";

pub const TRAJECTORY_CSV_HEADER: &str =
    "t,veh_id,approach,lane,movement,pos_m,speed_mps,accel_mps2,waiting_s";

fn steps_header(conflict_events: bool) -> String {
    let mut header = String::from("t,phase,conflicts,cwt_s,co2_g,queue_len,mean_speed_mps");
    if conflict_events {
        header.push_str(",conflict_events");
    }
    header
}

/// Builds the control law an evaluation run uses.
pub fn control_law(
    config: &ScenarioConfig,
    controller: ControllerKind,
    checkpoint: Option<&Path>,
) -> Result<ControlLaw, HarnessError> {
    match controller {
        ControllerKind::FixedTime => ControlLaw::fixed_time(config),
        ControllerKind::Actuated => Ok(ControlLaw::actuated(config)),
        ControllerKind::AgentTe | ControllerKind::AgentSed => {
            let path = checkpoint.ok_or(HarnessError::MissingCheckpoint(controller))?;
            let ckpt = Checkpoint::load(path)?;
            Ok(ControlLaw::greedy(ckpt.policy_network()))
        }
    }
}

/// Runs one seeded evaluation episode, optionally streaming step metrics
/// and trajectories to CSV writers.
pub fn run_episode(
    config: &ScenarioConfig,
    law: &ControlLaw,
    seed: u64,
    mut steps_csv: Option<&mut dyn Write>,
    mut trajectories_csv: Option<&mut dyn Write>,
    conflict_events: bool,
) -> Result<EpisodeSummary, HarnessError> {
    let mut runner = EpisodeRunner::new(config, seed);
    for _ in 0..config.episode.length_s {
        let request = law.decide(&runner);
        let (rec, snapshot) = runner.step(request)?;
        if let Some(w) = steps_csv.as_deref_mut() {
            let mut fields = vec![
                rec.t.to_string(),
                rec.phase_label.clone(),
                rec.conflicts_cum.to_string(),
                rec.waiting_cum_s.to_string(),
                rec.co2_cum_g.to_string(),
                rec.queue_len.to_string(),
                rec.mean_speed_mps.to_string(),
            ];
            if conflict_events {
                fields.push(rec.conflict_events_cum.to_string());
            }
            w.write_all(csv_row(&fields).as_bytes())?;
        }
        if let Some(w) = trajectories_csv.as_deref_mut() {
            for v in snapshot.vehicles() {
                w.write_all(
                    csv_row(&[
                        rec.t.to_string(),
                        v.id.to_string(),
                        v.lane.approach.short().to_string(),
                        v.lane.index.to_string(),
                        v.movement.short().to_string(),
                        v.pos.to_string(),
                        v.speed.to_string(),
                        v.accel.to_string(),
                        v.waiting_time.to_string(),
                    ])
                    .as_bytes(),
                )?;
            }
        }
    }
    Ok(runner.summary())
}

pub fn run_eval(
    config: &ScenarioConfig,
    opts: &EvalOptions,
    out_dir: &Path,
) -> Result<EvalOutput, HarnessError> {
    config.validate()?;
    let law = control_law(config, opts.controller, opts.checkpoint.as_deref())?;
    fs::create_dir_all(out_dir)?;

    let summary_path = out_dir.join("summary.csv");
    let mut summary_csv = BufWriter::new(File::create(&summary_path)?);
    summary_csv.write_all(SUMMARY_CSV_HEADER.as_bytes())?;
    summary_csv.write_all(b"\n")?;

    let mut step_paths = Vec::new();
    let mut summaries = Vec::new();
    for &seed in &config.seeds.eval {
        let steps_path = out_dir.join(format!("steps_{seed}.csv"));
        let mut steps_csv = BufWriter::new(File::create(&steps_path)?);
        steps_csv.write_all(steps_header(opts.conflict_events).as_bytes())?;
        steps_csv.write_all(b"\n")?;

        let mut trajectories_csv = if opts.log_trajectories {
            let path = out_dir.join(format!("trajectories_{seed}.csv"));
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(TRAJECTORY_CSV_HEADER.as_bytes())?;
            w.write_all(b"\n")?;
            Some(w)
        } else {
            None
        };

        let summary = run_episode(
            config,
            &law,
            seed,
            Some(&mut steps_csv),
            trajectories_csv.as_mut().map(|w| w as &mut dyn Write),
            opts.conflict_events,
        )?;
        steps_csv.flush()?;
        if let Some(mut w) = trajectories_csv {
            w.flush()?;
        }

        summary_csv.write_all(
            csv_row(&[
                seed.to_string(),
                summary.conflicts.to_string(),
                summary.conflict_events.to_string(),
                summary.waiting_s.to_string(),
                summary.co2_g.to_string(),
                summary.served.to_string(),
                summary.mean_speed_mps.to_string(),
            ])
            .as_bytes(),
        )?;
        step_paths.push(steps_path);
        summaries.push((seed, summary));
    }
    summary_csv.flush()?;

    Ok(EvalOutput {
        summary_path,
        step_paths,
        summaries,
    })
}
