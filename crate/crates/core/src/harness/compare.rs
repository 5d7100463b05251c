//! Controller comparison: every (controller, seed) cell evaluated
//! independently, aggregated into mean +- stddev per metric with percentage
//! deltas against the fixed-time baseline row.

use super::eval::{control_law, run_episode};
use super::runner::EpisodeSummary;
use super::{csv_row, HarnessError};
use crate::config::ScenarioConfig;
use crate::signal::ControllerKind;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Default)]
pub struct CompareOptions {
    /// Controllers to evaluate, in row order.
    pub controllers: Vec<ControllerKind>,
    /// Seeds overriding the config's eval seeds, when non-empty.
    pub seeds: Vec<u64>,
    pub te_checkpoint: Option<PathBuf>,
    pub sed_checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct ComparisonRow {
    pub controller: ControllerKind,
    pub conflicts_mean: f64,
    pub conflicts_std: f64,
    pub conflicts_delta_pct: f64,
    pub waiting_mean: f64,
    pub waiting_std: f64,
    pub waiting_delta_pct: f64,
    pub co2_mean: f64,
    pub co2_std: f64,
    pub co2_delta_pct: f64,
    pub served_mean: f64,
    pub mean_speed_mean: f64,
}

#[derive(Debug)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub csv_path: PathBuf,
}

pub const COMPARISON_CSV_HEADER: &str = "controller,conflicts_mean,conflicts_std,conflicts_delta_pct,waiting_s_mean,waiting_s_std,waiting_delta_pct,co2_g_mean,co2_g_std,co2_delta_pct,served_mean,mean_speed_mps_mean";

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn delta_pct(value: f64, baseline: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        (value - baseline) / baseline * 100.0
    }
}

pub fn run_compare(
    config: &ScenarioConfig,
    opts: &CompareOptions,
    out_dir: &Path,
) -> Result<ComparisonTable, HarnessError> {
    config.validate()?;
    if opts.controllers.is_empty() {
        return Err(HarnessError::InvalidOption(
            "compare needs at least one controller".to_string(),
        ));
    }
    let seeds: &[u64] = if opts.seeds.is_empty() {
        &config.seeds.eval
    } else {
        &opts.seeds
    };
    fs::create_dir_all(out_dir)?;

    // Evaluate every cell.
    let mut cells: Vec<(ControllerKind, Vec<EpisodeSummary>)> = Vec::new();
    for &controller in &opts.controllers {
        let checkpoint = match controller {
            ControllerKind::AgentTe => opts.te_checkpoint.as_deref(),
            ControllerKind::AgentSed => opts.sed_checkpoint.as_deref(),
            _ => None,
        };
        let law = control_law(config, controller, checkpoint)?;
        let mut summaries = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            summaries.push(run_episode(config, &law, seed, None, None, false)?);
        }
        cells.push((controller, summaries));
    }

    // Baseline: the first fixed-time row when present, else the first row.
    let baseline_idx = cells
        .iter()
        .position(|(c, _)| *c == ControllerKind::FixedTime)
        .unwrap_or(0);
    let collect = |summaries: &[EpisodeSummary]| {
        (
            summaries.iter().map(|s| s.conflicts as f64).collect::<Vec<_>>(),
            summaries.iter().map(|s| s.waiting_s).collect::<Vec<_>>(),
            summaries.iter().map(|s| s.co2_g).collect::<Vec<_>>(),
        )
    };
    let (base_conflicts, base_waiting, base_co2) = collect(&cells[baseline_idx].1);
    let base = (
        mean_std(&base_conflicts).0,
        mean_std(&base_waiting).0,
        mean_std(&base_co2).0,
    );

    let mut rows = Vec::with_capacity(cells.len());
    for (controller, summaries) in &cells {
        let (conflicts, waiting, co2) = collect(summaries);
        let (c_mean, c_std) = mean_std(&conflicts);
        let (w_mean, w_std) = mean_std(&waiting);
        let (e_mean, e_std) = mean_std(&co2);
        let served_mean = summaries.iter().map(|s| s.served as f64).sum::<f64>()
            / summaries.len() as f64;
        let speed_mean = summaries.iter().map(|s| s.mean_speed_mps).sum::<f64>()
            / summaries.len() as f64;
        rows.push(ComparisonRow {
            controller: *controller,
            conflicts_mean: c_mean,
            conflicts_std: c_std,
            conflicts_delta_pct: delta_pct(c_mean, base.0),
            waiting_mean: w_mean,
            waiting_std: w_std,
            waiting_delta_pct: delta_pct(w_mean, base.1),
            co2_mean: e_mean,
            co2_std: e_std,
            co2_delta_pct: delta_pct(e_mean, base.2),
            served_mean,
            mean_speed_mean: speed_mean,
        });
    }

    let csv_path = out_dir.join("comparison.csv");
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    csv.write_all(COMPARISON_CSV_HEADER.as_bytes())?;
    csv.write_all(b"\n")?;
    for row in &rows {
        csv.write_all(
            csv_row(&[
                row.controller.to_string(),
                row.conflicts_mean.to_string(),
                row.conflicts_std.to_string(),
                row.conflicts_delta_pct.to_string(),
                row.waiting_mean.to_string(),
                row.waiting_std.to_string(),
                row.waiting_delta_pct.to_string(),
                row.co2_mean.to_string(),
                row.co2_std.to_string(),
                row.co2_delta_pct.to_string(),
                row.served_mean.to_string(),
                row.mean_speed_mean.to_string(),
            ])
            .as_bytes(),
        )?;
    }
    csv.flush()?;

    Ok(ComparisonTable { rows, csv_path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    fn short_config() -> ScenarioConfig {
        let mut config = ScenarioConfig::default();
        config.episode.length_s = 150;
        config.seeds.eval = vec![11, 12, 13];
        config
    }

    #[test]
    fn single_controller_deltas_are_zero() {
        let dir = tempfile::tempdir().unwrap();
        let opts = CompareOptions {
            controllers: vec![ControllerKind::Actuated],
            ..CompareOptions::default()
        };
        let table = run_compare(&short_config(), &opts, dir.path()).unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert_eq!(row.conflicts_delta_pct, 0.0);
        assert_eq!(row.waiting_delta_pct, 0.0);
        assert_eq!(row.co2_delta_pct, 0.0);
    }

    #[test]
    fn duplicate_controllers_produce_identical_rows() {
        let dir = tempfile::tempdir().unwrap();
        let opts = CompareOptions {
            controllers: vec![ControllerKind::FixedTime, ControllerKind::FixedTime],
            ..CompareOptions::default()
        };
        let table = run_compare(&short_config(), &opts, dir.path()).unwrap();
        let text = std::fs::read_to_string(&table.csv_path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], lines[2]);
    }

    #[test]
    fn explicit_seeds_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let opts = CompareOptions {
            controllers: vec![ControllerKind::FixedTime],
            seeds: vec![77],
            ..CompareOptions::default()
        };
        let table = run_compare(&short_config(), &opts, dir.path()).unwrap();
        // One seed: stddev over the single sample is zero.
        assert_eq!(table.rows[0].conflicts_std, 0.0);
    }
}
