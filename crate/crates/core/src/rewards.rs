//! Per-objective difference rewards, sliding min-max normalization, entropy
//! weighting and scalarization.
//!
//! The three indicators (cumulative conflicts, waiting time, CO2) are
//! episode-cumulative and non-decreasing, so each per-step difference reward
//! is a penalty (<= 0). Normalization rescales the channels onto [0, 1]
//! against a sliding window before the weighted sum.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("entropy weighting needs at least 2 samples, got {n}")]
    InsufficientSamples { n: usize },
    #[error("weights must be in [0,1] and sum to 1: {0:?}")]
    InvalidWeights([f64; 3]),
}

/// Episode-cumulative indicator values at one decision instant.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricsRecord {
    /// Cumulative traffic conflicts.
    pub ctc: f64,
    /// Cumulative waiting time, s.
    pub cwt: f64,
    /// Cumulative CO2, g.
    pub cde: f64,
}

impl MetricsRecord {
    pub fn zero() -> Self {
        MetricsRecord::default()
    }
}

/// Scalarization weights over (safety, efficiency, carbon); a point on the
/// probability simplex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub safety: f64,
    pub efficiency: f64,
    pub carbon: f64,
}

impl RewardWeights {
    pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

    pub fn new(safety: f64, efficiency: f64, carbon: f64) -> Result<Self, RewardError> {
        let w = RewardWeights { safety, efficiency, carbon };
        w.validate()?;
        Ok(w)
    }

    /// Waiting-time-only weights used by the efficiency-only agent.
    pub fn efficiency_only() -> Self {
        RewardWeights { safety: 0.0, efficiency: 1.0, carbon: 0.0 }
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        let arr = self.as_array();
        let in_range = arr.iter().all(|w| (0.0..=1.0).contains(w));
        if !in_range || (arr.iter().sum::<f64>() - 1.0).abs() > Self::SIMPLEX_TOLERANCE {
            return Err(RewardError::InvalidWeights(arr));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.safety, self.efficiency, self.carbon]
    }

    pub fn from_array(arr: [f64; 3]) -> Self {
        RewardWeights { safety: arr[0], efficiency: arr[1], carbon: arr[2] }
    }
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { safety: 0.5, efficiency: 0.25, carbon: 0.25 }
    }
}

/// Difference rewards (r_ctc, r_cwt, r_cde): the negated increment of each
/// cumulative indicator over one decision step.
pub fn raw_rewards(prev: &MetricsRecord, cur: &MetricsRecord) -> [f64; 3] {
    [
        -(cur.ctc - prev.ctc),
        -(cur.cwt - prev.cwt),
        -(cur.cde - prev.cde),
    ]
}

/// Sliding window of recent raw values for one channel's min-max rescaling.
#[derive(Clone, Debug)]
pub struct NormalizationWindow {
    buf: VecDeque<f64>,
    capacity: usize,
}

impl NormalizationWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        NormalizationWindow { buf: VecDeque::new(), capacity }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Pushes a value without producing an output (warm-up).
    pub fn absorb(&mut self, value: f64) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(value);
    }

    /// Min-max rescales `value` against the window, then absorbs it.
    /// A degenerate (constant or empty) window maps to 0.5; outputs clamp
    /// to [0, 1].
    pub fn normalize(&mut self, value: f64) -> f64 {
        let out = match self.buf.iter().fold(None, |acc: Option<(f64, f64)>, &v| {
            Some(match acc {
                Some((mn, mx)) => (mn.min(v), mx.max(v)),
                None => (v, v),
            })
        }) {
            Some((mn, mx)) if mx > mn => ((value - mn) / (mx - mn)).clamp(0.0, 1.0),
            _ => 0.5,
        };
        self.absorb(value);
        out
    }
}

/// Entropy weight method over n decision steps x 3 normalized channels:
/// channels with more variation earn more weight; an all-constant matrix
/// falls back to the configured initial weights.
pub fn entropy_weights(
    samples: &[[f64; 3]],
    fallback: &RewardWeights,
) -> Result<RewardWeights, RewardError> {
    let n = samples.len();
    if n < 2 {
        return Err(RewardError::InsufficientSamples { n });
    }
    const EPS: f64 = 1e-12;
    let ln_n = (n as f64).ln();
    let mut divergence = [0.0f64; 3];
    for (j, d) in divergence.iter_mut().enumerate() {
        let total: f64 = samples.iter().map(|row| row[j] + EPS).sum();
        let entropy: f64 = samples
            .iter()
            .map(|row| {
                let p = (row[j] + EPS) / total;
                p * p.ln()
            })
            .sum::<f64>()
            / -ln_n;
        *d = (1.0 - entropy).max(0.0);
    }
    let total: f64 = divergence.iter().sum();
    if total <= 0.0 {
        return Ok(*fallback);
    }
    Ok(RewardWeights::from_array(divergence.map(|d| d / total)))
}

/// Weighted sum of the normalized channels.
pub fn combine(normalized: [f64; 3], weights: &RewardWeights) -> f64 {
    normalized
        .iter()
        .zip(weights.as_array())
        .map(|(r, w)| r * w)
        .sum()
}

/// Configuration of the reward pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub initial_weights: RewardWeights,
    /// Sliding min-max window length, decision steps.
    pub window: usize,
    /// Decision steps during which raw rewards are divided by fixed scales
    /// instead of min-max normalized.
    pub warmup: usize,
    /// Warm-up scale constants per channel (conflicts, seconds, grams).
    pub warmup_scales: [f64; 3],
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            initial_weights: RewardWeights::default(),
            window: 500,
            warmup: 50,
            warmup_scales: [10.0, 100.0, 1000.0],
        }
    }
}

/// One decision step's reward decomposition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardBreakdown {
    pub raw: [f64; 3],
    pub normalized: [f64; 3],
    pub combined: f64,
}

/// Stateful reward computation carried across an entire training run.
#[derive(Clone, Debug)]
pub struct RewardPipeline {
    config: RewardConfig,
    weights: RewardWeights,
    windows: [NormalizationWindow; 3],
    steps_seen: usize,
    collect_samples: bool,
    samples: Vec<[f64; 3]>,
}

impl RewardPipeline {
    pub fn new(config: RewardConfig, weights: RewardWeights) -> Self {
        let windows = [
            NormalizationWindow::new(config.window),
            NormalizationWindow::new(config.window),
            NormalizationWindow::new(config.window),
        ];
        RewardPipeline {
            config,
            weights,
            windows,
            steps_seen: 0,
            collect_samples: false,
            samples: Vec::new(),
        }
    }

    pub fn weights(&self) -> RewardWeights {
        self.weights
    }

    /// Enables sample collection for periodic entropy reweighting.
    pub fn set_collect_samples(&mut self, on: bool) {
        self.collect_samples = on;
    }

    pub fn step(&mut self, prev: &MetricsRecord, cur: &MetricsRecord) -> RewardBreakdown {
        let raw = raw_rewards(prev, cur);
        let normalized = if self.steps_seen < self.config.warmup {
            let mut scaled = [0.0; 3];
            for i in 0..3 {
                self.windows[i].absorb(raw[i]);
                scaled[i] = raw[i] / self.config.warmup_scales[i];
            }
            scaled
        } else {
            let mut norm = [0.0; 3];
            for i in 0..3 {
                norm[i] = self.windows[i].normalize(raw[i]);
            }
            if self.collect_samples {
                self.samples.push(norm);
            }
            norm
        };
        self.steps_seen += 1;
        RewardBreakdown {
            raw,
            normalized,
            combined: combine(normalized, &self.weights),
        }
    }

    /// Recomputes weights from the collected samples by the entropy method,
    /// blended 50/50 with the initial weights, and clears the sample window.
    pub fn reweight(&mut self) -> Result<RewardWeights, RewardError> {
        let fresh = entropy_weights(&self.samples, &self.config.initial_weights)?;
        let init = self.config.initial_weights.as_array();
        let new = fresh.as_array();
        let mut blended = [0.0; 3];
        for i in 0..3 {
            blended[i] = 0.5 * init[i] + 0.5 * new[i];
        }
        self.weights = RewardWeights::from_array(blended);
        self.samples.clear();
        Ok(self.weights)
    }
}
