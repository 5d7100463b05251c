//! Scenario configuration: a single TOML file with nested sections covering
//! demand, geometry, driver model, signal timing, controllers, emissions,
//! state encoding, rewards, agent hyperparameters and run layout. Every
//! section and field has a default, so a partial file is a valid scenario.

use crate::agent::Hyperparams;
use crate::emissions::{CepCurve, EmissionParams};
use crate::encoding::GridParams;
use crate::rewards::{RewardConfig, RewardWeights};
use crate::signal::{ActuatedParams, SignalTiming};
use crate::sim::{Approach, DemandProfile, IdmParams, SimParams};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config encode: {0}")]
    Encode(#[from] toml::ser::Error),
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Lane geometry and conflict-zone clearance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    pub lane_length_m: f64,
    pub clearance_s: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            lane_length_m: 500.0,
            clearance_s: 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WebsterConfig {
    pub saturation_flow_veh_h: f64,
}

impl Default for WebsterConfig {
    fn default() -> Self {
        WebsterConfig {
            saturation_flow_veh_h: 1800.0,
        }
    }
}

/// Emission model parameters plus the CEP curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmissionsConfig {
    #[serde(flatten)]
    pub params: EmissionParams,
    pub cep: CepCurve,
}

impl Default for EmissionsConfig {
    fn default() -> Self {
        EmissionsConfig {
            params: EmissionParams::default(),
            cep: CepCurve::default_passenger_car(),
        }
    }
}

/// State-encoder options beyond the grid geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderOptions {
    pub include_phase_context: bool,
    pub max_considered_green_s: f64,
}

impl Default for EncoderOptions {
    fn default() -> Self {
        EncoderOptions {
            include_phase_context: true,
            max_considered_green_s: 60.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    /// Simulated seconds per episode.
    pub length_s: u64,
    /// Training episodes.
    pub count: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            length_s: 3600,
            count: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedsConfig {
    /// Base seed for training episodes (episode seeds derive from it).
    pub train_base: u64,
    /// Held-out evaluation seeds, disjoint from training by construction.
    pub eval: Vec<u64>,
}

impl Default for SeedsConfig {
    fn default() -> Self {
        SeedsConfig {
            train_base: 42,
            eval: (9001..=9010).collect(),
        }
    }
}

/// The complete scenario: everything a run needs besides the output path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ScenarioConfig {
    pub demand: DemandProfile,
    pub geometry: GeometryConfig,
    pub idm: IdmParams,
    pub signal: SignalTiming,
    pub webster: WebsterConfig,
    pub actuated: ActuatedParams,
    pub emissions: EmissionsConfig,
    pub grid: GridParams,
    pub encoder: EncoderOptions,
    pub rewards: RewardConfig,
    pub agent: Hyperparams,
    pub episode: EpisodeConfig,
    pub seeds: SeedsConfig,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)?;
        let config: ScenarioConfig = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// The same scenario with all arrival rates scaled.
    pub fn with_demand_scale(&self, factor: f64) -> Self {
        let mut scaled = self.clone();
        scaled.demand = self.demand.scaled(factor);
        scaled
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            lane_length: self.geometry.lane_length_m,
            clearance_time: self.geometry.clearance_s,
            idm: self.idm,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for approach in Approach::ALL {
            let d = self.demand.for_approach(approach);
            let name = approach.short();
            if !(d.rate_veh_h >= 0.0) {
                return Err(invalid(
                    &format!("demand.{name}.rate_veh_h"),
                    "must be >= 0",
                ));
            }
            let s = d.split;
            let parts = [s.left, s.through, s.right];
            if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(invalid(
                    &format!("demand.{name}.split"),
                    "fractions must lie in [0, 1]",
                ));
            }
            if (s.sum() - 1.0).abs() > 1e-9 {
                return Err(invalid(
                    &format!("demand.{name}.split"),
                    format!("fractions must sum to 1, got {}", s.sum()),
                ));
            }
        }
        if !(self.geometry.lane_length_m > 0.0) {
            return Err(invalid("geometry.lane_length_m", "must be > 0"));
        }
        if !(self.geometry.clearance_s >= 0.0) {
            return Err(invalid("geometry.clearance_s", "must be >= 0"));
        }
        let idm_fields = [
            ("idm.v0", self.idm.v0),
            ("idm.a_max", self.idm.a_max),
            ("idm.b_comfort", self.idm.b_comfort),
            ("idm.s0", self.idm.s0),
            ("idm.headway", self.idm.headway),
            ("idm.vehicle_length", self.idm.vehicle_length),
        ];
        for (field, value) in idm_fields {
            if !(value > 0.0) {
                return Err(invalid(field, "must be > 0"));
            }
        }
        if self.signal.min_green_s < 1 {
            return Err(invalid("signal.min_green_s", "must be >= 1"));
        }
        if self.signal.yellow_s < 1 {
            return Err(invalid("signal.yellow_s", "must be >= 1"));
        }
        if !(self.webster.saturation_flow_veh_h > 0.0) {
            return Err(invalid("webster.saturation_flow_veh_h", "must be > 0"));
        }
        if !(self.actuated.detection_zone_m > 0.0) {
            return Err(invalid("actuated.detection_zone_m", "must be > 0"));
        }
        if !(self.actuated.gap_s >= 0.0) {
            return Err(invalid("actuated.gap_s", "must be >= 0"));
        }
        let e = &self.emissions.params;
        if !(e.vehicle_mass_kg > 0.0) {
            return Err(invalid("emissions.vehicle_mass_kg", "must be > 0"));
        }
        if !(e.load_mass_kg >= 0.0) || !(e.rotating_mass_kg >= 0.0) {
            return Err(invalid("emissions.load_mass_kg", "masses must be >= 0"));
        }
        if !(e.gearbox_efficiency > 0.0 && e.gearbox_efficiency <= 1.0) {
            return Err(invalid("emissions.gearbox_efficiency", "must lie in (0, 1]"));
        }
        let positive = [
            ("emissions.rolling_coeff", e.rolling_coeff),
            ("emissions.air_density_kg_m3", e.air_density_kg_m3),
            ("emissions.drag_coeff", e.drag_coeff),
            ("emissions.frontal_area_m2", e.frontal_area_m2),
            ("emissions.gravity_mps2", e.gravity_mps2),
        ];
        for (field, value) in positive {
            if !(value > 0.0) {
                return Err(invalid(field, "must be > 0"));
            }
        }
        if self.grid.cells_per_lane < 1 {
            return Err(invalid("grid.cells_per_lane", "must be >= 1"));
        }
        if !(self.grid.coverage_m > 0.0) || self.grid.coverage_m > self.geometry.lane_length_m {
            return Err(invalid(
                "grid.coverage_m",
                "must be > 0 and within the lane length",
            ));
        }
        if !(self.grid.growth > 0.0) {
            return Err(invalid("grid.growth", "must be > 0"));
        }
        if !(self.grid.first_cell_m > 0.0) {
            return Err(invalid("grid.first_cell_m", "must be > 0"));
        }
        if !(self.encoder.max_considered_green_s > 0.0) {
            return Err(invalid("encoder.max_considered_green_s", "must be > 0"));
        }
        self.rewards
            .initial_weights
            .validate()
            .map_err(|e| invalid("rewards.initial_weights", e.to_string()))?;
        if self.rewards.window < 1 {
            return Err(invalid("rewards.window", "must be >= 1"));
        }
        if self.rewards.warmup_scales.iter().any(|s| !(*s > 0.0)) {
            return Err(invalid("rewards.warmup_scales", "must be > 0"));
        }
        let hp = &self.agent;
        if hp.hidden.iter().any(|h| *h == 0) {
            return Err(invalid("agent.hidden", "layer widths must be >= 1"));
        }
        if !(hp.learning_rate > 0.0) {
            return Err(invalid("agent.learning_rate", "must be > 0"));
        }
        if !(0.0..1.0).contains(&hp.gamma) {
            return Err(invalid("agent.gamma", "must lie in [0, 1)"));
        }
        if hp.batch_size < 1 {
            return Err(invalid("agent.batch_size", "must be >= 1"));
        }
        if hp.capacity < hp.batch_size {
            return Err(invalid("agent.capacity", "must be >= batch_size"));
        }
        if hp.sync_period < 1 {
            return Err(invalid("agent.sync_period", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&hp.eps_start) || !(0.0..=1.0).contains(&hp.eps_end) {
            return Err(invalid("agent.eps_start", "epsilon must lie in [0, 1]"));
        }
        if hp.train_period < 1 {
            return Err(invalid("agent.train_period", "must be >= 1"));
        }
        if self.episode.length_s < 1 {
            return Err(invalid("episode.length_s", "must be >= 1"));
        }
        if self.seeds.eval.is_empty() {
            return Err(invalid("seeds.eval", "needs at least one evaluation seed"));
        }
        Ok(())
    }

    /// The reward weights a controller trains and evaluates with.
    pub fn weights_for(&self, efficiency_only: bool) -> RewardWeights {
        if efficiency_only {
            RewardWeights::efficiency_only()
        } else {
            self.rewards.initial_weights
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_preserves_config() {
        let config = ScenarioConfig::default();
        let text = toml::to_string_pretty(&config).unwrap();
        let parsed: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let text = r#"
            [demand.east]
            rate_veh_h = 950.0

            [agent]
            hidden = [32]
        "#;
        let config: ScenarioConfig = toml::from_str(text).unwrap();
        assert_eq!(config.demand.east.rate_veh_h, 950.0);
        assert_eq!(config.demand.west.rate_veh_h, 700.0);
        assert_eq!(config.agent.hidden, vec![32]);
        assert_eq!(config.agent.batch_size, 32);
        config.validate().unwrap();
    }

    #[test]
    fn validation_names_the_offending_field() {
        let mut config = ScenarioConfig::default();
        config.demand.north.split.left = 0.9;
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("demand.N.split"), "{err}");

        let mut config = ScenarioConfig::default();
        config.agent.gamma = 1.0;
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("agent.gamma"), "{err}");
    }

    #[test]
    fn demand_scaling_touches_rates_only() {
        let config = ScenarioConfig::default().with_demand_scale(1.5);
        assert_eq!(config.demand.east.rate_veh_h, 1050.0);
        assert_eq!(config.demand.north.rate_veh_h, 600.0);
        assert_eq!(config.demand.north.split, crate::sim::MovementSplit::default());
        assert_eq!(config.agent, ScenarioConfig::default().agent);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.toml");
        let config = ScenarioConfig::default();
        config.save(&path).unwrap();
        let loaded = ScenarioConfig::load(&path).unwrap();
        assert_eq!(loaded, config);
    }

    #[test]
    fn invalid_cep_curve_fails_to_parse() {
        let text = r#"
            [emissions]
            cep = [[5.0, 100.0], [3.0, 50.0]]
        "#;
        let parsed: Result<ScenarioConfig, _> = toml::from_str(text);
        assert!(parsed.is_err());
    }
}
