//! One simulated episode: signal machine, simulation, detectors and the
//! metric ledgers, advanced one decision second at a time.

use super::HarnessError;
use crate::agent::{argmax, QNetwork};
use crate::config::ScenarioConfig;
use crate::emissions::{CepCurve, EmissionLedger, EmissionParams};
use crate::encoding::{build_grid, encode, encoding_len, CellGrid, EncodedState, EncoderConfig};
use crate::rewards::MetricsRecord;
use crate::safety::{ConflictLedger, TTC_CONFLICT_THRESHOLD};
use crate::signal::{
    webster_fixed_time, ActuatedController, DetectorState, FixedTimeController, Phase,
    PhaseMachine,
};
use crate::sim::{cumulative_waiting, Simulation, TrafficSnapshot, DT, STOP_SPEED};

/// Per-step metrics emitted by the runner (cumulative columns plus
/// instantaneous queue and speed).
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub t: u64,
    pub phase_label: String,
    pub conflicts_cum: u64,
    pub conflict_events_cum: u64,
    pub waiting_cum_s: f64,
    pub co2_cum_g: f64,
    pub queue_len: usize,
    pub mean_speed_mps: f64,
}

/// End-of-episode totals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub conflicts: u64,
    pub conflict_events: u64,
    pub waiting_s: f64,
    pub co2_g: f64,
    pub served: u64,
    pub mean_speed_mps: f64,
}

/// The built-in controllers evaluated against the learned agents. Agent
/// policies act greedily on the encoded state.
pub enum ControlLaw {
    Fixed(FixedTimeController),
    Actuated(ActuatedController),
    Greedy(QNetwork),
}

impl ControlLaw {
    pub fn fixed_time(config: &ScenarioConfig) -> Result<Self, HarnessError> {
        let plan = webster_fixed_time(
            &config.demand,
            config.webster.saturation_flow_veh_h,
            &config.signal,
        )?;
        Ok(ControlLaw::Fixed(FixedTimeController::from_plan(&plan)))
    }

    pub fn actuated(config: &ScenarioConfig) -> Self {
        ControlLaw::Actuated(ActuatedController::new(config.actuated))
    }

    pub fn greedy(net: QNetwork) -> Self {
        ControlLaw::Greedy(net)
    }

    pub fn decide(&self, runner: &EpisodeRunner) -> Phase {
        match self {
            ControlLaw::Fixed(c) => c.decide(&runner.machine),
            ControlLaw::Actuated(c) => c.decide(&runner.machine, &runner.detectors),
            ControlLaw::Greedy(net) => {
                let state = runner.encode();
                Phase::from_index(argmax(&net.forward(&state.values)))
            }
        }
    }
}

pub struct EpisodeRunner {
    pub sim: Simulation,
    pub machine: PhaseMachine,
    pub detectors: DetectorState,
    grid: CellGrid,
    encoder_cfg: EncoderConfig,
    emission_params: EmissionParams,
    cep: CepCurve,
    conflicts: ConflictLedger,
    emissions: EmissionLedger,
    detection_zone_m: f64,
    speed_sum: f64,
    vehicle_steps: u64,
    steps: u64,
}

impl EpisodeRunner {
    pub fn new(config: &ScenarioConfig, seed: u64) -> Self {
        let sim = Simulation::new(config.sim_params(), config.demand, seed);
        let machine = PhaseMachine::new(Phase::Weg, config.signal);
        let grid = build_grid(&config.grid);
        let encoder_cfg = EncoderConfig {
            stop_line_m: config.geometry.lane_length_m,
            include_phase_context: config.encoder.include_phase_context,
            max_considered_green_s: config.encoder.max_considered_green_s,
        };
        EpisodeRunner {
            sim,
            machine,
            detectors: DetectorState::new(),
            grid,
            encoder_cfg,
            emission_params: config.emissions.params,
            cep: config.emissions.cep.clone(),
            conflicts: ConflictLedger::new(),
            emissions: EmissionLedger::new(),
            detection_zone_m: config.actuated.detection_zone_m,
            speed_sum: 0.0,
            vehicle_steps: 0,
            steps: 0,
        }
    }

    pub fn encoding_len(&self) -> usize {
        encoding_len(&self.grid, &self.encoder_cfg)
    }

    /// Encodes the current state (pure with respect to sim and machine).
    pub fn encode(&self) -> EncodedState {
        encode(&self.sim.snapshot(), &self.machine, &self.grid, &self.encoder_cfg)
    }

    /// Episode-cumulative indicators at the current instant.
    pub fn metrics_record(&self) -> MetricsRecord {
        MetricsRecord {
            ctc: self.conflicts.ctc() as f64,
            cwt: self.sim.cumulative_waiting_total(),
            cde: self.emissions.total_g(),
        }
    }

    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            conflicts: self.conflicts.ctc(),
            conflict_events: self.conflicts.events(),
            waiting_s: self.sim.cumulative_waiting_total(),
            co2_g: self.emissions.total_g(),
            served: self.sim.counters().exited,
            mean_speed_mps: if self.vehicle_steps > 0 {
                self.speed_sum / self.vehicle_steps as f64
            } else {
                0.0
            },
        }
    }

    /// Applies a phase request, advances one second and updates all
    /// ledgers. Returns the step metrics and the post-step snapshot.
    pub fn step(&mut self, request: Phase) -> Result<(StepRecord, TrafficSnapshot), HarnessError> {
        self.machine.request(request);
        let phase_label = if self.machine.in_yellow() {
            format!(
                "{}>{}",
                self.machine.active().label(),
                self.machine.pending().expect("yellow has target").label()
            )
        } else {
            self.machine.active().label().to_string()
        };
        let lights = self.machine.tick();
        self.sim.advance(&lights)?;
        let snapshot = self.sim.snapshot();

        self.conflicts.record_step(&snapshot, TTC_CONFLICT_THRESHOLD);
        self.emissions
            .record_step(&snapshot, &self.emission_params, &self.cep, DT);
        self.detectors.update(
            &snapshot,
            self.encoder_cfg.stop_line_m,
            self.detection_zone_m,
        );

        let mut queue_len = 0;
        let mut speed_sum = 0.0;
        let mut count = 0u64;
        for v in snapshot.vehicles() {
            speed_sum += v.speed;
            count += 1;
            if !v.has_crossed() && v.speed < STOP_SPEED {
                queue_len += 1;
            }
        }
        self.speed_sum += speed_sum;
        self.vehicle_steps += count;
        self.steps += 1;

        let record = StepRecord {
            t: self.steps,
            phase_label,
            conflicts_cum: self.conflicts.ctc(),
            conflict_events_cum: self.conflicts.events(),
            waiting_cum_s: cumulative_waiting(&snapshot),
            co2_cum_g: self.emissions.total_g(),
            queue_len,
            mean_speed_mps: if count > 0 { speed_sum / count as f64 } else { 0.0 },
        };
        Ok((record, snapshot))
    }
}
