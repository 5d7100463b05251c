//! Signal phases, the interlocked phase state machine, and the benchmark
//! controllers (Webster fixed-time and gap-out/max-out actuated control).
//!
//! Phase legality lives entirely in [`PhaseMachine`]: controllers and agents
//! only express a desired phase once per second, and the machine enforces
//! minimum green and the yellow transition, so no caller can produce an
//! illegal signal sequence.

mod actuated;
mod webster;

pub use actuated::{ActuatedController, ActuatedParams, DetectorState};
pub use webster::{webster_fixed_time, FixedTimeController, WebsterPlan};

use crate::sim::{Approach, LaneId, Light, LightMap};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("infeasible demand: critical flow ratio sum Y = {y:.3} must be < 1")]
    InfeasibleDemand { y: f64 },
}

/// The four signal phases: W-E through/right, W-E left, N-S through/right,
/// N-S left. Their green lane sets are pairwise disjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Weg,
    Welg,
    Nsg,
    Nslg,
}

pub const PHASES: [Phase; 4] = [Phase::Weg, Phase::Welg, Phase::Nsg, Phase::Nslg];

impl Phase {
    pub fn index(self) -> usize {
        match self {
            Phase::Weg => 0,
            Phase::Welg => 1,
            Phase::Nsg => 2,
            Phase::Nslg => 3,
        }
    }

    pub fn from_index(index: usize) -> Phase {
        PHASES[index]
    }

    /// Round-robin successor, the actuated controller's service order.
    pub fn next(self) -> Phase {
        PHASES[(self.index() + 1) % PHASES.len()]
    }

    /// Lanes that receive green during this phase.
    pub fn served_lanes(self) -> &'static [LaneId] {
        const WEG: [LaneId; 4] = [
            LaneId { approach: Approach::West, index: 1 },
            LaneId { approach: Approach::West, index: 2 },
            LaneId { approach: Approach::East, index: 1 },
            LaneId { approach: Approach::East, index: 2 },
        ];
        const WELG: [LaneId; 2] = [
            LaneId { approach: Approach::West, index: 0 },
            LaneId { approach: Approach::East, index: 0 },
        ];
        const NSG: [LaneId; 4] = [
            LaneId { approach: Approach::North, index: 1 },
            LaneId { approach: Approach::North, index: 2 },
            LaneId { approach: Approach::South, index: 1 },
            LaneId { approach: Approach::South, index: 2 },
        ];
        const NSLG: [LaneId; 2] = [
            LaneId { approach: Approach::North, index: 0 },
            LaneId { approach: Approach::South, index: 0 },
        ];
        match self {
            Phase::Weg => &WEG,
            Phase::Welg => &WELG,
            Phase::Nsg => &NSG,
            Phase::Nslg => &NSLG,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::Weg => "WEG",
            Phase::Welg => "WELG",
            Phase::Nsg => "NSG",
            Phase::Nslg => "NSLG",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Minimum green and yellow durations, whole seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalTiming {
    pub min_green_s: u32,
    pub yellow_s: u32,
}

impl Default for SignalTiming {
    fn default() -> Self {
        SignalTiming {
            min_green_s: 10,
            yellow_s: 4,
        }
    }
}

/// Phase state machine. `request` records intent; `tick` consumes one second
/// and emits the lane colors in effect during it.
#[derive(Clone, Debug)]
pub struct PhaseMachine {
    active: Phase,
    elapsed_green: u32,
    in_yellow: bool,
    yellow_remaining: u32,
    pending: Option<Phase>,
    timing: SignalTiming,
}

impl PhaseMachine {
    pub fn new(initial: Phase, timing: SignalTiming) -> Self {
        PhaseMachine {
            active: initial,
            elapsed_green: 0,
            in_yellow: false,
            yellow_remaining: 0,
            pending: None,
            timing,
        }
    }

    pub fn active(&self) -> Phase {
        self.active
    }

    pub fn elapsed_green(&self) -> u32 {
        self.elapsed_green
    }

    pub fn in_yellow(&self) -> bool {
        self.in_yellow
    }

    pub fn pending(&self) -> Option<Phase> {
        self.pending
    }

    pub fn timing(&self) -> SignalTiming {
        self.timing
    }

    /// Records the controller's desired phase for the upcoming second.
    ///
    /// Requesting the active phase cancels any latched switch. A different
    /// phase switches immediately once minimum green is served, otherwise it
    /// is latched and executed at the earliest legal second. Requests during
    /// yellow are ignored: the committed transition completes first.
    pub fn request(&mut self, target: Phase) {
        if self.in_yellow {
            return;
        }
        if target == self.active {
            self.pending = None;
            return;
        }
        self.pending = Some(target);
        if self.elapsed_green >= self.timing.min_green_s {
            self.begin_yellow();
        }
    }

    /// Advances one second and returns the colors shown during it.
    pub fn tick(&mut self) -> LightMap {
        if self.in_yellow {
            let mut lights = LightMap::all_red();
            for lane in self.active.served_lanes() {
                lights.set(*lane, Light::Yellow);
            }
            self.yellow_remaining -= 1;
            if self.yellow_remaining == 0 {
                self.active = self.pending.take().expect("yellow always has a target");
                self.in_yellow = false;
                self.elapsed_green = 0;
            }
            lights
        } else {
            let mut lights = LightMap::all_red();
            for lane in self.active.served_lanes() {
                lights.set(*lane, Light::Green);
            }
            self.elapsed_green += 1;
            if self.pending.is_some() && self.elapsed_green >= self.timing.min_green_s {
                self.begin_yellow();
            }
            lights
        }
    }

    fn begin_yellow(&mut self) {
        debug_assert!(self.pending.is_some());
        self.in_yellow = true;
        self.yellow_remaining = self.timing.yellow_s;
    }
}

/// The selectable controller families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControllerKind {
    FixedTime,
    Actuated,
    AgentTe,
    AgentSed,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] = [
        ControllerKind::FixedTime,
        ControllerKind::Actuated,
        ControllerKind::AgentTe,
        ControllerKind::AgentSed,
    ];

    pub fn is_agent(self) -> bool {
        matches!(self, ControllerKind::AgentTe | ControllerKind::AgentSed)
    }

    pub fn label(self) -> &'static str {
        match self {
            ControllerKind::FixedTime => "fixed",
            ControllerKind::Actuated => "actuated",
            ControllerKind::AgentTe => "te",
            ControllerKind::AgentSed => "sed",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(ControllerKind::FixedTime),
            "actuated" => Ok(ControllerKind::Actuated),
            "te" => Ok(ControllerKind::AgentTe),
            "sed" => Ok(ControllerKind::AgentSed),
            other => Err(format!(
                "unknown controller '{other}' (expected fixed|actuated|te|sed)"
            )),
        }
    }
}
