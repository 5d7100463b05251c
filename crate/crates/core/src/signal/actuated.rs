//! Actuated control: extend the active phase while served lanes keep
//! producing detections, terminate on gap-out or max-out, round-robin order.

use super::{Phase, PhaseMachine};
use crate::sim::{LaneId, TrafficSnapshot, LANE_COUNT};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActuatedParams {
    /// Detection zone length upstream of the stop line, m.
    pub detection_zone_m: f64,
    /// Unit extension: gap-out after this many seconds without detection, s.
    pub gap_s: f64,
    /// Maximum green before forced termination, s.
    pub max_green_s: u32,
}

impl Default for ActuatedParams {
    fn default() -> Self {
        ActuatedParams {
            detection_zone_m: 50.0,
            gap_s: 3.0,
            max_green_s: 60,
        }
    }
}

/// Seconds since each lane's detection zone last reported a vehicle.
#[derive(Clone, Debug)]
pub struct DetectorState {
    ages: [f64; LANE_COUNT],
}

impl DetectorState {
    pub fn new() -> Self {
        DetectorState {
            ages: [f64::INFINITY; LANE_COUNT],
        }
    }

    /// Updates from a post-step snapshot: a vehicle on the approach within
    /// the zone resets that lane's age to zero.
    pub fn update(&mut self, snapshot: &TrafficSnapshot, stop_line_m: f64, zone_m: f64) {
        for lane in LaneId::all() {
            let occupied = snapshot.lane(lane).iter().any(|v| {
                !v.has_crossed() && v.pos >= stop_line_m - zone_m && v.pos <= stop_line_m
            });
            let age = &mut self.ages[lane.flat_index()];
            *age = if occupied { 0.0 } else { *age + 1.0 };
        }
    }

    pub fn age(&self, lane: LaneId) -> f64 {
        self.ages[lane.flat_index()]
    }

    #[cfg(test)]
    fn set_age(&mut self, lane: LaneId, age: f64) {
        self.ages[lane.flat_index()] = age;
    }
}

impl Default for DetectorState {
    fn default() -> Self {
        DetectorState::new()
    }
}

#[derive(Clone, Debug)]
pub struct ActuatedController {
    params: ActuatedParams,
}

impl ActuatedController {
    pub fn new(params: ActuatedParams) -> Self {
        ActuatedController { params }
    }

    pub fn params(&self) -> &ActuatedParams {
        &self.params
    }

    pub fn decide(&self, machine: &PhaseMachine, detectors: &DetectorState) -> Phase {
        let active = machine.active();
        if machine.in_yellow() {
            return active;
        }
        if machine.elapsed_green() >= self.params.max_green_s {
            return active.next();
        }
        let demand_present = active
            .served_lanes()
            .iter()
            .any(|lane| detectors.age(*lane) <= self.params.gap_s);
        if demand_present {
            active
        } else {
            active.next()
        }
    }
}
