//! Webster fixed-time plan computation and the cyclic controller built on it.

use super::{Phase, PhaseMachine, SignalError, SignalTiming, PHASES};
use crate::sim::{DemandProfile, LaneId};

/// Cycle length and per-phase green durations (phase order WEG, WELG, NSG,
/// NSLG), seconds. Greens are floored at minimum green.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WebsterPlan {
    pub cycle_s: f64,
    pub greens_s: [f64; 4],
}

/// Expected hourly flow on one lane given the approach demand and the
/// movement-to-lane routing (through traffic splits evenly over lanes 1, 2).
fn lane_flow(demand: &DemandProfile, lane: LaneId) -> f64 {
    let d = demand.for_approach(lane.approach);
    match lane.index {
        0 => d.rate_veh_h * d.split.left,
        1 => d.rate_veh_h * d.split.through / 2.0,
        _ => d.rate_veh_h * (d.split.through / 2.0 + d.split.right),
    }
}

/// Webster's method: cycle C0 = (1.5 L + 5) / (1 - Y) with lost time
/// L = 4 phases x yellow, and greens proportional to the critical flow
/// ratios. Fails when demand saturates (Y >= 1).
pub fn webster_fixed_time(
    demand: &DemandProfile,
    saturation_flow_veh_h: f64,
    timing: &SignalTiming,
) -> Result<WebsterPlan, SignalError> {
    let ratios: [f64; 4] = PHASES.map(|phase| {
        phase
            .served_lanes()
            .iter()
            .map(|lane| lane_flow(demand, *lane) / saturation_flow_veh_h)
            .fold(0.0, f64::max)
    });
    let y_sum: f64 = ratios.iter().sum();
    if y_sum >= 1.0 {
        return Err(SignalError::InfeasibleDemand { y: y_sum });
    }
    let lost_time = 4.0 * timing.yellow_s as f64;
    let cycle_s = (1.5 * lost_time + 5.0) / (1.0 - y_sum);
    let effective_green = cycle_s - lost_time;
    let min_green = timing.min_green_s as f64;
    let greens_s = ratios.map(|y| {
        let share = if y_sum > 0.0 {
            y / y_sum * effective_green
        } else {
            effective_green / 4.0
        };
        share.max(min_green)
    });
    Ok(WebsterPlan { cycle_s, greens_s })
}

/// Cycles through the four phases with fixed green durations. Legality (min
/// green, yellow) is still enforced by the phase machine it drives.
#[derive(Clone, Debug)]
pub struct FixedTimeController {
    greens_s: [u32; 4],
}

impl FixedTimeController {
    pub fn from_plan(plan: &WebsterPlan) -> Self {
        FixedTimeController {
            greens_s: plan.greens_s.map(|g| g.round() as u32),
        }
    }

    pub fn greens_s(&self) -> [u32; 4] {
        self.greens_s
    }

    pub fn decide(&self, machine: &PhaseMachine) -> Phase {
        let active = machine.active();
        if machine.in_yellow() {
            return active;
        }
        if machine.elapsed_green() >= self.greens_s[active.index()] {
            active.next()
        } else {
            active
        }
    }
}
