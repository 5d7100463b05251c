//! Intelligent Driver Model car-following law.

use serde::{Deserialize, Serialize};

/// IDM parameters shared by every vehicle in the scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    /// Desired (free-flow) speed, m/s.
    pub v0: f64,
    /// Maximum acceleration, m/s^2.
    pub a_max: f64,
    /// Comfortable deceleration, m/s^2.
    pub b_comfort: f64,
    /// Jam gap: minimum bumper-to-bumper distance at standstill, m.
    pub s0: f64,
    /// Desired time headway, s.
    pub headway: f64,
    /// Vehicle length, m.
    pub vehicle_length: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            v0: 13.9,
            a_max: 2.0,
            b_comfort: 3.0,
            s0: 2.0,
            headway: 1.2,
            vehicle_length: 5.0,
        }
    }
}

/// The vehicle (or virtual obstacle) immediately ahead of a follower.
#[derive(Clone, Copy, Debug)]
pub struct LeaderGap {
    /// Bumper-to-bumper distance, m. Must be positive.
    pub gap: f64,
    /// Leader speed, m/s. Zero for stop lines.
    pub speed: f64,
}

/// IDM acceleration for a follower at `speed`, optionally constrained by a
/// leader. A red or yellow stop line is expressed as a standing leader.
///
/// a = a_max * (1 - (v/v0)^4 - (s*/s)^2), with
/// s* = s0 + v*T + v*dv / (2*sqrt(a_max*b)).
pub fn idm_acceleration(speed: f64, leader: Option<LeaderGap>, p: &IdmParams) -> f64 {
    let free_term = (speed / p.v0).powi(4);
    let interaction = match leader {
        Some(l) => {
            debug_assert!(l.gap > 0.0, "non-positive gap is a collision fault");
            let dv = speed - l.speed;
            let s_star = p.s0 + speed * p.headway + speed * dv / (2.0 * (p.a_max * p.b_comfort).sqrt());
            (s_star / l.gap).powi(2)
        }
        None => 0.0,
    };
    p.a_max * (1.0 - free_term - interaction)
}
