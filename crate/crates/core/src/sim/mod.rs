//! Deterministic 1 Hz microscopic simulation of a four-leg intersection.
//!
//! Vehicles follow the Intelligent Driver Model along 500 m entry lanes,
//! stop for red/yellow signals at the stop line (modeled as a standing
//! virtual leader), and clear a fixed-duration conflict zone after crossing.
//! Arrivals are Poisson per approach with dedicated RNG streams, so demand
//! realizations never depend on control decisions.

mod idm;
mod types;

pub use idm::{idm_acceleration, IdmParams, LeaderGap};
pub use types::{
    Approach, ApproachDemand, Counters, DemandProfile, LaneId, Light, LightMap, Movement,
    MovementSplit, TrafficSnapshot, Vehicle, LANES_PER_APPROACH, LANE_COUNT,
};

use crate::rng::{stream_rng, streams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use std::collections::VecDeque;
use thiserror::Error;

/// Simulation time step, seconds.
pub const DT: f64 = 1.0;

/// Below this speed a vehicle counts as stopped and accrues waiting time.
pub const STOP_SPEED: f64 = 0.1;

/// A right turn on red yields to green-phase vehicles within this many
/// seconds of the stop line.
pub const RIGHT_TURN_YIELD_HORIZON: f64 = 4.0;

/// Residual clearance the discrete integrator always preserves between a
/// follower and its leader's rear bumper, m.
const HARD_GAP: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("collision fault at t={time}: vehicles {follower} and {leader} overlap on lane {lane:?}")]
    Collision {
        time: f64,
        lane: LaneId,
        follower: u64,
        leader: u64,
    },
}

/// Static simulation parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimParams {
    /// Entry lane length; the stop line sits at this position. m.
    pub lane_length: f64,
    /// Conflict-zone traversal time after crossing the stop line, s.
    pub clearance_time: f64,
    pub idm: IdmParams,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            lane_length: 500.0,
            clearance_time: 3.0,
            idm: IdmParams::default(),
        }
    }
}

/// Arrivals drawn for one approach in one 1 s step: target lane and movement
/// for each new vehicle. Blocked insertions are deferred by the simulation,
/// never dropped.
pub fn draw_arrivals(
    rng: &mut ChaCha8Rng,
    demand: &ApproachDemand,
    approach: Approach,
) -> Vec<(LaneId, Movement)> {
    if demand.rate_veh_h <= 0.0 {
        return Vec::new();
    }
    let lambda = demand.rate_veh_h / 3600.0;
    let count = Poisson::new(lambda)
        .expect("positive arrival rate")
        .sample(rng) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let u: f64 = rng.random();
        let movement = if u < demand.split.left {
            Movement::Left
        } else if u < demand.split.left + demand.split.through {
            Movement::Through
        } else {
            Movement::Right
        };
        let lane_index = match movement {
            Movement::Left => 0,
            // Through traffic spreads over the middle and rightmost lanes.
            Movement::Through => 1 + rng.random_range(0..2u8),
            Movement::Right => 2,
        };
        out.push((LaneId::new(approach, lane_index), movement));
    }
    out
}

#[derive(Clone, Debug)]
struct PendingVehicle {
    movement: Movement,
}

/// The mutable intersection state. One instance per episode; owns its RNG
/// streams, so independent instances may run in parallel.
#[derive(Clone, Debug)]
pub struct Simulation {
    params: SimParams,
    demand: DemandProfile,
    time: f64,
    lanes: Vec<Vec<Vehicle>>,
    pending: Vec<VecDeque<PendingVehicle>>,
    arrival_rngs: Vec<ChaCha8Rng>,
    counters: Counters,
    banked_waiting: f64,
    next_id: u64,
    last_lights: LightMap,
    strict: bool,
}

impl Simulation {
    pub fn new(params: SimParams, demand: DemandProfile, seed: u64) -> Self {
        let arrival_rngs = Approach::ALL
            .iter()
            .map(|a| stream_rng(seed, streams::ARRIVALS, a.index() as u64))
            .collect();
        Simulation {
            params,
            demand,
            time: 0.0,
            lanes: vec![Vec::new(); LANE_COUNT],
            pending: vec![VecDeque::new(); LANE_COUNT],
            arrival_rngs,
            counters: Counters::default(),
            banked_waiting: 0.0,
            next_id: 0,
            last_lights: LightMap::all_red(),
            strict: true,
        }
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    /// Arrivals generated but not yet inserted (entry blocked).
    pub fn pending_count(&self) -> usize {
        self.pending.iter().map(VecDeque::len).sum()
    }

    /// Arrivals generated so far: inserted plus still pending. Depends only
    /// on the demand streams, never on control decisions.
    pub fn generated_count(&self) -> u64 {
        self.counters.entered + self.pending_count() as u64
    }

    pub fn set_strict(&mut self, strict: bool) {
        self.strict = strict;
    }

    /// Places a vehicle directly on a lane. Intended for scenario setup and
    /// tests; bypasses the arrival process but keeps counters consistent.
    pub fn add_vehicle(&mut self, lane: LaneId, movement: Movement, pos: f64, speed: f64) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let vehicle = Vehicle {
            id,
            lane,
            movement,
            pos,
            speed,
            accel: 0.0,
            length: self.params.idm.vehicle_length,
            waiting_time: 0.0,
            spawn_time: self.time,
            crossed_at: None,
        };
        let lane_vec = &mut self.lanes[lane.flat_index()];
        let at = lane_vec.partition_point(|v| v.pos < pos);
        lane_vec.insert(at, vehicle);
        self.counters.entered += 1;
        id
    }

    /// Advances the simulation by one second under the given signal colors.
    pub fn advance(&mut self, lights: &LightMap) -> Result<(), SimError> {
        self.spawn_step();
        self.insert_pending();
        let right_turn_clear = self.right_turn_zone_clear(lights);
        self.integrate(lights, right_turn_clear);
        let new_time = self.time + DT;
        self.remove_cleared(new_time);
        self.time = new_time;
        self.last_lights = *lights;
        if self.strict {
            self.check_ordering()?;
        }
        Ok(())
    }

    /// Episode-cumulative waiting time: vehicles currently present plus the
    /// waiting banked by vehicles that already exited.
    pub fn cumulative_waiting_total(&self) -> f64 {
        let present: f64 = self.lanes.iter().flatten().map(|v| v.waiting_time).sum();
        self.banked_waiting + present
    }

    pub fn snapshot(&self) -> TrafficSnapshot {
        TrafficSnapshot {
            time: self.time,
            lanes: self.lanes.clone(),
            signal: self.last_lights,
            counters: self.counters,
            banked_waiting: self.banked_waiting,
        }
    }

    fn spawn_step(&mut self) {
        for approach in Approach::ALL {
            let demand = *self.demand.for_approach(approach);
            let rng = &mut self.arrival_rngs[approach.index()];
            for (lane, movement) in draw_arrivals(rng, &demand, approach) {
                self.pending[lane.flat_index()].push_back(PendingVehicle { movement });
            }
        }
    }

    fn insert_pending(&mut self) {
        let jam_gap = self.params.idm.s0;
        let v0 = self.params.idm.v0;
        for lane in LaneId::all() {
            let idx = lane.flat_index();
            while let Some(front) = self.pending[idx].front() {
                let blocked = self.lanes[idx]
                    .first()
                    .is_some_and(|v| v.pos - v.length < jam_gap);
                if blocked {
                    break;
                }
                let movement = front.movement;
                self.pending[idx].pop_front();
                let id = self.next_id;
                self.next_id += 1;
                self.lanes[idx].insert(
                    0,
                    Vehicle {
                        id,
                        lane,
                        movement,
                        pos: 0.0,
                        speed: v0,
                        accel: 0.0,
                        length: self.params.idm.vehicle_length,
                        waiting_time: 0.0,
                        spawn_time: self.time,
                        crossed_at: None,
                    },
                );
                self.counters.entered += 1;
            }
        }
    }

    /// True when no green-phase vehicle is within the yield horizon of the
    /// stop line and nobody is traversing the conflict zone, so a right turn
    /// on red may proceed.
    fn right_turn_zone_clear(&self, lights: &LightMap) -> bool {
        let stop_line = self.params.lane_length;
        for lane in LaneId::all() {
            let green = lights.get(lane) == Light::Green;
            for v in &self.lanes[lane.flat_index()] {
                if v.has_crossed() {
                    return false;
                }
                if green && v.speed > STOP_SPEED {
                    let eta = (stop_line - v.pos) / v.speed;
                    if eta <= RIGHT_TURN_YIELD_HORIZON {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn integrate(&mut self, lights: &LightMap, right_turn_clear: bool) {
        let stop_line = self.params.lane_length;
        let idm = self.params.idm;
        let new_time = self.time + DT;
        for lane in LaneId::all() {
            let light = lights.get(lane);
            let idx = lane.flat_index();
            let n = self.lanes[idx].len();
            let mut updates = Vec::with_capacity(n);
            for i in 0..n {
                let v = &self.lanes[idx][i];
                let leader = self.lanes[idx].get(i + 1);
                let mut accel = match leader {
                    Some(l) => {
                        let gap = l.pos - l.length - v.pos;
                        idm_acceleration(v.speed, Some(LeaderGap { gap, speed: l.speed }), &idm)
                    }
                    None => idm_acceleration(v.speed, None, &idm),
                };

                // Red or yellow puts a standing virtual leader at the stop
                // line unless the vehicle already crossed or is a permitted
                // right turn on red.
                let held_at_line = !v.has_crossed()
                    && light != Light::Green
                    && !(v.movement == Movement::Right && right_turn_clear);
                if held_at_line {
                    let gap = stop_line + idm.s0 - v.pos;
                    accel = accel
                        .min(idm_acceleration(v.speed, Some(LeaderGap { gap, speed: 0.0 }), &idm));
                }

                let mut new_speed = (v.speed + accel * DT).max(0.0);
                if let Some(l) = leader {
                    // Hard cap against the leader's pre-step position: the
                    // 1 s integrator must never produce an overlap.
                    let cap = ((l.pos - l.length - v.pos - HARD_GAP) / DT).max(0.0);
                    new_speed = new_speed.min(cap);
                }
                let mut new_pos = v.pos + new_speed * DT;
                if held_at_line && new_pos > stop_line {
                    new_pos = stop_line;
                    new_speed = (new_pos - v.pos) / DT;
                }
                updates.push((new_pos, new_speed));
            }
            for (v, (new_pos, new_speed)) in self.lanes[idx].iter_mut().zip(updates) {
                v.accel = (new_speed - v.speed) / DT;
                v.speed = new_speed;
                if !v.has_crossed() && new_pos > stop_line {
                    v.crossed_at = Some(new_time);
                }
                v.pos = new_pos;
                if new_speed < STOP_SPEED {
                    v.waiting_time += DT;
                }
            }
        }
    }

    fn remove_cleared(&mut self, new_time: f64) {
        let clearance = self.params.clearance_time;
        for lane_vec in &mut self.lanes {
            let mut i = 0;
            while i < lane_vec.len() {
                let done = lane_vec[i]
                    .crossed_at
                    .is_some_and(|at| new_time - at >= clearance);
                if done {
                    let v = lane_vec.remove(i);
                    self.counters.exited += 1;
                    self.banked_waiting += v.waiting_time;
                } else {
                    i += 1;
                }
            }
        }
    }

    fn check_ordering(&self) -> Result<(), SimError> {
        for lane in LaneId::all() {
            let vehicles = &self.lanes[lane.flat_index()];
            for pair in vehicles.windows(2) {
                if pair[0].pos >= pair[1].pos - pair[1].length {
                    return Err(SimError::Collision {
                        time: self.time,
                        lane,
                        follower: pair[0].id,
                        leader: pair[1].id,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Episode-cumulative waiting time read from a snapshot.
pub fn cumulative_waiting(snapshot: &TrafficSnapshot) -> f64 {
    let present: f64 = snapshot.vehicles().map(|v| v.waiting_time).sum();
    snapshot.banked_waiting + present
}
