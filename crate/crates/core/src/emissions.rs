//! Power-based CO2 model: wheel power components, gearbox efficiency and a
//! characteristic emission-over-power curve.
//!
//! Wheel power may be negative under braking; the engine then supplies no
//! tractive power and the vehicle emits at the idle rate, so stopped or
//! coasting vehicles still contribute. The curve maps engine power (kW) to
//! an emission rate (g/h), linear between breakpoints and clamped above the
//! last one.

use crate::sim::TrafficSnapshot;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmissionError {
    #[error("CEP curve needs at least one breakpoint")]
    EmptyCurve,
    #[error("CEP breakpoint powers must start at 0 and strictly increase (point {index})")]
    NonMonotonicPower { index: usize },
    #[error("CEP rates must be non-negative and non-decreasing (point {index})")]
    NonMonotonicRate { index: usize },
}

/// Vehicle and environment parameters of the power model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmissionParams {
    pub vehicle_mass_kg: f64,
    pub load_mass_kg: f64,
    /// Rotational-inertia surrogate mass entering only the acceleration term.
    pub rotating_mass_kg: f64,
    pub rolling_coeff: f64,
    pub air_density_kg_m3: f64,
    pub drag_coeff: f64,
    pub frontal_area_m2: f64,
    /// Road gradient as a dimensionless slope.
    pub gradient: f64,
    pub gearbox_efficiency: f64,
    pub gravity_mps2: f64,
}

impl Default for EmissionParams {
    fn default() -> Self {
        EmissionParams {
            vehicle_mass_kg: 1500.0,
            load_mass_kg: 0.0,
            rotating_mass_kg: 0.0,
            rolling_coeff: 0.012,
            air_density_kg_m3: 1.2,
            drag_coeff: 0.35,
            frontal_area_m2: 2.2,
            gradient: 0.0,
            gearbox_efficiency: 0.9,
            gravity_mps2: 9.81,
        }
    }
}

/// Emission-over-power curve: (engine power kW, CO2 rate g/h) breakpoints.
/// The first breakpoint sits at 0 kW and carries the idle rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct CepCurve {
    points: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for CepCurve {
    type Error = EmissionError;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        CepCurve::new(points)
    }
}

impl From<CepCurve> for Vec<(f64, f64)> {
    fn from(curve: CepCurve) -> Self {
        curve.points
    }
}

impl CepCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, EmissionError> {
        if points.is_empty() {
            return Err(EmissionError::EmptyCurve);
        }
        if points[0].0 != 0.0 {
            return Err(EmissionError::NonMonotonicPower { index: 0 });
        }
        for i in 1..points.len() {
            if points[i].0 <= points[i - 1].0 {
                return Err(EmissionError::NonMonotonicPower { index: i });
            }
        }
        for i in 0..points.len() {
            if points[i].1 < 0.0 || (i > 0 && points[i].1 < points[i - 1].1) {
                return Err(EmissionError::NonMonotonicRate { index: i });
            }
        }
        Ok(CepCurve { points })
    }

    /// Order-of-magnitude passenger-car defaults. The curve is a scenario
    /// input; comparisons across controllers only use relative changes.
    pub fn default_passenger_car() -> Self {
        CepCurve::new(vec![
            (0.0, 1080.0),
            (5.0, 3600.0),
            (20.0, 9000.0),
            (50.0, 18000.0),
            (80.0, 27000.0),
        ])
        .expect("default curve is valid")
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn idle_rate_g_h(&self) -> f64 {
        self.points[0].1
    }

    /// Piecewise-linear rate lookup, g/h, clamped at the last breakpoint.
    pub fn rate_g_h(&self, engine_kw: f64) -> f64 {
        let pts = &self.points;
        if engine_kw <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let ((p0, r0), (p1, r1)) = (w[0], w[1]);
            if engine_kw <= p1 {
                let f = (engine_kw - p0) / (p1 - p0);
                return r0 + f * (r1 - r0);
            }
        }
        pts[pts.len() - 1].1
    }
}

/// Total wheel power demand in watts: rolling + air + acceleration + grade.
/// Negative while braking harder than the resistive losses.
pub fn wheel_power(speed: f64, accel: f64, p: &EmissionParams) -> f64 {
    let m = p.vehicle_mass_kg + p.load_mass_kg;
    let p_roll = m * p.gravity_mps2 * p.rolling_coeff * speed;
    let p_air = 0.5 * p.air_density_kg_m3 * p.drag_coeff * p.frontal_area_m2 * speed.powi(3);
    let p_accel = (m + p.rotating_mass_kg) * accel * speed;
    let p_grad = m * p.gravity_mps2 * p.gradient * speed;
    p_roll + p_air + p_accel + p_grad
}

/// Engine power in watts: the engine supplies the wheels through the gearbox
/// (wheel/eta), never less than zero — braking leaves the engine at idle.
pub fn engine_power(wheel_w: f64, gearbox_efficiency: f64) -> f64 {
    debug_assert!(gearbox_efficiency > 0.0 && gearbox_efficiency <= 1.0);
    if wheel_w > 0.0 {
        wheel_w / gearbox_efficiency
    } else {
        0.0
    }
}

/// CO2 rate in g/s for an engine power in watts.
pub fn co2_rate(engine_w: f64, curve: &CepCurve) -> f64 {
    curve.rate_g_h(engine_w / 1000.0) / 3600.0
}

/// Per-vehicle emission rate from its current kinematic state, g/s.
pub fn vehicle_co2_rate(speed: f64, accel: f64, p: &EmissionParams, curve: &CepCurve) -> f64 {
    co2_rate(engine_power(wheel_power(speed, accel, p), p.gearbox_efficiency), curve)
}

/// Episode-cumulative CO2 in grams plus the per-step rate history.
#[derive(Clone, Debug, Default)]
pub struct EmissionLedger {
    total_g: f64,
    history: Vec<f64>,
}

impl EmissionLedger {
    pub fn new() -> Self {
        EmissionLedger::default()
    }

    pub fn total_g(&self) -> f64 {
        self.total_g
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    /// Adds one step's emissions over all present vehicles.
    pub fn record_step(
        &mut self,
        snapshot: &TrafficSnapshot,
        params: &EmissionParams,
        curve: &CepCurve,
        dt: f64,
    ) -> f64 {
        let mut step_g = 0.0;
        for v in snapshot.vehicles() {
            step_g += vehicle_co2_rate(v.speed, v.accel, params, curve) * dt;
        }
        self.total_g += step_g;
        self.history.push(step_g);
        step_g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_speed_zero_power() {
        let p = EmissionParams::default();
        assert_eq!(wheel_power(0.0, 3.0, &p), 0.0);
    }

    #[test]
    fn wheel_power_component_sum() {
        // Hand evaluation: P_Roll = 1500*9.81*0.012*10 = 1765.8 W,
        // P_Air = 0.5*1.2*0.35*2.2*1000 = 462.0 W, others zero.
        let p = EmissionParams::default();
        assert_abs_diff_eq!(wheel_power(10.0, 0.0, &p), 2227.8, epsilon = 1e-9);
    }

    #[test]
    fn braking_power_goes_negative() {
        // P_Accel = 1500*(-2)*10 = -30000 W on top of 2227.8 W losses.
        let p = EmissionParams::default();
        assert_abs_diff_eq!(wheel_power(10.0, -2.0, &p), -27772.2, epsilon = 1e-9);
    }

    #[test]
    fn engine_power_divides_by_efficiency() {
        assert_abs_diff_eq!(engine_power(2227.8, 0.9), 2227.8 / 0.9, epsilon = 1e-9);
        assert_eq!(engine_power(-5000.0, 0.9), 0.0);
        let x = 1234.5;
        assert_eq!(engine_power(x, 1.0), x);
    }

    #[test]
    fn idle_rate_at_zero_engine_power() {
        let curve = CepCurve::default_passenger_car();
        assert_abs_diff_eq!(co2_rate(0.0, &curve), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn breakpoint_and_midpoint_interpolation() {
        let curve = CepCurve::default_passenger_car();
        assert_abs_diff_eq!(curve.rate_g_h(20.0), 9000.0, epsilon = 1e-12);
        // Midway between 20 kW and 50 kW: mean of the two rates.
        assert_abs_diff_eq!(curve.rate_g_h(35.0), 13500.0, epsilon = 1e-12);
        // Clamped above the last breakpoint.
        assert_abs_diff_eq!(curve.rate_g_h(200.0), 27000.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_curves_are_rejected() {
        assert!(CepCurve::new(vec![]).is_err());
        assert!(CepCurve::new(vec![(1.0, 100.0)]).is_err());
        assert!(CepCurve::new(vec![(0.0, 100.0), (0.0, 200.0)]).is_err());
        assert!(CepCurve::new(vec![(0.0, 300.0), (5.0, 200.0)]).is_err());
    }

    #[test]
    fn idling_vehicle_accumulates_idle_emissions() {
        use crate::sim::{
            Approach, DemandProfile, LaneId, LightMap, Movement, MovementSplit, SimParams,
            Simulation,
        };
        let demand = DemandProfile::uniform(
            0.0,
            MovementSplit { left: 1.0, through: 0.0, right: 0.0 },
        );
        let mut sim = Simulation::new(SimParams::default(), demand, 1);
        sim.add_vehicle(LaneId::new(Approach::West, 1), Movement::Through, 500.0, 0.0);
        let params = EmissionParams::default();
        let curve = CepCurve::default_passenger_car();
        let mut ledger = EmissionLedger::new();
        for _ in 0..10 {
            sim.advance(&LightMap::all_red()).unwrap();
            ledger.record_step(&sim.snapshot(), &params, &curve, 1.0);
        }
        assert_abs_diff_eq!(ledger.total_g(), 3.0, epsilon = 1e-9);
    }

    #[test]
    fn empty_snapshot_leaves_total_unchanged() {
        use crate::sim::{DemandProfile, LightMap, MovementSplit, SimParams, Simulation};
        let demand = DemandProfile::uniform(
            0.0,
            MovementSplit { left: 1.0, through: 0.0, right: 0.0 },
        );
        let mut sim = Simulation::new(SimParams::default(), demand, 1);
        sim.advance(&LightMap::all_red()).unwrap();
        let mut ledger = EmissionLedger::new();
        ledger.record_step(
            &sim.snapshot(),
            &EmissionParams::default(),
            &CepCurve::default_passenger_car(),
            1.0,
        );
        assert_eq!(ledger.total_g(), 0.0);
    }

    #[test]
    fn rate_monotone_in_acceleration_while_tractive() {
        let p = EmissionParams::default();
        let curve = CepCurve::default_passenger_car();
        let v = 8.0;
        let mut last = vehicle_co2_rate(v, 0.0, &p, &curve);
        for a in [0.3, 0.8, 1.4, 2.0] {
            let rate = vehicle_co2_rate(v, a, &p, &curve);
            assert!(rate > last, "rate must grow with acceleration demand");
            last = rate;
        }
    }
}
