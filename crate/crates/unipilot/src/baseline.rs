//! Cubic-Hermite reference trajectory with a velocity-ramp timing profile.
//!
//! The spline links the start pose to the goal pose with distance-scaled
//! heading tangents; the ramp accelerates at the full linear limit to the
//! highest reachable speed and brakes to the goal speed as late as
//! possible. The path ignores the angular and lateral constraints on
//! purpose: it is a time baseline, not a feasible plan.

use crate::env::GoalState;
use crate::error::Error;
use crate::kinematics::{Limits, RobotState};

/// Quadrature panels for the arc length (composite Simpson).
const ARC_SAMPLES: usize = 1000;

/// Speed profile `v0 -> v_peak -> vf` at constant acceleration magnitude.
///
/// Degenerates to a single accelerating or braking segment when the
/// distance is too short to bridge the endpoint speeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityRamp {
    pub v0: f64,
    pub v_peak: f64,
    pub vf: f64,
    pub accel: f64,
    t_acc: f64,
    t_cruise: f64,
    t_dec: f64,
}

impl VelocityRamp {
    /// Plans the profile covering `distance` meters.
    pub fn plan(v0: f64, vf: f64, v_max: f64, accel: f64, distance: f64) -> Self {
        assert!(distance > 0.0, "ramp needs a positive distance");
        assert!(accel > 0.0 && v_max > 0.0);
        assert!((0.0..=v_max).contains(&v0), "start speed {v0} outside [0, {v_max}]");
        assert!((0.0..=v_max).contains(&vf), "goal speed {vf} outside [0, {v_max}]");
        let d_acc_full = (v_max * v_max - v0 * v0) / (2.0 * accel);
        let d_dec_full = (v_max * v_max - vf * vf) / (2.0 * accel);
        if d_acc_full + d_dec_full <= distance {
            // trapezoid with a cruise segment at v_max
            return Self {
                v0,
                v_peak: v_max,
                vf,
                accel,
                t_acc: (v_max - v0) / accel,
                t_cruise: (distance - d_acc_full - d_dec_full) / v_max,
                t_dec: (v_max - vf) / accel,
            };
        }
        let peak_sq = accel * distance + (v0 * v0 + vf * vf) / 2.0;
        if peak_sq >= v0.max(vf).powi(2) {
            // triangular profile peaking below v_max
            let v_peak = peak_sq.sqrt();
            return Self {
                v0,
                v_peak,
                vf,
                accel,
                t_acc: (v_peak - v0) / accel,
                t_cruise: 0.0,
                t_dec: (v_peak - vf) / accel,
            };
        }
        // too short to bridge the endpoint speeds: one monotone segment
        if vf >= v0 {
            let v_end = (v0 * v0 + 2.0 * accel * distance).sqrt();
            Self {
                v0,
                v_peak: v_end,
                vf,
                accel,
                t_acc: (v_end - v0) / accel,
                t_cruise: 0.0,
                t_dec: 0.0,
            }
        } else {
            let v_end = (v0 * v0 - 2.0 * accel * distance).max(0.0).sqrt();
            Self {
                v0,
                v_peak: v0,
                vf,
                accel,
                t_acc: 0.0,
                t_cruise: 0.0,
                t_dec: (v0 - v_end) / accel,
            }
        }
    }

    pub fn duration(&self) -> f64 {
        self.t_acc + self.t_cruise + self.t_dec
    }

    /// Speed at time `t`, clamped to the profile's span.
    pub fn speed_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.duration());
        if t < self.t_acc {
            self.v0 + self.accel * t
        } else if t < self.t_acc + self.t_cruise {
            self.v_peak
        } else {
            let td = t - self.t_acc - self.t_cruise;
            self.v_peak - self.accel * td
        }
    }

    /// Distance covered up to time `t`.
    pub fn distance_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.duration());
        let d_acc = |dt: f64| self.v0 * dt + 0.5 * self.accel * dt * dt;
        if t < self.t_acc {
            return d_acc(t);
        }
        let mut d = d_acc(self.t_acc);
        let t = t - self.t_acc;
        if t < self.t_cruise {
            return d + self.v_peak * t;
        }
        d += self.v_peak * self.t_cruise;
        let td = t - self.t_cruise;
        d + self.v_peak * td - 0.5 * self.accel * td * td
    }
}

/// Timed point on the reference path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

/// Cubic Hermite path plus its timing profile.
#[derive(Debug, Clone, PartialEq)]
pub struct SplinePlan {
    /// Endpoint positions.
    pub p0: [f64; 2],
    pub p1: [f64; 2],
    /// Distance-scaled heading tangents.
    pub m0: [f64; 2],
    pub m1: [f64; 2],
    pub arc_length: f64,
    pub duration: f64,
    pub ramp: VelocityRamp,
    /// Path sampled on the ramp's time grid (step `dt`).
    pub waypoints: Vec<Waypoint>,
    /// Cumulative arc length at parameter `k / ARC_SAMPLES` for even `k`.
    cumulative: Vec<f64>,
}

impl SplinePlan {
    /// Position at curve parameter `u` in `[0, 1]`.
    pub fn position(&self, u: f64) -> [f64; 2] {
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        [
            h00 * self.p0[0] + h10 * self.m0[0] + h01 * self.p1[0] + h11 * self.m1[0],
            h00 * self.p0[1] + h10 * self.m0[1] + h01 * self.p1[1] + h11 * self.m1[1],
        ]
    }

    /// Derivative with respect to the curve parameter.
    pub fn velocity(&self, u: f64) -> [f64; 2] {
        let u2 = u * u;
        let h00 = 6.0 * u2 - 6.0 * u;
        let h10 = 3.0 * u2 - 4.0 * u + 1.0;
        let h01 = -6.0 * u2 + 6.0 * u;
        let h11 = 3.0 * u2 - 2.0 * u;
        [
            h00 * self.p0[0] + h10 * self.m0[0] + h01 * self.p1[0] + h11 * self.m1[0],
            h00 * self.p0[1] + h10 * self.m0[1] + h01 * self.p1[1] + h11 * self.m1[1],
        ]
    }

    /// Curve parameter at arc length `s`, by table lookup with linear
    /// interpolation.
    pub fn param_at_arc_length(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.arc_length);
        let idx = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => return i as f64 / (self.cumulative.len() - 1) as f64,
            Err(i) => i,
        };
        if idx == 0 {
            return 0.0;
        }
        let (lo, hi) = (self.cumulative[idx - 1], self.cumulative[idx]);
        let frac = if hi > lo { (s - lo) / (hi - lo) } else { 0.0 };
        (idx as f64 - 1.0 + frac) / (self.cumulative.len() - 1) as f64
    }
}

/// Plans the reference trajectory from `start` to `goal`.
///
/// Tangent magnitudes equal the endpoint distance, which keeps the Hermite
/// well conditioned; the ramp runs from the start speed to the goal speed
/// through the highest speed the distance allows.
pub fn plan_spline(start: &RobotState, goal: &GoalState, limits: &Limits) -> Result<SplinePlan, Error> {
    let d = (goal.x - start.x).hypot(goal.y - start.y);
    if d == 0.0 {
        return Err(Error::Invalid("spline endpoints coincide".into()));
    }
    let mut plan = SplinePlan {
        p0: [start.x, start.y],
        p1: [goal.x, goal.y],
        m0: [d * start.theta.cos(), d * start.theta.sin()],
        m1: [d * goal.theta_f.cos(), d * goal.theta_f.sin()],
        arc_length: 0.0,
        duration: 0.0,
        ramp: VelocityRamp::plan(0.0, 0.0, 1.0, 1.0, 1.0),
        waypoints: Vec::new(),
        cumulative: Vec::new(),
    };

    // composite Simpson on the speed |P'(u)|, accumulated pairwise so the
    // inversion table lands exactly on the total
    let h = 1.0 / ARC_SAMPLES as f64;
    let speeds: Vec<f64> = (0..=ARC_SAMPLES)
        .map(|k| {
            let [vx, vy] = plan.velocity(k as f64 * h);
            vx.hypot(vy)
        })
        .collect();
    let mut cumulative = Vec::with_capacity(ARC_SAMPLES / 2 + 1);
    cumulative.push(0.0);
    let mut total = 0.0;
    for k in (0..ARC_SAMPLES).step_by(2) {
        total += h / 3.0 * (speeds[k] + 4.0 * speeds[k + 1] + speeds[k + 2]);
        cumulative.push(total);
    }
    plan.arc_length = total;
    plan.cumulative = cumulative;

    let start_speed = start.nu.abs().min(limits.nu_max);
    let goal_speed = goal.nu_f.clamp(0.0, limits.nu_max);
    plan.ramp = VelocityRamp::plan(start_speed, goal_speed, limits.nu_max, limits.a_max_linear, total);
    plan.duration = plan.ramp.duration();

    let steps = (plan.duration / limits.dt).ceil() as usize;
    let mut waypoints = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        let t = (j as f64 * limits.dt).min(plan.duration);
        let u = plan.param_at_arc_length(plan.ramp.distance_at(t));
        let [x, y] = plan.position(u);
        waypoints.push(Waypoint { x, y, t });
    }
    plan.waypoints = waypoints;
    Ok(plan)
}

/// Agent time over baseline time for the same task.
pub fn duration_ratio(spline: &SplinePlan, agent_steps: u32, dt: f64) -> f64 {
    assert!(spline.duration > 0.0);
    agent_steps as f64 * dt / spline.duration
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::wrap_angle;
    use approx::assert_relative_eq;

    fn straight_task(d: f64, v0: f64, vf: f64) -> (RobotState, GoalState) {
        (
            RobotState::new(0.0, 0.0, 0.0, v0, 0.0),
            GoalState::new(d, 0.0, 0.0, vf),
        )
    }

    #[test]
    fn aligned_straight_spline_is_a_segment() {
        let limits = Limits::default();
        let (start, goal) = straight_task(7.5, 0.0, 0.0);
        let plan = plan_spline(&start, &goal, &limits).unwrap();
        assert!(
            (plan.arc_length - 7.5).abs() <= 1e-6 * 7.5,
            "arc length {}",
            plan.arc_length
        );
        for wp in &plan.waypoints {
            assert!(wp.y.abs() < 1e-9);
        }
    }

    #[test]
    fn trapezoidal_ramp_matches_closed_form() {
        let limits = Limits::default();
        let (start, goal) = straight_task(10.0, 0.0, 0.0);
        let plan = plan_spline(&start, &goal, &limits).unwrap();
        // accelerate 0 -> 4 and brake 4 -> 0 at 2.2, cruise the rest at 4
        let t_ramp = 4.0 / 2.2;
        let d_ramp = 16.0 / (2.0 * 2.2);
        let expected = 2.0 * t_ramp + (10.0 - 2.0 * d_ramp) / 4.0;
        assert_relative_eq!(plan.duration, expected, max_relative = 1e-6);
        assert_eq!(plan.ramp.v_peak, 4.0);
    }

    #[test]
    fn short_distance_gives_a_triangular_profile() {
        let limits = Limits::default();
        let (start, goal) = straight_task(0.6, 0.0, 0.0);
        let plan = plan_spline(&start, &goal, &limits).unwrap();
        let v_peak = (2.2f64 * 0.6).sqrt();
        assert!(v_peak < limits.nu_max);
        assert_relative_eq!(plan.ramp.v_peak, v_peak, max_relative = 1e-9);
        assert_relative_eq!(plan.duration, 2.0 * v_peak / 2.2, max_relative = 1e-6);
    }

    #[test]
    fn too_short_to_brake_degenerates_to_one_segment() {
        let limits = Limits::default();
        let (start, goal) = straight_task(0.5, 4.0, 0.0);
        let plan = plan_spline(&start, &goal, &limits).unwrap();
        // 0.5 m is far less than the 3.64 m needed to brake from 4 m/s
        let v_end = (16.0f64 - 2.0 * 2.2 * plan.arc_length).sqrt();
        assert_relative_eq!(plan.duration, (4.0 - v_end) / 2.2, max_relative = 1e-6);
    }

    #[test]
    fn ramp_speed_obeys_the_profile_exactly() {
        let ramp = VelocityRamp::plan(1.0, 0.5, 4.0, 2.2, 12.0);
        assert_eq!(ramp.v_peak, 4.0);
        let half_acc = ramp.t_acc / 2.0;
        assert_relative_eq!(ramp.speed_at(half_acc), 1.0 + 2.2 * half_acc, max_relative = 1e-12);
        let half_dec = ramp.duration() - ramp.t_dec / 2.0;
        assert_relative_eq!(
            ramp.speed_at(half_dec),
            4.0 - 2.2 * (ramp.t_dec / 2.0),
            max_relative = 1e-12
        );
        for k in 0..=100 {
            let t = ramp.duration() * k as f64 / 100.0;
            assert!(ramp.speed_at(t) <= 4.0 + 1e-12);
        }
        assert_relative_eq!(ramp.distance_at(ramp.duration()), 12.0, max_relative = 1e-12);
    }

    #[test]
    fn duration_is_monotone_in_arc_length() {
        let mut prev = 0.0;
        for i in 1..40 {
            let ramp = VelocityRamp::plan(1.0, 2.0, 4.0, 2.2, i as f64 * 0.5);
            let d = ramp.duration();
            assert!(d >= prev, "duration shrank at distance {}", i as f64 * 0.5);
            prev = d;
        }
    }

    #[test]
    fn ratio_of_equal_durations_is_one() {
        let limits = Limits::default();
        let (start, goal) = straight_task(5.0, 0.0, 0.0);
        let plan = plan_spline(&start, &goal, &limits).unwrap();
        let steps = (plan.duration / limits.dt).round() as u32;
        let ratio = duration_ratio(&plan, steps, limits.dt);
        assert_relative_eq!(ratio, steps as f64 * limits.dt / plan.duration, max_relative = 1e-12);
    }

    #[test]
    fn coincident_endpoints_are_rejected() {
        let limits = Limits::default();
        let start = RobotState::new(1.0, 2.0, 0.3, 1.0, 0.0);
        let goal = GoalState::new(1.0, 2.0, 0.3, 1.0);
        assert!(plan_spline(&start, &goal, &limits).is_err());
    }

    #[test]
    fn hairpin_spline_may_violate_the_lateral_limit() {
        // fast U-turn: the reference path is deliberately not feasibility
        // checked, so the implied |nu * omega| exceeds the limit somewhere
        let limits = Limits::default();
        let start = RobotState::new(0.0, 0.0, 0.0, 4.0, 0.0);
        let goal = GoalState::new(2.0, 0.5, std::f64::consts::PI, 4.0);
        let plan = plan_spline(&start, &goal, &limits).unwrap();
        let mut worst = 0.0f64;
        for pair in plan.waypoints.windows(3) {
            let h0 = (pair[1].y - pair[0].y).atan2(pair[1].x - pair[0].x);
            let h1 = (pair[2].y - pair[1].y).atan2(pair[2].x - pair[1].x);
            let omega = wrap_angle(h1 - h0) / limits.dt;
            let speed = plan.ramp.speed_at(pair[1].t);
            worst = worst.max((speed * omega).abs());
        }
        assert!(
            worst > limits.a_max_lateral,
            "expected an infeasible reference, worst lateral {worst}"
        );
    }
}
