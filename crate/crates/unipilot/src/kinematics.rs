//! Unicycle kinematics: acceleration clamping and discrete time integration.
//!
//! The robot is a unicycle driven by a signed forward velocity `nu` and a
//! steering rate `omega`. Commands are normalized accelerations in
//! `[-1, 1]²`; [`clamp_targets`] turns them into feasible velocity targets
//! and [`integrate`] advances the pose with a forward-Euler step.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Pose and velocities of the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// Position, meters.
    pub x: f64,
    /// Position, meters.
    pub y: f64,
    /// Heading, radians in `(-pi, pi]`.
    pub theta: f64,
    /// Signed linear velocity, m/s.
    pub nu: f64,
    /// Signed angular rate, rad/s.
    pub omega: f64,
}

impl RobotState {
    /// Builds a state with the heading normalized to `(-pi, pi]`.
    pub fn new(x: f64, y: f64, theta: f64, nu: f64, omega: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            nu,
            omega,
        }
    }
}

/// Kinodynamic limits and the integration step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    /// Max linear acceleration, m/s².
    pub a_max_linear: f64,
    /// Max angular acceleration, rad/s².
    pub a_max_angular: f64,
    /// Max lateral (centrifugal) acceleration `|nu * omega|`, m/s².
    pub a_max_lateral: f64,
    /// Max linear speed, m/s.
    pub nu_max: f64,
    /// Max angular rate, rad/s.
    pub omega_max: f64,
    /// Integration step, seconds.
    pub dt: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            a_max_linear: 2.2,
            a_max_angular: 2.0,
            a_max_lateral: 1.0,
            nu_max: 4.0,
            omega_max: 4.5,
            dt: 0.1,
        }
    }
}

impl Limits {
    /// All fields must be strictly positive.
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("a_max_linear", self.a_max_linear),
            ("a_max_angular", self.a_max_angular),
            ("a_max_lateral", self.a_max_lateral),
            ("nu_max", self.nu_max),
            ("omega_max", self.omega_max),
            ("dt", self.dt),
        ];
        for (name, value) in fields {
            if !(value > 0.0) || !value.is_finite() {
                return Err(format!("limits.{name} must be strictly positive, got {value}"));
            }
        }
        Ok(())
    }
}

/// Normalized command: linear and angular acceleration demand in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub u_lin: f64,
    pub u_ang: f64,
}

impl Action {
    /// Builds an action with both components clipped to `[-1, 1]`.
    pub fn clipped(u_lin: f64, u_ang: f64) -> Self {
        Self {
            u_lin: u_lin.clamp(-1.0, 1.0),
            u_ang: u_ang.clamp(-1.0, 1.0),
        }
    }
}

/// Normalizes an angle to `(-pi, pi]`. Idempotent and 2π-periodic.
pub fn wrap_angle(a: f64) -> f64 {
    debug_assert!(a.is_finite(), "wrap_angle: non-finite input {a}");
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Turns a normalized command into feasible velocity targets.
///
/// The linear and angular targets are rate-limited by the acceleration
/// bounds and clipped to the velocity boxes. If the pair would exceed the
/// lateral limit `|nu * omega| <= a_max_lateral`, the angular target is
/// rescaled toward zero (the linear target is preserved).
pub fn clamp_targets(state: &RobotState, action: Action, limits: &Limits) -> (f64, f64) {
    let u_lin = action.u_lin.clamp(-1.0, 1.0);
    let u_ang = action.u_ang.clamp(-1.0, 1.0);
    let nu_target = (state.nu + u_lin * limits.a_max_linear * limits.dt)
        .clamp(-limits.nu_max, limits.nu_max);
    let mut omega_target = (state.omega + u_ang * limits.a_max_angular * limits.dt)
        .clamp(-limits.omega_max, limits.omega_max);
    if (nu_target * omega_target).abs() > limits.a_max_lateral {
        omega_target = omega_target.signum() * limits.a_max_lateral / nu_target.abs();
    }
    (nu_target, omega_target)
}

/// Forward-Euler step of the unicycle model with already-clamped targets.
pub fn integrate(state: &RobotState, nu_target: f64, omega_target: f64, dt: f64) -> RobotState {
    RobotState {
        x: state.x + nu_target * state.theta.cos() * dt,
        y: state.y + nu_target * state.theta.sin() * dt,
        theta: wrap_angle(state.theta + omega_target * dt),
        nu: nu_target,
        omega: omega_target,
    }
}

/// One dynamics step: clamp the command, then integrate.
pub fn step_dynamics(state: &RobotState, action: Action, limits: &Limits) -> RobotState {
    let (nu_target, omega_target) = clamp_targets(state, action, limits);
    integrate(state, nu_target, omega_target, limits.dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const LIM: Limits = Limits {
        a_max_linear: 2.2,
        a_max_angular: 2.0,
        a_max_lateral: 1.0,
        nu_max: 4.0,
        omega_max: 4.5,
        dt: 0.1,
    };

    fn at_rest() -> RobotState {
        RobotState::new(0.0, 0.0, 0.0, 0.0, 0.0)
    }

    #[test]
    fn wrap_angle_basics() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, max_relative = 1e-12);
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(PI), PI);
    }

    #[test]
    fn clamp_full_throttle_from_rest() {
        let state = at_rest();
        let (nu_t, omega_t) = clamp_targets(&state, Action { u_lin: 1.0, u_ang: 0.0 }, &LIM);
        assert_relative_eq!(nu_t, 0.22, max_relative = 1e-12);
        assert_eq!(omega_t, 0.0);
    }

    #[test]
    fn clamp_zero_action_at_rest() {
        let (nu_t, omega_t) = clamp_targets(&at_rest(), Action { u_lin: 0.0, u_ang: 0.0 }, &LIM);
        assert_eq!((nu_t, omega_t), (0.0, 0.0));
    }

    #[test]
    fn clamp_steering_at_top_speed_stays_below_lateral() {
        let state = RobotState::new(0.0, 0.0, 0.0, 4.0, 0.0);
        let (nu_t, omega_t) = clamp_targets(&state, Action { u_lin: 0.0, u_ang: 1.0 }, &LIM);
        assert_eq!(nu_t, 4.0);
        // accel-limited to 0.2 rad/s; lateral |4.0 * 0.2| = 0.8 needs no rescale
        assert_relative_eq!(omega_t, 0.2, max_relative = 1e-12);
    }

    #[test]
    fn clamp_rescales_omega_when_lateral_binds() {
        let state = RobotState::new(0.0, 0.0, 0.0, 4.0, 0.25);
        let (nu_t, omega_t) = clamp_targets(&state, Action { u_lin: 0.0, u_ang: 1.0 }, &LIM);
        assert_eq!(nu_t, 4.0);
        // 0.25 + 0.2 = 0.45 would give |4 * 0.45| = 1.8 > 1; rescaled to 1/4
        assert_relative_eq!(omega_t, 0.25, max_relative = 1e-12);
        assert!((nu_t * omega_t).abs() <= LIM.a_max_lateral + 1e-12);
    }

    #[test]
    fn integrate_straight_line() {
        let s = integrate(&at_rest(), 1.0, 0.0, 0.1);
        assert_relative_eq!(s.x, 0.1, max_relative = 1e-12);
        assert_eq!(s.y, 0.0);
        assert_eq!(s.theta, 0.0);
    }

    #[test]
    fn integrate_in_place_rotation() {
        let s = integrate(&at_rest(), 0.0, 1.0, 0.1);
        assert_eq!((s.x, s.y), (0.0, 0.0));
        assert_relative_eq!(s.theta, 0.1, max_relative = 1e-12);
    }

    #[test]
    fn integrate_heading_north() {
        let start = RobotState::new(0.0, 0.0, PI / 2.0, 0.0, 0.0);
        let s = integrate(&start, 2.0, 0.0, 0.1);
        assert_relative_eq!(s.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(s.y, 0.2, max_relative = 1e-12);
        assert_eq!(s.theta, PI / 2.0);
    }

    #[test]
    fn step_zero_action_at_rest_is_identity() {
        let state = RobotState::new(1.5, -2.0, 0.7, 0.0, 0.0);
        let s = step_dynamics(&state, Action { u_lin: 0.0, u_ang: 0.0 }, &LIM);
        assert_eq!(s, state);
    }

    #[test]
    fn step_full_throttle_advance() {
        for theta in [0.0, 0.9, -2.3] {
            let state = RobotState::new(0.0, 0.0, theta, 0.0, 0.0);
            let s = step_dynamics(&state, Action { u_lin: 1.0, u_ang: 0.0 }, &LIM);
            assert_relative_eq!(s.x, 0.022 * theta.cos(), max_relative = 1e-12);
            assert_relative_eq!(s.y, 0.022 * theta.sin(), max_relative = 1e-12);
        }
    }

    #[test]
    fn step_is_deterministic() {
        let state = RobotState::new(0.3, -1.1, 2.2, 1.7, -0.4);
        let action = Action { u_lin: 0.37, u_ang: -0.81 };
        let a = step_dynamics(&state, action, &LIM);
        let b = step_dynamics(&state, action, &LIM);
        assert_eq!(a, b);
    }

    /// Re-derives the clamp bounds and checks a produced state against them.
    /// Shared with the acceptance suite's larger sweep.
    pub(crate) fn assert_constraints(prev: &RobotState, next: &RobotState, limits: &Limits) {
        let tol = 1e-9;
        assert!(next.nu.abs() <= limits.nu_max + tol, "nu {} out of box", next.nu);
        assert!(next.omega.abs() <= limits.omega_max + tol, "omega {} out of box", next.omega);
        assert!(
            (next.nu * next.omega).abs() <= limits.a_max_lateral + tol,
            "lateral {} exceeds bound",
            (next.nu * next.omega).abs()
        );
        assert!(
            (next.nu - prev.nu).abs() <= limits.a_max_linear * limits.dt + tol,
            "linear accel violated"
        );
        // The lateral rescale may shrink omega beyond the accel-limited change;
        // it never grows the change past the accel bound plus that reduction.
        let omega_pre = (prev.omega
            + (next.omega - prev.omega).signum() * limits.a_max_angular * limits.dt)
            .clamp(-limits.omega_max, limits.omega_max);
        let rescale_slack = (omega_pre.abs() - next.omega.abs()).max(0.0);
        assert!(
            (next.omega - prev.omega).abs() <= limits.a_max_angular * limits.dt + rescale_slack + tol,
            "angular accel violated beyond rescale slack: prev {} next {}",
            prev.omega,
            next.omega
        );
    }

    proptest! {
        #[test]
        fn wrap_angle_idempotent_and_in_range(a in -50.0f64..50.0) {
            let w = wrap_angle(a);
            prop_assert!(w > -PI && w <= PI);
            prop_assert_eq!(wrap_angle(w), w);
        }

        #[test]
        fn wrap_angle_periodic(a in -6.0f64..6.0, k in -4i32..=4) {
            let w = wrap_angle(a + TAU * k as f64);
            prop_assert!((w - wrap_angle(a)).abs() < 1e-9);
        }

        #[test]
        fn step_preserves_constraints(
            x in -10.0f64..10.0,
            y in -10.0f64..10.0,
            theta in -4.0f64..4.0,
            nu in -4.0f64..4.0,
            omega in -4.5f64..4.5,
            u_lin in -1.5f64..1.5,
            u_ang in -1.5f64..1.5,
        ) {
            let state = RobotState::new(x, y, theta, nu, omega);
            let next = step_dynamics(&state, Action::clipped(u_lin, u_ang), &LIM);
            assert_constraints(&state, &next, &LIM);
        }
    }
}
