//! Goal-conditioned environment: task sampling, observations, reward,
//! termination and episode bookkeeping on top of the kinematics.

use crate::error::Error;
use crate::kinematics::{step_dynamics, wrap_angle, Action, Limits, RobotState};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

/// Target state: position, final orientation and a non-negative final speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalState {
    pub x: f64,
    pub y: f64,
    /// Goal heading, radians in `(-pi, pi]`.
    pub theta_f: f64,
    /// Goal speed, m/s, in `[0, nu_max]`.
    pub nu_f: f64,
}

impl GoalState {
    pub fn new(x: f64, y: f64, theta_f: f64, nu_f: f64) -> Self {
        Self { x, y, theta_f: wrap_angle(theta_f), nu_f }
    }
}

/// What the agent sees each step, in the order the networks consume it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Distance to the goal position, m.
    pub distance: f64,
    /// Bearing of the goal in the robot frame, rad in `(-pi, pi]`.
    pub bearing: f64,
    /// Speed residual `nu_f - |nu|`, m/s.
    pub d_nu: f64,
    /// Orientation residual after the forward/backward relaxation, rad.
    pub d_theta: f64,
    /// Current signed velocity, m/s.
    pub nu: f64,
    /// Current angular rate, rad/s.
    pub phi: f64,
}

impl Observation {
    /// Canonical network input order.
    pub fn as_array(&self) -> [f64; 6] {
        [self.distance, self.bearing, self.d_nu, self.d_theta, self.nu, self.phi]
    }
}

/// Which residuals count toward the goal error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemVariant {
    /// Position only.
    #[serde(rename = "2d")]
    P2d,
    /// Position and orientation.
    #[serde(rename = "3da")]
    P3da,
    /// Position and velocity.
    #[serde(rename = "3db")]
    P3db,
    /// Position, orientation and velocity.
    #[serde(rename = "4d")]
    P4d,
}

impl ProblemVariant {
    pub const ALL: [ProblemVariant; 4] = [Self::P2d, Self::P3da, Self::P3db, Self::P4d];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::P2d => "2d",
            Self::P3da => "3da",
            Self::P3db => "3db",
            Self::P4d => "4d",
        }
    }
}

impl fmt::Display for ProblemVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProblemVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "2d" => Ok(Self::P2d),
            "3da" => Ok(Self::P3da),
            "3db" => Ok(Self::P3db),
            "4d" => Ok(Self::P4d),
            other => Err(format!("unknown variant '{other}' (expected 2d, 3da, 3db or 4d)")),
        }
    }
}

/// Episode parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    /// Success threshold on the goal error.
    pub eps_success: f64,
    /// Step budget per episode.
    pub max_steps: u32,
    /// Fixed bonus added to the immediate reward on the success step.
    pub terminal_bonus: f64,
    pub variant: ProblemVariant,
    pub limits: Limits,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            eps_success: 0.5,
            max_steps: 200,
            terminal_bonus: 100.0,
            variant: ProblemVariant::P4d,
            limits: Limits::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.eps_success > 0.0) {
            return Err(format!("episode.eps_success must be > 0, got {}", self.eps_success));
        }
        if self.max_steps < 1 {
            return Err("episode.max_steps must be >= 1".into());
        }
        self.limits.validate()
    }
}

/// Absolute per-dimension residual magnitudes at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorComponents {
    /// Distance to the goal position, m.
    pub positional: f64,
    /// `|d_theta|`, rad.
    pub angular: f64,
    /// `|d_nu|`, m/s.
    pub velocity: f64,
}

/// Everything the environment reports for a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
    /// Variant-projected goal error.
    pub error: f64,
    pub error_components: ErrorComponents,
}

/// Samples a training/evaluation task.
///
/// The start is at the origin facing +x with a uniform speed in
/// `[0, nu_max]`; the goal lies at a uniform distance in `(0.5, 5.0]` under
/// a uniform bearing, with uniform goal heading and goal speed.
pub fn sample_task(rng: &mut impl Rng, limits: &Limits) -> (RobotState, GoalState) {
    let nu0 = rng.random_range(0.0..=limits.nu_max);
    // flip a [0.5, 5.0) draw to make the interval half-open at the bottom
    let r = 5.5 - rng.random_range(0.5..5.0);
    let bearing = -rng.random_range(-PI..PI);
    let theta_f = -rng.random_range(-PI..PI);
    let nu_f = rng.random_range(0.0..=limits.nu_max);
    (
        RobotState::new(0.0, 0.0, 0.0, nu0, 0.0),
        GoalState::new(r * bearing.cos(), r * bearing.sin(), theta_f, nu_f),
    )
}

/// Builds the observation of `goal` from `state`.
///
/// The goal may be reached forwards or backwards: when `nu < 0` the
/// orientation residual is taken against the reversed heading, and the
/// speed residual always compares against `|nu|`.
pub fn observe(state: &RobotState, goal: &GoalState) -> Observation {
    let dx = goal.x - state.x;
    let dy = goal.y - state.y;
    let heading = if state.nu >= 0.0 { state.theta } else { state.theta + PI };
    Observation {
        distance: dx.hypot(dy),
        bearing: wrap_angle(dy.atan2(dx) - state.theta),
        d_nu: goal.nu_f - state.nu.abs(),
        d_theta: wrap_angle(goal.theta_f - heading),
        nu: state.nu,
        phi: state.omega,
    }
}

/// Euclidean norm of the residuals selected by the variant.
pub fn state_error(state: &RobotState, goal: &GoalState, variant: ProblemVariant) -> f64 {
    error_from(&observe(state, goal), variant)
}

pub(crate) fn error_from(obs: &Observation, variant: ProblemVariant) -> f64 {
    let d = obs.distance;
    let dt = obs.d_theta;
    let dv = obs.d_nu;
    match variant {
        ProblemVariant::P2d => d,
        ProblemVariant::P3da => (d * d + dt * dt).sqrt(),
        ProblemVariant::P3db => (d * d + dv * dv).sqrt(),
        ProblemVariant::P4d => (d * d + dt * dt + dv * dv).sqrt(),
    }
}

/// Immediate reward `1 / (1 + e)`, strictly decreasing in the error.
pub fn reward(e: f64) -> f64 {
    assert!(e >= 0.0, "reward: negative error {e}");
    1.0 / (1.0 + e)
}

/// Goal-conditioned episode state machine.
///
/// A fresh environment must be [`reset`](Environment::reset) before
/// stepping. Stepping a finished episode is a contract violation;
/// [`set_goal`](Environment::set_goal) installs a new goal (and a fresh
/// step budget) without touching the robot state, reopening the episode.
#[derive(Debug, Clone)]
pub struct Environment {
    config: EpisodeConfig,
    state: RobotState,
    goal: GoalState,
    steps_taken: u32,
    done: bool,
    started: bool,
}

impl Environment {
    pub fn new(config: EpisodeConfig) -> Self {
        Self {
            config,
            state: RobotState::new(0.0, 0.0, 0.0, 0.0, 0.0),
            goal: GoalState::new(0.0, 0.0, 0.0, 0.0),
            steps_taken: 0,
            done: true,
            started: false,
        }
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn goal(&self) -> &GoalState {
        &self.goal
    }

    pub fn steps_taken(&self) -> u32 {
        self.steps_taken
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Observation of the current state against the current goal.
    pub fn observation(&self) -> Observation {
        observe(&self.state, &self.goal)
    }

    /// Starts a fresh episode with a sampled task.
    pub fn reset(&mut self, rng: &mut impl Rng) -> Observation {
        let (start, goal) = sample_task(rng, &self.config.limits);
        self.reset_with(start, goal)
    }

    /// Starts a fresh episode from an explicit task.
    pub fn reset_with(&mut self, start: RobotState, goal: GoalState) -> Observation {
        self.state = RobotState::new(start.x, start.y, start.theta, start.nu, start.omega);
        self.goal = goal;
        self.steps_taken = 0;
        self.done = false;
        self.started = true;
        self.observation()
    }

    /// Replaces the goal mid-episode, keeping the robot state. The step
    /// budget restarts for the new goal.
    pub fn set_goal(&mut self, goal: GoalState) {
        assert!(self.started, "set_goal before any reset");
        self.goal = goal;
        self.steps_taken = 0;
        self.done = false;
    }

    /// Applies one action and scores the resulting state.
    pub fn step(&mut self, action: Action) -> StepOutcome {
        assert!(!self.done, "stepping a finished episode");
        self.state = step_dynamics(&self.state, action, &self.config.limits);
        self.steps_taken += 1;
        let obs = observe(&self.state, &self.goal);
        let error = error_from(&obs, self.config.variant);
        let r = reward(error);
        let success = error < self.config.eps_success;
        let done = success || self.steps_taken >= self.config.max_steps;
        self.done = done;
        StepOutcome {
            obs,
            reward: if success { r + self.config.terminal_bonus } else { r },
            done,
            success,
            error,
            error_components: ErrorComponents {
                positional: obs.distance,
                angular: obs.d_theta.abs(),
                velocity: obs.d_nu.abs(),
            },
        }
    }
}

/// Reads a task file: one `x y theta nu omega gx gy theta_f nu_f` record
/// per line, `#` comments and blank lines ignored.
pub fn read_task_file(path: &Path) -> Result<Vec<(RobotState, GoalState)>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut tasks = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::format(path, idx + 1, format!("bad number '{tok}'")))
            })
            .collect::<Result<_, _>>()?;
        if fields.len() != 9 {
            return Err(Error::format(
                path,
                idx + 1,
                format!("expected 9 fields (x y theta nu omega gx gy theta_f nu_f), got {}", fields.len()),
            ));
        }
        tasks.push((
            RobotState::new(fields[0], fields[1], fields[2], fields[3], fields[4]),
            GoalState::new(fields[5], fields[6], fields[7], fields[8]),
        ));
    }
    if tasks.is_empty() {
        return Err(Error::format(path, 0, "no tasks in file".into()));
    }
    Ok(tasks)
}

/// Writes a task file in the format accepted by [`read_task_file`].
pub fn write_task_file(path: &Path, tasks: &[(RobotState, GoalState)]) -> Result<(), Error> {
    let mut out = String::from("# x y theta nu omega  gx gy theta_f nu_f\n");
    for (s, g) in tasks {
        out.push_str(&format!(
            "{} {} {} {} {}  {} {} {} {}\n",
            s.x, s.y, s.theta, s.nu, s.omega, g.x, g.y, g.theta_f, g.nu_f
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
