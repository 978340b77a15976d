//! Batch evaluation, training-curve extraction and the multi-goal
//! composite scenario.

use crate::agent::{csv_error, ActionMode, DdpgAgent, TrainingLog};
use crate::baseline::{duration_ratio, plan_spline};
use crate::env::{Environment, EpisodeConfig, GoalState, Observation, ProblemVariant};
use crate::error::Error;
use crate::kinematics::{wrap_angle, Action, RobotState};
use crate::net::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// Anything that can steer the robot from observations.
pub trait Policy {
    fn act(&mut self, obs: &Observation) -> Action;
}

impl<T: Scalar> Policy for DdpgAgent<T> {
    fn act(&mut self, obs: &Observation) -> Action {
        self.select_action(obs, ActionMode::Test)
    }
}

/// Outcome of a single evaluation episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeDetail {
    pub episode: u32,
    pub steps: u32,
    pub success: bool,
    pub positional_m: f64,
    pub angular_deg: f64,
    pub velocity_ms: f64,
    /// Agent time over baseline time; present only on success.
    pub duration_ratio: Option<f64>,
}

/// Mean and median of the per-dimension final errors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DimStats {
    pub positional_mean: f64,
    pub positional_median: f64,
    pub angular_mean_deg: f64,
    pub angular_median_deg: f64,
    pub velocity_mean: f64,
    pub velocity_median: f64,
}

/// Aggregated evaluation outcome for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub variant: ProblemVariant,
    pub episodes: usize,
    pub success_rate: f64,
    /// Over all episodes.
    pub all: DimStats,
    /// Over successful episodes only (absent when none succeeded).
    pub successful: Option<DimStats>,
    pub duration_ratio_mean: Option<f64>,
    pub duration_ratio_std: Option<f64>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn dim_stats(details: &[EpisodeDetail]) -> DimStats {
    let pos: Vec<f64> = details.iter().map(|d| d.positional_m).collect();
    let ang: Vec<f64> = details.iter().map(|d| d.angular_deg).collect();
    let vel: Vec<f64> = details.iter().map(|d| d.velocity_ms).collect();
    DimStats {
        positional_mean: mean(&pos),
        positional_median: median(&pos),
        angular_mean_deg: mean(&ang),
        angular_median_deg: median(&ang),
        velocity_mean: mean(&vel),
        velocity_median: median(&vel),
    }
}

/// Runs `policy` greedily on explicit tasks and aggregates the results.
pub fn evaluate_tasks(
    policy: &mut impl Policy,
    config: &EpisodeConfig,
    tasks: &[(RobotState, GoalState)],
) -> (EvalReport, Vec<EpisodeDetail>) {
    assert!(!tasks.is_empty(), "evaluation needs at least one task");
    let mut env = Environment::new(*config);
    let mut details = Vec::with_capacity(tasks.len());
    for (i, (start, goal)) in tasks.iter().enumerate() {
        let mut obs = env.reset_with(*start, *goal);
        let outcome = loop {
            let action = policy.act(&obs);
            let out = env.step(action);
            obs = out.obs;
            if out.done {
                break out;
            }
        };
        let ratio = if outcome.success {
            plan_spline(start, goal, &config.limits)
                .ok()
                .map(|plan| duration_ratio(&plan, env.steps_taken(), config.limits.dt))
        } else {
            None
        };
        details.push(EpisodeDetail {
            episode: i as u32,
            steps: env.steps_taken(),
            success: outcome.success,
            positional_m: outcome.error_components.positional,
            angular_deg: outcome.error_components.angular.to_degrees(),
            velocity_ms: outcome.error_components.velocity,
            duration_ratio: ratio,
        });
    }

    let succeeded: Vec<EpisodeDetail> = details.iter().copied().filter(|d| d.success).collect();
    let ratios: Vec<f64> = succeeded.iter().filter_map(|d| d.duration_ratio).collect();
    let (ratio_mean, ratio_std) = if ratios.is_empty() {
        (None, None)
    } else {
        let m = mean(&ratios);
        let var = ratios.iter().map(|r| (r - m).powi(2)).sum::<f64>() / ratios.len() as f64;
        (Some(m), Some(var.sqrt()))
    };
    let report = EvalReport {
        variant: config.variant,
        episodes: details.len(),
        success_rate: succeeded.len() as f64 / details.len() as f64,
        all: dim_stats(&details),
        successful: if succeeded.is_empty() { None } else { Some(dim_stats(&succeeded)) },
        duration_ratio_mean: ratio_mean,
        duration_ratio_std: ratio_std,
    };
    (report, details)
}

/// Samples `episodes` fresh tasks and evaluates on them.
pub fn evaluate(
    policy: &mut impl Policy,
    config: &EpisodeConfig,
    episodes: usize,
    rng: &mut impl Rng,
) -> (EvalReport, Vec<EpisodeDetail>) {
    let tasks: Vec<_> = (0..episodes)
        .map(|_| crate::env::sample_task(rng, &config.limits))
        .collect();
    evaluate_tasks(policy, config, &tasks)
}

impl EvalReport {
    pub fn write_csv(&self, path: &Path) -> Result<(), Error> {
        let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut text = String::from(
            "variant,episodes,success_rate,\
             positional_mean_m,positional_median_m,angular_mean_deg,angular_median_deg,\
             velocity_mean_ms,velocity_median_ms,\
             positional_mean_m_success,angular_mean_deg_success,velocity_mean_ms_success,\
             duration_ratio_mean,duration_ratio_std\n",
        );
        let s = self.successful.as_ref();
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            self.variant,
            self.episodes,
            self.success_rate,
            self.all.positional_mean,
            self.all.positional_median,
            self.all.angular_mean_deg,
            self.all.angular_median_deg,
            self.all.velocity_mean,
            self.all.velocity_median,
            fmt_opt(s.map(|d| d.positional_mean)),
            fmt_opt(s.map(|d| d.angular_mean_deg)),
            fmt_opt(s.map(|d| d.velocity_mean)),
            fmt_opt(self.duration_ratio_mean),
            fmt_opt(self.duration_ratio_std),
        ));
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variant {} over {} episodes", self.variant, self.episodes)?;
        writeln!(f, "  success rate          {:6.1}%", self.success_rate * 100.0)?;
        writeln!(
            f,
            "  positional error      mean {:.3} m, median {:.3} m",
            self.all.positional_mean, self.all.positional_median
        )?;
        writeln!(
            f,
            "  angular error         mean {:.1} deg, median {:.1} deg",
            self.all.angular_mean_deg, self.all.angular_median_deg
        )?;
        writeln!(
            f,
            "  velocity error        mean {:.3} m/s, median {:.3} m/s",
            self.all.velocity_mean, self.all.velocity_median
        )?;
        match (self.duration_ratio_mean, self.duration_ratio_std) {
            (Some(m), Some(s)) => {
                writeln!(f, "  duration ratio        mean {m:.3}, std {s:.3} (successes only)")
            }
            _ => writeln!(f, "  duration ratio        n/a (no successful episodes)"),
        }
    }
}

/// Writes one row per evaluation episode.
pub fn write_details_csv(path: &Path, details: &[EpisodeDetail]) -> Result<(), Error> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for d in details {
        writer.serialize(d).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Ordered goals with the initial robot state for the composite task.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub start: RobotState,
    pub goals: Vec<GoalState>,
}

impl Scenario {
    /// Parses the plain-text scenario format:
    ///
    /// ```text
    /// # comment
    /// start x y theta nu omega
    /// goal gx gy theta_f nu_f
    /// goal ...
    /// ```
    ///
    /// The `start` line is optional (defaults to rest at the origin);
    /// at least one goal is required.
    pub fn parse(text: &str, path: &Path) -> Result<Self, Error> {
        let mut start = RobotState::new(0.0, 0.0, 0.0, 0.0, 0.0);
        let mut goals = Vec::new();
        let mut saw_start = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let keyword = parts.next().unwrap();
            let numbers: Vec<f64> = parts
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| Error::format(path, idx + 1, format!("bad number '{tok}'")))
                })
                .collect::<Result<_, _>>()?;
            match keyword {
                "start" => {
                    if saw_start {
                        return Err(Error::format(path, idx + 1, "duplicate start line".into()));
                    }
                    if numbers.len() != 5 {
                        return Err(Error::format(
                            path,
                            idx + 1,
                            format!("start needs 5 numbers (x y theta nu omega), got {}", numbers.len()),
                        ));
                    }
                    start = RobotState::new(numbers[0], numbers[1], numbers[2], numbers[3], numbers[4]);
                    saw_start = true;
                }
                "goal" => {
                    if numbers.len() != 4 {
                        return Err(Error::format(
                            path,
                            idx + 1,
                            format!("goal needs 4 numbers (x y theta_f nu_f), got {}", numbers.len()),
                        ));
                    }
                    goals.push(GoalState::new(numbers[0], numbers[1], numbers[2], numbers[3]));
                }
                other => {
                    return Err(Error::format(
                        path,
                        idx + 1,
                        format!("unknown record '{other}' (expected 'start' or 'goal')"),
                    ));
                }
            }
        }
        if goals.is_empty() {
            return Err(Error::format(path, 0, "scenario has no goals".into()));
        }
        Ok(Self { start, goals })
    }

    pub fn read(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Robot state on the scenario timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub state: RobotState,
    pub goal_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegResult {
    pub goal_index: usize,
    pub steps: u32,
    pub reached: bool,
    pub final_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub trace: Vec<TracePoint>,
    pub legs: Vec<LegResult>,
}

impl ScenarioRun {
    pub fn completed(&self) -> bool {
        self.legs.iter().all(|l| l.reached)
    }
}

/// Drives the scenario: each goal gets its own step budget; when a leg
/// ends (reached or budget exhausted) the next goal is installed without
/// resetting the robot.
pub fn run_scenario(
    policy: &mut impl Policy,
    config: &EpisodeConfig,
    scenario: &Scenario,
) -> ScenarioRun {
    let mut env = Environment::new(*config);
    env.reset_with(scenario.start, scenario.goals[0]);
    let dt = config.limits.dt;
    let mut trace = vec![TracePoint { t: 0.0, state: *env.state(), goal_index: 0 }];
    let mut legs = Vec::with_capacity(scenario.goals.len());
    let mut tick = 0u64;
    for (goal_index, goal) in scenario.goals.iter().enumerate() {
        if goal_index > 0 {
            env.set_goal(*goal);
        }
        let outcome = loop {
            let action = policy.act(&env.observation());
            let out = env.step(action);
            tick += 1;
            trace.push(TracePoint { t: tick as f64 * dt, state: *env.state(), goal_index });
            if out.done {
                break out;
            }
        };
        legs.push(LegResult {
            goal_index,
            steps: env.steps_taken(),
            reached: outcome.success,
            final_error: outcome.error,
        });
    }
    ScenarioRun { trace, legs }
}

/// Trajectory CSV schema shared by agent traces and spline references.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub nu: f64,
    pub omega: f64,
    pub goal_index: usize,
}

pub fn write_trace_csv(path: &Path, run: &ScenarioRun) -> Result<(), Error> {
    let rows = run.trace.iter().map(|p| TrajectoryRow {
        t: p.t,
        x: p.state.x,
        y: p.state.y,
        theta: p.state.theta,
        nu: p.state.nu,
        omega: p.state.omega,
        goal_index: p.goal_index,
    });
    write_rows(path, rows)
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TrajectoryRow>, Error> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    reader
        .deserialize()
        .collect::<Result<Vec<TrajectoryRow>, _>>()
        .map_err(|e| csv_error(path, e))
}

/// Chains per-leg spline plans through the scenario goals (leg `k` starts
/// at goal `k-1`'s pose) and exports them on the shared trajectory schema.
pub fn write_scenario_spline_csv(
    path: &Path,
    scenario: &Scenario,
    limits: &crate::kinematics::Limits,
) -> Result<(), Error> {
    let mut rows: Vec<TrajectoryRow> = Vec::new();
    let mut leg_start = scenario.start;
    let mut t_offset = 0.0;
    for (goal_index, goal) in scenario.goals.iter().enumerate() {
        let plan = plan_spline(&leg_start, goal, limits)?;
        for pair in plan.waypoints.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let heading = (b.y - a.y).atan2(b.x - a.x);
            let prev_theta = rows.last().map(|r| r.theta).unwrap_or(leg_start.theta);
            rows.push(TrajectoryRow {
                t: t_offset + a.t,
                x: a.x,
                y: a.y,
                theta: heading,
                nu: plan.ramp.speed_at(a.t),
                omega: wrap_angle(heading - prev_theta) / limits.dt,
                goal_index,
            });
        }
        t_offset += plan.duration;
        leg_start = RobotState::new(goal.x, goal.y, goal.theta_f, goal.nu_f, 0.0);
    }
    write_rows(path, rows.into_iter())
}

fn write_rows(path: &Path, rows: impl Iterator<Item = TrajectoryRow>) -> Result<(), Error> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Default smoothing window for training curves.
pub const SMOOTHING_WINDOW: usize = 50;

/// Per-episode error series extracted from a training log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingCurves {
    pub positional: Vec<f64>,
    pub angular_deg: Vec<f64>,
    pub velocity: Vec<f64>,
    pub positional_smoothed: Vec<f64>,
    pub angular_deg_smoothed: Vec<f64>,
    pub velocity_smoothed: Vec<f64>,
}

/// Trailing moving average over `window` episodes (`window = 1` is the
/// identity). With `normalize`, each series is rescaled so its raw maximum
/// maps to 100.
pub fn extract_training_curves(log: &TrainingLog, window: usize, normalize: bool) -> TrainingCurves {
    assert!(window >= 1, "smoothing window must be >= 1");
    let positional: Vec<f64> = log.records.iter().map(|r| r.positional_error).collect();
    let angular_deg: Vec<f64> = log.records.iter().map(|r| r.angular_error.to_degrees()).collect();
    let velocity: Vec<f64> = log.records.iter().map(|r| r.velocity_error).collect();

    let smooth = |series: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(series.len());
        let mut sum = 0.0;
        for i in 0..series.len() {
            sum += series[i];
            if i >= window {
                sum -= series[i - window];
            }
            out.push(sum / window.min(i + 1) as f64);
        }
        out
    };
    let rescale = |series: Vec<f64>, max: f64| -> Vec<f64> {
        if !normalize || max <= 0.0 {
            series
        } else {
            series.into_iter().map(|v| v / max * 100.0).collect()
        }
    };

    let max_pos = positional.iter().copied().fold(0.0f64, f64::max);
    let max_ang = angular_deg.iter().copied().fold(0.0f64, f64::max);
    let max_vel = velocity.iter().copied().fold(0.0f64, f64::max);
    TrainingCurves {
        positional_smoothed: rescale(smooth(&positional), max_pos),
        angular_deg_smoothed: rescale(smooth(&angular_deg), max_ang),
        velocity_smoothed: rescale(smooth(&velocity), max_vel),
        positional: rescale(positional, max_pos),
        angular_deg: rescale(angular_deg, max_ang),
        velocity: rescale(velocity, max_vel),
    }
}
