//! Deep-RL motion planning for unicycle robots under kinodynamic constraints.
//!
//! The crate couples a goal-conditioned simulation environment (unicycle
//! kinematics, acceleration and lateral-force limits, dense reward) with a
//! from-scratch DDPG agent: dense networks with exact backpropagation, ADAM,
//! a replay buffer and slowly-updated target networks. A cubic-spline
//! velocity-ramp planner serves as the time-efficiency baseline, and the
//! evaluation tools aggregate success rates, per-dimension errors, duration
//! ratios and multi-goal scenario traces.

pub mod agent;
pub mod baseline;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod kinematics;
pub mod net;

pub use error::Error;
