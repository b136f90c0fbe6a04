//! Kinematic simulator and broadcast-input planner for swarms of pivot-walking
//! millirobots.
//!
//! Every robot receives the same actuation. Robots with different pivot spans
//! still end up in different places because pivot-walk strides scale with the
//! span, and that difference is what the planners exploit.

pub mod controllability;
pub mod io;
pub mod kinematics;
pub mod paths;
pub mod planner;
pub mod sweep;

pub use kinematics::{Pivot, Pose, RobotSpec, Schedule, StepCommand, Trajectory, Vec2};
