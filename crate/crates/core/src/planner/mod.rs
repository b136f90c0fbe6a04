//! Inverse planning for broadcast-actuated swarms.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::kinematics::{KinematicsError, Pose, RobotSpec, Schedule, Vec2};
use crate::paths::{PathError, SolverLimits};

mod expansion;
mod maneuver;
mod swarm;
mod validate;

pub use expansion::{plan_contraction, plan_expansion};
pub use maneuver::{plan_reverse, ManeuverPlan, Phase, ReverseOptions};
pub use swarm::{
    plan_formation, plan_pattern, plan_swarm, plan_tumble_translate, regular_polygon, solve_follower_lengths,
    solve_leader_line, FollowerSpans, LineSolution, PatternShape, SolutionSet, TumblePlan,
};
pub use validate::{
    segment_distance, segment_rect_distance, validate_plan, Finding, FindingKind, Severity, ValidationReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("robot id '{0}' is declared twice")]
    DuplicateRobot(String),
    #[error("{table} references unknown robot '{id}'")]
    UnknownRobot { table: &'static str, id: String },
    #[error("robot '{0}' has no initial pose")]
    MissingInitialPose(String),
    #[error("initial pose of robot '{0}' lies outside the workspace")]
    OutsideWorkspace(String),
    #[error("channel {index}: {reason}")]
    InvalidChannel { index: usize, reason: String },
    #[error("workspace must have positive size")]
    InvalidWorkspace,
    #[error("solver option {0}")]
    InvalidSolver(String),
    #[error(transparent)]
    Robot(#[from] KinematicsError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("invalid scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("robot '{0}' has no target")]
    MissingTarget(String),
    #[error("goal is {distance:.6} mm away but at most {reachable:.6} mm is reachable")]
    Unreachable { distance: f64, reachable: f64 },
    #[error("displacement of robot '{robot}' is not parallel to the leader's")]
    NonParallelTargets { robot: String },
    #[error("required span {span:.6} mm for robot '{robot}' is out of bounds")]
    SpanOutOfBounds { robot: String, span: f64 },
    #[error("{what}: residual {residual:.6} mm exceeds tolerance {tolerance:.6} mm")]
    ResidualExceedsTolerance {
        what: String,
        residual: f64,
        tolerance: f64,
    },
    #[error("not a rigid translation: {0}")]
    NonRigidTranslation(String),
    #[error("channel too narrow: {0}")]
    ChannelTooNarrow(String),
    #[error("robots with equal pivot spans cannot change their relative position by pivot walking")]
    DegenerateSpans,
    #[error("phase '{phase}' failed: {reason}")]
    PhaseSolverFailure { phase: String, reason: String },
    #[error("workspace violation: {0}")]
    WorkspaceViolation(String),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

impl PlanError {
    /// Short machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            PlanError::Scenario(_) => "SCHEMA",
            PlanError::MissingTarget(_) => "MISSING_TARGET",
            PlanError::Unreachable { .. } => "UNREACHABLE",
            PlanError::NonParallelTargets { .. } => "NON_PARALLEL_TARGETS",
            PlanError::SpanOutOfBounds { .. } => "SPAN_OUT_OF_BOUNDS",
            PlanError::ResidualExceedsTolerance { .. } => "RESIDUAL_EXCEEDS_TOLERANCE",
            PlanError::NonRigidTranslation(_) => "NON_RIGID_TRANSLATION",
            PlanError::ChannelTooNarrow(_) => "CHANNEL_TOO_NARROW",
            PlanError::DegenerateSpans => "DEGENERATE_SPANS",
            PlanError::PhaseSolverFailure { .. } => "PHASE_SOLVER_FAILURE",
            PlanError::WorkspaceViolation(_) => "WORKSPACE_VIOLATION",
            PlanError::Path(PathError::DegenerateSpans) => "DEGENERATE_SPANS",
            PlanError::Path(PathError::Infeasible(_)) => "INFEASIBLE",
            PlanError::Path(_) => "INVALID_PATH",
            PlanError::Kinematics(_) => "KINEMATICS",
        }
    }

    /// True for errors caused by malformed input rather than an impossible task.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            PlanError::Scenario(_)
                | PlanError::MissingTarget(_)
                | PlanError::Kinematics(_)
                | PlanError::Path(
                    PathError::SweepOutOfRange(_)
                        | PathError::StepCountNonPositive
                        | PathError::OddLegHalfSteps(_)
                        | PathError::EqualSweepAngles
                        | PathError::InvalidRequest(_)
                        | PathError::Kinematics(_)
                )
        )
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

impl Default for Rect {
    /// The 120 mm x 120 mm coil workspace.
    fn default() -> Self {
        Self::new(Vec2::zeros(), Vec2::new(120.0, 120.0))
    }
}

/// Direction of travel through a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelAxis {
    X,
    Y,
}

/// A gap of width `width` between two walls. The walls are `wall_thickness`
/// deep along the travel axis and reach `wall_extent` outward from the gap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    pub center: Vec2,
    pub axis: ChannelAxis,
    pub width: f64,
    pub wall_thickness: f64,
    pub wall_extent: f64,
}

impl Channel {
    pub fn transit_axis(&self) -> Vec2 {
        match self.axis {
            ChannelAxis::X => Vec2::new(1.0, 0.0),
            ChannelAxis::Y => Vec2::new(0.0, 1.0),
        }
    }

    /// Transit axis turned a quarter turn counterclockwise.
    pub fn cross_axis(&self) -> Vec2 {
        let t = self.transit_axis();
        Vec2::new(-t.y, t.x)
    }

    /// `(along, across)` coordinates relative to the channel center.
    pub fn to_local(&self, p: Vec2) -> (f64, f64) {
        let d = p - self.center;
        (d.dot(&self.transit_axis()), d.dot(&self.cross_axis()))
    }

    pub fn from_local(&self, along: f64, across: f64) -> Vec2 {
        self.center + along * self.transit_axis() + across * self.cross_axis()
    }

    pub fn walls(&self) -> [Rect; 2] {
        let t = 0.5 * self.wall_thickness;
        let inner = 0.5 * self.width;
        let outer = inner + self.wall_extent;
        let corners = |a: f64, b: f64| {
            let p = self.from_local(-t, a);
            let q = self.from_local(t, b);
            Rect::new(
                Vec2::new(p.x.min(q.x), p.y.min(q.y)),
                Vec2::new(p.x.max(q.x), p.y.max(q.y)),
            )
        };
        [corners(-outer, -inner), corners(inner, outer)]
    }

    fn validate(&self, index: usize) -> Result<(), ScenarioError> {
        let invalid = |reason: &str| ScenarioError::InvalidChannel {
            index,
            reason: reason.into(),
        };
        let values = [
            self.center.x,
            self.center.y,
            self.width,
            self.wall_thickness,
            self.wall_extent,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite geometry"));
        }
        if self.width <= 0.0 {
            return Err(invalid("width must be positive"));
        }
        if self.wall_thickness <= 0.0 || self.wall_extent <= 0.0 {
            return Err(invalid("walls must have positive thickness and extent"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Largest sweep any solver may use, radians.
    pub max_sweep: f64,
    pub max_half_steps: usize,
    /// Fixed half-step count for straight walks instead of the smallest one.
    pub half_steps: Option<usize>,
    /// Placement tolerance in mm.
    pub tolerance: f64,
    /// Span used for the leader instead of its own.
    pub leader_span: Option<f64>,
    pub span_bounds: Option<(f64, f64)>,
    /// Available spans; follower spans snap to the nearest entry.
    pub catalog: Option<Vec<f64>>,
    /// Fraction of a channel width the robots may use.
    pub channel_margin: f64,
    /// Smallest allowed distance between robot bodies and from obstacles, mm.
    pub min_separation: f64,
    /// Largest tumble remainder accepted; defaults to half a body length.
    pub tumble_tolerance: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_sweep: 0.5 * PI,
            max_half_steps: 200,
            half_steps: None,
            tolerance: 0.1,
            leader_span: None,
            span_bounds: None,
            catalog: None,
            channel_margin: 0.8,
            min_separation: 0.5,
            tumble_tolerance: None,
        }
    }
}

impl SolverOptions {
    pub fn limits(&self) -> SolverLimits {
        SolverLimits {
            max_sweep: self.max_sweep,
            max_half_steps: self.max_half_steps,
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.max_sweep > 0.0 && self.max_sweep < PI) {
            return Err(ScenarioError::InvalidSolver(
                "max_sweep must lie in (0, 180) degrees".into(),
            ));
        }
        if self.max_half_steps == 0 {
            return Err(ScenarioError::InvalidSolver("max_half_steps must be positive".into()));
        }
        if self.half_steps.is_some_and(|k| k == 0 || k > self.max_half_steps) {
            return Err(ScenarioError::InvalidSolver(
                "half_steps must lie in 1..=max_half_steps".into(),
            ));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(ScenarioError::InvalidSolver("tolerance must be positive".into()));
        }
        if !(self.channel_margin > 0.0 && self.channel_margin <= 1.0) {
            return Err(ScenarioError::InvalidSolver("channel_margin must lie in (0, 1]".into()));
        }
        if self.min_separation.is_nan() || self.min_separation < 0.0 {
            return Err(ScenarioError::InvalidSolver(
                "min_separation must be non-negative".into(),
            ));
        }
        if let Some(span) = self.leader_span {
            if span.is_nan() || span <= 0.0 {
                return Err(ScenarioError::InvalidSolver("leader_span must be positive".into()));
            }
        }
        if let Some((lo, hi)) = self.span_bounds {
            if !(lo > 0.0 && lo <= hi) {
                return Err(ScenarioError::InvalidSolver(
                    "span_bounds must satisfy 0 < min <= max".into(),
                ));
            }
        }
        if let Some(catalog) = &self.catalog {
            if catalog.is_empty() || catalog.iter().any(|s| s.is_nan() || *s <= 0.0) {
                return Err(ScenarioError::InvalidSolver("catalog needs positive spans".into()));
            }
        }
        Ok(())
    }
}

/// Everything a planner needs to know about one task.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub robots: Vec<RobotSpec>,
    pub initial: BTreeMap<String, Pose>,
    pub pattern_targets: BTreeMap<String, Vec2>,
    pub final_targets: BTreeMap<String, Vec2>,
    pub channels: Vec<Channel>,
    pub workspace: Rect,
    pub solver: SolverOptions,
    /// Optional fixed schedule for plain simulation.
    pub schedule: Option<Schedule>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut ids = BTreeSet::new();
        for robot in &self.robots {
            if !ids.insert(robot.id.as_str()) {
                return Err(ScenarioError::DuplicateRobot(robot.id.clone()));
            }
            robot.validate()?;
        }
        if !(self.workspace.width() > 0.0 && self.workspace.height() > 0.0) {
            return Err(ScenarioError::InvalidWorkspace);
        }
        let tables: [(&'static str, Vec<&String>); 3] = [
            ("initial", self.initial.keys().collect()),
            ("pattern_targets", self.pattern_targets.keys().collect()),
            ("final_targets", self.final_targets.keys().collect()),
        ];
        for (table, keys) in tables {
            if let Some(id) = keys.into_iter().find(|id| !ids.contains(id.as_str())) {
                return Err(ScenarioError::UnknownRobot { table, id: id.clone() });
            }
        }
        for robot in &self.robots {
            let pose = self
                .initial
                .get(&robot.id)
                .ok_or_else(|| ScenarioError::MissingInitialPose(robot.id.clone()))?;
            if !pose.is_finite() {
                return Err(KinematicsError::NonFiniteInput("initial pose").into());
            }
            if !self.workspace.contains(pose.position()) {
                return Err(ScenarioError::OutsideWorkspace(robot.id.clone()));
            }
        }
        for (index, channel) in self.channels.iter().enumerate() {
            channel.validate(index)?;
        }
        self.solver.validate()
    }

    pub fn robot(&self, id: &str) -> Option<&RobotSpec> {
        self.robots.iter().find(|r| r.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario() -> Scenario {
        Scenario {
            robots: vec![RobotSpec::centered_magnet("a", 5.0)],
            initial: BTreeMap::from([("a".into(), Pose::new(10.0, 10.0, 0.0))]),
            ..Default::default()
        }
    }

    #[test]
    fn validation_names_unknown_ids() {
        let mut s = scenario();
        s.final_targets.insert("ghost".into(), Vec2::new(1.0, 1.0));
        assert_eq!(
            s.validate(),
            Err(ScenarioError::UnknownRobot {
                table: "final_targets",
                id: "ghost".into()
            })
        );
    }

    #[test]
    fn validation_checks_workspace_and_initials() {
        let mut s = scenario();
        assert!(s.validate().is_ok());
        s.initial.insert("a".into(), Pose::new(-1.0, 10.0, 0.0));
        assert_eq!(s.validate(), Err(ScenarioError::OutsideWorkspace("a".into())));
        s.initial.clear();
        assert_eq!(s.validate(), Err(ScenarioError::MissingInitialPose("a".into())));
    }

    #[test]
    fn channel_walls_flank_the_gap() {
        let c = Channel {
            center: Vec2::new(60.0, 60.0),
            axis: ChannelAxis::Y,
            width: 10.0,
            wall_thickness: 4.0,
            wall_extent: 20.0,
        };
        let [first, second] = c.walls();
        assert_eq!(first, Rect::new(Vec2::new(65.0, 58.0), Vec2::new(85.0, 62.0)));
        assert_eq!(second, Rect::new(Vec2::new(35.0, 58.0), Vec2::new(55.0, 62.0)));
        let (along, across) = c.to_local(Vec2::new(62.0, 50.0));
        assert_eq!((along, across), (-10.0, -2.0));
        assert_eq!(c.from_local(along, across), Vec2::new(62.0, 50.0));
    }
}
