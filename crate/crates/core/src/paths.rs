//! Straight, triangular and circular pivot-walk paths, and the two-robot gap
//! solver built on the triangle.
//!
//! All displacement helpers work in the body frame of a robot with heading 0:
//! `x` is along the long axis and `y` is the lateral direction. Rotate by the
//! actual heading to get world coordinates.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{simulate, KinematicsError, Pivot, Pose, RobotSpec, Schedule, StepCommand, Vec2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("sweep {0} rad is outside (0, pi)")]
    SweepOutOfRange(f64),
    #[error("step count must be at least 1")]
    StepCountNonPositive,
    #[error("a leg that reverses direction needs an even number of half-steps, got {0}")]
    OddLegHalfSteps(usize),
    #[error("circular paths need two different sweep angles")]
    EqualSweepAngles,
    #[error("closing sweep {0} rad is outside (0, pi)")]
    ClosingAngleOutOfRange(f64),
    #[error("robots with equal pivot spans cannot change their gap by pivot walking")]
    DegenerateSpans,
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Which side of the heading a walk drifts to. `Right` is the pattern with a
/// positive front sweep and a negative back sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Right,
    Left,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Right => 1.0,
            Side::Left => -1.0,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Right => Side::Left,
            Side::Left => Side::Right,
        }
    }
}

fn signed_sweep(pivot: Pivot, side: Side, magnitude: f64) -> f64 {
    let pivot_sign = match pivot {
        Pivot::Front => 1.0,
        Pivot::Back => -1.0,
    };
    side.sign() * pivot_sign * magnitude
}

fn check_sweep(sweep: f64) -> Result<(), PathError> {
    if !sweep.is_finite() {
        return Err(KinematicsError::NonFiniteInput("sweep").into());
    }
    if sweep <= 0.0 || sweep >= PI {
        return Err(PathError::SweepOutOfRange(sweep));
    }
    Ok(())
}

fn check_span(span: f64) -> Result<(), PathError> {
    if !span.is_finite() {
        return Err(KinematicsError::NonFiniteInput("span").into());
    }
    if span <= 0.0 {
        return Err(KinematicsError::SpanNonPositive(span).into());
    }
    Ok(())
}

/// Straight-line walk: a half sweep first, then `half_steps - 1` full sweeps on
/// alternating pivots. The midpoint advances along a fixed line and the heading
/// oscillates by `sweep / 2` about its starting value.
pub fn straight_schedule(sweep: f64, half_steps: usize, lead: Pivot) -> Result<Schedule, PathError> {
    straight_schedule_on(sweep, half_steps, lead, Side::Right)
}

pub fn straight_schedule_on(sweep: f64, half_steps: usize, lead: Pivot, side: Side) -> Result<Schedule, PathError> {
    check_sweep(sweep)?;
    if half_steps == 0 {
        return Err(PathError::StepCountNonPositive);
    }
    let steps = (0..half_steps)
        .map(|i| {
            let pivot = if i % 2 == 0 { lead } else { lead.other() };
            let magnitude = if i == 0 { 0.5 * sweep } else { sweep };
            StepCommand::pivot(pivot, signed_sweep(pivot, side, magnitude))
        })
        .collect();
    Ok(Schedule::from_steps("straight", steps))
}

/// Body-frame net displacement of [`straight_schedule`] with a front lead.
/// `half_steps == 0` gives the zero vector.
pub fn straight_displacement(span: f64, sweep: f64, half_steps: usize) -> Result<Vec2, PathError> {
    check_span(span)?;
    check_sweep(sweep)?;
    if half_steps == 0 {
        return Ok(Vec2::zeros());
    }
    let half = 0.5 * sweep;
    Ok(0.5 * span * Vec2::new(1.0 - half.cos(), -((2 * half_steps - 1) as f64) * half.sin()))
}

/// Displacement per unit span of the straight walk, `|d| / span`.
pub fn straight_gain(sweep: f64, half_steps: usize) -> f64 {
    if half_steps == 0 {
        return 0.0;
    }
    let half = 0.5 * sweep;
    0.5 * (1.0 - half.cos()).hypot((2 * half_steps - 1) as f64 * half.sin())
}

/// Direction of the straight-walk displacement in the body frame.
pub fn straight_direction(sweep: f64, half_steps: usize) -> f64 {
    let half = 0.5 * sweep;
    (-((2 * half_steps.max(1) - 1) as f64) * half.sin()).atan2(1.0 - half.cos())
}

/// Heading change left behind by the straight walk: `+sweep/2` after an odd
/// number of half-steps, `-sweep/2` after an even number.
pub fn straight_heading_change(sweep: f64, half_steps: usize, lead: Pivot) -> f64 {
    if half_steps == 0 {
        return 0.0;
    }
    let first = signed_sweep(lead, Side::Right, 0.5 * sweep);
    if half_steps % 2 == 1 {
        first
    } else {
        -first
    }
}

/// Straight walk that also restores the heading: half sweep, `2 * full_steps - 1`
/// full sweeps, then a closing half sweep. The net motion is purely lateral,
/// `2 * full_steps * span * sin(sweep / 2)` to the chosen side.
pub fn balanced_straight_schedule(sweep: f64, full_steps: usize, side: Side) -> Result<Schedule, PathError> {
    check_sweep(sweep)?;
    if full_steps == 0 {
        return Err(PathError::StepCountNonPositive);
    }
    let count = 2 * full_steps + 1;
    let steps = (0..count)
        .map(|i| {
            let pivot = if i % 2 == 0 { Pivot::Front } else { Pivot::Back };
            let magnitude = if i == 0 || i == count - 1 { 0.5 * sweep } else { sweep };
            StepCommand::pivot(pivot, signed_sweep(pivot, side, magnitude))
        })
        .collect();
    Ok(Schedule::from_steps("balanced straight", steps))
}

/// Lateral travel per unit span of [`balanced_straight_schedule`].
pub fn balanced_gain(sweep: f64, full_steps: usize) -> f64 {
    2.0 * full_steps as f64 * (0.5 * sweep).sin()
}

/// Walk out for `out_steps` half-steps on one side, then reverse the sweep
/// pattern for `back_steps` more while keeping the pivot alternation. Each
/// half-step advances `span * (1 - cos sweep) / 2` along the axis, forward for a
/// front lead and backward for a back lead.
pub fn reversal_schedule(
    sweep: f64,
    out_steps: usize,
    back_steps: usize,
    lead: Pivot,
    first_side: Side,
) -> Result<Schedule, PathError> {
    check_sweep(sweep)?;
    if out_steps == 0 {
        return Err(PathError::StepCountNonPositive);
    }
    if out_steps % 2 == 1 {
        return Err(PathError::OddLegHalfSteps(out_steps));
    }
    let steps = (0..out_steps + back_steps)
        .map(|i| {
            let pivot = if i % 2 == 0 { lead } else { lead.other() };
            let side = if i < out_steps { first_side } else { first_side.other() };
            StepCommand::pivot(pivot, signed_sweep(pivot, side, sweep))
        })
        .collect();
    Ok(Schedule::from_steps("reversal", steps))
}

/// Isosceles triangle: `half_steps_per_leg` half-steps drifting right, the same
/// number drifting left. Ends on the starting line with the starting heading.
pub fn triangle_schedule(sweep: f64, half_steps_per_leg: usize) -> Result<Schedule, PathError> {
    triangle_schedule_with(sweep, half_steps_per_leg, Pivot::Front, Side::Right)
}

pub fn triangle_schedule_with(
    sweep: f64,
    half_steps_per_leg: usize,
    lead: Pivot,
    side: Side,
) -> Result<Schedule, PathError> {
    let mut schedule = reversal_schedule(sweep, half_steps_per_leg, half_steps_per_leg, lead, side)?;
    schedule.label = "triangle".into();
    Ok(schedule)
}

/// Axial advance of a triangle per unit span, `k * (1 - cos sweep)`.
pub fn triangle_base_gain(sweep: f64, half_steps_per_leg: usize) -> f64 {
    half_steps_per_leg as f64 * (1.0 - sweep.cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriangleMetrics {
    pub base: f64,
    pub height: f64,
    pub base_angle: f64,
    pub half_steps_per_leg: usize,
}

/// Exact base, apex height and base angle of the triangle traced by the
/// midpoints. `height == base / 2 * cot(sweep / 2)` holds exactly.
pub fn triangle_metrics(span: f64, sweep: f64, half_steps_per_leg: usize) -> Result<TriangleMetrics, PathError> {
    check_span(span)?;
    check_sweep(sweep)?;
    if half_steps_per_leg == 0 {
        return Err(PathError::StepCountNonPositive);
    }
    if half_steps_per_leg % 2 == 1 {
        return Err(PathError::OddLegHalfSteps(half_steps_per_leg));
    }
    let k = half_steps_per_leg as f64;
    Ok(TriangleMetrics {
        base: k * span * (1.0 - sweep.cos()),
        height: 0.5 * k * span * sweep.sin(),
        base_angle: 0.5 * (PI - sweep),
        half_steps_per_leg,
    })
}

/// Closing sweep that brings the total rotation of a circular path to a half turn.
pub fn closing_sweep(first: f64, second: f64, full_steps: usize) -> f64 {
    let k = full_steps as f64;
    PI - (k * first - (k - 1.0) * second)
}

/// Cumulative body angle after half-step `i` and the angle folded into `[0, pi/2]`.
pub fn circle_body_angles(first: f64, second: f64, i: usize) -> Result<(f64, f64), PathError> {
    if i == 0 {
        return Err(PathError::StepCountNonPositive);
    }
    if !first.is_finite() || !second.is_finite() {
        return Err(KinematicsError::NonFiniteInput("sweep").into());
    }
    let theta_d = i.div_ceil(2) as f64 * first - (i / 2) as f64 * second;
    let beta = if theta_d <= 0.5 * PI { theta_d } else { PI - theta_d };
    Ok((theta_d, beta))
}

/// Circular arc: `2k - 1` half-steps alternating `+first` on the front pivot and
/// `-second` on the back pivot, then a closing back-pivot sweep that completes a
/// half turn of the body.
pub fn circle_schedule(first: f64, second: f64, full_steps: usize) -> Result<Schedule, PathError> {
    let mut schedule = open_circle_schedule(first, second, full_steps)?;
    let closing = closing_sweep(first, second, full_steps);
    if !(closing > 0.0 && closing < PI) {
        return Err(PathError::ClosingAngleOutOfRange(closing));
    }
    schedule.push(StepCommand::pivot(Pivot::Back, closing));
    schedule.label = "circle".into();
    Ok(schedule)
}

/// [`circle_schedule`] without the closing step.
pub fn open_circle_schedule(first: f64, second: f64, full_steps: usize) -> Result<Schedule, PathError> {
    check_sweep(first)?;
    check_sweep(second)?;
    if first == second {
        return Err(PathError::EqualSweepAngles);
    }
    if full_steps == 0 {
        return Err(PathError::StepCountNonPositive);
    }
    let steps = (1..2 * full_steps)
        .map(|i| {
            if i % 2 == 1 {
                StepCommand::pivot(Pivot::Front, first)
            } else {
                StepCommand::pivot(Pivot::Back, -second)
            }
        })
        .collect();
    Ok(Schedule::from_steps("open circle", steps))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircleMetrics {
    /// Radius of the circle through the half-step midpoints.
    pub radius: f64,
    /// Body-frame center of that circle.
    pub center: [f64; 2],
    /// Largest distance of a midpoint from the fitted circle.
    pub fit_residual: f64,
    pub body_angles: Vec<f64>,
    pub closing_sweep: f64,
    pub cumulative_angle: f64,
}

pub fn circle_metrics(span: f64, first: f64, second: f64, full_steps: usize) -> Result<CircleMetrics, PathError> {
    check_span(span)?;
    let schedule = circle_schedule(first, second, full_steps)?;
    let points = body_frame_points(span, &schedule)?;
    // The closing step leaves the arc, so it is not part of the fit.
    let arc = &points[..points.len() - 1];
    let fit = fit_circle(arc).ok_or_else(|| PathError::Infeasible("midpoints are collinear".into()))?;
    let half_steps = 2 * full_steps - 1;
    let body_angles = (1..=half_steps)
        .map(|i| circle_body_angles(first, second, i).map(|(_, beta)| beta))
        .collect::<Result<Vec<_>, _>>()?;
    let (cumulative_angle, _) = circle_body_angles(first, second, half_steps)?;
    Ok(CircleMetrics {
        radius: fit.radius,
        center: [fit.center.x, fit.center.y],
        fit_residual: fit.max_residual,
        body_angles,
        closing_sweep: closing_sweep(first, second, full_steps),
        cumulative_angle,
    })
}

/// How well a path ends up back on the line of its starting body axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineClosure {
    /// `span * |sin(heading change)|`: zero when the final body axis is parallel
    /// to the initial one.
    pub axis_misalignment: f64,
    /// Distance of the final midpoint from the initial axis line.
    pub midpoint_offset: f64,
}

pub fn line_closure(span: f64, schedule: &Schedule) -> Result<LineClosure, PathError> {
    check_span(span)?;
    let points = body_frame_points(span, schedule)?;
    let end = points.last().copied().unwrap_or_else(Vec2::zeros);
    let turn = schedule.net_rotation();
    Ok(LineClosure {
        axis_misalignment: span * turn.sin().abs(),
        midpoint_offset: end.y.abs(),
    })
}

/// Midpoints of a single robot with heading 0 at the origin, one per pose.
pub fn body_frame_points(span: f64, schedule: &Schedule) -> Result<Vec<Vec2>, PathError> {
    let robot = RobotSpec::legged("probe", span, span);
    let initial = [(robot.id.clone(), Pose::new(0.0, 0.0, 0.0))].into_iter().collect();
    let trajectories = simulate(std::slice::from_ref(&robot), &initial, schedule)?;
    Ok(trajectories[0].poses.iter().map(Pose::position).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleFit {
    pub center: Vec2,
    pub radius: f64,
    pub max_residual: f64,
}

/// Algebraic least-squares circle through at least three points.
pub fn fit_circle(points: &[Vec2]) -> Option<CircleFit> {
    if points.len() < 3 {
        return None;
    }
    // Center the data first to keep the normal equations well conditioned.
    let mean = points.iter().sum::<Vec2>() / points.len() as f64;
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for p in points {
        let d = p - mean;
        let row = Vector3::new(2.0 * d.x, 2.0 * d.y, 1.0);
        normal += row * row.transpose();
        rhs += row * d.norm_squared();
    }
    let solution = normal.lu().solve(&rhs)?;
    let offset = Vec2::new(solution.x, solution.y);
    let radius_sq = solution.z + offset.norm_squared();
    if !radius_sq.is_finite() || radius_sq <= 0.0 {
        return None;
    }
    let radius = radius_sq.sqrt();
    let center = mean + offset;
    let max_residual = points
        .iter()
        .map(|p| ((p - center).norm() - radius).abs())
        .fold(0.0, f64::max);
    Some(CircleFit {
        center,
        radius,
        max_residual,
    })
}

/// Inverts an increasing function on `[lo, hi]` by bisection. The caller
/// guarantees `f(lo) <= target <= f(hi)`.
pub fn invert_increasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverLimits {
    pub max_sweep: f64,
    pub max_half_steps: usize,
}

impl Default for SolverLimits {
    fn default() -> Self {
        Self {
            max_sweep: 0.5 * PI,
            max_half_steps: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapOrder {
    Preserve,
    Swap,
}

/// Two robots on a common axis line, robot 2 ahead of robot 1 by `initial_gap`
/// along the shared heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceChangeRequest {
    pub spans: (f64, f64),
    pub initial_gap: f64,
    pub desired_gap: f64,
    pub order: GapOrder,
}

impl DistanceChangeRequest {
    /// Signed gap (robot 2 minus robot 1) the plan must end with.
    pub fn target_signed_gap(&self) -> f64 {
        match self.order {
            GapOrder::Preserve => self.desired_gap,
            GapOrder::Swap => -self.desired_gap,
        }
    }
}

/// Triangle parameters for a distance change. `half_steps_per_leg == 0` means
/// nothing has to move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceChangePlan {
    pub sweep: f64,
    pub half_steps_per_leg: usize,
    pub lead: Pivot,
}

impl DistanceChangePlan {
    pub fn is_noop(&self) -> bool {
        self.half_steps_per_leg == 0
    }

    pub fn schedule(&self) -> Result<Schedule, PathError> {
        if self.is_noop() {
            return Ok(Schedule::new("triangle"));
        }
        triangle_schedule_with(self.sweep, self.half_steps_per_leg, self.lead, Side::Right)
    }

    /// Signed axial advance of a robot with the given span.
    pub fn advance(&self, span: f64) -> f64 {
        let sign = match self.lead {
            Pivot::Front => 1.0,
            Pivot::Back => -1.0,
        };
        sign * span * triangle_base_gain(self.sweep, self.half_steps_per_leg)
    }
}

/// Chooses the triangle that turns `initial_gap` into `desired_gap`.
///
/// Both robots advance along the axis by `span * k * (1 - cos sweep)`, so the
/// signed gap changes by `(P2 - P1) * k * (1 - cos sweep)` and the lead pivot
/// picks the sign. The smallest even `k` that can reach the target within the
/// sweep limit wins, then the sweep comes from bisection.
pub fn solve_distance_change(
    request: &DistanceChangeRequest,
    limits: &SolverLimits,
) -> Result<DistanceChangePlan, PathError> {
    let (p1, p2) = request.spans;
    check_span(p1)?;
    check_span(p2)?;
    if !request.initial_gap.is_finite() || !request.desired_gap.is_finite() {
        return Err(KinematicsError::NonFiniteInput("gap").into());
    }
    if request.initial_gap <= 0.0 {
        return Err(PathError::InvalidRequest(format!(
            "initial gap {} must be positive",
            request.initial_gap
        )));
    }
    if request.desired_gap < 0.0 {
        return Err(PathError::InvalidRequest(format!(
            "desired gap {} must be non-negative",
            request.desired_gap
        )));
    }
    if p1 == p2 {
        return Err(PathError::DegenerateSpans);
    }
    let needed = request.target_signed_gap() - request.initial_gap;
    if needed.abs() <= 1e-12 * request.initial_gap {
        return Ok(DistanceChangePlan {
            sweep: 0.0,
            half_steps_per_leg: 0,
            lead: Pivot::Front,
        });
    }
    let relative = p2 - p1;
    let lead = if needed / relative > 0.0 {
        Pivot::Front
    } else {
        Pivot::Back
    };
    let gain = needed.abs() / relative.abs();
    let max_sweep = limits.max_sweep.min(PI - 1e-9);
    let per_step = 1.0 - max_sweep.cos();
    let k = (2..=limits.max_half_steps)
        .step_by(2)
        .find(|&k| k as f64 * per_step >= gain)
        .ok_or_else(|| {
            PathError::Infeasible(format!(
                "gap change of {:.6} mm needs more than {} half-steps per leg at {:.3} deg",
                needed.abs(),
                limits.max_half_steps,
                max_sweep.to_degrees()
            ))
        })?;
    let sweep = invert_increasing(|t| triangle_base_gain(t, k), gain, 0.0, max_sweep);
    Ok(DistanceChangePlan {
        sweep,
        half_steps_per_leg: k,
        lead,
    })
}
