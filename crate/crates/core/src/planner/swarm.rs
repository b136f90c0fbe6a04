//! Leader-follower straight-line planning, pattern formation and tumbling
//! translation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Rotation2;
use serde::Serialize;

use super::{ManeuverPlan, PlanError, Rect, Scenario, SolverOptions};
use crate::kinematics::{
    angle_difference, Mode, Pivot, Pose, RobotSpec, Schedule, StepCommand, TumbleDirection, Variant, Vec2,
};
use crate::paths::{invert_increasing, straight_direction, straight_displacement, straight_gain, straight_schedule};

/// Parameters of one straight walk shared by the whole swarm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineSolution {
    pub sweep: f64,
    pub half_steps: usize,
    /// Heading every robot must start with.
    pub heading: f64,
}

impl LineSolution {
    /// Displacement per unit span.
    pub fn gain(&self) -> f64 {
        straight_gain(self.sweep, self.half_steps)
    }

    /// World direction of the displacement.
    pub fn direction(&self) -> f64 {
        self.heading + straight_direction(self.sweep, self.half_steps)
    }

    pub fn displacement(&self, span: f64) -> Vec2 {
        if self.half_steps == 0 {
            return Vec2::zeros();
        }
        let body = straight_displacement(span, self.sweep, self.half_steps).expect("solution parameters are valid");
        Rotation2::new(self.heading) * body
    }

    pub fn schedule(&self) -> Schedule {
        if self.half_steps == 0 {
            return Schedule::new("straight");
        }
        straight_schedule(self.sweep, self.half_steps, Pivot::Front).expect("solution parameters are valid")
    }
}

/// Finds the straight walk that carries a robot of span `leader_span` from
/// `start` to `goal`: the fewest half-steps that can cover the distance within
/// the sweep limit, or `options.half_steps` when set, then the sweep by bisection.
pub fn solve_leader_line(
    start: Vec2,
    goal: Vec2,
    leader_span: f64,
    options: &SolverOptions,
) -> Result<LineSolution, PlanError> {
    if !leader_span.is_finite() || leader_span <= 0.0 {
        return Err(PlanError::SpanOutOfBounds {
            robot: "leader".into(),
            span: leader_span,
        });
    }
    let offset = goal - start;
    let distance = offset.norm();
    if !distance.is_finite() {
        return Err(crate::kinematics::KinematicsError::NonFiniteInput("goal").into());
    }
    if distance == 0.0 {
        return Ok(LineSolution {
            sweep: 0.0,
            half_steps: 0,
            heading: 0.0,
        });
    }
    let max_sweep = options.max_sweep;
    let half_steps = match options.half_steps {
        Some(k) if leader_span * straight_gain(max_sweep, k) >= distance => Some(k),
        Some(_) => None,
        None => (1..=options.max_half_steps).find(|&k| leader_span * straight_gain(max_sweep, k) >= distance),
    }
    .ok_or(PlanError::Unreachable {
        distance,
        reachable: leader_span * straight_gain(max_sweep, options.half_steps.unwrap_or(options.max_half_steps)),
    })?;
    let sweep = invert_increasing(|t| leader_span * straight_gain(t, half_steps), distance, 0.0, max_sweep);
    let heading = offset.y.atan2(offset.x) - straight_direction(sweep, half_steps);
    Ok(LineSolution {
        sweep,
        half_steps,
        heading: crate::kinematics::normalize_angle(heading),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FollowerSpans {
    pub spans: BTreeMap<String, f64>,
    /// Distance between goal and reached point, nonzero only after catalog snapping.
    pub residuals: BTreeMap<String, f64>,
}

/// Angle tolerance for treating two displacements as parallel.
pub const PARALLEL_TOLERANCE: f64 = 1e-6;

/// Spans that make every follower land on its goal under the leader's walk.
pub fn solve_follower_lengths(
    line: &LineSolution,
    starts: &BTreeMap<String, Vec2>,
    goals: &BTreeMap<String, Vec2>,
    options: &SolverOptions,
) -> Result<FollowerSpans, PlanError> {
    let gain = line.gain();
    let direction = line.direction();
    let unit = Vec2::new(direction.cos(), direction.sin());
    let mut spans = BTreeMap::new();
    let mut residuals = BTreeMap::new();
    for (id, start) in starts {
        let goal = goals.get(id).ok_or_else(|| PlanError::MissingTarget(id.clone()))?;
        let offset = goal - start;
        let distance = offset.norm();
        if distance == 0.0 || gain == 0.0 {
            return Err(PlanError::SpanOutOfBounds {
                robot: id.clone(),
                span: 0.0,
            });
        }
        if angle_difference(offset.y.atan2(offset.x), direction).abs() > PARALLEL_TOLERANCE {
            return Err(PlanError::NonParallelTargets { robot: id.clone() });
        }
        let exact = distance / gain;
        let span = match &options.catalog {
            Some(catalog) => nearest(catalog, exact),
            None => exact,
        };
        if let Some((lo, hi)) = options.span_bounds {
            if span < lo || span > hi {
                return Err(PlanError::SpanOutOfBounds {
                    robot: id.clone(),
                    span,
                });
            }
        }
        let residual = (span * gain * unit - offset).norm();
        if residual > options.tolerance {
            return Err(PlanError::ResidualExceedsTolerance {
                what: format!("catalog span for robot '{id}'"),
                residual,
                tolerance: options.tolerance,
            });
        }
        spans.insert(id.clone(), span);
        residuals.insert(id.clone(), residual);
    }
    Ok(FollowerSpans { spans, residuals })
}

fn nearest(catalog: &[f64], value: f64) -> f64 {
    catalog
        .iter()
        .copied()
        .min_by(|a, b| (a - value).abs().total_cmp(&(b - value).abs()).then(a.total_cmp(b)))
        .expect("catalog is non-empty")
}

/// Output of the swarm planner: one walk, one span per robot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSet {
    pub sweep: f64,
    pub half_steps: usize,
    pub heading: f64,
    pub leader: String,
    pub lengths: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
    pub phase: String,
}

impl SolutionSet {
    pub fn line(&self) -> LineSolution {
        LineSolution {
            sweep: self.sweep,
            half_steps: self.half_steps,
            heading: self.heading,
        }
    }

    pub fn schedule(&self) -> Schedule {
        self.line().schedule()
    }

    /// Copies of `robots` with the solved spans.
    pub fn apply_spans(&self, robots: &[RobotSpec]) -> Vec<RobotSpec> {
        robots
            .iter()
            .map(|r| {
                let mut r = r.clone();
                if let Some(&span) = self.lengths.get(&r.id) {
                    r.pivot_span = span;
                    if r.variant == Variant::CenteredMagnet || span > r.body_length {
                        r.body_length = span;
                    }
                }
                r
            })
            .collect()
    }
}

/// Moves every robot from its initial position to its pattern target with one
/// straight walk. The robot with the largest displacement leads.
pub fn plan_swarm(scenario: &Scenario) -> Result<SolutionSet, PlanError> {
    scenario.validate()?;
    let mut starts = BTreeMap::new();
    let mut goals = BTreeMap::new();
    for robot in &scenario.robots {
        let goal = scenario
            .pattern_targets
            .get(&robot.id)
            .ok_or_else(|| PlanError::MissingTarget(robot.id.clone()))?;
        starts.insert(robot.id.clone(), scenario.initial[&robot.id].position());
        goals.insert(robot.id.clone(), *goal);
    }
    let leader = scenario
        .robots
        .iter()
        .map(|r| (r, (goals[&r.id] - starts[&r.id]).norm()))
        .fold(None::<(&RobotSpec, f64)>, |best, (r, d)| match best {
            Some((_, bd)) if bd >= d => best,
            _ => Some((r, d)),
        })
        .map(|(r, _)| r)
        .ok_or_else(|| PlanError::PhaseSolverFailure {
            phase: "pattern".into(),
            reason: "scenario has no robots".into(),
        })?;
    let leader_span = scenario.solver.leader_span.unwrap_or(leader.pivot_span);
    let line = solve_leader_line(starts[&leader.id], goals[&leader.id], leader_span, &scenario.solver)?;
    let (lengths, residuals) = if line.half_steps == 0 {
        // Every robot already sits on its target.
        let lengths = scenario.robots.iter().map(|r| (r.id.clone(), r.pivot_span)).collect();
        let residuals = scenario.robots.iter().map(|r| (r.id.clone(), 0.0)).collect();
        (lengths, residuals)
    } else {
        let followers = solve_follower_lengths(&line, &starts, &goals, &scenario.solver)?;
        (followers.spans, followers.residuals)
    };
    Ok(SolutionSet {
        sweep: line.sweep,
        half_steps: line.half_steps,
        heading: line.heading,
        leader: leader.id.clone(),
        lengths,
        residuals,
        phase: "pattern".into(),
    })
}

/// The pattern walk from [`plan_swarm`] as a plan, followed by a rigid tumble
/// onto the final targets when the scenario has any.
pub fn plan_formation(scenario: &Scenario) -> Result<(SolutionSet, ManeuverPlan), PlanError> {
    let solution = plan_swarm(scenario)?;
    let robots = solution.apply_spans(&scenario.robots);
    let initial = scenario
        .initial
        .iter()
        .map(|(id, p)| (id.clone(), Pose::at(p.position(), solution.heading)))
        .collect();
    let mut plan = ManeuverPlan::new("formation", robots.clone(), initial);
    plan.push_phase(Mode::Pivot, "pivot walk to pattern", solution.schedule())?;
    if !scenario.final_targets.is_empty() {
        let now = plan.current_poses().clone();
        let heading = now.values().next().map_or(0.0, |p| p.heading);
        let from = now.iter().map(|(id, p)| (id.clone(), p.position())).collect();
        let tumble = plan_tumble_translate(&robots, &from, &scenario.final_targets, heading, &scenario.solver)?;
        plan.push_phase(Mode::Tumble, "tumble to final positions", tumble.schedule)?;
    }
    Ok((solution, plan))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternShape {
    Triangle,
    Square,
    Pentagon,
    Hexagon,
}

impl PatternShape {
    pub fn sides(self) -> usize {
        match self {
            PatternShape::Triangle => 3,
            PatternShape::Square => 4,
            PatternShape::Pentagon => 5,
            PatternShape::Hexagon => 6,
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "triangle" => Some(PatternShape::Triangle),
            "square" => Some(PatternShape::Square),
            "pentagon" => Some(PatternShape::Pentagon),
            "hexagon" => Some(PatternShape::Hexagon),
            _ => None,
        }
    }
}

/// Vertices of a regular polygon with the given side length, counterclockwise
/// from `rotation`.
pub fn regular_polygon(shape: PatternShape, side: f64, center: Vec2, rotation: f64) -> Vec<Vec2> {
    let n = shape.sides();
    let radius = side / (2.0 * (PI / n as f64).sin());
    (0..n)
        .map(|i| {
            let a = rotation + 2.0 * PI * i as f64 / n as f64;
            center + radius * Vec2::new(a.cos(), a.sin())
        })
        .collect()
}

/// Start positions from which `line` places each span on its target.
pub fn plan_pattern(
    targets: &[Vec2],
    spans: &[f64],
    line: &LineSolution,
    workspace: Option<&Rect>,
) -> Result<Vec<Vec2>, PlanError> {
    if targets.len() != spans.len() {
        return Err(PlanError::PhaseSolverFailure {
            phase: "pattern".into(),
            reason: format!("{} targets but {} spans", targets.len(), spans.len()),
        });
    }
    targets
        .iter()
        .zip(spans)
        .enumerate()
        .map(|(i, (target, &span))| {
            if span.is_nan() || span <= 0.0 {
                return Err(PlanError::SpanOutOfBounds {
                    robot: format!("#{i}"),
                    span,
                });
            }
            let start = target - line.displacement(span);
            if let Some(ws) = workspace {
                if !ws.contains(start) {
                    return Err(PlanError::WorkspaceViolation(format!(
                        "start ({:.3}, {:.3}) for target #{i} lies outside the workspace",
                        start.x, start.y
                    )));
                }
            }
            Ok(start)
        })
        .collect()
}

/// Tumble steps realizing a common translation, plus what is left over.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TumblePlan {
    /// Signed step count, positive forward.
    pub steps: i64,
    pub residual: Vec2,
    #[serde(skip)]
    pub schedule: Schedule,
}

/// Translates a formation by tumbling along `heading`. All robots must share a
/// body length and the same displacement.
pub fn plan_tumble_translate(
    robots: &[RobotSpec],
    from: &BTreeMap<String, Vec2>,
    to: &BTreeMap<String, Vec2>,
    heading: f64,
    options: &SolverOptions,
) -> Result<TumblePlan, PlanError> {
    let first = robots.first().ok_or_else(|| PlanError::PhaseSolverFailure {
        phase: "tumble".into(),
        reason: "no robots".into(),
    })?;
    let length = first.body_length;
    if let Some(other) = robots.iter().find(|r| (r.body_length - length).abs() > 1e-12 * length) {
        return Err(PlanError::NonRigidTranslation(format!(
            "robot '{}' has body length {} but '{}' has {}",
            other.id, other.body_length, first.id, length
        )));
    }
    let mut translations = Vec::with_capacity(robots.len());
    for robot in robots {
        let a = from
            .get(&robot.id)
            .ok_or_else(|| PlanError::MissingTarget(robot.id.clone()))?;
        let b = to
            .get(&robot.id)
            .ok_or_else(|| PlanError::MissingTarget(robot.id.clone()))?;
        translations.push((robot.id.as_str(), b - a));
    }
    let mean = translations.iter().map(|(_, t)| t).sum::<Vec2>() / translations.len() as f64;
    if let Some((id, _)) = translations.iter().find(|(_, t)| (t - mean).norm() > options.tolerance) {
        return Err(PlanError::NonRigidTranslation(format!(
            "robot '{id}' needs a different translation from the rest"
        )));
    }
    let axis = Vec2::new(heading.cos(), heading.sin());
    let steps = (mean.dot(&axis) / length).round() as i64;
    let residual = mean - steps as f64 * length * axis;
    let tolerance = options.tumble_tolerance.unwrap_or(0.5 * length);
    if residual.norm() > tolerance {
        return Err(PlanError::ResidualExceedsTolerance {
            what: "tumble translation".into(),
            residual: residual.norm(),
            tolerance,
        });
    }
    let direction = if steps >= 0 {
        TumbleDirection::Forward
    } else {
        TumbleDirection::Backward
    };
    let schedule = Schedule::from_steps(
        "tumble",
        vec![StepCommand::tumble(direction); steps.unsigned_abs() as usize],
    );
    Ok(TumblePlan {
        steps,
        residual,
        schedule,
    })
}
