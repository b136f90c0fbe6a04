//! Expansion and contraction of a formation through a channel.
//!
//! Every pivot schedule moves a robot of span `P` by `P` times a vector that only
//! depends on the schedule, so the whole maneuver can only realize targets of
//! the form `start + P * v` with one common `v`. The phases split `v` into:
//!
//! 1. a circular arc that lines the bodies up across the channel opening,
//! 2. a heading-preserving straight walk through the channel,
//! 3. an inclined straight walk,
//! 4. a circular arc that absorbs whatever is left.
//!
//! Phase 1 comes from a grid over sweep pairs, phase 4 from Newton's method on
//! the two sweeps. Without a channel only phases 3 and 4 remain.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use nalgebra::{Matrix2, Rotation2};

use super::maneuver::check_plan;
use super::{Channel, ManeuverPlan, PlanError, Scenario};
use crate::kinematics::{normalize_angle, pivot_half_step, Mode, Pivot, Pose, RobotSpec, Schedule, StepCommand, Vec2};
use crate::paths::{
    balanced_straight_schedule, straight_displacement, straight_heading_change, straight_schedule_on, Side,
};

const PHASES: [&str; 4] = [
    "circular approach",
    "channel transit",
    "inclined straight",
    "circular placement",
];
const MAX_CIRCLE_STEPS: usize = 12;
const MAX_INCLINED_STEPS: usize = 10;
const MAX_APPROACH_CANDIDATES: usize = 300;
const TRANSIT_SWEEP: f64 = PI / 6.0;

#[derive(Debug, Clone, Copy)]
struct Circle {
    first: f64,
    second: f64,
    full_steps: usize,
    side: Side,
}

impl Circle {
    fn closing(&self) -> f64 {
        let k = self.full_steps as f64;
        PI - (k * self.first - (k - 1.0) * self.second)
    }

    fn schedule(&self) -> Schedule {
        let sign = match self.side {
            Side::Right => 1.0,
            Side::Left => -1.0,
        };
        let mut steps: Vec<StepCommand> = (1..2 * self.full_steps)
            .map(|i| {
                if i % 2 == 1 {
                    StepCommand::pivot(Pivot::Front, sign * self.first)
                } else {
                    StepCommand::pivot(Pivot::Back, -sign * self.second)
                }
            })
            .collect();
        steps.push(StepCommand::pivot(Pivot::Back, sign * self.closing()));
        Schedule::from_steps("circle", steps)
    }

    fn valid(&self, max_sweep: f64) -> bool {
        let closing = self.closing();
        self.first > 0.0
            && self.first <= max_sweep
            && self.second > 0.0
            && self.second <= max_sweep
            && (self.first - self.second).abs() > 1e-9
            && closing > 0.0
            && closing <= max_sweep
    }

    /// Displacement per unit span from heading 0.
    fn displacement(&self) -> Vec2 {
        let mut pose = Pose::new(0.0, 0.0, 0.0);
        for step in &self.schedule().steps {
            if let StepCommand::PivotHalfStep { pivot, sweep } = *step {
                pose = pivot_half_step(pose, pivot, sweep, 1.0).expect("sweeps are in range");
            }
        }
        pose.position()
    }
}

fn mirror(v: Vec2, side: Side) -> Vec2 {
    match side {
        Side::Right => v,
        Side::Left => Vec2::new(v.x, -v.y),
    }
}

/// Displacements of all closed circles on a one-degree grid.
struct CircleTable {
    entries: Vec<(Circle, Vec2)>,
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl CircleTable {
    fn build(max_sweep: f64) -> Self {
        let grid: Vec<f64> = (1..)
            .map(|d| (d as f64).to_radians())
            .take_while(|&t| t <= max_sweep + 1e-12)
            .collect();
        let mut entries = Vec::new();
        for &first in &grid {
            for &second in &grid {
                if first == second {
                    continue;
                }
                let mut pose = Pose::new(0.0, 0.0, 0.0);
                for k in 1..=MAX_CIRCLE_STEPS {
                    if k > 1 {
                        pose = pivot_half_step(pose, Pivot::Back, -second, 1.0).expect("grid sweeps are in range");
                    }
                    pose = pivot_half_step(pose, Pivot::Front, first, 1.0).expect("grid sweeps are in range");
                    let circle = Circle {
                        first,
                        second,
                        full_steps: k,
                        side: Side::Right,
                    };
                    let closing = circle.closing();
                    if closing <= 0.0 || closing >= PI {
                        break;
                    }
                    if !circle.valid(max_sweep) {
                        continue;
                    }
                    let end = pivot_half_step(pose, Pivot::Back, closing, 1.0).expect("closing sweep is in range");
                    for side in [Side::Right, Side::Left] {
                        entries.push((Circle { side, ..circle }, mirror(end.position(), side)));
                    }
                }
            }
        }
        let cell = 0.25;
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, (_, d)) in entries.iter().enumerate() {
            buckets.entry(Self::key(cell, *d)).or_default().push(i);
        }
        Self { entries, cell, buckets }
    }

    fn key(cell: f64, v: Vec2) -> (i64, i64) {
        ((v.x / cell).floor() as i64, (v.y / cell).floor() as i64)
    }

    /// Closest grid circle to `target`.
    fn nearest(&self, target: Vec2) -> Option<usize> {
        let (cx, cy) = Self::key(self.cell, target);
        let mut best: Option<(f64, usize)> = None;
        for ring in 0..400i64 {
            for x in cx - ring..=cx + ring {
                for y in cy - ring..=cy + ring {
                    if (x - cx).abs() != ring && (y - cy).abs() != ring {
                        continue;
                    }
                    for &i in self.buckets.get(&(x, y)).into_iter().flatten() {
                        let d = (self.entries[i].1 - target).norm();
                        if best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
                            best = Some((d, i));
                        }
                    }
                }
            }
            if let Some((d, _)) = best {
                if d <= ring as f64 * self.cell {
                    break;
                }
            }
        }
        best.map(|(_, i)| i)
    }
}

/// Newton iteration on the two sweeps of a circle with fixed step count and
/// side until its displacement equals `target`.
fn solve_circle(start: Circle, target: Vec2, max_sweep: f64) -> Option<Circle> {
    let residual = |c: &Circle| c.displacement() - target;
    let mut current = start;
    let mut f = residual(&current);
    for _ in 0..100 {
        if f.norm() < 1e-12 {
            return Some(current);
        }
        let h = 1e-7;
        let d1 = (residual(&Circle {
            first: current.first + h,
            ..current
        }) - f)
            / h;
        let d2 = (residual(&Circle {
            second: current.second + h,
            ..current
        }) - f)
            / h;
        let jacobian = Matrix2::new(d1.x, d2.x, d1.y, d2.y);
        let mut step = jacobian.try_inverse()? * (-f);
        if step.norm() > 0.1 {
            step *= 0.1 / step.norm();
        }
        let mut accepted = false;
        for _ in 0..20 {
            let trial = Circle {
                first: current.first + step.x,
                second: current.second + step.y,
                ..current
            };
            if trial.valid(max_sweep) {
                let ft = residual(&trial);
                if ft.norm() < f.norm() {
                    current = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    (f.norm() < 1e-10).then_some(current)
}

#[derive(Debug, Clone, Copy)]
struct Inclined {
    sweep: f64,
    half_steps: usize,
    side: Side,
}

impl Inclined {
    fn displacement(&self) -> Vec2 {
        mirror(
            straight_displacement(1.0, self.sweep, self.half_steps).expect("valid straight walk"),
            self.side,
        )
    }

    fn heading_change(&self) -> f64 {
        let change = straight_heading_change(self.sweep, self.half_steps, Pivot::Front);
        match self.side {
            Side::Right => change,
            Side::Left => -change,
        }
    }

    fn schedule(&self) -> Schedule {
        straight_schedule_on(self.sweep, self.half_steps, Pivot::Front, self.side).expect("valid straight walk")
    }
}

/// Inclined walks to try, shortest first. `None`, no walk at all, comes last.
fn inclined_candidates(max_sweep: f64, required_turn: Option<f64>) -> Vec<Option<Inclined>> {
    match required_turn {
        Some(turn) if turn.abs() < 1e-12 => vec![None],
        Some(turn) => {
            let sweep = 2.0 * turn.abs();
            if sweep > max_sweep {
                return Vec::new();
            }
            (1..=MAX_INCLINED_STEPS)
                .map(|k| {
                    let odd = k % 2 == 1;
                    let side = if odd == (turn > 0.0) { Side::Right } else { Side::Left };
                    Some(Inclined {
                        sweep,
                        half_steps: k,
                        side,
                    })
                })
                .collect()
        }
        None => {
            let mut out = Vec::new();
            for k in 1..=MAX_INCLINED_STEPS {
                for degrees in (10..=90).step_by(10) {
                    let sweep = (degrees as f64).to_radians();
                    if sweep > max_sweep + 1e-12 {
                        continue;
                    }
                    for side in [Side::Right, Side::Left] {
                        out.push(Some(Inclined {
                            sweep,
                            half_steps: k,
                            side,
                        }));
                    }
                }
            }
            out.push(None);
            out
        }
    }
}

struct Problem<'a> {
    scenario: &'a Scenario,
    robots: Vec<RobotSpec>,
    starts: BTreeMap<String, Vec2>,
    /// Common displacement per unit span.
    total: Vec2,
    /// Heading the last phase must end with, if any.
    end_heading: Option<f64>,
    table: CircleTable,
}

impl Problem<'_> {
    fn initial(&self, heading: f64) -> BTreeMap<String, Pose> {
        self.starts
            .iter()
            .map(|(id, p)| (id.clone(), Pose::at(*p, heading)))
            .collect()
    }

    /// Phases 3 and 4 on top of `prefix`, trying inclined walks in order.
    fn finish(
        &self,
        prefix: &ManeuverPlan,
        heading: f64,
        remaining: Vec2,
        inclined: &[Option<Inclined>],
        accept: &dyn Fn(&ManeuverPlan) -> Result<ManeuverPlan, PlanError>,
    ) -> Option<ManeuverPlan> {
        let max_sweep = self.scenario.solver.max_sweep;
        for candidate in inclined {
            let (walk, turn) = match candidate {
                Some(c) => (Rotation2::new(heading) * c.displacement(), c.heading_change()),
                None => (Vec2::zeros(), 0.0),
            };
            let circle_heading = heading + turn;
            let target = Rotation2::new(-circle_heading) * (remaining - walk);
            let Some(guess) = self.table.nearest(target) else {
                continue;
            };
            let Some(circle) = solve_circle(self.table.entries[guess].0, target, max_sweep) else {
                continue;
            };
            let mut plan = prefix.clone();
            let schedule = candidate.map_or_else(|| Schedule::new("straight"), |c| c.schedule());
            if plan.push_phase(Mode::Pivot, PHASES[2], schedule).is_err()
                || plan.push_phase(Mode::Pivot, PHASES[3], circle.schedule()).is_err()
            {
                continue;
            }
            if let Ok(done) = accept(&plan) {
                return Some(done);
            }
        }
        None
    }
}

fn fail(phase: &str, reason: impl Into<String>) -> PlanError {
    PlanError::PhaseSolverFailure {
        phase: phase.into(),
        reason: reason.into(),
    }
}

fn solve(
    problem: &Problem,
    start_heading: Option<f64>,
    accept: &dyn Fn(&ManeuverPlan) -> Result<ManeuverPlan, PlanError>,
) -> Result<ManeuverPlan, PlanError> {
    let scenario = problem.scenario;
    let solver = &scenario.solver;
    let Some(channel) = scenario.channels.first() else {
        return solve_open(problem, start_heading, accept);
    };
    let centroid = problem.starts.values().sum::<Vec2>() / problem.starts.len() as f64;
    let (along, _) = channel.to_local(centroid);
    let travel = if along < 0.0 {
        channel.transit_axis()
    } else {
        -channel.transit_axis()
    };
    let travel_angle = travel.y.atan2(travel.x);
    // Bodies lie across the channel after the half turn of the approach arc.
    let headings = match start_heading {
        Some(h) => {
            let across = (normalize_angle(h + PI - travel_angle).abs() - 0.5 * PI).abs() < 1e-9;
            if !across {
                return Err(fail(PHASES[0], "robot bodies must end up across the channel"));
            }
            vec![h]
        }
        None => vec![travel_angle - 0.5 * PI, travel_angle + 0.5 * PI],
    };
    let transit_sweep = solver.max_sweep.min(TRANSIT_SWEEP);
    let mut last_reason = String::from("no approach arc lines the robots up in front of the channel");
    for heading in headings {
        let walk_heading = heading + PI;
        let axis = Vec2::new(walk_heading.cos(), walk_heading.sin());
        // A right-hand walk moves toward the axis turned clockwise.
        let side = if Vec2::new(axis.y, -axis.x).dot(&travel) > 0.0 {
            Side::Right
        } else {
            Side::Left
        };
        let inclined = inclined_candidates(
            solver.max_sweep,
            problem.end_heading.map(|end| normalize_angle(end - PI - walk_heading)),
        );
        if inclined.is_empty() {
            continue;
        }
        let approaches = approach_candidates(problem, channel, heading, travel, transit_sweep);
        if approaches.is_empty() {
            continue;
        }
        for (circle, transit_steps) in approaches.into_iter().take(MAX_APPROACH_CANDIDATES) {
            let mut prefix = ManeuverPlan::new("expansion", problem.robots.clone(), problem.initial(heading));
            prefix.push_phase(Mode::Pivot, PHASES[0], circle.schedule())?;
            let transit = if transit_steps == 0 {
                Schedule::new("balanced straight")
            } else {
                balanced_straight_schedule(transit_sweep, transit_steps, side)?
            };
            prefix.push_phase(Mode::Pivot, PHASES[1], transit)?;
            if let Err(e) = check_plan(&prefix, scenario) {
                last_reason = e.to_string();
                continue;
            }
            let moved = Rotation2::new(heading) * circle.displacement()
                + travel * 2.0 * transit_steps as f64 * (0.5 * transit_sweep).sin();
            if let Some(plan) = problem.finish(&prefix, walk_heading, problem.total - moved, &inclined, accept) {
                return Ok(plan);
            }
            last_reason = "no placement arc reaches the targets without collisions".into();
        }
    }
    Err(fail(PHASES[3], last_reason))
}

/// Approach arcs that line all bodies up across the opening with the faster
/// robots ahead, paired with the number of transit steps that clears the walls.
fn approach_candidates(
    problem: &Problem,
    channel: &Channel,
    heading: f64,
    travel: Vec2,
    transit_sweep: f64,
) -> Vec<(Circle, usize)> {
    let solver = &problem.scenario.solver;
    let cross = Vec2::new(-travel.y, travel.x);
    let band = 0.5 * solver.channel_margin * channel.width;
    let half_wall = 0.5 * channel.wall_thickness;
    let tilt = (0.5 * transit_sweep).sin();
    let wiggle = 1.0 - (0.5 * transit_sweep).cos();
    let per_step = 2.0 * tilt;
    let rotation = Rotation2::new(heading);
    let mut found: Vec<(f64, Circle, usize)> = Vec::new();
    for (circle, disp) in &problem.table.entries {
        let v = rotation * disp;
        let mut placed: Vec<(f64, f64, &RobotSpec)> = Vec::with_capacity(problem.robots.len());
        let mut ok = true;
        for robot in &problem.robots {
            let p = problem.starts[&robot.id] + robot.pivot_span * v;
            let d = p - channel.center;
            let (s, c) = (d.dot(&travel), d.dot(&cross));
            if c.abs() + 0.5 * robot.body_length + 0.5 * robot.pivot_span * wiggle > band
                || !problem.scenario.workspace.contains(p)
            {
                ok = false;
                break;
            }
            placed.push((s, robot.pivot_span, robot));
        }
        if !ok {
            continue;
        }
        placed.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ordered = placed.windows(2).all(|w| {
            let gap = w[1].0 - w[0].0;
            let needed = solver.min_separation + 0.5 * (w[0].2.body_length + w[1].2.body_length) * tilt;
            w[1].1 >= w[0].1 && gap >= needed
        });
        if !ordered {
            continue;
        }
        let steps = placed
            .iter()
            .map(|(s, span, robot)| {
                let exit = half_wall + solver.min_separation + 0.5 * robot.body_length;
                ((exit - s) / (span * per_step)).ceil().max(0.0) as usize
            })
            .max()
            .unwrap_or(0);
        if 2 * steps + 1 > solver.max_half_steps {
            continue;
        }
        found.push((disp.norm(), *circle, steps));
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    found.into_iter().map(|(_, c, s)| (c, s)).collect()
}

fn solve_open(
    problem: &Problem,
    start_heading: Option<f64>,
    accept: &dyn Fn(&ManeuverPlan) -> Result<ManeuverPlan, PlanError>,
) -> Result<ManeuverPlan, PlanError> {
    let solver = &problem.scenario.solver;
    for candidate in inclined_candidates(solver.max_sweep, None) {
        let turn = candidate.map_or(0.0, |c| c.heading_change());
        let heading = match (start_heading, problem.end_heading) {
            (Some(h), _) => h,
            (None, Some(end)) => end - PI - turn,
            (None, None) => 0.0,
        };
        let prefix = ManeuverPlan::new(
            "expansion",
            problem.robots.clone(),
            problem.initial(normalize_angle(heading)),
        );
        if let Some(plan) = problem.finish(&prefix, heading, problem.total, &[candidate], accept) {
            return Ok(plan);
        }
    }
    Err(fail(PHASES[3], "no straight walk and placement arc reach the targets"))
}

/// Common displacement per unit span from `from` to `to`.
fn common_displacement(
    robots: &[RobotSpec],
    from: &BTreeMap<String, Vec2>,
    to: &BTreeMap<String, Vec2>,
    tolerance: f64,
) -> Result<Vec2, PlanError> {
    let per_span: Vec<(&RobotSpec, Vec2)> = robots
        .iter()
        .map(|r| {
            let goal = to.get(&r.id).ok_or_else(|| PlanError::MissingTarget(r.id.clone()))?;
            Ok((r, (goal - from[&r.id]) / r.pivot_span))
        })
        .collect::<Result<_, PlanError>>()?;
    let mean = per_span.iter().map(|(_, v)| v).sum::<Vec2>() / per_span.len() as f64;
    if let Some((robot, _)) = per_span
        .iter()
        .find(|(r, v)| (v - mean).norm() * r.pivot_span > tolerance)
    {
        return Err(PlanError::NonParallelTargets {
            robot: robot.id.clone(),
        });
    }
    Ok(mean)
}

fn check_targets(scenario: &Scenario) -> Result<(), PlanError> {
    for robot in &scenario.robots {
        let q = scenario
            .final_targets
            .get(&robot.id)
            .ok_or_else(|| PlanError::MissingTarget(robot.id.clone()))?;
        if !scenario.workspace.contains(*q) {
            return Err(PlanError::WorkspaceViolation(format!(
                "target of robot '{}' lies outside the workspace",
                robot.id
            )));
        }
        if scenario.channels.iter().flat_map(|c| c.walls()).any(|w| w.contains(*q)) {
            return Err(PlanError::WorkspaceViolation(format!(
                "target of robot '{}' lies inside a wall",
                robot.id
            )));
        }
    }
    Ok(())
}

fn common_heading(scenario: &Scenario) -> Result<f64, PlanError> {
    let first = scenario
        .robots
        .first()
        .ok_or_else(|| fail("setup", "scenario has no robots"))?;
    let heading = scenario.initial[&first.id].heading;
    if scenario
        .robots
        .iter()
        .any(|r| crate::kinematics::angle_difference(scenario.initial[&r.id].heading, heading).abs() > 1e-9)
    {
        return Err(fail("setup", "robots must share a heading"));
    }
    Ok(heading)
}

/// Moves a compact formation through the channel onto expanded targets.
pub fn plan_expansion(scenario: &Scenario) -> Result<ManeuverPlan, PlanError> {
    scenario.validate()?;
    check_targets(scenario)?;
    let heading = common_heading(scenario)?;
    let starts: BTreeMap<String, Vec2> = scenario
        .initial
        .iter()
        .map(|(id, p)| (id.clone(), p.position()))
        .collect();
    let total = common_displacement(
        &scenario.robots,
        &starts,
        &scenario.final_targets,
        scenario.solver.tolerance,
    )?;
    let problem = Problem {
        scenario,
        robots: scenario.robots.clone(),
        starts,
        total,
        end_heading: None,
        table: CircleTable::build(scenario.solver.max_sweep),
    };
    let accept = |plan: &ManeuverPlan| -> Result<ManeuverPlan, PlanError> {
        check_plan(plan, scenario)?;
        Ok(plan.clone())
    };
    solve(&problem, Some(heading), &accept)
}

/// The expansion run backwards: solved from the compact targets out to the
/// expanded starts, then inverted phase by phase.
pub fn plan_contraction(scenario: &Scenario) -> Result<ManeuverPlan, PlanError> {
    scenario.validate()?;
    check_targets(scenario)?;
    let heading = common_heading(scenario)?;
    let starts: BTreeMap<String, Vec2> = scenario
        .initial
        .iter()
        .map(|(id, p)| (id.clone(), p.position()))
        .collect();
    let total = common_displacement(
        &scenario.robots,
        &scenario.final_targets,
        &starts,
        scenario.solver.tolerance,
    )?;
    let problem = Problem {
        scenario,
        robots: scenario.robots.clone(),
        starts: scenario.final_targets.clone(),
        total,
        end_heading: Some(heading),
        table: CircleTable::build(scenario.solver.max_sweep),
    };
    let accept = |forward: &ManeuverPlan| -> Result<ManeuverPlan, PlanError> {
        let mut plan = forward.reversed_from("contraction", scenario.initial.clone())?;
        for phase in &mut plan.phases {
            phase.intent = phase.intent.replace(" (reversed)", "");
        }
        check_plan(&plan, scenario)?;
        Ok(plan)
    };
    solve(&problem, None, &accept)
}
