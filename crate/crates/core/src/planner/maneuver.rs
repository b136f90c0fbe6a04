//! Multi-phase maneuvers and the reverse maneuver.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::Range;

use serde::Serialize;

use super::{validate_plan, PlanError, Scenario, Severity};
use crate::kinematics::{
    angle_difference, simulate, KinematicsError, Mode, Pivot, Pose, RobotSpec, Schedule, StepCommand, Trajectory,
    TumbleDirection, Vec2,
};
use crate::paths::{balanced_straight_schedule, invert_increasing, triangle_base_gain, triangle_schedule_with, Side};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phase {
    pub mode: Mode,
    pub intent: String,
    #[serde(skip)]
    pub schedule: Schedule,
    /// Pose of every robot when the phase ends.
    #[serde(skip)]
    pub waypoints: BTreeMap<String, Pose>,
}

/// Ordered phases, each one broadcast schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverPlan {
    pub name: String,
    pub robots: Vec<RobotSpec>,
    pub initial: BTreeMap<String, Pose>,
    pub phases: Vec<Phase>,
}

impl ManeuverPlan {
    pub fn new(name: impl Into<String>, robots: Vec<RobotSpec>, initial: BTreeMap<String, Pose>) -> Self {
        Self {
            name: name.into(),
            robots,
            initial,
            phases: Vec::new(),
        }
    }

    /// Poses after the last phase.
    pub fn current_poses(&self) -> &BTreeMap<String, Pose> {
        self.phases.last().map_or(&self.initial, |p| &p.waypoints)
    }

    /// Appends a phase and records where it leaves each robot.
    pub fn push_phase(
        &mut self,
        mode: Mode,
        intent: impl Into<String>,
        schedule: Schedule,
    ) -> Result<(), KinematicsError> {
        let trajectories = simulate(&self.robots, self.current_poses(), &schedule)?;
        let waypoints = trajectories
            .into_iter()
            .map(|t| (t.robot_id.clone(), t.final_pose()))
            .collect();
        self.phases.push(Phase {
            mode,
            intent: intent.into(),
            schedule,
            waypoints,
        });
        Ok(())
    }

    pub fn schedule(&self) -> Schedule {
        let mut all = Schedule::new(self.name.clone());
        for phase in &self.phases {
            all.append(&phase.schedule);
        }
        all
    }

    pub fn simulate(&self) -> Result<Vec<Trajectory>, KinematicsError> {
        simulate(&self.robots, &self.initial, &self.schedule())
    }

    pub fn final_poses(&self) -> BTreeMap<String, Pose> {
        self.current_poses().clone()
    }

    /// Step index range of every phase within [`ManeuverPlan::schedule`].
    pub fn phase_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.phases
            .iter()
            .map(|p| {
                let range = start..start + p.schedule.len();
                start = range.end;
                range
            })
            .collect()
    }

    /// Index of the phase that contains pose index `pose_index` (1-based steps).
    pub fn phase_of_pose(&self, pose_index: usize) -> Option<usize> {
        if pose_index == 0 {
            return None;
        }
        self.phase_ranges().iter().position(|r| r.contains(&(pose_index - 1)))
    }

    /// The plan run backwards from `start`: phases in reverse order, each with
    /// its schedule inverted.
    pub fn reversed_from(
        &self,
        name: impl Into<String>,
        start: BTreeMap<String, Pose>,
    ) -> Result<ManeuverPlan, KinematicsError> {
        let mut plan = ManeuverPlan::new(name, self.robots.clone(), start);
        for phase in self.phases.iter().rev() {
            let mut schedule = phase.schedule.inverse();
            schedule.label = phase.schedule.label.clone();
            plan.push_phase(phase.mode, format!("{} (reversed)", phase.intent), schedule)?;
        }
        Ok(plan)
    }
}

/// Balanced lateral walk moving each robot by `span * gain`; positive gain walks
/// left of the heading.
pub(crate) fn lateral_walk(gain: f64, max_sweep: f64, max_half_steps: usize) -> Result<Schedule, String> {
    if gain == 0.0 {
        return Ok(Schedule::new("balanced straight"));
    }
    let side = if gain > 0.0 { Side::Left } else { Side::Right };
    let needed = gain.abs();
    let per_step = 2.0 * (0.5 * max_sweep).sin();
    let full_steps = (1..=max_half_steps / 2)
        .find(|&j| j as f64 * per_step >= needed)
        .ok_or_else(|| format!("lateral travel of {needed:.6} per unit span exceeds the step budget"))?;
    let ratio = (needed / (2.0 * full_steps as f64)).min(1.0);
    let sweep = (2.0 * ratio.asin()).min(max_sweep);
    balanced_straight_schedule(sweep, full_steps, side).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReverseOptions {
    /// Lateral gap after the swap; defaults to the initial gap or the final targets.
    pub final_gap: Option<f64>,
    /// Tumbles in the last phase when the scenario has no final targets.
    pub final_tumbles: Option<usize>,
}

const REVERSE_PHASES: [&str; 5] = [
    "pivot walk to channel width",
    "tumble to channel entrance",
    "tumble through channel",
    "pivot walk to final spacing",
    "tumble to final positions",
];

/// Sweep cap for the offset triangles, keeps tilted bodies from swinging wide.
const TRIANGLE_SWEEP_CAP: f64 = PI / 4.0;

fn fail(phase: &str, reason: impl Into<String>) -> PlanError {
    PlanError::PhaseSolverFailure {
        phase: phase.into(),
        reason: reason.into(),
    }
}

/// Swaps the lateral order of two robots that must pass a narrow channel.
///
/// The robots face along the channel. Pivot walking moves them sideways by an
/// amount proportional to their spans, tumbling moves both forward by a body
/// length. The five phases: narrow the lateral gap into the channel band, tumble
/// up to the entrance, tumble through, pass each other sideways after staggering
/// along the axis with a triangle walk, tumble on.
pub fn plan_reverse(scenario: &Scenario, options: &ReverseOptions) -> Result<ManeuverPlan, PlanError> {
    scenario.validate()?;
    if scenario.robots.len() != 2 {
        return Err(fail("setup", "the reverse maneuver moves exactly two robots"));
    }
    let channel = scenario
        .channels
        .first()
        .ok_or_else(|| fail("setup", "scenario has no channel"))?;
    let (a, b) = (&scenario.robots[0], &scenario.robots[1]);
    let length = a.body_length;
    if (a.body_length - b.body_length).abs() > 1e-12 * length {
        return Err(PlanError::NonRigidTranslation(format!(
            "robots '{}' and '{}' have different body lengths",
            a.id, b.id
        )));
    }
    if a.pivot_span == b.pivot_span {
        return Err(PlanError::DegenerateSpans);
    }
    let (pose_a, pose_b) = (scenario.initial[&a.id], scenario.initial[&b.id]);
    if angle_difference(pose_a.heading, pose_b.heading).abs() > 1e-9 {
        return Err(fail("setup", "robots must share a heading"));
    }
    let axis = pose_a.axis();
    if axis.dot(&channel.transit_axis()).abs() < 1.0 - 1e-9 {
        return Err(fail("setup", "robots must face along the channel"));
    }
    let left = Vec2::new(-axis.y, axis.x);
    let local = |p: Vec2| {
        let d = p - channel.center;
        (d.dot(&axis), d.dot(&left))
    };
    let solver = &scenario.solver;
    let min_sep = solver.min_separation;
    let half_wall = 0.5 * channel.wall_thickness;
    let band = 0.5 * solver.channel_margin * channel.width;
    let (span_a, span_b) = (a.pivot_span, b.pivot_span);
    let (s_a, c_a) = local(pose_a.position());
    let (s_b, c_b) = local(pose_b.position());
    if s_a.max(s_b) + 0.5 * length + min_sep > -half_wall {
        return Err(fail("setup", "robots must start in front of the channel"));
    }
    if c_a == c_b {
        return Err(fail(REVERSE_PHASES[0], "robots have no lateral gap"));
    }

    // Phase 1: one lateral gain for both robots, constrained to the band.
    let sigma = (c_b - c_a).signum();
    let separation = (2.0 * min_sep).max(1e-9);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (c, p) in [(c_a, span_a), (c_b, span_b)] {
        lo = lo.max((-band - c) / p);
        hi = hi.min((band - c) / p);
    }
    let slope = sigma * (span_b - span_a);
    let base = sigma * (c_b - c_a);
    if slope > 0.0 {
        lo = lo.max((separation - base) / slope);
    } else {
        hi = hi.min((separation - base) / slope);
    }
    if lo > hi {
        return Err(PlanError::ChannelTooNarrow(format!(
            "no common pivot walk puts both robots within {band:.3} mm of the channel axis while keeping them {separation:.3} mm apart"
        )));
    }
    let gap_at = |g: f64| (c_b - c_a) + (span_b - span_a) * g;
    let gain1 = if lo <= 0.0 && 0.0 <= hi {
        0.0
    } else if gap_at(lo).abs() >= gap_at(hi).abs() {
        lo
    } else {
        hi
    };
    let phase1 =
        lateral_walk(gain1, solver.max_sweep, solver.max_half_steps).map_err(|e| fail(REVERSE_PHASES[0], e))?;
    let gap1 = gap_at(gain1);

    // Phase 4 needs an axial stagger of more than a body length so the robots
    // can pass each other sideways.
    let (big_is_b, delta_span) = (span_b > span_a, (span_b - span_a).abs());
    let stagger = if big_is_b { s_b - s_a } else { s_a - s_b };
    let needed = length + 2.0 * min_sep + 0.5 * span_a.max(span_b);
    let forward_gain = (needed - stagger).max(0.0) / delta_span;
    let backward_gain = (needed + stagger).max(0.0) / delta_span;
    let (lead, gain4) = if forward_gain <= backward_gain {
        (Pivot::Front, forward_gain)
    } else {
        (Pivot::Back, backward_gain)
    };
    let triangle = if gain4 > 0.0 {
        let cap = solver.max_sweep.min(TRIANGLE_SWEEP_CAP);
        let per_step = 1.0 - cap.cos();
        let k = (2..=solver.max_half_steps)
            .step_by(2)
            .find(|&k| k as f64 * per_step >= gain4)
            .ok_or_else(|| fail(REVERSE_PHASES[3], "axial stagger needs too many half-steps"))?;
        let sweep = invert_increasing(|t| triangle_base_gain(t, k), gain4, 0.0, cap);
        Some((sweep, k))
    } else {
        None
    };
    let back_room = match (lead, triangle) {
        (Pivot::Back, Some((sweep, k))) => span_a.max(span_b) * triangle_base_gain(sweep, k),
        _ => 0.0,
    };

    // Phases 2 and 3: whole tumbles up to and through the channel.
    let entry = -half_wall - min_sep;
    let front = s_a.max(s_b) + 0.5 * length;
    let n2 = ((entry - front) / length).floor().max(0.0) as usize;
    let exit = half_wall + min_sep + back_room;
    let back = s_a.min(s_b) + n2 as f64 * length - 0.5 * length;
    let n3 = ((exit - back) / length).ceil().max(0.0) as usize;

    // Phase 4: stagger, pass, unstagger.
    let target_gap = match (
        scenario.final_targets.get(&a.id),
        scenario.final_targets.get(&b.id),
        options.final_gap,
    ) {
        (_, _, Some(gap)) => -sigma * gap.abs(),
        (Some(qa), Some(qb), None) => {
            let gap = (qb - qa).dot(&left);
            if gap.signum() != -sigma {
                return Err(fail(REVERSE_PHASES[3], "final targets do not swap the robots"));
            }
            gap
        }
        _ => -(c_b - c_a),
    };
    let gain_pass = (target_gap - gap1) / (span_b - span_a);
    let passing =
        lateral_walk(gain_pass, solver.max_sweep, solver.max_half_steps).map_err(|e| fail(REVERSE_PHASES[3], e))?;
    let away_side = |gap: f64| {
        // Move the larger-span robot away from the other one.
        let big_above = if big_is_b { gap > 0.0 } else { gap < 0.0 };
        if big_above {
            Side::Left
        } else {
            Side::Right
        }
    };
    let mut phase4 = Schedule::new("stagger, pass, unstagger");
    if let Some((sweep, k)) = triangle {
        phase4.append(&triangle_schedule_with(sweep, k, lead, away_side(gap1))?);
    }
    phase4.append(&passing);
    if let Some((sweep, k)) = triangle {
        phase4.append(&triangle_schedule_with(sweep, k, lead.other(), away_side(target_gap))?);
    }

    let mut plan = ManeuverPlan::new("reverse", scenario.robots.clone(), scenario.initial.clone());
    plan.push_phase(Mode::Pivot, REVERSE_PHASES[0], phase1)?;
    plan.push_phase(Mode::Tumble, REVERSE_PHASES[1], tumbles(n2 as i64))?;
    plan.push_phase(Mode::Tumble, REVERSE_PHASES[2], tumbles(n3 as i64))?;
    plan.push_phase(Mode::Pivot, REVERSE_PHASES[3], phase4)?;

    let n5 = match (scenario.final_targets.get(&a.id), scenario.final_targets.get(&b.id)) {
        (Some(qa), Some(qb)) => {
            let now = plan.current_poses();
            let mean = 0.5 * ((qa - now[&a.id].position()) + (qb - now[&b.id].position()));
            (mean.dot(&axis) / length).round() as i64
        }
        _ => options.final_tumbles.unwrap_or(1) as i64,
    };
    plan.push_phase(Mode::Tumble, REVERSE_PHASES[4], tumbles(n5))?;
    check_plan(&plan, scenario)?;
    Ok(plan)
}

pub(crate) fn tumbles(count: i64) -> Schedule {
    let direction = if count >= 0 {
        TumbleDirection::Forward
    } else {
        TumbleDirection::Backward
    };
    Schedule::from_steps(
        "tumble",
        vec![StepCommand::tumble(direction); count.unsigned_abs() as usize],
    )
}

/// Rejects plans whose simulation collides or leaves the workspace.
pub(crate) fn check_plan(plan: &ManeuverPlan, scenario: &Scenario) -> Result<(), PlanError> {
    let report = validate_plan(plan, scenario);
    match report.findings.iter().find(|f| f.severity == Severity::Error) {
        None => Ok(()),
        Some(finding) => {
            let phase = finding
                .step
                .and_then(|s| plan.phase_of_pose(s))
                .map_or_else(|| "initial state".to_string(), |i| plan.phases[i].intent.clone());
            Err(PlanError::PhaseSolverFailure {
                phase,
                reason: finding.message.clone(),
            })
        }
    }
}
