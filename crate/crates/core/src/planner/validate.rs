//! Collision, obstacle and workspace checks for a simulated plan.
//!
//! Bodies are zero-width segments of length `L` about the midpoint. Pivot
//! rotations are sampled every 2 degrees; a tumble flip is checked against
//! obstacles as the whole segment it sweeps over.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{ManeuverPlan, Rect, Scenario};
use crate::kinematics::{pivot_half_step, Pose, StepCommand, TumbleDirection, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    Collision,
    ObstacleContact,
    OutsideWorkspace,
    TerminalError,
    Simulation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub kind: FindingKind,
    /// Pose index: 0 is the initial state, `i` is the state during or after step `i`.
    pub step: Option<usize>,
    pub robots: Vec<String>,
    pub value: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub min_pairwise_distance: Option<f64>,
    pub min_obstacle_clearance: Option<f64>,
    pub workspace_contained: bool,
    pub terminal_errors: BTreeMap<String, f64>,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    /// Findings at warning level or above.
    pub fn violations(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity >= Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + t * ab)).norm()
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn segments_intersect(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let d1 = cross(a1 - a0, b0 - a0);
    let d2 = cross(a1 - a0, b1 - a0);
    let d3 = cross(b1 - b0, a0 - b0);
    let d4 = cross(b1 - b0, a1 - b0);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Shortest distance between segments `a0-a1` and `b0-b1`.
pub fn segment_distance(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> f64 {
    if segments_intersect(a0, a1, b0, b1) {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

/// Shortest distance between a segment and a filled rectangle.
pub fn segment_rect_distance(a: Vec2, b: Vec2, rect: &Rect) -> f64 {
    if rect.contains(a) || rect.contains(b) {
        return 0.0;
    }
    let corners = [
        rect.min,
        Vec2::new(rect.max.x, rect.min.y),
        rect.max,
        Vec2::new(rect.min.x, rect.max.y),
    ];
    (0..4)
        .map(|i| segment_distance(a, b, corners[i], corners[(i + 1) % 4]))
        .fold(f64::INFINITY, f64::min)
}

const SAMPLE_SWEEP: f64 = 2.0 * std::f64::consts::PI / 180.0;

struct Sample {
    pose_index: usize,
    /// Body segment of every robot, in plan order.
    bodies: Vec<(Vec2, Vec2)>,
    /// Segments checked against obstacles and the workspace.
    swept: Vec<(Vec2, Vec2)>,
}

fn body(pose: &Pose, length: f64) -> (Vec2, Vec2) {
    pose.end_points(length)
}

/// Checks a plan against the scenario's obstacles, workspace and targets.
pub fn validate_plan(plan: &ManeuverPlan, scenario: &Scenario) -> ValidationReport {
    let min_sep = scenario.solver.min_separation;
    let mut findings = Vec::new();
    let robots = &plan.robots;
    let trajectories = match plan.simulate() {
        Ok(t) => t,
        Err(e) => {
            findings.push(Finding {
                severity: Severity::Error,
                kind: FindingKind::Simulation,
                step: None,
                robots: Vec::new(),
                value: f64::NAN,
                message: e.to_string(),
            });
            return ValidationReport {
                min_pairwise_distance: None,
                min_obstacle_clearance: None,
                workspace_contained: false,
                terminal_errors: BTreeMap::new(),
                findings,
            };
        }
    };
    let schedule = plan.schedule();

    let mut samples = Vec::new();
    samples.push(Sample {
        pose_index: 0,
        bodies: trajectories
            .iter()
            .zip(robots)
            .map(|(t, r)| body(&t.poses[0], r.body_length))
            .collect(),
        swept: trajectories
            .iter()
            .zip(robots)
            .map(|(t, r)| body(&t.poses[0], r.body_length))
            .collect(),
    });
    for (i, step) in schedule.steps.iter().enumerate() {
        match *step {
            StepCommand::PivotHalfStep { pivot, sweep } => {
                let parts = ((sweep.abs() / SAMPLE_SWEEP).ceil() as usize).max(1);
                for j in 1..=parts {
                    let fraction = j as f64 / parts as f64;
                    let bodies: Vec<_> = trajectories
                        .iter()
                        .zip(robots)
                        .map(|(t, r)| {
                            let pose = if j == parts {
                                t.poses[i + 1]
                            } else {
                                pivot_half_step(t.poses[i], pivot, sweep * fraction, r.pivot_span)
                                    .expect("the full step already succeeded")
                            };
                            body(&pose, r.body_length)
                        })
                        .collect();
                    samples.push(Sample {
                        pose_index: i + 1,
                        swept: bodies.clone(),
                        bodies,
                    });
                }
            }
            StepCommand::TumbleStep { direction } => {
                let bodies: Vec<_> = trajectories
                    .iter()
                    .zip(robots)
                    .map(|(t, r)| body(&t.poses[i + 1], r.body_length))
                    .collect();
                let swept = trajectories
                    .iter()
                    .zip(robots)
                    .map(|(t, r)| {
                        let before = t.poses[i];
                        let half = 0.5 * r.body_length * before.axis();
                        let forward = direction == TumbleDirection::Forward;
                        let lead = if forward {
                            t.poses[i + 1].position() + half
                        } else {
                            t.poses[i + 1].position() - half
                        };
                        let tail = if forward {
                            before.position() - half
                        } else {
                            before.position() + half
                        };
                        (tail, lead)
                    })
                    .collect();
                samples.push(Sample {
                    pose_index: i + 1,
                    bodies,
                    swept,
                });
            }
        }
    }

    let mut min_pair: Option<f64> = None;
    let mut reported_pairs = BTreeMap::new();
    let mut min_clearance: Option<f64> = None;
    let mut reported_contacts = BTreeMap::new();
    let mut reported_outside = BTreeMap::new();
    let walls: Vec<Rect> = scenario.channels.iter().flat_map(|c| c.walls()).collect();
    for sample in &samples {
        for a in 0..robots.len() {
            for b in a + 1..robots.len() {
                let (a0, a1) = sample.bodies[a];
                let (b0, b1) = sample.bodies[b];
                let d = segment_distance(a0, a1, b0, b1);
                min_pair = Some(min_pair.map_or(d, |m| m.min(d)));
                if d < min_sep && !reported_pairs.contains_key(&(a, b)) {
                    reported_pairs.insert((a, b), ());
                    findings.push(Finding {
                        severity: Severity::Error,
                        kind: FindingKind::Collision,
                        step: Some(sample.pose_index),
                        robots: vec![robots[a].id.clone(), robots[b].id.clone()],
                        value: d,
                        message: format!(
                            "robots '{}' and '{}' come within {:.6} mm",
                            robots[a].id, robots[b].id, d
                        ),
                    });
                }
            }
        }
        for (r, &(p, q)) in sample.swept.iter().enumerate() {
            for (w, wall) in walls.iter().enumerate() {
                let d = segment_rect_distance(p, q, wall);
                min_clearance = Some(min_clearance.map_or(d, |m| m.min(d)));
                if d < min_sep && !reported_contacts.contains_key(&(r, w)) {
                    reported_contacts.insert((r, w), ());
                    findings.push(Finding {
                        severity: Severity::Error,
                        kind: FindingKind::ObstacleContact,
                        step: Some(sample.pose_index),
                        robots: vec![robots[r].id.clone()],
                        value: d,
                        message: format!("robot '{}' comes within {:.6} mm of wall {}", robots[r].id, d, w),
                    });
                }
            }
            if !(scenario.workspace.contains(p) && scenario.workspace.contains(q)) && !reported_outside.contains_key(&r)
            {
                reported_outside.insert(r, ());
                findings.push(Finding {
                    severity: Severity::Error,
                    kind: FindingKind::OutsideWorkspace,
                    step: Some(sample.pose_index),
                    robots: vec![robots[r].id.clone()],
                    value: 0.0,
                    message: format!("robot '{}' leaves the workspace", robots[r].id),
                });
            }
        }
    }

    let targets = if scenario.final_targets.is_empty() {
        &scenario.pattern_targets
    } else {
        &scenario.final_targets
    };
    let mut terminal_errors = BTreeMap::new();
    for t in &trajectories {
        if let Some(target) = targets.get(&t.robot_id) {
            let error = (t.final_pose().position() - target).norm();
            terminal_errors.insert(t.robot_id.clone(), error);
            if error > scenario.solver.tolerance {
                findings.push(Finding {
                    severity: Severity::Warning,
                    kind: FindingKind::TerminalError,
                    step: Some(schedule.len()),
                    robots: vec![t.robot_id.clone()],
                    value: error,
                    message: format!("robot '{}' ends {:.6} mm from its target", t.robot_id, error),
                });
            }
        }
    }

    ValidationReport {
        min_pairwise_distance: min_pair,
        min_obstacle_clearance: min_clearance,
        workspace_contained: reported_outside.is_empty(),
        terminal_errors,
        findings,
    }
}
