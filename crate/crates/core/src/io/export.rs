use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::IoError;
use crate::kinematics::{Mode, Pose, StepCommand, Trajectory};
use crate::planner::ManeuverPlan;

pub const CSV_HEADER: &str = "step_index,robot_id,x_mm,y_mm,heading_deg,mode";

/// Rounds to 9 significant digits. Negative zero becomes zero.
pub fn round_significant(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        0.0
    } else {
        rounded
    }
}

/// Shortest representation that round-trips after rounding to 9 significant digits.
pub fn format_number(v: f64) -> String {
    round_significant(v).to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub step_index: usize,
    pub robot_id: String,
    pub x_mm: f64,
    pub y_mm: f64,
    pub heading_deg: f64,
    pub mode: &'static str,
}

/// One row per robot and pose, sorted by step then robot id.
pub fn trajectory_rows(trajectories: &[Trajectory]) -> Result<Vec<TrajectoryRow>, IoError> {
    if trajectories.is_empty() {
        return Err(IoError::Empty);
    }
    let mut sorted: Vec<&Trajectory> = trajectories.iter().collect();
    sorted.sort_by(|a, b| a.robot_id.cmp(&b.robot_id));
    let steps = sorted.iter().map(|t| t.poses.len()).max().unwrap_or(0);
    let mut rows = Vec::with_capacity(steps * sorted.len());
    for step in 0..steps {
        for t in &sorted {
            let Some(pose) = t.poses.get(step) else { continue };
            let mode = match step {
                0 => "initial",
                _ => match t.modes[step - 1] {
                    Mode::Pivot => "pivot",
                    Mode::Tumble => "tumble",
                },
            };
            rows.push(TrajectoryRow {
                step_index: step,
                robot_id: t.robot_id.clone(),
                x_mm: round_significant(pose.x),
                y_mm: round_significant(pose.y),
                heading_deg: round_significant(pose.heading.to_degrees()),
                mode,
            });
        }
    }
    Ok(rows)
}

pub fn trajectories_to_csv(trajectories: &[Trajectory]) -> Result<String, IoError> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in trajectory_rows(trajectories)? {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.step_index,
            row.robot_id,
            format_number(row.x_mm),
            format_number(row.y_mm),
            format_number(row.heading_deg),
            row.mode
        )
        .expect("writing to a string");
    }
    Ok(out)
}

pub fn trajectories_to_json(trajectories: &[Trajectory]) -> Result<String, IoError> {
    #[derive(Serialize)]
    struct Doc {
        columns: [&'static str; 6],
        rows: Vec<TrajectoryRow>,
    }
    let doc = Doc {
        columns: ["step_index", "robot_id", "x_mm", "y_mm", "heading_deg", "mode"],
        rows: trajectory_rows(trajectories)?,
    };
    Ok(to_json(&doc))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoseSummary {
    pub x_mm: f64,
    pub y_mm: f64,
    pub heading_deg: f64,
}

impl From<&Pose> for PoseSummary {
    fn from(p: &Pose) -> Self {
        Self {
            x_mm: round_significant(p.x),
            y_mm: round_significant(p.y),
            heading_deg: round_significant(p.heading.to_degrees()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSummary {
    pub index: usize,
    pub mode: Mode,
    pub intent: String,
    /// Number of half-steps or tumbles.
    pub steps: usize,
    /// Distinct sweep magnitudes used, degrees, ascending.
    pub sweeps_deg: Vec<f64>,
    pub waypoints: BTreeMap<String, PoseSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSummary {
    pub name: String,
    pub spans_mm: BTreeMap<String, f64>,
    pub initial: BTreeMap<String, PoseSummary>,
    pub phases: Vec<PhaseSummary>,
}

pub fn plan_summary(plan: &ManeuverPlan) -> PlanSummary {
    let phases = plan
        .phases
        .iter()
        .enumerate()
        .map(|(index, phase)| {
            let mut sweeps: Vec<f64> = phase
                .schedule
                .steps
                .iter()
                .filter_map(|s| match s {
                    StepCommand::PivotHalfStep { sweep, .. } => Some(round_significant(sweep.abs().to_degrees())),
                    StepCommand::TumbleStep { .. } => None,
                })
                .collect();
            sweeps.sort_by(f64::total_cmp);
            sweeps.dedup();
            PhaseSummary {
                index: index + 1,
                mode: phase.mode,
                intent: phase.intent.clone(),
                steps: phase.schedule.len(),
                sweeps_deg: sweeps,
                waypoints: phase.waypoints.iter().map(|(id, p)| (id.clone(), p.into())).collect(),
            }
        })
        .collect();
    PlanSummary {
        name: plan.name.clone(),
        spans_mm: plan.robots.iter().map(|r| (r.id.clone(), r.pivot_span)).collect(),
        initial: plan.initial.iter().map(|(id, p)| (id.clone(), p.into())).collect(),
        phases,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{simulate, RobotSpec, Schedule};

    #[test]
    fn numbers_keep_nine_digits() {
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(1e-20), "0.00000000000000000001");
        assert_eq!(format_number(std::f64::consts::PI), "3.14159265");
        assert_eq!(format_number(123456789.4), "123456789");
        assert_eq!(format_number(-2.5e-7), "-0.00000025");
    }

    #[test]
    fn empty_schedule_gives_one_row() {
        let robots = [RobotSpec::centered_magnet("a", 4.0)];
        let initial = BTreeMap::from([("a".to_string(), Pose::new(1.5, -2.0, 0.5))]);
        let t = simulate(&robots, &initial, &Schedule::new("none")).unwrap();
        let csv = trajectories_to_csv(&t).unwrap();
        assert_eq!(csv, format!("{CSV_HEADER}\n0,a,1.5,-2,28.6478898,initial\n"));
        assert!(matches!(trajectories_to_csv(&[]), Err(IoError::Empty)));
    }
}
