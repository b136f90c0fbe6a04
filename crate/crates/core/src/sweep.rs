//! Final distance between two robots of different spans walked by one
//! broadcast schedule, tabulated over sweep angle and step count.
//!
//! The longer robot starts `initial_gap` behind the shorter one on the walking
//! axis. The reported gap is `x_long - x_short` along that axis, so a negative
//! value means the starting order survived.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::io::format_number;
use crate::kinematics::{simulate, Pivot, Pose, RobotSpec, Schedule};
use crate::paths::{reversal_schedule, PathError, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Fixed sweep, triangle legs of varying length.
    Steps,
    /// Fixed out and back step counts, varying sweep.
    Angle,
    /// Triangle over every sweep and leg length pair.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub long_span: f64,
    pub short_span: f64,
    pub initial_gap: f64,
    /// Sweep of the steps sweep, degrees.
    pub sweep_deg: f64,
    /// Half-steps before the direction changes in the angle sweep.
    pub out_steps: usize,
    /// Total half-steps in the angle sweep.
    pub total_steps: usize,
    /// Sweeps for the angle and grid sweeps, degrees.
    pub angles_deg: Vec<f64>,
    /// Half-steps per triangle leg for the steps and grid sweeps; even.
    pub leg_steps: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            long_span: 20.0,
            short_span: 10.0,
            initial_gap: 20.0,
            sweep_deg: 24.0,
            out_steps: 12,
            total_steps: 33,
            angles_deg: (1..=90).map(f64::from).collect(),
            leg_steps: (1..=30).map(|k| 2 * k).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_deg: f64,
    /// Total half-steps in the schedule.
    pub half_steps: usize,
    pub final_gap_mm: f64,
}

/// Gap `x_long - x_short` along the starting axis after `schedule`.
pub fn final_gap(long_span: f64, short_span: f64, initial_gap: f64, schedule: &Schedule) -> Result<f64, PathError> {
    let robots = [
        RobotSpec::centered_magnet("long", long_span),
        RobotSpec::centered_magnet("short", short_span),
    ];
    let initial = BTreeMap::from([
        ("long".to_string(), Pose::new(0.0, 0.0, 0.0)),
        ("short".to_string(), Pose::new(initial_gap, 0.0, 0.0)),
    ]);
    let trajectories = simulate(&robots, &initial, schedule)?;
    Ok(trajectories[0].final_pose().x - trajectories[1].final_pose().x)
}

pub fn run_sweep(kind: SweepKind, config: &SweepConfig) -> Result<Vec<SweepRow>, PathError> {
    let gap = |schedule: &Schedule| final_gap(config.long_span, config.short_span, config.initial_gap, schedule);
    let triangle = |sweep_deg: f64, k: usize| -> Result<SweepRow, PathError> {
        let schedule = reversal_schedule(sweep_deg.to_radians(), k, k, Pivot::Front, Side::Right)?;
        Ok(SweepRow {
            sweep_deg,
            half_steps: 2 * k,
            final_gap_mm: gap(&schedule)?,
        })
    };
    match kind {
        SweepKind::Steps => config
            .leg_steps
            .iter()
            .map(|&k| triangle(config.sweep_deg, k))
            .collect(),
        SweepKind::Angle => {
            if config.out_steps >= config.total_steps {
                return Err(PathError::InvalidRequest(
                    "the direction change must come before the last step".into(),
                ));
            }
            config
                .angles_deg
                .iter()
                .map(|&sweep_deg| {
                    let back = config.total_steps - config.out_steps;
                    let schedule = reversal_schedule(
                        sweep_deg.to_radians(),
                        config.out_steps,
                        back,
                        Pivot::Front,
                        Side::Right,
                    )?;
                    Ok(SweepRow {
                        sweep_deg,
                        half_steps: config.total_steps,
                        final_gap_mm: gap(&schedule)?,
                    })
                })
                .collect()
        }
        SweepKind::Grid => config
            .angles_deg
            .iter()
            .flat_map(|&a| config.leg_steps.iter().map(move |&k| (a, k)))
            .map(|(a, k)| triangle(a, k))
            .collect(),
    }
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("sweep_deg,half_steps,final_gap_mm\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            format_number(row.sweep_deg),
            row.half_steps,
            format_number(row.final_gap_mm)
        );
    }
    out
}
