//! Scenario files: TOML, millimeters and degrees.
//!
//! ```toml
//! schema_version = 1
//!
//! [units]
//! length = "mm"
//! angle = "deg"
//!
//! [[robots]]
//! id = "a"
//! body_length = 10.0
//! pivot_span = 3.0        # omitted: span equals body length
//!
//! [initial]
//! a = { x = 20.0, y = 30.0, heading = 90.0 }
//! ```
//!
//! Optional tables: `pattern_targets`, `final_targets` (id to `{ x, y }`),
//! `[[channels]]`, `[workspace]`, `[solver]` and a `[[schedule]]` step list.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::kinematics::{Pivot, Pose, RobotSpec, Schedule, StepCommand, TumbleDirection, Variant, Vec2};
use crate::planner::{Channel, ChannelAxis, Rect, Scenario, ScenarioError, SolverOptions};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    schema_version: u32,
    units: Option<Units>,
    #[serde(default)]
    robots: Vec<RobotEntry>,
    #[serde(default)]
    initial: BTreeMap<String, PoseEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pattern_targets: BTreeMap<String, Point>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    final_targets: BTreeMap<String, Point>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    channels: Vec<ChannelEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workspace: Option<WorkspaceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    solver: Option<SolverEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schedule: Option<Vec<StepEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Units {
    length: String,
    angle: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotEntry {
    id: String,
    body_length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pivot_span: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variant: Option<Variant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseEntry {
    x: f64,
    y: f64,
    heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Point {
    x: f64,
    y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelEntry {
    center: Point,
    axis: String,
    width: f64,
    wall_thickness: f64,
    wall_extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkspaceEntry {
    min: Point,
    max: Point,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_sweep: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_half_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    half_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    leader_span: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    span_bounds: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    catalog: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    channel_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_separation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tumble_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum StepEntry {
    Pivot { pivot: Pivot, sweep: f64 },
    Tumble { tumble: TumbleDirection },
}

fn vec(p: Point) -> Vec2 {
    Vec2::new(p.x, p.y)
}

fn point(v: Vec2) -> Point {
    Point { x: v.x, y: v.y }
}

fn schema(message: impl Into<String>) -> IoError {
    IoError::Schema(message.into())
}

impl From<ScenarioError> for IoError {
    fn from(e: ScenarioError) -> Self {
        IoError::Schema(e.to_string())
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario_str(text: &str) -> Result<Scenario, IoError> {
    let file: File = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |span| line_column(text, span.start));
        IoError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(schema(format!(
            "schema_version {} is not supported, expected {SCHEMA_VERSION}",
            file.schema_version
        )));
    }
    let units = file
        .units
        .as_ref()
        .ok_or_else(|| IoError::Unit("missing [units] table".into()))?;
    if units.length != "mm" {
        return Err(IoError::Unit(format!(
            "length unit '{}' is not supported, use \"mm\"",
            units.length
        )));
    }
    if units.angle != "deg" {
        return Err(IoError::Unit(format!(
            "angle unit '{}' is not supported, use \"deg\"",
            units.angle
        )));
    }
    let scenario = into_scenario(file)?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_scenario_str(&text)
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn into_scenario(file: File) -> Result<Scenario, IoError> {
    let robots = file
        .robots
        .into_iter()
        .map(|r| {
            let variant = r.variant.unwrap_or(match r.pivot_span {
                Some(span) if span != r.body_length => Variant::Legged,
                _ => Variant::CenteredMagnet,
            });
            RobotSpec {
                pivot_span: r.pivot_span.unwrap_or(r.body_length),
                id: r.id,
                body_length: r.body_length,
                variant,
            }
        })
        .collect();
    let initial = file
        .initial
        .into_iter()
        .map(|(id, p)| (id, Pose::new(p.x, p.y, p.heading.to_radians())))
        .collect();
    let targets = |t: BTreeMap<String, Point>| t.into_iter().map(|(id, p)| (id, vec(p))).collect();
    let channels = file
        .channels
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let axis = match c.axis.as_str() {
                "x" => ChannelAxis::X,
                "y" => ChannelAxis::Y,
                other => return Err(schema(format!("channel {i}: axis '{other}' must be \"x\" or \"y\""))),
            };
            Ok(Channel {
                center: vec(c.center),
                axis,
                width: c.width,
                wall_thickness: c.wall_thickness,
                wall_extent: c.wall_extent,
            })
        })
        .collect::<Result<_, _>>()?;
    let workspace = file
        .workspace
        .map_or_else(Rect::default, |w| Rect::new(vec(w.min), vec(w.max)));
    let solver = solver_options(file.solver.unwrap_or_default());
    let schedule = file.schedule.map(|steps| {
        Schedule::from_steps(
            "scenario",
            steps
                .into_iter()
                .map(|s| match s {
                    StepEntry::Pivot { pivot, sweep } => StepCommand::pivot(pivot, sweep.to_radians()),
                    StepEntry::Tumble { tumble } => StepCommand::tumble(tumble),
                })
                .collect(),
        )
    });
    Ok(Scenario {
        robots,
        initial,
        pattern_targets: targets(file.pattern_targets),
        final_targets: targets(file.final_targets),
        channels,
        workspace,
        solver,
        schedule,
    })
}

fn solver_options(entry: SolverEntry) -> SolverOptions {
    let defaults = SolverOptions::default();
    SolverOptions {
        max_sweep: entry.max_sweep.map_or(defaults.max_sweep, f64::to_radians),
        max_half_steps: entry.max_half_steps.unwrap_or(defaults.max_half_steps),
        half_steps: entry.half_steps,
        tolerance: entry.tolerance.unwrap_or(defaults.tolerance),
        leader_span: entry.leader_span,
        span_bounds: entry.span_bounds.map(|[lo, hi]| (lo, hi)),
        catalog: entry.catalog,
        channel_margin: entry.channel_margin.unwrap_or(defaults.channel_margin),
        min_separation: entry.min_separation.unwrap_or(defaults.min_separation),
        tumble_tolerance: entry.tumble_tolerance,
    }
}

/// Writes a scenario back out in the same format.
pub fn scenario_to_toml(scenario: &Scenario) -> Result<String, IoError> {
    let s = &scenario.solver;
    let file = File {
        schema_version: SCHEMA_VERSION,
        units: Some(Units {
            length: "mm".into(),
            angle: "deg".into(),
        }),
        robots: scenario
            .robots
            .iter()
            .map(|r| RobotEntry {
                id: r.id.clone(),
                body_length: r.body_length,
                pivot_span: (r.variant == Variant::Legged).then_some(r.pivot_span),
                variant: Some(r.variant),
            })
            .collect(),
        initial: scenario
            .initial
            .iter()
            .map(|(id, p)| {
                let entry = PoseEntry {
                    x: p.x,
                    y: p.y,
                    heading: p.heading.to_degrees(),
                };
                (id.clone(), entry)
            })
            .collect(),
        pattern_targets: scenario
            .pattern_targets
            .iter()
            .map(|(id, p)| (id.clone(), point(*p)))
            .collect(),
        final_targets: scenario
            .final_targets
            .iter()
            .map(|(id, p)| (id.clone(), point(*p)))
            .collect(),
        channels: scenario
            .channels
            .iter()
            .map(|c| ChannelEntry {
                center: point(c.center),
                axis: match c.axis {
                    ChannelAxis::X => "x".into(),
                    ChannelAxis::Y => "y".into(),
                },
                width: c.width,
                wall_thickness: c.wall_thickness,
                wall_extent: c.wall_extent,
            })
            .collect(),
        workspace: Some(WorkspaceEntry {
            min: point(scenario.workspace.min),
            max: point(scenario.workspace.max),
        }),
        solver: Some(SolverEntry {
            max_sweep: Some(s.max_sweep.to_degrees()),
            max_half_steps: Some(s.max_half_steps),
            half_steps: s.half_steps,
            tolerance: Some(s.tolerance),
            leader_span: s.leader_span,
            span_bounds: s.span_bounds.map(|(lo, hi)| [lo, hi]),
            catalog: s.catalog.clone(),
            channel_margin: Some(s.channel_margin),
            min_separation: Some(s.min_separation),
            tumble_tolerance: s.tumble_tolerance,
        }),
        schedule: scenario.schedule.as_ref().map(|schedule| {
            schedule
                .steps
                .iter()
                .map(|step| match *step {
                    StepCommand::PivotHalfStep { pivot, sweep } => StepEntry::Pivot {
                        pivot,
                        sweep: sweep.to_degrees(),
                    },
                    StepCommand::TumbleStep { direction } => StepEntry::Tumble { tumble: direction },
                })
                .collect()
        }),
    };
    toml::to_string(&file).map_err(|e| schema(e.to_string()))
}
