use std::fmt::Write as _;

use super::export::format_number;
use crate::kinematics::{Trajectory, Vec2};
use crate::planner::{Rect, Scenario};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SvgOptions {
    /// Output pixels per mm.
    pub scale: f64,
    /// Extra room around the drawing, mm.
    pub margin: f64,
    /// Marker size, mm. Defaults to 1.5% of the drawing extent.
    pub marker: Option<f64>,
    /// Draw target points as crosses.
    pub show_targets: bool,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self {
            scale: 4.0,
            margin: 5.0,
            marker: None,
            show_targets: true,
        }
    }
}

fn n(v: f64) -> String {
    format_number(v)
}

/// Plots midpoint paths over the scenario's walls. Squares mark initial
/// positions, circles final ones. The y axis points up.
pub fn render_svg(trajectories: &[Trajectory], scenario: &Scenario, options: &SvgOptions) -> String {
    let mut sorted: Vec<&Trajectory> = trajectories.iter().collect();
    sorted.sort_by(|a, b| a.robot_id.cmp(&b.robot_id));

    let walls: Vec<(usize, usize, Rect)> = scenario
        .channels
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.walls().into_iter().enumerate().map(move |(j, w)| (i, j, w)))
        .collect();
    let mut lo = scenario.workspace.min;
    let mut hi = scenario.workspace.max;
    let points = sorted
        .iter()
        .flat_map(|t| t.poses.iter().map(|p| p.position()))
        .chain(walls.iter().flat_map(|(_, _, w)| [w.min, w.max]));
    for p in points {
        lo = lo.inf(&p);
        hi = hi.sup(&p);
    }
    lo -= Vec2::repeat(options.margin);
    hi += Vec2::repeat(options.margin);
    let size = hi - lo;
    let marker = options.marker.unwrap_or(0.015 * size.x.max(size.y));

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"{} {} {} {}\">",
        n(size.x * options.scale),
        n(size.y * options.scale),
        n(lo.x),
        n(-hi.y),
        n(size.x),
        n(size.y)
    );
    let stroke = n(0.25 * marker);
    let _ = writeln!(
        out,
        "<rect id=\"workspace\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#bbbbbb\" stroke-width=\"{stroke}\" stroke-dasharray=\"{} {}\"/>",
        n(scenario.workspace.min.x),
        n(-scenario.workspace.max.y),
        n(scenario.workspace.width()),
        n(scenario.workspace.height()),
        n(marker),
        n(marker)
    );

    out.push_str("<g id=\"obstacles\" fill=\"#555555\">\n");
    for (i, j, w) in &walls {
        let _ = writeln!(
            out,
            "<rect id=\"wall-{i}-{j}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>",
            n(w.min.x),
            n(-w.max.y),
            n(w.width()),
            n(w.height())
        );
    }
    out.push_str("</g>\n");

    out.push_str("<g id=\"paths\" fill=\"none\" stroke-linejoin=\"round\">\n");
    for (i, t) in sorted.iter().enumerate() {
        let pts: Vec<String> = t.poses.iter().map(|p| format!("{},{}", n(p.x), n(-p.y))).collect();
        let _ = writeln!(
            out,
            "<polyline id=\"path-{}\" points=\"{}\" stroke=\"{}\" stroke-width=\"{stroke}\"/>",
            t.robot_id,
            pts.join(" "),
            PALETTE[i % PALETTE.len()]
        );
    }
    out.push_str("</g>\n");

    out.push_str("<g id=\"markers\">\n");
    for (i, t) in sorted.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let first = t.initial_pose();
        let last = t.final_pose();
        let _ = writeln!(
            out,
            "<rect id=\"initial-{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\"/>",
            t.robot_id,
            n(first.x - 0.5 * marker),
            n(-first.y - 0.5 * marker),
            n(marker),
            n(marker)
        );
        let _ = writeln!(
            out,
            "<circle id=\"final-{}\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{color}\"/>",
            t.robot_id,
            n(last.x),
            n(-last.y),
            n(0.5 * marker)
        );
    }
    out.push_str("</g>\n");

    if options.show_targets {
        let targets = if scenario.final_targets.is_empty() {
            &scenario.pattern_targets
        } else {
            &scenario.final_targets
        };
        if !targets.is_empty() {
            out.push_str("<g id=\"targets\" stroke=\"#000000\" fill=\"none\">\n");
            let h = 0.5 * marker;
            for (id, q) in targets {
                let _ = writeln!(
                    out,
                    "<path id=\"target-{id}\" d=\"M {} {} L {} {} M {} {} L {} {}\" stroke-width=\"{stroke}\"/>",
                    n(q.x - h),
                    n(-q.y - h),
                    n(q.x + h),
                    n(-q.y + h),
                    n(q.x - h),
                    n(-q.y + h),
                    n(q.x + h),
                    n(-q.y - h)
                );
            }
            out.push_str("</g>\n");
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::kinematics::{simulate, Pivot, Pose, RobotSpec, Schedule, StepCommand};
    use crate::planner::{Channel, ChannelAxis};

    #[test]
    fn one_robot_two_poses() {
        let robots = vec![RobotSpec::centered_magnet("a", 4.0)];
        let initial = BTreeMap::from([("a".to_string(), Pose::new(10.0, 10.0, 0.0))]);
        let schedule = Schedule::from_steps("s", vec![StepCommand::pivot(Pivot::Front, 0.3)]);
        let t = simulate(&robots, &initial, &schedule).unwrap();
        let scenario = Scenario {
            robots,
            initial,
            ..Scenario::default()
        };
        let svg = render_svg(&t, &scenario, &SvgOptions::default());
        assert_eq!(svg.matches("<polyline").count(), 1);
        let points = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(points.split(' ').count(), 2);
        assert_eq!(svg.matches("<rect id=\"initial-").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg.matches("<rect id=\"wall-").count(), 0);
    }

    #[test]
    fn channel_walls_are_drawn() {
        let scenario = Scenario {
            channels: vec![Channel {
                center: Vec2::new(60.0, 60.0),
                axis: ChannelAxis::X,
                width: 10.0,
                wall_thickness: 4.0,
                wall_extent: 30.0,
            }],
            ..Scenario::default()
        };
        let svg = render_svg(&[], &scenario, &SvgOptions::default());
        assert_eq!(svg.matches("<rect id=\"wall-").count(), 2);
        assert!(svg.starts_with("<?xml"));
    }
}
