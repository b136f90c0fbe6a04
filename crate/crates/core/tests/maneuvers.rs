use std::collections::BTreeMap;
use std::path::PathBuf;

use pivotwalk::io::parse_scenario;
use pivotwalk::planner::{
    plan_contraction, plan_expansion, plan_reverse, validate_plan, ChannelAxis, ManeuverPlan, PlanError,
    ReverseOptions, Scenario,
};
use pivotwalk::{Pose, Vec2};

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    parse_scenario(&path).unwrap()
}

fn assert_clean(plan: &ManeuverPlan, scenario: &Scenario) {
    let report = validate_plan(plan, scenario);
    let bad: Vec<_> = report.violations().collect();
    assert!(bad.is_empty(), "{bad:#?}");
}

fn intents(plan: &ManeuverPlan) -> Vec<&str> {
    plan.phases.iter().map(|p| p.intent.as_str()).collect()
}

#[test]
fn reverse_swaps_order_inside_the_channel() {
    let s = scenario("reverse.toml");
    let plan = plan_reverse(&s, &ReverseOptions::default()).unwrap();
    assert_eq!(
        intents(&plan),
        [
            "pivot walk to channel width",
            "tumble to channel entrance",
            "tumble through channel",
            "pivot walk to final spacing",
            "tumble to final positions",
        ]
    );
    assert_clean(&plan, &s);

    let channel = &s.channels[0];
    assert_eq!(channel.axis, ChannelAxis::Y);
    let trajectories = plan.simulate().unwrap();
    let (a, b) = (&trajectories[0], &trajectories[1]);
    assert_eq!((a.robot_id.as_str(), b.robot_id.as_str()), ("a", "b"));

    let ranges = plan.phase_ranges();
    for phase in [1, 2] {
        for i in ranges[phase].clone() {
            let gap = (a.poses[i + 1].x - b.poses[i + 1].x).abs();
            assert!(gap < channel.width, "phase {phase}, pose {}: gap {gap}", i + 1);
        }
    }
    let before = a.initial_pose().x - b.initial_pose().x;
    let after = a.final_pose().x - b.final_pose().x;
    assert!(before * after < 0.0, "order kept: {before} -> {after}");
    for t in [a, b] {
        let (along, _) = channel.to_local(t.final_pose().position());
        assert!(along > channel.wall_thickness / 2.0, "{} stopped short", t.robot_id);
    }
}

#[test]
fn reverse_rejects_three_robots() {
    let mut s = scenario("reverse.toml");
    let mut extra = s.robots[0].clone();
    extra.id = "c".into();
    s.initial
        .insert("c".into(), Pose::new(30.0, 50.0, s.initial["a"].heading));
    s.robots.push(extra);
    assert!(matches!(
        plan_reverse(&s, &ReverseOptions::default()),
        Err(PlanError::PhaseSolverFailure { .. })
    ));
}

fn max_terminal_error(plan: &ManeuverPlan, targets: &BTreeMap<String, Vec2>) -> f64 {
    plan.final_poses()
        .iter()
        .map(|(id, p)| (p.position() - targets[id]).norm())
        .fold(0.0, f64::max)
}

#[test]
fn expansion_passes_the_opening_and_lands_on_targets() {
    let s = scenario("expansion.toml");
    let plan = plan_expansion(&s).unwrap();
    assert_eq!(
        intents(&plan),
        [
            "circular approach",
            "channel transit",
            "inclined straight",
            "circular placement"
        ]
    );
    assert!(plan.phases.iter().all(|p| !p.schedule.is_empty()));
    assert!(max_terminal_error(&plan, &s.final_targets) < s.solver.tolerance);
    assert_clean(&plan, &s);

    // Every robot ends on the far side of the walls.
    let channel = &s.channels[0];
    for pose in plan.final_poses().values() {
        let (along, _) = channel.to_local(pose.position());
        assert!(along > channel.wall_thickness / 2.0, "{pose:?}");
    }
}

#[test]
fn contraction_is_the_expansion_run_backwards() {
    let s = scenario("contraction.toml");
    let plan = plan_contraction(&s).unwrap();
    assert_eq!(
        intents(&plan),
        [
            "circular placement",
            "inclined straight",
            "channel transit",
            "circular approach"
        ]
    );
    assert!(max_terminal_error(&plan, &s.final_targets) < s.solver.tolerance);
    assert_clean(&plan, &s);
}

#[test]
fn expansion_then_contraction_returns_home() {
    let s = scenario("expansion.toml");
    let out = plan_expansion(&s).unwrap();
    let mut back = s.clone();
    back.initial = out.final_poses();
    back.final_targets = s.initial.iter().map(|(id, p)| (id.clone(), p.position())).collect();
    let home = plan_contraction(&back).unwrap();
    assert!(max_terminal_error(&home, &back.final_targets) < 1e-3);
}

#[test]
fn open_expansion_needs_no_approach() {
    let mut s = scenario("expansion.toml");
    s.channels.clear();
    // One left-hand circle of 30 and 10 degree steps, k = 5, at unit span.
    let per_span = Vec2::new(0.870_572_228, 1.309_788_775);
    s.final_targets = s
        .robots
        .iter()
        .map(|r| (r.id.clone(), s.initial[&r.id].position() + r.pivot_span * per_span))
        .collect();
    let plan = plan_expansion(&s).unwrap();
    let names = intents(&plan);
    assert_eq!(names.last(), Some(&"circular placement"));
    assert!(
        names
            .iter()
            .all(|n| *n == "inclined straight" || *n == "circular placement"),
        "{names:?}"
    );
    assert!(max_terminal_error(&plan, &s.final_targets) < s.solver.tolerance);
}

#[test]
fn target_inside_a_wall_is_rejected() {
    let mut s = scenario("expansion.toml");
    let wall = s.channels[0].walls()[0];
    let id = s.robots[0].id.clone();
    s.final_targets.insert(id, (wall.min + wall.max) / 2.0);
    assert!(matches!(plan_expansion(&s), Err(PlanError::WorkspaceViolation(_))));
}

#[test]
fn expansion_rejects_skewed_targets() {
    let mut s = scenario("expansion.toml");
    let id = s.robots[0].id.clone();
    *s.final_targets.get_mut(&id).unwrap() += Vec2::new(5.0, 0.0);
    assert!(matches!(plan_expansion(&s), Err(PlanError::NonParallelTargets { .. })));
}
