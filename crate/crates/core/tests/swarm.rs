use std::collections::BTreeMap;
use std::path::PathBuf;

use pivotwalk::io::parse_scenario;
use pivotwalk::kinematics::{simulate, Mode};
use pivotwalk::paths::straight_gain;
use pivotwalk::planner::{
    plan_formation, plan_pattern, plan_swarm, regular_polygon, LineSolution, PatternShape, PlanError, Rect, Scenario,
};
use pivotwalk::{Pose, RobotSpec, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Robots on random starts, targets one shared straight walk away, the
/// displacement of each proportional to its span.
fn random_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let n = rng.gen_range(2..=6);
    let direction: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let gain = straight_gain(rng.gen_range(5f64..80.0).to_radians(), rng.gen_range(1..=30));
    let unit = Vec2::new(direction.cos(), direction.sin());
    let mut robots = Vec::new();
    let mut initial = BTreeMap::new();
    let mut targets = BTreeMap::new();
    for i in 0..n {
        let id = format!("r{i}");
        let span = rng.gen_range(2.0..15.0);
        let start = Vec2::new(rng.gen_range(-200.0..200.0), rng.gen_range(-200.0..200.0));
        robots.push(RobotSpec::centered_magnet(&id, span));
        initial.insert(id.clone(), Pose::at(start, 0.0));
        targets.insert(id, start + span * gain * unit);
    }
    Scenario {
        robots,
        initial,
        pattern_targets: targets,
        workspace: Rect::new(Vec2::new(-1000.0, -1000.0), Vec2::new(1000.0, 1000.0)),
        ..Scenario::default()
    }
}

#[test]
fn swarm_plans_land_on_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..500 {
        let scenario = random_scenario(&mut rng);
        let solution = plan_swarm(&scenario).unwrap_or_else(|e| panic!("case {case}: {e}"));
        let robots = solution.apply_spans(&scenario.robots);
        let initial = scenario
            .initial
            .iter()
            .map(|(id, p)| (id.clone(), Pose::at(p.position(), solution.heading)))
            .collect();
        let trajectories = simulate(&robots, &initial, &solution.schedule()).unwrap();
        for t in &trajectories {
            let miss = (t.final_pose().position() - scenario.pattern_targets[&t.robot_id]).norm();
            assert!(miss < 0.1, "case {case}, robot {}: {miss}", t.robot_id);
        }
    }
}

#[test]
fn leader_is_the_farthest_robot() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let scenario = random_scenario(&mut rng);
    let solution = plan_swarm(&scenario).unwrap();
    let farthest = scenario
        .robots
        .iter()
        .max_by(|a, b| a.pivot_span.total_cmp(&b.pivot_span))
        .unwrap();
    assert_eq!(solution.leader, farthest.id);
    assert_eq!(plan_swarm(&scenario).unwrap(), solution);
}

#[test]
fn skewed_target_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut scenario = random_scenario(&mut rng);
    let mut ids = scenario.pattern_targets.keys().cloned();
    let (a, b) = (ids.next().unwrap(), ids.next().unwrap());
    let leader = plan_swarm(&scenario).unwrap().leader;
    let other = if leader == a { b } else { a };
    let start = scenario.initial[&other].position();
    let target = scenario.pattern_targets.get_mut(&other).unwrap();
    let offset = *target - start;
    *target = start + Vec2::new(-offset.y, offset.x);
    assert!(matches!(
        plan_swarm(&scenario),
        Err(PlanError::NonParallelTargets { .. })
    ));
}

#[test]
fn missing_target_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut scenario = random_scenario(&mut rng);
    scenario.pattern_targets.pop_first();
    assert!(matches!(plan_swarm(&scenario), Err(PlanError::MissingTarget(_))));
}

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    parse_scenario(&path).unwrap()
}

#[test]
fn hexagon_forms_and_tumbles_rigidly() {
    let s = scenario("hexagon.toml");
    let mut spans: Vec<f64> = s.robots.iter().map(|r| r.pivot_span).collect();
    spans.sort_by(f64::total_cmp);
    assert_eq!(spans, [3.0, 3.0, 7.0, 7.0, 9.0, 9.0]);

    let (_, plan) = plan_formation(&s).unwrap();
    assert_eq!(plan.phases.len(), 2);
    assert_eq!(plan.phases[1].mode, Mode::Tumble);
    let trajectories = plan.simulate().unwrap();
    let pivot_end = plan.phase_ranges()[0].end;

    // Regular hexagon: every target within tolerance, all vertices on the
    // circumcircle and all sides equal, taken in angular order.
    let formed: BTreeMap<&str, Vec2> = trajectories
        .iter()
        .map(|t| (t.robot_id.as_str(), t.poses[pivot_end].position()))
        .collect();
    for (id, q) in &s.pattern_targets {
        assert!((formed[id.as_str()] - q).norm() < s.solver.tolerance, "{id}");
    }
    let center = formed.values().sum::<Vec2>() / formed.len() as f64;
    let mut ring: Vec<Vec2> = formed.values().copied().collect();
    ring.sort_by(|a, b| {
        (a - center)
            .y
            .atan2((a - center).x)
            .total_cmp(&(b - center).y.atan2((b - center).x))
    });
    for (i, p) in ring.iter().enumerate() {
        assert!(((p - center).norm() - 20.0).abs() < s.solver.tolerance);
        assert!(((ring[(i + 1) % 6] - p).norm() - 20.0).abs() < s.solver.tolerance);
    }

    let last = trajectories[0].poses.len() - 1;
    for i in 0..trajectories.len() {
        for j in i + 1..trajectories.len() {
            let (a, b) = (&trajectories[i], &trajectories[j]);
            let before = (a.poses[pivot_end].position() - b.poses[pivot_end].position()).norm();
            for step in pivot_end..=last {
                let now = (a.poses[step].position() - b.poses[step].position()).norm();
                assert!(
                    (now - before).abs() <= 1e-12 * before,
                    "{} {} at {step}",
                    a.robot_id,
                    b.robot_id
                );
            }
        }
    }
}

#[test]
fn pattern_starts_walk_onto_targets() {
    let targets = regular_polygon(PatternShape::Triangle, 15.0, Vec2::new(50.0, 50.0), 0.3);
    let spans = [4.0, 6.0, 8.0];
    let line = LineSolution {
        sweep: 25f64.to_radians(),
        half_steps: 9,
        heading: 0.7,
    };
    let starts = plan_pattern(&targets, &spans, &line, None).unwrap();
    let robots: Vec<_> = spans
        .iter()
        .enumerate()
        .map(|(i, &p)| RobotSpec::centered_magnet(format!("m{i}"), p))
        .collect();
    let initial = starts
        .iter()
        .enumerate()
        .map(|(i, s)| (format!("m{i}"), Pose::at(*s, line.heading)))
        .collect();
    let t = simulate(&robots, &initial, &line.schedule()).unwrap();
    for (i, q) in targets.iter().enumerate() {
        assert!((t[i].final_pose().position() - q).norm() < 1e-9);
    }
}
