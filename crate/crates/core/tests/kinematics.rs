use std::collections::BTreeMap;
use std::f64::consts::PI;

use pivotwalk::kinematics::{
    alternating_schedule, angle_difference, closed_form_position, pivot_half_step, simulate, TumbleDirection,
};
use pivotwalk::{Pivot, Pose, RobotSpec, Schedule, StepCommand, Vec2};
use proptest::prelude::*;

fn iterate(span: f64, schedule: &Schedule, start: Pose) -> Pose {
    let robot = RobotSpec::centered_magnet("r", span);
    let initial = BTreeMap::from([("r".to_string(), start)]);
    simulate(&[robot], &initial, schedule).unwrap()[0].final_pose()
}

// Rigid-body oracle: two half-steps of 20 degrees on a 10 mm body from the origin.
#[test]
fn two_half_steps_golden() {
    let start = Pose::new(0.0, 0.0, 0.0);
    let mut pose = pivot_half_step(start, Pivot::Front, 20f64.to_radians(), 10.0).unwrap();
    pose = pivot_half_step(pose, Pivot::Back, -20f64.to_radians(), 10.0).unwrap();
    let expected = Vec2::new(0.603_073_792_141, -3.420_201_433_257);
    assert!((pose.position() - expected).norm() < 1e-11);
    let closed = closed_form_position(10.0, 20f64.to_radians(), 20f64.to_radians(), 2, start).unwrap();
    assert!((closed - expected).norm() < 1e-11);
}

#[test]
fn zero_steps_stay_put() {
    let start = Pose::new(3.0, -4.0, 1.0);
    let p = closed_form_position(10.0, 0.3, 0.3, 0, start).unwrap();
    assert_eq!(p, start.position());
    assert!(closed_form_position(10.0, 0.3, 0.3, -1, start).is_err());
}

fn angle() -> impl Strategy<Value = f64> {
    (1e-3f64..=60.0).prop_map(f64::to_radians)
}

fn pose() -> impl Strategy<Value = Pose> {
    (-50.0f64..50.0, -50.0f64..50.0, -PI..PI).prop_map(|(x, y, h)| Pose::new(x, y, h))
}

fn pivot_step() -> impl Strategy<Value = StepCommand> {
    (any::<bool>(), -1.5f64..1.5)
        .prop_map(|(front, sweep)| StepCommand::pivot(if front { Pivot::Front } else { Pivot::Back }, sweep))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn closed_form_matches_iteration(span in 3.0f64..=9.0, t1 in angle(), t2 in angle(), k in 0i64..=50, start in pose()) {
        let schedule = alternating_schedule(t1, t2, k as usize);
        let iterated = iterate(span, &schedule, start).position();
        let closed = closed_form_position(span, t1, t2, k, start).unwrap();
        prop_assert!((iterated - closed).norm() <= 1e-9 * span, "{iterated} vs {closed}");
    }

    #[test]
    fn pivot_displacement_is_linear_in_span(span in 1.0f64..20.0, t1 in angle(), t2 in angle(), k in 1usize..40) {
        let schedule = alternating_schedule(t1, t2, k);
        let origin = Pose::new(0.0, 0.0, 0.4);
        let one = iterate(span, &schedule, origin).position();
        let two = iterate(2.0 * span, &schedule, origin).position();
        prop_assert!((two - 2.0 * one).norm() <= 1e-9 * span);
    }

    #[test]
    fn heading_is_start_plus_sweeps(steps in prop::collection::vec(pivot_step(), 0..40), a in 1.0f64..10.0, b in 1.0f64..10.0, start in pose()) {
        let schedule = Schedule::from_steps("random", steps);
        let expected = start.heading + schedule.net_rotation();
        for span in [a, b] {
            let end = iterate(span, &schedule, start);
            prop_assert!(angle_difference(end.heading, expected).abs() < 1e-9);
        }
    }

    #[test]
    fn tumbling_preserves_distances(
        starts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..6),
        heading in -PI..PI,
        forward in prop::collection::vec(any::<bool>(), 0..30),
        length in 1.0f64..10.0,
    ) {
        let robots: Vec<_> = (0..starts.len()).map(|i| RobotSpec::legged(format!("r{i}"), length, 0.5 * length)).collect();
        let initial: BTreeMap<_, _> = starts.iter().enumerate().map(|(i, &(x, y))| (format!("r{i}"), Pose::new(x, y, heading))).collect();
        let schedule = Schedule::from_steps("tumble", forward.iter().map(|&f| StepCommand::tumble(if f { TumbleDirection::Forward } else { TumbleDirection::Backward })).collect());
        let t = simulate(&robots, &initial, &schedule).unwrap();
        for i in 0..t.len() {
            for j in i + 1..t.len() {
                let before = (t[i].initial_pose().position() - t[j].initial_pose().position()).norm();
                let after = (t[i].final_pose().position() - t[j].final_pose().position()).norm();
                if before < 1.0 {
                    continue;
                }
                prop_assert!((before - after).abs() <= 1e-12 * before, "{before} -> {after}");
            }
        }
    }

    #[test]
    fn simulation_is_deterministic(steps in prop::collection::vec(pivot_step(), 0..30), span in 1.0f64..10.0, start in pose()) {
        let schedule = Schedule::from_steps("random", steps);
        let robot = RobotSpec::centered_magnet("r", span);
        let initial = BTreeMap::from([("r".to_string(), start)]);
        let a = simulate(std::slice::from_ref(&robot), &initial, &schedule).unwrap();
        let b = simulate(std::slice::from_ref(&robot), &initial, &schedule).unwrap();
        prop_assert_eq!(a, b);
    }
}
