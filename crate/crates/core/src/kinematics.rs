//! Planar step kinematics for pivot walking and tumbling.
//!
//! A pivot half-step is an exact rigid rotation of the body about one of its two
//! pivot points. A tumble step flips the body end over end, which in the plane is a
//! translation of one body length along the long axis. A [`Schedule`] is broadcast:
//! the same steps drive every robot, and robots differ only through their pivot
//! span (pivot steps) and body length (tumble steps).
//!
//! Sign convention: a positive sweep about the front pivot followed by a negative
//! sweep about the back pivot walks the body to the right of its heading.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Rotation2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Planar vector in millimeters.
pub type Vec2 = Vector2<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),
    #[error("pivot span must be positive, got {0}")]
    SpanNonPositive(f64),
    #[error("body length must be positive, got {0}")]
    LengthNonPositive(f64),
    #[error("sweep {0} rad is outside the open interval (-pi, pi)")]
    SweepOutOfRange(f64),
    #[error("step count must be non-negative, got {0}")]
    NegativeStepCount(i64),
    #[error("invalid robot '{id}': {reason}")]
    InvalidRobot { id: String, reason: String },
    #[error("no initial pose for robot '{0}'")]
    MissingInitialPose(String),
    #[error("step {step} failed for robot '{robot}': {source}")]
    Step {
        step: usize,
        robot: String,
        #[source]
        source: Box<KinematicsError>,
    },
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Smallest signed difference `a - b` between two angles, in `(-pi, pi]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Stadium body with the magnet at its center; the body ends are the pivots.
    CenteredMagnet,
    /// Fixed-length body walking on two legs; the legs are the pivots.
    Legged,
}

/// Physical description of one millirobot.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotSpec {
    pub id: String,
    /// Body length `L` in mm. Sets the tumble stride.
    pub body_length: f64,
    /// Distance between the two pivot points in mm. Sets the pivot-walk stride.
    pub pivot_span: f64,
    pub variant: Variant,
}

impl RobotSpec {
    /// A robot that pivots on its own ends (`pivot_span == body_length`).
    pub fn centered_magnet(id: impl Into<String>, length: f64) -> Self {
        Self {
            id: id.into(),
            body_length: length,
            pivot_span: length,
            variant: Variant::CenteredMagnet,
        }
    }

    pub fn legged(id: impl Into<String>, body_length: f64, pivot_span: f64) -> Self {
        Self {
            id: id.into(),
            body_length,
            pivot_span,
            variant: Variant::Legged,
        }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let invalid = |reason: String| KinematicsError::InvalidRobot {
            id: self.id.clone(),
            reason,
        };
        if !self.body_length.is_finite() || !self.pivot_span.is_finite() {
            return Err(invalid("non-finite dimensions".into()));
        }
        if self.body_length <= 0.0 {
            return Err(invalid(format!("body length {} must be positive", self.body_length)));
        }
        if self.pivot_span <= 0.0 {
            return Err(invalid(format!("pivot span {} must be positive", self.pivot_span)));
        }
        if self.pivot_span > self.body_length * (1.0 + 1e-12) {
            return Err(invalid(format!(
                "pivot span {} exceeds body length {}",
                self.pivot_span, self.body_length
            )));
        }
        if self.variant == Variant::CenteredMagnet
            && (self.pivot_span - self.body_length).abs() > 1e-12 * self.body_length
        {
            return Err(invalid(
                "centered-magnet robots pivot on their ends, span must equal length".into(),
            ));
        }
        Ok(())
    }
}

/// Midpoint position and long-axis heading of a robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Direction of the long axis from +x, normalized to `(-pi, pi]`.
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn at(position: Vec2, heading: f64) -> Self {
        Self::new(position.x, position.y, heading)
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Unit vector along the long axis, pointing at the front pivot.
    pub fn axis(&self) -> Vec2 {
        Vec2::new(self.heading.cos(), self.heading.sin())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }

    /// Back and front end points of a body of the given length centered on this pose.
    pub fn end_points(&self, length: f64) -> (Vec2, Vec2) {
        let half = 0.5 * length * self.axis();
        (self.position() - half, self.position() + half)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pivot {
    Front,
    Back,
}

impl Pivot {
    fn offset_sign(self) -> f64 {
        match self {
            Pivot::Front => 1.0,
            Pivot::Back => -1.0,
        }
    }

    pub fn other(self) -> Pivot {
        match self {
            Pivot::Front => Pivot::Back,
            Pivot::Back => Pivot::Front,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TumbleDirection {
    Forward,
    Backward,
}

impl TumbleDirection {
    fn sign(self) -> f64 {
        match self {
            TumbleDirection::Forward => 1.0,
            TumbleDirection::Backward => -1.0,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            TumbleDirection::Forward => TumbleDirection::Backward,
            TumbleDirection::Backward => TumbleDirection::Forward,
        }
    }
}

/// One broadcast actuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepCommand {
    /// Rotate the body about one pivot by a signed sweep (radians, `|sweep| < pi`).
    PivotHalfStep { pivot: Pivot, sweep: f64 },
    /// Full 180 degree end-over-end flip.
    TumbleStep { direction: TumbleDirection },
}

impl StepCommand {
    pub fn pivot(pivot: Pivot, sweep: f64) -> Self {
        StepCommand::PivotHalfStep { pivot, sweep }
    }

    pub fn tumble(direction: TumbleDirection) -> Self {
        StepCommand::TumbleStep { direction }
    }

    pub fn mode(&self) -> Mode {
        match self {
            StepCommand::PivotHalfStep { .. } => Mode::Pivot,
            StepCommand::TumbleStep { .. } => Mode::Tumble,
        }
    }

    /// The step that undoes this one. A pivot stays fixed while the body turns
    /// about it, so the inverse uses the same pivot with the opposite sweep.
    pub fn inverse(&self) -> Self {
        match *self {
            StepCommand::PivotHalfStep { pivot, sweep } => StepCommand::PivotHalfStep { pivot, sweep: -sweep },
            StepCommand::TumbleStep { direction } => StepCommand::TumbleStep {
                direction: direction.reversed(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Pivot,
    Tumble,
}

/// Ordered broadcast actuation sequence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule {
    pub steps: Vec<StepCommand>,
    pub label: String,
}

impl Schedule {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            steps: Vec::new(),
            label: label.into(),
        }
    }

    pub fn from_steps(label: impl Into<String>, steps: Vec<StepCommand>) -> Self {
        Self {
            steps,
            label: label.into(),
        }
    }

    pub fn push(&mut self, step: StepCommand) {
        self.steps.push(step);
    }

    pub fn append(&mut self, other: &Schedule) {
        self.steps.extend_from_slice(&other.steps);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Sum of all pivot sweeps, i.e. the net heading change.
    pub fn net_rotation(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| match s {
                StepCommand::PivotHalfStep { sweep, .. } => *sweep,
                StepCommand::TumbleStep { .. } => 0.0,
            })
            .sum()
    }

    /// The common mode of all steps, or `None` for empty or mixed schedules.
    pub fn mode(&self) -> Option<Mode> {
        let first = self.steps.first()?.mode();
        self.steps.iter().all(|s| s.mode() == first).then_some(first)
    }

    /// Schedule that drives every robot back along the same path.
    pub fn inverse(&self) -> Schedule {
        Schedule {
            steps: self.steps.iter().rev().map(StepCommand::inverse).collect(),
            label: format!("{} (reversed)", self.label),
        }
    }
}

/// Poses of one robot over a simulation. `poses[0]` is the initial pose and
/// `modes[i]` tags the step that produced `poses[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub robot_id: String,
    pub poses: Vec<Pose>,
    pub modes: Vec<Mode>,
}

impl Trajectory {
    pub fn initial_pose(&self) -> Pose {
        self.poses[0]
    }

    pub fn final_pose(&self) -> Pose {
        *self.poses.last().expect("trajectory holds at least the initial pose")
    }
}

/// Multiplicative perturbation of every pivot sweep, drawn uniformly from
/// `[1 - amplitude, 1 + amplitude]` with one seeded stream per robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipNoise {
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimulationOptions {
    pub slip: Option<SlipNoise>,
}

pub fn pivot_half_step(pose: Pose, pivot: Pivot, sweep: f64, span: f64) -> Result<Pose, KinematicsError> {
    if !pose.is_finite() {
        return Err(KinematicsError::NonFiniteInput("pose"));
    }
    if !sweep.is_finite() {
        return Err(KinematicsError::NonFiniteInput("sweep"));
    }
    if !span.is_finite() {
        return Err(KinematicsError::NonFiniteInput("span"));
    }
    if span <= 0.0 {
        return Err(KinematicsError::SpanNonPositive(span));
    }
    if sweep.abs() >= PI {
        return Err(KinematicsError::SweepOutOfRange(sweep));
    }
    let center = pose.position();
    let pivot_point = center + pivot.offset_sign() * 0.5 * span * pose.axis();
    let arm = Rotation2::new(sweep) * (center - pivot_point);
    Ok(Pose::at(pivot_point + arm, pose.heading + sweep))
}

pub fn tumble_step(pose: Pose, direction: TumbleDirection, body_length: f64) -> Result<Pose, KinematicsError> {
    if !pose.is_finite() {
        return Err(KinematicsError::NonFiniteInput("pose"));
    }
    if !body_length.is_finite() {
        return Err(KinematicsError::NonFiniteInput("body length"));
    }
    if body_length <= 0.0 {
        return Err(KinematicsError::LengthNonPositive(body_length));
    }
    let moved = pose.position() + direction.sign() * body_length * pose.axis();
    Ok(Pose {
        x: moved.x,
        y: moved.y,
        heading: pose.heading,
    })
}

/// Applies one broadcast step to one robot.
pub fn apply_step(pose: Pose, step: &StepCommand, robot: &RobotSpec) -> Result<Pose, KinematicsError> {
    match *step {
        StepCommand::PivotHalfStep { pivot, sweep } => pivot_half_step(pose, pivot, sweep, robot.pivot_span),
        StepCommand::TumbleStep { direction } => tumble_step(pose, direction, robot.body_length),
    }
}

/// Runs a broadcast schedule on every robot. Trajectories come back in the order
/// of `robots`.
pub fn simulate(
    robots: &[RobotSpec],
    initial: &BTreeMap<String, Pose>,
    schedule: &Schedule,
) -> Result<Vec<Trajectory>, KinematicsError> {
    simulate_with(robots, initial, schedule, &SimulationOptions::default())
}

pub fn simulate_with(
    robots: &[RobotSpec],
    initial: &BTreeMap<String, Pose>,
    schedule: &Schedule,
    options: &SimulationOptions,
) -> Result<Vec<Trajectory>, KinematicsError> {
    robots
        .iter()
        .enumerate()
        .map(|(index, robot)| {
            robot.validate()?;
            let start = *initial
                .get(&robot.id)
                .ok_or_else(|| KinematicsError::MissingInitialPose(robot.id.clone()))?;
            let mut rng = options.slip.map(|slip| {
                let mut rng = ChaCha8Rng::seed_from_u64(slip.seed);
                rng.set_stream(index as u64);
                (rng, slip.amplitude)
            });
            let mut poses = Vec::with_capacity(schedule.len() + 1);
            let mut modes = Vec::with_capacity(schedule.len());
            poses.push(start);
            let mut pose = start;
            for (step_index, step) in schedule.steps.iter().enumerate() {
                let step = match (*step, rng.as_mut()) {
                    (StepCommand::PivotHalfStep { pivot, sweep }, Some((rng, amplitude))) => {
                        let factor = 1.0 + *amplitude * rng.gen_range(-1.0..=1.0);
                        StepCommand::PivotHalfStep {
                            pivot,
                            sweep: sweep * factor,
                        }
                    }
                    (step, _) => step,
                };
                pose = apply_step(pose, &step, robot).map_err(|source| KinematicsError::Step {
                    step: step_index,
                    robot: robot.id.clone(),
                    source: Box::new(source),
                })?;
                poses.push(pose);
                modes.push(step.mode());
            }
            Ok(Trajectory {
                robot_id: robot.id.clone(),
                poses,
                modes,
            })
        })
        .collect()
}

/// Half-steps alternating between a front sweep of `+first` and a back sweep of
/// `-second`, starting on the front pivot. This is the walk described by
/// [`closed_form_position`].
pub fn alternating_schedule(first: f64, second: f64, half_steps: usize) -> Schedule {
    let steps = (1..=half_steps)
        .map(|i| {
            if i % 2 == 1 {
                StepCommand::pivot(Pivot::Front, first)
            } else {
                StepCommand::pivot(Pivot::Back, -second)
            }
        })
        .collect();
    Schedule::from_steps("alternating", steps)
}

/// Midpoint after `half_steps` steps of [`alternating_schedule`], evaluated as a
/// floor-indexed double sum instead of by iteration.
///
/// Half-step `i` turns the body between the body-frame angles
/// `a_i = (-1)^i floor(i/2) t1 + (-1)^(i-1) floor((i-1)/2) t2` and
/// `b_i = (-1)^(i-1) floor((i+1)/2) t1 + (-1)^i floor(i/2) t2`. The along-axis
/// term is `(-1)^i cos a_i + (-1)^(i-1) cos b_i`; the lateral term is
/// `sin a_i + sin b_i`, with no alternating factor. The body frame measures angles
/// from the back-pointing axis, hence the half-turn applied to the initial heading.
pub fn closed_form_position(
    span: f64,
    first: f64,
    second: f64,
    half_steps: i64,
    initial: Pose,
) -> Result<Vec2, KinematicsError> {
    if half_steps < 0 {
        return Err(KinematicsError::NegativeStepCount(half_steps));
    }
    if !span.is_finite() || !first.is_finite() || !second.is_finite() || !initial.is_finite() {
        return Err(KinematicsError::NonFiniteInput("closed-form arguments"));
    }
    if span <= 0.0 {
        return Err(KinematicsError::SpanNonPositive(span));
    }
    let mut sum = Vec2::zeros();
    for i in 1..=half_steps {
        // (-1)^i; (-1)^(i-1) is its negation.
        let parity = if i % 2 == 0 { 1.0 } else { -1.0 };
        let a = parity * (i / 2) as f64 * first - parity * ((i - 1) / 2) as f64 * second;
        let b = -parity * ((i + 1) / 2) as f64 * first + parity * (i / 2) as f64 * second;
        sum.x += parity * a.cos() - parity * b.cos();
        sum.y += a.sin() + b.sin();
    }
    let frame = Rotation2::new(initial.heading + PI);
    Ok(initial.position() + frame * (0.5 * span * sum))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deg(v: f64) -> f64 {
        v.to_radians()
    }

    fn close(a: Vec2, b: Vec2, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn half_turn_about_front_end_maps_center_across_pivot() {
        let p = pivot_half_step(Pose::new(0.0, 0.0, 0.0), Pivot::Front, deg(179.999_999_9), 10.0).unwrap();
        assert!(close(p.position(), Vec2::new(10.0, 0.0), 1e-7));
        assert!((p.heading.abs() - PI).abs() < 1e-8);
        // exactly pi is outside the open range
        assert_eq!(
            pivot_half_step(Pose::new(0.0, 0.0, 0.0), Pivot::Front, PI, 10.0),
            Err(KinematicsError::SweepOutOfRange(PI))
        );
    }

    #[test]
    fn quarter_turn_about_front_end() {
        let p = pivot_half_step(Pose::new(0.0, 0.0, 0.0), Pivot::Front, deg(90.0), 10.0).unwrap();
        assert!(close(p.position(), Vec2::new(5.0, -5.0), 1e-12));
        assert!((p.heading - deg(90.0)).abs() < 1e-15);
    }

    #[test]
    fn half_step_displacement_is_chord() {
        let p = pivot_half_step(Pose::new(0.0, 0.0, 0.0), Pivot::Front, deg(20.0), 10.0).unwrap();
        assert!((p.position().norm() - 10.0 * deg(10.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn pivot_step_rejects_bad_input() {
        let pose = Pose::new(0.0, 0.0, 0.0);
        assert_eq!(
            pivot_half_step(pose, Pivot::Back, 0.1, 0.0),
            Err(KinematicsError::SpanNonPositive(0.0))
        );
        assert!(matches!(
            pivot_half_step(pose, Pivot::Back, f64::NAN, 1.0),
            Err(KinematicsError::NonFiniteInput(_))
        ));
        assert!(matches!(
            pivot_half_step(
                Pose {
                    x: f64::INFINITY,
                    y: 0.0,
                    heading: 0.0
                },
                Pivot::Back,
                0.1,
                1.0
            ),
            Err(KinematicsError::NonFiniteInput(_))
        ));
    }

    #[test]
    fn tumble_moves_one_length_along_axis() {
        let f = tumble_step(Pose::new(0.0, 0.0, 0.0), TumbleDirection::Forward, 10.0).unwrap();
        assert_eq!((f.x, f.y, f.heading), (10.0, 0.0, 0.0));
        let b = tumble_step(Pose::new(0.0, 0.0, 0.0), TumbleDirection::Backward, 10.0).unwrap();
        assert_eq!((b.x, b.y), (-10.0, 0.0));
        let up = tumble_step(Pose::new(3.0, 4.0, deg(90.0)), TumbleDirection::Forward, 5.0).unwrap();
        assert!(close(up.position(), Vec2::new(3.0, 9.0), 1e-12));
        assert_eq!(up.heading, deg(90.0));
        assert_eq!(
            tumble_step(Pose::new(0.0, 0.0, 0.0), TumbleDirection::Forward, -1.0),
            Err(KinematicsError::LengthNonPositive(-1.0))
        );
    }

    #[test]
    fn normalize_angle_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(normalize_angle(0.0), 0.0);
    }

    #[test]
    fn robot_validation() {
        assert!(RobotSpec::centered_magnet("a", 5.0).validate().is_ok());
        assert!(RobotSpec::legged("b", 10.0, 3.0).validate().is_ok());
        assert!(RobotSpec::legged("c", 10.0, 12.0).validate().is_err());
        let mut odd = RobotSpec::centered_magnet("d", 5.0);
        odd.pivot_span = 4.0;
        assert!(odd.validate().is_err());
    }

    #[test]
    fn empty_schedule_keeps_initial_pose() {
        let robots = vec![RobotSpec::centered_magnet("a", 5.0)];
        let initial = BTreeMap::from([("a".to_string(), Pose::new(1.0, 2.0, 0.3))]);
        let out = simulate(&robots, &initial, &Schedule::new("empty")).unwrap();
        assert_eq!(out[0].poses, vec![Pose::new(1.0, 2.0, 0.3)]);
        assert!(out[0].modes.is_empty());
    }

    #[test]
    fn missing_initial_pose_is_reported() {
        let robots = vec![RobotSpec::centered_magnet("a", 5.0)];
        let err = simulate(&robots, &BTreeMap::new(), &Schedule::new("x")).unwrap_err();
        assert_eq!(err, KinematicsError::MissingInitialPose("a".into()));
    }

    #[test]
    fn step_errors_carry_index_and_robot() {
        let robots = vec![RobotSpec::centered_magnet("a", 5.0)];
        let initial = BTreeMap::from([("a".to_string(), Pose::new(0.0, 0.0, 0.0))]);
        let schedule = Schedule::from_steps(
            "bad",
            vec![
                StepCommand::pivot(Pivot::Front, 0.1),
                StepCommand::pivot(Pivot::Back, 4.0),
            ],
        );
        match simulate(&robots, &initial, &schedule).unwrap_err() {
            KinematicsError::Step { step, robot, .. } => {
                assert_eq!(step, 1);
                assert_eq!(robot, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schedule_inverse_returns_to_start() {
        let robots = vec![RobotSpec::legged("a", 10.0, 7.0)];
        let start = Pose::new(4.0, -2.0, 0.7);
        let initial = BTreeMap::from([("a".to_string(), start)]);
        let mut schedule = alternating_schedule(deg(30.0), deg(12.0), 7);
        schedule.push(StepCommand::tumble(TumbleDirection::Forward));
        let forward = simulate(&robots, &initial, &schedule).unwrap();
        let back_initial = BTreeMap::from([("a".to_string(), forward[0].final_pose())]);
        let back = simulate(&robots, &back_initial, &schedule.inverse()).unwrap();
        let end = back[0].final_pose();
        assert!(close(end.position(), start.position(), 1e-12));
        assert!(angle_difference(end.heading, start.heading).abs() < 1e-12);
    }

    #[test]
    fn closed_form_zero_steps_is_initial_position() {
        let p = closed_form_position(10.0, deg(20.0), deg(20.0), 0, Pose::new(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(p, Vec2::zeros());
        assert_eq!(
            closed_form_position(10.0, 0.1, 0.1, -1, Pose::new(0.0, 0.0, 0.0)),
            Err(KinematicsError::NegativeStepCount(-1))
        );
    }

    #[test]
    fn closed_form_two_steps_matches_iteration() {
        // Oracle: two explicit rigid rotations.
        let start = Pose::new(0.0, 0.0, 0.0);
        let a = pivot_half_step(start, Pivot::Front, deg(20.0), 10.0).unwrap();
        let b = pivot_half_step(a, Pivot::Back, -deg(20.0), 10.0).unwrap();
        let cf = closed_form_position(10.0, deg(20.0), deg(20.0), 2, start).unwrap();
        assert!(close(cf, b.position(), 1e-12));
    }

    #[test]
    fn closed_form_is_linear_in_span() {
        let start = Pose::new(0.0, 0.0, 0.4);
        for k in [1, 5, 17] {
            let one = closed_form_position(4.0, deg(35.0), deg(12.0), k, start).unwrap();
            let two = closed_form_position(8.0, deg(35.0), deg(12.0), k, start).unwrap();
            assert!(close(two, 2.0 * one, 1e-12));
        }
    }

    #[test]
    fn slip_noise_is_seeded_and_disabled_by_default() {
        let robots = vec![
            RobotSpec::centered_magnet("a", 5.0),
            RobotSpec::centered_magnet("b", 9.0),
        ];
        let initial = BTreeMap::from([
            ("a".to_string(), Pose::new(0.0, 0.0, 0.0)),
            ("b".to_string(), Pose::new(20.0, 0.0, 0.0)),
        ]);
        let schedule = alternating_schedule(deg(20.0), deg(20.0), 12);
        let noisy = SimulationOptions {
            slip: Some(SlipNoise {
                amplitude: 0.1,
                seed: 7,
            }),
        };
        let clean = simulate(&robots, &initial, &schedule).unwrap();
        let first = simulate_with(&robots, &initial, &schedule, &noisy).unwrap();
        let second = simulate_with(&robots, &initial, &schedule, &noisy).unwrap();
        assert_eq!(first, second);
        assert_ne!(first, clean);
    }
}
