use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use pivotwalk::controllability::{controllability_report, ControllabilityError, SwarmSystem};
use pivotwalk::io::{
    format_number, parse_scenario, plan_summary, render_svg, round_significant, scenario_to_toml, to_json,
    trajectories_to_csv, trajectories_to_json, write_file, IoError, SvgOptions,
};
use pivotwalk::kinematics::{simulate_with, KinematicsError, Mode, SimulationOptions, SlipNoise, Trajectory};
use pivotwalk::paths::{solve_distance_change, DistanceChangeRequest, GapOrder, PathError};
use pivotwalk::planner::{
    plan_contraction, plan_expansion, plan_formation, plan_pattern, plan_reverse, regular_polygon, solve_leader_line,
    validate_plan, LineSolution, ManeuverPlan, PatternShape, PlanError, Rect, ReverseOptions, Scenario,
};
use pivotwalk::sweep::{run_sweep, sweep_to_csv, SweepConfig, SweepKind};
use pivotwalk::{Pose, RobotSpec, Vec2};

#[derive(Parser)]
#[command(
    name = "pivotwalk",
    version,
    about = "Simulate and plan broadcast-controlled pivot-walking millirobots"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario's step schedule.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Slip noise amplitude, degrees per half-step.
        #[arg(long)]
        slip: Option<f64>,
    },
    /// Single-phase planners.
    #[command(subcommand)]
    Plan(PlanCommand),
    /// Multi-phase maneuvers through a channel.
    #[command(subcommand)]
    Maneuver(ManeuverCommand),
    /// Rank of the swarm controllability matrix.
    Ctrb {
        /// Span ratios, comma separated.
        #[arg(
            long,
            value_delimiter = ',',
            required_unless_present = "spans",
            conflicts_with = "spans"
        )]
        ratios: Vec<f64>,
        /// Spans in mm, comma separated; divided by --reference.
        #[arg(long, value_delimiter = ',')]
        spans: Vec<f64>,
        /// Reference length for --spans; defaults to the largest span.
        #[arg(long)]
        reference: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Final distance between two robots over sweep angles and step counts.
    Sweep(SweepArgs),
}

#[derive(Subcommand)]
enum PlanCommand {
    /// Straight walk of one robot to its target.
    Line {
        #[command(flatten)]
        common: Common,
        /// Robot to move; defaults to the first one.
        #[arg(long)]
        robot: Option<String>,
    },
    /// One straight walk for all robots plus solved spans.
    Swarm {
        #[command(flatten)]
        common: Common,
    },
    /// Triangle walk that changes the gap between two robots.
    Distance {
        #[command(flatten)]
        common: Common,
        /// Desired final gap, mm.
        #[arg(long)]
        gap: f64,
        /// Swap the order of the robots.
        #[arg(long)]
        swap: bool,
    },
    /// Regular polygon pattern, generated from flags unless --scenario is given.
    Pattern(PatternArgs),
}

#[derive(Subcommand)]
enum ManeuverCommand {
    Expansion {
        #[command(flatten)]
        common: Common,
    },
    Contraction {
        #[command(flatten)]
        common: Common,
    },
    Reverse {
        #[command(flatten)]
        common: Common,
        /// Lateral gap after the swap, mm.
        #[arg(long)]
        final_gap: Option<f64>,
        /// Tumbles in the last phase when the scenario has no final targets.
        #[arg(long)]
        final_tumbles: Option<usize>,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Trajectory output; `.json` for the structured form, CSV otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG plot of the trajectories.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Plan document (JSON); printed to stdout when omitted.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Seed for slip noise.
    #[arg(long)]
    seed: Option<u64>,
    /// Placement tolerance, mm.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct PatternArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "hexagon")]
    shape: ShapeArg,
    /// Side length, mm.
    #[arg(long, default_value_t = 20.0)]
    side: f64,
    /// Polygon center, `x,y` in mm.
    #[arg(long, value_parser = parse_point, default_value = "60,60")]
    center: Vec2,
    /// Rotation of the first vertex, degrees.
    #[arg(long, default_value_t = 0.0)]
    rotation: f64,
    /// One span per vertex, mm.
    #[arg(long, value_delimiter = ',', default_value = "3,3,7,7,9,9")]
    spans: Vec<f64>,
    /// Body length shared by all robots, mm; defaults to the largest span.
    #[arg(long)]
    body_length: Option<f64>,
    /// Sweep of the pattern walk, degrees.
    #[arg(long, default_value_t = 20.0)]
    sweep: f64,
    #[arg(long, default_value_t = 12)]
    half_steps: usize,
    /// Initial heading, degrees.
    #[arg(long, default_value_t = 0.0)]
    heading: f64,
    /// Translation from pattern to final targets, `x,y` in mm.
    #[arg(long, value_parser = parse_point)]
    shift: Option<Vec2>,
    /// Workspace as `xmin,ymin,xmax,ymax`.
    #[arg(long, value_delimiter = ',')]
    workspace: Vec<f64>,
    /// Write the generated scenario here.
    #[arg(long)]
    emit_scenario: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Triangle,
    Square,
    Pentagon,
    Hexagon,
}

impl From<ShapeArg> for PatternShape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Triangle => PatternShape::Triangle,
            ShapeArg::Square => PatternShape::Square,
            ShapeArg::Pentagon => PatternShape::Pentagon,
            ShapeArg::Hexagon => PatternShape::Hexagon,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "steps")]
    kind: KindArg,
    #[arg(long, default_value_t = 20.0)]
    long_span: f64,
    #[arg(long, default_value_t = 10.0)]
    short_span: f64,
    /// Starting distance, long robot behind, mm.
    #[arg(long, default_value_t = 20.0)]
    initial_gap: f64,
    /// Sweep of the steps sweep, degrees.
    #[arg(long, default_value_t = 24.0)]
    sweep: f64,
    /// Half-steps before the direction change in the angle sweep.
    #[arg(long, default_value_t = 12)]
    out_steps: usize,
    /// Total half-steps in the angle sweep.
    #[arg(long, default_value_t = 33)]
    total_steps: usize,
    /// Sweeps in degrees: a list `a,b,c` or a range `start:end:step`.
    #[arg(long, value_parser = parse_series, default_value = "1:90:1")]
    angles: Series,
    /// Half-steps per triangle leg: a list or a range; even values.
    #[arg(long, value_parser = parse_series, default_value = "2:60:2")]
    legs: Series,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Steps,
    Angle,
    Grid,
}

#[derive(Clone, Debug)]
struct Series(Vec<f64>);

fn parse_point(s: &str) -> Result<Vec2, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected `x,y`, got '{s}'"));
    }
    let x = parts[0].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let y = parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok(Vec2::new(x, y))
}

fn parse_series(s: &str) -> Result<Series, String> {
    let number = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    if s.contains(':') {
        let parts: Vec<f64> = s.split(':').map(number).collect::<Result<_, _>>()?;
        let [start, end, step] = parts[..] else {
            return Err(format!("expected `start:end:step`, got '{s}'"));
        };
        if step.is_nan() || step <= 0.0 {
            return Err("range step must be positive".into());
        }
        let count = ((end - start) / step + 1e-9).floor();
        if count < 0.0 {
            return Err("range end lies before its start".into());
        }
        Ok(Series((0..=count as usize).map(|i| start + i as f64 * step).collect()))
    } else {
        Ok(Series(s.split(',').map(number).collect::<Result<_, _>>()?))
    }
}

/// Error printed as `error[CODE]: message`.
struct Failure {
    code: &'static str,
    message: String,
    exit: u8,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

impl Failure {
    fn validation(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            exit: EXIT_VALIDATION,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let exit = match e {
            IoError::Io { .. } | IoError::Empty => EXIT_FAILURE,
            IoError::Parse { .. } | IoError::Schema(_) | IoError::Unit(_) => EXIT_VALIDATION,
        };
        Self {
            code: e.code(),
            message: e.to_string(),
            exit,
        }
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        Self {
            code: e.code(),
            exit: if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_INFEASIBLE
            },
            message: e.to_string(),
        }
    }
}

impl From<PathError> for Failure {
    fn from(e: PathError) -> Self {
        PlanError::from(e).into()
    }
}

impl From<KinematicsError> for Failure {
    fn from(e: KinematicsError) -> Self {
        Failure::validation("KINEMATICS", e.to_string())
    }
}

impl From<ControllabilityError> for Failure {
    fn from(e: ControllabilityError) -> Self {
        Failure::validation("CONTROLLABILITY", e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("error[USAGE]: {first}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.message.replace('\n', " "));
            ExitCode::from(f.exit)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate { common, slip } => simulate_cmd(&common, slip),
        Command::Plan(PlanCommand::Line { common, robot }) => line_cmd(&common, robot.as_deref()),
        Command::Plan(PlanCommand::Swarm { common }) => {
            let scenario = load(&common)?;
            formation_cmd(&common, &scenario)
        }
        Command::Plan(PlanCommand::Distance { common, gap, swap }) => distance_cmd(&common, gap, swap),
        Command::Plan(PlanCommand::Pattern(args)) => pattern_cmd(&args),
        Command::Maneuver(ManeuverCommand::Expansion { common }) => {
            let scenario = load(&common)?;
            let plan = plan_expansion(&scenario)?;
            emit_plan(&common, &scenario, &plan, json!({}))
        }
        Command::Maneuver(ManeuverCommand::Contraction { common }) => {
            let scenario = load(&common)?;
            let plan = plan_contraction(&scenario)?;
            emit_plan(&common, &scenario, &plan, json!({}))
        }
        Command::Maneuver(ManeuverCommand::Reverse {
            common,
            final_gap,
            final_tumbles,
        }) => {
            let scenario = load(&common)?;
            let options = ReverseOptions {
                final_gap,
                final_tumbles,
            };
            let plan = plan_reverse(&scenario, &options)?;
            emit_plan(&common, &scenario, &plan, json!({}))
        }
        Command::Ctrb {
            ratios,
            spans,
            reference,
            out,
        } => ctrb_cmd(ratios, spans, reference, out.as_deref()),
        Command::Sweep(args) => sweep_cmd(&args),
    }
}

fn load(common: &Common) -> Result<Scenario, Failure> {
    let path = common
        .scenario
        .as_ref()
        .ok_or_else(|| Failure::validation("USAGE", "--scenario <path> is required"))?;
    let mut scenario = parse_scenario(path)?;
    if let Some(t) = common.tolerance {
        if t.is_nan() || t <= 0.0 {
            return Err(Failure::validation("USAGE", "--tolerance must be positive"));
        }
        scenario.solver.tolerance = t;
    }
    Ok(scenario)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => Ok(write_file(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_trajectories(common: &Common, scenario: &Scenario, trajectories: &[Trajectory]) -> Result<(), Failure> {
    if let Some(out) = &common.out {
        let text = if out.extension().is_some_and(|e| e == "json") {
            trajectories_to_json(trajectories)?
        } else {
            trajectories_to_csv(trajectories)?
        };
        write_file(out, &text)?;
    }
    if let Some(svg) = &common.svg {
        write_file(svg, &render_svg(trajectories, scenario, &SvgOptions::default()))?;
    }
    Ok(())
}

fn simulate_cmd(common: &Common, slip: Option<f64>) -> Result<(), Failure> {
    let scenario = load(common)?;
    let schedule = scenario
        .schedule
        .clone()
        .ok_or_else(|| Failure::validation("SCHEMA", "scenario has no [[schedule]] to simulate"))?;
    let options = SimulationOptions {
        slip: slip.map(|deg| SlipNoise {
            amplitude: deg.to_radians(),
            seed: common.seed.unwrap_or(0),
        }),
    };
    let trajectories = simulate_with(&scenario.robots, &scenario.initial, &schedule, &options)?;
    if common.out.is_none() {
        print!("{}", trajectories_to_csv(&trajectories)?);
    }
    write_trajectories(common, &scenario, &trajectories)
}

fn degrees(rad: f64) -> f64 {
    round_significant(rad.to_degrees())
}

fn line_json(line: &LineSolution) -> Value {
    json!({
        "sweep_deg": degrees(line.sweep),
        "half_steps": line.half_steps,
        "heading_deg": degrees(line.heading),
        "gain": round_significant(line.gain()),
    })
}

fn emit_plan(common: &Common, scenario: &Scenario, plan: &ManeuverPlan, extra: Value) -> Result<(), Failure> {
    let trajectories = plan.simulate()?;
    let report = validate_plan(plan, scenario);
    let finals: BTreeMap<String, Value> = plan
        .final_poses()
        .iter()
        .map(|(id, p)| {
            let v = json!({
                "x_mm": round_significant(p.x),
                "y_mm": round_significant(p.y),
                "heading_deg": degrees(p.heading),
            });
            (id.clone(), v)
        })
        .collect();
    let mut doc = json!({
        "plan": plan_summary(plan),
        "final": finals,
        "validation": {
            "min_pairwise_distance_mm": report.min_pairwise_distance.map(round_significant),
            "min_obstacle_clearance_mm": report.min_obstacle_clearance.map(round_significant),
            "workspace_contained": report.workspace_contained,
            "terminal_errors_mm": report.terminal_errors.iter().map(|(id, e)| (id.clone(), round_significant(*e))).collect::<BTreeMap<_, _>>(),
            "findings": report.findings,
        },
    });
    if let (Value::Object(doc), Value::Object(extra)) = (&mut doc, extra) {
        doc.extend(extra);
    }
    write_or_print(common.plan.as_deref(), &to_json(&doc))?;
    write_trajectories(common, scenario, &trajectories)
}

fn line_cmd(common: &Common, robot: Option<&str>) -> Result<(), Failure> {
    let scenario = load(common)?;
    let spec = match robot {
        Some(id) => scenario
            .robot(id)
            .ok_or_else(|| Failure::validation("SCHEMA", format!("unknown robot '{id}'")))?,
        None => scenario
            .robots
            .first()
            .ok_or_else(|| Failure::validation("SCHEMA", "scenario has no robots"))?,
    };
    let goal = scenario
        .final_targets
        .get(&spec.id)
        .or_else(|| scenario.pattern_targets.get(&spec.id))
        .ok_or_else(|| PlanError::MissingTarget(spec.id.clone()))?;
    let start = scenario.initial[&spec.id].position();
    let line = solve_leader_line(start, *goal, spec.pivot_span, &scenario.solver)?;
    let initial = BTreeMap::from([(spec.id.clone(), Pose::at(start, line.heading))]);
    let mut plan = ManeuverPlan::new("line", vec![spec.clone()], initial);
    plan.push_phase(Mode::Pivot, "straight walk", line.schedule())?;
    let mut single = scenario.clone();
    single.robots = vec![spec.clone()];
    single.initial = plan.initial.clone();
    single.final_targets = BTreeMap::from([(spec.id.clone(), *goal)]);
    single.pattern_targets.clear();
    emit_plan(
        common,
        &single,
        &plan,
        json!({ "line": line_json(&line), "robot": spec.id }),
    )
}

fn formation_cmd(common: &Common, scenario: &Scenario) -> Result<(), Failure> {
    let (solution, plan) = plan_formation(scenario)?;
    let round_map = |m: &BTreeMap<String, f64>| {
        m.iter()
            .map(|(k, v)| (k.clone(), round_significant(*v)))
            .collect::<BTreeMap<_, _>>()
    };
    let extra = json!({
        "solution": {
            "leader": solution.leader,
            "line": line_json(&solution.line()),
            "spans_mm": round_map(&solution.lengths),
            "span_residuals_mm": round_map(&solution.residuals),
        }
    });
    let mut check = scenario.clone();
    check.robots = plan.robots.clone();
    check.initial = plan.initial.clone();
    emit_plan(common, &check, &plan, extra)
}

fn distance_cmd(common: &Common, gap: f64, swap: bool) -> Result<(), Failure> {
    let scenario = load(common)?;
    let [first, second] = &scenario.robots[..] else {
        return Err(Failure::validation("SCHEMA", "plan distance needs exactly two robots"));
    };
    let (p1, p2) = (scenario.initial[&first.id], scenario.initial[&second.id]);
    let axis = p1.axis();
    let along = (p2.position() - p1.position()).dot(&axis);
    // Robot 2 of the request is the one ahead on the axis.
    let (behind, ahead) = if along >= 0.0 { (first, second) } else { (second, first) };
    let request = DistanceChangeRequest {
        spans: (behind.pivot_span, ahead.pivot_span),
        initial_gap: along.abs(),
        desired_gap: gap,
        order: if swap { GapOrder::Swap } else { GapOrder::Preserve },
    };
    let solution = solve_distance_change(&request, &scenario.solver.limits())?;
    let mut plan = ManeuverPlan::new("distance", scenario.robots.clone(), scenario.initial.clone());
    plan.push_phase(Mode::Pivot, "triangle walk", solution.schedule()?)?;
    let finals = plan.final_poses();
    let final_gap = (finals[&ahead.id].position() - finals[&behind.id].position()).dot(&axis);
    let extra = json!({
        "distance": {
            "behind": behind.id,
            "ahead": ahead.id,
            "sweep_deg": degrees(solution.sweep),
            "half_steps_per_leg": solution.half_steps_per_leg,
            "lead": solution.lead,
            "final_signed_gap_mm": round_significant(final_gap),
        }
    });
    emit_plan(common, &scenario, &plan, extra)
}

fn pattern_cmd(args: &PatternArgs) -> Result<(), Failure> {
    if args.common.scenario.is_some() {
        let scenario = load(&args.common)?;
        return formation_cmd(&args.common, &scenario);
    }
    let shape = PatternShape::from(args.shape);
    if args.spans.len() != shape.sides() {
        return Err(Failure::validation(
            "USAGE",
            format!(
                "a {} needs {} spans, got {}",
                format!("{shape:?}").to_lowercase(),
                shape.sides(),
                args.spans.len()
            ),
        ));
    }
    let workspace = match args.workspace[..] {
        [] => Rect::default(),
        [x0, y0, x1, y1] => Rect::new(Vec2::new(x0, y0), Vec2::new(x1, y1)),
        _ => return Err(Failure::validation("USAGE", "--workspace takes xmin,ymin,xmax,ymax")),
    };
    let targets = regular_polygon(shape, args.side, args.center, args.rotation.to_radians());
    let line = LineSolution {
        sweep: args.sweep.to_radians(),
        half_steps: args.half_steps,
        heading: args.heading.to_radians(),
    };
    let starts = plan_pattern(&targets, &args.spans, &line, Some(&workspace))?;
    let body = args
        .body_length
        .unwrap_or_else(|| args.spans.iter().copied().fold(f64::MIN, f64::max));
    let ids: Vec<String> = (1..=targets.len()).map(|i| format!("m{i}")).collect();
    let robots: Vec<RobotSpec> = ids
        .iter()
        .zip(&args.spans)
        .map(|(id, &span)| RobotSpec::legged(id.clone(), body, span))
        .collect();
    let mut scenario = Scenario {
        robots,
        initial: ids
            .iter()
            .zip(&starts)
            .map(|(id, p)| (id.clone(), Pose::at(*p, line.heading)))
            .collect(),
        pattern_targets: ids.iter().cloned().zip(targets.iter().copied()).collect(),
        final_targets: match args.shift {
            Some(shift) => ids.iter().cloned().zip(targets.iter().map(|t| t + shift)).collect(),
            None => BTreeMap::new(),
        },
        workspace,
        ..Scenario::default()
    };
    scenario.solver.half_steps = Some(args.half_steps);
    if let Some(t) = args.common.tolerance {
        scenario.solver.tolerance = t;
    }
    scenario.validate().map_err(PlanError::from)?;
    if let Some(path) = &args.emit_scenario {
        write_file(path, &scenario_to_toml(&scenario)?)?;
    }
    formation_cmd(&args.common, &scenario)
}

fn ctrb_cmd(ratios: Vec<f64>, spans: Vec<f64>, reference: Option<f64>, out: Option<&Path>) -> Result<(), Failure> {
    let system = if ratios.is_empty() {
        let reference = reference.unwrap_or_else(|| spans.iter().copied().fold(f64::MIN, f64::max));
        SwarmSystem::from_spans(&spans, reference)?
    } else {
        SwarmSystem::new(ratios)?
    };
    let report = controllability_report(&system)?;
    let doc = json!({
        "ratios": system.ratios().iter().map(|r| round_significant(*r)).collect::<Vec<_>>(),
        "robots": report.robots,
        "state_dimension": 2 * report.robots,
        "rank": report.rank,
        "warnings": report.warnings,
    });
    write_or_print(out, &to_json(&doc))
}

fn sweep_cmd(args: &SweepArgs) -> Result<(), Failure> {
    let legs = args
        .legs
        .0
        .iter()
        .map(|&k| {
            if k >= 0.0 && k.fract() == 0.0 {
                Ok(k as usize)
            } else {
                Err(Failure::validation(
                    "USAGE",
                    format!("leg length {} is not a whole number", format_number(k)),
                ))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let config = SweepConfig {
        long_span: args.long_span,
        short_span: args.short_span,
        initial_gap: args.initial_gap,
        sweep_deg: args.sweep,
        out_steps: args.out_steps,
        total_steps: args.total_steps,
        angles_deg: args.angles.0.clone(),
        leg_steps: legs,
    };
    let kind = match args.kind {
        KindArg::Steps => SweepKind::Steps,
        KindArg::Angle => SweepKind::Angle,
        KindArg::Grid => SweepKind::Grid,
    };
    let rows = run_sweep(kind, &config)?;
    write_or_print(args.out.as_deref(), &sweep_to_csv(&rows))
}
