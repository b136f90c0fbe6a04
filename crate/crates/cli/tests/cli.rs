use std::path::PathBuf;
use std::process::{Command, Output};

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pivotwalk"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// One line of the form `error[CODE]: message`.
fn assert_error_line(o: &Output, code: &str) {
    let err = stderr(o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("error[{code}]: ")), "{err}");
}

#[test]
fn simulate_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out/triangle_pair.csv");
    let svg = dir.path().join("triangle_pair.svg");
    let o = run(&[
        "simulate",
        "--scenario",
        &scenario("triangle_pair.toml"),
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("step_index,robot_id,x_mm,y_mm,heading_deg,mode\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 17);
    assert!(std::fs::read_to_string(&svg)
        .unwrap()
        .contains("<polyline id=\"path-long\""));
}

#[test]
fn outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let csv = dir.path().join(format!("rev{i}.csv"));
        let svg = dir.path().join(format!("rev{i}.svg"));
        let plan = dir.path().join(format!("rev{i}.json"));
        let o = run(&[
            "maneuver",
            "reverse",
            "--scenario",
            &scenario("reverse.toml"),
            "--out",
            csv.to_str().unwrap(),
            "--svg",
            svg.to_str().unwrap(),
            "--plan",
            plan.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outputs.push([csv, svg, plan].map(|p| std::fs::read(p).unwrap()));
    }
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn swarm_plan_reports_validation() {
    let o = run(&["plan", "swarm", "--scenario", &scenario("hexagon.toml")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(doc["validation"]["findings"].as_array().unwrap().is_empty());
    assert_eq!(doc["plan"]["phases"].as_array().unwrap().len(), 2);
}

#[test]
fn ctrb_ranks() {
    let o = run(&["ctrb", "--ratios", "0.3,0.5,0.7,0.9"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["rank"], 4);
    let o = run(&["ctrb", "--ratios", "0.3,0.3"]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["rank"], 2);
}

#[test]
fn sweep_is_stable_on_stdout() {
    let a = run(&["sweep", "--kind", "steps"]);
    let b = run(&["sweep", "--kind", "steps"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("sweep_deg,half_steps,final_gap_mm\n"));
    assert_eq!(stdout(&a).lines().count(), 31);
}

#[test]
fn distance_plan() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pair.toml");
    std::fs::write(
        &path,
        r#"schema_version = 1

[units]
length = "mm"
angle = "deg"

[[robots]]
id = "long"
body_length = 15.0

[[robots]]
id = "short"
body_length = 5.0

[initial]
long = { x = 40.0, y = 60.0, heading = 0.0 }
short = { x = 60.0, y = 60.0, heading = 0.0 }
"#,
    )
    .unwrap();
    let o = run(&["plan", "distance", "--scenario", path.to_str().unwrap(), "--gap", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&[
        "plan",
        "distance",
        "--scenario",
        path.to_str().unwrap(),
        "--gap",
        "5000",
        "--swap",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_error_line(&o, "INFEASIBLE");
}

#[test]
fn missing_file_fails_with_one_line() {
    let o = run(&["simulate", "--scenario", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert_error_line(&o, "IO");
}

#[test]
fn schema_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "schema_version = 1\n[units]\nlength = \"cm\"\nangle = \"deg\"\n").unwrap();
    let o = run(&["simulate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_error_line(&o, "UNIT");

    std::fs::write(&path, "schema_version = 1\nbogus = 3\n").unwrap();
    let o = run(&["simulate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_error_line(&o, "PARSE");
}

#[test]
fn usage_errors_exit_two() {
    let o = run(&["plan", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert_error_line(&o, "USAGE");
    let o = run(&["ctrb", "--ratios", "0.3,1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn infeasible_maneuver_exits_three() {
    // The opening is far narrower than the robots' strides allow.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("narrow.toml");
    let text = std::fs::read_to_string(scenario("reverse.toml"))
        .unwrap()
        .replace("width = 15.0", "width = 0.5");
    std::fs::write(&path, text).unwrap();
    let o = run(&["maneuver", "reverse", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert_eq!(stderr(&o).lines().count(), 1);
}
