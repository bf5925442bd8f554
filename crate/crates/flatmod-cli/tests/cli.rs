use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatmod")).args(args).output().expect("spawn flatmod")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn square_torus_invariants() {
    let v = json(&run(&["surface", "invariants", &fixture("square_torus.json")]));
    assert_eq!(v["schema"], "flatmod/metric-report");
    assert_eq!(v["version"], 1);
    let d = &v["data"];
    assert!((d["systole"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((d["diameter"].as_f64().unwrap() - 0.5_f64.sqrt()).abs() < 0.02 * 0.5_f64.sqrt());
}

#[test]
fn build_writes_a_normalised_surface() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hex.json");
    let v = json(&run(&["surface", "build", &fixture("hexagon_pattern2.json"), "-o", out.to_str().unwrap()]));
    let d = &v["data"];
    assert_eq!(d["genus"], 1);
    assert!((d["area"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let total: f64 = d["cone_angles"].as_array().unwrap().iter().map(|c| c["angle"].as_f64().unwrap()).sum();
    assert_eq!(d["cone_angles"].as_array().unwrap().len(), 2);
    assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-9);

    let check = json(&run(&["surface", "check", out.to_str().unwrap()]));
    assert_eq!(check["data"]["ok"], true);
}

#[test]
fn build_without_output_prints_a_surface_file() {
    let out = run(&["surface", "build", &fixture("square_polygon.json")]);
    let v = json(&out);
    assert_eq!(v["triangles"].as_array().unwrap().len(), 2);
    assert_eq!(v["marked"].as_array().unwrap().len(), 1);
}

#[test]
fn malformed_inputs_exit_2() {
    assert_eq!(code(&run(&["surface", "build", &fixture("bad_gluing.json")])), 2);
    assert_eq!(code(&run(&["surface", "check", "/nonexistent/surface.json"])), 2);
    assert_eq!(code(&run(&["strata", "--angles", "3/x", "--M", "2"])), 2);
    assert_eq!(code(&run(&["chyp", "distance", "--x", "[1,2]", "--y", "[[1,0]]"])), 2);
    assert_eq!(code(&run(&["no-such-command"])), 2);
}

#[test]
fn geometric_inconsistency_exits_3() {
    assert_eq!(code(&run(&["surface", "build", &fixture("mismatched_sides.json")])), 3);
}

#[test]
fn strata_leaf_report() {
    let v = json(&run(&["strata", "--angles", "3/2,1/2", "--M", "5"]));
    assert_eq!(v["schema"], "flatmod/leaf-report");
    let d = &v["data"];
    assert_eq!(d["p_strata"].as_array().unwrap().len(), 2);
    assert_eq!(d["cusps"], 2);
    assert_eq!(d["punctures"], 4);

    let v = json(&run(&["strata", "--angles", "3/2,1/2", "--M", "2"]));
    assert_eq!(v["data"]["punctures"], 2);
}

#[test]
fn strata_table_and_counts_as_csv() {
    let out = run(&["strata", "--table1", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let headers = rows.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["n", "k", "m", "M", "label"]);
    assert!(rows.records().count() >= 16);

    let out = run(&["strata", "--y1", "--max-M", "8", "--format", "csv"]);
    assert!(out.status.success());
    let mut rd = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<Vec<u64>> =
        rd.records().map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[0], [2, 1, 1, 2]);
    for r in &rows {
        assert_eq!(r[1] + r[2], r[3]);
    }
}

#[test]
fn inadmissible_datum_exits_3() {
    // Gauss-Bonnet fails for every genus
    assert_eq!(code(&run(&["strata", "--angles", "1/3,1/3", "--M", "2"])), 3);
}

#[test]
fn s4_kite_on_the_square_torus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kite.json");
    let v = json(&run(&[
        "surgery",
        "apply",
        "--spec",
        &fixture("s4_kite.json"),
        "--surface",
        &fixture("square_torus.json"),
        "-o",
        out.to_str().unwrap(),
    ]));
    let d = &v["data"];
    assert_eq!(d["kind"], "S4");
    assert_eq!(d["cone_angles"].as_array().unwrap().len(), 3);
    assert_eq!(d["stratum_cone_angle"], serde_json::json!([1, 2]));
    assert!(d["width"].as_f64().unwrap() > 0.0);
    let area = d["area"].as_f64().unwrap();
    assert!((1.0 - area - d["defect"].as_f64().unwrap()).abs() < 1e-9);

    let check = json(&run(&["surface", "check", out.to_str().unwrap()]));
    assert_eq!(check["data"]["surface"]["genus"], 1);
    assert_eq!(check["data"]["surface"]["cone_angles"].as_array().unwrap().len(), 3);
}

#[test]
fn s1_then_reverse_restores_the_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let after = dir.path().join("after.json");
    let back = dir.path().join("back.json");
    let v = json(&run(&[
        "surgery",
        "apply",
        "--spec",
        &fixture("s1_sphere.json"),
        "--surface",
        &fixture("quarter_sphere.json"),
        "-o",
        after.to_str().unwrap(),
    ]));
    let labels: Vec<u64> = v["data"]["new_labels"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    let (from, to) = (labels[0].to_string(), labels[1].to_string());
    let r = json(&run(&[
        "surgery",
        "reverse",
        "--surface",
        after.to_str().unwrap(),
        "--from",
        &from,
        "--to",
        &to,
        "-o",
        back.to_str().unwrap(),
    ]));
    assert_eq!(r["data"]["reversed"], true);
    let mut angles: Vec<f64> = r["data"]["result"]["cone_angles"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["angle"].as_f64().unwrap())
        .collect();
    angles.sort_by(f64::total_cmp);
    let pi = std::f64::consts::PI;
    for (a, b) in angles.iter().zip([pi / 2.0, pi / 2.0, pi]) {
        assert!((a - b).abs() < 1e-7, "{angles:?}");
    }
}

#[test]
fn blocked_reverse_reports_absence() {
    let v = json(&run(&["surgery", "reverse", "--surface", &fixture("s2_blocked.json"), "--from", "3", "--to", "1"]));
    assert_eq!(v["data"]["reversed"], false);
    assert_eq!(v["data"]["blocked"], true);
}

#[test]
fn invalid_split_exits_3() {
    let out = run(&["surgery", "apply", "--spec", &fixture("invalid_split.json"), "--surface", &fixture("quarter_sphere.json")]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("split angle"));
}

#[test]
fn chyp_distance_and_volume() {
    let v = json(&run(&["chyp", "distance", "--x", "[[1,0],[0,0]]", "--y", "[[1,0],[0.1,0]]"]));
    let alpha = v["data"]["distance"].as_f64().unwrap();
    // cosh²(α/2) = 1/(1 − 0.01)
    assert!(((alpha / 2.0).cosh().powi(2) - 1.0 / 0.99).abs() < 1e-12);

    let form = "[[[1,0],[0,0]],[[0,0],[-2,0]]]";
    let v = json(&run(&["chyp", "distance", "--x", "[[1,0],[0,0]]", "--y", "[[1,0],[0.1,0]]", "--form", form]));
    let alpha = v["data"]["distance"].as_f64().unwrap();
    assert!(((alpha / 2.0).cosh().powi(2) - 1.0 / 0.98).abs() < 1e-12);

    assert_eq!(code(&run(&["chyp", "distance", "--x", "[[0,0],[1,0]]", "--y", "[[1,0],[0,0]]"])), 3);

    let v = json(&run(&["chyp", "volume", "--umax", "4"]));
    let vol = &v["data"]["volume"];
    assert!(vol["value"].as_f64().unwrap() > 0.0);
    assert!(vol["error"].as_f64().unwrap() <= 1e-2 * vol["value"].as_f64().unwrap());
    assert_eq!(code(&run(&["chyp", "volume", "--lambda", "-1"])), 2);
}

#[test]
fn output_is_deterministic_across_jobs_and_seeds() {
    let a = run(&["strata", "--y1", "--max-M", "20", "--format", "csv", "--jobs", "1"]);
    let b = run(&["strata", "--y1", "--max-M", "20", "--format", "csv", "--jobs", "4", "--seed", "7"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let a = run(&["chyp", "volume", "--umax", "4", "--jobs", "1"]);
    let b = run(&["chyp", "volume", "--umax", "4", "--jobs", "3"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn table_format_is_human_readable() {
    let out = run(&["surface", "check", &fixture("square_torus.json"), "--format", "table"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("genus") && l.trim_end().ends_with('1')));
}
