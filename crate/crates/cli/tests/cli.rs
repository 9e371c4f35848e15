use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use trihelix::synth::{analytic_measures, GeneratorKind, GeneratorSpec, SamplingMode};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trihelix"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn trihelix")
}

fn ok_stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok_stdout(args)).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn report_schema() -> jsonschema::JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/info_report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&schema).unwrap()
}

fn assert_valid(report: &Value) {
    let schema = report_schema();
    let msgs: Vec<String> = match schema.validate(report) {
        Ok(()) => return,
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    panic!("report violates schema: {msgs:?}");
}

#[test]
fn parity_fixture_is_self_organizing() {
    let p = fixture("parity.csv");
    let r = json(&["compute", "--input", p.to_str().unwrap()]);
    assert_eq!(r["R_n"].as_f64().unwrap(), -1.0);
    assert_eq!(r["verdict"], "self_organization_prevails");
    assert_valid(&r);
}

#[test]
fn independent_fixture_is_balanced() {
    let p = fixture("independent.csv");
    let r = json(&["compute", "--input", p.to_str().unwrap()]);
    assert!(r["R_n"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(r["verdict"], "balanced");
    assert_valid(&r);
}

#[test]
fn millibit_report_carries_both_units() {
    let p = fixture("parity.csv");
    let r = json(&["compute", "--input", p.to_str().unwrap(), "--unit", "mbits"]);
    assert_valid(&r);
    assert_eq!(r["R_n_mbits"].as_f64().unwrap(), -1000.0);
    for e in r["entropies"].as_array().unwrap() {
        assert_eq!(e["mbits"].as_f64().unwrap(), 1000.0 * e["bits"].as_f64().unwrap());
    }
    let text = ok_stdout(&["compute", "--input", p.to_str().unwrap(), "--unit", "mbits", "--format", "text"]);
    assert!(text.contains("-1000.000"));
    assert!(text.contains("-1.000000"));
}

#[test]
fn dims_selects_a_pair() {
    let p = fixture("independent.csv");
    let r = json(&["compute", "--input", p.to_str().unwrap(), "--dims", "a,c"]);
    assert_eq!(r["n"], 2);
    assert_valid(&r);
}

#[test]
fn empty_file_exits_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = run(&["compute", "--input", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let header_only = dir.path().join("header.csv");
    std::fs::write(&header_only, "a,b\n").unwrap();
    assert_eq!(run(&["compute", "--input", header_only.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn exit_codes_by_category() {
    assert_eq!(run(&["compute", "--input", "/nonexistent/data.csv"]).status.code(), Some(2));
    let p = fixture("parity.csv");
    let unknown = run(&["compute", "--input", p.to_str().unwrap(), "--dims", "x1,nope"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert_eq!(run(&["compute", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    // Declared mode needs declared cardinalities, which a bare CSV lacks.
    let declared = run(&["compute", "--input", p.to_str().unwrap(), "--max-mode", "declared"]);
    assert_eq!(declared.status.code(), Some(1));
}

#[test]
fn constant_dimension_exits_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("const.csv");
    std::fs::write(&path, "a,b\n1,x\n1,y\n").unwrap();
    assert_eq!(run(&["compute", "--input", path.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn config_file_with_transforms() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("firms.csv"),
        "nace;employees;nuts;w\n6201;3;NL32;1\n6202;60;NL32;2\n2511;12;NL41;1\n2512;400;NL41;1\n6201;;NL32;1\n",
    )
    .unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
          "input": "firms.csv",
          "delimiter": ";",
          "weight_column": "w",
          "unit": "mbits",
          "dimensions": [
            {"name": "tech", "column": "nace", "transform": {"kind": "prefix", "length": 2}},
            {"name": "org", "column": "employees", "transform": {"kind": "numeric_bin", "thresholds": [10, 50, 250], "labels": ["micro", "small", "medium", "large"]}},
            {"name": "geo", "column": "nuts"}
          ]
        }"#,
    )
    .unwrap();
    let stats = dir.path().join("stats.json");
    let r = json(&["compute", "--config", config.to_str().unwrap(), "--stats", stats.to_str().unwrap()]);
    assert_valid(&r);
    assert_eq!(r["unit"], "mbits");
    assert_eq!(r["total_mass"].as_f64().unwrap(), 5.0);
    assert_eq!(r["ingest"]["rows_dropped"], 1);
    let stats: Value = serde_json::from_str(&std::fs::read_to_string(stats).unwrap()).unwrap();
    assert_eq!(stats["rows_kept"], 4);
}

#[test]
fn decompose_identical_groups() {
    let p = fixture("identical_groups.csv");
    let d = json(&["decompose", "--input", p.to_str().unwrap(), "--group", "group"]);
    assert!(d["delta_transmission"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(d["groups"].as_array().unwrap().len(), 2);
    assert_eq!(d["single_group"], false);
}

#[test]
fn decompose_single_group_warns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    std::fs::write(&path, "g,x,y,z\nA,0,0,0\nA,0,1,1\nA,1,0,1\nA,1,1,0\n").unwrap();
    let d = json(&["decompose", "--input", path.to_str().unwrap(), "--group", "g"]);
    assert!(d["delta_transmission"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(d["single_group"], true);
    assert!(!d["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn decompose_mixed_fixture_matches_enumeration() {
    // Pooled T of the equal-mass copy/parity mixture, from dense enumeration.
    const POOLED_T: f64 = -0.278_195_311_147_832_6;
    let p = fixture("mixed_groups.csv");
    let dir = tempfile::tempdir().unwrap();
    let groups = dir.path().join("groups.csv");
    let d = json(&[
        "decompose",
        "--input",
        p.to_str().unwrap(),
        "--group",
        "group",
        "--unit",
        "mbits",
        "--groups-csv",
        groups.to_str().unwrap(),
    ]);
    assert!((d["pooled_transmission"].as_f64().unwrap() - POOLED_T).abs() < 1e-12);
    assert!((d["delta_transmission"].as_f64().unwrap() - POOLED_T).abs() < 1e-12);
    assert!((d["delta_transmission_mbits"].as_f64().unwrap() - 1000.0 * POOLED_T).abs() < 1e-9);

    let csv = std::fs::read_to_string(groups).unwrap();
    assert!(csv.starts_with("group_key,weight,T_g_bits,T_g_mbits,contribution\n"));
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "A");
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 1.0);
    assert_eq!(rows[1][2].parse::<f64>().unwrap(), -1.0);
    assert_eq!(rows[1][3].parse::<f64>().unwrap(), -1000.0);
}

#[test]
fn panel_single_period_matches_compute() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    std::fs::write(&path, "period,x1,x2,x3\n7,0,0,0\n7,0,1,1\n7,1,0,1\n7,1,1,0\n7,1,1,1\n").unwrap();
    let panel = ok_stdout(&["panel", "--input", path.to_str().unwrap(), "--max-mode", "observed"]);
    let rows = csv_rows(&panel);
    assert_eq!(rows.len(), 1);
    let r = json(&["compute", "--input", path.to_str().unwrap()]);
    let joint = r["joint_entropies"].as_array().unwrap().last().unwrap()["bits"].as_f64().unwrap();
    assert_eq!(rows[0][0], "7");
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), joint);
    assert_eq!(rows[0][4].parse::<f64>().unwrap(), r["R_n"].as_f64().unwrap());
    assert_eq!(rows[0][5], "5");
}

#[test]
fn panel_growing_categories_never_lowers_max_entropy() {
    let p = fixture("growing.csv");
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("panel.svg");
    let out = ok_stdout(&["panel", "--input", p.to_str().unwrap(), "--svg", svg.to_str().unwrap()]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 4);
    let h_max: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(h_max.windows(2).all(|w| w[1] >= w[0]), "{h_max:?}");
    assert!(h_max[3] > h_max[0]);
    for r in &rows {
        let s: f64 = r[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&s));
    }
    let svg = std::fs::read_to_string(svg).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
}

#[test]
fn panel_stationary_tracks_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("coupled.csv");
    ok_stdout(&[
        "synth", "--kind", "coupled", "--lambda", "0.5", "--n", "20000", "--periods", "5", "--seed", "11",
        "--out", data.to_str().unwrap(),
    ]);
    let spec = GeneratorSpec::new(GeneratorKind::Coupled { lambda: 0.5 }, 20000, SamplingMode::Sampled { seed: 11 });
    let oracle = analytic_measures(&spec).unwrap().mutual_redundancy;
    let rows = csv_rows(&ok_stdout(&["panel", "--input", data.to_str().unwrap()]));
    assert_eq!(rows.len(), 5);
    for r in rows {
        let r_n: f64 = r[4].parse().unwrap();
        assert!((r_n - oracle).abs() < 0.02, "period {} R_n {r_n} oracle {oracle}", r[0]);
    }
}

#[test]
fn panel_json_and_text() {
    let p = fixture("growing.csv");
    let v = json(&["panel", "--input", p.to_str().unwrap(), "--format", "json", "--unit", "mbits"]);
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 4);
    assert!(points[0]["H_max_mbits"].is_number());
    let text = ok_stdout(&["panel", "--input", p.to_str().unwrap(), "--format", "text"]);
    assert!(text.lines().next().unwrap().starts_with("period"));
}

#[test]
fn synth_balanced_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("copy.csv");
    ok_stdout(&["synth", "--kind", "copy", "--n", "400", "--balanced", "--out", out.to_str().unwrap()]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 401);
    let r = json(&["compute", "--input", out.to_str().unwrap()]);
    assert_eq!(r["R_n"].as_f64().unwrap(), 1.0);
    assert_eq!(r["verdict"], "organization_prevails");

    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"kind": "independent", "cardinalities": [2, 3], "n": 600, "mode": "balanced_exact"}"#).unwrap();
    let from_spec = ok_stdout(&["synth", "--spec", spec.to_str().unwrap()]);
    assert_eq!(from_spec.lines().count(), 601);
}

#[test]
fn synth_rejects_non_integral_balance() {
    let out = run(&["synth", "--kind", "parity", "--n", "6", "--balanced"]);
    assert_eq!(out.status.code(), Some(1));
}
