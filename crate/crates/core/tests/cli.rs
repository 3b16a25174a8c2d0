use std::path::{Path, PathBuf};
use std::process::Command;

use frtcd::cli::io::{load_experiment, read_rows};
use frtcd::sim::generate_population;
use frtcd::{fixtures, Design};
use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn fixture(name: &str) -> String {
    root().join("fixtures").join(name).display().to_string()
}

fn frtcd(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_frtcd")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = frtcd(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    out
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.push("--json");
    serde_json::from_str(&ok(&all)).unwrap()
}

fn validate(schema: &str, value: &Value) {
    let path = root().join("schemas").join(format!("{schema}.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{value:#}");
}

fn round3(v: &Value) -> f64 {
    (v.as_f64().unwrap() * 1000.0).round() / 1000.0
}

fn write_csv(dir: &Path, name: &str, w: &[u8], y: &[f64]) -> String {
    let mut s = String::from("unit_id,w,y\n");
    for (i, (wi, yi)) in w.iter().zip(y).enumerate() {
        s += &format!("u{i},{wi},{yi}\n");
    }
    let path = dir.join(name);
    std::fs::write(&path, s).unwrap();
    path.display().to_string()
}

#[test]
fn bundled_csvs_match_the_library_fixtures() {
    let toy = load_experiment(Path::new(&fixture("toy.csv")), &fixtures::toy_design()).unwrap();
    assert_eq!(toy.data, fixtures::toy());
    let ex2 = load_experiment(Path::new(&fixture("example2.csv")), &fixtures::example2_design()).unwrap();
    assert_eq!(ex2.data, fixtures::example2());
}

#[test]
fn toy_command() {
    let out = ok(&["toy"]);
    for needle in ["0.004", "0.012", "0.131", "0.560", "0.988", "0.912"] {
        assert!(out.contains(needle), "{needle}");
    }
    assert_eq!(out, ok(&["toy", "--seed", "123"]));
    let v = json(&["toy"]);
    validate("toy", &v);
    assert_eq!(v["traditional_grid"]["lower"], 0.0);
    assert_eq!(v["traditional_grid"]["upper"], 3.0);
}

#[test]
fn test_command_on_toy() {
    let toy = fixture("toy.csv");
    let at = |theta: &str| json(&["test", "--data", &toy, "--design", "crd:10:5", "--theta", theta]);
    let v = at("0");
    validate("test", &v);
    assert_eq!(round3(&v["p_Lplus"]), 0.131);
    assert_eq!(round3(&v["T_obs"]), 0.912);
    assert_eq!(v["mode"], "exact");
    assert_eq!(v["K"], 252);
    assert_eq!(round3(&at("1")["p_Lplus"]), 0.560);
    assert_eq!(round3(&at("-3")["p_Lplus"]), 0.004);
}

#[test]
fn constant_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let flat = write_csv(dir.path(), "flat.csv", &[1, 0, 1, 0, 1, 0], &[2.0; 6]);
    let v = json(&["test", "--data", &flat, "--design", "crd:6:3", "--theta", "0"]);
    assert_eq!(v["p_Lplus"], 1.0);
    // the studentized statistic is undefined when both arms are constant
    let (code, _, err) = frtcd(&["test", "--data", &flat, "--design", "crd:6:3", "--theta", "0", "--stat", "studentized"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn pcurve_dumps() {
    let toy = fixture("toy.csv");
    let v = json(&["pcurve", "--data", &toy, "--design", "crd:10:5", "--grid", "-3,-1,0,1,3"]);
    validate("pcurve", &v);
    let got: Vec<f64> = v["points"].as_array().unwrap().iter().map(|p| round3(&p["p"])).collect();
    assert_eq!(got, [0.004, 0.012, 0.131, 0.560, 0.988]);

    let csv = ok(&["pcurve", "--data", &toy, "--design", "crd:10:5", "--exact"]);
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    assert_eq!(rdr.headers().unwrap(), vec!["theta", "p", "p_right"]);
    let rows: Vec<(String, f64, f64)> = rdr.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows[0].0, "-inf");
    assert!(rows.windows(2).all(|w| w[0].1 <= w[1].1 && w[0].2 <= w[1].2));
    assert_eq!(rows.last().unwrap().2, 1.0);
    validate("pcurve", &json(&["pcurve", "--data", &toy, "--design", "crd:10:5", "--exact", "--side", "lminus"]));

    let csv = ok(&["pcurve", "--data", &toy, "--design", "crd:10:5", "--range", "-2,4,61"]);
    assert_eq!(csv.lines().count(), 62);
}

#[test]
fn studentized_curve_is_not_monotone() {
    let ex2 = fixture("example2.csv");
    let csv = ok(&[
        "pcurve", "--data", &ex2, "--design", "crd:8:4", "--stat", "studentized", "--range", "-4,6,2001",
    ]);
    let p: Vec<f64> = csv::Reader::from_reader(csv.as_bytes())
        .deserialize::<(f64, f64)>()
        .map(|r| r.unwrap().1)
        .collect();
    assert_eq!(p.len(), 2001);
    assert!(p.windows(2).any(|w| w[1] < w[0]));
    let (code, _, err) = frtcd(&["invert", "--data", &ex2, "--design", "crd:8:4", "--stat", "studentized"]);
    assert_eq!(code, 4, "{err}");
    assert!(!err.is_empty());
    let (code, _, _) = frtcd(&["pcurve", "--data", &ex2, "--design", "crd:8:4", "--stat", "studentized", "--exact"]);
    assert_eq!(code, 4);
}

#[test]
fn invert_command() {
    let toy = fixture("toy.csv");
    let v = json(&["invert", "--data", &toy, "--design", "crd:10:5", "--alpha1", "0.025", "--alpha2", "0.025"]);
    validate("invert", &v);
    let lo = v["proposed"]["lower"].as_f64().unwrap();
    let hi = v["proposed"]["upper"].as_f64().unwrap();
    assert!(lo < 1.0 && 1.0 < hi);
    let v = json(&["invert", "--data", &toy, "--design", "crd:10:5", "--alpha", "0.05", "--grid", "-3,-1,0,1,3"]);
    validate("invert", &v);
    assert_eq!((v["traditional"]["lower"].as_f64(), v["traditional"]["upper"].as_f64()), (Some(0.0), Some(3.0)));
    let v = json(&["invert", "--data", &toy, "--design", "crd:10:5", "--traditional"]);
    assert_eq!(v["traditional"]["upper_closed"], false);
}

#[test]
fn combine_command() {
    let toy = fixture("toy.csv");
    let v = json(&[
        "combine", "--data", &toy, "--data", &toy, "--design", "crd:10:5", "--combiner", "fisher",
    ]);
    validate("combine", &v);
    let c = &v["combined"];
    let ind = &v["individual"][0]["interval"];
    assert!(c["lower"].as_f64() >= ind["lower"].as_f64());
    assert!(c["upper"].as_f64() <= ind["upper"].as_f64());

    let single = json(&["combine", "--data", &toy, "--design", "crd:10:5", "--combiner", "stouffer"]);
    let inverted = json(&["invert", "--data", &toy, "--design", "crd:10:5"]);
    assert_eq!(single["combined"]["lower"], inverted["proposed"]["lower"]);
    assert_eq!(single["combined"]["upper"], inverted["proposed"]["upper"]);
}

#[test]
fn combiners_cover_a_synthetic_effect() {
    let dir = tempfile::tempdir().unwrap();
    let design = Design::crd(12, 6).unwrap();
    let mut files = Vec::new();
    for a in 0..2u64 {
        let pop = generate_population(12, 0.5, 40 + a).unwrap();
        let w = design.sampler().draw(8, a);
        let data = pop.observe(&w).unwrap();
        files.push(write_csv(dir.path(), &format!("e{a}.csv"), w.as_slice(), data.y()));
    }
    for combiner in ["stouffer", "fisher", "double_exponential"] {
        let v = json(&[
            "combine", "--data", &files[0], "--data", &files[1], "--design", "crd:12:6", "--combiner", combiner,
        ]);
        let (lo, hi) = (v["combined"]["lower"].as_f64().unwrap(), v["combined"]["upper"].as_f64().unwrap());
        assert!(lo <= 0.5 && 0.5 <= hi, "{combiner}: [{lo}, {hi}]");
    }
}

#[test]
fn blocked_file() {
    let v = json(&["invert", "--data", &fixture("blocks.csv"), "--design", "rbd:4/2,4/2"]);
    assert_eq!(v["design"], "rbd:4/2,4/2");
    assert_eq!(v["K"], 36);
    let (code, _, _) = frtcd(&["invert", "--data", &fixture("blocks.csv"), "--design", "crd:8:4"]);
    assert_eq!(code, 2);
}

#[test]
fn mc_threshold_command() {
    let v = json(&["mc-threshold"]);
    validate("mc_threshold", &v);
    let ks: Vec<u64> = v["rows"].as_array().unwrap().iter().map(|r| r["k"].as_u64().unwrap()).collect();
    assert_eq!(ks, [4794, 19173, 119830, 479318, 1917269, 11982930, 47931717]);
    assert_eq!(json(&["mc-threshold", "--eps", "0.1"])["rows"][0]["k"], 4794);
    assert_eq!(json(&["mc-threshold", "--eps", "1", "--delta", "0.5"])["rows"][0]["k"], 17);
    let v = json(&["mc-threshold", "--eps", "0.1", "--design", "crd:30:15"]);
    validate("mc_threshold", &v);
    assert_eq!(v["rows"][0]["plan"]["strategy"], "sample");
    assert_eq!(v["total_assignments"], "155117520");
}

#[test]
fn monte_carlo_runs_are_reproducible() {
    let toy = fixture("toy.csv");
    let args = ["test", "--data", &toy, "--design", "crd:10:5", "--theta", "0.5", "--mode", "mc", "--k", "500", "--seed", "3", "--json"];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let v: Value = serde_json::from_str(&a).unwrap();
    validate("test", &v);
    assert_eq!(v["mode"], "mc");
    assert_eq!(v["seed"], 3);
}

#[test]
fn simulate_command() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("s.json");
    std::fs::write(&config, r#"{"b1":1,"k1":8,"b2":2,"k2":4,"reps":20,"master_seed":5}"#).unwrap();
    let config = config.display().to_string();
    let v = json(&["simulate", "--config", &config]);
    validate("simulate", &v);
    validate("scenario_config", &v["config"]);
    assert_eq!(v["arms"].as_array().unwrap().len(), 4);
    assert_eq!(ok(&["simulate", "--config", &config]), ok(&["simulate", "--config", &config]));
    let bundled: Value = serde_json::from_str(&std::fs::read_to_string(fixture("scenario.json")).unwrap()).unwrap();
    validate("scenario_config", &bundled);
}

#[test]
fn input_errors_exit_2() {
    let toy = fixture("toy.csv");
    for args in [
        vec!["test", "--data", "/nonexistent.csv", "--design", "crd:10:5", "--theta", "0"],
        vec!["test", "--data", &toy, "--design", "crd:10", "--theta", "0"],
        vec!["test", "--data", &toy, "--design", "crd:10:4", "--theta", "0"],
        vec!["test", "--data", &toy, "--design", "crd:10:5", "--theta", "0", "--stat", "nope"],
        vec!["test", "--data", &toy, "--design", "crd:10:5"],
        vec!["frobnicate"],
    ] {
        let (code, _, err) = frtcd(&args);
        assert_eq!(code, 2, "{args:?}");
        assert!(!err.is_empty());
    }
}

#[test]
fn pcurve_csv_reads_back() {
    let toy = fixture("toy.csv");
    let csv = ok(&["pcurve", "--data", &toy, "--design", "crd:10:5", "--grid", "0,1"]);
    assert!(read_rows(csv.as_bytes()).is_err());
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let rows: Vec<(f64, f64)> = rdr.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].0, 1.0);
}
