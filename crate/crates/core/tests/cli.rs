use std::path::PathBuf;
use std::process::{Command, Output};

use macfcs::model::reference::{bernoulli_pair, cross_link, cross_link_deaf_destination};
use macfcs::model::{DfInput, SourcePair};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_macfcs"))
}

fn dir(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn write(d: &std::path::Path, name: &str, v: &Value) -> String {
    let p = d.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

struct Fixture {
    cross: String,
    deaf: String,
    bern: String,
    bits: String,
    dsbs: String,
    cand: String,
    dir: PathBuf,
}

fn fixture(name: &str) -> Fixture {
    let d = dir(name);
    let cand = serde_json::to_value(DfInput::independent_inputs(&[0.5, 0.5], &[0.5, 0.5]).unwrap()).unwrap();
    Fixture {
        cross: write(&d, "cross.json", &cross_link(0.0).to_json()),
        deaf: write(&d, "deaf.json", &cross_link_deaf_destination().to_json()),
        bern: write(&d, "bern.json", &bernoulli_pair(0.11).to_json()),
        bits: write(&d, "bits.json", &bernoulli_pair(0.5).to_json()),
        dsbs: write(&d, "dsbs.json", &SourcePair::dsbs(0.25).unwrap().to_json()),
        cand: write(&d, "cand.json", &cand),
        dir: d,
    }
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn stats_outputs() {
    let f = fixture("stats");
    let o = run(&["stats", "--source", &f.dsbs]);
    assert_eq!(o.status.code(), Some(0));
    assert!((json(&o)["h_joint"].as_f64().unwrap() - 1.811_278_124_459_133).abs() < 1e-9);

    let o = run(&["stats", "--source", &f.bits]);
    assert_eq!(json(&o)["i_s1_s2"].as_f64().unwrap(), 0.0);

    let bad = f.dir.join("bad.json");
    std::fs::write(&bad, r#"{"s1_card": 2, "s2_card": 2, "probs": [0.5, 0.5]}"#).unwrap();
    let o = run(&["stats", "--source", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn check_df_exit_codes() {
    let f = fixture("check_df");
    let o = run(&["check-df", "--channel", &f.cross, "--source", &f.bern, "--candidate", &f.cand]);
    assert_eq!(o.status.code(), Some(0));
    assert!((json(&o)["min_margin"].as_f64().unwrap() - 0.5).abs() < 1e-3);

    let o = run(&["check", "--strategy", "df", "--channel", &f.cross, "--source", &f.bits, "--candidate", &f.cand]);
    assert_eq!(o.status.code(), Some(1));
    let r = json(&o);
    let c1a = r["constraints"].as_array().unwrap().iter().find(|c| c["label"] == "1a").unwrap();
    assert!(c1a["margin"].as_f64().unwrap().abs() < 1e-9);

    let wrong = serde_json::to_value(DfInput::independent_inputs(&[0.2, 0.3, 0.5], &[0.5, 0.5]).unwrap()).unwrap();
    let wrong = write(&f.dir, "wrong.json", &wrong);
    let o = run(&["check-df", "--channel", &f.cross, "--source", &f.bern, "--candidate", &wrong]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("f_x1"), "{}", stderr(&o));
}

#[test]
fn optimize_round_trips_through_check() {
    let f = fixture("optimize");
    let out = f.dir.join("result.json");
    let args = [
        "optimize", "--channel", &f.cross, "--source", &f.bern, "--strategy", "df", "--restarts", "4", "--seed", "7",
        "--workers", "2",
    ];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert!(stderr(&a).contains("restart 0:"));
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);

    std::fs::write(&out, &a.stdout).unwrap();
    let c = run(&["check-df", "--channel", &f.cross, "--source", &f.bern, "--candidate", out.to_str().unwrap()]);
    assert_eq!(c.status.code(), Some(0));
    assert_eq!(json(&c), json(&a)["report"]);

    let path = f.dir.join("written.json");
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path.to_str().unwrap()]);
    let w = run(&with_out);
    assert!(w.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), a.stdout);
}

#[test]
fn optimize_reports_no_candidate() {
    let f = fixture("no_candidate");
    let o = run(&["optimize", "--channel", &f.deaf, "--source", &f.bern, "--restarts", "2", "--cards", "W0=1,W1=2,W2=2"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("no candidate found at cardinalities {W0=1, W1=2, W2=2}"), "{err}");
    assert!(!err.contains("not achievable"));

    let o = run(&["optimize", "--channel", &f.cross, "--source", &f.bern, "--cards", "Q=2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fm_verdicts() {
    let d = dir("fm");
    let sys = |lo: f64, hi: f64| {
        serde_json::json!({
            "vars": ["x"],
            "ineqs": [
                {"label": "lo", "coeffs": {"x": 1.0}, "rhs": lo, "strict": true, "sense": "ge"},
                {"label": "hi", "coeffs": {"x": 1.0}, "rhs": hi, "strict": true}
            ],
            "nonneg": false
        })
    };
    let o = run(&["fm", "--system", &write(&d, "ok.json", &sys(1.0, 3.0))]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["witness"]["x"].as_f64(), Some(2.0));
    let o = run(&["fm", "--system", &write(&d, "empty.json", &sys(2.0, 1.0))]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["feasible"], false);
    let o = run(&["fm", "--system", &write(&d, "bad.json", &serde_json::json!({"vars": 3}))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cf_raw_system_export_matches_check() {
    let f = fixture("cf_raw");
    let cand = serde_json::to_value(
        macfcs::model::CfInput::uniform(macfcs::model::CfCards::for_channel(&cross_link(0.0), 1, 1, 1, 1)).unwrap(),
    )
    .unwrap();
    let cand = write(&f.dir, "cf.json", &cand);
    let raw = f.dir.join("raw.json");
    let o = run(&[
        "check-cf", "--channel", &f.cross, "--source", &f.bern, "--candidate", &cand, "--emit-raw-system",
        raw.to_str().unwrap(),
    ]);
    let code = o.status.code();
    assert!(code == Some(0) || code == Some(1));
    let fm = run(&["fm", "--system", raw.to_str().unwrap()]);
    assert_eq!(fm.status.code(), code);
}

#[test]
fn simulate_csv() {
    let f = fixture("simulate");
    let o = run(&[
        "simulate", "--scheme", "sw", "--source", &f.dsbs, "--n", "4,8", "--trials", "100", "--rates", "R1=1,R2=1",
        "--seed", "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "n,trials,errors,error_rate,stage_breakdown");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("4,100,"));
    assert!(stderr(&o).contains("maximum-likelihood"));

    let o = run(&[
        "simulate", "--scheme", "df", "--channel", &f.deaf, "--source", &f.bern, "--n", "4", "--trials", "40",
        "--blocks", "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let row: Vec<&str> = s.lines().nth(1).unwrap().split(',').collect();
    assert!(row[3].parse::<f64>().unwrap() >= 0.5);

    let o = run(&["simulate", "--scheme", "cf", "--source", &f.dsbs]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["simulate", "--scheme", "mac", "--channel", &f.cross, "--n", "30", "--rates", "R1=1,R2=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_rows() {
    let f = fixture("sweep");
    let base = ["sweep", "--channel", &f.cross, "--family", "dsbs", "--restarts", "2", "--seed", "1"];
    let rows = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend(extra);
        let o = run(&a);
        (o.status.code(), stdout(&o))
    };
    let (code, s) = rows(&["--start", "0.1", "--stop", "0.1", "--step", "0.05"]);
    assert_eq!(code, Some(0));
    assert_eq!(s.lines().next().unwrap(), "param,feasible,min_margin,best_objective");
    assert_eq!(s.lines().count(), 2);
    let (_, s) = rows(&["--start", "0.1", "--stop", "0.2", "--step", "0.5"]);
    assert_eq!(s.lines().count(), 2);
    assert!(s.lines().nth(1).unwrap().starts_with("0.1,"));
    let (_, s) = rows(&["--start", "0.1", "--stop", "0.3", "--step", "0.1"]);
    assert_eq!(s.lines().count(), 4);
    let (code, _) = rows(&["--start", "0.3", "--stop", "0.1", "--step", "0.1"]);
    assert_eq!(code, Some(2));

    let o = run(&[
        "sweep", "--channel", &f.cross, "--family", "common", "--vary", "d", "--fixed", "e=1,f=1", "--start", "1",
        "--stop", "2", "--step", "1", "--restarts", "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn sw_region_document() {
    let f = fixture("sw_region");
    let o = run(&["sw-region", "--source", &f.dsbs]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let ineqs = v["ineqs"].as_array().unwrap();
    assert_eq!(ineqs.len(), 3);
}
