use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rowact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rowact"))
        .args(args)
        .output()
        .expect("spawn rowact")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate(dir: &Path) {
    let o = rowact(&[
        "gen", "--kind", "udv", "--m", "200", "--n", "20", "--r", "2", "--kappa", "4", "--seed", "7",
        "--out", p(dir),
    ]);
    stdout(&o);
}

#[test]
fn gen_then_solve_converges() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    for f in ["A.mtx", "b.vec", "xstar.vec"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let (a, b, xs) = (dir.path().join("A.mtx"), dir.path().join("b.vec"), dir.path().join("xstar.vec"));
    let hist = dir.path().join("hist.csv");
    let o = rowact(&[
        "solve", "--matrix", p(&a), "--rhs", p(&b), "--xstar", p(&xs), "--method", "mmwrk",
        "--history", p(&hist),
    ]);
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["converged"], Value::Bool(true));
    assert_eq!(report["method"], "mmwrk");
    assert!(report["final_rse"].as_f64().unwrap() <= 1e-12);
    assert!(report.get("history").is_none_or(Value::is_null));
    assert!(report.get("wall_ms").is_none());

    let h = std::fs::read_to_string(&hist).unwrap();
    let mut lines = h.lines();
    assert_eq!(lines.next(), Some("k,rse,set_size"));
    let iters = report["iterations"].as_u64().unwrap() as usize;
    assert_eq!(lines.count(), iters + 1);
}

#[test]
fn solve_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let (a, b) = (dir.path().join("A.mtx"), dir.path().join("b.vec"));
    let run = |out: &str| {
        let sol = dir.path().join(out);
        let o = rowact(&["solve", "--matrix", p(&a), "--rhs", p(&b), "--method", "eta", "--seed", "3",
            "--max-iters", "500", "--solution", p(&sol)]);
        (stdout(&o), std::fs::read(&sol).unwrap())
    };
    assert_eq!(run("x1.vec"), run("x2.vec"));
}

#[test]
fn exit_codes() {
    assert_eq!(rowact(&["solve", "--bogus"]).status.code(), Some(1));
    assert_eq!(rowact(&["bounds", "--alpha", "2.5"]).status.code(), Some(1));
    let missing = rowact(&["solve", "--matrix", "/nonexistent/A.mtx", "--rhs", "/nonexistent/b.vec"]);
    assert_eq!(missing.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let (a, b) = (dir.path().join("A.mtx"), dir.path().join("b.vec"));
    let args = ["solve", "--matrix", p(&a), "--rhs", p(&b), "--max-iters", "2"];
    assert_eq!(rowact(&args).status.code(), Some(0));
    let strict: Vec<&str> = args.iter().copied().chain(["--strict"]).collect();
    assert_eq!(rowact(&strict).status.code(), Some(3));
    assert_eq!(rowact(&["--help"]).status.code(), Some(0));
}

#[test]
fn bounds_reports_the_admissible_beta() {
    let o = rowact(&["bounds", "--alpha", "1", "--beta", "0.1", "--rho", "0.5"]);
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let beta_max = r["beta_max"].as_f64().unwrap();
    // 3b^2 + 4.5b - 0.5 = 0
    let oracle = (-4.5 + (4.5f64 * 4.5 + 6.0).sqrt()) / 6.0;
    assert!((beta_max - oracle).abs() <= 1e-14 * oracle);
    assert!(r["contraction"].as_bool().unwrap());
}

#[test]
fn bench_csv_layout() {
    let o = rowact(&[
        "bench", "--kind", "gaussian", "--m", "60", "--n", "10", "--seeds", "3", "--methods", "mwrk,mmwrk",
    ]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("method,alpha,beta,theta,m,n,r,kappa,seed,iters,converged,final_rse,speedup")
    );
    let rows: Vec<&str> = lines.collect();
    // Three seeds plus a median row per method.
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.contains(",true,")));
    assert!(rows.iter().filter(|r| r.contains("MEDIAN")).count() == 2);
}

#[test]
fn sweep_baseline_cell_matches_plain_method() {
    let dir = tempfile::tempdir().unwrap();
    let o = rowact(&[
        "sweep", "--kind", "udv", "--m", "300", "--n", "20", "--r", "20", "--kappa", "10", "--seed", "1",
        "--method", "mmwrk", "--alphas", "1", "--betas", "0,1.9", "--max-iters", "3000",
    ]);
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["alpha", "beta", "iters", "converged", "final_rse"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][3], "true");
    // beta = 1.9 is far outside the admissible region.
    assert_eq!(&rows[1][3], "false");

    stdout(&rowact(&[
        "gen", "--kind", "udv", "--m", "300", "--n", "20", "--r", "20", "--kappa", "10", "--seed", "1",
        "--out", p(dir.path()),
    ]));
    let (a, b, xs) = (dir.path().join("A.mtx"), dir.path().join("b.vec"), dir.path().join("xstar.vec"));
    let plain: Value = serde_json::from_str(&stdout(&rowact(&[
        "solve", "--matrix", p(&a), "--rhs", p(&b), "--xstar", p(&xs), "--method", "mwrk",
    ])))
    .unwrap();
    assert_eq!(rows[0][2].parse::<u64>().unwrap(), plain["iterations"].as_u64().unwrap());
}

#[test]
fn fit_writes_control_net_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let (net, curve, report) = (dir.path().join("net.csv"), dir.path().join("curve.csv"), dir.path().join("r.json"));
    stdout(&rowact(&[
        "fit", "--curve", "2", "--m", "300", "--n-ctrl", "12", "--out", p(&net), "--curve-out", p(&curve),
        "--curve-samples", "50", "--report", p(&report), "--strict",
    ]));
    let net = std::fs::read_to_string(net).unwrap();
    assert!(net.starts_with("index,x,y,z\n"));
    assert_eq!(net.lines().count(), 13);
    assert_eq!(std::fs::read_to_string(curve).unwrap().lines().count(), 51);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["converged"], Value::Bool(true));

    // Round trip through --points.
    let pts = dir.path().join("pts.csv");
    let mut text = String::from("x,y,z\n");
    for i in 0..40 {
        let t = i as f64 / 39.0;
        text.push_str(&format!("{t},{},{}\n", t * t, (3.0 * t).sin()));
    }
    std::fs::write(&pts, text).unwrap();
    let out = stdout(&rowact(&["fit", "--points", p(&pts), "--n-ctrl", "6"]));
    assert_eq!(out.lines().count(), 7);
}
