//! End-to-end tests of the `rbpsc` binary.

use std::path::Path;
use std::process::{Command, Output};

fn rbpsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbpsc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn gen_small(dir: &Path, seed: &str) -> String {
    let path = dir.join(format!("inst{seed}.json"));
    let path = path.to_str().unwrap().to_owned();
    let out = rbpsc(&[
        "gen", "--n", "3", "--m", "1", "--states", "2", "--seed", seed, "--alpha", "0.8",
        "--out", &path,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn gen_then_solve_exact_reports_value() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen_small(dir.path(), "1");
    let out = rbpsc(&["solve-exact", "--instance", &inst]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("optimal_value "), "{text}");
    assert!(text.contains("lp_objective "), "{text}");
}

#[test]
fn relax_persists_and_simulate_reuses_it() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen_small(dir.path(), "2");
    let rel = dir.path().join("rel.json");
    let rel = rel.to_str().unwrap();
    let out = rbpsc(&["relax", "--instance", &inst, "--out", rel]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("Z_r "));

    let out = rbpsc(&[
        "simulate", "--instance", &inst, "--policy", "osl", "--trajectories", "200",
        "--relaxation", rel,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("policy osl"), "{text}");
    assert!(text.contains("mean "), "{text}");
    assert!(text.contains("ci95 ["), "{text}");
}

#[test]
fn simulate_rejects_relaxation_for_wrong_instance() {
    let dir = tempfile::tempdir().unwrap();
    let inst_a = gen_small(dir.path(), "3");
    let inst_b = gen_small(dir.path(), "4");
    let rel = dir.path().join("rel.json");
    let rel = rel.to_str().unwrap();
    assert!(rbpsc(&["relax", "--instance", &inst_a, "--out", rel]).status.success());
    let out = rbpsc(&[
        "simulate", "--instance", &inst_b, "--policy", "pd", "--trajectories", "10",
        "--relaxation", rel,
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("hash"), "{err}");
}

#[test]
fn bench_writes_schema_conformant_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("results.csv");
    let csv = csv.to_str().unwrap();
    let out = rbpsc(&[
        "bench", "--suite", "problem1", "--alpha", "0.5,0.9", "--trajectories", "200",
        "--out", csv,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "problem,N,M,states,c_over_r,alpha,Z_star,Z_r,Z_g,Z_g_se,Z_osl,Z_osl_se,bound_slack,t_relax_s,t_sim_s"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert_eq!(row.split(',').count(), 15, "{row}");
        assert!(row.starts_with("problem1,"), "{row}");
    }
}

#[test]
fn gen_rejects_unknown_suite() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.json");
    let out = rbpsc(&["gen", "--suite", "problem99", "--out", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}
