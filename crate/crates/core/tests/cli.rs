use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochminimax"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn gen_solve_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let g = cli(&["gen", "--n", "12", "--seed", "5"], out);
    assert_eq!(code(&g), 0, "{}", String::from_utf8_lossy(&g.stderr));
    let problem = out.join("problem.json");
    let text = std::fs::read_to_string(&problem).unwrap();
    assert_eq!(stochminimax::SaaProblem::from_json(&text).unwrap().n(), 12);

    let s = cli(&["solve", "--problem", problem.to_str().unwrap(), "--seed", "5"], out);
    assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("k,resval,delta,objective,newton_iters"));
    let last: f64 = trace.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(last <= 1e-4);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("trace_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["master_seed"], 5);
    assert!(meta["seconds"].as_f64().unwrap() >= 0.0);

    let svg = out.join("trace.svg");
    let p = cli(&["plot", out.join("trace.csv").to_str().unwrap(), "--output", svg.to_str().unwrap()], out);
    assert_eq!(code(&p), 0);
    let svg = std::fs::read_to_string(svg).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("width=\"800\"") && svg.contains("height=\"500\""));
}

#[test]
fn solve_without_problem_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(code(&cli(&["solve", "--n", "10", "--seed", "9"], d.path())), 0);
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("trace.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn invalid_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[solver]\nresval_tol = -1.0\n").unwrap();
    let o = cli(&["--config", cfg.to_str().unwrap(), "solve"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    std::fs::write(&cfg, "[dims]\nn1 = 0\n").unwrap();
    assert_eq!(code(&cli(&["--config", cfg.to_str().unwrap(), "gen"], dir.path())), 2);

    std::fs::write(&cfg, "[solver\n").unwrap();
    assert_eq!(code(&cli(&["--config", cfg.to_str().unwrap(), "gen"], dir.path())), 2);

    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&cli(&["--config", missing.to_str().unwrap(), "gen"], dir.path())), 2);
}

#[test]
fn runtime_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("x.csv");
    std::fs::write(&json, "a,b\n1,2\n").unwrap();
    assert_eq!(code(&cli(&["plot", json.to_str().unwrap()], dir.path())), 1);
    let missing = dir.path().join("none.json");
    assert_eq!(code(&cli(&["solve", "--problem", missing.to_str().unwrap()], dir.path())), 1);
}

#[test]
fn unconverged_solve_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    std::fs::write(&cfg, "[solver]\nmax_outer_iters = 3\n").unwrap();
    let o = cli(&["--config", cfg.to_str().unwrap(), "solve", "--n", "5"], dir.path());
    assert_eq!(code(&o), 1);
    assert_eq!(std::fs::read_to_string(dir.path().join("trace.csv")).unwrap().lines().count(), 5);
}

#[test]
fn exp1_writes_traces_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp1.toml");
    std::fs::write(
        &cfg,
        "[instance]\nn = 10\n\n[experiment]\ntau_values = [0.5]\nnum_instances = 2\nnum_initial_points = 2\n",
    )
    .unwrap();
    let o = cli(&["--config", cfg.to_str().unwrap(), "exp1", "--cross"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let exp = dir.path().join("exp1");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(exp.join("manifest.json")).unwrap()).unwrap();
    let runs = manifest["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 4);
    for r in runs {
        let f = exp.join(r["output"].as_str().unwrap());
        assert!(std::fs::read_to_string(f).unwrap().starts_with("k,resval,delta,objective,newton_iters\n"));
    }
    assert!(exp.join("run_meta.json").exists());
}

#[test]
fn exp2_writes_runs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp2.toml");
    std::fs::write(&cfg, "[experiment]\nn_values = [5, 10]\nnum_instances = 2\n").unwrap();
    let o = cli(&["--config", cfg.to_str().unwrap(), "exp2"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let exp = dir.path().join("exp2");
    let runs = std::fs::read_to_string(exp.join("exp2.csv")).unwrap();
    assert_eq!(runs.lines().next(), Some("box,N,instance,objective_at_final,psi_inner_max"));
    assert_eq!(runs.lines().count(), 1 + 2 * 2 * 2);
    let summary = std::fs::read_to_string(exp.join("exp2_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 2);
    for csv in ["exp2.csv", "exp2_summary.csv"] {
        let p = exp.join(csv);
        assert_eq!(code(&cli(&["plot", p.to_str().unwrap()], dir.path())), 0);
        assert!(p.with_extension("svg").exists());
    }
}
