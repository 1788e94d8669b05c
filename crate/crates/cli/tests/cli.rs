//! End-to-end tests of the `scanmpc` binary: exit codes, byte-level output
//! reproducibility, the batch/solo equivalence, and the negative control.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scanmpc::sqp::{theta_max, ARMIJO_C1, DESCENT_TOL, EVAL_EPS};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scanmpc"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).expect("write config");
    path
}

const DI_CFG: &str = r#"{"seed": 0, "workers": 1, "backend": "riccati",
    "model": {"double_integrator": {"horizon": 50, "dt": 0.05,
        "x0": [1.0, 0.0, -0.5, 0.25], "goal": [0.0, 0.0, 0.0, 0.0]}}}"#;

const PENDULUM_CFG: &str = r#"{"seed": 0, "workers": 1, "backend": "scan",
    "model": {"pendulum": {"horizon": 60, "dt": 0.05, "u_max": 10.0}},
    "solver": {"max_iters": 100, "tol_theta": 1e-9, "tol_step": 1e-9,
               "init_perturbation": 0.0}}"#;

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(path: &Path) -> Csv {
        let text = fs::read_to_string(path).expect("csv exists");
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .expect("header row")
            .split(',')
            .map(str::to_string)
            .collect();
        let rows = lines
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        Csv { header, rows }
    }

    fn col(&self, name: &str) -> usize {
        self.header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("column {name} in {:?}", self.header))
    }

    fn f64(&self, row: usize, name: &str) -> f64 {
        self.rows[row][self.col(name)].parse().expect("float field")
    }
}

#[test]
fn verify_passes_and_is_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let csv1 = dir.path().join("v1.csv");
    let csv2 = dir.path().join("v2.csv");
    let csv4 = dir.path().join("v4.csv");

    let a = run(&["verify", "--seed", "0", "--workers", "1", "--out", csv1.to_str().unwrap()]);
    let b = run(&["verify", "--seed", "0", "--workers", "1", "--out", csv2.to_str().unwrap()]);
    let c = run(&["verify", "--seed", "0", "--workers", "4", "--out", csv4.to_str().unwrap()]);

    assert_eq!(code(&a), 0, "stderr: {}", stderr(&a));
    assert_eq!(code(&b), 0);
    assert_eq!(code(&c), 0);
    assert!(stdout(&a).contains("suites passed"));
    assert_eq!(stdout(&a), stdout(&b), "two identical runs must print identical reports");
    assert_eq!(stdout(&a), stdout(&c), "worker count must not change results");
    assert_eq!(fs::read(&csv1).unwrap(), fs::read(&csv2).unwrap());
    assert_eq!(fs::read(&csv1).unwrap(), fs::read(&csv4).unwrap());
}

#[test]
fn corrupted_combine_fails_verification_naming_the_suites() {
    let out = run(&["verify", "--seed", "0", "--workers", "1", "--corrupt-combine"]);
    assert_eq!(code(&out), 1, "a broken operator must fail verification");
    let text = stdout(&out);
    assert!(text.contains("FAILED:"), "summary names failures: {text}");
    assert!(text.contains("combine-associativity"), "{text}");
    assert!(text.contains("combine-identity"), "{text}");
    assert!(text.contains("value-scan-vs-riccati"), "{text}");
    // Suites that never touch the corrupted operator still pass.
    let untouched = text
        .lines()
        .find(|l| l.starts_with("backend-equivalence"))
        .expect("suite table row");
    assert!(untouched.trim_end().ends_with("pass"), "{untouched}");
}

#[test]
fn double_integrator_first_iterate_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "di.json", DI_CFG);
    let csv = dir.path().join("di.csv");
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let log = Csv::read(&csv);
    // Unconstrained LQ problem: the first full Newton step lands on the
    // optimum with every dynamics defect closed.
    assert_eq!(log.rows[0][log.col("iter")], "1");
    assert_eq!(log.f64(0, "alpha"), 1.0);
    assert!(log.f64(0, "theta_after") <= 1e-10, "theta {}", log.f64(0, "theta_after"));
    // No wall-clock columns in deterministic output.
    assert!(log.header.iter().all(|h| !h.ends_with("_ns")), "{:?}", log.header);
}

#[test]
fn backends_agree_on_the_double_integrator() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "di.json", DI_CFG);
    let mut finals = Vec::new();
    for backend in ["riccati", "scan", "scan-seq", "sequential"] {
        let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--backend", backend]);
        assert_eq!(code(&out), 0, "{backend} failed: {}", stderr(&out));
        let text = stdout(&out);
        let cost: f64 = text
            .split("final cost ")
            .nth(1)
            .unwrap()
            .split(',')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        let iters: usize = text
            .split("iterations ")
            .nth(1)
            .unwrap()
            .split(',')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        finals.push((backend, iters, cost));
    }
    let (_, iters0, cost0) = finals[0];
    for (backend, iters, cost) in &finals[1..] {
        assert_eq!(*iters, iters0, "{backend} iteration count");
        assert!(
            (cost - cost0).abs() <= 1e-8 * (1.0 + cost0.abs()),
            "{backend} cost {cost} vs {cost0}"
        );
    }
}

#[test]
fn solve_is_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "p.json", PENDULUM_CFG);
    let c1 = dir.path().join("1.csv");
    let c2 = dir.path().join("2.csv");
    let c4 = dir.path().join("4.csv");
    let a = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", c1.to_str().unwrap()]);
    let b = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", c2.to_str().unwrap()]);
    let c = run(&[
        "solve", "--config", cfg.to_str().unwrap(),
        "--workers", "4", "--out", c4.to_str().unwrap(),
    ]);
    assert_eq!(code(&a), 0, "stderr: {}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a), stdout(&c));
    assert_eq!(fs::read(&c1).unwrap(), fs::read(&c2).unwrap());
    assert_eq!(fs::read(&c1).unwrap(), fs::read(&c4).unwrap());
}

#[test]
fn accepted_steps_replay_the_filter_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "p.json", PENDULUM_CFG);
    let csv = dir.path().join("p.csv");
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("converged true"));

    let log = Csv::read(&csv);
    let t_max = theta_max(60);
    assert!(log.rows.len() >= 2, "nontrivial solve");
    for i in 0..log.rows.len() {
        let accepted = log.rows[i][log.col("accepted")] == "true";
        let alpha = log.f64(i, "alpha");
        if !accepted {
            assert_eq!(alpha, 0.0);
            continue;
        }
        // alpha comes from the power-of-two grid.
        assert!(alpha.log2().fract() == 0.0 && (1e-3..=1.0).contains(&alpha), "alpha {alpha}");
        let (c0, c1) = (log.f64(i, "cost_before"), log.f64(i, "cost_after"));
        let (t0, t1) = (log.f64(i, "theta_before"), log.f64(i, "theta_after"));
        let gdot = log.f64(i, "gdot");
        if t0 > t_max {
            assert!(t1 <= t0, "row {i}: infeasible iterate must reduce theta");
        } else if gdot < -DESCENT_TOL * (1.0 + c0.abs()) {
            assert!(
                c1 <= c0 + ARMIJO_C1 * alpha * gdot,
                "row {i}: Armijo violated: {c1} vs {c0}, gdot {gdot}, alpha {alpha}"
            );
        } else {
            assert!(
                c1 <= c0 + EVAL_EPS * (1.0 + c0.abs()) || t1 <= t0 + EVAL_EPS * (1.0 + t0),
                "row {i}: neither cost nor theta held: {c0}->{c1}, {t0}->{t1}"
            );
        }
    }
}

#[test]
fn batch_instances_match_standalone_solves_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let batch_cfg = r#"{"seed": 11, "workers": 2, "backend": "riccati",
        "solver": {"max_iters": 50, "tol_theta": 1e-8, "tol_step": 1e-8,
                   "init_perturbation": 0.05},
        "model": {"double_integrator": {"horizon": 50, "dt": 0.05,
            "x0": [1.0, 0.0, -0.5, 0.25], "goal": [0.0, 0.0, 0.0, 0.0]}},
        "batch": {"count": 4}}"#;
    let cfg = write_cfg(dir.path(), "batch.json", batch_cfg);
    let csv = dir.path().join("batch.csv");
    let out = run(&["batch", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let log = Csv::read(&csv);
    assert_eq!(log.rows.len(), 4);

    for k in 0..4u64 {
        // Instance k of the batch is instance 0 of a run seeded seed + k, so
        // a standalone solve at that seed must reproduce it exactly. Compare
        // through the full-precision solve summary.
        let solo_out = run(&[
            "solve", "--config", cfg.to_str().unwrap(),
            "--seed", &(11 + k).to_string(),
        ]);
        assert_eq!(code(&solo_out), 0);
        let text = stdout(&solo_out);
        let row = &log.rows[k as usize];
        let cost = &row[log.col("final_cost")];
        let theta = &row[log.col("final_theta")];
        let iters = &row[log.col("iterations")];
        assert!(
            text.contains(&format!("final cost {cost}")),
            "instance {k}: batch {cost} not in: {text}"
        );
        assert!(text.contains(&format!("final theta {theta}")), "instance {k}: {text}");
        assert!(text.contains(&format!("iterations {iters}")), "instance {k}: {text}");
    }
}

#[test]
fn unperturbed_batch_rows_are_identical_and_reruns_reproduce_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let batch_cfg = r#"{"seed": 3, "workers": 1, "backend": "scan",
        "model": {"double_integrator": {"horizon": 30, "dt": 0.05,
            "x0": [1.0, 0.0, -0.5, 0.25], "goal": [0.0, 0.0, 0.0, 0.0]}},
        "batch": {"count": 3}}"#;
    let cfg = write_cfg(dir.path(), "batch.json", batch_cfg);
    let c1 = dir.path().join("1.csv");
    let c2 = dir.path().join("2.csv");
    let a = run(&["batch", "--config", cfg.to_str().unwrap(), "--out", c1.to_str().unwrap()]);
    let b = run(&["batch", "--config", cfg.to_str().unwrap(), "--out", c2.to_str().unwrap()]);
    assert_eq!(code(&a), 0);
    assert_eq!(code(&b), 0);
    assert_eq!(a.stdout, b.stdout, "timing belongs on stderr, results on stdout");
    assert_eq!(fs::read(&c1).unwrap(), fs::read(&c2).unwrap());

    // Zero perturbation: every instance is the same problem, so all rows
    // must agree except the instance index.
    let log = Csv::read(&c1);
    assert_eq!(log.rows.len(), 3);
    for row in &log.rows[1..] {
        assert_eq!(row[1..], log.rows[0][1..]);
    }
}

#[test]
fn simulate_runs_a_short_station_keeping_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let sim_cfg = r#"{"seed": 0, "workers": 1, "backend": "scan",
        "model": {"srbd": {"horizon": 25, "dt": 0.02, "v_cmd": [0.0, 0.0]}},
        "sim": {"duration": 0.5, "iters_per_step": 1, "init_iters": 10}}"#;
    let cfg = write_cfg(dir.path(), "sim.json", sim_cfg);
    let csv = dir.path().join("sim.csv");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("mean speed error"), "{text}");
    assert!(text.contains("min cone margin"), "{text}");

    let log = Csv::read(&csv);
    assert_eq!(log.rows.len(), 25, "one row per robot per step");
    for name in ["px", "rr_fz", "fl_contact", "theta", "alpha"] {
        log.col(name);
    }
    assert!(log.header.iter().all(|h| !h.ends_with("_ns")));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    // Missing required --config.
    assert_eq!(code(&run(&["solve"])), 2);
    // Unreadable config path.
    assert_eq!(code(&run(&["solve", "--config", "/nonexistent/x.json"])), 2);
    // Unknown model variant.
    let bad_model = write_cfg(dir.path(), "m.json", r#"{"model": {"warp_drive": {}}}"#);
    assert_eq!(code(&run(&["solve", "--config", bad_model.to_str().unwrap()])), 2);
    // Unknown top-level key.
    let bad_key = write_cfg(
        dir.path(),
        "k.json",
        r#"{"model": {"pendulum": {"horizon": 5, "dt": 0.05, "u_max": 10.0}}, "turbo": true}"#,
    );
    assert_eq!(code(&run(&["solve", "--config", bad_key.to_str().unwrap()])), 2);
    // Unknown backend name.
    let di = write_cfg(dir.path(), "di.json", DI_CFG);
    let out = run(&["solve", "--config", di.to_str().unwrap(), "--backend", "warp"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown backend"), "{}", stderr(&out));
    // Simulation of a model with no closed-loop scenario.
    assert_eq!(code(&run(&["simulate", "--config", di.to_str().unwrap()])), 2);
}

#[test]
fn bench_reports_structural_depths_and_unmeasured_claims() {
    let dir = tempfile::tempdir().unwrap();
    let bench_cfg = r#"{"seed": 0, "workers": 1, "backend": "riccati",
        "model": {"double_integrator": {"horizon": 50, "dt": 0.05,
            "x0": [1.0, 0.0, -0.5, 0.25], "goal": [0.0, 0.0, 0.0, 0.0]}},
        "bench": {"reps": 1, "warmups": 0, "horizons": [10],
                  "robot_counts": [1], "batch_sizes": [1]}}"#;
    let cfg = write_cfg(dir.path(), "bench.json", bench_cfg);
    let csv = dir.path().join("bench.csv");
    let out = run(&["bench", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("not measured by this build:"), "{text}");

    let log = Csv::read(&csv);
    assert!(!log.rows.is_empty());
    let (bd, n) = (log.col("backward_depth"), log.col("horizon"));
    let backend = log.col("backend");
    for row in &log.rows {
        if row[backend] == "riccati" && !row[bd].is_empty() && row[bd] != "0" {
            let horizon: usize = row[n].parse().unwrap();
            assert_eq!(row[bd], (horizon + 1).to_string(), "sequential depth is N+1");
        }
    }
}

#[test]
fn repo_sample_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).expect("configs directory") {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            scanmpc::config::RunConfig::from_file(&path)
                .unwrap_or_else(|e| panic!("{path:?}: {e}"));
            seen += 1;
        }
    }
    assert!(seen >= 6, "expected the documented sample set, found {seen}");
}
