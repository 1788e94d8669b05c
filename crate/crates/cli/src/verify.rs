//! Cross-checking suites behind `scanmpc verify`.
//!
//! Each suite computes one contract two independent ways and records the
//! worst deviation it sees; the suite passes when that stays under its
//! tolerance. The hidden --corrupt-combine flag perturbs the value-combine
//! operator fed to the algebra and value-scan suites, which must then fail:
//! a negative control proving the comparisons can detect a broken operator,
//! not just bless a working one.

#![allow(non_snake_case)]

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use nalgebra::{DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scanmpc::barrier::Barrier;
use scanmpc::config::RunConfig;
use scanmpc::csvio::{fmt_f64, CsvWriter};
use scanmpc::exec::Parallelism;
use scanmpc::kkt::solve_kkt_dense;
use scanmpc::models::srbd::{GaitSchedule, SrbdCommand, SrbdMpc, SrbdParams};
use scanmpc::models::PendulumOcp;
use scanmpc::ocp::Ocp;
use scanmpc::riccati::{riccati_backward, solve_qp_sequential};
use scanmpc::scan::{expected_tree_depth, ScanDirection, ScanMode, ScanPlan};
use scanmpc::scan_lqr::{
    combine_traj, combine_value, init_value_elements, solve_qp_scan, TrajElement, ValueElement,
};
use scanmpc::synth::{random_matrix, random_qp, random_vector};
use scanmpc::Result;

struct Suite {
    name: &'static str,
    cases: usize,
    worst: f64,
    tol: f64,
}

impl Suite {
    fn pass(&self) -> bool {
        self.worst <= self.tol
    }
}

pub fn run(cfg: &RunConfig, corrupt: bool, out: Option<&Path>) -> Result<bool> {
    let par = cfg.parallelism();
    let seed = cfg.seed;
    let suites = vec![
        backend_equivalence(seed, &par)?,
        value_scan_consistency(seed.wrapping_add(1), corrupt, &par)?,
        combine_associativity(seed.wrapping_add(2), corrupt),
        traj_associativity(seed.wrapping_add(3)),
        combine_identity(seed.wrapping_add(4), corrupt),
        tree_depth(&par),
        barrier_smoothness(),
        barrier_worked_value(),
        model_jacobians(seed.wrapping_add(5))?,
    ];

    println!("{:<24} {:>6} {:>12} {:>9}  result", "suite", "cases", "worst", "tol");
    for s in &suites {
        println!(
            "{:<24} {:>6} {:>12.3e} {:>9.1e}  {}",
            s.name,
            s.cases,
            s.worst,
            s.tol,
            if s.pass() { "pass" } else { "FAIL" }
        );
    }
    let failed: Vec<&str> = suites.iter().filter(|s| !s.pass()).map(|s| s.name).collect();
    if failed.is_empty() {
        println!("verify: {}/{} suites passed", suites.len(), suites.len());
    } else {
        println!(
            "verify: {}/{} suites passed; FAILED: {}",
            suites.len() - failed.len(),
            suites.len(),
            failed.join(", ")
        );
    }

    if let Some(path) = out {
        let file = BufWriter::new(File::create(path)?);
        let mut w = CsvWriter::new(file, &["suite", "cases", "worst", "tol", "result"])?;
        for s in &suites {
            w.row(&[
                s.name.to_string(),
                s.cases.to_string(),
                fmt_f64(s.worst),
                fmt_f64(s.tol),
                if s.pass() { "pass" } else { "fail" }.to_string(),
            ])?;
        }
        w.finish()?;
    }
    Ok(failed.is_empty())
}

/// The value combine handed to the corruptible suites. The corrupted form
/// adds a state-dependent bump, which breaks associativity, the identity
/// laws, and agreement with the sequential recursion all at once.
fn value_combine(corrupt: bool) -> impl Fn(&ValueElement, &ValueElement) -> ValueElement + Sync {
    move |a, b| {
        let mut v = combine_value(a, b);
        if corrupt {
            v.P[(0, 0)] += 1e-3 * (1.0 + v.P.amax());
        }
        v
    }
}

fn elem_dev(a: &ValueElement, b: &ValueElement) -> f64 {
    let pairs = [
        ((&a.A - &b.A).amax(), b.A.amax()),
        ((&a.b - &b.b).amax(), b.b.amax()),
        ((&a.C - &b.C).amax(), b.C.amax()),
        ((&a.P - &b.P).amax(), b.P.amax()),
        ((&a.p - &b.p).amax(), b.p.amax()),
    ];
    pairs.iter().map(|(d, s)| d / (1.0 + s)).fold(0.0, f64::max)
}

fn traj_dev(a: &TrajElement, b: &TrajElement) -> f64 {
    let dA = (&a.A - &b.A).amax() / (1.0 + b.A.amax());
    let db = (&a.b - &b.b).amax() / (1.0 + b.b.amax());
    dA.max(db)
}

fn random_value_element<R: Rng>(n: usize, rng: &mut R) -> ValueElement {
    let l1 = random_matrix(n, n, rng);
    let l2 = random_matrix(n, n, rng);
    ValueElement {
        A: random_matrix(n, n, rng),
        b: random_vector(n, rng),
        C: (&l1 * l1.transpose()) / n as f64,
        P: (&l2 * l2.transpose()) / n as f64,
        p: random_vector(n, rng),
    }
}

fn random_traj_element<R: Rng>(n: usize, rng: &mut R) -> TrajElement {
    TrajElement { A: random_matrix(n, n, rng), b: random_vector(n, rng) }
}

/// Both scan modes and the sequential recursion against the dense KKT
/// oracle; past the oracle's horizon cap the backends check each other.
fn backend_equivalence(seed: u64, par: &Parallelism) -> Result<Suite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for &(n, m) in &[(2usize, 1usize), (4, 2), (8, 4)] {
        for &h in &[1usize, 8, 24] {
            for _ in 0..2 {
                let qp = random_qp(n, m, h, &mut rng);
                let oracle = solve_kkt_dense(&qp)?;
                let seq = solve_qp_sequential(&qp, 0.0)?;
                let tree = solve_qp_scan(&qp, 0.0, ScanMode::Tree, par)?;
                let lin = solve_qp_scan(&qp, 0.0, ScanMode::Sequential, par)?;
                worst = worst
                    .max(seq.rel_deviation(&oracle.dir))
                    .max(tree.dir.rel_deviation(&oracle.dir))
                    .max(lin.dir.rel_deviation(&oracle.dir));
                cases += 1;
            }
        }
    }
    for _ in 0..2 {
        let qp = random_qp(4, 2, 256, &mut rng);
        let seq = solve_qp_sequential(&qp, 0.0)?;
        let tree = solve_qp_scan(&qp, 0.0, ScanMode::Tree, par)?;
        worst = worst.max(tree.dir.rel_deviation(&seq));
        cases += 1;
    }
    Ok(Suite { name: "backend-equivalence", cases, worst, tol: 1e-8 })
}

/// The tree scan over value elements must land on the same cost-to-go
/// sequence as the sequential backward recursion.
fn value_scan_consistency(seed: u64, corrupt: bool, par: &Parallelism) -> Result<Suite> {
    let combine = value_combine(corrupt);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for &(n, m, h) in &[(2usize, 1usize, 5usize), (4, 2, 13), (3, 3, 32), (6, 2, 64)] {
        let qp = random_qp(n, m, h, &mut rng);
        let elems = init_value_elements(&qp, 0.0)?;
        let mut plan = ScanPlan::new(ScanDirection::Reverse, ScanMode::Tree);
        let scanned = plan.inclusive_scan(&elems, &ValueElement::identity(n), &combine, par);
        let pol = riccati_backward(&qp, 0.0)?;
        for i in 0..=h + 1 {
            let dP = (&scanned[i].P - &pol.P[i]).amax() / (1.0 + pol.P[i].amax());
            let dp = (&scanned[i].p - &pol.p[i]).amax() / (1.0 + pol.p[i].amax());
            worst = worst.max(dP).max(dp);
        }
        cases += 1;
    }
    Ok(Suite { name: "value-scan-vs-riccati", cases, worst, tol: 1e-9 })
}

fn combine_associativity(seed: u64, corrupt: bool) -> Suite {
    let combine = value_combine(corrupt);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = 200;
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let e1 = random_value_element(3, &mut rng);
        let e2 = random_value_element(3, &mut rng);
        let e3 = random_value_element(3, &mut rng);
        let left = combine(&combine(&e1, &e2), &e3);
        let right = combine(&e1, &combine(&e2, &e3));
        worst = worst.max(elem_dev(&left, &right));
    }
    Suite { name: "combine-associativity", cases, worst, tol: 1e-10 }
}

fn traj_associativity(seed: u64) -> Suite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = 200;
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let e1 = random_traj_element(4, &mut rng);
        let e2 = random_traj_element(4, &mut rng);
        let e3 = random_traj_element(4, &mut rng);
        let left = combine_traj(&combine_traj(&e1, &e2), &e3);
        let right = combine_traj(&e1, &combine_traj(&e2, &e3));
        worst = worst.max(traj_dev(&left, &right));
    }
    Suite { name: "traj-associativity", cases, worst, tol: 1e-10 }
}

/// Identity elements must be exact two-sided units of their operators.
fn combine_identity(seed: u64, corrupt: bool) -> Suite {
    let combine = value_combine(corrupt);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut cases = 0;
    let id_v = ValueElement::identity(4);
    let id_t = TrajElement::identity(4);
    for _ in 0..20 {
        let e = random_value_element(4, &mut rng);
        worst = worst.max(elem_dev(&combine(&e, &id_v), &e));
        worst = worst.max(elem_dev(&combine(&id_v, &e), &e));
        let t = random_traj_element(4, &mut rng);
        worst = worst.max(traj_dev(&combine_traj(&t, &id_t), &t));
        worst = worst.max(traj_dev(&combine_traj(&id_t, &t), &t));
        cases += 1;
    }
    Suite { name: "combine-identity", cases, worst, tol: 1e-12 }
}

/// Exact-arithmetic prefix sums: the tree schedule must reproduce the
/// sequential scan bit for bit and stay within its depth bound.
fn tree_depth(par: &Parallelism) -> Suite {
    let mut violations = 0usize;
    let combine = |a: &u64, b: &u64| a.wrapping_add(*b);
    for len in 1..=1024usize {
        let items: Vec<u64> = (0..len as u64)
            .map(|i| i.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(7))
            .collect();
        let mut tree_plan = ScanPlan::new(ScanDirection::Forward, ScanMode::Tree);
        let tree = tree_plan.inclusive_scan(&items, &0u64, combine, par);
        let mut seq_plan = ScanPlan::new(ScanDirection::Forward, ScanMode::Sequential);
        let seq = seq_plan.inclusive_scan(&items, &0u64, combine, par);
        if tree != seq || tree_plan.depth_counter != expected_tree_depth(len) {
            violations += 1;
        }
        let mut rev_plan = ScanPlan::new(ScanDirection::Reverse, ScanMode::Tree);
        let rev = rev_plan.inclusive_scan(&items, &0u64, combine, par);
        let suffix: Vec<u64> = (0..len)
            .map(|j| items[j..].iter().fold(0u64, |acc, v| acc.wrapping_add(*v)))
            .collect();
        if rev != suffix {
            violations += 1;
        }
    }
    Suite { name: "tree-depth-and-sums", cases: 1024, worst: violations as f64, tol: 0.0 }
}

/// Value and slope continuity across the relaxation seam, and agreement of
/// the analytic slope with central differences on both branches.
fn barrier_smoothness() -> Suite {
    let b = Barrier::new(1.0, 0.1);
    let delta = 0.1;
    let mut worst = 0.0f64;
    let mut cases = 0;

    // One-sided difference quotients at the seam against the shared slope.
    let eps = 1e-8;
    let g = b.grad(delta);
    worst = worst.max(((b.value(delta + eps) - b.value(delta)) / eps - g).abs());
    worst = worst.max(((b.value(delta) - b.value(delta - eps)) / eps - g).abs());
    worst = worst.max((b.grad(delta + 1e-12) - b.grad(delta - 1e-12)).abs());
    cases += 3;

    // Central differences on each branch (none straddles the seam).
    let h = 1e-6;
    for xi in [0.02, 0.05, 0.09, 0.0995, 0.1005, 0.15, 0.5, 1.0] {
        let fd = (b.value(xi + h) - b.value(xi - h)) / (2.0 * h);
        worst = worst.max((fd - b.grad(xi)).abs() / (1.0 + b.grad(xi).abs()));
        cases += 1;
    }
    Suite { name: "barrier-smoothness", cases, worst, tol: 1e-6 }
}

/// Hand-evaluated point inside the quadratic extension:
/// B(0.05; mu=1, delta=0.1) = 0.625 + ln 10.
fn barrier_worked_value() -> Suite {
    let b = Barrier::new(1.0, 0.1);
    let want = 0.625 - 0.1f64.ln();
    Suite {
        name: "barrier-worked-value",
        cases: 1,
        worst: (b.value(0.05) - want).abs(),
        tol: 1e-9,
    }
}

/// Analytic dynamics Jacobians against central differences, for the
/// pendulum and for the rigid-body trunk model at tilted, moving states.
fn model_jacobians(seed: u64) -> Result<Suite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut cases = 0;

    let pend = PendulumOcp::swing_up(20, 0.05, 10.0);
    for _ in 0..5 {
        let x = DVector::from_fn(2, |_, _| 3.0 * (2.0 * rng.gen::<f64>() - 1.0));
        let u = DVector::from_fn(1, |_, _| 5.0 * (2.0 * rng.gen::<f64>() - 1.0));
        worst = worst.max(jacobian_fd_dev(&pend, 0, &x, &u)?);
        cases += 1;
    }

    let params = SrbdParams::default();
    let x0 = SrbdMpc::standing_state(&params, 0.0, 0.0, 0.3);
    let mpc = SrbdMpc::new(
        params,
        GaitSchedule::trot(0.5),
        10,
        0.02,
        SrbdCommand { v_xy: Vector2::new(0.2, 0.0), yaw_rate: 0.0 },
        &x0,
        0.0,
    );
    let ocp = mpc.make_ocp(0.0, &x0);
    let u_nom = mpc.nominal_control(0.0);
    for _ in 0..5 {
        let mut x = x0.clone();
        for j in 0..3 {
            x[j] += 0.2 * (2.0 * rng.gen::<f64>() - 1.0); // position
            x[3 + j] += 0.15 * (2.0 * rng.gen::<f64>() - 1.0); // attitude
            x[6 + j] += 0.3 * (2.0 * rng.gen::<f64>() - 1.0); // velocity
            x[9 + j] += 0.3 * (2.0 * rng.gen::<f64>() - 1.0); // body rate
        }
        let mut u = u_nom.clone();
        for v in u.iter_mut() {
            *v += 20.0 * (2.0 * rng.gen::<f64>() - 1.0);
        }
        worst = worst.max(jacobian_fd_dev(&ocp, 0, &x, &u)?);
        cases += 1;
    }
    Ok(Suite { name: "jacobian-fd", cases, worst, tol: 1e-5 })
}

fn jacobian_fd_dev(ocp: &dyn Ocp, i: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
    let (jx, ju) = ocp.dynamics_jac(i, x, u)?;
    let h = 1e-6;
    let mut worst = 0.0f64;
    for j in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let fd = (ocp.dynamics(i, &xp, u)? - ocp.dynamics(i, &xm, u)?) / (2.0 * h);
        let col = jx.column(j).into_owned();
        worst = worst.max((&fd - &col).amax() / (1.0 + col.amax()));
    }
    for j in 0..u.len() {
        let mut up = u.clone();
        let mut um = u.clone();
        up[j] += h;
        um[j] -= h;
        let fd = (ocp.dynamics(i, x, &up)? - ocp.dynamics(i, x, &um)?) / (2.0 * h);
        let col = ju.column(j).into_owned();
        worst = worst.max((&fd - &col).amax() / (1.0 + col.amax()));
    }
    Ok(worst)
}
