//! Multiple-shooting SQP driver.
//!
//! Each iterate linearizes the OCP around the current trajectory, solves the
//! equality-constrained QP with one of the backends, and takes a step chosen
//! by a filter line search over a fixed grid of step sizes. The QP solve is
//! wrapped in a Levenberg-Marquardt ladder: control-Hessian factorization
//! failures bump a diagonal shift rho and retry, and a fully rejected search
//! bumps it once more before giving up on the iterate.

#![allow(non_snake_case)]

use crate::exec::Parallelism;
use crate::ocp::{constraint_violation, cost, cost_gradient_dot, linearize, Ocp, Trajectory};
use crate::qp::{Direction, QpData};
use crate::scan::ScanMode;
use crate::scan_lqr::solve_qp_scan;
use crate::{Error, Result};

/// Which LQR backend solves the QP subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Riccati,
    Scan(ScanMode),
}

impl Backend {
    pub fn parse(s: &str) -> Result<Backend> {
        match s {
            "riccati" | "sequential" => Ok(Backend::Riccati),
            "scan" => Ok(Backend::Scan(ScanMode::Tree)),
            "scan-seq" => Ok(Backend::Scan(ScanMode::Sequential)),
            other => Err(Error::Config(format!(
                "unknown backend {other:?}; expected riccati (alias sequential), scan, or scan-seq"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Riccati => "riccati",
            Backend::Scan(ScanMode::Tree) => "scan",
            Backend::Scan(ScanMode::Sequential) => "scan-seq",
        }
    }
}

/// Step sizes tried by the search: 1, 1/2, ..., 2^-(ALPHA_GRID-1).
pub const ALPHA_GRID: usize = 10;
/// Armijo slope fraction; public so logged steps can be replayed externally.
pub const ARMIJO_C1: f64 = 1e-4;
/// A direction only counts as descent when its slope clears round-off:
/// gdot < -DESCENT_TOL * (1 + |cost|). Below that, Armijo would demand a
/// decrease smaller than the noise in evaluating the cost itself, and the
/// search must fall back to the no-worse acceptance instead of stalling.
pub const DESCENT_TOL: f64 = 1e-12;
/// Relative slack for the no-worse comparisons: two evaluations closer than
/// EVAL_EPS * (1 + |reference|) are indistinguishable in double precision,
/// so near-converged candidates are not rejected over last-ulp jitter.
pub const EVAL_EPS: f64 = 1e-14;
const LM_MIN: f64 = 1e-6;
const LM_FACTOR: f64 = 10.0;
const LM_MAX: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub backend: Backend,
    pub max_iters: usize,
    pub tol_theta: f64,
    pub tol_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            backend: Backend::Riccati,
            max_iters: 50,
            tol_theta: 1e-8,
            tol_step: 1e-8,
        }
    }
}

/// Per-iterate record; the acceptance replay of the filter guarantee and all
/// CSV outputs read from this.
#[derive(Debug, Clone)]
pub struct IterStats {
    pub cost_before: f64,
    pub theta_before: f64,
    pub cost_after: f64,
    pub theta_after: f64,
    pub gdot: f64,
    pub alpha: f64,
    pub accepted: bool,
    pub rho: f64,
    pub step_inf: f64,
    pub backward_depth: usize,
    pub forward_depth: usize,
    pub linearize_ns: u128,
    pub qp_ns: u128,
    pub search_ns: u128,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub traj: Trajectory,
    pub stats: Vec<IterStats>,
    pub converged: bool,
}

/// Infeasibility level above which the search only asks for theta progress.
pub fn theta_max(horizon: usize) -> f64 {
    1e-2 * (horizon + 1) as f64
}

/// Solve the QP with the selected backend. Returns the direction plus the
/// (backward, forward) dependency-chain lengths the backend reports.
pub fn solve_qp(
    qp: &QpData,
    rho: f64,
    backend: Backend,
    par: &Parallelism,
) -> Result<(Direction, usize, usize)> {
    match backend {
        Backend::Riccati => {
            let dir = crate::riccati::solve_qp_sequential(qp, rho)?;
            let depth = qp.horizon() + 1;
            Ok((dir, depth, depth))
        }
        Backend::Scan(mode) => {
            let out = solve_qp_scan(qp, rho, mode, par)?;
            Ok((out.dir, out.backward_depth, out.forward_depth))
        }
    }
}

fn next_rho(rho: f64) -> f64 {
    if rho == 0.0 {
        LM_MIN
    } else {
        (rho * LM_FACTOR).min(LM_MAX)
    }
}

/// Climb the regularization ladder until the backend factorizes.
fn solve_qp_regularized(
    qp: &QpData,
    rho_start: f64,
    backend: Backend,
    par: &Parallelism,
) -> Result<(Direction, usize, usize, f64)> {
    let mut rho = rho_start;
    loop {
        match solve_qp(qp, rho, backend, par) {
            Ok((dir, bd, fd)) => return Ok((dir, bd, fd, rho)),
            Err(e @ (Error::Factorization { .. } | Error::NonFinite { .. })) => {
                if rho >= LM_MAX {
                    return Err(e);
                }
                rho = next_rho(rho);
            }
            Err(e) => return Err(e),
        }
    }
}

pub struct SearchOutcome {
    pub traj: Trajectory,
    pub alpha: f64,
    pub accepted: bool,
    pub cost_before: f64,
    pub theta_before: f64,
    pub cost_after: f64,
    pub theta_after: f64,
}

/// Filter line search over the fixed alpha grid. Every candidate is
/// evaluated independently (the grid is a worker-parallel map), then the
/// largest acceptable step wins. Acceptance per candidate:
/// infeasibility above theta_max demands theta progress; a descent
/// direction (slope beyond the round-off floor, see [`DESCENT_TOL`])
/// demands Armijo decrease; otherwise cost or theta must not get worse.
/// Candidates whose rollout leaves the model's valid region are rejected
/// outright.
pub fn filter_line_search(
    ocp: &dyn Ocp,
    traj: &Trajectory,
    dir: &Direction,
    gdot: f64,
    par: &Parallelism,
) -> Result<SearchOutcome> {
    let cost0 = cost(ocp, traj);
    let theta0 = constraint_violation(ocp, traj)?;
    let t_max = theta_max(ocp.horizon());

    struct Candidate {
        traj: Trajectory,
        cost: f64,
        theta: f64,
        ok: bool,
    }

    let candidates = par.map_indexed(ALPHA_GRID, |k| {
        let alpha = 0.5f64.powi(k as i32);
        let cand = traj.step(dir, alpha);
        let c = cost(ocp, &cand);
        match constraint_violation(ocp, &cand) {
            Ok(theta) if c.is_finite() && theta.is_finite() => {
                let ok = if theta0 > t_max {
                    theta <= theta0
                } else if gdot < -DESCENT_TOL * (1.0 + cost0.abs()) {
                    c <= cost0 + ARMIJO_C1 * alpha * gdot
                } else {
                    c <= cost0 + EVAL_EPS * (1.0 + cost0.abs())
                        || theta <= theta0 + EVAL_EPS * (1.0 + theta0)
                };
                Candidate { traj: cand, cost: c, theta, ok }
            }
            _ => Candidate { traj: cand, cost: f64::INFINITY, theta: f64::INFINITY, ok: false },
        }
    });

    for (k, cand) in candidates.into_iter().enumerate() {
        if cand.ok {
            return Ok(SearchOutcome {
                traj: cand.traj,
                alpha: 0.5f64.powi(k as i32),
                accepted: true,
                cost_before: cost0,
                theta_before: theta0,
                cost_after: cand.cost,
                theta_after: cand.theta,
            });
        }
    }
    Ok(SearchOutcome {
        traj: traj.clone(),
        alpha: 0.0,
        accepted: false,
        cost_before: cost0,
        theta_before: theta0,
        cost_after: cost0,
        theta_after: theta0,
    })
}

/// One SQP iterate: linearize, solve, search. `rho` carries the
/// regularization level across iterates (reset to 0 between solves).
pub fn sqp_iterate(
    ocp: &dyn Ocp,
    traj: &mut Trajectory,
    rho: &mut f64,
    opts: &SolverOptions,
    par: &Parallelism,
) -> Result<IterStats> {
    let t0 = std::time::Instant::now();
    let qp = linearize(ocp, traj, par)?;
    let linearize_ns = t0.elapsed().as_nanos();

    let t1 = std::time::Instant::now();
    let (dir, bd, fd, used_rho) = solve_qp_regularized(&qp, *rho, opts.backend, par)?;
    let mut qp_ns = t1.elapsed().as_nanos();

    let gdot = cost_gradient_dot(ocp, traj, &dir);
    let t2 = std::time::Instant::now();
    let mut outcome = filter_line_search(ocp, traj, &dir, gdot, par)?;
    let mut search_ns = t2.elapsed().as_nanos();
    let mut rho_now = used_rho;
    let mut dir_now = dir;
    let mut gdot_now = gdot;

    if !outcome.accepted && rho_now < LM_MAX {
        // A rejected step usually means the quadratic model was too bold;
        // steepen it once and retry before declaring the iterate stalled.
        rho_now = next_rho(rho_now);
        let t3 = std::time::Instant::now();
        let (dir2, _, _, rho2) = solve_qp_regularized(&qp, rho_now, opts.backend, par)?;
        qp_ns += t3.elapsed().as_nanos();
        gdot_now = cost_gradient_dot(ocp, traj, &dir2);
        let t4 = std::time::Instant::now();
        outcome = filter_line_search(ocp, traj, &dir2, gdot_now, par)?;
        search_ns += t4.elapsed().as_nanos();
        rho_now = rho2;
        dir_now = dir2;
    }

    let step_inf = if outcome.accepted {
        outcome.alpha * dir_now.primal_inf_norm()
    } else {
        0.0
    };
    *rho = rho_now;
    let stats = IterStats {
        cost_before: outcome.cost_before,
        theta_before: outcome.theta_before,
        cost_after: outcome.cost_after,
        theta_after: outcome.theta_after,
        gdot: gdot_now,
        alpha: outcome.alpha,
        accepted: outcome.accepted,
        rho: rho_now,
        step_inf,
        backward_depth: bd,
        forward_depth: fd,
        linearize_ns,
        qp_ns,
        search_ns,
    };
    *traj = outcome.traj;
    Ok(stats)
}

/// Iterate until theta and the step both drop under tolerance, the iterate
/// stalls (no step size accepted), or the budget runs out.
pub fn solve(ocp: &dyn Ocp, init: Trajectory, opts: &SolverOptions, par: &Parallelism) -> Result<SolveResult> {
    let mut traj = init;
    let mut stats = Vec::new();
    let mut rho = 0.0;
    let mut converged = false;
    for _ in 0..opts.max_iters {
        let it = sqp_iterate(ocp, &mut traj, &mut rho, opts, par)?;
        let stalled = !it.accepted;
        let done = it.theta_after <= opts.tol_theta && it.step_inf <= opts.tol_step && it.accepted;
        stats.push(it);
        if done {
            converged = true;
            break;
        }
        if stalled {
            break;
        }
    }
    Ok(SolveResult { traj, stats, converged })
}

/// Receding-horizon warm start: drop node 0, duplicate the last node.
pub fn warm_start_shift(traj: &Trajectory) -> Trajectory {
    let shift = |v: &Vec<nalgebra::DVector<f64>>| {
        let mut out: Vec<_> = v[1..].to_vec();
        out.push(v[v.len() - 1].clone());
        out
    };
    Trajectory { x: shift(&traj.x), u: shift(&traj.u), lam: shift(&traj.lam) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocp::Residual;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};

    /// Linear-quadratic OCP: the SQP should land on the optimum in one
    /// accepted full step.
    struct Lq;

    impl Ocp for Lq {
        fn horizon(&self) -> usize {
            7
        }
        fn state_dim(&self) -> usize {
            2
        }
        fn control_dim(&self) -> usize {
            1
        }
        fn dt(&self) -> f64 {
            0.1
        }
        fn initial_state(&self) -> DVector<f64> {
            DVector::from_vec(vec![1.0, -0.5])
        }
        fn dynamics(&self, _i: usize, x: &DVector<f64>, u: &DVector<f64>) -> crate::Result<DVector<f64>> {
            Ok(DVector::from_vec(vec![x[0] + 0.1 * x[1], x[1] + 0.1 * u[0]]))
        }
        fn dynamics_jac(
            &self,
            _i: usize,
            _x: &DVector<f64>,
            _u: &DVector<f64>,
        ) -> crate::Result<(DMatrix<f64>, DMatrix<f64>)> {
            Ok((
                DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]),
                DMatrix::from_row_slice(2, 1, &[0.0, 0.1]),
            ))
        }
        fn stage_residual(&self, _i: usize, x: &DVector<f64>, u: &DVector<f64>) -> Residual {
            Residual {
                val: DVector::from_vec(vec![x[0], x[1], u[0]]),
                jx: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
                ju: DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]),
                w: DVector::from_vec(vec![1.0, 1.0, 0.1]),
            }
        }
        fn terminal_residual(&self, x: &DVector<f64>) -> Residual {
            Residual {
                val: x.clone(),
                jx: DMatrix::identity(2, 2),
                ju: DMatrix::zeros(2, 1),
                w: DVector::from_element(2, 5.0),
            }
        }
    }

    #[test]
    fn lq_solves_in_one_iterate() {
        let ocp = Lq;
        let mut traj = Trajectory::hold(&ocp);
        let mut rho = 0.0;
        let opts = SolverOptions::default();
        let it = sqp_iterate(&ocp, &mut traj, &mut rho, &opts, &Parallelism::serial()).unwrap();
        assert!(it.accepted);
        assert_abs_diff_eq!(it.alpha, 1.0);
        assert!(it.theta_after <= 1e-10, "theta_after = {}", it.theta_after);

        // At the LQ optimum the next direction is zero.
        let it2 = sqp_iterate(&ocp, &mut traj, &mut rho, &opts, &Parallelism::serial()).unwrap();
        assert!(it2.accepted);
        assert!(it2.step_inf <= 1e-9, "step_inf = {}", it2.step_inf);
    }

    #[test]
    fn backends_agree_on_lq() {
        let ocp = Lq;
        let par = Parallelism::serial();
        let baseline = solve(&ocp, Trajectory::hold(&ocp), &SolverOptions::default(), &par).unwrap();
        assert!(baseline.converged);
        for backend in [
            Backend::Scan(ScanMode::Sequential),
            Backend::Scan(ScanMode::Tree),
        ] {
            let opts = SolverOptions { backend, ..Default::default() };
            let got = solve(&ocp, Trajectory::hold(&ocp), &opts, &par).unwrap();
            assert!(got.converged);
            for (a, b) in baseline.traj.x.iter().zip(&got.traj.x) {
                assert!((a - b).amax() <= 1e-8);
            }
            for (a, b) in baseline.traj.u.iter().zip(&got.traj.u) {
                assert!((a - b).amax() <= 1e-8);
            }
        }
    }

    #[test]
    fn zero_direction_is_accepted_at_full_step() {
        let ocp = Lq;
        let traj = Trajectory::hold(&ocp);
        let dir = Direction {
            dx: vec![DVector::zeros(2); 9],
            du: vec![DVector::zeros(1); 8],
            dlam: vec![DVector::zeros(2); 9],
        };
        let out = filter_line_search(&ocp, &traj, &dir, 0.0, &Parallelism::serial()).unwrap();
        assert!(out.accepted);
        assert_abs_diff_eq!(out.alpha, 1.0);
    }

    #[test]
    fn filter_guarantee_holds_over_a_solve() {
        let ocp = Lq;
        let res = solve(&ocp, Trajectory::hold(&ocp), &SolverOptions::default(), &Parallelism::serial()).unwrap();
        let t_max = theta_max(ocp.horizon());
        for it in &res.stats {
            if !it.accepted {
                continue;
            }
            let ok = if it.theta_before > t_max {
                it.theta_after <= it.theta_before
            } else if it.gdot < 0.0 {
                it.cost_after <= it.cost_before + ARMIJO_C1 * it.alpha * it.gdot
            } else {
                it.cost_after <= it.cost_before || it.theta_after <= it.theta_before
            };
            assert!(ok, "accepted step violates the filter: {it:?}");
        }
    }

    #[test]
    fn warm_start_shift_drops_first_node() {
        let ocp = Lq;
        let traj = Trajectory::rollout(&ocp, &DVector::from_element(1, 0.3)).unwrap();
        let shifted = warm_start_shift(&traj);
        assert_eq!(shifted.x.len(), traj.x.len());
        assert_eq!(shifted.x[0], traj.x[1]);
        assert_eq!(shifted.u[0], traj.u[1]);
        assert_eq!(shifted.x[traj.x.len() - 1], traj.x[traj.x.len() - 1]);
    }

    /// Two controls, the second influencing neither dynamics nor cost: its
    /// row and column of G = R + B'PB are zero, so the factorization fails
    /// at rho = 0 and the ladder must engage, still producing an accepted
    /// step.
    struct DeadControl;

    impl Ocp for DeadControl {
        fn horizon(&self) -> usize {
            4
        }
        fn state_dim(&self) -> usize {
            1
        }
        fn control_dim(&self) -> usize {
            2
        }
        fn dt(&self) -> f64 {
            0.1
        }
        fn initial_state(&self) -> DVector<f64> {
            DVector::from_element(1, 2.0)
        }
        fn dynamics(&self, _i: usize, x: &DVector<f64>, u: &DVector<f64>) -> crate::Result<DVector<f64>> {
            Ok(DVector::from_element(1, x[0] + 0.1 * u[0]))
        }
        fn dynamics_jac(
            &self,
            _i: usize,
            _x: &DVector<f64>,
            _u: &DVector<f64>,
        ) -> crate::Result<(DMatrix<f64>, DMatrix<f64>)> {
            Ok((
                DMatrix::from_element(1, 1, 1.0),
                DMatrix::from_row_slice(1, 2, &[0.1, 0.0]),
            ))
        }
        fn stage_residual(&self, _i: usize, x: &DVector<f64>, _u: &DVector<f64>) -> Residual {
            Residual {
                val: DVector::from_element(1, x[0]),
                jx: DMatrix::from_element(1, 1, 1.0),
                ju: DMatrix::zeros(1, 2),
                w: DVector::from_element(1, 1.0),
            }
        }
        fn terminal_residual(&self, x: &DVector<f64>) -> Residual {
            Residual {
                val: DVector::from_element(1, x[0]),
                jx: DMatrix::from_element(1, 1, 1.0),
                ju: DMatrix::zeros(1, 2),
                w: DVector::from_element(1, 1.0),
            }
        }
    }

    #[test]
    fn regularization_ladder_rescues_singular_control_hessian() {
        let ocp = DeadControl;
        let mut traj = Trajectory::hold(&ocp);
        let mut rho = 0.0;
        let it = sqp_iterate(&ocp, &mut traj, &mut rho, &SolverOptions::default(), &Parallelism::serial()).unwrap();
        assert!(it.rho >= LM_MIN, "ladder should have engaged, rho = {}", it.rho);
        assert!(it.accepted);
    }
}
