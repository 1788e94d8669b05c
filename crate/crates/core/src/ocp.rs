//! Nonlinear OCP interface and its linearization into the QP subproblem.
//!
//! Costs are sums of weighted residuals 1/2 ||eps_i(x,u)||^2_W (diagonal W)
//! plus relaxed log barriers on scalar inequalities xi(x,u) >= 0. The
//! Hessian blocks are assembled Gauss-Newton style, J'WJ plus barrier
//! curvature, so they are PSD by construction; the gradient blocks are full
//! Lagrangian gradients, which is what makes the QP multipliers increments
//! on the current duals rather than replacements.
//!
//! Dynamics evaluation is fallible: models with geometric singularities
//! (Euler-rate inversion) refuse states outside their guard instead of
//! returning NaN, and the line search treats such candidates as rejected.

#![allow(non_snake_case)]

use nalgebra::{DMatrix, DVector};

use crate::barrier::Barrier;
use crate::exec::Parallelism;
use crate::qp::{Direction, QpData};
use crate::Result;

/// Weighted residual block eps with Jacobians; `w` is the diagonal of W.
#[derive(Debug, Clone)]
pub struct Residual {
    pub val: DVector<f64>,
    pub jx: DMatrix<f64>,
    pub ju: DMatrix<f64>,
    pub w: DVector<f64>,
}

impl Residual {
    pub fn empty(n: usize, m: usize) -> Self {
        Residual {
            val: DVector::zeros(0),
            jx: DMatrix::zeros(0, n),
            ju: DMatrix::zeros(0, m),
            w: DVector::zeros(0),
        }
    }

    pub fn cost(&self) -> f64 {
        0.5 * self
            .val
            .iter()
            .zip(self.w.iter())
            .map(|(e, w)| w * e * e)
            .sum::<f64>()
    }
}

/// One barrier constraint evaluated at a point: xi and its gradients.
#[derive(Debug, Clone)]
pub struct BarrierEval {
    pub xi: f64,
    pub dx: DVector<f64>,
    pub du: DVector<f64>,
    pub barrier: Barrier,
}

pub trait Ocp: Send + Sync {
    fn horizon(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn dt(&self) -> f64;
    fn initial_state(&self) -> DVector<f64>;

    /// Discrete dynamics x_{i+1} = h_i(x, u) for stage i in 0..=horizon().
    fn dynamics(&self, i: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;
    fn dynamics_jac(
        &self,
        i: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)>;

    fn stage_residual(&self, i: usize, x: &DVector<f64>, u: &DVector<f64>) -> Residual;
    fn terminal_residual(&self, x: &DVector<f64>) -> Residual;

    fn stage_barriers(&self, _i: usize, _x: &DVector<f64>, _u: &DVector<f64>) -> Vec<BarrierEval> {
        Vec::new()
    }

    /// State indices of the planar base position, when the model has one;
    /// required by inter-robot coupling.
    fn planar_position(&self) -> Option<(usize, usize)> {
        None
    }
}

/// Multiple-shooting iterate: states, controls, and dynamics multipliers.
/// x and lam cover nodes 0..=N+1, u covers 0..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub lam: Vec<DVector<f64>>,
}

impl Trajectory {
    /// Hold the initial state, zero controls, zero multipliers.
    pub fn hold(ocp: &dyn Ocp) -> Self {
        let n = ocp.state_dim();
        let N = ocp.horizon();
        Trajectory {
            x: vec![ocp.initial_state(); N + 2],
            u: vec![DVector::zeros(ocp.control_dim()); N + 1],
            lam: vec![DVector::zeros(n); N + 2],
        }
    }

    /// Open-loop rollout of a constant control; zero multipliers.
    pub fn rollout(ocp: &dyn Ocp, u0: &DVector<f64>) -> Result<Self> {
        let N = ocp.horizon();
        let mut x = Vec::with_capacity(N + 2);
        x.push(ocp.initial_state());
        for i in 0..=N {
            let next = ocp.dynamics(i, &x[i], u0)?;
            x.push(next);
        }
        Ok(Trajectory {
            x,
            u: vec![u0.clone(); N + 1],
            lam: vec![DVector::zeros(ocp.state_dim()); N + 2],
        })
    }

    pub fn step(&self, dir: &Direction, alpha: f64) -> Trajectory {
        Trajectory {
            x: self.x.iter().zip(&dir.dx).map(|(x, d)| x + alpha * d).collect(),
            u: self.u.iter().zip(&dir.du).map(|(u, d)| u + alpha * d).collect(),
            lam: self.lam.iter().zip(&dir.dlam).map(|(l, d)| l + alpha * d).collect(),
        }
    }
}

/// Total cost: residual terms plus barrier values.
pub fn cost(ocp: &dyn Ocp, traj: &Trajectory) -> f64 {
    let N = ocp.horizon();
    let mut total = 0.0;
    for i in 0..=N {
        total += ocp.stage_residual(i, &traj.x[i], &traj.u[i]).cost();
        for be in ocp.stage_barriers(i, &traj.x[i], &traj.u[i]) {
            total += be.barrier.value(be.xi);
        }
    }
    total + ocp.terminal_residual(&traj.x[N + 1]).cost()
}

/// Dynamics infeasibility theta: l2 norms of the shooting defects plus the
/// initial-state mismatch. Errors if the trajectory leaves the model's
/// valid region.
pub fn constraint_violation(ocp: &dyn Ocp, traj: &Trajectory) -> Result<f64> {
    let N = ocp.horizon();
    let mut theta = (ocp.initial_state() - &traj.x[0]).norm();
    for i in 0..=N {
        theta += (&traj.x[i + 1] - ocp.dynamics(i, &traj.x[i], &traj.u[i])?).norm();
    }
    Ok(theta)
}

/// Exact directional derivative of `cost` along the primal part of `dir`.
pub fn cost_gradient_dot(ocp: &dyn Ocp, traj: &Trajectory, dir: &Direction) -> f64 {
    let N = ocp.horizon();
    let mut dot = 0.0;
    for i in 0..=N {
        let res = ocp.stage_residual(i, &traj.x[i], &traj.u[i]);
        let we = res.w.component_mul(&res.val);
        dot += (res.jx.transpose() * &we).dot(&dir.dx[i]);
        dot += (res.ju.transpose() * &we).dot(&dir.du[i]);
        for be in ocp.stage_barriers(i, &traj.x[i], &traj.u[i]) {
            let g = be.barrier.grad(be.xi);
            dot += g * (be.dx.dot(&dir.dx[i]) + be.du.dot(&dir.du[i]));
        }
    }
    let term = ocp.terminal_residual(&traj.x[N + 1]);
    let we = term.w.component_mul(&term.val);
    dot + (term.jx.transpose() * &we).dot(&dir.dx[N + 1])
}

/// Build the QP subproblem at the current iterate. Node blocks are
/// independent and dispatched over the workers.
pub fn linearize(ocp: &dyn Ocp, traj: &Trajectory, par: &Parallelism) -> Result<QpData> {
    let N = ocp.horizon();
    let n = ocp.state_dim();
    let m = ocp.control_dim();
    let mut qp = QpData::zeros(n, m, N);

    struct NodeBlocks {
        A: DMatrix<f64>,
        B: DMatrix<f64>,
        b: DVector<f64>,
        Q: DMatrix<f64>,
        S: DMatrix<f64>,
        R: DMatrix<f64>,
        q: DVector<f64>,
        r: DVector<f64>,
    }

    let nodes = par.map_indexed(N + 1, |i| -> Result<NodeBlocks> {
        let (x, u) = (&traj.x[i], &traj.u[i]);
        let (A, B) = ocp.dynamics_jac(i, x, u)?;
        let b = ocp.dynamics(i, x, u)? - &traj.x[i + 1];

        let res = ocp.stage_residual(i, x, u);
        let wjx = scale_rows(&res.jx, &res.w);
        let wju = scale_rows(&res.ju, &res.w);
        let mut Q = res.jx.transpose() * &wjx;
        let mut S = res.ju.transpose() * &wjx;
        let mut R = res.ju.transpose() * &wju;
        let we = res.w.component_mul(&res.val);
        let mut q = res.jx.transpose() * &we;
        let mut r = res.ju.transpose() * &we;

        for be in ocp.stage_barriers(i, x, u) {
            let g = be.barrier.grad(be.xi);
            let h = be.barrier.hess(be.xi);
            Q += h * &be.dx * be.dx.transpose();
            S += h * &be.du * be.dx.transpose();
            R += h * &be.du * be.du.transpose();
            q += g * &be.dx;
            r += g * &be.du;
        }

        // Lagrangian gradient terms; lam_i enters with a minus from the
        // previous node's dynamics constraint (and the initial-state row at
        // i = 0).
        q += A.transpose() * &traj.lam[i + 1] - &traj.lam[i];
        r += B.transpose() * &traj.lam[i + 1];

        crate::riccati::symmetrize(&mut Q);
        crate::riccati::symmetrize(&mut R);
        Ok(NodeBlocks { A, B, b, Q, S, R, q, r })
    });

    for (i, blk) in nodes.into_iter().enumerate() {
        let blk = blk?;
        qp.A[i] = blk.A;
        qp.B[i] = blk.B;
        qp.b[i] = blk.b;
        qp.Q[i] = blk.Q;
        qp.S[i] = blk.S;
        qp.R[i] = blk.R;
        qp.q[i] = blk.q;
        qp.r[i] = blk.r;
    }

    let term = ocp.terminal_residual(&traj.x[N + 1]);
    let wjx = scale_rows(&term.jx, &term.w);
    qp.P_term = term.jx.transpose() * &wjx;
    crate::riccati::symmetrize(&mut qp.P_term);
    qp.p_term = term.jx.transpose() * term.w.component_mul(&term.val) - &traj.lam[N + 1];
    qp.dx0 = ocp.initial_state() - &traj.x[0];
    qp.validate()?;
    Ok(qp)
}

fn scale_rows(j: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut out = j.clone();
    for (r, &wi) in w.iter().enumerate() {
        out.row_mut(r).scale_mut(wi);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Tiny concrete OCP: scalar state/control, linear dynamics
    /// x+ = 0.9x + 0.5u, residuals (x - 1) and u, one barrier u + 2 >= 0.
    struct Toy;

    impl Ocp for Toy {
        fn horizon(&self) -> usize {
            3
        }
        fn state_dim(&self) -> usize {
            1
        }
        fn control_dim(&self) -> usize {
            1
        }
        fn dt(&self) -> f64 {
            0.1
        }
        fn initial_state(&self) -> DVector<f64> {
            DVector::from_element(1, 0.3)
        }
        fn dynamics(&self, _i: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(DVector::from_element(1, 0.9 * x[0] + 0.5 * u[0]))
        }
        fn dynamics_jac(
            &self,
            _i: usize,
            _x: &DVector<f64>,
            _u: &DVector<f64>,
        ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
            Ok((DMatrix::from_element(1, 1, 0.9), DMatrix::from_element(1, 1, 0.5)))
        }
        fn stage_residual(&self, _i: usize, x: &DVector<f64>, u: &DVector<f64>) -> Residual {
            Residual {
                val: DVector::from_vec(vec![x[0] - 1.0, u[0]]),
                jx: DMatrix::from_vec(2, 1, vec![1.0, 0.0]),
                ju: DMatrix::from_vec(2, 1, vec![0.0, 1.0]),
                w: DVector::from_vec(vec![2.0, 0.5]),
            }
        }
        fn terminal_residual(&self, x: &DVector<f64>) -> Residual {
            Residual {
                val: DVector::from_element(1, x[0] - 1.0),
                jx: DMatrix::from_element(1, 1, 1.0),
                ju: DMatrix::zeros(1, 1),
                w: DVector::from_element(1, 10.0),
            }
        }
        fn stage_barriers(&self, _i: usize, _x: &DVector<f64>, u: &DVector<f64>) -> Vec<BarrierEval> {
            vec![BarrierEval {
                xi: u[0] + 2.0,
                dx: DVector::zeros(1),
                du: DVector::from_element(1, 1.0),
                barrier: Barrier::new(0.1, 0.5),
            }]
        }
    }

    #[test]
    fn gradient_dot_matches_finite_difference() {
        let ocp = Toy;
        let traj = Trajectory::rollout(&ocp, &DVector::from_element(1, 0.2)).unwrap();
        let dir = Direction {
            dx: (0..5).map(|i| DVector::from_element(1, 0.1 - 0.03 * i as f64)).collect(),
            du: (0..4).map(|i| DVector::from_element(1, -0.05 + 0.02 * i as f64)).collect(),
            dlam: vec![DVector::zeros(1); 5],
        };
        let h = 1e-7;
        let fd = (cost(&ocp, &traj.step(&dir, h)) - cost(&ocp, &traj.step(&dir, -h))) / (2.0 * h);
        assert_abs_diff_eq!(cost_gradient_dot(&ocp, &traj, &dir), fd, epsilon = 1e-6);
    }

    #[test]
    fn defects_vanish_on_rollout() {
        let ocp = Toy;
        let traj = Trajectory::rollout(&ocp, &DVector::zeros(1)).unwrap();
        assert!(constraint_violation(&ocp, &traj).unwrap() <= 1e-14);
        let held = Trajectory::hold(&ocp);
        assert!(constraint_violation(&ocp, &held).unwrap() > 0.01);
    }

    #[test]
    fn linearized_blocks_are_psd() {
        let ocp = Toy;
        let traj = Trajectory::hold(&ocp);
        let qp = linearize(&ocp, &traj, &Parallelism::serial()).unwrap();
        for i in 0..=ocp.horizon() {
            let joint = DMatrix::from_fn(2, 2, |r, c| match (r, c) {
                (0, 0) => qp.Q[i][(0, 0)],
                (1, 1) => qp.R[i][(0, 0)],
                _ => qp.S[i][(0, 0)],
            });
            assert!(joint.symmetric_eigenvalues().min() >= -1e-12);
        }
    }

    #[test]
    fn lagrangian_gradients_carry_multipliers() {
        let ocp = Toy;
        let mut traj = Trajectory::hold(&ocp);
        for l in traj.lam.iter_mut() {
            l[0] = 0.7;
        }
        let qp = linearize(&ocp, &traj, &Parallelism::serial()).unwrap();
        let bare = {
            let mut t2 = traj.clone();
            for l in t2.lam.iter_mut() {
                l[0] = 0.0;
            }
            linearize(&ocp, &t2, &Parallelism::serial()).unwrap()
        };
        // q gains A' lam - lam = (0.9 - 1) * 0.7, r gains B' lam = 0.5 * 0.7.
        assert_abs_diff_eq!(qp.q[1][0] - bare.q[1][0], -0.07, epsilon = 1e-12);
        assert_abs_diff_eq!(qp.r[1][0] - bare.r[1][0], 0.35, epsilon = 1e-12);
        assert_abs_diff_eq!(qp.p_term[0] - bare.p_term[0], -0.7, epsilon = 1e-12);
    }
}
