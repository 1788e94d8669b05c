//! Torque-limited pendulum swing-up. State (theta, omega) with theta = 0
//! hanging down; the swing-up goal is theta = pi. Torque bounds enter as a
//! pair of relaxed-barrier constraints, so the model exercises both the
//! nonlinear dynamics path (RK4) and the inequality path.

use nalgebra::{DMatrix, DVector};

use crate::barrier::Barrier;
use crate::models::rk4::{rk4_jacobians, rk4_step, ContinuousDynamics};
use crate::ocp::{BarrierEval, Ocp, Residual};

pub struct PendulumOcp {
    horizon: usize,
    dt: f64,
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
    pub u_max: f64,
    pub goal: f64,
    x0: DVector<f64>,
    w_theta: f64,
    w_omega: f64,
    w_u: f64,
    w_term: f64,
    barrier: Barrier,
}

struct PendulumDynamics<'a>(&'a PendulumOcp);

impl ContinuousDynamics for PendulumDynamics<'_> {
    fn state_dim(&self) -> usize {
        2
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn f(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let p = self.0;
        let acc = -(p.gravity / p.length) * x[0].sin() + u[0] / (p.mass * p.length * p.length);
        DVector::from_vec(vec![x[1], acc])
    }
    fn jac(&self, x: &DVector<f64>, _u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let p = self.0;
        (
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -(p.gravity / p.length) * x[0].cos(), 0.0]),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0 / (p.mass * p.length * p.length)]),
        )
    }
}

impl PendulumOcp {
    pub fn swing_up(horizon: usize, dt: f64, u_max: f64) -> Self {
        PendulumOcp {
            horizon,
            dt,
            mass: 1.0,
            length: 1.0,
            gravity: 9.81,
            u_max,
            goal: std::f64::consts::PI,
            x0: DVector::zeros(2),
            w_theta: 1.0,
            w_omega: 0.1,
            w_u: 0.05,
            w_term: 1000.0,
            // Strong enough that the swing-up solution stays interior
            // instead of buying torque through the relaxation zone.
            barrier: Barrier::new(1.0, 0.1 * u_max),
        }
    }

    /// Goal at the hanging equilibrium; the optimal control is identically
    /// zero, which pins the solver's fixed-point behavior.
    pub fn stay_down(horizon: usize, dt: f64, u_max: f64) -> Self {
        let mut p = Self::swing_up(horizon, dt, u_max);
        p.goal = 0.0;
        p
    }
}

impl Ocp for PendulumOcp {
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn initial_state(&self) -> DVector<f64> {
        self.x0.clone()
    }

    fn dynamics(&self, _i: usize, x: &DVector<f64>, u: &DVector<f64>) -> crate::Result<DVector<f64>> {
        Ok(rk4_step(&PendulumDynamics(self), x, u, self.dt))
    }

    fn dynamics_jac(
        &self,
        _i: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> crate::Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok(rk4_jacobians(&PendulumDynamics(self), x, u, self.dt))
    }

    fn stage_residual(&self, _i: usize, x: &DVector<f64>, u: &DVector<f64>) -> Residual {
        Residual {
            val: DVector::from_vec(vec![x[0] - self.goal, x[1], u[0]]),
            jx: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            ju: DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]),
            w: DVector::from_vec(vec![self.w_theta, self.w_omega, self.w_u]),
        }
    }

    fn terminal_residual(&self, x: &DVector<f64>) -> Residual {
        Residual {
            val: DVector::from_vec(vec![x[0] - self.goal, x[1]]),
            jx: DMatrix::identity(2, 2),
            ju: DMatrix::zeros(2, 1),
            w: DVector::from_element(2, self.w_term),
        }
    }

    fn stage_barriers(&self, _i: usize, _x: &DVector<f64>, u: &DVector<f64>) -> Vec<BarrierEval> {
        vec![
            BarrierEval {
                xi: self.u_max - u[0],
                dx: DVector::zeros(2),
                du: DVector::from_element(1, -1.0),
                barrier: self.barrier,
            },
            BarrierEval {
                xi: self.u_max + u[0],
                dx: DVector::zeros(2),
                du: DVector::from_element(1, 1.0),
                barrier: self.barrier,
            },
        ]
    }
}
