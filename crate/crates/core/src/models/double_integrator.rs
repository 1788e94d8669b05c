//! Point-mass double integrator, the linear-quadratic sanity model.
//! State (p, v) in d axes, control a: p+ = p + dt v, v+ = v + dt a.

use nalgebra::{DMatrix, DVector};

use crate::ocp::{Ocp, Residual};

pub struct DoubleIntegratorOcp {
    horizon: usize,
    dt: f64,
    x0: DVector<f64>,
    goal: DVector<f64>,
    a_mat: DMatrix<f64>,
    b_mat: DMatrix<f64>,
    w_stage: DVector<f64>,
    w_control: f64,
    w_term: f64,
}

impl DoubleIntegratorOcp {
    /// `x0` stacks positions then velocities; its length fixes the axis count.
    pub fn new(horizon: usize, dt: f64, x0: DVector<f64>, goal: DVector<f64>) -> Self {
        assert!(x0.len() % 2 == 0 && x0.len() == goal.len());
        let d = x0.len() / 2;
        let n = 2 * d;
        let mut a_mat = DMatrix::identity(n, n);
        let mut b_mat = DMatrix::zeros(n, d);
        for k in 0..d {
            a_mat[(k, d + k)] = dt;
            b_mat[(d + k, k)] = dt;
        }
        DoubleIntegratorOcp {
            horizon,
            dt,
            x0,
            goal,
            a_mat,
            b_mat,
            w_stage: DVector::from_element(n, 1.0),
            w_control: 0.1,
            w_term: 10.0,
        }
    }
}

impl Ocp for DoubleIntegratorOcp {
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn state_dim(&self) -> usize {
        self.x0.len()
    }
    fn control_dim(&self) -> usize {
        self.x0.len() / 2
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn initial_state(&self) -> DVector<f64> {
        self.x0.clone()
    }

    fn dynamics(&self, _i: usize, x: &DVector<f64>, u: &DVector<f64>) -> crate::Result<DVector<f64>> {
        Ok(&self.a_mat * x + &self.b_mat * u)
    }

    fn dynamics_jac(
        &self,
        _i: usize,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
    ) -> crate::Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok((self.a_mat.clone(), self.b_mat.clone()))
    }

    fn stage_residual(&self, _i: usize, x: &DVector<f64>, u: &DVector<f64>) -> Residual {
        let n = self.state_dim();
        let m = self.control_dim();
        let mut val = DVector::zeros(n + m);
        val.rows_mut(0, n).copy_from(&(x - &self.goal));
        val.rows_mut(n, m).copy_from(u);
        let mut jx = DMatrix::zeros(n + m, n);
        jx.view_mut((0, 0), (n, n)).fill_with_identity();
        let mut ju = DMatrix::zeros(n + m, m);
        ju.view_mut((n, 0), (m, m)).fill_with_identity();
        let mut w = DVector::zeros(n + m);
        w.rows_mut(0, n).copy_from(&self.w_stage);
        w.rows_mut(n, m).fill(self.w_control);
        Residual { val, jx, ju, w }
    }

    fn terminal_residual(&self, x: &DVector<f64>) -> Residual {
        let n = self.state_dim();
        Residual {
            val: x - &self.goal,
            jx: DMatrix::identity(n, n),
            ju: DMatrix::zeros(n, self.control_dim()),
            w: DVector::from_element(n, self.w_term),
        }
    }

    fn planar_position(&self) -> Option<(usize, usize)> {
        (self.state_dim() >= 4).then_some((0, 1))
    }
}
