//! Classical fourth-order Runge-Kutta discretization with Jacobians
//! propagated through the stages by the forward-mode chain rule.

use nalgebra::{DMatrix, DVector};

pub trait ContinuousDynamics {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn f(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
    /// (df/dx, df/du) at the given point.
    fn jac(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>);
}

pub fn rk4_step(
    model: &dyn ContinuousDynamics,
    x: &DVector<f64>,
    u: &DVector<f64>,
    dt: f64,
) -> DVector<f64> {
    let k1 = model.f(x, u);
    let k2 = model.f(&(x + 0.5 * dt * &k1), u);
    let k3 = model.f(&(x + 0.5 * dt * &k2), u);
    let k4 = model.f(&(x + dt * &k3), u);
    x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Discrete Jacobians (A, B) of the RK4 map. Each stage's sensitivity is
/// chained through the previous one:
///   dk_{j}/dx = fx(x_j, u) (I + c_j dt dk_{j-1}/dx),
///   dk_{j}/du = fx(x_j, u) c_j dt dk_{j-1}/du + fu(x_j, u).
pub fn rk4_jacobians(
    model: &dyn ContinuousDynamics,
    x: &DVector<f64>,
    u: &DVector<f64>,
    dt: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = model.state_dim();
    let eye = DMatrix::<f64>::identity(n, n);

    let k1 = model.f(x, u);
    let x2 = x + 0.5 * dt * &k1;
    let k2 = model.f(&x2, u);
    let x3 = x + 0.5 * dt * &k2;
    let k3 = model.f(&x3, u);
    let x4 = x + dt * &k3;

    let (fx1, fu1) = model.jac(x, u);
    let (fx2, fu2) = model.jac(&x2, u);
    let (fx3, fu3) = model.jac(&x3, u);
    let (fx4, fu4) = model.jac(&x4, u);

    let dk1_dx = fx1;
    let dk2_dx = &fx2 * (&eye + 0.5 * dt * &dk1_dx);
    let dk3_dx = &fx3 * (&eye + 0.5 * dt * &dk2_dx);
    let dk4_dx = &fx4 * (&eye + dt * &dk3_dx);

    let dk1_du = fu1;
    let dk2_du = 0.5 * dt * &fx2 * &dk1_du + fu2;
    let dk3_du = 0.5 * dt * &fx3 * &dk2_du + fu3;
    let dk4_du = dt * &fx4 * &dk3_du + fu4;

    let a = &eye + (dt / 6.0) * (&dk1_dx + 2.0 * dk2_dx + 2.0 * dk3_dx + dk4_dx);
    let b = (dt / 6.0) * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du);
    (a, b)
}
