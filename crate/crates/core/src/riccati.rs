//! Sequential LQR backend: backward Riccati recursion, affine forward
//! rollout, and the dual update. O(N) sequential depth; this is the ground
//! truth the scan backend is validated against.

#![allow(non_snake_case)]

use nalgebra::{DMatrix, DVector};

use crate::qp::{Direction, Policy, QpData};
use crate::{Error, Result};

/// Backward recursion over nodes N..=0:
///
///   G = R + B' P+ B          (factored, must be PD)
///   H = S + B' P+ A
///   h = B' (p+ + P+ b) + r
///   K = -G^{-1} H,  k = -G^{-1} h
///   P = Q + A' P+ A + K' H
///   p = q + A' (p+ + P+ b) + K' h
///
/// `rho` is a Levenberg-style shift added to every R block; pass 0.0 for the
/// plain recursion. A failed factorization reports the offending node so the
/// caller can retry with a larger shift.
pub fn riccati_backward(qp: &QpData, rho: f64) -> Result<Policy> {
    let N = qp.horizon();
    let m = qp.control_dim();
    let mut P = vec![DMatrix::zeros(0, 0); N + 2];
    let mut p = vec![DVector::zeros(0); N + 2];
    let mut K = vec![DMatrix::zeros(0, 0); N + 1];
    let mut k = vec![DVector::zeros(0); N + 1];
    P[N + 1] = qp.P_term.clone();
    p[N + 1] = qp.p_term.clone();

    for i in (0..=N).rev() {
        let (Ki, ki, Pi, pi) = backward_step(
            &qp.A[i], &qp.B[i], &qp.b[i], &qp.Q[i], &qp.S[i], &qp.R[i], &qp.q[i], &qp.r[i],
            &P[i + 1], &p[i + 1], rho, m, i,
        )?;
        K[i] = Ki;
        k[i] = ki;
        P[i] = Pi;
        p[i] = pi;
    }
    Ok(Policy { K, k, P, p })
}

/// One Riccati step. Split out so the scan backend can reuse it to recover
/// the gains from scanned value functions.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward_step(
    A: &DMatrix<f64>,
    B: &DMatrix<f64>,
    b: &DVector<f64>,
    Q: &DMatrix<f64>,
    S: &DMatrix<f64>,
    R: &DMatrix<f64>,
    q: &DVector<f64>,
    r: &DVector<f64>,
    P_next: &DMatrix<f64>,
    p_next: &DVector<f64>,
    rho: f64,
    m: usize,
    node: usize,
) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>)> {
    let PB = P_next * B;
    let mut G = R + B.transpose() * &PB;
    for d in 0..m {
        G[(d, d)] += rho;
    }
    let H = S + B.transpose() * P_next * A;
    let pPb = p_next + P_next * b;
    let h = B.transpose() * &pPb + r;

    let chol = G.clone().cholesky().ok_or(Error::Factorization {
        node,
        what: "G = R + B'PB",
    })?;
    let K = -chol.solve(&H);
    let k = -chol.solve(&h);

    let mut P = Q + A.transpose() * P_next * A + K.transpose() * &H;
    symmetrize(&mut P);
    let p = q + A.transpose() * &pPb + K.transpose() * &h;
    Ok((K, k, P, p))
}

pub(crate) fn symmetrize(mat: &mut DMatrix<f64>) {
    let t = mat.transpose();
    *mat += t;
    *mat *= 0.5;
}

/// Roll the affine policy forward from dx0: du = K dx + k, dx+ = A dx + B du + b.
/// Returns (dx over 0..=N+1, du over 0..=N).
pub fn forward_rollout(qp: &QpData, pol: &Policy) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let N = qp.horizon();
    let mut dx = Vec::with_capacity(N + 2);
    let mut du = Vec::with_capacity(N + 1);
    dx.push(qp.dx0.clone());
    for i in 0..=N {
        let ui = &pol.K[i] * &dx[i] + &pol.k[i];
        dx.push(&qp.A[i] * &dx[i] + &qp.B[i] * &ui + &qp.b[i]);
        du.push(ui);
    }
    (dx, du)
}

/// dlam_i = P_i dx_i + p_i for every node including the initial one; the
/// i = 0 value is the multiplier of the initial-state constraint.
pub fn dual_update(pol: &Policy, dx: &[DVector<f64>]) -> Vec<DVector<f64>> {
    pol.P
        .iter()
        .zip(&pol.p)
        .zip(dx)
        .map(|((P, p), x)| P * x + p)
        .collect()
}

/// Full sequential solve: backward recursion, rollout, dual update.
pub fn solve_qp_sequential(qp: &QpData, rho: f64) -> Result<Direction> {
    let pol = riccati_backward(qp, rho)?;
    let (dx, du) = forward_rollout(qp, &pol);
    let dlam = dual_update(&pol, &dx);
    Ok(Direction { dx, du, dlam })
}
