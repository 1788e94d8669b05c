//! Random, well-conditioned QP instances for cross-backend verification and
//! benchmarks. Dynamics are contractive and cost blocks are built PSD by
//! construction, so every backend should succeed without regularization.

#![allow(non_snake_case)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::qp::QpData;

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| 2.0 * rng.gen::<f64>() - 1.0)
}

pub fn random_vector<R: Rng>(len: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(len, |_, _| 2.0 * rng.gen::<f64>() - 1.0)
}

/// Contractive random matrix: Frobenius norm bounds the spectral norm, so
/// scaling by it keeps every eigenvalue inside the unit disk.
fn random_contractive<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut a = random_matrix(n, n, rng);
    let fro = a.norm();
    if fro > 0.0 {
        a *= 0.95 / fro.max(0.95);
    }
    a
}

/// Joint PSD cost block over (x, u), split into (Q, S, R). The Schur-style
/// construction L L' / (n+m) plus diagonal margins keeps R safely PD and the
/// whole block PSD, which the Gauss-Newton convexity invariant relies on.
fn random_cost_block<R: Rng>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let l = random_matrix(n + m, n + m, rng);
    let joint = (&l * l.transpose()) / (n + m) as f64;
    let mut q = joint.view((0, 0), (n, n)).into_owned();
    let s = joint.view((n, 0), (m, n)).into_owned();
    let mut r = joint.view((n, n), (m, m)).into_owned();
    for d in 0..n {
        q[(d, d)] += 1e-3;
    }
    for d in 0..m {
        r[(d, d)] += 0.1;
    }
    (q, s, r)
}

pub fn random_qp<R: Rng>(n: usize, m: usize, horizon: usize, rng: &mut R) -> QpData {
    let mut qp = QpData::zeros(n, m, horizon);
    for i in 0..=horizon {
        qp.A[i] = random_contractive(n, rng);
        qp.B[i] = random_matrix(n, m, rng);
        qp.b[i] = random_vector(n, rng);
        let (q_blk, s_blk, r_blk) = random_cost_block(n, m, rng);
        qp.Q[i] = q_blk;
        qp.S[i] = s_blk;
        qp.R[i] = r_blk;
        qp.q[i] = random_vector(n, rng);
        qp.r[i] = random_vector(m, rng);
    }
    let l = random_matrix(n, n, rng);
    qp.P_term = (&l * l.transpose()) / n as f64;
    for d in 0..n {
        qp.P_term[(d, d)] += 1e-3;
    }
    qp.p_term = random_vector(n, rng);
    qp.dx0 = random_vector(n, rng);
    qp
}
