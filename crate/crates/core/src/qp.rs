//! The equality-constrained QP subproblem shared by all backends.
//!
//! Node i in 0..=N carries dynamics `dx_{i+1} = A_i dx_i + B_i du_i + b_i`
//! and cost blocks (Q_i, S_i, R_i, q_i, r_i); the terminal node N+1 carries
//! only (P_term, p_term). `dx0` is the residual between the measured initial
//! state and the current iterate's first state.

#![allow(non_snake_case)]

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpData {
    pub A: Vec<DMatrix<f64>>,
    pub B: Vec<DMatrix<f64>>,
    pub b: Vec<DVector<f64>>,
    pub Q: Vec<DMatrix<f64>>,
    pub S: Vec<DMatrix<f64>>,
    pub R: Vec<DMatrix<f64>>,
    pub q: Vec<DVector<f64>>,
    pub r: Vec<DVector<f64>>,
    pub P_term: DMatrix<f64>,
    pub p_term: DVector<f64>,
    pub dx0: DVector<f64>,
}

impl QpData {
    /// Number of control intervals N; stage nodes are 0..=N.
    pub fn horizon(&self) -> usize {
        self.A.len() - 1
    }

    pub fn state_dim(&self) -> usize {
        self.dx0.len()
    }

    pub fn control_dim(&self) -> usize {
        self.R.first().map_or(0, |r| r.nrows())
    }

    /// All-zero QP with the given dimensions, for building instances field by field.
    pub fn zeros(n: usize, m: usize, horizon: usize) -> Self {
        let nodes = horizon + 1;
        QpData {
            A: vec![DMatrix::zeros(n, n); nodes],
            B: vec![DMatrix::zeros(n, m); nodes],
            b: vec![DVector::zeros(n); nodes],
            Q: vec![DMatrix::zeros(n, n); nodes],
            S: vec![DMatrix::zeros(m, n); nodes],
            R: vec![DMatrix::zeros(m, m); nodes],
            q: vec![DVector::zeros(n); nodes],
            r: vec![DVector::zeros(m); nodes],
            P_term: DMatrix::zeros(n, n),
            p_term: DVector::zeros(n),
            dx0: DVector::zeros(n),
        }
    }

    /// Shape and symmetry checks. Cost blocks must be symmetric; PSD-ness is
    /// the caller's responsibility (the backends report it via factorization
    /// errors instead of an O(n^3) eigencheck here).
    pub fn validate(&self) -> Result<()> {
        let n = self.state_dim();
        let m = self.control_dim();
        let nodes = self.A.len();
        if nodes == 0 {
            return Err(Error::Empty { context: "qp nodes" });
        }
        let lens = [
            self.B.len(),
            self.b.len(),
            self.Q.len(),
            self.S.len(),
            self.R.len(),
            self.q.len(),
            self.r.len(),
        ];
        if lens.iter().any(|&l| l != nodes) {
            return Err(Error::Dimension(format!(
                "per-node sequences disagree on node count (A has {nodes})"
            )));
        }
        for i in 0..nodes {
            let shapes_ok = self.A[i].shape() == (n, n)
                && self.B[i].shape() == (n, m)
                && self.b[i].len() == n
                && self.Q[i].shape() == (n, n)
                && self.S[i].shape() == (m, n)
                && self.R[i].shape() == (m, m)
                && self.q[i].len() == n
                && self.r[i].len() == m;
            if !shapes_ok {
                return Err(Error::Dimension(format!("node {i} block shapes")));
            }
            if !is_symmetric(&self.Q[i]) || !is_symmetric(&self.R[i]) {
                return Err(Error::Dimension(format!("node {i} cost block not symmetric")));
            }
        }
        if self.P_term.shape() != (n, n) || self.p_term.len() != n || self.dx0.len() != n {
            return Err(Error::Dimension("terminal block shapes".into()));
        }
        if !is_symmetric(&self.P_term) {
            return Err(Error::Dimension("terminal cost block not symmetric".into()));
        }
        Ok(())
    }
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = 1.0 + m.amax();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * scale {
                return false;
            }
        }
    }
    true
}

/// Affine feedback policy plus the value-function pieces behind it.
/// K, k cover nodes 0..=N; P, p cover 0..=N+1.
#[derive(Debug, Clone)]
pub struct Policy {
    pub K: Vec<DMatrix<f64>>,
    pub k: Vec<DVector<f64>>,
    pub P: Vec<DMatrix<f64>>,
    pub p: Vec<DVector<f64>>,
}

/// Primal-dual search direction. dx and dlam cover 0..=N+1, du covers 0..=N.
#[derive(Debug, Clone)]
pub struct Direction {
    pub dx: Vec<DVector<f64>>,
    pub du: Vec<DVector<f64>>,
    pub dlam: Vec<DVector<f64>>,
}

impl Direction {
    /// Infinity norm over the primal part (dx, du).
    pub fn primal_inf_norm(&self) -> f64 {
        let mut acc: f64 = 0.0;
        for v in self.dx.iter().chain(self.du.iter()) {
            acc = acc.max(v.amax());
        }
        acc
    }

    /// Largest relative deviation against a reference direction,
    /// max |a - b| / (1 + max |b|) over all three sequences.
    pub fn rel_deviation(&self, other: &Direction) -> f64 {
        fn seq_dev(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
            let scale = 1.0 + b.iter().map(|v| v.amax()).fold(0.0, f64::max);
            let diff = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).amax())
                .fold(0.0, f64::max);
            diff / scale
        }
        seq_dev(&self.dx, &other.dx)
            .max(seq_dev(&self.du, &other.du))
            .max(seq_dev(&self.dlam, &other.dlam))
    }
}
