//! Dense KKT reference solver. Assembles the full first-order optimality
//! system of the QP in one symmetric indefinite matrix and solves it with
//! pivoted LU. Deliberately simple and allocation-heavy: this is the oracle
//! the structured backends are checked against, not a production path.
//!
//! Variable layout: z = (dx_0..dx_{N+1}, du_0..du_N, lam_0..lam_{N+1}) with
//! lam_0 paired to the initial-state constraint dx0 - dx_0 = 0 and lam_{i+1}
//! to the dynamics row A_i dx_i + B_i du_i + b_i - dx_{i+1} = 0.

#![allow(non_snake_case)]

use nalgebra::{DMatrix, DVector};

use crate::qp::{Direction, QpData};
use crate::{Error, Result};

/// Hard cap on the assembled system size; past this the dense oracle is no
/// longer a sensible tool and the caller should rely on the backends.
pub const MAX_KKT_DIM: usize = 20_000;

#[derive(Debug, Clone)]
pub struct KktSolution {
    pub dir: Direction,
    /// Infinity norm of M z - rhs at the returned solution.
    pub residual: f64,
}

pub fn solve_kkt_dense(qp: &QpData) -> Result<KktSolution> {
    qp.validate()?;
    let N = qp.horizon();
    let n = qp.state_dim();
    let m = qp.control_dim();
    let nx = (N + 2) * n;
    let nu = (N + 1) * m;
    let dim = 2 * nx + nu;
    if dim > MAX_KKT_DIM {
        return Err(Error::KktTooLarge { dim, limit: MAX_KKT_DIM });
    }

    let x_of = |i: usize| i * n;
    let u_of = |i: usize| nx + i * m;
    let l_of = |i: usize| nx + nu + i * n;

    let mut M = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);

    for i in 0..=N {
        // Stationarity in dx_i.
        set_block(&mut M, x_of(i), x_of(i), &qp.Q[i]);
        set_block(&mut M, x_of(i), u_of(i), &qp.S[i].transpose());
        add_neg_identity(&mut M, x_of(i), l_of(i), n);
        set_block(&mut M, x_of(i), l_of(i + 1), &qp.A[i].transpose());
        rhs.rows_mut(x_of(i), n).copy_from(&(-&qp.q[i]));

        // Stationarity in du_i.
        set_block(&mut M, u_of(i), x_of(i), &qp.S[i]);
        set_block(&mut M, u_of(i), u_of(i), &qp.R[i]);
        set_block(&mut M, u_of(i), l_of(i + 1), &qp.B[i].transpose());
        rhs.rows_mut(u_of(i), m).copy_from(&(-&qp.r[i]));

        // Dynamics row for lam_{i+1}.
        set_block(&mut M, l_of(i + 1), x_of(i), &qp.A[i]);
        set_block(&mut M, l_of(i + 1), u_of(i), &qp.B[i]);
        add_neg_identity(&mut M, l_of(i + 1), x_of(i + 1), n);
        rhs.rows_mut(l_of(i + 1), n).copy_from(&(-&qp.b[i]));
    }

    // Terminal stationarity and the initial-state row for lam_0.
    set_block(&mut M, x_of(N + 1), x_of(N + 1), &qp.P_term);
    add_neg_identity(&mut M, x_of(N + 1), l_of(N + 1), n);
    rhs.rows_mut(x_of(N + 1), n).copy_from(&(-&qp.p_term));
    add_neg_identity(&mut M, l_of(0), x_of(0), n);
    rhs.rows_mut(l_of(0), n).copy_from(&(-&qp.dx0));

    debug_assert!((&M - M.transpose()).amax() == 0.0, "KKT matrix must be symmetric");

    let lu = M.clone().lu();
    let z = lu.solve(&rhs).ok_or(Error::Singular { context: "dense KKT" })?;
    let residual = (&M * &z - &rhs).amax();

    let take = |off: usize, len: usize| z.rows(off, len).into_owned();
    let dir = Direction {
        dx: (0..=N + 1).map(|i| take(x_of(i), n)).collect(),
        du: (0..=N).map(|i| take(u_of(i), m)).collect(),
        dlam: (0..=N + 1).map(|i| take(l_of(i), n)).collect(),
    };
    Ok(KktSolution { dir, residual })
}

fn set_block(M: &mut DMatrix<f64>, row: usize, col: usize, block: &DMatrix<f64>) {
    M.view_mut((row, col), block.shape()).copy_from(block);
}

fn add_neg_identity(M: &mut DMatrix<f64>, row: usize, col: usize, n: usize) {
    for d in 0..n {
        M[(row + d, col + d)] = -1.0;
    }
}
