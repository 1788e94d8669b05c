//! Scan-parallel LQR backend.
//!
//! The backward pass is recast as a reverse inclusive scan over conditional
//! value-function elements. An element (A, b, C, P, p) stands for the
//! two-point function
//!
//!   V(x, z) = 1/2 x'Px + p'x + 1/2 (z - Ax - b)' C^{-1} (z - Ax - b),
//!
//! i.e. cost-to-go P, p accumulated on the entry state plus a soft coupling
//! of the exit state z to the affine image Ax + b, weighted by the control
//! authority C (C = 0 pins z exactly). Combining two adjacent elements
//! minimizes out the shared intermediate state, which stays associative, so
//! the whole backward sweep collapses to a scan. A sentinel element with
//! A = 0, C = 0 carries the terminal cost and pins the chain's end.
//!
//! The forward pass scans affine maps (A, b): after the gains are known the
//! closed-loop update dx+ = (A + BK) dx + (Bk + b) composes associatively,
//! and seeding node 0 with (0, closed-loop image of dx0) turns every prefix
//! into a constant holding dx_{i+1}.

#![allow(non_snake_case)]

use nalgebra::{DMatrix, DVector};

use crate::exec::Parallelism;
use crate::qp::{Direction, Policy, QpData};
use crate::riccati;
use crate::scan::{ScanDirection, ScanMode, ScanPlan};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ValueElement {
    pub A: DMatrix<f64>,
    pub b: DVector<f64>,
    pub C: DMatrix<f64>,
    pub P: DMatrix<f64>,
    pub p: DVector<f64>,
}

impl ValueElement {
    /// Zero-cost pass-through segment; exact two-sided identity of
    /// `combine_value`.
    pub fn identity(n: usize) -> Self {
        ValueElement {
            A: DMatrix::identity(n, n),
            b: DVector::zeros(n),
            C: DMatrix::zeros(n, n),
            P: DMatrix::zeros(n, n),
            p: DVector::zeros(n),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.A.iter().all(|v| v.is_finite())
            && self.b.iter().all(|v| v.is_finite())
            && self.C.iter().all(|v| v.is_finite())
            && self.P.iter().all(|v| v.is_finite())
            && self.p.iter().all(|v| v.is_finite())
    }
}

/// Solve M x = rhs, poisoning the result with NaN if M is singular. The scan
/// operator itself stays infallible; `backward_scan` rejects non-finite
/// output afterwards. For PSD C and P the system I + CP is provably
/// invertible, so this only trips on malformed input.
fn solve_or_nan(m: DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = rhs.shape();
    m.lu()
        .solve(rhs)
        .unwrap_or_else(|| DMatrix::from_element(rows, cols, f64::NAN))
}

/// Combine two adjacent segments, `first` covering the earlier time range.
/// Minimizing out the shared state yields, with D = (I + C1 P2)^{-1} and
/// E = (I + P2 C1)^{-1}:
///
///   A = A2 D A1                      C = A2 D C1 A2' + C2
///   b = A2 D (b1 - C1 p2) + b2
///   P = A1' E P2 A1 + P1             p = A1' E (p2 + P2 b1) + p1
pub fn combine_value(first: &ValueElement, second: &ValueElement) -> ValueElement {
    let n = first.A.nrows();
    let eye = DMatrix::<f64>::identity(n, n);

    let d_sys = &eye + &first.C * &second.P;
    let e_sys = &eye + &second.P * &first.C;

    let DA1 = solve_or_nan(d_sys.clone(), &first.A);
    let Db = solve_or_nan(
        d_sys.clone(),
        &DMatrix::from_column_slice(n, 1, (&first.b - &first.C * &second.p).as_slice()),
    );
    let DC1 = solve_or_nan(d_sys, &first.C);
    let EP2 = solve_or_nan(e_sys.clone(), &second.P);
    let Ev = solve_or_nan(
        e_sys,
        &DMatrix::from_column_slice(n, 1, (&second.p + &second.P * &first.b).as_slice()),
    );

    let A = &second.A * &DA1;
    let b = &second.A * DVector::from_column_slice(Db.as_slice()) + &second.b;
    let mut C = &second.A * DC1 * second.A.transpose() + &second.C;
    let mut P = first.A.transpose() * EP2 * &first.A + &first.P;
    let p = first.A.transpose() * DVector::from_column_slice(Ev.as_slice()) + &first.p;
    riccati::symmetrize(&mut C);
    riccati::symmetrize(&mut P);
    ValueElement { A, b, C, P, p }
}

/// One element per stage node (control eliminated through R^{-1}, shifted by
/// `rho`), plus the terminal sentinel. Length is horizon + 2.
pub fn init_value_elements(qp: &QpData, rho: f64) -> Result<Vec<ValueElement>> {
    let N = qp.horizon();
    let n = qp.state_dim();
    let m = qp.control_dim();
    let mut elems = Vec::with_capacity(N + 2);
    for i in 0..=N {
        let mut R = qp.R[i].clone();
        for d in 0..m {
            R[(d, d)] += rho;
        }
        let chol = R.cholesky().ok_or(Error::Factorization { node: i, what: "R" })?;
        let RiS = chol.solve(&qp.S[i]);
        let RiBt = chol.solve(&qp.B[i].transpose());
        let Rir = chol.solve(&qp.r[i]);

        let A = &qp.A[i] - &qp.B[i] * &RiS;
        let mut C = &qp.B[i] * RiBt;
        let mut P = &qp.Q[i] - qp.S[i].transpose() * &RiS;
        let p = &qp.q[i] - qp.S[i].transpose() * &Rir;
        let b = &qp.b[i] - &qp.B[i] * Rir;
        riccati::symmetrize(&mut C);
        riccati::symmetrize(&mut P);
        elems.push(ValueElement { A, b, C, P, p });
    }
    elems.push(ValueElement {
        A: DMatrix::zeros(n, n),
        b: DVector::zeros(n),
        C: DMatrix::zeros(n, n),
        P: qp.P_term.clone(),
        p: qp.p_term.clone(),
    });
    Ok(elems)
}

/// Backward pass via reverse scan. Output element i carries (P_i, p_i);
/// gains are then recovered per node, which parallelizes trivially.
/// Returns the policy and the scan's stage depth.
pub fn backward_scan(
    qp: &QpData,
    rho: f64,
    mode: ScanMode,
    par: &Parallelism,
) -> Result<(Policy, usize)> {
    let N = qp.horizon();
    let n = qp.state_dim();
    let m = qp.control_dim();
    let elems = init_value_elements(qp, rho)?;
    let mut plan = ScanPlan::new(ScanDirection::Reverse, mode);
    let scanned = plan.inclusive_scan(&elems, &ValueElement::identity(n), combine_value, par);
    if scanned.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite { context: "value scan" });
    }

    let P: Vec<DMatrix<f64>> = scanned.iter().map(|e| e.P.clone()).collect();
    let p: Vec<DVector<f64>> = scanned.iter().map(|e| e.p.clone()).collect();

    let gains = par.map_indexed(N + 1, |i| {
        riccati::backward_step(
            &qp.A[i], &qp.B[i], &qp.b[i], &qp.Q[i], &qp.S[i], &qp.R[i], &qp.q[i], &qp.r[i],
            &P[i + 1], &p[i + 1], rho, m, i,
        )
        .map(|(K, k, _, _)| (K, k))
    });
    let mut K = Vec::with_capacity(N + 1);
    let mut k = Vec::with_capacity(N + 1);
    for g in gains {
        let (Ki, ki) = g?;
        K.push(Ki);
        k.push(ki);
    }
    Ok((Policy { K, k, P, p }, plan.depth_counter))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajElement {
    pub A: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl TrajElement {
    pub fn identity(n: usize) -> Self {
        TrajElement { A: DMatrix::identity(n, n), b: DVector::zeros(n) }
    }
}

/// Composition of affine maps, `first` applied first: x -> A2 (A1 x + b1) + b2.
pub fn combine_traj(first: &TrajElement, second: &TrajElement) -> TrajElement {
    TrajElement {
        A: &second.A * &first.A,
        b: &second.A * &first.b + &second.b,
    }
}

/// Closed-loop affine maps; element 0 absorbs the initial residual so every
/// forward prefix is the constant map onto dx_{i+1}.
pub fn init_traj_elements(qp: &QpData, pol: &Policy) -> Vec<TrajElement> {
    let N = qp.horizon();
    let n = qp.state_dim();
    (0..=N)
        .map(|i| {
            let A_cl = &qp.A[i] + &qp.B[i] * &pol.K[i];
            let b_cl = &qp.B[i] * &pol.k[i] + &qp.b[i];
            if i == 0 {
                TrajElement { A: DMatrix::zeros(n, n), b: &A_cl * &qp.dx0 + b_cl }
            } else {
                TrajElement { A: A_cl, b: b_cl }
            }
        })
        .collect()
}

/// Forward pass via scan; returns (dx over 0..=N+1, du over 0..=N, depth).
pub fn forward_scan(
    qp: &QpData,
    pol: &Policy,
    mode: ScanMode,
    par: &Parallelism,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>, usize) {
    let N = qp.horizon();
    let n = qp.state_dim();
    let elems = init_traj_elements(qp, pol);
    let mut plan = ScanPlan::new(ScanDirection::Forward, mode);
    let scanned = plan.inclusive_scan(&elems, &TrajElement::identity(n), combine_traj, par);

    let mut dx = Vec::with_capacity(N + 2);
    dx.push(qp.dx0.clone());
    dx.extend(scanned.into_iter().map(|e| e.b));
    let du = par.map_indexed(N + 1, |i| &pol.K[i] * &dx[i] + &pol.k[i]);
    (dx, du, plan.depth_counter)
}

pub struct ScanSolve {
    pub dir: Direction,
    pub backward_depth: usize,
    pub forward_depth: usize,
}

/// Full scan-backend solve; the dual update is shared with the sequential
/// backend since it is already node-parallel.
pub fn solve_qp_scan(
    qp: &QpData,
    rho: f64,
    mode: ScanMode,
    par: &Parallelism,
) -> Result<ScanSolve> {
    let (pol, backward_depth) = backward_scan(qp, rho, mode, par)?;
    let (dx, du, forward_depth) = forward_scan(qp, &pol, mode, par);
    let dlam = riccati::dual_update(&pol, &dx);
    Ok(ScanSolve { dir: Direction { dx, du, dlam }, backward_depth, forward_depth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::solve_qp_sequential;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn elem_dev(a: &ValueElement, b: &ValueElement) -> f64 {
        let pairs: [(f64, f64); 5] = [
            ((&a.A - &b.A).amax(), b.A.amax()),
            ((&a.b - &b.b).amax(), b.b.amax()),
            ((&a.C - &b.C).amax(), b.C.amax()),
            ((&a.P - &b.P).amax(), b.P.amax()),
            ((&a.p - &b.p).amax(), b.p.amax()),
        ];
        pairs.iter().map(|(d, s)| d / (1.0 + s)).fold(0.0, f64::max)
    }

    fn random_element<R: rand::Rng>(n: usize, rng: &mut R) -> ValueElement {
        let l1 = crate::synth::random_matrix(n, n, rng);
        let l2 = crate::synth::random_matrix(n, n, rng);
        ValueElement {
            A: crate::synth::random_matrix(n, n, rng),
            b: crate::synth::random_vector(n, rng),
            C: (&l1 * l1.transpose()) / n as f64,
            P: (&l2 * l2.transpose()) / n as f64,
            p: crate::synth::random_vector(n, rng),
        }
    }

    /// Scalar LQR stage with A=B=Q=R=1, S=q=r=b=0 eliminates to the unit
    /// element (A=1, P=1, C=1, p=0, b=0).
    #[test]
    fn scalar_stage_element() {
        let mut qp = QpData::zeros(1, 1, 0);
        qp.A[0][(0, 0)] = 1.0;
        qp.B[0][(0, 0)] = 1.0;
        qp.Q[0][(0, 0)] = 1.0;
        qp.R[0][(0, 0)] = 1.0;
        qp.P_term[(0, 0)] = 1.0;
        let elems = init_value_elements(&qp, 0.0).unwrap();
        assert_eq!(elems.len(), 2);
        assert_abs_diff_eq!(elems[0].A[(0, 0)], 1.0);
        assert_abs_diff_eq!(elems[0].P[(0, 0)], 1.0);
        assert_abs_diff_eq!(elems[0].C[(0, 0)], 1.0);
        assert_abs_diff_eq!(elems[0].p[0], 0.0);
        assert_abs_diff_eq!(elems[0].b[0], 0.0);
        // Terminal sentinel pins the chain end and carries the terminal cost.
        assert_abs_diff_eq!(elems[1].A[(0, 0)], 0.0);
        assert_abs_diff_eq!(elems[1].P[(0, 0)], 1.0);

        // One combine reproduces the hand Riccati step: P_0 = 1.5.
        let v = combine_value(&elems[0], &elems[1]);
        assert_abs_diff_eq!(v.P[(0, 0)], 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v.p[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn control_free_chain_accumulates() {
        // C = 0 on both sides reduces the combine to pure cost transport:
        // P = A1'Q2 A1 + Q1, p = A1'(q2 + Q2 b1) + q1, b = A2 b1 + b2.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 3;
        let mut e1 = random_element(n, &mut rng);
        let mut e2 = random_element(n, &mut rng);
        e1.C.fill(0.0);
        e2.C.fill(0.0);
        let c = combine_value(&e1, &e2);
        let P_want = e1.A.transpose() * &e2.P * &e1.A + &e1.P;
        let p_want = e1.A.transpose() * (&e2.p + &e2.P * &e1.b) + &e1.p;
        let b_want = &e2.A * &e1.b + &e2.b;
        assert!((&c.P - P_want).amax() <= 1e-12);
        assert!((&c.p - p_want).amax() <= 1e-12);
        assert!((&c.b - b_want).amax() <= 1e-12);
        assert!(c.C.amax() <= 1e-15);
    }

    #[test]
    fn identity_is_two_sided() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let e = random_element(4, &mut rng);
            let id = ValueElement::identity(4);
            assert!(elem_dev(&combine_value(&e, &id), &e) <= 1e-12);
            assert!(elem_dev(&combine_value(&id, &e), &e) <= 1e-12);
        }
    }

    #[test]
    fn combine_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let e1 = random_element(3, &mut rng);
            let e2 = random_element(3, &mut rng);
            let e3 = random_element(3, &mut rng);
            let left = combine_value(&combine_value(&e1, &e2), &e3);
            let right = combine_value(&e1, &combine_value(&e2, &e3));
            assert!(elem_dev(&left, &right) <= 1e-10);
        }
    }

    #[test]
    fn matches_sequential_riccati() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let par = Parallelism::serial();
        for &(n, m, h) in &[(1usize, 1usize, 0usize), (2, 1, 5), (4, 2, 13), (3, 3, 32)] {
            let qp = crate::synth::random_qp(n, m, h, &mut rng);
            let seq = solve_qp_sequential(&qp, 0.0).unwrap();
            for mode in [ScanMode::Sequential, ScanMode::Tree] {
                let scan = solve_qp_scan(&qp, 0.0, mode, &par).unwrap();
                let dev = scan.dir.rel_deviation(&seq);
                assert!(dev <= 1e-9, "n={n} m={m} h={h} {mode:?}: dev {dev:.3e}");
            }
        }
    }

    #[test]
    fn value_scan_depth_matches_tree_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let qp = crate::synth::random_qp(2, 1, 14, &mut rng); // 16 elements
        let par = Parallelism::serial();
        let (_, depth) = backward_scan(&qp, 0.0, ScanMode::Tree, &par).unwrap();
        assert_eq!(depth, crate::scan::expected_tree_depth(16));
    }

    #[test]
    fn traj_elements_compose_like_rollout() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let qp = crate::synth::random_qp(3, 2, 9, &mut rng);
        let pol = crate::riccati::riccati_backward(&qp, 0.0).unwrap();
        let (dx_ref, du_ref) = crate::riccati::forward_rollout(&qp, &pol);
        let par = Parallelism::new(2);
        let (dx, du, _) = forward_scan(&qp, &pol, ScanMode::Tree, &par);
        for (a, b) in dx.iter().zip(&dx_ref) {
            assert!((a - b).amax() <= 1e-10);
        }
        for (a, b) in du.iter().zip(&du_ref) {
            assert!((a - b).amax() <= 1e-10);
        }
    }

    #[test]
    fn scalar_traj_combine() {
        let e1 = TrajElement { A: DMatrix::from_element(1, 1, 2.0), b: DVector::from_element(1, 3.0) };
        let e2 = TrajElement { A: DMatrix::from_element(1, 1, 5.0), b: DVector::from_element(1, 7.0) };
        let c = combine_traj(&e1, &e2);
        assert_abs_diff_eq!(c.A[(0, 0)], 10.0);
        assert_abs_diff_eq!(c.b[0], 22.0);
        let id = TrajElement::identity(1);
        assert_eq!(combine_traj(&e1, &id), e1);
        assert_eq!(combine_traj(&id, &e1), e1);
    }
}
