//! Block-diagonal composition of independent OCPs into one joint problem,
//! optionally coupled by pairwise minimum-distance penalties.
//!
//! With no couplings the joint problem is separable: every backend solves it
//! to exactly the per-robot solutions (the QP blocks are block-diagonal, so
//! Riccati and scan recursions never mix robots). Couplings add off-diagonal
//! Gauss-Newton curvature only through the shared residual rows.

#![allow(non_snake_case)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::ocp::{BarrierEval, Ocp, Residual};
use crate::{Error, Result};

/// Soft minimum-distance constraint between the planar positions of two
/// component OCPs. The residual is softplus(d_min - dist) with sharpness k,
/// a smooth stand-in for max(0, d_min - dist): inactive (and exponentially
/// flat) when the pair is separated, quadratic-cost once they close in.
#[derive(Debug, Clone)]
pub struct Coupling {
    pub a: usize,
    pub b: usize,
    pub d_min: f64,
    pub weight: f64,
    pub sharpness: f64,
}

/// Numerically stable softplus ln(1 + exp(k z)) / k and its derivative
/// (the logistic sigmoid).
fn softplus(z: f64, k: f64) -> (f64, f64) {
    let kz = k * z;
    // exp underflows to 0 gracefully on the far-negative side.
    let val = if kz > 30.0 { z } else { kz.exp().ln_1p() / k };
    let sig = if kz >= 0.0 {
        1.0 / (1.0 + (-kz).exp())
    } else {
        let e = kz.exp();
        e / (1.0 + e)
    };
    (val, sig)
}

pub struct ComposedOcp {
    parts: Vec<Arc<dyn Ocp>>,
    couplings: Vec<Coupling>,
    x_off: Vec<usize>,
    u_off: Vec<usize>,
    n: usize,
    m: usize,
    horizon: usize,
    dt: f64,
}

/// Stack OCPs block-diagonally. All parts must share horizon and dt, and
/// any coupled part must expose a planar position.
pub fn compose_multi_robot(parts: Vec<Arc<dyn Ocp>>, couplings: Vec<Coupling>) -> Result<ComposedOcp> {
    if parts.is_empty() {
        return Err(Error::Empty { context: "composed OCP needs at least one part" });
    }
    let horizon = parts[0].horizon();
    let dt = parts[0].dt();
    let mut x_off = Vec::with_capacity(parts.len());
    let mut u_off = Vec::with_capacity(parts.len());
    let (mut n, mut m) = (0, 0);
    for p in &parts {
        if p.horizon() != horizon {
            return Err(Error::Dimension(format!(
                "composed parts disagree on horizon: {} vs {}",
                p.horizon(),
                horizon
            )));
        }
        if p.dt() != dt {
            return Err(Error::Dimension(format!(
                "composed parts disagree on dt: {} vs {}",
                p.dt(),
                dt
            )));
        }
        x_off.push(n);
        u_off.push(m);
        n += p.state_dim();
        m += p.control_dim();
    }
    for c in &couplings {
        for idx in [c.a, c.b] {
            if idx >= parts.len() {
                return Err(Error::Dimension(format!("coupling references part {idx}")));
            }
            if parts[idx].planar_position().is_none() {
                return Err(Error::Dimension(format!(
                    "coupled part {idx} exposes no planar position"
                )));
            }
        }
    }
    Ok(ComposedOcp { parts, couplings, x_off, u_off, n, m, horizon, dt })
}

impl ComposedOcp {
    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    pub fn state_offset(&self, part: usize) -> usize {
        self.x_off[part]
    }

    pub fn control_offset(&self, part: usize) -> usize {
        self.u_off[part]
    }

    fn part_x<'a>(&self, k: usize, x: &'a DVector<f64>) -> DVector<f64> {
        x.rows(self.x_off[k], self.parts[k].state_dim()).into_owned()
    }

    fn part_u<'a>(&self, k: usize, u: &'a DVector<f64>) -> DVector<f64> {
        u.rows(self.u_off[k], self.parts[k].control_dim()).into_owned()
    }

    /// Planar distance of a coupled pair and the residual row it induces.
    /// Returns (value, d value / d joint state).
    fn coupling_row(&self, c: &Coupling, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (ax, ay) = self.parts[c.a].planar_position().expect("checked at compose");
        let (bx, by) = self.parts[c.b].planar_position().expect("checked at compose");
        let ia = (self.x_off[c.a] + ax, self.x_off[c.a] + ay);
        let ib = (self.x_off[c.b] + bx, self.x_off[c.b] + by);
        let dx = x[ia.0] - x[ib.0];
        let dy = x[ia.1] - x[ib.1];
        let dist = (dx * dx + dy * dy).sqrt().max(1e-9);
        let (val, sig) = softplus(c.d_min - dist, c.sharpness);
        // d val / d dist = -sig; d dist / d pa = (pa - pb) / dist.
        let mut grad = DVector::zeros(self.n);
        grad[ia.0] = -sig * dx / dist;
        grad[ia.1] = -sig * dy / dist;
        grad[ib.0] = sig * dx / dist;
        grad[ib.1] = sig * dy / dist;
        (val, grad)
    }
}

impl Ocp for ComposedOcp {
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn state_dim(&self) -> usize {
        self.n
    }
    fn control_dim(&self) -> usize {
        self.m
    }
    fn dt(&self) -> f64 {
        self.dt
    }

    fn initial_state(&self) -> DVector<f64> {
        let mut x0 = DVector::zeros(self.n);
        for (k, p) in self.parts.iter().enumerate() {
            x0.rows_mut(self.x_off[k], p.state_dim()).copy_from(&p.initial_state());
        }
        x0
    }

    fn dynamics(&self, i: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.n);
        for (k, p) in self.parts.iter().enumerate() {
            let next = p.dynamics(i, &self.part_x(k, x), &self.part_u(k, u))?;
            out.rows_mut(self.x_off[k], p.state_dim()).copy_from(&next);
        }
        Ok(out)
    }

    fn dynamics_jac(
        &self,
        i: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let mut A = DMatrix::zeros(self.n, self.n);
        let mut B = DMatrix::zeros(self.n, self.m);
        for (k, p) in self.parts.iter().enumerate() {
            let (a, b) = p.dynamics_jac(i, &self.part_x(k, x), &self.part_u(k, u))?;
            A.view_mut((self.x_off[k], self.x_off[k]), (p.state_dim(), p.state_dim()))
                .copy_from(&a);
            B.view_mut((self.x_off[k], self.u_off[k]), (p.state_dim(), p.control_dim()))
                .copy_from(&b);
        }
        Ok((A, B))
    }

    fn stage_residual(&self, i: usize, x: &DVector<f64>, u: &DVector<f64>) -> Residual {
        let mut rows = 0;
        let part_res: Vec<Residual> = self
            .parts
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let r = p.stage_residual(i, &self.part_x(k, x), &self.part_u(k, u));
                rows += r.val.len();
                r
            })
            .collect();
        rows += self.couplings.len();

        let mut val = DVector::zeros(rows);
        let mut w = DVector::zeros(rows);
        let mut jx = DMatrix::zeros(rows, self.n);
        let mut ju = DMatrix::zeros(rows, self.m);
        let mut at = 0;
        for (k, r) in part_res.iter().enumerate() {
            let len = r.val.len();
            val.rows_mut(at, len).copy_from(&r.val);
            w.rows_mut(at, len).copy_from(&r.w);
            jx.view_mut((at, self.x_off[k]), (len, self.parts[k].state_dim()))
                .copy_from(&r.jx);
            ju.view_mut((at, self.u_off[k]), (len, self.parts[k].control_dim()))
                .copy_from(&r.ju);
            at += len;
        }
        for c in &self.couplings {
            let (v, grad) = self.coupling_row(c, x);
            val[at] = v;
            w[at] = c.weight;
            jx.row_mut(at).copy_from(&grad.transpose());
            at += 1;
        }
        Residual { val, jx, ju, w }
    }

    fn terminal_residual(&self, x: &DVector<f64>) -> Residual {
        let mut rows = 0;
        let part_res: Vec<Residual> = self
            .parts
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let r = p.terminal_residual(&self.part_x(k, x));
                rows += r.val.len();
                r
            })
            .collect();
        rows += self.couplings.len();

        let mut val = DVector::zeros(rows);
        let mut w = DVector::zeros(rows);
        let mut jx = DMatrix::zeros(rows, self.n);
        let ju = DMatrix::zeros(rows, self.m);
        let mut at = 0;
        for (k, r) in part_res.iter().enumerate() {
            let len = r.val.len();
            val.rows_mut(at, len).copy_from(&r.val);
            w.rows_mut(at, len).copy_from(&r.w);
            jx.view_mut((at, self.x_off[k]), (len, self.parts[k].state_dim()))
                .copy_from(&r.jx);
            at += len;
        }
        for c in &self.couplings {
            let (v, grad) = self.coupling_row(c, x);
            val[at] = v;
            w[at] = c.weight;
            jx.row_mut(at).copy_from(&grad.transpose());
            at += 1;
        }
        Residual { val, jx, ju, w }
    }

    fn stage_barriers(&self, i: usize, x: &DVector<f64>, u: &DVector<f64>) -> Vec<BarrierEval> {
        let mut out = Vec::new();
        for (k, p) in self.parts.iter().enumerate() {
            for be in p.stage_barriers(i, &self.part_x(k, x), &self.part_u(k, u)) {
                let mut dx = DVector::zeros(self.n);
                dx.rows_mut(self.x_off[k], p.state_dim()).copy_from(&be.dx);
                let mut du = DVector::zeros(self.m);
                du.rows_mut(self.u_off[k], p.control_dim()).copy_from(&be.du);
                out.push(BarrierEval { xi: be.xi, dx, du, barrier: be.barrier });
            }
        }
        out
    }
}
