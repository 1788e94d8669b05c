//! Single rigid body model of a quadruped trunk driven by ground reaction
//! forces at four feet.
//!
//! State (12): base position p, ZYX Euler angles (roll, pitch, yaw), linear
//! velocity v, body angular rate omega. Control (12): one world-frame force
//! per foot. Feet in contact push on fixed footholds; swing-foot forces are
//! excluded from the dynamics and pulled to zero by a quadratic penalty.
//!
//! The Euler-rate map inverts T(roll, pitch), which is singular at pitch
//! +-pi/2. States within 0.1 rad of the singularity are refused with an
//! error rather than silently degrading: a trunk MPC past that attitude has
//! failed anyway, and NaN poisoning the solver would hide the failure.

#![allow(non_snake_case)]

use nalgebra::{DMatrix, DVector, Matrix3, Vector2, Vector3};

use crate::barrier::Barrier;
use crate::models::rk4::{rk4_jacobians, rk4_step, ContinuousDynamics};
use crate::ocp::{BarrierEval, Ocp, Residual};
use crate::{Error, Result};

pub const PITCH_LIMIT: f64 = std::f64::consts::FRAC_PI_2 - 0.1;

/// Trunk inertial and contact parameters. Defaults are a small quadruped:
/// 15 kg trunk, feet at +-0.19 m x +-0.142 m, 0.30 m stance height.
#[derive(Debug, Clone)]
pub struct SrbdParams {
    pub mass: f64,
    /// Body-frame inertia diagonal (kg m^2).
    pub inertia: Vector3<f64>,
    pub gravity: f64,
    pub stance_height: f64,
    /// Hip positions in the body frame, order FL, FR, RL, RR.
    pub hips: [Vector3<f64>; 4],
    pub friction: f64,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for SrbdParams {
    fn default() -> Self {
        let (hx, hy) = (0.19, 0.142);
        SrbdParams {
            mass: 15.0,
            inertia: Vector3::new(0.12, 0.30, 0.35),
            gravity: 9.81,
            stance_height: 0.30,
            hips: [
                Vector3::new(hx, hy, 0.0),
                Vector3::new(hx, -hy, 0.0),
                Vector3::new(-hx, hy, 0.0),
                Vector3::new(-hx, -hy, 0.0),
            ],
            friction: 0.7,
            f_min: 5.0,
            f_max: 250.0,
        }
    }
}

impl SrbdParams {
    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// Periodic contact schedule. A leg is in contact while its phase
/// fract(t / period + offset) lies in [0, duty); duty >= 1 means always on.
#[derive(Debug, Clone)]
pub struct GaitSchedule {
    pub period: f64,
    pub duty: f64,
    pub offsets: [f64; 4],
}

impl GaitSchedule {
    /// Diagonal pairs alternate: FL+RR then FR+RL, half period each.
    pub fn trot(period: f64) -> Self {
        GaitSchedule { period, duty: 0.5, offsets: [0.0, 0.5, 0.5, 0.0] }
    }

    pub fn stand() -> Self {
        GaitSchedule { period: 1.0, duty: 1.0, offsets: [0.0; 4] }
    }

    fn phase(&self, t: f64, leg: usize) -> f64 {
        (t / self.period + self.offsets[leg]).rem_euclid(1.0)
    }

    pub fn in_contact(&self, t: f64, leg: usize) -> bool {
        self.duty >= 1.0 || self.phase(t, leg) < self.duty
    }

    pub fn contacts(&self, t: f64) -> [bool; 4] {
        [0, 1, 2, 3].map(|leg| self.in_contact(t, leg))
    }

    /// Start time of the stance segment containing (or, if `t` is in swing,
    /// most recently before) time t.
    pub fn touchdown_time(&self, t: f64, leg: usize) -> f64 {
        t - self.phase(t, leg) * self.period
    }

    pub fn stance_duration(&self) -> f64 {
        self.duty.min(1.0) * self.period
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn drot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

fn drot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn drot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// Body-to-world rotation for ZYX Euler angles (roll, pitch, yaw).
pub fn euler_zyx_rotation(th: &Vector3<f64>) -> Matrix3<f64> {
    rot_z(th.z) * rot_y(th.y) * rot_x(th.x)
}

fn rotation_partials(th: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    [
        rot_z(th.z) * rot_y(th.y) * drot_x(th.x),
        rot_z(th.z) * drot_y(th.y) * rot_x(th.x),
        drot_z(th.z) * rot_y(th.y) * rot_x(th.x),
    ]
}

/// Euler-rate map: th_dot = Tinv(roll, pitch) * omega, plus its partials
/// with respect to roll and pitch (yaw does not enter).
fn euler_rate_map(roll: f64, pitch: f64) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
    let (sp, cp) = roll.sin_cos();
    let (st, ct) = pitch.sin_cos();
    let tt = st / ct;
    let tinv = Matrix3::new(
        1.0, sp * tt, cp * tt,
        0.0, cp, -sp,
        0.0, sp / ct, cp / ct,
    );
    let d_roll = Matrix3::new(
        0.0, cp * tt, -sp * tt,
        0.0, -sp, -cp,
        0.0, cp / ct, -sp / ct,
    );
    let sec2 = 1.0 / (ct * ct);
    let d_pitch = Matrix3::new(
        0.0, sp * sec2, cp * sec2,
        0.0, 0.0, 0.0,
        0.0, sp * st * sec2, cp * st * sec2,
    );
    (tinv, d_roll, d_pitch)
}

pub fn check_pitch(x: &DVector<f64>) -> Result<()> {
    let pitch = x[4];
    if pitch.abs() >= PITCH_LIMIT || !pitch.is_finite() {
        return Err(Error::PitchSingularity { pitch });
    }
    Ok(())
}

/// Continuous-time trunk dynamics for one stage's contact configuration.
struct SrbdStage<'a> {
    params: &'a SrbdParams,
    contacts: &'a [bool; 4],
    feet: &'a [Vector3<f64>; 4],
}

impl SrbdStage<'_> {
    fn split(x: &DVector<f64>) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        (
            Vector3::new(x[0], x[1], x[2]),
            Vector3::new(x[3], x[4], x[5]),
            Vector3::new(x[6], x[7], x[8]),
            Vector3::new(x[9], x[10], x[11]),
        )
    }

    fn forces(u: &DVector<f64>) -> [Vector3<f64>; 4] {
        [0, 1, 2, 3].map(|j| Vector3::new(u[3 * j], u[3 * j + 1], u[3 * j + 2]))
    }
}

impl ContinuousDynamics for SrbdStage<'_> {
    fn state_dim(&self) -> usize {
        12
    }
    fn control_dim(&self) -> usize {
        12
    }

    fn f(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let pr = self.params;
        let (p, th, v, w) = Self::split(x);
        let f = Self::forces(u);
        let R = euler_zyx_rotation(&th);
        let (tinv, _, _) = euler_rate_map(th.x, th.y);

        let mut sum_f = Vector3::zeros();
        let mut tau_w = Vector3::zeros();
        for j in 0..4 {
            if self.contacts[j] {
                sum_f += f[j];
                tau_w += (self.feet[j] - p).cross(&f[j]);
            }
        }
        let th_dot = tinv * w;
        let v_dot = sum_f / pr.mass + Vector3::new(0.0, 0.0, -pr.gravity);
        let iw = pr.inertia.component_mul(&w);
        let w_dot = (R.transpose() * tau_w - w.cross(&iw)).component_div(&pr.inertia);

        let mut out = DVector::zeros(12);
        out.fixed_rows_mut::<3>(0).copy_from(&v);
        out.fixed_rows_mut::<3>(3).copy_from(&th_dot);
        out.fixed_rows_mut::<3>(6).copy_from(&v_dot);
        out.fixed_rows_mut::<3>(9).copy_from(&w_dot);
        out
    }

    fn jac(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let pr = self.params;
        let (p, th, _, w) = Self::split(x);
        let f = Self::forces(u);
        let R = euler_zyx_rotation(&th);
        let dR = rotation_partials(&th);
        let (tinv, dti_roll, dti_pitch) = euler_rate_map(th.x, th.y);
        let inv_inertia = Matrix3::from_diagonal(&pr.inertia.map(|i| 1.0 / i));

        let mut sum_fx = Matrix3::zeros();
        let mut tau_w = Vector3::zeros();
        for j in 0..4 {
            if self.contacts[j] {
                sum_fx += skew(&f[j]);
                tau_w += (self.feet[j] - p).cross(&f[j]);
            }
        }

        let mut fx = DMatrix::zeros(12, 12);
        let mut fu = DMatrix::zeros(12, 12);

        // d p_dot / d v
        fx.fixed_view_mut::<3, 3>(0, 6).fill_with_identity();

        // d th_dot / d (roll, pitch) and / d omega
        fx.fixed_view_mut::<3, 1>(3, 3).copy_from(&(dti_roll * w));
        fx.fixed_view_mut::<3, 1>(3, 4).copy_from(&(dti_pitch * w));
        fx.fixed_view_mut::<3, 3>(3, 9).copy_from(&tinv);

        // d w_dot / d p: each torque term r x f differentiates to +skew(f).
        fx.fixed_view_mut::<3, 3>(9, 0)
            .copy_from(&(inv_inertia * R.transpose() * sum_fx));
        // d w_dot / d th through R'(th).
        for k in 0..3 {
            let col = inv_inertia * (dR[k].transpose() * tau_w);
            fx.fixed_view_mut::<3, 1>(9, 3 + k).copy_from(&col);
        }
        // d w_dot / d w: derivative of -w x (I w).
        let iw = pr.inertia.component_mul(&w);
        let i_mat = Matrix3::from_diagonal(&pr.inertia);
        fx.fixed_view_mut::<3, 3>(9, 9)
            .copy_from(&(inv_inertia * (skew(&iw) - skew(&w) * i_mat)));

        for j in 0..4 {
            if !self.contacts[j] {
                continue;
            }
            let r = self.feet[j] - p;
            fu.fixed_view_mut::<3, 3>(6, 3 * j)
                .copy_from(&(Matrix3::identity() / pr.mass));
            fu.fixed_view_mut::<3, 3>(9, 3 * j)
                .copy_from(&(inv_inertia * R.transpose() * skew(&r)));
        }
        (fx, fu)
    }
}

/// One plant integration step: the same rigid-body dynamics the controller
/// models, plus an optional external CoM force (e.g. a push disturbance).
pub fn plant_step(
    params: &SrbdParams,
    contacts: &[bool; 4],
    feet: &[Vector3<f64>; 4],
    x: &DVector<f64>,
    u: &DVector<f64>,
    dt: f64,
    extra_force: &Vector3<f64>,
) -> Result<DVector<f64>> {
    check_pitch(x)?;
    struct Pushed<'a> {
        inner: SrbdStage<'a>,
        accel: Vector3<f64>,
    }
    impl ContinuousDynamics for Pushed<'_> {
        fn state_dim(&self) -> usize {
            12
        }
        fn control_dim(&self) -> usize {
            12
        }
        fn f(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
            let mut out = self.inner.f(x, u);
            out[6] += self.accel.x;
            out[7] += self.accel.y;
            out[8] += self.accel.z;
            out
        }
        fn jac(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
            self.inner.jac(x, u)
        }
    }
    let stage = Pushed {
        inner: SrbdStage { params, contacts, feet },
        accel: extra_force / params.mass,
    };
    Ok(rk4_step(&stage, x, u, dt))
}

/// Cost weights for the trunk tracker. All residuals are plain differences,
/// so weights carry the unit conversions.
#[derive(Debug, Clone)]
pub struct SrbdWeights {
    pub w_pos: Vector3<f64>,
    pub w_att: Vector3<f64>,
    pub w_vel: Vector3<f64>,
    pub w_rate: Vector3<f64>,
    /// Regularization toward the nominal stance force for contact feet.
    pub w_force: f64,
    /// Penalty pulling swing-foot forces to zero.
    pub w_swing: f64,
    pub terminal_scale: f64,
}

impl Default for SrbdWeights {
    fn default() -> Self {
        SrbdWeights {
            w_pos: Vector3::new(40.0, 40.0, 400.0),
            w_att: Vector3::new(150.0, 150.0, 100.0),
            w_vel: Vector3::new(20.0, 20.0, 20.0),
            w_rate: Vector3::new(2.0, 2.0, 2.0),
            w_force: 1e-4,
            w_swing: 1e3,
            terminal_scale: 10.0,
        }
    }
}

/// Fully instantiated horizon problem: contacts, footholds, and references
/// per node, ready for the SQP. Built by [`SrbdMpc::make_ocp`] at each
/// control step.
pub struct SrbdOcp {
    pub params: SrbdParams,
    pub weights: SrbdWeights,
    pub barrier: Barrier,
    pub horizon: usize,
    pub dt: f64,
    pub x0: DVector<f64>,
    /// Per node 0..=N.
    pub contacts: Vec<[bool; 4]>,
    pub footholds: Vec<[Vector3<f64>; 4]>,
    /// Per node 0..=N+1.
    pub x_ref: Vec<DVector<f64>>,
}

impl SrbdOcp {
    fn nominal_force(&self, i: usize) -> f64 {
        let count = self.contacts[i].iter().filter(|c| **c).count().max(1);
        self.params.weight() / count as f64
    }

    fn tracking_residual(&self, i: usize, x: &DVector<f64>, scale: f64) -> (DVector<f64>, DVector<f64>) {
        let w = &self.weights;
        let mut weights = DVector::zeros(12);
        for k in 0..3 {
            weights[k] = w.w_pos[k] * scale;
            weights[3 + k] = w.w_att[k] * scale;
            weights[6 + k] = w.w_vel[k] * scale;
            weights[9 + k] = w.w_rate[k] * scale;
        }
        (x - &self.x_ref[i], weights)
    }
}

impl Ocp for SrbdOcp {
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn state_dim(&self) -> usize {
        12
    }
    fn control_dim(&self) -> usize {
        12
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn initial_state(&self) -> DVector<f64> {
        self.x0.clone()
    }

    fn dynamics(&self, i: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_pitch(x)?;
        let stage = SrbdStage {
            params: &self.params,
            contacts: &self.contacts[i],
            feet: &self.footholds[i],
        };
        Ok(rk4_step(&stage, x, u, self.dt))
    }

    fn dynamics_jac(
        &self,
        i: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        check_pitch(x)?;
        let stage = SrbdStage {
            params: &self.params,
            contacts: &self.contacts[i],
            feet: &self.footholds[i],
        };
        Ok(rk4_jacobians(&stage, x, u, self.dt))
    }

    fn stage_residual(&self, i: usize, x: &DVector<f64>, u: &DVector<f64>) -> Residual {
        let (track, track_w) = self.tracking_residual(i, x, 1.0);
        let f_nom = self.nominal_force(i);
        let mut val = DVector::zeros(24);
        let mut w = DVector::zeros(24);
        val.rows_mut(0, 12).copy_from(&track);
        w.rows_mut(0, 12).copy_from(&track_w);
        for j in 0..4 {
            let base = 12 + 3 * j;
            if self.contacts[i][j] {
                val[base] = u[3 * j];
                val[base + 1] = u[3 * j + 1];
                val[base + 2] = u[3 * j + 2] - f_nom;
                w.rows_mut(base, 3).fill(self.weights.w_force);
            } else {
                val[base] = u[3 * j];
                val[base + 1] = u[3 * j + 1];
                val[base + 2] = u[3 * j + 2];
                w.rows_mut(base, 3).fill(self.weights.w_swing);
            }
        }
        let mut jx = DMatrix::zeros(24, 12);
        jx.view_mut((0, 0), (12, 12)).fill_with_identity();
        let mut ju = DMatrix::zeros(24, 12);
        ju.view_mut((12, 0), (12, 12)).fill_with_identity();
        Residual { val, jx, ju, w }
    }

    fn terminal_residual(&self, x: &DVector<f64>) -> Residual {
        let (val, w) = self.tracking_residual(self.horizon + 1, x, self.weights.terminal_scale);
        Residual {
            val,
            jx: DMatrix::identity(12, 12),
            ju: DMatrix::zeros(12, 12),
            w,
        }
    }

    /// Six barriers per contact foot: four friction-cone faces
    /// mu f_z +- f_x >= 0, mu f_z +- f_y >= 0, and f_min <= f_z <= f_max.
    fn stage_barriers(&self, i: usize, _x: &DVector<f64>, u: &DVector<f64>) -> Vec<BarrierEval> {
        let mu = self.params.friction;
        let mut out = Vec::new();
        for j in 0..4 {
            if !self.contacts[i][j] {
                continue;
            }
            let (ix, iy, iz) = (3 * j, 3 * j + 1, 3 * j + 2);
            let (fxv, fyv, fzv) = (u[ix], u[iy], u[iz]);
            let du = |idx_val: &[(usize, f64)]| {
                let mut d = DVector::zeros(12);
                for &(idx, val) in idx_val {
                    d[idx] = val;
                }
                d
            };
            let faces: [(f64, DVector<f64>); 6] = [
                (mu * fzv - fxv, du(&[(iz, mu), (ix, -1.0)])),
                (mu * fzv + fxv, du(&[(iz, mu), (ix, 1.0)])),
                (mu * fzv - fyv, du(&[(iz, mu), (iy, -1.0)])),
                (mu * fzv + fyv, du(&[(iz, mu), (iy, 1.0)])),
                (fzv - self.params.f_min, du(&[(iz, 1.0)])),
                (self.params.f_max - fzv, du(&[(iz, -1.0)])),
            ];
            for (xi, dg) in faces {
                out.push(BarrierEval {
                    xi,
                    dx: DVector::zeros(12),
                    du: dg,
                    barrier: self.barrier,
                });
            }
        }
        out
    }

    fn planar_position(&self) -> Option<(usize, usize)> {
        Some((0, 1))
    }
}

/// Velocity command in the ground plane plus a yaw rate.
#[derive(Debug, Clone, Copy)]
pub struct SrbdCommand {
    pub v_xy: Vector2<f64>,
    pub yaw_rate: f64,
}

/// Receding-horizon problem builder. The reference trajectory is anchored
/// once (at construction or on command change), not re-anchored every step,
/// so position drift is corrected instead of chased. Footholds are a
/// deterministic function of each stance segment's touchdown time, which
/// keeps consecutive re-solves consistent without mutable foot state.
pub struct SrbdMpc {
    pub params: SrbdParams,
    pub gait: GaitSchedule,
    pub weights: SrbdWeights,
    pub barrier: Barrier,
    pub horizon: usize,
    pub dt: f64,
    pub command: SrbdCommand,
    pub anchor_p: Vector2<f64>,
    pub anchor_yaw: f64,
    pub anchor_t: f64,
}

impl SrbdMpc {
    pub fn new(
        params: SrbdParams,
        gait: GaitSchedule,
        horizon: usize,
        dt: f64,
        command: SrbdCommand,
        x0: &DVector<f64>,
        t0: f64,
    ) -> Self {
        SrbdMpc {
            params,
            gait,
            weights: SrbdWeights::default(),
            barrier: Barrier::new(0.5, 2.0),
            horizon,
            dt,
            command,
            anchor_p: Vector2::new(x0[0], x0[1]),
            anchor_yaw: x0[5],
            anchor_t: t0,
        }
    }

    /// Standing start at a planar position, trunk at stance height.
    pub fn standing_state(params: &SrbdParams, x: f64, y: f64, yaw: f64) -> DVector<f64> {
        let mut s = DVector::zeros(12);
        s[0] = x;
        s[1] = y;
        s[2] = params.stance_height;
        s[5] = yaw;
        s
    }

    fn reference_at(&self, t: f64) -> DVector<f64> {
        let dt = t - self.anchor_t;
        let mut r = DVector::zeros(12);
        r[0] = self.anchor_p.x + self.command.v_xy.x * dt;
        r[1] = self.anchor_p.y + self.command.v_xy.y * dt;
        r[2] = self.params.stance_height;
        r[5] = self.anchor_yaw + self.command.yaw_rate * dt;
        r[6] = self.command.v_xy.x;
        r[7] = self.command.v_xy.y;
        r[11] = self.command.yaw_rate;
        r
    }

    /// Foothold for the stance segment that touched down at `t_td`:
    /// hip projected from the reference pose shifted by the measured
    /// tracking error, advanced half a stance so the foot is centered under
    /// the hip mid-stance. Folding the error in keeps the support polygon
    /// under the actual trunk after a disturbance; footholds anchored to
    /// the bare reference build up roll and pitch moment arms as the error
    /// grows, which runs away once it exceeds the hip spacing.
    fn foothold_for(
        &self,
        t_td: f64,
        leg: usize,
        err_xy: Vector2<f64>,
        err_yaw: f64,
    ) -> Vector3<f64> {
        let r = self.reference_at(t_td);
        let yaw = r[5] + err_yaw;
        let (s, c) = yaw.sin_cos();
        let hip = &self.params.hips[leg];
        let half_stance = 0.5 * self.gait.stance_duration();
        Vector3::new(
            r[0] + err_xy.x + c * hip.x - s * hip.y + self.command.v_xy.x * half_stance,
            r[1] + err_xy.y + s * hip.x + c * hip.y + self.command.v_xy.y * half_stance,
            0.0,
        )
    }

    /// Instantiate the horizon problem at time `t` from measured state `x`.
    pub fn make_ocp(&self, t: f64, x: &DVector<f64>) -> SrbdOcp {
        let N = self.horizon;
        let r_now = self.reference_at(t);
        let err_xy = Vector2::new(x[0] - r_now[0], x[1] - r_now[1]);
        let err_yaw = x[5] - r_now[5];
        let mut contacts = Vec::with_capacity(N + 1);
        let mut footholds = Vec::with_capacity(N + 1);
        let mut x_ref = Vec::with_capacity(N + 2);
        for k in 0..=N {
            let tk = t + k as f64 * self.dt;
            contacts.push(self.gait.contacts(tk));
            footholds.push([0, 1, 2, 3].map(|leg| {
                let td = self.gait.touchdown_time(tk, leg);
                self.foothold_for(td, leg, err_xy, err_yaw)
            }));
            x_ref.push(self.reference_at(tk));
        }
        x_ref.push(self.reference_at(t + (N + 1) as f64 * self.dt));
        SrbdOcp {
            params: self.params.clone(),
            weights: self.weights.clone(),
            barrier: self.barrier,
            horizon: N,
            dt: self.dt,
            x0: x.clone(),
            contacts,
            footholds,
            x_ref,
        }
    }

    /// Nominal stance control: contact feet share the weight, swing feet
    /// zero. A reasonable initial guess for the first solve.
    pub fn nominal_control(&self, t: f64) -> DVector<f64> {
        let contacts = self.gait.contacts(t);
        let count = contacts.iter().filter(|c| **c).count().max(1);
        let fz = self.params.weight() / count as f64;
        let mut u = DVector::zeros(12);
        for j in 0..4 {
            if contacts[j] {
                u[3 * j + 2] = fz;
            }
        }
        u
    }
}
