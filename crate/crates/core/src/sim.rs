//! Closed-loop receding-horizon simulation of one or more trunk models.
//!
//! Each control step rebuilds the horizon problem at the measured state,
//! warm-starts from the previous solution shifted by one node, and runs a
//! fixed number of SQP iterates (one, for the real-time iteration scheme)
//! before applying the first control to the plant. The plant integrates the
//! same rigid-body dynamics as the controller model, optionally with an
//! external push force over a time window.

use std::sync::Arc;

use nalgebra::{DVector, Vector2, Vector3};

use crate::exec::Parallelism;
use crate::models::multi::{compose_multi_robot, Coupling};
use crate::models::srbd::{plant_step, SrbdMpc};
use crate::ocp::{Ocp, Trajectory};
use crate::sqp::{solve, sqp_iterate, warm_start_shift, IterStats, SolverOptions};
use crate::{Error, Result};

/// External CoM force applied to one robot over a time window.
#[derive(Debug, Clone)]
pub struct Push {
    pub robot: usize,
    pub t_start: f64,
    pub duration: f64,
    pub force: Vector3<f64>,
}

impl Push {
    fn force_at(&self, t: f64) -> Vector3<f64> {
        if t >= self.t_start && t < self.t_start + self.duration {
            self.force
        } else {
            Vector3::zeros()
        }
    }
}

/// State of the world at the start of one control step, plus what the
/// controller did about it.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: f64,
    /// Stacked plant state (12 per robot) at the step start.
    pub x: DVector<f64>,
    /// Stacked control applied over the step.
    pub u: DVector<f64>,
    /// Contact flags per robot at this step.
    pub contacts: Vec<[bool; 4]>,
    pub stats: IterStats,
}

#[derive(Debug, Clone)]
pub struct SimLog {
    pub dt: f64,
    pub robots: usize,
    pub steps: Vec<StepRecord>,
}

impl SimLog {
    pub fn robot_state<'a>(&self, rec: &'a StepRecord, k: usize) -> nalgebra::DVectorView<'a, f64> {
        rec.x.rows(12 * k, 12)
    }

    pub fn robot_control<'a>(&self, rec: &'a StepRecord, k: usize) -> nalgebra::DVectorView<'a, f64> {
        rec.u.rows(12 * k, 12)
    }

    /// Planar speed-tracking error of one robot at one step.
    pub fn speed_error(&self, rec: &StepRecord, k: usize, v_cmd: Vector2<f64>) -> f64 {
        let x = self.robot_state(rec, k);
        Vector2::new(x[6] - v_cmd.x, x[7] - v_cmd.y).norm()
    }

    pub fn mean_speed_error(&self, k: usize, v_cmd: Vector2<f64>) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|r| self.speed_error(r, k, v_cmd)).sum::<f64>() / self.steps.len() as f64
    }

    /// First time at or after `after` when the robot's speed error drops
    /// under `tol`, as a delay relative to `after`.
    pub fn recovery_delay(&self, k: usize, v_cmd: Vector2<f64>, after: f64, tol: f64) -> Option<f64> {
        self.steps
            .iter()
            .find(|r| r.t >= after && self.speed_error(r, k, v_cmd) < tol)
            .map(|r| r.t - after)
    }

    /// Planar distance between two robots at one step.
    pub fn pair_distance(&self, rec: &StepRecord, a: usize, b: usize) -> f64 {
        let xa = self.robot_state(rec, a);
        let xb = self.robot_state(rec, b);
        Vector2::new(xa[0] - xb[0], xa[1] - xb[1]).norm()
    }

    pub fn min_pair_distance(&self, a: usize, b: usize) -> f64 {
        self.steps
            .iter()
            .map(|r| self.pair_distance(r, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Worst (smallest) friction-cone and force-bound margin over every
    /// contact foot at every step. Positive means no applied force ever
    /// left its cone.
    pub fn min_cone_margin(&self, friction: f64, f_min: f64, f_max: f64) -> f64 {
        let mut worst = f64::INFINITY;
        for rec in &self.steps {
            for k in 0..self.robots {
                let u = self.robot_control(rec, k);
                for (j, down) in rec.contacts[k].iter().enumerate() {
                    if !down {
                        continue;
                    }
                    let (fx, fy, fz) = (u[3 * j], u[3 * j + 1], u[3 * j + 2]);
                    for margin in [
                        friction * fz - fx.abs(),
                        friction * fz - fy.abs(),
                        fz - f_min,
                        f_max - fz,
                    ] {
                        worst = worst.min(margin);
                    }
                }
            }
        }
        worst
    }
}

/// A closed-loop scenario: one controller per robot, optional couplings in
/// the joint problem, optional push.
pub struct RtiSim {
    pub controllers: Vec<SrbdMpc>,
    pub initial_states: Vec<DVector<f64>>,
    pub couplings: Vec<Coupling>,
    pub duration: f64,
    pub push: Option<Push>,
    pub options: SolverOptions,
    /// SQP iterates per control step (1 = real-time iteration).
    pub iters_per_step: usize,
    /// Full-solve iterate budget for the initialization at t = 0.
    pub init_iters: usize,
}

impl RtiSim {
    pub fn new(controllers: Vec<SrbdMpc>, initial_states: Vec<DVector<f64>>) -> Self {
        RtiSim {
            controllers,
            initial_states,
            couplings: Vec::new(),
            duration: 4.0,
            push: None,
            options: SolverOptions::default(),
            iters_per_step: 1,
            init_iters: 10,
        }
    }

    fn joint_ocp(&self, t: f64, x: &DVector<f64>) -> Result<(ComposedParts, crate::models::multi::ComposedOcp)> {
        let mut parts_info = Vec::with_capacity(self.controllers.len());
        let mut parts: Vec<Arc<dyn Ocp>> = Vec::with_capacity(self.controllers.len());
        for (k, ctrl) in self.controllers.iter().enumerate() {
            let xk = x.rows(12 * k, 12).into_owned();
            let ocp = ctrl.make_ocp(t, &xk);
            parts_info.push((ocp.contacts[0], ocp.footholds[0]));
            parts.push(Arc::new(ocp) as Arc<dyn Ocp>);
        }
        let joint = compose_multi_robot(parts, self.couplings.clone())?;
        Ok((parts_info, joint))
    }

    /// Run the scenario. Returns the full step log; solver failures and
    /// model-guard violations abort with an error.
    pub fn run(&self, par: &Parallelism) -> Result<SimLog> {
        if self.controllers.len() != self.initial_states.len() {
            return Err(Error::Dimension(format!(
                "{} controllers but {} initial states",
                self.controllers.len(),
                self.initial_states.len()
            )));
        }
        let robots = self.controllers.len();
        let dt = self.controllers[0].dt;
        let steps = (self.duration / dt).round() as usize;

        let mut x = DVector::zeros(12 * robots);
        for (k, x0) in self.initial_states.iter().enumerate() {
            x.rows_mut(12 * k, 12).copy_from(x0);
        }

        // Initialization solve: hold the measured state across the horizon
        // with per-stage nominal stance forces, then let the solver settle
        // before the clock starts. The held guess is dynamically infeasible
        // but multiple shooting absorbs that; an open-loop rollout instead
        // tumbles for nonzero velocity commands (advanced footholds exert an
        // uncompensated pitch moment) and leaves no valid point to
        // linearize at.
        let (_, ocp0) = self.joint_ocp(0.0, &x)?;
        let mut guess = Trajectory::hold(&ocp0);
        for (i, u) in guess.u.iter_mut().enumerate() {
            let ti = i as f64 * dt;
            for (k, ctrl) in self.controllers.iter().enumerate() {
                u.rows_mut(12 * k, 12).copy_from(&ctrl.nominal_control(ti));
            }
        }
        let init_opts = SolverOptions {
            max_iters: self.init_iters,
            ..self.options.clone()
        };
        let mut traj = solve(&ocp0, guess, &init_opts, par)?.traj;

        let mut log = SimLog { dt, robots, steps: Vec::with_capacity(steps) };
        for step in 0..steps {
            let t = step as f64 * dt;
            let (parts_info, ocp) = self.joint_ocp(t, &x)?;
            if step > 0 {
                traj = warm_start_shift(&traj);
            }
            let mut rho = 0.0;
            let mut stats = None;
            for _ in 0..self.iters_per_step.max(1) {
                stats = Some(sqp_iterate(&ocp, &mut traj, &mut rho, &self.options, par)?);
            }
            let u = traj.u[0].clone();

            let mut x_next = DVector::zeros(12 * robots);
            for k in 0..robots {
                let (contacts, feet) = &parts_info[k];
                let extra = match &self.push {
                    Some(p) if p.robot == k => p.force_at(t),
                    _ => Vector3::zeros(),
                };
                let xk = x.rows(12 * k, 12).into_owned();
                let uk = u.rows(12 * k, 12).into_owned();
                let next = plant_step(&self.controllers[k].params, contacts, feet, &xk, &uk, dt, &extra)?;
                x_next.rows_mut(12 * k, 12).copy_from(&next);
            }

            log.steps.push(StepRecord {
                t,
                x: x.clone(),
                u,
                contacts: parts_info.iter().map(|(c, _)| *c).collect(),
                stats: stats.expect("at least one iterate per step"),
            });
            x = x_next;
        }
        Ok(log)
    }
}

type ComposedParts = Vec<([bool; 4], [Vector3<f64>; 4])>;

/// Single robot trotting at a velocity command, with an optional push.
pub fn trot_scenario(
    horizon: usize,
    dt: f64,
    v_cmd: Vector2<f64>,
    duration: f64,
    push: Option<Push>,
) -> RtiSim {
    use crate::models::srbd::{GaitSchedule, SrbdCommand, SrbdParams};
    let params = SrbdParams::default();
    let x0 = SrbdMpc::standing_state(&params, 0.0, 0.0, 0.0);
    let mpc = SrbdMpc::new(
        params,
        GaitSchedule::trot(0.5),
        horizon,
        dt,
        SrbdCommand { v_xy: v_cmd, yaw_rate: 0.0 },
        &x0,
        0.0,
    );
    let mut sim = RtiSim::new(vec![mpc], vec![x0]);
    sim.duration = duration;
    sim.push = push;
    sim
}

/// Two robots trotting toward each other with a minimum-distance coupling.
/// A small lateral offset breaks the symmetry so the penalty can steer them
/// apart.
pub fn crossing_scenario(horizon: usize, dt: f64, d_min: f64, duration: f64) -> RtiSim {
    use crate::models::srbd::{GaitSchedule, SrbdCommand, SrbdParams};
    let params = SrbdParams::default();
    let speed = 0.25;
    let gap = 2.0;
    let a0 = SrbdMpc::standing_state(&params, 0.0, 0.0, 0.0);
    let b0 = SrbdMpc::standing_state(&params, gap, 0.06, std::f64::consts::PI);
    let a = SrbdMpc::new(
        params.clone(),
        GaitSchedule::trot(0.5),
        horizon,
        dt,
        SrbdCommand { v_xy: Vector2::new(speed, 0.0), yaw_rate: 0.0 },
        &a0,
        0.0,
    );
    let b = SrbdMpc::new(
        params,
        GaitSchedule::trot(0.5),
        horizon,
        dt,
        SrbdCommand { v_xy: Vector2::new(-speed, 0.0), yaw_rate: 0.0 },
        &b0,
        0.0,
    );
    let mut sim = RtiSim::new(vec![a, b], vec![a0, b0]);
    sim.couplings = vec![Coupling { a: 0, b: 1, d_min, weight: 2000.0, sharpness: 12.0 }];
    sim.duration = duration;
    sim
}
