//! JSON run configuration.
//!
//! Every section rejects unknown keys so a typo fails loudly instead of
//! silently running defaults. The model section is externally tagged:
//! `"model": {"srbd": {...}}`.

use std::sync::Arc;

use nalgebra::{DVector, Vector2, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Parallelism;
use crate::models::multi::{compose_multi_robot, Coupling};
use crate::models::srbd::{GaitSchedule, SrbdCommand, SrbdMpc, SrbdParams};
use crate::models::{DoubleIntegratorOcp, PendulumOcp};
use crate::ocp::{Ocp, Trajectory};
use crate::sim::{Push, RtiSim};
use crate::sqp::{Backend, SolverOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_backend")]
    pub backend: String,
    pub model: ModelConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub batch: BatchConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

fn default_workers() -> usize {
    1
}

fn default_backend() -> String {
    "riccati".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    DoubleIntegrator {
        horizon: usize,
        dt: f64,
        x0: Vec<f64>,
        goal: Vec<f64>,
    },
    Pendulum {
        horizon: usize,
        dt: f64,
        u_max: f64,
        /// Target the hanging equilibrium instead of the upright one.
        #[serde(default)]
        down: bool,
    },
    Srbd {
        horizon: usize,
        dt: f64,
        #[serde(default = "default_robots")]
        robots: usize,
        /// Shared planar velocity command; `v_cmds` overrides per robot.
        #[serde(default)]
        v_cmd: [f64; 2],
        #[serde(default)]
        v_cmds: Option<Vec<[f64; 2]>>,
        /// Start positions per robot; default is a line along y.
        #[serde(default)]
        starts: Option<Vec<[f64; 2]>>,
        #[serde(default)]
        yaws: Option<Vec<f64>>,
        /// Spacing of the default line of robots (m).
        #[serde(default = "default_spacing")]
        spacing: f64,
        #[serde(default)]
        coupling: Option<CouplingConfig>,
    },
}

fn default_robots() -> usize {
    1
}

fn default_spacing() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub d_min: f64,
    #[serde(default = "default_coupling_weight")]
    pub weight: f64,
    #[serde(default = "default_coupling_sharpness")]
    pub sharpness: f64,
}

fn default_coupling_weight() -> f64 {
    2000.0
}

fn default_coupling_sharpness() -> f64 {
    12.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub tol_theta: f64,
    pub tol_step: f64,
    /// Uniform perturbation amplitude applied to the initial guess; batch
    /// instance k draws with seed + k, the plain solve is instance 0.
    pub init_perturbation: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 50,
            tol_theta: 1e-8,
            tol_step: 1e-8,
            init_perturbation: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub duration: f64,
    pub push: Option<PushConfig>,
    /// SQP iterates per control step.
    pub iters_per_step: usize,
    /// Iterate budget for the settling solve before the loop starts.
    pub init_iters: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { duration: 4.0, push: None, iters_per_step: 1, init_iters: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PushConfig {
    #[serde(default)]
    pub robot: usize,
    pub t_start: f64,
    pub duration: f64,
    pub force: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatchConfig {
    pub count: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig { count: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub reps: usize,
    pub warmups: usize,
    pub horizons: Vec<usize>,
    pub robot_counts: Vec<usize>,
    pub batch_sizes: Vec<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            reps: 20,
            warmups: 3,
            horizons: vec![10, 25, 50, 100, 200, 400],
            robot_counts: vec![1, 2, 4, 8, 16],
            batch_sizes: vec![1, 8, 64, 512],
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn backend(&self) -> Result<Backend> {
        Backend::parse(&self.backend)
    }

    pub fn parallelism(&self) -> Parallelism {
        Parallelism::new(self.workers)
    }

    pub fn solver_options(&self) -> Result<SolverOptions> {
        Ok(SolverOptions {
            backend: self.backend()?,
            max_iters: self.solver.max_iters,
            tol_theta: self.solver.tol_theta,
            tol_step: self.solver.tol_step,
        })
    }

    /// Build the open-loop horizon problem this config describes (the
    /// problem `solve` and `batch` operate on).
    pub fn build_ocp(&self) -> Result<Arc<dyn Ocp>> {
        match &self.model {
            ModelConfig::DoubleIntegrator { horizon, dt, x0, goal } => {
                if x0.len() != goal.len() || x0.len() % 2 != 0 || x0.is_empty() {
                    return Err(Error::Config(format!(
                        "double_integrator x0/goal must be equal-length, even, nonempty; got {} and {}",
                        x0.len(),
                        goal.len()
                    )));
                }
                Ok(Arc::new(DoubleIntegratorOcp::new(
                    *horizon,
                    *dt,
                    DVector::from_vec(x0.clone()),
                    DVector::from_vec(goal.clone()),
                )))
            }
            ModelConfig::Pendulum { horizon, dt, u_max, down } => {
                let ocp = if *down {
                    PendulumOcp::stay_down(*horizon, *dt, *u_max)
                } else {
                    PendulumOcp::swing_up(*horizon, *dt, *u_max)
                };
                Ok(Arc::new(ocp))
            }
            ModelConfig::Srbd { .. } => {
                let controllers = self.srbd_controllers()?;
                let couplings = self.srbd_couplings(controllers.len())?;
                let parts: Vec<Arc<dyn Ocp>> = controllers
                    .iter()
                    .map(|(mpc, x0)| Arc::new(mpc.make_ocp(0.0, x0)) as Arc<dyn Ocp>)
                    .collect();
                Ok(Arc::new(compose_multi_robot(parts, couplings)?))
            }
        }
    }

    fn srbd_fields(
        &self,
    ) -> Result<(usize, f64, usize, [f64; 2], Option<&Vec<[f64; 2]>>, Option<&Vec<[f64; 2]>>, Option<&Vec<f64>>, f64)> {
        match &self.model {
            ModelConfig::Srbd { horizon, dt, robots, v_cmd, v_cmds, starts, yaws, spacing, .. } => Ok((
                *horizon,
                *dt,
                *robots,
                *v_cmd,
                v_cmds.as_ref(),
                starts.as_ref(),
                yaws.as_ref(),
                *spacing,
            )),
            _ => Err(Error::Config("this operation needs an srbd model".into())),
        }
    }

    /// One controller + initial state per robot.
    pub fn srbd_controllers(&self) -> Result<Vec<(SrbdMpc, DVector<f64>)>> {
        let (horizon, dt, robots, v_cmd, v_cmds, starts, yaws, spacing) = self.srbd_fields()?;
        if robots == 0 {
            return Err(Error::Config("srbd robots must be >= 1".into()));
        }
        for (name, len) in [
            ("v_cmds", v_cmds.map(|v| v.len())),
            ("starts", starts.map(|v| v.len())),
            ("yaws", yaws.map(|v| v.len())),
        ] {
            if let Some(len) = len {
                if len != robots {
                    return Err(Error::Config(format!(
                        "{name} has {len} entries for {robots} robots"
                    )));
                }
            }
        }
        let params = SrbdParams::default();
        let mut out = Vec::with_capacity(robots);
        for k in 0..robots {
            let start = starts
                .map(|s| Vector2::new(s[k][0], s[k][1]))
                .unwrap_or_else(|| Vector2::new(0.0, spacing * k as f64));
            let yaw = yaws.map(|y| y[k]).unwrap_or(0.0);
            let cmd = v_cmds.map(|v| v[k]).unwrap_or(v_cmd);
            let x0 = SrbdMpc::standing_state(&params, start.x, start.y, yaw);
            let mpc = SrbdMpc::new(
                params.clone(),
                GaitSchedule::trot(0.5),
                horizon,
                dt,
                SrbdCommand { v_xy: Vector2::new(cmd[0], cmd[1]), yaw_rate: 0.0 },
                &x0,
                0.0,
            );
            out.push((mpc, x0));
        }
        Ok(out)
    }

    fn srbd_couplings(&self, robots: usize) -> Result<Vec<Coupling>> {
        let coupling = match &self.model {
            ModelConfig::Srbd { coupling, .. } => coupling,
            _ => return Ok(Vec::new()),
        };
        Ok(match coupling {
            Some(c) => (0..robots)
                .flat_map(|a| (a + 1..robots).map(move |b| (a, b)))
                .map(|(a, b)| Coupling {
                    a,
                    b,
                    d_min: c.d_min,
                    weight: c.weight,
                    sharpness: c.sharpness,
                })
                .collect(),
            None => Vec::new(),
        })
    }

    /// Build the closed-loop scenario for `simulate`.
    pub fn build_sim(&self) -> Result<RtiSim> {
        let controllers = self.srbd_controllers()?;
        let couplings = self.srbd_couplings(controllers.len())?;
        let (mpcs, x0s): (Vec<_>, Vec<_>) = controllers.into_iter().unzip();
        let mut sim = RtiSim::new(mpcs, x0s);
        sim.couplings = couplings;
        sim.duration = self.sim.duration;
        sim.iters_per_step = self.sim.iters_per_step;
        sim.init_iters = self.sim.init_iters;
        sim.options = self.solver_options()?;
        sim.push = self.sim.push.as_ref().map(|p| Push {
            robot: p.robot,
            t_start: p.t_start,
            duration: p.duration,
            force: Vector3::new(p.force[0], p.force[1], p.force[2]),
        });
        Ok(sim)
    }

    /// Initial guess for instance `k` of a batch (the plain solve is
    /// instance 0): hold the initial state, then perturb states and
    /// controls uniformly by the configured amplitude, seeded by seed + k.
    pub fn initial_guess(&self, ocp: &dyn Ocp, instance: u64) -> Trajectory {
        let mut traj = Trajectory::hold(ocp);
        let scale = self.solver.init_perturbation;
        if scale == 0.0 {
            return traj;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(instance));
        for x in traj.x.iter_mut() {
            for v in x.iter_mut() {
                *v += scale * (2.0 * rng.gen::<f64>() - 1.0);
            }
        }
        for u in traj.u.iter_mut() {
            for v in u.iter_mut() {
                *v += scale * (2.0 * rng.gen::<f64>() - 1.0);
            }
        }
        traj
    }
}
