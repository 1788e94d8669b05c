//! Timing sweeps over horizon length, robot count, and batch size.
//!
//! Every cell reports the median of `reps` timed repetitions taken after
//! `warmups` untimed ones, for each backend. Medians rather than means keep
//! one descheduled rep from poisoning a cell.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DVector, Vector2};

use crate::config::RunConfig;
use crate::exec::Parallelism;
use crate::models::multi::compose_multi_robot;
use crate::models::srbd::{GaitSchedule, SrbdCommand, SrbdMpc, SrbdParams};
use crate::ocp::{Ocp, Trajectory};
use crate::sqp::{solve, sqp_iterate, Backend, SolverOptions};
use crate::Result;

/// Headline results this build deliberately does not measure, printed with
/// every report so a reader knows what the numbers cannot support. Each entry
/// names the unmeasured claim and the structural stand-in that is measured.
pub const NOT_REPRODUCED: [&str; 4] = [
    "headline 60%/700% solver-runtime improvements from accelerator-parallel backends: not asserted; structural analog measured instead (tree-scan dependency depth of 2*ceil(log2 L) stages against the length-proportional sequential chain, at verified result equivalence)",
    "the 27-iteration barrel-roll maneuver, which needs a whole-body model: not asserted; structural analog measured instead (single-rigid-body trot, push recovery, and two-robot crossing with friction-cone margins)",
    "the 20% average-cost reduction relative to acados, which is not vendored here: not asserted; structural analog measured instead (agreement with this build's dense KKT oracle to 1e-8 on randomized instances)",
    "real-time factors on GPU hardware: not asserted; structural analog measured instead (single-iterate wall times and depth counters on CPU worker threads)",
];

#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub sweep: &'static str,
    pub backend: &'static str,
    pub horizon: usize,
    pub robots: usize,
    pub batch: usize,
    pub workers: usize,
    pub reps: usize,
    /// Median wall time of one unit of work (one SQP iterate, or one batch).
    pub median_ns: u128,
    pub backward_depth: usize,
    pub forward_depth: usize,
}

impl BenchRecord {
    pub const CSV_HEADER: [&'static str; 10] = [
        "sweep",
        "backend",
        "horizon",
        "robots",
        "batch",
        "workers",
        "reps",
        "median_ns",
        "backward_depth",
        "forward_depth",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.sweep.to_string(),
            self.backend.to_string(),
            self.horizon.to_string(),
            self.robots.to_string(),
            self.batch.to_string(),
            self.workers.to_string(),
            self.reps.to_string(),
            self.median_ns.to_string(),
            self.backward_depth.to_string(),
            self.forward_depth.to_string(),
        ]
    }
}

fn median(mut samples: Vec<u128>) -> u128 {
    samples.sort_unstable();
    samples[samples.len() / 2]
}

fn srbd_problem(horizon: usize, robots: usize) -> Result<(Arc<dyn Ocp>, Trajectory)> {
    let params = SrbdParams::default();
    let parts: Vec<Arc<dyn Ocp>> = (0..robots)
        .map(|k| {
            let x0 = SrbdMpc::standing_state(&params, 0.0, k as f64, 0.0);
            let mpc = SrbdMpc::new(
                params.clone(),
                GaitSchedule::trot(0.5),
                horizon,
                0.02,
                SrbdCommand { v_xy: Vector2::new(0.3, 0.0), yaw_rate: 0.0 },
                &x0,
                0.0,
            );
            Arc::new(mpc.make_ocp(0.0, &x0)) as Arc<dyn Ocp>
        })
        .collect();
    let joint = compose_multi_robot(parts, vec![])?;
    let guess = Trajectory::hold(&joint);
    Ok((Arc::new(joint), guess))
}

/// Time one warm SQP iterate on the problem, per backend.
fn time_iterates(
    sweep: &'static str,
    ocp: &dyn Ocp,
    warm: &Trajectory,
    robots: usize,
    backends: &[Backend],
    reps: usize,
    warmups: usize,
    par: &Parallelism,
) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    for &backend in backends {
        let opts = SolverOptions { backend, ..Default::default() };
        let mut samples = Vec::with_capacity(reps);
        let mut depths = (0, 0);
        for rep in 0..warmups + reps {
            // Fresh copies so every rep does identical work.
            let mut traj = warm.clone();
            let mut rho = 0.0;
            let t0 = Instant::now();
            let it = sqp_iterate(ocp, &mut traj, &mut rho, &opts, par)?;
            let dt = t0.elapsed().as_nanos();
            if rep >= warmups {
                samples.push(dt);
            }
            depths = (it.backward_depth, it.forward_depth);
        }
        out.push(BenchRecord {
            sweep,
            backend: backend.name(),
            horizon: ocp.horizon(),
            robots,
            batch: 1,
            workers: par.workers(),
            reps,
            median_ns: median(samples),
            backward_depth: depths.0,
            forward_depth: depths.1,
        });
    }
    Ok(out)
}

/// Horizon sweep: single robot, growing N.
pub fn horizon_sweep(cfg: &RunConfig, backends: &[Backend], par: &Parallelism) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    for &n in &cfg.bench.horizons {
        let (ocp, guess) = srbd_problem(n, 1)?;
        // Settle to a representative iterate before timing.
        let warm = settle(ocp.as_ref(), guess, par)?;
        out.extend(time_iterates(
            "horizon",
            ocp.as_ref(),
            &warm,
            1,
            backends,
            cfg.bench.reps.max(1),
            cfg.bench.warmups,
            par,
        )?);
    }
    Ok(out)
}

/// Robot-count sweep at fixed horizon 50.
pub fn robot_sweep(cfg: &RunConfig, backends: &[Backend], par: &Parallelism) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    for &robots in &cfg.bench.robot_counts {
        let (ocp, guess) = srbd_problem(50, robots)?;
        let warm = settle(ocp.as_ref(), guess, par)?;
        out.extend(time_iterates(
            "robots",
            ocp.as_ref(),
            &warm,
            robots,
            backends,
            cfg.bench.reps.max(1),
            cfg.bench.warmups,
            par,
        )?);
    }
    Ok(out)
}

fn settle(ocp: &dyn Ocp, guess: Trajectory, par: &Parallelism) -> Result<Trajectory> {
    let opts = SolverOptions { max_iters: 5, ..Default::default() };
    Ok(solve(ocp, guess, &opts, par)?.traj)
}

/// Batch sweep: independent full solves of a small tracking problem,
/// dispatched over the configured workers. The timed unit is the whole
/// batch; divide by the batch size for per-instance throughput.
pub fn batch_sweep(cfg: &RunConfig, backends: &[Backend], par: &Parallelism) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    for &batch in &cfg.bench.batch_sizes {
        for &backend in backends {
            let opts = SolverOptions { backend, max_iters: 10, ..Default::default() };
            let mut samples = Vec::with_capacity(cfg.bench.reps);
            for rep in 0..cfg.bench.warmups + cfg.bench.reps.max(1) {
                let t0 = Instant::now();
                let results = par.map_indexed(batch, |k| {
                    let x0 = DVector::from_vec(vec![1.0 + 0.01 * k as f64, 0.0, -0.5, 0.25]);
                    let ocp = crate::models::DoubleIntegratorOcp::new(50, 0.05, x0, DVector::zeros(4));
                    // Each instance solves on its own; worker threads must
                    // not share solver state.
                    solve(&ocp, Trajectory::hold(&ocp), &opts, &Parallelism::serial())
                });
                let dt = t0.elapsed().as_nanos();
                for r in results {
                    r?;
                }
                if rep >= cfg.bench.warmups {
                    samples.push(dt);
                }
            }
            out.push(BenchRecord {
                sweep: "batch",
                backend: backend.name(),
                horizon: 50,
                robots: 1,
                batch,
                workers: par.workers(),
                reps: cfg.bench.reps.max(1),
                median_ns: median(samples),
                backward_depth: 0,
                forward_depth: 0,
            });
        }
    }
    Ok(out)
}

/// Human-readable report: one line per record plus the not-measured list.
pub fn report(records: &[BenchRecord]) -> String {
    let mut s = String::new();
    s.push_str("sweep      backend   N    robots batch workers median_ms  bwd_depth fwd_depth\n");
    for r in records {
        s.push_str(&format!(
            "{:<10} {:<9} {:<4} {:<6} {:<5} {:<7} {:<10.3} {:<9} {:<9}\n",
            r.sweep,
            r.backend,
            r.horizon,
            r.robots,
            r.batch,
            r.workers,
            r.median_ns as f64 / 1e6,
            r.backward_depth,
            r.forward_depth,
        ));
    }
    s.push_str("\nnot measured by this build:\n");
    for item in NOT_REPRODUCED {
        s.push_str("  - ");
        s.push_str(item);
        s.push('\n');
    }
    s
}
