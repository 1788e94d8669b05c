//! Multiple-shooting SQP trajectory optimizer.
//!
//! The equality-constrained QP subproblem built at each SQP iterate is
//! solved by one of two interchangeable LQR backends:
//!
//! * `riccati` — the classic sequential backward recursion, O(N) depth;
//! * `scan_lqr` — the same solution computed by an associative scan over
//!   value-function elements, O(log N) depth on the `scan` engine.
//!
//! `kkt` holds a dense reference solver used to cross-check both backends.
//! Inequalities enter through relaxed log barriers (`barrier`), globalized
//! by a filter line search (`sqp`). `models` provides benchmark problems up
//! to a single-rigid-body quadruped, and `sim` closes the loop around the
//! solver at a fixed control rate.

pub mod barrier;
pub mod bench;
pub mod config;
pub mod csvio;
pub mod error;
pub mod exec;
pub mod kkt;
pub mod models;
pub mod ocp;
pub mod qp;
pub mod riccati;
pub mod scan;
pub mod scan_lqr;
pub mod sim;
pub mod sqp;
pub mod synth;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;
