pub mod double_integrator;
pub mod multi;
pub mod pendulum;
pub mod rk4;
pub mod srbd;

pub use double_integrator::DoubleIntegratorOcp;
pub use multi::{compose_multi_robot, Coupling};
pub use pendulum::PendulumOcp;
pub use srbd::{GaitSchedule, SrbdOcp, SrbdParams};
