//! Fixed-weight feed-forward networks that perform explicit Runge-Kutta
//! time integration.
//!
//! A right-hand side `r(u, t)` given as a [`graph::NetworkGraph`] is
//! wrapped by [`compiler::compile_step`] into a deeper network whose forward
//! pass is one step of the method described by a
//! [`tableau::ButcherTableau`]. [`oracle`] holds an ordinary integrator that
//! accumulates in the same order, so the two can be compared bit for bit.

pub mod cli;
pub mod compiler;
pub mod graph;
pub mod models;
pub mod oracle;
pub mod subnets;
pub mod tableau;

pub use compiler::{compile_multi, compile_step, CompiledStep, LaneLayout};
pub use graph::{Activation, Layer, NetworkGraph};
pub use models::RhsModel;
pub use oracle::{integrate_network, integrate_oracle, rk_step, Trajectory};
pub use subnets::PassthroughMode;
pub use tableau::ButcherTableau;
