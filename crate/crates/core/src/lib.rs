//! Inertial particle transport in two-dimensional flows via a boundary-layer
//! reformulation of the history force, plus direct history-quadrature
//! integrators and benchmarking utilities.

pub mod bench;
pub mod daitche;
pub mod error;
pub mod flow;
pub mod grid;
pub mod gridded;
pub mod krylov;
pub mod operator;
pub mod params;
pub mod quad;
pub mod reference;
pub mod spline;
pub mod stepper;
pub mod system;
pub mod tableau;

pub use error::{Error, Result};
pub use flow::{boundary_forcing, FlowField, FlowSample};
pub use grid::PseudoGrid;
pub use gridded::GridSeries;
pub use operator::{assemble_fd2, assemble_fd4, SpatialOperator};
pub use params::{MreParams, PhysicalParams};
pub use stepper::{integrate, Method, SplitOde, StepperConfig, Trajectory};
pub use system::FullSystem;
