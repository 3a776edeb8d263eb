//! Globally optimal measurement feedback for purifying a qubit under
//! inefficient continuous measurement.
//!
//! The crate has three layers:
//!
//! * [`kernels`]: exact one-step transition laws of the Bloch length for
//!   the two available controls, as grid kernels and as samplers.
//! * [`solver`]: backward dynamic programming producing the optimal
//!   [`ControlTable`] and the cost-to-go, plus [`error_analysis`] for the
//!   quadrature error of that sweep.
//! * [`sim`]: Monte Carlo validation of any [`Strategy`], with an
//!   independent Bloch-plane integrator as a cross-check.
//!
//! [`format`] holds the text formats shared with the command-line tool.

pub mod config;
pub mod error;
pub mod error_analysis;
pub mod format;
pub mod kernels;
pub mod policy;
pub mod sim;
pub mod solver;

pub use config::{RGrid, SolveConfig};
pub use error::{Error, Result};
pub use kernels::{kernel_u0, kernel_u1, KernelPair, Measurement, TransitionKernel};
pub use policy::{Control, ControlTable, Strategy};
pub use solver::{backward_solve, CostGrid, Solution};
