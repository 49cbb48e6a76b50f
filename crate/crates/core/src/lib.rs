//! Weighted-sum-rate power control for device-to-device (D2D) networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`netgen`]: random layouts and the ITU-1411 style gain matrix.
//! - [`rates`]: SINR, rates, Jacobian and the Utopian scalarization frame.
//! - [`psolver`]: the primal-dual iteration (VIVA untrained, LUVA trained).
//! - [`fplinq`]: fractional-programming baseline.
//! - [`trainer`]: layer-wise deep-unfolding trainer with reverse-mode gradients.
//! - [`scheduler`]: virtual-queue drift-plus-penalty fairness scheduler.
//! - [`harness`]: evaluation metrics, CDFs, histograms and generalization sweeps.
//! - [`wsrm`]: the solver choice shared by the harness and the scheduler.

pub mod error;
pub mod fplinq;
pub mod harness;
pub mod netgen;
pub mod psolver;
pub mod rates;
pub mod scheduler;
pub mod seeding;
pub mod trainer;
pub mod wsrm;

pub use error::{LuvaError, Result};
pub use netgen::{NetworkInstance, SystemParams};
pub use psolver::{SolverMode, StepSchedule};
pub use rates::{PowerAllocation, ScalarizationFrame};
