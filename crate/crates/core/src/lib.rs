//! Delay compensation for nonlinear sampled-data systems.
//!
//! The plant `dX/dt = f(X(t), U(t-D))` is stabilized by applying a nominal
//! feedback `kappa` to a prediction of the state `D` seconds ahead. This crate
//! provides:
//!
//! - [`dynamics`]: the plant interface and a small set of test plants,
//! - [`delayline`]: the gridded input history over the delay window,
//! - [`predictor`]: the exact implicit predictor (successive approximations),
//!   the inter-sample closed-loop flow, and their composition,
//! - [`surrogate`]: a trainable dense-network stand-in for either operator,
//!   with dataset generation, training, and serialization,
//! - [`bounds`]: the Lipschitz/error-bound calculus tying operator
//!   approximation error to closed-loop prediction error,
//! - [`simloop`]: the closed-loop simulator (exact baseline, multi-step
//!   surrogate under uniform sampling, predictor surrogate under bounded
//!   sampling) with logging and diagnostics,
//! - [`bench`]: wall-clock comparison of surrogate evaluation against the
//!   numerical predictor.

pub mod bench;
pub mod bounds;
pub mod delayline;
pub mod dynamics;
pub mod predictor;
pub mod simloop;
pub mod surrogate;
pub(crate) mod util;

pub use bounds::BoundSet;
pub use delayline::InputHistory;
pub use dynamics::{DomainBox, Plant, PlantSpec};
pub use predictor::{SolverConfig, Trajectory};
pub use simloop::{SimConfig, SimLog};
pub use surrogate::{OperatorDataset, OperatorKind, SurrogateModel};
