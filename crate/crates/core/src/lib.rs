//! Fractional ridge (Fridge) regression.
//!
//! The Fridge penalty of target model size `m` is the sum of all products of
//! `m + 1` transformed coefficient magnitudes. It vanishes whenever at most
//! `m` coefficients are nonzero, so heavy regularization shrinks toward the
//! best `m`-variable model rather than toward the null model. `m = 0` is the
//! Lasso (or ridge, with the square component).
//!
//! Modules:
//! - [`penalty`]: forward/backward recursions, leave-one-out sums, derivatives.
//! - [`component`]: the per-coefficient map `g`.
//! - [`solvers`]: coordinate descent, reweighted Lasso/ridge, paths, KKT checks.
//! - [`selection`]: lambda grids, cross-validation, extreme Fridge, TMS choice, bootstrap.
//! - [`datagen`]: the simulation designs with exact signal-to-noise calibration.
//! - [`metrics`]: oracle error, selection accuracy, win rates.
//! - [`data`]: datasets, CSV input and standardization.
//! - [`report`] and [`experiment`]: result documents and Monte Carlo orchestration.

pub mod component;
pub mod data;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod penalty;
pub mod report;
pub mod rng;
pub mod selection;
pub mod solvers;

pub use component::ComponentKind;
pub use data::{Dataset, LinearModel};
pub use error::{FridgeError, Result};
pub use solvers::{FitConfig, FridgeFit, SolutionPath, SolverKind};
