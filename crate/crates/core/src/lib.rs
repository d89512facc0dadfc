//! Classification of output trajectories of autonomous discrete-time linear
//! systems.
//!
//! Two systems `x(t+1) = A_i x(t)`, `y(t) = C_i x(t)` generate length-`N`
//! output sequences `Y`. When the observability ranges intersect only at the
//! origin, the quadratic form `Yᵀ(Q1 − Q2)Y` separates the two trajectory sets
//! exactly ([`modelbased`]). The same classifier is linear in the lifted
//! features `Y ⊗ Y`, which is where a through-origin SVM trained from data
//! operates ([`svm`]); [`margin`] bounds its margin by the principal angles
//! between the two ranges.

pub mod error;
pub mod experiments;
pub mod margin;
pub mod modelbased;
pub mod numerics;
pub mod svm;
pub mod sysmodel;
pub mod trajectories;

pub use error::{Error, Result};
pub use numerics::Matrix;
pub use sysmodel::{ContinuousSiso, LinearSystem, StateSpace};
pub use trajectories::{Dataset, Label, Trajectory};
