//! Shape-constrained and smoothed maximum likelihood estimation for current
//! status and incubation-time data.
//!
//! The crate covers the nonparametric MLEs (greatest convex minorant and the
//! iterative convex minorant algorithm), their kernel-smoothed versions,
//! smoothed-bootstrap bandwidth selection and confidence bands, parametric
//! competitors, smooth functionals with integral-equation variances, and
//! seeded simulation drivers.

pub mod bandwidth;
pub mod bootstrap;
pub mod confidence;
pub mod current_status;
pub mod error;
pub mod functionals;
pub mod gcm;
pub mod incubation;
pub mod io;
pub mod kernel;
pub mod nelder_mead;
pub mod parametric;
pub mod quad;
pub mod rng;
pub mod sim;
pub mod smle;
pub mod stats;
pub mod step;

pub use current_status::{cs_mle, CurrentStatusData};
pub use error::{Error, Result};
pub use gcm::{gcm_slopes, pava_weighted, CusumDiagram, SlopeVector};
pub use incubation::{inc_mle, IncubationData};
pub use kernel::{kernel_eval, KernelSpec};
pub use smle::{smle_eval, Bandwidth, SmleCurve};
pub use step::StepDistribution;
