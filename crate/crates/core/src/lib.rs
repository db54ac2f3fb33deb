//! Encoded-feature restriction losses for style-code encoders.
//!
//! The crate provides:
//!
//! * [`restriction`]: per-sample KL, batch KL, correlation and
//!   Gaussian-histogram imitation losses, each with an analytic gradient
//!   with respect to the feature batch;
//! * [`histogram`]: differentiable soft histograms and their KL divergence;
//! * [`translation`]: the least-squares adversarial, L1, regression and
//!   class terms and the weighted total objective;
//! * [`prdc`]: precision / recall / density / coverage with a brute-force
//!   reference;
//! * [`lab`]: a small deterministic training lab contrasting per-sample KL
//!   with the batch-level restrictions;
//! * [`numeric`], [`io`], [`report`]: batch statistics, finite-difference
//!   checking, feature files and report bundles.

pub mod error;
pub mod histogram;
pub mod io;
pub mod lab;
pub mod numeric;
pub mod prdc;
pub mod report;
pub mod restriction;
pub mod translation;

pub use error::{Error, Result};
pub use numeric::{FeatureBatch, Matrix};
