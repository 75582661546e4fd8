//! Bayesian clustering with a Gaussian latent factor model whose mixture
//! locations follow an anisotropic determinantal point process prior.
//!
//! The crate is organized bottom-up:
//!
//! - [`lowrank`]: densities with covariance `Σ + ΛΔΛᵀ` through Woodbury.
//! - [`dpp`]: anisotropic DPP kernels, truncated densities and `Λ`-gradients.
//! - [`model`]: hyperparameters, sampler state and data preparation.
//! - [`gibbs`]: the blocked Gibbs sampler and its random variate generators.
//! - [`simdata`]: synthetic benchmark generators.
//! - [`postproc`]: partition estimates, scores and WAIC.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dpp;
pub mod error;
pub mod gibbs;
pub mod linalg;
pub mod lowrank;
pub mod model;
pub mod postproc;
pub mod simdata;
pub mod special;

pub use error::{Error, Result};
