//! Numerical library for the BOLT loss family: Bayes-error bounds and
//! plug-in estimators, exact divergence oracles (TV, W1, prior-weighted
//! gaps), and BOLT-GAN / WGAN-GP adversarial training at desk scale.
//!
//! The crate is organized around seven pieces:
//!
//! - [`autodiff`]: reverse-mode AD over dense `f64` arrays with support for
//!   differentiating through gradients (needed by gradient penalties).
//! - [`nn`]: small MLPs, Adam, weight clipping, EMA, Lipschitz bookkeeping.
//! - [`problems`]: synthetic binary classification problems with exact
//!   densities, samplers, and a Bayes-error oracle.
//! - [`bolt`]: the BOLT loss, bound, optimal bounding function, plug-in
//!   MAP classifier, and the hinge Bayes-error estimator.
//! - [`divergences`]: exact TV / W1 / prior-weighted gap oracles backed by
//!   a dense simplex LP solver, plus a Fréchet-Gaussian proxy metric.
//! - [`gan`]: the BOLT-GAN training loop with gradient penalty and the
//!   WGAN-GP baseline, with per-step diagnostics.
//! - [`suites`]: executable property suites covering the bound, the TV and
//!   W1 identities, and the Lipschitz machinery (driven by `bolt verify`).

// `!(x > 0.0)`-style comparisons are deliberate: they treat NaN as
// out-of-range instead of silently accepting it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// reference constants in tests keep their full published precision
#![allow(clippy::excessive_precision)]

pub mod autodiff;
pub mod bolt;
pub mod divergences;
pub mod gan;
pub mod nn;
pub mod problems;
pub mod seed;
pub mod suites;
