//! Universal adversarial perturbations (UAPs) against differentiable
//! no-reference quality metrics, and an RD-curve based stability score that
//! rates how easily a metric is gamed by such a perturbation.
//!
//! The crate is organised bottom-up:
//!
//! - [`imaging`]: rasters, pixel math, perturbation application, file I/O.
//! - [`metrics`]: the metric abstraction, built-in differentiable toy metrics
//!   and the client side of the external metric bridge.
//! - [`attack`]: UAP training with Adam and the per-image MADC-style attack.
//! - [`codec`]: the mock DCT codec and the external encoder harness.
//! - [`stability`]: RD curves, normalisation, gains/losses, stability score
//!   and the end-to-end evaluation pipeline.

// `!(x <= bound)` is used deliberately so that NaN counts as out of range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod codec;
pub mod imaging;
pub mod metrics;
pub mod stability;
