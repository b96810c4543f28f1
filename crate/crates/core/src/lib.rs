//! Markovian approximation of Riemann-Liouville fractional Brownian motion.
//!
//! The Volterra process `W^H_t = ∫_0^t (t-s)^(H-1/2) dW_s` with `H ∈ (0, 1/2)` is
//! written as an integral over Ornstein-Uhlenbeck processes indexed by their
//! speed of mean reversion. Discretizing that integral with Gauss rules on a
//! geometric grid of speeds gives a finite sum of OU processes,
//!
//! ```text
//! W^{H,n}_t = Σ_j w_j ∫_0^t exp(-(t-s) x_j) dW_s,
//! ```
//!
//! which converges to `W^H` in `L^2` at a polynomial rate that grows linearly
//! with the number of points per interval.
//!
//! Modules:
//!
//! * [`quadrature`] builds the grid and the weighted Gauss rules.
//! * [`analysis`] evaluates the strong error in closed form and fits rates.
//! * [`simulate`] samples the OU lift exactly on a time grid, plus an exact
//!   Cholesky sampler of `W^H` used as a reference.
//! * [`bergomi`] prices puts and calls in the rough Bergomi model driven by
//!   either process.
//! * [`cli`] is the command-line front end used by the `ou-lift` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Reference constants keep all the digits they were computed with.
#![allow(clippy::excessive_precision)]

pub mod analysis;
pub mod bergomi;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod special;

pub use analysis::{error_sweep, fit_rate, l2_error, predicted_rate, ErrorRecord, RateFit};
pub use bergomi::{
    call_via_parity, put_price, simulate_terminal_prices, simulate_terminal_prices_common,
    PricingConfig, PricingResult, TerminalSamples, VolSource,
};
pub use error::{Error, Result};
pub use quadrature::{
    build_scheme, gauss_rule_weighted, geometric_grid, weighted_moments, GeometricGrid,
    ModelParams, QuadratureScheme,
};
pub use simulate::{
    exact_rl_fbm, increment_model, joint_terminal_error_mc, lift_from_path, simulate_lift,
    IncrementModel, LiftPathBatch,
};
