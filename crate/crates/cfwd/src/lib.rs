//! Simulation and Monte-Carlo verification toolkit for one-dimensional
//! sticky-reflected particle systems with coalescence and fragmentation.
//!
//! The state of the system is a cloud of massive particles on the line,
//! equivalently a monotone step function on `[0,1]` (the quantile function of
//! the empirical measure). The crate provides:
//!
//! * exact calculus on monotone step functions ([`step_fn`], [`partition`],
//!   [`isotonic`]);
//! * sampling and bound checks for the system's sigma-finite invariant
//!   measure on step functions ([`xi`]);
//! * time integration of the interacting SDE with mass-weighted cluster
//!   projections ([`dynamics`]);
//! * the quantile/measure dictionary and 1-d quadratic Wasserstein distance
//!   ([`wasserstein`]);
//! * statistical verification suites: martingale problems, integration by
//!   parts, short-time asymptotics, Bernstein approximation ([`verify`],
//!   [`diffops`], [`bernstein`]);
//! * a reproducible experiment CLI ([`config`], [`output`]).

pub mod bernstein;
pub mod config;
pub mod diffops;
pub mod dynamics;
pub mod error;
pub mod isotonic;
pub mod output;
pub mod partition;
pub mod seed;
pub mod stats;
pub mod step_fn;
pub mod testfn;
pub mod verify;
pub mod wasserstein;
pub mod xi;

pub use error::{Error, Result};
