//! Finite-size key rates for continuous-variable QKD with two-mode squeezed
//! states, homodyne detection and reverse reconciliation.
//!
//! The crate covers the Gaussian state model, every tail bound that enters
//! the key length, the binned-outcome statistics, the optimiser over the
//! protocol settings, asymptotic benchmark rates and a Monte Carlo
//! simulator that checks the bounds empirically.

pub mod bounds;
pub mod discretization;
pub mod error;
pub mod gaussian;
pub mod keyrate;
pub mod pmf;
pub mod scan;
pub mod simulator;

pub use bounds::{LogBase, OverlapMode, PEStats, ProtocolParams, RoundCounts, SecurityBudget};
pub use error::{Error, Result};
pub use gaussian::{ChannelParams, Mode, Quadrature, Scaling, TwoModeCovariance};
pub use keyrate::{KeyRateOptions, KeyRateResult, OptimizerSettings, ZeroKeyReason};
