//! Fee-tier liquidity laboratory.
//!
//! Building blocks for studying how liquidity providers split across
//! otherwise-identical pools that differ only in their fee tier:
//!
//! - [`pool`] — concentrated-liquidity pool mechanics on a log-linear tick
//!   grid (deposits, multi-tick swaps, pro-rata fee accrual);
//! - [`range`] — a continuous model of repricing shocks and arbitrage flow
//!   where per-unit yields admit closed forms and the marginal provider is
//!   found in closed form;
//! - [`cycle`] — a deplete-and-refill model with heterogeneous provider
//!   sizes on a truncated Pareto distribution;
//! - [`sim`] — Monte Carlo simulators whose event processes match the two
//!   models, with prediction checks against the analytic solutions;
//! - [`analytics`] — event-stream analytics (adverse-flow cost, impermanent
//!   loss, provider cycle timing, a pool-day panel);
//! - [`router`] — optimal order splitting across pools with distinct fees.

pub mod analytics;
pub mod cycle;
pub mod numerics;
pub mod pool;
pub mod range;
pub mod router;
pub mod sim;

use thiserror::Error;

/// Error type shared by every module in this crate.
#[derive(Debug, Error)]
pub enum ModelError {
    /// A parameter or input failed validation. `field` names the offending
    /// input; `message` states the violated invariant.
    #[error("invalid `{field}`: {message}")]
    InvalidParam { field: &'static str, message: String },
    /// The model's standing assumptions cannot hold at these parameters.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// A swap asked for more than the posted liquidity can serve.
    #[error("insufficient depth: {0}")]
    InsufficientDepth(String),
    /// Malformed input data (event files, pool snapshots, configs).
    #[error("bad input: {0}")]
    Data(String),
}

impl ModelError {
    /// Shorthand for an invalid-parameter error.
    pub fn param(field: &'static str, message: impl Into<String>) -> Self {
        ModelError::InvalidParam {
            field,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
