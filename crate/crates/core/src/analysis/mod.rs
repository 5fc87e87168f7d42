//! Verification layer: regret, online stability, contraction estimates and
//! the switched contraction chain, all computed over recorded runs.

mod chain;
mod contraction;
mod optimum;
mod regret;
mod replay;

pub use chain::{certify_switching_chain, ChainReport};
pub use contraction::{
    estimate_beta, estimate_contraction, estimate_mu, v_distance, BetaEstimate, ContractionEstimate, Sampling,
};
pub use optimum::{batch_optimum, GdBudget, Optimum};
pub use regret::{regret, stability_series, write_regret_csv, RegretReport, Stability};
pub use replay::Replay;
