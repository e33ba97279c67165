//! Analysis of algorithm-portfolio selection accuracy.
//!
//! Given a table of per-instance scores for competing algorithms this crate
//! computes oracle (virtual-best) selections, simulates selectors that pick
//! the best algorithm only some of the time, and derives the smallest
//! selector accuracy that is still guaranteed to match the best single
//! algorithm.
//!
//! - [`score_model`]: score matrices, per-algorithm statistics, binarization,
//!   oracle selection and computation costs.
//! - [`metrics`]: pixel-overlap scores for label maps.
//! - [`selector_sim`]: worst-case enumeration, seeded Monte Carlo trials and
//!   accuracy sweeps.
//! - [`bounds`]: minimal-accuracy bounds for binary and real-valued scores.
//! - [`asm`]: the iterative select / verify / hypothesize loop over
//!   pluggable components.

pub mod asm;
pub mod bounds;
pub mod error;
pub mod metrics;
pub mod score_model;
pub mod selector_sim;

pub use bounds::{binary_min_accuracy, lemma_min_accuracy, BoundMode, BoundReport};
pub use error::{Error, Result};
pub use metrics::{count_pixels, f_measure, reduced_f, LabelMap, PixelCounts};
pub use score_model::{
    anti_oracle_selection, binarize, column_stats, oracle_selection, total_cost, AlgorithmStats,
    CostModel, ScoreMatrix, SelectionVector,
};
pub use selector_sim::{
    enumerate_error_cases, run_trials, sweep, variance, ErrorModel, SelectorConfig, SweepCurve,
    SweepPoint, TrialOutcome, WrongPick,
};
