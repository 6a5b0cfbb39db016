//! Closed-form correctness and security expressions for the QOT protocol.
//!
//! The primary path is exact rational arithmetic over big integers; `float`
//! recomputes the same quantities in the log domain for cross-checking.

pub mod exact;
pub mod float;
mod formulas;
mod params;
mod report;

pub use exact::{rational_from_f64, ExactProb};
pub use formulas::{
    cheating_cost, epsilon_min, expected_click_ratio, p_bypass, p_bypass_all, p_cheat, p_decode_failure, p_fcorrect,
    p_fpass, CheatingCost, ClickRatioEstimate, S1Range,
};
pub use params::{AnalysisError, AnalysisParams};
pub use report::{max_p_e, p_failed, AnalysisReport, BoundSearch, FloatCheck, InputEcho, DEFAULT_FAILURE_BOUND};
