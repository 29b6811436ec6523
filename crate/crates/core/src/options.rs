use serde::Serialize;

use crate::complexity::ConditionMode;
use crate::oracle::DEFAULT_ORACLE_CAP;

/// Knobs shared by the reductions that need spectral information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReduceOptions {
    /// How smallest singular values and condition numbers are obtained.
    /// σ_max always uses the decomposition-free upper bound.
    pub condition_mode: ConditionMode,
    pub oracle_cap: usize,
    /// Accept an all-zero appended column in G → Gz (intermediate chain
    /// instances only; a standalone call rejects it).
    pub allow_zero_sum_column: bool,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions {
            condition_mode: ConditionMode::Exact,
            oracle_cap: DEFAULT_ORACLE_CAP,
            allow_zero_sum_column: false,
        }
    }
}
