//! Sparse parameter complexity (s, U, K, 1/ε) and cheap singular-value bounds.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lsa::LsaInstance;
use crate::oracle::{self, DEFAULT_ORACLE_CAP};
use crate::sparse::SparseMatrix;

/// Where the condition number K comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum ConditionMode {
    /// Dense oracle (σ_max / smallest nonzero σ).
    #[default]
    Exact,
    /// Caller-supplied value, trusted as is.
    Declared(f64),
    /// Rigorous over-estimate that never touches a decomposition.
    Bound,
}

impl FromStr for ConditionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ConditionMode::Exact),
            "bound" => Ok(ConditionMode::Bound),
            _ => match s.strip_prefix("declared:") {
                Some(k) => {
                    let k: f64 = k.parse().map_err(|_| Error::InvalidInput(format!("bad declared condition '{k}'")))?;
                    if !(k >= 1.0 && k.is_finite()) {
                        return Err(Error::InvalidInput(format!("declared condition must be >= 1, got {k}")));
                    }
                    Ok(ConditionMode::Declared(k))
                }
                None => Err(Error::InvalidInput(format!("unknown condition mode '{s}'"))),
            },
        }
    }
}

impl fmt::Display for ConditionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionMode::Exact => write!(f, "exact"),
            ConditionMode::Bound => write!(f, "bound"),
            ConditionMode::Declared(k) => write!(f, "declared:{k}"),
        }
    }
}

/// The tuple (s, U, K, 1/ε).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SparseComplexity {
    pub nnz: usize,
    pub magnitude: f64,
    pub condition: f64,
    pub inv_epsilon: f64,
}

/// Bracketing information for σ_max(A) that needs no decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaBounds {
    /// √(‖A‖₁‖A‖_∞) ≥ σ_max.
    pub sigma_max_upper: f64,
    /// ‖A‖_F² / min(m, n) ≤ λ_max(AᵀA).
    pub lambda_max_lower: f64,
}

impl SigmaBounds {
    pub fn sigma_max_lower(&self) -> f64 {
        self.lambda_max_lower.sqrt()
    }
}

pub fn sigma_bounds(a: &SparseMatrix) -> Result<SigmaBounds> {
    if a.nnz() == 0 {
        return Err(Error::ZeroMatrix);
    }
    let k = a.nrows().min(a.ncols()) as f64;
    let f = a.frobenius();
    Ok(SigmaBounds { sigma_max_upper: (a.norm_1() * a.norm_inf()).sqrt(), lambda_max_lower: f * f / k })
}

/// Bound-mode σ_max: the upper end of [`sigma_bounds`].
pub fn sigma_max_bound(a: &SparseMatrix) -> Result<f64> {
    Ok(sigma_bounds(a)?.sigma_max_upper)
}

/// Number of binary digits after the point needed to write `v` exactly.
fn fractional_bits(v: f64) -> i64 {
    if v == 0.0 || v.fract() == 0.0 {
        return 0;
    }
    let bits = v.abs().to_bits();
    let exp_field = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if exp_field == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp_field - 1075) };
    let e = exp + mant.trailing_zeros() as i64;
    (-e).max(0)
}

/// Rigorous lower bound on the smallest nonzero singular value.
///
/// Every double is a dyadic rational, so 2^F·A is an integer matrix for the
/// largest fractional bit count F. For an integer matrix of rank r the
/// product of the nonzero σ² is a sum of squared r×r minors, hence ≥ 1,
/// which gives σ_min ≥ σ_max^{−(r−1)}. The result may underflow to 0.
pub fn sigma_min_lower_bound(a: &SparseMatrix) -> Result<f64> {
    let upper = sigma_max_bound(a)?;
    let f = a.triplets().map(|(_, _, v)| fractional_bits(v)).max().unwrap_or(0) as f64;
    let scaled = (upper.log2() + f).max(0.0);
    let r = a.nrows().min(a.ncols()).max(1) as f64;
    Ok((-f - (r - 1.0) * scaled).exp2())
}

/// Bound-mode condition number: σ_max upper bound over σ_min lower bound.
pub fn condition_bound(a: &SparseMatrix) -> Result<f64> {
    let lo = sigma_min_lower_bound(a)?;
    let up = sigma_max_bound(a)?;
    Ok(if lo > 0.0 { (up / lo).max(1.0) } else { f64::INFINITY })
}

/// σ_max and K of a matrix under the given mode. σ_max is always the
/// bound-mode value unless the mode is exact.
pub fn condition_number(a: &SparseMatrix, mode: ConditionMode, cap: usize) -> Result<f64> {
    if a.nnz() == 0 {
        return Err(Error::ZeroMatrix);
    }
    match mode {
        ConditionMode::Declared(k) => Ok(k),
        ConditionMode::Bound => condition_bound(a),
        ConditionMode::Exact => {
            let o = oracle::solve_dense(a, &nalgebra::DVector::zeros(a.nrows()), cap)?;
            Ok(o.kappa())
        }
    }
}

/// Smallest nonzero singular value under the given mode. Declared mode
/// pairs the declared K with the bound-mode σ_max.
pub fn sigma_min(a: &SparseMatrix, mode: ConditionMode, cap: usize) -> Result<f64> {
    match mode {
        ConditionMode::Exact => {
            let o = oracle::solve_dense(a, &nalgebra::DVector::zeros(a.nrows()), cap)?;
            Ok(o.sigma_min_nonzero)
        }
        ConditionMode::Bound => sigma_min_lower_bound(a),
        ConditionMode::Declared(k) => Ok(sigma_max_bound(a)? / k),
    }
}

/// U = max(‖A‖_max, ‖c‖_max, 1/anzmin(A), 1/anzmin(c)); a zero c
/// contributes nothing.
pub fn magnitude(inst: &LsaInstance) -> Result<f64> {
    let amin = inst.matrix.min_abs_nonzero().ok_or(Error::ZeroMatrix)?;
    let mut u = inst.matrix.max_abs().max(1.0 / amin);
    let cmax = inst.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    u = u.max(cmax);
    if let Some(cmin) = inst.rhs.iter().filter(|v| **v != 0.0).map(|v| v.abs()).reduce(f64::min) {
        u = u.max(1.0 / cmin);
    }
    Ok(u)
}

pub fn measure_complexity(inst: &LsaInstance, mode: ConditionMode) -> Result<SparseComplexity> {
    measure_complexity_capped(inst, mode, DEFAULT_ORACLE_CAP)
}

pub fn measure_complexity_capped(inst: &LsaInstance, mode: ConditionMode, cap: usize) -> Result<SparseComplexity> {
    Ok(SparseComplexity {
        nnz: inst.matrix.nnz(),
        magnitude: magnitude(inst)?,
        condition: condition_number(&inst.matrix, mode, cap)?,
        inv_epsilon: 1.0 / inst.epsilon,
    })
}
