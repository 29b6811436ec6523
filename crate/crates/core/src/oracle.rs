//! Dense reference solver. Every verification in the crate measures
//! against this oracle, never against the reductions themselves.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::Svd;
use crate::lsa::LsaInstance;
use crate::sparse::{norm2, SparseMatrix};

/// Declared relative accuracy of the oracle's minimizer and projection.
pub const ORACLE_TOL: f64 = 1e-10;
/// Singular values at or below `σ_max · RANK_CUTOFF` are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-12;
pub const DEFAULT_ORACLE_CAP: usize = 2000;

/// Refinement sweeps applied to the pseudo-inverse solution.
const REFINE_STEPS: usize = 2;

#[derive(Debug, Clone)]
pub struct DenseOracleResult {
    /// Minimum-norm least-squares solution x*.
    pub minimizer: DVector<f64>,
    /// Π_A c.
    pub projection: DVector<f64>,
    /// ‖(I − Π_A)c‖.
    pub residual_norm: f64,
    pub sigma_max: f64,
    /// Smallest singular value above the cutoff (0 when the rank is 0).
    pub sigma_min_nonzero: f64,
    pub rank: usize,
}

impl DenseOracleResult {
    pub fn kappa(&self) -> f64 {
        if self.rank == 0 {
            1.0
        } else {
            self.sigma_max / self.sigma_min_nonzero
        }
    }
}

pub fn check_cap(a: &SparseMatrix, cap: usize) -> Result<()> {
    if a.nrows() > cap || a.ncols() > cap {
        return Err(Error::OracleCapExceeded { rows: a.nrows(), cols: a.ncols(), cap });
    }
    Ok(())
}

/// Min-norm least squares, projection and singular extremes of (A, c),
/// within the default cap.
pub fn project_and_solve(inst: &LsaInstance) -> Result<DenseOracleResult> {
    solve_dense(&inst.matrix, &inst.rhs, DEFAULT_ORACLE_CAP)
}

pub fn solve_dense(a: &SparseMatrix, c: &DVector<f64>, cap: usize) -> Result<DenseOracleResult> {
    if c.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!("rhs {} vs rows {}", c.len(), a.nrows())));
    }
    check_cap(a, cap)?;
    let svd = Svd::new(&a.to_dense());
    let rank = svd.rank(RANK_CUTOFF);
    let projection = svd.project(c, rank);
    let mut x = svd.solve(c, rank);
    for _ in 0..REFINE_STEPS {
        let r = a.residual(&x, c);
        x += svd.solve(&r, rank);
    }
    let residual_norm = norm2(&(c - &projection));
    Ok(DenseOracleResult {
        minimizer: x,
        projection,
        residual_norm,
        sigma_max: svd.sigma_max(),
        sigma_min_nonzero: if rank > 0 { svd.s[rank - 1] } else { 0.0 },
        rank,
    })
}

/// Relative size below which Aᵀc is treated as the zero vector.
pub const NORMAL_ZERO_TOL: f64 = 1e-13;

/// Does Aᵀc vanish (c ⟂ im(A))? Exact for integer data; relative to
/// ‖A‖_F‖c‖ otherwise. The MapSoln routines return 0 in this case.
pub fn normal_rhs_is_zero(a: &SparseMatrix, c: &DVector<f64>) -> bool {
    let at = a.transpose();
    let g = DVector::from_fn(at.nrows(), |j, _| crate::linalg::dot2(at.row(j).map(|(i, v)| (v, c[i]))));
    norm2(&g) <= NORMAL_ZERO_TOL * a.frobenius() * norm2(c)
}

/// Outcome of testing a candidate against the LSA inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsaCheck {
    pub ok: bool,
    /// ‖Ax − Π_A c‖ / ‖Π_A c‖, or ‖Ax‖/max(‖c‖, 1) when the projection vanishes.
    pub ratio: f64,
}

/// Is `x` an ε-approximate solution in the LSA sense? A vanishing
/// projection accepts exactly the x with Ax ≈ 0.
pub fn check_lsa_solution(inst: &LsaInstance, x: &DVector<f64>, oracle: &DenseOracleResult) -> Result<LsaCheck> {
    if x.len() != inst.ncols() || oracle.projection.len() != inst.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "x has {} entries, matrix has {} columns",
            x.len(),
            inst.ncols()
        )));
    }
    let pnorm = norm2(&oracle.projection);
    let cnorm = norm2(&inst.rhs);
    if pnorm <= ORACLE_TOL * cnorm || oracle.rank == 0 {
        let ratio = norm2(&inst.matrix.mul_vec(x)) / cnorm.max(1.0);
        return Ok(LsaCheck { ok: ratio <= ORACLE_TOL, ratio });
    }
    let ratio = norm2(&inst.matrix.residual(x, &oracle.projection)) / pnorm;
    Ok(LsaCheck { ok: ratio <= inst.epsilon, ratio })
}

/// The three error measures that coincide for least squares:
/// ‖AᵀAx − Aᵀc‖_{(AᵀA)†}, ‖Ax − Π_A c‖ and ‖x − x*‖_{AᵀA}.
pub fn error_metric_equivalence_check(inst: &LsaInstance, x: &DVector<f64>) -> Result<(f64, f64, f64)> {
    if x.len() != inst.ncols() {
        return Err(Error::DimensionMismatch("x length".into()));
    }
    check_cap(&inst.matrix, DEFAULT_ORACLE_CAP)?;
    let a = &inst.matrix;
    let svd = Svd::new(&a.to_dense());
    let rank = svd.rank(RANK_CUTOFF);
    // normal-equation residual in the pseudo-inverse norm: ‖Σ⁻¹Vᵀg‖
    let g = a.tr_mul_vec(&(-a.residual(x, &inst.rhs)));
    let mut e1 = 0.0;
    for k in 0..rank {
        let t = svd.v.column(k).dot(&g) / svd.s[k];
        e1 += t * t;
    }
    let projection = svd.project(&inst.rhs, rank);
    let e2 = norm2(&a.residual(x, &projection));
    let xstar = svd.solve(&inst.rhs, rank);
    let e3 = norm2(&a.mul_vec(&(x - xstar)));
    Ok((e1.sqrt(), e2, e3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_case() {
        let inst = LsaInstance::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[3.0, 4.0], 0.1).unwrap();
        let o = project_and_solve(&inst).unwrap();
        assert!((o.minimizer[0] - 3.0).abs() < 1e-14 && (o.minimizer[1] - 4.0).abs() < 1e-14);
        assert!(o.residual_norm < 1e-14);
        let chk = check_lsa_solution(&inst, &o.minimizer, &o).unwrap();
        assert!(chk.ok && chk.ratio < 1e-14);
    }

    #[test]
    fn zero_rhs() {
        let inst = LsaInstance::from_rows(&[vec![1.0, -1.0]], &[0.0], 0.5).unwrap();
        let o = project_and_solve(&inst).unwrap();
        assert_eq!(o.minimizer, DVector::zeros(2));
        assert_eq!(o.residual_norm, 0.0);
        let chk = check_lsa_solution(&inst, &DVector::zeros(2), &o).unwrap();
        assert!(chk.ok);
    }

    #[test]
    fn identity_metrics_equal_rhs_norm() {
        let inst = LsaInstance::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[3.0, 4.0], 0.1).unwrap();
        let (a, b, c) = error_metric_equivalence_check(&inst, &DVector::zeros(2)).unwrap();
        for v in [a, b, c] {
            assert!((v - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let a = SparseMatrix::zeros(5, 3);
        let err = solve_dense(&a, &DVector::zeros(5), 4).unwrap_err();
        assert!(matches!(err, Error::OracleCapExceeded { .. }));
    }
}
