//! The decision problem "is c (approximately) in im(A)?", an iterative
//! least-squares solver, and the instance family whose infeasibility is
//! exponentially small.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lsa::LsaInstance;
use crate::oracle::{solve_dense, DEFAULT_ORACLE_CAP};
use crate::sparse::{norm2, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LsdVerdict {
    pub answer: Answer,
    /// ‖Ax − c‖ / ‖c‖ for the LSA solution found (0 when c = 0).
    pub achieved_ratio: f64,
    pub epsilon: f64,
}

/// Solves the LSA instance with the dense oracle and answers yes iff
/// ‖Ax − c‖ ≤ ε‖c‖.
pub fn lsd_decide(inst: &LsaInstance) -> Result<LsdVerdict> {
    lsd_decide_capped(inst, DEFAULT_ORACLE_CAP)
}

pub fn lsd_decide_capped(inst: &LsaInstance, cap: usize) -> Result<LsdVerdict> {
    let o = solve_dense(&inst.matrix, &inst.rhs, cap)?;
    let cn = norm2(&inst.rhs);
    let achieved_ratio = if cn == 0.0 { 0.0 } else { norm2(&inst.matrix.residual(&o.minimizer, &inst.rhs)) / cn };
    let answer = if achieved_ratio <= inst.epsilon { Answer::Yes } else { Answer::No };
    Ok(LsdVerdict { answer, achieved_ratio, epsilon: inst.epsilon })
}

/// Like [`lsd_decide`], but finds x with the iterative solver (stopping at
/// relative normal residual `target`) instead of the dense oracle, so it
/// works beyond the oracle cap. Returns the verdict and the iteration count.
pub fn lsd_decide_iterative(inst: &LsaInstance, target: f64) -> Result<(LsdVerdict, usize)> {
    let sol = iterative_solve(&inst.matrix, &inst.rhs, target)?;
    let cn = norm2(&inst.rhs);
    let achieved_ratio = if cn == 0.0 { 0.0 } else { norm2(&inst.matrix.residual(&sol.x, &inst.rhs)) / cn };
    let answer = if achieved_ratio <= inst.epsilon { Answer::Yes } else { Answer::No };
    Ok((LsdVerdict { answer, achieved_ratio, epsilon: inst.epsilon }, sol.iterations))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterativeSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// ‖Aᵀ(c − Ax)‖ / ‖Aᵀc‖ at exit.
    pub relative_normal_residual: f64,
}

/// Iteration cap for a matrix with `cols` columns.
pub fn iteration_cap(cols: usize) -> usize {
    10 * cols + 1000
}

/// Conjugate gradients on AᵀAx = Aᵀc without forming AᵀA (CGLS). Stops
/// once ‖Aᵀ(c − Ax)‖ ≤ target·‖Aᵀc‖; starting from 0 the iterates stay in
/// im(Aᵀ), so singular systems converge to the minimum-norm solution.
pub fn iterative_solve(a: &SparseMatrix, c: &DVector<f64>, target: f64) -> Result<IterativeSolution> {
    if c.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!("rhs {} vs rows {}", c.len(), a.nrows())));
    }
    if target.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidInput(format!("target must be positive, got {target}")));
    }
    let cap = iteration_cap(a.ncols());
    let mut x = DVector::zeros(a.ncols());
    let mut r = c.clone();
    let mut s = a.tr_mul_vec(&r);
    let s0 = norm2(&s);
    if s0 == 0.0 {
        return Ok(IterativeSolution { x, iterations: 0, relative_normal_residual: 0.0 });
    }
    let mut p = s.clone();
    let mut gamma = s.dot(&s);
    for it in 1..=cap {
        let q = a.mul_vec(&p);
        let qq = q.dot(&q);
        if qq == 0.0 {
            break;
        }
        let step = gamma / qq;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &q, 1.0);
        // Recompute the residual now and then to stop drift.
        if it % 50 == 0 {
            r = a.residual(&x, c);
        }
        s = a.tr_mul_vec(&r);
        let rel = norm2(&s) / s0;
        if rel <= target {
            return Ok(IterativeSolution { x, iterations: it, relative_normal_residual: rel });
        }
        let gamma_new = s.dot(&s);
        p = &s + &p * (gamma_new / gamma);
        gamma = gamma_new;
    }
    let rel = norm2(&a.tr_mul_vec(&a.residual(&x, c))) / s0;
    if rel <= target {
        return Ok(IterativeSolution { x, iterations: cap, relative_normal_residual: rel });
    }
    Err(Error::MaxIterationsExceeded { cap, residual: rel })
}

/// (n+1)×n matrix with A_{i,i} = 2 and A_{i+1,i} = −1, right-hand side e₁.
pub fn bidiagonal_instance(n: usize, epsilon: f64) -> Result<LsaInstance> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    let mut t = Vec::with_capacity(2 * n);
    for i in 0..n {
        t.push((i, i, 2.0));
        t.push((i + 1, i, -1.0));
    }
    let a = SparseMatrix::from_triplets(n + 1, n, t)?;
    let mut c = DVector::zeros(n + 1);
    c[0] = 1.0;
    LsaInstance::new(a, c, epsilon)
}

/// The two closed forms for ‖(I − Π_A)c‖ of [`bidiagonal_instance`]:
/// (unit-norm null vector √(3/(4^{n+1} − 1)), 1/(2^{n+2} − 1)).
pub fn bidiagonal_residual_candidates(n: usize) -> (f64, f64) {
    let unit = (3.0 / (4f64.powi(n as i32 + 1) - 1.0)).sqrt();
    let other = 1.0 / (2f64.powi(n as i32 + 2) - 1.0);
    (unit, other)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consistent_and_orthogonal() {
        let inst = LsaInstance::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[3.0, -2.0], 0.1).unwrap();
        assert_eq!(lsd_decide(&inst).unwrap().answer, Answer::Yes);
        let inst = LsaInstance::from_rows(&[vec![1.0], vec![0.0]], &[0.0, 1.0], 0.5).unwrap();
        let v = lsd_decide(&inst).unwrap();
        assert_eq!(v.answer, Answer::No);
        assert!((v.achieved_ratio - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bidiagonal_residual_matches_unit_form() {
        for n in [3, 5, 8] {
            let inst = bidiagonal_instance(n, 1e-2).unwrap();
            let o = solve_dense(&inst.matrix, &inst.rhs, 100).unwrap();
            let (unit, other) = bidiagonal_residual_candidates(n);
            assert!((o.residual_norm - unit).abs() <= 1e-10 * unit);
            assert!((o.residual_norm - other).abs() > 1e-3 * unit);
        }
    }

    #[test]
    fn cgls_diagonal_converges_quickly() {
        let a = SparseMatrix::from_rows(&[vec![2.0, 0.0, 0.0], vec![0.0, 3.0, 0.0], vec![0.0, 0.0, 5.0]]);
        let c = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let s = iterative_solve(&a, &c, 1e-12).unwrap();
        assert!(s.iterations <= 3);
        assert!((s.x[2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn cgls_singular_consistent() {
        let a = SparseMatrix::from_rows(&[vec![1.0, -1.0, 0.0], vec![0.0, 1.0, -1.0]]);
        let c = DVector::from_vec(vec![1.0, 2.0]);
        let s = iterative_solve(&a, &c, 1e-12).unwrap();
        assert!(norm2(&a.residual(&s.x, &c)) < 1e-10);
        assert!(s.x.sum().abs() < 1e-10);
    }

    #[test]
    fn iterative_decision_agrees_with_oracle() {
        for n in [5, 10] {
            let inst = bidiagonal_instance(n, 1e-2).unwrap();
            let (v, iters) = lsd_decide_iterative(&inst, 1e-12).unwrap();
            let d = lsd_decide(&inst).unwrap();
            assert_eq!(v.answer, d.answer);
            assert!((v.achieved_ratio - d.achieved_ratio).abs() <= 1e-8 * d.achieved_ratio);
            assert!(iters <= iteration_cap(n));
        }
    }

    #[test]
    fn zero_rhs_needs_no_iterations() {
        let a = SparseMatrix::from_rows(&[vec![1.0]]);
        let s = iterative_solve(&a, &DVector::zeros(1), 1e-8).unwrap();
        assert_eq!(s.iterations, 0);
    }
}
