//! Strict MC2 → integer strict MC2: scale by a power of two and round
//! every row magnitude up.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::singular_values;
use crate::mc2::{Mc2Row, Mc2System};
use crate::oracle::check_cap;
use crate::strictify::{first_non_strict_edge, structural_nullity};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegerizeCertificate {
    /// Rounding exponent ⌈log₂(nnz/ε)⌉ + 2.
    pub k: i32,
    /// Pre-scaling exponent: 2^p·(smallest row scale) ≥ 1.
    pub p: i32,
    /// Total factor 2^{p+k} applied to the matrix and the right-hand side.
    pub scale: f64,
    pub eps_in: f64,
    pub eps_out: f64,
}

fn ceil_log2_f(x: f64) -> i32 {
    x.log2().ceil() as i32
}

/// Each row √w·m·pattern becomes ⌈2^{p+k}·√w·|m|⌉·sign(m)·pattern with
/// unit weight; the right-hand side is multiplied by 2^{p+k} exactly.
pub fn integerize(system: &Mc2System, eps_in: f64) -> Result<(Mc2System, IntegerizeCertificate)> {
    if let Some((i, j)) = first_non_strict_edge(system) {
        return Err(Error::NotStrict(i, j));
    }
    if !(eps_in > 0.0 && eps_in.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {eps_in}")));
    }
    for (k, r) in system.rows.iter().enumerate() {
        if r.weight_sq.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::NonPositiveWeight { row: k, weight: r.weight_sq });
        }
    }
    let min_scale = system.rows.iter().map(|r| r.scale().abs()).fold(f64::INFINITY, f64::min);
    let p = if min_scale.is_finite() { ceil_log2_f(1.0 / min_scale).max(0) } else { 0 };
    let k = ceil_log2_f(system.nnz().max(1) as f64 / eps_in) + 2;
    let scale = 2f64.powi(p + k);
    let rows = system
        .rows
        .iter()
        .map(|r| {
            let m = (r.scale().abs() * scale).ceil() * r.magnitude.signum();
            Mc2Row { magnitude: m, weight_sq: 1.0, rhs: r.rhs * scale, ..r.clone() }
        })
        .collect();
    let out = Mc2System { num_blocks: system.num_blocks, rows, alpha: system.alpha };
    Ok((out, IntegerizeCertificate { k, p, scale, eps_in, eps_out: eps_in / 3.0 }))
}

/// The identity: LSA solutions are invariant under scaling the system.
pub fn mapback_int(x: &DVector<f64>) -> DVector<f64> {
    x.clone()
}

/// Per-row ratio ŵ/w of the rounded to the exact (pre-scaled) row
/// magnitude; lies in [1, 1 + 2^{−k}] when every scaled row is ≥ 1.
pub fn weight_ratios(strict: &Mc2System, int: &Mc2System, cert: &IntegerizeCertificate) -> Vec<f64> {
    strict
        .rows
        .iter()
        .zip(&int.rows)
        .map(|(s, t)| {
            let exact = s.scale().abs() * 2f64.powi(cert.p);
            let rounded = t.magnitude.abs() * 2f64.powi(-cert.k);
            (rounded / exact).powi(2)
        })
        .collect()
}

/// Extreme nonzero eigenvalues of M = 4^p·(B>0)ᵀB>0 and of
/// M̂ = 4^{−k}·B_intᵀB_int, with the null space sized structurally. The
/// eigenvalues are squared singular values of the scaled matrices, which
/// keeps the δ²-sized bottom of the spectrum above rounding noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectraReport {
    pub lambda_max_m: f64,
    pub lambda_min_m: f64,
    pub lambda_max_mhat: f64,
    pub lambda_min_mhat: f64,
    /// 1 + 2^{−k+2}.
    pub factor: f64,
    /// Allowance for SVD rounding at the top of the spectrum.
    pub slack_upper: f64,
    /// Allowance for SVD rounding at the bottom of the spectrum.
    pub slack_lower: f64,
    /// Absolute accuracy of the singular values of the scaled B>0.
    pub resolution: f64,
    /// Smallest nonzero singular value of the scaled B>0.
    pub sigma_min_m: f64,
}

impl SpectraReport {
    pub fn upper_ok(&self) -> bool {
        self.lambda_max_mhat <= self.factor * self.lambda_max_m + self.slack_upper
    }

    pub fn lower_ok(&self) -> bool {
        self.lambda_min_mhat >= self.lambda_min_m - self.slack_lower
    }

    /// False when the bottom of the spectrum is within rounding noise, in
    /// which case the lower check and both κ values carry no information.
    pub fn resolved(&self) -> bool {
        self.sigma_min_m > 2.0 * self.resolution
    }

    pub fn kappa_m(&self) -> f64 {
        self.lambda_max_m / self.lambda_min_m
    }

    pub fn kappa_mhat(&self) -> f64 {
        self.lambda_max_mhat / self.lambda_min_mhat
    }
}

/// Backward-error allowance of a dense SVD, in units of dim·u·σ_max.
pub const EIGEN_SLACK_FACTOR: f64 = 64.0;

pub fn integerize_spectra(
    strict: &Mc2System,
    int: &Mc2System,
    cert: &IntegerizeCertificate,
    cap: usize,
) -> Result<SpectraReport> {
    let (b, _) = strict.materialize();
    let (bi, _) = int.materialize();
    check_cap(&b, cap)?;
    let dim = strict.ncols();
    let nullity = structural_nullity(strict)?;
    if nullity >= dim {
        return Err(Error::InvalidInput("system has no nonzero eigenvalues".into()));
    }
    let r = dim - nullity;
    let s = singular_values(&(b.to_dense() * 2f64.powi(cert.p)));
    let sh = singular_values(&(bi.to_dense() * 2f64.powi(-cert.k)));
    if s.len() < r || sh.len() < r {
        return Err(Error::InvalidInput("fewer rows than nonzero eigenvalues".into()));
    }
    let tol = EIGEN_SLACK_FACTOR * dim as f64 * f64::EPSILON * s[0];
    Ok(SpectraReport {
        lambda_max_m: s[0] * s[0],
        lambda_min_m: s[r - 1] * s[r - 1],
        lambda_max_mhat: sh[0] * sh[0],
        lambda_min_mhat: sh[r - 1] * sh[r - 1],
        factor: 1.0 + 2f64.powi(-cert.k + 2),
        slack_upper: 2.0 * s[0] * tol + tol * tol,
        slack_lower: 2.0 * s[r - 1] * tol,
        resolution: tol,
        sigma_min_m: s[r - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc2::{RowKind, RowRole};

    fn strict_edge(scale: f64) -> Mc2System {
        Mc2System {
            num_blocks: 2,
            rows: vec![
                Mc2Row { rhs: 1.0, role: RowRole::Main, ..Mc2Row::new(RowKind::Type1, 0, 1, scale) },
                Mc2Row::new(RowKind::Type2, 0, 1, 1.0),
                Mc2Row { weight_sq: 0.25, ..Mc2Row::new(RowKind::Type12, 0, 1, -1.0) },
            ],
            alpha: 1.0,
        }
    }

    #[test]
    fn exponents_and_rounding() {
        let (out, cert) = integerize(&strict_edge(1.5), 0.5).unwrap();
        assert_eq!(cert.p, 1);
        assert_eq!(cert.k, 6);
        assert!(out.rows.iter().all(|r| r.magnitude.fract() == 0.0 && r.weight_sq == 1.0));
        assert_eq!(out.rows[0].rhs, cert.scale);
        assert_eq!(out.rows[2].magnitude, -cert.scale / 2.0);
        assert_eq!(cert.eps_out, 0.5 / 3.0);
    }

    #[test]
    fn integer_rows_scale_exactly() {
        let (out, cert) = integerize(&strict_edge(3.0), 0.5).unwrap();
        assert_eq!(out.rows[0].magnitude, 3.0 * cert.scale);
    }

    #[test]
    fn refuses_non_strict_and_zero_weights() {
        let mut sys = strict_edge(1.0);
        sys.rows.pop();
        assert_eq!(integerize(&sys, 0.5).unwrap_err(), Error::NotStrict(0, 1));
        let mut sys = strict_edge(1.0);
        sys.rows.push(Mc2Row { weight_sq: 0.0, ..Mc2Row::new(RowKind::Type1, 0, 1, 1.0) });
        assert!(matches!(integerize(&sys, 0.5), Err(Error::NonPositiveWeight { row: 3, .. })));
    }

    #[test]
    fn sandwich_on_tiny_system() {
        let sys = strict_edge(1.3);
        let (out, cert) = integerize(&sys, 0.5).unwrap();
        let r = integerize_spectra(&sys, &out, &cert, 100).unwrap();
        assert!(r.upper_ok() && r.lower_ok());
        assert!(weight_ratios(&sys, &out, &cert).iter().all(|&q| (1.0..=r.factor).contains(&q)));
    }

    #[test]
    fn mapback_is_identity() {
        let x = DVector::from_vec(vec![1.0, -2.0]);
        assert_eq!(mapback_int(&x), x);
        assert_eq!(mapback_int(&DVector::zeros(3)), DVector::zeros(3));
    }
}
