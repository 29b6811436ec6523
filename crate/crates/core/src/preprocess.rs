//! Front of the chain: G → Gz (zero row sums) and Gz → Gz2 (positive
//! coefficients of every row sum to a power of two).

use nalgebra::DVector;
use serde::Serialize;

use crate::complexity::{sigma_max_bound, sigma_min};
use crate::error::{Error, Result};
use crate::lsa::LsaInstance;
use crate::options::ReduceOptions;
use crate::oracle::normal_rhs_is_zero;
use crate::sparse::{norm2, SparseMatrix};

/// Instance whose rows all sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GzInstance {
    pub inner: LsaInstance,
}

/// Zero-row-sum instance whose positive row parts sum to powers of two.
#[derive(Debug, Clone, PartialEq)]
pub struct Gz2Instance {
    pub inner: LsaInstance,
}

impl GzInstance {
    pub fn new(inner: LsaInstance) -> Result<Self> {
        check_gz(&inner.matrix)?;
        Ok(GzInstance { inner })
    }
}

impl Gz2Instance {
    pub fn new(inner: LsaInstance) -> Result<Self> {
        check_gz(&inner.matrix)?;
        for i in 0..inner.nrows() {
            let pos: f64 = inner.matrix.row(i).filter(|e| e.1 > 0.0).map(|e| e.1).sum();
            if !is_power_of_two(pos) {
                return Err(Error::NotGz2 { row: i, reason: format!("positive part sums to {pos}") });
            }
        }
        Ok(Gz2Instance { inner })
    }
}

fn check_gz(a: &SparseMatrix) -> Result<()> {
    if let Some((row, col, value)) = a.first_non_integer() {
        return Err(Error::NotIntegerMatrix { row, col, value });
    }
    for i in 0..a.nrows() {
        let s = a.row_sum(i);
        if s != 0.0 {
            return Err(Error::NotZeroRowSum { row: i, sum: s });
        }
    }
    Ok(())
}

/// Exact test for 2^k with k ≥ 0.
pub fn is_power_of_two(x: f64) -> bool {
    x >= 1.0 && x.fract() == 0.0 && {
        let (m, _) = frexp(x);
        m == 0.5
    }
}

fn frexp(x: f64) -> (f64, i32) {
    let e = x.abs().log2().floor() as i32 + 1;
    let mut m = x / 2f64.powi(e);
    let mut e = e;
    // guard against log2 rounding at exact powers
    if m.abs() >= 1.0 {
        m /= 2.0;
        e += 1;
    } else if m.abs() < 0.5 {
        m *= 2.0;
        e -= 1;
    }
    (m, e)
}

/// Smallest k ≥ 0 with 2^k ≥ x.
pub fn ceil_log2(x: f64) -> i32 {
    let mut k = 0;
    while 2f64.powi(k) < x {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PreprocessStage {
    GToGz,
    GzToGz2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreprocessCertificate {
    pub stage: PreprocessStage,
    /// Columns of the stage input.
    pub original_cols: usize,
    pub w: Option<f64>,
    pub a_vec: Option<Vec<f64>>,
    pub k_star: Option<i32>,
    /// Rows whose exponent had to be raised above k* to keep a_i ≥ 0.
    pub fallback_rows: Vec<usize>,
    pub eps_in: f64,
    pub eps_out: f64,
    /// Upper bound on σ_max used in the formulas.
    pub sigma_used: f64,
    /// G → Gz only: σ_min(A_Z) as obtained under the condition mode.
    pub sigma_min_used: Option<f64>,
}

/// (A, c, ε) ↦ ((A | −A·1), c, ε/(√(n+1)·κ_ratio)) with
/// κ_ratio = σ̂_max(A)·√(n+1)/σ_min(A_Z).
pub fn reduce_g_to_gz(inst: &LsaInstance, opts: &ReduceOptions) -> Result<(GzInstance, PreprocessCertificate)> {
    inst.check_class_g()?;
    let a = &inst.matrix;
    let n = a.ncols();
    let mut t: Vec<(usize, usize, f64)> = a.triplets().collect();
    for i in 0..a.nrows() {
        t.push((i, n, -a.row_sum(i)));
    }
    let az = SparseMatrix::from_triplets(a.nrows(), n + 1, t)?;
    if !opts.allow_zero_sum_column && !az.column_used()[n] {
        return Err(Error::EmptyRowOrColumn { what: "column", index: n });
    }
    let sigma_a = sigma_max_bound(a)?;
    let smin_z = sigma_min(&az, opts.condition_mode, opts.oracle_cap)?;
    let root = ((n + 1) as f64).sqrt();
    let kappa_ratio = sigma_a * root / smin_z;
    let eps_out = inst.epsilon / (root * kappa_ratio);
    let gz = GzInstance::new(LsaInstance::new(az, inst.rhs.clone(), eps_out)?)?;
    let cert = PreprocessCertificate {
        stage: PreprocessStage::GToGz,
        original_cols: n,
        w: None,
        a_vec: None,
        k_star: None,
        fallback_rows: Vec::new(),
        eps_in: inst.epsilon,
        eps_out,
        sigma_used: sigma_a,
        sigma_min_used: Some(smin_z),
    };
    Ok((gz, cert))
}

/// x = x_Z[1..n] − x_Z[n+1]·1.
pub fn mapback_gz(a: &SparseMatrix, x_z: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    if x_z.len() != n + 1 {
        return Err(Error::DimensionMismatch(format!("x_z has {} entries, expected {}", x_z.len(), n + 1)));
    }
    Ok(DVector::from_fn(n, |i, _| x_z[i] - x_z[n]))
}

/// Appends columns (a, −a) and the row (0 … 0, w, −w) so that every row's
/// positive part sums to a power of two.
pub fn reduce_gz_to_gz2(inst: &GzInstance, opts: &ReduceOptions) -> Result<(Gz2Instance, PreprocessCertificate)> {
    let _ = opts;
    let az = &inst.inner.matrix;
    let c = &inst.inner.rhs;
    let eps_in = inst.inner.epsilon;
    let (m, n) = (az.nrows(), az.ncols());
    if az.nnz() == 0 {
        return Err(Error::ZeroMatrix);
    }
    let k_star = ceil_log2(az.max_abs());
    let mut a_vec = Vec::with_capacity(m);
    let mut fallback_rows = Vec::new();
    for i in 0..m {
        let half = az.row_l1(i) / 2.0;
        let mut ai = 2f64.powi(k_star) - half;
        if ai < 0.0 {
            ai = 2f64.powi(ceil_log2(half)) - half;
            fallback_rows.push(i);
        }
        a_vec.push(ai);
    }
    let sigma = sigma_max_bound(az)?;
    let cnorm = norm2(c);
    let anorm = a_vec.iter().map(|v| v * v).sum::<f64>().sqrt();
    let eps_out = if cnorm > 0.0 { eps_in / (3.0 * sigma * cnorm) } else { eps_in };
    let w_formula = 3.0 / eps_in * (m as f64).sqrt() * sigma * az.norm_inf() * cnorm;
    let w_raw = w_formula.max(anorm / eps_out).max(1.0);
    let w = 2f64.powi(ceil_log2(w_raw));

    let mut t: Vec<(usize, usize, f64)> = az.triplets().collect();
    for (i, &ai) in a_vec.iter().enumerate() {
        t.push((i, n, ai));
        t.push((i, n + 1, -ai));
    }
    t.push((m, n, w));
    t.push((m, n + 1, -w));
    let a2 = SparseMatrix::from_triplets(m + 1, n + 2, t)?;
    let c2 = DVector::from_fn(m + 1, |i, _| if i < m { c[i] } else { 0.0 });
    let gz2 = Gz2Instance::new(LsaInstance::new(a2, c2, eps_out)?)?;
    let cert = PreprocessCertificate {
        stage: PreprocessStage::GzToGz2,
        original_cols: n,
        w: Some(w),
        a_vec: Some(a_vec),
        k_star: Some(k_star),
        fallback_rows,
        eps_in,
        eps_out,
        sigma_used: sigma,
        sigma_min_used: None,
    };
    Ok((gz2, cert))
}

/// Zero when A_Zᵀc_Z = 0, otherwise the first n coordinates.
pub fn mapback_gz2(a_z: &SparseMatrix, c_z: &DVector<f64>, x_z2: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a_z.ncols();
    if x_z2.len() != n + 2 || c_z.len() != a_z.nrows() {
        return Err(Error::DimensionMismatch(format!("x has {} entries, expected {}", x_z2.len(), n + 2)));
    }
    if normal_rhs_is_zero(a_z, c_z) {
        return Ok(DVector::zeros(n));
    }
    Ok(x_z2.rows(0, n).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> ReduceOptions {
        ReduceOptions::default()
    }

    #[test]
    fn appends_negated_row_sums() {
        let inst = LsaInstance::from_rows(&[vec![1.0, 2.0]], &[3.0], 0.5).unwrap();
        let (gz, cert) = reduce_g_to_gz(&inst, &opts()).unwrap();
        assert_eq!(gz.inner.matrix.to_dense().as_slice(), &[1.0, 2.0, -3.0]);
        assert_eq!(cert.original_cols, 2);
        assert!(cert.eps_out < cert.eps_in);
    }

    #[test]
    fn zero_sum_column_rejected_unless_allowed() {
        let inst = LsaInstance::from_rows(&[vec![1.0, -1.0]], &[0.0], 0.5).unwrap();
        let err = reduce_g_to_gz(&inst, &opts()).unwrap_err();
        assert_eq!(err, Error::EmptyRowOrColumn { what: "column", index: 2 });
        let o = ReduceOptions { allow_zero_sum_column: true, ..opts() };
        let (gz, _) = reduce_g_to_gz(&inst, &o).unwrap();
        assert_eq!(gz.inner.matrix.ncols(), 3);
        assert_eq!(gz.inner.matrix.nnz(), 2);
    }

    #[test]
    fn mapback_shifts_by_last_coordinate() {
        let a = SparseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
        let x = mapback_gz(&a, &DVector::from_vec(vec![1.0, 2.0, 1.0])).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 1.0]);
        let x = mapback_gz(&a, &DVector::from_element(3, 7.5)).unwrap();
        assert_eq!(x, DVector::zeros(2));
        assert!(mapback_gz(&a, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn power_of_two_padding() {
        let inst =
            GzInstance::new(LsaInstance::from_rows(&[vec![3.0, -3.0], vec![1.0, -1.0]], &[1.0, 0.0], 0.5).unwrap())
                .unwrap();
        let (gz2, cert) = reduce_gz_to_gz2(&inst, &opts()).unwrap();
        assert_eq!(cert.k_star, Some(2));
        assert_eq!(cert.a_vec.as_ref().unwrap(), &vec![1.0, 3.0]);
        let a2 = &gz2.inner.matrix;
        assert_eq!(a2.get(0, 2), 1.0);
        assert_eq!(a2.get(0, 3), -1.0);
        let w = cert.w.unwrap();
        assert!(is_power_of_two(w));
        assert!(w >= 1.0 / cert.eps_out * (10f64).sqrt());
        assert_eq!(a2.get(2, 2), w);
        assert_eq!(gz2.inner.rhs[2], 0.0);
    }

    #[test]
    fn unit_row_needs_no_padding() {
        let inst = GzInstance::new(LsaInstance::from_rows(&[vec![1.0, -1.0]], &[1.0], 0.5).unwrap()).unwrap();
        let (gz2, cert) = reduce_gz_to_gz2(&inst, &opts()).unwrap();
        assert_eq!(cert.k_star, Some(0));
        assert_eq!(cert.a_vec.unwrap(), vec![0.0]);
        assert_eq!(gz2.inner.matrix.nnz(), 4);
    }

    #[test]
    fn fallback_when_row_norm_outgrows_max_entry() {
        let inst =
            GzInstance::new(LsaInstance::from_rows(&[vec![1.0, 1.0, 1.0, 1.0, 1.0, -5.0]], &[1.0], 0.5).unwrap())
                .unwrap();
        let (_, cert) = reduce_gz_to_gz2(&inst, &opts()).unwrap();
        assert_eq!(cert.k_star, Some(3));
        assert_eq!(cert.a_vec.unwrap(), vec![3.0]);
        let inst = GzInstance::new(
            LsaInstance::from_rows(&[vec![2.0, 2.0, 2.0, 2.0, 2.0, -2.0, -2.0, -2.0, -2.0, -2.0]], &[1.0], 0.5)
                .unwrap(),
        )
        .unwrap();
        let (_, cert) = reduce_gz_to_gz2(&inst, &opts()).unwrap();
        assert_eq!(cert.fallback_rows, vec![0]);
        assert_eq!(cert.a_vec.unwrap(), vec![6.0]);
    }

    #[test]
    fn mapback_gz2_branches() {
        let az = SparseMatrix::from_rows(&[vec![1.0, -1.0]]);
        let x = DVector::from_vec(vec![5.0, 3.0, 9.0, 9.0]);
        assert_eq!(mapback_gz2(&az, &DVector::from_vec(vec![1.0]), &x).unwrap().as_slice(), &[5.0, 3.0]);
        assert_eq!(mapback_gz2(&az, &DVector::from_vec(vec![0.0]), &x).unwrap(), DVector::zeros(2));
    }

    #[test]
    fn class_checks() {
        assert!(GzInstance::new(LsaInstance::from_rows(&[vec![1.0, 1.0]], &[0.0], 0.5).unwrap()).is_err());
        assert!(Gz2Instance::new(LsaInstance::from_rows(&[vec![3.0, -3.0]], &[0.0], 0.5).unwrap()).is_err());
        assert!(Gz2Instance::new(LsaInstance::from_rows(&[vec![3.0, 1.0, -4.0]], &[0.0], 0.5).unwrap()).is_ok());
        assert!(is_power_of_two(1.0) && is_power_of_two(1024.0) && !is_power_of_two(0.5) && !is_power_of_two(6.0));
    }
    #[test]
    fn diagonal_instance_maps_back() {
        let inst = LsaInstance::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]], &[2.0, 4.0], 0.5).unwrap();
        let (gz, _) = reduce_g_to_gz(&inst, &opts()).unwrap();
        assert_eq!(gz.inner.matrix, SparseMatrix::from_rows(&[vec![2.0, 0.0, -2.0], vec![0.0, 2.0, -2.0]]));
        let x = mapback_gz(&inst.matrix, &DVector::from_vec(vec![1.0, 2.0, 0.0])).unwrap();
        assert_eq!(x, DVector::from_vec(vec![1.0, 2.0]));
    }

    #[test]
    fn w_is_a_safe_power_of_two() {
        let inst = GzInstance::new(LsaInstance::from_rows(&[vec![1.0, -1.0]], &[1.0], 0.5).unwrap()).unwrap();
        let (g2, cert) = reduce_gz_to_gz2(&inst, &opts()).unwrap();
        let w = cert.w.unwrap();
        let sigma = crate::complexity::sigma_max_bound(&inst.inner.matrix).unwrap();
        assert!(is_power_of_two(w));
        assert!(w >= 3.0 * 2.0 * 2f64.sqrt() * sigma);
        let last: Vec<f64> = g2.inner.matrix.to_dense().row(1).iter().copied().collect();
        assert_eq!(last, vec![0.0, 0.0, w, -w]);

        let inst = GzInstance::new(
            LsaInstance::from_rows(&[vec![3.0, 2.0, -5.0], vec![1.0, -4.0, 3.0]], &[1.0, 2.0], 0.1).unwrap(),
        )
        .unwrap();
        let (_, cert) = reduce_gz_to_gz2(&inst, &opts()).unwrap();
        let a = cert.a_vec.unwrap();
        let an = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(cert.w.unwrap() >= an / cert.eps_out);
    }
}
