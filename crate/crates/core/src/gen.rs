//! Seeded instance generators for tests, benchmarks and the harness.

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Svd;
use crate::lsa::LsaInstance;
use crate::oracle::RANK_CUTOFF;
use crate::preprocess::Gz2Instance;
use crate::sparse::{norm2, SparseMatrix};

/// The single row 3x₁ + 5x₂ + 4x₃ + 4x₄ − 16x₅ = 1.
pub fn worked_example() -> Gz2Instance {
    let inst = LsaInstance::from_rows(&[vec![3.0, 5.0, 4.0, 4.0, -16.0]], &[1.0], 0.5).expect("valid row");
    Gz2Instance::new(inst).expect("row is in Gz2")
}

/// `total` split into `parts` positive integers, uniformly over cut sets.
fn composition<R: Rng>(rng: &mut R, total: u32, parts: usize) -> Vec<f64> {
    let mut cuts: Vec<u32> = sample(rng, total as usize - 1, parts - 1).into_iter().map(|c| c as u32 + 1).collect();
    cuts.sort_unstable();
    let mut prev = 0;
    let mut out = Vec::with_capacity(parts);
    for c in cuts.into_iter().chain(std::iter::once(total)) {
        out.push((c - prev) as f64);
        prev = c;
    }
    out
}

/// Shape of a random zero-sum power-of-two instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gz2Params {
    pub max_cols: usize,
    pub max_rows: usize,
    pub max_row_nnz: usize,
    /// Positive parts sum to 2^e with 1 ≤ e ≤ max_exp (entries ≤ 2^max_exp).
    pub max_exp: u32,
}

impl Default for Gz2Params {
    fn default() -> Self {
        Gz2Params { max_cols: 30, max_rows: 4, max_row_nnz: 6, max_exp: 6 }
    }
}

/// Rows with 2–`max_row_nnz` nonzeros in distinct columns; the positive
/// and the negative entries each sum to the same power of two. The
/// right-hand side is integer in [−4, 4] and not all zero.
pub fn random_gz2<R: Rng>(rng: &mut R, p: &Gz2Params) -> Gz2Instance {
    let n = rng.random_range(2..=p.max_cols.max(2));
    let m = rng.random_range(1..=p.max_rows.max(1));
    let mut t = Vec::new();
    for i in 0..m {
        let k = rng.random_range(2..=p.max_row_nnz.min(n).max(2));
        let e = rng.random_range(1..=p.max_exp);
        let total = 1u32 << e;
        let pos = rng.random_range(1..k).min(total as usize);
        let neg = (k - pos).min(total as usize);
        let cols = sample(rng, n, pos + neg).into_vec();
        let vals = composition(rng, total, pos).into_iter().chain(composition(rng, total, neg).into_iter().map(|v| -v));
        for (c, v) in cols.into_iter().zip(vals) {
            t.push((i, c, v));
        }
    }
    let a = SparseMatrix::from_triplets(m, n, t).expect("indices in range");
    let mut c = DVector::from_fn(m, |_, _| rng.random_range(-4i32..=4) as f64);
    if c.iter().all(|v| *v == 0.0) {
        c[0] = 1.0;
    }
    Gz2Instance::new(LsaInstance::new(a, c, 0.1).expect("shapes agree")).expect("generated in class")
}

/// Smaller instances whose strictified spectra stay resolvable in double
/// precision (δ-sized singular values above the SVD's rounding level).
pub const SPECTRAL_PARAMS: Gz2Params = Gz2Params { max_cols: 8, max_rows: 2, max_row_nnz: 4, max_exp: 3 };

pub fn gz2_suite(seed: u64, count: usize, p: &Gz2Params) -> Vec<Gz2Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_gz2(&mut rng, p)).collect()
}

/// Integer m×n instance with m, n ∈ {2, 3}, entries in [−4, 4], every row
/// and column nonempty, integer rhs in [−4, 4] not all zero.
pub fn random_g<R: Rng>(rng: &mut R, epsilon: f64) -> LsaInstance {
    loop {
        let m = rng.random_range(2..=3);
        let n = rng.random_range(2..=3);
        let rows: Vec<Vec<f64>> =
            (0..m).map(|_| (0..n).map(|_| rng.random_range(-4i32..=4) as f64).collect()).collect();
        let rhs: Vec<f64> = (0..m).map(|_| rng.random_range(-4i32..=4) as f64).collect();
        let inst = LsaInstance::from_rows(&rows, &rhs, epsilon).expect("shapes agree");
        if inst.check_class_g().is_ok() && rhs.iter().any(|v| *v != 0.0) {
            return inst;
        }
    }
}

pub fn g_suite(seed: u64, count: usize, epsilon: f64) -> Vec<LsaInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_g(&mut rng, epsilon)).collect()
}

fn random_tall<R: Rng>(rng: &mut R) -> SparseMatrix {
    let n = rng.random_range(2..=6);
    let m = n + rng.random_range(1..=4);
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-5i32..=5) as f64).collect()).collect();
    SparseMatrix::from_rows(&rows)
}

/// c = Ax for an integer x ≠ 0, so the answer is yes for every ε.
pub fn lsd_consistent(seed: u64, count: usize, epsilon: f64) -> Vec<LsaInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = random_tall(&mut rng);
        let x = DVector::from_fn(a.ncols(), |_, _| rng.random_range(-3i32..=3) as f64);
        let c = a.mul_vec(&x);
        if norm2(&c) > 0.0 {
            out.push(LsaInstance::new(a, c, epsilon).expect("shapes agree"));
        }
    }
    out
}

/// c = Ax + z with z ⊥ im(A) and ‖z‖ = ‖Ax‖, so ‖(I − Π_A)c‖/‖c‖ = 1/√2.
pub fn lsd_far(seed: u64, count: usize, epsilon: f64) -> Vec<LsaInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = random_tall(&mut rng);
        let x = DVector::from_fn(a.ncols(), |_, _| rng.random_range(-3i32..=3) as f64);
        let y = a.mul_vec(&x);
        let g = DVector::from_fn(a.nrows(), |_, _| rng.random_range(-3i32..=3) as f64);
        let svd = Svd::new(&a.to_dense());
        let z = &g - svd.project(&g, svd.rank(RANK_CUTOFF));
        let (ny, nz) = (norm2(&y), norm2(&z));
        if ny > 0.0 && nz > 1e-6 * norm2(&g) {
            let c = &y + z * (ny / nz);
            out.push(LsaInstance::new(a, c, epsilon).expect("shapes agree"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gz2_suite_is_deterministic_and_in_class() {
        let p = Gz2Params::default();
        let a = gz2_suite(7, 20, &p);
        assert_eq!(a, gz2_suite(7, 20, &p));
        for g in &a {
            assert!(g.inner.ncols() <= 30 && g.inner.matrix.max_abs() <= 64.0);
        }
    }

    #[test]
    fn compositions_sum_to_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for parts in 1..=5 {
            let c = composition(&mut rng, 8, parts);
            assert_eq!(c.len(), parts);
            assert_eq!(c.iter().sum::<f64>(), 8.0);
            assert!(c.iter().all(|v| *v >= 1.0));
        }
    }

    #[test]
    fn g_suite_in_class() {
        for inst in g_suite(3, 30, 0.1) {
            inst.check_class_g().unwrap();
            assert!(inst.matrix.max_abs() <= 4.0);
        }
    }

    #[test]
    fn far_instances_have_half_residual() {
        for inst in lsd_far(5, 5, 0.1) {
            let o = crate::oracle::solve_dense(&inst.matrix, &inst.rhs, 100).unwrap();
            assert!((o.residual_norm / norm2(&inst.rhs) - 0.5f64.sqrt()).abs() < 1e-10);
        }
    }
}
