//! Dense helpers: ordered SVD, compensated dot products, symmetric spectra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Compensated dot product of (a, b) pairs (Ogita–Rump–Oishi Dot2):
/// the result is as accurate as if computed in twice the working precision.
pub fn dot2<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for (a, b) in pairs {
        let p = a * b;
        let ep = a.mul_add(b, -p);
        let t = s + p;
        let z = t - s;
        let es = (s - (t - z)) + (p - z);
        s = t;
        c += ep + es;
    }
    s + c
}

/// Thin singular value decomposition with values sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let k = m.nrows().min(m.ncols());
        if k == 0 {
            return Svd { u: DMatrix::zeros(m.nrows(), 0), s: DVector::zeros(0), v: DMatrix::zeros(m.ncols(), 0) };
        }
        let svd = m.clone().svd(true, true);
        let u = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested Vᵀ");
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        Svd {
            u: DMatrix::from_fn(m.nrows(), k, |i, j| u[(i, order[j])]),
            s: DVector::from_fn(k, |j, _| svd.singular_values[order[j]]),
            v: DMatrix::from_fn(m.ncols(), k, |i, j| vt[(order[j], i)]),
        }
    }

    pub fn sigma_max(&self) -> f64 {
        if self.s.is_empty() {
            0.0
        } else {
            self.s[0]
        }
    }

    /// Number of singular values above `rel · σ_max`.
    pub fn rank(&self, rel: f64) -> usize {
        let cut = self.sigma_max() * rel;
        if self.sigma_max() == 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&x| x > cut).count()
    }

    /// Rank-`r` pseudo-inverse applied to `b`.
    pub fn solve(&self, b: &DVector<f64>, r: usize) -> DVector<f64> {
        let mut x = DVector::zeros(self.v.nrows());
        for k in 0..r {
            let coef = self.u.column(k).dot(b) / self.s[k];
            x.axpy(coef, &self.v.column(k), 1.0);
        }
        x
    }

    /// Orthogonal projection of `b` onto the span of the leading `r` left vectors.
    pub fn project(&self, b: &DVector<f64>, r: usize) -> DVector<f64> {
        let mut p = DVector::zeros(self.u.nrows());
        for k in 0..r {
            let coef = self.u.column(k).dot(b);
            p.axpy(coef, &self.u.column(k), 1.0);
        }
        p
    }
}

/// Singular values only, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows().min(m.ncols()) == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Moore–Penrose pseudo-inverse with relative cutoff.
pub fn pinv(m: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let svd = Svd::new(m);
    let r = svd.rank(rel);
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for k in 0..r {
        out += (svd.v.column(k) * svd.u.column(k).transpose()) / svd.s[k];
    }
    out
}

/// Largest absolute entry of a dense matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, b| a.max(b.abs()))
}
