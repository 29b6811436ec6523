//! Gz2 → 2-commodity reduction: bit pairing, the ten-equation gadget,
//! row weighting and the restriction MapSoln.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::complexity::sigma_max_bound;
use crate::error::{Error, Result};
use crate::linalg::{pinv, Svd};
use crate::lsa::LsaInstance;
use crate::oracle::{check_cap, normal_rhs_is_zero, RANK_CUTOFF};
use crate::preprocess::Gz2Instance;
use crate::sparse::{norm2, SparseMatrix};

/// The three admissible row patterns over blocks (u_b, v_b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    /// u_i − u_j
    Type1,
    /// v_i − v_j
    Type2,
    /// u_i − v_i − u_j + v_j
    Type12,
}

/// Where a row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowRole {
    /// The surviving two-variable equation of a source row.
    Main,
    /// A gadget or special-branch equation (right-hand side 0).
    Aux,
    /// A δ-weighted row added to make the system strict.
    Strict,
}

/// Coordinate of u_b in the interleaved ordering (u₀, v₀, u₁, v₁, …).
pub fn u_coord(b: usize) -> usize {
    2 * b
}

/// Coordinate of v_b in the interleaved ordering.
pub fn v_coord(b: usize) -> usize {
    2 * b + 1
}

/// One equation √w·magnitude·pattern(i, j)·x = rhs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mc2Row {
    pub kind: RowKind,
    pub i: usize,
    pub j: usize,
    pub magnitude: f64,
    pub weight_sq: f64,
    /// Right-hand side of the materialized row.
    pub rhs: f64,
    pub role: RowRole,
    /// Index of the source row this equation encodes, if any.
    pub source: Option<usize>,
}

impl Mc2Row {
    pub fn new(kind: RowKind, i: usize, j: usize, magnitude: f64) -> Self {
        Mc2Row { kind, i, j, magnitude, weight_sq: 1.0, rhs: 0.0, role: RowRole::Aux, source: None }
    }

    /// Unit-coefficient pattern as (coordinate, sign) pairs.
    pub fn pattern(&self) -> Vec<(usize, f64)> {
        let (i, j) = (self.i, self.j);
        match self.kind {
            RowKind::Type1 => vec![(u_coord(i), 1.0), (u_coord(j), -1.0)],
            RowKind::Type2 => vec![(v_coord(i), 1.0), (v_coord(j), -1.0)],
            RowKind::Type12 => vec![(u_coord(i), 1.0), (v_coord(i), -1.0), (u_coord(j), -1.0), (v_coord(j), 1.0)],
        }
    }

    /// √w·magnitude: the factor multiplying the pattern once materialized.
    pub fn scale(&self) -> f64 {
        self.weight_sq.sqrt() * self.magnitude
    }

    /// Sorted vertex pair.
    pub fn edge(&self) -> (usize, usize) {
        (self.i.min(self.j), self.i.max(self.j))
    }
}

/// A 2-commodity system B = (Â ; W^{1/2}B̂) with typed rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mc2System {
    pub num_blocks: usize,
    pub rows: Vec<Mc2Row>,
    pub alpha: f64,
}

impl Mc2System {
    pub fn ncols(&self) -> usize {
        2 * self.num_blocks
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| if r.kind == RowKind::Type12 { 4 } else { 2 }).sum()
    }

    /// Checks indices, distinct endpoints, nonzero magnitudes and
    /// nonnegative weights.
    pub fn validate(&self) -> Result<()> {
        for (k, r) in self.rows.iter().enumerate() {
            if r.i == r.j {
                return Err(Error::NotMc2(format!("row {k} joins block {} to itself", r.i)));
            }
            if r.i >= self.num_blocks || r.j >= self.num_blocks {
                return Err(Error::NotMc2(format!("row {k} references a block outside 0..{}", self.num_blocks)));
            }
            if r.magnitude == 0.0 || !r.magnitude.is_finite() {
                return Err(Error::NotMc2(format!("row {k} has magnitude {}", r.magnitude)));
            }
            if !r.weight_sq.is_finite() || r.weight_sq < 0.0 {
                return Err(Error::NonPositiveWeight { row: k, weight: r.weight_sq });
            }
        }
        Ok(())
    }

    /// Numeric matrix and right-hand side, columns (u₀, v₀, u₁, v₁, …).
    pub fn materialize(&self) -> (SparseMatrix, DVector<f64>) {
        let mut t = Vec::with_capacity(self.nnz());
        for (k, r) in self.rows.iter().enumerate() {
            let f = r.scale();
            for (col, sgn) in r.pattern() {
                t.push((k, col, sgn * f));
            }
        }
        let b = SparseMatrix::from_triplets(self.rows.len(), self.ncols(), t).expect("row patterns stay in range");
        (b, self.rhs())
    }

    pub fn rhs(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.rhs))
    }

    /// BᵀB assembled densely.
    pub fn normal_matrix(&self) -> DMatrix<f64> {
        let n = self.ncols();
        let mut m = DMatrix::zeros(n, n);
        for r in &self.rows {
            let p = r.pattern();
            let w = r.scale() * r.scale();
            for &(a, sa) in &p {
                for &(b, sb) in &p {
                    m[(a, b)] += w * sa * sb;
                }
            }
        }
        m
    }

    /// Wraps the materialized system as an LSA instance.
    pub fn to_instance(&self, epsilon: f64) -> Result<LsaInstance> {
        let (b, c) = self.materialize();
        LsaInstance::new(b, c, epsilon)
    }
}

/// One pair-and-replace step: x_j and x_l (both at coefficient scale
/// s·2^r) replaced by the fresh block t at s·2^{r+1}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GadgetRecord {
    pub t: usize,
    pub j: usize,
    pub l: usize,
    pub scale: f64,
    pub source_row: usize,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mc2Certificate {
    pub n_original: usize,
    /// Original column j lives in block variable_map[j].
    pub variable_map: Vec<usize>,
    pub gadgets: Vec<GadgetRecord>,
    /// Blocks created by the one-positive/one-negative branch (their v is unused).
    pub special_blocks: Vec<usize>,
    pub alpha: f64,
    pub eps_in: f64,
    pub eps_out: f64,
    /// Number of auxiliary rows per source row.
    pub aux_counts: Vec<usize>,
    pub sigma_used: f64,
    /// ‖A_i‖₁ of every source row.
    pub row_l1: Vec<f64>,
    /// ‖A‖₁ of the source matrix (largest column sum).
    pub a_norm_1: f64,
}

/// The ten unweighted equations encoding x_j + x_l = 2x_t with private
/// blocks t+1 … t+6.
pub fn mc2_gadget(j: usize, l: usize, t: usize) -> Result<Vec<Mc2Row>> {
    for b in [j, l] {
        if (t..t + 7).contains(&b) {
            return Err(Error::BlockCollision { block: b });
        }
    }
    use RowKind::*;
    let rows = [
        (Type12, t + 3, t + 4),
        (Type1, t, t + 3),
        (Type1, t + 4, j),
        (Type2, t + 3, t + 1),
        (Type2, t + 2, t + 4),
        (Type12, t + 5, t + 6),
        (Type1, t, t + 5),
        (Type1, t + 6, l),
        (Type2, t + 5, t + 2),
        (Type2, t + 1, t + 6),
    ];
    Ok(rows.iter().map(|&(k, a, b)| Mc2Row::new(k, a, b, 1.0)).collect())
}

/// Largest coefficient the bit-pairing loop accepts (exact in f64 and u64).
const MAX_COEFFICIENT: f64 = 4_503_599_627_370_496.0; // 2^52

struct RowOutput {
    main: Mc2Row,
    aux: Vec<Mc2Row>,
}

/// Reduces one Gz2 row starting at fresh block `next`; returns the rows and
/// the next free block.
fn reduce_row(
    row: usize,
    terms: Vec<(usize, f64)>,
    rhs: f64,
    alpha: f64,
    mut next: usize,
    gadgets: &mut Vec<GadgetRecord>,
    special: &mut Vec<usize>,
) -> Result<(RowOutput, usize)> {
    let _ = alpha;
    if terms.iter().any(|t| t.1.abs() > MAX_COEFFICIENT) {
        return Err(Error::NotGz2 { row, reason: "coefficient exceeds 2^52".into() });
    }
    let pos: Vec<_> = terms.iter().filter(|t| t.1 > 0.0).copied().collect();
    let neg: Vec<_> = terms.iter().filter(|t| t.1 < 0.0).copied().collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::NotGz2 { row, reason: "row needs positive and negative coefficients".into() });
    }
    if pos.len() == 1 && neg.len() == 1 {
        let (jp, a) = pos[0];
        let jm = neg[0].0;
        let t = next;
        next += 1;
        special.push(t);
        let main = Mc2Row { rhs, role: RowRole::Main, source: Some(row), ..Mc2Row::new(RowKind::Type1, t, jm, a) };
        let aux = vec![Mc2Row { source: Some(row), ..Mc2Row::new(RowKind::Type1, jp, t, a) }];
        return Ok((RowOutput { main, aux }, next));
    }

    let mut terms = terms;
    let mut aux = Vec::new();
    for s in [1.0f64, -1.0] {
        let mut r: u32 = 0;
        while terms.iter().filter(|t| t.1 * s > 0.0).count() > 1 {
            if r > 52 {
                return Err(Error::NotGz2 { row, reason: "pairing did not terminate".into() });
            }
            let bit = 2f64.powi(r as i32);
            let odd: Vec<usize> = (0..terms.len())
                .filter(|&k| terms[k].1 * s > 0.0 && ((terms[k].1.abs() as u64) >> r) & 1 == 1)
                .collect();
            if odd.len() % 2 == 1 {
                return Err(Error::OddPairSet { row, round: r, count: odd.len() });
            }
            let mut updated = terms.clone();
            let mut inserted: Vec<Option<(usize, f64)>> = vec![None; terms.len()];
            for pair in odd.chunks(2) {
                let (k1, k2) = (pair[0], pair[1]);
                let (j, l) = (terms[k1].0, terms[k2].0);
                let t = next;
                next += 7;
                updated[k1].1 -= s * bit;
                updated[k2].1 -= s * bit;
                inserted[k2] = Some((t, s * 2.0 * bit));
                for g in mc2_gadget(j, l, t)? {
                    aux.push(Mc2Row { magnitude: -s * bit, source: Some(row), ..g });
                }
                gadgets.push(GadgetRecord { t, j, l, scale: s * bit, source_row: row, round: r });
            }
            let mut rebuilt = Vec::with_capacity(updated.len());
            for (k, term) in updated.into_iter().enumerate() {
                if term.1 != 0.0 {
                    rebuilt.push(term);
                }
                if let Some(new) = inserted[k] {
                    rebuilt.push(new);
                }
            }
            terms = rebuilt;
            r += 1;
        }
    }
    let pos: Vec<_> = terms.iter().filter(|t| t.1 > 0.0).collect();
    let neg: Vec<_> = terms.iter().filter(|t| t.1 < 0.0).collect();
    if pos.len() != 1 || neg.len() != 1 || pos[0].1 != -neg[0].1 {
        return Err(Error::NotGz2 { row, reason: "pairing left an unbalanced main equation".into() });
    }
    let main = Mc2Row {
        rhs,
        role: RowRole::Main,
        source: Some(row),
        ..Mc2Row::new(RowKind::Type1, pos[0].0, neg[0].0, pos[0].1)
    };
    Ok((RowOutput { main, aux }, next))
}

/// Gz2 → MC2. Rows are emitted as all main rows (source order) followed
/// by all auxiliary rows, so c^B = (c; 0). Auxiliary rows of source row i
/// carry weight α·m_i with m_i their count.
pub fn reduce_gz2_to_mc2(inst: &Gz2Instance, alpha: f64) -> Result<(Mc2System, Mc2Certificate)> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    let checked = Gz2Instance::new(inst.inner.clone())?;
    let a = &checked.inner.matrix;
    let c = &checked.inner.rhs;
    let n = a.ncols();
    let mut next = n;
    let mut gadgets = Vec::new();
    let mut special = Vec::new();
    let mut mains = Vec::with_capacity(a.nrows());
    let mut auxes = Vec::new();
    let mut aux_counts = Vec::with_capacity(a.nrows());
    for i in 0..a.nrows() {
        let terms: Vec<(usize, f64)> = a.row(i).collect();
        let (out, nx) = reduce_row(i, terms, c[i], alpha, next, &mut gadgets, &mut special)?;
        next = nx;
        let m_i = out.aux.len();
        aux_counts.push(m_i);
        mains.push(out.main);
        auxes.extend(out.aux.into_iter().map(|r| Mc2Row { weight_sq: alpha * m_i as f64, ..r }));
    }
    mains.extend(auxes);
    let system = Mc2System { num_blocks: next, rows: mains, alpha };

    let sigma = sigma_max_bound(a)?;
    let cn = norm2(c);
    let eps_in = checked.inner.epsilon;
    let eps_out = eps_in * (1.0 + 1.0 / alpha).powf(-0.5) * (1.0 + cn * cn * sigma * sigma / (alpha + 1.0)).powf(-0.5);
    let cert = Mc2Certificate {
        n_original: n,
        variable_map: (0..n).collect(),
        gadgets,
        special_blocks: special,
        alpha,
        eps_in,
        eps_out,
        aux_counts,
        sigma_used: sigma,
        row_l1: (0..a.nrows()).map(|i| a.row_l1(i)).collect(),
        a_norm_1: a.norm_1(),
    };
    Ok((system, cert))
}

/// Restriction to the original u-coordinates, or 0 when Aᵀc = 0.
pub fn mapback_mc2(a: &SparseMatrix, c: &DVector<f64>, x_b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    if x_b.len() % 2 != 0 || x_b.len() < 2 * n || c.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!("x_b has {} entries for {n} original columns", x_b.len())));
    }
    if normal_rhs_is_zero(a, c) {
        return Ok(DVector::zeros(n));
    }
    Ok(DVector::from_fn(n, |j, _| x_b[u_coord(j)]))
}

/// For every source row, the unweighted main and auxiliary rows must sum
/// to (A_i, c_i) exactly. Returns the first offending row.
pub fn row_sum_identity(system: &Mc2System, a: &SparseMatrix, c: &DVector<f64>) -> std::result::Result<(), usize> {
    let mut sums: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); a.nrows()];
    let mut rhs = vec![0.0; a.nrows()];
    for r in &system.rows {
        let Some(src) = r.source else { continue };
        for (col, sgn) in r.pattern() {
            *sums[src].entry(col).or_insert(0.0) += sgn * r.magnitude;
        }
        if r.role == RowRole::Main {
            rhs[src] += r.rhs;
        }
    }
    for i in 0..a.nrows() {
        let mut expect: std::collections::BTreeMap<usize, f64> = a.row(i).map(|(j, v)| (u_coord(j), v)).collect();
        expect.retain(|_, v| *v != 0.0);
        let mut got = sums[i].clone();
        got.retain(|_, v| *v != 0.0);
        if got != expect || rhs[i] != c[i] {
            return Err(i);
        }
    }
    Ok(())
}

/// Splits the materialized B into the original u-columns and the rest.
fn split_columns(system: &Mc2System, n: usize) -> (Vec<usize>, Vec<usize>) {
    let orig: Vec<usize> = (0..n).map(u_coord).collect();
    let aux: Vec<usize> = (0..system.ncols()).filter(|&k| !(k % 2 == 0 && k / 2 < n)).collect();
    (orig, aux)
}

/// ‖SC(BᵀB) − α/(α+1)·AᵀA‖_max where the Schur complement eliminates
/// every coordinate except the original u's.
pub fn schur_check(system: &Mc2System, a: &SparseMatrix, cap: usize) -> Result<f64> {
    let (b, _) = system.materialize();
    check_cap(&b, cap)?;
    let n = a.ncols();
    let (orig, aux) = split_columns(system, n);
    let b1 = b.dense_columns(&orig);
    let b2 = b.dense_columns(&aux);
    let svd = Svd::new(&b2);
    let r = svd.rank(RANK_CUTOFF);
    let u_r = svd.u.columns(0, r);
    let p = u_r.transpose() * &b1;
    let sc = b1.transpose() * &b1 - p.transpose() * p;
    let ad = a.to_dense();
    let target = (ad.transpose() * &ad) * (system.alpha / (system.alpha + 1.0));
    Ok((sc - target).abs().max())
}

/// Dimension bookkeeping for nulls(B).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NullspaceReport {
    /// nullity(A) + gadgets + unused coordinates predicted by the certificate.
    pub expected: usize,
    /// Columns minus numerical rank of the materialized B.
    pub oracle: usize,
    /// v of every original, (v_t, u_{t+1}, u_{t+2}) per gadget, v_t per special block.
    pub unused_predicted: usize,
    /// Non-original coordinates without any entry in B.
    pub unused_observed: usize,
}

pub fn nullspace_check(
    system: &Mc2System,
    cert: &Mc2Certificate,
    a: &SparseMatrix,
    cap: usize,
) -> Result<NullspaceReport> {
    let (b, _) = system.materialize();
    check_cap(&b, cap)?;
    check_cap(a, cap)?;
    let n = cert.n_original;
    let rank_a = Svd::new(&a.to_dense()).rank(RANK_CUTOFF);
    let rank_b = Svd::new(&b.to_dense()).rank(RANK_CUTOFF);
    let g = cert.gadgets.len();
    let unused_predicted = n + 3 * g + cert.special_blocks.len();
    let used = b.column_used();
    let unused_observed = (0..b.ncols()).filter(|&k| !used[k] && !(k % 2 == 0 && k / 2 < n)).count();
    Ok(NullspaceReport {
        expected: (n - rank_a) + g + unused_predicted,
        oracle: b.ncols() - rank_b,
        unused_predicted,
        unused_observed,
    })
}

/// (‖Ax − c‖², ((α+1)/α)·min_aux ‖B(x; aux) − c^B‖²) for a fixed x on the
/// original coordinates; the two agree when the reduction is exact.
pub fn exact_reduction_values(
    system: &Mc2System,
    inst: &LsaInstance,
    x: &DVector<f64>,
    cap: usize,
) -> Result<(f64, f64)> {
    let n = inst.ncols();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!("x has {} entries, expected {n}", x.len())));
    }
    let (b, cb) = system.materialize();
    check_cap(&b, cap)?;
    let (orig, aux) = split_columns(system, n);
    let r0 = &cb - b.dense_columns(&orig) * x;
    let b2 = b.dense_columns(&aux);
    let svd = Svd::new(&b2);
    let r = svd.rank(RANK_CUTOFF);
    let left = &r0 - svd.project(&r0, r);
    let lhs = norm2(&inst.matrix.residual(x, &inst.rhs)).powi(2);
    let rhs = (system.alpha + 1.0) / system.alpha * norm2(&left).powi(2);
    Ok((lhs, rhs))
}

/// (‖c − Π_A c‖², (1 + 1/α)·‖c^B − Π_B c^B‖²).
pub fn optimal_value_relation(system: &Mc2System, inst: &LsaInstance, cap: usize) -> Result<(f64, f64)> {
    let (b, cb) = system.materialize();
    let ob = crate::oracle::solve_dense(&b, &cb, cap)?;
    let oa = crate::oracle::solve_dense(&inst.matrix, &inst.rhs, cap)?;
    Ok((oa.residual_norm.powi(2), (1.0 + 1.0 / system.alpha) * ob.residual_norm.powi(2)))
}

/// Dense pseudo-inverse based Schur complement, exposed for small checks.
pub fn schur_complement(m: &DMatrix<f64>, keep: &[usize]) -> DMatrix<f64> {
    let rest: Vec<usize> = (0..m.nrows()).filter(|k| !keep.contains(k)).collect();
    let pick = |rs: &[usize], cs: &[usize]| DMatrix::from_fn(rs.len(), cs.len(), |i, j| m[(rs[i], cs[j])]);
    let c11 = pick(keep, keep);
    let c12 = pick(keep, &rest);
    let c22 = pick(&rest, &rest);
    c11 - &c12 * pinv(&c22, RANK_CUTOFF) * c12.transpose()
}
