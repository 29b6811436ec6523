//! 2D truss realization of a 2-commodity system and the TV decomposition
//! of its normal matrix.
//!
//! Vertex v-coordinates are kept exactly: originals are rounded onto the
//! grid δ_round·ℤ and every later vertex is a dyadic average of earlier
//! ones, so equality tests (degenerate pairings, horizontal members) never
//! depend on floating-point luck.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::sym_eigenvalues;
use crate::mc2::{u_coord, v_coord, Mc2Certificate, Mc2System, RowKind, RowRole};

/// Rounding precision of the sampled coordinates.
pub const ROUND_PRECISION: f64 = 1e-10;
/// 1/ROUND_PRECISION as an exact integer.
const GRID: u64 = 10_000_000_000;

/// Exact number num / (GRID · 2^shift).
#[derive(Debug, Clone)]
pub struct Dyadic {
    num: BigInt,
    shift: u32,
}

impl Dyadic {
    pub fn from_grid(k: BigInt) -> Self {
        Dyadic { num: k, shift: 0 }
    }

    pub fn from_int(x: i64) -> Self {
        Dyadic { num: BigInt::from(x) * GRID, shift: 0 }
    }

    fn aligned(&self, other: &Dyadic) -> (BigInt, BigInt, u32) {
        let s = self.shift.max(other.shift);
        (&self.num << (s - self.shift), &other.num << (s - other.shift), s)
    }

    pub fn add(&self, other: &Dyadic) -> Dyadic {
        let (a, b, s) = self.aligned(other);
        Dyadic { num: a + b, shift: s }
    }

    pub fn sub(&self, other: &Dyadic) -> Dyadic {
        let (a, b, s) = self.aligned(other);
        Dyadic { num: a - b, shift: s }
    }

    pub fn half(&self) -> Dyadic {
        Dyadic { num: self.num.clone(), shift: self.shift + 1 }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        // Scale in two steps so large numerators keep full precision.
        let v = self.num.to_f64().unwrap_or(f64::NAN);
        v / GRID as f64 / 2f64.powi(self.shift as i32)
    }
}

impl PartialEq for Dyadic {
    fn eq(&self, other: &Self) -> bool {
        self.sub(other).is_zero()
    }
}

/// Exact round-to-nearest of y/δ_round (ties away from zero).
pub fn round_to_grid(y: f64) -> BigInt {
    if y == 0.0 {
        return BigInt::zero();
    }
    let bits = y.abs().to_bits();
    let exp_field = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if exp_field == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp_field - 1075) };
    let scaled = BigInt::from(mant) * GRID; // |y|/δ = scaled · 2^exp
    let k = if exp >= 0 {
        scaled << exp as usize
    } else {
        let sh = (-exp) as usize;
        (scaled + (BigInt::from(1) << (sh - 1))) >> sh
    };
    if y < 0.0 {
        -k
    } else {
        k
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrussGeometry {
    /// (u, v) per block, rounded to double precision.
    pub coords: Vec<(f64, f64)>,
    #[serde(skip)]
    pub exact: Vec<(Dyadic, Dyadic)>,
    /// Sampled v-coordinates of the originals before rounding.
    pub raw_v: Vec<f64>,
    pub radius: f64,
    pub precision: f64,
    pub seed: u64,
    /// Grid positions skipped to avoid zero-length members.
    pub grid_shifts: usize,
    pub special_blocks: Vec<usize>,
    /// Description of the gadget offsets used.
    pub layout: &'static str,
}

pub const GADGET_LAYOUT: &str = "U3 = u(t+1) = u(t+3) = u(t+6) on the integer grid; U4 = u(t+2) = u(t+4) = u(t+5) = U3 + (v_l - v_j)/2; u(t) = 2*U3 - U4; v(t) = v(t+3) = v(t+5) = (v_j + v_l)/2, v(t+1) = v(t+4) = v_j, v(t+2) = v(t+6) = v_l";

/// Places every block in the plane: originals get arbitrary grid
/// u-coordinates and v-coordinates from a rounded uniform point on the
/// sphere of radius ‖A‖₁·n¹⁰; gadget vertices follow in creation order.
pub fn embed_truss(system: &Mc2System, cert: &Mc2Certificate, seed: u64) -> Result<TrussGeometry> {
    let n = cert.n_original;
    let nb = system.num_blocks;
    if n == 0 || n > nb {
        return Err(Error::InvalidInput(format!("certificate has {n} originals for {nb} blocks")));
    }
    let radius = cert.a_norm_1 * (n as f64).powi(10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: Vec<f64> = loop {
        let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        if g.iter().any(|x: &f64| *x != 0.0) {
            break g;
        }
    };
    let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let raw_v: Vec<f64> = g.iter().map(|x| x / gn * radius).collect();

    let mut exact: Vec<Option<(Dyadic, Dyadic)>> = vec![None; nb];
    for j in 0..n {
        exact[j] = Some((Dyadic::from_int(j as i64), Dyadic::from_grid(round_to_grid(raw_v[j]))));
    }
    let mut cursor = n as i64;
    let mut grid_shifts = 0;
    for gad in &cert.gadgets {
        let (uj, a) = exact[gad.j].clone().ok_or(Error::InvalidInput(format!("block {} unplaced", gad.j)))?;
        let (ul, b) = exact[gad.l].clone().ok_or(Error::InvalidInput(format!("block {} unplaced", gad.l)))?;
        if a == b {
            return Err(Error::DegeneratePairing { block: gad.t, height: a.to_f64() });
        }
        let offset = b.sub(&a).half();
        let (u3, u4) = loop {
            let u3 = Dyadic::from_int(cursor);
            let u4 = u3.add(&offset);
            if u4 == uj || u3 == ul {
                cursor += 1;
                grid_shifts += 1;
                continue;
            }
            break (u3, u4);
        };
        cursor += 1;
        let mid = a.add(&b).half();
        let t = gad.t;
        exact[t] = Some((u3.add(&u3).sub(&u4), mid.clone()));
        exact[t + 1] = Some((u3.clone(), a.clone()));
        exact[t + 2] = Some((u4.clone(), b.clone()));
        exact[t + 3] = Some((u3.clone(), mid.clone()));
        exact[t + 4] = Some((u4.clone(), a));
        exact[t + 5] = Some((u4, mid));
        exact[t + 6] = Some((u3, b));
    }
    for &t in &cert.special_blocks {
        let partner = system
            .rows
            .iter()
            .find(|r| r.role == RowRole::Main && r.i == t)
            .map(|r| r.j)
            .ok_or_else(|| Error::InvalidInput(format!("special block {t} has no main row")))?;
        let (_, v) = exact[partner].clone().ok_or(Error::InvalidInput(format!("block {partner} unplaced")))?;
        exact[t] = Some((Dyadic::from_int(cursor), v));
        cursor += 1;
    }
    let exact: Vec<(Dyadic, Dyadic)> = exact
        .into_iter()
        .enumerate()
        .map(|(b, e)| e.ok_or(Error::InvalidInput(format!("block {b} was never placed"))))
        .collect::<Result<_>>()?;
    Ok(TrussGeometry {
        coords: exact.iter().map(|(u, v)| (u.to_f64(), v.to_f64())).collect(),
        exact,
        raw_v,
        radius,
        precision: ROUND_PRECISION,
        seed,
        grid_shifts,
        special_blocks: cert.special_blocks.clone(),
        layout: GADGET_LAYOUT,
    })
}

/// Largest deviation of a row's coefficient pattern from a multiple of the
/// member direction (s^i − s^j), split by row origin.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TrussReport {
    pub max_deviation: f64,
    pub gadget_max: f64,
    pub main_max: f64,
    pub special_aux_max: f64,
    pub strict_max: f64,
    pub gadget_rows: usize,
    pub main_rows: usize,
    pub special_aux_rows: usize,
    pub strict_rows: usize,
    /// Rows whose deviation exceeds [`TRUSS_TOL`].
    pub violating_rows: usize,
}

pub const TRUSS_TOL: f64 = 1e-8;

/// Sine of the angle between the unit pattern (p, −p) and (d, −d).
fn row_deviation(kind: RowKind, du: &Dyadic, dv: &Dyadic) -> f64 {
    let (pu, pv) = match kind {
        RowKind::Type1 => (1.0, 0.0),
        RowKind::Type2 => (0.0, 1.0),
        RowKind::Type12 => (1.0, -1.0),
    };
    let (du, dv) = (du.to_f64(), dv.to_f64());
    let dn = du.hypot(dv);
    if dn == 0.0 {
        return 1.0;
    }
    let pn: f64 = f64::hypot(pu, pv);
    let (du, dv) = (du / dn, dv / dn);
    ((pu * dv - pv * du) / pn).abs()
}

pub fn verify_truss_rows(system: &Mc2System, geometry: &TrussGeometry) -> TrussReport {
    let special: BTreeSet<usize> = geometry.special_blocks.iter().copied().collect();
    let mut rep = TrussReport::default();
    for r in &system.rows {
        let (ui, vi) = &geometry.exact[r.i];
        let (uj, vj) = &geometry.exact[r.j];
        let dev = row_deviation(r.kind, &ui.sub(uj), &vi.sub(vj));
        let (slot, count) = match r.role {
            RowRole::Main => (&mut rep.main_max, &mut rep.main_rows),
            RowRole::Strict => (&mut rep.strict_max, &mut rep.strict_rows),
            RowRole::Aux if special.contains(&r.i) || special.contains(&r.j) => {
                (&mut rep.special_aux_max, &mut rep.special_aux_rows)
            }
            RowRole::Aux => (&mut rep.gadget_max, &mut rep.gadget_rows),
        };
        *slot = slot.max(dev);
        *count += 1;
        rep.max_deviation = rep.max_deviation.max(dev);
        if dev > TRUSS_TOL {
            rep.violating_rows += 1;
        }
    }
    rep
}

/// Outcome of the exact bit-string check on every pairing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BitstringReport {
    pub pairs_checked: usize,
    /// Pairings whose convex-combination vectors are closer than 1/‖A_j‖₁.
    pub gap_violations: usize,
    /// Fixed-point denominator exponent used.
    pub denominator_bits: u32,
}

/// Each vertex's v-coordinate is cᵀỹ for a dyadic convex vector c over the
/// originals. Verifies, exactly, that the two vectors of every pairing
/// never share a set bit in any coordinate and differ by at least
/// 1/‖A_j‖₁ in Euclidean norm.
pub fn bitstring_disjointness_check(cert: &Mc2Certificate) -> Result<BitstringReport> {
    let n = cert.n_original;
    let d = cert.gadgets.iter().map(|g| g.round + 2).max().unwrap_or(1);
    let one = BigUint::from(1u32) << d as usize;
    let mut vecs: BTreeMap<usize, Vec<BigUint>> = BTreeMap::new();
    for j in 0..n {
        let mut v = vec![BigUint::zero(); n];
        v[j] = one.clone();
        vecs.insert(j, v);
    }
    let mut gap_violations = 0;
    for g in &cert.gadgets {
        let c = vecs.get(&g.j).ok_or_else(|| Error::InvalidInput(format!("block {} has no vector", g.j)))?;
        let e = vecs.get(&g.l).ok_or_else(|| Error::InvalidInput(format!("block {} has no vector", g.l)))?;
        for i in 0..n {
            let both = &c[i] & &e[i];
            if !both.is_zero() {
                let low = both.trailing_zeros().unwrap_or(0);
                return Err(Error::BitCollision { block: g.t, vertex: i, bit: d as u64 - low });
            }
        }
        let mut dist2 = BigInt::zero();
        for i in 0..n {
            let diff = BigInt::from_biguint(Sign::Plus, c[i].clone()) - BigInt::from_biguint(Sign::Plus, e[i].clone());
            dist2 += &diff * &diff;
        }
        let l1 = cert.row_l1.get(g.source_row).copied().unwrap_or(1.0) as u64;
        let lhs = dist2 * BigInt::from(l1) * BigInt::from(l1);
        if lhs < (BigInt::from(1) << (2 * d as usize)) {
            gap_violations += 1;
        }
        let mut sum: Vec<BigUint> = c.iter().zip(e).map(|(x, y)| x + y).collect();
        for s in &mut sum {
            if s.bit(0) {
                return Err(Error::InvalidInput("convex vector left the dyadic grid".into()));
            }
            *s >>= 1;
        }
        vecs.insert(g.t, sum);
    }
    Ok(BitstringReport { pairs_checked: cert.gadgets.len(), gap_violations, denominator_bits: d })
}

/// One group of a TV matrix: Nᵀ(W − rrᵀ)N over (u_i, v_i, u_j, v_j).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvBlock {
    pub n: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub r: DVector<f64>,
}

impl TvBlock {
    pub fn middle(&self) -> DMatrix<f64> {
        &self.w - &self.r * self.r.transpose()
    }

    /// The 4×4 contribution Nᵀ(W − rrᵀ)N.
    pub fn product(&self) -> DMatrix<f64> {
        self.n.transpose() * self.middle() * &self.n
    }

    pub fn middle_min_eigenvalue(&self) -> f64 {
        sym_eigenvalues(&self.middle())[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvGroup {
    pub i: usize,
    pub j: usize,
    pub block: TvBlock,
}

/// N maps (u_i, v_i, u_j, v_j) to (u_i − u_j, v_i − v_j); W = 2w·I and
/// r = √w·(1, 1), so W − rrᵀ = w·((1, −1), (−1, 1)).
pub fn tv_decompose_type12(weight: f64) -> Result<TvBlock> {
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(Error::InvalidInput(format!("weight must be positive, got {weight}")));
    }
    Ok(TvBlock {
        n: DMatrix::from_row_slice(2, 4, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]),
        w: DMatrix::from_diagonal_element(2, 2, 2.0 * weight),
        r: DVector::from_element(2, weight.sqrt()),
    })
}

/// One group per row: type 1 and type 2 rows are single Laplacian edges
/// (r = 0), type 1+2 rows use [`tv_decompose_type12`].
pub fn system_to_tv(system: &Mc2System) -> Result<Vec<TvGroup>> {
    system
        .rows
        .iter()
        .filter(|r| r.weight_sq > 0.0)
        .map(|r| {
            let w = r.scale() * r.scale();
            let block = match r.kind {
                RowKind::Type1 => TvBlock {
                    n: DMatrix::from_row_slice(1, 4, &[1.0, 0.0, -1.0, 0.0]),
                    w: DMatrix::from_element(1, 1, w),
                    r: DVector::zeros(1),
                },
                RowKind::Type2 => TvBlock {
                    n: DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 0.0, -1.0]),
                    w: DMatrix::from_element(1, 1, w),
                    r: DVector::zeros(1),
                },
                RowKind::Type12 => tv_decompose_type12(w)?,
            };
            Ok(TvGroup { i: r.i, j: r.j, block })
        })
        .collect()
}

/// Σ over groups of Nᵀ(W − rrᵀ)N on the global coordinates.
pub fn tv_assemble(groups: &[TvGroup], num_blocks: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * num_blocks, 2 * num_blocks);
    for g in groups {
        let idx = [u_coord(g.i), v_coord(g.i), u_coord(g.j), v_coord(g.j)];
        let p = g.block.product();
        for a in 0..4 {
            for b in 0..4 {
                m[(idx[a], idx[b])] += p[(a, b)];
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsa::LsaInstance;
    use crate::mc2::{reduce_gz2_to_mc2, Mc2Row};
    use crate::preprocess::Gz2Instance;

    fn worked() -> (Mc2System, Mc2Certificate) {
        let inst = LsaInstance::from_rows(&[vec![3.0, 5.0, 4.0, 4.0, -16.0]], &[1.0], 0.5).unwrap();
        reduce_gz2_to_mc2(&Gz2Instance::new(inst).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn grid_rounding_is_exact() {
        assert_eq!(round_to_grid(1.0), BigInt::from(GRID));
        assert_eq!(round_to_grid(-2.5e-10), BigInt::from(-3));
        assert_eq!(round_to_grid(0.3e-10), BigInt::from(0));
        let d = Dyadic::from_grid(round_to_grid(123.456));
        assert!((d.to_f64() - 123.456).abs() <= ROUND_PRECISION);
    }

    #[test]
    fn dyadic_arithmetic() {
        let a = Dyadic::from_int(3);
        let b = Dyadic::from_int(-1);
        assert_eq!(a.add(&b).half(), Dyadic::from_int(1));
        assert_eq!(a.sub(&b).to_f64(), 4.0);
        assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn first_gadget_sits_at_midpoint() {
        let (sys, cert) = worked();
        let geo = embed_truss(&sys, &cert, 7).unwrap();
        let g = &cert.gadgets[0];
        let mid = geo.exact[g.j].1.add(&geo.exact[g.l].1).half();
        assert_eq!(geo.exact[g.t].1, mid);
        let rep = verify_truss_rows(&sys, &geo);
        assert_eq!(rep.gadget_max, 0.0);
        assert_eq!(rep.gadget_rows, 50);
    }

    #[test]
    fn sphere_radius_and_rounding() {
        let (sys, cert) = worked();
        let geo = embed_truss(&sys, &cert, 1).unwrap();
        let norm = geo.raw_v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - geo.radius).abs() <= 1e-12 * geo.radius);
        assert_eq!(geo.radius, cert.a_norm_1 * 5f64.powi(10));
    }

    #[test]
    fn deviation_of_basic_directions() {
        let z = Dyadic::from_int(0);
        assert_eq!(row_deviation(RowKind::Type1, &Dyadic::from_int(2), &z), 0.0);
        assert_eq!(row_deviation(RowKind::Type12, &Dyadic::from_int(-3), &Dyadic::from_int(3)), 0.0);
        assert!((row_deviation(RowKind::Type2, &Dyadic::from_int(1), &z) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bitstrings_of_worked_example() {
        let (_, cert) = worked();
        let rep = bitstring_disjointness_check(&cert).unwrap();
        assert_eq!(rep.pairs_checked, 5);
        assert_eq!(rep.gap_violations, 0);
    }

    #[test]
    fn tv_type12_block() {
        let b = tv_decompose_type12(1.0).unwrap();
        let expect = DMatrix::from_row_slice(
            4,
            4,
            &[1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0, 1.0],
        );
        assert_eq!(b.product(), expect);
        assert_eq!(tv_decompose_type12(4.0).unwrap().product(), expect * 4.0);
        assert_eq!(b.middle(), DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        assert!(b.middle_min_eigenvalue() >= -1e-12);
        assert!(tv_decompose_type12(0.0).is_err());
    }

    #[test]
    fn tv_matches_normal_matrix() {
        let sys = Mc2System {
            num_blocks: 3,
            rows: vec![
                Mc2Row::new(RowKind::Type1, 0, 1, 2.0),
                Mc2Row { weight_sq: 3.0, ..Mc2Row::new(RowKind::Type12, 2, 1, -1.0) },
                Mc2Row::new(RowKind::Type2, 0, 2, 1.0),
            ],
            alpha: 1.0,
        };
        let groups = system_to_tv(&sys).unwrap();
        assert_eq!(groups[0].block.r, DVector::zeros(1));
        let dev = (tv_assemble(&groups, 3) - sys.normal_matrix()).abs().max();
        assert!(dev < 1e-14);
    }
}
