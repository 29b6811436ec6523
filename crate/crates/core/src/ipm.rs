//! Interior-point correspondence: flows from edge weights, the Newton
//! system M H⁻¹ Mᵀ = B̂ᵀWB̂, and merging of duplicate rows.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mc2::{u_coord, v_coord, Mc2Row, Mc2System, RowKind};

/// Which input rows were folded into each output row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeMap {
    pub groups: Vec<Vec<usize>>,
}

/// Collapses rows with the same (type, edge) into one. A row and its
/// reversal are the same equation up to sign, so rows are first oriented
/// to i < j with a positive factor (negating the right-hand side when
/// needed). With σ_k the factor of member k, the merged row has weight
/// Σσ_k², unit magnitude and right-hand side Σσ_k·ρ_k / √(Σσ_k²); this
/// keeps BᵀB and Bᵀc unchanged. Singleton rows are left as they are.
pub fn merge_duplicate_rows(system: &Mc2System) -> (Mc2System, MergeMap) {
    let mut order: Vec<(RowKind, usize, usize)> = Vec::new();
    let mut groups: BTreeMap<(RowKind, usize, usize), Vec<usize>> = BTreeMap::new();
    for (k, r) in system.rows.iter().enumerate() {
        let key = (r.kind, r.i.min(r.j), r.i.max(r.j));
        groups.entry(key).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        groups.get_mut(&key).expect("inserted").push(k);
    }
    let mut rows = Vec::with_capacity(order.len());
    let mut map = Vec::with_capacity(order.len());
    for key in order {
        let members = groups.remove(&key).expect("present");
        if members.len() == 1 {
            rows.push(system.rows[members[0]].clone());
        } else {
            let (kind, i, j) = key;
            let mut sum_sq = 0.0;
            let mut dot = 0.0;
            for &k in &members {
                let r = &system.rows[k];
                let orient = if r.i == i { 1.0 } else { -1.0 };
                let sigma = orient * r.scale();
                let (sigma, rho) = if sigma < 0.0 { (-sigma, -r.rhs) } else { (sigma, r.rhs) };
                // Accumulate w·m² directly so integer weights merge exactly.
                sum_sq += r.weight_sq * r.magnitude * r.magnitude;
                dot += sigma * rho;
            }
            let first = &system.rows[members[0]];
            let same_source = members.iter().all(|&k| system.rows[k].source == first.source);
            rows.push(Mc2Row {
                kind,
                i,
                j,
                magnitude: 1.0,
                weight_sq: sum_sq,
                rhs: dot / sum_sq.sqrt(),
                role: first.role,
                source: if same_source { first.source } else { None },
            });
        }
        map.push(members);
    }
    (Mc2System { num_blocks: system.num_blocks, rows, alpha: system.alpha }, MergeMap { groups: map })
}

/// Primal flows of one edge: commodity 1, commodity 2 and the slack
/// y_r = capacity − y₁ − y₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowTriple {
    pub y1: f64,
    pub y2: f64,
    pub yr: f64,
    /// y₁² + y₂² + y_r².
    pub alpha: f64,
}

impl FlowTriple {
    pub fn capacity(&self) -> f64 {
        self.y1 + self.y2 + self.yr
    }

    /// H_e = diag(1/y₁², 1/y₂²) + 11ᵀ/y_r², the barrier Hessian block.
    pub fn hessian(&self) -> Matrix2<f64> {
        let r = 1.0 / (self.yr * self.yr);
        Matrix2::new(1.0 / (self.y1 * self.y1) + r, r, r, 1.0 / (self.y2 * self.y2) + r)
    }

    /// Closed form H_e⁻¹ = (diag(y₁²y_r², y₂²y_r²) + y₁²y₂²·((1,−1),(−1,1)))/α.
    pub fn hessian_inverse(&self) -> Matrix2<f64> {
        let (a, b, r) = (self.y1 * self.y1, self.y2 * self.y2, self.yr * self.yr);
        Matrix2::new(a * r + a * b, -a * b, -a * b, b * r + a * b) / self.alpha
    }

    /// (w₁, w₂, w₁₊₂) = (y₁²y_r², y₂²y_r², y₁²y₂²)/α.
    pub fn weights(&self) -> (f64, f64, f64) {
        let (a, b, r) = (self.y1 * self.y1, self.y2 * self.y2, self.yr * self.yr);
        (a * r / self.alpha, b * r / self.alpha, a * b / self.alpha)
    }
}

/// Inverts the weight map: y₁² = w₁w₁₂/w₂ + w₁ + w₁₂, y₂² = w₂w₁₂/w₁ + w₂ + w₁₂,
/// y_r² = w₁w₂/w₁₂ + w₁ + w₂.
pub fn weights_to_flows(w1: f64, w2: f64, w12: f64) -> Result<FlowTriple> {
    if !(w1 > 0.0 && w2 > 0.0 && w12 > 0.0) || !(w1.is_finite() && w2.is_finite() && w12.is_finite()) {
        return Err(Error::NonStrictEdge { w1, w2, w12 });
    }
    let a = w1 * w12 / w2 + w1 + w12;
    let b = w2 * w12 / w1 + w2 + w12;
    let r = w1 * w2 / w12 + w1 + w2;
    Ok(FlowTriple { y1: a.sqrt(), y2: b.sqrt(), yr: r.sqrt(), alpha: a + b + r })
}

/// Recovers the weights from the flows through H = D + r·11ᵀ with
/// D = diag(1/y₁², 1/y₂²), r = 1/y_r², and returns the largest relative
/// error. H⁻¹ = D⁻¹ − r·D⁻¹11ᵀD⁻¹/(1 + r·1ᵀD⁻¹1) (Sherman–Morrison), so
/// w₁₊₂ is minus the off-diagonal and (w₁, w₂) = H⁻¹·1. Every step adds
/// positive numbers; reading w₁ = (H⁻¹)₀₀ − w₁₊₂ off a generic inverse
/// instead cancels when the weights span many orders of magnitude.
pub fn flow_round_trip_error(w1: f64, w2: f64, w12: f64) -> Result<f64> {
    let f = weights_to_flows(w1, w2, w12)?;
    let (d1, d2) = (f.y1 * f.y1, f.y2 * f.y2);
    let r = 1.0 / (f.yr * f.yr);
    let denom = 1.0 + r * (d1 + d2);
    let g12 = r * d1 * d2 / denom;
    let (g1, g2) = (d1 / denom, d2 / denom);
    Ok([(g1, w1), (g2, w2), (g12, w12)].iter().map(|(g, w)| ((g - w) / w).abs()).fold(0.0, f64::max))
}

/// Weights of the three types on one undirected edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeWeights {
    pub i: usize,
    pub j: usize,
    pub w1: f64,
    pub w2: f64,
    pub w12: f64,
}

/// Aggregates Σ(√w·m)² per (edge, type).
pub fn edge_weights(system: &Mc2System) -> Vec<EdgeWeights> {
    let mut acc: BTreeMap<(usize, usize), [f64; 3]> = BTreeMap::new();
    for r in &system.rows {
        let slot = acc.entry(r.edge()).or_default();
        let k = match r.kind {
            RowKind::Type1 => 0,
            RowKind::Type2 => 1,
            RowKind::Type12 => 2,
        };
        slot[k] += r.scale() * r.scale();
    }
    acc.into_iter().map(|((i, j), w)| EdgeWeights { i, j, w1: w[0], w2: w[1], w12: w[2] }).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonReport {
    pub edges: usize,
    pub flows: Vec<FlowTriple>,
    /// ‖MH⁻¹Mᵀ − B̂ᵀWB̂‖_max.
    pub max_deviation: f64,
    /// ‖B̂ᵀWB̂‖_max, the natural scale of the deviation.
    pub scale: f64,
    /// Smallest det(H_e) over the edges.
    pub min_hessian_det: f64,
}

/// Assembles M H⁻¹ Mᵀ = Σ_e N_eᵀ H_e⁻¹ N_e from flows and compares it to
/// the normal matrix of the system.
pub fn verify_newton_system(system: &Mc2System, cap: usize) -> Result<NewtonReport> {
    let dim = system.ncols();
    if dim > cap {
        return Err(Error::OracleCapExceeded { rows: system.rows.len(), cols: dim, cap });
    }
    let mut m = DMatrix::zeros(dim, dim);
    let mut flows = Vec::new();
    let mut min_det = f64::INFINITY;
    let edges = edge_weights(system);
    for e in &edges {
        let f = weights_to_flows(e.w1, e.w2, e.w12)?;
        min_det = min_det.min(f.hessian().determinant());
        let hinv = f.hessian_inverse();
        // N_e maps (u_i, v_i, u_j, v_j) to (u_i − u_j, v_i − v_j).
        let idx = [u_coord(e.i), v_coord(e.i), u_coord(e.j), v_coord(e.j)];
        let n = [[1.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, -1.0]];
        for a in 0..4 {
            for b in 0..4 {
                let mut s = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        s += n[p][a] * hinv[(p, q)] * n[q][b];
                    }
                }
                m[(idx[a], idx[b])] += s;
            }
        }
        flows.push(f);
    }
    let target = system.normal_matrix();
    Ok(NewtonReport {
        edges: edges.len(),
        flows,
        max_deviation: (m - &target).abs().max(),
        scale: target.abs().max(),
        min_hessian_det: min_det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_example() {
        let sys = Mc2System {
            num_blocks: 2,
            rows: vec![
                Mc2Row { rhs: 2.0, ..Mc2Row::new(RowKind::Type1, 0, 1, 1.0) },
                Mc2Row { weight_sq: 3.0, ..Mc2Row::new(RowKind::Type1, 0, 1, 1.0) },
            ],
            alpha: 1.0,
        };
        let (out, map) = merge_duplicate_rows(&sys);
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].weight_sq, 4.0);
        assert!((out.rows[0].rhs - 1.0).abs() < 1e-15);
        assert_eq!(map.groups, vec![vec![0, 1]]);
        assert_eq!(merge_duplicate_rows(&out).0, out);
    }

    #[test]
    fn reversed_rows_merge_with_sign() {
        let sys = Mc2System {
            num_blocks: 2,
            rows: vec![
                Mc2Row { rhs: 1.0, ..Mc2Row::new(RowKind::Type12, 0, 1, 1.0) },
                Mc2Row { rhs: 1.0, ..Mc2Row::new(RowKind::Type12, 1, 0, 2.0) },
                Mc2Row::new(RowKind::Type2, 0, 1, 1.0),
            ],
            alpha: 1.0,
        };
        let (out, _) = merge_duplicate_rows(&sys);
        assert_eq!(out.rows.len(), 2);
        assert!((out.normal_matrix() - sys.normal_matrix()).abs().max() < 1e-12);
        let (b0, c0) = sys.materialize();
        let (b1, c1) = out.materialize();
        assert!((b0.tr_mul_vec(&c0) - b1.tr_mul_vec(&c1)).abs().max() < 1e-12);
    }

    #[test]
    fn flows_unit_weights() {
        let f = weights_to_flows(1.0, 1.0, 1.0).unwrap();
        assert!((f.y1 * f.y1 - 3.0).abs() < 1e-15 && (f.alpha - 9.0).abs() < 1e-14);
        let (a, b, c) = f.weights();
        assert!((a - 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15 && (c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flows_mixed_weights() {
        let f = weights_to_flows(4.0, 1.0, 2.0).unwrap();
        assert!((f.y1 * f.y1 - 14.0).abs() < 1e-13);
        assert!((f.y2 * f.y2 - 3.5).abs() < 1e-13);
        assert!((f.yr * f.yr - 7.0).abs() < 1e-13);
        assert!((f.alpha - 24.5).abs() < 1e-13);
        assert!((f.weights().0 - 4.0).abs() < 1e-13);
        assert!(flow_round_trip_error(4.0, 1.0, 2.0).unwrap() < 1e-12);
        assert!(weights_to_flows(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn round_trip_survives_wide_weight_ranges() {
        for (a, b, c) in [(1e-6, 1e6, 1.0), (1e5, 1e-5, 1e-5), (1e-4, 1e-4, 1e4)] {
            assert!(flow_round_trip_error(a, b, c).unwrap() < 1e-13);
        }
    }

    #[test]
    fn closed_form_inverse_matches() {
        let f = weights_to_flows(0.3, 7.0, 2.5).unwrap();
        let prod = f.hessian() * f.hessian_inverse();
        assert!((prod - Matrix2::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn newton_single_edge() {
        let sys = Mc2System {
            num_blocks: 2,
            rows: vec![
                Mc2Row::new(RowKind::Type1, 0, 1, 1.0),
                Mc2Row::new(RowKind::Type2, 0, 1, 1.0),
                Mc2Row::new(RowKind::Type12, 0, 1, 1.0),
            ],
            alpha: 1.0,
        };
        let rep = verify_newton_system(&sys, 100).unwrap();
        assert_eq!(rep.edges, 1);
        assert!(rep.max_deviation < 1e-14);
        assert!(rep.min_hessian_det > 0.0);
    }
}
