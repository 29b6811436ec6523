//! MC2 → strict MC2: δ-weighted rows of the missing types so every edge
//! carries type 1, type 2 and type 1+2.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::Serialize;

use crate::complexity::{condition_number, sigma_max_bound};
use crate::error::{Error, Result};
use crate::mc2::{Mc2Row, Mc2System, RowKind, RowRole};
use crate::options::ReduceOptions;
use crate::oracle::normal_rhs_is_zero;
use crate::sparse::{norm2, SparseMatrix};

const KINDS: [RowKind; 3] = [RowKind::Type1, RowKind::Type2, RowKind::Type12];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrictCertificate {
    pub delta: f64,
    pub added_rows: Vec<Mc2Row>,
    pub eps_in: f64,
    pub eps_out: f64,
    /// κ(B) under the configured condition mode.
    pub kappa_used: f64,
    /// Decomposition-free upper bound on σ_max(B).
    pub sigma_used: f64,
    /// ‖c^B‖ (1 when c^B = 0, which keeps δ finite).
    pub rhs_norm_used: f64,
    /// Which type 1+2 pattern the added rows use.
    pub type12_pattern: &'static str,
}

/// The added type 1+2 rows follow the class pattern u_i − v_i − (u_j − v_j).
/// The alternative u_i + v_i − (u_j + v_j) differs by flipping the sign of
/// every v-coordinate, an orthogonal change of variables.
pub const TYPE12_PATTERN: &str = "u_i - v_i - (u_j - v_j)";

/// Types present (with positive weight) on each undirected edge.
fn edge_types(system: &Mc2System) -> BTreeMap<(usize, usize), [bool; 3]> {
    let mut have: BTreeMap<(usize, usize), [bool; 3]> = BTreeMap::new();
    for r in &system.rows {
        if r.i == r.j || r.weight_sq <= 0.0 {
            continue;
        }
        let slot = have.entry(r.edge()).or_default();
        slot[KINDS.iter().position(|k| *k == r.kind).expect("three kinds")] = true;
    }
    have
}

/// True iff L¹, L² and L^{1+2} share one nonzero pattern, i.e. every edge
/// that carries some type carries all three.
pub fn strictness_predicate(system: &Mc2System) -> bool {
    first_non_strict_edge(system).is_none()
}

pub fn first_non_strict_edge(system: &Mc2System) -> Option<(usize, usize)> {
    edge_types(system).into_iter().find(|(_, t)| !t.iter().all(|b| *b)).map(|(e, _)| e)
}

/// Adds magnitude-1 rows of weight δ² for every missing (edge, type), with
/// δ = ε/(100·κ(B)·σ̂_max(B)·‖c^B‖). Output order: original rows, then the
/// added rows sorted by (min block, max block, type).
pub fn strictify(system: &Mc2System, eps_in: f64, opts: &ReduceOptions) -> Result<(Mc2System, StrictCertificate)> {
    system.validate().map_err(|e| Error::NotMc2(e.to_string()))?;
    if !(eps_in > 0.0 && eps_in.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {eps_in}")));
    }
    let (b, cb) = system.materialize();
    let kappa = condition_number(&b, opts.condition_mode, opts.oracle_cap)?;
    let sigma = sigma_max_bound(&b)?;
    let cn = norm2(&cb);
    let rhs_norm_used = if cn > 0.0 { cn } else { 1.0 };
    let delta = eps_in / (100.0 * kappa * sigma * rhs_norm_used);

    let mut added = Vec::new();
    for ((i, j), present) in edge_types(system) {
        for (k, kind) in KINDS.iter().enumerate() {
            if !present[k] {
                added.push(Mc2Row { weight_sq: delta * delta, role: RowRole::Strict, ..Mc2Row::new(*kind, i, j, 1.0) });
            }
        }
    }
    let mut rows = system.rows.clone();
    rows.extend(added.iter().cloned());
    let out = Mc2System { num_blocks: system.num_blocks, rows, alpha: system.alpha };
    let cert = StrictCertificate {
        delta,
        added_rows: added,
        eps_in,
        eps_out: eps_in / 100.0,
        kappa_used: kappa,
        sigma_used: sigma,
        rhs_norm_used,
        type12_pattern: TYPE12_PATTERN,
    };
    Ok((out, cert))
}

/// Identity, or 0 when Bᵀc^B = 0.
pub fn mapback_strict(b: &SparseMatrix, c_b: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != b.ncols() || c_b.len() != b.nrows() {
        return Err(Error::DimensionMismatch(format!("x has {} entries, B has {} columns", x.len(), b.ncols())));
    }
    if normal_rhs_is_zero(b, c_b) {
        return Ok(DVector::zeros(x.len()));
    }
    Ok(x.clone())
}

/// Connected components of the block graph (isolated blocks count).
pub fn component_count(system: &Mc2System) -> usize {
    let mut parent: Vec<usize> = (0..system.num_blocks).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for r in &system.rows {
        if r.weight_sq > 0.0 {
            let (a, b) = (find(&mut parent, r.i), find(&mut parent, r.j));
            parent[a] = b;
        }
    }
    (0..system.num_blocks).filter(|&x| find(&mut parent, x) == x).count()
}

/// Null-space dimension of a strict system, known combinatorially: every
/// component contributes its constant u- and v-vectors and nothing else.
pub fn structural_nullity(system: &Mc2System) -> Result<usize> {
    if let Some((i, j)) = first_non_strict_edge(system) {
        return Err(Error::NotStrict(i, j));
    }
    Ok(2 * component_count(system))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigenvalues;

    fn single(kind: RowKind) -> Mc2System {
        Mc2System {
            num_blocks: 2,
            rows: vec![Mc2Row { rhs: 1.0, role: RowRole::Main, ..Mc2Row::new(kind, 0, 1, 1.0) }],
            alpha: 1.0,
        }
    }

    #[test]
    fn single_edge_gets_two_rows() {
        let sys = single(RowKind::Type1);
        assert!(!strictness_predicate(&sys));
        let (out, cert) = strictify(&sys, 0.5, &ReduceOptions::default()).unwrap();
        assert_eq!(cert.added_rows.len(), 2);
        assert_eq!(cert.added_rows[0].kind, RowKind::Type2);
        assert_eq!(cert.added_rows[1].kind, RowKind::Type12);
        assert!(cert.added_rows.iter().all(|r| r.weight_sq == cert.delta * cert.delta));
        assert_eq!(cert.eps_out, 0.005);
        assert!(strictness_predicate(&out));
        assert_eq!(structural_nullity(&out).unwrap(), 2);
    }

    #[test]
    fn strict_edge_untouched() {
        let mut sys = single(RowKind::Type1);
        sys.rows.push(Mc2Row::new(RowKind::Type2, 1, 0, 1.0));
        sys.rows.push(Mc2Row::new(RowKind::Type12, 0, 1, 2.0));
        assert!(strictness_predicate(&sys));
        let (out, cert) = strictify(&sys, 0.5, &ReduceOptions::default()).unwrap();
        assert!(cert.added_rows.is_empty());
        assert_eq!(out.rows.len(), 3);
    }

    #[test]
    fn empty_system_is_strict() {
        let sys = Mc2System { num_blocks: 3, rows: vec![], alpha: 1.0 };
        assert!(strictness_predicate(&sys));
        assert_eq!(structural_nullity(&sys).unwrap(), 6);
    }

    #[test]
    fn structural_nullity_matches_spectrum() {
        let (out, _) = strictify(&single(RowKind::Type12), 0.5, &ReduceOptions::default()).unwrap();
        let ev = sym_eigenvalues(&out.normal_matrix());
        assert!(ev[1].abs() < 1e-12 && ev[2] > 1e-12);
    }

    #[test]
    fn mapback_branches() {
        let b = SparseMatrix::from_rows(&[vec![1.0, -1.0]]);
        let x = DVector::from_vec(vec![2.0, 3.0]);
        assert_eq!(mapback_strict(&b, &DVector::from_vec(vec![1.0]), &x).unwrap(), x);
        assert_eq!(mapback_strict(&b, &DVector::from_vec(vec![0.0]), &x).unwrap(), DVector::zeros(2));
    }
}
