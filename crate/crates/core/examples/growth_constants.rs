//! Prints the worst implied constant of every growth bound over the seeded
//! suites, the numbers the harness constants are pinned from.
//!
//! `SUITE=spectral` switches the Gz2 suite to the smaller shape used for
//! the strict and integer spectral checks.

use gslh_core::chain::{run_chain, ChainConfig, Target};
use gslh_core::gen::{g_suite, gz2_suite, Gz2Params};
use gslh_core::harness::{growth_table, mc2_kappa_bound, mc2_nnz_constant, strict_spectrum, C_MC2_KAPPA};
use gslh_core::mc2::reduce_gz2_to_mc2;
use gslh_core::strictify::strictify;
use gslh_core::ReduceOptions;

fn main() {
    let opts = ReduceOptions::default();
    let (mut nnz_c, mut kappa_c, mut strict_c) = (0.0f64, 0.0f64, f64::INFINITY);
    let mut unresolved = 0;
    let params = match std::env::var("SUITE").as_deref() {
        Ok("spectral") => gslh_core::gen::SPECTRAL_PARAMS,
        _ => Gz2Params::default(),
    };
    for g in gz2_suite(2024, 60, &params) {
        let (b, cert) = reduce_gz2_to_mc2(&g, 1.0).unwrap();
        nnz_c = nnz_c.max(mc2_nnz_constant(&g.inner.matrix, &b));
        let (k, bound) = mc2_kappa_bound(&g.inner.matrix, &b, 2000).unwrap();
        kappa_c = kappa_c.max(k / bound * C_MC2_KAPPA);
        let (s, sc) = strictify(&b, cert.eps_out, &opts).unwrap();
        let sp = strict_spectrum(&s, 2000).unwrap();
        let c = sp.sigma_min * s.num_blocks as f64 / sc.delta;
        if sp.sigma_min > 2.0 * sp.resolution {
            strict_c = strict_c.min(c);
        } else {
            unresolved += 1;
        }
        println!(
            "n={:2} m={} blocks={:4} delta={:.2e} smin={:.2e} res={:.2e} C={:.3e}",
            g.inner.ncols(),
            g.inner.nrows(),
            b.num_blocks,
            sc.delta,
            sp.sigma_min,
            sp.resolution,
            c
        );
    }
    println!("gz2 suite: max nnz C = {nnz_c:.3}, max mc2 kappa C = {kappa_c:.3e}, min strict sigma C = {strict_c:.3e}, unresolved = {unresolved}");

    let mut worst: std::collections::BTreeMap<String, f64> = Default::default();
    for inst in g_suite(7, 60, 0.1) {
        let out = run_chain(&inst, &ChainConfig { target: Target::Mc2, ..Default::default() }).unwrap();
        for r in growth_table(&out).unwrap() {
            let e = worst.entry(r.name.clone()).or_insert(0.0);
            *e = e.max(r.measured / r.bound);
        }
    }
    for (k, v) in worst {
        println!("g suite: {k:20} max measured/bound = {v:.3e}");
    }
}
