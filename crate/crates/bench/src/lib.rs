//! Fixed inputs shared by the benchmarks in `benches/`.

use gslh_core::gen::{g_suite, gz2_suite, Gz2Params, SPECTRAL_PARAMS};
use gslh_core::mc2::reduce_gz2_to_mc2;
use gslh_core::strictify::strictify;
use gslh_core::{Gz2Instance, LsaInstance, Mc2System, ReduceOptions};

/// Seed of every benchmark input.
pub const SEED: u64 = 2024;

/// The largest instance (by column count) of the default random Gz2 suite.
pub fn largest_gz2() -> Gz2Instance {
    gz2_suite(SEED, 60, &Gz2Params::default())
        .into_iter()
        .max_by_key(|g| (g.inner.ncols(), g.inner.matrix.nnz()))
        .expect("suite is nonempty")
}

/// A small integer instance of class G.
pub fn small_g() -> LsaInstance {
    g_suite(SEED, 1, 0.1).pop().expect("one instance")
}

/// (MC2 system, its ε) for the largest default-suite instance.
pub fn mc2_system() -> (Mc2System, f64) {
    let (b, cert) = reduce_gz2_to_mc2(&largest_gz2(), 1.0).expect("suite instance reduces");
    (b, cert.eps_out)
}

/// (strict system, its ε) built from a spectral-suite instance.
pub fn strict_system() -> (Mc2System, f64) {
    let g = gz2_suite(SEED, 1, &SPECTRAL_PARAMS).pop().expect("one instance");
    let (b, cert) = reduce_gz2_to_mc2(&g, 1.0).expect("reduces");
    let (s, sc) = strictify(&b, cert.eps_out, &ReduceOptions::default()).expect("strictifies");
    (s, sc.eps_out)
}
