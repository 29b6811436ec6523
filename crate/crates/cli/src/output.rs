//! Files written by `gslh reduce`: the final system, the certificate chain
//! and the verification report.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use gslh_core::chain::{ChainConfig, ChainOutput, StageComplexity};
use gslh_core::geometry::{TrussGeometry, TvGroup};
use gslh_core::harness::{all_pass, harness_report, normal_residual, HarnessRow};
use gslh_core::integerize::IntegerizeCertificate;
use gslh_core::lsd::iterative_solve;
use gslh_core::mc2::Mc2Certificate;
use gslh_core::mtx::{write_matrix, write_vector, Field};
use gslh_core::nalgebra::DVector;
use gslh_core::oracle::solve_dense;
use gslh_core::preprocess::PreprocessCertificate;
use gslh_core::strictify::StrictCertificate;
use gslh_core::{Error, Mc2Row};

use crate::json::{to_string_pretty, SCHEMA};

pub const SYSTEM_FILE: &str = "system.mtx";
pub const RHS_FILE: &str = "rhs.txt";
pub const CERTIFICATE_FILE: &str = "certificate.json";
pub const REPORT_FILE: &str = "report.json";
pub const SOLUTION_FILE: &str = "solution.txt";
pub const FINAL_SOLUTION_FILE: &str = "final_solution.txt";

/// Normal-residual target for the iterative fallback of `--solve`.
const SOLVE_TARGET: f64 = 1e-12;

#[derive(Serialize)]
struct Shape {
    rows: usize,
    cols: usize,
    nnz: usize,
    epsilon: f64,
}

#[derive(Serialize)]
struct Stages<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    gz: Option<&'a PreprocessCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gz2: Option<&'a PreprocessCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mc2: Option<&'a Mc2Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    strict: Option<&'a StrictCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    int: Option<&'a IntegerizeCertificate>,
}

#[derive(Serialize)]
struct Certificate<'a> {
    schema: &'static str,
    config: &'a ChainConfig,
    input: Shape,
    output: Shape,
    stages: Stages<'a>,
    ledger: &'a [StageComplexity],
    /// Typed rows of the final 2-commodity system, in row order.
    #[serde(skip_serializing_if = "Option::is_none")]
    edges: Option<&'a [Mc2Row]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    num_blocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truss: Option<&'a TrussGeometry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    truss_retries: &'a Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tv: Option<&'a [TvGroup]>,
}

#[derive(Serialize)]
struct Solve {
    method: &'static str,
    /// ‖Bᵀ(Bx − c)‖/‖Bᵀc‖ of the final solution.
    final_normal_residual: f64,
    /// ‖Aᵀ(Ax − c)‖/‖Aᵀc‖ of the mapped-back solution.
    input_normal_residual: f64,
}

#[derive(Serialize)]
struct Report<'a> {
    schema: &'static str,
    target: &'static str,
    verified: bool,
    /// Overall verdict; absent without `--verify`.
    pass: Option<bool>,
    rows: &'a [HarnessRow],
    ledger: &'a [StageComplexity],
    #[serde(skip_serializing_if = "Option::is_none")]
    solve: Option<Solve>,
}

pub struct Summary {
    pub rows: usize,
    pub cols: usize,
    pub verified: Option<bool>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let mut w = create(dir, name)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn write_vec(dir: &Path, name: &str, v: &DVector<f64>) -> Result<()> {
    let mut w = create(dir, name)?;
    write_vector(&mut w, v)?;
    w.flush()?;
    Ok(())
}

/// Least-squares solution of the final system: dense oracle when it fits,
/// the iterative solver otherwise.
fn solve_final(out: &ChainOutput) -> Result<(DVector<f64>, &'static str)> {
    let fin = out.final_instance()?;
    match solve_dense(&fin.matrix, &fin.rhs, out.config.oracle_cap) {
        Ok(o) => Ok((o.minimizer, "dense")),
        Err(Error::OracleCapExceeded { .. }) => {
            Ok((iterative_solve(&fin.matrix, &fin.rhs, SOLVE_TARGET)?.x, "iterative"))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn write_all(out: &ChainOutput, dir: &Path, solve: bool) -> Result<Summary> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let fin = out.final_instance()?;
    let field = if out.int.is_some() { Field::Integer } else { Field::Real };
    let mut w = create(dir, SYSTEM_FILE)?;
    write_matrix(&mut w, &fin.matrix, field)?;
    w.flush()?;
    write_vec(dir, RHS_FILE, &fin.rhs)?;

    let final_system =
        out.int.as_ref().map(|(s, _)| s).or(out.strict.as_ref().map(|(s, _)| s)).or(out.mc2.as_ref().map(|(s, _)| s));
    let cert = Certificate {
        schema: SCHEMA,
        config: &out.config,
        input: Shape {
            rows: out.input.nrows(),
            cols: out.input.ncols(),
            nnz: out.input.matrix.nnz(),
            epsilon: out.input.epsilon,
        },
        output: Shape { rows: fin.nrows(), cols: fin.ncols(), nnz: fin.matrix.nnz(), epsilon: fin.epsilon },
        stages: Stages {
            gz: Some(&out.gz.1),
            gz2: out.gz2.as_ref().map(|(_, c)| c),
            mc2: out.mc2.as_ref().map(|(_, c)| c),
            strict: out.strict.as_ref().map(|(_, c)| c),
            int: out.int.as_ref().map(|(_, c)| c),
        },
        ledger: &out.ledger,
        edges: final_system.map(|s| s.rows.as_slice()),
        num_blocks: final_system.map(|s| s.num_blocks),
        truss: out.truss.as_ref(),
        truss_retries: &out.truss_retries,
        tv: out.tv.as_deref(),
    };
    write_text(dir, CERTIFICATE_FILE, &to_string_pretty(&cert)?)?;

    let rows = if out.config.verify { harness_report(out)? } else { Vec::new() };
    let verified = out.config.verify.then(|| all_pass(&rows));

    let solve = if solve {
        let (x_final, method) = solve_final(out)?;
        let x = out.map_back(&x_final)?;
        write_vec(dir, FINAL_SOLUTION_FILE, &x_final)?;
        write_vec(dir, SOLUTION_FILE, &x)?;
        Some(Solve {
            method,
            final_normal_residual: normal_residual(&fin, &x_final),
            input_normal_residual: normal_residual(&out.input, &x),
        })
    } else {
        None
    };
    let report = Report {
        schema: SCHEMA,
        target: out.config.target.name(),
        verified: out.config.verify,
        pass: verified,
        rows: &rows,
        ledger: &out.ledger,
        solve,
    };
    write_text(dir, REPORT_FILE, &to_string_pretty(&report)?)?;
    Ok(Summary { rows: fin.nrows(), cols: fin.ncols(), verified })
}
