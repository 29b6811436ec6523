//! `gslh`: run the reduction chain on a Matrix Market system, check it
//! against the dense oracle, or decide whether c lies in im(A).

mod json;
mod output;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gslh_core::chain::{run_chain, ChainConfig, Target};
use gslh_core::lsd::{lsd_decide_capped, lsd_decide_iterative, LsdVerdict};
use gslh_core::mtx::{read_matrix, read_vector};
use gslh_core::oracle::DEFAULT_ORACLE_CAP;
use gslh_core::{ConditionMode, Error, LsaInstance};

/// Overrides `--seed` when set.
const SEED_ENV: &str = "GSLH_SEED";

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "gslh", version)]
#[command(about = "Reduce integer least-squares systems to 2-commodity systems and verify the reductions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the chain G → Gz → Gz2 → MC2 → strict → integer up to a target
    Reduce(ReduceArgs),
    /// Decide whether ‖Ax − c‖ ≤ ε‖c‖ is achievable
    Lsd(LsdArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Matrix Market coordinate file holding A
    #[arg(long)]
    matrix: PathBuf,

    /// Right-hand side c, one value per line
    #[arg(long)]
    rhs: PathBuf,

    /// Relative accuracy ε of the input instance
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
}

#[derive(Args)]
struct ReduceArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Last stage: gz, gz2, mc2, mc2_strict, mc2_strict_int, truss or tv
    #[arg(long, default_value = "mc2_strict_int")]
    target: Target,

    /// Weight of the auxiliary rows in the pairing stage
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,

    /// Seed of the truss embedding (GSLH_SEED takes precedence)
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Source of condition numbers: exact, bound or declared:<K>
    #[arg(long, default_value = "exact")]
    condition_mode: ConditionMode,

    /// Check every identity and bound against the dense oracle
    #[arg(long)]
    verify: bool,

    /// Largest dimension the dense oracle accepts
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    oracle_cap: usize,

    /// Directory for the system, certificate and report
    #[arg(long, default_value = "gslh-out")]
    out_dir: PathBuf,

    /// Also solve the final system and write its solution mapped back to A
    #[arg(long)]
    solve: bool,
}

#[derive(Args)]
struct LsdArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Use the iterative least-squares solver instead of the dense oracle
    #[arg(long)]
    iterative: bool,

    /// Relative normal-equation residual at which the iterative solver stops
    #[arg(long, default_value_t = 1e-12)]
    tolerance: f64,

    /// Largest dimension the dense oracle accepts
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    oracle_cap: usize,
}

/// Marks errors caused by the input files themselves.
#[derive(Debug)]
struct BadInput(String);

impl std::fmt::Display for BadInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn read_instance(args: &InputArgs) -> Result<LsaInstance> {
    let read = |p: &Path, what: &str| -> Result<BufReader<File>> {
        File::open(p).map(BufReader::new).context(BadInput(format!("cannot open {what} {}", p.display())))
    };
    let a =
        read_matrix(read(&args.matrix, "matrix")?).context(BadInput(format!("reading {}", args.matrix.display())))?;
    let c = read_vector(read(&args.rhs, "rhs")?).context(BadInput(format!("reading {}", args.rhs.display())))?;
    Ok(LsaInstance::new(a, c, args.epsilon)?)
}

fn seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s.trim().parse().with_context(|| BadInput(format!("{SEED_ENV}={s} is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

fn reduce(args: &ReduceArgs) -> Result<bool> {
    let input = read_instance(&args.input)?;
    let cfg = ChainConfig {
        target: args.target,
        epsilon: args.input.epsilon,
        alpha: args.alpha,
        seed: seed(args.seed)?,
        condition_mode: args.condition_mode,
        verify: args.verify,
        oracle_cap: args.oracle_cap,
    };
    let out = run_chain(&input, &cfg)?;
    for s in &out.truss_retries {
        eprintln!("gslh: truss seed {s} hit a degenerate pairing, retried with {}", s + 1);
    }
    let summary = output::write_all(&out, &args.out_dir, args.solve)?;
    eprintln!(
        "gslh: g -> {}: {} rows x {} cols, eps_final {:e}; wrote {}",
        cfg.target,
        summary.rows,
        summary.cols,
        out.eps_final(),
        args.out_dir.display()
    );
    if let Some(pass) = summary.verified {
        eprintln!("gslh: verification {}", if pass { "passed" } else { "FAILED (see report.json)" });
        return Ok(pass);
    }
    Ok(true)
}

#[derive(Serialize)]
struct LsdOutput<'a> {
    schema: &'a str,
    method: &'a str,
    #[serde(flatten)]
    verdict: LsdVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
}

fn lsd(args: &LsdArgs) -> Result<()> {
    let inst = read_instance(&args.input)?;
    let (verdict, iterations) = if args.iterative {
        let (v, it) = lsd_decide_iterative(&inst, args.tolerance)?;
        (v, Some(it))
    } else {
        (lsd_decide_capped(&inst, args.oracle_cap)?, None)
    };
    let method = if args.iterative { "iterative" } else { "dense" };
    print!("{}", json::to_string_pretty(&LsdOutput { schema: json::SCHEMA, method, verdict, iterations })?);
    Ok(())
}

/// Input and class violations exit with 2; everything else with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<BadInput>().is_some() {
        return EXIT_BAD_INPUT;
    }
    let input_error = err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<Error>(),
            Some(
                Error::Parse { .. }
                    | Error::InvalidInput(_)
                    | Error::DimensionMismatch(_)
                    | Error::ZeroMatrix
                    | Error::NotIntegerMatrix { .. }
                    | Error::EmptyRowOrColumn { .. }
                    | Error::NotZeroRowSum { .. }
                    | Error::NotGz2 { .. }
            )
        )
    });
    if input_error {
        EXIT_BAD_INPUT
    } else {
        EXIT_VERIFY_FAILED
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Reduce(args) => reduce(args),
        Command::Lsd(args) => lsd(args).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY_FAILED),
        Err(e) => {
            eprintln!("gslh: error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
