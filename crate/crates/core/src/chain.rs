//! Composition of the stages G → Gz → Gz2 → MC2 → strict → integer, with
//! the optional truss and TV forms, the reverse solution map and a
//! per-stage complexity ledger.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::Serialize;

use crate::complexity::{measure_complexity_capped, ConditionMode, SparseComplexity};
use crate::error::{Error, Result};
use crate::geometry::{embed_truss, system_to_tv, TrussGeometry, TvGroup};
use crate::integerize::{integerize, mapback_int, IntegerizeCertificate};
use crate::lsa::LsaInstance;
use crate::mc2::{mapback_mc2, reduce_gz2_to_mc2, Mc2Certificate, Mc2System};
use crate::options::ReduceOptions;
use crate::oracle::DEFAULT_ORACLE_CAP;
use crate::preprocess::{
    mapback_gz, mapback_gz2, reduce_g_to_gz, reduce_gz_to_gz2, Gz2Instance, GzInstance, PreprocessCertificate,
};
use crate::strictify::{mapback_strict, strictify, StrictCertificate};

/// How far down the chain to go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Gz,
    Gz2,
    Mc2,
    Mc2Strict,
    Mc2StrictInt,
    /// MC2 plus a planar embedding of every block.
    Truss,
    /// Strict MC2 plus its TV decomposition.
    Tv,
}

impl Target {
    pub const ALL: [Target; 7] =
        [Target::Gz, Target::Gz2, Target::Mc2, Target::Mc2Strict, Target::Mc2StrictInt, Target::Truss, Target::Tv];

    pub fn name(self) -> &'static str {
        match self {
            Target::Gz => "gz",
            Target::Gz2 => "gz2",
            Target::Mc2 => "mc2",
            Target::Mc2Strict => "mc2_strict",
            Target::Mc2StrictInt => "mc2_strict_int",
            Target::Truss => "truss",
            Target::Tv => "tv",
        }
    }

    fn needs_mc2(self) -> bool {
        !matches!(self, Target::Gz | Target::Gz2)
    }

    fn needs_strict(self) -> bool {
        matches!(self, Target::Mc2Strict | Target::Mc2StrictInt | Target::Tv)
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown target '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainConfig {
    pub target: Target,
    pub epsilon: f64,
    pub alpha: f64,
    pub seed: u64,
    pub condition_mode: ConditionMode,
    pub verify: bool,
    pub oracle_cap: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            target: Target::Mc2StrictInt,
            epsilon: 0.1,
            alpha: 1.0,
            seed: 0,
            condition_mode: ConditionMode::Exact,
            verify: false,
            oracle_cap: DEFAULT_ORACLE_CAP,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.oracle_cap == 0 {
            return Err(Error::InvalidInput("oracle cap must be at least 1".into()));
        }
        Ok(())
    }

    pub fn reduce_options(&self) -> ReduceOptions {
        ReduceOptions { condition_mode: self.condition_mode, oracle_cap: self.oracle_cap, allow_zero_sum_column: true }
    }
}

/// (s, U, K, 1/ε) of one stage's output, with the mode K was obtained in
/// (exact falls back to bound when the stage exceeds the oracle cap).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageComplexity {
    pub stage: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub complexity: SparseComplexity,
    pub condition_mode: ConditionMode,
}

fn stage_complexity(stage: &'static str, inst: &LsaInstance, cfg: &ChainConfig) -> Result<StageComplexity> {
    let (complexity, mode) = match measure_complexity_capped(inst, cfg.condition_mode, cfg.oracle_cap) {
        Ok(c) => (c, cfg.condition_mode),
        Err(Error::OracleCapExceeded { .. }) => {
            (measure_complexity_capped(inst, ConditionMode::Bound, cfg.oracle_cap)?, ConditionMode::Bound)
        }
        Err(e) => return Err(e),
    };
    Ok(StageComplexity { stage, rows: inst.nrows(), cols: inst.ncols(), complexity, condition_mode: mode })
}

/// Every intermediate system and certificate produced by [`run_chain`].
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub config: ChainConfig,
    pub input: LsaInstance,
    pub gz: (GzInstance, PreprocessCertificate),
    pub gz2: Option<(Gz2Instance, PreprocessCertificate)>,
    pub mc2: Option<(Mc2System, Mc2Certificate)>,
    pub strict: Option<(Mc2System, StrictCertificate)>,
    pub int: Option<(Mc2System, IntegerizeCertificate)>,
    pub truss: Option<TrussGeometry>,
    /// Seeds that hit a degenerate pairing before the embedding succeeded.
    pub truss_retries: Vec<u64>,
    pub tv: Option<Vec<TvGroup>>,
    pub ledger: Vec<StageComplexity>,
}

/// How many consecutive seeds the truss stage tries before giving up.
pub const TRUSS_SEED_ATTEMPTS: u64 = 16;

pub fn run_chain(input: &LsaInstance, cfg: &ChainConfig) -> Result<ChainOutput> {
    cfg.validate()?;
    let opts = cfg.reduce_options();
    let mut ledger = vec![stage_complexity("g", input, cfg)?];

    let gz = reduce_g_to_gz(input, &opts)?;
    ledger.push(stage_complexity("gz", &gz.0.inner, cfg)?);
    let mut out = ChainOutput {
        config: *cfg,
        input: input.clone(),
        gz,
        gz2: None,
        mc2: None,
        strict: None,
        int: None,
        truss: None,
        truss_retries: Vec::new(),
        tv: None,
        ledger: Vec::new(),
    };
    if cfg.target == Target::Gz {
        out.ledger = ledger;
        return Ok(out);
    }

    let gz2 = reduce_gz_to_gz2(&out.gz.0, &opts)?;
    ledger.push(stage_complexity("gz2", &gz2.0.inner, cfg)?);
    out.gz2 = Some(gz2);
    if !cfg.target.needs_mc2() {
        out.ledger = ledger;
        return Ok(out);
    }

    let gz2_inst = &out.gz2.as_ref().expect("gz2 stage ran").0;
    let (mc2, mc2_cert) = reduce_gz2_to_mc2(gz2_inst, cfg.alpha)?;
    ledger.push(stage_complexity("mc2", &mc2.to_instance(mc2_cert.eps_out)?, cfg)?);

    if cfg.target == Target::Truss {
        let mut seed = cfg.seed;
        loop {
            match embed_truss(&mc2, &mc2_cert, seed) {
                Ok(g) => {
                    out.truss = Some(g);
                    break;
                }
                Err(Error::DegeneratePairing { .. }) if seed - cfg.seed + 1 < TRUSS_SEED_ATTEMPTS => {
                    out.truss_retries.push(seed);
                    seed += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    out.mc2 = Some((mc2, mc2_cert));
    if !cfg.target.needs_strict() {
        out.ledger = ledger;
        return Ok(out);
    }

    let (mc2, mc2_cert) = out.mc2.as_ref().expect("mc2 stage ran");
    let (strict, strict_cert) = strictify(mc2, mc2_cert.eps_out, &opts)?;
    ledger.push(stage_complexity("mc2_strict", &strict.to_instance(strict_cert.eps_out)?, cfg)?);
    if cfg.target == Target::Tv {
        out.tv = Some(system_to_tv(&strict)?);
    }
    if cfg.target == Target::Mc2StrictInt {
        let (int, int_cert) = integerize(&strict, strict_cert.eps_out)?;
        ledger.push(stage_complexity("mc2_strict_int", &int.to_instance(int_cert.eps_out)?, cfg)?);
        out.int = Some((int, int_cert));
    }
    out.strict = Some((strict, strict_cert));
    out.ledger = ledger;
    Ok(out)
}

impl ChainOutput {
    /// The last linear system of the chain, with its ε.
    pub fn final_instance(&self) -> Result<LsaInstance> {
        if let Some((s, c)) = &self.int {
            return s.to_instance(c.eps_out);
        }
        if let Some((s, c)) = &self.strict {
            return s.to_instance(c.eps_out);
        }
        if let Some((s, c)) = &self.mc2 {
            return s.to_instance(c.eps_out);
        }
        if let Some((g, _)) = &self.gz2 {
            return Ok(g.inner.clone());
        }
        Ok(self.gz.0.inner.clone())
    }

    /// ε demanded of a solution of [`ChainOutput::final_instance`].
    pub fn eps_final(&self) -> f64 {
        if let Some((_, c)) = &self.int {
            c.eps_out
        } else if let Some((_, c)) = &self.strict {
            c.eps_out
        } else if let Some((_, c)) = &self.mc2 {
            c.eps_out
        } else if let Some((_, c)) = &self.gz2 {
            c.eps_out
        } else {
            self.gz.1.eps_out
        }
    }

    /// Applies every stage's solution map in reverse, turning a solution of
    /// the final system into one of the input.
    pub fn map_back(&self, x_final: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = x_final.clone();
        if self.int.is_some() {
            x = mapback_int(&x);
        }
        if self.strict.is_some() {
            let (mc2, _) = self.mc2.as_ref().expect("strict implies mc2");
            let (b, cb) = mc2.materialize();
            x = mapback_strict(&b, &cb, &x)?;
        }
        if self.mc2.is_some() {
            let g = &self.gz2.as_ref().expect("mc2 implies gz2").0.inner;
            x = mapback_mc2(&g.matrix, &g.rhs, &x)?;
        }
        if self.gz2.is_some() {
            let g = &self.gz.0.inner;
            x = mapback_gz2(&g.matrix, &g.rhs, &x)?;
        }
        mapback_gz(&self.input.matrix, &x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{check_lsa_solution, solve_dense};

    fn small() -> LsaInstance {
        LsaInstance::from_rows(&[vec![2.0, -1.0, 0.0], vec![1.0, 1.0, 3.0]], &[1.0, -2.0], 0.1).unwrap()
    }

    #[test]
    fn target_names_round_trip() {
        for t in Target::ALL {
            assert_eq!(t.name().parse::<Target>().unwrap(), t);
        }
        assert!("mc3".parse::<Target>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig::default().validate().is_ok());
        assert!(ChainConfig { epsilon: 1.0, ..Default::default() }.validate().is_err());
        assert!(ChainConfig { oracle_cap: 0, ..Default::default() }.validate().is_err());
        assert!(ChainConfig { alpha: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn stops_at_each_target() {
        let inst = small();
        for t in Target::ALL {
            let out = run_chain(&inst, &ChainConfig { target: t, ..Default::default() }).unwrap();
            assert_eq!(out.gz2.is_some(), t != Target::Gz);
            assert_eq!(out.mc2.is_some(), t.needs_mc2());
            assert_eq!(out.strict.is_some(), t.needs_strict());
            assert_eq!(out.int.is_some(), t == Target::Mc2StrictInt);
            assert_eq!(out.truss.is_some(), t == Target::Truss);
            assert_eq!(out.tv.is_some(), t == Target::Tv);
        }
    }

    #[test]
    fn integer_target_has_integer_entries() {
        let out = run_chain(&small(), &ChainConfig::default()).unwrap();
        let fin = out.final_instance().unwrap();
        assert!(fin.matrix.is_integer());
        assert_eq!(out.ledger.len(), 6);
        assert!(out.eps_final() < out.input.epsilon);
    }

    #[test]
    fn exact_solution_maps_back() {
        let inst = small();
        for t in Target::ALL {
            let out = run_chain(&inst, &ChainConfig { target: t, ..Default::default() }).unwrap();
            let fin = out.final_instance().unwrap();
            let o = solve_dense(&fin.matrix, &fin.rhs, 2000).unwrap();
            let x = out.map_back(&o.minimizer).unwrap();
            let oa = solve_dense(&inst.matrix, &inst.rhs, 2000).unwrap();
            let chk = check_lsa_solution(&inst, &x, &oa).unwrap();
            assert!(chk.ratio <= inst.epsilon, "{t}: ratio {}", chk.ratio);
        }
    }
}
