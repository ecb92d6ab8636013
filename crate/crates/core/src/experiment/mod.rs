//! Reproducible experiment driver: parses a flat key=value config, fans out
//! seeded replicates (deterministically, independent of worker count), and
//! renders plot-ready CSV.
//!
//! Determinism contract: replicate `i` of grid point `g` always draws from
//! `replicate_rng(seed, g, i)`; results are collected in `(g, i)` order, and
//! all summary reductions run in that fixed order. Reruns with any worker
//! count produce byte-identical CSV.

mod runners;

pub use runners::{
    max_ecf_distance, verify_identity, EtCltRow, ExactOracleRow, IdentityReport, IdentityRow,
    PoissonRow, StableRow, WalkRow, STABLE_U_GRID,
};

use crate::error::{Error, Result};
use crate::factor::FactorModel;
use crate::limits::CaseTag;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Sample partitions of each n, standardize log T and log O, report
    /// goodness of fit to the case's limit law.
    EtClt,
    /// Chi-square of all three samplers against the exact small-n law.
    ExactOracle,
    /// Perturbed-walk counting processes and integral functionals.
    Walk,
    /// Centered-scaled sums of |log W| against the stable characteristic
    /// function.
    StableInput,
    /// Poissonization diagnostics: f_1 bounds and the deviation inequality.
    Poisson,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "et-clt" => Ok(Self::EtClt),
            "exact-oracle" => Ok(Self::ExactOracle),
            "walk" => Ok(Self::Walk),
            "stable-input" => Ok(Self::StableInput),
            "poisson" => Ok(Self::Poisson),
            other => Err(Error::Config(format!("unknown experiment kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::EtClt => "et-clt",
            Self::ExactOracle => "exact-oracle",
            Self::Walk => "walk",
            Self::StableInput => "stable-input",
            Self::Poisson => "poisson",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Model spec in the `beta:a,b | paretolog:alpha | table:<path>` grammar.
    pub model: String,
    pub kind: ExperimentKind,
    /// n-grid (sample sizes), x-grid (walk horizons), or t-grid (poisson).
    pub grid: Vec<u64>,
    pub reps: u64,
    pub case: Option<CaseTag>,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    /// Output path; `run` itself never writes, callers do.
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(model: &str, kind: ExperimentKind) -> Self {
        Self {
            model: model.to_string(),
            kind,
            grid: Vec::new(),
            reps: 1,
            case: None,
            seed: 0,
            workers: 0,
            out: None,
        }
    }

    pub fn parsed_model(&self) -> Result<FactorModel> {
        FactorModel::parse(&self.model)
    }

    pub fn validate(&self) -> Result<FactorModel> {
        let model = self.parsed_model()?;
        if self.reps < 1 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::Config("grid must be nonempty".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("grid must be strictly increasing".into()));
        }
        match self.kind {
            ExperimentKind::EtClt | ExperimentKind::Walk => {
                let case = self.case.ok_or_else(|| {
                    Error::Config(format!("kind {} needs a case tag", self.kind))
                })?;
                // surfaces case/model mismatches before any sampling
                crate::limits::scaling_a(&model, *self.grid.last().unwrap() as f64, case)?;
            }
            ExperimentKind::ExactOracle => {
                let max = *self.grid.last().unwrap();
                if max > crate::partition::EXACT_LAW_MAX_N {
                    return Err(Error::Config(format!(
                        "exact-oracle grid exceeds the exact-law limit {}",
                        crate::partition::EXACT_LAW_MAX_N
                    )));
                }
            }
            ExperimentKind::StableInput => match model.tail_class() {
                crate::factor::TailClass::RegVar { alpha, .. } if alpha > 1.0 && alpha < 2.0 => {}
                _ => {
                    return Err(Error::Config(
                        "stable-input needs a model with tail index alpha in (1,2)".into(),
                    ))
                }
            },
            ExperimentKind::Poisson => {
                if self.grid[0] <= 1 {
                    return Err(Error::Config("poisson grid needs t > 1".into()));
                }
            }
        }
        Ok(model)
    }

    /// Parse the flat `key=value` config format (one pair per line, `#`
    /// starts a comment).
    pub fn from_key_value(text: &str) -> Result<Self> {
        let mut model = None;
        let mut kind = None;
        let mut grid = Vec::new();
        let mut reps = 1u64;
        let mut case = None;
        let mut seed = 0u64;
        let mut workers = 0usize;
        let mut out = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Config(format!("line {}: bad {what} `{value}`", lineno + 1));
            match key {
                "model" => model = Some(value.to_string()),
                "kind" => kind = Some(value.parse()?),
                "grid" => {
                    grid = value
                        .split(',')
                        .map(|t| t.trim().parse::<u64>().map_err(|_| bad("grid entry")))
                        .collect::<Result<_>>()?;
                }
                "reps" => reps = value.parse().map_err(|_| bad("reps"))?,
                "case" => case = Some(value.parse()?),
                "seed" => seed = value.parse().map_err(|_| bad("seed"))?,
                "workers" => workers = value.parse().map_err(|_| bad("workers"))?,
                "out" => out = Some(PathBuf::from(value)),
                other => return Err(Error::Config(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        Ok(Self {
            model: model.ok_or_else(|| Error::Config("config missing `model`".into()))?,
            kind: kind.ok_or_else(|| Error::Config("config missing `kind`".into()))?,
            grid,
            reps,
            case,
            seed,
            workers,
            out,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_key_value(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone)]
pub enum ExperimentResult {
    EtClt(Vec<EtCltRow>),
    ExactOracle(Vec<ExactOracleRow>),
    Walk(Vec<WalkRow>),
    StableInput(Vec<StableRow>),
    Poisson(Vec<PoissonRow>),
}

impl ExperimentResult {
    pub fn row_count(&self) -> usize {
        match self {
            Self::EtClt(r) => r.len(),
            Self::ExactOracle(r) => r.len(),
            Self::Walk(r) => r.len(),
            Self::StableInput(r) => r.len(),
            Self::Poisson(r) => r.len(),
        }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        match self {
            Self::EtClt(rows) => {
                wtr.write_record(EtCltRow::HEADER)?;
                for r in rows {
                    wtr.write_record(r.record())?;
                }
            }
            Self::ExactOracle(rows) => {
                wtr.write_record(ExactOracleRow::HEADER)?;
                for r in rows {
                    wtr.write_record(r.record())?;
                }
            }
            Self::Walk(rows) => {
                wtr.write_record(WalkRow::HEADER)?;
                for r in rows {
                    wtr.write_record(r.record())?;
                }
            }
            Self::StableInput(rows) => {
                wtr.write_record(StableRow::HEADER)?;
                for r in rows {
                    wtr.write_record(r.record())?;
                }
            }
            Self::Poisson(rows) => {
                wtr.write_record(PoissonRow::HEADER)?;
                for r in rows {
                    wtr.write_record(r.record())?;
                }
            }
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}

/// Run the configured experiment. Pure given (config, seed): no clocks or
/// file paths influence the rows.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let model = config.validate()?;
    runners::with_pool(config.workers, || match config.kind {
        ExperimentKind::EtClt => runners::run_et_clt(config, &model).map(ExperimentResult::EtClt),
        ExperimentKind::ExactOracle => {
            runners::run_exact_oracle(config, &model).map(ExperimentResult::ExactOracle)
        }
        ExperimentKind::Walk => runners::run_walk(config, &model).map(ExperimentResult::Walk),
        ExperimentKind::StableInput => {
            runners::run_stable_input(config, &model).map(ExperimentResult::StableInput)
        }
        ExperimentKind::Poisson => runners::run_poisson(config).map(ExperimentResult::Poisson),
    })?
}
