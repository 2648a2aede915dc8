//! Command-line options, the optional TOML config file, and their merge
//! into a validated [`ExperimentConfig`].

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Deserializer};
use xml_ridge::reduce::default_density;
use xml_ridge::weighting::{DEFAULT_A, DEFAULT_B};
use xml_ridge::SolveMode;

use crate::error::{CliError, CliResult};

/// Options shared by every subcommand. Any of them (except `--config`) may
/// also be set in the config file using the same kebab-case names; flags win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Options {
    /// TOML config file
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Training set in repository text format
    #[arg(long, value_name = "FILE")]
    pub train: Option<PathBuf>,

    /// Test set in repository text format
    #[arg(long, value_name = "FILE")]
    pub test: Option<PathBuf>,

    /// Dense embeddings appended to the training features (text, or raw
    /// little-endian `.f32`/`.f64` with --dense-dim)
    #[arg(long, value_name = "FILE")]
    pub dense_embeddings: Option<PathBuf>,

    /// Dense embeddings appended to the test features
    #[arg(long, value_name = "FILE")]
    pub test_dense_embeddings: Option<PathBuf>,

    /// Column count of binary embedding files
    #[arg(long, value_name = "D")]
    pub dense_dim: Option<usize>,

    /// Model file (input for predict/eval/sparsify/stats)
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,

    /// Propensity file used for PSP@K
    #[arg(long, value_name = "FILE")]
    pub propensity: Option<PathBuf>,

    /// Regularization strength
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Comma-separated λ values for tune
    #[arg(long, value_delimiter = ',', value_name = "L1,L2,...")]
    #[serde(deserialize_with = "one_or_many")]
    pub lambda_grid: Option<Vec<f64>>,

    /// auto | primal | dual
    #[arg(long)]
    pub mode: Option<String>,

    /// Train on propensity-weighted labels
    #[arg(long)]
    pub ps: bool,

    /// Propensity parameter A
    #[arg(long)]
    pub ps_a: Option<f64>,

    /// Propensity parameter B
    #[arg(long)]
    pub ps_b: Option<f64>,

    /// L2-normalize feature rows
    #[arg(long)]
    pub normalize_rows: bool,

    /// svd:D or rp:D[:DENSITY]
    #[arg(long, value_name = "SPEC")]
    pub reduce: Option<String>,

    /// Cutoffs for P@K and PSP@K
    #[arg(long, value_delimiter = ',', value_name = "K1,K2,...")]
    #[serde(deserialize_with = "one_or_many")]
    pub k: Option<Vec<usize>>,

    /// Sparsification threshold(s)
    #[arg(long, value_delimiter = ',', value_name = "T1,T2,...")]
    #[serde(deserialize_with = "one_or_many")]
    pub threshold: Option<Vec<f64>>,

    /// Report PSP@K divided by the ideal ranking's score
    #[arg(long)]
    pub psp_normalized: bool,

    /// Validation metric for tune: p@K or psp@K
    #[arg(long)]
    pub metric: Option<String>,

    /// Held-out fraction for tune
    #[arg(long, value_name = "F")]
    pub validation_fraction: Option<f64>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker thread cap
    #[arg(long)]
    pub threads: Option<usize>,

    /// Output path
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(d: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(Option::<OneOrMany<T>>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

impl Options {
    /// Reads `--config` (if any) and fills every unset flag from it.
    pub fn with_config_file(self) -> CliResult<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
        let file = Self::from_toml(&text).map_err(|message| CliError::Config { path, message })?;
        Ok(self.over(file))
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }

    /// `self` with its unset fields taken from `base`.
    pub fn over(self, base: Self) -> Self {
        Self {
            config: self.config,
            train: self.train.or(base.train),
            test: self.test.or(base.test),
            dense_embeddings: self.dense_embeddings.or(base.dense_embeddings),
            test_dense_embeddings: self.test_dense_embeddings.or(base.test_dense_embeddings),
            dense_dim: self.dense_dim.or(base.dense_dim),
            model: self.model.or(base.model),
            propensity: self.propensity.or(base.propensity),
            lambda: self.lambda.or(base.lambda),
            lambda_grid: self.lambda_grid.or(base.lambda_grid),
            mode: self.mode.or(base.mode),
            ps: self.ps || base.ps,
            ps_a: self.ps_a.or(base.ps_a),
            ps_b: self.ps_b.or(base.ps_b),
            normalize_rows: self.normalize_rows || base.normalize_rows,
            reduce: self.reduce.or(base.reduce),
            k: self.k.or(base.k),
            threshold: self.threshold.or(base.threshold),
            psp_normalized: self.psp_normalized || base.psp_normalized,
            metric: self.metric.or(base.metric),
            validation_fraction: self.validation_fraction.or(base.validation_fraction),
            seed: self.seed.or(base.seed),
            threads: self.threads.or(base.threads),
            out: self.out.or(base.out),
        }
    }
}

/// Feature reduction requested on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReduceSpec {
    Svd { dim: usize },
    RandomProjection { dim: usize, density: Option<f64> },
}

impl ReduceSpec {
    pub fn dim(&self) -> usize {
        match *self {
            ReduceSpec::Svd { dim } | ReduceSpec::RandomProjection { dim, .. } => dim,
        }
    }

    pub fn density_for(&self, n_in: usize) -> f64 {
        match *self {
            ReduceSpec::RandomProjection { density: Some(d), .. } => d,
            _ => default_density(n_in),
        }
    }
}

impl FromStr for ReduceSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let dim = |t: &str| {
            t.parse::<usize>()
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| format!("bad reduction dimension {t:?}"))
        };
        match parts.as_slice() {
            ["svd", d] => Ok(ReduceSpec::Svd { dim: dim(d)? }),
            ["rp", d] => Ok(ReduceSpec::RandomProjection { dim: dim(d)?, density: None }),
            ["rp", d, p] => {
                let density = p.parse::<f64>().map_err(|_| format!("bad density {p:?}"))?;
                Ok(ReduceSpec::RandomProjection { dim: dim(d)?, density: Some(density) })
            }
            _ => Err(format!("expected svd:D or rp:D[:DENSITY], got {s:?}")),
        }
    }
}

impl fmt::Display for ReduceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ReduceSpec::Svd { dim } => write!(f, "svd:{dim}"),
            ReduceSpec::RandomProjection { dim, density: None } => write!(f, "rp:{dim}"),
            ReduceSpec::RandomProjection { dim, density: Some(p) } => write!(f, "rp:{dim}:{p}"),
        }
    }
}

/// Validation metric used by `tune`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Precision(usize),
    Psp(usize),
}

impl Metric {
    pub fn k(&self) -> usize {
        match *self {
            Metric::Precision(k) | Metric::Psp(k) => k,
        }
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let lower = s.to_ascii_lowercase();
        let (name, k) = lower.split_once('@').ok_or_else(|| format!("expected p@K or psp@K, got {s:?}"))?;
        let k: usize = k.parse().ok().filter(|&k| k > 0).ok_or_else(|| format!("bad cutoff in {s:?}"))?;
        match name {
            "p" => Ok(Metric::Precision(k)),
            "psp" => Ok(Metric::Psp(k)),
            _ => Err(format!("unknown metric {s:?}")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Metric::Precision(k) => write!(f, "P@{k}"),
            Metric::Psp(k) => write!(f, "PSP@{k}"),
        }
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub dense_embeddings: Option<PathBuf>,
    pub test_dense_embeddings: Option<PathBuf>,
    pub dense_dim: Option<usize>,
    pub model: Option<PathBuf>,
    pub propensity: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub mode: SolveMode,
    pub ps: bool,
    pub ps_a: f64,
    pub ps_b: f64,
    pub normalize_rows: bool,
    pub reduce: Option<ReduceSpec>,
    pub k_values: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub psp_normalized: bool,
    pub metric: Metric,
    pub validation_fraction: f64,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_options(o: Options) -> CliResult<Self> {
        let lambda_grid = match o.lambda_grid {
            Some(g) if g.is_empty() => return Err(CliError::usage("--lambda-grid is empty")),
            Some(mut g) => {
                if let Some(bad) = g.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
                    return Err(CliError::usage(format!("λ must be finite and nonnegative, got {bad}")));
                }
                g.sort_by(f64::total_cmp);
                g.dedup();
                Some(g)
            }
            None => None,
        };
        if let Some(l) = o.lambda.filter(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(CliError::usage(format!("λ must be finite and nonnegative, got {l}")));
        }
        let mut k_values = o.k.unwrap_or_else(|| vec![1, 3, 5]);
        if k_values.is_empty() || k_values.contains(&0) {
            return Err(CliError::usage("--k needs positive cutoffs"));
        }
        k_values.sort_unstable();
        k_values.dedup();
        let mode = match o.mode.as_deref() {
            None => SolveMode::Auto,
            Some(m) => m.parse().map_err(|_| CliError::usage(format!("unknown --mode {m:?}")))?,
        };
        let reduce = o.reduce.as_deref().map(str::parse).transpose().map_err(CliError::Usage)?;
        if let Some(ReduceSpec::RandomProjection { density: Some(p), .. }) = reduce {
            if !(p > 0.0 && p <= 1.0) {
                return Err(CliError::usage(format!("projection density {p} outside (0, 1]")));
            }
        }
        let metric = match o.metric.as_deref() {
            Some(m) => m.parse().map_err(CliError::Usage)?,
            None if o.ps => Metric::Psp(5),
            None => Metric::Precision(5),
        };
        let validation_fraction = o.validation_fraction.unwrap_or(0.1);
        if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
            return Err(CliError::usage("--validation-fraction must lie in (0, 1)"));
        }
        if o.threads == Some(0) {
            return Err(CliError::usage("--threads must be positive"));
        }
        Ok(Self {
            train: o.train,
            test: o.test,
            dense_embeddings: o.dense_embeddings,
            test_dense_embeddings: o.test_dense_embeddings,
            dense_dim: o.dense_dim,
            model: o.model,
            propensity: o.propensity,
            lambda: o.lambda,
            lambda_grid,
            mode,
            ps: o.ps,
            ps_a: o.ps_a.unwrap_or(DEFAULT_A),
            ps_b: o.ps_b.unwrap_or(DEFAULT_B),
            normalize_rows: o.normalize_rows,
            reduce,
            k_values,
            thresholds: o.threshold.unwrap_or_default(),
            psp_normalized: o.psp_normalized,
            metric,
            validation_fraction,
            seed: o.seed.unwrap_or(0),
            threads: o.threads,
            out: o.out,
        })
    }

    pub fn require<'a>(field: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
        field.as_deref().ok_or_else(|| CliError::usage(format!("{flag} is required")))
    }
}
