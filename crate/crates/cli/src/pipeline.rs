//! Loading and feature preparation shared by the subcommands.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use xml_ridge::weighting::compute_propensity;
use xml_ridge::data::{read_dense_binary, read_dense_text};
use xml_ridge::reduce::{DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS};
use xml_ridge::{
    apply_reduction, concat_features, fit_sparse_random_projection, fit_truncated_svd, parse_dataset, train,
    Dataset, DenseMatrix, Error as CoreError, PropensityModel, ReductionTransform, RidgeModel, RidgeSolveConfig,
    SparseMatrix,
};

use crate::config::{ExperimentConfig, ReduceSpec};
use crate::error::{CliError, CliResult};

pub const KEY_SPARSE_FEATURES: &str = "sparse_features";
pub const KEY_DENSE_DIM: &str = "dense_dim";
pub const KEY_NORMALIZE: &str = "normalize_rows";
pub const KEY_REDUCE: &str = "reduce";
pub const KEY_SEED: &str = "seed";
pub const KEY_PS_A: &str = "ps_a";
pub const KEY_PS_B: &str = "ps_b";
pub const KEY_NUM_TRAIN: &str = "num_train";
pub const KEY_MODE: &str = "solve_mode";

/// `<path>.<ext>` next to a model file.
pub fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn load_dataset(path: &Path) -> CliResult<Dataset> {
    parse_dataset(open(path)?).map_err(|e| CliError::at(path, e))
}

/// Text matrix, or raw little-endian floats when the extension is `f32`/`f64`.
pub fn load_dense(path: &Path, dim: Option<usize>) -> CliResult<DenseMatrix> {
    let width = match path.extension().and_then(|e| e.to_str()) {
        Some("f32") => Some(4),
        Some("f64") => Some(8),
        _ => None,
    };
    match width {
        Some(w) => {
            let cols = dim.ok_or_else(|| CliError::usage("binary embeddings need --dense-dim"))?;
            let bytes = fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
            read_dense_binary(&bytes, cols, w).map_err(|e| CliError::at(path, e))
        }
        None => read_dense_text(open(path)?).map_err(|e| CliError::at(path, e)),
    }
}

/// Sparse features widened to `sparse_cols`, then dense columns, then
/// optional row normalization.
pub fn assemble(
    features: &SparseMatrix,
    sparse_cols: usize,
    dense: Option<&DenseMatrix>,
    normalize: bool,
) -> CliResult<SparseMatrix> {
    if features.cols() > sparse_cols {
        return Err(CoreError::mismatch("sparse feature dimension", sparse_cols, features.cols()).into());
    }
    let mut x = features.clone().widen(sparse_cols);
    if let Some(d) = dense {
        x = concat_features(&x, d)?;
    }
    if normalize {
        x = x.l2_normalize_rows();
    }
    Ok(x)
}

/// Training data after embedding concatenation and normalization, with the
/// provenance entries describing those steps.
pub struct TrainingInput {
    pub data: Dataset,
    pub sparse_features: usize,
    pub dense_dim: Option<usize>,
}

pub fn load_training(cfg: &ExperimentConfig) -> CliResult<TrainingInput> {
    let path = ExperimentConfig::require(&cfg.train, "--train")?;
    let raw = load_dataset(path)?;
    let dense = cfg
        .dense_embeddings
        .as_deref()
        .map(|p| load_dense(p, cfg.dense_dim))
        .transpose()?;
    let sparse_features = raw.num_features();
    let x = assemble(raw.features(), sparse_features, dense.as_ref(), cfg.normalize_rows)?;
    Ok(TrainingInput {
        data: raw.with_features(x)?,
        sparse_features,
        dense_dim: dense.map(|d| d.cols()),
    })
}

pub fn fit_reduction(spec: ReduceSpec, x: &SparseMatrix, seed: u64) -> CliResult<ReductionTransform> {
    Ok(match spec {
        ReduceSpec::Svd { dim } => fit_truncated_svd(x, dim, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS, seed)?,
        ReduceSpec::RandomProjection { dim, .. } => {
            fit_sparse_random_projection(x.cols(), dim, spec.density_for(x.cols()), seed)?
        }
    })
}

pub fn reduce_features(t: &ReductionTransform, d: &Dataset) -> CliResult<Dataset> {
    let reduced = SparseMatrix::from_dense(&apply_reduction(t, d.features())?);
    Ok(d.with_features(reduced)?)
}

/// A trained model with the artifacts written next to it.
pub struct Fitted {
    pub model: RidgeModel,
    pub transform: Option<ReductionTransform>,
    pub propensity: Option<PropensityModel>,
}

/// Propensities from training label counts, or `None` when there are too
/// few instances to define them.
pub fn training_propensity(cfg: &ExperimentConfig, d: &Dataset) -> CliResult<Option<PropensityModel>> {
    match compute_propensity(&d.label_counts(), d.num_instances(), cfg.ps_a, cfg.ps_b) {
        Ok(p) => Ok(Some(p)),
        Err(e) if cfg.ps => Err(e.into()),
        Err(_) => Ok(None),
    }
}

pub fn fit(cfg: &ExperimentConfig, input: &TrainingInput, lambda: f64) -> CliResult<Fitted> {
    let transform = cfg
        .reduce
        .map(|spec| fit_reduction(spec, input.data.features(), cfg.seed))
        .transpose()?;
    let data = match &transform {
        Some(t) => reduce_features(t, &input.data)?,
        None => input.data.clone(),
    };
    let propensity = training_propensity(cfg, &data)?;
    let solve = RidgeSolveConfig {
        mode: cfg.mode,
        ..RidgeSolveConfig::with_lambda(lambda)
    };
    let weighting = if cfg.ps { propensity.as_ref() } else { None };
    let mut model = train(&data, &solve, weighting)?;
    let prov = &mut model.provenance;
    prov.insert(KEY_SPARSE_FEATURES.into(), input.sparse_features.to_string());
    if let Some(d) = input.dense_dim {
        prov.insert(KEY_DENSE_DIM.into(), d.to_string());
    }
    prov.insert(KEY_NORMALIZE.into(), cfg.normalize_rows.to_string());
    if let Some(spec) = cfg.reduce {
        prov.insert(KEY_REDUCE.into(), spec.to_string());
    }
    prov.insert(KEY_SEED.into(), cfg.seed.to_string());
    prov.insert(KEY_PS_A.into(), cfg.ps_a.to_string());
    prov.insert(KEY_PS_B.into(), cfg.ps_b.to_string());
    prov.insert(KEY_NUM_TRAIN.into(), data.num_instances().to_string());
    prov.insert(KEY_MODE.into(), format!("{:?}", cfg.mode).to_lowercase());
    Ok(Fitted { model, transform, propensity })
}

/// Writes the model plus `.transform` and `.propensity` sidecars.
pub fn save(f: &Fitted, out: &Path) -> CliResult<()> {
    f.model.save(out).map_err(|e| CliError::at(out, e))?;
    if let Some(t) = &f.transform {
        let p = sidecar(out, "transform");
        t.save(&p).map_err(|e| CliError::at(&p, e))?;
    }
    if let Some(prop) = &f.propensity {
        let p = sidecar(out, "propensity");
        let file = File::create(&p).map_err(|source| CliError::Io { path: p.clone(), source })?;
        prop.write_text(std::io::BufWriter::new(file)).map_err(|e| CliError::at(&p, e))?;
    }
    Ok(())
}

pub fn load_model(path: &Path) -> CliResult<RidgeModel> {
    RidgeModel::load(path).map_err(|e| CliError::at(path, e))
}

/// Test set pushed through the same feature steps the model was trained with.
pub fn load_test(cfg: &ExperimentConfig, model: &RidgeModel, model_path: &Path) -> CliResult<Dataset> {
    let path = ExperimentConfig::require(&cfg.test, "--test")?;
    let raw = load_dataset(path)?;
    if raw.num_labels() != model.label_dim() {
        return Err(CliError::at(
            path,
            CoreError::mismatch("test label dimension vs model", model.label_dim(), raw.num_labels()),
        ));
    }
    let prov = &model.provenance;
    let sparse_cols = prov
        .get(KEY_SPARSE_FEATURES)
        .and_then(|v| v.parse().ok())
        .unwrap_or(raw.num_features());
    let dense = match prov.get(KEY_DENSE_DIM) {
        Some(_) => {
            let p = ExperimentConfig::require(&cfg.test_dense_embeddings, "--test-dense-embeddings")?;
            Some(load_dense(p, cfg.dense_dim)?)
        }
        None => None,
    };
    let normalize = prov.get(KEY_NORMALIZE).is_some_and(|v| v == "true");
    let x = assemble(raw.features(), sparse_cols, dense.as_ref(), normalize).map_err(|e| match e {
        CliError::Core(c) => CliError::at(path, c),
        other => other,
    })?;
    let data = raw.with_features(x)?;
    let data = if prov.contains_key(KEY_REDUCE) {
        let tp = sidecar(model_path, "transform");
        let t = ReductionTransform::load(&tp).map_err(|e| CliError::at(&tp, e))?;
        reduce_features(&t, &data)?
    } else {
        data
    };
    if data.num_features() != model.feature_dim() {
        return Err(CliError::at(
            path,
            CoreError::mismatch("test feature dimension vs model", model.feature_dim(), data.num_features()),
        ));
    }
    Ok(data)
}

/// `--propensity`, else the model's `.propensity` sidecar, else counts from `--train`.
pub fn eval_propensity(cfg: &ExperimentConfig, model_path: &Path) -> CliResult<PropensityModel> {
    let from_file = |p: &Path| PropensityModel::read_text(open(p)?).map_err(|e| CliError::at(p, e));
    if let Some(p) = &cfg.propensity {
        return from_file(p);
    }
    let side = sidecar(model_path, "propensity");
    if side.exists() {
        return from_file(&side);
    }
    if let Some(t) = &cfg.train {
        let d = load_dataset(t)?;
        return Ok(compute_propensity(&d.label_counts(), d.num_instances(), cfg.ps_a, cfg.ps_b)?);
    }
    Err(CliError::usage("PSP@K needs --propensity, a model .propensity file, or --train"))
}
