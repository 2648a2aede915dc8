use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use xml_ridge::metrics::{label_contribution_at_k, label_frequency_histogram, psp_at_k, psp_at_k_normalized};
use xml_ridge::data::split_indices;
use xml_ridge::solver::PreparedRidge;
use xml_ridge::weighting::apply_weights;
use xml_ridge::{
    precision_at_k, Dataset, MatrixPayload, MetricsReport, PropensityModel, RankedPrediction,
    RidgeModel, RidgeSolveConfig, Targets,
};

use crate::config::{ExperimentConfig, Metric};
use crate::error::{CliError, CliResult};
use crate::pipeline::{self, sidecar, TrainingInput};

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::Io { path: "<stdout>".into(), source: e }
}

fn check_k(k: usize, labels: usize) -> CliResult<()> {
    if k > labels {
        return Err(CliError::usage(format!("k = {k} exceeds the {labels} labels")));
    }
    Ok(())
}

pub fn train(cfg: &ExperimentConfig, out: &mut dyn Write) -> CliResult<()> {
    if cfg.lambda_grid.is_some() {
        return Err(CliError::usage("--lambda-grid belongs to `tune`; `train` takes a single --lambda"));
    }
    let lambda = cfg.lambda.ok_or_else(|| CliError::usage("--lambda is required"))?;
    let out_path = ExperimentConfig::require(&cfg.out, "--out")?;
    let start = Instant::now();
    let input = pipeline::load_training(cfg)?;
    let fitted = pipeline::fit(cfg, &input, lambda)?;
    pipeline::save(&fitted, out_path)?;
    let m = &fitted.model;
    writeln!(
        out,
        "trained {} x {} model on {} instances: lambda={} weighting={} wall_time={:.3}s -> {}",
        m.feature_dim(),
        m.label_dim(),
        input.data.num_instances(),
        lambda,
        if cfg.ps { "ps" } else { "none" },
        start.elapsed().as_secs_f64(),
        out_path.display()
    )
    .map_err(stdout_err)
}

/// Validation score of every λ in the grid, in grid order.
pub struct TuneReport {
    pub metric: Metric,
    pub scores: Vec<(f64, f64)>,
}

impl TuneReport {
    /// Highest score; the earliest (smallest) λ wins ties.
    pub fn best(&self) -> (f64, f64) {
        let mut best = self.scores[0];
        for &s in &self.scores[1..] {
            if s.1 > best.1 {
                best = s;
            }
        }
        best
    }
}

fn validation_score(
    metric: Metric,
    preds: &[RankedPrediction<f64>],
    val: &Dataset,
    prop: Option<&PropensityModel>,
    normalized: bool,
) -> CliResult<f64> {
    Ok(match metric {
        Metric::Precision(k) => precision_at_k(preds, val.labels(), k)?,
        Metric::Psp(k) => {
            let p = prop.ok_or_else(|| CliError::usage("PSP needs at least two training instances"))?;
            if normalized {
                psp_at_k_normalized(preds, val.labels(), p, k)?
            } else {
                psp_at_k(preds, val.labels(), p, k)?
            }
        }
    })
}

/// Trains on the `1 − f` split for each λ (one Gram factorization reused)
/// and scores on the held-out `f`.
pub fn tune_grid(cfg: &ExperimentConfig, input: &TrainingInput, grid: &[f64]) -> CliResult<TuneReport> {
    let (tr_idx, va_idx) = split_indices(input.data.num_instances(), cfg.validation_fraction, cfg.seed)?;
    let mut tr = input.data.select_rows(&tr_idx);
    let mut va = input.data.select_rows(&va_idx);
    if let Some(spec) = cfg.reduce {
        let t = pipeline::fit_reduction(spec, tr.features(), cfg.seed)?;
        tr = pipeline::reduce_features(&t, &tr)?;
        va = pipeline::reduce_features(&t, &va)?;
    }
    check_k(cfg.metric.k(), tr.num_labels())?;
    let prop = pipeline::training_propensity(cfg, &tr)?;
    let weighted;
    let targets = match (&prop, cfg.ps) {
        (Some(p), true) => {
            weighted = apply_weights(tr.labels(), p)?;
            Targets::from(&weighted)
        }
        _ => Targets::from(tr.labels()),
    };
    let prepared = PreparedRidge::new(tr.features(), cfg.mode, RidgeSolveConfig::default().gram_budget_bytes)?;
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let solve = RidgeSolveConfig {
            mode: cfg.mode,
            ..RidgeSolveConfig::with_lambda(lambda)
        };
        let w = prepared.solve(targets, &solve)?;
        let model = RidgeModel::new(MatrixPayload::Dense(w), lambda, cfg.ps);
        let preds = model.predict_topk(va.features(), cfg.metric.k())?;
        scores.push((lambda, validation_score(cfg.metric, &preds, &va, prop.as_ref(), cfg.psp_normalized)?));
    }
    Ok(TuneReport { metric: cfg.metric, scores })
}

pub fn tune(cfg: &ExperimentConfig, out: &mut dyn Write) -> CliResult<()> {
    let grid = match (&cfg.lambda_grid, cfg.lambda) {
        (Some(g), _) => g.clone(),
        (None, Some(l)) => vec![l],
        (None, None) => return Err(CliError::usage("tune needs --lambda-grid")),
    };
    let input = pipeline::load_training(cfg)?;
    let report = tune_grid(cfg, &input, &grid)?;
    let mut text = format!("lambda,{}\n", report.metric);
    for (l, s) in &report.scores {
        text.push_str(&format!("{l},{s}\n"));
    }
    let (best, score) = report.best();
    text.push_str(&format!("selected lambda={best} {}={score}\n", report.metric));
    out.write_all(text.as_bytes()).map_err(stdout_err)?;
    if let Some(path) = &cfg.out {
        let fitted = pipeline::fit(cfg, &input, best)?;
        pipeline::save(&fitted, path)?;
        writeln!(out, "final model -> {}", path.display()).map_err(stdout_err)?;
    }
    Ok(())
}

fn model_and_test(cfg: &ExperimentConfig) -> CliResult<(&Path, RidgeModel, Dataset)> {
    let path = ExperimentConfig::require(&cfg.model, "--model")?;
    let model = pipeline::load_model(path)?;
    let test = pipeline::load_test(cfg, &model, path)?;
    Ok((path, model, test))
}

fn max_k(cfg: &ExperimentConfig, labels: usize) -> CliResult<usize> {
    let k = *cfg.k_values.last().expect("k_values is nonempty");
    check_k(k, labels)?;
    Ok(k)
}

pub fn predict(cfg: &ExperimentConfig, out: &mut dyn Write) -> CliResult<()> {
    let (_, model, test) = model_and_test(cfg)?;
    let k = max_k(cfg, model.label_dim())?;
    let preds = model.predict_topk(test.features(), k)?;
    let mut text = String::new();
    for p in &preds {
        let line: Vec<String> = p.label_ids.iter().zip(&p.scores).map(|(l, s)| format!("{l}:{s}")).collect();
        text.push_str(&line.join(" "));
        text.push('\n');
    }
    match &cfg.out {
        Some(path) => write_file(path, &text),
        None => out.write_all(text.as_bytes()).map_err(stdout_err),
    }
}

pub fn eval(cfg: &ExperimentConfig, out: &mut dyn Write) -> CliResult<()> {
    let (path, model, test) = model_and_test(cfg)?;
    let k = max_k(cfg, model.label_dim())?;
    let preds = model.predict_topk(test.features(), k)?;
    let prop = pipeline::eval_propensity(cfg, path)?;
    let report = MetricsReport::compute(&preds, test.labels(), &prop, &cfg.k_values)?;
    out.write_all(report.to_table().as_bytes()).map_err(stdout_err)?;
    if let Some(p) = &cfg.out {
        write_file(p, &report.to_csv(cfg.psp_normalized))?;
    }
    Ok(())
}

fn copy_sidecars(from: &Path, to: &Path) -> CliResult<()> {
    for ext in ["transform", "propensity"] {
        let src = sidecar(from, ext);
        if src.exists() {
            let dst = sidecar(to, ext);
            fs::copy(&src, &dst).map_err(|source| CliError::Io { path: dst, source })?;
        }
    }
    Ok(())
}

/// One sweep row: threshold, kept fraction, and metrics of the sparsified model.
pub struct SparsifyRow {
    pub threshold: f64,
    pub kept_fraction: f64,
    pub stored: usize,
    pub metrics: Option<MetricsReport>,
}

pub fn sparsify_sweep(
    model: &RidgeModel,
    thresholds: &[f64],
    test: Option<(&Dataset, &PropensityModel, &[usize])>,
) -> CliResult<Vec<SparsifyRow>> {
    let mut rows = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let (m, kept_fraction) = model.sparsify(t);
        let metrics = match test {
            Some((d, p, ks)) => {
                let preds = m.predict_topk(d.features(), *ks.last().expect("nonempty k"))?;
                Some(MetricsReport::compute(&preds, d.labels(), p, ks)?)
            }
            None => None,
        };
        rows.push(SparsifyRow { threshold: t, kept_fraction, stored: m.stored_entries(), metrics });
    }
    Ok(rows)
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        f64::NAN
    } else {
        a / b
    }
}

pub fn sparsify(cfg: &ExperimentConfig, out: &mut dyn Write) -> CliResult<()> {
    let path = ExperimentConfig::require(&cfg.model, "--model")?;
    if cfg.thresholds.is_empty() {
        return Err(CliError::usage("--threshold is required"));
    }
    if let Some(t) = cfg.thresholds.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(CliError::usage(format!("threshold must be finite and nonnegative, got {t}")));
    }
    if cfg.out.is_some() && cfg.thresholds.len() != 1 {
        return Err(CliError::usage("--out writes one sparsified model; pass a single --threshold"));
    }
    let model = pipeline::load_model(path)?;
    let mut thresholds = cfg.thresholds.clone();
    thresholds.sort_by(f64::total_cmp);
    let test = match &cfg.test {
        Some(_) => {
            let d = pipeline::load_test(cfg, &model, path)?;
            max_k(cfg, model.label_dim())?;
            let p = pipeline::eval_propensity(cfg, path)?;
            Some((d, p))
        }
        None => None,
    };
    let test_ref = test.as_ref().map(|(d, p)| (d, p, cfg.k_values.as_slice()));
    let baseline = sparsify_sweep(&model, &[0.0], test_ref)?.remove(0);
    let rows = sparsify_sweep(&model, &thresholds, test_ref)?;

    let mut text = String::from("threshold,kept_fraction,stored_entries");
    for k in &cfg.k_values {
        text.push_str(&format!(",p_at_{k},rel_p_at_{k},psp_at_{k},rel_psp_at_{k}"));
    }
    text.push('\n');
    for r in &rows {
        text.push_str(&format!("{},{},{}", r.threshold, r.kept_fraction, r.stored));
        if let (Some(m), Some(b)) = (&r.metrics, &baseline.metrics) {
            for (i, _) in cfg.k_values.iter().enumerate() {
                let (p, bp) = (m.precision_at[i], b.precision_at[i]);
                let (q, bq) = if cfg.psp_normalized {
                    (m.psp_normalized_at[i], b.psp_normalized_at[i])
                } else {
                    (m.psp_at[i], b.psp_at[i])
                };
                text.push_str(&format!(",{p},{},{q},{}", ratio(p, bp), ratio(q, bq)));
            }
        }
        text.push('\n');
    }
    out.write_all(text.as_bytes()).map_err(stdout_err)?;
    if let Some(o) = &cfg.out {
        let (m, _) = model.sparsify(thresholds[0]);
        m.save(o).map_err(|e| CliError::at(o, e))?;
        copy_sidecars(path, o)?;
    }
    Ok(())
}

pub fn stats(cfg: &ExperimentConfig, out: &mut dyn Write) -> CliResult<()> {
    let data_path = cfg
        .train
        .as_deref()
        .or(cfg.test.as_deref())
        .ok_or_else(|| CliError::usage("stats needs --train or --test"))?;
    let data = pipeline::load_dataset(data_path)?;
    let hist = label_frequency_histogram(&data);
    let mut hist_csv = String::from("rank,label,count\n");
    for (r, (l, c)) in hist.iter().enumerate() {
        hist_csv.push_str(&format!("{r},{l},{c}\n"));
    }
    let contrib_csv = match &cfg.model {
        Some(_) => {
            let (_, model, test) = model_and_test(cfg)?;
            if test.num_labels() != data.num_labels() {
                return Err(xml_ridge::Error::mismatch("label dimension", data.num_labels(), test.num_labels()).into());
            }
            let k = max_k(cfg, model.label_dim())?;
            let preds = model.predict_topk(test.features(), k)?;
            let order: Vec<usize> = hist.iter().map(|h| h.0).collect();
            let hits = label_contribution_at_k(&preds, test.labels(), k, &order)?;
            let mut s = format!("rank,label,count,hits_at_{k}\n");
            for (r, ((l, c), h)) in hist.iter().zip(&hits).enumerate() {
                s.push_str(&format!("{r},{l},{c},{h}\n"));
            }
            Some(s)
        }
        None => None,
    };
    match &cfg.out {
        Some(prefix) => {
            write_file(&sidecar(prefix, "labels.csv"), &hist_csv)?;
            if let Some(s) = &contrib_csv {
                write_file(&sidecar(prefix, "contribution.csv"), s)?;
            }
            Ok(())
        }
        None => {
            out.write_all(hist_csv.as_bytes()).map_err(stdout_err)?;
            if let Some(s) = &contrib_csv {
                out.write_all(b"\n").and_then(|_| out.write_all(s.as_bytes())).map_err(stdout_err)?;
            }
            Ok(())
        }
    }
}

