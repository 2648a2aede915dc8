//! Training, scoring, top-K ranking and sparsification of the ridge
//! classifier.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::container::{Container, ContainerKind, MatrixPayload};
use crate::data::Dataset;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::{axpy, Scalar};
use crate::solver::{solve_ridge, RidgeSolveConfig};
use crate::sparse::SparseMatrix;
use crate::weighting::{apply_weights, PropensityModel};

const FLAG_WEIGHTED: u32 = 1;

/// Label-feature matrix Ŵ (N×L) in dense or sparsified form.
pub type WeightMatrix<T> = MatrixPayload<T>;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel<T> {
    weights: WeightMatrix<T>,
    lambda: f64,
    weighting_applied: bool,
    /// Free-form provenance (dataset, normalization, reduction, ...).
    pub provenance: BTreeMap<String, String>,
}

/// Top-K labels of one instance, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPrediction<T> {
    pub label_ids: Vec<usize>,
    pub scores: Vec<T>,
}

impl<T> RankedPrediction<T> {
    pub fn len(&self) -> usize {
        self.label_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label_ids.is_empty()
    }
}

/// Sparse input vector of a fixed dimension.
#[derive(Debug, Clone, Copy)]
pub struct SparseVector<'a, T> {
    pub dim: usize,
    pub indices: &'a [usize],
    pub values: &'a [T],
}

impl<'a, T: Scalar> SparseVector<'a, T> {
    pub fn row_of(m: &'a SparseMatrix<T>, i: usize) -> Self {
        let (indices, values) = m.row(i);
        Self {
            dim: m.cols(),
            indices,
            values,
        }
    }
}

/// Ŵ = ridge solution on `Y`, or on the θ-weighted `Y` when a propensity
/// model is given.
pub fn train<T: Scalar>(d: &Dataset<T>, cfg: &RidgeSolveConfig, p: Option<&PropensityModel>) -> Result<RidgeModel<T>> {
    if d.num_instances() == 0 {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    let weights = match p {
        Some(p) => {
            if p.num_labels() != d.num_labels() {
                return Err(Error::mismatch("propensity labels vs dataset labels", d.num_labels(), p.num_labels()));
            }
            solve_ridge(d.features(), &apply_weights(d.labels(), p)?, cfg)?
        }
        None => solve_ridge(d.features(), d.labels(), cfg)?,
    };
    Ok(RidgeModel::new(MatrixPayload::Dense(weights), cfg.lambda, p.is_some()))
}

impl<T: Scalar> RidgeModel<T> {
    pub fn new(weights: WeightMatrix<T>, lambda: f64, weighting_applied: bool) -> Self {
        Self {
            weights,
            lambda,
            weighting_applied,
            provenance: BTreeMap::new(),
        }
    }

    pub fn weights(&self) -> &WeightMatrix<T> {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weighting_applied(&self) -> bool {
        self.weighting_applied
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.shape().0
    }

    pub fn label_dim(&self) -> usize {
        self.weights.shape().1
    }

    /// Stored weight entries (N·L for a dense model).
    pub fn stored_entries(&self) -> usize {
        match &self.weights {
            MatrixPayload::Dense(m) => m.values().len(),
            MatrixPayload::Sparse(m) => m.nnz(),
        }
    }

    fn accumulate(&self, x: SparseVector<'_, T>, out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        match &self.weights {
            MatrixPayload::Dense(w) => {
                for (&j, &v) in x.indices.iter().zip(x.values) {
                    axpy(v, w.row(j), out);
                }
            }
            MatrixPayload::Sparse(w) => {
                for (&j, &v) in x.indices.iter().zip(x.values) {
                    let (idx, vals) = w.row(j);
                    for (&l, &wv) in idx.iter().zip(vals) {
                        out[l] += v * wv;
                    }
                }
            }
        }
    }

    /// `s_l = Σ_j x_j Ŵ_jl` for every label.
    pub fn score_instance(&self, x: SparseVector<'_, T>) -> Result<Vec<T>> {
        if x.dim != self.feature_dim() {
            return Err(Error::mismatch("instance feature dimension", self.feature_dim(), x.dim));
        }
        if let Some(&j) = x.indices.iter().find(|&&j| j >= x.dim) {
            return Err(Error::mismatch("feature index bound", x.dim, j));
        }
        let mut out = vec![T::zero(); self.label_dim()];
        self.accumulate(x, &mut out);
        Ok(out)
    }

    /// Full D×L score matrix.
    pub fn scores(&self, xs: &SparseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check_inputs(xs)?;
        let l = self.label_dim();
        let mut out = DenseMatrix::zeros(xs.rows(), l);
        if l > 0 {
            out.values_mut()
                .par_chunks_mut(l)
                .enumerate()
                .for_each(|(i, row)| self.accumulate(SparseVector::row_of(xs, i), row));
        }
        Ok(out)
    }

    fn check_inputs(&self, xs: &SparseMatrix<T>) -> Result<()> {
        if xs.cols() != self.feature_dim() {
            return Err(Error::mismatch("input feature dimension", self.feature_dim(), xs.cols()));
        }
        Ok(())
    }

    /// Top-`k` labels per row of `xs`, ties broken by lower label id.
    pub fn predict_topk(&self, xs: &SparseMatrix<T>, k: usize) -> Result<Vec<RankedPrediction<T>>> {
        self.check_inputs(xs)?;
        let l = self.label_dim();
        if k == 0 || k > l {
            return Err(Error::InvalidArgument(format!("k = {k} outside 1..={l}")));
        }
        Ok((0..xs.rows())
            .into_par_iter()
            .map_init(
                || (vec![T::zero(); l], Vec::with_capacity(l)),
                |(buf, ids), i| {
                    self.accumulate(SparseVector::row_of(xs, i), buf);
                    top_k(buf, k, ids)
                },
            )
            .collect())
    }

    /// Drops entries with `|Ŵ_jl| < threshold` (and exact zeros). Returns the
    /// sparsified model and the surviving fraction of all N·L cells.
    pub fn sparsify(&self, threshold: f64) -> (RidgeModel<T>, f64) {
        let t = T::lit(threshold.max(0.0));
        let kept = match &self.weights {
            MatrixPayload::Dense(w) => SparseMatrix::from_dense(w).filter(|_, _, v| v.abs() >= t),
            MatrixPayload::Sparse(w) => w.filter(|_, _, v| v.abs() >= t),
        };
        let cells = self.feature_dim() * self.label_dim();
        let frac = if cells == 0 { 0.0 } else { kept.nnz() as f64 / cells as f64 };
        let mut m = RidgeModel::new(MatrixPayload::Sparse(kept), self.lambda, self.weighting_applied);
        m.provenance = self.provenance.clone();
        (m, frac)
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        Container {
            kind: ContainerKind::Model,
            flags: if self.weighting_applied { FLAG_WEIGHTED } else { 0 },
            param: self.lambda,
            seed: 0,
            metadata: self.provenance.clone(),
            payload: self.weights.clone(),
        }
        .write_to(out)
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let c = Container::<T>::read_from(input)?;
        if c.kind != ContainerKind::Model {
            return Err(Error::Format(format!("expected a model container, found {:?}", c.kind)));
        }
        Ok(Self {
            weights: c.payload,
            lambda: c.param,
            weighting_applied: c.flags & FLAG_WEIGHTED != 0,
            provenance: c.metadata,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }

    /// Human-readable dump: a header, then one `feature label:weight ...`
    /// line per feature row with nonzero weights.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# features={} labels={} lambda={} weighted={}",
            self.feature_dim(),
            self.label_dim(),
            self.lambda,
            self.weighting_applied
        )?;
        for (k, v) in &self.provenance {
            writeln!(out, "# {k}={v}")?;
        }
        let sparse = match &self.weights {
            MatrixPayload::Dense(w) => SparseMatrix::from_dense(w),
            MatrixPayload::Sparse(w) => w.clone(),
        };
        for j in 0..sparse.rows() {
            let (idx, vals) = sparse.row(j);
            if idx.is_empty() {
                continue;
            }
            write!(out, "{j}")?;
            for (l, v) in idx.iter().zip(vals) {
                write!(out, " {l}:{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Descending by score, ascending by id on ties.
#[inline]
fn rank_order<T: Scalar>(scores: &[T], a: usize, b: usize) -> Ordering {
    scores[b]
        .partial_cmp(&scores[a])
        .unwrap_or(Ordering::Equal)
        .then(a.cmp(&b))
}

/// Top-`k` of a score vector under the crate's ranking order.
pub fn top_k<T: Scalar>(scores: &[T], k: usize, ids: &mut Vec<usize>) -> RankedPrediction<T> {
    ids.clear();
    ids.extend(0..scores.len());
    let k = k.min(scores.len());
    if k < ids.len() && k > 0 {
        ids.select_nth_unstable_by(k - 1, |&a, &b| rank_order(scores, a, b));
    }
    ids.truncate(k);
    ids.sort_unstable_by(|&a, &b| rank_order(scores, a, b));
    RankedPrediction {
        label_ids: ids.clone(),
        scores: ids.iter().map(|&l| scores[l]).collect(),
    }
}
