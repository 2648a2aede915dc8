//! Feature reduction: randomized truncated SVD and sparse random projection.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::container::{Container, ContainerKind, MatrixPayload};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::linalg::{householder_qr, jacobi_svd};
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::sparse::{CsrBuilder, SparseMatrix};

pub const DEFAULT_OVERSAMPLE: usize = 10;
pub const DEFAULT_POWER_ITERS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionKind {
    Svd,
    RandomProjection,
}

/// Linear map from `N_in` input features to `d` reduced features.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionTransform<T> {
    kind: ReductionKind,
    projection: MatrixPayload<T>,
    seed: u64,
    density: f64,
    singular_values: Vec<T>,
    oversample: usize,
    power_iters: usize,
}

impl<T: Scalar> ReductionTransform<T> {
    pub fn kind(&self) -> ReductionKind {
        self.kind
    }

    pub fn projection(&self) -> &MatrixPayload<T> {
        &self.projection
    }

    pub fn input_dim(&self) -> usize {
        self.projection.shape().0
    }

    pub fn output_dim(&self) -> usize {
        self.projection.shape().1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Approximate leading singular values (SVD only; empty otherwise).
    pub fn singular_values(&self) -> &[T] {
        &self.singular_values
    }

    /// `‖X P‖_F²`, the Frobenius energy of `x` kept by the projection.
    pub fn captured_energy(&self, x: &SparseMatrix<T>) -> Result<T> {
        let r = apply_reduction(self, x)?;
        Ok(r.values().iter().map(|&v| v * v).sum())
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut metadata = BTreeMap::new();
        metadata.insert("oversample".to_string(), self.oversample.to_string());
        metadata.insert("power_iters".to_string(), self.power_iters.to_string());
        if !self.singular_values.is_empty() {
            let sv: Vec<String> = self.singular_values.iter().map(|v| v.to_string()).collect();
            metadata.insert("singular_values".to_string(), sv.join(","));
        }
        Container {
            kind: match self.kind {
                ReductionKind::Svd => ContainerKind::Svd,
                ReductionKind::RandomProjection => ContainerKind::RandomProjection,
            },
            flags: 0,
            param: self.density,
            seed: self.seed,
            metadata,
            payload: self.projection.clone(),
        }
        .write_to(out)
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let c = Container::<T>::read_from(input)?;
        let kind = match c.kind {
            ContainerKind::Svd => ReductionKind::Svd,
            ContainerKind::RandomProjection => ReductionKind::RandomProjection,
            ContainerKind::Model => return Err(Error::Format("expected a transform, found a model".into())),
        };
        let num = |key: &str| -> usize { c.metadata.get(key).and_then(|v| v.parse().ok()).unwrap_or(0) };
        let singular_values = match c.metadata.get("singular_values") {
            Some(s) => s
                .split(',')
                .map(|v| v.parse::<T>().map_err(|_| Error::Format("bad singular value".into())))
                .collect::<Result<_>>()?,
            None => Vec::new(),
        };
        Ok(Self {
            kind,
            oversample: num("oversample"),
            power_iters: num("power_iters"),
            projection: c.payload,
            seed: c.seed,
            density: c.param,
            singular_values,
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
}

/// Approximate top-`d` right singular vectors of `x` by randomized range
/// finding with `power_iters` subspace iterations.
pub fn fit_truncated_svd<T: Scalar>(
    x: &SparseMatrix<T>,
    d: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<ReductionTransform<T>> {
    let (rows, cols) = x.shape();
    let max_rank = rows.min(cols);
    if d == 0 || d > max_rank {
        return Err(Error::InvalidArgument(format!("SVD rank {d} outside 1..={max_rank}")));
    }
    let width = (d + oversample).min(max_rank);
    let mut rng = substream(seed, "svd");
    let omega = DenseMatrix::from_raw(
        cols,
        width,
        (0..cols * width)
            .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
            .collect(),
    );
    let xt = x.transpose();
    let mut q = householder_qr(&x.mul_dense(&omega)?).0;
    for _ in 0..power_iters {
        let z = householder_qr(&xt.mul_dense(&q)?).0;
        q = householder_qr(&x.mul_dense(&z)?).0;
    }
    // Bᵀ = Xᵀ Q = Q₂ R₂, so B = R₂ᵀ Q₂ᵀ and B's right singular vectors are Q₂ W.
    let (q2, r2) = householder_qr(&xt.mul_dense(&q)?);
    let (sigma, w) = jacobi_svd(&r2.transpose());
    let projection = q2.matmul(&w.column_block(0, d))?;
    Ok(ReductionTransform {
        kind: ReductionKind::Svd,
        projection: MatrixPayload::Dense(projection),
        seed,
        density: 0.0,
        singular_values: sigma[..d].to_vec(),
        oversample,
        power_iters,
    })
}

/// Sparse ±1/√(density·d) projection: each entry is zero with probability
/// `1 − density` and otherwise a random sign.
pub fn fit_sparse_random_projection<T: Scalar>(
    n_in: usize,
    d: usize,
    density: f64,
    seed: u64,
) -> Result<ReductionTransform<T>> {
    if d == 0 {
        return Err(Error::InvalidArgument("projection dimension must be positive".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument(format!("density {density} outside (0, 1]")));
    }
    let scale = T::lit(1.0 / (density * d as f64).sqrt());
    let half = density / 2.0;
    let mut rng = substream(seed, "projection");
    let mut b = CsrBuilder::new(d);
    let mut row = Vec::new();
    for _ in 0..n_in {
        row.clear();
        for j in 0..d {
            let u: f64 = rng.random();
            if u < half {
                row.push((j, scale));
            } else if u < density {
                row.push((j, -scale));
            }
        }
        b.push_sorted_row(row.iter().copied());
    }
    Ok(ReductionTransform {
        kind: ReductionKind::RandomProjection,
        projection: MatrixPayload::Sparse(b.finish()),
        seed,
        density,
        singular_values: Vec::new(),
        oversample: 0,
        power_iters: 0,
    })
}

/// Default sparse projection density `1/√N_in`.
pub fn default_density(n_in: usize) -> f64 {
    (1.0 / (n_in.max(1) as f64).sqrt()).min(1.0)
}

/// `X · P` as a dense D×d matrix.
pub fn apply_reduction<T: Scalar>(t: &ReductionTransform<T>, x: &SparseMatrix<T>) -> Result<DenseMatrix<T>> {
    if x.cols() != t.input_dim() {
        return Err(Error::mismatch("reduction input dimension", t.input_dim(), x.cols()));
    }
    match &t.projection {
        MatrixPayload::Dense(p) => x.mul_dense(p),
        MatrixPayload::Sparse(p) => x.mul_sparse_to_dense(p),
    }
}
