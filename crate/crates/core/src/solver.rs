//! Closed-form ridge solve through either the feature-space (primal) or the
//! instance-space (dual) normal equations.

use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, Scalar};
use crate::sparse::SparseMatrix;

/// Default cap on a single Gram matrix allocation (8 GiB).
pub const DEFAULT_GRAM_BUDGET: usize = 8 << 30;
/// Default number of label columns solved together.
pub const DEFAULT_BLOCK_SIZE: usize = 512;
/// Relative diagonal jitter used when none is configured.
pub const DEFAULT_JITTER_SCALE: f64 = 1e-10;

const PARALLEL_FACTOR_MIN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMode {
    /// Primal when `N <= D`, dual otherwise.
    #[default]
    Auto,
    Primal,
    Dual,
}

impl SolveMode {
    /// The concrete side used for a `rows × cols` design matrix.
    pub fn resolve(self, rows: usize, cols: usize) -> SolveMode {
        match self {
            SolveMode::Auto if cols <= rows => SolveMode::Primal,
            SolveMode::Auto => SolveMode::Dual,
            m => m,
        }
    }
}

impl std::str::FromStr for SolveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "primal" => Ok(Self::Primal),
            "dual" => Ok(Self::Dual),
            other => Err(Error::InvalidArgument(format!("unknown solve mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSolveConfig {
    /// L2 regularization strength.
    pub lambda: f64,
    pub mode: SolveMode,
    /// Diagonal jitter added after a failed factorization. `None` uses
    /// `DEFAULT_JITTER_SCALE * trace / order`.
    pub jitter: Option<f64>,
    pub block_size: usize,
    pub gram_budget_bytes: usize,
}

impl Default for RidgeSolveConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mode: SolveMode::Auto,
            jitter: None,
            block_size: DEFAULT_BLOCK_SIZE,
            gram_budget_bytes: DEFAULT_GRAM_BUDGET,
        }
    }
}

impl RidgeSolveConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda {} must be finite and >= 0", self.lambda)));
        }
        if let Some(j) = self.jitter {
            if !(j >= 0.0 && j.is_finite()) {
                return Err(Error::InvalidArgument(format!("jitter {j} must be finite and >= 0")));
            }
        }
        if self.block_size == 0 {
            return Err(Error::InvalidArgument("block size must be positive".into()));
        }
        Ok(())
    }
}

/// Right-hand side of the ridge problem.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a, T> {
    Sparse(&'a SparseMatrix<T>),
    Dense(&'a DenseMatrix<T>),
}

impl<'a, T: Scalar> Targets<'a, T> {
    pub fn rows(&self) -> usize {
        match self {
            Targets::Sparse(m) => m.rows(),
            Targets::Dense(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Targets::Sparse(m) => m.cols(),
            Targets::Dense(m) => m.cols(),
        }
    }

    fn dense_block(&self, start: usize, end: usize) -> DenseMatrix<T> {
        match self {
            Targets::Sparse(m) => m.column_slice(start, end).to_dense(),
            Targets::Dense(m) => m.column_block(start, end),
        }
    }
}

impl<'a, T> From<&'a SparseMatrix<T>> for Targets<'a, T> {
    fn from(m: &'a SparseMatrix<T>) -> Self {
        Targets::Sparse(m)
    }
}

impl<'a, T> From<&'a DenseMatrix<T>> for Targets<'a, T> {
    fn from(m: &'a DenseMatrix<T>) -> Self {
        Targets::Dense(m)
    }
}

fn check_budget<T: Scalar>(side: &'static str, order: usize, budget: usize) -> Result<()> {
    let bytes = order
        .checked_mul(order)
        .and_then(|c| c.checked_mul(usize::from(T::WIDTH)))
        .unwrap_or(usize::MAX);
    if bytes > budget {
        let advice = if side == "primal" {
            "use dual mode (inverts a D×D system)"
        } else {
            "use primal mode (inverts an N×N system)"
        };
        return Err(Error::Capacity {
            side,
            order,
            bytes,
            budget,
            advice,
        });
    }
    Ok(())
}

/// `Aᵀ A` where `at` is the CSR of `Aᵀ` and `a` the CSR of `A`. Only the
/// upper triangle is accumulated; the lower one is mirrored from it.
fn upper_gram<T: Scalar>(at: &SparseMatrix<T>, a: &SparseMatrix<T>) -> DenseMatrix<T> {
    let n = at.rows();
    let mut g = DenseMatrix::zeros(n, n);
    if n == 0 {
        return g;
    }
    g.values_mut().par_chunks_mut(n).enumerate().for_each(|(i, grow)| {
        let (ridx, rvals) = at.row(i);
        for (&r, &v) in ridx.iter().zip(rvals) {
            let (cidx, cvals) = a.row(r);
            let lo = cidx.partition_point(|&j| j < i);
            for (&j, &w) in cidx[lo..].iter().zip(&cvals[lo..]) {
                grow[j] += v * w;
            }
        }
    });
    for i in 0..n {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    g
}

/// `XᵀX` (N×N), exactly symmetric.
pub fn gram_primal<T: Scalar>(x: &SparseMatrix<T>) -> Result<DenseMatrix<T>> {
    gram_primal_with_budget(x, DEFAULT_GRAM_BUDGET)
}

pub fn gram_primal_with_budget<T: Scalar>(x: &SparseMatrix<T>, budget: usize) -> Result<DenseMatrix<T>> {
    check_budget::<T>("primal", x.cols(), budget)?;
    Ok(upper_gram(&x.transpose(), x))
}

/// `XXᵀ` (D×D), exactly symmetric.
pub fn gram_dual<T: Scalar>(x: &SparseMatrix<T>) -> Result<DenseMatrix<T>> {
    gram_dual_with_budget(x, DEFAULT_GRAM_BUDGET)
}

pub fn gram_dual_with_budget<T: Scalar>(x: &SparseMatrix<T>, budget: usize) -> Result<DenseMatrix<T>> {
    check_budget::<T>("dual", x.rows(), budget)?;
    Ok(upper_gram(x, &x.transpose()))
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: DenseMatrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors the lower triangle of `a`. Fails with the first pivot that is
    /// not strictly positive.
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self> {
        Self::factor_shifted(a, T::zero())
    }

    /// Factors `a + shift * I`.
    pub fn factor_shifted(a: &DenseMatrix<T>, shift: T) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::mismatch("Cholesky needs a square matrix", n, a.cols()));
        }
        let mut l = DenseMatrix::zeros(n, n);
        for i in 0..n {
            l.row_mut(i)[..=i].copy_from_slice(&a.row(i)[..=i]);
            l[(i, i)] += shift;
        }
        let vals = l.values_mut();
        for j in 0..n {
            let (head, tail) = vals.split_at_mut((j + 1) * n);
            let row_j = &mut head[j * n..];
            let s = row_j[j] - dot(&row_j[..j], &row_j[..j]);
            if s.is_nan() || s <= T::zero() || !s.is_finite() {
                return Err(Error::Singular { pivot: j });
            }
            let pivot = s.sqrt();
            row_j[j] = pivot;
            let row_j = &*row_j;
            let update = |row_i: &mut [T]| {
                row_i[j] = (row_i[j] - dot(&row_i[..j], &row_j[..j])) / pivot;
            };
            if n >= PARALLEL_FACTOR_MIN {
                tail.par_chunks_mut(n).for_each(update);
            } else {
                tail.chunks_mut(n).for_each(update);
            }
        }
        Ok(Self { l })
    }

    pub fn order(&self) -> usize {
        self.l.rows()
    }

    pub fn factor_matrix(&self) -> &DenseMatrix<T> {
        &self.l
    }

    /// Overwrites `b` with `A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut DenseMatrix<T>) -> Result<()> {
        let n = self.order();
        if b.rows() != n {
            return Err(Error::mismatch("right-hand side rows", n, b.rows()));
        }
        let w = b.cols();
        if w == 0 {
            return Ok(());
        }
        let vals = b.values_mut();
        // L z = b
        for i in 0..n {
            let lrow = self.l.row(i);
            let (done, rest) = vals.split_at_mut(i * w);
            let bi = &mut rest[..w];
            for (k, &lik) in lrow[..i].iter().enumerate() {
                if lik != T::zero() {
                    axpy(-lik, &done[k * w..(k + 1) * w], bi);
                }
            }
            let d = lrow[i];
            bi.iter_mut().for_each(|v| *v /= d);
        }
        // Lᵀ x = z
        for i in (0..n).rev() {
            let lrow = self.l.row(i);
            let (before, rest) = vals.split_at_mut(i * w);
            let xi = &mut rest[..w];
            let d = lrow[i];
            xi.iter_mut().for_each(|v| *v /= d);
            for (k, &lik) in lrow[..i].iter().enumerate() {
                if lik != T::zero() {
                    axpy(-lik, xi, &mut before[k * w..(k + 1) * w]);
                }
            }
        }
        Ok(())
    }
}

/// Factors `a`, retrying once with diagonal jitter when a pivot fails and
/// `jitter` allows it.
pub(crate) fn factor_with_jitter<T: Scalar>(a: &DenseMatrix<T>, jitter: Option<T>) -> Result<Cholesky<T>> {
    match Cholesky::factor(a) {
        Ok(c) => Ok(c),
        Err(Error::Singular { pivot }) => match jitter {
            Some(j) if j > T::zero() => Cholesky::factor_shifted(a, j),
            _ => Err(Error::Singular { pivot }),
        },
        Err(e) => Err(e),
    }
}

fn default_jitter<T: Scalar>(a: &DenseMatrix<T>) -> T {
    let n = a.rows().max(1);
    let t = a.trace().abs() / T::from_usize_lossy(n);
    let t = if t > T::zero() { t } else { T::one() };
    T::lit(DEFAULT_JITTER_SCALE) * t
}

/// Solves `a Z = b` for symmetric positive definite `a` by Cholesky
/// factorization, with one jitter escalation on pivot failure.
pub fn solve_spd<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>, jitter: Option<f64>) -> Result<DenseMatrix<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::mismatch("solve_spd square matrix", n, a.cols()));
    }
    if b.rows() != n {
        return Err(Error::mismatch("solve_spd right-hand side rows", n, b.rows()));
    }
    let tol = T::lit(1e-10) * a.max_abs().max(T::one());
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > tol {
                return Err(Error::InvalidArgument(format!("matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    let jit = jitter.map(T::lit).unwrap_or_else(|| default_jitter(a));
    let chol = factor_with_jitter(a, Some(jit))?;
    let mut z = b.clone();
    chol.solve_in_place(&mut z)?;
    Ok(z)
}

/// Gram matrix of one side of the ridge problem, reusable across many
/// regularization strengths and right-hand sides.
#[derive(Debug, Clone)]
pub struct PreparedRidge<'a, T> {
    x: &'a SparseMatrix<T>,
    xt: SparseMatrix<T>,
    side: SolveMode,
    gram: DenseMatrix<T>,
}

impl<'a, T: Scalar> PreparedRidge<'a, T> {
    pub fn new(x: &'a SparseMatrix<T>, mode: SolveMode, gram_budget_bytes: usize) -> Result<Self> {
        let side = mode.resolve(x.rows(), x.cols());
        let xt = x.transpose();
        let gram = match side {
            SolveMode::Primal => {
                check_budget::<T>("primal", x.cols(), gram_budget_bytes)?;
                upper_gram(&xt, x)
            }
            _ => {
                check_budget::<T>("dual", x.rows(), gram_budget_bytes)?;
                upper_gram(x, &xt)
            }
        };
        Ok(Self { x, xt, side, gram })
    }

    /// `Primal` or `Dual`.
    pub fn side(&self) -> SolveMode {
        self.side
    }

    pub fn gram(&self) -> &DenseMatrix<T> {
        &self.gram
    }

    /// Ŵ for the given targets and regularization.
    pub fn solve(&self, y: Targets<'_, T>, cfg: &RidgeSolveConfig) -> Result<DenseMatrix<T>> {
        cfg.validate()?;
        if y.rows() != self.x.rows() {
            return Err(Error::mismatch("ridge targets rows", self.x.rows(), y.rows()));
        }
        let lambda = T::lit(cfg.lambda);
        let mut a = self.gram.clone();
        for i in 0..a.rows() {
            a[(i, i)] += lambda;
        }
        // jitter only covers rounding; an unregularized singular system is an error
        let jitter = if cfg.lambda > 0.0 {
            Some(cfg.jitter.map(T::lit).unwrap_or_else(|| default_jitter(&a)))
        } else {
            None
        };
        let chol = factor_with_jitter(&a, jitter)?;

        let n = self.x.cols();
        let l = y.cols();
        let mut w = DenseMatrix::zeros(n, l);
        let starts: Vec<usize> = (0..l).step_by(cfg.block_size).collect();
        let wave = rayon::current_num_threads().max(1);
        for group in starts.chunks(wave) {
            let blocks: Vec<(usize, DenseMatrix<T>)> = group
                .par_iter()
                .map(|&s| {
                    let e = (s + cfg.block_size).min(l);
                    self.solve_block(&chol, y, s, e).map(|b| (s, b))
                })
                .collect::<Result<_>>()?;
            for (s, b) in blocks {
                w.set_column_block(s, &b);
            }
        }
        Ok(w)
    }

    fn solve_block(&self, chol: &Cholesky<T>, y: Targets<'_, T>, s: usize, e: usize) -> Result<DenseMatrix<T>> {
        match self.side {
            SolveMode::Primal => {
                let mut rhs = match y {
                    Targets::Sparse(m) => self.xt.mul_sparse_to_dense(&m.column_slice(s, e))?,
                    Targets::Dense(_) => self.xt.mul_dense(&y.dense_block(s, e))?,
                };
                chol.solve_in_place(&mut rhs)?;
                Ok(rhs)
            }
            _ => {
                let mut z = y.dense_block(s, e);
                chol.solve_in_place(&mut z)?;
                self.xt.mul_dense(&z)
            }
        }
    }
}

/// Closed-form ridge weights `Ŵ = (XᵀX + λI)⁻¹XᵀY = Xᵀ(XXᵀ + λI)⁻¹Y`.
pub fn solve_ridge<'y, T: Scalar>(
    x: &SparseMatrix<T>,
    y: impl Into<Targets<'y, T>>,
    cfg: &RidgeSolveConfig,
) -> Result<DenseMatrix<T>> {
    cfg.validate()?;
    let y = y.into();
    if y.rows() != x.rows() {
        return Err(Error::mismatch("ridge targets rows", x.rows(), y.rows()));
    }
    PreparedRidge::new(x, cfg.mode, cfg.gram_budget_bytes)?.solve(y, cfg)
}
