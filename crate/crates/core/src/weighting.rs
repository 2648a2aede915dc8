//! Inverse-propensity label weights for tail labels.
//!
//! The weight of label `l` is
//! `θ_l = 1/p_l = 1 + (ln N − 1)(B + 1)^A (N_l + B)^(−A)`
//! with `N` training instances of which `N_l` carry the label.

use std::io::{BufRead, Write};

use crate::error::{Error, ParseErrorKind, Result};
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

pub const DEFAULT_A: f64 = 0.55;
pub const DEFAULT_B: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel {
    a_param: f64,
    b_param: f64,
    num_train: usize,
    label_counts: Option<Vec<usize>>,
    propensities: Vec<f64>,
    weights: Vec<f64>,
}

/// θ for one label.
#[inline]
pub fn inverse_propensity(count: usize, num_train: usize, a: f64, b: f64) -> f64 {
    let c = (num_train as f64).ln() - 1.0;
    1.0 + c * ((b + 1.0) / (count as f64 + b)).powf(a)
}

pub fn compute_propensity(label_counts: &[usize], num_train: usize, a_param: f64, b_param: f64) -> Result<PropensityModel> {
    if num_train < 2 {
        return Err(Error::InvalidArgument(format!(
            "propensity needs at least 2 training instances, got {num_train}"
        )));
    }
    if !a_param.is_finite() || !b_param.is_finite() {
        return Err(Error::InvalidArgument("propensity parameters must be finite".into()));
    }
    let min_count = label_counts.iter().copied().min().unwrap_or(0) as f64;
    if b_param.is_nan() || b_param <= -min_count || b_param + 1.0 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "B = {b_param} must exceed -min(N_l) = {} and -1",
            -min_count
        )));
    }
    let weights: Vec<f64> = label_counts
        .iter()
        .map(|&n| inverse_propensity(n, num_train, a_param, b_param))
        .collect();
    let propensities = weights.iter().map(|w| 1.0 / w).collect();
    Ok(PropensityModel {
        a_param,
        b_param,
        num_train,
        label_counts: Some(label_counts.to_vec()),
        propensities,
        weights,
    })
}

impl PropensityModel {
    /// Propensity model with given weights and no recorded counts.
    pub fn from_weights(weights: Vec<f64>, a_param: f64, b_param: f64, num_train: usize) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!("weight {w} must be positive and finite")));
        }
        Ok(Self {
            a_param,
            b_param,
            num_train,
            label_counts: None,
            propensities: weights.iter().map(|w| 1.0 / w).collect(),
            weights,
        })
    }

    /// Every label weighted 1 (propensity 1).
    pub fn uniform(num_labels: usize) -> Self {
        Self {
            a_param: 0.0,
            b_param: 0.0,
            num_train: 0,
            label_counts: None,
            propensities: vec![1.0; num_labels],
            weights: vec![1.0; num_labels],
        }
    }

    pub fn a_param(&self) -> f64 {
        self.a_param
    }

    pub fn b_param(&self) -> f64 {
        self.b_param
    }

    pub fn num_train(&self) -> usize {
        self.num_train
    }

    pub fn label_counts(&self) -> Option<&[usize]> {
        self.label_counts.as_deref()
    }

    pub fn propensities(&self) -> &[f64] {
        &self.propensities
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_labels(&self) -> usize {
        self.weights.len()
    }

    /// Writes `label_id θ` lines after a `#` line recording A, B and N.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# a={} b={} num_train={}", self.a_param, self.b_param, self.num_train)?;
        for (l, w) in self.weights.iter().enumerate() {
            writeln!(out, "{l} {w}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(source: R) -> Result<Self> {
        let (mut a, mut b, mut n) = (DEFAULT_A, DEFAULT_B, 0usize);
        let mut weights = Vec::new();
        for (k, line) in source.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let bad = |tok: &str| Error::parse(k + 1, ParseErrorKind::NonNumeric(tok.to_string()));
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("a", v)) => a = v.parse().map_err(|_| bad(v))?,
                        Some(("b", v)) => b = v.parse().map_err(|_| bad(v))?,
                        Some(("num_train", v)) => n = v.parse().map_err(|_| bad(v))?,
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(id), Some(w), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::parse(k + 1, ParseErrorKind::RaggedRow { expected: 2, found: line.split_whitespace().count() }));
            };
            let id: usize = id.parse().map_err(|_| bad(id))?;
            let w: f64 = w.parse().map_err(|_| bad(w))?;
            if id != weights.len() {
                return Err(Error::parse(k + 1, ParseErrorKind::LabelIndexOutOfRange { index: id, limit: weights.len() }));
            }
            weights.push(w);
        }
        Self::from_weights(weights, a, b, n)
    }
}

/// Scales every stored label entry `(i, l)` by `θ_l`; the sparsity pattern
/// is unchanged.
pub fn apply_weights<T: Scalar>(y: &SparseMatrix<T>, p: &PropensityModel) -> Result<SparseMatrix<T>> {
    if y.cols() != p.num_labels() {
        return Err(Error::mismatch("label weights length", y.cols(), p.num_labels()));
    }
    let theta: Vec<T> = p.weights.iter().map(|&w| T::lit(w)).collect();
    Ok(y.map_by_column(|j, v| v * theta[j]))
}
