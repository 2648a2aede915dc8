//! Ranked-retrieval metrics: P@K and propensity-scored PSP@K, plus the
//! label-frequency and label-contribution distributions.

use std::fmt::Write as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::RankedPrediction;
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;
use crate::weighting::PropensityModel;

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn check<T>(preds: &[RankedPrediction<T>], truth_rows: usize, k: usize) -> Result<()> {
    if preds.len() != truth_rows {
        return Err(Error::mismatch("predictions vs truth rows", truth_rows, preds.len()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if preds.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    if let Some((i, p)) = preds.iter().enumerate().find(|(_, p)| p.len() < k) {
        return Err(Error::InvalidArgument(format!(
            "prediction {i} has {} labels, fewer than k = {k}",
            p.len()
        )));
    }
    Ok(())
}

#[inline]
fn is_relevant<T: Scalar>(truth: &SparseMatrix<T>, i: usize, label: usize) -> bool {
    truth.row(i).0.binary_search(&label).is_ok()
}

/// Total number of correct labels within the top `k` over all instances.
pub fn hits_at_k<T: Scalar, U: Scalar>(preds: &[RankedPrediction<T>], truth: &SparseMatrix<U>, k: usize) -> Result<u64> {
    check(preds, truth.rows(), k)?;
    Ok(preds
        .iter()
        .enumerate()
        .map(|(i, p)| p.label_ids[..k].iter().filter(|&&l| is_relevant(truth, i, l)).count() as u64)
        .sum())
}

/// `(1 / (k·N_test)) Σ_i Σ_{j≤k} y_i[η(j)]`.
pub fn precision_at_k<T: Scalar, U: Scalar>(preds: &[RankedPrediction<T>], truth: &SparseMatrix<U>, k: usize) -> Result<f64> {
    let hits = hits_at_k(preds, truth, k)?;
    Ok(hits as f64 / (k as f64 * preds.len() as f64))
}

fn check_propensity<U: Scalar>(truth: &SparseMatrix<U>, p: &PropensityModel) -> Result<()> {
    if p.num_labels() != truth.cols() {
        return Err(Error::mismatch("propensity labels vs truth labels", truth.cols(), p.num_labels()));
    }
    if let Some(l) = p.propensities().iter().position(|&q| q.is_nan() || q <= 0.0) {
        return Err(Error::InvalidArgument(format!("propensity of label {l} is not positive")));
    }
    Ok(())
}

fn psp_numerator<T: Scalar, U: Scalar>(preds: &[RankedPrediction<T>], truth: &SparseMatrix<U>, p: &PropensityModel, k: usize) -> f64 {
    let prop = p.propensities();
    let mut acc = CompensatedSum::default();
    for (i, pred) in preds.iter().enumerate() {
        for &l in &pred.label_ids[..k] {
            if is_relevant(truth, i, l) {
                acc.add(1.0 / prop[l]);
            }
        }
    }
    acc.value()
}

/// `(1 / (k·N_test)) Σ_i Σ_{j≤k} y_i[η(j)] / p_η(j)`, without normalization.
pub fn psp_at_k<T: Scalar, U: Scalar>(
    preds: &[RankedPrediction<T>],
    truth: &SparseMatrix<U>,
    p: &PropensityModel,
    k: usize,
) -> Result<f64> {
    check(preds, truth.rows(), k)?;
    check_propensity(truth, p)?;
    Ok(psp_numerator(preds, truth, p, k) / (k as f64 * preds.len() as f64))
}

/// PSP@K divided by the PSP@K of the ideal ranking (each instance's true
/// labels ordered by descending `1/p`). This is the convention of the
/// extreme-classification repository's published tables.
pub fn psp_at_k_normalized<T: Scalar, U: Scalar>(
    preds: &[RankedPrediction<T>],
    truth: &SparseMatrix<U>,
    p: &PropensityModel,
    k: usize,
) -> Result<f64> {
    check(preds, truth.rows(), k)?;
    check_propensity(truth, p)?;
    let ideal = ideal_psp_numerator(truth, p, k);
    if ideal == 0.0 {
        return Ok(0.0);
    }
    Ok(psp_numerator(preds, truth, p, k) / ideal)
}

fn ideal_psp_numerator<U: Scalar>(truth: &SparseMatrix<U>, p: &PropensityModel, k: usize) -> f64 {
    let w = p.weights();
    let mut acc = CompensatedSum::default();
    let mut buf = Vec::new();
    for i in 0..truth.rows() {
        buf.clear();
        buf.extend(truth.row(i).0.iter().map(|&l| w[l]));
        buf.sort_unstable_by(|a, b| b.total_cmp(a));
        buf.iter().take(k).for_each(|&v| acc.add(v));
    }
    acc.value()
}

/// P@K and PSP@K over a set of cutoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub k_values: Vec<usize>,
    pub precision_at: Vec<f64>,
    pub psp_at: Vec<f64>,
    pub psp_normalized_at: Vec<f64>,
    pub num_test: usize,
}

impl MetricsReport {
    /// Predictions must carry at least `max(k_values)` labels each.
    pub fn compute<T: Scalar, U: Scalar>(
        preds: &[RankedPrediction<T>],
        truth: &SparseMatrix<U>,
        p: &PropensityModel,
        k_values: &[usize],
    ) -> Result<Self> {
        let mut r = Self {
            k_values: k_values.to_vec(),
            precision_at: Vec::new(),
            psp_at: Vec::new(),
            psp_normalized_at: Vec::new(),
            num_test: preds.len(),
        };
        for &k in k_values {
            r.precision_at.push(precision_at_k(preds, truth, k)?);
            r.psp_at.push(psp_at_k(preds, truth, p, k)?);
            r.psp_normalized_at.push(psp_at_k_normalized(preds, truth, p, k)?);
        }
        Ok(r)
    }

    pub fn precision(&self, k: usize) -> Option<f64> {
        self.k_values.iter().position(|&x| x == k).map(|i| self.precision_at[i])
    }

    pub fn psp(&self, k: usize, normalized: bool) -> Option<f64> {
        let v = if normalized { &self.psp_normalized_at } else { &self.psp_at };
        self.k_values.iter().position(|&x| x == k).map(|i| v[i])
    }

    /// `k,p_at_k,psp_at_k` with PSP in the selected convention.
    pub fn to_csv(&self, normalized: bool) -> String {
        let mut s = String::from("k,p_at_k,psp_at_k\n");
        let psp = if normalized { &self.psp_normalized_at } else { &self.psp_at };
        for ((k, p), q) in self.k_values.iter().zip(&self.precision_at).zip(psp) {
            let _ = writeln!(s, "{k},{p},{q}");
        }
        s
    }

    /// Aligned percentage table with both PSP conventions.
    pub fn to_table(&self) -> String {
        let mut s = format!("{:>4}  {:>8}  {:>10}  {:>10}\n", "K", "P@K", "PSP@K", "PSP@K(n)");
        for i in 0..self.k_values.len() {
            let _ = writeln!(
                s,
                "{:>4}  {:>8.2}  {:>10.2}  {:>10.2}",
                self.k_values[i],
                100.0 * self.precision_at[i],
                100.0 * self.psp_at[i],
                100.0 * self.psp_normalized_at[i]
            );
        }
        let _ = writeln!(s, "N_test = {}", self.num_test);
        s
    }
}

/// `(label_id, count)` pairs, most frequent first, ties by label id.
pub fn label_frequency_histogram<T: Scalar>(d: &Dataset<T>) -> Vec<(usize, usize)> {
    let mut h: Vec<(usize, usize)> = d.label_counts().into_iter().enumerate().collect();
    h.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    h
}

/// Correct top-`k` predictions per label, listed in `freq_order` order
/// (position `r` holds the hits of label `freq_order[r]`).
pub fn label_contribution_at_k<T: Scalar, U: Scalar>(
    preds: &[RankedPrediction<T>],
    truth: &SparseMatrix<U>,
    k: usize,
    freq_order: &[usize],
) -> Result<Vec<u64>> {
    check(preds, truth.rows(), k)?;
    let l = truth.cols();
    if freq_order.len() != l {
        return Err(Error::mismatch("frequency order length", l, freq_order.len()));
    }
    let mut rank = vec![usize::MAX; l];
    for (r, &lab) in freq_order.iter().enumerate() {
        if lab >= l || rank[lab] != usize::MAX {
            return Err(Error::InvalidArgument("frequency order is not a permutation of labels".into()));
        }
        rank[lab] = r;
    }
    let mut out = vec![0u64; l];
    for (i, pred) in preds.iter().enumerate() {
        for &lab in &pred.label_ids[..k] {
            if lab < l && is_relevant(truth, i, lab) {
                out[rank[lab]] += 1;
            }
        }
    }
    Ok(out)
}
