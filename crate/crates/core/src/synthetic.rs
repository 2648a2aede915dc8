//! Power-law multi-label datasets for tests, benchmarks and demos.
//!
//! Label popularity follows a Zipf law, so a few head labels cover most
//! instances while the tail is rare. Each label owns a small vocabulary of
//! indicative features; an instance mixes the vocabularies of its labels
//! with random noise features.

use rand::Rng;
use rand_distr::{Distribution, Zipf};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub instances: usize,
    pub features: usize,
    pub labels: usize,
    /// Zipf exponent of label popularity.
    pub zipf_exponent: f64,
    /// Labels per instance are drawn uniformly from `1..=max_labels_per_instance`.
    pub max_labels_per_instance: usize,
    pub words_per_label: usize,
    /// Chance each word of an assigned label appears.
    pub word_keep_prob: f64,
    pub noise_words: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            instances: 1000,
            features: 400,
            labels: 60,
            zipf_exponent: 1.1,
            max_labels_per_instance: 3,
            words_per_label: 8,
            word_keep_prob: 0.6,
            noise_words: 10,
        }
    }
}

/// Generates a dataset; identical `(cfg, seed)` give identical data.
pub fn power_law_dataset<T: Scalar>(cfg: &SyntheticConfig, seed: u64) -> Result<Dataset<T>> {
    if cfg.features == 0 || cfg.labels == 0 || cfg.max_labels_per_instance == 0 {
        return Err(Error::InvalidArgument("synthetic dimensions must be positive".into()));
    }
    let mut rng = substream(seed, "synthetic");
    let zipf = Zipf::new(cfg.labels as f64, cfg.zipf_exponent)
        .map_err(|e| Error::InvalidArgument(format!("zipf: {e}")))?;
    // scatter popularity ranks over label ids
    let mut rank_to_label: Vec<usize> = (0..cfg.labels).collect();
    rand::seq::SliceRandom::shuffle(&mut rank_to_label[..], &mut rng);
    let vocab: Vec<Vec<usize>> = (0..cfg.labels)
        .map(|_| (0..cfg.words_per_label).map(|_| rng.random_range(0..cfg.features)).collect())
        .collect();

    let mut feats = Vec::with_capacity(cfg.instances);
    let mut labs = Vec::with_capacity(cfg.instances);
    for _ in 0..cfg.instances {
        let want = rng.random_range(1..=cfg.max_labels_per_instance.min(cfg.labels));
        let mut ls: Vec<usize> = Vec::with_capacity(want);
        let mut tries = 0;
        while ls.len() < want && tries < 50 * want {
            let rank = zipf.sample(&mut rng) as usize - 1;
            let l = rank_to_label[rank.min(cfg.labels - 1)];
            if !ls.contains(&l) {
                ls.push(l);
            }
            tries += 1;
        }
        let mut row = std::collections::BTreeMap::<usize, f64>::new();
        for &l in &ls {
            for &w in &vocab[l] {
                if rng.random::<f64>() < cfg.word_keep_prob {
                    *row.entry(w).or_insert(0.0) += 1.0;
                }
            }
        }
        for _ in 0..cfg.noise_words {
            *row.entry(rng.random_range(0..cfg.features)).or_insert(0.0) += 1.0;
        }
        feats.push(row.into_iter().map(|(j, tf)| (j, T::lit((1.0 + tf).ln()))).collect());
        labs.push(ls.into_iter().map(|l| (l, T::one())).collect());
    }
    Dataset::new(
        SparseMatrix::from_row_entries(cfg.features, feats)?,
        SparseMatrix::from_row_entries(cfg.labels, labs)?,
    )
}
