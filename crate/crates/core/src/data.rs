//! Extreme Classification Repository datasets and feature plumbing.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;

use crate::dense::DenseMatrix;
use crate::error::{Error, ParseErrorKind, Result};
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::sparse::{CsrBuilder, SparseMatrix};

/// Feature matrix `X` (D×N) paired with a binary label matrix `Y` (D×L).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: SparseMatrix<T>,
    labels: SparseMatrix<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: SparseMatrix<T>, labels: SparseMatrix<T>) -> Result<Self> {
        if features.rows() != labels.rows() {
            return Err(Error::mismatch("dataset row counts", features.rows(), labels.rows()));
        }
        if labels.values().iter().any(|v| !v.is_one()) {
            return Err(Error::InvalidArgument("label matrix must be binary".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &SparseMatrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &SparseMatrix<T> {
        &self.labels
    }

    pub fn num_instances(&self) -> usize {
        self.features.rows()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.cols()
    }

    /// Number of instances carrying each label.
    pub fn label_counts(&self) -> Vec<usize> {
        self.labels.column_counts()
    }

    pub fn with_features(&self, features: SparseMatrix<T>) -> Result<Self> {
        Self::new(features, self.labels.clone())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(rows),
            labels: self.labels.select_rows(rows),
        }
    }
}

/// Parses the repository text format: a `D N L` header followed by `D`
/// lines of `l1,l2,... f1:v1 f2:v2 ...`.
pub fn parse_dataset<T: Scalar, R: BufRead>(source: R) -> Result<Dataset<T>> {
    let mut lines = source.lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => return Err(Error::parse(1, ParseErrorKind::MalformedHeader)),
    };
    let (d, n, l) = parse_header(strip_cr(&header))?;

    let mut fb = CsrBuilder::<T>::new(n);
    let mut lb = CsrBuilder::<T>::new(l);
    let mut parsed = 0usize;
    let mut trailing_blank = 0usize;
    let mut feats: Vec<(usize, T)> = Vec::new();
    let mut labs: Vec<usize> = Vec::new();
    for (offset, line) in lines.enumerate() {
        let line = line?;
        let line = strip_cr(&line);
        let lineno = offset + 2;
        if line.is_empty() {
            trailing_blank += 1;
            continue;
        }
        if trailing_blank > 0 {
            // interior blank lines are instances with neither labels nor features
            for _ in 0..trailing_blank {
                fb.push_sorted_row(std::iter::empty());
                lb.push_sorted_row(std::iter::empty());
            }
            parsed += trailing_blank;
            trailing_blank = 0;
        }
        if parsed == d {
            return Err(Error::parse(
                lineno,
                ParseErrorKind::LineCountMismatch {
                    expected: d,
                    found: parsed + 1,
                },
            ));
        }
        parse_line(line, lineno, n, l, &mut labs, &mut feats)?;
        fb.push_sorted_row(feats.drain(..));
        lb.push_sorted_row(labs.drain(..).map(|j| (j, T::one())));
        parsed += 1;
    }
    if parsed != d {
        return Err(Error::parse(
            parsed + 2,
            ParseErrorKind::LineCountMismatch {
                expected: d,
                found: parsed,
            },
        ));
    }
    Dataset::new(fb.finish(), lb.finish())
}

fn strip_cr(s: &str) -> &str {
    s.strip_suffix('\r').unwrap_or(s)
}

fn parse_header(line: &str) -> Result<(usize, usize, usize)> {
    let nums: Vec<usize> = line
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(1, ParseErrorKind::MalformedHeader))?;
    match nums[..] {
        [d, n, l] => Ok((d, n, l)),
        _ => Err(Error::parse(1, ParseErrorKind::MalformedHeader)),
    }
}

fn parse_line<T: Scalar>(
    line: &str,
    lineno: usize,
    n: usize,
    l: usize,
    labs: &mut Vec<usize>,
    feats: &mut Vec<(usize, T)>,
) -> Result<()> {
    let mut tokens = line.split(' ').filter(|t| !t.is_empty()).peekable();
    // leading space means an empty label list
    if !line.starts_with(' ') {
        if let Some(first) = tokens.peek().filter(|t| !t.contains(':')) {
            for tok in first.split(',').filter(|t| !t.is_empty()) {
                let lab: usize = tok
                    .parse()
                    .map_err(|_| Error::parse(lineno, ParseErrorKind::NonNumeric(tok.to_string())))?;
                if lab >= l {
                    return Err(Error::parse(
                        lineno,
                        ParseErrorKind::LabelIndexOutOfRange { index: lab, limit: l },
                    ));
                }
                labs.push(lab);
            }
            tokens.next();
        }
    }
    labs.sort_unstable();
    if let Some(w) = labs.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::parse(lineno, ParseErrorKind::DuplicateLabel(w[0])));
    }

    for tok in tokens {
        let bad = || Error::parse(lineno, ParseErrorKind::NonNumeric(tok.to_string()));
        let (j, v) = tok.split_once(':').ok_or_else(bad)?;
        let j: usize = j.parse().map_err(|_| bad())?;
        let v: T = v.parse().map_err(|_| bad())?;
        if !v.is_finite() {
            return Err(bad());
        }
        if j >= n {
            return Err(Error::parse(
                lineno,
                ParseErrorKind::FeatureIndexOutOfRange { index: j, limit: n },
            ));
        }
        feats.push((j, v));
    }
    feats.sort_by_key(|&(j, _)| j);
    if let Some(w) = feats.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::parse(lineno, ParseErrorKind::DuplicateFeature(w[0].0)));
    }
    Ok(())
}

/// Writes the repository text format; `parse_dataset` reads it back unchanged.
pub fn write_dataset<T: Scalar, W: Write>(d: &Dataset<T>, mut out: W) -> Result<()> {
    writeln!(out, "{} {} {}", d.num_instances(), d.num_features(), d.num_labels())?;
    for i in 0..d.num_instances() {
        let labels: Vec<String> = d.labels.row(i).0.iter().map(usize::to_string).collect();
        write!(out, "{}", labels.join(","))?;
        let (idx, vals) = d.features.row(i);
        if labels.is_empty() && idx.is_empty() {
            write!(out, " ")?;
        }
        for (j, v) in idx.iter().zip(vals) {
            write!(out, " {j}:{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Appends a dense block to the right of a sparse feature matrix.
pub fn concat_features<T: Scalar>(sparse: &SparseMatrix<T>, dense: &DenseMatrix<T>) -> Result<SparseMatrix<T>> {
    if sparse.rows() != dense.rows() {
        return Err(Error::mismatch("concat_features row count", sparse.rows(), dense.rows()));
    }
    let shift = sparse.cols();
    let mut b = CsrBuilder::new(shift + dense.cols());
    for i in 0..sparse.rows() {
        let (idx, vals) = sparse.row(i);
        let left = idx.iter().copied().zip(vals.iter().copied());
        let right = dense.row(i).iter().enumerate().map(|(j, &v)| (j + shift, v));
        b.push_sorted_row(left.chain(right));
    }
    Ok(b.finish())
}

/// Row indices of a uniform random `(train, validation)` partition, each
/// sorted ascending.
pub fn split_indices(num_rows: usize, validation_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {validation_fraction} outside (0, 1)"
        )));
    }
    let n_val = (validation_fraction * num_rows as f64).round() as usize;
    if n_val < 1 || n_val >= num_rows {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {validation_fraction} of {num_rows} rows leaves an empty side"
        )));
    }
    let mut perm: Vec<usize> = (0..num_rows).collect();
    perm.shuffle(&mut substream(seed, "split"));
    let mut val = perm[..n_val].to_vec();
    let mut train = perm[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

pub fn train_validation_split<T: Scalar>(
    d: &Dataset<T>,
    validation_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    let (train, val) = split_indices(d.num_instances(), validation_fraction, seed)?;
    Ok((d.select_rows(&train), d.select_rows(&val)))
}

/// Whitespace-separated text matrix, one row per line, no header.
pub fn read_dense_text<T: Scalar, R: BufRead>(source: R) -> Result<DenseMatrix<T>> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (k, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: T = tok
                .parse()
                .ok()
                .filter(|v: &T| v.is_finite())
                .ok_or_else(|| Error::parse(k + 1, ParseErrorKind::NonNumeric(tok.to_string())))?;
            values.push(v);
        }
        let width = values.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::parse(k + 1, ParseErrorKind::RaggedRow { expected: c, found: width }))
            }
            _ => {}
        }
        rows += 1;
    }
    DenseMatrix::from_vec(rows, cols.unwrap_or(0), values)
}

/// Headerless little-endian row-major matrix of `f32` (`width = 4`) or
/// `f64` (`width = 8`) values.
pub fn read_dense_binary<T: Scalar>(bytes: &[u8], cols: usize, width: usize) -> Result<DenseMatrix<T>> {
    if width != 4 && width != 8 {
        return Err(Error::InvalidArgument(format!("element width {width} must be 4 or 8")));
    }
    if cols == 0 || !bytes.len().is_multiple_of(cols * width) {
        return Err(Error::InvalidArgument(format!(
            "{} bytes is not a whole number of {cols}-column rows",
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(width)
        .map(|c| {
            if width == 4 {
                T::lit(f64::from(f32::read_le(c)))
            } else {
                T::lit(f64::read_le(c))
            }
        })
        .collect();
    DenseMatrix::from_vec(bytes.len() / (cols * width), cols, values)
}

/// Reads one column of a repository split file (1-based row ids, one row
/// of columns per line) as 0-based indices.
pub fn read_split_column<R: BufRead>(source: R, column: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (k, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tok = line.split_whitespace().nth(column).ok_or_else(|| {
            Error::parse(k + 1, ParseErrorKind::RaggedRow { expected: column + 1, found: line.split_whitespace().count() })
        })?;
        let id: usize = tok
            .parse()
            .ok()
            .filter(|&v| v >= 1)
            .ok_or_else(|| Error::parse(k + 1, ParseErrorKind::NonNumeric(tok.to_string())))?;
        if !seen.insert(id) {
            return Err(Error::parse(k + 1, ParseErrorKind::DuplicateFeature(id)));
        }
        out.push(id - 1);
    }
    Ok(out)
}
