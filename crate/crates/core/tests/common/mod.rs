#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xml_ridge::{DenseMatrix, SparseMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense rows with roughly `density` nonzeros drawn from N(0,1)-ish.
pub fn random_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| if rng.random::<f64>() < density { rng.random_range(-2.0..2.0) } else { 0.0 })
                .collect()
        })
        .collect()
}

pub fn random_sparse(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> SparseMatrix {
    SparseMatrix::from_dense(&DenseMatrix::from_rows(&random_rows(rng, rows, cols, density)).unwrap())
}

pub fn random_binary(rng: &mut ChaCha8Rng, rows: usize, cols: usize, p: f64) -> SparseMatrix {
    let rows: Vec<Vec<(usize, f64)>> = (0..rows)
        .map(|_| (0..cols).filter(|_| rng.random::<f64>() < p).map(|j| (j, 1.0)).collect())
        .collect();
    SparseMatrix::from_row_entries(cols, rows).unwrap()
}

/// Plain nested `Vec` view of a sparse matrix.
pub fn to_vecs(m: &SparseMatrix) -> Vec<Vec<f64>> {
    let d = m.to_dense();
    (0..d.rows()).map(|i| d.row(i).to_vec()).collect()
}

/// Naive triple loop `a * b`.
pub fn naive_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            c[i][j] = s;
        }
    }
    c
}

pub fn naive_transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.first().map_or(0, Vec::len);
    (0..m).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn frob(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn sub(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect()
}

pub fn dense_vecs(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Minimizes ‖Y − XW‖²_F + λ‖W‖²_F by fixed-step gradient descent.
pub fn gradient_descent_ridge(x: &[Vec<f64>], y: &[Vec<f64>], lambda: f64, max_iter: usize) -> Vec<Vec<f64>> {
    let xt = naive_transpose(x);
    let g = naive_matmul(&xt, x);
    let n = g.len();
    // step below 1/L, L = 2(‖XᵀX‖ + λ); Gershgorin bound on the spectrum
    let bound = g.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / (2.0 * (bound + lambda));
    let xty = naive_matmul(&xt, y);
    let l = y.first().map_or(0, Vec::len);
    let mut w = vec![vec![0.0; l]; n];
    for _ in 0..max_iter {
        let gw = naive_matmul(&g, &w);
        let mut gnorm = 0.0;
        for i in 0..n {
            for j in 0..l {
                let grad = 2.0 * (gw[i][j] - xty[i][j] + lambda * w[i][j]);
                gnorm += grad * grad;
                w[i][j] -= step * grad;
            }
        }
        if gnorm.sqrt() < 1e-14 {
            break;
        }
    }
    w
}
