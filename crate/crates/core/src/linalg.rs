//! Small dense factorizations used by the randomized SVD.

use crate::dense::DenseMatrix;
use crate::scalar::{dot, Scalar};

const JACOBI_MAX_SWEEPS: usize = 100;

fn columns<T: Scalar>(a: &DenseMatrix<T>) -> Vec<Vec<T>> {
    (0..a.cols()).map(|c| (0..a.rows()).map(|r| a[(r, c)]).collect()).collect()
}

fn from_columns<T: Scalar>(rows: usize, cols: &[Vec<T>]) -> DenseMatrix<T> {
    let mut m = DenseMatrix::zeros(rows, cols.len());
    for (c, col) in cols.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    m
}

/// Thin Householder QR: `a (m×n) = Q R` with `Q` m×k orthonormal columns
/// and `R` k×n upper triangular, `k = min(m, n)`.
pub fn householder_qr<T: Scalar>(a: &DenseMatrix<T>) -> (DenseMatrix<T>, DenseMatrix<T>) {
    let (m, n) = a.shape();
    let k = m.min(n);
    let mut cols = columns(a);
    let mut reflectors: Vec<Option<(Vec<T>, T)>> = Vec::with_capacity(k);
    let two = T::lit(2.0);
    for j in 0..k {
        let x = &cols[j][j..];
        let norm = dot(x, x).sqrt();
        if norm.is_zero() {
            reflectors.push(None);
            continue;
        }
        let alpha = if x[0] >= T::zero() { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vn2 = dot(&v, &v);
        if vn2.is_zero() {
            reflectors.push(None);
            continue;
        }
        for col in cols.iter_mut().skip(j) {
            let tail = &mut col[j..];
            let s = two * dot(&v, tail) / vn2;
            tail.iter_mut().zip(&v).for_each(|(t, &vi)| *t -= s * vi);
        }
        reflectors.push(Some((v, vn2)));
    }
    let mut r = DenseMatrix::zeros(k, n);
    for (c, col) in cols.iter().enumerate() {
        for i in 0..k.min(c + 1) {
            r[(i, c)] = col[i];
        }
    }
    let mut q: Vec<Vec<T>> = (0..k)
        .map(|c| {
            let mut e = vec![T::zero(); m];
            e[c] = T::one();
            e
        })
        .collect();
    for (j, refl) in reflectors.iter().enumerate().rev() {
        if let Some((v, vn2)) = refl {
            for col in q.iter_mut() {
                let tail = &mut col[j..];
                let s = two * dot(v, tail) / *vn2;
                tail.iter_mut().zip(v).for_each(|(t, &vi)| *t -= s * vi);
            }
        }
    }
    (from_columns(m, &q), r)
}

/// One-sided Jacobi SVD of `a` (p×q). Returns singular values in
/// descending order and the matching right singular vectors as the
/// columns of a q×q orthogonal matrix.
pub fn jacobi_svd<T: Scalar>(a: &DenseMatrix<T>) -> (Vec<T>, DenseMatrix<T>) {
    let q = a.cols();
    let mut cols = columns(a);
    let mut v: Vec<Vec<T>> = (0..q)
        .map(|c| {
            let mut e = vec![T::zero(); q];
            e[c] = T::one();
            e
        })
        .collect();
    let tol = T::epsilon() * T::lit(4.0);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..q {
            for j in i + 1..q {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma.is_zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<T> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&x, &y| sigma[y].partial_cmp(&sigma[x]).unwrap_or(std::cmp::Ordering::Equal).then(x.cmp(&y)));
    let sorted_sigma = order.iter().map(|&i| sigma[i]).collect();
    let sorted_v: Vec<Vec<T>> = order.iter().map(|&i| v[i].clone()).collect();
    (sorted_sigma, from_columns(q, &sorted_v))
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], i: usize, j: usize, c: T, s: T) {
    let (left, right) = cols.split_at_mut(j);
    let (ci, cj) = (&mut left[i], &mut right[0]);
    for (a, b) in ci.iter_mut().zip(cj.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_deviation(q: &DenseMatrix<f64>) -> f64 {
        let g = q.transpose().matmul(q).unwrap();
        g.sub(&DenseMatrix::identity(q.cols())).unwrap().max_abs()
    }

    #[test]
    fn qr_reconstructs() {
        let a = DenseMatrix::from_rows(&[
            vec![2.0, -1.0, 0.5],
            vec![1.0, 3.0, 0.0],
            vec![0.0, 1.0, 4.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap();
        let (q, r) = householder_qr(&a);
        assert_eq!(q.shape(), (4, 3));
        assert!(gram_deviation(&q) < 1e-14);
        assert!(q.matmul(&r).unwrap().sub(&a).unwrap().max_abs() < 1e-13);
        assert_eq!(r[(1, 0)], 0.0);
    }

    #[test]
    fn qr_rank_deficient_still_orthonormal() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![0.0, 0.0]]).unwrap();
        let (q, r) = householder_qr(&a);
        assert!(gram_deviation(&q) < 1e-14);
        assert!(q.matmul(&r).unwrap().sub(&a).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn jacobi_on_known_matrix() {
        // singular values of [[3,0],[4,5]] are sqrt(45) and sqrt(5)
        let a = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![4.0, 5.0]]).unwrap();
        let (s, v) = jacobi_svd(&a);
        assert!((s[0] - 45f64.sqrt()).abs() < 1e-13);
        assert!((s[1] - 5f64.sqrt()).abs() < 1e-13);
        assert!(gram_deviation(&v) < 1e-14);
        let av = a.matmul(&v).unwrap();
        let u0: Vec<f64> = (0..2).map(|r| av[(r, 0)]).collect();
        let u1: Vec<f64> = (0..2).map(|r| av[(r, 1)]).collect();
        assert!(dot(&u0, &u1).abs() < 1e-12);
    }
}
