mod common;

use common::*;
use proptest::prelude::*;
use xml_ridge::solver::{gram_dual, gram_primal, solve_ridge, solve_spd, RidgeSolveConfig, SolveMode, Targets};
use xml_ridge::{DenseMatrix, SparseMatrix};

fn solve(x: &SparseMatrix, y: &SparseMatrix, lambda: f64, mode: SolveMode) -> DenseMatrix {
    let mut cfg = RidgeSolveConfig::with_lambda(lambda);
    cfg.mode = mode;
    solve_ridge(x, y, &cfg).unwrap()
}

#[test]
fn gram_matches_triple_loop() {
    let mut r = rng(1);
    let x = random_sparse(&mut r, 6, 4, 0.6);
    let xv = to_vecs(&x);
    let xt = naive_transpose(&xv);
    let primal = dense_vecs(&gram_primal(&x).unwrap());
    let dual_in = random_sparse(&mut r, 4, 6, 0.6);
    let dv = to_vecs(&dual_in);
    let dual = dense_vecs(&gram_dual(&dual_in).unwrap());
    assert!(frob(&sub(&primal, &naive_matmul(&xt, &xv))) < 1e-12);
    assert!(frob(&sub(&dual, &naive_matmul(&dv, &naive_transpose(&dv)))) < 1e-12);
    for g in [&primal, &dual] {
        for i in 0..g.len() {
            for j in 0..g.len() {
                assert_eq!(g[i][j], g[j][i]);
            }
        }
    }
}

#[test]
fn spd_solve_residual() {
    let mut r = rng(2);
    let a = DenseMatrix::from_rows(&random_rows(&mut r, 8, 8, 1.0)).unwrap();
    let mut spd = a.transpose().matmul(&a).unwrap();
    for i in 0..8 {
        spd[(i, i)] += 1.0;
    }
    let b = DenseMatrix::from_rows(&random_rows(&mut r, 8, 3, 1.0)).unwrap();
    let z = solve_spd(&spd, &b, None).unwrap();
    let resid = naive_matmul(&dense_vecs(&spd), &dense_vecs(&z));
    let err = frob(&sub(&resid, &dense_vecs(&b))) / frob(&dense_vecs(&b)).max(1.0);
    assert!(err <= 1e-8, "residual {err}");
}

#[test]
fn ridge_matches_gradient_descent() {
    let mut r = rng(3);
    let x = random_sparse(&mut r, 5, 3, 1.0);
    let y = random_binary(&mut r, 5, 2, 0.5);
    let w = solve(&x, &y, 0.1, SolveMode::Auto);
    let gd = gradient_descent_ridge(&to_vecs(&x), &to_vecs(&y), 0.1, 2_000_000);
    for (a, b) in dense_vecs(&w).iter().flatten().zip(gd.iter().flatten()) {
        assert!((a - b).abs() <= 1e-5, "{a} vs {b}");
    }
}

#[test]
fn dense_targets_match_sparse_targets() {
    let mut r = rng(4);
    let x = random_sparse(&mut r, 7, 4, 0.7);
    let y = random_binary(&mut r, 7, 3, 0.4);
    let cfg = RidgeSolveConfig::with_lambda(0.5);
    let a = solve_ridge(&x, &y, &cfg).unwrap();
    let yd = y.to_dense();
    let b = solve_ridge(&x, Targets::Dense(&yd), &cfg).unwrap();
    assert!(a.sub(&b).unwrap().max_abs() < 1e-13);
}

fn rel_frob(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

fn stationarity(x: &SparseMatrix, y: &SparseMatrix, w: &DenseMatrix, lambda: f64) -> f64 {
    let xv = to_vecs(x);
    let xt = naive_transpose(&xv);
    let resid = sub(&naive_matmul(&xv, &dense_vecs(w)), &to_vecs(y));
    let mut grad = naive_matmul(&xt, &resid);
    for (gr, wr) in grad.iter_mut().zip(dense_vecs(w)) {
        for (g, wv) in gr.iter_mut().zip(wr) {
            *g += lambda * wv;
        }
    }
    frob(&grad) / frob(&naive_matmul(&xt, &to_vecs(y))).max(1.0)
}

fn arb_problem() -> impl Strategy<Value = (u64, usize, usize, usize, i32)> {
    (any::<u64>(), 1usize..=30, 1usize..=30, 1usize..=6, -3i32..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn primal_dual_agree_and_stationary((seed, d, n, l, e) in arb_problem()) {
        let mut r = rng(seed);
        let x = random_sparse(&mut r, d, n, 0.5);
        let y = random_binary(&mut r, d, l, 0.3);
        let lambda = 10f64.powi(e);
        let p = solve(&x, &y, lambda, SolveMode::Primal);
        let q = solve(&x, &y, lambda, SolveMode::Dual);
        if p.frobenius_norm() > 0.0 {
            prop_assert!(rel_frob(&q, &p) <= 1e-8, "rel {}", rel_frob(&q, &p));
        }
        prop_assert!(stationarity(&x, &y, &p, lambda) <= 1e-6);
    }

    #[test]
    fn shrinkage_is_monotone((seed, d, n, l, _e) in arb_problem()) {
        let mut r = rng(seed);
        let x = random_sparse(&mut r, d, n, 0.5);
        let y = random_binary(&mut r, d, l, 0.3);
        let norms: Vec<f64> = [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0]
            .iter()
            .map(|&lam| solve(&x, &y, lam, SolveMode::Auto).frobenius_norm())
            .collect();
        for w in norms.windows(2) {
            prop_assert!(w[0] >= w[1] * (1.0 - 1e-12), "{:?}", norms);
        }
    }

    #[test]
    fn linear_in_targets((seed, d, n, l, e) in arb_problem(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mut r = rng(seed);
        let x = random_sparse(&mut r, d, n, 0.5);
        let y1 = random_binary(&mut r, d, l, 0.3).to_dense();
        let y2 = random_binary(&mut r, d, l, 0.3).to_dense();
        let mut comb = y1.clone();
        comb.scale(alpha);
        let mut b2 = y2.clone();
        b2.scale(beta);
        let comb = DenseMatrix::from_vec(d, l, comb.values().iter().zip(b2.values()).map(|(a, b)| a + b).collect()).unwrap();
        let cfg = RidgeSolveConfig::with_lambda(10f64.powi(e));
        let lhs = solve_ridge(&x, Targets::Dense(&comb), &cfg).unwrap();
        let mut w1 = solve_ridge(&x, Targets::Dense(&y1), &cfg).unwrap();
        let mut w2 = solve_ridge(&x, Targets::Dense(&y2), &cfg).unwrap();
        w1.scale(alpha);
        w2.scale(beta);
        let rhs = DenseMatrix::from_vec(n, l, w1.values().iter().zip(w2.values()).map(|(a, b)| a + b).collect()).unwrap();
        let scale = lhs.max_abs().max(rhs.max_abs()).max(1.0);
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-9 * scale);
    }
}
