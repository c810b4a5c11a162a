mod common;

use cartomap_core::embed::{embed_articles, embed_terms, fit_lsa};
use common::dense;
use nalgebra::DMatrix;

#[test]
fn randomized_svd_close_to_exact_truncation() {
    for seed in [1, 2] {
        let m = common::random_sparse(500, 2000, 0.01, seed);
        let d = 20;
        let model = fit_lsa(&m, d, 7).unwrap();
        let a = dense(&m);
        let svd = a.clone().svd(false, false);
        let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
        s.sort_by(|x, y| y.total_cmp(x));
        let total: f64 = s.iter().map(|v| v * v).sum();
        let exact_err = (s[d..].iter().map(|v| v * v).sum::<f64>() / total).sqrt();

        let v = DMatrix::from_row_slice(2000, d, model.term_components.data());
        let resid = &a - &a * &v * v.transpose();
        let err = resid.norm() / a.norm();
        assert!(err <= 1.05 * exact_err, "seed {seed}: {err} vs exact {exact_err}");

        // projected singular values never exceed the true ones
        for i in 0..d {
            let got = model.singular_values[i];
            assert!(got <= s[i] * (1.0 + 1e-9) && got >= 0.95 * s[i], "singular value {i}: {got} vs {}", s[i]);
        }
        let vtv = v.transpose() * &v;
        assert!((vtv - DMatrix::identity(d, d)).amax() < 1e-8);
    }
}

#[test]
fn article_and_term_vectors_agree_with_factorization() {
    let m = common::random_sparse(120, 300, 0.05, 3);
    let model = fit_lsa(&m, 10, 1).unwrap();
    let arts = embed_articles(&model, &m).unwrap();
    let words = embed_terms(&model);
    let a = dense(&m);
    let v = DMatrix::from_row_slice(300, 10, model.term_components.data());
    let av = &a * &v;
    for i in 0..120 {
        for c in 0..10 {
            assert!((arts.row(i)[c] - av[(i, c)]).abs() < 1e-10);
        }
    }
    for t in 0..300 {
        for c in 0..10 {
            assert!((words.row(t)[c] - v[(t, c)] * model.singular_values[c]).abs() < 1e-10);
        }
    }
}

#[test]
fn fit_is_deterministic_per_seed() {
    let m = common::random_sparse(80, 200, 0.05, 9);
    assert_eq!(fit_lsa(&m, 8, 5).unwrap(), fit_lsa(&m, 8, 5).unwrap());
}
