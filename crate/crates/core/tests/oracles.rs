use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use nalgebra::DMatrix;
use ndarray::Array2;
use qfactors_core::factorization::{
    build_cooccurrence, cooccurrence_vocabulary, nnse_fit, truncated_svd, NnseConfig, RangeMethod,
    SvdConfig,
};
use qfactors_core::parsetree::{default_vp_labels, read_parse_sidecar};
use qfactors_core::{SparseMatrixF64, TruncatedSvdF64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn random_matrix(m: usize, n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((m, n), || rng.random_range(-1.0..1.0))
}

fn oracle_values(x: &Array2<f64>) -> Vec<f64> {
    let (m, n) = x.dim();
    let mut s: Vec<f64> = DMatrix::from_fn(m, n, |i, j| x[(i, j)])
        .singular_values()
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[test]
fn full_rank_svd_matches_dense_oracle() {
    for (m, n, seed) in [(40, 30, 1), (30, 40, 2), (25, 25, 3)] {
        let x = random_matrix(m, n, seed);
        let oracle = oracle_values(&x);
        let full = m.min(n);
        for method in [RangeMethod::BlockKrylov, RangeMethod::Subspace] {
            let cfg = SvdConfig {
                method,
                seed,
                ..SvdConfig::default()
            };
            let svd: TruncatedSvdF64 = truncated_svd(&x, full, &cfg).unwrap();
            for (s, o) in svd.s.iter().zip(&oracle) {
                assert!((s - o).abs() <= 1e-8 * o, "{method:?}: {s} vs {o}");
            }
            let eye = Array2::<f64>::eye(full);
            assert!(max_abs(&(svd.u.t().dot(&svd.u) - &eye)) <= 1e-8);
            assert!(max_abs(&(svd.v.t().dot(&svd.v) - &eye)) <= 1e-8);
            let err = max_abs(&(svd.reconstruct() - &x)) / max_abs(&x);
            assert!(err <= 1e-8, "reconstruction error {err}");
        }
    }
}

#[test]
fn truncated_svd_tracks_leading_values() {
    // A decaying spectrum on a taller matrix, so rank 10 does not already span everything.
    let (m, n) = (200, 120);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let q1 = random_matrix(m, n, 10);
    let q2 = random_matrix(n, n, 11);
    let decay = Array2::from_diag(&ndarray::Array1::from_shape_fn(n, |i| {
        0.85f64.powi(i as i32)
    }));
    let x = q1.dot(&decay).dot(&q2) + random_matrix(m, n, rng.random()) * 1e-6;
    let oracle = oracle_values(&x);
    let svd: TruncatedSvdF64 = truncated_svd(&x, 10, &SvdConfig::default()).unwrap();
    for (i, s) in svd.s.iter().enumerate() {
        let rel = (s - oracle[i]).abs() / oracle[i];
        assert!(rel <= 1e-3, "value {i}: relative error {rel}");
    }
}

#[test]
fn sparse_input_agrees_with_dense() {
    let dense = random_matrix(30, 20, 4).mapv(|v| if v > 0.3 { v } else { 0.0 });
    let sparse = SparseMatrixF64::from_dense(dense.view()).unwrap();
    let cfg = SvdConfig::default();
    let a: TruncatedSvdF64 = truncated_svd(&dense, 8, &cfg).unwrap();
    let b: TruncatedSvdF64 = truncated_svd(&sparse, 8, &cfg).unwrap();
    for (x, y) in a.s.iter().zip(&b.s) {
        assert!((x - y).abs() <= 1e-10 * x.max(1.0));
    }
}

#[test]
fn cooccurrence_without_lexicon_is_term_frequency() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let docs: Vec<Vec<String>> = (0..40)
        .map(|_| {
            (0..rng.random_range(1..12))
                .map(|_| format!("t{}", rng.random_range(0..15)))
                .collect()
        })
        .collect();
    let vocab = cooccurrence_vocabulary(&docs, None);
    let (x, stats) = build_cooccurrence::<f64>(&docs, &vocab, None).unwrap();
    for (i, doc) in docs.iter().enumerate() {
        let mut counts: HashMap<&str, f64> = HashMap::new();
        for w in doc {
            *counts.entry(w).or_default() += 1.0;
        }
        for (w, c) in &counts {
            assert_eq!(x.get(i, vocab.get(w).unwrap()), *c);
        }
        assert_eq!(x.row(i).count(), counts.len());
    }
    assert_eq!(stats.entries_before, stats.entries_after);
}

#[test]
fn fitted_model_meets_its_constraints() {
    let x = random_matrix(120, 15, 6).mapv(f64::abs);
    for lambda1 in [0.2, 1.0, 5.0] {
        let cfg = NnseConfig {
            k: 12,
            lambda1,
            max_iters: 60,
            ..NnseConfig::default()
        };
        let fit = nnse_fit(x.view(), &cfg).unwrap();
        fit.model.check(1e-9).unwrap();
        let a = fit.model.memberships_dense();
        assert!(a.iter().all(|&v| v >= 0.0));
        for row in a.rows() {
            assert!(row.sum() <= lambda1 * (1.0 + 1e-9));
        }
        for row in fit.model.dictionary.rows() {
            assert!(row.dot(&row) <= 1.0 + 1e-9);
        }
    }
}

#[test]
fn calibration_parses_give_the_printed_structure() {
    let file = File::open(fixture("calibration_parses.jsonl")).unwrap();
    let parsed = read_parse_sidecar(BufReader::new(file), &default_vp_labels()).unwrap();
    let expected = [
        ("q-cal-1", (2, 0, 0)),
        ("q-cal-2", (6, 0, 0)),
        ("q-cal-3", (7, 3, 6)),
        ("q-cal-4", (11, 4, 9)),
    ];
    for (id, (depth, vps, max_vp)) in expected {
        let s = parsed[id][0];
        assert_eq!(
            (s.depth, s.vp_count, s.max_vp_depth),
            (depth, vps, max_vp),
            "{id}"
        );
        let ratio = if vps == 0 {
            0.0
        } else {
            max_vp as f64 / depth as f64
        };
        assert_eq!(s.vp_ratio, ratio);
    }
    assert_eq!(parsed["q-cal-1"][0].ratio_display(), "0.00");
    assert_eq!(parsed["q-cal-4"][0].ratio_display(), "0.81");
}

#[test]
fn planted_model_objective_is_reached() {
    use qfactors_core::factorization::objective;
    use rand::seq::index::sample;
    use rand_distr::{Distribution, Normal};

    let (n, r, k) = (200, 20, 10);
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(70 + seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut d: Array2<f64> = Array2::from_shape_simple_fn((k, r), || normal.sample(&mut rng));
        for mut row in d.rows_mut() {
            let norm = row.dot(&row).sqrt();
            row.mapv_inplace(|v| v / norm);
        }
        let mut a = Array2::<f64>::zeros((n, k));
        for i in 0..n {
            for j in sample(&mut rng, k, 2) {
                a[(i, j)] = rng.random_range(0.2..0.5);
            }
        }
        let noise = Normal::new(0.0, 0.01).unwrap();
        let x = a.dot(&d) + Array2::from_shape_simple_fn((n, r), || noise.sample(&mut rng));
        let planted = objective(x.view(), a.view(), d.view()).unwrap();
        let cfg = NnseConfig {
            k,
            seed,
            ..NnseConfig::default()
        };
        let fit = nnse_fit(x.view(), &cfg).unwrap();
        let fitted = *fit.history.last().unwrap();
        assert!(
            fitted <= 1.05 * planted,
            "seed {seed}: fitted {fitted} vs planted {planted}"
        );
    }
}
