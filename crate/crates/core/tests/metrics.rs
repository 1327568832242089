mod common;

use common::*;
use proptest::prelude::*;
use xfdl::explain::attribution_matrix;
use xfdl::game::{surrogate_violations, ConstraintSpec};
use xfdl::metrics::*;
use xfdl::nn::{Mlp, Sample, DEFAULT_LAYER_SIZES};

/// θ written as a plain loop: mask the ⌈pQ/100⌉ largest |a| (lowest index
/// first on ties), compare predicted-class probabilities.
fn brute_log_odds(m: &Mlp<f64>, xs: &[Sample<f64>], attrs: &[Vec<f64>], p: f64) -> f64 {
    let c = (p / 100.0 * 3.0).ceil() as usize;
    let mut total = 0.0;
    for (s, a) in xs.iter().zip(attrs) {
        let mut xm = s.x.clone();
        let mut used = [false; 3];
        for _ in 0..c {
            let mut best = usize::MAX;
            for q in 0..3 {
                if !used[q] && (best == usize::MAX || a[q].abs() > a[best].abs()) {
                    best = q;
                }
            }
            used[best] = true;
            xm[best] = 0.0;
        }
        let p_full = oracle_prob(m, &s.x);
        let class = p_full >= 0.5;
        let p_mask = oracle_prob(m, &xm);
        let (num, den) = if class { (p_mask, p_full) } else { (1.0 - p_mask, 1.0 - p_full) };
        total += (num / den).ln();
    }
    total / xs.len() as f64
}

#[test]
fn log_odds_matches_brute_force_loop() {
    let m = Mlp::<f64>::init(&DEFAULT_LAYER_SIZES, 42).unwrap();
    let xs = lcg_samples(100, 6, 2.0);
    let attrs = attribution_matrix(&m, &xs, &[0.0; 3], 64).unwrap();
    for p in [0.0, 10.0, 33.0, 34.0, 66.0, 67.0, 100.0] {
        let got = log_odds(&m, &xs, &attrs, p).unwrap();
        let want = brute_log_odds(&m, &xs, &attrs.values, p);
        assert!((got - want).abs() <= 1e-12, "p={p}: {got} vs {want}");
    }
    assert_eq!(log_odds(&m, &xs, &attrs, 0.0).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn recall_matches_counting(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
        let preds: Vec<bool> = pairs.iter().map(|p| p.0).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        let pos = labels.iter().filter(|&&l| l).count();
        let tp = pairs.iter().filter(|p| p.0 && p.1).count();
        match recall::<f64>(&preds, &labels) {
            Ok(r) => prop_assert_eq!(r, tp as f64 / pos as f64),
            Err(_) => prop_assert_eq!(pos, 0),
        }
    }

    #[test]
    fn recall_surrogate_brute_force(
        rows in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..100),
        alpha in 0.01f64..1.0,
    ) {
        let soft: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let (mut hit, mut pos) = (0.0, 0usize);
        for (s, l) in &rows {
            if *l {
                hit += s.min(1.0);
                pos += 1;
            }
        }
        let spec = ConstraintSpec { alpha, beta: -0.01, top_p: 33.0 };
        if pos == 0 {
            prop_assert!(surrogate_violations(&soft, &labels, 0.0, &spec).is_err());
        } else {
            let soft_recall = hit / pos as f64;
            let psi = surrogate_violations(&soft, &labels, 0.0, &spec).unwrap();
            prop_assert!((psi[0] - (alpha - soft_recall)).abs() <= 1e-12);
            if (alpha - soft_recall).abs() > 1e-12 {
                prop_assert_eq!(psi[0] > 0.0, alpha > soft_recall);
            }
        }
    }

    #[test]
    fn mask_zeroes_exactly_the_top_coordinates(
        x in prop::collection::vec(-5.0f64..5.0, 3),
        a in prop::collection::vec(-1.0f64..1.0, 3),
        p in 0.0f64..=100.0,
    ) {
        let masked = top_p_mask(&x, &a, p).unwrap();
        let c = mask_count(p, 3).unwrap();
        let zeroed = top_indices(&a, c);
        prop_assert_eq!(zeroed.len(), c);
        for q in 0..3 {
            let want = if zeroed.contains(&q) { 0.0 } else { x[q] };
            prop_assert_eq!(masked[q], want);
        }
        for &i in &zeroed {
            for q in 0..3 {
                if !zeroed.contains(&q) {
                    prop_assert!(a[i].abs() >= a[q].abs());
                }
            }
        }
    }
}

#[test]
fn surrogate_is_a_soft_version_of_recall() {
    // On a trained-looking model the soft recall over positives stays within
    // the spread of the probabilities around the hard decision.
    let m = Mlp::<f64>::init(&DEFAULT_LAYER_SIZES, 1).unwrap();
    for seed in 0..20 {
        let xs = lcg_samples(200, seed, 2.0);
        let soft: Vec<f64> = xs.iter().map(|s| m.predict(&s.x).raw).collect();
        let preds: Vec<bool> = soft.iter().map(|&p| p >= 0.5).collect();
        let labels: Vec<bool> = xs.iter().map(|s| s.label).collect();
        let hard: f64 = recall(&preds, &labels).unwrap();
        let soft_r = recall_surrogate(&soft, &labels, 0.0).unwrap();
        assert!((0.0..=1.0).contains(&soft_r));
        // each positive contributes σ ∈ [0, 1] vs its hit in {0, 1}, so the
        // gap cannot exceed the mean distance to the hard call
        let pos: Vec<f64> = soft.iter().zip(&labels).filter(|(_, &l)| l).map(|(&p, _)| p).collect();
        let bound = pos.iter().map(|&p| if p >= 0.5 { 1.0 - p } else { p }).sum::<f64>() / pos.len() as f64;
        assert!((hard - soft_r).abs() <= bound + 1e-12);
    }
}

#[test]
fn correlation_matches_textbook_pearson() {
    let m = Mlp::<f64>::init(&DEFAULT_LAYER_SIZES, 2).unwrap();
    let xs = lcg_samples(120, 3, 2.0);
    let attrs = attribution_matrix(&m, &xs, &[0.0; 3], 32).unwrap();
    let soft: Vec<f64> = xs.iter().map(|s| m.predict(&s.x).prob).collect();
    let labels: Vec<bool> = xs.iter().map(|s| s.label).collect();
    let report = correlation_matrix(&attrs, &soft, &labels).unwrap();
    let cols: Vec<Vec<f64>> = (0..3)
        .map(|q| attrs.values.iter().map(|r| r[q]).collect())
        .chain([soft.clone(), labels.iter().map(|&l| l as u8 as f64).collect()])
        .collect();
    let pearson = |a: &[f64], b: &[f64]| {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    };
    for i in 0..5 {
        for j in 0..5 {
            assert!((report.matrix[i][j] - pearson(&cols[i], &cols[j])).abs() <= 1e-10);
        }
    }
}
