mod common;

use common::*;
use xfdl::explain::{attribution_matrix, integrated_gradients};
use xfdl::nn::{Mlp, Sample, DEFAULT_LAYER_SIZES};

fn completeness_error(m: &Mlp<f64>, x: &[f64], steps: usize) -> f64 {
    let a = integrated_gradients(m, x, &[0.0; 3], steps).unwrap();
    let delta = sigmoid(oracle_logit(m, x)) - sigmoid(oracle_logit(m, &[0.0; 3]));
    (a.iter().sum::<f64>() - delta).abs()
}

#[test]
fn seed42_rows_are_complete_at_300_steps() {
    let m = Mlp::<f64>::init(&DEFAULT_LAYER_SIZES, 42).unwrap();
    let xs = lcg_samples(8, 1, 2.0);
    let am = attribution_matrix(&m, &xs, &[0.0; 3], 300).unwrap();
    assert_eq!(am.rows(), 8);
    for (row, s) in am.values.iter().zip(&xs) {
        let delta = sigmoid(oracle_logit(&m, &s.x)) - sigmoid(oracle_logit(&m, &[0.0; 3]));
        assert!((row.iter().sum::<f64>() - delta).abs() <= 1e-3);
    }
    assert!(am.completeness_error(&m, &xs) <= 1e-3);
}

#[test]
fn riemann_error_shrinks_with_steps() {
    for probe in 0..20u64 {
        let m = Mlp::<f64>::init(&DEFAULT_LAYER_SIZES, 100 + probe).unwrap();
        let x = &lcg_samples(1, probe, 2.5)[0].x;
        let coarse = completeness_error(&m, x, 64);
        let fine = completeness_error(&m, x, 1024);
        assert!(fine <= coarse + 1e-12, "probe {probe}: {fine} > {coarse}");
        let mut prev = completeness_error(&m, x, 16);
        for steps in [32, 64, 128, 256, 512] {
            let e = completeness_error(&m, x, steps);
            assert!(e <= 2.0 * prev + 1e-12, "probe {probe} at {steps}: {e} vs {prev}");
            prev = e;
        }
    }
}

#[test]
fn duplicated_rows_explain_identically() {
    let m = Mlp::<f64>::init(&DEFAULT_LAYER_SIZES, 3).unwrap();
    let s = Sample { x: vec![1.2, -0.4, 0.7], label: true };
    let am = attribution_matrix(&m, &[s.clone(), s.clone(), s], &[0.0; 3], 50).unwrap();
    assert!(am.values.windows(2).all(|w| w[0] == w[1]));
}
