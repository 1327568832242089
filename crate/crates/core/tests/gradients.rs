mod common;

use common::*;
use proptest::prelude::*;
use xfdl::nn::{Mlp, Sample, DEFAULT_LAYER_SIZES};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

#[test]
fn seed42_forward_matches_straight_line_oracle() {
    let m = Mlp::<f64>::init(&DEFAULT_LAYER_SIZES, 42).unwrap();
    let x = [0.5, 0.5, 0.5];
    let p = m.forward(&x).unwrap();
    assert_eq!(p.prob.to_bits(), oracle_prob(&m, &x).to_bits());
    // determinism
    assert_eq!(p.prob.to_bits(), m.forward(&x).unwrap().prob.to_bits());
}

#[test]
fn seed42_batch_weight_gradient_matches_finite_differences() {
    let m = Mlp::<f64>::init(&DEFAULT_LAYER_SIZES, 42).unwrap();
    let batch = lcg_samples(8, 42, 1.5);
    let g: Vec<f64> = m.grad_weights(&batch).unwrap().params().copied().collect();
    let fd = fd_param_grad(&m, H, |w| oracle_bce(w, &batch));
    for (k, (a, n)) in g.iter().zip(&fd).enumerate() {
        assert!(rel_err(*a, *n) <= TOL, "param {k}: analytic {a}, numeric {n}");
    }
}

#[test]
fn small_net_weight_gradient_matches_finite_differences() {
    let m = Mlp::<f64>::init(&[3, 4, 1], 5).unwrap();
    let batch = lcg_samples(6, 9, 2.0);
    let g: Vec<f64> = m.grad_weights(&batch).unwrap().params().copied().collect();
    let fd = fd_param_grad(&m, H, |w| oracle_bce(w, &batch));
    for (a, n) in g.iter().zip(&fd) {
        assert!(rel_err(*a, *n) <= TOL);
    }
}

#[test]
fn seed42_input_gradient_matches_finite_differences() {
    let m = Mlp::<f64>::init(&DEFAULT_LAYER_SIZES, 42).unwrap();
    let x = [1.0, 0.0, -1.0];
    let g = m.grad_input(&x);
    let fd = fd_input_grad(&x, H, |v| sigmoid(oracle_logit(&m, v)));
    for q in 0..3 {
        assert!(rel_err(g[q], fd[q]) <= TOL, "feature {q}: {} vs {}", g[q], fd[q]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn random_nets_pass_gradient_check(seed in any::<u64>(), x in prop::collection::vec(-2.0f64..2.0, 3), label in any::<bool>()) {
        let m = Mlp::<f64>::init(&[3, 4, 1], seed).unwrap();
        let batch = vec![Sample { x: x.clone(), label }, Sample { x: x.iter().map(|v| -0.5 * v).collect(), label: !label }];
        let g: Vec<f64> = m.grad_weights(&batch).unwrap().params().copied().collect();
        let fd = fd_param_grad(&m, H, |w| oracle_bce(w, &batch));
        for (a, n) in g.iter().zip(&fd) {
            prop_assert!(rel_err(*a, *n) <= TOL, "analytic {} numeric {}", a, n);
        }
        let gi = m.grad_input(&x);
        let fdi = fd_input_grad(&x, H, |v| sigmoid(oracle_logit(&m, v)));
        for (a, n) in gi.iter().zip(&fdi) {
            prop_assert!(rel_err(*a, *n) <= TOL);
        }
    }

    #[test]
    fn bce_is_non_negative(seed in any::<u64>(), x in prop::collection::vec(-50.0f64..50.0, 3), label in any::<bool>()) {
        let m = Mlp::<f64>::init(&DEFAULT_LAYER_SIZES, seed).unwrap();
        let p = m.forward(&x).unwrap();
        let loss = xfdl::nn::bce_loss(label, &p);
        prop_assert!(loss >= 0.0);
        prop_assert!(loss <= -(1e-7f64).ln() + 1e-9);
        prop_assert!(p.prob > 0.0 && p.prob < 1.0);
    }
}
