//! Test-only oracles, written independently of the library's code paths.
#![allow(dead_code)]

use xfdl::nn::{Mlp, Sample};

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Straight-line forward pass straight from the layer fields.
pub fn oracle_logit(m: &Mlp<f64>, x: &[f64]) -> f64 {
    let mut a: Vec<f64> = x.to_vec();
    let n = m.layers().len();
    for (l, layer) in m.layers().iter().enumerate() {
        let mut next = vec![0.0; layer.outputs];
        for o in 0..layer.outputs {
            let mut s = layer.bias[o];
            for i in 0..layer.inputs {
                s += layer.weight[o * layer.inputs + i] * a[i];
            }
            next[o] = if l + 1 < n { if s > 0.0 { s } else { 0.0 } } else { s };
        }
        a = next;
    }
    a[0]
}

pub fn oracle_prob(m: &Mlp<f64>, x: &[f64]) -> f64 {
    let p = sigmoid(oracle_logit(m, x));
    p.clamp(1e-7, 1.0 - 1e-7)
}

pub fn oracle_bce(m: &Mlp<f64>, batch: &[Sample<f64>]) -> f64 {
    batch
        .iter()
        .map(|s| {
            let p = oracle_prob(m, &s.x);
            if s.label { -p.ln() } else { -(1.0 - p).ln() }
        })
        .sum::<f64>()
        / batch.len() as f64
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central differences of `f` over every parameter of `m`.
pub fn fd_param_grad(m: &Mlp<f64>, h: f64, f: impl Fn(&Mlp<f64>) -> f64) -> Vec<f64> {
    let n = m.num_params();
    (0..n)
        .map(|k| {
            let mut plus = m.clone();
            let mut minus = m.clone();
            *plus.params_mut().nth(k).unwrap() += h;
            *minus.params_mut().nth(k).unwrap() -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

pub fn fd_input_grad(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|q| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[q] += h;
            minus[q] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Deterministic pseudo-random samples without touching the library RNG paths.
pub fn lcg_samples(n: usize, seed: u64, scale: f64) -> Vec<Sample<f64>> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..3).map(|_| scale * next()).collect();
            let label = next() > 0.0;
            Sample { x, label }
        })
        .collect()
}

/// Standardized samples of one generated base-station dataset.
pub fn standardized(kind: xfdl::SliceKind, bs: u32, size: usize, seed: u64) -> Vec<Sample<f64>> {
    let profile = xfdl::SliceProfile::default_for(kind);
    let d = xfdl::data::generate_local_dataset(&profile, bs, size, 0.5, seed).unwrap();
    let st = xfdl::Standardizer::fit([&d]).unwrap();
    st.samples(&d)
}
