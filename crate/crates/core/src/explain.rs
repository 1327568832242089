//! Integrated-gradients attributions.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{Mlp, Sample};
use crate::scalar::Scalar;

/// Default number of Riemann steps.
pub const DEFAULT_IG_STEPS: usize = 300;

pub const ATTRIBUTION_CSV_HEADER: &str = "row,attr_prb,attr_latency,attr_channel,pred_prob,pred_label,true_label";

/// Quantity being attributed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    /// Pre-clamp sigmoid output.
    Probability,
    Logit,
}

/// Midpoint-rule integrated gradients along the straight path from
/// `baseline` to `x`.
pub fn integrated_gradients<S: Scalar>(model: &Mlp<S>, x: &[S], baseline: &[S], steps: usize) -> Result<Vec<S>> {
    integrated_gradients_for(model, Target::Probability, x, baseline, steps)
}

pub fn integrated_gradients_for<S: Scalar>(
    model: &Mlp<S>,
    target: Target,
    x: &[S],
    baseline: &[S],
    steps: usize,
) -> Result<Vec<S>> {
    if steps == 0 {
        return Err(Error::Input("integrated gradients needs at least one step".into()));
    }
    if x.len() != model.input_dim() || baseline.len() != x.len() {
        return Err(Error::Input(format!(
            "input/baseline lengths {}/{} do not match model input {}",
            x.len(),
            baseline.len(),
            model.input_dim()
        )));
    }
    if x.iter().chain(baseline).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite input or baseline".into()));
    }
    Ok(ig_unchecked(model, target, x, baseline, steps))
}

fn ig_unchecked<S: Scalar>(model: &Mlp<S>, target: Target, x: &[S], baseline: &[S], steps: usize) -> Vec<S> {
    let diff: Vec<S> = x.iter().zip(baseline).map(|(&a, &b)| a - b).collect();
    if diff.iter().all(|d| *d == S::zero()) {
        return vec![S::zero(); x.len()];
    }
    let m = S::of_usize(steps);
    let half = S::of(0.5);
    let mut sum = vec![S::zero(); x.len()];
    let mut point = vec![S::zero(); x.len()];
    for s in 0..steps {
        let alpha = (S::of_usize(s) + half) / m;
        for ((p, &b), &d) in point.iter_mut().zip(baseline).zip(&diff) {
            *p = b + alpha * d;
        }
        let g = match target {
            Target::Probability => model.grad_input(&point),
            Target::Logit => model.grad_input_logit(&point),
        };
        for (acc, gq) in sum.iter_mut().zip(g) {
            *acc += gq;
        }
    }
    sum.iter().zip(&diff).map(|(&g, &d)| d * g / m).collect()
}

/// Per-sample attributions for a batch, row `i` explaining sample `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributionMatrix<S> {
    pub values: Vec<Vec<S>>,
    pub baseline: Vec<S>,
    pub steps: usize,
}

impl<S: Scalar> AttributionMatrix<S> {
    pub fn rows(&self) -> usize {
        self.values.len()
    }

    /// Largest `|Σ_q a_q − (F(x) − F(baseline))|` over rows, `F` the
    /// pre-clamp probability.
    pub fn completeness_error(&self, model: &Mlp<S>, samples: &[Sample<S>]) -> S {
        let f0 = model.predict(&self.baseline).raw;
        self.values
            .iter()
            .zip(samples)
            .map(|(a, s)| {
                let total: S = a.iter().copied().sum();
                (total - (model.predict(&s.x).raw - f0)).abs()
            })
            .fold(S::zero(), S::max)
    }
}

pub fn attribution_matrix<S: Scalar>(
    model: &Mlp<S>,
    samples: &[Sample<S>],
    baseline: &[S],
    steps: usize,
) -> Result<AttributionMatrix<S>> {
    if samples.is_empty() {
        return Err(Error::Input("cannot explain an empty dataset".into()));
    }
    let values = samples
        .par_iter()
        .map(|s| integrated_gradients(model, &s.x, baseline, steps))
        .collect::<Result<Vec<_>>>()?;
    Ok(AttributionMatrix {
        values,
        baseline: baseline.to_vec(),
        steps,
    })
}

/// Attribution dump: one row per sample with the model's prediction and
/// the true label.
pub fn attribution_csv<S: Scalar>(model: &Mlp<S>, samples: &[Sample<S>], attrs: &AttributionMatrix<S>) -> String {
    let mut out = String::from(ATTRIBUTION_CSV_HEADER);
    out.push('\n');
    for (i, (s, a)) in samples.iter().zip(&attrs.values).enumerate() {
        let p = model.predict(&s.x);
        let _ = write!(out, "{i}");
        for v in a {
            let _ = write!(out, ",{}", v.to_f64_lossy());
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            p.prob.to_f64_lossy(),
            u8::from(p.label()),
            u8::from(s.label)
        );
    }
    out
}
