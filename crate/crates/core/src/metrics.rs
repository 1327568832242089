//! Log-odds and recall mappers, plus the attribution correlation report.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::explain::AttributionMatrix;
use crate::nn::{Mlp, Sample};
use crate::scalar::Scalar;

/// Scores fed back to the constrained learner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintScores<S> {
    pub recall: S,
    pub log_odds: S,
    pub top_p: S,
}

/// Number of coordinates masked at level `p` percent of `q` features.
pub fn mask_count(p: f64, q: usize) -> Result<usize> {
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::Input(format!("top-p {p} outside [0, 100]")));
    }
    let c = (p / 100.0 * q as f64).ceil() as usize;
    Ok(c.min(q))
}

/// Indices of the `c` largest `|a_q|`, ties going to the lower index.
pub fn top_indices<S: Scalar>(a: &[S], c: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..a.len()).collect();
    // stable sort keeps lower indices first among equal magnitudes
    order.sort_by(|&i, &j| a[j].abs().partial_cmp(&a[i].abs()).unwrap_or(std::cmp::Ordering::Equal));
    order.truncate(c);
    order
}

/// Zero-padding of the top-`p`% attributed coordinates.
pub fn top_p_mask<S: Scalar>(x: &[S], a: &[S], p: f64) -> Result<Vec<S>> {
    if x.len() != a.len() {
        return Err(Error::Input(format!(
            "feature vector has {} entries but attribution has {}",
            x.len(),
            a.len()
        )));
    }
    let c = mask_count(p, x.len())?;
    let mut out = x.to_vec();
    for i in top_indices(a, c) {
        out[i] = S::zero();
    }
    Ok(out)
}

/// Mean over samples of `log Pr(ŷ | x̂) − log Pr(ŷ | x)`, with `ŷ` the class
/// predicted on the unmasked input and `x̂` its top-`p`% masked version.
/// Negative values mean masking the top features hurts the prediction.
pub fn log_odds<S: Scalar>(model: &Mlp<S>, samples: &[Sample<S>], attrs: &AttributionMatrix<S>, p: f64) -> Result<S> {
    if samples.is_empty() {
        return Err(Error::Input("log-odds of an empty set".into()));
    }
    if attrs.rows() != samples.len() {
        return Err(Error::Input(format!(
            "{} attribution rows for {} samples",
            attrs.rows(),
            samples.len()
        )));
    }
    let c = mask_count(p, model.input_dim())?;
    let mut total = S::zero();
    for (s, a) in samples.iter().zip(&attrs.values) {
        if c == 0 {
            continue;
        }
        let before = model.predict(&s.x);
        let class = before.label();
        let mut masked = s.x.clone();
        for i in top_indices(a, c) {
            masked[i] = S::zero();
        }
        let after = model.predict(&masked);
        total += (after.class_prob(class) / before.class_prob(class)).ln();
    }
    Ok(total / S::of_usize(samples.len()))
}

/// `TP / (TP + FN)`.
pub fn recall<S: Scalar>(preds: &[bool], labels: &[bool]) -> Result<S> {
    if preds.len() != labels.len() {
        return Err(Error::Input("prediction and label lengths differ".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::Undefined("recall with no positive labels".into()));
    }
    let tp = preds.iter().zip(labels).filter(|(&p, &l)| p && l).count();
    Ok(S::of_usize(tp) / S::of_usize(positives))
}

/// `Σ y·min(ŷ, 1) / Σ y − α`.
pub fn recall_surrogate<S: Scalar>(soft_preds: &[S], labels: &[bool], alpha: S) -> Result<S> {
    if soft_preds.len() != labels.len() {
        return Err(Error::Input("prediction and label lengths differ".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::Undefined("recall surrogate with no positive labels".into()));
    }
    let hit: S = soft_preds
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(&p, _)| p.min(S::one()))
        .sum();
    Ok(hit / S::of_usize(positives) - alpha)
}

pub const CORRELATION_COLUMNS: [&str; 5] = ["attr_prb", "attr_latency", "attr_channel", "pred", "true"];

/// Pearson correlations of the columns of `[attributions | prediction | label]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    pub matrix: Vec<Vec<f64>>,
    pub column_names: Vec<String>,
    /// Columns with zero variance; their off-diagonal entries are 0.
    pub degenerate: Vec<usize>,
}

impl CorrelationReport {
    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let i = self.column_names.iter().position(|c| c == row)?;
        let j = self.column_names.iter().position(|c| c == col)?;
        Some(self.matrix[i][j])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("column");
        for c in &self.column_names {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
        for (name, row) in self.column_names.iter().zip(&self.matrix) {
            out.push_str(name);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn correlation_matrix<S: Scalar>(
    attrs: &AttributionMatrix<S>,
    soft_preds: &[S],
    labels: &[bool],
) -> Result<CorrelationReport> {
    let n = attrs.rows();
    if n < 2 {
        return Err(Error::Input("correlation needs at least two rows".into()));
    }
    if soft_preds.len() != n || labels.len() != n {
        return Err(Error::Input("attribution, prediction and label lengths differ".into()));
    }
    let q = attrs.values[0].len();
    let mut columns: Vec<Vec<f64>> = (0..q)
        .map(|j| attrs.values.iter().map(|r| r[j].to_f64_lossy()).collect())
        .collect();
    columns.push(soft_preds.iter().map(|p| p.to_f64_lossy()).collect());
    columns.push(labels.iter().map(|&l| f64::from(u8::from(l))).collect());

    let centered: Vec<(Vec<f64>, f64)> = columns
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n as f64;
            let dev: Vec<f64> = c.iter().map(|v| v - mean).collect();
            let norm = dev.iter().map(|d| d * d).sum::<f64>().sqrt();
            (dev, norm)
        })
        .collect();
    let degenerate: Vec<usize> = centered
        .iter()
        .enumerate()
        .filter(|(_, (_, norm))| *norm == 0.0)
        .map(|(i, _)| i)
        .collect();
    let k = columns.len();
    let mut matrix = vec![vec![0.0; k]; k];
    for i in 0..k {
        matrix[i][i] = 1.0;
        for j in i + 1..k {
            let (di, ni) = &centered[i];
            let (dj, nj) = &centered[j];
            let r = if *ni == 0.0 || *nj == 0.0 {
                0.0
            } else {
                let dot: f64 = di.iter().zip(dj).map(|(a, b)| a * b).sum();
                (dot / (ni * nj)).clamp(-1.0, 1.0)
            };
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    let mut column_names: Vec<String> = if q == CORRELATION_COLUMNS.len() - 2 {
        CORRELATION_COLUMNS[..q].iter().map(|s| s.to_string()).collect()
    } else {
        (0..q).map(|j| format!("attr_{j}")).collect()
    };
    column_names.push("pred".into());
    column_names.push("true".into());
    Ok(CorrelationReport { matrix, column_names, degenerate })
}
