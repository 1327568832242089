//! Synthetic per-(base station, slice) datasets.
//!
//! Each slice has a [`SliceProfile`] describing the raw feature distribution
//! and a planted logistic ground truth for the drop probability. Base
//! stations shift the feature means by a deterministic offset, which is what
//! makes the local datasets non-IID.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::{Sample, NUM_FEATURES};
use crate::scalar::{sigmoid, Scalar};

pub const DEFAULT_DROP_THRESHOLD: f64 = 0.5;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = ["avg_prb", "latency_ms", "channel_quality"];

pub const CSV_HEADER: &str = "bs_id,slice_id,avg_prb,latency_ms,channel_quality,drop_prob,label";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SliceKind {
    Embb,
    Urllc,
    Mmtc,
}

impl SliceKind {
    pub const ALL: [SliceKind; 3] = [SliceKind::Embb, SliceKind::Urllc, SliceKind::Mmtc];

    pub fn name(self) -> &'static str {
        match self {
            SliceKind::Embb => "eMBB",
            SliceKind::Urllc => "uRLLC",
            SliceKind::Mmtc => "mMTC",
        }
    }

    /// 1-based slice id as written in dataset files.
    pub fn id(self) -> u32 {
        self as u32 + 1
    }

    pub fn from_id(id: u32) -> Option<Self> {
        Self::ALL.get((id as usize).checked_sub(1)?).copied()
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(name))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceProfile {
    pub kind: SliceKind,
    pub feature_means: [f64; NUM_FEATURES],
    pub feature_stds: [f64; NUM_FEATURES],
    pub ground_truth_weights: [f64; NUM_FEATURES],
    pub ground_truth_bias: f64,
    pub label_noise: f64,
    /// Loadings of each standardized feature on a shared radio-condition
    /// factor; `z_q = l_q·f + sqrt(1 − l_q²)·e_q`. Zero gives independent
    /// features.
    pub factor_loadings: [f64; NUM_FEATURES],
}

impl SliceProfile {
    /// Shipped profiles. eMBB is PRB-heavy, uRLLC runs at low latency,
    /// mMTC sees many devices at poor SNR. Channel quality carries the
    /// largest ground-truth weight in every slice.
    pub fn default_for(kind: SliceKind) -> Self {
        let (means, stds, weights) = match kind {
            SliceKind::Embb => ([70.0, 20.0, 15.0], [12.0, 5.0, 5.0], [1.0, 0.8, -2.5]),
            SliceKind::Urllc => ([40.0, 5.0, 18.0], [10.0, 1.5, 4.0], [0.7, 1.2, -2.5]),
            SliceKind::Mmtc => ([30.0, 40.0, 6.0], [8.0, 10.0, 3.0], [0.8, 0.5, -2.5]),
        };
        SliceProfile {
            kind,
            feature_means: means,
            feature_stds: stds,
            ground_truth_weights: weights,
            ground_truth_bias: 0.0,
            label_noise: 0.02,
            // poor radio conditions: more PRBs, longer latency, lower SNR
            factor_loadings: [0.6, 0.6, -0.7],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_stds.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::config("feature_stds", "every standard deviation must be positive"));
        }
        if self.feature_means.iter().chain(&self.ground_truth_weights).any(|v| !v.is_finite())
            || !self.ground_truth_bias.is_finite()
        {
            return Err(Error::config("profile", "means and ground truth must be finite"));
        }
        if self.factor_loadings.iter().any(|l| !(l.abs() < 1.0)) {
            return Err(Error::config("factor_loadings", "every loading must lie in (-1, 1)"));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::config("label_noise", "must lie in [0, 0.5)"));
        }
        Ok(())
    }

    /// True when the channel-quality weight strictly dominates the others.
    pub fn channel_dominant(&self) -> bool {
        let w = self.ground_truth_weights.map(f64::abs);
        w[2] > w[0] && w[2] > w[1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub features: [f64; NUM_FEATURES],
    pub drop_prob: f64,
    pub label: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalDataset {
    pub bs_id: u32,
    pub slice_id: u32,
    pub rows: Vec<Row>,
}

impl LocalDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positive_fraction(&self) -> f64 {
        self.rows.iter().filter(|r| r.label).count() as f64 / self.rows.len().max(1) as f64
    }

    /// Deterministic holdout split: a seeded shuffle, then the first
    /// `train_fraction` of rows go to the training part.
    pub fn split(&self, train_fraction: f64, seed: u64) -> (LocalDataset, LocalDataset) {
        let mut idx: Vec<usize> = (0..self.rows.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, self.bs_id as u64, self.slice_id as u64, 0x5117]));
        idx.shuffle(&mut rng);
        let cut = ((self.rows.len() as f64) * train_fraction).round() as usize;
        let pick = |ids: &[usize]| LocalDataset {
            bs_id: self.bs_id,
            slice_id: self.slice_id,
            rows: ids.iter().map(|&i| self.rows[i].clone()).collect(),
        };
        (pick(&idx[..cut]), pick(&idx[cut..]))
    }
}

/// SplitMix64 finalizer folded over the words.
pub(crate) fn mix(words: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &w in words {
        h ^= w.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Per-base-station mean shift in units of the feature standard deviation,
/// each coordinate in `[-1, 1]`.
///
/// Coordinate `q` walks an additive golden-ratio style sequence with a
/// seed-derived phase, so consecutive station ids always land at least
/// ~0.5 apart.
pub fn bs_offset(bs_id: u32, seed: u64) -> [f64; NUM_FEATURES] {
    const STEPS: [f64; NUM_FEATURES] = [
        0.618_033_988_749_894_9, // golden ratio conjugate
        0.414_213_562_373_095_1, // sqrt(2) - 1
        0.732_050_807_568_877_2, // sqrt(3) - 1
    ];
    let mut out = [0.0; NUM_FEATURES];
    for (q, o) in out.iter_mut().enumerate() {
        let phase = unit_interval(mix(&[seed, q as u64, 0xB5]));
        let t = (phase + bs_id as f64 * STEPS[q]).fract();
        *o = 2.0 * t - 1.0;
    }
    out
}

pub fn threshold_labels(drop_probs: &[f64], tau: f64) -> Result<Vec<bool>> {
    check_tau(tau)?;
    Ok(drop_probs.iter().map(|&p| p >= tau).collect())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::config("tau", format!("threshold {tau} outside (0, 1)")));
    }
    Ok(())
}

pub fn generate_local_dataset(
    profile: &SliceProfile,
    bs_id: u32,
    size: usize,
    skew: f64,
    seed: u64,
) -> Result<LocalDataset> {
    generate_with_threshold(profile, bs_id, size, skew, seed, DEFAULT_DROP_THRESHOLD)
}

pub fn generate_with_threshold(
    profile: &SliceProfile,
    bs_id: u32,
    size: usize,
    skew: f64,
    seed: u64,
    tau: f64,
) -> Result<LocalDataset> {
    profile.validate()?;
    check_tau(tau)?;
    if size == 0 {
        return Err(Error::config("size", "dataset size must be at least 1"));
    }
    if !(0.0..=1.0).contains(&skew) {
        return Err(Error::config("skew", "must lie in [0, 1]"));
    }
    let offset = bs_offset(bs_id, seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let idio: [f64; NUM_FEATURES] = profile.factor_loadings.map(|l| (1.0 - l * l).sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, bs_id as u64, profile.kind.id() as u64]));
    let mut rows = Vec::with_capacity(size);
    for _ in 0..size {
        let shared = std_normal.sample(&mut rng);
        let mut features = [0.0; NUM_FEATURES];
        let mut score = profile.ground_truth_bias;
        for q in 0..NUM_FEATURES {
            let unit = profile.factor_loadings[q] * shared + idio[q] * std_normal.sample(&mut rng);
            let mean = profile.feature_means[q] + skew * offset[q] * profile.feature_stds[q];
            features[q] = mean + profile.feature_stds[q] * unit;
            let z = (features[q] - profile.feature_means[q]) / profile.feature_stds[q];
            score += profile.ground_truth_weights[q] * z;
        }
        let mut drop_prob = sigmoid(score);
        if rng.gen::<f64>() < profile.label_noise {
            drop_prob = 1.0 - drop_prob;
        }
        rows.push(Row {
            features,
            drop_prob,
            label: drop_prob >= tau,
        });
    }
    Ok(LocalDataset {
        bs_id,
        slice_id: profile.kind.id(),
        rows,
    })
}

/// Datasets for base stations `1..=clients` of one slice.
pub fn generate_slice(
    profile: &SliceProfile,
    clients: u32,
    size: usize,
    skew: f64,
    seed: u64,
    tau: f64,
) -> Result<Vec<LocalDataset>> {
    if clients == 0 {
        return Err(Error::config("clients", "need at least one base station"));
    }
    (1..=clients)
        .map(|bs| generate_with_threshold(profile, bs, size, skew, seed, tau))
        .collect()
}

pub fn to_csv(d: &LocalDataset) -> String {
    let mut out = String::with_capacity(64 * (d.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &d.rows {
        let _ = writeln!(
            out,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            d.bs_id,
            d.slice_id,
            r.features[0],
            r.features[1],
            r.features[2],
            r.drop_prob,
            u8::from(r.label)
        );
    }
    out
}

pub fn parse_csv(text: &str) -> Result<LocalDataset> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut ids: Option<(u32, u32)> = None;
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(err(format!("expected 7 columns, found {}", cols.len())));
        }
        let int = |c: &str, name: &str| c.trim().parse::<u32>().map_err(|_| err(format!("`{c}` is not a valid {name}")));
        let num = |c: &str, name: &str| {
            c.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("`{c}` is not a finite number for {name}")))
        };
        let bs = int(cols[0], "bs_id")?;
        let slice = int(cols[1], "slice_id")?;
        match ids {
            None => ids = Some((bs, slice)),
            Some(prev) if prev != (bs, slice) => {
                return Err(err("rows from different (bs_id, slice_id) pairs in one file".into()))
            }
            _ => {}
        }
        let features = [
            num(cols[2], "avg_prb")?,
            num(cols[3], "latency_ms")?,
            num(cols[4], "channel_quality")?,
        ];
        let drop_prob = num(cols[5], "drop_prob")?;
        if !(0.0..=1.0).contains(&drop_prob) {
            return Err(err(format!("drop_prob {drop_prob} outside [0, 1]")));
        }
        let label = match cols[6].trim() {
            "0" => false,
            "1" => true,
            other => return Err(err(format!("label `{other}` is not 0 or 1"))),
        };
        rows.push(Row { features, drop_prob, label });
    }
    let (bs_id, slice_id) = ids.ok_or_else(|| Error::Input("dataset file contains no rows".into()))?;
    Ok(LocalDataset { bs_id, slice_id, rows })
}

pub fn save_csv(d: &LocalDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_csv(d)).map_err(|e| Error::io(path, e))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<LocalDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

/// Per-feature z-scoring. Zero in standardized space is the attribution
/// baseline and the masking value.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: [f64; NUM_FEATURES],
    pub std: [f64; NUM_FEATURES],
}

impl Standardizer {
    pub fn identity() -> Self {
        Standardizer {
            mean: [0.0; NUM_FEATURES],
            std: [1.0; NUM_FEATURES],
        }
    }

    pub fn fit<'a>(datasets: impl IntoIterator<Item = &'a LocalDataset>) -> Result<Self> {
        let rows: Vec<&Row> = datasets.into_iter().flat_map(|d| d.rows.iter()).collect();
        if rows.len() < 2 {
            return Err(Error::Input("need at least two rows to fit a standardizer".into()));
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; NUM_FEATURES];
        let mut std = [0.0; NUM_FEATURES];
        for q in 0..NUM_FEATURES {
            mean[q] = rows.iter().map(|r| r.features[q]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r.features[q] - mean[q]).powi(2)).sum::<f64>() / n;
            std[q] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Ok(Standardizer { mean, std })
    }

    pub fn apply<S: Scalar>(&self, features: &[f64; NUM_FEATURES]) -> Vec<S> {
        (0..NUM_FEATURES)
            .map(|q| S::of((features[q] - self.mean[q]) / self.std[q]))
            .collect()
    }

    pub fn samples<S: Scalar>(&self, d: &LocalDataset) -> Vec<Sample<S>> {
        d.rows
            .iter()
            .map(|r| Sample {
                x: self.apply(&r.features),
                label: r.label,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,mean,std\n");
        for q in 0..NUM_FEATURES {
            let _ = writeln!(out, "{},{:.16e},{:.16e}", FEATURE_NAMES[q], self.mean[q], self.std[q]);
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut s = Standardizer::identity();
        let mut seen = 0;
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let err = |m: &str| Error::Parse { line: i + 1, message: m.to_string() };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(err("expected feature,mean,std"));
            }
            let q = FEATURE_NAMES
                .iter()
                .position(|n| *n == cols[0].trim())
                .ok_or_else(|| err("unknown feature name"))?;
            s.mean[q] = cols[1].trim().parse().map_err(|_| err("bad mean"))?;
            s.std[q] = cols[2].trim().parse().map_err(|_| err("bad std"))?;
            if !(s.std[q] > 0.0) {
                return Err(err("std must be positive"));
            }
            seen += 1;
        }
        if seen != NUM_FEATURES {
            return Err(Error::Input(format!("standardizer file lists {seen} features, expected {NUM_FEATURES}")));
        }
        Ok(s)
    }
}
