//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Per-slice values are comma
//! lists in the order of `slices`, and a single value is broadcast to every
//! slice. Generator profiles are overridden per slice with keys such as
//! `eMBB.means = 70,20,15`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use xfdl::data::DEFAULT_DROP_THRESHOLD;
use xfdl::explain::DEFAULT_IG_STEPS;
use xfdl::game::{self, ConstraintSpec, LocalTrainOptions, TrainMode};
use xfdl::nn::NUM_FEATURES;
use xfdl::{Error, FederationConfig, Result, SliceKind, SliceProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    /// K=10, D=400, T=20, L=20.
    Desk,
    /// K=50, D=800, T=50, L=100.
    Full,
}

impl Profile {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "desk" => Some(Profile::Desk),
            "full" => Some(Profile::Full),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub clients: u32,
    pub size: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub slices: Vec<SliceKind>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub top_p: Vec<f64>,
    pub profiles: Vec<SliceProfile>,
    pub skew: f64,
    pub tau: f64,
    pub seed: u64,
    pub mode: TrainMode,
    pub lr: f64,
    pub batch_size: usize,
    pub eta_lambda: f64,
    pub r_lambda: f64,
    pub train_ig_steps: usize,
    pub eval_ig_steps: usize,
    pub explain_ig_steps: usize,
    pub probe_size: usize,
    pub train_fraction: f64,
    pub top_p_curve: Vec<f64>,
    pub hidden: Vec<usize>,
    pub users: Option<usize>,
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn with_profile(profile: Profile) -> Self {
        let (clients, size, rounds, local_epochs) = match profile {
            Profile::Desk => (10, 400, 20, 20),
            Profile::Full => (50, 800, 50, 100),
        };
        ExperimentConfig {
            profile,
            clients,
            size,
            rounds,
            local_epochs,
            slices: SliceKind::ALL.to_vec(),
            alpha: vec![0.9, 0.95, 0.95],
            beta: vec![-0.01; 3],
            top_p: vec![33.0; 3],
            profiles: SliceKind::ALL.iter().map(|&k| SliceProfile::default_for(k)).collect(),
            skew: 0.5,
            tau: DEFAULT_DROP_THRESHOLD,
            seed: 0,
            mode: TrainMode::Constrained,
            lr: game::DEFAULT_LEARNING_RATE,
            batch_size: game::DEFAULT_BATCH_SIZE,
            eta_lambda: game::DEFAULT_ETA_LAMBDA,
            r_lambda: game::DEFAULT_RADIUS,
            train_ig_steps: game::DEFAULT_TRAIN_IG_STEPS,
            eval_ig_steps: game::DEFAULT_TRAIN_IG_STEPS,
            explain_ig_steps: DEFAULT_IG_STEPS,
            probe_size: game::DEFAULT_PROBE_SIZE,
            train_fraction: 0.8,
            top_p_curve: vec![0.0, 33.0, 66.0, 100.0],
            hidden: vec![10, 10],
            users: None,
            out: PathBuf::from("out"),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            if let Some((first, _)) = entries.insert(key.clone(), (i + 1, value.trim().to_string())) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("`{key}` already set on line {first}"),
                });
            }
        }

        let profile = match entries.remove("profile") {
            Some((_, v)) => Profile::parse(&v).ok_or_else(|| Error::config("profile", format!("`{v}` is not desk or full")))?,
            None => Profile::Desk,
        };
        let mut cfg = Self::with_profile(profile);

        // Slices first: per-slice lists and profile keys depend on them.
        if let Some((_, v)) = entries.remove("slices") {
            cfg.slices = list(&v, "slices", |s| SliceKind::from_name(s).ok_or_else(|| format!("unknown slice `{s}`")))?;
            cfg.profiles = cfg.slices.iter().map(|&k| SliceProfile::default_for(k)).collect();
            let n = cfg.slices.len();
            cfg.alpha = broadcast(&[0.9], n);
            cfg.beta = broadcast(&[-0.01], n);
            cfg.top_p = broadcast(&[33.0], n);
            for (i, k) in cfg.slices.iter().enumerate() {
                cfg.alpha[i] = if *k == SliceKind::Embb { 0.9 } else { 0.95 };
            }
        }
        let n = cfg.slices.len();

        for (key, (_, value)) in entries {
            let v = value.as_str();
            match key.as_str() {
                "clients" => cfg.clients = scalar(v, &key)?,
                "size" => cfg.size = scalar(v, &key)?,
                "rounds" => cfg.rounds = scalar(v, &key)?,
                "local_epochs" => cfg.local_epochs = scalar(v, &key)?,
                "alpha" => cfg.alpha = per_slice(v, &key, n)?,
                "beta" => cfg.beta = per_slice(v, &key, n)?,
                "top_p" => cfg.top_p = per_slice(v, &key, n)?,
                "skew" => cfg.skew = scalar(v, &key)?,
                "tau" => cfg.tau = scalar(v, &key)?,
                "seed" => cfg.seed = scalar(v, &key)?,
                "mode" => {
                    cfg.mode = TrainMode::parse(v).ok_or_else(|| Error::config("mode", format!("`{v}` is not constrained or vanilla")))?
                }
                "lr" => cfg.lr = scalar(v, &key)?,
                "batch_size" => cfg.batch_size = scalar(v, &key)?,
                "eta_lambda" => cfg.eta_lambda = scalar(v, &key)?,
                "r_lambda" => cfg.r_lambda = scalar(v, &key)?,
                "train_ig_steps" => cfg.train_ig_steps = scalar(v, &key)?,
                "eval_ig_steps" => cfg.eval_ig_steps = scalar(v, &key)?,
                "explain_ig_steps" => cfg.explain_ig_steps = scalar(v, &key)?,
                "probe_size" => cfg.probe_size = scalar(v, &key)?,
                "train_fraction" => cfg.train_fraction = scalar(v, &key)?,
                "top_p_curve" => cfg.top_p_curve = list(v, &key, |s| s.parse::<f64>().map_err(|e| e.to_string()))?,
                "hidden" => cfg.hidden = list(v, &key, |s| s.parse::<usize>().map_err(|e| e.to_string()))?,
                "users" => cfg.users = Some(scalar(v, &key)?),
                "out" => cfg.out = PathBuf::from(v),
                other => cfg.set_profile_key(other, v)?,
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set_profile_key(&mut self, key: &str, v: &str) -> Result<()> {
        let unknown = || Error::config(key, "unknown key");
        let (slice, field) = key.split_once('.').ok_or_else(unknown)?;
        let kind = SliceKind::from_name(slice).ok_or_else(unknown)?;
        let idx = self
            .slices
            .iter()
            .position(|&k| k == kind)
            .ok_or_else(|| Error::config(key, format!("slice {} is not in `slices`", kind.name())))?;
        let p = &mut self.profiles[idx];
        match field {
            "means" => p.feature_means = triple(v, key)?,
            "stds" => p.feature_stds = triple(v, key)?,
            "weights" => p.ground_truth_weights = triple(v, key)?,
            "loadings" => p.factor_loadings = triple(v, key)?,
            "bias" => p.ground_truth_bias = scalar(v, key)?,
            "label_noise" => p.label_noise = scalar(v, key)?,
            _ => return Err(unknown()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::config("clients", "must be at least 1"));
        }
        if self.size < 2 {
            return Err(Error::config("size", "must be at least 2"));
        }
        if self.rounds == 0 {
            return Err(Error::config("rounds", "must be at least 1"));
        }
        if self.slices.is_empty() {
            return Err(Error::config("slices", "at least one slice is required"));
        }
        let mut sorted = self.slices.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.slices.len() {
            return Err(Error::config("slices", "a slice is listed twice"));
        }
        for (field, values) in [("alpha", &self.alpha), ("beta", &self.beta), ("top_p", &self.top_p)] {
            if values.len() != self.slices.len() {
                return Err(Error::config(field, format!("{} values for {} slices", values.len(), self.slices.len())));
            }
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(Error::config("alpha", format!("{a} outside (0, 1]")));
        }
        if let Some(b) = self.beta.iter().find(|b| !b.is_finite()) {
            return Err(Error::config("beta", format!("{b} is not finite")));
        }
        if let Some(p) = self.top_p.iter().find(|p| !(0.0..=100.0).contains(*p)) {
            return Err(Error::config("top_p", format!("{p} outside [0, 100]")));
        }
        if !(0.0..=1.0).contains(&self.skew) {
            return Err(Error::config("skew", "must lie in [0, 1]"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::config("tau", "must lie in (0, 1)"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden", "layer widths must be positive"));
        }
        if self.top_p_curve.is_empty() {
            return Err(Error::config("top_p_curve", "needs at least one level"));
        }
        if self.users == Some(0) {
            return Err(Error::config("users", "must be at least 1"));
        }
        for (k, p) in self.slices.iter().zip(&self.profiles) {
            p.validate().map_err(|e| match e {
                Error::Config { field, message } => Error::config(format!("{}.{field}", k.name()), message),
                other => other,
            })?;
        }
        self.federation().validate()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(NUM_FEATURES).chain(self.hidden.iter().copied()).chain([1]).collect()
    }

    pub fn specs(&self) -> Vec<(SliceKind, ConstraintSpec)> {
        (0..self.slices.len())
            .map(|i| {
                let spec = ConstraintSpec {
                    alpha: self.alpha[i],
                    beta: self.beta[i],
                    top_p: self.top_p[i],
                };
                (self.slices[i], spec)
            })
            .collect()
    }

    pub fn federation(&self) -> FederationConfig {
        let specs = self.specs();
        let mut local = LocalTrainOptions::new(specs[0].1);
        local.epochs = self.local_epochs;
        local.lr = self.lr;
        local.batch_size = self.batch_size;
        local.eta_lambda = self.eta_lambda;
        local.radius = self.r_lambda;
        local.ig_steps = self.train_ig_steps;
        local.probe_size = self.probe_size;
        let mut f = FederationConfig::new(self.mode, specs);
        f.rounds = self.rounds;
        f.seed = self.seed;
        f.layer_sizes = self.layer_sizes();
        f.local = local;
        f.train_fraction = self.train_fraction;
        f.eval_ig_steps = self.eval_ig_steps;
        f.explain_ig_steps = self.explain_ig_steps;
        f.curve_top_p = self.top_p_curve.clone();
        f.users = self.users;
        f
    }
}

fn scalar<T: std::str::FromStr>(v: &str, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}")))
}

fn list<T>(v: &str, key: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| f(s.trim()).map_err(|e| Error::config(key, format!("cannot parse `{}`: {e}", s.trim()))))
        .collect()
}

fn broadcast(v: &[f64], n: usize) -> Vec<f64> {
    if v.len() == 1 {
        vec![v[0]; n]
    } else {
        v.to_vec()
    }
}

fn per_slice(v: &str, key: &str, n: usize) -> Result<Vec<f64>> {
    let values = broadcast(&list(v, key, |s| s.parse::<f64>().map_err(|e| e.to_string()))?, n);
    if values.len() != n {
        return Err(Error::config(key, format!("{} values for {n} slices", values.len())));
    }
    Ok(values)
}

fn triple(v: &str, key: &str) -> Result<[f64; NUM_FEATURES]> {
    let values = list(v, key, |s| s.parse::<f64>().map_err(|e| e.to_string()))?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| Error::config(key, format!("expected {NUM_FEATURES} values, got {}", v.len())))
}
