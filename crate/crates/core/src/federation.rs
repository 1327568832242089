//! Server-side orchestration: rounds of local training followed by
//! size-weighted federated averaging, one independent task per slice.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::{mix, LocalDataset, SliceKind, Standardizer};
use crate::error::{Error, Result};
use crate::explain::{attribution_matrix, AttributionMatrix, DEFAULT_IG_STEPS};
use crate::game::{self, ConstraintSpec, EpochRecord, LocalTrainOptions, TrainMode};
use crate::metrics::{self, CorrelationReport};
use crate::nn::{Mlp, Sample, DEFAULT_LAYER_SIZES};
use crate::scalar::Scalar;

pub const ROUND_CSV_HEADER: &str = "round,slice,mode,train_loss,mean_recall,mean_log_odds,feasible_fraction";

impl TrainMode {
    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Constrained => "constrained",
            TrainMode::Vanilla => "vanilla",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "constrained" => Some(TrainMode::Constrained),
            "vanilla" | "vanilla_posthoc" => Some(TrainMode::Vanilla),
            _ => None,
        }
    }
}

/// A client's weights as sent to the server.
#[derive(Clone, Debug)]
pub struct ClientUpdate<S> {
    pub client_id: u32,
    pub weights: Mlp<S>,
    pub size: usize,
}

/// Size-weighted coordinatewise average.
///
/// Updates are sorted by client id and folded as a running mean
/// `μ += (D_k / ΣD)(W_k − μ)`, so the result does not depend on input
/// order and averaging identical weights returns them bit for bit.
pub fn fedavg<S: Scalar>(updates: &[ClientUpdate<S>]) -> Result<Mlp<S>> {
    let first = updates
        .first()
        .ok_or_else(|| Error::Aggregation("no client updates to aggregate".into()))?;
    let mut order: Vec<&ClientUpdate<S>> = updates.iter().collect();
    order.sort_by_key(|u| u.client_id);
    if let Some(u) = order.iter().find(|u| u.size == 0) {
        return Err(Error::Aggregation(format!("client {} reports zero samples", u.client_id)));
    }
    if let Some(u) = order.iter().find(|u| !u.weights.same_shape(&first.weights)) {
        return Err(Error::Aggregation(format!(
            "client {} sent architecture {:?}, expected {:?}",
            u.client_id,
            u.weights.layer_sizes(),
            first.weights.layer_sizes()
        )));
    }
    let mut mean = first.weights.zeros_like();
    let mut seen = 0usize;
    for u in order {
        seen += u.size;
        let frac = S::of_usize(u.size) / S::of_usize(seen);
        for (m, &w) in mean.params_mut().zip(u.weights.params()) {
            *m += frac * (w - *m);
        }
    }
    Ok(mean)
}

/// One base station's data for a slice, already standardized.
#[derive(Clone, Debug)]
pub struct ClientData<S> {
    pub id: u32,
    pub train: Vec<Sample<S>>,
    pub test: Vec<Sample<S>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FederationConfig {
    pub rounds: usize,
    pub mode: TrainMode,
    pub seed: u64,
    pub layer_sizes: Vec<usize>,
    /// Shared local settings; the constraint bounds are overridden per slice.
    pub local: LocalTrainOptions,
    pub specs: Vec<(SliceKind, ConstraintSpec)>,
    pub train_fraction: f64,
    /// IG steps for the per-round log-odds evaluation of the global model.
    pub eval_ig_steps: usize,
    /// IG steps for the final held-out explanation.
    pub explain_ig_steps: usize,
    pub curve_top_p: Vec<f64>,
    /// Total user count; recorded, not simulated.
    pub users: Option<usize>,
}

impl FederationConfig {
    pub fn new(mode: TrainMode, specs: Vec<(SliceKind, ConstraintSpec)>) -> Self {
        let local = LocalTrainOptions::new(specs.first().map(|s| s.1).unwrap_or(ConstraintSpec {
            alpha: 0.9,
            beta: -0.01,
            top_p: 33.0,
        }));
        FederationConfig {
            rounds: 20,
            mode,
            seed: 0,
            layer_sizes: DEFAULT_LAYER_SIZES.to_vec(),
            local,
            specs,
            train_fraction: 0.8,
            eval_ig_steps: game::DEFAULT_TRAIN_IG_STEPS,
            explain_ig_steps: DEFAULT_IG_STEPS,
            curve_top_p: vec![0.0, 33.0, 66.0, 100.0],
            users: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.local.validate()?;
        if self.specs.is_empty() {
            return Err(Error::config("slices", "at least one slice is required"));
        }
        for (_, s) in &self.specs {
            s.validate()?;
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("train_fraction", "must lie in (0, 1)"));
        }
        if self.eval_ig_steps == 0 || self.explain_ig_steps == 0 {
            return Err(Error::config("ig_steps", "must be at least 1"));
        }
        if let Some(p) = self.curve_top_p.iter().find(|p| !(0.0..=100.0).contains(*p)) {
            return Err(Error::config("top_p_curve", format!("{p} outside [0, 100]")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundMetrics {
    pub round: usize,
    pub slice: SliceKind,
    pub mode: TrainMode,
    pub train_loss: f64,
    pub mean_recall: f64,
    pub mean_log_odds: f64,
    pub feasible_fraction: f64,
}

impl RoundMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.round,
            self.slice.name(),
            self.mode.name(),
            self.train_loss,
            self.mean_recall,
            self.mean_log_odds,
            self.feasible_fraction
        )
    }
}

pub fn rounds_csv(rows: &[RoundMetrics]) -> String {
    let mut out = String::from(ROUND_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Evaluate a global model on every client's training split.
fn evaluate_round<S: Scalar>(
    model: &Mlp<S>,
    clients: &[ClientData<S>],
    spec: &ConstraintSpec,
    ig_steps: usize,
) -> Result<(f64, f64, f64, f64)> {
    let per_client = clients
        .par_iter()
        .map(|c| -> Result<(f64, usize, Option<f64>, f64)> {
            let loss = model.batch_loss(&c.train).to_f64_lossy();
            let preds: Vec<bool> = c.train.iter().map(|s| model.predict(&s.x).label()).collect();
            let labels: Vec<bool> = c.train.iter().map(|s| s.label).collect();
            let recall = match metrics::recall::<S>(&preds, &labels) {
                Ok(r) => Some(r.to_f64_lossy()),
                Err(Error::Undefined(_)) => None,
                Err(e) => return Err(e),
            };
            let baseline = vec![S::zero(); model.input_dim()];
            let attrs = attribution_matrix(model, &c.train, &baseline, ig_steps)?;
            let theta = metrics::log_odds(model, &c.train, &attrs, spec.top_p)?.to_f64_lossy();
            Ok((loss, c.train.len(), recall, theta))
        })
        .collect::<Result<Vec<_>>>()?;
    let total: usize = per_client.iter().map(|c| c.1).sum();
    let train_loss = per_client.iter().map(|c| c.0 * c.1 as f64).sum::<f64>() / total as f64;
    let recalls: Vec<f64> = per_client.iter().filter_map(|c| c.2).collect();
    let mean_recall = recalls.iter().sum::<f64>() / recalls.len().max(1) as f64;
    let mean_log_odds = per_client.iter().map(|c| c.3).sum::<f64>() / per_client.len() as f64;
    let feasible = per_client
        .iter()
        .filter(|c| c.2.is_none_or(|r| r >= spec.alpha) && c.3 <= spec.beta)
        .count();
    Ok((train_loss, mean_recall, mean_log_odds, feasible as f64 / per_client.len() as f64))
}

pub fn client_seed(seed: u64, slice: SliceKind, client: u32, round: usize) -> u64 {
    mix(&[seed, slice.id() as u64, client as u64, round as u64])
}

/// Output of one round for one slice.
#[derive(Clone, Debug)]
pub struct RoundOutcome<S> {
    pub global: Mlp<S>,
    pub metrics: RoundMetrics,
    /// Per-client traces in client order.
    pub traces: Vec<Vec<EpochRecord<S>>>,
}

/// Broadcast `global`, train every client, then aggregate. Any client
/// failure aborts the round.
pub fn run_round<S: Scalar>(
    global: &Mlp<S>,
    clients: &[ClientData<S>],
    cfg: &FederationConfig,
    slice: SliceKind,
    spec: &ConstraintSpec,
    round: usize,
) -> Result<RoundOutcome<S>> {
    if clients.is_empty() {
        return Err(Error::Aggregation("round with no clients".into()));
    }
    let mut opts = cfg.local.clone();
    opts.spec = *spec;
    let outcomes = clients
        .par_iter()
        .map(|c| {
            let seed = client_seed(cfg.seed, slice, c.id, round);
            let out = match cfg.mode {
                TrainMode::Constrained => game::local_train(global, &c.train, &opts, seed),
                TrainMode::Vanilla => game::train_vanilla(global, &c.train, &opts, seed),
            };
            out.map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!("round {round}, slice {}, client {}: {m}", slice.name(), c.id)),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let updates: Vec<ClientUpdate<S>> = clients
        .iter()
        .zip(&outcomes)
        .map(|(c, o)| ClientUpdate {
            client_id: c.id,
            weights: o.weights.clone(),
            size: c.train.len(),
        })
        .collect();
    let next = fedavg(&updates)?;
    let (train_loss, mean_recall, mean_log_odds, feasible_fraction) =
        evaluate_round(&next, clients, spec, cfg.eval_ig_steps)?;
    Ok(RoundOutcome {
        global: next,
        metrics: RoundMetrics {
            round,
            slice,
            mode: cfg.mode,
            train_loss,
            mean_recall,
            mean_log_odds,
            feasible_fraction,
        },
        traces: outcomes.into_iter().map(|o| o.trace).collect(),
    })
}

/// After-training report for one slice on the union of client test splits.
#[derive(Clone, Debug)]
pub struct SliceReport<S> {
    pub holdout: Vec<Sample<S>>,
    pub holdout_loss: f64,
    pub holdout_recall: Option<f64>,
    pub attributions: AttributionMatrix<S>,
    pub correlation: CorrelationReport,
    /// `(p, θ(p))` for every requested masking level, ascending in `p`.
    pub log_odds_curve: Vec<(f64, f64)>,
}

pub fn explain_holdout<S: Scalar>(
    model: &Mlp<S>,
    holdout: Vec<Sample<S>>,
    ig_steps: usize,
    top_p: &[f64],
) -> Result<SliceReport<S>> {
    let baseline = vec![S::zero(); model.input_dim()];
    let attributions = attribution_matrix(model, &holdout, &baseline, ig_steps)?;
    let soft: Vec<S> = holdout.iter().map(|s| model.predict(&s.x).prob).collect();
    let labels: Vec<bool> = holdout.iter().map(|s| s.label).collect();
    let correlation = metrics::correlation_matrix(&attributions, &soft, &labels)?;
    let mut levels = top_p.to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("validated levels"));
    let log_odds_curve = levels
        .iter()
        .map(|&p| metrics::log_odds(model, &holdout, &attributions, p).map(|t| (p, t.to_f64_lossy())))
        .collect::<Result<Vec<_>>>()?;
    let preds: Vec<bool> = holdout.iter().map(|s| model.predict(&s.x).label()).collect();
    let holdout_recall = metrics::recall::<S>(&preds, &labels).ok().map(|r| r.to_f64_lossy());
    Ok(SliceReport {
        holdout_loss: model.batch_loss(&holdout).to_f64_lossy(),
        holdout_recall,
        holdout,
        attributions,
        correlation,
        log_odds_curve,
    })
}

#[derive(Clone, Debug)]
pub struct SliceResult<S> {
    pub kind: SliceKind,
    pub spec: ConstraintSpec,
    pub standardizer: Standardizer,
    /// Global model after every round; entry 0 is the initial broadcast.
    pub models: Vec<Mlp<S>>,
    /// `traces[client][round]`.
    pub traces: Vec<Vec<Vec<EpochRecord<S>>>>,
    pub client_ids: Vec<u32>,
    pub report: SliceReport<S>,
}

impl<S: Scalar> SliceResult<S> {
    pub fn final_model(&self) -> &Mlp<S> {
        self.models.last().expect("initial model is always present")
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult<S> {
    pub rounds: Vec<RoundMetrics>,
    pub slices: Vec<SliceResult<S>>,
}

impl<S: Scalar> ExperimentResult<S> {
    pub fn slice(&self, kind: SliceKind) -> Option<&SliceResult<S>> {
        self.slices.iter().find(|s| s.kind == kind)
    }

    pub fn metrics_for(&self, kind: SliceKind) -> impl Iterator<Item = &RoundMetrics> + '_ {
        self.rounds.iter().filter(move |r| r.slice == kind)
    }
}

/// Split, standardize and wrap one slice's local datasets.
pub fn prepare_clients<S: Scalar>(
    datasets: &[LocalDataset],
    train_fraction: f64,
    seed: u64,
) -> Result<(Standardizer, Vec<ClientData<S>>)> {
    if datasets.is_empty() {
        return Err(Error::Input("slice has no client datasets".into()));
    }
    let splits: Vec<(LocalDataset, LocalDataset)> = datasets.iter().map(|d| d.split(train_fraction, seed)).collect();
    if let Some((tr, _)) = splits.iter().find(|(tr, te)| tr.is_empty() || te.is_empty()) {
        return Err(Error::Input(format!(
            "client {} is too small for a train/test split",
            tr.bs_id
        )));
    }
    let standardizer = Standardizer::fit(splits.iter().map(|(tr, _)| tr))?;
    let clients = splits
        .iter()
        .map(|(tr, te)| ClientData {
            id: tr.bs_id,
            train: standardizer.samples(tr),
            test: standardizer.samples(te),
        })
        .collect();
    Ok((standardizer, clients))
}

/// Run every slice for `cfg.rounds` rounds. `datasets[i]` holds the client
/// datasets of `cfg.specs[i].0`.
pub fn run_experiment<S: Scalar>(cfg: &FederationConfig, datasets: &[Vec<LocalDataset>]) -> Result<ExperimentResult<S>> {
    cfg.validate()?;
    if datasets.len() != cfg.specs.len() {
        return Err(Error::Input(format!(
            "{} dataset groups for {} slices",
            datasets.len(),
            cfg.specs.len()
        )));
    }
    let mut rounds = Vec::with_capacity(cfg.rounds * cfg.specs.len());
    let mut slices = Vec::with_capacity(cfg.specs.len());
    for ((kind, spec), group) in cfg.specs.iter().zip(datasets) {
        let (standardizer, clients) = prepare_clients::<S>(group, cfg.train_fraction, cfg.seed)?;
        let mut global = Mlp::<S>::init(&cfg.layer_sizes, mix(&[cfg.seed, kind.id() as u64, 0x1417]))?;
        let mut models = vec![global.clone()];
        let mut traces: Vec<Vec<Vec<EpochRecord<S>>>> = vec![Vec::with_capacity(cfg.rounds); clients.len()];
        for t in 0..cfg.rounds {
            let out = run_round(&global, &clients, cfg, *kind, spec, t)?;
            global = out.global;
            models.push(global.clone());
            rounds.push(out.metrics);
            for (dst, tr) in traces.iter_mut().zip(out.traces) {
                dst.push(tr);
            }
        }
        let holdout: Vec<Sample<S>> = clients.iter().flat_map(|c| c.test.iter().cloned()).collect();
        let report = explain_holdout(&global, holdout, cfg.explain_ig_steps, &cfg.curve_top_p)?;
        slices.push(SliceResult {
            kind: *kind,
            spec: *spec,
            standardizer,
            models,
            client_ids: clients.iter().map(|c| c.id).collect(),
            traces,
            report,
        });
    }
    Ok(ExperimentResult { rounds, slices })
}
