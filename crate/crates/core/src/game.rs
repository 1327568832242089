//! Constrained local training as a two-player game.
//!
//! The weight player descends a Lagrangian built from smooth surrogates of
//! the recall and log-odds constraints. The multiplier player keeps a
//! column-stochastic matrix `A` whose stationary vector supplies the
//! multipliers, and updates it by exponentiated gradient ascent using the
//! original (non-smooth) constraint values.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::explain::attribution_matrix;
use crate::metrics::{self, mask_count, top_indices, ConstraintScores};
use crate::nn::{Mlp, Sample};
use crate::scalar::Scalar;

pub const NUM_CONSTRAINTS: usize = 2;
pub const DEFAULT_RADIUS: f64 = 1e-5;
pub const DEFAULT_ETA_LAMBDA: f64 = 0.02;
pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_PROBE_SIZE: usize = 64;
pub const DEFAULT_TRAIN_IG_STEPS: usize = 32;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 1000;

pub const TRACE_CSV_HEADER: &str = "epoch,loss,recall,log_odds,g1,g2,lambda0,lambda1,lambda2";
pub const VANILLA_TRACE_CSV_HEADER: &str = "epoch,loss";

/// Per-slice service bounds: recall must reach `alpha`, log-odds must stay
/// at or below `beta` when the top `top_p` percent of features are masked.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintSpec {
    pub alpha: f64,
    pub beta: f64,
    pub top_p: f64,
}

impl ConstraintSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("alpha", format!("{} outside (0, 1]", self.alpha)));
        }
        if !self.beta.is_finite() {
            return Err(Error::config("beta", "must be finite"));
        }
        if !(0.0..=100.0).contains(&self.top_p) {
            return Err(Error::config("top_p", format!("{} outside [0, 100]", self.top_p)));
        }
        Ok(())
    }
}

/// Original constraints in `≤ 0 is feasible` form: `(α − ρ, θ − β)`.
pub fn constraint_violations<S: Scalar>(scores: &ConstraintScores<S>, spec: &ConstraintSpec) -> [S; NUM_CONSTRAINTS] {
    [S::of(spec.alpha) - scores.recall, scores.log_odds - S::of(spec.beta)]
}

/// Surrogate constraints seen by the weight player. The recall surrogate
/// replaces hard hits by soft probabilities; the log-odds constraint is
/// already smooth and is used as is.
pub fn surrogate_violations<S: Scalar>(
    soft_preds: &[S],
    labels: &[bool],
    log_odds: S,
    spec: &ConstraintSpec,
) -> Result<[S; NUM_CONSTRAINTS]> {
    let psi1 = -metrics::recall_surrogate(soft_preds, labels, S::of(spec.alpha))?;
    Ok([psi1, log_odds - S::of(spec.beta)])
}

/// `λ₀·loss + R·Σ λ_m ψ_m`.
pub fn lagrangian_w<S: Scalar>(loss: S, psi: &[S], lambda: &[S], radius: S) -> S {
    debug_assert_eq!(psi.len() + 1, lambda.len());
    let penalty: S = psi.iter().zip(&lambda[1..]).map(|(&p, &l)| l * p).sum();
    lambda[0] * loss + radius * penalty
}

/// Gradient of the multiplier player's payoff: `(loss, R·g₁, …, R·g_M)`.
pub fn lagrangian_lambda_grad<S: Scalar>(loss: S, g: &[S], radius: S) -> Vec<S> {
    std::iter::once(loss).chain(g.iter().map(|&v| radius * v)).collect()
}

/// Square column-stochastic matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix<S> {
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> StochasticMatrix<S> {
    pub fn uniform(dim: usize) -> Self {
        let v = S::one() / S::of_usize(dim);
        StochasticMatrix { dim, data: vec![v; dim * dim] }
    }

    /// Wrap row-major data; columns must sum to one.
    pub fn from_rows(dim: usize, data: Vec<S>) -> Result<Self> {
        let m = StochasticMatrix { dim, data };
        if m.data.len() != dim * dim {
            return Err(Error::Input(format!("{} entries for a {dim}x{dim} matrix", m.data.len())));
        }
        if m.data.iter().any(|v| !(v.is_finite() && *v >= S::zero())) {
            return Err(Error::Input("matrix entries must be finite and non-negative".into()));
        }
        let tol = S::of(1e-9).max(S::epsilon() * S::of(64.0));
        if (0..dim).any(|j| (m.column_sum(j) - S::one()).abs() > tol) {
            return Err(Error::Input("matrix is not column-stochastic".into()));
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> S {
        self.data[row * self.dim + col]
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn column_sum(&self, col: usize) -> S {
        (0..self.dim).map(|i| self.get(i, col)).sum()
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        self.data
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

/// ℓ1-normalized stationary vector of `A` by power iteration from the
/// uniform vector.
pub fn top_eigenvector<S: Scalar>(a: &StochasticMatrix<S>) -> Result<Vec<S>> {
    let n = a.dim();
    let tol = S::of(POWER_TOL).max(S::epsilon() * S::of(16.0));
    let mut v = vec![S::one() / S::of_usize(n); n];
    for _ in 0..POWER_MAX_ITERS {
        let mut next = a.mul_vec(&v);
        let norm: S = next.iter().map(|x| x.abs()).sum();
        if !(norm > S::zero() && norm.is_finite()) {
            break;
        }
        for x in next.iter_mut() {
            *x = x.max(S::zero()) / norm;
        }
        let resid = a
            .mul_vec(&next)
            .iter()
            .zip(&next)
            .fold(S::zero(), |m, (&av, &x)| m.max((av - x).abs()));
        v = next;
        if resid <= tol {
            return Ok(v);
        }
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge for A = {:?}",
        a.data().iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>()
    )))
}

/// `Ã = A ⊙ exp(η Δ λᵀ)`, then every column rescaled to sum to one. The
/// largest exponent of each column is subtracted before exponentiating.
pub fn exp_gradient_update<S: Scalar>(
    a: &StochasticMatrix<S>,
    delta: &[S],
    lambda: &[S],
    eta: S,
) -> Result<StochasticMatrix<S>> {
    let n = a.dim();
    if delta.len() != n || lambda.len() != n {
        return Err(Error::Input(format!(
            "update vectors of length {}/{} for a {n}x{n} matrix",
            delta.len(),
            lambda.len()
        )));
    }
    if !(eta > S::zero()) {
        return Err(Error::Input("eta must be positive".into()));
    }
    let mut data = a.data.clone();
    for j in 0..n {
        let shift = (0..n).map(|i| eta * delta[i] * lambda[j]).fold(S::neg_infinity(), S::max);
        if !shift.is_finite() {
            return Err(Error::Numeric("non-finite exponent in multiplier update".into()));
        }
        let mut col_sum = S::zero();
        for i in 0..n {
            let v = &mut data[i * n + j];
            *v *= (eta * delta[i] * lambda[j] - shift).exp();
            col_sum += *v;
        }
        if !(col_sum > S::zero()) {
            return Err(Error::Numeric(format!("column {j} of the multiplier matrix vanished")));
        }
        for i in 0..n {
            data[i * n + j] /= col_sum;
        }
    }
    Ok(StochasticMatrix { dim: n, data })
}

/// Multiplier player's state for one client.
#[derive(Clone, Debug)]
pub struct GameState<S> {
    pub matrix: StochasticMatrix<S>,
    pub lambda: Vec<S>,
    pub weight_sum: Mlp<S>,
    pub iter: usize,
    pub num_constraints: usize,
}

impl<S: Scalar> GameState<S> {
    pub fn new(num_constraints: usize, like: &Mlp<S>) -> Self {
        let dim = num_constraints + 1;
        GameState {
            matrix: StochasticMatrix::uniform(dim),
            lambda: vec![S::one() / S::of_usize(dim); dim],
            weight_sum: like.zeros_like(),
            iter: 0,
            num_constraints,
        }
    }

    /// Mean of the accumulated iterates.
    pub fn average(&self) -> Mlp<S> {
        let mut avg = self.weight_sum.clone();
        avg.scale(S::one() / S::of_usize(self.iter.max(1)));
        avg
    }
}

/// A tester batch with the predicted classes and masks frozen at the
/// weights that produced its attributions. Evaluating it at other weights
/// gives the log-odds with the masking held fixed.
#[derive(Clone, Debug)]
pub struct LogOddsProbe<S> {
    pub samples: Vec<Sample<S>>,
    pub masked: Vec<Vec<S>>,
    pub classes: Vec<bool>,
}

impl<S: Scalar> LogOddsProbe<S> {
    pub fn build(model: &Mlp<S>, samples: Vec<Sample<S>>, top_p: f64, ig_steps: usize) -> Result<Self> {
        let baseline = vec![S::zero(); model.input_dim()];
        let attrs = attribution_matrix(model, &samples, &baseline, ig_steps)?;
        let c = mask_count(top_p, model.input_dim())?;
        let masked = samples
            .iter()
            .zip(&attrs.values)
            .map(|(s, a)| {
                let mut x = s.x.clone();
                for i in top_indices(a, c) {
                    x[i] = S::zero();
                }
                x
            })
            .collect();
        let classes = samples.iter().map(|s| model.predict(&s.x).label()).collect();
        Ok(LogOddsProbe { samples, masked, classes })
    }

    pub fn log_odds(&self, model: &Mlp<S>) -> S {
        let total: S = self
            .samples
            .iter()
            .zip(&self.masked)
            .zip(&self.classes)
            .map(|((s, xm), &c)| (model.predict(xm).class_prob(c) / model.predict(&s.x).class_prob(c)).ln())
            .sum();
        total / S::of_usize(self.samples.len().max(1))
    }

    /// Gradient of [`Self::log_odds`] with respect to the weights.
    pub fn log_odds_grad(&self, model: &Mlp<S>) -> Mlp<S> {
        let mut grad = model.zeros_like();
        // d/dz log σ(z) = 1 − σ, d/dz log(1 − σ(z)) = −σ
        let dlog = |c: bool, p: S| if c { S::one() - p } else { -p };
        for ((s, xm), &c) in self.samples.iter().zip(&self.masked).zip(&self.classes) {
            model.accumulate_logit_grad(xm, |p| dlog(c, p.raw), &mut grad);
            model.accumulate_logit_grad(&s.x, |p| -dlog(c, p.raw), &mut grad);
        }
        grad.scale(S::one() / S::of_usize(self.samples.len().max(1)));
        grad
    }

    pub fn recall(&self, model: &Mlp<S>) -> Result<S> {
        let preds: Vec<bool> = self.samples.iter().map(|s| model.predict(&s.x).label()).collect();
        let labels: Vec<bool> = self.samples.iter().map(|s| s.label).collect();
        metrics::recall(&preds, &labels)
    }
}

/// Value of the weight player's Lagrangian on a mini-batch and probe.
pub fn lagrangian_w_value<S: Scalar>(
    model: &Mlp<S>,
    batch: &[Sample<S>],
    probe: Option<&LogOddsProbe<S>>,
    lambda: &[S],
    spec: &ConstraintSpec,
    radius: S,
) -> Result<S> {
    let loss = model.batch_loss(batch);
    let soft: Vec<S> = batch.iter().map(|s| model.predict(&s.x).raw).collect();
    let labels: Vec<bool> = batch.iter().map(|s| s.label).collect();
    let theta = probe.map(|p| p.log_odds(model)).unwrap_or(S::of(spec.beta));
    let psi = match surrogate_violations(&soft, &labels, theta, spec) {
        Ok(psi) => psi,
        Err(Error::Undefined(_)) => [S::zero(), theta - S::of(spec.beta)],
        Err(e) => return Err(e),
    };
    Ok(lagrangian_w(loss, &psi, lambda, radius))
}

/// One SGD step on the weight player's Lagrangian.
///
/// The direction is `∇L_W / λ₀`, i.e. the objective gradient plus the
/// surrogate gradients weighted by `R·λ_m/λ₀`. Rescaling by the positive
/// scalar `λ₀` leaves the player's minimizers unchanged and makes a zero
/// radius reproduce plain SGD exactly. Returns the updated weights and the
/// pre-step batch loss.
pub fn oracle_step<S: Scalar>(
    model: &Mlp<S>,
    batch: &[Sample<S>],
    probe: Option<&LogOddsProbe<S>>,
    lambda: &[S],
    radius: S,
    lr: S,
) -> Result<(Mlp<S>, S)> {
    let (loss, mut dir) = model.loss_and_grad(batch)?;
    let lambda0 = lambda[0].max(S::of(1e-12));
    let recall_coeff = radius * lambda[1] / lambda0;
    if recall_coeff != S::zero() {
        let positives = batch.iter().filter(|s| s.label).count();
        if positives > 0 {
            // ψ₁ = α − mean over positives of σ(z), so ∇ψ₁ = −mean σ'(z)∇z
            let mut g = model.zeros_like();
            for s in batch.iter().filter(|s| s.label) {
                model.accumulate_logit_grad(&s.x, |p| -(p.raw * (S::one() - p.raw)), &mut g);
            }
            dir.axpy(recall_coeff / S::of_usize(positives), &g);
        }
    }
    if let Some(probe) = probe {
        let log_odds_coeff = radius * lambda[2] / lambda0;
        if log_odds_coeff != S::zero() {
            dir.axpy(log_odds_coeff, &probe.log_odds_grad(model));
        }
    }
    if !dir.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite Lagrangian gradient (batch loss {}, lambda {:?})",
            loss,
            lambda.iter().map(|l| l.to_f64_lossy()).collect::<Vec<_>>()
        )));
    }
    let mut next = model.clone();
    next.axpy(-lr, &dir);
    Ok((next, loss))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainMode {
    /// Multipliers, in-loop attributions and log-odds feedback.
    Constrained,
    /// Plain SGD on the loss; explanations are computed only after training.
    Vanilla,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalTrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub eta_lambda: f64,
    pub radius: f64,
    pub ig_steps: usize,
    pub probe_size: usize,
    pub spec: ConstraintSpec,
}

impl LocalTrainOptions {
    pub fn new(spec: ConstraintSpec) -> Self {
        LocalTrainOptions {
            epochs: 20,
            lr: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            eta_lambda: DEFAULT_ETA_LAMBDA,
            radius: DEFAULT_RADIUS,
            ig_steps: DEFAULT_TRAIN_IG_STEPS,
            probe_size: DEFAULT_PROBE_SIZE,
            spec,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.epochs == 0 {
            return Err(Error::config("local_epochs", "must be at least 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", "must be finite and non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !(self.eta_lambda > 0.0 && self.eta_lambda.is_finite()) {
            return Err(Error::config("eta_lambda", "must be positive"));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(Error::config("r_lambda", "must be finite and non-negative"));
        }
        if self.ig_steps == 0 {
            return Err(Error::config("train_ig_steps", "must be at least 1"));
        }
        if self.probe_size == 0 {
            return Err(Error::config("probe_size", "must be at least 1"));
        }
        Ok(())
    }
}

/// One line of a client's training trace.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord<S> {
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch.
    pub loss: S,
    /// Constraint measurements at the post-oracle weights; absent in vanilla mode.
    pub scores: Option<ConstraintScores<S>>,
    pub violations: Option<[S; NUM_CONSTRAINTS]>,
    pub lambda: Option<Vec<S>>,
}

impl<S: Scalar> EpochRecord<S> {
    /// `max(g₁, g₂, 0)`, zero when no constraints were measured.
    pub fn feasibility_gap(&self) -> S {
        self.violations
            .map(|g| g.iter().fold(S::zero(), |m, &v| m.max(v)))
            .unwrap_or(S::zero())
    }
}

#[derive(Clone, Debug)]
pub struct LocalOutcome<S> {
    pub weights: Mlp<S>,
    pub trace: Vec<EpochRecord<S>>,
    pub final_state: Option<GameState<S>>,
}

/// Mini-batches of indices with positives and negatives dealt round-robin,
/// so every batch gets a positive whenever there are at least as many
/// positives as batches.
pub fn stratified_batches<S>(samples: &[Sample<S>], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut pos: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].label).collect();
    let mut neg: Vec<usize> = (0..samples.len()).filter(|&i| !samples[i].label).collect();
    pos.shuffle(rng);
    neg.shuffle(rng);
    let count = samples.len().div_ceil(batch_size).max(1);
    let mut batches = vec![Vec::with_capacity(batch_size + 1); count];
    for (k, &i) in pos.iter().chain(&neg).enumerate() {
        batches[k % count].push(i);
    }
    batches
}

/// Tester draw of up to `size` samples containing a positive whenever the
/// pool has one.
pub fn draw_probe<S: Clone>(samples: &[Sample<S>], size: usize, rng: &mut ChaCha8Rng) -> Vec<Sample<S>> {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(rng);
    let take = size.min(samples.len());
    let mut chosen: Vec<usize> = idx[..take].to_vec();
    if !chosen.iter().any(|&i| samples[i].label) {
        if let Some(&p) = idx[take..].iter().find(|&&i| samples[i].label) {
            if let Some(last) = chosen.last_mut() {
                *last = p;
            }
        }
    }
    chosen.into_iter().map(|i| samples[i].clone()).collect()
}

fn gather<S: Clone>(samples: &[Sample<S>], idx: &[usize]) -> Vec<Sample<S>> {
    idx.iter().map(|&i| samples[i].clone()).collect()
}

/// Independent RNG streams for batching and for tester draws, so the two
/// modes consume identical batch sequences.
fn client_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    (
        ChaCha8Rng::seed_from_u64(crate::data::mix(&[seed, 0xBA7C])),
        ChaCha8Rng::seed_from_u64(crate::data::mix(&[seed, 0x7E57])),
    )
}

/// Local epochs of plain mini-batch SGD, returning the mean of the
/// per-epoch iterates.
pub fn train_vanilla<S: Scalar>(
    w0: &Mlp<S>,
    train: &[Sample<S>],
    opts: &LocalTrainOptions,
    seed: u64,
) -> Result<LocalOutcome<S>> {
    opts.validate()?;
    if train.is_empty() {
        return Err(Error::Input("client has no training samples".into()));
    }
    let (mut batch_rng, _) = client_rngs(seed);
    let lr = S::of(opts.lr);
    let mut w = w0.clone();
    let mut sum = w0.zeros_like();
    let mut trace = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        let batches = stratified_batches(train, opts.batch_size, &mut batch_rng);
        let mut loss_sum = S::zero();
        for idx in &batches {
            let (loss, grad) = w.loss_and_grad(&gather(train, idx))?;
            w.axpy(-lr, &grad);
            loss_sum += loss;
        }
        if !w.is_finite() {
            return Err(Error::Numeric(format!("weights diverged at epoch {epoch}")));
        }
        sum.axpy(S::one(), &w);
        trace.push(EpochRecord {
            epoch,
            loss: loss_sum / S::of_usize(batches.len()),
            scores: None,
            violations: None,
            lambda: None,
        });
    }
    sum.scale(S::one() / S::of_usize(opts.epochs));
    Ok(LocalOutcome { weights: sum, trace, final_state: None })
}

/// Constrained local training: per epoch, test and explain the current
/// model on a tester batch, take the multipliers from `A`, run one epoch of
/// oracle steps, measure the original constraints at the new weights and
/// update `A`. Returns the mean of the per-epoch iterates.
pub fn local_train<S: Scalar>(
    w0: &Mlp<S>,
    train: &[Sample<S>],
    opts: &LocalTrainOptions,
    seed: u64,
) -> Result<LocalOutcome<S>> {
    opts.validate()?;
    if train.is_empty() {
        return Err(Error::Input("client has no training samples".into()));
    }
    let (mut batch_rng, mut probe_rng) = client_rngs(seed);
    let (lr, radius, eta) = (S::of(opts.lr), S::of(opts.radius), S::of(opts.eta_lambda));
    let spec = opts.spec;
    let mut state = GameState::new(NUM_CONSTRAINTS, w0);
    let mut w = w0.clone();
    let mut trace = Vec::with_capacity(opts.epochs);
    let mut last_recall: Option<S> = None;

    for epoch in 0..opts.epochs {
        let probe = LogOddsProbe::build(&w, draw_probe(train, opts.probe_size, &mut probe_rng), spec.top_p, opts.ig_steps)?;
        state.lambda = top_eigenvector(&state.matrix)?;

        let batches = stratified_batches(train, opts.batch_size, &mut batch_rng);
        let mut loss_sum = S::zero();
        for idx in &batches {
            let (next, loss) = oracle_step(&w, &gather(train, idx), Some(&probe), &state.lambda, radius, lr)?;
            w = next;
            loss_sum += loss;
        }
        let loss = loss_sum / S::of_usize(batches.len());

        let recall = match probe.recall(&w) {
            Ok(r) => {
                last_recall = Some(r);
                r
            }
            Err(Error::Undefined(_)) => last_recall.unwrap_or(S::of(spec.alpha)),
            Err(e) => return Err(e),
        };
        let scores = ConstraintScores {
            recall,
            log_odds: probe.log_odds(&w),
            top_p: S::of(spec.top_p),
        };
        let g = constraint_violations(&scores, &spec);
        let delta = lagrangian_lambda_grad(loss, &g, radius);
        state.matrix = exp_gradient_update(&state.matrix, &delta, &state.lambda, eta)?;
        state.weight_sum.axpy(S::one(), &w);
        state.iter += 1;
        trace.push(EpochRecord {
            epoch,
            loss,
            scores: Some(scores),
            violations: Some(g),
            lambda: Some(state.lambda.clone()),
        });
    }
    let weights = state.average();
    Ok(LocalOutcome { weights, trace, final_state: Some(state) })
}

/// CSV lines for a trace; `epoch_offset` is added to the epoch index so
/// traces of successive rounds can be concatenated.
pub fn trace_csv_rows<S: Scalar>(trace: &[EpochRecord<S>], epoch_offset: usize, out: &mut String) {
    for r in trace {
        let e = r.epoch + epoch_offset;
        match (&r.scores, &r.violations, &r.lambda) {
            (Some(s), Some(g), Some(l)) => {
                let _ = write!(out, "{e},{},{},{},{},{}", r.loss, s.recall, s.log_odds, g[0], g[1]);
                for v in l {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
            _ => {
                let _ = writeln!(out, "{e},{}", r.loss);
            }
        }
    }
}
