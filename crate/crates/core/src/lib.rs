//! Simulator for federated training of per-slice traffic-drop classifiers
//! under recall and explanation-faithfulness constraints.
//!
//! Each base station trains a small ReLU network on its local data. In
//! constrained mode the local trainer plays a two-player game against a
//! multiplier player, using integrated-gradients attributions and the
//! log-odds masking score as a run-time constraint; the server aggregates
//! with size-weighted averaging. Vanilla mode trains on the loss alone and
//! explains only after the last round.
//!
//! The numeric modules are generic over [`Scalar`]; the aliases below fix
//! the precision used by the command-line tool.

pub mod data;
pub mod error;
pub mod explain;
pub mod federation;
pub mod game;
pub mod metrics;
pub mod nn;
pub mod scalar;
pub mod snapshot;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use data::{LocalDataset, SliceKind, SliceProfile, Standardizer};
pub use federation::{ExperimentResult, FederationConfig, RoundMetrics};
pub use game::{ConstraintSpec, LocalTrainOptions, TrainMode};

pub type Model = nn::Mlp<f64>;
pub type Model32 = nn::Mlp<f32>;
pub type Sample = nn::Sample<f64>;
pub type Prediction = nn::Prediction<f64>;
pub type AttributionMatrix = explain::AttributionMatrix<f64>;
pub type ConstraintScores = metrics::ConstraintScores<f64>;
pub type GameState = game::GameState<f64>;
pub type Experiment = federation::ExperimentResult<f64>;
