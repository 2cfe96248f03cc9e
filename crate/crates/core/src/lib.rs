//! Hierarchical phrase-based translation with non-linear hypothesis scoring.
//!
//! The crate is organised around five pieces:
//!
//! * [`features`]: the eleven-feature vectors, hypotheses, n-best lists,
//!   training pairs and corpora shared by everything else;
//! * [`network`]: the linear scorer and masked two-layer network scorers
//!   (fully connected, two-degree, grouped) with backpropagation;
//! * [`decoder`]: a CKY decoder with cube pruning and n-gram LM integration
//!   that ranks candidates with any [`network::Scorer`];
//! * [`metrics`]: BLEU and bootstrap significance testing;
//! * [`tuning`]: pair generation (best-vs-rest, best-vs-worst, pairwise),
//!   the weighted pair pool, the hinge + L1 objective, a conjugate
//!   sub-gradient optimizer and the iterative trainer.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the command-line tool uses.

pub mod decoder;
pub mod features;
pub mod metrics;
pub mod network;
pub mod scalar;
pub mod tuning;

pub use scalar::Scalar;

/// Default scalar type.
pub type Real = f64;

pub type Features = features::FeatureVector<Real>;
pub type Hyp = features::Hypothesis<Real>;
pub type NBest = features::NBestList<Real>;
pub type Pair = features::TrainingPair<Real>;
pub type Linear = network::LinearModel<Real>;
pub type Params = network::ModelParams<Real>;
pub type Model = network::AnyModel<Real>;
pub type Pool = tuning::PairPool<Real>;

/// Single-precision network parameters.
pub type Params32 = network::ModelParams<f32>;
