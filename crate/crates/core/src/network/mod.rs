//! Hypothesis scorers.
//!
//! [`LinearModel`] is the weighted feature sum used by conventional systems;
//! [`ModelParams`] is a two-layer network `σ_o(M_o·σ_h(M_h·x + b_h) + b_o)`
//! whose hidden layer may be masked (see [`topology`]). Both implement
//! [`Scorer`] for the decoder and [`TrainableModel`] for the tuner.

mod linear;
mod model_file;
mod params;
pub mod topology;

use thiserror::Error;

use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::scalar::Scalar;

pub use linear::{score_linear, LinearModel};
pub use model_file::{load_model, read_model, save_model, write_model, ModelFileError};
pub use params::{backprop_pair, Forward, ModelParams, INIT_RANGE};
pub use topology::{
    build_gn, build_gn_with_degrees, build_standard, build_tdn, default_gn_degrees, Activation,
    FeatureGroup, FeatureGrouping, NetworkTopology, TopologyError, TopologyKind,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetworkError {
    #[error("input has {found} features, network expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{what}: expected {expected} values, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("hidden node {hidden} does not read input {input}")]
    MaskedWeight { hidden: usize, input: usize },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Anything that maps an accumulated feature vector to a model score.
pub trait Scorer<S: Scalar>: Send + Sync {
    /// Number of features the scorer reads; the decoder requires eleven.
    fn input_size(&self) -> usize;

    fn score_features(&self, x: &FeatureVector<S>) -> S;
}

/// A scorer with a flat vector of free parameters and an analytic gradient.
pub trait TrainableModel<S: Scalar>: Scorer<S> + Clone {
    fn free_len(&self) -> usize;

    fn free_params(&self) -> Vec<S>;

    fn set_free_params(&mut self, values: &[S]);

    /// Adds `scale · ∂score(x)/∂θ` to `grad` and returns `score(x)`.
    fn accumulate_score_gradient(&self, x: &[S], scale: S, grad: &mut [S]) -> S;

    fn score_slice(&self, x: &[S]) -> S;

    fn l1_norm(&self) -> S {
        self.free_params().iter().map(|v| v.abs()).sum()
    }
}

impl<S: Scalar> Scorer<S> for LinearModel<S> {
    fn input_size(&self) -> usize {
        FEATURE_COUNT
    }

    fn score_features(&self, x: &FeatureVector<S>) -> S {
        score_linear(self, x)
    }
}

impl<S: Scalar> TrainableModel<S> for LinearModel<S> {
    fn free_len(&self) -> usize {
        LinearModel::free_len(self)
    }

    fn free_params(&self) -> Vec<S> {
        LinearModel::free_params(self)
    }

    fn set_free_params(&mut self, values: &[S]) {
        LinearModel::set_free_params(self, values)
    }

    fn accumulate_score_gradient(&self, x: &[S], scale: S, grad: &mut [S]) -> S {
        for (g, v) in grad.iter_mut().zip(x) {
            *g += scale * *v;
        }
        self.score_slice(x)
    }

    fn score_slice(&self, x: &[S]) -> S {
        self.weights
            .as_slice()
            .iter()
            .zip(x)
            .fold(S::zero(), |acc, (w, v)| acc + *w * *v)
    }
}

impl<S: Scalar> Scorer<S> for ModelParams<S> {
    fn input_size(&self) -> usize {
        ModelParams::input_size(self)
    }

    fn score_features(&self, x: &FeatureVector<S>) -> S {
        self.score(x.as_slice())
            .expect("network input size checked before scoring features")
    }
}

impl<S: Scalar> TrainableModel<S> for ModelParams<S> {
    fn free_len(&self) -> usize {
        ModelParams::free_len(self)
    }

    fn free_params(&self) -> Vec<S> {
        ModelParams::free_params(self)
    }

    fn set_free_params(&mut self, values: &[S]) {
        ModelParams::set_free_params(self, values)
    }

    fn accumulate_score_gradient(&self, x: &[S], scale: S, grad: &mut [S]) -> S {
        ModelParams::accumulate_score_gradient(self, x, scale, grad)
    }

    fn score_slice(&self, x: &[S]) -> S {
        self.score_unchecked(x)
    }
}

/// Either kind of scorer, as stored in a model file.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel<S> {
    Linear(LinearModel<S>),
    Network(ModelParams<S>),
}

impl<S: Scalar> AnyModel<S> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AnyModel::Linear(_) => "linear",
            AnyModel::Network(p) => p.topology().kind().name(),
        }
    }

    pub fn as_network(&self) -> Option<&ModelParams<S>> {
        match self {
            AnyModel::Network(p) => Some(p),
            AnyModel::Linear(_) => None,
        }
    }
}

impl<S: Scalar> From<LinearModel<S>> for AnyModel<S> {
    fn from(m: LinearModel<S>) -> Self {
        AnyModel::Linear(m)
    }
}

impl<S: Scalar> From<ModelParams<S>> for AnyModel<S> {
    fn from(p: ModelParams<S>) -> Self {
        AnyModel::Network(p)
    }
}

impl<S: Scalar> Scorer<S> for AnyModel<S> {
    fn input_size(&self) -> usize {
        match self {
            AnyModel::Linear(m) => Scorer::input_size(m),
            AnyModel::Network(p) => Scorer::input_size(p),
        }
    }

    fn score_features(&self, x: &FeatureVector<S>) -> S {
        match self {
            AnyModel::Linear(m) => m.score_features(x),
            AnyModel::Network(p) => p.score_features(x),
        }
    }
}

impl<S: Scalar> TrainableModel<S> for AnyModel<S> {
    fn free_len(&self) -> usize {
        match self {
            AnyModel::Linear(m) => TrainableModel::free_len(m),
            AnyModel::Network(p) => TrainableModel::free_len(p),
        }
    }

    fn free_params(&self) -> Vec<S> {
        match self {
            AnyModel::Linear(m) => TrainableModel::free_params(m),
            AnyModel::Network(p) => TrainableModel::free_params(p),
        }
    }

    fn set_free_params(&mut self, values: &[S]) {
        match self {
            AnyModel::Linear(m) => TrainableModel::set_free_params(m, values),
            AnyModel::Network(p) => TrainableModel::set_free_params(p, values),
        }
    }

    fn accumulate_score_gradient(&self, x: &[S], scale: S, grad: &mut [S]) -> S {
        match self {
            AnyModel::Linear(m) => TrainableModel::accumulate_score_gradient(m, x, scale, grad),
            AnyModel::Network(p) => TrainableModel::accumulate_score_gradient(p, x, scale, grad),
        }
    }

    fn score_slice(&self, x: &[S]) -> S {
        match self {
            AnyModel::Linear(m) => m.score_slice(x),
            AnyModel::Network(p) => p.score_slice(x),
        }
    }
}

/// Adds `weight · ∂δ/∂θ` for the hinge `δ = max(s(worse) - s(better) + 1, 0)`
/// to `grad` and returns the unweighted `δ`. Inactive pairs (`δ = 0`,
/// including the kink) contribute nothing.
pub fn accumulate_pair_gradient<S: Scalar, M: TrainableModel<S>>(
    model: &M,
    better: &[S],
    worse: &[S],
    weight: S,
    grad: &mut [S],
) -> S {
    let margin = model.score_slice(worse) - model.score_slice(better) + S::one();
    if margin <= S::zero() {
        return S::zero();
    }
    model.accumulate_score_gradient(worse, weight, grad);
    model.accumulate_score_gradient(better, -weight, grad);
    margin
}

/// The hinge value alone.
pub fn pair_hinge<S: Scalar, M: TrainableModel<S>>(model: &M, better: &[S], worse: &[S]) -> S {
    (model.score_slice(worse) - model.score_slice(better) + S::one()).max(S::zero())
}
