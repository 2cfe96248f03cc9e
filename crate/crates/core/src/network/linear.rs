use num_traits::Num;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::scalar::Scalar;

/// Weighted sum of the eleven features, the classical log-linear score.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel<S> {
    pub weights: FeatureVector<S>,
}

impl<S: Clone + Num> LinearModel<S> {
    pub fn new(weights: FeatureVector<S>) -> Self {
        LinearModel { weights }
    }

    pub fn zeros() -> Self {
        LinearModel {
            weights: FeatureVector::zero(),
        }
    }
}

/// Dot product of the model weights with `x`, summed in canonical order.
pub fn score_linear<S: Clone + Num>(model: &LinearModel<S>, x: &FeatureVector<S>) -> S {
    model
        .weights
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .fold(S::zero(), |acc, (w, v)| acc + w.clone() * v.clone())
}

impl<S: Scalar> LinearModel<S> {
    /// Weights drawn uniformly from `[-INIT_RANGE, INIT_RANGE]`, seeded.
    pub fn init_random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = super::INIT_RANGE;
        LinearModel {
            weights: FeatureVector::new(std::array::from_fn(|_| S::of(rng.gen_range(-r..=r)))),
        }
    }

    pub fn free_len(&self) -> usize {
        FEATURE_COUNT
    }

    pub fn free_params(&self) -> Vec<S> {
        self.weights.as_slice().to_vec()
    }

    pub fn set_free_params(&mut self, values: &[S]) {
        self.weights = FeatureVector::from_slice(values).expect("eleven linear weights");
    }

    pub fn l1_norm(&self) -> S {
        self.weights.as_slice().iter().map(|w| w.abs()).sum()
    }
}
