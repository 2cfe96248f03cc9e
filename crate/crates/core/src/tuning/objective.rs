use rayon::prelude::*;

use crate::features::TrainingPair;
use crate::network::{accumulate_pair_gradient, TrainableModel};
use crate::scalar::Scalar;

use super::TuningError;

/// Pairs per work unit. Partial sums are combined in chunk order, so the
/// result does not depend on the number of threads.
const CHUNK: usize = 256;

/// Weighted mean hinge over `pairs` plus `lambda · ‖θ‖₁`, and a
/// subgradient in the model's free-parameter layout (`sign(0) = 0`).
pub fn objective<S, M>(model: &M, pairs: &[TrainingPair<S>], lambda: S) -> Result<(S, Vec<S>), TuningError>
where
    S: Scalar,
    M: TrainableModel<S>,
{
    if pairs.is_empty() {
        return Err(TuningError::EmptyPool);
    }
    let n = model.free_len();
    let partial: Vec<(S, S, Vec<S>)> = pairs
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = vec![S::zero(); n];
            let mut loss = S::zero();
            let mut weight = S::zero();
            for p in chunk {
                let h = accumulate_pair_gradient(
                    model,
                    p.better.features.as_slice(),
                    p.worse.features.as_slice(),
                    p.weight,
                    &mut grad,
                );
                loss += p.weight * h;
                weight += p.weight;
            }
            (loss, weight, grad)
        })
        .collect();
    let mut loss = S::zero();
    let mut weight = S::zero();
    let mut grad = vec![S::zero(); n];
    for (l, w, g) in partial {
        loss += l;
        weight += w;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    if !(weight > S::zero()) {
        return Err(TuningError::EmptyPool);
    }
    let theta = model.free_params();
    for (g, t) in grad.iter_mut().zip(&theta) {
        *g = *g / weight + lambda * t.sign_or_zero();
    }
    let l1: S = theta.iter().map(|t| t.abs()).sum();
    Ok((loss / weight + lambda * l1, grad))
}

/// Objective value only.
pub fn objective_value<S, M>(model: &M, pairs: &[TrainingPair<S>], lambda: S) -> Result<S, TuningError>
where
    S: Scalar,
    M: TrainableModel<S>,
{
    if pairs.is_empty() {
        return Err(TuningError::EmptyPool);
    }
    let partial: Vec<(S, S)> = pairs
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk.iter().fold((S::zero(), S::zero()), |(l, w), p| {
                let h = crate::network::pair_hinge(model, p.better.features.as_slice(), p.worse.features.as_slice());
                (l + p.weight * h, w + p.weight)
            })
        })
        .collect();
    let (loss, weight) = partial
        .into_iter()
        .fold((S::zero(), S::zero()), |(l, w), (a, b)| (l + a, w + b));
    if !(weight > S::zero()) {
        return Err(TuningError::EmptyPool);
    }
    Ok(loss / weight + lambda * model.l1_norm())
}

/// Fraction of pairs the model orders strictly correctly.
pub fn pair_accuracy<S, M>(model: &M, pairs: &[TrainingPair<S>]) -> Result<f64, TuningError>
where
    S: Scalar,
    M: TrainableModel<S>,
{
    if pairs.is_empty() {
        return Err(TuningError::EmptyPool);
    }
    let correct = pairs
        .iter()
        .filter(|p| model.score_slice(p.better.features.as_slice()) > model.score_slice(p.worse.features.as_slice()))
        .count();
    Ok(correct as f64 / pairs.len() as f64)
}
