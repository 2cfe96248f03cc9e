//! Batch conjugate sub-gradient descent.
//!
//! Directions follow Polak-Ribière with restarts (`β = max(0, ·)`, and a
//! plain negative subgradient whenever the conjugate direction is not a
//! descent direction). Steps come from a backtracking line search that only
//! accepts strict decreases, so the objective never goes up. Optimization
//! runs in the model's free-parameter space, which leaves masked hidden
//! weights untouched.

use crate::features::TrainingPair;
use crate::network::TrainableModel;
use crate::scalar::Scalar;

use super::objective::objective;
use super::TuningError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerSettings {
    /// Objective evaluations allowed per call.
    pub max_evaluations: usize,
    /// Stop once an accepted step improves the objective by less than this
    /// fraction.
    pub tolerance: f64,
    /// Sufficient-decrease constant of the line search.
    pub armijo: f64,
    /// Step shrink factor while backtracking.
    pub shrink: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            max_evaluations: 200,
            tolerance: 1e-6,
            armijo: 1e-4,
            shrink: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeResult<M> {
    pub model: M,
    pub initial_value: f64,
    pub final_value: f64,
    pub evaluations: usize,
    /// Accepted steps.
    pub steps: usize,
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Minimizes the hinge + L1 objective over `pairs` starting at `init`.
pub fn optimize<S, M>(
    pairs: &[TrainingPair<S>],
    init: &M,
    lambda: S,
    settings: &OptimizerSettings,
) -> Result<OptimizeResult<M>, TuningError>
where
    S: Scalar,
    M: TrainableModel<S>,
{
    optimize_observed(pairs, init, lambda, settings, |_, _, _| {})
}

/// [`optimize`] calling `observe(step, model, value)` after every accepted
/// step.
pub fn optimize_observed<S, M, F>(
    pairs: &[TrainingPair<S>],
    init: &M,
    lambda: S,
    settings: &OptimizerSettings,
    mut observe: F,
) -> Result<OptimizeResult<M>, TuningError>
where
    S: Scalar,
    M: TrainableModel<S>,
    F: FnMut(usize, &M, S),
{
    let mut model = init.clone();
    let (mut f, mut g) = objective(&model, pairs, lambda)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(TuningError::NonFiniteObjective(f.as_f64()));
    }
    let initial_value = f.as_f64();
    let mut evaluations = 1;
    let mut steps = 0;
    let mut theta = model.free_params();
    let mut dir: Vec<S> = g.iter().map(|v| -*v).collect();
    let mut step = S::zero();
    let c = S::of(settings.armijo);
    let shrink = S::of(settings.shrink);

    'outer: while evaluations < settings.max_evaluations {
        let mut slope = dot(&g, &dir);
        if !(slope < S::zero()) {
            dir = g.iter().map(|v| -*v).collect();
            slope = dot(&g, &dir);
        }
        if slope == S::zero() {
            break;
        }
        let dnorm = dot(&dir, &dir).sqrt();
        // first step moves θ by at most one unit; later ones start from
        // twice the previous accepted length
        let mut t = if step > S::zero() {
            step + step
        } else {
            S::one().min(S::one() / dnorm)
        };
        let restarted = dir.iter().zip(&g).all(|(d, v)| *d == -*v);
        loop {
            if evaluations >= settings.max_evaluations {
                break 'outer;
            }
            let trial: Vec<S> = theta.iter().zip(&dir).map(|(a, d)| *a + t * *d).collect();
            let candidate = {
                let mut m = model.clone();
                m.set_free_params(&trial);
                m
            };
            let (f_new, g_new) = objective(&candidate, pairs, lambda)?;
            evaluations += 1;
            if f_new.is_finite() && f_new < f && f_new <= f + c * t * slope {
                let decrease = (f - f_new) / f.abs().max(S::of(1e-12));
                let beta = {
                    let denom = dot(&g, &g);
                    if denom > S::zero() {
                        let diff: Vec<S> = g_new.iter().zip(&g).map(|(a, b)| *a - *b).collect();
                        (dot(&g_new, &diff) / denom).max(S::zero())
                    } else {
                        S::zero()
                    }
                };
                dir = g_new.iter().zip(&dir).map(|(gn, d)| -*gn + beta * *d).collect();
                theta = trial;
                model = candidate;
                f = f_new;
                g = g_new;
                step = t;
                steps += 1;
                observe(steps, &model, f);
                if decrease < S::of(settings.tolerance) {
                    break 'outer;
                }
                break;
            }
            t *= shrink;
            if t * dnorm < S::of(1e-14) {
                if restarted {
                    break 'outer;
                }
                // conjugate direction failed, retry along the subgradient
                dir = g.iter().map(|v| -*v).collect();
                step = S::zero();
                continue 'outer;
            }
        }
    }
    Ok(OptimizeResult {
        model,
        initial_value,
        final_value: f.as_f64(),
        evaluations,
        steps,
    })
}
