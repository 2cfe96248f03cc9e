use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{NBestList, TrainingPair};
use crate::scalar::Scalar;

use super::TuningError;

/// Settings of the pairwise sampler.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PwParams {
    /// Pairs drawn per sentence (Γ).
    pub samples: usize,
    /// Minimum eval difference a pair must exceed (α_t).
    pub threshold: f64,
    /// Pairs kept per sentence, largest differences first (ξ).
    pub keep: usize,
}

impl Default for PwParams {
    fn default() -> Self {
        PwParams {
            samples: 5000,
            threshold: 0.05,
            keep: 50,
        }
    }
}

impl PwParams {
    pub fn validate(&self) -> Result<(), TuningError> {
        if self.keep == 0 || self.samples < self.keep {
            return Err(TuningError::InvalidConfig(format!(
                "pairwise sampling needs samples >= keep >= 1, got samples = {}, keep = {}",
                self.samples, self.keep
            )));
        }
        if !(self.threshold >= 0.0) {
            return Err(TuningError::InvalidConfig(format!(
                "pairwise threshold must be non-negative, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// How training pairs are drawn from an n-best list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Criterion {
    /// Best against every other hypothesis.
    BestVsRest,
    /// Best against worst.
    BestVsWorst,
    /// Sampled pairs with a large enough eval difference.
    Pairwise(PwParams),
}

impl Criterion {
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::BestVsRest => "br",
            Criterion::BestVsWorst => "bw",
            Criterion::Pairwise(_) => "pw",
        }
    }

    /// Pairs for one sentence. `seed` only matters for [`Criterion::Pairwise`].
    pub fn generate<S: Scalar>(&self, nbest: &NBestList<S>, seed: u64) -> Vec<TrainingPair<S>> {
        match self {
            Criterion::BestVsRest => generate_pairs_br(nbest),
            Criterion::BestVsWorst => generate_pairs_bw(nbest),
            Criterion::Pairwise(p) => generate_pairs_pw(nbest, p, seed),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = TuningError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "br" => Ok(Criterion::BestVsRest),
            "bw" => Ok(Criterion::BestVsWorst),
            "pw" => Ok(Criterion::Pairwise(PwParams::default())),
            other => Err(TuningError::InvalidConfig(format!(
                "unknown criterion {other:?}, expected br, bw or pw"
            ))),
        }
    }
}

/// Index of the highest eval score, lowest index on ties.
fn argmax_eval<S>(nbest: &NBestList<S>) -> usize
where
    S: Scalar,
{
    let mut best = 0;
    for (i, h) in nbest.iter().enumerate() {
        if h.eval_score > nbest.hypotheses()[best].eval_score {
            best = i;
        }
    }
    best
}

fn argmin_eval<S: Scalar>(nbest: &NBestList<S>) -> usize {
    let mut worst = 0;
    for (i, h) in nbest.iter().enumerate() {
        if h.eval_score < nbest.hypotheses()[worst].eval_score {
            worst = i;
        }
    }
    worst
}

fn pair<S: Scalar>(nbest: &NBestList<S>, better: usize, worse: usize) -> TrainingPair<S> {
    let h = nbest.hypotheses();
    TrainingPair::new(nbest.source_id, h[better].clone(), h[worse].clone())
}

/// The eval-best hypothesis paired with every other one.
pub fn generate_pairs_br<S: Scalar>(nbest: &NBestList<S>) -> Vec<TrainingPair<S>> {
    if nbest.len() < 2 {
        return Vec::new();
    }
    let best = argmax_eval(nbest);
    (0..nbest.len())
        .filter(|&i| i != best)
        .map(|i| pair(nbest, best, i))
        .collect()
}

/// A single (eval-best, eval-worst) pair; nothing when they coincide.
pub fn generate_pairs_bw<S: Scalar>(nbest: &NBestList<S>) -> Vec<TrainingPair<S>> {
    if nbest.len() < 2 {
        return Vec::new();
    }
    let best = argmax_eval(nbest);
    let worst = argmin_eval(nbest);
    if best == worst {
        return Vec::new();
    }
    vec![pair(nbest, best, worst)]
}

/// Samples `samples` index pairs uniformly (with replacement, ChaCha8
/// seeded by `seed`), keeps those whose eval difference exceeds the
/// threshold, orders each as (better, worse), drops repeats and returns the
/// `keep` pairs with the largest differences. Equal differences keep
/// sampling order.
pub fn generate_pairs_pw<S: Scalar>(nbest: &NBestList<S>, params: &PwParams, seed: u64) -> Vec<TrainingPair<S>> {
    let n = nbest.len();
    if n < 2 {
        return Vec::new();
    }
    let h = nbest.hypotheses();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut kept: Vec<(usize, usize, f64)> = Vec::new();
    for _ in 0..params.samples {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        let diff = (h[i].eval_score - h[j].eval_score).abs();
        if diff <= params.threshold {
            continue;
        }
        let (b, w) = if h[i].eval_score > h[j].eval_score { (i, j) } else { (j, i) };
        if seen.insert((b, w)) {
            kept.push((b, w, diff));
        }
    }
    kept.sort_by(|a, b| b.2.total_cmp(&a.2));
    kept.truncate(params.keep);
    kept.into_iter().map(|(b, w, _)| pair(nbest, b, w)).collect()
}

/// Per-sentence sampling seed, so results do not depend on the order in
/// which sentences are processed.
pub fn pair_seed(seed: u64, iteration: usize, source_id: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(seed) ^ iteration as u64) ^ source_id as u64)
}
