use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bleu::{corpus_stats, BleuStats};
use super::MetricsError;

/// Fewest resamples accepted by [`bootstrap_significance`].
pub const MIN_DRAWS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapResult {
    pub bleu_a: f64,
    pub bleu_b: f64,
    /// Fraction of resampled test sets where system A does not beat B.
    pub p_value: f64,
    pub draws: usize,
}

/// Paired bootstrap resampling over per-sentence statistics.
///
/// Each draw picks `n` sentence indices with replacement (ChaCha8 seeded by
/// `seed`, indices from `gen_range(0..n)`) and compares the corpus BLEU of
/// both systems on that sample. The p-value for "A is better than B" is the
/// fraction of draws with `BLEU(A) ≤ BLEU(B)`.
pub fn bootstrap_significance(
    stats_a: &[BleuStats],
    stats_b: &[BleuStats],
    draws: usize,
    seed: u64,
) -> Result<BootstrapResult, MetricsError> {
    if stats_a.is_empty() {
        return Err(MetricsError::Empty);
    }
    if stats_a.len() != stats_b.len() {
        return Err(MetricsError::Misaligned {
            left: stats_a.len(),
            right: stats_b.len(),
        });
    }
    if draws < MIN_DRAWS {
        return Err(MetricsError::TooFewDraws { draws, min: MIN_DRAWS });
    }
    let n = stats_a.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut not_better = 0usize;
    for _ in 0..draws {
        let mut a = BleuStats::zero();
        let mut b = BleuStats::zero();
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            a += stats_a[i];
            b += stats_b[i];
        }
        if a.bleu() <= b.bleu() {
            not_better += 1;
        }
    }
    Ok(BootstrapResult {
        bleu_a: stats_a.iter().copied().sum::<BleuStats>().bleu(),
        bleu_b: stats_b.iter().copied().sum::<BleuStats>().bleu(),
        p_value: not_better as f64 / draws as f64,
        draws,
    })
}

/// [`bootstrap_significance`] on tokenized system outputs.
pub fn bootstrap_texts<T: AsRef<str>, U: AsRef<str>>(
    hyps_a: &[Vec<T>],
    hyps_b: &[Vec<T>],
    refs: &[Vec<Vec<U>>],
    draws: usize,
    seed: u64,
) -> Result<BootstrapResult, MetricsError> {
    if hyps_a.len() != hyps_b.len() {
        return Err(MetricsError::Misaligned {
            left: hyps_a.len(),
            right: hyps_b.len(),
        });
    }
    let a = corpus_stats(hyps_a, refs)?;
    let b = corpus_stats(hyps_b, refs)?;
    bootstrap_significance(&a, &b, draws, seed)
}
