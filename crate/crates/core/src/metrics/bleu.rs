use std::collections::HashMap;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use super::MetricsError;

/// Highest n-gram order counted.
pub const MAX_ORDER: usize = 4;

/// Sufficient statistics for BLEU. Additive across sentences.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct BleuStats {
    /// Clipped n-gram matches for n = 1..=4.
    pub matches: [u64; MAX_ORDER],
    /// Hypothesis n-gram counts for n = 1..=4.
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    /// Effective reference length.
    pub ref_len: u64,
}

impl BleuStats {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Fieldwise sum.
    pub fn compose(&self, other: &BleuStats) -> BleuStats {
        let mut out = *self;
        out += *other;
        out
    }

    pub fn precisions(&self) -> [f64; MAX_ORDER] {
        std::array::from_fn(|n| {
            if self.totals[n] == 0 {
                0.0
            } else {
                self.matches[n] as f64 / self.totals[n] as f64
            }
        })
    }

    /// `min(1, e^{1 - r/c})`, zero for an empty hypothesis.
    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len >= self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        }
    }

    /// Corpus BLEU from these statistics. Any order without a match gives 0.
    pub fn bleu(&self) -> f64 {
        if self.hyp_len == 0 || self.matches.contains(&0) {
            return 0.0;
        }
        let log_p: f64 = (0..MAX_ORDER)
            .map(|n| (self.matches[n] as f64).ln() - (self.totals[n] as f64).ln())
            .sum::<f64>()
            / MAX_ORDER as f64;
        (self.brevity_penalty() * log_p.exp()).min(1.0)
    }

    /// BLEU+1: add-one smoothing on matches and totals for n ≥ 2, unigram
    /// precision unsmoothed.
    pub fn smoothed_bleu(&self) -> f64 {
        if self.hyp_len == 0 || self.matches[0] == 0 {
            return 0.0;
        }
        let mut log_p = (self.matches[0] as f64).ln() - (self.totals[0] as f64).ln();
        for n in 1..MAX_ORDER {
            log_p += ((self.matches[n] + 1) as f64).ln() - ((self.totals[n] + 1) as f64).ln();
        }
        (self.brevity_penalty() * (log_p / MAX_ORDER as f64).exp()).min(1.0)
    }
}

impl AddAssign for BleuStats {
    fn add_assign(&mut self, rhs: BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += rhs.matches[n];
            self.totals[n] += rhs.totals[n];
        }
        self.hyp_len += rhs.hyp_len;
        self.ref_len += rhs.ref_len;
    }
}

impl Add for BleuStats {
    type Output = BleuStats;

    fn add(mut self, rhs: BleuStats) -> BleuStats {
        self += rhs;
        self
    }
}

impl Sum for BleuStats {
    fn sum<I: Iterator<Item = BleuStats>>(iter: I) -> BleuStats {
        iter.fold(BleuStats::zero(), Add::add)
    }
}

fn fold_case<T: AsRef<str>>(tokens: &[T]) -> Vec<String> {
    tokens.iter().map(|t| t.as_ref().to_lowercase()).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Closest reference length; ties go to the shorter reference.
fn effective_ref_len(hyp_len: usize, ref_lens: impl Iterator<Item = usize>) -> usize {
    ref_lens
        .min_by_key(|&r| (r.abs_diff(hyp_len), r))
        .unwrap_or(0)
}

/// Case-insensitive statistics of one hypothesis against its references.
/// Counts are clipped by the maximum count of each n-gram in any single
/// reference.
pub fn sentence_stats<T: AsRef<str>, U: AsRef<str>>(hyp: &[T], refs: &[Vec<U>]) -> BleuStats {
    let hyp = fold_case(hyp);
    let refs: Vec<Vec<String>> = refs.iter().map(|r| fold_case(r)).collect();
    let mut stats = BleuStats {
        hyp_len: hyp.len() as u64,
        ref_len: effective_ref_len(hyp.len(), refs.iter().map(Vec::len)) as u64,
        ..BleuStats::default()
    };
    for n in 1..=MAX_ORDER {
        let hyp_counts = ngram_counts(&hyp, n);
        let mut max_ref: HashMap<&[String], u64> = HashMap::new();
        for r in &refs {
            for (g, c) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        stats.totals[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
        stats.matches[n - 1] = hyp_counts
            .iter()
            .map(|(g, c)| (*c).min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
    }
    stats
}

/// Per-sentence statistics for a whole corpus.
pub fn corpus_stats<T: AsRef<str>, U: AsRef<str>>(
    hyps: &[Vec<T>],
    refs: &[Vec<Vec<U>>],
) -> Result<Vec<BleuStats>, MetricsError> {
    if hyps.is_empty() {
        return Err(MetricsError::Empty);
    }
    if hyps.len() != refs.len() {
        return Err(MetricsError::Misaligned {
            left: hyps.len(),
            right: refs.len(),
        });
    }
    if let Some(sentence) = refs.iter().position(Vec::is_empty) {
        return Err(MetricsError::NoReference { sentence });
    }
    Ok(hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| sentence_stats(h, r))
        .collect())
}

/// Case-insensitive 4-gram corpus BLEU with multiple references.
pub fn bleu_corpus<T: AsRef<str>, U: AsRef<str>>(
    hyps: &[Vec<T>],
    refs: &[Vec<Vec<U>>],
) -> Result<f64, MetricsError> {
    Ok(corpus_stats(hyps, refs)?.into_iter().sum::<BleuStats>().bleu())
}

/// Smoothed sentence-level BLEU (BLEU+1), used as the eval score when
/// generating training pairs.
pub fn bleu_sentence<T: AsRef<str>, U: AsRef<str>>(hyp: &[T], refs: &[Vec<U>]) -> f64 {
    sentence_stats(hyp, refs).smoothed_bleu()
}
