//! Hierarchical phrase-based decoding.
//!
//! A CKY chart over source spans is filled bottom-up with `X` items from
//! grammar rules and `S` items from the two glue rules, which only start
//! at position 0 and so concatenate chunks left to right. Each cell is
//! filled by cube pruning, ranked by the scorer applied to the full
//! accumulated feature vector, so non-linear scorers drive the search
//! directly. Items with the same left and right LM boundary words are
//! recombined. The n-best list comes from lazy k-best extraction over the
//! resulting hypergraph, deduplicated on the output string.

mod chart;
mod grammar;
mod lm;

use rayon::prelude::*;
use thiserror::Error;

use crate::features::NBestList;
use crate::network::Scorer;
use crate::scalar::Scalar;

pub use grammar::{Grammar, GrammarError, Lhs, Pattern, Rule, RuleKind, Symbol, DEFAULT_MAX_SPAN};
pub use lm::{LmError, NGramLM, BOS, DEFAULT_FLOOR, EOS, NO_WORD, UNK};

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderConfig {
    /// Candidates popped per chart cell.
    pub beam: usize,
    /// Size of the returned n-best list.
    pub nbest: usize,
    /// Allow deleting any source word (adds nc = 1).
    pub null_rule: bool,
    /// Value of each probability feature on unknown-word and deletion rules.
    pub synthetic_penalty: f64,
    /// Derivations examined at most while collecting distinct outputs.
    pub kbest_pop_limit: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            beam: 20,
            nbest: 20,
            null_rule: false,
            synthetic_penalty: -10.0,
            kbest_pop_limit: 1000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("sentence {sentence} is empty")]
    EmptySentence { sentence: usize },
    #[error("sentence {sentence}: no derivation covers the whole input")]
    NoGoal { sentence: usize },
    #[error("scorer takes {found} inputs, the decoder produces {expected} features")]
    ScorerInput { expected: usize, found: usize },
}

/// Decodes one tokenized sentence into an n-best list.
pub fn decode<S, M>(
    sentence: &[String],
    source_id: usize,
    grammar: &Grammar<S>,
    lm: &NGramLM,
    scorer: &M,
    config: &DecoderConfig,
) -> Result<NBestList<S>, DecodeError>
where
    S: Scalar,
    M: Scorer<S> + ?Sized,
{
    chart::check_input(scorer.input_size())?;
    if sentence.is_empty() {
        return Err(DecodeError::EmptySentence { sentence: source_id });
    }
    let mut chart = chart::Chart::new(grammar, lm, scorer, config, sentence);
    let goal = chart.run().ok_or(DecodeError::NoGoal { sentence: source_id })?;
    Ok(chart.nbest(goal, source_id))
}

/// Decodes every sentence, in parallel on the current rayon pool. Output
/// order follows input order and does not depend on the thread count.
pub fn decode_corpus<S, M>(
    sentences: &[Vec<String>],
    grammar: &Grammar<S>,
    lm: &NGramLM,
    scorer: &M,
    config: &DecoderConfig,
) -> Result<Vec<NBestList<S>>, DecodeError>
where
    S: Scalar,
    M: Scorer<S> + ?Sized,
{
    sentences
        .par_iter()
        .enumerate()
        .map(|(i, s)| decode(s, i, grammar, lm, scorer, config))
        .collect()
}

/// Recomputes every model score with `scorer` and re-sorts.
pub fn rescore_nbest<S: Scalar, M: Scorer<S> + ?Sized>(nbest: &NBestList<S>, scorer: &M) -> NBestList<S> {
    let mut out = nbest.clone();
    out.rescore_with(|x| scorer.score_features(x));
    out
}

#[cfg(test)]
mod tests;
