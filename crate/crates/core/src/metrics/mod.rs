//! Case-insensitive multi-reference BLEU and paired bootstrap testing.
//!
//! Tokens are whitespace-separated and lowercased before counting.

mod bleu;
mod bootstrap;

use thiserror::Error;

pub use bleu::{
    bleu_corpus, bleu_sentence, corpus_stats, sentence_stats, BleuStats, MAX_ORDER,
};
pub use bootstrap::{bootstrap_significance, bootstrap_texts, BootstrapResult, MIN_DRAWS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no sentences to score")]
    Empty,
    #[error("inputs are not aligned: {left} vs {right} sentences")]
    Misaligned { left: usize, right: usize },
    #[error("sentence {sentence} has no reference")]
    NoReference { sentence: usize },
    #[error("bootstrap needs at least {min} draws, got {draws}")]
    TooFewDraws { draws: usize, min: usize },
}
