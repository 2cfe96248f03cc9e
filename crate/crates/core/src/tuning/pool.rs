//! The cross-iteration pair pool and its text dump.
//!
//! Dump format, one pair per line:
//!
//! ```text
//! source_id ||| better tokens ||| better features ||| better score ||| better eval
//!           ||| worse tokens ||| worse features ||| worse score ||| worse eval
//!           ||| weight ||| born_iteration
//! ```

use std::io::{self, BufRead, Write};

use crate::features::nbest_file::{
    format_features, format_real, parse_features, parse_real, parse_usize, FIELD_SEP,
};
use crate::features::{Hypothesis, NBestFileError, TrainingPair};
use crate::scalar::Scalar;

use super::TuningError;

/// Training pairs from all iterations so far. Pairs from the latest
/// iteration weigh `w_current`, older ones `w_past`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairPool<S> {
    pairs: Vec<TrainingPair<S>>,
    w_current: S,
    w_past: S,
    current_only: bool,
}

impl<S: Scalar> Default for PairPool<S> {
    fn default() -> Self {
        PairPool::new(S::one(), S::of(0.1), false).expect("valid default weights")
    }
}

impl<S: Scalar> PairPool<S> {
    pub fn new(w_current: S, w_past: S, current_only: bool) -> Result<Self, TuningError> {
        if !(w_past > S::zero() && w_past <= w_current) {
            return Err(TuningError::InvalidConfig(format!(
                "pool weights need 0 < w_past <= w_current, got w_past = {w_past}, w_current = {w_current}"
            )));
        }
        Ok(PairPool {
            pairs: Vec::new(),
            w_current,
            w_past,
            current_only,
        })
    }

    pub fn pairs(&self) -> &[TrainingPair<S>] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn w_current(&self) -> S {
        self.w_current
    }

    pub fn w_past(&self) -> S {
        self.w_past
    }

    pub fn current_only(&self) -> bool {
        self.current_only
    }

    /// Re-weights the pooled pairs as past, then appends `new_pairs` as
    /// current pairs born at `iteration`. With `current_only` the old
    /// pairs are dropped instead.
    pub fn combine(&mut self, new_pairs: Vec<TrainingPair<S>>, iteration: usize) {
        if self.current_only {
            self.pairs.clear();
        }
        for p in &mut self.pairs {
            p.weight = self.w_past;
        }
        self.pairs.extend(new_pairs.into_iter().map(|mut p| {
            p.weight = self.w_current;
            p.born_iteration = iteration;
            p
        }));
    }

    /// Restores a pool from dumped pairs, keeping their stored weights.
    pub fn from_pairs(
        pairs: Vec<TrainingPair<S>>,
        w_current: S,
        w_past: S,
        current_only: bool,
    ) -> Result<Self, TuningError> {
        let mut pool = PairPool::new(w_current, w_past, current_only)?;
        pool.pairs = pairs;
        Ok(pool)
    }
}

/// Functional form of [`PairPool::combine`].
pub fn weighted_combine<S: Scalar>(
    mut pool: PairPool<S>,
    new_pairs: Vec<TrainingPair<S>>,
    iteration: usize,
) -> PairPool<S> {
    pool.combine(new_pairs, iteration);
    pool
}

fn hyp_fields<S: Scalar>(h: &Hypothesis<S>) -> String {
    format!(
        "{}{FIELD_SEP}{}{FIELD_SEP}{}{FIELD_SEP}{}",
        h.tokens.join(" "),
        format_features(&h.features),
        format_real(h.model_score),
        format_real(h.eval_score)
    )
}

pub fn write_pool<S: Scalar, W: Write>(mut out: W, pairs: &[TrainingPair<S>]) -> io::Result<()> {
    for p in pairs {
        writeln!(
            out,
            "{}{FIELD_SEP}{}{FIELD_SEP}{}{FIELD_SEP}{}{FIELD_SEP}{}",
            p.source_id,
            hyp_fields(&p.better),
            hyp_fields(&p.worse),
            format_real(p.weight),
            p.born_iteration
        )?;
    }
    out.flush()
}

pub fn read_pool<S: Scalar, R: BufRead>(input: R) -> Result<Vec<TrainingPair<S>>, NBestFileError> {
    let mut pairs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(FIELD_SEP).collect();
        if f.len() != 11 {
            return Err(NBestFileError::Malformed {
                line: line_no,
                message: format!("expected 11 fields separated by '|||', found {}", f.len()),
            });
        }
        let hyp = |k: usize| -> Result<Hypothesis<S>, NBestFileError> {
            let mut h = Hypothesis::new(
                f[k].split_whitespace().map(str::to_string).collect(),
                parse_features(f[k + 1], line_no)?,
                parse_real(f[k + 2], line_no, "model score")?,
            );
            h.eval_score = parse_real(f[k + 3], line_no, "eval score")?;
            Ok(h)
        };
        pairs.push(TrainingPair {
            source_id: parse_usize(f[0], line_no, "source id")?,
            better: hyp(1)?,
            worse: hyp(5)?,
            weight: parse_real(f[9], line_no, "weight")?,
            born_iteration: parse_usize(f[10], line_no, "iteration")?,
        });
    }
    Ok(pairs)
}
