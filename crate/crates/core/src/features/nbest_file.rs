//! Plain-text n-best lists:
//!
//! ```text
//! source_id ||| token1 token2 ... ||| p_fe p_ef lex_fe lex_ef lm wc pc rc gc uc nc ||| model_score
//! ```

use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::{FeatureVector, Hypothesis, NBestList, FEATURE_COUNT};
use crate::scalar::Scalar;

pub(crate) const FIELD_SEP: &str = " ||| ";

#[derive(Debug, Error)]
pub enum NBestFileError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Formats a real with 17 significant digits, enough to round-trip f64.
pub fn format_real<S: Scalar>(x: S) -> String {
    format!("{x:.16e}")
}

pub(crate) fn format_features<S: Scalar>(features: &FeatureVector<S>) -> String {
    features
        .as_slice()
        .iter()
        .map(|v| format_real(*v))
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn parse_real<S: Scalar>(field: &str, line: usize, what: &str) -> Result<S, NBestFileError> {
    field.trim().parse::<S>().map_err(|_| NBestFileError::Malformed {
        line,
        message: format!("bad {what} value {:?}", field.trim()),
    })
}

pub(crate) fn parse_features<S: Scalar>(
    field: &str,
    line: usize,
) -> Result<FeatureVector<S>, NBestFileError> {
    let values = field
        .split_whitespace()
        .map(|v| parse_real::<S>(v, line, "feature"))
        .collect::<Result<Vec<_>, _>>()?;
    FeatureVector::from_slice(&values).ok_or_else(|| NBestFileError::Malformed {
        line,
        message: format!("expected {FEATURE_COUNT} features, found {}", values.len()),
    })
}

pub(crate) fn parse_usize(field: &str, line: usize, what: &str) -> Result<usize, NBestFileError> {
    field.trim().parse().map_err(|_| NBestFileError::Malformed {
        line,
        message: format!("bad {what} {:?}", field.trim()),
    })
}

pub(crate) fn format_hypothesis<S: Scalar>(source_id: usize, h: &Hypothesis<S>) -> String {
    format!(
        "{source_id}{FIELD_SEP}{}{FIELD_SEP}{}{FIELD_SEP}{}",
        h.tokens.join(" "),
        format_features(&h.features),
        format_real(h.model_score)
    )
}

/// Writes every list, one hypothesis per line, LF-terminated.
pub fn write_nbest<S: Scalar, W: Write>(mut out: W, lists: &[NBestList<S>]) -> io::Result<()> {
    for list in lists {
        for h in list.iter() {
            writeln!(out, "{}", format_hypothesis(list.source_id, h))?;
        }
    }
    out.flush()
}

/// Reads n-best lists, grouped by source id in order of first appearance.
/// Each list's capacity is the number of lines read for it.
pub fn read_nbest<S: Scalar, R: BufRead>(input: R) -> Result<Vec<NBestList<S>>, NBestFileError> {
    let mut groups: Vec<(usize, Vec<Hypothesis<S>>)> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(FIELD_SEP).collect();
        if fields.len() != 4 {
            return Err(NBestFileError::Malformed {
                line: line_no,
                message: format!("expected 4 fields separated by '|||', found {}", fields.len()),
            });
        }
        let source_id = parse_usize(fields[0], line_no, "source id")?;
        let tokens = super::corpus::tokenize(fields[1]);
        let features = parse_features(fields[2], line_no)?;
        let score = parse_real(fields[3], line_no, "model score")?;
        let hyp = Hypothesis::new(tokens, features, score);
        match groups.iter_mut().find(|(id, _)| *id == source_id) {
            Some((_, hyps)) => hyps.push(hyp),
            None => groups.push((source_id, vec![hyp])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(id, hyps)| {
            let n = hyps.len();
            NBestList::from_hypotheses(id, n, hyps)
        })
        .collect())
}
