use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("sentence {index}: empty source sentence")]
    EmptySource { index: usize },
    #[error("sentence {index}: no reference translation")]
    NoReference { index: usize },
    #[error("sentence {index}: reference {reference} is empty")]
    EmptyReference { index: usize, reference: usize },
    #[error("{path} has {found} lines, expected {expected}")]
    LineCount {
        path: PathBuf,
        found: usize,
        expected: usize,
    },
}

/// A source sentence with one or more reference translations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusEntry {
    pub source: Vec<String>,
    pub references: Vec<Vec<String>>,
}

/// Training or test data: tokenized sources, each with at least one
/// non-empty reference.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParallelCorpus {
    entries: Vec<CorpusEntry>,
}

pub(crate) fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_string).collect()
}

fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text.lines().map(str::to_string).collect())
}

impl ParallelCorpus {
    pub fn new(entries: Vec<CorpusEntry>) -> Result<Self, CorpusError> {
        for (index, e) in entries.iter().enumerate() {
            if e.source.is_empty() {
                return Err(CorpusError::EmptySource { index });
            }
            if e.references.is_empty() {
                return Err(CorpusError::NoReference { index });
            }
            if let Some(reference) = e.references.iter().position(Vec::is_empty) {
                return Err(CorpusError::EmptyReference { index, reference });
            }
        }
        Ok(ParallelCorpus { entries })
    }

    /// Builds a corpus from whitespace-tokenized lines.
    pub fn from_lines<S: AsRef<str>>(
        sources: &[S],
        references: &[Vec<S>],
    ) -> Result<Self, CorpusError> {
        let entries = sources
            .iter()
            .enumerate()
            .map(|(i, src)| CorpusEntry {
                source: tokenize(src.as_ref()),
                references: references
                    .iter()
                    .map(|set| set.get(i).map(|r| tokenize(r.as_ref())).unwrap_or_default())
                    .collect(),
            })
            .collect();
        Self::new(entries)
    }

    /// Reads a source file and one file per reference set, all one sentence
    /// per line.
    pub fn load(source: &Path, references: &[PathBuf]) -> Result<Self, CorpusError> {
        let sources = read_lines(source)?;
        let mut ref_sets = Vec::with_capacity(references.len());
        for path in references {
            let lines = read_lines(path)?;
            if lines.len() != sources.len() {
                return Err(CorpusError::LineCount {
                    path: path.clone(),
                    found: lines.len(),
                    expected: sources.len(),
                });
            }
            ref_sets.push(lines);
        }
        Self::from_lines(&sources, &ref_sets)
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &[String]> {
        self.entries.iter().map(|e| e.source.as_slice())
    }

    pub fn references(&self) -> Vec<Vec<Vec<String>>> {
        self.entries.iter().map(|e| e.references.clone()).collect()
    }
}
