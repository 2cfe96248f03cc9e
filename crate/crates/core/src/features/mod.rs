//! Domain types shared by the decoder, the scorers and the tuner.
//!
//! Every hypothesis carries the eleven accumulated feature values of a
//! hierarchical phrase-based system. Their order is fixed: input node `i` of
//! a network always reads feature `i` of [`canonical_order`].

mod corpus;
pub(crate) mod nbest_file;

use std::fmt;
use std::ops::Add;

use num_traits::Zero;

use crate::scalar::Scalar;

pub use corpus::{CorpusEntry, CorpusError, ParallelCorpus};
pub use nbest_file::{format_real, read_nbest, write_nbest, NBestFileError};

/// Number of features attached to every hypothesis.
pub const FEATURE_COUNT: usize = 11;

/// The eleven features, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    /// log p(target | source) of the rules used
    TransFe,
    /// log p(source | target)
    TransEf,
    /// lexical log probability, source to target
    LexFe,
    /// lexical log probability, target to source
    LexEf,
    /// language model log10 probability
    LanguageModel,
    WordCount,
    PhraseCount,
    RuleCount,
    GlueCount,
    UnknownCount,
    NullCount,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::TransFe,
        Feature::TransEf,
        Feature::LexFe,
        Feature::LexEf,
        Feature::LanguageModel,
        Feature::WordCount,
        Feature::PhraseCount,
        Feature::RuleCount,
        Feature::GlueCount,
        Feature::UnknownCount,
        Feature::NullCount,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        CANONICAL_NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        CANONICAL_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| Feature::ALL[i])
    }

    /// Count features must stay non-negative and integral.
    pub fn is_count(self) -> bool {
        self.index() >= Feature::WordCount.index()
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const CANONICAL_NAMES: [&str; FEATURE_COUNT] = [
    "p_fe", "p_ef", "lex_fe", "lex_ef", "lm", "wc", "pc", "rc", "gc", "uc", "nc",
];

/// Feature names in input-node order.
pub fn canonical_order() -> [&'static str; FEATURE_COUNT] {
    CANONICAL_NAMES
}

/// Eleven feature values in canonical order.
///
/// Only ring arithmetic is required of `S`, so exact number types work too.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector<S> {
    values: [S; FEATURE_COUNT],
}

impl<S: Clone + Zero> FeatureVector<S> {
    pub fn zero() -> Self {
        FeatureVector {
            values: std::array::from_fn(|_| S::zero()),
        }
    }

    /// A vector that is zero everywhere except `feature`.
    pub fn unit(feature: Feature, value: S) -> Self {
        let mut v = Self::zero();
        v.set(feature, value);
        v
    }

    pub fn from_slice(values: &[S]) -> Option<Self> {
        if values.len() != FEATURE_COUNT {
            return None;
        }
        Some(FeatureVector {
            values: std::array::from_fn(|i| values[i].clone()),
        })
    }
}

impl<S> FeatureVector<S> {
    pub fn new(values: [S; FEATURE_COUNT]) -> Self {
        FeatureVector { values }
    }

    pub fn get(&self, feature: Feature) -> &S {
        &self.values[feature.index()]
    }

    pub fn set(&mut self, feature: Feature, value: S) {
        self.values[feature.index()] = value;
    }

    pub fn as_slice(&self) -> &[S] {
        &self.values
    }

    pub fn values(&self) -> &[S; FEATURE_COUNT] {
        &self.values
    }

    pub fn map<T>(&self, f: impl FnMut(&S) -> T) -> FeatureVector<T> {
        FeatureVector {
            values: self.values.each_ref().map(f),
        }
    }
}

impl<S: Scalar> FeatureVector<S> {
    /// Adds `amount` to a single dimension in place.
    pub fn bump(&mut self, feature: Feature, amount: S) {
        self.values[feature.index()] += amount;
    }

    pub fn add_assign(&mut self, other: &FeatureVector<S>) {
        for (a, b) in self.values.iter_mut().zip(other.values.iter()) {
            *a += *b;
        }
    }
}

/// Elementwise sum of two feature vectors.
pub fn feature_add<S: Clone + Add<Output = S>>(
    a: &FeatureVector<S>,
    b: &FeatureVector<S>,
) -> FeatureVector<S> {
    FeatureVector {
        values: std::array::from_fn(|i| a.values[i].clone() + b.values[i].clone()),
    }
}

impl<S: Clone + Add<Output = S>> Add for FeatureVector<S> {
    type Output = FeatureVector<S>;

    fn add(self, rhs: Self) -> Self::Output {
        feature_add(&self, &rhs)
    }
}

impl<'a, S: Clone + Add<Output = S>> Add<&'a FeatureVector<S>> for &'a FeatureVector<S> {
    type Output = FeatureVector<S>;

    fn add(self, rhs: &'a FeatureVector<S>) -> Self::Output {
        feature_add(self, rhs)
    }
}

/// A candidate translation with its features and scores.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis<S> {
    pub tokens: Vec<String>,
    pub features: FeatureVector<S>,
    pub model_score: S,
    /// Sentence-level quality in `[0, 1]`; zero until evaluated.
    pub eval_score: f64,
}

impl<S> Hypothesis<S> {
    pub fn new(tokens: Vec<String>, features: FeatureVector<S>, model_score: S) -> Self {
        Hypothesis {
            tokens,
            features,
            model_score,
            eval_score: 0.0,
        }
    }

    pub fn surface(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Scored candidates for one source sentence, best model score first.
///
/// Holds at most `capacity` hypotheses, never two with the same token
/// sequence. Equal scores keep insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct NBestList<S> {
    pub source_id: usize,
    capacity: usize,
    hypotheses: Vec<Hypothesis<S>>,
}

impl<S: Scalar> NBestList<S> {
    pub fn new(source_id: usize, capacity: usize) -> Self {
        NBestList {
            source_id,
            capacity,
            hypotheses: Vec::new(),
        }
    }

    /// Builds a list from arbitrary hypotheses, applying the usual
    /// dedup/sort/truncate rules in iteration order.
    pub fn from_hypotheses(
        source_id: usize,
        capacity: usize,
        hypotheses: impl IntoIterator<Item = Hypothesis<S>>,
    ) -> Self {
        let mut list = Self::new(source_id, capacity);
        for h in hypotheses {
            list.insert(h);
        }
        list
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn hypotheses(&self) -> &[Hypothesis<S>] {
        &self.hypotheses
    }

    pub fn get(&self, index: usize) -> Option<&Hypothesis<S>> {
        self.hypotheses.get(index)
    }

    pub fn best(&self) -> Option<&Hypothesis<S>> {
        self.hypotheses.first()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Hypothesis<S>> {
        self.hypotheses.iter()
    }

    /// Inserts `hyp`, returning whether the list changed.
    ///
    /// A hypothesis whose tokens are already present replaces the existing
    /// copy only if it scores strictly higher.
    pub fn insert(&mut self, hyp: Hypothesis<S>) -> bool {
        if self.capacity == 0 {
            return false;
        }
        if let Some(pos) = self.hypotheses.iter().position(|h| h.tokens == hyp.tokens) {
            if hyp.model_score > self.hypotheses[pos].model_score {
                self.hypotheses.remove(pos);
            } else {
                return false;
            }
        }
        let at = self
            .hypotheses
            .partition_point(|h| h.model_score >= hyp.model_score);
        if at >= self.capacity {
            return false;
        }
        self.hypotheses.insert(at, hyp);
        self.hypotheses.truncate(self.capacity);
        true
    }

    /// Mutable access for filling in eval scores. Model scores must not be
    /// changed through this; use [`NBestList::rescore_with`].
    pub fn eval_scores_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.hypotheses.iter_mut().map(|h| &mut h.eval_score)
    }

    /// Recomputes every model score and restores descending order. Equal
    /// scores keep their previous relative order.
    pub fn rescore_with(&mut self, mut score: impl FnMut(&FeatureVector<S>) -> S) {
        for h in &mut self.hypotheses {
            h.model_score = score(&h.features);
        }
        self.hypotheses.sort_by(|a, b| {
            b.model_score
                .partial_cmp(&a.model_score)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
    }

    pub fn into_hypotheses(self) -> Vec<Hypothesis<S>> {
        self.hypotheses
    }
}

impl<'a, S> IntoIterator for &'a NBestList<S> {
    type Item = &'a Hypothesis<S>;
    type IntoIter = std::slice::Iter<'a, Hypothesis<S>>;

    fn into_iter(self) -> Self::IntoIter {
        self.hypotheses.iter()
    }
}

/// An ordered (better, worse) hypothesis pair used for training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair<S> {
    pub source_id: usize,
    pub better: Hypothesis<S>,
    pub worse: Hypothesis<S>,
    pub weight: S,
    pub born_iteration: usize,
}

impl<S: Scalar> TrainingPair<S> {
    pub fn new(source_id: usize, better: Hypothesis<S>, worse: Hypothesis<S>) -> Self {
        TrainingPair {
            source_id,
            better,
            worse,
            weight: S::one(),
            born_iteration: 0,
        }
    }

    pub fn eval_gap(&self) -> f64 {
        self.better.eval_score - self.worse.eval_score
    }
}
