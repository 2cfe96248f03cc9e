//! The iterative training loop.
//!
//! Each round decodes the training corpus under the current model, scores
//! every n-best entry with sentence BLEU, draws pairs with the configured
//! criterion, merges them into the weighted pool and re-optimizes. After
//! `max_iterations` rounds one closing round decodes and pools under the
//! final model without optimizing, so the report shows how the last model
//! translates. Reports therefore have `max_iterations + 1` rows.

use std::fmt;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;

use crate::decoder::{decode_corpus, DecoderConfig, Grammar, NGramLM};
use crate::features::{NBestList, ParallelCorpus, TrainingPair};
use crate::metrics::{bleu_corpus, bleu_sentence};
use crate::network::TrainableModel;
use crate::scalar::Scalar;

use super::objective::pair_accuracy;
use super::optimize::{optimize, OptimizerSettings};
use super::pairs::{pair_seed, Criterion};
use super::pool::PairPool;
use super::TuningError;

/// L1 strengths tried by [`l1_sweep`] by default.
pub const L1_SWEEP: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    pub criterion: Criterion,
    /// Optimization rounds (I).
    pub max_iterations: usize,
    /// L1 strength (λ).
    pub lambda: f64,
    pub optimizer: OptimizerSettings,
    pub seed: u64,
    /// Train on the newest pairs only.
    pub current_only: bool,
    pub w_current: f64,
    pub w_past: f64,
    /// Beam and n-best size live here.
    pub decoder: DecoderConfig,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            criterion: Criterion::BestVsRest,
            max_iterations: 10,
            lambda: 1e-4,
            optimizer: OptimizerSettings::default(),
            seed: 1,
            current_only: false,
            w_current: 1.0,
            w_past: 0.1,
            decoder: DecoderConfig::default(),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TuningError> {
        let bad = |m: String| Err(TuningError::InvalidConfig(m));
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1".into());
        }
        if self.decoder.nbest < 2 {
            return bad(format!("n-best size must be at least 2, got {}", self.decoder.nbest));
        }
        if self.decoder.beam < 1 {
            return bad("beam must be at least 1".into());
        }
        if !(self.lambda >= 0.0) {
            return bad(format!("L1 strength must be non-negative, got {}", self.lambda));
        }
        if let Criterion::Pairwise(p) = &self.criterion {
            p.validate()?;
        }
        PairPool::<f64>::new(self.w_current, self.w_past, self.current_only)?;
        Ok(())
    }
}

/// One row of the training report.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    pub new_pairs: usize,
    pub pool_size: usize,
    /// Accuracy on the pool of the model leaving this round.
    pub pair_accuracy: f64,
    /// Corpus BLEU of the 1-best outputs of the model entering this round.
    pub train_bleu: f64,
    /// Objective after optimization; NaN when the round did not optimize.
    pub objective: f64,
}

impl fmt::Display for IterationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{:.6}\t{:.6}",
            self.iteration, self.new_pairs, self.pool_size, self.pair_accuracy, self.train_bleu
        )
    }
}

/// Writes `iter  new_pairs  pool_size  pair_accuracy  train_bleu` rows.
pub fn write_report<W: Write>(mut out: W, reports: &[IterationReport]) -> io::Result<()> {
    for r in reports {
        writeln!(out, "{r}")?;
    }
    out.flush()
}

/// Reads a report back; the objective column is not stored.
pub fn read_report<R: BufRead>(input: R) -> Result<Vec<IterationReport>, TuningError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| TuningError::InvalidConfig(format!("report: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || TuningError::InvalidConfig(format!("report line {}: malformed row {line:?}", i + 1));
        if f.len() != 5 {
            return Err(bad());
        }
        out.push(IterationReport {
            iteration: f[0].parse().map_err(|_| bad())?,
            new_pairs: f[1].parse().map_err(|_| bad())?,
            pool_size: f[2].parse().map_err(|_| bad())?,
            pair_accuracy: f[3].parse().map_err(|_| bad())?,
            train_bleu: f[4].parse().map_err(|_| bad())?,
            objective: f64::NAN,
        });
    }
    Ok(out)
}

/// Everything needed to continue training after a round.
#[derive(Clone, Debug)]
pub struct TrainerState<S, M> {
    /// Index of the next round to run.
    pub iteration: usize,
    pub model: M,
    pub pool: PairPool<S>,
    pub reports: Vec<IterationReport>,
}

pub struct Trainer<'a, S, M> {
    config: TrainerConfig,
    sources: Vec<Vec<String>>,
    references: Vec<Vec<Vec<String>>>,
    grammar: &'a Grammar<S>,
    lm: &'a NGramLM,
    state: TrainerState<S, M>,
    last_nbest: Vec<NBestList<S>>,
}

impl<'a, S: Scalar, M: TrainableModel<S>> Trainer<'a, S, M> {
    pub fn new(
        config: TrainerConfig,
        corpus: &ParallelCorpus,
        grammar: &'a Grammar<S>,
        lm: &'a NGramLM,
        init: M,
    ) -> Result<Self, TuningError> {
        let pool = PairPool::new(S::of(config.w_current), S::of(config.w_past), config.current_only)?;
        Self::resume(
            config,
            corpus,
            grammar,
            lm,
            TrainerState {
                iteration: 0,
                model: init,
                pool,
                reports: Vec::new(),
            },
        )
    }

    pub fn resume(
        config: TrainerConfig,
        corpus: &ParallelCorpus,
        grammar: &'a Grammar<S>,
        lm: &'a NGramLM,
        state: TrainerState<S, M>,
    ) -> Result<Self, TuningError> {
        config.validate()?;
        Ok(Trainer {
            config,
            sources: corpus.sources().map(<[String]>::to_vec).collect(),
            references: corpus.references(),
            grammar,
            lm,
            state,
            last_nbest: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn state(&self) -> &TrainerState<S, M> {
        &self.state
    }

    pub fn into_state(self) -> TrainerState<S, M> {
        self.state
    }

    /// N-best lists decoded in the latest round.
    pub fn last_nbest(&self) -> &[NBestList<S>] {
        &self.last_nbest
    }

    pub fn is_done(&self) -> bool {
        self.state.iteration > self.config.max_iterations
    }

    /// Runs one round and returns its report row.
    pub fn step(&mut self) -> Result<&IterationReport, TuningError> {
        let i = self.state.iteration;
        let mut lists = decode_corpus(
            &self.sources,
            self.grammar,
            self.lm,
            &self.state.model,
            &self.config.decoder,
        )
        .map_err(|source| TuningError::Decode { iteration: i, source })?;

        let refs = &self.references;
        lists.par_iter_mut().for_each(|nb| {
            let r = &refs[nb.source_id];
            let evals: Vec<f64> = nb.iter().map(|h| bleu_sentence(&h.tokens, r)).collect();
            for (slot, e) in nb.eval_scores_mut().zip(evals) {
                *slot = e;
            }
        });
        let one_best: Vec<Vec<String>> = lists
            .iter()
            .map(|nb| nb.best().map(|h| h.tokens.clone()).unwrap_or_default())
            .collect();
        let train_bleu = bleu_corpus(&one_best, refs)?;

        let criterion = self.config.criterion;
        let seed = self.config.seed;
        let new_pairs: Vec<TrainingPair<S>> = lists
            .par_iter()
            .map(|nb| criterion.generate(nb, pair_seed(seed, i, nb.source_id)))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect();
        let new_count = new_pairs.len();
        self.state.pool.combine(new_pairs, i);

        let mut objective = f64::NAN;
        if i < self.config.max_iterations && !self.state.pool.is_empty() {
            let r = optimize(
                self.state.pool.pairs(),
                &self.state.model,
                S::of(self.config.lambda),
                &self.config.optimizer,
            )?;
            objective = r.final_value;
            self.state.model = r.model;
        }
        let accuracy = if self.state.pool.is_empty() {
            f64::NAN
        } else {
            pair_accuracy(&self.state.model, self.state.pool.pairs())?
        };
        log::info!(
            "iteration {i}: {new_count} new pairs, pool {}, accuracy {accuracy:.4}, train BLEU {train_bleu:.4}, objective {objective:.6}",
            self.state.pool.len()
        );
        self.last_nbest = lists;
        self.state.reports.push(IterationReport {
            iteration: i,
            new_pairs: new_count,
            pool_size: self.state.pool.len(),
            pair_accuracy: accuracy,
            train_bleu,
            objective,
        });
        self.state.iteration += 1;
        Ok(self.state.reports.last().expect("just pushed"))
    }

    pub fn run(mut self) -> Result<TrainerState<S, M>, TuningError> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(self.state)
    }
}

/// Runs the full training loop and returns the final model and report.
pub fn train<S: Scalar, M: TrainableModel<S>>(
    corpus: &ParallelCorpus,
    grammar: &Grammar<S>,
    lm: &NGramLM,
    config: &TrainerConfig,
    init: M,
) -> Result<(M, Vec<IterationReport>), TuningError> {
    let state = Trainer::new(config.clone(), corpus, grammar, lm, init)?.run()?;
    Ok((state.model, state.reports))
}

#[derive(Clone, Debug)]
pub struct SweepResult<M> {
    pub lambda: f64,
    pub model: M,
    pub dev_bleu: f64,
    /// `(λ, dev BLEU)` for every strength tried.
    pub scores: Vec<(f64, f64)>,
}

/// Trains once per L1 strength and keeps the model with the best 1-best
/// BLEU on `dev`; ties go to the earlier strength.
pub fn l1_sweep<S: Scalar, M: TrainableModel<S>>(
    lambdas: &[f64],
    corpus: &ParallelCorpus,
    dev: &ParallelCorpus,
    grammar: &Grammar<S>,
    lm: &NGramLM,
    config: &TrainerConfig,
    init: M,
) -> Result<SweepResult<M>, TuningError> {
    let dev_sources: Vec<Vec<String>> = dev.sources().map(<[String]>::to_vec).collect();
    let dev_refs = dev.references();
    let mut best: Option<SweepResult<M>> = None;
    let mut scores = Vec::new();
    for &lambda in lambdas {
        let cfg = TrainerConfig {
            lambda,
            ..config.clone()
        };
        let (model, _) = train(corpus, grammar, lm, &cfg, init.clone())?;
        let lists = decode_corpus(&dev_sources, grammar, lm, &model, &cfg.decoder).map_err(|source| {
            TuningError::Decode {
                iteration: cfg.max_iterations,
                source,
            }
        })?;
        let outs: Vec<Vec<String>> = lists
            .iter()
            .map(|nb| nb.best().map(|h| h.tokens.clone()).unwrap_or_default())
            .collect();
        let bleu = bleu_corpus(&outs, &dev_refs)?;
        log::info!("lambda {lambda:e}: dev BLEU {bleu:.4}");
        scores.push((lambda, bleu));
        if best.as_ref().is_none_or(|b| bleu > b.dev_bleu) {
            best = Some(SweepResult {
                lambda,
                model,
                dev_bleu: bleu,
                scores: Vec::new(),
            });
        }
    }
    let mut best = best.ok_or_else(|| TuningError::InvalidConfig("no L1 strengths to try".into()))?;
    best.scores = scores;
    Ok(best)
}
