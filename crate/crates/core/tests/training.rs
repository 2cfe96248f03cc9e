mod common;

use nlsmt_core::decoder::{DecoderConfig, Grammar, NGramLM};
use nlsmt_core::features::{FeatureVector, Hypothesis, ParallelCorpus, TrainingPair};
use nlsmt_core::network::{build_standard, ModelParams, TrainableModel};
use nlsmt_core::tuning::{
    optimize, pair_accuracy, read_report, train, write_report, Criterion, OptimizerSettings, Trainer, TrainerConfig,
};
use rand::Rng;

use common::*;

fn config(criterion: Criterion, iterations: usize) -> TrainerConfig {
    TrainerConfig {
        criterion,
        max_iterations: iterations,
        seed: 11,
        ..TrainerConfig::default()
    }
}

fn init() -> ModelParams<f64> {
    ModelParams::init_random(build_standard(11, 4).unwrap(), 11)
}

#[test]
fn tiny_instance_is_fitted_after_one_iteration() {
    // "a" has three translations; the reference is "y"
    let grammar: Grammar<f64> = Grammar::parse(
        "[X] ||| a ||| x ||| -0.1 -0.1 -0.1 -0.1\n[X] ||| a ||| y ||| -0.9 -0.8 -0.7 -0.6\n[X] ||| a ||| z z ||| -0.5 -0.5 -0.5 -0.5",
    )
    .unwrap();
    let lm = NGramLM::train(&[toks("x"), toks("y"), toks("z z")], 2, 0.5);
    let corpus = ParallelCorpus::from_lines(&["a"], &[vec!["y"]]).unwrap();
    let cfg = TrainerConfig {
        optimizer: OptimizerSettings {
            max_evaluations: 2000,
            ..OptimizerSettings::default()
        },
        lambda: 0.0,
        ..config(Criterion::BestVsRest, 1)
    };
    let mut trainer = Trainer::new(cfg, &corpus, &grammar, &lm, init()).unwrap();
    let first = trainer.step().unwrap().clone();
    assert_eq!(first.new_pairs, 2);
    assert_eq!(first.pair_accuracy, 1.0);
    // a one-word output has no 4-grams, so look at the 1-best directly
    trainer.step().unwrap();
    assert_eq!(trainer.last_nbest()[0].best().unwrap().tokens, toks("y"));
    assert!(trainer.is_done());
}

#[test]
fn bw_adds_at_most_one_pair_per_sentence() {
    let task = synthetic();
    let (_, reports) = train(&task.corpus, &task.grammar, &task.lm, &config(Criterion::BestVsWorst, 2), init()).unwrap();
    assert_eq!(reports.len(), 3);
    for r in &reports {
        assert!(r.new_pairs <= task.corpus.len());
    }
}

#[test]
fn reruns_give_identical_reports() {
    let task = synthetic();
    let cfg = config(Criterion::Pairwise(Default::default()), 2);
    let a = train(&task.corpus, &task.grammar, &task.lm, &cfg, init()).unwrap();
    let b = train(&task.corpus, &task.grammar, &task.lm, &cfg, init()).unwrap();
    assert_eq!(a.0, b.0);
    let mut ta = Vec::new();
    let mut tb = Vec::new();
    write_report(&mut ta, &a.1).unwrap();
    write_report(&mut tb, &b.1).unwrap();
    assert_eq!(ta, tb);
    let back = read_report(&ta[..]).unwrap();
    assert_eq!(back.len(), 3);
    assert_eq!(back[2].new_pairs, a.1[2].new_pairs);
}

#[test]
fn current_only_pool_is_the_newest_pairs() {
    let task = synthetic();
    let cfg = TrainerConfig {
        current_only: true,
        ..config(Criterion::BestVsRest, 2)
    };
    let (_, reports) = train(&task.corpus, &task.grammar, &task.lm, &cfg, init()).unwrap();
    assert!(reports.iter().all(|r| r.pool_size == r.new_pairs));
}

#[test]
fn resuming_matches_an_uninterrupted_run() {
    let task = synthetic();
    let cfg = config(Criterion::BestVsWorst, 3);
    let (model, reports) = train(&task.corpus, &task.grammar, &task.lm, &cfg, init()).unwrap();

    let mut first = Trainer::new(cfg.clone(), &task.corpus, &task.grammar, &task.lm, init()).unwrap();
    first.step().unwrap();
    first.step().unwrap();
    let state = first.into_state();
    let resumed = Trainer::resume(cfg, &task.corpus, &task.grammar, &task.lm, state).unwrap().run().unwrap();
    assert_eq!(resumed.model, model);
    // the closing row has a NaN objective, so compare bit patterns
    let key = |r: &nlsmt_core::tuning::IterationReport| (r.to_string(), r.objective.to_bits());
    assert!(resumed.reports.iter().map(key).eq(reports.iter().map(key)));
}

#[test]
fn stronger_l1_gives_smaller_norm() {
    let mut rng = rng(21);
    let planted = ModelParams::<f64>::init_random(build_standard(11, 5).unwrap(), 4)
        .with_free_params(&(0..66).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>());
    let pairs: Vec<TrainingPair<f64>> = (0..200)
        .map(|_| {
            let a: [f64; 11] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let b: [f64; 11] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let (a, b) = if planted.score_slice(&a) >= planted.score_slice(&b) { (a, b) } else { (b, a) };
            TrainingPair::new(
                0,
                Hypothesis::new(vec![], FeatureVector::new(a), 0.0),
                Hypothesis::new(vec![], FeatureVector::new(b), 0.0),
            )
        })
        .collect();
    let start = init();
    let settings = OptimizerSettings {
        max_evaluations: 1000,
        ..OptimizerSettings::default()
    };
    let strong = optimize(&pairs, &start, 0.01, &settings).unwrap().model;
    let weak = optimize(&pairs, &start, 0.00001, &settings).unwrap().model;
    assert!(strong.l1_norm() <= weak.l1_norm(), "{} > {}", strong.l1_norm(), weak.l1_norm());
    assert!(pair_accuracy(&weak, &pairs).unwrap() > 0.9);
}

#[test]
fn invalid_configs_are_rejected() {
    let task = synthetic();
    for cfg in [
        TrainerConfig { max_iterations: 0, ..TrainerConfig::default() },
        TrainerConfig { w_past: 2.0, ..TrainerConfig::default() },
        TrainerConfig { lambda: -1.0, ..TrainerConfig::default() },
        TrainerConfig {
            decoder: DecoderConfig { nbest: 1, ..DecoderConfig::default() },
            ..TrainerConfig::default()
        },
    ] {
        assert!(Trainer::new(cfg, &task.corpus, &task.grammar, &task.lm, init()).is_err());
    }
}
