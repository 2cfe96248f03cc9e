//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints one PASS/FAIL line even when the others succeed; exits non-zero
//! if any criterion fails.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nlsmt_core::decoder::{decode, DecoderConfig};
use nlsmt_core::features::{FeatureVector, Hypothesis, TrainingPair};
use nlsmt_core::metrics::{bleu_corpus, bootstrap_texts, corpus_stats, BleuStats};
use nlsmt_core::network::{
    build_gn, build_standard, build_tdn, FeatureGrouping, LinearModel, ModelParams, NetworkTopology, Scorer,
    TrainableModel,
};
use nlsmt_core::tuning::{
    generate_pairs_br, generate_pairs_bw, generate_pairs_pw, objective, objective_value, optimize_observed, train,
    Criterion, IterationReport, OptimizerSettings, PwParams, TrainerConfig,
};
use rand::Rng;

use common::*;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn read_lines(rel: &str) -> Vec<Vec<String>> {
    std::fs::read_to_string(fixture(rel)).unwrap().lines().map(toks).collect()
}

// 1 -----------------------------------------------------------------------

fn random_topology(draw: usize, rng: &mut rand_chacha::ChaCha8Rng) -> NetworkTopology {
    match draw % 3 {
        0 => build_standard(11, rng.gen_range(1..=8)).unwrap(),
        1 => build_tdn(11).unwrap(),
        _ => build_gn(&FeatureGrouping::standard_five(), rng.gen_range(2..=3)).unwrap(),
    }
}

fn random_pair(rng: &mut rand_chacha::ChaCha8Rng) -> TrainingPair<f64> {
    let mut side = || Hypothesis::new(vec![], FeatureVector::new(std::array::from_fn(|_| rng.gen_range(-2.0..2.0))), 0.0);
    let mut p = TrainingPair::new(0, side(), side());
    p.weight = rng.gen_range(0.1..1.0);
    p
}

fn gradient_check() -> Result<String, String> {
    let mut rng = rng(2015);
    let lambda = 1e-3;
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut coords = 0;
    for draw in 0..100 {
        let topo = random_topology(draw, &mut rng);
        let mut model = ModelParams::<f64>::zeros(topo);
        let theta: Vec<f64> = (0..model.free_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        model.set_free_params(&theta);
        // keep every hinge away from its kink so the objective is smooth
        // around θ
        let mut pairs = Vec::new();
        while pairs.len() < 4 {
            let p = random_pair(&mut rng);
            let v = model.score_slice(p.worse.features.as_slice()) - model.score_slice(p.better.features.as_slice()) + 1.0;
            if v.abs() > 1e-3 {
                pairs.push(p);
            }
        }
        let (_, g) = objective(&model, &pairs, lambda).map_err(|e| e.to_string())?;
        for k in 0..theta.len() {
            if theta[k].abs() < 1e-3 {
                continue;
            }
            let mut plus = theta.clone();
            plus[k] += h;
            let mut minus = theta.clone();
            minus[k] -= h;
            let fp = objective_value(&model.with_free_params(&plus), &pairs, lambda).unwrap();
            let fm = objective_value(&model.with_free_params(&minus), &pairs, lambda).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs());
            worst = worst.max(rel);
            coords += 1;
            ensure(rel <= 1e-4, || format!("draw {draw}, coordinate {k}: analytic {} vs numeric {fd}", g[k]))?;
        }
    }
    Ok(format!("100 draws, {coords} coordinates, max relative error {worst:.2e} (tolerance 1e-4)"))
}

// 2 -----------------------------------------------------------------------

fn structural_counts() -> Result<String, String> {
    let tdn = build_tdn(11).unwrap();
    ensure(tdn.hidden_size() == 55, || format!("TDN has {} hidden nodes", tdn.hidden_size()))?;
    ensure(tdn.hidden_weight_count() == 110, || format!("TDN has {} hidden weights", tdn.hidden_weight_count()))?;
    for m in 1..=40 {
        let w = build_standard(11, m).unwrap().hidden_weight_count();
        ensure(w == 11 * m, || format!("standard m = {m} has {w} hidden weights"))?;
    }
    let gn = build_gn(&FeatureGrouping::standard_five(), 2).unwrap();

    let mut rng = rng(77);
    let pairs: Vec<_> = (0..120).map(|_| random_pair(&mut rng)).collect();
    let settings = OptimizerSettings {
        // enough for a bit over 100 accepted steps
        max_evaluations: 400,
        tolerance: 0.0,
        ..OptimizerSettings::default()
    };
    let mut reports = Vec::new();
    for (name, topo) in [("TDN", tdn), ("GN", gn)] {
        let masked: Vec<(usize, usize)> = (0..topo.hidden_size())
            .flat_map(|h| (0..11).map(move |i| (h, i)))
            .filter(|&(h, i)| !topo.is_connected(h, i))
            .collect();
        let init = ModelParams::<f64>::init_random(topo, 9);
        let mut steps = 0;
        let mut leaked = None;
        optimize_observed(&pairs, &init, 1e-4, &settings, |step, m, _| {
            steps = step;
            if step <= 100 && leaked.is_none() {
                leaked = masked.iter().find(|&&(h, i)| m.hidden_weight(h, i).to_bits() != 0).copied();
            }
        })
        .map_err(|e| e.to_string())?;
        ensure(steps >= 100, || format!("{name}: optimizer stopped after {steps} steps"))?;
        ensure(leaked.is_none(), || format!("{name}: masked weight {leaked:?} became non-zero"))?;
        reports.push(format!("{name} {} masked entries", masked.len()));
    }
    Ok(format!(
        "TDN 55 nodes / 110 weights, standard 11·m for m ≤ 40, masks exactly 0 over 100 steps ({})",
        reports.join(", ")
    ))
}

// 3 -----------------------------------------------------------------------

fn pair_counts() -> Result<String, String> {
    let mut rng = rng(3);
    let params = PwParams {
        keep: 50,
        ..PwParams::default()
    };
    let spreads = [0.06, 0.1, 0.3, 1.0];
    let (mut short, mut full) = (0, 0);
    for f in 0..50 {
        let nb = random_nbest(&mut rng, f, 20, spreads[f % 4]);
        let h = nb.hypotheses();
        let best = (0..20).max_by(|&a, &b| h[a].eval_score.total_cmp(&h[b].eval_score)).unwrap();
        let worst = (0..20).min_by(|&a, &b| h[a].eval_score.total_cmp(&h[b].eval_score)).unwrap();

        let br = generate_pairs_br(&nb);
        ensure(br.len() == 19, || format!("fixture {f}: BR gave {} pairs", br.len()))?;
        ensure(br.iter().all(|p| p.better == h[best]), || format!("fixture {f}: BR pair without the best"))?;
        let bw = generate_pairs_bw(&nb);
        ensure(bw.len() == 1 && bw[0].better == h[best] && bw[0].worse == h[worst], || {
            format!("fixture {f}: BW gave {bw:?}")
        })?;

        // exhaustive: every unordered pair over the threshold, oriented
        let mut all: Vec<(usize, usize, f64)> = Vec::new();
        for a in 0..20 {
            for b in 0..20 {
                let d = h[a].eval_score - h[b].eval_score;
                if d > params.threshold {
                    all.push((a, b, d));
                }
            }
        }
        all.sort_by(|x, y| y.2.total_cmp(&x.2));
        let expect = all.len().min(50);
        let pw = generate_pairs_pw(&nb, &params, 1000 + f as u64);
        ensure(pw.len() == expect, || format!("fixture {f}: PW gave {} pairs, expected {expect}", pw.len()))?;
        let index = |x: &Hypothesis<f64>| h.iter().position(|y| y == x).unwrap();
        let got: BTreeSet<(usize, usize)> = pw.iter().map(|p| (index(&p.better), index(&p.worse))).collect();
        let want: BTreeSet<(usize, usize)> = all[..expect].iter().map(|&(a, b, _)| (a, b)).collect();
        ensure(got == want, || format!("fixture {f}: PW pairs differ from the top {expect} exhaustive pairs"))?;
        if all.len() < 50 {
            short += 1;
        } else {
            full += 1;
        }
    }
    Ok(format!("50 n-bests of size 20: BR 19, BW 1, PW = min(50, surviving) ({short} below 50, {full} capped)"))
}

// 4 -----------------------------------------------------------------------

fn decoder_exactness() -> Result<String, String> {
    let weights = [0.3, 0.2, 0.25, 0.15, 0.5, -0.1, 0.05, -0.2, 0.1, -0.5, -0.3];
    let linear = LinearModel::new(FeatureVector::new(weights));
    let mut rng = rng(44);
    let mut neural = ModelParams::<f64>::init_random(build_standard(11, 6).unwrap(), 44);
    neural.set_free_params(&(0..neural.free_len()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
    let config = DecoderConfig {
        beam: 1000,
        nbest: 1000,
        kbest_pop_limit: 1_000_000,
        ..DecoderConfig::default()
    };
    let mut summary = Vec::new();
    for toy in toys() {
        let derivs = enumerate_derivations(&toy.text, &toy.input, &toy.lm);
        let name = toy.name.as_str();
        ensure(derivs.len() <= 1000, || format!("{name}: {} derivations", derivs.len()))?;

        // oracle n-best: best derivation score per surface
        let mut best: HashMap<Vec<String>, f64> = HashMap::new();
        for d in &derivs {
            let s = dot(&weights, &d.features);
            let e = best.entry(d.tokens.clone()).or_insert(f64::NEG_INFINITY);
            *e = e.max(s);
        }
        let mut oracle: Vec<(Vec<String>, f64)> = best.into_iter().collect();
        oracle.sort_by(|a, b| b.1.total_cmp(&a.1));

        let nb = decode(&toy.input, 0, &toy.grammar, &toy.lm, &linear, &config).map_err(|e| e.to_string())?;
        ensure(nb.len() == oracle.len(), || format!("{name}: {} hypotheses, {} distinct surfaces", nb.len(), oracle.len()))?;
        ensure(nb.best().unwrap().tokens == oracle[0].0, || {
            format!("{name}: 1-best {:?}, brute force {:?}", nb.best().unwrap().tokens, oracle[0].0)
        })?;
        for (rank, (h, (_, s))) in nb.iter().zip(&oracle).enumerate() {
            ensure((h.model_score - s).abs() <= 1e-9, || format!("{name}: rank {rank} scores {} vs {s}", h.model_score))?;
        }
        for (label, list, scorer) in [
            ("linear", nb.clone(), &linear as &dyn Scorer<f64>),
            (
                "neural",
                decode(&toy.input, 0, &toy.grammar, &toy.lm, &neural, &config).map_err(|e| e.to_string())?,
                &neural as &dyn Scorer<f64>,
            ),
        ] {
            for h in list.iter() {
                let again = scorer.score_features(&h.features);
                ensure(again.to_bits() == h.model_score.to_bits(), || {
                    format!("{name}/{label}: {:?} stored {} rescored {again}", h.tokens, h.model_score)
                })?;
                let matches = derivs.iter().any(|d| {
                    d.tokens == h.tokens
                        && (5..11).all(|k| d.features[k] == h.features.as_slice()[k])
                        && (0..5).all(|k| (d.features[k] - h.features.as_slice()[k]).abs() <= 1e-9)
                });
                ensure(matches, || format!("{name}/{label}: no derivation matches {:?} {:?}", h.tokens, h.features))?;
            }
        }
        summary.push(format!("{name} {} derivations / {} surfaces", derivs.len(), oracle.len()));
    }
    Ok(summary.join(", "))
}

// 5 -----------------------------------------------------------------------

fn bleu_correctness() -> Result<String, String> {
    let refs = read_lines("synthetic/train.ref");
    let ref_sets: Vec<Vec<Vec<String>>> = refs.iter().map(|r| vec![r.clone()]).collect();
    let perfect = bleu_corpus(&refs, &ref_sets).unwrap();
    ensure(perfect == 1.0, || format!("perfect match gives {perfect}"))?;

    let hyp = read_lines("bleu/clip.hyp");
    let clip_refs = vec![vec![read_lines("bleu/clip.ref1")[0].clone(), read_lines("bleu/clip.ref2")[0].clone()]];
    let stats: BleuStats = corpus_stats(&hyp, &clip_refs).unwrap().into_iter().sum();
    ensure(stats.matches[0] == 2 && stats.totals[0] == 7, || format!("clipped unigrams {}/{}", stats.matches[0], stats.totals[0]))?;
    ensure(stats.precisions()[0] == 2.0 / 7.0, || format!("unigram precision {}", stats.precisions()[0]))?;

    let hyps = read_lines("bootstrap/a.txt");
    let refs: Vec<Vec<Vec<String>>> = read_lines("bootstrap/ref.txt").into_iter().map(|r| vec![r]).collect();
    let per = corpus_stats(&hyps, &refs).unwrap();
    let whole: BleuStats = per.iter().copied().sum();
    let mut rng = rng(5);
    for split in 0..1000 {
        let mut parts = vec![BleuStats::zero(); rng.gen_range(2..=6)];
        for s in &per {
            let k = rng.gen_range(0..parts.len());
            parts[k] += *s;
        }
        let total = parts.iter().fold(BleuStats::zero(), |a, b| a.compose(b));
        ensure(total == whole && total.bleu().to_bits() == whole.bleu().to_bits(), || format!("split {split} is not additive"))?;
    }

    let upper = |v: &Vec<String>| v.iter().map(|w| w.to_uppercase()).collect::<Vec<_>>();
    let hyps_up: Vec<_> = hyps.iter().map(upper).collect();
    let refs_up: Vec<Vec<Vec<String>>> = refs.iter().map(|set| set.iter().map(upper).collect()).collect();
    let base = bleu_corpus(&hyps, &refs).unwrap();
    for (h, r) in [(&hyps_up, &refs), (&hyps, &refs_up), (&hyps_up, &refs_up)] {
        let b = bleu_corpus(h, r).unwrap();
        ensure(b.to_bits() == base.to_bits(), || format!("uppercasing changed BLEU {base} to {b}"))?;
    }
    Ok(format!("perfect = 1.0, clipped p1 = 2/7, additivity over 1000 splits, case-insensitive (BLEU {base:.4})"))
}

// 6, 7 --------------------------------------------------------------------

fn synthetic_run(criterion: Criterion, current_only: bool, threads: Option<usize>) -> Result<(Vec<f64>, Vec<IterationReport>), String> {
    let task = synthetic();
    let config = TrainerConfig {
        criterion,
        current_only,
        max_iterations: 5,
        seed: 7,
        ..TrainerConfig::default()
    };
    let init = ModelParams::<f64>::init_random(build_standard(11, 20).unwrap(), 7);
    let run = || train(&task.corpus, &task.grammar, &task.lm, &config, init.clone());
    let (model, reports) = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(run),
        None => run(),
    }
    .map_err(|e| e.to_string())?;
    Ok((model.free_params(), reports))
}

fn same_bits(a: &(Vec<f64>, Vec<IterationReport>), b: &(Vec<f64>, Vec<IterationReport>)) -> bool {
    let row = |r: &IterationReport| (r.new_pairs, r.pool_size, r.pair_accuracy.to_bits(), r.train_bleu.to_bits(), r.objective.to_bits());
    a.0.iter().map(|v| v.to_bits()).eq(b.0.iter().map(|v| v.to_bits())) && a.1.iter().map(row).eq(b.1.iter().map(row))
}

fn training_improvement() -> Result<String, String> {
    let first = synthetic_run(Criterion::BestVsWorst, false, Some(1))?;
    let second = synthetic_run(Criterion::BestVsWorst, false, Some(1))?;
    let parallel = synthetic_run(Criterion::BestVsWorst, false, None)?;
    let reports = &first.1;
    let (start, end) = (reports[0].train_bleu, reports.last().unwrap().train_bleu);
    let accuracy = reports.last().unwrap().pair_accuracy;
    let gain = 100.0 * (end - start);
    ensure(gain >= 5.0, || format!("BLEU {:.2} -> {:.2}, gain {gain:.2} < 5", 100.0 * start, 100.0 * end))?;
    ensure(accuracy >= 0.95, || format!("final pair accuracy {accuracy:.4} < 0.95"))?;
    ensure(same_bits(&first, &second), || "two 1-thread runs differ".into())?;
    ensure(same_bits(&first, &parallel), || "1-thread and multi-thread runs differ".into())?;
    Ok(format!(
        "BW, m = 20, I = 5: BLEU {:.2} -> {:.2} (+{gain:.2}, need +5), final accuracy {accuracy:.4} (need 0.95), bit-identical reruns",
        100.0 * start,
        100.0 * end
    ))
}

fn pooled_vs_current() -> Result<String, String> {
    let (_, pooled) = synthetic_run(Criterion::BestVsRest, false, None)?;
    let (_, current) = synthetic_run(Criterion::BestVsRest, true, None)?;
    let br = pooled.last().unwrap().train_bleu;
    let brc = current.last().unwrap().train_bleu;
    ensure(current.iter().all(|r| r.pool_size == r.new_pairs), || "BR_c pool holds old pairs".into())?;
    ensure(br >= brc, || format!("BR {:.2} < BR_c {:.2}", 100.0 * br, 100.0 * brc))?;
    Ok(format!("final train BLEU BR {:.2} >= BR_c {:.2}", 100.0 * br, 100.0 * brc))
}

// 8 -----------------------------------------------------------------------

fn significance() -> Result<String, String> {
    let a = read_lines("bootstrap/a.txt");
    let b = read_lines("bootstrap/b.txt");
    let r = read_lines("bootstrap/ref.txt");
    let refs: Vec<Vec<Vec<String>>> = r.iter().map(|x| vec![x.clone()]).collect();

    let same = bootstrap_texts(&a, &a, &refs, 1000, 42).map_err(|e| e.to_string())?;
    ensure(same.p_value == 1.0, || format!("identical systems give p = {}", same.p_value))?;
    let dominant = bootstrap_texts(&r, &a, &refs, 1000, 42).map_err(|e| e.to_string())?;
    ensure(dominant.p_value == 0.0, || format!("dominant system gives p = {}", dominant.p_value))?;

    let golden: f64 = std::fs::read_to_string(fixture("bootstrap/golden_p.txt")).unwrap().trim().parse().unwrap();
    let mixed = bootstrap_texts(&a, &b, &refs, 1000, 42).map_err(|e| e.to_string())?;
    ensure(mixed.p_value == golden, || format!("mixed fixture p = {}, golden {golden}", mixed.p_value))?;
    Ok(format!(
        "identical p = 1, dominant p = 0, mixed p = {} (BLEU {:.4} vs {:.4}) equals golden",
        mixed.p_value, mixed.bleu_a, mixed.bleu_b
    ))
}

fn main() {
    let checks: [(usize, &str, f64, Check); 8] = [
        (1, "gradient correctness", 10.0, gradient_check),
        (2, "structural counts", 5.0, structural_counts),
        (3, "pair-count identities", 5.0, pair_counts),
        (4, "decoder exactness", 30.0, decoder_exactness),
        (5, "BLEU correctness", 10.0, bleu_correctness),
        (6, "end-to-end training improvement", 300.0, training_improvement),
        (7, "pooled vs current-only pairs", 600.0, pooled_vs_current),
        (8, "significance testing", 5.0, significance),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        let outcome = outcome.and_then(|m| {
            if secs <= limit {
                Ok(m)
            } else {
                Err(format!("{m}; too slow"))
            }
        });
        let (tag, detail) = match &outcome {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("criterion {id} {tag} {name}: {detail} [{secs:.2}s, limit {limit:.0}s]");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}
