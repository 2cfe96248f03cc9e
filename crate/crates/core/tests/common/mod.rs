//! Helpers shared by the integration tests: fixture loading, an independent
//! brute-force derivation enumerator for small grammars and random n-best
//! lists.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use nlsmt_core::decoder::{Grammar, NGramLM};
use nlsmt_core::features::{FeatureVector, Hypothesis, NBestList, ParallelCorpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

pub struct Synthetic {
    pub corpus: ParallelCorpus,
    pub grammar: Grammar<f64>,
    pub lm: NGramLM,
}

pub fn synthetic() -> Synthetic {
    Synthetic {
        corpus: ParallelCorpus::load(&fixture("synthetic/train.src"), &[fixture("synthetic/train.ref")]).unwrap(),
        grammar: Grammar::load(fixture("synthetic/grammar.txt")).unwrap(),
        lm: NGramLM::load(fixture("synthetic/lm.arpa")).unwrap(),
    }
}

pub struct Toy {
    pub name: String,
    pub text: String,
    pub grammar: Grammar<f64>,
    pub input: Vec<String>,
    pub lm: NGramLM,
}

pub fn toys() -> Vec<Toy> {
    let lm = NGramLM::load(fixture("toy/lm.arpa")).unwrap();
    (1..=3)
        .map(|k| {
            let text = std::fs::read_to_string(fixture(&format!("toy/grammar{k}.txt"))).unwrap();
            let input = std::fs::read_to_string(fixture(&format!("toy/input{k}.txt"))).unwrap();
            Toy {
                name: format!("toy{k}"),
                grammar: Grammar::parse(&text).unwrap(),
                text,
                input: toks(&input),
                lm: lm.clone(),
            }
        })
        .collect()
}

// Brute force -----------------------------------------------------------

#[derive(Clone, Debug)]
enum Sym {
    T(String),
    N(usize),
}

#[derive(Clone, Debug)]
struct ToyRule {
    src: Vec<Sym>,
    tgt: Vec<Sym>,
    probs: [f64; 4],
}

/// One complete derivation with its feature vector worked out by hand:
/// probabilities summed over rules, LM on the finished sentence, counts
/// from rule applications.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub tokens: Vec<String>,
    pub features: [f64; 11],
}

fn parse_side(s: &str) -> Vec<Sym> {
    s.split_whitespace()
        .map(|t| match t.strip_prefix("[X,").and_then(|r| r.strip_suffix(']')) {
            Some(k) => Sym::N(k.parse::<usize>().unwrap() - 1),
            None => Sym::T(t.to_string()),
        })
        .collect()
}

fn parse_rules(text: &str) -> Vec<ToyRule> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split("|||").map(str::trim).collect();
            assert_eq!(f[0], "[X]");
            let p: Vec<f64> = f[3].split_whitespace().map(|v| v.parse().unwrap()).collect();
            ToyRule {
                src: parse_side(f[1]),
                tgt: parse_side(f[2]),
                probs: [p[0], p[1], p[2], p[3]],
            }
        })
        .collect()
}

// feature slots
const WC: usize = 5;
const PC: usize = 6;
const RC: usize = 7;
const GC: usize = 8;
const UC: usize = 9;
const LM: usize = 4;

struct Enumerator<'a> {
    rules: Vec<ToyRule>,
    words: &'a [String],
    known: HashSet<String>,
    max_span: usize,
    memo: HashMap<(usize, usize), Vec<Derivation>>,
}

impl Enumerator<'_> {
    fn x(&mut self, i: usize, j: usize) -> Vec<Derivation> {
        if let Some(d) = self.memo.get(&(i, j)) {
            return d.clone();
        }
        let mut out = Vec::new();
        if j - i <= self.max_span {
            if j == i + 1 && !self.known.contains(&self.words[i]) {
                let mut f = [0.0; 11];
                f[..4].copy_from_slice(&[-10.0; 4]);
                f[WC] = 1.0;
                f[PC] = 1.0;
                f[UC] = 1.0;
                out.push(Derivation {
                    tokens: vec![self.words[i].clone()],
                    features: f,
                });
            }
            for r in self.rules.clone() {
                let mut splits = Vec::new();
                self.match_src(&r.src, 0, i, j, &mut Vec::new(), &mut splits);
                for gaps in splits {
                    let children: Vec<Vec<Derivation>> = gaps.iter().map(|&(a, b)| self.x(a, b)).collect();
                    for combo in product(&children) {
                        let mut f = [0.0; 11];
                        for k in 0..4 {
                            f[k] = r.probs[k];
                        }
                        let mut tokens = Vec::new();
                        for s in &r.tgt {
                            match s {
                                Sym::T(w) => {
                                    tokens.push(w.clone());
                                    f[WC] += 1.0;
                                }
                                Sym::N(k) => tokens.extend(combo[*k].tokens.iter().cloned()),
                            }
                        }
                        f[if gaps.is_empty() { PC } else { RC }] += 1.0;
                        for c in &combo {
                            for k in 0..11 {
                                f[k] += c.features[k];
                            }
                        }
                        out.push(Derivation { tokens, features: f });
                    }
                }
            }
        }
        self.memo.insert((i, j), out.clone());
        out
    }

    /// All ways to lay `src[k..]` over `words[pos..end]`; gaps are recorded
    /// in link order.
    fn match_src(&self, src: &[Sym], k: usize, pos: usize, end: usize, gaps: &mut Vec<(usize, usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if k == src.len() {
            if pos == end {
                let mut g = gaps.clone();
                g.sort();
                out.push(g.into_iter().map(|(_, a, b)| (a, b)).collect());
            }
            return;
        }
        match &src[k] {
            Sym::T(w) => {
                if pos < end && &self.words[pos] == w {
                    self.match_src(src, k + 1, pos + 1, end, gaps, out);
                }
            }
            Sym::N(link) => {
                for stop in pos + 1..=end {
                    gaps.push((*link, pos, stop));
                    self.match_src(src, k + 1, stop, end, gaps, out);
                    gaps.pop();
                }
            }
        }
    }
}

fn product(sets: &[Vec<Derivation>]) -> Vec<Vec<Derivation>> {
    let mut acc: Vec<Vec<Derivation>> = vec![Vec::new()];
    for set in sets {
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                set.iter().map(move |d| {
                    let mut p = prefix.clone();
                    p.push(d.clone());
                    p
                })
            })
            .collect();
    }
    acc
}

/// Every derivation of `words` under the rules in `grammar_text` plus the
/// two glue rules and unknown-word passthrough.
pub fn enumerate_derivations(grammar_text: &str, words: &[String], lm: &NGramLM) -> Vec<Derivation> {
    let rules = parse_rules(grammar_text);
    let known = rules
        .iter()
        .flat_map(|r| r.src.iter())
        .filter_map(|s| match s {
            Sym::T(w) => Some(w.clone()),
            Sym::N(_) => None,
        })
        .collect();
    let mut e = Enumerator {
        rules,
        words,
        known,
        max_span: 10,
        memo: HashMap::new(),
    };
    let n = words.len();
    // s[j]: derivations of the glued prefix words[0..j]
    let mut s: Vec<Vec<Derivation>> = vec![Vec::new(); n + 1];
    for j in 1..=n {
        let mut here: Vec<Derivation> = e
            .x(0, j)
            .into_iter()
            .map(|mut d| {
                d.features[GC] += 1.0;
                d
            })
            .collect();
        for k in 1..j {
            for left in s[k].clone() {
                for right in e.x(k, j) {
                    let mut d = left.clone();
                    d.tokens.extend(right.tokens.iter().cloned());
                    for q in 0..11 {
                        d.features[q] += right.features[q];
                    }
                    d.features[GC] += 1.0;
                    here.push(d);
                }
            }
        }
        s[j] = here;
    }
    let mut all = std::mem::take(&mut s[n]);
    for d in &mut all {
        d.features[LM] = lm.sentence_logprob(&d.tokens);
    }
    all
}

pub fn dot(w: &[f64; 11], f: &[f64]) -> f64 {
    w.iter().zip(f).map(|(a, b)| a * b).sum()
}

// Random n-best lists -----------------------------------------------------

/// `n` hypotheses with distinct surfaces, random features and distinct eval
/// scores drawn from `[0, spread)`.
pub fn random_nbest(rng: &mut ChaCha8Rng, source_id: usize, n: usize, spread: f64) -> NBestList<f64> {
    let mut evals: Vec<f64> = Vec::new();
    while evals.len() < n {
        let e = rng.gen_range(0.0..spread);
        if evals.iter().all(|&x| x != e) {
            evals.push(e);
        }
    }
    let hyps = evals.into_iter().enumerate().map(|(i, e)| {
        let f: [f64; 11] = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
        let mut h = Hypothesis::new(vec![format!("w{i}")], FeatureVector::new(f), rng.gen_range(-5.0..5.0));
        h.eval_score = e;
        h
    });
    NBestList::from_hypotheses(source_id, n, hyps)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
