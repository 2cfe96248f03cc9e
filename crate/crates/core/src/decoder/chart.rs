//! CKY chart with cube pruning and lazy k-best extraction.
//!
//! Every chart item keeps all incoming hyperedges, so the chart doubles as
//! a pruned hypergraph. Each edge stores its own feature increment (rule
//! features plus the LM delta it causes), which is fixed once the tail
//! items are known; a derivation's features are the sum over its edges.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use crate::features::{Feature, FeatureVector, Hypothesis, NBestList};
use crate::network::Scorer;
use crate::scalar::Scalar;

use super::grammar::{Grammar, Lhs, Pattern, Rule, Symbol};
use super::lm::{NGramLM, BOS, EOS};
use super::{DecodeError, DecoderConfig};

type ItemId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RuleRef {
    Grammar(usize),
    Local(usize),
    Glue(usize),
    /// Virtual edge into the goal node, adding sentence boundaries.
    Goal,
}

struct Edge<S> {
    rule: RuleRef,
    tails: Vec<ItemId>,
    local: FeatureVector<S>,
}

struct Item<S> {
    left: Vec<u32>,
    right: Vec<u32>,
    len: usize,
    features: FeatureVector<S>,
    score: S,
    edges: Vec<Edge<S>>,
}

/// A grid of rule × tail-rank combinations explored lazily.
struct Cube {
    rules: Vec<RuleRef>,
    tails: Vec<Vec<ItemId>>,
}

struct Candidate<S> {
    score: S,
    seq: usize,
    cube: usize,
    idx: Vec<usize>,
    local: FeatureVector<S>,
    features: FeatureVector<S>,
    left: Vec<u32>,
    right: Vec<u32>,
    len: usize,
}

fn rank<S: Scalar>(score: S) -> f64 {
    let v = score.as_f64();
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

impl<S: Scalar> PartialEq for Candidate<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S: Scalar> Eq for Candidate<S> {}
impl<S: Scalar> PartialOrd for Candidate<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Scalar> Ord for Candidate<S> {
    // max-heap on score, earlier candidates first on ties
    fn cmp(&self, other: &Self) -> Ordering {
        rank(self.score)
            .total_cmp(&rank(other.score))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub(super) struct Chart<'a, S: Scalar, M: Scorer<S> + ?Sized> {
    grammar: &'a Grammar<S>,
    lm: &'a NGramLM,
    scorer: &'a M,
    config: &'a DecoderConfig,
    words: &'a [String],
    local_rules: Vec<Rule<S>>,
    /// Grammar rule ids per pattern, best local score first.
    sorted_rules: HashMap<&'a Pattern, Vec<RuleRef>>,
    items: Vec<Item<S>>,
    cells: HashMap<(usize, usize, Lhs), Vec<ItemId>>,
    seq: usize,
}

impl<'a, S: Scalar, M: Scorer<S> + ?Sized> Chart<'a, S, M> {
    pub(super) fn new(
        grammar: &'a Grammar<S>,
        lm: &'a NGramLM,
        scorer: &'a M,
        config: &'a DecoderConfig,
        words: &'a [String],
    ) -> Self {
        let penalty = S::of(config.synthetic_penalty);
        let mut local_rules = Vec::new();
        let mut seen = HashSet::new();
        for w in words {
            if !seen.insert(w.as_str()) {
                continue;
            }
            if !grammar.knows(w) {
                local_rules.push(Rule::unknown(w, penalty));
            }
            if config.null_rule {
                local_rules.push(Rule::null(w, penalty));
            }
        }
        let mut sorted_rules = HashMap::new();
        for p in grammar.patterns() {
            let mut ids: Vec<usize> = grammar.lookup(p).to_vec();
            let key = |id: &usize| rank(scorer.score_features(&grammar.rule(*id).local));
            ids.sort_by(|a, b| key(b).total_cmp(&key(a)));
            sorted_rules.insert(p, ids.into_iter().map(RuleRef::Grammar).collect());
        }
        Chart {
            grammar,
            lm,
            scorer,
            config,
            words,
            local_rules,
            sorted_rules,
            items: Vec::new(),
            cells: HashMap::new(),
            seq: 0,
        }
    }

    fn rule(&self, r: RuleRef) -> Option<&Rule<S>> {
        match r {
            RuleRef::Grammar(i) => Some(self.grammar.rule(i)),
            RuleRef::Local(i) => Some(&self.local_rules[i]),
            RuleRef::Glue(i) => Some(&self.grammar.glue()[i]),
            RuleRef::Goal => None,
        }
    }

    fn cell(&self, i: usize, j: usize, lhs: Lhs) -> &[ItemId] {
        self.cells.get(&(i, j, lhs)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Fills the chart and returns the goal node, whose edges lead to the
    /// complete `S` items over the whole sentence.
    pub(super) fn run(&mut self) -> Option<ItemId> {
        let n = self.words.len();
        for width in 1..=n {
            for i in 0..=n - width {
                let j = i + width;
                if width <= self.grammar.max_span {
                    let cubes = self.x_cubes(i, j);
                    self.fill(i, j, Lhs::X, cubes);
                }
                if i == 0 {
                    let cubes = self.s_cubes(j);
                    self.fill(0, j, Lhs::S, cubes);
                }
            }
        }
        let goals = self.cell(0, n, Lhs::S).to_vec();
        if goals.is_empty() {
            return None;
        }
        let mut edges = Vec::with_capacity(goals.len());
        for s in goals {
            let delta = self.boundary_delta(s);
            edges.push(Edge {
                rule: RuleRef::Goal,
                tails: vec![s],
                local: FeatureVector::unit(Feature::LanguageModel, S::of(delta)),
            });
        }
        self.items.push(Item {
            left: Vec::new(),
            right: Vec::new(),
            len: 0,
            features: FeatureVector::zero(),
            score: S::zero(),
            edges,
        });
        Some(self.items.len() - 1)
    }

    fn x_cubes(&self, i: usize, j: usize) -> Vec<Cube> {
        let mut cubes = Vec::new();
        let span = &self.words[i..j];
        for p in self.grammar.patterns() {
            let min_len = p.len();
            let has_gap = p.iter().any(Option::is_none);
            if min_len > span.len() || (!has_gap && min_len != span.len()) {
                continue;
            }
            let mut matches = Vec::new();
            match_pattern(p, span, 0, 0, &mut Vec::new(), &mut matches);
            for gaps in matches {
                let tails: Vec<Vec<ItemId>> = gaps
                    .iter()
                    .map(|&(a, b)| self.cell(i + a, i + b, Lhs::X).to_vec())
                    .collect();
                if tails.iter().any(Vec::is_empty) {
                    continue;
                }
                cubes.push(Cube {
                    rules: self.sorted_rules[p].clone(),
                    tails,
                });
            }
        }
        if j == i + 1 {
            let rules: Vec<RuleRef> = self
                .local_rules
                .iter()
                .enumerate()
                .filter(|(_, r)| matches!(&r.source[..], [Symbol::Term(w)] if *w == self.words[i]))
                .map(|(k, _)| RuleRef::Local(k))
                .collect();
            if !rules.is_empty() {
                cubes.push(Cube {
                    rules,
                    tails: Vec::new(),
                });
            }
        }
        cubes
    }

    fn s_cubes(&self, j: usize) -> Vec<Cube> {
        let mut cubes = Vec::new();
        let whole = self.cell(0, j, Lhs::X);
        if !whole.is_empty() {
            cubes.push(Cube {
                rules: vec![RuleRef::Glue(0)],
                tails: vec![whole.to_vec()],
            });
        }
        for k in 1..j {
            let left = self.cell(0, k, Lhs::S);
            let right = self.cell(k, j, Lhs::X);
            if !left.is_empty() && !right.is_empty() {
                cubes.push(Cube {
                    rules: vec![RuleRef::Glue(1)],
                    tails: vec![left.to_vec(), right.to_vec()],
                });
            }
        }
        cubes
    }

    fn candidate(&mut self, cubes: &[Cube], c: usize, idx: Vec<usize>) -> Option<Candidate<S>> {
        let cube = &cubes[c];
        let rule_ref = *cube.rules.get(idx[0])?;
        let mut tails = Vec::with_capacity(cube.tails.len());
        for (d, list) in cube.tails.iter().enumerate() {
            tails.push(*list.get(idx[d + 1])?);
        }
        let rule = self.rule(rule_ref).expect("chart rule");
        let (delta, left, right, len) = self.combine(rule, &tails);
        let mut local = rule.local.clone();
        local.bump(Feature::LanguageModel, S::of(delta));
        let mut features = local.clone();
        for &t in &tails {
            features.add_assign(&self.items[t].features);
        }
        let score = self.scorer.score_features(&features);
        self.seq += 1;
        Some(Candidate {
            score,
            seq: self.seq,
            cube: c,
            idx,
            local,
            features,
            left,
            right,
            len,
        })
    }

    /// Cube pruning for one cell: pops at most `beam` candidates, each
    /// becoming a new item or an extra edge of a recombined one.
    fn fill(&mut self, i: usize, j: usize, lhs: Lhs, cubes: Vec<Cube>) {
        let mut heap = BinaryHeap::new();
        let mut visited: HashSet<(usize, Vec<usize>)> = HashSet::new();
        for c in 0..cubes.len() {
            let idx = vec![0; cubes[c].tails.len() + 1];
            visited.insert((c, idx.clone()));
            if let Some(cand) = self.candidate(&cubes, c, idx) {
                heap.push(cand);
            }
        }
        let mut recombine: HashMap<(Vec<u32>, Vec<u32>), ItemId> = HashMap::new();
        let mut cell = Vec::new();
        let mut pops = 0;
        while pops < self.config.beam {
            let Some(cand) = heap.pop() else { break };
            pops += 1;
            let cube = &cubes[cand.cube];
            let edge = Edge {
                rule: cube.rules[cand.idx[0]],
                tails: cube
                    .tails
                    .iter()
                    .zip(&cand.idx[1..])
                    .map(|(list, &r)| list[r])
                    .collect(),
                local: cand.local,
            };
            match recombine.get(&(cand.left.clone(), cand.right.clone())) {
                Some(&id) => {
                    let item = &mut self.items[id];
                    if rank(cand.score) > rank(item.score) {
                        item.score = cand.score;
                        item.features = cand.features;
                    }
                    item.edges.push(edge);
                }
                None => {
                    let id = self.items.len();
                    recombine.insert((cand.left.clone(), cand.right.clone()), id);
                    self.items.push(Item {
                        left: cand.left,
                        right: cand.right,
                        len: cand.len,
                        features: cand.features,
                        score: cand.score,
                        edges: vec![edge],
                    });
                    cell.push(id);
                }
            }
            for d in 0..cand.idx.len() {
                let mut next = cand.idx.clone();
                next[d] += 1;
                if visited.insert((cand.cube, next.clone())) {
                    if let Some(nc) = self.candidate(&cubes, cand.cube, next) {
                        heap.push(nc);
                    }
                }
            }
        }
        let items = &self.items;
        cell.sort_by(|a, b| rank(items[*b].score).total_cmp(&rank(items[*a].score)));
        if !cell.is_empty() {
            self.cells.insert((i, j, lhs), cell);
        }
    }

    /// LM increment of applying `rule` to `tails`, and the resulting state.
    ///
    /// Words with fewer than `order - 1` words to their left inside the new
    /// item stay unscored and form its left boundary; all other words are
    /// scored here with their full context.
    fn combine(&self, rule: &Rule<S>, tails: &[ItemId]) -> (f64, Vec<u32>, Vec<u32>, usize) {
        let ctx = self.lm.order() - 1;
        let mut st = LmWalk::new(ctx);
        for sym in &rule.target {
            match sym {
                Symbol::Term(w) => st.visit(self.lm, self.lm.id(w)),
                Symbol::NonTerm(k) => {
                    let child = &self.items[tails[*k]];
                    for &w in &child.left {
                        st.visit(self.lm, w);
                    }
                    if child.len > child.left.len() {
                        st.history.clone_from(&child.right);
                        st.pos += child.len - child.left.len();
                    }
                }
            }
        }
        (st.delta, st.left, st.history, st.pos)
    }

    /// LM increment of wrapping a complete item in `<s> … </s>`.
    fn boundary_delta(&self, id: ItemId) -> f64 {
        let item = &self.items[id];
        let ctx = self.lm.order() - 1;
        let mut st = LmWalk::new(ctx);
        st.pos = ctx;
        st.push(self.lm.id(BOS));
        for &w in &item.left {
            st.visit(self.lm, w);
        }
        if item.len > item.left.len() {
            st.history.clone_from(&item.right);
        }
        st.visit(self.lm, self.lm.id(EOS));
        st.delta
    }

    /// Extracts up to `config.nbest` distinct surfaces from the goal node.
    pub(super) fn nbest(&self, goal: ItemId, source_id: usize) -> NBestList<S> {
        let mut kb = KBest::new(self.items.len());
        let mut list = NBestList::new(source_id, self.config.nbest);
        let cap = self.config.kbest_pop_limit.max(self.config.nbest);
        let mut seen = HashSet::new();
        for k in 0..cap {
            if list.len() >= self.config.nbest {
                break;
            }
            if kb.kth(self, goal, k).is_none() {
                break;
            }
            let mut tokens = Vec::new();
            self.yield_of(&kb, goal, k, &mut tokens);
            if !seen.insert(tokens.clone()) {
                continue;
            }
            let d = &kb.derivs[goal][k];
            list.insert(Hypothesis::new(tokens, d.features.clone(), d.score));
        }
        list
    }

    fn yield_of(&self, kb: &KBest<S>, v: ItemId, k: usize, out: &mut Vec<String>) {
        let d = &kb.derivs[v][k];
        let edge = &self.items[v].edges[d.edge];
        match self.rule(edge.rule) {
            None => self.yield_of(kb, edge.tails[0], d.ranks[0], out),
            Some(rule) => {
                for sym in &rule.target {
                    match sym {
                        Symbol::Term(w) => out.push(w.clone()),
                        Symbol::NonTerm(p) => self.yield_of(kb, edge.tails[*p], d.ranks[*p], out),
                    }
                }
            }
        }
    }
}

/// Left-to-right walk over a target yield, tracking LM context.
struct LmWalk {
    ctx: usize,
    pos: usize,
    history: Vec<u32>,
    left: Vec<u32>,
    delta: f64,
}

impl LmWalk {
    fn new(ctx: usize) -> Self {
        LmWalk {
            ctx,
            pos: 0,
            history: Vec::with_capacity(ctx + 1),
            left: Vec::new(),
            delta: 0.0,
        }
    }

    fn push(&mut self, w: u32) {
        self.history.push(w);
        if self.history.len() > self.ctx {
            self.history.remove(0);
        }
    }

    fn visit(&mut self, lm: &NGramLM, w: u32) {
        if self.pos >= self.ctx {
            self.delta += lm.logprob_ids(&self.history, w);
        } else {
            self.left.push(w);
        }
        self.push(w);
        self.pos += 1;
    }
}

fn match_pattern(
    pattern: &[Option<String>],
    span: &[String],
    p: usize,
    k: usize,
    gaps: &mut Vec<(usize, usize)>,
    out: &mut Vec<Vec<(usize, usize)>>,
) {
    if p == pattern.len() {
        if k == span.len() {
            out.push(gaps.clone());
        }
        return;
    }
    let rest = pattern.len() - p - 1;
    match &pattern[p] {
        Some(w) => {
            if k < span.len() && span[k] == *w {
                match_pattern(pattern, span, p + 1, k + 1, gaps, out);
            }
        }
        None => {
            for end in k + 1..=span.len().saturating_sub(rest) {
                gaps.push((k, end));
                match_pattern(pattern, span, p + 1, end, gaps, out);
                gaps.pop();
            }
        }
    }
}

struct Deriv<S> {
    edge: usize,
    ranks: Vec<usize>,
    features: FeatureVector<S>,
    score: S,
}

struct KCand<S> {
    score: S,
    seq: usize,
    edge: usize,
    ranks: Vec<usize>,
    features: FeatureVector<S>,
}

impl<S: Scalar> PartialEq for KCand<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S: Scalar> Eq for KCand<S> {}
impl<S: Scalar> PartialOrd for KCand<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Scalar> Ord for KCand<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        rank(self.score)
            .total_cmp(&rank(other.score))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Lazy k-best derivations over the chart hypergraph.
struct KBest<S> {
    derivs: Vec<Vec<Deriv<S>>>,
    cands: Vec<Option<BinaryHeap<KCand<S>>>>,
    seen: Vec<HashSet<(usize, Vec<usize>)>>,
    seq: usize,
}

impl<S: Scalar> KBest<S> {
    fn new(nodes: usize) -> Self {
        KBest {
            derivs: (0..nodes).map(|_| Vec::new()).collect(),
            cands: (0..nodes).map(|_| None).collect(),
            seen: (0..nodes).map(|_| HashSet::new()).collect(),
            seq: 0,
        }
    }

    fn make<M: Scorer<S> + ?Sized>(
        &mut self,
        chart: &Chart<'_, S, M>,
        v: ItemId,
        edge: usize,
        ranks: Vec<usize>,
    ) -> Option<KCand<S>> {
        let e = &chart.items[v].edges[edge];
        let mut features = e.local.clone();
        for (t, &r) in e.tails.iter().zip(&ranks) {
            self.kth(chart, *t, r)?;
            features.add_assign(&self.derivs[*t][r].features);
        }
        let score = chart.scorer.score_features(&features);
        self.seq += 1;
        Some(KCand {
            score,
            seq: self.seq,
            edge,
            ranks,
            features,
        })
    }

    /// Ensures the `k`-th best derivation of `v` exists, if there is one.
    fn kth<M: Scorer<S> + ?Sized>(&mut self, chart: &Chart<'_, S, M>, v: ItemId, k: usize) -> Option<()> {
        if self.cands[v].is_none() {
            let mut heap = BinaryHeap::new();
            for e in 0..chart.items[v].edges.len() {
                let ranks = vec![0; chart.items[v].edges[e].tails.len()];
                self.seen[v].insert((e, ranks.clone()));
                if let Some(c) = self.make(chart, v, e, ranks) {
                    heap.push(c);
                }
            }
            self.cands[v] = Some(heap);
        }
        while self.derivs[v].len() <= k {
            if let Some(last) = self.derivs[v].last() {
                let (edge, ranks) = (last.edge, last.ranks.clone());
                for d in 0..ranks.len() {
                    let mut next = ranks.clone();
                    next[d] += 1;
                    if self.seen[v].insert((edge, next.clone())) {
                        if let Some(c) = self.make(chart, v, edge, next) {
                            self.cands[v].as_mut().expect("initialised").push(c);
                        }
                    }
                }
            }
            let best = self.cands[v].as_mut().expect("initialised").pop()?;
            self.derivs[v].push(Deriv {
                edge: best.edge,
                ranks: best.ranks,
                features: best.features,
                score: best.score,
            });
        }
        Some(())
    }
}

pub(super) fn check_input(scorer_inputs: usize) -> Result<(), DecodeError> {
    if scorer_inputs != crate::features::FEATURE_COUNT {
        return Err(DecodeError::ScorerInput {
            expected: crate::features::FEATURE_COUNT,
            found: scorer_inputs,
        });
    }
    Ok(())
}
