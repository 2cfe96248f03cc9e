//! Synchronous CFG rules and the rule-file reader.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::features::{Feature, FeatureVector};
use crate::scalar::Scalar;

/// Largest source span a non-glue rule may cover by default.
pub const DEFAULT_MAX_SPAN: usize = 10;

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("cannot read grammar {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("grammar line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lhs {
    X,
    S,
}

impl fmt::Display for Lhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lhs::X => "X",
            Lhs::S => "S",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleKind {
    InitialPhrase,
    Hierarchical,
    Glue,
    /// Copies an unknown source word to the output.
    Unknown,
    /// Deletes a source word.
    Null,
}

/// Right-hand-side symbol. Nonterminals carry their link index, numbered
/// by order of appearance on the source side.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Symbol {
    Term(String),
    NonTerm(usize),
}

/// Source side with gaps anonymised; the key of the rule index.
pub type Pattern = Vec<Option<String>>;

#[derive(Clone, Debug, PartialEq)]
pub struct Rule<S> {
    pub lhs: Lhs,
    pub source: Vec<Symbol>,
    pub target: Vec<Symbol>,
    /// Rule-local feature increments: the four translation log
    /// probabilities, target word count and the rule-type counter.
    pub local: FeatureVector<S>,
    pub kind: RuleKind,
}

impl<S: Scalar> Rule<S> {
    fn build(lhs: Lhs, source: Vec<Symbol>, target: Vec<Symbol>, probs: [S; 4], kind: RuleKind) -> Self {
        let mut local = FeatureVector::zero();
        for (f, p) in [Feature::TransFe, Feature::TransEf, Feature::LexFe, Feature::LexEf]
            .into_iter()
            .zip(probs)
        {
            local.set(f, p);
        }
        let words = target.iter().filter(|s| matches!(s, Symbol::Term(_))).count();
        local.set(Feature::WordCount, S::of(words as f64));
        let counter = match kind {
            RuleKind::InitialPhrase | RuleKind::Unknown | RuleKind::Null => Feature::PhraseCount,
            RuleKind::Hierarchical => Feature::RuleCount,
            RuleKind::Glue => Feature::GlueCount,
        };
        local.bump(counter, S::one());
        match kind {
            RuleKind::Unknown => local.bump(Feature::UnknownCount, S::one()),
            RuleKind::Null => local.bump(Feature::NullCount, S::one()),
            _ => {}
        }
        Rule {
            lhs,
            source,
            target,
            local,
            kind,
        }
    }

    pub fn arity(&self) -> usize {
        self.source
            .iter()
            .filter(|s| matches!(s, Symbol::NonTerm(_)))
            .count()
    }

    pub fn pattern(&self) -> Pattern {
        self.source
            .iter()
            .map(|s| match s {
                Symbol::Term(w) => Some(w.clone()),
                Symbol::NonTerm(_) => None,
            })
            .collect()
    }

    /// `S → ⟨X1, X1⟩` and `S → ⟨S1 X2, S1 X2⟩`, with zero probabilities.
    pub fn glue_rules() -> [Rule<S>; 2] {
        let z = [S::zero(); 4];
        [
            Rule::build(Lhs::S, vec![Symbol::NonTerm(0)], vec![Symbol::NonTerm(0)], z, RuleKind::Glue),
            Rule::build(
                Lhs::S,
                vec![Symbol::NonTerm(0), Symbol::NonTerm(1)],
                vec![Symbol::NonTerm(0), Symbol::NonTerm(1)],
                z,
                RuleKind::Glue,
            ),
        ]
    }

    /// Passthrough rule for an unknown word; each probability feature
    /// carries `penalty`.
    pub fn unknown(word: &str, penalty: S) -> Rule<S> {
        Rule::build(
            Lhs::X,
            vec![Symbol::Term(word.to_string())],
            vec![Symbol::Term(word.to_string())],
            [penalty; 4],
            RuleKind::Unknown,
        )
    }

    /// Deletion rule for `word`.
    pub fn null(word: &str, penalty: S) -> Rule<S> {
        Rule::build(
            Lhs::X,
            vec![Symbol::Term(word.to_string())],
            Vec::new(),
            [penalty; 4],
            RuleKind::Null,
        )
    }
}

impl<S: Scalar> fmt::Display for Rule<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |syms: &[Symbol]| {
            syms.iter()
                .map(|s| match s {
                    Symbol::Term(w) => w.clone(),
                    Symbol::NonTerm(i) => {
                        let cat = if self.kind == RuleKind::Glue && *i == 0 && self.source.len() == 2 {
                            "S"
                        } else {
                            "X"
                        };
                        format!("[{cat},{}]", i + 1)
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let p = self.local.as_slice();
        write!(
            f,
            "[{}] ||| {} ||| {} ||| {} {} {} {}",
            self.lhs,
            side(&self.source),
            side(&self.target),
            p[0],
            p[1],
            p[2],
            p[3]
        )
    }
}

/// Rules indexed by source pattern, plus the two glue rules.
#[derive(Clone, Debug)]
pub struct Grammar<S> {
    rules: Vec<Rule<S>>,
    index: HashMap<Pattern, Vec<usize>>,
    /// Distinct patterns in first-seen order.
    patterns: Vec<Pattern>,
    source_vocab: HashSet<String>,
    glue: [Rule<S>; 2],
    pub max_span: usize,
}

impl<S: Scalar> Grammar<S> {
    pub fn new(rules: Vec<Rule<S>>) -> Self {
        let mut g = Grammar {
            rules: Vec::new(),
            index: HashMap::new(),
            patterns: Vec::new(),
            source_vocab: HashSet::new(),
            glue: Rule::glue_rules(),
            max_span: DEFAULT_MAX_SPAN,
        };
        for r in rules {
            g.push(r);
        }
        g
    }

    fn push(&mut self, rule: Rule<S>) {
        let pattern = rule.pattern();
        for w in pattern.iter().flatten() {
            self.source_vocab.insert(w.clone());
        }
        let id = self.rules.len();
        self.rules.push(rule);
        self.index
            .entry(pattern.clone())
            .or_insert_with(|| {
                self.patterns.push(pattern);
                Vec::new()
            })
            .push(id);
    }

    pub fn with_max_span(mut self, max_span: usize) -> Self {
        self.max_span = max_span;
        self
    }

    /// Number of loaded rules, glue excluded.
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rules(&self) -> &[Rule<S>] {
        &self.rules
    }

    pub fn rule(&self, id: usize) -> &Rule<S> {
        &self.rules[id]
    }

    pub fn glue(&self) -> &[Rule<S>; 2] {
        &self.glue
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    /// Ids of the rules whose source side is exactly `pattern`.
    pub fn lookup(&self, pattern: &[Option<String>]) -> &[usize] {
        self.index.get(pattern).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Whether `word` occurs as a source terminal of some rule.
    pub fn knows(&self, word: &str) -> bool {
        self.source_vocab.contains(word)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GrammarError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| GrammarError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Reads one rule per line:
    /// `[X] ||| src with [X,1] [X,2] gaps ||| tgt ||| p_fe p_ef lex_fe lex_ef`.
    /// Blank lines and `#` comments are skipped; glue rules in the file are
    /// accepted and ignored since they are always present.
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut g = Grammar::new(Vec::new());
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rule) = parse_rule(line).map_err(|message| GrammarError::Malformed {
                line: no + 1,
                message,
            })? {
                g.push(rule);
            }
        }
        Ok(g)
    }
}

fn parse_nonterminal(token: &str) -> Option<(&str, usize)> {
    let inner = token.strip_prefix('[')?.strip_suffix(']')?;
    let (cat, idx) = inner.split_once(',')?;
    Some((cat, idx.parse().ok()?))
}

fn parse_rule<S: Scalar>(line: &str) -> Result<Option<Rule<S>>, String> {
    let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 fields separated by '|||', found {}", fields.len()));
    }
    let lhs = match fields[0] {
        "[X]" => Lhs::X,
        "[S]" => Lhs::S,
        other => return Err(format!("unknown left-hand side {other:?}")),
    };
    let probs: Vec<S> = fields[3]
        .split_whitespace()
        .map(|v| v.parse::<f64>().map(S::of).map_err(|_| format!("bad probability {v:?}")))
        .collect::<Result<_, _>>()?;
    let probs: [S; 4] = probs
        .try_into()
        .map_err(|v: Vec<S>| format!("expected 4 probabilities, found {}", v.len()))?;
    for p in probs {
        if p > S::zero() {
            log::warn!("rule {line:?} has a positive log probability");
        }
    }

    // map file link indices to source-order positions
    let mut links: Vec<(usize, String)> = Vec::new();
    let mut source = Vec::new();
    for tok in fields[1].split_whitespace() {
        match parse_nonterminal(tok) {
            Some((cat, idx)) => {
                if links.iter().any(|(i, _)| *i == idx) {
                    return Err(format!("nonterminal index {idx} repeated on the source side"));
                }
                source.push(Symbol::NonTerm(links.len()));
                links.push((idx, cat.to_string()));
            }
            None => source.push(Symbol::Term(tok.to_string())),
        }
    }
    if links.len() > 2 {
        return Err(format!("rule has {} nonterminals, at most 2 are allowed", links.len()));
    }
    let mut target = Vec::new();
    let mut used = vec![false; links.len()];
    for tok in fields[2].split_whitespace() {
        match parse_nonterminal(tok) {
            Some((cat, idx)) => {
                let pos = links
                    .iter()
                    .position(|(i, _)| *i == idx)
                    .ok_or_else(|| format!("target nonterminal [{cat},{idx}] has no source counterpart"))?;
                if links[pos].1 != cat {
                    return Err(format!("nonterminal {idx} has category {} on the source side but {cat} on the target side", links[pos].1));
                }
                if used[pos] {
                    return Err(format!("nonterminal index {idx} repeated on the target side"));
                }
                used[pos] = true;
                target.push(Symbol::NonTerm(pos));
            }
            None => target.push(Symbol::Term(tok.to_string())),
        }
    }
    if used.iter().any(|u| !u) {
        return Err("nonterminal counts differ between source and target".into());
    }
    if source.is_empty() {
        return Err("empty source side".into());
    }

    match lhs {
        Lhs::S => {
            let cats: Vec<&str> = links.iter().map(|(_, c)| c.as_str()).collect();
            let glue_shape = source.iter().all(|s| matches!(s, Symbol::NonTerm(_)))
                && target == source
                && (cats == ["X"] || cats == ["S", "X"]);
            if glue_shape {
                Ok(None)
            } else {
                Err("only the two glue rules may have left-hand side [S]".into())
            }
        }
        Lhs::X => {
            if links.iter().any(|(_, c)| c != "X") {
                return Err("[X] rules may only contain [X,i] nonterminals".into());
            }
            if !source.iter().any(|s| matches!(s, Symbol::Term(_))) {
                return Err("[X] rule needs at least one source terminal".into());
            }
            let kind = if links.is_empty() {
                RuleKind::InitialPhrase
            } else {
                RuleKind::Hierarchical
            };
            Ok(Some(Rule::build(lhs, source, target, probs, kind)))
        }
    }
}
