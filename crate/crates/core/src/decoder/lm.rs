//! Backoff n-gram language model read from ARPA files, log10 throughout.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Log10 probability returned for words the model cannot score at all.
pub const DEFAULT_FLOOR: f64 = -99.0;

/// Id used for words outside the vocabulary when there is no `<unk>`.
pub const NO_WORD: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("cannot read language model {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("ARPA line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("ARPA file has no {0} section")]
    MissingSection(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Entry {
    prob: f64,
    backoff: f64,
}

/// A backoff n-gram model. Words are interned to `u32` ids so the decoder
/// can carry compact LM states.
#[derive(Clone, Debug)]
pub struct NGramLM {
    order: usize,
    vocab: HashMap<String, u32>,
    words: Vec<String>,
    ngrams: HashMap<Vec<u32>, Entry>,
    unk: Option<u32>,
    floor: f64,
}

impl NGramLM {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    /// Id of `word`, falling back to `<unk>` and then to [`NO_WORD`].
    pub fn id(&self, word: &str) -> u32 {
        self.vocab
            .get(word)
            .copied()
            .or(self.unk)
            .unwrap_or(NO_WORD)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    /// `log10 p(word | context)` with standard backoff. Only the last
    /// `order - 1` context ids are used.
    pub fn logprob_ids(&self, context: &[u32], word: u32) -> f64 {
        if word == NO_WORD {
            return self.floor;
        }
        let ctx = &context[context.len().saturating_sub(self.order - 1)..];
        let mut acc = 0.0;
        let mut key = Vec::with_capacity(ctx.len() + 1);
        for start in 0..=ctx.len() {
            key.clear();
            key.extend_from_slice(&ctx[start..]);
            key.push(word);
            if let Some(e) = self.ngrams.get(&key) {
                return acc + e.prob;
            }
            if start < ctx.len() {
                if let Some(e) = self.ngrams.get(&ctx[start..]) {
                    acc += e.backoff;
                }
            }
        }
        acc + self.floor
    }

    pub fn logprob(&self, context: &[&str], word: &str) -> f64 {
        let ctx: Vec<u32> = context.iter().map(|w| self.id(w)).collect();
        self.logprob_ids(&ctx, self.id(word))
    }

    /// Sum of word log-probabilities of `<s> tokens </s>`, `<s>` itself
    /// unscored.
    pub fn sentence_logprob<T: AsRef<str>>(&self, tokens: &[T]) -> f64 {
        let mut ids = vec![self.id(BOS)];
        let mut total = 0.0;
        for t in tokens.iter().map(|t| self.id(t.as_ref())).chain([self.id(EOS)]) {
            total += self.logprob_ids(&ids, t);
            ids.push(t);
        }
        total
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LmError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_arpa(&text)
    }

    pub fn parse_arpa(text: &str) -> Result<Self, LmError> {
        let mut lm = NGramLM {
            order: 0,
            vocab: HashMap::new(),
            words: Vec::new(),
            ngrams: HashMap::new(),
            unk: None,
            floor: DEFAULT_FLOOR,
        };
        let mut declared: BTreeMap<usize, usize> = BTreeMap::new();
        let mut seen_data = false;
        let mut seen_end = false;
        let mut section: Option<usize> = None;
        for (no, raw) in text.lines().enumerate() {
            let line_no = no + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| LmError::Malformed { line: line_no, message };
            if line == "\\data\\" {
                seen_data = true;
                section = None;
                continue;
            }
            if line == "\\end\\" {
                seen_end = true;
                break;
            }
            if let Some(n) = line
                .strip_prefix('\\')
                .and_then(|l| l.strip_suffix("-grams:"))
            {
                let n: usize = n.parse().map_err(|_| bad(format!("bad section header {line:?}")))?;
                if !declared.contains_key(&n) {
                    return Err(bad(format!("{n}-gram section not declared in \\data\\")));
                }
                section = Some(n);
                continue;
            }
            match section {
                None => {
                    if !seen_data {
                        // text before \data\ is ignored, as most toolkits do
                        continue;
                    }
                    let rest = line
                        .strip_prefix("ngram ")
                        .ok_or_else(|| bad(format!("expected 'ngram N=count', got {line:?}")))?;
                    let (n, c) = rest
                        .split_once('=')
                        .ok_or_else(|| bad("missing '=' in ngram count".into()))?;
                    let n: usize = n.trim().parse().map_err(|_| bad("bad n-gram order".into()))?;
                    let c: usize = c.trim().parse().map_err(|_| bad("bad n-gram count".into()))?;
                    if n == 0 {
                        return Err(bad("n-gram order must be positive".into()));
                    }
                    declared.insert(n, c);
                }
                Some(n) => {
                    let fields: Vec<&str> = line.split_whitespace().collect();
                    if fields.len() != n + 1 && fields.len() != n + 2 {
                        return Err(bad(format!(
                            "{n}-gram line needs {} or {} fields, found {}",
                            n + 1,
                            n + 2,
                            fields.len()
                        )));
                    }
                    let prob: f64 = fields[0]
                        .parse()
                        .map_err(|_| bad(format!("bad probability {:?}", fields[0])))?;
                    let backoff: f64 = match fields.get(n + 1) {
                        Some(b) => b.parse().map_err(|_| bad(format!("bad backoff {b:?}")))?,
                        None => 0.0,
                    };
                    if prob > 0.0 {
                        log::warn!("ARPA line {line_no}: positive log probability {prob}");
                    }
                    let key: Vec<u32> = fields[1..=n].iter().map(|w| lm.intern(w)).collect();
                    lm.ngrams.insert(key, Entry { prob, backoff });
                }
            }
        }
        if !seen_data {
            return Err(LmError::MissingSection("\\data\\".into()));
        }
        if !seen_end {
            return Err(LmError::MissingSection("\\end\\".into()));
        }
        if !declared.contains_key(&1) {
            return Err(LmError::MissingSection("\\1-grams:".into()));
        }
        lm.order = *declared.keys().max().expect("non-empty");
        lm.unk = lm.vocab.get(UNK).copied();
        lm.check_backoffs();
        Ok(lm)
    }

    fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.vocab.get(word) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(word.to_string());
        self.vocab.insert(word.to_string(), id);
        id
    }

    fn check_backoffs(&self) {
        let mut missing = 0usize;
        for key in self.ngrams.keys() {
            if key.len() > 1 && !self.ngrams.contains_key(&key[..key.len() - 1]) {
                missing += 1;
            }
        }
        if missing > 0 {
            log::warn!("{missing} n-grams have no entry for their context prefix");
        }
    }

    /// Trains a small model: add-`k` probabilities for every seen n-gram and
    /// backoff weights chosen so each conditional distribution sums to one.
    /// Meant for tests and toy tasks only.
    pub fn train<T: AsRef<str>>(sentences: &[Vec<T>], order: usize, k: f64) -> NGramLM {
        assert!(order >= 1 && k > 0.0);
        let mut lm = NGramLM {
            order,
            vocab: HashMap::new(),
            words: Vec::new(),
            ngrams: HashMap::new(),
            unk: None,
            floor: DEFAULT_FLOOR,
        };
        let bos = lm.intern(BOS);
        let eos = lm.intern(EOS);
        let unk = lm.intern(UNK);
        lm.unk = Some(unk);
        let padded: Vec<Vec<u32>> = sentences
            .iter()
            .map(|s| {
                let mut ids = vec![bos];
                ids.extend(s.iter().map(|w| lm.intern(w.as_ref())));
                ids.push(eos);
                ids
            })
            .collect();
        // every word but <s> can be predicted
        let v = (lm.words.len() - 1) as f64;

        // counts[n-1][ngram] for n = 1..=order, predicted word never <s>
        let mut counts: Vec<BTreeMap<Vec<u32>, f64>> = vec![BTreeMap::new(); order];
        for s in &padded {
            for i in 1..s.len() {
                for n in 1..=order.min(i + 1) {
                    *counts[n - 1].entry(s[i + 1 - n..=i].to_vec()).or_insert(0.0) += 1.0;
                }
            }
        }

        let total: f64 = counts[0].values().sum();
        for id in 0..lm.words.len() as u32 {
            let prob = if id == bos {
                DEFAULT_FLOOR
            } else {
                let c = counts[0].get(&vec![id]).copied().unwrap_or(0.0);
                ((c + k) / (total + k * v)).log10()
            };
            lm.ngrams.insert(vec![id], Entry { prob, backoff: 0.0 });
        }

        for n in 2..=order {
            let mut by_context: BTreeMap<Vec<u32>, Vec<(u32, f64)>> = BTreeMap::new();
            for (g, c) in &counts[n - 1] {
                by_context
                    .entry(g[..n - 1].to_vec())
                    .or_default()
                    .push((g[n - 1], *c));
            }
            for (ctx, followers) in by_context {
                let ctx_total: f64 = followers.iter().map(|(_, c)| c).sum();
                let mut mass = 0.0;
                let mut lower_mass = 0.0;
                let mut fresh = Vec::new();
                for (w, c) in followers {
                    let p = (c + k) / (ctx_total + k * v);
                    mass += p;
                    lower_mass += 10f64.powf(lm.logprob_ids(&ctx[1..], w));
                    let mut key = ctx.clone();
                    key.push(w);
                    fresh.push((key, p.log10()));
                }
                let left = (1.0 - mass).max(1e-12);
                let lower_left = (1.0 - lower_mass).max(1e-12);
                for (key, prob) in fresh {
                    lm.ngrams.insert(key, Entry { prob, backoff: 0.0 });
                }
                let bo = (left / lower_left).log10();
                lm.ngrams
                    .entry(ctx)
                    .or_insert(Entry { prob: DEFAULT_FLOOR, backoff: 0.0 })
                    .backoff = bo;
            }
        }
        lm
    }

    /// Serializes the model as ARPA text, n-grams sorted for stable output.
    pub fn to_arpa(&self) -> String {
        let mut by_order: Vec<Vec<(String, Entry)>> = vec![Vec::new(); self.order];
        for (key, e) in &self.ngrams {
            let words: Vec<&str> = key.iter().map(|&i| self.words[i as usize].as_str()).collect();
            by_order[key.len() - 1].push((words.join(" "), *e));
        }
        let mut out = String::from("\\data\\\n");
        for (n, list) in by_order.iter_mut().enumerate() {
            list.sort_by(|a, b| a.0.cmp(&b.0));
            let _ = writeln!(out, "ngram {}={}", n + 1, list.len());
        }
        for (n, list) in by_order.iter().enumerate() {
            let _ = writeln!(out, "\n\\{}-grams:", n + 1);
            for (words, e) in list {
                if n + 1 < self.order {
                    let _ = writeln!(out, "{}\t{}\t{}", e.prob, words, e.backoff);
                } else {
                    let _ = writeln!(out, "{}\t{}", e.prob, words);
                }
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\\data\\
ngram 1=4
ngram 2=1

\\1-grams:
-0.30103\tthe\t-0.2
-0.69897\tcat\t-0.1
-1.0\t</s>
-99\t<s>\t-0.5

\\2-grams:
-0.1\tthe cat

\\end\\
";

    #[test]
    fn direct_unigram_read() {
        let lm = NGramLM::parse_arpa(SMALL).unwrap();
        assert_eq!(lm.order(), 2);
        assert_eq!(lm.logprob(&[], "the"), -0.30103);
    }

    #[test]
    fn stored_bigram_is_used() {
        let lm = NGramLM::parse_arpa(SMALL).unwrap();
        assert_eq!(lm.logprob(&["the"], "cat"), -0.1);
    }

    #[test]
    fn missing_bigram_backs_off() {
        // backoff(cat) + p(the) = -0.1 + -0.30103
        let lm = NGramLM::parse_arpa(SMALL).unwrap();
        assert_eq!(lm.logprob(&["cat"], "the"), -0.1 + -0.30103);
        // context longer than order - 1 is truncated
        assert_eq!(lm.logprob(&["the", "cat"], "the"), -0.1 + -0.30103);
    }

    #[test]
    fn unknown_word_without_unk_hits_floor() {
        let lm = NGramLM::parse_arpa(SMALL).unwrap();
        assert_eq!(lm.logprob(&["the"], "dog"), DEFAULT_FLOOR);
        assert_eq!(lm.clone().with_floor(-7.0).logprob(&[], "dog"), -7.0);
    }

    #[test]
    fn unknown_word_maps_to_unk() {
        let text = SMALL
            .replace("ngram 1=4", "ngram 1=5")
            .replace("-1.0\t</s>", "-1.0\t</s>\n-2.5\t<unk>");
        let lm = NGramLM::parse_arpa(&text).unwrap();
        assert_eq!(lm.logprob(&[], "zebra"), -2.5);
    }

    #[test]
    fn sentence_logprob_sums_with_markers() {
        let lm = NGramLM::parse_arpa(SMALL).unwrap();
        let expected = (-0.5 + -0.30103) + -0.1 + (-0.1 + -1.0);
        assert!((lm.sentence_logprob(&["the", "cat"]) - expected).abs() < 1e-12);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(matches!(
            NGramLM::parse_arpa("\\data\\\nngram 1=1\n\\1-grams:\n-1 a\n"),
            Err(LmError::MissingSection(_))
        ));
        let err = NGramLM::parse_arpa("\\data\\\nngram 1=1\n\\1-grams:\nxyz a\n\\end\\\n").unwrap_err();
        assert!(matches!(err, LmError::Malformed { line: 4, .. }), "{err}");
        assert!(NGramLM::parse_arpa("\\data\\\nngram 1=1\n\\2-grams:\n-1 a b\n\\end\\\n").is_err());
    }

    #[test]
    fn trained_model_normalizes() {
        let corpus: Vec<Vec<&str>> = vec![
            vec!["a", "b", "c"],
            vec!["a", "c", "b", "a"],
            vec!["b", "b", "c"],
        ];
        for order in 1..=3 {
            let lm = NGramLM::train(&corpus, order, 0.5);
            let contexts: [&[&str]; 4] = [&[], &["a"], &["<s>", "b"], &["c", "c"]];
            for ctx in contexts {
                let total: f64 = ["a", "b", "c", "</s>", "<unk>"]
                    .iter()
                    .map(|w| 10f64.powf(lm.logprob(ctx, w)))
                    .sum();
                assert!((total - 1.0).abs() < 1e-9, "order {order} ctx {ctx:?}: {total}");
            }
        }
    }

    #[test]
    fn arpa_round_trip_is_exact() {
        let corpus = vec![vec!["x", "y"], vec!["y", "x", "x"]];
        let lm = NGramLM::train(&corpus, 3, 1.0);
        let back = NGramLM::parse_arpa(&lm.to_arpa()).unwrap();
        for ctx in [vec![], vec!["x"], vec!["<s>", "y"], vec!["y", "x"]] {
            for w in ["x", "y", "</s>", "q"] {
                assert_eq!(lm.logprob(&ctx, w), back.logprob(&ctx, w));
            }
        }
    }
}
