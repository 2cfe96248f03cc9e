use super::*;
use crate::features::{Feature, FeatureVector};
use crate::network::LinearModel;

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Unigram model where every word has the same probability.
fn uniform_lm() -> NGramLM {
    NGramLM::parse_arpa(
        "\\data\\\nngram 1=5\n\\1-grams:\n-1\t<s>\n-1\t</s>\n-1\thouse\n-1\tthe\n-1\t<unk>\n\\end\\\n",
    )
    .unwrap()
}

fn lm_weight_model() -> LinearModel<f64> {
    let mut w = FeatureVector::new([1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    w.set(Feature::LanguageModel, 1.0);
    LinearModel::new(w)
}

#[test]
fn one_word_one_rule() {
    let g: Grammar<f64> = Grammar::parse("[X] ||| maison ||| house ||| -0.5 -0.7 -0.4 -0.6").unwrap();
    let lm = uniform_lm();
    let nb = decode(&toks("maison"), 0, &g, &lm, &lm_weight_model(), &DecoderConfig::default()).unwrap();
    assert_eq!(nb.len(), 1);
    let h = nb.best().unwrap();
    assert_eq!(h.tokens, toks("house"));
    // rule features, p(house) + p(</s>), one word, one phrase, one glue
    assert_eq!(
        h.features.as_slice(),
        &[-0.5, -0.7, -0.4, -0.6, -2.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0]
    );
    assert_eq!(h.model_score, -0.5 - 0.7 - 0.4 - 0.6 - 2.0);
}

#[test]
fn unknown_word_passes_through() {
    let g: Grammar<f64> = Grammar::parse("[X] ||| maison ||| house ||| -0.5 -0.7 -0.4 -0.6").unwrap();
    let nb = decode(&toks("zorglub"), 3, &g, &uniform_lm(), &lm_weight_model(), &DecoderConfig::default()).unwrap();
    let h = nb.best().unwrap();
    assert_eq!(nb.source_id, 3);
    assert_eq!(h.tokens, toks("zorglub"));
    assert_eq!(*h.features.get(Feature::UnknownCount), 1.0);
    assert_eq!(*h.features.get(Feature::PhraseCount), 1.0);
    assert_eq!(*h.features.get(Feature::TransFe), -10.0);
}

#[test]
fn null_rule_is_optional() {
    let g: Grammar<f64> = Grammar::parse("[X] ||| la ||| the ||| -0.1 -0.1 -0.1 -0.1\n[X] ||| maison ||| house ||| -0.5 -0.7 -0.4 -0.6").unwrap();
    let lm = uniform_lm();
    let off = decode(&toks("la maison"), 0, &g, &lm, &lm_weight_model(), &DecoderConfig::default()).unwrap();
    assert_eq!(off.len(), 1);
    let cfg = DecoderConfig { null_rule: true, ..DecoderConfig::default() };
    let on = decode(&toks("la maison"), 0, &g, &lm, &lm_weight_model(), &cfg).unwrap();
    // "the house", "the", "house", ""
    assert_eq!(on.len(), 4);
    let empty = on.iter().find(|h| h.tokens.is_empty()).unwrap();
    assert_eq!(*empty.features.get(Feature::NullCount), 2.0);
}

#[test]
fn uncovered_input_is_an_error() {
    let g: Grammar<f64> = Grammar::parse("[X] ||| a [X,1] b ||| x [X,1] ||| 0 0 0 0\n[X] ||| c ||| y ||| 0 0 0 0").unwrap();
    // "a" and "b" are known words but cannot be covered on their own
    let err = decode(&toks("a"), 7, &g, &uniform_lm(), &lm_weight_model(), &DecoderConfig::default()).unwrap_err();
    assert_eq!(err, DecodeError::NoGoal { sentence: 7 });
    let nb = decode(&toks("a c b"), 0, &g, &uniform_lm(), &lm_weight_model(), &DecoderConfig::default()).unwrap();
    assert_eq!(nb.best().unwrap().tokens, toks("x y"));
}

#[test]
fn scorer_size_is_checked() {
    let g: Grammar<f64> = Grammar::parse("[X] ||| a ||| b ||| 0 0 0 0").unwrap();
    let topo = crate::network::build_standard(3, 2).unwrap();
    let p = crate::network::ModelParams::<f64>::zeros(topo);
    let err = decode(&toks("a"), 0, &g, &uniform_lm(), &p, &DecoderConfig::default()).unwrap_err();
    assert!(matches!(err, DecodeError::ScorerInput { found: 3, .. }));
}

#[test]
fn lm_feature_matches_full_sentence_score() {
    let g: Grammar<f64> = Grammar::parse(
        "[X] ||| a ||| x ||| -0.1 -0.2 -0.3 -0.4
[X] ||| a ||| y z ||| -0.2 -0.2 -0.3 -0.4
[X] ||| b ||| z ||| -0.1 -0.2 -0.3 -0.4
[X] ||| b ||| x x ||| -0.3 -0.1 -0.3 -0.4
[X] ||| a [X,1] ||| [X,1] y ||| -0.3 -0.1 -0.3 -0.4
[X] ||| [X,1] c [X,2] ||| [X,2] z [X,1] ||| -0.3 -0.1 -0.3 -0.4",
    )
    .unwrap();
    let corpus = vec![toks("x y z"), toks("z z x y"), toks("y x x z y")];
    let lm = NGramLM::train(&corpus, 3, 0.5);
    let cfg = DecoderConfig { beam: 1000, nbest: 100, ..DecoderConfig::default() };
    let nb = decode(&toks("a b c a b"), 0, &g, &lm, &lm_weight_model(), &cfg).unwrap();
    assert!(nb.len() > 10);
    for h in &nb {
        let lmf = *h.features.get(Feature::LanguageModel);
        assert!((lmf - lm.sentence_logprob(&h.tokens)).abs() < 1e-9, "{:?}", h.tokens);
        assert_eq!(*h.features.get(Feature::WordCount), h.tokens.len() as f64);
        assert_eq!(h.model_score, crate::network::score_linear(&lm_weight_model(), &h.features));
    }
    let scores: Vec<f64> = nb.iter().map(|h| h.model_score).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn rescoring_on_word_count() {
    let g: Grammar<f64> = Grammar::parse(
        "[X] ||| a ||| x ||| -0.1 -0.2 -0.3 -0.4\n[X] ||| a ||| y z ||| -0.2 -0.2 -0.3 -0.4\n[X] ||| a ||| y z w ||| -0.9 -0.2 -0.3 -0.4",
    )
    .unwrap();
    let nb = decode(&toks("a"), 0, &g, &uniform_lm(), &lm_weight_model(), &DecoderConfig::default()).unwrap();
    let same = rescore_nbest(&nb, &lm_weight_model());
    assert_eq!(same, nb);
    let wc = LinearModel::new(FeatureVector::unit(Feature::WordCount, 1.0));
    let by_len = rescore_nbest(&nb, &wc);
    let lens: Vec<usize> = by_len.iter().map(|h| h.tokens.len()).collect();
    assert_eq!(lens, vec![3, 2, 1]);
}
