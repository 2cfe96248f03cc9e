//! Regenerates the synthetic training task under
//! `tests/fixtures/synthetic/`.
//!
//! Each of 20 source words has one good and four bad single-word
//! translations. In the (p_fe, p_ef) plane the good option sits at
//! `c + u` and the bad ones at `c + t·v` with `u = (1, 1)/√2`,
//! `v = (1, -1)/√2`, `t ∈ {±1, ±2}`, so only weights leaning towards `u`
//! pick the good word. Lexical scores are noise and the LM is trained on
//! uniformly mixed options, so neither gives the answer away. A few
//! hierarchical rules reuse the same scheme over two-word patterns.
//!
//! Run with `cargo run -p nlsmt-core --example make_synthetic`.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use nlsmt_core::decoder::NGramLM;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: usize = 20;
const SENTENCES: usize = 50;
const LM_SENTENCES: usize = 200;

fn options(w: usize) -> [String; 5] {
    [
        format!("g{w:02}"),
        format!("b{w:02}a"),
        format!("b{w:02}b"),
        format!("b{w:02}c"),
        format!("b{w:02}d"),
    ]
}

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic");
    fs::create_dir_all(&dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20_151);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = -1.5;
    let offsets = [(s, s), (s, -s), (-s, s), (2.0 * s, -2.0 * s), (-2.0 * s, 2.0 * s)];

    let mut grammar = String::from("# synthetic task: g* words are correct, b* words are distractors\n");
    let lex = |rng: &mut ChaCha8Rng| (rng.gen_range(-1.5..-0.5), rng.gen_range(-1.5..-0.5));
    for w in 0..WORDS {
        for (opt, (du, dv)) in options(w).iter().zip(offsets) {
            let (l1, l2) = lex(&mut rng);
            writeln!(
                grammar,
                "[X] ||| f{w:02} ||| {opt} ||| {:.4} {:.4} {l1:.4} {l2:.4}",
                c + du,
                c + dv
            )
            .unwrap();
        }
    }
    // hierarchical rules over "f_a X f_b"
    for k in 0..4 {
        let a = 2 * k;
        let b = 2 * k + 1;
        for (i, (du, dv)) in offsets.iter().enumerate().take(3) {
            let (l1, l2) = lex(&mut rng);
            let (ta, tb) = (&options(a)[i], &options(b)[i]);
            writeln!(
                grammar,
                "[X] ||| f{a:02} [X,1] f{b:02} ||| {ta} [X,1] {tb} ||| {:.4} {:.4} {l1:.4} {l2:.4}",
                c + du,
                c + dv
            )
            .unwrap();
        }
    }
    fs::write(dir.join("grammar.txt"), grammar)?;

    let mut src = String::new();
    let mut refs = String::new();
    for _ in 0..SENTENCES {
        let len = rng.gen_range(3..=6);
        let ws: Vec<usize> = (0..len).map(|_| rng.gen_range(0..WORDS)).collect();
        let f: Vec<String> = ws.iter().map(|w| format!("f{w:02}")).collect();
        let e: Vec<String> = ws.iter().map(|w| options(*w)[0].clone()).collect();
        writeln!(src, "{}", f.join(" ")).unwrap();
        writeln!(refs, "{}", e.join(" ")).unwrap();
    }
    fs::write(dir.join("train.src"), src)?;
    fs::write(dir.join("train.ref"), refs)?;

    let lm_text: Vec<Vec<String>> = (0..LM_SENTENCES)
        .map(|_| {
            let len = rng.gen_range(3..=6);
            (0..len)
                .map(|_| options(rng.gen_range(0..WORDS)).choose(&mut rng).unwrap().clone())
                .collect()
        })
        .collect();
    let lm = NGramLM::train(&lm_text, 3, 0.1);
    fs::write(dir.join("lm.arpa"), lm.to_arpa())?;

    // small English LM shared by the hand-written toy grammars
    let toy: Vec<Vec<&str>> = [
        "the black cat sleeps",
        "the cat is sleeping",
        "the house of stone",
        "the stone house",
        "a house of peter",
        "the dark cat sleeps",
        "it sleeps",
        "the cat sees the house",
        "a red bird sings",
        "the bird sings a song",
        "peter sees a red house",
    ]
    .iter()
    .map(|s| s.split_whitespace().collect())
    .collect();
    let toy_dir = dir.parent().unwrap().join("toy");
    fs::create_dir_all(&toy_dir)?;
    fs::write(toy_dir.join("lm.arpa"), NGramLM::train(&toy, 3, 0.5).to_arpa())?;
    Ok(())
}
