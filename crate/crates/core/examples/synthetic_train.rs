//! Trains on the committed synthetic task and prints the report of each
//! run. `cargo run --release --example synthetic_train [bw|br|brc|pw] [topology]`

use std::path::{Path, PathBuf};
use std::time::Instant;

use nlsmt_core::decoder::{Grammar, NGramLM};
use nlsmt_core::features::ParallelCorpus;
use nlsmt_core::network::{build_gn, build_standard, build_tdn, FeatureGrouping, ModelParams};
use nlsmt_core::tuning::{train, Criterion, TrainerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let crit = args.first().map(String::as_str).unwrap_or("bw");
    let topo = args.get(1).map(String::as_str).unwrap_or("standard");
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic");
    let corpus = ParallelCorpus::load(&dir.join("train.src"), &[PathBuf::from(dir.join("train.ref"))])?;
    let grammar = Grammar::<f64>::load(dir.join("grammar.txt"))?;
    let lm = NGramLM::load(dir.join("lm.arpa"))?;
    let (criterion, current_only) = match crit {
        "br" => (Criterion::BestVsRest, false),
        "brc" => (Criterion::BestVsRest, true),
        "pw" => (Criterion::Pairwise(Default::default()), false),
        _ => (Criterion::BestVsWorst, false),
    };
    let config = TrainerConfig {
        criterion,
        current_only,
        max_iterations: 5,
        seed: 7,
        ..TrainerConfig::default()
    };
    let topology = match topo {
        "tdn" => build_tdn(11)?,
        "gn" => build_gn(&FeatureGrouping::standard_five(), 2)?,
        _ => build_standard(11, 20)?,
    };
    let start = Instant::now();
    let (_, reports) = train(&corpus, &grammar, &lm, &config, ModelParams::<f64>::init_random(topology, 7))?;
    for r in &reports {
        println!("{r}\t{:.6}", r.objective);
    }
    println!("{:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
