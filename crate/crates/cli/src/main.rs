//! `nlsmt`: decode, train, evaluate, compare and rescore.
//!
//! Exit codes: 0 on success, 1 on internal failures (decoding or
//! optimization), 2 on usage and resource errors (bad flags, missing or
//! malformed files).

mod config;
mod scorer;

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use nlsmt_core::decoder::{decode_corpus, rescore_nbest, DecoderConfig, Grammar, NGramLM, DEFAULT_MAX_SPAN};
use nlsmt_core::features::{read_nbest, write_nbest, NBestList, ParallelCorpus, FEATURE_COUNT};
use nlsmt_core::metrics::{bootstrap_texts, corpus_stats, BleuStats};
use nlsmt_core::network::{load_model, save_model, AnyModel, Scorer};
use nlsmt_core::tuning::{
    l1_sweep, read_pool, read_report, write_pool, write_report, Criterion, OptimizerSettings, PairPool, PwParams,
    Trainer, TrainerConfig, TrainerState, L1_SWEEP,
};
use nlsmt_core::Real;

use config::Config;
use scorer::ScorerKind;

#[derive(Parser)]
#[command(name = "nlsmt", version, about = "Hierarchical phrase-based translation with non-linear scoring")]
struct Cli {
    /// Flat key = value file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate a source file into n-best lists.
    Decode(DecodeArgs),
    /// Run iterative training on a parallel corpus.
    Train(TrainArgs),
    /// Corpus BLEU of a hypothesis file.
    Evaluate(EvaluateArgs),
    /// Bootstrap significance of system A over system B.
    Compare(CompareArgs),
    /// Re-rank an n-best file with another model.
    Rescore(RescoreArgs),
}

#[derive(Args, Default)]
struct DecodingFlags {
    #[arg(long)]
    grammar: Option<PathBuf>,
    #[arg(long)]
    lm: Option<PathBuf>,
    /// Cube-pruning pops per chart cell.
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    nbest: Option<usize>,
    /// Longest source span a non-glue rule may cover.
    #[arg(long)]
    max_span: Option<usize>,
    /// Allow dropping source words (counted in the null feature).
    #[arg(long)]
    null_rule: bool,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    decoding: DecodingFlags,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Source sentences, one per line.
    #[arg(long)]
    input: Option<PathBuf>,
    /// N-best output (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the 1-best translations here.
    #[arg(long)]
    one_best: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    decoding: DecodingFlags,
    #[arg(long)]
    source: Option<PathBuf>,
    /// Reference files, one per reference set.
    #[arg(long = "ref")]
    refs: Vec<PathBuf>,
    /// Directory for model.txt, pool.txt, report.tsv and state.txt.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// linear | standard:M | tdn | gn | gn:MAX_DEGREE
    #[arg(long)]
    scorer: Option<ScorerKind>,
    /// Start from this model instead of a seeded random one.
    #[arg(long)]
    init_model: Option<PathBuf>,
    /// br | bw | pw
    #[arg(long)]
    criterion: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Train on the newest iteration's pairs only.
    #[arg(long)]
    current_only: bool,
    #[arg(long)]
    w_current: Option<f64>,
    #[arg(long)]
    w_past: Option<f64>,
    #[arg(long)]
    pw_samples: Option<usize>,
    #[arg(long)]
    pw_threshold: Option<f64>,
    #[arg(long)]
    pw_keep: Option<usize>,
    #[arg(long)]
    max_evaluations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Feature groups for gn, e.g. "lm:4 trans:0,1 ...".
    #[arg(long)]
    grouping: Option<String>,
    /// Continue from the last completed iteration in --out-dir.
    #[arg(long)]
    resume: bool,
    /// Stop after this many rounds; continue later with --resume.
    #[arg(long)]
    rounds: Option<usize>,
    /// Pick λ by dev BLEU over --lambdas instead of training once.
    #[arg(long)]
    sweep: bool,
    /// Comma-separated L1 strengths for --sweep.
    #[arg(long)]
    lambdas: Option<String>,
    #[arg(long)]
    dev_source: Option<PathBuf>,
    #[arg(long = "dev-ref")]
    dev_refs: Vec<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    hyp: Option<PathBuf>,
    #[arg(long = "ref")]
    refs: Vec<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    hyp_a: Option<PathBuf>,
    #[arg(long)]
    hyp_b: Option<PathBuf>,
    #[arg(long = "ref")]
    refs: Vec<PathBuf>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RescoreArgs {
    #[arg(long)]
    nbest: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Errors split by exit code.
enum Failure {
    Usage(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

trait UsageExt<T> {
    fn usage(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> UsageExt<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let cfg = match &cli.config {
        Some(p) => Config::load(p).usage()?,
        None => Config::default(),
    };
    if let Some(n) = cfg.opt(cli.threads, "threads").usage()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot size the worker pool")?;
    }
    match cli.command {
        Command::Decode(a) => cmd_decode(&cfg, a),
        Command::Train(a) => cmd_train(&cfg, a),
        Command::Evaluate(a) => cmd_evaluate(&cfg, a),
        Command::Compare(a) => cmd_compare(&cfg, a),
        Command::Rescore(a) => cmd_rescore(&cfg, a),
    }
}

fn decoder_config(cfg: &Config, f: &DecodingFlags) -> Outcome<DecoderConfig> {
    let d = DecoderConfig::default();
    let config = DecoderConfig {
        beam: cfg.get(f.beam, "beam", d.beam).usage()?,
        nbest: cfg.get(f.nbest, "nbest", d.nbest).usage()?,
        null_rule: cfg.flag(f.null_rule, "null_rule").usage()?,
        synthetic_penalty: cfg.get(None, "synthetic_penalty", d.synthetic_penalty).usage()?,
        kbest_pop_limit: cfg.get(None, "kbest_pop_limit", d.kbest_pop_limit).usage()?,
    };
    if config.beam == 0 || config.nbest == 0 {
        return Err(Failure::Usage(anyhow!("beam and nbest must be positive")));
    }
    Ok(config)
}

fn load_resources(cfg: &Config, f: &DecodingFlags) -> Outcome<(Grammar<Real>, NGramLM)> {
    let gpath = cfg.required_path(f.grammar.clone(), "grammar").usage()?;
    let lpath = cfg.required_path(f.lm.clone(), "lm").usage()?;
    let max_span = cfg.get(f.max_span, "max_span", DEFAULT_MAX_SPAN).usage()?;
    let grammar = Grammar::load(&gpath)
        .with_context(|| format!("cannot load grammar {}", gpath.display()))
        .usage()?
        .with_max_span(max_span);
    let lm = NGramLM::load(&lpath)
        .with_context(|| format!("cannot load language model {}", lpath.display()))
        .usage()?;
    log::info!("grammar: {} rules, LM order {}", grammar.len(), lm.order());
    Ok((grammar, lm))
}

fn load_any_model(path: &Path) -> Outcome<AnyModel<Real>> {
    let model = load_model(path)
        .with_context(|| format!("cannot load model {}", path.display()))
        .usage()?;
    if model.input_size() != FEATURE_COUNT {
        return Err(Failure::Usage(anyhow!(
            "model {} reads {} inputs, hypotheses have {FEATURE_COUNT} features",
            path.display(),
            model.input_size()
        )));
    }
    Ok(model)
}

fn read_lines(path: &Path) -> Outcome<Vec<Vec<String>>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .usage()?;
    Ok(text.lines().map(|l| l.split_whitespace().map(str::to_string).collect()).collect())
}

/// Writes through a temporary file so a crash never leaves a half-written
/// output behind.
fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    let mut w = BufWriter::new(File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?);
    body(&mut w).and_then(|_| w.flush())?;
    drop(w);
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn output(path: Option<&Path>) -> Outcome<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display())).usage()?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn one_best(lists: &[NBestList<Real>]) -> Vec<String> {
    lists.iter().map(|nb| nb.best().map(|h| h.surface()).unwrap_or_default()).collect()
}

fn cmd_decode(cfg: &Config, a: DecodeArgs) -> Outcome {
    let (grammar, lm) = load_resources(cfg, &a.decoding)?;
    let dcfg = decoder_config(cfg, &a.decoding)?;
    let model = load_any_model(&cfg.required_path(a.model, "model").usage()?)?;
    let input = cfg.required_path(a.input, "input").usage()?;
    let sentences = read_lines(&input)?;
    let lists = decode_corpus(&sentences, &grammar, &lm, &model, &dcfg).context("decoding failed")?;
    let mut out = output(cfg.path(a.output, "output").as_deref())?;
    write_nbest(&mut out, &lists).context("cannot write n-best output")?;
    if let Some(p) = cfg.path(a.one_best, "one_best") {
        write_atomic(&p, |w| {
            for line in one_best(&lists) {
                writeln!(w, "{line}")?;
            }
            Ok(())
        })
        .usage()?;
    }
    Ok(())
}

fn parse_criterion(name: &str, pw: PwParams) -> Outcome<Criterion> {
    match name.parse::<Criterion>().usage()? {
        Criterion::Pairwise(_) => Ok(Criterion::Pairwise(pw)),
        c => Ok(c),
    }
}

fn trainer_config(cfg: &Config, a: &TrainArgs) -> Outcome<TrainerConfig> {
    let d = TrainerConfig::default();
    let pd = PwParams::default();
    let od = OptimizerSettings::default();
    let pw = PwParams {
        samples: cfg.get(a.pw_samples, "pw_samples", pd.samples).usage()?,
        threshold: cfg.get(a.pw_threshold, "pw_threshold", pd.threshold).usage()?,
        keep: cfg.get(a.pw_keep, "pw_keep", pd.keep).usage()?,
    };
    let criterion = parse_criterion(&cfg.get(a.criterion.clone(), "criterion", d.criterion.name().to_string()).usage()?, pw)?;
    let config = TrainerConfig {
        criterion,
        max_iterations: cfg.get(a.iterations, "iterations", d.max_iterations).usage()?,
        lambda: cfg.get(a.lambda, "lambda", d.lambda).usage()?,
        optimizer: OptimizerSettings {
            max_evaluations: cfg.get(a.max_evaluations, "max_evaluations", od.max_evaluations).usage()?,
            tolerance: cfg.get(a.tolerance, "tolerance", od.tolerance).usage()?,
            ..od
        },
        seed: cfg.get(a.seed, "seed", d.seed).usage()?,
        current_only: cfg.flag(a.current_only, "current_only").usage()?,
        w_current: cfg.get(a.w_current, "w_current", d.w_current).usage()?,
        w_past: cfg.get(a.w_past, "w_past", d.w_past).usage()?,
        decoder: decoder_config(cfg, &a.decoding)?,
    };
    config.validate().usage()?;
    Ok(config)
}

struct RunFiles {
    model: PathBuf,
    pool: PathBuf,
    report: PathBuf,
    state: PathBuf,
    one_best: PathBuf,
}

impl RunFiles {
    fn new(dir: &Path) -> Self {
        RunFiles {
            model: dir.join("model.txt"),
            pool: dir.join("pool.txt"),
            report: dir.join("report.tsv"),
            state: dir.join("state.txt"),
            one_best: dir.join("train.1best"),
        }
    }
}

fn save_round(files: &RunFiles, trainer: &Trainer<'_, Real, AnyModel<Real>>) -> anyhow::Result<()> {
    let state = trainer.state();
    let tmp = files.model.with_extension("tmp");
    save_model(&tmp, &state.model)?;
    fs::rename(&tmp, &files.model)?;
    write_atomic(&files.pool, |w| write_pool(w, state.pool.pairs()))?;
    write_atomic(&files.report, |w| write_report(w, &state.reports))?;
    write_atomic(&files.one_best, |w| {
        for line in one_best(trainer.last_nbest()) {
            writeln!(w, "{line}")?;
        }
        Ok(())
    })?;
    // written last: it marks the round as complete
    write_atomic(&files.state, |w| writeln!(w, "next_iteration = {}", state.iteration))?;
    Ok(())
}

fn load_state(files: &RunFiles, config: &TrainerConfig) -> Outcome<TrainerState<Real, AnyModel<Real>>> {
    let state = Config::load(&files.state).usage()?;
    let iteration: usize = state
        .opt(None, "next_iteration")
        .usage()?
        .ok_or_else(|| anyhow!("{} has no next_iteration", files.state.display()))
        .usage()?;
    let model = load_any_model(&files.model)?;
    let open = |p: &Path| -> Outcome<BufReader<File>> {
        Ok(BufReader::new(File::open(p).with_context(|| format!("cannot open {}", p.display())).usage()?))
    };
    let pairs = read_pool(open(&files.pool)?)
        .with_context(|| format!("in {}", files.pool.display()))
        .usage()?;
    let pool = PairPool::from_pairs(pairs, config.w_current, config.w_past, config.current_only).usage()?;
    let reports = read_report(open(&files.report)?).usage()?;
    if reports.len() != iteration {
        return Err(Failure::Usage(anyhow!(
            "{} has {} rows but the state says {iteration} rounds are done",
            files.report.display(),
            reports.len()
        )));
    }
    Ok(TrainerState {
        iteration,
        model,
        pool,
        reports,
    })
}

fn cmd_train(cfg: &Config, a: TrainArgs) -> Outcome {
    let config = trainer_config(cfg, &a)?;
    let (grammar, lm) = load_resources(cfg, &a.decoding)?;
    let source = cfg.required_path(a.source.clone(), "source").usage()?;
    let refs = cfg.paths(a.refs.clone(), "refs");
    if refs.is_empty() {
        return Err(Failure::Usage(anyhow!("missing references: pass --ref or set refs in the config")));
    }
    let corpus = ParallelCorpus::load(&source, &refs).usage()?;
    let out_dir = cfg.required_path(a.out_dir.clone(), "out_dir").usage()?;
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))
        .usage()?;
    let files = RunFiles::new(&out_dir);

    let init = match cfg.path(a.init_model.clone(), "init_model") {
        Some(p) => load_any_model(&p)?,
        None => {
            let kind = cfg.get(a.scorer, "scorer", ScorerKind::Standard(20)).usage()?;
            let grouping = cfg.opt(a.grouping.clone(), "grouping").usage()?;
            kind.init(grouping.as_deref(), config.seed).usage()?
        }
    };

    if cfg.flag(a.sweep, "sweep").usage()? {
        return sweep(cfg, &a, &config, &corpus, &grammar, &lm, init, &files);
    }

    let resume = cfg.flag(a.resume, "resume").usage()?;
    let mut trainer = if resume && files.state.exists() {
        let state = load_state(&files, &config)?;
        log::info!("resuming at iteration {}", state.iteration);
        Trainer::resume(config, &corpus, &grammar, &lm, state).usage()?
    } else {
        Trainer::new(config, &corpus, &grammar, &lm, init).usage()?
    };
    let mut budget = cfg.get(a.rounds, "rounds", usize::MAX).usage()?;
    while !trainer.is_done() && budget > 0 {
        budget -= 1;
        let row = trainer.step().context("training failed; the last completed round is kept on disk")?;
        println!("{row}");
        save_round(&files, &trainer).context("cannot save training state")?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    cfg: &Config,
    a: &TrainArgs,
    config: &TrainerConfig,
    corpus: &ParallelCorpus,
    grammar: &Grammar<Real>,
    lm: &NGramLM,
    init: AnyModel<Real>,
    files: &RunFiles,
) -> Outcome {
    let lambdas: Vec<f64> = match cfg.opt(a.lambdas.clone(), "lambdas").usage()? {
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad L1 strength {s:?}")))
            .collect::<anyhow::Result<_>>()
            .usage()?,
        None => L1_SWEEP.to_vec(),
    };
    let dev_source = cfg.required_path(a.dev_source.clone(), "dev_source").usage()?;
    let dev_refs = cfg.paths(a.dev_refs.clone(), "dev_refs");
    if dev_refs.is_empty() {
        return Err(Failure::Usage(anyhow!("--sweep needs --dev-ref")));
    }
    let dev = ParallelCorpus::load(&dev_source, &dev_refs).usage()?;
    let best = l1_sweep(&lambdas, corpus, &dev, grammar, lm, config, init).context("L1 sweep failed")?;
    for (l, b) in &best.scores {
        println!("{l:e}\t{b:.6}");
    }
    println!("best lambda {:e} (dev BLEU {:.4})", best.lambda, best.dev_bleu);
    save_model(&files.model, &best.model).context("cannot save the model")?;
    Ok(())
}

fn reference_sets(cfg: &Config, flag: Vec<PathBuf>, expected: usize) -> Outcome<Vec<Vec<Vec<String>>>> {
    let paths = cfg.paths(flag, "refs");
    if paths.is_empty() {
        return Err(Failure::Usage(anyhow!("missing references: pass --ref")));
    }
    let mut sets = vec![Vec::new(); expected];
    for p in &paths {
        let lines = read_lines(p)?;
        if lines.len() != expected {
            return Err(Failure::Usage(anyhow!(
                "{} has {} lines, the hypotheses have {expected}",
                p.display(),
                lines.len()
            )));
        }
        for (set, line) in sets.iter_mut().zip(lines) {
            set.push(line);
        }
    }
    Ok(sets)
}

fn cmd_evaluate(cfg: &Config, a: EvaluateArgs) -> Outcome {
    let hyps = read_lines(&cfg.required_path(a.hyp, "hyp").usage()?)?;
    let refs = reference_sets(cfg, a.refs, hyps.len())?;
    let s: BleuStats = corpus_stats(&hyps, &refs).usage()?.into_iter().sum();
    let p = s.precisions();
    println!(
        "BLEU = {:.4} ({:.4}/{:.4}/{:.4}/{:.4}, BP={:.4}, c={}, r={})",
        s.bleu(),
        p[0],
        p[1],
        p[2],
        p[3],
        s.brevity_penalty(),
        s.hyp_len,
        s.ref_len
    );
    Ok(())
}

fn cmd_compare(cfg: &Config, a: CompareArgs) -> Outcome {
    let hyp_a = read_lines(&cfg.required_path(a.hyp_a, "hyp_a").usage()?)?;
    let hyp_b = read_lines(&cfg.required_path(a.hyp_b, "hyp_b").usage()?)?;
    if hyp_a.len() != hyp_b.len() {
        return Err(Failure::Usage(anyhow!("system A has {} lines, system B {}", hyp_a.len(), hyp_b.len())));
    }
    let refs = reference_sets(cfg, a.refs, hyp_a.len())?;
    let draws = cfg.get(a.draws, "draws", 1000).usage()?;
    let seed = cfg.get(a.seed, "seed", 42).usage()?;
    let r = bootstrap_texts(&hyp_a, &hyp_b, &refs, draws, seed).usage()?;
    println!("BLEU(A) = {:.4}, BLEU(B) = {:.4}, draws = {}", r.bleu_a, r.bleu_b, r.draws);
    println!("p = {:.4}", r.p_value);
    Ok(())
}

fn cmd_rescore(cfg: &Config, a: RescoreArgs) -> Outcome {
    let path = cfg.required_path(a.nbest, "nbest").usage()?;
    let file = File::open(&path).with_context(|| format!("cannot open {}", path.display())).usage()?;
    let lists: Vec<NBestList<Real>> = read_nbest(BufReader::new(file))
        .with_context(|| format!("in {}", path.display()))
        .usage()?;
    let model = load_any_model(&cfg.required_path(a.model, "model").usage()?)?;
    let rescored: Vec<_> = lists.iter().map(|l| rescore_nbest(l, &model)).collect();
    let mut out = output(cfg.path(a.output, "output").as_deref())?;
    write_nbest(&mut out, &rescored).context("cannot write n-best output")?;
    Ok(())
}
