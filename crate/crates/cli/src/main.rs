//! `procaware`: synthesize corpora, generate annotations, train, check
//! gradients, evaluate and judge.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use procaware::corpus::{
    load_corpus_dir, save_corpus_dir, synthesize_corpus, validate_corpus, write_oracle, CorpusError, SynthSpec,
    DEFAULT_FRAMES_PER_CLIP, ORACLE_FILE,
};
use procaware::embed::{embed_corpus, EmbedError};
use procaware::eval::{evaluate, EvalError, Level};
use procaware::textgen::{
    build_client, generate_annotations, judge_corpus, summarize_judgements, write_failures, GenOptions,
    LlmClientConfig, TextGenError,
};
use procaware::trainer::{
    check_objectives, evaluate_child_loss, load_checkpoint, save_checkpoint, train, TrainConfig, TrainError,
};

const CHECKPOINT_FILE: &str = "checkpoint.json";
const METRICS_FILE: &str = "metrics.jsonl";
const EMBEDDINGS_FILE: &str = "embeddings.jsonl";
const FAILURES_FILE: &str = "failures.jsonl";

#[derive(Debug, Parser)]
#[command(name = "procaware", version, about = "Procedure-aware contrastive pretraining at desk scale")]
struct Cli {
    /// Print a machine-readable JSON result on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with a known latent structure.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Annotate a corpus with state changes and counterfactuals via an LLM.
    Gen {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSONL fixtures `{"match": ..., "response": ...}` replacing the endpoint.
        #[arg(long)]
        mock: Option<PathBuf>,
        /// JSON client config; keys present override the environment.
        #[arg(long)]
        llm_config: Option<PathBuf>,
        #[arg(long)]
        max_parallel: Option<usize>,
    },
    /// Train on a corpus and write checkpoint, metrics and embedding table.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Finite-difference check of the child and parent objectives.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Retrieval, phase probe and counterfactual margins of a checkpoint.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = LevelArg::Clip)]
        level: LevelArg,
    },
    /// Score generated texts for relevance and plausibility with an LLM judge.
    Judge {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mock: Option<PathBuf>,
        #[arg(long)]
        llm_config: Option<PathBuf>,
        #[arg(long)]
        max_parallel: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum LevelArg {
    Clip,
    Video,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Clip => Level::Clip,
            LevelArg::Video => Level::Video,
        }
    }
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(m: impl ToString) -> Self {
        Self {
            code: 1,
            message: m.to_string(),
        }
    }

    fn data(m: impl ToString) -> Self {
        Self {
            code: 2,
            message: m.to_string(),
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::InvalidSpec(_) => Self::usage(e),
            _ => Self::data(e),
        }
    }
}

impl From<EmbedError> for Failure {
    fn from(e: EmbedError) -> Self {
        Self::data(e)
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Self::data(e)
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(_) => Self::usage(e),
            _ => Self::data(e),
        }
    }
}

impl From<TextGenError> for Failure {
    fn from(e: TextGenError) -> Self {
        let code = if e.is_endpoint() {
            3
        } else if matches!(e, TextGenError::InvalidConfig(_)) {
            1
        } else {
            2
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<Value, Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{what} {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

/// Loads a corpus directory and rejects it if any validation rule fails.
fn load_valid_corpus(dir: &Path) -> Result<procaware::corpus::Corpus, Failure> {
    let c = load_corpus_dir(dir, DEFAULT_FRAMES_PER_CLIP)?;
    let report = validate_corpus(&c);
    if let Some(v) = report.violations.first() {
        return Err(Failure::data(format!(
            "{}: {} validation violation(s), first: {v}",
            dir.display(),
            report.len()
        )));
    }
    Ok(c)
}

fn llm_config(file: Option<&Path>, mock: Option<PathBuf>, max_parallel: Option<usize>) -> Result<LlmClientConfig, Failure> {
    let mut cfg = LlmClientConfig::resolve(file, |k| std::env::var(k).ok())?;
    if mock.is_some() {
        cfg.mock_fixtures = mock;
    }
    if let Some(n) = max_parallel {
        cfg.max_parallel = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_synth(spec: &Path, out: &Path) -> Outcome {
    let spec: SynthSpec = read_json(spec, "synthesis spec")?;
    let s = synthesize_corpus(&spec)?;
    create_dir(out)?;
    save_corpus_dir(&s.corpus, out)?;
    write_oracle(&out.join(ORACLE_FILE), &s.oracle)?;
    Ok(json!({
        "clips": s.corpus.clips.len(),
        "videos": s.corpus.videos.len(),
        "d_in": s.corpus.d_in,
        "out": out,
    }))
}

fn cmd_gen(corpus: &Path, out: &Path, cfg: LlmClientConfig) -> Outcome {
    let c = load_valid_corpus(corpus)?;
    let client = build_client(&cfg)?;
    let gen = generate_annotations(&c, client.as_ref(), &GenOptions::from(&cfg))?;
    create_dir(out)?;
    save_corpus_dir(&gen.corpus, out)?;
    write_failures(&out.join(FAILURES_FILE), &gen.failures)?;
    Ok(json!({
        "clips": gen.corpus.clips.len(),
        "videos": gen.corpus.videos.len(),
        "requests": gen.requests,
        "failures": gen.failures.len(),
        "out": out,
    }))
}

fn cmd_train(config: &Path, corpus: &Path, out: &Path, resume: Option<&Path>) -> Outcome {
    let cfg: TrainConfig = read_json(config, "train config")?;
    cfg.validate()?;
    let c = load_valid_corpus(corpus)?;
    let table = embed_corpus(&cfg.embedder(), &c)?;
    let init = match resume {
        Some(path) => {
            let ck = load_checkpoint(path, Some(&cfg))?;
            Some((ck.params, ck.optimizer))
        }
        None => None,
    };
    let start = match &init {
        Some((p, _)) => p.clone(),
        None => procaware::model::ModelParams::init(&cfg.model(), cfg.seed),
    };
    let initial = evaluate_child_loss(&start, &c, &table, &cfg)?;
    log::info!("training {} clips, {} videos", c.clips.len(), c.videos.len());
    let result = train(&c, &table, &cfg, init)?;
    let last = evaluate_child_loss(&result.params, &c, &table, &cfg)?;

    create_dir(out)?;
    let step = result.optimizer.step;
    save_checkpoint(&out.join(CHECKPOINT_FILE), &result.params, &result.optimizer, &cfg, step)?;
    fs::write(out.join(METRICS_FILE), result.log.to_jsonl()).map_err(|e| Failure::data(e))?;
    table.save(&out.join(EMBEDDINGS_FILE))?;
    Ok(json!({
        "steps": result.log.records.len(),
        "optimizer_step": step,
        "initial_child_loss": initial,
        "final_child_loss": last,
        "embedding_table_digest": table.digest(),
        "out": out,
    }))
}

fn cmd_gradcheck(config: Option<&Path>, seed: u64) -> Outcome {
    let cfg: TrainConfig = match config {
        Some(p) => read_json(p, "train config")?,
        None => TrainConfig::default(),
    };
    let r = check_objectives(&cfg, seed)?;
    let value = json!({
        "seed": seed,
        "max_rel_err": r.max_rel_err(),
        "passed": r.passed(),
        "child": r.child,
        "parent": r.parent,
    });
    if r.passed() {
        Ok(value)
    } else {
        Err(Failure::data(format!(
            "max relative error {:e} exceeds tolerance (child {:e}, parent {:e})",
            r.max_rel_err(),
            r.child.max_rel_err,
            r.parent.max_rel_err
        )))
    }
}

fn cmd_eval(ckpt: &Path, corpus: &Path, level: Level) -> Outcome {
    let ck = load_checkpoint(ckpt, None)?;
    let c = load_valid_corpus(corpus)?;
    let table = embed_corpus(&ck.config.embedder(), &c)?;
    let report = evaluate(&ck.params, &ck.config.model(), &c, &table, level)?;
    Ok(to_value(&report))
}

fn cmd_judge(corpus: &Path, out: &Path, cfg: LlmClientConfig) -> Outcome {
    let c = load_valid_corpus(corpus)?;
    let client = build_client(&cfg)?;
    let records = judge_corpus(&c, client.as_ref(), cfg.max_parallel)?;
    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    fs::write(out, text).map_err(|e| Failure::data(format!("{}: {e}", out.display())))?;
    Ok(json!({
        "items": records.len(),
        "summary": summarize_judgements(&records),
        "out": out,
    }))
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Synth { spec, out } => cmd_synth(&spec, &out),
        Command::Gen {
            corpus,
            out,
            mock,
            llm_config: file,
            max_parallel,
        } => cmd_gen(&corpus, &out, llm_config(file.as_deref(), mock, max_parallel)?),
        Command::Train {
            config,
            corpus,
            out,
            resume,
        } => cmd_train(&config, &corpus, &out, resume.as_deref()),
        Command::Gradcheck { config, seed } => cmd_gradcheck(config.as_deref(), seed),
        Command::Eval { ckpt, corpus, level } => cmd_eval(&ckpt, &corpus, level.into()),
        Command::Judge {
            corpus,
            out,
            mock,
            llm_config: file,
            max_parallel,
        } => cmd_judge(&corpus, &out, llm_config(file.as_deref(), mock, max_parallel)?),
    }
}

fn print_failure(json_mode: bool, f: &Failure) {
    eprintln!("error: {}", f.message);
    if json_mode {
        println!("{}", json!({"ok": false, "exit_code": f.code, "error": f.message}));
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let json_mode = std::env::args().any(|a| a == "--json");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            if json_mode {
                println!("{}", json!({"ok": false, "exit_code": 1, "error": e.kind().to_string()}));
            }
            return ExitCode::from(1);
        }
    };
    let json_out = cli.json;
    match run(cli) {
        Ok(v) => {
            if json_out {
                println!("{}", json!({"ok": true, "result": v}));
            } else {
                println!("{}", serde_json::to_string_pretty(&v).expect("result serializes"));
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            print_failure(json_out, &f);
            ExitCode::from(f.code)
        }
    }
}
