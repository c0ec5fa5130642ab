//! `gradegate`: staged pipeline driver.
//!
//! `synth` writes a corpus, `train` fits one scoring model per (prompt,
//! seed), `calibrate` turns dev confidences into threshold policies per
//! (prompt, method, e, seed), and `triage` routes the test split and emits
//! the report CSVs. Later stages load exactly what earlier stages saved,
//! so a rerun of any stage is deterministic and idempotent.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use gradegate::calibration::ThresholdPolicy;
use gradegate::confidence::Method;
use gradegate::corpus::{load_corpus, save_corpus, Corpus, CorpusFormat, PromptSpec};
use gradegate::pipeline::{
    assemble, calibrate_unit, compute_unit_data, confidence_dump_csv, curves_csv, iga_csv,
    iga_prompts_csv, outcomes_csv, summary_csv, train_fold0_model, triage_unit, write_atomic,
    Aggregate, GpScoreSource, RunConfig, UnitResult, CURVE_FRACTIONS,
};
use gradegate::scorer::ScoringModel;
use gradegate::synth::{synthesize_corpus, SynthConfig};
use gradegate::triage::rmse_at_top_coverage;

/// Exit 2 for bad usage or config, exit 1 for runtime failures.
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<gradegate::Error> for CliError {
    fn from(e: gradegate::Error) -> Self {
        match e {
            gradegate::Error::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn require_file(path: &Path, role: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{role} not found at '{}'",
            path.display()
        )))
    }
}

#[derive(Parser)]
#[command(
    name = "gradegate",
    version,
    about = "Budget-controlled machine+human scoring of short answers",
    after_help = "Typical flow: synth -> train -> calibrate -> triage. \
                  Set TRIAGE_SCORE_THREADS to cap worker threads."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic graded corpus (prompts.json + answers file).
    Synth(SynthArgs),
    /// Train one scoring model per (prompt, seed) into models/.
    Train(PipelineArgs),
    /// Calibrate thresholds per (prompt, method, e, seed) into policies/.
    Calibrate(PipelineArgs),
    /// Apply policies to the test split and write reports/ CSVs.
    Triage(PipelineArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Directory to write prompts.json and the answers file into.
    #[arg(long, default_value = "corpus")]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    n_prompts: u32,
    #[arg(long, default_value_t = 500)]
    n_answers: u32,
    #[arg(long, default_value_t = 3)]
    max_score: u32,
    /// Filler vocabulary size shared by all prompts.
    #[arg(long, default_value_t = 50)]
    vocab_size: u32,
    /// Probability that an answer's gold score is flipped.
    #[arg(long, default_value_t = 0.1)]
    noise_rate: f64,
    /// Probability that the second rater disagrees with gold.
    #[arg(long, default_value_t = 0.1)]
    rater2_noise_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Answers file format.
    #[arg(long, default_value = "jsonl", value_parser = parse_format)]
    format: CorpusFormat,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// Answers file; its prompts.json sidecar must sit next to it.
    #[arg(long)]
    corpus: PathBuf,
    /// Answers file format.
    #[arg(long, default_value = "jsonl", value_parser = parse_format)]
    format: CorpusFormat,
    /// Training answers per prompt and fold.
    #[arg(long, default_value_t = 200)]
    train_n: usize,
    /// Development answers per prompt and fold.
    #[arg(long, default_value_t = 50)]
    dev_n: usize,
    /// Rotated dev folds pooled during calibration.
    #[arg(long, default_value_t = 1)]
    folds: usize,
    /// Confidence methods (comma-separated or repeated).
    #[arg(long, value_delimiter = ',', default_value = "posterior,trust,gp", value_parser = parse_method)]
    methods: Vec<Method>,
    /// Final-RMSE budgets e (comma-separated or repeated).
    #[arg(long, value_delimiter = ',', default_value = "0.04,0.08,0.12,0.16")]
    budgets: Vec<f64>,
    /// Run seeds (comma-separated or repeated).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Output root; models/, policies/, and reports/ live under it.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Summary aggregation across prompts and seeds.
    #[arg(long, default_value = "macro", value_parser = parse_aggregate)]
    aggregate: Aggregate,
    /// Which score the gp method routes when auto-grading.
    #[arg(long, default_value = "gp", value_parser = parse_gp_score_source)]
    gp_score_source: GpScoreSource,
    /// Probability that the simulated human grader returns a wrong score.
    #[arg(long, default_value_t = 0.0)]
    grader_noise: f64,
}

fn parse_format(s: &str) -> Result<CorpusFormat, String> {
    match s {
        "jsonl" => Ok(CorpusFormat::Jsonl),
        "tsv" => Ok(CorpusFormat::Tsv),
        other => Err(format!("unknown format '{other}' (expected jsonl or tsv)")),
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn parse_aggregate(s: &str) -> Result<Aggregate, String> {
    s.parse::<Aggregate>().map_err(|e| e.to_string())
}

fn parse_gp_score_source(s: &str) -> Result<GpScoreSource, String> {
    s.parse::<GpScoreSource>().map_err(|e| e.to_string())
}

impl PipelineArgs {
    fn run_config(&self) -> RunConfig {
        RunConfig {
            train_n: self.train_n,
            dev_n: self.dev_n,
            folds: self.folds,
            methods: self.methods.clone(),
            budgets: self.budgets.clone(),
            seeds: self.seeds.clone(),
            aggregate: self.aggregate,
            gp_score_source: self.gp_score_source,
            grader_noise: self.grader_noise,
            ..RunConfig::default()
        }
    }

    fn load_corpus(&self) -> CliResult<Corpus> {
        require_file(&self.corpus, "corpus answers file")?;
        Ok(load_corpus(&self.corpus, self.format)?)
    }
}

fn model_path(out: &Path, prompt_id: &str, seed: u64) -> PathBuf {
    out.join("models")
        .join(format!("model_{prompt_id}_seed{seed}.json"))
}

fn policy_path(out: &Path, prompt_id: &str, method: Method, e: f64, seed: u64) -> PathBuf {
    out.join("policies")
        .join(format!("policy_{prompt_id}_{method}_e{e}_seed{seed}.json"))
}

/// Worker pool sized by TRIAGE_SCORE_THREADS (0 or unset: rayon default).
fn worker_pool() -> CliResult<rayon::ThreadPool> {
    let threads = match std::env::var("TRIAGE_SCORE_THREADS") {
        Ok(v) => v.parse::<usize>().map_err(|_| {
            CliError::Usage(format!("TRIAGE_SCORE_THREADS must be an integer, got '{v}'"))
        })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("failed to build worker pool: {e}")))
}

/// Every (prompt, seed) unit in deterministic order.
fn units<'c>(corpus: &'c Corpus, config: &RunConfig) -> Vec<(&'c PromptSpec, u64)> {
    let mut list = Vec::new();
    for prompt in &corpus.prompts {
        for &seed in &config.seeds {
            list.push((prompt, seed));
        }
    }
    list
}

fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let corpus = synthesize_corpus(&SynthConfig {
        n_prompts: args.n_prompts,
        n_answers: args.n_answers,
        max_score: args.max_score,
        vocab_size: args.vocab_size,
        noise_rate: args.noise_rate,
        rater2_noise_rate: args.rater2_noise_rate,
        seed: args.seed,
    })?;
    let answers = save_corpus(&corpus, &args.out, args.format)?;
    println!(
        "wrote {} prompts / {} answers to {}",
        corpus.prompts.len(),
        corpus.records.len(),
        answers.display()
    );
    Ok(())
}

fn cmd_train(args: &PipelineArgs) -> CliResult<()> {
    let corpus = args.load_corpus()?;
    let config = args.run_config();
    let pool = worker_pool()?;
    let written: Vec<PathBuf> = pool.install(|| {
        units(&corpus, &config)
            .par_iter()
            .map(|(prompt, seed)| -> CliResult<PathBuf> {
                let model = train_fold0_model(&corpus, prompt, &config, *seed)?;
                let path = model_path(&args.out, &prompt.prompt_id, *seed);
                model.save(&path)?;
                Ok(path)
            })
            .collect::<CliResult<Vec<_>>>()
    })?;
    println!("trained {} models under {}", written.len(), args.out.join("models").display());
    Ok(())
}

/// Load the model cmd_train saved for this unit.
fn load_unit_model(out: &Path, prompt: &PromptSpec, seed: u64) -> CliResult<ScoringModel> {
    let path = model_path(out, &prompt.prompt_id, seed);
    require_file(&path, "model file (run `gradegate train` first)")?;
    Ok(ScoringModel::load(&path)?)
}

fn cmd_calibrate(args: &PipelineArgs) -> CliResult<()> {
    let corpus = args.load_corpus()?;
    let config = args.run_config();
    let pool = worker_pool()?;
    let written: Vec<usize> = pool.install(|| {
        units(&corpus, &config)
            .par_iter()
            .map(|(prompt, seed)| -> CliResult<usize> {
                let model = load_unit_model(&args.out, prompt, *seed)?;
                let data = compute_unit_data(&corpus, prompt, &config, *seed, Some(model))?;
                let policies = calibrate_unit(&data, &config)?;
                for policy in &policies {
                    policy.save(&policy_path(
                        &args.out,
                        &prompt.prompt_id,
                        policy.method,
                        policy.target_e,
                        *seed,
                    ))?;
                }
                Ok(policies.len())
            })
            .collect::<CliResult<Vec<_>>>()
    })?;
    println!(
        "calibrated {} policies under {}",
        written.iter().sum::<usize>(),
        args.out.join("policies").display()
    );
    Ok(())
}

fn cmd_triage(args: &PipelineArgs) -> CliResult<()> {
    let corpus = args.load_corpus()?;
    let config = args.run_config();
    let pool = worker_pool()?;
    let unit_results: Vec<UnitResult> = pool.install(|| {
        units(&corpus, &config)
            .par_iter()
            .map(|(prompt, seed)| -> CliResult<UnitResult> {
                let model = load_unit_model(&args.out, prompt, *seed)?;
                let data = compute_unit_data(&corpus, prompt, &config, *seed, Some(model))?;
                let mut policies = Vec::new();
                for method in &config.methods {
                    for &e in &config.budgets {
                        let path =
                            policy_path(&args.out, &prompt.prompt_id, *method, e, *seed);
                        require_file(&path, "policy file (run `gradegate calibrate` first)")?;
                        policies.push(ThresholdPolicy::load(&path)?);
                    }
                }
                let outcomes = triage_unit(&data, &policies, prompt, &config)?;
                let mut curve = Vec::new();
                for method in &config.methods {
                    let preds = &data.test[method];
                    for &fraction in &CURVE_FRACTIONS {
                        curve.push((*method, fraction, rmse_at_top_coverage(preds, fraction)?));
                    }
                }
                Ok(UnitResult {
                    prompt_id: prompt.prompt_id.clone(),
                    seed: *seed,
                    policies,
                    outcomes,
                    curve,
                    confidences: data.confidences,
                })
            })
            .collect::<CliResult<Vec<_>>>()
    })?;

    let result = assemble(&corpus, &config, unit_results)?;
    let reports = args.out.join("reports");
    let mut written = vec![
        ("outcomes.csv".to_string(), outcomes_csv(&result.outcomes)),
        ("curves.csv".to_string(), curves_csv(&result.curves)),
        ("summary.csv".to_string(), summary_csv(&result.summary)),
    ];
    if let Some(iga) = &result.iga {
        written.push(("iga.csv".to_string(), iga_csv(iga)));
        written.push(("iga_prompts.csv".to_string(), iga_prompts_csv(iga)));
    }
    for (prompt_id, seed, rows) in &result.confidences {
        written.push((
            format!("confidences_{prompt_id}_seed{seed}.csv"),
            confidence_dump_csv(rows),
        ));
    }
    for (name, body) in &written {
        write_atomic(&reports.join(name), body.as_bytes())?;
    }
    println!(
        "wrote {} report files under {} ({} outcome rows)",
        written.len(),
        reports.display(),
        result.outcomes.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Triage(args) => cmd_triage(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
