//! End-to-end experiment orchestration.
//!
//! One unit of work is a (prompt, seed) pair: split the prompt's records,
//! train the scorer (one per dev fold), compute per-method confidences on
//! dev and test, calibrate a threshold per (method, budget), and route the
//! test set. Results aggregate across units into the report CSVs.
//!
//! Everything here is deterministic given the corpus and config: splits,
//! training, and the simulated grader all draw from seeded per-prompt
//! streams, and all aggregation runs over sorted keys.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::process;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    estimate_threshold, pool_dev_folds, DevItem, ErrBudget, ThresholdPolicy,
};
use crate::confidence::{
    build_reference_bank, posterior_confidence, trust_score, Method,
};
use crate::corpus::{make_fold_splits, prompt_rng, Corpus, PromptSpec};
use crate::error::{Error, Result};
use crate::gpr::{fit_gpr, gp_predict, GprHyper};
use crate::scorer::{train, HyperParams, ScoringModel};
use crate::triage::{
    iga_analysis, rmse_at_top_coverage, run_triage_with_grader, IgaGroup, IgaRow, TestPred,
    TriageOutcome,
};

// ---------------------------------------------------------------------------
// Atomic file writes
// ---------------------------------------------------------------------------

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Write via a unique temp file in the target directory plus rename, so
/// concurrent writers never expose a partial file. Creates parent dirs.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let display = path.display().to_string();
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(parent).map_err(|e| Error::io(&display, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {display}")))?;
    let tmp = parent.join(format!(
        ".{}.{}.{}.tmp",
        name.to_string_lossy(),
        process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let tmp_display = tmp.display().to_string();
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp_display, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(&display, e))
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    /// Average per-run metrics across (prompt, seed) runs.
    Macro,
    /// Pool answers across prompts within a seed, then average over seeds.
    Pooled,
}

impl FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Aggregate> {
        match s {
            "macro" => Ok(Aggregate::Macro),
            "pooled" => Ok(Aggregate::Pooled),
            other => Err(Error::Config(format!(
                "unknown aggregate mode '{other}' (expected macro or pooled)"
            ))),
        }
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregate::Macro => "macro",
            Aggregate::Pooled => "pooled",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GpScoreSource {
    /// The gp method scores with the rounded GP mean.
    Gp,
    /// The gp method only supplies confidence; the classifier keeps scoring.
    Classifier,
}

impl FromStr for GpScoreSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<GpScoreSource> {
        match s {
            "gp" => Ok(GpScoreSource::Gp),
            "classifier" => Ok(GpScoreSource::Classifier),
            other => Err(Error::Config(format!(
                "unknown gp score source '{other}' (expected gp or classifier)"
            ))),
        }
    }
}

impl fmt::Display for GpScoreSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GpScoreSource::Gp => "gp",
            GpScoreSource::Classifier => "classifier",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub train_n: usize,
    pub dev_n: usize,
    pub folds: usize,
    pub methods: Vec<Method>,
    pub budgets: Vec<f64>,
    pub seeds: Vec<u64>,
    pub aggregate: Aggregate,
    pub gp_score_source: GpScoreSource,
    /// Probability that the simulated human grader returns a wrong score.
    pub grader_noise: f64,
    /// Training hyperparameters; the seed field is replaced per run by
    /// [`training_seed`].
    pub hyper: HyperParams,
    pub gpr: GprHyper,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train_n: 200,
            dev_n: 50,
            folds: 1,
            methods: Method::ALL.to_vec(),
            budgets: vec![0.04, 0.08, 0.12, 0.16],
            seeds: vec![0],
            aggregate: Aggregate::Macro,
            gp_score_source: GpScoreSource::Gp,
            grader_noise: 0.0,
            hyper: HyperParams::default(),
            gpr: GprHyper::default(),
        }
    }
}

pub fn validate_config(config: &RunConfig) -> Result<()> {
    if config.train_n == 0 || config.dev_n == 0 {
        return Err(Error::Config("train_n and dev_n must be >= 1".into()));
    }
    if config.folds == 0 {
        return Err(Error::Config("folds must be >= 1".into()));
    }
    if config.methods.is_empty() {
        return Err(Error::Config("at least one confidence method required".into()));
    }
    if config.budgets.is_empty() {
        return Err(Error::Config("at least one error budget required".into()));
    }
    for &e in &config.budgets {
        ErrBudget::rmse(e)?;
    }
    if config.seeds.is_empty() {
        return Err(Error::Config("at least one seed required".into()));
    }
    if !(0.0..=1.0).contains(&config.grader_noise) {
        return Err(Error::Config(format!(
            "grader_noise must be in [0, 1], got {}",
            config.grader_noise
        )));
    }
    Ok(())
}

/// Training seed for a fold within a run; fold 0 keeps the run seed so a
/// model trained standalone matches the pipeline's fold-0 model.
pub fn training_seed(run_seed: u64, fold: u32) -> u64 {
    run_seed.wrapping_add((fold as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

// ---------------------------------------------------------------------------
// Per-unit computation
// ---------------------------------------------------------------------------

/// Confidence dump line for one test answer under one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceDumpRow {
    pub answer_id: String,
    pub method: Method,
    pub value: f64,
    pub predicted: u32,
    pub gold: u32,
}

/// Per-method dev and test views of one (prompt, seed) run.
#[derive(Debug, Clone)]
pub struct UnitData {
    pub prompt_id: String,
    pub seed: u64,
    pub fold_ids: Vec<u32>,
    pub dev: BTreeMap<Method, Vec<DevItem>>,
    pub test: BTreeMap<Method, Vec<TestPred>>,
    pub confidences: Vec<ConfidenceDumpRow>,
}

/// Split, train the per-fold models, and compute every confidence the run
/// needs. Dev items for fold f come from fold f's model; the test set is
/// scored once by the fold-0 model. A pre-trained fold-0 model (e.g. loaded
/// from disk) can be supplied to skip retraining it.
/// Train the fold-0 model of one (prompt, seed) unit. A staged run saves
/// this model and re-injects it into [`compute_unit_data`], which must see
/// the exact same splits and training seed.
pub fn train_fold0_model(
    corpus: &Corpus,
    prompt: &PromptSpec,
    config: &RunConfig,
    seed: u64,
) -> Result<ScoringModel> {
    validate_config(config)?;
    let splits = make_fold_splits(
        &corpus.records,
        config.train_n,
        config.dev_n,
        config.folds,
        seed,
    )?;
    let train_records = splits[0].train_records(corpus, &prompt.prompt_id);
    let hp = HyperParams {
        seed: training_seed(seed, 0),
        ..config.hyper.clone()
    };
    train(&train_records, prompt, &hp)
}

pub fn compute_unit_data(
    corpus: &Corpus,
    prompt: &PromptSpec,
    config: &RunConfig,
    seed: u64,
    fold0_model: Option<ScoringModel>,
) -> Result<UnitData> {
    validate_config(config)?;
    if let Some(m) = &fold0_model {
        if m.prompt_id != prompt.prompt_id {
            return Err(Error::PromptMismatch {
                expected: prompt.prompt_id.clone(),
                actual: m.prompt_id.clone(),
            });
        }
    }
    let splits = make_fold_splits(
        &corpus.records,
        config.train_n,
        config.dev_n,
        config.folds,
        seed,
    )?;
    let test_records = splits[0].test_records(corpus, &prompt.prompt_id);
    if test_records.is_empty() {
        return Err(Error::Config(format!(
            "no test records remain for prompt '{}' after the train/dev split",
            prompt.prompt_id
        )));
    }

    let mut dev: BTreeMap<Method, Vec<Vec<DevItem>>> = BTreeMap::new();
    let mut test: BTreeMap<Method, Vec<TestPred>> = BTreeMap::new();
    let mut confidences = Vec::new();
    let mut fold0_model = fold0_model;

    for split in &splits {
        let train_records = split.train_records(corpus, &prompt.prompt_id);
        let hp = HyperParams {
            seed: training_seed(seed, split.fold_id),
            ..config.hyper.clone()
        };
        let model = match (split.fold_id, fold0_model.take()) {
            (0, Some(m)) => m,
            _ => train(&train_records, prompt, &hp)?,
        };
        let bank = build_reference_bank(&model, &train_records)?;
        let gpr = fit_gpr(&model, &train_records, &config.gpr)?;

        let score_one = |record: &crate::corpus::AnswerRecord,
                         method: Method|
         -> Result<(f64, u32)> {
            let pred = model.predict(record)?;
            Ok(match method {
                Method::Posterior => {
                    (posterior_confidence(&pred).value, pred.predicted_score)
                }
                Method::Trust => (trust_score(&pred, &bank)?.value, pred.predicted_score),
                Method::Gp => {
                    let (gp_score, conf) = gp_predict(&gpr, &pred, prompt)?;
                    let predicted = match config.gp_score_source {
                        GpScoreSource::Gp => gp_score,
                        GpScoreSource::Classifier => pred.predicted_score,
                    };
                    (conf.value, predicted)
                }
            })
        };

        for method in &config.methods {
            let mut fold_dev = Vec::new();
            for r in split.dev_records(corpus, &prompt.prompt_id) {
                let (confidence, predicted) = score_one(r, *method)?;
                fold_dev.push(DevItem {
                    confidence,
                    predicted,
                    gold: r.gold_score,
                });
            }
            dev.entry(*method).or_default().push(fold_dev);

            if split.fold_id == 0 {
                let mut preds = Vec::new();
                for r in &test_records {
                    let (confidence, predicted) = score_one(r, *method)?;
                    preds.push(TestPred {
                        answer_id: r.answer_id.clone(),
                        confidence,
                        predicted,
                        gold: r.gold_score,
                    });
                    confidences.push(ConfidenceDumpRow {
                        answer_id: r.answer_id.clone(),
                        method: *method,
                        value: confidence,
                        predicted,
                        gold: r.gold_score,
                    });
                }
                test.insert(*method, preds);
            }
        }
    }

    Ok(UnitData {
        prompt_id: prompt.prompt_id.clone(),
        seed,
        fold_ids: (0..config.folds as u32).collect(),
        dev: dev
            .into_iter()
            .map(|(m, folds)| (m, pool_dev_folds(&folds)))
            .collect(),
        test,
        confidences,
    })
}

/// One policy per (method, budget) from the unit's pooled dev items.
pub fn calibrate_unit(data: &UnitData, config: &RunConfig) -> Result<Vec<ThresholdPolicy>> {
    let mut policies = Vec::new();
    for method in &config.methods {
        let dev = data
            .dev
            .get(method)
            .ok_or_else(|| Error::Config(format!("no dev confidences for method {method}")))?;
        for &e in &config.budgets {
            policies.push(estimate_threshold(
                &data.prompt_id,
                *method,
                dev,
                &ErrBudget::rmse(e)?,
                &data.fold_ids,
            )?);
        }
    }
    Ok(policies)
}

/// Simulated human scores for a unit's test set: gold, except corrupted to
/// a random other score with probability `grader_noise`. Drawn once per
/// (prompt, seed) in answer-id order so every policy sees the same grader.
pub fn simulated_grader_scores(
    data: &UnitData,
    prompt: &PromptSpec,
    grader_noise: f64,
) -> BTreeMap<String, u32> {
    let any_method_preds = data.test.values().next().expect("test preds exist");
    let mut by_id: Vec<(&str, u32)> = any_method_preds
        .iter()
        .map(|p| (p.answer_id.as_str(), p.gold))
        .collect();
    by_id.sort();
    let mut rng = prompt_rng(data.seed ^ 0xC0FF_EE00_5EED_5A1F, &data.prompt_id);
    by_id
        .into_iter()
        .map(|(id, gold)| {
            let score = if grader_noise > 0.0 && rng.random_bool(grader_noise) {
                let o = rng.random_range(0..prompt.max_score);
                if o >= gold {
                    o + 1
                } else {
                    o
                }
            } else {
                gold
            };
            (id.to_string(), score)
        })
        .collect()
}

/// Apply each policy to the unit's test predictions.
pub fn triage_unit(
    data: &UnitData,
    policies: &[ThresholdPolicy],
    prompt: &PromptSpec,
    config: &RunConfig,
) -> Result<Vec<TriageOutcome>> {
    let human = simulated_grader_scores(data, prompt, config.grader_noise);
    let mut outcomes = Vec::new();
    for policy in policies {
        let preds = data
            .test
            .get(&policy.method)
            .ok_or_else(|| Error::Config(format!(
                "no test confidences for method {}",
                policy.method
            )))?;
        outcomes.push(run_triage_with_grader(policy, preds, policy.method, |p| {
            human[&p.answer_id]
        })?);
    }
    Ok(outcomes)
}

pub const CURVE_FRACTIONS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Full result of one (prompt, seed) run.
#[derive(Debug, Clone)]
pub struct UnitResult {
    pub prompt_id: String,
    pub seed: u64,
    pub policies: Vec<ThresholdPolicy>,
    pub outcomes: Vec<TriageOutcome>,
    /// (method, fraction, rmse) at each curve fraction.
    pub curve: Vec<(Method, f64, f64)>,
    pub confidences: Vec<ConfidenceDumpRow>,
}

pub fn run_unit(
    corpus: &Corpus,
    prompt: &PromptSpec,
    config: &RunConfig,
    seed: u64,
) -> Result<UnitResult> {
    let data = compute_unit_data(corpus, prompt, config, seed, None)?;
    let policies = calibrate_unit(&data, config)?;
    let outcomes = triage_unit(&data, &policies, prompt, config)?;
    let mut curve = Vec::new();
    for method in &config.methods {
        let preds = &data.test[method];
        for &fraction in &CURVE_FRACTIONS {
            curve.push((*method, fraction, rmse_at_top_coverage(preds, fraction)?));
        }
    }
    Ok(UnitResult {
        prompt_id: data.prompt_id.clone(),
        seed,
        policies,
        outcomes,
        curve,
        confidences: data.confidences,
    })
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub prompt_id: String,
    pub method: Method,
    pub target_e: f64,
    pub seed: u64,
    pub coverage: f64,
    pub final_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub method: Method,
    pub fraction: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub target_e: f64,
    pub mean_coverage: f64,
    pub sd_coverage: f64,
    pub mean_final_rmse: f64,
    pub sd_final_rmse: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgaArtifacts {
    pub mean_iga: f64,
    pub degenerate: bool,
    /// (prompt_id, iga, group)
    pub prompts: Vec<(String, f64, IgaGroup)>,
    pub rows: Vec<IgaRow>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub outcomes: Vec<OutcomeRow>,
    /// (seed, policy) pairs for persistence.
    pub policies: Vec<(u64, ThresholdPolicy)>,
    pub curves: Vec<CurveRow>,
    pub summary: Vec<SummaryRow>,
    /// Present when at least two prompts carry rater2 scores.
    pub iga: Option<IgaArtifacts>,
    /// (prompt_id, seed, rows) per unit.
    pub confidences: Vec<(String, u64, Vec<ConfidenceDumpRow>)>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Deterministically combine unit results, independent of unit order.
pub fn assemble(
    corpus: &Corpus,
    config: &RunConfig,
    units: Vec<UnitResult>,
) -> Result<ExperimentResult> {
    let mut units = units;
    units.sort_by(|a, b| (&a.prompt_id, a.seed).cmp(&(&b.prompt_id, b.seed)));

    let mut outcomes = Vec::new();
    let mut policies = Vec::new();
    let mut all_outcomes = Vec::new();
    let mut confidences = Vec::new();
    for u in &units {
        for o in &u.outcomes {
            outcomes.push(OutcomeRow {
                prompt_id: o.prompt_id.clone(),
                method: o.method,
                target_e: o.target_e,
                seed: u.seed,
                coverage: o.coverage,
                final_rmse: o.final_rmse,
            });
            all_outcomes.push(o.clone());
        }
        for p in &u.policies {
            policies.push((u.seed, p.clone()));
        }
        confidences.push((u.prompt_id.clone(), u.seed, u.confidences.clone()));
    }
    outcomes.sort_by(|a, b| {
        (&a.prompt_id, a.method, a.target_e.to_bits(), a.seed).cmp(&(
            &b.prompt_id,
            b.method,
            b.target_e.to_bits(),
            b.seed,
        ))
    });

    // Curves: macro-average the per-unit RMSE at each (method, fraction).
    let mut curve_cells: BTreeMap<(Method, u64), (f64, usize)> = BTreeMap::new();
    for u in &units {
        for (method, fraction, rmse) in &u.curve {
            let cell = curve_cells.entry((*method, fraction.to_bits())).or_insert((0.0, 0));
            cell.0 += rmse;
            cell.1 += 1;
        }
    }
    let curves: Vec<CurveRow> = curve_cells
        .into_iter()
        .map(|((method, f_bits), (sum, n))| CurveRow {
            method,
            fraction: f64::from_bits(f_bits),
            rmse: sum / n as f64,
        })
        .collect();

    // Summary per (method, budget) under the configured aggregation.
    let mut summary = Vec::new();
    for method in &config.methods {
        for &e in &config.budgets {
            let selected: Vec<&OutcomeRow> = outcomes
                .iter()
                .filter(|o| o.method == *method && o.target_e == e)
                .collect();
            if selected.is_empty() {
                continue;
            }
            let (coverages, rmses): (Vec<f64>, Vec<f64>) = match config.aggregate {
                Aggregate::Macro => selected
                    .iter()
                    .map(|o| (o.coverage, o.final_rmse))
                    .unzip(),
                Aggregate::Pooled => {
                    // Pool answers across prompts within each seed.
                    let mut by_seed: BTreeMap<u64, (f64, f64, f64)> = BTreeMap::new();
                    for u in &units {
                        for o in &u.outcomes {
                            if o.method != *method || o.target_e != e {
                                continue;
                            }
                            let n = o.n_total as f64;
                            let cell = by_seed.entry(u.seed).or_insert((0.0, 0.0, 0.0));
                            cell.0 += o.coverage * n;
                            cell.1 += o.final_rmse * o.final_rmse * n;
                            cell.2 += n;
                        }
                    }
                    by_seed
                        .values()
                        .map(|(auto, sq, n)| (auto / n, (sq / n).sqrt()))
                        .unzip()
                }
            };
            let (mean_coverage, sd_coverage) = mean_sd(&coverages);
            let (mean_final_rmse, sd_final_rmse) = mean_sd(&rmses);
            summary.push(SummaryRow {
                method: *method,
                target_e: e,
                mean_coverage,
                sd_coverage,
                mean_final_rmse,
                sd_final_rmse,
                n_runs: coverages.len(),
            });
        }
    }

    let iga = match iga_analysis(corpus, &all_outcomes) {
        Ok(report) => Some(IgaArtifacts {
            mean_iga: report.mean_iga,
            degenerate: report.degenerate,
            prompts: report
                .prompt_iga
                .iter()
                .map(|(pid, iga)| {
                    let group = if report.higher.contains(pid) {
                        IgaGroup::Higher
                    } else {
                        IgaGroup::Lower
                    };
                    (pid.clone(), *iga, group)
                })
                .collect(),
            rows: report.rows,
        }),
        Err(Error::InsufficientRaterData(_)) => None,
        Err(e) => return Err(e),
    };

    Ok(ExperimentResult {
        outcomes,
        policies,
        curves,
        summary,
        iga,
        confidences,
    })
}

/// Run every (prompt, seed) unit sequentially and assemble the reports.
pub fn run_experiment(corpus: &Corpus, config: &RunConfig) -> Result<ExperimentResult> {
    validate_config(config)?;
    let mut units = Vec::new();
    for prompt in &corpus.prompts {
        for &seed in &config.seeds {
            units.push(run_unit(corpus, prompt, config, seed)?);
        }
    }
    assemble(corpus, config, units)
}

// ---------------------------------------------------------------------------
// CSV rendering
// ---------------------------------------------------------------------------

pub fn outcomes_csv(rows: &[OutcomeRow]) -> String {
    let mut out = String::from("prompt_id,method,target_e,seed,coverage,final_rmse\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.prompt_id, r.method, r.target_e, r.seed, r.coverage, r.final_rmse
        ));
    }
    out
}

pub fn curves_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("method,fraction,rmse\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.method, r.fraction, r.rmse));
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "method,target_e,mean_coverage,sd_coverage,mean_final_rmse,sd_final_rmse,n_runs\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.method,
            r.target_e,
            r.mean_coverage,
            r.sd_coverage,
            r.mean_final_rmse,
            r.sd_final_rmse,
            r.n_runs
        ));
    }
    out
}

pub fn iga_csv(artifacts: &IgaArtifacts) -> String {
    let mut out = String::from("method,target_e,group,mean_coverage,mean_final_rmse,n_outcomes\n");
    for r in &artifacts.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method,
            r.target_e,
            r.group.as_str(),
            r.mean_coverage,
            r.mean_final_rmse,
            r.n_outcomes
        ));
    }
    out
}

pub fn iga_prompts_csv(artifacts: &IgaArtifacts) -> String {
    let mut out = String::from("prompt_id,iga,group\n");
    for (pid, iga, group) in &artifacts.prompts {
        out.push_str(&format!("{},{},{}\n", pid, iga, group.as_str()));
    }
    out
}

pub fn confidence_dump_csv(rows: &[ConfidenceDumpRow]) -> String {
    let mut out = String::from("answer_id,method,value,predicted_score,gold_score\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.answer_id, r.method, r.value, r.predicted, r.gold
        ));
    }
    out
}
