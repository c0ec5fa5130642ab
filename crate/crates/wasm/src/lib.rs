//! Browser bindings for the demo page. Every export takes a JSON config
//! string and returns a JSON string, either the payload or `{"error": msg}`,
//! so the page needs no generated TypeScript glue beyond wasm-bindgen's.
//!
//! The synthesized corpus and its confidence scores are cached per config
//! key; moving a budget slider only re-runs calibration and routing, not
//! training.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::rc::Rc;

use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use gradegate::confidence::Method;
use gradegate::corpus::Corpus;
use gradegate::pipeline::{calibrate_unit, compute_unit_data, triage_unit, RunConfig, UnitData};
use gradegate::synth::{synthesize_corpus, SynthConfig};
use gradegate::triage::rmse_at_top_coverage;

#[derive(Deserialize, Clone)]
#[serde(default)]
struct DemoConfig {
    /// Answers generated for the demo prompt. Split 40/20/40 into
    /// train/dev/test.
    n_answers: u32,
    max_score: u32,
    noise_rate: f64,
    seed: u64,
    /// Confidence method for `triage_preview`.
    method: String,
    /// Budget e for `triage_preview`.
    budget: f64,
    /// Budgets swept by `budget_sweep`.
    budgets: Vec<f64>,
    /// Error rate of the simulated human grader.
    grader_noise: f64,
    /// Row cap for `triage_preview`.
    limit: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            n_answers: 300,
            max_score: 3,
            noise_rate: 0.1,
            seed: 0,
            method: "posterior".to_string(),
            budget: 0.08,
            budgets: vec![0.01, 0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.16, 0.20],
            grader_noise: 0.0,
            limit: 200,
        }
    }
}

impl DemoConfig {
    fn validate(&self) -> Result<(), String> {
        if !(100..=1000).contains(&self.n_answers) {
            return Err(format!("n_answers must be in 100..=1000, got {}", self.n_answers));
        }
        if !(1..=6).contains(&self.max_score) {
            return Err(format!("max_score must be in 1..=6, got {}", self.max_score));
        }
        if !(0.0..=0.5).contains(&self.noise_rate) {
            return Err(format!("noise_rate must be in [0, 0.5], got {}", self.noise_rate));
        }
        if !(0.0..=1.0).contains(&self.grader_noise) {
            return Err(format!("grader_noise must be in [0, 1], got {}", self.grader_noise));
        }
        if self.budgets.is_empty() || self.budgets.len() > 16 {
            return Err(format!("budgets must hold 1..=16 values, got {}", self.budgets.len()));
        }
        for &e in &self.budgets {
            if !(e > 0.0 && e < 1.0) {
                return Err(format!("each budget must be in (0, 1), got {e}"));
            }
        }
        if !(self.budget > 0.0 && self.budget < 1.0) {
            return Err(format!("budget must be in (0, 1), got {}", self.budget));
        }
        if self.limit == 0 {
            return Err("limit must be positive".to_string());
        }
        Ok(())
    }

    fn parsed_method(&self) -> Result<Method, String> {
        self.method.parse::<Method>().map_err(|e| e.to_string())
    }

    /// Fields that change the trained unit (and so the cache entry).
    fn unit_key(&self) -> UnitKey {
        (self.n_answers, self.max_score, self.noise_rate.to_bits(), self.seed)
    }

    fn base_run_config(&self) -> RunConfig {
        let n = self.n_answers as usize;
        RunConfig {
            train_n: n * 2 / 5,
            dev_n: n / 5,
            seeds: vec![self.seed],
            grader_noise: self.grader_noise,
            ..RunConfig::default()
        }
    }
}

struct DemoUnit {
    corpus: Corpus,
    data: UnitData,
}

/// (n_answers, max_score, noise_rate bits, seed).
type UnitKey = (u32, u32, u64, u64);

thread_local! {
    static UNIT_CACHE: RefCell<Option<(UnitKey, Rc<DemoUnit>)>> = const { RefCell::new(None) };
}

fn demo_unit(cfg: &DemoConfig) -> Result<Rc<DemoUnit>, String> {
    let key = cfg.unit_key();
    if let Some(unit) = UNIT_CACHE.with(|c| {
        c.borrow()
            .as_ref()
            .filter(|(k, _)| *k == key)
            .map(|(_, u)| Rc::clone(u))
    }) {
        return Ok(unit);
    }
    let corpus = synthesize_corpus(&SynthConfig {
        n_prompts: 1,
        n_answers: cfg.n_answers,
        max_score: cfg.max_score,
        vocab_size: 30,
        noise_rate: cfg.noise_rate,
        rater2_noise_rate: cfg.noise_rate,
        seed: cfg.seed,
    })
    .map_err(|e| e.to_string())?;
    let data = compute_unit_data(
        &corpus,
        &corpus.prompts[0],
        &cfg.base_run_config(),
        cfg.seed,
        None,
    )
    .map_err(|e| e.to_string())?;
    let unit = Rc::new(DemoUnit { corpus, data });
    UNIT_CACHE.with(|c| *c.borrow_mut() = Some((key, Rc::clone(&unit))));
    Ok(unit)
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn parse_config(config_json: &str) -> Result<DemoConfig, String> {
    let cfg: DemoConfig =
        serde_json::from_str(config_json).map_err(|e| format!("bad config: {e}"))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Calibrate every method at every requested budget and route the test set.
/// Returns one row per (method, budget) with the threshold, coverage, and
/// final error it achieves.
#[wasm_bindgen]
pub fn budget_sweep(config_json: &str) -> String {
    respond(parse_config(config_json).and_then(|cfg| {
        let unit = demo_unit(&cfg)?;
        let config = RunConfig {
            budgets: cfg.budgets.clone(),
            ..cfg.base_run_config()
        };
        let policies = calibrate_unit(&unit.data, &config).map_err(|e| e.to_string())?;
        let outcomes = triage_unit(&unit.data, &policies, &unit.corpus.prompts[0], &config)
            .map_err(|e| e.to_string())?;
        let rows: Vec<Value> = policies
            .iter()
            .zip(&outcomes)
            .map(|(policy, outcome)| {
                json!({
                    "method": policy.method.to_string(),
                    "e": policy.target_e,
                    "tau": finite_or_null(policy.tau),
                    "dev_err": policy.dev_err,
                    "dev_coverage": policy.dev_coverage,
                    "coverage": outcome.coverage,
                    "final_rmse": outcome.final_rmse,
                    "n_auto": outcome.auto_pairs.len(),
                    "n_human": outcome.human_pairs.len(),
                })
            })
            .collect();
        Ok(json!({ "max_score": cfg.max_score, "rows": rows }))
    }))
}

/// Machine-only risk-coverage curve: RMSE over the most confident top-k
/// fraction of the test set, per method, at 5% steps.
#[wasm_bindgen]
pub fn risk_coverage(config_json: &str) -> String {
    respond(parse_config(config_json).and_then(|cfg| {
        let unit = demo_unit(&cfg)?;
        let mut rows = Vec::new();
        for method in Method::ALL {
            let preds = &unit.data.test[&method];
            for step in 1..=20 {
                let fraction = f64::from(step) / 20.0;
                let rmse = rmse_at_top_coverage(preds, fraction).map_err(|e| e.to_string())?;
                rows.push(json!({
                    "method": method.to_string(),
                    "fraction": fraction,
                    "rmse": rmse,
                }));
            }
        }
        Ok(json!({ "rows": rows }))
    }))
}

/// Route the test set at one (method, budget) and list the answers with
/// their confidences, most confident first.
#[wasm_bindgen]
pub fn triage_preview(config_json: &str) -> String {
    respond(parse_config(config_json).and_then(|cfg| {
        let method = cfg.parsed_method()?;
        let unit = demo_unit(&cfg)?;
        let config = RunConfig {
            methods: vec![method],
            budgets: vec![cfg.budget],
            ..cfg.base_run_config()
        };
        let policies = calibrate_unit(&unit.data, &config).map_err(|e| e.to_string())?;
        let outcomes = triage_unit(&unit.data, &policies, &unit.corpus.prompts[0], &config)
            .map_err(|e| e.to_string())?;
        let (policy, outcome) = (&policies[0], &outcomes[0]);

        let human_scores: std::collections::BTreeMap<&str, u32> = outcome
            .human_pairs
            .iter()
            .map(|(id, score)| (id.as_str(), *score))
            .collect();
        let texts: std::collections::BTreeMap<&str, &str> = unit
            .corpus
            .records
            .iter()
            .map(|r| (r.answer_id.as_str(), r.text.as_str()))
            .collect();

        let mut preds: Vec<_> = unit.data.test[&method].iter().collect();
        preds.sort_by(|a, b| match (a.confidence.is_nan(), b.confidence.is_nan()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => b.confidence.partial_cmp(&a.confidence).unwrap(),
        });
        let items: Vec<Value> = preds
            .iter()
            .take(cfg.limit)
            .map(|p| {
                let human = human_scores.get(p.answer_id.as_str());
                json!({
                    "answer_id": p.answer_id,
                    "text": texts.get(p.answer_id.as_str()).copied().unwrap_or(""),
                    "confidence": finite_or_null(p.confidence),
                    "predicted": p.predicted,
                    "gold": p.gold,
                    "route": if human.is_some() { "human" } else { "auto" },
                    "human_score": human.copied(),
                })
            })
            .collect();
        Ok(json!({
            "method": method.to_string(),
            "e": policy.target_e,
            "tau": finite_or_null(policy.tau),
            "dev_err": policy.dev_err,
            "dev_coverage": policy.dev_coverage,
            "coverage": outcome.coverage,
            "final_rmse": outcome.final_rmse,
            "n_total": outcome.n_total,
            "n_auto": outcome.auto_pairs.len(),
            "n_human": outcome.human_pairs.len(),
            "items": items,
        }))
    }))
}
