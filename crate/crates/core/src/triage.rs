//! Applying a calibrated policy to test predictions: split answers between
//! machine and human, measure coverage and final error, and run the
//! inter-grader-agreement analysis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calibration::{final_rmse, GradedPair, ThresholdPolicy};
use crate::confidence::Method;
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// One test answer with its prediction and confidence under some method.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPred {
    pub answer_id: String,
    pub confidence: f64,
    pub predicted: u32,
    pub gold: u32,
}

/// Result of routing one test set through a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageOutcome {
    pub prompt_id: String,
    pub method: Method,
    pub target_e: f64,
    /// (answer_id, machine score, gold score)
    pub auto_pairs: Vec<(String, u32, u32)>,
    /// (answer_id, human score)
    pub human_pairs: Vec<(String, u32)>,
    pub coverage: f64,
    pub final_rmse: f64,
    pub n_total: usize,
}

/// Route items with confidence >= tau to the machine, the rest to a perfect
/// human grader (human score = gold). NaN confidence always goes human.
pub fn run_triage(
    policy: &ThresholdPolicy,
    test_preds: &[TestPred],
    method: Method,
) -> Result<TriageOutcome> {
    run_triage_with_grader(policy, test_preds, method, |p| p.gold)
}

/// Same routing, but the human grader is pluggable; its score counts toward
/// the final error, so an imperfect grader degrades the all-human baseline.
pub fn run_triage_with_grader(
    policy: &ThresholdPolicy,
    test_preds: &[TestPred],
    method: Method,
    grader: impl Fn(&TestPred) -> u32,
) -> Result<TriageOutcome> {
    if policy.method != method {
        return Err(Error::MethodMismatch {
            policy: policy.method.to_string(),
            given: method.to_string(),
        });
    }
    let mut auto_pairs = Vec::new();
    let mut human_pairs = Vec::new();
    let mut human_sq = 0.0;
    for p in test_preds {
        if !p.confidence.is_nan() && p.confidence >= policy.tau {
            auto_pairs.push((p.answer_id.clone(), p.predicted, p.gold));
        } else {
            let score = grader(p);
            let d = score as i64 - p.gold as i64;
            human_sq += (d * d) as f64;
            human_pairs.push((p.answer_id.clone(), score));
        }
    }
    let n_total = test_preds.len();
    let pairs: Vec<GradedPair> = test_preds
        .iter()
        .map(|p| GradedPair {
            auto: !p.confidence.is_nan() && p.confidence >= policy.tau,
            predicted: p.predicted,
            gold: p.gold,
        })
        .collect();
    let auto_rmse = final_rmse(&pairs)?;
    // Fold in grader error; zero for the perfect grader.
    let rmse = (auto_rmse * auto_rmse + human_sq / n_total as f64).sqrt();
    Ok(TriageOutcome {
        prompt_id: policy.prompt_id.clone(),
        method,
        target_e: policy.target_e,
        coverage: auto_pairs.len() as f64 / n_total as f64,
        final_rmse: rmse,
        auto_pairs,
        human_pairs,
        n_total,
    })
}

/// RMSE over the ceil(fraction * n) most confident predictions only.
/// Confidence ties order by answer_id; NaN ranks below everything.
pub fn rmse_at_top_coverage(preds: &[TestPred], fraction: f64) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Empty);
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "coverage fraction must be in (0, 1], got {fraction}"
        )));
    }
    let mut order: Vec<&TestPred> = preds.iter().collect();
    let key = |p: &TestPred| {
        if p.confidence.is_nan() {
            f64::NEG_INFINITY
        } else {
            p.confidence
        }
    };
    order.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.answer_id.cmp(&b.answer_id)));
    let k = ((fraction * preds.len() as f64).ceil() as usize).clamp(1, preds.len());
    let sum: f64 = order[..k]
        .iter()
        .map(|p| {
            let d = p.predicted as i64 - p.gold as i64;
            (d * d) as f64
        })
        .sum();
    Ok((sum / k as f64).sqrt())
}

/// Quadratic weighted kappa between two ratings on the 0..=max_score scale.
/// Degenerate identical-constant ratings count as perfect agreement.
pub fn qwk(a: &[u32], b: &[u32], max_score: u32) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty);
    }
    let classes = max_score as usize + 1;
    for &v in a.iter().chain(b) {
        if v > max_score {
            return Err(Error::Range {
                context: "qwk ratings".into(),
                score: v as i64,
                max_score,
            });
        }
    }
    let n = a.len() as f64;
    let mut observed = vec![0.0; classes * classes];
    let mut marg_a = vec![0.0; classes];
    let mut marg_b = vec![0.0; classes];
    for (&x, &y) in a.iter().zip(b) {
        observed[x as usize * classes + y as usize] += 1.0;
        marg_a[x as usize] += 1.0;
        marg_b[y as usize] += 1.0;
    }
    let denom_w = (max_score as f64) * (max_score as f64);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..classes {
        for j in 0..classes {
            let w = ((i as f64 - j as f64) * (i as f64 - j as f64)) / denom_w;
            num += w * observed[i * classes + j];
            den += w * marg_a[i] * marg_b[j] / n;
        }
    }
    if den == 0.0 {
        // Both raters constant on the same class; observed disagreement is
        // necessarily zero too.
        return Ok(1.0);
    }
    Ok(1.0 - num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IgaGroup {
    Higher,
    Lower,
}

impl IgaGroup {
    pub fn as_str(&self) -> &'static str {
        match self {
            IgaGroup::Higher => "higher",
            IgaGroup::Lower => "lower",
        }
    }
}

/// Aggregated triage metrics for one (method, budget, IGA group) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgaRow {
    pub method: Method,
    pub target_e: f64,
    pub group: IgaGroup,
    pub mean_coverage: f64,
    pub mean_final_rmse: f64,
    pub n_outcomes: usize,
}

/// Prompts split by inter-grader agreement, with per-group triage averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgaReport {
    /// QWK between gold and rater2 per prompt.
    pub prompt_iga: BTreeMap<String, f64>,
    pub mean_iga: f64,
    pub higher: Vec<String>,
    pub lower: Vec<String>,
    /// True when no prompt sits strictly above the mean IGA.
    pub degenerate: bool,
    pub rows: Vec<IgaRow>,
}

/// Compute per-prompt IGA (QWK of gold vs rater2), split prompts at the
/// mean (strictly above -> higher group), and average coverage and final
/// RMSE per group over the given outcomes.
pub fn iga_analysis(corpus: &Corpus, outcomes: &[TriageOutcome]) -> Result<IgaReport> {
    let mut prompt_iga = BTreeMap::new();
    for prompt in &corpus.prompts {
        let (gold, rater2): (Vec<u32>, Vec<u32>) = corpus
            .records_for(&prompt.prompt_id)
            .into_iter()
            .filter_map(|r| r.rater2_score.map(|r2| (r.gold_score, r2)))
            .unzip();
        if gold.len() >= 2 {
            let iga = qwk(&gold, &rater2, prompt.max_score)?;
            prompt_iga.insert(prompt.prompt_id.clone(), iga);
        }
    }
    if prompt_iga.len() < 2 {
        return Err(Error::InsufficientRaterData(prompt_iga.len()));
    }
    let mean_iga = prompt_iga.values().sum::<f64>() / prompt_iga.len() as f64;
    let mut higher = Vec::new();
    let mut lower = Vec::new();
    for (pid, iga) in &prompt_iga {
        if *iga > mean_iga {
            higher.push(pid.clone());
        } else {
            lower.push(pid.clone());
        }
    }

    let group_of = |pid: &str| {
        if higher.iter().any(|h| h == pid) {
            Some(IgaGroup::Higher)
        } else if lower.iter().any(|l| l == pid) {
            Some(IgaGroup::Lower)
        } else {
            None
        }
    };
    // Keyed by (method, budget bits, group) for a deterministic row order.
    let mut cells: BTreeMap<(Method, u64, IgaGroup), (f64, f64, usize)> = BTreeMap::new();
    for o in outcomes {
        let Some(group) = group_of(&o.prompt_id) else {
            continue;
        };
        let cell = cells
            .entry((o.method, o.target_e.to_bits(), group))
            .or_insert((0.0, 0.0, 0));
        cell.0 += o.coverage;
        cell.1 += o.final_rmse;
        cell.2 += 1;
    }
    let rows = cells
        .into_iter()
        .map(|((method, e_bits, group), (cov, rmse, n))| IgaRow {
            method,
            target_e: f64::from_bits(e_bits),
            group,
            mean_coverage: cov / n as f64,
            mean_final_rmse: rmse / n as f64,
            n_outcomes: n,
        })
        .collect();

    Ok(IgaReport {
        degenerate: higher.is_empty(),
        prompt_iga,
        mean_iga,
        higher,
        lower,
        rows,
    })
}
