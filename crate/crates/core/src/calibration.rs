//! Threshold calibration: pick the confidence cutoff tau on development
//! data so the final grading error stays within the budget e while as many
//! answers as possible are auto-scored.
//!
//! Final error counts human-routed items as zero squared error (a trained
//! grader recovers the gold score) but keeps them in the denominator, so
//! the metric is over the full final set, not just the auto-scored part.
//!
//! Squared errors are integers, so prefix sums are exact in f64 and the
//! greedy descending sweep is bit-for-bit equal to exhaustive search over
//! candidate thresholds.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::confidence::Method;
use crate::error::{Error, Result};

/// Acceptable final-error budget. RMSE is the only metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrBudget {
    pub value: f64,
}

impl ErrBudget {
    pub fn rmse(value: f64) -> Result<ErrBudget> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Config(format!(
                "error budget must be a finite value >= 0, got {value}"
            )));
        }
        Ok(ErrBudget { value })
    }
}

/// One dev-set prediction with its confidence under some method.
#[derive(Debug, Clone, PartialEq)]
pub struct DevItem {
    pub confidence: f64,
    pub predicted: u32,
    pub gold: u32,
}

impl DevItem {
    fn sq_err(&self) -> f64 {
        let d = self.predicted as i64 - self.gold as i64;
        (d * d) as f64
    }
}

/// A calibrated cutoff. `tau` may be +inf: route everything to humans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub prompt_id: String,
    pub method: Method,
    #[serde(with = "tau_serde")]
    pub tau: f64,
    pub target_e: f64,
    pub dev_coverage: f64,
    pub dev_err: f64,
    pub pooled_fold_ids: Vec<u32>,
}

/// +inf crosses JSON as the string "inf"; finite values stay numbers.
mod tau_serde {
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(tau: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if tau.is_infinite() && *tau > 0.0 {
            ser.serialize_str("inf")
        } else {
            ser.serialize_f64(*tau)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        match Raw::deserialize(de)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::Text(s) => Err(D::Error::custom(format!(
                "tau must be a number or \"inf\", got \"{s}\""
            ))),
        }
    }
}

impl ThresholdPolicy {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).expect("policy serialization cannot fail");
        crate::pipeline::write_atomic(path, json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<ThresholdPolicy> {
        let display = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(&display, e.line(), e.to_string()))
    }
}

/// Pair entering the final-error computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradedPair {
    /// true = machine-scored, false = routed to a human.
    pub auto: bool,
    pub predicted: u32,
    pub gold: u32,
}

/// RMSE over the full final set: auto pairs contribute (predicted - gold)^2,
/// human pairs contribute 0, the denominator is the total pair count.
pub fn final_rmse(pairs: &[GradedPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty);
    }
    let sum: f64 = pairs
        .iter()
        .filter(|p| p.auto)
        .map(|p| {
            let d = p.predicted as i64 - p.gold as i64;
            (d * d) as f64
        })
        .sum();
    Ok((sum / pairs.len() as f64).sqrt())
}

/// Concatenate per-fold dev lists; calibration then runs on the pool.
pub fn pool_dev_folds(folds: &[Vec<DevItem>]) -> Vec<DevItem> {
    folds.iter().flatten().cloned().collect()
}

/// Choose tau maximizing dev coverage subject to dev final RMSE <= budget.
///
/// Candidates are the observed confidence values plus +inf; items at exactly
/// tau fall on the auto side. NaN confidences are never auto-scored but stay
/// in the denominator. Coverage is strictly increasing along descending
/// candidates and the error never decreases, so the sweep stops at the first
/// infeasible candidate.
pub fn estimate_threshold(
    prompt_id: &str,
    method: Method,
    dev: &[DevItem],
    budget: &ErrBudget,
    pooled_fold_ids: &[u32],
) -> Result<ThresholdPolicy> {
    if dev.is_empty() {
        return Err(Error::Empty);
    }
    let n = dev.len() as f64;
    let mut scored: Vec<(f64, f64)> = dev
        .iter()
        .filter(|d| !d.confidence.is_nan())
        .map(|d| (d.confidence, d.sq_err()))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut tau = f64::INFINITY;
    let mut coverage = 0.0;
    let mut err = 0.0;
    let mut cum = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let candidate = scored[i].0;
        while i < scored.len() && scored[i].0 == candidate {
            cum += scored[i].1;
            i += 1;
        }
        let cand_err = (cum / n).sqrt();
        if cand_err <= budget.value {
            tau = candidate;
            coverage = i as f64 / n;
            err = cand_err;
        } else {
            break;
        }
    }

    Ok(ThresholdPolicy {
        prompt_id: prompt_id.to_string(),
        method,
        tau,
        target_e: budget.value,
        dev_coverage: coverage,
        dev_err: err,
        pooled_fold_ids: pooled_fold_ids.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn item(confidence: f64, err: u32) -> DevItem {
        DevItem {
            confidence,
            predicted: err,
            gold: 0,
        }
    }

    fn pair(auto: bool, predicted: u32, gold: u32) -> GradedPair {
        GradedPair {
            auto,
            predicted,
            gold,
        }
    }

    #[test]
    fn all_human_final_rmse_is_zero() {
        let pairs = vec![pair(false, 3, 0), pair(false, 2, 1)];
        assert_eq!(final_rmse(&pairs).unwrap(), 0.0);
    }

    #[test]
    fn final_rmse_uses_full_denominator() {
        // Two auto pairs with squared errors {1, 0}, two human pairs.
        let pairs = vec![
            pair(true, 1, 0),
            pair(true, 2, 2),
            pair(false, 0, 3),
            pair(false, 1, 1),
        ];
        assert_eq!(final_rmse(&pairs).unwrap(), 0.5);
    }

    #[test]
    fn perfect_auto_scoring_has_zero_error_and_empty_is_rejected() {
        let pairs = vec![pair(true, 2, 2), pair(true, 0, 0)];
        assert_eq!(final_rmse(&pairs).unwrap(), 0.0);
        assert!(matches!(final_rmse(&[]).unwrap_err(), Error::Empty));
    }

    #[test]
    fn threshold_matches_hand_worked_example() {
        // (conf, sq_err): (0.9, 0), (0.8, 0), (0.6, 1), (0.5, 4); e = 0.5.
        // Top 3 give sqrt(1/4) = 0.5, all 4 give sqrt(5/4) > 0.5.
        let dev = vec![item(0.9, 0), item(0.8, 0), item(0.6, 1), item(0.5, 2)];
        let policy = estimate_threshold(
            "p1",
            Method::Posterior,
            &dev,
            &ErrBudget::rmse(0.5).unwrap(),
            &[0],
        )
        .unwrap();
        assert_eq!(policy.tau, 0.6);
        assert_eq!(policy.dev_coverage, 0.75);
        assert_eq!(policy.dev_err, 0.5);
    }

    #[test]
    fn zero_budget_with_erroneous_top_item_routes_everything() {
        let dev = vec![item(0.9, 1), item(0.5, 0)];
        let policy = estimate_threshold(
            "p1",
            Method::Posterior,
            &dev,
            &ErrBudget::rmse(0.0).unwrap(),
            &[],
        )
        .unwrap();
        assert!(policy.tau.is_infinite());
        assert_eq!(policy.dev_coverage, 0.0);
        assert_eq!(policy.dev_err, 0.0);
    }

    #[test]
    fn slack_budget_gives_full_coverage_at_min_confidence() {
        let dev = vec![item(0.9, 1), item(0.4, 0), item(0.7, 1)];
        // Full-auto RMSE = sqrt(2/3) ~ 0.816.
        let policy = estimate_threshold(
            "p1",
            Method::Trust,
            &dev,
            &ErrBudget::rmse(0.9).unwrap(),
            &[],
        )
        .unwrap();
        assert_eq!(policy.tau, 0.4);
        assert_eq!(policy.dev_coverage, 1.0);
    }

    #[test]
    fn items_at_exactly_tau_are_auto_scored() {
        // Both 0.8 items must sit on the auto side together.
        let dev = vec![item(0.8, 0), item(0.8, 1), item(0.6, 2)];
        let policy = estimate_threshold(
            "p1",
            Method::Posterior,
            &dev,
            &ErrBudget::rmse(0.6).unwrap(),
            &[],
        )
        .unwrap();
        // sqrt(1/3) ~ 0.577 feasible; adding the 0.6 item gives sqrt(5/3).
        assert_eq!(policy.tau, 0.8);
        assert!((policy.dev_coverage - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn nan_confidence_stays_human() {
        let dev = vec![item(f64::NAN, 0), item(0.9, 0)];
        let policy = estimate_threshold(
            "p1",
            Method::Gp,
            &dev,
            &ErrBudget::rmse(1.0).unwrap(),
            &[],
        )
        .unwrap();
        assert_eq!(policy.tau, 0.9);
        assert_eq!(policy.dev_coverage, 0.5);
    }

    #[test]
    fn empty_dev_and_bad_budget_are_rejected() {
        let err = estimate_threshold(
            "p1",
            Method::Posterior,
            &[],
            &ErrBudget::rmse(0.1).unwrap(),
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Empty));
        assert!(matches!(ErrBudget::rmse(-0.1).unwrap_err(), Error::Config(_)));
        assert!(matches!(
            ErrBudget::rmse(f64::NAN).unwrap_err(),
            Error::Config(_)
        ));
    }

    /// Exhaustive reference: try every candidate, keep max coverage with
    /// ties toward larger tau.
    fn brute_force_tau(dev: &[DevItem], e: f64) -> (f64, f64) {
        let n = dev.len() as f64;
        let mut candidates: Vec<f64> = dev
            .iter()
            .map(|d| d.confidence)
            .filter(|c| !c.is_nan())
            .collect();
        candidates.push(f64::INFINITY);
        let mut best: Option<(f64, f64)> = None;
        for tau in candidates {
            let auto: Vec<&DevItem> = dev
                .iter()
                .filter(|d| !d.confidence.is_nan() && d.confidence >= tau)
                .collect();
            let err = (auto.iter().map(|d| d.sq_err()).sum::<f64>() / n).sqrt();
            if err <= e {
                let cov = auto.len() as f64 / n;
                let better = match best {
                    None => true,
                    Some((bc, bt)) => cov > bc || (cov == bc && tau > bt),
                };
                if better {
                    best = Some((cov, tau));
                }
            }
        }
        let (cov, tau) = best.unwrap();
        (tau, cov)
    }

    #[test]
    fn sweep_equals_exhaustive_search_on_random_data() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..20 {
            let dev: Vec<DevItem> = (0..50)
                .map(|_| {
                    // Coarse confidence grid to force ties.
                    let conf = (rng.random_range(0..10) as f64) / 10.0;
                    DevItem {
                        confidence: conf,
                        predicted: rng.random_range(0..4),
                        gold: rng.random_range(0..4),
                    }
                })
                .collect();
            for e in [0.0, 0.1, 0.3, 0.5, 0.8, 1.2, 3.0] {
                let policy = estimate_threshold(
                    "p1",
                    Method::Posterior,
                    &dev,
                    &ErrBudget::rmse(e).unwrap(),
                    &[],
                )
                .unwrap();
                let (want_tau, want_cov) = brute_force_tau(&dev, e);
                assert_eq!(policy.tau, want_tau, "e={e}");
                assert_eq!(policy.dev_coverage, want_cov, "e={e}");
                assert!(policy.dev_err <= e + 1e-9);
            }
        }
    }

    #[test]
    fn coverage_is_non_decreasing_in_budget() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let dev: Vec<DevItem> = (0..80)
            .map(|_| DevItem {
                confidence: rng.random(),
                predicted: rng.random_range(0..3),
                gold: rng.random_range(0..3),
            })
            .collect();
        let mut last = -1.0;
        for i in 0..30 {
            let e = i as f64 * 0.05;
            let policy = estimate_threshold(
                "p1",
                Method::Trust,
                &dev,
                &ErrBudget::rmse(e).unwrap(),
                &[],
            )
            .unwrap();
            assert!(
                policy.dev_coverage >= last,
                "coverage dropped at e={e}: {} < {last}",
                policy.dev_coverage
            );
            last = policy.dev_coverage;
        }
    }

    #[test]
    fn pooling_concatenates_folds() {
        let folds: Vec<Vec<DevItem>> = (0..5)
            .map(|f| (0..50).map(|i| item(f as f64 + i as f64, 0)).collect())
            .collect();
        let pooled = pool_dev_folds(&folds);
        assert_eq!(pooled.len(), 250);
        assert_eq!(pooled[0], folds[0][0]);
        assert_eq!(pooled[249], folds[4][49]);
        let single = pool_dev_folds(&folds[..1]);
        assert_eq!(single, folds[0]);
    }

    #[test]
    fn policy_roundtrips_with_infinite_and_finite_tau() {
        let dir = tempfile::tempdir().unwrap();
        for tau in [f64::INFINITY, 0.625] {
            let policy = ThresholdPolicy {
                prompt_id: "p1".into(),
                method: Method::Gp,
                tau,
                target_e: 0.04,
                dev_coverage: 0.5,
                dev_err: 0.03,
                pooled_fold_ids: vec![0, 1, 2],
            };
            let path = dir.path().join("policy.json");
            policy.save(&path).unwrap();
            let text = std::fs::read_to_string(&path).unwrap();
            if tau.is_infinite() {
                assert!(text.contains("\"tau\":\"inf\""), "{text}");
            } else {
                assert!(text.contains("\"tau\":0.625"), "{text}");
            }
            let loaded = ThresholdPolicy::load(&path).unwrap();
            assert_eq!(loaded, policy);
        }
    }
}
