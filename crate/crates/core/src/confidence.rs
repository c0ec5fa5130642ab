//! Confidence functions over model predictions.
//!
//! Three interchangeable estimators feed the triage threshold: the softmax
//! posterior at the predicted score, a trust score contrasting the distance
//! to the predicted score's training cluster against the nearest competing
//! cluster, and (in [`gpr`](crate::gpr)) a Gaussian-process variance score.
//! All report in (0,1] so one threshold scale serves every method.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::AnswerRecord;
use crate::error::{Error, Result};
use crate::features::featurize;
use crate::scorer::{Prediction, ScoringModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Posterior,
    Trust,
    Gp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Posterior, Method::Trust, Method::Gp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Posterior => "posterior",
            Method::Trust => "trust",
            Method::Gp => "gp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "posterior" => Ok(Method::Posterior),
            "trust" => Ok(Method::Trust),
            "gp" => Ok(Method::Gp),
            other => Err(Error::Config(format!(
                "unknown confidence method '{other}' (expected posterior, trust, or gp)"
            ))),
        }
    }
}

/// One confidence value; higher means more reliable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceScore {
    pub answer_id: String,
    pub method: Method,
    pub value: f64,
}

/// Posterior probability of the predicted score.
pub fn posterior_confidence(pred: &Prediction) -> ConfidenceScore {
    ConfidenceScore {
        answer_id: pred.answer_id.clone(),
        method: Method::Posterior,
        value: pred.posterior[pred.predicted_score as usize],
    }
}

/// Training embeddings grouped by gold score: cluster `s` holds the hidden
/// activations of all training answers whose gold score is `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBank {
    pub prompt_id: String,
    pub hidden_dim: usize,
    clusters: Vec<Vec<Vec<f64>>>,
}

impl ReferenceBank {
    /// Assemble a bank from raw clusters (index = score). Every embedding
    /// must have length `hidden_dim`.
    pub fn from_clusters(
        prompt_id: &str,
        hidden_dim: usize,
        clusters: Vec<Vec<Vec<f64>>>,
    ) -> Result<ReferenceBank> {
        for cluster in &clusters {
            for emb in cluster {
                if emb.len() != hidden_dim {
                    return Err(Error::DimensionMismatch {
                        expected: hidden_dim,
                        actual: emb.len(),
                    });
                }
            }
        }
        Ok(ReferenceBank {
            prompt_id: prompt_id.to_string(),
            hidden_dim,
            clusters,
        })
    }

    pub fn cluster(&self, score: u32) -> &[Vec<f64>] {
        &self.clusters[score as usize]
    }

    pub fn max_score(&self) -> u32 {
        self.clusters.len() as u32 - 1
    }

    pub fn total(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }
}

/// Embed every training record and file it under its gold score.
pub fn build_reference_bank(
    model: &ScoringModel,
    train_set: &[&AnswerRecord],
) -> Result<ReferenceBank> {
    if train_set.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let mut clusters = vec![Vec::new(); model.classes()];
    for r in train_set {
        if r.prompt_id != model.prompt_id {
            return Err(Error::PromptMismatch {
                expected: model.prompt_id.clone(),
                actual: r.prompt_id.clone(),
            });
        }
        if r.gold_score > model.max_score {
            return Err(Error::Range {
                context: format!("prompt '{}'", r.prompt_id),
                score: r.gold_score as i64,
                max_score: model.max_score,
            });
        }
        clusters[r.gold_score as usize].push(model.embed(&featurize(&r.text)));
    }
    Ok(ReferenceBank {
        prompt_id: model.prompt_id.clone(),
        hidden_dim: model.hidden_dim,
        clusters,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn min_sq_dist(h: &[f64], cluster: &[Vec<f64>]) -> Option<f64> {
    cluster
        .iter()
        .map(|e| sq_dist(h, e))
        .min_by(|a, b| a.total_cmp(b))
}

/// Trust score d_c / (d_p + d_c): distance to the nearest competing cluster
/// over the summed nearest distances, where d_p is measured to the predicted
/// score's own cluster.
///
/// Degenerate banks resolve conservatively: no competing cluster means 1.0,
/// an unseen predicted score means 0.0, and a point sitting in both clusters
/// at once (d_p = d_c = 0) means 0.5.
pub fn trust_score(pred: &Prediction, bank: &ReferenceBank) -> Result<ConfidenceScore> {
    if bank.total() == 0 {
        return Err(Error::EmptyBank);
    }
    let h = &pred.embedding;
    if h.len() != bank.hidden_dim {
        return Err(Error::DimensionMismatch {
            expected: bank.hidden_dim,
            actual: h.len(),
        });
    }
    let own = bank.cluster(pred.predicted_score);
    let competing_min = bank
        .clusters
        .iter()
        .enumerate()
        .filter(|(s, _)| *s != pred.predicted_score as usize)
        .filter_map(|(_, c)| min_sq_dist(h, c))
        .min_by(|a, b| a.total_cmp(b));

    let value = match (min_sq_dist(h, own), competing_min) {
        (Some(_), None) => 1.0,
        (None, Some(_)) => 0.0,
        (None, None) => unreachable!("bank verified non-empty"),
        (Some(dp_sq), Some(dc_sq)) => {
            let (d_p, d_c) = (dp_sq.sqrt(), dc_sq.sqrt());
            if d_p == 0.0 && d_c == 0.0 {
                0.5
            } else {
                d_c / (d_p + d_c)
            }
        }
    };
    Ok(ConfidenceScore {
        answer_id: pred.answer_id.clone(),
        method: Method::Trust,
        value,
    })
}
