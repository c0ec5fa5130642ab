//! Gaussian-process regression over answer embeddings.
//!
//! An RBF-kernel GP is fit on the training embeddings with standardized
//! gold scores as targets. Its predictive standard deviation drives the
//! `gp` confidence method (1/(1+sigma)), and its rounded, clipped mean can
//! serve as the score itself.
//!
//! The factorization works on K + sigma_n^2 I + jitter I. Predictive
//! variance is the latent-function variance (no observation noise), so a
//! query on a training point with tiny noise collapses toward 0 and a far
//! query reverts to the prior signal variance.

use serde::{Deserialize, Serialize};

use crate::confidence::{ConfidenceScore, Method};
use crate::corpus::{AnswerRecord, PromptSpec};
use crate::error::{Error, Result};
use crate::features::featurize;
use crate::scorer::{Prediction, ScoringModel};

pub const MAX_JITTER: f64 = 1e-4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GprHyper {
    /// RBF lengthscale; None selects the median pairwise distance of the
    /// training embeddings at fit time.
    pub lengthscale: Option<f64>,
    pub signal_var: f64,
    pub noise_var: f64,
    pub jitter: f64,
}

impl Default for GprHyper {
    fn default() -> Self {
        GprHyper {
            lengthscale: None,
            signal_var: 1.0,
            noise_var: 0.1,
            jitter: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GprModel {
    pub prompt_id: String,
    pub lengthscale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
    /// Jitter actually used by the successful factorization.
    pub jitter: f64,
    pub target_mean: f64,
    pub target_std: f64,
    /// k training embeddings, each of the encoder's hidden dimension.
    x: Vec<Vec<f64>>,
    /// Lower-triangular Cholesky factor of K + noise_var I + jitter I,
    /// row-major k x k.
    chol: Vec<f64>,
    /// (K + noise_var I + jitter I)^-1 t for standardized targets t.
    alpha: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// In-place lower Cholesky of a dense symmetric matrix; None if any pivot
/// is non-positive.
pub(crate) fn cholesky(a: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for m in 0..j {
                s -= l[i * k + m] * l[j * k + m];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    Some(l)
}

/// Try base + jitter I with jitter escalating tenfold up to [`MAX_JITTER`].
pub(crate) fn factor_with_escalation(
    base: &[f64],
    k: usize,
    start_jitter: f64,
) -> Option<(Vec<f64>, f64)> {
    let mut jitter = start_jitter;
    loop {
        let mut a = base.to_vec();
        for i in 0..k {
            a[i * k + i] += jitter;
        }
        if let Some(l) = cholesky(&a, k) {
            return Some((l, jitter));
        }
        if jitter >= MAX_JITTER {
            return None;
        }
        jitter = (jitter * 10.0).min(MAX_JITTER);
    }
}

fn forward_solve(l: &[f64], k: usize, b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; k];
    for i in 0..k {
        let mut s = b[i];
        for j in 0..i {
            s -= l[i * k + j] * z[j];
        }
        z[i] = s / l[i * k + i];
    }
    z
}

fn back_solve_transposed(l: &[f64], k: usize, z: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = z[i];
        for j in i + 1..k {
            s -= l[j * k + i] * x[j];
        }
        x[i] = s / l[i * k + i];
    }
    x
}

fn median_pairwise_distance(x: &[Vec<f64>]) -> f64 {
    let mut dists = Vec::new();
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            dists.push(sq_dist(&x[i], &x[j]).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    let median = dists[dists.len() / 2];
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

impl GprModel {
    /// Fit on raw embeddings and targets. `fit_gpr` is the record-level
    /// wrapper; this entry point also serves oracle comparisons.
    pub fn fit(
        prompt_id: &str,
        x: Vec<Vec<f64>>,
        targets: &[f64],
        hp: &GprHyper,
    ) -> Result<GprModel> {
        if x.is_empty() {
            return Err(Error::EmptyTrainSet);
        }
        if x.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: targets.len(),
            });
        }
        if let Some(l) = hp.lengthscale {
            if l <= 0.0 {
                return Err(Error::Config("gpr lengthscale must be > 0".into()));
            }
        }
        if hp.signal_var <= 0.0 || hp.noise_var <= 0.0 || hp.jitter <= 0.0 {
            return Err(Error::Config(
                "gpr signal_var, noise_var, and jitter must be > 0".into(),
            ));
        }
        let dim = x[0].len();
        for e in &x {
            if e.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: e.len(),
                });
            }
        }

        let k = x.len();
        let target_mean = targets.iter().sum::<f64>() / k as f64;
        let var = targets
            .iter()
            .map(|t| (t - target_mean) * (t - target_mean))
            .sum::<f64>()
            / k as f64;
        let target_std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        let t: Vec<f64> = targets.iter().map(|y| (y - target_mean) / target_std).collect();

        let lengthscale = hp.lengthscale.unwrap_or_else(|| median_pairwise_distance(&x));
        let denom = 2.0 * lengthscale * lengthscale;
        let mut base = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..=i {
                let v = hp.signal_var * (-sq_dist(&x[i], &x[j]) / denom).exp();
                base[i * k + j] = v;
                base[j * k + i] = v;
            }
            base[i * k + i] += hp.noise_var;
        }

        let (chol, jitter) = factor_with_escalation(&base, k, hp.jitter).ok_or_else(|| {
            Error::Numerical(format!(
                "kernel matrix not positive definite after jitter escalation to {MAX_JITTER}"
            ))
        })?;
        let z = forward_solve(&chol, k, &t);
        let alpha = back_solve_transposed(&chol, k, &z);

        Ok(GprModel {
            prompt_id: prompt_id.to_string(),
            lengthscale,
            signal_var: hp.signal_var,
            noise_var: hp.noise_var,
            jitter,
            target_mean,
            target_std,
            x,
            chol,
            alpha,
        })
    }

    pub fn train_size(&self) -> usize {
        self.x.len()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    /// Predictive mean and variance in the original score units.
    pub fn predict_mean_var(&self, h: &[f64]) -> Result<(f64, f64)> {
        if h.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: h.len(),
            });
        }
        let k = self.x.len();
        let denom = 2.0 * self.lengthscale * self.lengthscale;
        let kstar: Vec<f64> = self
            .x
            .iter()
            .map(|xi| self.signal_var * (-sq_dist(h, xi) / denom).exp())
            .collect();
        let mean_std: f64 = kstar.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = forward_solve(&self.chol, k, &kstar);
        let var_std = (self.signal_var - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        let mean = mean_std * self.target_std + self.target_mean;
        let var = var_std * self.target_std * self.target_std;
        Ok((mean, var))
    }
}

/// Fit a GP on the embeddings of a training set, targets = gold scores.
pub fn fit_gpr(
    model: &ScoringModel,
    train_set: &[&AnswerRecord],
    hp: &GprHyper,
) -> Result<GprModel> {
    if train_set.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let mut x = Vec::with_capacity(train_set.len());
    let mut targets = Vec::with_capacity(train_set.len());
    for r in train_set {
        if r.prompt_id != model.prompt_id {
            return Err(Error::PromptMismatch {
                expected: model.prompt_id.clone(),
                actual: r.prompt_id.clone(),
            });
        }
        x.push(model.embed(&featurize(&r.text)));
        targets.push(r.gold_score as f64);
    }
    GprModel::fit(&model.prompt_id, x, &targets, hp)
}

pub(crate) fn clip_round(mean: f64, max_score: u32) -> u32 {
    mean.clamp(0.0, max_score as f64).round() as u32
}

/// Regression view of one prediction: clipped, rounded predictive mean as
/// the score, 1/(1+sigma) as the confidence.
pub fn gp_predict(
    gpr: &GprModel,
    pred: &Prediction,
    prompt: &PromptSpec,
) -> Result<(u32, ConfidenceScore)> {
    let (mean, var) = gpr.predict_mean_var(&pred.embedding)?;
    let sigma = var.sqrt();
    Ok((
        clip_round(mean, prompt.max_score),
        ConfidenceScore {
            answer_id: pred.answer_id.clone(),
            method: Method::Gp,
            value: 1.0 / (1.0 + sigma),
        },
    ))
}
