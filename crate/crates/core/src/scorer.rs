//! Probabilistic scoring model: hashed n-gram encoder with one tanh hidden
//! layer and a softmax-affine head over the `N+1` score classes.
//!
//! Training minimizes the summed negative log-likelihood plus an L2 penalty
//! by seeded mini-batch gradient descent. The hidden activation doubles as
//! the answer embedding consumed by the confidence estimators.
//!
//! The hidden weight matrix is logically `d_h x FEATURE_DIM` but stored as a
//! sparse column map: columns start at zero and only columns touched by
//! training data ever become nonzero, so unseen n-grams contribute nothing
//! at inference time.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnswerRecord, PromptSpec};
use crate::error::{Error, Result};
use crate::features::{featurize, FeatureVector, FEATURE_DIM};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperParams {
    /// Width of the hidden layer (the embedding dimension d_h).
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            hidden_dim: 64,
            epochs: 50,
            learning_rate: 0.1,
            l2: 1e-4,
            batch_size: 16,
            seed: 0,
        }
    }
}

/// Bookkeeping recorded at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    /// Full objective (summed NLL + L2 penalty) before the first epoch.
    pub initial_loss: f64,
    /// Full objective after the last epoch.
    pub final_loss: f64,
    /// Objective after each epoch.
    pub loss_history: Vec<f64>,
}

/// A trained scoring model for one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringModel {
    pub prompt_id: String,
    /// Top score N; the head has N+1 classes.
    pub max_score: u32,
    pub hidden_dim: usize,
    pub feature_dim: u32,
    /// Sparse columns of the d_h x feature_dim hidden matrix; missing
    /// columns are zero.
    hidden_columns: BTreeMap<u32, Vec<f64>>,
    hidden_bias: Vec<f64>,
    /// Row-major (N+1) x d_h.
    head_weights: Vec<f64>,
    head_bias: Vec<f64>,
    pub meta: TrainingMeta,
}

/// One scored answer: the argmax score, the full posterior, and the hidden
/// embedding used by the confidence estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub answer_id: String,
    pub predicted_score: u32,
    pub posterior: Vec<f64>,
    pub embedding: Vec<f64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Lowest index wins exact ties.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl ScoringModel {
    /// All-zero model (uniform posterior everywhere). Training starts here
    /// except for the head weights, which get a small seeded random init.
    pub fn new_zeroed(prompt: &PromptSpec, hidden_dim: usize) -> Self {
        let classes = prompt.max_score as usize + 1;
        ScoringModel {
            prompt_id: prompt.prompt_id.clone(),
            max_score: prompt.max_score,
            hidden_dim,
            feature_dim: FEATURE_DIM,
            hidden_columns: BTreeMap::new(),
            hidden_bias: vec![0.0; hidden_dim],
            head_weights: vec![0.0; classes * hidden_dim],
            head_bias: vec![0.0; classes],
            meta: TrainingMeta {
                epochs: 0,
                seed: 0,
                learning_rate: 0.0,
                l2: 0.0,
                batch_size: 0,
                initial_loss: 0.0,
                final_loss: 0.0,
                loss_history: Vec::new(),
            },
        }
    }

    pub fn classes(&self) -> usize {
        self.max_score as usize + 1
    }

    /// Hidden activation h = tanh(W x + b) for a feature vector.
    pub fn embed(&self, features: &FeatureVector) -> Vec<f64> {
        let mut pre = self.hidden_bias.clone();
        for (col, x) in &features.entries {
            if let Some(w) = self.hidden_columns.get(col) {
                for (p, wk) in pre.iter_mut().zip(w) {
                    *p += wk * x;
                }
            }
        }
        pre.iter_mut().for_each(|p| *p = p.tanh());
        pre
    }

    fn logits(&self, h: &[f64]) -> Vec<f64> {
        let mut z = self.head_bias.clone();
        for (r, zr) in z.iter_mut().enumerate() {
            let row = &self.head_weights[r * self.hidden_dim..(r + 1) * self.hidden_dim];
            *zr += row.iter().zip(h).map(|(w, hk)| w * hk).sum::<f64>();
        }
        z
    }

    /// Score one answer: posterior over `0..=N`, argmax score (lowest wins
    /// ties), and the embedding.
    pub fn predict(&self, record: &AnswerRecord) -> Result<Prediction> {
        if record.prompt_id != self.prompt_id {
            return Err(Error::PromptMismatch {
                expected: self.prompt_id.clone(),
                actual: record.prompt_id.clone(),
            });
        }
        let h = self.embed(&featurize(&record.text));
        let posterior = softmax(&self.logits(&h));
        Ok(Prediction {
            answer_id: record.answer_id.clone(),
            predicted_score: argmax(&posterior) as u32,
            posterior,
            embedding: h,
        })
    }

    // -- full-batch objective, used by training bookkeeping and the
    //    finite-difference gradient checks ------------------------------

    /// Summed NLL over `examples` plus `l2 * ||params||^2` over all stored
    /// parameters.
    pub fn loss(&self, examples: &[(FeatureVector, u32)], l2: f64) -> f64 {
        let mut nll = 0.0;
        for (x, s) in examples {
            let h = self.embed(x);
            let p = softmax(&self.logits(&h));
            nll -= p[*s as usize].max(f64::MIN_POSITIVE).ln();
        }
        nll + l2 * self.param_sq_norm()
    }

    fn param_sq_norm(&self) -> f64 {
        let mut sq: f64 = 0.0;
        sq += self.head_weights.iter().map(|w| w * w).sum::<f64>();
        sq += self.head_bias.iter().map(|w| w * w).sum::<f64>();
        sq += self.hidden_bias.iter().map(|w| w * w).sum::<f64>();
        for col in self.hidden_columns.values() {
            sq += col.iter().map(|w| w * w).sum::<f64>();
        }
        sq
    }

    /// Flat view of all stored parameters: head weights, head bias, hidden
    /// bias, then the stored hidden columns in index order.
    pub fn params(&self) -> Vec<f64> {
        let mut out = self.head_weights.clone();
        out.extend_from_slice(&self.head_bias);
        out.extend_from_slice(&self.hidden_bias);
        for col in self.hidden_columns.values() {
            out.extend_from_slice(col);
        }
        out
    }

    /// Overwrite all stored parameters from a flat vector laid out as in
    /// [`params`](Self::params).
    pub fn set_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for w in self.head_weights.iter_mut() {
            *w = it.next().expect("flat params too short");
        }
        for w in self.head_bias.iter_mut() {
            *w = it.next().expect("flat params too short");
        }
        for w in self.hidden_bias.iter_mut() {
            *w = it.next().expect("flat params too short");
        }
        for col in self.hidden_columns.values_mut() {
            for w in col.iter_mut() {
                *w = it.next().expect("flat params too short");
            }
        }
        assert!(it.next().is_none(), "flat params too long");
    }

    /// Analytic gradient of [`loss`](Self::loss), flattened as in
    /// [`params`](Self::params). Gradients are taken only with respect to
    /// stored parameters; absent hidden columns are constant zero.
    pub fn gradient(&self, examples: &[(FeatureVector, u32)], l2: f64) -> Vec<f64> {
        let d_h = self.hidden_dim;
        let classes = self.classes();
        let mut g_head_w = vec![0.0; classes * d_h];
        let mut g_head_b = vec![0.0; classes];
        let mut g_hidden_b = vec![0.0; d_h];
        let mut g_cols: BTreeMap<u32, Vec<f64>> = BTreeMap::new();

        for (x, s) in examples {
            let h = self.embed(x);
            let p = softmax(&self.logits(&h));
            let mut dz = p;
            dz[*s as usize] -= 1.0;

            for (r, dzr) in dz.iter().enumerate() {
                for k in 0..d_h {
                    g_head_w[r * d_h + k] += dzr * h[k];
                }
                g_head_b[r] += dzr;
            }
            // da = (W^T dz) * (1 - h^2)
            let mut da = vec![0.0; d_h];
            for (r, dzr) in dz.iter().enumerate() {
                let row = &self.head_weights[r * d_h..(r + 1) * d_h];
                for k in 0..d_h {
                    da[k] += row[k] * dzr;
                }
            }
            for k in 0..d_h {
                da[k] *= 1.0 - h[k] * h[k];
                g_hidden_b[k] += da[k];
            }
            for (col, xv) in &x.entries {
                if self.hidden_columns.contains_key(col) {
                    let g = g_cols.entry(*col).or_insert_with(|| vec![0.0; d_h]);
                    for k in 0..d_h {
                        g[k] += da[k] * xv;
                    }
                }
            }
        }

        let two_l2 = 2.0 * l2;
        let mut flat = Vec::with_capacity(self.params().len());
        for (g, w) in g_head_w.iter().zip(&self.head_weights) {
            flat.push(g + two_l2 * w);
        }
        for (g, w) in g_head_b.iter().zip(&self.head_bias) {
            flat.push(g + two_l2 * w);
        }
        for (g, w) in g_hidden_b.iter().zip(&self.hidden_bias) {
            flat.push(g + two_l2 * w);
        }
        for (col, w) in &self.hidden_columns {
            match g_cols.get(col) {
                Some(g) => flat.extend(g.iter().zip(w).map(|(g, w)| g + two_l2 * w)),
                None => flat.extend(w.iter().map(|w| two_l2 * w)),
            }
        }
        flat
    }

    // -- persistence ----------------------------------------------------

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        let json = serde_json::to_string(&file).expect("model serialization cannot fail");
        crate::pipeline::write_atomic(path, json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<ScoringModel> {
        let display = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(|e| Error::parse(&display, e.line(), e.to_string()))?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion {
                expected: MODEL_FORMAT_VERSION,
                found: file.version,
            });
        }
        Ok(file.model)
    }
}

// No flatten: serde's flatten buffering cannot round-trip the integer keys
// of the sparse column map.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    model: ScoringModel,
}

/// Train a scoring model on one prompt's records.
///
/// Deterministic given the hyperparameter seed. Fails on an empty train set,
/// on records from a different prompt, and if the objective ever goes
/// non-finite.
pub fn train(
    train_set: &[&AnswerRecord],
    prompt: &PromptSpec,
    hp: &HyperParams,
) -> Result<ScoringModel> {
    if train_set.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    for r in train_set {
        if r.prompt_id != prompt.prompt_id {
            return Err(Error::PromptMismatch {
                expected: prompt.prompt_id.clone(),
                actual: r.prompt_id.clone(),
            });
        }
    }

    let examples: Vec<(FeatureVector, u32)> = train_set
        .iter()
        .map(|r| (featurize(&r.text), r.gold_score))
        .collect();

    let mut model = ScoringModel::new_zeroed(prompt, hp.hidden_dim);
    let mut rng = ChaCha12Rng::seed_from_u64(hp.seed);
    for w in model.head_weights.iter_mut() {
        *w = rng.random_range(-0.05..0.05);
    }
    // Materialize every column seen in training so gradient updates have a
    // slot to land in; they start at zero.
    for (x, _) in &examples {
        for (col, _) in &x.entries {
            model
                .hidden_columns
                .entry(*col)
                .or_insert_with(|| vec![0.0; hp.hidden_dim]);
        }
    }

    let initial_loss = model.loss(&examples, hp.l2);
    let mut loss_history = Vec::with_capacity(hp.epochs);
    let d_h = hp.hidden_dim;
    let classes = model.classes();
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hp.batch_size.max(1)) {
            let scale = 1.0 / batch.len() as f64;
            let mut g_head_w = vec![0.0; classes * d_h];
            let mut g_head_b = vec![0.0; classes];
            let mut g_hidden_b = vec![0.0; d_h];
            let mut g_cols: HashMap<u32, Vec<f64>> = HashMap::new();

            for &i in batch {
                let (x, s) = &examples[i];
                let h = model.embed(x);
                let p = softmax(&model.logits(&h));
                let mut dz = p;
                dz[*s as usize] -= 1.0;

                for (r, dzr) in dz.iter().enumerate() {
                    for k in 0..d_h {
                        g_head_w[r * d_h + k] += dzr * h[k];
                    }
                    g_head_b[r] += dzr;
                }
                let mut da = vec![0.0; d_h];
                for (r, dzr) in dz.iter().enumerate() {
                    let row = &model.head_weights[r * d_h..(r + 1) * d_h];
                    for k in 0..d_h {
                        da[k] += row[k] * dzr;
                    }
                }
                for k in 0..d_h {
                    da[k] *= 1.0 - h[k] * h[k];
                    g_hidden_b[k] += da[k];
                }
                for (col, xv) in &x.entries {
                    let g = g_cols.entry(*col).or_insert_with(|| vec![0.0; d_h]);
                    for k in 0..d_h {
                        g[k] += da[k] * xv;
                    }
                }
            }

            // Mean NLL gradient per batch, with the L2 pull applied lazily
            // to the parameters the batch touches.
            let lr = hp.learning_rate;
            let decay = 2.0 * hp.l2;
            for (w, g) in model.head_weights.iter_mut().zip(&g_head_w) {
                *w -= lr * (g * scale + decay * *w);
            }
            for (w, g) in model.head_bias.iter_mut().zip(&g_head_b) {
                *w -= lr * (g * scale + decay * *w);
            }
            for (w, g) in model.hidden_bias.iter_mut().zip(&g_hidden_b) {
                *w -= lr * (g * scale + decay * *w);
            }
            for (col, g) in &g_cols {
                let w = model
                    .hidden_columns
                    .get_mut(col)
                    .expect("all data columns were materialized");
                for k in 0..d_h {
                    w[k] -= lr * (g[k] * scale + decay * w[k]);
                }
            }
        }

        let loss = model.loss(&examples, hp.l2);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        loss_history.push(loss);
    }

    model.meta = TrainingMeta {
        epochs: hp.epochs,
        seed: hp.seed,
        learning_rate: hp.learning_rate,
        l2: hp.l2,
        batch_size: hp.batch_size,
        initial_loss,
        final_loss: loss_history.last().copied().unwrap_or(initial_loss),
        loss_history,
    };
    Ok(model)
}
