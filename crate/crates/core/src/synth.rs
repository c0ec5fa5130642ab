//! Synthetic corpus generator for desk-scale experiments.
//!
//! Each prompt gets disjoint per-score keyword tokens. An answer for true
//! score `t` mixes keywords of `t` with a few keywords of a neighboring
//! score plus filler words; the true class always keeps a strict keyword
//! majority, so a keyword-count rule recovers `t` exactly.
//!
//! Label noise is ambiguity-correlated: items whose gold score gets flipped
//! read maximally ambiguous (the neighbor class one keyword short of a tie),
//! the way human raters disagree mostly on borderline answers, while clean
//! answers keep a wide keyword margin. The marginal flip rate is exactly
//! `noise_rate`. The second rater independently corrupts gold at
//! `rater2_noise_rate`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{prompt_rng, AnswerRecord, Corpus, PromptSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_prompts: u32,
    pub n_answers: u32,
    pub max_score: u32,
    /// Size of the filler vocabulary shared by all prompts.
    pub vocab_size: u32,
    /// Probability that a record's gold score is flipped to another score.
    pub noise_rate: f64,
    /// Probability that rater2 disagrees with gold.
    pub rater2_noise_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_prompts: 5,
            n_answers: 500,
            max_score: 3,
            vocab_size: 50,
            noise_rate: 0.1,
            rater2_noise_rate: 0.1,
            seed: 0,
        }
    }
}

fn validate(config: &SynthConfig) -> Result<()> {
    let check = |name: &str, ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid {name} in synth config")))
        }
    };
    check("n_prompts", config.n_prompts >= 1)?;
    check("n_answers", config.n_answers >= 1)?;
    check("max_score", config.max_score >= 1)?;
    check("vocab_size", config.vocab_size >= 1)?;
    check(
        "noise_rate",
        (0.0..=1.0).contains(&config.noise_rate),
    )?;
    check(
        "rater2_noise_rate",
        (0.0..=1.0).contains(&config.rater2_noise_rate),
    )
}

/// Keyword token for score class `s` of prompt `p`, variant `v`.
fn keyword(p: u32, s: u32, v: u32) -> String {
    format!("key{p}c{s}v{v}")
}

/// Uniform draw over `0..=max` excluding `not`.
fn other_score<R: Rng>(rng: &mut R, max: u32, not: u32) -> u32 {
    let o = rng.random_range(0..max);
    if o >= not {
        o + 1
    } else {
        o
    }
}

pub fn synthesize_corpus(config: &SynthConfig) -> Result<Corpus> {
    validate(config)?;
    let n = config.max_score;
    let mut prompts = Vec::new();
    let mut records = Vec::new();

    for p in 1..=config.n_prompts {
        let prompt_id = format!("p{p}");
        let mut rng = prompt_rng(config.seed, &prompt_id);
        prompts.push(PromptSpec {
            prompt_id: prompt_id.clone(),
            max_score: n,
            description: Some(format!("synthetic prompt {p}")),
        });

        for a in 1..=config.n_answers {
            let t = rng.random_range(0..=n);
            let flip = rng.random_bool(config.noise_rate);
            // Mixing level: clean answers stay clearly on the true side
            // (at most 1 of 9 keyword slots goes to the neighbor); flipped
            // answers sit at the maximal 4-of-9 ambiguity. The empty bands
            // in between keep ambiguity visible to a trained model.
            let raw: f64 = rng.random();
            let mix = if flip { (8.0 + raw) / 9.0 } else { raw * 0.44 };

            let neighbor = if t == 0 {
                1
            } else if t == n {
                n - 1
            } else if rng.random_bool(0.5) {
                t + 1
            } else {
                t - 1
            };

            // 9 keyword slots; at most 4 go to the neighbor, so the true
            // class always holds a strict majority.
            let k_neigh = (mix * 4.5).floor() as usize;
            let k_true = 9 - k_neigh;
            let mut tokens = Vec::new();
            for _ in 0..k_true {
                tokens.push(keyword(p, t, rng.random_range(0..3)));
            }
            for _ in 0..k_neigh {
                tokens.push(keyword(p, neighbor, rng.random_range(0..3)));
            }
            let fillers = rng.random_range(4..=10);
            for _ in 0..fillers {
                tokens.push(format!("w{}", rng.random_range(0..config.vocab_size)));
            }
            tokens.shuffle(&mut rng);

            let gold = if flip { other_score(&mut rng, n, t) } else { t };
            let rater2 = if rng.random_bool(config.rater2_noise_rate) {
                other_score(&mut rng, n, gold)
            } else {
                gold
            };

            records.push(AnswerRecord {
                answer_id: format!("p{p}a{a}"),
                prompt_id: prompt_id.clone(),
                text: tokens.join(" "),
                gold_score: gold,
                rater2_score: Some(rater2),
            });
        }
    }
    Corpus::new(prompts, records)
}
