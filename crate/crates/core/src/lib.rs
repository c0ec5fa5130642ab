//! Selective prediction for automated short answer scoring.
//!
//! A probabilistic scorer grades each answer and a confidence function
//! decides whether to keep the machine score or route the answer to a human
//! grader. The confidence threshold is calibrated on development data so
//! the final error of the mixed machine+human scores stays within a chosen
//! budget, trading grading cost (coverage) against quality.
//!
//! Pipeline: [`corpus`] loads or synthesizes graded answers and manages
//! splits; [`scorer`] trains the hashed n-gram classifier; [`confidence`]
//! and [`gpr`] compute the three confidence functions; [`calibration`]
//! estimates the threshold for an error budget; [`triage`] routes a test
//! set and evaluates coverage, final RMSE, and inter-grader agreement;
//! [`pipeline`] orchestrates whole experiment grids and renders CSVs.

pub mod calibration;
pub mod confidence;
pub mod corpus;
pub mod error;
pub mod features;
pub mod gpr;
pub mod pipeline;
pub mod scorer;
pub mod synth;
pub mod triage;

pub use calibration::{estimate_threshold, final_rmse, ErrBudget, ThresholdPolicy};
pub use confidence::{
    build_reference_bank, posterior_confidence, trust_score, ConfidenceScore, Method,
    ReferenceBank,
};
pub use corpus::{
    load_corpus, make_fold_splits, make_splits, save_corpus, AnswerRecord, Corpus, CorpusFormat,
    PromptSpec, SplitSpec,
};
pub use error::{Error, Result};
pub use gpr::{fit_gpr, gp_predict, GprHyper, GprModel};
pub use pipeline::{run_experiment, ExperimentResult, RunConfig};
pub use scorer::{train, HyperParams, Prediction, ScoringModel};
pub use synth::{synthesize_corpus, SynthConfig};
pub use triage::{iga_analysis, qwk, rmse_at_top_coverage, run_triage, TestPred, TriageOutcome};
