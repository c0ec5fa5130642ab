//! Acceptance gate: ten end-to-end checks, one printed verdict line each.
//! Run `cargo test --test acceptance -- --nocapture` to see every line;
//! any failed check also fails the suite.

mod common;

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use gradegate::calibration::{estimate_threshold, DevItem, ErrBudget};
use gradegate::confidence::{trust_score, Method, ReferenceBank};
use gradegate::corpus::{AnswerRecord, PromptSpec};
use gradegate::features::{featurize, FeatureVector};
use gradegate::gpr::{GprHyper, GprModel};
use gradegate::pipeline::{
    confidence_dump_csv, curves_csv, iga_csv, iga_prompts_csv, outcomes_csv, run_experiment,
    summary_csv, ExperimentResult, RunConfig,
};
use gradegate::scorer::{train, HyperParams, Prediction};
use gradegate::synth::{synthesize_corpus, SynthConfig};
use gradegate::triage::{qwk, IgaGroup};

fn verdict(criterion: u32, label: &str, ok: bool, detail: &str) {
    println!(
        "[{}] {criterion:02} {label}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "check {criterion:02} ({label}) failed: {detail}");
}

/// Shared 5-prompt experiment: 500 answers each, 10% label noise, ten run
/// seeds, the default budget grid and methods.
struct BigRun {
    result: ExperimentResult,
    elapsed: Duration,
}

fn big_run() -> &'static BigRun {
    static RUN: OnceLock<BigRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let corpus = synthesize_corpus(&SynthConfig {
            n_prompts: 5,
            n_answers: 500,
            max_score: 3,
            vocab_size: 50,
            noise_rate: 0.1,
            rater2_noise_rate: 0.1,
            seed: 42,
        })
        .expect("synthesize shared corpus");
        let config = RunConfig {
            seeds: (0..10).collect(),
            ..RunConfig::default()
        };
        let start = Instant::now();
        let result = run_experiment(&corpus, &config).expect("shared experiment");
        BigRun {
            result,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn c01_budget_control() {
    let run = big_run();
    let summary = &run.result.summary;
    let mut ok = summary.len() == Method::ALL.len() * 4;
    let mut min_slack = f64::INFINITY;
    for row in summary {
        ok &= row.n_runs == 50;
        ok &= row.mean_final_rmse >= 0.0;
        let slack = row.target_e + 0.05 - row.mean_final_rmse;
        min_slack = min_slack.min(slack);
        ok &= slack >= 0.0;
    }
    let within_budget = run.elapsed < Duration::from_secs(120);
    ok &= within_budget;
    verdict(
        1,
        "budget control",
        ok,
        &format!(
            "macro test rmse within [0, e+0.05] for {} (method, e) cells over 5 prompts x 10 seeds; min slack {:.4}; runtime {:.1}s",
            summary.len(),
            min_slack,
            run.elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c02_coverage_monotone_in_budget() {
    let run = big_run();
    // (e, coverage) series keyed by (prompt, method, seed).
    type Series<'a> = BTreeMap<(&'a str, Method, u64), Vec<(f64, f64)>>;
    let mut groups: Series = BTreeMap::new();
    for row in &run.result.outcomes {
        groups
            .entry((row.prompt_id.as_str(), row.method, row.seed))
            .or_default()
            .push((row.target_e, row.coverage));
    }
    let mut ok = !groups.is_empty();
    let mut checked = 0usize;
    for series in groups.values_mut() {
        series.sort_by(|a, b| a.0.total_cmp(&b.0));
        ok &= series.len() == 4;
        for pair in series.windows(2) {
            ok &= pair[1].1 >= pair[0].1;
            checked += 1;
        }
    }
    verdict(
        2,
        "coverage monotone in e",
        ok,
        &format!(
            "exact non-decrease across the budget grid for {} (prompt, method, seed) series ({checked} adjacent pairs)",
            groups.len()
        ),
    );
}

#[test]
fn c03_threshold_matches_brute_force() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xACC0_0003);
    let mut ok = true;
    let mut checked = 0usize;
    for _ in 0..200 {
        let n = rng.random_range(5..=60);
        let dev: Vec<DevItem> = (0..n)
            .map(|_| {
                // Coarse grid values force tie groups; occasional NaN
                // exercises the never-auto rule.
                let confidence = match rng.random_range(0..10u32) {
                    0 => f64::NAN,
                    1..=4 => f64::from(rng.random_range(0..=10u32)) / 10.0,
                    _ => rng.random(),
                };
                let gold = rng.random_range(0..=3);
                let predicted = if rng.random_bool(0.7) {
                    gold
                } else {
                    rng.random_range(0..=3)
                };
                DevItem {
                    confidence,
                    predicted,
                    gold,
                }
            })
            .collect();
        for _ in 0..50 {
            let budget = ErrBudget::rmse(rng.random::<f64>() * 1.2).unwrap();
            let policy =
                estimate_threshold("p1", Method::Posterior, &dev, &budget, &[0]).unwrap();
            let (tau, coverage, err) = common::brute_force_threshold(&dev, budget.value);
            ok &= policy.tau.to_bits() == tau.to_bits();
            ok &= policy.dev_coverage == coverage;
            ok &= policy.dev_err == err;
            checked += 1;
        }
    }
    verdict(
        3,
        "threshold search equals exhaustive oracle",
        ok,
        &format!("identical tau, coverage, and dev error on {checked} (dev set, budget) cases"),
    );
}

#[test]
fn c04_trust_matches_brute_force() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xACC0_0004);
    let mut ok = true;
    let mut worst = 0.0f64;
    for case in 0..100 {
        let dim = rng.random_range(2..=8);
        let n_classes = rng.random_range(2..=5usize);
        let mut clusters: Vec<Vec<Vec<f64>>> = (0..n_classes)
            .map(|_| {
                let size = rng.random_range(0..=5);
                (0..size)
                    .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        if case % 10 == 0 {
            // Lone-cluster banks exercise the missing-competitor rule.
            let keep = rng.random_range(0..n_classes);
            for (s, cluster) in clusters.iter_mut().enumerate() {
                if s != keep {
                    cluster.clear();
                }
            }
        }
        if clusters.iter().all(Vec::is_empty) {
            clusters[0].push((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
        }

        let embedding: Vec<f64> = if case % 7 == 0 {
            // Coincide with a stored member when one exists (d = 0 paths).
            clusters
                .iter()
                .flatten()
                .next()
                .cloned()
                .unwrap_or_else(|| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        } else {
            (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let predicted = rng.random_range(0..n_classes);

        let bank = ReferenceBank::from_clusters("p1", dim, clusters.clone()).unwrap();
        let pred = Prediction {
            answer_id: format!("a{case}"),
            predicted_score: predicted as u32,
            posterior: vec![1.0 / n_classes as f64; n_classes],
            embedding,
        };
        let ours = trust_score(&pred, &bank).unwrap().value;
        let oracle = common::brute_force_trust(&clusters, predicted, &pred.embedding);
        worst = worst.max((ours - oracle).abs());
        ok &= (ours - oracle).abs() <= 1e-9;
    }
    verdict(
        4,
        "trust score equals brute-force scan",
        ok,
        &format!("100 random (bank, query) cases incl. empty clusters and d=0; max |diff| {worst:.2e}"),
    );
}

#[test]
fn c05_gpr_matches_dense_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xACC0_0005);
    let mut ok = true;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let dim = 3;
        let x: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..10).map(|_| f64::from(rng.random_range(0..=3u32))).collect();
        let hp = GprHyper {
            lengthscale: Some(rng.random_range(0.5..2.0)),
            signal_var: rng.random_range(0.5..2.0),
            noise_var: rng.random_range(0.05..0.5),
            jitter: 1e-8,
        };
        let model = GprModel::fit("p1", x.clone(), &targets, &hp).unwrap();
        let oracle = common::DenseGpr::fit(
            &x,
            &targets,
            model.lengthscale,
            model.signal_var,
            model.noise_var,
            model.jitter,
        );
        for _ in 0..5 {
            let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (mean, var) = model.predict_mean_var(&q).unwrap();
            let (mean_o, var_o) = oracle.predict(&q);
            worst = worst.max((mean - mean_o).abs()).max((var - var_o).abs());
            ok &= (mean - mean_o).abs() <= 1e-6 && (var - var_o).abs() <= 1e-6;
        }
    }

    // +-1 targets standardize to themselves (std exactly 1), so the
    // de-standardized variance reads in latent units.
    let x: Vec<Vec<f64>> = (0..6)
        .map(|i| vec![f64::from(i) * 1.5, f64::from(i % 2)])
        .collect();
    let targets: Vec<f64> = (0..6).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let tight = GprHyper {
        lengthscale: Some(1.0),
        signal_var: 1.3,
        noise_var: 1e-8,
        jitter: 1e-8,
    };
    let model = GprModel::fit("p1", x.clone(), &targets, &tight).unwrap();
    let mut train_var_max = 0.0f64;
    for xi in &x {
        let (_, var) = model.predict_mean_var(xi).unwrap();
        train_var_max = train_var_max.max(var);
    }
    ok &= train_var_max <= 1e-5;

    let (_, far_var) = model.predict_mean_var(&[500.0, -500.0]).unwrap();
    let reversion = (far_var - tight.signal_var).abs();
    ok &= reversion <= 1e-6;

    verdict(
        5,
        "gpr numerical correctness",
        ok,
        &format!(
            "dense-inverse oracle on 20 problems x 5 queries, max |diff| {worst:.2e}; train-point var {train_var_max:.2e} at noise 1e-8; far-field reversion |var - sigma_f^2| {reversion:.2e}"
        ),
    );
}

#[test]
fn c06_gradient_matches_finite_differences() {
    let prompt = PromptSpec {
        prompt_id: "p1".into(),
        max_score: 3,
        description: None,
    };
    let record = |id: &str, text: &str, gold: u32| AnswerRecord {
        answer_id: id.into(),
        prompt_id: "p1".into(),
        text: text.into(),
        gold_score: gold,
        rater2_score: None,
    };
    let records = [
        record("a1", "ab cd", 0),
        record("a2", "cd ef", 1),
        record("a3", "ef gh", 2),
        record("a4", "gh ab", 3),
        record("a5", "ab ef", 1),
    ];
    let refs: Vec<&AnswerRecord> = records.iter().collect();
    let hp = HyperParams {
        hidden_dim: 6,
        epochs: 1,
        seed: 17,
        ..HyperParams::default()
    };
    // One epoch materializes the touched feature columns; the check then
    // moves to a generic random point so no component is zero by symmetry.
    let mut model = train(&refs, &prompt, &hp).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(0xACC0_0006);
    let theta: Vec<f64> = model
        .params()
        .iter()
        .map(|_| rng.random_range(-0.5..0.5))
        .collect();
    model.set_params(&theta);

    let examples: Vec<(FeatureVector, u32)> = records
        .iter()
        .map(|r| (featurize(&r.text), r.gold_score))
        .collect();
    let l2 = 1e-3;
    let analytic = model.gradient(&examples, l2);
    let numeric = common::fd_gradient(&model, &examples, l2, 1e-5);

    let mut worst = 0.0f64;
    for (a, f) in analytic.iter().zip(&numeric) {
        let rel = (a - f).abs() / a.abs().max(f.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    let ok = analytic.len() == numeric.len() && worst <= 1e-4;
    verdict(
        6,
        "analytic gradient matches central differences",
        ok,
        &format!(
            "5 examples, 4 classes, {} parameters; worst relative error {worst:.2e}",
            analytic.len()
        ),
    );
}

#[test]
fn c07_higher_confidence_means_lower_rmse() {
    let run = big_run();
    let rmse_at = |method: Method, fraction: f64| -> f64 {
        run.result
            .curves
            .iter()
            .find(|c| c.method == method && (c.fraction - fraction).abs() < 1e-12)
            .expect("curve fraction present")
            .rmse
    };
    let mut ok = true;
    let mut detail = String::new();
    for method in Method::ALL {
        let top = rmse_at(method, 0.5);
        let full = rmse_at(method, 1.0);
        ok &= top < full;
        detail.push_str(&format!("{method} {top:.4} < {full:.4}; "));
    }
    verdict(
        7,
        "top-50% confidence rmse strictly below full-coverage rmse",
        ok,
        detail.trim_end_matches("; "),
    );
}

#[test]
fn c08_iga_gap() {
    let agreeable = synthesize_corpus(&SynthConfig {
        n_prompts: 2,
        n_answers: 500,
        max_score: 3,
        vocab_size: 50,
        noise_rate: 0.05,
        rater2_noise_rate: 0.05,
        seed: 7,
    })
    .unwrap();
    let contested = synthesize_corpus(&SynthConfig {
        n_prompts: 2,
        n_answers: 500,
        max_score: 3,
        vocab_size: 50,
        noise_rate: 0.4,
        rater2_noise_rate: 0.4,
        seed: 8,
    })
    .unwrap();
    let corpus = agreeable
        .merge(common::offset_prompt_ids(contested, 2))
        .unwrap();
    let config = RunConfig {
        budgets: vec![0.04],
        seeds: (0..10).collect(),
        ..RunConfig::default()
    };
    let result = run_experiment(&corpus, &config).unwrap();

    let iga = result.iga.expect("rater2 scores present on every record");
    let mut ok = !iga.degenerate;
    let split_sizes = {
        let higher = iga.prompts.iter().filter(|(_, _, g)| *g == IgaGroup::Higher).count();
        (higher, iga.prompts.len() - higher)
    };
    ok &= split_sizes == (2, 2);

    let mut detail = format!(
        "mean IGA {:.3}, groups {}/{}; ",
        iga.mean_iga, split_sizes.0, split_sizes.1
    );
    for method in Method::ALL {
        let cell = |higher: bool| {
            iga.rows
                .iter()
                .find(|r| r.method == method && (r.group == IgaGroup::Higher) == higher)
                .expect("iga cell present")
        };
        let (hi, lo) = (cell(true), cell(false));
        ok &= hi.mean_coverage > lo.mean_coverage;
        ok &= hi.mean_final_rmse <= 0.09 && lo.mean_final_rmse <= 0.09;
        detail.push_str(&format!(
            "{method} cov {:.3}>{:.3} rmse {:.3}/{:.3}; ",
            hi.mean_coverage, lo.mean_coverage, hi.mean_final_rmse, lo.mean_final_rmse
        ));
    }
    verdict(
        8,
        "higher-IGA prompts keep more coverage at e=0.04",
        ok,
        detail.trim_end_matches("; "),
    );
}

#[test]
fn c09_qwk_oracle() {
    let mut ok = true;

    let self_cases: [&[u32]; 3] = [&[0, 1, 2, 3], &[1, 1, 0, 2, 3, 1], &[0, 3, 3, 0]];
    for a in self_cases {
        ok &= qwk(a, a, 3).unwrap() == 1.0;
    }

    let anti = qwk(&[0, 0, 1, 1], &[1, 1, 0, 0], 1).unwrap();
    ok &= anti == -1.0;

    let mut rng = ChaCha12Rng::seed_from_u64(0xACC0_0009);
    let a: Vec<u32> = (0..10_000).map(|_| rng.random_range(0..=3)).collect();
    let b: Vec<u32> = (0..10_000).map(|_| rng.random_range(0..=3)).collect();
    let chance = qwk(&a, &b, 3).unwrap();
    ok &= chance.abs() < 0.1;

    verdict(
        9,
        "qwk oracle",
        ok,
        &format!(
            "self-agreement 1.0; anti-agreement {anti}; chance level {chance:.4} at n=10000"
        ),
    );
}

#[test]
fn c10_byte_identical_reports() {
    let corpus = synthesize_corpus(&SynthConfig {
        n_prompts: 2,
        n_answers: 300,
        max_score: 3,
        vocab_size: 50,
        noise_rate: 0.1,
        rater2_noise_rate: 0.1,
        seed: 11,
    })
    .unwrap();
    let config = RunConfig {
        seeds: vec![0, 1],
        ..RunConfig::default()
    };

    let render = |result: &ExperimentResult| -> Vec<(String, String)> {
        let mut files = vec![
            ("outcomes.csv".to_string(), outcomes_csv(&result.outcomes)),
            ("curves.csv".to_string(), curves_csv(&result.curves)),
            ("summary.csv".to_string(), summary_csv(&result.summary)),
        ];
        let iga = result.iga.as_ref().expect("rater2 present");
        files.push(("iga.csv".to_string(), iga_csv(iga)));
        files.push(("iga_prompts.csv".to_string(), iga_prompts_csv(iga)));
        for (prompt_id, seed, rows) in &result.confidences {
            files.push((
                format!("confidences_{prompt_id}_seed{seed}.csv"),
                confidence_dump_csv(rows),
            ));
        }
        files
    };

    let first = render(&run_experiment(&corpus, &config).unwrap());
    let second = render(&run_experiment(&corpus, &config).unwrap());

    let mut ok = first.len() == second.len();
    let mut bytes = 0usize;
    for ((name_a, body_a), (name_b, body_b)) in first.iter().zip(&second) {
        ok &= name_a == name_b && body_a == body_b;
        bytes += body_a.len();
    }
    verdict(
        10,
        "pipeline reports are byte-identical across runs",
        ok,
        &format!("{} files, {bytes} bytes compared", first.len()),
    );
}
