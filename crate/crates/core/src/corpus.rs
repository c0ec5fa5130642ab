//! Graded answer corpora: prompts, answer records, ingestion, and splits.
//!
//! A corpus is a set of prompts, each with an integer score range `0..=N`,
//! plus the student answers graded against them. Answers arrive as JSONL or
//! TSV with a `prompts.json` sidecar declaring the prompts. Analytic-criterion
//! data is expected pre-flattened: each (prompt, criterion) pair is its own
//! prompt.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One prompt (question) with its score range `0..=max_score`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub prompt_id: String,
    /// Top of the integer score range; scores live in `0..=max_score`.
    pub max_score: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// One student answer with its gold score and optional second-rater score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub answer_id: String,
    pub prompt_id: String,
    /// Answer text; may be empty (real exam data contains blanks).
    pub text: String,
    pub gold_score: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rater2_score: Option<u32>,
}

/// Answer file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    pub fn answers_file_name(self) -> &'static str {
        match self {
            CorpusFormat::Jsonl => "answers.jsonl",
            CorpusFormat::Tsv => "answers.tsv",
        }
    }
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(Error::Config(format!("unknown corpus format '{other}'"))),
        }
    }
}

/// A validated corpus: prompts plus their answer records.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub prompts: Vec<PromptSpec>,
    pub records: Vec<AnswerRecord>,
}

impl Corpus {
    /// Assemble and validate a corpus from parts.
    ///
    /// Rejects duplicate prompt ids, duplicate answer ids within a prompt,
    /// out-of-range scores, undeclared prompts, and prompts with
    /// `max_score == 0`.
    pub fn new(prompts: Vec<PromptSpec>, records: Vec<AnswerRecord>) -> Result<Self> {
        let mut max_by_prompt: HashMap<&str, u32> = HashMap::new();
        for p in &prompts {
            if p.max_score < 1 {
                return Err(Error::Config(format!(
                    "prompt '{}' has max_score 0; the score range must contain at least 0 and 1",
                    p.prompt_id
                )));
            }
            if max_by_prompt.insert(&p.prompt_id, p.max_score).is_some() {
                return Err(Error::DuplicateId {
                    id: p.prompt_id.clone(),
                    scope: "prompts".into(),
                });
            }
        }
        let mut seen: HashSet<(&str, &str)> = HashSet::new();
        for r in &records {
            let max = *max_by_prompt
                .get(r.prompt_id.as_str())
                .ok_or_else(|| Error::UnknownPrompt {
                    prompt_id: r.prompt_id.clone(),
                    answer_id: r.answer_id.clone(),
                })?;
            if r.gold_score > max {
                return Err(Error::Range {
                    context: format!("prompt '{}'", r.prompt_id),
                    score: i64::from(r.gold_score),
                    max_score: max,
                });
            }
            if let Some(r2) = r.rater2_score {
                if r2 > max {
                    return Err(Error::Range {
                        context: format!("prompt '{}'", r.prompt_id),
                        score: i64::from(r2),
                        max_score: max,
                    });
                }
            }
            if !seen.insert((r.prompt_id.as_str(), r.answer_id.as_str())) {
                return Err(Error::DuplicateId {
                    id: r.answer_id.clone(),
                    scope: format!("prompt '{}'", r.prompt_id),
                });
            }
        }
        Ok(Corpus { prompts, records })
    }

    pub fn prompt(&self, prompt_id: &str) -> Option<&PromptSpec> {
        self.prompts.iter().find(|p| p.prompt_id == prompt_id)
    }

    /// Records of one prompt, in corpus order.
    pub fn records_for(&self, prompt_id: &str) -> Vec<&AnswerRecord> {
        self.records
            .iter()
            .filter(|r| r.prompt_id == prompt_id)
            .collect()
    }

    /// Merge two corpora; prompt ids must stay unique.
    pub fn merge(mut self, other: Corpus) -> Result<Corpus> {
        self.prompts.extend(other.prompts);
        self.records.extend(other.records);
        Corpus::new(self.prompts, self.records)
    }
}

// ---------------------------------------------------------------------------
// Loading and saving
// ---------------------------------------------------------------------------

/// Raw record as parsed, before range validation.
#[derive(Deserialize)]
struct RawRecord {
    answer_id: String,
    prompt_id: String,
    #[serde(default)]
    text: String,
    gold_score: i64,
    #[serde(default)]
    rater2_score: Option<i64>,
}

fn validate_score(prompt: &PromptSpec, score: i64) -> Result<u32> {
    if score < 0 || score > i64::from(prompt.max_score) {
        return Err(Error::Range {
            context: format!("prompt '{}'", prompt.prompt_id),
            score,
            max_score: prompt.max_score,
        });
    }
    Ok(score as u32)
}

fn load_prompts_sidecar(answers_path: &Path) -> Result<Vec<PromptSpec>> {
    let dir = answers_path.parent().unwrap_or_else(|| Path::new("."));
    let path = dir.join("prompts.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
}

/// Load a corpus from an answers file plus its `prompts.json` sidecar
/// (expected in the same directory).
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let prompts = load_prompts_sidecar(path)?;
    let by_id: HashMap<&str, &PromptSpec> =
        prompts.iter().map(|p| (p.prompt_id.as_str(), p)).collect();
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;

    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = match format {
            CorpusFormat::Jsonl => serde_json::from_str(line)
                .map_err(|e| Error::parse(&display, lineno, e.to_string()))?,
            CorpusFormat::Tsv => parse_tsv_line(line, &display, lineno)?,
        };
        let prompt = by_id
            .get(raw.prompt_id.as_str())
            .copied()
            .ok_or_else(|| Error::UnknownPrompt {
                prompt_id: raw.prompt_id.clone(),
                answer_id: raw.answer_id.clone(),
            })?;
        let gold_score = validate_score(prompt, raw.gold_score)?;
        let rater2_score = raw
            .rater2_score
            .map(|s| validate_score(prompt, s))
            .transpose()?;
        records.push(AnswerRecord {
            answer_id: raw.answer_id,
            prompt_id: raw.prompt_id,
            text: raw.text,
            gold_score,
            rater2_score,
        });
    }
    Corpus::new(prompts, records)
}

// TSV column order: answer_id, prompt_id, gold_score, rater2_score (may be
// empty), text. Text is last so embedded tabs are the only escaping concern,
// and those make the field count wrong, so they are rejected outright.
fn parse_tsv_line(line: &str, path: &str, lineno: usize) -> Result<RawRecord> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(Error::parse(
            path,
            lineno,
            format!("expected 5 tab-separated fields, found {}", fields.len()),
        ));
    }
    let gold_score: i64 = fields[2]
        .parse()
        .map_err(|_| Error::parse(path, lineno, format!("bad gold_score '{}'", fields[2])))?;
    let rater2_score = if fields[3].is_empty() {
        None
    } else {
        Some(fields[3].parse::<i64>().map_err(|_| {
            Error::parse(path, lineno, format!("bad rater2_score '{}'", fields[3]))
        })?)
    };
    Ok(RawRecord {
        answer_id: fields[0].to_string(),
        prompt_id: fields[1].to_string(),
        gold_score,
        rater2_score,
        text: fields[4].to_string(),
    })
}

/// Write `prompts.json` and the answers file into `dir`. Returns the answers
/// file path.
pub fn save_corpus(corpus: &Corpus, dir: &Path, format: CorpusFormat) -> Result<std::path::PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let prompts_path = dir.join("prompts.json");
    let prompts_json = serde_json::to_string_pretty(&corpus.prompts)
        .expect("prompt serialization cannot fail");
    crate::pipeline::write_atomic(&prompts_path, prompts_json.as_bytes())?;

    let answers_path = dir.join(format.answers_file_name());
    let mut buf: Vec<u8> = Vec::new();
    for r in &corpus.records {
        match format {
            CorpusFormat::Jsonl => {
                serde_json::to_writer(&mut buf, r).expect("record serialization cannot fail");
                buf.push(b'\n');
            }
            CorpusFormat::Tsv => {
                if r.text.contains('\t') || r.text.contains('\n') {
                    return Err(Error::Config(format!(
                        "answer '{}' contains a tab or newline; use JSONL for this corpus",
                        r.answer_id
                    )));
                }
                let rater2 = r.rater2_score.map(|s| s.to_string()).unwrap_or_default();
                writeln!(
                    buf,
                    "{}\t{}\t{}\t{}\t{}",
                    r.answer_id, r.prompt_id, r.gold_score, rater2, r.text
                )
                .expect("writing to Vec cannot fail");
            }
        }
    }
    crate::pipeline::write_atomic(&answers_path, &buf)?;
    Ok(answers_path)
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

/// Per-prompt train/dev/test partition of answer ids.
///
/// The three maps are keyed by prompt id; for every prompt the lists are
/// pairwise disjoint and together cover all of that prompt's records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fold_id: u32,
    pub train_ids: BTreeMap<String, Vec<String>>,
    pub dev_ids: BTreeMap<String, Vec<String>>,
    pub test_ids: BTreeMap<String, Vec<String>>,
}

impl SplitSpec {
    fn select<'a>(
        &'a self,
        corpus: &'a Corpus,
        ids: &BTreeMap<String, Vec<String>>,
        prompt_id: &str,
    ) -> Vec<&'a AnswerRecord> {
        let Some(wanted) = ids.get(prompt_id) else {
            return Vec::new();
        };
        let by_id: HashMap<&str, &AnswerRecord> = corpus
            .records
            .iter()
            .filter(|r| r.prompt_id == prompt_id)
            .map(|r| (r.answer_id.as_str(), r))
            .collect();
        wanted
            .iter()
            .filter_map(|id| by_id.get(id.as_str()).copied())
            .collect()
    }

    pub fn train_records<'a>(&'a self, corpus: &'a Corpus, prompt_id: &str) -> Vec<&'a AnswerRecord> {
        self.select(corpus, &self.train_ids, prompt_id)
    }

    pub fn dev_records<'a>(&'a self, corpus: &'a Corpus, prompt_id: &str) -> Vec<&'a AnswerRecord> {
        self.select(corpus, &self.dev_ids, prompt_id)
    }

    pub fn test_records<'a>(&'a self, corpus: &'a Corpus, prompt_id: &str) -> Vec<&'a AnswerRecord> {
        self.select(corpus, &self.test_ids, prompt_id)
    }
}

// Per-prompt RNG stream so split assignments do not depend on how many other
// prompts the corpus happens to contain.
pub(crate) fn prompt_rng(seed: u64, prompt_id: &str) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed ^ crate::features::fnv1a(prompt_id.as_bytes()))
}

/// Shuffle each prompt's records with the seeded RNG and cut
/// `train_n`/`dev_n`/rest. Deterministic given the seed and corpus order.
pub fn make_splits(
    records: &[AnswerRecord],
    train_n: usize,
    dev_n: usize,
    seed: u64,
) -> Result<SplitSpec> {
    let folds = make_fold_splits(records, train_n, dev_n, 1, seed)?;
    Ok(folds.into_iter().next().expect("one fold requested"))
}

/// Rotated-dev splits for pooled calibration.
///
/// The first `train_n + dev_n` shuffled records form a shared pool; fold `f`
/// takes its dev window at offset `f * dev_n` within the pool and trains on
/// the remainder. The test set (everything outside the pool) is identical
/// across folds.
pub fn make_fold_splits(
    records: &[AnswerRecord],
    train_n: usize,
    dev_n: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<SplitSpec>> {
    if folds == 0 {
        return Err(Error::Config("folds must be >= 1".into()));
    }
    let pool_n = train_n + dev_n;
    if folds * dev_n > pool_n {
        return Err(Error::Config(format!(
            "{folds} folds of dev_n={dev_n} do not fit in a train+dev pool of {pool_n}"
        )));
    }

    let mut by_prompt: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in records {
        by_prompt
            .entry(r.prompt_id.as_str())
            .or_default()
            .push(r.answer_id.as_str());
    }

    let mut splits: Vec<SplitSpec> = (0..folds)
        .map(|f| SplitSpec {
            fold_id: f as u32,
            train_ids: BTreeMap::new(),
            dev_ids: BTreeMap::new(),
            test_ids: BTreeMap::new(),
        })
        .collect();

    for (prompt_id, mut ids) in by_prompt {
        if pool_n > ids.len() {
            return Err(Error::InsufficientData {
                prompt_id: prompt_id.to_string(),
                requested: pool_n,
                available: ids.len(),
            });
        }
        let mut rng = prompt_rng(seed, prompt_id);
        ids.shuffle(&mut rng);
        let (pool, test) = ids.split_at(pool_n);
        for split in &mut splits {
            let start = split.fold_id as usize * dev_n;
            let dev: Vec<String> = pool[start..start + dev_n]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let train: Vec<String> = pool[..start]
                .iter()
                .chain(&pool[start + dev_n..])
                .map(|s| s.to_string())
                .collect();
            split
                .train_ids
                .insert(prompt_id.to_string(), train);
            split.dev_ids.insert(prompt_id.to_string(), dev);
            split.test_ids.insert(
                prompt_id.to_string(),
                test.iter().map(|s| s.to_string()).collect(),
            );
        }
    }
    Ok(splits)
}
