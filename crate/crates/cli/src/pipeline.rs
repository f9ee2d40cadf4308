//! The staged pipeline: ingest, featurize, factorize, train, evaluate, factors, report.
//!
//! Each stage reads earlier outputs from the run directory, writes its own through a
//! [`StageWriter`] and records input and output hashes in the manifest. A stage whose
//! key (configuration plus input hashes) is unchanged and whose outputs are intact is
//! skipped.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qfactors_core::classify::{
    ap_gain, choose_direction, evaluate_scores, grid_search, random_scores, train, ApGain,
    ElasticNetModel, EvalReport, EvalRow, GridResult, TrainConfig,
};
use qfactors_core::corpus::{
    corpus_stats, filter_questions, parse_corpus, split_corpus, write_corpus, CorpusSplit,
    CorpusStats, Domain, Thread,
};
use qfactors_core::factorization::{
    build_cooccurrence, cooccurrence_vocabulary, factor_report, knee_rank, nnse_fit, truncated_svd,
    FactorReport, NnseConfig, NnseModel, QuestionRow, ReportOptions, SvdConfig, SynsetLexicon,
};
use qfactors_core::features::{
    assemble, FeatureConfig, FeatureGroup, FeatureResources, FeatureSchema, PolitenessLexicon,
    TextSimilarity, Vocabulary, DEFAULT_APOLOGIES, DEFAULT_GREETINGS, DEFAULT_HEDGES,
};
use qfactors_core::parsetree::read_parse_sidecar;
use qfactors_core::textsim::{
    read_word_list, EmbeddingTable, SynonymLexicon, Tokenizer, WordMatcher,
};

use crate::artifacts::{
    read_json, sha256_bytes, sha256_file, stage_key, Manifest, StageRecord, StageWriter,
};
use crate::config::{Combination, PipelineConfig};
use crate::error::{in_stage, BoxError, CliError, CliResult};
use crate::report;
use crate::tables::{FeatureRow, FeatureTable};

pub const STAGES: [&str; 7] = [
    "ingest",
    "featurize",
    "factorize",
    "train",
    "evaluate",
    "factors",
    "report",
];

pub const CORPUS: &str = "corpus.jsonl";
pub const STATS: &str = "stats.json";
pub const SPLIT: &str = "split.json";
pub const VOCABULARY: &str = "vocabulary.json";
pub const FEATURE_SUMMARY: &str = "features.json";
pub const FACTORIZE: &str = "factorize.json";
pub const CLASSIFIER: &str = "classifier.json";
pub const EVAL: &str = "eval_report.json";
pub const FACTORS: &str = "factors.json";
pub const REPORT_MD: &str = "report.md";
pub const AUC_CSV: &str = "auc.csv";
pub const AP_GAIN_CSV: &str = "ap_gain.csv";

pub const SPLITS: [&str; 3] = ["train", "dev", "test"];

pub fn features_file(split: &str) -> String {
    format!("features_{split}.csv")
}

pub fn unigrams_file(split: &str) -> String {
    format!("unigrams_{split}.csv")
}

pub fn nnse_file(domain: Domain) -> String {
    format!("nnse_{domain}.json")
}

/// A stable sub-seed for one named use of the run seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub raw: CorpusStats,
    pub filtered: CorpusStats,
    pub threads_kept: usize,
    pub threads_dropped: usize,
    pub unknown_domains: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub columns: Vec<String>,
    pub vocabulary_size: usize,
    pub rows: BTreeMap<String, usize>,
    pub missing_parses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainFactorization {
    pub domain: Domain,
    pub questions: usize,
    pub terms: usize,
    pub entries_before: u64,
    pub entries_after: u64,
    /// Exact entry ratio after/before synset extension, e.g. `3/2`.
    pub inflation: Option<String>,
    pub rank: usize,
    /// `knee`, `fixed` or `max`.
    pub rank_source: String,
    pub singular_values: Vec<f64>,
    pub k: usize,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FactorizeSummary {
    pub domains: Vec<DomainFactorization>,
    pub skipped: Vec<String>,
}

/// A classifier for one combination, or why there is none. The random baseline has
/// neither a model nor a note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    /// `None` for a model pooled over every domain.
    pub domain: Option<Domain>,
    pub combination: String,
    pub columns: Vec<String>,
    pub grid: Option<GridResult>,
    pub model: Option<ElasticNetModel<f64>>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassifierArtifact {
    pub vocabulary: Vocabulary,
    pub models: Vec<TrainedModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGain {
    pub domain: String,
    pub feature: String,
    pub gain: ApGain,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalArtifact {
    pub reports: Vec<EvalReport>,
    pub feature_gains: Vec<FeatureGain>,
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorEntry {
    pub report: FactorReport,
    /// Texts of the strongest member questions, shortened for display.
    pub questions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainFactors {
    pub domain: Domain,
    pub questions: usize,
    pub answered: usize,
    pub k: usize,
    /// Factors with enough members to be ranked.
    pub eligible: usize,
    pub highest: Vec<FactorEntry>,
    pub lowest: Vec<FactorEntry>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FactorsArtifact {
    pub domains: Vec<DomainFactors>,
}

fn domain_label(domain: Option<Domain>) -> String {
    domain.map_or_else(|| "all".to_string(), |d| d.to_string())
}

pub fn read_threads(path: &Path) -> Result<Vec<Thread>, BoxError> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(parse_corpus(BufReader::new(f))
        .map_err(|e| format!("{}: {e}", path.display()))?
        .threads)
}

/// Parses a raw dump, filters questions and drops threads left empty.
pub fn ingest_corpus(path: &Path) -> Result<(Vec<Thread>, CorpusSummary), BoxError> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let parsed = parse_corpus(BufReader::new(f)).map_err(|e| format!("{}: {e}", path.display()))?;
    let raw = corpus_stats(&parsed.threads);
    let filtered: Vec<Thread> = parsed
        .threads
        .iter()
        .map(filter_questions)
        .filter(|t| !t.is_empty())
        .collect();
    let summary = CorpusSummary {
        raw,
        filtered: corpus_stats(&filtered),
        threads_kept: filtered.len(),
        threads_dropped: parsed.threads.len() - filtered.len(),
        unknown_domains: parsed.unknown_domains,
    };
    Ok((filtered, summary))
}

fn open(path: &Path) -> Result<BufReader<File>, BoxError> {
    Ok(BufReader::new(
        File::open(path).map_err(|e| format!("{}: {e}", path.display()))?,
    ))
}

fn load_tokenizer(cfg: &PipelineConfig) -> Result<Tokenizer, BoxError> {
    Ok(match &cfg.resources.stopwords {
        Some(p) => Tokenizer::with_stopwords(read_word_list(open(p)?)?),
        None => Tokenizer::default(),
    })
}

/// Tokenizer, politeness lexicon, soft matcher and parses named in the configuration.
pub fn load_resources(cfg: &PipelineConfig) -> Result<FeatureResources, BoxError> {
    let r = &cfg.resources;
    let tokenizer = load_tokenizer(cfg)?;
    let text = |p: &Option<PathBuf>, fallback: &str| -> Result<String, BoxError> {
        match p {
            Some(p) => Ok(std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?),
            None => Ok(fallback.to_string()),
        }
    };
    let politeness = PolitenessLexicon::from_lists(
        &text(&r.greetings, DEFAULT_GREETINGS)?,
        &text(&r.apologies, DEFAULT_APOLOGIES)?,
        &text(&r.hedges, DEFAULT_HEDGES)?,
    )?;
    let embeddings = match &r.embeddings {
        Some(p) => Some(Arc::new(
            EmbeddingTable::<f64>::read(open(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        )),
        None => None,
    };
    let synonyms = match &r.synonyms {
        Some(p) => Some(Arc::new(
            SynonymLexicon::read(open(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        )),
        None => None,
    };
    let matcher = WordMatcher::new(embeddings, synonyms, cfg.features.neighbours)?;
    let parses = match &r.parses {
        Some(p) => {
            let labels: BTreeSet<String> = cfg.features.vp_labels.iter().cloned().collect();
            read_parse_sidecar(open(p)?, &labels).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => HashMap::new(),
    };
    Ok(FeatureResources {
        similarity: TextSimilarity::new(tokenizer.clone(), matcher),
        tokenizer,
        politeness,
        parses,
        vocab: None,
    })
}

/// Unigram vocabulary from training texts: words seen at least `min_count` times,
/// the `max_terms` most frequent (ties alphabetical).
pub fn unigram_vocabulary<'a, I>(
    texts: I,
    tokenizer: &Tokenizer,
    min_count: usize,
    max_terms: usize,
) -> Vocabulary
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in texts {
        for w in tokenizer.tokens(t) {
            *counts.entry(w).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_terms);
    Vocabulary::from_terms(ranked.into_iter().map(|(w, _)| w))
}

/// Feature rows for every question of `threads`, in corpus order, plus the number of
/// questions without a parse.
pub fn featurize_threads(
    threads: &[Thread],
    cfg: &PipelineConfig,
    res: &FeatureResources,
) -> Result<(FeatureSchema, Vec<FeatureRow>, usize), BoxError> {
    let mut groups: BTreeSet<FeatureGroup> = FeatureGroup::DENSE.into_iter().collect();
    if res.vocab.is_some() {
        groups.insert(FeatureGroup::Unigram);
    }
    let schema = FeatureSchema::for_groups(&groups);
    let fc = FeatureConfig {
        groups,
        time_anchor: cfg.features.time_anchor,
    };
    let per_thread: Vec<Vec<(FeatureRow, bool)>> = threads
        .par_iter()
        .map(|t| {
            t.questions
                .iter()
                .map(|q| {
                    let v = assemble(q, t, &fc, &schema, res)?;
                    Ok((
                        FeatureRow {
                            question_id: v.question_id,
                            thread_id: t.id.clone(),
                            domain: t.domain,
                            values: v.values,
                            label: v.label,
                            unigrams: v.unigrams,
                        },
                        v.missing_parse,
                    ))
                })
                .collect::<qfactors_core::Result<Vec<_>>>()
        })
        .collect::<qfactors_core::Result<_>>()?;
    let mut missing = 0;
    let mut rows = Vec::new();
    for (row, miss) in per_thread.into_iter().flatten() {
        missing += usize::from(miss);
        rows.push(row);
    }
    Ok((schema, rows, missing))
}

/// Grid-searches and fits one combination on the rows of `domain`.
pub fn fit_combination(
    train_t: &FeatureTable,
    dev_t: &FeatureTable,
    domain: Option<Domain>,
    combo: &Combination,
    vocab: &Vocabulary,
    grid: &[(f64, f64)],
    base: &TrainConfig,
) -> Result<TrainedModel, BoxError> {
    let mut out = TrainedModel {
        domain,
        combination: combo.key.clone(),
        columns: vec![],
        grid: None,
        model: None,
        note: None,
    };
    let Some(groups) = &combo.groups else {
        return Ok(out);
    };
    out.columns = train_t.column_names(groups, vocab.terms());
    let (tx, ty) = train_t.design(&train_t.select(domain), groups, vocab.len())?;
    let (dx, dy) = dev_t.design(&dev_t.select(domain), groups, vocab.len())?;
    let single = |y: &[bool]| y.iter().all(|&b| b) || !y.iter().any(|&b| b);
    if single(&ty) || single(&dy) {
        out.note = Some("training or development labels contain a single class".into());
        return Ok(out);
    }
    let g = grid_search(tx.view(), &ty, dx.view(), &dy, grid, base)?;
    let mut model = train(
        tx.view(),
        &ty,
        &TrainConfig {
            l1: g.l1,
            l2: g.l2,
            ..*base
        },
    )?;
    model.feature_names = out.columns.clone();
    out.grid = Some(g);
    out.model = Some(model);
    Ok(out)
}

/// Test-set row for a trained combination; `None` when it cannot be scored.
pub fn score_combination(
    m: &TrainedModel,
    test_t: &FeatureTable,
    vocab_len: usize,
    trials: usize,
    seed: u64,
) -> Result<Option<EvalRow>, BoxError> {
    let rows = test_t.select(m.domain);
    let labels: Vec<bool> = rows.iter().map(|r| r.label).collect();
    if labels.iter().all(|&b| b) || !labels.iter().any(|&b| b) {
        return Ok(None);
    }
    let label = domain_label(m.domain);
    let combo = Combination::parse(&m.combination).map_err(|e| e.to_string())?;
    let scores = match (&combo.groups, &m.model) {
        (None, _) => random_scores(labels.len(), derive_seed(seed, &format!("random/{label}"))),
        (Some(groups), Some(model)) => {
            let (x, _) = test_t.design(&rows, groups, vocab_len)?;
            model.decision_function(x.view())?
        }
        (Some(_), None) => return Ok(None),
    };
    let mut row = evaluate_scores(
        &m.combination,
        &scores,
        &labels,
        trials,
        derive_seed(seed, &format!("ap/{label}/{}", m.combination)),
    )?;
    if let Some(g) = &m.grid {
        row.l1 = g.l1;
        row.l2 = g.l2;
    }
    Ok(Some(row))
}

/// Single-feature AP gain on the test rows of `domain`, ranking direction chosen on training rows.
pub fn feature_gains(
    train_t: &FeatureTable,
    test_t: &FeatureTable,
    domain: Option<Domain>,
    trials: usize,
    seed: u64,
) -> Result<Vec<FeatureGain>, BoxError> {
    let (tr, te) = (train_t.select(domain), test_t.select(domain));
    let has_both =
        |rows: &[&FeatureRow]| rows.iter().any(|r| r.label) && rows.iter().any(|r| !r.label);
    if !has_both(&tr) || !has_both(&te) {
        return Ok(vec![]);
    }
    let label = domain_label(domain);
    let train_y: Vec<bool> = tr.iter().map(|r| r.label).collect();
    let test_y: Vec<bool> = te.iter().map(|r| r.label).collect();
    let mut out = Vec::new();
    for (c, (name, _)) in train_t.schema.columns.iter().enumerate() {
        let Some(tc) = test_t.schema.columns.iter().position(|(n, _)| n == name) else {
            continue;
        };
        let tv: Vec<f64> = tr.iter().map(|r| r.values[c]).collect();
        let dir = choose_direction(&tv, &train_y)?;
        let ev: Vec<f64> = te.iter().map(|r| r.values[tc]).collect();
        let gain = ap_gain(
            &ev,
            &test_y,
            trials,
            derive_seed(seed, &format!("gain/{label}/{name}")),
            dir,
        )?;
        out.push(FeatureGain {
            domain: label.clone(),
            feature: name.clone(),
            gain,
        });
    }
    Ok(out)
}

/// Shortens `text` to at most `max` characters, marking the cut.
pub fn shorten(text: &str, max: usize) -> String {
    if text.chars().count() <= max {
        return text.to_string();
    }
    let mut s: String = text.chars().take(max.saturating_sub(3)).collect();
    s.push_str("...");
    s
}

/// Fits the co-occurrence, SVD and NNSE chain on one set of questions.
pub fn factorize_questions(
    questions: &[(&str, &str)],
    tokenizer: &Tokenizer,
    synsets: Option<&SynsetLexicon>,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(NnseModel<f64>, DomainFactorization), BoxError> {
    let docs: Vec<Vec<String>> = questions
        .iter()
        .map(|(_, t)| tokenizer.content_tokens(t))
        .collect();
    let vocab = cooccurrence_vocabulary(&docs, synsets);
    if vocab.is_empty() {
        return Err("no content words to factorize".into());
    }
    let (x, ext) = build_cooccurrence::<f64>(&docs, &vocab, synsets)?;
    let n = cfg.nnse.clone();
    let max_rank = n.max_rank.min(x.n_rows()).min(x.n_cols());
    let svd_cfg = SvdConfig {
        oversampling: n.oversampling,
        power_iters: n.power_iters,
        seed: derive_seed(seed, "svd"),
        ..SvdConfig::default()
    };
    let (svd, rank_source) = match n.rank {
        Some(r) => (truncated_svd(&x, r.min(max_rank), &svd_cfg)?, "fixed"),
        None if max_rank >= 3 => {
            let full = truncated_svd(&x, max_rank, &svd_cfg)?;
            let r = knee_rank(full.s.as_slice().expect("contiguous"), max_rank)?;
            (full.truncate(r)?, "knee")
        }
        None => (truncated_svd(&x, max_rank, &svd_cfg)?, "max"),
    };
    let xr = svd.reduced_rows();
    let k = n.k.min(questions.len());
    if k < n.k {
        warn!(
            "only {} questions, fitting {k} factors instead of {}",
            questions.len(),
            n.k
        );
    }
    let fit = nnse_fit(
        xr.view(),
        &NnseConfig {
            k,
            lambda1: n.lambda1,
            tol: n.tol,
            max_iters: n.max_iters,
            seed: derive_seed(seed, "nnse"),
            dict_steps: n.dict_steps,
        },
    )?;
    let mut model = fit.model;
    model.row_ids = questions.iter().map(|(id, _)| id.to_string()).collect();
    model.vocab = Some(vocab.clone());
    model.basis = Some(svd.v.clone());
    model.singular_values = Some(svd.s.clone());
    let summary = DomainFactorization {
        domain: Domain::Other,
        questions: questions.len(),
        terms: vocab.len(),
        entries_before: ext.entries_before,
        entries_after: ext.entries_after,
        inflation: ext.inflation().map(|r| r.to_string()),
        rank: svd.rank(),
        rank_source: rank_source.into(),
        singular_values: svd.s.to_vec(),
        k,
        iterations: fit.iterations,
        converged: fit.converged,
        objective: fit.history.last().copied().unwrap_or(f64::NAN),
        model: String::new(),
    };
    Ok((model, summary))
}

/// Factor reports of a fitted model, ranked by response rate.
pub fn rank_factors(
    model: &NnseModel<f64>,
    questions: &HashMap<&str, (&str, bool)>,
    cfg: &PipelineConfig,
    tokenizer: &Tokenizer,
) -> Result<(usize, Vec<FactorEntry>, Vec<FactorEntry>), BoxError> {
    let rows: Vec<QuestionRow<'_>> = model
        .row_ids
        .iter()
        .map(|id| {
            let (text, answered) = questions
                .get(id.as_str())
                .ok_or_else(|| format!("model row `{id}` is not in the corpus"))?;
            Ok(QuestionRow {
                id,
                text,
                answered: *answered,
            })
        })
        .collect::<Result<_, BoxError>>()?;
    let r = &cfg.report;
    let opts = ReportOptions {
        membership_threshold: r.membership_threshold,
        top_questions: r.top_questions,
        ngram_range: r.ngram_range,
        top_ngrams: r.top_ngrams,
    };
    let mut reports = Vec::new();
    for j in 0..model.k {
        let rep = factor_report(model, &rows, j, &opts, tokenizer)?;
        if rep.members >= r.min_members.max(1) {
            reports.push(rep);
        }
    }
    reports.sort_by(|a, b| {
        b.response_rate
            .partial_cmp(&a.response_rate)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.members.cmp(&a.members))
            .then(a.factor.cmp(&b.factor))
    });
    let eligible = reports.len();
    let entry = |rep: &FactorReport| FactorEntry {
        questions: rep
            .top_questions
            .iter()
            .map(|(id, _)| shorten(questions[id.as_str()].0, r.max_question_chars))
            .collect(),
        report: rep.clone(),
    };
    let side = r.factors_per_side.min(eligible);
    let highest: Vec<FactorEntry> = reports[..side].iter().map(entry).collect();
    let low_side = r.factors_per_side.min(eligible - side);
    let lowest: Vec<FactorEntry> = reports[eligible - low_side..]
        .iter()
        .rev()
        .map(entry)
        .collect();
    Ok((eligible, highest, lowest))
}

/// A run directory plus the manifest describing what is in it.
pub struct Pipeline {
    pub cfg: PipelineConfig,
    dir: PathBuf,
    config_sha: String,
    manifest: Manifest,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> CliResult<Self> {
        cfg.validate()?;
        let config_sha = sha256_bytes(cfg.semantic_json().as_bytes());
        let dir = cfg.out_dir.clone();
        let manifest = Manifest::load(&dir)
            .filter(|m| m.config_sha256 == config_sha && m.version == env!("CARGO_PKG_VERSION"))
            .unwrap_or_else(|| Manifest::new(cfg.seed, config_sha.clone()));
        Ok(Pipeline {
            cfg,
            dir,
            config_sha,
            manifest,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn run(&mut self, stage: &str) -> CliResult<()> {
        match stage {
            "ingest" => self.ingest(),
            "featurize" => self.featurize(),
            "factorize" => self.factorize(),
            "train" => self.train(),
            "evaluate" => self.evaluate(),
            "factors" => self.factors(),
            "report" => self.report(),
            other => Err(CliError::validation(format!("unknown stage `{other}`"))),
        }
    }

    pub fn run_all(&mut self) -> CliResult<()> {
        for s in STAGES {
            self.run(s)?;
        }
        Ok(())
    }

    /// Runs `body` unless the stage is cached; returns whether it ran.
    fn stage<F>(
        &mut self,
        name: &'static str,
        inputs: BTreeMap<String, String>,
        body: F,
    ) -> CliResult<bool>
    where
        F: FnOnce(&Self, &mut StageWriter) -> Result<(), BoxError>,
    {
        let key = stage_key(name, &self.config_sha, &inputs);
        if self.manifest.cached(name, &key, &self.dir).is_some() {
            info!("{name}: up to date");
            return Ok(false);
        }
        info!("{name}: running");
        let mut w = StageWriter::new(&self.dir).map_err(in_stage(name))?;
        body(self, &mut w).map_err(in_stage(name))?;
        let outputs = w.commit().map_err(in_stage(name))?;
        self.manifest.stages.insert(
            name.to_string(),
            StageRecord {
                key,
                inputs,
                outputs,
            },
        );
        self.manifest.save(&self.dir).map_err(in_stage(name))?;
        Ok(true)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Hashes earlier outputs this stage reads; a missing one means its stage has not run.
    fn outputs_of(&self, producer: &str, names: &[String]) -> CliResult<BTreeMap<String, String>> {
        names
            .iter()
            .map(|n| {
                let h = sha256_file(&self.path(n)).map_err(|_| {
                    CliError::validation(format!(
                        "{} not found; run the `{producer}` stage first",
                        self.path(n).display()
                    ))
                })?;
                Ok((n.clone(), h))
            })
            .collect()
    }

    fn resource_inputs(&self, roles: &[&str]) -> CliResult<BTreeMap<String, String>> {
        self.cfg
            .resources
            .files()
            .into_iter()
            .filter(|(role, _)| roles.contains(role))
            .map(|(role, p)| {
                let h = sha256_file(p).map_err(|e| {
                    CliError::validation(format!("cannot read {role} file {}: {e}", p.display()))
                })?;
                Ok((format!("resource:{role}"), h))
            })
            .collect()
    }

    fn factorize_outputs(&self) -> CliResult<Vec<String>> {
        let mut names = vec![FACTORIZE.to_string()];
        let summary: FactorizeSummary = read_json(&self.path(FACTORIZE)).map_err(|_| {
            CliError::validation(format!(
                "{} not found; run the `factorize` stage first",
                FACTORIZE
            ))
        })?;
        names.extend(summary.domains.into_iter().map(|d| d.model));
        Ok(names)
    }

    pub fn ingest(&mut self) -> CliResult<()> {
        let corpus = self.cfg.corpus.clone();
        let h = sha256_file(&corpus)
            .map_err(|e| CliError::validation(format!("{}: {e}", corpus.display())))?;
        let inputs = BTreeMap::from([("corpus".to_string(), h)]);
        self.stage("ingest", inputs, |p, w| {
            let (threads, summary) = ingest_corpus(&p.cfg.corpus)?;
            let split = split_corpus(&threads, p.cfg.split, derive_seed(p.cfg.seed, "split"))?;
            let mut buf = Vec::new();
            write_corpus(&threads, &mut buf)?;
            w.write(CORPUS, &buf)?;
            w.write_json(STATS, &summary)?;
            w.write_json(SPLIT, &split)?;
            info!(
                "ingest: kept {} of {} questions in {} threads",
                summary.filtered.total.questions_asked,
                summary.raw.total.questions_asked,
                summary.threads_kept
            );
            Ok(())
        })?;
        Ok(())
    }

    pub fn featurize(&mut self) -> CliResult<()> {
        let mut inputs = self.outputs_of("ingest", &[CORPUS.into(), SPLIT.into()])?;
        inputs.extend(self.resource_inputs(&[
            "embeddings",
            "synonyms",
            "stopwords",
            "greetings",
            "apologies",
            "hedges",
            "parses",
        ])?);
        self.stage("featurize", inputs, |p, w| {
            let threads = read_threads(&p.path(CORPUS))?;
            let split: CorpusSplit = read_json(&p.path(SPLIT))?;
            let mut res = load_resources(&p.cfg)?;
            let train_ids: HashSet<&str> = split.train.iter().map(String::as_str).collect();
            let vocab = unigram_vocabulary(
                threads
                    .iter()
                    .flat_map(|t| &t.questions)
                    .filter(|q| train_ids.contains(q.id.as_str()))
                    .map(|q| q.text.as_str()),
                &res.tokenizer,
                p.cfg.features.unigram_min_count,
                p.cfg.features.unigram_max_terms,
            );
            res.vocab = Some(vocab.clone());
            let (schema, rows, missing) = featurize_threads(&threads, &p.cfg, &res)?;
            if missing > 0 && p.cfg.resources.parses.is_none() {
                info!("no parse file configured; syntactic features are zero");
            } else if missing > 0 {
                warn!("{missing} questions have no parse; their syntactic features are zero");
            }
            let part: HashMap<&str, &str> = [
                ("train", &split.train),
                ("dev", &split.dev),
                ("test", &split.test),
            ]
            .into_iter()
            .flat_map(|(name, ids)| ids.iter().map(move |id| (id.as_str(), name)))
            .collect();
            let mut counts = BTreeMap::new();
            for s in SPLITS {
                let table = FeatureTable {
                    schema: schema.clone(),
                    rows: rows
                        .iter()
                        .filter(|r| part.get(r.question_id.as_str()) == Some(&s))
                        .cloned()
                        .collect(),
                };
                counts.insert(s.to_string(), table.rows.len());
                w.write(&features_file(s), &table.to_csv()?)?;
                w.write(&unigrams_file(s), &table.unigrams_csv()?)?;
            }
            w.write_json(VOCABULARY, &vocab)?;
            w.write_json(
                FEATURE_SUMMARY,
                &FeatureSummary {
                    columns: schema.names().map(String::from).collect(),
                    vocabulary_size: vocab.len(),
                    rows: counts,
                    missing_parses: missing,
                },
            )?;
            Ok(())
        })?;
        Ok(())
    }

    pub fn factorize(&mut self) -> CliResult<()> {
        let mut inputs = self.outputs_of("ingest", &[CORPUS.into()])?;
        inputs.extend(self.resource_inputs(&["synsets", "stopwords"])?);
        self.stage("factorize", inputs, |p, w| {
            let mut summary = FactorizeSummary::default();
            if !p.cfg.nnse.enabled {
                summary.skipped.push("factorization disabled".into());
                w.write_json(FACTORIZE, &summary)?;
                return Ok(());
            }
            let threads = read_threads(&p.path(CORPUS))?;
            let tokenizer = load_tokenizer(&p.cfg)?;
            let synsets = match &p.cfg.resources.synsets {
                Some(path) => Some(
                    SynsetLexicon::read(open(path)?)
                        .map_err(|e| format!("{}: {e}", path.display()))?,
                ),
                None => None,
            };
            let mut by_domain: BTreeMap<Domain, Vec<(&str, &str)>> = BTreeMap::new();
            for t in &threads {
                by_domain
                    .entry(t.domain)
                    .or_default()
                    .extend(t.questions.iter().map(|q| (q.id.as_str(), q.text.as_str())));
            }
            for (domain, questions) in by_domain {
                if questions.len() < 2 {
                    summary
                        .skipped
                        .push(format!("{domain}: fewer than 2 questions"));
                    continue;
                }
                let seed = derive_seed(p.cfg.seed, &format!("factorize/{domain}"));
                match factorize_questions(&questions, &tokenizer, synsets.as_ref(), &p.cfg, seed) {
                    Ok((model, mut s)) => {
                        s.domain = domain;
                        s.model = nnse_file(domain);
                        info!(
                            "factorize: {domain} rank {} k {} after {} iterations",
                            s.rank, s.k, s.iterations
                        );
                        w.write_json(&s.model, &model)?;
                        summary.domains.push(s);
                    }
                    Err(e) => summary.skipped.push(format!("{domain}: {e}")),
                }
            }
            w.write_json(FACTORIZE, &summary)?;
            Ok(())
        })?;
        Ok(())
    }

    fn split_inputs(&self, splits: &[&str]) -> CliResult<BTreeMap<String, String>> {
        let mut names = vec![VOCABULARY.to_string()];
        for s in splits {
            names.push(features_file(s));
            names.push(unigrams_file(s));
        }
        self.outputs_of("featurize", &names)
    }

    fn table(&self, split: &str) -> Result<FeatureTable, BoxError> {
        FeatureTable::read(
            &self.path(&features_file(split)),
            Some(&self.path(&unigrams_file(split))),
        )
    }

    pub fn train(&mut self) -> CliResult<()> {
        let inputs = self.split_inputs(&["train", "dev"])?;
        self.stage("train", inputs, |p, w| {
            let (train_t, dev_t) = (p.table("train")?, p.table("dev")?);
            let vocab: Vocabulary = read_json(&p.path(VOCABULARY))?;
            let combos = p.cfg.combinations().map_err(|e| e.to_string())?;
            let grid = p.cfg.grid();
            let base = TrainConfig {
                l1: 0.0,
                l2: 0.0,
                tol: p.cfg.classifier.tol,
                max_iters: p.cfg.classifier.max_iters,
            };
            let mut models = Vec::new();
            for domain in train_t.domains() {
                for c in &combos {
                    let m =
                        fit_combination(&train_t, &dev_t, Some(domain), c, &vocab, &grid, &base)?;
                    if let Some(note) = &m.note {
                        warn!("train: {domain}/{}: {note}", c.key);
                    }
                    models.push(m);
                }
            }
            w.write_json(
                CLASSIFIER,
                &ClassifierArtifact {
                    vocabulary: vocab,
                    models,
                },
            )?;
            Ok(())
        })?;
        Ok(())
    }

    pub fn evaluate(&mut self) -> CliResult<()> {
        let mut inputs = self.outputs_of("train", &[CLASSIFIER.into()])?;
        inputs.extend(self.split_inputs(&["train", "test"])?);
        self.stage("evaluate", inputs, |p, w| {
            let art: ClassifierArtifact = read_json(&p.path(CLASSIFIER))?;
            let (train_t, test_t) = (p.table("train")?, p.table("test")?);
            let out = evaluate_artifact(
                &art,
                Some(&train_t),
                &test_t,
                p.cfg.classifier.ap_trials,
                p.cfg.seed,
            )?;
            w.write_json(EVAL, &out)?;
            Ok(())
        })?;
        Ok(())
    }

    pub fn factors(&mut self) -> CliResult<()> {
        let names = self.factorize_outputs()?;
        let mut inputs = self.outputs_of("factorize", &names)?;
        inputs.extend(self.outputs_of("ingest", &[CORPUS.into()])?);
        inputs.extend(self.resource_inputs(&["stopwords"])?);
        self.stage("factors", inputs, |p, w| {
            let summary: FactorizeSummary = read_json(&p.path(FACTORIZE))?;
            let threads = read_threads(&p.path(CORPUS))?;
            let tokenizer = load_tokenizer(&p.cfg)?;
            let questions: HashMap<&str, (&str, bool)> = threads
                .iter()
                .flat_map(|t| &t.questions)
                .map(|q| (q.id.as_str(), (q.text.as_str(), q.answered)))
                .collect();
            let mut art = FactorsArtifact::default();
            for d in &summary.domains {
                let model: NnseModel<f64> = read_json(&p.path(&d.model))?;
                let (eligible, highest, lowest) =
                    rank_factors(&model, &questions, &p.cfg, &tokenizer)?;
                let answered = model
                    .row_ids
                    .iter()
                    .filter(|id| questions[id.as_str()].1)
                    .count();
                art.domains.push(DomainFactors {
                    domain: d.domain,
                    questions: model.n,
                    answered,
                    k: model.k,
                    eligible,
                    highest,
                    lowest,
                });
            }
            w.write_json(FACTORS, &art)?;
            Ok(())
        })?;
        Ok(())
    }

    pub fn report(&mut self) -> CliResult<()> {
        let mut inputs = self.outputs_of("ingest", &[STATS.into()])?;
        inputs.extend(self.outputs_of("evaluate", &[EVAL.into()])?);
        inputs.extend(self.outputs_of("factors", &[FACTORS.into()])?);
        self.stage("report", inputs, |p, w| {
            let stats: CorpusSummary = read_json(&p.path(STATS))?;
            let eval: EvalArtifact = read_json(&p.path(EVAL))?;
            let factors: FactorsArtifact = read_json(&p.path(FACTORS))?;
            let combos = p.cfg.combinations().map_err(|e| e.to_string())?;
            let tables = report::Tables::build(&stats, &eval, &factors, &combos);
            w.write(REPORT_MD, tables.markdown().as_bytes())?;
            w.write(AUC_CSV, &tables.auc_csv()?)?;
            w.write(AP_GAIN_CSV, &tables.ap_gain_csv()?)?;
            Ok(())
        })?;
        Ok(())
    }
}

/// Scores every model of `art` on the test table. With a training table, also adds
/// single-feature gains for each domain the models cover.
pub fn evaluate_artifact(
    art: &ClassifierArtifact,
    train_t: Option<&FeatureTable>,
    test_t: &FeatureTable,
    trials: usize,
    seed: u64,
) -> Result<EvalArtifact, BoxError> {
    let mut out = EvalArtifact::default();
    let mut domains: Vec<Option<Domain>> = Vec::new();
    for m in &art.models {
        if !domains.contains(&m.domain) {
            domains.push(m.domain);
        }
    }
    domains.sort();
    for domain in domains {
        let label = domain_label(domain);
        let mut rows = Vec::new();
        for m in art.models.iter().filter(|m| m.domain == domain) {
            match score_combination(m, test_t, art.vocabulary.len(), trials, seed)? {
                Some(r) => rows.push(r),
                None => out.skipped.push(format!(
                    "{label}/{}: {}",
                    m.combination,
                    m.note
                        .as_deref()
                        .unwrap_or("test labels contain a single class")
                )),
            }
        }
        out.reports.push(EvalReport {
            domain: label,
            rows,
        });
        if let Some(train_t) = train_t {
            out.feature_gains
                .extend(feature_gains(train_t, test_t, domain, trials, seed)?);
        }
    }
    Ok(out)
}
