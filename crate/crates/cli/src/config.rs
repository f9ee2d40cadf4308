use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use qfactors_core::corpus::SplitRatios;
use qfactors_core::features::{parse_groups, FeatureGroup, TimeAnchor};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Feature-group combinations evaluated by default, one table row each.
pub const DEFAULT_COMBINATIONS: [&str; 13] = [
    "random",
    "length",
    "syntactic",
    "syntactic+length",
    "temporal",
    "redundancy",
    "relevance",
    "politeness",
    "politeness+relevance+redundancy",
    "unigram",
    "temporal+syntactic+unigram",
    "temporal+politeness+relevance+redundancy",
    "temporal+politeness+relevance+redundancy+syntactic",
];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resources {
    pub embeddings: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub synsets: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub greetings: Option<PathBuf>,
    pub apologies: Option<PathBuf>,
    pub hedges: Option<PathBuf>,
    pub parses: Option<PathBuf>,
}

impl Resources {
    /// `(role, path)` for every configured file.
    pub fn files(&self) -> Vec<(&'static str, &Path)> {
        [
            ("embeddings", &self.embeddings),
            ("synonyms", &self.synonyms),
            ("synsets", &self.synsets),
            ("stopwords", &self.stopwords),
            ("greetings", &self.greetings),
            ("apologies", &self.apologies),
            ("hedges", &self.hedges),
            ("parses", &self.parses),
        ]
        .into_iter()
        .filter_map(|(role, p)| p.as_deref().map(|p| (role, p)))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    /// Embedding neighbours consulted by the soft word matcher.
    pub neighbours: usize,
    pub vp_labels: Vec<String>,
    pub time_anchor: TimeAnchor,
    pub unigram_min_count: usize,
    pub unigram_max_terms: usize,
    pub combinations: Vec<String>,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            neighbours: 5,
            vp_labels: vec!["VP".into()],
            time_anchor: TimeAnchor::default(),
            unigram_min_count: 2,
            unigram_max_terms: 5000,
            combinations: DEFAULT_COMBINATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnseSection {
    pub enabled: bool,
    pub k: usize,
    pub lambda1: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub dict_steps: usize,
    /// Largest SVD rank considered before knee selection.
    pub max_rank: usize,
    /// Fixed rank; skips knee selection when set.
    pub rank: Option<usize>,
    pub oversampling: usize,
    pub power_iters: usize,
}

impl Default for NnseSection {
    fn default() -> Self {
        NnseSection {
            enabled: true,
            k: 1000,
            lambda1: 1.0,
            tol: 1e-4,
            max_iters: 100,
            dict_steps: 25,
            max_rank: 100,
            rank: None,
            oversampling: 10,
            power_iters: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    /// `(l1, l2)` pairs; the default 6×6 grid when absent.
    pub grid: Option<Vec<(f64, f64)>>,
    pub tol: f64,
    pub max_iters: usize,
    /// Random orderings averaged for AP gain.
    pub ap_trials: usize,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        ClassifierSection {
            grid: None,
            tol: 1e-8,
            max_iters: 5000,
            ap_trials: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub membership_threshold: f64,
    pub top_questions: usize,
    pub ngram_range: (usize, usize),
    pub top_ngrams: usize,
    /// Factors listed from each end of the response-rate ranking.
    pub factors_per_side: usize,
    pub min_members: usize,
    pub max_question_chars: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            membership_threshold: 0.0,
            top_questions: 3,
            ngram_range: (2, 3),
            top_ngrams: 5,
            factors_per_side: 3,
            min_members: 5,
            max_question_chars: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub resources: Resources,
    pub split: SplitRatios,
    pub features: FeatureSection,
    pub nnse: NnseSection,
    pub classifier: ClassifierSection,
    pub report: ReportSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: PathBuf::from("corpus.jsonl"),
            out_dir: PathBuf::from("out"),
            seed: 0,
            resources: Resources::default(),
            split: SplitRatios::default(),
            features: FeatureSection::default(),
            nnse: NnseSection::default(),
            classifier: ClassifierSection::default(),
            report: ReportSection::default(),
        }
    }
}

/// A named set of feature groups; `None` is the label-blind random scorer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Combination {
    pub key: String,
    pub groups: Option<BTreeSet<FeatureGroup>>,
}

impl Combination {
    pub fn parse(s: &str) -> CliResult<Self> {
        let key = s.trim().to_ascii_lowercase();
        if key == "random" {
            return Ok(Combination { key, groups: None });
        }
        let groups = parse_groups(&key).map_err(CliError::validation)?;
        if groups.is_empty() {
            return Err(CliError::validation(format!(
                "empty feature combination `{s}`"
            )));
        }
        Ok(Combination {
            key,
            groups: Some(groups),
        })
    }

    /// Row label such as `Temporal + Redundancy`.
    pub fn label(&self) -> String {
        if self.groups.is_none() {
            return "Random Baseline".into();
        }
        self.key
            .split(['+', ','])
            .map(|part| {
                let mut c = part.trim().chars();
                c.next()
                    .map(|f| f.to_uppercase().chain(c).collect::<String>())
                    .unwrap_or_default()
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key)
    }
}

impl PipelineConfig {
    /// Reads a TOML or JSON config; relative paths are taken from the file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg: PipelineConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?
        };
        if let Some(base) = path.parent() {
            cfg.resolve_relative(base);
        }
        Ok(cfg)
    }

    pub fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.out_dir);
        let r = &mut self.resources;
        for p in [
            &mut r.embeddings,
            &mut r.synonyms,
            &mut r.synsets,
            &mut r.stopwords,
            &mut r.greetings,
            &mut r.apologies,
            &mut r.hedges,
            &mut r.parses,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn combinations(&self) -> CliResult<Vec<Combination>> {
        self.features
            .combinations
            .iter()
            .map(|s| Combination::parse(s))
            .collect()
    }

    pub fn grid(&self) -> Vec<(f64, f64)> {
        self.classifier
            .grid
            .clone()
            .unwrap_or_else(qfactors_core::classify::default_grid)
    }

    /// Checks parameters and that every referenced input file exists.
    pub fn validate(&self) -> CliResult<()> {
        let mut files = vec![("corpus", self.corpus.as_path())];
        files.extend(self.resources.files());
        for (role, p) in files {
            if !p.is_file() {
                return Err(CliError::validation(format!(
                    "{role} file not found: {}",
                    p.display()
                )));
            }
        }
        self.split.validate().map_err(CliError::validation)?;
        self.combinations()?;
        if self.features.neighbours == 0 {
            return Err(CliError::validation("features.neighbours must be positive"));
        }
        let n = &self.nnse;
        if n.k == 0
            || n.lambda1.is_nan()
            || n.lambda1 <= 0.0
            || n.max_rank == 0
            || n.rank == Some(0)
        {
            return Err(CliError::validation(
                "nnse.k, nnse.lambda1, nnse.max_rank and nnse.rank must be positive",
            ));
        }
        if self.grid().is_empty() || self.grid().iter().any(|&(a, b)| !(a >= 0.0 && b >= 0.0)) {
            return Err(CliError::validation(
                "classifier.grid needs non-negative (l1, l2) pairs",
            ));
        }
        if self.classifier.ap_trials == 0 {
            return Err(CliError::validation(
                "classifier.ap_trials must be positive",
            ));
        }
        let (lo, hi) = self.report.ngram_range;
        if lo == 0 || lo > hi {
            return Err(CliError::validation(
                "report.ngram_range must satisfy 1 <= min <= max",
            ));
        }
        Ok(())
    }

    /// The configuration without file locations, which is what determines results.
    pub fn semantic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("corpus");
            obj.remove("out_dir");
            obj.remove("resources");
        }
        serde_json::to_string(&v).expect("json value serializes")
    }
}
