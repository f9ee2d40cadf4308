//! Argument parsing and dispatch for the `qfactors` binary.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Parser, Subcommand};

use qfactors_core::classify::TrainConfig;
use qfactors_core::factorization::{NnseModel, SynsetLexicon};
use qfactors_core::features::Vocabulary;

use crate::artifacts::{json_bytes, read_json};
use crate::config::PipelineConfig;
use crate::error::{in_stage, BoxError, CliError, CliResult};
use crate::pipeline::{
    evaluate_artifact, factorize_questions, fit_combination, ingest_corpus, rank_factors,
    ClassifierArtifact, FactorEntry, Pipeline,
};
use crate::tables::FeatureTable;

#[derive(Debug, Parser)]
#[command(
    name = "qfactors",
    version,
    about = "Which questions in an ask-me-anything thread get answered, and why"
)]
pub struct Cli {
    /// Pipeline configuration (TOML, or JSON by extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured run directory.
    #[arg(long = "out-dir", global = true)]
    pub out_dir: Option<PathBuf>,
    /// More log output; repeat for debug.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and filter the corpus, write statistics and the train/dev/test split.
    Ingest {
        #[arg(long, visible_alias = "in")]
        corpus: Option<PathBuf>,
        /// Also copy the statistics to this file.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Compute feature tables for every split.
    Featurize {
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        synonyms: Option<PathBuf>,
        #[arg(long)]
        parses: Option<PathBuf>,
        #[arg(long)]
        stopwords: Option<PathBuf>,
    },
    /// Fit latent factors per domain, or one pooled model with `--out`.
    Factorize {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        synsets: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        lambda1: Option<f64>,
        /// Write a single model over the whole filtered corpus to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train classifiers; standalone when `--features` is given.
    Train {
        /// Training feature CSV. `unigrams_<split>.csv` and `vocabulary.json` beside it are used when present.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Development feature CSV for the regularization grid.
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Feature combination such as `temporal+redundancy`; repeatable.
        #[arg(long = "groups")]
        groups: Vec<String>,
        /// `l1:l2` pairs separated by commas, or `default`.
        #[arg(long)]
        grid: Option<String>,
        /// One model per domain instead of a pooled one.
        #[arg(long)]
        per_domain: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score classifiers on the test split; standalone when `--model` is given.
    Evaluate {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Test feature CSV.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Training feature CSV; enables single-feature gains.
        #[arg(long)]
        train_features: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Rank latent factors by response rate; standalone when `--model` is given.
    Factors {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Factors listed from each end.
        #[arg(long)]
        top: Option<usize>,
        /// Inclusive n-gram range, `min,max`.
        #[arg(long)]
        ngrams: Option<String>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render report.md, auc.csv and ap_gain.csv.
    Report,
    /// Run every stage, reusing cached ones.
    Run,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                msg.push_str(&format!("\n  caused by: {s}"));
                src = s.source();
            }
            eprintln!("{msg}");
            e.exit_code()
        }
    }
}

fn base_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    Ok(cfg)
}

fn set(slot: &mut Option<PathBuf>, v: &Option<PathBuf>) {
    if v.is_some() {
        slot.clone_from(v);
    }
}

fn write_out(path: &Path, bytes: &[u8], stage: &'static str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(in_stage(stage))?;
    }
    std::fs::write(path, bytes).map_err(in_stage(stage))
}

fn require_file(role: &str, p: &Path) -> CliResult<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "{role} file not found: {}",
            p.display()
        )))
    }
}

/// `l1:l2,l1:l2` or `default`.
pub fn parse_grid(s: &str) -> CliResult<Vec<(f64, f64)>> {
    if s.trim() == "default" {
        return Ok(qfactors_core::classify::default_grid());
    }
    s.split(',')
        .map(|pair| {
            let (a, b) = pair
                .split_once(':')
                .ok_or_else(|| CliError::validation(format!("grid point `{pair}` is not l1:l2")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| *x >= 0.0 && x.is_finite())
                    .ok_or_else(|| CliError::validation(format!("bad regularization weight `{v}`")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

/// `unigrams_<split>.csv` beside `features_<split>.csv`, if present.
fn sidecar(features: &Path) -> Option<PathBuf> {
    let name = features.file_name()?.to_str()?;
    let split = name.strip_prefix("features_")?;
    let p = features.with_file_name(format!("unigrams_{split}"));
    p.is_file().then_some(p)
}

fn read_table(p: &Path, stage: &'static str) -> CliResult<FeatureTable> {
    require_file("feature", p)?;
    FeatureTable::read(p, sidecar(p).as_deref()).map_err(in_stage(stage))
}

fn execute(cli: Cli) -> CliResult<()> {
    let mut cfg = base_config(&cli)?;
    match cli.command {
        Command::Ingest { corpus, stats } => {
            if let Some(c) = corpus {
                cfg.corpus = c;
            }
            let mut p = Pipeline::new(cfg)?;
            p.ingest()?;
            if let Some(dst) = stats {
                let bytes = std::fs::read(p.dir().join(crate::pipeline::STATS))
                    .map_err(in_stage("ingest"))?;
                write_out(&dst, &bytes, "ingest")?;
            }
            Ok(())
        }
        Command::Featurize {
            embeddings,
            synonyms,
            parses,
            stopwords,
        } => {
            let r = &mut cfg.resources;
            set(&mut r.embeddings, &embeddings);
            set(&mut r.synonyms, &synonyms);
            set(&mut r.parses, &parses);
            set(&mut r.stopwords, &stopwords);
            Pipeline::new(cfg)?.featurize()
        }
        Command::Factorize {
            corpus,
            synsets,
            k,
            lambda1,
            out,
        } => {
            if let Some(c) = corpus {
                cfg.corpus = c;
            }
            set(&mut cfg.resources.synsets, &synsets);
            if let Some(k) = k {
                cfg.nnse.k = k;
            }
            if let Some(l) = lambda1 {
                cfg.nnse.lambda1 = l;
            }
            match out {
                Some(out) => factorize_pooled(&cfg, &out),
                None => Pipeline::new(cfg)?.factorize(),
            }
        }
        Command::Train {
            features,
            dev,
            groups,
            grid,
            per_domain,
            out,
        } => {
            if let Some(g) = &grid {
                cfg.classifier.grid = Some(parse_grid(g)?);
            }
            if !groups.is_empty() {
                cfg.features.combinations = groups;
            }
            match features {
                Some(f) => {
                    let dev = dev
                        .ok_or_else(|| CliError::validation("--dev is required with --features"))?;
                    let out = out
                        .ok_or_else(|| CliError::validation("--out is required with --features"))?;
                    train_standalone(&cfg, &f, &dev, per_domain, &out)
                }
                None => Pipeline::new(cfg)?.train(),
            }
        }
        Command::Evaluate {
            model,
            features,
            train_features,
            report,
        } => match model {
            Some(m) => {
                let f = features
                    .ok_or_else(|| CliError::validation("--features is required with --model"))?;
                require_file("model", &m)?;
                let art: ClassifierArtifact = read_json(&m).map_err(in_stage("evaluate"))?;
                let test = read_table(&f, "evaluate")?;
                let train = train_features
                    .map(|p| read_table(&p, "evaluate"))
                    .transpose()?;
                let out = evaluate_artifact(
                    &art,
                    train.as_ref(),
                    &test,
                    cfg.classifier.ap_trials,
                    cfg.seed,
                )
                .map_err(in_stage("evaluate"))?;
                let bytes = json_bytes(&out).map_err(in_stage("evaluate"))?;
                match report {
                    Some(r) => write_out(&r, &bytes, "evaluate"),
                    None => {
                        print!("{}", String::from_utf8_lossy(&bytes));
                        Ok(())
                    }
                }
            }
            None => Pipeline::new(cfg)?.evaluate(),
        },
        Command::Factors {
            model,
            corpus,
            top,
            ngrams,
            report,
        } => {
            if let Some(t) = top {
                cfg.report.factors_per_side = t;
            }
            if let Some(n) = ngrams {
                let parts: Vec<usize> = n
                    .split(',')
                    .map(|v| v.trim().parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| {
                        CliError::validation(format!("--ngrams expects min,max, got `{n}`"))
                    })?;
                let [lo, hi] = parts[..] else {
                    return Err(CliError::validation(format!(
                        "--ngrams expects min,max, got `{n}`"
                    )));
                };
                if lo == 0 || lo > hi {
                    return Err(CliError::validation("--ngrams needs 1 <= min <= max"));
                }
                cfg.report.ngram_range = (lo, hi);
            }
            match model {
                Some(m) => {
                    if let Some(c) = corpus {
                        cfg.corpus = c;
                    }
                    factors_standalone(&cfg, &m, report.as_deref())
                }
                None => Pipeline::new(cfg)?.factors(),
            }
        }
        Command::Report => Pipeline::new(cfg)?.report(),
        Command::Run => Pipeline::new(cfg)?.run_all(),
    }
}

fn factorize_pooled(cfg: &PipelineConfig, out: &Path) -> CliResult<()> {
    cfg.validate()?;
    let run = || -> Result<(), BoxError> {
        let (threads, _) = ingest_corpus(&cfg.corpus)?;
        let tokenizer = match &cfg.resources.stopwords {
            Some(p) => qfactors_core::textsim::Tokenizer::with_stopwords(
                qfactors_core::textsim::read_word_list(std::io::BufReader::new(
                    std::fs::File::open(p)?,
                ))?,
            ),
            None => Default::default(),
        };
        let synsets = match &cfg.resources.synsets {
            Some(p) => Some(SynsetLexicon::read(std::io::BufReader::new(
                std::fs::File::open(p)?,
            ))?),
            None => None,
        };
        let questions: Vec<(&str, &str)> = threads
            .iter()
            .flat_map(|t| &t.questions)
            .map(|q| (q.id.as_str(), q.text.as_str()))
            .collect();
        if questions.len() < 2 {
            return Err("need at least 2 questions to factorize".into());
        }
        let seed = crate::pipeline::derive_seed(cfg.seed, "factorize/all");
        let (model, summary) =
            factorize_questions(&questions, &tokenizer, synsets.as_ref(), cfg, seed)?;
        let bytes = json_bytes(&model)?;
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(out, bytes)?;
        eprintln!(
            "{} questions, {} terms, rank {}, k {}, {} iterations",
            summary.questions, summary.terms, summary.rank, summary.k, summary.iterations
        );
        Ok(())
    };
    run().map_err(in_stage("factorize"))
}

fn train_standalone(
    cfg: &PipelineConfig,
    features: &Path,
    dev: &Path,
    per_domain: bool,
    out: &Path,
) -> CliResult<()> {
    let combos = cfg.combinations()?;
    let grid = cfg.grid();
    if grid.is_empty() {
        return Err(CliError::validation("empty regularization grid"));
    }
    let train_t = read_table(features, "train")?;
    let dev_t = read_table(dev, "train")?;
    let vocab_path = features.with_file_name(crate::pipeline::VOCABULARY);
    let vocab: Vocabulary = if vocab_path.is_file() {
        read_json(&vocab_path).map_err(in_stage("train"))?
    } else {
        Vocabulary::default()
    };
    let base = TrainConfig {
        l1: 0.0,
        l2: 0.0,
        tol: cfg.classifier.tol,
        max_iters: cfg.classifier.max_iters,
    };
    let domains: Vec<_> = if per_domain {
        train_t.domains().into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let mut models = Vec::new();
    for d in domains {
        for c in &combos {
            models.push(
                fit_combination(&train_t, &dev_t, d, c, &vocab, &grid, &base)
                    .map_err(in_stage("train"))?,
            );
        }
    }
    let bytes = json_bytes(&ClassifierArtifact {
        vocabulary: vocab,
        models,
    })
    .map_err(in_stage("train"))?;
    write_out(out, &bytes, "train")
}

fn factors_standalone(cfg: &PipelineConfig, model: &Path, report: Option<&Path>) -> CliResult<()> {
    require_file("model", model)?;
    require_file("corpus", &cfg.corpus)?;
    let run = || -> Result<Vec<u8>, BoxError> {
        let model: NnseModel<f64> = read_json(model)?;
        let (threads, _) = ingest_corpus(&cfg.corpus)?;
        let questions: HashMap<&str, (&str, bool)> = threads
            .iter()
            .flat_map(|t| &t.questions)
            .map(|q| (q.id.as_str(), (q.text.as_str(), q.answered)))
            .collect();
        let (_, highest, lowest) = rank_factors(&model, &questions, cfg, &Default::default())?;
        #[derive(serde::Serialize)]
        struct Out {
            highest: Vec<FactorEntry>,
            lowest: Vec<FactorEntry>,
        }
        Ok(json_bytes(&Out { highest, lowest })?)
    };
    let bytes = run().map_err(in_stage("factors"))?;
    match report {
        Some(r) => write_out(r, &bytes, "factors"),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(
            parse_grid("0:0.1, 0.01:0").unwrap(),
            vec![(0.0, 0.1), (0.01, 0.0)]
        );
        assert_eq!(parse_grid("default").unwrap().len(), 36);
        assert!(parse_grid("1").is_err());
        assert!(parse_grid("-1:0").is_err());
    }

    #[test]
    fn combination_flag_is_checked() {
        let args = ["qfactors", "train", "--groups", "temporal+bogus"];
        let cli = Cli::try_parse_from(args).unwrap();
        let err = execute(cli).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_flag_exits_2() {
        assert_eq!(main_with(["qfactors", "run", "--no-such-flag"]), 2);
    }
}
