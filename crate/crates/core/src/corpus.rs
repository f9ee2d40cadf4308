//! Question-thread corpora: ingestion, filtering, splitting and statistics.
//!
//! A corpus dump is JSONL with one thread per line:
//!
//! ```text
//! {"id": "t1", "domain": "author", "description": "...", "started_at": 0, "ended_at": 900,
//!  "questions": [{"id": "q1", "author": "u", "posted_at": 10, "text": "Why?",
//!                 "answered": true, "top_level": true}]}
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Actor,
    Author,
    Politician,
    Director,
    Other,
}

impl Domain {
    pub const ALL: [Domain; 5] = [
        Domain::Actor,
        Domain::Author,
        Domain::Politician,
        Domain::Director,
        Domain::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Actor => "actor",
            Domain::Author => "author",
            Domain::Politician => "politician",
            Domain::Director => "director",
            Domain::Other => "other",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "actor" => Ok(Domain::Actor),
            "author" => Ok(Domain::Author),
            "politician" => Ok(Domain::Politician),
            "director" => Ok(Domain::Director),
            "other" => Ok(Domain::Other),
            other => Err(Error::invalid(format!("unknown domain `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    #[serde(default)]
    pub thread_id: String,
    pub author: String,
    pub posted_at: i64,
    pub text: String,
    pub answered: bool,
    pub top_level: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thread {
    pub id: String,
    pub domain: Domain,
    pub description: String,
    pub started_at: i64,
    pub ended_at: i64,
    pub questions: Vec<Question>,
}

impl Thread {
    /// Timestamp of the last answered question, if any.
    pub fn last_answered_at(&self) -> Option<i64> {
        self.questions
            .iter()
            .filter(|q| q.answered)
            .map(|q| q.posted_at)
            .max()
    }

    pub fn answered_count(&self) -> usize {
        self.questions.iter().filter(|q| q.answered).count()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }
}

#[derive(Deserialize)]
struct RawQuestion {
    id: String,
    author: String,
    posted_at: i64,
    text: String,
    answered: bool,
    top_level: bool,
}

#[derive(Deserialize)]
struct RawThread {
    id: String,
    domain: String,
    #[serde(default)]
    description: String,
    started_at: i64,
    ended_at: i64,
    questions: Vec<RawQuestion>,
}

/// Output of [`parse_corpus`].
#[derive(Debug, Clone, Default)]
pub struct ParsedCorpus {
    pub threads: Vec<Thread>,
    /// Threads whose domain tag was not recognised and was mapped to `other`.
    pub unknown_domains: usize,
}

/// Reads a JSONL corpus dump. Questions are re-sorted by `posted_at` (stable on ties).
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<ParsedCorpus> {
    let mut out = ParsedCorpus::default();
    let mut seen = HashSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawThread = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let domain = match raw.domain.parse::<Domain>() {
            Ok(d) => d,
            Err(_) => {
                out.unknown_domains += 1;
                Domain::Other
            }
        };
        if raw.started_at > raw.ended_at {
            return Err(Error::Parse {
                line: lineno,
                message: format!("thread `{}` ends before it starts", raw.id),
            });
        }

        let mut questions = Vec::with_capacity(raw.questions.len());
        for q in raw.questions {
            if !seen.insert(q.id.clone()) {
                return Err(Error::DuplicateQuestion(q.id));
            }
            if q.posted_at < 0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("question `{}` has negative posted_at", q.id),
                });
            }
            if q.text.trim().is_empty() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("question `{}` has empty text", q.id),
                });
            }
            if q.posted_at < raw.started_at || q.posted_at > raw.ended_at {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!(
                        "question `{}` posted at {} outside thread window [{}, {}]",
                        q.id, q.posted_at, raw.started_at, raw.ended_at
                    ),
                });
            }
            questions.push(Question {
                id: q.id,
                thread_id: raw.id.clone(),
                author: q.author,
                posted_at: q.posted_at,
                text: q.text,
                answered: q.answered,
                top_level: q.top_level,
            });
        }
        questions.sort_by_key(|q| q.posted_at);

        out.threads.push(Thread {
            id: raw.id,
            domain,
            description: raw.description,
            started_at: raw.started_at,
            ended_at: raw.ended_at,
            questions,
        });
    }
    Ok(out)
}

/// Writes threads back out in the corpus JSONL format.
pub fn write_corpus<W: std::io::Write>(threads: &[Thread], mut w: W) -> Result<()> {
    for t in threads {
        let questions: Vec<_> = t
            .questions
            .iter()
            .map(|q| {
                serde_json::json!({
                    "id": q.id,
                    "author": q.author,
                    "posted_at": q.posted_at,
                    "text": q.text,
                    "answered": q.answered,
                    "top_level": q.top_level,
                })
            })
            .collect();
        let line = serde_json::json!({
            "id": t.id,
            "domain": t.domain.as_str(),
            "description": t.description,
            "started_at": t.started_at,
            "ended_at": t.ended_at,
            "questions": questions,
        });
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn has_question_mark(text: &str) -> bool {
    text.contains('?') || text.contains('\u{FF1F}')
}

/// Keeps top-level questions containing a question mark, posted no later than the
/// last of those questions that was answered. A thread without one comes back empty.
pub fn filter_questions(thread: &Thread) -> Thread {
    let mut out = thread.clone();
    out.questions.clear();
    let eligible = |q: &&Question| q.top_level && has_question_mark(&q.text);
    // The cutoff comes from a question that is itself kept, so filtering twice changes nothing.
    let Some(cutoff) = thread
        .questions
        .iter()
        .filter(eligible)
        .filter(|q| q.answered)
        .map(|q| q.posted_at)
        .max()
    else {
        return out;
    };
    out.questions = thread
        .questions
        .iter()
        .filter(eligible)
        .filter(|q| q.posted_at <= cutoff)
        .cloned()
        .collect();
    out
}

/// Train/dev/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            dev: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self> {
        let r = SplitRatios { train, dev, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("train", self.train),
            ("dev", self.dev),
            ("test", self.test),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} fraction {v} not in (0, 1)")));
            }
        }
        let sum = self.train + self.dev + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split fractions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Question ids per partition, each in corpus order (thread order, then position).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl CorpusSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Partitions questions into train/dev/test, stratified by thread.
///
/// Each thread's questions are shuffled with a seeded RNG and cut according to the
/// running totals, so every thread contributes in proportion and the global sizes are
/// the rounded targets.
pub fn split_corpus(threads: &[Thread], ratios: SplitRatios, seed: u64) -> Result<CorpusSplit> {
    ratios.validate()?;
    let total: usize = threads.iter().map(|t| t.questions.len()).sum();
    if total < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 questions to split, got {total}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment: BTreeMap<(usize, usize), u8> = BTreeMap::new();
    let (mut seen, mut n_train, mut n_dev) = (0usize, 0usize, 0usize);

    for (ti, t) in threads.iter().enumerate() {
        let n = t.questions.len();
        if n == 0 {
            continue;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);

        let cum = seen + n;
        let train_target = (cum as f64 * ratios.train).round() as usize;
        let dev_target = (cum as f64 * (ratios.train + ratios.dev)).round() as usize;
        let take_train = train_target.saturating_sub(n_train).min(n);
        let take_dev = dev_target
            .saturating_sub(n_train + take_train + n_dev)
            .min(n - take_train);

        for (rank, &qi) in order.iter().enumerate() {
            let part = if rank < take_train {
                0
            } else if rank < take_train + take_dev {
                1
            } else {
                2
            };
            assignment.insert((ti, qi), part);
        }
        n_train += take_train;
        n_dev += take_dev;
        seen = cum;
    }

    let mut split = CorpusSplit::default();
    for ((ti, qi), part) in assignment {
        let id = threads[ti].questions[qi].id.clone();
        match part {
            0 => split.train.push(id),
            1 => split.dev.push(id),
            _ => split.test.push(id),
        }
    }
    Ok(split)
}

/// Asked/replied counts with the response rate truncated to hundredths of a percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DomainStats {
    pub questions_asked: u64,
    pub questions_replied: u64,
    /// Response rate in hundredths of a percent, `floor(10000 * replied / asked)`.
    pub rate_hundredths: Option<u64>,
}

impl DomainStats {
    pub fn from_counts(asked: u64, replied: u64) -> Self {
        let rate_hundredths = (asked > 0).then(|| replied * 10_000 / asked);
        DomainStats {
            questions_asked: asked,
            questions_replied: replied,
            rate_hundredths,
        }
    }

    /// Percent with two decimals, `None` for 0/0.
    pub fn response_rate(&self) -> Option<f64> {
        self.rate_hundredths.map(|h| h as f64 / 100.0)
    }

    /// The rate rendered as `12.34`, or `n/a`.
    pub fn rate_display(&self) -> String {
        match self.rate_hundredths {
            Some(h) => format!("{}.{:02}", h / 100, h % 100),
            None => "n/a".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub domains: BTreeMap<Domain, DomainStats>,
    pub total: DomainStats,
}

/// Counts asked and replied questions per domain over the threads as given.
pub fn corpus_stats(threads: &[Thread]) -> CorpusStats {
    let mut counts: BTreeMap<Domain, (u64, u64)> = BTreeMap::new();
    for t in threads {
        let e = counts.entry(t.domain).or_default();
        e.0 += t.questions.len() as u64;
        e.1 += t.answered_count() as u64;
    }
    let (asked, replied) = counts
        .values()
        .fold((0, 0), |(a, r), &(da, dr)| (a + da, r + dr));
    CorpusStats {
        domains: counts
            .into_iter()
            .map(|(d, (a, r))| (d, DomainStats::from_counts(a, r)))
            .collect(),
        total: DomainStats::from_counts(asked, replied),
    }
}
