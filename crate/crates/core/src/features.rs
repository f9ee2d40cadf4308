//! Per-question factor features and schema-stable feature vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Question, Thread};
use crate::error::{Error, Result};
use crate::parsetree::SentenceSyntax;
use crate::textsim::{extended_jaccard, read_word_list, Tokenizer, WordMatcher};

pub const DEFAULT_GREETINGS: &str = include_str!("../data/greetings.txt");
pub const DEFAULT_APOLOGIES: &str = include_str!("../data/apologies.txt");
pub const DEFAULT_HEDGES: &str = include_str!("../data/hedges.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Length,
    Temporal,
    Politeness,
    Syntactic,
    Redundancy,
    Relevance,
    Unigram,
}

pub const SYNTACTIC_NAMES: [&str; 16] = [
    "syn_depth_avg",
    "syn_depth_max",
    "syn_depth_min",
    "syn_vp_count_avg",
    "syn_vp_count_max",
    "syn_vp_count_min",
    "syn_vp_depth_avg",
    "syn_vp_depth_max",
    "syn_vp_depth_min",
    "syn_vp_ratio_avg",
    "syn_vp_ratio_max",
    "syn_vp_ratio_min",
    "syn_sentences",
    "syn_vp_total",
    "syn_depth_global_max",
    "syn_vp_ratio_global_max",
];

impl FeatureGroup {
    /// Dense groups in schema order.
    pub const DENSE: [FeatureGroup; 6] = [
        FeatureGroup::Length,
        FeatureGroup::Temporal,
        FeatureGroup::Politeness,
        FeatureGroup::Syntactic,
        FeatureGroup::Redundancy,
        FeatureGroup::Relevance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Length => "length",
            FeatureGroup::Temporal => "temporal",
            FeatureGroup::Politeness => "politeness",
            FeatureGroup::Syntactic => "syntactic",
            FeatureGroup::Redundancy => "redundancy",
            FeatureGroup::Relevance => "relevance",
            FeatureGroup::Unigram => "unigram",
        }
    }

    /// Dense feature names contributed by this group (none for unigrams).
    pub fn feature_names(self) -> Vec<&'static str> {
        match self {
            FeatureGroup::Length => vec!["length"],
            FeatureGroup::Temporal => vec!["frac_answered_before", "frac_time_elapsed"],
            FeatureGroup::Politeness => vec!["politeness"],
            FeatureGroup::Syntactic => SYNTACTIC_NAMES.to_vec(),
            FeatureGroup::Redundancy => vec!["redundancy"],
            FeatureGroup::Relevance => vec!["relevance"],
            FeatureGroup::Unigram => vec![],
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "length" => Ok(FeatureGroup::Length),
            "temporal" => Ok(FeatureGroup::Temporal),
            "politeness" => Ok(FeatureGroup::Politeness),
            "syntactic" | "syntax" => Ok(FeatureGroup::Syntactic),
            "redundancy" => Ok(FeatureGroup::Redundancy),
            "relevance" => Ok(FeatureGroup::Relevance),
            "unigram" | "unigrams" => Ok(FeatureGroup::Unigram),
            other => Err(Error::invalid(format!("unknown feature group `{other}`"))),
        }
    }
}

/// Parses `temporal,redundancy` style lists.
pub fn parse_groups(s: &str) -> Result<BTreeSet<FeatureGroup>> {
    s.split(['+', ','])
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<(String, FeatureGroup)>,
    /// Whether vectors carry a sparse unigram part.
    pub unigrams: bool,
}

impl FeatureSchema {
    pub fn for_groups(groups: &BTreeSet<FeatureGroup>) -> Self {
        let columns = FeatureGroup::DENSE
            .iter()
            .filter(|g| groups.contains(g))
            .flat_map(|&g| {
                g.feature_names()
                    .into_iter()
                    .map(move |n| (n.to_string(), g))
            })
            .collect();
        FeatureSchema {
            columns,
            unigrams: groups.contains(&FeatureGroup::Unigram),
        }
    }

    pub fn dense_len(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn groups(&self) -> BTreeSet<FeatureGroup> {
        let mut g: BTreeSet<_> = self.columns.iter().map(|&(_, g)| g).collect();
        if self.unigrams {
            g.insert(FeatureGroup::Unigram);
        }
        g
    }

    /// Column positions belonging to `groups`, in schema order.
    pub fn indices_of(&self, groups: &BTreeSet<FeatureGroup>) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, (_, g))| groups.contains(g))
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub question_id: String,
    pub values: Vec<f64>,
    pub unigrams: BTreeMap<usize, u32>,
    pub label: bool,
    pub missing_parse: bool,
}

/// Token count with stop-words kept.
pub fn length_feature(q: &Question, tokenizer: &Tokenizer) -> f64 {
    let n = tokenizer.tokens(&q.text).len();
    debug_assert!(n >= 1 || q.text.trim().is_empty() || !q.text.chars().any(char::is_alphanumeric));
    n as f64
}

/// What `frac_time_elapsed` divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeAnchor {
    /// Thread start to the last answered question.
    #[default]
    LastAnswered,
    /// Thread start to the recorded thread end.
    ThreadEnd,
}

/// `(fraction of the thread's answers given before q, fraction of the thread's time elapsed)`.
pub fn temporal_features(q: &Question, t: &Thread, anchor: TimeAnchor) -> (f64, f64) {
    let answered: Vec<i64> = t
        .questions
        .iter()
        .filter(|o| o.answered)
        .map(|o| o.posted_at)
        .collect();
    let frac_answered = if answered.is_empty() {
        0.0
    } else {
        answered.iter().filter(|&&p| p < q.posted_at).count() as f64 / answered.len() as f64
    };

    let end = match anchor {
        TimeAnchor::LastAnswered => answered.iter().copied().max().unwrap_or(t.ended_at),
        TimeAnchor::ThreadEnd => t.ended_at,
    };
    let span = (end - t.started_at) as f64;
    let frac_time = if span > 0.0 {
        (q.posted_at - t.started_at) as f64 / span
    } else if q.posted_at > t.started_at {
        1.0
    } else {
        0.0
    };
    (frac_answered.clamp(0.0, 1.0), frac_time.clamp(0.0, 1.0))
}

/// Greeting, apology and hedge phrases, stored tokenised.
#[derive(Debug, Clone)]
pub struct PolitenessLexicon {
    pub greetings: Vec<Vec<String>>,
    pub apologies: Vec<Vec<String>>,
    pub hedges: Vec<Vec<String>>,
}

impl Default for PolitenessLexicon {
    fn default() -> Self {
        Self::from_lists(DEFAULT_GREETINGS, DEFAULT_APOLOGIES, DEFAULT_HEDGES)
            .expect("bundled lexicons")
    }
}

impl PolitenessLexicon {
    pub fn from_lists(greetings: &str, apologies: &str, hedges: &str) -> Result<Self> {
        let load = |s: &str| -> Result<Vec<Vec<String>>> {
            Ok(read_word_list(s.as_bytes())?
                .iter()
                .map(|p| crate::textsim::tokens(p))
                .filter(|p| !p.is_empty())
                .collect())
        };
        Ok(PolitenessLexicon {
            greetings: load(greetings)?,
            apologies: load(apologies)?,
            hedges: load(hedges)?,
        })
    }

    /// Occurrences of each marker class in a token sequence: (greetings, apologies, hedges).
    pub fn hits(&self, toks: &[String]) -> (usize, usize, usize) {
        let count = |phrases: &[Vec<String>]| -> usize {
            phrases
                .iter()
                .map(|p| toks.windows(p.len()).filter(|w| *w == p.as_slice()).count())
                .sum()
        };
        (
            count(&self.greetings),
            count(&self.apologies),
            count(&self.hedges),
        )
    }
}

/// Marker hits per token.
pub fn politeness_score(q: &Question, lex: &PolitenessLexicon) -> f64 {
    let toks = crate::textsim::tokens(&q.text);
    if toks.is_empty() {
        return 0.0;
    }
    let (g, a, h) = lex.hits(&toks);
    (g + a + h) as f64 / toks.len() as f64
}

/// Aggregates per-sentence statistics into the 16 syntactic features.
///
/// Layout: for depth, VP count, max VP depth and VP ratio, the average, maximum and
/// minimum across sentences; then sentence count, total VPs, the largest depth and
/// the largest VP ratio. An empty list (no parse) gives zeros.
pub fn syntactic_features(sentences: &[SentenceSyntax]) -> [f64; 16] {
    let mut out = [0.0; 16];
    if sentences.is_empty() {
        return out;
    }
    let n = sentences.len() as f64;
    let stats: [Vec<f64>; 4] = [
        sentences.iter().map(|s| s.depth as f64).collect(),
        sentences.iter().map(|s| s.vp_count as f64).collect(),
        sentences.iter().map(|s| s.max_vp_depth as f64).collect(),
        sentences.iter().map(|s| s.vp_ratio).collect(),
    ];
    for (i, vals) in stats.iter().enumerate() {
        out[3 * i] = vals.iter().sum::<f64>() / n;
        out[3 * i + 1] = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out[3 * i + 2] = vals.iter().copied().fold(f64::INFINITY, f64::min);
    }
    out[12] = n;
    out[13] = stats[1].iter().sum();
    out[14] = out[1];
    out[15] = out[10];
    out
}

/// Highest similarity to any question posted strictly earlier in the thread.
pub fn redundancy_score<F>(q: &Question, t: &Thread, sim: F) -> f64
where
    F: Fn(&str, &str) -> f64,
{
    t.questions
        .iter()
        .filter(|o| o.posted_at < q.posted_at && o.id != q.id)
        .map(|o| sim(&q.text, &o.text))
        .fold(0.0, f64::max)
}

/// Similarity to the thread description; 0 when there is none.
pub fn relevance_score<F>(q: &Question, t: &Thread, sim: F) -> f64
where
    F: Fn(&str, &str) -> f64,
{
    if t.description.trim().is_empty() {
        return 0.0;
    }
    sim(&q.text, &t.description)
}

/// Word → column index, ordered lexicographically.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(terms: Vec<String>) -> Self {
        Vocabulary::from_terms(terms)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.terms
    }
}

impl Vocabulary {
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = terms.into_iter().map(Into::into).collect();
        let terms: Vec<String> = set.into_iter().collect();
        let mut v = Vocabulary {
            terms,
            index: HashMap::new(),
        };
        v.reindex();
        v
    }

    /// Vocabulary of every token in `texts`.
    pub fn build<'a, I>(texts: I, tokenizer: &Tokenizer) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        Self::from_terms(texts.into_iter().flat_map(|t| tokenizer.tokens(t)))
    }

    fn reindex(&mut self) {
        self.index = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn get(&self, w: &str) -> Option<usize> {
        self.index.get(w).copied()
    }

    pub fn term(&self, i: usize) -> Option<&str> {
        self.terms.get(i).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Counts of in-vocabulary tokens.
pub fn unigram_features(
    q: &Question,
    vocab: &Vocabulary,
    tokenizer: &Tokenizer,
) -> BTreeMap<usize, u32> {
    let mut out = BTreeMap::new();
    for tok in tokenizer.tokens(&q.text) {
        if let Some(i) = vocab.get(&tok) {
            *out.entry(i).or_insert(0) += 1;
        }
    }
    out
}

/// Soft-matched Jaccard over stop-word-filtered token sets.
#[derive(Debug, Clone)]
pub struct TextSimilarity {
    pub tokenizer: Tokenizer,
    pub matcher: WordMatcher<f64>,
}

impl TextSimilarity {
    pub fn new(tokenizer: Tokenizer, matcher: WordMatcher<f64>) -> Self {
        TextSimilarity { tokenizer, matcher }
    }

    pub fn score(&self, a: &str, b: &str) -> f64 {
        let (sa, sb) = (self.tokenizer.token_set(a), self.tokenizer.token_set(b));
        extended_jaccard(&sa, &sb, |x, y| self.matcher.matches(x, y))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub groups: BTreeSet<FeatureGroup>,
    pub time_anchor: TimeAnchor,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            groups: FeatureGroup::DENSE.into_iter().collect(),
            time_anchor: TimeAnchor::default(),
        }
    }
}

/// Everything feature extraction reads besides the question and its thread.
#[derive(Debug, Clone)]
pub struct FeatureResources {
    pub tokenizer: Tokenizer,
    pub politeness: PolitenessLexicon,
    pub similarity: TextSimilarity,
    pub parses: HashMap<String, Vec<SentenceSyntax>>,
    pub vocab: Option<Vocabulary>,
}

impl Default for FeatureResources {
    fn default() -> Self {
        FeatureResources {
            tokenizer: Tokenizer::default(),
            politeness: PolitenessLexicon::default(),
            similarity: TextSimilarity::new(Tokenizer::default(), WordMatcher::exact()),
            parses: HashMap::new(),
            vocab: None,
        }
    }
}

/// Builds the feature vector of `q` (which must belong to `t`) under `schema`.
pub fn assemble(
    q: &Question,
    t: &Thread,
    config: &FeatureConfig,
    schema: &FeatureSchema,
    res: &FeatureResources,
) -> Result<FeatureVector> {
    if schema.groups() != config.groups {
        return Err(Error::Shape(format!(
            "schema groups {:?} do not match configured groups {:?}",
            schema.groups(),
            config.groups
        )));
    }
    if !t.questions.iter().any(|o| o.id == q.id) {
        return Err(Error::invalid(format!(
            "question `{}` is not part of thread `{}`",
            q.id, t.id
        )));
    }

    let sim = |a: &str, b: &str| res.similarity.score(a, b);
    let parse = res.parses.get(&q.id);
    let mut values = Vec::with_capacity(schema.dense_len());
    for g in FeatureGroup::DENSE
        .iter()
        .filter(|g| config.groups.contains(g))
    {
        match g {
            FeatureGroup::Length => values.push(length_feature(q, &res.tokenizer)),
            FeatureGroup::Temporal => {
                let (a, b) = temporal_features(q, t, config.time_anchor);
                values.extend([a, b]);
            }
            FeatureGroup::Politeness => values.push(politeness_score(q, &res.politeness)),
            FeatureGroup::Syntactic => {
                values.extend(syntactic_features(parse.map(Vec::as_slice).unwrap_or(&[])))
            }
            FeatureGroup::Redundancy => values.push(redundancy_score(q, t, sim)),
            FeatureGroup::Relevance => values.push(relevance_score(q, t, sim)),
            FeatureGroup::Unigram => unreachable!("unigram is not a dense group"),
        }
    }
    if values.len() != schema.dense_len() {
        return Err(Error::Shape(format!(
            "built {} values for a {}-column schema",
            values.len(),
            schema.dense_len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature vector"));
    }

    let unigrams = if schema.unigrams {
        let vocab = res
            .vocab
            .as_ref()
            .ok_or_else(|| Error::invalid("unigram features need a vocabulary"))?;
        unigram_features(q, vocab, &res.tokenizer)
    } else {
        BTreeMap::new()
    };

    Ok(FeatureVector {
        question_id: q.id.clone(),
        values,
        unigrams,
        label: q.answered,
        missing_parse: parse.is_none(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Domain;

    fn q(id: &str, t: i64, text: &str, answered: bool) -> Question {
        Question {
            id: id.into(),
            thread_id: "t".into(),
            author: "u".into(),
            posted_at: t,
            text: text.into(),
            answered,
            top_level: true,
        }
    }

    fn thread(questions: Vec<Question>, description: &str) -> Thread {
        Thread {
            id: "t".into(),
            domain: Domain::Author,
            description: description.into(),
            started_at: 0,
            ended_at: 100,
            questions,
        }
    }

    fn groups(gs: &[FeatureGroup]) -> BTreeSet<FeatureGroup> {
        gs.iter().copied().collect()
    }

    #[test]
    fn length_counts_all_tokens() {
        let tok = Tokenizer::default();
        assert_eq!(length_feature(&q("a", 0, "Why?", false), &tok), 1.0);
        assert_eq!(
            length_feature(
                &q("a", 0, "How far is your office from your home?", false),
                &tok
            ),
            8.0
        );
    }

    #[test]
    fn temporal_boundaries() {
        let t = thread(
            vec![
                q("a", 0, "a?", false),
                q("b", 10, "b?", true),
                q("c", 20, "c?", true),
                q("d", 25, "d?", false),
                q("e", 30, "e?", true),
            ],
            "",
        );
        assert_eq!(
            temporal_features(&t.questions[0], &t, TimeAnchor::LastAnswered),
            (0.0, 0.0)
        );
        let (fa, ft) = temporal_features(&t.questions[3], &t, TimeAnchor::LastAnswered);
        assert_eq!(fa, 2.0 / 3.0);
        assert_eq!(ft, 25.0 / 30.0);
        assert_eq!(
            temporal_features(&t.questions[4], &t, TimeAnchor::LastAnswered).1,
            1.0
        );
        assert_eq!(
            temporal_features(&t.questions[4], &t, TimeAnchor::ThreadEnd).1,
            0.3
        );
    }

    #[test]
    fn politeness_counts_markers() {
        let lex = PolitenessLexicon::default();
        let text = "Thanks! Sorry to bother you, but could you perhaps explain?";
        let toks = crate::textsim::tokens(text);
        let (g, a, h) = lex.hits(&toks);
        assert!(g >= 1 && a >= 1 && h >= 1, "{g} {a} {h}");
        assert!(politeness_score(&q("x", 0, text, false), &lex) > 0.0);
        assert_eq!(
            politeness_score(&q("x", 0, "what is this?", false), &lex),
            0.0
        );
        let one = politeness_score(&q("x", 0, "sorry okay", false), &lex);
        let two = politeness_score(&q("x", 0, "sorry sorry", false), &lex);
        assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn syntactic_aggregation() {
        assert_eq!(syntactic_features(&[]), [0.0; 16]);
        let s = SentenceSyntax {
            depth: 7,
            vp_count: 3,
            max_vp_depth: 6,
            vp_ratio: 6.0 / 7.0,
        };
        let f = syntactic_features(&[s]);
        for i in 0..4 {
            assert_eq!(f[3 * i], f[3 * i + 1]);
            assert_eq!(f[3 * i], f[3 * i + 2]);
        }
        let a = SentenceSyntax {
            depth: 2,
            vp_count: 0,
            max_vp_depth: 0,
            vp_ratio: 0.0,
        };
        let b = SentenceSyntax {
            depth: 11,
            vp_count: 4,
            max_vp_depth: 9,
            vp_ratio: 9.0 / 11.0,
        };
        let f = syntactic_features(&[a, b]);
        assert_eq!(&f[0..3], &[6.5, 11.0, 2.0]);
        assert_eq!(&f[12..16], &[2.0, 4.0, 11.0, 9.0 / 11.0]);
    }

    #[test]
    fn redundancy_and_relevance() {
        let sim = TextSimilarity::new(Tokenizer::default(), WordMatcher::exact());
        let s = |a: &str, b: &str| sim.score(a, b);
        let t = thread(
            vec![
                q("a", 1, "What's your favorite Middle Eastern Dish?", false),
                q("b", 2, "What's your favourite dish to prepare?", false),
                q("c", 3, "What's your favorite Middle Eastern Dish?", false),
            ],
            "",
        );
        assert_eq!(redundancy_score(&t.questions[0], &t, s), 0.0);
        let r = redundancy_score(&t.questions[1], &t, s);
        assert!(r > 0.2, "{r}");
        assert_eq!(redundancy_score(&t.questions[2], &t, s), 1.0);

        assert_eq!(relevance_score(&t.questions[0], &t, s), 0.0);
        let d = thread(
            t.questions.clone(),
            "What's your favorite Middle Eastern Dish?",
        );
        assert_eq!(relevance_score(&d.questions[0], &d, s), 1.0);
        let e = thread(t.questions.clone(), "cars trucks");
        assert_eq!(relevance_score(&e.questions[0], &e, s), 0.0);
    }

    #[test]
    fn unigram_counts() {
        let tok = Tokenizer::default();
        let vocab = Vocabulary::build(["why not"], &tok);
        assert!(unigram_features(&q("x", 0, "hello there?", false), &vocab, &tok).is_empty());
        let u = unigram_features(&q("x", 0, "why why why", false), &vocab, &tok);
        assert_eq!(u, BTreeMap::from([(vocab.get("why").unwrap(), 3)]));
    }

    #[test]
    fn schema_arity() {
        assert_eq!(
            FeatureSchema::for_groups(&groups(&[FeatureGroup::Length])).dense_len(),
            1
        );
        assert_eq!(
            FeatureSchema::for_groups(&groups(&[FeatureGroup::Temporal, FeatureGroup::Redundancy]))
                .dense_len(),
            3
        );
        assert_eq!(
            FeatureSchema::for_groups(&groups(&FeatureGroup::DENSE)).dense_len(),
            22
        );
        assert_eq!(
            parse_groups("temporal+syntax,unigram").unwrap(),
            groups(&[
                FeatureGroup::Temporal,
                FeatureGroup::Syntactic,
                FeatureGroup::Unigram
            ])
        );
    }

    #[test]
    fn assemble_checks_schema_and_is_deterministic() {
        let t = thread(
            vec![q("a", 1, "why?", true), q("b", 2, "why not?", false)],
            "why",
        );
        let cfg = FeatureConfig::default();
        let schema = FeatureSchema::for_groups(&cfg.groups);
        let res = FeatureResources::default();
        let v1 = assemble(&t.questions[1], &t, &cfg, &schema, &res).unwrap();
        let v2 = assemble(&t.questions[1], &t, &cfg, &schema, &res).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(v1.values.len(), 22);
        assert!(v1.missing_parse);

        let other = FeatureSchema::for_groups(&groups(&[FeatureGroup::Length]));
        assert!(assemble(&t.questions[1], &t, &cfg, &other, &res).is_err());

        let cfg_u = FeatureConfig {
            groups: groups(&[FeatureGroup::Unigram]),
            ..Default::default()
        };
        let schema_u = FeatureSchema::for_groups(&cfg_u.groups);
        assert!(assemble(&t.questions[0], &t, &cfg_u, &schema_u, &res).is_err());
    }
}
