use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::nnse::NnseModel;
use crate::error::{Error, Result};
use crate::textsim::Tokenizer;
use crate::Real;

/// Text and outcome of a factorized question, indexed like the model rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionRow<'a> {
    pub id: &'a str,
    pub text: &'a str,
    pub answered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    /// Rows with membership strictly above this weight belong to the factor.
    pub membership_threshold: f64,
    pub top_questions: usize,
    /// Inclusive n-gram length range.
    pub ngram_range: (usize, usize),
    pub top_ngrams: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            membership_threshold: 0.0,
            top_questions: 10,
            ngram_range: (2, 3),
            top_ngrams: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    pub factor: usize,
    pub members: usize,
    pub answered: usize,
    /// Percent of members answered; `None` for a factor without members.
    pub response_rate: Option<f64>,
    pub top_questions: Vec<(String, f64)>,
    pub frequent_ngrams: Vec<(String, usize)>,
}

/// Membership, response rate, strongest questions and common n-grams of factor `j`.
pub fn factor_report<T: Real>(
    model: &NnseModel<T>,
    questions: &[QuestionRow<'_>],
    j: usize,
    opts: &ReportOptions,
    tokenizer: &Tokenizer,
) -> Result<FactorReport> {
    if questions.len() != model.n {
        return Err(Error::Shape(format!(
            "{} questions for a model over {} rows",
            questions.len(),
            model.n
        )));
    }
    let (lo, hi) = opts.ngram_range;
    if lo == 0 || lo > hi {
        return Err(Error::invalid(format!("bad n-gram range {lo}..={hi}")));
    }
    let threshold = T::lit(opts.membership_threshold);
    let members: Vec<(usize, T)> = model
        .factor_members(j)?
        .into_iter()
        .filter(|&(_, w)| w > threshold)
        .collect();
    let answered = members
        .iter()
        .filter(|&&(i, _)| questions[i].answered)
        .count();
    let response_rate =
        (!members.is_empty()).then(|| 100.0 * answered as f64 / members.len() as f64);

    let top_questions = members
        .iter()
        .take(opts.top_questions)
        .map(|&(i, w)| (questions[i].id.to_string(), w.to_f64_lossy()))
        .collect();

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for &(i, _) in &members {
        let toks = tokenizer.content_tokens(questions[i].text);
        for n in lo..=hi {
            for gram in toks.windows(n) {
                *counts.entry(gram.join(" ")).or_default() += 1;
            }
        }
    }
    let mut frequent_ngrams: Vec<(String, usize)> = counts.into_iter().collect();
    frequent_ngrams.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    frequent_ngrams.truncate(opts.top_ngrams);

    Ok(FactorReport {
        factor: j,
        members: members.len(),
        answered,
        response_rate,
        top_questions,
        frequent_ngrams,
    })
}
