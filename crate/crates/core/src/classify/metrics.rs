use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&b| b).count();
    (pos, labels.len() - pos)
}

/// Probability that a random positive outscores a random negative, ties counting ½.
pub fn roc_auc<T: Real>(scores: &[T], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores, {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass("roc_auc labels"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Twice the rank sum of positives keeps tied (half-integer) ranks exact.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let twice_avg = (i + 1 + j) as u128;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        twice_rank_sum += twice_avg * pos_in_group;
        i = j;
    }
    let np = n_pos as u128;
    let twice_u = twice_rank_sum - np * (np + 1);
    Ok((twice_u as f64 / 2.0) / (n_pos as f64 * n_neg as f64))
}

/// Mean precision at the positions of positives in a ranked list.
pub fn average_precision(ranked_labels: &[bool]) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0.0;
    for (i, &y) in ranked_labels.iter().enumerate() {
        if y {
            hits += 1;
            total += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(Error::Empty("positives for average precision"));
    }
    Ok(total / hits as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Descending,
    Ascending,
}

/// Labels ordered by `values` in `dir`; equal values keep their input order.
pub fn ranked_labels<T: Real>(values: &[T], labels: &[bool], dir: Direction) -> Vec<bool> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let c = values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal);
        match dir {
            Direction::Descending => c.reverse(),
            Direction::Ascending => c,
        }
    });
    order.into_iter().map(|i| labels[i]).collect()
}

/// Ranking direction with the higher AP on the given data (descending on ties).
pub fn choose_direction<T: Real>(values: &[T], labels: &[bool]) -> Result<Direction> {
    let down = average_precision(&ranked_labels(values, labels, Direction::Descending))?;
    let up = average_precision(&ranked_labels(values, labels, Direction::Ascending))?;
    Ok(if up > down {
        Direction::Ascending
    } else {
        Direction::Descending
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApGain {
    pub direction: Direction,
    pub feature_ap: f64,
    pub random_ap_mean: f64,
    pub random_ap_std: f64,
    pub trials: usize,
    /// `100 · (feature AP − mean random AP) / mean random AP`.
    pub gain_pct: f64,
}

/// AP of the feature ranking against the mean AP of `trials` random orderings.
pub fn ap_gain<T: Real>(
    values: &[T],
    labels: &[bool],
    trials: usize,
    seed: u64,
    direction: Direction,
) -> Result<ApGain> {
    if values.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} values, {} labels",
            values.len(),
            labels.len()
        )));
    }
    if trials == 0 {
        return Err(Error::invalid("ap_gain needs at least one trial"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("feature values"));
    }
    let feature_ap = average_precision(&ranked_labels(values, labels, direction))?;
    let random: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let mut shuffled = labels.to_vec();
            shuffled.shuffle(&mut rng);
            average_precision(&shuffled).expect("positives present")
        })
        .collect();
    let mean = random.iter().sum::<f64>() / trials as f64;
    let var = random.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / trials as f64;
    Ok(ApGain {
        direction,
        feature_ap,
        random_ap_mean: mean,
        random_ap_std: var.sqrt(),
        trials,
        gain_pct: 100.0 * (feature_ap - mean) / mean,
    })
}

/// Label-independent uniform scores.
pub fn random_scores(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}
