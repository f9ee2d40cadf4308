//! Elastic-net logistic regression, grid search on a development split, ROC AUC,
//! average precision and AP gain over random orderings.

mod metrics;
mod model;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{
    ap_gain, average_precision, choose_direction, random_scores, ranked_labels, roc_auc, ApGain,
    Direction,
};
pub use model::{standardization, train, train_traced, ElasticNetModel, TrainConfig};

use crate::error::{Error, Result};
use crate::Real;

pub const DEFAULT_GRID_VALUES: [f64; 6] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

/// Every `(l1, l2)` pair over [`DEFAULT_GRID_VALUES`].
pub fn default_grid() -> Vec<(f64, f64)> {
    DEFAULT_GRID_VALUES
        .iter()
        .flat_map(|&a| DEFAULT_GRID_VALUES.iter().map(move |&b| (a, b)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub l1: f64,
    pub l2: f64,
    /// `None` when training or scoring failed for this cell.
    pub dev_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub l1: f64,
    pub l2: f64,
    pub dev_auc: f64,
    pub cells: Vec<GridCell>,
}

/// Trains every grid point on `train` and keeps the best development AUC. Ties go
/// to the larger `l1 + l2`, then to the larger `l1`.
pub fn grid_search<T: Real>(
    train_x: ArrayView2<'_, T>,
    train_y: &[bool],
    dev_x: ArrayView2<'_, T>,
    dev_y: &[bool],
    grid: &[(f64, f64)],
    base: &TrainConfig,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::invalid("empty regularization grid"));
    }
    let cells: Vec<GridCell> = grid
        .par_iter()
        .map(|&(l1, l2)| {
            let cfg = TrainConfig { l1, l2, ..*base };
            let dev_auc = train(train_x, train_y, &cfg)
                .and_then(|m| m.decision_function(dev_x))
                .and_then(|s| roc_auc(&s, dev_y))
                .ok();
            GridCell { l1, l2, dev_auc }
        })
        .collect();

    let better = |a: &GridCell, b: &GridCell| -> bool {
        let (x, y) = (
            a.dev_auc.unwrap_or(f64::NEG_INFINITY),
            b.dev_auc.unwrap_or(f64::NEG_INFINITY),
        );
        x > y
            || (x == y
                && (a.l1 + a.l2 > b.l1 + b.l2 || (a.l1 + a.l2 == b.l1 + b.l2 && a.l1 > b.l1)))
    };
    let best = cells
        .iter()
        .fold(None::<&GridCell>, |acc, c| match acc {
            Some(b) if !better(c, b) => Some(b),
            _ => Some(c),
        })
        .expect("grid is non-empty");
    let dev_auc = best.dev_auc.ok_or_else(|| {
        train(
            train_x,
            train_y,
            &TrainConfig {
                l1: best.l1,
                l2: best.l2,
                ..*base
            },
        )
        .and_then(|m| m.decision_function(dev_x))
        .and_then(|s| roc_auc(&s, dev_y))
        .err()
        .unwrap_or(Error::invalid("no grid cell could be evaluated"))
    })?;
    Ok(GridResult {
        l1: best.l1,
        l2: best.l2,
        dev_auc,
        cells,
    })
}

/// One row of an evaluation table: a feature-group combination on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub combination: String,
    pub auc: f64,
    pub ap: f64,
    pub ap_gain_pct: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    #[serde(default)]
    pub l1: f64,
    #[serde(default)]
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub domain: String,
    pub rows: Vec<EvalRow>,
}

/// AUC, AP and AP gain (against `trials` shuffles) of `scores` on `labels`.
pub fn evaluate_scores<T: Real>(
    combination: &str,
    scores: &[T],
    labels: &[bool],
    trials: usize,
    seed: u64,
) -> Result<EvalRow> {
    let auc = roc_auc(scores, labels)?;
    let gain = ap_gain(scores, labels, trials, seed, Direction::Descending)?;
    let n_pos = labels.iter().filter(|&&b| b).count();
    Ok(EvalRow {
        combination: combination.to_string(),
        auc,
        ap: gain.feature_ap,
        ap_gain_pct: gain.gain_pct,
        n_pos,
        n_neg: labels.len() - n_pos,
        l1: 0.0,
        l2: 0.0,
    })
}
