use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub l1: f64,
    pub l2: f64,
    /// Relative objective decrease below which training stops.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l1: 0.0,
            l2: 0.0,
            tol: 1e-10,
            max_iters: 20_000,
        }
    }
}

/// Logistic regression on standardized features. Weights live in the standardized
/// space; dropped (constant) features keep weight zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub l1: f64,
    pub l2: f64,
    pub means: Vec<T>,
    pub stds: Vec<T>,
    /// Columns that were constant on the training data.
    pub dropped: Vec<usize>,
    #[serde(default)]
    pub feature_names: Vec<String>,
    pub iterations: usize,
    pub converged: bool,
}

fn softplus<T: Real>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn check_inputs<T: Real>(x: ArrayView2<'_, T>, y: &[bool]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "{} rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature matrix"));
    }
    if !y.iter().any(|&b| b) || y.iter().all(|&b| b) {
        return Err(Error::SingleClass("training labels"));
    }
    Ok(())
}

/// Column means and population standard deviations; near-constant columns get
/// `std = 1` and are reported as dropped.
pub fn standardization<T: Real>(x: ArrayView2<'_, T>) -> (Vec<T>, Vec<T>, Vec<usize>) {
    let n = T::from_count(x.nrows().max(1));
    let mut means = Vec::with_capacity(x.ncols());
    let mut stds = Vec::with_capacity(x.ncols());
    let mut dropped = Vec::new();
    for (j, col) in x.axis_iter(Axis(1)).enumerate() {
        let mean = col.sum() / n;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let sd = var.sqrt();
        means.push(mean);
        if sd <= T::lit(1e-12) * (T::one() + mean.abs()) {
            stds.push(T::one());
            dropped.push(j);
        } else {
            stds.push(sd);
        }
    }
    (means, stds, dropped)
}

struct Problem<'a, T> {
    xs: ndarray::Array2<T>,
    y: &'a [bool],
    l1: T,
    l2: T,
    active: Vec<bool>,
}

impl<T: Real> Problem<'_, T> {
    fn margins(&self, w: &Array1<T>, b: T) -> Array1<T> {
        self.xs.dot(w) + b
    }

    /// Smooth part: mean log-loss plus the ridge term.
    fn smooth(&self, w: &Array1<T>, b: T) -> T {
        let z = self.margins(w, b);
        let n = T::from_count(self.y.len());
        let loss = z
            .iter()
            .zip(self.y)
            .map(|(&zi, &yi)| if yi { softplus(-zi) } else { softplus(zi) })
            .sum::<T>()
            / n;
        loss + self.l2 * w.dot(w) / T::lit(2.0)
    }

    fn full(&self, w: &Array1<T>, b: T) -> T {
        self.smooth(w, b) + self.l1 * w.iter().map(|v| v.abs()).sum::<T>()
    }

    fn gradient(&self, w: &Array1<T>, b: T) -> (Array1<T>, T) {
        let z = self.margins(w, b);
        let n = T::from_count(self.y.len());
        let r: Array1<T> = z
            .iter()
            .zip(self.y)
            .map(|(&zi, &yi)| (sigmoid(zi) - if yi { T::one() } else { T::zero() }) / n)
            .collect();
        let mut gw = self.xs.t().dot(&r) + &w.mapv(|v| v * self.l2);
        for (g, &on) in gw.iter_mut().zip(&self.active) {
            if !on {
                *g = T::zero();
            }
        }
        (gw, r.sum())
    }

    fn prox(&self, v: T, step: T) -> T {
        let t = self.l1 * step;
        v.signum() * (v.abs() - t).max(T::zero())
    }
}

/// Elastic-net logistic regression by proximal gradient with backtracking.
///
/// Minimises `mean log-loss + l2·‖w‖²/2 + l1·‖w‖₁` over standardized features;
/// the bias is not penalised. Each accepted step does not increase the objective.
pub fn train<T: Real>(
    x: ArrayView2<'_, T>,
    y: &[bool],
    cfg: &TrainConfig,
) -> Result<ElasticNetModel<T>> {
    train_traced(x, y, cfg).map(|(m, _)| m)
}

/// Like [`train`], also returning the objective after every accepted step.
pub fn train_traced<T: Real>(
    x: ArrayView2<'_, T>,
    y: &[bool],
    cfg: &TrainConfig,
) -> Result<(ElasticNetModel<T>, Vec<T>)> {
    check_inputs(x, y)?;
    if !(cfg.l1 >= 0.0 && cfg.l2 >= 0.0 && cfg.l1.is_finite() && cfg.l2.is_finite()) {
        return Err(Error::invalid("l1 and l2 must be finite and non-negative"));
    }
    let (means, stds, dropped) = standardization(x);
    let mut xs = x.to_owned();
    for (j, mut col) in xs.axis_iter_mut(Axis(1)).enumerate() {
        if dropped.contains(&j) {
            col.fill(T::zero());
        } else {
            col.mapv_inplace(|v| (v - means[j]) / stds[j]);
        }
    }
    let p = x.ncols();
    let prob = Problem {
        xs,
        y,
        l1: T::lit(cfg.l1),
        l2: T::lit(cfg.l2),
        active: (0..p).map(|j| !dropped.contains(&j)).collect(),
    };

    let mut w = Array1::<T>::zeros(p);
    let pos = y.iter().filter(|&&b| b).count();
    let mut b = (T::from_count(pos) / T::from_count(y.len() - pos)).ln();
    let mut current = prob.full(&w, b);
    let mut trace = vec![current];
    let mut lip = T::lit(0.25);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        iterations += 1;
        let (gw, gb) = prob.gradient(&w, b);
        let smooth_now = prob.smooth(&w, b);
        let mut accepted = None;
        for _ in 0..60 {
            let step = T::one() / lip;
            let nw: Array1<T> = w
                .iter()
                .zip(gw.iter())
                .zip(&prob.active)
                .map(|((&wi, &gi), &on)| {
                    if on {
                        prob.prox(wi - step * gi, step)
                    } else {
                        T::zero()
                    }
                })
                .collect();
            let nb = b - step * gb;
            let dw = &nw - &w;
            let db = nb - b;
            let bound =
                smooth_now + gw.dot(&dw) + gb * db + lip / T::lit(2.0) * (dw.dot(&dw) + db * db);
            let smooth_next = prob.smooth(&nw, nb);
            if smooth_next <= bound + T::epsilon() * smooth_now.abs() {
                let value = smooth_next + prob.l1 * nw.iter().map(|v| v.abs()).sum::<T>();
                if value <= current {
                    accepted = Some((nw, nb, value));
                    break;
                }
            }
            lip *= T::lit(2.0);
        }
        let Some((nw, nb, value)) = accepted else {
            converged = true;
            break;
        };
        let decrease = current - value;
        w = nw;
        b = nb;
        current = value;
        trace.push(value);
        lip = (lip * T::lit(0.9)).max(T::lit(1e-8));
        if decrease <= T::lit(cfg.tol) * current.abs().max(T::epsilon()) {
            converged = true;
            break;
        }
    }

    Ok((
        ElasticNetModel {
            weights: w.to_vec(),
            bias: b,
            l1: cfg.l1,
            l2: cfg.l2,
            means,
            stds,
            dropped,
            feature_names: Vec::new(),
            iterations,
            converged,
        },
        trace,
    ))
}

impl<T: Real> ElasticNetModel<T> {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn standardize_row(&self, row: ArrayView1<'_, T>) -> impl Iterator<Item = T> + '_ {
        let row = row.to_owned();
        (0..self.weights.len()).map(move |j| {
            if self.dropped.contains(&j) {
                T::zero()
            } else {
                (row[j] - self.means[j]) / self.stds[j]
            }
        })
    }

    /// Linear scores `w·standardize(x) + b`.
    pub fn decision_function(&self, x: ArrayView2<'_, T>) -> Result<Vec<T>> {
        if x.ncols() != self.weights.len() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.weights.len(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(x.axis_iter(Axis(0))
            .map(|row| {
                self.standardize_row(row)
                    .zip(&self.weights)
                    .map(|(v, &w)| v * w)
                    .sum::<T>()
                    + self.bias
            })
            .collect())
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, T>) -> Result<Vec<T>> {
        Ok(self
            .decision_function(x)?
            .into_iter()
            .map(sigmoid)
            .collect())
    }

    /// Objective of this model on `(x, y)` using its own standardization.
    pub fn objective(&self, x: ArrayView2<'_, T>, y: &[bool]) -> Result<T> {
        let z = self.decision_function(x)?;
        if z.len() != y.len() {
            return Err(Error::Shape("labels and rows differ".into()));
        }
        let n = T::from_count(y.len().max(1));
        let loss = z
            .iter()
            .zip(y)
            .map(|(&zi, &yi)| if yi { softplus(-zi) } else { softplus(zi) })
            .sum::<T>()
            / n;
        let w2: T = self.weights.iter().map(|&w| w * w).sum();
        let w1: T = self.weights.iter().map(|w| w.abs()).sum();
        Ok(loss + T::lit(self.l2) * w2 / T::lit(2.0) + T::lit(self.l1) * w1)
    }
}
