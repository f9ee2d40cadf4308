use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Vocabulary;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnseConfig {
    /// Number of latent factors.
    pub k: usize,
    /// L1 budget per membership row.
    pub lambda1: f64,
    /// Stop once the relative objective decrease of a full iteration drops below this.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Projected-gradient steps per dictionary update.
    pub dict_steps: usize,
}

impl Default for NnseConfig {
    fn default() -> Self {
        NnseConfig {
            k: 1000,
            lambda1: 1.0,
            tol: 1e-4,
            max_iters: 100,
            seed: 0,
            dict_steps: 25,
        }
    }
}

/// Solution of one membership row and the multiplier of its L1 budget.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSolution<T> {
    pub a: Vec<T>,
    pub multiplier: T,
}

/// Coordinate descent on `½aᵀGa − cᵀa + μ·Σa` over `a ≥ 0`, keeping `grad = Ga − c`.
fn coordinate_descent<T: Real>(
    gram: ArrayView2<'_, T>,
    c: ArrayView1<'_, T>,
    mu: T,
    a: &mut [T],
    grad: &mut [T],
) {
    let k = a.len();
    let scale = c.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let stop = scale * T::epsilon() * T::lit(64.0);
    for sweep in 0..20_000 {
        for j in 0..k {
            let gjj = gram[(j, j)];
            if gjj <= T::zero() {
                continue;
            }
            let new = (a[j] - (grad[j] + mu) / gjj).max(T::zero());
            let delta = new - a[j];
            if delta != T::zero() {
                a[j] = new;
                for (g, &h) in grad.iter_mut().zip(gram.column(j)) {
                    *g += h * delta;
                }
            }
        }
        if sweep % 16 == 15 {
            refresh_gradient(gram, c, a, grad);
        }
        let worst = (0..k)
            .filter(|&j| gram[(j, j)] > T::zero())
            .map(|j| {
                let g = grad[j] + mu;
                if a[j] > T::zero() {
                    g.abs()
                } else {
                    (-g).max(T::zero())
                }
            })
            .fold(T::zero(), T::max);
        if worst <= stop {
            break;
        }
    }
    refresh_gradient(gram, c, a, grad);
}

fn refresh_gradient<T: Real>(
    gram: ArrayView2<'_, T>,
    c: ArrayView1<'_, T>,
    a: &[T],
    grad: &mut [T],
) {
    for (j, g) in grad.iter_mut().enumerate() {
        *g = gram.row(j).iter().zip(a).map(|(&h, &x)| h * x).sum::<T>() - c[j];
    }
}

/// Minimises `½‖x − Dᵀa‖²` over `a ≥ 0, Σa ≤ lambda1`, given `gram = DDᵀ` and `c = Dx`.
///
/// The budget is met by searching the multiplier `μ` of the Lagrangian form; the
/// returned multiplier satisfies the optimality conditions together with `a`.
pub fn solve_row<T: Real>(
    gram: ArrayView2<'_, T>,
    c: ArrayView1<'_, T>,
    lambda1: T,
    warm: Option<&[T]>,
) -> RowSolution<T> {
    let k = c.len();
    let mut a: Vec<T> = warm.map_or_else(|| vec![T::zero(); k], <[T]>::to_vec);
    a.iter_mut().for_each(|v| *v = v.max(T::zero()));
    let mut grad = vec![T::zero(); k];
    refresh_gradient(gram, c, &a, &mut grad);

    coordinate_descent(gram, c, T::zero(), &mut a, &mut grad);
    let total = |a: &[T]| a.iter().copied().sum::<T>();
    if total(&a) <= lambda1 {
        return RowSolution {
            a,
            multiplier: T::zero(),
        };
    }

    let sum_tol = lambda1 * T::epsilon() * T::lit(256.0);
    let (mut lo, mut f_lo) = (T::zero(), total(&a) - lambda1);
    let mut hi = c.iter().copied().fold(T::zero(), T::max);
    let mut f_hi = -lambda1;
    let mut best = (vec![T::zero(); k], hi);
    let mut side = 0i8;
    for it in 0..200 {
        // Illinois false position, with plain bisection every few steps for safety.
        let mut mu = if it % 4 == 3 {
            (lo + hi) / T::lit(2.0)
        } else {
            (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        };
        if !(mu > lo && mu < hi) {
            mu = (lo + hi) / T::lit(2.0);
        }
        coordinate_descent(gram, c, mu, &mut a, &mut grad);
        let f = total(&a) - lambda1;
        if f.abs() <= sum_tol {
            return RowSolution { a, multiplier: mu };
        }
        if f > T::zero() {
            lo = mu;
            f_lo = f;
            if side == 1 {
                f_hi /= T::lit(2.0);
            }
            side = 1;
        } else {
            hi = mu;
            f_hi = f;
            best = (a.clone(), mu);
            if side == -1 {
                f_lo /= T::lit(2.0);
            }
            side = -1;
        }
        if hi - lo <= hi * T::epsilon() * T::lit(4.0) {
            break;
        }
    }
    RowSolution {
        a: best.0,
        multiplier: best.1,
    }
}

/// `½ Σ_i ‖X_i − A_i D‖²`.
pub fn objective<T: Real>(
    xr: ArrayView2<'_, T>,
    a: ArrayView2<'_, T>,
    d: ArrayView2<'_, T>,
) -> Result<T> {
    if a.nrows() != xr.nrows() || a.ncols() != d.nrows() || d.ncols() != xr.ncols() {
        return Err(Error::Shape(format!(
            "X is {:?}, A is {:?}, D is {:?}",
            xr.dim(),
            a.dim(),
            d.dim()
        )));
    }
    let resid = &xr - &a.dot(&d);
    Ok(resid.iter().map(|&v| v * v).sum::<T>() / T::lit(2.0))
}

/// Fitted factorization `X ≈ A·D` plus what is needed to embed new questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnseModel<T> {
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub lambda1: T,
    /// Non-zero memberships as `(row, factor, weight)`, row-major.
    pub memberships: Vec<(usize, usize, T)>,
    /// `k × r`, one factor per row.
    pub dictionary: Array2<T>,
    #[serde(default)]
    pub row_ids: Vec<String>,
    #[serde(default)]
    pub vocab: Option<Vocabulary>,
    /// Right singular vectors (`terms × r`) mapping term counts into the reduced space.
    #[serde(default)]
    pub basis: Option<Array2<T>>,
    #[serde(default)]
    pub singular_values: Option<Array1<T>>,
}

impl<T: Real> NnseModel<T> {
    pub fn memberships_dense(&self) -> Array2<T> {
        let mut a = Array2::zeros((self.n, self.k));
        for &(i, j, w) in &self.memberships {
            a[(i, j)] = w;
        }
        a
    }

    /// `(row, weight)` for factor `j`, weight descending, ties by row.
    pub fn factor_members(&self, j: usize) -> Result<Vec<(usize, T)>> {
        if j >= self.k {
            return Err(Error::invalid(format!(
                "factor {j} out of range (k = {})",
                self.k
            )));
        }
        let mut out: Vec<(usize, T)> = self
            .memberships
            .iter()
            .filter(|&&(_, f, _)| f == j)
            .map(|&(i, _, w)| (i, w))
            .collect();
        out.sort_by(|x, y| {
            y.1.partial_cmp(&x.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(x.0.cmp(&y.0))
        });
        Ok(out)
    }

    /// Projects sparse term counts `(column, count)` onto the stored SVD basis.
    pub fn embed_counts(&self, counts: &[(usize, T)]) -> Result<Array1<T>> {
        let basis = self
            .basis
            .as_ref()
            .ok_or_else(|| Error::invalid("model has no SVD basis"))?;
        let mut out = Array1::zeros(basis.ncols());
        for &(c, v) in counts {
            if c >= basis.nrows() {
                return Err(Error::Shape(format!("term column {c} outside the basis")));
            }
            out.scaled_add(v, &basis.row(c));
        }
        Ok(out)
    }

    /// Memberships of a new reduced row against the fitted dictionary.
    pub fn infer(&self, xr_row: ArrayView1<'_, T>) -> Result<Vec<T>> {
        if xr_row.len() != self.r {
            return Err(Error::Shape(format!(
                "row has {} columns, model rank is {}",
                xr_row.len(),
                self.r
            )));
        }
        let d = &self.dictionary;
        let gram = d.dot(&d.t());
        let c = d.dot(&xr_row);
        Ok(solve_row(gram.view(), c.view(), self.lambda1, None).a)
    }

    /// Checks the non-negativity, budget and dictionary-norm invariants.
    pub fn check(&self, tol: T) -> Result<()> {
        let mut sums = vec![T::zero(); self.n];
        for &(i, j, w) in &self.memberships {
            if i >= self.n || j >= self.k || w.is_nan() || w < T::zero() {
                return Err(Error::invalid(format!("bad membership ({i}, {j}, {w})")));
            }
            sums[i] += w;
        }
        if let Some(i) = sums.iter().position(|&s| s > self.lambda1 + tol) {
            return Err(Error::invalid(format!("row {i} exceeds the L1 budget")));
        }
        for (i, row) in self.dictionary.axis_iter(Axis(0)).enumerate() {
            if row.dot(&row) > T::one() + tol {
                return Err(Error::invalid(format!(
                    "dictionary row {i} has norm above 1"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnseFit<T> {
    pub model: NnseModel<T>,
    /// Objective at the start and after every half-step (membership, then dictionary).
    pub history: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

fn unit_rows<T: Real>(xr: ArrayView2<'_, T>, k: usize, rng: &mut ChaCha8Rng) -> Array2<T> {
    let (n, r) = xr.dim();
    let rows = sample(rng, n, k).into_vec();
    let mut d = Array2::zeros((k, r));
    for (dst, &src) in rows.iter().enumerate() {
        let mut v = xr.row(src).to_owned();
        let mut norm = v.dot(&v).sqrt();
        if norm <= T::epsilon() {
            v = Array1::from_shape_simple_fn(r, || {
                let z: f64 = StandardNormal.sample(rng);
                T::lit(z)
            });
            norm = v.dot(&v).sqrt();
        }
        d.row_mut(dst).assign(&v.mapv(|x| x / norm));
    }
    d
}

fn membership_step<T: Real>(xr: ArrayView2<'_, T>, a: &mut Array2<T>, d: &Array2<T>, lambda1: T) {
    let gram = d.dot(&d.t());
    let c = xr.dot(&d.t());
    let quad = |row: &[T], ci: ArrayView1<'_, T>| -> T {
        let mut q = T::zero();
        for (j, &x) in row.iter().enumerate() {
            if x != T::zero() {
                let gx: T = gram.row(j).iter().zip(row).map(|(&h, &y)| h * y).sum();
                q += x * (gx / T::lit(2.0) - ci[j]);
            }
        }
        q
    };
    let rows: Vec<Vec<T>> = (0..a.nrows())
        .into_par_iter()
        .map(|i| {
            let old = a.row(i).to_vec();
            let sol = solve_row(gram.view(), c.row(i), lambda1, Some(&old));
            if quad(&sol.a, c.row(i)) <= quad(&old, c.row(i)) {
                sol.a
            } else {
                old
            }
        })
        .collect();
    for (i, row) in rows.into_iter().enumerate() {
        a.row_mut(i).assign(&Array1::from_vec(row));
    }
}

fn largest_eigenvalue<T: Real>(h: &Array2<T>) -> T {
    let k = h.nrows();
    let mut v = Array1::from_elem(k, T::one() / T::from_count(k).sqrt());
    let mut est = T::zero();
    for _ in 0..50 {
        let w = h.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm <= T::zero() {
            return T::zero();
        }
        est = norm;
        v = w.mapv(|x| x / norm);
    }
    est
}

fn project_rows<T: Real>(d: &mut Array2<T>) {
    for mut row in d.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm > T::one() {
            row.mapv_inplace(|x| x / norm);
        }
    }
}

/// Projected gradient on `½‖X − AD‖²` with rows of `D` kept in the unit ball.
fn dictionary_step<T: Real>(xr: ArrayView2<'_, T>, a: &Array2<T>, d: &mut Array2<T>, steps: usize) {
    let h = a.t().dot(a);
    let p = a.t().dot(&xr);
    // Objective up to the constant ½‖X‖².
    let f = |d: &Array2<T>| -> T { ((&h.dot(d) * d).sum()) / T::lit(2.0) - (&p * d).sum() };
    let mut lip = largest_eigenvalue(&h) * T::lit(1.01);
    if lip <= T::zero() {
        return;
    }
    let mut current = f(d);
    for _ in 0..steps {
        let grad = h.dot(&*d) - &p;
        let mut accepted = false;
        for _ in 0..30 {
            let mut next = &*d - &grad.mapv(|g| g / lip);
            project_rows(&mut next);
            let step = &next - &*d;
            let model = current + (&grad * &step).sum() + lip / T::lit(2.0) * (&step * &step).sum();
            let value = f(&next);
            if value <= model + current.abs() * T::epsilon() * T::lit(8.0) && value <= current {
                let done = current - value <= current.abs().max(T::one()) * T::lit(1e-12);
                *d = next;
                current = value;
                accepted = true;
                if done {
                    return;
                }
                break;
            }
            lip *= T::lit(2.0);
        }
        if !accepted {
            return;
        }
    }
}

/// Alternating minimisation of `½ Σ ‖X_i − A_i D‖²` subject to `A ≥ 0`,
/// `Σ_j A_ij ≤ lambda1` and `‖D_j‖ ≤ 1`.
pub fn nnse_fit<T: Real>(xr: ArrayView2<'_, T>, cfg: &NnseConfig) -> Result<NnseFit<T>> {
    let (n, r) = xr.dim();
    if n == 0 || r == 0 {
        return Err(Error::Empty("reduced matrix"));
    }
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::invalid(format!(
            "k = {} must lie in [1, n = {n}]",
            cfg.k
        )));
    }
    if !(cfg.lambda1 > 0.0 && cfg.lambda1.is_finite()) {
        return Err(Error::invalid("lambda1 must be positive and finite"));
    }
    if xr.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("reduced matrix"));
    }
    let lambda1 = T::lit(cfg.lambda1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut d = unit_rows(xr, cfg.k, &mut rng);
    let mut a = Array2::<T>::zeros((n, cfg.k));

    let mut prev = objective(xr, a.view(), d.view())?;
    let mut history = vec![prev];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        iterations += 1;
        membership_step(xr, &mut a, &d, lambda1);
        history.push(objective(xr, a.view(), d.view())?);

        let saved = d.clone();
        dictionary_step(xr, &a, &mut d, cfg.dict_steps.max(1));
        let mut obj = objective(xr, a.view(), d.view())?;
        if obj > history[history.len() - 1] {
            d = saved;
            obj = history[history.len() - 1];
        }
        history.push(obj);

        if prev - obj <= T::lit(cfg.tol) * prev.abs() {
            converged = true;
            break;
        }
        prev = obj;
    }
    log::debug!(
        "nnse: {iterations} iterations, objective {}",
        history[history.len() - 1]
    );

    let memberships = a
        .indexed_iter()
        .filter(|(_, &w)| w > T::zero())
        .map(|((i, j), &w)| (i, j, w))
        .collect();
    Ok(NnseFit {
        model: NnseModel {
            n,
            k: cfg.k,
            r,
            lambda1,
            memberships,
            dictionary: d,
            row_ids: Vec::new(),
            vocab: None,
            basis: None,
            singular_values: None,
        },
        history,
        iterations,
        converged,
    })
}
