use ndarray::{s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::sparse::LinearOperator;
use crate::error::{Error, Result};
use crate::Real;

/// How the power iterates are turned into a search subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeMethod {
    /// Keep only the last iterate (classic subspace iteration).
    Subspace,
    /// Keep every iterate (block Krylov); same matrix products, sharper values.
    #[default]
    BlockKrylov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SvdConfig {
    /// Extra random directions beyond the target rank.
    pub oversampling: usize,
    /// Power iterations.
    pub power_iters: usize,
    pub method: RangeMethod,
    pub seed: u64,
}

impl Default for SvdConfig {
    fn default() -> Self {
        SvdConfig {
            oversampling: 10,
            power_iters: 2,
            method: RangeMethod::default(),
            seed: 0,
        }
    }
}

/// `X ≈ U · diag(S) · Vᵀ` with `S` descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSvd<T> {
    pub u: Array2<T>,
    pub s: Array1<T>,
    pub v: Array2<T>,
}

impl<T: Real> TruncatedSvd<T> {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> Array2<T> {
        let us = &self.u * &self.s.view().insert_axis(Axis(0));
        us.dot(&self.v.t())
    }

    /// Row coordinates `U · diag(S)` (equivalently `X · V`), the reduced data the
    /// factorization runs on.
    pub fn reduced_rows(&self) -> Array2<T> {
        &self.u * &self.s.view().insert_axis(Axis(0))
    }

    /// Keeps the leading `r` components.
    pub fn truncate(&self, r: usize) -> Result<Self> {
        if r == 0 || r > self.rank() {
            return Err(Error::invalid(format!(
                "cannot truncate a rank-{} decomposition to {r}",
                self.rank()
            )));
        }
        Ok(TruncatedSvd {
            u: self.u.slice(s![.., ..r]).to_owned(),
            s: self.s.slice(s![..r]).to_owned(),
            v: self.v.slice(s![.., ..r]).to_owned(),
        })
    }
}

fn gaussian<T: Real>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<T> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = StandardNormal.sample(rng);
        T::lit(z)
    })
}

fn dot_cols<T: Real>(m: &Array2<T>, i: usize, j: usize) -> T {
    m.column(i).dot(&m.column(j))
}

/// Modified Gram-Schmidt with one reorthogonalisation pass. Columns that vanish
/// (rank deficiency) are replaced by fresh random directions, so the result always
/// has orthonormal columns. Requires `cols ≤ rows`.
pub(crate) fn orthonormalize<T: Real>(m: Array2<T>, rng: &mut ChaCha8Rng) -> Array2<T> {
    orthonormalize_from(m, 0, rng)
}

/// As [`orthonormalize`], assuming the first `start` columns are already orthonormal.
fn orthonormalize_from<T: Real>(mut m: Array2<T>, start: usize, rng: &mut ChaCha8Rng) -> Array2<T> {
    let (rows, cols) = m.dim();
    assert!(
        cols <= rows,
        "cannot orthonormalize {cols} columns in dimension {rows}"
    );
    let tiny = T::epsilon() * T::from_count(rows.max(1)) * T::lit(16.0);
    let mut j = start;
    let mut attempts = 0;
    while j < cols {
        let start = m.column(j).dot(&m.column(j)).sqrt();
        for _ in 0..2 {
            for i in 0..j {
                let proj = dot_cols(&m, i, j);
                let qi = m.column(i).to_owned();
                m.column_mut(j).scaled_add(-proj, &qi);
            }
        }
        let norm = m.column(j).dot(&m.column(j)).sqrt();
        if norm > tiny * start.max(T::one()) && norm.is_finite() && norm > T::zero() {
            m.column_mut(j).mapv_inplace(|x| x / norm);
            j += 1;
            attempts = 0;
        } else {
            attempts += 1;
            assert!(attempts < 64, "failed to complete an orthonormal basis");
            let fresh = gaussian::<T>(rows, 1, rng);
            m.column_mut(j).assign(&fresh.column(0));
        }
    }
    m
}

/// Thin SVD of a tall matrix (`rows ≥ cols`) by one-sided Jacobi rotations.
/// Returns `(U, S, V)` with `S` descending and `U`, `V` orthonormal.
pub(crate) fn jacobi_svd<T: Real>(a: &Array2<T>) -> (Array2<T>, Array1<T>, Array2<T>) {
    let (rows, cols) = a.dim();
    assert!(rows >= cols, "jacobi_svd expects a tall matrix");
    let mut w = a.clone();
    let mut v = Array2::<T>::eye(cols);
    let eps = T::epsilon();
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let alpha = dot_cols(&w, i, i);
                let beta = dot_cols(&w, j, j);
                let gamma = dot_cols(&w, i, j);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for m in [&mut w, &mut v] {
                    for r in 0..m.nrows() {
                        let (x, y) = (m[(r, i)], m[(r, j)]);
                        m[(r, i)] = c * x - s * y;
                        m[(r, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = (0..cols).map(|j| dot_cols(&w, j, j).sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| {
        norms[y]
            .partial_cmp(&norms[x])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let smax = norms.iter().copied().fold(T::zero(), T::max);
    let cutoff = smax * eps * T::from_count(rows.max(cols));

    let mut u = Array2::<T>::zeros((rows, cols));
    let mut s = Array1::<T>::zeros(cols);
    let mut vs = Array2::<T>::zeros((cols, cols));
    let mut filled = Vec::with_capacity(cols);
    for (dst, &src) in order.iter().enumerate() {
        s[dst] = norms[src];
        vs.column_mut(dst).assign(&v.column(src));
        if norms[src] > cutoff && norms[src] > T::zero() {
            let n = norms[src];
            u.column_mut(dst).assign(&w.column(src).mapv(|x| x / n));
            filled.push(dst);
        }
    }
    complete_basis(&mut u, &filled);
    (u, s, vs)
}

/// Fills the columns of `u` not listed in `filled` so that all columns are orthonormal.
fn complete_basis<T: Real>(u: &mut Array2<T>, filled: &[usize]) {
    let (rows, cols) = u.dim();
    let mut done: Vec<usize> = filled.to_vec();
    let mut candidate = 0;
    for j in 0..cols {
        if filled.contains(&j) {
            continue;
        }
        loop {
            assert!(candidate < rows, "basis completion ran out of candidates");
            let mut e = Array1::<T>::zeros(rows);
            e[candidate] = T::one();
            candidate += 1;
            for _ in 0..2 {
                for &k in &done {
                    let p = u.column(k).dot(&e);
                    e.scaled_add(-p, &u.column(k));
                }
            }
            let n = e.dot(&e).sqrt();
            if n > T::lit(0.5) {
                u.column_mut(j).assign(&e.mapv(|x| x / n));
                done.push(j);
                break;
            }
        }
    }
}

/// Randomized truncated SVD of rank `rank`.
pub fn truncated_svd<T, X>(x: &X, rank: usize, cfg: &SvdConfig) -> Result<TruncatedSvd<T>>
where
    T: Real,
    X: LinearOperator<T> + ?Sized,
{
    let (m, n) = x.shape();
    let full = m.min(n);
    if rank == 0 || rank > full {
        return Err(Error::invalid(format!(
            "rank {rank} outside [1, {full}] for a {m}x{n} matrix"
        )));
    }
    let l = (rank + cfg.oversampling).min(full);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let omega = gaussian::<T>(n, l, &mut rng);
    let mut q = orthonormalize(x.apply(omega.view()), &mut rng);
    match cfg.method {
        RangeMethod::Subspace => {
            for _ in 0..cfg.power_iters {
                let z = orthonormalize(x.apply_t(q.view()), &mut rng);
                q = orthonormalize(x.apply(z.view()), &mut rng);
            }
        }
        RangeMethod::BlockKrylov => {
            // Basis of [Y, (XXᵀ)Y, (XXᵀ)²Y, ...], capped at the matrix rank bound.
            let mut block = q.clone();
            for _ in 0..cfg.power_iters {
                if q.ncols() >= full {
                    break;
                }
                let z = orthonormalize(x.apply_t(block.view()), &mut rng);
                let next = x.apply(z.view());
                let take = next.ncols().min(full - q.ncols());
                let start = q.ncols();
                let joined = ndarray::concatenate(Axis(1), &[q.view(), next.slice(s![.., ..take])])
                    .expect("blocks share a row count");
                q = orthonormalize_from(joined, start, &mut rng);
                block = q.slice(s![.., start..]).to_owned();
            }
        }
    }
    // Bᵀ = Xᵀ Q is n×l; its SVD W Σ Jᵀ gives X ≈ (Q J) Σ Wᵀ.
    let bt = x.apply_t(q.view());
    if bt.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix passed to truncated_svd"));
    }
    let (w, sigma, j) = jacobi_svd(&bt);
    let u = q.dot(&j);
    Ok(TruncatedSvd {
        u: u.slice(s![.., ..rank]).to_owned(),
        s: sigma.slice(s![..rank]).to_owned(),
        v: w.slice(s![.., ..rank]).to_owned(),
    })
}
