use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use ndarray::{Array2, ArrayView2};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Vocabulary;
use crate::Real;

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SparseMatrix<T> {
    /// Builds from `(row, col, value)` triplets; repeated coordinates are summed
    /// and explicit zeros dropped.
    pub fn from_triplets<I>(n_rows: usize, n_cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut cells: BTreeMap<(usize, usize), T> = BTreeMap::new();
        for (r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::Shape(format!(
                    "entry ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse matrix entry"));
            }
            *cells.entry((r, c)).or_insert_with(T::zero) += v;
        }
        let mut indptr = vec![0; n_rows + 1];
        let mut indices = Vec::with_capacity(cells.len());
        let mut values = Vec::with_capacity(cells.len());
        for ((r, c), v) in cells {
            if v != T::zero() {
                indptr[r + 1] += 1;
                indices.push(c);
                values.push(v);
            }
        }
        for i in 0..n_rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_dense(m: ArrayView2<'_, T>) -> Result<Self> {
        let (n, p) = m.dim();
        Self::from_triplets(
            n,
            p,
            m.indexed_iter()
                .filter(|(_, v)| **v != T::zero())
                .map(|((i, j), &v)| (i, j, v)),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    /// Stored (non-zero) entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(col, value)` pairs of row `r` in column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.row(r)
            .find(|&(j, _)| j == c)
            .map_or_else(T::zero, |(_, v)| v)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for (r, c, v) in self.triplets() {
            out[(r, c)] = v;
        }
        out
    }

    pub fn frobenius_sq(&self) -> T {
        self.values.iter().map(|&v| v * v).sum()
    }
}

/// Products a matrix-free SVD needs.
pub trait LinearOperator<T: Real>: Sync {
    fn shape(&self) -> (usize, usize);
    /// `self · b`
    fn apply(&self, b: ArrayView2<'_, T>) -> Array2<T>;
    /// `selfᵀ · b`
    fn apply_t(&self, b: ArrayView2<'_, T>) -> Array2<T>;
}

impl<T: Real> LinearOperator<T> for SparseMatrix<T> {
    fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    fn apply(&self, b: ArrayView2<'_, T>) -> Array2<T> {
        assert_eq!(b.nrows(), self.n_cols, "inner dimensions differ");
        let mut out = Array2::zeros((self.n_rows, b.ncols()));
        for r in 0..self.n_rows {
            let mut dst = out.row_mut(r);
            for (c, v) in self.row(r) {
                dst.scaled_add(v, &b.row(c));
            }
        }
        out
    }

    fn apply_t(&self, b: ArrayView2<'_, T>) -> Array2<T> {
        assert_eq!(b.nrows(), self.n_rows, "inner dimensions differ");
        let mut out = Array2::zeros((self.n_cols, b.ncols()));
        for r in 0..self.n_rows {
            let src = b.row(r);
            for (c, v) in self.row(r) {
                out.row_mut(c).scaled_add(v, &src);
            }
        }
        out
    }
}

impl<T: Real> LinearOperator<T> for Array2<T> {
    fn shape(&self) -> (usize, usize) {
        self.dim()
    }

    fn apply(&self, b: ArrayView2<'_, T>) -> Array2<T> {
        self.dot(&b)
    }

    fn apply_t(&self, b: ArrayView2<'_, T>) -> Array2<T> {
        self.t().dot(&b)
    }
}

/// Column prefix that keeps synset columns apart from surface words.
pub const SYNSET_PREFIX: &str = "syn:";

/// Word → synset identifiers (directional; a synset is not a word).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynsetLexicon {
    map: BTreeMap<String, Vec<String>>,
}

impl SynsetLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, word: &str, synset: &str) {
        let (w, s) = (word.trim().to_lowercase(), synset.trim().to_lowercase());
        if w.is_empty() || s.is_empty() {
            return;
        }
        let entry = self.map.entry(w).or_default();
        if !entry.contains(&s) {
            entry.push(s);
        }
    }

    /// Parses `word<TAB>synset1,synset2,...` lines.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lex = SynsetLexicon::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, sets) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: "expected `word<TAB>synset1,synset2,...`".into(),
            })?;
            for s in sets.split(',') {
                lex.add(word, s);
            }
        }
        Ok(lex)
    }

    pub fn synsets(&self, w: &str) -> &[String] {
        self.map.get(w).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Column name of a synset.
pub fn synset_column(synset: &str) -> String {
    format!("{SYNSET_PREFIX}{synset}")
}

/// Vocabulary over document tokens plus the synset columns they reach.
pub fn cooccurrence_vocabulary(
    docs: &[Vec<String>],
    synsets: Option<&SynsetLexicon>,
) -> Vocabulary {
    let mut terms = BTreeSet::new();
    for tok in docs.iter().flatten() {
        terms.insert(tok.clone());
        if let Some(lex) = synsets {
            terms.extend(lex.synsets(tok).iter().map(|s| synset_column(s)));
        }
    }
    Vocabulary::from_terms(terms)
}

/// Stored-entry counts before and after synset extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionStats {
    pub entries_before: u64,
    pub entries_after: u64,
}

impl ExtensionStats {
    /// Exact `after / before`.
    pub fn inflation(&self) -> Option<Ratio<u64>> {
        (self.entries_before > 0).then(|| Ratio::new(self.entries_after, self.entries_before))
    }

    pub fn inflation_f64(&self) -> Option<f64> {
        (self.entries_before > 0).then(|| self.entries_after as f64 / self.entries_before as f64)
    }
}

/// Question × term counts. Each in-vocabulary token adds one to its own column and
/// one to each of its synset columns.
pub fn build_cooccurrence<T: Real>(
    docs: &[Vec<String>],
    vocab: &Vocabulary,
    synsets: Option<&SynsetLexicon>,
) -> Result<(SparseMatrix<T>, ExtensionStats)> {
    if docs.is_empty() {
        return Err(Error::Empty("co-occurrence corpus"));
    }
    let mut plain = Vec::new();
    let mut extended = Vec::new();
    for (i, doc) in docs.iter().enumerate() {
        for tok in doc {
            let Some(c) = vocab.get(tok) else { continue };
            plain.push((i, c, T::one()));
            extended.push((i, c, T::one()));
            if let Some(lex) = synsets {
                for s in lex.synsets(tok) {
                    if let Some(sc) = vocab.get(&synset_column(s)) {
                        extended.push((i, sc, T::one()));
                    }
                }
            }
        }
    }
    let before = SparseMatrix::from_triplets(docs.len(), vocab.len(), plain)?.nnz();
    let matrix = SparseMatrix::from_triplets(docs.len(), vocab.len(), extended)?;
    let stats = ExtensionStats {
        entries_before: before as u64,
        entries_after: matrix.nnz() as u64,
    };
    Ok((matrix, stats))
}
