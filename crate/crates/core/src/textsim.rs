//! Tokenisation, word resources and soft-matched Jaccard similarity.
//!
//! Two words match when they are equal, listed as synonyms, or one is among the
//! other's `K` nearest embedding neighbours (cosine). Set similarity is
//! `m / (|A| + |B| - m)` where `m` is the size of a maximum bipartite matching
//! between the two token sets; with plain equality this is ordinary Jaccard.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::io::BufRead;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::Real;

pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");
pub const DEFAULT_NEIGHBOURS: usize = 5;

/// Reads a one-word-per-line list, lowercased, skipping blanks and `#` comments.
pub fn read_word_list<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let w = line.trim();
        if w.is_empty() || w.starts_with('#') {
            continue;
        }
        out.push(w.to_lowercase());
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    stopwords: HashSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        let words = read_word_list(DEFAULT_STOPWORDS.as_bytes()).expect("bundled stop list");
        Tokenizer::with_stopwords(words)
    }
}

impl Tokenizer {
    pub fn with_stopwords<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Tokenizer {
            stopwords: words.into_iter().map(|w| w.into().to_lowercase()).collect(),
        }
    }

    pub fn is_stopword(&self, w: &str) -> bool {
        self.stopwords.contains(w)
    }

    /// Every lowercased token in order, stop-words included.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        tokens(text)
    }

    /// Tokens in order with stop-words removed.
    pub fn content_tokens(&self, text: &str) -> Vec<String> {
        tokens(text)
            .into_iter()
            .filter(|t| !self.stopwords.contains(t))
            .collect()
    }

    pub fn token_set(&self, text: &str) -> TokenSet {
        TokenSet(self.content_tokens(text).into_iter().collect())
    }
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSet(BTreeSet<String>);

impl TokenSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, w: &str) -> bool {
        self.0.contains(w)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSet(
            iter.into_iter()
                .map(Into::into)
                .filter(|s: &String| !s.is_empty())
                .collect(),
        )
    }
}

/// Word vectors of a fixed dimension, with cached norms.
#[derive(Debug, Clone)]
pub struct EmbeddingTable<T> {
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<T>,
    norms: Vec<T>,
    dim: usize,
}

impl<T: Real> EmbeddingTable<T> {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(EmbeddingTable {
            words: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            norms: Vec::new(),
            dim,
        })
    }

    /// Adds or replaces the vector for `word`.
    pub fn insert(&mut self, word: &str, vector: &[T]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Shape(format!(
                "vector for `{word}` has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding vector"));
        }
        let norm = vector.iter().map(|&v| v * v).sum::<T>().sqrt();
        match self.index.get(word) {
            Some(&i) => {
                self.vectors[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector);
                self.norms[i] = norm;
            }
            None => {
                self.index.insert(word.to_string(), self.words.len());
                self.words.push(word.to_string());
                self.vectors.extend_from_slice(vector);
                self.norms.push(norm);
            }
        }
        Ok(())
    }

    /// Parses `word v1 v2 ... vd` lines; the first line fixes the dimension.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut table: Option<Self> = None;
        let mut buf = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            buf.clear();
            for p in parts {
                let v: f64 = p.parse().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("bad embedding component `{p}`"),
                })?;
                buf.push(T::lit(v));
            }
            if table.is_none() {
                table = Some(EmbeddingTable::new(buf.len()).map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: "embedding line without components".into(),
                })?);
            }
            let t = table.as_mut().expect("initialised above");
            t.insert(&word.to_lowercase(), &buf)
                .map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
        }
        match table {
            Some(t) => Ok(t),
            None => Err(Error::Empty("embedding file")),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, w: &str) -> bool {
        self.index.contains_key(w)
    }

    pub fn vector(&self, w: &str) -> Option<&[T]> {
        self.index
            .get(w)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    fn cosine_idx(&self, a: usize, b: usize) -> T {
        let (na, nb) = (self.norms[a], self.norms[b]);
        if na == T::zero() || nb == T::zero() {
            return T::zero();
        }
        let va = &self.vectors[a * self.dim..(a + 1) * self.dim];
        let vb = &self.vectors[b * self.dim..(b + 1) * self.dim];
        let dot: T = va.iter().zip(vb).map(|(&x, &y)| x * y).sum();
        dot / (na * nb)
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<T> {
        Some(self.cosine_idx(*self.index.get(a)?, *self.index.get(b)?))
    }
}

/// The `k` most cosine-similar vocabulary words to `w`, excluding `w`.
///
/// Ordered by descending similarity, ties broken lexicographically. Out-of-vocabulary
/// words have no neighbours.
pub fn knn_words<T: Real>(table: &EmbeddingTable<T>, w: &str, k: usize) -> Result<Vec<String>> {
    if k == 0 {
        return Err(Error::invalid("neighbour count K must be positive"));
    }
    let Some(&wi) = table.index.get(w) else {
        return Ok(Vec::new());
    };
    let mut scored: Vec<(T, &str)> = (0..table.len())
        .filter(|&i| i != wi)
        .map(|i| (table.cosine_idx(wi, i), table.words[i].as_str()))
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.1.cmp(b.1))
    });
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(_, s)| s.to_string())
        .collect())
}

/// Word → synonyms, closed under symmetry.
#[derive(Debug, Clone, Default)]
pub struct SynonymLexicon {
    map: HashMap<String, BTreeSet<String>>,
}

impl SynonymLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, a: &str, b: &str) {
        let (a, b) = (a.trim().to_lowercase(), b.trim().to_lowercase());
        if a.is_empty() || b.is_empty() || a == b {
            return;
        }
        self.map.entry(a.clone()).or_default().insert(b.clone());
        self.map.entry(b).or_default().insert(a);
    }

    /// Parses `word<TAB>syn1,syn2,...` lines.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lex = SynonymLexicon::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, syns) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: "expected `word<TAB>syn1,syn2,...`".into(),
            })?;
            for s in syns.split(',') {
                lex.add(word, s);
            }
        }
        Ok(lex)
    }

    pub fn are_synonyms(&self, a: &str, b: &str) -> bool {
        self.map.get(a).is_some_and(|s| s.contains(b))
    }

    pub fn synonyms(&self, w: &str) -> impl Iterator<Item = &str> {
        self.map.get(w).into_iter().flatten().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Soft word equality from a synonym lexicon and embedding neighbourhoods.
///
/// Neighbour lists are memoised; the cache is shared between clones.
#[derive(Debug, Clone)]
pub struct WordMatcher<T> {
    embeddings: Option<Arc<EmbeddingTable<T>>>,
    synonyms: Option<Arc<SynonymLexicon>>,
    k: usize,
    cache: Arc<Mutex<HashMap<String, Arc<Vec<String>>>>>,
}

impl<T: Real> WordMatcher<T> {
    pub fn new(
        embeddings: Option<Arc<EmbeddingTable<T>>>,
        synonyms: Option<Arc<SynonymLexicon>>,
        k: usize,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("neighbour count K must be positive"));
        }
        Ok(WordMatcher {
            embeddings,
            synonyms,
            k,
            cache: Arc::default(),
        })
    }

    /// Equality only.
    pub fn exact() -> Self {
        WordMatcher {
            embeddings: None,
            synonyms: None,
            k: DEFAULT_NEIGHBOURS,
            cache: Arc::default(),
        }
    }

    fn neighbours(&self, w: &str) -> Arc<Vec<String>> {
        let Some(table) = &self.embeddings else {
            return Arc::default();
        };
        if let Some(hit) = self.cache.lock().expect("knn cache poisoned").get(w) {
            return Arc::clone(hit);
        }
        let list = Arc::new(knn_words(table, w, self.k).expect("k checked at construction"));
        self.cache
            .lock()
            .expect("knn cache poisoned")
            .insert(w.to_string(), Arc::clone(&list));
        list
    }

    pub fn matches(&self, a: &str, b: &str) -> bool {
        if a == b {
            return true;
        }
        if self.synonyms.as_ref().is_some_and(|s| s.are_synonyms(a, b)) {
            return true;
        }
        self.neighbours(a).iter().any(|n| n == b) || self.neighbours(b).iter().any(|n| n == a)
    }
}

/// `true` iff the words are equal, synonyms, or either is in the other's top-`k`
/// embedding neighbours.
pub fn words_match<T: Real>(
    w1: &str,
    w2: &str,
    embeddings: &EmbeddingTable<T>,
    synonyms: &SynonymLexicon,
    k: usize,
) -> Result<bool> {
    if w1 == w2 || synonyms.are_synonyms(w1, w2) {
        return Ok(true);
    }
    Ok(knn_words(embeddings, w1, k)?.iter().any(|n| n == w2)
        || knn_words(embeddings, w2, k)?.iter().any(|n| n == w1))
}

/// Size of a maximum matching in the bipartite graph `left × right` whose edges are
/// the pairs accepted by `matcher` (Hopcroft–Karp).
pub fn max_matching<F>(left: &[&str], right: &[&str], matcher: F) -> usize
where
    F: Fn(&str, &str) -> bool,
{
    let adj: Vec<Vec<usize>> = left
        .iter()
        .map(|a| {
            right
                .iter()
                .enumerate()
                .filter(|(_, b)| matcher(a, b))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    hopcroft_karp(&adj, right.len())
}

const UNMATCHED: usize = usize::MAX;

fn hopcroft_karp(adj: &[Vec<usize>], n_right: usize) -> usize {
    let n_left = adj.len();
    let mut match_l = vec![UNMATCHED; n_left];
    let mut match_r = vec![UNMATCHED; n_right];
    let mut dist = vec![0usize; n_left];
    let mut size = 0;

    loop {
        // Layer the free left vertices and everything reachable by alternating paths.
        let mut queue = VecDeque::new();
        let mut found = false;
        for u in 0..n_left {
            if match_l[u] == UNMATCHED {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = UNMATCHED;
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                match match_r[v] {
                    UNMATCHED => found = true,
                    w if dist[w] == UNMATCHED => {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            return size;
        }
        for u in 0..n_left {
            if match_l[u] == UNMATCHED && augment(u, adj, &mut match_l, &mut match_r, &mut dist) {
                size += 1;
            }
        }
    }
}

fn augment(
    u: usize,
    adj: &[Vec<usize>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
) -> bool {
    for &v in &adj[u] {
        let w = match_r[v];
        if w == UNMATCHED || (dist[w] == dist[u] + 1 && augment(w, adj, match_l, match_r, dist)) {
            match_l[u] = v;
            match_r[v] = u;
            return true;
        }
    }
    dist[u] = UNMATCHED;
    false
}

/// Jaccard similarity with soft word matching. Two empty sets are identical (1.0).
pub fn extended_jaccard<F>(a: &TokenSet, b: &TokenSet, matcher: F) -> f64
where
    F: Fn(&str, &str) -> bool,
{
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let left: Vec<&str> = a.iter().collect();
    let right: Vec<&str> = b.iter().collect();
    let m = max_matching(&left, &right, matcher);
    m as f64 / (a.len() + b.len() - m) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(words: &[&str]) -> TokenSet {
        words.iter().copied().collect()
    }

    #[test]
    fn tokenizer_examples() {
        let t = Tokenizer::default();
        assert_eq!(
            t.token_set("How far is your office?"),
            set(&["how", "far", "office"])
        );
        assert!(t.token_set("").is_empty());
        assert_eq!(t.token_set("Hello, HELLO!!"), set(&["hello"]));
        assert_eq!(t.tokens("How far is your office from your home?").len(), 8);
    }

    #[test]
    fn knn_contract() {
        let mut e = EmbeddingTable::<f64>::new(2).unwrap();
        e.insert("a", &[1.0, 0.0]).unwrap();
        e.insert("b", &[0.9, 0.1]).unwrap();
        e.insert("c", &[0.0, 1.0]).unwrap();
        assert!(knn_words(&e, "zzz", 3).unwrap().is_empty());
        assert_eq!(knn_words(&e, "a", 5).unwrap(), ["b", "c"]);
        assert!(knn_words(&e, "a", 0).is_err());
    }

    #[test]
    fn knn_ties_are_lexicographic() {
        let mut e = EmbeddingTable::<f64>::new(2).unwrap();
        e.insert("q", &[1.0, 0.0]).unwrap();
        e.insert("zeta", &[2.0, 0.0]).unwrap();
        e.insert("alpha", &[3.0, 0.0]).unwrap();
        assert_eq!(knn_words(&e, "q", 2).unwrap(), ["alpha", "zeta"]);
    }

    #[test]
    fn embedding_file_checks_dimension() {
        let ok = EmbeddingTable::<f32>::read("a 1 0\nb 0 1\n".as_bytes()).unwrap();
        assert_eq!((ok.len(), ok.dim()), (2, 2));
        assert!(EmbeddingTable::<f64>::read("a 1 0\nb 0 1 2\n".as_bytes()).is_err());
        assert!(EmbeddingTable::<f64>::read("a 1 nan\n".as_bytes()).is_err());
        assert!(EmbeddingTable::<f64>::read("".as_bytes()).is_err());
    }

    #[test]
    fn synonyms_are_symmetric() {
        let lex = SynonymLexicon::read("home\thouse,dwelling\n".as_bytes()).unwrap();
        assert!(lex.are_synonyms("house", "home"));
        assert!(lex.are_synonyms("dwelling", "home"));
        assert!(!lex.are_synonyms("house", "dwelling"));
    }

    #[test]
    fn words_match_clauses() {
        let e = EmbeddingTable::<f64>::read("cat 1 0\ndog 0 1\n".as_bytes()).unwrap();
        let mut lex = SynonymLexicon::new();
        lex.add("home", "house");
        assert!(words_match("office", "office", &e, &lex, 5).unwrap());
        assert!(words_match("home", "house", &e, &lex, 5).unwrap());
        assert!(!words_match("tree", "river", &e, &lex, 5).unwrap());
    }

    #[test]
    fn jaccard_examples() {
        let eq = |a: &str, b: &str| a == b;
        assert_eq!(
            extended_jaccard(&set(&["a", "b"]), &set(&["a", "b"]), eq),
            1.0
        );
        assert_eq!(
            extended_jaccard(&set(&["a", "b"]), &set(&["b", "c"]), eq),
            1.0 / 3.0
        );
        assert_eq!(extended_jaccard(&set(&["a"]), &set(&[]), eq), 0.0);
        assert_eq!(extended_jaccard(&set(&[]), &set(&[]), eq), 1.0);

        let mut lex = SynonymLexicon::new();
        lex.add("home", "house");
        lex.add("office", "workplace");
        let m = WordMatcher::<f64>::new(None, Some(Arc::new(lex)), 5).unwrap();
        let a = set(&["how", "far", "workplace", "house"]);
        let b = set(&["how", "far", "office", "home"]);
        assert_eq!(extended_jaccard(&a, &b, |x, y| m.matches(x, y)), 1.0);
    }

    #[test]
    fn matching_beats_greedy() {
        // Greedy would pair x-p first and leave y unmatched.
        let edges = [("x", "p"), ("x", "q"), ("y", "p")];
        let m = max_matching(&["x", "y"], &["p", "q"], |a, b| edges.contains(&(a, b)));
        assert_eq!(m, 2);
    }
}
