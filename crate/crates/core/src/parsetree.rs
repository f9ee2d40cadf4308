//! Penn-style bracketed constituency trees and their per-sentence complexity numbers.
//!
//! Depth convention: only phrase-level nodes count. Leaves (tokens) and
//! pre-terminals (POS tags) are ignored, and a `ROOT` (or unlabeled) wrapper with
//! a single child is skipped, so the sentence node is the first real phrase. Depth is
//! the number of edges on the longest downward path of phrase nodes from there; a
//! sentence whose phrases all sit directly on POS tags has depth 0. The depth of a
//! verb phrase is the same measure taken on its own subtree.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseTree {
    pub label: String,
    pub children: Vec<ParseTree>,
}

impl ParseTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        ParseTree {
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<ParseTree>) -> Self {
        ParseTree {
            label: label.into(),
            children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn is_preterminal(&self) -> bool {
        !self.is_leaf() && self.children.iter().all(ParseTree::is_leaf)
    }

    fn is_phrase(&self) -> bool {
        !self.is_leaf() && !self.is_preterminal()
    }

    /// Label without function tags or indices (`NP-SBJ-1` → `NP`).
    pub fn category(&self) -> &str {
        category(&self.label)
    }

    /// The tokens at the leaves, left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        if self.is_leaf() {
            out.push(&self.label);
        } else {
            for c in &self.children {
                c.collect_leaves(out);
            }
        }
    }

    /// Phrase-level height, `None` for leaves and pre-terminals.
    fn phrase_height(&self) -> Option<usize> {
        if !self.is_phrase() {
            return None;
        }
        Some(
            self.children
                .iter()
                .filter_map(ParseTree::phrase_height)
                .map(|h| h + 1)
                .max()
                .unwrap_or(0),
        )
    }

    /// The node measured as "the sentence": a lone child under `ROOT` or an empty label.
    pub fn sentence_node(&self) -> &ParseTree {
        let wrapper = self.label.is_empty() || self.label == "ROOT";
        if wrapper && self.children.len() == 1 && !self.children[0].is_leaf() {
            &self.children[0]
        } else {
            self
        }
    }
}

fn category(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    label.split(['-', '=']).next().unwrap_or(label)
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_leaf() {
            return f.write_str(&self.label);
        }
        write!(f, "({}", self.label)?;
        for c in &self.children {
            write!(f, " {c}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(s: &str) -> Vec<(usize, Tok<'_>)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        let delim = c == '(' || c == ')' || c.is_whitespace();
        if delim {
            if let Some(st) = start.take() {
                out.push((st, Tok::Atom(&s[st..i])));
            }
            match c {
                '(' => out.push((i, Tok::Open)),
                ')' => out.push((i, Tok::Close)),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(st) = start {
        out.push((st, Tok::Atom(&s[st..])));
    }
    out
}

/// Parses one bracketed tree such as `(ROOT (S (NP (PRP I)) (VP (VBP agree))))`.
///
/// A bare token parses as a single leaf. Errors carry the byte offset where the
/// problem was detected; a missing `)` is reported at the end of the input.
pub fn parse_bracketed(s: &str) -> Result<ParseTree> {
    let toks = lex(s);
    if toks.is_empty() {
        return Err(Error::Bracket {
            offset: 0,
            message: "empty input".into(),
        });
    }
    let mut pos = 0;
    let tree = parse_node(&toks, &mut pos, s.len())?;
    if let Some(&(off, _)) = toks.get(pos) {
        return Err(Error::Bracket {
            offset: off,
            message: "trailing input after tree".into(),
        });
    }
    Ok(tree)
}

fn parse_node(toks: &[(usize, Tok<'_>)], pos: &mut usize, end: usize) -> Result<ParseTree> {
    let eof = |message: &str| Error::Bracket {
        offset: end,
        message: message.into(),
    };
    let &(off, tok) = toks
        .get(*pos)
        .ok_or_else(|| eof("unexpected end of input"))?;
    *pos += 1;
    match tok {
        Tok::Atom(a) => Ok(ParseTree::leaf(a)),
        Tok::Close => Err(Error::Bracket {
            offset: off,
            message: "unexpected `)`".into(),
        }),
        Tok::Open => {
            let label = match toks.get(*pos) {
                Some(&(_, Tok::Atom(a))) => {
                    *pos += 1;
                    a.to_string()
                }
                _ => String::new(),
            };
            let mut children = Vec::new();
            loop {
                match toks.get(*pos) {
                    None => return Err(eof("missing `)`")),
                    Some(&(close_off, Tok::Close)) => {
                        *pos += 1;
                        if children.is_empty() {
                            return Err(Error::Bracket {
                                offset: close_off,
                                message: format!("node `{label}` has no children"),
                            });
                        }
                        return Ok(ParseTree { label, children });
                    }
                    Some(_) => children.push(parse_node(toks, pos, end)?),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentenceSyntax {
    pub depth: usize,
    pub vp_count: usize,
    pub max_vp_depth: usize,
    pub vp_ratio: f64,
}

impl SentenceSyntax {
    /// `max_vp_depth / depth` truncated to two decimals, e.g. `0.81` for 9/11.
    pub fn ratio_display(&self) -> String {
        if self.depth == 0 || self.vp_count == 0 {
            return "0.00".to_string();
        }
        let hundredths = 100 * self.max_vp_depth / self.depth;
        format!("{}.{:02}", hundredths / 100, hundredths % 100)
    }
}

pub fn default_vp_labels() -> BTreeSet<String> {
    BTreeSet::from(["VP".to_string()])
}

/// Depth, verb-phrase count, deepest verb-phrase subtree and their ratio.
pub fn sentence_syntax(tree: &ParseTree, vp_labels: &BTreeSet<String>) -> SentenceSyntax {
    let sentence = tree.sentence_node();
    let depth = sentence.phrase_height().unwrap_or(0);

    let mut vp_count = 0;
    let mut max_vp_depth = 0;
    let mut stack = vec![sentence];
    while let Some(node) = stack.pop() {
        if let Some(h) = node.phrase_height() {
            if vp_labels.contains(node.category()) {
                vp_count += 1;
                max_vp_depth = max_vp_depth.max(h);
            }
        }
        stack.extend(node.children.iter());
    }

    let vp_ratio = if depth > 0 && vp_count > 0 {
        max_vp_depth as f64 / depth as f64
    } else {
        0.0
    };
    SentenceSyntax {
        depth,
        vp_count,
        max_vp_depth,
        vp_ratio,
    }
}

/// One line of the parse sidecar file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseRecord {
    pub question_id: String,
    pub sentences: Vec<String>,
}

/// Reads the JSONL parse sidecar and measures every sentence.
pub fn read_parse_sidecar<R: std::io::BufRead>(
    reader: R,
    vp_labels: &BTreeSet<String>,
) -> Result<std::collections::HashMap<String, Vec<SentenceSyntax>>> {
    let mut out = std::collections::HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ParseRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        let mut stats = Vec::with_capacity(rec.sentences.len());
        for s in &rec.sentences {
            let tree = parse_bracketed(s).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            stats.push(sentence_syntax(&tree, vp_labels));
        }
        out.insert(rec.question_id, stats);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_shapes() {
        let t = parse_bracketed("(X a)").unwrap();
        assert_eq!(t, ParseTree::node("X", vec![ParseTree::leaf("a")]));
        let t = parse_bracketed("(A (B b) (C c))").unwrap();
        assert_eq!(t.children.len(), 2);
        assert_eq!(t.leaves(), ["b", "c"]);
    }

    #[test]
    fn bracket_errors_carry_offsets() {
        match parse_bracketed("((A a)") {
            Err(Error::Bracket { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("{other:?}"),
        }
        match parse_bracketed("(A a))") {
            Err(Error::Bracket { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("{other:?}"),
        }
        assert!(parse_bracketed("   ").is_err());
        assert!(parse_bracketed("(A)").is_err());
    }

    #[test]
    fn unlabeled_root_and_function_tags() {
        let t =
            parse_bracketed("( (S (NP-SBJ (PRP I)) (VP-TMP (VBP agree) (NP (PRP you)))))").unwrap();
        let s = sentence_syntax(&t, &default_vp_labels());
        assert_eq!((s.depth, s.vp_count, s.max_vp_depth), (2, 1, 1));
        assert_eq!(s.ratio_display(), "0.50");
    }

    #[test]
    fn single_leaf_is_flat() {
        let s = sentence_syntax(&parse_bracketed("hello").unwrap(), &default_vp_labels());
        assert_eq!(
            s,
            SentenceSyntax {
                depth: 0,
                vp_count: 0,
                max_vp_depth: 0,
                vp_ratio: 0.0
            }
        );
    }

    #[test]
    fn extra_vp_labels() {
        let t =
            parse_bracketed("(ROOT (SQ (VBZ is) (NP (DT the) (NN one)) (VP (VBN done))))").unwrap();
        assert_eq!(sentence_syntax(&t, &default_vp_labels()).vp_count, 1);
        let wide: BTreeSet<String> = ["VP", "SQ"].map(String::from).into();
        assert_eq!(sentence_syntax(&t, &wide).vp_count, 2);
    }

    fn arb_tree() -> impl Strategy<Value = ParseTree> {
        let leaf = "[a-z]{1,4}".prop_map(ParseTree::leaf);
        leaf.prop_recursive(6, 48, 4, |inner| {
            ("[A-Z]{1,3}", prop::collection::vec(inner, 1..4))
                .prop_map(|(l, c)| ParseTree::node(l, c))
        })
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(t in arb_tree()) {
            prop_assert_eq!(parse_bracketed(&t.to_string()).unwrap(), t);
        }

        #[test]
        fn vp_depth_bounded_and_removal_zeroes(t in arb_tree()) {
            let labels: BTreeSet<String> = ["VP", "S", "NP"].map(String::from).into();
            let s = sentence_syntax(&t, &labels);
            prop_assert!(s.max_vp_depth <= s.depth);
            prop_assert!((0.0..=1.0).contains(&s.vp_ratio));
            let none = sentence_syntax(&t, &BTreeSet::new());
            prop_assert_eq!((none.vp_count, none.max_vp_depth, none.vp_ratio), (0, 0, 0.0));
        }

        #[test]
        fn attaching_subtree_never_reduces_depth(t in arb_tree(), extra in arb_tree()) {
            let labels = default_vp_labels();
            // wrap so the sentence node is stable
            let base = ParseTree::node("S", vec![t.clone(), ParseTree::node("X", vec![ParseTree::leaf("x")])]);
            let mut grown = base.clone();
            grown.children.push(extra);
            prop_assert!(sentence_syntax(&grown, &labels).depth >= sentence_syntax(&base, &labels).depth);
        }
    }
}
