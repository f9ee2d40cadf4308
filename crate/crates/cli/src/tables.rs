//! Feature CSV files, their unigram sidecars and design matrices.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use ndarray::Array2;
use qfactors_core::corpus::Domain;
use qfactors_core::features::{FeatureGroup, FeatureSchema};

use crate::error::BoxError;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub question_id: String,
    pub thread_id: String,
    pub domain: Domain,
    pub values: Vec<f64>,
    pub label: bool,
    pub unigrams: BTreeMap<usize, u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub schema: FeatureSchema,
    pub rows: Vec<FeatureRow>,
}

const KEY_COLUMNS: [&str; 3] = ["question_id", "thread_id", "domain"];

/// Group of every known dense column name.
fn known_columns() -> HashMap<&'static str, FeatureGroup> {
    FeatureGroup::DENSE
        .iter()
        .flat_map(|&g| g.feature_names().into_iter().map(move |n| (n, g)))
        .collect()
}

impl FeatureTable {
    pub fn to_csv(&self) -> Result<Vec<u8>, BoxError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = KEY_COLUMNS.to_vec();
        header.extend(self.schema.names());
        header.push("label");
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                row.question_id.clone(),
                row.thread_id.clone(),
                row.domain.to_string(),
            ];
            rec.extend(row.values.iter().map(|v| v.to_string()));
            rec.push(if row.label { "1" } else { "0" }.into());
            w.write_record(&rec)?;
        }
        Ok(w.into_inner().map_err(|e| e.to_string())?)
    }

    /// Sparse unigram sidecar: `question_id,word_index,count`.
    pub fn unigrams_csv(&self) -> Result<Vec<u8>, BoxError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["question_id", "word_index", "count"])?;
        for row in &self.rows {
            for (i, c) in &row.unigrams {
                w.write_record([row.question_id.as_str(), &i.to_string(), &c.to_string()])?;
            }
        }
        Ok(w.into_inner().map_err(|e| e.to_string())?)
    }

    pub fn read(path: &Path, unigrams: Option<&Path>) -> Result<Self, BoxError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header.len() < 4
            || header[..3] != KEY_COLUMNS
            || header.last().map(String::as_str) != Some("label")
        {
            return Err(format!(
                "{}: expected columns question_id,thread_id,domain,...,label",
                path.display()
            )
            .into());
        }
        let known = known_columns();
        let mut columns = Vec::new();
        let mut seen = BTreeSet::new();
        for name in &header[3..header.len() - 1] {
            let g = known
                .get(name.as_str())
                .ok_or_else(|| format!("{}: unknown feature column `{name}`", path.display()))?;
            if !seen.insert(name.clone()) {
                return Err(format!("{}: duplicate column `{name}`", path.display()).into());
            }
            columns.push((name.clone(), *g));
        }
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let at = |e: String| format!("{} line {}: {e}", path.display(), line + 2);
            let values = (3..rec.len() - 1)
                .map(|i| rec[i].parse::<f64>().map_err(|e| at(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(at("non-finite feature value".into()).into());
            }
            let label = match &rec[rec.len() - 1] {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(at(format!("bad label `{other}`")).into()),
            };
            rows.push(FeatureRow {
                question_id: rec[0].to_string(),
                thread_id: rec[1].to_string(),
                domain: rec[2]
                    .parse()
                    .map_err(|e: qfactors_core::Error| at(e.to_string()))?,
                values,
                label,
                unigrams: BTreeMap::new(),
            });
        }
        let mut table = FeatureTable {
            schema: FeatureSchema {
                columns,
                unigrams: unigrams.is_some(),
            },
            rows,
        };
        if let Some(u) = unigrams {
            table.attach_unigrams(u)?;
        }
        Ok(table)
    }

    fn attach_unigrams(&mut self, path: &Path) -> Result<(), BoxError> {
        let index: HashMap<String, usize> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.question_id.clone(), i))
            .collect();
        let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(
                    format!("{}: expected question_id,word_index,count", path.display()).into(),
                );
            }
            let Some(&row) = index.get(&rec[0]) else {
                return Err(format!("{}: unknown question `{}`", path.display(), &rec[0]).into());
            };
            let w: usize = rec[1].parse()?;
            let c: u32 = rec[2].parse()?;
            self.rows[row].unigrams.insert(w, c);
        }
        Ok(())
    }

    pub fn domains(&self) -> BTreeSet<Domain> {
        self.rows.iter().map(|r| r.domain).collect()
    }

    /// Rows of `domain`, or all rows for `None`.
    pub fn select(&self, domain: Option<Domain>) -> Vec<&FeatureRow> {
        self.rows
            .iter()
            .filter(|r| domain.is_none_or(|d| r.domain == d))
            .collect()
    }

    /// Names of the design-matrix columns for `groups`.
    pub fn column_names(&self, groups: &BTreeSet<FeatureGroup>, vocab: &[String]) -> Vec<String> {
        let mut names: Vec<String> = self
            .schema
            .indices_of(groups)
            .into_iter()
            .map(|i| self.schema.columns[i].0.clone())
            .collect();
        if groups.contains(&FeatureGroup::Unigram) {
            names.extend(vocab.iter().map(|w| format!("word:{w}")));
        }
        names
    }

    /// Dense design matrix over the columns of `groups`; unigram counts take
    /// `vocab_len` columns after the dense ones.
    pub fn design(
        &self,
        rows: &[&FeatureRow],
        groups: &BTreeSet<FeatureGroup>,
        vocab_len: usize,
    ) -> Result<(Array2<f64>, Vec<bool>), BoxError> {
        let dense = self.schema.indices_of(groups);
        let missing: Vec<_> = groups
            .iter()
            .filter(|g| **g != FeatureGroup::Unigram && !self.schema.groups().contains(g))
            .collect();
        if !missing.is_empty() {
            return Err(format!("feature table lacks groups {missing:?}").into());
        }
        let with_words = groups.contains(&FeatureGroup::Unigram);
        if with_words && !self.schema.unigrams {
            return Err("unigram features requested but no unigram sidecar was loaded".into());
        }
        let width = dense.len() + if with_words { vocab_len } else { 0 };
        let mut x = Array2::zeros((rows.len(), width));
        for (i, row) in rows.iter().enumerate() {
            for (j, &c) in dense.iter().enumerate() {
                x[(i, j)] = row.values[c];
            }
            if with_words {
                for (&w, &c) in &row.unigrams {
                    if w >= vocab_len {
                        return Err(format!(
                            "word index {w} outside a {vocab_len}-word vocabulary"
                        )
                        .into());
                    }
                    x[(i, dense.len() + w)] = c as f64;
                }
            }
        }
        Ok((x, rows.iter().map(|r| r.label).collect()))
    }
}
