//! Markdown and CSV rendering of a finished run.

use std::fmt::Write;

use qfactors_core::corpus::DomainStats;

use crate::config::Combination;
use crate::error::BoxError;
use crate::pipeline::{CorpusSummary, EvalArtifact, FactorEntry, FactorsArtifact};

/// One table row: a label, one cell per domain and the mean of the present cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: String,
    pub cells: Vec<Option<f64>>,
    pub average: Option<f64>,
}

impl Row {
    fn new(label: String, cells: Vec<Option<f64>>) -> Self {
        let present: Vec<f64> = cells.iter().flatten().copied().collect();
        let average =
            (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
        Row {
            label,
            cells,
            average,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub stats: Vec<(String, DomainStats)>,
    pub domains: Vec<String>,
    pub auc: Vec<Row>,
    pub ap_gain: Vec<Row>,
    pub feature_gain: Vec<Row>,
    pub factors: FactorsArtifact,
    pub notes: Vec<String>,
}

fn title(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

fn cell_text(s: &str) -> String {
    s.replace('|', "\\|").replace(['\n', '\r'], " ")
}

impl Tables {
    pub fn build(
        stats: &CorpusSummary,
        eval: &EvalArtifact,
        factors: &FactorsArtifact,
        combos: &[Combination],
    ) -> Self {
        let mut rows_stats: Vec<(String, DomainStats)> = stats
            .filtered
            .domains
            .iter()
            .map(|(d, s)| (title(d.as_str()), *s))
            .collect();
        rows_stats.push(("Total".into(), stats.filtered.total));

        let domains: Vec<String> = eval.reports.iter().map(|r| r.domain.clone()).collect();
        let lookup =
            |combo: &str, f: fn(&qfactors_core::classify::EvalRow) -> f64| -> Vec<Option<f64>> {
                eval.reports
                    .iter()
                    .map(|r| r.rows.iter().find(|row| row.combination == combo).map(f))
                    .collect()
            };
        let auc = combos
            .iter()
            .map(|c| Row::new(c.label(), lookup(&c.key, |r| r.auc)))
            .collect();
        let ap_gain = combos
            .iter()
            .map(|c| Row::new(c.label(), lookup(&c.key, |r| r.ap_gain_pct)))
            .collect();

        let mut features: Vec<String> = Vec::new();
        for g in &eval.feature_gains {
            if !features.contains(&g.feature) {
                features.push(g.feature.clone());
            }
        }
        let feature_gain = features
            .iter()
            .map(|f| {
                let cells = domains
                    .iter()
                    .map(|d| {
                        eval.feature_gains
                            .iter()
                            .find(|g| &g.domain == d && &g.feature == f)
                            .map(|g| g.gain.gain_pct)
                    })
                    .collect();
                Row::new(f.clone(), cells)
            })
            .collect();

        Tables {
            stats: rows_stats,
            domains,
            auc,
            ap_gain,
            feature_gain,
            factors: factors.clone(),
            notes: eval.skipped.clone(),
        }
    }

    fn header(&self, first: &str) -> Vec<String> {
        let mut h = vec![first.to_string()];
        h.extend(self.domains.iter().map(|d| title(d)));
        h.push("Average".into());
        h
    }

    fn md_table(out: &mut String, header: &[String], rows: impl Iterator<Item = Vec<String>>) {
        let _ = writeln!(out, "| {} |", header.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
        for r in rows {
            let _ = writeln!(out, "| {} |", r.join(" | "));
        }
        out.push('\n');
    }

    fn md_rows(rows: &[Row]) -> impl Iterator<Item = Vec<String>> + '_ {
        rows.iter().map(|r| {
            let mut v = vec![cell_text(&r.label)];
            v.extend(r.cells.iter().map(|c| num(*c)));
            v.push(num(r.average));
            v
        })
    }

    fn factor_table(out: &mut String, heading: &str, entries: &[FactorEntry]) {
        let _ = writeln!(out, "#### {heading}\n");
        if entries.is_empty() {
            out.push_str("No factors to list.\n\n");
            return;
        }
        let header: Vec<String> = [
            "Factor",
            "Members",
            "Response rate (%)",
            "Frequent n-grams",
            "Top questions",
        ]
        .map(String::from)
        .to_vec();
        let rows = entries.iter().map(|e| {
            let ngrams: Vec<String> = e
                .report
                .frequent_ngrams
                .iter()
                .map(|(g, c)| format!("{g} ({c})"))
                .collect();
            let questions: Vec<String> = e.questions.iter().map(|q| cell_text(q)).collect();
            vec![
                e.report.factor.to_string(),
                e.report.members.to_string(),
                DomainStats::from_counts(e.report.members as u64, e.report.answered as u64)
                    .rate_display(),
                cell_text(&ngrams.join(", ")),
                questions.join("<br>"),
            ]
        });
        Self::md_table(out, &header, rows);
    }

    pub fn markdown(&self) -> String {
        let mut out = String::from("# Question response report\n\n## Corpus\n\n");
        let header: Vec<String> = [
            "Domain",
            "Questions asked",
            "Questions replied",
            "Response rate (%)",
        ]
        .map(String::from)
        .to_vec();
        Self::md_table(
            &mut out,
            &header,
            self.stats.iter().map(|(d, s)| {
                vec![
                    d.clone(),
                    s.questions_asked.to_string(),
                    s.questions_replied.to_string(),
                    s.rate_display(),
                ]
            }),
        );

        out.push_str("## Test AUC\n\n");
        Self::md_table(&mut out, &self.header("Features"), Self::md_rows(&self.auc));
        out.push_str("## AP gain over random ordering (%)\n\n");
        Self::md_table(
            &mut out,
            &self.header("Features"),
            Self::md_rows(&self.ap_gain),
        );
        out.push_str("## Single-feature AP gain (%)\n\n");
        if self.feature_gain.is_empty() {
            out.push_str("No feature could be scored.\n\n");
        } else {
            Self::md_table(
                &mut out,
                &self.header("Feature"),
                Self::md_rows(&self.feature_gain),
            );
        }

        out.push_str("## Latent factors\n\n");
        if self.factors.domains.is_empty() {
            out.push_str("No latent factors were computed.\n\n");
        }
        for d in &self.factors.domains {
            let base = DomainStats::from_counts(d.questions as u64, d.answered as u64);
            let _ = writeln!(
                out,
                "### {}\n\n{} questions, base response rate {}%, {} factors fitted, {} with enough members.\n",
                title(d.domain.as_str()),
                d.questions,
                base.rate_display(),
                d.k,
                d.eligible
            );
            Self::factor_table(&mut out, "Highest response rate", &d.highest);
            Self::factor_table(&mut out, "Lowest response rate", &d.lowest);
        }

        if !self.notes.is_empty() {
            out.push_str("## Notes\n\n");
            for n in &self.notes {
                let _ = writeln!(out, "- {n}");
            }
            out.push('\n');
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    }

    fn csv(&self, rows: &[Row]) -> Result<Vec<u8>, BoxError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["combination".to_string()];
        header.extend(self.domains.iter().cloned());
        header.push("average".into());
        w.write_record(&header)?;
        for r in rows {
            let mut rec = vec![r.label.clone()];
            rec.extend(
                r.cells
                    .iter()
                    .map(|c| c.map(|v| v.to_string()).unwrap_or_default()),
            );
            rec.push(r.average.map(|v| v.to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        Ok(w.into_inner().map_err(|e| e.to_string())?)
    }

    pub fn auc_csv(&self) -> Result<Vec<u8>, BoxError> {
        self.csv(&self.auc)
    }

    pub fn ap_gain_csv(&self) -> Result<Vec<u8>, BoxError> {
        self.csv(&self.ap_gain)
    }
}
