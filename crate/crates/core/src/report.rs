//! Correlation tables: one row per metric, one column per language pair
//! plus the pooled AVG.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::correlation::Protocol;
use crate::model::{EvalReport, GroupStatistic, StatisticKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub per_lang: BTreeMap<String, GroupStatistic>,
    pub aggregate: Option<GroupStatistic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub protocol: Protocol,
    pub statistic: StatisticKind,
    pub rows: Vec<TableRow>,
}

fn statistic_for(protocol: Protocol) -> StatisticKind {
    match protocol {
        Protocol::Pearson => StatisticKind::AbsPearson,
        Protocol::Darr => StatisticKind::KendallWmt,
        Protocol::TauB => StatisticKind::KendallTauB,
    }
}

impl ReportTable {
    pub fn new(protocol: Protocol) -> Self {
        Self {
            protocol,
            statistic: statistic_for(protocol),
            rows: Vec::new(),
        }
    }

    pub fn push<E: std::fmt::Display>(&mut self, name: impl Into<String>, report: Result<&EvalReport, E>) {
        let name = name.into();
        self.rows.push(match report {
            Ok(r) => TableRow {
                name,
                per_lang: r.per_lang.clone(),
                aggregate: Some(r.aggregate),
                error: None,
            },
            Err(e) => TableRow {
                name,
                per_lang: BTreeMap::new(),
                aggregate: None,
                error: Some(e.to_string()),
            },
        });
    }

    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    /// Language columns in sorted order.
    pub fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = self.rows.iter().flat_map(|r| r.per_lang.keys().cloned()).collect();
        cols.sort();
        cols.dedup();
        cols
    }

    /// Fixed-width text table with three decimals.
    pub fn render(&self) -> String {
        let cols = self.columns();
        let name_w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(6);
        let col_w = cols.iter().map(String::len).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = writeln!(out, "protocol: {} ({})", self.protocol, self.statistic);
        let _ = write!(out, "{:<name_w$}", "metric");
        for c in cols.iter().map(String::as_str).chain(["AVG"]) {
            let _ = write!(out, "  {c:>col_w$}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<name_w$}", row.name);
            if let Some(e) = &row.error {
                let _ = writeln!(out, "  error: {e}");
                continue;
            }
            for c in &cols {
                match row.per_lang.get(c) {
                    Some(g) => {
                        let _ = write!(out, "  {:>col_w$.3}", g.statistic);
                    }
                    None => {
                        let _ = write!(out, "  {:>col_w$}", "-");
                    }
                }
            }
            let avg = row.aggregate.map_or("-".to_string(), |g| format!("{:.3}", g.statistic));
            let _ = writeln!(out, "  {avg:>col_w$}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::StatsError;

    #[test]
    fn renders_rows_and_errors() {
        let report = EvalReport {
            statistic_kind: StatisticKind::AbsPearson,
            per_lang: [("de-en".to_string(), GroupStatistic { statistic: 0.5, n: 3 })].into(),
            aggregate: GroupStatistic { statistic: 0.25, n: 3 },
        };
        let mut t = ReportTable::new(Protocol::Pearson);
        t.push("NUBIA", Ok::<_, StatsError>(&report));
        t.push("BLEU", Err::<&EvalReport, _>(StatsError::EmptyRanking));
        let text = t.render();
        assert!(text.contains("NUBIA    0.500   0.250"), "{text}");
        assert!(text.contains("BLEU    error: no ranked pairs"), "{text}");
        assert!(t.has_errors());
    }
}
