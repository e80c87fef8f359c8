//! Aligned-text and CSV emitters for evaluation tables.

use std::collections::{BTreeMap, BTreeSet};

use super::QepReport;

/// A rectangular table of pre-formatted cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: Vec<String>) -> Self {
        Self { headers, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    /// First column left-aligned, the rest right-aligned, separated by ` | `.
    pub fn to_text(&self) -> String {
        let cols = self.headers.len();
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            (0..cols)
                .map(|i| {
                    let cell = cells.get(i).map(String::as_str).unwrap_or("");
                    if i == 0 {
                        format!("{cell:<w$}", w = widths[i])
                    } else {
                        format!("{cell:>w$}", w = widths[i])
                    }
                })
                .collect::<Vec<_>>()
                .join(" | ")
        };
        let mut out = line(&self.headers);
        out.push('\n');
        out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let escape = |c: &String| {
            if c.contains([',', '"', '\n']) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.clone()
            }
        };
        let mut out = String::new();
        for row in std::iter::once(&self.headers).chain(&self.rows) {
            out.push_str(&row.iter().map(escape).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

/// Accuracy per platform (rows) and k (columns), three decimals.
pub fn accuracy_table(reports: &[QepReport]) -> Table {
    let ks: BTreeSet<usize> = reports.iter().map(|r| r.k).collect();
    let mut by_platform: BTreeMap<&str, BTreeMap<usize, f64>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for r in reports {
        if !by_platform.contains_key(r.platform_id.as_str()) {
            order.push(&r.platform_id);
        }
        by_platform.entry(&r.platform_id).or_default().insert(r.k, r.accuracy);
    }
    let mut table = Table::new(std::iter::once("Platform".to_owned()).chain(ks.iter().map(|k| format!("k={k}"))).collect());
    for platform in order {
        let cells = &by_platform[platform];
        table.push(
            std::iter::once(platform.to_owned())
                .chain(ks.iter().map(|k| cells.get(k).map(|a| format!("{a:.3}")).unwrap_or_else(|| "-".into())))
                .collect(),
        );
    }
    table
}

/// Topic shares per platform, two decimals. Columns follow `topics`.
pub fn topic_table(topics: &[String], rows: &[(String, BTreeMap<String, f64>)]) -> Table {
    let mut table = Table::new(std::iter::once("Platform".to_owned()).chain(topics.iter().cloned()).collect());
    for (platform, dist) in rows {
        table.push(
            std::iter::once(platform.clone())
                .chain(topics.iter().map(|t| format!("{:.2}", dist.get(t).copied().unwrap_or(0.0))))
                .collect(),
        );
    }
    table
}
