//! Score tables with best-overall (bold) and best-within-model (underline)
//! marks.
//!
//! A cell is bold when it holds the highest value of its column across all
//! rows. It is underlined when it holds the highest value of its column inside
//! its model block, provided the block has several rows or the table has a
//! single block. Values are compared at the displayed two-decimal precision.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Variant;
use super::ExperimentError;
use crate::metrics::MetricKind;
use crate::prompting::Direction;

/// One model/row/direction worth of scores, in display points (0-100 for
/// every metric, METEOR included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRecord {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    pub direction: Direction,
    pub scores: BTreeMap<MetricKind, f64>,
}

impl ScoreRecord {
    pub fn points(metric: MetricKind, corpus_value: f64) -> f64 {
        match metric {
            MetricKind::Meteor => corpus_value * 100.0,
            _ => corpus_value,
        }
    }

    pub fn label(&self) -> String {
        self.row_label
            .clone()
            .unwrap_or_else(|| self.variant.map_or("", Variant::row_label).to_string())
    }
}

/// Reads score records from a JSON array, a single JSON object, or JSONL.
pub fn load_score_records(path: &Path) -> Result<Vec<ScoreRecord>, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    let bad = |e: String| ExperimentError::Report(format!("{}: {e}", path.display()));
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| bad(e.to_string()));
    }
    if let Ok(one) = serde_json::from_str::<ScoreRecord>(trimmed) {
        return Ok(vec![one]);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad(format!("line {}: {e}", i + 1))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    BleuMeteor,
    Chrfpp,
}

impl std::str::FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bleu_meteor" => Ok(Layout::BleuMeteor),
            "chrfpp" | "chrf_pp" => Ok(Layout::Chrfpp),
            _ => Err(format!("unknown layout {s:?} (expected bleu_meteor or chrfpp)")),
        }
    }
}

impl Layout {
    pub fn metrics(self) -> &'static [MetricKind] {
        match self {
            Layout::BleuMeteor => &[MetricKind::Bleu, MetricKind::Meteor],
            Layout::Chrfpp => &[MetricKind::ChrfPp],
        }
    }

    pub fn columns(self) -> Vec<Column> {
        let dirs = [
            Direction::new("fr", "mo").expect("static"),
            Direction::new("mo", "fr").expect("static"),
        ];
        self.metrics()
            .iter()
            .flat_map(|&metric| {
                dirs.iter().map(move |d| Column {
                    metric,
                    direction: d.clone(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub metric: MetricKind,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub value: f64,
    pub bold: bool,
    pub underline: bool,
}

impl Cell {
    pub fn text(&self) -> String {
        let v = format!("{:.2}", self.value);
        match (self.bold, self.underline) {
            (true, true) => format!("**_{v}_**"),
            (true, false) => format!("**{v}**"),
            (false, true) => format!("_{v}_"),
            (false, false) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub model: String,
    pub label: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub layout: Layout,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    pub warnings: Vec<String>,
}

fn cents(v: f64) -> i64 {
    (v * 100.0).round() as i64
}

impl ScoreTable {
    pub fn bold_values(&self, column: usize) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.cells[column])
            .filter(|c| c.bold)
            .map(|c| c.value)
            .collect()
    }

    pub fn underlined_values(&self, column: usize) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.cells[column])
            .filter(|c| c.underline)
            .map(|c| c.value)
            .collect()
    }

    /// Aligned plain text: `**x**` bold, `_x_` underline.
    pub fn render(&self) -> String {
        let mut header = vec!["Model".to_string()];
        header.extend(
            self.columns
                .iter()
                .map(|c| format!("{} {}→{}", c.metric.label(), c.direction.source, c.direction.target)),
        );
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let name = if r.label.is_empty() {
                    r.model.clone()
                } else {
                    format!("{} {}", r.model, r.label)
                };
                std::iter::once(name).chain(r.cells.iter().map(Cell::text)).collect()
            })
            .collect();
        let width = |i: usize| {
            std::iter::once(&header)
                .chain(&body)
                .map(|row| row[i].chars().count())
                .max()
                .unwrap_or(0)
        };
        let widths: Vec<usize> = (0..header.len()).map(width).collect();
        let line = |row: &[String]| {
            let mut s = String::new();
            for (i, cell) in row.iter().enumerate() {
                let pad = widths[i] - cell.chars().count();
                if i == 0 {
                    let _ = write!(s, "{cell}{}", " ".repeat(pad));
                } else {
                    let _ = write!(s, " | {}{cell}", " ".repeat(pad));
                }
            }
            s.trim_end().to_string()
        };
        let rule = "-".repeat(line(&header).chars().count());
        let mut out = format!("{}\n{rule}\n", line(&header));
        let mut prev_model: Option<&str> = None;
        for (row, cells) in self.rows.iter().zip(&body) {
            if prev_model.is_some_and(|m| m != row.model) {
                out.push_str(&rule);
                out.push('\n');
            }
            out.push_str(&line(cells));
            out.push('\n');
            prev_model = Some(&row.model);
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

/// Arranges records into a table and computes emphasis marks.
pub fn render_report(records: &[ScoreRecord], layout: Layout) -> Result<ScoreTable, ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::Report("no score records".into()));
    }
    let columns = layout.columns();
    let mut keys: Vec<(String, String)> = Vec::new();
    let mut grid: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for rec in records {
        let key = (rec.model.clone(), rec.label());
        let row = keys.iter().position(|k| *k == key).unwrap_or_else(|| {
            keys.push(key.clone());
            keys.len() - 1
        });
        for (&metric, &value) in &rec.scores {
            let Some(col) = columns
                .iter()
                .position(|c| c.metric == metric && c.direction == rec.direction)
            else {
                continue;
            };
            if !value.is_finite() {
                return Err(ExperimentError::Report(format!(
                    "non-finite value for {} {}",
                    key.0, key.1
                )));
            }
            if grid.insert((row, col), value).is_some() {
                return Err(ExperimentError::Report(format!(
                    "duplicate cell: {} {:?} {} {}",
                    key.0,
                    key.1,
                    metric.label(),
                    rec.direction
                )));
            }
        }
    }
    // Group rows by model block, keeping first-appearance order.
    let mut models: Vec<&str> = Vec::new();
    for (m, _) in &keys {
        if !models.contains(&m.as_str()) {
            models.push(m);
        }
    }
    let mut order: Vec<usize> = Vec::new();
    for m in &models {
        order.extend((0..keys.len()).filter(|&i| keys[i].0 == *m));
    }
    let missing: Vec<String> = order
        .iter()
        .flat_map(|&r| (0..columns.len()).map(move |c| (r, c)))
        .filter(|rc| !grid.contains_key(rc))
        .map(|(r, c)| {
            format!(
                "{} {:?} {} {}",
                keys[r].0,
                keys[r].1,
                columns[c].metric.label(),
                columns[c].direction
            )
        })
        .collect();
    if !missing.is_empty() {
        return Err(ExperimentError::Report(format!(
            "missing cells: {}",
            missing.join("; ")
        )));
    }

    let mut rows: Vec<Row> = order
        .iter()
        .map(|&r| Row {
            model: keys[r].0.clone(),
            label: keys[r].1.clone(),
            cells: (0..columns.len())
                .map(|c| Cell {
                    value: grid[&(r, c)],
                    bold: false,
                    underline: false,
                })
                .collect(),
        })
        .collect();
    let mut warnings = Vec::new();
    let single_block = models.len() == 1;
    for (c, column) in columns.iter().enumerate() {
        let best = rows.iter().map(|r| cents(r.cells[c].value)).max().expect("non-empty");
        let mut winners = 0;
        for row in rows.iter_mut() {
            if cents(row.cells[c].value) == best {
                row.cells[c].bold = true;
                winners += 1;
            }
        }
        if winners > 1 {
            warnings.push(format!(
                "tie for best {} {} at {:.2} ({winners} cells)",
                column.metric.label(),
                column.direction,
                best as f64 / 100.0
            ));
        }
        for m in &models {
            let block: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].model == *m).collect();
            if block.len() < 2 && !single_block {
                continue;
            }
            let block_best = block
                .iter()
                .map(|&i| cents(rows[i].cells[c].value))
                .max()
                .expect("non-empty");
            for &i in &block {
                if cents(rows[i].cells[c].value) == block_best {
                    rows[i].cells[c].underline = true;
                }
            }
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ScoreTable {
        layout,
        columns,
        rows,
        warnings,
    })
}
