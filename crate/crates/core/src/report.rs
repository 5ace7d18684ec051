//! Comparison tables: one row per algorithm, one column per feature set,
//! a star on cells significantly better than the baseline and bold on the
//! lowest score of the whole table.
//!
//! Scores print with two decimals, ties rounding away from zero on the
//! shortest decimal form of the value. Bolding compares the printed values,
//! so every cell that prints as the minimum is bold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Metric;
use crate::ingest::View;

/// Name of the baseline row.
pub const BASELINE_NAME: &str = "ZeroR";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub score: f64,
    pub starred: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub algorithm: String,
    pub cells: Vec<TableCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    metric: Metric,
    view: View,
    feature_sets: Vec<String>,
    baseline: Vec<f64>,
    rows: Vec<TableRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Markdown,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("unknown table format {other:?}"))),
        }
    }
}

impl ComparisonTable {
    /// Full grid: one baseline score and one cell per row for every feature
    /// set, all finite.
    pub fn new(
        metric: Metric,
        view: View,
        feature_sets: Vec<String>,
        baseline: Vec<f64>,
        rows: Vec<TableRow>,
    ) -> Result<Self> {
        if feature_sets.is_empty() {
            return Err(Error::EmptyInput("comparison table has no columns".into()));
        }
        let width = feature_sets.len();
        if baseline.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: baseline.len(),
            });
        }
        for r in &rows {
            if r.cells.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    found: r.cells.len(),
                });
            }
        }
        let finite = baseline.iter().all(|v| v.is_finite())
            && rows.iter().flat_map(|r| &r.cells).all(|c| c.score.is_finite());
        if !finite {
            return Err(Error::Config("comparison table holds a non-finite score".into()));
        }
        Ok(ComparisonTable {
            metric,
            view,
            feature_sets,
            baseline,
            rows,
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn feature_sets(&self) -> &[String] {
        &self.feature_sets
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    /// Rows as printed: baseline first (never starred), then the others.
    pub fn display_rows(&self) -> Vec<TableRow> {
        let base = TableRow {
            algorithm: BASELINE_NAME.into(),
            cells: self
                .baseline
                .iter()
                .map(|&score| TableCell {
                    score,
                    starred: false,
                })
                .collect(),
        };
        std::iter::once(base).chain(self.rows.iter().cloned()).collect()
    }

    /// `(display row, column)` of every cell printing as the table minimum.
    pub fn bold(&self) -> Vec<(usize, usize)> {
        let rows = self.display_rows();
        let min = rows
            .iter()
            .flat_map(|r| r.cells.iter().map(|c| cents(c.score)))
            .min();
        let mut out = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, c) in r.cells.iter().enumerate() {
                if Some(cents(c.score)) == min {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// The cell at `(algorithm, feature set label)`, baseline included.
    pub fn cell(&self, algorithm: &str, feature_set: &str) -> Option<TableCell> {
        let col = self.feature_sets.iter().position(|s| s == feature_set)?;
        self.display_rows()
            .into_iter()
            .find(|r| r.algorithm == algorithm)
            .map(|r| r.cells[col])
    }

    pub fn caption(&self) -> String {
        let metric = match self.metric {
            Metric::Mae => "Mean Absolute Error (MAE)",
            Metric::Rmse => "Root Mean Squared Error (RMSE)",
        };
        let view = match self.view {
            View::AllHumans => "all human-operated accounts",
            View::CredulousOnly => "credulous users",
        };
        format!("{metric} on {view}")
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Markdown => self.render_markdown(),
            Format::Csv => self.render_csv(),
        }
    }

    pub fn render_markdown(&self) -> String {
        let bold = self.bold();
        let mut out = format!("{}\n\n| Algorithm |", self.caption());
        for s in &self.feature_sets {
            out.push_str(&format!(" {s} |"));
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(self.feature_sets.len()));
        out.push('\n');
        for (i, r) in self.display_rows().iter().enumerate() {
            out.push_str(&format!("| {} |", r.algorithm));
            for (j, c) in r.cells.iter().enumerate() {
                let text = format_score(c.score);
                let star = if c.starred { "\\*" } else { "" };
                if bold.contains(&(i, j)) {
                    out.push_str(&format!(" **{text}**{star} |"));
                } else {
                    out.push_str(&format!(" {text}{star} |"));
                }
            }
            out.push('\n');
        }
        out
    }

    /// CSV `algorithm,feature_set,score,starred,bold`, baseline rows first.
    pub fn render_csv(&self) -> String {
        let bold = self.bold();
        let mut out = String::from("algorithm,feature_set,score,starred,bold\n");
        for (i, r) in self.display_rows().iter().enumerate() {
            for (j, c) in r.cells.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    csv_field(&r.algorithm),
                    csv_field(&self.feature_sets[j]),
                    format_score(c.score),
                    c.starred,
                    bold.contains(&(i, j))
                ));
            }
        }
        out
    }

    /// Reads back [`ComparisonTable::render_csv`] output. Column and row
    /// order follow first appearance; the `bold` column is recomputed, not
    /// trusted.
    pub fn parse_csv(text: &str, metric: Metric, view: View) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let parse = |line: usize, message: String| Error::Parse {
            file: "<table csv>".into(),
            line,
            message,
        };
        let headers = rdr.headers().map_err(|e| parse(1, e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["algorithm", "feature_set", "score", "starred", "bold"] {
            return Err(parse(1, "unexpected header".into()));
        }
        let mut sets: Vec<String> = Vec::new();
        let mut names: Vec<String> = Vec::new();
        let mut entries: Vec<(String, String, TableCell)> = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| parse(line, e.to_string()))?;
            let score: f64 = rec[2]
                .parse()
                .map_err(|_| parse(line, format!("bad score {:?}", &rec[2])))?;
            let starred: bool = rec[3]
                .parse()
                .map_err(|_| parse(line, format!("bad starred flag {:?}", &rec[3])))?;
            let (alg, set) = (rec[0].to_string(), rec[1].to_string());
            if !sets.contains(&set) {
                sets.push(set.clone());
            }
            if !names.contains(&alg) {
                names.push(alg.clone());
            }
            entries.push((alg, set, TableCell { score, starred }));
        }
        let lookup = |alg: &str, set: &str| {
            entries
                .iter()
                .find(|(a, s, _)| a == alg && s == set)
                .map(|(_, _, c)| *c)
                .ok_or_else(|| parse(0, format!("missing cell {alg} / {set}")))
        };
        let baseline = sets
            .iter()
            .map(|s| lookup(BASELINE_NAME, s).map(|c| c.score))
            .collect::<Result<Vec<f64>>>()?;
        let rows = names
            .iter()
            .filter(|n| n.as_str() != BASELINE_NAME)
            .map(|n| {
                Ok(TableRow {
                    algorithm: n.clone(),
                    cells: sets.iter().map(|s| lookup(n, s)).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ComparisonTable::new(metric, view, sets, baseline, rows)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Value in hundredths, rounded half away from zero on its shortest decimal
/// representation.
pub fn cents(x: f64) -> i64 {
    let text = format!("{}", x.abs());
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let digits: Vec<u32> = frac.chars().filter_map(|c| c.to_digit(10)).collect();
    let digit = |i: usize| digits.get(i).copied().unwrap_or(0) as i64;
    let mut c = int.parse::<i64>().unwrap_or(i64::MAX / 100) * 100 + digit(0) * 10 + digit(1);
    if digit(2) >= 5 {
        c += 1;
    }
    if x < 0.0 {
        -c
    } else {
        c
    }
}

/// Two-decimal fixed formatting with half-up rounding.
pub fn format_score(x: f64) -> String {
    let c = cents(x);
    let sign = if c < 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", c.abs() / 100, c.abs() % 100)
}
