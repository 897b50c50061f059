//! Orthogonal arrays and main-effect analysis.
//!
//! Each row of an [`OrthogonalArray`] is one candidate to test; each column
//! is one variable. After the rows are scored, the mean score of every
//! (variable, value) pair is its main effect, and the predicted best candidate
//! takes the value with the largest main effect for each variable.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::genome::{Candidate, SearchSpace};

const ORTHOGONALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrthogonalArray {
    levels: Vec<usize>,
    rows: Vec<Vec<usize>>,
    comments: Vec<String>,
}

impl OrthogonalArray {
    /// Builds a rectangular array. Value ranges are checked by [`validate`].
    ///
    /// [`validate`]: OrthogonalArray::validate
    pub fn new(levels: Vec<usize>, rows: Vec<Vec<usize>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Validation("array has no columns".into()));
        }
        if rows.is_empty() {
            return Err(Error::Validation("array has no rows".into()));
        }
        if let Some((i, r)) = rows
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != levels.len())
        {
            return Err(Error::Validation(format!(
                "row {} has {} entries, expected {}",
                i + 1,
                r.len(),
                levels.len()
            )));
        }
        Ok(Self {
            levels,
            rows,
            comments: Vec::new(),
        })
    }

    /// Parses and validates the text form. Fails if any property is violated.
    pub fn load(text: &str) -> Result<Self> {
        let array = Self::parse(text)?;
        let report = array.validate();
        if !report.is_valid() {
            return Err(Error::Validation(report.failure_summary()));
        }
        Ok(array)
    }

    /// Parses without validating. Full-line comments before the level header
    /// are kept so that [`to_text`](Self::to_text) reproduces them.
    pub fn parse(text: &str) -> Result<Self> {
        let mut comments = Vec::new();
        let mut levels: Option<Vec<usize>> = None;
        let mut rows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            if levels.is_none() && raw.trim_start().starts_with('#') {
                comments.push(raw.to_string());
                continue;
            }
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let values = content
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("`{tok}` is not a non-negative integer"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            match &levels {
                None => {
                    if let Some(&k) = values.iter().find(|&&k| k < 2) {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("column level {k} is below 2"),
                        });
                    }
                    levels = Some(values);
                }
                Some(l) if values.len() != l.len() => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected {} values, found {}", l.len(), values.len()),
                    });
                }
                Some(_) => rows.push(values),
            }
        }
        let levels = levels.ok_or(Error::Parse {
            line: 0,
            message: "missing level header".into(),
        })?;
        let mut array = Self::new(levels, rows)?;
        array.comments = comments;
        Ok(array)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str(c);
            out.push('\n');
        }
        for line in std::iter::once(&self.levels).chain(&self.rows) {
            let mut first = true;
            for v in line {
                if !first {
                    out.push(' ');
                }
                first = false;
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.levels.len()
    }

    pub fn row_candidate(&self, row: usize) -> Candidate {
        Candidate(self.rows[row].clone())
    }

    pub fn candidates(&self) -> Vec<Candidate> {
        self.rows.iter().cloned().map(Candidate).collect()
    }

    pub fn matches(&self, space: &SearchSpace) -> Result<()> {
        if self.levels != space.cardinalities() {
            return Err(Error::ArrayMismatch(format!(
                "array levels {:?} differ from space {}",
                self.levels, space
            )));
        }
        Ok(())
    }

    fn column(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().map(move |r| r[c])
    }

    fn counts(&self, c: usize) -> Vec<usize> {
        let mut counts = vec![0; self.levels[c]];
        for v in self.column(c) {
            if v < counts.len() {
                counts[v] += 1;
            }
        }
        counts
    }

    fn centered_dot(&self, a: usize, b: usize) -> f64 {
        let n = self.rows.len() as f64;
        let mean = |c| self.column(c).map(|v| v as f64).sum::<f64>() / n;
        let (ma, mb) = (mean(a), mean(b));
        self.rows
            .iter()
            .map(|r| (r[a] as f64 - ma) * (r[b] as f64 - mb))
            .sum()
    }

    fn pair_balanced(&self, a: usize, b: usize) -> bool {
        let (ka, kb) = (self.levels[a], self.levels[b]);
        if !self.rows.len().is_multiple_of(ka * kb) {
            return false;
        }
        let mut counts = vec![0usize; ka * kb];
        for r in &self.rows {
            if r[a] >= ka || r[b] >= kb {
                return false;
            }
            counts[r[a] * kb + r[b]] += 1;
        }
        let want = self.rows.len() / (ka * kb);
        counts.iter().all(|&c| c == want)
    }

    /// Checks value range, per-column balance, and pairwise orthogonality of
    /// the mean-centred columns. Full pair balance is reported but does not
    /// affect validity.
    pub fn validate(&self) -> ValidationReport {
        let n = self.rows.len();
        let columns = 0..self.levels.len();

        let range = columns
            .clone()
            .filter(|&c| self.column(c).any(|v| v >= self.levels[c]))
            .collect::<Vec<_>>();

        let balance = columns
            .clone()
            .filter(|&c| {
                let counts = self.counts(c);
                !n.is_multiple_of(self.levels[c]) || counts.iter().any(|&k| k * self.levels[c] != n)
            })
            .collect::<Vec<_>>();

        let mut orthogonality = Vec::new();
        let mut pair_balance = Vec::new();
        for a in columns.clone() {
            for b in a + 1..self.levels.len() {
                if self.centered_dot(a, b).abs() > ORTHOGONALITY_TOL {
                    orthogonality.push((a, b));
                }
                if !self.pair_balanced(a, b) {
                    pair_balance.push((a, b));
                }
            }
        }

        ValidationReport {
            range: ColumnCheck::new(range),
            balance: ColumnCheck::new(balance),
            orthogonality: PairCheck::new(orthogonality),
            pair_balance: PairCheck::new(pair_balance),
        }
    }

    fn check_scores(&self, scores: &[f64]) -> Result<()> {
        if scores.len() != self.rows.len() {
            return Err(Error::IndexOutOfRange {
                what: "score count",
                index: scores.len(),
                limit: self.rows.len(),
            });
        }
        Ok(())
    }

    /// Mean score of the rows whose `var`-th entry is `value`.
    pub fn main_effect(&self, scores: &[f64], var: usize, value: usize) -> Result<f64> {
        self.check_scores(scores)?;
        if var >= self.levels.len() {
            return Err(Error::IndexOutOfRange {
                what: "variable",
                index: var,
                limit: self.levels.len(),
            });
        }
        if value >= self.levels[var] {
            return Err(Error::IndexOutOfRange {
                what: "value",
                index: value,
                limit: self.levels[var],
            });
        }
        let (sum, count) = self
            .rows
            .iter()
            .zip(scores)
            .filter(|(r, _)| r[var] == value)
            .fold((0.0, 0usize), |(s, n), (_, &x)| (s + x, n + 1));
        if count == 0 {
            return Err(Error::Validation(format!(
                "value {value} of variable {var} never appears"
            )));
        }
        Ok(sum / count as f64)
    }

    pub fn effect_table(&self, scores: &[f64]) -> Result<EffectTable> {
        self.check_scores(scores)?;
        let mut sums: Vec<Vec<f64>> = self.levels.iter().map(|&k| vec![0.0; k]).collect();
        let mut counts: Vec<Vec<usize>> = self.levels.iter().map(|&k| vec![0; k]).collect();
        for (row, &score) in self.rows.iter().zip(scores) {
            for (var, &v) in row.iter().enumerate() {
                if v < self.levels[var] {
                    sums[var][v] += score;
                    counts[var][v] += 1;
                }
            }
        }
        let means = sums
            .iter()
            .zip(&counts)
            .map(|(s, n)| {
                s.iter()
                    .zip(n)
                    .map(|(&s, &n)| if n == 0 { f64::NAN } else { s / n as f64 })
                    .collect()
            })
            .collect();
        Ok(EffectTable { means, counts })
    }

    /// Per variable, the value with the highest main effect.
    pub fn predict_best(&self, scores: &[f64]) -> Result<Candidate> {
        let table = self.effect_table(scores)?;
        Ok(Candidate(
            table
                .means
                .iter()
                .map(|means| argmax_first(means))
                .collect(),
        ))
    }

    /// The highest-scoring row, earliest on ties.
    pub fn best_tested(&self, scores: &[f64]) -> Result<Candidate> {
        self.check_scores(scores)?;
        Ok(self.row_candidate(argmax_first(scores)))
    }

    /// Replaces a 2-level column and a 3-level column by one 6-level column
    /// holding `3·v₂ + v₃`, placed where `col2` was.
    pub fn merge_columns(&self, col2: usize, col3: usize) -> Result<Self> {
        for c in [col2, col3] {
            if c >= self.levels.len() {
                return Err(Error::IndexOutOfRange {
                    what: "column",
                    index: c,
                    limit: self.levels.len(),
                });
            }
        }
        if col2 == col3 {
            return Err(Error::Merge("cannot merge a column with itself".into()));
        }
        if self.levels[col2] != 2 || self.levels[col3] != 3 {
            return Err(Error::Merge(format!(
                "need a 2-level and a 3-level column, got {} and {}",
                self.levels[col2], self.levels[col3]
            )));
        }
        if !self.pair_balanced(col2, col3) {
            return Err(Error::Merge(format!(
                "value pairs of columns {col2} and {col3} are unbalanced"
            )));
        }
        let keep = |c: usize| c != col3;
        let levels = self
            .levels
            .iter()
            .enumerate()
            .filter(|&(c, _)| keep(c))
            .map(|(c, &k)| if c == col2 { 6 } else { k })
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|&(c, _)| keep(c))
                    .map(|(c, &v)| if c == col2 { 3 * v + r[col3] } else { v })
                    .collect()
            })
            .collect();
        Self::new(levels, rows)
    }

    /// Projects onto the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.levels.len()) {
            return Err(Error::IndexOutOfRange {
                what: "column",
                index: c,
                limit: self.levels.len(),
            });
        }
        Self::new(
            columns.iter().map(|&c| self.levels[c]).collect(),
            self.rows
                .iter()
                .map(|r| columns.iter().map(|&c| r[c]).collect())
                .collect(),
        )
    }
}

fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] || xs[best].is_nan() && !x.is_nan() {
            best = i;
        }
    }
    best
}

/// Mean score and supporting row count per (variable, value).
#[derive(Debug, Clone, PartialEq)]
pub struct EffectTable {
    pub means: Vec<Vec<f64>>,
    pub counts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnCheck {
    pub passed: bool,
    pub offending: Vec<usize>,
}

impl ColumnCheck {
    fn new(offending: Vec<usize>) -> Self {
        Self {
            passed: offending.is_empty(),
            offending,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairCheck {
    pub passed: bool,
    pub offending: Vec<(usize, usize)>,
}

impl PairCheck {
    fn new(offending: Vec<(usize, usize)>) -> Self {
        Self {
            passed: offending.is_empty(),
            offending,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub range: ColumnCheck,
    pub balance: ColumnCheck,
    pub orthogonality: PairCheck,
    /// Informational: every value pair of every column pair equally frequent.
    pub pair_balance: PairCheck,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.range.passed && self.balance.passed && self.orthogonality.passed
    }

    pub fn failure_summary(&self) -> String {
        let mut parts = Vec::new();
        if !self.range.passed {
            parts.push(format!(
                "range violated in columns {:?}",
                self.range.offending
            ));
        }
        if !self.balance.passed {
            parts.push(format!(
                "balance violated in columns {:?}",
                self.balance.offending
            ));
        }
        if !self.orthogonality.passed {
            parts.push(format!(
                "orthogonality violated for column pairs {:?}",
                self.orthogonality.offending
            ));
        }
        parts.join("; ")
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = |ok: bool| if ok { "pass" } else { "FAIL" };
        writeln!(
            f,
            "range          {}  {:?}",
            status(self.range.passed),
            self.range.offending
        )?;
        writeln!(
            f,
            "balance        {}  {:?}",
            status(self.balance.passed),
            self.balance.offending
        )?;
        writeln!(
            f,
            "orthogonality  {}  {:?}",
            status(self.orthogonality.passed),
            self.orthogonality.offending
        )?;
        writeln!(
            f,
            "pair balance   {}  {:?} (informational)",
            if self.pair_balance.passed {
                "yes"
            } else {
                "no"
            },
            self.pair_balance.offending
        )?;
        write!(f, "valid: {}", self.is_valid())
    }
}

/// Arrays shipped with the crate.
pub mod bundled {
    use super::*;

    pub const L4: &str = include_str!("../data/arrays/l4_2-3.oa");
    pub const L9: &str = include_str!("../data/arrays/l9_3-4.oa");
    pub const L16: &str = include_str!("../data/arrays/l16_4-5.oa");
    pub const L36_BASE: &str = include_str!("../data/arrays/l36_2-11_3-12.oa");

    pub const NAMES: [&str; 5] = ["l4", "l9", "l16", "l36-base", "l36-mixed"];

    /// Column order applied to the L36 base before merging, so that the
    /// merged array follows the variable order `[3,6,2,3,6,2,2,6]`.
    const MIXED_SELECTION: [usize; 11] = [11, 0, 17, 1, 12, 9, 21, 3, 4, 2, 20];

    /// The 36-row design for `[3,6,2,3,6,2,2,6]`, built by merging three
    /// (2-level, 3-level) column pairs of the L36 base.
    pub fn mixed36() -> Result<OrthogonalArray> {
        let base = OrthogonalArray::load(L36_BASE)?;
        let mut a = base.select_columns(&MIXED_SELECTION)?;
        for (c2, c3) in [(9, 10), (5, 6), (1, 2)] {
            a = a.merge_columns(c2, c3)?;
        }
        Ok(a)
    }

    pub fn by_name(name: &str) -> Result<OrthogonalArray> {
        match name {
            "l4" => OrthogonalArray::load(L4),
            "l9" => OrthogonalArray::load(L9),
            "l16" => OrthogonalArray::load(L16),
            "l36-base" => OrthogonalArray::load(L36_BASE),
            "l36-mixed" => mixed36(),
            other => Err(Error::Config(format!("no bundled array named `{other}`"))),
        }
    }

    /// The bundled design whose levels equal the space's cardinalities.
    pub fn for_space(space: &SearchSpace) -> Option<OrthogonalArray> {
        NAMES
            .iter()
            .filter_map(|n| by_name(n).ok())
            .find(|a| a.levels() == space.cardinalities())
    }
}
