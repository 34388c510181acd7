//! Probability tables: one column per preparation, one group of rows per
//! intervention, one row per result.

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use thiserror::Error;

use crate::matrix::Matrix;
use crate::scalar::{Scalar, ValueMode};

/// Cells with fewer trials than this are flagged by [`table_from_counts`].
pub const LOW_COUNT_THRESHOLD: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterventionSpec {
    pub name: String,
    pub results: Vec<String>,
}

impl InterventionSpec {
    pub fn new(name: impl Into<String>, results: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            name: name.into(),
            results: results.into_iter().map(Into::into).collect(),
        }
    }
}

/// Labels and row grouping of a table, shared by tables and decompositions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableLayout {
    preparations: Vec<String>,
    interventions: Vec<InterventionSpec>,
    /// Row offset of each intervention, plus the total row count at the end.
    offsets: Vec<usize>,
}

impl TableLayout {
    /// Fails on empty or duplicated labels.
    pub fn new(
        preparations: Vec<String>,
        interventions: Vec<InterventionSpec>,
    ) -> Result<Self, TableError> {
        let findings = layout_findings(&preparations, &interventions);
        if let Some(f) = findings.into_iter().next() {
            return Err(f.into());
        }
        Ok(Self::unchecked(preparations, interventions))
    }

    fn unchecked(preparations: Vec<String>, interventions: Vec<InterventionSpec>) -> Self {
        let mut offsets = Vec::with_capacity(interventions.len() + 1);
        let mut acc = 0;
        for spec in &interventions {
            offsets.push(acc);
            acc += spec.results.len();
        }
        offsets.push(acc);
        Self { preparations, interventions, offsets }
    }

    pub fn preparations(&self) -> &[String] {
        &self.preparations
    }

    pub fn interventions(&self) -> &[InterventionSpec] {
        &self.interventions
    }

    /// L, the total number of results.
    pub fn num_rows(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    /// M, the number of preparations.
    pub fn num_cols(&self) -> usize {
        self.preparations.len()
    }

    pub fn intervention_rows(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Intervention index and position within it for table row `row`.
    pub fn locate_row(&self, row: usize) -> (usize, usize) {
        let k = self.offsets.partition_point(|&o| o <= row) - 1;
        (k, row - self.offsets[k])
    }

    pub fn row_label(&self, row: usize) -> (&str, &str) {
        let (k, i) = self.locate_row(row);
        let spec = &self.interventions[k];
        (&spec.name, &spec.results[i])
    }

    pub fn preparation_index(&self, label: &str) -> Option<usize> {
        self.preparations.iter().position(|p| p == label)
    }

    pub fn intervention_index(&self, name: &str) -> Option<usize> {
        self.interventions.iter().position(|s| s.name == name)
    }

    pub fn row_index(&self, intervention: &str, result: &str) -> Option<usize> {
        let k = self.intervention_index(intervention)?;
        let i = self.interventions[k].results.iter().position(|r| r == result)?;
        Some(self.offsets[k] + i)
    }
}

/// A single invariant violation.
#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    DimensionMismatch { expected: (usize, usize), found: (usize, usize) },
    EmptyIntervention { intervention: String },
    DuplicateLabel { namespace: String, label: String },
    NoPreparations,
    EntryOutOfRange { row: usize, col: usize, value: String },
    ColumnNotNormalized { intervention: String, preparation: String, sum: String },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::DimensionMismatch { expected, found } => write!(
                f,
                "entry grid is {}x{}, layout requires {}x{}",
                found.0, found.1, expected.0, expected.1
            ),
            Finding::EmptyIntervention { intervention } => {
                write!(f, "intervention `{intervention}` has no results")
            }
            Finding::DuplicateLabel { namespace, label } => {
                write!(f, "duplicate label `{label}` among {namespace}")
            }
            Finding::NoPreparations => write!(f, "table has no preparations"),
            Finding::EntryOutOfRange { row, col, value } => {
                write!(f, "entry ({row}, {col}) = {value} is outside [0, 1]")
            }
            Finding::ColumnNotNormalized { intervention, preparation, sum } => write!(
                f,
                "results of `{intervention}` sum to {sum} for preparation `{preparation}`"
            ),
        }
    }
}

/// Non-fatal observations about a table.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    LowCount { intervention: String, preparation: String, trials: u64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::LowCount { intervention, preparation, trials } => write!(
                f,
                "only {trials} trial(s) of `{intervention}` on `{preparation}`"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("entry ({row}, {col}) = {value} is outside [0, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: String },
    #[error("column not normalized: results of `{intervention}` sum to {sum} for `{preparation}`")]
    ColumnNotNormalized { intervention: String, preparation: String, sum: String },
    #[error("invalid labels: {0}")]
    InvalidLabels(String),
    #[error("no trials of `{intervention}` on `{preparation}`")]
    EmptyCell { intervention: String, preparation: String },
}

impl From<Finding> for TableError {
    fn from(f: Finding) -> Self {
        match f {
            Finding::EntryOutOfRange { row, col, value } => {
                TableError::EntryOutOfRange { row, col, value }
            }
            Finding::ColumnNotNormalized { intervention, preparation, sum } => {
                TableError::ColumnNotNormalized { intervention, preparation, sum }
            }
            f @ Finding::DimensionMismatch { .. } => TableError::DimensionMismatch(f.to_string()),
            other => TableError::InvalidLabels(other.to_string()),
        }
    }
}

fn layout_findings(preparations: &[String], interventions: &[InterventionSpec]) -> Vec<Finding> {
    let mut out = Vec::new();
    if preparations.is_empty() {
        out.push(Finding::NoPreparations);
    }
    let mut seen = HashSet::new();
    for p in preparations {
        if !seen.insert(p.as_str()) {
            out.push(Finding::DuplicateLabel { namespace: "preparations".into(), label: p.clone() });
        }
    }
    let mut names = HashSet::new();
    for spec in interventions {
        if !names.insert(spec.name.as_str()) {
            out.push(Finding::DuplicateLabel {
                namespace: "interventions".into(),
                label: spec.name.clone(),
            });
        }
        if spec.results.is_empty() {
            out.push(Finding::EmptyIntervention { intervention: spec.name.clone() });
        }
        let mut results = HashSet::new();
        for r in &spec.results {
            if !results.insert(r.as_str()) {
                out.push(Finding::DuplicateLabel {
                    namespace: format!("results of `{}`", spec.name),
                    label: r.clone(),
                });
            }
        }
    }
    out
}

/// Unvalidated table contents, as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable<T> {
    pub preparations: Vec<String>,
    pub interventions: Vec<InterventionSpec>,
    pub entries: Matrix<T>,
}

impl<T: Scalar> RawTable<T> {
    /// Lists every violated invariant. Range and normalization checks are
    /// exact for rationals; floats allow `norm_tol` slack.
    pub fn validate(&self, norm_tol: f64) -> ValidationReport {
        let mut findings = layout_findings(&self.preparations, &self.interventions);
        let layout = TableLayout::unchecked(self.preparations.clone(), self.interventions.clone());
        let expected = (layout.num_rows(), layout.num_cols());
        let found = (self.entries.rows(), self.entries.cols());
        if expected != found {
            findings.push(Finding::DimensionMismatch { expected, found });
            return ValidationReport { findings, warnings: Vec::new() };
        }
        let slack = match T::MODE {
            ValueMode::Exact => T::zero(),
            ValueMode::Float => T::from_f64(norm_tol).unwrap_or_else(T::zero),
        };
        let lower = T::zero() - slack.clone();
        let upper = T::one() + slack;
        for i in 0..found.0 {
            for j in 0..found.1 {
                let v = &self.entries[(i, j)];
                if !(*v >= lower && *v <= upper) {
                    findings.push(Finding::EntryOutOfRange { row: i, col: j, value: v.to_string() });
                }
            }
        }
        for (k, spec) in self.interventions.iter().enumerate() {
            for (j, prep) in self.preparations.iter().enumerate() {
                let sum = layout
                    .intervention_rows(k)
                    .fold(T::zero(), |acc, i| acc + self.entries[(i, j)].clone());
                if !sum.approx_eq(&T::one(), norm_tol) {
                    findings.push(Finding::ColumnNotNormalized {
                        intervention: spec.name.clone(),
                        preparation: prep.clone(),
                        sum: sum.to_string(),
                    });
                }
            }
        }
        ValidationReport { findings, warnings: Vec::new() }
    }

    pub fn into_table(self, norm_tol: f64) -> Result<ProbabilityTable<T>, TableError> {
        if let Some(f) = self.validate(norm_tol).findings.into_iter().next() {
            return Err(f.into());
        }
        Ok(ProbabilityTable {
            layout: TableLayout::unchecked(self.preparations, self.interventions),
            entries: self.entries,
        })
    }
}

/// A validated probability table. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable<T> {
    layout: TableLayout,
    entries: Matrix<T>,
}

impl<T: Scalar> ProbabilityTable<T> {
    /// Validates and builds a table; reports the first violated invariant.
    pub fn build(
        preparations: Vec<String>,
        interventions: Vec<InterventionSpec>,
        entries: Matrix<T>,
        norm_tol: f64,
    ) -> Result<Self, TableError> {
        RawTable { preparations, interventions, entries }.into_table(norm_tol)
    }

    pub fn from_layout(layout: TableLayout, entries: Matrix<T>, norm_tol: f64) -> Result<Self, TableError> {
        Self::build(layout.preparations, layout.interventions, entries, norm_tol)
    }

    pub fn layout(&self) -> &TableLayout {
        &self.layout
    }

    pub fn entries(&self) -> &Matrix<T> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.entries[(row, col)]
    }

    pub fn mode(&self) -> ValueMode {
        T::MODE
    }

    pub fn num_rows(&self) -> usize {
        self.layout.num_rows()
    }

    pub fn num_cols(&self) -> usize {
        self.layout.num_cols()
    }

    pub fn to_raw(&self) -> RawTable<T> {
        RawTable {
            preparations: self.layout.preparations.clone(),
            interventions: self.layout.interventions.clone(),
            entries: self.entries.clone(),
        }
    }

    pub fn to_f64(&self) -> ProbabilityTable<f64> {
        ProbabilityTable { layout: self.layout.clone(), entries: self.entries.to_f64() }
    }
}

/// Estimates a table from observed result counts.
///
/// `counts` has the same shape as the table: one row per result, one column
/// per preparation. Every (intervention, preparation) cell needs at least one
/// trial; cells with fewer than [`LOW_COUNT_THRESHOLD`] trials are reported
/// as warnings.
pub fn table_from_counts<T: Scalar>(
    counts: &Matrix<u64>,
    preparations: Vec<String>,
    interventions: Vec<InterventionSpec>,
) -> Result<(ProbabilityTable<T>, ValidationReport), TableError> {
    let layout = TableLayout::new(preparations, interventions)?;
    if (counts.rows(), counts.cols()) != (layout.num_rows(), layout.num_cols()) {
        return Err(Finding::DimensionMismatch {
            expected: (layout.num_rows(), layout.num_cols()),
            found: (counts.rows(), counts.cols()),
        }
        .into());
    }
    let mut entries = Matrix::<T>::zeros(counts.rows(), counts.cols());
    let mut warnings = Vec::new();
    for (k, spec) in layout.interventions.iter().enumerate() {
        let rows = layout.intervention_rows(k);
        for (j, prep) in layout.preparations.iter().enumerate() {
            let total: u64 = rows.clone().map(|i| counts[(i, j)]).sum();
            if total == 0 {
                return Err(TableError::EmptyCell {
                    intervention: spec.name.clone(),
                    preparation: prep.clone(),
                });
            }
            if total < LOW_COUNT_THRESHOLD {
                warnings.push(Warning::LowCount {
                    intervention: spec.name.clone(),
                    preparation: prep.clone(),
                    trials: total,
                });
            }
            for i in rows.clone() {
                entries[(i, j)] = T::from_u64(counts[(i, j)]) / T::from_u64(total);
            }
        }
    }
    let table = ProbabilityTable::from_layout(layout, entries, crate::Tolerances::default().norm)?;
    Ok((table, ValidationReport { findings: Vec::new(), warnings }))
}
