//! Experiment data model: outcomes, binary treatments, optional covariates.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Data from a completely randomized experiment.
///
/// Immutable after construction; all estimators take it by shared reference.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    y: Vec<f64>,
    t: Vec<u8>,
    x: Option<Vec<Vec<f64>>>,
    n1: usize,
    n0: usize,
}

impl ExperimentData {
    /// Validates lengths, binary treatments and finite outcomes.
    ///
    /// Requires at least one treated and one control unit.
    pub fn new(y: Vec<f64>, t: Vec<u8>, x: Option<Vec<Vec<f64>>>) -> Result<Self> {
        if y.len() != t.len() {
            return Err(Error::Input(format!(
                "outcome and treatment vectors differ in length ({} vs {})",
                y.len(),
                t.len()
            )));
        }
        if y.is_empty() {
            return Err(Error::DegenerateData("no units".into()));
        }
        if let Some(rows) = &x {
            if rows.len() != y.len() {
                return Err(Error::Input(format!(
                    "covariate matrix has {} rows for {} units",
                    rows.len(),
                    y.len()
                )));
            }
            let d = rows[0].len();
            if rows.iter().any(|r| r.len() != d) {
                return Err(Error::Input("ragged covariate matrix".into()));
            }
            if rows.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Input("non-finite covariate value".into()));
            }
        }
        if t.iter().any(|&ti| ti > 1) {
            return Err(Error::Input("treatment indicator outside {0,1}".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite outcome value".into()));
        }
        let n1 = t.iter().filter(|&&ti| ti == 1).count();
        let n0 = y.len() - n1;
        if n1 == 0 || n0 == 0 {
            return Err(Error::DegenerateData(format!(
                "need at least one treated and one control unit (n1={n1}, n0={n0})"
            )));
        }
        Ok(Self { y, t, x, n1, n0 })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn t(&self) -> &[u8] {
        &self.t
    }

    pub fn x(&self) -> Option<&Vec<Vec<f64>>> {
        self.x.as_ref()
    }

    pub fn n_covariates(&self) -> usize {
        self.x.as_ref().map_or(0, |rows| rows[0].len())
    }

    /// Mean outcome in the treated arm.
    pub fn treated_mean(&self) -> f64 {
        let s: f64 = self.y.iter().zip(&self.t).filter(|(_, &t)| t == 1).map(|(y, _)| y).sum();
        s / self.n1 as f64
    }

    /// Mean outcome in the control arm.
    pub fn control_mean(&self) -> f64 {
        let s: f64 = self.y.iter().zip(&self.t).filter(|(_, &t)| t == 0).map(|(y, _)| y).sum();
        s / self.n0 as f64
    }

    /// Difference-in-means estimate of the average treatment effect.
    pub fn diff_in_means(&self) -> f64 {
        self.treated_mean() - self.control_mean()
    }

    /// Row subset in the given index order. Covariates come along when present.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let y = idx.iter().map(|&i| self.y[i]).collect();
        let t = idx.iter().map(|&i| self.t[i]).collect();
        let x = self.x.as_ref().map(|rows| idx.iter().map(|&i| rows[i].clone()).collect());
        Self::new(y, t, x)
    }
}

/// Shifts every outcome by a constant so that the sum of the two arm means is zero.
///
/// Returns the centered copy together with the applied shift. Idempotent: centering
/// already-centered data applies a zero shift.
pub fn center_outcomes(data: &ExperimentData) -> (ExperimentData, f64) {
    let delta = -(data.treated_mean() + data.control_mean()) / 2.0;
    let mut out = data.clone();
    if delta != 0.0 {
        for v in &mut out.y {
            *v += delta;
        }
    }
    (out, delta)
}

/// Column names used when loading a CSV experiment file.
#[derive(Debug, Clone)]
pub struct ColumnSpec {
    pub y: String,
    pub t: String,
    /// Per-unit scoring columns (one per rule of interest).
    pub rules: Vec<String>,
    /// Covariate columns, in the order they should appear in the matrix.
    pub covariates: Vec<String>,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self { y: "y".into(), t: "t".into(), rules: Vec::new(), covariates: Vec::new() }
    }
}

/// A loaded experiment plus any requested per-unit score columns.
#[derive(Debug, Clone)]
pub struct LoadedExperiment {
    pub data: ExperimentData,
    /// Score vectors, in the order of `ColumnSpec::rules`.
    pub rule_scores: Vec<Vec<f64>>,
    /// Rows dropped because a required field was missing or unparseable.
    pub rejected_rows: usize,
}

/// Loads an experiment from CSV with a header row.
///
/// Treatment values must be literally `0` or `1`; anything else is an input error.
/// Rows with a missing required field are rejected (counted, not loaded).
pub fn load_experiment<R: Read>(reader: R, spec: &ColumnSpec) -> Result<LoadedExperiment> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Input(format!("missing column `{name}`")))
    };
    let y_col = col(&spec.y)?;
    let t_col = col(&spec.t)?;
    let rule_cols = spec.rules.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;
    let x_cols = spec.covariates.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;

    let mut y = Vec::new();
    let mut t = Vec::new();
    let mut scores: Vec<Vec<f64>> = vec![Vec::new(); rule_cols.len()];
    let mut x: Vec<Vec<f64>> = Vec::new();
    let mut rejected = 0usize;

    'rows: for record in rdr.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");

        let t_raw = field(t_col);
        if t_raw.is_empty() {
            rejected += 1;
            continue;
        }
        let ti = match t_raw {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::Input(format!(
                    "treatment column `{}` contains `{other}`; only 0/1 allowed",
                    spec.t
                )))
            }
        };

        let parse = |raw: &str| -> Option<f64> {
            raw.parse::<f64>().ok().filter(|v| v.is_finite())
        };
        let yi = match parse(field(y_col)) {
            Some(v) => v,
            None => {
                rejected += 1;
                continue;
            }
        };
        let mut row_scores = Vec::with_capacity(rule_cols.len());
        for &c in &rule_cols {
            match parse(field(c)) {
                Some(v) => row_scores.push(v),
                None => {
                    rejected += 1;
                    continue 'rows;
                }
            }
        }
        let mut row_x = Vec::with_capacity(x_cols.len());
        for &c in &x_cols {
            match parse(field(c)) {
                Some(v) => row_x.push(v),
                None => {
                    rejected += 1;
                    continue 'rows;
                }
            }
        }

        y.push(yi);
        t.push(ti);
        for (store, v) in scores.iter_mut().zip(row_scores) {
            store.push(v);
        }
        if !x_cols.is_empty() {
            x.push(row_x);
        }
    }

    if y.is_empty() {
        return Err(Error::DegenerateData("no usable rows in input".into()));
    }
    let n1 = t.iter().filter(|&&v| v == 1).count();
    let n0 = y.len() - n1;
    if n1 < 2 || n0 < 2 {
        return Err(Error::DegenerateData(format!(
            "need at least 2 treated and 2 control units (n1={n1}, n0={n0})"
        )));
    }
    let data = ExperimentData::new(y, t, if x.is_empty() { None } else { Some(x) })?;
    Ok(LoadedExperiment { data, rule_scores: scores, rejected_rows: rejected })
}

/// Convenience wrapper over [`load_experiment`] for a file path.
pub fn load_experiment_path(path: &Path, spec: &ColumnSpec) -> Result<LoadedExperiment> {
    let file = std::fs::File::open(path)?;
    load_experiment(file, spec)
}
