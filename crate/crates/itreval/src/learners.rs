//! Minimal pluggable scorers so cross-validation can be exercised without an
//! external ML stack.
//!
//! A learner is a deterministic map from training data to a scoring rule; the
//! fitted scorer then produces per-unit priorities on any evaluation set.
//! Budget logic stays out of here entirely.

use crate::data::ExperimentData;
use crate::error::{Error, Result};

/// Learner selection plus hyperparameters.
#[derive(Debug, Clone)]
pub enum LearnerSpec {
    /// Ignores the training data and scores units by their position in the
    /// original data set. Useful as a training-independent reference learner.
    ConstantScorer(Vec<f64>),
    /// Difference in arm means within equal-width bins of one covariate.
    DiffMeansByBin { covariate: usize, bins: usize },
    /// Separate ridge regressions per arm; score = fitted treated outcome
    /// minus fitted control outcome. `covariates` restricts the fit to a
    /// column subset (all columns when `None`).
    LinearTLearner { ridge: f64, covariates: Option<Vec<usize>> },
}

impl LearnerSpec {
    /// Fits the learner on training data. Deterministic given the spec and the
    /// training set.
    pub fn fit(&self, train: &ExperimentData) -> Result<FittedScorer> {
        match self {
            LearnerSpec::ConstantScorer(scores) => {
                if scores.iter().any(|s| !s.is_finite()) {
                    return Err(Error::Input("constant scores must be finite".into()));
                }
                Ok(FittedScorer::Constant(scores.clone()))
            }
            LearnerSpec::DiffMeansByBin { covariate, bins } => {
                fit_binned(train, *covariate, *bins)
            }
            LearnerSpec::LinearTLearner { ridge, covariates } => {
                fit_linear_t(train, *ridge, covariates.as_deref())
            }
        }
    }
}

/// A fitted scoring rule.
#[derive(Debug, Clone)]
pub enum FittedScorer {
    /// Scores indexed by a unit's position in the original data set.
    Constant(Vec<f64>),
    Binned { covariate: usize, lo: f64, width: f64, bin_scores: Vec<f64> },
    Linear {
        columns: Vec<usize>,
        beta1: Vec<f64>,
        intercept1: f64,
        beta0: Vec<f64>,
        intercept0: f64,
    },
}

impl FittedScorer {
    /// Scores for the units of `data`. `global_idx[j]` gives the position of
    /// `data`'s j-th row in the original data set (used by the constant
    /// scorer; covariate-based scorers ignore it).
    pub fn scores(&self, data: &ExperimentData, global_idx: &[usize]) -> Result<Vec<f64>> {
        if global_idx.len() != data.n() {
            return Err(Error::Input("index vector does not match data".into()));
        }
        match self {
            FittedScorer::Constant(all) => global_idx
                .iter()
                .map(|&g| {
                    all.get(g).copied().ok_or_else(|| {
                        Error::Input(format!("constant scorer has no entry for unit {g}"))
                    })
                })
                .collect(),
            FittedScorer::Binned { covariate, lo, width, bin_scores } => {
                let x = data
                    .x()
                    .ok_or_else(|| Error::Input("binned scorer needs covariates".into()))?;
                Ok((0..data.n())
                    .map(|i| {
                        let v = x[i][*covariate];
                        let b = if *width > 0.0 {
                            (((v - lo) / width).floor() as i64)
                                .clamp(0, bin_scores.len() as i64 - 1)
                                as usize
                        } else {
                            0
                        };
                        bin_scores[b]
                    })
                    .collect())
            }
            FittedScorer::Linear { columns, beta1, intercept1, beta0, intercept0 } => {
                let x = data
                    .x()
                    .ok_or_else(|| Error::Input("linear scorer needs covariates".into()))?;
                if columns.iter().any(|&c| c >= x[0].len()) {
                    return Err(Error::Input(format!(
                        "scorer uses covariate columns up to {}, data has {}",
                        columns.iter().max().unwrap(),
                        x[0].len()
                    )));
                }
                Ok((0..data.n())
                    .map(|i| {
                        let row = &x[i];
                        let f1: f64 = intercept1
                            + columns.iter().zip(beta1).map(|(&c, b)| row[c] * b).sum::<f64>();
                        let f0: f64 = intercept0
                            + columns.iter().zip(beta0).map(|(&c, b)| row[c] * b).sum::<f64>();
                        f1 - f0
                    })
                    .collect())
            }
        }
    }
}

fn fit_binned(train: &ExperimentData, covariate: usize, bins: usize) -> Result<FittedScorer> {
    let x = train.x().ok_or_else(|| Error::Input("binned learner needs covariates".into()))?;
    if covariate >= x[0].len() {
        return Err(Error::Input(format!("covariate index {covariate} out of range")));
    }
    if bins == 0 {
        return Err(Error::Input("bin count must be positive".into()));
    }
    let lo = x.iter().map(|r| r[covariate]).fold(f64::INFINITY, f64::min);
    let hi = x.iter().map(|r| r[covariate]).fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 0.0 };
    let overall = train.diff_in_means();
    let mut s1 = vec![0.0; bins];
    let mut c1 = vec![0usize; bins];
    let mut s0 = vec![0.0; bins];
    let mut c0 = vec![0usize; bins];
    for i in 0..train.n() {
        let b = if width > 0.0 {
            (((x[i][covariate] - lo) / width).floor() as i64).clamp(0, bins as i64 - 1) as usize
        } else {
            0
        };
        if train.t()[i] == 1 {
            s1[b] += train.y()[i];
            c1[b] += 1;
        } else {
            s0[b] += train.y()[i];
            c0[b] += 1;
        }
    }
    let bin_scores = (0..bins)
        .map(|b| {
            if c1[b] > 0 && c0[b] > 0 {
                s1[b] / c1[b] as f64 - s0[b] / c0[b] as f64
            } else {
                overall
            }
        })
        .collect();
    Ok(FittedScorer::Binned { covariate, lo, width, bin_scores })
}

/// Ridge fit of one arm: intercept unpenalized, covariates penalized by
/// `ridge`. Returns `(beta, intercept)`.
fn ridge_fit(rows: &[&Vec<f64>], ys: &[f64], ridge: f64) -> Result<(Vec<f64>, f64)> {
    let d = rows[0].len();
    let m = d + 1; // intercept last
    let mut ata = vec![vec![0.0; m]; m];
    let mut aty = vec![0.0; m];
    for (row, &y) in rows.iter().zip(ys) {
        for a in 0..d {
            for b in 0..d {
                ata[a][b] += row[a] * row[b];
            }
            ata[a][d] += row[a];
            ata[d][a] += row[a];
            aty[a] += row[a] * y;
        }
        ata[d][d] += 1.0;
        aty[d] += y;
    }
    for a in 0..d {
        ata[a][a] += ridge;
    }
    let sol = solve_symmetric(&mut ata, &mut aty)?;
    let (beta, intercept) = sol.split_at(d);
    Ok((beta.to_vec(), intercept[0]))
}

/// Gaussian elimination with partial pivoting; errors on a singular system.
fn solve_symmetric(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>> {
    let m = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-12 * scale {
            return Err(Error::Fit(
                "singular design matrix; use a positive ridge penalty".into(),
            ));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..m {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..m {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; m];
    for col in (0..m).rev() {
        let mut acc = b[col];
        for k in (col + 1)..m {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

fn fit_linear_t(
    train: &ExperimentData,
    ridge: f64,
    covariates: Option<&[usize]>,
) -> Result<FittedScorer> {
    if ridge < 0.0 {
        return Err(Error::Input("ridge penalty must be nonnegative".into()));
    }
    let x = train.x().ok_or_else(|| Error::Input("linear learner needs covariates".into()))?;
    let all: Vec<usize> = (0..x[0].len()).collect();
    let columns: Vec<usize> = covariates.map(|c| c.to_vec()).unwrap_or(all);
    if columns.iter().any(|&c| c >= x[0].len()) {
        return Err(Error::Input("covariate subset index out of range".into()));
    }
    let d = columns.len();
    if d == 0 {
        return Err(Error::Input("covariate subset must be nonempty".into()));
    }
    let mut rows1 = Vec::new();
    let mut ys1 = Vec::new();
    let mut rows0 = Vec::new();
    let mut ys0 = Vec::new();
    for i in 0..train.n() {
        let row: Vec<f64> = columns.iter().map(|&c| x[i][c]).collect();
        if train.t()[i] == 1 {
            rows1.push(row);
            ys1.push(train.y()[i]);
        } else {
            rows0.push(row);
            ys0.push(train.y()[i]);
        }
    }
    if ridge == 0.0 && (rows1.len() < d + 1 || rows0.len() < d + 1) {
        return Err(Error::Fit(format!(
            "need at least {} units per arm for an unpenalized fit; use a positive ridge penalty",
            d + 1
        )));
    }
    let rows1_ref: Vec<&Vec<f64>> = rows1.iter().collect();
    let rows0_ref: Vec<&Vec<f64>> = rows0.iter().collect();
    let (beta1, intercept1) = ridge_fit(&rows1_ref, &ys1, ridge)?;
    let (beta0, intercept0) = ridge_fit(&rows0_ref, &ys0, ridge)?;
    Ok(FittedScorer::Linear { columns, beta1, intercept1, beta0, intercept0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_scorer_ignores_training_data() {
        let train =
            ExperimentData::new(vec![9.0, 8.0, 7.0, 6.0], vec![1, 0, 1, 0], None).unwrap();
        let scorer = LearnerSpec::ConstantScorer(vec![3.0, 1.0, 2.0]).fit(&train).unwrap();
        let eval = ExperimentData::new(vec![0.0, 0.0, 0.0], vec![1, 0, 1], None).unwrap();
        let s = scorer.scores(&eval, &[0, 1, 2]).unwrap();
        assert_eq!(s, vec![3.0, 1.0, 2.0]);
        let sub = eval.subset(&[1, 0]).unwrap();
        let s = scorer.scores(&sub, &[1, 0]).unwrap();
        assert_eq!(s, vec![1.0, 3.0]);
    }

    #[test]
    fn linear_t_learner_recovers_noiseless_interaction() {
        // y = 2 * t * x1, no noise: scores must order like x1
        let x: Vec<Vec<f64>> =
            (0..12).map(|i| vec![i as f64 - 6.0, ((i * 7) % 5) as f64]).collect();
        let y: Vec<f64> =
            x.iter().enumerate().map(|(i, r)| if i % 2 == 0 { 2.0 * r[0] } else { 0.0 }).collect();
        let t: Vec<u8> = (0..12).map(|i| if i % 2 == 0 { 1 } else { 0 }).collect();
        let train = ExperimentData::new(y, t, Some(x.clone())).unwrap();
        let scorer = LearnerSpec::LinearTLearner { ridge: 0.0, covariates: None }.fit(&train).unwrap();
        let idx: Vec<usize> = (0..12).collect();
        let s = scorer.scores(&train, &idx).unwrap();
        for i in 0..12 {
            assert!((s[i] - 2.0 * x[i][0]).abs() < 1e-8, "unit {i}: {} vs {}", s[i], 2.0 * x[i][0]);
        }
    }

    #[test]
    fn constant_outcomes_give_equal_scores() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let train =
            ExperimentData::new(vec![1.0; 8], vec![1, 0, 1, 0, 1, 0, 1, 0], Some(x)).unwrap();
        let scorer = LearnerSpec::LinearTLearner { ridge: 1e-8, covariates: None }.fit(&train).unwrap();
        let idx: Vec<usize> = (0..8).collect();
        let s = scorer.scores(&train, &idx).unwrap();
        for v in &s {
            assert!((v - s[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn singular_unpenalized_fit_asks_for_ridge() {
        // one covariate duplicated: singular normal equations at ridge 0
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let t: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        let train = ExperimentData::new(y, t, Some(x)).unwrap();
        let err = LearnerSpec::LinearTLearner { ridge: 0.0, covariates: None }.fit(&train).unwrap_err();
        assert!(matches!(err, Error::Fit(_)));
        assert!(LearnerSpec::LinearTLearner { ridge: 1e-8, covariates: None }.fit(&train).is_ok());
    }

    #[test]
    fn fit_is_invariant_to_training_row_order() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64).sin(), i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| (i as f64) * 0.5 + if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let t: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        let train = ExperimentData::new(y.clone(), t.clone(), Some(x.clone())).unwrap();
        let perm: Vec<usize> = vec![7, 2, 9, 0, 4, 1, 8, 3, 6, 5];
        let shuffled = train.subset(&perm).unwrap();
        let a = LearnerSpec::LinearTLearner { ridge: 1e-6, covariates: None }.fit(&train).unwrap();
        let b = LearnerSpec::LinearTLearner { ridge: 1e-6, covariates: None }.fit(&shuffled).unwrap();
        let idx: Vec<usize> = (0..10).collect();
        let sa = a.scores(&train, &idx).unwrap();
        let sb = b.scores(&train, &idx).unwrap();
        for (u, v) in sa.iter().zip(&sb) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn binned_learner_scores_by_bin_contrast() {
        // covariate 0 splits cleanly into two bins with opposite effects
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut t = Vec::new();
        for i in 0..20 {
            let low_bin = i < 10;
            x.push(vec![if low_bin { 0.0 } else { 1.0 } + (i % 5) as f64 * 1e-3]);
            let ti = (i % 2) as u8;
            t.push(ti);
            y.push(if low_bin { 2.0 * ti as f64 } else { -(ti as f64) });
        }
        let train = ExperimentData::new(y, t, Some(x)).unwrap();
        let scorer = LearnerSpec::DiffMeansByBin { covariate: 0, bins: 2 }.fit(&train).unwrap();
        let idx: Vec<usize> = (0..20).collect();
        let s = scorer.scores(&train, &idx).unwrap();
        assert!((s[0] - 2.0).abs() < 1e-12);
        assert!((s[19] + 1.0).abs() < 1e-12);
    }
}
