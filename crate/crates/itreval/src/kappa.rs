//! Plug-in group contrasts: difference-in-means estimates of the average
//! treatment effect within the groups a thresholded rule induces.

use crate::data::ExperimentData;
use crate::error::{Error, Result};
use crate::rule::priority_order;

/// Difference-in-means of the outcome between treated and control units within
/// the group `{i : f_i = group}`.
///
/// Returns `None` when either arm of the group is empty (not estimable).
pub fn kappa_hat(data: &ExperimentData, assignment: &[u8], group: u8) -> Option<f64> {
    let (mut s1, mut c1, mut s0, mut c0) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..data.n() {
        if assignment[i] != group {
            continue;
        }
        if data.t()[i] == 1 {
            s1 += data.y()[i];
            c1 += 1;
        } else {
            s0 += data.y()[i];
            c0 += 1;
        }
    }
    if c1 == 0 || c0 == 0 {
        return None;
    }
    Some(s1 / c1 as f64 - s0 / c0 as f64)
}

/// Group contrasts along the whole budget grid, with the extreme-cell
/// substitution policy applied.
///
/// `kappa1[z-1]` estimates the effect among the top-`z` priority units and
/// `kappa0[z-1]` among the rest, for `z = 1..n`. Near the extremes a group can
/// lack one of the experimental arms; whenever that happens the value is copied
/// from the nearest budget at which the contrast is estimable (from above for
/// the treated group, from below for its complement), so no entry ever divides
/// by zero.
#[derive(Debug, Clone)]
pub struct KappaProfile {
    pub kappa1: Vec<f64>,
    pub kappa0: Vec<f64>,
    /// Smallest z (1-based) at which the treated-group contrast was estimable.
    pub z_min: usize,
    /// Largest z (1-based) at which the complement-group contrast was estimable.
    pub z_max: usize,
    /// True when any entry was filled in by the substitution policy.
    pub substituted: bool,
}

impl KappaProfile {
    /// Contrast pair at the budget that treats `z` units (`z` may be 0, in
    /// which case the coupling coefficient in every variance formula vanishes
    /// and the boundary values are returned for completeness).
    pub fn at(&self, z: usize) -> (f64, f64) {
        let n = self.kappa1.len();
        if n == 0 {
            return (0.0, 0.0);
        }
        let z = z.clamp(1, n);
        (self.kappa1[z - 1], self.kappa0[z - 1])
    }
}

/// Builds the [`KappaProfile`] for a score vector over the full grid, in
/// O(n log n).
pub fn kappa_profile(data: &ExperimentData, scores: &[f64]) -> Result<KappaProfile> {
    let n = data.n();
    if scores.len() != n {
        return Err(Error::Input(format!("{} scores for {n} units", scores.len())));
    }
    let order = priority_order(scores);

    // prefix sums over the priority order
    let mut top_sum1 = 0.0;
    let mut top_cnt1 = 0usize;
    let mut top_sum0 = 0.0;
    let mut top_cnt0 = 0usize;
    let (mut tot_sum1, mut tot_cnt1, mut tot_sum0, mut tot_cnt0) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..n {
        if data.t()[i] == 1 {
            tot_sum1 += data.y()[i];
            tot_cnt1 += 1;
        } else {
            tot_sum0 += data.y()[i];
            tot_cnt0 += 1;
        }
    }

    let mut kappa1_raw: Vec<Option<f64>> = Vec::with_capacity(n);
    let mut kappa0_raw: Vec<Option<f64>> = Vec::with_capacity(n);
    for z in 1..=n {
        let unit = order[z - 1];
        if data.t()[unit] == 1 {
            top_sum1 += data.y()[unit];
            top_cnt1 += 1;
        } else {
            top_sum0 += data.y()[unit];
            top_cnt0 += 1;
        }
        kappa1_raw.push(if top_cnt1 > 0 && top_cnt0 > 0 {
            Some(top_sum1 / top_cnt1 as f64 - top_sum0 / top_cnt0 as f64)
        } else {
            None
        });
        let (rest_cnt1, rest_cnt0) = (tot_cnt1 - top_cnt1, tot_cnt0 - top_cnt0);
        kappa0_raw.push(if rest_cnt1 > 0 && rest_cnt0 > 0 {
            Some(
                (tot_sum1 - top_sum1) / rest_cnt1 as f64
                    - (tot_sum0 - top_sum0) / rest_cnt0 as f64,
            )
        } else {
            None
        });
    }

    // top-group estimability grows with z, complement-group estimability
    // shrinks, so the estimable entries form a suffix / prefix respectively
    let z_min = kappa1_raw.iter().position(|v| v.is_some()).map(|i| i + 1);
    let z_max = kappa0_raw.iter().rposition(|v| v.is_some()).map(|i| i + 1);
    let (Some(z_min), Some(z_max)) = (z_min, z_max) else {
        return Err(Error::DegenerateData(
            "no budget level yields an estimable group contrast".into(),
        ));
    };

    let mut substituted = false;
    let fill1 = kappa1_raw[z_min - 1].unwrap();
    let kappa1: Vec<f64> = kappa1_raw
        .iter()
        .map(|v| {
            v.unwrap_or_else(|| {
                substituted = true;
                fill1
            })
        })
        .collect();
    let fill0 = kappa0_raw[z_max - 1].unwrap();
    let kappa0: Vec<f64> = kappa0_raw
        .iter()
        .map(|v| {
            v.unwrap_or_else(|| {
                substituted = true;
                fill0
            })
        })
        .collect();

    Ok(KappaProfile { kappa1, kappa0, z_min, z_max, substituted })
}
