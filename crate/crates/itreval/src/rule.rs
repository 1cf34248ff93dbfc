//! Treatment rules: fixed assignment vectors and scoring rules with budget
//! thresholding.

use crate::error::{Error, Result};

/// An individualized treatment rule.
///
/// A scoring rule carries a floor threshold `c*`: absent a budget, a unit is
/// treated exactly when its score strictly exceeds `c*`. Ties between scores are
/// broken by ascending unit index (lower index wins), which turns any score
/// vector into a strict priority order.
#[derive(Debug, Clone)]
pub enum Rule {
    FixedAssignment(Vec<u8>),
    Scoring { scores: Vec<f64>, floor_threshold: f64 },
}

impl Rule {
    /// Scoring rule with `c* = -inf` (treat everyone absent a budget).
    pub fn scoring(scores: Vec<f64>) -> Result<Self> {
        Self::scoring_with_floor(scores, f64::NEG_INFINITY)
    }

    pub fn scoring_with_floor(scores: Vec<f64>, floor_threshold: f64) -> Result<Self> {
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Input("scores must be finite".into()));
        }
        if floor_threshold.is_nan() {
            return Err(Error::Input("floor threshold must not be NaN".into()));
        }
        Ok(Rule::Scoring { scores, floor_threshold })
    }

    pub fn fixed(assign: Vec<u8>) -> Result<Self> {
        if assign.iter().any(|&a| a > 1) {
            return Err(Error::Input("fixed assignment values must be 0/1".into()));
        }
        Ok(Rule::FixedAssignment(assign))
    }

    pub fn len(&self) -> usize {
        match self {
            Rule::FixedAssignment(a) => a.len(),
            Rule::Scoring { scores, .. } => scores.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 0/1 assignment vector for `n` units, with or without a budget.
    ///
    /// Budgeted evaluation requires a scoring rule: with budget `p` the treated
    /// set is exactly the `floor(n*p)` units of highest priority. Without a
    /// budget, a scoring rule treats units scoring strictly above `c*` and a
    /// fixed rule is returned as-is.
    pub fn assignments(&self, budget: Option<f64>, n: usize) -> Result<Vec<u8>> {
        if self.len() != n {
            return Err(Error::Input(format!(
                "rule covers {} units but data has {n}",
                self.len()
            )));
        }
        match (self, budget) {
            (Rule::FixedAssignment(a), None) => Ok(a.clone()),
            (Rule::FixedAssignment(_), Some(_)) => Err(Error::Input(
                "budgeted evaluation needs a scoring rule, not a fixed assignment".into(),
            )),
            (Rule::Scoring { scores, floor_threshold }, None) => {
                Ok(scores.iter().map(|&s| u8::from(s > *floor_threshold)).collect())
            }
            (Rule::Scoring { scores, .. }, Some(p)) => {
                let (_, treated) = threshold_for_budget(scores, p)?;
                let mut f = vec![0u8; n];
                for i in treated {
                    f[i] = 1;
                }
                Ok(f)
            }
        }
    }

    pub fn scores(&self) -> Result<&[f64]> {
        match self {
            Rule::Scoring { scores, .. } => Ok(scores),
            Rule::FixedAssignment(_) => {
                Err(Error::Input("operation requires a scoring rule".into()))
            }
        }
    }

    pub fn floor_threshold(&self) -> Option<f64> {
        match self {
            Rule::Scoring { floor_threshold, .. } => Some(*floor_threshold),
            Rule::FixedAssignment(_) => None,
        }
    }
}

/// `floor(n*p)` with a guard against floating-point representation noise
/// (e.g. `3 * (2/3)` evaluating to just under 2).
pub fn floor_np(n: usize, p: f64) -> usize {
    let t = n as f64 * p;
    let r = t.round();
    let k = if (t - r).abs() < 1e-9 { r } else { t.floor() };
    (k as usize).min(n)
}

/// Priority order of units: indices sorted by descending score, ties broken by
/// ascending unit index.
pub fn priority_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).expect("finite scores").then(a.cmp(&b))
    });
    idx
}

/// `rank[i]` = position of unit `i` in the priority order (0 = highest priority).
pub fn priority_ranks(scores: &[f64]) -> Vec<usize> {
    let order = priority_order(scores);
    let mut rank = vec![0usize; scores.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    rank
}

/// Budget threshold and treated set for a scoring rule.
///
/// The treated set holds the `floor(n*p)` highest-priority units (ascending
/// index order in the returned vector). The threshold is the next score down the
/// priority order: `+inf` when nobody is treated, `-inf` when everybody is.
pub fn threshold_for_budget(scores: &[f64], p: f64) -> Result<(f64, Vec<usize>)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Input(format!("budget proportion {p} outside [0, 1]")));
    }
    let n = scores.len();
    let k = floor_np(n, p);
    let order = priority_order(scores);
    let mut treated: Vec<usize> = order[..k].to_vec();
    treated.sort_unstable();
    let c_hat = if k == n {
        f64::NEG_INFINITY
    } else if k == 0 {
        f64::INFINITY
    } else {
        scores[order[k]]
    };
    Ok((c_hat, treated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_picks_top_units() {
        let (c, treated) = threshold_for_budget(&[0.9, 0.5, 0.1], 2.0 / 3.0).unwrap();
        assert_eq!(treated, vec![0, 1]);
        assert_eq!(c, 0.1);
    }

    #[test]
    fn threshold_boundaries() {
        let scores = [3.0, 1.0, 2.0];
        let (c, treated) = threshold_for_budget(&scores, 1.0).unwrap();
        assert_eq!(treated.len(), 3);
        assert_eq!(c, f64::NEG_INFINITY);
        let (c, treated) = threshold_for_budget(&scores, 0.0).unwrap();
        assert!(treated.is_empty());
        assert_eq!(c, f64::INFINITY);
    }

    #[test]
    fn budget_outside_unit_interval_rejected() {
        assert!(threshold_for_budget(&[1.0, 2.0], 1.5).is_err());
        assert!(threshold_for_budget(&[1.0, 2.0], -0.1).is_err());
    }

    #[test]
    fn assignments_without_budget_uses_floor_threshold() {
        let rule = Rule::scoring(vec![5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(rule.assignments(None, 5).unwrap(), vec![1, 1, 1, 1, 1]);
    }

    #[test]
    fn assignments_with_budget_takes_top_floor_np() {
        let rule = Rule::scoring(vec![5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(rule.assignments(Some(0.4), 5).unwrap(), vec![1, 1, 0, 0, 0]);
    }

    #[test]
    fn fixed_assignment_passes_through_and_rejects_budget() {
        let rule = Rule::fixed(vec![1, 0, 0, 1, 0]).unwrap();
        assert_eq!(rule.assignments(None, 5).unwrap(), vec![1, 0, 0, 1, 0]);
        assert!(rule.assignments(Some(0.5), 5).is_err());
    }

    #[test]
    fn ties_break_by_index() {
        let (_, treated) = threshold_for_budget(&[1.0, 1.0, 1.0], 1.0 / 3.0).unwrap();
        assert_eq!(treated, vec![0]);
    }

    #[test]
    fn floor_np_handles_representation_noise() {
        assert_eq!(floor_np(3, 2.0 / 3.0), 2);
        assert_eq!(floor_np(5, 0.2), 1);
        assert_eq!(floor_np(5, 0.4), 2);
        assert_eq!(floor_np(7, 1.0 / 7.0), 1);
        assert_eq!(floor_np(10, 0.39), 3);
    }

    proptest! {
        #[test]
        fn treated_count_is_exactly_floor_np(
            scores in proptest::collection::vec(-100.0f64..100.0, 1..40),
            p in 0.0f64..=1.0,
        ) {
            let (_, treated) = threshold_for_budget(&scores, p).unwrap();
            prop_assert_eq!(treated.len(), floor_np(scores.len(), p));
        }

        #[test]
        fn treated_sets_are_monotone_in_budget(
            scores in proptest::collection::vec(-100.0f64..100.0, 1..40),
            p1 in 0.0f64..=1.0,
            p2 in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let (_, small) = threshold_for_budget(&scores, lo).unwrap();
            let (_, large) = threshold_for_budget(&scores, hi).unwrap();
            let large_set: std::collections::HashSet<_> = large.into_iter().collect();
            prop_assert!(small.iter().all(|i| large_set.contains(i)));
        }

        #[test]
        fn permutation_equivariance_for_distinct_scores(
            base in proptest::collection::hash_set(-1000i64..1000, 2..20),
            p in 0.0f64..=1.0,
            seed in 0u64..1000,
        ) {
            let scores: Vec<f64> = base.iter().map(|&v| v as f64).collect();
            let n = scores.len();
            // deterministic pseudo-permutation from the seed
            let mut perm: Vec<usize> = (0..n).collect();
            let mut s = seed.wrapping_add(1);
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s as usize) % (i + 1));
            }
            let permuted: Vec<f64> = (0..n).map(|i| scores[perm[i]]).collect();
            let (_, t_orig) = threshold_for_budget(&scores, p).unwrap();
            let (_, t_perm) = threshold_for_budget(&permuted, p).unwrap();
            let orig_set: std::collections::HashSet<_> = t_orig.into_iter().collect();
            let mapped: std::collections::HashSet<_> =
                t_perm.into_iter().map(|i| perm[i]).collect();
            prop_assert_eq!(orig_set, mapped);
        }
    }
}
