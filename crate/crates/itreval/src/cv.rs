//! Cross-validated evaluation of learning algorithms: fold construction,
//! per-fold estimation, pooled point estimates, and pooled variances with the
//! between-fold correction.
//!
//! Folds are treatment-stratified and near-equal in size. Each fold is scored
//! by a rule fit on the complementary folds; pooled points are plain fold
//! averages. Pooled variances start from the single-fold variance at the fold
//! size and subtract `(K-1)/K` times a conservative estimate of the
//! between-fold variance (the smaller of the observed fold spread and the
//! single-fold variance estimate, which keeps the subtraction from overshooting).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::data::ExperimentData;
use crate::error::{Error, Result};
use crate::estimate::{finalize_std_error, Diagnostics, Metric, MetricEstimate};
use crate::kappa::kappa_profile;
use crate::learners::LearnerSpec;
use crate::metrics::{
    estimate_aupec, estimate_papd_budget, estimate_pape, estimate_pape_budget, estimate_pav,
};
use crate::rule::{floor_np, Rule};
use crate::zmoments::{ZMomentEngine, ZMomentMode};

/// Deterministic stratified fold assignment.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold index of every unit.
    pub fold_of: Vec<usize>,
    /// Unit indices per fold, ascending.
    pub folds: Vec<Vec<usize>>,
    /// Per-fold `(m, m1, m0)`.
    pub sizes: Vec<(usize, usize, usize)>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn equal_sized(&self) -> bool {
        self.sizes.iter().all(|&(m, m1, m0)| {
            m == self.sizes[0].0 && m1 == self.sizes[0].1 && m0 == self.sizes[0].2
        })
    }

    fn mean_m(&self) -> f64 {
        self.sizes.iter().map(|s| s.0 as f64).sum::<f64>() / self.k as f64
    }

    fn mean_m1(&self) -> f64 {
        self.sizes.iter().map(|s| s.1 as f64).sum::<f64>() / self.k as f64
    }

    fn mean_m0(&self) -> f64 {
        self.sizes.iter().map(|s| s.2 as f64).sum::<f64>() / self.k as f64
    }

    fn min_m(&self) -> usize {
        self.sizes.iter().map(|s| s.0).min().unwrap()
    }
}

/// Treatment-stratified random partition into `k` folds, deterministic given
/// the seed. Per-fold treated counts differ by at most one, and so do total
/// sizes (controls are dealt from the opposite end).
pub fn make_folds(data: &ExperimentData, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Input("need at least 2 folds".into()));
    }
    if k > data.n1().min(data.n0()) {
        return Err(Error::Input(format!(
            "{k} folds cannot each receive a treated and a control unit (n1={}, n0={})",
            data.n1(),
            data.n0()
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut treated: Vec<usize> = (0..data.n()).filter(|&i| data.t()[i] == 1).collect();
    let mut controls: Vec<usize> = (0..data.n()).filter(|&i| data.t()[i] == 0).collect();
    let shuffle = |v: &mut Vec<usize>, rng: &mut ChaCha20Rng| {
        for i in (1..v.len()).rev() {
            let j = rng.gen_range(0..=i);
            v.swap(i, j);
        }
    };
    shuffle(&mut treated, &mut rng);
    shuffle(&mut controls, &mut rng);

    let mut fold_of = vec![0usize; data.n()];
    for (pos, &unit) in treated.iter().enumerate() {
        fold_of[unit] = pos % k;
    }
    for (pos, &unit) in controls.iter().enumerate() {
        fold_of[unit] = k - 1 - (pos % k);
    }
    let mut folds = vec![Vec::new(); k];
    for (unit, &f) in fold_of.iter().enumerate() {
        folds[f].push(unit);
    }
    let sizes = folds
        .iter()
        .map(|members| {
            let m1 = members.iter().filter(|&&i| data.t()[i] == 1).count();
            (members.len(), m1, members.len() - m1)
        })
        .collect();
    Ok(FoldPlan { k, fold_of, folds, sizes, seed })
}

/// Metric evaluated under cross-validation.
#[derive(Debug, Clone)]
pub enum CvMetric {
    /// Average value of the learned rule thresholded at `c_star`.
    Pav { c_star: f64 },
    /// Prescriptive effect of the learned rule thresholded at `c_star`.
    Pape { c_star: f64 },
    /// Budgeted prescriptive effect at proportion `p`.
    PapeBudget { p: f64 },
    /// Budget-curve area for the learned rule with floor `c_star`.
    Aupec { c_star: f64, zmode: ZMomentMode },
    /// Budgeted comparison against a second learner.
    PapdBudget { p: f64, learner_g: LearnerSpec },
}

/// Per-fold estimates, the pooled estimate, and the variance pieces that
/// produced the pooled standard error.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub per_fold: Vec<MetricEstimate>,
    pub pooled: MetricEstimate,
    /// Across-fold sample variance of the per-fold points.
    pub s_f_sq: f64,
    /// Named variance pieces for diagnostics and verification.
    pub components: Diagnostics,
    pub plan: FoldPlan,
}

/// One fold's evaluation materials.
struct FoldEval {
    test: ExperimentData,
    /// Learned scores on the test fold.
    scores: Vec<f64>,
    /// Budgetless assignments of the fold rule over the *whole* data set.
    assign_full: Vec<u8>,
}

fn fit_folds(
    data: &ExperimentData,
    learner: &LearnerSpec,
    plan: &FoldPlan,
    c_star: f64,
) -> Result<Vec<FoldEval>> {
    let all_idx: Vec<usize> = (0..data.n()).collect();
    plan.folds
        .iter()
        .enumerate()
        .map(|(fold, members)| {
            let train_idx: Vec<usize> =
                (0..data.n()).filter(|i| plan.fold_of[*i] != fold).collect();
            let train = data.subset(&train_idx)?;
            let scorer = learner
                .fit(&train)
                .map_err(|e| Error::Fit(format!("fold {fold}: {e}")))?;
            let test = data.subset(members)?;
            let scores = scorer.scores(&test, members)?;
            let full_scores = scorer.scores(data, &all_idx)?;
            let assign_full = full_scores.iter().map(|&s| u8::from(s > c_star)).collect();
            Ok(FoldEval { test, scores, assign_full })
        })
        .collect()
}

/// Sample variance over arm `t` of the fold's units, fold-averaged across all
/// folds; `None` if any fold arm has fewer than two units. The closure receives
/// `(fold index, fold, unit index within fold)`.
fn fold_avg_arm_variance(
    folds: &[FoldEval],
    t: u8,
    v: impl Fn(usize, &FoldEval, usize) -> f64,
) -> Option<f64> {
    let mut acc = 0.0;
    for (k, fe) in folds.iter().enumerate() {
        let idx: Vec<usize> = (0..fe.test.n()).filter(|&i| fe.test.t()[i] == t).collect();
        if idx.len() < 2 {
            return None;
        }
        let mean = idx.iter().map(|&i| v(k, fe, i)).sum::<f64>() / idx.len() as f64;
        let ss = idx.iter().map(|&i| (v(k, fe, i) - mean).powi(2)).sum::<f64>();
        acc += ss / (idx.len() - 1) as f64;
    }
    Some(acc / folds.len() as f64)
}

fn sample_variance(points: &[f64]) -> f64 {
    let k = points.len();
    if k < 2 {
        return 0.0;
    }
    let mean = points.iter().sum::<f64>() / k as f64;
    points.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (k - 1) as f64
}

/// Cross-fold assignment covariance estimators.
///
/// For units i != j the across-fold covariance of the learned assignments,
/// `Cov(f_k(i), f_k(j))` over folds k, is averaged against outcome weights
/// restricted to experimental arms. Computed in O(nK) via per-fold sums; the
/// literal pairwise double loop is O(n^2 K) and is used as a test oracle only.
pub struct FoldAssignmentCovariance<'a> {
    data: &'a ExperimentData,
    /// `assign[k][i]`: budgetless assignment of fold-k rule to unit i.
    assign: &'a [Vec<u8>],
    /// `f_count[i]` = number of folds assigning unit i.
    f_count: Vec<f64>,
}

impl<'a> FoldAssignmentCovariance<'a> {
    pub fn new(data: &'a ExperimentData, assign: &'a [Vec<u8>]) -> Self {
        let n = data.n();
        let mut f_count = vec![0.0; n];
        for fold in assign {
            for i in 0..n {
                f_count[i] += fold[i] as f64;
            }
        }
        Self { data, assign, f_count }
    }

    fn arm_count(&self, s: u8) -> f64 {
        if s == 1 {
            self.data.n1() as f64
        } else {
            self.data.n0() as f64
        }
    }

    /// Estimate of the pair average of `Cov(f(i), f(j)) * y_i * y_j` over
    /// pairs with `T_i = s`, `T_j = t`.
    pub fn weighted(&self, s: u8, t: u8) -> f64 {
        let kf = self.assign.len() as f64;
        let n = self.data.n();
        let mut term1 = 0.0;
        for fold in self.assign {
            let mut a_s = 0.0;
            let mut a_t = 0.0;
            let mut diag = 0.0;
            for i in 0..n {
                let fy = fold[i] as f64 * self.data.y()[i];
                if self.data.t()[i] == s {
                    a_s += fy;
                }
                if self.data.t()[i] == t {
                    a_t += fy;
                }
                if s == t && self.data.t()[i] == s {
                    diag += fold[i] as f64 * self.data.y()[i] * self.data.y()[i];
                }
            }
            term1 += a_s * a_t - diag;
        }
        let mut c_s = 0.0;
        let mut c_t = 0.0;
        let mut diag2 = 0.0;
        for i in 0..n {
            let yf = self.data.y()[i] * self.f_count[i];
            if self.data.t()[i] == s {
                c_s += yf;
            }
            if self.data.t()[i] == t {
                c_t += yf;
            }
            if s == t && self.data.t()[i] == s {
                diag2 += self.data.y()[i] * self.data.y()[i] * self.f_count[i] * self.f_count[i];
            }
        }
        let pairs = self.arm_count(s) * self.arm_count(t) - if s == t { self.arm_count(s) } else { 0.0 };
        if pairs <= 0.0 {
            return 0.0;
        }
        term1 / (kf * pairs) - (c_s * c_t - diag2) / (kf * kf * pairs)
    }

    /// Estimate of the pair average of `Cov(f(i), f(j)) * y_i` over pairs with
    /// `T_i = s` and j unrestricted.
    pub fn single_weighted(&self, s: u8) -> f64 {
        let kf = self.assign.len() as f64;
        let n = self.data.n();
        let mut term1 = 0.0;
        for fold in self.assign {
            let mut a_s = 0.0;
            let mut g = 0.0;
            let mut diag = 0.0;
            for i in 0..n {
                let fi = fold[i] as f64;
                g += fi;
                if self.data.t()[i] == s {
                    a_s += fi * self.data.y()[i];
                    diag += fi * self.data.y()[i];
                }
            }
            term1 += a_s * g - diag;
        }
        let f_tot: f64 = self.f_count.iter().sum();
        let mut c_s = 0.0;
        let mut diag2 = 0.0;
        for i in 0..n {
            if self.data.t()[i] == s {
                c_s += self.data.y()[i] * self.f_count[i];
                diag2 += self.data.y()[i] * self.f_count[i] * self.f_count[i];
            }
        }
        let pairs = self.arm_count(s) * (n as f64 - 1.0);
        term1 / (kf * pairs) - (c_s * f_tot - diag2) / (kf * kf * pairs)
    }

    /// Estimate of the pair average of `Cov(f(i), f(j))` over all pairs.
    pub fn unweighted(&self) -> f64 {
        let kf = self.assign.len() as f64;
        let n = self.data.n();
        let mut term1 = 0.0;
        for fold in self.assign {
            let g: f64 = fold.iter().map(|&v| v as f64).sum();
            term1 += g * g - g;
        }
        let f_tot: f64 = self.f_count.iter().sum();
        let diag2: f64 = self.f_count.iter().map(|c| c * c).sum();
        let pairs = n as f64 * (n as f64 - 1.0);
        term1 / (kf * pairs) - (f_tot * f_tot - diag2) / (kf * kf * pairs)
    }

    /// Signed combination estimating the pair average of
    /// `Cov(f(i), f(j)) * effect_i * effect_j`.
    pub fn effect_pair(&self) -> f64 {
        self.weighted(1, 1) - self.weighted(1, 0) - self.weighted(0, 1) + self.weighted(0, 0)
    }

    /// Signed combination estimating the pair average of
    /// `Cov(f(i), f(j)) * effect_i`.
    pub fn effect_single(&self) -> f64 {
        self.single_weighted(1) - self.single_weighted(0)
    }
}

/// Conservative between-fold variance estimate: the observed fold spread,
/// capped by the single-fold variance estimate.
fn between_fold_estimate(s_f_sq: f64, single_fold_var: f64) -> f64 {
    s_f_sq.min(single_fold_var)
}

fn pooled_from_folds(
    metric: Metric,
    per_fold: &[MetricEstimate],
    plan: &FoldPlan,
    n: usize,
) -> (MetricEstimate, f64) {
    let points: Vec<f64> = per_fold.iter().map(|e| e.point).collect();
    let pooled_point = points.iter().sum::<f64>() / points.len() as f64;
    let s_f_sq = sample_variance(&points);
    let prop =
        per_fold.iter().map(|e| e.proportion_treated).sum::<f64>() / per_fold.len() as f64;
    let mut pooled = MetricEstimate::new(metric, pooled_point, n, prop);
    pooled.diagnostics.insert("k_folds".into(), plan.k as f64);
    pooled.diagnostics.insert("seed".into(), plan.seed as f64);
    if !plan.equal_sized() {
        pooled.diagnostics.insert("unequal_folds".into(), 1.0);
    }
    (pooled, s_f_sq)
}

fn finish(
    mut pooled: MetricEstimate,
    single_fold_var: Option<f64>,
    s_f_sq: f64,
    k: usize,
    mut components: Diagnostics,
    per_fold: Vec<MetricEstimate>,
    plan: FoldPlan,
) -> CvResult {
    components.insert("s_f_sq".into(), s_f_sq);
    match single_fold_var {
        Some(v1) => {
            let between = between_fold_estimate(s_f_sq, v1);
            let var = v1 - (k as f64 - 1.0) / k as f64 * between;
            components.insert("var_single_fold".into(), v1);
            components.insert("between_fold".into(), between);
            if between < s_f_sq {
                components.insert("between_fold_capped".into(), 1.0);
            }
            pooled.std_error = Some(finalize_std_error(var, &mut pooled.diagnostics));
        }
        None => {
            pooled.diagnostics.insert("variance_unavailable".into(), 1.0);
        }
    }
    CvResult { per_fold, pooled, s_f_sq, components, plan }
}

/// Runs the cross-validation loop: fit on the complement of each fold,
/// evaluate on the fold, pool. Deterministic given `(data, learner, metric,
/// k_folds, seed)` including any Monte Carlo settings inside `metric`.
pub fn crossval(
    data: &ExperimentData,
    learner: &LearnerSpec,
    metric: &CvMetric,
    k_folds: usize,
    seed: u64,
) -> Result<CvResult> {
    let plan = make_folds(data, k_folds, seed)?;
    match metric {
        CvMetric::Pav { c_star } => cv_pav(data, learner, &plan, *c_star),
        CvMetric::Pape { c_star } => cv_pape(data, learner, &plan, *c_star),
        CvMetric::PapeBudget { p } => cv_pape_budget(data, learner, &plan, *p),
        CvMetric::Aupec { c_star, zmode } => cv_aupec(data, learner, &plan, *c_star, *zmode),
        CvMetric::PapdBudget { p, learner_g } => {
            cv_papd_budget_planned(data, learner, learner_g, &plan, *p)
        }
    }
}

fn cv_pav(
    data: &ExperimentData,
    learner: &LearnerSpec,
    plan: &FoldPlan,
    c_star: f64,
) -> Result<CvResult> {
    let folds = fit_folds(data, learner, plan, c_star)?;
    let per_fold: Vec<MetricEstimate> = folds
        .iter()
        .enumerate()
        .map(|(k, fe)| {
            let rule = Rule::scoring_with_floor(fe.scores.clone(), c_star)?;
            estimate_pav(&fe.test, &rule)
                .map_err(|e| Error::DegenerateData(format!("fold {k}: {e}")))
        })
        .collect::<Result<_>>()?;
    let (pooled, s_f_sq) = pooled_from_folds(Metric::Pav, &per_fold, plan, data.n());

    let mut components = Diagnostics::new();
    let assign: Vec<Vec<u8>> = folds.iter().map(|fe| fe.assign_full.clone()).collect();
    let cov = FoldAssignmentCovariance::new(data, &assign);
    let cov_term = cov.effect_pair();
    components.insert("pair_cov_effect".into(), cov_term);

    let v1 = fold_avg_arm_variance(&folds, 1, |_, fe, i| {
        fe.test.y()[i] * u8::from(fe.scores[i] > c_star) as f64
    });
    let v0 = fold_avg_arm_variance(&folds, 0, |_, fe, i| {
        fe.test.y()[i] * (1 - u8::from(fe.scores[i] > c_star)) as f64
    });
    let single = match (v1, v0) {
        (Some(v1), Some(v0)) => {
            Some(v1 / plan.mean_m1() + v0 / plan.mean_m0() + cov_term)
        }
        _ => None,
    };
    Ok(finish(pooled, single, s_f_sq, plan.k, components, per_fold, plan.clone()))
}

fn cv_pape(
    data: &ExperimentData,
    learner: &LearnerSpec,
    plan: &FoldPlan,
    c_star: f64,
) -> Result<CvResult> {
    let folds = fit_folds(data, learner, plan, c_star)?;
    let per_fold: Vec<MetricEstimate> = folds
        .iter()
        .enumerate()
        .map(|(k, fe)| {
            let rule = Rule::scoring_with_floor(fe.scores.clone(), c_star)?;
            estimate_pape(&fe.test, &rule)
                .map_err(|e| Error::DegenerateData(format!("fold {k}: {e}")))
        })
        .collect::<Result<_>>()?;
    let (pooled, s_f_sq) = pooled_from_folds(Metric::Pape, &per_fold, plan, data.n());

    // per-fold treated proportions of the learned rules on their test folds
    let fold_p: Vec<f64> = folds
        .iter()
        .map(|fe| {
            fe.scores.iter().filter(|&&s| s > c_star).count() as f64 / fe.test.n() as f64
        })
        .collect();
    let p_f = fold_p.iter().sum::<f64>() / fold_p.len() as f64;
    let tau_hat = data.diff_in_means();
    let tau_f = pooled.point;

    let mut components = Diagnostics::new();
    let assign: Vec<Vec<u8>> = folds.iter().map(|fe| fe.assign_full.clone()).collect();
    let cov = FoldAssignmentCovariance::new(data, &assign);
    let c_flat = cov.unweighted();
    let c_pair = cov.effect_pair();
    let c_single = cov.effect_single();
    components.insert("pair_cov_flat".into(), c_flat);
    components.insert("pair_cov_effect".into(), c_pair);
    components.insert("pair_cov_effect_single".into(), c_single);

    let v1 = fold_avg_arm_variance(&folds, 1, |k, fe, i| {
        (u8::from(fe.scores[i] > c_star) as f64 - fold_p[k]) * fe.test.y()[i]
    });
    let v0 = fold_avg_arm_variance(&folds, 0, |k, fe, i| {
        (u8::from(fe.scores[i] > c_star) as f64 - fold_p[k]) * fe.test.y()[i]
    });
    let m = plan.mean_m();
    let single = match (v1, v0) {
        (Some(v1), Some(v0)) => {
            let bracket1 = tau_f * tau_f - m * p_f * (1.0 - p_f) * tau_hat * tau_hat
                + 2.0 * (m - 1.0) * (2.0 * p_f - 1.0) * tau_hat * tau_f;
            let bracket2 = (m - 3.0) * (m - 2.0) * tau_hat * tau_hat * c_flat
                + (m * m - 2.0 * m + 2.0) * c_pair
                - 2.0 * (m - 2.0) * (m - 2.0) * tau_hat * c_single;
            let corr = m / (m - 1.0);
            Some(
                corr * corr
                    * (v1 / plan.mean_m1()
                        + v0 / plan.mean_m0()
                        + bracket1 / (m * m)
                        + bracket2 / (m * m)),
            )
        }
        _ => None,
    };
    Ok(finish(pooled, single, s_f_sq, plan.k, components, per_fold, plan.clone()))
}

/// Fold-averaged group contrasts at the budget `p`: each fold contributes its
/// own plug-in pair, with the extreme-cell substitution applied per fold.
fn fold_avg_kappas(folds: &[FoldEval], p: f64) -> Result<(f64, f64)> {
    let mut k1 = 0.0;
    let mut k0 = 0.0;
    for (k, fe) in folds.iter().enumerate() {
        let profile = kappa_profile(&fe.test, &fe.scores)
            .map_err(|e| Error::DegenerateData(format!("fold {k}: {e}")))?;
        let z = floor_np(fe.test.n(), p);
        let (a, b) = profile.at(z);
        k1 += a;
        k0 += b;
    }
    Ok((k1 / folds.len() as f64, k0 / folds.len() as f64))
}

fn cv_pape_budget(
    data: &ExperimentData,
    learner: &LearnerSpec,
    plan: &FoldPlan,
    p: f64,
) -> Result<CvResult> {
    let folds = fit_folds(data, learner, plan, f64::NEG_INFINITY)?;
    let per_fold: Vec<MetricEstimate> = folds
        .iter()
        .enumerate()
        .map(|(k, fe)| {
            let rule = Rule::scoring(fe.scores.clone())?;
            estimate_pape_budget(&fe.test, &rule, p)
                .map_err(|e| Error::DegenerateData(format!("fold {k}: {e}")))
        })
        .collect::<Result<_>>()?;
    let (pooled, s_f_sq) = pooled_from_folds(Metric::PapeBudget, &per_fold, plan, data.n());

    let mut components = Diagnostics::new();
    let (kappa1, kappa0) = fold_avg_kappas(&folds, p)?;
    components.insert("kappa1_cv".into(), kappa1);
    components.insert("kappa0_cv".into(), kappa0);

    let assigned: Vec<Vec<u8>> = folds
        .iter()
        .map(|fe| {
            let (_, treated) = crate::rule::threshold_for_budget(&fe.scores, p)?;
            let mut f = vec![0u8; fe.test.n()];
            for &i in &treated {
                f[i] = 1;
            }
            Ok(f)
        })
        .collect::<Result<_>>()?;

    let v1 = fold_avg_arm_variance(&folds, 1, |k, fe, i| {
        (assigned[k][i] as f64 - p) * fe.test.y()[i]
    });
    let v0 = fold_avg_arm_variance(&folds, 0, |k, fe, i| {
        (assigned[k][i] as f64 - p) * fe.test.y()[i]
    });

    let m_int = plan.min_m();
    let m = m_int as f64;
    let km = floor_np(m_int, p) as f64;
    let single = match (v1, v0) {
        (Some(v1), Some(v0)) => {
            let coupling = km * (m - km) / (m * m * (m - 1.0))
                * ((2.0 * p - 1.0) * kappa1 * kappa1 - 2.0 * p * kappa1 * kappa0);
            components.insert("threshold_coupling".into(), coupling);
            Some(v1 / plan.mean_m1() + v0 / plan.mean_m0() + coupling)
        }
        _ => None,
    };
    Ok(finish(pooled, single, s_f_sq, plan.k, components, per_fold, plan.clone()))
}

fn cv_aupec(
    data: &ExperimentData,
    learner: &LearnerSpec,
    plan: &FoldPlan,
    c_star: f64,
    zmode: ZMomentMode,
) -> Result<CvResult> {
    let folds = fit_folds(data, learner, plan, c_star)?;
    let per_fold: Vec<MetricEstimate> = folds
        .iter()
        .enumerate()
        .map(|(k, fe)| {
            let rule = Rule::scoring_with_floor(fe.scores.clone(), c_star)?;
            Ok(estimate_aupec(&fe.test, &rule, zmode)
                .map_err(|e| Error::DegenerateData(format!("fold {k}: {e}")))?
                .aupec)
        })
        .collect::<Result<_>>()?;
    let (pooled, s_f_sq) = pooled_from_folds(Metric::Aupec, &per_fold, plan, data.n());

    let mut components = Diagnostics::new();
    let m_min = plan.min_m();
    // fold-averaged contrast profiles over the common grid
    let mut kappa1 = vec![0.0; m_min];
    let mut kappa0 = vec![0.0; m_min];
    for (k, fe) in folds.iter().enumerate() {
        let profile = kappa_profile(&fe.test, &fe.scores)
            .map_err(|e| Error::DegenerateData(format!("fold {k}: {e}")))?;
        for z in 1..=m_min {
            let (a, b) = profile.at(z);
            kappa1[z - 1] += a;
            kappa0[z - 1] += b;
        }
    }
    for z in 0..m_min {
        kappa1[z] /= folds.len() as f64;
        kappa0[z] /= folds.len() as f64;
    }
    let fold_p: Vec<f64> = folds
        .iter()
        .map(|fe| fe.scores.iter().filter(|&&s| s > c_star).count() as f64 / fe.test.n() as f64)
        .collect();
    let p_f = fold_p.iter().sum::<f64>() / fold_p.len() as f64;
    components.insert("p_hat_cv".into(), p_f);

    // per-fold budget-average weights for the marginal variance terms
    let weights: Vec<Vec<f64>> = folds
        .iter()
        .map(|fe| {
            let n_f = fe.scores.iter().filter(|&&s| s > c_star).count();
            crate::metrics::aupec_weights(&fe.scores, n_f)
        })
        .collect();
    let v1 = fold_avg_arm_variance(&folds, 1, |k, fe, i| {
        (weights[k][i] - 0.5) * fe.test.y()[i]
    });
    let v0 = fold_avg_arm_variance(&folds, 0, |k, fe, i| {
        (weights[k][i] - 0.5) * fe.test.y()[i]
    });

    let single = match (v1, v0) {
        (Some(v1), Some(v0)) => {
            let engine = ZMomentEngine::new(m_min, p_f, zmode, &kappa1, &kappa0)?;
            let (eterm, vterm) = engine.terms();
            components.insert("z_expectation_term".into(), eterm);
            components.insert("z_variance_term".into(), vterm);
            Some(
                v1 / plan.mean_m1()
                    + v0 / plan.mean_m0()
                    + eterm
                    + vterm / (m_min as f64 * m_min as f64),
            )
        }
        _ => None,
    };
    Ok(finish(pooled, single, s_f_sq, plan.k, components, per_fold, plan.clone()))
}

/// Budgeted comparison of two learners under one fold plan.
pub fn cv_papd_budget(
    data: &ExperimentData,
    learner_f: &LearnerSpec,
    learner_g: &LearnerSpec,
    p: f64,
    k_folds: usize,
    seed: u64,
) -> Result<CvResult> {
    let plan = make_folds(data, k_folds, seed)?;
    cv_papd_budget_planned(data, learner_f, learner_g, &plan, p)
}

fn cv_papd_budget_planned(
    data: &ExperimentData,
    learner_f: &LearnerSpec,
    learner_g: &LearnerSpec,
    plan: &FoldPlan,
    p: f64,
) -> Result<CvResult> {
    let folds_f = fit_folds(data, learner_f, plan, f64::NEG_INFINITY)?;
    let folds_g = fit_folds(data, learner_g, plan, f64::NEG_INFINITY)?;
    let per_fold: Vec<MetricEstimate> = folds_f
        .iter()
        .zip(&folds_g)
        .enumerate()
        .map(|(k, (ff, fg))| {
            let rf = Rule::scoring(ff.scores.clone())?;
            let rg = Rule::scoring(fg.scores.clone())?;
            estimate_papd_budget(&ff.test, &rf, &rg, p)
                .map_err(|e| Error::DegenerateData(format!("fold {k}: {e}")))
        })
        .collect::<Result<_>>()?;
    let (pooled, s_f_sq) = pooled_from_folds(Metric::PapdBudget, &per_fold, plan, data.n());

    let mut components = Diagnostics::new();
    let (kf1, _) = fold_avg_kappas(&folds_f, p)?;
    let (kg1, _) = fold_avg_kappas(&folds_g, p)?;
    components.insert("kappa1_cv_f".into(), kf1);
    components.insert("kappa1_cv_g".into(), kg1);

    let assigned: Vec<(Vec<u8>, Vec<u8>)> = folds_f
        .iter()
        .zip(&folds_g)
        .map(|(ff, fg)| {
            let mk = |scores: &[f64], m: usize| -> Result<Vec<u8>> {
                let (_, treated) = crate::rule::threshold_for_budget(scores, p)?;
                let mut f = vec![0u8; m];
                for &i in &treated {
                    f[i] = 1;
                }
                Ok(f)
            };
            Ok((mk(&ff.scores, ff.test.n())?, mk(&fg.scores, fg.test.n())?))
        })
        .collect::<Result<_>>()?;

    let v1 = fold_avg_arm_variance(&folds_f, 1, |k, fe, i| {
        (assigned[k].0[i] as f64 - assigned[k].1[i] as f64) * fe.test.y()[i]
    });
    let v0 = fold_avg_arm_variance(&folds_f, 0, |k, fe, i| {
        (assigned[k].0[i] as f64 - assigned[k].1[i] as f64) * fe.test.y()[i]
    });

    let m_int = plan.min_m();
    let m = m_int as f64;
    let km = floor_np(m_int, p) as f64;
    let single = match (v1, v0) {
        (Some(v1), Some(v0)) => {
            let shrink = km * (km - m) / (m * m * (m - 1.0)) * (kf1 * kf1 + kg1 * kg1);
            let bound = 2.0 * crate::bounds::papd_cov_bound(m_int, p, kf1, kg1);
            components.insert("threshold_coupling".into(), shrink + bound);
            Some(v1 / plan.mean_m1() + v0 / plan.mean_m0() + shrink + bound)
        }
        _ => None,
    };
    Ok(finish(pooled, single, s_f_sq, plan.k, components, per_fold, plan.clone()))
}
