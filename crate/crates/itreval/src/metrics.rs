//! Point estimators and exact-variance standard errors for fixed (pre-specified)
//! treatment rules.
//!
//! All estimators share one skeleton: a weighted treated-arm mean plus a
//! weighted control-arm mean, whose repeated-sampling variance decomposes into
//! within-arm variance terms plus (for budgeted rules) a coupling term that
//! prices the estimation of the budget threshold through group contrasts.

use crate::data::ExperimentData;
use crate::error::{Error, Result};
use crate::estimate::{finalize_std_error, Diagnostics, Metric, MetricEstimate};
use crate::kappa::{kappa_profile, KappaProfile};
use crate::rule::{floor_np, priority_ranks, threshold_for_budget, Rule};
use crate::zmoments::{ZMomentEngine, ZMomentMode};

/// Sample variance (divisor `count - 1`) of `v(i)` over units in arm `t`.
/// `None` when the arm has fewer than two units.
fn arm_variance(data: &ExperimentData, t: u8, v: impl Fn(usize) -> f64) -> Option<f64> {
    let idx: Vec<usize> = (0..data.n()).filter(|&i| data.t()[i] == t).collect();
    if idx.len() < 2 {
        return None;
    }
    let mean = idx.iter().map(|&i| v(i)).sum::<f64>() / idx.len() as f64;
    let ss = idx.iter().map(|&i| (v(i) - mean).powi(2)).sum::<f64>();
    Some(ss / (idx.len() - 1) as f64)
}

/// Sample covariance of `(u(i), v(i))` over units in arm `t`.
fn arm_covariance(
    data: &ExperimentData,
    t: u8,
    u: impl Fn(usize) -> f64,
    v: impl Fn(usize) -> f64,
) -> Option<f64> {
    let idx: Vec<usize> = (0..data.n()).filter(|&i| data.t()[i] == t).collect();
    if idx.len() < 2 {
        return None;
    }
    let mu = idx.iter().map(|&i| u(i)).sum::<f64>() / idx.len() as f64;
    let mv = idx.iter().map(|&i| v(i)).sum::<f64>() / idx.len() as f64;
    let ss = idx.iter().map(|&i| (u(i) - mu) * (v(i) - mv)).sum::<f64>();
    Some(ss / (idx.len() - 1) as f64)
}

/// Treated-arm weighted mean plus control-arm weighted mean:
/// `(1/n1) sum y_i t_i a_i + (1/n0) sum y_i (1-t_i) b_i`.
fn two_arm_sum(
    data: &ExperimentData,
    a: impl Fn(usize) -> f64,
    b: impl Fn(usize) -> f64,
) -> f64 {
    let mut s1 = 0.0;
    let mut s0 = 0.0;
    for i in 0..data.n() {
        if data.t()[i] == 1 {
            s1 += data.y()[i] * a(i);
        } else {
            s0 += data.y()[i] * b(i);
        }
    }
    s1 / data.n1() as f64 + s0 / data.n0() as f64
}

/// Average value of a budgetless rule: the mean outcome that implementing its
/// assignments would produce.
pub fn estimate_pav(data: &ExperimentData, rule: &Rule) -> Result<MetricEstimate> {
    let f = rule.assignments(None, data.n())?;
    let point = two_arm_sum(data, |i| f[i] as f64, |i| 1.0 - f[i] as f64);
    let p_hat = f.iter().map(|&v| v as f64).sum::<f64>() / data.n() as f64;

    let mut est = MetricEstimate::new(Metric::Pav, point, data.n(), p_hat);
    est.diagnostics.insert("p_hat_f".into(), p_hat);
    let v1 = arm_variance(data, 1, |i| f[i] as f64 * data.y()[i]);
    let v0 = arm_variance(data, 0, |i| (1.0 - f[i] as f64) * data.y()[i]);
    if let (Some(v1), Some(v0)) = (v1, v0) {
        let var = v1 / data.n1() as f64 + v0 / data.n0() as f64;
        est.std_error = Some(finalize_std_error(var, &mut est.diagnostics));
    } else {
        est.diagnostics.insert("variance_unavailable".into(), 1.0);
    }
    Ok(est)
}

/// Prescriptive effect of a budgetless rule: its average value minus the value
/// of randomly treating the same proportion of units. Includes the small-sample
/// degree-of-freedom correction for the estimated proportion.
pub fn estimate_pape(data: &ExperimentData, rule: &Rule) -> Result<MetricEstimate> {
    let n = data.n();
    if n < 2 {
        return Err(Error::DegenerateData("prescriptive effect needs n >= 2".into()));
    }
    let f = rule.assignments(None, n)?;
    let p_hat = f.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let m1 = data.treated_mean();
    let m0 = data.control_mean();
    let value = two_arm_sum(data, |i| f[i] as f64, |i| 1.0 - f[i] as f64);
    let correction = n as f64 / (n as f64 - 1.0);
    let point = correction * (value - p_hat * m1 - (1.0 - p_hat) * m0);
    let tau_hat = m1 - m0;

    let mut est = MetricEstimate::new(Metric::Pape, point, n, p_hat);
    est.diagnostics.insert("p_hat_f".into(), p_hat);
    est.diagnostics.insert("tau_hat".into(), tau_hat);

    let centered = |i: usize| (f[i] as f64 - p_hat) * data.y()[i];
    let v1 = arm_variance(data, 1, centered);
    let v0 = arm_variance(data, 0, centered);
    if let (Some(v1), Some(v0)) = (v1, v0) {
        let nf = n as f64;
        let bracket = point * point - nf * p_hat * (1.0 - p_hat) * tau_hat * tau_hat
            + 2.0 * (nf - 1.0) * (2.0 * p_hat - 1.0) * point * tau_hat;
        let var = correction * correction
            * (v1 / data.n1() as f64 + v0 / data.n0() as f64 + bracket / (nf * nf));
        est.std_error = Some(finalize_std_error(var, &mut est.diagnostics));
    } else {
        est.diagnostics.insert("variance_unavailable".into(), 1.0);
    }
    Ok(est)
}

/// Group contrasts at the budget that treats `k` units, with availability
/// diagnostics folded into `diag`.
fn kappa_at(
    data: &ExperimentData,
    scores: &[f64],
    k: usize,
    diag: &mut Diagnostics,
    label: &str,
) -> Option<(f64, f64)> {
    match kappa_profile(data, scores) {
        Ok(profile) => {
            if profile.substituted {
                diag.insert("kappa_substituted".into(), 1.0);
            }
            let (k1, k0) = profile.at(k);
            diag.insert(format!("kappa1_hat{label}"), k1);
            diag.insert(format!("kappa0_hat{label}"), k0);
            Some((k1, k0))
        }
        Err(_) => {
            diag.insert(format!("kappa_unavailable{label}"), 1.0);
            None
        }
    }
}

fn pape_budget_point(data: &ExperimentData, f: &[u8], p: f64) -> f64 {
    let value = two_arm_sum(data, |i| f[i] as f64, |i| 1.0 - f[i] as f64);
    value - p * data.treated_mean() - (1.0 - p) * data.control_mean()
}

fn pape_budget_with_profile(
    data: &ExperimentData,
    scores: &[f64],
    p: f64,
    profile: Option<&KappaProfile>,
) -> Result<MetricEstimate> {
    let n = data.n();
    let (c_hat, treated) = threshold_for_budget(scores, p)?;
    let k = treated.len();
    let mut f = vec![0u8; n];
    for &i in &treated {
        f[i] = 1;
    }
    let point = pape_budget_point(data, &f, p);

    let mut est = MetricEstimate::new(Metric::PapeBudget, point, n, k as f64 / n as f64);
    est.diagnostics.insert("budget".into(), p);
    est.diagnostics.insert("c_hat".into(), c_hat);
    est.diagnostics.insert("tau_hat".into(), data.diff_in_means());

    let centered = |i: usize| (f[i] as f64 - p) * data.y()[i];
    let v1 = arm_variance(data, 1, centered);
    let v0 = arm_variance(data, 0, centered);

    let kappas = match profile {
        Some(pr) => {
            if pr.substituted {
                est.diagnostics.insert("kappa_substituted".into(), 1.0);
            }
            let (k1, k0) = pr.at(k);
            est.diagnostics.insert("kappa1_hat".into(), k1);
            est.diagnostics.insert("kappa0_hat".into(), k0);
            Some((k1, k0))
        }
        None => kappa_at(data, scores, k, &mut est.diagnostics, ""),
    };

    match (v1, v0, kappas) {
        (Some(v1), Some(v0), Some((k1, k0))) if n >= 2 => {
            let nf = n as f64;
            let kf = k as f64;
            let coupling = kf * (nf - kf) / (nf * nf * (nf - 1.0))
                * ((2.0 * p - 1.0) * k1 * k1 - 2.0 * p * k1 * k0);
            let var = v1 / data.n1() as f64 + v0 / data.n0() as f64 + coupling;
            est.std_error = Some(finalize_std_error(var, &mut est.diagnostics));
        }
        _ => {
            est.diagnostics.insert("variance_unavailable".into(), 1.0);
        }
    }
    Ok(est)
}

/// Prescriptive effect under a budget `p`: the rule is cut down to its
/// `floor(n*p)` highest-priority units and compared with randomly treating the
/// proportion `p`.
pub fn estimate_pape_budget(data: &ExperimentData, rule: &Rule, p: f64) -> Result<MetricEstimate> {
    let scores = rule.scores()?;
    if scores.len() != data.n() {
        return Err(Error::Input("rule length does not match data".into()));
    }
    pape_budget_with_profile(data, scores, p, None)
}

/// Difference in budgeted prescriptive effect between two scoring rules under a
/// common budget. The coupling between the two estimated thresholds is only
/// bounded, never estimated, so the standard error is conservative.
pub fn estimate_papd_budget(
    data: &ExperimentData,
    rule_f: &Rule,
    rule_g: &Rule,
    p: f64,
) -> Result<MetricEstimate> {
    let n = data.n();
    let sf = rule_f.scores()?;
    let sg = rule_g.scores()?;
    if sf.len() != n || sg.len() != n {
        return Err(Error::Input("rule length does not match data".into()));
    }
    let f = rule_f.assignments(Some(p), n)?;
    let g = rule_g.assignments(Some(p), n)?;
    let k = floor_np(n, p);
    let point = two_arm_sum(
        data,
        |i| f[i] as f64 - g[i] as f64,
        |i| g[i] as f64 - f[i] as f64,
    );

    let mut est = MetricEstimate::new(Metric::PapdBudget, point, n, k as f64 / n as f64);
    est.diagnostics.insert("budget".into(), p);

    let diff = |i: usize| (f[i] as f64 - g[i] as f64) * data.y()[i];
    let v1 = arm_variance(data, 1, diff);
    let v0 = arm_variance(data, 0, diff);
    let kf = kappa_at(data, sf, k, &mut est.diagnostics, "_f");
    let kg = kappa_at(data, sg, k, &mut est.diagnostics, "_g");

    match (v1, v0, kf, kg) {
        (Some(v1), Some(v0), Some((kf1, _)), Some((kg1, _))) if n >= 2 => {
            let nf = n as f64;
            let kfl = k as f64;
            let shrink = kfl * (kfl - nf) / (nf * nf * (nf - 1.0)) * (kf1 * kf1 + kg1 * kg1);
            let bound = 2.0 * crate::bounds::papd_cov_bound(n, p, kf1, kg1);
            let var = v1 / data.n1() as f64 + v0 / data.n0() as f64 + shrink + bound;
            est.std_error = Some(finalize_std_error(var, &mut est.diagnostics));
        }
        _ => {
            est.diagnostics.insert("variance_unavailable".into(), 1.0);
        }
    }
    Ok(est)
}

/// Difference in average value between two budgetless rules.
///
/// Both rules are fixed, so the per-unit difference terms are independent
/// across units and no threshold coupling arises.
pub fn value_difference(
    data: &ExperimentData,
    rule_f: &Rule,
    rule_g: &Rule,
) -> Result<MetricEstimate> {
    let n = data.n();
    let f = rule_f.assignments(None, n)?;
    let g = rule_g.assignments(None, n)?;
    let point = two_arm_sum(
        data,
        |i| f[i] as f64 - g[i] as f64,
        |i| g[i] as f64 - f[i] as f64,
    );
    let p_f = f.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let mut est = MetricEstimate::new(Metric::ValueDiff, point, n, p_f);

    let diff = |i: usize| (f[i] as f64 - g[i] as f64) * data.y()[i];
    let v1 = arm_variance(data, 1, diff);
    let v0 = arm_variance(data, 0, diff);
    if let (Some(v1), Some(v0)) = (v1, v0) {
        let var = v1 / data.n1() as f64 + v0 / data.n0() as f64;
        est.std_error = Some(finalize_std_error(var, &mut est.diagnostics));
    } else {
        est.diagnostics.insert("variance_unavailable".into(), 1.0);
    }
    Ok(est)
}

/// One evaluated budget level on the prescriptive-effect curve.
#[derive(Debug, Clone)]
pub struct CurvePoint {
    /// Budget as a proportion, `k / n`.
    pub p: f64,
    /// Average-value estimate when the rule treats its top `k` units.
    pub value: f64,
    /// Budgeted prescriptive-effect estimate at this budget.
    pub pape: f64,
    pub std_error: Option<f64>,
}

/// The prescriptive-effect curve and the area between it and the
/// random-treatment baseline.
#[derive(Debug, Clone)]
pub struct AupecCurve {
    /// One entry per budget level `k/n`, `k = 1..n`, ascending.
    pub points: Vec<CurvePoint>,
    pub aupec: MetricEstimate,
    /// Maximal proportion the rule treats with no budget (score above `c*`).
    pub p_hat_f: f64,
}

/// Per-unit budget-average weights: the fraction of the budget grid at which
/// each unit is treated, including the plateau beyond the rule's own maximal
/// proportion.
pub(crate) fn aupec_weights(scores: &[f64], n_f: usize) -> Vec<f64> {
    let n = scores.len();
    let ranks = priority_ranks(scores);
    (0..n)
        .map(|i| if ranks[i] < n_f { (n - ranks[i]) as f64 / n as f64 } else { 0.0 })
        .collect()
}

/// Area between the rule's value curve and the random-treatment baseline,
/// averaged over the whole budget range, with its standard error and the
/// per-budget curve.
pub fn estimate_aupec(
    data: &ExperimentData,
    rule: &Rule,
    zmode: ZMomentMode,
) -> Result<AupecCurve> {
    let n = data.n();
    let scores = rule.scores()?;
    if scores.len() != n {
        return Err(Error::Input("rule length does not match data".into()));
    }
    let c_star = rule.floor_threshold().unwrap_or(f64::NEG_INFINITY);
    let n_f = scores.iter().filter(|&&s| s > c_star).count();
    let p_hat_f = n_f as f64 / n as f64;
    let m1 = data.treated_mean();
    let m0 = data.control_mean();

    let w = aupec_weights(scores, n_f);
    let point =
        two_arm_sum(data, |i| w[i], |i| 1.0 - w[i]) - 0.5 * m1 - 0.5 * m0;

    let mut est = MetricEstimate::new(Metric::Aupec, point, n, p_hat_f);
    est.diagnostics.insert("p_hat_f".into(), p_hat_f);
    est.diagnostics.insert("n_f".into(), n_f as f64);
    est.diagnostics.insert("tau_hat".into(), data.diff_in_means());

    let star = |i: usize| (w[i] - 0.5) * data.y()[i];
    let v1 = arm_variance(data, 1, star);
    let v0 = arm_variance(data, 0, star);

    let profile = match kappa_profile(data, scores) {
        Ok(pr) => Some(pr),
        Err(_) => {
            est.diagnostics.insert("kappa_unavailable".into(), 1.0);
            None
        }
    };

    if let (Some(v1), Some(v0)) = (v1, v0) {
        let marginal = v1 / data.n1() as f64 + v0 / data.n0() as f64;
        let var = if n_f == 0 {
            // the no-budget count is degenerate at zero: no coupling terms
            Some(marginal)
        } else if let Some(pr) = &profile {
            if pr.substituted {
                est.diagnostics.insert("kappa_substituted".into(), 1.0);
            }
            let engine = ZMomentEngine::new(n, p_hat_f, zmode, &pr.kappa1, &pr.kappa0)?;
            let (eterm, vterm) = engine.terms();
            est.diagnostics.insert("z_expectation_term".into(), eterm);
            est.diagnostics.insert("z_variance_term".into(), vterm);
            // the weighted contrast sum enters the estimator divided by n
            Some(marginal + eterm + vterm / (n as f64 * n as f64))
        } else {
            None
        };
        match var {
            Some(var) => {
                est.std_error = Some(finalize_std_error(var, &mut est.diagnostics));
            }
            None => {
                est.diagnostics.insert("variance_unavailable".into(), 1.0);
            }
        }
    } else {
        est.diagnostics.insert("variance_unavailable".into(), 1.0);
    }

    // per-budget curve over the full grid, reusing one contrast profile
    let order = crate::rule::priority_order(scores);
    let mut points = Vec::with_capacity(n);
    let mut treated_sum1 = 0.0; // running sum of y over treated-arm top-k units
    let mut control_sum_in_top = 0.0;
    let control_total: f64 =
        (0..n).filter(|&i| data.t()[i] == 0).map(|i| data.y()[i]).sum();
    for k in 1..=n {
        let unit = order[k - 1];
        if data.t()[unit] == 1 {
            treated_sum1 += data.y()[unit];
        } else {
            control_sum_in_top += data.y()[unit];
        }
        let value = treated_sum1 / data.n1() as f64
            + (control_total - control_sum_in_top) / data.n0() as f64;
        let p = k as f64 / n as f64;
        let pape = pape_budget_with_profile(data, scores, p, profile.as_ref())?;
        points.push(CurvePoint { p, value, pape: pape.point, std_error: pape.std_error });
    }

    Ok(AupecCurve { points, aupec: est, p_hat_f })
}

/// Scale-invariant normalization of the budget-curve area: the area divided by
/// the difference-in-means effect estimate. Standard error by a first-order
/// expansion of the ratio with plug-in covariance.
pub fn estimate_aupec_normalized(
    data: &ExperimentData,
    rule: &Rule,
    zmode: ZMomentMode,
) -> Result<MetricEstimate> {
    let curve = estimate_aupec(data, rule, zmode)?;
    let tau_hat = data.diff_in_means();
    let scale = data.y().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if tau_hat.abs() < 1e-10 * scale.max(1e-300) {
        return Err(Error::NumericDegenerate(format!(
            "difference-in-means estimate {tau_hat} too close to zero to normalize"
        )));
    }
    let point = curve.aupec.point / tau_hat;

    let mut est = MetricEstimate::new(Metric::AupecNorm, point, data.n(), curve.p_hat_f);
    est.diagnostics = curve.aupec.diagnostics.clone();
    est.diagnostics.insert("tau_hat".into(), tau_hat);

    let var_num = curve.aupec.std_error.map(|se| se * se);
    let var_tau = match (
        arm_variance(data, 1, |i| data.y()[i]),
        arm_variance(data, 0, |i| data.y()[i]),
    ) {
        (Some(v1), Some(v0)) => Some(v1 / data.n1() as f64 + v0 / data.n0() as f64),
        _ => None,
    };
    let scores = rule.scores()?;
    let c_star = rule.floor_threshold().unwrap_or(f64::NEG_INFINITY);
    let n_f = scores.iter().filter(|&&s| s > c_star).count();
    let w = aupec_weights(scores, n_f);
    let cov = match (
        arm_covariance(data, 1, |i| (w[i] - 0.5) * data.y()[i], |i| data.y()[i]),
        arm_covariance(data, 0, |i| (w[i] - 0.5) * data.y()[i], |i| data.y()[i]),
    ) {
        (Some(c1), Some(c0)) => Some(c1 / data.n1() as f64 + c0 / data.n0() as f64),
        _ => None,
    };
    if let (Some(vn), Some(vt), Some(cv)) = (var_num, var_tau, cov) {
        let var = (vn - 2.0 * point * cv + point * point * vt) / (tau_hat * tau_hat);
        est.std_error = Some(finalize_std_error(var, &mut est.diagnostics));
    } else {
        est.diagnostics.insert("variance_unavailable".into(), 1.0);
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Worked five-unit example: outcomes, assignments and a rule vector.
    fn five_unit() -> ExperimentData {
        ExperimentData::new(vec![2.0, 3.0, -1.0, 1.0, 3.0], vec![1, 1, 0, 0, 1], None).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn pav_worked_example() {
        let d = five_unit();
        let rule = Rule::fixed(vec![1, 0, 0, 1, 0]).unwrap();
        let est = estimate_pav(&d, &rule).unwrap();
        assert!((est.point - 1.0 / 6.0).abs() < 1e-12);
        assert!(est.std_error.is_some());
    }

    #[test]
    fn pav_is_not_shift_invariant() {
        let d = five_unit();
        let shifted = ExperimentData::new(
            d.y().iter().map(|v| v + 1.0).collect(),
            d.t().to_vec(),
            None,
        )
        .unwrap();
        let rule = Rule::fixed(vec![1, 0, 0, 1, 0]).unwrap();
        let base = estimate_pav(&d, &rule).unwrap().point;
        let plus = estimate_pav(&shifted, &rule).unwrap().point;
        assert!((plus - 1.0).abs() < 1e-12);
        assert!((plus - base - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn pav_treat_everyone_is_treated_mean() {
        let d = five_unit();
        let rule = Rule::fixed(vec![1; 5]).unwrap();
        let est = estimate_pav(&d, &rule).unwrap();
        assert!((est.point - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pape_worked_example() {
        // direct evaluation of the definition on the five-unit table:
        // value 1/6, proportion 2/5, arm means 8/3 and 0, correction 5/4
        let d = five_unit();
        let rule = Rule::fixed(vec![1, 0, 0, 1, 0]).unwrap();
        let est = estimate_pape(&d, &rule).unwrap();
        let oracle = 5.0 / 4.0 * (1.0 / 6.0 - 0.4 * 8.0 / 3.0);
        assert!((est.point - oracle).abs() < 1e-12);
        assert!((est.point - (-1.125)).abs() < 1e-12);
    }

    #[test]
    fn pape_of_constant_rules_is_exactly_zero() {
        let d = five_unit();
        for rule in [Rule::fixed(vec![1; 5]).unwrap(), Rule::fixed(vec![0; 5]).unwrap()] {
            let est = estimate_pape(&d, &rule).unwrap();
            assert_eq!(est.point, 0.0);
            assert_eq!(est.std_error, Some(0.0));
        }
    }

    #[test]
    fn pape_budget_worked_examples() {
        let d = five_unit();
        let rule = Rule::scoring(vec![5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        let est = estimate_pape_budget(&d, &rule, 0.4).unwrap();
        assert!((est.point - 0.6).abs() < 1e-12);
        assert!(est.std_error.is_some());
        let est = estimate_pape_budget(&d, &rule, 0.8).unwrap();
        assert!((est.point - (-7.0 / 15.0)).abs() < 1e-12);
    }

    #[test]
    fn pape_budget_zero_budget_is_zero() {
        let d = five_unit();
        let rule = Rule::scoring(vec![0.3, 0.9, 0.1, 0.5, 0.7]).unwrap();
        let est = estimate_pape_budget(&d, &rule, 0.0).unwrap();
        assert_eq!(est.point, 0.0);
        assert_eq!(est.std_error, Some(0.0));
    }

    #[test]
    fn papd_worked_example() {
        let d = five_unit();
        let f = Rule::scoring(vec![5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        let g = Rule::scoring(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let est = estimate_papd_budget(&d, &f, &g, 0.4).unwrap();
        assert!((est.point - 7.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn papd_same_rule_is_zero_with_zero_marginal_terms() {
        let d = five_unit();
        let f = Rule::scoring(vec![5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        let est = estimate_papd_budget(&d, &f, &f, 0.4).unwrap();
        assert_eq!(est.point, 0.0);
        // remaining variance is only the conservative coupling allowance
        assert!(est.std_error.unwrap() >= 0.0);
    }

    #[test]
    fn papd_is_antisymmetric_with_identical_standard_error() {
        let d = five_unit();
        let f = Rule::scoring(vec![5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        let g = Rule::scoring(vec![0.5, 2.5, 1.5, 4.5, 3.5]).unwrap();
        let fg = estimate_papd_budget(&d, &f, &g, 0.6).unwrap();
        let gf = estimate_papd_budget(&d, &g, &f, 0.6).unwrap();
        assert!((fg.point + gf.point).abs() < 1e-12);
        assert!((fg.std_error.unwrap() - gf.std_error.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn value_difference_worked_example() {
        let d = five_unit();
        let f = Rule::fixed(vec![1, 0, 0, 1, 0]).unwrap();
        let g = Rule::fixed(vec![1; 5]).unwrap();
        let est = value_difference(&d, &f, &g).unwrap();
        assert!((est.point - (1.0 / 6.0 - 8.0 / 3.0)).abs() < 1e-12);
        let swapped = value_difference(&d, &g, &f).unwrap();
        assert!((est.point + swapped.point).abs() < 1e-12);
        let same = value_difference(&d, &f, &f).unwrap();
        assert_eq!(same.point, 0.0);
    }

    #[test]
    fn aupec_zero_outcomes_is_zero_with_zero_variance() {
        let d = ExperimentData::new(vec![0.0; 6], vec![1, 0, 1, 0, 1, 0], None).unwrap();
        let rule = Rule::scoring(vec![6.0, 5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        let curve = estimate_aupec(&d, &rule, ZMomentMode::ExactPolynomial).unwrap();
        assert_eq!(curve.aupec.point, 0.0);
        assert_eq!(curve.aupec.std_error, Some(0.0));
    }

    /// Independent direct summation over the budget grid (uplift-curve style).
    fn direct_grid_average(data: &ExperimentData, scores: &[f64]) -> f64 {
        let n = data.n();
        let mut total = 0.0;
        for k in 1..=n {
            // re-derive the top-k set from scratch
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| {
                scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b))
            });
            let top: std::collections::HashSet<usize> = idx[..k].iter().copied().collect();
            let mut s1 = 0.0;
            let mut s0 = 0.0;
            for i in 0..n {
                let f = top.contains(&i);
                if data.t()[i] == 1 && f {
                    s1 += data.y()[i];
                }
                if data.t()[i] == 0 && !f {
                    s0 += data.y()[i];
                }
            }
            total += s1 / data.n1() as f64 + s0 / data.n0() as f64;
        }
        total / n as f64 - 0.5 * data.treated_mean() - 0.5 * data.control_mean()
    }

    #[test]
    fn aupec_with_open_floor_matches_direct_grid_average() {
        let d = five_unit();
        let scores = vec![5.0, 4.0, 3.0, 2.0, 1.0];
        let rule = Rule::scoring(scores.clone()).unwrap();
        let curve = estimate_aupec(&d, &rule, ZMomentMode::ExactPolynomial).unwrap();
        let oracle = direct_grid_average(&d, &scores);
        assert!(close(curve.aupec.point, oracle, 1e-12));
        assert_eq!(curve.points.len(), 5);
        assert!((curve.p_hat_f - 1.0).abs() < 1e-15);
    }

    #[test]
    fn aupec_curve_reports_budget_grid() {
        let d = five_unit();
        let rule = Rule::scoring(vec![5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        let curve = estimate_aupec(&d, &rule, ZMomentMode::ExactPolynomial).unwrap();
        for (k, pt) in curve.points.iter().enumerate() {
            assert!((pt.p - (k + 1) as f64 / 5.0).abs() < 1e-15);
        }
        // the budgeted prescriptive effect at p = 0.4 must agree with the
        // standalone estimator
        let standalone = estimate_pape_budget(&d, &rule, 0.4).unwrap();
        assert!((curve.points[1].pape - standalone.point).abs() < 1e-12);
    }

    #[test]
    fn normalized_aupec_matches_literal_ratio_evaluation() {
        let d = five_unit();
        let scores = vec![5.0, 4.0, 3.0, 2.0, 1.0];
        let rule = Rule::scoring(scores.clone()).unwrap();
        let est = estimate_aupec_normalized(&d, &rule, ZMomentMode::ExactPolynomial).unwrap();
        // independent literal evaluation: weighted arm sums over the grid,
        // divided by the difference in means, minus one half
        let n = d.n();
        let n_f = n; // open floor threshold
        let mut weight = vec![0.0; n];
        for k in 1..=n_f {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
            for &i in &idx[..k] {
                weight[i] += 1.0;
            }
        }
        // plateau segment: (n - n_f) copies of the maximal-proportion rule
        let tau = d.treated_mean() - d.control_mean();
        let mut a = 0.0;
        for i in 0..n {
            let w = weight[i] / n as f64;
            if d.t()[i] == 1 {
                a += d.y()[i] * w / d.n1() as f64;
            } else {
                a -= d.y()[i] * w / d.n0() as f64;
            }
        }
        let oracle = a / tau - 0.5;
        assert!(close(est.point, oracle, 1e-12));
    }

    #[test]
    fn normalized_aupec_rejects_zero_effect() {
        let d = ExperimentData::new(vec![1.0, 1.0, 1.0, 1.0], vec![1, 0, 1, 0], None).unwrap();
        let rule = Rule::scoring(vec![4.0, 3.0, 2.0, 1.0]).unwrap();
        let err = estimate_aupec_normalized(&d, &rule, ZMomentMode::ExactPolynomial).unwrap_err();
        assert!(matches!(err, Error::NumericDegenerate(_)));
    }

    #[test]
    fn budgeted_ops_reject_fixed_rules() {
        let d = five_unit();
        let fixed = Rule::fixed(vec![1, 0, 0, 1, 0]).unwrap();
        assert!(estimate_pape_budget(&d, &fixed, 0.4).is_err());
    }
}
