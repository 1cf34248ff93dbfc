//! Tail bounds on the conditional bias that budget-threshold estimation
//! introduces, plus the conservative covariance bound used when two estimated
//! thresholds interact.
//!
//! Estimating the budget threshold from the sample replaces a population
//! quantile with an empirical one; the resulting conditional bias can be
//! bounded by an order-statistic tail probability of a Beta distribution,
//! scaled through a cap on the conditional average treatment effect near the
//! threshold.

use crate::betafn::reg_inc_beta;
use crate::error::{Error, Result};
use crate::rule::floor_np;

/// A bound on `P(|conditional bias| >= epsilon)`.
#[derive(Debug, Clone, Copy)]
pub struct BiasBound {
    pub epsilon: f64,
    /// Width of the quantile window implied by `epsilon` and the effect cap.
    pub gamma: f64,
    /// Upper bound on the probability that the conditional bias exceeds
    /// `epsilon`; always in `[0, 1]`.
    pub probability_bound: f64,
    /// Cap on the conditional average treatment effect near the threshold
    /// (user-supplied, or a plug-in group contrast).
    pub cate_cap: f64,
}

fn beta_tail_two_sided(center: f64, gamma: f64, alpha: f64, beta: f64) -> Result<f64> {
    let hi = (center + gamma).clamp(0.0, 1.0);
    let lo = (center - gamma).clamp(0.0, 1.0);
    Ok(1.0 - reg_inc_beta(hi, alpha, beta)? + reg_inc_beta(lo, alpha, beta)?)
}

fn check_inputs(n: usize, p: f64, epsilon: f64, cate_cap: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Input("bias bound needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Input(format!("proportion {p} outside [0, 1]")));
    }
    if epsilon <= 0.0 {
        return Err(Error::Input("epsilon must be positive".into()));
    }
    if cate_cap <= 0.0 {
        return Err(Error::Input("effect cap must be positive".into()));
    }
    Ok(())
}

/// Bias bound for the budget-constrained prescriptive-effect estimator.
pub fn bias_bound_pape_budget(n: usize, p: f64, epsilon: f64, cate_cap: f64) -> Result<BiasBound> {
    check_inputs(n, p, epsilon, cate_cap)?;
    let k = floor_np(n, p);
    let gamma = epsilon / cate_cap;
    let raw = beta_tail_two_sided(1.0 - p, gamma, (n - k) as f64, k as f64 + 1.0)?;
    Ok(BiasBound { epsilon, gamma, probability_bound: raw.clamp(0.0, 1.0), cate_cap })
}

/// Bias bound for the budget-curve area estimator. The effect cap enters with
/// an extra factor of two because the estimated maximal treated proportion
/// perturbs both the integral and its plateau segment.
pub fn bias_bound_aupec(n: usize, p_f: f64, epsilon: f64, cate_cap: f64) -> Result<BiasBound> {
    check_inputs(n, p_f, epsilon, cate_cap)?;
    let k = floor_np(n, p_f);
    let gamma = epsilon / (2.0 * cate_cap);
    let raw = beta_tail_two_sided(1.0 - p_f, gamma, (n - k) as f64, k as f64 + 1.0)?;
    Ok(BiasBound { epsilon, gamma, probability_bound: raw.clamp(0.0, 1.0), cate_cap })
}

/// Bias bound for the difference of two budget-constrained estimators; both
/// thresholds are estimated, doubling each tail.
pub fn bias_bound_papd(n: usize, p: f64, epsilon: f64, cate_cap: f64) -> Result<BiasBound> {
    check_inputs(n, p, epsilon, cate_cap)?;
    let k = floor_np(n, p);
    let gamma = epsilon / cate_cap;
    let hi = (1.0 - p + gamma).clamp(0.0, 1.0);
    let lo = (1.0 - p - gamma).clamp(0.0, 1.0);
    let alpha = (n - k) as f64;
    let beta = k as f64 + 1.0;
    let raw = 1.0 - 2.0 * reg_inc_beta(hi, alpha, beta)? + 2.0 * reg_inc_beta(lo, alpha, beta)?;
    Ok(BiasBound { epsilon, gamma, probability_bound: raw.clamp(0.0, 1.0), cate_cap })
}

/// Conservative bound on the covariance term coupling the two estimated
/// thresholds in a budgeted rule comparison. It is attained when the two
/// scoring rules are perfectly (anti)correlated, so it never understates the
/// variance. Always nonnegative and symmetric in the two group contrasts.
pub fn papd_cov_bound(n: usize, p: f64, kappa_f1: f64, kappa_g1: f64) -> f64 {
    let k = floor_np(n, p);
    if n < 2 {
        return 0.0;
    }
    let k = k as f64;
    let n_f = n as f64;
    k * k.max(n_f - k) / (n_f * n_f * (n_f - 1.0)) * (kappa_f1 * kappa_g1).abs()
}
