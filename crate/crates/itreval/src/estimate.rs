//! Metric estimates and their diagnostics.

use std::collections::BTreeMap;

/// Which quantity a [`MetricEstimate`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Average outcome if the rule's assignments were implemented.
    Pav,
    /// Rule value minus the value of randomly treating the same proportion.
    Pape,
    /// Budget-constrained version of [`Metric::Pape`].
    PapeBudget,
    /// Difference in budget-constrained prescriptive effect between two rules.
    PapdBudget,
    /// Prescriptive effect averaged over the whole budget range.
    Aupec,
    /// Scale-invariant normalization of [`Metric::Aupec`].
    AupecNorm,
    /// Difference in average value between two budgetless rules.
    ValueDiff,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Pav => "pav",
            Metric::Pape => "pape",
            Metric::PapeBudget => "pape_budget",
            Metric::PapdBudget => "papd_budget",
            Metric::Aupec => "aupec",
            Metric::AupecNorm => "aupec_norm",
            Metric::ValueDiff => "value_diff",
        }
    }
}

/// Named diagnostic values attached to an estimate (plug-in quantities,
/// substitution/clamp flags, seeds). Ordered map so reports are reproducible
/// byte-for-byte.
pub type Diagnostics = BTreeMap<String, f64>;

/// A point estimate with its standard error and diagnostics.
///
/// `std_error` is `None` when the variance could not be estimated (an arm with
/// fewer than two units, or no estimable group contrast); the point estimate is
/// still reported.
#[derive(Debug, Clone)]
pub struct MetricEstimate {
    pub metric: Metric,
    pub point: f64,
    pub std_error: Option<f64>,
    pub n_used: usize,
    pub proportion_treated: f64,
    pub diagnostics: Diagnostics,
}

impl MetricEstimate {
    pub fn new(metric: Metric, point: f64, n_used: usize, proportion_treated: f64) -> Self {
        Self {
            metric,
            point,
            std_error: None,
            n_used,
            proportion_treated,
            diagnostics: Diagnostics::new(),
        }
    }

    /// Two-sided confidence interval at level `1 - alpha` using a normal
    /// reference distribution.
    pub fn confidence_interval(&self, alpha: f64) -> Option<(f64, f64)> {
        let se = self.std_error?;
        let z = crate::betafn::normal_quantile(1.0 - alpha / 2.0);
        Some((self.point - z * se, self.point + z * se))
    }

    pub fn with_diag(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

/// Clamps an assembled variance at zero, recording the clamp in `diag`, and
/// converts it to a standard error.
pub fn finalize_std_error(variance: f64, diag: &mut Diagnostics) -> f64 {
    if variance < 0.0 {
        diag.insert("variance_clamped".into(), 1.0);
        0.0
    } else {
        variance.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_variance_clamps_and_flags() {
        let mut diag = Diagnostics::new();
        assert_eq!(finalize_std_error(-1.0e-9, &mut diag), 0.0);
        assert_eq!(diag.get("variance_clamped"), Some(&1.0));
        let mut diag = Diagnostics::new();
        assert!((finalize_std_error(4.0, &mut diag) - 2.0).abs() < 1e-15);
        assert!(diag.is_empty());
    }

    #[test]
    fn ci_is_symmetric() {
        let mut e = MetricEstimate::new(Metric::Pape, 1.0, 10, 0.5);
        e.std_error = Some(2.0);
        let (lo, hi) = e.confidence_interval(0.05).unwrap();
        assert!((hi + lo - 2.0).abs() < 1e-10);
        assert!((hi - 1.0 - 1.959963984540054 * 2.0).abs() < 1e-6);
    }
}
