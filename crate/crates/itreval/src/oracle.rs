//! Ground-truth engine: exact population metrics from full potential-outcome
//! tables, and exhaustive enumeration of the randomization distribution of any
//! estimator at small n.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::data::ExperimentData;
use crate::error::{Error, Result};
use crate::rule::{priority_order, Rule};

/// A finite population with both potential outcomes known for every unit.
/// Population quantities are empirical means over this table.
#[derive(Debug, Clone)]
pub struct PotentialPopulation {
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub x: Option<Vec<Vec<f64>>>,
    pub scores: Option<Vec<f64>>,
}

impl PotentialPopulation {
    pub fn new(y0: Vec<f64>, y1: Vec<f64>) -> Result<Self> {
        if y0.len() != y1.len() || y0.is_empty() {
            return Err(Error::Input("potential-outcome vectors must match and be nonempty".into()));
        }
        if y0.iter().chain(&y1).any(|v| !v.is_finite()) {
            return Err(Error::Input("potential outcomes must be finite".into()));
        }
        Ok(Self { y0, y1, x: None, scores: None })
    }

    pub fn with_scores(mut self, scores: Vec<f64>) -> Self {
        self.scores = Some(scores);
        self
    }

    pub fn n(&self) -> usize {
        self.y0.len()
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.y1[i] - self.y0[i]
    }

    pub fn mean_y0(&self) -> f64 {
        self.y0.iter().sum::<f64>() / self.n() as f64
    }

    pub fn mean_y1(&self) -> f64 {
        self.y1.iter().sum::<f64>() / self.n() as f64
    }

    pub fn mean_tau(&self) -> f64 {
        self.mean_y1() - self.mean_y0()
    }

    /// Observed data under a concrete assignment vector.
    pub fn observe(&self, treated: &[u8]) -> Result<ExperimentData> {
        let y = (0..self.n())
            .map(|i| if treated[i] == 1 { self.y1[i] } else { self.y0[i] })
            .collect();
        ExperimentData::new(y, treated.to_vec(), self.x.clone())
    }
}

/// Which population quantity [`true_metric`] evaluates.
#[derive(Debug, Clone)]
pub enum MetricSpec {
    Pav,
    Pape,
    PapeBudget(f64),
    /// Difference in budgeted prescriptive effect against a second scoring rule.
    PapdBudget { p: f64, scores_g: Vec<f64> },
    Aupec,
    AupecNorm,
}

fn population_value(pop: &PotentialPopulation, f: &[u8]) -> f64 {
    (0..pop.n())
        .map(|i| if f[i] == 1 { pop.y1[i] } else { pop.y0[i] })
        .sum::<f64>()
        / pop.n() as f64
}

fn true_pape_budget(pop: &PotentialPopulation, rule: &Rule, p: f64) -> Result<f64> {
    let f = rule.assignments(Some(p), pop.n())?;
    Ok(population_value(pop, &f) - p * pop.mean_y1() - (1.0 - p) * pop.mean_y0())
}

/// Exact population metric by direct summation over the potential-outcome
/// table. Budget thresholds are population quantiles of the rule's scores; the
/// budget-curve area integrates the step-function value curve exactly.
pub fn true_metric(pop: &PotentialPopulation, rule: &Rule, spec: &MetricSpec) -> Result<f64> {
    let n = pop.n();
    if rule.len() != n {
        return Err(Error::Input("rule length does not match population".into()));
    }
    match spec {
        MetricSpec::Pav => {
            let f = rule.assignments(None, n)?;
            Ok(population_value(pop, &f))
        }
        MetricSpec::Pape => {
            let f = rule.assignments(None, n)?;
            let p_f = f.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
            Ok(population_value(pop, &f) - p_f * pop.mean_y1() - (1.0 - p_f) * pop.mean_y0())
        }
        MetricSpec::PapeBudget(p) => true_pape_budget(pop, rule, *p),
        MetricSpec::PapdBudget { p, scores_g } => {
            let g = Rule::scoring(scores_g.clone())?;
            Ok(true_pape_budget(pop, rule, *p)? - true_pape_budget(pop, &g, *p)?)
        }
        MetricSpec::Aupec => true_aupec(pop, rule),
        MetricSpec::AupecNorm => {
            let tau = pop.mean_tau();
            let scale = pop
                .y0
                .iter()
                .chain(&pop.y1)
                .fold(0.0f64, |m, v| m.max(v.abs()));
            if tau.abs() < 1e-10 * scale.max(1e-300) {
                return Err(Error::NumericDegenerate(
                    "population effect too close to zero to normalize".into(),
                ));
            }
            Ok(true_aupec(pop, rule)? / tau)
        }
    }
}

fn true_aupec(pop: &PotentialPopulation, rule: &Rule) -> Result<f64> {
    let n = pop.n();
    let scores = rule.scores()?;
    let c_star = rule.floor_threshold().unwrap_or(f64::NEG_INFINITY);
    let n_f = scores.iter().filter(|&&s| s > c_star).count();
    let order = priority_order(scores);

    // value of treating the top-k set, for k = 0..=n, by prefix updates
    let mut value = pop.y0.iter().sum::<f64>() / n as f64;
    let mut values = Vec::with_capacity(n + 1);
    values.push(value);
    for &unit in &order {
        value += (pop.y1[unit] - pop.y0[unit]) / n as f64;
        values.push(value);
    }

    let integral: f64 = values[..n_f].iter().sum::<f64>() / n as f64;
    let plateau = (1.0 - n_f as f64 / n as f64) * values[n_f];
    Ok(integral + plateau - 0.5 * (pop.mean_y0() + pop.mean_y1()))
}

/// Finite-sample analog of the prescriptive effect on a realized assignment
/// problem: the value of the rule over these n units minus the value of
/// randomly treating the same share of them.
pub fn sape(pop: &PotentialPopulation, f: &[u8]) -> f64 {
    let n = pop.n() as f64;
    let p_hat = f.iter().map(|&v| v as f64).sum::<f64>() / n;
    (0..pop.n())
        .map(|i| {
            let chosen = if f[i] == 1 { pop.y1[i] } else { pop.y0[i] };
            chosen - p_hat * pop.y1[i] - (1.0 - p_hat) * pop.y0[i]
        })
        .sum::<f64>()
        / n
}

/// Exact distribution of an estimator over all complete-randomization
/// assignments with `n1` treated units.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub mean: f64,
    /// Population variance over the equally likely assignments.
    pub variance: f64,
    /// Estimator value per assignment, in lexicographic assignment order.
    pub values: Vec<f64>,
}

fn binomial_count(n: usize, k: usize) -> u128 {
    let mut acc: u128 = 1;
    for j in 0..k.min(n - k) {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
        if acc > u128::from(u64::MAX) {
            return u128::MAX;
        }
    }
    acc
}

/// Evaluates `estimator` under every assignment with exactly `n1` treated
/// units and returns the exact first two moments. Guarded to at most 10^6
/// assignments.
pub fn enumerate_randomizations<F>(
    pop: &PotentialPopulation,
    n1: usize,
    estimator: F,
) -> Result<ExactDistribution>
where
    F: Fn(&ExperimentData) -> Result<f64>,
{
    let n = pop.n();
    if n1 == 0 || n1 >= n {
        return Err(Error::Input("need 1 <= n1 < n for complete randomization".into()));
    }
    let count = binomial_count(n, n1);
    if count > 1_000_000 {
        return Err(Error::SizeGuard(format!(
            "enumeration would visit {count} assignments (limit 1000000)"
        )));
    }

    let mut values = Vec::with_capacity(count as usize);
    let mut comb: Vec<usize> = (0..n1).collect();
    let mut assignment = vec![0u8; n];
    let mut done = false;
    while !done {
        assignment.iter_mut().for_each(|a| *a = 0);
        for &i in &comb {
            assignment[i] = 1;
        }
        let data = pop.observe(&assignment)?;
        values.push(estimator(&data)?);

        // advance to the next combination in lexicographic order
        done = true;
        for i in (0..n1).rev() {
            if comb[i] < i + n - n1 {
                comb[i] += 1;
                for j in (i + 1)..n1 {
                    comb[j] = comb[j - 1] + 1;
                }
                done = false;
                break;
            }
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let variance =
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    Ok(ExactDistribution { mean, variance, values })
}

/// Effect structure for randomly generated verification populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectStructure {
    /// Unit effects vary and correlate with the scoring rule.
    Heterogeneous,
    /// Every unit shares one constant effect.
    Constant,
}

/// Seeded generator for small verification populations with distinct scores.
pub fn random_population(n: usize, seed: u64, effect: EffectStructure) -> PotentialPopulation {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut scores: Vec<f64> =
        (0..n).map(|i| i as f64 + rng.gen_range(0.05..0.45)).collect();
    // shuffle so score order and index order differ
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        scores.swap(i, j);
    }
    let y0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y1: Vec<f64> = match effect {
        EffectStructure::Constant => {
            let tau = rng.gen_range(0.5..2.0);
            y0.iter().map(|v| v + tau).collect()
        }
        EffectStructure::Heterogeneous => y0
            .iter()
            .zip(&scores)
            .map(|(v, s)| v + 0.3 * s / n as f64 + rng.gen_range(-0.5..0.5) + 0.4)
            .collect(),
    };
    PotentialPopulation { y0, y1, x: None, scores: Some(scores) }
}
