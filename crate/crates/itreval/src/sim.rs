//! Synthetic-experiment generator and Monte Carlo coverage studies.
//!
//! The outcome model is a fixed nonlinear surface over seven covariates with a
//! linear-in-`xi` interaction effect; treatment is completely randomized with
//! half the units treated. Covariates are drawn by bootstrap from a covariate
//! pool, so the sampling distribution equals the pool's empirical distribution
//! and exact population truths can be computed on the pool itself.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::betafn::normal_cdf;
use crate::cv::{crossval, CvMetric};
use crate::data::{center_outcomes, ColumnSpec, ExperimentData};
use crate::error::{Error, Result};
use crate::learners::{FittedScorer, LearnerSpec};
use crate::metrics::{estimate_aupec, estimate_papd_budget, estimate_pape, estimate_pape_budget};
use crate::oracle::{true_metric, MetricSpec, PotentialPopulation};
use crate::par::map_indexed;
use crate::rule::Rule;
use crate::zmoments::ZMomentMode;

/// Column order of the covariate pool.
pub const COVARIATE_NAMES: [&str; 7] = ["x1", "x3", "x10", "x14", "x15", "x24", "x43"];
const X1: usize = 0;
const X3: usize = 1;
const X10: usize = 2;
const X14: usize = 3;
const X15: usize = 4;
const X24: usize = 5;
const X43: usize = 6;

/// Where covariate rows come from.
#[derive(Debug, Clone)]
pub enum CovariateSource {
    /// Built-in generator: x1, x43 standard normal; x24 uniform on [1, 3];
    /// x3 in {0, 1}; x10, x14, x15 in {1, 2}; all independent.
    Synthetic { pool_size: usize },
    /// CSV file with the seven named covariate columns.
    UserCsv(std::path::PathBuf),
}

/// Configuration of one simulation scenario.
#[derive(Debug, Clone)]
pub struct DgpConfig {
    pub n: usize,
    /// Interaction-effect scale (2 = strong effects, 1/3 = weak effects).
    pub xi: f64,
    pub trials: usize,
    pub seed: u64,
    pub covariate_source: CovariateSource,
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 20 {
            return Err(Error::Input("simulation needs n >= 20".into()));
        }
        if self.trials < 1 {
            return Err(Error::Input("need at least one trial".into()));
        }
        if self.xi <= 0.0 {
            return Err(Error::Input("effect scale must be positive".into()));
        }
        Ok(())
    }
}

/// Finite covariate population that plays the role of the sampling
/// distribution.
#[derive(Debug, Clone)]
pub struct CovariatePool {
    pub rows: Vec<Vec<f64>>,
}

fn splitmix(seed: u64, counter: u64) -> u64 {
    let mut z = seed ^ counter.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Builds the covariate pool for a configuration (deterministic in the seed).
pub fn build_pool(config: &DgpConfig) -> Result<CovariatePool> {
    match &config.covariate_source {
        CovariateSource::Synthetic { pool_size } => {
            let mut rng = ChaCha20Rng::seed_from_u64(splitmix(config.seed, 0xC0FFEE));
            let rows = (0..*pool_size)
                .map(|_| {
                    let normal = |rng: &mut ChaCha20Rng| -> f64 {
                        StandardNormal.sample(rng)
                    };
                    let bern = |rng: &mut ChaCha20Rng| -> f64 {
                        if rng.gen_bool(0.5) {
                            1.0
                        } else {
                            0.0
                        }
                    };
                    let mut row = vec![0.0; 7];
                    row[X1] = normal(&mut rng);
                    row[X3] = bern(&mut rng);
                    row[X10] = 1.0 + bern(&mut rng);
                    row[X14] = 1.0 + bern(&mut rng);
                    row[X15] = 1.0 + bern(&mut rng);
                    row[X24] = rng.gen_range(1.0..3.0);
                    row[X43] = normal(&mut rng);
                    row
                })
                .collect();
            Ok(CovariatePool { rows })
        }
        CovariateSource::UserCsv(path) => {
            let spec = ColumnSpec {
                y: "y".into(),
                t: "t".into(),
                rules: Vec::new(),
                covariates: COVARIATE_NAMES.iter().map(|s| s.to_string()).collect(),
            };
            // the pool only needs covariates; outcome/treatment columns are
            // not required in covariate-pool files
            let raw = std::fs::read_to_string(path)?;
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(raw.as_bytes());
            let headers = rdr.headers()?.clone();
            let cols: Vec<usize> = spec
                .covariates
                .iter()
                .map(|name| {
                    headers
                        .iter()
                        .position(|h| h == name)
                        .ok_or_else(|| Error::Input(format!("missing covariate column `{name}`")))
                })
                .collect::<Result<_>>()?;
            let mut rows = Vec::new();
            for record in rdr.records() {
                let record = record?;
                let mut row = Vec::with_capacity(7);
                for &c in &cols {
                    let v: f64 = record
                        .get(c)
                        .unwrap_or("")
                        .parse()
                        .map_err(|_| Error::Input("non-numeric covariate value".into()))?;
                    row.push(v);
                }
                rows.push(row);
            }
            if rows.is_empty() {
                return Err(Error::DegenerateData("empty covariate pool".into()));
            }
            Ok(CovariatePool { rows })
        }
    }
}

/// Assignment-probability surface used inside the baseline formula.
fn propensity(row: &[f64]) -> f64 {
    1.0 / (1.0 + (3.0 * (row[X1] + row[X43] + 0.3 * (row[X10] - 1.0)) - 1.0).exp())
}

/// Baseline outcome surface.
pub fn baseline(row: &[f64]) -> f64 {
    -(normal_cdf(propensity(row))).sin() + row[X43]
}

/// Unit-level treatment effect: `xi * (x3 * x24 + (x14 - 1) - (x15 - 1))`.
pub fn effect(row: &[f64], xi: f64) -> f64 {
    xi * (row[X3] * row[X24] + (row[X14] - 1.0) - (row[X15] - 1.0))
}

/// Noise scale: a quarter of the standard deviation of the
/// propensity-weighted outcome surface over the given rows.
fn noise_scale(rows: &[&Vec<f64>], xi: f64) -> f64 {
    let vals: Vec<f64> =
        rows.iter().map(|r| baseline(r) + propensity(r) * effect(r, xi)).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var =
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() as f64 - 1.0);
    0.25 * var.sqrt()
}

/// Draws one synthetic experiment: bootstrap covariates from the pool, apply
/// the outcome surfaces, add shared unit-level noise, and completely randomize
/// `floor(n/2)` units into treatment. Returns the observed data together with
/// the full potential-outcome table.
pub fn dgp_sample_with_seed(
    config: &DgpConfig,
    pool: &CovariatePool,
    seed: u64,
) -> (ExperimentData, PotentialPopulation) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = config.n;
    let rows: Vec<&Vec<f64>> =
        (0..n).map(|_| &pool.rows[rng.gen_range(0..pool.rows.len())]).collect();
    let sigma = noise_scale(&rows, config.xi);
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for r in &rows {
        let eps: f64 = StandardNormal.sample(&mut rng);
        let base = baseline(r) + sigma * eps;
        y0.push(base);
        y1.push(base + effect(r, config.xi));
    }
    let n1 = n / 2;
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut t = vec![0u8; n];
    for &i in order.iter().take(n1) {
        t[i] = 1;
    }
    let x: Vec<Vec<f64>> = rows.iter().map(|r| (*r).clone()).collect();
    let y: Vec<f64> =
        (0..n).map(|i| if t[i] == 1 { y1[i] } else { y0[i] }).collect();
    let data = ExperimentData::new(y, t, Some(x.clone())).expect("valid generated data");
    let pop = PotentialPopulation { y0, y1, x: Some(x), scores: None };
    (data, pop)
}

/// Convenience wrapper using the configuration seed directly.
pub fn dgp_sample(config: &DgpConfig, pool: &CovariatePool) -> (ExperimentData, PotentialPopulation) {
    dgp_sample_with_seed(config, pool, config.seed)
}

/// Metrics a coverage study can exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyMetric {
    Pape,
    PapeBudget,
    Aupec,
    Papd,
}

impl StudyMetric {
    pub fn label(self) -> &'static str {
        match self {
            StudyMetric::Pape => "pape",
            StudyMetric::PapeBudget => "pape_budget",
            StudyMetric::Aupec => "aupec",
            StudyMetric::Papd => "papd_budget",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pape" => Ok(StudyMetric::Pape),
            "pape-budget" | "pape_budget" => Ok(StudyMetric::PapeBudget),
            "aupec" => Ok(StudyMetric::Aupec),
            "papd" | "papd_budget" => Ok(StudyMetric::Papd),
            other => Err(Error::Input(format!("unknown study metric `{other}`"))),
        }
    }
}

/// Fixed-rule or cross-validated study.
#[derive(Debug, Clone)]
pub enum StudyMode {
    /// Rules are trained once on an independent draw and held fixed; truths
    /// are exact population values over the covariate pool.
    FixedRule,
    /// Each trial re-estimates the rule by cross-validation; the truth is
    /// approximated by averaging estimates over auxiliary replications.
    CrossVal { k_folds: usize, learner: LearnerSpec, aux_replications: usize },
}

/// One row of a coverage report.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub metric: String,
    pub truth: f64,
    pub bias: f64,
    pub sd: f64,
    /// Mean reported standard error across trials (calibration check: should
    /// track `sd`).
    pub mean_se: f64,
    pub coverage: f64,
    pub trials: usize,
    pub redraws: usize,
}

/// Coverage-study output: one row per requested metric.
#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub scenario: String,
    pub rows: Vec<MetricReport>,
}

/// Budget used by the budgeted metrics of a study.
#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub budget: f64,
    pub mc_draws: u64,
    /// Worker cap for trial evaluation; results do not depend on it.
    pub threads: usize,
    /// Centering applied per trial before estimation.
    pub center: bool,
    /// Covariate columns the fixed ridge scorer may use (`None` = all seven).
    pub rule_covariates: Option<Vec<usize>>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            budget: 0.2,
            mc_draws: 10_000,
            threads: 1,
            center: true,
            rule_covariates: None,
        }
    }
}

struct TrialOutcome {
    point: f64,
    se: f64,
    covered: bool,
    redraws: usize,
}

fn summarize(
    metric: StudyMetric,
    truth: f64,
    outcomes: &[TrialOutcome],
) -> MetricReport {
    let points: Vec<f64> = outcomes.iter().map(|o| o.point).collect();
    let mean = points.iter().sum::<f64>() / points.len() as f64;
    let sd = if points.len() > 1 {
        (points.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (points.len() as f64 - 1.0))
            .sqrt()
    } else {
        0.0
    };
    MetricReport {
        metric: metric.label().to_string(),
        truth,
        bias: mean - truth,
        sd,
        mean_se: outcomes.iter().map(|o| o.se).sum::<f64>() / outcomes.len() as f64,
        coverage: outcomes.iter().filter(|o| o.covered).count() as f64
            / outcomes.len() as f64,
        trials: outcomes.len(),
        redraws: outcomes.iter().map(|o| o.redraws).sum(),
    }
}

/// Fits the two fixed scoring rules used by fixed-rule studies: a ridge
/// two-arm linear scorer and a one-covariate binned scorer, both trained on an
/// independent draw.
fn train_fixed_rules(
    config: &DgpConfig,
    pool: &CovariatePool,
    options: &StudyOptions,
) -> Result<(FittedScorer, FittedScorer)> {
    let train_config = DgpConfig { n: 500.max(config.n), ..config.clone() };
    let (train, _) =
        dgp_sample_with_seed(&train_config, pool, splitmix(config.seed, 0x7141E));
    let f = LearnerSpec::LinearTLearner {
        ridge: 1e-6,
        covariates: options.rule_covariates.clone(),
    }
    .fit(&train)?;
    let g = LearnerSpec::DiffMeansByBin { covariate: X24, bins: 4 }.fit(&train)?;
    Ok((f, g))
}

fn pool_population(pool: &CovariatePool, xi: f64) -> PotentialPopulation {
    let y0: Vec<f64> = pool.rows.iter().map(|r| baseline(r)).collect();
    let y1: Vec<f64> =
        pool.rows.iter().zip(&y0).map(|(r, b)| b + effect(r, xi)).collect();
    PotentialPopulation { y0, y1, x: Some(pool.rows.clone()), scores: None }
}

/// Runs a coverage study: per metric, the empirical bias, spread, and the
/// fraction of nominal 95% confidence intervals that cover the truth.
pub fn coverage_study(
    config: &DgpConfig,
    metrics: &[StudyMetric],
    mode: &StudyMode,
    options: &StudyOptions,
) -> Result<CoverageReport> {
    config.validate()?;
    if !(0.0..=1.0).contains(&options.budget) {
        return Err(Error::Input("study budget outside [0, 1]".into()));
    }
    let pool = build_pool(config)?;
    match mode {
        StudyMode::FixedRule => fixed_rule_study(config, &pool, metrics, options),
        StudyMode::CrossVal { k_folds, learner, aux_replications } => {
            crossval_study(config, &pool, metrics, options, *k_folds, learner, *aux_replications)
        }
    }
}

fn fixed_rule_study(
    config: &DgpConfig,
    pool: &CovariatePool,
    metrics: &[StudyMetric],
    options: &StudyOptions,
) -> Result<CoverageReport> {
    let (scorer_f, scorer_g) = train_fixed_rules(config, pool, options)?;
    let pool_idx: Vec<usize> = (0..pool.rows.len()).collect();
    let mut pop = pool_population(pool, config.xi);
    let pool_data = ExperimentData::new(
        vec![0.0; pool.rows.len()],
        {
            // dummy arm split only to satisfy the container; scores depend on
            // covariates alone
            let mut t = vec![0u8; pool.rows.len()];
            t[0] = 1;
            t
        },
        Some(pool.rows.clone()),
    )?;
    let scores_f_pool = scorer_f.scores(&pool_data, &pool_idx)?;
    let scores_g_pool = scorer_g.scores(&pool_data, &pool_idx)?;
    pop.scores = Some(scores_f_pool.clone());

    let rule_f_pool = Rule::scoring_with_floor(scores_f_pool.clone(), 0.0)?;
    let truths: Vec<f64> = metrics
        .iter()
        .map(|m| match m {
            StudyMetric::Pape => true_metric(&pop, &rule_f_pool, &MetricSpec::Pape),
            StudyMetric::PapeBudget => {
                true_metric(&pop, &rule_f_pool, &MetricSpec::PapeBudget(options.budget))
            }
            StudyMetric::Aupec => true_metric(&pop, &rule_f_pool, &MetricSpec::Aupec),
            StudyMetric::Papd => true_metric(
                &pop,
                &rule_f_pool,
                &MetricSpec::PapdBudget { p: options.budget, scores_g: scores_g_pool.clone() },
            ),
        })
        .collect::<Result<_>>()?;

    let z95 = crate::betafn::normal_quantile(0.975);
    let rows = metrics
        .iter()
        .zip(&truths)
        .map(|(&metric, &truth)| {
            let outcomes = map_indexed(config.trials, options.threads, |trial| {
                let mut redraws = 0usize;
                loop {
                    let trial_seed =
                        splitmix(config.seed, (trial as u64) << 8 | redraws as u64);
                    let (data, _) = dgp_sample_with_seed(config, pool, trial_seed);
                    match fixed_trial_estimate(
                        &data, &scorer_f, &scorer_g, metric, options, trial_seed,
                    ) {
                        Ok((point, se)) => {
                            let covered = (point - z95 * se) <= truth && truth <= (point + z95 * se);
                            return TrialOutcome { point, se, covered, redraws };
                        }
                        Err(_) if redraws < 64 => {
                            redraws += 1;
                        }
                        Err(_) => {
                            return TrialOutcome { point: f64::NAN, se: f64::NAN, covered: false, redraws };
                        }
                    }
                }
            });
            summarize(metric, truth, &outcomes)
        })
        .collect();

    Ok(CoverageReport {
        scenario: format!("fixed-rule n={} xi={} trials={}", config.n, config.xi, config.trials),
        rows,
    })
}

fn fixed_trial_estimate(
    data: &ExperimentData,
    scorer_f: &FittedScorer,
    scorer_g: &FittedScorer,
    metric: StudyMetric,
    options: &StudyOptions,
    trial_seed: u64,
) -> Result<(f64, f64)> {
    let idx: Vec<usize> = (0..data.n()).collect();
    let scores_f = scorer_f.scores(data, &idx)?;
    let eval_data = if options.center { center_outcomes(data).0 } else { data.clone() };
    let est = match metric {
        StudyMetric::Pape => {
            let rule = Rule::scoring_with_floor(scores_f, 0.0)?;
            estimate_pape(&eval_data, &rule)?
        }
        StudyMetric::PapeBudget => {
            let rule = Rule::scoring(scores_f)?;
            estimate_pape_budget(&eval_data, &rule, options.budget)?
        }
        StudyMetric::Aupec => {
            let rule = Rule::scoring_with_floor(scores_f, 0.0)?;
            let zmode = ZMomentMode::MonteCarlo { draws: options.mc_draws, seed: trial_seed };
            estimate_aupec(&eval_data, &rule, zmode)?.aupec
        }
        StudyMetric::Papd => {
            let scores_g = scorer_g.scores(data, &idx)?;
            let rf = Rule::scoring(scores_f)?;
            let rg = Rule::scoring(scores_g)?;
            estimate_papd_budget(&eval_data, &rf, &rg, options.budget)?
        }
    };
    let se = est
        .std_error
        .ok_or_else(|| Error::DegenerateData("trial variance unavailable".into()))?;
    Ok((est.point, se))
}

fn cv_metric_for(
    metric: StudyMetric,
    options: &StudyOptions,
    seed: u64,
) -> Result<CvMetric> {
    Ok(match metric {
        StudyMetric::Pape => CvMetric::Pape { c_star: 0.0 },
        StudyMetric::PapeBudget => CvMetric::PapeBudget { p: options.budget },
        StudyMetric::Aupec => CvMetric::Aupec {
            c_star: 0.0,
            zmode: ZMomentMode::MonteCarlo { draws: options.mc_draws, seed },
        },
        StudyMetric::Papd => {
            return Err(Error::Input(
                "cross-validated comparison study needs an explicit second learner".into(),
            ))
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn crossval_study(
    config: &DgpConfig,
    pool: &CovariatePool,
    metrics: &[StudyMetric],
    options: &StudyOptions,
    k_folds: usize,
    learner: &LearnerSpec,
    aux_replications: usize,
) -> Result<CoverageReport> {
    let z95 = crate::betafn::normal_quantile(0.975);
    let mut rows = Vec::new();
    for &metric in metrics {
        // approximate truth from independent auxiliary replications
        let aux_points = map_indexed(aux_replications, options.threads, |r| {
            let seed = splitmix(config.seed ^ 0xA0A0_A0A0, r as u64);
            let (data, _) = dgp_sample_with_seed(config, pool, seed);
            let eval = if options.center { center_outcomes(&data).0 } else { data };
            let cv_metric = cv_metric_for(metric, options, seed)?;
            Ok(crossval(&eval, learner, &cv_metric, k_folds, seed)?.pooled.point)
        });
        let mut truth_acc = 0.0;
        let mut truth_n = 0usize;
        for p in aux_points {
            let p: Result<f64> = p;
            if let Ok(v) = p {
                truth_acc += v;
                truth_n += 1;
            }
        }
        if truth_n == 0 {
            return Err(Error::DegenerateData("no auxiliary replication succeeded".into()));
        }
        let truth = truth_acc / truth_n as f64;

        let outcomes = map_indexed(config.trials, options.threads, |trial| {
            let mut redraws = 0usize;
            loop {
                let seed = splitmix(config.seed, (trial as u64) << 8 | redraws as u64);
                let (data, _) = dgp_sample_with_seed(config, pool, seed);
                let eval = if options.center { center_outcomes(&data).0 } else { data };
                let attempt = cv_metric_for(metric, options, seed)
                    .and_then(|m| crossval(&eval, learner, &m, k_folds, seed));
                match attempt {
                    Ok(res) => {
                        if let Some(se) = res.pooled.std_error {
                            let point = res.pooled.point;
                            let covered =
                                (point - z95 * se) <= truth && truth <= (point + z95 * se);
                            return TrialOutcome { point, se, covered, redraws };
                        }
                        redraws += 1;
                    }
                    Err(_) if redraws < 64 => redraws += 1,
                    Err(_) => {
                        return TrialOutcome { point: f64::NAN, se: f64::NAN, covered: false, redraws };
                    }
                }
            }
        });
        rows.push(summarize(metric, truth, &outcomes));
    }
    Ok(CoverageReport {
        scenario: format!(
            "crossval n={} xi={} trials={} k={}",
            config.n, config.xi, config.trials, k_folds
        ),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, xi: f64, trials: usize, seed: u64) -> DgpConfig {
        DgpConfig {
            n,
            xi,
            trials,
            seed,
            covariate_source: CovariateSource::Synthetic { pool_size: 500 },
        }
    }

    #[test]
    fn effect_formula_plugin() {
        // xi = 1/3, x3 = 1, x24 = 2, x14 = 1, x15 = 1  ->  2/3
        let mut row = vec![0.0; 7];
        row[X3] = 1.0;
        row[X24] = 2.0;
        row[X14] = 1.0;
        row[X15] = 1.0;
        assert!((effect(&row, 1.0 / 3.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn doubling_xi_doubles_effects_only() {
        let cfg = config(40, 0.5, 1, 3);
        let pool = build_pool(&cfg).unwrap();
        for row in pool.rows.iter().take(50) {
            assert!((effect(row, 1.0) * 2.0 - effect(row, 2.0)).abs() < 1e-12);
        }
        // baseline does not depend on xi
        let b: Vec<f64> = pool.rows.iter().take(5).map(|r| baseline(r)).collect();
        let b2: Vec<f64> = pool.rows.iter().take(5).map(|r| baseline(r)).collect();
        assert_eq!(b, b2);
    }

    #[test]
    fn same_seed_reproduces_sample() {
        let cfg = config(30, 2.0, 1, 17);
        let pool = build_pool(&cfg).unwrap();
        let (a, _) = dgp_sample(&cfg, &pool);
        let (b, _) = dgp_sample(&cfg, &pool);
        assert_eq!(a.t(), b.t());
        for (u, v) in a.y().iter().zip(b.y()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn sample_respects_half_treated() {
        let cfg = config(31, 1.0, 1, 5);
        let pool = build_pool(&cfg).unwrap();
        let (data, pop) = dgp_sample(&cfg, &pool);
        assert_eq!(data.n1(), 15);
        assert_eq!(pop.n(), 31);
        // observed outcome equals the matching potential outcome
        for i in 0..data.n() {
            let expect = if data.t()[i] == 1 { pop.y1[i] } else { pop.y0[i] };
            assert_eq!(data.y()[i].to_bits(), expect.to_bits());
        }
    }

    #[test]
    fn validation_rejects_bad_configs() {
        assert!(config(10, 1.0, 5, 1).validate().is_err());
        assert!(config(30, 0.0, 5, 1).validate().is_err());
        assert!(config(30, 1.0, 0, 1).validate().is_err());
    }

    #[test]
    fn tiny_fixed_rule_study_runs_and_reports() {
        let cfg = config(60, 2.0, 12, 11);
        let report = coverage_study(
            &cfg,
            &[StudyMetric::Pape, StudyMetric::PapeBudget],
            &StudyMode::FixedRule,
            &StudyOptions { mc_draws: 200, ..Default::default() },
        )
        .unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert_eq!(row.trials, 12);
            assert!((0.0..=1.0).contains(&row.coverage));
            assert!(row.truth.is_finite());
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = config(50, 1.0, 8, 21);
        let run = |threads| {
            coverage_study(
                &cfg,
                &[StudyMetric::Pape],
                &StudyMode::FixedRule,
                &StudyOptions { threads, mc_draws: 100, ..Default::default() },
            )
            .unwrap()
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.rows[0].bias.to_bits(), b.rows[0].bias.to_bits());
        assert_eq!(a.rows[0].coverage, b.rows[0].coverage);
    }
}
