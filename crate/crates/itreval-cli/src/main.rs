//! Command-line front end: evaluate treatment rules on CSV experiments, compare
//! rules, run cross-validation, emit budget curves, and run simulation or
//! enumeration checks.
//!
//! Exit codes: 0 success, 2 input/validation error, 3 numeric degeneracy,
//! 4 enumeration size guard.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use itreval::cv::{cv_papd_budget, crossval, CvMetric, CvResult};
use itreval::estimate::MetricEstimate;
use itreval::learners::LearnerSpec;
use itreval::oracle::{enumerate_randomizations, random_population, sape, EffectStructure};
use itreval::rule::Rule;
use itreval::sim::{
    coverage_study, CoverageReport, CovariateSource, DgpConfig, StudyMetric, StudyMode,
    StudyOptions,
};
use itreval::zmoments::ZMomentMode;
use itreval::{
    bias_bound_aupec, bias_bound_papd, bias_bound_pape_budget, center_outcomes, estimate_aupec,
    estimate_aupec_normalized, estimate_papd_budget, estimate_pape, estimate_pape_budget,
    estimate_pav, load_experiment_path, value_difference, ColumnSpec, Error,
};

#[derive(Parser)]
#[command(name = "itreval", version, about = "Evaluate individualized treatment rules on randomized-experiment data")]
struct Cli {
    /// Flat key=value config file; explicit flags override file entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed (falls back to the ITR_EVAL_SEED environment variable).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Emit a JSON document instead of CSV.
    #[arg(long, global = true)]
    json: bool,

    /// Worker cap for simulation trials (does not affect results).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Experiment CSV with a header row.
    #[arg(long)]
    input: PathBuf,

    /// Outcome column name.
    #[arg(long, default_value = "y")]
    y_col: String,

    /// Treatment column name (values strictly 0/1).
    #[arg(long, default_value = "t")]
    t_col: String,

    /// Disable outcome centering.
    #[arg(long)]
    no_center: bool,

    /// Two-sided confidence level is 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a metric for one rule.
    Evaluate {
        #[command(flatten)]
        input: InputArgs,
        /// Score column defining the rule.
        #[arg(long)]
        rule_col: Option<String>,
        /// Interpret the rule column as a fixed 0/1 assignment.
        #[arg(long)]
        fixed: bool,
        /// pav | pape | pape-budget | aupec | aupec-norm
        #[arg(long, default_value = "pape")]
        metric: String,
        /// Budget as a maximal treated proportion.
        #[arg(long)]
        budget: Option<f64>,
        /// Minimum score treated absent a budget (default -inf).
        #[arg(long)]
        cstar: Option<f64>,
        /// Monte Carlo draws for the curve-area variance.
        #[arg(long)]
        mc_draws: Option<u64>,
        /// Use exact count moments instead of Monte Carlo (small n only).
        #[arg(long)]
        exact_z: bool,
        /// Cap on the effect near the threshold for the bias bound
        /// (plug-in contrast when absent).
        #[arg(long)]
        cate_cap: Option<f64>,
        /// Bias level at which the threshold-bias bound is reported
        /// (defaults to one standard error).
        #[arg(long)]
        bias_epsilon: Option<f64>,
        /// Output path (stdout when absent).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare two rules (budgeted difference, or value difference without a budget).
    Compare {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        rule_col_f: String,
        #[arg(long)]
        rule_col_g: String,
        /// Interpret both rule columns as fixed 0/1 assignments (budgetless).
        #[arg(long)]
        fixed: bool,
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long)]
        cate_cap: Option<f64>,
        #[arg(long)]
        bias_epsilon: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cross-validated evaluation of a learning algorithm.
    Crossval {
        #[command(flatten)]
        input: InputArgs,
        /// constant | bins | linear-t
        #[arg(long, default_value = "linear-t")]
        learner: String,
        /// Covariate columns, comma separated.
        #[arg(long, value_delimiter = ',')]
        x_cols: Vec<String>,
        /// Score column for the constant learner.
        #[arg(long)]
        constant_col: Option<String>,
        /// Covariate index for the binned learner.
        #[arg(long, default_value_t = 0)]
        bin_covariate: usize,
        #[arg(long, default_value_t = 4)]
        bins: usize,
        /// Ridge penalty for the linear learner.
        #[arg(long, default_value_t = 1e-6)]
        ridge: f64,
        /// pav | pape | pape-budget | aupec | papd
        #[arg(long, default_value = "pape")]
        metric: String,
        /// Second learner for papd: constant | bins | linear-t.
        #[arg(long)]
        learner_g: Option<String>,
        /// Score column for a constant second learner.
        #[arg(long)]
        constant_col_g: Option<String>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long)]
        cstar: Option<f64>,
        #[arg(long)]
        mc_draws: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Emit the full budget curve for a scoring rule.
    Curve {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        rule_col: String,
        #[arg(long)]
        cstar: Option<f64>,
        #[arg(long)]
        mc_draws: Option<u64>,
        /// Curve CSV destination.
        #[arg(long)]
        output: PathBuf,
    },
    /// Monte Carlo coverage study on the synthetic generator (or a covariate CSV).
    Simulate {
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Interaction-effect scale.
        #[arg(long, default_value_t = 2.0)]
        xi: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// fixed | crossval
        #[arg(long, default_value = "fixed")]
        mode: String,
        /// Metrics, comma separated: pape,pape-budget,aupec,papd
        #[arg(long, value_delimiter = ',', default_values_t = vec!["pape".to_string(), "pape-budget".to_string(), "aupec".to_string(), "papd".to_string()])]
        metrics: Vec<String>,
        #[arg(long, default_value_t = 0.2)]
        budget: f64,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Auxiliary replications approximating the cross-validation truth.
        #[arg(long, default_value_t = 2000)]
        aux: usize,
        /// Covariate pool CSV (columns x1,x3,x10,x14,x15,x24,x43).
        #[arg(long)]
        covariate_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 4000)]
        pool_size: usize,
        #[arg(long)]
        mc_draws: Option<u64>,
        /// Restrict the fixed rule's scorer to these covariate indices.
        #[arg(long, value_delimiter = ',')]
        rule_x_subset: Vec<usize>,
        #[arg(long)]
        no_center: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Exhaustive-randomization verification on small synthetic populations.
    OracleCheck {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long)]
        n1: Option<usize>,
        #[arg(long, default_value_t = 20)]
        populations: usize,
        #[arg(long, default_value_t = 0.4)]
        budget: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::NumericDegenerate(_) => 3,
                Error::SizeGuard(_) => 4,
                _ => 2,
            }
        }
    };
    std::process::exit(code);
}

/// Flat key=value file, one entry per line, `#` comments allowed.
fn load_config(path: &Option<PathBuf>) -> Result<BTreeMap<String, String>, Error> {
    let mut map = BTreeMap::new();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)?;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Input(format!("config line without `=`: {line}")));
            };
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

fn cfg_parse<T: std::str::FromStr>(cfg: &BTreeMap<String, String>, key: &str) -> Option<T> {
    cfg.get(key).and_then(|v| v.parse().ok())
}

fn resolve_seed(cli_seed: Option<u64>, cfg: &BTreeMap<String, String>) -> u64 {
    cli_seed
        .or_else(|| cfg_parse(cfg, "seed"))
        .or_else(|| std::env::var("ITR_EVAL_SEED").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0)
}

struct Report {
    fields: Vec<(String, String)>,
}

impl Report {
    fn new() -> Self {
        Report { fields: Vec::new() }
    }

    fn push(&mut self, key: &str, value: String) {
        self.fields.push((key.to_string(), value));
    }

    fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, format!("{value}"));
    }

    fn write(&self, json: bool, output: &Option<PathBuf>) -> Result<(), Error> {
        let text = if json {
            let mut map = serde_json::Map::new();
            for (k, v) in &self.fields {
                let val = v
                    .parse::<f64>()
                    .ok()
                    .and_then(serde_json::Number::from_f64)
                    .map(serde_json::Value::Number)
                    .unwrap_or_else(|| serde_json::Value::String(v.clone()));
                map.insert(k.clone(), val);
            }
            serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("serializable")
                + "\n"
        } else {
            let header: Vec<&str> = self.fields.iter().map(|(k, _)| k.as_str()).collect();
            let row: Vec<&str> = self.fields.iter().map(|(_, v)| v.as_str()).collect();
            format!("{}\n{}\n", header.join(","), row.join(","))
        };
        match output {
            Some(path) => std::fs::write(path, text)?,
            None => {
                std::io::stdout().write_all(text.as_bytes())?;
            }
        }
        Ok(())
    }
}

fn estimate_report(
    est: &MetricEstimate,
    alpha: f64,
    n: usize,
    n1: usize,
    n0: usize,
    seed: u64,
    delta: Option<f64>,
) -> Report {
    let mut rep = Report::new();
    rep.push("metric", est.metric.name().to_string());
    rep.push_f64("point", est.point);
    rep.push("std_error", est.std_error.map_or("NA".into(), |s| format!("{s}")));
    match est.confidence_interval(alpha) {
        Some((lo, hi)) => {
            rep.push_f64("ci_low", lo);
            rep.push_f64("ci_high", hi);
        }
        None => {
            rep.push("ci_low", "NA".into());
            rep.push("ci_high", "NA".into());
        }
    }
    rep.push_f64("alpha", alpha);
    rep.push_f64("proportion_treated", est.proportion_treated);
    rep.push("n", n.to_string());
    rep.push("n1", n1.to_string());
    rep.push("n0", n0.to_string());
    rep.push("seed", seed.to_string());
    if let Some(delta) = delta {
        rep.push_f64("centering_shift", delta);
    }
    let diag: Vec<String> =
        est.diagnostics.iter().map(|(k, v)| format!("{k}={v}")).collect();
    rep.push("diagnostics", diag.join(";"));
    rep
}

/// Attaches the threshold-bias bound at the requested level, labelling whether
/// the effect cap is user-supplied or the plug-in contrast.
fn attach_bias_bound(
    rep: &mut Report,
    kind: &str,
    n: usize,
    p: f64,
    est: &MetricEstimate,
    cate_cap: Option<f64>,
    bias_epsilon: Option<f64>,
) -> Result<(), Error> {
    let eps = bias_epsilon.or(est.std_error).filter(|e| *e > 0.0);
    let Some(eps) = eps else {
        return Ok(());
    };
    let plugin = est
        .diagnostics
        .get("kappa1_hat")
        .or_else(|| est.diagnostics.get("kappa1_hat_f"))
        .map(|v| v.abs())
        .filter(|v| *v > 0.0);
    let (cap, source) = match (cate_cap, plugin) {
        (Some(c), _) => (c, "user"),
        (None, Some(c)) => (c, "plug-in"),
        (None, None) => return Ok(()),
    };
    let bound = match kind {
        "pape_budget" => bias_bound_pape_budget(n, p, eps, cap)?,
        "papd" => bias_bound_papd(n, p, eps, cap)?,
        _ => bias_bound_aupec(n, p, eps, cap)?,
    };
    rep.push_f64("bias_bound_epsilon", bound.epsilon);
    rep.push_f64("bias_bound", bound.probability_bound);
    rep.push_f64("cate_cap", cap);
    rep.push("cate_cap_source", source.to_string());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let cfg = load_config(&cli.config)?;
    let seed = resolve_seed(cli.seed, &cfg);
    let threads = cli.threads.or_else(|| cfg_parse(&cfg, "threads")).unwrap_or(1);
    let json = cli.json || cfg_parse(&cfg, "json").unwrap_or(false);

    match cli.command {
        Command::Evaluate {
            input,
            rule_col,
            fixed,
            metric,
            budget,
            cstar,
            mc_draws,
            exact_z,
            cate_cap,
            bias_epsilon,
            output,
        } => {
            let rule_col = rule_col
                .or_else(|| cfg.get("rule-col").cloned())
                .ok_or_else(|| Error::Input("missing --rule-col".into()))?;
            let budget = budget.or_else(|| cfg_parse(&cfg, "budget"));
            let alpha = validate_alpha(input.alpha)?;
            let spec = ColumnSpec {
                y: input.y_col.clone(),
                t: input.t_col.clone(),
                rules: vec![rule_col],
                covariates: Vec::new(),
            };
            let loaded = load_experiment_path(&input.input, &spec)?;
            let scores = loaded.rule_scores[0].clone();
            let rule = build_rule(scores, fixed, cstar)?;

            let center_default = metric != "pav";
            let (data, delta) = centered(&loaded.data, center_default && !input.no_center);
            let zmode = zmoment_mode(exact_z, mc_draws.or_else(|| cfg_parse(&cfg, "mc-draws")), seed);

            let est = match (metric.as_str(), budget) {
                ("pav", None) => estimate_pav(&data, &rule)?,
                ("pape", None) => estimate_pape(&data, &rule)?,
                ("pape", Some(p)) | ("pape-budget", Some(p)) => {
                    estimate_pape_budget(&data, &rule, p)?
                }
                ("pape-budget", None) => {
                    return Err(Error::Input("pape-budget needs --budget".into()))
                }
                ("aupec", _) => estimate_aupec(&data, &rule, zmode)?.aupec,
                ("aupec-norm", _) => estimate_aupec_normalized(&data, &rule, zmode)?,
                (other, Some(_)) => {
                    return Err(Error::Input(format!(
                        "metric `{other}` does not take a budget"
                    )))
                }
                (other, None) => return Err(Error::Input(format!("unknown metric `{other}`"))),
            };
            let mut rep = estimate_report(
                &est,
                alpha,
                data.n(),
                data.n1(),
                data.n0(),
                seed,
                delta,
            );
            if let Some(p) = budget {
                rep.push_f64("budget", p);
                if metric == "pape" || metric == "pape-budget" {
                    attach_bias_bound(
                        &mut rep,
                        "pape_budget",
                        data.n(),
                        p,
                        &est,
                        cate_cap,
                        bias_epsilon,
                    )?;
                }
            }
            if metric.starts_with("aupec") {
                attach_bias_bound(
                    &mut rep,
                    "aupec",
                    data.n(),
                    est.proportion_treated,
                    &est,
                    cate_cap,
                    bias_epsilon,
                )?;
            }
            rep.write(json, &output)
        }

        Command::Compare {
            input,
            rule_col_f,
            rule_col_g,
            fixed,
            budget,
            cate_cap,
            bias_epsilon,
            output,
        } => {
            let alpha = validate_alpha(input.alpha)?;
            let spec = ColumnSpec {
                y: input.y_col.clone(),
                t: input.t_col.clone(),
                rules: vec![rule_col_f, rule_col_g],
                covariates: Vec::new(),
            };
            let loaded = load_experiment_path(&input.input, &spec)?;
            let rule_f = build_rule(loaded.rule_scores[0].clone(), fixed, None)?;
            let rule_g = build_rule(loaded.rule_scores[1].clone(), fixed, None)?;
            let (data, delta) = centered(&loaded.data, !input.no_center);
            let budget = budget.or_else(|| cfg_parse(&cfg, "budget"));
            let est = match budget {
                Some(p) => estimate_papd_budget(&data, &rule_f, &rule_g, p)?,
                None => value_difference(&data, &rule_f, &rule_g)?,
            };
            let mut rep = estimate_report(
                &est,
                alpha,
                data.n(),
                data.n1(),
                data.n0(),
                seed,
                delta,
            );
            if let Some(p) = budget {
                rep.push_f64("budget", p);
                attach_bias_bound(&mut rep, "papd", data.n(), p, &est, cate_cap, bias_epsilon)?;
            }
            rep.write(json, &output)
        }

        Command::Crossval {
            input,
            learner,
            x_cols,
            constant_col,
            bin_covariate,
            bins,
            ridge,
            metric,
            learner_g,
            constant_col_g,
            k,
            budget,
            cstar,
            mc_draws,
            output,
        } => {
            let alpha = validate_alpha(input.alpha)?;
            let mut rules = Vec::new();
            if let Some(c) = &constant_col {
                rules.push(c.clone());
            }
            if let Some(c) = &constant_col_g {
                rules.push(c.clone());
            }
            let spec = ColumnSpec {
                y: input.y_col.clone(),
                t: input.t_col.clone(),
                rules,
                covariates: x_cols.clone(),
            };
            let loaded = load_experiment_path(&input.input, &spec)?;
            let (data, delta) = centered(&loaded.data, !input.no_center);

            let mut score_iter = loaded.rule_scores.iter();
            let mut make_learner = |name: &str, uses_constant: bool| -> Result<LearnerSpec, Error> {
                match name {
                    "constant" => {
                        let scores = if uses_constant {
                            score_iter
                                .next()
                                .cloned()
                                .ok_or_else(|| Error::Input("constant learner needs --constant-col".into()))?
                        } else {
                            return Err(Error::Input("constant learner needs --constant-col".into()));
                        };
                        Ok(LearnerSpec::ConstantScorer(scores))
                    }
                    "bins" => Ok(LearnerSpec::DiffMeansByBin { covariate: bin_covariate, bins }),
                    "linear-t" => Ok(LearnerSpec::LinearTLearner { ridge, covariates: None }),
                    other => Err(Error::Input(format!("unknown learner `{other}`"))),
                }
            };
            let learner_f = make_learner(&learner, constant_col.is_some())?;
            let c_star = cstar.unwrap_or(f64::NEG_INFINITY);
            let zmode = zmoment_mode(false, mc_draws.or_else(|| cfg_parse(&cfg, "mc-draws")), seed);
            let budget = budget.or_else(|| cfg_parse(&cfg, "budget"));

            let result: CvResult = match metric.as_str() {
                "pav" => crossval(&data, &learner_f, &CvMetric::Pav { c_star }, k, seed)?,
                "pape" => crossval(&data, &learner_f, &CvMetric::Pape { c_star }, k, seed)?,
                "pape-budget" => {
                    let p = budget.ok_or_else(|| Error::Input("pape-budget needs --budget".into()))?;
                    crossval(&data, &learner_f, &CvMetric::PapeBudget { p }, k, seed)?
                }
                "aupec" => {
                    crossval(&data, &learner_f, &CvMetric::Aupec { c_star, zmode }, k, seed)?
                }
                "papd" => {
                    let p = budget.ok_or_else(|| Error::Input("papd needs --budget".into()))?;
                    let g_name = learner_g
                        .ok_or_else(|| Error::Input("papd needs --learner-g".into()))?;
                    let learner_g = make_learner(&g_name, constant_col_g.is_some())?;
                    cv_papd_budget(&data, &learner_f, &learner_g, p, k, seed)?
                }
                other => return Err(Error::Input(format!("unknown metric `{other}`"))),
            };

            let mut rep = estimate_report(
                &result.pooled,
                alpha,
                data.n(),
                data.n1(),
                data.n0(),
                seed,
                delta,
            );
            rep.push("k_folds", k.to_string());
            rep.push_f64("s_f_sq", result.s_f_sq);
            let folds: Vec<String> =
                result.per_fold.iter().map(|e| format!("{}", e.point)).collect();
            rep.push("fold_points", folds.join(";"));
            let comp: Vec<String> =
                result.components.iter().map(|(k, v)| format!("{k}={v}")).collect();
            rep.push("variance_components", comp.join(";"));
            rep.write(json, &output)
        }

        Command::Curve { input, rule_col, cstar, mc_draws, output } => {
            let alpha = validate_alpha(input.alpha)?;
            let spec = ColumnSpec {
                y: input.y_col.clone(),
                t: input.t_col.clone(),
                rules: vec![rule_col],
                covariates: Vec::new(),
            };
            let loaded = load_experiment_path(&input.input, &spec)?;
            let rule = build_rule(loaded.rule_scores[0].clone(), false, cstar)?;
            let (data, delta) = centered(&loaded.data, !input.no_center);
            let zmode = zmoment_mode(false, mc_draws.or_else(|| cfg_parse(&cfg, "mc-draws")), seed);
            let curve = estimate_aupec(&data, &rule, zmode)?;

            let mut text = String::from("p,value,pape,std_error\n");
            for pt in &curve.points {
                let se = pt.std_error.map_or("NA".to_string(), |s| format!("{s}"));
                text.push_str(&format!("{},{},{},{}\n", pt.p, pt.value, pt.pape, se));
            }
            std::fs::write(&output, text)?;

            let rep = estimate_report(
                &curve.aupec,
                alpha,
                data.n(),
                data.n1(),
                data.n0(),
                seed,
                delta,
            );
            rep.write(json, &None)
        }

        Command::Simulate {
            n,
            xi,
            trials,
            mode,
            metrics,
            budget,
            k,
            aux,
            covariate_csv,
            pool_size,
            mc_draws,
            rule_x_subset,
            no_center,
            output,
        } => {
            let source = match covariate_csv {
                Some(path) => CovariateSource::UserCsv(path),
                None => CovariateSource::Synthetic { pool_size },
            };
            let config = DgpConfig { n, xi, trials, seed, covariate_source: source };
            let metrics = metrics
                .iter()
                .map(|m| StudyMetric::parse(m))
                .collect::<Result<Vec<_>, _>>()?;
            let study_mode = match mode.as_str() {
                "fixed" => StudyMode::FixedRule,
                "crossval" => StudyMode::CrossVal {
                    k_folds: k,
                    learner: LearnerSpec::LinearTLearner { ridge: 1e-6, covariates: None },
                    aux_replications: aux,
                },
                other => return Err(Error::Input(format!("unknown mode `{other}`"))),
            };
            let options = StudyOptions {
                budget,
                mc_draws: mc_draws.unwrap_or(10_000),
                threads,
                center: !no_center,
                rule_covariates: if rule_x_subset.is_empty() {
                    None
                } else {
                    Some(rule_x_subset)
                },
            };
            let report = coverage_study(&config, &metrics, &study_mode, &options)?;
            write_coverage(&report, seed, json, &output)
        }

        Command::OracleCheck { n, n1, populations, budget } => {
            let n1 = n1.unwrap_or(n / 2);
            oracle_check(n, n1, populations, budget, seed)
        }
    }
}

fn validate_alpha(alpha: f64) -> Result<f64, Error> {
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::Input(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(alpha)
}

fn build_rule(scores: Vec<f64>, fixed: bool, cstar: Option<f64>) -> Result<Rule, Error> {
    if fixed {
        if cstar.is_some() {
            return Err(Error::Input("--cstar requires a scoring rule".into()));
        }
        let assign = scores
            .iter()
            .map(|&v| {
                if v == 0.0 {
                    Ok(0u8)
                } else if v == 1.0 {
                    Ok(1u8)
                } else {
                    Err(Error::Input(format!("fixed assignment value {v} not 0/1")))
                }
            })
            .collect::<Result<Vec<u8>, Error>>()?;
        Rule::fixed(assign)
    } else {
        Rule::scoring_with_floor(scores, cstar.unwrap_or(f64::NEG_INFINITY))
    }
}

fn centered(
    data: &itreval::ExperimentData,
    apply: bool,
) -> (itreval::ExperimentData, Option<f64>) {
    if apply {
        let (d, delta) = center_outcomes(data);
        (d, Some(delta))
    } else {
        (data.clone(), None)
    }
}

fn zmoment_mode(exact: bool, mc_draws: Option<u64>, seed: u64) -> ZMomentMode {
    if exact {
        ZMomentMode::ExactPolynomial
    } else {
        ZMomentMode::MonteCarlo { draws: mc_draws.unwrap_or(10_000), seed }
    }
}

fn write_coverage(
    report: &CoverageReport,
    seed: u64,
    json: bool,
    output: &Option<PathBuf>,
) -> Result<(), Error> {
    let mut text = String::new();
    if json {
        let mut rows = Vec::new();
        for r in &report.rows {
            let mut map = serde_json::Map::new();
            map.insert("metric".into(), r.metric.clone().into());
            let num = |v: f64| {
                serde_json::Number::from_f64(v)
                    .map(serde_json::Value::Number)
                    .unwrap_or(serde_json::Value::Null)
            };
            map.insert("truth".into(), num(r.truth));
            map.insert("bias".into(), num(r.bias));
            map.insert("sd".into(), num(r.sd));
            map.insert("mean_se".into(), num(r.mean_se));
            map.insert("coverage".into(), num(r.coverage));
            map.insert("trials".into(), (r.trials as u64).into());
            map.insert("redraws".into(), (r.redraws as u64).into());
            rows.push(serde_json::Value::Object(map));
        }
        let doc = serde_json::json!({
            "scenario": report.scenario,
            "seed": seed,
            "rows": rows,
        });
        text = serde_json::to_string_pretty(&doc).expect("serializable") + "\n";
    } else {
        text.push_str("scenario,metric,truth,bias,sd,mean_se,coverage,trials,redraws,seed\n");
        for r in &report.rows {
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                report.scenario,
                r.metric,
                r.truth,
                r.bias,
                r.sd,
                r.mean_se,
                r.coverage,
                r.trials,
                r.redraws,
                seed
            ));
        }
    }
    match output {
        Some(path) => std::fs::write(path, &text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    // human-readable table alongside machine output
    eprintln!("{}", report.scenario);
    for r in &report.rows {
        eprintln!(
            "  {:<12} truth={:+.4} bias={:+.4} sd={:.4} mean_se={:.4} coverage={:.1}% ({} trials, {} redraws)",
            r.metric,
            r.truth,
            r.bias,
            r.sd,
            r.mean_se,
            100.0 * r.coverage,
            r.trials,
            r.redraws
        );
    }
    Ok(())
}

/// Small-population enumeration checks: estimator means against population
/// truths and the randomization variance against its closed form.
fn oracle_check(
    n: usize,
    n1: usize,
    populations: usize,
    budget: f64,
    seed: u64,
) -> Result<(), Error> {
    println!("population,check,value,reference,ok");
    let mut failures = 0usize;
    for i in 0..populations {
        let pop = random_population(n, seed.wrapping_add(i as u64), EffectStructure::Heterogeneous);
        let f: Vec<u8> = (0..n).map(|u| ((u * 7 + i) % 3 == 0) as u8).collect();
        let rule = Rule::fixed(f.clone())?;

        let dist = enumerate_randomizations(&pop, n1, |d| {
            Ok(estimate_pav(d, &rule)?.point)
        })?;
        let truth: f64 = (0..n)
            .map(|u| if f[u] == 1 { pop.y1[u] } else { pop.y0[u] })
            .sum::<f64>()
            / n as f64;
        let ok = (dist.mean - truth).abs() <= 1e-12 * truth.abs().max(1.0);
        failures += usize::from(!ok);
        println!("{i},pav_unbiased,{},{},{}", dist.mean, truth, ok);

        let nf = n as f64;
        let dist = enumerate_randomizations(&pop, n1, |d| {
            Ok(estimate_pape(d, &rule)?.point * (nf - 1.0) / nf)
        })?;
        let target = sape(&pop, &f);
        let ok = (dist.mean - target).abs() <= 1e-12 * target.abs().max(1.0);
        failures += usize::from(!ok);
        println!("{i},sape_unbiased,{},{},{}", dist.mean, target, ok);

        // constant-effect population: the budgeted variance formula is exact
        let cpop = random_population(n, seed.wrapping_add(i as u64) ^ 0xABCD, EffectStructure::Constant);
        let scores = cpop.scores.clone().unwrap();
        let srule = Rule::scoring(scores.clone())?;
        let dist = enumerate_randomizations(&cpop, n1, |d| {
            Ok(estimate_pape_budget(d, &srule, budget)?.point)
        })?;
        let tau = cpop.tau(0);
        let assign = srule.assignments(Some(budget), n)?;
        let v1: Vec<f64> = (0..n).map(|u| (assign[u] as f64 - budget) * cpop.y1[u]).collect();
        let v0: Vec<f64> = (0..n).map(|u| (assign[u] as f64 - budget) * cpop.y0[u]).collect();
        let svar = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
        };
        let kf = itreval::floor_np(n, budget) as f64;
        let coupling = kf * (nf - kf) / (nf * nf * (nf - 1.0))
            * ((2.0 * budget - 1.0) * tau * tau - 2.0 * budget * tau * tau);
        let formula = svar(&v1) / n1 as f64 + svar(&v0) / (n - n1) as f64 + coupling;
        let ok = (dist.variance - formula).abs() <= 1e-8 * formula.abs().max(1e-12);
        failures += usize::from(!ok);
        println!("{i},budget_variance_exact,{},{},{}", dist.variance, formula, ok);
    }
    if failures > 0 {
        return Err(Error::NumericDegenerate(format!("{failures} oracle checks failed")));
    }
    eprintln!("all enumeration checks passed ({populations} populations)");
    Ok(())
}
