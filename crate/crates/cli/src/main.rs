//! `bntrim` command-line front-end.
//!
//! Results go to stdout as JSON (or CSV for `scatter`), diagnostics and
//! search traces to stderr. Exit codes: 0 success, 1 usage, 2 data or
//! validation error, 3 enumeration limit exceeded.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bntrim::agreement::{esdp_two_threshold, AgreementModel, ThresholdInterval};
use bntrim::baselines::ig_baseline;
use bntrim::evalharness::{
    learn_nb, scatter, synthetic_dataset, BudgetRule, EcaThreshold, EvalConfig, SyntheticSpec,
};
use bntrim::inference::Assignment;
use bntrim::model::{is_naive_bayes, validate_network, FeatureSet};
use bntrim::netio::{parse_dataset, parse_task, serialize_network, NetworkDocument, TaskSpec};
use bntrim::trimsearch::{eca_trim, exhaustive_trim, nb_trim_with, BranchOrder, SearchOptions, TrimResult};
use bntrim::{agreement, BayesianNetwork, Classifier, CostModel, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

#[derive(Debug, Parser)]
#[command(name = "bntrim", version, about = "Budgeted trimming of Bayesian network classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal trimming within a budget.
    Trim(TrimArgs),
    /// Maximum achievable agreement of a feature subset.
    Maa(SubsetArgs),
    /// Maximum potential agreement of a feature subset.
    Mpa(SubsetArgs),
    /// Expected agreement with a given trimming.
    Eca(EcaArgs),
    /// Same-decision probability of observing more features.
    Sdp(SdpArgs),
    /// Information-gain feature selection.
    Ig(IgArgs),
    /// Exhaustive search over within-budget subsets.
    Exhaustive(BudgetedArgs),
    /// Agreement and cross-validated accuracy of every feasible subset.
    Scatter(ScatterArgs),
    /// Learn a naive Bayes network from a CSV dataset.
    Learn(LearnArgs),
    /// Check a network document.
    Validate { path: PathBuf },
}

#[derive(Debug, Args)]
struct ClassifierArgs {
    /// Network document.
    #[arg(long)]
    network: PathBuf,
    /// Task document with class, positive value, features, threshold, costs.
    #[arg(long)]
    task: Option<PathBuf>,
    #[arg(long)]
    class: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    positive: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Comma-separated features; defaults to every non-class variable.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct BudgetArgs {
    /// Comma-separated `name=cost` pairs; unlisted features cost 1.
    #[arg(long, value_delimiter = ',')]
    costs: Option<Vec<String>>,
    #[arg(long, conflicts_with = "budget_frac")]
    budget: Option<f64>,
    /// Budget of ceil(fraction * |F|).
    #[arg(long)]
    budget_frac: Option<f64>,
}

#[derive(Debug, Args)]
struct BudgetedArgs {
    #[command(flatten)]
    clf: ClassifierArgs,
    #[command(flatten)]
    budget: BudgetArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OrderArg {
    Mpa,
    Input,
}

#[derive(Debug, Args)]
struct TrimArgs {
    #[command(flatten)]
    inner: BudgetedArgs,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Log every search node to stderr.
    #[arg(long)]
    trace: bool,
    #[arg(long, value_enum, default_value_t = OrderArg::Mpa)]
    order: OrderArg,
    /// Use the general search even on naive Bayes models.
    #[arg(long)]
    generic: bool,
}

#[derive(Debug, Args)]
struct SubsetArgs {
    #[command(flatten)]
    clf: ClassifierArgs,
    /// Comma-separated kept features.
    #[arg(long, value_delimiter = ',', default_value = "")]
    subset: Vec<String>,
}

#[derive(Debug, Args)]
struct EcaArgs {
    #[command(flatten)]
    clf: ClassifierArgs,
    #[arg(long, value_delimiter = ',', default_value = "")]
    trim_features: Vec<String>,
    #[arg(long)]
    trim_threshold: f64,
    /// Also report the two-threshold expected same-decision probability.
    #[arg(long)]
    esdp: bool,
}

#[derive(Debug, Args)]
struct SdpArgs {
    #[command(flatten)]
    clf: ClassifierArgs,
    /// Features still to be observed.
    #[arg(long, value_delimiter = ',', default_value = "")]
    observe: Vec<String>,
    /// Comma-separated `name=value` evidence.
    #[arg(long, value_delimiter = ',', default_value = "")]
    evidence: Vec<String>,
}

#[derive(Debug, Args)]
struct IgArgs {
    #[command(flatten)]
    inner: BudgetedArgs,
    /// Report agreement at the selected subset's best threshold.
    #[arg(long)]
    reoptimize: bool,
}

#[derive(Debug, Args)]
struct ScatterArgs {
    #[arg(long, required_unless_present = "synthetic")]
    data: Option<PathBuf>,
    #[arg(long, default_value = "C")]
    class_column: String,
    #[arg(long, allow_hyphen_values = true)]
    positive: Option<String>,
    /// Sample this many rows from a seeded random naive Bayes model instead
    /// of reading a file.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 6)]
    synthetic_features: usize,
    #[arg(long, conflicts_with = "budget_frac")]
    budget: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    budget_frac: f64,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    smoothing: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Measure agreement at this threshold instead of each subset's best.
    #[arg(long)]
    fixed_threshold: Option<f64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// CSV destination; the summary then goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary destination when the CSV goes to stdout.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LearnArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "C")]
    class_column: String,
    #[arg(long, default_value_t = 1.0)]
    smoothing: f64,
    /// Network destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a task document for the learned classifier.
    #[arg(long)]
    task_out: Option<PathBuf>,
}

enum Failure {
    Lib(Error),
    Io(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

/// Rounds to 12 significant digits for display.
fn num(x: f64) -> Value {
    if x.is_nan() {
        Value::String("nan".into())
    } else if x.is_infinite() {
        Value::String(if x > 0.0 { "inf" } else { "-inf" }.into())
    } else {
        let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
        json!(rounded)
    }
}

fn names(values: &[&str]) -> Value {
    json!(values)
}

fn interval(obj: &mut Map<String, Value>, t: &ThresholdInterval) {
    obj.insert("threshold_interval".into(), json!([num(t.lo), num(t.hi)]));
    obj.insert("representative".into(), num(t.representative));
}

fn emit(v: &Value) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(v).expect("json"));
}

fn load(args: &ClassifierArgs) -> CliResult<(BayesianNetwork, Classifier, TaskSpec)> {
    let net = bntrim::netio::parse_network(&read(&args.network)?)?;
    let task = match &args.task {
        Some(p) => Some(parse_task(&read(p)?)?),
        None => None,
    };
    let class = args
        .class
        .clone()
        .or_else(|| task.as_ref().map(|t| t.class.clone()))
        .ok_or_else(|| Failure::Usage("--class is required without --task".into()))?;
    let positive = args
        .positive
        .clone()
        .or_else(|| task.as_ref().map(|t| t.positive.clone()))
        .ok_or_else(|| Failure::Usage("--positive is required without --task".into()))?;
    let threshold = args
        .threshold
        .or_else(|| task.as_ref().map(|t| t.threshold))
        .ok_or_else(|| Failure::Usage("--threshold is required without --task".into()))?;
    let spec = TaskSpec {
        class,
        positive,
        features: args.features.clone().or_else(|| task.as_ref().and_then(|t| t.features.clone())),
        threshold,
        costs: task.as_ref().map(|t| t.costs.clone()).unwrap_or_default(),
        budget: task.as_ref().and_then(|t| t.budget),
    };
    let clf = spec.classifier(&net)?;
    Ok((net, clf, spec))
}

fn cost_model(net: &BayesianNetwork, clf: &Classifier, mut spec: TaskSpec, args: &BudgetArgs) -> CliResult<CostModel> {
    if let Some(pairs) = &args.costs {
        for pair in pairs.iter().filter(|p| !p.is_empty()) {
            let (name, cost) = pair
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("cost {pair:?} is not name=value")))?;
            let cost: f64 = cost
                .trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("cost {pair:?} is not a number")))?;
            spec.costs.insert(name.trim().to_string(), cost);
        }
    }
    let budget = match (args.budget, args.budget_frac, spec.budget) {
        (Some(b), _, _) => b,
        (None, Some(f), _) => BudgetRule::Fraction(f).resolve(clf.features.len()),
        (None, None, Some(b)) => b,
        (None, None, None) => return Err(Failure::Usage("--budget or --budget-frac is required".into())),
    };
    Ok(spec.cost_model(net, clf, budget)?)
}

fn subset(net: &BayesianNetwork, clf: &Classifier, names: &[String]) -> CliResult<FeatureSet> {
    let names: Vec<&str> = names.iter().map(String::as_str).filter(|n| !n.is_empty()).collect();
    Ok(clf.set_of_names(net, &names)?)
}

fn trim_json(net: &BayesianNetwork, clf: &Classifier, method: &str, r: &TrimResult) -> Value {
    let mut obj = Map::new();
    obj.insert("method".into(), json!(method));
    obj.insert("best_features".into(), names(&clf.feature_names(net, r.best_features)));
    obj.insert("score".into(), num(r.best_score));
    interval(&mut obj, &r.threshold);
    obj.insert(
        "stats".into(),
        json!({
            "maa_evals": r.stats.maa_evals,
            "mpa_evals": r.stats.mpa_evals,
            "nodes_expanded": r.stats.nodes_expanded,
            "subtrees_pruned": r.stats.subtrees_pruned,
        }),
    );
    Value::Object(obj)
}

fn trim(args: &TrimArgs) -> CliResult<()> {
    let (net, clf, spec) = load(&args.inner.clf)?;
    let costs = cost_model(&net, &clf, spec, &args.inner.budget)?;
    let opts = SearchOptions {
        branch_order: match args.order {
            OrderArg::Mpa => BranchOrder::MpaDescending,
            OrderArg::Input => BranchOrder::InputOrder,
        },
        nb_fast_path: args.generic.then_some(false),
        jobs: args.jobs.max(1),
        trace: args.trace,
    };
    let use_nb = !args.generic && opts.jobs == 1 && is_naive_bayes(&net, &clf);
    let (method, r) = if use_nb {
        ("nb_trim", nb_trim_with(&net, &clf, &costs, &opts)?)
    } else {
        ("eca_trim", eca_trim(&net, &clf, &costs, &opts)?)
    };
    if args.trace {
        let mut err = std::io::stderr().lock();
        for e in &r.trace {
            let _ = writeln!(err, "{}", e.render(&net, &clf));
        }
    }
    emit(&trim_json(&net, &clf, method, &r));
    Ok(())
}

fn exhaustive(args: &BudgetedArgs) -> CliResult<()> {
    let (net, clf, spec) = load(&args.clf)?;
    let costs = cost_model(&net, &clf, spec, &args.budget)?;
    let r = exhaustive_trim(&net, &clf, &costs)?;
    emit(&trim_json(&net, &clf, "exhaustive", &r));
    Ok(())
}

fn maa(args: &SubsetArgs) -> CliResult<()> {
    let (net, clf, _) = load(&args.clf)?;
    let kept = subset(&net, &clf, &args.subset)?;
    let m = agreement::maa(&net, &clf, kept)?;
    let mut obj = Map::new();
    obj.insert("subset".into(), names(&clf.feature_names(&net, kept)));
    obj.insert("score".into(), num(m.score));
    interval(&mut obj, &m.interval);
    emit(&Value::Object(obj));
    Ok(())
}

fn mpa(args: &SubsetArgs) -> CliResult<()> {
    let (net, clf, _) = load(&args.clf)?;
    let kept = subset(&net, &clf, &args.subset)?;
    let m = agreement::mpa(&net, &clf, kept)?;
    emit(&json!({ "subset": names(&clf.feature_names(&net, kept)), "mpa": num(m) }));
    Ok(())
}

fn eca(args: &EcaArgs) -> CliResult<()> {
    let (net, clf, _) = load(&args.clf)?;
    let kept = subset(&net, &clf, &args.trim_features)?;
    let beta = clf.trimmed(kept, args.trim_threshold);
    let value = AgreementModel::new(&net, &clf)?.eca(&beta)?;
    let mut obj = Map::new();
    obj.insert("trim_features".into(), names(&clf.feature_names(&net, kept)));
    obj.insert("trim_threshold".into(), num(args.trim_threshold));
    obj.insert("eca".into(), num(value));
    if args.esdp {
        let y = clf.vars_of(kept);
        let z = clf.vars_of(clf.all_features().minus(kept));
        let e = esdp_two_threshold(&net, &clf, args.trim_threshold, &z, &y, &Assignment::empty(&net))?;
        obj.insert("esdp".into(), num(e));
    }
    emit(&Value::Object(obj));
    Ok(())
}

fn sdp(args: &SdpArgs) -> CliResult<()> {
    let (net, clf, _) = load(&args.clf)?;
    let x = clf.vars_of(subset(&net, &clf, &args.observe)?);
    let pairs: Vec<(&str, &str)> = args
        .evidence
        .iter()
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.split_once('=')
                .ok_or_else(|| Failure::Usage(format!("evidence {p:?} is not name=value")))
        })
        .collect::<CliResult<_>>()?;
    let e = Assignment::from_labels(&net, &pairs)?;
    let value = agreement::sdp(&net, &clf, &x, &e)?;
    let observe: Vec<&str> = x.iter().map(|&v| net.name(v)).collect();
    emit(&json!({ "observe": names(&observe), "sdp": num(value) }));
    Ok(())
}

fn ig(args: &IgArgs) -> CliResult<()> {
    let (net, clf, spec) = load(&args.inner.clf)?;
    let costs = cost_model(&net, &clf, spec, &args.inner.budget)?;
    let r = ig_baseline(&net, &clf, &costs, args.reoptimize)?;
    let mut scores = Map::new();
    for (&f, &s) in clf.features.iter().zip(&r.scores) {
        scores.insert(net.name(f).to_string(), num(s));
    }
    emit(&json!({
        "method": r.method,
        "selected": r.names,
        "threshold": num(r.threshold),
        "eca": num(r.eca),
        "info_gain": scores,
    }));
    Ok(())
}

fn seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("BNTRIM_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("BNTRIM_SEED={s:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn scatter_cmd(args: &ScatterArgs) -> CliResult<()> {
    let seed = seed(args.seed)?;
    let data = match (args.synthetic, &args.data) {
        (Some(rows), _) => {
            synthetic_dataset(&SyntheticSpec {
                features: args.synthetic_features,
                rows,
                seed,
                ..SyntheticSpec::default()
            })
            .1
        }
        (None, Some(path)) => parse_dataset(&read(path)?, &args.class_column)?,
        (None, None) => return Err(Failure::Usage("--data or --synthetic is required".into())),
    };
    let config = EvalConfig {
        train_fraction: args.train_fraction,
        folds: args.folds,
        seed,
        smoothing: args.smoothing,
        budget: match args.budget {
            Some(b) => BudgetRule::Absolute(b),
            None => BudgetRule::Fraction(args.budget_frac),
        },
        eca_threshold: args.fixed_threshold.map_or(EcaThreshold::Optimal, EcaThreshold::Fixed),
        positive: args.positive.clone(),
        ..EvalConfig::default()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| Failure::Io(e.to_string()))?;
    let report = pool.install(|| scatter(&data, &config))?;
    let csv = report.to_csv()?;
    let summary = report.summary_json();
    match &args.out {
        Some(path) => {
            write(path, &csv)?;
            print!("{summary}");
        }
        None => {
            print!("{csv}");
            if let Some(path) = &args.summary {
                write(path, &summary)?;
            }
        }
    }
    Ok(())
}

fn learn(args: &LearnArgs) -> CliResult<()> {
    let data = parse_dataset(&read(&args.data)?, &args.class_column)?;
    let (net, clf) = learn_nb(&data, args.smoothing)?;
    let doc = serialize_network(&net);
    match &args.out {
        Some(p) => write(p, &doc)?,
        None => print!("{doc}"),
    }
    if let Some(p) = &args.task_out {
        let task = TaskSpec {
            class: net.name(clf.class_var).to_string(),
            positive: net.variable(clf.class_var).values[clf.positive].clone(),
            features: Some(clf.feature_names(&net, clf.all_features()).into_iter().map(String::from).collect()),
            threshold: clf.threshold,
            costs: Default::default(),
            budget: None,
        };
        write(p, &(serde_json::to_string_pretty(&task).expect("json") + "\n"))?;
    }
    Ok(())
}

fn validate(path: &Path) -> CliResult<()> {
    let text = read(path)?;
    let doc: NetworkDocument = if text.trim().is_empty() {
        NetworkDocument::default()
    } else {
        serde_json::from_str(&text).map_err(|e| {
            Failure::Lib(Error::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })
        })?
    };
    let report = validate_network(&doc.variables, &doc.cpds);
    let violations: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
    emit(&json!({ "valid": report.is_valid(), "violations": violations }));
    if report.is_valid() {
        Ok(())
    } else {
        Err(Failure::Lib(Error::InvalidNetwork(report)))
    }
}

fn dispatch(cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::Trim(a) => trim(a),
        Command::Maa(a) => maa(a),
        Command::Mpa(a) => mpa(a),
        Command::Eca(a) => eca(a),
        Command::Sdp(a) => sdp(a),
        Command::Ig(a) => ig(a),
        Command::Exhaustive(a) => exhaustive(a),
        Command::Scatter(a) => scatter_cmd(a),
        Command::Learn(a) => learn(a),
        Command::Validate { path } => validate(path),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::EnumerationGuard { .. }) { 3 } else { 2 })
        }
    }
}
