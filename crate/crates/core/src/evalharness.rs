//! Data-driven evaluation of trimmed naive Bayes classifiers.
//!
//! A classifier is learned from the training part of a CSV dataset, every
//! feasible feature subset is scored by its agreement with the full
//! classifier and by cross-validated accuracy, and the two winners are
//! compared on held-out rows.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::agreement::AgreementModel;
use crate::baselines::ig_baseline;
use crate::error::{Error, Result};
use crate::fixtures::{random_naive_bayes, RandomSpec};
use crate::inference::{decide, forward_sample, posterior_class, Assignment};
use crate::model::{
    within_budget, BayesianNetwork, Classifier, CostModel, Cpt, FeatureSet, Label, VarId, Variable,
};
use crate::netio::Dataset;
use crate::trimsearch::{eca_trim, SearchOptions, EXHAUSTIVE_MAX_FEATURES};

/// Threshold of freshly learned classifiers and of test-time accuracy.
pub const TRAINING_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudgetRule {
    Absolute(f64),
    /// `ceil(fraction * |F|)` under unit costs.
    Fraction(f64),
}

impl BudgetRule {
    pub fn resolve(self, n_features: usize) -> f64 {
        match self {
            BudgetRule::Absolute(b) => b,
            BudgetRule::Fraction(f) => (f * n_features as f64 - 1e-9).ceil().max(0.0),
        }
    }
}

/// Threshold at which each scatter row's agreement is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EcaThreshold {
    /// The subset's own best threshold.
    Optimal,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub train_fraction: f64,
    pub folds: usize,
    pub seed: u64,
    pub smoothing: f64,
    pub budget: BudgetRule,
    /// Original thresholds for [`threshold_sweep`].
    pub thresholds: Vec<f64>,
    pub eca_threshold: EcaThreshold,
    /// Positive class label; defaults to the first label in the file.
    pub positive: Option<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            folds: 10,
            seed: 0,
            smoothing: 1.0,
            budget: BudgetRule::Fraction(0.5),
            thresholds: vec![0.5],
            eca_threshold: EcaThreshold::Optimal,
            positive: None,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train fraction {} outside (0,1)", self.train_fraction)));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        if !(self.smoothing >= 0.0) {
            return Err(Error::Config(format!("smoothing {} is negative", self.smoothing)));
        }
        if let Some(t) = self.thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::Config(format!("threshold {t} outside [0,1]")));
        }
        Ok(())
    }
}

/// Value labels of every column in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Domains {
    pub values: Vec<Vec<String>>,
}

impl Domains {
    pub fn of(data: &Dataset) -> Self {
        let mut values: Vec<Vec<String>> = vec![Vec::new(); data.columns.len()];
        for row in &data.rows {
            for (c, cell) in row.iter().enumerate() {
                if !values[c].contains(cell) {
                    values[c].push(cell.clone());
                }
            }
        }
        Self { values }
    }

    fn index(&self, column: usize, label: &str) -> Option<usize> {
        self.values[column].iter().position(|v| v == label)
    }
}

/// Learns a naive Bayes classifier with additive smoothing. The positive
/// class is the first class label in the data; the threshold is 0.5.
pub fn learn_nb(data: &Dataset, smoothing: f64) -> Result<(BayesianNetwork, Classifier)> {
    learn_with(data, &Domains::of(data), None, smoothing)
}

fn learn_with(
    data: &Dataset,
    domains: &Domains,
    positive: Option<&str>,
    smoothing: f64,
) -> Result<(BayesianNetwork, Classifier)> {
    if data.is_empty() {
        return Err(Error::Dataset("empty dataset".into()));
    }
    let cc = data.class_column;
    let class_values = &domains.values[cc];
    if class_values.len() != 2 {
        return Err(Error::NotBinaryClass {
            name: data.class_name().to_string(),
            cardinality: class_values.len(),
        });
    }
    let positive = match positive {
        Some(p) => domains.index(cc, p).ok_or_else(|| Error::UnknownValue {
            variable: data.class_name().to_string(),
            value: p.to_string(),
        })?,
        None => 0,
    };
    let class_of: Vec<usize> = data
        .rows
        .iter()
        .map(|r| domains.index(cc, &r[cc]).expect("class label in domain"))
        .collect();
    let mut class_count = [0usize; 2];
    for &c in &class_of {
        class_count[c] += 1;
    }
    if smoothing == 0.0 && class_count.contains(&0) {
        return Err(Error::Dataset(
            "training rows contain a single class and smoothing is 0".into(),
        ));
    }

    let class_name = data.class_name().to_string();
    let n = data.len() as f64;
    let mut vars = vec![Variable {
        name: class_name.clone(),
        values: class_values.clone(),
    }];
    let mut cpts = vec![Cpt {
        child: class_name.clone(),
        parents: vec![],
        rows: vec![class_count
            .iter()
            .map(|&k| (k as f64 + smoothing) / (n + 2.0 * smoothing))
            .collect()],
    }];
    for col in data.feature_columns() {
        let card = domains.values[col].len();
        let mut counts = vec![vec![0usize; card]; 2];
        for (row, &c) in data.rows.iter().zip(&class_of) {
            counts[c][domains.index(col, &row[col]).expect("value in domain")] += 1;
        }
        let rows = counts
            .iter()
            .zip(class_count)
            .map(|(cs, total)| {
                let denom = total as f64 + smoothing * card as f64;
                cs.iter().map(|&k| (k as f64 + smoothing) / denom).collect()
            })
            .collect();
        vars.push(Variable {
            name: data.columns[col].clone(),
            values: domains.values[col].clone(),
        });
        cpts.push(Cpt {
            child: data.columns[col].clone(),
            parents: vec![class_name.clone()],
            rows,
        });
    }
    let net = BayesianNetwork::new(vars, cpts)?;
    let features = (1..net.len()).map(VarId).collect();
    let clf = Classifier::from_ids(&net, VarId(0), positive, features, TRAINING_THRESHOLD)?;
    Ok((net, clf))
}

/// Within-budget subsets, smaller first and then in lexicographic order.
pub fn enumerate_feasible(costs: &[f64], budget: f64) -> Result<Vec<FeatureSet>> {
    if costs.len() > EXHAUSTIVE_MAX_FEATURES {
        return Err(Error::EnumerationGuard {
            size: 2f64.powi(costs.len() as i32),
            limit: 1 << EXHAUSTIVE_MAX_FEATURES,
        });
    }
    Ok(FeatureSet::all_by_size(costs.len())
        .into_iter()
        .filter(|&s| within_budget(costs, s, budget))
        .collect())
}

/// Label of a data row under `clf` restricted to `subset`, or `None` when
/// the observed values have zero probability.
fn predict(net: &BayesianNetwork, clf: &Classifier, row: &[usize], subset: FeatureSet, threshold: f64) -> Option<Label> {
    let mut a = Assignment::empty(net);
    for p in subset.positions() {
        a.set(clf.features[p], row[p]);
    }
    posterior_class(net, clf, &a).ok().map(|post| decide(post, threshold))
}

/// Dataset rows as value indices: class first, then features in column
/// order, matching the variables of a learned classifier.
fn encode(data: &Dataset, domains: &Domains) -> (Vec<usize>, Vec<Vec<usize>>) {
    let cc = data.class_column;
    let feats = data.feature_columns();
    let class = data
        .rows
        .iter()
        .map(|r| domains.index(cc, &r[cc]).expect("class label in domain"))
        .collect();
    let rows = data
        .rows
        .iter()
        .map(|r| {
            feats
                .iter()
                .map(|&c| domains.index(c, &r[c]).expect("value in domain"))
                .collect()
        })
        .collect();
    (class, rows)
}

/// Stratified folds: each class's rows are shuffled with the seed, then
/// dealt round-robin, classes in order of first appearance.
pub fn stratified_folds(data: &Dataset, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds > data.len() {
        return Err(Error::Config(format!("{folds} folds for {} rows", data.len())));
    }
    let domains = Domains::of(data);
    let (class, _) = encode(data, &domains);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut out = vec![Vec::new(); folds];
    let mut dealt = 0;
    for c in 0..domains.values[data.class_column].len() {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| class[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            out[dealt % folds].push(i);
            dealt += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

/// Per-fold classifiers learned once and restricted to any subset at
/// prediction time. Under naive Bayes the restriction equals learning on
/// the subset alone.
pub struct CrossValidator {
    folds: Vec<Vec<usize>>,
    models: Vec<(BayesianNetwork, Classifier)>,
    class: Vec<usize>,
    rows: Vec<Vec<usize>>,
}

impl CrossValidator {
    pub fn new(data: &Dataset, domains: &Domains, positive: Option<&str>, folds: usize, seed: u64, smoothing: f64) -> Result<Self> {
        let folds = stratified_folds(data, folds, seed)?;
        let models = folds
            .iter()
            .map(|held| {
                let train: Vec<usize> = (0..data.len()).filter(|i| held.binary_search(i).is_err()).collect();
                learn_with(&data.select(&train), domains, positive, smoothing)
            })
            .collect::<Result<Vec<_>>>()?;
        let (class, rows) = encode(data, domains);
        Ok(Self {
            folds,
            models,
            class,
            rows,
        })
    }

    /// Mean held-out accuracy at threshold 0.5. Rows whose posterior is
    /// undefined count as errors.
    pub fn accuracy(&self, subset: FeatureSet) -> f64 {
        let mut total = 0.0;
        for (held, (net, clf)) in self.folds.iter().zip(&self.models) {
            let correct = held
                .iter()
                .filter(|&&i| {
                    let truth = if self.class[i] == clf.positive {
                        Label::Positive
                    } else {
                        Label::Negative
                    };
                    predict(net, clf, &self.rows[i], subset, TRAINING_THRESHOLD) == Some(truth)
                })
                .count();
            total += correct as f64 / held.len() as f64;
        }
        total / self.folds.len() as f64
    }
}

/// Stratified k-fold accuracy of the naive Bayes classifier over `subset`
/// (positions among the dataset's feature columns).
pub fn cv_accuracy(data: &Dataset, subset: FeatureSet, folds: usize, seed: u64, smoothing: f64) -> Result<f64> {
    Ok(CrossValidator::new(data, &Domains::of(data), None, folds, seed, smoothing)?.accuracy(subset))
}

/// Seeded train/test split of row indices.
pub fn train_test_split(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let cut = ((n as f64) * train_fraction).round() as usize;
    let cut = cut.clamp(1.min(n), n.saturating_sub(1).max(1.min(n)));
    let mut train = idx[..cut].to_vec();
    let mut test = idx[cut..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Marker {
    Feasible,
    OptimalEca,
    OptimalAccuracy,
}

impl Marker {
    pub fn as_str(self) -> &'static str {
        match self {
            Marker::Feasible => "feasible",
            Marker::OptimalEca => "optimal-eca",
            Marker::OptimalAccuracy => "optimal-accuracy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub subset: FeatureSet,
    pub names: Vec<String>,
    pub eca: f64,
    pub threshold: f64,
    pub cv_accuracy: f64,
    pub marker: Marker,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetSummary {
    pub subset: Vec<String>,
    pub eca: f64,
    pub threshold: f64,
    pub cv_accuracy: f64,
    pub test_agreement: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterSummary {
    pub budget: f64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub optimal_eca: SubsetSummary,
    pub optimal_accuracy: SubsetSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterReport {
    pub rows: Vec<ScatterRow>,
    pub summary: ScatterSummary,
}

impl ScatterReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| Error::Dataset(e.to_string());
        w.write_record(["subset", "eca", "cv_accuracy", "marker"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.names.join(";"),
                r.eca.to_string(),
                r.cv_accuracy.to_string(),
                r.marker.as_str().to_string(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Dataset(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Dataset(e.to_string()))
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes") + "\n"
    }
}

fn first_max<F: Fn(&ScatterRow) -> f64>(rows: &[ScatterRow], key: F) -> usize {
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if key(r) > key(&rows[best]) {
            best = i;
        }
    }
    best
}

/// Learns on the training split, scores every feasible subset, and
/// evaluates the best-agreement and best-accuracy subsets on the test
/// split.
pub fn scatter(data: &Dataset, config: &EvalConfig) -> Result<ScatterReport> {
    config.validate()?;
    let domains = Domains::of(data);
    let positive = config.positive.as_deref();
    let (train_idx, test_idx) = train_test_split(data.len(), config.train_fraction, config.seed);
    let train = data.select(&train_idx);
    let test = data.select(&test_idx);

    let (net, clf) = learn_with(&train, &domains, positive, config.smoothing)?;
    let costs = vec![1.0; clf.features.len()];
    let budget = config.budget.resolve(clf.features.len());
    let feasible = enumerate_feasible(&costs, budget)?;
    let model = AgreementModel::new(&net, &clf)?;
    let cv = CrossValidator::new(&train, &domains, positive, config.folds, config.seed, config.smoothing)?;

    let mut rows = feasible
        .par_iter()
        .map(|&s| {
            let (eca, threshold) = match config.eca_threshold {
                EcaThreshold::Optimal => {
                    let m = model.maa(s)?;
                    (m.score, m.interval.representative)
                }
                EcaThreshold::Fixed(t) => (model.eca_with(s, t)?, t),
            };
            Ok(ScatterRow {
                subset: s,
                names: clf.feature_names(&net, s).into_iter().map(String::from).collect(),
                eca,
                threshold,
                cv_accuracy: cv.accuracy(s),
                marker: Marker::Feasible,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let by_eca = rows[first_max(&rows, |r| r.eca)].clone();
    let by_acc = rows[first_max(&rows, |r| r.cv_accuracy)].clone();

    let (_, test_rows) = encode(&test, &domains);
    let (test_class, _) = encode(&test, &domains);
    let evaluate = |r: &ScatterRow| {
        let mut agree = 0usize;
        let mut correct = 0usize;
        for (row, &c) in test_rows.iter().zip(&test_class) {
            let full = predict(&net, &clf, row, clf.all_features(), clf.threshold);
            let trimmed = predict(&net, &clf, row, r.subset, r.threshold);
            if full.is_some() && full == trimmed {
                agree += 1;
            }
            let truth = if c == clf.positive { Label::Positive } else { Label::Negative };
            if predict(&net, &clf, row, r.subset, TRAINING_THRESHOLD) == Some(truth) {
                correct += 1;
            }
        }
        let n = test_rows.len().max(1) as f64;
        SubsetSummary {
            subset: r.names.clone(),
            eca: r.eca,
            threshold: r.threshold,
            cv_accuracy: r.cv_accuracy,
            test_agreement: agree as f64 / n,
            test_accuracy: correct as f64 / n,
        }
    };
    let summary = ScatterSummary {
        budget,
        train_rows: train.len(),
        test_rows: test.len(),
        optimal_eca: evaluate(&by_eca),
        optimal_accuracy: evaluate(&by_acc),
    };
    rows.push(ScatterRow {
        marker: Marker::OptimalEca,
        ..by_eca
    });
    rows.push(ScatterRow {
        marker: Marker::OptimalAccuracy,
        ..by_acc
    });
    Ok(ScatterReport { rows, summary })
}

/// Trimming versus information-gain selection at one original threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub trim_subset: Vec<String>,
    pub trim_eca: f64,
    pub ig_subset: Vec<String>,
    /// Information-gain subset at the original threshold.
    pub ig_eca: f64,
    /// Information-gain subset at its best threshold.
    pub ig_maa: f64,
}

/// For each configured threshold, learns on the training split and
/// compares the optimal trimming with information-gain selection.
pub fn threshold_sweep(data: &Dataset, config: &EvalConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let domains = Domains::of(data);
    let (train_idx, _) = train_test_split(data.len(), config.train_fraction, config.seed);
    let (net, base) = learn_with(&data.select(&train_idx), &domains, config.positive.as_deref(), config.smoothing)?;
    let budget = config.budget.resolve(base.features.len());
    config
        .thresholds
        .iter()
        .map(|&t| {
            let clf = Classifier { threshold: t, ..base.clone() };
            let costs = CostModel::unit(&clf, budget);
            let trim = eca_trim(&net, &clf, &costs, &SearchOptions::default())?;
            let ig = ig_baseline(&net, &clf, &costs, false)?;
            let ig_maa = ig_baseline(&net, &clf, &costs, true)?;
            Ok(SweepRow {
                threshold: t,
                trim_subset: clf.feature_names(&net, trim.best_features).into_iter().map(String::from).collect(),
                trim_eca: trim.best_score,
                ig_subset: ig.names,
                ig_eca: ig.eca,
                ig_maa: ig_maa.eca,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub features: usize,
    pub rows: usize,
    pub max_cardinality: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            features: 6,
            rows: 1000,
            max_cardinality: 2,
            seed: 0,
        }
    }
}

/// Samples a dataset from a seeded random naive Bayes model. The class
/// column is `C` and comes last.
pub fn synthetic_dataset(spec: &SyntheticSpec) -> (BayesianNetwork, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (net, _) = random_naive_bayes(
        &mut rng,
        &RandomSpec {
            n_features: spec.features,
            max_cardinality: spec.max_cardinality,
            ..RandomSpec::default()
        },
    );
    let order: Vec<VarId> = (1..net.len()).chain([0]).map(VarId).collect();
    let rows = (0..spec.rows)
        .map(|_| {
            let sample = forward_sample(&net, &mut rng);
            order
                .iter()
                .map(|&v| net.variable(v).values[sample[v.0]].clone())
                .collect()
        })
        .collect();
    let data = Dataset {
        columns: order.iter().map(|&v| net.name(v).to_string()).collect(),
        rows,
        class_column: spec.features,
    };
    (net, data)
}
