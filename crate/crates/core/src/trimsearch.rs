//! Optimal trimming under a budget.
//!
//! [`eca_trim`] is a depth-first branch-and-bound over include/exclude
//! decisions. Every visited node whose included set fits the budget is
//! scored with its maximum achievable agreement, and a subtree is cut off
//! when the maximum potential agreement of all features not yet excluded
//! cannot beat the incumbent. [`nb_trim`] exploits the monotonicity of that
//! bound under naive Bayes and only scores maximal subsets.
//! [`exhaustive_trim`] is the reference enumeration.

use std::cmp::Ordering as CmpOrdering;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::agreement::{compute_maa, AgreementModel, InstanceTable, Maa, ThresholdInterval};
use crate::error::{Error, Result};
use crate::model::{
    is_naive_bayes, within_budget, BayesianNetwork, Classifier, CostModel, FeatureSet, BUDGET_TOLERANCE,
};

/// Largest feature count [`exhaustive_trim`] will enumerate.
pub const EXHAUSTIVE_MAX_FEATURES: usize = 20;

/// Depth below which parallel searches stop forking.
const SPLIT_DEPTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchOrder {
    /// Features with the larger single-feature potential agreement first.
    #[default]
    MpaDescending,
    InputOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub branch_order: BranchOrder,
    /// Score subsets by their potential agreement. `None` decides by
    /// checking for a naive Bayes structure.
    pub nb_fast_path: Option<bool>,
    /// Worker threads; 1 searches sequentially.
    pub jobs: usize,
    /// Record one [`TraceEvent`] per node action.
    pub trace: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            branch_order: BranchOrder::default(),
            nb_fast_path: None,
            jobs: 1,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchStats {
    pub maa_evals: u64,
    pub mpa_evals: u64,
    pub nodes_expanded: u64,
    pub subtrees_pruned: u64,
}

impl SearchStats {
    fn absorb(&mut self, other: &SearchStats) {
        self.maa_evals += other.maa_evals;
        self.mpa_evals += other.mpa_evals;
        self.nodes_expanded += other.nodes_expanded;
        self.subtrees_pruned += other.subtrees_pruned;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceAction {
    Maa,
    Bound,
    Prune,
    Update,
}

impl fmt::Display for TraceAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceAction::Maa => "maa",
            TraceAction::Bound => "bound",
            TraceAction::Prune => "prune",
            TraceAction::Update => "update",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub included: FeatureSet,
    pub excluded: FeatureSet,
    pub budget_left: f64,
    pub action: TraceAction,
    pub value: f64,
}

impl TraceEvent {
    /// `I={..} E={..} b=.. action value` with feature names.
    pub fn render(&self, net: &BayesianNetwork, clf: &Classifier) -> String {
        format!(
            "I={{{}}} E={{{}}} b={} {} {}",
            clf.feature_names(net, self.included).join(","),
            clf.feature_names(net, self.excluded).join(","),
            self.budget_left,
            self.action,
            self.value
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrimResult {
    pub best_features: FeatureSet,
    pub best_score: f64,
    pub threshold: ThresholdInterval,
    pub stats: SearchStats,
    pub trace: Vec<TraceEvent>,
}

impl TrimResult {
    /// The optimal trimming at the representative threshold.
    pub fn classifier(&self, clf: &Classifier) -> Classifier {
        clf.trimmed(self.best_features, self.threshold.representative)
    }
}

#[derive(Debug, Clone)]
struct Incumbent {
    score: f64,
    set: FeatureSet,
    interval: ThresholdInterval,
    /// Include (0) / exclude (1) decisions leading to the node that found it.
    path: Vec<u8>,
}

impl Incumbent {
    fn better_than(&self, other: &Incumbent) -> bool {
        match self.score.partial_cmp(&other.score) {
            Some(CmpOrdering::Greater) => true,
            Some(CmpOrdering::Equal) => self.path < other.path,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Local {
    best: Option<Incumbent>,
    stats: SearchStats,
    trace: Vec<TraceEvent>,
}

impl Local {
    fn best_score(&self) -> f64 {
        self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.score)
    }

    fn fork(&self) -> Local {
        Local {
            best: self.best.clone(),
            ..Local::default()
        }
    }

    fn join(&mut self, other: Local) {
        self.stats.absorb(&other.stats);
        self.trace.extend(other.trace);
        if let Some(b) = other.best {
            if self.best.as_ref().is_none_or(|mine| b.better_than(mine)) {
                self.best = Some(b);
            }
        }
    }
}

/// Shared maximum over nonnegative scores, stored as IEEE bits. For
/// nonnegative floats the bit patterns order like the values.
struct SharedBest(AtomicU64);

impl SharedBest {
    fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Acquire))
    }

    fn raise(&self, score: f64) {
        self.0.fetch_max(score.max(0.0).to_bits(), Ordering::AcqRel);
    }
}

#[derive(Clone, Copy)]
struct Node {
    included: FeatureSet,
    excluded: FeatureSet,
    budget_left: f64,
}

struct Searcher<'a, 'n> {
    model: &'a AgreementModel<'n>,
    costs: &'a [f64],
    budget: f64,
    order: Vec<usize>,
    nb_scores: bool,
    trace: bool,
    shared: Option<&'a SharedBest>,
}

impl Searcher<'_, '_> {
    fn record(&self, local: &mut Local, node: &Node, action: TraceAction, value: f64) {
        if self.trace {
            local.trace.push(TraceEvent {
                included: node.included,
                excluded: node.excluded,
                budget_left: node.budget_left,
                action,
                value,
            });
        }
    }

    fn first_fitting(&self, node: &Node) -> Option<usize> {
        let taken = node.included.union(node.excluded);
        self.order
            .iter()
            .copied()
            .find(|&p| !taken.contains(p) && self.costs[p] <= node.budget_left + BUDGET_TOLERANCE)
    }

    fn table(&self, set: FeatureSet) -> Result<InstanceTable> {
        self.model.instance_table(set)
    }

    /// Scores `set` and updates the incumbent on strict improvement.
    fn score(&self, local: &mut Local, node: &Node, set: FeatureSet, path: &[u8]) -> Result<()> {
        local.stats.maa_evals += 1;
        let (m, maa) = if self.nb_scores {
            (self.model.mpa(set)?, None)
        } else {
            let maa = self.model.maa(set)?;
            (maa.score, Some(maa))
        };
        let scored = Node { included: set, ..*node };
        self.record(local, &scored, TraceAction::Maa, m);
        if m > local.best_score() {
            let maa = match maa {
                Some(maa) => maa,
                None => compute_maa(&self.table(set)?)?,
            };
            self.record(local, &scored, TraceAction::Update, maa.score);
            if let Some(shared) = self.shared {
                shared.raise(m);
            }
            local.best = Some(Incumbent {
                score: m,
                set,
                interval: maa.interval,
                path: path.to_vec(),
            });
        }
        Ok(())
    }

    fn should_prune(&self, local: &Local, bound: f64) -> bool {
        bound <= local.best_score() || self.shared.is_some_and(|s| bound < s.get())
    }

    /// `bound` carries the parent's bound into an include child, whose set
    /// of unexcluded features is the parent's. `scored` marks exclude
    /// children, whose included set the parent already scored.
    fn eca_visit(
        &self,
        local: &mut Local,
        node: Node,
        bound: Option<f64>,
        scored: bool,
        path: &mut Vec<u8>,
    ) -> Result<()> {
        local.stats.nodes_expanded += 1;
        if !scored {
            self.score(local, &node, node.included, path)?;
        }
        let Some(feature) = self.first_fitting(&node) else {
            return Ok(());
        };
        let bound = match bound {
            Some(b) => b,
            None => {
                local.stats.mpa_evals += 1;
                let b = self.model.mpa(FeatureSet::full(self.costs.len()).minus(node.excluded))?;
                self.record(local, &node, TraceAction::Bound, b);
                b
            }
        };
        if self.should_prune(local, bound) {
            local.stats.subtrees_pruned += 1;
            self.record(local, &node, TraceAction::Prune, bound);
            return Ok(());
        }
        let include = Node {
            included: node.included.with(feature),
            excluded: node.excluded,
            budget_left: node.budget_left - self.costs[feature],
        };
        let exclude = Node {
            excluded: node.excluded.with(feature),
            ..node
        };
        if self.shared.is_some() && path.len() < SPLIT_DEPTH {
            let mut right = local.fork();
            let mut right_path = path.clone();
            right_path.push(1);
            path.push(0);
            let (a, b) = rayon::join(
                || self.eca_visit(local, include, Some(bound), false, path),
                || self.eca_visit(&mut right, exclude, None, true, &mut right_path),
            );
            path.pop();
            a?;
            b?;
            local.join(right);
            return Ok(());
        }
        path.push(0);
        self.eca_visit(local, include, Some(bound), false, path)?;
        path.pop();
        path.push(1);
        self.eca_visit(local, exclude, None, true, path)?;
        path.pop();
        Ok(())
    }

    fn nb_visit(&self, local: &mut Local, node: Node, path: &mut Vec<u8>) -> Result<()> {
        local.stats.nodes_expanded += 1;
        let open = FeatureSet::full(self.costs.len()).minus(node.excluded);
        if within_budget(self.costs, open, self.budget) {
            return self.score(local, &node, open, path);
        }
        let Some(feature) = self.first_fitting(&node) else {
            return self.score(local, &node, node.included, path);
        };
        local.stats.mpa_evals += 1;
        let bound = self.model.mpa(open)?;
        self.record(local, &node, TraceAction::Bound, bound);
        if self.should_prune(local, bound) {
            local.stats.subtrees_pruned += 1;
            self.record(local, &node, TraceAction::Prune, bound);
            return Ok(());
        }
        path.push(0);
        self.nb_visit(
            local,
            Node {
                included: node.included.with(feature),
                excluded: node.excluded,
                budget_left: node.budget_left - self.costs[feature],
            },
            path,
        )?;
        path.pop();
        path.push(1);
        self.nb_visit(
            local,
            Node {
                excluded: node.excluded.with(feature),
                ..node
            },
            path,
        )?;
        path.pop();
        Ok(())
    }
}

fn branch_order(model: &AgreementModel<'_>, n: usize, order: BranchOrder, stats: &mut SearchStats) -> Result<Vec<usize>> {
    let mut positions: Vec<usize> = (0..n).collect();
    if order == BranchOrder::MpaDescending {
        let mut single = Vec::with_capacity(n);
        for p in 0..n {
            single.push(model.mpa(FeatureSet::empty().with(p))?);
            stats.mpa_evals += 1;
        }
        // stable: ties keep input order
        positions.sort_by(|&a, &b| single[b].partial_cmp(&single[a]).unwrap_or(CmpOrdering::Equal));
    }
    Ok(positions)
}

fn finish(model: &AgreementModel<'_>, local: Local) -> Result<TrimResult> {
    let best = local.best.expect("the root is always scored");
    // report the sweep's score so that it matches `maa` exactly
    let Maa { score, interval } = compute_maa(&model.instance_table(best.set)?)?;
    debug_assert!(interval == best.interval);
    Ok(TrimResult {
        best_features: best.set,
        best_score: score,
        threshold: interval,
        stats: local.stats,
        trace: local.trace,
    })
}

fn run<F>(
    model: &AgreementModel<'_>,
    costs: &[f64],
    budget: f64,
    opts: &SearchOptions,
    nb_scores: bool,
    visit: F,
) -> Result<TrimResult>
where
    F: Fn(&Searcher<'_, '_>, &mut Local) -> Result<()> + Send + Sync,
{
    let mut local = Local::default();
    let order = branch_order(model, costs.len(), opts.branch_order, &mut local.stats)?;
    let shared = SharedBest(AtomicU64::new(0));
    let parallel = opts.jobs > 1;
    let searcher = Searcher {
        model,
        costs,
        budget,
        order,
        nb_scores,
        trace: opts.trace,
        shared: parallel.then_some(&shared),
    };
    if parallel {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| visit(&searcher, &mut local))?;
    } else {
        visit(&searcher, &mut local)?;
    }
    finish(model, local)
}

fn root(budget: f64) -> Node {
    Node {
        included: FeatureSet::empty(),
        excluded: FeatureSet::empty(),
        budget_left: budget,
    }
}

/// Branch-and-bound search for the within-budget feature subset with the
/// largest maximum achievable agreement.
pub fn eca_trim(net: &BayesianNetwork, clf: &Classifier, costs: &CostModel, opts: &SearchOptions) -> Result<TrimResult> {
    let feature_costs = costs.feature_costs(net, clf)?;
    let model = AgreementModel::new(net, clf)?;
    let nb_scores = opts.nb_fast_path.unwrap_or_else(|| is_naive_bayes(net, clf));
    run(&model, &feature_costs, costs.budget, opts, nb_scores, |s, local| {
        s.eca_visit(local, root(costs.budget), None, false, &mut Vec::new())
    })
}

/// Naive Bayes search that scores only subsets no remaining feature can be
/// added to.
pub fn nb_trim(net: &BayesianNetwork, clf: &Classifier, costs: &CostModel) -> Result<TrimResult> {
    nb_trim_with(net, clf, costs, &SearchOptions::default())
}

/// [`nb_trim`] with a branch order and tracing. Runs sequentially.
pub fn nb_trim_with(net: &BayesianNetwork, clf: &Classifier, costs: &CostModel, opts: &SearchOptions) -> Result<TrimResult> {
    if !is_naive_bayes(net, clf) {
        return Err(Error::NotNaiveBayes);
    }
    let feature_costs = costs.feature_costs(net, clf)?;
    let model = AgreementModel::new(net, clf)?;
    let opts = SearchOptions { jobs: 1, ..opts.clone() };
    run(&model, &feature_costs, costs.budget, &opts, true, |s, local| {
        s.nb_visit(local, root(costs.budget), &mut Vec::new())
    })
}

/// Scores every within-budget subset, smaller subsets first and then in
/// lexicographic feature order, keeping the first maximum.
pub fn exhaustive_trim(net: &BayesianNetwork, clf: &Classifier, costs: &CostModel) -> Result<TrimResult> {
    let n = clf.features.len();
    if n > EXHAUSTIVE_MAX_FEATURES {
        return Err(Error::EnumerationGuard {
            size: 2f64.powi(n as i32),
            limit: 1 << EXHAUSTIVE_MAX_FEATURES,
        });
    }
    let feature_costs = costs.feature_costs(net, clf)?;
    let model = AgreementModel::new(net, clf)?;
    let mut stats = SearchStats::default();
    let mut best: Option<(FeatureSet, Maa)> = None;
    for set in FeatureSet::all_by_size(n) {
        if !within_budget(&feature_costs, set, costs.budget) {
            continue;
        }
        stats.nodes_expanded += 1;
        stats.maa_evals += 1;
        let maa = model.maa(set)?;
        if best.as_ref().is_none_or(|(_, b)| maa.score > b.score) {
            best = Some((set, maa));
        }
    }
    let (set, maa) = best.expect("the empty subset is always within budget");
    Ok(TrimResult {
        best_features: set,
        best_score: maa.score,
        threshold: maa.interval,
        stats,
        trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agreement::maa;
    use crate::fixtures;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn quiz() -> (BayesianNetwork, Classifier) {
        let net = fixtures::quiz();
        let clf = fixtures::quiz_classifier(&net);
        (net, clf)
    }

    fn generic() -> SearchOptions {
        SearchOptions {
            nb_fast_path: Some(false),
            ..SearchOptions::default()
        }
    }

    #[test]
    fn quiz_budget_two() {
        let (net, clf) = quiz();
        let costs = CostModel::unit(&clf, 2.0);
        for opts in [generic(), SearchOptions::default()] {
            let r = eca_trim(&net, &clf, &costs, &opts).unwrap();
            assert_eq!(r.best_features, clf.set_of_names(&net, &["Q1", "Q2"]).unwrap());
            assert!(close(r.best_score, 0.9748, 1e-12));
            assert!(close(r.threshold.lo, 0.06 / 0.78, 1e-12));
            assert!(close(r.threshold.hi, 1.0 / 3.0, 1e-12));
            assert!(r.stats.maa_evals <= 7);
        }
        let e = exhaustive_trim(&net, &clf, &costs).unwrap();
        assert_eq!(e.stats.maa_evals, 7);
        assert_eq!(e.best_features, clf.set_of_names(&net, &["Q1", "Q2"]).unwrap());
    }

    #[test]
    fn quiz_full_and_empty_budgets() {
        let (net, clf) = quiz();
        let full = eca_trim(&net, &clf, &CostModel::unit(&clf, 3.0), &generic()).unwrap();
        assert_eq!(full.best_features, clf.all_features());
        assert!(close(full.best_score, 1.0, 1e-12));
        assert!(full.threshold.contains(0.07));

        let none = eca_trim(&net, &clf, &CostModel::unit(&clf, 0.0), &generic()).unwrap();
        assert_eq!(none.best_features, FeatureSet::empty());
        assert!(close(none.best_score, 0.7318, 1e-12));
        let ex = exhaustive_trim(&net, &clf, &CostModel::unit(&clf, 0.5)).unwrap();
        assert_eq!(ex.best_features, FeatureSet::empty());
    }

    #[test]
    fn nb_trim_scores_only_the_frontier() {
        let (net, clf) = quiz();
        let costs = CostModel::unit(&clf, 2.0);
        let r = nb_trim_with(
            &net,
            &clf,
            &costs,
            &SearchOptions {
                trace: true,
                ..SearchOptions::default()
            },
        )
        .unwrap();
        assert_eq!(r.stats.maa_evals, 3);
        let scored: Vec<FeatureSet> = r
            .trace
            .iter()
            .filter(|e| e.action == TraceAction::Maa)
            .map(|e| e.included)
            .collect();
        assert!(scored.iter().all(|s| s.len() == 2));
        assert!(close(r.best_score, 0.9748, 1e-12));
        let generic = eca_trim(&net, &clf, &costs, &generic()).unwrap();
        assert!(r.stats.maa_evals <= generic.stats.maa_evals);
    }

    #[test]
    fn nb_trim_single_feature() {
        let net = fixtures::quiz();
        let clf = Classifier::new(&net, "C", "+", &["Q2"], 0.5).unwrap();
        let r = nb_trim(&net, &clf, &CostModel::unit(&clf, 1.0)).unwrap();
        assert_eq!(r.best_features, clf.all_features());
    }

    #[test]
    fn nb_trim_rejects_general_networks() {
        let net = fixtures::gbn4();
        let clf = fixtures::gbn4_classifier(&net);
        assert!(matches!(
            nb_trim(&net, &clf, &CostModel::unit(&clf, 1.0)),
            Err(Error::NotNaiveBayes)
        ));
    }

    #[test]
    fn cost_errors_propagate() {
        let (net, clf) = quiz();
        let neg = CostModel::unit(&clf, -1.0);
        assert!(matches!(eca_trim(&net, &clf, &neg, &generic()), Err(Error::NegativeBudget(_))));
        let partial = CostModel::from_names(&net, &[("Q1", 1.0)], 1.0).unwrap();
        assert!(matches!(eca_trim(&net, &clf, &partial, &generic()), Err(Error::MissingCost(_))));
    }

    #[test]
    fn pruning_is_admissible_in_the_trace() {
        let net = fixtures::gbn4();
        let clf = fixtures::gbn4_classifier(&net);
        for budget in 0..=3 {
            let opts = SearchOptions {
                trace: true,
                ..SearchOptions::default()
            };
            let r = eca_trim(&net, &clf, &CostModel::unit(&clf, budget as f64), &opts).unwrap();
            let mut best = f64::NEG_INFINITY;
            for e in &r.trace {
                match e.action {
                    TraceAction::Update => best = best.max(e.value),
                    TraceAction::Prune => assert!(e.value <= best + 1e-12),
                    _ => {}
                }
            }
            let ex = exhaustive_trim(&net, &clf, &CostModel::unit(&clf, budget as f64)).unwrap();
            assert!(close(r.best_score, ex.best_score, 1e-12));
            let direct = maa(&net, &clf, r.best_features).unwrap();
            assert!(close(r.best_score, direct.score, 1e-12));
        }
    }

    #[test]
    fn trace_renders_names() {
        let (net, clf) = quiz();
        let opts = SearchOptions {
            trace: true,
            ..generic()
        };
        let r = eca_trim(&net, &clf, &CostModel::unit(&clf, 1.0), &opts).unwrap();
        let first = r.trace[0].render(&net, &clf);
        assert!(first.starts_with("I={} E={} b=1 maa 0.7318"), "{first}");
    }

    #[test]
    fn parallel_matches_sequential() {
        let (net, clf) = quiz();
        for budget in 0..=3 {
            let costs = CostModel::unit(&clf, budget as f64);
            let seq = eca_trim(&net, &clf, &costs, &generic()).unwrap();
            let par = eca_trim(
                &net,
                &clf,
                &costs,
                &SearchOptions {
                    jobs: 4,
                    ..generic()
                },
            )
            .unwrap();
            assert_eq!(seq.best_features, par.best_features);
            assert_eq!(seq.best_score, par.best_score);
        }
    }

    #[test]
    fn exhaustive_guard() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        let spec = fixtures::RandomSpec {
            n_features: 21,
            ..fixtures::RandomSpec::default()
        };
        let (net, clf) = fixtures::random_naive_bayes(&mut rng, &spec);
        assert!(matches!(
            exhaustive_trim(&net, &clf, &CostModel::unit(&clf, 1.0)),
            Err(Error::EnumerationGuard { .. })
        ));
    }
}
