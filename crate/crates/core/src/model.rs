//! Discrete Bayesian networks, binary classifiers defined on them, and
//! feature cost models.
//!
//! A [`BayesianNetwork`] can only be built from variables and tables that
//! pass [`validate_network`], so every other module may assume resolved
//! references, an acyclic parent graph and normalized CPT rows.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on CPT row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Absolute slack used when comparing subset costs against a budget.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

/// Index of a variable inside its network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variable {
    pub name: String,
    pub values: Vec<String>,
}

impl Variable {
    pub fn new<S: Into<String>>(name: S, values: &[&str]) -> Self {
        Self {
            name: name.into(),
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.values.len()
    }

    pub fn value_index(&self, label: &str) -> Option<usize> {
        self.values.iter().position(|v| v == label)
    }
}

/// Conditional probability table of `child` given `parents`.
///
/// Rows are ordered row-major over `parents` with the last parent varying
/// fastest; each row has one entry per child value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cpt {
    pub child: String,
    #[serde(default)]
    pub parents: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn new<S: Into<String>>(child: S, parents: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Self {
            child: child.into(),
            parents: parents.iter().map(|p| p.to_string()).collect(),
            rows,
        }
    }
}

/// A single structural or numerical problem found during validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoVariables,
    DuplicateVariable(String),
    BadCardinality { variable: String, cardinality: usize },
    DuplicateValue { variable: String, value: String },
    MissingCpt(String),
    DuplicateCpt(String),
    UnknownChild(String),
    DanglingReference { child: String, parent: String },
    DuplicateParent { child: String, parent: String },
    WrongRowCount { child: String, expected: usize, found: usize },
    WrongRowWidth { child: String, row: usize, expected: usize, found: usize },
    ProbabilityOutOfRange { child: String, row: usize, value: f64 },
    RowSum { child: String, row: usize, sum: f64 },
    Cycle(Vec<String>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoVariables => write!(f, "no variables"),
            Violation::DuplicateVariable(n) => write!(f, "duplicate variable {n}"),
            Violation::BadCardinality { variable, cardinality } => {
                write!(f, "variable {variable} has {cardinality} values, need at least 2")
            }
            Violation::DuplicateValue { variable, value } => {
                write!(f, "variable {variable} repeats value {value}")
            }
            Violation::MissingCpt(n) => write!(f, "no cpd for variable {n}"),
            Violation::DuplicateCpt(n) => write!(f, "more than one cpd for variable {n}"),
            Violation::UnknownChild(n) => write!(f, "cpd for unknown variable {n}"),
            Violation::DanglingReference { child, parent } => {
                write!(f, "cpd for {child} references unknown parent {parent}")
            }
            Violation::DuplicateParent { child, parent } => {
                write!(f, "cpd for {child} lists parent {parent} twice")
            }
            Violation::WrongRowCount { child, expected, found } => {
                write!(f, "cpd for {child} has {found} rows, expected {expected}")
            }
            Violation::WrongRowWidth { child, row, expected, found } => {
                write!(f, "cpd for {child}: row {row} has {found} entries, expected {expected}")
            }
            Violation::ProbabilityOutOfRange { child, row, value } => {
                write!(f, "cpd for {child}: row {row} has entry {value} outside [0,1]")
            }
            Violation::RowSum { child, row, sum } => {
                write!(f, "cpd for {child}: row {row} has row sum {sum}")
            }
            Violation::Cycle(names) => write!(f, "cycle through {}", names.join(", ")),
        }
    }
}

/// Outcome of [`validate_network`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks names, table shapes, probabilities and acyclicity.
///
/// Never fails; every problem found is reported.
pub fn validate_network(variables: &[Variable], cpts: &[Cpt]) -> ValidationReport {
    let mut out = Vec::new();
    if variables.is_empty() {
        out.push(Violation::NoVariables);
        return ValidationReport { violations: out };
    }

    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, var) in variables.iter().enumerate() {
        if index.insert(var.name.as_str(), i).is_some() {
            out.push(Violation::DuplicateVariable(var.name.clone()));
        }
        if var.values.len() < 2 {
            out.push(Violation::BadCardinality {
                variable: var.name.clone(),
                cardinality: var.values.len(),
            });
        }
        let mut seen = HashSet::new();
        for v in &var.values {
            if !seen.insert(v.as_str()) {
                out.push(Violation::DuplicateValue {
                    variable: var.name.clone(),
                    value: v.clone(),
                });
            }
        }
    }

    let mut cpt_count = vec![0usize; variables.len()];
    let mut edges_ok = true;
    let mut parents_of: Vec<Vec<usize>> = vec![Vec::new(); variables.len()];
    for cpt in cpts {
        let Some(&child) = index.get(cpt.child.as_str()) else {
            out.push(Violation::UnknownChild(cpt.child.clone()));
            edges_ok = false;
            continue;
        };
        cpt_count[child] += 1;
        let mut expected_rows = 1usize;
        let mut shape_ok = true;
        let mut seen = HashSet::new();
        for p in &cpt.parents {
            if !seen.insert(p.as_str()) {
                out.push(Violation::DuplicateParent {
                    child: cpt.child.clone(),
                    parent: p.clone(),
                });
            }
            match index.get(p.as_str()) {
                Some(&pi) => {
                    parents_of[child].push(pi);
                    expected_rows = expected_rows.saturating_mul(variables[pi].cardinality());
                }
                None => {
                    out.push(Violation::DanglingReference {
                        child: cpt.child.clone(),
                        parent: p.clone(),
                    });
                    edges_ok = false;
                    shape_ok = false;
                }
            }
        }
        if !shape_ok {
            continue;
        }
        if cpt.rows.len() != expected_rows {
            out.push(Violation::WrongRowCount {
                child: cpt.child.clone(),
                expected: expected_rows,
                found: cpt.rows.len(),
            });
        }
        let width = variables[child].cardinality();
        for (r, row) in cpt.rows.iter().enumerate() {
            if row.len() != width {
                out.push(Violation::WrongRowWidth {
                    child: cpt.child.clone(),
                    row: r,
                    expected: width,
                    found: row.len(),
                });
                continue;
            }
            let mut bad = false;
            for &p in row {
                if !(0.0..=1.0).contains(&p) {
                    out.push(Violation::ProbabilityOutOfRange {
                        child: cpt.child.clone(),
                        row: r,
                        value: p,
                    });
                    bad = true;
                }
            }
            let sum: f64 = row.iter().sum();
            if !bad && (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                out.push(Violation::RowSum {
                    child: cpt.child.clone(),
                    row: r,
                    sum,
                });
            }
        }
    }
    for (i, &n) in cpt_count.iter().enumerate() {
        match n {
            0 => out.push(Violation::MissingCpt(variables[i].name.clone())),
            1 => {}
            _ => out.push(Violation::DuplicateCpt(variables[i].name.clone())),
        }
    }

    if edges_ok {
        if let Err(cycle) = topological_order(&parents_of) {
            out.push(Violation::Cycle(
                cycle.into_iter().map(|i| variables[i].name.clone()).collect(),
            ));
        }
    }
    ValidationReport { violations: out }
}

/// Kahn's algorithm, lowest index first among ready nodes. On failure
/// returns the nodes left on cycles.
fn topological_order(parents: &[Vec<usize>]) -> std::result::Result<Vec<usize>, Vec<usize>> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(|p| p.len()).collect();
    let mut children = vec![Vec::new(); n];
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    let mut ready: std::collections::BTreeSet<usize> =
        (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).filter(|&i| indegree[i] > 0).collect())
    }
}

/// A validated discrete Bayesian network.
///
/// CPTs are stored in variable order regardless of the order they were
/// supplied in.
#[derive(Debug, Clone)]
pub struct BayesianNetwork {
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
    parents: Vec<Vec<VarId>>,
    children: Vec<Vec<VarId>>,
    strides: Vec<Vec<usize>>,
    order: Vec<VarId>,
    index: HashMap<String, VarId>,
}

impl PartialEq for BayesianNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.variables == other.variables && self.cpts == other.cpts
    }
}

impl BayesianNetwork {
    pub fn new(variables: Vec<Variable>, cpts: Vec<Cpt>) -> Result<Self> {
        let report = validate_network(&variables, &cpts);
        if !report.is_valid() {
            return Err(Error::InvalidNetwork(report));
        }
        let index: HashMap<String, VarId> = variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), VarId(i)))
            .collect();
        let mut slots: Vec<Option<Cpt>> = vec![None; variables.len()];
        for cpt in cpts {
            let id = index[&cpt.child];
            slots[id.0] = Some(cpt);
        }
        let cpts: Vec<Cpt> = slots.into_iter().map(|c| c.expect("validated")).collect();
        let parents: Vec<Vec<VarId>> = cpts
            .iter()
            .map(|c| c.parents.iter().map(|p| index[p]).collect())
            .collect();
        let strides = parents
            .iter()
            .map(|ps: &Vec<VarId>| {
                let mut s = vec![1usize; ps.len()];
                for k in (0..ps.len().saturating_sub(1)).rev() {
                    s[k] = s[k + 1] * variables[ps[k + 1].0].cardinality();
                }
                s
            })
            .collect();
        let mut children = vec![Vec::new(); variables.len()];
        for (c, ps) in parents.iter().enumerate() {
            for p in ps {
                children[p.0].push(VarId(c));
            }
        }
        let raw: Vec<Vec<usize>> = parents
            .iter()
            .map(|ps| ps.iter().map(|p| p.0).collect())
            .collect();
        let order = topological_order(&raw)
            .expect("validated")
            .into_iter()
            .map(VarId)
            .collect();
        Ok(Self {
            variables,
            cpts,
            parents,
            children,
            strides,
            order,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.variables[id.0].name
    }

    pub fn cardinality(&self, id: VarId) -> usize {
        self.variables[id.0].cardinality()
    }

    pub fn var_id(&self, name: &str) -> Result<VarId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn value_index(&self, id: VarId, label: &str) -> Result<usize> {
        self.variables[id.0]
            .value_index(label)
            .ok_or_else(|| Error::UnknownValue {
                variable: self.variables[id.0].name.clone(),
                value: label.to_string(),
            })
    }

    /// CPTs in variable order.
    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, id: VarId) -> &Cpt {
        &self.cpts[id.0]
    }

    pub fn parents(&self, id: VarId) -> &[VarId] {
        &self.parents[id.0]
    }

    pub fn children(&self, id: VarId) -> &[VarId] {
        &self.children[id.0]
    }

    /// Cached topological order; parents precede children.
    pub fn topological_order(&self) -> &[VarId] {
        &self.order
    }

    /// `Pr(var = values[var] | parents = values[parents])`, reading parent
    /// values from a dense slice indexed by variable.
    #[inline]
    pub fn cpt_entry(&self, var: VarId, values: &[usize]) -> f64 {
        let mut row = 0;
        for (p, s) in self.parents[var.0].iter().zip(&self.strides[var.0]) {
            row += values[p.0] * s;
        }
        self.cpts[var.0].rows[row][values[var.0]]
    }

    /// All ancestors of `vars`, including `vars` themselves, in
    /// topological order.
    pub fn ancestral_set(&self, vars: &[VarId]) -> Vec<VarId> {
        let mut mark = vec![false; self.len()];
        let mut stack: Vec<VarId> = vars.to_vec();
        while let Some(v) = stack.pop() {
            if mark[v.0] {
                continue;
            }
            mark[v.0] = true;
            stack.extend(self.parents[v.0].iter().copied());
        }
        self.order.iter().copied().filter(|v| mark[v.0]).collect()
    }
}

/// A set of classifier features, as a bitmask over positions in
/// [`Classifier::features`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSet(pub u64);

impl FeatureSet {
    pub const MAX_FEATURES: usize = 64;

    pub fn empty() -> Self {
        FeatureSet(0)
    }

    pub fn full(n: usize) -> Self {
        if n >= 64 {
            FeatureSet(u64::MAX)
        } else {
            FeatureSet((1u64 << n) - 1)
        }
    }

    pub fn from_positions<I: IntoIterator<Item = usize>>(positions: I) -> Self {
        FeatureSet(positions.into_iter().fold(0, |m, p| m | (1u64 << p)))
    }

    pub fn contains(self, pos: usize) -> bool {
        self.0 >> pos & 1 == 1
    }

    pub fn with(self, pos: usize) -> Self {
        FeatureSet(self.0 | (1u64 << pos))
    }

    pub fn without(self, pos: usize) -> Self {
        FeatureSet(self.0 & !(1u64 << pos))
    }

    pub fn union(self, other: Self) -> Self {
        FeatureSet(self.0 | other.0)
    }

    pub fn minus(self, other: Self) -> Self {
        FeatureSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Positions in increasing order.
    pub fn positions(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let p = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(p)
            }
        })
    }

    /// Every subset of `n` features, ordered by size and then
    /// lexicographically by position.
    pub fn all_by_size(n: usize) -> Vec<FeatureSet> {
        let mut out = Vec::new();
        for k in 0..=n {
            let mut combo: Vec<usize> = (0..k).collect();
            loop {
                out.push(FeatureSet::from_positions(combo.iter().copied()));
                if !next_combination(&mut combo, n) {
                    break;
                }
            }
        }
        out
    }
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    for i in (0..k).rev() {
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Which of the two class labels a classifier outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

/// A binary classifier `(C, F, T)`: decides positive iff
/// `Pr(C = positive | f) >= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub class_var: VarId,
    pub positive: usize,
    pub features: Vec<VarId>,
    pub threshold: f64,
}

impl Classifier {
    /// Resolves names against `net` and checks the classifier invariants.
    pub fn new(
        net: &BayesianNetwork,
        class_var: &str,
        positive: &str,
        features: &[&str],
        threshold: f64,
    ) -> Result<Self> {
        let class_id = net.var_id(class_var)?;
        let positive = net.value_index(class_id, positive)?;
        let features = features
            .iter()
            .map(|f| net.var_id(f))
            .collect::<Result<Vec<_>>>()?;
        Self::from_ids(net, class_id, positive, features, threshold)
    }

    pub fn from_ids(
        net: &BayesianNetwork,
        class_var: VarId,
        positive: usize,
        features: Vec<VarId>,
        threshold: f64,
    ) -> Result<Self> {
        if class_var.0 >= net.len() {
            return Err(Error::UnknownVariable(format!("#{}", class_var.0)));
        }
        let card = net.cardinality(class_var);
        if card != 2 {
            return Err(Error::NotBinaryClass {
                name: net.name(class_var).to_string(),
                cardinality: card,
            });
        }
        if positive >= 2 {
            return Err(Error::ValueOutOfRange {
                variable: net.name(class_var).to_string(),
                index: positive,
                cardinality: 2,
            });
        }
        if features.len() > FeatureSet::MAX_FEATURES {
            return Err(Error::InvalidClassifier(format!(
                "at most {} features are supported",
                FeatureSet::MAX_FEATURES
            )));
        }
        let mut seen = HashSet::new();
        for &f in &features {
            if f.0 >= net.len() {
                return Err(Error::UnknownVariable(format!("#{}", f.0)));
            }
            if f == class_var {
                return Err(Error::InvalidClassifier(format!(
                    "class variable {} listed as a feature",
                    net.name(f)
                )));
            }
            if !seen.insert(f) {
                return Err(Error::InvalidClassifier(format!(
                    "feature {} listed twice",
                    net.name(f)
                )));
            }
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidClassifier(format!(
                "threshold {threshold} outside [0,1]"
            )));
        }
        Ok(Self {
            class_var,
            positive,
            features,
            threshold,
        })
    }

    pub fn negative(&self) -> usize {
        1 - self.positive
    }

    pub fn all_features(&self) -> FeatureSet {
        FeatureSet::full(self.features.len())
    }

    /// Position of `var` among the features.
    pub fn position(&self, var: VarId) -> Option<usize> {
        self.features.iter().position(|&f| f == var)
    }

    /// Feature variables selected by `set`, in feature order.
    pub fn vars_of(&self, set: FeatureSet) -> Vec<VarId> {
        set.positions().map(|p| self.features[p]).collect()
    }

    /// Translates variables into a feature set, failing on non-features.
    pub fn set_of(&self, net: &BayesianNetwork, vars: &[VarId]) -> Result<FeatureSet> {
        let mut set = FeatureSet::empty();
        for &v in vars {
            let p = self
                .position(v)
                .ok_or_else(|| Error::FeatureNotInClassifier(net.name(v).to_string()))?;
            set = set.with(p);
        }
        Ok(set)
    }

    pub fn set_of_names(&self, net: &BayesianNetwork, names: &[&str]) -> Result<FeatureSet> {
        let vars = names
            .iter()
            .map(|n| net.var_id(n))
            .collect::<Result<Vec<_>>>()?;
        self.set_of(net, &vars)
    }

    /// The trimming `(C, kept, threshold)` of this classifier.
    pub fn trimmed(&self, kept: FeatureSet, threshold: f64) -> Classifier {
        Classifier {
            class_var: self.class_var,
            positive: self.positive,
            features: self.vars_of(kept),
            threshold,
        }
    }

    pub fn feature_names<'n>(&self, net: &'n BayesianNetwork, set: FeatureSet) -> Vec<&'n str> {
        set.positions().map(|p| net.name(self.features[p])).collect()
    }
}

/// Per-feature costs and a budget.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub cost: BTreeMap<VarId, f64>,
    pub budget: f64,
}

impl CostModel {
    /// Cost 1 for every feature of `clf`.
    pub fn unit(clf: &Classifier, budget: f64) -> Self {
        Self {
            cost: clf.features.iter().map(|&f| (f, 1.0)).collect(),
            budget,
        }
    }

    pub fn from_names(net: &BayesianNetwork, costs: &[(&str, f64)], budget: f64) -> Result<Self> {
        let mut cost = BTreeMap::new();
        for &(n, c) in costs {
            cost.insert(net.var_id(n)?, c);
        }
        Ok(Self { cost, budget })
    }

    /// Costs aligned with `clf.features`, after checking the invariants.
    pub fn feature_costs(&self, net: &BayesianNetwork, clf: &Classifier) -> Result<Vec<f64>> {
        if !(self.budget >= 0.0) {
            return Err(Error::NegativeBudget(self.budget));
        }
        clf.features
            .iter()
            .map(|&f| {
                let c = *self
                    .cost
                    .get(&f)
                    .ok_or_else(|| Error::MissingCost(net.name(f).to_string()))?;
                if !(c > 0.0) || !c.is_finite() {
                    return Err(Error::NonPositiveCost {
                        name: net.name(f).to_string(),
                        cost: c,
                    });
                }
                Ok(c)
            })
            .collect()
    }
}

/// Sum of costs of `set`, accumulated in position order.
pub fn subset_cost(costs: &[f64], set: FeatureSet) -> f64 {
    set.positions().map(|p| costs[p]).sum()
}

pub fn within_budget(costs: &[f64], set: FeatureSet, budget: f64) -> bool {
    subset_cost(costs, set) <= budget + BUDGET_TOLERANCE
}

/// True iff the class has no parents, every feature's only parent is the
/// class, and no feature is a parent of another classifier variable.
pub fn is_naive_bayes(net: &BayesianNetwork, clf: &Classifier) -> bool {
    if !net.parents(clf.class_var).is_empty() {
        return false;
    }
    let in_clf: HashSet<VarId> = clf
        .features
        .iter()
        .copied()
        .chain(std::iter::once(clf.class_var))
        .collect();
    clf.features.iter().all(|&f| {
        net.parents(f) == [clf.class_var] && !net.children(f).iter().any(|c| in_clf.contains(c))
    })
}

/// Whether `subset` and the remaining features are d-separated by the
/// class variable.
pub fn cond_independent_given_class(
    net: &BayesianNetwork,
    clf: &Classifier,
    subset: FeatureSet,
) -> Result<bool> {
    if !subset.is_subset_of(clf.all_features()) {
        return Err(Error::InvalidClassifier(format!(
            "feature set {:#x} is not within the {} classifier features",
            subset.0,
            clf.features.len()
        )));
    }
    let rest = clf.all_features().minus(subset);
    Ok(d_separated(
        net,
        &clf.vars_of(subset),
        &clf.vars_of(rest),
        &[clf.class_var],
    ))
}

/// d-separation of `xs` and `ys` given `given`, by reachability over
/// active trails. Empty `xs` or `ys` are trivially separated.
pub fn d_separated(net: &BayesianNetwork, xs: &[VarId], ys: &[VarId], given: &[VarId]) -> bool {
    if xs.is_empty() || ys.is_empty() {
        return true;
    }
    let n = net.len();
    let mut observed = vec![false; n];
    for z in given {
        observed[z.0] = true;
    }
    // nodes that are observed or have an observed descendant
    let mut anc_of_obs = vec![false; n];
    let mut stack: Vec<VarId> = given.to_vec();
    while let Some(v) = stack.pop() {
        if anc_of_obs[v.0] {
            continue;
        }
        anc_of_obs[v.0] = true;
        stack.extend(net.parents(v).iter().copied());
    }
    let targets: HashSet<VarId> = ys.iter().copied().collect();

    // (node, arrived_from_child)
    let mut visited = HashSet::new();
    let mut queue: VecDeque<(VarId, bool)> = xs.iter().map(|&x| (x, true)).collect();
    while let Some((v, up)) = queue.pop_front() {
        if !visited.insert((v, up)) {
            continue;
        }
        if !observed[v.0] && targets.contains(&v) {
            return false;
        }
        if up {
            if !observed[v.0] {
                for &p in net.parents(v) {
                    queue.push_back((p, true));
                }
                for &c in net.children(v) {
                    queue.push_back((c, false));
                }
            }
        } else {
            if !observed[v.0] {
                for &c in net.children(v) {
                    queue.push_back((c, false));
                }
            }
            if anc_of_obs[v.0] {
                for &p in net.parents(v) {
                    queue.push_back((p, true));
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn quiz_is_valid() {
        let net = fixtures::quiz();
        let report = validate_network(net.variables(), net.cpts());
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn bad_row_sum_is_reported() {
        let net = fixtures::quiz();
        let mut cpts = net.cpts().to_vec();
        let q1 = net.var_id("Q1").unwrap();
        cpts[q1.0].rows[0] = vec![0.9, 0.2];
        let report = validate_network(net.variables(), &cpts);
        assert_eq!(report.violations.len(), 1);
        assert!(report.to_string().contains("row sum 1.1"), "{report}");
    }

    #[test]
    fn mutual_parents_is_a_cycle() {
        let vars = vec![Variable::new("A", &["0", "1"]), Variable::new("B", &["0", "1"])];
        let cpts = vec![
            Cpt::new("A", &["B"], vec![vec![0.5, 0.5], vec![0.5, 0.5]]),
            Cpt::new("B", &["A"], vec![vec![0.5, 0.5], vec![0.5, 0.5]]),
        ];
        let report = validate_network(&vars, &cpts);
        assert!(matches!(report.violations.as_slice(), [Violation::Cycle(_)]));
        assert!(report.to_string().contains("cycle"));
    }

    #[test]
    fn shape_errors_are_reported() {
        let vars = vec![Variable::new("A", &["0", "1"]), Variable::new("B", &["x"])];
        let cpts = vec![
            Cpt::new("A", &["Z"], vec![vec![0.5, 0.5]]),
            Cpt::new("A", &[], vec![vec![0.5, 0.5], vec![0.5, 0.5]]),
        ];
        let report = validate_network(&vars, &cpts);
        let text = report.to_string();
        assert!(text.contains("unknown parent Z"), "{text}");
        assert!(text.contains("has 2 rows, expected 1"), "{text}");
        assert!(text.contains("more than one cpd for variable A"), "{text}");
        assert!(text.contains("no cpd for variable B"), "{text}");
        assert!(text.contains("has 1 values"), "{text}");
        assert!(validate_network(&[], &[]).to_string().contains("no variables"));
    }

    #[test]
    fn topological_order_puts_parents_first() {
        let net = fixtures::gbn4();
        let order = net.topological_order();
        let pos = |v: VarId| order.iter().position(|&o| o == v).unwrap();
        for v in order {
            for &p in net.parents(*v) {
                assert!(pos(p) < pos(*v));
            }
        }
    }

    #[test]
    fn naive_bayes_detection() {
        let net = fixtures::quiz();
        let clf = fixtures::quiz_classifier(&net);
        assert!(is_naive_bayes(&net, &clf));

        let g = fixtures::gbn4();
        let gc = fixtures::gbn4_classifier(&g);
        assert!(!is_naive_bayes(&g, &gc));

        let vars = vec![Variable::new("C", &["+", "-"]), Variable::new("F1", &["+", "-"])];
        let cpts = vec![
            Cpt::new("C", &[], vec![vec![0.3, 0.7]]),
            Cpt::new("F1", &["C"], vec![vec![0.8, 0.2], vec![0.1, 0.9]]),
        ];
        let single = BayesianNetwork::new(vars, cpts).unwrap();
        let sc = Classifier::new(&single, "C", "+", &["F1"], 0.5).unwrap();
        assert!(is_naive_bayes(&single, &sc));
    }

    #[test]
    fn conditional_independence_given_class() {
        let net = fixtures::quiz();
        let clf = fixtures::quiz_classifier(&net);
        let q3 = clf.set_of_names(&net, &["Q3"]).unwrap();
        assert!(cond_independent_given_class(&net, &clf, q3).unwrap());
        assert!(cond_independent_given_class(&net, &clf, clf.all_features()).unwrap());

        let g = fixtures::gbn4();
        let gc = fixtures::gbn4_classifier(&g);
        let f12 = gc.set_of_names(&g, &["F1", "F2"]).unwrap();
        assert!(!cond_independent_given_class(&g, &gc, f12).unwrap());
        assert!(cond_independent_given_class(&g, &gc, gc.all_features()).unwrap());
        assert!(cond_independent_given_class(&g, &gc, FeatureSet(1 << 5)).is_err());
    }

    #[test]
    fn collider_opens_only_when_observed() {
        // A -> C <- B
        let vars = vec![
            Variable::new("A", &["0", "1"]),
            Variable::new("B", &["0", "1"]),
            Variable::new("C", &["0", "1"]),
        ];
        let cpts = vec![
            Cpt::new("A", &[], vec![vec![0.5, 0.5]]),
            Cpt::new("B", &[], vec![vec![0.5, 0.5]]),
            Cpt::new("C", &["A", "B"], vec![vec![0.5, 0.5]; 4]),
        ];
        let net = BayesianNetwork::new(vars, cpts).unwrap();
        let (a, b, c) = (VarId(0), VarId(1), VarId(2));
        assert!(d_separated(&net, &[a], &[b], &[]));
        assert!(!d_separated(&net, &[a], &[b], &[c]));
        assert!(!d_separated(&net, &[a], &[c], &[]));
    }

    #[test]
    fn subsets_by_size_then_lex() {
        let all = FeatureSet::all_by_size(3);
        let listed: Vec<Vec<usize>> = all.iter().map(|s| s.positions().collect()).collect();
        assert_eq!(
            listed,
            vec![
                vec![],
                vec![0],
                vec![1],
                vec![2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2],
                vec![0, 1, 2]
            ]
        );
        assert_eq!(FeatureSet::all_by_size(0), vec![FeatureSet::empty()]);
    }

    #[test]
    fn cost_model_checks() {
        let net = fixtures::quiz();
        let clf = fixtures::quiz_classifier(&net);
        let costs = CostModel::from_names(&net, &[("Q1", 1.0), ("Q2", 1.0)], 2.0).unwrap();
        assert!(matches!(
            costs.feature_costs(&net, &clf),
            Err(Error::MissingCost(n)) if n == "Q3"
        ));
        let neg = CostModel::unit(&clf, -1.0);
        assert!(matches!(neg.feature_costs(&net, &clf), Err(Error::NegativeBudget(_))));
        let zero = CostModel::from_names(&net, &[("Q1", 0.0), ("Q2", 1.0), ("Q3", 1.0)], 1.0).unwrap();
        assert!(matches!(zero.feature_costs(&net, &clf), Err(Error::NonPositiveCost { .. })));
    }

    #[test]
    fn classifier_rejects_bad_inputs() {
        let net = fixtures::quiz();
        assert!(matches!(
            Classifier::new(&net, "C", "+", &["C"], 0.5),
            Err(Error::InvalidClassifier(_))
        ));
        assert!(matches!(
            Classifier::new(&net, "C", "+", &["Q9"], 0.5),
            Err(Error::UnknownVariable(_))
        ));
        assert!(Classifier::new(&net, "C", "+", &["Q1"], 1.5).is_err());
        let vars = vec![Variable::new("C", &["a", "b", "c"]), Variable::new("F", &["0", "1"])];
        let cpts = vec![
            Cpt::new("C", &[], vec![vec![0.2, 0.3, 0.5]]),
            Cpt::new("F", &["C"], vec![vec![0.5, 0.5]; 3]),
        ];
        let tri = BayesianNetwork::new(vars, cpts).unwrap();
        assert!(matches!(
            Classifier::new(&tri, "C", "a", &["F"], 0.5),
            Err(Error::NotBinaryClass { cardinality: 3, .. })
        ));
    }
}
