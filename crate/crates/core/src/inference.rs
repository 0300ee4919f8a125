//! Exact inference by enumeration.
//!
//! Queries sum the chain-rule product over the unassigned ancestors of the
//! assigned variables; every other variable is barren and sums to one.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{is_naive_bayes, BayesianNetwork, Classifier, Label, VarId};

/// Limit on the number of configurations any single enumeration may visit.
pub const ENUMERATION_LIMIT: u64 = 1 << 22;

/// A possibly partial assignment of value indices to variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<Option<usize>>,
}

impl Assignment {
    pub fn empty(net: &BayesianNetwork) -> Self {
        Self {
            values: vec![None; net.len()],
        }
    }

    /// Builds an assignment from `(variable, value label)` pairs.
    pub fn from_labels(net: &BayesianNetwork, pairs: &[(&str, &str)]) -> Result<Self> {
        let mut a = Self::empty(net);
        for &(name, label) in pairs {
            let var = net.var_id(name)?;
            let value = net.value_index(var, label)?;
            a.values[var.0] = Some(value);
        }
        Ok(a)
    }

    /// Dense constructor from a full vector of value indices.
    pub fn full(values: &[usize]) -> Self {
        Self {
            values: values.iter().map(|&v| Some(v)).collect(),
        }
    }

    pub fn set(&mut self, var: VarId, value: usize) {
        self.values[var.0] = Some(value);
    }

    pub fn with(mut self, var: VarId, value: usize) -> Self {
        self.set(var, value);
        self
    }

    pub fn unset(&mut self, var: VarId) {
        self.values[var.0] = None;
    }

    pub fn get(&self, var: VarId) -> Option<usize> {
        self.values.get(var.0).copied().flatten()
    }

    pub fn is_full(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn assigned(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (VarId(i), v)))
    }

    fn check(&self, net: &BayesianNetwork) -> Result<()> {
        if self.values.len() != net.len() {
            return Err(Error::InvalidEvidence(format!(
                "assignment covers {} variables, network has {}",
                self.values.len(),
                net.len()
            )));
        }
        for (var, value) in self.assigned() {
            let card = net.cardinality(var);
            if value >= card {
                return Err(Error::ValueOutOfRange {
                    variable: net.name(var).to_string(),
                    index: value,
                    cardinality: card,
                });
            }
        }
        Ok(())
    }
}

/// Summation plan for a fixed set of assigned variables: the ancestral
/// closure in topological order and the hidden variables to enumerate.
pub(crate) struct Marginalizer<'n> {
    net: &'n BayesianNetwork,
    involved: Vec<VarId>,
    hidden: Vec<VarId>,
}

impl<'n> Marginalizer<'n> {
    pub(crate) fn new(net: &'n BayesianNetwork, assigned: &[VarId]) -> Result<Self> {
        let involved = net.ancestral_set(assigned);
        let mut is_assigned = vec![false; net.len()];
        for v in assigned {
            is_assigned[v.0] = true;
        }
        let hidden: Vec<VarId> = involved
            .iter()
            .copied()
            .filter(|v| !is_assigned[v.0])
            .collect();
        let size: f64 = hidden.iter().map(|&h| net.cardinality(h) as f64).product();
        if size > ENUMERATION_LIMIT as f64 {
            return Err(Error::EnumerationGuard {
                size,
                limit: ENUMERATION_LIMIT,
            });
        }
        Ok(Self {
            net,
            involved,
            hidden,
        })
    }

    /// Sum over hidden completions of the product of involved CPT entries.
    /// `values` must hold the assigned values; hidden slots are scratch.
    pub(crate) fn eval(&self, values: &mut [usize]) -> f64 {
        for &h in &self.hidden {
            values[h.0] = 0;
        }
        let mut total = 0.0;
        loop {
            let mut p = 1.0;
            for &v in &self.involved {
                p *= self.net.cpt_entry(v, values);
                if p == 0.0 {
                    break;
                }
            }
            total += p;
            // odometer over hidden variables, last one fastest
            let mut k = self.hidden.len();
            loop {
                if k == 0 {
                    return total;
                }
                k -= 1;
                let h = self.hidden[k];
                values[h.0] += 1;
                if values[h.0] < self.net.cardinality(h) {
                    break;
                }
                values[h.0] = 0;
            }
        }
    }
}

fn dense(a: &Assignment) -> Vec<usize> {
    a.values.iter().map(|v| v.unwrap_or(0)).collect()
}

/// Chain-rule probability of a full assignment.
pub fn joint_prob(net: &BayesianNetwork, a: &Assignment) -> Result<f64> {
    a.check(net)?;
    if let Some(i) = a.values.iter().position(Option::is_none) {
        return Err(Error::PartialAssignment(net.name(VarId(i)).to_string()));
    }
    let values = dense(a);
    Ok(net
        .topological_order()
        .iter()
        .map(|&v| net.cpt_entry(v, &values))
        .product())
}

/// Probability of a partial assignment.
pub fn marginal(net: &BayesianNetwork, a: &Assignment) -> Result<f64> {
    a.check(net)?;
    let assigned: Vec<VarId> = a.assigned().map(|(v, _)| v).collect();
    let plan = Marginalizer::new(net, &assigned)?;
    Ok(plan.eval(&mut dense(a)))
}

/// `Pr(C = positive | a)`.
pub fn posterior_class(net: &BayesianNetwork, clf: &Classifier, a: &Assignment) -> Result<f64> {
    a.check(net)?;
    if a.get(clf.class_var).is_some() {
        return Err(Error::InvalidEvidence(format!(
            "evidence assigns the class variable {}",
            net.name(clf.class_var)
        )));
    }
    let mut assigned: Vec<VarId> = a.assigned().map(|(v, _)| v).collect();
    assigned.push(clf.class_var);
    let plan = Marginalizer::new(net, &assigned)?;
    let mut values = dense(a);
    values[clf.class_var.0] = clf.positive;
    let pos = plan.eval(&mut values);
    values[clf.class_var.0] = clf.negative();
    let neg = plan.eval(&mut values);
    let total = pos + neg;
    if total <= 0.0 {
        return Err(Error::ZeroProbabilityEvidence);
    }
    Ok(pos / total)
}

/// The classification function: positive iff the posterior reaches the
/// threshold. `a` must assign every feature of `clf`.
pub fn classify(net: &BayesianNetwork, clf: &Classifier, a: &Assignment) -> Result<Label> {
    if let Some(&f) = clf.features.iter().find(|&&f| a.get(f).is_none()) {
        return Err(Error::PartialAssignment(net.name(f).to_string()));
    }
    let p = posterior_class(net, clf, a)?;
    Ok(decide(p, clf.threshold))
}

#[inline]
pub(crate) fn decide(posterior: f64, threshold: f64) -> Label {
    if posterior >= threshold {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// `log(p / q)` with the limits made explicit: `±inf` when exactly one side
/// is zero and NaN when both are.
fn log_ratio(p: f64, q: f64) -> f64 {
    match (p == 0.0, q == 0.0) {
        (true, true) => f64::NAN,
        (true, false) => f64::NEG_INFINITY,
        (false, true) => f64::INFINITY,
        (false, false) => p.ln() - q.ln(),
    }
}

/// Naive Bayes classifier in the log-odds domain: the posterior log-odds of
/// an instance is the prior log-odds plus one weight per observed value.
#[derive(Debug, Clone, PartialEq)]
pub struct LogOddsModel {
    pub prior_log_odds: f64,
    /// `weights[j][v] = log Pr(F_j = v | c) - log Pr(F_j = v | not c)`,
    /// indexed by feature position then value.
    pub weights: Vec<Vec<f64>>,
    pub threshold_log_odds: f64,
    features: Vec<VarId>,
}

impl LogOddsModel {
    pub fn new(net: &BayesianNetwork, clf: &Classifier) -> Result<Self> {
        if !is_naive_bayes(net, clf) {
            return Err(Error::NotNaiveBayes);
        }
        let prior = &net.cpt(clf.class_var).rows[0];
        let prior_log_odds = log_ratio(prior[clf.positive], prior[clf.negative()]);
        let weights = clf
            .features
            .iter()
            .map(|&f| {
                let rows = &net.cpt(f).rows;
                (0..net.cardinality(f))
                    .map(|v| log_ratio(rows[clf.positive][v], rows[clf.negative()][v]))
                    .collect()
            })
            .collect();
        Ok(Self {
            prior_log_odds,
            weights,
            threshold_log_odds: log_ratio(clf.threshold, 1.0 - clf.threshold),
            features: clf.features.clone(),
        })
    }

    pub fn classify(&self, log_odds: f64) -> Label {
        if log_odds >= self.threshold_log_odds {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

/// Posterior log-odds of the positive class. Unassigned features are
/// marginalized out, which under naive Bayes means their weight is dropped.
/// NaN marks a zero-probability instance.
pub fn nb_log_odds(model: &LogOddsModel, a: &Assignment) -> f64 {
    let mut total = model.prior_log_odds;
    for (j, &f) in model.features.iter().enumerate() {
        if let Some(v) = a.get(f) {
            total += model.weights[j][v];
        }
    }
    total
}

/// Joint mass `Pr(c, f)` and `Pr(not c, f)` for every full instantiation
/// `f` of the classifier features, with the original decision cached.
///
/// Instances are indexed in mixed radix with feature 0 varying fastest.
#[derive(Debug, Clone)]
pub struct ClassJoint {
    pub(crate) cards: Vec<usize>,
    pub(crate) positive_mass: Vec<f64>,
    pub(crate) negative_mass: Vec<f64>,
    /// Whether the original classifier decides positive; false for
    /// zero-mass instances, which never contribute to a sum.
    pub(crate) decision: Vec<bool>,
}

impl ClassJoint {
    pub fn new(net: &BayesianNetwork, clf: &Classifier) -> Result<Self> {
        let cards: Vec<usize> = clf.features.iter().map(|&f| net.cardinality(f)).collect();
        let size: f64 = cards.iter().map(|&c| c as f64).product();
        if size > ENUMERATION_LIMIT as f64 {
            return Err(Error::EnumerationGuard {
                size,
                limit: ENUMERATION_LIMIT,
            });
        }
        let size = size as usize;
        let mut assigned = clf.features.clone();
        assigned.push(clf.class_var);
        let plan = Marginalizer::new(net, &assigned)?;

        let mut values = vec![0usize; net.len()];
        let mut digits = vec![0usize; cards.len()];
        let mut positive_mass = Vec::with_capacity(size);
        let mut negative_mass = Vec::with_capacity(size);
        let mut decision = Vec::with_capacity(size);
        for _ in 0..size {
            for (j, &f) in clf.features.iter().enumerate() {
                values[f.0] = digits[j];
            }
            values[clf.class_var.0] = clf.positive;
            let pos = plan.eval(&mut values);
            values[clf.class_var.0] = clf.negative();
            let neg = plan.eval(&mut values);
            let total = pos + neg;
            positive_mass.push(pos);
            negative_mass.push(neg);
            decision.push(total > 0.0 && pos / total >= clf.threshold);
            for (d, &c) in digits.iter_mut().zip(&cards) {
                *d += 1;
                if *d < c {
                    break;
                }
                *d = 0;
            }
        }
        Ok(Self {
            cards,
            positive_mass,
            negative_mass,
            decision,
        })
    }

    pub fn len(&self) -> usize {
        self.positive_mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positive_mass.is_empty()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    /// Value indices of instance `index`, per feature position.
    pub fn instance(&self, mut index: usize) -> Vec<usize> {
        self.cards
            .iter()
            .map(|&c| {
                let d = index % c;
                index /= c;
                d
            })
            .collect()
    }

    /// `Pr(f)` for instance `index`.
    pub fn mass(&self, index: usize) -> f64 {
        self.positive_mass[index] + self.negative_mass[index]
    }

    /// Whether the original classifier decides positive at `index`.
    pub fn decision(&self, index: usize) -> bool {
        self.decision[index]
    }
}

/// Draws one full assignment by ancestral sampling.
pub fn forward_sample<R: Rng>(net: &BayesianNetwork, rng: &mut R) -> Vec<usize> {
    let mut values = vec![0usize; net.len()];
    for &v in net.topological_order() {
        let card = net.cardinality(v);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = card - 1;
        for k in 0..card {
            values[v.0] = k;
            acc += net.cpt_entry(v, &values);
            if u < acc {
                chosen = k;
                break;
            }
        }
        values[v.0] = chosen;
    }
    values
}
