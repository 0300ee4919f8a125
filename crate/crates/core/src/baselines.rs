//! Information-gain feature selection and brute-force agreement oracles.
//!
//! The oracles sum directly over every full feature instantiation using
//! per-instance exact inference, sharing no code with the instance tables
//! of [`crate::agreement`].

use std::collections::HashMap;

use crate::agreement::{AgreementModel, POSTERIOR_TIE_TOLERANCE};
use crate::error::{Error, Result};
use crate::inference::{decide, marginal, posterior_class, Assignment};
use crate::model::{BayesianNetwork, Classifier, CostModel, FeatureSet, Label, VarId, BUDGET_TOLERANCE};

/// Largest number of full feature instantiations the oracles enumerate.
pub const BRUTEFORCE_LIMIT: u64 = 1 << 20;

/// Mutual information `I(C; F)` in bits for each feature, in feature order,
/// computed from the network distribution.
pub fn info_gain(net: &BayesianNetwork, clf: &Classifier) -> Result<Vec<f64>> {
    clf.features
        .iter()
        .map(|&f| {
            let card = net.cardinality(f);
            let mut joint = vec![[0.0f64; 2]; card];
            for (v, cell) in joint.iter_mut().enumerate() {
                for (c, slot) in cell.iter_mut().enumerate() {
                    let a = Assignment::empty(net).with(clf.class_var, c).with(f, v);
                    *slot = marginal(net, &a)?;
                }
            }
            let class: [f64; 2] = [
                joint.iter().map(|r| r[0]).sum(),
                joint.iter().map(|r| r[1]).sum(),
            ];
            let mut mi = 0.0;
            for row in &joint {
                let pf = row[0] + row[1];
                for c in 0..2 {
                    if row[c] > 0.0 {
                        mi += row[c] * (row[c] / (class[c] * pf)).log2();
                    }
                }
            }
            Ok(mi.max(0.0))
        })
        .collect()
}

/// Greedy selection by descending score, skipping features that no longer
/// fit. Equal scores keep input order.
pub fn ig_select(scores: &[f64], costs: &[f64], budget: f64) -> FeatureSet {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut left = budget;
    let mut chosen = FeatureSet::empty();
    for p in order {
        if costs[p] <= left + BUDGET_TOLERANCE {
            chosen = chosen.with(p);
            left -= costs[p];
        }
    }
    chosen
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub method: String,
    pub features: FeatureSet,
    pub names: Vec<String>,
    pub threshold: f64,
    pub eca: f64,
    /// Per-feature selection scores, in feature order.
    pub scores: Vec<f64>,
}

/// Information-gain baseline. Reports agreement at the original threshold,
/// or at the subset's best threshold when `reoptimize` is set.
pub fn ig_baseline(net: &BayesianNetwork, clf: &Classifier, costs: &CostModel, reoptimize: bool) -> Result<SelectionReport> {
    let feature_costs = costs.feature_costs(net, clf)?;
    let scores = info_gain(net, clf)?;
    let features = ig_select(&scores, &feature_costs, costs.budget);
    let model = AgreementModel::new(net, clf)?;
    let (threshold, eca) = if reoptimize {
        let m = model.maa(features)?;
        (m.interval.representative, m.score)
    } else {
        (clf.threshold, model.eca_with(features, clf.threshold)?)
    };
    Ok(SelectionReport {
        method: if reoptimize { "info-gain-maa" } else { "info-gain" }.into(),
        features,
        names: clf.feature_names(net, features).into_iter().map(String::from).collect(),
        threshold,
        eca,
        scores,
    })
}

/// Per-instance data of the literal agreement sum.
struct Enumerated {
    mass: Vec<f64>,
    original: Vec<Label>,
    /// Posterior of the trimming's projection of each instance.
    projected: Vec<f64>,
}

fn enumerate(net: &BayesianNetwork, alpha: &Classifier, kept: &[VarId]) -> Result<Enumerated> {
    for v in kept {
        if alpha.position(*v).is_none() {
            return Err(Error::FeatureNotInClassifier(net.name(*v).to_string()));
        }
    }
    let size: f64 = alpha.features.iter().map(|&f| net.cardinality(f) as f64).product();
    if size > BRUTEFORCE_LIMIT as f64 {
        return Err(Error::EnumerationGuard {
            size,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    let mut out = Enumerated {
        mass: Vec::new(),
        original: Vec::new(),
        projected: Vec::new(),
    };
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut values = vec![0usize; alpha.features.len()];
    loop {
        let mut full = Assignment::empty(net);
        for (&f, &v) in alpha.features.iter().zip(&values) {
            full.set(f, v);
        }
        let mass = marginal(net, &full)?;
        if mass > 0.0 {
            let original = decide(posterior_class(net, alpha, &full)?, alpha.threshold);
            let key: Vec<usize> = kept.iter().map(|&v| full.get(v).expect("assigned")).collect();
            let projected = match cache.get(&key) {
                Some(&p) => p,
                None => {
                    let mut part = Assignment::empty(net);
                    for (&v, &x) in kept.iter().zip(&key) {
                        part.set(v, x);
                    }
                    let p = posterior_class(net, alpha, &part)?;
                    cache.insert(key, p);
                    p
                }
            };
            out.mass.push(mass);
            out.original.push(original);
            out.projected.push(projected);
        }
        let mut i = values.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            values[i] += 1;
            if values[i] < net.cardinality(alpha.features[i]) {
                break;
            }
            values[i] = 0;
        }
    }
}

impl Enumerated {
    fn agreement(&self, threshold: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.mass.len() {
            if self.original[i] == decide(self.projected[i], threshold) {
                total += self.mass[i];
            }
        }
        total
    }
}

/// Agreement between `alpha` and its trimming `beta`, summed over every
/// full feature instantiation.
pub fn eca_bruteforce(net: &BayesianNetwork, alpha: &Classifier, beta: &Classifier) -> Result<f64> {
    if beta.class_var != alpha.class_var || beta.positive != alpha.positive {
        return Err(Error::InvalidClassifier(
            "trimming must use the same class variable and positive value".into(),
        ));
    }
    Ok(enumerate(net, alpha, &beta.features)?.agreement(beta.threshold))
}

/// Best agreement over the candidate thresholds: every distinct projected
/// posterior, then `+inf` (all negative). Returns the first maximizer.
/// Posteriors within [`POSTERIOR_TIE_TOLERANCE`] of each other count as
/// one.
pub fn maa_bruteforce(net: &BayesianNetwork, alpha: &Classifier, kept: &[VarId]) -> Result<(f64, f64)> {
    let data = enumerate(net, alpha, kept)?;
    let mut posteriors = data.projected.clone();
    posteriors.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    // posteriors equal up to rounding form one candidate at their minimum
    let mut candidates: Vec<f64> = Vec::new();
    for p in posteriors {
        match candidates.last() {
            Some(&c) if (p - c).abs() <= POSTERIOR_TIE_TOLERANCE * p.abs().max(c.abs()) => {}
            _ => candidates.push(p),
        }
    }
    candidates.push(f64::INFINITY);
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for t in candidates {
        let score = data.agreement(t);
        if score > best.0 {
            best = (score, t);
        }
    }
    Ok(best)
}
