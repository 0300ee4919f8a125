//! Reference networks and seeded random classifiers.
//!
//! `quiz` is a three-question naive Bayes classifier; `gbn4` is a
//! four-variable network whose features are not independent given the
//! class. The random generators back the property tests, the acceptance
//! suite and the synthetic-data generator of the evaluation harness.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{BayesianNetwork, Classifier, CostModel, Cpt, VarId, Variable};

/// Naive Bayes quiz: class `C` (knows the subject) with prior 0.1 and three
/// answers `Q1..Q3`. Values are ordered `["+", "-"]`.
pub fn quiz() -> BayesianNetwork {
    let pm = &["+", "-"];
    let vars = vec![
        Variable::new("C", pm),
        Variable::new("Q1", pm),
        Variable::new("Q2", pm),
        Variable::new("Q3", pm),
    ];
    let cpts = vec![
        Cpt::new("C", &[], vec![vec![0.1, 0.9]]),
        Cpt::new("Q1", &["C"], vec![vec![0.9, 0.1], vec![0.3, 0.7]]),
        Cpt::new("Q2", &["C"], vec![vec![0.9, 0.1], vec![0.6, 0.4]]),
        Cpt::new("Q3", &["C"], vec![vec![0.4, 0.6], vec![0.2, 0.8]]),
    ];
    BayesianNetwork::new(vars, cpts).expect("quiz fixture is valid")
}

/// `(C, {Q1, Q2, Q3}, 0.07)` on [`quiz`].
pub fn quiz_classifier(net: &BayesianNetwork) -> Classifier {
    Classifier::new(net, "C", "+", &["Q1", "Q2", "Q3"], 0.07).expect("quiz classifier")
}

/// Four-node network with edges C→F2, C→F3, F1→F2, F2→F3.
pub fn gbn4() -> BayesianNetwork {
    let pm = &["+", "-"];
    let vars = vec![
        Variable::new("C", pm),
        Variable::new("F1", pm),
        Variable::new("F2", pm),
        Variable::new("F3", pm),
    ];
    let cpts = vec![
        Cpt::new("C", &[], vec![vec![0.6, 0.4]]),
        Cpt::new("F1", &[], vec![vec![0.9, 0.1]]),
        Cpt::new(
            "F2",
            &["C", "F1"],
            vec![
                vec![0.6, 0.4],
                vec![1.0, 0.0],
                vec![0.4, 0.6],
                vec![0.5, 0.5],
            ],
        ),
        Cpt::new(
            "F3",
            &["C", "F2"],
            vec![
                vec![0.4, 0.6],
                vec![1.0, 0.0],
                vec![1.0, 0.0],
                vec![0.4, 0.6],
            ],
        ),
    ];
    BayesianNetwork::new(vars, cpts).expect("gbn4 fixture is valid")
}

/// `(C, {F1, F2, F3}, 0.55)` on [`gbn4`].
pub fn gbn4_classifier(net: &BayesianNetwork) -> Classifier {
    Classifier::new(net, "C", "+", &["F1", "F2", "F3"], 0.55).expect("gbn4 classifier")
}

/// Knobs for the random generators.
#[derive(Debug, Clone)]
pub struct RandomSpec {
    pub n_features: usize,
    pub max_cardinality: usize,
    /// Maximum parents per variable in general DAGs.
    pub max_parents: usize,
    /// Probability that a CPT entry is forced to zero.
    pub zero_rate: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            n_features: 4,
            max_cardinality: 2,
            max_parents: 2,
            zero_rate: 0.0,
        }
    }
}

fn random_row<R: Rng>(rng: &mut R, width: usize, zero_rate: f64) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..width)
            .map(|_| {
                if zero_rate > 0.0 && rng.gen::<f64>() < zero_rate {
                    0.0
                } else {
                    rng.gen_range(0.02..1.0)
                }
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        if sum > 0.0 {
            return raw.into_iter().map(|x| x / sum).collect();
        }
    }
}

fn values(card: usize) -> Vec<String> {
    (0..card).map(|v| format!("v{v}")).collect()
}

fn cardinality<R: Rng>(rng: &mut R, max: usize) -> usize {
    rng.gen_range(2..=max.max(2))
}

/// Random naive Bayes classifier with a uniformly drawn threshold.
pub fn random_naive_bayes<R: Rng>(rng: &mut R, spec: &RandomSpec) -> (BayesianNetwork, Classifier) {
    let mut vars = vec![Variable {
        name: "C".into(),
        values: vec!["+".into(), "-".into()],
    }];
    let prior = rng.gen_range(0.05..0.95);
    let mut cpts = vec![Cpt::new("C", &[], vec![vec![prior, 1.0 - prior]])];
    for i in 0..spec.n_features {
        let name = format!("F{}", i + 1);
        let card = cardinality(rng, spec.max_cardinality);
        let rows = (0..2).map(|_| random_row(rng, card, spec.zero_rate)).collect();
        vars.push(Variable {
            name: name.clone(),
            values: values(card),
        });
        cpts.push(Cpt {
            child: name,
            parents: vec!["C".into()],
            rows,
        });
    }
    let net = BayesianNetwork::new(vars, cpts).expect("generated naive Bayes is valid");
    let features = (1..=spec.n_features).map(VarId).collect();
    let threshold = rng.gen_range(0.05..0.95);
    let clf = Classifier::from_ids(&net, VarId(0), 0, features, threshold).expect("classifier");
    (net, clf)
}

/// Random DAG over the class and the features. The class is placed at a
/// random position of a random topological order, so it may have parents.
pub fn random_dag<R: Rng>(rng: &mut R, spec: &RandomSpec) -> (BayesianNetwork, Classifier) {
    let n = spec.n_features + 1;
    let names: Vec<String> = std::iter::once("C".to_string())
        .chain((1..n).map(|i| format!("F{i}")))
        .collect();
    let cards: Vec<usize> = (0..n)
        .map(|i| if i == 0 { 2 } else { cardinality(rng, spec.max_cardinality) })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut cpts = Vec::with_capacity(n);
    for (k, &v) in order.iter().enumerate() {
        let mut candidates: Vec<usize> = order[..k].to_vec();
        candidates.shuffle(rng);
        let want = rng.gen_range(0..=spec.max_parents.min(candidates.len()));
        let mut parents: Vec<usize> = candidates.into_iter().take(want).collect();
        parents.sort_unstable();
        let rows_n: usize = parents.iter().map(|&p| cards[p]).product();
        let rows = (0..rows_n)
            .map(|_| random_row(rng, cards[v], spec.zero_rate))
            .collect();
        cpts.push(Cpt {
            child: names[v].clone(),
            parents: parents.iter().map(|&p| names[p].clone()).collect(),
            rows,
        });
    }
    let vars = (0..n)
        .map(|i| {
            if i == 0 {
                Variable {
                    name: "C".into(),
                    values: vec!["+".into(), "-".into()],
                }
            } else {
                Variable {
                    name: names[i].clone(),
                    values: values(cards[i]),
                }
            }
        })
        .collect();
    let net = BayesianNetwork::new(vars, cpts).expect("generated DAG is valid");
    let features = (1..n).map(VarId).collect();
    let threshold = rng.gen_range(0.05..0.95);
    let clf = Classifier::from_ids(&net, VarId(0), 0, features, threshold).expect("classifier");
    (net, clf)
}

/// Integer costs drawn from `1..=max_cost`.
pub fn random_costs<R: Rng>(rng: &mut R, clf: &Classifier, max_cost: u32, budget: f64) -> CostModel {
    CostModel {
        cost: clf
            .features
            .iter()
            .map(|&f| (f, rng.gen_range(1..=max_cost) as f64))
            .collect(),
        budget,
    }
}

/// A random classifier together with a cost model and a budget drawn
/// uniformly between 0 and the total cost.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub net: BayesianNetwork,
    pub clf: Classifier,
    pub costs: CostModel,
    pub naive_bayes: bool,
}

pub fn random_instance<R: Rng>(rng: &mut R, max_features: usize, max_cardinality: usize) -> RandomInstance {
    let spec = RandomSpec {
        n_features: rng.gen_range(1..=max_features),
        max_cardinality,
        max_parents: 2,
        zero_rate: 0.0,
    };
    let naive_bayes = rng.gen_bool(0.5);
    let (net, clf) = if naive_bayes {
        random_naive_bayes(rng, &spec)
    } else {
        random_dag(rng, &spec)
    };
    let mut costs = random_costs(rng, &clf, 3, 0.0);
    let total: f64 = costs.cost.values().sum();
    costs.budget = rng.gen_range(0..=total as u32) as f64;
    RandomInstance {
        net,
        clf,
        costs,
        naive_bayes,
    }
}
