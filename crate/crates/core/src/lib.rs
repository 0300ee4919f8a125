//! Budgeted trimming of Bayesian network classifiers.
//!
//! A classifier `(C, F, T)` decides the positive class whenever
//! `Pr(c | f) >= T`. Trimming keeps a subset `F' ⊆ F` whose observation cost
//! fits a budget and picks a new threshold `T'`, aiming for the largest
//! expected classification agreement with the original classifier.
//!
//! Modules, bottom-up:
//!
//! * [`model`]: networks, classifiers, feature sets, costs, d-separation.
//! * [`netio`]: JSON network documents and CSV datasets.
//! * [`inference`]: exact marginals and class posteriors.
//! * [`agreement`]: instance tables, agreement, and threshold sweeps.
//! * [`trimsearch`]: branch-and-bound and exhaustive trimming.
//! * [`baselines`]: information-gain selection and brute-force oracles.
//! * [`evalharness`]: learned classifiers, cross-validation, scatter output.

pub mod agreement;
pub mod baselines;
pub mod error;
pub mod evalharness;
pub mod fixtures;
pub mod inference;
pub mod model;
pub mod netio;
pub mod trimsearch;

pub use error::{Error, Result};
pub use model::{BayesianNetwork, Classifier, CostModel, Cpt, FeatureSet, Label, VarId, Variable};
