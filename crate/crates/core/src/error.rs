use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(ValidationReport),

    #[error("unknown variable {0:?}")]
    UnknownVariable(String),

    #[error("variable {variable:?} has no value {value:?}")]
    UnknownValue { variable: String, value: String },

    #[error("value index {index} out of range for {variable:?} (cardinality {cardinality})")]
    ValueOutOfRange {
        variable: String,
        index: usize,
        cardinality: usize,
    },

    #[error("class variable {name:?} must have exactly 2 values, found {cardinality}")]
    NotBinaryClass { name: String, cardinality: usize },

    #[error("invalid classifier: {0}")]
    InvalidClassifier(String),

    #[error("assignment does not cover variable {0:?}")]
    PartialAssignment(String),

    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),

    #[error("evidence has zero probability; class posterior is undefined")]
    ZeroProbabilityEvidence,

    #[error("feature {0:?} is not a feature of the original classifier")]
    FeatureNotInClassifier(String),

    #[error("feature sets overlap on {0:?}")]
    OverlappingSets(String),

    #[error("no cost given for feature {0:?}")]
    MissingCost(String),

    #[error("cost of feature {name:?} must be positive, got {cost}")]
    NonPositiveCost { name: String, cost: f64 },

    #[error("budget must be nonnegative, got {0}")]
    NegativeBudget(f64),

    #[error("enumeration of {size} configurations exceeds the limit of {limit}")]
    EnumerationGuard { size: f64, limit: u64 },

    #[error("classifier is not naive Bayes")]
    NotNaiveBayes,

    #[error("instance table is empty")]
    EmptyTable,

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}
