//! On-disk formats.
//!
//! Networks are JSON documents:
//!
//! ```json
//! {
//!   "variables": [{"name": "C", "values": ["+", "-"]}, ...],
//!   "cpds": [{"child": "Q1", "parents": ["C"], "rows": [[0.9, 0.1], [0.3, 0.7]]}, ...]
//! }
//! ```
//!
//! CPT rows follow the parent order with the last parent varying fastest.
//! Probabilities are written in their shortest round-trip decimal form.
//! Datasets are CSV files with a header row and value labels in the cells.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BayesianNetwork, Classifier, CostModel, Cpt, Variable};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    #[serde(default)]
    pub variables: Vec<Variable>,
    #[serde(default)]
    pub cpds: Vec<Cpt>,
}

impl From<&BayesianNetwork> for NetworkDocument {
    fn from(net: &BayesianNetwork) -> Self {
        Self {
            variables: net.variables().to_vec(),
            cpds: net.cpts().to_vec(),
        }
    }
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses and validates a network document. Blank input is an empty
/// document.
pub fn parse_network(text: &str) -> Result<BayesianNetwork> {
    let doc: NetworkDocument = if text.trim().is_empty() {
        NetworkDocument::default()
    } else {
        serde_json::from_str(text).map_err(parse_error)?
    };
    BayesianNetwork::new(doc.variables, doc.cpds)
}

/// Canonical pretty-printed document, LF line endings, trailing newline.
pub fn serialize_network(net: &BayesianNetwork) -> String {
    let mut out = serde_json::to_string_pretty(&NetworkDocument::from(net)).expect("network documents serialize");
    out.push('\n');
    out
}

/// Classifier and optional budget description.
///
/// `features` defaults to every variable other than the class, in network
/// order. Features without an entry in `costs` cost 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub class: String,
    pub positive: String,
    #[serde(default)]
    pub features: Option<Vec<String>>,
    pub threshold: f64,
    #[serde(default)]
    pub costs: BTreeMap<String, f64>,
    #[serde(default)]
    pub budget: Option<f64>,
}

impl TaskSpec {
    pub fn classifier(&self, net: &BayesianNetwork) -> Result<Classifier> {
        let class = net.var_id(&self.class)?;
        let names: Vec<&str> = match &self.features {
            Some(fs) => fs.iter().map(String::as_str).collect(),
            None => net
                .variables()
                .iter()
                .map(|v| v.name.as_str())
                .filter(|&n| n != self.class)
                .collect(),
        };
        let positive = net.value_index(class, &self.positive)?;
        let features = names.iter().map(|n| net.var_id(n)).collect::<Result<Vec<_>>>()?;
        Classifier::from_ids(net, class, positive, features, self.threshold)
    }

    /// Cost model over the classifier's features with the given budget.
    pub fn cost_model(&self, net: &BayesianNetwork, clf: &Classifier, budget: f64) -> Result<CostModel> {
        for name in self.costs.keys() {
            let id = net.var_id(name)?;
            if clf.position(id).is_none() {
                return Err(Error::FeatureNotInClassifier(name.clone()));
            }
        }
        let pairs: Vec<(&str, f64)> = clf
            .features
            .iter()
            .map(|&f| {
                let name = net.name(f);
                (name, self.costs.get(name).copied().unwrap_or(1.0))
            })
            .collect();
        CostModel::from_names(net, &pairs, budget)
    }
}

pub fn parse_task(text: &str) -> Result<TaskSpec> {
    serde_json::from_str(text).map_err(parse_error)
}

/// A table of discrete labels with a designated class column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub class_column: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn class_name(&self) -> &str {
        &self.columns[self.class_column]
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Every column except the class, in file order.
    pub fn feature_columns(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|&c| c != self.class_column).collect()
    }

    pub fn class_label(&self, row: usize) -> &str {
        &self.rows[row][self.class_column]
    }

    /// The rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            class_column: self.class_column,
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| Error::Dataset(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Dataset(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Dataset(e.to_string()))
    }
}

/// Reads a CSV dataset. Rows are reported by their line number in the
/// file, the header being line 1.
pub fn parse_dataset(text: &str, class_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Dataset(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if columns.iter().all(String::is_empty) {
        return Err(Error::Dataset("empty file".into()));
    }
    let class = columns
        .iter()
        .position(|c| c == class_column)
        .ok_or_else(|| Error::Dataset(format!("unknown class column {class_column:?}")))?;

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Dataset(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != columns.len() {
            return Err(Error::Dataset(format!(
                "ragged row {line}: {} cells under {} columns",
                record.len(),
                columns.len()
            )));
        }
        let row: Vec<String> = record.iter().map(|c| c.trim().to_string()).collect();
        if let Some(c) = row.iter().position(String::is_empty) {
            return Err(Error::Dataset(format!("missing value in row {line}, column {:?}", columns[c])));
        }
        rows.push(row);
    }
    Ok(Dataset {
        columns,
        rows,
        class_column: class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn quiz_round_trip() {
        let net = fixtures::quiz();
        let text = serialize_network(&net);
        let back = parse_network(&text).unwrap();
        assert_eq!(back, net);
        let c = back.var_id("C").unwrap();
        assert_eq!(back.cpt_entry(c, &[0, 0, 0, 0]), 0.1);
        let q1 = back.var_id("Q1").unwrap();
        assert_eq!(back.cpt_entry(q1, &[0, 0, 0, 0]), 0.9);
    }

    #[test]
    fn gbn4_keeps_parent_order() {
        let text = serialize_network(&fixtures::gbn4());
        let doc: NetworkDocument = serde_json::from_str(&text).unwrap();
        let f2 = doc.cpds.iter().find(|c| c.child == "F2").unwrap();
        assert_eq!(f2.parents, vec!["C", "F1"]);
        assert!(text.ends_with("}\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn thirds_survive() {
        let third = 1.0 / 3.0;
        let net = BayesianNetwork::new(
            vec![Variable::new("A", &["x", "y", "z"])],
            vec![Cpt::new("A", &[], vec![vec![third, third, 1.0 - 2.0 * third]])],
        )
        .unwrap();
        let text = serialize_network(&net);
        assert!(text.contains("0.3333333333333333"));
        assert_eq!(parse_network(&text).unwrap(), net);
    }

    #[test]
    fn empty_and_dangling_documents() {
        let e = parse_network("").unwrap_err().to_string();
        assert!(e.contains("no variables"), "{e}");
        let e = parse_network("{}").unwrap_err().to_string();
        assert!(e.contains("no variables"), "{e}");
        let doc = r#"{"variables":[{"name":"A","values":["a","b"]}],
                      "cpds":[{"child":"A","parents":["Ghost"],"rows":[[0.5,0.5]]}]}"#;
        let e = parse_network(doc).unwrap_err().to_string();
        assert!(e.contains("Ghost"), "{e}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_network("{\n  \"variables\": [,]\n}") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_network(r#"{"variabls": []}"#), Err(Error::Parse { .. })));
    }

    #[test]
    fn task_spec_resolves() {
        let net = fixtures::quiz();
        let task = parse_task(r#"{"class":"C","positive":"+","threshold":0.07,"costs":{"Q2":2.5}}"#).unwrap();
        let clf = task.classifier(&net).unwrap();
        assert_eq!(clf, fixtures::quiz_classifier(&net));
        let costs = task.cost_model(&net, &clf, 3.0).unwrap().feature_costs(&net, &clf).unwrap();
        assert_eq!(costs, vec![1.0, 2.5, 1.0]);
        let bad = parse_task(r#"{"class":"C","positive":"+","threshold":0.07,"features":["Q1"],"costs":{"Q2":1}}"#).unwrap();
        let clf = bad.classifier(&net).unwrap();
        assert!(matches!(bad.cost_model(&net, &clf, 1.0), Err(Error::FeatureNotInClassifier(_))));
    }

    #[test]
    fn datasets() {
        let d = parse_dataset("Q1,Q2,C\n+,+,+\n+,-,-\r\n-,-,-\n-,+,+\n", "C").unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.class_column, 2);
        assert_eq!(d.feature_columns(), vec![0, 1]);
        assert_eq!(d.class_label(1), "-");
        assert_eq!(parse_dataset(&d.to_csv().unwrap(), "C").unwrap(), d);

        let e = parse_dataset("Q1,Q2,C\n+,+\n", "C").unwrap_err().to_string();
        assert!(e.contains("ragged row 2"), "{e}");
        let e = parse_dataset("Q1,Q2\n+,+\n", "C").unwrap_err().to_string();
        assert!(e.contains("unknown class column"), "{e}");
        let e = parse_dataset("", "C").unwrap_err().to_string();
        assert!(e.contains("empty file"), "{e}");
        let e = parse_dataset("A,C\n+,\n", "C").unwrap_err().to_string();
        assert!(e.contains("missing value"), "{e}");
    }
}
