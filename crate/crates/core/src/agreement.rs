//! Agreement between a classifier and its trimmings.
//!
//! Everything here is driven by the instance table of a kept feature set
//! `F'`: for each instantiation `f'` its marginal `Pr(f')`, its class
//! posterior `Pr(c | f')`, and the probability that the original classifier
//! decides positive once the dropped features are observed. From those three
//! columns follow the expected classification agreement of any threshold,
//! the maximum potential agreement, and the best threshold interval.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::inference::{decide, marginal, posterior_class, Assignment, ClassJoint, Marginalizer, ENUMERATION_LIMIT};
use crate::model::{BayesianNetwork, Classifier, FeatureSet, VarId};

/// Relative tolerance under which two posteriors share a cutoff.
pub const POSTERIOR_TIE_TOLERANCE: f64 = 1e-9;

/// One instantiation of the kept features.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRow {
    /// Value index of each kept feature, in feature order.
    pub values: Vec<usize>,
    /// `Pr(f')`.
    pub marginal: f64,
    /// `Pr(c | f')`.
    pub posterior: f64,
    /// Probability that the original classifier decides positive given
    /// `f'`, averaged over the dropped features.
    pub positive: f64,
}

impl InstanceRow {
    /// Mass on which the original classifier decides positive.
    pub fn positive_mass(&self) -> f64 {
        self.positive * self.marginal
    }

    pub fn negative_mass(&self) -> f64 {
        (1.0 - self.positive) * self.marginal
    }
}

/// Instance rows of a kept feature set, sorted by nondecreasing posterior.
/// Zero-mass instantiations are left out.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTable {
    pub kept: FeatureSet,
    pub rows: Vec<InstanceRow>,
}

impl InstanceTable {
    /// Expected agreement of the trimming that keeps these features with
    /// the given threshold.
    pub fn agreement_at(&self, threshold: f64) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                if r.posterior >= threshold {
                    r.positive_mass()
                } else {
                    r.negative_mass()
                }
            })
            .sum()
    }

    /// Maximum potential agreement: each instantiation takes whichever
    /// decision the original classifier favors.
    pub fn mpa(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.positive.max(1.0 - r.positive) * r.marginal)
            .sum()
    }
}

/// Thresholds `t` with `lo < t <= hi`. `lo = -inf` marks the interval that
/// classifies everything positive, `hi = +inf` the one that classifies
/// everything negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdInterval {
    pub lo: f64,
    pub hi: f64,
    pub representative: f64,
}

impl ThresholdInterval {
    pub fn contains(&self, t: f64) -> bool {
        self.lo < t && t <= self.hi
    }

    pub fn all_negative(&self) -> bool {
        self.hi == f64::INFINITY
    }
}

/// Maximum achievable agreement of a kept feature set and the threshold
/// interval attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maa {
    pub score: f64,
    pub interval: ThresholdInterval,
}

fn same_posterior(a: f64, b: f64) -> bool {
    (a - b).abs() <= POSTERIOR_TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Sweeps the threshold upward through the sorted posteriors and keeps the
/// best agreement. Equal scores keep the lowest interval.
pub fn compute_maa(table: &InstanceTable) -> Result<Maa> {
    let rows = &table.rows;
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    // [start, end) of each run of equal posteriors
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=rows.len() {
        if i == rows.len() || !same_posterior(rows[start].posterior, rows[i].posterior) {
            groups.push((start, i));
            start = i;
        }
    }

    let mut m: f64 = rows.iter().map(InstanceRow::positive_mass).sum();
    let mut best = m;
    let first = rows[0].posterior;
    let mut interval = ThresholdInterval {
        lo: f64::NEG_INFINITY,
        hi: first,
        representative: first,
    };
    for (g, &(s, e)) in groups.iter().enumerate() {
        for r in &rows[s..e] {
            m -= r.marginal * (2.0 * r.positive - 1.0);
        }
        if m > best {
            best = m;
            let lo = rows[e - 1].posterior;
            interval = match groups.get(g + 1) {
                Some(&(next, _)) => {
                    let hi = rows[next].posterior;
                    ThresholdInterval {
                        lo,
                        hi,
                        representative: hi,
                    }
                }
                None => ThresholdInterval {
                    lo,
                    hi: f64::INFINITY,
                    representative: if lo < 1.0 { 1.0 } else { lo + 1.0 },
                },
            };
        }
    }
    Ok(Maa {
        score: best,
        interval,
    })
}

/// Per-classifier cache: the class joint over all features, from which the
/// instance table of any kept subset is one pass away.
#[derive(Debug, Clone)]
pub struct AgreementModel<'n> {
    net: &'n BayesianNetwork,
    clf: Classifier,
    joint: ClassJoint,
}

impl<'n> AgreementModel<'n> {
    pub fn new(net: &'n BayesianNetwork, clf: &Classifier) -> Result<Self> {
        Ok(Self {
            net,
            clf: clf.clone(),
            joint: ClassJoint::new(net, clf)?,
        })
    }

    pub fn network(&self) -> &'n BayesianNetwork {
        self.net
    }

    pub fn classifier(&self) -> &Classifier {
        &self.clf
    }

    pub fn joint(&self) -> &ClassJoint {
        &self.joint
    }

    fn check_kept(&self, kept: FeatureSet) -> Result<()> {
        if kept.is_subset_of(self.clf.all_features()) {
            Ok(())
        } else {
            Err(Error::InvalidClassifier(format!(
                "feature set {:#x} is not within the {} classifier features",
                kept.0,
                self.clf.features.len()
            )))
        }
    }

    /// Instance rows in mixed-radix order of the kept features.
    pub fn rows(&self, kept: FeatureSet) -> Result<Vec<InstanceRow>> {
        self.check_kept(kept)?;
        let cards = &self.joint.cards;
        let kept_pos: Vec<usize> = kept.positions().collect();
        let mut kstride = vec![0usize; cards.len()];
        let mut size = 1usize;
        for &p in &kept_pos {
            kstride[p] = size;
            size *= cards[p];
        }
        let mut pos = vec![0.0; size];
        let mut neg = vec![0.0; size];
        let mut agree = vec![0.0; size];

        let mut digits = vec![0usize; cards.len()];
        let mut key = 0usize;
        for i in 0..self.joint.len() {
            let p = self.joint.positive_mass[i];
            let n = self.joint.negative_mass[i];
            pos[key] += p;
            neg[key] += n;
            if self.joint.decision[i] {
                agree[key] += p + n;
            }
            for j in 0..cards.len() {
                digits[j] += 1;
                key += kstride[j];
                if digits[j] < cards[j] {
                    break;
                }
                key -= kstride[j] * cards[j];
                digits[j] = 0;
            }
        }

        let mut rows = Vec::with_capacity(size);
        for k in 0..size {
            let mass = pos[k] + neg[k];
            if mass <= 0.0 {
                continue;
            }
            let mut rest = k;
            let values = kept_pos
                .iter()
                .map(|&p| {
                    let d = rest % cards[p];
                    rest /= cards[p];
                    d
                })
                .collect();
            rows.push(InstanceRow {
                values,
                marginal: mass,
                posterior: pos[k] / mass,
                positive: (agree[k] / mass).min(1.0),
            });
        }
        Ok(rows)
    }

    pub fn instance_table(&self, kept: FeatureSet) -> Result<InstanceTable> {
        let mut rows = self.rows(kept)?;
        rows.sort_by(|a, b| a.posterior.partial_cmp(&b.posterior).unwrap_or(Ordering::Equal));
        Ok(InstanceTable { kept, rows })
    }

    pub fn mpa(&self, kept: FeatureSet) -> Result<f64> {
        Ok(self
            .rows(kept)?
            .iter()
            .map(|r| r.positive.max(1.0 - r.positive) * r.marginal)
            .sum())
    }

    pub fn maa(&self, kept: FeatureSet) -> Result<Maa> {
        compute_maa(&self.instance_table(kept)?)
    }

    /// Agreement with the trimming `(C, kept, threshold)`.
    pub fn eca_with(&self, kept: FeatureSet, threshold: f64) -> Result<f64> {
        Ok(InstanceTable {
            kept,
            rows: self.rows(kept)?,
        }
        .agreement_at(threshold))
    }

    pub fn eca(&self, beta: &Classifier) -> Result<f64> {
        let kept = trimming_set(self.net, &self.clf, beta)?;
        self.eca_with(kept, beta.threshold)
    }
}

/// Checks that `beta` is a trimming of `alpha` and returns its features as
/// a subset of `alpha`'s.
pub fn trimming_set(net: &BayesianNetwork, alpha: &Classifier, beta: &Classifier) -> Result<FeatureSet> {
    if beta.class_var != alpha.class_var || beta.positive != alpha.positive {
        return Err(Error::InvalidClassifier(
            "trimming must use the same class variable and positive value".into(),
        ));
    }
    alpha.set_of(net, &beta.features)
}

pub fn build_instance_table(net: &BayesianNetwork, clf: &Classifier, kept: FeatureSet) -> Result<InstanceTable> {
    AgreementModel::new(net, clf)?.instance_table(kept)
}

/// Expected classification agreement between `alpha` and its trimming
/// `beta`.
pub fn eca(net: &BayesianNetwork, alpha: &Classifier, beta: &Classifier) -> Result<f64> {
    trimming_set(net, alpha, beta)?;
    AgreementModel::new(net, alpha)?.eca(beta)
}

pub fn mpa(net: &BayesianNetwork, clf: &Classifier, kept: FeatureSet) -> Result<f64> {
    AgreementModel::new(net, clf)?.mpa(kept)
}

pub fn maa(net: &BayesianNetwork, clf: &Classifier, kept: FeatureSet) -> Result<Maa> {
    AgreementModel::new(net, clf)?.maa(kept)
}

fn configurations(net: &BayesianNetwork, vars: &[VarId]) -> Result<usize> {
    let size: f64 = vars.iter().map(|&v| net.cardinality(v) as f64).product();
    if size > ENUMERATION_LIMIT as f64 {
        return Err(Error::EnumerationGuard {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(size as usize)
}

/// Advances `values` over the configurations of `vars`, last fastest.
/// Returns false after the final configuration.
fn advance(net: &BayesianNetwork, vars: &[VarId], values: &mut [usize]) -> bool {
    for &v in vars.iter().rev() {
        values[v.0] += 1;
        if values[v.0] < net.cardinality(v) {
            return true;
        }
        values[v.0] = 0;
    }
    false
}

fn check_disjoint(net: &BayesianNetwork, a: &[VarId], b: &[VarId]) -> Result<()> {
    match a.iter().find(|v| b.contains(v)) {
        Some(&v) => Err(Error::OverlappingSets(net.name(v).to_string())),
        None => Ok(()),
    }
}

/// Same-decision probability: the chance that observing `x` on top of the
/// evidence `e` leaves the decision of `clf` unchanged.
pub fn sdp(net: &BayesianNetwork, clf: &Classifier, x: &[VarId], e: &Assignment) -> Result<f64> {
    let observed: Vec<VarId> = e.assigned().map(|(v, _)| v).collect();
    for v in x.iter().chain(&observed) {
        if clf.position(*v).is_none() {
            return Err(Error::FeatureNotInClassifier(net.name(*v).to_string()));
        }
    }
    check_disjoint(net, x, &observed)?;
    let base = decide(posterior_class(net, clf, e)?, clf.threshold);
    let evidence_mass = marginal(net, e)?;
    configurations(net, x)?;

    let mut a = e.clone();
    for &v in x {
        a.set(v, 0);
    }
    let mut values: Vec<usize> = vec![0; net.len()];
    let mut same = 0.0;
    loop {
        for &v in x {
            a.set(v, values[v.0]);
        }
        let mass = marginal(net, &a)?;
        if mass > 0.0 && decide(posterior_class(net, clf, &a)?, clf.threshold) == base {
            same += mass;
        }
        if !advance(net, x, &mut values) {
            break;
        }
    }
    Ok(same / evidence_mass)
}

/// Expected same-decision probability with two thresholds: the expected
/// agreement, given `e`, between deciding on `y z e` with the classifier's
/// own threshold and deciding on `y e` alone with `t_prime`.
pub fn esdp_two_threshold(
    net: &BayesianNetwork,
    clf: &Classifier,
    t_prime: f64,
    z: &[VarId],
    y: &[VarId],
    e: &Assignment,
) -> Result<f64> {
    check_disjoint(net, z, y)?;
    let observed: Vec<VarId> = e.assigned().map(|(v, _)| v).collect();
    check_disjoint(net, z, &observed)?;
    check_disjoint(net, y, &observed)?;
    for v in z.iter().chain(y) {
        if *v == clf.class_var {
            return Err(Error::InvalidEvidence(format!(
                "class variable {} cannot be summed over",
                net.name(*v)
            )));
        }
    }
    let evidence_mass = marginal(net, e)?;
    if evidence_mass <= 0.0 {
        return Err(Error::ZeroProbabilityEvidence);
    }
    configurations(net, y)?;
    let nz = configurations(net, z)?;

    let mut assigned: Vec<VarId> = observed.clone();
    assigned.extend_from_slice(y);
    assigned.extend_from_slice(z);
    assigned.push(clf.class_var);
    let plan = Marginalizer::new(net, &assigned)?;

    let mut values: Vec<usize> = (0..net.len()).map(|i| e.get(VarId(i)).unwrap_or(0)).collect();
    for &v in y.iter().chain(z) {
        values[v.0] = 0;
    }
    let mut masses = Vec::with_capacity(nz);
    let mut total = 0.0;
    loop {
        masses.clear();
        let (mut pos_y, mut all_y) = (0.0, 0.0);
        loop {
            values[clf.class_var.0] = clf.positive;
            let p = plan.eval(&mut values);
            values[clf.class_var.0] = clf.negative();
            let n = plan.eval(&mut values);
            masses.push((p, n));
            pos_y += p;
            all_y += p + n;
            if !advance(net, z, &mut values) {
                break;
            }
        }
        if all_y > 0.0 {
            let trimmed = decide(pos_y / all_y, t_prime);
            for &(p, n) in &masses {
                let mass = p + n;
                if mass > 0.0 && decide(p / mass, clf.threshold) == trimmed {
                    total += mass;
                }
            }
        }
        if !advance(net, y, &mut values) {
            break;
        }
    }
    Ok(total / evidence_mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn quiz() -> (BayesianNetwork, Classifier) {
        let net = fixtures::quiz();
        let clf = fixtures::quiz_classifier(&net);
        (net, clf)
    }

    #[test]
    fn quiz_q3_table() {
        let (net, clf) = quiz();
        let kept = clf.set_of_names(&net, &["Q3"]).unwrap();
        let table = build_instance_table(&net, &clf, kept).unwrap();
        assert_eq!(table.rows.len(), 2);
        // sorted: Q3 = - first
        let neg = &table.rows[0];
        let pos = &table.rows[1];
        assert_eq!(neg.values, vec![1]);
        assert!(close(neg.marginal, 0.78, 1e-12));
        assert!(close(neg.posterior, 0.06 / 0.78, 1e-12));
        assert!(close(neg.positive, 0.1782 / 0.78, 1e-12));
        assert!(close(pos.marginal, 0.22, 1e-12));
        assert!(close(pos.posterior, 0.04 / 0.22, 1e-12));
        assert!(close(pos.positive, 0.09 / 0.22, 1e-12));
        assert!(close(table.mpa(), 0.7318, 1e-12));
    }

    #[test]
    fn full_feature_table_is_an_indicator() {
        let (net, clf) = quiz();
        let table = build_instance_table(&net, &clf, clf.all_features()).unwrap();
        assert_eq!(table.rows.len(), 8);
        assert!(table.rows.iter().all(|r| r.positive == 0.0 || r.positive == 1.0));
        assert!(close(mpa(&net, &clf, clf.all_features()).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn gbn4_table_columns() {
        let net = fixtures::gbn4();
        let clf = fixtures::gbn4_classifier(&net);
        let kept = clf.set_of_names(&net, &["F1", "F2"]).unwrap();
        let table = build_instance_table(&net, &clf, kept).unwrap();
        let cols: Vec<(f64, f64, f64)> = table
            .rows
            .iter()
            .map(|r| (r.posterior, r.positive_mass(), r.negative_mass()))
            .collect();
        let expected = [
            (0.0, 0.0, 0.02),
            (0.5, 0.3024, 0.1296),
            (0.324 / 0.468, 0.1944, 0.2736),
            (0.75, 0.036, 0.044),
        ];
        for (got, want) in cols.iter().zip(expected) {
            assert!(close(got.0, want.0, 1e-12), "{got:?} vs {want:?}");
            assert!(close(got.1, want.1, 1e-12), "{got:?} vs {want:?}");
            assert!(close(got.2, want.2, 1e-12), "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn eca_examples() {
        let (net, clf) = quiz();
        let b13 = Classifier::new(&net, "C", "+", &["Q1", "Q3"], 0.10).unwrap();
        assert!(close(eca(&net, &clf, &b13).unwrap(), 0.9082, 1e-12));
        assert!(close(eca(&net, &clf, &clf).unwrap(), 1.0, 1e-12));
        let b3 = Classifier::new(&net, "C", "+", &["Q3"], 0.15).unwrap();
        assert!(close(eca(&net, &clf, &b3).unwrap(), 0.6918, 1e-12));
        let b23 = Classifier::new(&net, "C", "+", &["Q2", "Q3"], 0.30).unwrap();
        assert!(close(eca(&net, &clf, &b23).unwrap(), 0.7318, 1e-12));
    }

    #[test]
    fn eca_rejects_non_trimmings() {
        let (net, clf) = quiz();
        let small = Classifier::new(&net, "C", "+", &["Q1"], 0.07).unwrap();
        let wider = Classifier::new(&net, "C", "+", &["Q1", "Q2"], 0.07).unwrap();
        assert!(matches!(
            eca(&net, &small, &wider),
            Err(Error::FeatureNotInClassifier(n)) if n == "Q2"
        ));
        let flipped = Classifier::new(&net, "C", "-", &["Q1"], 0.07).unwrap();
        assert!(eca(&net, &clf, &flipped).is_err());
    }

    #[test]
    fn sdp_examples() {
        let (net, clf) = quiz();
        let x = [net.var_id("Q1").unwrap(), net.var_id("Q2").unwrap()];
        let e = Assignment::from_labels(&net, &[("Q3", "+")]).unwrap();
        assert!(close(sdp(&net, &clf, &x, &e).unwrap(), 0.09 / 0.22, 1e-12));
        assert!(close(sdp(&net, &clf, &[], &e).unwrap(), 1.0, 1e-15));
        let mut zero = clf.clone();
        zero.threshold = 0.0;
        assert!(close(sdp(&net, &zero, &x, &e).unwrap(), 1.0, 1e-12));
        assert!(matches!(
            sdp(&net, &clf, &[net.var_id("Q3").unwrap()], &e),
            Err(Error::OverlappingSets(_))
        ));
    }

    #[test]
    fn esdp_examples() {
        let (net, clf) = quiz();
        let id = |n: &str| net.var_id(n).unwrap();
        let e = Assignment::empty(&net);
        let all = [id("Q1"), id("Q2"), id("Q3")];
        assert!(close(esdp_two_threshold(&net, &clf, clf.threshold, &[], &all, &e).unwrap(), 1.0, 1e-12));
        let v = esdp_two_threshold(&net, &clf, 0.15, &[id("Q1"), id("Q2")], &[id("Q3")], &e).unwrap();
        assert!(close(v, 0.6918, 1e-12));
        let v = esdp_two_threshold(&net, &clf, 0.10, &[id("Q2")], &[id("Q1"), id("Q3")], &e).unwrap();
        assert!(close(v, 0.9082, 1e-12));
        assert!(matches!(
            esdp_two_threshold(&net, &clf, 0.1, &[id("Q2")], &[id("Q2")], &e),
            Err(Error::OverlappingSets(_))
        ));
    }

    #[test]
    fn mpa_examples() {
        let (net, clf) = quiz();
        let q3 = clf.set_of_names(&net, &["Q3"]).unwrap();
        assert!(close(mpa(&net, &clf, q3).unwrap(), 0.7318, 1e-12));
        assert!(close(mpa(&net, &clf, FeatureSet::empty()).unwrap(), 0.7318, 1e-12));
        assert!(close(mpa(&net, &clf, clf.all_features()).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn compute_maa_examples() {
        let net = fixtures::gbn4();
        let clf = fixtures::gbn4_classifier(&net);
        let kept = clf.set_of_names(&net, &["F1", "F2"]).unwrap();
        let m = maa(&net, &clf, kept).unwrap();
        assert!(close(m.score, 0.5528, 1e-12));
        assert!(close(m.interval.lo, 0.0, 1e-12));
        assert!(close(m.interval.hi, 0.5, 1e-12));

        let (qn, qc) = quiz();
        let m = maa(&qn, &qc, qc.set_of_names(&qn, &["Q1", "Q3"]).unwrap()).unwrap();
        assert!(close(m.score, 0.9082, 1e-12));
        assert!(close(m.interval.lo, 0.004 / 0.13, 1e-12));
        assert!(close(m.interval.hi, 0.2, 1e-12));

        let single = InstanceTable {
            kept: FeatureSet::empty(),
            rows: vec![InstanceRow {
                values: vec![],
                marginal: 1.0,
                posterior: 0.3,
                positive: 0.5,
            }],
        };
        assert_eq!(compute_maa(&single).unwrap().score, 0.5);
        let empty = InstanceTable {
            kept: FeatureSet::empty(),
            rows: vec![],
        };
        assert!(matches!(compute_maa(&empty), Err(Error::EmptyTable)));
    }

    #[test]
    fn maa_examples() {
        let (net, clf) = quiz();
        let m = maa(&net, &clf, clf.set_of_names(&net, &["Q1", "Q2"]).unwrap()).unwrap();
        assert!(close(m.score, 0.9748, 1e-12));
        assert!(close(m.interval.lo, 0.06 / 0.78, 1e-12));
        assert!(close(m.interval.hi, 1.0 / 3.0, 1e-12));

        let m = maa(&net, &clf, clf.set_of_names(&net, &["Q2", "Q3"]).unwrap()).unwrap();
        assert!(close(m.score, 0.7318, 1e-12));
        assert!(m.interval.all_negative());
        assert!(m.interval.representative > m.interval.lo);

        // naive Bayes: every subset has maa == mpa
        for s in FeatureSet::all_by_size(3) {
            let a = maa(&net, &clf, s).unwrap().score;
            let b = mpa(&net, &clf, s).unwrap();
            assert!(close(a, b, 1e-9), "{s:?}: {a} vs {b}");
        }
    }

    #[test]
    fn ties_collapse_into_one_cutoff() {
        let row = |posterior, positive| InstanceRow {
            values: vec![],
            marginal: 0.25,
            posterior,
            positive,
        };
        // two rows at (numerically) the same posterior must move together
        let table = InstanceTable {
            kept: FeatureSet::empty(),
            rows: vec![row(0.2, 0.0), row(0.4, 0.9), row(0.4 + 1e-12, 0.1), row(0.6, 1.0)],
        };
        let m = compute_maa(&table).unwrap();
        // splitting the tie would give 0.25 + 0.025 + ...; grouped options:
        // cut at 0.2 -> 0.25*(1 + 0.9 + 0.1 + 1) = 0.75
        assert!(close(m.score, 0.75, 1e-15));
        assert!(close(m.interval.lo, 0.2, 1e-15));
        assert!(close(m.interval.hi, 0.4, 1e-15));
        assert!(close(table.agreement_at(m.interval.representative), m.score, 1e-15));
    }
}
