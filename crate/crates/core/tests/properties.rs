use bntrim::agreement::{esdp_two_threshold, AgreementModel, ThresholdInterval};
use bntrim::baselines::{eca_bruteforce, maa_bruteforce};
use bntrim::fixtures::{random_dag, random_instance, random_naive_bayes, RandomInstance, RandomSpec};
use bntrim::inference::{classify, nb_log_odds, posterior_class, Assignment, LogOddsModel};
use bntrim::model::{cond_independent_given_class, subset_cost, within_budget, FeatureSet};
use bntrim::netio::{parse_network, serialize_network};
use bntrim::trimsearch::{eca_trim, exhaustive_trim, nb_trim, SearchOptions};
use bntrim::{Error, Label};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_instance(&mut rng, 6, 3)
}

fn mask(inst: &RandomInstance, bits: u64) -> FeatureSet {
    FeatureSet(bits & inst.clf.all_features().0)
}

/// Whether `t` lies in the interval up to float noise in the posteriors.
fn roughly_contains(i: &ThresholdInterval, t: f64) -> bool {
    let slack = 1e-12 * t.abs().max(1.0);
    if t == f64::INFINITY {
        return i.all_negative();
    }
    i.lo < t + slack && t <= i.hi + slack
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn network_documents_round_trip(seed in any::<u64>(), zero_rate in 0.0..0.4f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = RandomSpec { n_features: 5, max_cardinality: 4, max_parents: 3, zero_rate };
        let (net, _) = random_dag(&mut rng, &spec);
        let text = serialize_network(&net);
        let back = parse_network(&text).unwrap();
        prop_assert_eq!(&back, &net);
        prop_assert_eq!(serialize_network(&back), text);
    }

    #[test]
    fn log_odds_classification_matches_posterior(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = RandomSpec { n_features: 5, max_cardinality: 3, zero_rate: 0.15, ..RandomSpec::default() };
        let (net, clf) = random_naive_bayes(&mut rng, &spec);
        let model = LogOddsModel::new(&net, &clf).unwrap();
        for _ in 0..20 {
            let mut a = Assignment::empty(&net);
            for &f in &clf.features {
                a.set(f, rng.gen_range(0..net.cardinality(f)));
            }
            let lo = nb_log_odds(&model, &a);
            match posterior_class(&net, &clf, &a) {
                Err(Error::ZeroProbabilityEvidence) => prop_assert!(lo.is_nan()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
                Ok(p) => {
                    // skip knife-edge cases where rounding decides
                    if (p - clf.threshold).abs() > 1e-9 {
                        prop_assert_eq!(model.classify(lo), classify(&net, &clf, &a).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn maa_never_exceeds_mpa(seed in any::<u64>(), bits in any::<u64>()) {
        let inst = instance(seed);
        let model = AgreementModel::new(&inst.net, &inst.clf).unwrap();
        let s = mask(&inst, bits);
        prop_assert!(model.maa(s).unwrap().score <= model.mpa(s).unwrap() + 1e-9);
    }

    #[test]
    fn mpa_grows_with_the_subset(seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        let inst = instance(seed);
        let model = AgreementModel::new(&inst.net, &inst.clf).unwrap();
        let small = mask(&inst, a & b);
        let large = mask(&inst, a);
        prop_assert!(model.mpa(small).unwrap() <= model.mpa(large).unwrap() + 1e-9);
    }

    #[test]
    fn independence_closes_the_gap(seed in any::<u64>(), bits in any::<u64>()) {
        let inst = instance(seed);
        let s = mask(&inst, bits);
        if cond_independent_given_class(&inst.net, &inst.clf, s).unwrap() {
            let model = AgreementModel::new(&inst.net, &inst.clf).unwrap();
            let gap = model.mpa(s).unwrap() - model.maa(s).unwrap().score;
            prop_assert!(gap.abs() <= 1e-9, "gap {}", gap);
        }
    }

    #[test]
    fn agreement_identities(seed in any::<u64>(), bits in any::<u64>(), t in 0.0..1.0f64) {
        let inst = instance(seed);
        let (net, clf) = (&inst.net, &inst.clf);
        let s = mask(&inst, bits);
        let beta = clf.trimmed(s, t);
        let model = AgreementModel::new(net, clf).unwrap();
        let eca = model.eca(&beta).unwrap();
        let y = clf.vars_of(s);
        let z = clf.vars_of(clf.all_features().minus(s));
        let esdp = esdp_two_threshold(net, clf, t, &z, &y, &Assignment::empty(net)).unwrap();
        let brute = eca_bruteforce(net, clf, &beta).unwrap();
        prop_assert!((eca - esdp).abs() <= 1e-12, "{} vs {}", eca, esdp);
        prop_assert!((eca - brute).abs() <= 1e-12, "{} vs {}", eca, brute);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&eca));
    }

    #[test]
    fn maa_matches_the_threshold_oracle(seed in any::<u64>(), bits in any::<u64>()) {
        let inst = instance(seed);
        let (net, clf) = (&inst.net, &inst.clf);
        let s = mask(&inst, bits);
        let model = AgreementModel::new(net, clf).unwrap();
        let maa = model.maa(s).unwrap();
        let (score, t) = maa_bruteforce(net, clf, &clf.vars_of(s)).unwrap();
        prop_assert!((maa.score - score).abs() <= 1e-12, "{} vs {}", maa.score, score);
        // near-ties between cutoffs may resolve differently in float
        let at_rep = model.eca_with(s, maa.interval.representative).unwrap();
        prop_assert!(roughly_contains(&maa.interval, t) || (at_rep - score).abs() <= 1e-12,
            "{:?} misses {}", maa.interval, t);
        prop_assert!((at_rep - maa.score).abs() <= 1e-12);
    }

    #[test]
    fn search_finds_the_exhaustive_optimum(seed in any::<u64>()) {
        let inst = instance(seed);
        let (net, clf, costs) = (&inst.net, &inst.clf, &inst.costs);
        let feature_costs = costs.feature_costs(net, clf).unwrap();
        let ex = exhaustive_trim(net, clf, costs).unwrap();
        let feasible = FeatureSet::all_by_size(clf.features.len())
            .into_iter()
            .filter(|&s| within_budget(&feature_costs, s, costs.budget))
            .count() as u64;
        prop_assert_eq!(ex.stats.maa_evals, feasible);
        let mut runs = vec![
            eca_trim(net, clf, costs, &SearchOptions { nb_fast_path: Some(false), ..SearchOptions::default() }).unwrap(),
            eca_trim(net, clf, costs, &SearchOptions::default()).unwrap(),
            eca_trim(net, clf, costs, &SearchOptions { jobs: 3, ..SearchOptions::default() }).unwrap(),
        ];
        if inst.naive_bayes {
            runs.push(nb_trim(net, clf, costs).unwrap());
        }
        let model = AgreementModel::new(net, clf).unwrap();
        for r in runs {
            prop_assert!((r.best_score - ex.best_score).abs() <= 1e-12, "{} vs {}", r.best_score, ex.best_score);
            prop_assert!(subset_cost(&feature_costs, r.best_features) <= costs.budget + 1e-9);
            prop_assert!((model.maa(r.best_features).unwrap().score - r.best_score).abs() <= 1e-12);
            prop_assert!(r.stats.maa_evals <= feasible);
        }
    }

    #[test]
    fn full_budget_reproduces_the_classifier(seed in any::<u64>()) {
        let mut inst = instance(seed);
        inst.costs.budget = inst.costs.cost.values().sum();
        let r = eca_trim(&inst.net, &inst.clf, &inst.costs, &SearchOptions::default()).unwrap();
        prop_assert!((r.best_score - 1.0).abs() <= 1e-12);
        let beta = r.classifier(&inst.clf);
        prop_assert!((AgreementModel::new(&inst.net, &inst.clf).unwrap().eca(&beta).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sampled_decisions_agree_with_classify(seed in any::<u64>()) {
        let inst = instance(seed);
        let (net, clf) = (&inst.net, &inst.clf);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..10 {
            let sample = bntrim::inference::forward_sample(net, &mut rng);
            let mut a = Assignment::empty(net);
            for &f in &clf.features {
                a.set(f, sample[f.0]);
            }
            let label = classify(net, clf, &a).unwrap();
            let p = posterior_class(net, clf, &a).unwrap();
            prop_assert_eq!(label == Label::Positive, p >= clf.threshold);
        }
    }
}
