use bnforge_core::evaluation::{
    conflict, expected_quadratic_gain, importance, joint_importance, render_importance_report, report_entries,
    synergy_sample, EvaluationError, DEFAULT_CONFLICT_THRESHOLD,
};
use bnforge_core::inference::brute_force_posterior;
use bnforge_core::testkit::random_network;
use bnforge_core::{evidence_probability, CompiledNetwork, Evidence};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn chain() -> CompiledNetwork {
    CompiledNetwork::builder()
        .node("A", &["t", "f"], &[], vec![vec![0.3, 0.7]])
        .node("B", &["t", "f"], &["A"], vec![vec![0.9, 0.1], vec![0.2, 0.8]])
        .build()
        .unwrap()
}

/// Focus F with a uniform prior, two exact copies and an unrelated node.
fn copies() -> CompiledNetwork {
    let copy = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    CompiledNetwork::builder()
        .node("F", &["t", "f"], &[], vec![vec![0.5, 0.5]])
        .node("E1", &["t", "f"], &["F"], copy.clone())
        .node("E2", &["t", "f"], &["F"], copy)
        .node("N", &["t", "f"], &[], vec![vec![0.3, 0.7]])
        .build()
        .unwrap()
}

/// Two children of a fair coin, each agreeing with it 99% of the time.
fn contradiction() -> CompiledNetwork {
    let noisy = vec![vec![0.99, 0.01], vec![0.01, 0.99]];
    CompiledNetwork::builder()
        .node("A", &["t", "f"], &[], vec![vec![0.5, 0.5]])
        .node("B1", &["t", "f"], &["A"], noisy.clone())
        .node("B2", &["t", "f"], &["A"], noisy)
        .build()
        .unwrap()
}

#[test]
fn chain_importance_matches_exact_value() {
    // 21609/120950, from exact rational arithmetic.
    let i = joint_importance(&chain(), "A", &["B"], &Evidence::new()).unwrap();
    assert!((i - 21609.0 / 120950.0).abs() < 1e-12);
    assert!((i - 0.17866).abs() < 1e-4);
}

#[test]
fn independent_evidence_has_no_importance() {
    let i = joint_importance(&copies(), "F", &["N"], &Evidence::new()).unwrap();
    assert!(i.abs() < 1e-12);
}

#[test]
fn a_perfect_copy_of_a_fair_coin_scores_one_half() {
    let i = joint_importance(&copies(), "F", &["E1"], &Evidence::new()).unwrap();
    assert!((i - 0.5).abs() < 1e-9);
}

#[test]
fn redundant_copies_have_negative_synergy() {
    let s = synergy_sample(&copies(), "F", &["E1", "E2"], 2, 10, 1, &Evidence::new()).unwrap();
    assert_eq!(s.len(), 1);
    assert!((s[0].joint - 0.5).abs() < 1e-9);
    assert!((s[0].synergy + 0.5).abs() < 1e-9);
}

#[test]
fn synergy_sampling_is_seeded_and_sorted() {
    let vars = ["E1", "E2", "N"];
    let net = copies();
    let a = synergy_sample(&net, "F", &vars, 2, 2, 42, &Evidence::new()).unwrap();
    let b = synergy_sample(&net, "F", &vars, 2, 2, 42, &Evidence::new()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 2);
    assert!(a[0].combination < a[1].combination);
    let all = synergy_sample(&net, "F", &vars, 2, 100, 0, &Evidence::new()).unwrap();
    assert_eq!(all.len(), 3);
    assert_eq!(
        synergy_sample(&net, "F", &vars, 1, 2, 0, &Evidence::new()).unwrap_err(),
        EvaluationError::CombinationSize { k: 1, available: 3 }
    );
}

#[test]
fn importance_ranks_and_scores() {
    let net = copies();
    let r = importance(&net, "F", &["N", "E2", "E1"], &Evidence::new()).unwrap();
    let names: Vec<&str> = r.entries.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(names, ["E1", "E2", "N"]);
    assert_eq!(r.entries[0].score, 100.0);
    assert_eq!(r.entries[2].rank, 3);
    let report = report_entries(&r);
    assert_eq!(report.entries[0].stars, 5);
    assert_eq!(report.entries[2].stars, 0);
    let text = render_importance_report(&r);
    assert!(text.starts_with("Importance analysis for F\nCurrent Observations: none\n"));
    assert!(text.contains("*****        100  E1\n"));
    assert!(text.contains("               0  N\n"));
}

#[test]
fn base_evidence_conditions_the_analysis() {
    let net = copies();
    let base = Evidence::new().with("E2", "t");
    let r = importance(&net, "F", &["E1"], &base).unwrap();
    // F is already known through E2.
    assert!(r.entries[0].importance.abs() < 1e-12);
    assert!(render_importance_report(&r).contains("Current Observations: E2=t"));
}

#[test]
fn importance_rejects_bad_inputs() {
    let net = copies();
    let none = Evidence::new();
    assert_eq!(importance(&net, "F", &["F"], &none).unwrap_err(), EvaluationError::FocusInEvidence("F".into()));
    assert_eq!(
        importance(&net, "F", &["E1", "E1"], &none).unwrap_err(),
        EvaluationError::DuplicateVariable("E1".into())
    );
    assert_eq!(
        importance(&net, "F", &["E1"], &Evidence::new().with("E1", "t")).unwrap_err(),
        EvaluationError::AssignedInBase("E1".into())
    );
    assert!(matches!(importance(&net, "F", &["Nope"], &none), Err(EvaluationError::Inference(_))));
}

#[test]
fn independent_findings_do_not_conflict() {
    let net = copies();
    let c = conflict(&net, &Evidence::new().with("E1", "t").with("N", "f"), DEFAULT_CONFLICT_THRESHOLD).unwrap();
    assert!(c.value.abs() < 1e-9);
    assert!(!c.flagged);
}

#[test]
fn contradicting_findings_are_flagged() {
    let net = contradiction();
    let c = conflict(&net, &Evidence::new().with("B1", "t").with("B2", "f"), 2.0).unwrap();
    // log2(0.25 / 0.0099)
    assert!((c.value - 4.658355759469839).abs() < 1e-3);
    assert!(c.flagged);
    let c = conflict(&net, &Evidence::new().with("B1", "t").with("B2", "t"), 2.0).unwrap();
    assert!(c.value < 0.0);
    assert!(!c.flagged);
}

#[test]
fn impossible_combinations_score_infinite() {
    let net = copies();
    let c = conflict(&net, &Evidence::new().with("E1", "t").with("E2", "f"), 2.0).unwrap();
    assert!(c.impossible && c.flagged && c.value.is_infinite());
}

/// `Σ_e P(e) · ‖P(F | e) − P(F)‖²` using only enumeration.
fn oracle_importance(net: &CompiledNetwork, focus: &str, vars: &[String]) -> f64 {
    let prior = brute_force_posterior(net, &Evidence::new(), &[focus]).unwrap()[focus].probabilities.clone();
    let spaces: Vec<Vec<String>> = vars.iter().map(|v| net.find(v).unwrap().states.states().to_vec()).collect();
    let mut total = 0.0;
    let cards: Vec<usize> = spaces.iter().map(|s| s.len()).collect();
    for cfg in bnforge_core::cpt::configurations(&cards) {
        let mut ev = Evidence::new();
        for ((v, s), &k) in vars.iter().zip(&spaces).zip(&cfg) {
            ev.insert(v.clone(), s[k].clone()).unwrap();
        }
        let p = bnforge_core::inference::brute_force_evidence_probability(net, &ev).unwrap();
        if p == 0.0 {
            continue;
        }
        let post = &brute_force_posterior(net, &ev, &[focus]).unwrap()[focus].probabilities;
        total += p * post.iter().zip(&prior).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn importance_identity_and_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, 7);
        let mut names: Vec<String> = net.variables().iter().map(|v| v.name.clone()).collect();
        names.shuffle(&mut rng);
        let focus = names[0].clone();
        let vars = names[1..3].to_vec();
        let i = joint_importance(&net, &focus, &vars, &Evidence::new()).unwrap();
        let gain = expected_quadratic_gain(&net, &focus, &vars, &Evidence::new()).unwrap();
        prop_assert!((i - gain).abs() < 1e-9);
        prop_assert!(i >= -1e-15);
        prop_assert!((i - oracle_importance(&net, &focus, &vars)).abs() < 1e-9);
    }

    #[test]
    fn conflict_of_one_finding_is_zero(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, 6);
        let v = &net.variables()[0];
        let ev = Evidence::new().with(v.name.clone(), v.states.states()[0].clone());
        if evidence_probability(&net, &ev).unwrap() > 0.0 {
            let c = conflict(&net, &ev, 2.0).unwrap();
            prop_assert!(c.value.abs() < 1e-12);
        }
    }
}
