use bnforge_core::inference::{brute_force_evidence_probability, brute_force_posterior, InferenceError};
use bnforge_core::testkit::{random_evidence, random_network};
use bnforge_core::{evidence_probability, posterior, CompiledNetwork, Evidence};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn chain() -> CompiledNetwork {
    CompiledNetwork::builder()
        .node("A", &["t", "f"], &[], vec![vec![0.3, 0.7]])
        .node("B", &["t", "f"], &["A"], vec![vec![0.9, 0.1], vec![0.2, 0.8]])
        .build()
        .unwrap()
}

#[test]
fn chain_posteriors_match_bayes_rule() {
    let net = chain();
    let p = |b: &str| posterior(&net, &Evidence::new().with("B", b), &["A"]).unwrap()["A"].probability("t").unwrap();
    assert!((p("t") - 27.0 / 41.0).abs() < 1e-12);
    assert!((p("f") - 3.0 / 59.0).abs() < 1e-12);
    let pb = evidence_probability(&net, &Evidence::new().with("B", "t")).unwrap();
    assert!((pb - 0.41).abs() < 1e-12);
}

#[test]
fn empty_evidence_has_probability_one() {
    assert_eq!(evidence_probability(&chain(), &Evidence::new()).unwrap(), 1.0);
}

#[test]
fn observed_target_is_a_point_mass() {
    let net = chain();
    let m = posterior(&net, &Evidence::new().with("A", "f"), &["A"]).unwrap();
    assert_eq!(m["A"].probabilities, vec![0.0, 1.0]);
}

#[test]
fn impossible_evidence_is_an_error() {
    let net = CompiledNetwork::builder().node("A", &["t", "f"], &[], vec![vec![1.0, 0.0]]).build().unwrap();
    let err = posterior(&net, &Evidence::new().with("A", "f"), &["A"]).unwrap_err();
    assert_eq!(err, InferenceError::ZeroProbabilityEvidence);
}

#[test]
fn unknown_names_are_reported() {
    let net = chain();
    assert_eq!(posterior(&net, &Evidence::new(), &["Q"]).unwrap_err(), InferenceError::UnknownVariable("Q".into()));
    assert!(matches!(
        posterior(&net, &Evidence::new().with("B", "maybe"), &["A"]).unwrap_err(),
        InferenceError::UnknownState { .. }
    ));
}

fn check_against_oracle(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 + (seed % 11) as usize;
    let net = random_network(&mut rng, n);
    let ev = random_evidence(&mut rng, &net, 0.3);
    let names: Vec<String> = net.variables().iter().map(|v| v.name.clone()).collect();
    let fast = posterior(&net, &ev, &names);
    let slow = brute_force_posterior(&net, &ev, &names);
    match (fast, slow) {
        (Err(a), Err(b)) if a == b => Ok(()),
        (Ok(a), Ok(b)) => {
            for (name, m) in &a {
                for (x, y) in m.probabilities.iter().zip(&b[name].probabilities) {
                    if (x - y).abs() > 1e-9 {
                        return Err(format!("{name}: {x} vs {y}"));
                    }
                }
            }
            let pe = evidence_probability(&net, &ev).unwrap();
            let pb = brute_force_evidence_probability(&net, &ev).unwrap();
            if (pe - pb).abs() > 1e-12 {
                return Err(format!("P(e): {pe} vs {pb}"));
            }
            Ok(())
        }
        (a, b) => Err(format!("{a:?} vs {b:?}")),
    }
}

#[test]
fn elimination_matches_brute_force() {
    for seed in 0..200 {
        if let Err(e) = check_against_oracle(seed) {
            panic!("seed {seed}: {e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posteriors_agree_with_the_oracle(seed in any::<u64>()) {
        prop_assert_eq!(check_against_oracle(seed), Ok(()));
    }

    #[test]
    fn posteriors_are_distributions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, 8);
        let ev = random_evidence(&mut rng, &net, 0.25);
        let names: Vec<String> = net.variables().iter().map(|v| v.name.clone()).collect();
        if let Ok(m) = posterior(&net, &ev, &names) {
            for marginal in m.values() {
                let total: f64 = marginal.probabilities.iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
                prop_assert!(marginal.probabilities.iter().all(|p| (0.0..=1.0 + 1e-12).contains(p)));
            }
        }
    }

    #[test]
    fn evidence_probability_is_marginal_sum(seed in any::<u64>()) {
        // P(e) = sum over the states s of V of P(e, V = s), for unobserved V.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, 7);
        let ev = random_evidence(&mut rng, &net, 0.3);
        let free = net.variables().iter().find(|v| !ev.contains(&v.name)).cloned();
        if let Some(v) = free {
            let pe = evidence_probability(&net, &ev).unwrap();
            let total: f64 = v
                .states
                .states()
                .iter()
                .map(|s| evidence_probability(&net, &ev.clone().with(v.name.clone(), s.clone())).unwrap())
                .sum();
            prop_assert!((pe - total).abs() < 1e-12);
        }
    }
}
