use bnforge_core::cpt::{configurations, expand_cpt, ConfigPattern, CptError, CptSpec, PartitionElement, Selector};
use bnforge_core::StateSpace;
use proptest::prelude::*;

/// Closed form `P(false | x) = (1 - leak) * prod over active parents of (1 - link)`,
/// with state 0 as "true".
fn noisy_or_false(links: &[f64], leak: f64, config: &[usize]) -> f64 {
    let mut off = 1.0 - leak;
    for (l, &s) in links.iter().zip(config) {
        if s == 0 {
            off *= 1.0 - l;
        }
    }
    off
}

#[test]
fn noisy_or_matches_closed_form_up_to_ten_parents() {
    let b = StateSpace::boolean();
    for n in 0..=10usize {
        let links: Vec<f64> = (0..n).map(|i| 0.05 + 0.09 * i as f64).collect();
        let leak = 0.013;
        let parents = vec![&b; n];
        let rows = expand_cpt(&CptSpec::NoisyOr { links: links.clone(), leak }, &b, &parents).unwrap();
        assert_eq!(rows.len(), 1 << n);
        for (row, cfg) in rows.iter().zip(configurations(&vec![2; n])) {
            let off = noisy_or_false(&links, leak, &cfg);
            assert_eq!(row[1], off);
            assert_eq!(row[0], 1.0 - off);
        }
    }
}

#[test]
fn partition_with_wildcards_fills_every_row() {
    let b = StateSpace::boolean();
    let spec = CptSpec::Partition {
        elements: vec![
            PartitionElement {
                patterns: vec![ConfigPattern(vec![Selector::state("t"), Selector::Any])],
                rationale: "first parent dominates".into(),
                distribution: vec![0.9, 0.1],
            },
            PartitionElement {
                patterns: vec![ConfigPattern(vec![Selector::state("f"), Selector::Any])],
                rationale: String::new(),
                distribution: vec![0.2, 0.8],
            },
        ],
    };
    let rows = expand_cpt(&spec, &b, &[&b, &b]).unwrap();
    assert_eq!(rows, vec![vec![0.9, 0.1], vec![0.9, 0.1], vec![0.2, 0.8], vec![0.2, 0.8]]);
}

#[test]
fn partition_gaps_and_overlaps_are_rejected() {
    let b = StateSpace::boolean();
    let element = |sel: Selector| PartitionElement {
        patterns: vec![ConfigPattern(vec![sel])],
        rationale: String::new(),
        distribution: vec![0.5, 0.5],
    };
    let gap = CptSpec::Partition { elements: vec![element(Selector::state("t"))] };
    assert!(matches!(expand_cpt(&gap, &b, &[&b]), Err(CptError::PartitionGap(_))));
    let overlap = CptSpec::Partition { elements: vec![element(Selector::Any), element(Selector::state("f"))] };
    assert!(matches!(expand_cpt(&overlap, &b, &[&b]), Err(CptError::PartitionOverlap(_))));
}

#[test]
fn deterministic_rows_are_one_hot() {
    let b = StateSpace::boolean();
    let rows = expand_cpt(&CptSpec::Deterministic { outcomes: vec!["f".into(), "t".into()] }, &b, &[&b]).unwrap();
    assert_eq!(rows, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
}

proptest! {
    #[test]
    fn noisy_or_rows_are_monotone_in_each_parent(
        links in proptest::collection::vec(0.0f64..=1.0, 1..6),
        leak in 0.0f64..=1.0,
    ) {
        let b = StateSpace::boolean();
        let n = links.len();
        let rows = expand_cpt(&CptSpec::NoisyOr { links: links.clone(), leak }, &b, &vec![&b; n]).unwrap();
        for (i, cfg) in configurations(&vec![2; n]).enumerate() {
            prop_assert!((rows[i][0] + rows[i][1] - 1.0).abs() < 1e-12);
            for (k, &s) in cfg.iter().enumerate() {
                if s == 1 {
                    // switching parent k to "true" never lowers P(true)
                    let j = i - (1 << (n - 1 - k));
                    prop_assert!(rows[j][0] >= rows[i][0] - 1e-15);
                }
            }
        }
    }
}
