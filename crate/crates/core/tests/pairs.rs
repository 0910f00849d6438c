mod common;

use std::collections::BTreeSet;

use common::*;
use perspectra::corpus::Dimension;
use perspectra::pairs::{dedupe_unique, mine_pairs};
use proptest::prelude::*;

fn mined_keys(spec: &[(String, String, f64)]) -> BTreeSet<(String, String)> {
    mine_pairs(&store(spec), &Dimension::BlameMurderer)
        .unwrap()
        .into_iter()
        .map(|p| (p.low_sentence, p.high_sentence))
        .collect()
}

#[test]
fn mining_matches_brute_force_on_small_fixtures() {
    let mut r = rng(11);
    for _ in 0..50 {
        let spec = random_fixture(&mut r, 10, 3);
        assert_eq!(mined_keys(&spec), brute_force_pairs(&spec), "fixture {spec:?}");
    }
}

#[test]
fn no_low_sentences_means_no_pairs() {
    // z-scores always have both signs, so "no low side" happens per case
    let spec: Vec<_> = (0..4).map(|i| (format!("s{i}"), "c".to_string(), if i == 0 { 1.0 } else { 5.0 })).collect();
    assert_eq!(mined_keys(&spec).len(), 3);
    let spec: Vec<_> = vec![("a".to_string(), "c1".to_string(), 0.0), ("b".to_string(), "c2".to_string(), 1.0)];
    assert!(mined_keys(&spec).is_empty());
}

#[test]
fn mined_pairs_have_positive_gap_and_shared_case() {
    let mut r = rng(5);
    let spec = random_fixture(&mut r, 30, 5);
    let s = store(&spec);
    for p in mine_pairs(&s, &Dimension::BlameMurderer).unwrap() {
        assert!(p.gap > 0.0);
        assert_ne!(p.low_sentence, p.high_sentence);
        assert_eq!(s.sentence(&p.low_sentence).unwrap().case_id, s.sentence(&p.high_sentence).unwrap().case_id);
    }
}

#[test]
fn dedupe_against_matching_oracles() {
    let mut r = rng(23);
    for round in 0..20 {
        let pairs = random_pairs(&mut r, 50, 12, 12);
        let kept = dedupe_unique(&pairs);
        let edges: Vec<_> = pairs.iter().map(|p| (p.low_sentence.clone(), p.high_sentence.clone())).collect();
        let maximum = bipartite_matching(&edges);
        assert!(!reuses_sentence(&kept));
        assert!(is_maximal(&pairs, &kept));
        assert!(kept.len() <= maximum);
        assert!(2 * kept.len() >= maximum, "greedy {} vs maximum {maximum}", kept.len());
        eprintln!("dedupe round {round}: greedy {} maximum {maximum}", kept.len());
    }
}

#[test]
fn matching_oracles_agree() {
    let mut r = rng(3);
    for _ in 0..30 {
        let pairs = random_pairs(&mut r, 14, 6, 6);
        let edges: Vec<_> = pairs.iter().map(|p| (p.low_sentence.clone(), p.high_sentence.clone())).collect();
        assert_eq!(exhaustive_matching(&edges), bipartite_matching(&edges));
    }
}

proptest! {
    #[test]
    fn dedupe_is_idempotent(seed in any::<u64>(), count in 0usize..60) {
        let pairs = random_pairs(&mut rng(seed), count, 10, 10);
        let once = dedupe_unique(&pairs);
        prop_assert_eq!(dedupe_unique(&once), once.clone());
        prop_assert!(!reuses_sentence(&once));
    }

    #[test]
    fn dedupe_ignores_input_order(seed in any::<u64>()) {
        let pairs = random_pairs(&mut rng(seed), 30, 8, 8);
        let mut reversed = pairs.clone();
        reversed.reverse();
        prop_assert_eq!(dedupe_unique(&pairs), dedupe_unique(&reversed));
    }

    #[test]
    fn mining_is_deterministic(seed in any::<u64>()) {
        let spec = random_fixture(&mut rng(seed), 20, 4);
        let s = store(&spec);
        prop_assert_eq!(
            mine_pairs(&s, &Dimension::BlameMurderer).unwrap(),
            mine_pairs(&s, &Dimension::BlameMurderer).unwrap()
        );
    }
}
