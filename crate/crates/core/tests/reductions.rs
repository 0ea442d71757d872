use std::collections::BTreeSet;

use proptest::prelude::*;

use ramsey_core::algebra::{enumerate_orderly_terms, OpDef, Signature};
use ramsey_core::reduction::{
    check_witness, find_reduction, fr_enumerate, fr_member, ReductionWitness, StreamSeq,
};
use ramsey_core::search::{search_monochromatic, Coloring, SearchBudget};
use ramsey_core::sets::{oracle_table, GeneratorOracle, SetTerm, SymSet};
use ramsey_core::verify::brute_force_fr;

fn mixed() -> Signature {
    Signature::new(vec![OpDef::plus(), OpDef::shifted_mul()]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dp_matches_brute_force(b in proptest::collection::vec(0u64..12, 1..=5)) {
        for sig in [Signature::plus(), mixed()] {
            let depth = b.len();
            prop_assert_eq!(fr_enumerate(&b, &sig, depth), brute_force_fr(&b, &sig, depth).unwrap());
        }
    }

    #[test]
    fn fr_is_monotone_under_extension(b in proptest::collection::vec(1u64..20, 1..=5), x in 1u64..20) {
        let sig = Signature::plus();
        let small = fr_enumerate(&b, &sig, 6);
        let mut longer = b.clone();
        longer.push(x);
        let big = fr_enumerate(&longer, &sig, 6);
        prop_assert!(small.is_subset(&big));
    }

    #[test]
    fn membership_agrees_with_enumeration(x in 1u64..200, tail in 0usize..3) {
        let b = StreamSeq::powers(2);
        let prefix = b.take(10).unwrap();
        let fr = fr_enumerate(&prefix[tail..], &Signature::plus(), 10);
        prop_assert_eq!(fr_member(x, &b, tail, &Signature::plus()).unwrap(), fr.contains(&x));
    }

    #[test]
    fn found_reductions_check(picks in proptest::collection::btree_set(0usize..8, 1..=3)) {
        let b: Vec<u64> = (0..8).map(|i| 1u64 << i).collect();
        let picks: Vec<usize> = picks.into_iter().collect();
        let a = vec![picks.iter().map(|&i| b[i]).sum::<u64>()];
        let w = find_reduction(&a, &b, &Signature::plus(), 4).expect("a sum of entries reduces");
        prop_assert!(check_witness(&a, &b, &w, &Signature::plus()).unwrap());
    }

    #[test]
    fn symset_json_round_trips(support in proptest::collection::btree_set(proptest::collection::vec(0u64..6, 2), 0..5), cof in any::<bool>()) {
        let x = if cof { SymSet::cofinite(2, support) } else { SymSet::finite(2, support) }.unwrap();
        prop_assert_eq!(SymSet::from_json(&x.to_json()).unwrap(), x);
    }
}

#[test]
fn witness_json_round_trips() {
    let sig = Signature::plus();
    let w = find_reduction(&[3, 12], &[1, 2, 4, 8, 16], &sig, 3).unwrap();
    let back = ReductionWitness::from_json(&w.to_json(), &sig).unwrap();
    assert_eq!(back, w);
    assert!(check_witness(&[3, 12], &[1, 2, 4, 8, 16], &back, &sig).unwrap());
}

#[test]
fn set_terms_round_trip_through_json() {
    let evens = GeneratorOracle::builtin("evens").unwrap();
    let oracles = oracle_table([evens.clone()]);
    let t = SetTerm::union(
        SetTerm::gen(&evens),
        SetTerm::Lit(SymSet::finite(1, [vec![3]]).unwrap()),
    );
    let back = SetTerm::from_json(&t.to_json(), &Signature::plus(), &oracles).unwrap();
    assert_eq!(back, t);
}

#[test]
fn stream_sequences_round_trip() {
    for name in ["powers2", "powers3", "naturals"] {
        let s = StreamSeq::builtin(name).unwrap();
        let back = StreamSeq::from_json(&s.to_json()).unwrap();
        assert_eq!(back.take(12).unwrap(), s.take(12).unwrap());
    }
}

#[test]
fn term_counts_without_depth_bound_for_binary_ops() {
    let sig = Signature::plus();
    assert_eq!(enumerate_orderly_terms(&sig, 5, 5).len(), enumerate_orderly_terms(&sig, 5, 50).len());
    assert_eq!(enumerate_orderly_terms(&sig, 5, 2).len(), 0);
}

#[test]
fn search_witness_reduces_to_the_seed() {
    let seed = StreamSeq::positive_naturals();
    let out = search_monochromatic(
        &Signature::plus(),
        &seed,
        &Coloring::modulo(5, 400).unwrap(),
        &SearchBudget::new(3, 400),
    )
    .unwrap();
    let f = out.found().expect("mod 5 witness of length 3");
    let window = seed.take(f.witness.max_index().unwrap() + 1).unwrap();
    assert!(check_witness(&f.values, &window, &f.witness, &Signature::plus()).unwrap());
    let sums: BTreeSet<u64> = brute_force_fr(&f.values, &Signature::plus(), 3).unwrap();
    assert!(sums.iter().all(|s| s % 5 == f.color as u64));
}
