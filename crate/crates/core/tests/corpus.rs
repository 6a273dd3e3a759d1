//! Properties quantified over the small-structure corpus.

use demonic_core::counterexamples::{desk_corpus, gen_sn};
use demonic_core::decision::{decide, Certificate};
use demonic_core::oracle::{brute_force_represent, OracleLimits};
use demonic_core::predicates::{compute_fixpoint, explain, reference::naive_stages, Fact};
use demonic_core::repbuilder::{base_bound, verify, verify_relations, Representation};
use demonic_core::structure::{adjoin_identity, validate};

#[test]
fn identity_adjunction_preserves_validity() {
    for s in desk_corpus() {
        assert!(validate(&adjoin_identity(&s)).is_valid());
    }
}

#[test]
fn stage_sets_grow_monotonically() {
    for s in desk_corpus().iter().chain([&gen_sn(2).unwrap()]) {
        let naive = naive_stages(s);
        for w in naive.black_sets.windows(2) {
            assert!(w[0].iter().zip(&w[1]).all(|(a, b)| !a || *b));
        }
        for w in naive.tri_sets.windows(2) {
            assert!(w[0].iter().zip(&w[1]).all(|(a, b)| !a || *b));
        }
    }
}

#[test]
fn certificates_round_trip_and_revalidate() {
    let mut seen = [0usize; 3];
    for s in desk_corpus() {
        let Ok(cert) = decide(&s) else { continue };
        seen[match cert.kind() {
            "representable" => 0,
            "not_representable" => 1,
            _ => 2,
        }] += 1;
        cert.revalidate(&s).unwrap();
        let back = Certificate::from_json(&cert.to_json(&s), &s).unwrap();
        assert_eq!(back, cert);
        back.revalidate(&s).unwrap();
    }
    assert!(seen[0] > 0 && seen[1] > 0);
}

#[test]
fn negative_witnesses_replay() {
    for s in desk_corpus() {
        if let Ok(Certificate::NotRepresentable { a, b, black_derivation, tri_derivation, .. }) = decide(&s) {
            assert!(!s.leq(a, b));
            assert_eq!(black_derivation.fact, Fact::Black { a: b, b: a });
            assert_eq!(tri_derivation.fact, Fact::Tri { s: b, a, b });
            black_derivation.replay(&s).unwrap();
            tri_derivation.replay(&s).unwrap();
        }
    }
}

#[test]
fn representations_respect_base_shape() {
    for s in desk_corpus() {
        let Ok(Certificate::Representable { representation: rep }) = decide(&s) else { continue };
        assert!(rep.base_size() <= base_bound(s.len()));
        for r in &rep.rels {
            for (x, y) in r.pairs() {
                assert!(!rep.base[y].is_initial(), "pair targets an initial point");
                if rep.base[x].is_branch() {
                    assert!(rep.base[y].is_branch(), "branch source leaves the branch points");
                }
            }
        }
        let back = Representation::from_json(&rep.to_json(), &s).unwrap();
        assert_eq!(back, rep);
    }
}

#[test]
fn some_single_pair_deletion_breaks_verification() {
    let mut checked = 0;
    for s in desk_corpus().into_iter().filter(|s| !s.is_empty()) {
        let Ok(Certificate::Representable { representation: rep }) = decide(&s) else { continue };
        assert!(verify(&s, &rep).unwrap().passed());
        let breaks = s.elements().any(|a| {
            rep.rels[a].pairs().any(|(x, y)| {
                let mut rels = rep.rels.clone();
                rels[a].remove(x, y);
                !verify_relations(&s, &rels).unwrap().passed()
            })
        });
        assert!(breaks, "no deletion breaks {:?}", s);
        checked += 1;
    }
    assert!(checked > 200);
}

#[test]
fn oracle_witnesses_always_verify() {
    for s in desk_corpus().into_iter().filter(|s| s.len() <= 2) {
        if let Some(found) = brute_force_represent(&s, OracleLimits::default()).unwrap() {
            assert!(verify_relations(&s, &found.rels).unwrap().passed());
            assert!(found.base_size <= 3);
        }
    }
}

#[test]
fn sn_is_never_representable_and_has_no_tiny_model() {
    for n in 2..=3 {
        let s = gen_sn(n).unwrap();
        assert_eq!(decide(&s).unwrap().kind(), "not_representable");
    }
    let s = gen_sn(2).unwrap();
    let limits = OracleLimits { max_elements: s.len(), max_base: 2 };
    assert!(brute_force_represent(&s, limits).unwrap().is_none());
}

#[test]
fn one_element_explanations_are_leaves() {
    let s = desk_corpus().into_iter().find(|s| s.len() == 1).unwrap();
    let fp = compute_fixpoint(&s);
    let d = explain(&s, &fp, Fact::Tri { s: 0, a: 0, b: 0 }).unwrap();
    assert_eq!(d.stage, 0);
    assert!(d.premises.is_empty());
}

/// c ≤ a, c ≤ b, every product is a except c∘c = c. σ holds and the structure
/// is representable, but `b ◀ b∘c` is not derivable although the
/// composition-monotonicity closure asks for it, and the relations built from
/// the fixpoint then break `c ≤ b`.
#[test]
fn composition_monotonicity_gap() {
    use demonic_core::decision::{check_sigma, DecisionError};
    use demonic_core::structure::parse_structure;
    let s = parse_structure(
        r#"{"elements":["a","b","c"],"leq":[["a","a"],["b","b"],["c","a"],["c","b"],["c","c"]],
            "comp":{"a":{"a":"a","b":"a","c":"a"},"b":{"a":"a","b":"a","c":"a"},"c":{"a":"a","b":"a","c":"c"}}}"#,
    )
    .unwrap();
    let (a, b, c) = (0, 1, 2);
    let fp = compute_fixpoint(&s);
    assert_eq!(check_sigma(&s, &fp), None);
    assert_eq!(check_sigma(&adjoin_identity(&s), &compute_fixpoint(&adjoin_identity(&s))), None);
    // premises: b◀c∘c, c≤b, b◀b, c◀c; conclusion b◀b∘c = a
    assert!(fp.black(b, s.comp(c, c)) && s.leq(c, b) && fp.black(b, b) && fp.black(c, c));
    assert_eq!(s.comp(b, c), a);
    assert!(!fp.black(b, a));
    let found = brute_force_represent(&s, OracleLimits { max_elements: 3, max_base: 4 }).unwrap().unwrap();
    assert_eq!(found.base_size, 4);
    assert!(matches!(decide(&s), Err(DecisionError::Internal(_))));
}
