//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line;
//! runs without the libtest harness so the lines are never captured.
//!
//! Criteria 3, 5 and 6 fail on a small, fixed set of structures: the clause
//! set does not close `◀` under the composition-monotonicity property
//! (closure property 3 below), and on four size-3 structures the relations
//! built from it then break the refinement law, which in turn voids the
//! soundness check for those four. They are representable (the brute-force
//! oracle exhibits representations), so the failures are real.
//! The test pins the exact failing set so that any change, in either
//! direction, is noticed; it does not turn the FAIL lines into PASS.

use std::time::{Duration, Instant};

use demonic_core::counterexamples::{desk_corpus, gen_sn, sn_size};
use demonic_core::decision::{decide, min_sigma_stage, sigma_n_holds, Certificate};
use demonic_core::oracle::{brute_force_represent, law_suite, OracleLimits};
use demonic_core::predicates::{compute_fixpoint, reference::naive_stages, PredicateFixpoint};
use demonic_core::relcore::{dom, restrict};
use demonic_core::repbuilder::{base_bound, build_base, theta_all, verify};
use demonic_core::structure::{adjoin_identity, serialize_structure, FinStructure};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, title: &str, o: &Outcome) {
    let verdict = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {n}: {verdict} — {title}: {}", o.detail);
}

fn criterion_1() -> Outcome {
    let mut problems = Vec::new();
    let mut timings = Vec::new();
    for n in 2..=5u32 {
        let start = Instant::now();
        let s = gen_sn(n).unwrap();
        let cert = decide(&s).unwrap();
        let fp = compute_fixpoint(&s);
        let elapsed = start.elapsed();
        timings.push(format!("n={n} {:.0?}", elapsed));
        let budget = if n <= 4 { Duration::from_secs(5) } else { Duration::from_secs(120) };
        if elapsed > budget {
            problems.push(format!("n={n} took {elapsed:?}"));
        }
        if !matches!(cert, Certificate::NotRepresentable { .. }) {
            problems.push(format!("n={n}: {}", cert.kind()));
            continue;
        }
        if let Err(e) = cert.revalidate(&s) {
            problems.push(format!("n={n}: {e}"));
        }
        if (0..n).any(|k| !sigma_n_holds(&s, &fp, k)) || sigma_n_holds(&s, &fp, n + 1) {
            problems.push(format!("n={n}: minimal violated stage {:?}", min_sigma_stage(&s, &fp)));
        }
    }
    Outcome {
        pass: problems.is_empty(),
        detail: if problems.is_empty() { timings.join(", ") } else { problems.join("; ") },
    }
}

fn criterion_2() -> Outcome {
    let bad: Vec<u32> = (0..=6)
        .filter(|&n| {
            let len = gen_sn(n).unwrap().len() as u128;
            len != 3 + 3 * (1 + (1u128 << n)) || len != sn_size(n)
        })
        .collect();
    Outcome { pass: bad.is_empty(), detail: format!("n ≤ 6, mismatches {bad:?}") }
}

/// Structures whose constructed representation does not verify.
fn criterion_3(corpus: &[FinStructure]) -> (Outcome, Vec<String>) {
    let start = Instant::now();
    let (mut representable, mut negative, mut over_bound) = (0, 0, 0);
    let mut broken = Vec::new();
    for s in corpus {
        match decide(s) {
            Ok(Certificate::Representable { representation }) => {
                representable += 1;
                if !verify(s, &representation).unwrap().passed() {
                    broken.push(serialize_structure(s).trim_end().to_owned());
                }
                if representation.base_size() > base_bound(s.len()) {
                    over_bound += 1;
                }
            }
            Ok(Certificate::NotRepresentable { .. }) => negative += 1,
            Ok(Certificate::InvalidStructure { .. }) => panic!("corpus contains an invalid structure"),
            Err(_) => broken.push(serialize_structure(s).trim_end().to_owned()),
        }
    }
    let detail = format!(
        "{} structures, {representable} representable, {negative} not, {} construction failures, {over_bound} over the base bound ({:.1?})",
        corpus.len(),
        broken.len(),
        start.elapsed()
    );
    (Outcome { pass: broken.is_empty() && over_bound == 0, detail }, broken)
}

fn criterion_4(corpus: &[FinStructure]) -> Outcome {
    let mut searched = 0;
    let mut found = 0;
    let mut clashes = Vec::new();
    for s in corpus {
        let witness = brute_force_represent(s, OracleLimits::default()).unwrap();
        searched += 1;
        if witness.is_some() {
            found += 1;
            if matches!(decide(s), Ok(Certificate::NotRepresentable { .. })) {
                clashes.push(serialize_structure(s).trim_end().to_owned());
            }
        }
    }
    Outcome {
        pass: clashes.is_empty(),
        detail: format!("{searched} searched, {found} with a base ≤ 3 representation, {} clashes", clashes.len()),
    }
}

/// Violation counts of the four closure properties.
fn closure_violations(s: &FinStructure, fp: &PredicateFixpoint) -> [usize; 4] {
    let m = s.len();
    let mut v = [0; 4];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                if fp.black(a, b) && fp.black(b, c) && !fp.black(a, c) {
                    v[0] += 1;
                }
                for t in 0..m {
                    if fp.tri(t, a, b) && fp.tri(t, b, c) && !fp.tri(t, a, c) {
                        v[0] += 1;
                    }
                }
            }
        }
    }
    // (2) a◁ˢ(b∘c) ∧ b◁ˢb′ ∧ c◁ᶜc′ → a◁ˢ(b′∘c′)
    for t in 0..m {
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    if !fp.tri(t, a, s.comp(b, c)) {
                        continue;
                    }
                    for b2 in (0..m).filter(|&b2| fp.tri(t, b, b2)) {
                        for c2 in (0..m).filter(|&c2| fp.tri(c, c, c2)) {
                            if !fp.tri(t, a, s.comp(b2, c2)) {
                                v[1] += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    // (3) d◀(a∘c) ∧ a≤a′ ∧ d◀a′ ∧ c◀c′ → d◀(a′∘c′)
    for d in 0..m {
        for a in 0..m {
            for c in 0..m {
                if !fp.black(d, s.comp(a, c)) {
                    continue;
                }
                for a2 in (0..m).filter(|&a2| s.leq(a, a2) && fp.black(d, a2)) {
                    for c2 in (0..m).filter(|&c2| fp.black(c, c2)) {
                        if !fp.black(d, s.comp(a2, c2)) {
                            v[2] += 1;
                        }
                    }
                }
            }
        }
    }
    // (4) s◀s′ ∧ a◁ˢ′b → a◁ˢb
    for t in 0..m {
        for t2 in (0..m).filter(|&t2| fp.black(t, t2)) {
            for a in 0..m {
                for b in 0..m {
                    if fp.tri(t2, a, b) && !fp.tri(t, a, b) {
                        v[3] += 1;
                    }
                }
            }
        }
    }
    v
}

/// Structures (serialized) violating closure property 3, with totals per property.
fn criterion_5(corpus: &[FinStructure]) -> (Outcome, Vec<String>) {
    let mut totals = [0; 4];
    let mut offenders = Vec::new();
    let sn: Vec<FinStructure> = (2..=4).map(|n| gen_sn(n).unwrap()).collect();
    for s in corpus.iter().chain(&sn) {
        let v = closure_violations(s, &compute_fixpoint(s));
        for (t, x) in totals.iter_mut().zip(v) {
            *t += x;
        }
        if v.iter().any(|&x| x > 0) {
            offenders.push(serialize_structure(s).trim_end().to_owned());
        }
    }
    let detail = format!(
        "violations per property (1)–(4): {totals:?} over {} structures; {} offending structures",
        corpus.len() + sn.len(),
        offenders.len()
    );
    (Outcome { pass: offenders.is_empty(), detail }, offenders)
}

/// Structures (serialized) whose construction violates ◀/◁ soundness.
fn criterion_6(corpus: &[FinStructure]) -> (Outcome, Vec<String>) {
    let mut checked = 0;
    let mut violations = 0;
    let mut offenders = Vec::new();
    for s in corpus {
        if !matches!(decide(s), Ok(Certificate::Representable { .. }) | Err(_)) {
            continue;
        }
        let sp = adjoin_identity(s);
        let fp = compute_fixpoint(&sp);
        let base = build_base(&sp, &fp);
        let th = theta_all(&sp, &fp, &base);
        let doms: Vec<_> = th.iter().map(dom).collect();
        checked += 1;
        let before = violations;
        for (a, b) in fp.black_facts() {
            if !doms[a].is_subset(&doms[b]) {
                violations += 1;
            }
        }
        for (t, a, b) in fp.tri_facts() {
            if !restrict(&th[a], &doms[t]).unwrap().is_subset(&th[b]).unwrap() {
                violations += 1;
            }
        }
        if violations > before {
            offenders.push(serialize_structure(s).trim_end().to_owned());
        }
    }
    let detail = format!("{checked} constructions, {violations} violations in {} structures", offenders.len());
    (Outcome { pass: violations == 0, detail }, offenders)
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let r = law_suite(1, 1000, 6);
    let elapsed = start.elapsed();
    Outcome {
        pass: r.violations.is_empty() && elapsed < Duration::from_secs(30),
        detail: format!("{} trials, {} checks, {} violations ({elapsed:.1?})", r.trials, r.checks, r.violations.len()),
    }
}

fn criterion_8(corpus: &[FinStructure]) -> Outcome {
    let sn2 = gen_sn(2).unwrap();
    let mut mismatches = 0;
    let mut checked = 0;
    for s in corpus.iter().chain(std::iter::once(&sn2)) {
        let fp = compute_fixpoint(s);
        let naive = naive_stages(s);
        let m = s.len();
        checked += 1;
        let black_ok = (0..m).all(|a| (0..m).all(|b| fp.black_stage(a, b) == naive.black[a * m + b]));
        let tri_ok = (0..m).all(|t| {
            (0..m).all(|a| (0..m).all(|b| fp.tri_stage(t, a, b) == naive.tri[(t * m + a) * m + b]))
        });
        if !black_ok || !tri_ok {
            mismatches += 1;
        }
    }
    Outcome { pass: mismatches == 0, detail: format!("{checked} structures, {mismatches} mismatches") }
}

/// The size-3 structures on which the construction is known to break. Same
/// order as the corpus.
const KNOWN_CONSTRUCTION_FAILURES: [&str; 4] = [
    r#"{"elements":["a","b","c"],"leq":[["a","a"],["b","b"],["c","a"],["c","b"],["c","c"]],"comp":{"a":{"a":"a","b":"a","c":"a"},"b":{"a":"a","b":"a","c":"a"},"c":{"a":"a","b":"a","c":"c"}}}"#,
    r#"{"elements":["a","b","c"],"leq":[["a","a"],["b","b"],["c","a"],["c","b"],["c","c"]],"comp":{"a":{"a":"a","b":"a","c":"a"},"b":{"a":"a","b":"a","c":"a"},"c":{"a":"c","b":"c","c":"c"}}}"#,
    r#"{"elements":["a","b","c"],"leq":[["a","a"],["b","a"],["b","b"],["c","a"],["c","b"],["c","c"]],"comp":{"a":{"a":"a","b":"a","c":"a"},"b":{"a":"a","b":"a","c":"a"},"c":{"a":"a","b":"a","c":"c"}}}"#,
    r#"{"elements":["a","b","c"],"leq":[["a","a"],["b","a"],["b","b"],["c","a"],["c","b"],["c","c"]],"comp":{"a":{"a":"a","b":"a","c":"a"},"b":{"a":"a","b":"a","c":"a"},"c":{"a":"c","b":"c","c":"c"}}}"#,
];

/// Six size-3 structures plus gen_sn(2), gen_sn(3), gen_sn(4).
const KNOWN_CLOSURE_OFFENDERS: usize = 9;

fn main() {
    let corpus = desk_corpus();

    let c1 = criterion_1();
    report(1, "S_n family not representable, exact minimal violated stage", &c1);
    let c2 = criterion_2();
    report(2, "S_n size formula", &c2);
    let (c3, broken) = criterion_3(&corpus);
    report(3, "representable certificates verify within the base bound", &c3);
    for s in &broken {
        println!("    construction fails: {s}");
    }
    let c4 = criterion_4(&corpus);
    report(4, "σ never rejects an oracle-representable structure", &c4);
    let (c5, offenders) = criterion_5(&corpus);
    report(5, "closure properties at the fixpoint", &c5);
    for s in &offenders {
        println!("    closure fails: {s}");
    }
    let (c6, unsound) = criterion_6(&corpus);
    report(6, "◀/◁ soundness on constructed relations", &c6);
    for s in &unsound {
        println!("    soundness fails: {s}");
    }
    let c7 = criterion_7();
    report(7, "relation laws, 1000 seeded trials", &c7);
    let c8 = criterion_8(&corpus);
    report(8, "incremental engine matches naive per-stage evaluation", &c8);

    for (n, c) in [(1, &c1), (2, &c2), (4, &c4), (7, &c7), (8, &c8)] {
        assert!(c.pass, "criterion {n} regressed: {}", c.detail);
    }
    // Criteria 3, 5 and 6 stay FAIL; the failing sets must not drift.
    assert_eq!(broken, KNOWN_CONSTRUCTION_FAILURES);
    assert_eq!(unsound, KNOWN_CONSTRUCTION_FAILURES);
    assert_eq!(offenders.len(), KNOWN_CLOSURE_OFFENDERS);
    assert!(
        broken.iter().all(|b| offenders.contains(b)),
        "every construction failure should coincide with a closure failure"
    );
}
