//! Ground truth that does not go through the fixpoint predicates:
//! exhaustive search for concrete representations of tiny structures, and a
//! seeded randomized check of the relation laws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::relcore::{self, Relation};
use crate::repbuilder::verify_relations;
use crate::structure::{validate, Diagnostics, FinStructure};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("structure has {got} elements; the oracle is capped at {cap}")]
    TooManyElements { got: usize, cap: usize },
    #[error("base size {got} exceeds the cap of {cap}")]
    BaseTooLarge { got: usize, cap: usize },
    #[error("structure is invalid: {0:?}")]
    InvalidStructure(Diagnostics),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_elements: usize,
    pub max_base: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits { max_elements: 3, max_base: 3 }
    }
}

/// Hard ceiling: relations over at most 8 points fit one `u64`.
pub const BASE_CEILING: usize = 8;

/// A representation found by search: one relation per element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteRepresentation {
    pub base_size: usize,
    pub rels: Vec<Relation>,
}

/// Relations over `k <= 8` points packed into a `u64`, bit `x*k + y`.
#[derive(Clone, Copy)]
struct Packed {
    k: usize,
}

impl Packed {
    fn row(&self, r: u64, x: usize) -> u64 {
        (r >> (x * self.k)) & ((1u64 << self.k) - 1)
    }

    fn compose(&self, r: u64, s: u64) -> u64 {
        let mut out = 0;
        for x in 0..self.k {
            let mut row = 0;
            let rx = self.row(r, x);
            for z in 0..self.k {
                if rx >> z & 1 == 1 {
                    row |= self.row(s, z);
                }
            }
            out |= row << (x * self.k);
        }
        out
    }

    fn refines(&self, r: u64, s: u64) -> bool {
        (0..self.k).all(|x| {
            let sx = self.row(s, x);
            sx == 0 || {
                let rx = self.row(r, x);
                rx != 0 && rx & !sx == 0
            }
        })
    }

    fn unpack(&self, r: u64) -> Relation {
        let k = self.k;
        Relation::from_pairs(k, (0..k * k).filter(|b| r >> b & 1 == 1).map(|b| (b / k, b % k)))
            .expect("packed pairs lie in the base")
    }
}

/// Depth-first search for a representation over bases `0..=max_base`
/// (`0` only matters for the empty structure and single idempotents).
///
/// Elements are assigned in order of their height in `≤`; candidate relations
/// are tried by increasing pair count, then by packed value. Products of
/// assigned elements are forced, and every partial assignment is pruned on the
/// refinement law, the composition law and injectivity. Finding nothing is
/// not evidence of non-representability.
pub fn brute_force_represent(
    s: &FinStructure,
    limits: OracleLimits,
) -> Result<Option<ConcreteRepresentation>, OracleError> {
    if s.len() > limits.max_elements {
        return Err(OracleError::TooManyElements { got: s.len(), cap: limits.max_elements });
    }
    if limits.max_base > BASE_CEILING {
        return Err(OracleError::BaseTooLarge { got: limits.max_base, cap: BASE_CEILING });
    }
    let diag = validate(s);
    if !diag.is_valid() {
        return Err(OracleError::InvalidStructure(diag));
    }
    if s.is_empty() {
        return Ok(Some(ConcreteRepresentation { base_size: 0, rels: Vec::new() }));
    }
    let order = height_order(s);
    for k in 1..=limits.max_base {
        let packed = Packed { k };
        let mut candidates: Vec<u64> = (0..1u64 << (k * k)).collect();
        candidates.sort_by_key(|r| (r.count_ones(), *r));
        let mut search = Search { s, packed, candidates: &candidates, order: &order, assigned: vec![None; s.len()] };
        if search.dfs() {
            let rels: Vec<Relation> =
                search.assigned.iter().map(|r| packed.unpack(r.expect("complete assignment"))).collect();
            let report = verify_relations(s, &rels).expect("consistent dimensions");
            assert!(report.passed(), "search returned an assignment that fails verification");
            return Ok(Some(ConcreteRepresentation { base_size: k, rels }));
        }
    }
    Ok(None)
}

/// Elements sorted by the length of the longest strict `≤`-chain below them.
fn height_order(s: &FinStructure) -> Vec<usize> {
    let m = s.len();
    let mut height = vec![0usize; m];
    // longest chains; m passes suffice in a partial order
    for _ in 0..m {
        for a in 0..m {
            for b in 0..m {
                if a != b && s.leq(b, a) {
                    height[a] = height[a].max(height[b] + 1);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&a| (height[a], a));
    order
}

struct Search<'a> {
    s: &'a FinStructure,
    packed: Packed,
    candidates: &'a [u64],
    order: &'a [usize],
    assigned: Vec<Option<u64>>,
}

impl Search<'_> {
    fn dfs(&mut self) -> bool {
        let Some(&next) = self.order.iter().find(|&&a| self.assigned[a].is_none()) else {
            return true;
        };
        for &cand in self.candidates {
            let saved = self.assigned.clone();
            self.assigned[next] = Some(cand);
            if self.propagate() && self.consistent() && self.dfs() {
                return true;
            }
            self.assigned = saved;
        }
        false
    }

    /// Forces `a∘b` from assigned `a`, `b`; false on a clash.
    fn propagate(&mut self) -> bool {
        let m = self.s.len();
        loop {
            let mut changed = false;
            for a in 0..m {
                let Some(ra) = self.assigned[a] else { continue };
                for b in 0..m {
                    let Some(rb) = self.assigned[b] else { continue };
                    let prod = self.packed.compose(ra, rb);
                    let c = self.s.comp(a, b);
                    match self.assigned[c] {
                        Some(rc) if rc != prod => return false,
                        Some(_) => {}
                        None => {
                            self.assigned[c] = Some(prod);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn consistent(&self) -> bool {
        let m = self.s.len();
        for a in 0..m {
            let Some(ra) = self.assigned[a] else { continue };
            for b in 0..m {
                let Some(rb) = self.assigned[b] else { continue };
                if self.packed.refines(ra, rb) != self.s.leq(a, b) {
                    return false;
                }
                if a != b && ra == rb {
                    return false;
                }
            }
        }
        true
    }
}

/// A law checked by [`law_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Law {
    ComposeDefinition,
    DemonicComposeDefinition,
    RefinesDefinition,
    JoinDefinition,
    ComposeAssociative,
    DemonicComposeAssociative,
    RefinesReflexive,
    RefinesAntisymmetric,
    RefinesTransitive,
    JoinUpperBound,
    JoinLeast,
    JoinRecovery,
    MeetLowerBound,
    MeetGreatest,
    EmptyIsTop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LawViolation {
    pub law: Law,
    pub trial: usize,
    pub relations: Vec<Relation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LawReport {
    pub trials: usize,
    pub checks: usize,
    pub violations: Vec<LawViolation>,
}

/// The operators under test; swapping one out lets the suite be
/// mutation-tested.
#[derive(Clone, Copy)]
pub struct Operators {
    pub compose: fn(&Relation, &Relation) -> Result<Relation, relcore::RelError>,
    pub demonic_compose: fn(&Relation, &Relation) -> Result<Relation, relcore::RelError>,
    pub refines: fn(&Relation, &Relation) -> Result<bool, relcore::RelError>,
    pub join: fn(&Relation, &Relation) -> Result<Relation, relcore::RelError>,
    pub meet: fn(&Relation, &Relation) -> Result<Relation, relcore::RelError>,
}

impl Default for Operators {
    fn default() -> Self {
        Operators {
            compose: relcore::compose,
            demonic_compose: relcore::demonic_compose,
            refines: relcore::demonic_refines,
            join: relcore::demonic_join,
            meet: relcore::demonic_meet,
        }
    }
}

pub fn law_suite(seed: u64, trials: usize, max_base: usize) -> LawReport {
    law_suite_with(&Operators::default(), seed, trials, max_base)
}

/// Runs `trials` seeded random trials over bases `1..=max_base`; each trial
/// samples fresh relations and checks every [`Law`]. Definitions are checked
/// pointwise against the textbook formulas.
pub fn law_suite_with(ops: &Operators, seed: u64, trials: usize, max_base: usize) -> LawReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LawReport { trials, ..LawReport::default() };
    let max_base = max_base.max(1);
    for trial in 0..trials {
        let n = rng.gen_range(1..=max_base);
        let r = random_relation(&mut rng, n);
        let s = random_relation(&mut rng, n);
        let t = random_relation(&mut rng, n);
        let mut check = |law: Law, ok: bool, rels: &[&Relation]| {
            report.checks += 1;
            if !ok {
                report.violations.push(LawViolation {
                    law,
                    trial,
                    relations: rels.iter().map(|&r| r.clone()).collect(),
                });
            }
        };
        let comp = |x: &Relation, y: &Relation| (ops.compose)(x, y).expect("same base");
        let dcomp = |x: &Relation, y: &Relation| (ops.demonic_compose)(x, y).expect("same base");
        let refines = |x: &Relation, y: &Relation| (ops.refines)(x, y).expect("same base");
        let join = |x: &Relation, y: &Relation| (ops.join)(x, y).expect("same base");
        let meet = |x: &Relation, y: &Relation| (ops.meet)(x, y).expect("same base");

        check(Law::ComposeDefinition, comp(&r, &s) == compose_pointwise(&r, &s), &[&r, &s]);
        check(Law::DemonicComposeDefinition, dcomp(&r, &s) == demonic_compose_pointwise(&r, &s), &[&r, &s]);
        check(Law::RefinesDefinition, refines(&r, &s) == refines_pointwise(&r, &s), &[&r, &s]);
        check(Law::JoinDefinition, join(&r, &s) == join_pointwise(&r, &s), &[&r, &s]);

        check(Law::ComposeAssociative, comp(&comp(&r, &s), &t) == comp(&r, &comp(&s, &t)), &[&r, &s, &t]);
        check(
            Law::DemonicComposeAssociative,
            dcomp(&dcomp(&r, &s), &t) == dcomp(&r, &dcomp(&s, &t)),
            &[&r, &s, &t],
        );

        check(Law::RefinesReflexive, refines(&r, &r), &[&r]);
        check(Law::RefinesAntisymmetric, !(refines(&r, &s) && refines(&s, &r)) || r == s, &[&r, &s]);
        check(
            Law::RefinesTransitive,
            !(refines(&r, &s) && refines(&s, &t)) || refines(&r, &t),
            &[&r, &s, &t],
        );
        // Sparse random triples rarely chain; also try a refinement of r.
        let r_down = coarsen(&mut rng, &r);
        check(
            Law::RefinesTransitive,
            !(refines(&r_down, &r) && refines(&r, &s)) || refines(&r_down, &s),
            &[&r_down, &r, &s],
        );

        let j = join(&r, &s);
        check(Law::JoinUpperBound, refines(&r, &j) && refines(&s, &j), &[&r, &s]);
        for upper in [t.clone(), Relation::empty(n), join(&j, &t)] {
            check(
                Law::JoinLeast,
                !(refines(&r, &upper) && refines(&s, &upper)) || refines(&j, &upper),
                &[&r, &s, &upper],
            );
        }
        check(Law::JoinRecovery, refines(&r, &s) == (j == s), &[&r, &s]);
        check(Law::JoinRecovery, refines(&r_down, &r) == (join(&r_down, &r) == r), &[&r_down, &r]);

        let rs = relcore::saturate_infinity(&r);
        let ss = relcore::saturate_infinity(&s);
        let mt = meet(&rs, &ss);
        check(Law::MeetLowerBound, refines(&mt, &rs) && refines(&mt, &ss), &[&rs, &ss]);
        let mut lowers = vec![random_relation(&mut rng, n + 1), coarsen(&mut rng, &mt)];
        lowers.push(relcore::saturate_infinity(&t));
        for lower in &lowers {
            check(
                Law::MeetGreatest,
                !(refines(lower, &rs) && refines(lower, &ss)) || refines(lower, &mt),
                &[&rs, &ss, lower],
            );
        }

        check(Law::EmptyIsTop, refines(&r, &Relation::empty(n)), &[&r]);
    }
    report
}

fn random_relation(rng: &mut ChaCha8Rng, n: usize) -> Relation {
    let density: f64 = rng.gen_range(0.05..0.6);
    let mut r = Relation::empty(n);
    for x in 0..n {
        for y in 0..n {
            if rng.gen_bool(density) {
                r.insert(x, y).expect("in range");
            }
        }
    }
    r
}

/// A relation below `r`: adds pairs from new sources and extra targets on
/// sources outside `dom(r)` only, so it refines to `r` by construction.
fn coarsen(rng: &mut ChaCha8Rng, r: &Relation) -> Relation {
    let n = r.base_size();
    let mut out = r.clone();
    for x in 0..n {
        if !r.has_successor(x) && rng.gen_bool(0.5) {
            let y = rng.gen_range(0..n);
            out.insert(x, y).expect("in range");
        }
    }
    out
}

fn compose_pointwise(r: &Relation, s: &Relation) -> Relation {
    let n = r.base_size();
    let pairs = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y)))
        .filter(|&(x, y)| (0..n).any(|z| r.contains(x, z) && s.contains(z, y)));
    Relation::from_pairs(n, pairs).expect("in range")
}

fn in_dom(r: &Relation, x: usize) -> bool {
    (0..r.base_size()).any(|y| r.contains(x, y))
}

fn demonic_compose_pointwise(r: &Relation, s: &Relation) -> Relation {
    let n = r.base_size();
    let angelic = compose_pointwise(r, s);
    let pairs = angelic
        .pairs()
        .filter(|&(x, _)| (0..n).all(|z| !r.contains(x, z) || in_dom(s, z)))
        .collect::<Vec<_>>();
    Relation::from_pairs(n, pairs).expect("in range")
}

fn refines_pointwise(r: &Relation, s: &Relation) -> bool {
    let n = r.base_size();
    let dom_ok = (0..n).all(|x| !in_dom(s, x) || in_dom(r, x));
    let incl = (0..n).all(|x| !in_dom(s, x) || (0..n).all(|y| !r.contains(x, y) || s.contains(x, y)));
    dom_ok && incl
}

fn join_pointwise(r: &Relation, s: &Relation) -> Relation {
    let n = r.base_size();
    let pairs = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y)))
        .filter(|&(x, y)| (r.contains(x, y) || s.contains(x, y)) && in_dom(r, x) && in_dom(s, x));
    Relation::from_pairs(n, pairs).expect("in range")
}
