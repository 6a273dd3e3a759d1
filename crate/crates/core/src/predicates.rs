//! Staged least fixpoint of the domain-inclusion predicate `◀` and the
//! restricted-inclusion predicates `◁ˢ`.
//!
//! Stage `0` is given directly by the order and composition tables:
//!
//! * `a ◀₀ b` iff `a ≥ b` or `a ≥ b∘c` for some `c`;
//! * `a ◁ˢ₀ b` iff `a ≤ b` and `s = b`.
//!
//! Stage `n+1` applies each recursive clause exactly once to the stage-`n`
//! facts:
//!
//! * `a ◀ₙ₊₁ b` from `a ◁ᵃₙ b`, from `a ◀ₙ c ◀ₙ b`, or from `a = d∘f`,
//!   `f ◀ₙ f'`, `b = d∘f'`;
//! * `a ◁ˢₙ₊₁ b` from `a ◁ˢₙ c ◁ˢₙ b`, from `a = c∘d`, `c ◁ˢₙ c'`,
//!   `d ◁ᵈₙ d'`, `b = c'∘d'`, or from `a ◁ˢ'ₙ b` and `s ◀ₙ s'`.
//!
//! The stage sets grow monotonically (both predicates are reflexive where it
//! matters), so the engine evaluates semi-naively: a round only considers
//! clause instances with at least one premise that first appeared in the
//! previous round. This yields exactly the same stage indices as recomputing
//! every stage from scratch (see [`reference`]).

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::bits::{self, BitMatrix};
use crate::structure::FinStructure;

const NO_STAGE: u16 = u16::MAX;

/// Largest stage index the engine can record.
pub const MAX_STAGE: u32 = NO_STAGE as u32 - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixpointError {
    #[error("fixpoint tables need {required_mb} MB but the budget is {limit_mb} MB")]
    MemoryBudget { required_mb: u64, limit_mb: u64 },
    #[error("fixpoint did not stabilise within {MAX_STAGE} stages")]
    TooManyStages,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExplainError {
    #[error("{0} does not hold")]
    NotDerivable(String),
    #[error("element index {0} out of range")]
    OutOfRange(usize),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FixpointOptions {
    /// Upper bound on the memory used by the fixpoint tables, in bytes.
    pub mem_limit_bytes: Option<u64>,
}

/// Estimated peak bytes used by [`compute_fixpoint_with`] for `m` elements.
pub fn estimated_bytes(m: usize) -> u64 {
    let m = m as u64;
    let cube = m * m * m;
    // stage cube (u16) + tri, delta, new and two image tables (bits)
    cube * 2 + cube * 5 / 8 + m * m * 3
}

/// A single predicate fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fact {
    /// `a ◀ b`
    Black { a: usize, b: usize },
    /// `a ◁ˢ b`
    Tri { s: usize, a: usize, b: usize },
}

impl Fact {
    pub fn display<'a>(&'a self, st: &'a FinStructure) -> impl fmt::Display + 'a {
        FactDisplay { fact: self, st }
    }

    fn elements(&self) -> Vec<usize> {
        match *self {
            Fact::Black { a, b } => vec![a, b],
            Fact::Tri { s, a, b } => vec![s, a, b],
        }
    }
}

struct FactDisplay<'a> {
    fact: &'a Fact,
    st: &'a FinStructure,
}

impl fmt::Display for FactDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self.fact {
            Fact::Black { a, b } => write!(f, "{}◀{}", self.st.name(a), self.st.name(b)),
            Fact::Tri { s, a, b } => {
                write!(f, "{}◁[{}]{}", self.st.name(a), self.st.name(s), self.st.name(b))
            }
        }
    }
}

/// Parses `a◀b` (or `a<<b`) and `a◁[s]b` (or `a<|[s]b`).
pub fn parse_fact(st: &FinStructure, text: &str) -> Result<Fact, String> {
    let lookup = |n: &str| st.index_of(n.trim()).ok_or_else(|| format!("unknown element `{}`", n.trim()));
    for tri in ["◁[", "<|["] {
        if let Some((a, rest)) = text.split_once(tri) {
            let (s, b) = rest.split_once(']').ok_or_else(|| format!("missing `]` in `{text}`"))?;
            return Ok(Fact::Tri { s: lookup(s)?, a: lookup(a)?, b: lookup(b)? });
        }
    }
    for black in ["◀", "<<"] {
        if let Some((a, b)) = text.split_once(black) {
            return Ok(Fact::Black { a: lookup(a)?, b: lookup(b)? });
        }
    }
    Err(format!("cannot parse fact `{text}`; expected `a◀b` or `a◁[s]b`"))
}

/// Stabilised `◀` and `◁` together with the stage at which each fact first
/// holds.
#[derive(Clone)]
pub struct PredicateFixpoint {
    m: usize,
    black: BitMatrix,
    tri: Vec<BitMatrix>,
    black_stage: Vec<u16>,
    tri_stage: Vec<u16>,
    last_stage: u32,
}

impl fmt::Debug for PredicateFixpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredicateFixpoint")
            .field("m", &self.m)
            .field("black", &self.black.count_ones())
            .field("tri", &self.tri.iter().map(BitMatrix::count_ones).sum::<usize>())
            .field("last_stage", &self.last_stage)
            .finish()
    }
}

fn stage_of(raw: u16) -> Option<u32> {
    (raw != NO_STAGE).then_some(raw as u32)
}

impl PredicateFixpoint {
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    #[inline]
    pub fn black(&self, a: usize, b: usize) -> bool {
        self.black.get(a, b)
    }

    #[inline]
    pub fn tri(&self, s: usize, a: usize, b: usize) -> bool {
        self.tri[s].get(a, b)
    }

    #[inline]
    pub fn black_stage(&self, a: usize, b: usize) -> Option<u32> {
        stage_of(self.black_stage[a * self.m + b])
    }

    #[inline]
    pub fn tri_stage(&self, s: usize, a: usize, b: usize) -> Option<u32> {
        stage_of(self.tri_stage[(s * self.m + a) * self.m + b])
    }

    /// Largest first-derivation stage; stage `last_stage + 1` adds nothing.
    pub fn last_stage(&self) -> u32 {
        self.last_stage
    }

    pub fn black_count(&self) -> usize {
        self.black.count_ones()
    }

    pub fn holds(&self, fact: Fact) -> bool {
        self.stage(fact).is_some()
    }

    pub fn stage(&self, fact: Fact) -> Option<u32> {
        match fact {
            Fact::Black { a, b } => self.black_stage(a, b),
            Fact::Tri { s, a, b } => self.tri_stage(s, a, b),
        }
    }

    /// Bounds-checked lookups.
    pub fn holds_black(&self, a: usize, b: usize) -> Result<bool, ExplainError> {
        self.check(&[a, b])?;
        Ok(self.black(a, b))
    }

    pub fn holds_tri(&self, s: usize, a: usize, b: usize) -> Result<bool, ExplainError> {
        self.check(&[s, a, b])?;
        Ok(self.tri(s, a, b))
    }

    pub fn black_stage_checked(&self, a: usize, b: usize) -> Result<Option<u32>, ExplainError> {
        self.check(&[a, b])?;
        Ok(self.black_stage(a, b))
    }

    pub fn tri_stage_checked(&self, s: usize, a: usize, b: usize) -> Result<Option<u32>, ExplainError> {
        self.check(&[s, a, b])?;
        Ok(self.tri_stage(s, a, b))
    }

    fn check(&self, idx: &[usize]) -> Result<(), ExplainError> {
        match idx.iter().find(|&&x| x >= self.m) {
            Some(&x) => Err(ExplainError::OutOfRange(x)),
            None => Ok(()),
        }
    }

    /// Black facts `(a, b)` in row-major order.
    pub fn black_facts(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.black.ones()
    }

    /// Tri facts `(s, a, b)` ordered by `s`, then `a`, then `b`.
    pub fn tri_facts(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.tri.iter().enumerate().flat_map(|(s, plane)| plane.ones().map(move |(a, b)| (s, a, b)))
    }
}

pub fn compute_fixpoint(st: &FinStructure) -> PredicateFixpoint {
    compute_fixpoint_with(st, &FixpointOptions::default())
        .expect("fixpoint without a memory budget cannot fail")
}

pub fn compute_fixpoint_with(
    st: &FinStructure,
    opts: &FixpointOptions,
) -> Result<PredicateFixpoint, FixpointError> {
    let m = st.len();
    if let Some(limit) = opts.mem_limit_bytes {
        let required = estimated_bytes(m);
        if required > limit {
            const MB: u64 = 1 << 20;
            return Err(FixpointError::MemoryBudget {
                required_mb: required.div_ceil(MB),
                limit_mb: limit / MB,
            });
        }
    }
    Engine::new(st).run()
}

struct Engine<'a> {
    st: &'a FinStructure,
    m: usize,
    black: BitMatrix,
    tri: Vec<BitMatrix>,
    d_black: BitMatrix,
    d_tri: Vec<BitMatrix>,
    black_stage: Vec<u16>,
    tri_stage: Vec<u16>,
}

impl<'a> Engine<'a> {
    fn new(st: &'a FinStructure) -> Self {
        let m = st.len();
        let mut black = BitMatrix::square(m);
        let mut tri = vec![BitMatrix::square(m); m];
        for a in 0..m {
            for b in 0..m {
                if st.leq(b, a) || (0..m).any(|c| st.leq(st.comp(b, c), a)) {
                    black.set(a, b);
                }
                if st.leq(a, b) {
                    tri[b].set(a, b);
                }
            }
        }
        let mut engine = Engine {
            st,
            m,
            d_black: black.clone(),
            d_tri: tri.clone(),
            black,
            tri,
            black_stage: vec![NO_STAGE; m * m],
            tri_stage: vec![NO_STAGE; m * m * m],
        };
        engine.record(0);
        engine
    }

    /// Stamps the current delta with `stage`.
    fn record(&mut self, stage: u16) {
        let m = self.m;
        for (a, b) in self.d_black.ones() {
            self.black_stage[a * m + b] = stage;
        }
        for (s, plane) in self.d_tri.iter().enumerate() {
            for (a, b) in plane.ones() {
                self.tri_stage[(s * m + a) * m + b] = stage;
            }
        }
    }

    fn run(mut self) -> Result<PredicateFixpoint, FixpointError> {
        let mut stage: u32 = 0;
        loop {
            let (mut new_black, mut new_tri) = self.round();
            new_black.and_not_assign(&self.black);
            for (plane, old) in new_tri.iter_mut().zip(&self.tri) {
                plane.and_not_assign(old);
            }
            if new_black.is_zero() && new_tri.iter().all(BitMatrix::is_zero) {
                break;
            }
            stage += 1;
            if stage > MAX_STAGE {
                return Err(FixpointError::TooManyStages);
            }
            self.black.or_assign(&new_black);
            for (plane, new) in self.tri.iter_mut().zip(&new_tri) {
                plane.or_assign(new);
            }
            self.d_black = new_black;
            self.d_tri = new_tri;
            self.record(stage as u16);
        }
        Ok(PredicateFixpoint {
            m: self.m,
            black: self.black,
            tri: self.tri,
            black_stage: self.black_stage,
            tri_stage: self.tri_stage,
            last_stage: stage,
        })
    }

    /// One application of every clause with at least one premise in the delta.
    fn round(&self) -> (BitMatrix, Vec<BitMatrix>) {
        let (m, st) = (self.m, self.st);
        let (black, d_black) = (&self.black, &self.d_black);
        let (tri, d_tri) = (&self.tri, &self.d_tri);

        let mut nb = BitMatrix::square(m);
        for a in 0..m {
            // a ◁ᵃ b
            nb.or_row_from(a, &d_tri[a], a);
            // a ◀ c ◀ b
            for c in d_black.row_ones(a) {
                nb.or_row_from(a, black, c);
            }
            for c in black.row_ones(a) {
                nb.or_row_from(a, d_black, c);
            }
        }
        // a = d∘f, f ◀ f', b = d∘f'
        for (f, f2) in d_black.ones() {
            for d in 0..m {
                nb.set(st.comp(d, f), st.comp(d, f2));
            }
        }

        // Images {c'∘d' : d ◁ᵈ d'} keyed by (c', d), over all and over new facts.
        let delta_ds: Vec<usize> = (0..m).filter(|&d| !d_tri[d].row_is_zero(d)).collect();
        let mut img_all = BitMatrix::new(m * m, m);
        let mut img_new = BitMatrix::new(m * m, m);
        for c2 in 0..m {
            for d in 0..m {
                for d2 in tri[d].row_ones(d) {
                    img_all.set(c2 * m + d, st.comp(c2, d2));
                }
            }
            for &d in &delta_ds {
                for d2 in d_tri[d].row_ones(d) {
                    img_new.set(c2 * m + d, st.comp(c2, d2));
                }
            }
        }

        let mut nt = vec![BitMatrix::square(m); m];
        nt.par_iter_mut().enumerate().for_each(|(s, out)| {
            let (plane, d_plane) = (&tri[s], &d_tri[s]);
            for a in 0..m {
                // a ◁ˢ c ◁ˢ b
                for c in d_plane.row_ones(a) {
                    out.or_row_from(a, plane, c);
                }
                for c in plane.row_ones(a) {
                    out.or_row_from(a, d_plane, c);
                }
            }
            // a = c∘d, c ◁ˢ c', d ◁ᵈ d', b = c'∘d'
            for c in 0..m {
                let d_row = d_plane.row(c);
                for c2 in plane.row_ones(c) {
                    if bits::test_bit(d_row, c2) {
                        for d in 0..m {
                            out.or_row_from(st.comp(c, d), &img_all, c2 * m + d);
                        }
                    } else {
                        for &d in &delta_ds {
                            out.or_row_from(st.comp(c, d), &img_new, c2 * m + d);
                        }
                    }
                }
            }
            // a ◁ˢ' b, s ◀ s'
            for s2 in d_black.row_ones(s) {
                out.or_assign(&tri[s2]);
            }
            for s2 in black.row_ones(s) {
                out.or_assign(&d_tri[s2]);
            }
        });
        (nb, nt)
    }
}

/// Which clause justifies a fact, with its existential witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    /// `a ≥ b` (stage 0).
    Geq,
    /// `a ≥ b∘c` (stage 0).
    GeqComp { c: usize },
    /// `a ≤ b` and `s = b` (stage 0).
    Leq,
    /// `a ◀ b` from `a ◁ᵃ b`.
    FromTri,
    /// `a ◀ c ◀ b`.
    BlackTrans { c: usize },
    /// `a = d∘f`, `f ◀ f'`, `b = d∘f'`.
    LeftFactor { d: usize, f: usize, f2: usize },
    /// `a ◁ˢ c ◁ˢ b`.
    TriTrans { c: usize },
    /// `a = c∘d`, `c ◁ˢ c'`, `d ◁ᵈ d'`, `b = c'∘d'`.
    Factor { c: usize, c2: usize, d: usize, d2: usize },
    /// `a ◁ˢ' b` and `s ◀ s'`.
    Weaken { s2: usize },
}

impl Clause {
    pub fn name(&self) -> &'static str {
        match self {
            Clause::Geq => "a≥b",
            Clause::GeqComp { .. } => "a≥b∘c",
            Clause::Leq => "a≤b∧s=b",
            Clause::FromTri => "a◁[a]b",
            Clause::BlackTrans { .. } => "transitivity",
            Clause::LeftFactor { .. } => "left-factor",
            Clause::TriTrans { .. } => "transitivity",
            Clause::Factor { .. } => "factor",
            Clause::Weaken { .. } => "weaken",
        }
    }

    fn key(&self) -> &'static str {
        match self {
            Clause::Geq => "geq",
            Clause::GeqComp { .. } => "geq_comp",
            Clause::Leq => "leq",
            Clause::FromTri => "from_tri",
            Clause::BlackTrans { .. } => "black_trans",
            Clause::LeftFactor { .. } => "left_factor",
            Clause::TriTrans { .. } => "tri_trans",
            Clause::Factor { .. } => "factor",
            Clause::Weaken { .. } => "weaken",
        }
    }

    fn witnesses(&self) -> Vec<(&'static str, usize)> {
        match *self {
            Clause::Geq | Clause::Leq | Clause::FromTri => vec![],
            Clause::GeqComp { c } | Clause::BlackTrans { c } | Clause::TriTrans { c } => vec![("c", c)],
            Clause::LeftFactor { d, f, f2 } => vec![("d", d), ("f", f), ("f2", f2)],
            Clause::Factor { c, c2, d, d2 } => vec![("c", c), ("c2", c2), ("d", d), ("d2", d2)],
            Clause::Weaken { s2 } => vec![("s2", s2)],
        }
    }

    fn is_base(&self) -> bool {
        matches!(self, Clause::Geq | Clause::GeqComp { .. } | Clause::Leq)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("{0}")]
    Invalid(String),
}

/// A derivation tree: `fact` holds at `stage` by `clause` from `premises`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub fact: Fact,
    pub stage: u32,
    pub clause: Clause,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    /// Premise facts a clause demands for `fact`, or `None` if the clause
    /// does not apply to this kind of fact or its side conditions fail.
    fn expected_premises(st: &FinStructure, fact: Fact, clause: Clause) -> Option<Vec<Fact>> {
        let m = st.len();
        if clause.witnesses().iter().any(|&(_, w)| w >= m) || fact.elements().iter().any(|&x| x >= m) {
            return None;
        }
        match (fact, clause) {
            (Fact::Black { a, b }, Clause::Geq) => st.leq(b, a).then(Vec::new),
            (Fact::Black { a, b }, Clause::GeqComp { c }) => st.leq(st.comp(b, c), a).then(Vec::new),
            (Fact::Tri { s, a, b }, Clause::Leq) => (st.leq(a, b) && s == b).then(Vec::new),
            (Fact::Black { a, b }, Clause::FromTri) => Some(vec![Fact::Tri { s: a, a, b }]),
            (Fact::Black { a, b }, Clause::BlackTrans { c }) => {
                Some(vec![Fact::Black { a, b: c }, Fact::Black { a: c, b }])
            }
            (Fact::Black { a, b }, Clause::LeftFactor { d, f, f2 }) => (st.comp(d, f) == a
                && st.comp(d, f2) == b)
                .then(|| vec![Fact::Black { a: f, b: f2 }]),
            (Fact::Tri { s, a, b }, Clause::TriTrans { c }) => {
                Some(vec![Fact::Tri { s, a, b: c }, Fact::Tri { s, a: c, b }])
            }
            (Fact::Tri { s, a, b }, Clause::Factor { c, c2, d, d2 }) => (st.comp(c, d) == a
                && st.comp(c2, d2) == b)
                .then(|| vec![Fact::Tri { s, a: c, b: c2 }, Fact::Tri { s: d, a: d, b: d2 }]),
            (Fact::Tri { s, a, b }, Clause::Weaken { s2 }) => {
                Some(vec![Fact::Tri { s: s2, a, b }, Fact::Black { a: s, b: s2 }])
            }
            _ => None,
        }
    }

    /// Checks every node against the clause definitions and the structure's
    /// tables, independently of any fixpoint.
    pub fn replay(&self, st: &FinStructure) -> Result<(), ReplayError> {
        let fail = |why: &str| {
            Err(ReplayError::Invalid(format!("{} by {}: {why}", self.fact.display(st), self.clause.name())))
        };
        let Some(expected) = Self::expected_premises(st, self.fact, self.clause) else {
            return fail("clause does not apply");
        };
        if self.clause.is_base() != (self.stage == 0) {
            return fail("base clauses are exactly the stage-0 ones");
        }
        let got: Vec<Fact> = self.premises.iter().map(|p| p.fact).collect();
        if got != expected {
            return fail("premises do not match the clause");
        }
        for p in &self.premises {
            if p.stage >= self.stage {
                return fail("premise stage is not below the conclusion stage");
            }
            p.replay(st)?;
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    /// Indented text rendering, one node per line.
    pub fn render(&self, st: &FinStructure) -> String {
        let mut out = String::new();
        self.render_into(st, 0, &mut out);
        out
    }

    fn render_into(&self, st: &FinStructure, depth: usize, out: &mut String) {
        use fmt::Write;
        let wit: Vec<String> =
            self.clause.witnesses().iter().map(|(k, v)| format!("{k}={}", st.name(*v))).collect();
        let _ = write!(out, "{:indent$}{}  [stage {}] {}", "", self.fact.display(st), self.stage, self.clause.name(), indent = depth * 2);
        if !wit.is_empty() {
            let _ = write!(out, " ({})", wit.join(", "));
        }
        out.push('\n');
        for p in &self.premises {
            p.render_into(st, depth + 1, out);
        }
    }

    pub fn to_json(&self, st: &FinStructure) -> Value {
        let fact = match self.fact {
            Fact::Black { a, b } => json!({ "pred": "black", "a": st.name(a), "b": st.name(b) }),
            Fact::Tri { s, a, b } => {
                json!({ "pred": "tri", "s": st.name(s), "a": st.name(a), "b": st.name(b) })
            }
        };
        let witness: serde_json::Map<String, Value> = self
            .clause
            .witnesses()
            .into_iter()
            .map(|(k, v)| (k.to_owned(), Value::from(st.name(v))))
            .collect();
        json!({
            "fact": fact,
            "stage": self.stage,
            "clause": self.clause.key(),
            "witness": witness,
            "premises": self.premises.iter().map(|p| p.to_json(st)).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(value: &Value, st: &FinStructure) -> Result<Derivation, ReplayError> {
        let bad = |what: &str| ReplayError::Invalid(format!("malformed derivation: {what}"));
        let name = |v: Option<&Value>, what: &str| -> Result<usize, ReplayError> {
            let n = v.and_then(Value::as_str).ok_or_else(|| bad(what))?;
            st.index_of(n).ok_or_else(|| bad(&format!("unknown element `{n}`")))
        };
        let fact_v = value.get("fact").ok_or_else(|| bad("fact"))?;
        let fact = match fact_v.get("pred").and_then(Value::as_str) {
            Some("black") => Fact::Black { a: name(fact_v.get("a"), "a")?, b: name(fact_v.get("b"), "b")? },
            Some("tri") => Fact::Tri {
                s: name(fact_v.get("s"), "s")?,
                a: name(fact_v.get("a"), "a")?,
                b: name(fact_v.get("b"), "b")?,
            },
            _ => return Err(bad("pred")),
        };
        let stage = value.get("stage").and_then(Value::as_u64).ok_or_else(|| bad("stage"))? as u32;
        let w = value.get("witness").ok_or_else(|| bad("witness"))?;
        let wn = |k: &str| name(w.get(k), k);
        let clause = match value.get("clause").and_then(Value::as_str) {
            Some("geq") => Clause::Geq,
            Some("geq_comp") => Clause::GeqComp { c: wn("c")? },
            Some("leq") => Clause::Leq,
            Some("from_tri") => Clause::FromTri,
            Some("black_trans") => Clause::BlackTrans { c: wn("c")? },
            Some("left_factor") => Clause::LeftFactor { d: wn("d")?, f: wn("f")?, f2: wn("f2")? },
            Some("tri_trans") => Clause::TriTrans { c: wn("c")? },
            Some("factor") => Clause::Factor { c: wn("c")?, c2: wn("c2")?, d: wn("d")?, d2: wn("d2")? },
            Some("weaken") => Clause::Weaken { s2: wn("s2")? },
            _ => return Err(bad("clause")),
        };
        let premises = value
            .get("premises")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("premises"))?
            .iter()
            .map(|p| Derivation::from_json(p, st))
            .collect::<Result<_, _>>()?;
        Ok(Derivation { fact, stage, clause, premises })
    }
}

/// Reconstructs a derivation of `fact` from the stage tables.
///
/// A fact first holding at stage `n > 0` is justified by a recursive clause
/// over facts of stage at most `n - 1`. Among the candidate clause instances
/// the one with the lowest maximal premise stage wins; ties go to the clause
/// listed first in the definition, then to the first witness in index order.
pub fn explain(st: &FinStructure, fp: &PredicateFixpoint, fact: Fact) -> Result<Derivation, ExplainError> {
    fp.check(&fact.elements())?;
    if !fp.holds(fact) {
        return Err(ExplainError::NotDerivable(fact.display(st).to_string()));
    }
    let mut memo = HashMap::new();
    Ok(explain_rec(st, fp, fact, &mut memo))
}

fn explain_rec(
    st: &FinStructure,
    fp: &PredicateFixpoint,
    fact: Fact,
    memo: &mut HashMap<Fact, Derivation>,
) -> Derivation {
    if let Some(d) = memo.get(&fact) {
        return d.clone();
    }
    let stage = fp.stage(fact).expect("explained facts hold");
    let m = st.len();
    let (clause, premises) = if stage == 0 {
        let clause = match fact {
            Fact::Black { a, b } if st.leq(b, a) => Clause::Geq,
            Fact::Black { a, b } => Clause::GeqComp {
                c: (0..m).find(|&c| st.leq(st.comp(b, c), a)).expect("stage-0 black fact"),
            },
            Fact::Tri { .. } => Clause::Leq,
        };
        (clause, Vec::new())
    } else {
        best_instance(st, fp, fact, stage - 1)
    };
    let premises = premises.into_iter().map(|p| explain_rec(st, fp, p, memo)).collect();
    let d = Derivation { fact, stage, clause, premises };
    memo.insert(fact, d.clone());
    d
}

/// Lowest-cost clause instance whose premises all hold by stage `limit`.
fn best_instance(st: &FinStructure, fp: &PredicateFixpoint, fact: Fact, limit: u32) -> (Clause, Vec<Fact>) {
    let m = st.len();
    let mut best: Option<(u32, Clause, Vec<Fact>)> = None;
    let mut offer = |clause: Clause, premises: Vec<Fact>| {
        let mut worst = 0;
        for p in &premises {
            match fp.stage(*p) {
                Some(k) if k <= limit => worst = worst.max(k),
                _ => return,
            }
        }
        if best.as_ref().is_none_or(|(w, _, _)| worst < *w) {
            best = Some((worst, clause, premises));
        }
    };
    let within = |f: Fact| fp.stage(f).is_some_and(|k| k <= limit);
    match fact {
        Fact::Black { a, b } => {
            offer(Clause::FromTri, vec![Fact::Tri { s: a, a, b }]);
            for c in 0..m {
                offer(Clause::BlackTrans { c }, vec![Fact::Black { a, b: c }, Fact::Black { a: c, b }]);
            }
            for d in 0..m {
                for f in (0..m).filter(|&f| st.comp(d, f) == a) {
                    for f2 in (0..m).filter(|&f2| st.comp(d, f2) == b) {
                        offer(Clause::LeftFactor { d, f, f2 }, vec![Fact::Black { a: f, b: f2 }]);
                    }
                }
            }
        }
        Fact::Tri { s, a, b } => {
            for c in 0..m {
                offer(Clause::TriTrans { c }, vec![Fact::Tri { s, a, b: c }, Fact::Tri { s, a: c, b }]);
            }
            for c in 0..m {
                for d in (0..m).filter(|&d| st.comp(c, d) == a) {
                    let d_ok: Vec<usize> =
                        (0..m).filter(|&d2| within(Fact::Tri { s: d, a: d, b: d2 })).collect();
                    if d_ok.is_empty() {
                        continue;
                    }
                    for c2 in (0..m).filter(|&c2| within(Fact::Tri { s, a: c, b: c2 })) {
                        for &d2 in d_ok.iter().filter(|&&d2| st.comp(c2, d2) == b) {
                            offer(
                                Clause::Factor { c, c2, d, d2 },
                                vec![Fact::Tri { s, a: c, b: c2 }, Fact::Tri { s: d, a: d, b: d2 }],
                            );
                        }
                    }
                }
            }
            for s2 in 0..m {
                offer(Clause::Weaken { s2 }, vec![Fact::Tri { s: s2, a, b }, Fact::Black { a: s, b: s2 }]);
            }
        }
    }
    let (_, clause, premises) = best.expect("a fact above stage 0 has a recursive justification");
    (clause, premises)
}

/// Straightforward per-stage evaluation used to cross-check the engine.
///
/// Every stage is recomputed from scratch by quantifying over all witnesses
/// of every clause, exactly as the clauses are written, without assuming the
/// stage sets are monotone.
pub mod reference {
    use crate::structure::FinStructure;

    /// First stage of every black fact (`a*m + b`) and tri fact
    /// (`(s*m + a)*m + b`), `None` where the fact never holds.
    #[derive(Debug, Clone, PartialEq, Eq)]
    pub struct NaiveStages {
        pub m: usize,
        pub black: Vec<Option<u32>>,
        pub tri: Vec<Option<u32>>,
        /// The stage sets computed, from stage 0 to the first repeated one.
        pub black_sets: Vec<Vec<bool>>,
        pub tri_sets: Vec<Vec<bool>>,
    }

    pub fn naive_stages(st: &FinStructure) -> NaiveStages {
        let m = st.len();
        let bi = |a: usize, b: usize| a * m + b;
        let ti = |s: usize, a: usize, b: usize| (s * m + a) * m + b;

        let mut b0 = vec![false; m * m];
        let mut t0 = vec![false; m * m * m];
        for a in 0..m {
            for b in 0..m {
                b0[bi(a, b)] = st.leq(b, a) || (0..m).any(|c| st.leq(st.comp(b, c), a));
                for s in 0..m {
                    t0[ti(s, a, b)] = st.leq(a, b) && s == b;
                }
            }
        }
        let mut black_sets = vec![b0];
        let mut tri_sets = vec![t0];
        loop {
            let bn = black_sets.last().unwrap();
            let tn = tri_sets.last().unwrap();
            let mut b1 = vec![false; m * m];
            let mut t1 = vec![false; m * m * m];
            for a in 0..m {
                for b in 0..m {
                    let by_tri = tn[ti(a, a, b)];
                    let by_trans = (0..m).any(|c| bn[bi(a, c)] && bn[bi(c, b)]);
                    let by_factor = (0..m).any(|d| {
                        (0..m).any(|f| {
                            st.comp(d, f) == a
                                && (0..m).any(|f2| bn[bi(f, f2)] && st.comp(d, f2) == b)
                        })
                    });
                    b1[bi(a, b)] = by_tri || by_trans || by_factor;
                }
            }
            for s in 0..m {
                for a in 0..m {
                    for b in 0..m {
                        let by_trans = (0..m).any(|c| tn[ti(s, a, c)] && tn[ti(s, c, b)]);
                        let by_factor = || {
                            (0..m).any(|c| {
                                (0..m).any(|d| {
                                    st.comp(c, d) == a
                                        && (0..m).any(|c2| {
                                            tn[ti(s, c, c2)]
                                                && (0..m).any(|d2| {
                                                    tn[ti(d, d, d2)] && st.comp(c2, d2) == b
                                                })
                                        })
                                })
                            })
                        };
                        let by_weaken = || (0..m).any(|s2| tn[ti(s2, a, b)] && bn[bi(s, s2)]);
                        t1[ti(s, a, b)] = by_trans || by_factor() || by_weaken();
                    }
                }
            }
            if &b1 == bn && &t1 == tn {
                break;
            }
            black_sets.push(b1);
            tri_sets.push(t1);
        }
        let first = |sets: &[Vec<bool>], i: usize| sets.iter().position(|set| set[i]).map(|n| n as u32);
        NaiveStages {
            m,
            black: (0..m * m).map(|i| first(&black_sets, i)).collect(),
            tri: (0..m * m * m).map(|i| first(&tri_sets, i)).collect(),
            black_sets,
            tri_sets,
        }
    }
}
