//! Explicit representation of a structure satisfying σ as a set of binary
//! relations, and a checker for any claimed representation.
//!
//! The base is built from the identity-adjoined structure `S'` and its
//! fixpoint: one *initial* point per pair `d ◀ s`, one *following* point per
//! element and one *branch* point per element. For `a` in `S`, `(x, y)` is in
//! the relation of `a` iff
//!
//! 1. `y` is not initial,
//! 2. `x` branch implies `y` branch,
//! 3. `δ(x) ◀ a∘δ(y)`, and
//! 4. if `x` is initial or following and `y` is following,
//!    `λ(x) ◁^δ(x) a∘λ(y)`.

use std::fmt::Write;

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::predicates::{compute_fixpoint_with, FixpointError, FixpointOptions, PredicateFixpoint};
use crate::relcore::{compose, demonic_refines, RelError, Relation};
use crate::structure::{adjoin_identity, validate, Diagnostics, FinStructure};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RepError {
    #[error("structure is not a partially ordered semigroup: {0:?}")]
    InvalidStructure(Diagnostics),
    #[error("structure violates sigma at ({a}, {b})")]
    SigmaViolated { a: String, b: String },
    #[error("representation maps {got} elements but the structure has {expected}")]
    Coverage { expected: usize, got: usize },
    #[error(transparent)]
    Relation(#[from] RelError),
    #[error(transparent)]
    Fixpoint(#[from] FixpointError),
    #[error("invalid representation json: {0}")]
    Json(String),
}

/// A point of the constructed base. Element indices refer to `S'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasePoint {
    Initial { d: usize, s: usize },
    Following { s: usize },
    Branch { d: usize },
}

impl BasePoint {
    pub fn delta(&self) -> usize {
        match *self {
            BasePoint::Initial { d, .. } | BasePoint::Branch { d } => d,
            BasePoint::Following { s } => s,
        }
    }

    pub fn lambda(&self) -> Option<usize> {
        match *self {
            BasePoint::Initial { s, .. } | BasePoint::Following { s } => Some(s),
            BasePoint::Branch { .. } => None,
        }
    }

    pub fn is_initial(&self) -> bool {
        matches!(self, BasePoint::Initial { .. })
    }

    pub fn is_following(&self) -> bool {
        matches!(self, BasePoint::Following { .. })
    }

    pub fn is_branch(&self) -> bool {
        matches!(self, BasePoint::Branch { .. })
    }

    fn to_json(self, sp: &FinStructure) -> Value {
        match self {
            BasePoint::Initial { d, s } => json!({ "kind": "initial", "d": sp.name(d), "s": sp.name(s) }),
            BasePoint::Following { s } => json!({ "kind": "following", "s": sp.name(s) }),
            BasePoint::Branch { d } => json!({ "kind": "branch", "d": sp.name(d) }),
        }
    }

    fn from_json(v: &Value, sp: &FinStructure) -> Result<Self, RepError> {
        let field = |k: &str| -> Result<usize, RepError> {
            let n = v.get(k).and_then(Value::as_str).ok_or_else(|| RepError::Json(format!("base point lacks `{k}`")))?;
            sp.index_of(n).ok_or_else(|| RepError::Json(format!("unknown element `{n}`")))
        };
        match v.get("kind").and_then(Value::as_str) {
            Some("initial") => Ok(BasePoint::Initial { d: field("d")?, s: field("s")? }),
            Some("following") => Ok(BasePoint::Following { s: field("s")? }),
            Some("branch") => Ok(BasePoint::Branch { d: field("d")? }),
            _ => Err(RepError::Json("unknown base point kind".into())),
        }
    }
}

/// Initial points for every `d ◀ s` (row-major), then a following point and
/// a branch point for every element of `S'`.
pub fn build_base(sp: &FinStructure, fp: &PredicateFixpoint) -> Vec<BasePoint> {
    let mut base: Vec<BasePoint> = fp.black_facts().map(|(d, s)| BasePoint::Initial { d, s }).collect();
    base.extend(sp.elements().map(|s| BasePoint::Following { s }));
    base.extend(sp.elements().map(|d| BasePoint::Branch { d }));
    base
}

/// `|X| <= (1+|S|)² + 2(1+|S|)`.
pub fn base_bound(structure_len: usize) -> usize {
    let k = structure_len + 1;
    k * k + 2 * k
}

/// The relation assigned to `a` (an element of `S'`) over `base`.
pub fn theta(sp: &FinStructure, fp: &PredicateFixpoint, base: &[BasePoint], a: usize) -> Relation {
    let mut rel = Relation::empty(base.len());
    for (x, px) in base.iter().enumerate() {
        for (y, py) in base.iter().enumerate() {
            if py.is_initial() || (px.is_branch() && !py.is_branch()) {
                continue;
            }
            if !fp.black(px.delta(), sp.comp(a, py.delta())) {
                continue;
            }
            if let (Some(lx), Some(ly), true) = (px.lambda(), py.lambda(), py.is_following()) {
                if !fp.tri(px.delta(), lx, sp.comp(a, ly)) {
                    continue;
                }
            }
            rel.insert(x, y).expect("indices lie in the base");
        }
    }
    rel
}

/// The full map on `S'` (including the adjoined identity, last).
pub fn theta_all(sp: &FinStructure, fp: &PredicateFixpoint, base: &[BasePoint]) -> Vec<Relation> {
    sp.elements().into_par_iter().map(|a| theta(sp, fp, base, a)).collect()
}

/// A representation of `structure` over a base derived from `S'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Representation {
    pub structure: FinStructure,
    pub extended: FinStructure,
    pub base: Vec<BasePoint>,
    pub rels: Vec<Relation>,
}

impl Representation {
    pub fn base_size(&self) -> usize {
        self.base.len()
    }

    pub fn to_json(&self) -> Value {
        let mut rels = Map::new();
        for (a, r) in self.rels.iter().enumerate() {
            let pairs: Vec<[usize; 2]> = r.pairs().map(|(x, y)| [x, y]).collect();
            rels.insert(self.structure.name(a).to_owned(), json!(pairs));
        }
        json!({
            "base": self.base.iter().map(|p| p.to_json(&self.extended)).collect::<Vec<_>>(),
            "rels": rels,
        })
    }

    pub fn from_json(v: &Value, structure: &FinStructure) -> Result<Self, RepError> {
        let extended = adjoin_identity(structure);
        let base: Vec<BasePoint> = v
            .get("base")
            .and_then(Value::as_array)
            .ok_or_else(|| RepError::Json("missing `base`".into()))?
            .iter()
            .map(|p| BasePoint::from_json(p, &extended))
            .collect::<Result<_, _>>()?;
        let rels_v = v.get("rels").and_then(Value::as_object).ok_or_else(|| RepError::Json("missing `rels`".into()))?;
        if let Some(k) = rels_v.keys().find(|k| structure.index_of(k).is_none()) {
            return Err(RepError::Json(format!("unknown element `{k}`")));
        }
        let rels = structure
            .elements()
            .map(|a| {
                let pairs: Vec<[usize; 2]> = serde_json::from_value(
                    rels_v.get(structure.name(a)).cloned().ok_or(RepError::Coverage {
                        expected: structure.len(),
                        got: rels_v.len(),
                    })?,
                )
                .map_err(|e| RepError::Json(e.to_string()))?;
                Ok(Relation::from_pairs(base.len(), pairs.into_iter().map(|[x, y]| (x, y)))?)
            })
            .collect::<Result<_, RepError>>()?;
        Ok(Representation { structure: structure.clone(), extended, base, rels })
    }
}

/// Builds the representation of a valid structure satisfying σ.
pub fn represent(s: &FinStructure) -> Result<Representation, RepError> {
    represent_with(s, &FixpointOptions::default())
}

pub fn represent_with(s: &FinStructure, opts: &FixpointOptions) -> Result<Representation, RepError> {
    let diag = validate(s);
    if !diag.is_valid() {
        return Err(RepError::InvalidStructure(diag));
    }
    let fp = compute_fixpoint_with(s, opts)?;
    if let Some((a, b)) = crate::decision::check_sigma(s, &fp) {
        return Err(RepError::SigmaViolated { a: s.name(a).into(), b: s.name(b).into() });
    }
    Ok(represent_unchecked(s, opts)?)
}

/// Construction over `S'` without checking preconditions.
pub(crate) fn represent_unchecked(s: &FinStructure, opts: &FixpointOptions) -> Result<Representation, FixpointError> {
    let sp = adjoin_identity(s);
    let fp = compute_fixpoint_with(&sp, opts)?;
    let base = build_base(&sp, &fp);
    let rels = s.elements().into_par_iter().map(|a| theta(&sp, &fp, &base, a)).collect();
    Ok(Representation { structure: s.clone(), extended: sp, base, rels })
}

/// A single failed representation law.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyFailure {
    /// `a ≤ b` disagrees with `aθ ⊑ bθ`.
    Refinement { a: usize, b: usize, leq: bool, refines: bool },
    /// `(a∘b)θ != aθ;bθ`.
    Composition { a: usize, b: usize },
    /// `aθ = bθ` for distinct `a`, `b`.
    NotInjective { a: usize, b: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerifyReport {
    pub failures: Vec<VerifyFailure>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn render(&self, s: &FinStructure) -> String {
        let mut out = String::new();
        for f in &self.failures {
            let _ = match *f {
                VerifyFailure::Refinement { a, b, leq, refines } => writeln!(
                    out,
                    "refinement: {} ≤ {} is {leq} but θ({}) ⊑ θ({}) is {refines}",
                    s.name(a), s.name(b), s.name(a), s.name(b)
                ),
                VerifyFailure::Composition { a, b } => writeln!(
                    out,
                    "composition: θ({}∘{}) differs from θ({});θ({})",
                    s.name(a), s.name(b), s.name(a), s.name(b)
                ),
                VerifyFailure::NotInjective { a, b } => {
                    writeln!(out, "injectivity: θ({}) = θ({})", s.name(a), s.name(b))
                }
            };
        }
        out
    }
}

/// Checks that `rels` (indexed by element) is a representation of `s`:
/// order is refinement, composition is relational composition, and distinct
/// elements get distinct relations.
pub fn verify_relations(s: &FinStructure, rels: &[Relation]) -> Result<VerifyReport, RepError> {
    if rels.len() != s.len() {
        return Err(RepError::Coverage { expected: s.len(), got: rels.len() });
    }
    if let Some(r) = rels.iter().find(|r| r.base_size() != rels[0].base_size()) {
        return Err(RelError::DimensionMismatch { left: rels[0].base_size(), right: r.base_size() }.into());
    }
    let mut failures = Vec::new();
    for a in s.elements() {
        for b in s.elements() {
            let refines = demonic_refines(&rels[a], &rels[b])?;
            if refines != s.leq(a, b) {
                failures.push(VerifyFailure::Refinement { a, b, leq: s.leq(a, b), refines });
            }
        }
    }
    for a in s.elements() {
        for b in s.elements() {
            if compose(&rels[a], &rels[b])? != rels[s.comp(a, b)] {
                failures.push(VerifyFailure::Composition { a, b });
            }
        }
    }
    for a in s.elements() {
        for b in a + 1..s.len() {
            if rels[a] == rels[b] {
                failures.push(VerifyFailure::NotInjective { a, b });
            }
        }
    }
    Ok(VerifyReport { failures })
}

pub fn verify(s: &FinStructure, rep: &Representation) -> Result<VerifyReport, RepError> {
    if let Some(r) = rep.rels.iter().find(|r| r.base_size() != rep.base.len()) {
        return Err(RelError::DimensionMismatch { left: rep.base.len(), right: r.base_size() }.into());
    }
    verify_relations(s, &rep.rels)
}

/// Graphviz rendering: one node per base point, one labeled edge per pair of
/// each element's relation.
pub fn export_dot(rep: &Representation) -> String {
    let sp = &rep.extended;
    let mut out = String::from("digraph representation {\n  rankdir=LR;\n");
    for (i, p) in rep.base.iter().enumerate() {
        let label = match *p {
            BasePoint::Initial { d, s } => format!("initial δ={} λ={}", sp.name(d), sp.name(s)),
            BasePoint::Following { s } => format!("following δ=λ={}", sp.name(s)),
            BasePoint::Branch { d } => format!("branch δ={}", sp.name(d)),
        };
        let _ = writeln!(out, "  x{i} [label=\"x{i}: {}\"];", escape(&label));
    }
    for (a, r) in rep.rels.iter().enumerate() {
        for (x, y) in r.pairs() {
            let _ = writeln!(out, "  x{x} -> x{y} [label=\"{}\"];", escape(rep.structure.name(a)));
        }
    }
    out.push_str("}\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
