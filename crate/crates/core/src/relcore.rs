//! Concrete binary relations over a finite base `0..n` and the angelic and
//! demonic operators on them.
//!
//! Every binary operator requires both arguments to live over the same base
//! and reports a [`RelError::DimensionMismatch`] otherwise.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelError {
    #[error("base size mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("pair ({x}, {y}) lies outside a base of size {base}")]
    OutOfRange { x: usize, y: usize, base: usize },
}

fn same_base(left: usize, right: usize) -> Result<(), RelError> {
    if left == right {
        Ok(())
    } else {
        Err(RelError::DimensionMismatch { left, right })
    }
}

/// A subset of `X x X` for `X = {0, .., base-1}`, stored as a bit matrix.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Relation {
    bits: BitMatrix,
}

/// A subset of the base, e.g. the domain of a relation.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PointSet {
    members: Vec<bool>,
}

impl PointSet {
    pub fn empty(base: usize) -> Self {
        PointSet { members: vec![false; base] }
    }

    pub fn full(base: usize) -> Self {
        PointSet { members: vec![true; base] }
    }

    pub fn from_points(base: usize, points: impl IntoIterator<Item = usize>) -> Result<Self, RelError> {
        let mut set = Self::empty(base);
        for p in points {
            if p >= base {
                return Err(RelError::OutOfRange { x: p, y: p, base });
            }
            set.members[p] = true;
        }
        Ok(set)
    }

    pub fn base_size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.get(x).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.members.iter().zip(&other.members).all(|(&a, &b)| !a || b)
    }
}

impl fmt::Debug for PointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Relation {
    pub fn empty(base: usize) -> Self {
        Relation { bits: BitMatrix::square(base) }
    }

    pub fn identity(base: usize) -> Self {
        let mut r = Self::empty(base);
        for x in 0..base {
            r.bits.set(x, x);
        }
        r
    }

    /// The partial identity `{(x, x) : x in points}`.
    pub fn diagonal(points: &PointSet) -> Self {
        let mut r = Self::empty(points.base_size());
        for x in points.iter() {
            r.bits.set(x, x);
        }
        r
    }

    pub fn from_pairs(
        base: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, RelError> {
        let mut r = Self::empty(base);
        for (x, y) in pairs {
            r.insert(x, y)?;
        }
        Ok(r)
    }

    pub fn base_size(&self) -> usize {
        self.bits.rows()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.base_size() && y < self.base_size() && self.bits.get(x, y)
    }

    pub fn insert(&mut self, x: usize, y: usize) -> Result<(), RelError> {
        let base = self.base_size();
        if x >= base || y >= base {
            return Err(RelError::OutOfRange { x, y, base });
        }
        self.bits.set(x, y);
        Ok(())
    }

    pub fn remove(&mut self, x: usize, y: usize) -> bool {
        let had = self.contains(x, y);
        if had {
            self.bits.clear(x, y);
        }
        had
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_zero()
    }

    /// Pairs in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits.ones()
    }

    /// Successors of `x`.
    pub fn image_of(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.bits.row_ones(x)
    }

    pub fn has_successor(&self, x: usize) -> bool {
        !self.bits.row_is_zero(x)
    }

    pub fn is_subset(&self, other: &Relation) -> Result<bool, RelError> {
        same_base(self.base_size(), other.base_size())?;
        Ok(self.bits.words().iter().zip(other.bits.words()).all(|(a, b)| a & !b == 0))
    }

    pub fn union(&self, other: &Relation) -> Result<Relation, RelError> {
        same_base(self.base_size(), other.base_size())?;
        let mut out = self.clone();
        out.bits.or_assign(&other.bits);
        Ok(out)
    }

    pub fn intersection(&self, other: &Relation) -> Result<Relation, RelError> {
        same_base(self.base_size(), other.base_size())?;
        let mut out = self.clone();
        out.bits.and_assign(&other.bits);
        Ok(out)
    }
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Relation[{}]", self.base_size())?;
        f.debug_set().entries(self.pairs()).finish()
    }
}

/// `R;S`: `(x, y)` iff some `z` has `(x, z) in R` and `(z, y) in S`.
pub fn compose(r: &Relation, s: &Relation) -> Result<Relation, RelError> {
    same_base(r.base_size(), s.base_size())?;
    let n = r.base_size();
    let mut out = Relation::empty(n);
    for x in 0..n {
        for z in r.bits.row_ones(x) {
            out.bits.or_row_from(x, &s.bits, z);
        }
    }
    Ok(out)
}

pub fn dom(r: &Relation) -> PointSet {
    PointSet { members: (0..r.base_size()).map(|x| r.has_successor(x)).collect() }
}

/// Keeps exactly the pairs of `r` whose source lies in `d`.
pub fn restrict(r: &Relation, d: &PointSet) -> Result<Relation, RelError> {
    same_base(r.base_size(), d.base_size())?;
    let mut out = r.clone();
    for x in 0..r.base_size() {
        if !d.contains(x) {
            out.bits.row_mut(x).fill(0);
        }
    }
    Ok(out)
}

/// Demonic refinement `R ⊑ S`: `dom(S) ⊆ dom(R)` and `R` restricted to
/// `dom(S)` is included in `S`.
pub fn demonic_refines(r: &Relation, s: &Relation) -> Result<bool, RelError> {
    same_base(r.base_size(), s.base_size())?;
    for x in 0..r.base_size() {
        if !s.has_successor(x) {
            continue;
        }
        if !r.has_successor(x) {
            return Ok(false);
        }
        if r.bits.row(x).iter().zip(s.bits.row(x)).any(|(a, b)| a & !b != 0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `R*S`: the pairs of `R;S` whose source has every `R`-successor in `dom(S)`.
pub fn demonic_compose(r: &Relation, s: &Relation) -> Result<Relation, RelError> {
    let mut out = compose(r, s)?;
    let ds = dom(s);
    for x in 0..r.base_size() {
        if r.image_of(x).any(|z| !ds.contains(z)) {
            out.bits.row_mut(x).fill(0);
        }
    }
    Ok(out)
}

/// `R ⊔ S = (R ∪ S)` restricted to `dom(R) ∩ dom(S)`.
pub fn demonic_join(r: &Relation, s: &Relation) -> Result<Relation, RelError> {
    let union = r.union(s)?;
    let common: Vec<usize> =
        (0..r.base_size()).filter(|&x| r.has_successor(x) && s.has_successor(x)).collect();
    restrict(&union, &PointSet::from_points(r.base_size(), common)?)
}

/// Pairs of `R` with source outside `dom(S)`, plus `R ∩ S`, plus pairs of `S`
/// with source outside `dom(R)`.
///
/// This is a greatest lower bound for `⊑` only on infinity-saturated
/// relations (see [`saturate_infinity`]); on other inputs it is just the
/// formula.
pub fn demonic_meet(r: &Relation, s: &Relation) -> Result<Relation, RelError> {
    let mut out = r.intersection(s)?;
    for x in 0..r.base_size() {
        let (in_r, in_s) = (r.has_successor(x), s.has_successor(x));
        if in_r && !in_s {
            out.bits.or_row_from(x, &r.bits, x);
        } else if in_s && !in_r {
            out.bits.or_row_from(x, &s.bits, x);
        }
    }
    Ok(out)
}

/// Appends a sink point `∞` (index `base_size`) and adds `(x, ∞)` for every
/// `x` in `dom(R)`. The new point never has outgoing pairs.
pub fn saturate_infinity(r: &Relation) -> Relation {
    let n = r.base_size();
    let mut out = Relation::empty(n + 1);
    for (x, y) in r.pairs() {
        out.bits.set(x, y);
    }
    for x in 0..n {
        if r.has_successor(x) {
            out.bits.set(x, n);
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct RelationJson {
    base: usize,
    pairs: Vec<[usize; 2]>,
}

impl Serialize for Relation {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RelationJson { base: self.base_size(), pairs: self.pairs().map(|(x, y)| [x, y]).collect() }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Relation {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RelationJson::deserialize(deserializer)?;
        Relation::from_pairs(raw.base, raw.pairs.into_iter().map(|[x, y]| (x, y)))
            .map_err(serde::de::Error::custom)
    }
}
