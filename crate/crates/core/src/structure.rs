//! Finite abstract `(≤, ∘)` structures.
//!
//! Elements are identified by their index; names are surface syntax only.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("element names must be nonempty")]
    EmptyName,
    #[error("duplicate element name `{0}`")]
    DuplicateName(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("order matrix must be {expected}x{expected}")]
    OrderShape { expected: usize },
    #[error("composition table must be {expected}x{expected}")]
    CompShape { expected: usize },
    #[error("composition entry {a}∘{b} = {value} is not an element index")]
    CompIndex { a: usize, b: usize, value: usize },
    #[error("composition table is missing `{a}`∘`{b}`")]
    MissingComposition { a: String, b: String },
    #[error("invalid structure json: {0}")]
    Json(String),
}

/// A finite `(≤, ∘)` structure: names, order matrix and composition table.
///
/// Construction only checks well-formedness; the partial order and
/// associativity laws are checked by [`validate`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FinStructure {
    names: Vec<String>,
    leq: Vec<bool>,
    comp: Vec<usize>,
}

impl FinStructure {
    pub fn new(
        names: Vec<String>,
        leq: Vec<Vec<bool>>,
        comp: Vec<Vec<usize>>,
    ) -> Result<Self, StructureError> {
        let m = names.len();
        check_names(&names)?;
        if leq.len() != m || leq.iter().any(|row| row.len() != m) {
            return Err(StructureError::OrderShape { expected: m });
        }
        if comp.len() != m || comp.iter().any(|row| row.len() != m) {
            return Err(StructureError::CompShape { expected: m });
        }
        for (a, row) in comp.iter().enumerate() {
            for (b, &value) in row.iter().enumerate() {
                if value >= m {
                    return Err(StructureError::CompIndex { a, b, value });
                }
            }
        }
        Ok(FinStructure {
            names,
            leq: leq.into_iter().flatten().collect(),
            comp: comp.into_iter().flatten().collect(),
        })
    }

    /// Builds a structure from closures over element indices.
    pub fn from_fns(
        names: Vec<String>,
        leq: impl Fn(usize, usize) -> bool,
        comp: impl Fn(usize, usize) -> usize,
    ) -> Result<Self, StructureError> {
        let m = names.len();
        let leq = (0..m).map(|a| (0..m).map(|b| leq(a, b)).collect()).collect();
        let comp = (0..m).map(|a| (0..m).map(|b| comp(a, b)).collect()).collect();
        Self::new(names, leq, comp)
    }

    pub fn empty() -> Self {
        FinStructure { names: Vec::new(), leq: Vec::new(), comp: Vec::new() }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, a: usize) -> &str {
        &self.names[a]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    #[inline]
    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a * self.len() + b]
    }

    #[inline]
    pub fn comp(&self, a: usize, b: usize) -> usize {
        self.comp[a * self.len() + b]
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.len()
    }
}

impl std::fmt::Debug for FinStructure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&serialize_structure(self))
    }
}

fn check_names(names: &[String]) -> Result<(), StructureError> {
    let mut seen = HashMap::new();
    for name in names {
        if name.is_empty() {
            return Err(StructureError::EmptyName);
        }
        if seen.insert(name.as_str(), ()).is_some() {
            return Err(StructureError::DuplicateName(name.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderLaw {
    Reflexivity,
    Antisymmetry,
    Transitivity,
}

/// Outcome of [`validate`]. Invalid outcomes carry the offending elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostics {
    Valid,
    NotPartialOrder { law: OrderLaw, witness: Vec<usize> },
    NotAssociative { witness: [usize; 3] },
}

impl Diagnostics {
    pub fn is_valid(&self) -> bool {
        matches!(self, Diagnostics::Valid)
    }

    /// Re-checks the witness against `s`: true iff it really violates its law
    /// (or the outcome is `Valid`).
    pub fn recheck(&self, s: &FinStructure) -> bool {
        let in_range = |w: &[usize]| w.iter().all(|&x| x < s.len());
        match self {
            Diagnostics::Valid => validate(s).is_valid(),
            Diagnostics::NotPartialOrder { law, witness } => {
                in_range(witness)
                    && match (law, witness.as_slice()) {
                        (OrderLaw::Reflexivity, &[a]) => !s.leq(a, a),
                        (OrderLaw::Antisymmetry, &[a, b]) => a != b && s.leq(a, b) && s.leq(b, a),
                        (OrderLaw::Transitivity, &[a, b, c]) => {
                            s.leq(a, b) && s.leq(b, c) && !s.leq(a, c)
                        }
                        _ => false,
                    }
            }
            Diagnostics::NotAssociative { witness: [a, b, c] } => {
                in_range(&[*a, *b, *c]) && s.comp(s.comp(*a, *b), *c) != s.comp(*a, s.comp(*b, *c))
            }
        }
    }

    pub fn to_json(&self, s: &FinStructure) -> Value {
        let names = |w: &[usize]| Value::from(w.iter().map(|&x| s.name(x)).collect::<Vec<_>>());
        match self {
            Diagnostics::Valid => serde_json::json!({ "status": "valid" }),
            Diagnostics::NotPartialOrder { law, witness } => serde_json::json!({
                "status": "not_partial_order",
                "law": law,
                "witness": names(witness),
            }),
            Diagnostics::NotAssociative { witness } => serde_json::json!({
                "status": "not_associative",
                "witness": names(witness),
            }),
        }
    }

    pub fn from_json(value: &Value, s: &FinStructure) -> Result<Self, StructureError> {
        let bad = || StructureError::Json("malformed diagnostics".into());
        let status = value.get("status").and_then(Value::as_str).ok_or_else(bad)?;
        let witness = || -> Result<Vec<usize>, StructureError> {
            let raw: Vec<String> = serde_json::from_value(value.get("witness").cloned().ok_or_else(bad)?)
                .map_err(|e| StructureError::Json(e.to_string()))?;
            raw.iter()
                .map(|n| s.index_of(n).ok_or_else(|| StructureError::UnknownElement(n.clone())))
                .collect()
        };
        match status {
            "valid" => Ok(Diagnostics::Valid),
            "not_partial_order" => {
                let law = serde_json::from_value(value.get("law").cloned().ok_or_else(bad)?)
                    .map_err(|e| StructureError::Json(e.to_string()))?;
                Ok(Diagnostics::NotPartialOrder { law, witness: witness()? })
            }
            "not_associative" => match witness()?.as_slice() {
                &[a, b, c] => Ok(Diagnostics::NotAssociative { witness: [a, b, c] }),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

/// Checks reflexivity, antisymmetry, transitivity and then associativity,
/// each in row-major order, and reports the first failure.
pub fn validate(s: &FinStructure) -> Diagnostics {
    let m = s.len();
    for a in 0..m {
        if !s.leq(a, a) {
            return Diagnostics::NotPartialOrder { law: OrderLaw::Reflexivity, witness: vec![a] };
        }
    }
    for a in 0..m {
        for b in 0..m {
            if a != b && s.leq(a, b) && s.leq(b, a) {
                return Diagnostics::NotPartialOrder {
                    law: OrderLaw::Antisymmetry,
                    witness: vec![a, b],
                };
            }
        }
    }
    for a in 0..m {
        for b in 0..m {
            if !s.leq(a, b) {
                continue;
            }
            for c in 0..m {
                if s.leq(b, c) && !s.leq(a, c) {
                    return Diagnostics::NotPartialOrder {
                        law: OrderLaw::Transitivity,
                        witness: vec![a, b, c],
                    };
                }
            }
        }
    }
    for a in 0..m {
        for b in 0..m {
            let ab = s.comp(a, b);
            for c in 0..m {
                if s.comp(ab, c) != s.comp(a, s.comp(b, c)) {
                    return Diagnostics::NotAssociative { witness: [a, b, c] };
                }
            }
        }
    }
    Diagnostics::Valid
}

/// Name used for the adjoined identity: `e`, primed until it is fresh.
pub fn fresh_identity_name(s: &FinStructure) -> String {
    let mut name = String::from("e");
    while s.index_of(&name).is_some() {
        name.push('\'');
    }
    name
}

/// Adds a new last element `e` with `e∘x = x = x∘e`, `e ≤ e`, and `e`
/// incomparable to every original element.
pub fn adjoin_identity(s: &FinStructure) -> FinStructure {
    let m = s.len();
    let mut names = s.names.clone();
    names.push(fresh_identity_name(s));
    FinStructure::from_fns(
        names,
        |a, b| if a < m && b < m { s.leq(a, b) } else { a == b },
        |a, b| match (a == m, b == m) {
            (true, _) => b,
            (false, true) => a,
            (false, false) => s.comp(a, b),
        },
    )
    .expect("identity adjunction preserves well-formedness")
}

#[derive(Serialize, Deserialize)]
struct StructureJson {
    elements: Vec<String>,
    leq: Vec<[String; 2]>,
    comp: Map<String, Value>,
}

pub fn parse_structure(text: &str) -> Result<FinStructure, StructureError> {
    let raw: StructureJson =
        serde_json::from_str(text).map_err(|e| StructureError::Json(e.to_string()))?;
    structure_from_json(raw)
}

pub fn structure_from_value(value: Value) -> Result<FinStructure, StructureError> {
    let raw: StructureJson =
        serde_json::from_value(value).map_err(|e| StructureError::Json(e.to_string()))?;
    structure_from_json(raw)
}

fn structure_from_json(raw: StructureJson) -> Result<FinStructure, StructureError> {
    check_names(&raw.elements)?;
    let m = raw.elements.len();
    let index: HashMap<&str, usize> =
        raw.elements.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let lookup = |n: &str| index.get(n).copied().ok_or_else(|| StructureError::UnknownElement(n.into()));

    let mut leq = vec![vec![false; m]; m];
    for [a, b] in &raw.leq {
        leq[lookup(a)?][lookup(b)?] = true;
    }

    let mut comp = vec![vec![usize::MAX; m]; m];
    for (a, row) in &raw.comp {
        let ai = lookup(a)?;
        let row = row
            .as_object()
            .ok_or_else(|| StructureError::Json(format!("comp row for `{a}` must be an object")))?;
        for (b, c) in row {
            let c = c
                .as_str()
                .ok_or_else(|| StructureError::Json(format!("comp `{a}`∘`{b}` must be a name")))?;
            comp[ai][lookup(b)?] = lookup(c)?;
        }
    }
    for a in 0..m {
        for b in 0..m {
            if comp[a][b] == usize::MAX {
                return Err(StructureError::MissingComposition {
                    a: raw.elements[a].clone(),
                    b: raw.elements[b].clone(),
                });
            }
        }
    }
    FinStructure::new(raw.elements, leq, comp)
}

pub fn structure_to_value(s: &FinStructure) -> Value {
    let mut comp = Map::new();
    for a in s.elements() {
        let row: Map<String, Value> =
            s.elements().map(|b| (s.name(b).to_owned(), Value::from(s.name(s.comp(a, b))))).collect();
        comp.insert(s.name(a).to_owned(), Value::Object(row));
    }
    let leq: Vec<[String; 2]> = s
        .elements()
        .flat_map(|a| s.elements().map(move |b| (a, b)))
        .filter(|&(a, b)| s.leq(a, b))
        .map(|(a, b)| [s.name(a).to_owned(), s.name(b).to_owned()])
        .collect();
    serde_json::to_value(StructureJson { elements: s.names.clone(), leq, comp })
        .expect("structure json is always serializable")
}

/// Canonical JSON text: elements in index order, `leq` pairs row-major, `comp`
/// rows and columns in element order.
pub fn serialize_structure(s: &FinStructure) -> String {
    let mut out = serde_json::to_string(&structure_to_value(s)).expect("serializable");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(ns: &[&str]) -> Vec<String> {
        ns.iter().map(|s| s.to_string()).collect()
    }

    fn one_element() -> FinStructure {
        FinStructure::from_fns(names(&["a"]), |_, _| true, |_, _| 0).unwrap()
    }

    #[test]
    fn antisymmetry_failure_reports_pair() {
        let s = FinStructure::from_fns(names(&["a", "b"]), |_, _| true, |_, _| 0).unwrap();
        let d = validate(&s);
        assert_eq!(d, Diagnostics::NotPartialOrder { law: OrderLaw::Antisymmetry, witness: vec![0, 1] });
        assert!(d.recheck(&s));
    }

    #[test]
    fn associativity_failure_reports_triple() {
        // a∘a = b, a∘b = a, b∘x = b
        let s = FinStructure::from_fns(
            names(&["a", "b"]),
            |a, b| a == b,
            |x, y| match (x, y) {
                (0, 0) => 1,
                (0, 1) => 0,
                _ => 1,
            },
        )
        .unwrap();
        let d = validate(&s);
        assert_eq!(d, Diagnostics::NotAssociative { witness: [0, 0, 0] });
        assert!(d.recheck(&s));
    }

    #[test]
    fn reflexivity_and_transitivity_failures() {
        let s = FinStructure::from_fns(names(&["a"]), |_, _| false, |_, _| 0).unwrap();
        assert_eq!(
            validate(&s),
            Diagnostics::NotPartialOrder { law: OrderLaw::Reflexivity, witness: vec![0] }
        );
        let s = FinStructure::from_fns(
            names(&["a", "b", "c"]),
            |a, b| a == b || (a, b) == (0, 1) || (a, b) == (1, 2),
            |_, _| 0,
        )
        .unwrap();
        let d = validate(&s);
        assert_eq!(
            d,
            Diagnostics::NotPartialOrder { law: OrderLaw::Transitivity, witness: vec![0, 1, 2] }
        );
        assert!(d.recheck(&s));
    }

    #[test]
    fn adjoin_identity_on_one_element() {
        let sp = adjoin_identity(&one_element());
        assert_eq!(sp.names(), &["a", "e"]);
        assert!(sp.leq(0, 0) && sp.leq(1, 1) && !sp.leq(0, 1) && !sp.leq(1, 0));
        assert_eq!((sp.comp(0, 0), sp.comp(0, 1), sp.comp(1, 0), sp.comp(1, 1)), (0, 0, 0, 1));
        assert!(validate(&sp).is_valid());
    }

    #[test]
    fn adjoin_identity_picks_fresh_name() {
        let s = FinStructure::from_fns(names(&["e", "e'"]), |a, b| a == b, |_, _| 0).unwrap();
        let sp = adjoin_identity(&s);
        assert_eq!(sp.name(2), "e''");
        assert_eq!(adjoin_identity(&FinStructure::empty()).names(), &["e"]);
    }

    #[test]
    fn construction_rejects_malformed_input() {
        assert_eq!(
            FinStructure::new(names(&["a", "a"]), vec![vec![true; 2]; 2], vec![vec![0; 2]; 2]),
            Err(StructureError::DuplicateName("a".into()))
        );
        assert_eq!(
            FinStructure::new(names(&[""]), vec![vec![true]], vec![vec![0]]),
            Err(StructureError::EmptyName)
        );
        assert!(matches!(
            FinStructure::new(names(&["a"]), vec![vec![true]], vec![vec![3]]),
            Err(StructureError::CompIndex { .. })
        ));
        assert!(matches!(
            FinStructure::new(names(&["a", "b"]), vec![vec![true; 2], vec![true]], vec![vec![0; 2]; 2]),
            Err(StructureError::OrderShape { .. })
        ));
    }

    #[test]
    fn json_round_trip_and_errors() {
        let s = one_element();
        let text = serialize_structure(&s);
        assert_eq!(text, "{\"elements\":[\"a\"],\"leq\":[[\"a\",\"a\"]],\"comp\":{\"a\":{\"a\":\"a\"}}}\n");
        assert_eq!(parse_structure(&text).unwrap(), s);

        let undeclared = r#"{"elements":["a"],"leq":[["a","a"]],"comp":{"a":{"a":"z"}}}"#;
        assert_eq!(parse_structure(undeclared), Err(StructureError::UnknownElement("z".into())));
        let ragged = r#"{"elements":["a","b"],"leq":[],"comp":{"a":{"a":"a","b":"a"},"b":{"a":"a"}}}"#;
        assert!(matches!(parse_structure(ragged), Err(StructureError::MissingComposition { .. })));
        let dup = r#"{"elements":["a","a"],"leq":[],"comp":{}}"#;
        assert_eq!(parse_structure(dup), Err(StructureError::DuplicateName("a".into())));
    }

    #[test]
    fn empty_structure_is_valid() {
        let s = FinStructure::empty();
        assert!(validate(&s).is_valid());
        assert_eq!(parse_structure(&serialize_structure(&s)).unwrap(), s);
    }

    #[test]
    fn diagnostics_json_round_trip() {
        let s = FinStructure::from_fns(names(&["a", "b"]), |_, _| true, |_, _| 0).unwrap();
        let d = validate(&s);
        let v = d.to_json(&s);
        assert_eq!(v["witness"], serde_json::json!(["a", "b"]));
        assert_eq!(Diagnostics::from_json(&v, &s).unwrap(), d);
    }
}
