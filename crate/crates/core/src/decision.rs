//! Representability decision: evaluate σ on the stabilised fixpoint and
//! package the outcome as a checkable certificate.

use serde_json::{json, Value};
use thiserror::Error;

use crate::predicates::{
    compute_fixpoint_with, explain, Derivation, Fact, FixpointError, FixpointOptions, PredicateFixpoint,
};
use crate::repbuilder::{represent_unchecked, verify, RepError, Representation, VerifyReport};
use crate::structure::{validate, Diagnostics, FinStructure, StructureError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecisionError {
    #[error(transparent)]
    Fixpoint(#[from] FixpointError),
    #[error("constructed representation failed verification:\n{0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertificateError {
    #[error("malformed certificate: {0}")]
    Malformed(String),
    #[error("certificate does not re-validate: {0}")]
    Rejected(String),
}

impl From<StructureError> for CertificateError {
    fn from(e: StructureError) -> Self {
        CertificateError::Malformed(e.to_string())
    }
}

impl From<RepError> for CertificateError {
    fn from(e: RepError) -> Self {
        CertificateError::Malformed(e.to_string())
    }
}

/// Outcome of [`decide`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    Representable { representation: Representation },
    /// `b ◀ a` and `a ◁ᵇ b` hold but `a ≤ b` does not.
    NotRepresentable {
        a: usize,
        b: usize,
        black_derivation: Derivation,
        tri_derivation: Derivation,
        min_violated_stage: u32,
    },
    InvalidStructure { diagnostics: Diagnostics },
}

/// `(b ◀ a ∧ a ◁ᵇ b) → a ≤ b` at the fixpoint; returns the first violating
/// `(a, b)` in row-major element order.
pub fn check_sigma(s: &FinStructure, fp: &PredicateFixpoint) -> Option<(usize, usize)> {
    s.elements()
        .flat_map(|a| s.elements().map(move |b| (a, b)))
        .find(|&(a, b)| fp.black(b, a) && fp.tri(b, a, b) && !s.leq(a, b))
}

/// Stage at which σ first fails for `(a, b)`, if it ever does.
pub fn violation_stage(s: &FinStructure, fp: &PredicateFixpoint, a: usize, b: usize) -> Option<u32> {
    if s.leq(a, b) {
        return None;
    }
    Some(fp.black_stage(b, a)?.max(fp.tri_stage(b, a, b)?))
}

/// Least `n` such that σₙ fails.
pub fn min_sigma_stage(s: &FinStructure, fp: &PredicateFixpoint) -> Option<u32> {
    s.elements()
        .flat_map(|a| s.elements().map(move |b| (a, b)))
        .filter_map(|(a, b)| violation_stage(s, fp, a, b))
        .min()
}

/// Whether `σₙ` holds.
pub fn sigma_n_holds(s: &FinStructure, fp: &PredicateFixpoint, n: u32) -> bool {
    min_sigma_stage(s, fp).is_none_or(|k| k > n)
}

pub fn decide(s: &FinStructure) -> Result<Certificate, DecisionError> {
    decide_with(s, &FixpointOptions::default())
}

/// σ is evaluated on `s` itself; the representation is then built over the
/// identity-adjoined structure and verified before it is returned.
pub fn decide_with(s: &FinStructure, opts: &FixpointOptions) -> Result<Certificate, DecisionError> {
    let diagnostics = validate(s);
    if !diagnostics.is_valid() {
        return Ok(Certificate::InvalidStructure { diagnostics });
    }
    let fp = compute_fixpoint_with(s, opts)?;
    if let Some((a, b)) = check_sigma(s, &fp) {
        let black_derivation = explain(s, &fp, Fact::Black { a: b, b: a }).expect("violation facts hold");
        let tri_derivation = explain(s, &fp, Fact::Tri { s: b, a, b }).expect("violation facts hold");
        let min_violated_stage = min_sigma_stage(s, &fp).expect("a violation exists");
        return Ok(Certificate::NotRepresentable { a, b, black_derivation, tri_derivation, min_violated_stage });
    }
    let representation = represent_unchecked(s, opts)?;
    let report = verify(s, &representation).map_err(|e| DecisionError::Internal(e.to_string()))?;
    if !report.passed() {
        return Err(DecisionError::Internal(report.render(s)));
    }
    Ok(Certificate::Representable { representation })
}

impl Certificate {
    pub fn kind(&self) -> &'static str {
        match self {
            Certificate::Representable { .. } => "representable",
            Certificate::NotRepresentable { .. } => "not_representable",
            Certificate::InvalidStructure { .. } => "invalid_structure",
        }
    }

    /// Short machine summary, without derivations or relations.
    pub fn summary(&self, s: &FinStructure) -> Value {
        match self {
            Certificate::Representable { representation } => {
                json!({ "status": self.kind(), "base_size": representation.base_size() })
            }
            Certificate::NotRepresentable { a, b, min_violated_stage, .. } => json!({
                "status": self.kind(),
                "a": s.name(*a),
                "b": s.name(*b),
                "min_violated_stage": min_violated_stage,
            }),
            Certificate::InvalidStructure { diagnostics } => {
                json!({ "status": self.kind(), "diagnostics": diagnostics.to_json(s) })
            }
        }
    }

    pub fn to_json(&self, s: &FinStructure) -> Value {
        match self {
            Certificate::Representable { representation } => {
                json!({ "status": self.kind(), "representation": representation.to_json() })
            }
            Certificate::NotRepresentable { a, b, black_derivation, tri_derivation, min_violated_stage } => json!({
                "status": self.kind(),
                "a": s.name(*a),
                "b": s.name(*b),
                "min_violated_stage": min_violated_stage,
                "black_derivation": black_derivation.to_json(s),
                "tri_derivation": tri_derivation.to_json(s),
            }),
            Certificate::InvalidStructure { diagnostics } => {
                json!({ "status": self.kind(), "diagnostics": diagnostics.to_json(s) })
            }
        }
    }

    pub fn from_json(v: &Value, s: &FinStructure) -> Result<Certificate, CertificateError> {
        let malformed = |w: &str| CertificateError::Malformed(w.to_owned());
        let elem = |k: &str| -> Result<usize, CertificateError> {
            let n = v.get(k).and_then(Value::as_str).ok_or_else(|| malformed(k))?;
            s.index_of(n).ok_or_else(|| malformed(&format!("unknown element `{n}`")))
        };
        let derivation = |k: &str| -> Result<Derivation, CertificateError> {
            Derivation::from_json(v.get(k).ok_or_else(|| malformed(k))?, s)
                .map_err(|e| CertificateError::Malformed(e.to_string()))
        };
        match v.get("status").and_then(Value::as_str) {
            Some("representable") => Ok(Certificate::Representable {
                representation: Representation::from_json(
                    v.get("representation").ok_or_else(|| malformed("representation"))?,
                    s,
                )?,
            }),
            Some("not_representable") => Ok(Certificate::NotRepresentable {
                a: elem("a")?,
                b: elem("b")?,
                black_derivation: derivation("black_derivation")?,
                tri_derivation: derivation("tri_derivation")?,
                min_violated_stage: v
                    .get("min_violated_stage")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| malformed("min_violated_stage"))? as u32,
            }),
            Some("invalid_structure") => Ok(Certificate::InvalidStructure {
                diagnostics: Diagnostics::from_json(v.get("diagnostics").ok_or_else(|| malformed("diagnostics"))?, s)?,
            }),
            _ => Err(malformed("status")),
        }
    }

    /// Re-checks the certificate against `s` without trusting how it was
    /// produced. The minimal stage is recomputed from a fresh fixpoint.
    pub fn revalidate(&self, s: &FinStructure) -> Result<(), CertificateError> {
        let reject = |w: String| Err(CertificateError::Rejected(w));
        match self {
            Certificate::Representable { representation } => {
                if representation.structure != *s {
                    return reject("representation belongs to another structure".into());
                }
                let report: VerifyReport = verify(s, representation)?;
                if !report.passed() {
                    return reject(report.render(s));
                }
                Ok(())
            }
            Certificate::NotRepresentable { a, b, black_derivation, tri_derivation, min_violated_stage } => {
                let (a, b) = (*a, *b);
                if a >= s.len() || b >= s.len() {
                    return reject("witness out of range".into());
                }
                if s.leq(a, b) {
                    return reject(format!("{} ≤ {} holds", s.name(a), s.name(b)));
                }
                if black_derivation.fact != (Fact::Black { a: b, b: a })
                    || tri_derivation.fact != (Fact::Tri { s: b, a, b })
                {
                    return reject("derivations prove the wrong facts".into());
                }
                for d in [black_derivation, tri_derivation] {
                    d.replay(s).map_err(|e| CertificateError::Rejected(e.to_string()))?;
                }
                let fp = compute_fixpoint_with(s, &FixpointOptions::default())
                    .map_err(|e| CertificateError::Rejected(e.to_string()))?;
                if min_sigma_stage(s, &fp) != Some(*min_violated_stage) {
                    return reject("minimal violated stage does not match".into());
                }
                Ok(())
            }
            Certificate::InvalidStructure { diagnostics } => {
                if *diagnostics != validate(s) || !diagnostics.recheck(s) {
                    return reject("diagnostics do not match the structure".into());
                }
                Ok(())
            }
        }
    }
}

impl From<RepError> for DecisionError {
    fn from(e: RepError) -> Self {
        match e {
            RepError::Fixpoint(f) => DecisionError::Fixpoint(f),
            other => DecisionError::Internal(other.to_string()),
        }
    }
}
