//! Small expression language over named relations.
//!
//! Precedence, tightest first: atoms and `dom(..)`/`sat(..)`; `;` and `*`
//! (left-associative); `|_|`; `|-|`; `<<=` (non-associative, boolean).

use std::collections::BTreeMap;
use std::fmt;

use demonic_core::relcore::{self, RelError, Relation};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelExprError {
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unbound name `{0}`")]
    Unbound(String),
    #[error("mixed base sizes {left} and {right}")]
    MixedBase { left: usize, right: usize },
    #[error("`{0}` needs a base size but the environment is empty")]
    NoBase(&'static str),
    #[error(transparent)]
    Relation(RelError),
}

impl From<RelError> for RelExprError {
    fn from(e: RelError) -> Self {
        match e {
            RelError::DimensionMismatch { left, right } => RelExprError::MixedBase { left, right },
            other => RelExprError::Relation(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Rel(Relation),
    Bool(bool),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Rel(r) => {
                let pairs: Vec<String> = r.pairs().map(|(x, y)| format!("({x},{y})")).collect();
                write!(f, "{{{}}}", pairs.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok<'a> {
    Name(&'a str),
    Semi,
    Star,
    Join,
    Meet,
    Refines,
    LParen,
    RParen,
    End,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok<'_>)>, RelExprError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let rest = &src[i..];
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let (tok, len) = if rest.starts_with("|_|") {
            (Tok::Join, 3)
        } else if rest.starts_with("|-|") {
            (Tok::Meet, 3)
        } else if rest.starts_with("<<=") {
            (Tok::Refines, 3)
        } else if c == b';' {
            (Tok::Semi, 1)
        } else if c == b'*' {
            (Tok::Star, 1)
        } else if c == b'(' {
            (Tok::LParen, 1)
        } else if c == b')' {
            (Tok::RParen, 1)
        } else if c.is_ascii_alphanumeric() || c == b'_' {
            let len = rest.bytes().take_while(|b| b.is_ascii_alphanumeric() || *b == b'_').count();
            (Tok::Name(&rest[..len]), len)
        } else {
            let ch = rest.chars().next().unwrap_or('?');
            return Err(RelExprError::Parse { pos: i, msg: format!("unexpected character `{ch}`") });
        };
        out.push((i, tok));
        i += len;
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser<'a, 'e> {
    toks: Vec<(usize, Tok<'a>)>,
    at: usize,
    env: &'e BTreeMap<String, Relation>,
}

impl<'a> Parser<'a, '_> {
    fn peek(&self) -> Tok<'a> {
        self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok<'a> {
        let t = self.peek();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok<'static>, what: &str) -> Result<(), RelExprError> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(RelExprError::Parse { pos: self.pos(), msg: format!("expected {what}") })
        }
    }

    fn comparison(&mut self) -> Result<Value, RelExprError> {
        let lhs = self.meet()?;
        if self.peek() != Tok::Refines {
            return Ok(Value::Rel(lhs));
        }
        self.bump();
        let rhs = self.meet()?;
        if self.peek() == Tok::Refines {
            return Err(RelExprError::Parse { pos: self.pos(), msg: "`<<=` does not chain".into() });
        }
        Ok(Value::Bool(relcore::demonic_refines(&lhs, &rhs)?))
    }

    fn meet(&mut self) -> Result<Relation, RelExprError> {
        let mut acc = self.join()?;
        while self.peek() == Tok::Meet {
            self.bump();
            let rhs = self.join()?;
            acc = relcore::demonic_meet(&acc, &rhs)?;
        }
        Ok(acc)
    }

    fn join(&mut self) -> Result<Relation, RelExprError> {
        let mut acc = self.seq()?;
        while self.peek() == Tok::Join {
            self.bump();
            let rhs = self.seq()?;
            acc = relcore::demonic_join(&acc, &rhs)?;
        }
        Ok(acc)
    }

    fn seq(&mut self) -> Result<Relation, RelExprError> {
        let mut acc = self.atom()?;
        loop {
            let op = self.peek();
            if op != Tok::Semi && op != Tok::Star {
                return Ok(acc);
            }
            self.bump();
            let rhs = self.atom()?;
            acc = if op == Tok::Semi { relcore::compose(&acc, &rhs)? } else { relcore::demonic_compose(&acc, &rhs)? };
        }
    }

    fn env_base(&self, what: &'static str) -> Result<usize, RelExprError> {
        self.env.values().next().map(Relation::base_size).ok_or(RelExprError::NoBase(what))
    }

    fn atom(&mut self) -> Result<Relation, RelExprError> {
        let pos = self.pos();
        match self.bump() {
            Tok::LParen => {
                let inner = self.meet()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Name("empty") => Ok(Relation::empty(self.env_base("empty")?)),
            Tok::Name("id") => Ok(Relation::identity(self.env_base("id")?)),
            Tok::Name(f @ ("dom" | "sat")) if self.peek() == Tok::LParen => {
                self.bump();
                let arg = self.meet()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(if f == "dom" { Relation::diagonal(&relcore::dom(&arg)) } else { relcore::saturate_infinity(&arg) })
            }
            Tok::Name(n) => self.env.get(n).cloned().ok_or_else(|| RelExprError::Unbound(n.to_owned())),
            Tok::End => Err(RelExprError::Parse { pos, msg: "unexpected end of input".into() }),
            _ => Err(RelExprError::Parse { pos, msg: "expected a relation".into() }),
        }
    }
}

/// Evaluates `expr` against `env`. All relations in `env` must share one
/// base size.
pub fn eval_relexpr(env: &BTreeMap<String, Relation>, expr: &str) -> Result<Value, RelExprError> {
    let mut bases = env.values().map(Relation::base_size);
    if let Some(first) = bases.next() {
        if let Some(other) = bases.find(|&b| b != first) {
            return Err(RelExprError::MixedBase { left: first, right: other });
        }
    }
    let mut p = Parser { toks: tokenize(expr)?, at: 0, env };
    let v = p.comparison()?;
    if p.peek() != Tok::End {
        return Err(RelExprError::Parse { pos: p.pos(), msg: "trailing input".into() });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    type Binding<'a> = (&'a str, usize, &'a [(usize, usize)]);

    fn env(items: &[Binding]) -> BTreeMap<String, Relation> {
        items
            .iter()
            .map(|(n, base, pairs)| (n.to_string(), Relation::from_pairs(*base, pairs.iter().copied()).unwrap()))
            .collect()
    }

    fn rel(base: usize, pairs: &[(usize, usize)]) -> Value {
        Value::Rel(Relation::from_pairs(base, pairs.iter().copied()).unwrap())
    }

    #[test]
    fn spec_examples() {
        let e = env(&[("R", 3, &[(0, 1)]), ("S", 3, &[(1, 2)])]);
        assert_eq!(eval_relexpr(&e, "R;S").unwrap(), rel(3, &[(0, 2)]));
        assert_eq!(eval_relexpr(&e, "R <<= empty").unwrap(), Value::Bool(true));
        let e = env(&[("R", 3, &[(0, 1), (0, 2)]), ("S", 3, &[(1, 1)])]);
        assert_eq!(eval_relexpr(&e, "R*S").unwrap(), rel(3, &[]));
    }

    #[test]
    fn precedence_and_grouping() {
        let e = env(&[("R", 3, &[(0, 1)]), ("S", 3, &[(1, 2)]), ("T", 3, &[(0, 0)])]);
        // `;` binds tighter than `|_|`
        let lhs = eval_relexpr(&e, "R;S |_| T").unwrap();
        assert_eq!(lhs, eval_relexpr(&e, "(R;S) |_| T").unwrap());
        assert_eq!(lhs, rel(3, &[(0, 0), (0, 2)]));
        // `|_|` binds tighter than `|-|`: R |-| (S |_| T)
        let Value::Rel(st) = eval_relexpr(&e, "S |_| T").unwrap() else { panic!() };
        let expected = relcore::demonic_meet(&e["R"], &st).unwrap();
        assert_eq!(eval_relexpr(&e, "R |-| S |_| T").unwrap(), Value::Rel(expected));
    }

    #[test]
    fn functions() {
        let e = env(&[("R", 2, &[(0, 1)])]);
        assert_eq!(eval_relexpr(&e, "dom(R)").unwrap(), rel(2, &[(0, 0)]));
        assert_eq!(eval_relexpr(&e, "dom(R);R").unwrap(), rel(2, &[(0, 1)]));
        assert_eq!(eval_relexpr(&e, "sat(R)").unwrap(), Value::Rel(relcore::saturate_infinity(&e["R"])));
        assert_eq!(eval_relexpr(&e, "id;R").unwrap(), rel(2, &[(0, 1)]));
    }

    #[test]
    fn errors() {
        let e = env(&[("R", 2, &[(0, 1)])]);
        assert_eq!(eval_relexpr(&e, "R;Q"), Err(RelExprError::Unbound("Q".into())));
        assert!(matches!(eval_relexpr(&e, "R;"), Err(RelExprError::Parse { pos: 2, .. })));
        assert!(matches!(eval_relexpr(&e, "R $ R"), Err(RelExprError::Parse { pos: 2, .. })));
        assert!(matches!(eval_relexpr(&e, "(R"), Err(RelExprError::Parse { pos: 2, .. })));
        assert!(matches!(eval_relexpr(&e, "R <<= R <<= R"), Err(RelExprError::Parse { pos: 8, .. })));
        assert!(matches!(eval_relexpr(&e, "R;sat(R)"), Err(RelExprError::MixedBase { left: 2, right: 3 })));
        assert!(matches!(eval_relexpr(&e, "R R"), Err(RelExprError::Parse { pos: 2, .. })));
        let mixed = env(&[("R", 2, &[]), ("S", 3, &[])]);
        assert!(matches!(eval_relexpr(&mixed, "R"), Err(RelExprError::MixedBase { .. })));
        assert_eq!(eval_relexpr(&BTreeMap::new(), "empty"), Err(RelExprError::NoBase("empty")));
    }
}
