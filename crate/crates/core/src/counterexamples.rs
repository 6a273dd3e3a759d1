//! The `Sₙ` family of non-representable structures and exhaustive enumeration
//! of small structures.

use thiserror::Error;

use crate::structure::{validate, FinStructure};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("S_{n} would have {elements} elements, above the cap of {cap}")]
    TooLarge { n: u32, elements: u128, cap: usize },
    #[error("exhaustive enumeration is capped at {cap} elements (asked for {asked})")]
    SizeCap { asked: usize, cap: usize },
}

/// Default element cap for [`gen_sn`]: keeps the composition table well
/// below a gigabyte.
pub const DEFAULT_SN_ELEMENT_CAP: usize = 4096;

/// Largest size [`enumerate_small`] accepts.
pub const ENUMERATE_CAP: usize = 3;

/// Number of elements of `Sₙ`: `3 + 3N` with `N = 1 + 2ⁿ`.
pub fn sn_size(n: u32) -> u128 {
    let big_n = 1u128.checked_shl(n).map(|p| p + 1).unwrap_or(u128::MAX / 8);
    3 + 3 * big_n
}

pub fn gen_sn(n: u32) -> Result<FinStructure, GenerateError> {
    gen_sn_capped(n, DEFAULT_SN_ELEMENT_CAP)
}

/// `Sₙ` over elements `0, b, c, a0, a0b, a0c, a1, ...` with `aᵢ∘b = aᵢb`,
/// `aᵢ∘c = aᵢc` and every other product `0`; the order is the reflexive
/// closure of `s ≤ 0`, `aᵢ₊₁b ≤ aᵢ`, `aᵢ ≤ aᵢ₊₁c`, `aᵢb ≤ aᵢc` (indices
/// mod `N`).
pub fn gen_sn_capped(n: u32, cap: usize) -> Result<FinStructure, GenerateError> {
    let elements = sn_size(n);
    if n >= 64 || elements > cap as u128 {
        return Err(GenerateError::TooLarge { n, elements, cap });
    }
    let big_n = (elements as usize - 3) / 3;
    let (zero, b, c) = (0, 1, 2);
    let a = |i: usize| 3 + 3 * (i % big_n);
    let ab = |i: usize| a(i) + 1;
    let ac = |i: usize| a(i) + 2;

    let mut names = vec!["0".to_owned(), "b".to_owned(), "c".to_owned()];
    for i in 0..big_n {
        names.extend([format!("a{i}"), format!("a{i}b"), format!("a{i}c")]);
    }
    let m = names.len();

    let mut leq = vec![vec![false; m]; m];
    for (x, row) in leq.iter_mut().enumerate() {
        row[x] = true;
        row[zero] = true;
    }
    for i in 0..big_n {
        leq[ab(i + 1)][a(i)] = true;
        leq[a(i)][ac(i + 1)] = true;
        leq[ab(i)][ac(i)] = true;
    }

    let mut comp = vec![vec![zero; m]; m];
    for i in 0..big_n {
        comp[a(i)][b] = ab(i);
        comp[a(i)][c] = ac(i);
    }
    Ok(FinStructure::new(names, leq, comp).expect("S_n tables are well formed"))
}

/// Names used for enumerated structures.
const ENUM_NAMES: [&str; ENUMERATE_CAP] = ["a", "b", "c"];

/// All labeled partial orders on `k` points, as row-major matrices.
pub fn labeled_posets(k: usize) -> Vec<Vec<bool>> {
    let off: Vec<(usize, usize)> =
        (0..k).flat_map(|a| (0..k).map(move |b| (a, b))).filter(|(a, b)| a != b).collect();
    let mut out = Vec::new();
    for mask in 0u64..(1 << off.len()) {
        let mut leq = vec![false; k * k];
        for a in 0..k {
            leq[a * k + a] = true;
        }
        for (bit, &(a, b)) in off.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                leq[a * k + b] = true;
            }
        }
        let antisym = (0..k).all(|a| (0..k).all(|b| a == b || !(leq[a * k + b] && leq[b * k + a])));
        let trans = (0..k).all(|a| {
            (0..k).all(|b| !leq[a * k + b] || (0..k).all(|c| !leq[b * k + c] || leq[a * k + c]))
        });
        if antisym && trans {
            out.push(leq);
        }
    }
    out
}

/// All associative operation tables on `k` points, as row-major vectors.
pub fn associative_tables(k: usize) -> Vec<Vec<usize>> {
    let cells = k * k;
    let total = k.pow(cells as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut table = vec![0; cells];
        let mut rest = code;
        for cell in table.iter_mut() {
            *cell = rest % k;
            rest /= k;
        }
        let assoc = (0..k).all(|a| {
            (0..k).all(|b| (0..k).all(|c| table[table[a * k + b] * k + c] == table[a * k + table[b * k + c]]))
        });
        if assoc {
            out.push(table);
        }
    }
    out
}

/// Encoding compared when choosing the canonical member of an isomorphism
/// class: order bits then composition entries, both row-major.
fn encode(k: usize, leq: &[bool], comp: &[usize], perm: &[usize]) -> Vec<usize> {
    // perm maps old index -> new index
    let mut inv = vec![0; k];
    for (old, &new) in perm.iter().enumerate() {
        inv[new] = old;
    }
    let mut code = Vec::with_capacity(2 * k * k);
    for a in 0..k {
        for b in 0..k {
            code.push(leq[inv[a] * k + inv[b]] as usize);
        }
    }
    for a in 0..k {
        for b in 0..k {
            code.push(perm[comp[inv[a] * k + inv[b]]]);
        }
    }
    code
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// Every labeled structure with at most `max_size` elements whose order is a
/// partial order and whose composition is associative, smallest sizes first.
///
/// With `dedupe`, only the member of each isomorphism class whose encoding is
/// lexicographically least over all relabelings is kept.
pub fn enumerate_small(
    max_size: usize,
    dedupe: bool,
) -> Result<impl Iterator<Item = FinStructure>, GenerateError> {
    if max_size > ENUMERATE_CAP {
        return Err(GenerateError::SizeCap { asked: max_size, cap: ENUMERATE_CAP });
    }
    Ok((0..=max_size).flat_map(move |k| {
        let posets = labeled_posets(k);
        let tables = associative_tables(k);
        let perms = permutations(k);
        let identity: Vec<usize> = (0..k).collect();
        posets.into_iter().flat_map(move |leq| {
            let perms = perms.clone();
            let identity = identity.clone();
            tables.clone().into_iter().filter_map(move |comp| {
                if dedupe {
                    let own = encode(k, &leq, &comp, &identity);
                    if perms.iter().any(|p| encode(k, &leq, &comp, p) < own) {
                        return None;
                    }
                }
                let names = ENUM_NAMES[..k].iter().map(|s| s.to_string()).collect();
                let s = FinStructure::from_fns(names, |a, b| leq[a * k + b], |a, b| comp[a * k + b])
                    .expect("enumerated tables are well formed");
                debug_assert!(validate(&s).is_valid());
                Some(s)
            })
        })
    }))
}

/// Every labeled structure of size at most 2 followed by one representative
/// per isomorphism class of size 3.
pub fn desk_corpus() -> Vec<FinStructure> {
    let small = enumerate_small(2, false).expect("within cap");
    let three = enumerate_small(3, true).expect("within cap").filter(|s| s.len() == 3);
    small.chain(three).collect()
}
