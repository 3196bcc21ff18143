//! Countable ordinals below ε₀ in Cantor normal form.
//!
//! An [`Ordinal`] is a strictly decreasing list of `ω^exponent · coefficient`
//! terms. Every transfinite construction in this crate recurses on the
//! zero / successor / limit trichotomy exposed by [`Ordinal::classify`], and
//! limit stages are unfolded through the deterministic enumeration
//! [`enumerate_below`].
//!
//! The textual form used on the command line and in JSON is
//!
//! ```text
//! expr := term ("+" term)*
//! term := nat | "w" ("^" exp)? ("*" nat)?
//! exp  := nat | "w" | "(" expr ")"
//! ```
//!
//! so `ω²·3 + ω + 4` is written `w^2*3+w+4` and `ω^(ω+1)` is `w^(w+1)`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrdinalError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("{0} is not a limit ordinal")]
    NotLimit(Ordinal),
    #[error("{0} is not below {1}")]
    NotBelow(Ordinal, Ordinal),
}

/// A countable ordinal below ε₀, stored in Cantor normal form.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Ordinal {
    // (exponent, coefficient), exponents strictly decreasing, coefficients >= 1
    terms: Vec<(Ordinal, u64)>,
}

/// The zero / successor / limit trichotomy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrdinalKind {
    Zero,
    Successor(Ordinal),
    Limit,
}

impl Ordinal {
    pub fn zero() -> Self {
        Ordinal { terms: Vec::new() }
    }

    pub fn nat(n: u64) -> Self {
        if n == 0 {
            Self::zero()
        } else {
            Ordinal {
                terms: vec![(Self::zero(), n)],
            }
        }
    }

    pub fn omega() -> Self {
        Self::omega_pow(Self::nat(1))
    }

    /// `ω^exponent`.
    pub fn omega_pow(exponent: Ordinal) -> Self {
        Ordinal {
            terms: vec![(exponent, 1)],
        }
    }

    /// `ω^exponent · coefficient`.
    pub fn monomial(exponent: Ordinal, coefficient: u64) -> Self {
        if coefficient == 0 {
            Self::zero()
        } else {
            Ordinal {
                terms: vec![(exponent, coefficient)],
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(Ordinal, u64)] {
        &self.terms
    }

    /// The value as a natural number, if finite.
    pub fn as_nat(&self) -> Option<u64> {
        match self.terms.as_slice() {
            [] => Some(0),
            [(e, c)] if e.is_zero() => Some(*c),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_nat().is_some()
    }

    pub fn classify(&self) -> OrdinalKind {
        match self.terms.last() {
            None => OrdinalKind::Zero,
            Some((e, c)) if e.is_zero() => {
                let mut terms = self.terms.clone();
                if *c == 1 {
                    terms.pop();
                } else {
                    terms.last_mut().unwrap().1 = c - 1;
                }
                OrdinalKind::Successor(Ordinal { terms })
            }
            Some(_) => OrdinalKind::Limit,
        }
    }

    pub fn is_limit(&self) -> bool {
        matches!(self.classify(), OrdinalKind::Limit)
    }

    /// The predecessor of a successor ordinal.
    pub fn predecessor(&self) -> Option<Ordinal> {
        match self.classify() {
            OrdinalKind::Successor(p) => Some(p),
            _ => None,
        }
    }

    pub fn succ(&self) -> Ordinal {
        self.add(&Ordinal::nat(1))
    }

    /// Ordinal addition `self + rhs` (not commutative).
    pub fn add(&self, rhs: &Ordinal) -> Ordinal {
        let Some((lead_exp, lead_coeff)) = rhs.terms.first() else {
            return self.clone();
        };
        let mut terms: Vec<(Ordinal, u64)> = Vec::new();
        let mut merged = *lead_coeff;
        for (e, c) in &self.terms {
            match e.cmp(lead_exp) {
                Ordering::Greater => terms.push((e.clone(), *c)),
                Ordering::Equal => {
                    merged = merged.checked_add(*c).expect("ordinal coefficient overflow");
                }
                Ordering::Less => break,
            }
        }
        terms.push((lead_exp.clone(), merged));
        terms.extend(rhs.terms[1..].iter().cloned());
        Ordinal { terms }
    }

    /// Splits a nonzero ordinal as `rest + ω^γ`, where `ω^γ` is its last
    /// (smallest) power.
    fn split_last_power(&self) -> (Ordinal, Ordinal) {
        let mut terms = self.terms.clone();
        let (e, c) = terms.pop().expect("split_last_power on zero");
        if c > 1 {
            terms.push((e.clone(), c - 1));
        }
        (Ordinal { terms }, e)
    }

    /// If `prefix <= self` and `self` extends the CNF of `prefix` term by
    /// term, the remaining terms.
    fn strip_prefix(&self, prefix: &Ordinal) -> Option<Ordinal> {
        let n = prefix.terms.len();
        if n == 0 {
            return Some(self.clone());
        }
        if self.terms.len() < n || self.terms[..n - 1] != prefix.terms[..n - 1] {
            return None;
        }
        let (pe, pc) = &prefix.terms[n - 1];
        let (se, sc) = &self.terms[n - 1];
        if pe != se || sc < pc {
            return None;
        }
        let mut terms = Vec::new();
        if sc > pc {
            terms.push((se.clone(), sc - pc));
        }
        terms.extend(self.terms[n..].iter().cloned());
        Some(Ordinal { terms })
    }
}

impl Ord for Ordinal {
    fn cmp(&self, other: &Self) -> Ordering {
        for ((ea, ca), (eb, cb)) in self.terms.iter().zip(&other.terms) {
            match ea.cmp(eb).then(ca.cmp(cb)) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.terms.len().cmp(&other.terms.len())
    }
}

impl PartialOrd for Ordinal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<u64> for Ordinal {
    fn from(n: u64) -> Self {
        Ordinal::nat(n)
    }
}

// ---------------------------------------------------------------------------
// Pairing and enumeration
// ---------------------------------------------------------------------------

/// Cantor pairing `⟨m, k⟩ = (m+k)(m+k+1)/2 + k`. `None` on overflow.
pub fn pair(m: u64, k: u64) -> Option<u64> {
    let w = m.checked_add(k)?;
    let tri = (w as u128) * (w as u128 + 1) / 2;
    u64::try_from(tri + k as u128).ok()
}

/// Inverse of [`pair`].
pub fn unpair(n: u64) -> (u64, u64) {
    // largest w with w(w+1)/2 <= n
    let mut w = (((8.0 * n as f64 + 1.0).sqrt() - 1.0) / 2.0) as u64;
    while (w as u128) * (w as u128 + 1) / 2 > n as u128 {
        w -= 1;
    }
    while ((w + 1) as u128) * ((w + 2) as u128) / 2 <= n as u128 {
        w += 1;
    }
    let k = n - ((w as u128) * (w as u128 + 1) / 2) as u64;
    (w - k, k)
}

/// The canonical enumeration `n ↦ β_n` of `[0, α)` for a limit ordinal `α`.
///
/// For `α = rest + ω^γ` with `rest > 0`, even indices enumerate `[0, rest)`
/// and odd indices enumerate `[rest, α)`. `[0, ω)` is the identity;
/// `[0, ω^(δ+1))` dovetails the blocks `[ω^δ·m, ω^δ·(m+1))` through
/// [`pair`]; `[0, ω^γ)` for limit `γ` sends index 0 to 0 and dovetails the
/// blocks `[ω^γ', ω^(γ'+1))` for `γ' < γ` along the enumeration of `γ`.
pub fn enumerate_below(alpha: &Ordinal, n: u64) -> Result<Ordinal, OrdinalError> {
    if !alpha.is_limit() {
        return Err(OrdinalError::NotLimit(alpha.clone()));
    }
    Ok(enumerate_limit(alpha, n))
}

fn enumerate_limit(alpha: &Ordinal, n: u64) -> Ordinal {
    let (rest, gamma) = alpha.split_last_power();
    if rest.is_zero() {
        enumerate_power(&gamma, n)
    } else if n.is_multiple_of(2) {
        enumerate_limit(&rest, n / 2)
    } else {
        rest.add(&enumerate_power(&gamma, n / 2))
    }
}

/// Enumerates `[0, ω^γ)` for `γ >= 1`.
fn enumerate_power(gamma: &Ordinal, n: u64) -> Ordinal {
    match gamma.classify() {
        OrdinalKind::Zero => unreachable!("ω^0 = 1 has no enumeration"),
        OrdinalKind::Successor(delta) if delta.is_zero() => Ordinal::nat(n),
        OrdinalKind::Successor(delta) => {
            let (m, k) = unpair(n);
            Ordinal::monomial(delta.clone(), m).add(&enumerate_power(&delta, k))
        }
        OrdinalKind::Limit => {
            if n == 0 {
                return Ordinal::zero();
            }
            let (m, k) = unpair(n - 1);
            let leading = enumerate_limit(gamma, m);
            enumerate_block(&leading, k)
        }
    }
}

/// Enumerates `[ω^γ', ω^(γ'+1))`: the ordinals whose leading exponent is `γ'`.
fn enumerate_block(leading: &Ordinal, k: u64) -> Ordinal {
    if leading.is_zero() {
        return Ordinal::nat(k + 1);
    }
    let (c, j) = unpair(k);
    Ordinal::monomial(leading.clone(), c + 1).add(&enumerate_power(leading, j))
}

/// The index `n` with `enumerate_below(alpha, n) == beta`. `None` if the
/// index does not fit in a `u64`.
pub fn enumeration_index(alpha: &Ordinal, beta: &Ordinal) -> Result<Option<u64>, OrdinalError> {
    if !alpha.is_limit() {
        return Err(OrdinalError::NotLimit(alpha.clone()));
    }
    if beta >= alpha {
        return Err(OrdinalError::NotBelow(beta.clone(), alpha.clone()));
    }
    Ok(index_limit(alpha, beta))
}

fn index_limit(alpha: &Ordinal, beta: &Ordinal) -> Option<u64> {
    let (rest, gamma) = alpha.split_last_power();
    if rest.is_zero() {
        index_power(&gamma, beta)
    } else if beta < &rest {
        index_limit(&rest, beta)?.checked_mul(2)
    } else {
        let tail = beta.strip_prefix(&rest)?;
        index_power(&gamma, &tail)?.checked_mul(2)?.checked_add(1)
    }
}

fn index_power(gamma: &Ordinal, beta: &Ordinal) -> Option<u64> {
    match gamma.classify() {
        OrdinalKind::Zero => None,
        OrdinalKind::Successor(delta) if delta.is_zero() => beta.as_nat(),
        OrdinalKind::Successor(delta) => {
            let (m, rho) = match beta.terms.first() {
                Some((e, c)) if *e == delta => (*c, Ordinal { terms: beta.terms[1..].to_vec() }),
                _ => (0, beta.clone()),
            };
            pair(m, index_power(&delta, &rho)?)
        }
        OrdinalKind::Limit => {
            let Some((lead, c)) = beta.terms.first() else {
                return Some(0);
            };
            let m = index_limit(gamma, lead)?;
            let k = if lead.is_zero() {
                c - 1
            } else {
                let rho = Ordinal { terms: beta.terms[1..].to_vec() };
                pair(c - 1, index_power(lead, &rho)?)?
            };
            pair(m, k)?.checked_add(1)
        }
    }
}

// ---------------------------------------------------------------------------
// Printing and parsing
// ---------------------------------------------------------------------------

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            if e.is_zero() {
                write!(f, "{c}")?;
                continue;
            }
            f.write_str("w")?;
            if let Some(n) = e.as_nat() {
                if n != 1 {
                    write!(f, "^{n}")?;
                }
            } else if *e == Ordinal::omega() {
                f.write_str("^w")?;
            } else {
                write!(f, "^({e})")?;
            }
            if *c != 1 {
                write!(f, "*{c}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ordinal({self})")
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, OrdinalError> {
        Err(OrdinalError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn nat(&mut self) -> Result<u64, OrdinalError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a natural number");
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse().or_else(|_| self.err("natural number out of range"))
    }

    fn expr(&mut self) -> Result<Ordinal, OrdinalError> {
        let mut acc = self.term()?;
        while self.eat(b'+') {
            let t = self.term()?;
            acc = acc.add(&t);
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Ordinal, OrdinalError> {
        match self.peek() {
            Some(b'0'..=b'9') => Ok(Ordinal::nat(self.nat()?)),
            Some(b'w') => {
                self.pos += 1;
                let exponent = if self.eat(b'^') { self.exponent()? } else { Ordinal::nat(1) };
                let coefficient = if self.eat(b'*') { self.nat()? } else { 1 };
                Ok(Ordinal::monomial(exponent, coefficient))
            }
            Some(_) => self.err("expected a natural number or 'w'"),
            None => self.err("unexpected end of input"),
        }
    }

    fn exponent(&mut self) -> Result<Ordinal, OrdinalError> {
        match self.peek() {
            Some(b'0'..=b'9') => Ok(Ordinal::nat(self.nat()?)),
            Some(b'w') => {
                self.pos += 1;
                Ok(Ordinal::omega())
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return self.err("expected ')'");
                }
                Ok(e)
            }
            _ => self.err("expected an exponent"),
        }
    }
}

/// Parses an ordinal expression; non-canonical sums are normalized.
pub fn parse_ordinal(text: &str) -> Result<Ordinal, OrdinalError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let value = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(value)
}

impl FromStr for Ordinal {
    type Err = OrdinalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_ordinal(s)
    }
}

impl Serialize for Ordinal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ordinal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_ordinal(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn o(s: &str) -> Ordinal {
        parse_ordinal(s).unwrap()
    }

    #[test]
    fn parse_examples() {
        assert!(o("0").is_zero());
        assert_eq!(o("w").terms(), &[(Ordinal::nat(1), 1)]);
        let a = o("w^2*3+w+4");
        assert_eq!(a.terms().len(), 3);
        assert_eq!(a.to_string(), "w^2*3+w+4");
        assert_eq!(o("w+w^2"), o("w^2"));
        assert_eq!(o("w^0"), Ordinal::nat(1));
        assert_eq!(o("3+w"), Ordinal::omega());
        assert_eq!(o("w*2+w"), o("w*3"));
        assert_eq!(o(" w ^ ( w + 1 ) ").to_string(), "w^(w+1)");
        assert_eq!(o("w^w").to_string(), "w^w");
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "w^^2", "w+", "x", "w^2*", "(w)", "w^(w", "2 3"] {
            assert!(parse_ordinal(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(o("5").classify(), OrdinalKind::Successor(o("4")));
        assert_eq!(o("w").classify(), OrdinalKind::Limit);
        assert_eq!(o("w*2+3").classify(), OrdinalKind::Successor(o("w*2+2")));
        assert_eq!(o("0").classify(), OrdinalKind::Zero);
        assert_eq!(o("w+1").predecessor(), Some(o("w")));
    }

    #[test]
    fn compare_examples() {
        assert!(o("w") > o("5"));
        assert!(o("w+1") > o("w"));
        assert!(o("w^2") > o("w*7+3"));
        assert!(o("w^w") > o("w^5*100"));
        assert!(o("w^(w+1)") > o("w^w*9"));
    }

    #[test]
    fn pairing_round_trip() {
        for n in 0..5000 {
            let (m, k) = unpair(n);
            assert_eq!(pair(m, k), Some(n));
        }
        assert_eq!(pair(0, 0), Some(0));
        assert_eq!(pair(1, 0), Some(1));
        assert_eq!(pair(0, 1), Some(2));
    }

    #[test]
    fn omega_enumeration_is_identity() {
        for n in 0..100 {
            assert_eq!(enumerate_below(&Ordinal::omega(), n).unwrap(), Ordinal::nat(n));
        }
    }

    #[test]
    fn omega_times_two_interleaves() {
        let a = o("w*2");
        for k in 0..200 {
            assert_eq!(enumerate_below(&a, 2 * k).unwrap(), Ordinal::nat(k));
            assert_eq!(enumerate_below(&a, 2 * k + 1).unwrap(), o("w").add(&Ordinal::nat(k)));
        }
    }

    #[test]
    fn enumeration_requires_limit() {
        assert!(matches!(enumerate_below(&o("w+1"), 0), Err(OrdinalError::NotLimit(_))));
        assert!(enumerate_below(&o("0"), 0).is_err());
    }

    // Exhaustive injectivity, boundedness and inverse agreement over the
    // first 10^4 indices.
    #[test]
    fn enumeration_is_injective_and_bounded() {
        for alpha in ["w", "w*2", "w^2", "w^2+w*3", "w^3", "w^w", "w^(w+1)*2+w"] {
            let alpha = o(alpha);
            let mut seen = HashSet::new();
            for n in 0..10_000u64 {
                let beta = enumerate_below(&alpha, n).unwrap();
                assert!(beta < alpha, "{beta} not below {alpha}");
                assert_eq!(enumeration_index(&alpha, &beta).unwrap(), Some(n), "{alpha} at {n}");
                assert!(seen.insert(beta), "{alpha}: duplicate at {n}");
            }
        }
    }

    #[test]
    fn enumeration_covers_test_set() {
        let cases = [
            ("w*2", vec!["0", "7", "w", "w+12"]),
            ("w^2", vec!["0", "3", "w", "w*4+2", "w*9"]),
            ("w^w", vec!["0", "1", "w", "w^2", "w^3*2+w+1", "w^5"]),
            ("w^2+w", vec!["w^2", "w^2+5", "w*3+1"]),
        ];
        for (alpha, betas) in cases {
            let alpha = o(alpha);
            for beta in betas {
                let beta = o(beta);
                let n = enumeration_index(&alpha, &beta).unwrap().expect("index fits");
                assert_eq!(enumerate_below(&alpha, n).unwrap(), beta);
            }
        }
        assert!(enumeration_index(&o("w"), &o("w")).is_err());
    }

    #[test]
    fn first_summand_is_zero() {
        for alpha in ["w", "w*2", "w^2", "w^w", "w^2*2+w"] {
            assert!(enumerate_below(&o(alpha), 0).unwrap().is_zero());
        }
    }
}
