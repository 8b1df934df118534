//! Parsers for the literal grammar shared by the library and the CLI.
//!
//! Coefficients: `p/q` or `p` for rationals; Novikov sums of `c*T^(a/b)`
//! terms joined by `+`/`-` (integer exponents may omit the parens, `T`
//! alone means `T^1`). Series: sums of `c*u^k` terms, `k` an integer
//! (negative exponents as `u^-2` or `u^(-2)`), with an optional trailing
//! `+ O(u^N)` setting the precision. Whitespace is insignificant.

use alloc::format;
use alloc::string::String;
use core::str::FromStr;

use num_bigint::BigInt;
use num_traits::One;

use crate::coeff::{FieldConfig, FieldElem, FieldKind, Rat};
use crate::error::{Error, Result};
use crate::useries::{SeriesKind, USeries};

struct Cur<'a> {
    s: &'a [u8],
    i: usize,
}

impl<'a> Cur<'a> {
    fn new(s: &'a str) -> Self {
        Cur { s: s.as_bytes(), i: 0 }
    }
    fn skip_ws(&mut self) {
        while self.i < self.s.len() && (self.s[self.i] as char).is_whitespace() {
            self.i += 1;
        }
    }
    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.i).copied()
    }
    fn peek_raw(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }
    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.i += 1;
            true
        } else {
            false
        }
    }
    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }
    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }
    fn err(&self, msg: &str) -> Error {
        let shown = core::str::from_utf8(self.s).unwrap_or("<non-utf8>");
        Error::input(format!("{} at byte {} in {:?}", msg, self.i, shown))
    }

    fn parse_uint(&mut self) -> Result<BigInt> {
        self.skip_ws();
        let start = self.i;
        while self
            .peek_raw()
            .map(|c| c.is_ascii_digit())
            .unwrap_or(false)
        {
            self.i += 1;
        }
        if self.i == start {
            return Err(self.err("expected a number"));
        }
        let txt = core::str::from_utf8(&self.s[start..self.i]).unwrap();
        BigInt::from_str(txt).map_err(|_| self.err("bad integer"))
    }

    /// `['-'] p ['/' q]`
    fn parse_rat(&mut self) -> Result<Rat> {
        let neg = self.eat(b'-');
        if !neg {
            let _ = self.eat(b'+');
        }
        let p = self.parse_uint()?;
        let q = if self.peek() == Some(b'/') {
            self.i += 1;
            let q = self.parse_uint()?;
            if q == BigInt::from(0) {
                return Err(self.err("zero denominator"));
            }
            q
        } else {
            BigInt::one()
        };
        let r = Rat::new(p, q);
        Ok(if neg { -r } else { r })
    }

    /// Exponent after `^`: `3`, `-3`, `(3)`, `(-1/3)`.
    fn parse_exponent(&mut self) -> Result<Rat> {
        if self.eat(b'(') {
            let r = self.parse_rat()?;
            self.expect(b')')?;
            Ok(r)
        } else {
            self.parse_rat()
        }
    }

    /// `T` or `T^e`; returns the exponent.
    fn parse_tpow(&mut self) -> Result<Rat> {
        self.expect(b'T')?;
        if self.eat(b'^') {
            self.parse_exponent()
        } else {
            Ok(Rat::one())
        }
    }

    /// A coefficient term: product of rational and T-power factors.
    fn parse_cterm(&mut self, cfg: &FieldConfig) -> Result<FieldElem> {
        let mut acc = FieldElem::one(cfg.kind);
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_digit() => {
                    let r = self.parse_rat()?;
                    acc = acc.mul(&FieldElem::from_rat(cfg.kind, r));
                }
                Some(b'T') => {
                    let q = self.parse_tpow()?;
                    if cfg.kind == FieldKind::Rational {
                        return Err(self.err("Novikov generator T in a rational field context"));
                    }
                    acc = acc.mul(&FieldElem::monomial(Rat::one(), q));
                }
                _ => return Err(self.err("expected a coefficient term")),
            }
            if self.peek() == Some(b'*') {
                // only consume the '*' if another coefficient factor follows
                let save = self.i;
                self.i += 1;
                match self.peek() {
                    Some(c) if c.is_ascii_digit() || c == b'T' => continue,
                    _ => {
                        self.i = save;
                        break;
                    }
                }
            }
            break;
        }
        Ok(acc)
    }

    /// Full coefficient expression: signed sum of terms.
    fn parse_coeff_expr(&mut self, cfg: &FieldConfig) -> Result<FieldElem> {
        let mut acc = FieldElem::zero(cfg.kind);
        let mut neg = self.eat(b'-');
        loop {
            let t = self.parse_cterm(cfg)?;
            acc = if neg { acc.sub(&t) } else { acc.add(&t) };
            if self.eat(b'+') {
                neg = false;
            } else if self.eat(b'-') {
                neg = true;
            } else {
                break;
            }
        }
        Ok(acc)
    }

    /// `u`, `u^3`, `u^-3`, `u^(-3)`; returns the integer exponent.
    fn parse_upow(&mut self) -> Result<i64> {
        self.expect(b'u')?;
        if !self.eat(b'^') {
            return Ok(1);
        }
        let e = self.parse_exponent()?;
        if !e.is_integer() {
            return Err(self.err("u-exponents must be integers"));
        }
        i64::try_from(&e.to_integer()).map_err(|_| self.err("u-exponent out of range"))
    }

    /// One series summand: `[coeff *] u^k`, a bare coefficient, or `O(u^N)`.
    fn parse_sterm(&mut self, cfg: &FieldConfig) -> Result<STerm> {
        if self.peek() == Some(b'O') {
            self.i += 1;
            self.expect(b'(')?;
            let k = self.parse_upow()?;
            self.expect(b')')?;
            return Ok(STerm::Prec(k));
        }
        let mut coeff = FieldElem::one(cfg.kind);
        loop {
            match self.peek() {
                Some(b'u') => {
                    let k = self.parse_upow()?;
                    return Ok(STerm::Term(coeff, k));
                }
                Some(b'(') => {
                    self.i += 1;
                    let c = self.parse_coeff_expr(cfg)?;
                    self.expect(b')')?;
                    coeff = coeff.mul(&c);
                }
                Some(c) if c.is_ascii_digit() || c == b'T' => {
                    let c = self.parse_cterm(cfg)?;
                    coeff = coeff.mul(&c);
                }
                _ => return Err(self.err("expected a series term")),
            }
            if self.peek() == Some(b'*') {
                self.i += 1;
                continue;
            }
            break;
        }
        Ok(STerm::Term(coeff, 0))
    }
}

enum STerm {
    Term(FieldElem, i64),
    Prec(i64),
}

/// Parse a rational literal `p/q` / `p`.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let mut cur = Cur::new(s);
    let r = cur.parse_rat()?;
    if !cur.at_end() {
        return Err(cur.err("trailing input after rational"));
    }
    Ok(r)
}

/// Parse a coefficient literal in the given field.
pub fn parse_coeff(s: &str, cfg: &FieldConfig) -> Result<FieldElem> {
    let mut cur = Cur::new(s);
    let c = cur.parse_coeff_expr(cfg)?;
    if !cur.at_end() {
        return Err(cur.err("trailing input after coefficient"));
    }
    Ok(c)
}

/// Parse a series literal of the requested kind. Literals without an
/// `O(u^N)` marker are exact; tails refuse the marker and positive
/// exponents; power series refuse negative exponents.
pub fn parse_series(s: &str, kind: SeriesKind, cfg: &FieldConfig) -> Result<USeries> {
    let mut cur = Cur::new(s);
    let mut acc = USeries::zero(kind, *cfg);
    let mut prec: Option<i64> = None;
    let mut neg = cur.eat(b'-');
    loop {
        match cur.parse_sterm(cfg)? {
            STerm::Term(c, k) => {
                if prec.is_some() {
                    return Err(cur.err("terms after the O(u^N) marker"));
                }
                let c = if neg { c.neg() } else { c };
                let m = USeries::monomial(kind, *cfg, c, k)?;
                acc = acc.add(&m)?;
            }
            STerm::Prec(n) => {
                if neg {
                    return Err(cur.err("O(u^N) cannot be subtracted"));
                }
                if prec.replace(n).is_some() {
                    return Err(cur.err("duplicate O(u^N) marker"));
                }
                if kind == SeriesKind::Tail {
                    return Err(cur.err("tail literals are exact; no O(u^N) allowed"));
                }
            }
        }
        if cur.eat(b'+') {
            neg = false;
        } else if cur.eat(b'-') {
            neg = true;
        } else {
            break;
        }
    }
    if !cur.at_end() {
        return Err(cur.err("trailing input after series"));
    }
    let coeffs = acc.coeffs;
    USeries::from_coeffs(kind, *cfg, coeffs, prec)
}

/// A bare identifier (generator names in complex blocks).
pub fn parse_name(s: &str) -> Result<String> {
    let t = s.trim();
    if t.is_empty()
        || !t
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
        || t.chars().next().map_or(false, |c| c.is_ascii_digit())
    {
        return Err(Error::input(format!("bad identifier {:?}", s)));
    }
    Ok(String::from(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{rat, rat_i};

    #[test]
    fn rationals() {
        assert_eq!(parse_rat("3/2").unwrap(), rat(3, 2));
        assert_eq!(parse_rat("-5").unwrap(), rat_i(-5));
        assert_eq!(parse_rat(" 7 / 3 ").unwrap(), rat(7, 3));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("2x").is_err());
    }

    #[test]
    fn coefficients() {
        let nov = FieldConfig::novikov(2);
        let c = parse_coeff("3/2*T^(1/3) - T^2", &nov).unwrap();
        assert_eq!(c.literal(), "3/2*T^(1/3) - T^2");
        let d = parse_coeff("1 + T", &nov).unwrap();
        assert_eq!(d.literal(), "1 + T");
        let e = parse_coeff("0", &nov).unwrap();
        assert!(e.is_exact_zero());
        let rat_cfg = FieldConfig::rational();
        assert!(parse_coeff("1 + T", &rat_cfg).is_err());
        assert_eq!(parse_coeff("-5/3", &rat_cfg).unwrap().literal(), "-5/3");
    }

    #[test]
    fn series() {
        let cfg = FieldConfig::rational();
        let s = parse_series("u + u^2", SeriesKind::Power, &cfg).unwrap();
        assert_eq!(s.literal(), "u + u^2");
        let t = parse_series("1 - u + O(u^4)", SeriesKind::Power, &cfg).unwrap();
        assert_eq!(t.u_precision, Some(4));
        let l = parse_series("u^(-2) + 5", SeriesKind::Laurent, &cfg).unwrap();
        assert_eq!(l.literal(), "u^(-2) + 5");
        let m = parse_series("u^-2 + 5", SeriesKind::Laurent, &cfg).unwrap();
        assert_eq!(m, l);
        assert!(parse_series("u^-1", SeriesKind::Power, &cfg).is_err());
        assert!(parse_series("u + O(u^3) + 1", SeriesKind::Power, &cfg).is_err());
        assert_eq!(parse_series("0", SeriesKind::Power, &cfg).unwrap().literal(), "0");
    }

    #[test]
    fn novikov_series() {
        let cfg = FieldConfig::novikov(2);
        let s = parse_series("(1 + T)*u^2 + 3*u^5 + O(u^8)", SeriesKind::Power, &cfg).unwrap();
        assert_eq!(s.literal(), "(1 + T)*u^2 + 3*u^5 + O(u^8)");
        let roundtrip = parse_series(&s.literal(), SeriesKind::Power, &cfg).unwrap();
        assert_eq!(roundtrip, s);
        let m = parse_series("3/2*T^(1/3)*u^(-1)", SeriesKind::Laurent, &cfg).unwrap();
        assert_eq!(m.coeff_at(-1).literal(), "3/2*T^(1/3)");
    }

    #[test]
    fn tails() {
        let cfg = FieldConfig::rational();
        let t = parse_series("u^(-2) + 5", SeriesKind::Tail, &cfg).unwrap();
        assert_eq!(t.kind, SeriesKind::Tail);
        assert!(parse_series("u^2", SeriesKind::Tail, &cfg).is_err());
        assert!(parse_series("1 + O(u^4)", SeriesKind::Tail, &cfg).is_err());
    }
}
