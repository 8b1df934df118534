//! Arithmetic in `K[[u]]`, `K((u))` and `F = K((u))/uK[[u]]`, with the
//! valuation `nu` and explicit u-precision.
//!
//! A series is a finite map `u-exponent -> coefficient` plus an optional
//! truncation order: `u_precision = None` means the series is exact (absent
//! exponents are genuinely zero), `Some(N)` means exponents `>= N` are
//! unknown. Absent exponents *below* the precision are certified zero.
//! `F`-elements ("tail" kind) are finite by construction and always exact.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::coeff::{FieldConfig, FieldElem};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesKind {
    Power,
    Laurent,
    Tail,
}

/// The u-adic valuation `nu`: `nu(u^k * unit) = k`, `nu(0) = infinity`,
/// and `AtLeast(N)` for a series that vanishes below its finite precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Valuation {
    Finite(i64),
    Infinity,
    AtLeast(i64),
}

impl Valuation {
    pub fn determinate(&self) -> Option<i64> {
        match self {
            Valuation::Finite(k) => Some(*k),
            _ => None,
        }
    }
    pub fn is_infinite(&self) -> bool {
        matches!(self, Valuation::Infinity)
    }
    /// Lower bound valid in all three cases (`None` = unbounded/infinite).
    pub fn lower_bound(&self) -> Option<i64> {
        match self {
            Valuation::Finite(k) => Some(*k),
            Valuation::AtLeast(n) => Some(*n),
            Valuation::Infinity => None,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(k) => write!(f, "{}", k),
            Valuation::Infinity => write!(f, "inf"),
            Valuation::AtLeast(n) => write!(f, "at-least({})", n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct USeries {
    pub kind: SeriesKind,
    /// exponent -> coefficient with at least one visible term
    pub coeffs: BTreeMap<i64, FieldElem>,
    /// `None` = exact; `Some(N)` = exponents `>= N` unknown. Always `None`
    /// for tails.
    pub u_precision: Option<i64>,
    pub config: FieldConfig,
}

fn min_prec(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

impl USeries {
    pub fn zero(kind: SeriesKind, config: FieldConfig) -> Self {
        USeries { kind, coeffs: BTreeMap::new(), u_precision: None, config }
    }

    pub fn one(kind: SeriesKind, config: FieldConfig) -> Self {
        USeries::monomial(kind, config, FieldElem::one(config.kind), 0).unwrap()
    }

    /// `c * u^k`.
    pub fn monomial(kind: SeriesKind, config: FieldConfig, c: FieldElem, k: i64) -> Result<Self> {
        let mut s = USeries::zero(kind, config);
        if !c.is_zero_at_precision() {
            s.coeffs.insert(k, c);
        }
        s.check_kind()?;
        Ok(s)
    }

    pub fn from_coeffs(
        kind: SeriesKind,
        config: FieldConfig,
        coeffs: BTreeMap<i64, FieldElem>,
        u_precision: Option<i64>,
    ) -> Result<Self> {
        let mut s = USeries { kind, coeffs, u_precision, config };
        s.normalize();
        s.check_kind()?;
        Ok(s)
    }

    fn check_kind(&self) -> Result<()> {
        match self.kind {
            SeriesKind::Power => {
                if self.coeffs.keys().next().map_or(false, |k| *k < 0) {
                    return Err(Error::input("power series with negative u-exponent"));
                }
            }
            SeriesKind::Tail => {
                if self.coeffs.keys().next_back().map_or(false, |k| *k > 0) {
                    return Err(Error::input("tail element with positive u-exponent"));
                }
                if self.u_precision.is_some() {
                    return Err(Error::input("tail elements are exact; no u-precision applies"));
                }
            }
            SeriesKind::Laurent => {}
        }
        Ok(())
    }

    fn normalize(&mut self) {
        if let Some(n) = self.u_precision {
            let cut: Vec<i64> = self.coeffs.range(n..).map(|(k, _)| *k).collect();
            for k in cut {
                self.coeffs.remove(&k);
            }
        }
        // A coefficient that is zero at its T-precision but not exactly zero
        // cannot be stored as a certified entry; cap the u-precision there.
        let mut cap: Option<i64> = None;
        self.coeffs.retain(|k, c| {
            if c.is_zero_at_precision() {
                if !c.is_exact_zero() {
                    cap = min_prec(cap, Some(*k));
                }
                false
            } else {
                true
            }
        });
        if cap.is_some() {
            self.u_precision = min_prec(self.u_precision, cap);
            let n = self.u_precision.unwrap();
            let cut: Vec<i64> = self.coeffs.range(n..).map(|(k, _)| *k).collect();
            for k in cut {
                self.coeffs.remove(&k);
            }
        }
    }

    pub fn is_exact_zero(&self) -> bool {
        self.coeffs.is_empty() && self.u_precision.is_none()
    }

    pub fn is_zero_at_precision(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff_at(&self, k: i64) -> FieldElem {
        self.coeffs
            .get(&k)
            .cloned()
            .unwrap_or_else(|| FieldElem::zero(self.config.kind))
    }

    /// Exponent lower bound for everything in this series, including the
    /// unknown part; `None` = plus infinity.
    pub fn exponent_lb(&self) -> Option<i64> {
        min_prec(self.coeffs.keys().next().copied(), self.u_precision)
    }

    pub fn valuation(&self) -> Result<Valuation> {
        if self.kind == SeriesKind::Tail {
            return Err(Error::input("valuation is defined on power/laurent series, not on F-elements"));
        }
        Ok(match self.coeffs.keys().next() {
            Some(k) => Valuation::Finite(*k),
            None => match self.u_precision {
                None => Valuation::Infinity,
                Some(n) => Valuation::AtLeast(n),
            },
        })
    }

    pub fn neg(&self) -> USeries {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c = c.neg();
        }
        out
    }

    pub fn add(&self, other: &USeries) -> Result<USeries> {
        if self.kind != other.kind {
            return Err(Error::input("series kind mismatch in addition"));
        }
        let mut coeffs = self.coeffs.clone();
        for (k, c) in &other.coeffs {
            let cur = coeffs
                .remove(k)
                .unwrap_or_else(|| FieldElem::zero(self.config.kind));
            coeffs.insert(*k, cur.add(c));
        }
        USeries::from_coeffs(
            self.kind,
            self.config,
            coeffs,
            min_prec(self.u_precision, other.u_precision),
        )
    }

    pub fn sub(&self, other: &USeries) -> Result<USeries> {
        self.add(&other.neg())
    }

    /// Multiply by `c * u^k` (exact coefficient scaling plus shift).
    pub fn scale_shift(&self, c: &FieldElem, k: i64) -> Result<USeries> {
        let mut coeffs = BTreeMap::new();
        for (e, a) in &self.coeffs {
            coeffs.insert(e + k, a.mul(c));
        }
        let prec = self.u_precision.map(|n| n + k);
        USeries::from_coeffs(self.kind, self.config, coeffs, prec)
    }

    pub fn mul(&self, other: &USeries) -> Result<USeries> {
        if self.kind == SeriesKind::Tail || other.kind == SeriesKind::Tail {
            return Err(Error::input("no multiplication on F = K((u))/uK[[u]]"));
        }
        if self.kind != other.kind {
            return Err(Error::input("series kind mismatch in multiplication"));
        }
        let pa = match (self.u_precision, other.exponent_lb()) {
            (Some(n), Some(l)) => Some(n + l),
            (Some(_), None) => None,
            (None, _) => None,
        };
        let pb = match (other.u_precision, self.exponent_lb()) {
            (Some(n), Some(l)) => Some(n + l),
            (Some(_), None) => None,
            (None, _) => None,
        };
        let prec = min_prec(pa, pb);
        let mut coeffs: BTreeMap<i64, FieldElem> = BTreeMap::new();
        for (ka, ca) in &self.coeffs {
            for (kb, cb) in &other.coeffs {
                let k = ka + kb;
                if let Some(n) = prec {
                    if k >= n {
                        continue;
                    }
                }
                let cur = coeffs
                    .remove(&k)
                    .unwrap_or_else(|| FieldElem::zero(self.config.kind));
                coeffs.insert(k, cur.add(&ca.mul(cb)));
            }
        }
        USeries::from_coeffs(self.kind, self.config, coeffs, prec)
    }

    /// Multiplicative inverse. Power kind requires an invertible
    /// `u^0`-coefficient; laurent kind inverts through the leading term.
    /// `uprec` overrides the truncation order used when an exact non-monomial
    /// input forces truncation.
    pub fn inv(&self, uprec: Option<i64>) -> Result<USeries> {
        if self.kind == SeriesKind::Tail {
            return Err(Error::input("F-elements have no multiplication, hence no inverse"));
        }
        let lead = match self.coeffs.iter().next() {
            Some((k, c)) => (*k, c.clone()),
            None => {
                return match self.u_precision {
                    None => Err(Error::input("division by zero series")),
                    Some(n) => Err(Error::precision(alloc::format!(
                        "cannot invert: series vanishes below its precision O(u^{})",
                        n
                    ))),
                };
            }
        };
        let (k0, c0) = lead;
        if self.kind == SeriesKind::Power && k0 != 0 {
            return Err(Error::input(
                "not a unit of K[[u]]: u^0-coefficient is zero (localise first to invert)",
            ));
        }
        let c0_inv = c0.inv(&self.config)?;
        if self.coeffs.len() == 1 {
            let prec = self.u_precision.map(|n| n - 2 * k0);
            let mut out = USeries::zero(self.kind, self.config);
            out.coeffs.insert(-k0, c0_inv);
            out.u_precision = prec;
            out.normalize();
            return Ok(out);
        }
        // self = c0 u^{k0} (1 + y) with nu(y) >= 1
        let rel_prec = match self.u_precision {
            Some(n) => n - k0,
            None => uprec.unwrap_or(self.config.u_default_prec),
        };
        if rel_prec <= 0 {
            return Err(Error::precision("inverse requested at nonpositive relative precision"));
        }
        let mut y = USeries::zero(SeriesKind::Power, self.config);
        for (k, c) in self.coeffs.iter().skip(1) {
            y.coeffs.insert(k - k0, c.mul(&c0_inv));
        }
        y.u_precision = Some(rel_prec);
        y.normalize();
        let delta = y.coeffs.keys().next().copied().unwrap_or(rel_prec).max(1);
        let mut acc = USeries::one(SeriesKind::Power, self.config);
        acc.u_precision = Some(rel_prec);
        let mut pow = USeries::one(SeriesKind::Power, self.config);
        pow.u_precision = Some(rel_prec);
        let mut n_delta = 0;
        loop {
            n_delta += delta;
            if n_delta >= rel_prec {
                break;
            }
            pow = pow.mul(&y)?.neg();
            acc = acc.add(&pow)?;
        }
        // shift back: result = c0^{-1} u^{-k0} * acc, precision rel_prec - k0
        let mut out = acc.scale_shift(&c0_inv, -k0)?;
        out.kind = self.kind;
        out.u_precision = Some(rel_prec - k0);
        out.normalize();
        out.check_kind()?;
        Ok(out)
    }

    /// `K[[u]] -> K((u))`: u-localisation.
    pub fn localise(&self) -> Result<USeries> {
        match self.kind {
            SeriesKind::Power => {
                let mut out = self.clone();
                out.kind = SeriesKind::Laurent;
                Ok(out)
            }
            _ => Err(Error::input("localise expects a power series")),
        }
    }

    /// `K((u)) -> F`: keep exponents <= 0. Requires every discarded
    /// coefficient to be certified, i.e. precision > 0 (or exactness).
    pub fn tail_project(&self) -> Result<USeries> {
        if self.kind != SeriesKind::Laurent {
            return Err(Error::input("tail_project expects a laurent series"));
        }
        if let Some(n) = self.u_precision {
            if n <= 0 {
                return Err(Error::precision(
                    "tail projection needs the u^{<=0} coefficients certified (precision > 0)",
                ));
            }
        }
        let coeffs = self
            .coeffs
            .range(..=0)
            .map(|(k, c)| (*k, c.clone()))
            .collect();
        USeries::from_coeffs(SeriesKind::Tail, self.config, coeffs, None)
    }

    /// The `u^k`-action on `F`: shift up by `k`, discard exponents >= 1.
    /// The result is zero exactly when `self` lies in `ker(u^k)`.
    pub fn tail_u_mul(&self, k: i64) -> Result<USeries> {
        if self.kind != SeriesKind::Tail {
            return Err(Error::input("tail_u_mul expects an F-element"));
        }
        if k < 0 {
            return Err(Error::input("tail_u_mul wants a nonnegative power"));
        }
        let coeffs = self
            .coeffs
            .iter()
            .filter_map(|(e, c)| {
                let shifted = e + k;
                if shifted <= 0 {
                    Some((shifted, c.clone()))
                } else {
                    None
                }
            })
            .collect();
        USeries::from_coeffs(SeriesKind::Tail, self.config, coeffs, None)
    }

    /// Truncate to precision `n` (no-op if already at least that coarse).
    pub fn truncate_to(&self, n: i64) -> USeries {
        let mut out = self.clone();
        out.u_precision = min_prec(out.u_precision, Some(n));
        out.normalize();
        out
    }

    pub fn literal(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        let _ = write!(s, "{}", self);
        s
    }
}

fn coeff_needs_parens(c: &FieldElem) -> bool {
    match c {
        FieldElem::Rational(_) => false,
        FieldElem::Novikov(n) => n.terms.len() > 1 || n.t_precision.is_some(),
    }
}

// (sign, magnitude): pull a leading minus out of single-term coefficients
fn split_sign(c: &FieldElem) -> (bool, FieldElem) {
    use num_traits::Signed;
    match c {
        FieldElem::Rational(r) => {
            if r.is_negative() {
                (true, FieldElem::Rational(-r.clone()))
            } else {
                (false, c.clone())
            }
        }
        FieldElem::Novikov(n) => {
            if n.terms.len() == 1 && n.t_precision.is_none() {
                let (q, co) = n.terms.iter().next().unwrap();
                if co.is_negative() {
                    return (true, FieldElem::monomial(-co.clone(), q.clone()));
                }
            }
            (false, c.clone())
        }
    }
}

impl fmt::Display for USeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in &self.coeffs {
            let (neg, display_c) = split_sign(c);
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let unit_coeff = display_c.is_one();
            if *k == 0 {
                if coeff_needs_parens(&display_c) {
                    write!(f, "({})", display_c)?;
                } else {
                    write!(f, "{}", display_c)?;
                }
            } else {
                if !unit_coeff {
                    if coeff_needs_parens(&display_c) {
                        write!(f, "({})*", display_c)?;
                    } else {
                        write!(f, "{}*", display_c)?;
                    }
                }
                if *k == 1 {
                    write!(f, "u")?;
                } else if *k < 0 {
                    write!(f, "u^({})", k)?;
                } else {
                    write!(f, "u^{}", k)?;
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        if let Some(n) = self.u_precision {
            write!(f, " + O(u^{})", n)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::FieldKind;

    fn cfg() -> FieldConfig {
        FieldConfig::rational()
    }

    fn pw(terms: &[(i64, i64)], prec: Option<i64>) -> USeries {
        let coeffs = terms
            .iter()
            .map(|(k, c)| (*k, FieldElem::from_int(FieldKind::Rational, *c)))
            .collect();
        USeries::from_coeffs(SeriesKind::Power, cfg(), coeffs, prec).unwrap()
    }

    fn lr(terms: &[(i64, i64)], prec: Option<i64>) -> USeries {
        let coeffs = terms
            .iter()
            .map(|(k, c)| (*k, FieldElem::from_int(FieldKind::Rational, *c)))
            .collect();
        USeries::from_coeffs(SeriesKind::Laurent, cfg(), coeffs, prec).unwrap()
    }

    #[test]
    fn mul_basics() {
        let a = pw(&[(1, 1), (2, 1)], None); // u(1+u)
        let one = USeries::one(SeriesKind::Power, cfg());
        assert_eq!(a.mul(&one).unwrap(), a);
        let b = pw(&[(0, 3), (1, 1)], None); // 3 + u
        let u2 = pw(&[(2, 1)], None);
        assert_eq!(b.mul(&u2).unwrap(), pw(&[(2, 3), (3, 1)], None));
    }

    #[test]
    fn tail_mul_is_an_error() {
        let t = USeries::from_coeffs(
            SeriesKind::Tail,
            cfg(),
            [(0i64, FieldElem::from_int(FieldKind::Rational, 1))].into_iter().collect(),
            None,
        )
        .unwrap();
        assert!(matches!(t.mul(&t), Err(Error::Input(_))));
    }

    #[test]
    fn inv_unit_power_series() {
        let a = pw(&[(0, 1), (1, 1)], None); // 1 + u
        let i = a.inv(Some(4)).unwrap();
        assert_eq!(i, pw(&[(0, 1), (1, -1), (2, 1), (3, -1)], Some(4)));
        let prod = a.mul(&i).unwrap();
        assert_eq!(prod, pw(&[(0, 1)], Some(4)));
    }

    #[test]
    fn inv_non_unit() {
        let u = pw(&[(1, 1)], None);
        assert!(matches!(u.inv(None), Err(Error::Input(_))));
        let ul = u.localise().unwrap();
        let i = ul.inv(None).unwrap();
        assert_eq!(i, lr(&[(-1, 1)], None));
        assert!(i.u_precision.is_none());
    }

    #[test]
    fn inv_of_truncated_series_degrades_precision() {
        // u^{-2}(1+u) + O(u^6): relative precision 8, inverse O(u^{10-2*... })
        let a = lr(&[(-2, 1), (-1, 1)], Some(6));
        let i = a.inv(None).unwrap();
        assert_eq!(i.u_precision, Some(6 - 2 * (-2) - 0)); // n - 2*k0 = 10
        let prod = a.mul(&i).unwrap();
        assert_eq!(prod.coeffs.len(), 1);
        assert!(prod.coeffs.get(&0).unwrap().is_one());
    }

    #[test]
    fn valuation_cases() {
        assert_eq!(pw(&[(2, 3), (3, 1)], None).valuation().unwrap(), Valuation::Finite(2));
        assert_eq!(
            USeries::zero(SeriesKind::Power, cfg()).valuation().unwrap(),
            Valuation::Infinity
        );
        assert_eq!(pw(&[], Some(12)).valuation().unwrap(), Valuation::AtLeast(12));
    }

    #[test]
    fn localise_and_tail_project() {
        let a = pw(&[(0, 1), (1, 1)], None);
        let al = a.localise().unwrap();
        assert_eq!(al.kind, SeriesKind::Laurent);
        assert_eq!(al.coeffs, a.coeffs);

        let b = lr(&[(-2, 1), (0, 5), (1, 7)], None);
        let t = b.tail_project().unwrap();
        assert_eq!(t.kind, SeriesKind::Tail);
        assert_eq!(t, USeries::from_coeffs(
            SeriesKind::Tail,
            cfg(),
            [(-2i64, FieldElem::from_int(FieldKind::Rational, 1)),
             (0, FieldElem::from_int(FieldKind::Rational, 5))].into_iter().collect(),
            None,
        ).unwrap());

        let c = lr(&[(3, 1)], None);
        assert!(c.tail_project().unwrap().is_zero_at_precision());
        let d = lr(&[(0, 3)], None);
        assert_eq!(d.tail_project().unwrap().coeff_at(0), FieldElem::from_int(FieldKind::Rational, 3));

        let bad = lr(&[(-1, 1)], Some(0));
        assert!(matches!(bad.tail_project(), Err(Error::Precision(_))));
    }

    #[test]
    fn tail_u_action() {
        let mk = |terms: &[(i64, i64)]| {
            USeries::from_coeffs(
                SeriesKind::Tail,
                cfg(),
                terms
                    .iter()
                    .map(|(k, c)| (*k, FieldElem::from_int(FieldKind::Rational, *c)))
                    .collect(),
                None,
            )
            .unwrap()
        };
        assert_eq!(mk(&[(-2, 1), (0, 1)]).tail_u_mul(1).unwrap(), mk(&[(-1, 1)]));
        assert!(mk(&[(0, 1)]).tail_u_mul(1).unwrap().is_zero_at_precision());
        assert_eq!(mk(&[(-3, 1)]).tail_u_mul(3).unwrap(), mk(&[(0, 1)]));
    }

    #[test]
    fn nu_additive_and_ultrametric() {
        let a = pw(&[(2, 3)], None);
        let b = pw(&[(1, 1), (4, 2)], None);
        let ab = a.mul(&b).unwrap();
        assert_eq!(
            ab.valuation().unwrap().determinate().unwrap(),
            a.valuation().unwrap().determinate().unwrap()
                + b.valuation().unwrap().determinate().unwrap()
        );
        let s = a.add(&b).unwrap();
        assert_eq!(s.valuation().unwrap(), Valuation::Finite(1));
        // cancellation case: nu(a + (-a)) = infinity >= min
        let z = a.sub(&a).unwrap();
        assert_eq!(z.valuation().unwrap(), Valuation::Infinity);
    }

    #[test]
    fn display_literals() {
        assert_eq!(pw(&[(0, 1), (1, -1)], None).literal(), "1 - u");
        assert_eq!(pw(&[(2, 3)], Some(7)).literal(), "3*u^2 + O(u^7)");
        assert_eq!(lr(&[(-2, 1)], None).literal(), "u^(-2)");
        assert_eq!(USeries::zero(SeriesKind::Power, cfg()).literal(), "0");
    }
}
