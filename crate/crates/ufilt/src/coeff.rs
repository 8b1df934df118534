//! The coefficient field `K`: exact rationals, or a truncated graded Novikov
//! field `{ sum c_q T^q : q in Q }` over them.
//!
//! Novikov exponents are rationals (the paper allows reals; every worked
//! example uses integers or thirds). Each element optionally carries a hard
//! truncation order `t_precision`: `Some(p)` means the element is known
//! modulo terms `T^q` with `q >= p`, `None` means it is exact. Operations
//! propagate precision pessimistically and never silently round.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;

/// Rational from an integer.
pub fn rat_i(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Rational `p/q`.
pub fn rat(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Rational,
    /// Novikov field over the rationals; `t_grading` is the cohomological
    /// degree of the formal variable `T` (0 for the ungraded situation).
    Novikov { t_grading: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FieldConfig {
    pub kind: FieldKind,
    /// Truncation order used when inverting an exact element forces an
    /// infinite expansion (geometric series).
    pub t_default_prec: i64,
    /// Default truncation order for u-series operations that must truncate
    /// (overridable per computation; the CLI `uprec` directive sets it).
    pub u_default_prec: i64,
}

impl FieldConfig {
    pub fn rational() -> Self {
        FieldConfig { kind: FieldKind::Rational, t_default_prec: 16, u_default_prec: 16 }
    }
    pub fn novikov(t_grading: i64) -> Self {
        FieldConfig { kind: FieldKind::Novikov { t_grading }, t_default_prec: 16, u_default_prec: 16 }
    }
    pub fn with_t_prec(mut self, p: i64) -> Self {
        self.t_default_prec = p;
        self
    }
    pub fn with_u_prec(mut self, p: i64) -> Self {
        self.u_default_prec = p;
        self
    }
    pub fn t_grading(&self) -> i64 {
        match self.kind {
            FieldKind::Rational => 0,
            FieldKind::Novikov { t_grading } => t_grading,
        }
    }
}

/// A (possibly truncated) Novikov field element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NovikovElem {
    /// exponent -> nonzero coefficient; empty map is zero (mod precision).
    pub terms: BTreeMap<Rat, Rat>,
    /// `None`: exact. `Some(p)`: known modulo `T^{>=p}`.
    pub t_precision: Option<Rat>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FieldElem {
    Rational(Rat),
    Novikov(NovikovElem),
}

impl NovikovElem {
    fn normalize(mut self) -> Self {
        if let Some(p) = self.t_precision.clone() {
            self.terms.retain(|q, _| *q < p);
        }
        self.terms.retain(|_, c| !c.is_zero());
        self
    }
}

fn min_opt(a: Option<Rat>, b: Option<Rat>) -> Option<Rat> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

impl FieldElem {
    pub fn zero(kind: FieldKind) -> Self {
        match kind {
            FieldKind::Rational => FieldElem::Rational(Rat::zero()),
            FieldKind::Novikov { .. } => {
                FieldElem::Novikov(NovikovElem { terms: BTreeMap::new(), t_precision: None })
            }
        }
    }

    pub fn one(kind: FieldKind) -> Self {
        FieldElem::from_rat(kind, Rat::one())
    }

    pub fn from_rat(kind: FieldKind, r: Rat) -> Self {
        match kind {
            FieldKind::Rational => FieldElem::Rational(r),
            FieldKind::Novikov { .. } => FieldElem::monomial(r, Rat::zero()),
        }
    }

    pub fn from_int(kind: FieldKind, n: i64) -> Self {
        FieldElem::from_rat(kind, rat_i(n))
    }

    /// The Novikov monomial `c T^q` (exact).
    pub fn monomial(c: Rat, q: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(q, c);
        }
        FieldElem::Novikov(NovikovElem { terms, t_precision: None })
    }

    pub fn kind(&self) -> FieldKind {
        match self {
            FieldElem::Rational(_) => FieldKind::Rational,
            FieldElem::Novikov(_) => FieldKind::Novikov { t_grading: 0 },
        }
    }

    fn promote(&self) -> NovikovElem {
        match self {
            FieldElem::Rational(r) => {
                let mut terms = BTreeMap::new();
                if !r.is_zero() {
                    terms.insert(Rat::zero(), r.clone());
                }
                NovikovElem { terms, t_precision: None }
            }
            FieldElem::Novikov(n) => n.clone(),
        }
    }

    /// Exactly the zero element (not merely zero at the working precision).
    pub fn is_exact_zero(&self) -> bool {
        match self {
            FieldElem::Rational(r) => r.is_zero(),
            FieldElem::Novikov(n) => n.terms.is_empty() && n.t_precision.is_none(),
        }
    }

    /// No visible terms (zero modulo the element's precision).
    pub fn is_zero_at_precision(&self) -> bool {
        match self {
            FieldElem::Rational(r) => r.is_zero(),
            FieldElem::Novikov(n) => n.terms.is_empty(),
        }
    }

    /// Certified zero test: `Ok(true)` / `Ok(false)` when decidable, a
    /// precision error when the element is empty but truncated.
    pub fn zero_test(&self) -> Result<bool> {
        match self {
            FieldElem::Rational(r) => Ok(r.is_zero()),
            FieldElem::Novikov(n) => {
                if !n.terms.is_empty() {
                    Ok(false)
                } else if n.t_precision.is_none() {
                    Ok(true)
                } else {
                    Err(Error::precision("coefficient is zero at its T-precision but not certified zero"))
                }
            }
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            FieldElem::Rational(r) => r.is_one(),
            FieldElem::Novikov(n) => {
                n.terms.len() == 1
                    && n.terms
                        .get(&Rat::zero())
                        .map(|c| c.is_one())
                        .unwrap_or(false)
            }
        }
    }

    pub fn t_precision(&self) -> Option<Rat> {
        match self {
            FieldElem::Rational(_) => None,
            FieldElem::Novikov(n) => n.t_precision.clone(),
        }
    }

    /// Least exponent with a (visibly) nonzero coefficient. `None` for zero.
    pub fn t_valuation(&self) -> Option<Rat> {
        match self {
            FieldElem::Rational(r) => {
                if r.is_zero() {
                    None
                } else {
                    Some(Rat::zero())
                }
            }
            FieldElem::Novikov(n) => n.terms.keys().next().cloned(),
        }
    }

    /// Lower bound for the exponents occurring in this element (including
    /// the unknown truncated part); `None` means `+infinity` (exact zero).
    fn exponent_lb(&self) -> Option<Rat> {
        match self {
            FieldElem::Rational(r) => {
                if r.is_zero() {
                    None
                } else {
                    Some(Rat::zero())
                }
            }
            FieldElem::Novikov(n) => min_opt(n.terms.keys().next().cloned(), n.t_precision.clone()),
        }
    }

    pub fn neg(&self) -> FieldElem {
        match self {
            FieldElem::Rational(r) => FieldElem::Rational(-r.clone()),
            FieldElem::Novikov(n) => {
                let mut out = n.clone();
                for c in out.terms.values_mut() {
                    *c = -c.clone();
                }
                FieldElem::Novikov(out)
            }
        }
    }

    pub fn add(&self, other: &FieldElem) -> FieldElem {
        match (self, other) {
            (FieldElem::Rational(a), FieldElem::Rational(b)) => FieldElem::Rational(a + b),
            _ => {
                let a = self.promote();
                let b = other.promote();
                let mut terms = a.terms;
                for (q, c) in b.terms {
                    let entry = terms.entry(q).or_insert_with(Rat::zero);
                    *entry = &*entry + c;
                }
                let t_precision = min_opt(a.t_precision, b.t_precision);
                FieldElem::Novikov(NovikovElem { terms, t_precision }.normalize())
            }
        }
    }

    pub fn sub(&self, other: &FieldElem) -> FieldElem {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &FieldElem) -> FieldElem {
        match (self, other) {
            (FieldElem::Rational(a), FieldElem::Rational(b)) => FieldElem::Rational(a * b),
            _ => {
                let a = self.promote();
                let b = other.promote();
                // error(a)*b has exponents >= prec_a + lb(b), and symmetrically
                let pa = a.t_precision.clone().and_then(|p| {
                    other.exponent_lb().map(|l| p + l)
                });
                let pb = b.t_precision.clone().and_then(|p| {
                    self.exponent_lb().map(|l| p + l)
                });
                let t_precision = min_opt(pa, pb);
                let mut terms: BTreeMap<Rat, Rat> = BTreeMap::new();
                for (qa, ca) in &a.terms {
                    for (qb, cb) in &b.terms {
                        let q = qa + qb;
                        let entry = terms.entry(q).or_insert_with(Rat::zero);
                        *entry = &*entry + ca * cb;
                    }
                }
                FieldElem::Novikov(NovikovElem { terms, t_precision }.normalize())
            }
        }
    }

    pub fn scale(&self, r: &Rat) -> FieldElem {
        match self {
            FieldElem::Rational(a) => FieldElem::Rational(a * r),
            FieldElem::Novikov(_) => self.mul(&FieldElem::monomial(r.clone(), Rat::zero())),
        }
    }

    /// Multiplicative inverse. For a non-monomial Novikov element this is an
    /// infinite geometric series; exact inputs are then truncated at
    /// `cfg.t_default_prec`, truncated inputs at their own induced precision.
    pub fn inv(&self, cfg: &FieldConfig) -> Result<FieldElem> {
        match self {
            FieldElem::Rational(r) => {
                if r.is_zero() {
                    Err(Error::input("division by zero"))
                } else {
                    Ok(FieldElem::Rational(r.recip()))
                }
            }
            FieldElem::Novikov(n) => {
                if n.terms.is_empty() {
                    return if n.t_precision.is_none() {
                        Err(Error::input("division by zero"))
                    } else {
                        Err(Error::precision(
                            "cannot invert: zero at current T-precision, leading term unknown",
                        ))
                    };
                }
                let (q0, c0) = {
                    let (q, c) = n.terms.iter().next().unwrap();
                    (q.clone(), c.clone())
                };
                let lead_inv = FieldElem::monomial(c0.recip(), -q0.clone());
                if n.terms.len() == 1 {
                    // monomial: exact inverse; precision degrades by 2*q0
                    let prec = n.t_precision.clone().map(|p| p - rat_i(2) * &q0);
                    let mut out = lead_inv.promote();
                    out.t_precision = prec;
                    return Ok(FieldElem::Novikov(out.normalize()));
                }
                // a = c0 T^{q0} (1 + y), exponents of y are > 0
                let mut y = NovikovElem { terms: BTreeMap::new(), t_precision: None };
                for (q, c) in n.terms.iter().skip(1) {
                    y.terms.insert(q - &q0, c / &c0);
                }
                let delta = y.terms.keys().next().unwrap().clone();
                // target precision for the geometric part (relative exponents)
                let rel_prec = match n.t_precision.clone() {
                    Some(p) => p - &q0, // error in 1+y is known mod T^{p-q0}
                    None => rat_i(cfg.t_default_prec),
                };
                let y = FieldElem::Novikov(y);
                let mut acc = FieldElem::one(FieldKind::Novikov { t_grading: 0 });
                let mut pow = FieldElem::one(FieldKind::Novikov { t_grading: 0 });
                let mut n_delta = Rat::zero();
                loop {
                    n_delta = n_delta + &delta;
                    if n_delta >= rel_prec {
                        break;
                    }
                    pow = pow.mul(&y).neg();
                    acc = acc.add(&pow);
                }
                let mut geo = acc.promote();
                geo.t_precision = Some(rel_prec);
                let out = FieldElem::Novikov(geo.normalize()).mul(&lead_inv);
                Ok(out)
            }
        }
    }

    /// Division that refuses to truncate: exact for rationals and Novikov
    /// monomials; dividing by a multi-term Novikov element is a precision
    /// error (its inverse is an infinite series).
    pub fn div_exact(&self, other: &FieldElem) -> Result<FieldElem> {
        match other {
            FieldElem::Rational(r) => {
                if r.is_zero() {
                    Err(Error::input("division by zero"))
                } else {
                    Ok(self.scale(&r.recip()))
                }
            }
            FieldElem::Novikov(n) => match n.terms.len() {
                0 => {
                    if n.t_precision.is_none() {
                        Err(Error::input("division by zero"))
                    } else {
                        Err(Error::precision("division by a coefficient that vanishes at its T-precision"))
                    }
                }
                1 => {
                    let (q, c) = n.terms.iter().next().unwrap();
                    Ok(self.mul(&FieldElem::monomial(c.recip(), -q.clone())))
                }
                _ => Err(Error::precision(
                    "exact division by a multi-term Novikov element is not available",
                )),
            },
        }
    }

    /// Degree of a homogeneous element: `None` for zero (compatible with any
    /// degree), `Some(d)` otherwise. Errors on inhomogeneous elements or
    /// fractional degrees.
    pub fn degree(&self, t_grading: i64) -> Result<Option<i64>> {
        if self.is_zero_at_precision() {
            return Ok(None);
        }
        if t_grading == 0 {
            return Ok(Some(0));
        }
        match self {
            FieldElem::Rational(_) => Ok(Some(0)),
            FieldElem::Novikov(n) => {
                if n.terms.len() > 1 {
                    return Err(Error::input("inhomogeneous Novikov coefficient in graded context"));
                }
                let q = n.terms.keys().next().unwrap();
                let d = q * rat_i(t_grading);
                if !d.is_integer() {
                    return Err(Error::input("coefficient degree is not an integer"));
                }
                let big = d.to_integer();
                i64::try_from(&big)
                    .map(Some)
                    .map_err(|_| Error::input("coefficient degree out of range"))
            }
        }
    }

    /// Re-parseable literal (plus an `O(T^p)` marker on truncated elements,
    /// which only appears in output).
    pub fn literal(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        let _ = write!(s, "{}", self);
        s
    }
}

fn fmt_rat_exp(f: &mut fmt::Formatter<'_>, q: &Rat) -> fmt::Result {
    if q.is_integer() && !q.is_negative() {
        write!(f, "{}", q)
    } else {
        write!(f, "({})", q)
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldElem::Rational(r) => write!(f, "{}", r),
            FieldElem::Novikov(n) => {
                let mut first = true;
                for (q, c) in &n.terms {
                    let neg = c.is_negative();
                    let mag = if neg { -c.clone() } else { c.clone() };
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
                    if q.is_zero() {
                        write!(f, "{}", mag)?;
                    } else {
                        if !mag.is_one() {
                            write!(f, "{}*", mag)?;
                        }
                        if q.is_one() {
                            write!(f, "T")?;
                        } else {
                            write!(f, "T^")?;
                            fmt_rat_exp(f, q)?;
                        }
                    }
                }
                if first {
                    write!(f, "0")?;
                }
                if let Some(p) = &n.t_precision {
                    write!(f, " + O(T^")?;
                    fmt_rat_exp(f, p)?;
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nov() -> FieldKind {
        FieldKind::Novikov { t_grading: 2 }
    }

    #[test]
    fn rational_arithmetic_is_exact() {
        let a = FieldElem::Rational(rat(1, 2));
        let b = FieldElem::Rational(rat(1, 3));
        assert_eq!(a.add(&b), FieldElem::Rational(rat(5, 6)));
        let c = a.mul(&b);
        assert_eq!(c, FieldElem::Rational(rat(1, 6)));
        // distributivity as an identity
        let d = FieldElem::Rational(rat(7, 5));
        let lhs = a.mul(&b.add(&d));
        let rhs = a.mul(&b).add(&a.mul(&d));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn novikov_add_cancels() {
        let one = FieldElem::one(nov());
        let t = FieldElem::monomial(Rat::one(), Rat::one());
        let a = one.add(&t); // 1 + T
        let b = one.neg().add(&t); // -1 + T
        let s = a.add(&b);
        assert_eq!(s, FieldElem::monomial(rat_i(2), Rat::one()));
    }

    #[test]
    fn truncated_product_propagates_precision() {
        let mk = |c1: i64| {
            let mut n = NovikovElem { terms: BTreeMap::new(), t_precision: Some(rat_i(4)) };
            n.terms.insert(Rat::zero(), rat_i(1));
            n.terms.insert(Rat::one(), rat_i(c1));
            FieldElem::Novikov(n)
        };
        let p = mk(1).mul(&mk(-1)); // (1+T)(1-T) = 1 - T^2
        match &p {
            FieldElem::Novikov(n) => {
                assert_eq!(n.t_precision, Some(rat_i(4)));
                assert_eq!(n.terms.len(), 2);
                assert_eq!(n.terms.get(&Rat::zero()), Some(&rat_i(1)));
                assert_eq!(n.terms.get(&rat_i(2)), Some(&rat_i(-1)));
            }
            _ => panic!("expected Novikov"),
        }
    }

    #[test]
    fn inv_geometric_series() {
        let cfg = FieldConfig::novikov(2).with_t_prec(4);
        let a = FieldElem::one(nov()).add(&FieldElem::monomial(Rat::one(), Rat::one()));
        let i = a.inv(&cfg).unwrap();
        // 1 - T + T^2 - T^3 + O(T^4)
        match &i {
            FieldElem::Novikov(n) => {
                assert_eq!(n.t_precision, Some(rat_i(4)));
                for k in 0..4 {
                    let want = if k % 2 == 0 { rat_i(1) } else { rat_i(-1) };
                    assert_eq!(n.terms.get(&rat_i(k)), Some(&want), "T^{}", k);
                }
            }
            _ => panic!(),
        }
        // a * a^{-1} = 1 within precision
        let prod = a.mul(&i);
        match &prod {
            FieldElem::Novikov(n) => {
                assert_eq!(n.terms.len(), 1);
                assert!(n.terms.get(&Rat::zero()).unwrap().is_one());
            }
            _ => panic!(),
        }
    }

    #[test]
    fn inv_of_monomial_is_exact() {
        let cfg = FieldConfig::novikov(2);
        let t = FieldElem::monomial(Rat::one(), Rat::one());
        let i = t.inv(&cfg).unwrap();
        assert_eq!(i, FieldElem::monomial(Rat::one(), rat_i(-1)));
        assert!(i.t_precision().is_none());
    }

    #[test]
    fn inv_zero_is_input_error() {
        let cfg = FieldConfig::rational();
        let z = FieldElem::Rational(Rat::zero());
        assert!(matches!(z.inv(&cfg), Err(Error::Input(_))));
        let zn = FieldElem::zero(nov());
        assert!(matches!(zn.inv(&FieldConfig::novikov(2)), Err(Error::Input(_))));
        // truncated zero: precision error instead
        let tz = FieldElem::Novikov(NovikovElem {
            terms: BTreeMap::new(),
            t_precision: Some(rat_i(4)),
        });
        assert!(matches!(tz.inv(&FieldConfig::novikov(2)), Err(Error::Precision(_))));
    }

    #[test]
    fn t_valuation_additive_under_mul() {
        let a = FieldElem::monomial(rat_i(3), rat(1, 3));
        let b = FieldElem::monomial(rat(1, 2), rat(2, 3)).add(&FieldElem::monomial(
            rat_i(1),
            rat_i(2),
        ));
        let p = a.mul(&b);
        assert_eq!(p.t_valuation(), Some(Rat::one()));
        let cfg = FieldConfig::novikov(2);
        let ai = a.inv(&cfg).unwrap();
        assert_eq!(ai.t_valuation(), Some(rat(-1, 3)));
    }

    #[test]
    fn degree_of_homogeneous_elements() {
        let t = FieldElem::monomial(rat_i(5), Rat::one());
        assert_eq!(t.degree(2).unwrap(), Some(2));
        assert_eq!(t.degree(0).unwrap(), Some(0));
        let third = FieldElem::monomial(Rat::one(), rat(1, 3));
        assert!(third.degree(2).is_err());
        assert_eq!(third.degree(0).unwrap(), Some(0));
        let mixed = t.add(&FieldElem::one(nov()));
        assert!(mixed.degree(2).is_err());
        assert_eq!(FieldElem::zero(nov()).degree(2).unwrap(), None);
    }

    #[test]
    fn display_roundtrip_shape() {
        let e = FieldElem::monomial(rat(3, 2), rat(1, 3))
            .sub(&FieldElem::monomial(Rat::one(), rat_i(2)));
        assert_eq!(e.literal(), "3/2*T^(1/3) - T^2");
        assert_eq!(FieldElem::Rational(rat(-5, 3)).literal(), "-5/3");
    }
}
