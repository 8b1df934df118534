//! Exact linear algebra over the coefficient field `K`, for the spectral
//! sequence pages and the finite-dimensional oracles.
//!
//! Elimination is fraction-free (cross-multiplication), so everything stays
//! exact even over a Novikov field whose general inverses would truncate.
//! Zero tests are certified; matrices with truncated coefficients surface
//! precision errors instead of guessing ranks.

use alloc::vec;
use alloc::vec::Vec;

use crate::coeff::{FieldConfig, FieldElem};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct KMat {
    pub rows: usize,
    pub cols: usize,
    e: Vec<FieldElem>,
    pub config: FieldConfig,
}

impl KMat {
    pub fn zero(rows: usize, cols: usize, config: FieldConfig) -> Self {
        KMat { rows, cols, e: vec![FieldElem::zero(config.kind); rows * cols], config }
    }

    pub fn identity(n: usize, config: FieldConfig) -> Self {
        let mut m = KMat::zero(n, n, config);
        for i in 0..n {
            *m.at_mut(i, i) = FieldElem::one(config.kind);
        }
        m
    }

    pub fn from_cols(cols: Vec<Vec<FieldElem>>, rows: usize, config: FieldConfig) -> Self {
        let mut m = KMat::zero(rows, cols.len(), config);
        for (j, c) in cols.iter().enumerate() {
            debug_assert_eq!(c.len(), rows);
            for (i, x) in c.iter().enumerate() {
                *m.at_mut(i, j) = x.clone();
            }
        }
        m
    }

    pub fn at(&self, i: usize, j: usize) -> &FieldElem {
        &self.e[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut FieldElem {
        &mut self.e[i * self.cols + j]
    }

    pub fn col(&self, j: usize) -> Vec<FieldElem> {
        (0..self.rows).map(|i| self.at(i, j).clone()).collect()
    }

    pub fn is_zero(&self) -> Result<bool> {
        for x in &self.e {
            if !x.zero_test()? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn mul(&self, other: &KMat) -> Result<KMat> {
        if self.cols != other.rows {
            return Err(Error::internal("K-matrix shape mismatch in multiplication"));
        }
        let mut m = KMat::zero(self.rows, other.cols, self.config);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero_at_precision() && a.is_exact_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let add = a.mul(other.at(k, j));
                    let cur = m.at(i, j).add(&add);
                    *m.at_mut(i, j) = cur;
                }
            }
        }
        Ok(m)
    }

    pub fn add(&self, other: &KMat) -> Result<KMat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::internal("K-matrix shape mismatch in addition"));
        }
        let mut m = self.clone();
        for (x, y) in m.e.iter_mut().zip(other.e.iter()) {
            *x = x.add(y);
        }
        Ok(m)
    }

    pub fn sub(&self, other: &KMat) -> Result<KMat> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> KMat {
        let mut m = self.clone();
        for x in m.e.iter_mut() {
            *x = x.neg();
        }
        m
    }

    pub fn scale(&self, c: &FieldElem) -> KMat {
        let mut m = self.clone();
        for x in m.e.iter_mut() {
            *x = x.mul(c);
        }
        m
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &KMat) -> KMat {
        debug_assert_eq!(self.rows, other.rows);
        let mut m = KMat::zero(self.rows, self.cols + other.cols, self.config);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *m.at_mut(i, j) = self.at(i, j).clone();
            }
            for j in 0..other.cols {
                *m.at_mut(i, self.cols + j) = other.at(i, j).clone();
            }
        }
        m
    }

    pub fn select_cols(&self, idx: &[usize]) -> KMat {
        let mut m = KMat::zero(self.rows, idx.len(), self.config);
        for (jj, &j) in idx.iter().enumerate() {
            for i in 0..self.rows {
                *m.at_mut(i, jj) = self.at(i, j).clone();
            }
        }
        m
    }

    pub fn take_rows(&self, lo: usize, hi: usize) -> KMat {
        let mut m = KMat::zero(hi - lo, self.cols, self.config);
        for i in lo..hi {
            for j in 0..self.cols {
                *m.at_mut(i - lo, j) = self.at(i, j).clone();
            }
        }
        m
    }

    /// Fraction-free row reduction in place. Eliminates below each pivot,
    /// and also above when `jordan` is set. Returns pivot (row, col) pairs.
    fn echelon(&mut self, jordan: bool) -> Result<Vec<(usize, usize)>> {
        let mut pivots = Vec::new();
        let mut r = 0usize;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            // find a certified-nonzero entry in column c at row >= r
            let mut sel = None;
            for i in r..self.rows {
                if !self.at(i, c).zero_test()? {
                    sel = Some(i);
                    break;
                }
            }
            let Some(i0) = sel else { continue };
            if i0 != r {
                for j in 0..self.cols {
                    let a = self.at(r, j).clone();
                    let b = self.at(i0, j).clone();
                    *self.at_mut(r, j) = b;
                    *self.at_mut(i0, j) = a;
                }
            }
            let piv = self.at(r, c).clone();
            let lo = if jordan { 0 } else { r + 1 };
            for i in lo..self.rows {
                if i == r || self.at(i, c).zero_test()? {
                    continue;
                }
                let f = self.at(i, c).clone();
                for j in 0..self.cols {
                    let new = self.at(i, j).mul(&piv).sub(&f.mul(self.at(r, j)));
                    *self.at_mut(i, j) = new;
                }
            }
            pivots.push((r, c));
            r += 1;
        }
        Ok(pivots)
    }

    pub fn rank(&self) -> Result<usize> {
        let mut m = self.clone();
        Ok(m.echelon(false)?.len())
    }

    /// Kernel basis, as columns. Exact: free coordinates get the product of
    /// all pivots, so no division is ever performed.
    pub fn kernel(&self) -> Result<KMat> {
        let mut m = self.clone();
        let pivots = m.echelon(true)?;
        let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
        let r = pivots.len();
        // prefix/suffix pivot products for Prod_{k != i} piv_k
        let pivs: Vec<FieldElem> = pivots.iter().map(|&(pr, pc)| m.at(pr, pc).clone()).collect();
        let one = FieldElem::one(self.config.kind);
        let mut pre = vec![one.clone(); r + 1];
        for i in 0..r {
            pre[i + 1] = pre[i].mul(&pivs[i]);
        }
        let mut suf = vec![one.clone(); r + 1];
        for i in (0..r).rev() {
            suf[i] = suf[i + 1].mul(&pivs[i]);
        }
        let all = pre[r].clone();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivot_cols.contains(c)).collect();
        let mut cols = Vec::with_capacity(free.len());
        for &f in &free {
            let mut v = vec![FieldElem::zero(self.config.kind); self.cols];
            v[f] = all.clone();
            for (i, &(pr, pc)) in pivots.iter().enumerate() {
                // piv_i x_{pc} + E_{pr, f} x_f = 0
                let coeff = m.at(pr, f).clone();
                let others = pre[i].mul(&suf[i + 1]);
                v[pc] = coeff.mul(&others).neg();
            }
            cols.push(v);
        }
        Ok(KMat::from_cols(cols, self.cols, self.config))
    }

    /// A basis of the column span: the pivot columns of `self`.
    pub fn image(&self) -> Result<KMat> {
        let mut m = self.clone();
        let pivots = m.echelon(false)?;
        let idx: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
        Ok(self.select_cols(&idx))
    }

    /// Basis of `{x : self * x  in  span(s)}`.
    pub fn preimage(&self, s: &KMat) -> Result<KMat> {
        debug_assert_eq!(self.rows, s.rows);
        let combined = self.hstack(&s.neg());
        let k = combined.kernel()?;
        k.take_rows(0, self.cols).image()
    }
}

/// `dim span(a)` after adjoining `b`'s columns.
pub(crate) fn rank_sum(a: &KMat, b: &KMat) -> Result<usize> {
    a.hstack(b).rank()
}

/// Is the column vector `v` inside the column span of `s`?
pub(crate) fn in_span(s: &KMat, v: &KMat) -> Result<bool> {
    debug_assert_eq!(v.cols, 1);
    Ok(s.rank()? == rank_sum(s, v)?)
}

/// `dim (span(a) / span(b))`, assuming `span(b)` is contained in `span(a)`.
pub(crate) fn quotient_dim(a: &KMat, b: &KMat) -> Result<usize> {
    Ok(rank_sum(a, b)? - b.rank()?)
}

/// `dim (span(a)  intersect  span(b))`.
pub(crate) fn intersect_dim(a: &KMat, b: &KMat) -> Result<usize> {
    Ok(a.rank()? + b.rank()? - rank_sum(a, b)?)
}

/// Basis of the intersection of two column spans (via kernel of `[A | -B]`).
pub(crate) fn intersect_basis(a: &KMat, b: &KMat) -> Result<KMat> {
    debug_assert_eq!(a.rows, b.rows);
    let k = a.hstack(b).kernel()?;
    let mut cols = Vec::new();
    for j in 0..k.cols {
        let mut x = vec![FieldElem::zero(a.config.kind); a.cols];
        for i in 0..a.cols {
            x[i] = k.at(i, j).clone();
        }
        let xm = KMat::from_cols(vec![x], a.cols, a.config);
        cols.push(a.mul(&xm)?.col(0));
    }
    KMat::from_cols(cols, a.rows, a.config).image()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{rat_i, FieldKind, Rat};

    fn cfg() -> FieldConfig {
        FieldConfig::rational()
    }

    fn m(rows: &[&[i64]]) -> KMat {
        let c = cfg();
        let mut out = KMat::zero(rows.len(), rows[0].len(), c);
        for (i, r) in rows.iter().enumerate() {
            for (j, &x) in r.iter().enumerate() {
                *out.at_mut(i, j) = FieldElem::from_int(FieldKind::Rational, x);
            }
        }
        out
    }

    #[test]
    fn rank_and_kernel() {
        let a = m(&[&[1, 2, 3], &[2, 4, 6], &[0, 1, 1]]);
        assert_eq!(a.rank().unwrap(), 2);
        let k = a.kernel().unwrap();
        assert_eq!(k.cols, 1);
        let prod = a.mul(&k).unwrap();
        assert!(prod.is_zero().unwrap());
    }

    #[test]
    fn kernel_of_injective_map_is_empty() {
        let a = m(&[&[1, 0], &[0, 1], &[1, 1]]);
        assert_eq!(a.kernel().unwrap().cols, 0);
        assert_eq!(a.rank().unwrap(), 2);
    }

    #[test]
    fn subspace_helpers() {
        let a = m(&[&[1, 0], &[0, 1], &[0, 0]]);
        let b = m(&[&[1], &[1], &[0]]);
        assert_eq!(rank_sum(&a, &b).unwrap(), 2);
        assert!(in_span(&a, &b).unwrap());
        assert_eq!(quotient_dim(&a, &b).unwrap(), 1);
        assert_eq!(intersect_dim(&a, &b).unwrap(), 1);
        let ib = intersect_basis(&a, &b).unwrap();
        assert_eq!(ib.cols, 1);
        assert!(in_span(&a, &ib).unwrap());
        assert!(in_span(&b, &ib).unwrap());
    }

    #[test]
    fn preimage_of_a_subspace() {
        // f(x, y, z) = (x + y, z); preimage of span{(1, 0)} = {z = 0}
        let f = m(&[&[1, 1, 0], &[0, 0, 1]]);
        let s = m(&[&[1], &[0]]);
        let p = f.preimage(&s).unwrap();
        assert_eq!(p.rank().unwrap(), 2);
        // every preimage vector has last coordinate 0
        for j in 0..p.cols {
            assert!(p.at(2, j).zero_test().unwrap());
        }
    }

    #[test]
    fn novikov_monomial_matrices_stay_exact() {
        let c = FieldConfig::novikov(2);
        let t = FieldElem::monomial(Rat::from_integer(1.into()), rat_i(1));
        let mut a = KMat::zero(2, 2, c);
        *a.at_mut(0, 0) = t.clone();
        *a.at_mut(1, 1) = t.clone();
        *a.at_mut(0, 1) = FieldElem::one(c.kind);
        assert_eq!(a.rank().unwrap(), 2);
        assert_eq!(a.kernel().unwrap().cols, 0);
        // singular Novikov matrix: [[T, 1], [T^2, T]]
        let mut b = KMat::zero(2, 2, c);
        *b.at_mut(0, 0) = t.clone();
        *b.at_mut(0, 1) = FieldElem::one(c.kind);
        *b.at_mut(1, 0) = t.mul(&t);
        *b.at_mut(1, 1) = t;
        assert_eq!(b.rank().unwrap(), 1);
        let k = b.kernel().unwrap();
        assert_eq!(k.cols, 1);
        assert!(b.mul(&k).unwrap().is_zero().unwrap());
    }
}
