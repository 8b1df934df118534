//! Direct limits of directed systems `V -> V -> V -> ...` of `K[[u]]`-linear
//! maps on a free module `V` of finite rank.
//!
//! The limit of such a system embeds in `K((u))^r` and is classified by the
//! invariant factors of the fold-left composites `R_k = Q_{k-1} ... Q_1 Q_0`:
//! each exponent sequence `j_i(k)` is nondecreasing in `k`, and a slot either
//! stabilises (contributing `u^{-j_i} K[[u]]`) or diverges (contributing a
//! copy of `K((u))`). Divergence over a finite window is reported as a
//! status, never asserted — except in the one case where it is a theorem:
//! injective steps sharing a single nilpotent `u^0`-part localise fully.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::coeff::{FieldConfig, FieldElem};
use crate::error::{Error, Result};
use crate::filtration::{young_diagrams, InducedFiltration, YoungDiagramPair};
use crate::kmat::KMat;
use crate::smith::{det, smith_normal_form, snf_core, DVRMatrix, InvariantFactor};
use crate::useries::Valuation;

/// A sequence of square steps `Q_k : V -> V` on a fixed free module.
#[derive(Clone)]
pub struct DirectedSystem {
    pub rank: usize,
    pub steps: Vec<DVRMatrix>,
    pub config: FieldConfig,
}

impl DirectedSystem {
    pub fn new(rank: usize, steps: Vec<DVRMatrix>, config: FieldConfig) -> Result<Self> {
        for (k, q) in steps.iter().enumerate() {
            if q.rows != rank || q.cols != rank {
                return Err(Error::input(format!(
                    "directed system: step {} is {}x{}, expected {}x{}",
                    k, q.rows, q.cols, rank, rank
                )));
            }
        }
        Ok(DirectedSystem { rank, steps, config })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `R_k = Q_{k-1} ... Q_0`; `R_0` is the identity.
    pub fn composite(&self, k: usize) -> Result<DVRMatrix> {
        if k > self.steps.len() {
            return Err(Error::input(format!(
                "directed system: composite through {} steps requested, only {} given",
                k,
                self.steps.len()
            )));
        }
        let mut r = DVRMatrix::identity(self.rank, self.config);
        for q in &self.steps[..k] {
            r = q.mul(&r)?;
        }
        Ok(r)
    }
}

/// Invariant factors of the composite `R_k`, smallest exponent first, zero
/// factors (`u^inf`) last.
pub fn composite_factors(sys: &DirectedSystem, k: usize) -> Result<Vec<InvariantFactor>> {
    let r = sys.composite(k)?;
    let mut f = smith_normal_form(&r)?.exponents;
    f.sort_unstable();
    Ok(f)
}

fn sorted_exponents(m: &DVRMatrix) -> Result<(Vec<i64>, usize)> {
    let mut f = smith_normal_form(m)?.exponents;
    f.sort_unstable();
    let mut finite = Vec::new();
    let mut nullity = 0usize;
    for x in f {
        match x.exponent() {
            Some(j) => finite.push(j),
            None => nullity += 1,
        }
    }
    Ok((finite, nullity))
}

// ---------------------------------------------------------------------------
// Limit shapes
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotStatus {
    /// The exponent did not move over the whole comparison window.
    Stabilized,
    /// The exponent was still growing at the end of the window.
    DivergingAtWindow,
    /// Divergence holds for the infinite system (nilpotent-`u^0` fast path).
    CertifiedDiverging,
}

/// Windowed description of `lim V_k` inside `K((u))^r`: the stabilised slots
/// give `u^{-j} K[[u]]`-summands, the diverging ones `K((u))`-summands.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LimitShape {
    pub rank: usize,
    /// exponents of the stabilised slots, ascending
    pub stable_exponents: Vec<i64>,
    /// number of diverging slots
    pub laurent_count: usize,
    /// status per slot, aligned with the ascending exponent order
    pub statuses: Vec<SlotStatus>,
    /// number of trailing steps the exponents were compared over
    pub window: usize,
}

impl LimitShape {
    pub fn empty(window: usize) -> Self {
        LimitShape {
            rank: 0,
            stable_exponents: Vec::new(),
            laurent_count: 0,
            statuses: Vec::new(),
            window,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rank == 0
    }
}

impl fmt::Display for LimitShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            Ok(())
        };
        for j in &self.stable_exponents {
            sep(f)?;
            if *j == 0 {
                write!(f, "K[[u]]")?;
            } else {
                write!(f, "u^(-{})K[[u]]", j)?;
            }
        }
        if self.laurent_count == 1 {
            sep(f)?;
            write!(f, "K((u))")?;
        } else if self.laurent_count > 1 {
            sep(f)?;
            write!(f, "K((u))^{}", self.laurent_count)?;
        }
        Ok(())
    }
}

/// Compare the exponent vector at the start and end of the window. The
/// sequences are nondecreasing slotwise, so equal endpoints force equality
/// in between.
fn shape_from_endpoints(a: &[i64], b: &[i64], window: usize) -> Result<LimitShape> {
    if a.len() != b.len() {
        return Err(Error::internal("limit shape: exponent count changed across the window"));
    }
    let mut stable = Vec::new();
    let mut statuses = Vec::new();
    let mut laurent = 0usize;
    for (x, y) in a.iter().zip(b.iter()) {
        if x > y {
            return Err(Error::internal("limit shape: invariant factor exponents decreased"));
        }
        if x == y {
            stable.push(*y);
            statuses.push(SlotStatus::Stabilized);
        } else {
            laurent += 1;
            statuses.push(SlotStatus::DivergingAtWindow);
        }
    }
    Ok(LimitShape {
        rank: b.len(),
        stable_exponents: stable,
        laurent_count: laurent,
        statuses,
        window,
    })
}

/// `u^0`-part of a square matrix, or `None` when some entry's precision does
/// not reach past `u^0`.
fn u0_part(q: &DVRMatrix) -> Option<KMat> {
    let mut p = KMat::zero(q.rows, q.cols, q.config);
    for i in 0..q.rows {
        for j in 0..q.cols {
            let e = q.at(i, j);
            if let Some(n) = e.u_precision {
                if n <= 0 {
                    return None;
                }
            }
            *p.at_mut(i, j) = e.coeff_at(0);
        }
    }
    Some(p)
}

/// All steps injective with one shared nilpotent `u^0`-part: the limit is the
/// full `u`-localisation `K((u))^r`.
fn localisation_fast_path(sys: &DirectedSystem) -> Result<bool> {
    if sys.steps.is_empty() || sys.rank == 0 {
        return Ok(false);
    }
    let mut p0: Option<KMat> = None;
    for q in &sys.steps {
        match det(q)?.valuation()? {
            Valuation::Finite(_) => {}
            _ => return Ok(false),
        }
        let p = match u0_part(q) {
            Some(p) => p,
            None => return Ok(false),
        };
        match &p0 {
            None => p0 = Some(p),
            Some(first) => {
                if !first.sub(&p)?.is_zero()? {
                    return Ok(false);
                }
            }
        }
    }
    let p = p0.unwrap();
    let mut pow = p.clone();
    for _ in 1..sys.rank {
        if pow.is_zero()? {
            break;
        }
        pow = pow.mul(&p)?;
    }
    pow.is_zero()
}

/// Shape of `lim V_k` read off the trailing `window` steps (default: the
/// rank). Requires injective composites; systems with a non-injective step
/// go through [`noninjective_limit`].
pub fn limit_shape(sys: &DirectedSystem, window: Option<usize>) -> Result<LimitShape> {
    let w = window.unwrap_or(sys.rank.max(1)).max(1);
    if localisation_fast_path(sys)? {
        return Ok(LimitShape {
            rank: sys.rank,
            stable_exponents: Vec::new(),
            laurent_count: sys.rank,
            statuses: vec![SlotStatus::CertifiedDiverging; sys.rank],
            window: w,
        });
    }
    let n = sys.steps.len();
    let w = w.min(n);
    let (a, na) = sorted_exponents(&sys.composite(n - w)?)?;
    let (b, nb) = sorted_exponents(&sys.composite(n)?)?;
    if na > 0 || nb > 0 {
        return Err(Error::input(
            "limit_shape: the composites are not injective; use noninjective_limit",
        ));
    }
    shape_from_endpoints(&a, &b, w)
}

/// Limit of the constant system `V -> V -> ...` given by multiplication with
/// a single injective `Q`: the localisation of `V` at `Q`.
pub fn localise_at_element(q: &DVRMatrix, window: Option<usize>) -> Result<LimitShape> {
    if q.rows != q.cols {
        return Err(Error::input("localise_at_element: Q must be square"));
    }
    match det(q)?.valuation()? {
        Valuation::Finite(_) => {}
        Valuation::Infinity => {
            return Err(Error::input(
                "localise_at_element: Q is not injective; use noninjective_limit",
            ))
        }
        Valuation::AtLeast(_) => {
            return Err(Error::precision("localise_at_element: cannot certify det(Q) != 0"))
        }
    }
    let r = q.rows;
    let w = window.unwrap_or(r.max(1)).max(1);
    let n = w + r + 1;
    let sys = DirectedSystem::new(r, vec![q.clone(); n], q.config)?;
    limit_shape(&sys, Some(w))
}

// ---------------------------------------------------------------------------
// One non-injective step
// ---------------------------------------------------------------------------

/// Limit of a system in which exactly one step fails to be injective. The
/// limit splits into the part carried forward by the composites (finite
/// invariant factors of `R_k`) and the kernel reborn as the torsion-free
/// cokernel `C = coker(R)/Torsion`, which the later steps keep mapping
/// onward with its own exponent sequence.
#[derive(Clone, Debug)]
pub struct TwoBlockLimit {
    /// index into `steps` of the non-injective step, if any
    pub failing_step: Option<usize>,
    /// block from the finite invariant factors of the composites
    pub image_block: LimitShape,
    /// block from the reborn cokernel (zero when every step is injective)
    pub cokernel_block: LimitShape,
}

impl fmt::Display for TwoBlockLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.image_block.is_zero(), self.cokernel_block.is_zero()) {
            (true, true) => write!(f, "0"),
            (false, true) => write!(f, "{}", self.image_block),
            (true, false) => write!(f, "{}", self.cokernel_block),
            (false, false) => write!(f, "{} + {}", self.image_block, self.cokernel_block),
        }
    }
}

/// Coordinates of `coker(R)/Torsion` in terms of the ambient module: the
/// rows of the exact row-operation accumulator that pair to zero with the
/// image of `R`.
fn coker_coordinates(r: &DVRMatrix) -> Result<(DVRMatrix, usize)> {
    let core = snf_core(r, None)?;
    let rk = core.rank();
    let n = r.rows - rk;
    let all: Vec<usize> = (0..r.cols).collect();
    let rows: Vec<usize> = (rk..r.rows).collect();
    Ok((core.u_acc.submatrix(&rows, &all), n))
}

/// A set of `n` standard basis vectors on which the cokernel projection is
/// unimodular; they descend to a `K[[u]]`-basis of `coker(R)/Torsion`.
fn coker_section(pi: &DVRMatrix) -> Result<Vec<usize>> {
    let n = pi.rows;
    let r = pi.cols;
    if n == 0 {
        return Ok(Vec::new());
    }
    let rows: Vec<usize> = (0..n).collect();
    let mut pick: Vec<usize> = (0..n).collect();
    let mut saw_uncertified = false;
    loop {
        let sub = pi.submatrix(&rows, &pick);
        match det(&sub)?.valuation()? {
            Valuation::Finite(0) => return Ok(pick),
            Valuation::AtLeast(_) => saw_uncertified = true,
            _ => {}
        }
        // next n-combination of {0..r-1} in lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                if saw_uncertified {
                    return Err(Error::precision(
                        "reborn cokernel: cannot certify a unimodular set of coordinates",
                    ));
                }
                return Err(Error::internal("reborn cokernel: projection is not surjective"));
            }
            i -= 1;
            if pick[i] != i + r - n {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Limit of a system with at most one non-injective step. `declared` names
/// the index of that step in `steps`; it must match what the determinants
/// certify.
pub fn noninjective_limit(
    sys: &DirectedSystem,
    declared: Option<usize>,
    window: Option<usize>,
) -> Result<TwoBlockLimit> {
    let mut failing: Option<usize> = None;
    for (k, q) in sys.steps.iter().enumerate() {
        match det(q)?.valuation()? {
            Valuation::Finite(_) => {}
            Valuation::Infinity => {
                if failing.is_some() {
                    return Err(Error::input(
                        "noninjective_limit: more than one non-injective step",
                    ));
                }
                failing = Some(k);
            }
            Valuation::AtLeast(_) => {
                return Err(Error::precision(format!(
                    "noninjective_limit: cannot decide injectivity of step {}",
                    k
                )))
            }
        }
    }
    if failing != declared {
        return match (failing, declared) {
            (Some(k), None) => Err(Error::input(format!(
                "noninjective_limit: step {} is non-injective but no failure index was declared",
                k
            ))),
            (None, Some(p)) => {
                Err(Error::input(format!("noninjective_limit: step {} is injective", p)))
            }
            (Some(k), Some(p)) => Err(Error::input(format!(
                "noninjective_limit: declared failing step {} but step {} fails",
                p, k
            ))),
            (None, None) => unreachable!(),
        };
    }
    let w = window.unwrap_or(sys.rank.max(1)).max(1);
    let p0 = match failing {
        None => {
            return Ok(TwoBlockLimit {
                failing_step: None,
                image_block: limit_shape(sys, window)?,
                cokernel_block: LimitShape::empty(w),
            })
        }
        Some(p0) => p0,
    };

    // first singular composite R_p, with p = p0 + 1
    let p = p0 + 1;
    let n = sys.steps.len();
    let k1 = n.saturating_sub(w).max(p);
    let k2 = n;
    let win = k2 - k1;

    let rp = sys.composite(p)?;
    let (pi_p, nul) = coker_coordinates(&rp)?;
    let section = coker_section(&pi_p)?;

    let mut image_pair: Vec<Vec<i64>> = Vec::new();
    let mut coker_pair: Vec<Vec<i64>> = Vec::new();
    for &k in &[k1, k2] {
        let rk = sys.composite(k)?;
        let (finite, nk) = sorted_exponents(&rk)?;
        if nk != nul {
            return Err(Error::internal("noninjective_limit: kernel rank changed after the failure"));
        }
        image_pair.push(finite);
        // induced map C_p -> C_k on torsion-free cokernels, in coordinates
        let (pi_k, nk2) = coker_coordinates(&rk)?;
        if nk2 != nul {
            return Err(Error::internal("noninjective_limit: cokernel rank changed after the failure"));
        }
        let mut phi = DVRMatrix::identity(sys.rank, sys.config);
        for q in &sys.steps[p..k] {
            phi = q.mul(&phi)?;
        }
        let m = pi_k.mul(&phi)?;
        let rows: Vec<usize> = (0..nul).collect();
        let m = m.submatrix(&rows, &section);
        let (ell, zeros) = sorted_exponents(&m)?;
        if zeros > 0 {
            return Err(Error::internal("noninjective_limit: reborn cokernel map is not injective"));
        }
        coker_pair.push(ell);
    }

    Ok(TwoBlockLimit {
        failing_step: failing,
        image_block: shape_from_endpoints(&image_pair[0], &image_pair[1], win)?,
        cokernel_block: shape_from_endpoints(&coker_pair[0], &coker_pair[1], win)?,
    })
}

// ---------------------------------------------------------------------------
// Block composites
// ---------------------------------------------------------------------------

/// Invariant factors of a composite of steps that are the identity on a
/// `t`-dimensional block modulo `u` and divisible by `u` everywhere else.
#[derive(Clone, Debug)]
pub struct BlockFactorsReport {
    pub t: usize,
    pub s: usize,
    /// number of steps composed
    pub k: usize,
    pub factors: Vec<InvariantFactor>,
    /// number of unit factors (always `t`)
    pub unit_count: usize,
    /// smallest non-unit finite exponent, if any (always `>= k`)
    pub min_rest: Option<i64>,
    /// number of zero factors
    pub nullity: usize,
}

fn check_block_form(q: &DVRMatrix, t: usize, k: usize) -> Result<()> {
    let one = FieldElem::one(q.config.kind);
    for i in 0..q.rows {
        for j in 0..q.cols {
            let e = q.at(i, j);
            if let Some(n) = e.u_precision {
                if n <= 0 {
                    return Err(Error::precision(format!(
                        "block step {}: entry ({}, {}) has no certified u^0-coefficient",
                        k, i, j
                    )));
                }
            }
            let c0 = e.coeff_at(0);
            let ok = if i < t && j < t {
                if i == j { c0.sub(&one).zero_test()? } else { c0.zero_test()? }
            } else {
                c0.zero_test()?
            };
            if !ok {
                return Err(Error::input(format!(
                    "block step {}: entry ({}, {}) violates the block form mod u",
                    k, i, j
                )));
            }
        }
    }
    Ok(())
}

/// Composites of block-form steps have exactly `t` unit invariant factors;
/// after `k` steps every other factor is `u^{>= k}` or zero.
pub fn block_composite_factors(t: usize, s: usize, steps: &[DVRMatrix]) -> Result<BlockFactorsReport> {
    if steps.is_empty() {
        return Err(Error::input("block_composite_factors: need at least one step"));
    }
    let rank = t + s;
    let config = steps[0].config;
    for (k, q) in steps.iter().enumerate() {
        if q.rows != rank || q.cols != rank {
            return Err(Error::input(format!(
                "block_composite_factors: step {} is {}x{}, expected {}x{}",
                k, q.rows, q.cols, rank, rank
            )));
        }
        check_block_form(q, t, k)?;
    }
    let k = steps.len();
    let mut f = DVRMatrix::identity(rank, config);
    for q in steps {
        f = q.mul(&f)?;
    }
    let mut factors = smith_normal_form(&f)?.exponents;
    factors.sort_unstable();
    let unit_count = factors.iter().filter(|x| **x == InvariantFactor::U(0)).count();
    let nullity = factors.iter().filter(|x| **x == InvariantFactor::Zero).count();
    let min_rest = factors
        .iter()
        .filter_map(|x| x.exponent())
        .filter(|j| *j > 0)
        .min();
    if unit_count != t {
        return Err(Error::internal(format!(
            "block composite: {} unit factors, expected {}",
            unit_count, t
        )));
    }
    if let Some(m) = min_rest {
        if m < k as i64 {
            return Err(Error::internal(format!(
                "block composite: factor u^{} below the step count {}",
                m, k
            )));
        }
    }
    if unit_count + nullity + factors.iter().filter_map(|x| x.exponent()).filter(|j| *j > 0).count()
        != rank
    {
        return Err(Error::internal("block composite: factor count mismatch"));
    }
    Ok(BlockFactorsReport { t, s, k, factors, unit_count, min_rest, nullity })
}

// ---------------------------------------------------------------------------
// Persistence lattice
// ---------------------------------------------------------------------------

/// Where and when a cell of the final Young diagram appeared.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellBar {
    /// row in the final shape (longest row first), 0-based
    pub row: usize,
    /// cell position within the row, 1-based
    pub col: i64,
    /// first stage `k` whose diagram contains the cell
    pub birth: usize,
}

/// The Young diagrams of the composites `R_1, R_2, ...` of an injective
/// system. Exponent monotonicity makes them nested, so each cell is born
/// once and never dies.
#[derive(Clone, Debug)]
pub struct PersistenceLattice {
    /// `(k, diagrams of R_k)` for `k = 1..=steps`
    pub stages: Vec<(usize, YoungDiagramPair)>,
    pub bars: Vec<CellBar>,
}

fn padded_shape(exponents: &[i64], rank: usize) -> Vec<i64> {
    let mut rows: Vec<i64> = exponents.iter().copied().filter(|j| *j > 0).collect();
    rows.sort_unstable_by(|x, y| y.cmp(x));
    rows.resize(rank, 0);
    rows
}

pub fn persistence_lattice(sys: &DirectedSystem) -> Result<PersistenceLattice> {
    let mut stages = Vec::new();
    let mut shapes: Vec<Vec<i64>> = Vec::new();
    let mut r = DVRMatrix::identity(sys.rank, sys.config);
    for (k, q) in sys.steps.iter().enumerate() {
        r = q.mul(&r)?;
        let (finite, nullity) = sorted_exponents(&r)?;
        if nullity > 0 {
            return Err(Error::input(format!(
                "persistence_lattice: composite through step {} is not injective",
                k
            )));
        }
        let fil = InducedFiltration {
            source_rank: sys.rank,
            kernel_rank: 0,
            finite_exponents: finite.clone(),
            basis_degrees: None,
            codomain_free_rows: Vec::new(),
        };
        stages.push((k + 1, young_diagrams(&fil)?));
        shapes.push(padded_shape(&finite, sys.rank));
    }
    for win in shapes.windows(2) {
        for (a, b) in win[0].iter().zip(win[1].iter()) {
            if a > b {
                return Err(Error::internal("persistence_lattice: diagrams are not nested"));
            }
        }
    }
    let mut bars = Vec::new();
    if let Some(last) = shapes.last() {
        for (row, len) in last.iter().enumerate() {
            for col in 1..=*len {
                let birth = shapes
                    .iter()
                    .position(|s| s[row] >= col)
                    .map(|i| i + 1)
                    .ok_or_else(|| Error::internal("persistence_lattice: cell without a birth"))?;
                bars.push(CellBar { row, col, birth });
            }
        }
    }
    Ok(PersistenceLattice { stages, bars })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::useries::{SeriesKind, USeries};

    fn cfg() -> FieldConfig {
        FieldConfig::rational()
    }

    fn pmat(rows: usize, cols: usize, entries: &[(usize, usize, i64, i64)]) -> DVRMatrix {
        // entries: (i, j, coefficient, u-exponent)
        let mut m = DVRMatrix::zero(rows, cols, cfg());
        for (i, j, c, k) in entries {
            let s = USeries::monomial(
                SeriesKind::Power,
                cfg(),
                FieldElem::from_int(cfg().kind, *c),
                *k,
            )
            .unwrap();
            m.set(*i, *j, s).unwrap();
        }
        m
    }

    fn exps(f: &[InvariantFactor]) -> Vec<Option<i64>> {
        f.iter().map(|x| x.exponent()).collect()
    }

    #[test]
    fn diag_one_u_composites_and_limit() {
        let q = pmat(2, 2, &[(0, 0, 1, 0), (1, 1, 1, 1)]);
        let sys = DirectedSystem::new(2, vec![q; 4], cfg()).unwrap();
        assert_eq!(exps(&composite_factors(&sys, 4).unwrap()), vec![Some(0), Some(4)]);
        assert_eq!(exps(&composite_factors(&sys, 0).unwrap()), vec![Some(0), Some(0)]);

        let shape = limit_shape(&sys, None).unwrap();
        assert_eq!(shape.stable_exponents, vec![0]);
        assert_eq!(shape.laurent_count, 1);
        assert_eq!(shape.statuses, vec![SlotStatus::Stabilized, SlotStatus::DivergingAtWindow]);
        assert_eq!(shape.to_string(), "K[[u]] + K((u))");
    }

    #[test]
    fn alternating_steps_do_not_fully_localise() {
        let q_odd = pmat(2, 2, &[(0, 1, 1, 0), (1, 0, 1, 1)]);
        let q_even = pmat(2, 2, &[(0, 1, 1, 1), (1, 0, 1, 0)]);
        let sys = DirectedSystem::new(
            2,
            vec![q_odd.clone(), q_even.clone(), q_odd, q_even],
            cfg(),
        )
        .unwrap();
        assert_eq!(exps(&composite_factors(&sys, 2).unwrap()), vec![Some(0), Some(2)]);

        let shape = limit_shape(&sys, None).unwrap();
        assert_eq!(shape.stable_exponents, vec![0]);
        assert_eq!(shape.laurent_count, 1);
        // the u^0-parts differ from step to step, so no certificate applies
        assert_eq!(shape.statuses[1], SlotStatus::DivergingAtWindow);
        assert_eq!(shape.to_string(), "K[[u]] + K((u))");
    }

    #[test]
    fn constant_nilpotent_step_certifies_full_localisation() {
        let q = pmat(2, 2, &[(0, 1, 1, 0), (1, 0, 1, 1)]);
        let sys = DirectedSystem::new(2, vec![q; 3], cfg()).unwrap();
        let shape = limit_shape(&sys, None).unwrap();
        assert_eq!(shape.stable_exponents, Vec::<i64>::new());
        assert_eq!(shape.laurent_count, 2);
        assert!(shape.statuses.iter().all(|s| *s == SlotStatus::CertifiedDiverging));
        assert_eq!(shape.to_string(), "K((u))^2");
    }

    #[test]
    fn identity_system_is_free() {
        let sys = DirectedSystem::new(2, vec![DVRMatrix::identity(2, cfg()); 3], cfg()).unwrap();
        let shape = limit_shape(&sys, None).unwrap();
        assert_eq!(shape.stable_exponents, vec![0, 0]);
        assert_eq!(shape.laurent_count, 0);
        assert_eq!(shape.to_string(), "K[[u]] + K[[u]]");
    }

    #[test]
    fn localise_at_u_and_at_identity() {
        let u = pmat(1, 1, &[(0, 0, 1, 1)]);
        let shape = localise_at_element(&u, None).unwrap();
        assert_eq!(shape.to_string(), "K((u))");
        assert_eq!(shape.statuses, vec![SlotStatus::CertifiedDiverging]);

        let id = DVRMatrix::identity(3, cfg());
        let shape = localise_at_element(&id, None).unwrap();
        assert_eq!(shape.to_string(), "K[[u]] + K[[u]] + K[[u]]");

        let zero = DVRMatrix::zero(1, 1, cfg());
        assert!(localise_at_element(&zero, None).is_err());
    }

    #[test]
    fn mixed_diag_partial_localisation() {
        // diag(1, u^2) localises only the second slot
        let q = pmat(2, 2, &[(0, 0, 1, 0), (1, 1, 1, 2)]);
        let shape = localise_at_element(&q, None).unwrap();
        assert_eq!(shape.stable_exponents, vec![0]);
        assert_eq!(shape.laurent_count, 1);
        assert_eq!(shape.to_string(), "K[[u]] + K((u))");
    }

    #[test]
    fn reborn_cokernel_rank_one() {
        // Q_0 = 0, then identities: the limit is K[[u]] carried by coker(R_1)
        let zero = DVRMatrix::zero(1, 1, cfg());
        let id = DVRMatrix::identity(1, cfg());
        let sys =
            DirectedSystem::new(1, vec![zero, id.clone(), id.clone(), id], cfg()).unwrap();
        let lim = noninjective_limit(&sys, Some(0), None).unwrap();
        assert_eq!(lim.failing_step, Some(0));
        assert!(lim.image_block.is_zero());
        assert_eq!(lim.cokernel_block.stable_exponents, vec![0]);
        assert_eq!(lim.cokernel_block.laurent_count, 0);
        assert_eq!(lim.to_string(), "K[[u]]");

        assert!(noninjective_limit(&sys, None, None).is_err());
        assert!(noninjective_limit(&sys, Some(1), None).is_err());
    }

    #[test]
    fn reborn_cokernel_next_to_diverging_image() {
        // Q_0 = diag(0, 1), then diag(1, u): e_2 localises, the killed e_1
        // comes back as a stable K[[u]] through the cokernel block.
        let q0 = pmat(2, 2, &[(1, 1, 1, 0)]);
        let qk = pmat(2, 2, &[(0, 0, 1, 0), (1, 1, 1, 1)]);
        let sys = DirectedSystem::new(2, vec![q0, qk.clone(), qk.clone(), qk], cfg()).unwrap();
        let lim = noninjective_limit(&sys, Some(0), None).unwrap();
        assert_eq!(lim.image_block.laurent_count, 1);
        assert_eq!(lim.image_block.stable_exponents, Vec::<i64>::new());
        assert_eq!(lim.cokernel_block.stable_exponents, vec![0]);
        assert_eq!(lim.to_string(), "K((u)) + K[[u]]");
    }

    #[test]
    fn noninjective_rejects_two_failures() {
        let zero = DVRMatrix::zero(1, 1, cfg());
        let sys = DirectedSystem::new(1, vec![zero.clone(), zero], cfg()).unwrap();
        assert!(noninjective_limit(&sys, Some(0), None).is_err());
    }

    #[test]
    fn injective_system_through_noninjective_entry_point() {
        let q = pmat(1, 1, &[(0, 0, 1, 1)]);
        let sys = DirectedSystem::new(1, vec![q; 3], cfg()).unwrap();
        let lim = noninjective_limit(&sys, None, None).unwrap();
        assert_eq!(lim.failing_step, None);
        assert!(lim.cokernel_block.is_zero());
        assert_eq!(lim.image_block.to_string(), "K((u))");
    }

    #[test]
    fn block_composite_three_steps() {
        // f = [[1, u], [u, u]]: identity 1x1 block mod u, everything else in u
        let f = pmat(2, 2, &[(0, 0, 1, 0), (0, 1, 1, 1), (1, 0, 1, 1), (1, 1, 1, 1)]);
        let rep = block_composite_factors(1, 1, &[f.clone(), f.clone(), f]).unwrap();
        assert_eq!(rep.unit_count, 1);
        assert_eq!(rep.nullity, 0);
        assert!(rep.min_rest.unwrap() >= 3);
    }

    #[test]
    fn block_form_rejected_without_u_divisibility() {
        let f = pmat(2, 2, &[(0, 0, 1, 0), (0, 1, 1, 0), (1, 0, 1, 1), (1, 1, 1, 1)]);
        assert!(block_composite_factors(1, 1, &[f]).is_err());
    }

    #[test]
    fn block_composite_with_kernel() {
        // D-block identically zero: the s-part dies instead of gaining u's
        let f = pmat(2, 2, &[(0, 0, 1, 0)]);
        let rep = block_composite_factors(1, 1, &[f.clone(), f]).unwrap();
        assert_eq!(rep.unit_count, 1);
        assert_eq!(rep.nullity, 1);
        assert_eq!(rep.min_rest, None);
    }

    #[test]
    fn persistence_lattice_grows_one_box_per_step() {
        let q = pmat(2, 2, &[(0, 0, 1, 0), (1, 1, 1, 1)]);
        let sys = DirectedSystem::new(2, vec![q; 3], cfg()).unwrap();
        let lat = persistence_lattice(&sys).unwrap();
        assert_eq!(lat.stages.len(), 3);
        assert_eq!(lat.stages[0].1.shape, vec![1]);
        assert_eq!(lat.stages[1].1.shape, vec![2]);
        assert_eq!(lat.stages[2].1.shape, vec![3]);
        assert_eq!(lat.stages[2].1.dual_shape, vec![1, 1, 1]);
        assert_eq!(
            lat.bars,
            vec![
                CellBar { row: 0, col: 1, birth: 1 },
                CellBar { row: 0, col: 2, birth: 2 },
                CellBar { row: 0, col: 3, birth: 3 },
            ]
        );
    }

    #[test]
    fn persistence_lattice_identity_is_empty() {
        let sys = DirectedSystem::new(2, vec![DVRMatrix::identity(2, cfg()); 2], cfg()).unwrap();
        let lat = persistence_lattice(&sys).unwrap();
        assert!(lat.stages.iter().all(|(_, p)| p.shape.is_empty()));
        assert!(lat.bars.is_empty());
    }

    #[test]
    fn persistence_lattice_rejects_noninjective() {
        let zero = DVRMatrix::zero(1, 1, cfg());
        let sys = DirectedSystem::new(1, vec![zero], cfg()).unwrap();
        assert!(persistence_lattice(&sys).is_err());
    }
}
