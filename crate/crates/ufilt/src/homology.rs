//! Graded chain complexes of free `K[[u]]`-modules with differential
//! `d = δ₀ + uδ₁ + u²δ₂ + …`, and their three cohomology models
//! `W⁻ = H(C)`, `W^∞ = H(C_u)`, `W⁺ = H(C_u/uC)`.
//!
//! All homology is computed module-level via Smith normal form over the DVR:
//! first the graded SNF of `d` identifies `ker d` (a free direct summand with
//! labelled basis), then the SNF of `d` rewritten in kernel coordinates gives
//! the invariant factors and the degree labels of the quotient.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::coeff::{FieldConfig, FieldElem};
use crate::error::{Error, Result};
use crate::kmat::{self, KMat};
use crate::smith::{snf_core, DVRMatrix, GradedLabels};
use crate::useries::{SeriesKind, USeries};

/// Free generators with integer cohomological degrees. `u` has degree 2; a
/// Novikov coefficient contributes `t_grading * exponent` to the degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedBasis {
    generators: Vec<(String, i64)>,
}

impl GradedBasis {
    pub fn new(generators: Vec<(String, i64)>) -> Result<Self> {
        for (i, (n, _)) in generators.iter().enumerate() {
            if generators[..i].iter().any(|(m, _)| m == n) {
                return Err(Error::input(alloc::format!("duplicate generator name '{}'", n)));
            }
        }
        Ok(GradedBasis { generators })
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn degree(&self, i: usize) -> i64 {
        self.generators[i].1
    }

    pub fn name(&self, i: usize) -> &str {
        &self.generators[i].0
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|(n, _)| n == name)
    }

    pub fn degrees(&self) -> Vec<i64> {
        self.generators.iter().map(|(_, d)| *d).collect()
    }
}

/// A complex `(C, d)` of free `K[[u]]`-modules. Columns of `d` are the
/// differentials of the generators: `d(e_j) = Σ_i d_{ij} e_i`.
#[derive(Clone, Debug)]
pub struct EqChainComplex {
    pub basis: GradedBasis,
    pub d: DVRMatrix,
}

impl EqChainComplex {
    /// Validates squareness, homogeneity (an entry term `c·u^k` from `e_j`
    /// to `e_i` needs `deg e_i = deg e_j + 1 - 2k - deg_T c`), and `d∘d = 0`
    /// up to precision.
    pub fn new(basis: GradedBasis, d: DVRMatrix) -> Result<Self> {
        let n = basis.len();
        if d.rows != n || d.cols != n {
            return Err(Error::input("differential must be square and match the basis"));
        }
        let c = EqChainComplex { basis, d };
        c.d.check_homogeneous(&c.labels())?;
        let dd = c.d.mul(&c.d)?;
        if !dd.is_zero_at_precision() {
            return Err(Error::input("d∘d ≠ 0: not a chain complex"));
        }
        Ok(c)
    }

    pub fn config(&self) -> FieldConfig {
        self.d.config
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    fn labels(&self) -> GradedLabels {
        let degs = self.basis.degrees();
        GradedLabels { row: degs.clone(), col: degs, map_degree: 1 }
    }

    /// The ordinary complex `(ord C, δ₀)`: the `u^0`-part of `d` over the
    /// same basis. Requires each entry to determine its `u^0` coefficient.
    pub fn delta0_complex(&self) -> Result<EqChainComplex> {
        let n = self.rank();
        let cfg = self.config();
        let mut d0 = DVRMatrix::zero(n, n, cfg);
        for i in 0..n {
            for j in 0..n {
                let e = self.d.at(i, j);
                if let Some(p) = e.u_precision {
                    if p <= 0 {
                        return Err(Error::precision(
                            "u^0 part of the differential is below the stated precision",
                        ));
                    }
                }
                let c0 = e.coeff_at(0);
                if !c0.is_exact_zero() {
                    d0.set(i, j, USeries::monomial(SeriesKind::Power, cfg, c0, 0)?)?;
                }
            }
        }
        EqChainComplex::new(self.basis.clone(), d0)
    }
}

/// Graded isomorphism class of a finitely generated module over `K[[u]]`,
/// `K((u))`, or mixed: degrees of
/// `K[[u]]`-summands, `K((u))`-summands, `𝔽`-summands, and `(k, degree)`
/// for each torsion summand `T_k = K[[u]]/u^k`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct FGModuleShape {
    pub free_power: Vec<i64>,
    pub free_laurent: Vec<i64>,
    pub tails: Vec<i64>,
    pub torsion: Vec<(i64, i64)>,
}

impl FGModuleShape {
    pub fn zero() -> Self {
        FGModuleShape::default()
    }

    pub fn is_zero(&self) -> bool {
        self.free_power.is_empty()
            && self.free_laurent.is_empty()
            && self.tails.is_empty()
            && self.torsion.is_empty()
    }

    fn normalize(mut self) -> Self {
        self.free_power.sort_unstable();
        self.free_laurent.sort_unstable();
        self.tails.sort_unstable();
        self.torsion.sort_unstable();
        self
    }
}

impl fmt::Display for FGModuleShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if first {
                first = false;
                Ok(())
            } else {
                write!(f, " + ")
            }
        };
        for d in &self.free_power {
            sep(f)?;
            write!(f, "K[[u]](deg {})", d)?;
        }
        for d in &self.free_laurent {
            sep(f)?;
            write!(f, "K((u))(deg {})", d)?;
        }
        for d in &self.tails {
            sep(f)?;
            write!(f, "F(deg {})", d)?;
        }
        for (k, d) in &self.torsion {
            sep(f)?;
            write!(f, "T_{}(deg {})", k, d)?;
        }
        Ok(())
    }
}

/// Shared result of the two-stage SNF pipeline: the free degrees and the
/// torsion `(k, degree)` of `W⁻`.
pub(crate) struct MinusData {
    pub free: Vec<i64>,
    pub torsion: Vec<(i64, i64)>,
}

pub(crate) fn minus_data(c: &EqChainComplex) -> Result<MinusData> {
    let n = c.rank();
    if n == 0 {
        return Ok(MinusData { free: Vec::new(), torsion: Vec::new() });
    }
    let core = snf_core(&c.d, Some(c.labels()))?;
    let r = core.rank();
    let m = n - r;
    if m == 0 {
        return Ok(MinusData { free: Vec::new(), torsion: Vec::new() });
    }
    let fl = core.labels.as_ref().expect("labels preserved");
    let ker_deg: Vec<i64> = fl.col[r..].to_vec();

    // d in kernel coordinates: the last m rows of (s·V⁻¹)·d. The top r rows
    // must vanish because im d ⊂ ker d is spanned by the last m columns of V.
    let prod = core.vinv_scaled.mul(&c.d)?;
    let all: Vec<usize> = (0..n).collect();
    let top: Vec<usize> = (0..r).collect();
    if !prod.submatrix(&top, &all).is_zero_at_precision() {
        return Err(Error::internal("image not contained in kernel coordinates"));
    }
    let bot: Vec<usize> = (r..n).collect();
    let b = prod.submatrix(&bot, &all);
    let blabels = GradedLabels {
        row: ker_deg,
        col: c.basis.degrees(),
        map_degree: 1 + core.s_degree,
    };
    let core2 = snf_core(&b, Some(blabels))?;
    let r2 = core2.rank();
    let fl2 = core2.labels.as_ref().expect("labels preserved");
    let mut torsion = Vec::new();
    for (t, (j, _)) in core2.pivots.iter().enumerate() {
        if *j >= 1 {
            torsion.push((*j, fl2.row[t]));
        }
    }
    let free: Vec<i64> = fl2.row[r2..].to_vec();
    Ok(MinusData { free, torsion })
}

/// `W⁻ = H(C)`: free part plus torsion, with degree labels.
pub fn homology_minus(c: &EqChainComplex) -> Result<FGModuleShape> {
    let data = minus_data(c)?;
    Ok(FGModuleShape {
        free_power: data.free,
        torsion: data.torsion,
        ..FGModuleShape::default()
    }
    .normalize())
}

/// `W^∞ = H(C_u) ≅ (W⁻)_u`: localisation is flat, so the torsion dies and
/// each `K[[u]]`-summand becomes a `K((u))`-summand in the same degree.
pub fn homology_infty(c: &EqChainComplex) -> Result<FGModuleShape> {
    let data = minus_data(c)?;
    Ok(FGModuleShape { free_laurent: data.free, ..FGModuleShape::default() }.normalize())
}

/// `W⁺ = H(C_u/uC) ≅ T[−1] ⊕ 𝔽^r`: one `𝔽`-summand per free
/// summand of `W⁻` in the same degree, and the torsion of `W⁻` with each
/// generator degree raised by 1 (the summand `T_k` is generated by
/// `u^{−k+1}e` of degree `deg e − 2(k−1)`).
pub fn homology_plus(c: &EqChainComplex) -> Result<FGModuleShape> {
    let data = minus_data(c)?;
    let torsion = data.torsion.into_iter().map(|(k, d)| (k, d + 1)).collect();
    Ok(FGModuleShape { tails: data.free, torsion, ..FGModuleShape::default() }.normalize())
}

/// Betti degrees of `ord W = H(C/uC, [δ₀])` as a `K`-vector space.
pub fn ordinary_cohomology(c: &EqChainComplex) -> Result<Vec<i64>> {
    let d0 = c.delta0_complex()?;
    let data = minus_data(&d0)?;
    if !data.torsion.is_empty() {
        return Err(Error::internal("ordinary complex produced u-torsion"));
    }
    let mut betti = data.free;
    betti.sort_unstable();
    Ok(betti)
}

/// Coordinates of cycle classes in a presentation of `W⁻`.
///
/// Each column of `chains` must be a cycle of `C`; the result expresses its
/// homology class in an adapted generator order: the torsion generators
/// first (coordinate reduced mod `u^k`, so it carries an `O(u^k)` marker),
/// then the free generators. The shape listing those generators with their
/// degrees is returned alongside; its rows align with the matrix rows, so
/// the pair feeds `induced_filtration` directly. The shape agrees with
/// `homology_minus` up to reordering, but the generators themselves are
/// pipeline-chosen, so individual coordinates are only meaningful up to the
/// change of basis — valuations and linear relations between columns are
/// basis-independent.
pub fn class_map(c: &EqChainComplex, chains: &DVRMatrix) -> Result<(DVRMatrix, FGModuleShape)> {
    let n = c.rank();
    let cfg = c.config();
    if chains.rows != n {
        return Err(Error::input("class_map: chains must have one row per generator"));
    }
    let dz = c.d.mul(chains)?;
    for j in 0..dz.cols {
        for i in 0..dz.rows {
            let e = dz.at(i, j);
            if !e.is_zero_at_precision() {
                return Err(Error::input(alloc::format!("class_map: column {} is not a cycle", j)));
            }
            if !e.is_exact_zero() {
                return Err(Error::precision(
                    "class_map: cannot certify the columns are cycles at this precision",
                ));
            }
        }
    }
    if n == 0 {
        return Ok((DVRMatrix::zero(0, chains.cols, cfg), FGModuleShape::zero()));
    }
    let core = snf_core(&c.d, Some(c.labels()))?;
    let r = core.rank();
    let m = n - r;
    if m == 0 {
        return Ok((DVRMatrix::zero(0, chains.cols, cfg), FGModuleShape::zero()));
    }
    let fl = core.labels.as_ref().expect("labels preserved");
    let ker_deg: Vec<i64> = fl.col[r..].to_vec();
    let all: Vec<usize> = (0..n).collect();
    let top: Vec<usize> = (0..r).collect();
    let bot: Vec<usize> = (r..n).collect();
    let allc: Vec<usize> = (0..chains.cols).collect();

    // chains in kernel coordinates (globally scaled by the stage-one unit):
    // exact cycles have exact zeros in the pivot rows.
    let kc = core.vinv_scaled.mul(chains)?;
    if !kc.submatrix(&top, &allc).is_zero_at_precision() {
        return Err(Error::internal("class_map: cycle columns left the kernel coordinates"));
    }
    let kc_bot = kc.submatrix(&bot, &allc);

    // presentation of W⁻ in the same coordinates, as in `minus_data`
    let prod = core.vinv_scaled.mul(&c.d)?;
    let b = prod.submatrix(&bot, &all);
    let blabels =
        GradedLabels { row: ker_deg, col: c.basis.degrees(), map_degree: 1 + core.s_degree };
    let core2 = snf_core(&b, Some(blabels))?;
    let r2 = core2.rank();
    let fl2 = core2.labels.as_ref().expect("labels preserved");

    // the stage-two row transform diagonalises the relations: row t < r2 has
    // the single relation u^{j_t}·unit, rows ≥ r2 are free
    let w = core2.u_acc.mul(&kc_bot)?;
    let mut tors_rows = Vec::new();
    let mut torsion = Vec::new();
    for (t, (j, _)) in core2.pivots.iter().enumerate() {
        if *j >= 1 {
            tors_rows.push(t);
            torsion.push((*j, fl2.row[t]));
        }
    }
    let free: Vec<i64> = fl2.row[r2..].to_vec();
    let mut out = DVRMatrix::zero(tors_rows.len() + free.len(), chains.cols, cfg);
    for (oi, &t) in tors_rows.iter().enumerate() {
        let k = core2.pivots[t].0;
        for jc in 0..chains.cols {
            out.set(oi, jc, w.at(t, jc).truncate_to(k))?;
        }
    }
    for (oi, t) in (r2..m).enumerate() {
        for jc in 0..chains.cols {
            out.set(tors_rows.len() + oi, jc, w.at(t, jc).clone())?;
        }
    }
    let shape = FGModuleShape { free_power: free, torsion, ..FGModuleShape::default() };
    Ok((out, shape))
}

// ---------------------------------------------------------------------------
// Exact-sequence checks
// ---------------------------------------------------------------------------

/// Degreewise exactness report for the localisation LES and the
/// ordinary-cohomology LES, plus the vanishing biconditional
/// (ordinary cohomology is zero iff `W⁺` is).
#[derive(Clone, Debug)]
pub struct LesReport {
    pub window: (i64, i64),
    pub pass: bool,
    pub first_failing_degree: Option<i64>,
    pub loc_pass: bool,
    pub ord_pass: bool,
    pub vanishing_pass: bool,
}

fn dim_free_power(g: i64, m: i64) -> i64 {
    (m >= g && (m - g) % 2 == 0) as i64
}

fn dim_laurent(g: i64, m: i64) -> i64 {
    ((m - g) % 2 == 0) as i64
}

fn dim_tail(g: i64, m: i64) -> i64 {
    (m <= g && (m - g) % 2 == 0) as i64
}

fn dim_torsion(k: i64, tau: i64, m: i64) -> i64 {
    (m >= tau && m <= tau + 2 * (k - 1) && (m - tau) % 2 == 0) as i64
}

/// Checks, for every degree `m` in the window:
///   localisation:  dim W^∞_m = dim(free W⁻)_{m−2} + dim(tails W⁺)_m  and the
///            connecting map matches the torsion of W⁺ with W⁻ shifted;
///   ordinary:  dim ord W_m = dim W⁻_m − dim W⁻_{m−2}
///               + top_{m−1} + top_{m−2},
/// where `top_d` counts torsion summands whose top slice `u^{k−1}·gen` sits
/// in degree `d` (the kernel of `u` on `W⁻`). Requires `t_grading = 0` so
/// that degreewise dimensions over `K` are finite.
pub fn check_les(c: &EqChainComplex, window: (i64, i64)) -> Result<LesReport> {
    if c.config().t_grading() != 0 {
        return Err(Error::input(
            "check_les: degreewise dimensions need t_grading = 0 \
             (coefficients concentrated in degree 0)",
        ));
    }
    if window.0 > window.1 {
        return Err(Error::input("check_les: empty degree window"));
    }
    let data = minus_data(c)?;
    let betti = ordinary_cohomology(c)?;
    let free = &data.free;
    let tors = &data.torsion;

    let wm = |m: i64| -> i64 {
        free.iter().map(|g| dim_free_power(*g, m)).sum::<i64>()
            + tors.iter().map(|(k, t)| dim_torsion(*k, *t, m)).sum::<i64>()
    };
    let top = |d: i64| -> i64 { tors.iter().filter(|(k, t)| t + 2 * (k - 1) == d).count() as i64 };
    let o = |m: i64| -> i64 { betti.iter().filter(|b| **b == m).count() as i64 };

    let mut loc_pass = true;
    let mut ord_pass = true;
    let mut first_fail = None;
    for m in window.0..=window.1 {
        let laurent_m: i64 = free.iter().map(|g| dim_laurent(*g, m)).sum();
        let freepow_m2: i64 = free.iter().map(|g| dim_free_power(*g, m - 2)).sum();
        let tails_m: i64 = free.iter().map(|g| dim_tail(*g, m)).sum();
        let torsplus_m: i64 = tors.iter().map(|(k, t)| dim_torsion(*k, t + 1, m)).sum();
        let torsminus_m1: i64 = tors.iter().map(|(k, t)| dim_torsion(*k, *t, m - 1)).sum();
        let loc_ok = laurent_m == freepow_m2 + tails_m && torsplus_m == torsminus_m1;
        let ord = o(m) == wm(m) - wm(m - 2) + top(m - 1) + top(m - 2);
        if !(loc_ok && ord) && first_fail.is_none() {
            first_fail = Some(m);
        }
        loc_pass &= loc_ok;
        ord_pass &= ord;
    }
    let plus_zero = free.is_empty() && tors.is_empty();
    let vanishing_pass = betti.is_empty() == plus_zero;
    Ok(LesReport {
        window,
        pass: loc_pass && ord_pass && vanishing_pass,
        first_failing_degree: first_fail,
        loc_pass,
        ord_pass,
        vanishing_pass,
    })
}

// ---------------------------------------------------------------------------
// Filtered complexes over K and the spectral sequence engine
// ---------------------------------------------------------------------------

/// A finite chain complex of `K`-vector spaces with a filtration level and a
/// total degree per basis element. The differential must raise the total
/// degree by 1 and never decrease the level (so `F_p = span{level ≥ p}` is a
/// decreasing filtration of subcomplexes).
pub(crate) struct FilteredKComplex {
    /// `(level, total degree)` of each basis element.
    pub items: Vec<(i64, i64)>,
    /// Column `j` lists `(i, c)` with `d(b_j) = Σ c·b_i`.
    pub dcols: Vec<Vec<(usize, FieldElem)>>,
    pub config: FieldConfig,
}

impl FilteredKComplex {
    pub fn validate(&self) -> Result<()> {
        for (j, col) in self.dcols.iter().enumerate() {
            for (i, c) in col {
                if c.is_exact_zero() {
                    continue;
                }
                let (lj, dj) = self.items[j];
                let (li, di) = self.items[*i];
                if di != dj + 1 {
                    return Err(Error::internal("filtered complex: differential degree ≠ 1"));
                }
                if li < lj {
                    return Err(Error::internal("filtered complex: differential drops level"));
                }
            }
        }
        Ok(())
    }

    /// Indices of basis elements in each total degree.
    pub fn slices(&self) -> BTreeMap<i64, Vec<usize>> {
        let mut m: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (i, (_, d)) in self.items.iter().enumerate() {
            m.entry(*d).or_default().push(i);
        }
        m
    }

    /// The differential from the degree-`m` slice to the degree-`m+1` slice.
    fn dmat(&self, slices: &BTreeMap<i64, Vec<usize>>, m: i64) -> KMat {
        let src = slices.get(&m).map(Vec::as_slice).unwrap_or(&[]);
        let tgt = slices.get(&(m + 1)).map(Vec::as_slice).unwrap_or(&[]);
        let mut mat = KMat::zero(tgt.len(), src.len(), self.config);
        for (jj, &j) in src.iter().enumerate() {
            for (i, c) in &self.dcols[j] {
                // targets are distinct within a column, so plain assignment
                if let Some(ii) = tgt.iter().position(|t| t == i) {
                    *mat.at_mut(ii, jj) = c.clone();
                }
            }
        }
        mat
    }

    /// Basis (as columns over the degree-`m` slice) of
    /// `Z_r^{p,m} = {x ∈ F_p : dx ∈ F_{p+r}}` in total degree `m`.
    fn z_basis(&self, slices: &BTreeMap<i64, Vec<usize>>, p: i64, r: i64, m: i64) -> Result<KMat> {
        let src = slices.get(&m).map(Vec::as_slice).unwrap_or(&[]);
        let nm = src.len();
        if nm == 0 {
            return Ok(KMat::zero(0, 0, self.config));
        }
        let sub: Vec<usize> = (0..nm).filter(|&jj| self.items[src[jj]].0 >= p).collect();
        let dm = self.dmat(slices, m);
        let tgt = slices.get(&(m + 1)).map(Vec::as_slice).unwrap_or(&[]);
        let low: Vec<usize> = (0..tgt.len()).filter(|&ii| self.items[tgt[ii]].0 < p + r).collect();
        // kernel of (low rows of dm) restricted to the sub-columns
        let mut a = KMat::zero(low.len(), sub.len(), self.config);
        for (ri, &i) in low.iter().enumerate() {
            for (cj, &j) in sub.iter().enumerate() {
                *a.at_mut(ri, cj) = dm.at(i, j).clone();
            }
        }
        let k = a.kernel()?;
        let mut out = KMat::zero(nm, k.cols, self.config);
        for c in 0..k.cols {
            for (cj, &j) in sub.iter().enumerate() {
                *out.at_mut(j, c) = k.at(cj, c).clone();
            }
        }
        Ok(out)
    }

    /// `dim E_r^{p, m}` where `m` is the total degree (`q = m − p`).
    pub fn page_dim(
        &self,
        slices: &BTreeMap<i64, Vec<usize>>,
        r: i64,
        p: i64,
        m: i64,
    ) -> Result<usize> {
        let z = self.z_basis(slices, p, r, m)?;
        if z.cols == 0 {
            return Ok(0);
        }
        let b1 = self.z_basis(slices, p + 1, r - 1, m)?;
        let zprev = self.z_basis(slices, p - r + 1, r - 1, m - 1)?;
        let b2 = self.dmat(slices, m - 1).mul(&zprev)?;
        let b = b1.hstack(&b2);
        Ok(z.rank()? - b.rank()?)
    }

    /// Whether the class of `x` (coordinates over the degree-`m` slice,
    /// level `p`) is nonzero on page `r`: `x ∈ Z_r` and `x ∉ B_r`.
    pub fn class_alive(
        &self,
        slices: &BTreeMap<i64, Vec<usize>>,
        x: &KMat,
        r: i64,
        p: i64,
        m: i64,
    ) -> Result<bool> {
        let z = self.z_basis(slices, p, r, m)?;
        if !kmat::in_span(&z, x)? {
            return Ok(false);
        }
        let b1 = self.z_basis(slices, p + 1, r - 1, m)?;
        let zprev = self.z_basis(slices, p - r + 1, r - 1, m - 1)?;
        let b2 = self.dmat(slices, m - 1).mul(&zprev)?;
        let b = b1.hstack(&b2);
        Ok(!kmat::in_span(&b, x)?)
    }
}

// ---------------------------------------------------------------------------
// The u-adic spectral sequence of C⁺
// ---------------------------------------------------------------------------

/// Pages of the u-adic spectral sequence converging to `W⁺`.
/// `pages[r]` maps `(p, q)` to `dim_K E_r^{pq}`; levels `p ∈ [−depth, 0]`
/// are certified exact at every reported page. `einf` is the associated
/// graded of `W⁺` predicted by `homology_plus`, restricted to the same
/// levels.
#[derive(Clone, Debug)]
pub struct UAdicPages {
    pub max_page: i64,
    pub depth: i64,
    pub pages: BTreeMap<i64, BTreeMap<(i64, i64), usize>>,
    pub einf: BTreeMap<(i64, i64), usize>,
    pub ord_zero: bool,
    pub plus_zero: bool,
}

/// E₁ is `H(D, δ₀) ⊗ u^p` in columns `p ≤ 0`; differentials
/// `d_r : E_r^{p,q} → E_r^{p+r, q−r+1}` come from the `u^r δ_r` parts of `d`.
pub fn u_adic_pages(c: &EqChainComplex, max_page: i64) -> Result<UAdicPages> {
    if c.config().t_grading() != 0 {
        return Err(Error::input("u_adic_pages: degreewise slices need t_grading = 0"));
    }
    if max_page < 1 {
        return Err(Error::input("u_adic_pages: max_page must be ≥ 1"));
    }
    let n = c.rank();
    let depth = max_page + 1;
    let s_max = depth + max_page; // truncation; levels ≥ −depth are certified
    for i in 0..n {
        for j in 0..n {
            if let Some(p) = c.d.at(i, j).u_precision {
                if p <= s_max {
                    return Err(Error::precision(alloc::format!(
                        "u_adic_pages: entries must be known to O(u^{}) at least",
                        s_max + 1
                    )));
                }
            }
        }
    }

    // Basis of the truncated C⁺: u^{−s} e_i for 0 ≤ s ≤ s_max, level −s.
    let idx = |s: i64, i: usize| -> usize { (s as usize) * n + i };
    let mut items = Vec::with_capacity(((s_max + 1) as usize) * n);
    for s in 0..=s_max {
        for i in 0..n {
            items.push((-s, c.basis.degree(i) - 2 * s));
        }
    }
    let mut dcols = vec![Vec::new(); items.len()];
    for s in 0..=s_max {
        for j in 0..n {
            let col = &mut dcols[idx(s, j)];
            for i in 0..n {
                for (k, cf) in &c.d.at(i, j).coeffs {
                    if *k <= s && !cf.is_exact_zero() {
                        col.push((idx(s - k, i), cf.clone()));
                    }
                }
            }
        }
    }
    let fc = FilteredKComplex { items, dcols, config: c.config() };
    fc.validate()?;
    let slices = fc.slices();

    let degs = c.basis.degrees();
    let dmin = degs.iter().copied().min().unwrap_or(0);
    let dmax = degs.iter().copied().max().unwrap_or(0);
    let mut pages = BTreeMap::new();
    for r in 1..=max_page {
        let mut page = BTreeMap::new();
        for p in -depth..=0 {
            for m in (dmin + 2 * p)..=(dmax + 2 * p) {
                let dim = fc.page_dim(&slices, r, p, m)?;
                if dim > 0 {
                    page.insert((p, m - p), dim);
                }
            }
        }
        pages.insert(r, page);
    }

    // Predicted associated graded of W⁺ on the same levels.
    let plus = homology_plus(c)?;
    let mut einf = BTreeMap::new();
    for g in &plus.tails {
        for p in -depth..=0 {
            let m = g + 2 * p;
            *einf.entry((p, m - p)).or_insert(0) += 1;
        }
    }
    for (k, tau) in &plus.torsion {
        // generator z in degree tau at level −(k−1); u^j z at level j−k+1
        for j in 0..*k {
            let p = j - k + 1;
            if p >= -depth {
                let m = tau + 2 * j;
                *einf.entry((p, m - p)).or_insert(0) += 1;
            }
        }
    }

    let betti = ordinary_cohomology(c)?;
    Ok(UAdicPages {
        max_page,
        depth,
        pages,
        einf,
        ord_zero: betti.is_empty(),
        plus_zero: plus.is_zero(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{FieldConfig, FieldKind};
    use crate::parse::parse_series;
    use crate::useries::Valuation;

    fn cfg() -> FieldConfig {
        FieldConfig::rational()
    }

    fn mat(c: FieldConfig, rows: &[&[&str]]) -> DVRMatrix {
        let data = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|s| parse_series(s, SeriesKind::Power, &c).unwrap())
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>();
        DVRMatrix::from_rows(data, c).unwrap()
    }

    fn complex(c: FieldConfig, gens: &[(&str, i64)], rows: &[&[&str]]) -> EqChainComplex {
        let basis = GradedBasis::new(
            gens.iter().map(|(n, d)| (String::from(*n), *d)).collect(),
        )
        .unwrap();
        EqChainComplex::new(basis, mat(c, rows)).unwrap()
    }

    /// d(x) = u³y with deg x = 0, deg y = −5.
    fn u_cubed_arrow() -> EqChainComplex {
        complex(cfg(), &[("x", 0), ("y", -5)], &[&["0", "0"], &["u^3", "0"]])
    }

    #[test]
    fn u_cubed_arrow_three_models() {
        let c = u_cubed_arrow();
        let wm = homology_minus(&c).unwrap();
        assert_eq!(wm.free_power, Vec::<i64>::new());
        assert_eq!(wm.torsion, vec![(3, -5)]);
        let wi = homology_infty(&c).unwrap();
        assert!(wi.is_zero());
        let wp = homology_plus(&c).unwrap();
        assert!(wp.tails.is_empty());
        assert_eq!(wp.torsion, vec![(3, -4)]);
        assert_eq!(ordinary_cohomology(&c).unwrap(), vec![-5, 0]);
    }

    #[test]
    fn zero_differential() {
        let c = complex(cfg(), &[("a", 0), ("b", 2)], &[&["0", "0"], &["0", "0"]]);
        let wm = homology_minus(&c).unwrap();
        assert_eq!(wm.free_power, vec![0, 2]);
        assert!(wm.torsion.is_empty());
        assert_eq!(homology_infty(&c).unwrap().free_laurent, vec![0, 2]);
        assert_eq!(homology_plus(&c).unwrap().tails, vec![0, 2]);
        assert_eq!(ordinary_cohomology(&c).unwrap(), vec![0, 2]);
    }

    /// d(y₁) = x₀ + u·x₁: homology is free of
    /// rank 1 on [x₁], and ord W keeps the same single class.
    #[test]
    fn unit_plus_u_column() {
        let c = complex(
            cfg(),
            &[("x0", 0), ("x1", -2), ("y1", -1)],
            &[&["0", "0", "1"], &["0", "0", "u"], &["0", "0", "0"]],
        );
        let wm = homology_minus(&c).unwrap();
        assert_eq!(wm.free_power, vec![-2]);
        assert!(wm.torsion.is_empty());
        assert_eq!(ordinary_cohomology(&c).unwrap(), vec![-2]);
        assert_eq!(homology_plus(&c).unwrap().tails, vec![-2]);
    }

    #[test]
    fn rejects_non_complex() {
        let basis = GradedBasis::new(vec![
            (String::from("a"), 0),
            (String::from("b"), 1),
            (String::from("c"), 2),
        ])
        .unwrap();
        let d = mat(cfg(), &[&["0", "0", "0"], &["1", "0", "0"], &["0", "1", "0"]]);
        let err = EqChainComplex::new(basis, d).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn rejects_inhomogeneous() {
        let basis =
            GradedBasis::new(vec![(String::from("a"), 0), (String::from("b"), 0)]).unwrap();
        let d = mat(cfg(), &[&["0", "0"], &["u", "0"]]);
        assert!(matches!(EqChainComplex::new(basis, d), Err(Error::Input(_))));
    }

    #[test]
    fn les_u_cubed_arrow_and_free() {
        let c = u_cubed_arrow();
        let rep = check_les(&c, (-10, 4)).unwrap();
        assert!(rep.pass, "{:?}", rep);
        let free = complex(cfg(), &[("a", 0), ("b", 3)], &[&["0", "0"], &["0", "0"]]);
        let rep = check_les(&free, (-6, 8)).unwrap();
        assert!(rep.pass, "{:?}", rep);
    }

    #[test]
    fn u_adic_tail_pattern() {
        let c = u_cubed_arrow();
        let pg = u_adic_pages(&c, 4).unwrap();
        // E₁ = H(D, δ₀) ⊗ u^p: classes u^p x at (p, p) and u^p y at (p, p−5).
        let e1 = &pg.pages[&1];
        for p in -pg.depth..=0 {
            assert_eq!(e1.get(&(p, p)), Some(&1));
            assert_eq!(e1.get(&(p, p - 5)), Some(&1));
        }
        // pages 1..3 agree (d₁ = d₂ = 0), then d₃ wipes all y and all x with
        // p ≤ −3; the surviving T₃ pattern is x at p = 0, −1, −2.
        assert_eq!(pg.pages[&2], pg.pages[&1]);
        assert_eq!(pg.pages[&3], pg.pages[&1]);
        let e4 = &pg.pages[&4];
        let expect: BTreeMap<(i64, i64), usize> =
            [((0, 0), 1), ((-1, -1), 1), ((-2, -2), 1)].into_iter().collect();
        assert_eq!(e4, &expect);
        assert!(!pg.ord_zero);
        assert!(!pg.plus_zero);
        // the final page matches the predicted associated graded of W⁺
        assert_eq!(e4, &pg.einf);
    }

    #[test]
    fn u_adic_delta0_only_stable() {
        // d = δ₀ only: E₁ = E₂ = … on every certified level.
        let c = complex(
            cfg(),
            &[("a", 0), ("b", 1)],
            &[&["0", "0"], &["2", "0"]],
        );
        let pg = u_adic_pages(&c, 3).unwrap();
        assert_eq!(pg.pages[&1], pg.pages[&2]);
        assert_eq!(pg.pages[&2], pg.pages[&3]);
        assert!(pg.ord_zero);
        assert!(pg.plus_zero);
        assert!(pg.pages[&1].is_empty());
        let rep = check_les(&c, (-4, 4)).unwrap();
        assert!(rep.pass);
    }

    /// [x0] = −u[x1] in the complex d(y1) = x0 + u·x1: whatever generator
    /// the pipeline picks, the two coordinates satisfy that relation.
    #[test]
    fn class_map_unit_plus_u_column() {
        let c = complex(
            cfg(),
            &[("x0", 0), ("x1", -2), ("y1", -1)],
            &[&["0", "0", "1"], &["0", "0", "u"], &["0", "0", "0"]],
        );
        let chains = mat(cfg(), &[&["1", "0"], &["0", "1"], &["0", "0"]]);
        let (m, shape) = class_map(&c, &chains).unwrap();
        assert_eq!(shape, homology_minus(&c).unwrap());
        assert_eq!((m.rows, m.cols), (1, 2));
        assert_eq!(m.at(0, 0).valuation().unwrap(), Valuation::Finite(1));
        assert_eq!(m.at(0, 1).valuation().unwrap(), Valuation::Finite(0));
        let minus_u = USeries::monomial(SeriesKind::Power, cfg(), FieldElem::from_int(FieldKind::Rational, -1), 1).unwrap();
        let rel = m.at(0, 0).sub(&minus_u.mul(m.at(0, 1)).unwrap()).unwrap();
        assert!(rel.is_exact_zero());
    }

    /// Torsion coordinates live in K[[u]]/u^k: a boundary reduces to zero at
    /// precision O(u^k), a generator keeps valuation 0.
    #[test]
    fn class_map_torsion_reduction() {
        let c = u_cubed_arrow();
        let chains = mat(cfg(), &[&["0", "0"], &["1", "u^3"]]);
        let (m, shape) = class_map(&c, &chains).unwrap();
        assert_eq!(shape.torsion, vec![(3, -5)]);
        assert!(shape.free_power.is_empty());
        assert_eq!(m.at(0, 0).valuation().unwrap(), Valuation::Finite(0));
        assert!(m.at(0, 1).is_zero_at_precision());
        assert!(!m.at(0, 1).is_exact_zero());
        let not_cycle = mat(cfg(), &[&["1"], &["0"]]);
        assert!(matches!(class_map(&c, &not_cycle), Err(Error::Input(_))));
    }

    #[test]
    fn class_map_zero_homology() {
        let c = complex(cfg(), &[("a", 0), ("b", 1)], &[&["0", "0"], &["2", "0"]]);
        let chains = mat(cfg(), &[&["0"], &["1"]]);
        let (m, shape) = class_map(&c, &chains).unwrap();
        assert!(shape.is_zero());
        assert_eq!(m.rows, 0);
    }

    #[test]
    fn torsion_with_free_mix() {
        // d(a) = u²c, b free: W⁻ = T₂(deg −3) ⊕ K[[u]](deg 4)
        let c = complex(
            cfg(),
            &[("a", 0), ("b", 4), ("c", -3)],
            &[&["0", "0", "0"], &["0", "0", "0"], &["u^2", "0", "0"]],
        );
        let wm = homology_minus(&c).unwrap();
        assert_eq!(wm.free_power, vec![4]);
        assert_eq!(wm.torsion, vec![(2, -3)]);
        let wp = homology_plus(&c).unwrap();
        assert_eq!(wp.tails, vec![4]);
        assert_eq!(wp.torsion, vec![(2, -2)]);
        let rep = check_les(&c, (-8, 8)).unwrap();
        assert!(rep.pass, "{:?}", rep);
        let pg = u_adic_pages(&c, 3).unwrap();
        // final page matches the predicted associated graded of W⁺
        assert_eq!(pg.pages[&3], pg.einf);
    }
}
