//! Filtrations induced on a free module `V` by a map `c : V → W`:
//! `F_j = ker(V → W/(T + u^j W))`, their slice series and Young diagrams,
//! the `𝔽`-side filtration on `V⁺`, and the `V⁻ ↔ V⁺` bridge.
//!
//! Everything is driven by the Smith normal form of `c` composed with the
//! projection `W → W/T ≅ K[[u]]^r`: the finite exponents `j_1 ≤ … ≤ j_a`
//! and the kernel rank `b` determine every layer dimension in closed form.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::homology::FGModuleShape;
use crate::smith::{snf_core, DVRMatrix, GradedLabels};
use crate::useries::Valuation;

/// The filtration `F_j^c` on the free source of `c`, presented by its
/// invariants: `d_j = b + #{i : j ≤ j_i}` in terms of the kernel rank `b`
/// and the finite invariant-factor exponents `j_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InducedFiltration {
    /// rank of the source, `a + b`
    pub source_rank: usize,
    /// rank `b` of `c^{-1}(torsion)`
    pub kernel_rank: usize,
    /// `j_1 ≤ … ≤ j_a`, the invariant factors of `c` mod torsion
    pub finite_exponents: Vec<i64>,
    /// degrees of the adapted basis `f_1, …, f_{a+b}` (pivot columns first),
    /// when the grading of source and codomain was supplied
    pub basis_degrees: Option<Vec<i64>>,
    /// rows of `c` that present the free part `W/T` (torsion rows removed)
    pub codomain_free_rows: Vec<usize>,
}

impl InducedFiltration {
    /// `d_j = dim F_j / u F_{j-1}`; constant `a + b` for `j ≤ 0`,
    /// eventually the constant `b`.
    pub fn d(&self, j: i64) -> i64 {
        if j <= 0 {
            return self.source_rank as i64;
        }
        self.kernel_rank as i64
            + self.finite_exponents.iter().filter(|ji| j <= **ji).count() as i64
    }

    /// reduced coefficient `d̃_j = d_j − b`
    pub fn d_reduced(&self, j: i64) -> i64 {
        self.d(j) - self.kernel_rank as i64
    }

    pub fn max_exponent(&self) -> i64 {
        self.finite_exponents.last().copied().unwrap_or(0)
    }
}

fn free_shape(r: usize) -> FGModuleShape {
    FGModuleShape { free_power: vec![0; r], ..FGModuleShape::default() }
}

/// `F_j = ker(V → W/(T + u^j W))` via the SNF of `c` mod torsion. The rows
/// of `c` are indexed by the generators of `W` in shape order: torsion
/// generators first, then the free `K[[u]]`-summands.
pub fn induced_filtration(c: &DVRMatrix, w: &FGModuleShape) -> Result<InducedFiltration> {
    induced_filtration_inner(c, w, None)
}

/// As `induced_filtration`, with degree labels: `source_degrees` for the
/// columns; row degrees are taken from the shape (torsion then free). The
/// whole of `c` is checked to be a homogeneous degree-0 map and the adapted
/// basis degrees are reported.
pub fn induced_filtration_graded(
    c: &DVRMatrix,
    w: &FGModuleShape,
    source_degrees: &[i64],
) -> Result<InducedFiltration> {
    induced_filtration_inner(c, w, Some(source_degrees))
}

fn induced_filtration_inner(
    c: &DVRMatrix,
    w: &FGModuleShape,
    source_degrees: Option<&[i64]>,
) -> Result<InducedFiltration> {
    if !w.free_laurent.is_empty() || !w.tails.is_empty() {
        return Err(Error::input(
            "induced_filtration: codomain must be a K[[u]]-module (free_power + torsion)",
        ));
    }
    let nt = w.torsion.len();
    let nf = w.free_power.len();
    if c.rows != nt + nf {
        return Err(Error::input(format!(
            "induced_filtration: map has {} rows but the shape has {} generators",
            c.rows,
            nt + nf
        )));
    }
    let s = c.cols;
    if let Some(sd) = source_degrees {
        if sd.len() != s {
            return Err(Error::input("induced_filtration: source degree count mismatch"));
        }
        let mut row = Vec::with_capacity(nt + nf);
        row.extend(w.torsion.iter().map(|(_, d)| *d));
        row.extend(w.free_power.iter().copied());
        c.check_homogeneous(&GradedLabels { row, col: sd.to_vec(), map_degree: 0 })?;
    }
    let free_rows: Vec<usize> = (nt..nt + nf).collect();
    let all_cols: Vec<usize> = (0..s).collect();
    let cf = c.submatrix(&free_rows, &all_cols);
    let labels = source_degrees.map(|sd| GradedLabels {
        row: w.free_power.clone(),
        col: sd.to_vec(),
        map_degree: 0,
    });
    let core = snf_core(&cf, labels)?;
    let a = core.rank();
    let finite_exponents: Vec<i64> = core.pivots.iter().map(|(j, _)| *j).collect();
    if finite_exponents.iter().any(|j| *j < 0) {
        return Err(Error::internal("negative invariant factor exponent"));
    }
    let basis_degrees = core.labels.as_ref().map(|l| l.col.clone());
    Ok(InducedFiltration {
        source_rank: s,
        kernel_rank: s - a,
        finite_exponents,
        basis_degrees,
        codomain_free_rows: free_rows,
    })
}

// ---------------------------------------------------------------------------
// Slice series, polynomials, Young diagrams
// ---------------------------------------------------------------------------

/// The slice series `s(t) = Σ d_j t^j`: an explicit prefix, then the
/// eventual constant `b` (so `s` is a polynomial iff `b = 0`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceSeries {
    pub prefix: Vec<i64>,
    pub tail: i64,
}

impl SliceSeries {
    pub fn coeff(&self, j: i64) -> i64 {
        if j < 0 {
            self.prefix.first().copied().unwrap_or(self.tail)
        } else if (j as usize) < self.prefix.len() {
            self.prefix[j as usize]
        } else {
            self.tail
        }
    }
}

fn fmt_tpoly(coeffs: &[i64], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mut any = false;
    for (j, c) in coeffs.iter().enumerate() {
        if *c == 0 {
            continue;
        }
        if any {
            write!(f, " + ")?;
        }
        any = true;
        match (j, c) {
            (0, c) => write!(f, "{}", c)?,
            (1, 1) => write!(f, "t")?,
            (1, c) => write!(f, "{}t", c)?,
            (j, 1) => write!(f, "t^{}", j)?,
            (j, c) => write!(f, "{}t^{}", c, j)?,
        }
    }
    if !any {
        write!(f, "0")?;
    }
    Ok(())
}

impl fmt::Display for SliceSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let has_poly = self.prefix.iter().any(|c| *c != 0);
        if has_poly || self.tail == 0 {
            fmt_tpoly(&self.prefix, f)?;
        }
        // eventual constant: an explicit tail marker b*(t^n + ...)
        if self.tail != 0 {
            if has_poly {
                write!(f, " + ")?;
            }
            if self.tail != 1 {
                write!(f, "{}*", self.tail)?;
            }
            match self.prefix.len() {
                0 => write!(f, "(1 + t + ...)")?,
                1 => write!(f, "(t + ...)")?,
                n => write!(f, "(t^{} + ...)", n)?,
            }
        }
        Ok(())
    }
}

/// The slice series `s(t) = Σ d_j t^j`: `d_0 = a + b`, then `d_j`
/// decreasing down to the eventual constant `b`.
pub fn slice_series(fil: &InducedFiltration) -> SliceSeries {
    let n = fil.max_exponent();
    let prefix: Vec<i64> = (0..=n).map(|j| fil.d(j)).collect();
    // trim trailing coefficients already equal to the tail
    let tail = fil.kernel_rank as i64;
    let mut prefix = prefix;
    while prefix.last() == Some(&tail) {
        prefix.pop();
    }
    SliceSeries { prefix, tail }
}

/// Reduced slice polynomial `s̃(t) = Σ (d_j − b) t^j`, subtracting the
/// kernel contribution; equal to the slice series when `c` is injective.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedSlice {
    pub coeffs: Vec<i64>,
}

impl fmt::Display for ReducedSlice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_tpoly(&self.coeffs, f)
    }
}

pub fn reduced_slice(fil: &InducedFiltration) -> ReducedSlice {
    let n = fil.max_exponent();
    let mut coeffs: Vec<i64> = (0..=n).map(|j| fil.d_reduced(j)).collect();
    while coeffs.last() == Some(&0) {
        coeffs.pop();
    }
    ReducedSlice { coeffs }
}

/// `f(t) = Σ f_j t^j` with `f_j = d̃_j − d̃_{j+1} = #{invariant factors u^j}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiltrationPolynomial {
    pub coeffs: Vec<i64>,
}

impl fmt::Display for FiltrationPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_tpoly(&self.coeffs, f)
    }
}

pub fn filtration_polynomial(fil: &InducedFiltration) -> FiltrationPolynomial {
    let n = fil.max_exponent();
    let coeffs: Vec<i64> = (0..=n).map(|j| fil.d_reduced(j) - fil.d_reduced(j + 1)).collect();
    FiltrationPolynomial { coeffs }
}

/// Young diagram of the exponents (rows `j_i` in nonincreasing order, empty
/// rows dropped) and its conjugate (rows `d̃_1, d̃_2, …`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct YoungDiagramPair {
    pub shape: Vec<i64>,
    pub dual_shape: Vec<i64>,
}

impl YoungDiagramPair {
    pub fn ascii(rows: &[i64]) -> String {
        let mut s = String::new();
        for (i, r) in rows.iter().enumerate() {
            if i > 0 {
                s.push('\n');
            }
            for _ in 0..*r {
                s.push('#');
            }
        }
        s
    }
}

pub fn young_diagrams(fil: &InducedFiltration) -> Result<YoungDiagramPair> {
    if fil.kernel_rank > 0 {
        return Err(Error::input(
            "young_diagrams: kernel rank > 0 would need infinite diagrams",
        ));
    }
    let mut shape: Vec<i64> = fil.finite_exponents.iter().copied().filter(|j| *j > 0).collect();
    shape.sort_unstable_by(|x, y| y.cmp(x));
    let n = fil.max_exponent();
    let mut dual_shape: Vec<i64> = (1..=n).map(|j| fil.d_reduced(j)).collect();
    while dual_shape.last() == Some(&0) {
        dual_shape.pop();
    }
    // conjugacy: column i of `shape` has height #{rows ≥ i+1} = d̃_{i+1}
    for (i, d) in dual_shape.iter().enumerate() {
        let col = shape.iter().filter(|r| **r > i as i64).count() as i64;
        if col != *d {
            return Err(Error::internal("Young diagrams are not conjugate"));
        }
    }
    if shape.first().copied().unwrap_or(0) != dual_shape.len() as i64 {
        return Err(Error::internal("Young diagrams are not conjugate"));
    }
    Ok(YoungDiagramPair { shape, dual_shape })
}

/// One row of the filtration table across the three models, on the source
/// (`V`) and target (`W`) side. Exponent entries describe `u^e K[[u]]`
/// summands; plus-side layers are finite-dimensional over `K` (each kernel
/// summand adds a full copy of `𝔽` on the `V`-side, reported separately on
/// the filtration).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilTableRow {
    pub j: i64,
    /// per-summand exponent of `F_{j-1}(V⁻)`: `(j - 1 - j_i)⁺`
    pub v_minus: Vec<i64>,
    /// per-summand exponent of `F_j(V^∞)`: `j - j_i`
    pub v_infty: Vec<i64>,
    /// `dim_K F_j(V⁺) = Σ (j_i - j + 1)⁺`
    pub v_plus_dim: i64,
    /// exponent of `F_{j-1}(W⁻)` on each free target summand: `(j - 1)⁺`
    pub w_minus: i64,
    /// exponent of `F_j(W^∞)` on each free target summand: `j`
    pub w_infty: i64,
    /// `dim_K F_j(W⁺) = r·(1 - j)⁺` over the `r` free target summands
    pub w_plus_dim: i64,
}

/// The filtration layers of source and target in all three models over a
/// window of `j`, read off the invariant factors of `c`.
pub fn filtration_table(
    fil: &InducedFiltration,
    jmin: i64,
    jmax: i64,
) -> Result<Vec<FilTableRow>> {
    if jmin > jmax {
        return Err(Error::input("filtration_table: empty j window"));
    }
    let r = fil.codomain_free_rows.len() as i64;
    let mut rows = Vec::with_capacity((jmax - jmin + 1) as usize);
    for j in jmin..=jmax {
        let v_minus: Vec<i64> =
            fil.finite_exponents.iter().map(|ji| (j - 1 - ji).max(0)).collect();
        let v_infty: Vec<i64> = fil.finite_exponents.iter().map(|ji| j - ji).collect();
        let layer = plus_layer(fil, j);
        rows.push(FilTableRow {
            j,
            v_minus,
            v_infty,
            v_plus_dim: layer.finite_dim,
            w_minus: (j - 1).max(0),
            w_infty: j,
            w_plus_dim: r * (1 - j).max(0),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Valuations
// ---------------------------------------------------------------------------

/// `val(v) = max{j : c(v) is u^j-divisible modulo torsion}`;
/// `∞` iff `v ∈ c^{-1}(T)`. Fails rather than guess when the precision
/// cannot certify the minimum coordinate valuation.
pub fn valuation_of(
    v: &DVRMatrix,
    fil: &InducedFiltration,
    c: &DVRMatrix,
) -> Result<Valuation> {
    if v.cols != 1 || v.rows != c.cols {
        return Err(Error::input("valuation_of: v must be a column vector in the source"));
    }
    let y = c.mul(v)?;
    let mut min_finite: Option<i64> = None;
    let mut min_unknown: Option<i64> = None;
    for &r in &fil.codomain_free_rows {
        match y.at(r, 0).valuation()? {
            Valuation::Finite(k) => {
                min_finite = Some(min_finite.map_or(k, |m| m.min(k)));
            }
            Valuation::AtLeast(n) => {
                min_unknown = Some(min_unknown.map_or(n, |m| m.min(n)));
            }
            Valuation::Infinity => {}
        }
    }
    match (min_finite, min_unknown) {
        (Some(m), Some(n)) if n < m => Err(Error::precision(format!(
            "valuation_of: a coordinate is only known to O(u^{}), cannot certify val = {}",
            n, m
        ))),
        (Some(m), _) => Ok(Valuation::Finite(m)),
        (None, Some(n)) => Err(Error::precision(format!(
            "valuation_of: c(v) vanishes to O(u^{}) but not exactly; cannot certify ∞",
            n
        ))),
        (None, None) => Ok(Valuation::Infinity),
    }
}

// ---------------------------------------------------------------------------
// The 𝔽-side filtration on V⁺
// ---------------------------------------------------------------------------

/// One layer `F_j(V⁺)`: per finite summand `u^{j_i}` the slice
/// `span{u^e : j − j_i ≤ e ≤ 0}` of dimension `max(j_i − j + 1, 0)`;
/// each kernel summand contributes a full copy of `𝔽`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlusFiltration {
    pub j: i64,
    /// `max(j_i − j + 1, 0)` per finite exponent, in exponent order
    pub summand_dims: Vec<i64>,
    pub finite_dim: i64,
    /// number of kernel summands (each an infinite-dimensional 𝔽)
    pub infinite_rank: usize,
}

/// The plus-side layer: `F_{j≤0} = ker(u^{|j|+1}[c_u])`,
/// `F_{j≥1} = u^{j−1} ker[c_u]`, both read off the SNF data.
pub fn plus_layer(fil: &InducedFiltration, j: i64) -> PlusFiltration {
    let summand_dims: Vec<i64> =
        fil.finite_exponents.iter().map(|ji| (ji - j + 1).max(0)).collect();
    let finite_dim = summand_dims.iter().sum();
    PlusFiltration { j, summand_dims, finite_dim, infinite_rank: fil.kernel_rank }
}

/// `plus_layer` for a map into a free codomain.
pub fn plus_filtration(c: &DVRMatrix, j: i64) -> Result<PlusFiltration> {
    let fil = induced_filtration(c, &free_shape(c.rows))?;
    Ok(plus_layer(&fil, j))
}

// ---------------------------------------------------------------------------
// The SES of filtrations across the three models
// ---------------------------------------------------------------------------

/// Dimension bookkeeping for `0 → F_{j−1}(V⁻) →u F_j(V^∞) → F_j(V⁺) → 0`
/// at one value of `j`: per finite summand, the dimension of
/// `F_j(V^∞) / u·F_{j−1}(V⁻)` against the `V⁺`-layer dimension.
#[derive(Clone, Debug)]
pub struct SesRow {
    pub j: i64,
    pub quotient_dims: Vec<i64>,
    pub plus_dims: Vec<i64>,
    pub infinite_rank: usize,
    pub exact: bool,
}

#[derive(Clone, Debug)]
pub struct SesReport {
    pub rows: Vec<SesRow>,
    pub all_exact: bool,
}

pub fn ses_of_filtrations_from(fil: &InducedFiltration, jmin: i64, jmax: i64) -> SesReport {
    let mut rows = Vec::new();
    let mut all = true;
    for j in jmin..=jmax {
        // per summand: F_j(V^∞) = u^{j−j_i}K[[u]], u F_{j−1}(V⁻) = u^{1+(j−1−j_i)⁺}K[[u]]
        let quotient_dims: Vec<i64> = fil
            .finite_exponents
            .iter()
            .map(|ji| 1 + (j - 1 - ji).max(0) - (j - ji))
            .collect();
        let layer = plus_layer(fil, j);
        let exact = quotient_dims == layer.summand_dims
            && layer.infinite_rank == fil.kernel_rank;
        all &= exact;
        rows.push(SesRow {
            j,
            quotient_dims,
            plus_dims: layer.summand_dims,
            infinite_rank: layer.infinite_rank,
            exact,
        });
    }
    SesReport { rows, all_exact: all }
}

pub fn ses_of_filtrations(c: &DVRMatrix, jmin: i64, jmax: i64) -> Result<SesReport> {
    let fil = induced_filtration(c, &free_shape(c.rows))?;
    Ok(ses_of_filtrations_from(&fil, jmin, jmax))
}

// ---------------------------------------------------------------------------
// The V⁻ ↔ V⁺ bridge
// ---------------------------------------------------------------------------

/// Dimensions of the two sides of `v ↦ [u^{m−1−j}v]`:
/// `F_{j+1}(V⁻)/(u^{j+1}V + ker)` of dimension `Σ min(j_i, j+1)`, mapping
/// onto `𝓔_m ∩ 𝔽_{j−m+1}` (mod the kernel tails `K⁺ ≅ 𝔽^b`) of dimension
/// `Σ max(min(j_i, j+1) − (m−1), 0)`; an isomorphism for `m = 1`.
#[derive(Clone, Debug)]
pub struct BridgeReport {
    pub j: i64,
    pub m: i64,
    /// `dim F_{j+1}/(u^{j+1}V + ker c)`
    pub lhs_dim: i64,
    /// the same via the reduced slice sums: `d̃_1 + … + d̃_{j+1}`
    pub lhs_via_sums: i64,
    /// `dim (𝓔_m ∩ 𝔽_{j−m+1}) mod K⁺`
    pub rhs_dim: i64,
    /// kernel of the shift map on the left side, `Σ min(m−1, min(j_i, j+1))`
    pub shift_kernel_dim: i64,
    pub iso: bool,
    pub stab_bound: i64,
    pub stabilized: bool,
    pub kernel_rank: usize,
}

pub fn minus_plus_bridge_from(fil: &InducedFiltration, j: i64, m: i64) -> Result<BridgeReport> {
    if m < 1 {
        return Err(Error::input("minus_plus_bridge: m must be ≥ 1"));
    }
    let lhs_dim: i64 = fil.finite_exponents.iter().map(|ji| (*ji).min(j + 1)).sum();
    let lhs_via_sums: i64 = (1..=j + 1).map(|l| fil.d_reduced(l)).sum();
    let rhs_dim: i64 = fil
        .finite_exponents
        .iter()
        .map(|ji| ((*ji).min(j + 1) - (m - 1)).max(0))
        .sum();
    let shift_kernel_dim: i64 = fil
        .finite_exponents
        .iter()
        .map(|ji| (m - 1).min((*ji).min(j + 1)))
        .sum();
    if lhs_dim != lhs_via_sums {
        return Err(Error::internal("bridge: reduced slice sums disagree with exponents"));
    }
    if rhs_dim + shift_kernel_dim != lhs_dim {
        return Err(Error::internal("bridge: rank-nullity mismatch on the shift map"));
    }
    let stab_bound = fil.max_exponent();
    Ok(BridgeReport {
        j,
        m,
        lhs_dim,
        lhs_via_sums,
        rhs_dim,
        shift_kernel_dim,
        iso: m == 1 && rhs_dim == lhs_dim,
        stab_bound,
        stabilized: j >= stab_bound,
        kernel_rank: fil.kernel_rank,
    })
}

pub fn minus_plus_bridge(c: &DVRMatrix, j: i64, m: i64) -> Result<BridgeReport> {
    let fil = induced_filtration(c, &free_shape(c.rows))?;
    minus_plus_bridge_from(&fil, j, m)
}

// ---------------------------------------------------------------------------
// Slice-sum identities
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SliceSumReport {
    /// `Σ_{j≥1} d̃_j` against `Σ_i j_i`
    pub sum_reduced: i64,
    pub sum_exponents: i64,
    pub exponent_sum_ok: bool,
    /// `(j, dim F_j/u^jV, d_1 + … + d_j)` for j up to max exponent + 2
    pub layer_sum_rows: Vec<(i64, i64, i64)>,
    pub layer_sums_ok: bool,
    /// `(dim 𝓔₁, Σ_{j≥1} d̃_j)` when `b = 0`, else skipped
    pub page_one_pair: Option<(i64, i64)>,
    pub all_ok: bool,
}

pub fn slice_sum_identities(fil: &InducedFiltration) -> SliceSumReport {
    let n = fil.max_exponent();
    let sum_reduced: i64 = (1..=n).map(|j| fil.d_reduced(j)).sum();
    let sum_exponents: i64 = fil.finite_exponents.iter().sum();
    let exponent_sum_ok = sum_reduced == sum_exponents;

    let b = fil.kernel_rank as i64;
    let mut layer_sum_rows = Vec::new();
    let mut layer_sums_ok = true;
    for j in 1..=n + 2 {
        // dim F_j/u^jV = Σ_i min(j_i, j) + b·j, against d_1 + … + d_j
        let lhs: i64 =
            fil.finite_exponents.iter().map(|ji| (*ji).min(j)).sum::<i64>() + b * j;
        let rhs: i64 = (1..=j).map(|l| fil.d(l)).sum();
        layer_sums_ok &= lhs == rhs;
        layer_sum_rows.push((j, lhs, rhs));
    }

    let page_one_pair = if fil.kernel_rank == 0 {
        // dim 𝓔₁ = dim ker[c_u] = Σ_i j_i
        let e1 = plus_layer(fil, 1).finite_dim;
        Some((e1, sum_reduced))
    } else {
        None
    };
    let page_one_ok = page_one_pair.map_or(true, |(e1, s)| e1 == s);
    SliceSumReport {
        sum_reduced,
        sum_exponents,
        exponent_sum_ok,
        layer_sum_rows,
        layer_sums_ok,
        page_one_pair,
        all_ok: exponent_sum_ok && layer_sums_ok && page_one_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::FieldConfig;
    use crate::parse::parse_series;
    use crate::useries::SeriesKind;

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

    fn diag_134() -> DVRMatrix {
        mat(cfg(), &[&["u", "0", "0"], &["0", "u^3", "0"], &["0", "0", "u^4"]])
    }

    #[test]
    fn diag_slice_series_and_diagrams() {
        let c = diag_134();
        let f = induced_filtration(&c, &free_shape(3)).unwrap();
        assert_eq!(f.finite_exponents, vec![1, 3, 4]);
        assert_eq!(f.kernel_rank, 0);
        let s = slice_series(&f);
        assert_eq!(s.prefix, vec![3, 3, 2, 2, 1]);
        assert_eq!(s.tail, 0);
        assert_eq!(format!("{}", s), "3 + 3t + 2t^2 + 2t^3 + t^4");
        let fp = filtration_polynomial(&f);
        assert_eq!(format!("{}", fp), "t + t^3 + t^4");
        let y = young_diagrams(&f).unwrap();
        assert_eq!(y.shape, vec![4, 3, 1]);
        assert_eq!(y.dual_shape, vec![3, 2, 2, 1]);
        assert_eq!(YoungDiagramPair::ascii(&y.shape), "####\n###\n#");
        let rep = slice_sum_identities(&f);
        assert_eq!(rep.sum_reduced, 8);
        assert_eq!(rep.sum_exponents, 8);
        assert!(rep.all_ok);
    }

    #[test]
    fn u_cubed_layers_and_shift() {
        let c = mat(cfg(), &[&["u^3"]]);
        let f = induced_filtration(&c, &free_shape(1)).unwrap();
        assert_eq!(f.finite_exponents, vec![3]);
        let s = slice_series(&f);
        assert_eq!(format!("{}", s), "1 + t + t^2 + t^3");
        // layers: dim F_j(V⁺) = max(4 − j, 0) capped at j ≤ 0 … j = 3
        for (j, want) in [(-1, 5), (0, 4), (1, 3), (2, 2), (3, 1), (4, 0), (5, 0)] {
            let layer = plus_filtration(&c, j).unwrap();
            assert_eq!(layer.finite_dim, want, "j = {}", j);
            assert_eq!(layer.infinite_rank, 0);
        }
        // u·E_j = E_{j+1} on dimensions
        for j in -3..5 {
            let a = plus_filtration(&c, j).unwrap().finite_dim;
            let b = plus_filtration(&c, j + 1).unwrap().finite_dim;
            assert_eq!((a - 1).max(0), b);
        }
        let ses = ses_of_filtrations(&c, -4, 8).unwrap();
        assert!(ses.all_exact);
        let bridge = minus_plus_bridge(&c, 3, 1).unwrap();
        assert_eq!(bridge.lhs_dim, 3);
        assert_eq!(bridge.rhs_dim, 3);
        assert!(bridge.iso);
        assert!(bridge.stabilized);
        let b2 = minus_plus_bridge(&c, 3, 2).unwrap();
        assert_eq!(b2.rhs_dim, 2);
        assert_eq!(b2.shift_kernel_dim, 1);
    }

    #[test]
    fn u_cubed_three_model_table() {
        // the three regimes j <= 0, 1 <= j <= 3, j > 3 on both sides
        let c = mat(cfg(), &[&["u^3"]]);
        let f = induced_filtration(&c, &free_shape(1)).unwrap();
        let rows = filtration_table(&f, -1, 5).unwrap();
        let expect = [
            // j, v_minus, v_infty, dim V+, w_minus, w_infty, dim W+
            (-1, 0, -4, 5, 0, -1, 2),
            (0, 0, -3, 4, 0, 0, 1),
            (1, 0, -2, 3, 0, 1, 0),
            (2, 0, -1, 2, 1, 2, 0),
            (3, 0, 0, 1, 2, 3, 0),
            (4, 0, 1, 0, 3, 4, 0),
            (5, 1, 2, 0, 4, 5, 0),
        ];
        for (row, (j, vm, vi, vp, wm, wi, wp)) in rows.iter().zip(expect.iter()) {
            assert_eq!(row.j, *j);
            assert_eq!(row.v_minus, vec![*vm], "j = {}", j);
            assert_eq!(row.v_infty, vec![*vi], "j = {}", j);
            assert_eq!(row.v_plus_dim, *vp, "j = {}", j);
            assert_eq!(row.w_minus, *wm, "j = {}", j);
            assert_eq!(row.w_infty, *wi, "j = {}", j);
            assert_eq!(row.w_plus_dim, *wp, "j = {}", j);
        }
        assert!(filtration_table(&f, 2, 1).is_err());
    }

    #[test]
    fn identity_map() {
        let c = mat(cfg(), &[&["1", "0"], &["0", "1"]]);
        let f = induced_filtration(&c, &free_shape(2)).unwrap();
        assert_eq!(f.finite_exponents, vec![0, 0]);
        assert_eq!(f.kernel_rank, 0);
        assert_eq!(format!("{}", slice_series(&f)), "2");
        let y = young_diagrams(&f).unwrap();
        assert!(y.shape.is_empty());
        assert!(y.dual_shape.is_empty());
        for j in 1..4 {
            assert_eq!(plus_filtration(&c, j).unwrap().finite_dim, 0);
        }
        let rep = slice_sum_identities(&f);
        assert!(rep.all_ok);
        assert_eq!(rep.page_one_pair, Some((0, 0)));
    }

    #[test]
    fn zero_map_degenerate() {
        let c = DVRMatrix::zero(2, 2, cfg());
        let f = induced_filtration(&c, &free_shape(2)).unwrap();
        assert_eq!(f.kernel_rank, 2);
        assert!(f.finite_exponents.is_empty());
        let s = slice_series(&f);
        assert_eq!(s.tail, 2);
        assert!(s.prefix.is_empty());
        assert_eq!(format!("{}", s), "2*(1 + t + ...)");
        assert!(young_diagrams(&f).is_err());
        assert_eq!(format!("{}", reduced_slice(&f)), "0");
        let layer = plus_layer(&f, 0);
        assert_eq!(layer.finite_dim, 0);
        assert_eq!(layer.infinite_rank, 2);
    }

    #[test]
    fn mixed_kernel_and_exponent() {
        // rank-2 source, b = 1, j_1 = 2: reduced slice 1 + t + t²
        let c = mat(cfg(), &[&["u^2", "0"]]);
        let f = induced_filtration(&c, &free_shape(1)).unwrap();
        assert_eq!(f.finite_exponents, vec![2]);
        assert_eq!(f.kernel_rank, 1);
        assert_eq!(format!("{}", reduced_slice(&f)), "1 + t + t^2");
        assert_eq!(format!("{}", slice_series(&f)), "2 + 2t + 2t^2 + (t^3 + ...)");
        let rep = slice_sum_identities(&f);
        assert!(rep.all_ok);
        assert!(rep.page_one_pair.is_none());
        let b = minus_plus_bridge(&c, 4, 1).unwrap();
        assert_eq!(b.lhs_dim, 2);
        assert_eq!(b.kernel_rank, 1);
    }

    #[test]
    fn torsion_codomain_rows() {
        // W = T_2 ⊕ K[[u]]: first row is the torsion generator and is ignored
        let w = FGModuleShape {
            free_power: vec![0],
            torsion: vec![(2, 0)],
            ..FGModuleShape::default()
        };
        let c = mat(cfg(), &[&["1", "1"], &["0", "u^2"]]);
        let f = induced_filtration(&c, &w).unwrap();
        assert_eq!(f.finite_exponents, vec![2]);
        assert_eq!(f.kernel_rank, 1);
        assert_eq!(f.codomain_free_rows, vec![1]);
        // v = e_1 lands in the torsion: val = ∞; v = e_2 has val 2
        let v1 = mat(cfg(), &[&["1"], &["0"]]);
        let v2 = mat(cfg(), &[&["0"], &["1"]]);
        assert_eq!(valuation_of(&v1, &f, &c).unwrap(), Valuation::Infinity);
        assert_eq!(valuation_of(&v2, &f, &c).unwrap(), Valuation::Finite(2));
    }

    #[test]
    fn valuation_precision_guard() {
        let c = mat(cfg(), &[&["u^2 + O(u^5)"]]);
        let f = induced_filtration(&c, &free_shape(1)).unwrap();
        let v = mat(cfg(), &[&["1"]]);
        assert_eq!(valuation_of(&v, &f, &c).unwrap(), Valuation::Finite(2));
        let cz = mat(cfg(), &[&["0 + O(u^4)"]]);
        // same filtration shape irrelevant; the product is indeterminate
        assert!(valuation_of(&v, &f, &cz).is_err());
    }

    #[test]
    fn graded_basis_degrees() {
        // c = diag(u, u^3): source degrees chosen so c is degree-0
        let c = mat(cfg(), &[&["u", "0"], &["0", "u^3"]]);
        let w = FGModuleShape { free_power: vec![0, -2], ..FGModuleShape::default() };
        let f = induced_filtration_graded(&c, &w, &[2, 4]).unwrap();
        assert_eq!(f.finite_exponents, vec![1, 3]);
        assert_eq!(f.basis_degrees, Some(vec![2, 4]));
    }

    #[test]
    fn functoriality_under_automorphism() {
        // postcompose diag(u, u^3, u^4) with a unimodular map: same invariants
        let c = diag_134();
        let g = mat(
            cfg(),
            &[&["1", "u", "0"], &["0", "1", "u^2"], &["0", "0", "1"]],
        );
        let gc = g.mul(&c).unwrap();
        let f1 = induced_filtration(&c, &free_shape(3)).unwrap();
        let f2 = induced_filtration(&gc, &free_shape(3)).unwrap();
        assert_eq!(f1.finite_exponents, f2.finite_exponents);
        assert_eq!(slice_series(&f1), slice_series(&f2));
    }
}
