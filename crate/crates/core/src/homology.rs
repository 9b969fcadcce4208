//! Handle decompositions, relative homology from Morse indices, and an
//! integer chain-complex homology engine.
//!
//! The Morse side never computes anything beyond counting: a handle of index
//! `k` contributes one copy of `Z` to `H_k(Φ, ∂Φ)`. The chain-complex side
//! works over `Z` with exact big-integer Smith normal form and is what the
//! mesh oracle feeds.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sphcrit::CriticalPoint;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HomologyError {
    #[error("boundary matrix D_{degree} has shape {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    Shape {
        degree: usize,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("D_{lower} * D_{upper} is not zero")]
    NotAComplex { lower: usize, upper: usize },
    #[error("critical point without a Morse index (degenerate)")]
    DegeneratePoint,
}

/// Report flags. Serialized in snake case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Caveat {
    /// A handle of index 0 was present; its rank in degree 0 is an extrapolation.
    IndexZeroExtrapolation,
    GreatCircleViolation,
    /// Critical-point enumeration is not exhaustive in this dimension.
    CompletenessHeuristic,
    EmptyPositiveFibre,
    MorseValidationFailed,
    MilnorRadiusCheckFailed,
    NonIsolatedSingularity,
    OracleDisagrees,
    /// The mesh oracle only covers two and three variables.
    OracleUnavailable,
}

impl Caveat {
    /// Caveats that turn a successful run into exit code 2.
    pub fn is_hypothesis_caveat(self) -> bool {
        !matches!(
            self,
            Caveat::CompletenessHeuristic | Caveat::OracleUnavailable
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandleSource {
    pub index: usize,
    pub location: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandleDecomposition {
    /// Morse indices in ascending order.
    pub indices: Vec<usize>,
    pub m: usize,
    pub provenance: Vec<HandleSource>,
}

impl HandleDecomposition {
    /// Human-readable form such as `∂Φ ∪ D^1 ∪ D^2`.
    pub fn describe(&self) -> String {
        let mut s = String::from("∂Φ");
        for k in &self.indices {
            s.push_str(&format!(" ∪ D^{k}"));
        }
        s
    }
}

pub fn handle_decomposition(
    points: &[CriticalPoint],
) -> Result<HandleDecomposition, HomologyError> {
    let mut provenance = points
        .iter()
        .map(|p| {
            p.morse_index
                .map(|index| HandleSource {
                    index,
                    location: p.location.clone(),
                    value: p.value,
                })
                .ok_or(HomologyError::DegeneratePoint)
        })
        .collect::<Result<Vec<_>, _>>()?;
    provenance.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut indices: Vec<usize> = provenance.iter().map(|h| h.index).collect();
    indices.sort_unstable();
    Ok(HandleDecomposition {
        m: indices.len(),
        indices,
        provenance,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorsionFactor {
    pub degree: usize,
    /// Invariant factor greater than one, in decimal.
    pub order: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyReport {
    /// Nonzero ranks only, keyed by degree.
    pub ranks: BTreeMap<usize, usize>,
    pub torsion: Vec<TorsionFactor>,
    pub euler_rel: i64,
    pub caveats: Vec<Caveat>,
    /// Degrees whose rank is not backed by the handle formula.
    pub extrapolated_degrees: Vec<usize>,
}

impl HomologyReport {
    pub fn rank(&self, k: usize) -> usize {
        self.ranks.get(&k).copied().unwrap_or(0)
    }

    /// `Σ (-1)^k rank_k`.
    pub fn alternating_rank_sum(&self) -> i64 {
        self.ranks
            .iter()
            .map(|(&k, &r)| if k % 2 == 0 { r as i64 } else { -(r as i64) })
            .sum()
    }

    pub fn add_caveat(&mut self, c: Caveat) {
        if !self.caveats.contains(&c) {
            self.caveats.push(c);
            self.caveats.sort();
        }
    }
}

impl fmt::Display for HomologyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let top = self
            .ranks
            .keys()
            .chain(self.torsion.iter().map(|t| &t.degree))
            .max();
        let Some(&top) = top else {
            return writeln!(f, "  all relative homology groups vanish");
        };
        for k in 0..=top {
            let mut parts = Vec::new();
            match self.rank(k) {
                0 => {}
                1 => parts.push("Z".to_string()),
                r => parts.push(format!("Z^{r}")),
            }
            for t in self.torsion.iter().filter(|t| t.degree == k) {
                parts.push(format!("Z/{}", t.order));
            }
            let group = if parts.is_empty() {
                "0".into()
            } else {
                parts.join(" ⊕ ")
            };
            let mark = if self.extrapolated_degrees.contains(&k) {
                "  (extrapolated)"
            } else {
                ""
            };
            writeln!(f, "  H_{k}(Φ, ∂Φ; Z) = {group}{mark}")?;
        }
        Ok(())
    }
}

pub fn euler_rel(h: &HandleDecomposition) -> i64 {
    h.indices
        .iter()
        .map(|&k| if k % 2 == 0 { 1 } else { -1 })
        .sum()
}

/// Ranks of `H_*(Φ, ∂Φ; Z)` from the Morse indices of the handles.
pub fn relative_homology(h: &HandleDecomposition) -> HomologyReport {
    let mut ranks = BTreeMap::new();
    for &k in &h.indices {
        *ranks.entry(k).or_insert(0) += 1;
    }
    let mut report = HomologyReport {
        ranks,
        torsion: Vec::new(),
        euler_rel: euler_rel(h),
        caveats: Vec::new(),
        extrapolated_degrees: Vec::new(),
    };
    if h.indices.contains(&0) {
        report.add_caveat(Caveat::IndexZeroExtrapolation);
        report.extrapolated_degrees.push(0);
    }
    report
}

/// Dense integer matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = BigInt::from(v);
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)].is_zero()))
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.rows {
                self.data.swap(i * self.cols + a, i * self.cols + b);
            }
        }
    }

    /// row `dst` += q * row `src`
    fn add_row(&mut self, dst: usize, src: usize, q: &BigInt) {
        for j in 0..self.cols {
            let v = &self[(src, j)] * q;
            if !v.is_zero() {
                self[(dst, j)] += v;
            }
        }
    }

    /// col `dst` += q * col `src`
    fn add_col(&mut self, dst: usize, src: usize, q: &BigInt) {
        for i in 0..self.rows {
            let v = &self[(i, src)] * q;
            if !v.is_zero() {
                self[(i, dst)] += v;
            }
        }
    }

    fn negate_row(&mut self, r: usize) {
        for j in 0..self.cols {
            let v = -&self[(r, j)];
            self[(r, j)] = v;
        }
    }

    fn negate_col(&mut self, c: usize) {
        for i in 0..self.rows {
            let v = -&self[(i, c)];
            self[(i, c)] = v;
        }
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

/// `u * a * v = d`, with the inverses of `u` and `v` tracked alongside.
#[derive(Debug, Clone)]
pub struct SmithForm {
    pub u: IntMatrix,
    pub d: IntMatrix,
    pub v: IntMatrix,
    pub u_inv: IntMatrix,
    pub v_inv: IntMatrix,
}

impl SmithForm {
    /// Nonzero diagonal entries of `d`.
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        (0..self.d.rows.min(self.d.cols))
            .map(|i| self.d[(i, i)].clone())
            .filter(|x| !x.is_zero())
            .collect()
    }
}

/// Smith normal form with unimodular transforms.
///
/// Pivots on the smallest nonzero entry of the trailing block to keep
/// coefficient growth down.
pub fn smith_normal_form(a: &IntMatrix) -> SmithForm {
    let (r, c) = (a.rows, a.cols);
    let mut d = a.clone();
    let mut u = IntMatrix::identity(r);
    let mut u_inv = IntMatrix::identity(r);
    let mut v = IntMatrix::identity(c);
    let mut v_inv = IntMatrix::identity(c);

    // Row op "row dst += q row src" on d and u; inverse as a column op on u_inv.
    let row_op =
        |d: &mut IntMatrix, u: &mut IntMatrix, u_inv: &mut IntMatrix, dst, src, q: &BigInt| {
            d.add_row(dst, src, q);
            u.add_row(dst, src, q);
            u_inv.add_col(src, dst, &-q);
        };
    let col_op =
        |d: &mut IntMatrix, v: &mut IntMatrix, v_inv: &mut IntMatrix, dst, src, q: &BigInt| {
            d.add_col(dst, src, q);
            v.add_col(dst, src, q);
            v_inv.add_row(src, dst, &-q);
        };

    for t in 0..r.min(c) {
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in t..r {
                for j in t..c {
                    let x = &d[(i, j)];
                    if !x.is_zero() && best.is_none_or(|(bi, bj)| x.abs() < d[(bi, bj)].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else {
                return SmithForm {
                    u,
                    d,
                    v,
                    u_inv,
                    v_inv,
                };
            };
            d.swap_rows(t, pi);
            u.swap_rows(t, pi);
            u_inv.swap_cols(t, pi);
            d.swap_cols(t, pj);
            v.swap_cols(t, pj);
            v_inv.swap_rows(t, pj);

            let mut clean = true;
            for i in t + 1..r {
                if d[(i, t)].is_zero() {
                    continue;
                }
                let q = d[(i, t)].div_floor(&d[(t, t)]);
                row_op(&mut d, &mut u, &mut u_inv, i, t, &-q);
                if !d[(i, t)].is_zero() {
                    clean = false;
                }
            }
            for j in t + 1..c {
                if d[(t, j)].is_zero() {
                    continue;
                }
                let q = d[(t, j)].div_floor(&d[(t, t)]);
                col_op(&mut d, &mut v, &mut v_inv, j, t, &-q);
                if !d[(t, j)].is_zero() {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            // divisibility: fold an offending row into the pivot row and retry
            let offending =
                (t + 1..r).find(|&i| (t + 1..c).any(|j| !d[(i, j)].is_multiple_of(&d[(t, t)])));
            match offending {
                Some(i) => row_op(&mut d, &mut u, &mut u_inv, t, i, &BigInt::one()),
                None => break,
            }
        }
        if d[(t, t)].is_negative() {
            d.negate_row(t);
            u.negate_row(t);
            u_inv.negate_col(t);
        }
    }
    SmithForm {
        u,
        d,
        v,
        u_inv,
        v_inv,
    }
}

/// Sparse integer matrix in coordinate form.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparseIntMatrix {
    pub rows: usize,
    pub cols: usize,
    /// `(row, col, value)`; duplicates are summed.
    pub entries: Vec<(usize, usize, i64)>,
}

impl SparseIntMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        SparseIntMatrix {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: i64) {
        self.entries.push((row, col, value));
    }

    fn row_maps(&self) -> Vec<BTreeMap<usize, BigInt>> {
        let mut rows: Vec<BTreeMap<usize, BigInt>> = vec![BTreeMap::new(); self.rows];
        for &(i, j, v) in &self.entries {
            let e = rows[i].entry(j).or_insert_with(BigInt::zero);
            *e += v;
            if e.is_zero() {
                rows[i].remove(&j);
            }
        }
        rows
    }

    pub fn to_dense(&self) -> IntMatrix {
        let mut m = IntMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// True when `self * rhs` is the zero matrix.
    fn product_is_zero(&self, rhs: &SparseIntMatrix) -> bool {
        let rhs_rows = rhs.row_maps();
        let mut acc: HashMap<(usize, usize), BigInt> = HashMap::new();
        for (i, row) in self.row_maps().iter().enumerate() {
            for (k, a) in row {
                for (j, b) in &rhs_rows[*k] {
                    *acc.entry((i, *j)).or_insert_with(BigInt::zero) += a * b;
                }
            }
        }
        acc.values().all(Zero::is_zero)
    }
}

/// Nonzero invariant factors of a sparse integer matrix.
///
/// Eliminates on unit pivots first (cheapest row, then shortest column) and
/// finishes the leftover block with the dense [`smith_normal_form`].
pub fn invariant_factors(m: &SparseIntMatrix) -> Vec<BigInt> {
    let mut rows = m.row_maps();
    let mut cols: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m.cols];
    for (i, row) in rows.iter().enumerate() {
        for &j in row.keys() {
            cols[j].insert(i);
        }
    }
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.is_empty())
        .map(|(i, r)| Reverse((r.len(), i)))
        .collect();
    let mut units = 0usize;
    while let Some(Reverse((nnz, p))) = heap.pop() {
        if rows[p].len() != nnz || nnz == 0 {
            continue;
        }
        let pivot = rows[p]
            .iter()
            .filter(|(_, v)| v.abs().is_one())
            .min_by_key(|(j, _)| cols[**j].len())
            .map(|(j, v)| (*j, v.clone()));
        let Some((c, pv)) = pivot else { continue };
        let prow = std::mem::take(&mut rows[p]);
        for j in prow.keys() {
            cols[*j].remove(&p);
        }
        let targets: Vec<usize> = cols[c].iter().copied().collect();
        for r in targets {
            // pv is ±1, so a_rc / pv = a_rc * pv
            let factor = &rows[r][&c] * &pv;
            for (j, v) in &prow {
                let delta = &factor * v;
                let entry = rows[r].entry(*j).or_insert_with(BigInt::zero);
                let was_zero = entry.is_zero();
                *entry -= delta;
                if entry.is_zero() {
                    rows[r].remove(j);
                    cols[*j].remove(&r);
                } else if was_zero {
                    cols[*j].insert(r);
                }
            }
            heap.push(Reverse((rows[r].len(), r)));
        }
        debug_assert!(cols[c].is_empty());
        units += 1;
    }

    let live_rows: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i].is_empty()).collect();
    let mut factors = vec![BigInt::one(); units];
    if !live_rows.is_empty() {
        let live_cols: BTreeSet<usize> = live_rows
            .iter()
            .flat_map(|&i| rows[i].keys().copied())
            .collect();
        let col_pos: HashMap<usize, usize> =
            live_cols.iter().enumerate().map(|(k, &j)| (j, k)).collect();
        let mut dense = IntMatrix::zeros(live_rows.len(), live_cols.len());
        for (k, &i) in live_rows.iter().enumerate() {
            for (j, v) in &rows[i] {
                dense[(k, col_pos[j])] = v.clone();
            }
        }
        factors.extend(smith_normal_form(&dense).invariant_factors());
    }
    factors.sort();
    factors
}

/// Chain complex `C_top -> ... -> C_1 -> C_0` over `Z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainComplex {
    /// `dims[k]` is the rank of `C_k`.
    pub dims: Vec<usize>,
    /// `boundaries[k - 1]` is `D_k: C_k -> C_{k-1}`, of shape `dims[k-1] x dims[k]`.
    pub boundaries: Vec<SparseIntMatrix>,
}

impl ChainComplex {
    pub fn validate(&self) -> Result<(), HomologyError> {
        for (idx, d) in self.boundaries.iter().enumerate() {
            let k = idx + 1;
            let (er, ec) = (
                self.dims.get(k - 1).copied().unwrap_or(0),
                self.dims.get(k).copied().unwrap_or(0),
            );
            if d.rows != er || d.cols != ec {
                return Err(HomologyError::Shape {
                    degree: k,
                    rows: d.rows,
                    cols: d.cols,
                    expected_rows: er,
                    expected_cols: ec,
                });
            }
        }
        if self.boundaries.len() + 1 < self.dims.len() {
            return Err(HomologyError::Shape {
                degree: self.boundaries.len() + 1,
                rows: 0,
                cols: 0,
                expected_rows: self.dims[self.boundaries.len()],
                expected_cols: self.dims[self.boundaries.len() + 1],
            });
        }
        for k in 1..self.boundaries.len() {
            if !self.boundaries[k - 1].product_is_zero(&self.boundaries[k]) {
                return Err(HomologyError::NotAComplex {
                    lower: k,
                    upper: k + 1,
                });
            }
        }
        Ok(())
    }

    /// Alternating sum of chain ranks.
    pub fn euler_characteristic(&self) -> i64 {
        self.dims
            .iter()
            .enumerate()
            .map(|(k, &d)| if k % 2 == 0 { d as i64 } else { -(d as i64) })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeHomology {
    pub rank: usize,
    /// Invariant factors greater than one.
    pub torsion: Vec<BigInt>,
}

/// Homology of a chain complex, one entry per degree.
pub fn chain_homology(c: &ChainComplex) -> Result<Vec<DegreeHomology>, HomologyError> {
    c.validate()?;
    let factors: Vec<Vec<BigInt>> = c.boundaries.iter().map(invariant_factors).collect();
    let rank_of = |k: usize| -> usize {
        if k == 0 {
            0
        } else {
            factors.get(k - 1).map_or(0, Vec::len)
        }
    };
    Ok((0..c.dims.len())
        .map(|k| DegreeHomology {
            rank: c.dims[k] - rank_of(k) - rank_of(k + 1),
            torsion: factors
                .get(k)
                .map(|f| f.iter().filter(|x| !x.is_one()).cloned().collect())
                .unwrap_or_default(),
        })
        .collect())
}

/// Packs per-degree homology into a report.
pub fn report_from_chain_homology(groups: &[DegreeHomology]) -> HomologyReport {
    let ranks = groups
        .iter()
        .enumerate()
        .filter(|(_, g)| g.rank > 0)
        .map(|(k, g)| (k, g.rank))
        .collect();
    let torsion = groups
        .iter()
        .enumerate()
        .flat_map(|(k, g)| {
            g.torsion.iter().map(move |t| TorsionFactor {
                degree: k,
                order: t.to_string(),
            })
        })
        .collect();
    let mut report = HomologyReport {
        ranks,
        torsion,
        euler_rel: 0,
        caveats: Vec::new(),
        extrapolated_degrees: Vec::new(),
    };
    report.euler_rel = report.alternating_rank_sum();
    report
}

/// Relative simplicial chain complex `C_*(K) / C_*(L)`.
///
/// `simplices` lists every simplex of `K` (faces included) by vertex ids,
/// `subcomplex` the simplices of `L`. Orientation follows ascending vertex
/// order.
pub fn relative_simplicial_complex(
    simplices: &[Vec<usize>],
    subcomplex: &BTreeSet<Vec<usize>>,
) -> ChainComplex {
    let mut by_dim: Vec<Vec<Vec<usize>>> = Vec::new();
    for s in simplices {
        let mut s = s.clone();
        s.sort_unstable();
        if subcomplex.contains(&s) {
            continue;
        }
        let k = s.len() - 1;
        if by_dim.len() <= k {
            by_dim.resize(k + 1, Vec::new());
        }
        by_dim[k].push(s);
    }
    for cells in &mut by_dim {
        cells.sort();
        cells.dedup();
    }
    let index: Vec<HashMap<&Vec<usize>, usize>> = by_dim
        .iter()
        .map(|cells| cells.iter().enumerate().map(|(i, s)| (s, i)).collect())
        .collect();
    let dims: Vec<usize> = by_dim.iter().map(Vec::len).collect();
    let mut boundaries = Vec::new();
    for k in 1..by_dim.len() {
        let mut d = SparseIntMatrix::new(dims[k - 1], dims[k]);
        for (j, s) in by_dim[k].iter().enumerate() {
            for i in 0..s.len() {
                let mut face = s.clone();
                face.remove(i);
                if let Some(&row) = index[k - 1].get(&face) {
                    d.push(row, j, if i % 2 == 0 { 1 } else { -1 });
                }
            }
        }
        boundaries.push(d);
    }
    ChainComplex { dims, boundaries }
}

/// All faces of the given simplices, including the simplices themselves.
pub fn close_under_faces(tops: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out: BTreeSet<Vec<usize>> = BTreeSet::new();
    for t in tops {
        let mut t = t.clone();
        t.sort_unstable();
        let n = t.len();
        for mask in 1u32..(1 << n) {
            out.insert(
                (0..n)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| t[b])
                    .collect(),
            );
        }
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cp(index: usize, value: f64) -> CriticalPoint {
        CriticalPoint {
            location: vec![1.0, 0.0],
            value,
            multiplier: 0.0,
            tangent_spectrum: vec![],
            morse_index: Some(index),
            degenerate: false,
            residual: 0.0,
        }
    }

    fn big(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn handle_decompositions() {
        let h = handle_decomposition(&[cp(1, 4.0)]).unwrap();
        assert_eq!((h.indices.clone(), h.m), (vec![1], 1));
        assert_eq!(h.describe(), "∂Φ ∪ D^1");
        let h = handle_decomposition(&[cp(2, 1.1), cp(1, 0.9)]).unwrap();
        assert_eq!(h.indices, vec![1, 2]);
        assert_eq!(h.provenance[0].value, 0.9);
        let h = handle_decomposition(&[]).unwrap();
        assert_eq!(h.m, 0);
        assert_eq!(h.describe(), "∂Φ");
        let mut bad = cp(1, 1.0);
        bad.morse_index = None;
        assert_eq!(
            handle_decomposition(&[bad]),
            Err(HomologyError::DegeneratePoint)
        );
    }

    #[test]
    fn morse_side_homology() {
        let from = |ix: &[usize]| {
            let pts: Vec<_> = ix.iter().map(|&k| cp(k, 1.0)).collect();
            relative_homology(&handle_decomposition(&pts).unwrap())
        };
        let r = from(&[1]);
        assert_eq!(r.ranks, BTreeMap::from([(1, 1)]));
        assert_eq!(r.euler_rel, -1);
        let r = from(&[1, 2]);
        assert_eq!(r.ranks, BTreeMap::from([(1, 1), (2, 1)]));
        assert_eq!(r.euler_rel, 0);
        let r = from(&[1, 1, 1]);
        assert_eq!(r.ranks, BTreeMap::from([(1, 3)]));
        let r = from(&[]);
        assert!(r.ranks.is_empty());
        assert_eq!(r.euler_rel, 0);
        let r = from(&[0, 1]);
        assert_eq!(r.rank(0), 1);
        assert_eq!(r.caveats, vec![Caveat::IndexZeroExtrapolation]);
        assert_eq!(r.extrapolated_degrees, vec![0]);
    }

    #[test]
    fn snf_examples() {
        let s = smith_normal_form(&IntMatrix::from_rows(&[vec![2, 0], vec![0, 3]]));
        assert_eq!(s.invariant_factors(), big(&[1, 6]));
        let s = smith_normal_form(&IntMatrix::zeros(2, 3));
        assert!(s.invariant_factors().is_empty());
        let s = smith_normal_form(&IntMatrix::from_rows(&[vec![1, 1], vec![1, 1]]));
        assert_eq!(s.invariant_factors(), big(&[1]));
        assert!(s.d.is_diagonal());
    }

    #[test]
    fn snf_transforms_reconstruct() {
        let a =
            IntMatrix::from_rows(&[vec![4, 6, -2], vec![8, 3, 5], vec![2, 0, 4], vec![6, 9, -3]]);
        let s = smith_normal_form(&a);
        assert_eq!(s.u.mul(&a).mul(&s.v), s.d);
        assert_eq!(s.u_inv.mul(&s.d).mul(&s.v_inv), a);
        assert_eq!(s.u.mul(&s.u_inv), IntMatrix::identity(4));
        assert_eq!(s.v.mul(&s.v_inv), IntMatrix::identity(3));
    }

    #[test]
    fn sparse_factors_match_dense() {
        let rows = vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]];
        let dense = smith_normal_form(&IntMatrix::from_rows(&rows)).invariant_factors();
        let mut sp = SparseIntMatrix::new(3, 3);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0 {
                    sp.push(i, j, v);
                }
            }
        }
        assert_eq!(invariant_factors(&sp), dense);
        assert_eq!(dense, big(&[2, 6, 12]));
    }

    #[test]
    fn circle_complex() {
        // two vertices, two edges both oriented a -> b
        let mut d1 = SparseIntMatrix::new(2, 2);
        for j in 0..2 {
            d1.push(0, j, -1);
            d1.push(1, j, 1);
        }
        let c = ChainComplex {
            dims: vec![2, 2],
            boundaries: vec![d1],
        };
        let h = chain_homology(&c).unwrap();
        assert_eq!(h[0].rank, 1);
        assert_eq!(h[1].rank, 1);
        assert!(h.iter().all(|g| g.torsion.is_empty()));
    }

    #[test]
    fn disc_relative_to_boundary() {
        // cone on a triangle: centre 0, rim 1-2-3
        let tops = vec![vec![0, 1, 2], vec![0, 2, 3], vec![0, 3, 1]];
        let all = close_under_faces(&tops);
        let rim: BTreeSet<Vec<usize>> = close_under_faces(&[vec![1, 2], vec![2, 3], vec![1, 3]])
            .into_iter()
            .collect();
        let c = relative_simplicial_complex(&all, &rim);
        let r = report_from_chain_homology(&chain_homology(&c).unwrap());
        assert_eq!(r.ranks, BTreeMap::from([(2, 1)]));
        assert_eq!(c.euler_characteristic(), r.alternating_rank_sum());
    }

    #[test]
    fn klein_bottle_has_two_torsion() {
        // one vertex, edges a and b, one face with boundary a + b - a + b
        let d1 = SparseIntMatrix::new(1, 2);
        let mut d2 = SparseIntMatrix::new(2, 1);
        d2.push(1, 0, 2);
        let c = ChainComplex {
            dims: vec![1, 2, 1],
            boundaries: vec![d1, d2],
        };
        let h = chain_homology(&c).unwrap();
        assert_eq!(h[0].rank, 1);
        assert_eq!(h[1].rank, 1);
        assert_eq!(h[1].torsion, big(&[2]));
        assert_eq!(h[2].rank, 0);
        let r = report_from_chain_homology(&h);
        assert_eq!(
            r.torsion,
            vec![TorsionFactor {
                degree: 1,
                order: "2".into()
            }]
        );
    }

    #[test]
    fn rejects_ill_formed_complexes() {
        let mut d1 = SparseIntMatrix::new(1, 1);
        d1.push(0, 0, 1);
        let mut d2 = SparseIntMatrix::new(1, 1);
        d2.push(0, 0, 1);
        let c = ChainComplex {
            dims: vec![1, 1, 1],
            boundaries: vec![d1.clone(), d2],
        };
        assert_eq!(
            chain_homology(&c),
            Err(HomologyError::NotAComplex { lower: 1, upper: 2 })
        );
        let c = ChainComplex {
            dims: vec![2, 1],
            boundaries: vec![d1],
        };
        assert!(matches!(
            chain_homology(&c),
            Err(HomologyError::Shape { .. })
        ));
    }

    #[test]
    fn subdivision_invariance() {
        let circle3 = close_under_faces(&[vec![0, 1], vec![1, 2], vec![0, 2]]);
        let circle4 = close_under_faces(&[vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3]]);
        let none = BTreeSet::new();
        let h3 = chain_homology(&relative_simplicial_complex(&circle3, &none)).unwrap();
        let h4 = chain_homology(&relative_simplicial_complex(&circle4, &none)).unwrap();
        assert_eq!(h3, h4);

        // disc rel rim: cone on a triangle vs. cone on a square
        let disc3 = close_under_faces(&[vec![0, 1, 2], vec![0, 2, 3], vec![0, 3, 1]]);
        let rim3 = close_under_faces(&[vec![1, 2], vec![2, 3], vec![1, 3]])
            .into_iter()
            .collect();
        let disc4 =
            close_under_faces(&[vec![0, 1, 2], vec![0, 2, 3], vec![0, 3, 4], vec![0, 4, 1]]);
        let rim4 = close_under_faces(&[vec![1, 2], vec![2, 3], vec![3, 4], vec![1, 4]])
            .into_iter()
            .collect();
        let a = chain_homology(&relative_simplicial_complex(&disc3, &rim3)).unwrap();
        let b = chain_homology(&relative_simplicial_complex(&disc4, &rim4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_text() {
        let r = relative_homology(&handle_decomposition(&[cp(1, 1.0), cp(2, 2.0)]).unwrap());
        let text = r.to_string();
        assert!(text.contains("H_1(Φ, ∂Φ; Z) = Z"));
        assert!(text.contains("H_2(Φ, ∂Φ; Z) = Z"));
        assert!(text.contains("H_0(Φ, ∂Φ; Z) = 0"));
    }
}
