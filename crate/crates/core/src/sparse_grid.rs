//! Smolyak's algorithm on Chebyshev-extrema sparse grids.
//!
//! The interpolant is kept in combination form,
//!
//! ```text
//! A(q, d) = sum_{q-d+1 <= |i|_1 <= q} (-1)^(q-|i|_1) C(d-1, q-|i|_1) U^{i_1} x ... x U^{i_d}
//! ```
//!
//! where every `U^i` is barycentric interpolation on level `i`. Evaluating
//! one term costs `prod_k m_{i_k}` operations per query point; no
//! dimension-wise sweeps are attempted. For large batches of query points
//! the interpolant can instead be converted to Chebyshev coefficients over
//! `E(q, d)` ([`SmolyakScheme::chebyshev_coefficients`]), where each tensor
//! term is transformed exactly and the results are summed with the
//! combination coefficients.

use std::collections::HashMap;
use std::sync::Arc;

use faer::{Mat, MatRef};
use rayon::prelude::*;

use crate::error::{check_qd, Error, Result};
use crate::poly_space::{ChebyshevExpansion, DegreeSet, DEFAULT_POINT_CAP};
use crate::univariate::{cardinality_of, rules_up_to, NodeKey, UnivariateRule};

/// Tensor levels `(i_1, ..., i_d)`, every component at least 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() || levels.contains(&0) {
            return Err(Error::Domain(format!(
                "multi-index {levels:?} needs d >= 1 components, all >= 1"
            )));
        }
        Ok(MultiIndex(levels))
    }

    pub fn levels(&self) -> &[u32] {
        &self.0
    }

    pub fn l1(&self) -> usize {
        self.0.iter().map(|&i| i as usize).sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// All multi-indices with `max(d, q-d+1) <= |i|_1 <= q`, lexicographic.
pub fn index_set(q: usize, d: usize) -> Result<Vec<MultiIndex>> {
    check_qd(q, d)?;
    let lo = d.max(q + 1 - d);
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(d);
    enumerate_indices(d, lo, q, &mut current, &mut |i| {
        out.push(MultiIndex(i.to_vec()))
    });
    Ok(out)
}

/// Calls `visit` on every `i >= 1` with `lo <= |i|_1 <= hi`, lexicographic.
fn enumerate_indices(
    d: usize,
    lo: usize,
    hi: usize,
    current: &mut Vec<u32>,
    visit: &mut impl FnMut(&[u32]),
) {
    let used: usize = current.iter().map(|&i| i as usize).sum();
    let remaining = d - current.len();
    if remaining == 0 {
        if used >= lo {
            visit(current);
        }
        return;
    }
    // leave at least 1 for each later axis
    let max_here = hi - used - (remaining - 1);
    for i in 1..=max_here {
        current.push(i as u32);
        enumerate_indices(d, lo, hi, current, visit);
        current.pop();
    }
}

/// `(-1)^(q-|i|_1) * C(d-1, q-|i|_1)`.
pub fn combination_coefficient(q: usize, d: usize, index: &MultiIndex) -> i64 {
    let l1 = index.l1();
    assert!(
        l1 <= q && l1 + d > q,
        "multi-index outside the combination range"
    );
    let r = q - l1;
    let magnitude = binomial(d - 1, r);
    if r.is_multiple_of(2) {
        magnitude
    } else {
        -magnitude
    }
}

fn binomial(n: usize, k: usize) -> i64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc * (n - t) as u128 / (t + 1) as u128;
    }
    i64::try_from(acc).expect("combination coefficient overflows i64")
}

/// Number of new nodes on level `i`: `m_i - m_{i-1}`, `None` past `u128`.
fn new_nodes(i: u32) -> Option<u128> {
    match i {
        1 => Some(1),
        2 => Some(2),
        _ => 1u128.checked_shl(i - 2),
    }
}

/// `N(q, d) = #H(q, d)` by counting, without building the grid.
pub fn count_points(q: usize, d: usize) -> Result<u128> {
    check_qd(q, d)?;
    // ways[s]: number of new-node tuples over the processed axes with level sum s
    let overflow = || Error::Domain("point count overflows u128".into());
    let mut ways = vec![0u128; q + 1];
    ways[0] = 1;
    for axis in 0..d {
        let mut next = vec![0u128; q + 1];
        for (s, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            // leave level 1 for each remaining axis
            for level in 1..=(q - s).saturating_sub(d - axis - 1) {
                let add = new_nodes(level as u32)
                    .and_then(|n| w.checked_mul(n))
                    .ok_or_else(overflow)?;
                next[s + level] = next[s + level].checked_add(add).ok_or_else(overflow)?;
            }
        }
        ways = next;
    }
    ways.iter()
        .try_fold(0u128, |a, &b| a.checked_add(b))
        .ok_or_else(overflow)
}

/// The deduplicated sparse grid `H(q, d)`.
///
/// Points are stored as tuples of hierarchical node codes (a bijection with
/// [`NodeKey`] tuples, see [`NodeKey::code`]). They are ordered block by
/// block: for each `i` with `|i|_1 <= q` in lexicographic order, the points
/// whose coordinates are new on exactly the levels `i`.
#[derive(Debug, Clone)]
pub struct SparseGrid {
    q: usize,
    d: usize,
    codes: Vec<u32>,
    coords: Vec<f64>,
    index: HashMap<Box<[u32]>, u32>,
}

impl SparseGrid {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.codes.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.coords[j * self.d..(j + 1) * self.d]
    }

    /// Row-major coordinates, `len() x dim()`.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn codes(&self, j: usize) -> &[u32] {
        &self.codes[j * self.d..(j + 1) * self.d]
    }

    pub fn keys(&self, j: usize) -> Vec<NodeKey> {
        self.codes(j)
            .iter()
            .map(|&c| NodeKey::from_code(c))
            .collect()
    }

    /// Ordinal of the point with the given node keys.
    pub fn position(&self, keys: &[NodeKey]) -> Option<usize> {
        let codes: Vec<u32> = keys.iter().map(|k| k.code()).collect();
        self.position_of_codes(&codes)
    }

    pub(crate) fn position_of_codes(&self, codes: &[u32]) -> Option<usize> {
        self.index.get(codes).map(|&j| j as usize)
    }
}

/// Builds `H(q, d)` with the default point cap.
pub fn grid_points(q: usize, d: usize) -> Result<SparseGrid> {
    grid_points_capped(q, d, DEFAULT_POINT_CAP)
}

pub fn grid_points_capped(q: usize, d: usize, cap: usize) -> Result<SparseGrid> {
    let count = count_points(q, d)?;
    if count > cap as u128 {
        return Err(Error::Size {
            what: "sparse grid",
            size: count,
            cap: cap as u128,
        });
    }
    let count = count as usize;
    let max_code = cardinality_of((q - d + 1) as u32);
    let code_coord: Vec<f64> = (0..max_code as u32)
        .map(|c| NodeKey::from_code(c).coordinate())
        .collect();

    let mut codes = Vec::with_capacity(count * d);
    let mut current = Vec::with_capacity(d);
    enumerate_indices(d, d, q, &mut current, &mut |i| {
        // product of the per-axis ranges of new codes, last axis fastest
        let ranges: Vec<(u32, u32)> = i
            .iter()
            .map(|&ik| (cardinality_of(ik - 1) as u32, cardinality_of(ik) as u32))
            .collect();
        let mut tuple: Vec<u32> = ranges.iter().map(|r| r.0).collect();
        'block: loop {
            codes.extend_from_slice(&tuple);
            for k in (0..d).rev() {
                tuple[k] += 1;
                if tuple[k] < ranges[k].1 {
                    continue 'block;
                }
                tuple[k] = ranges[k].0;
            }
            break;
        }
    });
    debug_assert_eq!(codes.len(), count * d);

    let coords = codes.iter().map(|&c| code_coord[c as usize]).collect();
    let index = codes
        .chunks_exact(d)
        .enumerate()
        .map(|(j, c)| (c.to_vec().into_boxed_slice(), j as u32))
        .collect();
    Ok(SparseGrid {
        q,
        d,
        codes,
        coords,
        index,
    })
}

#[derive(Debug, Clone)]
struct Term {
    index: MultiIndex,
    coefficient: i64,
    /// offset into `SmolyakScheme::ordinals`
    start: usize,
}

/// Everything about `A(q, d)` that does not depend on the function: the
/// grid, the combination terms and the univariate rules.
#[derive(Debug, Clone)]
pub struct SmolyakScheme {
    grid: SparseGrid,
    terms: Vec<Term>,
    /// for each term, the grid ordinal of every tensor node, last axis fastest
    ordinals: Vec<u32>,
    rules: Vec<UnivariateRule>,
}

impl SmolyakScheme {
    pub fn new(q: usize, d: usize) -> Result<Self> {
        Self::with_cap(q, d, DEFAULT_POINT_CAP)
    }

    pub fn with_cap(q: usize, d: usize, cap: usize) -> Result<Self> {
        let grid = grid_points_capped(q, d, cap)?;
        let rules = rules_up_to((q - d + 1) as u32);
        let mut terms = Vec::new();
        let mut ordinals = Vec::new();
        for index in index_set(q, d)? {
            let coefficient = combination_coefficient(q, d, &index);
            if coefficient == 0 {
                continue;
            }
            let start = ordinals.len();
            let axes: Vec<&UnivariateRule> = index
                .levels()
                .iter()
                .map(|&i| &rules[i as usize - 1])
                .collect();
            let mut pos = vec![0usize; d];
            let mut tuple: Vec<u32> = axes.iter().map(|r| r.codes()[0]).collect();
            'tensor: loop {
                let j = grid
                    .position_of_codes(&tuple)
                    .expect("tensor node missing from the sparse grid");
                ordinals.push(j as u32);
                for k in (0..d).rev() {
                    pos[k] += 1;
                    if pos[k] < axes[k].len() {
                        tuple[k] = axes[k].codes()[pos[k]];
                        continue 'tensor;
                    }
                    pos[k] = 0;
                    tuple[k] = axes[k].codes()[0];
                }
                break;
            }
            terms.push(Term {
                index,
                coefficient,
                start,
            });
        }
        Ok(SmolyakScheme {
            grid,
            terms,
            ordinals,
            rules,
        })
    }

    pub fn grid(&self) -> &SparseGrid {
        &self.grid
    }

    pub fn q(&self) -> usize {
        self.grid.q
    }

    pub fn dim(&self) -> usize {
        self.grid.d
    }

    /// Multi-indices with a nonzero combination coefficient.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, i64)> {
        self.terms.iter().map(|t| (&t.index, t.coefficient))
    }

    /// Total number of tensor nodes over all terms, the per-point cost of
    /// [`SmolyakInterpolant::evaluate`].
    pub fn tensor_work(&self) -> usize {
        self.ordinals.len()
    }

    fn term_sizes(&self, term: &Term) -> Vec<usize> {
        term.index
            .levels()
            .iter()
            .map(|&i| self.rules[i as usize - 1].len())
            .collect()
    }

    /// Evaluates the interpolant of `values` at `x` in combination form.
    pub fn evaluate_values(&self, values: &[f64], x: &[f64]) -> f64 {
        assert_eq!(values.len(), self.grid.len());
        assert_eq!(x.len(), self.grid.d);
        // basis[k][level-1] = Lagrange basis of that level at x_k
        let basis: Vec<Vec<Vec<f64>>> = x
            .iter()
            .map(|&xk| {
                self.rules
                    .iter()
                    .map(|rule| {
                        let mut b = vec![0.0; rule.len()];
                        rule.lagrange_basis(xk, &mut b);
                        b
                    })
                    .collect()
            })
            .collect();
        let mut total = 0.0;
        for term in &self.terms {
            let sizes = self.term_sizes(term);
            let per_axis: Vec<&[f64]> = term
                .index
                .levels()
                .iter()
                .enumerate()
                .map(|(k, &i)| basis[k][i as usize - 1].as_slice())
                .collect();
            let count: usize = sizes.iter().product();
            let ordinals = &self.ordinals[term.start..term.start + count];
            total +=
                term.coefficient as f64 * tensor_sum(&per_axis, &sizes, ordinals, values, 0, 1.0);
        }
        total
    }

    /// Samples `oracle` once per grid point and returns the interpolant.
    pub fn fit(self: &Arc<Self>, mut oracle: impl FnMut(&[f64]) -> f64) -> SmolyakInterpolant {
        let values = (0..self.grid.len())
            .map(|j| oracle(self.grid.point(j)))
            .collect();
        SmolyakInterpolant {
            scheme: Arc::clone(self),
            values,
        }
    }

    /// Like [`SmolyakScheme::fit`], propagating the first oracle failure.
    pub fn try_fit<E: std::fmt::Display>(
        self: &Arc<Self>,
        mut oracle: impl FnMut(&[f64]) -> std::result::Result<f64, E>,
    ) -> Result<SmolyakInterpolant> {
        let mut values = Vec::with_capacity(self.grid.len());
        for j in 0..self.grid.len() {
            values.push(oracle(self.grid.point(j)).map_err(|e| Error::Oracle(e.to_string()))?);
        }
        Ok(SmolyakInterpolant {
            scheme: Arc::clone(self),
            values,
        })
    }

    /// Evaluates a reentrant oracle on the grid points in parallel. The
    /// stored values do not depend on scheduling.
    pub fn fit_par(self: &Arc<Self>, oracle: impl Fn(&[f64]) -> f64 + Sync) -> SmolyakInterpolant {
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|j| oracle(self.grid.point(j)))
            .collect();
        SmolyakInterpolant {
            scheme: Arc::clone(self),
            values,
        }
    }

    /// Reuses values cached from earlier fits (e.g. at a lower `q`) and only
    /// calls `oracle` on points not in `cache`.
    pub fn fit_cached(
        self: &Arc<Self>,
        cache: &mut ValueCache,
        mut oracle: impl FnMut(&[f64]) -> f64,
    ) -> SmolyakInterpolant {
        assert!(
            cache.d.is_none_or(|d| d == self.grid.d),
            "cache dimension mismatch"
        );
        cache.d = Some(self.grid.d);
        let values = (0..self.grid.len())
            .map(|j| {
                let codes = self.grid.codes(j);
                if let Some(&v) = cache.values.get(codes) {
                    return v;
                }
                let v = oracle(self.grid.point(j));
                cache.values.insert(codes.to_vec().into_boxed_slice(), v);
                v
            })
            .collect();
        SmolyakInterpolant {
            scheme: Arc::clone(self),
            values,
        }
    }

    pub fn interpolant(self: &Arc<Self>, values: Vec<f64>) -> SmolyakInterpolant {
        assert_eq!(
            values.len(),
            self.grid.len(),
            "one value per grid point required"
        );
        SmolyakInterpolant {
            scheme: Arc::clone(self),
            values,
        }
    }

    /// Chebyshev coefficients over `degrees` (which must be `E(q, d)`) of the
    /// interpolants of every column of `values` (`N x r`).
    pub fn chebyshev_coefficients(&self, degrees: &DegreeSet, values: MatRef<'_, f64>) -> Mat<f64> {
        assert_eq!(degrees.q(), self.q());
        assert_eq!(degrees.dim(), self.dim());
        assert_eq!(values.nrows(), self.grid.len());
        let cols = values.ncols();
        let transforms: Vec<Vec<f64>> =
            self.rules.iter().map(|r| r.chebyshev_transform()).collect();
        let mut out = Mat::<f64>::zeros(degrees.len(), cols);
        let mut buf = Vec::new();
        let mut tmp = Vec::new();
        let mut degree = vec![0u32; self.dim()];
        for term in &self.terms {
            let sizes = self.term_sizes(term);
            let count: usize = sizes.iter().product();
            let ordinals = &self.ordinals[term.start..term.start + count];
            // gather, layout [tensor node][column]
            buf.clear();
            for &j in ordinals {
                buf.extend((0..cols).map(|c| values[(j as usize, c)]));
            }
            // mode-k products with the univariate transforms
            let mut inner = count * cols;
            for (k, &s) in sizes.iter().enumerate() {
                inner /= s;
                if s == 1 {
                    continue;
                }
                let t = &transforms[term.index.levels()[k] as usize - 1];
                tmp.clear();
                tmp.resize(buf.len(), 0.0);
                let outer = buf.len() / (s * inner);
                for o in 0..outer {
                    let base = o * s * inner;
                    for row in 0..s {
                        let dst = &mut tmp[base + row * inner..base + (row + 1) * inner];
                        for col in 0..s {
                            let w = t[row * s + col];
                            let src = &buf[base + col * inner..base + (col + 1) * inner];
                            for (a, b) in dst.iter_mut().zip(src) {
                                *a += w * b;
                            }
                        }
                    }
                }
                std::mem::swap(&mut buf, &mut tmp);
            }
            // scatter into E(q, d), degree tuple in the same lex order
            let weight = term.coefficient as f64;
            degree.fill(0);
            for t in 0..count {
                let row = degrees
                    .position(&degree)
                    .expect("tensor degree outside E(q, d)");
                for c in 0..cols {
                    out[(row, c)] += weight * buf[t * cols + c];
                }
                for k in (0..degree.len()).rev() {
                    degree[k] += 1;
                    if (degree[k] as usize) < sizes[k] {
                        break;
                    }
                    degree[k] = 0;
                }
            }
        }
        out
    }
}

fn tensor_sum(
    basis: &[&[f64]],
    sizes: &[usize],
    ordinals: &[u32],
    values: &[f64],
    axis: usize,
    weight: f64,
) -> f64 {
    let stride: usize = sizes[axis + 1..].iter().product();
    let mut acc = 0.0;
    if axis + 1 == sizes.len() {
        for (j, &b) in basis[axis].iter().enumerate() {
            if b != 0.0 {
                acc += b * values[ordinals[j] as usize];
            }
        }
        return weight * acc;
    }
    for (j, &b) in basis[axis].iter().enumerate() {
        if b != 0.0 {
            acc += tensor_sum(
                basis,
                sizes,
                &ordinals[j * stride..(j + 1) * stride],
                values,
                axis + 1,
                weight * b,
            );
        }
    }
    acc
}

/// Function values keyed by node tuple, shared across fits on nested grids.
#[derive(Debug, Default, Clone)]
pub struct ValueCache {
    d: Option<usize>,
    values: HashMap<Box<[u32]>, f64>,
}

impl ValueCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `A(q, d)(f)`: the scheme plus one sampled value per grid point.
#[derive(Debug, Clone)]
pub struct SmolyakInterpolant {
    scheme: Arc<SmolyakScheme>,
    values: Vec<f64>,
}

impl SmolyakInterpolant {
    pub fn scheme(&self) -> &Arc<SmolyakScheme> {
        &self.scheme
    }

    pub fn grid(&self) -> &SparseGrid {
        &self.scheme.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.scheme.evaluate_values(&self.values, x)
    }

    /// The same polynomial written in the Chebyshev basis of `E(q, d)`.
    pub fn to_chebyshev(&self, degrees: Arc<DegreeSet>) -> ChebyshevExpansion {
        let values = MatRef::from_column_major_slice(&self.values, self.values.len(), 1);
        let coef = self.scheme.chebyshev_coefficients(&degrees, values);
        let coefficients = (0..coef.nrows()).map(|j| coef[(j, 0)]).collect();
        ChebyshevExpansion::new(degrees, coefficients)
    }
}

/// Builds the scheme for `(q, d)` and samples `oracle` on its grid.
pub fn fit(q: usize, d: usize, oracle: impl FnMut(&[f64]) -> f64) -> Result<SmolyakInterpolant> {
    Ok(Arc::new(SmolyakScheme::new(q, d)?).fit(oracle))
}
