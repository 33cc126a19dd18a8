//! The polynomial space `E(q, d)` on which Smolyak's algorithm is exact,
//! represented by its tensor Chebyshev degree support, and the orthonormal
//! Chebyshev basis on `[0, 1]`.
//!
//! A degree vector `l` belongs to `E(q, d)` iff the sum over coordinates of
//! the smallest level able to carry `l_k` (see [`level_of_degree`]) is at
//! most `q`. Degrees are ordered by that level sum, then lexicographically.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;
use std::sync::Arc;

use faer::reborrow::ReborrowMut;
use faer::{Mat, MatMut};

use crate::error::{check_qd, Error, Result};

/// Default cap on the number of degrees (and grid points) materialized.
pub const DEFAULT_POINT_CAP: usize = 1 << 21;

/// Smallest level `i` with `m_i - 1 >= degree`.
pub fn level_of_degree(degree: u32) -> u32 {
    match degree {
        0 => 1,
        1 => 2,
        l => (l - 1).ilog2() + 2,
    }
}

/// Number of degrees whose level is exactly `level`, `None` past `u128`.
fn degrees_on_level(level: u32) -> Option<u128> {
    match level {
        0 => Some(0),
        1 => Some(1),
        2 => Some(2),
        l => 1u128.checked_shl(l - 2),
    }
}

/// `|degree_set(q, d)|` by counting, without building the set.
pub fn count_degrees(q: usize, d: usize) -> Result<u128> {
    check_qd(q, d)?;
    let overflow = || Error::Domain("degree count overflows u128".into());
    // ways[s] = number of partial degree vectors with level sum s
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
                let add = degrees_on_level(level as u32)
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

/// Downward-closed set of Chebyshev degree vectors spanning `E(q, d)`.
#[derive(Debug, Clone)]
pub struct DegreeSet {
    q: usize,
    d: usize,
    flat: Vec<u32>,
    parent: Vec<u32>,
    last_axis: Vec<u32>,
    last_degree: Vec<u32>,
    max_degree: Vec<u32>,
    lookup: HashMap<Box<[u32]>, u32>,
}

impl DegreeSet {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn get(&self, j: usize) -> &[u32] {
        &self.flat[j * self.d..(j + 1) * self.d]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.flat.chunks_exact(self.d)
    }

    /// Position of a degree vector, if it belongs to the set.
    pub fn position(&self, degree: &[u32]) -> Option<usize> {
        self.lookup.get(degree).map(|&j| j as usize)
    }

    /// Largest degree present on each axis.
    pub fn max_degree(&self) -> &[u32] {
        &self.max_degree
    }

    pub fn contains(&self, degree: &[u32]) -> bool {
        self.lookup.contains_key(degree)
    }

    /// Fills `out` (rows = points, cols = degrees) with
    /// `row_scale[i] * b_l(x_i)`.
    ///
    /// `points` is row-major `n x d`. Each entry costs one multiply: the
    /// value of `l` is its parent's value (last nonzero degree dropped)
    /// times one univariate factor. Rows are built in point-major blocks
    /// and copied over transposed.
    pub fn fill_basis_rows(
        &self,
        points: &[f64],
        row_scale: Option<&[f64]>,
        mut out: MatMut<'_, f64>,
    ) {
        const BLOCK: usize = 256;
        let n = points.len() / self.d;
        assert_eq!(out.nrows(), n);
        assert_eq!(out.ncols(), self.len());
        let mut block = Mat::<f64>::zeros(self.len(), BLOCK.min(n));
        for start in (0..n).step_by(BLOCK) {
            let end = (start + BLOCK).min(n);
            let width = end - start;
            self.fill_basis_columns(
                &points[start * self.d..end * self.d],
                block.as_mut().subcols_mut(0, width),
            );
            if let Some(scale) = row_scale {
                for (k, &s) in scale[start..end].iter().enumerate() {
                    for v in block.col_as_slice_mut(k) {
                        *v *= s;
                    }
                }
            }
            out.rb_mut()
                .subrows_mut(start, width)
                .copy_from(block.as_ref().subcols(0, width).transpose());
        }
    }

    /// Fills `out` (rows = degrees, cols = points) with `b_l(x_i)`, one
    /// contiguous column per point.
    pub fn fill_basis_columns(&self, points: &[f64], mut out: MatMut<'_, f64>) {
        let n = points.len() / self.d;
        assert_eq!(out.ncols(), n);
        assert_eq!(out.nrows(), self.len());
        let mut table = ChebyshevTable::new(&self.max_degree);
        let mut scratch = Vec::new();
        for i in 0..n {
            table.load(&points[i * self.d..(i + 1) * self.d]);
            match out.rb_mut().col_mut(i).try_as_col_major_mut() {
                Some(col) => self.basis_row(&table, col.as_slice_mut()),
                None => {
                    scratch.resize(self.len(), 0.0);
                    self.basis_row(&table, &mut scratch);
                    for (j, &v) in scratch.iter().enumerate() {
                        out[(j, i)] = v;
                    }
                }
            }
        }
    }

    /// All basis values at the point loaded in `table`.
    pub(crate) fn basis_row(&self, table: &ChebyshevTable, row: &mut [f64]) {
        if row.is_empty() {
            return;
        }
        row[0] = 1.0;
        for j in 1..row.len() {
            let parent = self.parent[j] as usize;
            row[j] =
                row[parent] * table.value(self.last_axis[j] as usize, self.last_degree[j] as usize);
        }
    }
}

/// Builds `E(q, d)`'s degree set with the default size cap.
pub fn degree_set(q: usize, d: usize) -> Result<DegreeSet> {
    degree_set_capped(q, d, DEFAULT_POINT_CAP)
}

pub fn degree_set_capped(q: usize, d: usize, cap: usize) -> Result<DegreeSet> {
    let count = count_degrees(q, d)?;
    if count > cap as u128 {
        return Err(Error::Size {
            what: "degree set",
            size: count,
            cap: cap as u128,
        });
    }
    let mut entries: Vec<(u32, Vec<u32>)> = Vec::with_capacity(count as usize);
    let mut current = vec![0u32; d];
    enumerate_degrees(0, q - d, 0, &mut current, &mut entries);
    entries.sort_unstable();
    debug_assert_eq!(entries.len() as u128, count);

    let mut flat = Vec::with_capacity(entries.len() * d);
    let mut lookup = HashMap::with_capacity(entries.len());
    for (j, (_, degree)) in entries.iter().enumerate() {
        flat.extend_from_slice(degree);
        lookup.insert(degree.clone().into_boxed_slice(), j as u32);
    }
    let mut parent = vec![0u32; entries.len()];
    let mut last_axis = vec![0u32; entries.len()];
    let mut last_degree = vec![0u32; entries.len()];
    let mut max_degree = vec![0u32; d];
    for (j, (_, degree)) in entries.iter().enumerate() {
        for (m, &l) in max_degree.iter_mut().zip(degree) {
            *m = (*m).max(l);
        }
        if let Some(axis) = degree.iter().rposition(|&l| l != 0) {
            let mut reduced = degree.clone();
            reduced[axis] = 0;
            parent[j] = lookup[reduced.as_slice()];
            last_axis[j] = axis as u32;
            last_degree[j] = degree[axis];
        }
    }
    Ok(DegreeSet {
        q,
        d,
        flat,
        parent,
        last_axis,
        last_degree,
        max_degree,
        lookup,
    })
}

/// Depth-first enumeration; `spare` is the level budget above all-ones.
fn enumerate_degrees(
    axis: usize,
    spare: usize,
    used: u32,
    current: &mut Vec<u32>,
    out: &mut Vec<(u32, Vec<u32>)>,
) {
    let d = current.len();
    if axis == d {
        out.push((used + d as u32, current.clone()));
        return;
    }
    for extra in 0..=spare {
        let level = extra as u32 + 1;
        let (lo, hi) = match level {
            1 => (0, 0),
            2 => (1, 2),
            l => ((1 << (l - 2)) + 1, 1 << (l - 1)),
        };
        for degree in lo..=hi {
            current[axis] = degree;
            enumerate_degrees(axis + 1, spare - extra, used + extra as u32, current, out);
        }
    }
    current[axis] = 0;
}

/// Orthonormal Chebyshev polynomial on `[0, 1]` w.r.t. the arcsine density:
/// `b_0 = 1`, `b_k(x) = sqrt(2) cos(k arccos(2x - 1))`.
pub fn cheb_basis_1d(k: u32, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let t = (2.0 * x - 1.0).clamp(-1.0, 1.0);
    SQRT_2 * (k as f64 * t.acos()).cos()
}

/// Tensor basis function `b_l(x) = prod_k b_{l_k}(x_k)`.
pub fn basis_eval(degree: &[u32], x: &[f64]) -> f64 {
    assert_eq!(degree.len(), x.len());
    degree
        .iter()
        .zip(x)
        .map(|(&l, &xk)| cheb_basis_1d(l, xk))
        .product()
}

/// Per-axis univariate basis values at one point.
pub(crate) struct ChebyshevTable {
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl ChebyshevTable {
    pub(crate) fn new(max_degree: &[u32]) -> Self {
        let mut offsets = Vec::with_capacity(max_degree.len() + 1);
        let mut total = 0;
        for &m in max_degree {
            offsets.push(total);
            total += m as usize + 1;
        }
        offsets.push(total);
        ChebyshevTable {
            offsets,
            values: vec![0.0; total],
        }
    }

    pub(crate) fn load(&mut self, x: &[f64]) {
        for (axis, &xk) in x.iter().enumerate() {
            let (start, end) = (self.offsets[axis], self.offsets[axis + 1]);
            let theta = (2.0 * xk - 1.0).clamp(-1.0, 1.0).acos();
            self.values[start] = 1.0;
            for k in 1..end - start {
                self.values[start + k] = SQRT_2 * (k as f64 * theta).cos();
            }
        }
    }

    #[inline]
    pub(crate) fn value(&self, axis: usize, degree: usize) -> f64 {
        self.values[self.offsets[axis] + degree]
    }
}

/// A polynomial in `E(q, d)` given by its Chebyshev coefficients.
#[derive(Debug, Clone)]
pub struct ChebyshevExpansion {
    degrees: Arc<DegreeSet>,
    coefficients: Vec<f64>,
}

impl ChebyshevExpansion {
    pub fn new(degrees: Arc<DegreeSet>, coefficients: Vec<f64>) -> Self {
        assert_eq!(
            degrees.len(),
            coefficients.len(),
            "one coefficient per degree"
        );
        ChebyshevExpansion {
            degrees,
            coefficients,
        }
    }

    pub fn degrees(&self) -> &Arc<DegreeSet> {
        &self.degrees
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut table = ChebyshevTable::new(self.degrees.max_degree());
        let mut row = vec![0.0; self.degrees.len()];
        table.load(x);
        self.degrees.basis_row(&table, &mut row);
        row.iter().zip(&self.coefficients).map(|(b, c)| b * c).sum()
    }
}
