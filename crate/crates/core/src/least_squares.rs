//! Weighted least squares over `E(q, d)` from random points.
//!
//! The design matrix `M = (sqrt(w_i) b_j(x_i))` is factored once and the
//! factorization is reused for any number of right-hand sides. All dense
//! kernels run sequentially so results do not depend on the thread count.
//!
//! Factoring first tries a plain Householder QR. If the triangular factor
//! is not clearly well conditioned the matrix is rebuilt and factored with
//! column pivoting; columns whose pivot falls below `1e-10` times the
//! largest are treated as dependent and the minimum-norm solution is
//! returned through a complete orthogonal decomposition.

use std::sync::Arc;
use std::time::Instant;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::householder;
use faer::linalg::qr::{col_pivoting, no_pivoting};
use faer::linalg::triangular_solve;
use faer::prelude::*;
use faer::{Conj, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly_space::{degree_set_capped, DegreeSet, DEFAULT_POINT_CAP};
use crate::sampling::{Distribution, PointSet, StreamKey};

pub const DEFAULT_MATRIX_CAP: usize = 1 << 28;

/// Relative pivot threshold below which a column counts as dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// The unpivoted QR is accepted when its estimated reciprocal condition
/// number clears this, a safety margin above [`RANK_TOLERANCE`].
const FAST_PATH_RCOND: f64 = 1e-8;

pub const OVERSAMPLING: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    Uniform,
    ChebyshevInverseDensity,
}

impl WeightScheme {
    /// Distribution the sample points are drawn from.
    pub fn distribution(self) -> Distribution {
        match self {
            WeightScheme::Uniform => Distribution::Uniform,
            WeightScheme::ChebyshevInverseDensity => Distribution::Chebyshev,
        }
    }
}

/// Coordinates are clamped to `[EPS, 1 - EPS]` before weighting.
const EPS: f64 = f64::EPSILON;

pub fn chebyshev_weight(x: &[f64]) -> f64 {
    x.iter()
        .map(|&v| {
            let v = v.clamp(EPS, 1.0 - EPS);
            (v * (1.0 - v)).sqrt()
        })
        .product()
}

pub fn weights(scheme: WeightScheme, pts: &PointSet) -> Vec<f64> {
    match scheme {
        WeightScheme::Uniform => vec![1.0; pts.len()],
        WeightScheme::ChebyshevInverseDensity => pts.iter().map(chebyshev_weight).collect(),
    }
}

pub fn build_design(pts: &PointSet, degrees: &DegreeSet, w: &[f64]) -> Result<Mat<f64>> {
    build_design_capped(pts.as_slice(), degrees, w, DEFAULT_MATRIX_CAP)
}

/// `points` is row-major with `degrees.dim()` columns.
pub fn build_design_capped(
    points: &[f64],
    degrees: &DegreeSet,
    w: &[f64],
    cap: usize,
) -> Result<Mat<f64>> {
    let n = points.len() / degrees.dim();
    assert_eq!(w.len(), n, "one weight per point");
    let elems = n as u128 * degrees.len() as u128;
    if elems > cap as u128 {
        return Err(Error::Size {
            what: "design matrix",
            size: elems,
            cap: cap as u128,
        });
    }
    let scale: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let mut m = Mat::<f64>::zeros(n, degrees.len());
    degrees.fill_basis_rows(points, Some(&scale), m.as_mut());
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rank: usize,
    pub rank_deficient: bool,
    /// whether the column-pivoted fallback was needed
    pub pivoted: bool,
    /// `min |R_ii| / max |R_ii|` over the retained pivots
    pub diag_ratio: f64,
    /// estimated reciprocal condition number of `R`, when the unpivoted
    /// factorization was accepted
    pub rcond_estimate: Option<f64>,
}

/// A factored design matrix.
#[derive(Debug)]
pub struct Factorization {
    nrows: usize,
    ncols: usize,
    /// Householder vectors below the diagonal, `R` on and above
    qr: Mat<f64>,
    hcoeff: Mat<f64>,
    /// column `j` of the pivoted matrix is column `perm[j]` of the input
    perm: Option<Vec<usize>>,
    /// QR of `[R11 R12]^T` when rank deficient
    cod: Option<(Mat<f64>, Mat<f64>)>,
    diagnostics: Diagnostics,
}

/// Solutions for a block of right-hand sides.
#[derive(Debug, Clone)]
pub struct Solution {
    /// `ncols x r`
    pub coefficients: Mat<f64>,
    /// `||M z - y||_2` per column
    pub residual_norms: Vec<f64>,
}

fn check_finite(what: &str, m: MatRef<'_, f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite(format!(
                    "{what} entry ({i}, {j}) is {}",
                    m[(i, j)]
                )));
            }
        }
    }
    Ok(())
}

impl Factorization {
    /// Factors the matrix produced by `build`, calling it a second time if
    /// the pivoted fallback is needed.
    pub fn new_with(build: impl Fn() -> Result<Mat<f64>>) -> Result<Self> {
        let a = build()?;
        check_finite("design", a.as_ref())?;
        let (m, n) = (a.nrows(), a.ncols());
        if m < n {
            return Err(Error::Domain(format!(
                "design has {m} rows but {n} columns"
            )));
        }
        if n == 0 {
            return Err(Error::Domain("design has no columns".into()));
        }
        let fast = Self::unpivoted(a);
        let rcond = rcond_estimate(fast.r());
        if rcond >= FAST_PATH_RCOND {
            let mut fast = fast;
            fast.diagnostics.rcond_estimate = Some(rcond);
            return Ok(fast);
        }
        drop(fast);
        Ok(Self::pivoted(build()?))
    }

    /// Factors a copy of `a`.
    pub fn new(a: &Mat<f64>) -> Result<Self> {
        Self::new_with(|| Ok(a.clone()))
    }

    fn unpivoted(mut a: Mat<f64>) -> Self {
        let (m, n) = (a.nrows(), a.ncols());
        let bs = no_pivoting::factor::recommended_blocksize::<f64>(m, n);
        let mut hcoeff = Mat::<f64>::zeros(bs, n);
        let mut buf = MemBuffer::new(no_pivoting::factor::qr_in_place_scratch::<f64>(
            m,
            n,
            bs,
            Par::Seq,
            default(),
        ));
        no_pivoting::factor::qr_in_place(
            a.as_mut(),
            hcoeff.as_mut(),
            Par::Seq,
            MemStack::new(&mut buf),
            default(),
        );
        let diag_ratio = diag_ratio(a.as_ref(), n);
        Factorization {
            nrows: m,
            ncols: n,
            qr: a,
            hcoeff,
            perm: None,
            cod: None,
            diagnostics: Diagnostics {
                rank: n,
                rank_deficient: false,
                pivoted: false,
                diag_ratio,
                rcond_estimate: None,
            },
        }
    }

    fn pivoted(mut a: Mat<f64>) -> Self {
        let (m, n) = (a.nrows(), a.ncols());
        let bs = no_pivoting::factor::recommended_blocksize::<f64>(m, n);
        let mut hcoeff = Mat::<f64>::zeros(bs, n);
        let mut perm = vec![0usize; n];
        let mut perm_inv = vec![0usize; n];
        let mut buf = MemBuffer::new(col_pivoting::factor::qr_in_place_scratch::<usize, f64>(
            m,
            n,
            bs,
            Par::Seq,
            default(),
        ));
        col_pivoting::factor::qr_in_place(
            a.as_mut(),
            hcoeff.as_mut(),
            &mut perm,
            &mut perm_inv,
            Par::Seq,
            MemStack::new(&mut buf),
            default(),
        );
        let top = a[(0, 0)].abs();
        let rank = (0..n)
            .take_while(|&i| top > 0.0 && a[(i, i)].abs() > RANK_TOLERANCE * top)
            .count();
        let cod = (rank < n && rank > 0).then(|| {
            // W = [R11 R12]^T, n x rank
            let mut w = Mat::<f64>::from_fn(n, rank, |i, j| if i >= j { a[(j, i)] } else { 0.0 });
            let bs = no_pivoting::factor::recommended_blocksize::<f64>(n, rank);
            let mut hw = Mat::<f64>::zeros(bs, rank);
            let mut buf = MemBuffer::new(no_pivoting::factor::qr_in_place_scratch::<f64>(
                n,
                rank,
                bs,
                Par::Seq,
                default(),
            ));
            no_pivoting::factor::qr_in_place(
                w.as_mut(),
                hw.as_mut(),
                Par::Seq,
                MemStack::new(&mut buf),
                default(),
            );
            (w, hw)
        });
        let diag_ratio = diag_ratio(a.as_ref(), rank.max(1));
        Factorization {
            nrows: m,
            ncols: n,
            qr: a,
            hcoeff,
            perm: Some(perm),
            cod,
            diagnostics: Diagnostics {
                rank,
                rank_deficient: rank < n,
                pivoted: true,
                diag_ratio,
                rcond_estimate: None,
            },
        }
    }

    fn r(&self) -> MatRef<'_, f64> {
        self.qr.as_ref().subrows(0, self.ncols)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    /// Least-squares solutions for every column of `rhs` (`nrows x r`).
    pub fn solve(&self, rhs: MatRef<'_, f64>) -> Result<Solution> {
        assert_eq!(
            rhs.nrows(),
            self.nrows,
            "right-hand side has the wrong number of rows"
        );
        check_finite("right-hand side", rhs)?;
        let (m, n, k) = (self.nrows, self.ncols, rhs.ncols());
        let mut c = rhs.to_owned();
        let mut buf = MemBuffer::new(
            householder::apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<
                f64,
            >(m, self.hcoeff.nrows(), k),
        );
        householder::apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
            self.qr.as_ref(),
            self.hcoeff.as_ref(),
            Conj::No,
            c.as_mut(),
            Par::Seq,
            MemStack::new(&mut buf),
        );
        let rank = self.diagnostics.rank;
        let residual_norms = (0..k)
            .map(|j| (rank..m).map(|i| c[(i, j)] * c[(i, j)]).sum::<f64>().sqrt())
            .collect();

        let mut z = Mat::<f64>::zeros(n, k);
        if rank == n {
            z.copy_from(c.as_ref().subrows(0, n));
            triangular_solve::solve_upper_triangular_in_place(self.r(), z.as_mut(), Par::Seq);
        } else if let Some((w, hw)) = &self.cod {
            // [R11 R12] = T^T Z^T with W = Z T; solve T^T u = c1, then z = Z [u; 0]
            let t = w.as_ref().subrows(0, rank);
            let mut u = c.as_ref().subrows(0, rank).to_owned();
            triangular_solve::solve_lower_triangular_in_place(t.transpose(), u.as_mut(), Par::Seq);
            z.as_mut().subrows_mut(0, rank).copy_from(u.as_ref());
            let mut buf = MemBuffer::new(
                householder::apply_block_householder_sequence_on_the_left_in_place_scratch::<f64>(
                    n,
                    hw.nrows(),
                    k,
                ),
            );
            householder::apply_block_householder_sequence_on_the_left_in_place_with_conj(
                w.as_ref(),
                hw.as_ref(),
                Conj::No,
                z.as_mut(),
                Par::Seq,
                MemStack::new(&mut buf),
            );
        }
        // rank 0: the zero solution

        if let Some(perm) = &self.perm {
            let mut unpermuted = Mat::<f64>::zeros(n, k);
            for (j, &p) in perm.iter().enumerate() {
                unpermuted.row_mut(p).copy_from(z.row(j));
            }
            z = unpermuted;
        }
        Ok(Solution {
            coefficients: z,
            residual_norms,
        })
    }

    pub fn solve_vec(&self, y: &[f64]) -> Result<(Vec<f64>, f64)> {
        let sol = self.solve(MatRef::from_column_major_slice(y, y.len(), 1))?;
        let z = (0..self.ncols).map(|i| sol.coefficients[(i, 0)]).collect();
        Ok((z, sol.residual_norms[0]))
    }
}

fn diag_ratio(r: MatRef<'_, f64>, k: usize) -> f64 {
    let diag = (0..k).map(|i| r[(i, i)].abs());
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if hi > 0.0 {
        lo / hi
    } else {
        0.0
    }
}

/// `sigma_min(R) / sigma_max(R)` estimated by power and inverse iteration.
fn rcond_estimate(r: MatRef<'_, f64>) -> f64 {
    let n = r.ncols();
    if diag_ratio(r, n) < RANK_TOLERANCE {
        return 0.0;
    }
    const ITERS: usize = 12;
    let start = || Mat::<f64>::from_fn(n, 1, |i, _| 1.0 + ((i * 7919) % 17) as f64 / 17.0);
    let normalize = |v: &mut Mat<f64>| {
        let s = v.norm_l2();
        if s > 0.0 && s.is_finite() {
            *v /= faer::Scale(s);
        }
        s
    };

    let mut v = start();
    normalize(&mut v);
    let mut sigma_max = 0.0;
    for _ in 0..ITERS {
        let mut w = r * &v;
        v = r.transpose() * &w;
        sigma_max = normalize(&mut v).sqrt();
        let _ = normalize(&mut w);
    }

    let mut v = start();
    normalize(&mut v);
    let mut inv_sigma_min = 0.0;
    for _ in 0..ITERS {
        triangular_solve::solve_lower_triangular_in_place(r.transpose(), v.as_mut(), Par::Seq);
        triangular_solve::solve_upper_triangular_in_place(r, v.as_mut(), Par::Seq);
        let s = normalize(&mut v);
        if !s.is_finite() {
            return 0.0;
        }
        inv_sigma_min = s.sqrt();
    }
    if sigma_max == 0.0 || inv_sigma_min == 0.0 {
        return 0.0;
    }
    1.0 / (sigma_max * inv_sigma_min)
}

/// A fitted polynomial over `E(q, d)`.
#[derive(Debug, Clone)]
pub struct LsFit {
    pub degrees: Arc<DegreeSet>,
    pub coefficients: Vec<f64>,
    pub diagnostics: Diagnostics,
    pub residual_norm: f64,
    pub n_samples: usize,
    pub fit_seconds: f64,
}

impl LsFit {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        evaluate_ls(&self.degrees, &self.coefficients, x)
    }
}

pub fn evaluate_ls(degrees: &DegreeSet, coefficients: &[f64], x: &[f64]) -> f64 {
    degrees
        .iter()
        .zip(coefficients)
        .map(|(l, c)| c * crate::poly_space::basis_eval(l, x))
        .sum()
}

/// Everything for one `(scheme, q, d)`: the degree set, the sample points
/// and the factored weighted design.
#[derive(Debug)]
pub struct LsProblem {
    pub scheme: WeightScheme,
    pub degrees: Arc<DegreeSet>,
    pub points: PointSet,
    pub sqrt_weights: Vec<f64>,
    pub factorization: Factorization,
    pub factor_seconds: f64,
}

impl LsProblem {
    /// Draws `2 N(q, d)` points from `key` and factors the design.
    pub fn new(
        q: usize,
        d: usize,
        scheme: WeightScheme,
        key: &StreamKey,
        matrix_cap: usize,
    ) -> Result<Self> {
        let degrees = Arc::new(degree_set_capped(q, d, DEFAULT_POINT_CAP)?);
        let n = OVERSAMPLING * degrees.len();
        let elems = n as u128 * degrees.len() as u128;
        if elems > matrix_cap as u128 {
            return Err(Error::Size {
                what: "design matrix",
                size: elems,
                cap: matrix_cap as u128,
            });
        }
        let start = Instant::now();
        let points = PointSet::sample(scheme.distribution(), n, d, key);
        let w = weights(scheme, &points);
        let sqrt_weights = w.iter().map(|v| v.sqrt()).collect();
        let factorization = Factorization::new_with(|| {
            build_design_capped(points.as_slice(), &degrees, &w, matrix_cap)
        })?;
        Ok(LsProblem {
            scheme,
            degrees,
            points,
            sqrt_weights,
            factorization,
            factor_seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.points.len()
    }

    /// Fits every column of `values` (`n_samples x r`, unweighted oracle
    /// values at the sample points).
    pub fn solve_values(&self, values: MatRef<'_, f64>) -> Result<Solution> {
        let y = Mat::<f64>::from_fn(values.nrows(), values.ncols(), |i, j| {
            self.sqrt_weights[i] * values[(i, j)]
        });
        self.factorization.solve(y.as_ref())
    }
}

/// Draws `2 N(q, d)` points, samples `oracle` once per point and solves.
pub fn fit_ls(
    q: usize,
    d: usize,
    scheme: WeightScheme,
    mut oracle: impl FnMut(&[f64]) -> f64,
    key: &StreamKey,
) -> Result<LsFit> {
    let start = Instant::now();
    let problem = LsProblem::new(q, d, scheme, key, DEFAULT_MATRIX_CAP)?;
    let values: Vec<f64> = problem.points.iter().map(&mut oracle).collect();
    let sol = problem.solve_values(MatRef::from_column_major_slice(&values, values.len(), 1))?;
    Ok(LsFit {
        coefficients: (0..problem.degrees.len())
            .map(|i| sol.coefficients[(i, 0)])
            .collect(),
        degrees: problem.degrees,
        diagnostics: problem.factorization.diagnostics.clone(),
        residual_norm: sol.residual_norms[0],
        n_samples: problem.points.len(),
        fit_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::SQRT_2;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::poly_space::{basis_eval, degree_set};
    use crate::sampling::sample_uniform;

    fn random_mat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Mat<f64> {
        Mat::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Normal equations `(M^T M) z = M^T y` by Gaussian elimination.
    fn normal_equations(m: MatRef<'_, f64>, y: &[f64]) -> Vec<f64> {
        let n = m.ncols();
        let mut a = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..m.nrows()).map(|r| m[(r, i)] * m[(r, j)]).sum();
            }
            a[i][n] = (0..m.nrows()).map(|r| m[(r, i)] * y[r]).sum();
        }
        for col in 0..n {
            let p = (col..n)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, p);
            let pivot = a[col].clone();
            for (row, r) in a.iter_mut().enumerate() {
                if row != col {
                    let f = r[col] / pivot[col];
                    for (x, p) in r[col..].iter_mut().zip(&pivot[col..]) {
                        *x -= f * p;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][n] / a[i][i]).collect()
    }

    #[test]
    fn weights_by_formula() {
        let pts = sample_uniform(4, 3, &StreamKey::root(1));
        assert_eq!(weights(WeightScheme::Uniform, &pts), vec![1.0; 4]);
        assert!((chebyshev_weight(&[0.5; 3]) - 0.125).abs() < 1e-16);
        assert!((chebyshev_weight(&[0.25]) - 0.1875f64.sqrt()).abs() < 1e-16);
        assert!(chebyshev_weight(&[0.0, 1.0]) > 0.0);
    }

    #[test]
    fn small_designs() {
        let e = degree_set(2, 1).unwrap();
        let m = build_design_capped(&[0.0, 1.0], &e, &[1.0, 1.0], 100).unwrap();
        // degree order is 0, 1, 2 for E(2,1)
        assert_eq!(m[(0, 0)], 1.0);
        assert!((m[(0, 1)] + SQRT_2).abs() < 1e-15);
        assert!((m[(1, 1)] - SQRT_2).abs() < 1e-15);
        let e = degree_set(5, 3).unwrap();
        let m = build_design_capped(&[0.5; 3], &e, &[1.0], 1000).unwrap();
        for (j, l) in e.iter().enumerate() {
            if l.iter().any(|k| k % 2 == 1) {
                assert!(m[(0, j)].abs() < 1e-15);
            }
        }
        assert!(matches!(
            build_design_capped(&[0.5; 30], &e, &[1.0; 10], 100),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn hand_solved_system() {
        let s = SQRT_2;
        let m = Mat::from_fn(3, 2, |i, j| if j == 0 { 1.0 } else { [-s, 0.0, s][i] });
        let f = Factorization::new(&m).unwrap();
        let (z, res) = f.solve_vec(&[-s, 0.0, s]).unwrap();
        assert!(z[0].abs() < 1e-15 && (z[1] - 1.0).abs() < 1e-15);
        assert!(res < 1e-15);
    }

    #[test]
    fn square_and_overdetermined_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (m, n) in [(6, 6), (40, 12), (200, 37)] {
            let a = random_mat(&mut rng, m, n);
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let want = normal_equations(a.as_ref(), &y);
            let f = Factorization::new(&a).unwrap();
            assert!(!f.diagnostics().pivoted);
            let (z, _) = f.solve_vec(&y).unwrap();
            for (a, b) in z.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rank_deficient_gives_minimum_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // third column = first + second, fifth = 2 * fourth
        let base = random_mat(&mut rng, 30, 5);
        let a = Mat::from_fn(30, 5, |i, j| match j {
            2 => base[(i, 0)] + base[(i, 1)],
            4 => 2.0 * base[(i, 3)],
            _ => base[(i, j)],
        });
        let y: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = Factorization::new(&a).unwrap();
        let diag = f.diagnostics().clone();
        assert!(diag.pivoted && diag.rank_deficient);
        assert_eq!(diag.rank, 3);
        let (z, _) = f.solve_vec(&y).unwrap();
        // minimum norm solution is orthogonal to the null space
        let null = [[1.0, 1.0, -1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 2.0, -1.0]];
        for v in null {
            let dot: f64 = z.iter().zip(v).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-10, "{dot}");
        }
        // and solves the normal equations
        let r: Vec<f64> = (0..30)
            .map(|i| (0..5).map(|j| a[(i, j)] * z[j]).sum::<f64>() - y[i])
            .collect();
        for j in 0..5 {
            let g: f64 = (0..30).map(|i| a[(i, j)] * r[i]).sum();
            assert!(g.abs() < 1e-10);
        }
    }

    #[test]
    fn zero_oracle_gives_zero_fit() {
        let fit = fit_ls(5, 3, WeightScheme::Uniform, |_| 0.0, &StreamKey::root(3)).unwrap();
        assert!(fit.coefficients.iter().all(|&c| c == 0.0));
        assert_eq!(fit.residual_norm, 0.0);
        assert_eq!(fit.n_samples, 50);
        assert_eq!(fit.evaluate(&[0.2, 0.3, 0.4]), 0.0);
    }

    #[test]
    fn recovers_elements_of_e() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for scheme in [WeightScheme::Uniform, WeightScheme::ChebyshevInverseDensity] {
            let (q, d) = (5, 3);
            let e = degree_set(q, d).unwrap();
            let coef: Vec<f64> = (0..e.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = |x: &[f64]| {
                e.iter()
                    .zip(&coef)
                    .map(|(l, c)| c * basis_eval(l, x))
                    .sum::<f64>()
            };
            let fit = fit_ls(q, d, scheme, g, &StreamKey::root(5)).unwrap();
            for (a, b) in fit.coefficients.iter().zip(&coef) {
                assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut m = Mat::<f64>::identity(3, 2);
        m[(1, 1)] = f64::NAN;
        assert!(matches!(Factorization::new(&m), Err(Error::NonFinite(_))));
        let f = Factorization::new(&Mat::<f64>::identity(3, 2)).unwrap();
        assert!(matches!(
            f.solve_vec(&[1.0, f64::INFINITY, 0.0]),
            Err(Error::NonFinite(_))
        ));
    }
}
