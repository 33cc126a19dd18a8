//! The benchmark protocol: fit every method to `Q` random instances of each
//! family, measure errors on shared uniform test points, keep the worst
//! case over instances and write one CSV row per (method, family, d, q).
//!
//! All randomness is keyed:
//!
//! | stream            | key path                                   |
//! |-------------------|--------------------------------------------|
//! | test points       | `test_points / q / d`                      |
//! | instance params   | `instance / family / d / instance`         |
//! | LS sample points  | `ls_points / method / q / d`               |
//! | noise draws       | `noise / method / q / d / instance`        |
//!
//! so results do not depend on the order of work or the thread count.
//!
//! Approximants are evaluated in the Chebyshev basis of `E(q, d)`: the
//! least-squares fits are already in that form and Smolyak interpolants are
//! converted exactly (see [`SmolyakScheme::chebyshev_coefficients`]). The
//! test points are processed in blocks; for each block the basis rows are
//! built once and multiplied by the coefficient matrix of all instances.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use faer::linalg::matmul::matmul;
use faer::reborrow::ReborrowMut;
use faer::{Accum, Mat, MatRef, Par};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::least_squares::{LsProblem, WeightScheme, DEFAULT_MATRIX_CAP};
use crate::poly_space::{degree_set_capped, DegreeSet, DEFAULT_POINT_CAP};
use crate::sampling::{Distribution, PointSet, StreamKey, DEFAULT_ROOT_SEED};
use crate::sparse_grid::{count_points, SmolyakScheme};
use crate::test_functions::{
    generate_instance, Family, FunctionInstance, NoiseOracle, DEFAULT_NOISE_SIGMA,
};

pub const CSV_HEADER: [&str; 15] = [
    "method",
    "family",
    "d",
    "q",
    "scale",
    "n_samples",
    "n_basis",
    "Q",
    "M_test",
    "e_max_wc",
    "e_mean_wc",
    "fit_seconds",
    "eval_seconds",
    "rank_deficient_count",
    "root_seed",
];

/// Basis-row elements per evaluation block.
const BLOCK_ELEMS: usize = 1 << 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Smolyak,
    LsUniform,
    LsChebyshev,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Smolyak, Method::LsUniform, Method::LsChebyshev];

    pub fn name(self) -> &'static str {
        match self {
            Method::Smolyak => "smolyak",
            Method::LsUniform => "ls_uniform",
            Method::LsChebyshev => "ls_chebyshev",
        }
    }

    fn id(self) -> u64 {
        self as u64
    }

    pub fn weight_scheme(self) -> Option<WeightScheme> {
        match self {
            Method::Smolyak => None,
            Method::LsUniform => Some(WeightScheme::Uniform),
            Method::LsChebyshev => Some(WeightScheme::ChebyshevInverseDensity),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "smolyak" | "sa" => Ok(Method::Smolyak),
            "ls_uniform" | "ls" => Ok(Method::LsUniform),
            "ls_chebyshev" | "wls" => Ok(Method::LsChebyshev),
            _ => Err(Error::Domain(format!("unknown method {s:?}"))),
        }
    }
}

/// Keeps scale `k` in dimension `d` only if `k <= base - floor(d / per)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleLimit {
    pub base: usize,
    pub per: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestPoints {
    /// `N(q, d)` points for `d <= 10`, `100 N(d+2, d)` beyond.
    Standard,
    Count(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub methods: Vec<Method>,
    pub families: Vec<Family>,
    pub dims: Vec<usize>,
    pub scales: Vec<usize>,
    pub scale_limit: Option<ScaleLimit>,
    /// instances per family, `Q`
    pub instances: usize,
    pub root_seed: u64,
    pub noise_sigma: f64,
    pub test_points: TestPoints,
    pub test_distribution: Distribution,
    pub point_cap: usize,
    pub matrix_cap: usize,
    /// when off, timing columns are written as 0 so reruns are byte-identical
    pub timings: bool,
    /// worker threads, 0 for the rayon default
    pub threads: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            methods: Method::ALL.to_vec(),
            families: Family::PARAMETRIC.to_vec(),
            dims: Vec::new(),
            scales: Vec::new(),
            scale_limit: None,
            instances: 50,
            root_seed: DEFAULT_ROOT_SEED,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            test_points: TestPoints::Standard,
            test_distribution: Distribution::Uniform,
            point_cap: DEFAULT_POINT_CAP,
            matrix_cap: DEFAULT_MATRIX_CAP,
            timings: true,
            threads: 0,
            output_dir: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Domain(msg.to_owned()));
        if self.methods.is_empty() {
            return fail("no methods selected");
        }
        if self.families.is_empty() {
            return fail("no families selected");
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return fail("dimensions must be given and at least 1");
        }
        if self.scales.is_empty() {
            return fail("no scales selected");
        }
        if self.instances == 0 {
            return fail("Q must be at least 1");
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return fail("noise sigma must be positive");
        }
        if let Some(limit) = self.scale_limit {
            if limit.per == 0 {
                return fail("scale limit divisor must be positive");
            }
        }
        if self.test_points == TestPoints::Count(0) {
            return fail("test point count must be positive");
        }
        Ok(())
    }

    pub fn scales_for(&self, d: usize) -> Vec<usize> {
        self.scales
            .iter()
            .copied()
            .filter(|&k| self.scale_limit.is_none_or(|l| k + d / l.per <= l.base))
            .collect()
    }
}

/// Named experiment setups.
pub fn preset(name: &str) -> Option<ExperimentSpec> {
    let base = ExperimentSpec::default();
    match name {
        "paper-low-dim" => Some(ExperimentSpec {
            dims: (1..=10).collect(),
            scales: (1..=6).collect(),
            scale_limit: Some(ScaleLimit { base: 6, per: 3 }),
            ..base
        }),
        "paper-high-dim" => Some(ExperimentSpec {
            dims: vec![10, 25, 50, 100],
            scales: vec![1, 2],
            ..base
        }),
        "paper-noise" => Some(ExperimentSpec {
            families: vec![Family::Noise],
            dims: vec![10],
            scales: vec![3, 4, 5, 6],
            ..base
        }),
        _ => None,
    }
}

pub const PRESETS: [&str; 3] = ["paper-low-dim", "paper-high-dim", "paper-noise"];

/// `M = N(q, d)` for `d <= 10`, else `100 N(d+2, d)`.
pub fn standard_test_point_count(q: usize, d: usize) -> Result<u128> {
    if d <= 10 {
        count_points(q, d)
    } else {
        count_points(d + 2, d)?
            .checked_mul(100)
            .ok_or_else(|| Error::Domain("test point count overflows u128".into()))
    }
}

pub fn test_points_key(root: &StreamKey, q: usize, d: usize) -> StreamKey {
    root.child("test_points", 0)
        .child("q", q as u64)
        .child("d", d as u64)
}

pub fn instance_key(root: &StreamKey, family: Family, d: usize, instance: u64) -> StreamKey {
    root.child("instance", 0)
        .child("family", family.id())
        .child("d", d as u64)
        .child("instance", instance)
}

pub fn ls_points_key(root: &StreamKey, method: Method, q: usize, d: usize) -> StreamKey {
    root.child("ls_points", 0)
        .child("method", method.id())
        .child("q", q as u64)
        .child("d", d as u64)
}

pub fn noise_key(root: &StreamKey, method: Method, q: usize, d: usize, instance: u64) -> StreamKey {
    root.child("noise", 0)
        .child("method", method.id())
        .child("q", q as u64)
        .child("d", d as u64)
        .child("instance", instance)
}

/// Uniform test points for `(q, d)` under the standard count rule.
pub fn test_points(q: usize, d: usize, key: &StreamKey) -> Result<PointSet> {
    let m = standard_test_point_count(q, d)?;
    if m > DEFAULT_POINT_CAP as u128 {
        return Err(Error::Size {
            what: "test point set",
            size: m,
            cap: DEFAULT_POINT_CAP as u128,
        });
    }
    Ok(PointSet::sample(Distribution::Uniform, m as usize, d, key))
}

/// Running `max |r|` and `sum r^2` over residuals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorAccumulator {
    pub max: f64,
    pub sum_sq: f64,
    pub count: usize,
    pub non_finite: usize,
}

impl ErrorAccumulator {
    pub fn push(&mut self, residual: f64) {
        if !residual.is_finite() {
            self.non_finite += 1;
            return;
        }
        self.max = self.max.max(residual.abs());
        self.sum_sq += residual * residual;
        self.count += 1;
    }

    pub fn merge(&mut self, other: &ErrorAccumulator) {
        self.max = self.max.max(other.max);
        self.sum_sq += other.sum_sq;
        self.count += other.count;
        self.non_finite += other.non_finite;
    }

    /// `(e_max, e_mean)`, or an error if any residual was not finite.
    pub fn finish(&self) -> Result<(f64, f64)> {
        if self.non_finite > 0 {
            return Err(Error::NonFinite(format!(
                "{} non-finite residuals",
                self.non_finite
            )));
        }
        if self.count == 0 {
            return Err(Error::Domain("no test points".into()));
        }
        Ok((self.max, (self.sum_sq / self.count as f64).sqrt()))
    }
}

/// `e_max = max_i |f(x_i) - A(x_i)|`, `e_mean = sqrt(mean (f(x_i) - A(x_i))^2)`.
pub fn errors(
    approx: impl Fn(&[f64]) -> f64,
    inst: &FunctionInstance,
    pts: &PointSet,
) -> Result<(f64, f64)> {
    let mut acc = ErrorAccumulator::default();
    for x in pts.iter() {
        acc.push(inst.eval(x) - approx(x));
    }
    acc.finish()
}

/// Componentwise maxima of per-instance `(e_max, e_mean)`.
pub fn worst_case(per_instance: &[(f64, f64)]) -> (f64, f64) {
    assert!(!per_instance.is_empty(), "worst case over no instances");
    per_instance
        .iter()
        .fold((0.0f64, 0.0f64), |(a, b), &(x, y)| (a.max(x), b.max(y)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub method: Method,
    pub family: Family,
    pub d: usize,
    pub q: usize,
    pub scale: usize,
    pub n_samples: usize,
    pub n_basis: usize,
    #[serde(rename = "Q")]
    pub instances: usize,
    #[serde(rename = "M_test")]
    pub m_test: usize,
    pub e_max_wc: f64,
    pub e_mean_wc: f64,
    pub fit_seconds: f64,
    pub eval_seconds: f64,
    pub rank_deficient_count: usize,
    pub root_seed: u64,
    /// SHA-256 over the key digests of the instances used
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub instance_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub method: Method,
    pub d: usize,
    pub q: usize,
    pub scale: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub method: Option<Method>,
    pub family: Option<Family>,
    pub d: usize,
    pub q: usize,
    pub scale: usize,
    pub instance: Option<u64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellInfo {
    pub d: usize,
    pub q: usize,
    pub scale: usize,
    pub m_test: usize,
    pub test_points_key: String,
    pub ls_points_keys: Vec<(Method, String)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub records: Vec<ErrorRecord>,
    pub skipped: Vec<Skipped>,
    pub failures: Vec<Failure>,
    pub cells: Vec<CellInfo>,
}

enum Setup {
    Smolyak(Arc<SmolyakScheme>),
    Ls(Box<LsProblem>),
}

struct Prepared {
    method: Method,
    setup: Setup,
    setup_seconds: f64,
}

impl Prepared {
    fn points(&self) -> &[f64] {
        match &self.setup {
            Setup::Smolyak(s) => s.grid().coords(),
            Setup::Ls(p) => p.points.as_slice(),
        }
    }

    fn n_samples(&self) -> usize {
        match &self.setup {
            Setup::Smolyak(s) => s.grid().len(),
            Setup::Ls(p) => p.n_samples(),
        }
    }
}

struct Fitted {
    method: Method,
    coefficients: Mat<f64>,
    failed: Vec<Option<String>>,
    fit_seconds: f64,
    rank_deficient: bool,
    n_samples: usize,
}

/// Runs every cell of `spec`, writing result files when `spec.output_dir`
/// is set. `progress` receives one line per finished step.
pub fn run_experiment(
    spec: &ExperimentSpec,
    progress: &mut (dyn FnMut(&str) + Send),
) -> Result<RunOutput> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker threads: {e}")))?;
    let root = StreamKey::root(spec.root_seed);
    let mut out = RunOutput::default();
    pool.install(|| -> Result<()> {
        for &d in &spec.dims {
            for k in spec.scales_for(d) {
                run_cell(spec, &root, d, k, &mut out, progress)?;
            }
        }
        Ok(())
    })?;
    if let Some(dir) = &spec.output_dir {
        write_outputs(&out, spec, dir)?;
    }
    Ok(out)
}

fn run_cell(
    spec: &ExperimentSpec,
    root: &StreamKey,
    d: usize,
    scale: usize,
    out: &mut RunOutput,
    progress: &mut (dyn FnMut(&str) + Send),
) -> Result<()> {
    let q = d + scale;
    let skip_all = |out: &mut RunOutput, reason: String| {
        for &method in &spec.methods {
            out.skipped.push(Skipped {
                method,
                d,
                q,
                scale,
                reason: reason.clone(),
            });
        }
    };
    let n_basis = count_points(q, d)?;
    if n_basis > spec.point_cap as u128 {
        skip_all(
            out,
            format!(
                "N({q},{d}) = {n_basis} exceeds the point cap {}",
                spec.point_cap
            ),
        );
        return Ok(());
    }
    let m_test = match spec.test_points {
        TestPoints::Standard => standard_test_point_count(q, d)?,
        TestPoints::Count(m) => m as u128,
    };
    if m_test > spec.point_cap as u128 {
        skip_all(
            out,
            format!(
                "{m_test} test points exceed the point cap {}",
                spec.point_cap
            ),
        );
        return Ok(());
    }
    let degrees = Arc::new(degree_set_capped(q, d, spec.point_cap)?);
    let tp_key = test_points_key(root, q, d);
    let test = PointSet::sample(spec.test_distribution, m_test as usize, d, &tp_key);

    let mut prepared = Vec::new();
    let mut ls_keys = Vec::new();
    for &method in &spec.methods {
        let start = Instant::now();
        let setup = match method.weight_scheme() {
            None => {
                SmolyakScheme::with_cap(q, d, spec.point_cap).map(|s| Setup::Smolyak(Arc::new(s)))
            }
            Some(scheme) => {
                let key = ls_points_key(root, method, q, d);
                ls_keys.push((method, key.digest()));
                LsProblem::new(q, d, scheme, &key, spec.matrix_cap).map(|p| Setup::Ls(Box::new(p)))
            }
        };
        match setup {
            Ok(setup) => {
                prepared.push(Prepared {
                    method,
                    setup,
                    setup_seconds: start.elapsed().as_secs_f64(),
                });
                progress(&format!("d={d} q={q}: {method} ready"));
            }
            Err(Error::Size { what, size, cap }) => {
                let reason = format!("{what} of size {size} exceeds the cap of {cap}");
                progress(&format!("d={d} q={q}: {method} skipped, {reason}"));
                out.skipped.push(Skipped {
                    method,
                    d,
                    q,
                    scale,
                    reason,
                });
            }
            Err(e) => {
                progress(&format!("d={d} q={q}: {method} failed, {e}"));
                out.failures.push(Failure {
                    method: Some(method),
                    family: None,
                    d,
                    q,
                    scale,
                    instance: None,
                    error: e.to_string(),
                });
            }
        }
    }
    out.cells.push(CellInfo {
        d,
        q,
        scale,
        m_test: m_test as usize,
        test_points_key: tp_key.digest(),
        ls_points_keys: ls_keys,
    });

    for &family in &spec.families {
        let instances: Vec<FunctionInstance> = (0..spec.instances as u64)
            .map(|j| generate_instance(family, d, j, &instance_key(root, family, d, j)))
            .collect::<Result<_>>()?;
        let digest = {
            let mut h = Sha256::new();
            for inst in &instances {
                h.update(inst.key.digest().as_bytes());
            }
            h.finalize()
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect::<String>()
        };
        let mut fitted = Vec::new();
        for p in &prepared {
            match fit_method(spec, root, p, &degrees, &instances, q, d) {
                Ok(f) => fitted.push(f),
                Err(e) => out.failures.push(Failure {
                    method: Some(p.method),
                    family: Some(family),
                    d,
                    q,
                    scale,
                    instance: None,
                    error: e.to_string(),
                }),
            }
        }
        let (accs, eval_seconds) = evaluate_block_wise(&degrees, &test, &instances, &fitted);
        for (f, (acc, secs)) in fitted.iter().zip(accs.iter().zip(&eval_seconds)) {
            let mut per_instance = Vec::new();
            for (j, a) in acc.iter().enumerate() {
                let result = match &f.failed[j] {
                    Some(msg) => Err(Error::Oracle(msg.clone())),
                    None => a.finish(),
                };
                match result {
                    Ok(e) => per_instance.push(e),
                    Err(e) => out.failures.push(Failure {
                        method: Some(f.method),
                        family: Some(family),
                        d,
                        q,
                        scale,
                        instance: Some(j as u64),
                        error: e.to_string(),
                    }),
                }
            }
            if per_instance.is_empty() {
                continue;
            }
            let (e_max_wc, e_mean_wc) = worst_case(&per_instance);
            out.records.push(ErrorRecord {
                method: f.method,
                family,
                d,
                q,
                scale,
                n_samples: f.n_samples,
                n_basis: degrees.len(),
                instances: spec.instances,
                m_test: m_test as usize,
                e_max_wc,
                e_mean_wc,
                fit_seconds: if spec.timings { f.fit_seconds } else { 0.0 },
                eval_seconds: if spec.timings { *secs } else { 0.0 },
                rank_deficient_count: if f.rank_deficient {
                    per_instance.len()
                } else {
                    0
                },
                root_seed: spec.root_seed,
                instance_digest: digest.clone(),
            });
            progress(&format!(
                "d={d} q={q} {family} {}: e_max_wc={e_max_wc:.3e} e_mean_wc={e_mean_wc:.3e}",
                f.method
            ));
        }
    }
    Ok(())
}

fn fit_method(
    spec: &ExperimentSpec,
    root: &StreamKey,
    p: &Prepared,
    degrees: &DegreeSet,
    instances: &[FunctionInstance],
    q: usize,
    d: usize,
) -> Result<Fitted> {
    let start = Instant::now();
    let points = p.points();
    let n = p.n_samples();
    let columns: Vec<std::result::Result<Vec<f64>, String>> = instances
        .par_iter()
        .map(|inst| -> std::result::Result<Vec<f64>, String> {
            let values: Vec<f64> = if inst.family == Family::Noise {
                let mut oracle = NoiseOracle::new(
                    spec.noise_sigma,
                    &noise_key(root, p.method, q, d, inst.instance_id),
                )
                .map_err(|e| e.to_string())?;
                points.chunks_exact(d).map(|x| oracle.sample(x)).collect()
            } else {
                points
                    .chunks_exact(d)
                    .map(|x| inst.try_eval(x))
                    .collect::<Result<_>>()
                    .map_err(|e| e.to_string())?
            };
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(format!("oracle returned {} at sample {i}", values[i]));
            }
            Ok(values)
        })
        .collect();
    let failed: Vec<Option<String>> = columns.iter().map(|c| c.as_ref().err().cloned()).collect();
    let values = Mat::<f64>::from_fn(n, instances.len(), |i, j| {
        columns[j].as_ref().map_or(0.0, |c| c[i])
    });
    drop(columns);
    let (coefficients, rank_deficient) = match &p.setup {
        Setup::Smolyak(scheme) => (
            scheme.chebyshev_coefficients(degrees, values.as_ref()),
            false,
        ),
        Setup::Ls(problem) => {
            let sol = problem.solve_values(values.as_ref())?;
            (
                sol.coefficients,
                problem.factorization.diagnostics().rank_deficient,
            )
        }
    };
    Ok(Fitted {
        method: p.method,
        coefficients,
        failed,
        fit_seconds: p.setup_seconds + start.elapsed().as_secs_f64(),
        rank_deficient,
        n_samples: n,
    })
}

/// Per method, per instance error accumulators and per-method seconds.
fn evaluate_block_wise(
    degrees: &DegreeSet,
    test: &PointSet,
    instances: &[FunctionInstance],
    fitted: &[Fitted],
) -> (Vec<Vec<ErrorAccumulator>>, Vec<f64>) {
    let d = test.dim();
    let m = test.len();
    let rows = (BLOCK_ELEMS / degrees.len().max(1)).clamp(1, 4096);
    let blocks: Vec<(usize, usize)> = (0..m)
        .step_by(rows)
        .map(|s| (s, (s + rows).min(m)))
        .collect();
    let partials: Vec<(Vec<Vec<ErrorAccumulator>>, Vec<f64>)> = blocks
        .par_iter()
        .map_init(
            // one basis buffer per worker, fully overwritten for every block
            || Mat::<f64>::zeros(degrees.len(), rows.min(m)),
            |buffer, &(lo, hi)| {
                let pts = &test.as_slice()[lo * d..hi * d];
                let r = hi - lo;
                let truth = Mat::<f64>::from_fn(r, instances.len(), |i, j| {
                    instances[j].eval(&pts[i * d..(i + 1) * d])
                });
                let start = Instant::now();
                let mut basis = buffer.as_mut().subcols_mut(0, r);
                degrees.fill_basis_columns(pts, basis.rb_mut());
                let basis_seconds = start.elapsed().as_secs_f64();
                let mut accs = Vec::with_capacity(fitted.len());
                let mut secs = Vec::with_capacity(fitted.len());
                for f in fitted {
                    let start = Instant::now();
                    let approx = product(basis.as_ref().transpose(), f.coefficients.as_ref());
                    let mut acc = vec![ErrorAccumulator::default(); instances.len()];
                    for (j, a) in acc.iter_mut().enumerate() {
                        for i in 0..r {
                            a.push(truth[(i, j)] - approx[(i, j)]);
                        }
                    }
                    secs.push(basis_seconds + start.elapsed().as_secs_f64());
                    accs.push(acc);
                }
                (accs, secs)
            },
        )
        .collect();
    let mut accs = vec![vec![ErrorAccumulator::default(); instances.len()]; fitted.len()];
    let mut secs = vec![0.0; fitted.len()];
    for (block_accs, block_secs) in &partials {
        for (k, a) in block_accs.iter().enumerate() {
            for (total, part) in accs[k].iter_mut().zip(a) {
                total.merge(part);
            }
            secs[k] += block_secs[k];
        }
    }
    (accs, secs)
}

fn product(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut c = Mat::<f64>::zeros(a.nrows(), b.ncols());
    matmul(c.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    c
}

/// Shortest round-trip decimal; scientific notation outside `[1e-4, 1e16)`.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        "0".to_owned()
    } else if (1e-4..1e16).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_csv<W: Write>(records: &[ErrorRecord], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.method.name().to_owned(),
            r.family.name().to_owned(),
            r.d.to_string(),
            r.q.to_string(),
            r.scale.to_string(),
            r.n_samples.to_string(),
            r.n_basis.to_string(),
            r.instances.to_string(),
            r.m_test.to_string(),
            format_float(r.e_max_wc),
            format_float(r.e_mean_wc),
            format_float(r.fit_seconds),
            format_float(r.eval_seconds),
            r.rank_deficient_count.to_string(),
            r.root_seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a results CSV, checking the header.
pub fn read_csv<R: Read>(r: R) -> Result<Vec<ErrorRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Domain(format!(
            "unexpected CSV header: {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

const FAILURES_HEADER: [&str; 7] = ["method", "family", "d", "q", "scale", "instance", "error"];

fn write_failures<W: Write>(failures: &[Failure], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(FAILURES_HEADER)?;
    for f in failures {
        w.write_record([
            f.method.map_or(String::new(), |m| m.name().to_owned()),
            f.family.map_or(String::new(), |m| m.name().to_owned()),
            f.d.to_string(),
            f.q.to_string(),
            f.scale.to_string(),
            f.instance.map_or(String::new(), |j| j.to_string()),
            f.error.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    software: &'static str,
    version: &'static str,
    root_seed: u64,
    timestamp_unix: u64,
    spec: &'a ExperimentSpec,
    records: usize,
    cells: &'a [CellInfo],
    skipped: &'a [Skipped],
    failures: &'a [Failure],
    instance_digests: Vec<(Method, Family, usize, usize, &'a str)>,
}

pub const RESULTS_FILE: &str = "results.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `results.csv`, `failures.csv` and `manifest.json` into `dir`.
pub fn write_outputs(out: &RunOutput, spec: &ExperimentSpec, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(
        &out.records,
        BufWriter::new(File::create(dir.join(RESULTS_FILE))?),
    )?;
    write_failures(
        &out.failures,
        BufWriter::new(File::create(dir.join(FAILURES_FILE))?),
    )?;
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        root_seed: spec.root_seed,
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |t| t.as_secs()),
        spec,
        records: out.records.len(),
        cells: &out.cells,
        skipped: &out.skipped,
        failures: &out.failures,
        instance_digests: out
            .records
            .iter()
            .map(|r| (r.method, r.family, r.d, r.q, r.instance_digest.as_str()))
            .collect(),
    };
    let mut f = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
