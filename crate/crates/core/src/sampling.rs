//! Keyed random streams and the two point distributions.
//!
//! Every random quantity in the benchmark is drawn from a stream named by a
//! [`StreamKey`]: a root seed plus a path of labelled integers. The key is
//! serialised, hashed with SHA-256 and the digest seeds a ChaCha20
//! generator, so a stream depends on nothing but its key. Distinct paths
//! give unrelated seeds; no state is shared between streams.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_ROOT_SEED: u64 = 0x5EED_5EED;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub root_seed: u64,
    pub path: Vec<(String, u64)>,
}

impl StreamKey {
    pub fn root(root_seed: u64) -> Self {
        StreamKey {
            root_seed,
            path: Vec::new(),
        }
    }

    /// A child key with one more path component.
    pub fn child(&self, label: &str, value: u64) -> Self {
        let mut path = self.path.clone();
        path.push((label.to_owned(), value));
        StreamKey {
            root_seed: self.root_seed,
            path,
        }
    }

    fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"hdapx-stream-v1");
        h.update(self.root_seed.to_le_bytes());
        h.update((self.path.len() as u64).to_le_bytes());
        for (label, value) in &self.path {
            h.update((label.len() as u64).to_le_bytes());
            h.update(label.as_bytes());
            h.update(value.to_le_bytes());
        }
        let mut out = [0u8; 32];
        out.copy_from_slice(&h.finalize());
        out
    }

    /// Hex SHA-256 of the key, recorded in manifests for provenance.
    pub fn digest(&self) -> String {
        self.hash().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.hash())
    }
}

impl fmt::Display for StreamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.root_seed)?;
        for (label, value) in &self.path {
            write!(f, "/{label}={value}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Uniform,
    /// Tensorized arcsine density `prod_j 1/(pi sqrt(x_j (1 - x_j)))`.
    Chebyshev,
}

/// `n` points in `[0,1]^d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<f64>,
    n: usize,
    d: usize,
    distribution: Distribution,
    key: StreamKey,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    pub fn distribution(&self) -> Distribution {
        self.distribution
    }

    pub fn key(&self) -> &StreamKey {
        &self.key
    }

    /// Draws from `distribution`; coordinates are consumed row by row from
    /// the key's stream.
    pub fn sample(distribution: Distribution, n: usize, d: usize, key: &StreamKey) -> Self {
        assert!(n >= 1 && d >= 1, "need n >= 1 and d >= 1");
        let mut rng = key.rng();
        let points = (0..n * d)
            .map(|_| {
                let u: f64 = rng.random();
                match distribution {
                    Distribution::Uniform => u,
                    Distribution::Chebyshev => arcsine_inverse_cdf(u),
                }
            })
            .collect();
        PointSet {
            points,
            n,
            d,
            distribution,
            key: key.clone(),
        }
    }
}

pub fn sample_uniform(n: usize, d: usize, key: &StreamKey) -> PointSet {
    PointSet::sample(Distribution::Uniform, n, d, key)
}

pub fn sample_chebyshev(n: usize, d: usize, key: &StreamKey) -> PointSet {
    PointSet::sample(Distribution::Chebyshev, n, d, key)
}

/// `x = sin^2(pi u / 2)`, the inverse of `F(x) = (2/pi) arcsin(sqrt x)`.
pub fn arcsine_inverse_cdf(u: f64) -> f64 {
    let s = (FRAC_PI_2 * u).sin();
    s * s
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn same_key_same_points() {
        let key = StreamKey::root(7).child("test", 3);
        assert_eq!(sample_uniform(50, 4, &key), sample_uniform(50, 4, &key));
        assert_ne!(
            sample_uniform(50, 4, &key).as_slice(),
            sample_uniform(50, 4, &key.child("x", 0)).as_slice()
        );
        assert_ne!(StreamKey::root(1).digest(), StreamKey::root(2).digest());
        assert_ne!(
            StreamKey::root(1).child("a", 1).digest(),
            StreamKey::root(1).child("b", 1).digest()
        );
    }

    #[test]
    fn inverse_cdf_fixed_points() {
        assert!((arcsine_inverse_cdf(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(arcsine_inverse_cdf(0.0), 0.0);
        assert_eq!(arcsine_inverse_cdf(1.0), 1.0);
    }

    #[test]
    fn uniform_moments_and_ks() {
        let key = StreamKey::root(DEFAULT_ROOT_SEED).child("ks", 0);
        let pts = sample_uniform(100_000, 1, &key);
        let mean = pts.as_slice().iter().sum::<f64>() / 1e5;
        assert!((mean - 0.5).abs() < 0.005);
        assert!(ks(pts.as_slice().to_vec(), |x| x) < 0.01);
    }

    #[test]
    fn chebyshev_ks_per_coordinate() {
        let cdf = |x: f64| 2.0 / PI * x.sqrt().asin();
        for d in [1, 5, 10] {
            let pts = sample_chebyshev(100_000, d, &StreamKey::root(11).child("d", d as u64));
            assert!(pts.as_slice().iter().all(|x| (0.0..=1.0).contains(x)));
            for k in 0..d {
                let col: Vec<f64> = pts.iter().map(|p| p[k]).collect();
                assert!(ks(col, cdf) < 0.01, "d={d} coordinate {k}");
            }
        }
    }
}
