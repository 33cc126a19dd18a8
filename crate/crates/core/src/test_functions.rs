//! The benchmark function families and the noise oracle.
//!
//! Every family is parametrised by `c, w` drawn uniformly from `[0,1]^d`,
//! with `c` rescaled so that `||c||_1 = d`. `w` is left as drawn.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::StreamKey;

pub const DEFAULT_NOISE_SIGMA: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    BimodalGaussian,
    Continuous,
    CornerPeak,
    Discontinuous,
    Gaussian,
    GeometricMean,
    Oscillatory,
    ProductPeak,
    RidgeProduct,
    Noise,
}

impl Family {
    /// The nine parametric families, without [`Family::Noise`].
    pub const PARAMETRIC: [Family; 9] = [
        Family::BimodalGaussian,
        Family::Continuous,
        Family::CornerPeak,
        Family::Discontinuous,
        Family::Gaussian,
        Family::GeometricMean,
        Family::Oscillatory,
        Family::ProductPeak,
        Family::RidgeProduct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::BimodalGaussian => "bimodal_gaussian",
            Family::Continuous => "continuous",
            Family::CornerPeak => "corner_peak",
            Family::Discontinuous => "discontinuous",
            Family::Gaussian => "gaussian",
            Family::GeometricMean => "geometric_mean",
            Family::Oscillatory => "oscillatory",
            Family::ProductPeak => "product_peak",
            Family::RidgeProduct => "ridge_product",
            Family::Noise => "noise",
        }
    }

    /// Stable numeric id used in stream keys.
    pub fn id(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let family = match norm.as_str() {
            "bimodal_gaussian" | "zhou" => Family::BimodalGaussian,
            "continuous" => Family::Continuous,
            "corner_peak" => Family::CornerPeak,
            "discontinuous" => Family::Discontinuous,
            "gaussian" => Family::Gaussian,
            "geometric_mean" | "morokoff_caflisch_1" | "morokoff_caflisch1" => {
                Family::GeometricMean
            }
            "oscillatory" => Family::Oscillatory,
            "product_peak" => Family::ProductPeak,
            "ridge_product" | "g_function" => Family::RidgeProduct,
            "noise" => Family::Noise,
            _ => return Err(Error::Domain(format!("unknown function family {s:?}"))),
        };
        Ok(family)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionInstance {
    pub family: Family,
    pub d: usize,
    pub c: Vec<f64>,
    pub w: Vec<f64>,
    pub instance_id: u64,
    pub key: StreamKey,
}

/// Draws `c, w ~ U[0,1]^d` from `key` and rescales `c` to `||c||_1 = d`.
/// The noise family carries no parameters.
pub fn generate_instance(
    family: Family,
    d: usize,
    instance_id: u64,
    key: &StreamKey,
) -> Result<FunctionInstance> {
    if d < 1 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let (c, w) = if family == Family::Noise {
        (Vec::new(), Vec::new())
    } else {
        let mut rng = key.rng();
        loop {
            let c: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let w: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let norm: f64 = c.iter().sum();
            if norm > 0.0 {
                break (c.iter().map(|v| v * d as f64 / norm).collect(), w);
            }
        }
    };
    Ok(FunctionInstance {
        family,
        d,
        c,
        w,
        instance_id,
        key: key.clone(),
    })
}

impl FunctionInstance {
    /// `exp(-(50/d) sum (c_i y_i)^2)`
    fn phi(&self, y: impl Iterator<Item = f64>) -> f64 {
        let s: f64 = y.zip(&self.c).map(|(v, c)| (c * v) * (c * v)).sum();
        (-(50.0 / self.d as f64) * s).exp()
    }

    fn dot_c(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.c).map(|(a, b)| a * b).sum()
    }

    /// The family's value at `x`. The noise family's ground truth is 0.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        let d = self.d as f64;
        let (c, w) = (&self.c, &self.w);
        match self.family {
            Family::BimodalGaussian => {
                self.phi(x.iter().zip(w).map(|(x, w)| x - w))
                    + self.phi(x.iter().zip(w).map(|(x, w)| x + w - 1.0))
            }
            Family::Continuous => {
                let s: f64 = x
                    .iter()
                    .zip(c)
                    .zip(w)
                    .map(|((x, c), w)| c * (x - w).abs())
                    .sum();
                (-s / d).exp()
            }
            Family::CornerPeak => (1.0 + self.dot_c(x)).powi(-(self.d as i32 + 1)),
            Family::Discontinuous => {
                if x[0] > w[0] || (self.d > 1 && x[1] > w[1]) {
                    0.0
                } else {
                    self.dot_c(x).exp()
                }
            }
            Family::Gaussian => self.phi(x.iter().zip(w).map(|(x, w)| x - w)),
            Family::GeometricMean => {
                let p: f64 = x
                    .iter()
                    .zip(c)
                    .zip(w)
                    .map(|((x, c), w)| (c * x + w).powf(1.0 / d))
                    .product();
                (1.0 + 1.0 / d).powf(d) * p
            }
            Family::Oscillatory => (2.0 * std::f64::consts::PI * w[0] + 3.0 * self.dot_c(x)).cos(),
            Family::ProductPeak => x
                .iter()
                .zip(c)
                .zip(w)
                .map(|((x, c), w)| 1.0 / (1.0 / (c * c) + (x - w) * (x - w)))
                .product(),
            Family::RidgeProduct => x
                .iter()
                .zip(c)
                .zip(w)
                .map(|((x, c), w)| ((4.0 * x - 2.0 - w).abs() + c) / (1.0 + c))
                .product(),
            Family::Noise => 0.0,
        }
    }

    /// Like [`FunctionInstance::eval`], rejecting points where the
    /// geometric mean would take a root of a negative number.
    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        if self.family == Family::GeometricMean {
            if let Some(k) = (0..self.d).find(|&k| self.c[k] * x[k] + self.w[k] < 0.0) {
                return Err(Error::Domain(format!(
                    "geometric mean factor {k} is negative"
                )));
            }
        }
        Ok(self.eval(x))
    }
}

/// Independent `N(0, sigma^2)` draws from a keyed stream. Not shareable:
/// one oracle per fit.
#[derive(Debug, Clone)]
pub struct NoiseOracle {
    rng: ChaCha20Rng,
    normal: Normal<f64>,
}

impl NoiseOracle {
    pub fn new(sigma: f64, key: &StreamKey) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "noise level must be positive, got {sigma}"
            )));
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
        Ok(NoiseOracle {
            rng: key.rng(),
            normal,
        })
    }

    /// The next draw; the point is ignored.
    pub fn sample(&mut self, _x: &[f64]) -> f64 {
        self.normal.sample(&mut self.rng)
    }
}

pub fn noise_oracle(sigma: f64, key: &StreamKey) -> Result<NoiseOracle> {
    NoiseOracle::new(sigma, key)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(family: Family, c: Vec<f64>, w: Vec<f64>) -> FunctionInstance {
        let d = c.len();
        FunctionInstance {
            family,
            d,
            c,
            w,
            instance_id: 0,
            key: StreamKey::root(0),
        }
    }

    #[test]
    fn generation_rescales_c() {
        let key = StreamKey::root(1);
        for d in [1, 2, 7, 50] {
            let inst =
                generate_instance(Family::Gaussian, d, 3, &key.child("i", d as u64)).unwrap();
            assert!((inst.c.iter().sum::<f64>() - d as f64).abs() <= 1e-12);
            assert!(inst.w.iter().all(|w| (0.0..1.0).contains(w)));
        }
        assert_eq!(
            generate_instance(Family::Oscillatory, 1, 0, &key)
                .unwrap()
                .c,
            vec![1.0]
        );
        assert_eq!(
            generate_instance(Family::ProductPeak, 4, 0, &key).unwrap(),
            generate_instance(Family::ProductPeak, 4, 0, &key).unwrap()
        );
    }

    #[test]
    fn closed_form_values() {
        let corner = instance(Family::CornerPeak, vec![0.0; 3], vec![0.5; 3]);
        assert_eq!(corner.eval(&[0.3, 0.9, 0.1]), 1.0);
        let cont = instance(Family::Continuous, vec![1.0, 2.0], vec![0.2, 0.7]);
        assert_eq!(cont.eval(&[0.2, 0.7]), 1.0);
        let disc = instance(Family::Discontinuous, vec![1.0, 1.0], vec![0.4, 0.6]);
        assert_eq!(disc.eval(&[0.5, 0.1]), 0.0);
        assert_eq!(disc.eval(&[0.1, 0.7]), 0.0);
        assert!((disc.eval(&[0.1, 0.2]) - 0.3f64.exp()).abs() < 1e-15);
        let osc = instance(Family::Oscillatory, vec![1.0, 1.0], vec![0.0, 0.3]);
        assert_eq!(osc.eval(&[0.0, 0.0]), 1.0);
        let gauss = instance(Family::Gaussian, vec![1.0, 1.0], vec![0.3, 0.6]);
        assert_eq!(gauss.eval(&[0.3, 0.6]), 1.0);
        let geo = instance(Family::GeometricMean, vec![1.0, 1.0], vec![0.0, 0.0]);
        // (1 + 1/2)^2 * sqrt(0.25 * 0.64)
        assert!((geo.eval(&[0.25, 0.64]) - 2.25 * 0.4).abs() < 1e-15);
        let peak = instance(Family::ProductPeak, vec![2.0], vec![0.5]);
        assert!((peak.eval(&[0.0]) - 1.0 / (0.25 + 0.25)).abs() < 1e-15);
        let ridge = instance(Family::RidgeProduct, vec![1.0], vec![0.0]);
        assert!((ridge.eval(&[0.5]) - 0.5).abs() < 1e-15);
        let bi = instance(Family::BimodalGaussian, vec![1.0], vec![0.5]);
        assert!((bi.eval(&[0.5]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn discontinuous_in_one_dimension() {
        let disc = instance(Family::Discontinuous, vec![1.0], vec![0.4]);
        assert_eq!(disc.eval(&[0.5]), 0.0);
        assert!((disc.eval(&[0.3]) - 0.3f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn names_and_aliases() {
        for f in Family::PARAMETRIC.into_iter().chain([Family::Noise]) {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert_eq!("Zhou".parse::<Family>().unwrap(), Family::BimodalGaussian);
        assert_eq!(
            "morokoff-caflisch-1".parse::<Family>().unwrap(),
            Family::GeometricMean
        );
        assert_eq!(
            "G-Function".parse::<Family>().unwrap(),
            Family::RidgeProduct
        );
        assert!("banana".parse::<Family>().is_err());
    }

    #[test]
    fn geometric_mean_domain() {
        let geo = instance(Family::GeometricMean, vec![1.0], vec![0.0]);
        assert!(geo.try_eval(&[-0.5]).is_err());
        assert!(geo.try_eval(&[0.5]).is_ok());
    }

    #[test]
    fn noise_moments() {
        let mut oracle = noise_oracle(DEFAULT_NOISE_SIGMA, &StreamKey::root(2)).unwrap();
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| oracle.sample(&[])).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd =
            (draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(mean.abs() < 5e-10, "{mean}");
        assert!((sd - 1e-7).abs() < 1e-9, "{sd}");
        assert!(noise_oracle(0.0, &StreamKey::root(2)).is_err());
    }
}
