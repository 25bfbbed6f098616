//! Data models: how an observation vector is generated from a shift.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::families::{GaussianFamilyD, LocationFamily1D, Shift};

/// Two independent split statistics `X_i = U_i + theta`, `theta` scalar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub first: LocationFamily1D,
    pub second: LocationFamily1D,
}

impl PairModel {
    pub fn new(first: LocationFamily1D, second: LocationFamily1D) -> Result<Self> {
        first.check_params()?;
        second.check_params()?;
        Ok(PairModel { first, second })
    }

    pub fn same(family: LocationFamily1D) -> Result<Self> {
        Self::new(family, family)
    }

    /// Joint log-likelihood `log f1(x1 - theta) + log f2(x2 - theta)`.
    pub fn log_likelihood(&self, theta: f64, x: &[f64]) -> f64 {
        self.first.log_density(x[0] - theta) + self.second.log_density(x[1] - theta)
    }
}

/// `n` iid observations from `N(theta, I_d)`, stored row-major in one vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaussianSampleModel {
    pub family: GaussianFamilyD,
    pub n: usize,
}

impl GaussianSampleModel {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(LabError::Domain("sample size must be at least 1".into()));
        }
        Ok(GaussianSampleModel {
            family: GaussianFamilyD::new(dim)?,
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }
}

/// Observation law indexed by a shift.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataModel {
    Pair(PairModel),
    GaussianSample(GaussianSampleModel),
}

impl DataModel {
    pub fn gaussian_pair() -> Self {
        DataModel::Pair(PairModel {
            first: LocationFamily1D::Normal,
            second: LocationFamily1D::Normal,
        })
    }

    /// Length of one observation vector.
    pub fn data_len(&self) -> usize {
        match self {
            DataModel::Pair(_) => 2,
            DataModel::GaussianSample(g) => g.n * g.dim(),
        }
    }

    /// Dimension of `theta`.
    pub fn shift_dim(&self) -> usize {
        match self {
            DataModel::Pair(_) => 1,
            DataModel::GaussianSample(g) => g.dim(),
        }
    }

    /// True when every coordinate is a unit-variance Gaussian observation.
    pub fn is_gaussian(&self) -> bool {
        match self {
            DataModel::Pair(p) => {
                p.first == LocationFamily1D::Normal && p.second == LocationFamily1D::Normal
            }
            DataModel::GaussianSample(_) => true,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DataModel::Pair(p) => format!("pair({}, {})", p.first, p.second),
            DataModel::GaussianSample(g) => format!("gaussian(d={}, n={})", g.dim(), g.n),
        }
    }

    pub fn check_shift(&self, theta: &Shift) -> Result<()> {
        if theta.dim() != self.shift_dim() {
            return Err(LabError::Input(format!(
                "shift {theta} has dimension {}, model {} expects {}",
                theta.dim(),
                self.describe(),
                self.shift_dim()
            )));
        }
        Ok(())
    }

    /// Fills `out` with one draw of the noise vector `U`.
    pub fn fill_noise<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            DataModel::Pair(p) => {
                out[0] = p.first.sample_noise(rng);
                out[1] = p.second.sample_noise(rng);
            }
            DataModel::GaussianSample(_) => {
                for v in out.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
            }
        }
    }

    /// Turns a noise vector into an observation under `theta`.
    pub fn add_shift(&self, theta: &[f64], x: &mut [f64]) {
        match self {
            DataModel::Pair(_) => {
                x[0] += theta[0];
                x[1] += theta[0];
            }
            DataModel::GaussianSample(_) => {
                let d = theta.len();
                for (i, v) in x.iter_mut().enumerate() {
                    *v += theta[i % d];
                }
            }
        }
    }

    /// `log l_theta(x) - log l_0(x)`.
    pub fn log_lr(&self, theta: &[f64], x: &[f64]) -> f64 {
        match self {
            DataModel::Pair(p) => p.log_likelihood(theta[0], x) - p.log_likelihood(0.0, x),
            DataModel::GaussianSample(g) => {
                // sum_i (theta . x_i - |theta|^2 / 2)
                let d = g.dim();
                let sq: f64 = theta.iter().map(|t| t * t).sum();
                let mut acc = -0.5 * sq * g.n as f64;
                for row in x.chunks_exact(d) {
                    acc += row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
                }
                acc
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::block_rng;

    #[test]
    fn gaussian_pair_log_lr_is_linear() {
        let m = DataModel::gaussian_pair();
        let x = [0.7, -1.3];
        let th = 1.5;
        let expect = th * (x[0] + x[1]) - th * th;
        assert!((m.log_lr(&[th], &x) - expect).abs() < 1e-12);
    }

    #[test]
    fn gaussian_sample_matches_pair_when_d_is_one() {
        let pair = DataModel::gaussian_pair();
        let sample = DataModel::GaussianSample(GaussianSampleModel::new(1, 2).unwrap());
        let x = [0.2, 2.5];
        assert!((pair.log_lr(&[-0.8], &x) - sample.log_lr(&[-0.8], &x)).abs() < 1e-12);
    }

    #[test]
    fn shift_is_added_per_row() {
        let m = DataModel::GaussianSample(GaussianSampleModel::new(2, 3).unwrap());
        let mut x = vec![0.0; m.data_len()];
        m.add_shift(&[1.0, -2.0], &mut x);
        assert_eq!(x, vec![1.0, -2.0, 1.0, -2.0, 1.0, -2.0]);
    }

    #[test]
    fn noise_is_seeded() {
        let m = DataModel::GaussianSample(GaussianSampleModel::new(3, 2).unwrap());
        let mut a = vec![0.0; 6];
        let mut b = vec![0.0; 6];
        m.fill_noise(&mut block_rng(5, 1), &mut a);
        m.fill_noise(&mut block_rng(5, 1), &mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn shift_dimension_is_checked() {
        let m = DataModel::gaussian_pair();
        assert!(m.check_shift(&Shift::scalar(1.0)).is_ok());
        assert!(m.check_shift(&Shift::zero(2)).is_err());
    }
}
