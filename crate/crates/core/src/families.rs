//! Location families `f(x - theta)`.
//!
//! Every built-in base density is strictly positive, continuous and even.
//! Quantiles are obtained by numerically inverting the CDF (or the survival
//! function in the upper half) rather than from closed forms, so that the
//! closed forms remain available as independent checks.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Open01, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use libm::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{LabError, Result};
use crate::quad;
use crate::roots::{expand_bracket, find_root, RootOptions};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_406;

/// One-dimensional base law for the noise variate `U`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LocationFamily1D {
    Normal,
    Laplace,
    Cauchy,
    Logistic,
    StudentT { nu: f64 },
}

impl fmt::Display for LocationFamily1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocationFamily1D::StudentT { nu } => write!(f, "student_t({nu})"),
            other => f.write_str(other.name()),
        }
    }
}

impl LocationFamily1D {
    /// All built-in laws, with Student-t at `nu = 5`.
    pub fn builtins() -> [LocationFamily1D; 5] {
        [
            LocationFamily1D::Normal,
            LocationFamily1D::Laplace,
            LocationFamily1D::Cauchy,
            LocationFamily1D::Logistic,
            LocationFamily1D::StudentT { nu: 5.0 },
        ]
    }

    pub fn student_t(nu: f64) -> Result<Self> {
        let fam = LocationFamily1D::StudentT { nu };
        fam.check_params()?;
        Ok(fam)
    }

    /// Validates the law's own parameters (degrees of freedom).
    pub fn check_params(&self) -> Result<()> {
        match *self {
            LocationFamily1D::StudentT { nu } if !(nu.is_finite() && nu > 0.0) => Err(
                LabError::Domain(format!("student_t degrees of freedom must be > 0, got {nu}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LocationFamily1D::Normal => "normal",
            LocationFamily1D::Laplace => "laplace",
            LocationFamily1D::Cauchy => "cauchy",
            LocationFamily1D::Logistic => "logistic",
            LocationFamily1D::StudentT { .. } => "student_t",
        }
    }

    /// All built-in densities satisfy `f(x) = f(-x)`.
    pub fn is_symmetric(&self) -> bool {
        true
    }

    /// Log-density, written so that it is exactly even in floating point.
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            LocationFamily1D::Normal => -0.5 * x * x - LN_SQRT_2PI,
            LocationFamily1D::Laplace => -x.abs() - std::f64::consts::LN_2,
            LocationFamily1D::Cauchy => -(x * x).ln_1p() - PI.ln(),
            LocationFamily1D::Logistic => {
                let ax = x.abs();
                -ax - 2.0 * (-ax).exp().ln_1p()
            }
            LocationFamily1D::StudentT { nu } => {
                ln_gamma(0.5 * (nu + 1.0))
                    - ln_gamma(0.5 * nu)
                    - 0.5 * (nu * PI).ln()
                    - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
            }
        }
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(LabError::Input(format!("density needs a finite point, got {x}")));
        }
        Ok(self.log_density(x).exp())
    }

    pub fn shifted_density(&self, theta: f64, x: f64) -> Result<f64> {
        if !theta.is_finite() {
            return Err(LabError::Input(format!("shift must be finite, got {theta}")));
        }
        self.density(x - theta)
    }

    /// Analytic upper bound `M` on the density (attained at the mode).
    pub fn density_bound(&self) -> f64 {
        match *self {
            LocationFamily1D::Normal => 1.0 / (2.0 * PI).sqrt(),
            LocationFamily1D::Laplace => 0.5,
            LocationFamily1D::Cauchy => 1.0 / PI,
            LocationFamily1D::Logistic => 0.25,
            LocationFamily1D::StudentT { .. } => self.log_density(0.0).exp(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match *self {
            LocationFamily1D::Normal => 0.5 * erfc(-x / std::f64::consts::SQRT_2),
            LocationFamily1D::Laplace => {
                if x < 0.0 {
                    0.5 * x.exp()
                } else {
                    1.0 - 0.5 * (-x).exp()
                }
            }
            LocationFamily1D::Cauchy => {
                if x < 0.0 {
                    (-1.0 / x).atan() / PI
                } else {
                    0.5 + x.atan() / PI
                }
            }
            LocationFamily1D::Logistic => 1.0 / (1.0 + (-x).exp()),
            LocationFamily1D::StudentT { nu } => {
                if x.is_infinite() {
                    return if x > 0.0 { 1.0 } else { 0.0 };
                }
                let tail = 0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + x * x));
                if x < 0.0 {
                    tail
                } else {
                    1.0 - tail
                }
            }
        }
    }

    /// Survival function `1 - cdf(x)`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        // all built-ins are even
        self.cdf(-x)
    }

    /// `P(lo < U < hi)` without cancellation in either tail.
    pub fn interval_prob(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        if hi <= 0.0 {
            self.cdf(hi) - self.cdf(lo)
        } else if lo >= 0.0 {
            self.sf(lo) - self.sf(hi)
        } else {
            1.0 - self.cdf(lo) - self.sf(hi)
        }
    }

    /// Quantile by bracketed root finding on the CDF (lower half) or the
    /// survival function (upper half).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(LabError::Domain(format!(
                "quantile level must lie in (0, 1), got {p}"
            )));
        }
        if p == 0.5 {
            return Ok(0.0);
        }
        let target = p.min(1.0 - p);
        let lower = |t: f64| self.cdf(t) - target;
        let upper = |t: f64| target - self.sf(t);
        let opts = RootOptions::default();
        let root = if p < 0.5 {
            let (lo, hi) = expand_bracket(&lower, -1.0, 1.0, 200)?;
            find_root(lower, lo, hi, opts)?
        } else {
            let (lo, hi) = expand_bracket(&upper, -1.0, 1.0, 200)?;
            find_root(upper, lo, hi, opts)?
        };
        Ok(root)
    }

    /// One draw of `U`.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LocationFamily1D::Normal => StandardNormal.sample(rng),
            LocationFamily1D::Laplace => {
                let u: f64 = Open01.sample(rng);
                if u < 0.5 {
                    (2.0 * u).ln()
                } else {
                    -(2.0 * (1.0 - u)).ln()
                }
            }
            LocationFamily1D::Cauchy => Cauchy::new(0.0, 1.0)
                .expect("unit Cauchy is valid")
                .sample(rng),
            LocationFamily1D::Logistic => {
                let u: f64 = Open01.sample(rng);
                (u / (1.0 - u)).ln()
            }
            LocationFamily1D::StudentT { nu } => StudentT::new(nu)
                .expect("degrees of freedom validated at construction")
                .sample(rng),
        }
    }

    /// `n` iid draws of `U + theta`. `n = 0` yields an empty vector.
    pub fn sample<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R, n: usize) -> Result<Vec<f64>> {
        if !theta.is_finite() {
            return Err(LabError::Input(format!("shift must be finite, got {theta}")));
        }
        Ok((0..n).map(|_| self.sample_noise(rng) + theta).collect())
    }

    /// Grid and quadrature checks of the family's structural invariants.
    pub fn validate(&self) -> Result<()> {
        self.check_params()?;
        let bound = self.density_bound();
        let mut prev_cdf = 0.0;
        for i in -2000..=2000 {
            let x = i as f64 * 0.01;
            let d = self.density(x)?;
            if !(d > 0.0 && d.is_finite()) {
                return Err(LabError::Numerical(format!(
                    "{self}: density not strictly positive at {x}"
                )));
            }
            if d > bound * (1.0 + 1e-12) {
                return Err(LabError::Numerical(format!(
                    "{self}: density {d} exceeds bound {bound} at {x}"
                )));
            }
            let c = self.cdf(x);
            if c < prev_cdf {
                return Err(LabError::Numerical(format!("{self}: cdf decreases at {x}")));
            }
            prev_cdf = c;
        }
        let mass = quad::integrate_real_line(|x| self.log_density(x).exp(), 0.0, 1e-12)?;
        if (mass - 1.0).abs() > 1e-8 {
            return Err(LabError::Numerical(format!(
                "{self}: density integrates to {mass}"
            )));
        }
        if self.cdf(-1e12) > 1e-6 || self.cdf(1e12) < 1.0 - 1e-6 {
            return Err(LabError::Numerical(format!("{self}: cdf limits wrong")));
        }
        Ok(())
    }
}

/// Standard `d`-dimensional Gaussian noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaussianFamilyD {
    dim: usize,
}

impl GaussianFamilyD {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::Domain("dimension must be at least 1".into()));
        }
        Ok(GaussianFamilyD { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `n` iid draws of `U + theta` with `U ~ N(0, I_d)`.
    pub fn sample<R: Rng + ?Sized>(&self, theta: &Shift, rng: &mut R, n: usize) -> Result<Vec<Vec<f64>>> {
        if theta.dim() != self.dim {
            return Err(LabError::Input(format!(
                "shift has dimension {}, family has {}",
                theta.dim(),
                self.dim
            )));
        }
        Ok((0..n)
            .map(|_| {
                theta
                    .as_slice()
                    .iter()
                    .map(|t| {
                        let u: f64 = StandardNormal.sample(rng);
                        t + u
                    })
                    .collect()
            })
            .collect())
    }
}

/// Location parameter `theta`, scalar or vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Shift(Vec<f64>);

impl TryFrom<Vec<f64>> for Shift {
    type Error = LabError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Shift::vector(v)
    }
}

impl From<Shift> for Vec<f64> {
    fn from(s: Shift) -> Vec<f64> {
        s.0
    }
}

impl Shift {
    pub fn scalar(theta: f64) -> Self {
        Shift(vec![theta])
    }

    pub fn vector(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(LabError::Input("shift needs at least one component".into()));
        }
        if let Some(bad) = components.iter().find(|c| !c.is_finite()) {
            return Err(LabError::Input(format!("shift component {bad} is not finite")));
        }
        Ok(Shift(components))
    }

    pub fn zero(dim: usize) -> Self {
        Shift(vec![0.0; dim.max(1)])
    }

    /// `r * e_axis` in `dim` dimensions.
    pub fn axis(dim: usize, axis: usize, r: f64) -> Self {
        let mut v = vec![0.0; dim.max(1)];
        v[axis] = r;
        Shift(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, r: f64) -> Shift {
        Shift(self.0.iter().map(|x| x * r).collect())
    }

    pub fn neg(&self) -> Shift {
        self.scaled(-1.0)
    }

    /// Unit vector in the same direction.
    pub fn normalized(&self) -> Result<Shift> {
        let n = self.norm();
        if n == 0.0 {
            return Err(LabError::Input("cannot normalize a zero shift".into()));
        }
        Ok(self.scaled(1.0 / n))
    }
}

impl fmt::Display for Shift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            write!(f, "{}", self.0[0])
        } else {
            write!(f, "{:?}", self.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::block_rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gaussian_density_values() {
        let n = LocationFamily1D::Normal;
        assert_abs_diff_eq!(n.density(0.0).unwrap(), 0.398_942_3, epsilon = 1e-7);
        assert_abs_diff_eq!(n.shifted_density(1.0, 1.0).unwrap(), 0.398_942_3, epsilon = 1e-7);
        assert_abs_diff_eq!(n.shifted_density(1.0, 0.0).unwrap(), 0.241_970_7, epsilon = 1e-7);
        for x in [0.3, 1.7, 4.2, 11.0] {
            assert_eq!(n.density(x).unwrap(), n.density(-x).unwrap());
        }
    }

    #[test]
    fn laplace_peak_is_one_half() {
        assert_abs_diff_eq!(LocationFamily1D::Laplace.density(0.0).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_shift_matches_density() {
        for fam in LocationFamily1D::builtins() {
            for x in [-3.0, -0.1, 0.0, 2.5] {
                assert_eq!(fam.shifted_density(0.0, x).unwrap(), fam.density(x).unwrap());
            }
        }
    }

    #[test]
    fn non_finite_points_are_input_errors() {
        let n = LocationFamily1D::Normal;
        assert!(matches!(n.density(f64::NAN), Err(LabError::Input(_))));
        assert!(matches!(n.density(f64::INFINITY), Err(LabError::Input(_))));
        assert!(matches!(n.shifted_density(f64::NAN, 0.0), Err(LabError::Input(_))));
    }

    #[test]
    fn normal_quantiles() {
        // reference z_{0.95} from a high-precision normal quantile routine
        let z = LocationFamily1D::Normal.quantile(0.95).unwrap();
        assert_abs_diff_eq!(z, 1.644_853_626_951_472_2, epsilon = 1e-12);
        let zl = LocationFamily1D::Normal.quantile(0.05).unwrap();
        assert_abs_diff_eq!(zl, -1.644_853_626_951_472_2, epsilon = 1e-12);
    }

    #[test]
    fn quantiles_match_closed_forms() {
        for p in [0.001f64, 0.05, 0.3, 0.77, 0.95, 0.9999] {
            let lap = if p < 0.5 { (2.0 * p).ln() } else { -(2.0 * (1.0 - p)).ln() };
            assert_abs_diff_eq!(LocationFamily1D::Laplace.quantile(p).unwrap(), lap, epsilon = 1e-10);
            let logi = (p / (1.0 - p)).ln();
            assert_abs_diff_eq!(LocationFamily1D::Logistic.quantile(p).unwrap(), logi, epsilon = 1e-10);
            let cau = (PI * (p - 0.5)).tan();
            let got = LocationFamily1D::Cauchy.quantile(p).unwrap();
            assert!((got - cau).abs() <= 1e-10 * cau.abs().max(1.0), "{p}: {got} vs {cau}");
        }
        // scipy.stats.t.ppf(0.95, 5)
        let t5 = LocationFamily1D::StudentT { nu: 5.0 }.quantile(0.95).unwrap();
        assert_abs_diff_eq!(t5, 2.015_048_373_333_023, epsilon = 1e-10);
    }

    #[test]
    fn quantile_domain_errors() {
        for p in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(
                LocationFamily1D::Normal.quantile(p),
                Err(LabError::Domain(_))
            ));
        }
    }

    #[test]
    fn quantile_inverts_cdf_on_grid() {
        for fam in LocationFamily1D::builtins() {
            for i in -50..=50 {
                let t = i as f64 * 0.1;
                let p = fam.cdf(t);
                let back = fam.quantile(p).unwrap();
                assert!((back - t).abs() < 1e-8, "{fam}: t={t} back={back}");
                assert!((fam.cdf(back) - p).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn symmetric_quantiles() {
        for fam in LocationFamily1D::builtins() {
            for p in [0.01, 0.05, 0.2, 0.4] {
                let lo = fam.quantile(p).unwrap();
                let hi = fam.quantile(1.0 - p).unwrap();
                assert!((lo + hi).abs() < 1e-8, "{fam} p={p}");
            }
        }
    }

    #[test]
    fn builtins_validate() {
        for fam in LocationFamily1D::builtins() {
            fam.validate().unwrap();
        }
        LocationFamily1D::StudentT { nu: 1.5 }.validate().unwrap();
        assert!(LocationFamily1D::student_t(0.0).is_err());
    }

    #[test]
    fn shifted_densities_integrate_to_one() {
        for fam in LocationFamily1D::builtins() {
            for theta in [-3.0, -0.5, 0.0, 1.0, 4.0] {
                let mass = quad::integrate_real_line(
                    |x| fam.shifted_density(theta, x).unwrap(),
                    theta,
                    1e-12,
                )
                .unwrap();
                assert!((mass - 1.0).abs() < 1e-8, "{fam} theta={theta}: {mass}");
            }
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let fam = LocationFamily1D::Normal;
        let a = fam.sample(0.0, &mut block_rng(11, 0), 5).unwrap();
        let b = fam.sample(0.0, &mut block_rng(11, 0), 5).unwrap();
        assert_eq!(a, b);
        assert!(fam.sample(0.0, &mut block_rng(11, 0), 0).unwrap().is_empty());
    }

    #[test]
    fn gaussian_d_sampling_checks_dimension() {
        let g = GaussianFamilyD::new(3).unwrap();
        let mut rng = block_rng(1, 0);
        assert!(g.sample(&Shift::zero(2), &mut rng, 4).is_err());
        let xs = g.sample(&Shift::axis(3, 1, 5.0), &mut rng, 4).unwrap();
        assert_eq!(xs.len(), 4);
        assert!(xs.iter().all(|x| x.len() == 3));
        assert!(GaussianFamilyD::new(0).is_err());
    }

    #[test]
    fn shift_rejects_non_finite() {
        assert!(Shift::vector(vec![1.0, f64::NAN]).is_err());
        assert!(Shift::vector(vec![]).is_err());
        let s = Shift::try_from(vec![3.0, 4.0]).unwrap();
        assert_eq!(s.norm(), 5.0);
    }
}
