//! Power functions `beta(theta) = E_theta[phi(X)]`.
//!
//! Monte Carlo estimates reuse the same noise draws for every `theta` under a
//! given seed (common random numbers), which makes grid comparisons between
//! tests and across shifts much less noisy than independent runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::families::{LocationFamily1D, Shift};
use crate::mc;
use crate::model::DataModel;
use crate::quad;
use crate::stat_tests::{MoranParams1D, Test};

/// Smallest Monte Carlo sample size accepted by [`power_mc`].
pub const MIN_MC_SAMPLES: usize = 1_000;

/// Separation multiplier for Monte Carlo comparisons.
pub const SE_BUFFER: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMethod {
    Mc,
    Quadrature,
    ClosedForm,
}

impl PowerMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            PowerMethod::Mc => "mc",
            PowerMethod::Quadrature => "quadrature",
            PowerMethod::ClosedForm => "closed_form",
        }
    }
}

/// Point estimate of a power value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub method: PowerMethod,
}

impl PowerEstimate {
    pub fn exact(value: f64, method: PowerMethod) -> Self {
        PowerEstimate {
            value,
            std_error: 0.0,
            n_samples: 0,
            method,
        }
    }

    /// Monte Carlo estimate with binomial-type standard error.
    pub fn from_mc(value: f64, n_samples: usize) -> Self {
        let value = value.clamp(0.0, 1.0);
        PowerEstimate {
            value,
            std_error: (value * (1.0 - value) / n_samples as f64).sqrt(),
            n_samples,
            method: PowerMethod::Mc,
        }
    }

    /// `|self - other| / sqrt(se1^2 + se2^2)` style combined error.
    pub fn combined_se(&self, other: &PowerEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

fn check_compatible(test: &Test, model: &DataModel) -> Result<()> {
    if test.input_len() != model.data_len() {
        return Err(LabError::Input(format!(
            "{} consumes {} values but {} produces {}",
            test.label(),
            test.input_len(),
            model.describe(),
            model.data_len()
        )));
    }
    if test.requires_gaussian() && !model.is_gaussian() {
        return Err(LabError::Config(format!(
            "{} is only valid for unit-variance Gaussian data, model is {}",
            test.label(),
            model.describe()
        )));
    }
    Ok(())
}

/// Monte Carlo power at `theta`. Randomized tests contribute their fractional values.
pub fn power_mc(
    test: &Test,
    model: &DataModel,
    theta: &Shift,
    n_samples: usize,
    seed: u64,
) -> Result<PowerEstimate> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(LabError::Input(format!(
            "n_samples must be at least {MIN_MC_SAMPLES}, got {n_samples}"
        )));
    }
    check_compatible(test, model)?;
    model.check_shift(theta)?;
    let len = model.data_len();
    let th = theta.as_slice();
    let total = mc::seeded_sum(n_samples, seed, |rng, i| {
        let mut x = [0.0f64; 64];
        let mut heap;
        let buf: &mut [f64] = if len <= x.len() {
            &mut x[..len]
        } else {
            heap = vec![0.0; len];
            &mut heap
        };
        model.fill_noise(rng, buf);
        model.add_shift(th, buf);
        let v = test.value(buf);
        if !v.is_finite() {
            return Err(LabError::Numerical(format!(
                "{} returned {v} on sample {i} ({buf:?})",
                test.label()
            )));
        }
        Ok(v)
    })?;
    Ok(PowerEstimate::from_mc(total / n_samples as f64, n_samples))
}

/// `(1 - F1(a - t))(1 - F2(b1 - t)) + F1(a - t) F2(b2 - t)`.
pub fn power_moran_1d_closed(
    params: &MoranParams1D,
    first: &LocationFamily1D,
    second: &LocationFamily1D,
    theta: f64,
) -> PowerEstimate {
    let value = first.sf(params.a - theta) * second.sf(params.b1 - theta)
        + first.cdf(params.a - theta) * second.cdf(params.b2 - theta);
    PowerEstimate::exact(value, PowerMethod::ClosedForm)
}

/// Same power as [`power_moran_1d_closed`], but integrating the first density
/// numerically instead of using its CDF.
pub fn power_moran_1d_quadrature(
    params: &MoranParams1D,
    first: &LocationFamily1D,
    second: &LocationFamily1D,
    theta: f64,
) -> Result<PowerEstimate> {
    let f = |x: f64| first.log_density(x - theta).exp();
    let below = quad::integrate_lower(f, params.a, 1e-14)?;
    let above = quad::integrate_upper(f, params.a, 1e-14)?;
    let value = above * second.sf(params.b1 - theta) + below * second.cdf(params.b2 - theta);
    Ok(PowerEstimate::exact(value, PowerMethod::Quadrature))
}

/// Closed-form power where one is available.
pub fn closed_form_power(test: &Test, model: &DataModel, theta: &Shift) -> Option<PowerEstimate> {
    let normal = LocationFamily1D::Normal;
    match (test, model) {
        (Test::SplitRegion(p), DataModel::Pair(pair)) if theta.dim() == 1 => Some(
            power_moran_1d_closed(p, &pair.first, &pair.second, theta.as_slice()[0]),
        ),
        (
            Test::ZTwoSided {
                total_n, critical, ..
            },
            _,
        ) if model.is_gaussian() && model.shift_dim() == 1 && theta.dim() == 1 => {
            let mu = theta.as_slice()[0] * (*total_n as f64).sqrt();
            Some(PowerEstimate::exact(
                normal.sf(critical - mu) + normal.cdf(-critical - mu),
                PowerMethod::ClosedForm,
            ))
        }
        (
            Test::ZOneSided {
                total_n,
                critical,
                upper,
                ..
            },
            _,
        ) if model.is_gaussian() && model.shift_dim() == 1 && theta.dim() == 1 => {
            let mu = theta.as_slice()[0] * (*total_n as f64).sqrt();
            let v = if *upper {
                normal.sf(critical - mu)
            } else {
                normal.cdf(-critical - mu)
            };
            Some(PowerEstimate::exact(v, PowerMethod::ClosedForm))
        }
        _ => None,
    }
}

/// How [`power_curve`] evaluates each grid point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMethod {
    MonteCarlo,
    ClosedFormIfAvailable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerCurve {
    pub test_id: String,
    pub family_id: String,
    pub seed: u64,
    pub theta_grid: Vec<Shift>,
    pub estimates: Vec<PowerEstimate>,
}

pub fn power_curve(
    test: &Test,
    model: &DataModel,
    theta_grid: &[Shift],
    n_samples: usize,
    seed: u64,
    method: CurveMethod,
) -> Result<PowerCurve> {
    let estimates = theta_grid
        .par_iter()
        .enumerate()
        .map(|(i, theta)| {
            let closed = match method {
                CurveMethod::ClosedFormIfAvailable => closed_form_power(test, model, theta),
                CurveMethod::MonteCarlo => None,
            };
            match closed {
                Some(est) => Ok(est),
                None => power_mc(test, model, theta, n_samples, seed).map_err(|e| {
                    LabError::Numerical(format!("grid point {i} (theta = {theta}): {e}"))
                }),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerCurve {
        test_id: test.label(),
        family_id: model.describe(),
        seed,
        theta_grid: theta_grid.to_vec(),
        estimates,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceRow {
    pub theta: Shift,
    pub a: PowerEstimate,
    pub b: PowerEstimate,
    pub gap: f64,
    pub combined_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceReport {
    pub test_a: String,
    pub test_b: String,
    pub ge_everywhere: bool,
    pub strict_points: Vec<Shift>,
    pub gaps: Vec<f64>,
    pub rows: Vec<DominanceRow>,
}

/// Grid-resolution evidence that `test_a` weakly dominates `test_b`.
pub fn dominance_scan(
    test_a: &Test,
    test_b: &Test,
    model: &DataModel,
    theta_grid: &[Shift],
    n_samples: usize,
    seed: u64,
) -> Result<DominanceReport> {
    let curve_a = power_curve(test_a, model, theta_grid, n_samples, seed, CurveMethod::MonteCarlo)?;
    let curve_b = power_curve(test_b, model, theta_grid, n_samples, seed, CurveMethod::MonteCarlo)?;
    let rows: Vec<DominanceRow> = theta_grid
        .iter()
        .zip(curve_a.estimates.iter().zip(&curve_b.estimates))
        .map(|(theta, (a, b))| DominanceRow {
            theta: theta.clone(),
            a: *a,
            b: *b,
            gap: a.value - b.value,
            combined_se: a.combined_se(b),
        })
        .collect();
    let ge_everywhere = rows.iter().all(|r| r.gap >= -SE_BUFFER * r.combined_se);
    let strict_points = rows
        .iter()
        .filter(|r| r.gap > SE_BUFFER * r.combined_se)
        .map(|r| r.theta.clone())
        .collect();
    Ok(DominanceReport {
        test_a: test_a.label(),
        test_b: test_b.label(),
        ge_everywhere,
        strict_points,
        gaps: rows.iter().map(|r| r.gap).collect(),
        rows,
    })
}

/// `count` radii spaced evenly in log scale over `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Default number of radii per direction for regularity checks.
pub const DEFAULT_REGULARITY_RADII: usize = 25;

/// Default tolerance: power at the largest radius must exceed `1 - 0.01`.
pub const DEFAULT_REGULARITY_EPS: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityRow {
    pub direction: Shift,
    pub radius: f64,
    pub estimate: PowerEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    pub limits_to_one: bool,
    pub min_power_at_max_radius: f64,
    pub eps: f64,
    pub rows: Vec<RegularityRow>,
}

/// Power along rays `theta = r u`; passes when the outermost radius clears
/// `1 - eps` in every direction.
pub fn regularity_check(
    test: &Test,
    model: &DataModel,
    radius_grid: &[f64],
    directions: &[Shift],
    n_samples: usize,
    seed: u64,
    eps: f64,
) -> Result<RegularityReport> {
    if radius_grid.is_empty() || directions.is_empty() {
        return Err(LabError::Input("regularity check needs radii and directions".into()));
    }
    if radius_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(LabError::Input("radius grid must be strictly increasing".into()));
    }
    let units = directions
        .iter()
        .map(|d| d.normalized())
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(units.len() * radius_grid.len());
    let r_max = *radius_grid.last().expect("non-empty");
    let mut min_at_max = f64::INFINITY;
    for unit in &units {
        let grid: Vec<Shift> = radius_grid.iter().map(|&r| unit.scaled(r)).collect();
        let curve = power_curve(test, model, &grid, n_samples, seed, CurveMethod::MonteCarlo)?;
        for (&r, est) in radius_grid.iter().zip(curve.estimates) {
            if r == r_max {
                min_at_max = min_at_max.min(est.value);
            }
            rows.push(RegularityRow {
                direction: unit.clone(),
                radius: r,
                estimate: est,
            });
        }
    }
    Ok(RegularityReport {
        limits_to_one: min_at_max > 1.0 - eps,
        min_power_at_max_radius: min_at_max,
        eps,
        rows,
    })
}
