//! Discrete priors, mixture likelihood ratios and Neyman-Pearson machinery.
//!
//! The most powerful level-alpha test against the mixture `sum_i w_i P_theta_i`
//! rejects for large `L(x) = sum_i w_i l_theta_i(x) / l_0(x)`. This module
//! calibrates that test by simulation, cross-checks it against a brute-force
//! fractional-knapsack optimum on a cell grid, and builds the clamped blend
//! of the NP test with a base test that keeps the blend's power tending to one.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::families::Shift;
use crate::mc::{self, derive_seed};
use crate::model::{DataModel, PairModel};
use crate::power::{
    log_spaced, power_mc, regularity_check, PowerEstimate, PowerMethod, RegularityReport,
    DEFAULT_REGULARITY_EPS, DEFAULT_REGULARITY_RADII, SE_BUFFER,
};
use crate::stat_tests::{blended, moran_1d, BlendedTest, Test};

/// Root-found levels must land within this distance of alpha.
pub const LEVEL_TOL: f64 = 0.002;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorAtom {
    pub theta: Shift,
    pub weight: f64,
}

/// Finite discrete prior on the alternative `theta != 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PriorAtom>", into = "Vec<PriorAtom>")]
pub struct Prior {
    atoms: Vec<PriorAtom>,
}

impl TryFrom<Vec<PriorAtom>> for Prior {
    type Error = LabError;

    fn try_from(atoms: Vec<PriorAtom>) -> Result<Self> {
        Prior::new(atoms)
    }
}

impl From<Prior> for Vec<PriorAtom> {
    fn from(p: Prior) -> Self {
        p.atoms
    }
}

impl Prior {
    pub fn new(atoms: Vec<PriorAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(LabError::Domain("prior needs at least one atom".into()));
        }
        let dim = atoms[0].theta.dim();
        for atom in &atoms {
            if atom.theta.is_zero() {
                return Err(LabError::Domain("prior atoms must avoid theta = 0".into()));
            }
            if atom.theta.dim() != dim {
                return Err(LabError::Domain("prior atoms have mixed dimensions".into()));
            }
            if !(atom.weight > 0.0 && atom.weight.is_finite()) {
                return Err(LabError::Domain(format!(
                    "prior weights must be positive, got {}",
                    atom.weight
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LabError::Domain(format!("prior weights sum to {total}, not 1")));
        }
        Ok(Prior { atoms })
    }

    /// Point mass at `theta`.
    pub fn point(theta: Shift) -> Result<Self> {
        Prior::new(vec![PriorAtom { theta, weight: 1.0 }])
    }

    /// Equal mass on `theta` and `-theta`.
    pub fn symmetric(theta: Shift) -> Result<Self> {
        Prior::new(vec![
            PriorAtom {
                theta: theta.neg(),
                weight: 0.5,
            },
            PriorAtom { theta, weight: 0.5 },
        ])
    }

    pub fn atoms(&self) -> &[PriorAtom] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].theta.dim()
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .atoms
            .iter()
            .map(|a| format!("{}:{}", a.theta, a.weight))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// `log L(x)` with the max-shift trick over atoms.
pub fn log_likelihood_ratio(prior: &Prior, model: &DataModel, x: &[f64]) -> f64 {
    let mut terms = [0.0f64; 16];
    let mut heap;
    let buf: &mut [f64] = if prior.atoms.len() <= terms.len() {
        &mut terms[..prior.atoms.len()]
    } else {
        heap = vec![0.0; prior.atoms.len()];
        &mut heap
    };
    for (t, atom) in buf.iter_mut().zip(&prior.atoms) {
        *t = atom.weight.ln() + model.log_lr(atom.theta.as_slice(), x);
    }
    let max = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + buf.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `L(x) = sum_i w_i l_theta_i(x) / l_0(x)`.
pub fn likelihood_ratio(prior: &Prior, model: &DataModel, x: &[f64]) -> Result<f64> {
    check_prior(prior, model)?;
    if x.len() != model.data_len() {
        return Err(LabError::Input(format!(
            "observation has {} values, model expects {}",
            x.len(),
            model.data_len()
        )));
    }
    Ok(log_likelihood_ratio(prior, model, x).exp())
}

fn check_prior(prior: &Prior, model: &DataModel) -> Result<()> {
    if prior.dim() != model.shift_dim() {
        return Err(LabError::Input(format!(
            "prior lives in dimension {}, model {} in {}",
            prior.dim(),
            model.describe(),
            model.shift_dim()
        )));
    }
    Ok(())
}

/// Threshold and randomization weight of the NP test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NPCalibration {
    pub alpha: f64,
    pub c_star: f64,
    pub log_c_star: f64,
    pub tau_star: f64,
    /// Level measured on a fresh null sample.
    pub achieved_level: f64,
    pub level_std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Randomized NP test `1{L > C} + tau 1{L = C}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NpTest {
    pub prior: Prior,
    pub model: DataModel,
    pub calibration: NPCalibration,
}

impl NpTest {
    pub fn value(&self, x: &[f64]) -> f64 {
        let l = log_likelihood_ratio(&self.prior, &self.model, x);
        if l > self.calibration.log_c_star {
            1.0
        } else if l == self.calibration.log_c_star {
            self.calibration.tau_star
        } else {
            0.0
        }
    }
}

fn null_log_ratios(prior: &Prior, model: &DataModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    let len = model.data_len();
    mc::seeded_collect(n, seed, |rng, i| {
        let mut x = vec![0.0; len];
        model.fill_noise(rng, &mut x);
        let l = log_likelihood_ratio(prior, model, &x);
        if l.is_nan() || l == f64::INFINITY {
            return Err(LabError::Numerical(format!(
                "likelihood ratio is {l} on null sample {i}"
            )));
        }
        Ok(l)
    })
}

/// `(log C*, tau*)` from sorted null log-ratios.
pub fn np_threshold(sorted_logs: &[f64], alpha: f64) -> Result<(f64, f64)> {
    let n = sorted_logs.len();
    if n == 0 {
        return Err(LabError::Input("no null samples".into()));
    }
    if sorted_logs[0] == sorted_logs[n - 1] {
        return Err(LabError::TrivialTest(format!(
            "all {n} null likelihood ratios equal {}",
            sorted_logs[0].exp()
        )));
    }
    // largest value kept in the acceptance region
    let above_target = (alpha * n as f64).floor() as usize;
    let idx = n - 1 - above_target.min(n - 1);
    let log_c = sorted_logs[idx];
    let first = sorted_logs.partition_point(|&v| v < log_c);
    let past = sorted_logs.partition_point(|&v| v <= log_c);
    let p_gt = (n - past) as f64 / n as f64;
    let p_eq = (past - first) as f64 / n as f64;
    let tau = if p_eq < 1.0 / (n as f64).sqrt() {
        0.0
    } else {
        ((alpha - p_gt) / p_eq).clamp(0.0, 1.0)
    };
    Ok((log_c, tau))
}

/// Calibrates `C*` as the empirical `1 - alpha` quantile of `L` under the null.
///
/// Ties at `C*` with empirical mass below `1/sqrt(N)` are treated as a
/// continuous law (`tau* = 0`). The achieved level is re-measured on an
/// independent null sample.
pub fn calibrate_np(
    prior: &Prior,
    model: &DataModel,
    alpha: f64,
    n_samples: usize,
    seed: u64,
) -> Result<NPCalibration> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LabError::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if n_samples < crate::power::MIN_MC_SAMPLES {
        return Err(LabError::Input(format!(
            "n_samples must be at least {}, got {n_samples}",
            crate::power::MIN_MC_SAMPLES
        )));
    }
    check_prior(prior, model)?;
    let mut logs = null_log_ratios(prior, model, n_samples, derive_seed(seed, 1))?;
    logs.sort_by(f64::total_cmp);
    let (log_c, tau) = np_threshold(&logs, alpha)?;
    let mut calibration = NPCalibration {
        alpha,
        c_star: log_c.exp(),
        log_c_star: log_c,
        tau_star: tau,
        achieved_level: f64::NAN,
        level_std_error: f64::NAN,
        n_samples,
        seed,
    };
    let test = np_test(prior, model, calibration);
    let level = power_mc(&test, model, &Shift::zero(model.shift_dim()), n_samples, derive_seed(seed, 2))?;
    calibration.achieved_level = level.value;
    calibration.level_std_error = level.std_error;
    Ok(calibration)
}

pub fn np_test(prior: &Prior, model: &DataModel, calibration: NPCalibration) -> Test {
    Test::NeymanPearson(NpTest {
        prior: prior.clone(),
        model: *model,
        calibration,
    })
}

/// `sum_i w_i beta(theta_i)`, standard errors combined in quadrature.
pub fn mixture_power(
    test: &Test,
    prior: &Prior,
    model: &DataModel,
    n_samples: usize,
    seed: u64,
) -> Result<PowerEstimate> {
    check_prior(prior, model)?;
    let mut value = 0.0;
    let mut var = 0.0;
    for atom in &prior.atoms {
        let est = power_mc(test, model, &atom.theta, n_samples, seed)?;
        value += atom.weight * est.value;
        var += (atom.weight * est.std_error).powi(2);
    }
    Ok(PowerEstimate {
        value,
        std_error: var.sqrt(),
        n_samples,
        method: PowerMethod::Mc,
    })
}

/// Box `[lo, hi]^2` cut into `cells x cells` rectangles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl GridSpec {
    pub const MAX_CELLS: usize = 400;
    /// Minimum null mass the box must hold.
    pub const MIN_NULL_MASS: f64 = 1.0 - 1e-6;

    fn edges(&self) -> Vec<f64> {
        let h = (self.hi - self.lo) / self.cells as f64;
        (0..=self.cells).map(|i| self.lo + h * i as f64).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi && self.lo.is_finite() && self.hi.is_finite()) {
            return Err(LabError::Input(format!("invalid grid box [{}, {}]", self.lo, self.hi)));
        }
        if self.cells == 0 || self.cells > Self::MAX_CELLS {
            return Err(LabError::Input(format!(
                "grid needs 1..={} cells per axis, got {}",
                Self::MAX_CELLS,
                self.cells
            )));
        }
        Ok(())
    }
}

/// Result of the brute-force NP optimum on a cell grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridOracle {
    pub power: f64,
    pub level: f64,
    pub null_mass_captured: f64,
    /// Likelihood ratio of the partially filled cell.
    pub threshold_ratio: f64,
    /// Fraction of the threshold cell that is rejected.
    pub threshold_fraction: f64,
    pub cells_selected: usize,
}

struct CellMasses {
    null: Vec<f64>,
    alt: Vec<f64>,
}

fn cell_masses(prior: &Prior, pair: &PairModel, grid: &GridSpec) -> CellMasses {
    let edges = grid.edges();
    let probs = |fam: &crate::families::LocationFamily1D, shift: f64| -> Vec<f64> {
        edges
            .windows(2)
            .map(|w| fam.interval_prob(w[0] - shift, w[1] - shift))
            .collect()
    };
    let n0_1 = probs(&pair.first, 0.0);
    let n0_2 = probs(&pair.second, 0.0);
    let c = grid.cells;
    let mut null = vec![0.0; c * c];
    let mut alt = vec![0.0; c * c];
    for i in 0..c {
        for j in 0..c {
            null[i * c + j] = n0_1[i] * n0_2[j];
        }
    }
    for atom in &prior.atoms {
        let t = atom.theta.as_slice()[0];
        let a1 = probs(&pair.first, t);
        let a2 = probs(&pair.second, t);
        for i in 0..c {
            for j in 0..c {
                alt[i * c + j] += atom.weight * a1[i] * a2[j];
            }
        }
    }
    CellMasses { null, alt }
}

fn pair_model(model: &DataModel) -> Result<&PairModel> {
    match model {
        DataModel::Pair(p) => Ok(p),
        other => Err(LabError::Input(format!(
            "grid oracle needs the pair model, got {}",
            other.describe()
        ))),
    }
}

/// Greedy fractional fill of the level budget by decreasing cell likelihood ratio.
///
/// Cell probabilities are exact rectangle masses, so this is the optimum of
/// the linear program "maximize mixture power subject to level <= alpha" over
/// tests that are constant on each cell.
pub fn grid_np_oracle(prior: &Prior, model: &DataModel, grid: &GridSpec, alpha: f64) -> Result<GridOracle> {
    grid.validate()?;
    check_prior(prior, model)?;
    let pair = pair_model(model)?;
    let masses = cell_masses(prior, pair, grid);
    let captured: f64 = masses.null.iter().sum();
    if captured < GridSpec::MIN_NULL_MASS {
        return Err(LabError::BoxTooSmall {
            captured,
            required: GridSpec::MIN_NULL_MASS,
        });
    }
    let ratio = |k: usize| {
        if masses.null[k] > 0.0 {
            masses.alt[k] / masses.null[k]
        } else if masses.alt[k] > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    let mut order: Vec<usize> = (0..masses.null.len()).collect();
    order.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)).then(a.cmp(&b)));
    let mut budget = alpha;
    let mut power = 0.0;
    let mut level = 0.0;
    let mut selected = 0;
    let mut threshold_ratio = f64::INFINITY;
    let mut threshold_fraction = 1.0;
    for &k in &order {
        let (p0, p1) = (masses.null[k], masses.alt[k]);
        if p1 == 0.0 {
            break;
        }
        threshold_ratio = ratio(k);
        if p0 <= budget {
            budget -= p0;
            level += p0;
            power += p1;
            selected += 1;
        } else {
            let frac = budget / p0;
            level += budget;
            power += frac * p1;
            threshold_fraction = frac;
            selected += 1;
            break;
        }
    }
    Ok(GridOracle {
        power,
        level,
        null_mass_captured: captured,
        threshold_ratio,
        threshold_fraction,
        cells_selected: selected,
    })
}

/// Level and mixture power of a test discretized to the oracle's cells
/// (the test's value at each cell center applies to the whole cell).
pub fn grid_discretized_power(test: &Test, prior: &Prior, model: &DataModel, grid: &GridSpec) -> Result<(f64, f64)> {
    grid.validate()?;
    let pair = pair_model(model)?;
    let masses = cell_masses(prior, pair, grid);
    let h = (grid.hi - grid.lo) / grid.cells as f64;
    let c = grid.cells;
    let (mut level, mut power) = (0.0, 0.0);
    for i in 0..c {
        for j in 0..c {
            let x = [grid.lo + h * (i as f64 + 0.5), grid.lo + h * (j as f64 + 0.5)];
            let v = test.evaluate(&x)?;
            level += v * masses.null[i * c + j];
            power += v * masses.alt[i * c + j];
        }
    }
    Ok((level, power))
}

/// Knobs for [`find_dominating_blend`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendSearchOptions {
    pub n_samples: usize,
    /// Inner radii `zeta`; the outer radius starts at `2 zeta` and is tuned.
    pub zeta_ladder: Vec<f64>,
    pub level_tol: f64,
    /// Monte Carlo size for the regularity check of a candidate.
    pub regularity_samples: usize,
}

impl BlendSearchOptions {
    pub fn new(n_samples: usize) -> Self {
        BlendSearchOptions {
            n_samples,
            zeta_ladder: (2..=12).map(|k| 2f64.powi(k)).collect(),
            level_tol: LEVEL_TOL,
            regularity_samples: (n_samples / 10).max(crate::power::MIN_MC_SAMPLES),
        }
    }
}

/// One rung of the blend ladder.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlendRung {
    pub zeta: f64,
    pub eta: f64,
    /// Level on the null sample used to tune `eta`.
    pub tuned_level: f64,
    /// Level re-measured on a fresh null sample.
    pub level: PowerEstimate,
    pub mixture_power: PowerEstimate,
    pub gain: f64,
    pub gain_se: f64,
    pub separated: bool,
    pub regular: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlendFound {
    pub test: Test,
    pub zeta: f64,
    pub eta: f64,
    pub level: PowerEstimate,
    pub mixture_power: PowerEstimate,
    pub base_mixture_power: PowerEstimate,
    pub mixture_power_gain: f64,
    pub gain_se: f64,
    pub regularity: RegularityReport,
    pub verdict: AdmissibilityVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum BlendSearchReport {
    Found {
        blend: Box<BlendFound>,
        calibration: NPCalibration,
        np_mixture_power: PowerEstimate,
        rungs: Vec<BlendRung>,
    },
    NoGain {
        base_mixture_power: PowerEstimate,
        np_mixture_power: PowerEstimate,
    },
    Inconclusive {
        base_mixture_power: PowerEstimate,
        np_mixture_power: PowerEstimate,
        rungs: Vec<BlendRung>,
    },
}

impl BlendSearchReport {
    pub fn found(&self) -> Option<&BlendFound> {
        match self {
            BlendSearchReport::Found { blend, .. } => Some(blend),
            _ => None,
        }
    }
}

/// Certification output for a base test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibilityVerdict {
    /// A regular level-alpha competitor beats the base in mixture power by more
    /// than the Monte Carlo buffer.
    NotRegularlyAdmissible,
    NoEvidence,
}

/// Flags the base when a regular, level-alpha competitor wins by `> 3` combined SE.
pub fn certify(
    base: &PowerEstimate,
    competitor: &PowerEstimate,
    competitor_level_ok: bool,
    competitor_regular: bool,
) -> AdmissibilityVerdict {
    let separated = competitor.value - base.value > SE_BUFFER * competitor.combined_se(base);
    if separated && competitor_level_ok && competitor_regular {
        AdmissibilityVerdict::NotRegularlyAdmissible
    } else {
        AdmissibilityVerdict::NoEvidence
    }
}

struct NullPieces {
    norm: f64,
    np: f64,
    base: f64,
}

fn blend_level(samples: &[NullPieces], zeta: f64, eta: f64) -> f64 {
    mc::ordered_sum(samples, |s| BlendedTest::combine(zeta, eta, s.norm, s.np, s.base))
        / samples.len() as f64
}

/// Outer radius giving level `<= alpha` on the tuning sample, as close to alpha as bisection allows.
fn tune_eta(samples: &[NullPieces], zeta: f64, alpha: f64) -> Option<(f64, f64)> {
    let mut hi = 2.0 * zeta;
    let mut steps = 0;
    while blend_level(samples, zeta, hi) > alpha {
        hi *= 2.0;
        steps += 1;
        if steps > 80 {
            return None;
        }
    }
    let mut lo = hi / 2.0;
    while blend_level(samples, zeta, lo) <= alpha {
        lo /= 2.0;
        if lo < 1e-12 {
            return None;
        }
    }
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        if blend_level(samples, zeta, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-12 {
            break;
        }
    }
    Some((hi, blend_level(samples, zeta, hi)))
}

/// Searches the ladder `zeta -> infinity` for a level-alpha blend of the NP
/// test with `base` that beats `base` in mixture power and stays regular.
pub fn find_dominating_blend(
    base: &Test,
    prior: &Prior,
    model: &DataModel,
    alpha: f64,
    seed: u64,
    opts: &BlendSearchOptions,
) -> Result<BlendSearchReport> {
    let n = opts.n_samples;
    let calibration = calibrate_np(prior, model, alpha, n, derive_seed(seed, 10))?;
    let np = np_test(prior, model, calibration);
    let power_seed = derive_seed(seed, 11);
    let base_power = mixture_power(base, prior, model, n, power_seed)?;
    let np_power = mixture_power(&np, prior, model, n, power_seed)?;
    if np_power.value - base_power.value <= SE_BUFFER * np_power.combined_se(&base_power) {
        return Ok(BlendSearchReport::NoGain {
            base_mixture_power: base_power,
            np_mixture_power: np_power,
        });
    }

    let len = model.data_len();
    let samples = mc::seeded_collect(n, derive_seed(seed, 12), |rng, _| {
        let mut x = vec![0.0; len];
        model.fill_noise(rng, &mut x);
        Ok(NullPieces {
            norm: x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            np: np.value(&x),
            base: base.value(&x),
        })
    })?;

    let zero = Shift::zero(model.shift_dim());
    let directions: Vec<Shift> = if model.shift_dim() == 1 {
        vec![Shift::scalar(1.0), Shift::scalar(-1.0)]
    } else {
        (0..model.shift_dim())
            .flat_map(|k| {
                [
                    Shift::axis(model.shift_dim(), k, 1.0),
                    Shift::axis(model.shift_dim(), k, -1.0),
                ]
            })
            .collect()
    };
    let mut rungs = Vec::new();
    for &zeta in &opts.zeta_ladder {
        let Some((eta, tuned_level)) = tune_eta(&samples, zeta, alpha) else {
            continue;
        };
        if alpha - tuned_level > opts.level_tol {
            continue;
        }
        let test = blended(base.clone(), np.clone(), zeta, eta)?;
        let level = power_mc(&test, model, &zero, n, derive_seed(seed, 13))?;
        let power = mixture_power(&test, prior, model, n, power_seed)?;
        let gain = power.value - base_power.value;
        let gain_se = power.combined_se(&base_power);
        let level_ok = (level.value - alpha).abs() <= opts.level_tol;
        let separated = gain > SE_BUFFER * gain_se;
        let mut rung = BlendRung {
            zeta,
            eta,
            tuned_level,
            level,
            mixture_power: power,
            gain,
            gain_se,
            separated,
            regular: None,
        };
        if level_ok && separated {
            // radii run past eta so the base term governs the outermost shifts
            let radii = log_spaced(1.0, 4.0 * eta, DEFAULT_REGULARITY_RADII);
            let regularity = regularity_check(
                &test,
                model,
                &radii,
                &directions,
                opts.regularity_samples,
                derive_seed(seed, 14),
                DEFAULT_REGULARITY_EPS,
            )?;
            rung.regular = Some(regularity.limits_to_one);
            rungs.push(rung);
            if regularity.limits_to_one {
                let verdict = certify(&base_power, &power, level_ok, true);
                return Ok(BlendSearchReport::Found {
                    blend: Box::new(BlendFound {
                        test,
                        zeta,
                        eta,
                        level,
                        mixture_power: power,
                        base_mixture_power: base_power,
                        mixture_power_gain: gain,
                        gain_se,
                        regularity,
                        verdict,
                    }),
                    calibration,
                    np_mixture_power: np_power,
                    rungs,
                });
            }
        } else {
            rungs.push(rung);
        }
    }
    Ok(BlendSearchReport::Inconclusive {
        base_mixture_power: base_power,
        np_mixture_power: np_power,
        rungs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiPlusRung {
    pub zeta: f64,
    pub closed_form: f64,
    pub estimate: PowerEstimate,
}

/// Mixture power of the split test as its threshold runs off to infinity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiPlusReport {
    pub a: f64,
    /// `sum_i w_i P_theta_i(X2 > b1)` (or `X2 < b2` for a negative prior).
    pub limit: f64,
    pub base_closed_form: f64,
    pub base_estimate: PowerEstimate,
    pub rungs: Vec<PhiPlusRung>,
    /// Closed-form mixture powers are nondecreasing along the ladder.
    pub monotone: bool,
    /// Monte Carlo gain at the last rung exceeds three combined standard errors.
    pub separated_at_last: bool,
    pub last_gain: f64,
    pub last_gain_se: f64,
}

/// Moves the split threshold from `a` along `zeta_ladder` (towards `-inf` for
/// a prior on the positive axis, `+inf` for the negative axis) and tracks the
/// mixture power of the shifted split test.
pub fn phi_plus_limit_gain(
    prior: &Prior,
    model: &DataModel,
    a: f64,
    alpha: f64,
    zeta_ladder: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<PhiPlusReport> {
    check_prior(prior, model)?;
    let pair = *pair_model(model)?;
    let positive = prior.atoms.iter().all(|at| at.theta.as_slice()[0] > 0.0);
    let negative = prior.atoms.iter().all(|at| at.theta.as_slice()[0] < 0.0);
    if !(positive || negative) {
        return Err(LabError::Domain("prior atoms must all share one sign".into()));
    }
    let wrong_side = zeta_ladder
        .iter()
        .find(|&&z| if positive { z > a } else { z < a });
    if let Some(z) = wrong_side {
        return Err(LabError::Domain(format!(
            "threshold {z} lies on the wrong side of the split point {a}"
        )));
    }
    let base = moran_1d(a, alpha, &pair.second)?;
    let Test::SplitRegion(params) = base else {
        unreachable!("moran_1d builds a split region")
    };
    let closed_mix = |p: &crate::stat_tests::MoranParams1D| -> f64 {
        prior
            .atoms
            .iter()
            .map(|at| {
                at.weight
                    * crate::power::power_moran_1d_closed(p, &pair.first, &pair.second, at.theta.as_slice()[0])
                        .value
            })
            .sum()
    };
    let limit: f64 = prior
        .atoms
        .iter()
        .map(|at| {
            let t = at.theta.as_slice()[0];
            at.weight
                * if positive {
                    pair.second.sf(params.b1 - t)
                } else {
                    pair.second.cdf(params.b2 - t)
                }
        })
        .sum();
    let base_closed = closed_mix(&params);
    let base_estimate = mixture_power(&base, prior, model, n_samples, seed)?;
    let mut rungs = Vec::with_capacity(zeta_ladder.len());
    for &zeta in zeta_ladder {
        let p = params.with_split(zeta);
        let test = Test::SplitRegion(p);
        rungs.push(PhiPlusRung {
            zeta,
            closed_form: closed_mix(&p),
            estimate: mixture_power(&test, prior, model, n_samples, seed)?,
        });
    }
    let monotone = std::iter::once(base_closed)
        .chain(rungs.iter().map(|r| r.closed_form))
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-15);
    let (last_gain, last_gain_se) = rungs
        .last()
        .map(|r| {
            (
                r.estimate.value - base_estimate.value,
                r.estimate.combined_se(&base_estimate),
            )
        })
        .unwrap_or((0.0, 0.0));
    Ok(PhiPlusReport {
        a,
        limit,
        base_closed_form: base_closed,
        base_estimate,
        rungs,
        monotone,
        separated_at_last: last_gain > SE_BUFFER * last_gain_se,
        last_gain,
        last_gain_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::LocationFamily1D;
    use approx::assert_abs_diff_eq;

    fn delta_one() -> Prior {
        Prior::point(Shift::scalar(1.0)).unwrap()
    }

    #[test]
    fn prior_validation() {
        assert!(Prior::new(vec![]).is_err());
        assert!(Prior::point(Shift::scalar(0.0)).is_err());
        assert!(Prior::new(vec![PriorAtom {
            theta: Shift::scalar(1.0),
            weight: 0.7
        }])
        .is_err());
        assert!(Prior::new(vec![
            PriorAtom { theta: Shift::scalar(1.0), weight: 0.5 },
            PriorAtom { theta: Shift::zero(2).scaled(1.0), weight: 0.5 },
        ])
        .is_err());
        let sym = Prior::symmetric(Shift::scalar(1.0)).unwrap();
        assert_eq!(sym.atoms().len(), 2);
    }

    #[test]
    fn point_prior_ratio_is_exponential_in_the_sum() {
        let m = DataModel::gaussian_pair();
        let th = 0.8;
        let prior = Prior::point(Shift::scalar(th)).unwrap();
        for x in [[0.0, 0.0], [1.5, -0.3], [-2.0, 4.0]] {
            let l = likelihood_ratio(&prior, &m, &x).unwrap();
            let expect = (th * (x[0] + x[1]) - th * th).exp();
            assert_abs_diff_eq!(l, expect, epsilon = 1e-12 * expect);
        }
    }

    #[test]
    fn symmetric_prior_ratio_at_origin() {
        let m = DataModel::gaussian_pair();
        let prior = Prior::symmetric(Shift::scalar(1.0)).unwrap();
        let l = likelihood_ratio(&prior, &m, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(l, (-1.0f64).exp(), epsilon = 1e-15);
        for x in [[0.3, 1.1], [-2.0, 0.5]] {
            let l1 = likelihood_ratio(&prior, &m, &x).unwrap();
            let l2 = likelihood_ratio(&prior, &m, &[-x[0], -x[1]]).unwrap();
            assert_eq!(l1, l2);
        }
    }

    #[test]
    fn equal_likelihoods_give_unit_ratio() {
        // a Laplace pair with x1 >= theta and x2 <= 0: gains and losses cancel
        let m = DataModel::Pair(PairModel::same(LocationFamily1D::Laplace).unwrap());
        let prior = Prior::point(Shift::scalar(1.0)).unwrap();
        let l = likelihood_ratio(&prior, &m, &[3.0, -2.0]).unwrap();
        assert_abs_diff_eq!(l, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tail_escape_for_mixed_sign_prior() {
        let m = DataModel::gaussian_pair();
        let prior = Prior::symmetric(Shift::scalar(1.0)).unwrap();
        for x1 in [-2.0, 0.5, 3.0] {
            for x2 in [-20.0, 20.0] {
                let l = likelihood_ratio(&prior, &m, &[x1, x2]).unwrap();
                assert!(l > 1e3 && l.is_finite(), "{x1},{x2}: {l}");
            }
        }
    }

    #[test]
    fn ratio_is_stable_far_in_the_tails() {
        let m = DataModel::gaussian_pair();
        let prior = Prior::point(Shift::scalar(2.0)).unwrap();
        let log_l = log_likelihood_ratio(&prior, &m, &[300.0, 300.0]);
        assert_abs_diff_eq!(log_l, 2.0 * 600.0 - 4.0, epsilon = 1e-9);
    }

    #[test]
    fn calibration_matches_one_sided_threshold() {
        let m = DataModel::gaussian_pair();
        let cal = calibrate_np(&delta_one(), &m, 0.05, 200_000, 3).unwrap();
        // reject iff x1 + x2 > sqrt(2) z_{0.95} = 2.3262, i.e. log C = 2.3262 - 1
        assert!((cal.log_c_star - (2.326_174_307_353_347_6 - 1.0)).abs() < 0.02, "{cal:?}");
        assert_eq!(cal.tau_star, 0.0);
        assert!((cal.achieved_level - 0.05).abs() < 4.0 * cal.level_std_error.max(1e-4));
    }

    #[test]
    fn threshold_rules() {
        assert!(matches!(np_threshold(&[0.5; 100], 0.05), Err(LabError::TrivialTest(_))));
        let logs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(np_threshold(&logs, 0.05).unwrap(), (949.0, 0.0));
        // an atom carrying 40% of the mass straddles the quantile
        let mut atom = vec![0.0; 400];
        atom.extend((0..600).map(|i| -1.0 - i as f64));
        atom.sort_by(f64::total_cmp);
        let (c, tau) = np_threshold(&atom, 0.05).unwrap();
        assert_eq!(c, 0.0);
        assert_abs_diff_eq!(tau, 0.05 / 0.4, epsilon = 1e-12);
        assert!(matches!(
            calibrate_np(&delta_one(), &DataModel::gaussian_pair(), 1.0, 10_000, 1),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn np_test_thresholds() {
        let m = DataModel::gaussian_pair();
        let cal = calibrate_np(&delta_one(), &m, 0.05, 50_000, 8).unwrap();
        let t = np_test(&delta_one(), &m, cal);
        assert_eq!(t.evaluate(&[3.0, 3.0]).unwrap(), 1.0);
        assert_eq!(t.evaluate(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn mixture_power_of_point_prior_is_plain_power() {
        let m = DataModel::gaussian_pair();
        let t = moran_1d(0.0, 0.05, &LocationFamily1D::Normal).unwrap();
        let mp = mixture_power(&t, &delta_one(), &m, 20_000, 5).unwrap();
        let p = power_mc(&t, &m, &Shift::scalar(1.0), 20_000, 5).unwrap();
        assert_eq!(mp.value, p.value);
        assert_abs_diff_eq!(mp.std_error, p.std_error, epsilon = 1e-15);
    }

    #[test]
    fn grid_oracle_small_box_is_rejected() {
        let m = DataModel::gaussian_pair();
        let err = grid_np_oracle(&delta_one(), &m, &GridSpec { lo: -2.0, hi: 2.0, cells: 50 }, 0.05)
            .unwrap_err();
        assert!(matches!(err, LabError::BoxTooSmall { .. }));
        assert!(grid_np_oracle(&delta_one(), &m, &GridSpec { lo: -6.0, hi: 6.0, cells: 401 }, 0.05).is_err());
    }

    #[test]
    fn grid_oracle_spends_exactly_alpha() {
        let m = DataModel::gaussian_pair();
        let o = grid_np_oracle(&delta_one(), &m, &GridSpec { lo: -6.0, hi: 8.0, cells: 120 }, 0.05).unwrap();
        assert_abs_diff_eq!(o.level, 0.05, epsilon = 1e-12);
        assert!(o.threshold_fraction > 0.0 && o.threshold_fraction <= 1.0);
        assert!(o.power > 0.39 && o.power < 0.4088);
    }

    #[test]
    fn phi_plus_wrong_side_is_rejected() {
        let m = DataModel::gaussian_pair();
        assert!(phi_plus_limit_gain(&delta_one(), &m, 0.0, 0.05, &[1.0], 1000, 1).is_err());
        let mixed = Prior::symmetric(Shift::scalar(1.0)).unwrap();
        assert!(phi_plus_limit_gain(&mixed, &m, 0.0, 0.05, &[-1.0], 1000, 1).is_err());
    }

    #[test]
    fn phi_plus_at_split_point_has_no_gain() {
        let m = DataModel::gaussian_pair();
        let r = phi_plus_limit_gain(&delta_one(), &m, 0.0, 0.05, &[0.0], 10_000, 1).unwrap();
        assert_eq!(r.last_gain, 0.0);
        assert_eq!(r.rungs[0].closed_form, r.base_closed_form);
    }

    #[test]
    fn certify_needs_all_three_conditions() {
        let base = PowerEstimate::from_mc(0.22, 1_000_000);
        let better = PowerEstimate::from_mc(0.30, 1_000_000);
        assert_eq!(certify(&base, &better, true, true), AdmissibilityVerdict::NotRegularlyAdmissible);
        assert_eq!(certify(&base, &better, true, false), AdmissibilityVerdict::NoEvidence);
        assert_eq!(certify(&base, &better, false, true), AdmissibilityVerdict::NoEvidence);
        assert_eq!(certify(&base, &base, true, true), AdmissibilityVerdict::NoEvidence);
    }
}
