//! Run configuration files.
//!
//! Configs are TOML. Every file carries `schema_version = 1`; the remaining
//! keys depend on `experiment`. A minimal dominance run:
//!
//! ```toml
//! schema_version = 1
//! experiment = "dominance"
//! seed = 7
//! alpha = 0.05
//! n_samples = 1000000
//!
//! [model]
//! kind = "pair"
//! first = { family = "normal" }
//! second = { family = "normal" }
//!
//! [[tests]]
//! kind = "z_two_sided"
//!
//! [[tests]]
//! kind = "moran_1d"
//! a = 0.0
//!
//! [grid]
//! theta = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use splitlab_core::bayes::{Prior, PriorAtom};
use splitlab_core::power::MIN_MC_SAMPLES;
use splitlab_core::stat_tests::{self, chi_square_d, moran_1d, moran_gaussian_d, phi_plus, z_one_sided, z_two_sided};
use splitlab_core::{DataModel, GaussianSampleModel, LocationFamily1D, PairModel, Shift, Test};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    PowerCurve,
    Dominance,
    CalibrateNp,
    BlendSearch,
    ConditionCheck,
    GaussianDCompare,
    ConvexityDemo,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::PowerCurve => "power-curve",
            Experiment::Dominance => "dominance",
            Experiment::CalibrateNp => "calibrate-np",
            Experiment::BlendSearch => "blend-search",
            Experiment::ConditionCheck => "condition-check",
            Experiment::GaussianDCompare => "gaussian-d-compare",
            Experiment::ConvexityDemo => "convexity-demo",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Pair {
        first: LocationFamily1D,
        second: LocationFamily1D,
    },
    Gaussian {
        dim: usize,
        n: usize,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Pair {
            first: LocationFamily1D::Normal,
            second: LocationFamily1D::Normal,
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> splitlab_core::Result<DataModel> {
        Ok(match *self {
            ModelSpec::Pair { first, second } => DataModel::Pair(PairModel::new(first, second)?),
            ModelSpec::Gaussian { dim, n } => DataModel::GaussianSample(GaussianSampleModel::new(dim, n)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestSpec {
    #[serde(rename = "moran_1d")]
    Moran1d {
        #[serde(default)]
        a: f64,
    },
    PhiPlus {
        zeta: f64,
    },
    ZTwoSided,
    ZOneSided {
        #[serde(default = "default_true")]
        upper: bool,
    },
    MoranGaussianD {
        #[serde(default = "default_one")]
        m: usize,
    },
    ChiSquare,
}

fn default_true() -> bool {
    true
}

fn default_one() -> usize {
    1
}

impl TestSpec {
    /// Builds the test at level `alpha` for observations from `model`.
    pub fn build(&self, alpha: f64, model: &DataModel) -> splitlab_core::Result<Test> {
        let wrong_model = || {
            splitlab_core::LabError::Config(format!("test {self:?} does not fit model {}", model.describe()))
        };
        match (self, model) {
            (TestSpec::Moran1d { a }, DataModel::Pair(p)) => moran_1d(*a, alpha, &p.second),
            (TestSpec::PhiPlus { zeta }, DataModel::Pair(p)) => phi_plus(*zeta, alpha, &p.second),
            (TestSpec::ZTwoSided, m) => z_two_sided(alpha, total_n(m)),
            (TestSpec::ZOneSided { upper }, m) => z_one_sided(alpha, total_n(m), *upper),
            (TestSpec::MoranGaussianD { m }, DataModel::GaussianSample(g)) => {
                moran_gaussian_d(alpha, *m, g.n, g.dim())
            }
            (TestSpec::ChiSquare, DataModel::GaussianSample(g)) => chi_square_d(alpha, g.n, g.dim()),
            _ => Err(wrong_model()),
        }
    }
}

fn total_n(model: &DataModel) -> usize {
    match model {
        DataModel::Pair(_) => 2,
        DataModel::GaussianSample(g) => g.n,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Scalar shifts for pair models.
    #[serde(default)]
    pub theta: Vec<f64>,
    /// Vector shifts for Gaussian sample models.
    #[serde(default)]
    pub theta_vectors: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBox {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub atoms: Vec<PriorAtom>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlendConfig {
    #[serde(default)]
    pub zeta_ladder: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionConfig {
    #[serde(default = "default_theta_probes")]
    pub theta_probes: Vec<f64>,
}

fn default_theta_probes() -> Vec<f64> {
    splitlab_core::conditions::DEFAULT_THETA_PROBES.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexityConfig {
    /// Defaults to the one-sided normal critical value at `alpha`.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_radius")]
    pub perturbation: f64,
    #[serde(default = "default_trials")]
    pub random_trials: usize,
}

fn default_delta() -> f64 {
    1.2
}
fn default_dim() -> usize {
    2
}
fn default_radius() -> f64 {
    1e-3
}
fn default_trials() -> usize {
    200
}

impl Default for ConvexityConfig {
    fn default() -> Self {
        ConvexityConfig {
            threshold: None,
            delta: default_delta(),
            dim: default_dim(),
            perturbation: default_radius(),
            random_trials: default_trials(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMode {
    #[default]
    Mc,
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_n")]
    pub n_samples: usize,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub tests: Vec<TestSpec>,
    #[serde(default)]
    pub prior: Option<PriorConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub curve: CurveMode,
    #[serde(default)]
    pub oracle: Option<OracleBox>,
    #[serde(default)]
    pub blend: Option<BlendConfig>,
    #[serde(default)]
    pub condition: Option<ConditionConfig>,
    #[serde(default)]
    pub convexity: Option<ConvexityConfig>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_alpha() -> f64 {
    0.05
}
fn default_n() -> usize {
    1_000_000
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Schema {
            path: "<document>".into(),
            message: e.to_string(),
        })?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    /// Checks the cross-field rules the deserializer cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |path: &str, message: String| {
            Err(CliError::Schema {
                path: path.into(),
                message,
            })
        };
        if self.schema_version != SCHEMA_VERSION {
            return bad(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            );
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", format!("must lie in (0, 1), got {}", self.alpha));
        }
        if self.n_samples < MIN_MC_SAMPLES {
            return bad(
                "n_samples",
                format!("must be at least {MIN_MC_SAMPLES}, got {}", self.n_samples),
            );
        }
        let model = match self.model.build() {
            Ok(m) => m,
            Err(e) => return bad("model", e.to_string()),
        };
        for (i, t) in self.tests.iter().enumerate() {
            if let Err(e) = t.build(self.alpha, &model) {
                return bad(&format!("tests[{i}]"), e.to_string());
            }
        }
        let need_tests = match self.experiment {
            Experiment::PowerCurve | Experiment::BlendSearch => 1,
            Experiment::Dominance => 2,
            _ => 0,
        };
        if self.tests.len() < need_tests {
            return bad(
                "tests",
                format!("{} needs at least {need_tests} test(s)", self.experiment.as_str()),
            );
        }
        if matches!(self.experiment, Experiment::PowerCurve | Experiment::Dominance) && self.shifts().is_empty() {
            return bad("grid", "theta grid is empty".into());
        }
        if let Err(e) = self.shifts_checked(&model) {
            return bad("grid", e.to_string());
        }
        match self.experiment {
            Experiment::CalibrateNp | Experiment::BlendSearch => {
                let Some(prior) = &self.prior else {
                    return bad("prior", "missing prior".into());
                };
                match Prior::new(prior.atoms.clone()) {
                    Ok(p) if p.dim() == model.shift_dim() => {}
                    Ok(p) => {
                        return bad(
                            "prior.atoms",
                            format!("atoms have dimension {}, model needs {}", p.dim(), model.shift_dim()),
                        )
                    }
                    Err(e) => return bad("prior.atoms", e.to_string()),
                }
            }
            Experiment::ConditionCheck => {
                if !matches!(self.model, ModelSpec::Pair { .. }) {
                    return bad("model", "condition-check needs a pair model".into());
                }
            }
            Experiment::GaussianDCompare => {
                if !matches!(self.model, ModelSpec::Gaussian { .. }) {
                    return bad("model", "gaussian-d-compare needs a gaussian model".into());
                }
                if self.grid.theta_vectors.is_empty() {
                    return bad("grid.theta_vectors", "no shifts given".into());
                }
            }
            _ => {}
        }
        if let Some(b) = &self.blend {
            if let Some(l) = &b.zeta_ladder {
                if l.is_empty() || l.iter().any(|z| !(*z > 0.0 && z.is_finite())) {
                    return bad("blend.zeta_ladder", "radii must be positive".into());
                }
            }
        }
        if let Some(c) = &self.convexity {
            if !(c.delta > 1.0 && c.delta < std::f64::consts::SQRT_2) {
                return bad("convexity.delta", format!("must lie in (1, sqrt 2), got {}", c.delta));
            }
        }
        Ok(())
    }

    pub fn data_model(&self) -> splitlab_core::Result<DataModel> {
        self.model.build()
    }

    pub fn build_tests(&self) -> splitlab_core::Result<Vec<Test>> {
        let model = self.data_model()?;
        self.tests.iter().map(|t| t.build(self.alpha, &model)).collect()
    }

    pub fn prior(&self) -> splitlab_core::Result<Prior> {
        let atoms = self.prior.as_ref().map(|p| p.atoms.clone()).unwrap_or_default();
        Prior::new(atoms)
    }

    fn shifts(&self) -> Vec<Vec<f64>> {
        if !self.grid.theta_vectors.is_empty() {
            self.grid.theta_vectors.clone()
        } else {
            self.grid.theta.iter().map(|t| vec![*t]).collect()
        }
    }

    fn shifts_checked(&self, model: &DataModel) -> splitlab_core::Result<Vec<Shift>> {
        self.shifts()
            .into_iter()
            .map(|v| {
                let s = Shift::vector(v)?;
                model.check_shift(&s)?;
                Ok(s)
            })
            .collect()
    }

    pub fn theta_grid(&self) -> splitlab_core::Result<Vec<Shift>> {
        self.shifts_checked(&self.data_model()?)
    }

    pub fn convexity_threshold(&self) -> splitlab_core::Result<f64> {
        match self.convexity.as_ref().and_then(|c| c.threshold) {
            Some(t) => Ok(t),
            None => stat_tests::moran_d_threshold(self.alpha, 1, 2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema_version = 1
experiment = "dominance"
seed = 7
alpha = 0.05
n_samples = 10000

[[tests]]
kind = "z_two_sided"

[[tests]]
kind = "moran_1d"

[grid]
theta = [0.0, 1.0]
"#;

    #[test]
    fn parses_a_dominance_config() {
        let cfg = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.experiment, Experiment::Dominance);
        assert_eq!(cfg.tests[1], TestSpec::Moran1d { a: 0.0 });
        assert_eq!(cfg.build_tests().unwrap().len(), 2);
    }

    #[test]
    fn bad_alpha_names_the_field() {
        let err = RunConfig::from_toml(&BASE.replace("alpha = 0.05", "alpha = 1.5")).unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn small_sample_counts_are_rejected() {
        let err = RunConfig::from_toml(&BASE.replace("n_samples = 10000", "n_samples = 999")).unwrap_err();
        assert!(err.to_string().contains("n_samples"));
    }

    #[test]
    fn type_errors_carry_a_path() {
        let err = RunConfig::from_toml(&BASE.replace("theta = [0.0, 1.0]", "theta = [0.0, \"x\"]")).unwrap_err();
        assert!(err.to_string().contains("grid.theta"), "{err}");
    }

    #[test]
    fn seed_is_mandatory() {
        let err = RunConfig::from_toml(&BASE.replace("seed = 7", "")).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn tests_must_fit_the_model() {
        let err = RunConfig::from_toml(&BASE.replace("kind = \"moran_1d\"", "kind = \"chi_square\"")).unwrap_err();
        assert!(err.to_string().contains("tests[1]"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml(&format!("{BASE}\nbogus = 1\n")).is_err());
    }
}
