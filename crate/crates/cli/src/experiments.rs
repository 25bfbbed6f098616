//! One function per experiment type. Each returns its CSV rows, a JSON
//! document and a few summary lines; [`run`] writes them to disk.

use std::path::{Path, PathBuf};

use serde::Serialize;
use splitlab_core::bayes::{
    calibrate_np, find_dominating_blend, grid_np_oracle, mixture_power, np_test, BlendSearchOptions,
    BlendSearchReport, GridSpec,
};
use splitlab_core::conditions::{check_condition1, condition_to_claim, Classification};
use splitlab_core::power::{dominance_scan, power_curve, power_mc, CurveMethod, SE_BUFFER};
use splitlab_core::stat_tests::{chi_square_d, convexity_counterexample, moran_gaussian_d, perturbation_sweep};
use splitlab_core::{DataModel, Shift, Test};

use crate::config::{CurveMode, Experiment, ModelSpec, RunConfig};
use crate::error::CliError;

/// Everything an experiment produces.
pub struct Artifacts {
    pub name: &'static str,
    pub csv: Vec<u8>,
    pub json: serde_json::Value,
    pub summary: Vec<String>,
}

pub fn csv_bytes<R: Serialize>(rows: &[R]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::Io {
        path: PathBuf::from("<csv buffer>"),
        source: e,
    })?;
    w.into_inner().map_err(|e| CliError::Io {
        path: PathBuf::from("<csv buffer>"),
        source: e.into_error(),
    })
}

/// Header-only CSV, used by the golden schema tests.
pub fn csv_header<R: Serialize>(row: &R) -> Result<String, CliError> {
    let bytes = csv_bytes(std::slice::from_ref(row))?;
    let text = String::from_utf8(bytes).expect("csv writer emits utf-8");
    Ok(text.lines().next().unwrap_or_default().to_string())
}

fn shift_label(s: &Shift) -> String {
    s.to_string()
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PowerRow {
    pub test: String,
    pub model: String,
    pub theta: String,
    pub power: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub method: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DominanceCsvRow {
    pub theta: String,
    pub power_a: f64,
    pub se_a: f64,
    pub power_b: f64,
    pub se_b: f64,
    pub gap: f64,
    pub combined_se: f64,
    pub strict: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CalibrationRow {
    pub prior: String,
    pub alpha: f64,
    pub c_star: f64,
    pub tau_star: f64,
    pub achieved_level: f64,
    pub level_se: f64,
    pub np_mixture_power: f64,
    pub np_mixture_se: f64,
    pub grid_power: Option<f64>,
    pub grid_level: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BlendRow {
    pub zeta: f64,
    pub eta: f64,
    pub tuned_level: f64,
    pub level: f64,
    pub level_se: f64,
    pub mixture_power: f64,
    pub mixture_se: f64,
    pub gain: f64,
    pub gain_se: f64,
    pub separated: bool,
    pub regular: Option<bool>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConditionRow {
    pub theta: f64,
    pub direction: String,
    pub x: f64,
    pub log_ratio: f64,
    pub classification: String,
    pub slope: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CompareRow {
    pub theta: String,
    pub moran_power: f64,
    pub moran_se: f64,
    pub chi_square_power: f64,
    pub chi_square_se: f64,
    pub gap: f64,
    pub combined_se: f64,
    pub separated: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConvexityRow {
    pub point: String,
    pub u: String,
    pub v: String,
    pub statistic: f64,
    pub threshold: f64,
    pub rejected: bool,
}

fn vec_label(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(";"))
}

pub fn power_curve_experiment(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let model = cfg.data_model()?;
    let grid = cfg.theta_grid()?;
    let method = match cfg.curve {
        CurveMode::Mc => CurveMethod::MonteCarlo,
        CurveMode::ClosedForm => CurveMethod::ClosedFormIfAvailable,
    };
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for test in cfg.build_tests()? {
        let curve = power_curve(&test, &model, &grid, cfg.n_samples, cfg.seed, method)?;
        for (theta, est) in curve.theta_grid.iter().zip(&curve.estimates) {
            rows.push(PowerRow {
                test: curve.test_id.clone(),
                model: curve.family_id.clone(),
                theta: shift_label(theta),
                power: est.value,
                std_error: est.std_error,
                n_samples: est.n_samples,
                method: est.method.as_str().into(),
            });
        }
        curves.push(curve);
    }
    let summary = vec![format!("{} curves x {} grid points", curves.len(), grid.len())];
    Ok(Artifacts {
        name: "power_curve",
        csv: csv_bytes(&rows)?,
        json: serde_json::to_value(&curves)?,
        summary,
    })
}

pub fn dominance_experiment(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let model = cfg.data_model()?;
    let grid = cfg.theta_grid()?;
    let tests = cfg.build_tests()?;
    let report = dominance_scan(&tests[0], &tests[1], &model, &grid, cfg.n_samples, cfg.seed)?;
    let rows: Vec<DominanceCsvRow> = report
        .rows
        .iter()
        .map(|r| DominanceCsvRow {
            theta: shift_label(&r.theta),
            power_a: r.a.value,
            se_a: r.a.std_error,
            power_b: r.b.value,
            se_b: r.b.std_error,
            gap: r.gap,
            combined_se: r.combined_se,
            strict: r.gap > SE_BUFFER * r.combined_se,
        })
        .collect();
    let strict: Vec<String> = report.strict_points.iter().map(shift_label).collect();
    let summary = vec![
        format!("{} vs {}", report.test_a, report.test_b),
        format!("ge_everywhere = {}", report.ge_everywhere),
        format!("strict points: {}", strict.join(" ")),
    ];
    Ok(Artifacts {
        name: "dominance",
        csv: csv_bytes(&rows)?,
        json: serde_json::to_value(&report)?,
        summary,
    })
}

pub fn calibrate_np_experiment(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let model = cfg.data_model()?;
    let prior = cfg.prior()?;
    let cal = calibrate_np(&prior, &model, cfg.alpha, cfg.n_samples, cfg.seed)?;
    let np = np_test(&prior, &model, cal);
    let mp = mixture_power(&np, &prior, &model, cfg.n_samples, cfg.seed.wrapping_add(1))?;
    let oracle = match (&cfg.oracle, &model) {
        (Some(b), DataModel::Pair(_)) => Some(grid_np_oracle(
            &prior,
            &model,
            &GridSpec {
                lo: b.lo,
                hi: b.hi,
                cells: b.cells,
            },
            cfg.alpha,
        )?),
        _ => None,
    };
    let row = CalibrationRow {
        prior: prior.describe(),
        alpha: cal.alpha,
        c_star: cal.c_star,
        tau_star: cal.tau_star,
        achieved_level: cal.achieved_level,
        level_se: cal.level_std_error,
        np_mixture_power: mp.value,
        np_mixture_se: mp.std_error,
        grid_power: oracle.as_ref().map(|o| o.power),
        grid_level: oracle.as_ref().map(|o| o.level),
    };
    let mut summary = vec![
        format!("C* = {:.6}, tau* = {}", cal.c_star, cal.tau_star),
        format!("level {:.5} +- {:.5}", cal.achieved_level, cal.level_std_error),
        format!("mixture power {:.5} +- {:.5}", mp.value, mp.std_error),
    ];
    if let Some(o) = &oracle {
        summary.push(format!("grid oracle power {:.5}", o.power));
    }
    Ok(Artifacts {
        name: "calibrate_np",
        csv: csv_bytes(&[row])?,
        json: serde_json::json!({ "calibration": cal, "mixture_power": mp, "grid_oracle": oracle }),
        summary,
    })
}

pub fn blend_rows(report: &BlendSearchReport) -> Vec<BlendRow> {
    let rungs = match report {
        BlendSearchReport::Found { rungs, .. } | BlendSearchReport::Inconclusive { rungs, .. } => rungs.as_slice(),
        BlendSearchReport::NoGain { .. } => &[],
    };
    rungs
        .iter()
        .map(|r| BlendRow {
            zeta: r.zeta,
            eta: r.eta,
            tuned_level: r.tuned_level,
            level: r.level.value,
            level_se: r.level.std_error,
            mixture_power: r.mixture_power.value,
            mixture_se: r.mixture_power.std_error,
            gain: r.gain,
            gain_se: r.gain_se,
            separated: r.separated,
            regular: r.regular,
        })
        .collect()
}

pub fn blend_search_experiment(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let model = cfg.data_model()?;
    let prior = cfg.prior()?;
    let base = cfg.build_tests()?.remove(0);
    let mut opts = BlendSearchOptions::new(cfg.n_samples);
    if let Some(ladder) = cfg.blend.as_ref().and_then(|b| b.zeta_ladder.clone()) {
        opts.zeta_ladder = ladder;
    }
    let report = find_dominating_blend(&base, &prior, &model, cfg.alpha, cfg.seed, &opts)?;
    let summary = match &report {
        BlendSearchReport::Found { blend, .. } => vec![
            format!("found blend zeta = {}, eta = {:.4}", blend.zeta, blend.eta),
            format!("level {:.5} +- {:.5}", blend.level.value, blend.level.std_error),
            format!(
                "mixture power {:.5} vs base {:.5} (gain {:.5}, se {:.5})",
                blend.mixture_power.value, blend.base_mixture_power.value, blend.mixture_power_gain, blend.gain_se
            ),
            format!("base verdict: {:?}", blend.verdict),
        ],
        BlendSearchReport::NoGain { .. } => vec!["NP test does not beat the base: no blend needed".into()],
        BlendSearchReport::Inconclusive { .. } => vec!["no rung met level, gain and regularity together".into()],
    };
    Ok(Artifacts {
        name: "blend_search",
        csv: csv_bytes(&blend_rows(&report))?,
        json: serde_json::to_value(&report)?,
        summary,
    })
}

pub fn condition_experiment(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let ModelSpec::Pair { first, second } = cfg.model else {
        return Err(CliError::Schema {
            path: "model".into(),
            message: "condition-check needs a pair model".into(),
        });
    };
    let pair = splitlab_core::PairModel::new(first, second)?;
    let probes = cfg
        .condition
        .as_ref()
        .map(|c| c.theta_probes.clone())
        .unwrap_or_else(|| splitlab_core::conditions::DEFAULT_THETA_PROBES.to_vec());
    let check = check_condition1(&pair, &probes)?;
    let claim = condition_to_claim(&check);
    let mut rows = Vec::new();
    for r in &check.sub_reports {
        for p in &r.probes {
            rows.push(ConditionRow {
                theta: r.theta,
                direction: r.direction.as_str().into(),
                x: p.x,
                log_ratio: p.log_ratio,
                classification: r.classification.label(),
                slope: r.slope_estimate,
            });
        }
    }
    let truncated = check.sub_reports.iter().filter(|r| r.truncated).count();
    let undecided = check
        .sub_reports
        .iter()
        .filter(|r| r.classification == Classification::Inconclusive)
        .count();
    let summary = vec![
        format!("verdict: {}", check.verdict.as_str()),
        claim.statement.clone(),
        format!("{undecided} inconclusive and {truncated} truncated probe ladders"),
    ];
    Ok(Artifacts {
        name: "condition_check",
        csv: csv_bytes(&rows)?,
        json: serde_json::json!({ "check": check, "claim": claim }),
        summary,
    })
}

pub fn gaussian_d_compare_experiment(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let model = cfg.data_model()?;
    let DataModel::GaussianSample(g) = model else {
        return Err(CliError::Schema {
            path: "model".into(),
            message: "gaussian-d-compare needs a gaussian model".into(),
        });
    };
    let m = cfg
        .tests
        .iter()
        .find_map(|t| match t {
            crate::config::TestSpec::MoranGaussianD { m } => Some(*m),
            _ => None,
        })
        .unwrap_or(1);
    let moran = moran_gaussian_d(cfg.alpha, m, g.n, g.dim())?;
    let chi = chi_square_d(cfg.alpha, g.n, g.dim())?;
    let rows = compare_rows(&moran, &chi, &model, &cfg.theta_grid()?, cfg.n_samples, cfg.seed)?;
    let summary = rows
        .iter()
        .map(|r| {
            format!(
                "theta {}: moran {:.5} chi-square {:.5} gap {:.5} ({:.1} se)",
                r.theta,
                r.moran_power,
                r.chi_square_power,
                r.gap,
                r.gap / r.combined_se.max(f64::MIN_POSITIVE)
            )
        })
        .collect();
    Ok(Artifacts {
        name: "gaussian_d_compare",
        csv: csv_bytes(&rows)?,
        json: serde_json::to_value(&rows)?,
        summary,
    })
}

pub fn compare_rows(
    moran: &Test,
    chi: &Test,
    model: &DataModel,
    grid: &[Shift],
    n: usize,
    seed: u64,
) -> Result<Vec<CompareRow>, CliError> {
    grid.iter()
        .map(|theta| {
            let a = power_mc(moran, model, theta, n, seed)?;
            let b = power_mc(chi, model, theta, n, seed)?;
            let se = a.combined_se(&b);
            Ok(CompareRow {
                theta: shift_label(theta),
                moran_power: a.value,
                moran_se: a.std_error,
                chi_square_power: b.value,
                chi_square_se: b.std_error,
                gap: b.value - a.value,
                combined_se: se,
                separated: b.value - a.value > SE_BUFFER * se,
            })
        })
        .collect()
}

pub fn convexity_experiment(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let c = cfg.convexity.clone().unwrap_or_default();
    let threshold = cfg.convexity_threshold()?;
    let ce = convexity_counterexample(threshold, c.delta, c.dim)?;
    let sweep = perturbation_sweep(&ce, c.perturbation, c.random_trials, cfg.seed);
    let mid_u: Vec<f64> = ce.u1.iter().zip(&ce.u2).map(|(a, b)| 0.5 * (a + b)).collect();
    let mid_v: Vec<f64> = ce.v1.iter().zip(&ce.v2).map(|(a, b)| 0.5 * (a + b)).collect();
    let points = [
        ("endpoint_1", &ce.u1, &ce.v1, ce.endpoint_statistics[0]),
        ("endpoint_2", &ce.u2, &ce.v2, ce.endpoint_statistics[1]),
        ("midpoint", &mid_u, &mid_v, ce.midpoint_statistic),
    ];
    let rows: Vec<ConvexityRow> = points
        .iter()
        .map(|(name, u, v, s)| ConvexityRow {
            point: (*name).into(),
            u: vec_label(u),
            v: vec_label(v),
            statistic: *s,
            threshold,
            rejected: *s > threshold,
        })
        .collect();
    let summary = vec![
        format!(
            "endpoints {:.4}, {:.4} < D = {:.4} < midpoint {:.4}: {}",
            ce.endpoint_statistics[0],
            ce.endpoint_statistics[1],
            threshold,
            ce.midpoint_statistic,
            ce.holds()
        ),
        format!(
            "perturbation radius {}: {}/{} preserved",
            sweep.radius, sweep.preserved, sweep.trials
        ),
    ];
    Ok(Artifacts {
        name: "convexity_demo",
        csv: csv_bytes(&rows)?,
        json: serde_json::json!({ "counterexample": ce, "perturbations": sweep }),
        summary,
    })
}

pub fn execute(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    match cfg.experiment {
        Experiment::PowerCurve => power_curve_experiment(cfg),
        Experiment::Dominance => dominance_experiment(cfg),
        Experiment::CalibrateNp => calibrate_np_experiment(cfg),
        Experiment::BlendSearch => blend_search_experiment(cfg),
        Experiment::ConditionCheck => condition_experiment(cfg),
        Experiment::GaussianDCompare => gaussian_d_compare_experiment(cfg),
        Experiment::ConvexityDemo => convexity_experiment(cfg),
    }
}

/// Writes `<name>.csv` and `<name>.json` under `dir`.
pub fn write_artifacts(a: &Artifacts, dir: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let csv_path = dir.join(format!("{}.csv", a.name));
    let json_path = dir.join(format!("{}.json", a.name));
    std::fs::write(&csv_path, &a.csv).map_err(io(&csv_path))?;
    let mut json = serde_json::to_vec_pretty(&a.json)?;
    json.push(b'\n');
    std::fs::write(&json_path, json).map_err(io(&json_path))?;
    Ok((csv_path, json_path))
}

/// Runs one config and writes its artifacts.
pub fn run(cfg: &RunConfig, out_dir: &Path, quiet: bool) -> Result<Artifacts, CliError> {
    let artifacts = execute(cfg)?;
    let (csv_path, _) = write_artifacts(&artifacts, out_dir)?;
    if !quiet {
        println!("{} (seed {})", cfg.experiment.as_str(), cfg.seed);
        for line in &artifacts.summary {
            println!("  {line}");
        }
        println!("  wrote {}", csv_path.display());
    }
    Ok(artifacts)
}
