//! Tail likelihood-ratio diagnostics for the second split density.
//!
//! The split test is beaten when `f2(x - theta) / f2(x)` blows up in the
//! direction of the shift and stays bounded in the other one. Limits are
//! read off a geometric ladder of probe points, so every verdict here is
//! numerical evidence rather than a proof.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::families::LocationFamily1D;
use crate::model::PairModel;

/// `log(1e6)`: a last log-ratio above this counts as divergence.
pub const DIVERGENCE_LOG: f64 = 13.815_510_557_964_274;
pub const SLOPE_MIN: f64 = 0.01;
pub const FLAT_TOL: f64 = 1e-4;
/// Default probe exponents: `|x|` runs over `2^4 ..= 2^24`.
pub const DEFAULT_LADDER: (i32, i32) = (4, 24);
pub const DEFAULT_THETA_PROBES: [f64; 6] = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    PlusInfinity,
    MinusInfinity,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::PlusInfinity => 1.0,
            Direction::MinusInfinity => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::PlusInfinity => "+inf",
            Direction::MinusInfinity => "-inf",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "class", content = "limit", rename_all = "snake_case")]
pub enum Classification {
    Diverges,
    FiniteLimit(f64),
    Inconclusive,
}

impl Classification {
    pub fn label(&self) -> String {
        match self {
            Classification::Diverges => "diverges".into(),
            Classification::FiniteLimit(v) => format!("finite({v:.6})"),
            Classification::Inconclusive => "inconclusive".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Probe {
    pub x: f64,
    pub log_ratio: f64,
}

impl Probe {
    pub fn ratio(&self) -> f64 {
        self.log_ratio.exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub family_id: String,
    pub theta: f64,
    pub direction: Direction,
    pub probes: Vec<Probe>,
    pub classification: Classification,
    pub slope_estimate: f64,
    /// Set when the ladder was cut short by a non-finite log-density.
    pub truncated: bool,
}

/// Signed probe points `sign * 2^k` for `k` in `lo..=hi`.
pub fn probe_ladder(direction: Direction, lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| direction.sign() * 2f64.powi(k)).collect()
}

fn slope(probes: &[Probe]) -> f64 {
    let n = probes.len() as f64;
    let mx = probes.iter().map(|p| p.x.abs()).sum::<f64>() / n;
    let my = probes.iter().map(|p| p.log_ratio).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in probes {
        let dx = p.x.abs() - mx;
        sxy += dx * (p.log_ratio - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Classification rule applied to a finished probe list.
pub fn classify(probes: &[Probe], slope: f64) -> Classification {
    let Some(last) = probes.last() else {
        return Classification::Inconclusive;
    };
    if last.log_ratio > DIVERGENCE_LOG && slope > SLOPE_MIN {
        return Classification::Diverges;
    }
    if last.log_ratio < -DIVERGENCE_LOG && slope < -SLOPE_MIN {
        return Classification::FiniteLimit(0.0);
    }
    if probes.len() >= 3 {
        let k = probes.len();
        let d1 = (probes[k - 1].log_ratio - probes[k - 2].log_ratio).abs();
        let d2 = (probes[k - 2].log_ratio - probes[k - 3].log_ratio).abs();
        if d1 < FLAT_TOL && d2 < FLAT_TOL {
            return Classification::FiniteLimit(last.ratio());
        }
    }
    Classification::Inconclusive
}

/// Evaluates `log f(x - theta) - log f(x)` along `probe_grid` and classifies the limit.
pub fn tail_ratio_diagnostic(
    family: &LocationFamily1D,
    theta: f64,
    direction: Direction,
    probe_grid: &[f64],
) -> Result<ConditionReport> {
    if theta == 0.0 || !theta.is_finite() {
        return Err(LabError::Domain(format!("theta must be finite and nonzero, got {theta}")));
    }
    if probe_grid.len() < 3 {
        return Err(LabError::Input("probe grid needs at least three points".into()));
    }
    for w in probe_grid.windows(2) {
        if !(w[1].abs() > w[0].abs()) || w[0] * direction.sign() <= 0.0 {
            return Err(LabError::Input(format!(
                "probe grid must grow towards {}",
                direction.as_str()
            )));
        }
    }
    family.check_params()?;
    let mut probes = Vec::with_capacity(probe_grid.len());
    let mut truncated = false;
    for &x in probe_grid {
        let (num, den) = (family.log_density(x - theta), family.log_density(x));
        let log_ratio = num - den;
        if !(num.is_finite() && den.is_finite() && log_ratio.is_finite()) {
            truncated = true;
            break;
        }
        probes.push(Probe { x, log_ratio });
    }
    let (classification, slope_estimate) = if probes.len() >= 2 {
        let s = slope(&probes);
        (classify(&probes, s), s)
    } else {
        (Classification::Inconclusive, f64::NAN)
    };
    Ok(ConditionReport {
        family_id: family.to_string(),
        theta,
        direction,
        probes,
        classification,
        slope_estimate,
        truncated,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    EvidenceSatisfied,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::EvidenceSatisfied => "evidence_satisfied",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub first: String,
    pub second: String,
    pub verdict: Verdict,
    pub sub_reports: Vec<ConditionReport>,
}

/// Checks divergence towards the shift and a finite limit away from it, for every probe.
pub fn check_condition1(pair: &PairModel, theta_probes: &[f64]) -> Result<ConditionCheck> {
    check_condition1_with_ladder(pair, theta_probes, DEFAULT_LADDER)
}

pub fn check_condition1_with_ladder(
    pair: &PairModel,
    theta_probes: &[f64],
    ladder: (i32, i32),
) -> Result<ConditionCheck> {
    if !theta_probes.iter().any(|&t| t > 0.0) || !theta_probes.iter().any(|&t| t < 0.0) {
        return Err(LabError::Input("theta probes need both signs".into()));
    }
    let f2 = pair.second;
    let mut sub_reports = Vec::with_capacity(2 * theta_probes.len());
    let mut violated = false;
    let mut all_ok = true;
    for &theta in theta_probes {
        let (toward, away) = if theta > 0.0 {
            (Direction::PlusInfinity, Direction::MinusInfinity)
        } else {
            (Direction::MinusInfinity, Direction::PlusInfinity)
        };
        let near = tail_ratio_diagnostic(&f2, theta, toward, &probe_ladder(toward, ladder.0, ladder.1))?;
        let far = tail_ratio_diagnostic(&f2, theta, away, &probe_ladder(away, ladder.0, ladder.1))?;
        // a finite limit towards the shift, or a blow-up away from it, contradicts
        violated |= matches!(near.classification, Classification::FiniteLimit(_))
            || matches!(far.classification, Classification::Diverges);
        all_ok &= near.classification == Classification::Diverges
            && matches!(far.classification, Classification::FiniteLimit(_));
        sub_reports.push(near);
        sub_reports.push(far);
    }
    let verdict = if violated {
        Verdict::Violated
    } else if all_ok {
        Verdict::EvidenceSatisfied
    } else {
        Verdict::Inconclusive
    };
    Ok(ConditionCheck {
        first: pair.first.to_string(),
        second: pair.second.to_string(),
        verdict,
        sub_reports,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Claim {
    pub first: String,
    pub second: String,
    pub verdict: Verdict,
    pub inadmissible: bool,
    pub statement: String,
}

pub fn condition_to_claim(check: &ConditionCheck) -> Claim {
    let inadmissible = check.verdict == Verdict::EvidenceSatisfied;
    let statement = if inadmissible {
        format!(
            "tail condition holds numerically for ({}, {}): the split test is inadmissible",
            check.first, check.second
        )
    } else {
        format!(
            "tail condition not established for ({}, {}) [{}]: no conclusion",
            check.first,
            check.second,
            check.verdict.as_str()
        )
    };
    Claim {
        first: check.first.clone(),
        second: check.second.clone(),
        verdict: check.verdict,
        inadmissible,
        statement,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(f: LocationFamily1D) -> PairModel {
        PairModel::same(f).unwrap()
    }

    #[test]
    fn gaussian_slope_is_theta() {
        for theta in [0.5, 2.0] {
            let r = tail_ratio_diagnostic(
                &LocationFamily1D::Normal,
                theta,
                Direction::PlusInfinity,
                &probe_ladder(Direction::PlusInfinity, 4, 10),
            )
            .unwrap();
            assert!((r.slope_estimate - theta).abs() < 1e-9);
            assert_eq!(r.classification, Classification::Diverges);
        }
    }

    #[test]
    fn laplace_limit_is_exp_theta() {
        let r = tail_ratio_diagnostic(
            &LocationFamily1D::Laplace,
            1.0,
            Direction::PlusInfinity,
            &probe_ladder(Direction::PlusInfinity, 4, 10),
        )
        .unwrap();
        match r.classification {
            Classification::FiniteLimit(v) => assert!((v - 1f64.exp()).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn symmetric_families_mirror() {
        for f in LocationFamily1D::builtins() {
            let a = tail_ratio_diagnostic(&f, 1.0, Direction::PlusInfinity, &probe_ladder(Direction::PlusInfinity, 4, 8))
                .unwrap();
            let b = tail_ratio_diagnostic(&f, -1.0, Direction::MinusInfinity, &probe_ladder(Direction::MinusInfinity, 4, 8))
                .unwrap();
            for (p, q) in a.probes.iter().zip(&b.probes) {
                assert_eq!(p.log_ratio, q.log_ratio, "{f}");
            }
        }
    }

    #[test]
    fn verdict_table() {
        let expect = [
            (LocationFamily1D::Normal, Verdict::EvidenceSatisfied),
            (LocationFamily1D::Laplace, Verdict::Violated),
            (LocationFamily1D::Cauchy, Verdict::Violated),
            (LocationFamily1D::Logistic, Verdict::Violated),
            (LocationFamily1D::student_t(5.0).unwrap(), Verdict::Violated),
        ];
        for (f, v) in expect {
            let c = check_condition1(&pair(f), &DEFAULT_THETA_PROBES).unwrap();
            assert_eq!(c.verdict, v, "{f}");
        }
    }

    #[test]
    fn short_ladder_leaves_cauchy_unsettled() {
        let r = tail_ratio_diagnostic(
            &LocationFamily1D::Cauchy,
            2.0,
            Direction::PlusInfinity,
            &probe_ladder(Direction::PlusInfinity, 4, 10),
        )
        .unwrap();
        assert_eq!(r.classification, Classification::Inconclusive);
    }

    #[test]
    fn bad_inputs() {
        let grid = probe_ladder(Direction::PlusInfinity, 4, 10);
        assert!(tail_ratio_diagnostic(&LocationFamily1D::Normal, 0.0, Direction::PlusInfinity, &grid).is_err());
        assert!(tail_ratio_diagnostic(&LocationFamily1D::Normal, 1.0, Direction::MinusInfinity, &grid).is_err());
        assert!(check_condition1(&pair(LocationFamily1D::Normal), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn claims() {
        let g = check_condition1(&pair(LocationFamily1D::Normal), &DEFAULT_THETA_PROBES).unwrap();
        assert!(condition_to_claim(&g).inadmissible);
        let l = check_condition1(&pair(LocationFamily1D::Laplace), &DEFAULT_THETA_PROBES).unwrap();
        let c = condition_to_claim(&l);
        assert!(!c.inadmissible);
        assert!(c.statement.contains("no conclusion"));
    }
}
