//! Adaptive Gauss-Kronrod (7/15) quadrature.

use crate::error::{LabError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Integral of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(LabError::Input(format!(
            "integration limits must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let (sign, lo, hi) = if a < b { (1.0, a, b) } else { (-1.0, b, a) };
    let mut stack = vec![(lo, hi, 0u32)];
    let mut total = 0.0;
    while let Some((l, r, depth)) = stack.pop() {
        let (value, err) = gk15(&f, l, r);
        if !value.is_finite() {
            return Err(LabError::Numerical(format!(
                "non-finite integrand on [{l}, {r}]"
            )));
        }
        let local_tol = tol * (r - l) / (hi - lo);
        if err <= local_tol.max(1e-300) || depth >= 60 {
            total += value;
        } else {
            let m = 0.5 * (l + r);
            stack.push((l, m, depth + 1));
            stack.push((m, r, depth + 1));
        }
    }
    Ok(sign * total)
}

/// Integral of `f` over `[a, +inf)` via `x = a + t / (1 - t)`.
pub fn integrate_upper<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Result<f64> {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let y = f(a + t / s);
            if y == 0.0 {
                0.0
            } else {
                y / (s * s)
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integral of `f` over `(-inf, b]`.
pub fn integrate_lower<F: Fn(f64) -> f64>(f: F, b: f64, tol: f64) -> Result<f64> {
    integrate_upper(|x| f(2.0 * b - x), b, tol)
}

/// Integral of `f` over the whole real line, split at `center`.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, center: f64, tol: f64) -> Result<f64> {
    Ok(integrate_lower(&f, center, 0.5 * tol)? + integrate_upper(&f, center, 0.5 * tol)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x * x * x - x, -1.0, 2.0, 1e-14).unwrap();
        assert!((v - 2.25).abs() < 1e-13);
    }

    #[test]
    fn gaussian_over_real_line() {
        let v = integrate_real_line(|x| (-0.5 * x * x).exp(), 0.0, 1e-13).unwrap();
        assert!((v - (2.0 * PI).sqrt()).abs() < 1e-11);
    }

    #[test]
    fn cauchy_tails_converge() {
        let v = integrate_real_line(|x| 1.0 / (PI * (1.0 + x * x)), 0.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
        let half = integrate_upper(|x| 1.0 / (PI * (1.0 + x * x)), 1.0, 1e-12).unwrap();
        assert!((half - 0.25).abs() < 1e-10);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let v = integrate(|x| x.sin(), PI, 0.0, 1e-12).unwrap();
        assert!((v + 2.0).abs() < 1e-12);
    }
}
