//! Bracketed scalar root finding.

use crate::error::{LabError, Result};

/// Stopping rule for [`find_root`].
#[derive(Clone, Copy, Debug)]
pub struct RootOptions {
    /// Stop once `|f(x)| <= f_tol`.
    pub f_tol: f64,
    /// Stop once the bracket is narrower than `x_tol * max(1, |x|)`.
    pub x_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            f_tol: 0.0,
            x_tol: 4.0 * f64::EPSILON,
            max_iter: 400,
        }
    }
}

/// Grows `[lo, hi]` geometrically (around its midpoint) until `f` changes sign.
pub fn expand_bracket<F>(f: &F, mut lo: f64, mut hi: f64, max_steps: usize) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    if !(lo < hi) {
        return Err(LabError::Bracket {
            lo,
            hi,
            reason: "empty initial bracket".into(),
        });
    }
    for _ in 0..max_steps {
        let (flo, fhi) = (f(lo), f(hi));
        if flo.is_nan() || fhi.is_nan() {
            break;
        }
        if flo.signum() != fhi.signum() || flo == 0.0 || fhi == 0.0 {
            return Ok((lo, hi));
        }
        let width = hi - lo;
        lo -= width;
        hi += width;
    }
    Err(LabError::Bracket {
        lo,
        hi,
        reason: "no sign change found".into(),
    })
}

/// Root of `f` inside a sign-changing bracket `[lo, hi]`.
///
/// Regula falsi with the Illinois modification, falling back to bisection
/// whenever a step fails to halve the bracket.
pub fn find_root<F>(f: F, lo: f64, hi: f64, opts: RootOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(LabError::Bracket {
            lo,
            hi,
            reason: format!("f(lo) = {fa}, f(hi) = {fb} do not bracket a root"),
        });
    }
    // side that was retained on the previous step: -1 = a, +1 = b
    let mut retained = 0i8;
    for _ in 0..opts.max_iter {
        let width = b - a;
        let mut x = b - fb * (b - a) / (fb - fa);
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if fx.is_nan() {
            return Err(LabError::Numerical(format!("root finder hit NaN at {x}")));
        }
        if fx == 0.0 || fx.abs() <= opts.f_tol {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if retained == 1 {
                fb *= 0.5;
            }
            retained = 1;
        } else {
            b = x;
            fb = fx;
            if retained == -1 {
                fa *= 0.5;
            }
            retained = -1;
        }
        if b - a > 0.5 * width {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if fm == 0.0 {
                return Ok(m);
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
            retained = 0;
        }
        let scale = a.abs().max(b.abs()).max(1.0);
        if b - a <= opts.x_tol * scale {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
    }
    Err(LabError::Numerical(format!(
        "root finder did not converge on [{a}, {b}]"
    )))
}
