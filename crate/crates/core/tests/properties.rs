use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use splitlab_core::bayes::{likelihood_ratio, Prior};
use splitlab_core::conditions::{probe_ladder, tail_ratio_diagnostic, Direction, DEFAULT_LADDER};
use splitlab_core::stat_tests::{blended, chi_square_d, moran_1d, moran_gaussian_d, phi_plus, z_two_sided};
use splitlab_core::{DataModel, LocationFamily1D, Shift};

fn family() -> impl Strategy<Value = LocationFamily1D> {
    prop_oneof![
        Just(LocationFamily1D::Normal),
        Just(LocationFamily1D::Laplace),
        Just(LocationFamily1D::Cauchy),
        Just(LocationFamily1D::Logistic),
        (1.0f64..30.0).prop_map(|nu| LocationFamily1D::student_t(nu).unwrap()),
    ]
}

fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    m.qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quantile_inverts_cdf(f in family(), t in -5.0f64..5.0) {
        let back = f.quantile(f.cdf(t)).unwrap();
        prop_assert!((back - t).abs() < 1e-8, "{f}: {t} -> {back}");
    }

    #[test]
    fn symmetric_quantiles(f in family(), p in 0.001f64..0.999) {
        prop_assert!((f.quantile(p).unwrap() + f.quantile(1.0 - p).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn split_region_is_open(
        f in family(),
        a in -2.0f64..2.0,
        x1 in -5.0f64..5.0,
        x2 in -5.0f64..5.0,
    ) {
        let test = moran_1d(a, 0.05, &f).unwrap();
        let splitlab_core::Test::SplitRegion(p) = &test else { unreachable!() };
        for x in [[a, x2], [x1, p.b1], [x1, p.b2]] {
            let on_b1 = x[1] == p.b1 && x[0] > a;
            let on_b2 = x[1] == p.b2 && x[0] < a;
            if x[0] == a || on_b1 || on_b2 {
                prop_assert_eq!(test.evaluate(&x).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn blend_stays_in_band(
        zeta in 0.5f64..50.0,
        extra in 0.0f64..100.0,
        x1 in -200.0f64..200.0,
        x2 in -200.0f64..200.0,
    ) {
        let eta = zeta + extra + 1.0;
        let base = moran_1d(0.0, 0.05, &LocationFamily1D::Normal).unwrap();
        let other = phi_plus(-3.0, 0.05, &LocationFamily1D::Normal).unwrap();
        let b = blended(base, other, zeta, eta).unwrap();
        let v = b.evaluate(&[x1, x2]).unwrap();
        prop_assert!(v <= 1.0);
        prop_assert!(v >= (1.0f64 / eta).min(1.0));
    }

    #[test]
    fn gaussian_d_tests_are_rotation_invariant(d in 2usize..=10, n in 2usize..=5, seed in any::<u64>()) {
        let q = random_orthogonal(d, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let x: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>();
        let rows = DMatrix::from_row_slice(n, d, &x);
        let rotated = &rows * q.transpose();
        let mut y = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..d {
                y[i * d + j] = rotated[(i, j)];
            }
        }
        let moran = moran_gaussian_d(0.05, 1, n, d).unwrap();
        let chi = chi_square_d(0.05, n, d).unwrap();
        for t in [&moran, &chi] {
            prop_assert_eq!(t.evaluate(&x).unwrap(), t.evaluate(&y).unwrap());
        }
    }

    #[test]
    fn likelihood_ratio_is_positive_and_finite(
        th in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
        x1 in -30.0f64..30.0,
        x2 in -30.0f64..30.0,
    ) {
        let m = DataModel::gaussian_pair();
        for prior in [Prior::point(Shift::scalar(th)).unwrap(), Prior::symmetric(Shift::scalar(th)).unwrap()] {
            let l = likelihood_ratio(&prior, &m, &[x1, x2]).unwrap();
            prop_assert!(l > 0.0 && l.is_finite(), "{l}");
        }
    }

    #[test]
    fn z_two_sided_is_sign_symmetric(x1 in -6.0f64..6.0, x2 in -6.0f64..6.0) {
        let z = z_two_sided(0.05, 2).unwrap();
        prop_assert_eq!(z.evaluate(&[x1, x2]).unwrap(), z.evaluate(&[-x1, -x2]).unwrap());
    }
}

#[test]
fn likelihood_ratio_has_no_jumps() {
    // log L for the symmetric two-atom prior is smooth; second differences on
    // a fine grid stay within the bound implied by its Hessian (|H| <= 2 th^2).
    let m = DataModel::gaussian_pair();
    let prior = Prior::symmetric(Shift::scalar(1.0)).unwrap();
    let h = 0.01;
    let log_l = |x1: f64, x2: f64| likelihood_ratio(&prior, &m, &[x1, x2]).unwrap().ln();
    for i in -400..=400 {
        let x1 = i as f64 * 0.0125;
        for x2 in [-3.0, -0.7, 0.0, 1.3, 4.0] {
            let d2 = log_l(x1 + h, x2) - 2.0 * log_l(x1, x2) + log_l(x1 - h, x2);
            assert!(d2.abs() <= 2.0 * h * h + 1e-10, "{x1},{x2}: {d2}");
        }
    }
}

#[test]
fn even_families_mirror_probe_by_probe() {
    for f in LocationFamily1D::builtins() {
        for th in [0.5, 1.0, 2.0] {
            let plus = tail_ratio_diagnostic(&f, th, Direction::PlusInfinity, &probe_ladder(Direction::PlusInfinity, 4, 24)).unwrap();
            let minus = tail_ratio_diagnostic(&f, -th, Direction::MinusInfinity, &probe_ladder(Direction::MinusInfinity, 4, 24)).unwrap();
            assert_eq!(plus.probes.len(), minus.probes.len());
            for (p, q) in plus.probes.iter().zip(&minus.probes) {
                assert_eq!(p.log_ratio, q.log_ratio);
            }
            assert_eq!(plus.classification, minus.classification);
        }
    }
}

#[test]
fn classification_survives_one_more_rung() {
    let (lo, hi) = DEFAULT_LADDER;
    for f in LocationFamily1D::builtins() {
        for th in [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0] {
            for dir in [Direction::PlusInfinity, Direction::MinusInfinity] {
                let a = tail_ratio_diagnostic(&f, th, dir, &probe_ladder(dir, lo, hi)).unwrap();
                let b = tail_ratio_diagnostic(&f, th, dir, &probe_ladder(dir, lo, hi + 1)).unwrap();
                let same = match (a.classification, b.classification) {
                    (splitlab_core::conditions::Classification::FiniteLimit(u), splitlab_core::conditions::Classification::FiniteLimit(v)) => {
                        (u - v).abs() <= 1e-3 * u.max(v).max(1e-300)
                    }
                    (x, y) => x == y,
                };
                assert!(same, "{f} th={th} {dir:?}: {:?} vs {:?}", a.classification, b.classification);
            }
        }
    }
}
