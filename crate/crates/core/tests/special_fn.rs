use num_complex::Complex;
use uscparity::error::Error;
use proptest::prelude::*;
use uscparity::special_fn::*;

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

#[test]
fn erfc_at_zero_is_one() {
    let v = erfc_complex(c(0.0, 0.0)).unwrap();
    assert_eq!(v, c(1.0, 0.0));
    assert_eq!(erfc_real(0.0_f64).unwrap(), 1.0);
}

#[test]
fn erfc_of_one() {
    // mpmath, 30 digits
    let v = erfc_complex(c(1.0, 0.0)).unwrap();
    assert!((v.re - 0.157299207050285130658779364917).abs() < 1e-15);
    assert_eq!(v.im, 0.0);
}

#[test]
fn erfc_of_i() {
    let v = erfc_complex(c(0.0, 1.0)).unwrap();
    assert_eq!(v.re, 1.0);
    assert!((v.im + 1.65042575879754287602533772956).abs() < 1e-14);
}

#[test]
fn erfc_negative_real_feeds_fidelity() {
    let v = erfc_real(-0.688_f64).unwrap();
    assert!((v - 1.66943622635906682420634598567).abs() < 1e-14);
}

#[test]
fn asymptotic_region() {
    assert!(erfc_real(30.0_f64).unwrap().abs() < 1e-15);
    assert_eq!(erfc_real(31.0_f64).unwrap(), 0.0);
    assert_eq!(erfc_real(-31.0_f64).unwrap(), 2.0);
    assert_eq!(erfc_complex(c(25.0, -25.0)).unwrap(), c(0.0, 0.0));
}

#[test]
fn non_finite_is_rejected() {
    assert!(matches!(erfc_real(f64::NAN), Err(Error::InvalidArgument(_))));
    assert!(matches!(erfc_complex(c(f64::INFINITY, 0.0)), Err(Error::InvalidArgument(_))));
    assert!(matches!(erfc_complex(c(0.0, f64::NAN)), Err(Error::InvalidArgument(_))));
}

#[test]
fn overflow_near_imaginary_axis_is_reported() {
    // |erfc(27i)| ~ exp(729) > f64::MAX
    assert!(matches!(erfc_complex(c(0.0, 27.0)), Err(Error::Overflow(_))));
}

#[test]
fn conjugation_is_exact() {
    for &(x, y) in &[(0.3, 0.7), (-2.0, 3.5), (5.0, 0.01), (-0.2, 9.0), (1.2, -0.4)] {
        let a = erfc_complex(c(x, y)).unwrap();
        let b = erfc_complex(c(x, -y)).unwrap();
        assert_eq!(a.conj(), b);
    }
}

#[test]
fn faddeeva_on_imaginary_axis_is_scaled_erfc() {
    // w(iy) = exp(y^2) erfc(y)
    for &y in &[0.5, 2.0, 6.0, 12.0] {
        let w = faddeeva_upper(c(0.0, y)).unwrap();
        let expected = (y * y).exp() * erfc_real(y).unwrap();
        assert!((w.re - expected).abs() <= 1e-13 * expected, "y = {y}");
        assert!(w.im.abs() < 1e-15);
    }
    assert!(faddeeva_upper(c(0.0, -1.0)).is_err());
}

#[test]
fn single_precision_instantiation() {
    let v = erfc_complex(Complex::new(0.5_f32, 0.25)).unwrap();
    let r = erfc_complex(c(0.5, 0.25)).unwrap();
    assert!((v.re as f64 - r.re).abs() < 1e-6);
    assert!((v.im as f64 - r.im).abs() < 1e-6);
}

fn reference_points() -> Vec<(Complex<f64>, Complex<f64>)> {
    let data = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/erfc_reference.csv")).unwrap();
    data.lines()
        .skip(1)
        .map(|line| {
            let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            (c(v[0], v[1]), c(v[2], v[3]))
        })
        .collect()
}

#[test]
fn matches_high_precision_reference() {
    let points = reference_points();
    assert_eq!(points.len(), 1000);
    for (z, want) in points {
        let got = erfc_complex(z).unwrap();
        let rel = (got - want).norm() / want.norm();
        assert!(rel <= 1e-10, "z = {z}: {got} vs {want} ({rel:e})");
    }
}

#[test]
fn real_erfc_matches_quadrature() {
    // erfc(x) = 2/sqrt(pi) int_x^{x+12} e^{-t^2} dt, tail below 1e-60
    let gl = uscparity::quadrature::GaussLegendre::new(30);
    for k in 0..=60 {
        let x = -6.0 + 0.2 * k as f64;
        let integral = gl.integrate(x, x + 12.0, 24, 0.0, |t: f64| (-t * t).exp());
        let want = 2.0 / std::f64::consts::PI.sqrt() * integral;
        let got = erfc_real(x).unwrap();
        assert!((got - want).abs() <= 1e-13 * want.max(1e-300) + 1e-300, "x = {x}: {got} vs {want}");
    }
}

proptest! {
    #[test]
    fn conjugation_symmetry(x in -12.0f64..12.0, y in -12.0f64..12.0) {
        let a = erfc_complex(c(x, y)).unwrap();
        let b = erfc_complex(c(x, -y)).unwrap();
        prop_assert!((a.conj() - b).norm() <= 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn reflection_identity(x in -10.0f64..10.0, y in -10.0f64..10.0) {
        // erfc(-z) = 2 - erfc(z)
        let a = erfc_complex(c(x, y)).unwrap();
        let b = erfc_complex(c(-x, -y)).unwrap();
        prop_assert!((b - (c(2.0, 0.0) - a)).norm() <= 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn real_axis_agrees(x in -8.0f64..8.0) {
        let a = erfc_complex(c(x, 0.0)).unwrap();
        let r = erfc_real(x).unwrap();
        prop_assert!(a.im == 0.0);
        prop_assert!((a.re - r).abs() <= 1e-14 * r.max(1e-300));
    }

    #[test]
    fn derivative_matches_gaussian(x in -3.0f64..3.0, y in -3.0f64..3.0) {
        // d/dz erfc(z) = -2/sqrt(pi) e^{-z^2}
        let z = c(x, y);
        let h = 1e-5;
        let d = (erfc_complex(z + h).unwrap() - erfc_complex(z - h).unwrap()) / (2.0 * h);
        let want = -(-z * z).exp() * (2.0 / std::f64::consts::PI.sqrt());
        prop_assert!((d - want).norm() <= 1e-7 * want.norm().max(1.0));
    }
}
