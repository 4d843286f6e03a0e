use num_complex::Complex;
use uscparity::error::Error;
use proptest::prelude::*;
use uscparity::pointer::*;
use uscparity::model::{chi_for_label, derive, DerivedParams, ParityLabel, SystemParams};

fn setup(g_over_omega_r: f64, eps: f64) -> (SystemParams<f64>, DerivedParams<f64>) {
    let p = SystemParams::from_ratios(15.0, g_over_omega_r, 0.1, eps, 0.0).unwrap();
    let d = derive(&p).unwrap();
    (p, d)
}

#[test]
fn fixed_point_odd_label() {
    let (p, d) = setup(0.5, 0.5);
    let fp = rwa_fixed_point(&p, &d, ParityLabel::Ge);
    assert!((fp - Complex::new(0.0, -1.0)).norm() < 1e-15);
}

#[test]
fn fixed_point_even_label_arithmetic() {
    // chi_xy = 3: -0.5i / (3i + 0.5)
    let p = SystemParams::<f64>::from_ratios(15.0, 0.5, 0.1, 0.5, 0.0).unwrap();
    let d = derive(&p).unwrap();
    let fp = rwa_fixed_point(&p, &d, ParityLabel::Ee);
    let expected = Complex::new(0.0, -0.5) / Complex::new(0.5, 3.0);
    assert!((fp - expected).norm() < 1e-15);
    assert!((fp.re + 0.1622).abs() < 1e-4 && (fp.im + 0.0270).abs() < 1e-4);
}

#[test]
fn fixed_point_limits() {
    let (p, d) = setup(0.5, 0.0);
    assert_eq!(rwa_fixed_point(&p, &d, ParityLabel::Ee).norm(), 0.0);
    let (p, mut d) = setup(0.5, 0.5);
    d.chi_rwa = 1e12;
    assert!(rwa_fixed_point(&p, &d, ParityLabel::Ee).norm() < 1e-12);
}

#[test]
fn undriven_vacuum_is_stationary() {
    let (p, d) = setup(0.5, 0.0);
    for model in [ModelKind::Exact, ModelKind::Rwa] {
        let tr = integrate(&p, &d, ParityLabel::Ee, model, &PointerOptions::default()).unwrap();
        assert!(tr.amplitudes.iter().all(|a| a.norm() == 0.0));
    }
}

#[test]
fn odd_labels_agree_between_models() {
    let (p, d) = setup(0.5, 0.5);
    let opts = PointerOptions::default();
    let ex = integrate_exact(&p, &d, ParityLabel::Ge, &opts).unwrap();
    let rw = integrate_at(&p, &d, ParityLabel::Ge, ModelKind::Rwa, &opts, ex.times.clone()).unwrap();
    for (a, b) in ex.amplitudes.iter().zip(&rw.amplitudes) {
        assert!((a - b).norm() <= 1e-10);
    }
}

#[test]
fn rwa_matches_closed_form() {
    let (p, d) = setup(0.5, 0.5);
    let tr = integrate_rwa(&p, &d, ParityLabel::Ee, &PointerOptions::default()).unwrap();
    for (t, a) in tr.times.iter().zip(&tr.amplitudes) {
        let exact = rwa_analytic(&p, &d, ParityLabel::Ee, *t);
        assert!((a - exact).norm() < 1e-8, "t = {t}");
    }
}

#[test]
fn sample_grid_is_increasing_and_ends_at_horizon() {
    let opts = PointerOptions::<f64>::default();
    let times = default_sample_times(1.0, 30.0, &opts);
    assert!(times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(*times.last().unwrap(), 10.0);
    assert_eq!(times[0], 0.0);
    // no modulation: uniform fine grid over the window
    let flat = default_sample_times(1.0, 0.0, &opts);
    assert!(flat.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(*flat.last().unwrap(), 10.0);
}

#[test]
fn steady_state_needs_horizon() {
    let (p, d) = setup(0.5, 0.5);
    let opts = PointerOptions::default().with_t_end(5.0);
    let tr = integrate_rwa(&p, &d, ParityLabel::Ge, &opts).unwrap();
    assert!(matches!(steady_state(&tr), Err(Error::InsufficientHorizon { .. })));
}

#[test]
fn tolerance_range_is_enforced() {
    let (p, d) = setup(0.5, 0.5);
    let opts = PointerOptions::default().with_tol(1e-3);
    assert!(integrate_rwa(&p, &d, ParityLabel::Ge, &opts).is_err());
    let opts = PointerOptions::default().with_t_end(0.0);
    assert!(integrate_exact(&p, &d, ParityLabel::Ge, &opts).is_err());
}

fn steady(p: &SystemParams<f64>, d: &DerivedParams<f64>, label: ParityLabel, model: ModelKind) -> Complex<f64> {
    let tr = integrate(p, d, label, model, &PointerOptions::default()).unwrap();
    steady_state(&tr).unwrap().mean
}

#[test]
fn exact_even_pointers_are_not_mirror_images() {
    let (p, d) = setup(0.5, 0.5);
    let ee = steady(&p, &d, ParityLabel::Ee, ModelKind::Exact);
    let gg = steady(&p, &d, ParityLabel::Gg, ModelKind::Exact);
    assert!((ee - Complex::new(-0.10448, -0.011214)).norm() < 1e-4, "{ee}");
    assert!((gg - Complex::new(0.088339, -0.007752)).norm() < 1e-4, "{gg}");
    assert!((gg + ee.conj()).norm() > 1e-2);
    // closer to the origin along I than the rotating-wave pointer
    let rwa = steady(&p, &d, ParityLabel::Ee, ModelKind::Rwa);
    assert!(ee.re.abs() < rwa.re.abs());
}

#[test]
fn exact_model_tends_to_shifted_rotating_wave_path() {
    // at g/omega_r = 0.01 the counter-rotating term only adds a ripple of
    // relative size chi_xy / 2 omega_m; the path keeps the exact shift
    let (p, d) = setup(0.01, 0.5);
    for label in ParityLabel::ALL {
        let chi_xy = chi_for_label(&d, label, false);
        let lambda = Complex::new(0.5 * p.kappa, d.delta_r + chi_xy);
        let fp = Complex::new(0.0, -p.epsilon_m) / lambda;
        let ripple = 2.0 * chi_xy.abs() / (2.0 * p.omega_m) * (2.0 * p.epsilon_m / p.kappa);
        let tr = integrate_exact(&p, &d, label, &PointerOptions::default()).unwrap();
        for (&t, &a) in tr.times.iter().zip(&tr.amplitudes) {
            let want = fp * (1.0 - (-lambda * t).exp());
            assert!((a - want).norm() <= ripple + 1e-8, "{label} at t = {t}: {a} vs {want}");
        }
    }
}

#[test]
fn single_precision_integration() {
    let p = SystemParams::<f32>::from_ratios(15.0, 0.5, 0.1, 0.5, 0.0).unwrap();
    let d = derive(&p).unwrap();
    let opts = PointerOptions::<f32>::default().with_tol(1e-5);
    let tr = integrate_rwa(&p, &d, ParityLabel::Ge, &opts).unwrap();
    let end = tr.final_amplitude();
    assert!((end.im + 1.0).abs() < 1e-2);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn linear_in_drive(gw in 0.05f64..0.5, k in 0.1f64..3.0, exact in any::<bool>()) {
        let model = if exact { ModelKind::Exact } else { ModelKind::Rwa };
        let (p, d) = setup(gw, 0.5);
        let scaled = p.with_drive(0.5 * k);
        let a = integrate(&p, &d, ParityLabel::Ee, model, &PointerOptions::default()).unwrap();
        let b = integrate(&scaled, &d, ParityLabel::Ee, model, &PointerOptions::default()).unwrap();
        for (x, y) in a.amplitudes.iter().zip(&b.amplitudes) {
            prop_assert!((x * k - y).norm() <= 1e-6 * k);
        }
    }

    #[test]
    fn odd_labels_are_degenerate(gw in 0.05f64..0.5, exact in any::<bool>()) {
        let model = if exact { ModelKind::Exact } else { ModelKind::Rwa };
        let (p, d) = setup(gw, 0.5);
        let ge = integrate(&p, &d, ParityLabel::Ge, model, &PointerOptions::default()).unwrap();
        let eg = integrate(&p, &d, ParityLabel::Eg, model, &PointerOptions::default()).unwrap();
        prop_assert_eq!(ge.amplitudes, eg.amplitudes);
    }

    #[test]
    fn rwa_even_pointers_are_mirror_images(gk in 5.0f64..50.0, gw in 0.01f64..0.5, eps in 0.1f64..2.0) {
        let p = SystemParams::from_ratios(gk, gw, 0.1, eps, 0.0).unwrap();
        let d = derive(&p).unwrap();
        let ee = integrate_rwa(&p, &d, ParityLabel::Ee, &PointerOptions::default()).unwrap();
        let gg = integrate_rwa(&p, &d, ParityLabel::Gg, &PointerOptions::default()).unwrap();
        for (a, b) in ee.amplitudes.iter().zip(&gg.amplitudes) {
            prop_assert!((a.conj() + b).norm() <= 1e-8 * eps);
        }
    }

    #[test]
    fn rwa_amplitude_is_bounded(gk in 5.0f64..50.0, gw in 0.01f64..0.5, eps in 0.1f64..2.0, dr in -2.0f64..2.0) {
        let p = SystemParams::from_ratios(gk, gw, 0.1, eps, dr).unwrap();
        let d = derive(&p).unwrap();
        for label in ParityLabel::ALL {
            let tr = integrate_rwa(&p, &d, label, &PointerOptions::default()).unwrap();
            prop_assert!(tr.max_abs() <= 2.0 * eps / p.kappa * (1.0 + 1e-9));
        }
    }

    #[test]
    fn time_scales_with_units(gw in 0.05f64..0.5, s in 0.2f64..5.0) {
        let (p, d) = setup(gw, 0.5);
        let ps = p.scaled(s);
        let ds = derive(&ps).unwrap();
        let a = integrate_exact(&p, &d, ParityLabel::Ee, &PointerOptions::default()).unwrap();
        let b = integrate_exact(&ps, &ds, ParityLabel::Ee, &PointerOptions::default()).unwrap();
        prop_assert!((a.t_end() - b.t_end() * s).abs() <= 1e-9 * a.t_end());
        prop_assert!((a.final_amplitude() - b.final_amplitude()).norm() <= 1e-6);
    }
}
