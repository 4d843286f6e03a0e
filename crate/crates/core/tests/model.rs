use uscparity::error::Error;
use proptest::prelude::*;
use uscparity::model::*;

fn operating_point(g_over_omega_r: f64) -> SystemParams<f64> {
    SystemParams::from_ratios(15.0, g_over_omega_r, 0.1, 0.5, 0.0).unwrap()
}

#[test]
fn rwa_shift_at_paper_point() {
    let d = derive(&operating_point(0.5)).unwrap();
    assert!((d.chi_rwa - 1.5).abs() < 1e-12);
}

#[test]
fn exact_shift_at_ultrastrong_point() {
    let p = operating_point(0.5);
    assert!((p.omega_r - 30.0).abs() < 1e-12);
    assert!((p.omega_a - 180.0).abs() < 1e-12);
    let d = derive(&p).unwrap();
    assert!((d.sigma - 210.0).abs() < 1e-12);
    // independent evaluation: 15 * (1/10 + 1/14)
    let expected = 15.0 * (0.1 + 1.0 / 14.0);
    assert!((d.chi - expected).abs() < 1e-12);
    assert!((d.chi - 2.5714).abs() < 1e-4);
    assert!(d.chi > d.chi_rwa && d.chi_rwa > 0.0);
    assert!((d.lamb_shifted_omega_a - p.omega_a - d.chi).abs() < 1e-12);
}

#[test]
fn n_crit_identity() {
    for r in [0.001, 0.1, 0.5] {
        let p = operating_point(r);
        let d = derive(&p).unwrap();
        let ratio = 2.0 * p.g / d.delta;
        assert!((d.n_crit * ratio * ratio - 1.0).abs() < 1e-12);
    }
}

#[test]
fn degenerate_detuning_is_rejected() {
    let mut p = operating_point(0.5);
    p.omega_a = p.omega_r;
    assert!(matches!(derive(&p), Err(Error::DegenerateDetuning { .. })));
}

#[test]
fn invalid_params_are_rejected() {
    assert!(SystemParams::from_ratios(0.0, 0.5, 0.1, 0.5, 0.0).is_err());
    assert!(SystemParams::from_ratios(15.0, 0.5, 0.1, -1.0, 0.0).is_err());
    let mut p = operating_point(0.5);
    p.kappa = 0.0;
    assert!(p.validate().is_err());
    p.kappa = 1.0;
    p.gamma_phi = f64::NAN;
    assert!(p.validate().is_err());
}

#[test]
fn label_shifts() {
    let d = derive(&operating_point(0.5)).unwrap();
    let ee = chi_for_label(&d, ParityLabel::Ee, false);
    assert!((ee - 2.0 * 15.0 * (0.1 + 1.0 / 14.0)).abs() < 1e-12);
    assert!((ee - 5.1429).abs() < 1e-4);
    assert_eq!(chi_for_label(&d, ParityLabel::Gg, false), -ee);
    assert_eq!(chi_for_label(&d, ParityLabel::Ge, false), 0.0);
    assert_eq!(chi_for_label(&d, ParityLabel::Eg, true), 0.0);
    assert!((chi_for_label(&d, ParityLabel::Ee, true) - 3.0).abs() < 1e-12);
}

#[test]
fn validity_flags() {
    let p = operating_point(0.5);
    let d = derive(&p).unwrap();
    assert!((d.n_crit - 25.0).abs() < 1e-12);
    assert_eq!(validate_dispersive(&p, &d, 1.0).overall(), Validity::Pass);
    assert_eq!(validate_dispersive(&p, &d, d.n_crit).photons, Validity::Warn);

    let strong = SystemParams::from_ratios(15.0, 0.5, 0.5, 0.5, 0.0).unwrap();
    let ds = derive(&strong).unwrap();
    assert_eq!(validate_dispersive(&strong, &ds, 0.0).coupling, Validity::Warn);
}

#[test]
fn label_parsing_round_trip() {
    for l in ParityLabel::ALL {
        assert_eq!(l.as_str().parse::<ParityLabel>().unwrap(), l);
    }
    assert!("xx".parse::<ParityLabel>().is_err());
}

#[test]
fn single_precision_instantiation() {
    let p = SystemParams::<f32>::from_ratios(15.0, 0.5, 0.1, 0.5, 0.0).unwrap();
    let d = derive(&p).unwrap();
    assert!((d.chi - 2.5714).abs() < 1e-3);
}

proptest! {
    #[test]
    fn shift_decomposition(gk in 1.0f64..100.0, gw in 1e-3f64..1.0, gd in 0.01f64..0.2, dr in -3.0f64..3.0) {
        let p = SystemParams::from_ratios(gk, gw, gd, 0.5, dr).unwrap();
        let d = derive(&p).unwrap();
        let g2 = p.g * p.g;
        prop_assert!((d.chi - d.chi_rwa - g2 / d.sigma).abs() <= 1e-12 * d.chi);
        prop_assert!(d.chi > d.chi_rwa);
        prop_assert!((d.chi_rwa - p.g * gd).abs() <= 1e-12 * d.chi_rwa);
        prop_assert!((d.chi + d.j_coupling - 2.0 * d.chi_rwa).abs() <= 1e-12 * d.chi);
        prop_assert!((d.delta_r - dr).abs() <= 1e-9 * p.omega_r);
        prop_assert!((d.n_crit - 0.25 / (gd * gd)).abs() <= 1e-9 * d.n_crit);
    }

    #[test]
    fn label_shifts_are_antisymmetric(gk in 1.0f64..100.0, gw in 1e-3f64..1.0, rwa in any::<bool>()) {
        let d = derive(&SystemParams::from_ratios(gk, gw, 0.1, 0.5, 0.0).unwrap()).unwrap();
        let ee = chi_for_label(&d, ParityLabel::Ee, rwa);
        prop_assert_eq!(chi_for_label(&d, ParityLabel::Gg, rwa), -ee);
        prop_assert_eq!(chi_for_label(&d, ParityLabel::Ge, rwa), 0.0);
        prop_assert_eq!(chi_for_label(&d, ParityLabel::Eg, rwa), 0.0);
        let chi = if rwa { d.chi_rwa } else { d.chi };
        prop_assert!((ee - 2.0 * chi).abs() <= 1e-12 * ee);
    }

    #[test]
    fn derived_quantities_scale_with_units(gk in 1.0f64..50.0, gw in 0.01f64..0.5, s in 0.1f64..10.0) {
        let p = SystemParams::from_ratios(gk, gw, 0.1, 0.5, 0.0).unwrap();
        let a = derive(&p).unwrap();
        let b = derive(&p.scaled(s)).unwrap();
        for (x, y) in [(a.delta, b.delta), (a.sigma, b.sigma), (a.chi, b.chi), (a.chi_rwa, b.chi_rwa), (a.j_coupling, b.j_coupling)] {
            prop_assert!((x * s - y).abs() <= 1e-12 * y.abs());
        }
        prop_assert!((a.n_crit - b.n_crit).abs() <= 1e-12 * a.n_crit);
    }
}
