use num_complex::Complex;
use uscparity::error::Error;
use uscparity::ode::*;

#[test]
fn exponential_decay_with_rotation() {
    // y' = (-1/2 - 3i) y, y(0) = 1
    let lambda = Complex::new(-0.5, -3.0);
    let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
    let (ys, stats) = integrate_sampled(
        |_t, y| lambda * y,
        0.0,
        Complex::new(1.0, 0.0),
        10.0,
        &times,
        &Dopri5Options::new(1e-11, 1e-13),
    )
    .unwrap();
    assert_eq!(ys.len(), times.len());
    for (t, y) in times.iter().zip(&ys) {
        let exact = (lambda * t).exp();
        assert!((y - exact).norm() < 1e-9, "t = {t}");
    }
    assert!(stats.accepted > 0);
}

#[test]
fn step_cap_is_respected() {
    let times = [1.0];
    let (_, stats) = integrate_sampled(
        |_t, _y| Complex::new(1.0, 0.0),
        0.0,
        Complex::new(0.0, 0.0),
        1.0,
        &times,
        &Dopri5Options::new(1e-6, 1e-6).h_max(Some(0.01)),
    )
    .unwrap();
    assert!(stats.accepted >= 100);
}

#[test]
fn bad_sample_grid_is_rejected() {
    let r = integrate_sampled(
        |_t, y| y,
        0.0,
        Complex::new(1.0, 0.0),
        1.0,
        &[0.5, 0.2],
        &Dopri5Options::new(1e-6, 1e-6),
    );
    assert!(r.is_err());
}

#[test]
fn blow_up_reports_failure_time() {
    // y' = y^2 from y(0) = 1 blows up at t = 1
    let r = integrate_sampled(
        |_t, y| y * y,
        0.0,
        Complex::new(1.0, 0.0),
        2.0,
        &[],
        &Dopri5Options::new(1e-8, 1e-8),
    );
    match r {
        Err(Error::Integration { time, .. }) => assert!((time - 1.0).abs() < 1e-2),
        other => panic!("expected integration failure, got {other:?}"),
    }
}
