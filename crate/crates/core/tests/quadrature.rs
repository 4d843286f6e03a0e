use uscparity::quadrature::*;

#[test]
fn weights_sum_to_two() {
    for n in [1, 2, 5, 20, 33] {
        let gl = GaussLegendre::new(n);
        let s: f64 = gl.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-13, "n = {n}");
    }
}

#[test]
fn exact_for_polynomials() {
    let gl = GaussLegendre::new(5);
    // degree 9 is exact for 5 nodes
    let v = gl.integrate(0.0_f64, 2.0, 1, 0.0, |x| x.powi(9));
    assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-11);
}

#[test]
fn gaussian_tail() {
    let gl = GaussLegendre::new(20);
    let v = gl.integrate(-10.0_f64, 10.0, 40, 0.0, |x| (-x * x).exp());
    assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-14);
}
