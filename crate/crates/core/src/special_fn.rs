//! Complementary error function of real and complex argument.
//!
//! Evaluation is regionalized. Arguments are first folded into the closed
//! first quadrant using `erfc(conj z) = conj(erfc z)` and
//! `erfc(-z) = 2 - erfc(z)`, so both identities hold by construction. Inside
//! the quadrant a Maclaurin series covers `|z| <= SERIES_RADIUS`; elsewhere
//! `erfc(z) = exp(-z^2) w(iz)` with the Faddeeva function `w` evaluated by
//! Weideman's rational expansion (`|iz| < CF_RADIUS`) or the Laplace
//! continued fraction (`|iz| >= CF_RADIUS`). The imaginary axis is handled
//! separately so that `Re erfc(iy) = 1` exactly.
//!
//! Beyond `|z| > ASYMPTOTIC_RADIUS` the function returns its asymptotic
//! value: `0` for `Re z >= 0` and `2` for `Re z < 0`.

use std::sync::OnceLock;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Complex scalar used throughout the crate.
pub type ComplexValue<T> = Complex<T>;

/// Radius beyond which the asymptotic value is returned.
pub const ASYMPTOTIC_RADIUS: f64 = 30.0;

const SERIES_RADIUS: f64 = 1.5;
const CF_RADIUS: f64 = 8.0;
const WEIDEMAN_N: usize = 40;

/// `erfc(z)` for complex `z`.
///
/// Returns [`Error::InvalidArgument`] for non-finite input and
/// [`Error::Overflow`] when the value exceeds the floating-point range
/// (possible only near the imaginary axis, where `|erfc z| ~ exp(Im(z)^2)`).
pub fn erfc_complex<T: Real>(z: Complex<T>) -> Result<Complex<T>> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "erfc of non-finite argument {:?}",
            (z.re.as_f64(), z.im.as_f64())
        )));
    }
    let v = erfc_folded(z);
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!("{} {:+}i", z.re, z.im)))
    }
}

/// `erfc(x)` for real `x`, evaluated on the same path as [`erfc_complex`].
pub fn erfc_real<T: Real>(x: T) -> Result<T> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("erfc of non-finite argument {x}")));
    }
    Ok(erfc_folded(Complex::new(x, T::zero())).re)
}

/// Faddeeva function `w(z) = exp(-z^2) erfc(-iz)` for `Im z >= 0`.
///
/// Exposed for diagnostics; the lower half-plane is not supported.
pub fn faddeeva_upper<T: Real>(z: Complex<T>) -> Result<Complex<T>> {
    if !(z.re.is_finite() && z.im.is_finite()) || z.im < T::zero() {
        return Err(Error::InvalidArgument(format!(
            "faddeeva_upper needs finite z with Im z >= 0, got {:?}",
            (z.re.as_f64(), z.im.as_f64())
        )));
    }
    Ok(faddeeva_upper_unchecked(z))
}

fn erfc_folded<T: Real>(z: Complex<T>) -> Complex<T> {
    let zero = T::zero();
    if z.norm() > T::lit(ASYMPTOTIC_RADIUS) {
        let two = T::lit(2.0);
        return if z.re >= zero { Complex::new(zero, zero) } else { Complex::new(two, zero) };
    }
    if z.im < zero {
        return erfc_folded(z.conj()).conj();
    }
    if z.re < zero {
        let v = erfc_folded(-z);
        return Complex::new(T::lit(2.0) - v.re, -v.im);
    }
    erfc_first_quadrant(z)
}

fn erfc_first_quadrant<T: Real>(z: Complex<T>) -> Complex<T> {
    let one = T::one();
    if z.norm() <= T::lit(SERIES_RADIUS) {
        return Complex::new(one, T::zero()) - erf_maclaurin(z);
    }
    if z.re == T::zero() {
        // erfc(iy) = 1 - i erfi(y), erfi(y) = exp(y^2) Im w(y)
        let y = z.im;
        let w = faddeeva_upper_unchecked(Complex::new(y, T::zero()));
        return Complex::new(one, -(y * y).exp() * w.im);
    }
    let iz = Complex::new(-z.im, z.re);
    let minus_z2 = Complex::new(z.im * z.im - z.re * z.re, -(T::lit(2.0) * z.re * z.im));
    minus_z2.exp() * faddeeva_upper_unchecked(iz)
}

fn erf_maclaurin<T: Real>(z: Complex<T>) -> Complex<T> {
    // erf z = 2/sqrt(pi) * sum_n (-1)^n z^(2n+1) / (n! (2n+1))
    let z2 = z * z;
    let mut power = z;
    let mut sum = z;
    let eps = T::epsilon() * T::lit(0.25);
    for n in 1..200 {
        let nf = T::from_count(n);
        power = -power * z2 / nf;
        let term = power / (T::lit(2.0) * nf + T::one());
        sum += term;
        if term.norm() <= eps * sum.norm() {
            break;
        }
    }
    sum * T::FRAC_2_SQRT_PI()
}

fn frac_1_sqrt_pi<T: Real>() -> T {
    T::FRAC_2_SQRT_PI() * T::lit(0.5)
}

fn faddeeva_upper_unchecked<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.norm() >= T::lit(CF_RADIUS) {
        faddeeva_continued_fraction(z)
    } else {
        faddeeva_weideman(z)
    }
}

/// Laplace continued fraction `w(z) = (i/sqrt(pi)) / (z - (1/2)/(z - 1/(z - (3/2)/(z - ...))))`,
/// evaluated bottom-up with a depth fitted to `|z|`.
fn faddeeva_continued_fraction<T: Real>(z: Complex<T>) -> Complex<T> {
    let r = z.norm().as_f64();
    let depth = (12.0 + 1800.0 / (r * r)).ceil() as usize;
    let mut tail = z;
    for k in (1..=depth).rev() {
        tail = z - Complex::new(T::from_count(k) * T::lit(0.5), T::zero()) / tail;
    }
    Complex::new(T::zero(), frac_1_sqrt_pi::<T>()) / tail
}

/// Weideman's rational expansion
/// `w(z) = 2 p(Z) / (L - iz)^2 + (1/sqrt(pi)) / (L - iz)`, `Z = (L + iz)/(L - iz)`.
fn faddeeva_weideman<T: Real>(z: Complex<T>) -> Complex<T> {
    let (l, coeffs) = weideman_coefficients();
    let l = T::lit(*l);
    let iz = Complex::new(-z.im, z.re);
    let denom = Complex::new(l, T::zero()) - iz;
    let big_z = (Complex::new(l, T::zero()) + iz) / denom;
    let mut p = Complex::new(T::zero(), T::zero());
    for &c in coeffs.iter().rev() {
        p = p * big_z + Complex::new(T::lit(c), T::zero());
    }
    p * T::lit(2.0) / (denom * denom) + Complex::new(frac_1_sqrt_pi::<T>(), T::zero()) / denom
}

/// Polynomial coefficients (ascending powers) and the scale `L = sqrt(N / sqrt 2)`.
fn weideman_coefficients() -> &'static (f64, Vec<f64>) {
    static COEFFS: OnceLock<(f64, Vec<f64>)> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let n = WEIDEMAN_N;
        let m = 2 * n;
        let m2 = 2 * m;
        let l = (n as f64 / std::f64::consts::SQRT_2).sqrt();
        // f sampled at t_k = L tan(theta_k / 2), theta_k = k pi / M, k = -M+1..M-1, with f[0] = 0.
        let mut f = vec![0.0_f64; m2];
        for (slot, k) in (1..m2).zip(-(m as i64) + 1..(m as i64)) {
            let theta = k as f64 * std::f64::consts::PI / m as f64;
            let t = l * (theta / 2.0).tan();
            f[slot] = (-t * t).exp() * (l * l + t * t);
        }
        // fftshift, then the real part of the forward DFT
        let shifted: Vec<f64> = (0..m2).map(|i| f[(i + m2 / 2) % m2]).collect();
        let coeffs = (1..=n)
            .map(|j| {
                let re: f64 = shifted
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        v * (2.0 * std::f64::consts::PI * (i * j % m2) as f64 / m2 as f64).cos()
                    })
                    .sum();
                re / m2 as f64
            })
            .collect();
        (l, coeffs)
    })
}
