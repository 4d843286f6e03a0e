//! Homodyne parity-measurement fidelity.
//!
//! The initial state `|+>|+>|0>` evolves into
//! `(1/2) sum_xy |xy>|alpha_xy>`. Measuring the `Q` quadrature with outcome
//! `p` leaves the qubits in the unnormalized conditional state
//! `(1/2) sum_xy C_xy(p) |xy>` with
//!
//! ```text
//! C_xy(p) = G_xy(p) K_xy(p)
//! G_xy(p) = (2/pi)^(1/4) exp[-(p - Im a_xy)^2]
//! K_xy(p) = exp[-i Re a_xy (2p - Im a_xy)]
//! ```
//!
//! Outcomes above the threshold `p_m = (Im a_ee + Im a_eg)/2` are assigned to
//! the even subspace and projected on `phi+`; outcomes below go to the odd
//! subspace and `psi+`.
//!
//! Two independent routes are provided. The closed forms integrate the
//! Gaussian overlaps analytically; every half-line integral of
//! `C_x conj(C_y)` reduces to one complex `erfc`. [`fidelity_numeric`]
//! instead builds the conditional state pointwise and integrates the
//! projections by composite Gauss–Legendre quadrature.
//!
//! The general closed forms allow `a_gg` and `a_ee` to differ in their
//! quadratures, which happens for the exact model. For mirror-symmetric
//! pointers (`a_gg = -conj(a_ee)`, `a_ge = a_eg`) they reduce to the
//! expressions in [`mirror`].

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParityLabel;
use crate::quadrature::GaussLegendre;
use crate::scalar::Real;
use crate::special_fn::{erfc_complex, erfc_real};

/// Steady pointer amplitudes of the four qubit labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointerSet<T> {
    pub gg: Complex<T>,
    pub ge: Complex<T>,
    pub eg: Complex<T>,
    pub ee: Complex<T>,
}

impl<T: Real> PointerSet<T> {
    pub fn from_fn(mut f: impl FnMut(ParityLabel) -> Complex<T>) -> Self {
        PointerSet {
            gg: f(ParityLabel::Gg),
            ge: f(ParityLabel::Ge),
            eg: f(ParityLabel::Eg),
            ee: f(ParityLabel::Ee),
        }
    }

    /// Mirror-symmetric set: `a_gg = -conj(a_ee)`, `a_ge = a_eg = odd`.
    pub fn symmetric(ee: Complex<T>, odd: Complex<T>) -> Self {
        PointerSet { gg: -ee.conj(), ge: odd, eg: odd, ee }
    }

    pub fn get(&self, label: ParityLabel) -> Complex<T> {
        match label {
            ParityLabel::Gg => self.gg,
            ParityLabel::Ge => self.ge,
            ParityLabel::Eg => self.eg,
            ParityLabel::Ee => self.ee,
        }
    }

    pub fn map(&self, mut f: impl FnMut(ParityLabel, Complex<T>) -> Complex<T>) -> Self {
        PointerSet::from_fn(|l| f(l, self.get(l)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FidelityMethod {
    ClosedForm,
    NumericOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport<T> {
    pub p_m: T,
    pub prob_even: T,
    pub prob_odd: T,
    /// Fidelity with `phi+` given an even assignment.
    pub f_even: T,
    /// Fidelity with `psi+` given an odd assignment.
    pub f_odd: T,
    pub f_avg: T,
    pub method: FidelityMethod,
}

/// Threshold between the parity subspaces, `(Im a_ee + Im a_eg) / 2`.
pub fn midpoint<T: Real>(ps: &PointerSet<T>) -> T {
    (ps.ee.im + ps.eg.im) * T::lit(0.5)
}

fn sqrt2<T: Real>() -> T {
    T::SQRT_2()
}

/// `int C_x(p) conj(C_y(p)) dp` over `p > t` (`upper`) or `p < t`.
fn pair_integral<T: Real>(x: Complex<T>, y: Complex<T>, t: T, upper: bool) -> Result<Complex<T>> {
    let half = T::lit(0.5);
    let (b1, c1, b2, c2) = (x.re, x.im, y.re, y.im);
    if b1 == b2 && c1 == c2 {
        let arg = sqrt2::<T>() * (t - c1);
        let v = erfc_real(if upper { arg } else { -arg })?;
        return Ok(Complex::new(v * half, T::zero()));
    }
    let beta = b1 - b2;
    let delta = c1 - c2;
    let c_bar = (c1 + c2) * half;
    let s0 = Complex::new(sqrt2::<T>() * (t - c_bar), sqrt2::<T>() * beta * half);
    let tail = erfc_complex(if upper { s0 } else { -s0 })?;
    let exponent = Complex::new(
        -(beta * beta + delta * delta) * half,
        -T::lit(2.0) * beta * c_bar + b1 * c1 - b2 * c2,
    );
    Ok(tail * exponent.exp() * half)
}

/// Closed-form probabilities of the even and odd assignments for an
/// arbitrary threshold.
pub fn subspace_probabilities<T: Real>(ps: &PointerSet<T>, threshold: T) -> Result<(T, T)> {
    let quarter = T::lit(0.25);
    let mut even = T::zero();
    let mut odd = T::zero();
    for l in ParityLabel::ALL {
        let a = ps.get(l);
        even += pair_integral(a, a, threshold, true)?.re * quarter;
        odd += pair_integral(a, a, threshold, false)?.re * quarter;
    }
    Ok((even, odd))
}

/// Sum of a cross integral and its mirror, with the imaginary residue checked.
fn cross_term<T: Real>(
    x: Complex<T>,
    y: Complex<T>,
    t: T,
    upper: bool,
    quantity: &'static str,
) -> Result<T> {
    let s = pair_integral(x, y, t, upper)? + pair_integral(y, x, t, upper)?;
    let scale = s.norm().max(T::one());
    if s.im.abs() > T::lit(1e-8) * scale {
        return Err(Error::ClosedForm { quantity, residue: s.im.abs().as_f64() });
    }
    Ok(s.re)
}

fn conditional_ratio<T: Real>(num: T, den: T) -> T {
    if den > T::zero() {
        (num / den).max(T::zero()).min(T::one())
    } else {
        T::zero()
    }
}

/// `F^{phi+}`: overlap with `phi+` of the even-assigned conditional state.
/// Zero when the even assignment has zero probability.
pub fn fidelity_even<T: Real>(ps: &PointerSet<T>, p_m: T) -> Result<T> {
    let eighth = T::lit(0.125);
    let diag = pair_integral(ps.gg, ps.gg, p_m, true)?.re + pair_integral(ps.ee, ps.ee, p_m, true)?.re;
    let cross = cross_term(ps.ee, ps.gg, p_m, true, "F_even")?;
    let (prob_even, _) = subspace_probabilities(ps, p_m)?;
    Ok(conditional_ratio((diag + cross) * eighth, prob_even))
}

/// `F^{psi+}`: overlap with `psi+` of the odd-assigned conditional state.
pub fn fidelity_odd<T: Real>(ps: &PointerSet<T>, p_m: T) -> Result<T> {
    let eighth = T::lit(0.125);
    let diag = pair_integral(ps.ge, ps.ge, p_m, false)?.re + pair_integral(ps.eg, ps.eg, p_m, false)?.re;
    let cross = cross_term(ps.eg, ps.ge, p_m, false, "F_odd")?;
    let (_, prob_odd) = subspace_probabilities(ps, p_m)?;
    Ok(conditional_ratio((diag + cross) * eighth, prob_odd))
}

/// `P_+ F^{phi+} + P_- F^{psi+}`.
pub fn average_fidelity<T: Real>(prob_even: T, prob_odd: T, f_even: T, f_odd: T) -> T {
    prob_even * f_even + prob_odd * f_odd
}

/// Every closed-form quantity at the midpoint threshold.
pub fn fidelity_closed_form<T: Real>(ps: &PointerSet<T>) -> Result<FidelityReport<T>> {
    fidelity_closed_form_at(ps, midpoint(ps))
}

pub fn fidelity_closed_form_at<T: Real>(ps: &PointerSet<T>, p_m: T) -> Result<FidelityReport<T>> {
    let (prob_even, prob_odd) = subspace_probabilities(ps, p_m)?;
    let f_even = fidelity_even(ps, p_m)?;
    let f_odd = fidelity_odd(ps, p_m)?;
    Ok(FidelityReport {
        p_m,
        prob_even,
        prob_odd,
        f_even,
        f_odd,
        f_avg: average_fidelity(prob_even, prob_odd, f_even, f_odd),
        method: FidelityMethod::ClosedForm,
    })
}

/// Range of the average fidelity when every pointer is displaced by its
/// residual oscillation along `+1`, `-1`, `+i` or `-i`.
pub fn fidelity_band<T: Real>(ps: &PointerSet<T>, residuals: &[T; 4]) -> Result<(T, T)> {
    let nominal = fidelity_closed_form(ps)?.f_avg;
    let (mut lo, mut hi) = (nominal, nominal);
    let one = T::one();
    let zero = T::zero();
    for dir in [
        Complex::new(one, zero),
        Complex::new(-one, zero),
        Complex::new(zero, one),
        Complex::new(zero, -one),
    ] {
        let shifted = ps.map(|l, a| {
            let idx = ParityLabel::ALL.iter().position(|&x| x == l).unwrap_or(0);
            a + dir * residuals[idx]
        });
        let f = fidelity_closed_form(&shifted)?.f_avg;
        lo = lo.min(f);
        hi = hi.max(f);
    }
    Ok((lo, hi))
}

/// Closed forms for mirror-symmetric pointers, written in the variables
/// `b = Re a_ee`, `c = Im a_ee`, `d = Im a_eg - Im a_ee`.
pub mod mirror {
    use super::*;

    /// `(1/4)[erfc(sqrt2 (p_m - Im a_eg)) + erfc(sqrt2 (p_m - Im a_ee))]`.
    pub fn prob_even<T: Real>(im_eg: T, im_ee: T, p_m: T) -> Result<T> {
        let s = sqrt2::<T>();
        Ok((erfc_real(s * (p_m - im_eg))? + erfc_real(s * (p_m - im_ee))?) * T::lit(0.25))
    }

    /// `F^{phi+} = (1/4) erfc(d/sqrt2)
    ///   + (1/8) e^{-2b(b - ic)} erfc(sqrt2 (d/2 - ib))
    ///   + (1/8) e^{-2b(b + ic)} erfc(sqrt2 (d/2 + ib))`.
    ///
    /// The two exponents are conjugate; the sum is checked to be real.
    pub fn fidelity_even<T: Real>(b: T, c: T, im_eg: T) -> Result<T> {
        let s = sqrt2::<T>();
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let d = im_eg - c;
        let first = erfc_real(d / s)? * T::lit(0.25);
        let minus = Complex::new(-two * b * b, two * b * c).exp()
            * erfc_complex(Complex::new(s * d * half, -s * b))?;
        let plus = Complex::new(-two * b * b, -two * b * c).exp()
            * erfc_complex(Complex::new(s * d * half, s * b))?;
        let pair = (minus + plus) * T::lit(0.125);
        if pair.im.abs() > T::lit(1e-10) {
            return Err(Error::ClosedForm { quantity: "mirror F_even", residue: pair.im.abs().as_f64() });
        }
        Ok(first + pair.re)
    }

    /// `F^{psi+} = (1/2) erfc((Im a_eg - Im a_ee)/sqrt2)`.
    pub fn fidelity_odd<T: Real>(im_eg: T, im_ee: T) -> Result<T> {
        Ok(erfc_real((im_eg - im_ee) / sqrt2::<T>())? * T::lit(0.5))
    }
}

/// Pointwise conditional amplitudes `C_xy(p)`, optionally multiplied by a
/// common phase.
#[derive(Debug, Clone, Copy)]
pub struct ConditionalAmplitudes<T> {
    pub pointers: PointerSet<T>,
    pub common_phase: T,
}

impl<T: Real> ConditionalAmplitudes<T> {
    pub fn new(pointers: PointerSet<T>) -> Self {
        ConditionalAmplitudes { pointers, common_phase: T::zero() }
    }

    pub fn with_common_phase(mut self, phase: T) -> Self {
        self.common_phase = phase;
        self
    }

    pub fn envelope(&self, label: ParityLabel, p: T) -> T {
        let a = self.pointers.get(label);
        let norm = (T::lit(2.0) / T::PI()).powf(T::lit(0.25));
        norm * (-(p - a.im) * (p - a.im)).exp()
    }

    pub fn phase(&self, label: ParityLabel, p: T) -> Complex<T> {
        let a = self.pointers.get(label);
        let arg = -a.re * (T::lit(2.0) * p - a.im) + self.common_phase;
        Complex::new(arg.cos(), arg.sin())
    }

    pub fn amplitude(&self, label: ParityLabel, p: T) -> Complex<T> {
        self.phase(label, p) * self.envelope(label, p)
    }

    /// Unnormalized conditional qubit state in the order gg, ge, eg, ee.
    pub fn state(&self, p: T) -> [Complex<T>; 4] {
        let half = T::lit(0.5);
        ParityLabel::ALL.map(|l| self.amplitude(l, p) * half)
    }

    /// Diagonal elements of the conditional density matrix in the Bell
    /// basis plus its trace: `[phi+, phi-, psi+, psi-, trace]`.
    pub fn bell_weights(&self, p: T) -> [T; 5] {
        let [gg, ge, eg, ee] = self.state(p);
        let r = T::FRAC_1_SQRT_2();
        [
            ((gg + ee) * r).norm_sqr(),
            ((ee - gg) * r).norm_sqr(),
            ((eg + ge) * r).norm_sqr(),
            ((eg - ge) * r).norm_sqr(),
            gg.norm_sqr() + ge.norm_sqr() + eg.norm_sqr() + ee.norm_sqr(),
        ]
    }
}

/// Composite Gauss–Legendre settings for [`fidelity_numeric`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    /// Panels on each side of the threshold.
    pub panels: usize,
    pub order: usize,
    /// Extent beyond the outermost pointer quadrature.
    pub margin: f64,
    /// Largest change tolerated when the panel count is halved.
    pub refinement_tol: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { panels: 100, order: 20, margin: 8.0, refinement_tol: 1e-10 }
    }
}

impl QuadSpec {
    pub fn total_points(&self) -> usize {
        2 * self.panels * self.order
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericFidelity<T> {
    pub report: FidelityReport<T>,
    /// `int <psi-|rho^C(p)|psi->` over all outcomes; zero for `a_ge = a_eg`.
    pub psi_minus_weight: T,
}

#[derive(Clone, Copy)]
struct Sums<T>([T; 5]);

impl<T: Real> std::ops::Add for Sums<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Sums(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }
}

impl<T: Real> std::ops::Mul<T> for Sums<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Sums(self.0.map(|v| v * s))
    }
}

impl<T: Real> ConditionalAmplitudes<T> {
    fn integrate_weights(&self, p_m: T, quad: &QuadSpec, panels: usize, gl: &GaussLegendre) -> ([T; 5], [T; 5]) {
        let ims = ParityLabel::ALL.map(|l| self.pointers.get(l).im);
        let lo_im = ims.iter().fold(T::infinity(), |m, &v| m.min(v));
        let hi_im = ims.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let margin = T::lit(quad.margin);
        let lo = (lo_im - margin).min(p_m);
        let hi = (hi_im + margin).max(p_m);
        let zero = Sums([T::zero(); 5]);
        let below = gl.integrate(lo, p_m, panels, zero, |p| Sums(self.bell_weights(p)));
        let above = gl.integrate(p_m, hi, panels, zero, |p| Sums(self.bell_weights(p)));
        (below.0, above.0)
    }

    /// Quadrature evaluation of probabilities and fidelities.
    pub fn fidelity_numeric(&self, p_m: T, quad: &QuadSpec) -> Result<NumericFidelity<T>> {
        if quad.panels < 2 || quad.order < 2 || quad.total_points() < 4000 {
            return Err(Error::InvalidArgument(format!(
                "quadrature needs at least 4000 points, got {}",
                quad.total_points()
            )));
        }
        let gl = GaussLegendre::new(quad.order);
        let fine = self.integrate_weights(p_m, quad, quad.panels, &gl);
        let coarse = self.integrate_weights(p_m, quad, quad.panels / 2, &gl);
        let report = |(below, above): ([T; 5], [T; 5])| {
            let prob_even = above[4];
            let prob_odd = below[4];
            let f_even = conditional_ratio(above[0], prob_even);
            let f_odd = conditional_ratio(below[2], prob_odd);
            FidelityReport {
                p_m,
                prob_even,
                prob_odd,
                f_even,
                f_odd,
                f_avg: average_fidelity(prob_even, prob_odd, f_even, f_odd),
                method: FidelityMethod::NumericOracle,
            }
        };
        let r_fine = report(fine);
        let r_coarse = report(coarse);
        for (quantity, a, b) in [
            ("prob_even", r_fine.prob_even, r_coarse.prob_even),
            ("prob_odd", r_fine.prob_odd, r_coarse.prob_odd),
            ("f_even", r_fine.f_even, r_coarse.f_even),
            ("f_odd", r_fine.f_odd, r_coarse.f_odd),
        ] {
            let change = (a - b).abs().as_f64();
            if !(change <= quad.refinement_tol) {
                return Err(Error::QuadratureResolution { quantity, change });
            }
        }
        Ok(NumericFidelity { report: r_fine, psi_minus_weight: fine.0[3] + fine.1[3] })
    }
}

/// Ground-truth fidelity by direct quadrature over the homodyne outcome.
pub fn fidelity_numeric<T: Real>(ps: &PointerSet<T>, p_m: T, quad: &QuadSpec) -> Result<FidelityReport<T>> {
    Ok(ConditionalAmplitudes::new(*ps).fidelity_numeric(p_m, quad)?.report)
}
