//! Dormand–Prince 5(4) integrator for a single complex unknown, with the
//! fifth-order dense output used to sample at arbitrary times.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct Dopri5Options<T> {
    pub rtol: T,
    pub atol: T,
    /// Upper bound on the step size, `None` for unbounded.
    pub h_max: Option<T>,
    pub max_steps: usize,
}

impl<T: Real> Dopri5Options<T> {
    pub fn new(rtol: T, atol: T) -> Self {
        Dopri5Options { rtol, atol, h_max: None, max_steps: 50_000_000 }
    }

    pub fn h_max(mut self, h_max: Option<T>) -> Self {
        self.h_max = h_max;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Dopri5Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// y5 - y4
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `y' = f(t, y)` from `(t0, y0)` to `t_end` and returns the
/// solution at each of `sample_times` (ascending, inside `[t0, t_end]`).
pub fn integrate_sampled<T, F>(
    f: F,
    t0: T,
    y0: Complex<T>,
    t_end: T,
    sample_times: &[T],
    opts: &Dopri5Options<T>,
) -> Result<(Vec<Complex<T>>, Dopri5Stats)>
where
    T: Real,
    F: Fn(T, Complex<T>) -> Complex<T>,
{
    if !(t_end > t0) {
        return Err(Error::InvalidArgument(format!("t_end {t_end} must exceed t0 {t0}")));
    }
    if sample_times.windows(2).any(|w| !(w[1] > w[0]))
        || sample_times.first().is_some_and(|&t| t < t0)
        || sample_times.last().is_some_and(|&t| t > t_end)
    {
        return Err(Error::InvalidArgument(
            "sample times must be strictly increasing inside [t0, t_end]".into(),
        ));
    }

    let l = T::lit;
    let span = t_end - t0;
    let mut h = span * l(1e-3);
    if let Some(cap) = opts.h_max {
        h = h.min(cap);
    }
    let mut stats = Dopri5Stats::default();
    let mut out = Vec::with_capacity(sample_times.len());
    let mut next = 0;

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, y);
    stats.evaluations += 1;
    while next < sample_times.len() && sample_times[next] <= t {
        out.push(y);
        next += 1;
    }

    while t < t_end {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integration {
                time: t.as_f64(),
                reason: format!("step budget of {} exhausted", opts.max_steps),
            });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let min_h = l(1e-14) * t.abs().max(T::one());
        if h < min_h {
            return Err(Error::Integration {
                time: t.as_f64(),
                reason: format!("step size underflow (h = {h:e})"),
            });
        }

        let hs = |a: f64| Complex::new(h * l(a), T::zero());
        let k2 = f(t + h * l(C2), y + k1 * hs(A21));
        let k3 = f(t + h * l(C3), y + k1 * hs(A31) + k2 * hs(A32));
        let k4 = f(t + h * l(C4), y + k1 * hs(A41) + k2 * hs(A42) + k3 * hs(A43));
        let k5 = f(
            t + h * l(C5),
            y + k1 * hs(A51) + k2 * hs(A52) + k3 * hs(A53) + k4 * hs(A54),
        );
        let t_new = if last { t_end } else { t + h };
        let k6 = f(
            t_new,
            y + k1 * hs(A61) + k2 * hs(A62) + k3 * hs(A63) + k4 * hs(A64) + k5 * hs(A65),
        );
        let y_new = y + k1 * hs(A71) + k3 * hs(A73) + k4 * hs(A74) + k5 * hs(A75) + k6 * hs(A76);
        let k7 = f(t_new, y_new);
        stats.evaluations += 6;

        let err_vec = k1 * hs(E1) + k3 * hs(E3) + k4 * hs(E4) + k5 * hs(E5) + k6 * hs(E6) + k7 * hs(E7);
        let scale = opts.atol + opts.rtol * y.norm().max(y_new.norm());
        let err = err_vec.norm() / scale;

        if !err.is_finite() {
            return Err(Error::Integration {
                time: t.as_f64(),
                reason: "non-finite error estimate".into(),
            });
        }

        if err <= T::one() {
            stats.accepted += 1;
            if next < sample_times.len() && sample_times[next] <= t_new {
                let r1 = y;
                let r2 = y_new - y;
                let r3 = k1 * Complex::new(h, T::zero()) - r2;
                let r4 = r2 - k7 * Complex::new(h, T::zero()) - r3;
                let r5 = k1 * hs(D1) + k3 * hs(D3) + k4 * hs(D4) + k5 * hs(D5) + k6 * hs(D6) + k7 * hs(D7);
                while next < sample_times.len() && sample_times[next] <= t_new {
                    let s = sample_times[next];
                    if s == t_new {
                        out.push(y_new);
                    } else {
                        let th = (s - t) / h;
                        let th1 = T::one() - th;
                        let c = |x: T| Complex::new(x, T::zero());
                        out.push(r1 + (r2 + (r3 + (r4 + r5 * c(th1)) * c(th)) * c(th1)) * c(th));
                    }
                    next += 1;
                }
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            if last {
                break;
            }
        } else {
            stats.rejected += 1;
        }

        let fac = if err == T::zero() { l(10.0) } else { l(0.9) * err.powf(l(-0.2)) };
        let fac = fac.max(l(0.2)).min(if err <= T::one() { l(10.0) } else { T::one() });
        h *= fac;
        if let Some(cap) = opts.h_max {
            h = h.min(cap);
        }
    }
    Ok((out, stats))
}
