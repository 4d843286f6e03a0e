//! Qubit-conditioned coherent amplitudes of the resonator field.
//!
//! For each two-qubit basis label the intracavity field stays coherent with
//! amplitude `alpha_xy(t)`. In the frame rotating at the drive frequency the
//! exact dispersive amplitude obeys
//!
//! ```text
//! alpha' = -i eps - i [dr alpha + chi_xy (alpha + conj(alpha) e^{2 i wm t})] - (kappa/2) alpha
//! ```
//!
//! and the rotating-wave version drops the conjugate term and uses the
//! shift `g^2/delta`:
//!
//! ```text
//! alpha' = -i eps - i (dr + chi_xy) alpha - (kappa/2) alpha
//! ```
//!
//! Both start from the vacuum, `alpha(0) = 0`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{chi_for_label, DerivedParams, ParityLabel, SystemParams};
use crate::ode::{integrate_sampled, Dopri5Options, Dopri5Stats};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Exact,
    Rwa,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Exact => "exact",
            ModelKind::Rwa => "rwa",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Default horizon and steady-state window, in units of `1/kappa`.
pub const DEFAULT_T_END: f64 = 10.0;
pub const STEADY_WINDOW: f64 = 2.0;
pub const DEFAULT_TOL: f64 = 1e-9;

/// Integration settings shared by both models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointerOptions<T> {
    /// Horizon in units of `1/kappa`.
    pub t_end: T,
    /// Relative tolerance; the absolute tolerance is `tol * 2 eps / kappa`.
    pub tol: T,
    /// Drop the `conj(alpha) e^{2 i wm t}` term of the exact model while
    /// keeping the exact shift. Error `O(chi / 2 wm)`; only sensible for
    /// `g / omega_r < 1e-2`.
    pub secular: bool,
    /// Sample spacing before the steady-state window, units of `1/kappa`.
    pub coarse_dt: T,
    /// Samples per period `pi / omega_m` inside the window.
    pub samples_per_period: usize,
}

impl<T: Real> Default for PointerOptions<T> {
    fn default() -> Self {
        PointerOptions {
            t_end: T::lit(DEFAULT_T_END),
            tol: T::lit(DEFAULT_TOL),
            secular: false,
            coarse_dt: T::lit(0.01),
            samples_per_period: 16,
        }
    }
}

impl<T: Real> PointerOptions<T> {
    pub fn with_t_end(mut self, t_end: T) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.t_end > T::zero()) || !self.t_end.is_finite() {
            return Err(Error::InvalidArgument(format!("t_end must be > 0, got {}", self.t_end)));
        }
        if !(self.tol >= T::lit(1e-12) && self.tol <= T::lit(1e-4)) {
            return Err(Error::InvalidArgument(format!(
                "tol must lie in [1e-12, 1e-4], got {}",
                self.tol
            )));
        }
        if !(self.coarse_dt > T::zero()) || self.samples_per_period < 2 {
            return Err(Error::InvalidArgument("invalid sampling settings".into()));
        }
        Ok(())
    }
}

/// Time series of one qubit-conditioned amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerTrajectory<T> {
    pub label: ParityLabel,
    pub model_kind: ModelKind,
    pub secular: bool,
    /// Units of `1/kappa` scaled by the actual `kappa` (i.e. plain time).
    pub times: Vec<T>,
    pub amplitudes: Vec<Complex<T>>,
    /// Shift `chi_xy` used in the equation of motion.
    pub chi_xy: T,
    pub kappa: T,
    pub omega_m: T,
    pub stats: Dopri5Stats,
}

impl<T: Real> PointerTrajectory<T> {
    pub fn final_amplitude(&self) -> Complex<T> {
        *self.amplitudes.last().expect("trajectory has at least one sample")
    }

    pub fn t_end(&self) -> T {
        *self.times.last().expect("trajectory has at least one sample")
    }

    /// `omega_m` when the amplitude carries the `e^{2 i omega_m t}` ripple,
    /// zero otherwise.
    pub fn ripple_frequency(&self) -> T {
        if self.model_kind == ModelKind::Exact && !self.secular {
            self.omega_m
        } else {
            T::zero()
        }
    }

    pub fn max_abs(&self) -> T {
        self.amplitudes.iter().fold(T::zero(), |m, a| m.max(a.norm()))
    }
}

/// Late-time summary of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyAmplitude<T> {
    pub mean: Complex<T>,
    /// `max |alpha(t) - mean|` over the averaging window.
    pub residual_oscillation: T,
    pub window: (T, T),
}

/// Right-hand side of the pointer equation for one label.
#[derive(Debug, Clone, Copy)]
pub struct PointerEquation<T> {
    pub epsilon_m: T,
    pub delta_r: T,
    pub chi_xy: T,
    pub kappa: T,
    pub omega_m: T,
    /// Whether the `conj(alpha) e^{2 i wm t}` term is present.
    pub counter_rotating: bool,
}

impl<T: Real> PointerEquation<T> {
    pub fn new(
        params: &SystemParams<T>,
        derived: &DerivedParams<T>,
        label: ParityLabel,
        model: ModelKind,
        secular: bool,
    ) -> Self {
        let rwa = model == ModelKind::Rwa;
        let chi_xy = chi_for_label(derived, label, rwa);
        PointerEquation {
            epsilon_m: params.epsilon_m,
            delta_r: derived.delta_r,
            chi_xy,
            kappa: params.kappa,
            omega_m: params.omega_m,
            counter_rotating: !rwa && !secular && chi_xy != T::zero(),
        }
    }

    #[inline]
    pub fn rhs(&self, t: T, alpha: Complex<T>) -> Complex<T> {
        let i = Complex::new(T::zero(), T::one());
        let mut coupling = alpha * (self.delta_r + self.chi_xy);
        if self.counter_rotating {
            let (s, c) = (T::lit(2.0) * self.omega_m * t).sin_cos();
            coupling += alpha.conj() * Complex::new(c, s) * self.chi_xy;
        }
        -i * self.epsilon_m - i * coupling - alpha * (self.kappa * T::lit(0.5))
    }

    /// Step cap resolving the `e^{2 i wm t}` modulation: `(2 pi / 2 wm) / 20`.
    pub fn step_cap(&self) -> Option<T> {
        if self.counter_rotating && self.omega_m > T::zero() {
            Some(T::PI() / self.omega_m / T::lit(20.0))
        } else {
            None
        }
    }
}

/// Period `pi / omega_m` of the counter-rotating modulation.
fn modulation_period<T: Real>(omega_m: T) -> Option<T> {
    (omega_m > T::zero()).then(|| T::PI() / omega_m)
}

/// Default output grid: coarse before the steady-state window, then
/// `samples_per_period` points per modulation period on a grid anchored at
/// `t_end` and covering an integer number of periods.
pub fn default_sample_times<T: Real>(
    kappa: T,
    omega_m: T,
    opts: &PointerOptions<T>,
) -> Vec<T> {
    let t_end = opts.t_end / kappa;
    let window_start = (t_end - T::lit(STEADY_WINDOW) / kappa).max(T::zero());
    let coarse = opts.coarse_dt / kappa;

    let (fine_start, fine_dt, fine_n) = match modulation_period(omega_m) {
        Some(p) if (t_end - window_start) / p >= T::one() => {
            let periods = ((t_end - window_start) / p).floor();
            let dt = p / T::from_count(opts.samples_per_period);
            let n = (periods.as_f64() as usize) * opts.samples_per_period;
            (t_end - dt * T::from_count(n), dt, n)
        }
        _ => {
            let n = ((t_end - window_start) / coarse).ceil().as_f64().max(1.0) as usize;
            let dt = (t_end - window_start) / T::from_count(n);
            (window_start, dt, n)
        }
    };

    let mut times = Vec::new();
    let mut k = 0usize;
    loop {
        let t = coarse * T::from_count(k);
        if t >= fine_start {
            break;
        }
        times.push(t);
        k += 1;
    }
    for j in 0..=fine_n {
        let t = if j == fine_n { t_end } else { fine_start + fine_dt * T::from_count(j) };
        if times.last().is_none_or(|&last| t > last) {
            times.push(t);
        }
    }
    times
}

/// Integrates the exact dispersive amplitude equation from the vacuum.
pub fn integrate_exact<T: Real>(
    params: &SystemParams<T>,
    derived: &DerivedParams<T>,
    label: ParityLabel,
    opts: &PointerOptions<T>,
) -> Result<PointerTrajectory<T>> {
    opts.check()?;
    let omega_m = if opts.secular { T::zero() } else { params.omega_m };
    let times = default_sample_times(params.kappa, omega_m, opts);
    integrate_at(params, derived, label, ModelKind::Exact, opts, times)
}

/// Integrates the rotating-wave amplitude equation from the vacuum.
pub fn integrate_rwa<T: Real>(
    params: &SystemParams<T>,
    derived: &DerivedParams<T>,
    label: ParityLabel,
    opts: &PointerOptions<T>,
) -> Result<PointerTrajectory<T>> {
    opts.check()?;
    // no counter-rotating ripple to resolve
    let times = default_sample_times(params.kappa, T::zero(), opts);
    integrate_at(params, derived, label, ModelKind::Rwa, opts, times)
}

pub fn integrate<T: Real>(
    params: &SystemParams<T>,
    derived: &DerivedParams<T>,
    label: ParityLabel,
    model: ModelKind,
    opts: &PointerOptions<T>,
) -> Result<PointerTrajectory<T>> {
    match model {
        ModelKind::Exact => integrate_exact(params, derived, label, opts),
        ModelKind::Rwa => integrate_rwa(params, derived, label, opts),
    }
}

/// Integrates either model and samples it at caller-chosen times
/// (ascending, starting at or after 0, ending at `opts.t_end / kappa`).
pub fn integrate_at<T: Real>(
    params: &SystemParams<T>,
    derived: &DerivedParams<T>,
    label: ParityLabel,
    model: ModelKind,
    opts: &PointerOptions<T>,
    times: Vec<T>,
) -> Result<PointerTrajectory<T>> {
    opts.check()?;
    params.validate()?;
    let eq = PointerEquation::new(params, derived, label, model, opts.secular);
    let t_end = opts.t_end / params.kappa;
    let scale = (T::lit(2.0) * params.epsilon_m / params.kappa).max(T::lit(1e-300));
    let ode_opts = Dopri5Options::new(opts.tol, opts.tol * scale).h_max(eq.step_cap());
    let zero = Complex::new(T::zero(), T::zero());
    let (amplitudes, stats) =
        integrate_sampled(|t, a| eq.rhs(t, a), T::zero(), zero, t_end, &times, &ode_opts)?;
    Ok(PointerTrajectory {
        label,
        model_kind: model,
        secular: opts.secular && model == ModelKind::Exact,
        times,
        amplitudes,
        chi_xy: eq.chi_xy,
        kappa: params.kappa,
        omega_m: params.omega_m,
        stats,
    })
}

/// Stationary solution of the rotating-wave equation,
/// `-i eps / (i (dr + chi_xy) + kappa/2)`.
pub fn rwa_fixed_point<T: Real>(
    params: &SystemParams<T>,
    derived: &DerivedParams<T>,
    label: ParityLabel,
) -> Complex<T> {
    let chi_xy = chi_for_label(derived, label, true);
    let denom = Complex::new(params.kappa * T::lit(0.5), derived.delta_r + chi_xy);
    Complex::new(T::zero(), -params.epsilon_m) / denom
}

/// Closed-form rotating-wave trajectory `alpha_fp (1 - e^{-lambda t})`,
/// `lambda = kappa/2 + i (dr + chi_xy)`.
pub fn rwa_analytic<T: Real>(
    params: &SystemParams<T>,
    derived: &DerivedParams<T>,
    label: ParityLabel,
    t: T,
) -> Complex<T> {
    let chi_xy = chi_for_label(derived, label, true);
    let lambda = Complex::new(params.kappa * T::lit(0.5), derived.delta_r + chi_xy);
    let fp = rwa_fixed_point(params, derived, label);
    fp * (Complex::new(T::one(), T::zero()) - (-lambda * t).exp())
}

/// Time average over the last `2/kappa` of the trajectory, restricted to an
/// integer number of modulation periods `pi / omega_m` ending at `t_end`.
/// Falls back to the whole window for unmodulated trajectories or when no
/// full period fits.
pub fn steady_state<T: Real>(traj: &PointerTrajectory<T>) -> Result<SteadyAmplitude<T>> {
    let t_end = traj.t_end();
    let required = T::lit(DEFAULT_T_END) / traj.kappa;
    if t_end < required * (T::one() - T::lit(1e-12)) {
        return Err(Error::InsufficientHorizon { t_end: t_end.as_f64(), required: required.as_f64() });
    }
    let window_start = t_end - T::lit(STEADY_WINDOW) / traj.kappa;
    let start = match modulation_period(traj.ripple_frequency()) {
        Some(p) if (t_end - window_start) / p >= T::one() => {
            t_end - p * ((t_end - window_start) / p).floor()
        }
        _ => window_start,
    };
    // tolerate rounding of grid points placed at `start`
    let slack = (t_end - start) * T::lit(1e-9);
    let first = traj.times.iter().position(|&t| t >= start - slack).unwrap_or(traj.times.len());
    let times = &traj.times[first..];
    let values = &traj.amplitudes[first..];
    if times.len() < 2 {
        return Err(Error::InsufficientHorizon { t_end: t_end.as_f64(), required: required.as_f64() });
    }

    let half = T::lit(0.5);
    let mut integral = Complex::new(T::zero(), T::zero());
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        integral += (values[k] + values[k - 1]) * (dt * half);
    }
    let mean = integral / (times[times.len() - 1] - times[0]);
    let residual_oscillation = values.iter().fold(T::zero(), |m, a| m.max((a - mean).norm()));
    Ok(SteadyAmplitude { mean, residual_oscillation, window: (times[0], t_end) })
}
