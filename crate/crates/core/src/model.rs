//! Physical parameters of the two-qubit readout setup and the dispersive
//! quantities derived from them.
//!
//! Frequencies are angular and expressed in units of the photon loss rate
//! (`kappa = 1` when built through [`SystemParams::from_ratios`]). The qubits
//! are identical and sit above the resonator: `omega_a = omega_r + delta`
//! with `delta > 0`, so every dispersive shift below is positive.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rates and frequencies of the driven two-qubit/resonator system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams<T> {
    pub omega_r: T,
    pub omega_a: T,
    pub g: T,
    pub kappa: T,
    pub epsilon_m: T,
    pub omega_m: T,
    pub gamma_1: T,
    pub gamma_phi: T,
}

impl<T: Real> SystemParams<T> {
    /// Builds parameters from dimensionless ratios, with `kappa = 1`.
    ///
    /// `delta_r_over_kappa` is the drive detuning `omega_r - omega_m`.
    pub fn from_ratios(
        g_over_kappa: T,
        g_over_omega_r: T,
        g_over_delta: T,
        eps_over_kappa: T,
        delta_r_over_kappa: T,
    ) -> Result<Self> {
        for (name, v) in [
            ("g_over_kappa", g_over_kappa),
            ("g_over_omega_r", g_over_omega_r),
            ("g_over_delta", g_over_delta),
        ] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(eps_over_kappa.is_finite() && eps_over_kappa >= T::zero()) {
            return Err(Error::InvalidParams(format!(
                "eps_over_kappa must be non-negative, got {eps_over_kappa}"
            )));
        }
        let g = g_over_kappa;
        let omega_r = g / g_over_omega_r;
        let delta = g / g_over_delta;
        let params = SystemParams {
            omega_r,
            omega_a: omega_r + delta,
            g,
            kappa: T::one(),
            epsilon_m: eps_over_kappa,
            omega_m: omega_r - delta_r_over_kappa,
            gamma_1: T::zero(),
            gamma_phi: T::zero(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_r", self.omega_r),
            ("omega_a", self.omega_a),
            ("g", self.g),
            ("kappa", self.kappa),
            ("epsilon_m", self.epsilon_m),
            ("omega_m", self.omega_m),
            ("gamma_1", self.gamma_1),
            ("gamma_phi", self.gamma_phi),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::InvalidParams(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [("omega_r", self.omega_r), ("g", self.g), ("kappa", self.kappa)] {
            if v <= T::zero() {
                return Err(Error::InvalidParams(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }

    /// Multiplies every rate and frequency by `s`.
    pub fn scaled(&self, s: T) -> Self {
        SystemParams {
            omega_r: self.omega_r * s,
            omega_a: self.omega_a * s,
            g: self.g * s,
            kappa: self.kappa * s,
            epsilon_m: self.epsilon_m * s,
            omega_m: self.omega_m * s,
            gamma_1: self.gamma_1 * s,
            gamma_phi: self.gamma_phi * s,
        }
    }

    pub fn with_drive(mut self, epsilon_m: T) -> Self {
        self.epsilon_m = epsilon_m;
        self
    }
}

/// Dispersive-regime quantities: detunings, shifts, exchange coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams<T> {
    /// `|omega_a - omega_r|`
    pub delta: T,
    /// `omega_r + omega_a`
    pub sigma: T,
    /// `omega_r - omega_m`
    pub delta_r: T,
    /// `g^2 (1/delta + 1/sigma)`
    pub chi: T,
    /// `g^2 / delta`
    pub chi_rwa: T,
    /// `omega_a + chi`
    pub lamb_shifted_omega_a: T,
    /// `g^2 (1/delta - 1/sigma)`; computed and reported, absent from the dynamics.
    pub j_coupling: T,
    /// `(delta / 2g)^2`
    pub n_crit: T,
}

/// Computes the dispersive quantities. Fails when the qubits are resonant
/// with the resonator, where the dispersive expansion does not exist.
pub fn derive<T: Real>(params: &SystemParams<T>) -> Result<DerivedParams<T>> {
    params.validate()?;
    let delta = (params.omega_a - params.omega_r).abs();
    if delta == T::zero() {
        return Err(Error::DegenerateDetuning {
            omega_r: params.omega_r.as_f64(),
            omega_a: params.omega_a.as_f64(),
        });
    }
    let sigma = params.omega_r + params.omega_a;
    let g2 = params.g * params.g;
    let chi = g2 * (delta.recip() + sigma.recip());
    let half_ratio = delta / (T::lit(2.0) * params.g);
    Ok(DerivedParams {
        delta,
        sigma,
        delta_r: params.omega_r - params.omega_m,
        chi,
        chi_rwa: g2 / delta,
        lamb_shifted_omega_a: params.omega_a + chi,
        j_coupling: g2 * (delta.recip() - sigma.recip()),
        n_crit: half_ratio * half_ratio,
    })
}

/// Computational-basis label of the two qubits, `|xy>` with `x, y in {g, e}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParityLabel {
    Gg,
    Ge,
    Eg,
    Ee,
}

impl ParityLabel {
    pub const ALL: [ParityLabel; 4] = [ParityLabel::Gg, ParityLabel::Ge, ParityLabel::Eg, ParityLabel::Ee];

    /// Eigenvalue of `sigma_z^(1) + sigma_z^(2)` with `|e>` at `+1`.
    pub fn total_sigma_z(self) -> i32 {
        match self {
            ParityLabel::Gg => -2,
            ParityLabel::Ge | ParityLabel::Eg => 0,
            ParityLabel::Ee => 2,
        }
    }

    pub fn is_even(self) -> bool {
        matches!(self, ParityLabel::Gg | ParityLabel::Ee)
    }

    /// Excitation of (qubit 1, qubit 2).
    pub fn excitations(self) -> (bool, bool) {
        match self {
            ParityLabel::Gg => (false, false),
            ParityLabel::Ge => (false, true),
            ParityLabel::Eg => (true, false),
            ParityLabel::Ee => (true, true),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParityLabel::Gg => "gg",
            ParityLabel::Ge => "ge",
            ParityLabel::Eg => "eg",
            ParityLabel::Ee => "ee",
        }
    }
}

impl fmt::Display for ParityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ParityLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gg" => Ok(ParityLabel::Gg),
            "ge" => Ok(ParityLabel::Ge),
            "eg" => Ok(ParityLabel::Eg),
            "ee" => Ok(ParityLabel::Ee),
            other => Err(Error::InvalidArgument(format!("unknown qubit label {other:?}"))),
        }
    }
}

/// State-dependent cavity shift `chi_xy = <xy| chi (sz1 + sz2) |xy>`.
pub fn chi_for_label<T: Real>(derived: &DerivedParams<T>, label: ParityLabel, rwa: bool) -> T {
    let chi = if rwa { derived.chi_rwa } else { derived.chi };
    chi * T::lit(label.total_sigma_z() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Validity {
    Pass,
    Warn,
}

impl Validity {
    pub fn as_str(self) -> &'static str {
        match self {
            Validity::Pass => "pass",
            Validity::Warn => "warn",
        }
    }
}

/// Dispersive-regime diagnostics for one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport<T> {
    pub g_over_delta: T,
    pub g_over_sigma: T,
    pub photons_over_n_crit: T,
    pub coupling: Validity,
    pub photons: Validity,
}

impl<T> ValidityReport<T> {
    pub fn overall(&self) -> Validity {
        if self.coupling == Validity::Pass && self.photons == Validity::Pass {
            Validity::Pass
        } else {
            Validity::Warn
        }
    }
}

pub const MAX_G_OVER_DELTA: f64 = 0.15;
pub const MAX_PHOTON_FRACTION: f64 = 0.1;

/// Flags parameter points where the dispersive expansion is questionable:
/// `g/delta > 0.15` or more than a tenth of the critical photon number.
pub fn validate_dispersive<T: Real>(
    params: &SystemParams<T>,
    derived: &DerivedParams<T>,
    mean_photons: T,
) -> ValidityReport<T> {
    let g_over_delta = params.g / derived.delta;
    let photons_over_n_crit = mean_photons / derived.n_crit;
    let flag = |ok: bool| if ok { Validity::Pass } else { Validity::Warn };
    ValidityReport {
        g_over_delta,
        g_over_sigma: params.g / derived.sigma,
        photons_over_n_crit,
        coupling: flag(g_over_delta <= T::lit(MAX_G_OVER_DELTA)),
        photons: flag(photons_over_n_crit <= T::lit(MAX_PHOTON_FRACTION)),
    }
}
