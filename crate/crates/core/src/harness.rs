//! Run configuration, parameter sweeps and CSV emission.
//!
//! Every run is deterministic: rows come out in a fixed order with floats
//! printed to 12 significant digits, so identical configurations give
//! byte-identical files.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fidelity::{self, FidelityReport, PointerSet, QuadSpec};
use crate::lindblad::{self, FockConfig, OracleKind, OracleReport};
use crate::model::{self, DerivedParams, ParityLabel, SystemParams, Validity};
use crate::pointer::{self, ModelKind, PointerOptions, PointerTrajectory};

/// Prefix of the environment overrides, e.g. `USCPARITY_G_OVER_KAPPA=20`.
pub const ENV_PREFIX: &str = "USCPARITY_";

/// Upper bound on `g / delta` accepted by [`RunConfig::validate`].
pub const G_OVER_DELTA_CAP: f64 = 0.2;

/// Relative pointer-vs-oracle deviation accepted by the oracle check.
pub const ORACLE_AMPLITUDE_TOL: f64 = 1e-3;
/// Closed form vs quadrature, for probabilities and fidelities.
pub const ORACLE_FIDELITY_TOL: f64 = 1e-8;
/// Coherent-state fidelity quoted next to the amplitude check.
pub const ORACLE_COHERENT_FIDELITY: f64 = 0.99;
/// Loose budget for the full-Rabi pointer separation.
pub const ORACLE_RABI_TOL: f64 = 0.1;

/// Which amplitude equations a run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSelection {
    Exact,
    Rwa,
    Both,
}

impl ModelSelection {
    pub fn kinds(self) -> &'static [ModelKind] {
        match self {
            ModelSelection::Exact => &[ModelKind::Exact],
            ModelSelection::Rwa => &[ModelKind::Rwa],
            ModelSelection::Both => &[ModelKind::Exact, ModelKind::Rwa],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelSelection::Exact => "exact",
            ModelSelection::Rwa => "rwa",
            ModelSelection::Both => "both",
        }
    }
}

impl FromStr for ModelSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(ModelSelection::Exact),
            "rwa" => Ok(ModelSelection::Rwa),
            "both" => Ok(ModelSelection::Both),
            other => Err(Error::Config(format!("model must be exact, rwa or both, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisScale {
    Linear,
    Log,
}

/// `points` values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub scale: AxisScale,
}

impl Axis {
    pub fn linear(min: f64, max: f64, points: usize) -> Self {
        Axis { min, max, points, scale: AxisScale::Linear }
    }

    pub fn log(min: f64, max: f64, points: usize) -> Self {
        Axis { min, max, points, scale: AxisScale::Log }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let n = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                if k + 1 == self.points {
                    return self.max;
                }
                let s = k as f64 / n;
                match self.scale {
                    AxisScale::Linear => self.min + (self.max - self.min) * s,
                    AxisScale::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * s).exp(),
                }
            })
            .collect()
    }

    fn check(&self, name: &str, upper: f64) -> Result<()> {
        if self.points < 2 {
            return Err(Error::Config(format!("{name}: a swept axis needs at least 2 points")));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min > 0.0 && self.min < self.max) {
            return Err(Error::Config(format!("{name}: need 0 < min < max, got {}:{}", self.min, self.max)));
        }
        if self.max > upper {
            return Err(Error::Config(format!("{name}: max {} above the supported {upper}", self.max)));
        }
        Ok(())
    }
}

/// `min:max:points` with an optional `:log` or `:linear` suffix.
impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if parts.len() < 3 || parts.len() > 4 {
            return Err(Error::Config(format!("axis {s:?}: expected min:max:points[:log]")));
        }
        let num = |v: &str| v.parse::<f64>().map_err(|_| Error::Config(format!("axis {s:?}: bad number {v:?}")));
        let points = parts[2].parse::<usize>().map_err(|_| Error::Config(format!("axis {s:?}: bad point count")))?;
        let scale = match parts.get(3).map(|v| v.to_ascii_lowercase()) {
            None => AxisScale::Linear,
            Some(v) if v == "linear" || v == "lin" => AxisScale::Linear,
            Some(v) if v == "log" => AxisScale::Log,
            Some(v) => return Err(Error::Config(format!("axis {s:?}: unknown scale {v:?}"))),
        };
        Ok(Axis { min: num(parts[0])?, max: num(parts[1])?, points, scale })
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.points)?;
        if self.scale == AxisScale::Log {
            f.write_str(":log")?;
        }
        Ok(())
    }
}

/// Heatmap grid over `g / kappa` and `g / omega_r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub g_over_kappa: Axis,
    pub g_over_omega_r: Axis,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { g_over_kappa: Axis::linear(5.0, 50.0, 40), g_over_omega_r: Axis::linear(0.01, 0.5, 40) }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.g_over_kappa.check("sweep_g_over_kappa", 1e4)?;
        self.g_over_omega_r.check("sweep_g_over_omega_r", 1.0)
    }

    pub fn len(&self) -> usize {
        self.g_over_kappa.points * self.g_over_omega_r.points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points `(g_over_kappa, g_over_omega_r)`, `g_over_kappa` outer.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let gw = self.g_over_omega_r.values();
        self.g_over_kappa.values().into_iter().flat_map(|gk| gw.iter().map(move |&w| (gk, w))).collect()
    }
}

/// Everything a CLI run needs. Defaults reproduce the phase portrait at
/// `g = 15 kappa`, `eps = 0.5 kappa`, `g / delta = 0.1`, `delta_r = 0`,
/// `omega_r / 2 pi = 2 GHz`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub g_over_kappa: f64,
    pub g_over_omega_r: f64,
    pub g_over_delta: f64,
    pub eps_over_kappa: f64,
    pub delta_r_over_kappa: f64,
    /// Only labels the output; all rates are in units of `kappa`.
    pub omega_r_ghz: f64,
    pub model: ModelSelection,
    /// Units of `1/kappa`.
    pub t_end: f64,
    pub tol: f64,
    pub out: Option<PathBuf>,
    /// Label of the time trace.
    pub label: ParityLabel,
    /// Sample spacing of the time trace, units of `1/kappa`.
    pub trace_dt: f64,
    pub sweep: SweepSpec,
    /// `g / kappa` values of the fidelity cut.
    pub cut_g_over_kappa: Vec<f64>,
    /// `g / omega_r` axis of the fidelity cut.
    pub cut_g_over_omega_r: Axis,
    pub cutoff: usize,
    /// Adds the full two-qubit Rabi comparison to the oracle check.
    pub oracle_rabi: bool,
    /// Multiplies the shift fed to the pointer equation in the oracle
    /// check. Anything but 1 is a fault injection.
    pub oracle_chi_scale: f64,
    /// Optional CSV with the oracle and pointer trajectories.
    pub oracle_trajectory_out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            g_over_kappa: 15.0,
            g_over_omega_r: 0.5,
            g_over_delta: 0.1,
            eps_over_kappa: 0.5,
            delta_r_over_kappa: 0.0,
            omega_r_ghz: 2.0,
            model: ModelSelection::Both,
            t_end: pointer::DEFAULT_T_END,
            tol: pointer::DEFAULT_TOL,
            out: None,
            label: ParityLabel::Ee,
            trace_dt: 0.01,
            sweep: SweepSpec::default(),
            cut_g_over_kappa: vec![15.0, 50.0],
            cut_g_over_omega_r: Axis::linear(0.001, 0.5, 50),
            cutoff: lindblad::DEFAULT_CUTOFF,
            oracle_rabi: false,
            oracle_chi_scale: 1.0,
            oracle_trajectory_out: None,
        }
    }
}

/// Recognised configuration keys, in the order they are documented.
pub const CONFIG_KEYS: &[&str] = &[
    "g_over_kappa",
    "g_over_omega_r",
    "g_over_delta",
    "eps_over_kappa",
    "delta_r_over_kappa",
    "omega_r_ghz",
    "model",
    "t_end",
    "tol",
    "out",
    "label",
    "trace_dt",
    "sweep_g_over_kappa",
    "sweep_g_over_omega_r",
    "cut_g_over_kappa",
    "cut_g_over_omega_r",
    "cutoff",
    "oracle_rabi",
    "oracle_chi_scale",
    "oracle_trajectory_out",
];

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::Config(format!("{key}: expected a number, got {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_path(v: &str) -> Option<PathBuf> {
    let v = v.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    /// Sets one key from its textual value. Key names are case-insensitive
    /// and accept `-` for `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "g_over_kappa" => self.g_over_kappa = parse_f64(&key, v)?,
            "g_over_omega_r" => self.g_over_omega_r = parse_f64(&key, v)?,
            "g_over_delta" => self.g_over_delta = parse_f64(&key, v)?,
            "eps_over_kappa" => self.eps_over_kappa = parse_f64(&key, v)?,
            "delta_r_over_kappa" => self.delta_r_over_kappa = parse_f64(&key, v)?,
            "omega_r_ghz" => self.omega_r_ghz = parse_f64(&key, v)?,
            "model" => self.model = v.parse()?,
            "t_end" => self.t_end = parse_f64(&key, v)?,
            "tol" => self.tol = parse_f64(&key, v)?,
            "out" => self.out = parse_path(v),
            "label" => self.label = v.parse()?,
            "trace_dt" => self.trace_dt = parse_f64(&key, v)?,
            "sweep_g_over_kappa" => self.sweep.g_over_kappa = v.parse()?,
            "sweep_g_over_omega_r" => self.sweep.g_over_omega_r = v.parse()?,
            "cut_g_over_kappa" => {
                self.cut_g_over_kappa = v
                    .trim_matches(|c| c == '[' || c == ']')
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_f64(&key, s))
                    .collect::<Result<_>>()?
            }
            "cut_g_over_omega_r" => self.cut_g_over_omega_r = v.parse()?,
            "cutoff" => {
                self.cutoff =
                    v.parse().map_err(|_| Error::Config(format!("cutoff: expected an integer, got {v:?}")))?
            }
            "oracle_rabi" => self.oracle_rabi = parse_bool(&key, v)?,
            "oracle_chi_scale" => self.oracle_chi_scale = parse_f64(&key, v)?,
            "oracle_trajectory_out" => self.oracle_trajectory_out = parse_path(v),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a configuration document: a JSON object, or flat
    /// `key = value` lines with `#` comments.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        if text.trim_start().starts_with('{') {
            return self.apply_json(text);
        }
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':').filter(|(k, _)| !k.contains(' ')))
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let v = v.trim().trim_matches('"');
            self.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    fn apply_json(&mut self, text: &str) -> Result<()> {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        let obj = doc.as_object().ok_or_else(|| Error::Config("JSON config must be an object".into()))?;
        for (k, v) in obj {
            let text = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Array(items) => {
                    items.iter().map(|i| i.to_string().trim_matches('"').to_string()).collect::<Vec<_>>().join(",")
                }
                serde_json::Value::Null => String::new(),
                other => other.to_string(),
            };
            self.set(k, &text)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_str(&text)
    }

    /// Applies `USCPARITY_<KEY>` variables for every known key. Other
    /// variables with the prefix are ignored.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let vars: BTreeMap<String, String> =
            vars.into_iter().map(|(k, v)| (k.as_ref().to_string(), v.as_ref().to_string())).collect();
        for key in CONFIG_KEYS {
            let name = format!("{ENV_PREFIX}{}", key.to_ascii_uppercase());
            if let Some(v) = vars.get(&name) {
                self.set(key, v).map_err(|e| Error::Config(format!("{name}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Defaults, then the file (if any), then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(p) = path {
            cfg.apply_file(p)?;
        }
        cfg.apply_env(std::env::vars())?;
        Ok(cfg)
    }

    /// Flat `key = value` rendering that [`RunConfig::apply_str`] reads back.
    pub fn to_key_values(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let cut = self.cut_g_over_kappa.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        let rows: Vec<(&str, String)> = vec![
            ("g_over_kappa", self.g_over_kappa.to_string()),
            ("g_over_omega_r", self.g_over_omega_r.to_string()),
            ("g_over_delta", self.g_over_delta.to_string()),
            ("eps_over_kappa", self.eps_over_kappa.to_string()),
            ("delta_r_over_kappa", self.delta_r_over_kappa.to_string()),
            ("omega_r_ghz", self.omega_r_ghz.to_string()),
            ("model", self.model.as_str().to_string()),
            ("t_end", self.t_end.to_string()),
            ("tol", self.tol.to_string()),
            ("out", path(&self.out)),
            ("label", self.label.as_str().to_string()),
            ("trace_dt", self.trace_dt.to_string()),
            ("sweep_g_over_kappa", self.sweep.g_over_kappa.to_string()),
            ("sweep_g_over_omega_r", self.sweep.g_over_omega_r.to_string()),
            ("cut_g_over_kappa", cut),
            ("cut_g_over_omega_r", self.cut_g_over_omega_r.to_string()),
            ("cutoff", self.cutoff.to_string()),
            ("oracle_rabi", self.oracle_rabi.to_string()),
            ("oracle_chi_scale", self.oracle_chi_scale.to_string()),
            ("oracle_trajectory_out", path(&self.oracle_trajectory_out)),
        ];
        rows.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("g_over_kappa", self.g_over_kappa),
            ("g_over_omega_r", self.g_over_omega_r),
            ("g_over_delta", self.g_over_delta),
            ("omega_r_ghz", self.omega_r_ghz),
            ("t_end", self.t_end),
            ("tol", self.tol),
            ("trace_dt", self.trace_dt),
            ("oracle_chi_scale", self.oracle_chi_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.eps_over_kappa.is_finite() && self.eps_over_kappa >= 0.0) {
            return Err(Error::Config(format!("eps_over_kappa must be >= 0, got {}", self.eps_over_kappa)));
        }
        if !self.delta_r_over_kappa.is_finite() {
            return Err(Error::Config("delta_r_over_kappa must be finite".into()));
        }
        if self.g_over_delta > G_OVER_DELTA_CAP {
            return Err(Error::Config(format!(
                "g_over_delta {} exceeds the dispersive cap {G_OVER_DELTA_CAP}",
                self.g_over_delta
            )));
        }
        if self.t_end < pointer::DEFAULT_T_END {
            return Err(Error::Config(format!(
                "t_end must be at least {} so the steady-state window fits",
                pointer::DEFAULT_T_END
            )));
        }
        if self.cut_g_over_kappa.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("cut_g_over_kappa values must be positive".into()));
        }
        self.cut_g_over_omega_r.check("cut_g_over_omega_r", 1.0)?;
        self.sweep.validate()?;
        self.params()?;
        Ok(())
    }

    pub fn params(&self) -> Result<SystemParams<f64>> {
        self.params_at(self.g_over_kappa, self.g_over_omega_r)
    }

    /// Parameters with the two swept ratios replaced.
    pub fn params_at(&self, g_over_kappa: f64, g_over_omega_r: f64) -> Result<SystemParams<f64>> {
        SystemParams::from_ratios(
            g_over_kappa,
            g_over_omega_r,
            self.g_over_delta,
            self.eps_over_kappa,
            self.delta_r_over_kappa,
        )
    }

    pub fn pointer_options(&self) -> PointerOptions<f64> {
        PointerOptions::default().with_t_end(self.t_end).with_tol(self.tol)
    }
}

/// 12 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

/// Steady amplitudes of the four labels and the largest late-time
/// oscillation about them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyPointers {
    pub pointers: PointerSet<f64>,
    pub residuals: [f64; 4],
}

impl SteadyPointers {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, &r| m.max(r))
    }
}

pub fn steady_pointers(
    params: &SystemParams<f64>,
    derived: &DerivedParams<f64>,
    model: ModelKind,
    opts: &PointerOptions<f64>,
) -> Result<SteadyPointers> {
    let mut pointers = PointerSet::symmetric(Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
    let mut residuals = [0.0; 4];
    for (k, label) in ParityLabel::ALL.into_iter().enumerate() {
        let traj = pointer::integrate(params, derived, label, model, opts)
            .map_err(|e| Error::InvalidArgument(format!("label {label}: {e}")))?;
        let s = pointer::steady_state(&traj)?;
        match label {
            ParityLabel::Gg => pointers.gg = s.mean,
            ParityLabel::Ge => pointers.ge = s.mean,
            ParityLabel::Eg => pointers.eg = s.mean,
            ParityLabel::Ee => pointers.ee = s.mean,
        }
        residuals[k] = s.residual_oscillation;
    }
    Ok(SteadyPointers { pointers, residuals })
}

/// One row of the phase portrait.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortraitRow {
    pub label: ParityLabel,
    pub model: ModelKind,
    pub steady: Complex<f64>,
    pub residual: f64,
}

pub fn phase_portrait(cfg: &RunConfig) -> Result<Vec<PortraitRow>> {
    cfg.validate()?;
    let params = cfg.params()?;
    let derived = model::derive(&params)?;
    let opts = cfg.pointer_options();
    let mut rows = Vec::new();
    for &kind in cfg.model.kinds() {
        let s = steady_pointers(&params, &derived, kind, &opts)?;
        for (k, label) in ParityLabel::ALL.into_iter().enumerate() {
            rows.push(PortraitRow { label, model: kind, steady: s.pointers.get(label), residual: s.residuals[k] });
        }
    }
    Ok(rows)
}

/// Columns `label,model,I,Q,residual`.
pub fn run_phase_portrait<W: Write>(cfg: &RunConfig, out: W) -> Result<Vec<PortraitRow>> {
    let rows = phase_portrait(cfg)?;
    let mut w = csv_writer(out);
    w.write_record(["label", "model", "I", "Q", "residual"])?;
    for r in &rows {
        w.write_record([
            r.label.as_str().to_string(),
            r.model.as_str().to_string(),
            fmt_float(r.steady.re),
            fmt_float(r.steady.im),
            fmt_float(r.residual),
        ])?;
    }
    w.flush()?;
    Ok(rows)
}

/// Uniform grid `0, dt, 2 dt, ...` ending exactly at `t_end`.
pub fn trace_times(t_end: f64, dt: f64) -> Vec<f64> {
    let n = (t_end / dt).round().max(1.0) as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).filter(|&t| t < t_end).collect();
    times.push(t_end);
    times
}

/// Amplitude of `label` under each selected model on the trace grid.
pub fn time_trace(cfg: &RunConfig, label: ParityLabel) -> Result<Vec<PointerTrajectory<f64>>> {
    cfg.validate()?;
    let params = cfg.params()?;
    let derived = model::derive(&params)?;
    let opts = cfg.pointer_options();
    let times: Vec<f64> = trace_times(cfg.t_end, cfg.trace_dt).into_iter().map(|t| t / params.kappa).collect();
    cfg.model
        .kinds()
        .iter()
        .map(|&kind| pointer::integrate_at(&params, &derived, label, kind, &opts, times.clone()))
        .collect()
}

/// Columns `t,re,im,model`, time in units of `1/kappa`.
pub fn run_time_trace<W: Write>(
    cfg: &RunConfig,
    label: ParityLabel,
    out: W,
) -> Result<Vec<PointerTrajectory<f64>>> {
    let trajs = time_trace(cfg, label)?;
    let mut w = csv_writer(out);
    w.write_record(["t", "re", "im", "model"])?;
    for traj in &trajs {
        for (t, a) in traj.times.iter().zip(&traj.amplitudes) {
            w.write_record([
                fmt_float(t * traj.kappa),
                fmt_float(a.re),
                fmt_float(a.im),
                traj.model_kind.as_str().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(trajs)
}

/// Fidelity of one grid point under one model.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityPoint {
    pub g_over_omega_r: f64,
    pub g_over_kappa: f64,
    pub eps_over_kappa: f64,
    pub model: ModelKind,
    pub report: Option<FidelityReport<f64>>,
    pub residual: f64,
    pub validity: Validity,
    pub error: Option<String>,
}

impl FidelityPoint {
    pub fn f_avg(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.f_avg)
    }
}

/// Steady pointers, closed-form fidelity and the validity flag of one
/// point. Failures end up in `error` rather than aborting a sweep.
pub fn fidelity_point(cfg: &RunConfig, g_over_kappa: f64, g_over_omega_r: f64, kind: ModelKind) -> FidelityPoint {
    let mut point = FidelityPoint {
        g_over_omega_r,
        g_over_kappa,
        eps_over_kappa: cfg.eps_over_kappa,
        model: kind,
        report: None,
        residual: f64::NAN,
        validity: Validity::Warn,
        error: None,
    };
    let run = || -> Result<(FidelityReport<f64>, f64, Validity)> {
        let params = cfg.params_at(g_over_kappa, g_over_omega_r)?;
        let derived = model::derive(&params)?;
        let s = steady_pointers(&params, &derived, kind, &cfg.pointer_options())?;
        let report = fidelity::fidelity_closed_form(&s.pointers)?;
        let photons = ParityLabel::ALL.iter().fold(0.0_f64, |m, &l| m.max(s.pointers.get(l).norm_sqr()));
        let validity = model::validate_dispersive(&params, &derived, photons).overall();
        Ok((report, s.max_residual(), validity))
    };
    match run() {
        Ok((report, residual, validity)) => {
            point.report = Some(report);
            point.residual = residual;
            point.validity = validity;
        }
        Err(e) => point.error = Some(e.to_string()),
    }
    point
}

fn fidelity_points(cfg: &RunConfig, grid: &[(f64, f64)]) -> Vec<FidelityPoint> {
    let kinds = cfg.model.kinds();
    let jobs: Vec<(f64, f64, ModelKind)> =
        grid.iter().flat_map(|&(gk, gw)| kinds.iter().map(move |&k| (gk, gw, k))).collect();
    jobs.par_iter().map(|&(gk, gw, k)| fidelity_point(cfg, gk, gw, k)).collect()
}

/// Row-major over the sweep (`g_over_kappa` outer), exact before RWA.
pub fn fidelity_heatmap(sweep: &SweepSpec, cfg: &RunConfig) -> Result<Vec<FidelityPoint>> {
    sweep.validate()?;
    cfg.validate()?;
    Ok(fidelity_points(cfg, &sweep.points()))
}

/// Line cuts along `cfg.cut_g_over_omega_r` for each requested `g / kappa`.
pub fn fidelity_cut(cfg: &RunConfig, g_over_kappa: &[f64]) -> Result<Vec<FidelityPoint>> {
    cfg.validate()?;
    if g_over_kappa.is_empty() {
        return Err(Error::Config("fidelity cut needs at least one g_over_kappa value".into()));
    }
    if g_over_kappa.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Config("cut g_over_kappa values must be positive".into()));
    }
    let gw = cfg.cut_g_over_omega_r.values();
    let grid: Vec<(f64, f64)> = g_over_kappa.iter().flat_map(|&gk| gw.iter().map(move |&w| (gk, w))).collect();
    Ok(fidelity_points(cfg, &grid))
}

pub const FIDELITY_HEADER: [&str; 11] = [
    "g_over_wr",
    "g_over_kappa",
    "eps_over_kappa",
    "model",
    "P_even",
    "F_even",
    "F_odd",
    "F_avg",
    "residual",
    "validity",
    "error",
];

pub fn write_fidelity_rows<W: Write>(points: &[FidelityPoint], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(FIDELITY_HEADER)?;
    for p in points {
        let num = |f: fn(&FidelityReport<f64>) -> f64| p.report.as_ref().map(|r| fmt_float(f(r))).unwrap_or_default();
        w.write_record([
            fmt_float(p.g_over_omega_r),
            fmt_float(p.g_over_kappa),
            fmt_float(p.eps_over_kappa),
            p.model.as_str().to_string(),
            num(|r| r.prob_even),
            num(|r| r.f_even),
            num(|r| r.f_odd),
            num(|r| r.f_avg),
            if p.residual.is_nan() { String::new() } else { fmt_float(p.residual) },
            p.validity.as_str().to_string(),
            p.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run_fidelity_heatmap<W: Write>(sweep: &SweepSpec, cfg: &RunConfig, out: W) -> Result<Vec<FidelityPoint>> {
    let points = fidelity_heatmap(sweep, cfg)?;
    write_fidelity_rows(&points, out)?;
    Ok(points)
}

pub fn run_fidelity_cut<W: Write>(cfg: &RunConfig, g_over_kappa: &[f64], out: W) -> Result<Vec<FidelityPoint>> {
    let points = fidelity_cut(cfg, g_over_kappa)?;
    write_fidelity_rows(&points, out)?;
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Reported for reference, not part of the exit status.
    Info,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Info => "info",
        }
    }
}

/// One line of the oracle check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: &'static str,
    pub label: String,
    pub metric: &'static str,
    pub value: f64,
    /// Bound the value is held to; `upper` says which side.
    pub threshold: f64,
    pub upper: bool,
    pub status: CheckStatus,
}

impl CheckRow {
    fn bound(check: &'static str, label: &str, metric: &'static str, value: f64, threshold: f64, upper: bool) -> Self {
        let ok = if upper { value <= threshold } else { value >= threshold };
        CheckRow {
            check,
            label: label.to_string(),
            metric,
            value,
            threshold,
            upper,
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        }
    }

    fn info(check: &'static str, label: &str, metric: &'static str, value: f64, threshold: f64, upper: bool) -> Self {
        CheckRow { status: CheckStatus::Info, ..Self::bound(check, label, metric, value, threshold, upper) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub rows: Vec<CheckRow>,
    pub reports: Vec<OracleReport<f64>>,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> Vec<&CheckRow> {
        self.rows.iter().filter(|r| r.status == CheckStatus::Fail).collect()
    }
}

/// Pointer trajectories and the matching oracle runs, kept for export.
struct OracleRun {
    oracle: lindblad::OracleTrajectory<f64>,
    pointer: PointerTrajectory<f64>,
}

fn dispersive_run(cfg: &RunConfig, label: ParityLabel) -> Result<(OracleRun, OracleReport<f64>)> {
    let params = cfg.params()?;
    let derived = model::derive(&params)?;
    let fock = FockConfig::default().with_cutoff(cfg.cutoff).with_t_end(cfg.t_end);
    let oracle = lindblad::evolve_dispersive_branch(&params, &derived, label, &fock)?;
    let mut shifted = derived;
    shifted.chi *= cfg.oracle_chi_scale;
    shifted.chi_rwa *= cfg.oracle_chi_scale;
    let pointer = pointer::integrate_at(
        &params,
        &shifted,
        label,
        ModelKind::Exact,
        &cfg.pointer_options(),
        oracle.times.clone(),
    )?;
    let report = lindblad::compare_with_ansatz(&oracle, &pointer)?;
    Ok((OracleRun { oracle, pointer }, report))
}

fn oracle_check_inner(cfg: &RunConfig) -> Result<(OracleCheck, Vec<OracleRun>)> {
    cfg.validate()?;
    let results: Vec<Result<(OracleRun, OracleReport<f64>)>> =
        ParityLabel::ALL.par_iter().map(|&l| dispersive_run(cfg, l)).collect();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut runs = Vec::new();
    for (label, res) in ParityLabel::ALL.into_iter().zip(results) {
        let l = label.as_str();
        match res {
            Ok((run, r)) => {
                let d = &r.diagnostics;
                rows.push(CheckRow::bound(
                    "dispersive",
                    l,
                    "relative_deviation",
                    r.relative_deviation,
                    ORACLE_AMPLITUDE_TOL,
                    true,
                ));
                rows.push(CheckRow::bound("dispersive", l, "trace_drift", d.max_trace_drift, 1e-9, true));
                rows.push(CheckRow::bound("dispersive", l, "hermiticity", d.max_hermiticity, 1e-10, true));
                rows.push(CheckRow::bound("dispersive", l, "min_eigenvalue", d.min_eigenvalue, -1e-8, false));
                rows.push(CheckRow::bound("dispersive", l, "leak", d.max_leak, lindblad::LEAK_TOL, true));
                rows.push(CheckRow::info(
                    "dispersive",
                    l,
                    "coherent_fidelity",
                    r.min_coherent_fidelity,
                    ORACLE_COHERENT_FIDELITY,
                    false,
                ));
                rows.push(CheckRow::info("dispersive", l, "purity", r.min_purity, ORACLE_COHERENT_FIDELITY, false));
                reports.push(r);
                runs.push(run);
            }
            Err(e) => {
                let mut row = CheckRow::bound("dispersive", l, "relative_deviation", f64::NAN, ORACLE_AMPLITUDE_TOL, true);
                row.label = format!("{l}: {e}");
                rows.push(row);
            }
        }
    }

    let params = cfg.params()?;
    let derived = model::derive(&params)?;
    for &kind in cfg.model.kinds() {
        let check = match kind {
            ModelKind::Exact => "fidelity_exact",
            ModelKind::Rwa => "fidelity_rwa",
        };
        let s = steady_pointers(&params, &derived, kind, &cfg.pointer_options())?;
        let closed = fidelity::fidelity_closed_form(&s.pointers)?;
        let numeric = fidelity::fidelity_numeric(&s.pointers, closed.p_m, &QuadSpec::default())?;
        for (metric, a, b) in [
            ("P_even", closed.prob_even, numeric.prob_even),
            ("F_even", closed.f_even, numeric.f_even),
            ("F_odd", closed.f_odd, numeric.f_odd),
            ("F_avg", closed.f_avg, numeric.f_avg),
        ] {
            rows.push(CheckRow::bound(check, "all", metric, (a - b).abs(), ORACLE_FIDELITY_TOL, true));
        }
    }

    if cfg.oracle_rabi {
        let fock = FockConfig::full_rabi().with_cutoff(cfg.cutoff).with_t_end(cfg.t_end);
        let rabi = lindblad::evolve_full_rabi(&params, &fock)?;
        let measured = lindblad::quadrature_separation(&lindblad::rabi_branch_means(&rabi, pointer::STEADY_WINDOW));
        let s = steady_pointers(&params, &derived, ModelKind::Exact, &cfg.pointer_options())?;
        let p = &s.pointers;
        let predicted = lindblad::quadrature_separation(&[p.gg, p.ge, p.eg, p.ee]);
        let scale = predicted.abs().max(1e-12);
        rows.push(CheckRow::bound(
            "full_rabi",
            "even_odd",
            "separation_relative",
            (measured - predicted).abs() / scale,
            ORACLE_RABI_TOL,
            true,
        ));
    }
    Ok((OracleCheck { rows, reports }, runs))
}

/// Dispersive Lindblad oracle against the pointer equation for every label,
/// closed-form fidelities against quadrature, and optionally the full Rabi
/// comparison.
pub fn oracle_check(cfg: &RunConfig) -> Result<OracleCheck> {
    oracle_check_inner(cfg).map(|(c, _)| c)
}

/// Columns `check,label,metric,value,threshold,status`. Also writes the
/// trajectories to `cfg.oracle_trajectory_out` when set.
pub fn run_oracle_check<W: Write>(cfg: &RunConfig, out: W) -> Result<OracleCheck> {
    let (check, runs) = oracle_check_inner(cfg)?;
    let mut w = csv_writer(out);
    w.write_record(["check", "label", "metric", "value", "threshold", "status"])?;
    for r in &check.rows {
        let bound = format!("{}{}", if r.upper { "<=" } else { ">=" }, fmt_float(r.threshold));
        w.write_record([
            r.check.to_string(),
            r.label.clone(),
            r.metric.to_string(),
            fmt_float(r.value),
            bound,
            r.status.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    if let Some(path) = &cfg.oracle_trajectory_out {
        let file = std::fs::File::create(path)?;
        let mut t = csv_writer(std::io::BufWriter::new(file));
        t.write_record(TRAJECTORY_HEADER)?;
        for run in &runs {
            write_trajectory(&mut t, &run.oracle.times, &run.oracle.mean_field, run.oracle.label, run.oracle.kind.as_str(), run.pointer.kappa)?;
            let p = &run.pointer;
            write_trajectory(&mut t, &p.times, &p.amplitudes, p.label, p.model_kind.as_str(), p.kappa)?;
        }
        t.flush()?;
    }
    Ok(check)
}

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "re_alpha", "im_alpha", "label", "model"];

fn write_trajectory<W: Write>(
    w: &mut csv::Writer<W>,
    times: &[f64],
    values: &[Complex<f64>],
    label: ParityLabel,
    model: &str,
    kappa: f64,
) -> Result<()> {
    for (t, a) in times.iter().zip(values) {
        w.write_record([fmt_float(t * kappa), fmt_float(a.re), fmt_float(a.im), label.as_str().to_string(), model.to_string()])?;
    }
    Ok(())
}

/// Trajectory export, columns `t,re_alpha,im_alpha,label,model`.
pub fn write_pointer_trajectories<W: Write>(trajs: &[PointerTrajectory<f64>], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for p in trajs {
        write_trajectory(&mut w, &p.times, &p.amplitudes, p.label, p.model_kind.as_str(), p.kappa)?;
    }
    w.flush()?;
    Ok(())
}

/// Oracle trajectories in the same schema, `model=oracle_dispersive`.
pub fn write_oracle_trajectory<W: Write>(traj: &lindblad::OracleTrajectory<f64>, kappa: f64, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    write_trajectory(&mut w, &traj.times, &traj.mean_field, traj.label, OracleKind::Dispersive.as_str(), kappa)?;
    w.flush()?;
    Ok(())
}
