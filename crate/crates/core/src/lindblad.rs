//! Truncated Fock-space master-equation oracle.
//!
//! Two problems are solved by fixed-step RK4 on a dense density matrix:
//!
//! * a single dispersive branch: the field alone, driven with
//!   `H = (dr + chi_xy) a'a + (chi_xy/2)(a^2 e^{-2i wm t} + h.c.) + eps (a + a')`
//!   and damped by `kappa D[a]`;
//! * the full two-qubit Rabi model, with the field in the frame rotating at
//!   the drive and the qubits in the frame rotating at `omega_a`, which
//!   leaves
//!   `H = dr a'a + eps (a + a') + g sum_j (s+_j e^{i wa t} + h.c.)(a e^{-i wm t} + h.c.)`.
//!
//! In both frames `kappa D[a]`, `gamma_1 D[s-]` and `(gamma_phi/2) D[sz]`
//! keep their lab-frame form.
//!
//! The generator is applied as `M + M^dagger + sum_k r_k L_k rho L_k^dagger`
//! with `M = -i H_eff rho` and `H_eff = H - (i/2) sum_k r_k L_k^dagger L_k`,
//! which keeps every stage exactly Hermitian.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{chi_for_label, DerivedParams, ParityLabel, SystemParams};
use crate::pointer::PointerTrajectory;
use crate::scalar::Real;

pub const DEFAULT_CUTOFF: usize = 30;
pub const MIN_CUTOFF: usize = 10;
pub const MIN_RABI_CUTOFF: usize = 20;
pub const MAX_DIMENSION: usize = 400;
pub const LEAK_TOL: f64 = 1e-6;
/// Steps per period of the fastest significant coefficient.
pub const STEPS_PER_PERIOD: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialQubits {
    /// `|+>|+>`, the state entering the parity measurement.
    PlusPlus,
    Basis(ParityLabel),
}

/// Basis in which the dissipators of the two-qubit model act.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DissipatorFrame {
    /// Basis of the dispersive transformation, as for the effective model.
    Dressed,
    /// Bare lab-frame operators.
    Lab,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockConfig<T> {
    /// Highest photon number kept.
    pub cutoff: usize,
    pub include_qubits: bool,
    /// In units of `1/kappa`.
    pub t_end: T,
    /// Absolute step; derived from the generator when `None`.
    pub dt: Option<T>,
    /// Spacing of the state checks and snapshots, in units of `1/kappa`.
    pub check_interval: T,
    pub leak_tol: T,
    pub allow_large_dimension: bool,
    /// Drops every dissipator (unitary sanity runs).
    pub closed_system: bool,
    pub initial_qubits: InitialQubits,
    pub frame: DissipatorFrame,
    /// Entries of the transformed two-qubit Hamiltonian smaller than
    /// `drop_tol * kappa` are dropped.
    pub drop_tol: T,
}

impl<T: Real> Default for FockConfig<T> {
    fn default() -> Self {
        FockConfig {
            cutoff: DEFAULT_CUTOFF,
            include_qubits: false,
            t_end: T::lit(10.0),
            dt: None,
            check_interval: T::lit(0.1),
            leak_tol: T::lit(LEAK_TOL),
            allow_large_dimension: false,
            closed_system: false,
            initial_qubits: InitialQubits::PlusPlus,
            frame: DissipatorFrame::Dressed,
            drop_tol: T::lit(DRESSING_DROP_TOL),
        }
    }
}

impl<T: Real> FockConfig<T> {
    pub fn full_rabi() -> Self {
        FockConfig { include_qubits: true, ..Self::default() }
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_t_end(mut self, t_end: T) -> Self {
        self.t_end = t_end;
        self
    }

    fn check(&self) -> Result<()> {
        if self.cutoff < MIN_CUTOFF {
            return Err(Error::InvalidArgument(format!(
                "cutoff {} below the minimum of {MIN_CUTOFF}",
                self.cutoff
            )));
        }
        if !(self.t_end > T::zero()) || !(self.check_interval > T::zero()) {
            return Err(Error::InvalidArgument("t_end and check_interval must be positive".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > T::zero()) {
                return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
            }
        }
        Ok(())
    }
}

/// Sparse matrix as a row-sorted list of `(row, col, value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    pub dim: usize,
    pub entries: Vec<(usize, usize, Complex<T>)>,
}

impl<T: Real> SparseMatrix<T> {
    pub fn identity(dim: usize) -> Self {
        SparseMatrix { dim, entries: (0..dim).map(|i| (i, i, one())).collect() }
    }

    pub fn annihilation(cutoff: usize) -> Self {
        let entries = (1..=cutoff).map(|n| (n - 1, n, re(T::from_count(n).sqrt()))).collect();
        SparseMatrix { dim: cutoff + 1, entries }
    }

    pub fn adjoint(&self) -> Self {
        let mut entries: Vec<_> = self.entries.iter().map(|&(i, j, v)| (j, i, v.conj())).collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        SparseMatrix { dim: self.dim, entries }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut dense = vec![Complex::new(T::zero(), T::zero()); self.dim * self.dim];
        for &(i, k, a) in &self.entries {
            for &(k2, j, b) in &other.entries {
                if k2 == k {
                    dense[i * self.dim + j] += a * b;
                }
            }
        }
        Self::from_dense(self.dim, &dense)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let d = other.dim;
        let mut entries = Vec::with_capacity(self.entries.len() * other.entries.len());
        for &(i, j, a) in &self.entries {
            for &(k, l, b) in &other.entries {
                entries.push((i * d + k, j * d + l, a * b));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        SparseMatrix { dim: self.dim * d, entries }
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        SparseMatrix { dim: self.dim, entries: self.entries.iter().map(|&(i, j, v)| (i, j, v * s)).collect() }
    }

    fn from_dense(dim: usize, dense: &[Complex<T>]) -> Self {
        let mut entries = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                let v = dense[i * dim + j];
                if v != Complex::new(T::zero(), T::zero()) {
                    entries.push((i, j, v));
                }
            }
        }
        SparseMatrix { dim, entries }
    }
}

fn one<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

fn zero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// Two-qubit operators in the basis gg, ge, eg, ee (first letter = qubit 1).
fn qubit_raising<T: Real>(qubit: usize) -> SparseMatrix<T> {
    let bit = if qubit == 0 { 2 } else { 1 };
    let entries = (0..4).filter(|q| q & bit == 0).map(|q| (q | bit, q, one())).collect::<Vec<_>>();
    let mut m = SparseMatrix { dim: 4, entries };
    m.entries.sort_by_key(|&(i, j, _)| (i, j));
    m
}

fn qubit_sigma_z<T: Real>(qubit: usize) -> SparseMatrix<T> {
    let bit = if qubit == 0 { 2 } else { 1 };
    let entries = (0..4).map(|q| (q, q, re(if q & bit != 0 { T::one() } else { -T::one() }))).collect();
    SparseMatrix { dim: 4, entries }
}

/// `amp * e^{i freq t}`.
#[derive(Debug, Clone, Copy)]
struct Coefficient<T> {
    amp: Complex<T>,
    freq: T,
}

impl<T: Real> Coefficient<T> {
    fn constant(amp: Complex<T>) -> Self {
        Coefficient { amp, freq: T::zero() }
    }

    fn at(&self, t: T) -> Complex<T> {
        if self.freq == T::zero() {
            self.amp
        } else {
            let ph = self.freq * t;
            self.amp * Complex::new(ph.cos(), ph.sin())
        }
    }
}

/// Time-dependent Lindblad generator.
struct Generator<T> {
    dim: usize,
    /// Terms of `H_eff`.
    terms: Vec<(Coefficient<T>, SparseMatrix<T>)>,
    jumps: Vec<(T, SparseMatrix<T>)>,
    x: Vec<Complex<T>>,
}

impl<T: Real> Generator<T> {
    fn new(dim: usize, mut terms: Vec<(Coefficient<T>, SparseMatrix<T>)>, jumps: Vec<(T, SparseMatrix<T>)>) -> Self {
        for (rate, l) in &jumps {
            if *rate > T::zero() {
                let ldl = l.adjoint().mul(l);
                terms.push((Coefficient::constant(Complex::new(T::zero(), -*rate * T::lit(0.5))), ldl));
            }
        }
        let jumps = jumps.into_iter().filter(|(r, _)| *r > T::zero()).collect();
        Generator { dim, terms, jumps, x: vec![zero(); dim * dim] }
    }

    fn apply(&mut self, t: T, rho: &[Complex<T>], out: &mut [Complex<T>]) {
        let d = self.dim;
        let x = &mut self.x;
        x.iter_mut().for_each(|v| *v = zero());
        for (c, op) in &self.terms {
            let s = c.at(t);
            for &(i, j, v) in &op.entries {
                let h = s * v;
                let (dst, src) = (&mut x[i * d..(i + 1) * d], &rho[j * d..(j + 1) * d]);
                for (o, r) in dst.iter_mut().zip(src) {
                    *o += h * r;
                }
            }
        }
        // -i X + (-i X)^dagger
        for i in 0..d {
            for k in i..d {
                let a = x[i * d + k];
                let b = x[k * d + i];
                let v = Complex::new(a.im + b.im, b.re - a.re);
                out[i * d + k] = v;
                out[k * d + i] = v.conj();
            }
        }
        for (rate, l) in &self.jumps {
            // Z = L rho, then out += rate Z L^dagger
            x.iter_mut().for_each(|v| *v = zero());
            for &(i, j, v) in &l.entries {
                let (dst, src) = (&mut x[i * d..(i + 1) * d], &rho[j * d..(j + 1) * d]);
                for (o, r) in dst.iter_mut().zip(src) {
                    *o += v * r;
                }
            }
            for &(k, m, v) in &l.entries {
                let w = v.conj() * *rate;
                for i in 0..d {
                    out[i * d + k] += x[i * d + m] * w;
                }
            }
        }
    }
}

/// Dense density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState<T> {
    pub dim: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> DensityState<T> {
    pub fn pure(amplitudes: &[Complex<T>]) -> Self {
        let dim = amplitudes.len();
        let mut data = vec![zero(); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = amplitudes[i] * amplitudes[j].conj();
            }
        }
        DensityState { dim, data }
    }

    /// Replaces the matrix by its Hermitian part.
    pub fn symmetrize(&mut self) {
        let d = self.dim;
        let half = T::lit(0.5);
        for i in 0..d {
            let v = &mut self.data[i * d + i];
            v.im = T::zero();
            for j in i + 1..d {
                let h = (self.data[i * d + j] + self.data[j * d + i].conj()) * half;
                self.data[i * d + j] = h;
                self.data[j * d + i] = h.conj();
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).fold(zero(), |acc, i| acc + self.get(i, i))
    }

    pub fn hermiticity_residual(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn purity(&self) -> T {
        // Tr rho^2 = sum |rho_ij|^2 for Hermitian rho
        self.data.iter().fold(T::zero(), |acc, v| acc + v.norm_sqr())
    }

    /// Smallest eigenvalue of the Hermitian part, computed in double precision.
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim;
        let m = DMatrix::from_fn(d, d, |i, j| {
            let a = self.get(i, j);
            let b = self.get(j, i).conj();
            Complex::new((a.re + b.re).as_f64() * 0.5, (a.im + b.im).as_f64() * 0.5)
        });
        m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `Tr[O rho]`.
    pub fn expect(&self, op: &SparseMatrix<T>) -> Complex<T> {
        op.entries.iter().fold(zero(), |acc, &(i, j, v)| acc + v * self.get(j, i))
    }

    /// `<alpha|rho|alpha>` for a field-only state.
    pub fn coherent_fidelity(&self, alpha: Complex<T>) -> T {
        let c = coherent_amplitudes(alpha, self.dim - 1);
        let mut f: Complex<T> = zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                f += c[i].conj() * self.get(i, j) * c[j];
            }
        }
        f.re.max(T::zero()).min(T::one())
    }
}

/// Fock amplitudes of `|alpha>` up to `cutoff`.
pub fn coherent_amplitudes<T: Real>(alpha: Complex<T>, cutoff: usize) -> Vec<Complex<T>> {
    let mut c = Vec::with_capacity(cutoff + 1);
    let mut v = re((-alpha.norm_sqr() * T::lit(0.5)).exp());
    c.push(v);
    for n in 1..=cutoff {
        v = v * alpha / T::from_count(n).sqrt();
        c.push(v);
    }
    c
}

/// Extremes of the state checks over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDiagnostics<T> {
    pub max_trace_drift: T,
    pub max_hermiticity: T,
    pub min_eigenvalue: f64,
    pub min_purity: T,
    pub max_leak: T,
    pub steps: usize,
    pub dt: T,
}

impl<T: Real> StateDiagnostics<T> {
    fn new(dt: T) -> Self {
        StateDiagnostics {
            max_trace_drift: T::zero(),
            max_hermiticity: T::zero(),
            min_eigenvalue: f64::INFINITY,
            min_purity: T::one(),
            max_leak: T::zero(),
            steps: 0,
            dt,
        }
    }

    /// Trace within 1e-9, Hermiticity within 1e-10, eigenvalues above -1e-8.
    pub fn within_invariants(&self) -> bool {
        self.max_trace_drift.as_f64() <= 1e-9 && self.max_hermiticity.as_f64() <= 1e-10 && self.min_eigenvalue >= -1e-8
    }
}

/// Population of the top three Fock levels, summed over qubit states.
fn leak<T: Real>(rho: &DensityState<T>, field_dim: usize) -> T {
    let blocks = rho.dim / field_dim;
    let mut p = T::zero();
    for q in 0..blocks {
        for n in field_dim.saturating_sub(3)..field_dim {
            let i = q * field_dim + n;
            p += rho.get(i, i).re;
        }
    }
    p
}

struct RunSpec<T> {
    t_end: T,
    dt: T,
    check_every: usize,
    field_dim: usize,
    leak_tol: T,
    cutoff: usize,
}

fn propagate<T: Real>(
    generator: &mut Generator<T>,
    rho: &mut DensityState<T>,
    spec: &RunSpec<T>,
    mut observe: impl FnMut(T, &DensityState<T>, bool),
) -> Result<StateDiagnostics<T>> {
    let d2 = rho.dim * rho.dim;
    let steps = (spec.t_end / spec.dt).ceil().to_usize().unwrap_or(1).max(1);
    let dt = spec.t_end / T::from_count(steps);
    let mut diag = StateDiagnostics::new(dt);
    diag.steps = steps;
    let mut k = [vec![zero(); d2], vec![zero(); d2], vec![zero(); d2], vec![zero(); d2]];
    let mut tmp = vec![zero(); d2];
    let half = dt * T::lit(0.5);
    let sixth = dt / T::lit(6.0);

    let check = |t: T, rho: &DensityState<T>, diag: &mut StateDiagnostics<T>| -> Result<()> {
        let l = leak(rho, spec.field_dim);
        diag.max_leak = diag.max_leak.max(l);
        if l > spec.leak_tol {
            return Err(Error::Cutoff { cutoff: spec.cutoff, leak: l.as_f64(), time: t.as_f64() });
        }
        let tr = rho.trace();
        diag.max_trace_drift = diag.max_trace_drift.max((tr - one()).norm());
        diag.max_hermiticity = diag.max_hermiticity.max(rho.hermiticity_residual());
        diag.min_purity = diag.min_purity.min(rho.purity());
        diag.min_eigenvalue = diag.min_eigenvalue.min(rho.min_eigenvalue());
        Ok(())
    };

    check(T::zero(), rho, &mut diag)?;
    observe(T::zero(), rho, true);
    for step in 0..steps {
        let t = dt * T::from_count(step);
        generator.apply(t, &rho.data, &mut k[0]);
        for (o, (r, a)) in tmp.iter_mut().zip(rho.data.iter().zip(&k[0])) {
            *o = r + a * half;
        }
        generator.apply(t + half, &tmp, &mut k[1]);
        for (o, (r, a)) in tmp.iter_mut().zip(rho.data.iter().zip(&k[1])) {
            *o = r + a * half;
        }
        generator.apply(t + half, &tmp, &mut k[2]);
        for (o, (r, a)) in tmp.iter_mut().zip(rho.data.iter().zip(&k[2])) {
            *o = r + a * dt;
        }
        generator.apply(t + dt, &tmp, &mut k[3]);
        let two = T::lit(2.0);
        for (idx, r) in rho.data.iter_mut().enumerate() {
            *r += (k[0][idx] + k[1][idx] * two + k[2][idx] * two + k[3][idx]) * sixth;
        }
        let t_next = if step + 1 == steps { spec.t_end } else { dt * T::from_count(step + 1) };
        let is_check = (step + 1) % spec.check_every == 0 || step + 1 == steps;
        if is_check {
            // residual of the raw update, before projecting it away
            diag.max_hermiticity = diag.max_hermiticity.max(rho.hermiticity_residual());
        }
        // The shortcut in `Generator::apply` is exact only for Hermitian
        // input; rounding residue left in place is amplified over long runs.
        rho.symmetrize();
        if is_check {
            check(t_next, rho, &mut diag)?;
        }
        observe(t_next, rho, is_check);
    }
    Ok(diag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Dispersive,
    Rabi,
}

impl OracleKind {
    /// Value of the `model` column in trajectory exports.
    pub fn as_str(self) -> &'static str {
        match self {
            OracleKind::Dispersive => "oracle_dispersive",
            OracleKind::Rabi => "oracle_rabi",
        }
    }
}

/// Field trajectory of one dispersive branch.
#[derive(Debug, Clone)]
pub struct OracleTrajectory<T> {
    pub label: ParityLabel,
    pub kind: OracleKind,
    pub times: Vec<T>,
    pub mean_field: Vec<Complex<T>>,
    /// Field states at the check times.
    pub snapshots: Vec<(T, DensityState<T>)>,
    pub diagnostics: StateDiagnostics<T>,
}

impl<T: Real> OracleTrajectory<T> {
    pub fn final_state(&self) -> &DensityState<T> {
        &self.snapshots.last().expect("trajectory has snapshots").1
    }
}

fn check_every<T: Real>(interval: T, dt: T) -> usize {
    (interval / dt).round().to_usize().unwrap_or(1).max(1)
}

/// Field-only evolution of the branch with qubits fixed in `label`.
///
/// Qubit dephasing commutes with the branch and drops out; qubit
/// relaxation mixes branches and is rejected.
pub fn evolve_dispersive_branch<T: Real>(
    params: &SystemParams<T>,
    derived: &DerivedParams<T>,
    label: ParityLabel,
    fock: &FockConfig<T>,
) -> Result<OracleTrajectory<T>> {
    fock.check()?;
    params.validate()?;
    if fock.include_qubits {
        return Err(Error::InvalidArgument("the dispersive branch is field-only; use evolve_full_rabi".into()));
    }
    if params.gamma_1 > T::zero() && !fock.closed_system {
        return Err(Error::InvalidArgument("qubit relaxation couples the branches; set gamma_1 = 0".into()));
    }
    let n = fock.cutoff;
    let a = SparseMatrix::<T>::annihilation(n);
    let ad = a.adjoint();
    let num = ad.mul(&a);
    let a2 = a.mul(&a);
    let ad2 = ad.mul(&ad);
    let chi = chi_for_label(derived, label, false);
    let eps = params.epsilon_m;
    let w = params.omega_m;
    let half_chi = re(chi * T::lit(0.5));
    let two = T::lit(2.0);
    let terms = vec![
        (Coefficient::constant(re(derived.delta_r + chi)), num),
        (Coefficient { amp: half_chi, freq: -two * w }, a2),
        (Coefficient { amp: half_chi, freq: two * w }, ad2),
        (Coefficient::constant(re(eps)), a.clone()),
        (Coefficient::constant(re(eps)), ad),
    ];
    let kappa = if fock.closed_system { T::zero() } else { params.kappa };
    let mut gen = Generator::new(n + 1, terms, vec![(kappa, a.clone())]);

    let t_end = fock.t_end / params.kappa;
    let bound = (derived.delta_r.abs() + chi.abs() * T::lit(2.0)) * T::from_count(n + 1)
        + two * eps.abs() * T::from_count(n + 1).sqrt()
        + params.kappa * T::from_count(n);
    let dt = fock.dt.unwrap_or_else(|| {
        let mut dt = T::PI() / w.abs() / T::lit(STEPS_PER_PERIOD);
        dt = dt.min(T::lit(0.5) / bound).min(T::lit(0.01) / params.kappa);
        dt
    });
    let spec = RunSpec {
        t_end,
        dt,
        check_every: check_every(fock.check_interval / params.kappa, dt),
        field_dim: n + 1,
        leak_tol: fock.leak_tol,
        cutoff: n,
    };
    let mut vac = vec![zero(); n + 1];
    vac[0] = one();
    let mut rho = DensityState::pure(&vac);
    let mut times = Vec::new();
    let mut mean_field = Vec::new();
    let mut snapshots = Vec::new();
    let diagnostics = propagate(&mut gen, &mut rho, &spec, |t, r, is_check| {
        times.push(t);
        mean_field.push(r.expect(&a));
        if is_check {
            snapshots.push((t, r.clone()));
        }
    })?;
    Ok(OracleTrajectory { label, kind: OracleKind::Dispersive, times, mean_field, snapshots, diagnostics })
}

/// Branch-resolved output of the two-qubit run.
#[derive(Debug, Clone)]
pub struct RabiTrajectory<T> {
    pub times: Vec<T>,
    /// `Tr[(P_xy x a) rho] / Tr[P_xy rho]` in the order gg, ge, eg, ee.
    pub branch_fields: Vec<[Complex<T>; 4]>,
    pub branch_populations: Vec<[T; 4]>,
    /// `<(-1)^(n + number of excited qubits)>`.
    pub parity: Vec<T>,
    pub final_state: DensityState<T>,
    pub diagnostics: StateDiagnostics<T>,
    pub kappa: T,
}

/// Default for [`FockConfig::drop_tol`].
pub const DRESSING_DROP_TOL: f64 = 1e-5;

fn to_dense(m: &SparseMatrix<f64>) -> DMatrix<Complex<f64>> {
    let mut d = DMatrix::zeros(m.dim, m.dim);
    for &(i, j, v) in &m.entries {
        d[(i, j)] += v;
    }
    d
}

fn add(a: &SparseMatrix<f64>, b: &SparseMatrix<f64>) -> SparseMatrix<f64> {
    let mut entries = a.entries.clone();
    entries.extend_from_slice(&b.entries);
    let mut dense = vec![Complex::new(0.0, 0.0); a.dim * a.dim];
    for (i, j, v) in entries {
        dense[i * a.dim + j] += v;
    }
    SparseMatrix::from_dense(a.dim, &dense)
}

/// Generator of the dispersive transformation `U = exp(S)` with
/// `S = sum_j (g/dp)(a s+_j - a' s-_j) + (g/sigma)(a s-_j - a' s+_j)`,
/// `dp = omega_r - omega_a`. `U' H U` is free of single-photon exchange to
/// first order in `g/dp` and `g/sigma`.
pub fn dressing_generator(params: &SystemParams<f64>, cutoff: usize) -> DMatrix<Complex<f64>> {
    let fd = cutoff + 1;
    let a = SparseMatrix::<f64>::identity(4).kron(&SparseMatrix::annihilation(cutoff));
    let ad = a.adjoint();
    let id_f = SparseMatrix::<f64>::identity(fd);
    let dp = params.omega_r - params.omega_a;
    let sigma = params.omega_r + params.omega_a;
    let mut s = DMatrix::zeros(4 * fd, 4 * fd);
    for j in 0..2 {
        let sp = qubit_raising::<f64>(j).kron(&id_f);
        let sm = sp.adjoint();
        let x = to_dense(&a.mul(&sp)) - to_dense(&ad.mul(&sm));
        let y = to_dense(&a.mul(&sm)) - to_dense(&ad.mul(&sp));
        s += x * Complex::new(params.g / dp, 0.0) + y * Complex::new(params.g / sigma, 0.0);
    }
    s
}

/// Two-qubit Rabi model with drive, `dim = 4 (N + 1)`.
///
/// With [`DissipatorFrame::Dressed`] the state is represented in the basis
/// rotated by `U = exp(S)` (see [`dressing_generator`]), computed exactly on
/// the truncated space. Dissipators act on that basis, the initial state is
/// `|+>|+>|0>` there, and the branch projections are dressed ones. With
/// [`DissipatorFrame::Lab`] everything refers to the bare operators.
///
/// The dynamics is solved in the frame rotating with
/// `omega_m a'a + (omega_a/2)(sz_1 + sz_2)`; every entry of the transformed
/// Hamiltonian carries its own phase `e^{i (dn omega_m + dexc omega_a) t}`.
pub fn evolve_full_rabi<T: Real>(params: &SystemParams<T>, fock: &FockConfig<T>) -> Result<RabiTrajectory<T>> {
    fock.check()?;
    params.validate()?;
    if !fock.include_qubits {
        return Err(Error::InvalidArgument("full Rabi evolution needs include_qubits".into()));
    }
    let n = fock.cutoff;
    if n < MIN_RABI_CUTOFF {
        return Err(Error::InvalidArgument(format!(
            "full Rabi evolution needs a cutoff of at least {MIN_RABI_CUTOFF}, got {n}"
        )));
    }
    let fd = n + 1;
    let dim = 4 * fd;
    if dim > MAX_DIMENSION && !fock.allow_large_dimension {
        return Err(Error::DimensionGuard { dim, limit: MAX_DIMENSION });
    }

    let p64 = SystemParams {
        omega_r: params.omega_r.as_f64(),
        omega_a: params.omega_a.as_f64(),
        g: params.g.as_f64(),
        kappa: params.kappa.as_f64(),
        epsilon_m: params.epsilon_m.as_f64(),
        omega_m: params.omega_m.as_f64(),
        gamma_1: params.gamma_1.as_f64(),
        gamma_phi: params.gamma_phi.as_f64(),
    };
    let id_f = SparseMatrix::<f64>::identity(fd);
    let a64 = SparseMatrix::<f64>::identity(4).kron(&SparseMatrix::annihilation(n));
    let ad64 = a64.adjoint();
    let mut h_lab = a64.adjoint().mul(&a64).scale(Complex::new(p64.omega_r, 0.0));
    let field_x = add(&a64, &ad64);
    for j in 0..2 {
        let sp = qubit_raising::<f64>(j).kron(&id_f);
        let sx = add(&sp, &sp.adjoint());
        h_lab = add(&h_lab, &qubit_sigma_z::<f64>(j).kron(&id_f).scale(Complex::new(p64.omega_a * 0.5, 0.0)));
        h_lab = add(&h_lab, &sx.mul(&field_x).scale(Complex::new(p64.g, 0.0)));
    }
    let (h_sim, a_sim) = match fock.frame {
        DissipatorFrame::Lab => (to_dense(&h_lab), to_dense(&a64)),
        DissipatorFrame::Dressed => {
            let u = dressing_generator(&p64, n).exp();
            let ud = u.adjoint();
            (&ud * to_dense(&h_lab) * &u, &ud * to_dense(&a64) * &u)
        }
    };

    // group entries by their phase in the rotating frame
    let photons = |i: usize| (i % fd) as i64;
    let excitations = |i: usize| {
        let q = i / fd;
        ((q >> 1) + (q & 1)) as i64
    };
    let e0 = |i: usize| {
        p64.omega_m * photons(i) as f64 + p64.omega_a * 0.5 * (2 * excitations(i) - 2) as f64
    };
    let drop = fock.drop_tol.as_f64() * p64.kappa;
    let mut groups: std::collections::BTreeMap<(i64, i64), Vec<(usize, usize, Complex<f64>)>> =
        std::collections::BTreeMap::new();
    for i in 0..dim {
        for j in 0..dim {
            let key = (photons(i) - photons(j), excitations(i) - excitations(j));
            let mut h = h_sim[(i, j)];
            if i == j {
                h -= e0(i);
            }
            let mirror = h_sim[(j, i)].norm();
            if (h.norm() + mirror) * 0.5 > drop || (i == j && h.norm() > drop) {
                groups.entry(key).or_default().push((i, j, h));
            }
            // eps (a e^{i wm t} + a' e^{-i wm t}) in the simulation basis
            let drive = a_sim[(i, j)] * p64.epsilon_m;
            if drive.norm() > drop {
                groups.entry((key.0 + 1, key.1)).or_default().push((i, j, drive));
            }
            let drive_dag = a_sim[(j, i)].conj() * p64.epsilon_m;
            if drive_dag.norm() > drop {
                groups.entry((key.0 - 1, key.1)).or_default().push((i, j, drive_dag));
            }
        }
    }
    // Step size: a term h e^{i nu t} leaves a local RK4 error of order
    // |h| (nu dt)^4; every group is held to the error of the largest
    // oscillating group at STEPS_PER_PERIOD steps per period.
    let mut terms = Vec::with_capacity(groups.len());
    let mut row_sums = vec![0.0_f64; dim];
    let mut oscillating = Vec::new();
    for ((dn, dexc), entries) in groups {
        let freq = dn as f64 * p64.omega_m + dexc as f64 * p64.omega_a;
        let peak = entries.iter().fold(0.0_f64, |m, e| m.max(e.2.norm()));
        if freq != 0.0 {
            oscillating.push((freq.abs(), peak));
        }
        for &(i, _, v) in &entries {
            row_sums[i] += v.norm();
        }
        let op = SparseMatrix {
            dim,
            entries: entries.into_iter().map(|(i, j, v)| (i, j, Complex::new(T::lit(v.re), T::lit(v.im)))).collect(),
        };
        terms.push((Coefficient { amp: one(), freq: T::lit(freq) }, op));
    }
    let reference = oscillating.iter().fold(0.0_f64, |m, g| m.max(g.1));
    let phase_dt = oscillating
        .iter()
        .map(|&(nu, peak)| std::f64::consts::TAU / STEPS_PER_PERIOD / nu * (reference / peak).powf(0.25))
        .fold(f64::INFINITY, f64::min);

    let a = SparseMatrix::<T>::identity(4).kron(&SparseMatrix::annihilation(n));
    let mut jumps = Vec::new();
    if !fock.closed_system {
        jumps.push((params.kappa, a.clone()));
        let id_ft = SparseMatrix::<T>::identity(fd);
        for j in 0..2 {
            jumps.push((params.gamma_1, qubit_raising::<T>(j).kron(&id_ft).adjoint()));
            jumps.push((params.gamma_phi * T::lit(0.5), qubit_sigma_z::<T>(j).kron(&id_ft)));
        }
    }
    let mut gen = Generator::new(dim, terms, jumps);

    let t_end = fock.t_end / params.kappa;
    let bound = T::lit(row_sums.iter().cloned().fold(0.0, f64::max)) + params.kappa * T::from_count(fd);
    let dt = fock.dt.unwrap_or_else(|| {
        let dt = (T::lit(0.5) / bound).min(T::lit(0.01) / params.kappa);
        if phase_dt.is_finite() {
            dt.min(T::lit(phase_dt))
        } else {
            dt
        }
    });
    let spec = RunSpec {
        t_end,
        dt,
        check_every: check_every(fock.check_interval / params.kappa, dt),
        field_dim: fd,
        leak_tol: fock.leak_tol,
        cutoff: n,
    };

    let mut psi = vec![zero(); dim];
    match fock.initial_qubits {
        InitialQubits::PlusPlus => {
            for q in 0..4 {
                psi[q * fd] = re(T::lit(0.5));
            }
        }
        InitialQubits::Basis(l) => {
            let q = ParityLabel::ALL.iter().position(|&x| x == l).unwrap_or(0);
            psi[q * fd] = one();
        }
    }
    let mut rho = DensityState::pure(&psi);

    let mut times = Vec::new();
    let mut branch_fields = Vec::new();
    let mut branch_populations = Vec::new();
    let mut parity = Vec::new();
    let diagnostics = propagate(&mut gen, &mut rho, &spec, |t, r, _| {
        let mut fields = [zero(); 4];
        let mut pops = [T::zero(); 4];
        let mut par = T::zero();
        for q in 0..4 {
            let excited = (q >> 1) + (q & 1);
            let mut f: Complex<T> = zero();
            for m in 0..fd {
                let i = q * fd + m;
                let p = r.get(i, i).re;
                pops[q] += p;
                par += if (m + excited) % 2 == 0 { p } else { -p };
                if m + 1 < fd {
                    f += r.get(i + 1, i) * T::from_count(m + 1).sqrt();
                }
            }
            fields[q] = if pops[q] > T::zero() { f / pops[q] } else { zero() };
        }
        times.push(t);
        branch_fields.push(fields);
        branch_populations.push(pops);
        parity.push(par);
    })?;
    Ok(RabiTrajectory {
        times,
        branch_fields,
        branch_populations,
        parity,
        final_state: rho,
        diagnostics,
        kappa: params.kappa,
    })
}

/// Even/odd quadrature separation `(Im a_ge + Im a_eg)/2 - Im a_ee`.
pub fn quadrature_separation<T: Real>(fields: &[Complex<T>; 4]) -> T {
    (fields[1].im + fields[2].im) * T::lit(0.5) - fields[3].im
}

/// Time-averaged branch fields over the last `window / kappa`.
pub fn rabi_branch_means<T: Real>(traj: &RabiTrajectory<T>, window: T) -> [Complex<T>; 4] {
    let t_end = *traj.times.last().expect("non-empty trajectory");
    let start = t_end - window / traj.kappa;
    let mut acc = [zero(); 4];
    let mut weight = T::zero();
    for k in 1..traj.times.len() {
        let (t0, t1) = (traj.times[k - 1], traj.times[k]);
        if t0 < start {
            continue;
        }
        let h = (t1 - t0) * T::lit(0.5);
        for (q, slot) in acc.iter_mut().enumerate() {
            *slot += (traj.branch_fields[k - 1][q] + traj.branch_fields[k][q]) * h;
        }
        weight += t1 - t0;
    }
    acc.map(|v| v / weight)
}

/// Deviation between an oracle trajectory and a pointer trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport<T> {
    pub label: ParityLabel,
    pub max_deviation: T,
    pub max_pointer_abs: T,
    /// `max_deviation / max_pointer_abs`, or the absolute deviation when the
    /// pointer stays at the origin.
    pub relative_deviation: T,
    pub min_coherent_fidelity: T,
    pub max_leak: T,
    pub min_purity: T,
    pub diagnostics: StateDiagnostics<T>,
}

/// Linear interpolation of the pointer at `t`.
fn interpolate<T: Real>(pointer: &PointerTrajectory<T>, t: T) -> Result<Complex<T>> {
    let times = &pointer.times;
    let (first, last) = match (times.first(), times.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::Alignment("empty pointer trajectory".into())),
    };
    let slack = T::lit(1e-9) * last.abs().max(T::one());
    if t < first - slack || t > last + slack {
        return Err(Error::Alignment(format!("time {t} outside pointer range [{first}, {last}]")));
    }
    let k = times.partition_point(|&s| s < t);
    if k < times.len() && (times[k] - t).abs() <= slack {
        return Ok(pointer.amplitudes[k]);
    }
    if k == 0 {
        return Ok(pointer.amplitudes[0]);
    }
    if k == times.len() {
        return Ok(pointer.amplitudes[k - 1]);
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (t - t0) / (t1 - t0);
    Ok(pointer.amplitudes[k - 1] * (T::one() - w) + pointer.amplitudes[k] * w)
}

pub fn compare_with_ansatz<T: Real>(
    oracle: &OracleTrajectory<T>,
    pointer: &PointerTrajectory<T>,
) -> Result<OracleReport<T>> {
    let mut max_dev = T::zero();
    let mut max_abs = T::zero();
    for (&t, &field) in oracle.times.iter().zip(&oracle.mean_field) {
        let alpha = interpolate(pointer, t)?;
        max_dev = max_dev.max((field - alpha).norm());
        max_abs = max_abs.max(alpha.norm());
    }
    let mut min_fid = T::one();
    for (t, rho) in &oracle.snapshots {
        let alpha = interpolate(pointer, *t)?;
        min_fid = min_fid.min(rho.coherent_fidelity(alpha));
    }
    let relative = if max_abs > T::zero() { max_dev / max_abs } else { max_dev };
    Ok(OracleReport {
        label: oracle.label,
        max_deviation: max_dev,
        max_pointer_abs: max_abs,
        relative_deviation: relative,
        min_coherent_fidelity: min_fid,
        max_leak: oracle.diagnostics.max_leak,
        min_purity: oracle.diagnostics.min_purity,
        diagnostics: oracle.diagnostics,
    })
}
