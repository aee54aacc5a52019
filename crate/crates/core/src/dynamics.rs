//! Time evolution: numerical integration of the pseudomode master equation,
//! the closed-form coherent-state amplitude `P(t)`, and the Born-Markov
//! reduction of the system dynamics.
//!
//! A system coherent state `|xi>` with the pseudomodes in vacuum stays a
//! product of coherent states. The system amplitude is `xi P(t)` with
//! `P(t) = [exp(t M)]_00` for the dynamical matrix `M`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bath::PseudomodeSpec;
use crate::liouvillian::{partial_trace_pseudomodes, top_level_population, LiouvillianOperator};
use crate::ode::{self, StepStats, Tolerances};
use crate::spectral::{build_dynamical_matrix, ExcitationIndex};
use crate::{linalg, Error, Result, C64};

/// Top-level Fock population above which a trajectory is flagged as leaking
/// out of the truncation.
pub const LEAKAGE_THRESHOLD: f64 = 1e-6;

/// Below this `|kappa t|` the resonant closed form switches to its Taylor
/// expansion around the exceptional point.
const EP_SERIES_THRESHOLD: f64 = 1e-3;

/// `n_max + 1` lowest Fock amplitudes of `|xi>`, renormalized after
/// truncation.
pub fn coherent_ket(xi: C64, cutoff: usize) -> Vec<C64> {
    let mut ket = Vec::with_capacity(cutoff);
    let mut amp = C64::from((-0.5 * xi.norm_sqr()).exp());
    for n in 0..cutoff {
        if n > 0 {
            amp = amp * xi / (n as f64).sqrt();
        }
        ket.push(amp);
    }
    let norm = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    ket.iter().map(|z| z / norm).collect()
}

/// `|xi><xi|` on `cutoff` Fock levels.
pub fn coherent_density(xi: C64, cutoff: usize) -> Array2<C64> {
    let ket = coherent_ket(xi, cutoff);
    Array2::from_shape_fn((cutoff, cutoff), |(i, j)| ket[i] * ket[j].conj())
}

/// Coherent amplitudes of the system (first) and each pseudomode.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentAmplitudeState {
    pub xi: f64,
    pub amplitudes: Vec<C64>,
}

impl CoherentAmplitudeState {
    pub fn initial(xi: f64, n_modes: usize) -> Self {
        let mut amplitudes = vec![C64::from(0.0); n_modes + 1];
        amplitudes[0] = C64::from(xi);
        CoherentAmplitudeState { xi, amplitudes }
    }

    pub fn system_amplitude(&self) -> C64 {
        self.amplitudes[0]
    }
}

#[derive(Debug, Clone)]
pub enum TrajectoryStates {
    /// Reduced system density matrices.
    Density(Vec<Array2<C64>>),
    /// Coherent amplitudes together with `P(t)`.
    Coherent { states: Vec<CoherentAmplitudeState>, p: Vec<C64> },
}

/// Per-trajectory numerical health figures (worst value over the grid).
#[derive(Debug, Clone, Copy, Default)]
pub struct Diagnostics {
    pub trace_drift: f64,
    pub hermiticity_error: f64,
    /// Largest `|Tr rho_s^2 - 1|`; meaningful for pure inputs only.
    pub purity_error: f64,
    pub leakage: f64,
    pub leakage_warning: bool,
    pub steps: StepStats,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: TrajectoryStates,
    pub distances: Option<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `P(t)` for coherent trajectories.
    pub fn p(&self) -> Option<&[C64]> {
        match &self.states {
            TrajectoryStates::Coherent { p, .. } => Some(p),
            TrajectoryStates::Density(_) => None,
        }
    }

    pub fn reduced_states(&self) -> Option<&[Array2<C64>]> {
        match &self.states {
            TrajectoryStates::Density(s) => Some(s),
            TrajectoryStates::Coherent { .. } => None,
        }
    }
}

/// `n` equally spaced times on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(t_max.is_finite() && t_max > 0.0) || n < 2 {
        return Err(Error::Domain(format!("time grid needs t_max > 0 and at least 2 points, got ({t_max}, {n})")));
    }
    Ok((0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect())
}

pub(crate) fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Domain("times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("times must be strictly increasing".into()));
    }
    Ok(())
}

/// Integrates `d rho / dt = L rho` from `rho0` at `times[0]` and records the
/// reduced system state at every grid time.
pub fn evolve_master_equation(
    l: &LiouvillianOperator,
    rho0: &Array2<C64>,
    times: &[f64],
    tol: Tolerances,
) -> Result<Trajectory> {
    check_grid(times)?;
    let m = l.dim();
    if rho0.dim() != (m, m) {
        return Err(Error::Shape { expected: format!("{m} x {m}"), got: format!("{:?}", rho0.dim()) });
    }
    let trunc = l.truncation();
    let y0 = crate::liouvillian::vectorize(rho0);
    let (ys, steps) = ode::integrate(|_, y, dy| l.matrix().matvec_into(y, dy), &y0, times, tol)?;

    let tr0 = linalg::trace(rho0);
    let mut diag = Diagnostics { steps, ..Diagnostics::default() };
    let mut reduced = Vec::with_capacity(ys.len());
    for y in &ys {
        let rho = crate::liouvillian::unvectorize(y, m);
        diag.trace_drift = diag.trace_drift.max((linalg::trace(&rho) - tr0).norm());
        diag.hermiticity_error = diag.hermiticity_error.max(linalg::hermiticity_error(&rho));
        diag.leakage = diag.leakage.max(top_level_population(&rho, trunc));
        let rs = partial_trace_pseudomodes(&rho, trunc)?;
        let purity = rs.iter().map(|z| z.norm_sqr()).sum::<f64>();
        diag.purity_error = diag.purity_error.max((purity - 1.0).abs());
        reduced.push(rs);
    }
    diag.leakage_warning = diag.leakage > LEAKAGE_THRESHOLD;
    Ok(Trajectory { times: times.to_vec(), states: TrajectoryStates::Density(reduced), distances: None, diagnostics: diag })
}

/// `P(t) = [exp(t M)]_00`, the system coherent amplitude per unit `xi`.
///
/// One resonant pseudomode uses
/// `P = exp(-i omega0 t - gamma t / 4) [cosh(kappa t) + gamma / (4 kappa) sinh(kappa t)]`
/// with `kappa = sqrt(gamma^2 / 16 - alpha^2)`, including its limit at
/// `kappa = 0`; other models use the matrix exponential.
pub fn analytic_p(spec: &PseudomodeSpec, t: f64) -> C64 {
    if spec.is_resonant_single() {
        let m = spec.modes()[0];
        resonant_p(spec.omega0(), m.alpha, m.gamma, t)
    } else {
        build_dynamical_matrix(spec).propagator(t)[[0, 0]]
    }
}

fn resonant_p(omega0: f64, alpha: f64, gamma: f64, t: f64) -> C64 {
    let phase = C64::new(0.0, -omega0 * t).exp();
    let q = gamma / 4.0;
    // (q - alpha)(q + alpha) keeps kappa accurate next to the EP
    let kappa = C64::from((q - alpha) * (q + alpha)).sqrt();
    let x = kappa * t;
    if x.norm() < EP_SERIES_THRESHOLD {
        let x2 = x * x;
        let cosh = 1.0 + x2 / 2.0 + x2 * x2 / 24.0;
        let sinhc = 1.0 + x2 / 6.0 + x2 * x2 / 120.0;
        return phase * (-q * t).exp() * (cosh + q * t * sinhc);
    }
    // exp((kappa - q) t) [(1 + e) / 2 + q (1 - e) / (2 kappa)] with e = exp(-2 kappa t),
    // written with expm1 so neither large t nor small kappa t loses digits
    let em = expm1(-2.0 * x);
    let lead = ((kappa - q) * t).exp();
    phase * lead * (1.0 + 0.5 * em - q * em / (2.0 * kappa))
}

fn expm1(z: C64) -> C64 {
    let (x, y) = (z.re, z.im);
    let s = (0.5 * y).sin();
    C64::new(x.exp_m1() * y.cos() - 2.0 * s * s, x.exp() * y.sin())
}

/// Closed-form coherent trajectory of either generator.
#[derive(Debug, Clone)]
pub enum AmplitudeModel {
    Pseudomode(PseudomodeSpec),
    Markovian(MarkovianReduction),
}

impl AmplitudeModel {
    pub fn p(&self, t: f64) -> C64 {
        match self {
            AmplitudeModel::Pseudomode(spec) => analytic_p(spec, t),
            AmplitudeModel::Markovian(red) => red.p(t),
        }
    }

    /// Slowest nonzero decay rate of the amplitude dynamics.
    pub fn gap(&self) -> Result<f64> {
        match self {
            AmplitudeModel::Pseudomode(spec) => crate::spectral::spectral_gap(&crate::spectral::model_roots(spec)?),
            AmplitudeModel::Markovian(red) => {
                if red.gamma_m > 0.0 {
                    Ok(red.gap())
                } else {
                    Err(Error::GapUndefined)
                }
            }
        }
    }
}

/// Coherent trajectory from closed forms. Pseudomode amplitudes come from
/// the propagator column; the Markovian model carries the system only.
pub fn coherent_trajectory(model: &AmplitudeModel, xi: f64, times: &[f64]) -> Result<Trajectory> {
    check_grid(times)?;
    let mut p = Vec::with_capacity(times.len());
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        let pt = model.p(t);
        let amplitudes = match model {
            AmplitudeModel::Pseudomode(spec) => {
                let col = build_dynamical_matrix(spec).propagator(t);
                let mut a: Vec<C64> = col.column(0).iter().map(|z| z * xi).collect();
                a[0] = pt * xi;
                a
            }
            AmplitudeModel::Markovian(_) => vec![pt * xi],
        };
        p.push(pt);
        states.push(CoherentAmplitudeState { xi, amplitudes });
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states: TrajectoryStates::Coherent { states, p },
        distances: None,
        diagnostics: Diagnostics::default(),
    })
}

/// Integrates `dv/dt = M v` from `v(0) = (xi, 0, ..., 0)`.
pub fn evolve_amplitudes(spec: &PseudomodeSpec, xi: f64, times: &[f64], tol: Tolerances) -> Result<Trajectory> {
    check_grid(times)?;
    let m = build_dynamical_matrix(spec);
    let n = m.dim();
    let v0 = CoherentAmplitudeState::initial(xi, spec.n_modes()).amplitudes;
    // integrate the unit-amplitude solution so P is available for xi = 0 too
    let mut e0 = vec![C64::from(0.0); n];
    e0[0] = C64::from(1.0);
    let mat = m.matrix();
    let (ys, steps) = ode::integrate(
        |_, y, dy| {
            for i in 0..n {
                dy[i] = (0..n).map(|j| mat[[i, j]] * y[j]).sum();
            }
        },
        &e0,
        times,
        tol,
    )?;
    let p = ys.iter().map(|y| y[0]).collect();
    let states = ys
        .into_iter()
        .map(|y| CoherentAmplitudeState { xi, amplitudes: y.into_iter().map(|z| z * v0[0]).collect() })
        .collect();
    Ok(Trajectory {
        times: times.to_vec(),
        states: TrajectoryStates::Coherent { states, p },
        distances: None,
        diagnostics: Diagnostics { steps, ..Diagnostics::default() },
    })
}

/// Convention for the weak-coupling rate of the reduced Lindblad equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkovRate {
    /// `gamma_M = sum 4 alpha_i^2 / gamma_i`, the `gamma -> infinity` limit of
    /// the pseudomode dynamics for `P_M = exp(-gamma_M t / 2)`.
    #[default]
    Lindblad,
    /// `gamma_M = sum 2 alpha_i^2 / gamma_i`, which decays at half the rate of
    /// that limit.
    Printed,
}

/// Born-Markov reduction: the system alone with damping `gamma_M` and an
/// optional Lamb-shifted frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovianReduction {
    pub gamma_m: f64,
    /// `sum 4 alpha_i^2 Omega_i / gamma_i^2`.
    pub lamb_shift: f64,
    pub omega0: f64,
    pub rate: MarkovRate,
    /// Adds `lamb_shift` to the oscillation frequency of `P_M`.
    pub include_lamb_shift: bool,
}

pub fn markovian_reduction(spec: &PseudomodeSpec, rate: MarkovRate) -> MarkovianReduction {
    let factor = match rate {
        MarkovRate::Lindblad => 4.0,
        MarkovRate::Printed => 2.0,
    };
    let gamma_m = spec.modes().iter().map(|m| factor * m.alpha * m.alpha / m.gamma).sum();
    let lamb_shift = spec.modes().iter().map(|m| 4.0 * m.alpha * m.alpha * m.omega / (m.gamma * m.gamma)).sum();
    MarkovianReduction { gamma_m, lamb_shift, omega0: spec.omega0(), rate, include_lamb_shift: false }
}

impl MarkovianReduction {
    pub fn frequency(&self) -> f64 {
        if self.include_lamb_shift {
            self.omega0 + self.lamb_shift
        } else {
            self.omega0
        }
    }

    /// `P_M(t) = exp(-gamma_M t / 2 - i omega t)`.
    pub fn p(&self, t: f64) -> C64 {
        C64::new(-0.5 * self.gamma_m * t, -self.frequency() * t).exp()
    }

    /// `Delta_M = gamma_M / 2`, independent of how the rate is split between
    /// couplings.
    pub fn gap(&self) -> f64 {
        0.5 * self.gamma_m
    }

    /// `-gamma_M (m1 + n1) / 2 - i omega (m0 - n0)` for the index
    /// `((m0, n0), (m1, n1))`.
    pub fn eigenvalue(&self, index: &ExcitationIndex) -> Result<C64> {
        let pairs = index.pairs();
        if pairs.len() != 2 {
            return Err(Error::Shape { expected: "index (m0 n0 m1 n1)".into(), got: format!("{index}") });
        }
        let (m0, n0) = pairs[0];
        let (m1, n1) = pairs[1];
        Ok(C64::new(-0.5 * self.gamma_m * (m1 + n1) as f64, -self.frequency() * (m0 as f64 - n0 as f64)))
    }
}

pub fn markovian_p(red: &MarkovianReduction, t: f64) -> C64 {
    red.p(t)
}

pub fn markovian_eigenvalues(red: &MarkovianReduction, index: &ExcitationIndex) -> Result<C64> {
    red.eigenvalue(index)
}
