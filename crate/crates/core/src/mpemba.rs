//! Distances to equilibrium, crossing detection between two relaxation
//! curves, and `(gamma, alpha)` sweeps of the spectral gap.
//!
//! A crossing counts as an Mpemba event only when the trajectory that starts
//! farther from equilibrium overtakes the closer one.

use std::cmp::Ordering;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{Parameter, PseudomodeSpec};
use crate::dynamics::{markovian_reduction, MarkovRate, Trajectory, TrajectoryStates};
use crate::spectral::{characteristic_polynomial, detect_lep, polynomial_roots, spectral_gap};
use crate::{linalg, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    /// `sqrt(1 - exp(-|beta|^2))` for a coherent state `|beta>` against the
    /// vacuum; needs coherent amplitudes.
    #[default]
    ClosedForm,
    /// `sqrt(Tr[A A^dagger]) / 2` with `A` the state difference.
    HilbertSchmidtHalf,
    /// Half the sum of singular values of the state difference.
    TraceNorm,
}

impl std::str::FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed-form" => Ok(DistanceKind::ClosedForm),
            "hilbert-schmidt-half" | "hs-half" => Ok(DistanceKind::HilbertSchmidtHalf),
            "trace-norm" => Ok(DistanceKind::TraceNorm),
            other => Err(Error::Domain(format!(
                "unknown distance '{other}' (expected closed-form, hilbert-schmidt-half or trace-norm)"
            ))),
        }
    }
}

impl std::fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DistanceKind::ClosedForm => "closed-form",
            DistanceKind::HilbertSchmidtHalf => "hilbert-schmidt-half",
            DistanceKind::TraceNorm => "trace-norm",
        })
    }
}

/// Matrix distance between `state` and `eq`.
pub fn distance_to_equilibrium(state: &Array2<C64>, eq: &Array2<C64>, kind: DistanceKind) -> Result<f64> {
    if state.dim() != eq.dim() {
        return Err(Error::Shape { expected: format!("{:?}", eq.dim()), got: format!("{:?}", state.dim()) });
    }
    let diff = state - eq;
    match kind {
        DistanceKind::ClosedForm => {
            Err(Error::Incomparable("the closed-form distance needs a coherent amplitude, not a matrix".into()))
        }
        DistanceKind::HilbertSchmidtHalf => Ok(0.5 * linalg::frobenius(&diff)),
        DistanceKind::TraceNorm => {
            let herm = (&diff + &linalg::dagger(&diff)) / C64::from(2.0);
            Ok(0.5 * linalg::hermitian_eigenvalues(&herm)?.iter().map(|x| x.abs()).sum::<f64>())
        }
    }
}

/// `sqrt(1 - exp(-amp_sq))`, accurate for small `amp_sq`.
pub fn closed_form_distance(amp_sq: f64) -> f64 {
    (-(-amp_sq).exp_m1()).sqrt()
}

/// Closed-form distance of the Markovian coherent solution,
/// `sqrt(1 - exp(-xi^2 exp(-gamma_M t)))`.
pub fn markovian_distance(xi: f64, gamma_m: f64, t: f64) -> f64 {
    closed_form_distance(xi * xi * (-gamma_m * t).exp())
}

/// Distance to the vacuum at every grid time.
///
/// Coherent trajectories use the coherent-state expressions (the
/// Hilbert-Schmidt variant is the closed form divided by `sqrt 2`, the
/// trace norm equals the closed form). Density trajectories need a matrix
/// distance.
pub fn trajectory_distances(traj: &Trajectory, kind: DistanceKind) -> Result<Vec<f64>> {
    match &traj.states {
        TrajectoryStates::Coherent { states, .. } => Ok(states
            .iter()
            .map(|s| {
                let d = closed_form_distance(s.system_amplitude().norm_sqr());
                match kind {
                    DistanceKind::HilbertSchmidtHalf => d / 2f64.sqrt(),
                    DistanceKind::ClosedForm | DistanceKind::TraceNorm => d,
                }
            })
            .collect()),
        TrajectoryStates::Density(states) => {
            let n = states.first().map_or(0, |s| s.nrows());
            let mut eq = Array2::zeros((n, n));
            if n > 0 {
                eq[[0, 0]] = C64::from(1.0);
            }
            states.iter().map(|s| distance_to_equilibrium(s, &eq, kind)).collect()
        }
    }
}

/// Fills `traj.distances`.
pub fn attach_distances(traj: &mut Trajectory, kind: DistanceKind) -> Result<()> {
    traj.distances = Some(trajectory_distances(traj, kind)?);
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingReport {
    pub crossed: bool,
    /// First time at which trajectory 1 drops below trajectory 2.
    pub t_cross: Option<f64>,
    /// Grid interval containing the crossing.
    pub bracket: Option<(f64, f64)>,
    /// `D1(0)` compared with `D2(0)`.
    pub ordering_at_zero: Ordering,
}

/// Finds the first time `D1` falls below `D2`.
///
/// Only a strict overtaking by a trajectory that starts farther away counts:
/// `D1(0) > D2(0)`, a sample with `D1 < D2`, and `D1 <= D2` on the last
/// sample. Touching without changing sign is not a crossing. The crossing is
/// refined by bisection on log-linear interpolants to 1e-3 of the local grid
/// step.
pub fn detect_crossing(traj1: &Trajectory, traj2: &Trajectory) -> Result<CrossingReport> {
    if traj1.times != traj2.times {
        return Err(Error::Incomparable("trajectories must share the same time grid".into()));
    }
    let (Some(d1), Some(d2)) = (&traj1.distances, &traj2.distances) else {
        return Err(Error::Incomparable("both trajectories need distances".into()));
    };
    let times = &traj1.times;
    if d1.len() != times.len() || d2.len() != times.len() || times.is_empty() {
        return Err(Error::Incomparable("distance series do not match the time grid".into()));
    }
    let ordering_at_zero = d1[0].partial_cmp(&d2[0]).unwrap_or(Ordering::Equal);
    let none = CrossingReport { crossed: false, t_cross: None, bracket: None, ordering_at_zero };
    if ordering_at_zero != Ordering::Greater {
        return Ok(none);
    }
    let Some(k) = (1..times.len()).find(|&k| d1[k] < d2[k]) else {
        return Ok(none);
    };
    let last = times.len() - 1;
    if d1[last] > d2[last] {
        return Ok(none);
    }

    let (t0, t1) = (times[k - 1], times[k]);
    let interp = |d: &[f64], s: f64| -> f64 {
        if d[k - 1] > 0.0 && d[k] > 0.0 {
            ((1.0 - s) * d[k - 1].ln() + s * d[k].ln()).exp()
        } else {
            (1.0 - s) * d[k - 1] + s * d[k]
        }
    };
    // diff >= 0 at s = 0 and < 0 at s = 1
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if interp(d1, mid) - interp(d2, mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_cross = t0 + 0.5 * (lo + hi) * (t1 - t0);
    Ok(CrossingReport { crossed: true, t_cross: Some(t_cross), bracket: Some((t0, t1)), ordering_at_zero })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub alpha: f64,
    pub delta: f64,
    pub delta_m: f64,
    pub is_lep: bool,
}

/// Spectral gap, Markovian gap and LEP flag over the `(gamma, alpha)` grid of
/// mode `mode` of `base`. Rows are gamma-major in the order given.
pub fn gap_sweep(
    base: &PseudomodeSpec,
    mode: usize,
    gammas: &[f64],
    alphas: &[f64],
    rate: MarkovRate,
    lep_tol: f64,
) -> Result<Vec<SweepRow>> {
    let points: Vec<(f64, f64)> = gammas.iter().flat_map(|&g| alphas.iter().map(move |&a| (g, a))).collect();
    points
        .par_iter()
        .map(|&(gamma, alpha)| {
            let spec =
                base.with_parameter(Parameter::Gamma, mode, gamma)?.with_parameter(Parameter::Alpha, mode, alpha)?;
            let q = characteristic_polynomial(&spec);
            let roots = polynomial_roots(&q)?;
            let delta = spectral_gap(&roots)?;
            let is_lep = detect_lep(&q, &roots, lep_tol).is_lep;
            let delta_m = markovian_reduction(&spec, rate).gap();
            Ok(SweepRow { gamma, alpha, delta, delta_m, is_lep })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{coherent_density, coherent_trajectory, uniform_grid, AmplitudeModel, Diagnostics};
    use crate::spectral::DEFAULT_LEP_TOL;
    use approx::assert_abs_diff_eq;

    fn series(times: Vec<f64>, d: Vec<f64>) -> Trajectory {
        Trajectory {
            times,
            states: TrajectoryStates::Density(vec![]),
            distances: Some(d),
            diagnostics: Diagnostics::default(),
        }
    }

    #[test]
    fn closed_form_values() {
        assert_abs_diff_eq!(closed_form_distance(4.0), 0.990_799_859_260_822_57, epsilon = 1e-15);
        assert_abs_diff_eq!(closed_form_distance(1.0), 0.795_060_097_620_650_11, epsilon = 1e-15);
        assert_eq!(closed_form_distance(0.0), 0.0);
        // no cancellation for tiny amplitudes
        assert_abs_diff_eq!(closed_form_distance(1e-30), 1e-15, epsilon = 1e-28);
    }

    #[test]
    fn markovian_distance_values() {
        assert_abs_diff_eq!(markovian_distance(1.0, 1.25, 0.0), 0.795_060_097_620_650_11, epsilon = 1e-15);
        assert_abs_diff_eq!(markovian_distance(1.0, 1.25, 2.0), 0.280_724_677_975_564_13, epsilon = 1e-15);
        assert!(markovian_distance(1.0, 1.25, 100.0) < 1e-26);
    }

    #[test]
    fn matrix_distances() {
        let a = coherent_density(C64::from(2.0), 40);
        assert_eq!(distance_to_equilibrium(&a, &a, DistanceKind::HilbertSchmidtHalf).unwrap(), 0.0);
        assert!(distance_to_equilibrium(&a, &a, DistanceKind::TraceNorm).unwrap() < 1e-14);
        let vac = coherent_density(C64::from(0.0), 40);
        let hs = distance_to_equilibrium(&a, &vac, DistanceKind::HilbertSchmidtHalf).unwrap();
        assert_abs_diff_eq!(hs, 0.700_601_299_282_004_55, epsilon = 1e-14);
        let tn = distance_to_equilibrium(&a, &vac, DistanceKind::TraceNorm).unwrap();
        assert_abs_diff_eq!(tn, closed_form_distance(4.0), epsilon = 1e-13);
        assert!(distance_to_equilibrium(&a, &vac, DistanceKind::ClosedForm).is_err());
        assert!(distance_to_equilibrium(&a, &Array2::zeros((2, 2)), DistanceKind::TraceNorm).is_err());
    }

    #[test]
    fn coherent_distance_kinds_agree_with_matrices() {
        let spec = PseudomodeSpec::resonant(1.0, 2.4, 10.0).unwrap();
        let times = uniform_grid(1.0, 5).unwrap();
        let traj = coherent_trajectory(&AmplitudeModel::Pseudomode(spec), 2.0, &times).unwrap();
        let hs = trajectory_distances(&traj, DistanceKind::HilbertSchmidtHalf).unwrap();
        let cf = trajectory_distances(&traj, DistanceKind::ClosedForm).unwrap();
        let vac = coherent_density(C64::from(0.0), 40);
        for (k, s) in traj.p().unwrap().iter().enumerate() {
            let rho = coherent_density(2.0 * s, 40);
            let m = distance_to_equilibrium(&rho, &vac, DistanceKind::HilbertSchmidtHalf).unwrap();
            assert_abs_diff_eq!(hs[k], m, epsilon = 1e-13);
            assert_abs_diff_eq!(cf[k], hs[k] * 2f64.sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn identical_trajectories_do_not_cross() {
        let t = series(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.2]);
        let r = detect_crossing(&t, &t).unwrap();
        assert!(!r.crossed);
        assert_eq!(r.ordering_at_zero, Ordering::Equal);
    }

    #[test]
    fn log_linear_refinement() {
        // two exponentials crossing at t = ln 2 / 0.5
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let d1: Vec<f64> = times.iter().map(|t| 2.0 * (-1.0 * t).exp()).collect();
        let d2: Vec<f64> = times.iter().map(|t| (-0.5 * t).exp()).collect();
        let r = detect_crossing(&series(times.clone(), d1.clone()), &series(times.clone(), d2.clone())).unwrap();
        assert!(r.crossed);
        assert_eq!(r.ordering_at_zero, Ordering::Greater);
        assert_abs_diff_eq!(r.t_cross.unwrap(), 2f64.ln() / 0.5, epsilon = 0.5e-3);
        assert_eq!(r.bracket, Some((1.0, 1.5)));
        // swapped roles: the closer state starts below, so no Mpemba event
        let r = detect_crossing(&series(times.clone(), d2), &series(times, d1)).unwrap();
        assert!(!r.crossed);
        assert_eq!(r.ordering_at_zero, Ordering::Less);
    }

    #[test]
    fn touching_and_recrossing_are_rejected() {
        let times = vec![0.0, 1.0, 2.0, 3.0];
        let touch = detect_crossing(&series(times.clone(), vec![2.0, 1.0, 0.5, 0.3]), &series(times.clone(), vec![1.0, 1.0, 0.4, 0.2]))
            .unwrap();
        assert!(!touch.crossed);
        let back = detect_crossing(&series(times.clone(), vec![2.0, 0.5, 0.5, 0.3]), &series(times, vec![1.0, 0.8, 0.4, 0.2]))
            .unwrap();
        assert!(!back.crossed);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = series(vec![0.0, 1.0], vec![1.0, 0.5]);
        let b = series(vec![0.0, 2.0], vec![1.0, 0.5]);
        assert!(matches!(detect_crossing(&a, &b), Err(Error::Incomparable(_))));
        let mut c = a.clone();
        c.distances = None;
        assert!(detect_crossing(&a, &c).is_err());
    }

    #[test]
    fn exceptional_point_overtakes() {
        let times = uniform_grid(5.0, 501).unwrap();
        let lep = PseudomodeSpec::resonant(1.0, 2.5, 10.0).unwrap();
        let near = PseudomodeSpec::resonant(1.0, 2.4, 10.0).unwrap();
        let mut t1 = coherent_trajectory(&AmplitudeModel::Pseudomode(lep), 2.0, &times).unwrap();
        let mut t2 = coherent_trajectory(&AmplitudeModel::Pseudomode(near.clone()), 1.0, &times).unwrap();
        attach_distances(&mut t1, DistanceKind::ClosedForm).unwrap();
        attach_distances(&mut t2, DistanceKind::ClosedForm).unwrap();
        let r = detect_crossing(&t1, &t2).unwrap();
        assert!(r.crossed);
        assert_abs_diff_eq!(r.t_cross.unwrap(), 2.792_887_712_824_85, epsilon = 1e-3);

        let mut t3 = coherent_trajectory(&AmplitudeModel::Pseudomode(near), 2.0, &times).unwrap();
        attach_distances(&mut t3, DistanceKind::ClosedForm).unwrap();
        assert!(!detect_crossing(&t3, &t2).unwrap().crossed);
    }

    #[test]
    fn sweep_rows() {
        let base = PseudomodeSpec::resonant(1.0, 1.0, 1.0).unwrap();
        let rows = gap_sweep(&base, 0, &[2.0, 6.0, 10.0], &[0.0, 1.0, 2.5], MarkovRate::Lindblad, DEFAULT_LEP_TOL)
            .unwrap();
        assert_eq!(rows.len(), 9);
        let find = |g: f64, a: f64| rows.iter().find(|r| r.gamma == g && r.alpha == a).unwrap();
        let lep = find(10.0, 2.5);
        assert!(lep.is_lep);
        assert_abs_diff_eq!(lep.delta, 2.5, epsilon = 1e-6);
        let r = find(6.0, 1.0);
        assert!(!r.is_lep);
        assert_abs_diff_eq!(r.delta, 0.381_966_011_250_105_15, epsilon = 1e-12);
        let r = find(2.0, 1.0);
        assert_abs_diff_eq!(r.delta, 0.5, epsilon = 1e-12);
        for g in [2.0, 6.0, 10.0] {
            let r = find(g, 0.0);
            assert_abs_diff_eq!(r.delta, g / 2.0, epsilon = 1e-12);
            assert!(!r.is_lep);
            assert_eq!(r.delta_m, 0.0);
        }
        // gamma-major order
        assert_eq!((rows[1].gamma, rows[1].alpha), (2.0, 1.0));
        assert_eq!((rows[3].gamma, rows[3].alpha), (6.0, 0.0));
    }

    #[test]
    fn markovian_gap_constant_on_rate_contours() {
        let base = PseudomodeSpec::resonant(1.0, 1.0, 1.0).unwrap();
        let a = gap_sweep(&base, 0, &[4.0], &[1.0], MarkovRate::Lindblad, DEFAULT_LEP_TOL).unwrap();
        let b = gap_sweep(&base, 0, &[16.0], &[2.0], MarkovRate::Lindblad, DEFAULT_LEP_TOL).unwrap();
        assert_eq!(a[0].delta_m, b[0].delta_m);
    }

    #[test]
    fn distance_kind_parsing() {
        for k in [DistanceKind::ClosedForm, DistanceKind::HilbertSchmidtHalf, DistanceKind::TraceNorm] {
            assert_eq!(k.to_string().parse::<DistanceKind>().unwrap(), k);
        }
        assert!("euclid".parse::<DistanceKind>().is_err());
    }
}
