//! Adaptive Dormand-Prince 5(4) integration of `dy/dt = f(t, y)` for complex
//! state vectors.

use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-10, atol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// The 5th-order weights equal the last row of A (first same as last); E is
// those weights minus the embedded 4th-order ones.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates from `times[0]` and returns the state at every entry of
/// `times` (nondecreasing). The step is clipped so each output time is hit
/// exactly rather than interpolated.
pub fn integrate<F>(
    f: F,
    y0: &[C64],
    times: &[f64],
    tol: Tolerances,
) -> Result<(Vec<Vec<C64>>, StepStats)>
where
    F: Fn(f64, &[C64], &mut [C64]),
{
    let n = y0.len();
    let mut stats = StepStats::default();
    let mut out = Vec::with_capacity(times.len());
    if times.is_empty() {
        return Ok((out, stats));
    }
    if times.windows(2).any(|w| w[1].partial_cmp(&w[0]).is_none_or(|o| o.is_lt())) {
        return Err(Error::Domain("output times must be nondecreasing".into()));
    }

    let mut t = times[0];
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<C64>> = vec![vec![C64::from(0.0); n]; 7];
    f(t, &y, &mut k[0]);
    let mut h = initial_step(&y, &k[0], times[times.len() - 1] - t, tol);
    let mut stage = vec![C64::from(0.0); n];
    let mut y_new = vec![C64::from(0.0); n];
    out.push(y.clone());

    for &target in &times[1..] {
        while t < target {
            let last = h >= target - t;
            let step = if last { target - t } else { h };
            if step <= 1e-14 * t.abs().max(1.0) && !last {
                return Err(Error::StepUnderflow { t, h: step });
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = C64::from(0.0);
                    for (j, kj) in k.iter().enumerate().take(s) {
                        if A[s][j] != 0.0 {
                            acc += A[s][j] * kj[i];
                        }
                    }
                    stage[i] = y[i] + step * acc;
                }
                f(t + C[s] * step, &stage, &mut k[s]);
            }
            // stage now holds the 5th-order solution (FSAL row)
            y_new.copy_from_slice(&stage);
            let mut err = 0.0f64;
            for i in 0..n {
                let mut e = C64::from(0.0);
                for (j, kj) in k.iter().enumerate() {
                    if E[j] != 0.0 {
                        e += E[j] * kj[i];
                    }
                }
                let scale = tol.atol + tol.rtol * y[i].norm().max(y_new[i].norm());
                err = err.max((step * e).norm() / scale);
            }
            if !err.is_finite() {
                return Err(Error::StepUnderflow { t, h: step });
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                stats.accepted += 1;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h <= 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

fn initial_step(y: &[C64], dy: &[C64], span: f64, tol: Tolerances) -> f64 {
    let scale = |i: usize| tol.atol + tol.rtol * y[i].norm();
    let d0 = (0..y.len()).map(|i| y[i].norm() / scale(i)).fold(0.0, f64::max);
    let d1 = (0..y.len()).map(|i| dy[i].norm() / scale(i)).fold(0.0, f64::max);
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    if span > 0.0 {
        h.min(span)
    } else {
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_exponential() {
        let lam = C64::new(-0.3, 2.0);
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let (ys, stats) =
            integrate(|_, y, dy| dy[0] = lam * y[0], &[C64::from(1.0)], &times, Tolerances::default()).unwrap();
        for (t, y) in times.iter().zip(&ys) {
            let exact = (lam * t).exp();
            assert!((y[0] - exact).norm() < 1e-9, "t = {t}");
        }
        assert!(stats.accepted > 0);
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let times = [0.0, 10.0, 20.0];
        let (ys, _) = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &[C64::from(1.0), C64::from(0.0)],
            &times,
            Tolerances::default(),
        )
        .unwrap();
        assert!((ys[2][0].re - 20f64.cos()).abs() < 1e-8);
        assert!((ys[2][1].re + 20f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn repeated_and_initial_times() {
        let (ys, _) =
            integrate(|_, y, dy| dy[0] = -y[0], &[C64::from(2.0)], &[0.0, 0.0, 1.0, 1.0], Tolerances::default())
                .unwrap();
        assert_eq!(ys.len(), 4);
        assert_eq!(ys[0][0], ys[1][0]);
        assert_eq!(ys[2][0], ys[3][0]);
        assert!((ys[2][0].re - 2.0 * (-1f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn rejects_decreasing_times() {
        let r = integrate(|_, _, _| {}, &[C64::from(1.0)], &[1.0, 0.5], Tolerances::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn blow_up_reports_step_underflow() {
        // y' = y^2 with y(0) = 1 diverges at t = 1
        let r = integrate(|_, y, dy| dy[0] = y[0] * y[0], &[C64::from(1.0)], &[0.0, 2.0], Tolerances::default());
        assert!(matches!(r, Err(Error::StepUnderflow { .. })));
    }
}
