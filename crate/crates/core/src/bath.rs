//! System-bath model: the exponential expansion of the bath correlation
//! function and the pseudomodes that realise it.
//!
//! A bath whose zero-temperature correlation function is a finite sum
//!
//! ```text
//! C(t) = sum_i alpha_i^2 exp(-i Omega_i t - gamma_i t / 2)
//! ```
//!
//! is replaced by `N` damped bosonic pseudomodes with frequency `Omega_i`,
//! decay rate `gamma_i` and coupling `alpha_i` to the system oscillator of
//! frequency `omega0`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// One exponential term of the correlation function, i.e. one pseudomode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// Coupling amplitude, real and nonnegative.
    pub alpha: f64,
    /// Pseudomode frequency.
    pub omega: f64,
    /// Pseudomode decay rate.
    pub gamma: f64,
}

impl Mode {
    pub fn new(alpha: f64, omega: f64, gamma: f64) -> Self {
        Mode { alpha, omega, gamma }
    }

    /// Pole of the mode's linear factor, `i Omega + gamma / 2`.
    pub(crate) fn pole(&self) -> C64 {
        C64::new(self.gamma / 2.0, self.omega)
    }
}

/// System frequency plus the ordered list of pseudomodes.
///
/// Construction validates `omega0 > 0`, `N >= 1`, `gamma_i > 0` and
/// `alpha_i >= 0`; the fields are private so a value of this type always
/// satisfies them.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudomodeSpec {
    omega0: f64,
    modes: Vec<Mode>,
}

impl PseudomodeSpec {
    pub fn new(omega0: f64, modes: Vec<Mode>) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::InvalidSpec(format!("omega0 must be positive, got {omega0}")));
        }
        if modes.is_empty() {
            return Err(Error::InvalidSpec("at least one pseudomode is required".into()));
        }
        for (i, m) in modes.iter().enumerate() {
            if !(m.gamma.is_finite() && m.gamma > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "mode {i}: gamma must be positive, got {}",
                    m.gamma
                )));
            }
            if !(m.alpha.is_finite() && m.alpha >= 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "mode {i}: alpha must be real and nonnegative, got {}",
                    m.alpha
                )));
            }
            if !m.omega.is_finite() {
                return Err(Error::InvalidSpec(format!("mode {i}: omega must be finite")));
            }
        }
        Ok(PseudomodeSpec { omega0, modes })
    }

    /// Single pseudomode resonant with the system (`Omega = omega0`).
    pub fn resonant(omega0: f64, alpha: f64, gamma: f64) -> Result<Self> {
        Self::new(omega0, vec![Mode::new(alpha, omega0, gamma)])
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// True for one pseudomode at exactly the system frequency.
    pub fn is_resonant_single(&self) -> bool {
        self.modes.len() == 1 && self.modes[0].omega == self.omega0
    }

    /// Copy with one field of one mode (or `omega0`) replaced, revalidated.
    pub fn with_parameter(&self, param: Parameter, mode: usize, value: f64) -> Result<Self> {
        let mut modes = self.modes.clone();
        let mut omega0 = self.omega0;
        if param != Parameter::Omega0 && mode >= modes.len() {
            return Err(Error::Domain(format!(
                "mode index {mode} out of range for {} modes",
                modes.len()
            )));
        }
        match param {
            Parameter::Alpha => modes[mode].alpha = value,
            Parameter::Gamma => modes[mode].gamma = value,
            Parameter::Omega => modes[mode].omega = value,
            Parameter::Omega0 => omega0 = value,
        }
        Self::new(omega0, modes)
    }
}

/// Scalar model parameter addressed by scans and sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Alpha,
    Gamma,
    Omega,
    Omega0,
}

/// Lorentzian spectral density
/// `J(w) = (1 / 2pi) Gamma Lambda^2 / ((w - omega0)^2 + Lambda^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianBath {
    /// Coupling strength `Gamma`.
    pub coupling: f64,
    /// Spectral width `Lambda`.
    pub width: f64,
    /// Centre frequency, equal to the system frequency.
    pub omega0: f64,
}

/// Maps a Lorentzian bath onto its single pseudomode.
///
/// `C(t) = (Gamma Lambda / 2) exp(-(Lambda + i omega0) t)` matches one
/// exponential term with `alpha^2 = Gamma Lambda / 2`, `Omega = omega0` and
/// `gamma = 2 Lambda`.
pub fn lorentzian_to_pseudomode(bath: &LorentzianBath) -> Result<PseudomodeSpec> {
    if !(bath.width.is_finite() && bath.width > 0.0) {
        return Err(Error::Domain(format!("spectral width must be positive, got {}", bath.width)));
    }
    if !(bath.coupling.is_finite() && bath.coupling >= 0.0) {
        return Err(Error::Domain(format!(
            "coupling strength must be nonnegative, got {}",
            bath.coupling
        )));
    }
    let alpha = (bath.coupling * bath.width / 2.0).sqrt();
    PseudomodeSpec::new(bath.omega0, vec![Mode::new(alpha, bath.omega0, 2.0 * bath.width)])
}

/// `C(t) = sum_i alpha_i^2 exp(-i Omega_i t - gamma_i t / 2)` for `t >= 0`.
pub fn correlation_function(spec: &PseudomodeSpec, t: f64) -> Result<C64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("correlation time must be nonnegative, got {t}")));
    }
    Ok(spec
        .modes
        .iter()
        .map(|m| m.alpha * m.alpha * (-m.pole() * t).exp())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lorentzian_fig3_working_point() {
        let spec = lorentzian_to_pseudomode(&LorentzianBath { coupling: 2.5, width: 5.0, omega0: 1.0 })
            .unwrap();
        let m = spec.modes()[0];
        assert_abs_diff_eq!(m.alpha, 2.5, epsilon = 1e-15);
        assert_eq!(m.omega, 1.0);
        assert_eq!(m.gamma, 10.0);
        assert!(spec.is_resonant_single());
    }

    #[test]
    fn lorentzian_decoupled_and_narrow() {
        let spec = lorentzian_to_pseudomode(&LorentzianBath { coupling: 0.0, width: 1.0, omega0: 1.0 })
            .unwrap();
        assert_eq!(spec.modes()[0], Mode::new(0.0, 1.0, 2.0));

        let spec = lorentzian_to_pseudomode(&LorentzianBath { coupling: 1.0, width: 0.05, omega0: 1.0 })
            .unwrap();
        assert_abs_diff_eq!(spec.modes()[0].alpha, 0.025f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(spec.modes()[0].alpha, 0.15811, epsilon = 1e-5);
        assert_abs_diff_eq!(spec.modes()[0].gamma, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn lorentzian_rejects_nonpositive_width() {
        for width in [0.0, -1.0] {
            let r = lorentzian_to_pseudomode(&LorentzianBath { coupling: 1.0, width, omega0: 1.0 });
            assert!(matches!(r, Err(Error::Domain(_))));
        }
    }

    #[test]
    fn lorentzian_correlation_matches_expansion() {
        let bath = LorentzianBath { coupling: 1.3, width: 0.7, omega0: 1.1 };
        let spec = lorentzian_to_pseudomode(&bath).unwrap();
        for k in 0..=100 {
            let t = k as f64 * 0.1 / bath.width;
            let direct =
                0.5 * bath.coupling * bath.width * (-C64::new(bath.width, bath.omega0) * t).exp();
            let c = correlation_function(&spec, t).unwrap();
            assert!((c - direct).norm() <= 1e-15 * (1.0 + direct.norm()), "t = {t}");
        }
    }

    #[test]
    fn correlation_examples() {
        let spec = PseudomodeSpec::resonant(1.0, 2.5, 10.0).unwrap();
        let c0 = correlation_function(&spec, 0.0).unwrap();
        assert_abs_diff_eq!(c0.re, 6.25, epsilon = 1e-15);
        assert_eq!(c0.im, 0.0);

        let spec = PseudomodeSpec::new(1.0, vec![Mode::new(1.0, 0.0, 2.0)]).unwrap();
        let c = correlation_function(&spec, 1.0).unwrap();
        assert_abs_diff_eq!(c.re, 0.367_879_441_171_442_3, epsilon = 1e-15);
        assert_abs_diff_eq!(c.im, 0.0, epsilon = 1e-15);

        let spec =
            PseudomodeSpec::new(1.0, vec![Mode::new(1.0, 1.0, 2.0), Mode::new(1.0, -1.0, 2.0)]).unwrap();
        for t in [0.0, 0.3, 1.7, 4.2] {
            let c = correlation_function(&spec, t).unwrap();
            assert_abs_diff_eq!(c.re, 2.0 * (-t).exp() * t.cos(), epsilon = 1e-14);
            assert_abs_diff_eq!(c.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn correlation_rejects_negative_time() {
        let spec = PseudomodeSpec::resonant(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(correlation_function(&spec, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(PseudomodeSpec::new(1.0, vec![]).is_err());
        assert!(PseudomodeSpec::new(0.0, vec![Mode::new(1.0, 1.0, 1.0)]).is_err());
        assert!(PseudomodeSpec::new(1.0, vec![Mode::new(-1.0, 1.0, 1.0)]).is_err());
        assert!(PseudomodeSpec::new(1.0, vec![Mode::new(1.0, 1.0, 0.0)]).is_err());
        assert!(PseudomodeSpec::new(1.0, vec![Mode::new(1.0, f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn with_parameter_revalidates() {
        let spec = PseudomodeSpec::resonant(1.0, 2.5, 10.0).unwrap();
        let s = spec.with_parameter(Parameter::Gamma, 0, 8.0).unwrap();
        assert_eq!(s.modes()[0].gamma, 8.0);
        assert!(spec.with_parameter(Parameter::Gamma, 0, -1.0).is_err());
        assert!(spec.with_parameter(Parameter::Alpha, 3, 1.0).is_err());
        assert_eq!(spec.with_parameter(Parameter::Omega0, 0, 2.0).unwrap().omega0(), 2.0);
    }
}
