//! TOML run configuration.
//!
//! ```toml
//! [model]                      # either omega0 + modes, or lorentzian
//! omega0 = 1.0
//! modes = [{ alpha = 2.5, omega = 1.0, gamma = 10.0 }]
//! # lorentzian = { coupling = 2.5, width = 5.0, omega0 = 1.0 }
//!
//! [truncation]                 # master-equation runs only
//! n_sys = 12
//! n_modes = [12]
//!
//! [time]
//! t_max = 5.0
//! n_points = 200
//!
//! [evolution]
//! xi = [1.0]
//! method = "closed-form"       # closed-form | amplitudes | master-equation
//! distance = "closed-form"     # closed-form | hilbert-schmidt-half | trace-norm
//! rtol = 1e-10
//! atol = 1e-12
//!
//! [markovian]
//! enabled = false
//! rate = "lindblad"            # lindblad | printed
//! lamb_shift = false
//!
//! [spectrum]
//! max_ket = 2
//! max_bra = 2
//! slice = { parameter = "alpha", mode = 0, lo = 0.05, hi = 0.5, n = 10 }
//!
//! [lep]
//! parameter = "gamma"
//! mode = 0
//! lo = 8.0
//! hi = 12.0
//! tol = 1e-10
//!
//! [sweep]
//! mode = 0
//! gamma = { lo = 1.0, hi = 20.0, n = 20 }
//! alpha = { values = [0.5, 1.0, 2.5] }
//!
//! [[mpemba.runs]]              # exactly two; alpha/gamma/omega override `mode`
//! xi = 2.0
//! alpha = 2.5
//! [[mpemba.runs]]
//! xi = 1.0
//! alpha = 2.4
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bath::{lorentzian_to_pseudomode, LorentzianBath, Mode, Parameter, PseudomodeSpec};
use crate::dynamics::MarkovRate;
use crate::liouvillian::TruncationSpec;
use crate::mpemba::DistanceKind;
use crate::ode::Tolerances;
use crate::spectral::DEFAULT_LEP_TOL;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeConfig>,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub markovian: MarkovianConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lep: Option<LepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mpemba: Option<MpembaConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<Mode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lorentzian: Option<LorentzianBath>,
}

impl ModelConfig {
    pub fn spec(&self) -> Result<PseudomodeSpec> {
        match (&self.lorentzian, self.omega0, &self.modes) {
            (Some(bath), None, None) => lorentzian_to_pseudomode(bath),
            (None, Some(omega0), Some(modes)) => PseudomodeSpec::new(omega0, modes.clone()),
            _ => Err(Error::InvalidSpec(
                "[model] needs either `lorentzian` or both `omega0` and `modes`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub n_sys: usize,
    pub n_modes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dim: Option<usize>,
}

impl TruncationConfig {
    pub fn spec(&self) -> Result<TruncationSpec> {
        match self.max_dim {
            Some(limit) => TruncationSpec::with_limit(self.n_sys, self.n_modes.clone(), limit),
            None => TruncationSpec::new(self.n_sys, self.n_modes.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_max: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Closed-form `P(t)`.
    #[default]
    ClosedForm,
    /// Numerical integration of the `(N+1)`-dimensional amplitude equation.
    Amplitudes,
    /// Numerical integration of the truncated master equation.
    MasterEquation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    #[serde(default)]
    pub xi: Vec<f64>,
    #[serde(default)]
    pub method: Method,
    /// Defaults to closed-form for coherent methods and
    /// hilbert-schmidt-half for the master equation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<DistanceKind>,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
}

fn default_rtol() -> f64 {
    Tolerances::default().rtol
}

fn default_atol() -> f64 {
    Tolerances::default().atol
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig { xi: vec![], method: Method::default(), distance: None, rtol: default_rtol(), atol: default_atol() }
    }
}

impl EvolutionConfig {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances { rtol: self.rtol, atol: self.atol }
    }

    pub fn distance_kind(&self) -> DistanceKind {
        self.distance.unwrap_or(match self.method {
            Method::MasterEquation => DistanceKind::HilbertSchmidtHalf,
            Method::ClosedForm | Method::Amplitudes => DistanceKind::ClosedForm,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovianConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub rate: MarkovRate,
    #[serde(default)]
    pub lamb_shift: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_cap")]
    pub max_ket: u32,
    #[serde(default = "default_cap")]
    pub max_bra: u32,
    #[serde(default = "default_lep_tol")]
    pub lep_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<SliceConfig>,
}

fn default_cap() -> u32 {
    2
}

fn default_lep_tol() -> f64 {
    DEFAULT_LEP_TOL
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { max_ket: 2, max_bra: 2, lep_tol: DEFAULT_LEP_TOL, slice: None }
    }
}

/// Parameter values given either explicitly or as `n` evenly spaced points
/// on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl GridConfig {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match (&self.values, self.lo, self.hi, self.n) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(lo), Some(hi), Some(n)) if n >= 1 => {
                if n == 1 {
                    vec![lo]
                } else {
                    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
                }
            }
            _ => return Err(Error::InvalidSpec("a grid needs either `values` or `lo`, `hi`, `n`".into())),
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("grid values must be finite and nonempty".into()));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceConfig {
    pub parameter: Parameter,
    #[serde(default)]
    pub mode: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl SliceConfig {
    pub fn grid(&self) -> GridConfig {
        GridConfig { values: self.values.clone(), lo: self.lo, hi: self.hi, n: self.n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LepConfig {
    pub parameter: Parameter,
    #[serde(default)]
    pub mode: usize,
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_bisection_tol")]
    pub tol: f64,
}

fn default_bisection_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub mode: usize,
    pub gamma: GridConfig,
    pub alpha: GridConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpembaConfig {
    #[serde(default)]
    pub mode: usize,
    pub runs: Vec<MpembaRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpembaRun {
    pub xi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
}

impl MpembaRun {
    /// `base` with this run's overrides applied to mode `mode`.
    pub fn spec(&self, base: &PseudomodeSpec, mode: usize) -> Result<PseudomodeSpec> {
        let mut spec = base.clone();
        for (param, value) in [(Parameter::Alpha, self.alpha), (Parameter::Gamma, self.gamma), (Parameter::Omega, self.omega)] {
            if let Some(v) = value {
                spec = spec.with_parameter(param, mode, v)?;
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out_dir() }
    }
}

impl RunConfig {
    /// Parses and validates; TOML errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidSpec(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidSpec(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidSpec(format!("config serialization: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.model.spec()?;
        if let Some(t) = &self.truncation {
            let trunc = t.spec()?;
            if trunc.n_modes().len() != spec.n_modes() {
                return Err(Error::InvalidSpec(format!(
                    "[truncation] lists {} pseudomode cutoffs for {} modes",
                    trunc.n_modes().len(),
                    spec.n_modes()
                )));
            }
        }
        if let Some(t) = &self.time {
            if !(t.t_max.is_finite() && t.t_max > 0.0) || t.n_points < 2 {
                return Err(Error::InvalidSpec("[time] needs t_max > 0 and n_points >= 2".into()));
            }
        }
        if self.evolution.xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("[evolution] xi values must be finite".into()));
        }
        if !(self.evolution.rtol > 0.0 && self.evolution.atol > 0.0) {
            return Err(Error::InvalidSpec("[evolution] rtol and atol must be positive".into()));
        }
        if self.evolution.method == Method::MasterEquation && self.truncation.is_none() {
            return Err(Error::InvalidSpec("method = \"master-equation\" needs a [truncation] section".into()));
        }
        if let Some(s) = &self.spectrum.slice {
            s.grid().values()?;
        }
        if let Some(s) = &self.sweep {
            s.gamma.values()?;
            s.alpha.values()?;
        }
        if let Some(m) = &self.mpemba {
            if m.runs.len() != 2 {
                return Err(Error::InvalidSpec(format!("[mpemba] needs exactly 2 runs, got {}", m.runs.len())));
            }
            for r in &m.runs {
                r.spec(&spec, m.mode)?;
            }
        }
        Ok(())
    }

    pub fn time_grid(&self) -> Result<Vec<f64>> {
        let t = self.time.ok_or_else(|| Error::InvalidSpec("missing [time] section".into()))?;
        crate::dynamics::uniform_grid(t.t_max, t.n_points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
[model]
omega0 = 1.0
modes = [{ alpha = 2.5, omega = 1.0, gamma = 10.0 }]

[truncation]
n_sys = 6
n_modes = [6]

[time]
t_max = 5.0
n_points = 101

[evolution]
xi = [1.0]
method = "master-equation"
distance = "trace-norm"

[markovian]
enabled = true
rate = "printed"

[spectrum]
max_ket = 1
slice = { parameter = "alpha", lo = 0.1, hi = 0.5, n = 5 }

[lep]
parameter = "gamma"
lo = 8.0
hi = 12.0

[sweep]
gamma = { lo = 1.0, hi = 20.0, n = 4 }
alpha = { values = [0.5, 2.5] }

[[mpemba.runs]]
xi = 2.0
alpha = 2.5

[[mpemba.runs]]
xi = 1.0
alpha = 2.4

[output]
dir = "results"
"#;

    #[test]
    fn parses_full_config() {
        let cfg = RunConfig::parse(FULL).unwrap();
        assert_eq!(cfg.model.spec().unwrap(), PseudomodeSpec::resonant(1.0, 2.5, 10.0).unwrap());
        assert_eq!(cfg.truncation.as_ref().unwrap().spec().unwrap().dim(), 36);
        assert_eq!(cfg.time_grid().unwrap().len(), 101);
        assert_eq!(cfg.evolution.distance_kind(), DistanceKind::TraceNorm);
        assert_eq!(cfg.markovian.rate, MarkovRate::Printed);
        assert_eq!(cfg.spectrum.max_ket, 1);
        assert_eq!(cfg.spectrum.max_bra, 2);
        assert_eq!(cfg.spectrum.slice.as_ref().unwrap().grid().values().unwrap(), vec![0.1, 0.2, 0.30000000000000004, 0.4, 0.5]);
        assert_eq!(cfg.lep.as_ref().unwrap().tol, 1e-10);
        let sweep = cfg.sweep.as_ref().unwrap();
        assert_eq!(sweep.gamma.values().unwrap().len(), 4);
        let runs = &cfg.mpemba.as_ref().unwrap().runs;
        let base = cfg.model.spec().unwrap();
        assert_eq!(runs[1].spec(&base, 0).unwrap().modes()[0].alpha, 2.4);
        assert_eq!(cfg.output.dir, PathBuf::from("results"));
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::parse(FULL).unwrap();
        let again = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);

        let minimal = RunConfig::parse("[model]\nlorentzian = { coupling = 2.5, width = 5.0, omega0 = 1.0 }\n").unwrap();
        assert_eq!(RunConfig::parse(&minimal.to_toml().unwrap()).unwrap(), minimal);
        assert_eq!(minimal.model.spec().unwrap().modes()[0].gamma, 10.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RunConfig::parse("[model]\nomega0 = 1.0\nmodes = [{ alpha = 1.0, omega = 1.0 }]\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        let err = RunConfig::parse("[model]\nomega0 = 1.0\nmodes = []\nbogus = 3\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn validation_failures() {
        let base = "[model]\nomega0 = 1.0\nmodes = [{ alpha = 1.0, omega = 1.0, gamma = 1.0 }]\n";
        assert!(RunConfig::parse(base).is_ok());
        assert!(RunConfig::parse("[model]\nomega0 = 1.0\n").is_err());
        assert!(RunConfig::parse(&format!("{base}[time]\nt_max = 0.0\nn_points = 10\n")).is_err());
        assert!(RunConfig::parse(&format!("{base}[time]\nt_max = 1.0\nn_points = 1\n")).is_err());
        assert!(RunConfig::parse(&format!("{base}[truncation]\nn_sys = 4\nn_modes = [4, 4]\n")).is_err());
        assert!(RunConfig::parse(&format!("{base}[evolution]\nmethod = \"master-equation\"\n")).is_err());
        assert!(RunConfig::parse(&format!("{base}[[mpemba.runs]]\nxi = 1.0\n")).is_err());
        assert!(RunConfig::parse(&format!("{base}[sweep]\ngamma = {{ lo = 1.0 }}\nalpha = {{ values = [1.0] }}\n")).is_err());
    }
}
