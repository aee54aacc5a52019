//! Command-line front end. Every command reads a [`RunConfig`], writes CSV
//! files plus `summary.txt` into the output directory, and prints the
//! summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use ndarray::Array2;

use crate::config::{Method, RunConfig};
use crate::dynamics::{
    analytic_p, coherent_density, coherent_trajectory, evolve_amplitudes, evolve_master_equation,
    markovian_reduction, AmplitudeModel, MarkovianReduction, Trajectory,
};
use crate::liouvillian::{build_liouvillian, embed_with_vacuum};
use crate::mpemba::{attach_distances, detect_crossing, gap_sweep, DistanceKind};
use crate::spectral::{
    characteristic_polynomial, combination_spectrum, detect_lep, lep_indicator, locate_lep,
    polynomial_roots, spectral_gap, ExcitationIndex, ScanLine,
};
use crate::{bath::PseudomodeSpec, Error, C64};

#[derive(Debug, Parser)]
#[command(name = "pseudomode", version, about = "Pseudomode relaxation, Liouvillian exceptional points and Mpemba crossings")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Use the Born-Markov reduction (evolve: add comparison columns;
    /// mpemba: run both states under it).
    #[arg(long, global = true)]
    pub markovian: bool,
    /// closed-form | hilbert-schmidt-half | trace-norm
    #[arg(long, global = true)]
    pub distance: Option<DistanceKind>,
    /// Worker threads for parallel commands.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Dynamical-matrix roots, Liouvillian eigenvalue combinations, gaps.
    Spectrum,
    /// Bisection for an exceptional point along a parameter line.
    Lep,
    /// One relaxation trajectory.
    Evolve,
    /// Two trajectories and their crossing report.
    Mpemba,
    /// Gap and LEP flag over a (gamma, alpha) grid.
    Sweep,
}

/// Shortest round-trip decimal, scientific below 1e-4 in magnitude.
/// Negative zero prints as `0`.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.is_finite() && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

struct Summary(String);

impl Summary {
    fn new(command: &str) -> Self {
        Summary(format!("command = {command}\n"))
    }

    fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} = {value}");
    }

    fn float(&mut self, key: &str, value: f64) {
        self.line(key, fmt_float(value));
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<String> {
    let path = cli.config.as_ref().context("--config <path> is required")?;
    let cfg = RunConfig::load(path)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let summary = pool.install(|| match cli.command {
        Command::Spectrum => cmd_spectrum(&cfg, &out),
        Command::Lep => cmd_lep(&cfg, &out),
        Command::Evolve => cmd_evolve(&cfg, cli, &out),
        Command::Mpemba => cmd_mpemba(&cfg, cli, &out),
        Command::Sweep => cmd_sweep(&cfg, &out),
    })?;
    fs::write(out.join("summary.txt"), &summary.0)?;
    Ok(summary.0)
}

fn reduction(cfg: &RunConfig, spec: &PseudomodeSpec) -> MarkovianReduction {
    let mut red = markovian_reduction(spec, cfg.markovian.rate);
    red.include_lamb_shift = cfg.markovian.lamb_shift;
    red
}

fn gap_text(spec: &PseudomodeSpec) -> String {
    match crate::spectral::model_roots(spec).and_then(|r| spectral_gap(&r)) {
        Ok(g) => fmt_float(g),
        Err(Error::GapUndefined) => "undefined".into(),
        Err(e) => format!("error: {e}"),
    }
}

fn cmd_spectrum(cfg: &RunConfig, out: &Path) -> anyhow::Result<Summary> {
    let spec = cfg.model.spec()?;
    let q = characteristic_polynomial(&spec);
    let roots = polynomial_roots(&q)?;
    let lep = detect_lep(&q, &roots, cfg.spectrum.lep_tol);
    let red = reduction(cfg, &spec);

    let mut t = Table::new(&["j", "re", "im", "abs_dq"]);
    for (j, (r, d)) in roots.roots().iter().zip(&lep.derivative_residuals).enumerate() {
        t.rows.push(vec![j.to_string(), fmt_float(r.re), fmt_float(r.im), fmt_float(*d)]);
    }
    t.write(&out.join("roots.csv"))?;

    let mut t = Table::new(&["index", "ket", "bra", "re", "im"]);
    for (idx, l) in combination_spectrum(&roots, cfg.spectrum.max_ket, cfg.spectrum.max_bra) {
        t.rows.push(vec![
            idx.to_string(),
            idx.ket_excitations().to_string(),
            idx.bra_excitations().to_string(),
            fmt_float(l.re),
            fmt_float(l.im),
        ]);
    }
    t.write(&out.join("combinations.csv"))?;

    let mut t = Table::new(&["index", "re", "im"]);
    let (kc, bc) = (cfg.spectrum.max_ket, cfg.spectrum.max_bra);
    for m0 in 0..=kc {
        for m1 in 0..=kc - m0 {
            for n0 in 0..=bc {
                for n1 in 0..=bc - n0 {
                    let idx = ExcitationIndex::new(vec![(m0, n0), (m1, n1)]);
                    let l = red.eigenvalue(&idx)?;
                    t.rows.push(vec![idx.to_string(), fmt_float(l.re), fmt_float(l.im)]);
                }
            }
        }
    }
    t.write(&out.join("markovian.csv"))?;

    let mut s = Summary::new("spectrum");
    s.line("n_roots", roots.len());
    s.line("gap", gap_text(&spec));
    s.float("gamma_m", red.gamma_m);
    s.float("gap_markovian", red.gap());
    s.float("lamb_shift", red.lamb_shift);
    s.line("is_lep", lep.is_lep);
    s.line("coalescing_pairs", format!("{:?}", lep.coalescing_pairs));

    if let Some(slice) = &cfg.spectrum.slice {
        let values = slice.grid().values()?;
        let n = spec.n_modes() + 1;
        let mut header: Vec<String> = ["value", "gap", "gap_markovian", "is_lep", "indicator"].map(String::from).to_vec();
        for j in 0..n {
            header.push(format!("root{j}_re"));
            header.push(format!("root{j}_im"));
        }
        let mut t = Table { header, rows: vec![] };
        for v in values {
            let sp = spec.with_parameter(slice.parameter, slice.mode, v)?;
            let q = characteristic_polynomial(&sp);
            let r = polynomial_roots(&q)?;
            let mut row = vec![
                fmt_float(v),
                gap_text(&sp),
                fmt_float(reduction(cfg, &sp).gap()),
                detect_lep(&q, &r, cfg.spectrum.lep_tol).is_lep.to_string(),
                fmt_float(lep_indicator(&sp)?),
            ];
            for z in r.roots() {
                row.push(fmt_float(z.re));
                row.push(fmt_float(z.im));
            }
            t.rows.push(row);
        }
        t.write(&out.join("slice.csv"))?;
        s.line("slice_points", t.rows.len());
    }
    Ok(s)
}

fn cmd_lep(cfg: &RunConfig, out: &Path) -> anyhow::Result<Summary> {
    let spec = cfg.model.spec()?;
    let lc = cfg.lep.as_ref().context("the lep command needs a [lep] section")?;
    let scan = ScanLine { parameter: lc.parameter, mode: lc.mode, lo: lc.lo, hi: lc.hi };
    let mut s = Summary::new("lep");
    let name = serde_plain(&lc.parameter);
    s.line("parameter", &name);
    let mut t = Table::new(&["parameter", "found", "value", "bracket_lo", "bracket_hi", "iterations"]);
    match locate_lep(&spec, &scan, lc.tol) {
        Ok(loc) => {
            s.line("found", true);
            s.float("value", loc.parameter);
            s.float("bracket_lo", loc.bracket.0);
            s.float("bracket_hi", loc.bracket.1);
            s.line("iterations", loc.iterations);
            for (j, r) in loc.roots.roots().iter().enumerate() {
                s.line(&format!("root{j}"), format!("{} {}", fmt_float(r.re), fmt_float(r.im)));
            }
            t.rows.push(vec![
                name,
                "true".into(),
                fmt_float(loc.parameter),
                fmt_float(loc.bracket.0),
                fmt_float(loc.bracket.1),
                loc.iterations.to_string(),
            ]);
        }
        Err(Error::NotFound(msg)) => {
            eprintln!("no exceptional point on the scan line: {msg}");
            s.line("found", false);
            s.line("reason", msg);
            t.rows.push(vec![name, "false".into(), String::new(), fmt_float(lc.lo), fmt_float(lc.hi), "0".into()]);
        }
        Err(e) => return Err(e.into()),
    }
    t.write(&out.join("lep.csv"))?;
    Ok(s)
}

fn serde_plain(p: &crate::bath::Parameter) -> String {
    use crate::bath::Parameter::*;
    match p {
        Alpha => "alpha",
        Gamma => "gamma",
        Omega => "omega",
        Omega0 => "omega0",
    }
    .into()
}

/// `<a> / xi` from a reduced state.
fn amplitude_ratio(rho: &Array2<C64>, xi: f64) -> C64 {
    let a: C64 = (1..rho.nrows()).map(|m| (m as f64).sqrt() * rho[[m, m - 1]]).sum();
    a / xi
}

/// One trajectory by the configured method, with distances and `P(t)`.
fn run_trajectory(
    cfg: &RunConfig,
    spec: &PseudomodeSpec,
    xi: f64,
    times: &[f64],
    kind: DistanceKind,
) -> anyhow::Result<(Trajectory, Vec<C64>)> {
    let mut traj = match cfg.evolution.method {
        Method::ClosedForm => coherent_trajectory(&AmplitudeModel::Pseudomode(spec.clone()), xi, times)?,
        Method::Amplitudes => evolve_amplitudes(spec, xi, times, cfg.evolution.tolerances())?,
        Method::MasterEquation => {
            let trunc = cfg.truncation.as_ref().context("master-equation runs need [truncation]")?.spec()?;
            let l = build_liouvillian(spec, &trunc)?;
            let rho0 = embed_with_vacuum(&coherent_density(C64::from(xi), trunc.n_sys()), &trunc)?;
            evolve_master_equation(&l, &rho0, times, cfg.evolution.tolerances())?
        }
    };
    attach_distances(&mut traj, kind)?;
    let p = match traj.p() {
        Some(p) => p.to_vec(),
        None if xi != 0.0 => traj.reduced_states().unwrap_or_default().iter().map(|r| amplitude_ratio(r, xi)).collect(),
        None => times.iter().map(|&t| analytic_p(spec, t)).collect(),
    };
    Ok((traj, p))
}

fn cmd_evolve(cfg: &RunConfig, cli: &Cli, out: &Path) -> anyhow::Result<Summary> {
    let spec = cfg.model.spec()?;
    let [xi] = cfg.evolution.xi[..] else {
        bail!("evolve needs exactly one xi in [evolution], got {}", cfg.evolution.xi.len());
    };
    let times = cfg.time_grid()?;
    let kind = cli.distance.unwrap_or(cfg.evolution.distance_kind());
    let (traj, p) = run_trajectory(cfg, &spec, xi, &times, kind)?;
    let dist = traj.distances.clone().unwrap_or_default();
    let markov = (cli.markovian || cfg.markovian.enabled).then(|| reduction(cfg, &spec));
    let me = cfg.evolution.method == Method::MasterEquation;

    let mut header = vec!["t", "re_p", "im_p", "abs_p", "distance"];
    if markov.is_some() {
        header.extend(["markov_re_p", "markov_im_p", "markov_abs_p", "markov_distance"]);
    }
    if me {
        header.push("leakage");
    }
    let mut t = Table::new(&header);
    let leak = traj.diagnostics.leakage_warning;
    for (k, &time) in times.iter().enumerate() {
        let mut row = vec![fmt_float(time), fmt_float(p[k].re), fmt_float(p[k].im), fmt_float(p[k].norm()), fmt_float(dist[k])];
        if let Some(red) = &markov {
            let pm = red.p(time);
            let dm = match kind {
                DistanceKind::HilbertSchmidtHalf => crate::mpemba::closed_form_distance(xi * xi * pm.norm_sqr()) / 2f64.sqrt(),
                _ => crate::mpemba::closed_form_distance(xi * xi * pm.norm_sqr()),
            };
            row.extend([fmt_float(pm.re), fmt_float(pm.im), fmt_float(pm.norm()), fmt_float(dm)]);
        }
        if me {
            row.push(u8::from(leak).to_string());
        }
        t.rows.push(row);
    }
    t.write(&out.join("trajectory.csv"))?;
    if leak {
        eprintln!(
            "warning: truncation leakage, top Fock level population {:e} exceeds {:e}",
            traj.diagnostics.leakage,
            crate::dynamics::LEAKAGE_THRESHOLD
        );
    }

    let mut s = Summary::new("evolve");
    s.line("method", method_name(cfg.evolution.method));
    s.float("xi", xi);
    s.line("distance", kind);
    s.line("points", times.len());
    s.line("gap", gap_text(&spec));
    s.float("final_distance", *dist.last().unwrap_or(&f64::NAN));
    if let Some(red) = &markov {
        s.float("gamma_m", red.gamma_m);
        s.float("gap_markovian", red.gap());
    }
    if me {
        let d = traj.diagnostics;
        s.float("trace_drift", d.trace_drift);
        s.float("hermiticity_error", d.hermiticity_error);
        s.float("purity_error", d.purity_error);
        s.float("leakage", d.leakage);
        s.line("leakage_warning", d.leakage_warning);
    }
    Ok(s)
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::ClosedForm => "closed-form",
        Method::Amplitudes => "amplitudes",
        Method::MasterEquation => "master-equation",
    }
}

fn cmd_mpemba(cfg: &RunConfig, cli: &Cli, out: &Path) -> anyhow::Result<Summary> {
    let base = cfg.model.spec()?;
    let mc = cfg.mpemba.as_ref().context("the mpemba command needs [[mpemba.runs]]")?;
    let times = cfg.time_grid()?;
    let kind = cli.distance.unwrap_or(cfg.evolution.distance_kind());
    let markov = cli.markovian || cfg.markovian.enabled;
    let specs = [mc.runs[0].spec(&base, mc.mode)?, mc.runs[1].spec(&base, mc.mode)?];
    let xis = [mc.runs[0].xi, mc.runs[1].xi];

    let one = |i: usize| -> anyhow::Result<Trajectory> {
        if markov {
            let mut t = coherent_trajectory(&AmplitudeModel::Markovian(reduction(cfg, &specs[i])), xis[i], &times)?;
            attach_distances(&mut t, kind)?;
            Ok(t)
        } else {
            Ok(run_trajectory(cfg, &specs[i], xis[i], &times, kind)?.0)
        }
    };
    let (a, b) = rayon::join(|| one(0), || one(1));
    let (t1, t2) = (a?, b?);
    let report = detect_crossing(&t1, &t2)?;

    let (d1, d2) = (t1.distances.as_ref().unwrap(), t2.distances.as_ref().unwrap());
    let mut t = Table::new(&["t", "distance_1", "distance_2"]);
    for k in 0..times.len() {
        t.rows.push(vec![fmt_float(times[k]), fmt_float(d1[k]), fmt_float(d2[k])]);
    }
    t.write(&out.join("mpemba.csv"))?;

    let mut s = Summary::new("mpemba");
    if mc.runs[0] == mc.runs[1] {
        eprintln!("warning: both runs are identical; the comparison is degenerate");
        s.line("warning", "identical runs");
    }
    s.line("generator", if markov { "markovian" } else { method_name(cfg.evolution.method) });
    s.line("distance", kind);
    for i in 0..2 {
        let m = specs[i].modes()[mc.mode];
        s.line(&format!("run{}", i + 1), format!("xi={} alpha={} gamma={} omega={}", fmt_float(xis[i]), fmt_float(m.alpha), fmt_float(m.gamma), fmt_float(m.omega)));
        let gap = if markov { fmt_float(reduction(cfg, &specs[i]).gap()) } else { gap_text(&specs[i]) };
        s.line(&format!("gap{}", i + 1), gap);
    }
    s.float("distance_1_at_0", d1[0]);
    s.float("distance_2_at_0", d2[0]);
    s.line("ordering_at_zero", format!("{:?}", report.ordering_at_zero).to_lowercase());
    s.line("crossed", report.crossed);
    match (report.t_cross, report.bracket) {
        (Some(tc), Some((lo, hi))) => {
            s.float("t_cross", tc);
            s.line("bracket", format!("{} {}", fmt_float(lo), fmt_float(hi)));
        }
        _ => s.line("t_cross", "none"),
    }
    Ok(s)
}

fn cmd_sweep(cfg: &RunConfig, out: &Path) -> anyhow::Result<Summary> {
    let spec = cfg.model.spec()?;
    let sc = cfg.sweep.as_ref().context("the sweep command needs a [sweep] section")?;
    let (gammas, alphas) = (sc.gamma.values()?, sc.alpha.values()?);
    let rows = gap_sweep(&spec, sc.mode, &gammas, &alphas, cfg.markovian.rate, cfg.spectrum.lep_tol)?;
    let mut t = Table::new(&["gamma", "alpha", "gap", "gap_markovian", "is_lep"]);
    for r in &rows {
        t.rows.push(vec![fmt_float(r.gamma), fmt_float(r.alpha), fmt_float(r.delta), fmt_float(r.delta_m), r.is_lep.to_string()]);
    }
    t.write(&out.join("sweep.csv"))?;
    let mut s = Summary::new("sweep");
    s.line("points", rows.len());
    s.line("lep_points", rows.iter().filter(|r| r.is_lep).count());
    if let Some(best) = rows.iter().max_by(|a, b| a.delta.total_cmp(&b.delta)) {
        s.line("max_gap", format!("{} at gamma={} alpha={}", fmt_float(best.delta), fmt_float(best.gamma), fmt_float(best.alpha)));
    }
    Ok(s)
}
