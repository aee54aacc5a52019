//! Spectral core of the pseudomode Liouvillian.
//!
//! For the damped oscillator `H_s = omega0 a0^dagger a0`, `S = a0`, the first
//! moments `v = (<a0>, <a1>, ..., <aN>)` obey `dv/dt = M v` with the arrow
//! shaped dynamical matrix
//!
//! ```text
//! M[0][0] = -i omega0,  M[j][j] = -i Omega_j - gamma_j / 2,  M[0][j] = M[j][0] = -i alpha_j.
//! ```
//!
//! Its characteristic polynomial `Q(lambda) = det(lambda I - M)` is
//!
//! ```text
//! Q(lambda) = (i omega0 + lambda) prod_i (i Omega_i + gamma_i / 2 + lambda)
//!           + sum_i alpha_i^2 prod_{i' != i} (i Omega_i' + gamma_i' / 2 + lambda)
//! ```
//!
//! and every eigenvalue of the full Liouvillian is a combination
//! `sum_j m_j r_j + n_j conj(r_j)` of its roots `r_j`. A coalescence of two
//! roots (`Q = Q' = 0`) is a Liouvillian exceptional point (LEP).

use ndarray::Array2;

use crate::bath::{Parameter, PseudomodeSpec};
use crate::{linalg, Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Roots closer than this (relative to `max(1, |r|)`) are merged into one
/// multiple root. Companion eigenvalues of an exact double root split by
/// about `sqrt(eps)`, so anything below this is numerically indistinguishable.
pub const MULTIPLICITY_TOL: f64 = 1e-7;

/// Default tolerance for both the coalescence distance and `|Q'|` in
/// [`detect_lep`].
pub const DEFAULT_LEP_TOL: f64 = 1e-6;

/// The `(N+1) x (N+1)` single-excitation generator.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalMatrix(Array2<C64>);

impl DynamicalMatrix {
    pub fn matrix(&self) -> &Array2<C64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        linalg::eigenvalues(&self.0)
    }

    /// `exp(t M)`, the propagator of the mode amplitudes.
    pub fn propagator(&self, t: f64) -> Array2<C64> {
        linalg::expm(&(&self.0 * C64::from(t)))
    }
}

pub fn build_dynamical_matrix(spec: &PseudomodeSpec) -> DynamicalMatrix {
    let n = spec.n_modes() + 1;
    let mut m = Array2::zeros((n, n));
    m[[0, 0]] = -I * spec.omega0();
    for (j, mode) in spec.modes().iter().enumerate() {
        m[[j + 1, j + 1]] = -mode.pole();
        m[[0, j + 1]] = -I * mode.alpha;
        m[[j + 1, 0]] = -I * mode.alpha;
    }
    DynamicalMatrix(m)
}

/// Monic polynomial, coefficients stored in ascending order of power.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialCoefficients {
    coeffs: Vec<C64>,
}

impl PolynomialCoefficients {
    /// `coeffs[k]` multiplies `lambda^k`; the last entry must be 1.
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        match coeffs.last() {
            Some(&lead) if coeffs.len() >= 2 && lead == C64::from(1.0) => Ok(Self { coeffs }),
            _ => Err(Error::Domain("polynomial must be monic with degree >= 1".into())),
        }
    }

    /// `prod_k (lambda - r_k)`.
    pub fn from_roots(roots: &[C64]) -> Result<Self> {
        let mut c = vec![C64::from(1.0)];
        for &r in roots {
            c = poly_mul(&c, &[-r, C64::from(1.0)]);
        }
        Self::new(c)
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::from(0.0), |acc, &c| acc * x + c)
    }

    /// Coefficients of `dQ/dlambda` (not monic, so a plain vector).
    pub fn derivative_coeffs(&self) -> Vec<C64> {
        derivative(&self.coeffs)
    }

    pub fn eval_derivative(&self, x: C64) -> C64 {
        horner(&self.derivative_coeffs(), x)
    }

    /// Largest coefficient magnitude.
    pub fn scale(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `sum_k |c_k| |x|^k`, the natural magnitude of a rounded evaluation at `x`.
    fn eval_scale(&self, x: C64) -> f64 {
        let r = x.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }
}

fn poly_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::from(0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn derivative(c: &[C64]) -> Vec<C64> {
    c.iter().enumerate().skip(1).map(|(k, &v)| v * k as f64).collect()
}

fn horner(c: &[C64], x: C64) -> C64 {
    c.iter().rev().fold(C64::from(0.0), |acc, &v| acc * x + v)
}

/// Expanded coefficients of `Q(lambda)`.
pub fn characteristic_polynomial(spec: &PseudomodeSpec) -> PolynomialCoefficients {
    let one = C64::from(1.0);
    let factors: Vec<[C64; 2]> = spec.modes().iter().map(|m| [m.pole(), one]).collect();

    let mut q = vec![I * spec.omega0(), one];
    for f in &factors {
        q = poly_mul(&q, f);
    }
    for (i, mode) in spec.modes().iter().enumerate() {
        let mut term = vec![C64::from(mode.alpha * mode.alpha)];
        for (k, f) in factors.iter().enumerate() {
            if k != i {
                term = poly_mul(&term, f);
            }
        }
        for (k, t) in term.into_iter().enumerate() {
            q[k] += t;
        }
    }
    PolynomialCoefficients { coeffs: q }
}

/// Roots of `Q`, sorted by ascending decay rate `-Re`, ties by ascending `Im`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    roots: Vec<C64>,
    multiplicity_tolerance: f64,
}

impl RootSet {
    pub fn new(mut roots: Vec<C64>, multiplicity_tolerance: f64) -> Self {
        sort_by_decay(&mut roots);
        RootSet { roots, multiplicity_tolerance }
    }

    pub fn roots(&self) -> &[C64] {
        &self.roots
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn multiplicity_tolerance(&self) -> f64 {
        self.multiplicity_tolerance
    }
}

/// Sort by `-Re` ascending; entries whose real parts agree to 1e-9 (relative
/// to the largest root) are ordered by `Im`.
fn sort_by_decay(roots: &mut [C64]) {
    roots.sort_by(|a, b| (-a.re).total_cmp(&-b.re));
    let tie = 1e-9 * roots.iter().map(|r| r.norm()).fold(1.0, f64::max);
    let mut start = 0;
    while start < roots.len() {
        let mut end = start + 1;
        while end < roots.len() && (roots[end].re - roots[start].re).abs() <= tie {
            end += 1;
        }
        roots[start..end].sort_by(|a, b| a.im.total_cmp(&b.im));
        start = end;
    }
}

/// All roots of a monic polynomial.
///
/// Eigenvalues of the companion matrix, then clusters within
/// [`MULTIPLICITY_TOL`] are replaced by their centroid polished with Newton
/// on the `(k-1)`-th derivative (well conditioned at a `k`-fold root), and
/// isolated roots get one Newton step on `Q`.
pub fn polynomial_roots(p: &PolynomialCoefficients) -> Result<RootSet> {
    let n = p.degree();
    let c = p.coeffs();
    let raw = if n == 1 {
        vec![-c[0]]
    } else {
        let mut companion = Array2::<C64>::zeros((n, n));
        for k in 1..n {
            companion[[k, k - 1]] = C64::from(1.0);
        }
        for k in 0..n {
            companion[[k, n - 1]] = -c[k];
        }
        linalg::eigenvalues(&companion)?
    };

    let clusters = cluster(&raw, MULTIPLICITY_TOL);
    let mut roots = Vec::with_capacity(n);
    for members in clusters {
        let k = members.len();
        let centroid = members.iter().map(|&i| raw[i]).sum::<C64>() / k as f64;
        let root = if k == 1 {
            newton_step(c, centroid)
        } else {
            let mut d = c.to_vec();
            for _ in 0..k - 1 {
                d = derivative(&d);
            }
            let mut x = centroid;
            for _ in 0..3 {
                x = newton_step(&d, x);
            }
            x
        };
        roots.extend(std::iter::repeat_n(root, k));
    }

    for &r in &roots {
        let allowed = 1e-10 * p.scale().max(p.eval_scale(r));
        let res = p.eval(r).norm();
        if res.is_nan() || res >= allowed {
            return Err(Error::RootResidual { residual: res, allowed });
        }
    }
    Ok(RootSet::new(roots, MULTIPLICITY_TOL))
}

/// One Newton step on the polynomial with ascending coefficients `c`,
/// accepted only if it lowers `|c(x)|`.
fn newton_step(c: &[C64], x: C64) -> C64 {
    let f = horner(c, x);
    let df = horner(&derivative(c), x);
    if df == C64::from(0.0) {
        return x;
    }
    let next = x - f / df;
    if next.is_finite() && horner(c, next).norm() <= f.norm() {
        next
    } else {
        x
    }
}

/// Connected components of the "closer than `tol * max(1, |r|)`" relation.
fn cluster(points: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let scale = 1f64.max(points[i].norm()).max(points[j].norm());
            if (points[i] - points[j]).norm() < tol * scale {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![];
    let mut label = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = groups.len();
            groups.push(vec![]);
        }
        groups[label[r]].push(i);
    }
    groups
}

/// Roots of the `N = 1` quadratic in closed form.
///
/// On resonance (`Omega == omega0`) these are
/// `-gamma/4 +- sqrt(gamma^2 - 16 alpha^2) / 4 - i omega0`, with the radical
/// evaluated as `sqrt((gamma - 4 alpha)(gamma + 4 alpha))` so that `gamma =
/// 4 alpha` gives an exact double root. Off resonance the cancellation-free
/// quadratic formula is applied to `Q` directly.
pub fn closed_form_roots_n1(omega0: f64, omega: f64, gamma: f64, alpha: f64) -> RootSet {
    let roots = if omega == omega0 {
        let disc = (gamma - 4.0 * alpha) * (gamma + 4.0 * alpha);
        let radical = if disc >= 0.0 {
            C64::new(disc.sqrt() / 4.0, 0.0)
        } else {
            C64::new(0.0, (-disc).sqrt() / 4.0)
        };
        let centre = C64::new(-gamma / 4.0, -omega0);
        vec![centre + radical, centre - radical]
    } else {
        let b = C64::new(gamma / 2.0, omega0 + omega);
        let c = I * omega0 * C64::new(gamma / 2.0, omega) + alpha * alpha;
        let sq = (b * b - 4.0 * c).sqrt();
        // pick the sign that avoids cancellation in -(b +- sq)/2
        let s = if (b.conj() * sq).re >= 0.0 { sq } else { -sq };
        let q = -(b + s) / 2.0;
        if q == C64::from(0.0) {
            vec![C64::from(0.0), -b]
        } else {
            vec![q, c / q]
        }
    };
    RootSet::new(roots, MULTIPLICITY_TOL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LepReport {
    pub is_lep: bool,
    /// Index pairs `(j, k)`, `j < k`, into the root list.
    pub coalescing_pairs: Vec<(usize, usize)>,
    /// `|Q'(r_j)|` for each root.
    pub derivative_residuals: Vec<f64>,
}

/// Classifies a root set as an exceptional point.
///
/// A pair `(j, k)` coalesces when `|r_j - r_k| < tol * max(1, |r_j|)`; the
/// point is an LEP when some coalescing root also has
/// `|Q'(r)| < tol * max(1, scale(Q))`.
pub fn detect_lep(p: &PolynomialCoefficients, roots: &RootSet, tol: f64) -> LepReport {
    let r = roots.roots();
    let derivative_residuals: Vec<f64> = r.iter().map(|&x| p.eval_derivative(x).norm()).collect();
    let deriv_tol = tol * p.scale().max(1.0);

    let mut coalescing_pairs = vec![];
    let mut is_lep = false;
    for j in 0..r.len() {
        for k in j + 1..r.len() {
            if (r[j] - r[k]).norm() < tol * r[j].norm().max(1.0) {
                coalescing_pairs.push((j, k));
                if derivative_residuals[j] < deriv_tol || derivative_residuals[k] < deriv_tol {
                    is_lep = true;
                }
            }
        }
    }
    LepReport { is_lep, coalescing_pairs, derivative_residuals }
}

/// Occupation index `(m_0, n_0, ..., m_N, n_N)` labelling one Liouvillian
/// eigenvalue: `m_j` quanta of root `j` on the ket side, `n_j` on the bra side.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExcitationIndex {
    pairs: Vec<(u32, u32)>,
}

impl ExcitationIndex {
    pub fn new(pairs: Vec<(u32, u32)>) -> Self {
        ExcitationIndex { pairs }
    }

    pub fn zero(n_roots: usize) -> Self {
        Self::new(vec![(0, 0); n_roots])
    }

    /// From the flat signed layout `(m_0, n_0, m_1, n_1, ...)`.
    pub fn from_flat(flat: &[i64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(Error::Domain(format!("index needs an even length, got {}", flat.len())));
        }
        let mut pairs = vec![];
        for ch in flat.chunks(2) {
            if ch[0] < 0 || ch[1] < 0 {
                return Err(Error::Domain(format!("negative occupation in index {flat:?}")));
            }
            pairs.push((ch[0] as u32, ch[1] as u32));
        }
        Ok(Self::new(pairs))
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn ket_excitations(&self) -> u32 {
        self.pairs.iter().map(|p| p.0).sum()
    }

    pub fn bra_excitations(&self) -> u32 {
        self.pairs.iter().map(|p| p.1).sum()
    }
}

impl std::fmt::Display for ExcitationIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let flat: Vec<String> =
            self.pairs.iter().flat_map(|&(m, n)| [m.to_string(), n.to_string()]).collect();
        write!(f, "({})", flat.join(" "))
    }
}

/// `sum_j [ i Im(r_j)(m_j - n_j) + Re(r_j)(m_j + n_j) ]`.
pub fn liouvillian_eigenvalue(roots: &RootSet, index: &ExcitationIndex) -> Result<C64> {
    if index.pairs.len() != roots.len() {
        return Err(Error::Domain(format!(
            "index has {} pairs but there are {} roots",
            index.pairs.len(),
            roots.len()
        )));
    }
    Ok(roots
        .roots()
        .iter()
        .zip(&index.pairs)
        .map(|(r, &(m, n))| {
            let (m, n) = (m as f64, n as f64);
            C64::new(r.re * (m + n), r.im * (m - n))
        })
        .sum())
}

/// Every combination with at most `max_ket` ket and `max_bra` bra quanta,
/// in a deterministic order (ket index outer, bra index inner).
pub fn combination_spectrum(
    roots: &RootSet,
    max_ket: u32,
    max_bra: u32,
) -> Vec<(ExcitationIndex, C64)> {
    let kets = occupations(roots.len(), max_ket);
    let bras = occupations(roots.len(), max_bra);
    let mut out = Vec::with_capacity(kets.len() * bras.len());
    for m in &kets {
        for n in &bras {
            let idx = ExcitationIndex::new(m.iter().zip(n).map(|(&a, &b)| (a, b)).collect());
            let value = liouvillian_eigenvalue(roots, &idx).expect("index built from the root count");
            out.push((idx, value));
        }
    }
    out
}

/// Occupation vectors of `len` modes with total at most `cap`.
fn occupations(len: usize, cap: u32) -> Vec<Vec<u32>> {
    let mut out = vec![];
    let mut cur = vec![0u32; len];
    fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[pos] = v;
            rec(pos + 1, left - v, cur, out);
        }
        cur[pos] = 0;
    }
    rec(0, cap, &mut cur, &mut out);
    out.sort_by_key(|v| (v.iter().sum::<u32>(), std::cmp::Reverse(v.clone())));
    out
}

/// Smallest decay rate `-Re(r_j)` over roots with negative real part.
///
/// Real parts within `1e-12 * max(1, |r|max)` of zero count as undamped.
pub fn spectral_gap(roots: &RootSet) -> Result<f64> {
    let zero = 1e-12 * roots.roots().iter().map(|r| r.norm()).fold(1.0, f64::max);
    roots
        .roots()
        .iter()
        .filter(|r| r.re < -zero)
        .map(|r| -r.re)
        .min_by(f64::total_cmp)
        .ok_or(Error::GapUndefined)
}

/// Roots of the model via the companion route.
pub fn model_roots(spec: &PseudomodeSpec) -> Result<RootSet> {
    polynomial_roots(&characteristic_polynomial(spec))
}

/// One-parameter line through parameter space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanLine {
    pub parameter: Parameter,
    /// Mode addressed by `alpha`, `gamma` or `omega`; ignored for `omega0`.
    pub mode: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LepLocation {
    pub parameter: f64,
    /// Final bisection bracket.
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// Roots at the located parameter.
    pub roots: RootSet,
}

/// Signed coalescence indicator: `Re[(r_a - r_b)^2]` for the closest root
/// pair. It is negative while the pair is split along the imaginary axis,
/// positive when split along the real axis, and passes through zero at the
/// exceptional point. For `N = 1` it is `Re(b^2 - 4c)` of the quadratic.
pub fn lep_indicator(spec: &PseudomodeSpec) -> Result<f64> {
    let q = characteristic_polynomial(spec);
    if q.degree() == 2 {
        let c = q.coeffs();
        return Ok((c[1] * c[1] - 4.0 * c[0]).re);
    }
    let roots = polynomial_roots(&q)?;
    let r = roots.roots();
    let mut best: Option<(f64, C64)> = None;
    for j in 0..r.len() {
        for k in j + 1..r.len() {
            let d = r[j] - r[k];
            if best.is_none_or(|(dist, _)| d.norm() < dist) {
                best = Some((d.norm(), d));
            }
        }
    }
    Ok(best.map_or(0.0, |(_, d)| (d * d).re))
}

/// Bisection on the sign of [`lep_indicator`] along `scan`, to a bracket
/// narrower than `tol`.
pub fn locate_lep(base: &PseudomodeSpec, scan: &ScanLine, tol: f64) -> Result<LepLocation> {
    let eval = |x: f64| -> Result<f64> { lep_indicator(&base.with_parameter(scan.parameter, scan.mode, x)?) };
    let (mut lo, mut hi) = (scan.lo.min(scan.hi), scan.lo.max(scan.hi));
    let (f_lo, f_hi) = (eval(lo)?, eval(hi)?);
    if f_lo == 0.0 || f_hi == 0.0 {
        let x = if f_lo == 0.0 { lo } else { hi };
        return finish(base, scan, x, (x, x), 0);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NotFound(format!(
            "indicator has the same sign at both ends of [{lo}, {hi}] ({f_lo:e}, {f_hi:e})"
        )));
    }
    let s_lo = f_lo.signum();
    let mut iterations = 0;
    while hi - lo > tol && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        let f = eval(mid)?;
        iterations += 1;
        if f == 0.0 {
            return finish(base, scan, mid, (lo, hi), iterations);
        }
        if f.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    finish(base, scan, 0.5 * (lo + hi), (lo, hi), iterations)
}

fn finish(
    base: &PseudomodeSpec,
    scan: &ScanLine,
    x: f64,
    bracket: (f64, f64),
    iterations: usize,
) -> Result<LepLocation> {
    let roots = model_roots(&base.with_parameter(scan.parameter, scan.mode, x)?)?;
    Ok(LepLocation { parameter: x, bracket, iterations, roots })
}
