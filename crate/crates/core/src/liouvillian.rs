//! Truncated system-pseudomode Hilbert space and the vectorized Lindblad
//! generator
//!
//! ```text
//! L rho = -i [H_sp, rho] + sum_i gamma_i (a_i rho a_i^dagger - {a_i^dagger a_i, rho} / 2)
//! H_sp  = omega0 a0^dagger a0 + sum_i Omega_i a_i^dagger a_i + sum_i alpha_i (a0 a_i^dagger + a0^dagger a_i)
//! ```
//!
//! Vectorization is column stacking, `vec(rho)[j M + i] = rho[i][j]`, so that
//! `vec(A rho B) = (B^T ⊗ A) vec(rho)`. The basis orders the system mode as the
//! most significant tensor factor.
//!
//! `H_sp` conserves the total excitation number and every jump lowers it, so
//! `L` is block triangular across (ket, bra) excitation sectors. Eigenvalues
//! of sectors that fit completely inside the cutoffs are independent of the
//! truncation.

use ndarray::Array2;
use num_complex::ComplexFloat;

use crate::bath::PseudomodeSpec;
use crate::sparse::{gmres, CsrMatrix};
use crate::{linalg, Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Default bound on the truncated Hilbert-space dimension `M`.
pub const DEFAULT_MAX_DIM: usize = 4096;

/// Default bound on the superoperator dimension `M^2` for dense
/// eigendecomposition (`M <= 64`).
pub const DENSE_SUPEROP_LIMIT: usize = 4096;

/// Fock cutoffs: the system keeps states `0..n_sys`, pseudomode `i` keeps
/// `0..n_modes[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncationSpec {
    n_sys: usize,
    n_modes: Vec<usize>,
    max_dim: usize,
}

impl TruncationSpec {
    pub fn new(n_sys: usize, n_modes: Vec<usize>) -> Result<Self> {
        Self::with_limit(n_sys, n_modes, DEFAULT_MAX_DIM)
    }

    pub fn with_limit(n_sys: usize, n_modes: Vec<usize>, max_dim: usize) -> Result<Self> {
        if n_sys < 2 || n_modes.iter().any(|&n| n < 2) {
            return Err(Error::Domain("every Fock cutoff must be at least 2".into()));
        }
        if n_modes.is_empty() {
            return Err(Error::Domain("at least one pseudomode cutoff is required".into()));
        }
        let dim = n_modes.iter().try_fold(n_sys, |acc, &n| acc.checked_mul(n)).unwrap_or(usize::MAX);
        if dim > max_dim {
            return Err(Error::DimensionLimit { dim, limit: max_dim });
        }
        Ok(TruncationSpec { n_sys, n_modes, max_dim })
    }

    /// Same cutoff for the system and every one of `n_modes` pseudomodes.
    pub fn uniform(cutoff: usize, n_modes: usize) -> Result<Self> {
        Self::new(cutoff, vec![cutoff; n_modes])
    }

    pub fn n_sys(&self) -> usize {
        self.n_sys
    }

    pub fn n_modes(&self) -> &[usize] {
        &self.n_modes
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    /// `M = n_sys * prod n_modes`.
    pub fn dim(&self) -> usize {
        self.n_sys * self.pseudomode_dim()
    }

    pub fn pseudomode_dim(&self) -> usize {
        self.n_modes.iter().product()
    }

    /// Cutoffs with the system first.
    pub fn cutoffs(&self) -> Vec<usize> {
        std::iter::once(self.n_sys).chain(self.n_modes.iter().copied()).collect()
    }

    /// Largest total excitation `k` such that every state with `k` quanta
    /// fits inside the cutoffs.
    pub fn complete_sector(&self) -> usize {
        self.cutoffs().into_iter().min().unwrap_or(1) - 1
    }

    fn check(&self, spec: &PseudomodeSpec) -> Result<()> {
        if self.n_modes.len() != spec.n_modes() {
            return Err(Error::Shape {
                expected: format!("{} pseudomode cutoffs", spec.n_modes()),
                got: format!("{}", self.n_modes.len()),
            });
        }
        Ok(())
    }
}

/// Mixed-radix Fock basis indexing.
struct FockBasis {
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    dim: usize,
}

impl FockBasis {
    fn new(trunc: &TruncationSpec) -> Self {
        let cutoffs = trunc.cutoffs();
        let mut strides = vec![1; cutoffs.len()];
        for k in (0..cutoffs.len() - 1).rev() {
            strides[k] = strides[k + 1] * cutoffs[k + 1];
        }
        let dim = cutoffs.iter().product();
        FockBasis { cutoffs, strides, dim }
    }

    fn occupations(&self, mut idx: usize) -> Vec<usize> {
        let mut occ = vec![0; self.cutoffs.len()];
        for (k, s) in self.strides.iter().enumerate() {
            occ[k] = idx / s;
            idx %= s;
        }
        occ
    }
}

/// Annihilation operator of tensor factor `factor` (0 = system) on the
/// truncated space.
pub fn annihilation(trunc: &TruncationSpec, factor: usize) -> CsrMatrix {
    let basis = FockBasis::new(trunc);
    let stride = basis.strides[factor];
    let trip = (0..basis.dim).filter_map(|idx| {
        let n = basis.occupations(idx)[factor];
        (n > 0).then(|| (idx - stride, idx, C64::from((n as f64).sqrt())))
    });
    CsrMatrix::from_triplets(basis.dim, basis.dim, trip)
}

/// Total excitation number operator (diagonal).
pub fn total_number(trunc: &TruncationSpec) -> Array2<C64> {
    let basis = FockBasis::new(trunc);
    let diag: Vec<C64> =
        (0..basis.dim).map(|i| C64::from(basis.occupations(i).iter().sum::<usize>() as f64)).collect();
    Array2::from_diag(&ndarray::Array1::from(diag))
}

fn hamiltonian_sparse(spec: &PseudomodeSpec, trunc: &TruncationSpec) -> Result<CsrMatrix> {
    trunc.check(spec)?;
    let basis = FockBasis::new(trunc);
    let mut trip = vec![];
    for idx in 0..basis.dim {
        let occ = basis.occupations(idx);
        let mut e = spec.omega0() * occ[0] as f64;
        for (i, mode) in spec.modes().iter().enumerate() {
            e += mode.omega * occ[i + 1] as f64;
        }
        trip.push((idx, idx, C64::from(e)));
        // a0^dagger a_i and its conjugate a0 a_i^dagger
        for (i, mode) in spec.modes().iter().enumerate() {
            let ni = occ[i + 1];
            if ni > 0 && occ[0] + 1 < basis.cutoffs[0] && mode.alpha != 0.0 {
                let target = idx + basis.strides[0] - basis.strides[i + 1];
                let amp = mode.alpha * ((occ[0] + 1) as f64 * ni as f64).sqrt();
                trip.push((target, idx, C64::from(amp)));
                trip.push((idx, target, C64::from(amp)));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(basis.dim, basis.dim, trip))
}

/// Dense `H_sp` on the truncated basis.
pub fn build_hamiltonian_sp(spec: &PseudomodeSpec, trunc: &TruncationSpec) -> Result<Array2<C64>> {
    Ok(hamiltonian_sparse(spec, trunc)?.to_dense())
}

/// Sparse vectorized Lindblad generator together with its truncation.
#[derive(Debug, Clone)]
pub struct LiouvillianOperator {
    matrix: CsrMatrix,
    trunc: TruncationSpec,
    spec: Option<PseudomodeSpec>,
}

pub fn build_liouvillian(spec: &PseudomodeSpec, trunc: &TruncationSpec) -> Result<LiouvillianOperator> {
    let h = hamiltonian_sparse(spec, trunc)?;
    let jumps: Vec<(f64, CsrMatrix)> = spec
        .modes()
        .iter()
        .enumerate()
        .map(|(i, m)| (m.gamma, annihilation(trunc, i + 1)))
        .collect();
    let mut l = LiouvillianOperator::from_lindblad(&h, &jumps, trunc)?;
    l.spec = Some(spec.clone());
    Ok(l)
}

impl LiouvillianOperator {
    /// Generic generator `-i[H, .] + sum_k rate_k D[A_k]` on the given
    /// truncation.
    pub fn from_lindblad(h: &CsrMatrix, jumps: &[(f64, CsrMatrix)], trunc: &TruncationSpec) -> Result<Self> {
        let m = trunc.dim();
        if h.nrows() != m || h.ncols() != m || jumps.iter().any(|(_, a)| a.nrows() != m || a.ncols() != m) {
            return Err(Error::Shape { expected: format!("{m} x {m} operators"), got: format!("{} x {}", h.nrows(), h.ncols()) });
        }
        let id = CsrMatrix::identity(m);
        let mut l = id.kron(h).add(&h.transpose().kron(&id).scale(C64::from(-1.0))).scale(-I);
        for (rate, a) in jumps {
            if *rate == 0.0 {
                continue;
            }
            let ada = a.adjoint().matmul(a);
            let d = a
                .conj()
                .kron(a)
                .add(&id.kron(&ada).scale(C64::from(-0.5)))
                .add(&ada.transpose().kron(&id).scale(C64::from(-0.5)));
            l = l.add(&d.scale(C64::from(*rate)));
        }
        Ok(LiouvillianOperator { matrix: l, trunc: trunc.clone(), spec: None })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn truncation(&self) -> &TruncationSpec {
        &self.trunc
    }

    pub fn spec(&self) -> Option<&PseudomodeSpec> {
        self.spec.as_ref()
    }

    /// Hilbert-space dimension `M`.
    pub fn dim(&self) -> usize {
        self.trunc.dim()
    }

    /// Superoperator dimension `M^2`.
    pub fn superdim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, rho: &Array2<C64>) -> Result<Array2<C64>> {
        let v = vectorize(rho);
        if v.len() != self.superdim() {
            return Err(Error::Shape { expected: format!("{0} x {0}", self.dim()), got: format!("{:?}", rho.dim()) });
        }
        Ok(unvectorize(&self.matrix.matvec(&v), self.dim()))
    }
}

/// Column-stacking vectorization.
pub fn vectorize(rho: &Array2<C64>) -> Vec<C64> {
    rho.t().iter().copied().collect()
}

pub fn unvectorize(v: &[C64], m: usize) -> Array2<C64> {
    Array2::from_shape_fn((m, m), |(i, j)| v[j * m + i])
}

/// Sorted Liouvillian spectrum, optionally with biorthonormal eigenmatrices.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Ascending `|Re|`, ties by ascending `Im`; `eigenvalues[0]` is the
    /// steady-state eigenvalue.
    pub eigenvalues: Vec<C64>,
    /// `r_l` with `L r_l = lambda_l r_l`.
    pub right_eigenmatrices: Option<Vec<Array2<C64>>>,
    /// `l_l` with `L^dagger l_l = conj(lambda_l) l_l` and `Tr[l_l^dagger r_k] = delta_lk`.
    pub left_eigenmatrices: Option<Vec<Array2<C64>>>,
    /// `-Re(lambda_1)`.
    pub gap: f64,
}

impl SpectrumResult {
    /// `sum_l Tr[l_l^dagger rho0] exp(lambda_l t) r_l`.
    pub fn reconstruct(&self, rho0: &Array2<C64>, t: f64) -> Option<Array2<C64>> {
        let (rights, lefts) = (self.right_eigenmatrices.as_ref()?, self.left_eigenmatrices.as_ref()?);
        let mut out = Array2::zeros(rho0.dim());
        for ((lam, r), l) in self.eigenvalues.iter().zip(rights).zip(lefts) {
            let overlap: C64 = l.iter().zip(rho0.iter()).map(|(a, b)| a.conj() * b).sum();
            out.scaled_add(overlap * (lam * t).exp(), r);
        }
        Some(out)
    }
}

/// Dense eigendecomposition of the full generator.
pub fn full_spectrum(l: &LiouvillianOperator, with_eigenmatrices: bool) -> Result<SpectrumResult> {
    full_spectrum_with_limit(l, with_eigenmatrices, DENSE_SUPEROP_LIMIT)
}

pub fn full_spectrum_with_limit(
    l: &LiouvillianOperator,
    with_eigenmatrices: bool,
    limit: usize,
) -> Result<SpectrumResult> {
    let n = l.superdim();
    if n > limit {
        return Err(Error::DenseTooLarge { dim: n, limit });
    }
    let dense = l.matrix.to_dense();
    let m = l.dim();
    let (vals, vecs) = if with_eigenmatrices {
        let (v, w) = linalg::eig(&dense)?;
        (v, Some(w))
    } else {
        (linalg::eigenvalues(&dense)?, None)
    };

    let order = spectrum_order(&vals);
    let eigenvalues: Vec<C64> = order.iter().map(|&k| vals[k]).collect();
    let gap = eigenvalues.get(1).map_or(0.0, |z| -z.re);

    let (right, left) = match vecs {
        Some(v) => {
            let vinv = linalg::inverse(&v)?;
            let right = order.iter().map(|&k| unvectorize(&v.column(k).to_vec(), m)).collect();
            let left = order
                .iter()
                .map(|&k| unvectorize(&vinv.row(k).iter().map(|z| z.conj()).collect::<Vec<_>>(), m))
                .collect();
            (Some(right), Some(left))
        }
        None => (None, None),
    };
    Ok(SpectrumResult { eigenvalues, right_eigenmatrices: right, left_eigenmatrices: left, gap })
}

/// Permutation sorting by ascending `|Re|`, groups with equal `|Re|` (to 1e-9
/// relative) by ascending `Im`.
fn spectrum_order(vals: &[C64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].re.abs().total_cmp(&vals[b].re.abs()));
    let tie = 1e-9 * vals.iter().map(|z| z.abs()).fold(1.0, f64::max);
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && (vals[order[end]].re.abs() - vals[order[start]].re.abs()) <= tie {
            end += 1;
        }
        order[start..end].sort_by(|&a, &b| vals[a].im.total_cmp(&vals[b].im));
        start = end;
    }
    order
}

/// Normalized steady state of `L`.
///
/// Small generators use dense null-space extraction; larger ones use shifted
/// inverse iteration with a GMRES inner solve.
pub fn steady_state(l: &LiouvillianOperator) -> Result<Array2<C64>> {
    if l.superdim() <= DENSE_SUPEROP_LIMIT {
        steady_state_dense(l)
    } else {
        steady_state_iterative(l)
    }
}

pub fn steady_state_dense(l: &LiouvillianOperator) -> Result<Array2<C64>> {
    let m = l.dim();
    let mut a = l.matrix.to_dense();
    let vals = linalg::eigenvalues(&a)?;
    let zero = 1e-9 * l.matrix.max_abs().max(1.0);
    let nullity = vals.iter().filter(|z| z.norm() < zero).count();
    if nullity != 1 {
        return Err(Error::Multiplicity(nullity));
    }
    // The diagonal rows of L sum to zero (trace preservation), so row 0 is
    // redundant and can carry the normalization Tr rho = 1 instead.
    let n = a.nrows();
    for j in 0..n {
        a[[0, j]] = C64::from(0.0);
    }
    for i in 0..m {
        a[[0, i * m + i]] = C64::from(1.0);
    }
    let mut rhs = ndarray::Array1::zeros(n);
    rhs[0] = C64::from(1.0);
    let x = linalg::solve(&a, &rhs)?;
    Ok(normalize_density(unvectorize(&x.to_vec(), m)))
}

pub fn steady_state_iterative(l: &LiouvillianOperator) -> Result<Array2<C64>> {
    let m = l.dim();
    let shift = 1e-3 * l.matrix.max_abs().max(1.0);
    let solve = |start: Vec<C64>| -> Result<Array2<C64>> {
        let mut x = start;
        let mut prev: Option<Array2<C64>> = None;
        for _ in 0..50 {
            // (L + shift) y = x, i.e. inverse iteration targeting eigenvalue 0
            let y = gmres(
                |v, out| {
                    l.matrix.matvec_into(v, out);
                    for (o, vi) in out.iter_mut().zip(v) {
                        *o += shift * vi;
                    }
                },
                &x,
                80,
                1e-14,
                20_000,
            )?;
            let rho = normalize_density(unvectorize(&y, m));
            let done = prev.as_ref().is_some_and(|p| linalg::frobenius(&(&rho - p)) < 1e-13);
            x = vectorize(&rho);
            if done {
                return Ok(rho);
            }
            prev = Some(rho);
        }
        prev.ok_or(Error::NoConvergence { iterations: 50, residual: f64::NAN })
    };
    let mixed = Array2::<C64>::eye(m) / C64::from(m as f64);
    let a = solve(vectorize(&mixed))?;
    // a second start biased towards the top Fock state exposes a degenerate
    // null space
    let mut top = Array2::<C64>::zeros((m, m));
    top[[m - 1, m - 1]] = C64::from(1.0);
    let b = solve(vectorize(&top))?;
    if linalg::frobenius(&(&a - &b)) > 1e-8 {
        return Err(Error::Multiplicity(2));
    }
    Ok(a)
}

fn normalize_density(rho: Array2<C64>) -> Array2<C64> {
    let herm = (&rho + &linalg::dagger(&rho)) / C64::from(2.0);
    let tr = linalg::trace(&herm);
    herm / tr
}

/// `Tr_p[rho_sp]`, the reduced `n_sys x n_sys` system state.
pub fn partial_trace_pseudomodes(rho: &Array2<C64>, trunc: &TruncationSpec) -> Result<Array2<C64>> {
    let m = trunc.dim();
    if rho.dim() != (m, m) {
        return Err(Error::Shape { expected: format!("{m} x {m}"), got: format!("{:?}", rho.dim()) });
    }
    let p = trunc.pseudomode_dim();
    let ns = trunc.n_sys();
    Ok(Array2::from_shape_fn((ns, ns), |(a, b)| (0..p).map(|k| rho[[a * p + k, b * p + k]]).sum()))
}

/// `rho_s ⊗ |0...0><0...0|` with the pseudomodes in their vacuum.
pub fn embed_with_vacuum(rho_s: &Array2<C64>, trunc: &TruncationSpec) -> Result<Array2<C64>> {
    let ns = trunc.n_sys();
    if rho_s.dim() != (ns, ns) {
        return Err(Error::Shape { expected: format!("{ns} x {ns}"), got: format!("{:?}", rho_s.dim()) });
    }
    let p = trunc.pseudomode_dim();
    let mut out = Array2::zeros((trunc.dim(), trunc.dim()));
    for a in 0..ns {
        for b in 0..ns {
            out[[a * p, b * p]] = rho_s[[a, b]];
        }
    }
    Ok(out)
}

/// Largest population held by the top Fock level of any single factor, a
/// measure of truncation leakage.
pub fn top_level_population(rho: &Array2<C64>, trunc: &TruncationSpec) -> f64 {
    let basis = FockBasis::new(trunc);
    let mut pops = vec![0.0; basis.cutoffs.len()];
    for idx in 0..basis.dim.min(rho.nrows()) {
        let occ = basis.occupations(idx);
        for (k, (&n, &cut)) in occ.iter().zip(&basis.cutoffs).enumerate() {
            if n + 1 == cut {
                pops[k] += rho[[idx, idx]].re;
            }
        }
    }
    pops.into_iter().fold(0.0, f64::max)
}

/// `|0...0><0...0|` on the full truncated space.
pub fn vacuum(trunc: &TruncationSpec) -> Array2<C64> {
    let m = trunc.dim();
    let mut v = Array2::zeros((m, m));
    v[[0, 0]] = C64::from(1.0);
    v
}
