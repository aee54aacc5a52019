//! Compressed-sparse-row complex matrices, just enough to assemble and apply
//! vectorized Lindblad superoperators.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, indptr: vec![0; nrows + 1], indices: vec![], data: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![C64::from(1.0); n])
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self::from_triplets(diag.len(), diag.len(), diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Self {
        let mut rows: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); nrows];
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            *rows[r].entry(c).or_insert(C64::from(0.0)) += v;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = vec![];
        let mut data = vec![];
        indptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != C64::from(0.0) {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { nrows, ncols, indptr, indices, data }
    }

    pub fn from_dense(a: &Array2<C64>) -> Self {
        let (n, m) = a.dim();
        Self::from_triplets(n, m, a.indexed_iter().map(|((i, j), &v)| (i, j, v)))
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k]))
        })
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut a = Array2::zeros((self.nrows, self.ncols));
        for (r, c, v) in self.triplets() {
            a[[r, c]] += v;
        }
        a
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v)))
    }

    /// Entrywise complex conjugate (not transposed).
    pub fn conj(&self) -> Self {
        CsrMatrix { data: self.data.iter().map(|z| z.conj()).collect(), ..self.clone() }
    }

    pub fn adjoint(&self) -> Self {
        self.transpose().conj()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_triplets(self.nrows, self.ncols, self.triplets().map(|(r, c, v)| (r, c, s * v)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols), "shape mismatch in add");
        Self::from_triplets(self.nrows, self.ncols, self.triplets().chain(other.triplets()))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "shape mismatch in matmul");
        let mut trip = vec![];
        for (r, k, a) in self.triplets() {
            for idx in other.indptr[k]..other.indptr[k + 1] {
                trip.push((r, other.indices[idx], a * other.data[idx]));
            }
        }
        Self::from_triplets(self.nrows, other.ncols, trip)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = (other.nrows, other.ncols);
        let mut trip = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, a) in self.triplets() {
            for (r2, c2, b) in other.triplets() {
                trip.push((r1 * p + r2, c1 * q + c2, a * b));
            }
        }
        Self::from_triplets(self.nrows * p, self.ncols * q, trip)
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = C64::from(0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            *yr = acc;
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::from(0.0); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn kron_matches_dense_definition() {
        let a = array![[c(1.0, 0.0), c(0.0, 2.0)], [c(3.0, 0.0), c(0.0, 0.0)]];
        let b = array![[c(0.0, 1.0), c(5.0, 0.0), c(0.0, 0.0)], [c(1.0, 1.0), c(0.0, 0.0), c(2.0, 0.0)]];
        let k = CsrMatrix::from_dense(&a).kron(&CsrMatrix::from_dense(&b)).to_dense();
        assert_eq!(k.dim(), (4, 6));
        for i1 in 0..2 {
            for j1 in 0..2 {
                for i2 in 0..2 {
                    for j2 in 0..3 {
                        assert_eq!(k[[i1 * 2 + i2, j1 * 3 + j2]], a[[i1, j1]] * b[[i2, j2]]);
                    }
                }
            }
        }
    }

    #[test]
    fn matmul_add_and_matvec_agree_with_dense() {
        let a = array![[c(1.0, 1.0), c(0.0, 0.0)], [c(2.0, 0.0), c(0.0, -1.0)]];
        let b = array![[c(0.0, 1.0), c(4.0, 0.0)], [c(1.0, 0.0), c(1.0, 0.0)]];
        let (sa, sb) = (CsrMatrix::from_dense(&a), CsrMatrix::from_dense(&b));
        assert_eq!(sa.matmul(&sb).to_dense(), a.dot(&b));
        assert_eq!(sa.add(&sb).to_dense(), &a + &b);
        assert_eq!(sa.adjoint().to_dense(), a.t().mapv(|z| z.conj()));
        let x = vec![c(1.0, -2.0), c(0.5, 0.0)];
        let y = sa.matvec(&x);
        let yd = a.dot(&ndarray::Array1::from(x));
        assert_eq!(y, yd.to_vec());
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(2, 2, [(0, 1, c(1.0, 0.0)), (0, 1, c(-1.0, 0.0)), (1, 0, c(2.0, 0.0)), (1, 0, c(1.0, 0.0))]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.to_dense()[[1, 0]], c(3.0, 0.0));
    }
}

/// Restarted GMRES for `A x = b` with `A` given as a matrix-free operator.
///
/// Returns the iterate once `||b - A x|| <= tol * ||b||`.
pub fn gmres(
    apply: impl Fn(&[C64], &mut [C64]),
    b: &[C64],
    restart: usize,
    tol: f64,
    max_iter: usize,
) -> crate::Result<Vec<C64>> {
    let n = b.len();
    let norm = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let dot = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>();
    let bnorm = norm(b);
    let mut x = vec![C64::from(0.0); n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut ax = vec![C64::from(0.0); n];
    let mut total = 0;
    let mut resid = bnorm;
    while total < max_iter {
        apply(&x, &mut ax);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        resid = beta;
        if beta <= tol * bnorm {
            return Ok(x);
        }
        let mut basis: Vec<Vec<C64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut h: Vec<Vec<C64>> = vec![];
        let (mut cs, mut sn): (Vec<C64>, Vec<C64>) = (vec![], vec![]);
        let mut g = vec![C64::from(beta)];
        let mut w = vec![C64::from(0.0); n];
        for k in 0..restart {
            apply(&basis[k], &mut w);
            total += 1;
            let mut col = vec![C64::from(0.0); k + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                col[i] = hij;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= hij * vj;
                }
            }
            let wn = norm(&w);
            col[k + 1] = C64::from(wn);
            for i in 0..k {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i].conj() * col[i] + cs[i].conj() * col[i + 1];
                col[i] = t;
            }
            let (a, bb) = (col[k], col[k + 1]);
            let d = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if d == 0.0 { (C64::from(1.0), C64::from(0.0)) } else { (a / d, bb / d) };
            // unitary rotation [[c, s], [-conj(s), conj(c)]] zeroing col[k + 1]
            let (c, s) = (c.conj(), s.conj());
            col[k] = c * a + s * bb;
            col[k + 1] = C64::from(0.0);
            g.push(-s.conj() * g[k]);
            g[k] = c * g[k];
            cs.push(c);
            sn.push(s);
            h.push(col);
            resid = g[k + 1].norm();
            if resid <= tol * bnorm || wn == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|z| z / wn).collect());
        }
        // back substitution on the triangular least-squares system
        let m = h.len();
        let mut y = vec![C64::from(0.0); m];
        for i in (0..m).rev() {
            let mut acc = g[i];
            for j in i + 1..m {
                acc -= h[j][i] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
    }
    apply(&x, &mut ax);
    let final_resid = norm(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>());
    if final_resid <= tol * bnorm {
        Ok(x)
    } else {
        Err(crate::Error::NoConvergence { iterations: total, residual: final_resid.max(resid) / bnorm })
    }
}
