//! Complex dense linear algebra shared by every other module.
//!
//! Matrices are `nalgebra` dense matrices over `Complex<f64>`. The routines
//! here add the conventions the rest of the crate relies on: singular values
//! sorted in descending order, a relative numerical-rank cutoff for the
//! pseudo-inverse, Hermitian eigendecompositions with sorted spectra, and
//! explicitly threaded random number generators.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;

/// Singular values below this fraction of the largest one are treated as zero.
pub const PINV_RCOND: f64 = 1e-12;

const SVD_MAX_SWEEPS: usize = 100;
const EIG_MAX_ITER: usize = 10_000;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Thin singular value decomposition `A = U diag(sigma) V^H`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: CMatrix,
    /// Non-negative, descending.
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> CMatrix {
        let k = self.sigma.len();
        let mut us = self.u.clone();
        for j in 0..k {
            let s = self.sigma[j];
            us.column_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        us * self.v.adjoint()
    }
}

pub fn svd(a: &CMatrix) -> Result<SvdResult> {
    if a.is_empty() {
        return Err(Error::Dimension("svd of an empty matrix".into()));
    }
    if a.nrows() < a.ncols() {
        let t = jacobi_svd(&a.adjoint())?;
        return Ok(SvdResult {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }
    jacobi_svd(a)
}

/// One-sided Jacobi SVD of a tall matrix. Accurate for rank-deficient
/// input, where the bidiagonal QR in `nalgebra` can return a wrong
/// factorisation.
fn jacobi_svd(a: &CMatrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = CMatrix::identity(n, n);
    let negligible = (f64::EPSILON * a.norm()).powi(2);
    let mut converged = false;
    for _ in 0..SVD_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.norm();
                if alpha.min(beta) <= negligible || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let e = gamma / g;
                rotate_columns(&mut w, p, q, c, s, e);
                rotate_columns(&mut v, p, q, c, s, e);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "svd",
            iterations: SVD_MAX_SWEEPS,
        });
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let floor = norms[order[0]] * f64::EPSILON * m.max(n) as f64;
    let mut u = CMatrix::zeros(m, n);
    let mut v_sorted = CMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let mut filled = 0;
    for (k, &j) in order.iter().enumerate() {
        v_sorted.set_column(k, &v.column(j));
        let s = norms[j];
        if s > floor && s > 0.0 {
            u.set_column(k, &(w.column(j) / C64::new(s, 0.0)));
            sigma.push(s);
            filled += 1;
        } else {
            sigma.push(if s > floor { s } else { 0.0 });
        }
    }
    complete_orthonormal(&mut u, filled);
    Ok(SvdResult { u, sigma, v: v_sorted })
}

/// `[x_p, x_q] <- [c x_p - s conj(e) x_q, s e x_p + c x_q]`.
fn rotate_columns(x: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, e: C64) {
    for r in 0..x.nrows() {
        let xp = x[(r, p)];
        let xq = x[(r, q)];
        x[(r, p)] = xp * c - e.conj() * xq * s;
        x[(r, q)] = e * xp * s + xq * c;
    }
}

/// Fills columns `filled..` of `u` with an orthonormal completion of the
/// first `filled` columns.
fn complete_orthonormal(u: &mut CMatrix, filled: usize) {
    let (m, n) = u.shape();
    let mut k = filled;
    let mut e = 0;
    while k < n && e < m {
        let mut cand = CVector::zeros(m);
        cand[e] = C64::new(1.0, 0.0);
        e += 1;
        for _ in 0..2 {
            for j in 0..k {
                let proj = u.column(j).dotc(&cand);
                cand -= u.column(j) * proj;
            }
        }
        let nrm = cand.norm();
        if nrm > 1e-8 {
            u.set_column(k, &(cand / C64::new(nrm, 0.0)));
            k += 1;
        }
    }
}

/// Moore-Penrose pseudo-inverse with a relative rank cutoff of [`PINV_RCOND`].
pub fn pinv(a: &CMatrix) -> Result<CMatrix> {
    let (m, n) = a.shape();
    if a.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Ok(CMatrix::zeros(n, m));
    }
    let dec = svd(a)?;
    let cutoff = dec.sigma[0] * PINV_RCOND;
    let mut out = CMatrix::zeros(n, m);
    for (k, &s) in dec.sigma.iter().enumerate() {
        if s <= cutoff {
            break;
        }
        let vk = dec.v.column(k);
        let uk = dec.u.column(k);
        out += (vk * uk.adjoint()) * C64::new(1.0 / s, 0.0);
    }
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` pairs with `values[k]`.
    pub vectors: CMatrix,
}

pub fn eigh(a: &CMatrix) -> Result<HermitianEigen> {
    let n = a.nrows();
    if n != a.ncols() || n == 0 {
        return Err(Error::Dimension("eigh needs a nonempty square matrix".into()));
    }
    let herm = hermitian_part(a);
    let dec = nalgebra::SymmetricEigen::try_new(herm, f64::EPSILON, EIG_MAX_ITER).ok_or(
        Error::NoConvergence {
            routine: "hermitian eigendecomposition",
            iterations: EIG_MAX_ITER,
        },
    )?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| dec.eigenvalues[j].total_cmp(&dec.eigenvalues[i]));
    let values = order.iter().map(|&i| dec.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &dec.eigenvectors.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

/// Rebuilds `V diag(f(lambda)) V^H` from a Hermitian eigendecomposition.
pub fn spectral_map(eig: &HermitianEigen, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = eig.vectors.nrows();
    let mut scaled = eig.vectors.clone();
    for (k, &lam) in eig.values.iter().enumerate() {
        let s = f(lam);
        scaled.column_mut(k).iter_mut().for_each(|z| *z *= s);
    }
    let out = scaled * eig.vectors.adjoint();
    debug_assert_eq!(out.nrows(), n);
    hermitian_part(&out)
}

/// Returns `B = A^{-1/2}` (Hermitian), so that `B A B^H = I`.
pub fn inv_sqrt_hermitian(a: &CMatrix) -> Result<CMatrix> {
    let eig = eigh(a)?;
    let min = *eig.values.last().expect("nonempty");
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    Ok(spectral_map(&eig, |lam| 1.0 / lam.sqrt()))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Block-diagonal matrix with the given blocks along the diagonal.
pub fn block_diag(blocks: &[CMatrix]) -> CMatrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Circularly-symmetric complex Gaussian entries with per-entry variance `variance`.
pub fn sample_complex_gaussian<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut R,
) -> CMatrix {
    assert!(variance > 0.0, "variance must be positive");
    let scale = (variance / 2.0).sqrt();
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * scale, im * scale)
    })
}

pub fn sample_complex_gaussian_vector<R: Rng + ?Sized>(
    len: usize,
    variance: f64,
    rng: &mut R,
) -> CVector {
    let m = sample_complex_gaussian(len, 1, variance, rng);
    CVector::from_iterator(len, m.iter().copied())
}

/// Phase of `z`, with `arg(0) = 0`.
pub fn phase(z: C64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else {
        z.im.atan2(z.re)
    }
}

/// `log2(sum_k exp(x_k))` without overflow.
pub fn log2_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.map(|v| (v - max).exp()).sum();
    (max + sum.ln()) * core::f64::consts::LOG2_E
}
