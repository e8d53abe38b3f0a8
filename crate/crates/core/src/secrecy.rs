//! Secrecy objectives.
//!
//! Every quantity here is computed from the whitened combined channels
//! `L_b = Omega_B^{-1/2} W_b^H H` and `L_e = Omega_E^{-1/2} W_e^H G`, so both
//! receivers see the noiseless images `s_c = sqrt(beta P) L x_c` in white
//! unit-variance noise. The pairwise cut-off-rate terms are then
//! `exp(-||s_i - s_j||^2 / 4) = exp(-(beta P / 4) d^H A d)`.

use alloc::vec::Vec;
use core::f64::consts::{LN_2, LOG2_E};

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::SecureLink;
use crate::numerics::{self, hermitian_part, trace_product, CMatrix, CVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bob,
    Eve,
}

/// Kernels and images needed to evaluate the approximate secrecy rate of one
/// link for any composite precoder, with the AN covariance held fixed.
#[derive(Debug, Clone)]
pub struct AsrContext {
    /// `L_b^H L_b`.
    pub a_h: CMatrix,
    /// `L_e^H L_e`.
    pub a_g: CMatrix,
    /// `beta P / 4`.
    pub scale: f64,
    pub l_b: CMatrix,
    pub l_e: CMatrix,
    /// Transmit candidates in canonical order.
    pub candidates: Vec<CVector>,
    /// Candidate labels `(subarray, symbol)`.
    pub labels: Vec<(usize, usize)>,
    pub indices: Vec<usize>,
    pub symbols: Vec<C64>,
    pub n_aa: usize,
    images_b: Vec<CVector>,
    images_e: Vec<CVector>,
}

impl AsrContext {
    pub fn new(link: &SecureLink<'_>) -> Self {
        let inst = link.instance;
        Self::from_whitened(
            link.whitened_bob(),
            link.whitened_eve(),
            inst.cfg.beta * inst.cfg.p_total,
            &inst.selection.indices,
            &inst.constellation.symbols,
            inst.cfg.n_aa,
            &link.precoder.p_composite,
        )
    }

    /// Builds the context from whitened channels and a composite precoder.
    pub fn from_whitened(
        l_b: CMatrix,
        l_e: CMatrix,
        beta_p: f64,
        indices: &[usize],
        symbols: &[C64],
        n_aa: usize,
        p: &CVector,
    ) -> Self {
        let a_h = hermitian_part(&(l_b.adjoint() * &l_b));
        let a_g = hermitian_part(&(l_e.adjoint() * &l_e));
        let mut ctx = AsrContext {
            a_h,
            a_g,
            scale: beta_p / 4.0,
            l_b,
            l_e,
            candidates: Vec::new(),
            labels: Vec::new(),
            indices: indices.to_vec(),
            symbols: symbols.to_vec(),
            n_aa,
            images_b: Vec::new(),
            images_e: Vec::new(),
        };
        ctx.set_precoder(p);
        ctx
    }

    /// Replaces the composite precoder, keeping channels and whiteners.
    pub fn with_precoder(&self, p: &CVector) -> Self {
        let mut out = self.clone();
        out.set_precoder(p);
        out
    }

    fn set_precoder(&mut self, p: &CVector) {
        let n = p.len();
        let amp = C64::new((4.0 * self.scale).sqrt(), 0.0);
        self.candidates.clear();
        self.labels.clear();
        self.images_b.clear();
        self.images_e.clear();
        for &i in &self.indices {
            let block = p.rows(i * self.n_aa, self.n_aa);
            let img_b = self.l_b.columns(i * self.n_aa, self.n_aa) * block * amp;
            let img_e = self.l_e.columns(i * self.n_aa, self.n_aa) * block * amp;
            for (j, &b) in self.symbols.iter().enumerate() {
                let mut x = CVector::zeros(n);
                x.rows_mut(i * self.n_aa, self.n_aa).copy_from(&(block * b));
                self.candidates.push(x);
                self.labels.push((i, j));
                self.images_b.push(&img_b * b);
                self.images_e.push(&img_e * b);
            }
        }
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn kernel(&self, side: Side) -> &CMatrix {
        match side {
            Side::Bob => &self.a_h,
            Side::Eve => &self.a_g,
        }
    }

    /// Noiseless whitened images `sqrt(beta P) L x_c`.
    pub fn images(&self, side: Side) -> &[CVector] {
        match side {
            Side::Bob => &self.images_b,
            Side::Eve => &self.images_e,
        }
    }

    fn whitened(&self, side: Side) -> &CMatrix {
        match side {
            Side::Bob => &self.l_b,
            Side::Eve => &self.l_e,
        }
    }
}

/// `sum_{i,j} exp(-(beta P / 4) d_ij^H A d_ij)` over all ordered pairs.
pub fn kappa(ctx: &AsrContext, side: Side) -> f64 {
    let img = ctx.images(side);
    let mut acc = 0.0;
    for si in img {
        for sj in img {
            acc += (-(si - sj).norm_squared() / 4.0).exp();
        }
    }
    acc
}

pub fn cutoff_rate(ctx: &AsrContext, side: Side) -> f64 {
    2.0 * (ctx.n_candidates() as f64).log2() - kappa(ctx, side).log2()
}

/// Approximate secrecy rate `log2 kappa_E - log2 kappa_B`.
pub fn asr(ctx: &AsrContext) -> f64 {
    kappa(ctx, Side::Eve).log2() - kappa(ctx, Side::Bob).log2()
}

/// Gradient of [`asr`] with respect to the composite precoder, as a complex
/// vector whose real and imaginary parts are the partial derivatives with
/// respect to the real and imaginary parts of `P`. Whiteners stay fixed.
pub fn asr_gradient(ctx: &AsrContext) -> CVector {
    let n = ctx.l_b.ncols();
    let mut grad = CVector::zeros(n);
    if ctx.scale == 0.0 {
        return grad;
    }
    for (side, sign) in [(Side::Eve, 1.0), (Side::Bob, -1.0)] {
        let l = ctx.whitened(side);
        let img = ctx.images(side);
        let amp = (4.0 * ctx.scale).sqrt();
        let mut g_side = CVector::zeros(n);
        let mut k = 0.0;
        for (a, si) in img.iter().enumerate() {
            let (m, ka) = ctx.labels[a];
            for (b, sj) in img.iter().enumerate() {
                let diff = si - sj;
                let w = (-diff.norm_squared() / 4.0).exp();
                k += w;
                if a == b || w == 0.0 {
                    continue;
                }
                let (mp, kb) = ctx.labels[b];
                // u = L d with d = x_a - x_b; diff = amp * u
                let u = &diff / C64::new(amp, 0.0);
                let coef = C64::new(-ctx.scale * 2.0 * w, 0.0);
                let lu_m = l.columns(m * ctx.n_aa, ctx.n_aa).adjoint() * &u;
                let lu_mp = l.columns(mp * ctx.n_aa, ctx.n_aa).adjoint() * &u;
                let mut blk = g_side.rows_mut(m * ctx.n_aa, ctx.n_aa);
                blk += lu_m * (ctx.symbols[ka].conj() * coef);
                let mut blk = g_side.rows_mut(mp * ctx.n_aa, ctx.n_aa);
                blk -= lu_mp * (ctx.symbols[kb].conj() * coef);
            }
        }
        grad += g_side * C64::new(sign / (k * LN_2), 0.0);
    }
    grad
}

/// Precomputed pair kernels `B_{m,m'}^{k,k'}` and `E_{m,m'}^{k,k'}` for the
/// factored form of the approximate secrecy rate.
#[derive(Debug, Clone)]
pub struct PairBlock {
    pub m: usize,
    pub m_prime: usize,
    /// Indexed by `k * M + k'`.
    pub b: Vec<CMatrix>,
    pub e: Vec<CMatrix>,
}

impl PairBlock {
    /// `N_AA` for diagonal blocks, `2 N_AA` otherwise.
    pub fn dim(&self) -> usize {
        self.b[0].nrows()
    }

    pub fn is_diagonal(&self) -> bool {
        self.m == self.m_prime
    }
}

#[derive(Debug, Clone)]
pub struct PairKernels {
    pub blocks: Vec<PairBlock>,
    /// `beta P / 4`.
    pub scale: f64,
    pub n_aa: usize,
    pub m: usize,
}

fn sub_kernel(a: &CMatrix, m: usize, mp: usize, n_aa: usize) -> CMatrix {
    if m == mp {
        return a.view((m * n_aa, m * n_aa), (n_aa, n_aa)).into_owned();
    }
    let mut out = CMatrix::zeros(2 * n_aa, 2 * n_aa);
    for (r, br) in [m, mp].into_iter().enumerate() {
        for (c, bc) in [m, mp].into_iter().enumerate() {
            out.view_mut((r * n_aa, c * n_aa), (n_aa, n_aa))
                .copy_from(&a.view((br * n_aa, bc * n_aa), (n_aa, n_aa)));
        }
    }
    out
}

/// Symbol-difference matrix `J_{k,k'}`.
pub fn j_matrix(bk: C64, bkp: C64, n_aa: usize, diagonal: bool) -> CMatrix {
    if diagonal {
        CMatrix::identity(n_aa, n_aa) * (bk - bkp)
    } else {
        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = bk;
        d[(1, 1)] = -bkp;
        numerics::kron(&d, &CMatrix::identity(n_aa, n_aa))
    }
}

impl PairKernels {
    pub fn new(ctx: &AsrContext) -> Self {
        let n_aa = ctx.n_aa;
        let mut blocks = Vec::new();
        for &m in &ctx.indices {
            for &mp in &ctx.indices {
                let kb = sub_kernel(&ctx.a_h, m, mp, n_aa);
                let ke = sub_kernel(&ctx.a_g, m, mp, n_aa);
                let mut b = Vec::new();
                let mut e = Vec::new();
                for &bk in &ctx.symbols {
                    for &bkp in &ctx.symbols {
                        let j = j_matrix(bk, bkp, n_aa, m == mp);
                        b.push(hermitian_part(&(j.adjoint() * &kb * &j)));
                        e.push(hermitian_part(&(j.adjoint() * &ke * &j)));
                    }
                }
                blocks.push(PairBlock { m, m_prime: mp, b, e });
            }
        }
        PairKernels {
            blocks,
            scale: ctx.scale,
            n_aa,
            m: ctx.symbols.len(),
        }
    }

    /// Stacked precoder blocks `q_{m,m'}` for `block`.
    pub fn q_for(&self, block: &PairBlock, p: &CVector) -> CVector {
        let n_aa = self.n_aa;
        if block.is_diagonal() {
            p.rows(block.m * n_aa, n_aa).into_owned()
        } else {
            let mut q = CVector::zeros(2 * n_aa);
            q.rows_mut(0, n_aa).copy_from(&p.rows(block.m * n_aa, n_aa));
            q.rows_mut(n_aa, n_aa).copy_from(&p.rows(block.m_prime * n_aa, n_aa));
            q
        }
    }

    /// Linear cost `c log2(e) sum_{k,k'} (E - B)` of one block, so that the
    /// Jensen surrogate equals `-sum_blocks Tr(Q C)`.
    pub fn linear_cost(&self, block: &PairBlock) -> CMatrix {
        let dim = block.dim();
        let mut acc = CMatrix::zeros(dim, dim);
        for (b, e) in block.b.iter().zip(&block.e) {
            acc += e - b;
        }
        acc * C64::new(self.scale * LOG2_E, 0.0)
    }
}

fn quad(q: &CVector, k: &CMatrix) -> f64 {
    (q.adjoint() * k * q)[(0, 0)].re
}

/// ASR evaluated through the factored pair kernels, `Tr(Q B) = q^H B q`.
pub fn asr_factored(kernels: &PairKernels, p: &CVector) -> f64 {
    let mut kb = 0.0;
    let mut ke = 0.0;
    for block in &kernels.blocks {
        let q = kernels.q_for(block, p);
        for (b, e) in block.b.iter().zip(&block.e) {
            kb += (-kernels.scale * quad(&q, b)).exp();
            ke += (-kernels.scale * quad(&q, e)).exp();
        }
    }
    ke.log2() - kb.log2()
}

/// Jensen surrogate `log2(e) sum (-beta P / 4)(Tr(Q E) - Tr(Q B))`.
pub fn asr_jensen_lower(kernels: &PairKernels, p: &CVector) -> f64 {
    let mut acc = 0.0;
    for block in &kernels.blocks {
        let q = kernels.q_for(block, p);
        for (b, e) in block.b.iter().zip(&block.e) {
            acc += -kernels.scale * (quad(&q, e) - quad(&q, b));
        }
    }
    acc * LOG2_E
}

/// Jensen surrogate written against lifted blocks `Q_{m,m'}`, one per block.
pub fn asr_jensen_lifted(kernels: &PairKernels, q: &[CMatrix]) -> f64 {
    kernels
        .blocks
        .iter()
        .zip(q)
        .map(|(block, qm)| -trace_product(qm, &kernels.linear_cost(block)).re)
        .sum()
}

/// Monte-Carlo secrecy-rate estimate for one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SrEstimate {
    pub asr: f64,
    /// `[I_B - I_E]^+`, clamped to `[0, log2(N_t M)]`.
    pub sr_exact: f64,
    /// Standard error of the unclamped mean difference.
    pub std_err: f64,
    pub n_noise_samples: usize,
    pub mi_bob: f64,
    pub mi_eve: f64,
}

pub const MIN_NOISE_SAMPLES: usize = 100;

/// `log2(N) - (1/N) sum_i log2 sum_j exp(-||s_i - s_j + n||^2 + ||n||^2)`.
fn mi_sample(images: &[CVector], noise: &CVector) -> f64 {
    let nc = images.len();
    let nn = noise.norm_squared();
    let mut acc = 0.0;
    let mut exps = Vec::with_capacity(nc);
    for si in images {
        exps.clear();
        for sj in images {
            let mut e = 0.0;
            for ((a, b), z) in si.iter().zip(sj.iter()).zip(noise.iter()) {
                e += (a - b + z).norm_sqr();
            }
            exps.push(nn - e);
        }
        acc += numerics::log2_sum_exp(exps.iter().copied());
    }
    (nc as f64).log2() - acc / nc as f64
}

/// Estimates `I(x; y_b) - I(x; y_e)` with `n_noise` whitened noise samples
/// shared between the two receivers.
pub fn exact_sr_monte_carlo<R: Rng + ?Sized>(
    ctx: &AsrContext,
    n_noise: usize,
    rng: &mut R,
) -> Result<SrEstimate> {
    if n_noise < MIN_NOISE_SAMPLES {
        return Err(Error::InvalidConfig(alloc::format!(
            "at least {MIN_NOISE_SAMPLES} noise samples required, got {n_noise}"
        )));
    }
    let dim_b = ctx.l_b.nrows();
    let dim_e = ctx.l_e.nrows();
    let dim = dim_b.max(dim_e);
    let (mut sum_b, mut sum_e, mut sum_d, mut sum_d2) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..n_noise {
        let n = numerics::sample_complex_gaussian_vector(dim, 1.0, rng);
        let ib = mi_sample(ctx.images(Side::Bob), &n.rows(0, dim_b).into_owned());
        let ie = mi_sample(ctx.images(Side::Eve), &n.rows(0, dim_e).into_owned());
        let d = ib - ie;
        sum_b += ib;
        sum_e += ie;
        sum_d += d;
        sum_d2 += d * d;
    }
    let k = n_noise as f64;
    let mean = sum_d / k;
    let var = ((sum_d2 - k * mean * mean) / (k - 1.0)).max(0.0);
    let cap = (ctx.n_candidates() as f64).log2();
    Ok(SrEstimate {
        asr: asr(ctx),
        sr_exact: mean.clamp(0.0, cap),
        std_err: (var / k).sqrt(),
        n_noise_samples: n_noise,
        mi_bob: sum_b / k,
        mi_eve: sum_e / k,
    })
}

fn check_subarray(link: &SecureLink<'_>, i: usize) -> Result<()> {
    let limit = link.cfg().n_rf;
    if i >= limit {
        return Err(Error::OutOfRange { index: i, limit });
    }
    Ok(())
}

/// `||W^H chan_i f_i p_i||^2` for subarray `i`.
fn active_gain(w: &CMatrix, chan_block: &CMatrix, link: &SecureLink<'_>, i: usize) -> f64 {
    let f = link.precoder.f_block(i) * link.precoder.f_bb[i];
    (w.adjoint() * chan_block * f).norm_squared()
}

/// Expected AN power `tr(W^H chan F_RF T_BB T_BB^H F_RF^H chan^H W)` after
/// combining.
fn an_power(w: &CMatrix, chan: &CMatrix, link: &SecureLink<'_>) -> f64 {
    (w.adjoint() * chan * &link.precoder.f_rf * &link.an.t_bb).norm_squared()
}

/// SINR at Bob and ANSNR at Eve with subarray `i` active. The AN term uses
/// its expectation over the AN symbols.
pub fn sinr_ansnr(link: &SecureLink<'_>, i: usize) -> Result<(f64, f64)> {
    check_subarray(link, i)?;
    let inst = link.instance;
    let cfg = &inst.cfg;
    let (wb, we) = (&inst.combiners.w_b, &inst.combiners.w_e);
    let (h, g) = (&inst.channels.h, &inst.channels.g);
    let bp = cfg.beta * cfg.p_total;
    let anp = (1.0 - cfg.beta) * cfg.p_total;
    let n_rf = cfg.n_rf as f64;
    let sinr = bp * active_gain(wb, &inst.channels.h_block(i), link, i)
        / (anp * an_power(wb, h, link) + n_rf * cfg.sigma2_b);
    let ansnr = bp * active_gain(we, &inst.channels.g_block(i), link, i)
        / (anp * an_power(we, g, link) + n_rf * cfg.sigma2_e);
    Ok((sinr, ansnr))
}

/// Signal-to-leakage-and-noise ratio of subarray `n`.
pub fn slnr(link: &SecureLink<'_>, n: usize) -> Result<f64> {
    check_subarray(link, n)?;
    let inst = link.instance;
    let cfg = &inst.cfg;
    let bp = cfg.beta * cfg.p_total;
    let sig = bp * active_gain(&inst.combiners.w_b, &inst.channels.h_block(n), link, n);
    let leak = bp * active_gain(&inst.combiners.w_e, &inst.channels.g_block(n), link, n);
    Ok(sig / (leak + cfg.n_rf as f64 * cfg.sigma2_b))
}
