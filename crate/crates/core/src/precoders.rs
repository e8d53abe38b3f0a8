//! Hybrid precoders.
//!
//! * [`max_asr_ga`] projected gradient ascent on the approximate secrecy rate
//!   with a shrinking step size.
//! * [`max_asr_admm`] consensus ADMM on the Jensen surrogate, one lifted
//!   block per ordered pair of selected subarrays.
//! * [`sdr_altmin`] alternating minimisation of the distance to the
//!   fully-digital SVD precoder, digital step solved as an SDP.
//!
//! All three end with [`extract_hybrid`], which splits a composite precoder
//! into unit-modulus analog blocks and per-chain gains.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{HybridPrecoder, Instance, SecureLink};
use crate::numerics::{self, CMatrix, CVector, C64};
use crate::sdp::{self, InteriorPoint, ProximalProblem, SdpProblem, SdpSolver, TraceConstraint};
use crate::secrecy::{self, AsrContext, PairKernels};

/// One logged iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    /// Objective after the iteration (ASR for GA, surrogate for ADMM,
    /// distance for SDR-AltMin).
    pub objective: f64,
    /// Step size for GA, penalty for ADMM, zero otherwise.
    pub step: f64,
    /// `||P_t - P_{t-1}||` for ADMM, objective change otherwise.
    pub residual: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<IterRecord>,
}

impl RunLog {
    fn push(&mut self, objective: f64, step: f64, residual: f64, accepted: bool) {
        let iteration = self.records.len();
        self.records.push(IterRecord {
            iteration,
            objective,
            step,
            residual,
            accepted,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Result of a precoder run.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderRun {
    pub precoder: HybridPrecoder,
    /// Composite precoder before hybrid extraction.
    pub p: CVector,
    pub log: RunLog,
}

/// Splits `p` into analog phases `f_i = e^{j arg(p_i)} / sqrt(n_aa)` and
/// gains `||p_i||`. A zero block gets zero phases and zero gain.
pub fn extract_hybrid(p: &CVector, n_aa: usize) -> HybridPrecoder {
    let n_rf = p.len() / n_aa;
    let mut phases = Vec::with_capacity(n_rf);
    let mut gains = Vec::with_capacity(n_rf);
    for i in 0..n_rf {
        let block = p.rows(i * n_aa, n_aa);
        phases.push(block.iter().map(|&z| numerics::phase(z)).collect::<Vec<_>>());
        gains.push(C64::new(block.norm(), 0.0));
    }
    HybridPrecoder::from_phases(&phases, &gains)
}

/// Dominant right singular vector of `H`, scaled to `||P||^2 = n_rf`.
pub fn svd_initial(inst: &Instance) -> Result<CVector> {
    let v = numerics::svd(&inst.channels.h)?.v;
    let mut p = v.column(0).into_owned();
    scale_to(&mut p, inst.cfg.n_rf as f64);
    Ok(p)
}

fn scale_to(p: &mut CVector, power: f64) {
    let n = p.norm();
    if n > 0.0 {
        *p *= C64::new(power.sqrt() / n, 0.0);
    }
}

fn normalized(mut p: CVector, power: f64) -> CVector {
    scale_to(&mut p, power);
    p
}

/// ASR context with whiteners built from the analog part of `p`.
pub fn context_for(inst: &Instance, p: &CVector) -> Result<AsrContext> {
    let hybrid = extract_hybrid(p, inst.cfg.n_aa);
    let link = SecureLink::new(inst, hybrid)?;
    Ok(AsrContext::new(&link).with_precoder(p))
}

/// Gradient of the ASR at `p`, whiteners taken from `ctx`.
pub fn max_asr_grad(ctx: &AsrContext, p: &CVector) -> CVector {
    secrecy::asr_gradient(&ctx.with_precoder(p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaSettings {
    pub step_init: f64,
    pub step_min: f64,
    /// Divisor applied to the step after each inner loop.
    pub step_shrink: f64,
    pub improve_tol: f64,
    /// Cap on accepted steps per inner loop.
    pub max_inner: usize,
}

impl Default for GaSettings {
    fn default() -> Self {
        GaSettings {
            step_init: 3.0,
            step_min: 0.01,
            step_shrink: 3.0,
            improve_tol: 1e-4,
            max_inner: 500,
        }
    }
}

impl GaSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_init > self.step_min && self.step_min > 0.0)
            || !(self.step_shrink > 1.0)
            || !(self.improve_tol > 0.0)
        {
            return Err(Error::InvalidConfig("invalid gradient-ascent settings".into()));
        }
        Ok(())
    }
}

fn finite_or(stage: &'static str, value: f64, p: &CVector) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            stage,
            iterate: p.iter().copied().collect(),
        })
    }
}

/// Gradient ascent from `p0` with the whiteners of `ctx` held fixed.
pub fn gradient_ascent(
    ctx: &AsrContext,
    p0: &CVector,
    power: f64,
    settings: &GaSettings,
) -> Result<(CVector, RunLog)> {
    settings.validate()?;
    let mut log = RunLog::default();
    let mut p = p0.clone();
    let mut cur = ctx.with_precoder(&p);
    let mut r = finite_or("initial objective", secrecy::asr(&cur), &p)?;
    log.push(r, 0.0, 0.0, true);
    let mut step = settings.step_init;
    while step >= settings.step_min {
        for _ in 0..settings.max_inner {
            let grad = secrecy::asr_gradient(&cur);
            if grad.norm() == 0.0 {
                break;
            }
            let trial = normalized(&p + grad * C64::new(step, 0.0), power);
            let next = ctx.with_precoder(&trial);
            let r_new = finite_or("gradient step", secrecy::asr(&next), &trial)?;
            if r_new > r {
                let gain = r_new - r;
                p = trial;
                cur = next;
                r = r_new;
                log.push(r, step, gain, true);
                if gain <= settings.improve_tol {
                    break;
                }
            } else {
                log.push(r, step, r_new - r, false);
                break;
            }
        }
        step /= settings.step_shrink;
    }
    Ok((p, log))
}

pub fn max_asr_ga(inst: &Instance, settings: &GaSettings) -> Result<PrecoderRun> {
    let p0 = svd_initial(inst)?;
    let ctx = context_for(inst, &p0)?;
    let (p, log) = gradient_ascent(&ctx, &p0, inst.cfg.n_rf as f64, settings)?;
    Ok(PrecoderRun {
        precoder: extract_hybrid(&p, inst.cfg.n_aa),
        p,
        log,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmSettings {
    pub rho: f64,
    pub consensus_tol: f64,
    pub max_outer: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        AdmmSettings {
            rho: 0.5,
            consensus_tol: 0.01,
            max_outer: 200,
        }
    }
}

/// Per-block ADMM state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmBlock {
    pub m: usize,
    pub m_prime: usize,
    pub q: CMatrix,
    pub y: CMatrix,
}

/// Per-iteration feasibility diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmDiagnostics {
    /// Largest `|Tr Q - target|` over blocks.
    pub trace_violation: f64,
    /// Smallest eigenvalue over all blocks.
    pub min_eigenvalue: f64,
    /// Largest `||Q - q q^H||_F` against the new global reference.
    pub consensus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmRun {
    pub run: PrecoderRun,
    pub blocks: Vec<AdmmBlock>,
    pub diagnostics: Vec<AdmmDiagnostics>,
}

/// Local references `q_{m,m'}` from `p`, with selected-block power set to
/// the number of selected subarrays so that `||p_m|| = 1` on average.
fn local_refs(kernels: &PairKernels, p: &CVector, indices: &[usize]) -> Vec<CVector> {
    let n_aa = kernels.n_aa;
    let sel_power: f64 = indices.iter().map(|&i| p.rows(i * n_aa, n_aa).norm_squared()).sum();
    let s = if sel_power > 0.0 {
        (indices.len() as f64 / sel_power).sqrt()
    } else {
        1.0
    };
    let scaled = p * C64::new(s, 0.0);
    kernels.blocks.iter().map(|b| kernels.q_for(b, &scaled)).collect()
}

/// Consensus ADMM on precomputed kernels, starting from `p0`.
pub fn admm_on_kernels(
    kernels: &PairKernels,
    indices: &[usize],
    p0: &CVector,
    power: f64,
    settings: &AdmmSettings,
) -> Result<(CVector, RunLog, Vec<AdmmBlock>, Vec<AdmmDiagnostics>)> {
    if !(settings.rho > 0.0) || !(settings.consensus_tol > 0.0) {
        return Err(Error::InvalidConfig("invalid ADMM settings".into()));
    }
    let n = p0.len();
    let n_aa = kernels.n_aa;
    let costs: Vec<CMatrix> = kernels.blocks.iter().map(|b| kernels.linear_cost(b)).collect();
    let mut p = normalized(p0.clone(), power);
    let refs = local_refs(kernels, &p, indices);
    let mut blocks: Vec<AdmmBlock> = kernels
        .blocks
        .iter()
        .zip(&refs)
        .map(|(b, q)| AdmmBlock {
            m: b.m,
            m_prime: b.m_prime,
            q: q * q.adjoint(),
            y: CMatrix::zeros(b.dim(), b.dim()),
        })
        .collect();
    let mut log = RunLog::default();
    let mut diags = Vec::new();
    let mut history = Vec::new();
    for _ in 0..settings.max_outer {
        let refs = local_refs(kernels, &p, indices);
        let mut acc = CVector::zeros(n);
        let mut trace_violation: f64 = 0.0;
        let mut min_eig = f64::INFINITY;
        for (k, (blk, q_ref)) in blocks.iter_mut().zip(&refs).enumerate() {
            let target = if blk.m == blk.m_prime { 1.0 } else { 2.0 };
            let prob = ProximalProblem {
                cost: &costs[k] + &blk.y,
                reference: q_ref * q_ref.adjoint(),
                rho: settings.rho,
                trace: target,
            };
            let q = sdp::solve_proximal(&prob).map_err(|e| Error::AdmmBlock {
                m: blk.m,
                m_prime: blk.m_prime,
                source: alloc::boxed::Box::new(e),
            })?;
            let eig = numerics::eigh(&q)?;
            min_eig = min_eig.min(*eig.values.last().expect("nonempty"));
            trace_violation = trace_violation.max((q.trace().re - target).abs());
            let r1 = sdp::rank_one_extract(&q)?;
            let v = sdp::align_phase(&r1.vector, q_ref);
            let mut dst = acc.rows_mut(blk.m * n_aa, n_aa);
            dst += v.rows(0, n_aa);
            if blk.m != blk.m_prime {
                let mut dst = acc.rows_mut(blk.m_prime * n_aa, n_aa);
                dst += v.rows(n_aa, n_aa);
            }
            blk.q = q;
        }
        if acc.norm() == 0.0 {
            return Err(Error::NonFinite {
                stage: "ADMM global step",
                iterate: p.iter().copied().collect(),
            });
        }
        let p_new = normalized(acc, power);
        let new_refs = local_refs(kernels, &p_new, indices);
        let mut consensus: f64 = 0.0;
        for (blk, q_ref) in blocks.iter_mut().zip(&new_refs) {
            let pr = q_ref * q_ref.adjoint();
            let diff = &blk.q - &pr;
            consensus = consensus.max(diff.norm());
            blk.y += diff * C64::new(settings.rho, 0.0);
        }
        let residual = (&p_new - &p).norm();
        p = p_new;
        let objective = finite_or("ADMM surrogate", secrecy::asr_jensen_lower(kernels, &p), &p)?;
        log.push(objective, settings.rho, residual, true);
        diags.push(AdmmDiagnostics {
            trace_violation,
            min_eigenvalue: min_eig,
            consensus,
        });
        history.push(residual);
        if residual < settings.consensus_tol {
            return Ok((p, log, blocks, diags));
        }
    }
    Err(Error::AdmmMaxIterations {
        iterations: settings.max_outer,
        residual_history: history,
    })
}

pub fn max_asr_admm(inst: &Instance, settings: &AdmmSettings) -> Result<AdmmRun> {
    let p0 = svd_initial(inst)?;
    let ctx = context_for(inst, &p0)?;
    let kernels = PairKernels::new(&ctx);
    let (p, log, blocks, diagnostics) = admm_on_kernels(
        &kernels,
        &inst.selection.indices,
        &p0,
        inst.cfg.n_rf as f64,
        settings,
    )?;
    Ok(AdmmRun {
        run: PrecoderRun {
            precoder: extract_hybrid(&p, inst.cfg.n_aa),
            p,
            log,
        },
        blocks,
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdrSettings {
    pub max_alt: usize,
    /// Stop when the relative objective decrease falls below this.
    pub rel_tol: f64,
    pub sdp: InteriorPoint,
}

impl Default for SdrSettings {
    fn default() -> Self {
        SdrSettings {
            max_alt: 50,
            rel_tol: 1e-6,
            sdp: InteriorPoint::default(),
        }
    }
}

/// `f_l = e^{j arg(v_l conj(p_l))} / sqrt(n_aa)` for each subarray.
fn analog_step(f_opt: &CVector, f_bb: &CVector, n_aa: usize) -> Vec<Vec<f64>> {
    (0..f_bb.len())
        .map(|l| {
            f_opt
                .rows(l * n_aa, n_aa)
                .iter()
                .map(|&v| numerics::phase(v * f_bb[l].conj()))
                .collect()
        })
        .collect()
}

fn phases_to_frf(phases: &[Vec<f64>]) -> CMatrix {
    let ones = vec![C64::new(1.0, 0.0); phases.len()];
    HybridPrecoder::from_phases(phases, &ones).f_rf
}

/// Digital step: `min ||f - F x||^2  s.t. ||x||^2 = n_rf` as a lifted SDP.
pub fn digital_step(f_rf: &CMatrix, f_opt: &CVector, solver: &impl SdpSolver) -> Result<CVector> {
    let n_rf = f_rf.ncols();
    let d = n_rf + 1;
    let fhf = f_rf.adjoint() * f_rf;
    let fhv = f_rf.adjoint() * f_opt;
    let mut c = CMatrix::zeros(d, d);
    c.view_mut((0, 0), (n_rf, n_rf)).copy_from(&fhf);
    for i in 0..n_rf {
        c[(i, n_rf)] = -fhv[i];
        c[(n_rf, i)] = -fhv[i].conj();
    }
    c[(n_rf, n_rf)] = C64::new(f_opt.norm_squared(), 0.0);
    let c = numerics::hermitian_part(&c);
    let mut a1 = CMatrix::identity(d, d);
    a1[(n_rf, n_rf)] = C64::new(0.0, 0.0);
    let mut a2 = CMatrix::zeros(d, d);
    a2[(n_rf, n_rf)] = C64::new(1.0, 0.0);
    let prob = SdpProblem::new(
        c,
        vec![
            TraceConstraint {
                a: a1,
                b: n_rf as f64,
            },
            TraceConstraint { a: a2, b: 1.0 },
        ],
    )?;
    let sol = solver.solve(&prob)?;
    let w = sdp::rank_one_extract(&sol.x)?.vector;
    let t = w[n_rf];
    let rot = if t.norm() > 0.0 { t.conj() / t.norm() } else { C64::new(1.0, 0.0) };
    let x = CVector::from_iterator(n_rf, w.rows(0, n_rf).iter().map(|&z| z * rot));
    Ok(normalized(x, n_rf as f64))
}

fn distance(f_opt: &CVector, f_rf: &CMatrix, f_bb: &CVector) -> f64 {
    (f_opt - f_rf * f_bb).norm()
}

/// Alternating minimisation towards `f_opt` from all-ones digital gains.
pub fn altmin_towards(f_opt: &CVector, n_aa: usize, settings: &SdrSettings) -> Result<(HybridPrecoder, RunLog)> {
    let n_rf = f_opt.len() / n_aa;
    let mut f_bb = normalized(CVector::from_element(n_rf, C64::new(1.0, 0.0)), n_rf as f64);
    let mut phases = analog_step(f_opt, &f_bb, n_aa);
    let mut f_rf = phases_to_frf(&phases);
    let mut obj = distance(f_opt, &f_rf, &f_bb);
    let mut log = RunLog::default();
    log.push(obj, 0.0, 0.0, true);
    for _ in 0..settings.max_alt {
        let cand_bb = digital_step(&f_rf, f_opt, &settings.sdp)?;
        let cand_obj = distance(f_opt, &f_rf, &cand_bb);
        if cand_obj <= obj {
            f_bb = cand_bb;
        }
        let cand_phases = analog_step(f_opt, &f_bb, n_aa);
        let cand_rf = phases_to_frf(&cand_phases);
        if distance(f_opt, &cand_rf, &f_bb) <= distance(f_opt, &f_rf, &f_bb) {
            phases = cand_phases;
            f_rf = cand_rf;
        }
        let new_obj = distance(f_opt, &f_rf, &f_bb);
        let delta = obj - new_obj;
        log.push(new_obj, 0.0, delta, true);
        let rel = delta / obj.max(f64::MIN_POSITIVE);
        obj = new_obj;
        if obj <= 1e-12 || rel < settings.rel_tol {
            break;
        }
    }
    let gains: Vec<C64> = f_bb.iter().copied().collect();
    Ok((HybridPrecoder::from_phases(&phases, &gains), log))
}

pub fn sdr_altmin(inst: &Instance, settings: &SdrSettings) -> Result<PrecoderRun> {
    let f_opt = svd_initial(inst)?;
    let (precoder, log) = altmin_towards(&f_opt, inst.cfg.n_aa, settings)?;
    Ok(PrecoderRun {
        p: precoder.p_composite.clone(),
        precoder,
        log,
    })
}

/// Selects one of the three precoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecoderKind {
    MaxAsrGa,
    MaxAsrAdmm,
    SdrAltMin,
}

impl PrecoderKind {
    pub const ALL: [PrecoderKind; 3] = [PrecoderKind::MaxAsrGa, PrecoderKind::MaxAsrAdmm, PrecoderKind::SdrAltMin];

    pub fn name(self) -> &'static str {
        match self {
            PrecoderKind::MaxAsrGa => "max-asr-ga",
            PrecoderKind::MaxAsrAdmm => "max-asr-admm",
            PrecoderKind::SdrAltMin => "sdr-altmin",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Runs the precoder with default settings.
    pub fn run(self, inst: &Instance) -> Result<PrecoderRun> {
        match self {
            PrecoderKind::MaxAsrGa => max_asr_ga(inst, &GaSettings::default()),
            PrecoderKind::MaxAsrAdmm => max_asr_admm(inst, &AdmmSettings::default()).map(|r| r.run),
            PrecoderKind::SdrAltMin => sdr_altmin(inst, &SdrSettings::default()),
        }
    }
}
