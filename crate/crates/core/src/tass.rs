//! Transmit-antenna-subarray selection.
//!
//! The ranking methods score each subarray with the SVD-matched scoring
//! precoder (analog vector from the dominant right singular vector of `h_i`,
//! unit digital gain) and the AN projector built over all subarrays, then keep
//! the `n_t` best. Max-ASR searches all `C(n_rf, n_t)` subsets.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{HybridPrecoder, Instance, SecureLink, SystemConfig, TassSelection};
use crate::numerics::{self, C64};
use crate::precoders;
use crate::secrecy::{self, AsrContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TassMethod {
    MaxAsr,
    MaxEv,
    MaxPSinrAnsnr,
    Leakage,
    Random,
}

impl TassMethod {
    pub const ALL: [TassMethod; 5] = [
        TassMethod::MaxAsr,
        TassMethod::MaxEv,
        TassMethod::MaxPSinrAnsnr,
        TassMethod::Leakage,
        TassMethod::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TassMethod::MaxAsr => "max-asr",
            TassMethod::MaxEv => "max-ev",
            TassMethod::MaxPSinrAnsnr => "max-p-sinr-ansnr",
            TassMethod::Leakage => "leakage",
            TassMethod::Random => "random",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Runs the method on `inst`; only [`TassMethod::Random`] consumes `rng`.
    pub fn select<R: Rng + ?Sized>(self, inst: &Instance, rng: &mut R) -> Result<TassScorecard> {
        match self {
            TassMethod::MaxAsr => tass_max_asr(inst),
            TassMethod::MaxEv => tass_max_ev(inst),
            TassMethod::MaxPSinrAnsnr => tass_max_p_sinr_ansnr(inst),
            TassMethod::Leakage => tass_leakage(inst),
            TassMethod::Random => tass_random(&inst.cfg, rng),
        }
    }
}

/// A subset skipped by Max-ASR and the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedSubset {
    pub indices: Vec<usize>,
    pub reason: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TassScorecard {
    pub method: TassMethod,
    /// Per-subarray scores, or per-subset ASR values for Max-ASR.
    pub scores: Vec<f64>,
    /// Subsets matching `scores` for Max-ASR; empty otherwise.
    pub subsets: Vec<Vec<usize>>,
    pub skipped: Vec<SkippedSubset>,
    pub chosen: TassSelection,
    pub flops_estimate: Option<f64>,
}

/// Indices of the `k` largest scores, ties to the smaller index, returned
/// ascending.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut out: Vec<usize> = order.into_iter().take(k).collect();
    out.sort_unstable();
    out
}

fn ranked(method: TassMethod, inst: &Instance, scores: Vec<f64>) -> Result<TassScorecard> {
    let chosen = TassSelection::new(&top_k(&scores, inst.cfg.n_t), &inst.cfg)?;
    Ok(TassScorecard {
        method,
        scores,
        subsets: Vec::new(),
        skipped: Vec::new(),
        chosen,
        flops_estimate: flops_estimate(method, &inst.cfg).ok(),
    })
}

/// Per-subarray scoring precoder: `f_i` from the dominant right singular
/// vector of `h_i`, unit digital gain.
pub fn scoring_precoder(inst: &Instance) -> Result<HybridPrecoder> {
    let n_rf = inst.cfg.n_rf;
    let mut phases = Vec::with_capacity(n_rf);
    for i in 0..n_rf {
        let v = numerics::svd(&inst.channels.h_block(i))?.v;
        phases.push(v.column(0).iter().map(|&z| numerics::phase(z)).collect());
    }
    Ok(HybridPrecoder::from_phases(&phases, &vec![C64::new(1.0, 0.0); n_rf]))
}

fn scoring_link(inst: &Instance) -> Result<(Instance, HybridPrecoder)> {
    let all = inst.with_selection(TassSelection::all(&inst.cfg));
    let prec = scoring_precoder(inst)?;
    Ok((all, prec))
}

pub fn tass_max_ev(inst: &Instance) -> Result<TassScorecard> {
    let mut scores = Vec::with_capacity(inst.cfg.n_rf);
    for i in 0..inst.cfg.n_rf {
        scores.push(numerics::svd(&inst.channels.h_block(i))?.sigma[0]);
    }
    ranked(TassMethod::MaxEv, inst, scores)
}

/// Scores `f_i = SINR_i * ANSNR_i`.
pub fn tass_max_p_sinr_ansnr(inst: &Instance) -> Result<TassScorecard> {
    let (all, prec) = scoring_link(inst)?;
    let link = SecureLink::new(&all, prec)?;
    let mut scores = Vec::with_capacity(inst.cfg.n_rf);
    for i in 0..inst.cfg.n_rf {
        let (s, a) = secrecy::sinr_ansnr(&link, i)?;
        scores.push(s * a);
    }
    ranked(TassMethod::MaxPSinrAnsnr, inst, scores)
}

pub fn tass_leakage(inst: &Instance) -> Result<TassScorecard> {
    let (all, prec) = scoring_link(inst)?;
    let link = SecureLink::new(&all, prec)?;
    let mut scores = Vec::with_capacity(inst.cfg.n_rf);
    for i in 0..inst.cfg.n_rf {
        scores.push(secrecy::slnr(&link, i)?);
    }
    ranked(TassMethod::Leakage, inst, scores)
}

pub fn tass_random<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<TassScorecard> {
    let idx = rand::seq::index::sample(rng, cfg.n_rf, cfg.n_t).into_vec();
    Ok(TassScorecard {
        method: TassMethod::Random,
        scores: Vec::new(),
        subsets: Vec::new(),
        skipped: Vec::new(),
        chosen: TassSelection::new(&idx, cfg)?,
        flops_estimate: None,
    })
}

/// Precoder used to score a candidate subset in Max-ASR.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SubsetScoring {
    /// SVD-initialised composite precoder.
    #[default]
    SvdInitial,
    /// Full gradient ascent on every subset; far slower.
    GradientAscent(precoders::GaSettings),
}

/// ASR of `sel` under the SVD-initialised composite precoder, with AN and
/// whiteners rebuilt for that selection.
pub fn subset_asr(inst: &Instance, sel: &TassSelection) -> Result<f64> {
    subset_asr_with(inst, sel, SubsetScoring::SvdInitial)
}

pub fn subset_asr_with(inst: &Instance, sel: &TassSelection, scoring: SubsetScoring) -> Result<f64> {
    let sub = inst.with_selection(sel.clone());
    let hybrid = match scoring {
        SubsetScoring::SvdInitial => precoders::extract_hybrid(&precoders::svd_initial(&sub)?, sub.cfg.n_aa),
        SubsetScoring::GradientAscent(settings) => precoders::max_asr_ga(&sub, &settings)?.precoder,
    };
    let link = SecureLink::new(&sub, hybrid)?;
    Ok(secrecy::asr(&AsrContext::new(&link)))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let Some(i) = (0..k).rev().find(|&i| c[i] < i + n - k) else {
            return out;
        };
        c[i] += 1;
        for j in i + 1..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

pub fn tass_max_asr(inst: &Instance) -> Result<TassScorecard> {
    tass_max_asr_with(inst, SubsetScoring::SvdInitial)
}

pub fn tass_max_asr_with(inst: &Instance, scoring: SubsetScoring) -> Result<TassScorecard> {
    let cfg = &inst.cfg;
    let mut scores = Vec::new();
    let mut subsets = Vec::new();
    let mut skipped = Vec::new();
    let mut best: Option<(f64, usize)> = None;
    for subset in combinations(cfg.n_rf, cfg.n_t) {
        let sel = TassSelection::new(&subset, cfg)?;
        match subset_asr_with(inst, &sel, scoring) {
            Ok(r) => {
                if best.is_none_or(|(b, _)| r > b) {
                    best = Some((r, subsets.len()));
                }
                scores.push(r);
                subsets.push(subset);
            }
            Err(e @ Error::DegenerateProjector { .. }) | Err(e @ Error::NotPositiveDefinite { .. }) => {
                skipped.push(SkippedSubset {
                    indices: subset,
                    reason: e,
                });
            }
            Err(e) => return Err(e),
        }
    }
    let (_, k) = best.ok_or(Error::AllSubsetsDegenerate)?;
    let chosen = TassSelection::new(&subsets[k], cfg)?;
    Ok(TassScorecard {
        method: TassMethod::MaxAsr,
        scores,
        subsets,
        skipped,
        chosen,
        flops_estimate: flops_estimate(TassMethod::MaxAsr, cfg).ok(),
    })
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Closed-form FLOP counts. Leakage and random have no model.
pub fn flops_estimate(method: TassMethod, cfg: &SystemConfig) -> Result<f64> {
    let n_rf = cfg.n_rf as f64;
    let n_aa = cfg.n_aa as f64;
    let n = n_aa * n_rf;
    let n_b = cfg.n_b as f64;
    let mt = (cfg.m * cfg.n_t) as f64;
    match method {
        TassMethod::MaxEv => Ok(n_rf * (2.0 * n_b * n_aa * n_aa + 48.0 * n_b * n_b * n_aa + 54.0 * n_b.powi(3))),
        TassMethod::MaxPSinrAnsnr => Ok(2.0
            * n_rf
            * (8.0 * n_rf * n * n - 2.0 * n_rf * n + 8.0 * n_rf * n_rf * n - 2.0 * n_rf * n_rf)),
        TassMethod::MaxAsr => {
            let c_x = mt * (8.0 * n * n - 2.0 * n + 1.0);
            let c_omega = 4.0 * (4.0 * n_rf * n * n + n_rf * n_rf * n - n_rf * n + n_rf * n_rf + 2.0 * n_rf);
            let c_kappa = 2.0 * mt * mt * (8.0 * n_rf * n_rf + 2.0 * n_rf + 1.0);
            Ok(binomial(cfg.n_rf, cfg.n_t) * (c_x + 2.0 * (c_omega + c_kappa)))
        }
        TassMethod::Leakage | TassMethod::Random => Err(Error::UnsupportedMethod(method.name())),
    }
}

/// One row of the complexity table.
#[derive(Debug, Clone, PartialEq)]
pub struct FlopsRow {
    pub method: String,
    pub flops: f64,
}

/// FLOP estimates of the three methods that have a model, ascending by method
/// complexity class.
pub fn flops_table(cfg: &SystemConfig) -> Vec<FlopsRow> {
    [TassMethod::MaxEv, TassMethod::MaxPSinrAnsnr, TassMethod::MaxAsr]
        .into_iter()
        .map(|m| FlopsRow {
            method: m.name().into(),
            flops: flops_estimate(m, cfg).expect("modelled method"),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{draw_channels, ChannelPair};
    use crate::numerics::CMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(n_rf: usize, seed: u64) -> Instance {
        let cfg = SystemConfig::with_defaults(n_rf).with_snr_db(10.0);
        let ch = draw_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        Instance::new(cfg.clone(), ch, TassSelection::all(&cfg)).unwrap()
    }

    /// Channels whose subarray `i` has singular value `lam[i]`.
    fn channels_with_gains(lam: &[f64], g: CMatrix) -> ChannelPair {
        let n_rf = lam.len();
        let mut h = CMatrix::zeros(2, 4 * n_rf);
        for (i, &l) in lam.iter().enumerate() {
            h[(0, 4 * i)] = C64::new(l, 0.0);
        }
        ChannelPair::new(h, g, 4).unwrap()
    }

    #[test]
    fn top_k_rules() {
        assert_eq!(top_k(&[3.0, 1.0, 2.0, 5.0], 2), vec![0, 3]);
        assert_eq!(top_k(&[1.0; 5], 3), vec![0, 1, 2]);
        let logs: Vec<f64> = [3.0f64, 1.0, 2.0, 5.0].iter().map(|x| x.ln()).collect();
        assert_eq!(top_k(&logs, 2), vec![0, 3]);
    }

    #[test]
    fn max_ev_sorting() {
        let mut cfg = SystemConfig::with_defaults(4);
        cfg.n_t = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = numerics::sample_complex_gaussian(2, 16, 1.0, &mut rng);
        let ch = channels_with_gains(&[3.0, 1.0, 2.0, 5.0], g.clone());
        let inst = Instance::new(cfg.clone(), ch, TassSelection::all(&cfg)).unwrap();
        let card = tass_max_ev(&inst).unwrap();
        assert_eq!(card.chosen.indices, vec![0, 3]);
        let flat = channels_with_gains(&[1.0; 4], g);
        let inst = Instance::new(cfg.clone(), flat, TassSelection::all(&cfg)).unwrap();
        assert_eq!(tass_max_ev(&inst).unwrap().chosen.indices, vec![0, 1]);
    }

    #[test]
    fn max_ev_matches_block_svd_and_scale() {
        let inst = instance(7, 2);
        let card = tass_max_ev(&inst).unwrap();
        for i in 0..7 {
            let hb = inst.channels.h_block(i);
            let gram = &hb * hb.adjoint();
            let lam = numerics::eigh(&gram).unwrap().values[0].sqrt();
            assert!((card.scores[i] - lam).abs() < 1e-10);
        }
        let mut scaled = inst.clone();
        scaled.channels = inst.channels.scaled(3.7);
        assert_eq!(tass_max_ev(&scaled).unwrap().chosen, card.chosen);
    }

    #[test]
    fn sinr_ansnr_product_scores() {
        let inst = instance(7, 3);
        let card = tass_max_p_sinr_ansnr(&inst).unwrap();
        let all = inst.with_selection(TassSelection::all(&inst.cfg));
        let link = SecureLink::new(&all, scoring_precoder(&inst).unwrap()).unwrap();
        let mut brute = Vec::new();
        for i in 0..7 {
            let (s, a) = secrecy::sinr_ansnr(&link, i).unwrap();
            brute.push(s * a);
        }
        assert_eq!(card.scores, brute);
        assert_eq!(card.chosen.indices, top_k(&brute, 4));
        assert!((f64::log2(4.0 * 2.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_bob_gain_never_chosen() {
        let mut inst = instance(7, 4);
        inst.channels.h.columns_mut(8, 4).fill(C64::new(0.0, 0.0));
        let card = tass_max_p_sinr_ansnr(&inst).unwrap();
        assert_eq!(card.scores[2], 0.0);
        assert!(!card.chosen.contains(2));
    }

    #[test]
    fn leakage_without_eve_ranks_by_bob_power() {
        let mut inst = instance(7, 5);
        inst.channels.g.fill(C64::new(0.0, 0.0));
        let card = tass_leakage(&inst).unwrap();
        let prec = scoring_precoder(&inst).unwrap();
        let power: Vec<f64> = (0..7)
            .map(|i| (inst.combiners.w_b.column(i).adjoint() * inst.channels.h_block(i) * prec.f_block(i)).norm_squared())
            .collect();
        assert_eq!(card.chosen.indices, top_k(&power, 4));
    }

    #[test]
    fn random_rules() {
        let cfg = SystemConfig::with_defaults(4);
        let card = tass_random(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(card.chosen.indices, vec![0, 1, 2, 3]);
        let cfg = SystemConfig::with_defaults(7);
        let a = tass_random(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = tass_random(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.chosen, b.chosen);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut counts = [0usize; 7];
        let draws = 10_000;
        for _ in 0..draws {
            for &i in &tass_random(&cfg, &mut rng).unwrap().chosen.indices {
                counts[i] += 1;
            }
        }
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((f - 4.0 / 7.0).abs() < 0.02, "frequency {f}");
        }
    }

    #[test]
    fn combinations_lexicographic() {
        assert_eq!(combinations(4, 2), vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(combinations(7, 4).len(), 35);
    }

    #[test]
    fn max_asr_single_subset_and_argmax() {
        let inst = instance(4, 7);
        let card = tass_max_asr(&inst).unwrap();
        assert_eq!(card.subsets, vec![vec![0, 1, 2, 3]]);

        let inst = instance(7, 8);
        let card = tass_max_asr(&inst).unwrap();
        let best = card.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let k = card.subsets.iter().position(|s| *s == card.chosen.indices).unwrap();
        assert_eq!(card.scores[k], best);
        assert!(card.scores[..k].iter().all(|&s| s < best));
    }

    #[test]
    fn ga_scoring_never_scores_below_svd() {
        let inst = instance(5, 8);
        let svd = tass_max_asr(&inst).unwrap();
        let ga = tass_max_asr_with(&inst, SubsetScoring::GradientAscent(Default::default())).unwrap();
        assert_eq!(svd.subsets, ga.subsets);
        for (a, b) in svd.scores.iter().zip(&ga.scores) {
            assert!(b >= &(a - 1e-9), "{b} < {a}");
        }
    }

    #[test]
    fn max_asr_skips_degenerate_subsets() {
        let mut cfg = SystemConfig::with_defaults(3).with_snr_db(10.0);
        cfg.n_t = 2;
        let ch = draw_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(9));
        let inst = Instance::new(cfg.clone(), ch, TassSelection::all(&cfg)).unwrap();
        assert!(matches!(tass_max_asr(&inst), Err(Error::AllSubsetsDegenerate)));
    }

    #[test]
    fn flops_values() {
        let cfg = SystemConfig::with_defaults(7);
        assert_eq!(flops_estimate(TassMethod::MaxEv, &cfg).unwrap(), 8848.0);
        let ev = flops_estimate(TassMethod::MaxEv, &cfg).unwrap();
        let ps = flops_estimate(TassMethod::MaxPSinrAnsnr, &cfg).unwrap();
        let asr = flops_estimate(TassMethod::MaxAsr, &cfg).unwrap();
        assert_eq!(ps, 761_460.0);
        assert_eq!(asr, 24_561_880.0);
        assert!(ev < ps && ps < asr);
        assert!(flops_estimate(TassMethod::Leakage, &cfg).is_err());
        assert!(flops_estimate(TassMethod::Random, &cfg).is_err());

        let square = SystemConfig::with_defaults(4);
        let per_subset = {
            let mut c = square.clone();
            c.n_rf = 4;
            flops_estimate(TassMethod::MaxAsr, &c).unwrap()
        };
        assert!(per_subset > 0.0);
        assert_eq!(binomial(4, 4), 1.0);
        assert_eq!(binomial(7, 4), 35.0);
    }

    #[test]
    fn flops_increase_with_n_rf() {
        let mut prev = [0.0; 3];
        for n_rf in 4..=12 {
            let mut cfg = SystemConfig::with_defaults(n_rf);
            cfg.n_t = 4;
            for (k, m) in [TassMethod::MaxEv, TassMethod::MaxPSinrAnsnr, TassMethod::MaxAsr].into_iter().enumerate() {
                let f = flops_estimate(m, &cfg).unwrap();
                assert!(f > prev[k]);
                prev[k] = f;
            }
        }
    }

    #[test]
    fn method_names_roundtrip() {
        for m in TassMethod::ALL {
            assert_eq!(TassMethod::from_name(m.name()), Some(m));
        }
    }
}
