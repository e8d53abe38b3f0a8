//! System model of the hybrid spatial-modulation link.
//!
//! Alice has `n_rf` subarrays of `n_aa` antennas each (`N = n_aa * n_rf`
//! antennas in total). `n_t` of the subarrays are selected; in every symbol
//! period one selected subarray is active and sends a PSK symbol through its
//! share of the composite precoder `P = F_RF F_BB`. Artificial noise is sent
//! through all selected subarrays via `F_RF T_BB`, confined to the null space
//! of Bob's combined channel.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{
    self, block_diag, hermitian_part, inv_sqrt_hermitian, pinv, CMatrix, CVector, C64,
};

/// Largest power of two not exceeding `n`.
pub fn floor_pow2(n: usize) -> usize {
    assert!(n >= 1);
    1 << (usize::BITS - 1 - n.leading_zeros())
}

/// Scalar parameters of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// RF chains, equal to the number of subarrays.
    pub n_rf: usize,
    /// Antennas per subarray.
    pub n_aa: usize,
    /// Selected subarrays; a power of two.
    pub n_t: usize,
    pub n_b: usize,
    pub n_e: usize,
    /// Constellation order.
    pub m: usize,
    /// Fraction of the transmit power spent on the confidential message.
    pub beta: f64,
    /// Total transmit power in watts.
    pub p_total: f64,
    pub sigma2_b: f64,
    pub sigma2_e: f64,
}

impl SystemConfig {
    /// Default operating point for `n_rf` subarrays: four antennas each,
    /// QPSK, two antennas at Bob and Eve, `beta = 0.01`, `P = n_t` and unit
    /// noise variance.
    pub fn with_defaults(n_rf: usize) -> Self {
        let n_t = floor_pow2(n_rf.max(1));
        SystemConfig {
            n_rf,
            n_aa: 4,
            n_t,
            n_b: 2,
            n_e: 2,
            m: 4,
            beta: 0.01,
            p_total: n_t as f64,
            sigma2_b: 1.0,
            sigma2_e: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        for (name, v) in [
            ("n_rf", self.n_rf),
            ("n_aa", self.n_aa),
            ("n_t", self.n_t),
            ("n_b", self.n_b),
            ("n_e", self.n_e),
            ("m", self.m),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if !self.n_t.is_power_of_two() {
            return bad(format!("n_t = {} is not a power of two", self.n_t));
        }
        if self.n_t > self.n_rf {
            return bad(format!("n_t = {} exceeds n_rf = {}", self.n_t, self.n_rf));
        }
        if !self.m.is_power_of_two() {
            return bad(format!("m = {} is not a power of two", self.m));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta = {} outside [0, 1]", self.beta));
        }
        if !(self.p_total > 0.0 && self.p_total.is_finite()) {
            return bad(format!("p_total = {} must be positive", self.p_total));
        }
        if !(self.sigma2_b > 0.0 && self.sigma2_e > 0.0) {
            return bad("noise variances must be positive".into());
        }
        Ok(())
    }

    pub fn n_antennas(&self) -> usize {
        self.n_aa * self.n_rf
    }

    pub fn n_candidates(&self) -> usize {
        self.n_t * self.m
    }

    /// Sets both noise variances so that `p_total / sigma^2` equals `snr_db`.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        let s2 = self.p_total / 10f64.powf(snr_db / 10.0);
        self.sigma2_b = s2;
        self.sigma2_e = s2;
        self
    }

    pub fn block_range(&self, i: usize) -> core::ops::Range<usize> {
        i * self.n_aa..(i + 1) * self.n_aa
    }
}

/// Bob's channel `h` (`n_b x N`) and Eve's channel `g` (`n_e x N`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    pub h: CMatrix,
    pub g: CMatrix,
    n_aa: usize,
}

impl ChannelPair {
    pub fn new(h: CMatrix, g: CMatrix, n_aa: usize) -> Result<Self> {
        if h.ncols() != g.ncols() || !h.ncols().is_multiple_of(n_aa) {
            return Err(Error::Dimension(format!(
                "channels {:?} and {:?} do not split into subarrays of {n_aa}",
                h.shape(),
                g.shape()
            )));
        }
        Ok(ChannelPair { h, g, n_aa })
    }

    pub fn n_aa(&self) -> usize {
        self.n_aa
    }

    pub fn n_rf(&self) -> usize {
        self.h.ncols() / self.n_aa
    }

    /// Bob's channel from subarray `i`.
    pub fn h_block(&self, i: usize) -> CMatrix {
        self.h.columns(i * self.n_aa, self.n_aa).into_owned()
    }

    pub fn g_block(&self, i: usize) -> CMatrix {
        self.g.columns(i * self.n_aa, self.n_aa).into_owned()
    }

    /// Both channels multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        let s = C64::new(scale, 0.0);
        ChannelPair {
            h: &self.h * s,
            g: &self.g * s,
            n_aa: self.n_aa,
        }
    }
}

/// I.i.d. unit-variance Rayleigh fading for both links.
pub fn draw_channels<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ChannelPair {
    let n = cfg.n_antennas();
    let h = numerics::sample_complex_gaussian(cfg.n_b, n, 1.0, rng);
    let g = numerics::sample_complex_gaussian(cfg.n_e, n, 1.0, rng);
    ChannelPair { h, g, n_aa: cfg.n_aa }
}

/// Unit-energy M-PSK alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    /// `symbols[label]`; labels are Gray mapped onto the circle.
    pub symbols: Vec<C64>,
}

impl Constellation {
    pub fn psk(m: usize) -> Result<Self> {
        if m == 0 || !m.is_power_of_two() {
            return Err(Error::UnsupportedModulation(m));
        }
        let symbols = (0..m)
            .map(|label| {
                let pos = label ^ (label >> 1);
                C64::from_polar(1.0, 2.0 * PI * pos as f64 / m as f64)
            })
            .collect();
        Ok(Constellation { symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn average_energy(&self) -> f64 {
        self.symbols.iter().map(|b| b.norm_sqr()).sum::<f64>() / self.len() as f64
    }
}

pub fn build_constellation(m: usize) -> Result<Constellation> {
    Constellation::psk(m)
}

/// Selected subarrays with the block selector `T` and the row selector `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct TassSelection {
    /// Ascending, distinct, zero-based.
    pub indices: Vec<usize>,
    /// `N x N` block-diagonal selector.
    pub t_matrix: CMatrix,
    /// `len x n_rf`; column `indices[k]` is the `k`-th unit vector.
    pub s_matrix: CMatrix,
}

impl TassSelection {
    /// Builds a selection of exactly `cfg.n_t` subarrays.
    pub fn new(indices: &[usize], cfg: &SystemConfig) -> Result<Self> {
        if indices.len() != cfg.n_t {
            return Err(Error::InvalidSelection(format!(
                "expected {} subarrays, got {}",
                cfg.n_t,
                indices.len()
            )));
        }
        Self::from_indices(indices, cfg)
    }

    /// Every subarray selected. Used when scoring subarrays before selection.
    pub fn all(cfg: &SystemConfig) -> Self {
        let idx: Vec<usize> = (0..cfg.n_rf).collect();
        Self::from_indices(&idx, cfg).expect("full index set is valid")
    }

    fn from_indices(indices: &[usize], cfg: &SystemConfig) -> Result<Self> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        if let Some(&bad) = sorted.iter().find(|&&i| i >= cfg.n_rf) {
            return Err(Error::InvalidSelection(format!(
                "subarray {bad} out of range for n_rf = {}",
                cfg.n_rf
            )));
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSelection(format!("duplicate index in {sorted:?}")));
        }
        let n = cfg.n_antennas();
        let mut t_matrix = CMatrix::zeros(n, n);
        let mut s_matrix = CMatrix::zeros(sorted.len(), cfg.n_rf);
        for (k, &i) in sorted.iter().enumerate() {
            for r in cfg.block_range(i) {
                t_matrix[(r, r)] = C64::new(1.0, 0.0);
            }
            s_matrix[(k, i)] = C64::new(1.0, 0.0);
        }
        Ok(TassSelection {
            indices: sorted,
            t_matrix,
            s_matrix,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

pub fn build_selection(indices: &[usize], cfg: &SystemConfig) -> Result<TassSelection> {
    TassSelection::new(indices, cfg)
}

/// Partially-connected hybrid precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridPrecoder {
    /// `N x n_rf`, block `i` holds the unit-modulus vector `f_i`.
    pub f_rf: CMatrix,
    /// Per-chain digital gains.
    pub f_bb: CVector,
    /// `F_RF F_BB`.
    pub p_composite: CVector,
}

impl HybridPrecoder {
    /// Assembles the precoder from per-subarray phase vectors and gains.
    /// Each analog entry gets modulus `1/sqrt(n_aa)` exactly.
    pub fn from_phases(phases: &[Vec<f64>], gains: &[C64]) -> Self {
        assert_eq!(phases.len(), gains.len());
        let n_aa = phases.first().map_or(0, |p| p.len());
        let amp = 1.0 / (n_aa as f64).sqrt();
        let blocks: Vec<CMatrix> = phases
            .iter()
            .map(|ph| CMatrix::from_iterator(n_aa, 1, ph.iter().map(|&t| C64::from_polar(amp, t))))
            .collect();
        let f_rf = block_diag(&blocks);
        let f_bb = CVector::from_column_slice(gains);
        let p_composite = &f_rf * &f_bb;
        HybridPrecoder {
            f_rf,
            f_bb,
            p_composite,
        }
    }

    pub fn n_rf(&self) -> usize {
        self.f_rf.ncols()
    }

    pub fn n_aa(&self) -> usize {
        self.f_rf.nrows() / self.n_rf()
    }

    /// Analog vector of subarray `i`.
    pub fn f_block(&self, i: usize) -> CVector {
        let n_aa = self.n_aa();
        self.f_rf.view((i * n_aa, i), (n_aa, 1)).column(0).into_owned()
    }

    /// Composite precoder restricted to subarray `i`.
    pub fn p_block(&self, i: usize) -> CVector {
        let n_aa = self.n_aa();
        self.p_composite.rows(i * n_aa, n_aa).into_owned()
    }

    /// Rescales the digital gains so that `||P||^2 = power`.
    pub fn normalized(mut self, power: f64) -> Self {
        let norm = self.p_composite.norm();
        if norm > 0.0 {
            let s = C64::new(power.sqrt() / norm, 0.0);
            self.f_bb *= s;
            self.p_composite *= s;
        }
        self
    }
}

/// Digital AN precoder `T_BB = S^T T_BB,T` with `||T_BB,T||_F = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnProjector {
    /// `n_rf x n_t`, zero outside the selected rows.
    pub t_bb: CMatrix,
    /// `n_t x n_t` block on the selected subarrays.
    pub t_bb_t: CMatrix,
    /// `F_RF T_BB`, `N x n_t`.
    pub p_an: CMatrix,
    /// Normaliser: Frobenius norm of the unnormalised null-space projector.
    pub mu: f64,
}

/// Projector norms below this are treated as an empty null space.
const DEGENERATE_MU: f64 = 1e-6;

/// Builds the AN precoder from the analog part of `prec`.
pub fn build_an_projector(
    ch: &ChannelPair,
    sel: &TassSelection,
    prec: &HybridPrecoder,
    comb: &CombinerPair,
) -> Result<AnProjector> {
    let n_aa = ch.n_aa();
    let n_sel = sel.len();
    let mut h_t = CMatrix::zeros(ch.h.nrows(), n_aa * n_sel);
    let mut f_blocks = Vec::with_capacity(n_sel);
    for (k, &i) in sel.indices.iter().enumerate() {
        h_t.columns_mut(k * n_aa, n_aa).copy_from(&ch.h_block(i));
        f_blocks.push(CMatrix::from_column_slice(n_aa, 1, prec.f_block(i).as_slice()));
    }
    let f_rf_t = block_diag(&f_blocks);
    let h_prime = comb.w_b.adjoint() * &h_t * &f_rf_t;
    let gram = &h_prime * h_prime.adjoint();
    let proj = CMatrix::identity(n_sel, n_sel) - h_prime.adjoint() * pinv(&gram)? * &h_prime;
    let proj = hermitian_part(&proj);
    let mu = proj.norm();
    if mu < DEGENERATE_MU {
        let rank = numerics::svd(&h_prime)?
            .sigma
            .iter()
            .filter(|&&s| s > numerics::PINV_RCOND * h_prime.norm())
            .count();
        return Err(Error::DegenerateProjector {
            rank,
            n_t: n_sel,
            mu,
        });
    }
    let t_bb_t = proj * C64::new(1.0 / mu, 0.0);
    let t_bb = sel.s_matrix.transpose() * &t_bb_t;
    let p_an = &prec.f_rf * &t_bb;
    Ok(AnProjector {
        t_bb,
        t_bb_t,
        p_an,
        mu,
    })
}

/// Per-subarray matched combiners at Bob and Eve.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerPair {
    /// `n_b x n_rf`; column `i` is the dominant left singular vector of `h_i`.
    pub w_b: CMatrix,
    /// `n_e x n_rf`, same rule applied to `g_i`.
    pub w_e: CMatrix,
}

pub fn build_combiners(ch: &ChannelPair) -> Result<CombinerPair> {
    let n_rf = ch.n_rf();
    let mut w_b = CMatrix::zeros(ch.h.nrows(), n_rf);
    let mut w_e = CMatrix::zeros(ch.g.nrows(), n_rf);
    for i in 0..n_rf {
        w_b.set_column(i, &numerics::svd(&ch.h_block(i))?.u.column(0));
        w_e.set_column(i, &numerics::svd(&ch.g_block(i))?.u.column(0));
    }
    Ok(CombinerPair { w_b, w_e })
}

/// One element of the transmit alphabet: subarray `subarray` active with
/// symbol label `symbol`.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub subarray: usize,
    pub symbol: usize,
    pub x: CVector,
}

/// All `n_t * m` transmit vectors, ordered by ascending subarray then symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitSet {
    pub candidates: Vec<Candidate>,
}

pub fn build_transmit_set(prec: &HybridPrecoder, sel: &TassSelection, cons: &Constellation) -> TransmitSet {
    let p = &prec.p_composite;
    let n_aa = prec.n_aa();
    let mut candidates = Vec::with_capacity(sel.len() * cons.len());
    for &i in &sel.indices {
        let block = p.rows(i * n_aa, n_aa);
        for (j, &b) in cons.symbols.iter().enumerate() {
            let mut x = CVector::zeros(p.len());
            x.rows_mut(i * n_aa, n_aa).copy_from(&(block * b));
            candidates.push(Candidate {
                subarray: i,
                symbol: j,
                x,
            });
        }
    }
    TransmitSet { candidates }
}

/// Interference-plus-noise covariances after combining and their whiteners.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseWhitener {
    pub omega_b: CMatrix,
    pub omega_e: CMatrix,
    pub omega_b_isqrt: CMatrix,
    pub omega_e_isqrt: CMatrix,
}

pub fn build_whitener(
    cfg: &SystemConfig,
    ch: &ChannelPair,
    sel: &TassSelection,
    prec: &HybridPrecoder,
    an: &AnProjector,
    comb: &CombinerPair,
) -> Result<NoiseWhitener> {
    let an_power = C64::new((1.0 - cfg.beta) * cfg.p_total, 0.0);
    let n_rf = prec.n_rf();
    let spread = &sel.t_matrix * &prec.f_rf * &an.t_bb;
    let covariance = |w: &CMatrix, chan: &CMatrix, sigma2: f64| {
        let m = w.adjoint() * chan * &spread;
        hermitian_part(&(&m * m.adjoint() * an_power))
            + CMatrix::identity(n_rf, n_rf) * C64::new(sigma2, 0.0)
    };
    let omega_b = covariance(&comb.w_b, &ch.h, cfg.sigma2_b);
    let omega_e = covariance(&comb.w_e, &ch.g, cfg.sigma2_e);
    Ok(NoiseWhitener {
        omega_b_isqrt: inv_sqrt_hermitian(&omega_b)?,
        omega_e_isqrt: inv_sqrt_hermitian(&omega_e)?,
        omega_b,
        omega_e,
    })
}

/// Maximum-likelihood detection of `(subarray, symbol)` from Bob's combined
/// observation. Ties go to the earliest candidate.
pub fn ml_detect(
    y_b: &CVector,
    set: &TransmitSet,
    comb: &CombinerPair,
    ch: &ChannelPair,
    cfg: &SystemConfig,
) -> (usize, usize) {
    let eff = comb.w_b.adjoint() * &ch.h * C64::new((cfg.beta * cfg.p_total).sqrt(), 0.0);
    let mut best = (f64::INFINITY, 0, 0);
    for c in &set.candidates {
        let dist = (y_b - &eff * &c.x).norm_squared();
        if dist < best.0 {
            best = (dist, c.subarray, c.symbol);
        }
    }
    (best.1, best.2)
}

/// Channels, combiners, alphabet and subarray selection of one draw. The
/// precoders take this as input.
#[derive(Debug, Clone)]
pub struct Instance {
    pub cfg: SystemConfig,
    pub channels: ChannelPair,
    pub combiners: CombinerPair,
    pub constellation: Constellation,
    pub selection: TassSelection,
}

impl Instance {
    pub fn new(cfg: SystemConfig, channels: ChannelPair, selection: TassSelection) -> Result<Self> {
        cfg.validate()?;
        if channels.n_rf() != cfg.n_rf || channels.h.nrows() != cfg.n_b || channels.g.nrows() != cfg.n_e {
            return Err(Error::Dimension("channels do not match the configuration".into()));
        }
        let combiners = build_combiners(&channels)?;
        let constellation = Constellation::psk(cfg.m)?;
        Ok(Instance {
            cfg,
            channels,
            combiners,
            constellation,
            selection,
        })
    }

    /// Same draw with another selection.
    pub fn with_selection(&self, selection: TassSelection) -> Self {
        Instance {
            selection,
            ..self.clone()
        }
    }

    pub fn with_config(&self, cfg: SystemConfig) -> Self {
        Instance { cfg, ..self.clone() }
    }

    pub fn link(&self, precoder: &HybridPrecoder) -> Result<SecureLink<'_>> {
        SecureLink::new(self, precoder.clone())
    }
}

/// A fully specified link: instance plus precoder, AN projector and whiteners.
#[derive(Debug, Clone)]
pub struct SecureLink<'a> {
    pub instance: &'a Instance,
    pub precoder: HybridPrecoder,
    pub an: AnProjector,
    pub whitener: NoiseWhitener,
    pub transmit: TransmitSet,
}

impl<'a> SecureLink<'a> {
    pub fn new(instance: &'a Instance, precoder: HybridPrecoder) -> Result<Self> {
        let Instance {
            cfg,
            channels,
            combiners,
            constellation,
            selection,
        } = instance;
        if precoder.n_rf() != cfg.n_rf || precoder.f_rf.nrows() != cfg.n_antennas() {
            return Err(Error::Dimension("precoder does not match the configuration".into()));
        }
        let an = build_an_projector(channels, selection, &precoder, combiners)?;
        let whitener = build_whitener(cfg, channels, selection, &precoder, &an, combiners)?;
        let transmit = build_transmit_set(&precoder, selection, constellation);
        Ok(SecureLink {
            instance,
            precoder,
            an,
            whitener,
            transmit,
        })
    }

    pub fn cfg(&self) -> &SystemConfig {
        &self.instance.cfg
    }

    /// `Omega_B^{-1/2} W_b^H H`, the whitened combined channel at Bob.
    pub fn whitened_bob(&self) -> CMatrix {
        &self.whitener.omega_b_isqrt * self.instance.combiners.w_b.adjoint() * &self.instance.channels.h
    }

    pub fn whitened_eve(&self) -> CMatrix {
        &self.whitener.omega_e_isqrt * self.instance.combiners.w_e.adjoint() * &self.instance.channels.g
    }

    /// Bob's combined observation of candidate `c` with AN and noise drawn from `rng`.
    pub fn observe_bob<R: Rng + ?Sized>(&self, c: usize, rng: &mut R) -> CVector {
        let Instance {
            cfg,
            channels,
            combiners,
            ..
        } = self.instance;
        let n = numerics::sample_complex_gaussian_vector(self.an.t_bb.ncols(), 1.0, rng);
        let n_b = numerics::sample_complex_gaussian_vector(cfg.n_b, cfg.sigma2_b, rng);
        let s = &self.transmit.candidates[c].x * C64::new((cfg.beta * cfg.p_total).sqrt(), 0.0)
            + &self.instance.selection.t_matrix * &self.an.p_an * n * C64::new(((1.0 - cfg.beta) * cfg.p_total).sqrt(), 0.0);
        combiners.w_b.adjoint() * (&channels.h * s + n_b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg(n_rf: usize, n_b: usize) -> SystemConfig {
        let mut cfg = SystemConfig::with_defaults(n_rf);
        cfg.n_b = n_b;
        cfg
    }

    fn svd_matched_precoder(ch: &ChannelPair) -> HybridPrecoder {
        let phases: Vec<Vec<f64>> = (0..ch.n_rf())
            .map(|i| {
                let v = numerics::svd(&ch.h_block(i)).unwrap().v;
                v.column(0).iter().map(|z| numerics::phase(*z)).collect()
            })
            .collect();
        HybridPrecoder::from_phases(&phases, &vec![C64::new(1.0, 0.0); ch.n_rf()])
    }

    #[test]
    fn floor_pow2_values() {
        assert_eq!(floor_pow2(7), 4);
        assert_eq!(floor_pow2(15), 8);
        assert_eq!(floor_pow2(8), 8);
        assert_eq!(floor_pow2(1), 1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SystemConfig::with_defaults(7);
        assert_eq!(cfg.n_t, 4);
        assert!(cfg.validate().is_ok());
        cfg.n_t = 5;
        assert!(cfg.validate().is_err());
        cfg.n_t = 8;
        assert!(cfg.validate().is_err());
        cfg.n_t = 4;
        cfg.m = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn channel_shapes_and_blocks() {
        let cfg = SystemConfig::with_defaults(7);
        let ch = draw_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(ch.h.shape(), (2, 28));
        let mut rebuilt = CMatrix::zeros(2, 28);
        for i in 0..7 {
            rebuilt.columns_mut(4 * i, 4).copy_from(&ch.h_block(i));
        }
        assert_eq!(rebuilt, ch.h);
        let again = draw_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(ch, again);
    }

    #[test]
    fn channel_power_is_unit() {
        let cfg = SystemConfig::with_defaults(7);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 10_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let ch = draw_channels(&cfg, &mut rng);
            acc += ch.h.norm_squared() / (ch.h.len() as f64);
        }
        assert!((acc / draws as f64 - 1.0).abs() < 0.02);
    }

    #[test]
    fn psk_constellations() {
        let q = Constellation::psk(4).unwrap();
        let mut pts: Vec<(i64, i64)> = q
            .symbols
            .iter()
            .map(|z| (z.re.round() as i64, z.im.round() as i64))
            .collect();
        pts.sort();
        assert_eq!(pts, vec![(-1, 0), (0, -1), (0, 1), (1, 0)]);
        let b = Constellation::psk(2).unwrap();
        assert!((b.symbols[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((b.symbols[1] + C64::new(1.0, 0.0)).norm() < 1e-15);
        for m in [1, 2, 4, 8, 16, 64] {
            assert!((Constellation::psk(m).unwrap().average_energy() - 1.0).abs() < 1e-15);
        }
        assert!(Constellation::psk(6).is_err());
    }

    #[test]
    fn selection_matrices() {
        let mut cfg = SystemConfig::with_defaults(3);
        cfg.n_aa = 2;
        let sel = TassSelection::new(&[2, 0], &cfg).unwrap();
        assert_eq!(sel.indices, vec![0, 2]);
        let diag: Vec<f64> = (0..6).map(|k| sel.t_matrix[(k, k)].re).collect();
        assert_eq!(diag, vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(&sel.t_matrix * &sel.t_matrix, sel.t_matrix);
        assert_eq!(&sel.s_matrix * sel.s_matrix.transpose(), CMatrix::identity(2, 2));
        assert_eq!(sel.s_matrix[(1, 2)], C64::new(1.0, 0.0));

        cfg.n_rf = 2;
        cfg.n_t = 2;
        let full = TassSelection::new(&[0, 1], &cfg).unwrap();
        assert_eq!(full.t_matrix, CMatrix::identity(4, 4));

        assert!(TassSelection::new(&[0, 0], &SystemConfig::with_defaults(3)).is_err());
        assert!(TassSelection::new(&[0, 3], &SystemConfig::with_defaults(3)).is_err());
        assert!(TassSelection::new(&[0], &SystemConfig::with_defaults(3)).is_err());
    }

    #[test]
    fn combiner_rank_one_channel() {
        let mut h = CMatrix::zeros(2, 4);
        h[(0, 0)] = C64::new(1.0, 0.0);
        let g = CMatrix::from_element(2, 4, C64::new(0.5, 0.0));
        let ch = ChannelPair::new(h, g, 4).unwrap();
        let comb = build_combiners(&ch).unwrap();
        assert!((comb.w_b[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(comb.w_b[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn combiner_columns_match_singular_values() {
        let cfg = SystemConfig::with_defaults(7);
        let ch = draw_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(4));
        let comb = build_combiners(&ch).unwrap();
        for i in 0..cfg.n_rf {
            let w = comb.w_b.column(i);
            assert!((w.norm() - 1.0).abs() < 1e-12);
            let lam = numerics::svd(&ch.h_block(i)).unwrap().sigma[0];
            let proj = w.adjoint() * ch.h_block(i);
            assert!((proj.norm() - lam).abs() < 1e-9);
        }
    }

    #[test]
    fn an_projector_nulls_bob() {
        let cfg = SystemConfig::with_defaults(7);
        let ch = draw_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(9));
        let comb = build_combiners(&ch).unwrap();
        let prec = svd_matched_precoder(&ch);
        let sel = TassSelection::new(&[0, 2, 3, 6], &cfg).unwrap();
        let an = build_an_projector(&ch, &sel, &prec, &comb).unwrap();
        let leak = comb.w_b.adjoint() * &ch.h * &sel.t_matrix * &prec.f_rf * &an.t_bb;
        assert!(leak.norm() / an.t_bb.norm() <= 1e-9);
        assert!((an.t_bb_t.norm() - 1.0).abs() < 1e-12);
        for r in [1, 4, 5] {
            assert!(an.t_bb.row(r).norm() == 0.0);
        }
    }

    #[test]
    fn an_projector_identity_when_bob_sees_nothing() {
        let mut cfg = SystemConfig::with_defaults(4);
        cfg.n_aa = 2;
        let h = CMatrix::zeros(2, 8);
        let g = numerics::sample_complex_gaussian(2, 8, 1.0, &mut ChaCha8Rng::seed_from_u64(1));
        let ch = ChannelPair::new(h, g, 2).unwrap();
        let comb = CombinerPair {
            w_b: CMatrix::from_element(2, 4, C64::new(0.5, 0.0)),
            w_e: CMatrix::from_element(2, 4, C64::new(0.5, 0.0)),
        };
        let prec = HybridPrecoder::from_phases(&vec![vec![0.0; 2]; 4], &[C64::new(1.0, 0.0); 4]);
        let sel = TassSelection::new(&[0, 1, 2, 3], &cfg).unwrap();
        let an = build_an_projector(&ch, &sel, &prec, &comb).unwrap();
        assert!((an.mu - 2.0).abs() < 1e-12);
        assert!((an.t_bb_t.clone() - CMatrix::identity(4, 4) * C64::new(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn an_projector_degenerate_when_bob_spans_selection() {
        let cfg = small_cfg(3, 2);
        let ch = draw_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(3));
        let comb = build_combiners(&ch).unwrap();
        let prec = svd_matched_precoder(&ch);
        let sel = TassSelection::new(&[0, 1], &cfg).unwrap();
        match build_an_projector(&ch, &sel, &prec, &comb) {
            Err(Error::DegenerateProjector { rank, n_t, .. }) => {
                assert_eq!((rank, n_t), (2, 2));
            }
            other => panic!("expected degenerate projector, got {other:?}"),
        }
    }

    #[test]
    fn transmit_set_layout() {
        let mut cfg = SystemConfig::with_defaults(2);
        cfg.m = 2;
        cfg.n_aa = 2;
        let prec = HybridPrecoder::from_phases(&[vec![0.0, 1.0], vec![2.0, 3.0]], &[C64::new(1.0, 0.0), C64::new(2.0, 0.0)]);
        let sel = TassSelection::new(&[0, 1], &cfg).unwrap();
        let cons = Constellation::psk(2).unwrap();
        let set = build_transmit_set(&prec, &sel, &cons);
        assert_eq!(set.candidates.len(), 4);
        let order: Vec<(usize, usize)> = set.candidates.iter().map(|c| (c.subarray, c.symbol)).collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        let c = &set.candidates[3];
        assert_eq!(c.x.rows(0, 2).norm(), 0.0);
        assert!((c.x.rows(2, 2) - prec.p_block(1) * cons.symbols[1]).norm() < 1e-15);
        let total = set.candidates.iter().fold(CVector::zeros(4), |acc, c| acc + &c.x);
        assert!(total.norm() < 1e-14);
    }

    fn link_fixture(beta: f64, seed: u64) -> Instance {
        let mut cfg = SystemConfig::with_defaults(7).with_snr_db(10.0);
        cfg.beta = beta;
        let ch = draw_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        let sel = TassSelection::new(&[0, 1, 4, 5], &cfg).unwrap();
        Instance::new(cfg, ch, sel).unwrap()
    }

    #[test]
    fn whitener_properties() {
        let inst = link_fixture(1.0, 5);
        let prec = svd_matched_precoder(&inst.channels);
        let link = inst.link(&prec).unwrap();
        let s2 = inst.cfg.sigma2_b;
        let expected = CMatrix::identity(7, 7) * C64::new(s2, 0.0);
        assert!((&link.whitener.omega_b - &expected).norm() < 1e-14);

        let inst = link_fixture(0.01, 5);
        let link = inst.link(&prec).unwrap();
        assert!((&link.whitener.omega_b - &expected).norm() < 1e-8);
        let om_e = &link.whitener.omega_e;
        assert!((om_e - om_e.adjoint()).norm() < 1e-12);
        for (om, is) in [
            (&link.whitener.omega_b, &link.whitener.omega_b_isqrt),
            (&link.whitener.omega_e, &link.whitener.omega_e_isqrt),
        ] {
            let id = is * om * is.adjoint();
            assert!((id - CMatrix::identity(7, 7)).norm() < 1e-9);
        }
    }

    #[test]
    fn ml_detector_noiseless_and_ties() {
        let inst = link_fixture(0.01, 6);
        let prec = svd_matched_precoder(&inst.channels);
        let link = inst.link(&prec).unwrap();
        let eff = inst.combiners.w_b.adjoint() * &inst.channels.h * C64::new((inst.cfg.beta * inst.cfg.p_total).sqrt(), 0.0);
        for c in &link.transmit.candidates {
            let y = &eff * &c.x;
            assert_eq!(ml_detect(&y, &link.transmit, &inst.combiners, &inst.channels, &inst.cfg), (c.subarray, c.symbol));
        }
        let mut dup = link.transmit.clone();
        dup.candidates[1].x = dup.candidates[0].x.clone();
        let y = &eff * &dup.candidates[0].x;
        assert_eq!(ml_detect(&y, &dup, &inst.combiners, &inst.channels, &inst.cfg), (0, 0));
    }

    #[test]
    fn ml_detector_high_snr_matches_exhaustive_scan() {
        let mut inst = link_fixture(0.01, 7);
        inst.cfg = inst.cfg.clone().with_snr_db(30.0);
        let prec = svd_matched_precoder(&inst.channels).normalized(7.0);
        let link = inst.link(&prec).unwrap();
        let eff = inst.combiners.w_b.adjoint() * &inst.channels.h * C64::new((inst.cfg.beta * inst.cfg.p_total).sqrt(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let trials = 1000;
        let mut agree = 0;
        for t in 0..trials {
            let c = t % link.transmit.candidates.len();
            let y = link.observe_bob(c, &mut rng);
            let got = ml_detect(&y, &link.transmit, &inst.combiners, &inst.channels, &inst.cfg);
            // independent scan over the raw (i, j) grid
            let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
            for &i in &inst.selection.indices {
                for (j, b) in inst.constellation.symbols.iter().enumerate() {
                    let mut x = CVector::zeros(28);
                    x.rows_mut(4 * i, 4).copy_from(&(prec.p_block(i) * *b));
                    let d = (&y - &eff * x).norm_squared();
                    if d < best.0 {
                        best = (d, i, j);
                    }
                }
            }
            agree += usize::from(got == (best.1, best.2));
        }
        assert!(agree as f64 >= 0.99 * trials as f64, "agree {agree}");
    }
}
