//! Monte-Carlo experiment drivers.
//!
//! Draw `d` of a run with seed `s` takes its randomness from three ChaCha8
//! streams keyed by `(s, d)`: one for the channel pair, one for the random
//! TASS baseline and one for the receiver noise. Channels therefore do not
//! depend on the SNR point, the TASS method or the precoder, so every curve
//! of an experiment sees the same draws.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use shsm_core::model::draw_channels;
use shsm_core::precoders::PrecoderKind;
use shsm_core::secrecy::{self, AsrContext};
use shsm_core::tass::TassMethod;
use shsm_core::{Instance, SecureLink, SystemConfig, TassSelection};

use crate::config::ExperimentSpec;

/// Draws that may fail before a point is rejected, as a fraction.
pub const FAILURE_BUDGET: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("{failed} of {total} draws failed at {snr_db} dB ({precoder}, {tass}); first failure: {first}")]
    FailureBudget {
        snr_db: f64,
        precoder: &'static str,
        tass: &'static str,
        failed: usize,
        total: usize,
        first: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stream {
    Channel = 0,
    Tass = 1,
    Noise = 2,
}

fn substream(seed: u64, draw: usize, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw as u64 * 4 + which as u64);
    rng
}

/// Outcome of one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawValue {
    pub draw: usize,
    pub outcome: Result<DrawMetrics, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawMetrics {
    pub asr: f64,
    pub sr_mc: f64,
    /// Monte-Carlo standard error of `sr_mc`.
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub snr_db: f64,
    pub precoder: PrecoderKind,
    pub tass: TassMethod,
    pub mean_asr: f64,
    pub mean_sr_mc: f64,
    /// Standard error of `mean_sr_mc` across draws.
    pub std_err: f64,
    pub n_draws: usize,
    pub n_failed: usize,
    pub wall_time_seconds: f64,
    pub draws: Vec<DrawValue>,
}

impl ResultRecord {
    /// Successful draws as `(draw, metrics)`.
    pub fn successes(&self) -> impl Iterator<Item = (usize, DrawMetrics)> + '_ {
        self.draws
            .iter()
            .filter_map(|d| d.outcome.as_ref().ok().map(|m| (d.draw, *m)))
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, &str)> + '_ {
        self.draws
            .iter()
            .filter_map(|d| d.outcome.as_ref().err().map(|e| (d.draw, e.as_str())))
    }
}

/// Runs TASS, the precoder and the secrecy evaluation on draw `draw`.
pub fn evaluate_draw(
    cfg: &SystemConfig,
    precoder: PrecoderKind,
    tass: TassMethod,
    seed: u64,
    draw: usize,
    n_noise: usize,
) -> Result<DrawMetrics, shsm_core::Error> {
    let channels = draw_channels(cfg, &mut substream(seed, draw, Stream::Channel));
    let base = Instance::new(cfg.clone(), channels, TassSelection::all(cfg))?;
    let card = tass.select(&base, &mut substream(seed, draw, Stream::Tass))?;
    let inst = base.with_selection(card.chosen);
    let run = precoder.run(&inst)?;
    let link = SecureLink::new(&inst, run.precoder)?;
    let ctx = AsrContext::new(&link);
    let est = secrecy::exact_sr_monte_carlo(&ctx, n_noise, &mut substream(seed, draw, Stream::Noise))?;
    Ok(DrawMetrics {
        asr: est.asr,
        sr_mc: est.sr_exact,
        std_err: est.std_err,
    })
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Evaluates one `(snr, precoder, tass)` point over all draws of `spec`.
pub fn run_point(
    spec: &ExperimentSpec,
    snr_db: f64,
    precoder: PrecoderKind,
    tass: TassMethod,
) -> Result<ResultRecord, RunError> {
    let cfg = spec.cfg.clone().with_snr_db(snr_db);
    let start = Instant::now();
    let draws: Vec<DrawValue> = (0..spec.n_channel_draws)
        .into_par_iter()
        .map(|d| DrawValue {
            draw: d,
            outcome: evaluate_draw(&cfg, precoder, tass, spec.seed, d, spec.n_noise_samples)
                .map_err(|e| e.to_string()),
        })
        .collect();
    let wall_time_seconds = start.elapsed().as_secs_f64();
    let ok: Vec<DrawMetrics> = draws.iter().filter_map(|d| d.outcome.clone().ok()).collect();
    let n_failed = draws.len() - ok.len();
    if n_failed as f64 > FAILURE_BUDGET * draws.len() as f64 {
        let first = draws
            .iter()
            .find_map(|d| d.outcome.as_ref().err().cloned())
            .unwrap_or_default();
        return Err(RunError::FailureBudget {
            snr_db,
            precoder: precoder.name(),
            tass: tass.name(),
            failed: n_failed,
            total: draws.len(),
            first,
        });
    }
    let asr: Vec<f64> = ok.iter().map(|m| m.asr).collect();
    let sr: Vec<f64> = ok.iter().map(|m| m.sr_mc).collect();
    let (mean_sr_mc, std_err) = mean_and_se(&sr);
    Ok(ResultRecord {
        snr_db,
        precoder,
        tass,
        mean_asr: mean_and_se(&asr).0,
        mean_sr_mc,
        std_err,
        n_draws: ok.len(),
        n_failed,
        wall_time_seconds,
        draws,
    })
}

/// One record per SNR point of the grid.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRecord>, RunError> {
    spec.snr_grid_db
        .iter()
        .map(|&snr| run_point(spec, snr, spec.precoder, spec.tass))
        .collect()
}

/// Every TASS method at every SNR point, on shared channel draws.
pub fn run_compare(spec: &ExperimentSpec) -> Result<Vec<ResultRecord>, RunError> {
    let mut out = Vec::new();
    for &snr in &spec.snr_grid_db {
        for tass in TassMethod::ALL {
            out.push(run_point(spec, snr, spec.precoder, tass)?);
        }
    }
    Ok(out)
}

/// Number of grid points of [`CdfCurve`].
pub const CDF_GRID_POINTS: usize = 101;

#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve {
    /// Per-draw secrecy rates, ascending.
    pub values: Vec<f64>,
    /// Evenly spaced from 0 to `log2(N_t M)`.
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
}

/// Empirical CDF of `values` on `grid`, `P(X <= x)`.
pub fn empirical_cdf(values: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    grid.iter()
        .map(|&x| sorted.partition_point(|&v| v <= x) as f64 / n)
        .collect()
}

pub fn cdf_grid(cfg: &SystemConfig) -> Vec<f64> {
    let cap = (cfg.n_candidates() as f64).log2();
    (0..CDF_GRID_POINTS)
        .map(|k| cap * k as f64 / (CDF_GRID_POINTS - 1) as f64)
        .collect()
}

/// Per-draw SR distribution at one SNR point.
pub fn run_cdf(spec: &ExperimentSpec, snr_db: f64) -> Result<(ResultRecord, CdfCurve), RunError> {
    let record = run_point(spec, snr_db, spec.precoder, spec.tass)?;
    let mut values: Vec<f64> = record.successes().map(|(_, m)| m.sr_mc).collect();
    values.sort_by(f64::total_cmp);
    let grid = cdf_grid(&spec.cfg);
    let cdf = empirical_cdf(&values, &grid);
    Ok((record, CdfCurve { values, grid, cdf }))
}

/// Values of `metric` on draws where both records succeeded, in draw order.
pub fn paired(a: &ResultRecord, b: &ResultRecord, metric: fn(&DrawMetrics) -> f64) -> (Vec<f64>, Vec<f64>) {
    let other: std::collections::BTreeMap<usize, DrawMetrics> = b.successes().collect();
    a.successes()
        .filter_map(|(d, m)| other.get(&d).map(|o| (metric(&m), metric(o))))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_differ() {
        use rand::Rng;
        let a: u64 = substream(1, 0, Stream::Channel).random();
        let b: u64 = substream(1, 0, Stream::Noise).random();
        let c: u64 = substream(1, 1, Stream::Channel).random();
        let a2: u64 = substream(1, 0, Stream::Channel).random();
        assert_eq!(a, a2);
        assert!(a != b && a != c && b != c);
    }

    #[test]
    fn cdf_counts_ties() {
        let grid = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(empirical_cdf(&[1.0, 1.0, 3.0, 2.0], &grid), vec![0.0, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn mean_and_se_small_samples() {
        assert_eq!(mean_and_se(&[2.0]), (2.0, 0.0));
        let (m, se) = mean_and_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
