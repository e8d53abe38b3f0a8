//! Experiment specifications and their flat `key = value` file format.
//!
//! Every key is optional except `n_rf`. Unset keys take these defaults:
//!
//! | key | default |
//! |---|---|
//! | `n_aa` | 4 |
//! | `n_t` | largest power of two not above `n_rf` |
//! | `n_b`, `n_e` | 2 |
//! | `m` | 4 |
//! | `beta` | 0.01 |
//! | `p_total` | `n_t` |
//! | `sigma2_b`, `sigma2_e` | 1 (overridden per SNR point) |
//! | `precoder` | `max-asr-ga` |
//! | `tass` | `max-asr` |
//! | `snr_grid_db` | `0:25:5` |
//! | `n_channel_draws` | 200 |
//! | `n_noise_samples` | 500 |
//! | `seed` | 0 |
//! | `output_path` | `shsm.csv` |
//!
//! `snr_grid_db` is either `min:max:step` or a comma-separated list.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use shsm_core::model::floor_pow2;
use shsm_core::precoders::PrecoderKind;
use shsm_core::tass::TassMethod;
use shsm_core::SystemConfig;

pub const DEFAULT_DRAWS: usize = 200;
pub const DEFAULT_NOISE_SAMPLES: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl ConfigError {
    fn at(line: Option<usize>, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub cfg: SystemConfig,
    pub precoder: PrecoderKind,
    pub tass: TassMethod,
    pub snr_grid_db: Vec<f64>,
    pub n_channel_draws: usize,
    pub n_noise_samples: usize,
    pub seed: u64,
    pub output_path: String,
}

impl ExperimentSpec {
    pub fn with_defaults(n_rf: usize) -> Self {
        ExperimentSpec {
            cfg: SystemConfig::with_defaults(n_rf),
            precoder: PrecoderKind::MaxAsrGa,
            tass: TassMethod::MaxAsr,
            snr_grid_db: parse_grid("0:25:5").expect("default grid"),
            n_channel_draws: DEFAULT_DRAWS,
            n_noise_samples: DEFAULT_NOISE_SAMPLES,
            seed: 0,
            output_path: "shsm.csv".into(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.cfg
            .validate()
            .map_err(|e| ConfigError::at(None, e.to_string()))?;
        if self.snr_grid_db.is_empty() {
            return Err(ConfigError::at(None, "snr_grid_db is empty"));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(ConfigError::at(None, "snr_grid_db has a non-finite value"));
        }
        if self.n_channel_draws == 0 {
            return Err(ConfigError::at(None, "n_channel_draws must be at least 1"));
        }
        if self.n_noise_samples < shsm_core::secrecy::MIN_NOISE_SAMPLES {
            return Err(ConfigError::at(
                None,
                format!(
                    "n_noise_samples must be at least {}",
                    shsm_core::secrecy::MIN_NOISE_SAMPLES
                ),
            ));
        }
        Ok(())
    }

    /// Renders the spec in the file format read by [`parse_str`].
    pub fn to_config_string(&self) -> String {
        let c = &self.cfg;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("n_rf", c.n_rf.to_string());
        put("n_aa", c.n_aa.to_string());
        put("n_t", c.n_t.to_string());
        put("n_b", c.n_b.to_string());
        put("n_e", c.n_e.to_string());
        put("m", c.m.to_string());
        put("beta", c.beta.to_string());
        put("p_total", c.p_total.to_string());
        put("sigma2_b", c.sigma2_b.to_string());
        put("sigma2_e", c.sigma2_e.to_string());
        put("precoder", self.precoder.name().into());
        put("tass", self.tass.name().into());
        let grid: Vec<String> = self.snr_grid_db.iter().map(|s| s.to_string()).collect();
        put("snr_grid_db", grid.join(","));
        put("n_channel_draws", self.n_channel_draws.to_string());
        put("n_noise_samples", self.n_noise_samples.to_string());
        put("seed", self.seed.to_string());
        put("output_path", self.output_path.clone());
        out
    }
}

const KEYS: [&str; 17] = [
    "n_rf",
    "n_aa",
    "n_t",
    "n_b",
    "n_e",
    "m",
    "beta",
    "p_total",
    "sigma2_b",
    "sigma2_e",
    "precoder",
    "tass",
    "snr_grid_db",
    "n_channel_draws",
    "n_noise_samples",
    "seed",
    "output_path",
];

/// Parses `min:max:step` (inclusive of `max` up to rounding) or a
/// comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        let [lo, hi, step] = parts[..] else {
            return Err(format!("expected min:max:step, got `{text}`"));
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number `{s}`"));
        let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
        if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(format!("grid `{text}` needs min <= max and step > 0"));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Ok((0..n)
            .map(|k| ((lo + k as f64 * step) * 1e9).round() / 1e9)
            .collect())
    } else {
        text.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>().map_err(|_| format!("bad number `{s}`"))
            })
            .collect()
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentSpec, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::at(None, format!("cannot read {}: {e}", path.display())))?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let mut entries: HashMap<String, (usize, String)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::at(Some(line_no), format!("expected `key = value`, got `{line}`")));
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::at(Some(line_no), format!("unknown key `{key}`")));
        }
        if entries.contains_key(key) {
            return Err(ConfigError::at(Some(line_no), format!("duplicate key `{key}`")));
        }
        entries.insert(key.to_string(), (line_no, value.trim().to_string()));
    }
    let line_of = |k: &str| entries.get(k).map(|e| e.0);

    fn get<T: FromStr>(
        entries: &HashMap<String, (usize, String)>,
        key: &str,
    ) -> Result<Option<T>, ConfigError> {
        match entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|_| {
                ConfigError::at(Some(*line), format!("malformed value `{v}` for `{key}`"))
            }),
        }
    }

    let n_rf: usize = get(&entries, "n_rf")?
        .ok_or_else(|| ConfigError::at(None, "missing required key `n_rf`"))?;
    if n_rf == 0 {
        return Err(ConfigError::at(line_of("n_rf"), "n_rf must be at least 1"));
    }
    let mut spec = ExperimentSpec::with_defaults(n_rf);
    let c = &mut spec.cfg;
    c.n_aa = get(&entries, "n_aa")?.unwrap_or(c.n_aa);
    c.n_t = get(&entries, "n_t")?.unwrap_or(floor_pow2(n_rf));
    c.n_b = get(&entries, "n_b")?.unwrap_or(c.n_b);
    c.n_e = get(&entries, "n_e")?.unwrap_or(c.n_e);
    c.m = get(&entries, "m")?.unwrap_or(c.m);
    c.beta = get(&entries, "beta")?.unwrap_or(c.beta);
    c.p_total = get(&entries, "p_total")?.unwrap_or(c.n_t as f64);
    c.sigma2_b = get(&entries, "sigma2_b")?.unwrap_or(c.sigma2_b);
    c.sigma2_e = get(&entries, "sigma2_e")?.unwrap_or(c.sigma2_e);
    if let Some((line, v)) = entries.get("precoder") {
        spec.precoder = PrecoderKind::from_name(v)
            .ok_or_else(|| ConfigError::at(Some(*line), format!("unknown precoder `{v}`")))?;
    }
    if let Some((line, v)) = entries.get("tass") {
        spec.tass = TassMethod::from_name(v)
            .ok_or_else(|| ConfigError::at(Some(*line), format!("unknown TASS method `{v}`")))?;
    }
    if let Some((line, v)) = entries.get("snr_grid_db") {
        spec.snr_grid_db = parse_grid(v).map_err(|e| ConfigError::at(Some(*line), e))?;
    }
    spec.n_channel_draws = get(&entries, "n_channel_draws")?.unwrap_or(spec.n_channel_draws);
    spec.n_noise_samples = get(&entries, "n_noise_samples")?.unwrap_or(spec.n_noise_samples);
    spec.seed = get(&entries, "seed")?.unwrap_or(spec.seed);
    if let Some((_, v)) = entries.get("output_path") {
        spec.output_path = v.clone();
    }

    spec.validate().map_err(|mut e| {
        e.line = blame(&e.message, &line_of);
        e
    })?;
    Ok(spec)
}

/// Line of the first key named in a validation message.
fn blame(message: &str, line_of: &dyn Fn(&str) -> Option<usize>) -> Option<usize> {
    let body = message.strip_prefix("invalid configuration: ").unwrap_or(message);
    body.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|w| KEYS.contains(w))
        .find_map(line_of)
}
