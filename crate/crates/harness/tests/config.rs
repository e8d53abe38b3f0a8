use proptest::prelude::*;
use shsm_core::precoders::PrecoderKind;
use shsm_core::tass::TassMethod;
use shsm_harness::config::{parse_config, parse_str, ExperimentSpec};

#[test]
fn minimal_file_fills_defaults() {
    let spec = parse_str("n_rf = 7\n").unwrap();
    let c = &spec.cfg;
    assert_eq!((c.n_aa, c.m, c.n_t, c.n_b, c.n_e), (4, 4, 4, 2, 2));
    assert_eq!(c.beta, 0.01);
    assert_eq!(c.p_total, 4.0);
    assert_eq!(c.sigma2_b, c.sigma2_e);
    assert_eq!(spec.n_channel_draws, 200);
    assert_eq!(spec.precoder, PrecoderKind::MaxAsrGa);
}

#[test]
fn p_total_follows_selected_subarrays() {
    let spec = parse_str("n_rf = 7\nn_t = 2\n").unwrap();
    assert_eq!(spec.cfg.p_total, 2.0);
}

#[test]
fn non_power_of_two_n_t_is_rejected() {
    let e = parse_str("n_rf = 7\nn_t = 5\n").unwrap_err();
    assert_eq!(e.line, Some(2));
    assert!(e.message.contains("power of two"), "{e}");
}

#[test]
fn n_t_above_n_rf_is_rejected() {
    let e = parse_str("n_t = 4\nn_rf = 3\n").unwrap_err();
    assert_eq!(e.line, Some(1));
    assert!(e.to_string().starts_with("line 1:"), "{e}");
}

#[test]
fn unknown_and_malformed_keys_carry_line_numbers() {
    let e = parse_str("n_rf = 7\n# note\nalpha = 3\n").unwrap_err();
    assert_eq!(e.line, Some(3));
    assert!(e.message.contains("alpha"));

    let e = parse_str("n_rf = 7\nbeta = lots\n").unwrap_err();
    assert_eq!(e.line, Some(2));

    let e = parse_str("n_rf = 7\njust words\n").unwrap_err();
    assert_eq!(e.line, Some(2));

    let e = parse_str("n_rf = 7\nseed = 1\nseed = 2\n").unwrap_err();
    assert_eq!(e.line, Some(3));
}

#[test]
fn missing_n_rf() {
    let e = parse_str("m = 4\n").unwrap_err();
    assert_eq!(e.line, None);
    assert!(e.message.contains("n_rf"));
}

#[test]
fn names_and_grids() {
    let spec = parse_str("n_rf = 5\nprecoder = sdr-altmin\ntass = leakage\nsnr_grid_db = -5:5:2.5\n").unwrap();
    assert_eq!(spec.precoder, PrecoderKind::SdrAltMin);
    assert_eq!(spec.tass, TassMethod::Leakage);
    assert_eq!(spec.snr_grid_db, vec![-5.0, -2.5, 0.0, 2.5, 5.0]);
    assert!(parse_str("n_rf = 5\ntass = best\n").is_err());
    assert!(parse_str("n_rf = 5\nn_channel_draws = 0\n").is_err());
    assert!(parse_str("n_rf = 5\nn_noise_samples = 10\n").is_err());
}

#[test]
fn reads_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.cfg");
    std::fs::write(&path, "n_rf = 6\nseed = 3\n").unwrap();
    let spec = parse_config(&path).unwrap();
    assert_eq!((spec.cfg.n_rf, spec.seed), (6, 3));
    assert!(parse_config(dir.path().join("missing.cfg")).is_err());
}

fn spec_strategy() -> impl Strategy<Value = ExperimentSpec> {
    (
        1usize..=9,
        0u32..3,
        1usize..=4,
        1usize..=4,
        0u32..4,
        0.0f64..=1.0,
        0.1f64..100.0,
        prop::collection::vec(-20.0f64..40.0, 1..6),
        1usize..1000,
        100usize..5000,
        any::<u64>(),
        (0usize..3, 0usize..5, "[a-z][a-z0-9_./-]{0,12}"),
    )
        .prop_map(|(n_rf, t_exp, n_b, n_e, m_exp, beta, p, grid, draws, noise, seed, (pi, ti, out))| {
            let mut s = ExperimentSpec::with_defaults(n_rf);
            s.cfg.n_t = (1usize << t_exp).min(shsm_core::model::floor_pow2(n_rf));
            s.cfg.n_b = n_b;
            s.cfg.n_e = n_e;
            s.cfg.m = 1 << m_exp;
            s.cfg.beta = beta;
            s.cfg.p_total = p;
            s.cfg = s.cfg.with_snr_db(grid[0]);
            s.precoder = PrecoderKind::ALL[pi];
            s.tass = TassMethod::ALL[ti];
            s.snr_grid_db = grid;
            s.n_channel_draws = draws;
            s.n_noise_samples = noise;
            s.seed = seed;
            s.output_path = out;
            s
        })
}

proptest! {
    #[test]
    fn serialization_roundtrips(spec in spec_strategy()) {
        let text = spec.to_config_string();
        let back = parse_str(&text).unwrap();
        prop_assert_eq!(back, spec);
    }
}
