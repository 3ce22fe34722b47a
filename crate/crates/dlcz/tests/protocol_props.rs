//! Protocol-level invariants: sampling against the exact tables, determinism,
//! the witness on separable states, and R ≤ R_m.

use dlcz::protocol_sim::{presets, sample_histogram, sample_log, Evolved, ProtocolConfig, Simulator, Tables};
use dlcz::stats::{analyze, confidence_below, witness_rm, CoincidenceTally, StatsError};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn desk() -> &'static (Simulator, Evolved) {
    static S: OnceLock<(Simulator, Evolved)> = OnceLock::new();
    S.get_or_init(|| {
        let cfg = presets::desk();
        let sim = Simulator::new(&cfg).unwrap();
        let ev = sim.evolve(cfg.tau).unwrap();
        (sim, ev)
    })
}

fn desk_tables(delta_phi: f64) -> Tables {
    let (sim, ev) = desk();
    sim.tables_for(ev, delta_phi).unwrap()
}

/// R_m from exact g² values; `None` when the two read detectors show no contrast.
fn exact_rm(t: &Tables, j: usize) -> Option<f64> {
    match witness_rm(t.g2(1, j), t.g2(2, j)) {
        Ok(r) => Some(r),
        Err(StatsError::NoContrast) => None,
        Err(e) => panic!("{e}"),
    }
}

/// Two-sided probability outside ±4σ of a normal distribution.
const FOUR_SIGMA: f64 = 6.334e-5;

/// Count within 4σ of its expectation. Small expectations use the exact Poisson
/// tails at the same probability, since the normal band is far too narrow there.
fn consistent(count: u64, mean: f64, p: f64) -> bool {
    if mean >= 50.0 {
        return (count as f64 - mean).abs() <= 4.0 * (mean * (1.0 - p)).sqrt();
    }
    let pmf = |k: u64| (-mean + k as f64 * mean.ln() - (1..=k).map(|i| (i as f64).ln()).sum::<f64>()).exp();
    let below: f64 = (0..=count).map(pmf).sum();
    let above = 1.0 - below + pmf(count);
    below.min(above) >= 0.5 * FOUR_SIGMA
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn histogram_within_four_sigma(seed in any::<u64>(), k in 0usize..16) {
        let t = desk_tables(k as f64 * PI / 8.0);
        let n = 400_000u64;
        let h = sample_histogram(&t, n, seed);
        prop_assert_eq!(h.iter().sum::<u64>(), n);
        for o in 0..16 {
            let p = t.observed[o];
            let mean = n as f64 * p;
            prop_assert!(consistent(h[o], mean, p), "outcome {o}: {} vs {mean:.1}", h[o]);
        }
    }

    #[test]
    fn logs_are_byte_identical_per_seed(seed in any::<u64>()) {
        let t = desk_tables(0.0);
        let cfg = presets::desk();
        let pool = |n: usize| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        let a = pool(1).install(|| sample_log(&t, &cfg, 200_000, seed).to_csv());
        let b = pool(4).install(|| sample_log(&t, &cfg, 200_000, seed).to_csv());
        let c = sample_log(&t, &cfg, 200_000, seed).to_csv();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &c);
        let h1 = pool(1).install(|| sample_histogram(&t, 300_000, seed));
        let h4 = pool(4).install(|| sample_histogram(&t, 300_000, seed));
        prop_assert_eq!(h1, h4);
    }
}

/// Independently prepared mechanics: only one device is pumped, or neither, so no
/// herald can be shared between the two.
fn separable_configs() -> Vec<(String, ProtocolConfig)> {
    let mut out = Vec::new();
    for (label, pumped, n_init, dev, dphi) in [
        ("A pumped", Some(0), 0.005, 0.006, 0.0),
        ("B pumped", Some(1), 0.005, 0.006, 0.5 * PI),
        ("A pumped, warm start", Some(0), 0.1, 0.006, PI),
        ("B pumped, lopsided splitter", Some(1), 0.02, 0.1, 0.25 * PI),
        ("thermal only", None, 0.1, 0.006, 0.0),
        ("thermal only, lopsided splitter", None, 0.05, 0.08, 0.75 * PI),
    ] {
        let mut c = presets::desk();
        for (i, d) in c.devices.iter_mut().enumerate() {
            d.n_init = n_init;
            if pumped != Some(i) {
                d.p_pump = 0.0;
            }
        }
        c.interferometer.splitter_deviation = dev;
        c.interferometer.delta_phi = dphi;
        out.push((label.to_string(), c));
    }
    out
}

#[test]
fn separable_states_never_witness() {
    let configs = separable_configs();
    assert!(configs.len() >= 5);
    for (label, cfg) in &configs {
        let t = Simulator::new(cfg).unwrap().tables().unwrap();
        for j in 1..=2 {
            if let Some(r) = exact_rm(&t, j) {
                assert!(r >= 1.0 - 1e-9, "{label}: exact R_m = {r} on herald {j}");
            }
        }
        // finite statistics: the likelihood must not put the witness below 1 with confidence
        let n = 20_000_000u64;
        let h = sample_histogram(&t, n, 77);
        let tally = CoincidenceTally::from_histogram(n, &h).unwrap();
        match analyze(&tally, 0.01, 1.0) {
            Ok(w) => assert!(w.confidence < 0.95, "{label}: confidence {}", w.confidence),
            Err(StatsError::ZeroSingles(..)) => {}
            Err(e) => panic!("{label}: {e}"),
        }
    }
}

fn check_r_below_rm(cfg: &ProtocolConfig) -> Result<usize, String> {
    let t = Simulator::new(cfg).map_err(|e| e.to_string())?.tables().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for j in 1..=2 {
        if let (Some(r), Some(rm)) = (t.witness[j - 1], exact_rm(&t, j)) {
            if r > rm * (1.0 + 1e-9) + 1e-12 {
                return Err(format!("herald {j}: R = {r} > R_m = {rm}"));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

#[test]
fn reference_point_r_below_rm() {
    assert_eq!(check_r_below_rm(&presets::paper()), Ok(2));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn r_never_exceeds_rm(
        p_a in 0.001..0.02f64,
        p_b in 0.001..0.02f64,
        n_init in 0.0..0.05f64,
        dphi in 0.0..(2.0 * PI),
        tau_ns in 50.0..600.0f64,
        eff in 0.2..0.9f64,
    ) {
        let mut cfg = presets::desk();
        cfg.devices[0].p_pump = p_a;
        cfg.devices[1].p_pump = p_b;
        cfg.devices[0].n_init = n_init;
        cfg.devices[1].n_init = n_init;
        cfg.interferometer.delta_phi = dphi;
        cfg.tau = tau_ns * 1e-9;
        cfg.detectors.efficiency = [eff, eff * 0.9];
        let checked = check_r_below_rm(&cfg).map_err(TestCaseError::fail)?;
        prop_assert!(checked > 0);
    }
}

#[test]
fn confidence_grows_with_statistics() {
    // expected counts of the desk operating point at increasing trial numbers
    let t = desk_tables(0.0);
    let mut last = 0.0;
    for n in [1e6, 1e7, 1e8] {
        let h: [u64; 16] = std::array::from_fn(|o| (t.observed[o] * n).round() as u64);
        let total: u64 = h.iter().sum();
        let tally = CoincidenceTally::from_histogram(total, &h).unwrap();
        let w = analyze(&tally, 0.01, 1.0).unwrap();
        let c = confidence_below(&w.symmetrized, 1.0).unwrap();
        assert!(c >= last, "N = {n:e}: {c} < {last}");
        last = c;
    }
    assert!(last > 0.99);
}
