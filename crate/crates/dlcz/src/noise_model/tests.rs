use super::*;

const T: f64 = 123e-9;

fn budget(n_th: f64, p_pump: f64, gamma: f64) -> NoiseBudget {
    NoiseBudget { n_th: Occupation::Constant(n_th), p_pump, n_leak: 0.032, n_bg: 0.003, gamma }
}

fn heating() -> HeatingParams {
    HeatingParams { gamma: 1.0 / 4.0e-6, bath_gamma: 1.0 / 0.5e-6, k: 2.8e5, n_init: 0.004, n_final: 0.0 }
}

#[test]
fn occupation_limits() {
    let p = HeatingParams { k: 0.0, n_init: 0.0, ..heating() };
    for t in [0.0, 1e-7, 3e-6] {
        let n = occupation(t, &p, 0.3).unwrap();
        assert!((n - 0.3 * (-p.gamma * t).exp()).abs() < 1e-15);
    }
    let q = heating();
    assert!((occupation(1e-3, &q, 0.2).unwrap() - q.n_init).abs() < 1e-12);
    assert!((occupation(0.0, &q, 0.2).unwrap() - 0.2).abs() < 1e-15);
    assert!(occupation(-1.0, &q, 0.0).is_err());
}

#[test]
fn occupation_degenerate_rates() {
    let eq = HeatingParams { bath_gamma: 1.0 / 4.0e-6, ..heating() };
    let near = HeatingParams { bath_gamma: eq.gamma * (1.0 + 1e-9), ..eq };
    for t in [1e-8, 5e-7, 2e-6, 1e-5] {
        let a = occupation(t, &eq, 0.01).unwrap();
        let b = occupation(t, &near, 0.01).unwrap();
        // l'Hôpital: k t e^{-Γt}
        let lim = eq.n_init + (0.01 - eq.n_init) * (-eq.gamma * t).exp() + eq.k * t * (-eq.gamma * t).exp();
        assert!((a - lim).abs() < 1e-12);
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn injected_slices_sum_to_solution() {
    let p = heating();
    let (t0, t1, t2) = (0.0, 0.7e-6, 2.0e-6);
    // decay the first slice's injection over the second slice, then add the second
    let total = injected(t0, t1, &p) * (-p.gamma * (t2 - t1)).exp() + injected(t1, t2, &p);
    let direct = occupation(t2, &p, 0.0).unwrap();
    assert!((total - direct).abs() < 1e-14);
}

#[test]
fn g2_device_examples() {
    let a = g2_single_device(T, &budget(0.119, 0.0056, 1.0 / 4.0e-6)).unwrap();
    let b = g2_single_device(T, &budget(0.069, 0.0080, 1.0 / 5.8e-6)).unwrap();
    assert!((a - 7.08).abs() < 0.02, "{a}");
    assert!((b - 9.6).abs() / 9.6 < 0.03, "{b}");
    let clean = NoiseBudget { n_th: Occupation::Constant(0.0), p_pump: 0.0056, n_leak: 0.0, n_bg: 0.0, gamma: 0.0 };
    assert!((g2_single_device(T, &clean).unwrap() - (1.0 + 1.0 / 0.0056)).abs() < 1e-9);
    let dead = NoiseBudget { p_pump: 0.0, ..clean };
    assert_eq!(g2_single_device(T, &dead), Err(NoiseError::Denominator));
    assert!(matches!(g2_single_device(T, &budget(0.6, 0.005, 0.0)), Err(NoiseError::Budget("n_th", _))));
}

#[test]
fn inversion_examples() {
    let ga = 1.0 / 4.0e-6;
    let na = invert_noise_budget(7.1, T, 0.0056, 0.032, 0.003, ga).unwrap();
    assert!((na - 0.119).abs() < 0.003, "{na}");
    let gb = 1.0 / 5.8e-6;
    let nb = invert_noise_budget(9.6, T, 0.0080, 0.032, 0.0032, gb).unwrap();
    assert!((nb - 0.069).abs() < 0.002, "{nb}");
    let e = (-ga * T).exp();
    let g = 1.0 + e / (0.0056 * e + 0.032 + 0.003);
    assert!(invert_noise_budget(g, T, 0.0056, 0.032, 0.003, ga).unwrap().abs() < 1e-14);
    assert_eq!(invert_noise_budget(1.0, T, 0.0, 0.0, 0.0, ga), Err(NoiseError::NoCorrelation(1.0)));
}

#[test]
fn bound_examples() {
    assert!((visibility_bound_from_g2(7.5, 9.6) - 6.5 / 8.5).abs() < 1e-15);
    assert_eq!(visibility_bound_from_g2(1.0, 1.0), 0.0);
    assert_eq!(visibility_bound_from_g2(f64::INFINITY, f64::INFINITY), 1.0);
}

#[test]
fn dynamic_occupation_bound_decays() {
    let dynamic = |gamma: f64, k: f64| NoiseBudget {
        n_th: Occupation::Dynamic {
            heating: HeatingParams { gamma, bath_gamma: 2e6, k, n_init: 0.01, n_final: 0.0 },
            n0: 0.01,
            n_probe: 0.1,
            stokes: 0.0,
        },
        p_pump: 0.0056,
        n_leak: 0.032,
        n_bg: 0.003,
        gamma,
    };
    let (a, b) = (dynamic(1.0 / 4.0e-6, 0.9e6), dynamic(1.0 / 5.8e-6, 0.8e6));
    let v: Vec<f64> = [123e-9, 1e-6, 3e-6].iter().map(|&t| visibility_bound(t, &a, &b).unwrap()).collect();
    assert!(v[0] > v[1] && v[1] > v[2] && v[2] > 0.0 && v[2] < 0.4, "{v:?}");
}

fn s3_times() -> Vec<f64> {
    standard_delays()
}

#[test]
fn fit_noiseless_recovery() {
    let p = HeatingParams { n_final: 0.05, k: 1.5e6, ..heating() };
    let data = synthesize_pump_probe(&p, 0.004, &s3_times(), 0.0, 1).unwrap();
    let data: Vec<Sample> = data.into_iter().map(|s| Sample { sigma: 0.02 * s.d, ..s }).collect();
    let f = fit_pump_probe(&data).unwrap();
    assert!((f.heating.gamma / p.gamma - 1.0).abs() < 1e-6);
    assert!((f.heating.bath_gamma / p.bath_gamma - 1.0).abs() < 1e-6);
    assert!((f.heating.k / p.k - 1.0).abs() < 1e-6);
    assert!((f.heating.n_final - (p.n_final + p.n_init)).abs() < 1e-8);
}

#[test]
fn fit_noisy_recovery() {
    let p = HeatingParams { n_final: 0.05, k: 1.5e6, ..heating() };
    for seed in 0..5 {
        let data = synthesize_pump_probe(&p, 0.004, &s3_times(), 0.02, seed).unwrap();
        let f = fit_pump_probe(&data).unwrap();
        assert!((f.heating.gamma / p.gamma - 1.0).abs() < 0.05, "seed {seed}: {:?}", f.heating);
        assert!((f.heating.bath_gamma / p.bath_gamma - 1.0).abs() < 0.05, "seed {seed}: {:?}", f.heating);
    }
}

#[test]
fn fit_rejects_constant_and_short_data() {
    let flat: Vec<Sample> = s3_times().into_iter().map(|t| Sample { t, d: 0.1, sigma: 0.002 }).collect();
    assert!(matches!(fit_pump_probe(&flat), Err(NoiseError::Degenerate(_))));
    assert!(matches!(fit_pump_probe(&flat[..4]), Err(NoiseError::TooFewSamples(4))));
}

#[test]
fn csv_round_trip() {
    let p = heating();
    let data = synthesize_pump_probe(&p, 0.0, &s3_times(), 0.02, 3).unwrap();
    let text = write_pump_probe_csv(&data);
    assert!(text.starts_with("t_ns,signal,sigma\n"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pp.csv");
    std::fs::write(&path, text).unwrap();
    let back = read_pump_probe_csv(&path).unwrap();
    assert_eq!(back.len(), data.len());
    for (a, b) in back.iter().zip(&data) {
        assert!((a.t - b.t).abs() < 1e-20 && a.d == b.d && a.sigma == b.sigma);
    }
}
