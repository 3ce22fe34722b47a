use super::*;
use crate::noise_model::{g2_single_device, NoiseBudget, Occupation};
use crate::stats::{analyze, CoincidenceTally};

fn reference_link() -> LinkBudget {
    let t = CoincidenceTally::reference_extended();
    let w = analyze(&t, 0.01, 1.0).unwrap();
    LinkBudget::reference(ReferenceRun::from_analysis(&t, &w))
}

/// P(|D| < w) for D ~ N(μ, s²) by Simpson's rule on the density.
fn pair_probability_quadrature(w: f64, mu: f64, s: f64) -> f64 {
    let n = 2000;
    let h = 2.0 * w / n as f64;
    let f = |x: f64| (-0.5 * ((x - mu) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    let mut acc = f(-w) + f(w);
    for k in 1..n {
        acc += f(-w + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn window_equivalent() {
    let m = YieldModel::uniform(2, 234, 2.0, 100.0);
    // 100 MHz at 1550 nm is about 0.8 pm
    assert!((m.window_nm() - 8.0143e-4).abs() < 1e-7, "{}", m.window_nm());
    let mut shifted = m.clone();
    shifted.offset_nm[1] = 2.5;
    let q = pair_probability_quadrature(m.window_nm(), 2.5, 8f64.sqrt());
    assert!((shifted.pair_probability(0, 1) / q - 1.0).abs() < 1e-9);
}

#[test]
fn pair_yield_reference() {
    for (offset, want, tol) in [(0.0, 0.999996, 1e-5), (2.5, 0.9998, 0.002), (5.0, 0.927, 0.002)] {
        let mut m = YieldModel::uniform(2, 234, 2.0, 100.0);
        m.offset_nm[1] = offset;
        let r = pair_yield(&m, 2000, 1).unwrap();
        assert!((r.analytic - want).abs() < tol, "offset {offset}: {}", r.analytic);
    }
}

#[test]
fn pair_yield_monte_carlo_tracks_analytic() {
    // small windows keep the pairwise-independence approximation accurate
    let mut m = YieldModel::uniform(2, 40, 2.0, 100.0);
    m.offset_nm[1] = 1.0;
    let r = pair_yield(&m, 40_000, 3).unwrap();
    assert!(r.discrepancy() < 3.0, "{r:?}");
    let again = pair_yield(&m, 40_000, 3).unwrap();
    assert_eq!(r, again);
}

#[test]
fn yield_limits() {
    let mut m = YieldModel::uniform(2, 234, 2.0, 0.0);
    let r = pair_yield(&m, 1000, 1).unwrap();
    assert_eq!((r.analytic, r.monte_carlo), (0.0, 0.0));
    m.window_mhz = 1e-6;
    m.devices_per_chip = vec![1, 1];
    assert!(pair_yield(&m, 1000, 1).unwrap().analytic < 1e-9);
    let one = YieldModel::uniform(4, 1, 2.0, 1e-3);
    let r = multi_chip_yield(&one, 2000, 2).unwrap();
    assert!(r.analytic < 1e-12 && r.monte_carlo == 0.0);
    assert!(pair_yield(&YieldModel::uniform(3, 10, 2.0, 100.0), 10, 1).is_err());
    assert!(YieldModel { sigma_nm: vec![0.0, 2.0], ..YieldModel::uniform(2, 10, 2.0, 100.0) }.validate().is_err());
}

#[test]
fn two_chip_multi_matches_pair() {
    let mut m = YieldModel::uniform(2, 100, 2.0, 100.0);
    m.offset_nm[1] = 3.0;
    let a = pair_yield(&m, 20_000, 11).unwrap();
    let b = multi_chip_yield(&m, 20_000, 12).unwrap();
    assert!((a.analytic - b.analytic).abs() < 1e-15);
    let se = a.standard_error.hypot(b.standard_error);
    assert!((a.monte_carlo - b.monte_carlo).abs() < 4.0 * se);
}

#[test]
fn four_chip_analytic() {
    let m = YieldModel::uniform(4, 500, 2.0, 100.0);
    let r = multi_chip_yield(&m, 500, 5).unwrap();
    assert!((r.analytic - 0.516).abs() < 0.02, "{}", r.analytic);
}

#[test]
fn degraded_g2_limits() {
    let b = NoiseBudget { n_th: Occupation::Constant(0.069), p_pump: 0.008, n_leak: 0.032, n_bg: 0.003, gamma: 1.0 / 5.8e-6 };
    let flags = DegradeFlags::default();
    let g0 = degraded_g2(&b, 0.0, 123e-9, 0.01, flags).unwrap();
    assert!((g0 - g2_single_device(123e-9, &b).unwrap()).abs() < 1e-12);
    let far = degraded_g2(&b, 200.0, 123e-9, 0.01, flags).unwrap();
    assert!((far - 1.0).abs() < 1e-6);
    let mut last = g0;
    for db in 1..40 {
        let g = degraded_g2(&b, db as f64, 123e-9, 0.01, flags).unwrap();
        assert!(g < last);
        last = g;
    }
    assert!(degraded_g2(&b, -1.0, 123e-9, 0.0, flags).is_err());
}

#[test]
fn required_loss_and_fiber() {
    let link = reference_link();
    assert!((link.reference.coincidences - 548.0).abs() < 1e-9);
    let s = max_separation(&link, 7.1).unwrap();
    assert!((s.added_db[0] - 5.4).abs() < 1.5, "{:?}", s.added_db);
    assert!((s.added_db[1] - 10.6).abs() < 1.5, "{:?}", s.added_db);
    assert!((s.total_km - 94.0).abs() < 15.0, "{}", s.total_km);
    for arm in 0..2 {
        assert!((link.g2(arm, s.added_db[arm]).unwrap() - 7.1).abs() < 1e-9);
    }
    let plan = integration_time(&link, 7.1, 75.0, 3.0).unwrap();
    assert!((plan.km[0] - 32.0).abs() < 8.0 && (plan.km[1] - 43.0).abs() < 8.0, "{:?}", plan.km);
}

#[test]
fn all_flag_combinations_are_reported() {
    let base = reference_link();
    let mut seen = Vec::new();
    for herald_dilution in [true, false] {
        for decay_factor in [true, false] {
            let link = LinkBudget { flags: DegradeFlags { herald_dilution, decay_factor }, ..base.clone() };
            let s = max_separation(&link, 7.1).unwrap();
            assert!(s.total_km > 50.0 && s.total_km < 150.0);
            seen.push(s.total_km);
        }
    }
    // dilution costs fiber
    assert!(seen[0] < seen[2] && seen[1] < seen[3]);
}

#[test]
fn separation_round_trip() {
    let link = reference_link();
    for arm in 0..2 {
        for db in [0.5, 3.0, 7.0, 12.0] {
            let floor = link.g2(arm, db).unwrap();
            assert!((link.allowance_db(arm, floor).unwrap() - db).abs() < 0.01);
        }
    }
    let floor = link.floor_for_retention(1.0).unwrap();
    let s = max_separation(&link, floor).unwrap();
    assert!(s.km[0].abs() < 1e-6, "worse arm has no margin at full retention");
    assert!(max_separation(&link, 8.0).is_err());
}

#[test]
fn integration_times() {
    let link = reference_link();
    let far = integration_time(&link, 7.1, 94.0, 3.0).unwrap();
    assert!((far.days / 170.0 - 1.0).abs() < 0.3, "{}", far.days);
    let near = integration_time(&link, 7.1, 75.0, 3.0).unwrap();
    assert!((near.days / 38.0 - 1.0).abs() < 0.3, "{}", near.days);
    let none = integration_time(&link, 7.1, 0.0, 3.0).unwrap();
    // the reference run itself: 1.9e9 trials at 50 μs is about 1.2 days of pulses
    assert!(none.days > 0.5 && none.days < 3.0, "{}", none.days);
    assert!(integration_time(&link, 7.1, 200.0, 3.0).is_err());
}

#[test]
fn integration_scales_with_transmission_squared() {
    let link = reference_link();
    let a = integration_time(&link, 7.1, 30.0, 3.0).unwrap();
    let b = integration_time(&link, 7.1, 50.0, 3.0).unwrap();
    let want = (a.transmission / b.transmission).powi(2);
    assert!((b.days / a.days / want - 1.0).abs() < 1e-12);
}
