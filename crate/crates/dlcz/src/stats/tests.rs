use super::*;
use crate::protocol_sim::{presets, run_campaign, CampaignMeta, ClickRecord, Simulator};
use std::f64::consts::PI;

fn log_of(n: u64, recs: &[(u64, u8, Window)]) -> ClickLog {
    ClickLog {
        meta: CampaignMeta { n_trials: n, seed: 0, config: presets::ideal(0.01), code_version: "test".into() },
        records: recs.iter().map(|&(trial, detector, window)| ClickRecord { trial, detector, window }).collect(),
    }
}

#[test]
fn tally_empty_and_manual() {
    let t = tally(&log_of(10, &[]), &WindowDefs::default()).unwrap();
    assert_eq!(t, CoincidenceTally { n: 10, cp1: 0, cp2: 0, cr1: 0, cr2: 0, cr1p1: 0, cr2p1: 0, cr1p2: 0, cr2p2: 0 });

    use Window::*;
    let log = log_of(3, &[(0, 1, Pump), (0, 2, Read), (1, 1, Pump), (1, 2, Pump), (1, 1, Read), (2, 2, Read)]);
    let t = tally(&log, &WindowDefs::default()).unwrap();
    // trial 0: p1 r2; trial 1: p1 p2 r1; trial 2: r2
    assert_eq!((t.cp1, t.cp2, t.cr1, t.cr2), (2, 1, 1, 2));
    assert_eq!((t.cr1p1, t.cr2p1, t.cr1p2, t.cr2p2), (1, 1, 1, 0));
    assert!(matches!(tally(&log, &WindowDefs { herald: Read, read: Read }), Err(StatsError::OverlappingWindows)));
}

#[test]
fn tally_singles_match_pump_probabilities() {
    let cfg = presets::desk();
    let sim = Simulator::new(&cfg).unwrap();
    let tab = sim.tables().unwrap();
    let n = 2_000_000;
    let log = run_campaign(&cfg, n, 17).unwrap();
    let t = tally(&log, &WindowDefs::default()).unwrap();
    for j in 1..=2 {
        let p = tab.herald_probability(j);
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((t.cp(j) as f64 - n as f64 * p).abs() < 4.0 * sd, "p{j}");
    }
}

#[test]
fn tally_json_round_trip() {
    let t = CoincidenceTally::reference_opt();
    let s = t.to_json();
    for key in ["\"N\"", "\"Cp1\"", "\"Cr2p1\"", "\"Cr2p2\""] {
        assert!(s.contains(key), "{key}");
    }
    assert_eq!(CoincidenceTally::from_json(&s).unwrap(), t);
    let bad = CoincidenceTally { cr1p1: 200_000, ..t };
    assert!(CoincidenceTally::from_json(&bad.to_json()).is_err());
}

#[test]
fn g2_reference_counts() {
    let t = CoincidenceTally::reference_opt();
    let g21 = g2_from_counts(&t, 2, 1).unwrap();
    let want = 130.0 * 1.114e9 / (167_427.0 * 111_134.0);
    assert!((g21.value - want).abs() < 1e-12);
    assert!((g21.value - 7.78).abs() < 0.01);
    assert!(g21.lo < g21.value && g21.value < g21.hi);
    let g11 = g2_from_counts(&t, 1, 1).unwrap();
    assert!((g11.value - 0.83).abs() < 0.005);
    let zero = CoincidenceTally { cr1: 0, cr1p1: 0, cr1p2: 0, ..t };
    assert!(matches!(g2_from_counts(&zero, 1, 1), Err(StatsError::ZeroSingles(1, 1))));
}

#[test]
fn g2_uncorrelated_is_one() {
    // coincidences at exactly the product of the single rates
    let t = CoincidenceTally { n: 10_000_000, cp1: 20_000, cp2: 20_000, cr1: 10_000, cr2: 10_000, cr1p1: 20, cr2p1: 20, cr1p2: 20, cr2p2: 20 };
    let g = g2_from_counts(&t, 1, 1).unwrap();
    assert!((g.value - 1.0).abs() < 1e-12);
    assert!(g.lo < 1.0 && 1.0 < g.hi);
}

#[test]
fn witness_point_values() {
    assert!((witness_rm(0.830, 7.783).unwrap() - 0.63).abs() < 0.005);
    assert!((witness_rm(0.0, 4.0).unwrap() - 0.75).abs() < 1e-12);
    assert!(matches!(witness_rm(1.0, 1.0), Err(StatsError::NoContrast)));
    assert!(witness_rm(-1.0, 2.0).is_err());
}

#[test]
fn witness_distribution_reference() {
    let t = CoincidenceTally::reference_opt();
    let d1 = witness_distribution(&t, 1, 0.01).unwrap();
    assert!((d1.total() - 1.0).abs() < 1e-9);
    assert!((d1.ml - 0.612).abs() < 0.03, "ml {}", d1.ml);
    let (up, down) = (d1.hi - d1.ml, d1.ml - d1.lo);
    assert!((up / 0.152 - 1.0).abs() < 0.2, "up {up}");
    assert!((down / 0.057 - 1.0).abs() < 0.2, "down {down}");
    assert!(!d1.coarse_grid);
    let d2 = witness_distribution(&t, 2, 0.01).unwrap();
    assert!((d2.ml - 0.846).abs() < 0.03, "ml {}", d2.ml);
    assert!(((d2.hi - d2.ml) / 0.210 - 1.0).abs() < 0.2);
    assert!(((d2.ml - d2.lo) / 0.090 - 1.0).abs() < 0.2);
    // the ML value is the mode
    let k = d1.grid.iter().position(|&x| x == d1.ml).unwrap();
    assert!(d1.mass.iter().all(|&m| m <= d1.mass[k]));
}

#[test]
fn witness_distribution_concentrates() {
    let t = CoincidenceTally::reference_opt();
    let big = CoincidenceTally {
        n: t.n * 1000,
        cp1: t.cp1 * 1000,
        cp2: t.cp2 * 1000,
        cr1: t.cr1 * 1000,
        cr2: t.cr2 * 1000,
        cr1p1: t.cr1p1 * 1000,
        cr2p1: t.cr2p1 * 1000,
        cr1p2: t.cr1p2 * 1000,
        cr2p2: t.cr2p2 * 1000,
    };
    let d = witness_distribution(&big, 1, 0.01).unwrap();
    let a = g2_from_counts(&big, 1, 1).unwrap().value;
    let b = g2_from_counts(&big, 2, 1).unwrap().value;
    let point = witness_rm(a, b).unwrap();
    assert!((d.ml - point).abs() < 0.02, "{} vs {point}", d.ml);
    assert!(d.width() < 0.05);
}

#[test]
fn symmetrized_reference() {
    let r = analyze(&CoincidenceTally::reference_opt(), 0.01, 1.0).unwrap();
    assert!((r.symmetrized.ml - 0.74).abs() < 0.03, "{}", r.symmetrized.ml);
    assert!((r.symmetrized.total() - 1.0).abs() < 1e-9);
    let e = analyze(&CoincidenceTally::reference_extended(), 0.01, 1.0).unwrap();
    assert!((e.symmetrized.ml - 0.74).abs() < 0.03, "{}", e.symmetrized.ml);
    assert!((e.confidence - 0.9984).abs() < 0.003, "{}", e.confidence);
    let c995 = confidence_below(&e.symmetrized, 0.995).unwrap();
    assert!((c995 - 0.9982).abs() < 0.003, "{c995}");
    assert!(c995 < e.confidence);
}

#[test]
fn symmetrize_deltas_and_narrowing() {
    let d = Distribution::delta(0.735, 0.01);
    let s = symmetrize(&d, &d).unwrap();
    assert_eq!(s.ml, d.ml);
    assert!((s.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let w = witness_distribution(&CoincidenceTally::reference_opt(), 1, 0.01).unwrap();
    let s = symmetrize(&w, &w).unwrap();
    assert!(s.width() < w.width());
}

#[test]
fn confidence_limits() {
    assert_eq!(confidence_below(&Distribution::delta(0.5, 0.01), 1.0).unwrap(), 1.0);
    assert_eq!(confidence_below(&Distribution::delta(1.5, 0.01), 1.0).unwrap(), 0.0);
    assert!(confidence_below(&Distribution::delta(0.5, 0.01), 0.0).is_err());
}

#[test]
fn systematic_corrections() {
    let b = systematic_bound(0.74, 0.0).unwrap();
    assert_eq!(b.corrected, 0.74);
    let b = systematic_bound(0.74, 0.1).unwrap();
    assert!((b.relative - 0.005).abs() < 1e-15);
    assert!((systematic_bound(1.0, 0.006).unwrap().relative - 1.8e-5).abs() < 1e-15);
    assert!(systematic_bound(1.0, 0.3).is_err());
    let l = SystematicLedger::reference();
    assert!(l.components[0].relative < 1e-4);
    assert!(l.components[1].relative < 1e-3);
    assert!((l.threshold - 0.995).abs() < 1e-3);
}

#[test]
fn visibility_examples() {
    let pts = [FringePoint::exact(0.0, 7.78), FringePoint::exact(1.0, 0.83)];
    assert!((visibility(&pts, VisibilityMode::Extrema).unwrap() - 0.807).abs() < 1e-3);
    let flat = [FringePoint::exact(0.0, 2.0), FringePoint::exact(1.0, 2.0)];
    assert_eq!(visibility(&flat, VisibilityMode::Extrema).unwrap(), 0.0);
    let zero = [FringePoint::exact(0.0, 0.0), FringePoint::exact(1.0, 0.0)];
    assert!(visibility(&zero, VisibilityMode::Extrema).is_err());

    // V = 0.8 around a mean of 4.5, small deterministic jitter
    let pts: Vec<FringePoint> = (0..24)
        .map(|k| {
            let x = k as f64 * 2.0 * PI / 24.0;
            let y = 4.5 * (1.0 + 0.8 * (x + 0.3).cos()) + 0.02 * ((k * 7) % 5) as f64 - 0.04;
            FringePoint { x, y, lo: y - 0.05, hi: y + 0.05 }
        })
        .collect();
    let v = visibility(&pts, VisibilityMode::Fitted(FringeUnit::Phase)).unwrap();
    assert!((v - 0.8).abs() < 0.01, "{v}");
}

#[test]
fn fringe_fit_periods() {
    let pts: Vec<FringePoint> = (0..16).map(|k| k as f64 * PI / 8.0).map(|x| FringePoint::exact(x, 3.0 + 2.0 * (x - 1.0).cos())).collect();
    let f = fit_fringe(&pts, FringeUnit::Phase).unwrap();
    assert!((f.period_reported() - 2.0).abs() < 0.02);
    assert!((f.amplitude - 2.0).abs() < 1e-6 && !f.flagged);

    let w = 2.0 * PI * 45e6;
    let pts: Vec<FringePoint> = (0..30).map(|k| 100e-9 + k as f64 * 2e-9).map(|t| FringePoint::exact(t, 4.0 + 3.0 * (w * t).cos())).collect();
    let f = fit_fringe(&pts, FringeUnit::Delay).unwrap();
    assert!((f.period_reported() - 22.22).abs() < 0.3, "{}", f.period_reported());

    let flat: Vec<FringePoint> = (0..10).map(|k| FringePoint::exact(k as f64, 5.0)).collect();
    let f = fit_fringe(&flat, FringeUnit::Phase).unwrap();
    assert!(f.flagged && f.amplitude < 1e-9);
    assert!(fit_fringe(&flat[..4], FringeUnit::Phase).is_err());
}

#[test]
fn analyze_json_round_trip() {
    let t = CoincidenceTally::reference_opt();
    let a = analyze(&t, 0.01, 1.0).unwrap();
    let back = analyze(&CoincidenceTally::from_json(&t.to_json()).unwrap(), 0.01, 1.0).unwrap();
    assert_eq!(a, back);
    let js = serde_json::to_string(&a).unwrap();
    assert!(js.contains("\"grid\"") && js.contains("\"mass\""));
}

#[test]
fn histogram_tally_matches_log_tally() {
    use crate::protocol_sim::{sample_histogram, sample_log};
    let cfg = presets::desk();
    let tab = Simulator::new(&cfg).unwrap().tables().unwrap();
    let n = 300_000;
    let a = tally(&sample_log(&tab, &cfg, n, 8), &WindowDefs::default()).unwrap();
    let b = CoincidenceTally::from_histogram(n, &sample_histogram(&tab, n, 8)).unwrap();
    assert_eq!(a, b);
    assert!(CoincidenceTally::from_histogram(n + 1, &sample_histogram(&tab, n, 8)).is_err());
}
