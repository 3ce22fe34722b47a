//! Counting-statistics invariants.

use dlcz::stats::{analyze, G2_MAX, g2_from_counts, symmetrize, witness_distribution, witness_rm, CoincidenceTally};
use proptest::prelude::*;

fn tally() -> impl Strategy<Value = CoincidenceTally> {
    (1_000u64..200_000, 1_000u64..200_000, 1_000u64..200_000, 1_000u64..200_000, proptest::array::uniform4(0u64..300))
        .prop_map(|(cp1, cp2, cr1, cr2, c)| CoincidenceTally {
            n: 1_000_000_000,
            cp1,
            cp2,
            cr1,
            cr2,
            cr1p1: c[0],
            cr2p1: c[1],
            cr1p2: c[2],
            cr2p2: c[3],
        })
}

/// Read detector `i` seen with `k` times the efficiency: its singles and every coincidence
/// it takes part in scale together.
fn rescale_read(t: &CoincidenceTally, i: usize, k: u64) -> CoincidenceTally {
    let mut s = *t;
    if i == 1 {
        s.cr1 *= k;
        s.cr1p1 *= k;
        s.cr1p2 *= k;
    } else {
        s.cr2 *= k;
        s.cr2p1 *= k;
        s.cr2p2 *= k;
    }
    s
}

fn rescale_herald(t: &CoincidenceTally, j: usize, k: u64) -> CoincidenceTally {
    let mut s = *t;
    if j == 1 {
        s.cp1 *= k;
        s.cr1p1 *= k;
        s.cr2p1 *= k;
    } else {
        s.cp2 *= k;
        s.cr1p2 *= k;
        s.cr2p2 *= k;
    }
    s
}

proptest! {
    #[test]
    fn g2_invariant_under_efficiency_rescaling(t in tally(), k in 2u64..6, det in 1usize..=2) {
        for scaled in [rescale_read(&t, det, k), rescale_herald(&t, det, k)] {
            for i in 1..=2 {
                for j in 1..=2 {
                    let a = g2_from_counts(&t, i, j).unwrap().value;
                    let b = g2_from_counts(&scaled, i, j).unwrap().value;
                    prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "r{i}p{j}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn g2_interval_brackets_point(t in tally(), i in 1usize..=2, j in 1usize..=2) {
        let g = g2_from_counts(&t, i, j).unwrap();
        // the likelihood lives on a bounded grid
        prop_assume!(g.value < 0.8 * G2_MAX);
        prop_assert!(g.lo <= g.value + 0.02 && g.value <= g.hi + 0.02, "{g:?}");
    }

    #[test]
    fn rm_symmetric_in_read_detectors(a in 0.0..20.0f64, b in 0.0..20.0f64) {
        prop_assume!((a - b).abs() > 1e-6);
        let (x, y) = (witness_rm(a, b).unwrap(), witness_rm(b, a).unwrap());
        prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn distributions_are_normalized(t in tally()) {
        let d1 = witness_distribution(&t, 1, 0.02).unwrap();
        let d2 = witness_distribution(&t, 2, 0.02).unwrap();
        let s = symmetrize(&d1, &d2).unwrap();
        for d in [&d1, &d2, &s] {
            prop_assert!((d.total() - 1.0).abs() < 1e-9, "{}", d.total());
        }
        let w = analyze(&t, 0.02, 1.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&w.confidence));
    }
}

#[test]
fn confidence_grows_with_scaled_reference() {
    let base = CoincidenceTally::reference_extended();
    let mut last = 0.0;
    for k in [1u64, 2, 4, 8] {
        let t = CoincidenceTally {
            n: base.n * k,
            cp1: base.cp1 * k,
            cp2: base.cp2 * k,
            cr1: base.cr1 * k,
            cr2: base.cr2 * k,
            cr1p1: base.cr1p1 * k,
            cr2p1: base.cr2p1 * k,
            cr1p2: base.cr1p2 * k,
            cr2p2: base.cr2p2 * k,
        };
        let c = analyze(&t, 0.01, 1.0).unwrap().confidence;
        assert!(c >= last, "x{k}: {c} < {last}");
        last = c;
    }
}
