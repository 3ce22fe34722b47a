//! Physicality of states under random channel sequences, and cutoff convergence.

use dlcz::fock_core::{DensityMatrix, FockError, ModeRegister};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Squeeze(usize, usize, f64, f64),
    Split(usize, usize, f64, f64),
    Loss(usize, f64),
    Noise(usize, f64),
    Dephase(usize, f64),
    Rotate(usize, f64),
}

fn pair() -> impl Strategy<Value = (usize, usize)> {
    (0usize..3, 1usize..3).prop_map(|(a, k)| (a, (a + k) % 3))
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (pair(), 0.0..0.03f64, -3.2..3.2f64).prop_map(|((a, b), p, ph)| Op::Squeeze(a, b, p, ph)),
        (pair(), 0.0..=1.0f64, -3.2..3.2f64).prop_map(|((a, b), t, ph)| Op::Split(a, b, t, ph)),
        (0usize..3, 0.0..=1.0f64).prop_map(|(m, e)| Op::Loss(m, e)),
        (0usize..3, 0.0..0.02f64).prop_map(|(m, n)| Op::Noise(m, n)),
        (0usize..3, 0.0..=1.0f64).prop_map(|(m, o)| Op::Dephase(m, o)),
        (0usize..3, -3.2..3.2f64).prop_map(|(m, p)| Op::Rotate(m, p)),
    ]
}

fn apply(s: &DensityMatrix, op: &Op) -> Result<DensityMatrix, FockError> {
    match *op {
        Op::Squeeze(a, b, p, ph) => s.two_mode_squeeze(a, b, p, ph),
        Op::Split(a, b, t, ph) => s.beamsplitter(a, b, t, ph),
        Op::Loss(m, e) => s.loss_channel(m, e),
        Op::Noise(m, n) => s.thermal_noise_channel(m, n),
        Op::Dephase(m, o) => s.dephase(m, o),
        Op::Rotate(m, p) => s.phase_rotation(m, p),
    }
}

fn assert_physical(s: &DensityMatrix) -> Result<(), TestCaseError> {
    prop_assert!((s.trace() - 1.0).abs() < 1e-10, "trace {}", s.trace());
    prop_assert!(s.hermiticity_error() < 1e-10, "hermiticity {}", s.hermiticity_error());
    prop_assert!(s.min_eigenvalue() >= -1e-10, "min eigenvalue {}", s.min_eigenvalue());
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn channel_sequences_stay_physical(
        n in proptest::collection::vec(0.0..0.03f64, 3),
        ops in proptest::collection::vec(op(), 1..7),
        p_dark in 0.0..0.01f64,
    ) {
        let reg = ModeRegister::uniform(3, 4).unwrap();
        let mut s = DensityMatrix::thermal_product(&reg, &n).unwrap();
        for o in &ops {
            match apply(&s, o) {
                Ok(next) => s = next,
                // truncation refusals are a legitimate outcome, not a physicality failure
                Err(FockError::CutoffTooSmall(_) | FockError::CutoffTooSmallForSqueeze(_)) => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(format!("{o:?}: {e}"))),
            }
            assert_physical(&s)?;
        }
        let out = s.click_povm(0, p_dark).unwrap();
        prop_assert!((0.0..=1.0).contains(&out.p_click));
        if out.p_click > 1e-9 {
            assert_physical(out.given_click().unwrap())?;
        }
        if let Some(nc) = &out.given_noclick {
            assert_physical(nc)?;
        }
    }

    #[test]
    fn cutoff_convergence(
        n in 0.0..0.01f64,
        p in 0.0..0.02f64,
        t in 0.0..=1.0f64,
        eta in 0.3..=1.0f64,
        ph in -3.2..3.2f64,
    ) {
        let run = |c: usize| -> Vec<f64> {
            let reg = ModeRegister::uniform(3, c).unwrap();
            let s = DensityMatrix::thermal_product(&reg, &[n, n, 0.0]).unwrap()
                .two_mode_squeeze(0, 2, p, 0.0).unwrap()
                .two_mode_squeeze(1, 2, p, ph).unwrap()
                .beamsplitter(0, 1, t, ph).unwrap()
                .loss_channel(0, eta).unwrap();
            let click = s.click_povm(2, 0.0).unwrap();
            let mut v: Vec<f64> = (0..3).map(|m| s.number_expectation(m).unwrap()).collect();
            v.push(click.p_click);
            v
        };
        let (lo, hi) = (run(4), run(6));
        for (a, b) in lo.iter().zip(&hi) {
            prop_assert!((a - b).abs() < 1e-5, "{lo:?} vs {hi:?}");
        }
    }
}
