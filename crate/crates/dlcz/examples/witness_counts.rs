//! Witness analysis of the published coincidence counts.

use dlcz::stats::{analyze, confidence_below, CoincidenceTally};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, t) in [("optimal phase", CoincidenceTally::reference_opt()), ("extended phase", CoincidenceTally::reference_extended())] {
        let w = analyze(&t, 0.01, 1.0)?;
        println!("{name}:");
        for i in 0..2 {
            let d = &w.per_detector[i];
            println!("  detector {}: R_m = {:.3} (+{:.3} -{:.3})", i + 1, d.ml, d.hi - d.ml, d.ml - d.lo);
        }
        let s = &w.symmetrized;
        println!("  symmetrized R_m = {:.3}, P(R_m < 1) = {:.4}, P(R_m < 0.995) = {:.4}", s.ml, w.confidence, confidence_below(s, 0.995)?);
    }
    Ok(())
}
