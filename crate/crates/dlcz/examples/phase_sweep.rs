//! Simulated g² fringe versus the read phase at 123 ns, with a sinusoidal fit.

use dlcz::protocol_sim::{presets, sample_histogram, Simulator};
use dlcz::stats::{fit_fringe, g2_from_counts, visibility, CoincidenceTally, FringePoint, FringeUnit, VisibilityMode};
use std::f64::consts::PI;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials: u64 = std::env::args().nth(1).map_or(Ok(20_000_000), |s| s.parse())?;
    let sim = Simulator::new(&presets::desk())?;
    let ev = sim.evolve(presets::TAU_REF)?;
    let mut pts = Vec::new();
    println!("dphi/pi  g2_same  exact");
    for k in 0..12 {
        let phi = k as f64 * PI / 6.0;
        let tab = sim.tables_for(&ev, phi)?;
        let t = CoincidenceTally::from_histogram(trials, &sample_histogram(&tab, trials, k))?;
        let g = g2_from_counts(&t, 1, 1)?;
        println!("{:>7.3}  {:>7.2}  {:>5.2}", phi / PI, g.value, tab.g2(1, 1));
        pts.push(FringePoint { x: phi, y: g.value, lo: g.lo, hi: g.hi });
    }
    let fit = fit_fringe(&pts, FringeUnit::Phase)?;
    println!("period {:.3} pi, visibility {:.3}", fit.period_reported(), visibility(&pts, VisibilityMode::Fitted(FringeUnit::Phase))?);
    Ok(())
}
