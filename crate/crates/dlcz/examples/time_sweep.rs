//! Delay scan: the fringe visibility decays as the mechanics heat up, and stays
//! below the bound set by the single-device correlations.

use dlcz::noise_model::visibility_bound;
use dlcz::protocol_sim::{presets, Simulator};
use dlcz::stats::{visibility, FringePoint, FringeUnit, VisibilityMode};
use std::f64::consts::PI;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = presets::time_sweep();
    let sim = Simulator::new(&cfg)?;
    let budgets = cfg.noise_budgets();
    println!("tau_us  visibility  bound");
    for tau in [0.123e-6, 0.5e-6, 1.0e-6, 2.0e-6, 3.0e-6] {
        let ev = sim.evolve(tau)?;
        let pts = (0..12)
            .map(|k| {
                let phi = k as f64 * PI / 6.0;
                sim.tables_for(&ev, phi).map(|t| FringePoint::exact(phi, t.g2(1, 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let v = visibility(&pts, VisibilityMode::Fitted(FringeUnit::Phase))?;
        println!("{:>6.3}  {v:>10.3}  {:>5.3}", tau * 1e6, visibility_bound(tau, &budgets[0], &budgets[1])?);
    }
    Ok(())
}
