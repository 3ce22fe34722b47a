//! Fiber that fits between the devices before correlations drop to a g² floor of 7.1,
//! and the measurement time that separation costs.

use dlcz::planner::{integration_time, max_separation, LinkBudget, ReferenceRun};
use dlcz::stats::{analyze, CoincidenceTally};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = CoincidenceTally::reference_extended();
    let link = LinkBudget::reference(ReferenceRun::from_analysis(&t, &analyze(&t, 0.01, 1.0)?));
    let s = max_separation(&link, 7.1)?;
    println!("added loss {:.2} dB / {:.2} dB, fiber {:.1} km + {:.1} km = {:.1} km", s.added_db[0], s.added_db[1], s.km[0], s.km[1], s.total_km);
    for km in [0.0, 50.0, 75.0, 94.0] {
        let p = integration_time(&link, 7.1, km, 3.0)?;
        println!("{km:>5.1} km: {:.1} km / {:.1} km, {:.2e} trials, {:.1} days", p.km[0], p.km[1], p.trials, p.days);
    }
    Ok(())
}
