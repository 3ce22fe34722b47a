//! A small Monte Carlo campaign: click log to CSV, back, and into a coincidence tally.

use dlcz::protocol_sim::{presets, run_campaign, ClickLog};
use dlcz::stats::{g2_from_counts, tally, WindowDefs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = presets::desk();
    let log = run_campaign(&cfg, 1_000_000, 42)?;
    let csv = log.to_csv();
    let back = ClickLog::from_parts(&csv, &log.meta_json())?;
    assert_eq!(back, log);
    let t = tally(&log, &WindowDefs::default())?;
    println!("{} click records, {} bytes of CSV", log.records.len(), csv.len());
    println!("{}", t.to_json());
    for (i, j) in [(1, 1), (2, 1)] {
        let g = g2_from_counts(&t, i, j)?;
        println!("g2(r{i},p{j}) = {:.2} [{:.2}, {:.2}]", g.value, g.lo, g.hi);
    }
    Ok(())
}
