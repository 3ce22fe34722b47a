//! How likely two (or four) chips contain devices matched within 100 MHz.

use dlcz::planner::{multi_chip_yield, pair_yield, YieldModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for offset in [0.0, 2.5, 5.0] {
        let mut m = YieldModel::uniform(2, 234, 2.0, 100.0);
        m.offset_nm[1] = offset;
        let r = pair_yield(&m, 20_000, 1)?;
        println!("offset {offset:.1} nm: analytic {:.6}, Monte Carlo {:.4} +- {:.4}", r.analytic, r.monte_carlo, r.standard_error);
    }
    let r = multi_chip_yield(&YieldModel::uniform(4, 500, 2.0, 100.0), 5_000, 2)?;
    println!("four chips: analytic {:.3}, Monte Carlo {:.3} +- {:.3}", r.analytic, r.monte_carlo, r.standard_error);
    Ok(())
}
