//! Recovers the heating timescales from a synthetic pump-probe trace.

use dlcz::noise_model::{fit_pump_probe, standard_delays, synthesize_pump_probe, HeatingParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = HeatingParams { gamma: 1.0 / 4.0e-6, bath_gamma: 1.0 / 0.5e-6, k: 1.5e6, n_init: 0.004, n_final: 0.05 };
    for noise in [0.0, 0.02] {
        let data = synthesize_pump_probe(&truth, 0.004, &standard_delays(), noise, 1)?;
        let fit = fit_pump_probe(&data)?;
        println!(
            "noise {noise:.2}: 1/Gamma = {:.3} us, 1/gamma = {:.3} us, chi2/dof = {:.2}",
            1e6 / fit.heating.gamma,
            1e6 / fit.heating.bath_gamma,
            fit.chi2 / fit.dof as f64
        );
    }
    Ok(())
}
