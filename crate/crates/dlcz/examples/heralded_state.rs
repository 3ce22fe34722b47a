//! One heralding event: pump both devices, condition on a detector click and look
//! at the shared excitation left in the two mechanical modes.

use dlcz::protocol_sim::{exact_witness_r, herald, presets, pump_stage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = presets::paper();
    let out = pump_stage(&cfg.devices, &cfg.interferometer, &cfg.detectors, &cfg.truncation)?;
    println!("herald click probabilities: {:.3e} / {:.3e}", out.click[0], out.click[1]);
    for j in 1..=2 {
        let (state, p) = herald(&out, j)?;
        let (na, nb) = (state.number_expectation(0)?, state.number_expectation(1)?);
        let r = exact_witness_r(&state)?;
        println!("detector {j}: p = {p:.3e}, <n_A> = {na:.3}, <n_B> = {nb:.3}, R = {r:.3}");
    }

    let ideal = presets::ideal(0.01);
    let out = pump_stage(&ideal.devices, &ideal.interferometer, &ideal.detectors, &ideal.truncation)?;
    let (state, _) = herald(&out, 1)?;
    println!("ideal devices: R = {:.4}", exact_witness_r(&state)?);
    Ok(())
}
