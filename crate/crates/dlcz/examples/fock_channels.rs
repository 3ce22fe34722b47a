//! Building blocks of the Fock-space engine: a thermal mode through loss, added
//! noise and a threshold detector.

use dlcz::fock_core::{thermal_state, ModeRegister};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reg = ModeRegister::uniform(2, 8)?;
    let rho = thermal_state(0.1, &reg, 0)?;
    println!("thermal n = {:.4}, trace = {:.12}", rho.number_expectation(0)?, rho.trace());

    let lossy = rho.loss_channel(0, 0.5)?;
    println!("after 50% loss n = {:.4}", lossy.number_expectation(0)?);

    let noisy = lossy.thermal_noise_channel(0, 0.02)?;
    println!("plus 0.02 added quanta n = {:.4}", noisy.number_expectation(0)?);

    // two modes mixed on a balanced splitter keep their total occupation
    let mixed = rho.beamsplitter(0, 1, 0.5, 0.0)?;
    let total = mixed.number_expectation(0)? + mixed.number_expectation(1)?;
    println!("split: {:.4} + {:.4} = {total:.4}", mixed.number_expectation(0)?, mixed.number_expectation(1)?);

    let c = rho.click_povm(0, 1e-3)?;
    println!("click probability {:.4} (closed form {:.4})", c.p_click, 1.0 - 0.999 / 1.1);
    println!("min eigenvalue {:.2e}, hermiticity error {:.2e}", noisy.min_eigenvalue(), noisy.hermiticity_error());
    Ok(())
}
