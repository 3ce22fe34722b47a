//! Single-device g² from the noise budget, its inversion, and the visibility bound.

use dlcz::noise_model::{g2_single_device, invert_noise_budget, visibility_bound_from_g2, NoiseBudget, Occupation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tau = 123e-9;
    let devices = [("A", 0.119, 0.0056, 4.0e-6), ("B", 0.069, 0.0080, 5.8e-6)];
    let mut g2 = Vec::new();
    for (name, n_th, p_pump, lifetime) in devices {
        let b = NoiseBudget { n_th: Occupation::Constant(n_th), p_pump, n_leak: 0.032, n_bg: 0.003, gamma: 1.0 / lifetime };
        let g = g2_single_device(tau, &b)?;
        let back = invert_noise_budget(g, tau, p_pump, 0.032, 0.003, 1.0 / lifetime)?;
        println!("device {name}: g2 = {g:.2}, inverted n_th = {back:.4}");
        g2.push(g);
    }
    println!("visibility bound {:.3}", visibility_bound_from_g2(g2[0], g2[1]));
    Ok(())
}
