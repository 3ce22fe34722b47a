//! Phonon heating and decay: rate-equation occupation, pump-probe fitting,
//! single-device cross-correlation and the interference visibility bound.

mod fit;

pub use fit::{fit_pump_probe, read_pump_probe_csv, standard_delays, synthesize_pump_probe, write_pump_probe_csv, FitResult, Sample};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("noise budget term {0} = {1} outside [0, 0.5)")]
    Budget(&'static str, f64),
    #[error("g2 denominator below 1e-9")]
    Denominator,
    #[error("no quantum correlation (g2 = {0} <= 1)")]
    NoCorrelation(f64),
    #[error("fit needs at least 6 samples at distinct times, got {0}")]
    TooFewSamples(usize),
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    #[error("fit did not converge after {iterations} iterations (best chi2 {chi2:.4e})")]
    NoConvergence { iterations: usize, chi2: f64, best: [f64; 5] },
    #[error("pump-probe data: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, NoiseError>;

/// Coefficients of ṅ = −Γn + k e^{−γt} + Γ n_init, rates in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingParams {
    pub gamma: f64,
    pub bath_gamma: f64,
    pub k: f64,
    pub n_init: f64,
    pub n_final: f64,
}

impl HeatingParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma", self.gamma),
            ("bath_gamma", self.bath_gamma),
            ("k", self.k),
            ("n_init", self.n_init),
            ("n_final", self.n_final),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(NoiseError::Param(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Bath coupling rescaled linearly with pulse energy.
    pub fn scaled(&self, energy_ratio: f64) -> Self {
        Self { k: self.k * energy_ratio, ..*self }
    }
}

/// (e^{−Γt} − e^{−γt})/(γ − Γ), continuous through γ = Γ.
fn rise(gamma: f64, bath: f64, t: f64) -> f64 {
    let d = bath - gamma;
    if d == 0.0 {
        t * (-gamma * t).exp()
    } else {
        -(-gamma * t).exp() * (-d * t).exp_m1() / d
    }
}

/// Solution of the rate equation with n(0) = n0.
pub fn occupation(t: f64, p: &HeatingParams, n0: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(NoiseError::Param(format!("t must be >= 0, got {t}")));
    }
    p.validate()?;
    let e = (-p.gamma * t).exp();
    Ok(p.n_init + (n0 - p.n_init) * e + p.k * rise(p.gamma, p.bath_gamma, t))
}

/// Phonons injected by the bath between t0 and t1, as seen at t1 (decay included).
pub fn injected(t0: f64, t1: f64, p: &HeatingParams) -> f64 {
    let dt = t1 - t0;
    let from_bath = p.k * (-p.bath_gamma * t0).exp() * rise(p.gamma, p.bath_gamma, dt);
    from_bath + p.n_init * (-(-p.gamma * dt).exp_m1())
}

/// Incoherent occupation entering the correlation formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Occupation {
    Constant(f64),
    /// n(t) from the rate equation, plus a probe-induced offset, minus a Stokes share e^{−Γt}.
    Dynamic { heating: HeatingParams, n0: f64, n_probe: f64, stokes: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub n_th: Occupation,
    pub p_pump: f64,
    pub n_leak: f64,
    pub n_bg: f64,
    /// Energy decay rate Γ (1/s).
    pub gamma: f64,
}

impl NoiseBudget {
    pub fn n_th_at(&self, t: f64) -> Result<f64> {
        match self.n_th {
            Occupation::Constant(n) => Ok(n),
            Occupation::Dynamic { heating, n0, n_probe, stokes } => {
                Ok(occupation(t, &heating, n0)? + n_probe - stokes * (-heating.gamma * t).exp())
            }
        }
    }

    fn check(&self, n_th: f64) -> Result<()> {
        for (name, v) in [("n_th", n_th), ("p_pump", self.p_pump), ("n_leak", self.n_leak), ("n_bg", self.n_bg)] {
            if !(0.0..0.5).contains(&v) {
                return Err(NoiseError::Budget(name, v));
            }
        }
        if !(self.gamma >= 0.0) {
            return Err(NoiseError::Param(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// g²_{r,p}(t) ≈ 1 + e^{−Γt}/(n_th(t) + p_pump e^{−Γt} + n_leak + n_bg).
pub fn g2_single_device(t: f64, b: &NoiseBudget) -> Result<f64> {
    let n_th = b.n_th_at(t)?;
    b.check(n_th)?;
    let e = (-b.gamma * t).exp();
    let den = n_th + b.p_pump * e + b.n_leak + b.n_bg;
    if den < 1e-9 {
        return Err(NoiseError::Denominator);
    }
    Ok(1.0 + e / den)
}

/// Incoherent occupation implied by a measured g². May come out negative.
pub fn invert_noise_budget(g2: f64, t: f64, p_pump: f64, n_leak: f64, n_bg: f64, gamma: f64) -> Result<f64> {
    if !(g2 > 1.0) {
        return Err(NoiseError::NoCorrelation(g2));
    }
    let e = (-gamma * t).exp();
    Ok(e / (g2 - 1.0) - p_pump * e - n_leak - n_bg)
}

/// Inversion carried through the ends of a g² interval; the larger g² gives the smaller n_th.
pub fn invert_interval(
    g2: (f64, f64, f64),
    t: f64,
    p_pump: f64,
    n_leak: f64,
    n_bg: f64,
    gamma: f64,
) -> Result<(f64, f64, f64)> {
    let f = |g| invert_noise_budget(g, t, p_pump, n_leak, n_bg, gamma);
    Ok((f(g2.0)?, f(g2.2)?, f(g2.1)?))
}

/// V_max = C/(C + 2), C = min(g²_A, g²_B) − 1.
pub fn visibility_bound_from_g2(g2_a: f64, g2_b: f64) -> f64 {
    let c = (g2_a.min(g2_b) - 1.0).max(0.0);
    if c.is_infinite() {
        1.0
    } else {
        c / (c + 2.0)
    }
}

pub fn visibility_bound(t: f64, a: &NoiseBudget, b: &NoiseBudget) -> Result<f64> {
    Ok(visibility_bound_from_g2(g2_single_device(t, a)?, g2_single_device(t, b)?))
}

#[cfg(test)]
mod tests;
