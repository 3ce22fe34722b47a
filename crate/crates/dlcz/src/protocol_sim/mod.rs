//! The three-step heralding protocol: pump and herald, free evolution over the
//! delay, readout through the shared interferometer. Exact per-trial outcome
//! tables plus a Monte Carlo click generator sampling from them.

mod campaign;
mod engine;
pub mod presets;
mod stages;

pub use campaign::{run_campaign, sample_histogram, sample_log, ClickLog, ClickRecord, CampaignMeta, Window};
pub use engine::{Evolved, Simulator, Tables};
pub use stages::{
    balance, evolve_delay, exact_witness_r, herald, herald_fluxes, noise_rates, pump_stage, readout_stage, serrodyne_compensation,
    NoiseRates, PumpOutput, ReadOutput, SerrodyneShift,
};

use crate::fock_core::FockError;
use crate::noise_model::{HeatingParams, NoiseBudget, NoiseError, Occupation};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("herald probability is zero")]
    ZeroProbability,
    #[error("witness undefined (no coherence)")]
    NoCoherence,
    #[error("cannot balance: {0}")]
    Unbalanceable(String),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

/// Descriptive only; never enters the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct DeviceMeta {
    pub wavelength_nm: f64,
    pub quality_factor: f64,
    pub g0_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Mechanical angular frequency (rad/s).
    pub omega_m: f64,
    /// Energy decay rate Γ (1/s).
    pub gamma_decay: f64,
    /// Heating-bath coupling k (phonons/s).
    pub bath_k: f64,
    /// Bath decay rate γ (1/s).
    pub bath_gamma: f64,
    pub n_init: f64,
    pub p_pump: f64,
    pub p_read: f64,
    pub eta_path: f64,
    /// Leaked pump counts per detected phonon.
    pub n_leak: f64,
    /// Occupation added by the read pulse itself.
    pub n_read_heating: f64,
    pub meta: DeviceMeta,
}

impl DeviceParams {
    pub fn validate(&self, name: &str, errs: &mut Vec<String>) {
        for (key, v) in [
            ("omega_m", self.omega_m),
            ("gamma_decay", self.gamma_decay),
            ("bath_k", self.bath_k),
            ("bath_gamma", self.bath_gamma),
            ("n_init", self.n_init),
            ("n_leak", self.n_leak),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                errs.push(format!("{name}.{key} must be finite and >= 0, got {v}"));
            }
        }
        for (key, v) in [("p_pump", self.p_pump), ("p_read", self.p_read), ("eta_path", self.eta_path)] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(format!("{name}.{key} must lie in [0, 1], got {v}"));
            }
        }
        if self.p_pump > 0.05 {
            errs.push(format!("{name}.p_pump must satisfy p_pump ≤ 0.05, got {}", self.p_pump));
        }
        if !(0.0..0.5).contains(&self.n_read_heating) {
            errs.push(format!("{name}.n_read_heating must lie in [0, 0.5), got {}", self.n_read_heating));
        }
    }

    pub fn heating(&self) -> HeatingParams {
        HeatingParams {
            gamma: self.gamma_decay,
            bath_gamma: self.bath_gamma,
            k: self.bath_k,
            n_init: self.n_init,
            n_final: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    A,
    B,
}

impl Arm {
    pub fn index(self) -> usize {
        match self {
            Arm::A => 0,
            Arm::B => 1,
        }
    }
}

/// Intensity envelope of the scattered photons, used only when the frequency shift is not compensated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Envelope {
    Gaussian { fwhm: f64 },
    Rectangular { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Serrodyne {
    pub compensated: bool,
    pub envelope: Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerConfig {
    pub phi0: f64,
    pub delta_phi: f64,
    /// ΔΩ_m = Ω_B − Ω_A (rad/s).
    pub delta_omega_m: f64,
    pub splitter_deviation: f64,
    /// Pump attenuation on `balance_arm`, scaling its scattering probability.
    pub balance_attenuation: f64,
    pub balance_arm: Arm,
    pub phase_jitter_sigma: f64,
    pub serrodyne: Serrodyne,
}

impl InterferometerConfig {
    pub fn validate(&self, errs: &mut Vec<String>) {
        if !(0.0..=0.1).contains(&self.splitter_deviation) {
            errs.push(format!("splitter_deviation must lie in [0, 0.1], got {}", self.splitter_deviation));
        }
        if !(0.0..=1.0).contains(&self.balance_attenuation) {
            errs.push(format!("balance_attenuation must lie in [0, 1], got {}", self.balance_attenuation));
        }
        if !(self.phase_jitter_sigma >= 0.0 && self.phase_jitter_sigma.is_finite()) {
            errs.push(format!("phase_jitter_sigma must be >= 0, got {}", self.phase_jitter_sigma));
        }
        for (k, v) in [("phi0", self.phi0), ("delta_phi", self.delta_phi), ("delta_omega_m", self.delta_omega_m)] {
            if !v.is_finite() {
                errs.push(format!("{k} must be finite"));
            }
        }
        let w = match self.serrodyne.envelope {
            Envelope::Gaussian { fwhm } => fwhm,
            Envelope::Rectangular { width } => width,
        };
        if !(w > 0.0 && w.is_finite()) {
            errs.push(format!("photon envelope width must be > 0, got {w}"));
        }
    }

    /// Power transmittance of the combiner: device A → detector 1.
    pub fn transmittance(&self) -> f64 {
        0.5 * (1.0 + self.splitter_deviation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: [f64; 2],
    /// Dark/background click probability per gating window.
    pub p_dark: [f64; 2],
}

impl DetectorModel {
    pub fn validate(&self, errs: &mut Vec<String>) {
        for j in 0..2 {
            if !(0.0..=1.0).contains(&self.efficiency[j]) {
                errs.push(format!("detector{}.efficiency must lie in [0, 1], got {}", j + 1, self.efficiency[j]));
            }
            if !(0.0..=1e-2).contains(&self.p_dark[j]) {
                errs.push(format!("detector{}.p_dark must lie in [0, 1e-2], got {}", j + 1, self.p_dark[j]));
            }
        }
    }

    /// Background counts per detected read phonon at detector `j` (0-based),
    /// relative to a phonon of device `i` arriving through a 50/50 combiner.
    pub fn n_bg(&self, j: usize, dev: &DeviceParams) -> f64 {
        let signal = dev.p_read * dev.eta_path * 0.5 * self.efficiency[j];
        if signal > 0.0 {
            self.p_dark[j] / signal
        } else {
            f64::INFINITY
        }
    }

    /// Dark probabilities reproducing a background of `n_bg` counts per detected phonon.
    pub fn with_background(efficiency: [f64; 2], n_bg: f64, devices: &[DeviceParams; 2]) -> Self {
        let eta = 0.5 * (devices[0].eta_path + devices[1].eta_path);
        let p_read = 0.5 * (devices[0].p_read + devices[1].p_read);
        let p_dark = [0, 1].map(|j| n_bg * p_read * eta * 0.5 * efficiency[j]);
        Self { efficiency, p_dark }
    }
}

/// Fock cutoffs and discretization controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub mech_pump: usize,
    pub optical: usize,
    /// Mechanical cutoff during the delay; `None` picks one from the peak occupation.
    pub delay: Option<usize>,
    pub read: usize,
    pub slices: usize,
    /// Gauss–Hermite nodes for averaging over phase jitter.
    pub jitter_nodes: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { mech_pump: 5, optical: 3, delay: None, read: 5, slices: 16, jitter_nodes: 7 }
    }
}

impl Truncation {
    pub fn validate(&self, errs: &mut Vec<String>) {
        for (k, v) in [("mech_pump", self.mech_pump), ("optical", self.optical), ("read", self.read)] {
            if v < 2 {
                errs.push(format!("truncation.{k} must be >= 2, got {v}"));
            }
        }
        if let Some(d) = self.delay {
            if d < self.mech_pump {
                errs.push(format!("truncation.delay must be >= mech_pump, got {d}"));
            }
        }
        if self.slices == 0 {
            errs.push("truncation.slices must be >= 1".into());
        }
        if self.jitter_nodes == 0 || self.jitter_nodes > 40 {
            errs.push(format!("truncation.jitter_nodes must lie in [1, 40], got {}", self.jitter_nodes));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub devices: [DeviceParams; 2],
    pub interferometer: InterferometerConfig,
    pub detectors: DetectorModel,
    /// Delay between pump and read pulses (s).
    pub tau: f64,
    pub truncation: Truncation,
}

impl ProtocolConfig {
    /// Every invariant violation, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        self.devices[0].validate("device_a", &mut errs);
        self.devices[1].validate("device_b", &mut errs);
        self.interferometer.validate(&mut errs);
        self.detectors.validate(&mut errs);
        self.truncation.validate(&mut errs);
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            errs.push(format!("tau must be finite and >= 0, got {}", self.tau));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ProtocolError::Config(errs.join("; ")))
        }
    }

    /// Scattering probabilities after the balancing attenuation.
    pub fn effective_p_pump(&self) -> [f64; 2] {
        let mut p = [self.devices[0].p_pump, self.devices[1].p_pump];
        p[self.interferometer.balance_arm.index()] *= self.interferometer.balance_attenuation;
        p
    }

    /// Per-device noise budgets with the delay dynamics as the incoherent occupation,
    /// background referred to detector 2.
    pub fn noise_budgets(&self) -> [NoiseBudget; 2] {
        let p = self.effective_p_pump();
        [0, 1].map(|i| {
            let d = &self.devices[i];
            NoiseBudget {
                n_th: Occupation::Dynamic { heating: d.heating(), n0: d.n_init, n_probe: d.n_read_heating, stokes: 0.0 },
                p_pump: p[i],
                n_leak: d.n_leak,
                n_bg: self.detectors.n_bg(1, d),
                gamma: d.gamma_decay,
            }
        })
    }
}
