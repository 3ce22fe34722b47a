use super::{
    Arm, DetectorModel, DeviceParams, Envelope, InterferometerConfig, ProtocolError, Result, Truncation, Window,
};
use crate::fock_core::{DensityMatrix, ModeRegister, MomentSpec, Superop};
use crate::noise_model::{injected, occupation};
use crate::quad::gauss_hermite;
use serde::{Deserialize, Serialize};

// pump-stage register layout
const M_A: usize = 0;
const M_B: usize = 1;
const P_1: usize = 2;
const P_2: usize = 3;

/// Fraction of device `i`'s light reaching detector `j` through the combiner.
fn routing(ifo: &InterferometerConfig) -> [[f64; 2]; 2] {
    let t = ifo.transmittance();
    [[t, 1.0 - t], [1.0 - t, t]]
}

/// Independent background click probabilities per window and detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRates {
    pub pump: [f64; 2],
    pub read: [f64; 2],
}

/// Leaked pump light as Poisson clicks scaled from the signal flux, OR'd with dark counts.
pub fn noise_rates(devices: &[DeviceParams; 2], p_pump: [f64; 2], ifo: &InterferometerConfig, det: &DetectorModel) -> NoiseRates {
    let r = routing(ifo);
    let q = |j: usize, per_device: &dyn Fn(usize) -> f64| {
        let mu: f64 = (0..2).map(|i| devices[i].n_leak * per_device(i) * devices[i].eta_path * r[i][j] * det.efficiency[j]).sum();
        1.0 - (1.0 - det.p_dark[j]) * (-mu).exp()
    };
    NoiseRates {
        pump: [0, 1].map(|j| q(j, &|i| p_pump[i])),
        read: [0, 1].map(|j| q(j, &|i| devices[i].p_read)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerrodyneShift {
    /// Drive frequency offsets (rad/s) applied to arms A and B.
    pub drive_shift: [f64; 2],
    /// Temporal-mode overlap of photons from the two arms.
    pub overlap: f64,
}

fn envelope_overlap(env: Envelope, detuning: f64) -> f64 {
    match env {
        Envelope::Gaussian { fwhm } => {
            let sigma = fwhm / (8.0 * 2f64.ln()).sqrt();
            (-0.5 * (detuning * sigma).powi(2)).exp()
        }
        Envelope::Rectangular { width } => {
            let x = 0.5 * detuning * width;
            if x == 0.0 {
                1.0
            } else {
                (x.sin() / x).abs()
            }
        }
    }
}

/// Frequency bookkeeping of the shifter: the pump window moves arm A's drive up by ΔΩ_m,
/// the read window down by ΔΩ_m. Without compensation the photons keep their detuning
/// and only the envelope overlap survives in the interference terms.
pub fn serrodyne_compensation(ifo: &InterferometerConfig, window: Window) -> SerrodyneShift {
    let d = ifo.delta_omega_m;
    if d == 0.0 {
        return SerrodyneShift { drive_shift: [0.0, 0.0], overlap: 1.0 };
    }
    if ifo.serrodyne.compensated {
        let sign = match window {
            Window::Pump => 1.0,
            Window::Read => -1.0,
        };
        SerrodyneShift { drive_shift: [sign * d, 0.0], overlap: 1.0 }
    } else {
        SerrodyneShift { drive_shift: [0.0, 0.0], overlap: envelope_overlap(ifo.serrodyne.envelope, d) }
    }
}

/// State just before the pump-window detectors fire, and what they see.
#[derive(Debug, Clone)]
pub struct PumpOutput {
    /// Modes {m_A, m_B, p_1, p_2}; detector efficiency already applied to p_j.
    pub state: DensityMatrix,
    /// Click probability from scattered photons alone.
    pub signal: [f64; 2],
    /// Independent leak/dark click probability.
    pub noise: [f64; 2],
    /// Total click probability per detector.
    pub click: [f64; 2],
}

fn check_parts(devices: &[DeviceParams; 2], ifo: &InterferometerConfig, det: &DetectorModel, trunc: &Truncation) -> Result<()> {
    let mut errs = Vec::new();
    devices[0].validate("device_a", &mut errs);
    devices[1].validate("device_b", &mut errs);
    ifo.validate(&mut errs);
    det.validate(&mut errs);
    trunc.validate(&mut errs);
    if errs.is_empty() {
        Ok(())
    } else {
        Err(ProtocolError::Config(errs.join("; ")))
    }
}

fn effective_p(devices: &[DeviceParams; 2], ifo: &InterferometerConfig) -> [f64; 2] {
    let mut p = [devices[0].p_pump, devices[1].p_pump];
    p[ifo.balance_arm.index()] *= ifo.balance_attenuation;
    p
}

pub fn pump_stage(
    devices: &[DeviceParams; 2],
    ifo: &InterferometerConfig,
    det: &DetectorModel,
    trunc: &Truncation,
) -> Result<PumpOutput> {
    check_parts(devices, ifo, det, trunc)?;
    let p = effective_p(devices, ifo);
    let reg = ModeRegister::with_cutoffs(&[trunc.mech_pump, trunc.mech_pump, trunc.optical, trunc.optical])?;
    let rho = DensityMatrix::thermal_product(&reg, &[devices[0].n_init, devices[1].n_init, 0.0, 0.0])?;
    let shift = serrodyne_compensation(ifo, Window::Pump);
    let mut s = rho.two_mode_squeeze(M_A, P_1, p[0], 0.0)?.two_mode_squeeze(M_B, P_2, p[1], 0.0)?;
    s = s.loss_channel(P_1, devices[0].eta_path)?.loss_channel(P_2, devices[1].eta_path)?;
    s = s.phase_rotation(P_2, ifo.phi0)?;
    if shift.overlap < 1.0 {
        s = s.dephase(P_2, shift.overlap)?;
    }
    s = s.beamsplitter(P_1, P_2, ifo.transmittance(), 0.0)?;
    s = s.loss_channel(P_1, det.efficiency[0])?.loss_channel(P_2, det.efficiency[1])?;
    let signal = [
        s.click_povm(P_1, 0.0)?.p_click,
        s.click_povm(P_2, 0.0)?.p_click,
    ];
    let noise = noise_rates(devices, p, ifo, det).pump;
    let click = [0, 1].map(|j| 1.0 - (1.0 - signal[j]) * (1.0 - noise[j]));
    Ok(PumpOutput { state: s, signal, noise, click })
}

/// Mechanical states for the four signal click patterns (bit 0: detector 1, bit 1: detector 2).
pub(crate) fn pump_patterns(out: &PumpOutput) -> Result<Vec<(f64, Option<DensityMatrix>)>> {
    let first = out.state.click_povm(P_1, 0.0)?;
    let mut pats = vec![(0.0, None); 4];
    let branches = [(0usize, 1.0 - first.p_click, first.given_noclick.clone()), (1, first.p_click, first.given_click().ok().cloned())];
    for (bit1, p1, st) in branches {
        let Some(st) = st else { continue };
        // detector 2 is mode 2 once detector 1 has been traced out
        let second = st.click_povm(2, 0.0)?;
        pats[bit1] = (p1 * (1.0 - second.p_click), second.given_noclick.clone());
        pats[bit1 | 2] = (p1 * second.p_click, second.given_click().ok().cloned());
    }
    for p in pats.iter_mut() {
        if p.0 <= 0.0 {
            *p = (0.0, None);
        }
    }
    Ok(pats)
}

/// Conditional mechanical state after a click on detector `j` (1 or 2), whatever the other detector saw.
pub fn herald(out: &PumpOutput, j: usize) -> Result<(DensityMatrix, f64)> {
    if !(j == 1 || j == 2) {
        return Err(ProtocolError::Config(format!("detector must be 1 or 2, got {j}")));
    }
    let mode = if j == 1 { P_1 } else { P_2 };
    let c = out.state.click_povm(mode, 0.0)?;
    let q = out.noise[j - 1];
    let p_sig = c.p_click;
    let p = p_sig + q * (1.0 - p_sig);
    if !(p > 0.0) {
        return Err(ProtocolError::ZeroProbability);
    }
    let mut parts = Vec::new();
    if let Ok(s) = c.given_click() {
        parts.push((p_sig, s));
    }
    if let Some(s) = &c.given_noclick {
        if q > 0.0 {
            parts.push((q * (1.0 - p_sig), s));
        }
    }
    let mixed = DensityMatrix::mixture(&parts)?;
    Ok((mixed.partial_trace(&[M_A, M_B])?, p))
}

/// Mechanical cutoff large enough for the hottest moment of the delay.
pub(crate) fn delay_cutoff(devices: &[DeviceParams; 2], tau: f64, trunc: &Truncation) -> Result<usize> {
    if let Some(c) = trunc.delay {
        return Ok(c);
    }
    let mut n_peak: f64 = 0.0;
    for d in devices {
        let h = d.heating();
        for s in 0..=trunc.slices {
            let t = tau * s as f64 / trunc.slices as f64;
            n_peak = n_peak.max(occupation(t, &h, d.n_init)? + d.n_read_heating);
        }
    }
    if n_peak <= 0.0 {
        return Ok(trunc.mech_pump);
    }
    let x = n_peak / (1.0 + n_peak);
    let c = ((1e-10f64).ln() / x.ln()).ceil() as usize + 3;
    Ok(c.clamp(trunc.mech_pump, 40))
}

/// Decay, bath heating and the relative mechanical phase ΔΩ_m τ (carried by mode B).
pub fn evolve_delay(
    state: &DensityMatrix,
    tau: f64,
    devices: &[DeviceParams; 2],
    delta_omega_m: f64,
    trunc: &Truncation,
) -> Result<DensityMatrix> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(ProtocolError::Config(format!("tau must be finite and >= 0, got {tau}")));
    }
    let channels = delay_channels(state, tau, devices, trunc)?;
    apply_delay(state, tau, delta_omega_m, &channels)
}

/// Per-slice single-mode maps for both devices, built once and reused across click patterns.
pub(crate) struct DelayChannels {
    cutoff: usize,
    loss: Option<[Superop; 2]>,
    noise: Vec<[Option<Superop>; 2]>,
}

pub(crate) fn delay_channels(state: &DensityMatrix, tau: f64, devices: &[DeviceParams; 2], trunc: &Truncation) -> Result<DelayChannels> {
    let cutoff = delay_cutoff(devices, tau, trunc)?.max(state.register().cutoff(0)).max(state.register().cutoff(1));
    if tau == 0.0 {
        return Ok(DelayChannels { cutoff, loss: None, noise: Vec::new() });
    }
    let d = cutoff + 1;
    let n = trunc.slices;
    let dt = tau / n as f64;
    let loss = [Superop::loss(d, (-devices[0].gamma_decay * dt).exp())?, Superop::loss(d, (-devices[1].gamma_decay * dt).exp())?];
    let mut noise = Vec::with_capacity(n);
    for s in 0..n {
        let (t0, t1) = (s as f64 * dt, (s + 1) as f64 * dt);
        let mut pair = [None, None];
        for (i, dev) in devices.iter().enumerate() {
            let add = injected(t0, t1, &dev.heating());
            if add > 0.0 {
                pair[i] = Some(Superop::additive_noise(d, add)?);
            }
        }
        noise.push(pair);
    }
    Ok(DelayChannels { cutoff, loss: Some(loss), noise })
}

pub(crate) fn apply_delay(state: &DensityMatrix, tau: f64, delta_omega_m: f64, ch: &DelayChannels) -> Result<DensityMatrix> {
    let mut s = state.resize(0, ch.cutoff)?.resize(1, ch.cutoff)?;
    if let Some(loss) = &ch.loss {
        for pair in &ch.noise {
            for i in 0..2 {
                s = s.channel(i, &loss[i])?;
                if let Some(n) = &pair[i] {
                    s = s.channel(i, n)?;
                }
            }
        }
    }
    if tau > 0.0 && delta_omega_m != 0.0 {
        s = s.phase_rotation(1, delta_omega_m * tau)?;
    }
    Ok(s)
}

/// Read-window click statistics from scattered photons alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadOutput {
    /// Pattern probabilities, bit 0: detector 1, bit 1: detector 2.
    pub patterns: [f64; 4],
    pub click: [f64; 2],
}

/// The swap with a fresh optical mode followed by path loss is, once the mechanics is
/// discarded, a loss channel of transmission p_read·η_path acting on the phonon state.
pub(crate) fn readout_prefix(state: &DensityMatrix, devices: &[DeviceParams; 2], trunc: &Truncation) -> Result<DensityMatrix> {
    let mut s = state.clone();
    for (i, d) in devices.iter().enumerate() {
        s = s.thermal_noise_channel(i, d.n_read_heating)?;
        s = s.loss_channel(i, d.p_read * d.eta_path)?;
        s = s.resize(i, trunc.read.min(s.register().cutoff(i)))?;
    }
    Ok(s)
}

pub(crate) fn readout_from_prefix(
    prefix: &DensityMatrix,
    delta_phi: f64,
    ifo: &InterferometerConfig,
    det: &DetectorModel,
    trunc: &Truncation,
) -> Result<ReadOutput> {
    let shift = serrodyne_compensation(ifo, Window::Read);
    let mut base = prefix.clone();
    if shift.overlap < 1.0 {
        base = base.dephase(1, shift.overlap)?;
    }
    let nodes = if ifo.phase_jitter_sigma > 0.0 { gauss_hermite(trunc.jitter_nodes) } else { vec![(0.0, 1.0)] };
    let mut patterns = [0.0; 4];
    for (z, w) in nodes {
        let theta_r = ifo.phi0 + delta_phi + ifo.phase_jitter_sigma * z;
        let s = base
            .phase_rotation(1, theta_r)?
            .beamsplitter(0, 1, ifo.transmittance(), 0.0)?
            .loss_channel(0, det.efficiency[0])?
            .loss_channel(1, det.efficiency[1])?;
        let d1 = s.register().dims()[1];
        let mut p = [0.0; 4];
        for n1 in 0..s.register().dims()[0] {
            for n2 in 0..d1 {
                let bits = usize::from(n1 > 0) | (usize::from(n2 > 0) << 1);
                p[bits] += s.population(&[n1, n2]).max(0.0);
            }
        }
        let tot: f64 = p.iter().sum();
        for k in 0..4 {
            patterns[k] += w * p[k] / tot;
        }
    }
    let click = [patterns[1] + patterns[3], patterns[2] + patterns[3]];
    Ok(ReadOutput { patterns, click })
}

/// Read-window statistics for a mechanical state {m_A, m_B} at read time, with the read
/// phase θ_r = φ0 + Δφ on arm B (averaged over lock jitter).
pub fn readout_stage(
    state: &DensityMatrix,
    delta_phi: f64,
    devices: &[DeviceParams; 2],
    ifo: &InterferometerConfig,
    det: &DetectorModel,
    trunc: &Truncation,
) -> Result<ReadOutput> {
    check_parts(devices, ifo, det, trunc)?;
    if state.register().n_modes() != 2 {
        return Err(ProtocolError::Config("readout expects the two mechanical modes".into()));
    }
    let prefix = readout_prefix(state, devices, trunc)?;
    readout_from_prefix(&prefix, delta_phi, ifo, det, trunc)
}

/// R = ⟨n_A n_B⟩ / |⟨a†b⟩|² on a two-mode mechanical state.
pub fn exact_witness_r(state: &DensityMatrix) -> Result<f64> {
    let num = state.cross_moment(&MomentSpec { factors: vec![(0, 1, 1), (1, 1, 1)] })?.re;
    let coh = state.cross_moment(&MomentSpec { factors: vec![(0, 1, 0), (1, 0, 1)] })?;
    let den = coh.norm_sqr();
    if den < 1e-12 {
        return Err(ProtocolError::NoCoherence);
    }
    Ok(num.max(0.0) / den)
}

/// Herald probability contributed by one device alone, with its scattering probability scaled.
fn single_flux(dev: &DeviceParams, i: usize, scale: f64, ifo: &InterferometerConfig, det: &DetectorModel, trunc: &Truncation) -> Result<f64> {
    let r = routing(ifo);
    let reg = ModeRegister::with_cutoffs(&[trunc.mech_pump, trunc.optical, trunc.optical])?;
    let s = DensityMatrix::thermal_product(&reg, &[dev.n_init, 0.0, 0.0])?
        .two_mode_squeeze(0, 1, dev.p_pump * scale, 0.0)?
        .loss_channel(1, dev.eta_path)?
        .beamsplitter(1, 2, r[i][0], 0.0)?
        .loss_channel(1, det.efficiency[0])?
        .loss_channel(2, det.efficiency[1])?;
    let dims = s.register().dims().to_vec();
    let dark: f64 = (0..dims[0]).map(|m| s.population(&[m, 0, 0]).max(0.0)).sum();
    Ok(1.0 - dark)
}

/// Pump attenuation equalizing the herald flux from the two devices. Returns the arm to
/// attenuate and the factor; an already balanced pair gives (B, 1.0).
pub fn balance(
    devices: &[DeviceParams; 2],
    ifo: &InterferometerConfig,
    det: &DetectorModel,
    trunc: &Truncation,
) -> Result<(Arm, f64)> {
    check_parts(devices, ifo, det, trunc)?;
    let f = [0, 1].map(|i| single_flux(&devices[i], i, 1.0, ifo, det, trunc));
    let f = [f[0].clone()?, f[1].clone()?];
    if !(f[0] > 0.0) || !(f[1] > 0.0) {
        return Err(ProtocolError::Unbalanceable(format!("herald flux A = {:.3e}, B = {:.3e}", f[0], f[1])));
    }
    if (f[0] / f[1] - 1.0).abs() < 1e-12 {
        return Ok((Arm::B, 1.0));
    }
    let (strong, weak) = if f[0] > f[1] { (0, 1) } else { (1, 0) };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if single_flux(&devices[strong], strong, mid, ifo, det, trunc)? > f[weak] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let arm = if strong == 0 { Arm::A } else { Arm::B };
    Ok((arm, 0.5 * (lo + hi)))
}

/// Herald flux of each device alone under the configured pump attenuation.
pub fn herald_fluxes(
    devices: &[DeviceParams; 2],
    ifo: &InterferometerConfig,
    det: &DetectorModel,
    trunc: &Truncation,
) -> Result<[f64; 2]> {
    let p = effective_p(devices, ifo);
    let mut out = [0.0; 2];
    for i in 0..2 {
        let scale = if devices[i].p_pump > 0.0 { p[i] / devices[i].p_pump } else { 0.0 };
        out[i] = single_flux(&devices[i], i, scale, ifo, det, trunc)?;
    }
    Ok(out)
}
