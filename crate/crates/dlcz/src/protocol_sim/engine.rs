use super::stages::{self, DelayChannels, NoiseRates, PumpOutput};
use super::{ProtocolConfig, ProtocolError, Result};
use crate::fock_core::DensityMatrix;
use serde::{Deserialize, Serialize};

/// Exact per-trial outcome distribution at one (τ, Δφ) setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    pub tau: f64,
    pub delta_phi: f64,
    /// Signal-only joint probabilities [pump pattern][read pattern]; bit 0 is detector 1.
    pub signal: [[f64; 4]; 4],
    pub noise: NoiseRates,
    /// Observed outcome probabilities, index = pump bits | read bits << 2.
    pub observed: [f64; 16],
    /// Exact R of the mechanics heralded on detector 1 and 2 (None without coherence).
    pub witness: [Option<f64>; 2],
    pub truncation: f64,
}

fn bit(x: usize, k: usize) -> bool {
    (x >> k) & 1 == 1
}

impl Tables {
    fn marginal(&self, k: usize) -> f64 {
        (0..16).filter(|&o| bit(o, k)).map(|o| self.observed[o]).sum()
    }

    /// Pump-window click probability on detector `j` (1 or 2).
    pub fn herald_probability(&self, j: usize) -> f64 {
        self.marginal(j - 1)
    }

    pub fn read_probability(&self, i: usize) -> f64 {
        self.marginal(i + 1)
    }

    /// P(read click on i and pump click on j).
    pub fn coincidence(&self, i: usize, j: usize) -> f64 {
        (0..16).filter(|&o| bit(o, j - 1) && bit(o, i + 1)).map(|o| self.observed[o]).sum()
    }

    /// Exact normalized coincidence g²_{r_i,p_j}.
    pub fn g2(&self, i: usize, j: usize) -> f64 {
        self.coincidence(i, j) / (self.read_probability(i) * self.herald_probability(j))
    }

    /// Probability of a click on either pump-window detector.
    pub fn any_herald(&self) -> f64 {
        (0..16).filter(|&o| o & 3 != 0).map(|o| self.observed[o]).sum()
    }
}

/// Folds independent noise clicks into the signal patterns.
pub(crate) fn observe(signal: &[[f64; 4]; 4], noise: &NoiseRates) -> [f64; 16] {
    let q = [noise.pump[0], noise.pump[1], noise.read[0], noise.read[1]];
    let mut obs = [0.0; 16];
    for sp in 0..4 {
        for sr in 0..4 {
            let s = sp | (sr << 2);
            let p = signal[sp][sr];
            if p == 0.0 {
                continue;
            }
            for nb in 0..16usize {
                let w: f64 = (0..4).map(|k| if bit(nb, k) { q[k] } else { 1.0 - q[k] }).product();
                obs[s | nb] += p * w;
            }
        }
    }
    obs
}

/// States at read time for each pump pattern; independent of Δφ.
pub struct Evolved {
    tau: f64,
    states: Vec<(f64, Option<DensityMatrix>)>,
    prefixes: Vec<Option<DensityMatrix>>,
    witness: [Option<f64>; 2],
}

/// Caches the pump stage so that sweeps only redo the delay and the readout.
pub struct Simulator {
    cfg: ProtocolConfig,
    pump: PumpOutput,
    patterns: Vec<(f64, Option<DensityMatrix>)>,
}

impl Simulator {
    pub fn new(cfg: &ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        let pump = stages::pump_stage(&cfg.devices, &cfg.interferometer, &cfg.detectors, &cfg.truncation)?;
        let patterns = stages::pump_patterns(&pump)?
            .into_iter()
            .map(|(p, s)| Ok((p, s.map(|s| s.partial_trace(&[0, 1])).transpose()?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cfg: *cfg, pump, patterns })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn pump(&self) -> &PumpOutput {
        &self.pump
    }

    /// Signal pump pattern probabilities.
    pub fn pump_patterns(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|k| self.patterns[k].0)
    }

    pub fn evolve(&self, tau: f64) -> Result<Evolved> {
        let c = &self.cfg;
        let template = self
            .patterns
            .iter()
            .find_map(|p| p.1.as_ref())
            .ok_or(ProtocolError::ZeroProbability)?;
        let ch: DelayChannels = stages::delay_channels(template, tau, &c.devices, &c.truncation)?;
        let mut states = Vec::with_capacity(4);
        let mut prefixes = Vec::with_capacity(4);
        for (p, s) in &self.patterns {
            match s {
                Some(s) if *p > 0.0 => {
                    let e = stages::apply_delay(s, tau, c.interferometer.delta_omega_m, &ch)?;
                    prefixes.push(Some(stages::readout_prefix(&e, &c.devices, &c.truncation)?));
                    states.push((*p, Some(e)));
                }
                _ => {
                    prefixes.push(None);
                    states.push((0.0, None));
                }
            }
        }
        let noise = self.pump.noise;
        let mut witness = [None, None];
        for j in 0..2 {
            let parts: Vec<(f64, &DensityMatrix)> = states
                .iter()
                .enumerate()
                .filter_map(|(k, (p, s))| {
                    let w = if bit(k, j) { *p } else { *p * noise[j] };
                    s.as_ref().filter(|_| w > 0.0).map(|s| (w, s))
                })
                .collect();
            if parts.is_empty() {
                continue;
            }
            let mixed = DensityMatrix::mixture(&parts)?;
            witness[j] = match stages::exact_witness_r(&mixed) {
                Ok(r) => Some(r),
                Err(ProtocolError::NoCoherence) => None,
                Err(e) => return Err(e),
            };
        }
        Ok(Evolved { tau, states, prefixes, witness })
    }

    pub fn tables_for(&self, ev: &Evolved, delta_phi: f64) -> Result<Tables> {
        let c = &self.cfg;
        let mut signal = [[0.0; 4]; 4];
        let mut truncation: f64 = self.pump.state.truncation_budget();
        for k in 0..4 {
            let (p, _) = &ev.states[k];
            if let Some(pre) = &ev.prefixes[k] {
                let r = stages::readout_from_prefix(pre, delta_phi, &c.interferometer, &c.detectors, &c.truncation)?;
                for s in 0..4 {
                    signal[k][s] = p * r.patterns[s];
                }
                truncation = truncation.max(pre.truncation_budget());
            }
        }
        let noise = stages::noise_rates(&c.devices, c.effective_p_pump(), &c.interferometer, &c.detectors);
        let observed = observe(&signal, &noise);
        Ok(Tables { tau: ev.tau, delta_phi, signal, noise, observed, witness: ev.witness, truncation })
    }

    /// Tables at the configured τ and Δφ.
    pub fn tables(&self) -> Result<Tables> {
        let ev = self.evolve(self.cfg.tau)?;
        self.tables_for(&ev, self.cfg.interferometer.delta_phi)
    }

    pub fn tables_at(&self, tau: f64, delta_phi: f64) -> Result<Tables> {
        let ev = self.evolve(tau)?;
        self.tables_for(&ev, delta_phi)
    }

    /// Conditional mechanical state at time τ after a click on detector `j`, noise included.
    pub fn heralded_state(&self, ev: &Evolved, j: usize) -> Result<DensityMatrix> {
        let noise = self.pump.noise;
        let parts: Vec<(f64, &DensityMatrix)> = ev
            .states
            .iter()
            .enumerate()
            .filter_map(|(k, (p, s))| {
                let w = if bit(k, j - 1) { *p } else { *p * noise[j - 1] };
                s.as_ref().filter(|_| w > 0.0).map(|s| (w, s))
            })
            .collect();
        if parts.is_empty() {
            return Err(ProtocolError::ZeroProbability);
        }
        Ok(DensityMatrix::mixture(&parts)?)
    }
}
