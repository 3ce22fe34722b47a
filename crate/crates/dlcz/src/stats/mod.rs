//! Counting statistics: tallies, normalized coincidences, the witness R_m and its
//! discretized distribution, fringe fits.

mod fringe;
mod witness;

pub use fringe::{fit_fringe, visibility, FringeFit, FringePoint, FringeUnit, VisibilityMode};
pub use witness::{
    analyze, confidence_below, symmetrize, systematic_bound, systematic_ledger, witness_distribution, witness_rm, Distribution,
    SystematicBound, SystematicComponent, SystematicLedger, WitnessResult,
};

use crate::protocol_sim::{ClickLog, Window};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("invalid tally: {0}")]
    Tally(String),
    #[error("herald and read windows overlap")]
    OverlappingWindows,
    #[error("zero singles for r{0}/p{1}")]
    ZeroSingles(usize, usize),
    #[error("witness unbounded (no fringe contrast)")]
    NoContrast,
    #[error("invalid argument: {0}")]
    Arg(String),
    #[error("fringe fit did not converge: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Which gating window plays the herald role and which the readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowDefs {
    pub herald: Window,
    pub read: Window,
}

impl Default for WindowDefs {
    fn default() -> Self {
        Self { herald: Window::Pump, read: Window::Read }
    }
}

/// Singles and twofold coincidences; detector indices are 1-based in accessors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceTally {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "Cp1")]
    pub cp1: u64,
    #[serde(rename = "Cp2")]
    pub cp2: u64,
    #[serde(rename = "Cr1")]
    pub cr1: u64,
    #[serde(rename = "Cr2")]
    pub cr2: u64,
    #[serde(rename = "Cr1p1")]
    pub cr1p1: u64,
    #[serde(rename = "Cr2p1")]
    pub cr2p1: u64,
    #[serde(rename = "Cr1p2")]
    pub cr1p2: u64,
    #[serde(rename = "Cr2p2")]
    pub cr2p2: u64,
}

impl CoincidenceTally {
    pub fn cp(&self, j: usize) -> u64 {
        [self.cp1, self.cp2][j - 1]
    }

    pub fn cr(&self, i: usize) -> u64 {
        [self.cr1, self.cr2][i - 1]
    }

    /// C_{r_i,p_j}.
    pub fn coincidences(&self, i: usize, j: usize) -> u64 {
        [[self.cr1p1, self.cr1p2], [self.cr2p1, self.cr2p2]][i - 1][j - 1]
    }

    fn coincidences_mut(&mut self, i: usize, j: usize) -> &mut u64 {
        match (i, j) {
            (1, 1) => &mut self.cr1p1,
            (2, 1) => &mut self.cr2p1,
            (1, 2) => &mut self.cr1p2,
            _ => &mut self.cr2p2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for s in [self.cp1, self.cp2, self.cr1, self.cr2] {
            if s > self.n {
                return Err(StatsError::Tally(format!("single count {s} exceeds N = {}", self.n)));
            }
        }
        for i in 1..=2 {
            for j in 1..=2 {
                let c = self.coincidences(i, j);
                if c > self.cr(i).min(self.cp(j)) {
                    return Err(StatsError::Tally(format!("C_r{i},p{j} = {c} exceeds its singles")));
                }
            }
        }
        Ok(())
    }

    /// Element-wise sum, used to pool several phase settings.
    pub fn merged(&self, o: &Self) -> Self {
        Self {
            n: self.n + o.n,
            cp1: self.cp1 + o.cp1,
            cp2: self.cp2 + o.cp2,
            cr1: self.cr1 + o.cr1,
            cr2: self.cr2 + o.cr2,
            cr1p1: self.cr1p1 + o.cr1p1,
            cr2p1: self.cr2p1 + o.cr2p1,
            cr1p2: self.cr1p2 + o.cr1p2,
            cr2p2: self.cr2p2 + o.cr2p2,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tally serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(s).map_err(|e| StatsError::Tally(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    /// Tally of an outcome histogram indexed by click pattern
    /// (bit 0/1 herald on detector 1/2, bit 2/3 read on detector 1/2).
    pub fn from_histogram(n: u64, h: &[u64; 16]) -> Result<Self> {
        let total: u64 = h.iter().sum();
        if total != n {
            return Err(StatsError::Tally(format!("histogram holds {total} trials, expected {n}")));
        }
        let mut t = Self { n, cp1: 0, cp2: 0, cr1: 0, cr2: 0, cr1p1: 0, cr2p1: 0, cr1p2: 0, cr2p2: 0 };
        for (bits, &c) in h.iter().enumerate() {
            t.add_pattern(bits as u8, c);
        }
        Ok(t)
    }

    fn add_pattern(&mut self, bits: u8, count: u64) {
        let on = |k: u32| bits >> k & 1 == 1;
        for k in 1..=2usize {
            if on(k as u32 - 1) {
                *if k == 1 { &mut self.cp1 } else { &mut self.cp2 } += count;
            }
            if on(k as u32 + 1) {
                *if k == 1 { &mut self.cr1 } else { &mut self.cr2 } += count;
            }
        }
        for i in 1..=2usize {
            for j in 1..=2usize {
                if on(j as u32 - 1) && on(i as u32 + 1) {
                    *self.coincidences_mut(i, j) += count;
                }
            }
        }
    }

    /// Counts at the θ_opt setting of the published witness run.
    pub fn reference_opt() -> Self {
        Self { n: 1_114_000_000, cp1: 111_134, cp2: 184_114, cr1: 108_723, cr2: 167_427, cr1p1: 9, cr2p1: 130, cr1p2: 129, cr2p2: 37 }
    }

    /// Counts pooled over the extended phase interval of the published run.
    pub fn reference_extended() -> Self {
        Self { n: 1_949_000_000, cp1: 196_080, cp2: 322_608, cr1: 194_023, cr2: 300_373, cr1p1: 16, cr2p1: 223, cr1p2: 242, cr2p2: 67 }
    }
}

/// Counts clicks per trial in the herald and read windows.
pub fn tally(log: &ClickLog, windows: &WindowDefs) -> Result<CoincidenceTally> {
    if windows.herald == windows.read {
        return Err(StatsError::OverlappingWindows);
    }
    log.validate().map_err(StatsError::Tally)?;
    let mut t = CoincidenceTally { n: log.meta.n_trials, cp1: 0, cp2: 0, cr1: 0, cr2: 0, cr1p1: 0, cr2p1: 0, cr1p2: 0, cr2p2: 0 };
    // per trial: bit 0/1 herald detector 1/2, bit 2/3 read detector 1/2
    let mut trials: BTreeMap<u64, u8> = BTreeMap::new();
    for r in &log.records {
        let shift = if r.window == windows.herald {
            0
        } else if r.window == windows.read {
            2
        } else {
            continue;
        };
        *trials.entry(r.trial).or_default() |= 1 << (shift + r.detector as u32 - 1);
    }
    for &bits in trials.values() {
        t.add_pattern(bits, 1);
    }
    Ok(t)
}

/// A g² estimate with its 68% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Upper end of the g² grid.
pub const G2_MAX: f64 = 30.0;

/// Normalized binomial likelihood of the coincidence count over a g² grid of step `da`.
/// Returns (grid values, weights) restricted to where the weight is not negligible.
pub(crate) fn g2_likelihood(t: &CoincidenceTally, i: usize, j: usize, da: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (cr, cp) = (t.cr(i), t.cp(j));
    if cr == 0 || cp == 0 {
        return Err(StatsError::ZeroSingles(i, j));
    }
    let c = t.coincidences(i, j) as f64;
    let miss = (cp - t.coincidences(i, j)) as f64;
    let scale = cr as f64 / t.n as f64;
    let steps = (G2_MAX / da).round() as usize;
    let ll: Vec<f64> = (0..=steps)
        .map(|k| {
            let q = k as f64 * da * scale;
            if q >= 1.0 {
                return f64::NEG_INFINITY;
            }
            let hit = if c == 0.0 { 0.0 } else if q == 0.0 { f64::NEG_INFINITY } else { c * q.ln() };
            hit + miss * (-q).ln_1p()
        })
        .collect();
    let top = ll.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ll.iter().map(|&l| (l - top).exp()).collect();
    let sum: f64 = w.iter().sum();
    let (mut xs, mut ws) = (Vec::new(), Vec::new());
    for (k, &v) in w.iter().enumerate() {
        if v > 1e-14 {
            xs.push(k as f64 * da);
            ws.push(v / sum);
        }
    }
    Ok((xs, ws))
}

/// Point estimate C·N/(C(r_i)·C(p_j)) with an equal-tailed 68% interval from the
/// binomial likelihood of the coincidence count. With no coincidences the interval is
/// the one-sided [0, upper 68% limit].
pub fn g2_from_counts(t: &CoincidenceTally, i: usize, j: usize) -> Result<G2Estimate> {
    if !(1..=2).contains(&i) || !(1..=2).contains(&j) {
        return Err(StatsError::Arg(format!("detector indices must be 1 or 2, got r{i}/p{j}")));
    }
    let (cr, cp) = (t.cr(i), t.cp(j));
    if cr == 0 || cp == 0 {
        return Err(StatsError::ZeroSingles(i, j));
    }
    let value = t.coincidences(i, j) as f64 * t.n as f64 / (cr as f64 * cp as f64);
    let (xs, ws) = g2_likelihood(t, i, j, 0.01)?;
    let quantile = |p: f64| {
        let mut acc = 0.0;
        for (x, w) in xs.iter().zip(&ws) {
            acc += w;
            if acc >= p {
                return *x;
            }
        }
        *xs.last().unwrap()
    };
    if t.coincidences(i, j) == 0 {
        return Ok(G2Estimate { value, lo: 0.0, hi: quantile(0.68) });
    }
    Ok(G2Estimate { value, lo: quantile(0.16), hi: quantile(0.84) })
}

#[cfg(test)]
mod tests;
