use super::{PlanError, Result};
use crate::rng::{with_pool, CounterRng};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const C_LIGHT: f64 = 299_792_458.0;

/// Resonance wavelengths per chip are Gaussian around `offset_nm` with spread `sigma_nm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldModel {
    pub devices_per_chip: Vec<usize>,
    pub sigma_nm: Vec<f64>,
    pub offset_nm: Vec<f64>,
    /// Two devices match when their frequencies differ by less than this.
    pub window_mhz: f64,
    pub carrier_nm: f64,
}

impl YieldModel {
    /// `chips` identical chips of `n` devices, no offsets.
    pub fn uniform(chips: usize, n: usize, sigma_nm: f64, window_mhz: f64) -> Self {
        Self { devices_per_chip: vec![n; chips], sigma_nm: vec![sigma_nm; chips], offset_nm: vec![0.0; chips], window_mhz, carrier_nm: 1550.0 }
    }

    pub fn chips(&self) -> usize {
        self.devices_per_chip.len()
    }

    /// λ²Δν/c at the carrier, in nm.
    pub fn window_nm(&self) -> f64 {
        let lambda = self.carrier_nm * 1e-9;
        lambda * lambda * self.window_mhz * 1e6 / C_LIGHT * 1e9
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.chips();
        if c < 2 {
            return Err(PlanError::Param(format!("need at least 2 chips, got {c}")));
        }
        if self.sigma_nm.len() != c || self.offset_nm.len() != c {
            return Err(PlanError::Param("sigma and offset lists must have one entry per chip".into()));
        }
        if self.sigma_nm.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(PlanError::Param("sigma must be > 0".into()));
        }
        if self.devices_per_chip.iter().any(|&n| n == 0) {
            return Err(PlanError::Param("every chip needs at least one device".into()));
        }
        if !(self.window_mhz >= 0.0 && self.window_mhz.is_finite()) {
            return Err(PlanError::Param(format!("window must be >= 0, got {}", self.window_mhz)));
        }
        if !(self.carrier_nm > 0.0) {
            return Err(PlanError::Param("carrier wavelength must be > 0".into()));
        }
        if self.offset_nm.iter().any(|o| !o.is_finite()) {
            return Err(PlanError::Param("offsets must be finite".into()));
        }
        Ok(())
    }

    /// P(|X_a − X_b| < w) for one device from each chip.
    pub fn pair_probability(&self, a: usize, b: usize) -> f64 {
        let w = self.window_nm();
        let mu = self.offset_nm[b] - self.offset_nm[a];
        let s = self.sigma_nm[a].hypot(self.sigma_nm[b]);
        let cdf = |x: f64| 0.5 * libm::erfc(-x / (s * std::f64::consts::SQRT_2));
        cdf(w - mu) - cdf(-w - mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldReport {
    pub analytic: f64,
    pub monte_carlo: f64,
    /// Binomial standard error of the Monte Carlo estimate.
    pub standard_error: f64,
    pub reps: u64,
}

impl YieldReport {
    /// Gap between the estimates in units of the binomial error, using the larger of the
    /// empirical and the analytic variance so that an all-hit run still has a scale.
    pub fn discrepancy(&self) -> f64 {
        let n = self.reps as f64;
        let v = (self.monte_carlo * (1.0 - self.monte_carlo)).max(self.analytic * (1.0 - self.analytic)) / n;
        let d = (self.monte_carlo - self.analytic).abs();
        if v > 0.0 {
            d / v.sqrt()
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

fn sample_chip(rng: &mut CounterRng, n: usize, offset: f64, sigma: f64) -> Vec<f64> {
    (0..n).map(|_| offset + sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Whether some c-tuple, one device per chip, lies within a span below `w`.
fn has_match(chips: &[Vec<f64>], w: f64) -> bool {
    let c = chips.len();
    if c == 2 {
        let mut a = chips[0].clone();
        a.sort_by(f64::total_cmp);
        return chips[1].iter().any(|&b| {
            let i = a.partition_point(|&x| x < b);
            (i < a.len() && a[i] - b < w) || (i > 0 && b - a[i - 1] < w)
        });
    }
    let mut all: Vec<(f64, usize)> = chips.iter().enumerate().flat_map(|(k, v)| v.iter().map(move |&x| (x, k))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut count = vec![0usize; c];
    let mut present = 0;
    let mut lo = 0;
    for hi in 0..all.len() {
        let (x, k) = all[hi];
        while x - all[lo].0 >= w {
            let kl = all[lo].1;
            count[kl] -= 1;
            if count[kl] == 0 {
                present -= 1;
            }
            lo += 1;
        }
        if count[k] == 0 {
            present += 1;
        }
        count[k] += 1;
        if present == c {
            return true;
        }
    }
    false
}

fn monte_carlo(m: &YieldModel, reps: u64, seed: u64) -> (f64, f64) {
    let w = m.window_nm();
    let hits: u64 = with_pool(|| {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = CounterRng::derived(seed, 0x59, r);
                let chips: Vec<Vec<f64>> =
                    (0..m.chips()).map(|k| sample_chip(&mut rng, m.devices_per_chip[k], m.offset_nm[k], m.sigma_nm[k])).collect();
                has_match(&chips, w) as u64
            })
            .sum()
    });
    let p = hits as f64 / reps as f64;
    (p, (p * (1.0 - p) / reps as f64).sqrt())
}

/// Probability of at least one matching pair between two chips.
pub fn pair_yield(m: &YieldModel, reps: u64, seed: u64) -> Result<YieldReport> {
    m.validate()?;
    if m.chips() != 2 {
        return Err(PlanError::Param(format!("pair yield needs exactly 2 chips, got {}", m.chips())));
    }
    if reps == 0 {
        return Err(PlanError::Param("need at least one repetition".into()));
    }
    let p = m.pair_probability(0, 1);
    let pairs = (m.devices_per_chip[0] * m.devices_per_chip[1]) as f64;
    let analytic = -(pairs * (-p).ln_1p()).exp_m1();
    let (monte_carlo, standard_error) = monte_carlo(m, reps, seed);
    Ok(YieldReport { analytic, monte_carlo, standard_error, reps })
}

/// Probability that some tuple of one device per chip is mutually within the window.
/// The analytic column chains pair matches to the first chip as if they were independent.
pub fn multi_chip_yield(m: &YieldModel, reps: u64, seed: u64) -> Result<YieldReport> {
    m.validate()?;
    if reps == 0 {
        return Err(PlanError::Param("need at least one repetition".into()));
    }
    let p: f64 = (1..m.chips()).map(|k| m.pair_probability(0, k)).product();
    let tuples: f64 = m.devices_per_chip.iter().map(|&n| n as f64).product();
    let analytic = -(tuples * (-p).ln_1p()).exp_m1();
    let (monte_carlo, standard_error) = monte_carlo(m, reps, seed);
    Ok(YieldReport { analytic, monte_carlo, standard_error, reps })
}
