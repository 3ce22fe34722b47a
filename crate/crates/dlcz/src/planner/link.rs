use super::{PlanError, Result};
use crate::noise_model::{invert_noise_budget, NoiseBudget, Occupation};
use crate::stats::{CoincidenceTally, WitnessResult};
use serde::{Deserialize, Serialize};

/// Which of the two ambiguous ingredients of the loss model are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegradeFlags {
    /// Background heralds dilute the true ones once the herald photons share the loss.
    pub herald_dilution: bool,
    /// Keep the e^{−Γt} factor of the g² formula; off evaluates it as 1.
    pub decay_factor: bool,
}

impl Default for DegradeFlags {
    fn default() -> Self {
        Self { herald_dilution: true, decay_factor: true }
    }
}

/// g² after `added_db` of loss between the device and the detectors: signal and leaked pump
/// photons are attenuated together, background counts are not.
///
/// `herald_background` is the false-herald fraction h at zero added loss; the correlated
/// part is scaled by (1 + h)/(1 + h·L).
pub fn degraded_g2(b: &NoiseBudget, added_db: f64, t: f64, herald_background: f64, flags: DegradeFlags) -> Result<f64> {
    if !(added_db >= 0.0) {
        return Err(PlanError::Param(format!("added loss must be >= 0 dB, got {added_db}")));
    }
    let n_th = b.n_th_at(t)?;
    let l = 10f64.powf(added_db / 10.0);
    let e = if flags.decay_factor { (-b.gamma * t).exp() } else { 1.0 };
    let den = n_th + b.p_pump * e + b.n_leak + b.n_bg * l;
    if !(den > 0.0) {
        return Err(PlanError::Param("noise denominator vanishes".into()));
    }
    let mut excess = e / den;
    if flags.herald_dilution {
        let h = herald_background;
        excess *= (1.0 + h) / (1.0 + h * l);
    }
    Ok(1.0 + excess)
}

/// Statistics of the run the projection is scaled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRun {
    pub trials: f64,
    /// Total twofold coincidences.
    pub coincidences: f64,
    pub r_m: f64,
    /// Upper 1σ width of R_m.
    pub sigma: f64,
}

impl ReferenceRun {
    pub fn from_analysis(t: &CoincidenceTally, w: &WitnessResult) -> Self {
        let c = (t.cr1p1 + t.cr2p1 + t.cr1p2 + t.cr2p2) as f64;
        Self { trials: t.n as f64, coincidences: c, r_m: w.symmetrized.ml, sigma: w.symmetrized.hi - w.symmetrized.ml }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub arms: [NoiseBudget; 2],
    pub tau: f64,
    /// Read-photon probability per trial, setting the herald background share.
    pub p_read: f64,
    pub fiber_db_per_km: f64,
    pub repetition_period: f64,
    /// Fraction of wall time lost to stabilization and data handling.
    pub overhead: f64,
    pub flags: DegradeFlags,
    pub reference: ReferenceRun,
}

impl LinkBudget {
    /// Arms calibrated to g² of 7.5 and 9.6 at 123 ns, reference statistics of the pooled run.
    pub fn reference(reference: ReferenceRun) -> Self {
        let tau = 123e-9;
        let arm = |g2: f64, gamma: f64, p_pump: f64| {
            let (n_leak, n_bg) = (0.032, 0.003);
            let n_th = invert_noise_budget(g2, tau, p_pump, n_leak, n_bg, gamma).expect("g2 > 1");
            NoiseBudget { n_th: Occupation::Constant(n_th), p_pump, n_leak, n_bg, gamma }
        };
        Self {
            arms: [arm(7.5, 1.0 / 4.0e-6, 0.0056), arm(9.6, 1.0 / 5.8e-6, 0.0080)],
            tau,
            p_read: 0.034,
            fiber_db_per_km: 0.17,
            repetition_period: 50e-6,
            overhead: 0.15,
            flags: DegradeFlags::default(),
            reference,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fiber_db_per_km > 0.0) {
            return Err(PlanError::Param("fiber attenuation must be > 0".into()));
        }
        if !(self.repetition_period > 0.0) {
            return Err(PlanError::Param("repetition period must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.overhead) {
            return Err(PlanError::Param("overhead must lie in [0, 1)".into()));
        }
        if !(self.reference.coincidences > 0.0 && self.reference.trials > 0.0 && self.reference.sigma > 0.0) {
            return Err(PlanError::Param("reference run needs coincidences, trials and a spread".into()));
        }
        Ok(())
    }

    /// False-herald share: background over the summed Stokes rates of both devices.
    pub fn herald_background(&self) -> f64 {
        let n_bg = 0.5 * (self.arms[0].n_bg + self.arms[1].n_bg);
        n_bg * self.p_read / (self.arms[0].p_pump + self.arms[1].p_pump)
    }

    pub fn g2(&self, arm: usize, added_db: f64) -> Result<f64> {
        degraded_g2(&self.arms[arm], added_db, self.tau, self.herald_background(), self.flags)
    }

    /// g² of the worse device with no added loss.
    pub fn g2_min(&self) -> Result<f64> {
        Ok(self.g2(0, 0.0)?.min(self.g2(1, 0.0)?))
    }

    /// Common floor that keeps the fraction `retention` of the correlated part g² − 1.
    pub fn floor_for_retention(&self, retention: f64) -> Result<f64> {
        if !(retention > 0.0 && retention <= 1.0) {
            return Err(PlanError::Param(format!("retention must lie in (0, 1], got {retention}")));
        }
        Ok(1.0 + retention * (self.g2_min()? - 1.0))
    }

    /// Added loss at which `arm` reaches the floor.
    pub fn allowance_db(&self, arm: usize, floor: f64) -> Result<f64> {
        let g0 = self.g2(arm, 0.0)?;
        if g0 < floor {
            return Err(PlanError::Unreachable(format!("arm {} starts at g2 = {g0:.3}, below the floor {floor}", arm_name(arm))));
        }
        if g0 == floor {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, 10.0);
        while self.g2(arm, hi)? > floor {
            hi *= 2.0;
            if hi > 1e3 {
                return Err(PlanError::Unreachable("floor never reached".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.g2(arm, mid)? > floor {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn arm_name(arm: usize) -> char {
    if arm == 0 {
        'A'
    } else {
        'B'
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub floor: f64,
    pub added_db: [f64; 2],
    pub km: [f64; 2],
    pub total_km: f64,
}

/// Fiber each arm can take before its g² falls to `floor`.
pub fn max_separation(link: &LinkBudget, floor: f64) -> Result<Separation> {
    link.validate()?;
    let added_db = [link.allowance_db(0, floor)?, link.allowance_db(1, floor)?];
    let km = added_db.map(|d| d / link.fiber_db_per_km);
    Ok(Separation { floor, added_db, km, total_km: km[0] + km[1] })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationPlan {
    pub separation_km: f64,
    pub km: [f64; 2],
    /// Power transmission of the longer arm; the shorter one is attenuated to match.
    pub transmission: f64,
    pub coincidences_needed: f64,
    pub coincidence_probability: f64,
    pub trials: f64,
    pub days: f64,
}

/// Days of measurement for R_m to clear 1 by `k_sigma` standard deviations at the given
/// separation. The arm with less allowance takes at most half the fiber.
pub fn integration_time(link: &LinkBudget, floor: f64, separation_km: f64, k_sigma: f64) -> Result<IntegrationPlan> {
    link.validate()?;
    if !(separation_km >= 0.0) {
        return Err(PlanError::Param(format!("separation must be >= 0, got {separation_km}")));
    }
    if !(k_sigma > 0.0) {
        return Err(PlanError::Param("significance must be > 0".into()));
    }
    let sep = max_separation(link, floor)?;
    let (short, long) = if sep.km[0] <= sep.km[1] { (0, 1) } else { (1, 0) };
    let mut km = [0.0; 2];
    km[short] = (0.5 * separation_km).min(sep.km[short]);
    km[long] = separation_km - km[short];
    if km[long] > sep.km[long] * (1.0 + 1e-12) {
        return Err(PlanError::Unreachable(format!("{separation_km} km exceeds the {:.1} km the floor allows", sep.total_km)));
    }
    let r = link.reference;
    if r.r_m >= 1.0 {
        return Err(PlanError::Unreachable("reference witness does not clear 1".into()));
    }
    let transmission = 10f64.powf(-link.fiber_db_per_km * km[0].max(km[1]) / 10.0);
    // the R_m spread shrinks as 1/√(coincidences)
    let coincidences_needed = r.coincidences * (k_sigma * r.sigma / (1.0 - r.r_m)).powi(2);
    // herald and read photon both cross the fiber
    let coincidence_probability = r.coincidences / r.trials * transmission * transmission;
    let trials = coincidences_needed / coincidence_probability;
    let days = trials * link.repetition_period / (1.0 - link.overhead) / 86_400.0;
    Ok(IntegrationPlan { separation_km, km, transmission, coincidences_needed, coincidence_probability, trials, days })
}
