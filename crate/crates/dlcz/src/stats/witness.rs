use super::{g2_from_counts, g2_likelihood, CoincidenceTally, G2Estimate, Result, StatsError};
use serde::{Deserialize, Serialize};

/// R_m = 4(g²_{r1,pj} + g²_{r2,pj} − 1)/(g²_{r1,pj} − g²_{r2,pj})².
pub fn witness_rm(g2_r1: f64, g2_r2: f64) -> Result<f64> {
    if !(g2_r1 >= 0.0 && g2_r2 >= 0.0) {
        return Err(StatsError::Arg(format!("g² values must be >= 0, got {g2_r1}, {g2_r2}")));
    }
    let d = g2_r1 - g2_r2;
    if d == 0.0 {
        return Err(StatsError::NoContrast);
    }
    Ok(4.0 * (g2_r1 + g2_r2 - 1.0) / (d * d))
}

/// Probability mass over R_m in bins of width `step` starting at zero; everything at or
/// beyond the last bin edge, and the unphysical negative branch, sits in `overflow`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub step: f64,
    /// Bin centres.
    pub grid: Vec<f64>,
    pub mass: Vec<f64>,
    pub overflow: f64,
    /// Centre of the most probable bin.
    pub ml: f64,
    /// Equal-tailed 68% interval (16% and 84% quantiles).
    pub lo: f64,
    pub hi: f64,
    /// Set when halving the grid step moves the ML value by more than one step.
    pub coarse_grid: bool,
}

/// Upper edge of the binned R_m range.
pub const R_MAX: f64 = 5.0;

impl Distribution {
    fn from_mass(step: f64, mut mass: Vec<f64>, mut overflow: f64) -> Self {
        let total: f64 = mass.iter().sum::<f64>() + overflow;
        mass.iter_mut().for_each(|m| *m /= total);
        overflow /= total;
        let grid: Vec<f64> = (0..mass.len()).map(|k| (k as f64 + 0.5) * step).collect();
        let mut best = 0;
        for k in 0..mass.len() {
            if mass[k] > mass[best] {
                best = k;
            }
        }
        let mut d = Self { step, grid, mass, overflow, ml: 0.0, lo: 0.0, hi: 0.0, coarse_grid: false };
        d.ml = d.grid[best];
        d.lo = d.quantile(0.16);
        d.hi = d.quantile(0.84);
        d
    }

    /// Centre of the bin where the cumulative mass first reaches `p`; `inf` inside the overflow.
    pub fn quantile(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        for (x, m) in self.grid.iter().zip(&self.mass) {
            acc += m;
            if acc >= p {
                return *x;
            }
        }
        f64::INFINITY
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum::<f64>() + self.overflow
    }

    /// Width of the 68% interval.
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// A unit mass in the bin containing `x`.
    pub fn delta(x: f64, step: f64) -> Self {
        let nb = (R_MAX / step).round() as usize;
        let mut mass = vec![0.0; nb];
        let k = (x / step).floor();
        if k >= 0.0 && (k as usize) < nb {
            mass[k as usize] = 1.0;
            Self::from_mass(step, mass, 0.0)
        } else {
            Self::from_mass(step, mass, 1.0)
        }
    }
}

fn push_forward(t: &CoincidenceTally, j: usize, da: f64) -> Result<Distribution> {
    let (xa, wa) = g2_likelihood(t, 1, j, da)?;
    let (xb, wb) = g2_likelihood(t, 2, j, da)?;
    let nb = (R_MAX / da).round() as usize;
    let mut mass = vec![0.0; nb];
    let mut overflow = 0.0;
    for (a, pa) in xa.iter().zip(&wa) {
        for (b, pb) in xb.iter().zip(&wb) {
            let w = pa * pb;
            match witness_rm(*a, *b) {
                Ok(r) if r >= 0.0 => {
                    let k = (r / da).floor();
                    if k < nb as f64 {
                        mass[k as usize] += w;
                    } else {
                        overflow += w;
                    }
                }
                _ => overflow += w,
            }
        }
    }
    Ok(Distribution::from_mass(da, mass, overflow))
}

/// Likelihoods of both g² values for herald detector `j` on a grid of step `da`, pushed
/// through R_m into bins of the same width.
pub fn witness_distribution(t: &CoincidenceTally, j: usize, da: f64) -> Result<Distribution> {
    if !(da > 0.0 && da <= 0.5) {
        return Err(StatsError::Arg(format!("grid step must lie in (0, 0.5], got {da}")));
    }
    if !(1..=2).contains(&j) {
        return Err(StatsError::Arg(format!("herald detector must be 1 or 2, got {j}")));
    }
    t.validate()?;
    let mut d = push_forward(t, j, da)?;
    let fine = push_forward(t, j, da / 2.0)?;
    d.coarse_grid = (fine.ml - d.ml).abs() > da;
    Ok(d)
}

/// Distribution of the mean of two independent estimates on the same bin width.
/// Pair sums land on a half-step lattice; masses on a bin edge are split between neighbours.
pub fn symmetrize(d1: &Distribution, d2: &Distribution) -> Result<Distribution> {
    if (d1.step - d2.step).abs() > 1e-12 * d1.step || d1.mass.len() != d2.mass.len() {
        return Err(StatsError::Arg("distributions live on different grids".into()));
    }
    let nb = d1.mass.len();
    let mut mass = vec![0.0; nb];
    // a pair involving the overflow has a mean beyond R_MAX/2 at least; kept as overflow
    let mut overflow = d1.overflow + d2.overflow - d1.overflow * d2.overflow;
    for (k1, &m1) in d1.mass.iter().enumerate() {
        if m1 == 0.0 {
            continue;
        }
        for (k2, &m2) in d2.mass.iter().enumerate() {
            let w = m1 * m2;
            if w == 0.0 {
                continue;
            }
            let s = k1 + k2;
            if s % 2 == 0 {
                mass[s / 2] += w;
            } else {
                mass[s / 2] += 0.5 * w;
                if s / 2 + 1 < nb {
                    mass[s / 2 + 1] += 0.5 * w;
                } else {
                    overflow += 0.5 * w;
                }
            }
        }
    }
    Ok(Distribution::from_mass(d1.step, mass, overflow))
}

/// Cumulative mass below `threshold`, linear within the straddling bin.
pub fn confidence_below(d: &Distribution, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(StatsError::Arg(format!("threshold must be > 0, got {threshold}")));
    }
    let mut acc = 0.0;
    for (k, m) in d.mass.iter().enumerate() {
        let lo = k as f64 * d.step;
        let hi = lo + d.step;
        if hi <= threshold {
            acc += m;
        } else {
            if lo < threshold {
                acc += m * (threshold - lo) / d.step;
            }
            break;
        }
    }
    Ok(acc.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystematicBound {
    /// R_m(1 + δ²/2).
    pub corrected: f64,
    /// δ²/2.
    pub relative: f64,
    /// Classicality threshold deflated by the same correction.
    pub threshold: f64,
}

/// Upper-bound shift for a relative flux imbalance δ between the arms.
pub fn systematic_bound(r_m: f64, delta: f64) -> Result<SystematicBound> {
    if !(0.0..=0.2).contains(&delta) {
        return Err(StatsError::Arg(format!("imbalance must lie in [0, 0.2], got {delta}")));
    }
    let relative = 0.5 * delta * delta;
    Ok(SystematicBound { corrected: r_m * (1.0 + relative), relative, threshold: 1.0 / (1.0 + relative) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystematicComponent {
    pub name: String,
    pub delta: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystematicLedger {
    pub components: Vec<SystematicComponent>,
    pub total: f64,
    pub threshold: f64,
}

/// Sums the δ²/2 corrections of independent imbalance sources.
pub fn systematic_ledger(sources: &[(&str, f64)]) -> Result<SystematicLedger> {
    let mut components = Vec::new();
    for &(name, delta) in sources {
        let b = systematic_bound(1.0, delta)?;
        components.push(SystematicComponent { name: name.to_string(), delta, relative: b.relative });
    }
    let total: f64 = components.iter().map(|c| c.relative).sum();
    Ok(SystematicLedger { components, total, threshold: 1.0 / (1.0 + total) })
}

impl SystematicLedger {
    /// Splitter deviation 0.6%, herald balance 2%, worst-case readout imbalance 10%.
    pub fn reference() -> Self {
        systematic_ledger(&[("splitter", 0.006), ("herald balance", 0.02), ("readout imbalance", 0.1)]).expect("valid sources")
    }
}

/// Everything the analysis reports for one tally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessResult {
    /// g2[i-1][j-1] = g²_{r_i,p_j}.
    pub g2: [[G2Estimate; 2]; 2],
    /// Direct R_m from the point estimates, per herald detector.
    pub point: [Option<f64>; 2],
    pub per_detector: [Distribution; 2],
    pub symmetrized: Distribution,
    pub threshold: f64,
    pub confidence: f64,
    /// Confidence per herald detector alone.
    pub confidence_single: [f64; 2],
}

pub fn analyze(t: &CoincidenceTally, da: f64, threshold: f64) -> Result<WitnessResult> {
    t.validate()?;
    let mut g2 = [[G2Estimate { value: 0.0, lo: 0.0, hi: 0.0 }; 2]; 2];
    for i in 1..=2 {
        for j in 1..=2 {
            g2[i - 1][j - 1] = g2_from_counts(t, i, j)?;
        }
    }
    let point = [0, 1].map(|j| witness_rm(g2[0][j].value, g2[1][j].value).ok());
    let d1 = witness_distribution(t, 1, da)?;
    let d2 = witness_distribution(t, 2, da)?;
    let symmetrized = symmetrize(&d1, &d2)?;
    let confidence = confidence_below(&symmetrized, threshold)?;
    let confidence_single = [confidence_below(&d1, threshold)?, confidence_below(&d2, threshold)?];
    Ok(WitnessResult { g2, point, per_detector: [d1, d2], symmetrized, threshold, confidence, confidence_single })
}
