use super::{Result, StatsError};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One sweep point; the interval may be empty (unit weight).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub x: f64,
    pub y: f64,
    pub lo: f64,
    pub hi: f64,
}

impl FringePoint {
    pub fn exact(x: f64, y: f64) -> Self {
        Self { x, y, lo: y, hi: y }
    }

    fn weight(&self) -> f64 {
        let s = 0.5 * (self.hi - self.lo);
        if s > 0.0 {
            1.0 / (s * s)
        } else {
            1.0
        }
    }
}

/// Phase sweeps take x in radians and report the period in units of π; delay sweeps
/// take seconds and report nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FringeUnit {
    Phase,
    Delay,
}

/// y = offset + amplitude·cos(2πx/period + phase).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub amplitude: f64,
    /// In the units of x.
    pub period: f64,
    pub offset: f64,
    pub phase: f64,
    pub chi2: f64,
    pub unit: FringeUnit,
    /// Amplitude not resolved from zero, so the period means nothing.
    pub flagged: bool,
}

impl FringeFit {
    /// Period in π (phase) or ns (delay).
    pub fn period_reported(&self) -> f64 {
        match self.unit {
            FringeUnit::Phase => self.period / PI,
            FringeUnit::Delay => self.period * 1e9,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.offset + self.amplitude * (2.0 * PI * x / self.period + self.phase).cos()
    }

    pub fn max(&self) -> f64 {
        self.offset + self.amplitude
    }

    pub fn min(&self) -> f64 {
        self.offset - self.amplitude
    }
}

struct Linear {
    coef: Vector3<f64>,
    chi2: f64,
    cov: Matrix3<f64>,
}

/// Weighted linear least squares in (offset, c, s) at a fixed period.
fn linear_fit(pts: &[FringePoint], period: f64) -> Option<Linear> {
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for p in pts {
        let w = p.weight();
        let arg = 2.0 * PI * p.x / period;
        let f = Vector3::new(1.0, arg.cos(), arg.sin());
        a += w * f * f.transpose();
        b += w * p.y * f;
    }
    let cov = a.try_inverse()?;
    let coef = cov * b;
    let chi2 = pts
        .iter()
        .map(|p| {
            let arg = 2.0 * PI * p.x / period;
            let r = p.y - (coef[0] + coef[1] * arg.cos() + coef[2] * arg.sin());
            p.weight() * r * r
        })
        .sum();
    Some(Linear { coef, chi2, cov })
}

/// Sinusoid fit: periodogram scan over the period, then golden-section refinement.
pub fn fit_fringe(pts: &[FringePoint], unit: FringeUnit) -> Result<FringeFit> {
    if pts.len() < 5 {
        return Err(StatsError::Arg(format!("need at least 5 points, got {}", pts.len())));
    }
    if pts.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(StatsError::Arg("non-finite sweep point".into()));
    }
    let mut xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    xs.sort_by(f64::total_cmp);
    let span = xs[xs.len() - 1] - xs[0];
    let spacing = xs.windows(2).map(|w| w[1] - w[0]).filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return Err(StatsError::Arg("sweep has zero span".into()));
    }
    // shortest period resolvable from the sampling up to four times the span
    let (p_lo, p_hi) = (2.0 * spacing, 4.0 * span);
    if p_lo >= p_hi {
        return Err(StatsError::Arg("sweep too sparse for a period search".into()));
    }
    let chi = |p: f64| linear_fit(pts, p).map_or(f64::INFINITY, |l| l.chi2);
    let n_scan = 4000;
    let ratio = (p_hi / p_lo).ln();
    let periods: Vec<f64> = (0..=n_scan).map(|k| p_lo * (ratio * k as f64 / n_scan as f64).exp()).collect();
    let vals: Vec<f64> = periods.iter().map(|&p| chi(p)).collect();
    let k_best = (0..vals.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    if !vals[k_best].is_finite() {
        return Err(StatsError::Fit("singular normal equations".into()));
    }
    let (mut a, mut b) = (periods[k_best.saturating_sub(1)], periods[(k_best + 1).min(n_scan)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (chi(c), chi(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * b.abs() {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = chi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = chi(d);
        }
    }
    let period = 0.5 * (a + b);
    let lin = linear_fit(pts, period).ok_or_else(|| StatsError::Fit("singular normal equations".into()))?;
    let (off, cc, ss) = (lin.coef[0], lin.coef[1], lin.coef[2]);
    let amplitude = cc.hypot(ss);
    if !(amplitude.is_finite() && off.is_finite()) {
        return Err(StatsError::Fit("non-finite parameters".into()));
    }
    // amplitude standard error, scaled by the reduced χ² when intervals are absent or too small
    let dof = (pts.len() as f64 - 4.0).max(1.0);
    let scale = (lin.chi2 / dof).max(1.0);
    let var = if amplitude > 0.0 {
        (cc * cc * lin.cov[(1, 1)] + ss * ss * lin.cov[(2, 2)] + 2.0 * cc * ss * lin.cov[(1, 2)]) / (amplitude * amplitude)
    } else {
        lin.cov[(1, 1)]
    };
    let se = (var * scale).sqrt();
    let flagged = amplitude <= 1e-9 * off.abs().max(1e-300) || amplitude < 2.0 * se;
    Ok(FringeFit { amplitude, period, offset: off, phase: (-ss).atan2(cc), chi2: lin.chi2, unit, flagged })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VisibilityMode {
    /// Extremes of the supplied values.
    Extrema,
    /// Extremes of a fitted sinusoid.
    Fitted(FringeUnit),
}

/// V = (max − min)/(max + min).
pub fn visibility(pts: &[FringePoint], mode: VisibilityMode) -> Result<f64> {
    if pts.len() < 2 {
        return Err(StatsError::Arg("visibility needs at least 2 values".into()));
    }
    let (hi, lo) = match mode {
        VisibilityMode::Extrema => pts.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(h, l), p| (h.max(p.y), l.min(p.y))),
        VisibilityMode::Fitted(unit) => {
            let f = fit_fringe(pts, unit)?;
            (f.max(), f.min())
        }
    };
    if hi + lo == 0.0 {
        return Err(StatsError::Arg("max + min = 0".into()));
    }
    Ok((hi - lo) / (hi + lo))
}
