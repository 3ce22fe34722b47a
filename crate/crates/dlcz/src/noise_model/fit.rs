use super::{HeatingParams, NoiseError, Result};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One pump-probe point: delay (s), inferred occupation, 1σ uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub d: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    /// Γ, γ, k = b(γ − Γ); the equilibrium is folded into `n_final`.
    pub heating: HeatingParams,
    pub a: f64,
    pub b: f64,
    pub chi2: f64,
    pub dof: usize,
    /// Covariance of (a, b, Γ, γ, n_final), rates in 1/s.
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl FitResult {
    pub fn sigma(&self, i: usize) -> f64 {
        self.covariance[i][i].sqrt()
    }
}

// internal time unit: microseconds
const US: f64 = 1e-6;

fn model(p: &[f64; 5], t: f64) -> f64 {
    p[0] * (-p[2] * t).exp() - p[1] * (-p[3] * t).exp() + p[4]
}

fn jac_row(p: &[f64; 5], t: f64) -> [f64; 5] {
    let eg = (-p[2] * t).exp();
    let eb = (-p[3] * t).exp();
    [eg, -eb, -p[0] * t * eg, p[1] * t * eb, 1.0]
}

fn chi2(p: &[f64; 5], ts: &[f64], data: &[Sample]) -> f64 {
    ts.iter().zip(data).map(|(&t, s)| ((s.d - model(p, t)) / s.sigma).powi(2)).sum()
}

/// Best linear amplitudes (a, b, c) for fixed rates.
fn project(g: f64, gb: f64, ts: &[f64], data: &[Sample]) -> Option<([f64; 5], f64)> {
    let mut m = Matrix3::zeros();
    let mut v = Vector3::zeros();
    for (&t, s) in ts.iter().zip(data) {
        let w = 1.0 / (s.sigma * s.sigma);
        let f = Vector3::new((-g * t).exp(), -(-gb * t).exp(), 1.0);
        m += f * f.transpose() * w;
        v += f * (s.d * w);
    }
    let x = m.try_inverse()? * v;
    let p = [x[0], x[1], g, gb, x[2]];
    Some((p, chi2(&p, ts, data)))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Weighted least-squares fit of d(t) = a e^{−Γt} − b e^{−γt} + n_final.
///
/// Starting rates come from a grid over (Γ, γ) with the amplitudes solved linearly,
/// followed by Levenberg–Marquardt with the analytic Jacobian.
pub fn fit_pump_probe(data: &[Sample]) -> Result<FitResult> {
    let mut times: Vec<f64> = data.iter().map(|s| s.t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.len() < 6 {
        return Err(NoiseError::TooFewSamples(times.len()));
    }
    if data.iter().any(|s| !(s.sigma > 0.0) || !s.d.is_finite() || !(s.t >= 0.0)) {
        return Err(NoiseError::Data("samples need t >= 0, finite signal and sigma > 0".into()));
    }
    let ts: Vec<f64> = data.iter().map(|s| s.t / US).collect();
    let t_max = ts.iter().cloned().fold(0.0, f64::max);
    let t_min = ts.iter().cloned().filter(|&t| t > 0.0).fold(f64::INFINITY, f64::min).min(t_max);
    let grid = log_grid(0.05 / t_max, 20.0 / t_min, 48);
    let mut best: Option<([f64; 5], f64)> = None;
    for (i, &g) in grid.iter().enumerate() {
        for &gb in &grid[i + 1..] {
            if let Some((p, c)) = project(g, gb, &ts, data) {
                if best.as_ref().map_or(true, |b| c < b.1) {
                    best = Some((p, c));
                }
            }
        }
    }
    let (mut p, mut c2) = best.ok_or_else(|| NoiseError::Degenerate("no starting point".into()))?;

    let n = ts.len();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let max_iter = 500;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut j = DMatrix::zeros(n, 5);
        let mut r = DVector::zeros(n);
        for (row, (&t, s)) in ts.iter().zip(data).enumerate() {
            let jr = jac_row(&p, t);
            for k in 0..5 {
                j[(row, k)] = jr[k] / s.sigma;
            }
            r[row] = (s.d - model(&p, t)) / s.sigma;
        }
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..5 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut q = p;
            for k in 0..5 {
                q[k] += step[k];
            }
            q[2] = q[2].abs();
            q[3] = q[3].abs();
            let cq = chi2(&q, &ts, data);
            if cq <= c2 {
                let rel = (c2 - cq) / c2.max(1e-300);
                let small = (0..5).all(|k| step[k].abs() <= 1e-12 * p[k].abs().max(1e-12));
                p = q;
                c2 = cq;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if rel < 1e-14 || small {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step at any damping: at a minimum to working precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(NoiseError::NoConvergence { iterations, chi2: c2, best: p });
    }
    if p[3] < p[2] {
        // the two exponentials are interchangeable; keep γ as the fast one
        p = [-p[1], -p[0], p[3], p[2], p[4]];
    }

    let mut j = DMatrix::zeros(n, 5);
    for (row, (&t, s)) in ts.iter().zip(data).enumerate() {
        let jr = jac_row(&p, t);
        for k in 0..5 {
            j[(row, k)] = jr[k] / s.sigma;
        }
    }
    let cov = (j.transpose() * &j)
        .try_inverse()
        .ok_or_else(|| NoiseError::Degenerate("singular normal matrix".into()))?;
    for (k, name) in [(2, "decay rate"), (3, "bath rate")] {
        let rel = cov[(k, k)].max(0.0).sqrt() / p[k].abs().max(1e-300);
        if !(rel < 1.0) || !rel.is_finite() {
            return Err(NoiseError::Degenerate(format!("{name} unidentifiable (relative sigma {rel:.2e})")));
        }
    }
    // back to SI rates
    let scale = [1.0, 1.0, 1.0 / US, 1.0 / US, 1.0];
    let covariance = (0..5).map(|a| (0..5).map(|b| cov[(a, b)] * scale[a] * scale[b]).collect()).collect();
    let (gamma, bath_gamma) = (p[2] / US, p[3] / US);
    Ok(FitResult {
        heating: HeatingParams { gamma, bath_gamma, k: p[1] * (bath_gamma - gamma), n_init: 0.0, n_final: p[4] },
        a: p[0],
        b: p[1],
        chi2: c2,
        dof: n.saturating_sub(5),
        covariance,
        iterations,
    })
}

#[derive(Serialize, Deserialize)]
struct Row {
    t_ns: f64,
    signal: f64,
    sigma: f64,
}

/// Reads `t_ns,signal,sigma`.
pub fn read_pump_probe_csv(path: &Path) -> Result<Vec<Sample>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| NoiseError::Data(e.to_string()))?;
    let headers = rd.headers().map_err(|e| NoiseError::Data(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t_ns", "signal", "sigma"] {
        return Err(NoiseError::Data(format!("expected header t_ns,signal,sigma, got {:?}", headers)));
    }
    rd.deserialize::<Row>()
        .map(|r| {
            let r = r.map_err(|e| NoiseError::Data(e.to_string()))?;
            Ok(Sample { t: r.t_ns * 1e-9, d: r.signal, sigma: r.sigma })
        })
        .collect()
}

pub fn write_pump_probe_csv(samples: &[Sample]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in samples {
        w.serialize(Row { t_ns: s.t * 1e9, signal: s.d, sigma: s.sigma }).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
}

/// Default delay grid (s): 40 points every 40 ns across the rise, then 40 every 0.6 μs out to 25.6 μs.
pub fn standard_delays() -> Vec<f64> {
    (0..40).map(|i| 40e-9 * i as f64).chain((1..=40).map(|i| 1.6e-6 + 0.6e-6 * i as f64)).collect()
}

/// Synthetic pump-probe trace: rate-equation occupation plus offset, Gaussian noise of
/// relative size `rel_noise` (also reported as the sigma of each point).
pub fn synthesize_pump_probe(p: &HeatingParams, n0: f64, times: &[f64], rel_noise: f64, seed: u64) -> Result<Vec<Sample>> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = crate::rng::CounterRng::derived(seed, 0x5053, 0);
    times
        .iter()
        .map(|&t| {
            let d = super::occupation(t, p, n0)? + p.n_final;
            let sigma = (rel_noise * d.abs()).max(1e-12);
            let z: f64 = StandardNormal.sample(&mut rng);
            let noisy = if rel_noise > 0.0 { d + sigma * z } else { d };
            Ok(Sample { t, d: noisy, sigma })
        })
        .collect()
}
