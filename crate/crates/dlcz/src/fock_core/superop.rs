use super::{FockError, Result};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Linear map on one mode: ρ'_{ij} = Σ S[(i,j),(k,l)] ρ_{kl}.
///
/// Stored densely as a (dout², din²) matrix plus its nonzero entries.
#[derive(Debug, Clone)]
pub struct Superop {
    din: usize,
    dout: usize,
    m: DMatrix<C64>,
    terms: Vec<(u16, u16, u16, u16, C64)>,
    /// Terms grouped by coherence order δ = k − l (index δ + din − 1) as (i, k, c),
    /// present when every term keeps the order.
    sectors: Option<Vec<Vec<(u16, u16, C64)>>>,
}

fn ln_fact(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn ln_choose(n: usize, k: usize) -> f64 {
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

/// ⟨i| A_{a-i} |a⟩ for the pure-loss channel.
fn loss_elem(eta: f64, i: usize, a: usize) -> f64 {
    if i > a {
        return 0.0;
    }
    let k = a - i;
    if eta == 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    if eta == 1.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (0.5 * (ln_choose(a, k) + i as f64 * eta.ln() + k as f64 * (1.0 - eta).ln())).exp()
}

/// ⟨a| B_{a-k} |k⟩ for the quantum-limited amplifier of gain g.
fn amp_elem(g: f64, a: usize, k: usize) -> f64 {
    if a < k {
        return 0.0;
    }
    let q = a - k;
    let x = (g - 1.0) / g;
    if q > 0 && x == 0.0 {
        return 0.0;
    }
    let lx = if q == 0 { 0.0 } else { q as f64 * x.ln() };
    (0.5 * (ln_choose(a, q) + lx - (k + 1) as f64 * g.ln())).exp()
}

impl Superop {
    pub fn from_dense(din: usize, dout: usize, m: DMatrix<C64>) -> Self {
        let mut terms = Vec::new();
        for i in 0..dout {
            for j in 0..dout {
                for k in 0..din {
                    for l in 0..din {
                        let c = m[(i * dout + j, k * din + l)];
                        if c.norm() > 1e-16 {
                            terms.push((i as u16, j as u16, k as u16, l as u16, c));
                        }
                    }
                }
            }
        }
        let covariant = terms.iter().all(|&(i, j, k, l, _)| i as i32 - j as i32 == k as i32 - l as i32);
        let sectors = covariant.then(|| {
            let mut sec = vec![Vec::new(); 2 * din - 1];
            for &(i, _, k, l, c) in &terms {
                sec[(k as i32 - l as i32 + din as i32 - 1) as usize].push((i, k, c));
            }
            sec
        });
        Self { din, dout, m, terms, sectors }
    }

    fn build(din: usize, dout: usize, f: impl Fn(usize, usize, usize, usize) -> C64) -> Self {
        let mut m = DMatrix::zeros(dout * dout, din * din);
        for i in 0..dout {
            for j in 0..dout {
                for k in 0..din {
                    for l in 0..din {
                        m[(i * dout + j, k * din + l)] = f(i, j, k, l);
                    }
                }
            }
        }
        Self::from_dense(din, dout, m)
    }

    pub fn from_kraus(din: usize, dout: usize, ks: &[DMatrix<C64>]) -> Self {
        Self::build(din, dout, |i, j, k, l| ks.iter().map(|kr| kr[(i, k)] * kr[(j, l)].conj()).sum())
    }

    pub fn din(&self) -> usize {
        self.din
    }

    pub fn dout(&self) -> usize {
        self.dout
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub(crate) fn terms(&self) -> &[(u16, u16, u16, u16, C64)] {
        &self.terms
    }

    pub(crate) fn sectors(&self) -> Option<&[Vec<(u16, u16, C64)>]> {
        self.sectors.as_deref()
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &Superop) -> Result<Superop> {
        if first.dout != self.din {
            return Err(FockError::Mismatch);
        }
        Ok(Self::from_dense(first.din, self.dout, &self.m * &first.m))
    }

    pub fn identity(d: usize) -> Self {
        Self::resize(d, d)
    }

    /// Embeds or truncates the Fock basis to dimension `dout`.
    pub fn resize(din: usize, dout: usize) -> Self {
        Self::build(din, dout, |i, j, k, l| {
            if i == k && j == l {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn loss(d: usize, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(FockError::Param(format!("efficiency must lie in [0, 1], got {eta}")));
        }
        Ok(Self::build(d, d, |i, j, k, l| {
            if k < i || l < j || k - i != l - j {
                return C64::new(0.0, 0.0);
            }
            C64::new(loss_elem(eta, i, k) * loss_elem(eta, j, l), 0.0)
        }))
    }

    /// Phase-insensitive additive noise: ⟨n⟩ → ⟨n⟩ + n_add exactly.
    ///
    /// Realized as a quantum-limited amplifier of gain G = 1/(1 − n_add) followed by
    /// loss 1/G, composed through an enlarged intermediate space.
    pub fn additive_noise(d: usize, n_add: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&n_add) {
            return Err(FockError::Param(format!("n_add must lie in [0, 1), got {n_add}")));
        }
        if n_add == 0.0 {
            return Ok(Self::identity(d));
        }
        let g = 1.0 / (1.0 - n_add);
        let eta = 1.0 / g;
        // intermediate size: stop once the amplifier output of the top input level has
        // passed its mode and the remaining terms are negligible
        let top = d - 1;
        let mut big = d + 1;
        let mut prev = f64::INFINITY;
        while big < d + 2000 {
            let term = amp_elem(g, big - 1, top).powi(2);
            if term < 1e-18 && term <= prev {
                break;
            }
            prev = term;
            big += 1;
        }
        let amp: Vec<Vec<f64>> = (0..big).map(|a| (0..d).map(|k| amp_elem(g, a, k)).collect()).collect();
        let los: Vec<Vec<f64>> = (0..d).map(|i| (0..big).map(|a| loss_elem(eta, i, a)).collect()).collect();
        Ok(Self::build(d, d, |i, j, k, l| {
            if i as i64 - j as i64 != k as i64 - l as i64 {
                return C64::new(0.0, 0.0);
            }
            let mut s = 0.0;
            for a in i.max(k)..big {
                let b = a + j - i;
                if b < j.max(l) || b >= big {
                    continue;
                }
                s += los[i][a] * los[j][b] * amp[a][k] * amp[b][l];
            }
            C64::new(s, 0.0)
        }))
    }

    /// Quantum-limited amplifier with gain `g` ≥ 1 into a space of dimension `dout`.
    pub fn amplifier(din: usize, dout: usize, g: f64) -> Result<Self> {
        if !(g >= 1.0) {
            return Err(FockError::Param(format!("gain must be >= 1, got {g}")));
        }
        Ok(Self::build(din, dout, |i, j, k, l| {
            if i < k || j < l || i - k != j - l {
                return C64::new(0.0, 0.0);
            }
            C64::new(amp_elem(g, i, k) * amp_elem(g, j, l), 0.0)
        }))
    }

    pub fn dephasing(d: usize, overlap: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&overlap) {
            return Err(FockError::Param(format!("overlap must lie in [0, 1], got {overlap}")));
        }
        Ok(Self::build(d, d, |i, j, k, l| {
            if i == k && j == l {
                C64::new(overlap.powi((i as i32 - j as i32).abs()), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn phase(d: usize, phi: f64) -> Self {
        Self::build(d, d, |i, j, k, l| {
            if i == k && j == l {
                C64::from_polar(1.0, phi * (i as f64 - j as f64))
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// Projection onto vacuum, reducing the mode to dimension 1.
    pub fn vacuum_projection(d: usize) -> Self {
        Self::build(d, 1, |_, _, k, l| if k == 0 && l == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    /// Trace over the mode, reducing it to dimension 1.
    pub fn trace_out(d: usize) -> Self {
        Self::build(d, 1, |_, _, k, l| if k == l { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }
}
