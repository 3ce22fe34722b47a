//! Truncated Fock-space density matrices and the Gaussian channels built on them.
//!
//! Every mode carries its own cutoff. States are immutable; channels return new
//! states and accumulate the discarded probability mass in a truncation budget.

mod kernel;
mod superop;

pub use superop::Superop;

use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Largest tensor dimension a register may have.
pub const MAX_DIM: usize = 4096;
/// Discarded mass above which a truncating operation is rejected.
pub const TRUNCATION_TOL: f64 = 1e-6;
/// Extra levels used when building unitaries on an enlarged space.
const EXPM_MARGIN: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("register must have at least one mode")]
    NoModes,
    #[error("cutoff must be >= 1 (mode {0})")]
    BadCutoff(usize),
    #[error("register dimension {0} exceeds bound {MAX_DIM}")]
    TooLarge(usize),
    #[error("mode index {0} out of range")]
    BadMode(usize),
    #[error("modes must be distinct")]
    SameMode,
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("cutoff too small: discarded mass {0:.3e}")]
    CutoffTooSmall(f64),
    #[error("cutoff too small for p_excite: discarded mass {0:.3e}")]
    CutoffTooSmallForSqueeze(f64),
    #[error("impossible condition: outcome has zero probability")]
    ImpossibleCondition,
    #[error("dimension mismatch")]
    Mismatch,
}

pub type Result<T> = std::result::Result<T, FockError>;

/// Mode layout: per-mode local dimension (cutoff + 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeRegister {
    dims: Vec<usize>,
}

impl ModeRegister {
    pub fn uniform(n_modes: usize, cutoff: usize) -> Result<Self> {
        Self::with_cutoffs(&vec![cutoff; n_modes])
    }

    pub fn with_cutoffs(cutoffs: &[usize]) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(FockError::NoModes);
        }
        if let Some(i) = cutoffs.iter().position(|&c| c < 1) {
            return Err(FockError::BadCutoff(i));
        }
        let dims: Vec<usize> = cutoffs.iter().map(|c| c + 1).collect();
        let total = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        match total {
            Some(t) if t <= MAX_DIM => Ok(Self { dims }),
            Some(t) => Err(FockError::TooLarge(t)),
            None => Err(FockError::TooLarge(usize::MAX)),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn cutoff(&self, mode: usize) -> usize {
        self.dims[mode] - 1
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    fn check(&self, mode: usize) -> Result<()> {
        if mode < self.dims.len() {
            Ok(())
        } else {
            Err(FockError::BadMode(mode))
        }
    }

    /// Occupation numbers of a flat basis index (row-major, mode 0 slowest).
    pub fn occupations(&self, mut idx: usize) -> Vec<usize> {
        let mut occ = vec![0; self.dims.len()];
        for (k, &d) in self.dims.iter().enumerate().rev() {
            occ[k] = idx % d;
            idx /= d;
        }
        occ
    }

    pub fn index(&self, occ: &[usize]) -> usize {
        occ.iter().zip(&self.dims).fold(0, |acc, (&n, &d)| acc * d + n)
    }
}

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    reg: ModeRegister,
    rho: DMatrix<C64>,
    truncation: f64,
}

/// Moment specification: product over modes of `a†^dag a^ann` (normal ordered per mode).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSpec {
    pub factors: Vec<(usize, u32, u32)>,
}

#[derive(Debug, Clone)]
pub enum Query<'a> {
    Number(usize),
    PartialTrace(&'a [usize]),
    FidelityPure(&'a DVector<C64>),
    CrossMoment(&'a MomentSpec),
}

#[derive(Debug, Clone)]
pub enum QueryValue {
    Real(f64),
    Complex(C64),
    State(DensityMatrix),
}

/// Result of a threshold-detector measurement on one mode.
#[derive(Debug, Clone)]
pub struct ClickOutcome {
    pub p_click: f64,
    click: Option<DensityMatrix>,
    pub given_noclick: Option<DensityMatrix>,
}

impl ClickOutcome {
    pub fn given_click(&self) -> Result<&DensityMatrix> {
        self.click.as_ref().ok_or(FockError::ImpossibleCondition)
    }
}

fn geometric(n_mean: f64, dim: usize) -> Result<Vec<f64>> {
    if !(n_mean >= 0.0) || !n_mean.is_finite() {
        return Err(FockError::Param(format!("n_mean must be >= 0, got {n_mean}")));
    }
    let x = n_mean / (1.0 + n_mean);
    let tail = x.powi(dim as i32);
    if tail > TRUNCATION_TOL {
        return Err(FockError::CutoffTooSmall(tail));
    }
    let mut p: Vec<f64> = (0..dim).map(|n| (1.0 - x) * x.powi(n as i32)).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    Ok(p)
}

/// Single-mode thermal state on `mode`, every other mode in vacuum.
pub fn thermal_state(n_mean: f64, reg: &ModeRegister, mode: usize) -> Result<DensityMatrix> {
    reg.check(mode)?;
    let mut n = vec![0.0; reg.n_modes()];
    n[mode] = n_mean;
    DensityMatrix::thermal_product(reg, &n)
}

impl DensityMatrix {
    /// Product of thermal states, one mean occupation per mode.
    pub fn thermal_product(reg: &ModeRegister, n_mean: &[f64]) -> Result<Self> {
        if n_mean.len() != reg.n_modes() {
            return Err(FockError::Mismatch);
        }
        let marg: Vec<Vec<f64>> = n_mean
            .iter()
            .zip(reg.dims())
            .map(|(&n, &d)| geometric(n, d))
            .collect::<Result<_>>()?;
        let dim = reg.dim();
        let mut rho = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            let occ = reg.occupations(i);
            let p: f64 = occ.iter().enumerate().map(|(k, &n)| marg[k][n]).product();
            rho[(i, i)] = C64::new(p, 0.0);
        }
        Ok(Self { reg: reg.clone(), rho, truncation: 0.0 })
    }

    pub fn vacuum(reg: &ModeRegister) -> Self {
        let dim = reg.dim();
        let mut rho = DMatrix::zeros(dim, dim);
        rho[(0, 0)] = C64::new(1.0, 0.0);
        Self { reg: reg.clone(), rho, truncation: 0.0 }
    }

    /// Pure state |ψ⟩⟨ψ| (normalized on construction).
    pub fn pure(reg: &ModeRegister, psi: &DVector<C64>) -> Result<Self> {
        if psi.len() != reg.dim() {
            return Err(FockError::Mismatch);
        }
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(FockError::Param("zero state vector".into()));
        }
        let v = psi / C64::new(norm, 0.0);
        Ok(Self { reg: reg.clone(), rho: &v * v.adjoint(), truncation: 0.0 })
    }

    /// Wraps an explicit matrix; it is Hermitized and normalized.
    pub fn from_matrix(reg: &ModeRegister, m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != reg.dim() || m.ncols() != reg.dim() {
            return Err(FockError::Mismatch);
        }
        let tr = m.trace().re;
        if !(tr > 0.0) {
            return Err(FockError::ImpossibleCondition);
        }
        let h = (&m + m.adjoint()) * C64::new(0.5 / tr, 0.0);
        Ok(Self { reg: reg.clone(), rho: h, truncation: 0.0 })
    }

    pub fn register(&self) -> &ModeRegister {
        &self.reg
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    /// Accumulated probability mass discarded by truncating operations.
    pub fn truncation_budget(&self) -> f64 {
        self.truncation
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        nalgebra::SymmetricEigen::new(h).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Probability of a basis occupation pattern.
    pub fn population(&self, occ: &[usize]) -> f64 {
        let i = self.reg.index(occ);
        self.rho[(i, i)].re
    }

    fn with(&self, rho: DMatrix<C64>, extra: f64) -> Self {
        Self { reg: self.reg.clone(), rho, truncation: self.truncation + extra }
    }

    fn renormalize(mut self, tol: f64, err: fn(f64) -> FockError) -> Result<Self> {
        let tr = self.trace();
        let deficit = 1.0 - tr;
        if deficit > tol {
            return Err(err(deficit));
        }
        self.rho = (&self.rho + self.rho.adjoint()) * C64::new(0.5 / tr, 0.0);
        self.truncation += deficit.max(0.0);
        Ok(self)
    }

    /// Applies a unitary given on an enlarged local space and projected onto the kept block.
    fn apply_projected(&self, modes: &[usize], op: &DMatrix<C64>) -> DMatrix<C64> {
        let dims = self.reg.dims();
        let half = kernel::left_local(&self.rho, dims, modes, op);
        kernel::left_local(&half.adjoint(), dims, modes, op)
    }

    pub fn two_mode_squeeze(&self, a: usize, b: usize, p_excite: f64, phase: f64) -> Result<Self> {
        self.reg.check(a)?;
        self.reg.check(b)?;
        if a == b {
            return Err(FockError::SameMode);
        }
        if !(0.0..0.5).contains(&p_excite) {
            return Err(FockError::Param(format!("p_excite must lie in [0, 0.5), got {p_excite}")));
        }
        if p_excite == 0.0 {
            return Ok(self.clone());
        }
        let r = p_excite.sqrt().atanh();
        let (da, db) = (self.reg.dims()[a], self.reg.dims()[b]);
        let u = cached(0, da, db, r, phase, tms_unitary);
        let rho = self.apply_projected(&[a, b], &u);
        self.with(rho, 0.0).renormalize(TRUNCATION_TOL, FockError::CutoffTooSmallForSqueeze)
    }

    pub fn beamsplitter(&self, a: usize, b: usize, transmittance: f64, phase: f64) -> Result<Self> {
        self.reg.check(a)?;
        self.reg.check(b)?;
        if a == b {
            return Err(FockError::SameMode);
        }
        if !(0.0..=1.0).contains(&transmittance) {
            return Err(FockError::Param(format!("transmittance must lie in [0, 1], got {transmittance}")));
        }
        let (da, db) = (self.reg.dims()[a], self.reg.dims()[b]);
        let u = cached(1, da, db, transmittance, phase, bs_unitary);
        let rho = self.apply_projected(&[a, b], &u);
        self.with(rho, 0.0).renormalize(TRUNCATION_TOL, FockError::CutoffTooSmall)
    }

    pub fn phase_rotation(&self, mode: usize, phi: f64) -> Result<Self> {
        self.reg.check(mode)?;
        let dims = self.reg.dims();
        let mut rho = self.rho.clone();
        let stride: usize = dims[mode + 1..].iter().product();
        let d = dims[mode];
        for j in 0..rho.ncols() {
            let nj = (j / stride) % d;
            for i in 0..rho.nrows() {
                let ni = (i / stride) % d;
                if ni != nj {
                    rho[(i, j)] *= C64::from_polar(1.0, phi * (ni as f64 - nj as f64));
                }
            }
        }
        Ok(self.with(rho, 0.0))
    }

    /// Applies a single-mode superoperator; output cutoff may differ from input.
    pub fn apply_superop(&self, mode: usize, s: &Superop) -> Result<Self> {
        self.reg.check(mode)?;
        if s.din() != self.reg.dims()[mode] {
            return Err(FockError::Mismatch);
        }
        let mut dims = self.reg.dims().to_vec();
        let rho = kernel::apply_superop(&self.rho, &dims, mode, s);
        dims[mode] = s.dout();
        let reg = ModeRegister { dims };
        Ok(Self { reg, rho, truncation: self.truncation })
    }

    /// Applies a trace-preserving single-mode map, renormalizing and booking the truncation loss.
    pub fn channel(&self, mode: usize, s: &Superop) -> Result<Self> {
        let out = self.apply_superop(mode, s)?;
        out.renormalize(TRUNCATION_TOL, FockError::CutoffTooSmall)
    }

    pub fn loss_channel(&self, mode: usize, eta: f64) -> Result<Self> {
        self.reg.check(mode)?;
        let s = Superop::loss(self.reg.dims()[mode], eta)?;
        self.channel(mode, &s)
    }

    pub fn thermal_noise_channel(&self, mode: usize, n_add: f64) -> Result<Self> {
        self.reg.check(mode)?;
        if n_add == 0.0 {
            return Ok(self.clone());
        }
        let s = Superop::additive_noise(self.reg.dims()[mode], n_add)?;
        self.channel(mode, &s)
    }

    /// Multiplies coherences ρ_mn of `mode` by `overlap^|m-n|`.
    pub fn dephase(&self, mode: usize, overlap: f64) -> Result<Self> {
        self.reg.check(mode)?;
        let s = Superop::dephasing(self.reg.dims()[mode], overlap)?;
        self.channel(mode, &s)
    }

    /// Changes the cutoff of one mode, discarding population above the new cutoff.
    pub fn resize(&self, mode: usize, cutoff: usize) -> Result<Self> {
        self.reg.check(mode)?;
        if cutoff < 1 {
            return Err(FockError::BadCutoff(mode));
        }
        let mut dims = self.reg.dims().to_vec();
        dims[mode] = cutoff + 1;
        let reg = ModeRegister::with_cutoffs(&dims.iter().map(|d| d - 1).collect::<Vec<_>>())?;
        let s = Superop::resize(self.reg.dims()[mode], cutoff + 1);
        let rho = kernel::apply_superop(&self.rho, self.reg.dims(), mode, &s);
        let out = Self { reg, rho, truncation: self.truncation };
        out.renormalize(TRUNCATION_TOL, FockError::CutoffTooSmall)
    }

    /// Threshold detection of `mode`; the mode is traced out of both conditional states.
    pub fn click_povm(&self, mode: usize, p_dark: f64) -> Result<ClickOutcome> {
        self.reg.check(mode)?;
        if !(0.0..1.0).contains(&p_dark) {
            return Err(FockError::Param(format!("p_dark must lie in [0, 1), got {p_dark}")));
        }
        let (traced, vac) = self.split_vacuum(mode)?;
        let none = vac.map(|v| v * C64::new(1.0 - p_dark, 0.0));
        let p_none = none.as_ref().map_or(0.0, |m| m.trace().re);
        let p_click = (1.0 - p_none).clamp(0.0, 1.0);
        let reg = traced.reg.clone();
        let click_m = match &none {
            Some(n) => &traced.rho - n,
            None => traced.rho.clone(),
        };
        let cond = |m: DMatrix<C64>, p: f64| -> Option<DensityMatrix> {
            if p > 1e-300 {
                Some(DensityMatrix { reg: reg.clone(), rho: m * C64::new(1.0 / p, 0.0), truncation: self.truncation })
            } else {
                None
            }
        };
        Ok(ClickOutcome {
            p_click,
            click: cond(click_m, p_click),
            given_noclick: none.and_then(|n| cond(n, p_none)),
        })
    }

    /// (state with `mode` traced out, unnormalized block with `mode` projected on vacuum).
    fn split_vacuum(&self, mode: usize) -> Result<(DensityMatrix, Option<DMatrix<C64>>)> {
        if self.reg.n_modes() == 1 {
            return Err(FockError::Param("cannot trace out the only mode".into()));
        }
        let d = self.reg.dims()[mode];
        let mut dims = self.reg.dims().to_vec();
        dims.remove(mode);
        let reg = ModeRegister { dims };
        let rho = kernel::apply_superop(&self.rho, self.reg.dims(), mode, &Superop::trace_out(d));
        let vac = kernel::apply_superop(&self.rho, self.reg.dims(), mode, &Superop::vacuum_projection(d));
        Ok((DensityMatrix { reg, rho, truncation: self.truncation }, Some(vac)))
    }

    /// Reduced state on `keep` (in the given order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        for &k in keep {
            self.reg.check(k)?;
        }
        if keep.is_empty() {
            return Err(FockError::NoModes);
        }
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != keep.len() {
            return Err(FockError::SameMode);
        }
        let dims = self.reg.dims();
        let kdims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
        let kreg = ModeRegister { dims: kdims };
        let dk = kreg.dim();
        let mut out = DMatrix::zeros(dk, dk);
        let dim = self.reg.dim();
        let split = |i: usize| {
            let occ = self.reg.occupations(i);
            let kept: Vec<usize> = keep.iter().map(|&k| occ[k]).collect();
            let rest = (0..occ.len()).filter(|k| !keep.contains(k)).fold(0, |acc, k| acc * dims[k] + occ[k]);
            (kreg.index(&kept), rest)
        };
        let parts: Vec<(usize, usize)> = (0..dim).map(split).collect();
        for j in 0..dim {
            for i in 0..dim {
                if parts[i].1 == parts[j].1 {
                    out[(parts[i].0, parts[j].0)] += self.rho[(i, j)];
                }
            }
        }
        Ok(DensityMatrix { reg: kreg, rho: out, truncation: self.truncation })
    }

    pub fn number_expectation(&self, mode: usize) -> Result<f64> {
        self.reg.check(mode)?;
        let stride: usize = self.reg.dims()[mode + 1..].iter().product();
        let d = self.reg.dims()[mode];
        Ok((0..self.reg.dim()).map(|i| ((i / stride) % d) as f64 * self.rho[(i, i)].re).sum())
    }

    /// ⟨Π_k a_k†^p a_k^q⟩.
    pub fn cross_moment(&self, spec: &MomentSpec) -> Result<C64> {
        let dims = self.reg.dims();
        let mut m = self.rho.clone();
        for &(mode, dag, ann) in &spec.factors {
            self.reg.check(mode)?;
            let op = kernel::ladder_product(dims[mode], dag, ann);
            m = kernel::left_local(&m, dims, &[mode], &op);
        }
        Ok(m.trace())
    }

    pub fn fidelity_pure(&self, target: &DVector<C64>) -> Result<f64> {
        if target.len() != self.reg.dim() {
            return Err(FockError::Mismatch);
        }
        Ok((target.adjoint() * &self.rho * target)[(0, 0)].re)
    }

    pub fn query(&self, q: Query<'_>) -> Result<QueryValue> {
        Ok(match q {
            Query::Number(m) => QueryValue::Real(self.number_expectation(m)?),
            Query::PartialTrace(keep) => QueryValue::State(self.partial_trace(keep)?),
            Query::FidelityPure(t) => QueryValue::Real(self.fidelity_pure(t)?),
            Query::CrossMoment(s) => QueryValue::Complex(self.cross_moment(s)?),
        })
    }

    /// Convex combination Σ w_i ρ_i of states on the same register.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<DensityMatrix> {
        let first = parts.first().ok_or(FockError::ImpossibleCondition)?.1;
        let total: f64 = parts.iter().map(|p| p.0).sum();
        if !(total > 0.0) {
            return Err(FockError::ImpossibleCondition);
        }
        let mut rho = DMatrix::zeros(first.rho.nrows(), first.rho.ncols());
        let mut trunc = 0.0;
        for (w, s) in parts {
            if s.reg != first.reg {
                return Err(FockError::Mismatch);
            }
            rho += &s.rho * C64::new(w / total, 0.0);
            trunc += w / total * s.truncation;
        }
        Ok(DensityMatrix { reg: first.reg.clone(), rho, truncation: trunc })
    }
}

type Key = (u8, usize, usize, u64, u64);

/// Memoized two-mode unitaries; sweeps rebuild the same ones many times.
fn cached(kind: u8, da: usize, db: usize, x: f64, phase: f64, build: fn(usize, usize, f64, f64) -> DMatrix<C64>) -> Arc<DMatrix<C64>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<DMatrix<C64>>>>> = OnceLock::new();
    let key = (kind, da, db, x.to_bits(), phase.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(u) = cache.lock().expect("cache lock").get(&key) {
        return u.clone();
    }
    let u = Arc::new(build(da, db, x, phase));
    let mut map = cache.lock().expect("cache lock");
    if map.len() >= 256 {
        map.clear();
    }
    map.insert(key, u.clone());
    u
}

fn expm_projected(gen: DMatrix<C64>, big: (usize, usize), keep: (usize, usize)) -> DMatrix<C64> {
    let u = gen.exp();
    let mut out = DMatrix::zeros(keep.0 * keep.1, keep.0 * keep.1);
    for i in 0..keep.0 * keep.1 {
        let bi = (i / keep.1) * big.1 + i % keep.1;
        for j in 0..keep.0 * keep.1 {
            let bj = (j / keep.1) * big.1 + j % keep.1;
            out[(i, j)] = u[(bi, bj)];
        }
    }
    out
}

/// exp(r (e^{iφ} a†b† − e^{−iφ} ab)) restricted to the kept block.
pub(crate) fn tms_unitary(da: usize, db: usize, r: f64, phase: f64) -> DMatrix<C64> {
    let (ba, bb) = (da + EXPM_MARGIN, db + EXPM_MARGIN);
    let mut g = DMatrix::zeros(ba * bb, ba * bb);
    let e = C64::from_polar(r, phase);
    for na in 0..ba - 1 {
        for nb in 0..bb - 1 {
            let from = na * bb + nb;
            let to = (na + 1) * bb + nb + 1;
            let amp = (((na + 1) * (nb + 1)) as f64).sqrt();
            g[(to, from)] += e * amp;
            g[(from, to)] -= e.conj() * amp;
        }
    }
    expm_projected(g, (ba, bb), (da, db))
}

/// exp(θ (e^{iφ} a†b − e^{−iφ} ab†)) with cos²θ = T, restricted to the kept block.
/// Heisenberg action: a → √T a + e^{iφ}√(1−T) b.
pub(crate) fn bs_unitary(da: usize, db: usize, t: f64, phase: f64) -> DMatrix<C64> {
    let theta = t.sqrt().clamp(0.0, 1.0).acos();
    // number conserving: an enlarged cutoff of (da-1)+(db-1) per mode is exact
    let big = da + db - 1;
    let mut g = DMatrix::zeros(big * big, big * big);
    let e = C64::from_polar(theta, phase);
    for na in 0..big {
        for nb in 1..big {
            if na + 1 >= big {
                continue;
            }
            // a† b |na, nb> = sqrt((na+1) nb) |na+1, nb-1>
            let from = na * big + nb;
            let to = (na + 1) * big + nb - 1;
            let amp = (((na + 1) * nb) as f64).sqrt();
            g[(to, from)] += e * amp;
            g[(from, to)] -= e.conj() * amp;
        }
    }
    expm_projected(g, (big, big), (da, db))
}
