//! Truncated cylindrical Wiener noise and the diffusion families it drives.
//!
//! Diagonal families use `sigma_k(lambda) = a_k g(lambda)` with a fixed
//! 1-Lipschitz profile `g` (`g(0) = 0`) and `a_k = sqrt(6 L) / (pi k)`, so
//! `sum_k a_k^2 -> L` from below as `K` grows. The linear family is
//! `sigma(y) = v(y)` on one driver, and the additive family uses fixed basis
//! fields independent of the state.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use crate::basis::GalerkinBasis;
use crate::field::{pair, PhysicalField, SpectralField};
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NoiseError {
    #[error("Lipschitz violation: sampled ratio {ratio} exceeds L = {bound}")]
    LipschitzViolation { ratio: f64, bound: f64 },
    #[error("additive noise references mode {0}, basis has fewer modes")]
    ModeOutOfRange(usize),
    #[error("invalid noise setting: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `g(lambda) = lambda`
    Identity,
    /// `g(lambda) = lambda / (1 + |lambda|)`
    Saturating,
}

impl Profile {
    #[inline]
    pub fn apply(self, l: [f64; 2]) -> [f64; 2] {
        match self {
            Profile::Identity => l,
            Profile::Saturating => {
                let s = 1.0 / (1.0 + libm::hypot(l[0], l[1]));
                [l[0] * s, l[1] * s]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Off,
    Diagonal { profile: Profile },
    LinearVmap,
    /// `sigma_k = amp_k e_{mode_k}`, one driver per entry.
    Additive { fields: Vec<(usize, f64)> },
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::Off => "off",
            NoiseKind::Diagonal { .. } => "diagonal",
            NoiseKind::LinearVmap => "linear_vmap",
            NoiseKind::Additive { .. } => "additive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Lipschitz constant of the family.
    pub lipschitz: f64,
    /// Slope bounds `a_k`, `k = 1..=K` (diagonal family only).
    pub slopes: Vec<f64>,
}

impl NoiseModel {
    pub fn off() -> Self {
        Self { kind: NoiseKind::Off, lipschitz: 0.0, slopes: Vec::new() }
    }

    pub fn diagonal(profile: Profile, lipschitz: f64, truncation: usize) -> Self {
        let slopes = (1..=truncation).map(|k| libm::sqrt(6.0 * lipschitz) / (PI * k as f64)).collect();
        Self { kind: NoiseKind::Diagonal { profile }, lipschitz, slopes }
    }

    pub fn linear_vmap() -> Self {
        Self { kind: NoiseKind::LinearVmap, lipschitz: 1.0, slopes: Vec::new() }
    }

    pub fn additive(fields: Vec<(usize, f64)>) -> Self {
        Self { kind: NoiseKind::Additive { fields }, lipschitz: 0.0, slopes: Vec::new() }
    }

    /// Number of independent scalar drivers.
    pub fn drivers(&self) -> usize {
        match &self.kind {
            NoiseKind::Off => 0,
            NoiseKind::Diagonal { .. } => self.slopes.len(),
            NoiseKind::LinearVmap => 1,
            NoiseKind::Additive { fields } => fields.len(),
        }
    }

    pub fn is_off(&self) -> bool {
        self.drivers() == 0
    }

    /// `sum_{k <= K} a_k^2`.
    pub fn slope_sum_sq(&self) -> f64 {
        self.slopes.iter().map(|a| a * a).sum()
    }

    /// `L - sum_{k <= K} a_k^2`, the part of the series dropped by truncation.
    pub fn truncation_tail(&self) -> f64 {
        match self.kind {
            NoiseKind::Diagonal { .. } => self.lipschitz - self.slope_sum_sq(),
            _ => 0.0,
        }
    }

    /// Constant `L_eff` with `sum_k ||sigma_k(y)||_2^2 <= L_eff ||y||_V^2` and
    /// `sum_k (sigma_k(y), y)^2 <= L_eff ||y||_V^4`.
    pub fn energy_lipschitz(&self) -> f64 {
        match self.kind {
            NoiseKind::Off | NoiseKind::Additive { .. } => 0.0,
            NoiseKind::Diagonal { .. } => self.slope_sum_sq(),
            NoiseKind::LinearVmap => 1.0,
        }
    }

    pub fn validate(&self, basis: &GalerkinBasis) -> Result<(), NoiseError> {
        if !(self.lipschitz >= 0.0 && self.lipschitz.is_finite()) {
            return Err(NoiseError::Invalid("noise_L must be finite and >= 0"));
        }
        if let NoiseKind::Additive { fields } = &self.kind {
            if let Some(&(i, _)) = fields.iter().find(|(i, _)| *i >= basis.len()) {
                return Err(NoiseError::ModeOutOfRange(i));
            }
        }
        Ok(())
    }

    /// Diffusion pairings `(sigma_k(y), e_i)` in factored form.
    pub fn diffusion(&self, basis: &GalerkinBasis, coeffs: &[f64]) -> Diffusion {
        match &self.kind {
            NoiseKind::Off => Diffusion::None,
            NoiseKind::Diagonal { profile } => {
                let shape = match profile {
                    Profile::Identity => coeffs.iter().zip(basis.modes()).map(|(c, m)| c / m.v_factor).collect(),
                    Profile::Saturating => {
                        let g = basis.grid();
                        let n = g.points();
                        let mut blocks = basis.to_blocks(coeffs);
                        let mut f = PhysicalField::zeros(n, 2);
                        for (b, c) in blocks.iter_mut().zip(f.components.iter_mut()) {
                            g.synthesize(b, c);
                        }
                        for p in 0..n * n {
                            let v = profile.apply([f.components[0][p], f.components[1][p]]);
                            f.components[0][p] = v[0];
                            f.components[1][p] = v[1];
                        }
                        pair(basis, &f).expect("grid matches basis")
                    }
                };
                Diffusion::Rank1 { weights: self.slopes.clone(), shape }
            }
            NoiseKind::LinearVmap => Diffusion::Rank1 { weights: vec![1.0], shape: coeffs.to_vec() },
            NoiseKind::Additive { fields } => Diffusion::Fixed {
                columns: fields.iter().map(|&(i, a)| (i, a / basis.mode(i).v_factor)).collect(),
            },
        }
    }

    /// Largest sampled `sum_k |sigma_k(l) - sigma_k(m)|^2 / |l - m|^2` over
    /// pseudo-random pairs in the plane.
    pub fn sample_lipschitz_ratio(&self, trials: usize, seed: u64) -> f64 {
        match &self.kind {
            NoiseKind::Off | NoiseKind::Additive { .. } => 0.0,
            NoiseKind::LinearVmap => 1.0,
            NoiseKind::Diagonal { profile } => {
                let s = self.slope_sum_sq();
                let mut worst: f64 = 0.0;
                for t in 0..trials as u64 {
                    // Spread the scale over several decades, including tiny gaps.
                    let scale = libm::exp(3.0 * rng::normal(seed, t, 0, 0));
                    let l = [scale * rng::normal(seed, t, 1, 0), scale * rng::normal(seed, t, 1, 1)];
                    let gap = libm::exp(2.0 * rng::normal(seed, t, 2, 0));
                    let m = [l[0] + gap * rng::normal(seed, t, 3, 0), l[1] + gap * rng::normal(seed, t, 3, 1)];
                    let d2 = (l[0] - m[0]) * (l[0] - m[0]) + (l[1] - m[1]) * (l[1] - m[1]);
                    if d2 == 0.0 {
                        continue;
                    }
                    let (gl, gm) = (profile.apply(l), profile.apply(m));
                    let dg = (gl[0] - gm[0]) * (gl[0] - gm[0]) + (gl[1] - gm[1]) * (gl[1] - gm[1]);
                    worst = worst.max(s * dg / d2);
                }
                worst
            }
        }
    }

    pub fn verify_lipschitz(&self, trials: usize, seed: u64) -> Result<f64, NoiseError> {
        assert!(trials >= 1, "trials must be >= 1");
        let ratio = self.sample_lipschitz_ratio(trials, seed);
        if ratio > self.lipschitz * (1.0 + 1e-9) {
            return Err(NoiseError::LipschitzViolation { ratio, bound: self.lipschitz });
        }
        Ok(ratio)
    }
}

/// `g[k][i] = (sigma_k(y), e_i)` without materializing the dense matrix when
/// it factors.
#[derive(Debug, Clone, PartialEq)]
pub enum Diffusion {
    None,
    /// `g[k][i] = weights[k] * shape[i]`
    Rank1 { weights: Vec<f64>, shape: Vec<f64> },
    /// Driver `k` touches only coefficient `columns[k].0`.
    Fixed { columns: Vec<(usize, f64)> },
}

impl Diffusion {
    /// `out_i += scale * sum_k g[k][i] dbeta_k`.
    pub fn apply(&self, scale: f64, dbeta: &[f64], out: &mut [f64]) {
        match self {
            Diffusion::None => {}
            Diffusion::Rank1 { weights, shape } => {
                let s: f64 = weights.iter().zip(dbeta).map(|(a, b)| a * b).sum();
                for (o, p) in out.iter_mut().zip(shape) {
                    *o += scale * p * s;
                }
            }
            Diffusion::Fixed { columns } => {
                for (&(i, g), b) in columns.iter().zip(dbeta) {
                    out[i] += scale * g * b;
                }
            }
        }
    }

    pub fn to_matrix(&self, modes: usize) -> Vec<Vec<f64>> {
        match self {
            Diffusion::None => Vec::new(),
            Diffusion::Rank1 { weights, shape } => weights.iter().map(|a| shape.iter().map(|p| a * p).collect()).collect(),
            Diffusion::Fixed { columns } => columns
                .iter()
                .map(|&(i, g)| {
                    let mut r = vec![0.0; modes];
                    r[i] = g;
                    r
                })
                .collect(),
        }
    }

    /// `sum_k sum_i g[k][i]^2`, the Ito correction to `d ||y||_V^2`.
    pub fn frobenius_sq(&self) -> f64 {
        match self {
            Diffusion::None => 0.0,
            Diffusion::Rank1 { weights, shape } => {
                weights.iter().map(|a| a * a).sum::<f64>() * shape.iter().map(|p| p * p).sum::<f64>()
            }
            Diffusion::Fixed { columns } => columns.iter().map(|(_, g)| g * g).sum(),
        }
    }

    /// `sum_k (g_k . c) dbeta_k`.
    pub fn martingale_increment(&self, coeffs: &[f64], dbeta: &[f64]) -> f64 {
        match self {
            Diffusion::None => 0.0,
            Diffusion::Rank1 { weights, shape } => {
                let gc: f64 = shape.iter().zip(coeffs).map(|(a, b)| a * b).sum();
                gc * weights.iter().zip(dbeta).map(|(a, b)| a * b).sum::<f64>()
            }
            Diffusion::Fixed { columns } => columns.iter().zip(dbeta).map(|(&(i, g), b)| g * coeffs[i] * b).sum(),
        }
    }
}

/// Pairing matrix `g[k][i] = (sigma_k(y), e_i)` for a state.
pub fn diffusion_pairings(y: &SpectralField, model: &NoiseModel) -> Vec<Vec<f64>> {
    model.diffusion(y.basis(), y.coeffs()).to_matrix(y.basis().len())
}

/// Brownian driver of one path. Increments over step `m` are the sum of `refine`
/// sub-increments on a base grid of width `base_dt`, so runs with different
/// refinement factors share the same underlying Brownian path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WienerState {
    pub seed: u64,
    pub path: u64,
    pub base_dt: f64,
    pub refine: u64,
    pub step: u64,
    pub t: f64,
}

impl WienerState {
    pub fn new(seed: u64, path: u64, dt: f64) -> Self {
        Self::refined(seed, path, dt, 1)
    }

    pub fn refined(seed: u64, path: u64, base_dt: f64, refine: u64) -> Self {
        assert!(base_dt > 0.0 && refine >= 1);
        Self { seed, path, base_dt, refine, step: 0, t: 0.0 }
    }

    pub fn dt(&self) -> f64 {
        self.base_dt * self.refine as f64
    }

    /// Increments of step `step` for drivers `0..out.len()`; stateless.
    pub fn increments_at(&self, step: u64, out: &mut [f64]) {
        let sd = libm::sqrt(self.base_dt);
        for (k, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for r in 0..self.refine {
                s += rng::normal(self.seed, self.path, step * self.refine + r, k as u64);
            }
            *o = sd * s;
        }
    }

    /// Increments of the current step; advances the state.
    pub fn sample_increments(&mut self, drivers: usize) -> Vec<f64> {
        let mut out = vec![0.0; drivers];
        self.increments_at(self.step, &mut out);
        self.step += 1;
        self.t = self.step as f64 * self.dt();
        out
    }
}

/// Monte Carlo estimate of `E |sum_k int_0^T g[k] dbeta_k|^2` for a frozen
/// diffusion, against the isometry value `T sum_k |g[k]|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsometryCheck {
    pub mean: f64,
    pub stderr: f64,
    pub expected: f64,
}

impl IsometryCheck {
    /// Agreement within three standard errors.
    pub fn passes(&self) -> bool {
        (self.mean - self.expected).abs() <= 3.0 * self.stderr
    }
}

/// Runs `paths` Brownian paths of `steps` increments each over `[0, t_end]`
/// and integrates the frozen diffusion `d` (acting on `modes` coefficients).
pub fn ito_isometry(d: &Diffusion, modes: usize, drivers: usize, t_end: f64, steps: u64, paths: u64, seed: u64) -> IsometryCheck {
    let dt = t_end / steps as f64;
    let mut xs = Vec::with_capacity(paths as usize);
    let mut db = vec![0.0; drivers];
    for p in 0..paths {
        let w = WienerState::new(seed, p, dt);
        let mut acc = vec![0.0; modes];
        for m in 0..steps {
            w.increments_at(m, &mut db);
            d.apply(1.0, &db, &mut acc);
        }
        xs.push(acc.iter().map(|v| v * v).sum::<f64>());
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    IsometryCheck { mean, stderr: libm::sqrt(var / n), expected: t_end * d.frobenius_sq() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_series_approaches_l() {
        let m = NoiseModel::diagonal(Profile::Identity, 0.3, 2000);
        let mut prev = 0.0;
        let mut acc = 0.0;
        for a in &m.slopes {
            acc += a * a;
            assert!(acc > prev);
            prev = acc;
        }
        assert!(acc < 0.3);
        // tail of sum 1/k^2 beyond K is about 1/K
        assert!((0.3 - acc - 6.0 * 0.3 / (PI * PI) / 2000.0).abs() < 1e-6);
    }

    #[test]
    fn increments_repeat_and_empty() {
        let mut w = WienerState::new(5, 1, 0.01);
        let mut v = WienerState::new(5, 1, 0.01);
        assert_eq!(w.sample_increments(4), v.sample_increments(4));
        assert!(w.sample_increments(0).is_empty());
    }

    #[test]
    fn lipschitz_checks() {
        let id = NoiseModel::diagonal(Profile::Identity, 1.0, 16);
        let r = id.verify_lipschitz(1000, 3).unwrap();
        assert!((r - id.slope_sum_sq()).abs() < 1e-12);
        let sat = NoiseModel::diagonal(Profile::Saturating, 1.0, 16);
        assert!(sat.verify_lipschitz(5000, 3).unwrap() <= sat.slope_sum_sq() * (1.0 + 1e-12));
        let mut bad = NoiseModel::diagonal(Profile::Identity, 1.0, 16);
        for a in &mut bad.slopes {
            *a *= 2.0;
        }
        assert!(matches!(bad.verify_lipschitz(10, 0), Err(NoiseError::LipschitzViolation { .. })));
    }
}
