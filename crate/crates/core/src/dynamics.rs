//! Cut-off Galerkin SDE: the smooth cut-off, the semi-implicit
//! Euler–Maruyama step, stopping times, the frozen local solution and the
//! Picard map of the fixed-point construction.
//!
//! One step in V-coefficients:
//!
//! ```text
//! c_i <- [c_i + dt (N_i + U_i) + theta sum_k g_ki dbeta_k] / (1 + dt nu mu_i / (1 + alpha1 mu_i))
//! ```
//!
//! where `N` is the cut-off nonlinear drift and `U_i = (U, e_i)`. The viscous
//! rate `nu mu / (1 + alpha1 mu)` stays below `nu / alpha1`, so even explicit
//! viscous stepping would be only mildly stiff. With `nu = 0` the denominator
//! is exactly one and the step is fully explicit.
//!
//! Stopping times use the post-step norm: `tau_M` is the first grid time
//! (including `t = 0`) at which `||y||_{W^{2,4}} >= M`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::basis::GalerkinBasis;
use crate::diagnostics::{BlowupInfo, PathSummary, TrajectoryRecord, TrajectorySample};
use crate::field::{FieldError, SpectralField};
use crate::noise::{Diffusion, NoiseError, NoiseModel, WienerState};
use crate::operators::{evaluate, Evaluation};
use crate::params::{CutoffConfig, FluidParams, ParamError};

/// Smooth cut-off `theta_M`: 1 on `[0, M]`, 0 on `[2M, inf)`, quintic
/// smoothstep in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffFn {
    m: f64,
}

impl CutoffFn {
    pub fn new(m: f64) -> Result<Self, ParamError> {
        CutoffConfig::new(m).map(|c| Self { m: c.m })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn theta(&self, x: f64) -> f64 {
        if x <= self.m {
            1.0
        } else if x >= 2.0 * self.m {
            0.0
        } else {
            let s = 2.0 - x / self.m;
            s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
        }
    }

    /// Lipschitz constant of `x -> theta(x)`: the smoothstep slope peaks at
    /// `15/8` in the rescaled variable.
    pub fn lipschitz(&self) -> f64 {
        15.0 / (8.0 * self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutoffMode {
    Smooth(CutoffFn),
    /// `theta = 1` everywhere: the uncut dynamics.
    Disabled,
    /// `theta = 0` everywhere: the nonlinearity and the noise are switched off.
    ForcedZero,
}

impl CutoffMode {
    #[inline]
    pub fn theta(&self, x: f64) -> f64 {
        match self {
            CutoffMode::Smooth(c) => c.theta(x),
            CutoffMode::Disabled => 1.0,
            CutoffMode::ForcedZero => 0.0,
        }
    }

    pub fn level(&self) -> Option<f64> {
        match self {
            CutoffMode::Smooth(c) => Some(c.m()),
            _ => None,
        }
    }
}

/// Body force `U(t)` in V-coefficients.
#[derive(Clone, Default)]
pub enum Forcing {
    #[default]
    Zero,
    Constant(Vec<f64>),
    Custom(Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => f.write_str("Zero"),
            Forcing::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Forcing::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Forcing {
    /// Writes the V-coefficients of `U(t)` into `out`.
    pub fn fill(&self, t: f64, out: &mut [f64]) {
        match self {
            Forcing::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Forcing::Constant(c) => out.copy_from_slice(c),
            Forcing::Custom(f) => f(t, out),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("numerical blowup at step {step} (t = {t})")]
    NumericalBlowup { step: u64, t: f64 },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("forcing has {found} coefficients, basis has {expected}")]
    ForcingLength { expected: usize, found: usize },
}

/// Everything that defines the cut-off SDE except the initial data and the
/// Brownian path.
#[derive(Debug, Clone)]
pub struct System {
    pub basis: Arc<GalerkinBasis>,
    pub params: FluidParams,
    pub cutoff: CutoffMode,
    pub noise: NoiseModel,
    pub forcing: Forcing,
    pub dt: f64,
    /// Level for `tau_M`; defaults to the cut-off threshold.
    pub stop_level: Option<f64>,
    /// Ladder of V-norm levels `N` for `tau_N`.
    pub v_levels: Vec<f64>,
}

impl System {
    pub fn new(basis: Arc<GalerkinBasis>, params: FluidParams, cutoff: CutoffMode, noise: NoiseModel, dt: f64) -> Self {
        let stop_level = cutoff.level();
        Self { basis, params, cutoff, noise, forcing: Forcing::Zero, dt, stop_level, v_levels: Vec::new() }
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn with_stop_level(mut self, m: Option<f64>) -> Self {
        self.stop_level = m;
        self
    }

    pub fn with_v_levels(mut self, levels: Vec<f64>) -> Self {
        self.v_levels = levels;
        self
    }

    /// Parameter, noise and forcing consistency. Negative viscosity is
    /// tolerated here so test fixtures can build deliberately unstable runs.
    pub fn check(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ParamError::Invalid("dt must be > 0".into()).into());
        }
        self.noise.validate(&self.basis)?;
        if let Forcing::Constant(c) = &self.forcing {
            if c.len() != self.basis.len() {
                return Err(SimError::ForcingLength { expected: self.basis.len(), found: c.len() });
            }
        }
        Ok(())
    }

    /// Per-mode implicit viscous rate `nu mu_i / (1 + alpha1 mu_i)`.
    pub fn viscous_rates(&self) -> Vec<f64> {
        self.basis.modes().iter().map(|m| self.params.nu * m.mu / m.v_factor).collect()
    }

    pub fn evaluate(&self, coeffs: &[f64]) -> Evaluation {
        evaluate(&self.basis, &self.params, &self.cutoff, coeffs)
    }

    pub fn init(&self, y0: SpectralField, wiener: WienerState) -> SimState {
        let eval = self.evaluate(y0.coeffs());
        let mut s = SimState {
            t: 0.0,
            step: 0,
            y: y0,
            wiener,
            tau_m_hit: None,
            frozen: None,
            frozen_w24: None,
            tau_n: vec![None; self.v_levels.len()],
            eval,
        };
        self.mark_stops(&mut s);
        s
    }

    fn mark_stops(&self, s: &mut SimState) {
        if let (Some(m), None) = (self.stop_level, s.tau_m_hit) {
            if s.eval.w24 >= m {
                s.tau_m_hit = Some(s.t);
                s.frozen = Some(s.y.clone());
                s.frozen_w24 = Some(s.eval.w24);
            }
        }
        let v = s.y.v_norm();
        for (lvl, hit) in self.v_levels.iter().zip(s.tau_n.iter_mut()) {
            if hit.is_none() && v >= *lvl {
                *hit = Some(s.t);
            }
        }
    }

    /// One Euler–Maruyama step; `s` is left untouched on error.
    pub fn step(&self, s: &mut SimState) -> Result<StepInfo, SimError> {
        let n = self.basis.len();
        let dt = self.dt;
        let c = s.y.coeffs();
        let mut u = vec![0.0; n];
        self.forcing.fill(s.t, &mut u);
        if u.len() != n {
            return Err(SimError::ForcingLength { expected: n, found: u.len() });
        }
        let diffusion = self.noise.diffusion(&self.basis, c);
        let mut w = s.wiener;
        let dbeta = w.sample_increments(self.noise.drivers());
        let theta = s.eval.theta;
        let mut kick = vec![0.0; n];
        diffusion.apply(theta, &dbeta, &mut kick);

        let rates = self.viscous_rates();
        let mut next = vec![0.0; n];
        let mut drift_dot = 0.0;
        let mut u_l2 = 0.0;
        for i in 0..n {
            let m = self.basis.mode(i);
            let forcing = u[i] / m.v_factor;
            let explicit = s.eval.nonlinear[i] + forcing;
            next[i] = (c[i] + dt * explicit + kick[i]) / (1.0 + dt * rates[i]);
            drift_dot += (explicit - rates[i] * c[i]) * c[i];
            u_l2 += u[i] * u[i] / m.v_factor;
        }
        let step_no = s.step + 1;
        let t_next = step_no as f64 * dt;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NumericalBlowup { step: step_no, t: t_next });
        }
        let kick_sq: f64 = kick.iter().map(|v| v * v).sum();
        let martingale = theta * diffusion.martingale_increment(c, &dbeta);
        let e_old = s.y.v_norm_sq();
        let eval = self.evaluate(&next);
        if !eval.w24.is_finite() || eval.nonlinear.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NumericalBlowup { step: step_no, t: t_next });
        }
        let pre = StepInfo {
            dt,
            theta,
            e_old,
            e_new: next.iter().map(|v| v * v).sum(),
            energy_residual: 0.0,
            dy_sq_post: eval.energy.dy_sq,
            theta_a4_pre: theta * s.eval.energy.a4,
            u_l2_sq: u_l2,
            ito: theta * theta * diffusion.frobenius_sq(),
            martingale,
        };
        let residual = (pre.e_new - pre.e_old - 2.0 * dt * drift_dot - 2.0 * martingale - kick_sq) / dt;
        s.y.coeffs_mut().copy_from_slice(&next);
        s.eval = eval;
        s.step = step_no;
        s.t = t_next;
        s.wiener = w;
        self.mark_stops(s);
        Ok(StepInfo { energy_residual: residual, ..pre })
    }

    /// Diffusion factor of a state (without the cut-off).
    pub fn diffusion(&self, coeffs: &[f64]) -> Diffusion {
        self.noise.diffusion(&self.basis, coeffs)
    }

    /// Picard map: builds the drift and diffusion from the given trajectory
    /// `u` (coefficients at steps `0..=m`) and integrates them from `y0` on
    /// the Brownian path of `wiener`. The viscous term is taken at the right
    /// end point, so the stepper's own trajectory is a fixed point.
    pub fn picard_map(&self, y0: &[f64], u: &[Vec<f64>], wiener: &WienerState) -> Vec<Vec<f64>> {
        let n = self.basis.len();
        let rates = self.viscous_rates();
        let mut out = Vec::with_capacity(u.len());
        out.push(y0.to_vec());
        let mut forcing = vec![0.0; n];
        let mut dbeta = vec![0.0; self.noise.drivers()];
        for m in 0..u.len().saturating_sub(1) {
            let t = m as f64 * self.dt;
            let eval = self.evaluate(&u[m]);
            self.forcing.fill(t, &mut forcing);
            wiener.increments_at(wiener.step + m as u64, &mut dbeta);
            let mut kick = vec![0.0; n];
            self.diffusion(&u[m]).apply(eval.theta, &dbeta, &mut kick);
            let prev = &out[m];
            let next: Vec<f64> = (0..n)
                .map(|i| {
                    let f = forcing[i] / self.basis.mode(i).v_factor;
                    prev[i] + self.dt * (eval.nonlinear[i] + f) - self.dt * rates[i] * u[m + 1][i] + kick[i]
                })
                .collect();
            out.push(next);
        }
        out
    }
}

/// Bookkeeping of one step for energy accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    pub theta: f64,
    pub e_old: f64,
    pub e_new: f64,
    /// `(||y'||_V^2 - ||y||_V^2 - 2 dt (f, y) - 2 theta sum (g_k . c) dbeta_k - |kick|^2) / dt`
    pub energy_residual: f64,
    pub dy_sq_post: f64,
    pub theta_a4_pre: f64,
    pub u_l2_sq: f64,
    pub ito: f64,
    pub martingale: f64,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    pub y: SpectralField,
    pub wiener: WienerState,
    pub tau_m_hit: Option<f64>,
    /// `y(tau_M)` once the stopping time has been reached.
    pub frozen: Option<SpectralField>,
    pub frozen_w24: Option<f64>,
    pub tau_n: Vec<Option<f64>>,
    eval: Evaluation,
}

impl SimState {
    pub fn evaluation(&self) -> &Evaluation {
        &self.eval
    }

    /// The stopped process `y(t ^ tau_M)`.
    pub fn stopped(&self) -> &SpectralField {
        self.frozen.as_ref().unwrap_or(&self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub t_end: f64,
    /// Record one sample every this many steps (the last step is always kept).
    pub sample_stride: usize,
    /// Keep full coefficient snapshots every this many steps (0 = never).
    pub snapshot_stride: usize,
    pub p_exponent: f64,
    /// Keep the coefficients of every step (for the Picard diagnostic).
    pub keep_path: bool,
}

impl RunOptions {
    pub fn new(t_end: f64) -> Self {
        Self { t_end, sample_stride: 1, snapshot_stride: 0, p_exponent: 6.0, keep_path: false }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: TrajectoryRecord,
    pub state: SimState,
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub path: Vec<Vec<f64>>,
}

/// Drives a [`System`] over a horizon and records diagnostics.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    pub system: &'a System,
    pub options: RunOptions,
}

impl<'a> Integrator<'a> {
    pub fn new(system: &'a System, options: RunOptions) -> Self {
        Self { system, options }
    }

    pub fn steps(&self) -> u64 {
        let s = libm::round(self.options.t_end / self.system.dt) as u64;
        s.max(1)
    }

    /// Runs to `t_end`. A numerical blowup ends the run early and is recorded
    /// in the summary rather than returned as an error.
    pub fn run(&self, y0: SpectralField, wiener: WienerState) -> Result<RunOutput, SimError> {
        let sys = self.system;
        sys.check()?;
        let steps = self.steps();
        let p = self.options.p_exponent;
        let mut state = sys.init(y0, wiener);
        let stride = self.options.sample_stride.max(1) as u64;
        let nu = sys.params.nu;
        let beta = sys.params.beta;

        let y0_v_sq = state.y.v_norm_sq();
        let mut summary = PathSummary {
            path: wiener.path,
            seed: wiener.seed,
            steps: 0,
            t_end: 0.0,
            y0_v_sq,
            sup_v_sq: y0_v_sq,
            int_dy_sq: 0.0,
            int_theta_a4: 0.0,
            int_u_l2_sq: 0.0,
            int_ito: 0.0,
            sup_phi: y0_v_sq,
            sup_w_tilde_sq: state.y.w_tilde_sq(),
            sup_w_tilde_p: libm::pow(state.y.w_tilde_sq(), p / 2.0),
            max_w24: state.eval.w24,
            max_abs_residual: 0.0,
            tau_m: state.tau_m_hit,
            tau_n: Vec::new(),
            blowup: None,
            terminal_hash: 0,
        };
        let mut samples = vec![TrajectorySample::of(&state, 0.0)];
        let mut snapshots = Vec::new();
        if self.options.snapshot_stride > 0 {
            snapshots.push((0.0, state.y.coeffs().to_vec()));
        }
        let mut path = Vec::new();
        if self.options.keep_path {
            path.push(state.y.coeffs().to_vec());
        }
        for k in 1..=steps {
            let info = match sys.step(&mut state) {
                Ok(i) => i,
                Err(SimError::NumericalBlowup { step, t }) => {
                    summary.blowup = Some(BlowupInfo { step, t });
                    break;
                }
                Err(e) => return Err(e),
            };
            summary.int_dy_sq += info.dt * info.dy_sq_post;
            summary.int_theta_a4 += info.dt * info.theta_a4_pre;
            summary.int_u_l2_sq += info.dt * info.u_l2_sq;
            summary.int_ito += info.dt * info.ito;
            summary.sup_v_sq = summary.sup_v_sq.max(info.e_new);
            let phi = info.e_new + 4.0 * nu * summary.int_dy_sq + 0.5 * beta * summary.int_theta_a4;
            summary.sup_phi = summary.sup_phi.max(phi);
            let wt = state.y.w_tilde_sq();
            summary.sup_w_tilde_sq = summary.sup_w_tilde_sq.max(wt);
            summary.sup_w_tilde_p = summary.sup_w_tilde_p.max(libm::pow(wt, p / 2.0));
            summary.max_w24 = summary.max_w24.max(state.eval.w24);
            summary.max_abs_residual = summary.max_abs_residual.max(info.energy_residual.abs());
            if k % stride == 0 || k == steps {
                samples.push(TrajectorySample::of(&state, info.energy_residual));
            }
            if self.options.snapshot_stride > 0 && k % self.options.snapshot_stride as u64 == 0 {
                snapshots.push((state.t, state.y.coeffs().to_vec()));
            }
            if self.options.keep_path {
                path.push(state.y.coeffs().to_vec());
            }
        }
        summary.steps = state.step;
        summary.t_end = state.t;
        summary.tau_m = state.tau_m_hit;
        summary.tau_n = sys.v_levels.iter().copied().zip(state.tau_n.iter().copied()).collect();
        summary.terminal_hash = coeff_hash(state.y.coeffs());
        let record = TrajectoryRecord { samples, summary };
        Ok(RunOutput { record, state, snapshots, path })
    }
}

/// FNV-1a over the IEEE bit patterns of the coefficients.
pub fn coeff_hash(c: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in c {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_values() {
        let c = CutoffFn::new(2.0).unwrap();
        assert_eq!(c.theta(1.0), 1.0);
        assert_eq!(c.theta(2.0), 1.0);
        assert_eq!(c.theta(4.0), 0.0);
        assert!((c.theta(3.0) - 0.5).abs() < 1e-15);
        assert!(CutoffFn::new(0.0).is_err());
    }

    #[test]
    fn cutoff_is_monotone_with_bounded_slope() {
        let c = CutoffFn::new(1.5).unwrap();
        let mut prev = 1.0;
        let h = 1e-4;
        let mut x = 0.0;
        while x < 3.5 {
            let v = c.theta(x);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            assert!((prev - v) / h <= c.lipschitz() * (1.0 + 1e-6));
            prev = v;
            x += h;
        }
    }
}
