//! Trajectory records, ensemble aggregation and the estimate-verification
//! studies: energy audit, stability of coupled solutions, Galerkin
//! convergence, stopping-time census and the Picard contraction factor.
//!
//! Suprema in time are maxima over the step grid, which bound the continuous
//! supremum from below.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::basis::GalerkinBasis;
use crate::dynamics::{SimError, SimState, System};
use crate::field::SpectralField;
use crate::noise::{NoiseKind, NoiseModel, WienerState};
use crate::params::FluidParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub v_norm: f64,
    pub w_tilde: f64,
    pub w24: f64,
    pub theta: f64,
    #[serde(rename = "tau_M_hit")]
    pub tau_m_hit: Option<f64>,
    pub energy_residual: f64,
    /// Norms of the stopped process `y(t ^ tau_M)`.
    pub frozen_v_norm: f64,
    pub frozen_w24: f64,
}

impl TrajectorySample {
    pub fn of(s: &SimState, energy_residual: f64) -> Self {
        let e = s.evaluation();
        let (fv, fw) = match (&s.frozen, s.frozen_w24) {
            (Some(f), Some(w)) => (f.v_norm(), w),
            _ => (s.y.v_norm(), e.w24),
        };
        Self {
            t: s.t,
            v_norm: s.y.v_norm(),
            w_tilde: libm::sqrt(s.y.w_tilde_sq()),
            w24: e.w24,
            theta: e.theta,
            tau_m_hit: s.tau_m_hit,
            energy_residual,
            frozen_v_norm: fv,
            frozen_w24: fw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupInfo {
    pub step: u64,
    pub t: f64,
}

/// Pathwise integrals and suprema. Integrals are stored without physical
/// prefactors so they can be re-weighted at aggregation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path: u64,
    pub seed: u64,
    pub steps: u64,
    pub t_end: f64,
    pub y0_v_sq: f64,
    pub sup_v_sq: f64,
    /// `int_0^T ||D y||_2^2 dt`
    pub int_dy_sq: f64,
    /// `int_0^T theta int |A|^4 dx dt`
    pub int_theta_a4: f64,
    /// `int_0^T ||U||_2^2 dt`
    pub int_u_l2_sq: f64,
    /// `int_0^T theta^2 sum_k ||(sigma_k, e_.)||^2 dt`
    pub int_ito: f64,
    /// `sup_t [||y(t)||_V^2 + 4 nu int_0^t ||Dy||^2 + beta/2 int_0^t theta int |A|^4]`
    pub sup_phi: f64,
    pub sup_w_tilde_sq: f64,
    pub sup_w_tilde_p: f64,
    pub max_w24: f64,
    pub max_abs_residual: f64,
    pub tau_m: Option<f64>,
    pub tau_n: Vec<(f64, Option<f64>)>,
    pub blowup: Option<BlowupInfo>,
    pub terminal_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub samples: Vec<TrajectorySample>,
    pub summary: PathSummary,
}

/// Sample mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanEstimate {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, stderr: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        Self { mean, stderr: libm::sqrt(var / n as f64) }
    }
}

/// One row of a report: an estimate, optionally with the bound it is held to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub name: String,
    pub value: f64,
    pub bound: Option<f64>,
    pub margin: Option<f64>,
    pub stderr: f64,
}

/// Constants of the energy inequality as implemented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallConstant {
    /// Young split of the grade-two term: `2 (a1 + a2)^2 / (beta a1)`.
    pub young: f64,
    /// Noise constant `L_eff` bounding the Ito correction and the martingale.
    pub noise: f64,
    /// `c0 = 1 + young + L_eff` (the 1 absorbs `2 (U, y) <= ||U||^2 + ||y||^2`).
    pub c0: f64,
    /// `c = 2 (c0 + 18 L_eff) + ln 4 / T`, from Burkholder-Davis-Gundy with
    /// constant 3 and Gronwall.
    pub c: f64,
}

impl GronwallConstant {
    pub fn new(params: &FluidParams, noise: &NoiseModel, t_end: f64) -> Self {
        let g2 = params.alpha1 + params.alpha2;
        let young = if g2 == 0.0 {
            0.0
        } else if params.beta > 0.0 {
            2.0 * g2 * g2 / (params.beta * params.alpha1)
        } else {
            f64::INFINITY
        };
        let l = noise.energy_lipschitz();
        let c0 = 1.0 + young + l;
        let c = 2.0 * (c0 + 18.0 * l) + libm::log(4.0) / t_end;
        Self { young, noise: l, c0, c }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub n_paths: usize,
    pub n_blowup: usize,
    pub t_end: f64,
    pub seed: u64,
    pub params: FluidParams,
    pub sup_v_sq: MeanEstimate,
    /// `4 nu E int ||Dy||^2`
    pub dissipation: MeanEstimate,
    /// `beta/2 E int theta int |A|^4`
    pub grade3: MeanEstimate,
    pub sup_w_tilde_sq: MeanEstimate,
    pub sup_w_tilde_p: MeanEstimate,
    pub y0_v_sq: MeanEstimate,
    pub int_u_l2_sq: MeanEstimate,
    /// Left side of the energy inequality, per-path sum of the three terms.
    pub lhs: MeanEstimate,
    pub sup_phi: MeanEstimate,
    /// `min over paths of ||y0||_V^2 - sup_t Phi(t)`.
    pub decay_margin: f64,
    /// Extra data term for state-independent noise: `19 T sum ||g_k||^2`.
    pub additive_data: f64,
    pub gronwall: GronwallConstant,
    pub rhs: f64,
    pub margin: f64,
    pub p_exponent: f64,
}

impl EnsembleReport {
    /// Aggregates path summaries. Paths are sorted by index first, so the
    /// result does not depend on completion order.
    pub fn aggregate(
        summaries: &[PathSummary],
        params: &FluidParams,
        noise: &NoiseModel,
        basis: &GalerkinBasis,
        t_end: f64,
        p_exponent: f64,
    ) -> Self {
        let mut s: Vec<&PathSummary> = summaries.iter().collect();
        s.sort_by_key(|p| p.path);
        let col = |f: &dyn Fn(&PathSummary) -> f64| -> Vec<f64> { s.iter().map(|p| f(p)).collect() };
        let dissipation = col(&|p| 4.0 * params.nu * p.int_dy_sq);
        let grade3 = col(&|p| 0.5 * params.beta * p.int_theta_a4);
        let sup_v = col(&|p| p.sup_v_sq);
        let lhs: Vec<f64> = (0..s.len()).map(|i| sup_v[i] + dissipation[i] + grade3[i]).collect();
        let y0 = MeanEstimate::of(&col(&|p| p.y0_v_sq));
        let u = MeanEstimate::of(&col(&|p| p.int_u_l2_sq));
        let additive_data = match &noise.kind {
            NoiseKind::Additive { fields } => {
                let q: f64 = fields.iter().map(|&(i, a)| { let g = a / basis.mode(i).v_factor; g * g }).sum();
                19.0 * q * t_end
            }
            _ => 0.0,
        };
        let gronwall = GronwallConstant::new(params, noise, t_end);
        let rhs = libm::exp(gronwall.c * t_end) * (y0.mean + u.mean + additive_data);
        let lhs = MeanEstimate::of(&lhs);
        let decay_margin = s.iter().map(|p| p.y0_v_sq - p.sup_phi).fold(f64::INFINITY, f64::min);
        Self {
            n_paths: s.len(),
            n_blowup: s.iter().filter(|p| p.blowup.is_some()).count(),
            t_end,
            seed: s.first().map(|p| p.seed).unwrap_or(0),
            params: *params,
            sup_v_sq: MeanEstimate::of(&sup_v),
            dissipation: MeanEstimate::of(&dissipation),
            grade3: MeanEstimate::of(&grade3),
            sup_w_tilde_sq: MeanEstimate::of(&col(&|p| p.sup_w_tilde_sq)),
            sup_w_tilde_p: MeanEstimate::of(&col(&|p| p.sup_w_tilde_p)),
            y0_v_sq: y0,
            int_u_l2_sq: u,
            lhs,
            sup_phi: MeanEstimate::of(&col(&|p| p.sup_phi)),
            decay_margin,
            additive_data,
            gronwall,
            rhs,
            margin: rhs - lhs.mean,
            p_exponent,
        }
    }

    pub fn rows(&self) -> Vec<EstimateRow> {
        let row = |name: &str, e: MeanEstimate, bound: Option<f64>| EstimateRow {
            name: name.into(),
            value: e.mean,
            bound,
            margin: bound.map(|b| b - e.mean),
            stderr: e.stderr,
        };
        vec![
            row("E_sup_v_sq", self.sup_v_sq, None),
            row("dissipation_4nu_E_int_Dy_sq", self.dissipation, None),
            row("grade3_half_beta_E_int_theta_A4", self.grade3, None),
            row("energy_lhs", self.lhs, Some(self.rhs)),
            row("E_sup_phi", self.sup_phi, None),
            row("E_sup_w_tilde_sq", self.sup_w_tilde_sq, None),
            row("E_sup_w_tilde_p", self.sup_w_tilde_p, None),
            row("E_y0_v_sq", self.y0_v_sq, None),
            row("E_int_U_l2_sq", self.int_u_l2_sq, None),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiagnosticError {
    #[error("estimate violated: {term} = {value} exceeds bound {bound} beyond 3 standard errors")]
    EstimateViolation { term: &'static str, value: f64, bound: f64 },
    #[error("stopping times not monotone on path {path}: tau({m_low}) = {t_low} > tau({m_high}) = {t_high}")]
    MonotonicityViolation { path: usize, m_low: f64, t_low: f64, m_high: f64, t_high: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub lhs: f64,
    pub stderr: f64,
    pub rhs: f64,
    pub margin: f64,
    pub c: f64,
}

/// Checks `E sup ||y||_V^2 + 4 nu E int ||Dy||^2 + beta/2 E int theta int |A|^4
/// <= e^{cT} (E ||y0||_V^2 + E int ||U||_2^2)` with a 3-sigma allowance.
pub fn energy_audit(r: &EnsembleReport) -> Result<AuditOutcome, DiagnosticError> {
    let out = AuditOutcome { lhs: r.lhs.mean, stderr: r.lhs.stderr, rhs: r.rhs, margin: r.margin, c: r.gronwall.c };
    if !(r.lhs.mean - 3.0 * r.lhs.stderr <= r.rhs) {
        return Err(DiagnosticError::EstimateViolation { term: "energy_lhs", value: r.lhs.mean, bound: r.rhs });
    }
    Ok(out)
}

/// Per-path result of a coupled pair of runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityPath {
    /// `sup_{t <= tau^1 ^ tau^2} ||y1 - y2||_V^2`
    pub sup_diff_sq: f64,
    /// `||y0^1 - y0^2||_V^2 + int ||U1 - U2||_2^2`
    pub data: f64,
    /// Largest one-step growth rate of `||y1 - y2||_V^2`.
    pub max_rate: f64,
    pub horizon: f64,
    pub identical: bool,
}

/// Runs two systems on the same Brownian path until either stops or `t_end`.
pub fn coupled_pair(
    a: &System,
    b: &System,
    y0a: SpectralField,
    y0b: SpectralField,
    wiener: WienerState,
    t_end: f64,
) -> Result<StabilityPath, SimError> {
    let steps = (libm::round(t_end / a.dt) as u64).max(1);
    let mut sa = a.init(y0a, wiener);
    let mut sb = b.init(y0b, wiener);
    let diff = |x: &SimState, y: &SimState| -> f64 {
        x.y.coeffs().iter().zip(y.y.coeffs()).map(|(p, q)| (p - q) * (p - q)).sum()
    };
    let mut d = diff(&sa, &sb);
    let mut data = d;
    let mut sup = d;
    let mut max_rate: f64 = 0.0;
    let mut identical = sa.y.coeffs() == sb.y.coeffs();
    let mut u_a = vec![0.0; a.basis.len()];
    let mut u_b = vec![0.0; b.basis.len()];
    let mut horizon = 0.0;
    for _ in 0..steps {
        if sa.tau_m_hit.is_some() || sb.tau_m_hit.is_some() {
            break;
        }
        a.forcing.fill(sa.t, &mut u_a);
        b.forcing.fill(sb.t, &mut u_b);
        let du: f64 = u_a
            .iter()
            .zip(&u_b)
            .zip(a.basis.modes())
            .map(|((p, q), m)| (p - q) * (p - q) / m.v_factor)
            .sum();
        data += a.dt * du;
        a.step(&mut sa)?;
        b.step(&mut sb)?;
        let dn = diff(&sa, &sb);
        if d > 0.0 && dn > 0.0 {
            max_rate = max_rate.max(libm::log(dn / d) / a.dt);
        }
        d = dn;
        sup = sup.max(d);
        identical &= sa.y.coeffs() == sb.y.coeffs();
        horizon = sa.t;
    }
    Ok(StabilityPath { sup_diff_sq: sup, data, max_rate, horizon, identical })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub mean_sup_diff_sq: MeanEstimate,
    pub mean_data: f64,
    /// Empirical `M0` so that `e^{M0 (2M+1) T}` covers the observed growth.
    pub m0: f64,
    pub bound: f64,
    pub within_bound: bool,
}

pub fn stability_report(paths: &[StabilityPath], m_level: f64, t_end: f64) -> StabilityReport {
    let sups: Vec<f64> = paths.iter().map(|p| p.sup_diff_sq).collect();
    let mean = MeanEstimate::of(&sups);
    let mean_data = paths.iter().map(|p| p.data).sum::<f64>() / paths.len().max(1) as f64;
    let rate = paths.iter().map(|p| p.max_rate).fold(0.0, f64::max);
    let m0 = rate / (2.0 * m_level + 1.0);
    let bound = libm::exp(m0 * (2.0 * m_level + 1.0) * t_end) * mean_data;
    StabilityReport { mean_sup_diff_sq: mean, mean_data, m0, bound, within_bound: mean.mean <= bound * (1.0 + 1e-12) }
}

/// Coefficients of `from`-basis data re-indexed into `to` by mode label;
/// modes absent from `from` get zero.
pub fn embed(from: &GalerkinBasis, to: &GalerkinBasis, c: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; to.len()];
    for (m, &v) in from.modes().iter().zip(c) {
        if let Some(j) = to.find(m.label) {
            out[j] = v;
        }
    }
    out
}

/// `sup_t ||y_n - y_ref||_V` along two stored step paths.
pub fn sup_embedded_error(small: &GalerkinBasis, reference: &GalerkinBasis, a: &[Vec<f64>], r: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(r)
        .map(|(x, y)| {
            let e = embed(small, reference, x);
            libm::sqrt(e.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
        })
        .fold(0.0, f64::max)
}

/// Stopping times per path (rows) and ladder level (columns); `None` means
/// the level was not reached before `t_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupCensus {
    pub ladder: Vec<f64>,
    pub t_end: f64,
    pub taus: Vec<Vec<Option<f64>>>,
    /// Histogram of `tau_M ^ T` per level over `bins` equal bins of `[0, T]`.
    pub histogram: Vec<Vec<usize>>,
    pub max_w24: Vec<f64>,
}

impl BlowupCensus {
    pub fn new(ladder: Vec<f64>, t_end: f64, taus: Vec<Vec<Option<f64>>>, max_w24: Vec<f64>, bins: usize) -> Self {
        let bins = bins.max(1);
        let histogram = (0..ladder.len())
            .map(|j| {
                let mut h = vec![0usize; bins];
                for row in &taus {
                    let t = row[j].unwrap_or(t_end);
                    let b = ((t / t_end) * bins as f64) as usize;
                    h[b.min(bins - 1)] += 1;
                }
                h
            })
            .collect();
        Self { ladder, t_end, taus, histogram, max_w24 }
    }

    /// Checks `tau_{M1} <= tau_{M2}` on every path for `M1 <= M2`.
    pub fn verify_monotone(&self) -> Result<(), DiagnosticError> {
        let mut order: Vec<usize> = (0..self.ladder.len()).collect();
        order.sort_by(|&a, &b| self.ladder[a].partial_cmp(&self.ladder[b]).unwrap());
        for (p, row) in self.taus.iter().enumerate() {
            for w in order.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                let tl = row[lo].unwrap_or(self.t_end);
                let th = row[hi].unwrap_or(self.t_end);
                if tl > th {
                    return Err(DiagnosticError::MonotonicityViolation {
                        path: p,
                        m_low: self.ladder[lo],
                        t_low: tl,
                        m_high: self.ladder[hi],
                        t_high: th,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Numerator and denominator of the empirical Picard contraction factor on
/// one path: `sup ||S u1 - S u2||_V^2` and `sup ||u1 - u2||_V^2` for the
/// constant trajectories `u1 = y0`, `u2 = y0 + dz`.
pub fn contraction_path(sys: &System, y0: &[f64], dz: &[f64], steps: usize, wiener: &WienerState) -> (f64, f64) {
    let u1 = vec![y0.to_vec(); steps + 1];
    let shifted: Vec<f64> = y0.iter().zip(dz).map(|(a, b)| a + b).collect();
    let u2 = vec![shifted; steps + 1];
    let s1 = sys.picard_map(y0, &u1, wiener);
    let s2 = sys.picard_map(y0, &u2, wiener);
    let num = s1
        .iter()
        .zip(&s2)
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
        .fold(0.0, f64::max);
    let den = dz.iter().map(|v| v * v).sum();
    (num, den)
}

/// Iterates the Picard map from the constant trajectory `y0` and returns the
/// sup-in-time V distance to the stepper trajectory after each iteration.
pub fn picard_iteration(
    sys: &System,
    y0: &SpectralField,
    wiener: WienerState,
    steps: usize,
    iterations: usize,
) -> Result<Vec<f64>, SimError> {
    let mut s = sys.init(y0.clone(), wiener);
    let mut reference = vec![y0.coeffs().to_vec()];
    for _ in 0..steps {
        sys.step(&mut s)?;
        reference.push(s.y.coeffs().to_vec());
    }
    let mut u = vec![y0.coeffs().to_vec(); steps + 1];
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        u = sys.picard_map(y0.coeffs(), &u, &wiener);
        let r = u
            .iter()
            .zip(&reference)
            .map(|(a, b)| libm::sqrt(a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()))
            .fold(0.0, f64::max);
        out.push(r);
    }
    Ok(out)
}

/// Basis shared by several studies; kept here so callers need not thread
/// `Arc` construction through.
pub fn shared(basis: GalerkinBasis) -> Arc<GalerkinBasis> {
    Arc::new(basis)
}
