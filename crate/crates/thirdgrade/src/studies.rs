//! Verification studies driven from a [`Config`]: operator residuals,
//! Galerkin convergence, linear response of coupled solutions, the Picard
//! contraction factor and the stopping-time census.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thirdgrade_core::basis::{DomainKind, DomainSpec, GalerkinBasis};
use thirdgrade_core::diagnostics::{
    contraction_path, coupled_pair, embed, picard_iteration, stability_report, sup_embedded_error, BlowupCensus,
    MeanEstimate, StabilityReport,
};
use thirdgrade_core::dynamics::{CutoffFn, CutoffMode, Forcing, Integrator, RunOptions, SimError, System};
use thirdgrade_core::field::{PhysicalField, SpectralField};
use thirdgrade_core::noise::{NoiseKind, NoiseModel, WienerState};
use thirdgrade_core::operators::{
    assemble_rhs, div_a2, div_a2a, div_s, energy_terms, pair_with, stokes_inverse, trilinear_b, v_map,
    variational_residual,
};
use thirdgrade_core::rng;

use crate::config::Config;

/// Random coefficients with spectral decay `(1 + mu)^(-decay)`.
pub fn random_field(b: &Arc<GalerkinBasis>, seed: u64, scale: f64, decay: f64) -> SpectralField {
    let c = b
        .modes()
        .iter()
        .enumerate()
        .map(|(i, m)| scale * rng::normal(seed, 0x5eed, i as u64, 1) / (1.0 + m.mu).powf(decay))
        .collect();
    SpectralField::from_coeffs(b.clone(), c).expect("finite")
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(name: &'static str, residual: f64, tolerance: f64) -> Self {
        Self { name, residual, tolerance, pass: residual < tolerance }
    }
}

fn max_rel(got: &PhysicalField, want: &PhysicalField) -> f64 {
    let num = got
        .components
        .iter()
        .flatten()
        .zip(want.components.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    num / want.max_abs().max(1e-300)
}

/// Residual table of the operator identities on the configured torus
/// truncation (`trials` random fields per randomized row).
pub fn check_operators(cfg: &Config, trials: usize) -> Vec<CheckRow> {
    let n = cfg.run.n_modes.max(2);
    let a1 = cfg.fluid.alpha1;
    let p = cfg.fluid;
    let seed = cfg.run.seed;
    let b = Arc::new(GalerkinBasis::build(
        DomainSpec::for_truncation(DomainKind::Torus, n, cfg.run.dealias_factor, cfg.run.quadrature_oversample),
        a1,
        n,
    ));
    let mut rows = Vec::new();

    // y = (0, cos x1)
    let i = b.find([1, 0]).expect("mode (1,0)");
    let mut y = SpectralField::zeros(b.clone());
    y.coeffs_mut()[i] = (b.mode(i).v_factor * 2.0 * PI * PI).sqrt();
    let sample = |f: &dyn Fn(f64, f64) -> [f64; 2]| {
        PhysicalField::sample(&b, 2, |x, z, o| {
            let v = f(x, z);
            o.copy_from_slice(&v);
        })
    };
    let e2 = sample(&|x, _| [(2.0 * x).sin(), 0.0]);
    let e3 = sample(&|x, _| [0.0, -6.0 * x.sin().powi(2) * x.cos()]);
    rows.push(CheckRow::new("div(A^2) manufactured", max_rel(&div_a2(&y), &e2), 1e-10));
    rows.push(CheckRow::new("div(|A|^2 A) manufactured", max_rel(&div_a2a(&y), &e3), 1e-10));

    let field = |s: u64| random_field(&b, seed.wrapping_add(s), 1.0, 0.4);
    let (mut anti, mut skew, mut diss, mut mono, mut j1) = (0.0f64, 0.0f64, 0.0f64, f64::NEG_INFINITY, 0.0f64);
    let cut = cfg.cutoff_mode();
    for t in 0..trials as u64 {
        let (y, z, phi) = (field(3 * t), field(3 * t + 1), field(3 * t + 2));
        anti = anti.max(trilinear_b(&y, &z, &z).abs());
        skew = skew.max((trilinear_b(&y, &z, &phi) + trilinear_b(&y, &phi, &z)).abs());
        let e = energy_terms(&y);
        diss = diss.max((pair_with(&div_a2a(&y), &y) + 0.5 * e.a4).abs() / e.a4.max(1e-300));
        let d = y.axpy(-1.0, &z);
        let mut ds = div_s(&y, p.beta);
        for (a, c) in ds.components.iter_mut().flatten().zip(div_s(&z, p.beta).components.iter().flatten()) {
            *a -= c;
        }
        mono = mono.max(pair_with(&ds, &d));
        let r = assemble_rhs(&y, Some(&phi), &p, &cut).expect("finite drift");
        let lhs = 2.0 * r.total().iter().zip(y.coeffs()).map(|(f, c)| f * c).sum::<f64>();
        let rhs = -4.0 * p.nu * e.dy_sq - 2.0 * (p.alpha1 + p.alpha2) * r.theta * e.a2_grad - p.beta * r.theta * e.a4
            + 2.0 * phi.inner_l2(&y);
        let scale = 4.0 * p.nu * e.dy_sq + p.beta * r.theta * e.a4 + 2.0 * phi.inner_l2(&y).abs() + 1e-300;
        j1 = j1.max((lhs - rhs).abs() / scale);
    }
    rows.push(CheckRow::new("|b(y,z,z)|", anti, 1e-10));
    rows.push(CheckRow::new("|b(y,z,phi)+b(y,phi,z)|", skew, 1e-10));
    rows.push(CheckRow::new("grade-3 dissipation identity (rel)", diss, 1e-8));
    rows.push(CheckRow::new("monotonicity of div S (max pairing)", mono.max(0.0), 1e-10));
    rows.push(CheckRow::new("energy identity of the drift (rel)", j1, 1e-8));

    let (mut inv, mut var) = (0.0f64, 0.0f64);
    for t in 0..trials.min(20) as u64 {
        let y = field(1000 + t);
        let back = stokes_inverse(&b, &v_map(&y).synthesize()).expect("grid");
        inv = inv.max(y.coeffs().iter().zip(back.coeffs()).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max));
        let s = t as f64;
        let f = PhysicalField::sample(&b, 2, |x, z, o| {
            o[0] = (x + s).sin() * (2.0 * z).cos() + 0.3 * (3.0 * x - z).cos();
            o[1] = (x - 2.0 * z + s).sin();
        });
        let h = stokes_inverse(&b, &f).expect("grid");
        var = var.max(variational_residual(&h, &f).expect("grid").iter().fold(0.0, |m, r| m.max(r.abs())));
    }
    rows.push(CheckRow::new("stokes_inverse(v_map(y)) - y", inv, 1e-12));
    rows.push(CheckRow::new("variational residual", var, 1e-10));
    rows
}

fn level_basis(cfg: &Config, n: usize) -> Arc<GalerkinBasis> {
    Arc::new(GalerkinBasis::build(
        DomainSpec::for_truncation(cfg.run.domain, n, cfg.run.dealias_factor, cfg.run.quadrature_oversample),
        cfg.fluid.alpha1,
        n,
    ))
}

/// The configured system moved to another truncation: forcing and additive
/// noise fields are carried over by mode label.
pub fn system_at(cfg: &Config, from: &GalerkinBasis, to: &Arc<GalerkinBasis>) -> System {
    let mut sys = System::new(to.clone(), cfg.fluid, cfg.cutoff_mode(), cfg.noise_model(), cfg.run.dt);
    if let NoiseKind::Additive { fields } = &sys.noise.kind {
        let moved = fields
            .iter()
            .filter_map(|&(i, a)| to.find(from.mode(i).label).map(|j| (j, a)))
            .collect();
        sys.noise = NoiseModel::additive(moved);
    }
    if !cfg.forcing.is_empty() {
        let mut u = vec![0.0; from.len()];
        for &(i, a) in &cfg.forcing {
            u[i] += a;
        }
        sys = sys.with_forcing(Forcing::Constant(embed(from, to, &u)));
    }
    sys
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub sup_error: MeanEstimate,
}

/// `E sup_t ||y_n - y_ref||_V` for each `n` of the ladder against the
/// reference truncation `2 max(ladder)`, on coupled Brownian paths.
pub fn galerkin_convergence(cfg: &Config, ladder: &[usize], paths: usize) -> Result<Vec<ConvergenceRow>, SimError> {
    let home = cfg.basis();
    let y0 = cfg.initial_field(&home);
    let n_ref = 2 * ladder.iter().copied().max().unwrap_or(1);
    let rb = level_basis(cfg, n_ref);
    let rsys = system_at(cfg, &home, &rb);
    let levels: Vec<(usize, Arc<GalerkinBasis>, System)> = ladder
        .iter()
        .map(|&n| {
            let b = level_basis(cfg, n);
            let s = system_at(cfg, &home, &b);
            (n, b, s)
        })
        .collect();
    let mut opts = RunOptions::new(cfg.run.t_end);
    opts.keep_path = true;
    opts.sample_stride = usize::MAX;
    let per_path: Vec<Vec<f64>> = (0..paths as u64)
        .into_par_iter()
        .map(|p| -> Result<Vec<f64>, SimError> {
            let w = WienerState::new(cfg.run.seed, p, cfg.run.dt);
            let start = |b: &Arc<GalerkinBasis>| SpectralField::from_coeffs(b.clone(), embed(&home, b, y0.coeffs())).expect("finite");
            let r = Integrator::new(&rsys, opts.clone()).run(start(&rb), w)?;
            levels
                .iter()
                .map(|(_, b, s)| {
                    let o = Integrator::new(s, opts.clone()).run(start(b), w)?;
                    Ok(sup_embedded_error(b, &rb, &o.path, &r.path))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok(levels
        .iter()
        .enumerate()
        .map(|(j, (n, _, _))| ConvergenceRow { n: *n, sup_error: MeanEstimate::of(&per_path.iter().map(|r| r[j]).collect::<Vec<_>>()) })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ResponseRow {
    pub eps: f64,
    /// Mean over paths of `sup ||y1 - y2||_V / eps`.
    pub ratio: MeanEstimate,
    pub report: StabilityReport,
    pub identical_at_zero: bool,
}

/// Coupled runs started `eps` apart (in V) along a fixed random direction.
pub fn linear_response(cfg: &Config, eps: &[f64], paths: usize) -> Result<Vec<ResponseRow>, SimError> {
    let b = cfg.basis();
    let sys = cfg.system(&b);
    let y0 = cfg.initial_field(&b);
    let dir = random_field(&b, cfg.run.seed ^ 0xd1, 1.0, 0.5);
    let dir = dir.scaled(1.0 / dir.v_norm());
    let m_level = cfg.cutoff.m;
    let mut rows = Vec::new();
    for &e in eps {
        let res: Vec<_> = (0..paths as u64)
            .into_par_iter()
            .map(|p| {
                let w = WienerState::new(cfg.run.seed, p, cfg.run.dt);
                let same = coupled_pair(&sys, &sys, y0.clone(), y0.clone(), w, cfg.run.t_end)?;
                let pair = coupled_pair(&sys, &sys, y0.clone(), y0.axpy(e, &dir), w, cfg.run.t_end)?;
                Ok((same.identical && same.sup_diff_sq == 0.0, pair))
            })
            .collect::<Result<Vec<_>, SimError>>()?;
        let ratios: Vec<f64> = res.iter().map(|(_, p)| p.sup_diff_sq.sqrt() / e).collect();
        let sp: Vec<_> = res.iter().map(|(_, p)| *p).collect();
        rows.push(ResponseRow {
            eps: e,
            ratio: MeanEstimate::of(&ratios),
            report: stability_report(&sp, m_level, cfg.run.t_end),
            identical_at_zero: res.iter().all(|(s, _)| *s),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionRow {
    pub t_star: f64,
    /// `E sup ||S u1 - S u2||_V^2 / E sup ||u1 - u2||_V^2`
    pub factor: f64,
}

/// Empirical contraction factor of the Picard map on `[0, T*]` for each
/// horizon, with `steps` steps per horizon and a perturbation of size `dz`
/// along the first mode.
pub fn contraction(cfg: &Config, horizons: &[f64], steps: usize, dz: f64, paths: usize) -> Vec<ContractionRow> {
    let b = cfg.basis();
    let y0 = cfg.initial_field(&b);
    let mut d = vec![0.0; b.len()];
    d[0] = dz;
    horizons
        .iter()
        .map(|&t| {
            let mut sys = cfg.system(&b);
            sys.dt = t / steps as f64;
            let (num, den) = (0..paths as u64)
                .into_par_iter()
                .map(|p| contraction_path(&sys, y0.coeffs(), &d, steps, &WienerState::new(cfg.run.seed, p, sys.dt)))
                .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
            ContractionRow { t_star: t, factor: num / den }
        })
        .collect()
}

/// Sup-in-time V distance to the stepper trajectory after each Picard
/// iteration started from the constant trajectory `y0` (path 0).
pub fn picard_residuals(cfg: &Config, steps: usize, iterations: usize) -> Result<Vec<f64>, SimError> {
    let b = cfg.basis();
    let sys = cfg.system(&b);
    let y0 = cfg.initial_field(&b);
    picard_iteration(&sys, &y0, WienerState::new(cfg.run.seed, 0, cfg.run.dt), steps, iterations)
}

/// Stopping times `tau_M` for a ladder of cut-off levels on coupled paths.
/// Level `M` runs its own cut-off system (threshold and stop level `M`).
pub fn blowup_census(cfg: &Config, ladder: &[f64], paths: usize, bins: usize) -> Result<BlowupCensus, SimError> {
    let b = cfg.basis();
    let y0 = cfg.initial_field(&b);
    let systems: Vec<System> = ladder
        .iter()
        .map(|&m| {
            let mut s = cfg.system(&b);
            s.cutoff = CutoffMode::Smooth(CutoffFn::new(m).expect("positive level"));
            s.stop_level = Some(m);
            s
        })
        .collect();
    let mut opts = RunOptions::new(cfg.run.t_end);
    opts.sample_stride = usize::MAX;
    let rows: Vec<(Vec<Option<f64>>, f64)> = (0..paths as u64)
        .into_par_iter()
        .map(|p| {
            let w = WienerState::new(cfg.run.seed, p, cfg.run.dt);
            let mut taus = Vec::new();
            let mut peak: f64 = 0.0;
            for s in &systems {
                let o = Integrator::new(s, opts.clone()).run(y0.clone(), w)?;
                taus.push(o.record.summary.tau_m);
                peak = peak.max(o.record.summary.max_w24);
            }
            Ok((taus, peak))
        })
        .collect::<Result<_, SimError>>()?;
    let (taus, peaks) = rows.into_iter().unzip();
    Ok(BlowupCensus::new(ladder.to_vec(), cfg.run.t_end, taus, peaks, bins))
}
