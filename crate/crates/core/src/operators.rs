//! Right-hand side of the Galerkin system: the v-map and its inverse, the
//! trilinear form, the grade-two and grade-three divergences, the stability
//! tensors, and drift assembly as L2 pairings against the basis.
//!
//! Pressure never appears. Every test field is divergence-free with zero
//! normal trace, so gradients pair to zero and the variational identity
//! `(v(h), z) = (h, z)_V` carries the whole modified Stokes problem.
//!
//! Pointwise fields are built from exact spectral derivatives with the product
//! rule. The cubic terms then live in the band `3n` and their pairing with a
//! basis field in the band `4n`, which the transform grid integrates exactly.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::basis::GalerkinBasis;
use crate::dynamics::CutoffMode;
use crate::field::{hidx, pair, FieldError, Kinematics, PhysicalField, SpectralField};
use crate::params::FluidParams;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OperatorError {
    #[error("numerical blowup: non-finite drift component {0}")]
    NumericalBlowup(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Coefficient vectors of L2 pairings `(term, e_i)`. The nonlinear parts
/// already include the cut-off factor and their physical prefactors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhsBreakdown {
    pub theta: f64,
    pub w24: f64,
    pub viscous: Vec<f64>,
    pub transport: Vec<f64>,
    pub vortex_stretch: Vec<f64>,
    pub grade2: Vec<f64>,
    pub grade3: Vec<f64>,
    pub forcing: Vec<f64>,
}

impl RhsBreakdown {
    pub fn total(&self) -> Vec<f64> {
        (0..self.viscous.len())
            .map(|i| {
                self.viscous[i] + self.transport[i] + self.vortex_stretch[i] + self.grade2[i] + self.grade3[i] + self.forcing[i]
            })
            .collect()
    }
}

/// Integrals entering the energy balance of a state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyTerms {
    /// `||D y||_2^2`
    pub dy_sq: f64,
    /// `(A^2, grad y)`
    pub a2_grad: f64,
    /// `int |A|^4`
    pub a4: f64,
}

/// Pointwise nonlinear terms at one grid point:
/// `(y . grad) v`, `sum_j v_j grad y_j`, `div(A^2)`, `div(|A|^2 A)`.
#[inline]
pub(crate) fn pointwise(k: &Kinematics, a1: f64, p: usize) -> [[f64; 2]; 4] {
    let y = [k.y[0][p], k.y[1][p]];
    let mut v = [0.0; 2];
    let mut dv = [[0.0; 2]; 2];
    for i in 0..2 {
        v[i] = y[i] - a1 * (k.h[i][hidx(0, 0)][p] + k.h[i][hidx(1, 1)][p]);
        for j in 0..2 {
            dv[i][j] = k.g[i][j][p] - a1 * k.gl[i][j][p];
        }
    }
    let a = k.a(p);
    let da = k.da(p);
    let mut a_sq = 0.0;
    let mut d_a_sq = [0.0; 2];
    for i in 0..2 {
        for j in 0..2 {
            a_sq += a[i][j] * a[i][j];
            for (kk, d) in d_a_sq.iter_mut().enumerate() {
                *d += 2.0 * a[i][j] * da[kk][i][j];
            }
        }
    }
    let mut out = [[0.0; 2]; 4];
    for i in 0..2 {
        let mut tr = 0.0;
        let mut vs = 0.0;
        let mut g2 = 0.0;
        let mut g3 = 0.0;
        for j in 0..2 {
            tr += y[j] * dv[i][j];
            vs += v[j] * k.g[j][i][p];
            for l in 0..2 {
                g2 += da[j][i][l] * a[l][j] + a[i][l] * da[j][l][j];
            }
            g3 += d_a_sq[j] * a[i][j] + a_sq * da[j][i][j];
        }
        out[0][i] = tr;
        out[1][i] = vs;
        out[2][i] = g2;
        out[3][i] = g3;
    }
    out
}

/// Pointwise energy densities `(|D y|^2, A^2 : grad y, |A|^4)`.
#[inline]
pub(crate) fn energy_density(k: &Kinematics, p: usize) -> [f64; 3] {
    let a = k.a(p);
    let mut a_sq = 0.0;
    let mut a2g = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            a_sq += a[i][j] * a[i][j];
            let a2_ij = a[i][0] * a[0][j] + a[i][1] * a[1][j];
            a2g += a2_ij * k.g[i][j][p];
        }
    }
    [0.25 * a_sq, a2g, a_sq * a_sq]
}

pub fn energy_terms(y: &SpectralField) -> EnergyTerms {
    energy_terms_of(&Kinematics::new(y), y.basis().cell())
}

pub(crate) fn energy_terms_of(k: &Kinematics, cell: f64) -> EnergyTerms {
    let mut s = [0.0; 3];
    for p in 0..k.len() {
        let e = energy_density(k, p);
        for (a, b) in s.iter_mut().zip(e) {
            *a += b;
        }
    }
    EnergyTerms { dy_sq: s[0] * cell, a2_grad: s[1] * cell, a4: s[2] * cell }
}

/// `v(y) = y - alpha1 lap y`; diagonal in the basis.
pub fn v_map(y: &SpectralField) -> SpectralField {
    let c = y.coeffs().iter().zip(y.basis().modes()).map(|(c, m)| c * m.v_factor).collect();
    SpectralField::from_coeffs(y.basis().clone(), c).expect("finite input")
}

/// Solves `h - alpha1 lap h + grad p = f` on the basis span: `h_i = (f, e_i)`
/// in V-coefficients, i.e. L2 pairing followed by division by `1 + alpha1 mu_i`
/// in the L2 normalization.
pub fn stokes_inverse(basis: &alloc::sync::Arc<GalerkinBasis>, f: &PhysicalField) -> Result<SpectralField, FieldError> {
    let h = pair(basis, f)?;
    SpectralField::from_coeffs(basis.clone(), h)
}

/// `stokes_inverse` for a right-hand side already in the basis span.
pub fn stokes_inverse_spectral(f: &SpectralField) -> SpectralField {
    SpectralField::from_coeffs(f.basis().clone(), f.l2_pairings()).expect("finite input")
}

/// Residual `(v(h), e_i) - (f, e_i)` of the variational form.
pub fn variational_residual(h: &SpectralField, f: &PhysicalField) -> Result<Vec<f64>, FieldError> {
    let basis = h.basis();
    let vh = v_map(h);
    let lhs = pair(basis, &vh.synthesize())?;
    let rhs = pair(basis, f)?;
    Ok(lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect())
}

/// `b(y, z, phi) = ((y . grad) z, phi)` by quadrature.
pub fn trilinear_b(y: &SpectralField, z: &SpectralField, phi: &SpectralField) -> f64 {
    let yy = y.synthesize();
    let gz = z.grad();
    let pp = phi.synthesize();
    let mut acc = 0.0;
    for p in 0..yy.components[0].len() {
        for i in 0..2 {
            let conv = yy.components[0][p] * gz.components[2 * i][p] + yy.components[1][p] * gz.components[2 * i + 1][p];
            acc += conv * pp.components[i][p];
        }
    }
    acc * y.basis().cell()
}

fn pointwise_field(y: &SpectralField, which: usize) -> PhysicalField {
    let k = Kinematics::new(y);
    let a1 = y.basis().alpha1();
    let mut out = PhysicalField::zeros(k.points, 2);
    for p in 0..k.len() {
        let t = pointwise(&k, a1, p);
        out.components[0][p] = t[which][0];
        out.components[1][p] = t[which][1];
    }
    out
}

/// `(y . grad) v(y)` on the grid.
pub fn transport(y: &SpectralField) -> PhysicalField {
    pointwise_field(y, 0)
}

/// `sum_j v(y)_j grad y_j` on the grid.
pub fn vortex_stretch(y: &SpectralField) -> PhysicalField {
    pointwise_field(y, 1)
}

/// `div(A^2)` on the grid.
pub fn div_a2(y: &SpectralField) -> PhysicalField {
    pointwise_field(y, 2)
}

/// `div(|A|^2 A)` on the grid.
pub fn div_a2a(y: &SpectralField) -> PhysicalField {
    pointwise_field(y, 3)
}

/// `S(y) = beta |A|^2 A`, row-major tensor.
pub fn s_of(y: &SpectralField, beta: f64) -> PhysicalField {
    let k = Kinematics::new(y);
    let mut out = PhysicalField::zeros(k.points, 4);
    for p in 0..k.len() {
        let a = k.a(p);
        let a_sq: f64 = a.iter().flatten().map(|v| v * v).sum();
        for i in 0..2 {
            for j in 0..2 {
                out.components[2 * i + j][p] = beta * a_sq * a[i][j];
            }
        }
    }
    out
}

/// `N(y) = alpha1 (y . grad A + (grad y)^T A + A grad y) + alpha2 A^2`
/// with `(grad y)_ij = d_j y_i`.
pub fn n_of(y: &SpectralField, params: &FluidParams) -> PhysicalField {
    let k = Kinematics::new(y);
    let mut out = PhysicalField::zeros(k.points, 4);
    for p in 0..k.len() {
        let a = k.a(p);
        let da = k.da(p);
        let g = |i: usize, j: usize| k.g[i][j][p];
        for i in 0..2 {
            for j in 0..2 {
                let adv = k.y[0][p] * da[0][i][j] + k.y[1][p] * da[1][i][j];
                let mut gta = 0.0;
                let mut ag = 0.0;
                let mut a2 = 0.0;
                for l in 0..2 {
                    gta += g(l, i) * a[l][j];
                    ag += a[i][l] * g(l, j);
                    a2 += a[i][l] * a[l][j];
                }
                out.components[2 * i + j][p] = params.alpha1 * (adv + gta + ag) + params.alpha2 * a2;
            }
        }
    }
    out
}

/// Pointwise divergence of a row-major tensor built as `S(y)`: returns
/// `beta div(|A|^2 A)` through the exact product rule.
pub fn div_s(y: &SpectralField, beta: f64) -> PhysicalField {
    let mut f = div_a2a(y);
    for c in &mut f.components {
        for v in c.iter_mut() {
            *v *= beta;
        }
    }
    f
}

/// Quadrature of `(F, z)` for a sampled vector field `F`.
pub fn pair_with(f: &PhysicalField, z: &SpectralField) -> f64 {
    let zz = z.synthesize();
    let mut acc = 0.0;
    for i in 0..2 {
        acc += f.components[i].iter().zip(&zz.components[i]).map(|(a, b)| a * b).sum::<f64>();
    }
    acc * z.basis().cell()
}

/// Cut-off nonlinear drift and energy terms of one state, shared by the
/// stepper and the diagnostics so the grid work happens once per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub w24: f64,
    pub theta: f64,
    /// `theta (-(y.grad)v - sum v_j grad y_j + (a1+a2) div A^2 + beta div |A|^2 A, e_i)`
    pub nonlinear: Vec<f64>,
    pub energy: EnergyTerms,
}

pub fn evaluate(basis: &GalerkinBasis, params: &FluidParams, cutoff: &CutoffMode, coeffs: &[f64]) -> Evaluation {
    let k = Kinematics::from_coeffs(basis, coeffs);
    let cell = basis.cell();
    let w24 = k.w24(cell);
    let theta = cutoff.theta(w24);
    let energy = energy_terms_of(&k, cell);
    let mut nonlinear = vec![0.0; basis.len()];
    if theta != 0.0 {
        let g2 = params.alpha1 + params.alpha2;
        let mut f = PhysicalField::zeros(k.points, 2);
        for p in 0..k.len() {
            let t = pointwise(&k, params.alpha1, p);
            for i in 0..2 {
                f.components[i][p] = theta * (-t[0][i] - t[1][i] + g2 * t[2][i] + params.beta * t[3][i]);
            }
        }
        nonlinear = pair(basis, &f).expect("grid matches basis");
    }
    Evaluation { w24, theta, nonlinear, energy }
}

/// `(nu lap y, e_i)` in V-coefficients: `-nu mu_i c_i / (1 + alpha1 mu_i)`.
pub fn viscous_pairings(y: &SpectralField, nu: f64) -> Vec<f64> {
    y.coeffs().iter().zip(y.basis().modes()).map(|(c, m)| -nu * m.mu * c / m.v_factor).collect()
}

/// Full drift `(f_n, e_i)` split into its six parts. `forcing` holds the
/// V-coefficients of `U`.
pub fn assemble_rhs(
    y: &SpectralField,
    forcing: Option<&SpectralField>,
    params: &FluidParams,
    cutoff: &CutoffMode,
) -> Result<RhsBreakdown, OperatorError> {
    let basis = y.basis();
    let k = Kinematics::new(y);
    let w24 = k.w24(basis.cell());
    let theta = cutoff.theta(w24);
    let mut parts = vec![PhysicalField::zeros(k.points, 2); 4];
    let g2 = params.alpha1 + params.alpha2;
    let scale = [-theta, -theta, g2 * theta, params.beta * theta];
    for p in 0..k.len() {
        let t = pointwise(&k, params.alpha1, p);
        for (q, part) in parts.iter_mut().enumerate() {
            for i in 0..2 {
                part.components[i][p] = scale[q] * t[q][i];
            }
        }
    }
    let mut paired = Vec::with_capacity(4);
    for part in &parts {
        paired.push(pair(basis, part)?);
    }
    let forcing = match forcing {
        Some(u) => u.l2_pairings(),
        None => vec![0.0; basis.len()],
    };
    let mut it = paired.into_iter();
    let out = RhsBreakdown {
        theta,
        w24,
        viscous: viscous_pairings(y, params.nu),
        transport: it.next().unwrap(),
        vortex_stretch: it.next().unwrap(),
        grade2: it.next().unwrap(),
        grade3: it.next().unwrap(),
        forcing,
    };
    if let Some(i) = out.total().iter().position(|v| !v.is_finite()) {
        return Err(OperatorError::NumericalBlowup(i));
    }
    Ok(out)
}
