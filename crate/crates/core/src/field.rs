//! Spectral and grid representations of velocity fields, spectral calculus,
//! and the norms used throughout.
//!
//! Coefficients are stored in the V-orthonormal convention: `y = sum c_i e_i`
//! with `(e_i, e_j)_V = delta_ij`. Hence `||y||_V^2 = sum c_i^2`,
//! `(y, e_i) = c_i / (1 + alpha1 mu_i)` and `||y||_Wt^2 = sum lambda_i c_i^2`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::GalerkinBasis;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("grid mismatch: field has {found} points per side, basis grid has {expected}")]
    GridMismatch { expected: usize, found: usize },
    #[error("coefficient count {found} does not match basis size {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite coefficient at index {0}")]
    NonFinite(usize),
}

/// Velocity field as V-coefficients over a shared basis.
#[derive(Debug, Clone)]
pub struct SpectralField {
    basis: Arc<GalerkinBasis>,
    coeffs: Vec<f64>,
}

/// Samples on the transform grid, one vector per component
/// (2 for vectors, 4 for row-major tensors, 1 for scalars).
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    pub points: usize,
    pub components: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub l2: f64,
    pub v_norm: f64,
    pub w_tilde: f64,
    pub w24: f64,
}

impl PhysicalField {
    pub fn zeros(points: usize, ncomp: usize) -> Self {
        Self { points, components: vec![vec![0.0; points * points]; ncomp] }
    }

    /// Samples `f(x1, x2)` at every grid node of `basis`.
    pub fn sample(basis: &GalerkinBasis, ncomp: usize, f: impl Fn(f64, f64, &mut [f64])) -> Self {
        let g = basis.grid();
        let n = g.points();
        let mut out = Self::zeros(n, ncomp);
        let mut buf = vec![0.0; ncomp];
        for l in 0..n {
            for j in 0..n {
                f(g.coord(l), g.coord(j), &mut buf);
                for (c, v) in out.components.iter_mut().zip(&buf) {
                    c[l * n + j] = *v;
                }
            }
        }
        out
    }

    pub fn ncomp(&self) -> usize {
        self.components.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_grid(&self, basis: &GalerkinBasis) -> Result<(), FieldError> {
        let expected = basis.grid().points();
        if self.points != expected {
            return Err(FieldError::GridMismatch { expected, found: self.points });
        }
        Ok(())
    }
}

impl SpectralField {
    pub fn zeros(basis: Arc<GalerkinBasis>) -> Self {
        let n = basis.len();
        Self { basis, coeffs: vec![0.0; n] }
    }

    pub fn from_coeffs(basis: Arc<GalerkinBasis>, coeffs: Vec<f64>) -> Result<Self, FieldError> {
        if coeffs.len() != basis.len() {
            return Err(FieldError::LengthMismatch { expected: basis.len(), found: coeffs.len() });
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(FieldError::NonFinite(i));
        }
        Ok(Self { basis, coeffs })
    }

    /// Single basis element `e_i`.
    pub fn unit(basis: Arc<GalerkinBasis>, i: usize) -> Self {
        let mut f = Self::zeros(basis);
        f.coeffs[i] = 1.0;
        f
    }

    pub fn basis(&self) -> &Arc<GalerkinBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { basis: self.basis.clone(), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &SpectralField) -> Self {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + s * b).collect();
        Self { basis: self.basis.clone(), coeffs }
    }

    pub fn v_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn v_norm(&self) -> f64 {
        libm::sqrt(self.v_norm_sq())
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().zip(self.basis.modes()).map(|(c, m)| c * c / m.v_factor).sum()
    }

    /// `||y||_Wt^2` from the diagonal form.
    pub fn w_tilde_sq(&self) -> f64 {
        self.coeffs.iter().zip(self.basis.modes()).map(|(c, m)| c * c * m.lambda).sum()
    }

    /// `(u, z)_V` as a coefficient dot product.
    pub fn inner_v(&self, other: &SpectralField) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    /// `(u, z)_2` from coefficients.
    pub fn inner_l2(&self, other: &SpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .zip(self.basis.modes())
            .map(|((a, b), m)| a * b / m.v_factor)
            .sum()
    }

    /// L2 pairings `(y, e_i)`.
    pub fn l2_pairings(&self) -> Vec<f64> {
        self.coeffs.iter().zip(self.basis.modes()).map(|(c, m)| c / m.v_factor).collect()
    }

    /// Pointwise velocity on the grid.
    pub fn synthesize(&self) -> PhysicalField {
        self.derivative(0, 0)
    }

    /// `d_1^a d_2^b y` on the grid, both components.
    pub fn derivative(&self, a: u32, b: u32) -> PhysicalField {
        let g = self.basis.grid();
        let mut blocks = self.basis.to_blocks(&self.coeffs);
        let mut out = PhysicalField::zeros(g.points(), 2);
        for (blk, comp) in blocks.iter_mut().zip(out.components.iter_mut()) {
            g.differentiate(blk, a, b);
            g.synthesize(blk, comp);
        }
        out
    }

    /// `grad y` as a row-major tensor, entry `(i, j) = d_j y_i`.
    pub fn grad(&self) -> PhysicalField {
        let d1 = self.derivative(1, 0);
        let d2 = self.derivative(0, 1);
        let mut c = Vec::with_capacity(4);
        for i in 0..2 {
            c.push(d1.components[i].clone());
            c.push(d2.components[i].clone());
        }
        PhysicalField { points: d1.points, components: c }
    }

    /// `D(y) = (grad y + grad y^T) / 2`.
    pub fn sym_d(&self) -> PhysicalField {
        let mut a = self.a_of();
        for c in &mut a.components {
            for v in c.iter_mut() {
                *v *= 0.5;
            }
        }
        a
    }

    /// `A(y) = grad y + grad y^T`.
    pub fn a_of(&self) -> PhysicalField {
        let g = self.grad();
        let mut out = PhysicalField::zeros(g.points, 4);
        for i in 0..2 {
            for j in 0..2 {
                let (gij, gji) = (&g.components[2 * i + j], &g.components[2 * j + i]);
                for (o, (x, y)) in out.components[2 * i + j].iter_mut().zip(gij.iter().zip(gji)) {
                    *o = x + y;
                }
            }
        }
        out
    }

    pub fn laplacian(&self) -> PhysicalField {
        let mut a = self.derivative(2, 0);
        let b = self.derivative(0, 2);
        for (ca, cb) in a.components.iter_mut().zip(&b.components) {
            for (x, y) in ca.iter_mut().zip(cb) {
                *x += y;
            }
        }
        a
    }

    /// Scalar curl `d_1 y_2 - d_2 y_1`.
    pub fn curl2d(&self) -> PhysicalField {
        let d1 = self.derivative(1, 0);
        let d2 = self.derivative(0, 1);
        let c = d1.components[1].iter().zip(&d2.components[0]).map(|(a, b)| a - b).collect();
        PhysicalField { points: d1.points, components: vec![c] }
    }

    /// Scalar curl of `v(y) = y - alpha1 lap y`.
    pub fn curl_v(&self) -> PhysicalField {
        let a1 = self.basis.alpha1();
        let mut c = self.curl2d();
        let lap_curl = {
            let mut blocks = self.basis.to_blocks(&self.coeffs);
            let g = self.basis.grid();
            let w = g.width();
            let b = g.band() as i32;
            for blk in blocks.iter_mut() {
                for q1 in -b..=b {
                    for q2 in -b..=b {
                        let s = ((q1 + b) as usize) * w + (q2 + b) as usize;
                        blk[s] *= -((q1 * q1 + q2 * q2) as f64);
                    }
                }
            }
            let lap = SpectralBlocks(blocks);
            lap.curl(g)
        };
        for (x, l) in c.components[0].iter_mut().zip(&lap_curl) {
            *x -= a1 * l;
        }
        c
    }

    /// Quadrature of `(v(u), z)`, the other route to `(u, z)_V`.
    pub fn inner_v_quadrature(&self, other: &SpectralField) -> f64 {
        let a1 = self.basis.alpha1();
        let u = self.synthesize();
        let lu = self.laplacian();
        let z = other.synthesize();
        let mut acc = 0.0;
        for i in 0..2 {
            for k in 0..u.components[i].len() {
                acc += (u.components[i][k] - a1 * lu.components[i][k]) * z.components[i][k];
            }
        }
        acc * self.basis.cell()
    }

    /// All four norms; `w_tilde` comes from quadrature of `curl v(y)`.
    pub fn norms(&self) -> NormReport {
        let k = Kinematics::new(self);
        let cv = self.curl_v();
        let curl_sq: f64 = cv.components[0].iter().map(|v| v * v).sum::<f64>() * self.basis.cell();
        let v2 = self.v_norm_sq();
        NormReport {
            l2: libm::sqrt(self.l2_norm_sq()),
            v_norm: libm::sqrt(v2),
            w_tilde: libm::sqrt(v2 + curl_sq),
            w24: k.w24(self.basis.cell()),
        }
    }

    pub fn w24(&self) -> f64 {
        Kinematics::new(self).w24(self.basis.cell())
    }
}

struct SpectralBlocks([Vec<Complex64>; 2]);

impl SpectralBlocks {
    fn curl(mut self, g: &crate::grid::Grid) -> Vec<f64> {
        let n = g.points();
        let [b0, b1] = &mut self.0;
        g.differentiate(b1, 1, 0);
        g.differentiate(b0, 0, 1);
        let mut f1 = vec![0.0; n * n];
        let mut f0 = vec![0.0; n * n];
        g.synthesize(b1, &mut f1);
        g.synthesize(b0, &mut f0);
        f1.iter().zip(&f0).map(|(a, b)| a - b).collect()
    }
}

/// L2 pairings `(F, e_i)` of a sampled vector field.
pub fn pair(basis: &GalerkinBasis, f: &PhysicalField) -> Result<Vec<f64>, FieldError> {
    f.check_grid(basis)?;
    assert_eq!(f.ncomp(), 2, "pairing needs a vector field");
    let g = basis.grid();
    let mut blocks = [g.zero_block(), g.zero_block()];
    for (b, c) in blocks.iter_mut().zip(&f.components) {
        g.analyze(c, b);
    }
    let mut out = vec![0.0; basis.len()];
    basis.pair_blocks(&blocks, &mut out);
    Ok(out)
}

/// V-orthogonal projection of a sampled field: `c_i = (1 + alpha1 mu_i)(f, e_i)`.
///
/// For smooth `f` this equals `(f, e_i)_V` because `v(e_i) = (1 + alpha1 mu_i) e_i`.
pub fn project_v(basis: &Arc<GalerkinBasis>, f: &PhysicalField) -> Result<SpectralField, FieldError> {
    let mut c = pair(basis, f)?;
    for (x, m) in c.iter_mut().zip(basis.modes()) {
        *x *= m.v_factor;
    }
    Ok(SpectralField { basis: basis.clone(), coeffs: c })
}

/// Index of second derivative `d_a d_b` in the packed `(11, 12, 22)` layout.
#[inline]
pub(crate) fn hidx(a: usize, b: usize) -> usize {
    a + b
}

/// Grid samples of a field and its derivatives up to third order in the
/// combinations the operators need.
pub struct Kinematics {
    pub points: usize,
    /// `y[i]`
    pub y: [Vec<f64>; 2],
    /// `g[i][j] = d_j y_i`
    pub g: [[Vec<f64>; 2]; 2],
    /// `h[i][hidx(a, b)] = d_a d_b y_i`
    pub h: [[Vec<f64>; 3]; 2],
    /// `gl[i][j] = d_j lap y_i`
    pub gl: [[Vec<f64>; 2]; 2],
}

impl Kinematics {
    pub fn new(y: &SpectralField) -> Self {
        Self::from_coeffs(y.basis(), y.coeffs())
    }

    pub fn from_coeffs(basis: &GalerkinBasis, coeffs: &[f64]) -> Self {
        let g = basis.grid();
        let n = g.points();
        let base = basis.to_blocks(coeffs);
        let b = g.band() as i32;
        let w = g.width();
        let synth = |comp: usize, f: &dyn Fn(i32, i32) -> Complex64| -> Vec<f64> {
            let mut blk = base[comp].clone();
            for q1 in -b..=b {
                for q2 in -b..=b {
                    let s = ((q1 + b) as usize) * w + (q2 + b) as usize;
                    blk[s] *= f(q1, q2);
                }
            }
            let mut out = vec![0.0; n * n];
            g.synthesize(&blk, &mut out);
            out
        };
        let i = Complex64::new(0.0, 1.0);
        let one = |_: i32, _: i32| Complex64::new(1.0, 0.0);
        let d1 = |q1: i32, _: i32| i * q1 as f64;
        let d2 = |_: i32, q2: i32| i * q2 as f64;
        let d11 = |q1: i32, _: i32| Complex64::new(-(q1 * q1) as f64, 0.0);
        let d12 = |q1: i32, q2: i32| Complex64::new(-(q1 * q2) as f64, 0.0);
        let d22 = |_: i32, q2: i32| Complex64::new(-(q2 * q2) as f64, 0.0);
        let l1 = |q1: i32, q2: i32| i * (-(q1 as f64) * (q1 * q1 + q2 * q2) as f64);
        let l2 = |q1: i32, q2: i32| i * (-(q2 as f64) * (q1 * q1 + q2 * q2) as f64);
        let comp = |c: usize| {
            (
                synth(c, &one),
                [synth(c, &d1), synth(c, &d2)],
                [synth(c, &d11), synth(c, &d12), synth(c, &d22)],
                [synth(c, &l1), synth(c, &l2)],
            )
        };
        let (y0, g0, h0, l0) = comp(0);
        let (y1, g1, h1, l1v) = comp(1);
        Self { points: n, y: [y0, y1], g: [g0, g1], h: [h0, h1], gl: [l0, l1v] }
    }

    pub fn len(&self) -> usize {
        self.points * self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    /// `A_ij` at grid point `p`.
    #[inline]
    pub fn a(&self, p: usize) -> [[f64; 2]; 2] {
        let g = &self.g;
        let off = g[0][1][p] + g[1][0][p];
        [[2.0 * g[0][0][p], off], [off, 2.0 * g[1][1][p]]]
    }

    /// `d_k A_ij` at `p`, indexed `[k][i][j]`.
    #[inline]
    pub fn da(&self, p: usize) -> [[[f64; 2]; 2]; 2] {
        let mut out = [[[0.0; 2]; 2]; 2];
        for (k, ok) in out.iter_mut().enumerate() {
            for (i, oi) in ok.iter_mut().enumerate() {
                for (j, o) in oi.iter_mut().enumerate() {
                    *o = self.h[i][hidx(k, j)][p] + self.h[j][hidx(k, i)][p];
                }
            }
        }
        out
    }

    /// `||y||_{W^{2,4}}`: fourth root of the summed fourth powers of every
    /// derivative of order <= 2 of each component.
    pub fn w24(&self, cell: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..2 {
            let all: [&Vec<f64>; 6] = [&self.y[i], &self.g[i][0], &self.g[i][1], &self.h[i][0], &self.h[i][1], &self.h[i][2]];
            for f in all {
                acc += f.iter().map(|v| (v * v) * (v * v)).sum::<f64>();
            }
        }
        libm::sqrt(libm::sqrt(acc * cell))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{DomainKind, DomainSpec};
    use core::f64::consts::PI;

    fn torus(n: usize, a1: f64) -> Arc<GalerkinBasis> {
        Arc::new(GalerkinBasis::build(DomainSpec::for_truncation(DomainKind::Torus, n, 2.0, 4), a1, n))
    }

    fn vertical_cosine(b: &Arc<GalerkinBasis>) -> SpectralField {
        // (0, cos x1) = sqrt(4 pi^2) * e_{(1,0)} when alpha1 = 1
        let i = b.find([1, 0]).unwrap();
        let mut f = SpectralField::zeros(b.clone());
        f.coeffs_mut()[i] = libm::sqrt(b.mode(i).v_factor * 2.0 * PI * PI);
        f
    }

    #[test]
    fn vertical_cosine_norms() {
        let b = torus(2, 1.0);
        let y = vertical_cosine(&b);
        let r = y.norms();
        assert!((r.l2 * r.l2 - 2.0 * PI * PI).abs() < 1e-12);
        assert!((r.v_norm * r.v_norm - 4.0 * PI * PI).abs() < 1e-12);
        // curl v = -2 sin x1, so ||curl v||^2 = 4 * 2 pi^2
        assert!((r.w_tilde * r.w_tilde - 12.0 * PI * PI).abs() < 1e-10);
        let s = y.synthesize();
        let g = b.grid();
        for l in 0..g.points() {
            let x = g.coord(l);
            assert!((s.components[1][l * g.points() + 3] - libm::cos(x)).abs() < 1e-13);
            assert!(s.components[0][l * g.points()].abs() < 1e-13);
        }
    }

    #[test]
    fn zero_field_norms_vanish() {
        let b = torus(2, 0.5);
        let r = SpectralField::zeros(b).norms();
        assert_eq!((r.l2, r.v_norm, r.w_tilde, r.w24), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn a_of_vertical_cosine() {
        let b = torus(2, 1.0);
        let a = vertical_cosine(&b).a_of();
        let g = b.grid();
        let n = g.points();
        for l in 0..n {
            for j in 0..n {
                let p = l * n + j;
                let s = -libm::sin(g.coord(l));
                assert!(a.components[0][p].abs() < 1e-13 && a.components[3][p].abs() < 1e-13);
                assert!((a.components[1][p] - s).abs() < 1e-13);
                assert!((a.components[2][p] - s).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn projection_of_gradient_vanishes() {
        let b = torus(3, 0.7);
        let f = PhysicalField::sample(&b, 2, |x, y, o| {
            // grad of sin(2x) cos(y) + cos(x + 3y)
            o[0] = 2.0 * libm::cos(2.0 * x) * libm::cos(y) - libm::sin(x + 3.0 * y);
            o[1] = -libm::sin(2.0 * x) * libm::sin(y) - 3.0 * libm::sin(x + 3.0 * y);
        });
        let p = project_v(&b, &f).unwrap();
        assert!(p.coeffs().iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let b = torus(2, 1.0);
        let f = PhysicalField::zeros(b.grid().points() + 1, 2);
        assert!(matches!(project_v(&b, &f), Err(FieldError::GridMismatch { .. })));
    }
}
