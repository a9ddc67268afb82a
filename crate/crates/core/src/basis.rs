//! Divergence-free trigonometric eigenbases of the Stokes operator.
//!
//! Torus `[0, 2pi)^2`: a wavevector `k != 0` in the upper half-plane yields
//! `(k_perp / |k|) cos(k . x)`, its mirror `-k` yields `(k_perp / |k|) sin(k . x)`
//! with `k_perp = (-k2, k1)`. Laplacian eigenvalue `mu = |k|^2`.
//!
//! Channel `[0, 2pi) x (0, pi)` with Navier-slip walls. On a flat wall the
//! normal is constant, so `(eta . D(y))_tan = 0` reads `d_y u1 + d_x u2 = 0`,
//! and `u2 = 0` along the wall kills `d_x u2`; the condition is free slip,
//! `d_y u1 = 0, u2 = 0`. Streamfunctions `cos(kx) sin(my)` (label `k >= 0`) and
//! `sin(|k| x) sin(my)` (label `k < 0`) with `u = (d_y psi, -d_x psi)` satisfy it
//! mode by mode. `k = 0` gives the shear modes `(m cos(my), 0)`, and the uniform
//! stream `(1, 0)` carries `mu = 0`.
//!
//! Channel fields are extended to `[0, 2pi)^2` with `u1` even and `u2` odd in
//! `y`; the extension is smooth for these modes, and channel integrals are half
//! the integrals over the doubled square.
//!
//! Every mode is stored V-normalized: `(e_i, e_j)_V = delta_ij`, so
//! `||e_i||_2^2 = 1 / (1 + alpha1 mu_i)`.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Torus,
    Channel,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Torus => "torus",
            DomainKind::Channel => "channel",
        }
    }

    /// Ratio between the physical domain area and the transform square.
    pub fn weight(self) -> f64 {
        match self {
            DomainKind::Torus => 1.0,
            DomainKind::Channel => 0.5,
        }
    }
}

impl core::str::FromStr for DomainKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "torus" => Ok(DomainKind::Torus),
            "channel" => Ok(DomainKind::Channel),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// Grid points per dimension of the transform square.
    pub resolution: usize,
    pub oversample: usize,
}

impl DomainSpec {
    /// Grid large enough that every quartic integrand built from the first
    /// `n` modes integrates exactly (needs `resolution > 4n`).
    pub fn for_truncation(kind: DomainKind, n: usize, dealias: f64, oversample: usize) -> Self {
        let dealiased = libm::ceil(dealias * (2 * n + 1) as f64) as usize;
        let resolution = dealiased.max(oversample * n + 1).max(2 * n + 1);
        Self { kind, resolution, oversample }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeShape {
    /// `(k_perp/|k|) cos(k . x)`
    TorusCos,
    /// `(k_perp/|k|) sin(k . x)`
    TorusSin,
    /// Streamfunction `cos(kx) sin(my)`, including shear modes at `k = 0`.
    ChannelCos,
    /// Streamfunction `sin(kx) sin(my)`.
    ChannelSin,
    /// Uniform stream `(1, 0)`.
    ChannelUniform,
}

impl ModeShape {
    pub fn name(self) -> &'static str {
        match self {
            ModeShape::TorusCos => "torus_cos",
            ModeShape::TorusSin => "torus_sin",
            ModeShape::ChannelCos => "channel_cos",
            ModeShape::ChannelSin => "channel_sin",
            ModeShape::ChannelUniform => "channel_uniform",
        }
    }
}

/// One Fourier component `amp exp(i q . x)` of a vector mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub q: [i32; 2],
    pub amp: [Complex64; 2],
}

#[derive(Debug, Clone)]
pub struct Mode {
    pub index: usize,
    /// Torus: the wavevector `k`. Channel: `(signed k, m)`.
    pub label: [i32; 2],
    pub shape: ModeShape,
    pub mu: f64,
    /// `||e_i||_2^2`, which equals `1 / v_factor` after normalization.
    pub l2_sq: f64,
    pub v_factor: f64,
    pub lambda: f64,
    pub terms: Vec<Term>,
}

impl Mode {
    /// Pointwise value of the (normalized) mode.
    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        let mut out = [0.0; 2];
        for t in &self.terms {
            let ph = t.q[0] as f64 * x + t.q[1] as f64 * y;
            let e = Complex64::new(libm::cos(ph), libm::sin(ph));
            out[0] += (t.amp[0] * e).re;
            out[1] += (t.amp[1] * e).re;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GalerkinBasis {
    spec: DomainSpec,
    alpha1: f64,
    n: usize,
    modes: Vec<Mode>,
    grid: Grid,
}

/// Accumulates `coef * trig1(a x) * trig2(b y)` into exponential terms.
struct TermBuilder {
    terms: Vec<Term>,
}

#[derive(Clone, Copy)]
enum Trig {
    Cos,
    Sin,
}

impl Trig {
    // exp(i a x) coefficients of cos(a x) / sin(a x) for the +a and -a parts.
    fn parts(self, a: i32) -> [(i32, Complex64); 2] {
        match self {
            Trig::Cos => [(a, Complex64::new(0.5, 0.0)), (-a, Complex64::new(0.5, 0.0))],
            Trig::Sin => [(a, Complex64::new(0.0, -0.5)), (-a, Complex64::new(0.0, 0.5))],
        }
    }
}

impl TermBuilder {
    fn new() -> Self {
        Self { terms: Vec::new() }
    }

    fn add(&mut self, comp: usize, coef: f64, tx: Trig, a: i32, ty: Trig, b: i32) {
        for (qa, ca) in tx.parts(a) {
            for (qb, cb) in ty.parts(b) {
                let v = ca * cb * coef;
                self.push(comp, [qa, qb], v);
            }
        }
    }

    fn push(&mut self, comp: usize, q: [i32; 2], v: Complex64) {
        if let Some(t) = self.terms.iter_mut().find(|t| t.q == q) {
            t.amp[comp] += v;
        } else {
            let mut amp = [Complex64::new(0.0, 0.0); 2];
            amp[comp] = v;
            self.terms.push(Term { q, amp });
        }
    }

    fn finish(mut self) -> Vec<Term> {
        self.terms.retain(|t| t.amp.iter().any(|a| a.norm_sqr() > 0.0));
        self.terms.sort_by(|a, b| a.q.cmp(&b.q));
        self.terms
    }
}

fn upper_half(k: [i32; 2]) -> bool {
    k[0] > 0 || (k[0] == 0 && k[1] > 0)
}

fn torus_mode(k: [i32; 2]) -> (ModeShape, f64, Vec<Term>) {
    let (kk, shape) = if upper_half(k) { (k, ModeShape::TorusCos) } else { ([-k[0], -k[1]], ModeShape::TorusSin) };
    let norm = libm::sqrt((kk[0] * kk[0] + kk[1] * kk[1]) as f64);
    let dir = [-(kk[1] as f64) / norm, kk[0] as f64 / norm];
    let (cp, cm) = match shape {
        ModeShape::TorusCos => (Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0)),
        _ => (Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5)),
    };
    let mut b = TermBuilder::new();
    for c in 0..2 {
        b.push(c, kk, cp * dir[c]);
        b.push(c, [-kk[0], -kk[1]], cm * dir[c]);
    }
    (shape, (kk[0] * kk[0] + kk[1] * kk[1]) as f64, b.finish())
}

fn channel_mode(k: i32, m: i32) -> (ModeShape, f64, Vec<Term>) {
    let mut b = TermBuilder::new();
    if m == 0 {
        b.add(0, 1.0, Trig::Cos, 0, Trig::Cos, 0);
        return (ModeShape::ChannelUniform, 0.0, b.finish());
    }
    let ka = k.abs();
    let (mf, kf) = (m as f64, ka as f64);
    let shape = if k >= 0 {
        // psi = cos(kx) sin(my): u1 = m cos(kx) cos(my), u2 = k sin(kx) sin(my)
        b.add(0, mf, Trig::Cos, ka, Trig::Cos, m);
        b.add(1, kf, Trig::Sin, ka, Trig::Sin, m);
        ModeShape::ChannelCos
    } else {
        // psi = sin(kx) sin(my): u1 = m sin(kx) cos(my), u2 = -k cos(kx) sin(my)
        b.add(0, mf, Trig::Sin, ka, Trig::Cos, m);
        b.add(1, -kf, Trig::Cos, ka, Trig::Sin, m);
        ModeShape::ChannelSin
    };
    (shape, (k * k + m * m) as f64, b.finish())
}

impl GalerkinBasis {
    /// Builds the first-`n` basis. Torus keeps `0 < |k|_inf <= n`
    /// (`(2n+1)^2 - 1` modes); channel keeps `|k| <= n, 1 <= m <= n` plus the
    /// uniform stream (`n(2n+1) + 1` modes).
    pub fn build(spec: DomainSpec, alpha1: f64, n: usize) -> Self {
        assert!(n >= 1, "truncation must be >= 1");
        assert!(alpha1 > 0.0 && alpha1.is_finite(), "alpha1 must be > 0");
        assert!(spec.resolution >= 2 * n + 1, "grid resolution below 2n+1");
        let ni = n as i32;
        let mut raw: Vec<([i32; 2], ModeShape, f64, Vec<Term>)> = Vec::new();
        match spec.kind {
            DomainKind::Torus => {
                for k1 in -ni..=ni {
                    for k2 in -ni..=ni {
                        if k1 == 0 && k2 == 0 {
                            continue;
                        }
                        let (s, mu, t) = torus_mode([k1, k2]);
                        raw.push(([k1, k2], s, mu, t));
                    }
                }
            }
            DomainKind::Channel => {
                let (s, mu, t) = channel_mode(0, 0);
                raw.push(([0, 0], s, mu, t));
                for k in -ni..=ni {
                    for m in 1..=ni {
                        let (s, mu, t) = channel_mode(k, m);
                        raw.push(([k, m], s, mu, t));
                    }
                }
            }
        }
        raw.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(a.0.cmp(&b.0)));
        let w = spec.kind.weight();
        let area = 4.0 * PI * PI;
        let modes = raw
            .into_iter()
            .enumerate()
            .map(|(index, (label, shape, mu, mut terms))| {
                let raw_l2: f64 = terms.iter().map(|t| t.amp[0].norm_sqr() + t.amp[1].norm_sqr()).sum::<f64>() * w * area;
                let v_factor = 1.0 + alpha1 * mu;
                let scale = 1.0 / libm::sqrt(v_factor * raw_l2);
                for t in &mut terms {
                    t.amp[0] *= scale;
                    t.amp[1] *= scale;
                }
                Mode {
                    index,
                    label,
                    shape,
                    mu,
                    l2_sq: 1.0 / v_factor,
                    v_factor,
                    lambda: 1.0 + mu * v_factor,
                    terms,
                }
            })
            .collect();
        let grid = Grid::new(n, spec.resolution);
        Self { spec, alpha1, n, modes, grid }
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn kind(&self) -> DomainKind {
        self.spec.kind
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, i: usize) -> &Mode {
        &self.modes[i]
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Domain measure per transform-square measure.
    pub fn weight(&self) -> f64 {
        self.spec.kind.weight()
    }

    /// Quadrature weight of one grid point.
    pub fn cell(&self) -> f64 {
        let n = self.grid.points() as f64;
        self.weight() * 4.0 * PI * PI / (n * n)
    }

    /// Index of the mode with the given label.
    pub fn find(&self, label: [i32; 2]) -> Option<usize> {
        self.modes.iter().position(|m| m.label == label)
    }

    /// Scatters V-coefficients into per-component spectral blocks.
    pub fn to_blocks(&self, coeffs: &[f64]) -> [Vec<Complex64>; 2] {
        assert_eq!(coeffs.len(), self.len());
        let g = &self.grid;
        let mut b = [g.zero_block(), g.zero_block()];
        for (m, &c) in self.modes.iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            for t in &m.terms {
                let s = g.slot(t.q[0], t.q[1]);
                b[0][s] += t.amp[0] * c;
                b[1][s] += t.amp[1] * c;
            }
        }
        b
    }

    /// L2 pairings `(F, e_i)` of a field given by its spectral blocks.
    pub fn pair_blocks(&self, blocks: &[Vec<Complex64>; 2], out: &mut [f64]) {
        assert_eq!(out.len(), self.len());
        let g = &self.grid;
        let scale = self.weight() * 4.0 * PI * PI;
        for (m, o) in self.modes.iter().zip(out.iter_mut()) {
            let mut acc = 0.0;
            for t in &m.terms {
                let s = g.slot(t.q[0], t.q[1]);
                acc += (blocks[0][s] * t.amp[0].conj()).re + (blocks[1][s] * t.amp[1].conj()).re;
            }
            *o = acc * scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus(n: usize) -> GalerkinBasis {
        GalerkinBasis::build(DomainSpec::for_truncation(DomainKind::Torus, n, 2.0, 4), 1.0, n)
    }

    #[test]
    fn torus_count_and_ordering() {
        let b = torus(4);
        assert_eq!(b.len(), 80);
        for w in b.modes().windows(2) {
            assert!(w[0].mu <= w[1].mu);
            assert!(w[0].lambda <= w[1].lambda);
            if w[0].mu == w[1].mu {
                assert!(w[0].label < w[1].label);
            }
        }
    }

    #[test]
    fn torus_first_mode_is_vertical_cosine() {
        let b = torus(1);
        let i = b.find([1, 0]).unwrap();
        let m = b.mode(i);
        assert_eq!(m.mu, 1.0);
        assert_eq!(m.v_factor, 2.0);
        assert_eq!(m.lambda, 3.0);
        // (0, cos x1) / sqrt(2 * 2 pi^2)
        let s = 1.0 / libm::sqrt(4.0 * PI * PI);
        for &(x, y) in &[(0.3, 1.1), (2.0, 5.0)] {
            let v = m.eval(x, y);
            assert!(v[0].abs() < 1e-15);
            assert!((v[1] - s * libm::cos(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn channel_count_and_shear_mode() {
        let spec = DomainSpec::for_truncation(DomainKind::Channel, 3, 2.0, 4);
        let b = GalerkinBasis::build(spec, 0.5, 3);
        assert_eq!(b.len(), 3 * 7 + 1);
        assert_eq!(b.mode(0).shape, ModeShape::ChannelUniform);
        let m = b.mode(b.find([0, 1]).unwrap());
        for &x in &[0.0, 1.7, 4.0] {
            for &y in &[0.0, PI] {
                let v = m.eval(x, y);
                assert!(v[1].abs() < 1e-15);
            }
            let v = m.eval(x, 0.4);
            assert!((v[0] / libm::cos(0.4) - m.eval(x, 0.0)[0]).abs() < 1e-14);
        }
    }
}
