#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use thirdgrade_core::basis::{DomainKind, DomainSpec, GalerkinBasis};
use thirdgrade_core::field::{project_v, PhysicalField, SpectralField};
use thirdgrade_core::rng;

pub fn basis(kind: DomainKind, n: usize, alpha1: f64) -> Arc<GalerkinBasis> {
    Arc::new(GalerkinBasis::build(DomainSpec::for_truncation(kind, n, 2.0, 4), alpha1, n))
}

pub fn torus(n: usize, alpha1: f64) -> Arc<GalerkinBasis> {
    basis(DomainKind::Torus, n, alpha1)
}

/// Random coefficients with spectral decay `(1 + mu)^(-decay)`.
pub fn random_field(b: &Arc<GalerkinBasis>, seed: u64, scale: f64, decay: f64) -> SpectralField {
    let c = b
        .modes()
        .iter()
        .enumerate()
        .map(|(i, m)| scale * rng::normal(seed, 7, i as u64, 0) / (1.0 + m.mu).powf(decay))
        .collect();
    SpectralField::from_coeffs(b.clone(), c).unwrap()
}

/// Streamfunction `psi = sum a_k cos(k.x) + b_k sin(k.x)` over `|k|_inf <= n`
/// on the torus, evaluated independently of the library's mode tables.
#[derive(Clone)]
pub struct TrigStream {
    pub waves: Vec<([f64; 2], f64, f64)>,
}

impl TrigStream {
    pub fn random(n: i32, seed: u64) -> Self {
        let mut waves = Vec::new();
        for k1 in 0..=n {
            for k2 in -n..=n {
                if k1 == 0 && k2 <= 0 {
                    continue;
                }
                let s = 1.0 / (1.0 + (k1 * k1 + k2 * k2) as f64);
                let a = s * rng::normal(seed, 11, (k1 * 100 + k2 + 50) as u64, 0);
                let b = s * rng::normal(seed, 11, (k1 * 100 + k2 + 50) as u64, 1);
                waves.push(([k1 as f64, k2 as f64], a, b));
            }
        }
        Self { waves }
    }

    /// Velocity `(d2 psi, -d1 psi)`.
    pub fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        let mut u = [0.0; 2];
        for &(k, a, b) in &self.waves {
            let ph = k[0] * x + k[1] * y;
            let d = -a * ph.sin() + b * ph.cos();
            u[0] += k[1] * d;
            u[1] -= k[0] * d;
        }
        u
    }

    pub fn sample(&self, b: &GalerkinBasis) -> PhysicalField {
        PhysicalField::sample(b, 2, |x, y, o| {
            let u = self.velocity(x, y);
            o[0] = u[0];
            o[1] = u[1];
        })
    }

    pub fn spectral(&self, b: &Arc<GalerkinBasis>) -> SpectralField {
        project_v(b, &self.sample(b)).unwrap()
    }
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    num / den
}

pub fn two_pi_sq() -> f64 {
    2.0 * PI * PI
}
