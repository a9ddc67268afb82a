//! Separable trigonometric transforms between a band-limited spectral block
//! and a uniform periodic quadrature grid on `[0, 2pi)^2`.
//!
//! A block stores complex Fourier coefficients `c(q1, q2)` for
//! `|q1|, |q2| <= band`, representing the real field
//! `f(x) = sum_q c(q) exp(i q . x)`. Transforms are direct sums (no FFT):
//! the bands used here are small and a direct sum keeps the crate `no_std`.
//! With `points > 4 * band` the trapezoidal rule integrates every product of
//! up to four band-limited factors exactly.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct Grid {
    band: usize,
    points: usize,
    // cos/sin(q x_j), q in 0..=band, j in 0..points; row-major by q.
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Grid {
    pub fn new(band: usize, points: usize) -> Self {
        assert!(points >= 2 * band + 1, "grid cannot resolve the band");
        let mut cos = vec![0.0; (band + 1) * points];
        let mut sin = vec![0.0; (band + 1) * points];
        for q in 0..=band {
            for j in 0..points {
                // Reduce q*j mod points first so the angle is exact-ish.
                let r = (q * j) % points;
                let ang = 2.0 * PI * r as f64 / points as f64;
                cos[q * points + j] = libm::cos(ang);
                sin[q * points + j] = libm::sin(ang);
            }
        }
        Self { band, points, cos, sin }
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Number of spectral slots per dimension, `2 * band + 1`.
    pub fn width(&self) -> usize {
        2 * self.band + 1
    }

    pub fn block_len(&self) -> usize {
        self.width() * self.width()
    }

    pub fn grid_len(&self) -> usize {
        self.points * self.points
    }

    /// Slot of wavevector `(q1, q2)` inside a block.
    #[inline]
    pub fn slot(&self, q1: i32, q2: i32) -> usize {
        let b = self.band as i32;
        debug_assert!(q1.abs() <= b && q2.abs() <= b);
        ((q1 + b) as usize) * self.width() + (q2 + b) as usize
    }

    /// Grid coordinate of index `j`.
    pub fn coord(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.points as f64
    }

    pub fn zero_block(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.block_len()]
    }

    #[inline]
    fn twiddle(&self, q: i32, j: usize) -> Complex64 {
        let qa = q.unsigned_abs() as usize;
        let c = self.cos[qa * self.points + j];
        let s = self.sin[qa * self.points + j];
        if q >= 0 {
            Complex64::new(c, s)
        } else {
            Complex64::new(c, -s)
        }
    }

    /// Evaluates a Hermitian block on the grid. Output index is `l * points + j`
    /// with `l` along `x1` and `j` along `x2`.
    pub fn synthesize(&self, block: &[Complex64], out: &mut [f64]) {
        assert_eq!(block.len(), self.block_len());
        assert_eq!(out.len(), self.grid_len());
        let b = self.band as i32;
        let n = self.points;
        let w = self.width();
        // tmp[q1][j] = sum_q2 c(q1, q2) e^{i q2 y_j}, only q1 >= 0 (Hermitian).
        let mut tmp = vec![Complex64::new(0.0, 0.0); (self.band + 1) * n];
        for q1 in 0..=b {
            let row = &block[((q1 + b) as usize) * w..((q1 + b) as usize + 1) * w];
            let t = &mut tmp[(q1 as usize) * n..(q1 as usize + 1) * n];
            for (j, tj) in t.iter_mut().enumerate() {
                let mut acc = row[b as usize];
                for q2 in 1..=b {
                    let c = self.cos[(q2 as usize) * n + j];
                    let s = self.sin[(q2 as usize) * n + j];
                    let p = row[(b + q2) as usize];
                    let m = row[(b - q2) as usize];
                    // p e^{i th} + m e^{-i th}
                    acc.re += (p.re + m.re) * c - (p.im - m.im) * s;
                    acc.im += (p.im + m.im) * c + (p.re - m.re) * s;
                }
                *tj = acc;
            }
        }
        for l in 0..n {
            let o = &mut out[l * n..(l + 1) * n];
            for (j, oj) in o.iter_mut().enumerate() {
                *oj = tmp[j].re;
            }
            for q1 in 1..=self.band {
                let c = self.cos[q1 * n + l];
                let s = self.sin[q1 * n + l];
                let t = &tmp[q1 * n..(q1 + 1) * n];
                for (oj, tj) in o.iter_mut().zip(t) {
                    *oj += 2.0 * (tj.re * c - tj.im * s);
                }
            }
        }
    }

    /// Fourier coefficients of grid samples, truncated to the band.
    pub fn analyze(&self, values: &[f64], block: &mut [Complex64]) {
        assert_eq!(values.len(), self.grid_len());
        assert_eq!(block.len(), self.block_len());
        let b = self.band as i32;
        let n = self.points;
        let w = self.width();
        // tmp[l][q2] = sum_j f(l, j) e^{-i q2 y_j} for q2 in 0..=band.
        let mut tmp = vec![Complex64::new(0.0, 0.0); n * (self.band + 1)];
        for l in 0..n {
            let row = &values[l * n..(l + 1) * n];
            for q2 in 0..=self.band {
                let cs = &self.cos[q2 * n..(q2 + 1) * n];
                let sn = &self.sin[q2 * n..(q2 + 1) * n];
                let mut re = 0.0;
                let mut im = 0.0;
                for j in 0..n {
                    re += row[j] * cs[j];
                    im -= row[j] * sn[j];
                }
                tmp[l * (self.band + 1) + q2] = Complex64::new(re, im);
            }
        }
        let scale = 1.0 / (n * n) as f64;
        for q1 in -b..=b {
            for q2 in 0..=b {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..n {
                    acc += tmp[l * (self.band + 1) + q2 as usize] * self.twiddle(-q1, l);
                }
                acc *= scale;
                block[((q1 + b) as usize) * w + (q2 + b) as usize] = acc;
                if q2 > 0 {
                    block[((b - q1) as usize) * w + (b - q2) as usize] = acc.conj();
                }
            }
        }
        // Nyquist-free odd grids keep (0,0) real; enforce it for even grids too.
        let z = &mut block[(b as usize) * w + b as usize];
        z.im = 0.0;
    }

    /// Multiplies a block by `(i q1)^a (i q2)^b` in place.
    pub fn differentiate(&self, block: &mut [Complex64], d1: u32, d2: u32) {
        let b = self.band as i32;
        for q1 in -b..=b {
            for q2 in -b..=b {
                let s = self.slot(q1, q2);
                let f = ipow(q1 as f64, d1) * ipow(q2 as f64, d2);
                let c = block[s] * f;
                // multiply by i^(d1+d2)
                block[s] = match (d1 + d2) % 4 {
                    0 => c,
                    1 => Complex64::new(-c.im, c.re),
                    2 => -c,
                    _ => Complex64::new(c.im, -c.re),
                };
            }
        }
    }
}

fn ipow(x: f64, k: u32) -> f64 {
    let mut r = 1.0;
    for _ in 0..k {
        r *= x;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(g: &Grid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let n = g.points();
        let mut v = vec![0.0; n * n];
        for l in 0..n {
            for j in 0..n {
                v[l * n + j] = f(g.coord(l), g.coord(j));
            }
        }
        v
    }

    #[test]
    fn analyze_then_synthesize_round_trips_band_limited_data() {
        let g = Grid::new(3, 14);
        let f = |x: f64, y: f64| 0.3 + libm::cos(2.0 * x - y) - 0.7 * libm::sin(3.0 * y) + libm::sin(x) * libm::cos(2.0 * y);
        let v = sample(&g, f);
        let mut b = g.zero_block();
        g.analyze(&v, &mut b);
        let mut back = vec![0.0; g.grid_len()];
        g.synthesize(&b, &mut back);
        for (a, c) in v.iter().zip(&back) {
            assert!((a - c).abs() < 1e-13);
        }
        assert!((b[g.slot(0, 0)].re - 0.3).abs() < 1e-14);
        assert!((b[g.slot(2, -1)].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn spectral_derivative_matches_closed_form() {
        let g = Grid::new(2, 9);
        let v = sample(&g, |x, y| libm::sin(2.0 * x) * libm::cos(y));
        let mut b = g.zero_block();
        g.analyze(&v, &mut b);
        g.differentiate(&mut b, 1, 1);
        let mut d = vec![0.0; g.grid_len()];
        g.synthesize(&b, &mut d);
        let exact = sample(&g, |x, y| -2.0 * libm::cos(2.0 * x) * libm::sin(y));
        for (a, c) in d.iter().zip(&exact) {
            assert!((a - c).abs() < 1e-13);
        }
    }
}
