//! Physical and numerical run configuration.
//!
//! All quantities are nondimensional. [`FluidParams`] carries the material
//! moduli and enforces the thermodynamic compatibility condition
//! `|alpha1 + alpha2| <= sqrt(24 nu beta)`; [`RunConfig`] carries the
//! discretization. Both are plain values: once validated they are shared
//! read-only between workers.

use alloc::string::String;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::DomainKind;

/// Relative slack used when comparing `|alpha1 + alpha2|` against
/// `sqrt(24 nu beta)`, so that boundary parameter sets survive rounding.
pub const CONSTRAINT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("constraint violated: {inequality} ({detail})")]
    ConstraintViolation {
        inequality: &'static str,
        detail: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub nu: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
}

impl FluidParams {
    pub fn new(nu: f64, alpha1: f64, alpha2: f64, beta: f64) -> Result<Self, ParamError> {
        let p = Self { nu, alpha1, alpha2, beta };
        p.validate()?;
        Ok(p)
    }

    /// Checks `nu >= 0`, `alpha1 > 0`, `beta >= 0` and
    /// `|alpha1 + alpha2| <= sqrt(24 nu beta)` (boundary accepted).
    pub fn validate(&self) -> Result<(), ParamError> {
        let finite = [self.nu, self.alpha1, self.alpha2, self.beta]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(ParamError::ConstraintViolation {
                inequality: "all moduli finite",
                detail: alloc::format!("{self:?}"),
            });
        }
        if !(self.nu >= 0.0) {
            return Err(ParamError::ConstraintViolation {
                inequality: "nu >= 0",
                detail: alloc::format!("nu = {}", self.nu),
            });
        }
        if !(self.alpha1 > 0.0) {
            return Err(ParamError::ConstraintViolation {
                inequality: "alpha1 > 0",
                detail: alloc::format!("alpha1 = {}", self.alpha1),
            });
        }
        if !(self.beta >= 0.0) {
            return Err(ParamError::ConstraintViolation {
                inequality: "beta >= 0",
                detail: alloc::format!("beta = {}", self.beta),
            });
        }
        let lhs = libm::fabs(self.alpha1 + self.alpha2);
        let rhs = libm::sqrt(24.0 * self.nu * self.beta);
        if lhs > rhs * (1.0 + CONSTRAINT_REL_TOL) {
            return Err(ParamError::ConstraintViolation {
                inequality: "|alpha1 + alpha2| <= sqrt(24 nu beta)",
                detail: alloc::format!("|alpha1 + alpha2| = {lhs} > {rhs}"),
            });
        }
        Ok(())
    }

    /// Coefficient of the (`alpha1 + alpha2`) quadratic term.
    pub fn grade2(&self) -> f64 {
        self.alpha1 + self.alpha2
    }
}

/// Cut-off threshold on the `W^{2,4}` norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffConfig {
    pub m: f64,
}

impl CutoffConfig {
    pub fn new(m: f64) -> Result<Self, ParamError> {
        if !(m.is_finite() && m > 0.0) {
            return Err(ParamError::Invalid(alloc::format!("cutoff_M must be finite and > 0, got {m}")));
        }
        Ok(Self { m })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Galerkin truncation per dimension.
    pub n_modes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Number of retained Wiener modes `K`.
    pub noise_truncation: usize,
    /// Moment exponent reported by the ensemble diagnostics; must exceed 4.
    pub p_exponent: f64,
    pub domain: DomainKind,
    /// Grid size relative to the `2n+1` band (2 makes cubic products alias-free).
    pub dealias_factor: f64,
    /// Grid size relative to `n` for quartic quadratures.
    pub quadrature_oversample: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_modes: 8,
            dt: 1e-3,
            t_end: 1.0,
            seed: 0,
            noise_truncation: 16,
            p_exponent: 6.0,
            domain: DomainKind::Torus,
            dealias_factor: 2.0,
            quadrature_oversample: 4,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.n_modes < 1 {
            return Err(ParamError::Invalid("n_modes must be >= 1".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ParamError::Invalid("dt must be > 0".into()));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(ParamError::Invalid("t_end must be > 0".into()));
        }
        if !(self.p_exponent.is_finite() && self.p_exponent > 4.0) {
            return Err(ParamError::Invalid("p must exceed 4".into()));
        }
        if !(self.dealias_factor.is_finite() && self.dealias_factor >= 1.0) {
            return Err(ParamError::Invalid("dealias_factor must be >= 1".into()));
        }
        if self.quadrature_oversample < 2 {
            return Err(ParamError::Invalid("quadrature_oversample must be >= 2".into()));
        }
        Ok(())
    }

    /// Number of time steps needed to reach `t_end` (rounded to nearest).
    pub fn steps(&self) -> u64 {
        let s = libm::round(self.t_end / self.dt);
        if s < 1.0 {
            1
        } else {
            s as u64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_case_is_accepted() {
        let a2 = -1.0 + libm::sqrt(24.0);
        assert!(FluidParams::new(1.0, 1.0, a2, 1.0).is_ok());
    }

    #[test]
    fn zero_beta_forces_cancellation() {
        let err = FluidParams::new(1.0, 1.0, 0.0, 0.0).unwrap_err();
        match err {
            ParamError::ConstraintViolation { inequality, .. } => {
                assert_eq!(inequality, "|alpha1 + alpha2| <= sqrt(24 nu beta)")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cancelling_moduli_always_pass() {
        assert!(FluidParams::new(0.1, 0.2, -0.2, 0.5).is_ok());
        assert!(FluidParams::new(0.0, 0.2, -0.2, 0.0).is_ok());
    }

    #[test]
    fn sign_constraints() {
        assert!(FluidParams::new(-0.1, 1.0, -1.0, 1.0).is_err());
        assert!(FluidParams::new(0.1, 0.0, 0.0, 1.0).is_err());
        assert!(FluidParams::new(0.1, 1.0, -1.0, -1.0).is_err());
        assert!(FluidParams::new(f64::NAN, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn run_config_invariants() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.dt = 0.0;
        assert_eq!(c.validate().unwrap_err(), ParamError::Invalid("dt must be > 0".into()));
        c.dt = 1e-3;
        c.p_exponent = 3.0;
        assert_eq!(c.validate().unwrap_err(), ParamError::Invalid("p must exceed 4".into()));
        c.p_exponent = 4.0;
        assert!(c.validate().is_err());
        assert!(CutoffConfig::new(0.0).is_err());
        assert!(CutoffConfig::new(f64::INFINITY).is_err());
    }

    proptest::proptest! {
        #[test]
        fn constraint_is_monotone_in_beta(
            nu in 0.0f64..5.0,
            a1 in 0.01f64..5.0,
            a2 in -10.0f64..10.0,
            beta in 0.0f64..5.0,
            extra in 0.0f64..5.0,
        ) {
            let p = FluidParams { nu, alpha1: a1, alpha2: a2, beta };
            if p.validate().is_ok() {
                let q = FluidParams { beta: beta + extra, ..p };
                proptest::prop_assert!(q.validate().is_ok());
            }
        }
    }
}
