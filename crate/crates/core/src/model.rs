//! Density-dependent model functions ν(ρ), d(ρ) and the parameter bundle
//! consumed by the coefficient, hyperbolicity and simulation modules.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A positive scalar function of density with a derivative.
pub trait DensityFunction: Send + Sync {
    fn value(&self, rho: f64) -> f64;

    /// Defaults to a central difference.
    fn derivative(&self, rho: f64) -> f64 {
        central_difference(|r| self.value(r), rho)
    }
}

/// Central difference with step `1e-6 · max(1, ρ)`.
pub fn central_difference<F: Fn(f64) -> f64>(f: F, rho: f64) -> f64 {
    let h = 1e-6 * rho.abs().max(1.0);
    (f(rho + h) - f(rho - h)) / (2.0 * h)
}

/// Closed-form density laws usable from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityLaw {
    Constant { value: f64 },
    /// `coef · ρ^exponent`
    Power { coef: f64, exponent: f64 },
    /// `intercept + slope · ρ`
    Affine { intercept: f64, slope: f64 },
    /// `low + (high - low) ρ^m / (ρ_half^m + ρ^m)`
    Hill {
        low: f64,
        high: f64,
        rho_half: f64,
        exponent: f64,
    },
}

impl DensityFunction for DensityLaw {
    fn value(&self, rho: f64) -> f64 {
        match *self {
            DensityLaw::Constant { value } => value,
            DensityLaw::Power { coef, exponent } => coef * rho.powf(exponent),
            DensityLaw::Affine { intercept, slope } => intercept + slope * rho,
            DensityLaw::Hill {
                low,
                high,
                rho_half,
                exponent,
            } => {
                let r = rho.powf(exponent);
                low + (high - low) * r / (rho_half.powf(exponent) + r)
            }
        }
    }

    fn derivative(&self, rho: f64) -> f64 {
        match *self {
            DensityLaw::Constant { .. } => 0.0,
            DensityLaw::Power { coef, exponent } => {
                if exponent == 0.0 {
                    0.0
                } else {
                    coef * exponent * rho.powf(exponent - 1.0)
                }
            }
            DensityLaw::Affine { slope, .. } => slope,
            DensityLaw::Hill {
                low,
                high,
                rho_half,
                exponent,
            } => {
                let k = rho_half.powf(exponent);
                let r = rho.powf(exponent);
                (high - low) * exponent * k * rho.powf(exponent - 1.0) / ((k + r) * (k + r))
            }
        }
    }
}

/// Wraps a closure; its derivative is the central-difference fallback.
pub struct FnDensity<F>(pub F);

impl<F: Fn(f64) -> f64 + Send + Sync> DensityFunction for FnDensity<F> {
    fn value(&self, rho: f64) -> f64 {
        (self.0)(rho)
    }
}

/// Closure value with a closure derivative.
pub struct FnDensityWithDerivative<F, D>(pub F, pub D);

impl<F, D> DensityFunction for FnDensityWithDerivative<F, D>
where
    F: Fn(f64) -> f64 + Send + Sync,
    D: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, rho: f64) -> f64 {
        (self.0)(rho)
    }
    fn derivative(&self, rho: f64) -> f64 {
        (self.1)(rho)
    }
}

#[derive(Clone)]
pub struct ModelParams {
    pub dim: usize,
    pub nu: Arc<dyn DensityFunction>,
    pub d: Arc<dyn DensityFunction>,
    /// First moment of the orientation kernel.
    pub alpha: f64,
    /// First moment of the normalized density kernel.
    pub alpha_tilde: f64,
}

impl fmt::Debug for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelParams")
            .field("dim", &self.dim)
            .field("alpha", &self.alpha)
            .field("alpha_tilde", &self.alpha_tilde)
            .finish_non_exhaustive()
    }
}

impl ModelParams {
    pub fn new(dim: usize, nu: impl DensityFunction + 'static, d: impl DensityFunction + 'static) -> Self {
        ModelParams {
            dim,
            nu: Arc::new(nu),
            d: Arc::new(d),
            alpha: 0.0,
            alpha_tilde: 0.0,
        }
    }

    /// Constant ν and d: every coefficient is density independent.
    pub fn constant(dim: usize, nu: f64, d: f64) -> Self {
        Self::new(dim, DensityLaw::Constant { value: nu }, DensityLaw::Constant { value: d })
    }

    pub fn with_alpha(mut self, alpha: f64, alpha_tilde: f64) -> Self {
        self.alpha = alpha;
        self.alpha_tilde = alpha_tilde;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Model(format!("dimension must be >= 2, got {}", self.dim)));
        }
        if !self.alpha.is_finite() || !self.alpha_tilde.is_finite() {
            return Err(Error::Model("anisotropy constants must be finite".into()));
        }
        Ok(())
    }

    /// `(ν, d, ν̇, ḋ)` at `rho`, checking positivity.
    pub fn evaluate(&self, rho: f64) -> Result<ModelPoint> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Model(format!("density must be positive, got {rho}")));
        }
        let nu = self.nu.value(rho);
        let d = self.d.value(rho);
        if !(nu > 0.0) || !(d > 0.0) {
            return Err(Error::Model(format!(
                "nu = {nu}, d = {d} at rho = {rho}; both must be positive"
            )));
        }
        let nu_dot = self.nu.derivative(rho);
        let d_dot = self.d.derivative(rho);
        if !nu_dot.is_finite() || !d_dot.is_finite() {
            return Err(Error::Model(format!("derivative undefined at rho = {rho}")));
        }
        Ok(ModelPoint {
            rho,
            nu,
            d,
            nu_dot,
            d_dot,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPoint {
    pub rho: f64,
    pub nu: f64,
    pub d: f64,
    pub nu_dot: f64,
    pub d_dot: f64,
}

impl ModelPoint {
    pub fn kappa(&self) -> f64 {
        self.nu / self.d
    }

    /// `dκ/dρ = (ν̇ d - ν ḋ) / d²`
    pub fn kappa_dot(&self) -> f64 {
        (self.nu_dot * self.d - self.nu * self.d_dot) / (self.d * self.d)
    }
}
