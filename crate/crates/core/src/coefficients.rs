//! Macroscopic coefficients at a given density.
//!
//! `c₂` and `λ` depend on averages against the tilde weight
//! `h_κ(cos θ) e^{κ cos θ} sin^n θ = g(θ) sin^{n-1} θ e^{κ cos θ}`, evaluated
//! on the finite-difference grid of the invariant with one Richardson step.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gci::{solve_gci, GciSolution, TurningGci, TurningProfile};
use crate::model::ModelParams;
use crate::vmf::{self, QuadSpec};

pub const DEFAULT_GRID: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub rho: f64,
    pub kappa: f64,
    pub kappa_dot: f64,
    pub c1: f64,
    pub c1_tilde: f64,
    /// `⟨cos²θ⟩` under the tilde weight.
    pub cos2_tilde: f64,
    pub c2: f64,
    pub c3: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientOptions {
    /// Coarse grid for the invariant; Richardson uses twice this.
    pub grid: usize,
    pub quad: QuadSpec,
}

impl Default for CoefficientOptions {
    fn default() -> Self {
        CoefficientOptions {
            grid: DEFAULT_GRID,
            quad: QuadSpec::default(),
        }
    }
}

type CacheKey = (u64, usize, usize);

fn cache() -> &'static RwLock<HashMap<CacheKey, Arc<GciSolution>>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, Arc<GciSolution>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

const CACHE_LIMIT: usize = 4096;

/// κ rounded to 12 significant digits.
pub fn canonical_kappa(kappa: f64) -> f64 {
    if kappa == 0.0 || !kappa.is_finite() {
        return kappa;
    }
    format!("{kappa:.11e}").parse().unwrap_or(kappa)
}

/// Memoized [`solve_gci`] at the canonical κ; concurrent callers may solve
/// the same key twice but always store the same value.
pub fn cached_gci(kappa: f64, dim: usize, grid: usize) -> Result<Arc<GciSolution>> {
    let k = canonical_kappa(kappa);
    let key = (k.to_bits(), dim, grid);
    if let Some(s) = cache().read().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return Ok(Arc::clone(s));
    }
    let sol = Arc::new(solve_gci(k, dim, grid)?);
    let mut w = cache().write().unwrap_or_else(|e| e.into_inner());
    if w.len() >= CACHE_LIMIT {
        w.clear();
    }
    Ok(Arc::clone(w.entry(key).or_insert(sol)))
}

/// Trapezoid sums of `γ·w` and `w` over the stored grid (endpoints vanish).
fn tilde_sums<G>(gamma: &G, sol: &GciSolution) -> Result<(f64, f64)>
where
    G: Fn(f64) -> f64 + ?Sized,
{
    let kappa = sol.kappa();
    let p = (sol.dim() - 1) as i32;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, g) in sol.theta().iter().zip(sol.g()) {
        let c = t.cos();
        let w = g * t.sin().powi(p) * (kappa * (c - 1.0)).exp();
        let v = gamma(c);
        if !v.is_finite() {
            return Err(Error::Evaluation { at: c });
        }
        num += v * w;
        den += w;
    }
    let h = sol.step();
    Ok((num * h, den * h))
}

/// Tilde average by trapezoid on the stored grid only.
pub fn tilde_average_on_grid<G>(gamma: &G, sol: &GciSolution) -> Result<f64>
where
    G: Fn(f64) -> f64 + ?Sized,
{
    let (num, den) = tilde_sums(gamma, sol)?;
    if !(den > 1e-300) {
        return Err(Error::DegenerateWeight(den));
    }
    Ok(num / den)
}

/// Tilde average with one Richardson step against a solve on the halved grid.
/// `quad.rel_tol` below `1e-6` triggers the refinement.
pub fn tilde_average<G>(gamma: &G, sol: &GciSolution, quad: &QuadSpec) -> Result<f64>
where
    G: Fn(f64) -> f64 + ?Sized,
{
    let coarse = tilde_average_on_grid(gamma, sol)?;
    if quad.rel_tol >= 1e-6 {
        return Ok(coarse);
    }
    let fine_sol = cached_gci(sol.kappa(), sol.dim(), 2 * sol.intervals())?;
    let fine = tilde_average_on_grid(gamma, &fine_sol)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// `(c̃₁, ⟨cos²θ⟩~)` at concentration κ with Richardson extrapolation.
pub fn tilde_moments(kappa: f64, dim: usize, grid: usize) -> Result<(f64, f64)> {
    let coarse = cached_gci(kappa, dim, grid)?;
    let fine = cached_gci(kappa, dim, 2 * grid)?;
    let ext = |f: &dyn Fn(f64) -> f64| -> Result<f64> {
        let a = tilde_average_on_grid(f, &coarse)?;
        let b = tilde_average_on_grid(f, &fine)?;
        Ok((4.0 * b - a) / 3.0)
    };
    Ok((ext(&|c| c)?, ext(&|c| c * c)?))
}

pub fn coefficient_set(model: &ModelParams, rho: f64) -> Result<CoefficientSet> {
    coefficient_set_with(model, rho, &CoefficientOptions::default())
}

pub fn coefficient_set_with(model: &ModelParams, rho: f64, opts: &CoefficientOptions) -> Result<CoefficientSet> {
    model.validate()?;
    let pt = model.evaluate(rho)?;
    let kappa = pt.kappa();
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::Model(format!("kappa = {kappa} at rho = {rho}")));
    }
    let kappa_dot = pt.kappa_dot();
    let n = model.dim as f64;
    let c1 = vmf::c1(kappa, model.dim, &opts.quad)?;
    let cos2 = vmf::vmf_average(&|c: f64| c * c, kappa, model.dim, &opts.quad)?;
    let c3 = c1 + rho * kappa_dot * (cos2 - c1 * c1);
    let (c1_tilde, cos2_tilde) = tilde_moments(kappa, model.dim, opts.grid)?;
    let sin2_tilde = 1.0 - cos2_tilde;
    let d = pt.d;
    let c2 = c1_tilde - model.alpha * d * (n * c1_tilde + kappa * cos2_tilde);
    let lambda = 1.0 / kappa
        + rho * kappa_dot / kappa * (c1_tilde - c1 + model.alpha_tilde * d * (kappa * sin2_tilde - n * c1_tilde))
        + 0.5 * model.alpha_tilde * rho * pt.d_dot * (n - 1.0 + kappa * c1_tilde);
    Ok(CoefficientSet {
        rho,
        kappa,
        kappa_dot,
        c1,
        c1_tilde,
        cos2_tilde,
        c2,
        c3,
        lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningCoefficients {
    pub c1: f64,
    pub c1_tilde: f64,
    pub c2: f64,
    pub lambda: f64,
}

/// Two-dimensional coefficients when the alignment rate depends on `ω·Ω`.
/// The tilde weight carries the extra factor `ν(cos θ)`; it is multiplied
/// into the `1/ν`, `ν'/ν`, `ν''/ν` integrands so `ν` may vanish at `μ = -1`.
pub fn turning_coefficients_2d(profile: &TurningProfile, alpha: f64, quad: &QuadSpec) -> Result<TurningCoefficients> {
    quad.validate()?;
    let tol = quad.rel_tol.max(1e-14);
    let t = TurningGci::with_tolerance(profile, tol)?;
    let d = profile.d();
    let n = 2.0;
    let nu = |th: f64| profile.nu(th.cos());
    let norm = t.moment(nu);
    if !(norm > 1e-300) {
        return Err(Error::DegenerateWeight(norm));
    }
    let c1_tilde = t.moment(|th| nu(th) * th.cos()) / norm;
    let first = t.moment(|th| {
        let (c, s2) = (th.cos(), th.sin().powi(2));
        nu(th) * (nu(th) * c * c - profile.nu_prime(c) * c * s2)
    }) / norm;
    let second = t.moment(|th| {
        let (c, s2) = (th.cos(), th.sin().powi(2));
        nu(th) * n * c + profile.nu_prime(c) * ((n + 2.0) * c * c - 1.0) - profile.nu_second(c) * c * s2
    }) / norm;
    let c2 = c1_tilde - alpha * first - alpha * d * second;
    let lambda = d * t.moment(|_| 1.0) / norm;
    let c1 = t.equilibrium_moment(|th| th.cos()) / t.equilibrium_moment(|_| 1.0);
    Ok(TurningCoefficients {
        c1,
        c1_tilde,
        c2,
        lambda,
    })
}
