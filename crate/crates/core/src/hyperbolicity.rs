//! Characteristic speeds and hyperbolicity of the macroscopic system.

use num::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{coefficient_set_with, CoefficientOptions, CoefficientSet};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Speeds of the system in direction θ from the flow direction. `gamma_zero`
/// has multiplicity `n - 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenTriple {
    pub gamma_minus: Complex<f64>,
    pub gamma_zero: f64,
    pub gamma_plus: Complex<f64>,
    pub discriminant: f64,
}

impl EigenTriple {
    pub fn is_real(&self) -> bool {
        self.discriminant >= 0.0
    }

    /// Largest modulus among the three speeds.
    pub fn spectral_radius(&self) -> f64 {
        self.gamma_minus
            .norm()
            .max(self.gamma_plus.norm())
            .max(self.gamma_zero.abs())
    }
}

pub fn discriminant(cs: &CoefficientSet, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let dc = cs.c2 - cs.c3;
    dc * dc * c * c + 4.0 * cs.lambda * cs.c1 * s * s
}

pub fn eigenvalues(cs: &CoefficientSet, theta: f64) -> EigenTriple {
    let (sn, cn) = theta.sin_cos();
    let disc = discriminant(cs, theta);
    let sum = (cs.c2 + cs.c3) * cn;
    let (gm, gp) = if disc >= 0.0 {
        let r = disc.sqrt();
        let prod = cs.c2 * cs.c3 * cn * cn - cs.lambda * cs.c1 * sn * sn;
        // the root of larger modulus first, the other from the product
        let (lo, hi) = if sum >= 0.0 {
            let hi = 0.5 * (sum + r);
            (if hi != 0.0 { prod / hi } else { 0.0 }, hi)
        } else {
            let lo = 0.5 * (sum - r);
            (lo, if lo != 0.0 { prod / lo } else { 0.0 })
        };
        (Complex::new(lo, 0.0), Complex::new(hi, 0.0))
    } else {
        let im = 0.5 * (-disc).sqrt();
        (Complex::new(0.5 * sum, -im), Complex::new(0.5 * sum, im))
    };
    EigenTriple {
        gamma_minus: gm,
        gamma_zero: cs.c2 * cn,
        gamma_plus: gp,
        discriminant: disc,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FullVerdict {
    Hyperbolic,
    NotHyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReducedVerdict {
    Hyperbolic,
    NotHyperbolic,
    DegenerateBoundary,
}

impl ReducedVerdict {
    pub fn is_hyperbolic(self) -> bool {
        self == ReducedVerdict::Hyperbolic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictReason {
    LambdaPositive,
    AngleWindow,
    LambdaZeroNondegenerate,
    ComplexEigenvalues,
    NonDiagonalizable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperbolicityVerdict {
    pub full_system: FullVerdict,
    pub reduced_1d: ReducedVerdict,
    pub reason: VerdictReason,
}

/// Relative band inside which the discriminant counts as zero.
const DISC_REL_TOL: f64 = 1e-12;

/// `|λ| ≤ tol_sign` is treated as `λ = 0`.
pub fn classify(cs: &CoefficientSet, theta: f64, tol_sign: f64) -> HyperbolicityVerdict {
    let lambda = cs.lambda;
    let full_system = if lambda > tol_sign {
        FullVerdict::Hyperbolic
    } else {
        FullVerdict::NotHyperbolic
    };
    let (reduced_1d, reason) = if lambda > tol_sign {
        (ReducedVerdict::Hyperbolic, VerdictReason::LambdaPositive)
    } else if lambda < -tol_sign {
        let (s, c) = theta.sin_cos();
        let dc = cs.c2 - cs.c3;
        let a = dc * dc * c * c;
        let b = 4.0 * lambda * cs.c1 * s * s;
        let disc = a + b;
        if disc.abs() <= DISC_REL_TOL * a.max(b.abs()) {
            (ReducedVerdict::DegenerateBoundary, VerdictReason::NonDiagonalizable)
        } else if disc > 0.0 {
            (ReducedVerdict::Hyperbolic, VerdictReason::AngleWindow)
        } else {
            (ReducedVerdict::NotHyperbolic, VerdictReason::ComplexEigenvalues)
        }
    } else if theta.cos().abs() > 1e-12 && (cs.c2 - cs.c3).abs() > tol_sign {
        (ReducedVerdict::Hyperbolic, VerdictReason::LambdaZeroNondegenerate)
    } else {
        (ReducedVerdict::NotHyperbolic, VerdictReason::NonDiagonalizable)
    };
    HyperbolicityVerdict {
        full_system,
        reduced_1d,
        reason,
    }
}

/// Edge of the hyperbolic window `[0, θ*)` when `λ < 0`.
pub fn window_edge(cs: &CoefficientSet) -> Option<f64> {
    if cs.lambda >= 0.0 {
        return None;
    }
    Some(((cs.c2 - cs.c3).abs() / (2.0 * (-cs.lambda * cs.c1).sqrt())).atan())
}

/// `1e-10 · max(1, max |λ|)`.
pub fn default_tol_sign(lambdas: impl IntoIterator<Item = f64>) -> f64 {
    1e-10 * lambdas.into_iter().fold(1.0f64, |m, l| m.max(l.abs()))
}

/// `(lo, hi, steps)` sampled uniformly, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanRange {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl ScanRange {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Self {
        ScanRange { lo, hi, steps }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if self.steps < 2 || !self.lo.is_finite() || !self.hi.is_finite() || !(self.lo < self.hi) {
            return Err(Error::Domain(format!(
                "{what} range needs finite lo < hi and steps >= 2, got ({}, {}, {})",
                self.lo, self.hi, self.steps
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let h = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.lo + i as f64 * h).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapCell {
    pub theta: f64,
    pub eigen: EigenTriple,
    pub verdict: HyperbolicityVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub rho: f64,
    pub coefficients: Option<CoefficientSet>,
    /// Set when the coefficients could not be evaluated; `cells` is then empty.
    pub error: Option<String>,
    pub cells: Vec<MapCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityMap {
    pub tol_sign: f64,
    pub rows: Vec<MapRow>,
}

/// One line of the flat CSV view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapRecord {
    pub rho: f64,
    pub theta: f64,
    pub lambda: f64,
    pub c2: f64,
    pub c3: f64,
    pub gamma_minus_re: f64,
    pub gamma_minus_im: f64,
    pub gamma_plus_re: f64,
    pub gamma_plus_im: f64,
    pub full_verdict: FullVerdict,
    pub reduced_verdict: ReducedVerdict,
}

impl HyperbolicityMap {
    pub fn records(&self) -> impl Iterator<Item = MapRecord> + '_ {
        self.rows.iter().flat_map(|row| {
            row.cells.iter().filter_map(move |cell| {
                let cs = row.coefficients?;
                Some(MapRecord {
                    rho: row.rho,
                    theta: cell.theta,
                    lambda: cs.lambda,
                    c2: cs.c2,
                    c3: cs.c3,
                    gamma_minus_re: cell.eigen.gamma_minus.re,
                    gamma_minus_im: cell.eigen.gamma_minus.im,
                    gamma_plus_re: cell.eigen.gamma_plus.re,
                    gamma_plus_im: cell.eigen.gamma_plus.im,
                    full_verdict: cell.verdict.full_system,
                    reduced_verdict: cell.verdict.reduced_1d,
                })
            })
        })
    }

    /// `(ρ, λ(ρ))` for every valid row.
    pub fn lambda_trace(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.coefficients.map(|c| (r.rho, c.lambda)))
            .collect()
    }

    pub fn invalid_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

pub fn region_map(
    model: &ModelParams,
    rho_range: ScanRange,
    theta_range: ScanRange,
    tol_sign: f64,
) -> Result<HyperbolicityMap> {
    region_map_with(model, rho_range, theta_range, tol_sign, &CoefficientOptions::default())
}

pub fn region_map_with(
    model: &ModelParams,
    rho_range: ScanRange,
    theta_range: ScanRange,
    tol_sign: f64,
    opts: &CoefficientOptions,
) -> Result<HyperbolicityMap> {
    rho_range.validate("rho")?;
    theta_range.validate("theta")?;
    model.validate()?;
    if !(tol_sign > 0.0) {
        return Err(Error::Domain(format!("tol_sign must be positive, got {tol_sign}")));
    }
    let thetas = theta_range.points();
    let rows = rho_range
        .points()
        .into_par_iter()
        .map(|rho| match coefficient_set_with(model, rho, opts) {
            Ok(cs) => MapRow {
                rho,
                coefficients: Some(cs),
                error: None,
                cells: thetas
                    .iter()
                    .map(|&theta| MapCell {
                        theta,
                        eigen: eigenvalues(&cs, theta),
                        verdict: classify(&cs, theta, tol_sign),
                    })
                    .collect(),
            },
            Err(e) => MapRow {
                rho,
                coefficients: None,
                error: Some(e.to_string()),
                cells: Vec::new(),
            },
        })
        .collect();
    Ok(HyperbolicityMap { tol_sign, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn cs(c1: f64, c2: f64, c3: f64, lambda: f64) -> CoefficientSet {
        CoefficientSet {
            rho: 1.0,
            kappa: 1.0,
            kappa_dot: 0.0,
            c1,
            c1_tilde: 0.0,
            cos2_tilde: 0.0,
            c2,
            c3,
            lambda,
        }
    }

    #[test]
    fn flow_direction_speeds() {
        let e = eigenvalues(&cs(0.5, 0.3, 0.7, 0.2), 0.0);
        assert!((e.gamma_plus.re - 0.7).abs() < 1e-15);
        assert!((e.gamma_minus.re - 0.3).abs() < 1e-15);
        assert_eq!(e.gamma_zero, 0.3);
    }

    #[test]
    fn transverse_speeds() {
        let e = eigenvalues(&cs(0.5, 0.3, 0.7, 0.2), FRAC_PI_2);
        let r = (0.2f64 * 0.5).sqrt();
        assert!((e.gamma_plus.re - r).abs() < 1e-15);
        assert!((e.gamma_minus.re + r).abs() < 1e-15);
        assert!(e.gamma_zero.abs() < 1e-16);
    }

    #[test]
    fn complex_pair() {
        let c = cs(0.5, 0.4, 0.4, -0.1);
        let e = eigenvalues(&c, std::f64::consts::FRAC_PI_4);
        assert!((e.discriminant + 0.1).abs() < 1e-15);
        assert!(e.gamma_plus.im > 0.0);
        assert_eq!(e.gamma_plus, e.gamma_minus.conj());
    }

    #[test]
    fn classify_examples() {
        let v = classify(&cs(0.5, 0.3, 0.7, 1.0), 1.234, 1e-10);
        assert_eq!(v.full_system, FullVerdict::Hyperbolic);
        assert_eq!(v.reduced_1d, ReducedVerdict::Hyperbolic);
        assert_eq!(v.reason, VerdictReason::LambdaPositive);

        let v = classify(&cs(0.5, 1.0, 0.0, -0.01), 0.1, 1e-10);
        assert_eq!(v.full_system, FullVerdict::NotHyperbolic);
        assert_eq!(v.reduced_1d, ReducedVerdict::Hyperbolic);
        assert_eq!(v.reason, VerdictReason::AngleWindow);

        let v = classify(&cs(0.5, 1.0, 0.0, 1e-12), FRAC_PI_2, 1e-10);
        assert_eq!(v.reduced_1d, ReducedVerdict::NotHyperbolic);
        let v = classify(&cs(0.5, 1.0, 0.0, 1e-12), 0.3, 1e-10);
        assert_eq!(v.reason, VerdictReason::LambdaZeroNondegenerate);
    }

    #[test]
    fn equal_roots_are_degenerate() {
        let v = classify(&cs(0.5, 0.4, 0.4, -0.1), 0.0, 1e-10);
        assert_eq!(v.reduced_1d, ReducedVerdict::DegenerateBoundary);
        assert_eq!(v.reason, VerdictReason::NonDiagonalizable);
    }

    #[test]
    fn window_edge_matches_tan_condition() {
        let c = cs(0.5, 1.0, 0.0, -0.01);
        let t = window_edge(&c).unwrap();
        assert!((t.tan() - 1.0 / (2.0 * 0.005f64.sqrt())).abs() < 1e-12);
        assert!(classify(&c, t * 0.999, 1e-10).reduced_1d.is_hyperbolic());
        assert!(!classify(&c, t * 1.001, 1e-10).reduced_1d.is_hyperbolic());
    }

    #[test]
    fn ranges_are_validated() {
        let m = ModelParams::constant(3, 1.0, 1.0);
        let bad = ScanRange::new(1.0, 1.0, 5);
        assert!(region_map(&m, bad, ScanRange::new(0.0, 1.0, 3), 1e-10).is_err());
        assert!(region_map(&m, ScanRange::new(0.0, 1.0, 1), ScanRange::new(0.0, 1.0, 3), 1e-10).is_err());
    }
}
