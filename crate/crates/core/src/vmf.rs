//! Averages against the von Mises–Fisher weight `e^{κ cos θ} sin^{n-2} θ`
//! on the sphere of dimension `n - 1`.
//!
//! Both integrals of the ratio are evaluated with the weight shifted to
//! `e^{κ (cos θ - 1)}`, so nothing overflows at large concentration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, MAX_NODES, PANEL_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadRule {
    GaussLegendreInCosTheta,
    CompositeSimpsonInTheta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    /// Starting node count; doubled until converged.
    pub node_count: usize,
    pub rule: QuadRule,
    pub rel_tol: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            node_count: 64,
            rule: QuadRule::GaussLegendreInCosTheta,
            rel_tol: 1e-12,
        }
    }
}

impl QuadSpec {
    pub fn with_tol(rel_tol: f64) -> Self {
        QuadSpec {
            rel_tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_count < 8 {
            return Err(Error::Domain(format!("node_count {} < 8", self.node_count)));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Domain(format!("rel_tol {} must be positive", self.rel_tol)));
        }
        Ok(())
    }

    /// Rule actually used in dimension `n`. Even dimensions always integrate
    /// in θ: the `u = cos θ` weight `(1-u²)^{(n-3)/2}` has a half-integer power there.
    pub fn effective_rule(&self, dim: usize) -> QuadRule {
        if dim % 2 == 0 {
            QuadRule::CompositeSimpsonInTheta
        } else {
            self.rule
        }
    }
}

/// A computed bracket average together with the parameters it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketAverage {
    pub kappa: f64,
    pub dim: usize,
    pub value: f64,
}

fn check_args(kappa: f64, dim: usize) -> Result<()> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!("kappa must be finite and >= 0, got {kappa}")));
    }
    if dim < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {dim}")));
    }
    Ok(())
}

/// Returns (∫γw, ∫|γ|w, ∫w) with the shifted weight.
fn weighted_sums<G>(gamma: &G, kappa: f64, dim: usize, rule: QuadRule, nodes: usize) -> Result<[f64; 3]>
where
    G: Fn(f64) -> f64 + ?Sized,
{
    let mut acc = [0.0; 3];
    let mut add = |c: f64, w: f64| -> Result<()> {
        let g = gamma(c);
        if !g.is_finite() {
            return Err(Error::Evaluation { at: c });
        }
        acc[0] += w * g;
        acc[1] += w * g.abs();
        acc[2] += w;
        Ok(())
    };
    match rule {
        QuadRule::GaussLegendreInCosTheta => {
            let p = quad::panel();
            let panels = (nodes / PANEL_ORDER).max(1);
            let h = 2.0 / panels as f64;
            let half_pow = (dim as f64 - 3.0) / 2.0;
            let odd = dim % 2 == 1;
            for k in 0..panels {
                let lo = -1.0 + k as f64 * h;
                for (x, w) in p.nodes.iter().zip(&p.weights) {
                    let u = lo + 0.5 * h * (x + 1.0);
                    let s2 = (1.0 - u) * (1.0 + u);
                    let jac = if odd {
                        s2.powi(((dim - 3) / 2) as i32)
                    } else {
                        s2.powf(half_pow)
                    };
                    add(u, 0.5 * h * w * jac * (kappa * (u - 1.0)).exp())?;
                }
            }
        }
        QuadRule::CompositeSimpsonInTheta => {
            let m = nodes + nodes % 2;
            let h = std::f64::consts::PI / m as f64;
            let pow = (dim - 2) as i32;
            for i in 0..=m {
                let t = i as f64 * h;
                let sw = if i == 0 || i == m {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let c = t.cos();
                let jac = if pow == 0 { 1.0 } else { t.sin().powi(pow) };
                add(c, sw * h / 3.0 * jac * (kappa * (c - 1.0)).exp())?;
            }
        }
    }
    Ok(acc)
}

/// `⟨γ(cos θ)⟩` under the von Mises–Fisher weight with concentration `kappa`.
pub fn vmf_average<G>(gamma: &G, kappa: f64, dim: usize, quad: &QuadSpec) -> Result<f64>
where
    G: Fn(f64) -> f64 + ?Sized,
{
    check_args(kappa, dim)?;
    quad.validate()?;
    let rule = quad.effective_rule(dim);
    let mut nodes = quad.node_count.max(PANEL_ORDER);
    let mut prev = weighted_sums(gamma, kappa, dim, rule, nodes)?;
    loop {
        nodes *= 2;
        if nodes > MAX_NODES {
            return Err(Error::Convergence { nodes: nodes / 2 });
        }
        let cur = weighted_sums(gamma, kappa, dim, rule, nodes)?;
        let num_ok = (cur[0] - prev[0]).abs() <= quad.rel_tol * cur[1];
        let den_ok = (cur[2] - prev[2]).abs() <= quad.rel_tol * cur[2];
        if num_ok && den_ok {
            return Ok(cur[0] / cur[2]);
        }
        prev = cur;
    }
}

pub fn bracket_average<G>(gamma: &G, kappa: f64, dim: usize, quad: &QuadSpec) -> Result<BracketAverage>
where
    G: Fn(f64) -> f64 + ?Sized,
{
    Ok(BracketAverage {
        kappa,
        dim,
        value: vmf_average(gamma, kappa, dim, quad)?,
    })
}

/// Order parameter `c₁(κ) = ⟨cos θ⟩`.
pub fn c1(kappa: f64, dim: usize, quad: &QuadSpec) -> Result<f64> {
    vmf_average(&|c: f64| c, kappa, dim, quad)
}

/// `⟨sin²θ⟩`, `⟨cos θ sin²θ⟩`, `⟨cos²θ sin²θ⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineMoments {
    pub sin2: f64,
    pub cos_sin2: f64,
    pub cos2_sin2: f64,
}

/// The three sine moments obtained from `c₁` by integration by parts, without
/// quadrating the moments themselves.
pub fn moment_identities(kappa: f64, dim: usize, quad: &QuadSpec) -> Result<SineMoments> {
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!(
            "moment identities need kappa > 0, got {kappa}"
        )));
    }
    let c = c1(kappa, dim, quad)?;
    Ok(moments_from_c1(c, kappa, dim))
}

pub fn moments_from_c1(c1: f64, kappa: f64, dim: usize) -> SineMoments {
    let n = dim as f64;
    let a = (n - 1.0) / kappa;
    let cs2 = a * (1.0 - n * c1 / kappa);
    SineMoments {
        sin2: a * c1,
        cos_sin2: cs2,
        cos2_sin2: a * (c1 - (n + 1.0) / kappa * (1.0 - n * c1 / kappa)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadSpec {
        QuadSpec::default()
    }

    #[test]
    fn normalization() {
        let v = vmf_average(&|_| 1.0, 5.0, 3, &q()).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn odd_integrand_vanishes_at_zero_concentration() {
        let v = vmf_average(&|c: f64| c, 0.0, 2, &q()).unwrap();
        assert!(v.abs() < 1e-15);
        assert_eq!(c1(0.0, 4, &q()).unwrap().abs() < 1e-15, true);
    }

    #[test]
    fn langevin_value_at_one() {
        let oracle = 1.0 / 1f64.tanh() - 1.0;
        let v = c1(1.0, 3, &q()).unwrap();
        assert!((v - oracle).abs() < 1e-13);
        assert!((v - 0.3130352).abs() < 1e-7);
    }

    #[test]
    fn identities_at_one_in_three_d() {
        let m = moment_identities(1.0, 3, &q()).unwrap();
        assert!((m.sin2 - 0.6260705).abs() < 1e-7);
        // 0.1217888 is the identity applied to the rounded c₁ = 0.3130352
        let c = 1.0 / 1f64.tanh() - 1.0;
        assert!((m.cos_sin2 - 2.0 * (1.0 - 3.0 * c)).abs() < 1e-13);
        assert!((m.cos_sin2 - 0.1217888).abs() < 1e-6);
        let cos2 = vmf_average(&|c: f64| c * c, 1.0, 3, &q()).unwrap();
        assert!((m.sin2 + cos2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identities_reject_zero_concentration() {
        assert!(matches!(
            moment_identities(0.0, 3, &q()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bad_arguments() {
        assert!(vmf_average(&|_| 1.0, -1.0, 3, &q()).is_err());
        assert!(vmf_average(&|_| 1.0, 1.0, 1, &q()).is_err());
        let bad = QuadSpec {
            node_count: 4,
            ..q()
        };
        assert!(vmf_average(&|_| 1.0, 1.0, 3, &bad).is_err());
    }

    #[test]
    fn non_finite_gamma() {
        let e = vmf_average(&|c: f64| 1.0 / (c - c), 1.0, 3, &q()).unwrap_err();
        assert!(matches!(e, Error::Evaluation { .. }));
    }

    #[test]
    fn budget_exhaustion_is_a_convergence_error() {
        let tight = QuadSpec {
            rel_tol: 1e-30,
            ..q()
        };
        let e = vmf_average(&|c: f64| (40.0 * c).sin(), 3.0, 3, &tight).unwrap_err();
        assert!(matches!(e, Error::Convergence { .. }));
    }

    #[test]
    fn simpson_rule_in_odd_dimension_agrees() {
        let s = QuadSpec {
            rule: QuadRule::CompositeSimpsonInTheta,
            rel_tol: 1e-13,
            ..q()
        };
        let a = c1(2.5, 5, &s).unwrap();
        let b = c1(2.5, 5, &q()).unwrap();
        assert!((a - b).abs() < 1e-11);
    }

    #[test]
    fn large_concentration_is_finite() {
        let v = c1(2000.0, 3, &q()).unwrap();
        assert!((v - (1.0 - 1.0 / 2000.0)).abs() < 1e-12);
    }
}
