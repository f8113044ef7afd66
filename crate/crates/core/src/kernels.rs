//! Separable observation kernels `K(r, γ) = scale · radial(r) · angular(γ)`
//! and their anisotropy constant `α = k₁ / K₀`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::vmf::QuadSpec;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialProfile {
    /// `1` on `r ≤ radius`.
    Indicator { radius: f64 },
    /// `e^{-r²/(2 width²)}`, integrated out to `12 width`.
    Gaussian { width: f64 },
    /// `1 - r/radius` on `r ≤ radius`.
    Hat { radius: f64 },
    #[serde(skip)]
    Custom { f: ScalarFn, cutoff: f64 },
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum AngularProfile {
    Uniform,
    /// `1` on `γ ≥ 0`.
    Forward,
    /// `1` on `γ ≤ 0`.
    Backward,
    /// `1` on `γ ≥ cos(half_angle)`.
    Cone { half_angle: f64 },
    /// `1 + strength·γ`, `|strength| ≤ 1`.
    Cardioid { strength: f64 },
    /// `breaks` lists the γ values where `f` may jump.
    #[serde(skip)]
    Custom { f: ScalarFn, breaks: Vec<f64> },
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialProfile::Indicator { radius } => write!(f, "Indicator {{ radius: {radius} }}"),
            RadialProfile::Gaussian { width } => write!(f, "Gaussian {{ width: {width} }}"),
            RadialProfile::Hat { radius } => write!(f, "Hat {{ radius: {radius} }}"),
            RadialProfile::Custom { cutoff, .. } => write!(f, "Custom {{ cutoff: {cutoff} }}"),
        }
    }
}

impl fmt::Debug for AngularProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AngularProfile::Uniform => write!(f, "Uniform"),
            AngularProfile::Forward => write!(f, "Forward"),
            AngularProfile::Backward => write!(f, "Backward"),
            AngularProfile::Cone { half_angle } => write!(f, "Cone {{ half_angle: {half_angle} }}"),
            AngularProfile::Cardioid { strength } => write!(f, "Cardioid {{ strength: {strength} }}"),
            AngularProfile::Custom { breaks, .. } => write!(f, "Custom {{ breaks: {breaks:?} }}"),
        }
    }
}

impl RadialProfile {
    pub fn value(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Indicator { radius } => (r <= *radius) as u8 as f64,
            RadialProfile::Gaussian { width } => (-0.5 * (r / width).powi(2)).exp(),
            RadialProfile::Hat { radius } => (1.0 - r / radius).max(0.0),
            RadialProfile::Custom { f, cutoff } => {
                if r <= *cutoff {
                    f(r)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn cutoff_radius(&self) -> f64 {
        match self {
            RadialProfile::Indicator { radius } | RadialProfile::Hat { radius } => *radius,
            RadialProfile::Gaussian { width } => 12.0 * width,
            RadialProfile::Custom { cutoff, .. } => *cutoff,
        }
    }

    /// `r ↦ radial(r / s)`.
    pub fn dilated(&self, s: f64) -> RadialProfile {
        match self {
            RadialProfile::Indicator { radius } => RadialProfile::Indicator { radius: radius * s },
            RadialProfile::Gaussian { width } => RadialProfile::Gaussian { width: width * s },
            RadialProfile::Hat { radius } => RadialProfile::Hat { radius: radius * s },
            RadialProfile::Custom { f, cutoff } => {
                let f = f.clone();
                RadialProfile::Custom {
                    f: Arc::new(move |r| f(r / s)),
                    cutoff: cutoff * s,
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let c = self.cutoff_radius();
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Domain(format!("radial profile needs a positive finite extent, got {c}")));
        }
        Ok(())
    }
}

impl AngularProfile {
    pub fn value(&self, g: f64) -> f64 {
        match self {
            AngularProfile::Uniform => 1.0,
            AngularProfile::Forward => (g >= 0.0) as u8 as f64,
            AngularProfile::Backward => (g <= 0.0) as u8 as f64,
            AngularProfile::Cone { half_angle } => (g >= half_angle.cos()) as u8 as f64,
            AngularProfile::Cardioid { strength } => 1.0 + strength * g,
            AngularProfile::Custom { f, .. } => f(g),
        }
    }

    /// γ values where the profile may be discontinuous.
    fn jumps(&self) -> Vec<f64> {
        match self {
            AngularProfile::Forward | AngularProfile::Backward => vec![0.0],
            AngularProfile::Cone { half_angle } => vec![half_angle.cos()],
            AngularProfile::Custom { breaks, .. } => breaks.clone(),
            _ => Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            AngularProfile::Cone { half_angle } if !(*half_angle > 0.0 && *half_angle <= PI) => Err(
                Error::Domain(format!("cone half-angle must lie in (0, π], got {half_angle}")),
            ),
            AngularProfile::Cardioid { strength } if !(strength.abs() <= 1.0) => Err(Error::Domain(
                format!("cardioid strength must satisfy |a| <= 1, got {strength}"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub radial: RadialProfile,
    pub angular: AngularProfile,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn new(radial: RadialProfile, angular: AngularProfile) -> Self {
        KernelSpec {
            radial,
            angular,
            scale: 1.0,
        }
    }

    /// Forward half-ball of the given radius.
    pub fn forward_ball(radius: f64) -> Self {
        Self::new(RadialProfile::Indicator { radius }, AngularProfile::Forward)
    }

    pub fn ball(radius: f64) -> Self {
        Self::new(RadialProfile::Indicator { radius }, AngularProfile::Uniform)
    }

    /// `K(r, γ)`.
    pub fn value(&self, r: f64, gamma: f64) -> f64 {
        self.scale * self.radial.value(r) * self.angular.value(gamma)
    }

    pub fn cutoff_radius(&self) -> f64 {
        self.radial.cutoff_radius()
    }

    pub fn scaled(&self, c: f64) -> Self {
        KernelSpec {
            scale: self.scale * c,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::Domain(format!("kernel scale must be positive, got {}", self.scale)));
        }
        self.radial.validate()?;
        self.angular.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelMoments {
    pub k0: f64,
    pub k1: f64,
    pub alpha: f64,
}

/// Area of the unit sphere `S^{m}` in `R^{m+1}`.
fn sphere_area(m: usize) -> f64 {
    let h = (m as f64 + 1.0) / 2.0;
    2.0 * PI.powf(h) / statrs::function::gamma::gamma(h)
}

/// `K₀ = ∫ K dξ` and `k₁` with `∫ K ξ dξ = k₁ ω` in dimension `dim`.
pub fn kernel_moments(k: &KernelSpec, dim: usize, quad: &QuadSpec) -> Result<KernelMoments> {
    if dim < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {dim}")));
    }
    k.validate()?;
    quad.validate()?;
    let tol = quad.rel_tol;
    let cut = k.cutoff_radius();
    let pw = (dim - 1) as i32;
    let r0 = quad::integrate(|r| r.powi(pw) * k.radial.value(r), 0.0, cut, tol, 0.0)?;
    let r1 = quad::integrate(|r| r.powi(pw + 1) * k.radial.value(r), 0.0, cut, tol, 0.0)?;

    // fold φ ∈ [0, π] onto [0, π/2]: a(γ) ± a(-γ), γ = cos φ
    let mut breaks = vec![0.0, FRAC_PI_2];
    for g in k.angular.jumps() {
        let phi = g.clamp(-1.0, 1.0).acos();
        let folded = phi.min(PI - phi);
        if folded > 0.0 && folded < FRAC_PI_2 {
            breaks.push(folded);
        }
    }
    breaks.sort_by(f64::total_cmp);
    let sw = (dim - 2) as i32;
    let a = &k.angular;
    let a0 = quad::integrate_with_breaks(
        |p: f64| {
            let c = p.cos();
            (a.value(c) + a.value(-c)) * p.sin().powi(sw)
        },
        &breaks,
        tol,
        0.0,
    )?;
    let a1 = quad::integrate_with_breaks(
        |p: f64| {
            let c = p.cos();
            (a.value(c) - a.value(-c)) * c * p.sin().powi(sw)
        },
        &breaks,
        tol,
        0.0,
    )?;
    let s = sphere_area(dim - 2) * k.scale;
    let k0 = s * r0 * a0;
    if !(k0 > 0.0) {
        return Err(Error::DegenerateKernel(k0));
    }
    let k1 = s * r1 * a1;
    Ok(KernelMoments {
        k0,
        k1,
        alpha: k1 / k0,
    })
}

/// Rescales the kernel to unit mass.
pub fn normalize_density_kernel(k: &KernelSpec, dim: usize) -> Result<KernelSpec> {
    let m = kernel_moments(k, dim, &QuadSpec::default())?;
    Ok(k.scaled(1.0 / m.k0))
}
