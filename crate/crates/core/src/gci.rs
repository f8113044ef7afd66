//! Generalized collisional invariants.
//!
//! The profile `g(θ) = h(cos θ) sin θ` solves
//!
//! ```text
//! -sin^{2-n}θ e^{-κ cos θ} (sin^{n-2}θ e^{κ cos θ} g')' + (n-2) g / sin²θ = sin θ,
//! g(0) = g(π) = 0.
//! ```
//!
//! [`solve_gci`] handles any dimension with a conservative finite-difference
//! scheme. In two dimensions the problem is explicitly integrable; the closed
//! form and its variant for an orientation-dependent alignment rate are
//! provided as [`gci_2d_closed`] and [`gci_2d_turning`].

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::quad::{self, PANEL_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GciMethod {
    BvpNumeric,
    ClosedForm2d,
    ClosedForm2dTurning,
}

/// Discrete `g` on the interior nodes `θ_i = iπ/N`, `i = 1..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GciSolution {
    kappa: f64,
    dim: usize,
    intervals: usize,
    theta: Vec<f64>,
    g: Vec<f64>,
    method: GciMethod,
}

impl GciSolution {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    /// Number of subintervals `N` of `[0, π]`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }
    pub fn step(&self) -> f64 {
        PI / self.intervals as f64
    }
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
    pub fn g(&self) -> &[f64] {
        &self.g
    }
    pub fn method(&self) -> GciMethod {
        self.method
    }

    /// Tabulates the two-dimensional closed form on the same grid layout.
    pub fn tabulate_closed_2d(kappa: f64, intervals: usize) -> Result<Self> {
        check_grid(intervals)?;
        let h = PI / intervals as f64;
        let theta: Vec<f64> = (1..intervals).map(|i| i as f64 * h).collect();
        let g = theta
            .iter()
            .map(|&t| gci_2d_closed(kappa, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(GciSolution {
            kappa,
            dim: 2,
            intervals,
            theta,
            g,
            method: GciMethod::ClosedForm2d,
        })
    }

    /// Residual of the continuous operator applied with three-point
    /// differences on this grid, at interior nodes.
    pub fn residual(&self) -> Vec<f64> {
        let (rows, _) = assemble(self.kappa, self.dim, self.intervals);
        let m = self.g.len();
        (0..m)
            .map(|i| {
                let left = if i > 0 { self.g[i - 1] } else { 0.0 };
                let right = if i + 1 < m { self.g[i + 1] } else { 0.0 };
                let r = &rows[i];
                r.lower * left + r.diag * self.g[i] + r.upper * right - r.rhs
            })
            .collect()
    }
}

fn check_grid(intervals: usize) -> Result<()> {
    if intervals < 64 {
        return Err(Error::Domain(format!("grid must have at least 64 intervals, got {intervals}")));
    }
    Ok(())
}

struct Row {
    lower: f64,
    diag: f64,
    upper: f64,
    rhs: f64,
}

fn assemble(kappa: f64, dim: usize, intervals: usize) -> (Vec<Row>, Vec<f64>) {
    let h = PI / intervals as f64;
    let p = (dim - 2) as i32;
    // w(a)/w(b) with w = sin^{n-2} e^{κ cos}
    let ratio = |a: f64, b: f64| (a.sin() / b.sin()).powi(p) * (kappa * (a.cos() - b.cos())).exp();
    let h2 = h * h;
    let mut rows = Vec::with_capacity(intervals - 1);
    let mut theta = Vec::with_capacity(intervals - 1);
    for i in 1..intervals {
        let t = i as f64 * h;
        let rp = ratio(t + 0.5 * h, t);
        let rm = ratio(t - 0.5 * h, t);
        let s = t.sin();
        rows.push(Row {
            lower: -rm / h2,
            diag: (rp + rm) / h2 + (dim as f64 - 2.0) / (s * s),
            upper: -rp / h2,
            rhs: s,
        });
        theta.push(t);
    }
    (rows, theta)
}

/// Second-order finite-difference solve on `intervals` uniform subintervals.
pub fn solve_gci(kappa: f64, dim: usize, intervals: usize) -> Result<GciSolution> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!("kappa must be finite and >= 0, got {kappa}")));
    }
    if dim < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {dim}")));
    }
    check_grid(intervals)?;
    let (rows, theta) = assemble(kappa, dim, intervals);
    let g = thomas(&rows)?;
    if g.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::RefinementRequired {
            kappa,
            grid: intervals,
        });
    }
    Ok(GciSolution {
        kappa,
        dim,
        intervals,
        theta,
        g,
        method: GciMethod::BvpNumeric,
    })
}

fn thomas(rows: &[Row]) -> Result<Vec<f64>> {
    let m = rows.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut denom = rows[0].diag;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Numeric("singular tridiagonal system".into()));
    }
    c[0] = rows[0].upper / denom;
    d[0] = rows[0].rhs / denom;
    for i in 1..m {
        denom = rows[i].diag - rows[i].lower * c[i - 1];
        if denom.abs() < 1e-300 || !denom.is_finite() {
            return Err(Error::Numeric(format!("tridiagonal pivot {denom:e} at row {i}")));
        }
        c[i] = rows[i].upper / denom;
        d[i] = (rows[i].rhs - rows[i].lower * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite solution".into()));
    }
    Ok(x)
}

/// Two-dimensional closed form
/// `g(θ) = θ/κ - (π/κ) ∫₀^θ e^{-κ cos φ} dφ / ∫₀^π e^{-κ cos φ} dφ`.
pub fn gci_2d_closed(kappa: f64, theta: f64) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!("closed form needs kappa > 0, got {kappa}")));
    }
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::Domain(format!("theta {theta} outside [0, pi]")));
    }
    if theta == 0.0 || theta == PI {
        return Ok(0.0);
    }
    // e^{-κ(cos φ + 1)} ≤ 1
    let f = |p: f64| (-kappa * (p.cos() + 1.0)).exp();
    let partial = quad::integrate(f, 0.0, theta, 1e-13, 0.0)?;
    let rest = quad::integrate(f, theta, PI, 1e-13, 0.0)?;
    // θ - π P/(P+R) without the cancellation at small κ
    Ok((theta * rest - (PI - theta) * partial) / (partial + rest) / kappa)
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Orientation-dependent alignment rate `ν(μ)`, `μ = ω·Ω`, with constant noise `d`.
#[derive(Clone)]
pub struct TurningProfile {
    nu: ScalarFn,
    nu_prime: Option<ScalarFn>,
    nu_second: Option<ScalarFn>,
    d: f64,
}

impl fmt::Debug for TurningProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TurningProfile")
            .field("d", &self.d)
            .field("nu(1)", &(self.nu)(1.0))
            .finish_non_exhaustive()
    }
}

impl TurningProfile {
    /// Derivatives of `nu` fall back to finite differences.
    pub fn new(nu: impl Fn(f64) -> f64 + Send + Sync + 'static, d: f64) -> Self {
        TurningProfile {
            nu: Arc::new(nu),
            nu_prime: None,
            nu_second: None,
            d,
        }
    }

    pub fn with_derivatives(
        mut self,
        first: impl Fn(f64) -> f64 + Send + Sync + 'static,
        second: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.nu_prime = Some(Arc::new(first));
        self.nu_second = Some(Arc::new(second));
        self
    }

    /// `ν(μ) = c`.
    pub fn constant(c: f64, d: f64) -> Self {
        Self::new(move |_| c, d).with_derivatives(|_| 0.0, |_| 0.0)
    }

    /// `ν(μ) = 1 + γ(μ - 1)`, so `ν(1) = 1` and `ν'(1) = γ`.
    pub fn affine(gamma: f64, d: f64) -> Self {
        Self::new(move |mu| 1.0 + gamma * (mu - 1.0), d).with_derivatives(move |_| gamma, |_| 0.0)
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn nu(&self, mu: f64) -> f64 {
        (self.nu)(mu)
    }

    pub fn nu_prime(&self, mu: f64) -> f64 {
        match &self.nu_prime {
            Some(f) => f(mu),
            None => first_difference(&*self.nu, mu),
        }
    }

    pub fn nu_second(&self, mu: f64) -> f64 {
        match &self.nu_second {
            Some(f) => f(mu),
            None => second_difference(&*self.nu, mu),
        }
    }

    /// `ν > 0` on `(-1, 1]` (it may vanish at `μ = -1`) and `d > 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) || !self.d.is_finite() {
            return Err(Error::Domain(format!("noise d must be positive, got {}", self.d)));
        }
        for k in 1..=512 {
            let mu = -1.0 + 2.0 * k as f64 / 512.0;
            let v = self.nu(mu);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("nu({mu}) = {v} is not positive")));
            }
        }
        if !(self.nu(-1.0) >= 0.0) {
            return Err(Error::Domain("nu(-1) is negative".into()));
        }
        Ok(())
    }
}

const FD_STEP: f64 = 1e-4;

// Stencils stay inside [-1, 1].
fn first_difference(f: &(dyn Fn(f64) -> f64 + Send + Sync), mu: f64) -> f64 {
    let h = FD_STEP;
    if mu + h > 1.0 {
        (3.0 * f(mu) - 4.0 * f(mu - h) + f(mu - 2.0 * h)) / (2.0 * h)
    } else if mu - h < -1.0 {
        (-3.0 * f(mu) + 4.0 * f(mu + h) - f(mu + 2.0 * h)) / (2.0 * h)
    } else {
        (f(mu + h) - f(mu - h)) / (2.0 * h)
    }
}

fn second_difference(f: &(dyn Fn(f64) -> f64 + Send + Sync), mu: f64) -> f64 {
    let h = 1e-3;
    if mu + h > 1.0 {
        (2.0 * f(mu) - 5.0 * f(mu - h) + 4.0 * f(mu - 2.0 * h) - f(mu - 3.0 * h)) / (h * h)
    } else if mu - h < -1.0 {
        (2.0 * f(mu) - 5.0 * f(mu + h) + 4.0 * f(mu + 2.0 * h) - f(mu + 3.0 * h)) / (h * h)
    } else {
        (f(mu + h) - 2.0 * f(mu) + f(mu - h)) / (h * h)
    }
}

/// Spectral tabulation of the two-dimensional turning invariant on
/// Gauss–Legendre panels of `[0, π]`.
#[derive(Debug, Clone)]
pub struct TurningGci {
    panels: usize,
    theta: Vec<f64>,
    weights: Vec<f64>,
    /// `κ̂(cos θ) - κ̂(1)` at the nodes.
    exponent: Vec<f64>,
    g: Vec<f64>,
}

const MAX_TURNING_PANELS: usize = 1024;

impl TurningGci {
    pub fn new(profile: &TurningProfile) -> Result<Self> {
        Self::with_tolerance(profile, 1e-13)
    }

    /// Doubles the panel count until probe values agree to `rel_tol`.
    pub fn with_tolerance(profile: &TurningProfile, rel_tol: f64) -> Result<Self> {
        profile.validate()?;
        let mut panels = 8;
        let mut prev = Self::build(profile, panels)?;
        loop {
            panels *= 2;
            let cur = Self::build(profile, panels)?;
            let probe = |s: &Self| [s.eval(PI / 3.0), s.eval(PI / 2.0), s.eval(2.0 * PI / 3.0), s.moment(|_| 1.0)];
            let (a, b) = (probe(&prev), probe(&cur));
            let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= rel_tol * scale) {
                return Ok(cur);
            }
            if panels >= MAX_TURNING_PANELS {
                return Err(Error::Convergence {
                    nodes: panels * PANEL_ORDER,
                });
            }
            prev = cur;
        }
    }

    fn build(profile: &TurningProfile, panels: usize) -> Result<Self> {
        let p = quad::panel();
        let m = PANEL_ORDER;
        let h = PI / panels as f64;
        let half = 0.5 * h;
        let total = panels * m;
        let mut theta = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for k in 0..panels {
            let lo = k as f64 * h;
            for (x, w) in p.nodes.iter().zip(&p.weights) {
                theta.push(lo + half * (x + 1.0));
                weights.push(half * w);
            }
        }
        let d = profile.d;
        // d/dθ κ̂(cos θ) = -ν(cos θ) sin θ / d; start from κ̂(1) - κ̂(1) = 0.
        let rate: Vec<f64> = theta.iter().map(|&t| profile.nu(t.cos()) * t.sin() / d).collect();
        if rate.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation { at: f64::NAN });
        }
        let exponent: Vec<f64> = cumulative_left(&rate, panels, half).iter().map(|v| -v).collect();
        let spread = -(exponent[total - 1]);
        if spread > 600.0 {
            return Err(Error::Domain(format!(
                "turning exponent range {spread:.1} too large for double precision"
            )));
        }
        // F(θ) = ∫_θ^π sin ϕ e^{E(ϕ)} dϕ, accumulated from the right
        let s_e: Vec<f64> = theta.iter().zip(&exponent).map(|(t, e)| t.sin() * e.exp()).collect();
        let big_f = cumulative_right(&s_e, panels, half);
        let inv: Vec<f64> = exponent.iter().map(|e| (-e).exp()).collect();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..total {
            num += weights[i] * inv[i] * big_f[i];
            den += weights[i] * inv[i];
        }
        let c = num / den;
        let slope: Vec<f64> = (0..total).map(|i| inv[i] * big_f[i] - c * inv[i]).collect();
        let g = cumulative_left(&slope, panels, half);
        Ok(TurningGci {
            panels,
            theta,
            weights,
            exponent,
            g,
        })
    }

    /// `g(θ)`; exactly zero at both ends.
    pub fn eval(&self, theta: f64) -> f64 {
        if theta <= 0.0 || theta >= PI {
            return 0.0;
        }
        let h = PI / self.panels as f64;
        let k = ((theta / h) as usize).min(self.panels - 1);
        let t = (theta - k as f64 * h) / h * 2.0 - 1.0;
        let slice = &self.g[k * PANEL_ORDER..(k + 1) * PANEL_ORDER];
        quad::panel().interpolate(slice, t)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.theta
    }

    pub fn g_nodes(&self) -> &[f64] {
        &self.g
    }

    /// `∫ f(θ) g(θ) sin θ e^{κ̂(cos θ) - κ̂(1)} dθ`, the unnormalized turning tilde moment
    /// without the `ν` factor.
    pub fn moment<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mut s = 0.0;
        for i in 0..self.theta.len() {
            let t = self.theta[i];
            s += self.weights[i] * f(t) * self.g[i] * t.sin() * self.exponent[i].exp();
        }
        s
    }

    /// `∫ f(θ) e^{κ̂(cos θ) - κ̂(1)} dθ`.
    pub fn equilibrium_moment<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mut s = 0.0;
        for i in 0..self.theta.len() {
            s += self.weights[i] * f(self.theta[i]) * self.exponent[i].exp();
        }
        s
    }
}

fn cumulative_left(values: &[f64], panels: usize, half: f64) -> Vec<f64> {
    let p = quad::panel();
    let m = PANEL_ORDER;
    let mut out = vec![0.0; values.len()];
    let mut base = 0.0;
    for k in 0..panels {
        let v = &values[k * m..(k + 1) * m];
        for i in 0..m {
            let s: f64 = (0..m).map(|j| p.cumulative[i][j] * v[j]).sum();
            out[k * m + i] = base + half * s;
        }
        base += half * (0..m).map(|j| p.weights[j] * v[j]).sum::<f64>();
    }
    out
}

fn cumulative_right(values: &[f64], panels: usize, half: f64) -> Vec<f64> {
    let p = quad::panel();
    let m = PANEL_ORDER;
    let mut out = vec![0.0; values.len()];
    let mut base = 0.0;
    for k in (0..panels).rev() {
        let v = &values[k * m..(k + 1) * m];
        for i in 0..m {
            // ∫_{x_i}^{1} ℓ_j = ∫_{-1}^{x_{m-1-i}} ℓ_{m-1-j} by symmetry of the nodes
            let s: f64 = (0..m).map(|j| p.cumulative[m - 1 - i][m - 1 - j] * v[j]).sum();
            out[k * m + i] = base + half * s;
        }
        base += half * (0..m).map(|j| p.weights[j] * v[j]).sum::<f64>();
    }
    out
}

/// Turning invariant `g(θ)` for an orientation-dependent alignment rate.
pub fn gci_2d_turning(profile: &TurningProfile, theta: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::Domain(format!("theta {theta} outside [0, pi]")));
    }
    Ok(TurningGci::new(profile)?.eval(theta))
}

/// `h(μ) = g(arccos μ) / sqrt(1 - μ²)` on the open interval.
#[derive(Debug, Clone)]
pub struct HProfile {
    interp: Pchip,
}

impl HProfile {
    pub fn eval(&self, mu: f64) -> Result<f64> {
        if !(mu.abs() < 1.0) {
            return Err(Error::Domain(format!("h is defined on (-1, 1), got mu = {mu}")));
        }
        Ok(self.interp.eval(mu.acos()))
    }
}

/// Monotone cubic interpolant of `g / sin θ` in θ.
pub fn h_from_g(sol: &GciSolution) -> HProfile {
    let th = sol.theta();
    let hv: Vec<f64> = th.iter().zip(sol.g()).map(|(t, g)| g / t.sin()).collect();
    let m = hv.len();
    // h is even in θ about both ends
    let end = |t1: f64, t2: f64, h1: f64, h2: f64| (t2 * t2 * h1 - t1 * t1 * h2) / (t2 * t2 - t1 * t1);
    let h0 = end(th[0], th[1], hv[0], hv[1]);
    let hpi = end(PI - th[m - 1], PI - th[m - 2], hv[m - 1], hv[m - 2]);
    let mut x = Vec::with_capacity(m + 2);
    let mut y = Vec::with_capacity(m + 2);
    x.push(0.0);
    y.push(h0);
    x.extend_from_slice(th);
    y.extend_from_slice(&hv);
    x.push(PI);
    y.push(hpi);
    HProfile {
        interp: Pchip::new(x, y),
    }
}
