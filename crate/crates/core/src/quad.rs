//! One-dimensional quadrature primitives: Gauss–Legendre nodes, composite
//! panels with adaptive doubling, and per-panel spectral integration and
//! interpolation matrices.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Points per Gauss–Legendre panel.
pub const PANEL_ORDER: usize = 16;

/// Hard cap on nodes for any adaptive rule.
pub const MAX_NODES: usize = 1 << 14;

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..(m + 1) / 2 {
        // Tricomi initial guess, then Newton on P_m.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

/// P_m(z) and P_m'(z).
fn legendre_with_derivative(m: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

fn legendre_all(m: usize, z: f64) -> Vec<f64> {
    let mut p = vec![0.0; m + 1];
    p[0] = 1.0;
    if m >= 1 {
        p[1] = z;
    }
    for k in 2..=m {
        p[k] = ((2 * k - 1) as f64 * z * p[k - 1] - (k - 1) as f64 * p[k - 2]) / k as f64;
    }
    p
}

/// Reference panel data for [`PANEL_ORDER`]-point Gauss–Legendre.
pub struct Panel {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `cumulative[i][j]` = integral over [-1, x_i] of the j-th Lagrange basis polynomial.
    pub cumulative: Vec<Vec<f64>>,
    bary: Vec<f64>,
}

impl Panel {
    fn build(m: usize) -> Self {
        let (nodes, weights) = gauss_legendre(m);
        let pj: Vec<Vec<f64>> = nodes.iter().map(|&x| legendre_all(m, x)).collect();
        let mut cumulative = vec![vec![0.0; m]; m];
        for i in 0..m {
            let pi = &pj[i];
            // integral over [-1, x] of P_k
            let mut ik = vec![0.0; m];
            ik[0] = nodes[i] + 1.0;
            for k in 1..m {
                ik[k] = (pi[k + 1] - pi[k - 1]) / (2 * k + 1) as f64;
            }
            for j in 0..m {
                let mut s = 0.0;
                for k in 0..m {
                    s += (2 * k + 1) as f64 / 2.0 * pj[j][k] * ik[k];
                }
                cumulative[i][j] = weights[j] * s;
            }
        }
        let bary = (0..m)
            .map(|j| {
                let mut p = 1.0;
                for k in 0..m {
                    if k != j {
                        p *= nodes[j] - nodes[k];
                    }
                }
                1.0 / p
            })
            .collect();
        Panel {
            nodes,
            weights,
            cumulative,
            bary,
        }
    }

    /// Barycentric interpolation of nodal `values` at reference point `t`.
    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..self.nodes.len() {
            let d = t - self.nodes[j];
            if d == 0.0 {
                return values[j];
            }
            let c = self.bary[j] / d;
            num += c * values[j];
            den += c;
        }
        num / den
    }
}

pub fn panel() -> &'static Panel {
    static PANEL: OnceLock<Panel> = OnceLock::new();
    PANEL.get_or_init(|| Panel::build(PANEL_ORDER))
}

/// Composite Gauss–Legendre over `panels` equal panels of [a, b].
pub fn composite_gl<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let p = panel();
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let mut s = 0.0;
        for (x, w) in p.nodes.iter().zip(&p.weights) {
            s += w * f(lo + 0.5 * h * (x + 1.0));
        }
        total += 0.5 * h * s;
    }
    total
}

/// Adaptive composite Gauss–Legendre: doubles the panel count until two
/// successive sums agree to `rel_tol` (relative to the integral of |f|)
/// or `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut panels = 2;
    let eval = |x: f64| -> Result<(f64, f64)> {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::Evaluation { at: x });
        }
        Ok((v, v.abs()))
    };
    let sum = |panels: usize| -> Result<(f64, f64)> {
        let p = panel();
        let h = (b - a) / panels as f64;
        let (mut s, mut sa) = (0.0, 0.0);
        for k in 0..panels {
            let lo = a + k as f64 * h;
            for (x, w) in p.nodes.iter().zip(&p.weights) {
                let (v, va) = eval(lo + 0.5 * h * (x + 1.0))?;
                s += w * v;
                sa += w * va;
            }
        }
        Ok((0.5 * h * s, 0.5 * h * sa))
    };
    let (mut prev, _) = sum(panels)?;
    loop {
        panels *= 2;
        if panels * PANEL_ORDER > MAX_NODES {
            return Err(Error::Convergence {
                nodes: panels / 2 * PANEL_ORDER,
            });
        }
        let (cur, cur_abs) = sum(panels)?;
        if (cur - prev).abs() <= rel_tol * cur_abs.abs() || (cur - prev).abs() <= abs_tol {
            return Ok(cur);
        }
        prev = cur;
    }
}

/// [`integrate`] over consecutive segments of `breaks`, so discontinuities
/// at the break points never fall inside a panel.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            total += integrate(&f, w[0], w[1], rel_tol, abs_tol)?;
        }
    }
    Ok(total)
}

/// Composite Simpson on `intervals` (even) subintervals.
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
