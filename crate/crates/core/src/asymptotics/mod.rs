//! Small- and large-κ expansions of the GCI profile and of the averages built
//! from it.
//!
//! Polynomials in `X = cos θ` live in the basis `(1-X)^k` with exact rational
//! coefficients. Series are produced in exact arithmetic and converted to
//! floating point only when packed into an [`AsymptoticSeries`].

pub mod poly;
pub mod rseries;

use num::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
pub use poly::PolyBasis1mX;
use poly::{q, qi, to_f64, Q};
use rseries::RatSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    KappaToZero,
    KappaToInfinity,
}

/// `κ^scale_exponent · Σ c_p κ^p + O(κ^scale_exponent · κ^order_of_remainder)`.
///
/// Powers are the actual exponents of κ: increasing for `KappaToZero`,
/// decreasing (`0, -1, -2, …`) for `KappaToInfinity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSeries {
    pub regime: Regime,
    pub scale_exponent: f64,
    pub terms: Vec<(i32, f64)>,
    pub order_of_remainder: i32,
}

impl AsymptoticSeries {
    pub fn eval(&self, kappa: f64) -> f64 {
        let s: f64 = self.terms.iter().map(|&(p, c)| c * kappa.powi(p)).sum();
        if self.scale_exponent == 0.0 {
            s
        } else {
            s * kappa.powf(self.scale_exponent)
        }
    }

    /// Coefficient of `κ^power`; zero for powers inside the known range but
    /// absent from `terms`, `None` at or beyond the remainder.
    pub fn coefficient(&self, power: i32) -> Option<f64> {
        let known = match self.regime {
            Regime::KappaToZero => power < self.order_of_remainder,
            Regime::KappaToInfinity => power > self.order_of_remainder,
        };
        if !known {
            return None;
        }
        Some(
            self.terms
                .iter()
                .find(|t| t.0 == power)
                .map_or(0.0, |t| t.1),
        )
    }

    pub fn powers_monotone(&self) -> bool {
        self.terms.windows(2).all(|w| match self.regime {
            Regime::KappaToZero => w[0].0 < w[1].0,
            Regime::KappaToInfinity => w[0].0 > w[1].0,
        })
    }

    /// Expansion of `self / den`, both in the same regime.
    pub fn ratio(&self, den: &AsymptoticSeries) -> Result<AsymptoticSeries> {
        if self.regime != den.regime {
            return Err(Error::Domain("series in different regimes".into()));
        }
        let sign = match self.regime {
            Regime::KappaToZero => 1,
            Regime::KappaToInfinity => -1,
        };
        // work in t = κ^sign, where both series are ordinary power series
        let to_t = |s: &AsymptoticSeries| -> Option<(i32, Vec<f64>, i32)> {
            let v = s.terms.iter().filter(|t| t.1 != 0.0).map(|t| t.0 * sign).min()?;
            let prec = s.order_of_remainder * sign;
            let mut c = vec![0.0; (prec - v).max(0) as usize];
            for &(p, a) in &s.terms {
                let e = p * sign - v;
                if e >= 0 && (e as usize) < c.len() {
                    c[e as usize] = a;
                }
            }
            Some((v, c, prec))
        };
        let (vd, d, _) = to_t(den).ok_or_else(|| Error::Numeric("division by a zero series".into()))?;
        let Some((vn, n, _)) = to_t(self) else {
            return Ok(AsymptoticSeries {
                terms: Vec::new(),
                scale_exponent: self.scale_exponent - den.scale_exponent,
                ..self.clone()
            });
        };
        let len = n.len().min(d.len());
        let mut c: Vec<f64> = Vec::with_capacity(len);
        for k in 0..len {
            let mut acc = n[k];
            for j in 1..=k {
                acc -= d[j] * c[k - j];
            }
            c.push(acc / d[0]);
        }
        let v = vn - vd;
        let mut out = AsymptoticSeries {
            regime: self.regime,
            scale_exponent: self.scale_exponent - den.scale_exponent,
            terms: c
                .into_iter()
                .enumerate()
                .map(|(k, a)| ((v + k as i32) * sign, a))
                .collect(),
            order_of_remainder: (v + len as i32) * sign,
        };
        out.fold_scale();
        Ok(out)
    }

    fn fold_scale(&mut self) {
        let s = self.scale_exponent;
        if s != 0.0 && s.fract() == 0.0 {
            let k = s as i32;
            for t in &mut self.terms {
                t.0 += k;
            }
            self.order_of_remainder += k;
            self.scale_exponent = 0.0;
        }
    }

    fn from_rat(regime: Regime, series: &RatSeries, from: i64, keep_zeros: bool) -> Self {
        let sign = match regime {
            Regime::KappaToZero => 1,
            Regime::KappaToInfinity => -1,
        };
        AsymptoticSeries {
            regime,
            scale_exponent: 0.0,
            terms: series
                .terms_from(from)
                .into_iter()
                .filter(|(_, c)| keep_zeros || !c.is_zero())
                .map(|(e, c)| ((e * sign) as i32, to_f64(&c)))
                .collect(),
            order_of_remainder: (series.prec() * sign) as i32,
        }
    }
}

/// `L(P) = -(1-X²)P'' + (n+1)XP' + (n-1)P`.
pub fn op_l(p: &PolyBasis1mX, n: usize) -> PolyBasis1mX {
    let n = n as i64;
    let mut c = vec![Q::zero(); p.coeffs().len()];
    for (k, a) in p.coeffs().iter().enumerate() {
        let ki = k as i64;
        c[k] += a * qi((n + ki - 1) * (ki + 1));
        if k > 0 {
            c[k - 1] -= a * qi(ki * (n + 2 * ki - 1));
        }
    }
    PolyBasis1mX::new(c)
}

/// `D(P) = -(1-X²)P' + XP`.
pub fn op_d(p: &PolyBasis1mX) -> PolyBasis1mX {
    let mut c = vec![Q::zero(); p.coeffs().len() + 1];
    for (k, a) in p.coeffs().iter().enumerate() {
        let ki = k as i64;
        c[k] += a * qi(2 * ki + 1);
        c[k + 1] -= a * qi(ki + 1);
    }
    PolyBasis1mX::new(c)
}

/// Solves `L(P) = rhs` exactly, from the top degree down.
pub fn solve_l(rhs: &PolyBasis1mX, n: usize) -> PolyBasis1mX {
    let Some(m) = rhs.degree() else {
        return PolyBasis1mX::zero();
    };
    let n = n as i64;
    let mut b = vec![Q::zero(); m + 1];
    for k in (0..=m).rev() {
        let ki = k as i64;
        let mut acc = rhs.coeff(k);
        if k < m {
            acc += &b[k + 1] * qi((ki + 1) * (n + 2 * ki + 1));
        }
        b[k] = acc / qi((n + ki - 1) * (ki + 1));
    }
    PolyBasis1mX::new(b)
}

/// Solves `D(P) ≡ rhs (mod (1-X)^m)` with `deg P < m`, from the bottom up.
pub fn solve_d_mod(rhs: &PolyBasis1mX, m: usize) -> PolyBasis1mX {
    let mut a: Vec<Q> = Vec::with_capacity(m);
    for k in 0..m {
        let ki = k as i64;
        let mut acc = rhs.coeff(k);
        if k > 0 {
            acc += &a[k - 1] * qi(ki);
        }
        a.push(acc / qi(2 * ki + 1));
    }
    PolyBasis1mX::new(a)
}

/// `H₀, …, H_{p_max}` of the small-κ expansion `h_κ = Σ κ^p H_p`.
pub fn compute_h(p_max: usize, n: usize) -> Vec<PolyBasis1mX> {
    assert!(n >= 2, "dimension must be >= 2");
    let mut out = vec![solve_l(&PolyBasis1mX::constant(Q::one()), n)];
    for p in 0..p_max {
        let rhs = -&op_d(&out[p]);
        out.push(solve_l(&rhs, n));
    }
    out
}

/// `G₁^N, …, G_N^N` of the large-κ expansion `h_κ = Σ κ^{-p} G_p^N`.
pub fn compute_g(big_n: usize, n: usize) -> Vec<PolyBasis1mX> {
    assert!(big_n >= 1, "N must be >= 1");
    assert!(n >= 2, "dimension must be >= 2");
    let mut out = vec![solve_d_mod(&PolyBasis1mX::constant(Q::one()), big_n)];
    for p in 1..big_n {
        let rhs = -&op_l(&out[p - 1], n);
        out.push(solve_d_mod(&rhs, big_n - p));
    }
    out
}

/// Watson's lemma for `∫₀^∞ t^β (Σ a_i t^i) e^{-κt} dt` as κ → ∞.
pub fn watson_expand(local_coeffs: &[f64], beta: f64, order: usize) -> Result<AsymptoticSeries> {
    if !(beta > -1.0) {
        return Err(Error::Domain(format!("beta must be > -1, got {beta}")));
    }
    let m = order.min(local_coeffs.len());
    let mut s = AsymptoticSeries {
        regime: Regime::KappaToInfinity,
        scale_exponent: -(beta + 1.0),
        terms: (0..m)
            .map(|i| {
                let g = gamma(beta + i as f64 + 1.0);
                (-(i as i32), local_coeffs[i] * g)
            })
            .collect(),
        order_of_remainder: -(m as i32),
    };
    s.fold_scale();
    Ok(s)
}

// exact on small integers, where the Lanczos approximation is off by ulps
fn gamma(x: f64) -> f64 {
    if x.fract() == 0.0 && (1.0..=30.0).contains(&x) {
        (1..x as u32).fold(1.0, |acc, k| acc * k as f64)
    } else {
        statrs::function::gamma::gamma(x)
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {n}")));
    }
    Ok(())
}

/// `E₀[X^m]`, the uniform-sphere moment of `cos θ`.
fn e0_moment(m: usize, n: usize) -> Q {
    if m % 2 == 1 {
        return Q::zero();
    }
    (0..m / 2).fold(Q::one(), |acc, i| acc * q(2 * i as i64 + 1, (n + 2 * i) as i64))
}

/// `[P]_κ / [1]_0 = Σ_q κ^q E₀[P X^q] / q!`, known through `κ^{prec-1}`.
fn bracket_small(p: &PolyBasis1mX, n: usize, prec: usize) -> RatSeries {
    let mono = p.to_monomial();
    let mut fact = Q::one();
    let coeffs = (0..prec)
        .map(|qq| {
            if qq > 0 {
                fact *= qi(qq as i64);
            }
            let s = mono
                .iter()
                .enumerate()
                .fold(Q::zero(), |acc, (j, c)| acc + c * e0_moment(j + qq, n));
            s / &fact
        })
        .collect();
    RatSeries::new(0, coeffs)
}

/// Local expansion data of the large-κ weight: `β = (n-3)/2` and the
/// coefficients of `(1 - Y/2)^β`.
fn large_weight(n: usize, len: usize) -> (Q, Vec<Q>) {
    let beta = q(n as i64 - 3, 2);
    let mut c = Vec::with_capacity(len);
    let mut cur = Q::one();
    for i in 0..len {
        c.push(cur.clone());
        cur = cur * (&beta - qi(i as i64)) / qi(i as i64 + 1) * q(-1, 2);
    }
    (beta, c)
}

/// `(x)_m`
fn pochhammer(x: &Q, m: usize) -> Q {
    (0..m).fold(Q::one(), |acc, i| acc * (x + qi(i as i64)))
}

/// `[P]_κ` at large κ up to the common factor `2^β e^κ Γ(β+1) κ^{-β-1}`,
/// as a series in `s = 1/κ` known through `s^{prec-1}`.
fn bracket_large(p: &PolyBasis1mX, n: usize, prec: usize) -> RatSeries {
    let (beta, c) = large_weight(n, prec);
    let b1 = &beta + Q::one();
    let mut out = vec![Q::zero(); prec];
    for (j, pj) in p.coeffs().iter().enumerate() {
        if pj.is_zero() {
            continue;
        }
        for (i, ci) in c.iter().enumerate() {
            let e = j + i;
            if e >= prec {
                break;
            }
            out[e] += pj * ci * pochhammer(&b1, e);
        }
    }
    RatSeries::new(0, out)
}

fn sin2() -> PolyBasis1mX {
    // 1 - X² = 2Y - Y²
    PolyBasis1mX::new(vec![qi(0), qi(2), qi(-1)])
}

/// Exact `c₁` series: in κ for `KappaToZero`, in `1/κ` for `KappaToInfinity`,
/// known through exponent `order - 1` of the respective variable.
pub fn c1_exact(n: usize, regime: Regime, order: usize) -> Result<RatSeries> {
    check_dim(n)?;
    match regime {
        Regime::KappaToZero => {
            let num = bracket_small(&PolyBasis1mX::x(), n, order);
            let den = bracket_small(&PolyBasis1mX::constant(Q::one()), n, order);
            Ok(num.div(&den).expect("[1]_0 > 0"))
        }
        Regime::KappaToInfinity => {
            let num = bracket_large(&PolyBasis1mX::y_power(1), n, order);
            let den = bracket_large(&PolyBasis1mX::constant(Q::one()), n, order);
            let one = RatSeries::constant(Q::one(), order as i64);
            Ok(one.sub(&num.div(&den).expect("leading Γ(β+1) > 0")).truncate(order as i64))
        }
    }
}

fn default_order(regime: Regime) -> usize {
    match regime {
        Regime::KappaToZero => 5,
        Regime::KappaToInfinity => 3,
    }
}

fn pack(regime: Regime, s: &RatSeries) -> AsymptoticSeries {
    AsymptoticSeries::from_rat(regime, s, 0, regime == Regime::KappaToInfinity)
}

/// `c₁ = ⟨cos θ⟩_{M_κ}`: through `κ⁴` (remainder `κ⁵`) or through `κ⁻²`.
pub fn series_c1(n: usize, regime: Regime) -> Result<AsymptoticSeries> {
    series_c1_order(n, regime, default_order(regime))
}

pub fn series_c1_order(n: usize, regime: Regime, order: usize) -> Result<AsymptoticSeries> {
    Ok(pack(regime, &c1_exact(n, regime, order)?))
}

/// Exact series of `⟨f⟩` under the GCI-weighted equilibrium `h_κ sin²θ M_κ`,
/// with `f` a polynomial in `cos θ`.
pub fn tilde_exact(f: &PolyBasis1mX, n: usize, regime: Regime, order: usize) -> Result<RatSeries> {
    check_dim(n)?;
    let s2 = sin2();
    let fs2 = f * &s2;
    match regime {
        Regime::KappaToZero => {
            let hs = compute_h(order, n);
            let mut num = RatSeries::zero(order as i64);
            let mut den = RatSeries::zero(order as i64);
            for (p, h) in hs.iter().enumerate().take(order) {
                num = num.add(&bracket_small(&(&fs2 * h), n, order).shift(p as i64));
                den = den.add(&bracket_small(&(&s2 * h), n, order).shift(p as i64));
            }
            Ok(num.div(&den).expect("⟨H₀ sin²⟩ > 0").truncate(order as i64))
        }
        Regime::KappaToInfinity => {
            let big_n = order + 2;
            let prec = big_n + 2;
            let gs = compute_g(big_n, n);
            let mut num = RatSeries::zero(prec as i64);
            let mut den = RatSeries::zero(prec as i64);
            for (i, g) in gs.iter().enumerate() {
                let p = i as i64 + 1;
                num = num.add(&bracket_large(&(&fs2 * g), n, prec).shift(p).truncate(prec as i64));
                den = den.add(&bracket_large(&(&s2 * g), n, prec).shift(p).truncate(prec as i64));
            }
            let r = num.div(&den).expect("⟨G₁ sin²⟩ > 0");
            Ok(r.truncate(order as i64))
        }
    }
}

pub fn series_tilde(f: &PolyBasis1mX, n: usize, regime: Regime, order: usize) -> Result<AsymptoticSeries> {
    Ok(pack(regime, &tilde_exact(f, n, regime, order)?))
}

/// `c̃₁ = ⟨cos θ⟩_{M̃_κ}`.
pub fn series_c1_tilde(n: usize, regime: Regime) -> Result<AsymptoticSeries> {
    series_tilde(&PolyBasis1mX::x(), n, regime, default_order(regime))
}

/// `⟨sin²θ⟩_{M̃_κ}`.
pub fn series_sin2_tilde(n: usize, regime: Regime) -> Result<AsymptoticSeries> {
    series_tilde(&sin2(), n, regime, default_order(regime))
}

/// Leading-order expansions of `c₂` and `λ` for the model at density `rho`,
/// with the model's `α`, `α̃`, `ν`, `d` and their density derivatives frozen
/// at `rho`.
pub fn series_macro(
    model: &ModelParams,
    rho: f64,
    regime: Regime,
) -> Result<(AsymptoticSeries, AsymptoticSeries)> {
    let pt = model.evaluate(rho)?;
    let n = model.dim as f64;
    let kappa = pt.kappa();
    let a = rho * pt.kappa_dot() / kappa;
    let b = 0.5 * model.alpha_tilde * rho * pt.d_dot / pt.d * pt.nu;
    let anu = model.alpha * pt.nu;
    let atnu = model.alpha_tilde * pt.nu;
    let (c2, lambda) = match regime {
        Regime::KappaToZero => {
            let q = 2.0 * n * (n + 2.0);
            (
                AsymptoticSeries {
                    regime,
                    scale_exponent: 0.0,
                    terms: vec![
                        (0, -anu * (2.0 * n + 1.0) / (2.0 * (n + 2.0))),
                        (1, (2.0 * n - 1.0) / q),
                    ],
                    order_of_remainder: 2,
                },
                AsymptoticSeries {
                    regime,
                    scale_exponent: 0.0,
                    terms: vec![
                        (-1, 1.0 + b * (n - 1.0)),
                        (0, a * atnu * 3.0 / (2.0 * (n + 2.0))),
                        (1, -5.0 * a / q + b * (2.0 * n - 1.0) / q),
                    ],
                    order_of_remainder: 2,
                },
            )
        }
        Regime::KappaToInfinity => (
            AsymptoticSeries {
                regime,
                scale_exponent: 0.0,
                terms: vec![(0, 1.0 - anu), (-1, -(n + 1.0) / 2.0 + anu)],
                order_of_remainder: -2,
            },
            AsymptoticSeries {
                regime,
                scale_exponent: 0.0,
                terms: vec![(0, b), (-1, 1.0 + a * (atnu - 1.0) + b * (n - 3.0) / 2.0)],
                order_of_remainder: -2,
            },
        ),
    };
    Ok((c2, lambda))
}
