use std::ops::{Add, Mul, Neg, Sub};

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn to_f64(v: &Q) -> f64 {
    v.to_f64().unwrap_or_else(|| {
        // numerator/denominator beyond f64 range individually
        let (n, d) = (v.numer(), v.denom());
        let shift = n.bits().max(d.bits()) as i64 - 900;
        let (n, d) = (n >> shift.max(0) as usize, d >> shift.max(0) as usize);
        n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
    })
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

/// Polynomial in the basis `{(1-X)^k}`: `coeffs[k]` multiplies `(1-X)^k`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PolyBasis1mX {
    coeffs: Vec<Q>,
}

impl PolyBasis1mX {
    pub fn zero() -> Self {
        PolyBasis1mX { coeffs: Vec::new() }
    }

    pub fn constant(c: Q) -> Self {
        Self::new(vec![c])
    }

    /// `(1-X)^k`
    pub fn y_power(k: usize) -> Self {
        let mut c = vec![Q::zero(); k + 1];
        c[k] = Q::one();
        Self::new(c)
    }

    /// The polynomial `X = 1 - (1-X)`.
    pub fn x() -> Self {
        Self::new(vec![Q::one(), -Q::one()])
    }

    pub fn new(mut coeffs: Vec<Q>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        PolyBasis1mX { coeffs }
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    /// Coefficient of `(1-X)^k`, zero past the degree.
    pub fn coeff(&self, k: usize) -> Q {
        self.coeffs.get(k).cloned().unwrap_or_else(Q::zero)
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scale(&self, s: &Q) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Drops every term of degree `>= k`, i.e. reduces modulo `(1-X)^k`.
    pub fn truncate(&self, k: usize) -> Self {
        Self::new(self.coeffs.iter().take(k).cloned().collect())
    }

    /// Monomial coefficients `m[j]` of `Σ m_j X^j`.
    pub fn to_monomial(&self) -> Vec<Q> {
        switch_basis(&self.coeffs)
    }

    pub fn from_monomial(m: &[Q]) -> Self {
        Self::new(switch_basis(m))
    }

    /// Value at `X = x` (Horner in `1 - x`).
    pub fn eval(&self, x: f64) -> f64 {
        let y = 1.0 - x;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * y + to_f64(c))
    }

    pub fn eval_exact(&self, x: &Q) -> Q {
        let y = Q::one() - x;
        self.coeffs.iter().rev().fold(Q::zero(), |acc, c| acc * &y + c)
    }

    /// `P(-X)` as a polynomial.
    pub fn reflect(&self) -> Self {
        let m: Vec<Q> = self
            .to_monomial()
            .into_iter()
            .enumerate()
            .map(|(j, c)| if j % 2 == 1 { -c } else { c })
            .collect();
        Self::from_monomial(&m)
    }
}

// (1-X)^k <-> X^j uses the same binomial transform in both directions.
fn switch_basis(c: &[Q]) -> Vec<Q> {
    let mut out = vec![Q::zero(); c.len()];
    for (k, ck) in c.iter().enumerate() {
        if ck.is_zero() {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate().take(k + 1) {
            let b = Q::from_integer(binomial(k, j));
            let term = ck * b;
            if j % 2 == 1 {
                *o -= term;
            } else {
                *o += term;
            }
        }
    }
    out
}

impl Add for &PolyBasis1mX {
    type Output = PolyBasis1mX;
    fn add(self, o: &PolyBasis1mX) -> PolyBasis1mX {
        let n = self.coeffs.len().max(o.coeffs.len());
        PolyBasis1mX::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }
}

impl Sub for &PolyBasis1mX {
    type Output = PolyBasis1mX;
    fn sub(self, o: &PolyBasis1mX) -> PolyBasis1mX {
        let n = self.coeffs.len().max(o.coeffs.len());
        PolyBasis1mX::new((0..n).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }
}

impl Neg for &PolyBasis1mX {
    type Output = PolyBasis1mX;
    fn neg(self) -> PolyBasis1mX {
        PolyBasis1mX::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl Mul for &PolyBasis1mX {
    type Output = PolyBasis1mX;
    fn mul(self, o: &PolyBasis1mX) -> PolyBasis1mX {
        if self.is_zero() || o.is_zero() {
            return PolyBasis1mX::zero();
        }
        let mut c = vec![Q::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        PolyBasis1mX::new(c)
    }
}

impl Serialize for PolyBasis1mX {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let exact: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        let approx: Vec<f64> = self.coeffs.iter().map(to_f64).collect();
        let mut st = s.serialize_struct("PolyBasis1mX", 3)?;
        st.serialize_field("basis", "one_minus_x_powers")?;
        st.serialize_field("coefficients", &exact)?;
        st.serialize_field("coefficients_f64", &approx)?;
        st.end()
    }
}

pub fn is_nonneg(v: &Q) -> bool {
    !v.is_negative()
}
