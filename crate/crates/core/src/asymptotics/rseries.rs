//! Truncated Laurent series with exact rational coefficients.

use num::{One, Zero};

use super::poly::{to_f64, Q};

/// `Σ c_i s^{start+i}`, exact for all exponents below `start + coeffs.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatSeries {
    start: i64,
    coeffs: Vec<Q>,
}

impl RatSeries {
    /// Exact through exponent `prec - 1`.
    pub fn new(start: i64, coeffs: Vec<Q>) -> Self {
        RatSeries { start, coeffs }
    }

    /// Zero known up to (excluding) exponent `prec`.
    pub fn zero(prec: i64) -> Self {
        RatSeries {
            start: prec,
            coeffs: Vec::new(),
        }
    }

    /// The constant `c`, known through `s^{prec-1}`.
    pub fn constant(c: Q, prec: i64) -> Self {
        let mut coeffs = vec![Q::zero(); prec.max(1) as usize];
        coeffs[0] = c;
        RatSeries { start: 0, coeffs }
    }

    pub fn prec(&self) -> i64 {
        self.start + self.coeffs.len() as i64
    }

    /// Coefficient of `s^e`; panics past the known precision.
    pub fn coeff(&self, e: i64) -> Q {
        assert!(e < self.prec(), "exponent {e} beyond precision {}", self.prec());
        if e < self.start {
            Q::zero()
        } else {
            self.coeffs[(e - self.start) as usize].clone()
        }
    }

    /// Exponent of the first nonzero coefficient, if any.
    pub fn valuation(&self) -> Option<i64> {
        self.coeffs
            .iter()
            .position(|c| !c.is_zero())
            .map(|i| self.start + i as i64)
    }

    fn normalized(&self) -> Self {
        match self.valuation() {
            Some(v) => RatSeries {
                start: v,
                coeffs: self.coeffs[(v - self.start) as usize..].to_vec(),
            },
            None => RatSeries::zero(self.prec()),
        }
    }

    pub fn truncate(&self, prec: i64) -> Self {
        let p = prec.min(self.prec());
        let mut out = self.normalized();
        let keep = (p - out.start).max(0) as usize;
        out.coeffs.truncate(keep);
        if out.coeffs.is_empty() {
            out.start = p;
        }
        out
    }

    pub fn shift(&self, by: i64) -> Self {
        RatSeries {
            start: self.start + by,
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn scale(&self, c: &Q) -> Self {
        RatSeries {
            start: self.start,
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let prec = self.prec().min(o.prec());
        let start = self.start.min(o.start).min(prec);
        let coeffs = (start..prec)
            .map(|e| {
                let a = if e >= self.start { self.coeff(e) } else { Q::zero() };
                let b = if e >= o.start { o.coeff(e) } else { Q::zero() };
                a + b
            })
            .collect();
        RatSeries { start, coeffs }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&-Q::one()))
    }

    pub fn mul(&self, o: &Self) -> Self {
        let (a, b) = (self.normalized(), o.normalized());
        let (va, vb) = (a.start, b.start);
        let rel = (a.coeffs.len()).min(b.coeffs.len());
        if a.coeffs.is_empty() || b.coeffs.is_empty() {
            let prec = (a.prec() + vb).min(b.prec() + va);
            return RatSeries::zero(prec);
        }
        let mut c = vec![Q::zero(); rel];
        for i in 0..rel {
            for j in 0..rel - i {
                c[i + j] += &a.coeffs[i] * &b.coeffs[j];
            }
        }
        RatSeries {
            start: va + vb,
            coeffs: c,
        }
    }

    /// Quotient; `None` if the divisor is zero to its known precision.
    pub fn div(&self, o: &Self) -> Option<Self> {
        let b = o.normalized();
        if b.coeffs.is_empty() {
            return None;
        }
        let a = self.normalized();
        if a.coeffs.is_empty() {
            return Some(RatSeries::zero(a.prec() - b.start));
        }
        let rel = a.coeffs.len().min(b.coeffs.len());
        let inv0 = Q::one() / &b.coeffs[0];
        let mut c: Vec<Q> = Vec::with_capacity(rel);
        for k in 0..rel {
            let mut acc = a.coeffs[k].clone();
            for j in 1..=k {
                acc -= &b.coeffs[j] * &c[k - j];
            }
            c.push(acc * &inv0);
        }
        Some(RatSeries {
            start: a.start - b.start,
            coeffs: c,
        })
    }

    /// `(exponent, coefficient)` pairs for every known exponent from `from` on.
    pub fn terms_from(&self, from: i64) -> Vec<(i64, Q)> {
        (from..self.prec()).map(|e| (e, self.coeff(e))).collect()
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| to_f64(c) * s.powi((self.start + i as i64) as i32))
            .sum()
    }
}
