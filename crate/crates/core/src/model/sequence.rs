use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

type Gen = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

/// Generator for the entries beyond a finite head.
#[derive(Clone)]
pub struct SeqTail {
    /// Entry with global index `k` (`k >= head length`).
    pub generator: Gen,
    /// Upper bound on `Σ_{k >= K} 1/x_k`.
    pub recip_tail: Gen,
}

impl fmt::Debug for SeqTail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SeqTail")
    }
}

/// Increasing positive sequence: a finite head optionally continued by a generator.
#[derive(Clone, Debug, Default)]
pub struct ZeroSet {
    pub head: Vec<f64>,
    pub tail: Option<SeqTail>,
}

impl ZeroSet {
    pub fn finite(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(f64::total_cmp);
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("zeros must be positive and finite"));
        }
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("repeated entry in a spectrum"));
        }
        Ok(ZeroSet { head: values, tail: None })
    }

    pub fn generated(
        generator: impl Fn(usize) -> f64 + Send + Sync + 'static,
        recip_tail: impl Fn(usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ZeroSet {
            head: Vec::new(),
            tail: Some(SeqTail { generator: Arc::new(generator), recip_tail: Arc::new(recip_tail) }),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tail.is_none()
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        if k < self.head.len() {
            return Some(self.head[k]);
        }
        self.tail.as_ref().map(|t| (t.generator)(k))
    }

    /// Entries `<= cap`.
    pub fn up_to(&self, cap: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0;
        while let Some(v) = self.get(k) {
            if v > cap {
                break;
            }
            out.push(v);
            k += 1;
        }
        out
    }

    /// Bound on `Σ_{k >= K} 1/x_k`.
    pub fn recip_tail(&self, k: usize) -> f64 {
        let head: f64 = self.head.iter().skip(k).map(|v| 1.0 / v).sum();
        match &self.tail {
            Some(t) => head + (t.recip_tail)(k.max(self.head.len())),
            None => head,
        }
    }
}

/// Genus-zero product `scale · Π (1 - z/λ_k)`.
#[derive(Clone, Debug)]
pub struct ZeroProduct {
    pub scale: f64,
    pub zeros: ZeroSet,
}

/// Value and derivative of a zero product with an explicit truncation bound.
#[derive(Clone, Copy, Debug)]
pub struct ProductValue {
    pub value: Complex64,
    pub derivative: Complex64,
    /// Bound on the relative error caused by truncating the tail.
    pub tail_bound: f64,
    pub factors: usize,
}

/// Maximum number of generated factors used by [`zero_product_eval`].
pub const DEFAULT_MAX_FACTORS: usize = 2_000_000;

/// Evaluates `P(z)` and `P'(z)`, truncating the tail once `|z| Σ_{k>=K} 1/λ_k <= 1e-15`.
pub fn zero_product_eval(p: &ZeroProduct, z: Complex64) -> ProductValue {
    zero_product_eval_with(p, z, 1e-15, DEFAULT_MAX_FACTORS)
}

pub fn zero_product_eval_with(p: &ZeroProduct, z: Complex64, tol: f64, max_factors: usize) -> ProductValue {
    let mut val = Complex64::new(p.scale, 0.0);
    let mut der = Complex64::new(0.0, 0.0);
    let r = z.norm();
    let mut k = 0;
    loop {
        if k >= p.zeros.head.len() {
            match &p.zeros.tail {
                None => break,
                Some(_) => {
                    if r * p.zeros.recip_tail(k) <= tol || k >= max_factors {
                        break;
                    }
                }
            }
        }
        let lam = p.zeros.get(k).expect("entry exists");
        let f = Complex64::new(1.0, 0.0) - z / lam;
        der = der * f - val / lam;
        val *= f;
        k += 1;
    }
    let t = if p.zeros.is_finite() { 0.0 } else { r * p.zeros.recip_tail(k) };
    ProductValue { value: val, derivative: der, tail_bound: t.exp_m1(), factors: k }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_product() {
        // sin(√z)/√z = Π (1 - z/(k²π²))
        let zs = ZeroSet::generated(|k| ((k + 1) as f64 * PI).powi(2), |k| 1.0 / (PI * PI * k.max(1) as f64));
        let p = ZeroProduct { scale: 1.0, zeros: zs };
        let z = Complex64::new(2.0, 0.0);
        let v = zero_product_eval_with(&p, z, 1e-6, 10_000_000);
        let exact = 2f64.sqrt().sin() / 2f64.sqrt();
        assert!((v.value.re - exact).abs() <= v.tail_bound * 2.0 + 1e-12);
        assert!(v.tail_bound < 1e-5);
    }

    #[test]
    fn derivative_at_zero_of_product() {
        let p = ZeroProduct { scale: 1.0, zeros: ZeroSet::finite(vec![3.0, 9.0]).unwrap() };
        let v = zero_product_eval(&p, Complex64::new(3.0, 0.0));
        assert!(v.value.norm() < 1e-15);
        assert!((v.derivative.re + 2.0 / 9.0).abs() < 1e-15);
        assert_eq!(v.tail_bound, 0.0);
    }
}
