//! Dense polynomials with ascending coefficients.

use crate::scalar::Field;

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<T> {
    /// `coeffs[k]` multiplies `z^k`.
    pub coeffs: Vec<T>,
}

impl<T: Field> Polynomial<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        Polynomial { coeffs }
    }

    pub fn constant(c: T) -> Self {
        Polynomial { coeffs: vec![c] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> &T {
        self.coeffs.last().expect("non-empty polynomial")
    }

    pub fn eval(&self, z: &T) -> T {
        let mut acc = self.coeffs.last().expect("non-empty").clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc * z.clone() + c.clone();
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Polynomial::constant(self.coeffs[0].lit(0.0));
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c.clone() * c.lit(k as f64))
            .collect();
        Polynomial { coeffs }
    }

    /// `self * (1 - z / root)`.
    pub fn mul_one_minus(&self, root: &T) -> Self {
        let inv = root.recip();
        let mut out = self.coeffs.clone();
        out.push(self.coeffs[0].lit(0.0));
        for k in (1..out.len()).rev() {
            out[k] = out[k].clone() - self.coeffs[k - 1].clone() * inv.clone();
        }
        Polynomial { coeffs: out }
    }

    pub fn scale(&self, s: &T) -> Self {
        Polynomial { coeffs: self.coeffs.iter().map(|c| c.clone() * s.clone()).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = self.coeffs[0].lit(0.0);
        let coeffs = (0..n)
            .map(|k| {
                self.coeffs.get(k).cloned().unwrap_or_else(|| zero.clone())
                    + other.coeffs.get(k).cloned().unwrap_or_else(|| zero.clone())
            })
            .collect();
        Polynomial { coeffs }
    }

    pub fn to_f64(&self) -> Polynomial<f64> {
        Polynomial { coeffs: self.coeffs.iter().map(|c| c.to_f64()).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    #[test]
    fn product_form() {
        let p = Polynomial::constant(Exact::from_ratio(1, 1))
            .mul_one_minus(&Exact::from_ratio(3, 1))
            .mul_one_minus(&Exact::from_ratio(9, 1));
        assert_eq!(
            p.coeffs,
            vec![Exact::from_ratio(1, 1), Exact::from_ratio(-4, 9), Exact::from_ratio(1, 27)]
        );
        assert!(p.eval(&Exact::from_ratio(9, 1)).0 == dashu_ratio::RBig::ZERO);
        assert_eq!(p.derivative().eval(&Exact::from_ratio(3, 1)), Exact::from_ratio(-2, 9));
    }
}
