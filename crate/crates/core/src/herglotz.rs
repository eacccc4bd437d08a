//! Rational Herglotz functions `C + Σ w_k / (λ_k - z)`.

use num_complex::Complex64;

use crate::scalar::Field;

#[derive(Clone, Debug, PartialEq)]
pub struct RationalHerglotz<T = f64> {
    pub constant: T,
    /// `(λ_k, w_k)` with increasing `λ_k`.
    pub poles: Vec<(T, T)>,
}

impl<T: Field> RationalHerglotz<T> {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut v = Complex64::new(self.constant.to_f64(), 0.0);
        for (l, w) in &self.poles {
            v += w.to_f64() / (l.to_f64() - z);
        }
        v
    }

    pub fn eval_real(&self, x: &T) -> T {
        let mut v = self.constant.clone();
        for (l, w) in &self.poles {
            v = v + w.clone() / (l.clone() - x.clone());
        }
        v
    }

    pub fn to_f64(&self) -> RationalHerglotz<f64> {
        RationalHerglotz {
            constant: self.constant.to_f64(),
            poles: self.poles.iter().map(|(l, w)| (l.to_f64(), w.to_f64())).collect(),
        }
    }
}
