use crate::error::{Error, Result};
use crate::model::mass::Interval;

/// Three Dirichlet spectra with couplings on their common part.
#[derive(Clone, Debug, PartialEq)]
pub struct ThreeSpectraTriple {
    pub interval: Interval,
    /// Split point `c ∈ (a, b)`.
    pub split: f64,
    /// Spectrum of the whole string.
    pub sigma: Vec<f64>,
    /// Spectrum of the part on `(a, c)`.
    pub sigma_a: Vec<f64>,
    /// Spectrum of the part on `(c, b)`.
    pub sigma_b: Vec<f64>,
    /// `(λ, c_λ)` for every `λ ∈ σ ∩ σ_a ∩ σ_b`, increasing in `λ`.
    pub couplings: Vec<(f64, f64)>,
}

impl ThreeSpectraTriple {
    /// Checks basic shape: finite positive sets, split inside, couplings positive.
    pub fn check_shape(&self) -> Result<()> {
        let i = self.interval;
        if !i.contains_open(self.split) {
            return Err(Error::invalid(format!("split {} outside ({}, {})", self.split, i.a, i.b)));
        }
        for (name, set) in [("sigma", &self.sigma), ("sigma_a", &self.sigma_a), ("sigma_b", &self.sigma_b)] {
            if set.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::invalid(format!("{name} must contain positive finite values")));
            }
            if set.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::invalid(format!("{name} must be strictly increasing without repeats")));
            }
        }
        for &(l, c) in &self.couplings {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::invalid(format!("coupling at {l} must be positive")));
            }
        }
        Ok(())
    }

    /// `σ ∩ σ_a ∩ σ_b` under exact equality.
    pub fn common(&self) -> Vec<f64> {
        self.sigma
            .iter()
            .copied()
            .filter(|l| self.sigma_a.contains(l) && self.sigma_b.contains(l))
            .collect()
    }

    pub fn coupling_at(&self, lambda: f64) -> Option<f64> {
        self.couplings.iter().find(|(l, _)| *l == lambda).map(|(_, c)| *c)
    }

    /// Copy with the coupling at `lambda` replaced.
    pub fn with_coupling(&self, lambda: f64, c: f64) -> Self {
        let mut t = self.clone();
        for e in &mut t.couplings {
            if e.0 == lambda {
                e.1 = c;
            }
        }
        t
    }
}
