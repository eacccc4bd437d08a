use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::mass::Interval;
use crate::model::sequence::{ZeroProduct, ZeroSet};
use crate::scalar::Field;

/// Point mass `weight · δ_lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom<T = f64> {
    pub lambda: T,
    pub weight: T,
}

/// Atoms beyond a finite head, produced on demand.
#[derive(Clone)]
pub struct AtomTail {
    /// Atom `(lambda, weight)` with global index `k`.
    pub generator: Arc<dyn Fn(usize) -> (f64, f64) + Send + Sync>,
    /// Upper bound on `Σ_{k >= K} 1/λ_k`.
    pub recip_tail: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
}

impl fmt::Debug for AtomTail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AtomTail")
    }
}

/// Discrete positive measure on `(0, ∞)` with `Σ w/λ < ∞`.
#[derive(Clone, Debug)]
pub struct SpectralMeasure<T = f64> {
    interval: Interval,
    atoms: Vec<Atom<T>>,
    tail: Option<AtomTail>,
}

impl<T: Field> SpectralMeasure<T> {
    /// Finite measure; atoms must have strictly increasing positive locations.
    pub fn new(interval: Interval, atoms: Vec<Atom<T>>) -> Result<Self> {
        for (k, a) in atoms.iter().enumerate() {
            if !a.lambda.is_positive() || !a.lambda.to_f64().is_finite() {
                return Err(Error::invalid(format!("atom {k}: location {:?} must be positive", a.lambda)));
            }
            if !a.weight.is_positive() || !a.weight.to_f64().is_finite() {
                return Err(Error::invalid(format!("atom {k}: weight {:?} must be positive", a.weight)));
            }
        }
        if let Some(k) = atoms.windows(2).position(|w| !(w[0].lambda < w[1].lambda)) {
            return Err(Error::invalid(format!(
                "atom locations must increase strictly (entries {k} and {})",
                k + 1
            )));
        }
        Ok(SpectralMeasure { interval, atoms, tail: None })
    }

    /// Like [`SpectralMeasure::new`] but accepts atoms in any order.
    pub fn from_unsorted(interval: Interval, mut atoms: Vec<Atom<T>>) -> Result<Self> {
        atoms.sort_by(|p, q| p.lambda.partial_cmp(&q.lambda).unwrap_or(std::cmp::Ordering::Equal));
        Self::new(interval, atoms)
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    /// Listed atoms (all of them for a finite measure).
    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.tail.is_none()
    }

    pub fn is_finite(&self) -> bool {
        self.tail.is_none()
    }

    pub fn tail(&self) -> Option<&AtomTail> {
        self.tail.as_ref()
    }

    pub fn to_f64(&self) -> SpectralMeasure<f64> {
        SpectralMeasure {
            interval: self.interval,
            atoms: self.atoms.iter().map(|a| Atom { lambda: a.lambda.to_f64(), weight: a.weight.to_f64() }).collect(),
            tail: self.tail.clone(),
        }
    }

    pub fn map<U: Field>(&self, f: impl Fn(&T) -> U) -> SpectralMeasure<U> {
        SpectralMeasure {
            interval: self.interval,
            atoms: self.atoms.iter().map(|a| Atom { lambda: f(&a.lambda), weight: f(&a.weight) }).collect(),
            tail: self.tail.clone(),
        }
    }
}

impl SpectralMeasure<f64> {
    /// Continues the listed atoms with a generator.
    pub fn with_tail(
        interval: Interval,
        head: Vec<Atom<f64>>,
        generator: impl Fn(usize) -> (f64, f64) + Send + Sync + 'static,
        recip_tail: impl Fn(usize) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let mut m = Self::new(interval, head)?;
        m.tail = Some(AtomTail { generator: Arc::new(generator), recip_tail: Arc::new(recip_tail) });
        Ok(m)
    }

    /// Atom with global index `k`.
    pub fn atom(&self, k: usize) -> Option<(f64, f64)> {
        if k < self.atoms.len() {
            let a = &self.atoms[k];
            return Some((a.lambda, a.weight));
        }
        self.tail.as_ref().map(|t| (t.generator)(k))
    }

    /// Finite restriction to atoms with `λ <= cap`.
    pub fn truncate(&self, cap: f64) -> SpectralMeasure<f64> {
        let mut atoms = Vec::new();
        let mut k = 0;
        while let Some((l, w)) = self.atom(k) {
            if l > cap {
                break;
            }
            atoms.push(Atom { lambda: l, weight: w });
            k += 1;
        }
        SpectralMeasure { interval: self.interval, atoms, tail: None }
    }

    /// First `n` atoms (fewer if the measure is finite and shorter).
    pub fn first(&self, n: usize) -> Vec<(f64, f64)> {
        (0..n).map_while(|k| self.atom(k)).collect()
    }

    /// Bound on `Σ_{k >= K} 1/λ_k`.
    pub fn recip_tail(&self, k: usize) -> f64 {
        let head: f64 = self.atoms.iter().skip(k).map(|a| 1.0 / a.lambda).sum();
        match &self.tail {
            Some(t) => head + (t.recip_tail)(k.max(self.atoms.len())),
            None => head,
        }
    }

    /// Support as a zero set.
    pub fn support(&self) -> ZeroSet {
        let head = self.atoms.iter().map(|a| a.lambda).collect();
        let tail = self.tail.as_ref().map(|t| {
            let g = t.generator.clone();
            crate::model::sequence::SeqTail {
                generator: Arc::new(move |k| g(k).0),
                recip_tail: t.recip_tail.clone(),
            }
        });
        ZeroSet { head, tail }
    }

    /// `(b - a) Π (1 - z/λ)` over the support.
    pub fn characteristic_product(&self) -> ZeroProduct {
        ZeroProduct { scale: self.interval.len(), zeros: self.support() }
    }

    /// Spectral measure of the uniform unit density on `interval`.
    ///
    /// `λ_k = (kπ/L)²`, `w_k = 2λ_k / L`.
    pub fn uniform_string(interval: Interval) -> Self {
        let len = interval.len();
        Self::with_tail(
            interval,
            Vec::new(),
            move |k| {
                let l = ((k + 1) as f64 * PI / len).powi(2);
                (l, 2.0 * l / len)
            },
            move |k| square_recip_tail(k, len),
        )
        .expect("valid")
    }

    /// Constant weights on the uniform-string spectrum `(kπ/L)²`.
    pub fn squares_constant_weight(interval: Interval, weight: f64) -> Self {
        let len = interval.len();
        Self::with_tail(
            interval,
            Vec::new(),
            move |k| (((k + 1) as f64 * PI / len).powi(2), weight),
            move |k| square_recip_tail(k, len),
        )
        .expect("valid")
    }
}

/// Bound on `Σ_{j >= k} (L/((j+1)π))²`.
pub(crate) fn square_recip_tail(k: usize, len: f64) -> f64 {
    let c = (len / PI).powi(2);
    if k == 0 {
        c * PI * PI / 6.0
    } else {
        c / k as f64
    }
}

/// Spectral data attached to one eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralTriplet<T = f64> {
    pub lambda: T,
    /// `∫ φ_a² dω`.
    pub gamma_sq: T,
    /// `|φ_b / φ_a|`.
    pub coupling: T,
    /// Sign exponent: `φ_b = (-1)^θ c φ_a`.
    pub theta: u8,
}
