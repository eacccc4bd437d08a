use crate::error::{Error, Result};
use crate::model::mass::{normalize_atoms, Interval, MassDistribution};
use crate::scalar::{Exact, Field};

/// Finite Stieltjes string: `N` point masses separated by `N + 1` positive lengths.
///
/// Lengths are the primary data; positions are kept alongside so strings built from
/// positions reproduce them bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct StieltjesString<T = f64> {
    interval: Interval,
    lengths: Vec<T>,
    masses: Vec<T>,
    positions: Vec<T>,
}

fn check_sum<T: Field>(interval: &Interval, lengths: &[T]) -> Result<()> {
    let total: f64 = lengths.iter().map(Field::to_f64).sum();
    let rel = (total - interval.len()).abs() / interval.len();
    if rel > 1e-12 {
        return Err(Error::invalid(format!(
            "lengths sum to {total}, interval length is {} (relative mismatch {rel:e})",
            interval.len()
        )));
    }
    Ok(())
}

impl StieltjesString<f64> {
    /// Builds from `(position, mass)` pairs; coincident positions are merged.
    pub fn from_masses(interval: Interval, atoms: &[(f64, f64)]) -> Result<Self> {
        let atoms = normalize_atoms(&interval, atoms.to_vec())?;
        let (xs, ms): (Vec<f64>, Vec<f64>) = atoms.into_iter().unzip();
        Self::from_positions(interval, xs, ms)
    }

    /// String with no masses.
    pub fn empty(interval: Interval) -> Self {
        Self::empty_in(interval, ())
    }

    pub fn to_mass_distribution(&self) -> MassDistribution {
        let atoms = self.positions.iter().copied().zip(self.masses.iter().copied()).collect();
        MassDistribution::new(self.interval, atoms, None).expect("valid string")
    }

    /// Exact rational copy of the stored doubles.
    pub fn to_exact(&self) -> StieltjesString<Exact> {
        self.map(|x| Exact::from_f64(*x, ()))
    }

    /// `(position, mass)` pairs.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        self.positions.iter().copied().zip(self.masses.iter().copied()).collect()
    }
}

impl TryFrom<&MassDistribution> for StieltjesString<f64> {
    type Error = Error;
    fn try_from(w: &MassDistribution) -> Result<Self> {
        if w.density().is_some() {
            return Err(Error::invalid("measure has a density part; not a finite string"));
        }
        StieltjesString::from_masses(w.interval(), w.atoms())
    }
}

impl<T: Field> StieltjesString<T> {
    /// Builds from strictly increasing interior positions.
    pub fn from_positions(interval: Interval, positions: Vec<T>, masses: Vec<T>) -> Result<Self> {
        if positions.len() != masses.len() {
            return Err(Error::invalid("positions and masses differ in length"));
        }
        for m in &masses {
            if !m.is_positive() {
                return Err(Error::invalid(format!("mass {m:?} must be positive")));
            }
        }
        let (a, b) = match positions.first() {
            Some(p) => (p.lit(interval.a), p.lit(interval.b)),
            None => return Ok(Self::empty_in(interval, T::default_ctx())),
        };
        let mut lengths = Vec::with_capacity(positions.len() + 1);
        let mut prev = a;
        for p in &positions {
            let l = p.clone() - prev;
            if !l.is_positive() {
                return Err(Error::invalid(format!("position {p:?} is not strictly increasing inside the interval")));
            }
            lengths.push(l);
            prev = p.clone();
        }
        let last = b - prev;
        if !last.is_positive() {
            return Err(Error::invalid("last position must lie below b"));
        }
        lengths.push(last);
        Ok(StieltjesString { interval, lengths, masses, positions })
    }

    /// String with no masses in the given context.
    pub fn empty_in(interval: Interval, ctx: T::Ctx) -> Self {
        StieltjesString {
            interval,
            lengths: vec![T::from_f64(interval.len(), ctx)],
            masses: vec![],
            positions: vec![],
        }
    }

    /// Builds from lengths `l_0..l_N` and masses `m_1..m_N`.
    pub fn from_lengths(interval: Interval, lengths: Vec<T>, masses: Vec<T>) -> Result<Self> {
        if lengths.len() != masses.len() + 1 {
            return Err(Error::invalid("need exactly one more length than masses"));
        }
        for l in &lengths {
            if !l.is_positive() {
                return Err(Error::invalid(format!("length {l:?} must be positive")));
            }
        }
        for m in &masses {
            if !m.is_positive() {
                return Err(Error::invalid(format!("mass {m:?} must be positive")));
            }
        }
        check_sum(&interval, &lengths)?;
        let mut positions = Vec::with_capacity(masses.len());
        let mut x = lengths[0].lit(interval.a);
        for l in &lengths[..masses.len()] {
            x = x + l.clone();
            positions.push(x.clone());
        }
        Ok(StieltjesString { interval, lengths, masses, positions })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    /// Number of masses.
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// `l_0..l_N`.
    pub fn lengths(&self) -> &[T] {
        &self.lengths
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn positions(&self) -> &[T] {
        &self.positions
    }

    /// `x_j - a` as prefix sums of lengths.
    pub fn left_offsets(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc: Option<T> = None;
        for l in &self.lengths[..self.len()] {
            let next = match acc {
                Some(s) => s + l.clone(),
                None => l.clone(),
            };
            out.push(next.clone());
            acc = Some(next);
        }
        out
    }

    /// `b - x_j` as suffix sums of lengths.
    pub fn right_offsets(&self) -> Vec<T> {
        let n = self.len();
        let mut out = vec![None; n];
        let mut acc: Option<T> = None;
        for j in (0..n).rev() {
            let l = self.lengths[j + 1].clone();
            let next = match acc {
                Some(s) => s + l,
                None => l,
            };
            out[j] = Some(next.clone());
            acc = Some(next);
        }
        out.into_iter().map(|x| x.expect("filled")).collect()
    }

    pub fn map<U: Field>(&self, f: impl Fn(&T) -> U) -> StieltjesString<U> {
        StieltjesString {
            interval: self.interval,
            lengths: self.lengths.iter().map(&f).collect(),
            masses: self.masses.iter().map(&f).collect(),
            positions: self.positions.iter().map(&f).collect(),
        }
    }

    pub fn to_f64(&self) -> StieltjesString<f64> {
        self.map(Field::to_f64)
    }

    /// Masses strictly inside `(lo, hi)` as a string on that subinterval.
    pub fn substring(&self, lo: f64, hi: f64) -> Result<StieltjesString<T>> {
        let sub = Interval::new(lo, hi)?;
        let keep: Vec<usize> = (0..self.len())
            .filter(|&j| {
                let x = self.positions[j].to_f64();
                lo < x && x < hi
            })
            .collect();
        if keep.is_empty() {
            return Ok(Self::empty_in(sub, self.lengths[0].ctx()));
        }
        let masses = keep.iter().map(|&j| self.masses[j].clone()).collect();
        let positions: Vec<T> = keep.iter().map(|&j| self.positions[j].clone()).collect();
        let mut lengths = Vec::with_capacity(keep.len() + 1);
        let first = keep[0];
        lengths.push(if lo == self.interval.a && first == 0 {
            self.lengths[0].clone()
        } else {
            positions[0].clone() - positions[0].lit(lo)
        });
        for w in keep.windows(2) {
            lengths.push(self.lengths[w[1]].clone());
        }
        let last = *keep.last().expect("non-empty");
        lengths.push(if hi == self.interval.b && last == self.len() - 1 {
            self.lengths[last + 1].clone()
        } else {
            positions[keep.len() - 1].lit(hi) - positions[keep.len() - 1].clone()
        });
        Ok(StieltjesString { interval: sub, lengths, masses, positions })
    }

    /// Position-weighted total `Σ m_j (b - x_j)(x_j - a)`.
    pub fn weighted_total(&self) -> T {
        let left = self.left_offsets();
        let right = self.right_offsets();
        let mut acc: Option<T> = None;
        for j in 0..self.len() {
            let t = self.masses[j].clone() * left[j].clone() * right[j].clone();
            acc = Some(match acc {
                Some(s) => s + t,
                None => t,
            });
        }
        acc.unwrap_or_else(|| self.lengths[0].lit(0.0))
    }
}
