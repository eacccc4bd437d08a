use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Finite open interval `(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::invalid(format!("interval ({a}, {b}) must be finite with a < b")));
        }
        Ok(Interval { a, b })
    }

    pub fn unit() -> Self {
        Interval { a: 0.0, b: 1.0 }
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains_open(&self, x: f64) -> bool {
        self.a < x && x < self.b
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }
}

/// Smooth factor of a density.
#[derive(Clone)]
pub enum Profile {
    /// Constant value; endpoint exponents must vanish.
    Uniform { value: f64 },
    /// Constant scale multiplying the endpoint power factors.
    Power { scale: f64 },
    /// Piecewise-linear interpolation, constant beyond the first/last knot.
    Table { xs: Vec<f64>, ys: Vec<f64> },
    /// Arbitrary non-negative continuous function.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Uniform { value } => write!(f, "Uniform({value})"),
            Profile::Power { scale } => write!(f, "Power({scale})"),
            Profile::Table { xs, .. } => write!(f, "Table({} knots)", xs.len()),
            Profile::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Absolutely continuous part `profile(x) (x-a)^{-alpha_a} (b-x)^{-alpha_b}`.
#[derive(Clone, Debug)]
pub struct Density {
    pub profile: Profile,
    pub alpha_a: f64,
    pub alpha_b: f64,
}

impl Density {
    pub fn uniform(value: f64) -> Self {
        Density { profile: Profile::Uniform { value }, alpha_a: 0.0, alpha_b: 0.0 }
    }

    pub fn power(scale: f64, alpha_a: f64, alpha_b: f64) -> Self {
        Density { profile: Profile::Power { scale }, alpha_a, alpha_b }
    }

    pub fn table(xs: Vec<f64>, ys: Vec<f64>, alpha_a: f64, alpha_b: f64) -> Self {
        Density { profile: Profile::Table { xs, ys }, alpha_a, alpha_b }
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static, alpha_a: f64, alpha_b: f64) -> Self {
        Density { profile: Profile::Custom(Arc::new(f)), alpha_a, alpha_b }
    }

    pub fn validate(&self, interval: &Interval) -> Result<()> {
        for (name, al) in [("alpha_a", self.alpha_a), ("alpha_b", self.alpha_b)] {
            if !al.is_finite() || al >= 2.0 {
                return Err(Error::invalid(format!(
                    "{name} = {al}: the weighted total mass diverges unless the exponent is below 2"
                )));
            }
        }
        match &self.profile {
            Profile::Uniform { value } => {
                if !(value.is_finite() && *value > 0.0) {
                    return Err(Error::invalid(format!("uniform density value {value} must be positive")));
                }
                if self.alpha_a != 0.0 || self.alpha_b != 0.0 {
                    return Err(Error::invalid("uniform density takes no endpoint exponents"));
                }
            }
            Profile::Power { scale } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::invalid(format!("power density scale {scale} must be positive")));
                }
            }
            Profile::Table { xs, ys } => {
                if xs.len() != ys.len() || xs.is_empty() {
                    return Err(Error::invalid("density table needs equally many x and y knots"));
                }
                if xs.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::invalid("density table knots must increase strictly"));
                }
                if xs.iter().any(|&x| x < interval.a || x > interval.b) {
                    return Err(Error::invalid("density table knots must lie in the interval"));
                }
                if ys.iter().any(|&y| !(y.is_finite() && y >= 0.0)) {
                    return Err(Error::invalid("density table values must be finite and non-negative"));
                }
            }
            Profile::Custom(_) => {}
        }
        Ok(())
    }

    pub fn profile_at(&self, x: f64) -> f64 {
        match &self.profile {
            Profile::Uniform { value } => *value,
            Profile::Power { scale } => *scale,
            Profile::Table { xs, ys } => {
                if x <= xs[0] {
                    return ys[0];
                }
                let n = xs.len();
                if x >= xs[n - 1] {
                    return ys[n - 1];
                }
                let k = xs.partition_point(|&t| t <= x) - 1;
                let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
                ys[k] + t * (ys[k + 1] - ys[k])
            }
            Profile::Custom(f) => f(x),
        }
    }

    pub fn at(&self, interval: &Interval, x: f64) -> f64 {
        let mut v = self.profile_at(x);
        if self.alpha_a != 0.0 {
            v *= (x - interval.a).powf(-self.alpha_a);
        }
        if self.alpha_b != 0.0 {
            v *= (interval.b - x).powf(-self.alpha_b);
        }
        v
    }

    /// Interior points where the profile is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.profile {
            Profile::Table { xs, .. } => xs.clone(),
            _ => Vec::new(),
        }
    }
}

/// Non-negative measure on `(a, b)`: point masses plus an optional density.
#[derive(Clone, Debug)]
pub struct MassDistribution {
    interval: Interval,
    atoms: Vec<(f64, f64)>,
    density: Option<Density>,
}

impl MassDistribution {
    /// Sorts and merges coincident point masses, then validates.
    pub fn new(interval: Interval, atoms: Vec<(f64, f64)>, density: Option<Density>) -> Result<Self> {
        let atoms = normalize_atoms(&interval, atoms)?;
        if let Some(d) = &density {
            d.validate(&interval)?;
        }
        Ok(MassDistribution { interval, atoms, density })
    }

    pub fn from_density(interval: Interval, density: Density) -> Result<Self> {
        Self::new(interval, Vec::new(), Some(density))
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&Density> {
        self.density.as_ref()
    }

    pub fn density_at(&self, x: f64) -> f64 {
        self.density.as_ref().map_or(0.0, |d| d.at(&self.interval, x))
    }

    pub fn alpha_a(&self) -> f64 {
        self.density.as_ref().map_or(0.0, |d| d.alpha_a)
    }

    pub fn alpha_b(&self) -> f64 {
        self.density.as_ref().map_or(0.0, |d| d.alpha_b)
    }

    /// `∫_{(a, c)} dω < ∞` near `a`.
    pub fn finite_near_a(&self) -> bool {
        self.density.is_none() || self.alpha_a() < 1.0
    }

    pub fn finite_near_b(&self) -> bool {
        self.density.is_none() || self.alpha_b() < 1.0
    }
}

pub(crate) fn normalize_atoms(interval: &Interval, mut atoms: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>> {
    for &(x, m) in &atoms {
        if !x.is_finite() || !interval.contains_open(x) {
            return Err(Error::invalid(format!(
                "mass position {x} outside the open interval ({}, {})",
                interval.a, interval.b
            )));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::invalid(format!("mass {m} at {x} must be positive and finite")));
        }
    }
    atoms.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (x, m) in atoms {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += m,
            _ => out.push((x, m)),
        }
    }
    Ok(out)
}
