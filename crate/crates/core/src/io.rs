//! JSON input formats and atomic artifact output.
//!
//! Numbers in input files may be JSON numbers or strings holding decimals or `p/q`
//! fractions; strings keep full precision for multiprecision work.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Atom, Density, Interval, MassDistribution, SpectralMeasure, StieltjesString, ThreeSpectraTriple};
use crate::scalar::{parse_rational, Bits, Exact, Field, Mpf};

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum Num {
    F(f64),
    S(String),
}

impl Num {
    pub fn to_f64(&self) -> Result<f64> {
        match self {
            Num::F(x) => Ok(*x),
            Num::S(s) => parse_rational(s)
                .map(|r| Exact(r).to_f64())
                .ok_or_else(|| Error::invalid(format!("cannot parse number {s:?}"))),
        }
    }

    pub fn to_mpf(&self, bits: usize) -> Result<Mpf> {
        match self {
            Num::F(x) => Ok(Mpf::from_f64(*x, Bits(bits))),
            Num::S(s) => Mpf::parse(s, bits).ok_or_else(|| Error::invalid(format!("cannot parse number {s:?}"))),
        }
    }
}

/// Prefixes a parse error with the field it came from.
fn at(field: String) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::InvalidInput(m) => Error::invalid(format!("{field}: {m}")),
        other => other,
    }
}

fn all_f64(v: &[Num], field: &str) -> Result<Vec<f64>> {
    v.iter().enumerate().map(|(k, x)| x.to_f64().map_err(at(format!("{field}[{k}]")))).collect()
}

fn interval_of(v: [f64; 2]) -> Result<Interval> {
    Interval::new(v[0], v[1]).map_err(at("interval".into()))
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform { value: f64 },
    Power { scale: f64, alpha_a: f64, alpha_b: f64 },
    Table { xs: Vec<f64>, ys: Vec<f64>, #[serde(default)] alpha_a: f64, #[serde(default)] alpha_b: f64 },
}

impl DensitySpec {
    pub fn to_density(&self) -> Density {
        match self {
            DensitySpec::Uniform { value } => Density::uniform(*value),
            DensitySpec::Power { scale, alpha_a, alpha_b } => Density::power(*scale, *alpha_a, *alpha_b),
            DensitySpec::Table { xs, ys, alpha_a, alpha_b } => Density::table(xs.clone(), ys.clone(), *alpha_a, *alpha_b),
        }
    }
}

/// A string: point masses and optionally a density part.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StringFile {
    pub interval: [f64; 2],
    #[serde(default)]
    pub positions: Vec<Num>,
    #[serde(default)]
    pub masses: Vec<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySpec>,
}

impl StringFile {
    fn check_lengths(&self) -> Result<()> {
        if self.positions.len() != self.masses.len() {
            return Err(Error::invalid(format!(
                "positions: {} entries but masses has {}",
                self.positions.len(),
                self.masses.len()
            )));
        }
        Ok(())
    }

    pub fn is_finite_string(&self) -> bool {
        self.density.is_none()
    }

    pub fn to_string_f64(&self) -> Result<StieltjesString<f64>> {
        if self.density.is_some() {
            return Err(Error::invalid("density: a finite string has no density part"));
        }
        self.check_lengths()?;
        let xs = all_f64(&self.positions, "positions")?;
        let ms = all_f64(&self.masses, "masses")?;
        let atoms: Vec<(f64, f64)> = xs.into_iter().zip(ms).collect();
        StieltjesString::from_masses(interval_of(self.interval)?, &atoms)
    }

    /// Multiprecision copy; string entries are parsed directly at `bits`.
    pub fn to_string_mp(&self, bits: usize) -> Result<StieltjesString<Mpf>> {
        let s = self.to_string_f64()?;
        let xs = self.positions.iter().map(|x| x.to_mpf(bits)).collect::<Result<Vec<_>>>()?;
        let ms = self.masses.iter().map(|x| x.to_mpf(bits)).collect::<Result<Vec<_>>>()?;
        let mut pairs: Vec<(Mpf, Mpf)> = xs.into_iter().zip(ms).collect();
        pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).expect("finite"));
        if pairs.len() != s.len() {
            return Err(Error::invalid("positions: repeated positions need a double-precision run"));
        }
        let (xs, ms) = pairs.into_iter().unzip();
        StieltjesString::from_positions(s.interval(), xs, ms)
    }

    pub fn to_mass_distribution(&self) -> Result<MassDistribution> {
        self.check_lengths()?;
        let xs = all_f64(&self.positions, "positions")?;
        let ms = all_f64(&self.masses, "masses")?;
        MassDistribution::new(
            interval_of(self.interval)?,
            xs.into_iter().zip(ms).collect(),
            self.density.as_ref().map(DensitySpec::to_density),
        )
    }

    pub fn from_string(s: &StieltjesString<f64>) -> Self {
        let iv = s.interval();
        StringFile {
            interval: [iv.a, iv.b],
            positions: s.positions().iter().map(|&x| Num::F(x)).collect(),
            masses: s.masses().iter().map(|&x| Num::F(x)).collect(),
            density: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub lambda: Num,
    pub weight: Num,
}

/// Generated infinite measures.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// Spectral measure of the unit density.
    UniformString,
    /// Constant weights on the squares `(kπ/L)²`.
    SquaresConstantWeight { weight: f64 },
}

/// A spectral measure: finite atoms or a generated family.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    pub interval: [f64; 2],
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
}

impl MeasureFile {
    pub fn to_measure(&self) -> Result<SpectralMeasure<f64>> {
        let iv = interval_of(self.interval)?;
        match &self.family {
            Some(f) => {
                if !self.atoms.is_empty() {
                    return Err(Error::invalid("atoms: give either atoms or a family, not both"));
                }
                Ok(match f {
                    FamilySpec::UniformString => SpectralMeasure::uniform_string(iv),
                    FamilySpec::SquaresConstantWeight { weight } => {
                        if !(weight.is_finite() && *weight > 0.0) {
                            return Err(Error::invalid("family.weight: must be positive"));
                        }
                        SpectralMeasure::squares_constant_weight(iv, *weight)
                    }
                })
            }
            None => {
                let atoms = self
                    .atoms
                    .iter()
                    .enumerate()
                    .map(|(k, a)| {
                        Ok(Atom {
                            lambda: a.lambda.to_f64().map_err(at(format!("atoms[{k}].lambda")))?,
                            weight: a.weight.to_f64().map_err(at(format!("atoms[{k}].weight")))?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                SpectralMeasure::from_unsorted(iv, atoms)
            }
        }
    }

    /// Finite atoms at `bits` precision.
    pub fn to_measure_mp(&self, bits: usize) -> Result<SpectralMeasure<Mpf>> {
        if self.family.is_some() {
            return Err(Error::invalid("family: generated measures are double precision only"));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Ok(Atom { lambda: a.lambda.to_mpf(bits)?, weight: a.weight.to_mpf(bits)? }))
            .collect::<Result<Vec<_>>>()?;
        SpectralMeasure::from_unsorted(interval_of(self.interval)?, atoms)
    }

    pub fn from_measure(rho: &SpectralMeasure<f64>) -> Self {
        let iv = rho.interval();
        MeasureFile {
            interval: [iv.a, iv.b],
            atoms: rho.atoms().iter().map(|a| AtomSpec { lambda: Num::F(a.lambda), weight: Num::F(a.weight) }).collect(),
            family: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TripleFile {
    pub interval: [f64; 2],
    pub split: f64,
    pub sigma: Vec<Num>,
    #[serde(default)]
    pub sigma_a: Vec<Num>,
    #[serde(default)]
    pub sigma_b: Vec<Num>,
    /// `[λ, c]` pairs for the common eigenvalues.
    #[serde(default)]
    pub couplings: Vec<[Num; 2]>,
}

impl TripleFile {
    pub fn to_triple(&self) -> Result<ThreeSpectraTriple> {
        let couplings = self
            .couplings
            .iter()
            .enumerate()
            .map(|(k, [l, c])| {
                let f = |x: &Num| x.to_f64().map_err(at(format!("couplings[{k}]")));
                Ok((f(l)?, f(c)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let t = ThreeSpectraTriple {
            interval: interval_of(self.interval)?,
            split: self.split,
            sigma: all_f64(&self.sigma, "sigma")?,
            sigma_a: all_f64(&self.sigma_a, "sigma_a")?,
            sigma_b: all_f64(&self.sigma_b, "sigma_b")?,
            couplings,
        };
        t.check_shape()?;
        Ok(t)
    }

    pub fn from_triple(t: &ThreeSpectraTriple) -> Self {
        let nums = |v: &[f64]| v.iter().map(|&x| Num::F(x)).collect();
        TripleFile {
            interval: [t.interval.a, t.interval.b],
            split: t.split,
            sigma: nums(&t.sigma),
            sigma_a: nums(&t.sigma_a),
            sigma_b: nums(&t.sigma_b),
            couplings: t.couplings.iter().map(|&(l, c)| [Num::F(l), Num::F(c)]).collect(),
        }
    }
}

/// Parses JSON text; errors name the offending field path.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::invalid(format!("malformed JSON at `{path}`: {}", e.into_inner()))
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    parse_json(&text).map_err(at(path.display().to_string()))
}

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_with_fractions() {
        let f: StringFile =
            parse_json(r#"{"interval":[0,1],"positions":["1/3","2/3"],"masses":[1,1]}"#).unwrap();
        let s = f.to_string_f64().unwrap();
        assert_eq!(s.positions(), &[1.0 / 3.0, 2.0 / 3.0]);
        let m = f.to_string_mp(128).unwrap();
        assert_eq!(m.positions()[0].precision(), 128);
    }

    #[test]
    fn error_names_field() {
        let e = parse_json::<TripleFile>(r#"{"interval":[0,1],"split":0.5,"sigma":[true]}"#).unwrap_err();
        assert!(e.to_string().contains("sigma"), "{e}");
        let e = parse_json::<StringFile>(r#"{"interval":[0,1],"mass":[1]}"#).unwrap_err();
        assert!(e.to_string().contains("mass"), "{e}");
    }

    #[test]
    fn measure_family() {
        let f: MeasureFile = parse_json(r#"{"interval":[0,1],"family":{"kind":"uniform_string"}}"#).unwrap();
        assert!(!f.to_measure().unwrap().is_finite());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
    }
}
