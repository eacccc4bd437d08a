use crate::error::{Error, Result};
use crate::model::mass::MassDistribution;
use crate::quad;

/// Default tolerance for density quadrature.
pub const QUAD_TOL: f64 = 1e-13;

/// `∫_{[α, β)} g dω`, oriented: swapping the limits flips the sign.
pub fn ls_integral(w: &MassDistribution, g: impl Fn(f64) -> f64, alpha: f64, beta: f64) -> Result<f64> {
    ls_integral_tol(w, g, alpha, beta, QUAD_TOL)
}

pub fn ls_integral_tol(
    w: &MassDistribution,
    g: impl Fn(f64) -> f64,
    alpha: f64,
    beta: f64,
    tol: f64,
) -> Result<f64> {
    let i = w.interval();
    for v in [alpha, beta] {
        if !(v >= i.a && v <= i.b) {
            return Err(Error::invalid(format!("limit {v} outside [{}, {}]", i.a, i.b)));
        }
    }
    if alpha == beta {
        return Ok(0.0);
    }
    if alpha > beta {
        return ls_integral_tol(w, g, beta, alpha, tol).map(|v| -v);
    }
    let mut total = 0.0;
    for &(x, m) in w.atoms() {
        if alpha <= x && x < beta {
            let v = g(x);
            if !v.is_finite() {
                return Err(Error::invalid(format!("integrand not finite at {x}")));
            }
            total += m * v;
        }
    }
    if w.density().is_some() {
        total += density_integral(w, &g, alpha, beta, 0.0, 0.0, tol)?.0;
    }
    Ok(total)
}

/// `∫_lo^hi g ρ dx` for the density part. `order_a`/`order_b` state how fast `g`
/// vanishes at the endpoints (`g ~ (x-a)^order_a`), used to pick endpoint maps.
pub(crate) fn density_integral(
    w: &MassDistribution,
    g: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    order_a: f64,
    order_b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let Some(d) = w.density() else { return Ok((0.0, 0.0)) };
    let i = w.interval();
    let mut cuts = vec![lo];
    cuts.extend(d.kinks().into_iter().filter(|&k| lo < k && k < hi));
    cuts.push(hi);
    // Keep endpoint pieces separate so each has at most one singular end.
    let touches_a = lo == i.a;
    let touches_b = hi == i.b;
    if touches_a || touches_b {
        let mid = i.midpoint().clamp(lo, hi);
        if lo < mid && mid < hi && !cuts.contains(&mid) {
            cuts.push(mid);
            cuts.sort_by(f64::total_cmp);
        }
    }
    let f = |x: f64| g(x) * w.density_at(x);
    let mut total = 0.0;
    let mut err = 0.0;
    let n = cuts.len() - 1;
    for k in 0..n {
        let (p, q) = (cuts[k], cuts[k + 1]);
        let (v, e) = if k == 0 && touches_a {
            singular_piece(&f, p, q, d.alpha_a - order_a, false, tol)?
        } else if k == n - 1 && touches_b {
            singular_piece(&f, p, q, d.alpha_b - order_b, true, tol)?
        } else {
            quad::adaptive(f, p, q, tol * 1e-3, tol)?
        };
        total += v;
        err += e;
    }
    Ok((total, err))
}

fn singular_piece(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    beta: f64,
    at_hi: bool,
    tol: f64,
) -> Result<(f64, f64)> {
    if beta >= 1.0 {
        return Err(Error::invalid(format!(
            "integral diverges at the endpoint (effective exponent {beta})"
        )));
    }
    // Map the singular end to 0 with x = end ± len t^q.
    let q = if beta > 0.0 {
        1.0 / (1.0 - beta)
    } else if beta < 0.0 && beta.fract() != 0.0 {
        2.0
    } else {
        1.0
    };
    let len = hi - lo;
    let map = |t: f64| if at_hi { hi - len * t.powf(q) } else { lo + len * t.powf(q) };
    quad::adaptive(
        |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            let x = map(t);
            if x <= lo && !at_hi || x >= hi && at_hi {
                return 0.0;
            }
            f(x) * len * q * t.powf(q - 1.0)
        },
        0.0,
        1.0,
        tol * 1e-3,
        tol,
    )
}

/// Certificate that `∫ (b-x)(x-a) dω` is finite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassCertificate {
    /// `∫ (b-x)(x-a) dω`.
    pub weighted_total: f64,
    pub error_estimate: f64,
    pub finite_near_a: bool,
    pub finite_near_b: bool,
}

impl MassCertificate {
    /// `Σ 1/λ` of the associated spectrum.
    pub fn trace_total(&self, len: f64) -> f64 {
        self.weighted_total / len
    }
}

pub fn validate_mass(w: &MassDistribution) -> Result<MassCertificate> {
    let i = w.interval();
    let atoms: f64 = w.atoms().iter().map(|&(x, m)| m * (i.b - x) * (x - i.a)).sum();
    let (dens, err) = match w.density() {
        Some(_) => density_integral(w, &|x| (i.b - x) * (x - i.a), i.a, i.b, 1.0, 1.0, QUAD_TOL)?,
        None => (0.0, 0.0),
    };
    let total = atoms + dens;
    if !total.is_finite() {
        return Err(Error::invalid("weighted total mass is not finite"));
    }
    Ok(MassCertificate {
        weighted_total: total,
        error_estimate: err,
        finite_near_a: w.finite_near_a(),
        finite_near_b: w.finite_near_b(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Density, Interval};

    fn unit() -> Interval {
        Interval::unit()
    }

    #[test]
    fn half_open_convention() {
        let w = MassDistribution::new(unit(), vec![(0.5, 2.0)], None).unwrap();
        assert_eq!(ls_integral(&w, |_| 1.0, 0.5, 0.7).unwrap(), 2.0);
        assert_eq!(ls_integral(&w, |_| 1.0, 0.2, 0.5).unwrap(), 0.0);
        assert_eq!(ls_integral(&w, |_| 1.0, 0.7, 0.5).unwrap(), -2.0);
    }

    #[test]
    fn uniform_density_moments() {
        let w = MassDistribution::from_density(unit(), Density::uniform(1.0)).unwrap();
        let v = ls_integral(&w, |x| x * x, 0.0, 1.0).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
        let c = validate_mass(&w).unwrap();
        assert!((c.weighted_total - 1.0 / 6.0).abs() < 1e-14);
        assert!(c.finite_near_a && c.finite_near_b);
    }

    #[test]
    fn singular_weighted_total() {
        // ∫ x^{-3/2} (1-x) x dx = 4/3
        let w = MassDistribution::from_density(unit(), Density::power(1.0, 1.5, 0.0)).unwrap();
        let c = validate_mass(&w).unwrap();
        assert!((c.weighted_total - 4.0 / 3.0).abs() < 1e-12, "{}", c.weighted_total);
        assert!(!c.finite_near_a && c.finite_near_b);
        assert!(ls_integral(&w, |_| 1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn table_density_kinks() {
        let d = Density::table(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0], 0.0, 0.0);
        let w = MassDistribution::from_density(unit(), d).unwrap();
        let v = ls_integral(&w, |_| 1.0, 0.0, 1.0).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_too_singular() {
        assert!(MassDistribution::from_density(unit(), Density::power(1.0, 2.0, 0.0)).is_err());
    }
}
