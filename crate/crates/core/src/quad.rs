//! Gauss–Legendre panels, spectral integration matrices and adaptive quadrature.

use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// Nodes per panel used throughout.
pub const PANEL_NODES: usize = 16;

/// Gauss–Legendre rule on [-1, 1] together with its panel integration matrices.
#[derive(Debug)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `(S f)_i = ∫_{-1}^{x_i} p`, with `p` the interpolant of `f`.
    pub left_int: Vec<f64>,
    /// `(T f)_i = ∫_{-1}^{x_i} (x_i - t) p(t) dt`.
    pub left_int2: Vec<f64>,
    /// `∫_{x_i}^{1} p`.
    pub right_int: Vec<f64>,
    /// `∫_{x_i}^{1} (t - x_i) p(t) dt`.
    pub right_int2: Vec<f64>,
}

fn legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = x;
    }
    for k in 1..n {
        p[k + 1] = ((2 * k + 1) as f64 * x * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
    }
    p
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut pairs = GaussLegendre::new(n).expect("n >= 2").into_node_weight_pairs();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

impl PanelRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        // Single and double antiderivatives from -1 of P_0..P_{n+1} at each node.
        let int1 = |p: &[f64], x: f64, k: usize| -> f64 {
            if k == 0 {
                x + 1.0
            } else {
                (p[k + 1] - p[k - 1]) / (2 * k + 1) as f64
            }
        };
        let mut left_int = vec![0.0; n * n];
        let mut left_int2 = vec![0.0; n * n];
        let pj: Vec<Vec<f64>> = nodes.iter().map(|&x| legendre_all(n + 1, x)).collect();
        for (i, &xi) in nodes.iter().enumerate() {
            let p = legendre_all(n + 2, xi);
            let i1: Vec<f64> = (0..=n).map(|k| int1(&p, xi, k)).collect();
            let i2: Vec<f64> = (0..n)
                .map(|k| {
                    if k == 0 {
                        (xi + 1.0).powi(2) / 2.0
                    } else {
                        (i1[k + 1] - i1[k - 1]) / (2 * k + 1) as f64
                    }
                })
                .collect();
            for j in 0..n {
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                for k in 0..n {
                    let c = weights[j] * pj[j][k] * (2 * k + 1) as f64 / 2.0;
                    s1 += c * i1[k];
                    s2 += c * i2[k];
                }
                left_int[i * n + j] = s1;
                left_int2[i * n + j] = s2;
            }
        }
        let mut right_int = vec![0.0; n * n];
        let mut right_int2 = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                right_int[i * n + j] = weights[j] - left_int[i * n + j];
                right_int2[i * n + j] = weights[j] * (nodes[j] - nodes[i]) + left_int2[i * n + j];
            }
        }
        PanelRule { nodes, weights, left_int, left_int2, right_int, right_int2 }
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Standard panel rule, built once.
    pub fn standard() -> &'static PanelRule {
        static RULE: OnceLock<PanelRule> = OnceLock::new();
        RULE.get_or_init(|| PanelRule::new(PANEL_NODES))
    }

    /// Nodes and weights mapped to `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (c + h * x, h * w))
    }
}

fn gauss_on(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64) -> f64 {
    PanelRule::standard().mapped(lo, hi).map(|(x, w)| w * f(x)).sum()
}

/// Adaptive Gauss–Legendre integration of a smooth-on-pieces function.
///
/// Returns the value and an error estimate; fails if `max(abs_tol, rel_tol*|I|)` is not met.
pub fn adaptive(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    if lo == hi {
        return Ok((0.0, 0.0));
    }
    const MAX_PANELS: usize = 20_000;
    let mut stack = vec![(lo, hi, gauss_on(&mut f, lo, hi), 0u32)];
    let mut total = 0.0;
    let mut err_total = 0.0;
    let mut panels = 0;
    let span = (hi - lo).abs();
    let mut rough = stack[0].2.abs();
    while let Some((a, b, whole, depth)) = stack.pop() {
        panels += 1;
        let m = 0.5 * (a + b);
        let left = gauss_on(&mut f, a, m);
        let right = gauss_on(&mut f, m, b);
        let refined = left + right;
        if !refined.is_finite() {
            return Err(Error::Quadrature { lo: a, hi: b, estimate: f64::INFINITY });
        }
        let err = (refined - whole).abs();
        rough = rough.max(refined.abs());
        let share = ((b - a).abs() / span).max(1e-3);
        let target = abs_tol.max(rel_tol * rough) * share;
        if err <= target || depth >= 60 || (b - a).abs() <= 1e-15 * a.abs().max(b.abs()) {
            if err > target && err > abs_tol.max(rel_tol * rough) {
                return Err(Error::Quadrature { lo: a, hi: b, estimate: err });
            }
            total += refined;
            err_total += err;
        } else {
            if panels > MAX_PANELS {
                return Err(Error::Quadrature { lo, hi, estimate: err });
            }
            stack.push((a, m, left, depth + 1));
            stack.push((m, b, right, depth + 1));
        }
    }
    Ok((total, err_total))
}

/// `∫_lo^hi f` for an integrand behaving like `(x - lo)^{-beta}` at `lo` (`beta < 1`).
///
/// Substitutes `x = lo + (hi - lo) t^q` with `q = 1/(1 - beta)`, making the integrand bounded.
pub fn endpoint_singular(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    beta: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    if beta <= 0.0 {
        return adaptive(f, lo, hi, abs_tol, rel_tol);
    }
    if beta >= 1.0 {
        return Err(Error::invalid(format!("non-integrable endpoint exponent {beta}")));
    }
    let q = 1.0 / (1.0 - beta);
    let len = hi - lo;
    adaptive(
        |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            let x = lo + len * t.powf(q);
            if x == lo {
                return 0.0;
            }
            f(x) * len * q * t.powf(q - 1.0)
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integration_matrices_exact_on_polynomials() {
        let r = PanelRule::standard();
        let n = r.n();
        // p(t) = t^5 - 2 t^2 + 1
        let f: Vec<f64> = r.nodes.iter().map(|&t| t.powi(5) - 2.0 * t * t + 1.0).collect();
        let anti = |x: f64| x.powi(6) / 6.0 - 2.0 * x.powi(3) / 3.0 + x;
        let anti2 = |x: f64| x.powi(7) / 42.0 - x.powi(4) / 6.0 + x * x / 2.0;
        for i in 0..n {
            let xi = r.nodes[i];
            let s: f64 = (0..n).map(|j| r.left_int[i * n + j] * f[j]).sum();
            assert!((s - (anti(xi) - anti(-1.0))).abs() < 1e-13);
            // ∫_{-1}^{x} (x-t) p = A2(x) - A2(-1) - (x+1) A1(-1)
            let t: f64 = (0..n).map(|j| r.left_int2[i * n + j] * f[j]).sum();
            let expect = anti2(xi) - anti2(-1.0) - (xi + 1.0) * anti(-1.0);
            assert!((t - expect).abs() < 1e-13, "{t} {expect}");
            let rr: f64 = (0..n).map(|j| r.right_int[i * n + j] * f[j]).sum();
            assert!((rr - (anti(1.0) - anti(xi))).abs() < 1e-13);
            // ∫_x^1 (t-x) p = (1-x) A1(1) - A2(1) + A2(x)
            let r2: f64 = (0..n).map(|j| r.right_int2[i * n + j] * f[j]).sum();
            let expect2 = (1.0 - xi) * anti(1.0) - anti2(1.0) + anti2(xi);
            assert!((r2 - expect2).abs() < 1e-13, "{r2} {expect2}");
        }
    }

    #[test]
    fn adaptive_handles_kinks() {
        let (v, _) = adaptive(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-13, 1e-13).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-12);
    }

    #[test]
    fn endpoint_power_singularity() {
        let (v, _) =
            endpoint_singular(|x: f64| x.powf(-0.5) * (1.0 - x), 0.0, 1.0, 0.5, 1e-14, 1e-14).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-12, "{v}");
    }
}
