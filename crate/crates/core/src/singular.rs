//! Forward problem for general mass distributions (densities with endpoint singularities).
//!
//! Solutions are propagated panel by panel: on each Gauss–Legendre panel the Volterra
//! equation is solved by its Neumann series, restarted from the panel's left (or right)
//! end. Panels are sized so `|z| h ∫_panel dω <= budget`, which bounds the series by
//! `budget^k / k!`. Near a singular endpoint the grid is graded geometrically down to a
//! cutoff where the neglected part of `∫ (s - a) dω` is below tolerance.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{density_integral, validate_mass, Atom, Interval, MassDistribution, SpectralMeasure};
use crate::quad::{self, PanelRule};

/// Scalar carried through a sweep: real for root finding, complex otherwise.
pub trait Amp:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Mul<f64, Output = Self> + Neg<Output = Self>
{
    fn from_re(x: f64) -> Self;
    fn norm(self) -> f64;
}

impl Amp for f64 {
    fn from_re(x: f64) -> Self {
        x
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl Amp for Complex64 {
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
}

#[derive(Clone, Debug)]
pub struct SingularConfig {
    /// Target accuracy of computed quantities.
    pub tol: f64,
    /// Maximum Neumann-series terms on a panel or in the global series.
    pub max_terms: usize,
    /// Panel size bound `|z| h ∫_panel dω`.
    pub budget: f64,
    /// `|z| ∫_a^x p dω` above which the global series is replaced by restarted sweeps.
    pub restart_threshold: f64,
}

impl Default for SingularConfig {
    fn default() -> Self {
        SingularConfig { tol: 1e-12, max_terms: 400, budget: 1.0, restart_threshold: 3.0 }
    }
}

impl SingularConfig {
    pub fn with_tol(tol: f64) -> Self {
        SingularConfig { tol, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug)]
enum Seg {
    Gap { lo: f64, hi: f64 },
    Atom { x: f64, m: f64, node: usize },
    Panel { lo: f64, hi: f64, first: usize },
}

impl Seg {
    fn pos(&self) -> f64 {
        match *self {
            Seg::Gap { lo, .. } | Seg::Panel { lo, .. } => lo,
            Seg::Atom { x, .. } => x,
        }
    }
}

/// Discretization of `ω` on `[start, end] ⊂ (a, b)` valid for `|z| <= zmax`.
#[derive(Clone, Debug)]
pub struct Grid {
    interval: Interval,
    start: f64,
    end: f64,
    segs: Vec<Seg>,
    /// Node positions (panel nodes and atoms), increasing.
    pub xs: Vec<f64>,
    /// `ω`-weights of nodes.
    pub wt: Vec<f64>,
    rho: Vec<f64>,
    /// `∫_a^start (s - a) dω` and `∫_end^b (b - s) dω`: parts left out of the sweeps.
    pub neglected: (f64, f64),
    zmax: f64,
}

/// Dyadic breaks towards an endpoint, from the midpoint until the cut-off tail is negligible.
///
/// `near` is the distance from the endpoint to the closest point of interest; solutions
/// there are of that size, so the tail must be small against it.
fn grading(w: &MassDistribution, left: bool, near: f64, zmax: f64, tol: f64) -> Result<(Vec<f64>, f64)> {
    let i = w.interval();
    let h0 = 0.25 * i.len();
    let target = tol * 1e-2 * (near / i.len()).min(1.0) / zmax.max(1.0);
    let mut points = Vec::new();
    let mut h = h0;
    for _ in 0..3000 {
        let p = if left { i.a + h } else { i.b - h };
        if (left && p <= i.a) || (!left && p >= i.b) {
            break;
        }
        points.push(p);
        let j = if left {
            density_integral(w, &|s| s - i.a, i.a, p, 1.0, 0.0, 1e-6)?.0
        } else {
            density_integral(w, &|s| i.b - s, p, i.b, 0.0, 1.0, 1e-6)?.0
        };
        if j <= target {
            return Ok((points, j));
        }
        h *= 0.5;
    }
    Err(Error::ToleranceUnreachable {
        requested: tol,
        achieved: f64::NAN,
        detail: "endpoint too singular to cut off in double precision".into(),
    })
}

impl Grid {
    pub fn build(w: &MassDistribution, zmax: f64, extra: &[f64], cfg: &SingularConfig) -> Result<Grid> {
        let i = w.interval();
        let zs = zmax.max(1.0);
        let mut breaks: Vec<f64> = Vec::new();
        let mut interior: Vec<f64> = w.atoms().iter().map(|p| p.0).collect();
        if let Some(d) = w.density() {
            interior.extend(d.kinks().into_iter().filter(|&k| i.contains_open(k)));
        }
        interior.extend(extra.iter().copied().filter(|&x| i.contains_open(x)));
        let near_a = interior.iter().fold(i.len(), |d, &x| d.min(x - i.a));
        let near_b = interior.iter().fold(i.len(), |d, &x| d.min(i.b - x));
        let has_density = w.density().is_some();
        let (start, head) = if has_density && w.alpha_a() != 0.0 {
            let (pts, j) = grading(w, true, near_a, zs, cfg.tol)?;
            breaks.extend(&pts);
            (*pts.last().expect("non-empty"), j)
        } else {
            (i.a, 0.0)
        };
        let (end, tail) = if has_density && w.alpha_b() != 0.0 {
            let (pts, j) = grading(w, false, near_b, zs, cfg.tol)?;
            breaks.extend(&pts);
            (*pts.last().expect("non-empty"), j)
        } else {
            (i.b, 0.0)
        };
        breaks.push(start);
        breaks.push(end);
        breaks.extend(interior.iter().copied().filter(|&x| start < x && x < end));
        breaks.retain(|&x| start <= x && x <= end);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let rule = PanelRule::standard();
        let mut segs = Vec::new();
        let (mut xs, mut wt, mut rho) = (Vec::new(), Vec::new(), Vec::new());
        let atom_at = |x: f64| w.atoms().binary_search_by(|p| p.0.total_cmp(&x)).ok().map(|k| w.atoms()[k].1);
        let max_width = i.len() / 8.0;
        for win in breaks.windows(2) {
            let (p, q) = (win[0], win[1]);
            if has_density {
                let mass = quad::adaptive(|x| w.density_at(x), p, q, 1e-300, 1e-8)?.0;
                let by_z = (zs * (q - p) * mass / cfg.budget).sqrt().ceil();
                let by_width = ((q - p) / max_width).ceil();
                let n = by_z.max(by_width).max(1.0) as usize;
                let h = (q - p) / n as f64;
                for k in 0..n {
                    let lo = p + k as f64 * h;
                    let hi = if k + 1 == n { q } else { p + (k + 1) as f64 * h };
                    segs.push(Seg::Panel { lo, hi, first: xs.len() });
                    for (x, wq) in rule.mapped(lo, hi) {
                        let r = w.density_at(x);
                        xs.push(x);
                        wt.push(wq * r);
                        rho.push(r);
                    }
                }
            } else {
                segs.push(Seg::Gap { lo: p, hi: q });
            }
            if q < end {
                if let Some(m) = atom_at(q) {
                    segs.push(Seg::Atom { x: q, m, node: xs.len() });
                    xs.push(q);
                    wt.push(m);
                    rho.push(0.0);
                }
            }
        }
        // Atom exactly at a break that is the start (cannot happen for interior atoms) is ignored.
        Ok(Grid { interval: i, start, end, segs, xs, wt, rho, neglected: (head, tail), zmax: zs })
    }

    pub fn zmax(&self) -> f64 {
        self.zmax
    }

    /// First segment at or to the right of `x`.
    fn split_index(&self, x: f64) -> usize {
        self.segs.iter().position(|s| s.pos() >= x).unwrap_or(self.segs.len())
    }

    fn panel_series<C: Amp>(&self, z: C, first: usize, h2: f64, u0: Vec<C>, right: bool, cfg: &SingularConfig) -> Result<Vec<C>> {
        let rule = PanelRule::standard();
        let n = rule.n();
        let mat = if right { &rule.right_int2 } else { &rule.left_int2 };
        let rho = &self.rho[first..first + n];
        let mass: f64 = self.wt[first..first + n].iter().sum();
        let q = z.norm() * 2.0 * h2 * mass;
        let mut sum = u0.clone();
        let mut term = u0;
        let mut bound = 1.0;
        let scale = h2 * h2;
        for k in 1..=cfg.max_terms {
            let g: Vec<C> = term.iter().zip(rho).map(|(t, r)| *t * *r).collect();
            let mut next = vec![C::from_re(0.0); n];
            let mut tmax = 0.0f64;
            for (i, out) in next.iter_mut().enumerate() {
                let row = &mat[i * n..(i + 1) * n];
                let mut acc = C::from_re(0.0);
                for j in 0..n {
                    acc = acc + g[j] * row[j];
                }
                *out = -(z * acc) * scale;
                tmax = tmax.max(out.norm());
            }
            let smax = sum.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (s, t) in sum.iter_mut().zip(&next) {
                *s = *s + *t;
            }
            term = next;
            bound *= q / k as f64;
            if bound <= 1e-17 || (tmax <= 1e-17 * smax && bound <= 1e-8) {
                return Ok(sum);
            }
        }
        Err(Error::ToleranceUnreachable {
            requested: cfg.tol,
            achieved: bound,
            detail: "panel series did not converge".into(),
        })
    }

    /// Propagates `(u, u')` rightwards over `segs[range]`, storing node values into `vals`.
    fn sweep_right<C: Amp>(&self, z: C, upto: usize, init: (C, C), vals: &mut [C], cfg: &SingularConfig) -> Result<(C, C)> {
        let rule = PanelRule::standard();
        let n = rule.n();
        let (mut u, mut du) = init;
        for seg in &self.segs[..upto] {
            match *seg {
                Seg::Gap { lo, hi } => u = u + du * (hi - lo),
                Seg::Atom { m, node, .. } => {
                    vals[node] = u;
                    du = du - z * u * m;
                }
                Seg::Panel { lo, hi, first } => {
                    let h2 = 0.5 * (hi - lo);
                    let u0: Vec<C> = (0..n).map(|j| u + du * (self.xs[first + j] - lo)).collect();
                    let uu = self.panel_series(z, first, h2, u0, false, cfg)?;
                    let mut i0 = C::from_re(0.0);
                    let mut i1 = C::from_re(0.0);
                    for j in 0..n {
                        let g = uu[j] * self.wt[first + j];
                        i0 = i0 + g;
                        i1 = i1 + g * (hi - self.xs[first + j]);
                        vals[first + j] = uu[j];
                    }
                    u = u + du * (hi - lo) - z * i1;
                    du = du - z * i0;
                }
            }
        }
        Ok((u, du))
    }

    /// Propagates `(u, u')` leftwards over `segs[from..]`, returning value and left derivative.
    fn sweep_left<C: Amp>(&self, z: C, from: usize, init: (C, C), vals: &mut [C], cfg: &SingularConfig) -> Result<(C, C)> {
        let rule = PanelRule::standard();
        let n = rule.n();
        let (mut u, mut du) = init;
        for seg in self.segs[from..].iter().rev() {
            match *seg {
                Seg::Gap { lo, hi } => u = u - du * (hi - lo),
                Seg::Atom { m, node, .. } => {
                    vals[node] = u;
                    du = du + z * u * m;
                }
                Seg::Panel { lo, hi, first } => {
                    let h2 = 0.5 * (hi - lo);
                    let u0: Vec<C> = (0..n).map(|j| u - du * (hi - self.xs[first + j])).collect();
                    let uu = self.panel_series(z, first, h2, u0, true, cfg)?;
                    let mut i0 = C::from_re(0.0);
                    let mut i1 = C::from_re(0.0);
                    for j in 0..n {
                        let g = uu[j] * self.wt[first + j];
                        i0 = i0 + g;
                        i1 = i1 + g * (self.xs[first + j] - lo);
                        vals[first + j] = uu[j];
                    }
                    u = u - du * (hi - lo) - z * i1;
                    du = du + z * i0;
                }
            }
        }
        Ok((u, du))
    }

    fn init_a<C: Amp>(&self) -> (C, C) {
        (C::from_re(self.start - self.interval.a), C::from_re(1.0))
    }

    fn init_b<C: Amp>(&self) -> (C, C) {
        (C::from_re(self.interval.b - self.end), C::from_re(-1.0))
    }

    /// `φ_a` at every node and its end values at `end`.
    pub fn phi_a_full<C: Amp>(&self, z: C, cfg: &SingularConfig) -> Result<(Vec<C>, (C, C))> {
        let mut vals = vec![C::from_re(0.0); self.xs.len()];
        let end = self.sweep_right(z, self.segs.len(), self.init_a(), &mut vals, cfg)?;
        Ok((vals, end))
    }

    /// `φ_b` at every node and its values at `start`.
    pub fn phi_b_full<C: Amp>(&self, z: C, cfg: &SingularConfig) -> Result<(Vec<C>, (C, C))> {
        let mut vals = vec![C::from_re(0.0); self.xs.len()];
        let end = self.sweep_left(z, 0, self.init_b(), &mut vals, cfg)?;
        Ok((vals, end))
    }

    /// `(φ_a, φ_a', φ_b, φ_b')` at a break point `x`, derivatives left-continuous.
    pub fn pair_at<C: Amp>(&self, z: C, x: f64, cfg: &SingularConfig) -> Result<[C; 4]> {
        let k = self.split_index(x);
        let mut scratch = vec![C::from_re(0.0); self.xs.len()];
        let (ua, dua) = self.sweep_right(z, k, self.init_a(), &mut scratch, cfg)?;
        let (ub, dub) = self.sweep_left(z, k, self.init_b(), &mut scratch, cfg)?;
        Ok([ua, dua, ub, dub])
    }

    /// `W(z) = φ_b φ_a' - φ_b' φ_a` evaluated at the break point `x`.
    pub fn wronskian_at<C: Amp>(&self, z: C, x: f64, cfg: &SingularConfig) -> Result<C> {
        let [ua, dua, ub, dub] = self.pair_at(z, x, cfg)?;
        Ok(ub * dua - dub * ua)
    }

    /// Sign changes of `φ_a(λ, ·)` on `(a, end]`: the number of eigenvalues below `λ`.
    pub fn oscillation_count(&self, lambda: f64, cfg: &SingularConfig) -> Result<usize> {
        let (vals, (end, _)) = self.phi_a_full(lambda, cfg)?;
        let mut count = 0;
        let mut prev = 1.0f64;
        for v in vals.iter().copied().chain(std::iter::once(end)) {
            if v != 0.0 {
                if v.signum() != prev {
                    count += 1;
                }
                prev = v.signum();
            }
        }
        Ok(count)
    }
}

fn reference_point(w: &MassDistribution) -> f64 {
    w.interval().midpoint()
}

/// `Σ 1/λ = (b-a)⁻¹ ∫ (b-x)(x-a) dω`.
pub fn trace_total(w: &MassDistribution) -> Result<f64> {
    let c = validate_mass(w)?;
    Ok(c.trace_total(w.interval().len()))
}

/// Solutions and left derivatives at `x`.
#[derive(Clone, Copy, Debug)]
pub struct PhiPair {
    pub phi_a: Complex64,
    pub dphi_a: Complex64,
    pub phi_b: Complex64,
    pub dphi_b: Complex64,
}

pub fn phi_pair(w: &MassDistribution, z: Complex64, x: f64, cfg: &SingularConfig) -> Result<PhiPair> {
    let i = w.interval();
    if !i.contains_open(x) {
        return Err(Error::invalid(format!("point {x} outside ({}, {})", i.a, i.b)));
    }
    validate_mass(w)?;
    let g = Grid::build(w, z.norm(), &[x], cfg)?;
    if x <= g.start || x >= g.end {
        return Err(Error::ToleranceUnreachable {
            requested: cfg.tol,
            achieved: f64::NAN,
            detail: format!("point {x} lies inside the endpoint cutoff region"),
        });
    }
    let [phi_a, dphi_a, phi_b, dphi_b] = g.pair_at(z, x, cfg)?;
    Ok(PhiPair { phi_a, dphi_a, phi_b, dphi_b })
}

/// Characteristic function `W(z) = φ_b(z, a) = φ_a(z, b)`.
pub fn wronskian_fn(w: &MassDistribution, z: Complex64, cfg: &SingularConfig) -> Result<Complex64> {
    validate_mass(w)?;
    let c = reference_point(w);
    let g = Grid::build(w, z.norm(), &[c], cfg)?;
    g.wronskian_at(z, c, cfg)
}

/// Diagonal of the Green function, `φ_a(z,c) φ_b(z,c) / W(z)`.
pub fn green_diagonal(w: &MassDistribution, z: Complex64, c: f64, cfg: &SingularConfig) -> Result<Complex64> {
    let p = phi_pair(w, z, c, cfg)?;
    let wr = p.phi_b * p.dphi_a - p.dphi_b * p.phi_a;
    let scale = (p.phi_a.norm() * p.dphi_b.norm()).max(p.phi_b.norm() * p.dphi_a.norm()).max(1e-300);
    if wr.norm() <= cfg.tol * scale.max(w.interval().len()) {
        return Err(Error::NearEigenvalue { z: format!("{z}") });
    }
    Ok(p.phi_a * p.phi_b / wr)
}

/// Result of the series evaluation of `m_a(z, x) = φ_a(z, x)/(x - a)`.
#[derive(Clone, Copy, Debug)]
pub struct SeriesEvaluation {
    pub value: Complex64,
    /// Terms summed (per panel when restarted).
    pub terms_used: usize,
    /// Bound on the neglected tail.
    pub tail_bound: f64,
    /// Whether restarted panel sweeps replaced the global series.
    pub restarted: bool,
}

/// `m_a(z, x) = Σ_k (-z)^k (K_a^k 1)(x)`, with `K_a f(x) = (x-a)⁻¹ ∫_a^x (x-s)(s-a) f(s) dω(s)`.
pub fn m_a_series(w: &MassDistribution, z: Complex64, x: f64, cfg: &SingularConfig) -> Result<SeriesEvaluation> {
    let i = w.interval();
    if !i.contains_open(x) {
        return Err(Error::invalid(format!("point {x} outside ({}, {})", i.a, i.b)));
    }
    validate_mass(w)?;
    let g = Grid::build(w, z.norm(), &[x], cfg)?;
    let k = g.split_index(x);
    // I(x) = ∫_a^x (b-s)(s-a)/(b-a) dω bounds the iterates.
    let p = |s: f64| (i.b - s) * (s - i.a) / i.len();
    let mut big_i = g.neglected.0;
    let upto_node = g.segs[..k]
        .iter()
        .map(|s| match *s {
            Seg::Atom { node, .. } => node + 1,
            Seg::Panel { first, .. } => first + PanelRule::standard().n(),
            Seg::Gap { .. } => 0,
        })
        .max()
        .unwrap_or(0);
    for j in 0..upto_node {
        big_i += g.wt[j] * p(g.xs[j]);
    }
    let q = z.norm() * big_i;
    if q > cfg.restart_threshold {
        let [ua, ..] = g.pair_at(z, x, cfg)?;
        return Ok(SeriesEvaluation { value: ua / (x - i.a), terms_used: 0, tail_bound: cfg.tol, restarted: true });
    }
    let rule = PanelRule::standard();
    let n = rule.n();
    let mut f = vec![1.0f64; upto_node];
    let mut f_at_x = 1.0f64;
    let mut total = Complex64::new(1.0, 0.0);
    let mut zk = Complex64::new(1.0, 0.0);
    let mut abs_sum = 1.0;
    let mut bound_term = 1.0;
    for kk in 1..=cfg.max_terms {
        // g = (s-a) f; V g(y) = ∫_a^y (y - s) g dω via running moments.
        let mut next = vec![0.0f64; upto_node];
        let mut a0 = 0.0; // Σ g wt
        let mut bpos = 0.0; // Σ (pos - s) g wt at current pos
        let mut pos = g.start;
        for seg in &g.segs[..k] {
            match *seg {
                Seg::Gap { lo, hi } => {
                    bpos += (hi - lo) * a0;
                    pos = hi;
                }
                Seg::Atom { x: xa, node, .. } => {
                    let v = bpos + (xa - pos) * a0;
                    next[node] = v / (xa - i.a);
                    bpos = v;
                    pos = xa;
                    a0 += (xa - i.a) * f[node] * g.wt[node];
                }
                Seg::Panel { lo, hi, first } => {
                    let h2 = 0.5 * (hi - lo);
                    let gv: Vec<f64> = (0..n).map(|j| (g.xs[first + j] - i.a) * f[first + j] * g.rho[first + j]).collect();
                    for r in 0..n {
                        let row = &rule.left_int2[r * n..(r + 1) * n];
                        let local: f64 = row.iter().zip(&gv).map(|(m, v)| m * v).sum::<f64>() * h2 * h2;
                        let y = g.xs[first + r];
                        next[first + r] = (bpos + (y - lo) * a0 + local) / (y - i.a);
                    }
                    let mut s0 = 0.0;
                    let mut s1 = 0.0;
                    for j in 0..n {
                        let gw = (g.xs[first + j] - i.a) * f[first + j] * g.wt[first + j];
                        s0 += gw;
                        s1 += gw * (hi - g.xs[first + j]);
                    }
                    bpos += (hi - lo) * a0 + s1;
                    a0 += s0;
                    pos = hi;
                }
            }
        }
        let _ = pos;
        f_at_x = bpos / (x - i.a);
        f = next;
        zk *= -z;
        let term = zk * f_at_x;
        total += term;
        abs_sum += term.norm();
        bound_term *= q / kk as f64;
        // Tail Σ_{j>kk} q^j/j! <= bound_term * q/(kk+1) / (1 - q/(kk+2)).
        let r = q / (kk + 2) as f64;
        let tail = if r < 1.0 { bound_term * q / (kk + 1) as f64 / (1.0 - r) } else { f64::INFINITY };
        if tail <= cfg.tol * 1e-3 {
            if abs_sum * f64::EPSILON * 10.0 > cfg.tol {
                return Err(Error::ToleranceUnreachable {
                    requested: cfg.tol,
                    achieved: abs_sum * f64::EPSILON,
                    detail: "cancellation in the global series".into(),
                });
            }
            return Ok(SeriesEvaluation { value: total, terms_used: kk, tail_bound: tail, restarted: false });
        }
    }
    let _ = f_at_x;
    Err(Error::ToleranceUnreachable {
        requested: cfg.tol,
        achieved: f64::NAN,
        detail: format!("series needs more than {} terms", cfg.max_terms),
    })
}

fn illinois(f: &dyn Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo)?;
    let mut fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::MissedRoot(format!("no sign change of W on [{lo}, {hi}]")));
    }
    let mut side = 0i32;
    for it in 0..200 {
        let width_tol = tol.max(4.0 * f64::EPSILON * hi.abs());
        if hi - lo <= width_tol {
            break;
        }
        let mut x = (lo * fhi - hi * flo) / (fhi - flo);
        // Fall back to bisection when the secant stalls near an end.
        if !(x > lo && x < hi) || it % 4 == 3 {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Eigenvalues `<= lambda_max`, each bracketed to width `<= tol` (absolute, or
/// a few units in the last place for large eigenvalues).
pub fn eigenvalues_below(w: &MassDistribution, lambda_max: f64, tol: f64) -> Result<Vec<f64>> {
    let cfg = SingularConfig::with_tol(tol.min(1e-10));
    let grid = Grid::build(w, lambda_max * 1.05, &[reference_point(w)], &cfg)?;
    eigenvalues_on(&grid, w, lambda_max, tol, &cfg)
}

fn eigenvalues_on(grid: &Grid, w: &MassDistribution, lambda_max: f64, tol: f64, cfg: &SingularConfig) -> Result<Vec<f64>> {
    let trace = trace_total(w)?;
    let total = grid.oscillation_count(lambda_max, cfg)?;
    if total == 0 {
        return Ok(Vec::new());
    }
    if total as f64 > lambda_max * trace * (1.0 + 1e-9) + 1e-9 {
        return Err(Error::MissedRoot(format!(
            "oscillation count {total} exceeds the trace bound {}",
            lambda_max * trace
        )));
    }
    // Isolate by oscillation counts, bisecting in sqrt(z).
    let mut brackets = Vec::new();
    let mut stack = vec![(0.0f64, lambda_max, 0usize, total)];
    while let Some((lo, hi, clo, chi)) = stack.pop() {
        if chi == clo {
            continue;
        }
        if chi - clo == 1 {
            brackets.push((lo, hi));
            continue;
        }
        let t = 0.5 * (lo.sqrt() + hi.sqrt());
        let mid = t * t;
        if !(mid > lo && mid < hi) || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Err(Error::MissedRoot(format!("eigenvalues cluster within [{lo}, {hi}]")));
        }
        let cm = grid.oscillation_count(mid, cfg)?;
        if cm < clo || cm > chi {
            return Err(Error::MissedRoot(format!("non-monotone oscillation count near {mid}")));
        }
        stack.push((mid, hi, cm, chi));
        stack.push((lo, mid, clo, cm));
    }
    brackets.sort_by(|p, q| p.0.total_cmp(&q.0));
    let c = reference_point(w);
    let roots: Result<Vec<f64>> = brackets
        .par_iter()
        .map(|&(lo, hi)| illinois(&|z| grid.wronskian_at(z, c, cfg), lo.max(f64::MIN_POSITIVE), hi, tol))
        .collect();
    let roots = roots?;
    if roots.len() != total {
        return Err(Error::MissedRoot(format!("found {} of {total} eigenvalues", roots.len())));
    }
    Ok(roots)
}

/// Norming constant `γ² = ∫ φ_a² dω` at an eigenvalue, using a twisted reference node.
fn gamma_sq_on(grid: &Grid, lambda: f64, cfg: &SingularConfig) -> Result<(f64, f64, u8)> {
    let (ua, _) = grid.phi_a_full(lambda, cfg)?;
    let (vb, _) = grid.phi_b_full(lambda, cfg)?;
    let n = ua.len();
    if n == 0 {
        return Err(Error::invalid("measure has no mass"));
    }
    let mut run_a = vec![0.0; n];
    let mut run_b = vec![0.0; n];
    let mut acc = 0.0f64;
    for j in 0..n {
        acc = acc.max(ua[j].abs());
        run_a[j] = acc;
    }
    acc = 0.0;
    for j in (0..n).rev() {
        acc = acc.max(vb[j].abs());
        run_b[j] = acc;
    }
    let score = |j: usize| {
        if ua[j] == 0.0 || vb[j] == 0.0 {
            f64::INFINITY
        } else {
            (run_a[j] / ua[j].abs()).max(run_b[j] / vb[j].abs())
        }
    };
    // Only nodes where both sweeps are still proportional are trusted.
    let defect = |j: usize| {
        if n == 1 {
            return 0.0;
        }
        let (p, q) = if j + 1 < n { (j, j + 1) } else { (j - 1, j) };
        let (x, y) = (ua[p] * vb[q], ua[q] * vb[p]);
        (x - y).abs() / (x.abs() + y.abs())
    };
    let trusted: Vec<usize> = (0..n).filter(|&j| defect(j) <= 1e-6).collect();
    let pool: Vec<usize> = if trusted.is_empty() { (0..n).collect() } else { trusted };
    let r = pool.into_iter().min_by(|&i, &j| score(i).total_cmp(&score(j))).expect("nodes");
    let kappa = vb[r] / ua[r];
    let left: f64 = (0..=r).map(|j| grid.wt[j] * ua[j] * ua[j]).sum();
    let right: f64 = (r + 1..n).map(|j| grid.wt[j] * vb[j] * vb[j]).sum();
    Ok((left + right / (kappa * kappa), kappa.abs(), u8::from(kappa < 0.0)))
}

/// Restriction of the spectral measure of `ω` to `[0, Λ]`.
pub fn truncated_spectral_measure(w: &MassDistribution, lambda_max: f64, tol: f64) -> Result<SpectralMeasure<f64>> {
    let cfg = SingularConfig::with_tol(tol.min(1e-10));
    let grid = Grid::build(w, lambda_max * 1.05, &[reference_point(w)], &cfg)?;
    let sigma = eigenvalues_on(&grid, w, lambda_max, tol.min(1e-10), &cfg)?;
    let atoms: Result<Vec<Atom<f64>>> = sigma
        .par_iter()
        .map(|&l| gamma_sq_on(&grid, l, &cfg).map(|(g, _, _)| Atom { lambda: l, weight: 1.0 / g }))
        .collect();
    SpectralMeasure::new(w.interval(), atoms?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Density;
    use std::f64::consts::PI;

    fn uniform() -> MassDistribution {
        MassDistribution::from_density(Interval::unit(), Density::uniform(1.0)).unwrap()
    }

    #[test]
    fn uniform_wronskian_closed_form() {
        let cfg = SingularConfig::default();
        for z in [Complex64::new(3.0, 0.0), Complex64::new(-20.0, 5.0), Complex64::new(150.0, 1.0)] {
            let w = wronskian_fn(&uniform(), z, &cfg).unwrap();
            let s = z.sqrt();
            let exact = s.sin() / s;
            assert!((w - exact).norm() < 1e-12 * exact.norm().max(1.0), "{z}: {w} vs {exact}");
        }
    }

    #[test]
    fn uniform_eigenvalues_and_weights() {
        let m = truncated_spectral_measure(&uniform(), 50.0, 1e-10).unwrap();
        assert_eq!(m.len(), 2);
        for (k, a) in m.atoms().iter().enumerate() {
            let l = ((k + 1) as f64 * PI).powi(2);
            assert!((a.lambda - l).abs() < 1e-8);
            assert!((a.weight - 2.0 * l).abs() < 1e-7 * l);
        }
    }

    #[test]
    fn series_matches_closed_form() {
        let cfg = SingularConfig::default();
        let z = Complex64::new(PI * PI / 4.0, 0.0);
        let e = m_a_series(&uniform(), z, 0.5, &cfg).unwrap();
        let exact = (PI / 4.0).sin() / (PI / 2.0) / 0.5;
        assert!((e.value.re - exact).abs() < 1e-12);
        assert!(!e.restarted && e.terms_used > 3);
        let far = m_a_series(&uniform(), Complex64::new(400.0, 0.0), 0.9, &cfg).unwrap();
        let exact = (20.0f64 * 0.9).sin() / 20.0 / 0.9;
        assert!(far.restarted && (far.value.re - exact).abs() < 1e-11);
    }

    #[test]
    fn point_masses_agree_with_transfer() {
        let s = crate::model::StieltjesString::from_masses(Interval::unit(), &[(0.25, 1.0), (0.6, 2.0)]).unwrap();
        let w = s.to_mass_distribution();
        let z = Complex64::new(7.0, -2.0);
        let a = wronskian_fn(&w, z, &SingularConfig::default()).unwrap();
        let b = crate::stieltjes::wronskian_complex(&s, z);
        assert!((a - b).norm() < 1e-13);
        let sig = eigenvalues_below(&w, 1e4, 1e-10).unwrap();
        let exact = crate::stieltjes::dirichlet_spectrum(&s);
        assert_eq!(sig.len(), exact.len());
        for (p, q) in sig.iter().zip(&exact) {
            assert!((p - q).abs() < 1e-9 * q);
        }
    }

    #[test]
    fn singular_trace() {
        let w = MassDistribution::from_density(Interval::unit(), Density::power(1.0, 1.5, 0.0)).unwrap();
        assert!((trace_total(&w).unwrap() - 4.0 / 3.0).abs() < 1e-10);
        let z = Complex64::new(10.0, 0.0);
        let p = phi_pair(&w, z, 0.5, &SingularConfig::default()).unwrap();
        assert!(p.phi_a.re.is_finite() && p.phi_b.re.is_finite());
    }

    #[test]
    fn green_rejects_eigenvalue() {
        let z = Complex64::new(PI * PI, 0.0);
        assert!(matches!(
            green_diagonal(&uniform(), z, 0.5, &SingularConfig::default()),
            Err(Error::NearEigenvalue { .. })
        ));
    }
}
