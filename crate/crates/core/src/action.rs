//! The action functional
//! `A_[a,b](x) = ∫_a^b ½|ẋ|² + 1/|x| + U(t, x) dt` on discretized loops.
//!
//! A loop is read as the piecewise-linear curve through its nodes. The
//! kinetic part and the Keplerian part are integrated exactly along each
//! segment; `U` uses the trapezoidal rule. Cells next to a collision, where
//! `min(|x_k|, |x_{k+1}|)` falls below the singular-cell threshold, are
//! integrated with the fitted model `κ|t − t₀|^{2/3}` in closed form when
//! collision-aware quadrature is enabled.

use crate::error::{Error, Result};
use crate::fmt::sci12;
use crate::loops::{classify, poincare_constant, LoopPath};
use crate::potentials::Potential;
use crate::scalar::Scalar;
use crate::segment::{inverse_radius_mean, inverse_radius_mean_grad};
use crate::sperling::SperlingFit;
use crate::vec2::Vec2;

/// `gradient_safe_radius = 10⁻⁴ · path scale`.
pub const GRADIENT_SAFE_RADIUS_SCALE: f64 = 1e-4;

/// Default singular-cell threshold `3·h^{2/3}`.
pub fn default_singular_threshold<F: Scalar>(h: F) -> F {
    F::lit(3.0) * h.powf(F::lit(2.0 / 3.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions<F> {
    pub collision_aware: bool,
    /// Overrides the `3·h^{2/3}` default.
    pub singular_cell_threshold: Option<F>,
}

impl<F> Default for QuadratureOptions<F> {
    fn default() -> Self {
        Self { collision_aware: true, singular_cell_threshold: None }
    }
}

impl<F> QuadratureOptions<F> {
    /// Plain piecewise-linear quadrature; exact zero samples are errors.
    pub fn plain() -> Self {
        Self { collision_aware: false, singular_cell_threshold: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionBreakdown<F> {
    pub kinetic: F,
    /// `∫ 1/|x|`.
    pub keplerian: F,
    /// `∫ U`.
    pub potential: F,
    pub total: F,
    pub a: F,
    pub b: F,
}

impl<F: Scalar> ActionBreakdown<F> {
    fn new(kinetic: F, keplerian: F, potential: F, a: F, b: F) -> Self {
        Self { kinetic, keplerian, potential, total: kinetic + keplerian + potential, a, b }
    }

    /// `key = value` lines with 12 significant digits.
    pub fn summary_lines(&self, prefix: &str) -> Vec<String> {
        vec![
            format!("{prefix}.kinetic = {}", sci12(self.kinetic)),
            format!("{prefix}.keplerian = {}", sci12(self.keplerian)),
            format!("{prefix}.potential = {}", sci12(self.potential)),
            format!("{prefix}.total = {}", sci12(self.total)),
        ]
    }
}

/// Per-cell assignment of fitted collision models.
struct SingularCells<F> {
    fits: Vec<SperlingFit<F>>,
    cell_fit: Vec<Option<usize>>,
}

impl<F: Scalar> SingularCells<F> {
    fn none(n: usize) -> Self {
        Self { fits: Vec::new(), cell_fit: vec![None; n] }
    }

    fn detect(path: &LoopPath<F>, threshold: F) -> Self {
        let n = path.n();
        let radius: Vec<F> = path.positions().iter().map(|p| p.norm()).collect();
        let flag: Vec<bool> = (0..n).map(|k| radius[k].min(radius[(k + 1) % n]) < threshold).collect();
        let mut out = Self::none(n);
        if !flag.iter().any(|f| *f) {
            return out;
        }
        // start scanning right after a regular cell so runs never wrap mid-way
        let start = flag.iter().position(|f| !*f).map(|k| (k + 1) % n).unwrap_or(0);
        let mut k = 0;
        while k < n {
            let c = (start + k) % n;
            if !flag[c] {
                k += 1;
                continue;
            }
            let mut run = Vec::new();
            while k < n && flag[(start + k) % n] {
                run.push((start + k) % n);
                k += 1;
            }
            let center = run
                .iter()
                .flat_map(|&c| [c, (c + 1) % n])
                .fold(run[0], |best, j| if radius[j] < radius[best] { j } else { best });
            let fit = SperlingFit::fit(path, center).filter(|fit| {
                // the model must describe the whole run, not just the fitted nodes
                run.iter().flat_map(|&c| [c, (c + 1) % n]).all(|j| {
                    let model = fit.radius(fit.offset(path.time(j), path.period()));
                    (model - radius[j]).abs() <= F::lit(0.25) * radius[j].max(model) + F::lit(1e-300)
                })
            });
            if let Some(fit) = fit {
                out.fits.push(fit);
                for c in run {
                    out.cell_fit[c] = Some(out.fits.len() - 1);
                }
            }
        }
        out
    }
}

/// `A_[a,b]` with default (collision-aware) quadrature.
pub fn action<F: Scalar>(path: &LoopPath<F>, u: &Potential<F>, a: F, b: F) -> Result<ActionBreakdown<F>> {
    action_with(path, u, a, b, &QuadratureOptions::default())
}

/// `A_T = A_[0,T]`.
pub fn action_period<F: Scalar>(path: &LoopPath<F>, u: &Potential<F>) -> Result<ActionBreakdown<F>> {
    action(path, u, F::zero(), path.period())
}

/// `A_[a,b]` for `a ≤ b ≤ a + T`; times are taken modulo `T`.
pub fn action_with<F: Scalar>(
    path: &LoopPath<F>,
    u: &Potential<F>,
    a: F,
    b: F,
    opts: &QuadratureOptions<F>,
) -> Result<ActionBreakdown<F>> {
    let period = path.period();
    if !(b >= a) || b - a > period * (F::one() + F::lit(1e-12)) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("need a <= b <= a + T, got [{a}, {b}]")));
    }
    let n = path.n();
    let h = path.h();
    let singular = if opts.collision_aware {
        let thr = opts.singular_cell_threshold.unwrap_or_else(|| default_singular_threshold(h));
        SingularCells::detect(path, thr)
    } else {
        SingularCells::none(n)
    };

    let (mut kin, mut kep, mut pot) = (F::zero(), F::zero(), F::zero());
    let first = (a / h).floor().to_i64().unwrap_or(0);
    let last = (b / h).ceil().to_i64().unwrap_or(0);
    for j in first..last {
        let cs = h * F::lit(j as f64);
        let lo = a.max(cs);
        let hi = b.min(cs + h);
        if !(hi > lo) {
            continue;
        }
        let k = j.rem_euclid(n as i64) as usize;
        let (x0, x1) = (path.x(k), path.x(k + 1));
        let at = |s: F| {
            if s <= F::zero() {
                x0
            } else if s >= F::one() {
                x1
            } else {
                x0.lerp(x1, s)
            }
        };
        let xa = at((lo - cs) / h);
        let xb = at((hi - cs) / h);
        let dt = hi - lo;
        match singular.cell_fit[k] {
            Some(i) => {
                let fit = &singular.fits[i];
                let ta = fit.offset(lo, period);
                let (dk, dp) = fit.integrals(ta, ta + dt);
                kin = kin + dk;
                kep = kep + dp;
            }
            None => {
                if !opts.collision_aware {
                    for (s, idx) in [(xa, k), (xb, (k + 1) % n)] {
                        if s.norm() == F::zero() {
                            return Err(Error::ExactZeroSample { index: idx });
                        }
                    }
                }
                kin = kin + (xb - xa).norm_sq() / (F::lit(2.0) * dt);
                kep = kep + dt * inverse_radius_mean(xa, xb, F::zero());
            }
        }
        pot = pot + dt / F::lit(2.0) * (u.eval(lo, xa) + u.eval(hi, xb));
    }
    Ok(ActionBreakdown::new(kin, kep, pot, a, b))
}

/// Regularization of the Keplerian term used during descent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularization<F> {
    None,
    /// `1/|x| → 1/√(|x|² + ε²)`.
    Softening(F),
    /// Adds `ε²/|x|³`, which makes collisions infinitely expensive.
    Barrier(F),
}

/// Full-period discrete functional on node positions (no singular cells)
/// and its gradient with respect to every node.
pub fn discrete_action_grad<F: Scalar>(
    positions: &[Vec2<F>],
    period: F,
    u: &Potential<F>,
    reg: Regularization<F>,
) -> (F, Vec<Vec2<F>>) {
    let n = positions.len();
    let h = period / F::of_usize(n);
    let soft = match reg {
        Regularization::Softening(e) => e,
        _ => F::zero(),
    };
    let mut grad = vec![Vec2::zero(); n];
    let (mut kin, mut kep, mut pot) = (F::zero(), F::zero(), F::zero());
    for k in 0..n {
        let k1 = (k + 1) % n;
        let (xa, xb) = (positions[k], positions[k1]);
        let d = xb - xa;
        kin = kin + d.norm_sq() / (F::lit(2.0) * h);
        grad[k] -= d / h;
        grad[k1] += d / h;
        let (v, ga, gb) = inverse_radius_mean_grad(xa, xb, soft);
        kep = kep + h * v;
        grad[k] += ga * h;
        grad[k1] += gb * h;
        let t = h * F::of_usize(k);
        pot = pot + h * u.eval(t, xa);
        grad[k] += u.grad_x(t, xa) * h;
        if let Regularization::Barrier(e) = reg {
            let r = xa.norm();
            let e2 = e * e;
            kep = kep + h * e2 / (r * r * r);
            grad[k] -= xa * (F::lit(3.0) * h * e2 / (r * r * r * r * r));
        }
    }
    (kin + kep + pot, grad)
}

/// Value of [`discrete_action_grad`] without the gradient.
pub fn discrete_action<F: Scalar>(positions: &[Vec2<F>], period: F, u: &Potential<F>, reg: Regularization<F>) -> F {
    let n = positions.len();
    let h = period / F::of_usize(n);
    let soft = match reg {
        Regularization::Softening(e) => e,
        _ => F::zero(),
    };
    let (mut kin, mut kep, mut pot) = (F::zero(), F::zero(), F::zero());
    for k in 0..n {
        let (xa, xb) = (positions[k], positions[(k + 1) % n]);
        kin = kin + (xb - xa).norm_sq() / (F::lit(2.0) * h);
        kep = kep + h * inverse_radius_mean(xa, xb, soft);
        pot = pot + h * u.eval(h * F::of_usize(k), xa);
        if let Regularization::Barrier(e) = reg {
            let r = xa.norm();
            kep = kep + h * e * e / (r * r * r);
        }
    }
    kin + kep + pot
}

pub fn gradient_safe_radius<F: Scalar>(path: &LoopPath<F>) -> F {
    F::lit(GRADIENT_SAFE_RADIUS_SCALE) * path.scale()
}

pub(crate) fn check_safe_radius<F: Scalar>(path: &LoopPath<F>) -> Result<()> {
    let safe = gradient_safe_radius(path);
    let (r, index) = path.min_radius();
    if r <= safe {
        return Err(Error::TooCloseToCollision { index, radius: r.as_f64(), safe_radius: safe.as_f64() });
    }
    Ok(())
}

/// `∂A_T/∂x_k` of the piecewise-linear functional.
pub fn action_gradient<F: Scalar>(path: &LoopPath<F>, u: &Potential<F>) -> Result<Vec<Vec2<F>>> {
    check_safe_radius(path)?;
    Ok(discrete_action_grad(path.positions(), path.period(), u, Regularization::None).1)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoercivityBound<F> {
    pub value: F,
    /// Poincaré constant `K = 2T²`.
    pub k: F,
    /// `K' = max_{s≥0} (C s^α − s²/(8K))`.
    pub k_prime: F,
}

/// `max_{s≥0} (c s^α − s²/(8K))`, attained at `s* = (4Kcα)^{1/(2−α)}`.
pub fn absorption_constant<F: Scalar>(c: F, alpha: F, k: F) -> F {
    if c <= F::zero() {
        return F::zero();
    }
    let s = (F::lit(4.0) * k * c * alpha).powf(F::one() / (F::lit(2.0) - alpha));
    c * s.powf(alpha) - s * s / (F::lit(8.0) * k)
}

/// Lower bound `∫(|ẋ|²/4 + |x|²/(8K)) − (K' + C)T ≤ A_T(x)` on `X`.
pub fn coercivity_bound<F: Scalar>(path: &LoopPath<F>, u: &Potential<F>) -> Result<CoercivityBound<F>> {
    if !classify(path)?.tag.in_x() {
        return Err(Error::NotInConstraintClass);
    }
    let n = path.n();
    let h = path.h();
    let (mut v2, mut x2) = (F::zero(), F::zero());
    for k in 0..n {
        let (a, b) = (path.x(k), path.x(k + 1));
        v2 = v2 + (b - a).norm_sq() / h;
        x2 = x2 + h * (a.norm_sq() + a.dot(b) + b.norm_sq()) / F::lit(3.0);
    }
    let k = poincare_constant(path.period());
    let k_prime = absorption_constant(u.growth.c, u.growth.alpha, k);
    let value = v2 / F::lit(4.0) + x2 / (F::lit(8.0) * k) - (k_prime + u.growth.c) * path.period();
    Ok(CoercivityBound { value, k, k_prime })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{linear_potential, ForcingTerm};
    use std::f64::consts::{PI, TAU};

    fn kepler_circle(period: f64, n: usize) -> LoopPath<f64> {
        let w = TAU / period;
        let r = (period / TAU).powf(2.0 / 3.0);
        LoopPath::from_fn(period, n, |t| (Vec2::polar(w * t) * r, Vec2::polar(w * t).perp() * (r * w))).unwrap()
    }

    #[test]
    fn breakdown_sums_exactly() {
        let b = action_period(&kepler_circle(TAU, 64), &Potential::zero(TAU)).unwrap();
        assert_eq!(b.total, b.kinetic + b.keplerian + b.potential);
    }

    #[test]
    fn empty_interval_has_zero_action() {
        let b = action(&kepler_circle(TAU, 64), &Potential::zero(TAU), 1.0, 1.0).unwrap();
        assert_eq!(b.total, 0.0);
    }

    #[test]
    fn rejects_reversed_or_overlong_intervals() {
        let c = kepler_circle(TAU, 64);
        assert!(action(&c, &Potential::zero(TAU), 1.0, 0.5).is_err());
        assert!(action(&c, &Potential::zero(TAU), 0.0, 2.0 * TAU).is_err());
    }

    #[test]
    fn exact_zero_sample_needs_collision_awareness() {
        let c = kepler_circle(TAU, 64);
        let mut pts = c.positions().to_vec();
        for (k, p) in pts.iter_mut().enumerate().take(15).skip(6) {
            let tau = (k as f64 - 10.0) * c.h();
            *p = p.normalized() * (4.5f64.cbrt() * tau.abs().powf(2.0 / 3.0));
        }
        let p = LoopPath::from_positions(TAU, pts).unwrap();
        let err = action_with(&p, &Potential::zero(TAU), 0.0, TAU, &QuadratureOptions::plain()).unwrap_err();
        assert_eq!(err, Error::ExactZeroSample { index: 10 });
        assert!(action_period(&p, &Potential::zero(TAU)).unwrap().total.is_finite());
    }

    #[test]
    fn additivity() {
        let p = ForcingTerm::new(TAU, Vec2::new(0.1, 0.0), vec![Vec2::new(0.2, 0.1)], vec![]).unwrap();
        let u = linear_potential(p);
        let c = kepler_circle(TAU, 128);
        let h = c.h();
        let whole = action(&c, &u, 3.0 * h, 90.0 * h).unwrap().total;
        let parts = action(&c, &u, 3.0 * h, 40.0 * h).unwrap().total + action(&c, &u, 40.0 * h, 90.0 * h).unwrap().total;
        assert!((whole - parts).abs() < 1e-12);
        // off-grid split is exact for the segment-integrated parts
        let z = Potential::zero(TAU);
        let whole = action(&c, &z, 0.1, 2.3).unwrap().total;
        let parts = action(&c, &z, 0.1, 1.234_567).unwrap().total + action(&c, &z, 1.234_567, 2.3).unwrap().total;
        assert!((whole - parts).abs() < 1e-12);
    }

    #[test]
    fn wraps_across_period_boundary() {
        let c = kepler_circle(TAU, 128);
        let z = Potential::zero(TAU);
        let a = action(&c, &z, -0.5, 0.5).unwrap().total;
        let b = action(&c, &z, TAU - 0.5, TAU).unwrap().total + action(&c, &z, 0.0, 0.5).unwrap().total;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn constant_shift_leaves_gradient_unchanged() {
        let c = kepler_circle(TAU, 64);
        let u = Potential::zero(TAU);
        let g0 = action_gradient(&c, &u).unwrap();
        let g1 = action_gradient(&c, &u.shifted(3.5)).unwrap();
        for (a, b) in g0.iter().zip(&g1) {
            assert!((*a - *b).norm() < 1e-15);
        }
    }

    #[test]
    fn gradient_refuses_near_collision() {
        let c = kepler_circle(TAU, 64);
        let mut pts = c.positions().to_vec();
        pts[3] = Vec2::new(1e-6, 0.0);
        let p = LoopPath::from_positions(TAU, pts).unwrap();
        assert!(matches!(action_gradient(&p, &Potential::zero(TAU)), Err(Error::TooCloseToCollision { index: 3, .. })));
    }

    #[test]
    fn absorption_constant_matches_grid_search() {
        for &(c, alpha, k) in &[(1.0, 1.0, 2.0 * TAU * TAU), (0.3, 1.5, 8.0), (2.0, 0.5, 1.0)] {
            let closed = absorption_constant(c, alpha, k);
            let smax = 10.0 * (4.0f64 * k * c * alpha).powf(1.0 / (2.0 - alpha));
            let brute = (0..=2_000_000)
                .map(|i| {
                    let s = smax * i as f64 / 2e6;
                    c * s.powf(alpha) - s * s / (8.0 * k)
                })
                .fold(f64::MIN, f64::max);
            assert!((closed - brute).abs() <= 1e-6 * closed.abs().max(1.0), "{closed} vs {brute}");
        }
        // alpha = 1, C = 1: K' = 2K = 4T²
        let t = 1.7;
        assert!((absorption_constant(1.0f64, 1.0, 2.0 * t * t) - 4.0 * t * t).abs() < 1e-12);
    }

    #[test]
    fn coercivity_bound_below_action() {
        let c = kepler_circle(TAU, 256);
        let b = coercivity_bound(&c, &Potential::zero(TAU)).unwrap();
        let a = action_period(&c, &Potential::zero(TAU)).unwrap().total;
        assert!(b.value < a);
        assert!((b.k - 2.0 * TAU * TAU).abs() < 1e-12);
        // bound for a fast large circle grows quadratically with amplitude
        let big = |r: f64| {
            LoopPath::from_fn(TAU, 256, |t| (Vec2::polar(3.0 * t) * r, Vec2::polar(3.0 * t).perp() * (3.0 * r))).unwrap()
        };
        let b1 = coercivity_bound(&big(10.0), &Potential::zero(TAU)).unwrap().value;
        let b2 = coercivity_bound(&big(100.0), &Potential::zero(TAU)).unwrap().value;
        assert!(b2 > 90.0 * b1);
        let _ = PI;
    }
}
