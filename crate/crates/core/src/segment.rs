//! Exact integrals of `1/√(|x|² + ε²)` along straight segments.
//!
//! With `x(s) = a + s(b − a)`, `s ∈ [0, 1]`, the integral equals
//! `(ln P(b) − ln P(a))/L` where `L = |b − a|` and
//! `P(v) = L√(|v|² + ε²) + (b − a)·v`. When `(b − a)·v < 0` the same quantity
//! is evaluated as `(c² + L²ε²)/(L√(|v|²+ε²) − (b − a)·v)`, `c = b × a`,
//! which avoids cancellation.

use crate::scalar::Scalar;
use crate::vec2::Vec2;

/// `∫₀¹ ds / √(|a + s(b − a)|² + eps²)`; infinite when the segment passes
/// through the origin and `eps = 0`.
pub fn inverse_radius_mean<F: Scalar>(a: Vec2<F>, b: Vec2<F>, eps: F) -> F {
    let (a, b) = oriented(a, b).0;
    let d = b - a;
    let len = d.norm();
    let eps2 = eps * eps;
    let (ra, rb) = ((a.norm_sq() + eps2).sqrt(), (b.norm_sq() + eps2).sqrt());
    if len <= F::lit(1e-13) * (ra + rb) {
        return F::one() / (((a + b) / F::lit(2.0)).norm_sq() + eps2).sqrt();
    }
    let c = b.cross(a);
    let num = c * c + len * len * eps2;
    let ln_p = |v: Vec2<F>, rv: F| {
        let dv = d.dot(v);
        if dv >= F::zero() {
            (len * rv + dv).ln()
        } else {
            num.ln() - (len * rv - dv).ln()
        }
    };
    (ln_p(b, rb) - ln_p(a, ra)) / len
}

/// Value and gradient `(I, ∂I/∂a, ∂I/∂b)` of [`inverse_radius_mean`].
pub fn inverse_radius_mean_grad<F: Scalar>(a: Vec2<F>, b: Vec2<F>, eps: F) -> (F, Vec2<F>, Vec2<F>) {
    let ((a, b), swapped) = oriented(a, b);
    let d = b - a;
    let len = d.norm();
    let eps2 = eps * eps;
    let (ra, rb) = ((a.norm_sq() + eps2).sqrt(), (b.norm_sq() + eps2).sqrt());
    let two = F::lit(2.0);
    if len <= F::lit(1e-13) * (ra + rb) {
        let m = (a + b) / two;
        let rm = (m.norm_sq() + eps2).sqrt();
        let g = m * (-F::one() / (two * rm * rm * rm));
        return (F::one() / rm, g, g);
    }
    let u = d / len;
    let c = b.cross(a);
    let num = c * c + len * len * eps2;
    // ∂num/∂a, ∂num/∂b
    let dnum_a = Vec2::new(-b.y, b.x) * (two * c) - d * (two * eps2);
    let dnum_b = Vec2::new(a.y, -a.x) * (two * c) + d * (two * eps2);

    // ln P(b) and its gradients
    let db = d.dot(b);
    let (lpb, gb_a, gb_b) = if db >= F::zero() {
        let p = len * rb + db;
        let dp_b = u * rb + b * (len / rb) + b + d;
        let dp_a = -(u * rb) - b;
        (p.ln(), dp_a / p, dp_b / p)
    } else {
        let den = len * rb - db;
        let dd_b = u * rb + b * (len / rb) - (b + d);
        let dd_a = b - u * rb;
        (num.ln() - den.ln(), dnum_a / num - dd_a / den, dnum_b / num - dd_b / den)
    };
    // ln P(a) and its gradients
    let da = d.dot(a);
    let (lpa, ga_a, ga_b) = if da >= F::zero() {
        let p = len * ra + da;
        let dp_a = a * (len / ra) + d - a - u * ra;
        let dp_b = u * ra + a;
        (p.ln(), dp_a / p, dp_b / p)
    } else {
        let den = len * ra - da;
        let dd_a = a * (len / ra) - (d - a) - u * ra;
        let dd_b = u * ra - a;
        (num.ln() - den.ln(), dnum_a / num - dd_a / den, dnum_b / num - dd_b / den)
    };
    let value = (lpb - lpa) / len;
    let grad_a = (gb_a - ga_a) / len + u * (value / len);
    let grad_b = (gb_b - ga_b) / len - u * (value / len);
    if swapped {
        (value, grad_b, grad_a)
    } else {
        (value, grad_a, grad_b)
    }
}

/// Orders the endpoints so that `(b − a)·(a + b) ≥ 0`; the integral is
/// symmetric in its endpoints.
fn oriented<F: Scalar>(a: Vec2<F>, b: Vec2<F>) -> ((Vec2<F>, Vec2<F>), bool) {
    if (b - a).dot(a + b) < F::zero() {
        ((b, a), true)
    } else {
        ((a, b), false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Composite Gauss–Legendre on many panels: independent of the closed form.
    fn quadrature(a: Vec2<f64>, b: Vec2<f64>, eps: f64) -> f64 {
        let nodes = [
            (-0.906_179_845_938_664, 0.236_926_885_056_189),
            (-0.538_469_310_105_683, 0.478_628_670_499_366),
            (0.0, 0.568_888_888_888_889),
            (0.538_469_310_105_683, 0.478_628_670_499_366),
            (0.906_179_845_938_664, 0.236_926_885_056_189),
        ];
        let panels = 400;
        let mut acc = 0.0;
        for p in 0..panels {
            let (lo, hi) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
            for (x, w) in nodes {
                let s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
                let v = a.lerp(b, s);
                acc += 0.5 * (hi - lo) * w / (v.norm_sq() + eps * eps).sqrt();
            }
        }
        acc
    }

    #[test]
    fn radial_segments() {
        let (a, b) = (Vec2::new(1.0, 0.0), Vec2::new(3.0, 0.0));
        let exact = 3.0f64.ln() / 2.0;
        assert!((inverse_radius_mean(a, b, 0.0) - exact).abs() < 1e-15);
        assert!((inverse_radius_mean(b, a, 0.0) - exact).abs() < 1e-15);
        let through = inverse_radius_mean(Vec2::new(-1.0f64, 0.0), Vec2::new(1.0, 0.0), 0.0);
        assert!(through.is_infinite());
        // softened: ∫_{-1}^{1} dx/√(x²+ε²)/2 = asinh(1/ε)
        let soft = inverse_radius_mean(Vec2::new(-1.0f64, 0.0), Vec2::new(1.0, 0.0), 0.1);
        assert!((soft - (10.0f64).asinh()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_segment_is_point_value() {
        let a = Vec2::new(0.3f64, 0.4);
        assert!((inverse_radius_mean(a, a, 0.0) - 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn matches_quadrature(
            ax in -2.0..2.0f64, ay in -2.0..2.0f64, dx in -0.5..0.5f64, dy in -0.5..0.5f64,
            eps in prop_oneof![Just(0.0), 0.0..0.3f64],
        ) {
            let a = Vec2::new(ax, ay);
            let b = a + Vec2::new(dx, dy);
            // keep the origin well away from the segment so the quadrature oracle converges
            let d = b - a;
            let s = (-(a.dot(d)) / d.norm_sq().max(1e-30)).clamp(0.0, 1.0);
            prop_assume!(a.lerp(b, s).norm() > 0.05);
            let q = quadrature(a, b, eps);
            prop_assert!((inverse_radius_mean(a, b, eps) - q).abs() <= 1e-10 * q);
        }

        #[test]
        fn gradient_matches_finite_differences(
            ax in -2.0..2.0f64, ay in -2.0..2.0f64, dx in -0.5..0.5f64, dy in -0.5..0.5f64,
            eps in prop_oneof![Just(0.0), 0.0..0.3f64],
        ) {
            let a = Vec2::new(ax, ay);
            let b = a + Vec2::new(dx, dy);
            let d = b - a;
            let s = (-(a.dot(d)) / d.norm_sq().max(1e-30)).clamp(0.0, 1.0);
            prop_assume!(a.lerp(b, s).norm() > 0.05);
            let (v, ga, gb) = inverse_radius_mean_grad(a, b, eps);
            prop_assert!((v - inverse_radius_mean(a, b, eps)).abs() <= 1e-13 * v);
            let h = 1e-6;
            let f = |a: Vec2<f64>, b: Vec2<f64>| inverse_radius_mean(a, b, eps);
            let fd = [
                (f(a + Vec2::new(h, 0.0), b) - f(a - Vec2::new(h, 0.0), b)) / (2.0 * h),
                (f(a + Vec2::new(0.0, h), b) - f(a - Vec2::new(0.0, h), b)) / (2.0 * h),
                (f(a, b + Vec2::new(h, 0.0)) - f(a, b - Vec2::new(h, 0.0))) / (2.0 * h),
                (f(a, b + Vec2::new(0.0, h)) - f(a, b - Vec2::new(0.0, h))) / (2.0 * h),
            ];
            let an = [ga.x, ga.y, gb.x, gb.y];
            let scale = an.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            for (x, y) in fd.iter().zip(an) {
                prop_assert!((x - y).abs() <= 1e-6 * (1.0 + scale), "fd {x} vs analytic {y}");
            }
        }
    }
}
