//! Local collision model `|x(t)| ≈ κ|t − t₀|^{2/3}` and its closed-form
//! integrals.
//!
//! Under the model `|x|^{3/2}` is linear in `t` on each side of `t₀`, which
//! is what the fit and the exit-time interpolation exploit.

use crate::loops::LoopPath;
use crate::scalar::Scalar;

/// Two-sided fit of the collision model around grid node `center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SperlingFit<F> {
    /// Node closest to the collision.
    pub center: usize,
    /// Collision time, unwrapped relative to `center`'s time (may fall
    /// slightly outside `[0, T)`).
    pub t0: F,
    pub kappa_minus: F,
    pub kappa_plus: F,
}

impl<F: Scalar> SperlingFit<F> {
    /// Fits the model from nodes `center ± 1, center ± 2`. Returns `None`
    /// when the samples do not look like a collision (non-increasing
    /// `|x|^{3/2}` away from the center).
    pub fn fit(path: &LoopPath<F>, center: usize) -> Option<Self> {
        let n = path.n();
        let h = path.h();
        let tc = path.time(center);
        let r32 = |j: isize| {
            let k = (center as isize + j).rem_euclid(n as isize) as usize;
            path.x(k).norm().powf(F::lit(1.5))
        };
        let (rp1, rp2, rm1, rm2) = (r32(1), r32(2), r32(-1), r32(-2));
        let slope_plus = (rp2 - rp1) / h;
        let slope_minus = (rm2 - rm1) / h;
        if !(slope_plus > F::zero() && slope_minus > F::zero()) {
            return None;
        }
        let t0 = if path.x(center).norm() == F::zero() {
            tc
        } else {
            let t0_plus = tc + h - rp1 / slope_plus;
            let t0_minus = tc - h + rm1 / slope_minus;
            let mid = (t0_plus + t0_minus) / F::lit(2.0);
            mid.max(tc - h).min(tc + h)
        };
        Some(Self {
            center,
            t0,
            kappa_minus: slope_minus.powf(F::lit(2.0 / 3.0)),
            kappa_plus: slope_plus.powf(F::lit(2.0 / 3.0)),
        })
    }

    /// Signed offset `t − t₀` using the periodic image nearest to `t₀`.
    pub fn offset(&self, t: F, period: F) -> F {
        let d = t - self.t0;
        d - (d / period).round() * period
    }

    /// Model integrals `(kinetic, keplerian)` over `[t_a, t_b]` (times as
    /// offsets from `t₀`, `t_a ≤ t_b`).
    pub fn integrals(&self, ta: F, tb: F) -> (F, F) {
        let mut kin = F::zero();
        let mut kep = F::zero();
        let mut side = |lo: F, hi: F, kappa: F| {
            let (k, p) = side_integrals(lo, hi, kappa);
            kin = kin + k;
            kep = kep + p;
        };
        if tb <= F::zero() {
            side(-tb, -ta, self.kappa_minus);
        } else if ta >= F::zero() {
            side(ta, tb, self.kappa_plus);
        } else {
            side(F::zero(), -ta, self.kappa_minus);
            side(F::zero(), tb, self.kappa_plus);
        }
        (kin, kep)
    }

    /// Model radius at offset `tau = t − t₀`.
    pub fn radius(&self, tau: F) -> F {
        let kappa = if tau < F::zero() { self.kappa_minus } else { self.kappa_plus };
        kappa * tau.abs().powf(F::lit(2.0 / 3.0))
    }
}

/// `(½∫|ẋ|², ∫1/|x|)` of the radial model `κτ^{2/3}` over `τ ∈ [lo, hi]`.
pub fn side_integrals<F: Scalar>(lo: F, hi: F, kappa: F) -> (F, F) {
    let du = hi.cbrt() - lo.cbrt();
    let kin = F::lit(2.0 / 3.0) * kappa * kappa * du;
    let kep = F::lit(3.0) * du / kappa;
    (kin, kep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::sperling_amplitude;

    #[test]
    fn parabolic_model_has_equal_kinetic_and_potential_parts() {
        let k = sperling_amplitude::<f64>();
        let (kin, kep) = side_integrals(0.0, 0.3, k);
        assert!((kin - kep).abs() < 1e-14);
        // ∫₀^{0.3} dt/(k t^{2/3}) = 3·0.3^{1/3}/k
        assert!((kep - 3.0 * 0.3f64.cbrt() / k).abs() < 1e-14);
    }

    #[test]
    fn integrals_split_at_collision() {
        let fit = SperlingFit { center: 0, t0: 0.0f64, kappa_minus: 2.0, kappa_plus: 1.0 };
        let (kin, kep) = fit.integrals(-0.1, 0.2);
        let (k1, p1) = side_integrals(0.0, 0.1, 2.0);
        let (k2, p2) = side_integrals(0.0, 0.2, 1.0);
        assert!((kin - k1 - k2).abs() < 1e-15 && (kep - p1 - p2).abs() < 1e-15);
        assert!((fit.radius(-0.1) - 2.0 * 0.1f64.powf(2.0 / 3.0)).abs() < 1e-15);
    }
}
