//! Loops with a prescribed collision, used as controls for collision
//! analysis.
//!
//! A collision loop follows `a^± κ|τ|^{2/3} x₀^± + |τ| p` for `|τ| ≤ s₀`
//! around the collision time `t₀ = T/2`, and a polar cubic Hermite connector
//! elsewhere. With `a^± = 1` and `p = 0` the window is exactly `ζ₀`.

use crate::error::{Error, Result};
use crate::kepler_arcs::s0;
use crate::loops::LoopPath;
use crate::scalar::{sperling_amplitude, Scalar};
use crate::vec2::Vec2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionLoopSpec<F> {
    pub period: F,
    /// Grid size; must be even so that `t₀ = T/2` is a node.
    pub n: usize,
    pub dir_minus: Vec2<F>,
    pub dir_plus: Vec2<F>,
    pub amp_minus: F,
    pub amp_plus: F,
    /// Coefficient of the `|τ|` perturbation.
    pub perturbation: Vec2<F>,
}

impl<F: Scalar> CollisionLoopSpec<F> {
    pub fn bounce(dir_minus: Vec2<F>, dir_plus: Vec2<F>, period: F, n: usize) -> Self {
        Self {
            period,
            n,
            dir_minus,
            dir_plus,
            amp_minus: F::one(),
            amp_plus: F::one(),
            perturbation: Vec2::zero(),
        }
    }

    pub fn collision_time(&self) -> F {
        self.period / F::lit(2.0)
    }

    /// Position and velocity at offset `tau` from the collision inside the
    /// window `|τ| ≤ s₀` (velocity is zero at the collision itself).
    fn window_state(&self, tau: F) -> (Vec2<F>, Vec2<F>) {
        let kappa = sperling_amplitude::<F>();
        let (dir, amp, sign) = if tau >= F::zero() {
            (self.dir_plus, self.amp_plus, F::one())
        } else {
            (self.dir_minus, self.amp_minus, -F::one())
        };
        let a = tau.abs();
        let x = dir * (amp * kappa * a.powf(F::lit(2.0 / 3.0))) + self.perturbation * a;
        if a == F::zero() {
            return (x, Vec2::zero());
        }
        let v = (dir * (amp * F::lit(2.0 / 3.0) * kappa * a.powf(F::lit(-1.0 / 3.0))) + self.perturbation) * sign;
        (x, v)
    }

    pub fn build(&self) -> Result<LoopPath<F>> {
        let s = s0::<F>();
        let period = self.period;
        if !self.n.is_multiple_of(2) || !(period > F::lit(2.0) * s) {
            return Err(Error::InvalidArgument("need an even grid and T > 2 s0".into()));
        }
        let len = period - F::lit(2.0) * s;
        let (p0, v0) = self.window_state(s);
        let (p1, v1) = self.window_state(-s);
        let polar = |p: Vec2<F>, v: Vec2<F>| {
            let r = p.norm();
            (r, p.dot(v) / r, p.angle(), p.cross(v) / (r * r))
        };
        let (r0, dr0, th0, dth0) = polar(p0, v0);
        let (r1, dr1, th1_raw, dth1) = polar(p1, v1);
        let turns = ((th1_raw - th0) / F::TAU()).round();
        let th1 = th1_raw - turns * F::TAU();
        let hermite = |s: F, a: F, da: F, b: F, db: F| {
            let (s2, s3) = (s * s, s * s * s);
            let two = F::lit(2.0);
            let three = F::lit(3.0);
            let val = (two * s3 - three * s2 + F::one()) * a
                + (s3 - two * s2 + s) * len * da
                + (three * s2 - two * s3) * b
                + (s3 - s2) * len * db;
            let der = (F::lit(6.0) * s2 - F::lit(6.0) * s) * a / len
                + (three * s2 - F::lit(4.0) * s + F::one()) * da
                + (F::lit(6.0) * s - F::lit(6.0) * s2) * b / len
                + (three * s2 - two * s) * db;
            (val, der)
        };
        let t0 = self.collision_time();
        let h = period / F::of_usize(self.n);
        let mut pos = Vec::with_capacity(self.n);
        let mut vel = Vec::with_capacity(self.n);
        for k in 0..self.n {
            let tau = h * F::of_usize(k) - t0;
            if tau.abs() <= s {
                let (x, v) = self.window_state(tau);
                pos.push(x);
                vel.push(v);
                continue;
            }
            let u = if tau > F::zero() { tau - s } else { tau + period - s };
            let sl = u / len;
            let (r, dr) = hermite(sl, r0, dr0, r1, dr1);
            let (th, dth) = hermite(sl, th0, dth0, th1, dth1);
            let e = Vec2::polar(th);
            pos.push(e * r);
            vel.push(e * dr + e.perp() * (r * dth));
        }
        LoopPath::from_samples(period, pos, vel, None)
    }
}

/// `ζ₀` with directions `x₀^∓` at `t₀ = T/2`, closed by a smooth connector.
pub fn zeta0_bounce<F: Scalar>(dir_minus: Vec2<F>, dir_plus: Vec2<F>, period: F, n: usize) -> Result<LoopPath<F>> {
    CollisionLoopSpec::bounce(dir_minus, dir_plus, period, n).build()
}

/// Collision loop along `dir` whose outgoing branch is `factor` times the
/// parabolic one, so the energy has no finite limit from that side.
pub fn energy_jump_path<F: Scalar>(dir: Vec2<F>, factor: F, period: F, n: usize) -> Result<LoopPath<F>> {
    CollisionLoopSpec { amp_plus: factor, ..CollisionLoopSpec::bounce(dir, dir, period, n) }.build()
}

/// Degenerate (`e = 1`) Kepler orbit of period `T` along the ray `dir`,
/// colliding at `t₀ = T/2` and bouncing straight back: a generalized
/// periodic solution of the unforced problem.
pub fn radial_kepler_orbit<F: Scalar>(dir: Vec2<F>, period: F, n: usize) -> Result<LoopPath<F>> {
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument("need an even grid".into()));
    }
    let a = (period / F::TAU()).powf(F::lit(2.0 / 3.0));
    let mean_motion = F::TAU() / period;
    let t0 = period / F::lit(2.0);
    let h = period / F::of_usize(n);
    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    for k in 0..n {
        // mean anomaly measured from the collision, in (-π, π]
        let tau = h * F::of_usize(k) - t0;
        let mut m = tau * mean_motion;
        m = m - (m / F::TAU()).round() * F::TAU();
        let e = solve_radial_kepler(m.abs());
        let half = (e / F::lit(2.0)).sin();
        let r = F::lit(2.0) * a * half * half;
        let rdot = if r == F::zero() {
            F::zero()
        } else {
            m.signum() * (e / F::lit(2.0)).cos() / (half * a.sqrt())
        };
        pos.push(dir * r);
        vel.push(dir * rdot);
    }
    LoopPath::from_samples(period, pos, vel, None)
}

/// Solves `E − sin E = M` for `M ∈ [0, π]`.
fn solve_radial_kepler<F: Scalar>(m: F) -> F {
    if m == F::zero() {
        return F::zero();
    }
    // E³/6 ≈ M near the collision
    let mut e = if m < F::one() { (F::lit(6.0) * m).cbrt() } else { m + F::lit(0.5) * m.sin().signum() };
    for _ in 0..100 {
        let f = e - e.sin() - m;
        let df = F::one() - e.cos();
        if df == F::zero() {
            break;
        }
        let step = f / df;
        e = (e - step).max(F::zero()).min(F::TAU());
        if step.abs() <= F::epsilon() * F::lit(4.0) * e.max(F::one()) {
            break;
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn bounce_is_zeta0_near_collision_and_continuous() {
        let p = zeta0_bounce(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), TAU, 4096).unwrap();
        let c = 2048;
        assert_eq!(p.x(c), Vec2::zero());
        // positions and velocities vary continuously around the loop
        let h = p.h();
        for k in 0..4096 {
            if (k as isize - c as isize).abs() <= 2 {
                continue;
            }
            let fd = (p.x(k + 1) - p.x(k)) / h;
            let avg = (p.v(k) + p.v(k + 1)) / 2.0;
            assert!((fd - avg).norm() < 0.05 * (1.0 + avg.norm()), "node {k}");
        }
        assert!(p.min_radius().0 == 0.0);
    }

    #[test]
    fn radial_orbit_energy_is_constant() {
        let p = radial_kepler_orbit(Vec2::new(0.6, 0.8), TAU, 1024).unwrap();
        for k in 0..1024 {
            if k == 512 {
                assert_eq!(p.x(k), Vec2::zero());
                continue;
            }
            let h = p.v(k).norm_sq() / 2.0 - 1.0 / p.x(k).norm();
            assert!((h + 0.5).abs() < 1e-10, "{k}: {h}");
        }
        // apocenter 2a at the far side of the loop
        assert!((p.x(0).norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn radial_kepler_inverse() {
        for m in [1e-9, 1e-3, 0.5, 3.0, 6.2] {
            let e: f64 = solve_radial_kepler(m);
            assert!((e - e.sin() - m).abs() < 1e-14);
        }
    }
}
