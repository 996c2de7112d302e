//! Trigonometric-polynomial loops, used for randomized initial guesses and
//! property tests.

use rand::Rng;

use crate::error::Result;
use crate::loops::LoopPath;
use crate::scalar::Scalar;
use crate::vec2::Vec2;

/// `x(t) = c + Σ_k a_k e^{i k ω t}` in complex notation, `ω = 2π/T`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierLoop<F> {
    pub period: F,
    pub center: Vec2<F>,
    /// `(k, a_k)` with `a_k` the complex amplitude stored as a planar vector.
    pub terms: Vec<(i64, Vec2<F>)>,
}

impl<F: Scalar> FourierLoop<F> {
    pub fn omega(&self) -> F {
        F::TAU() / self.period
    }

    pub fn position(&self, t: F) -> Vec2<F> {
        let w = self.omega();
        self.terms.iter().fold(self.center, |acc, (k, a)| {
            acc + complex_mul(*a, Vec2::polar(w * F::lit(*k as f64) * t))
        })
    }

    pub fn velocity(&self, t: F) -> Vec2<F> {
        let w = self.omega();
        self.terms.iter().fold(Vec2::zero(), |acc, (k, a)| {
            let kw = w * F::lit(*k as f64);
            acc + complex_mul(*a, Vec2::polar(kw * t)).perp() * kw
        })
    }

    pub fn sample(&self, n: usize) -> Result<LoopPath<F>> {
        LoopPath::from_fn(self.period, n, |t| (self.position(t), self.velocity(t)))
    }

    /// Random loop of degree `≤ degree` with coefficients uniform in `[-1, 1]`.
    pub fn random(rng: &mut impl Rng, period: F, degree: i64) -> Self {
        let mut coef = || Vec2::new(F::lit(rng.gen_range(-1.0..=1.0)), F::lit(rng.gen_range(-1.0..=1.0)));
        let terms = (-degree..=degree).filter(|k| *k != 0).map(|k| (k, coef())).collect();
        Self { period, center: Vec2::zero(), terms }
    }

    /// Random loop whose winding around the origin is `winding` by
    /// construction: the term `radius·e^{i·winding·ωt}` dominates the sum of
    /// the other amplitudes, which is at most `perturbation·radius`.
    pub fn random_with_winding(
        rng: &mut impl Rng,
        period: F,
        degree: i64,
        winding: i64,
        radius: F,
        perturbation: F,
    ) -> Self {
        let others: Vec<i64> = (-degree..=degree).filter(|k| *k != 0 && *k != winding).collect();
        let raw: Vec<Vec2<F>> = others
            .iter()
            .map(|_| Vec2::new(F::lit(rng.gen_range(-1.0..=1.0)), F::lit(rng.gen_range(-1.0..=1.0))))
            .collect();
        let mass = raw.iter().fold(F::zero(), |a, c| a + c.norm());
        let budget = perturbation.min(F::lit(0.95)) * radius * F::lit(rng.gen_range(0.0..=1.0));
        let scale = if mass > F::zero() { budget / mass } else { F::zero() };
        let phase = F::lit(rng.gen_range(0.0..std::f64::consts::TAU));
        let mut terms: Vec<(i64, Vec2<F>)> =
            others.into_iter().zip(raw).map(|(k, c)| (k, c * scale)).collect();
        terms.push((winding, Vec2::polar(phase) * radius));
        terms.sort_by_key(|(k, _)| *k);
        Self { period, center: Vec2::zero(), terms }
    }
}

fn complex_mul<F: Scalar>(a: Vec2<F>, b: Vec2<F>) -> Vec2<F> {
    Vec2::new(a.x * b.x - a.y * b.y, a.x * b.y + a.y * b.x)
}
