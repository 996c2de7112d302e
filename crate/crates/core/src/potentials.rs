//! Perturbations `U(t, x)`: evaluation, spatial gradient, time derivative and
//! the subquadratic growth bound `|U(t,x)| ≤ C(1 + |x|^α)`, `α ∈ (0, 2)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vec2::Vec2;

/// Nodes of the time grid used to bound `max_t |p(t)|`.
pub const FORCING_MAX_GRID: usize = 4096;

/// `T`-periodic forcing written as a Fourier series:
/// `p(t) = p₀ + Σ_k (c_k cos kωt + s_k sin kωt)`, `ω = 2π/T`, `k = 1, 2, …`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingTerm<F> {
    pub period: F,
    pub constant: Vec2<F>,
    pub cos: Vec<Vec2<F>>,
    pub sin: Vec<Vec2<F>>,
}

impl<F: Scalar> ForcingTerm<F> {
    pub fn new(period: F, constant: Vec2<F>, cos: Vec<Vec2<F>>, sin: Vec<Vec2<F>>) -> Result<Self> {
        if !(period > F::zero()) {
            return Err(Error::InvalidArgument(format!("forcing period must be positive, got {period}")));
        }
        Ok(Self { period, constant, cos, sin })
    }

    pub fn constant(period: F, p: Vec2<F>) -> Result<Self> {
        Self::new(period, p, Vec::new(), Vec::new())
    }

    fn omega(&self) -> F {
        F::TAU() / self.period
    }

    pub fn p(&self, t: F) -> Vec2<F> {
        let w = self.omega();
        let mut acc = self.constant;
        for (k, c) in self.cos.iter().enumerate() {
            acc += *c * (w * F::of_usize(k + 1) * t).cos();
        }
        for (k, s) in self.sin.iter().enumerate() {
            acc += *s * (w * F::of_usize(k + 1) * t).sin();
        }
        acc
    }

    pub fn dp(&self, t: F) -> Vec2<F> {
        let w = self.omega();
        let mut acc = Vec2::zero();
        for (k, c) in self.cos.iter().enumerate() {
            let kw = w * F::of_usize(k + 1);
            acc -= *c * (kw * (kw * t).sin());
        }
        for (k, s) in self.sin.iter().enumerate() {
            let kw = w * F::of_usize(k + 1);
            acc += *s * (kw * (kw * t).cos());
        }
        acc
    }

    /// `max_t |p(t)|` over a dense uniform grid.
    pub fn max_norm(&self) -> F {
        let h = self.period / F::of_usize(FORCING_MAX_GRID);
        (0..FORCING_MAX_GRID)
            .map(|k| self.p(h * F::of_usize(k)).norm())
            .fold(F::zero(), F::max)
    }
}

/// Growth metadata: `|U(t,x)| ≤ c·(1 + |x|^alpha)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Growth<F> {
    pub c: F,
    pub alpha: F,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialKind<F> {
    /// `U = c`.
    Constant(F),
    /// `U = ⟨p(t), x⟩`.
    Linear(ForcingTerm<F>),
    /// `U = coef·|x|^beta`.
    RadialPower { coef: F, beta: F },
    Sum(Vec<PotentialKind<F>>),
}

impl<F: Scalar> PotentialKind<F> {
    fn eval(&self, t: F, x: Vec2<F>) -> F {
        match self {
            Self::Constant(c) => *c,
            Self::Linear(p) => p.p(t).dot(x),
            Self::RadialPower { coef, beta } => *coef * x.norm().powf(*beta),
            Self::Sum(parts) => parts.iter().fold(F::zero(), |a, p| a + p.eval(t, x)),
        }
    }

    fn grad_x(&self, t: F, x: Vec2<F>) -> Vec2<F> {
        match self {
            Self::Constant(_) => Vec2::zero(),
            Self::Linear(p) => p.p(t),
            Self::RadialPower { coef, beta } => {
                let r = x.norm();
                if r == F::zero() {
                    Vec2::zero()
                } else {
                    x * (*coef * *beta * r.powf(*beta - F::lit(2.0)))
                }
            }
            Self::Sum(parts) => parts.iter().fold(Vec2::zero(), |a, p| a + p.grad_x(t, x)),
        }
    }

    fn dt(&self, t: F, x: Vec2<F>) -> F {
        match self {
            Self::Constant(_) | Self::RadialPower { .. } => F::zero(),
            Self::Linear(p) => p.dp(t).dot(x),
            Self::Sum(parts) => parts.iter().fold(F::zero(), |a, p| a + p.dt(t, x)),
        }
    }

    /// A valid growth pair for this family.
    fn natural_growth(&self) -> Growth<F> {
        match self {
            Self::Constant(c) => Growth { c: c.abs(), alpha: F::one() },
            Self::Linear(p) => Growth { c: p.max_norm(), alpha: F::one() },
            Self::RadialPower { coef, beta } => Growth { c: coef.abs(), alpha: *beta },
            Self::Sum(parts) => {
                // c_i(1 + |x|^a_i) ≤ 2c_i(1 + |x|^a_max)
                let gs: Vec<_> = parts.iter().map(|p| p.natural_growth()).collect();
                let alpha = gs.iter().map(|g| g.alpha).fold(F::zero(), F::max);
                let alpha = if gs.is_empty() { F::one() } else { alpha };
                let c = gs.iter().fold(F::zero(), |a, g| {
                    a + if g.alpha == alpha { g.c } else { F::lit(2.0) * g.c }
                });
                Growth { c, alpha }
            }
        }
    }
}

/// A `T`-periodic `C¹` perturbation with its growth metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential<F> {
    pub period: F,
    pub kind: PotentialKind<F>,
    pub growth: Growth<F>,
}

impl<F: Scalar> Potential<F> {
    /// Builds a potential with explicitly claimed growth. The claim is not
    /// checked here; see [`validate_growth`].
    pub fn new(period: F, kind: PotentialKind<F>, growth: Growth<F>) -> Result<Self> {
        if !(period > F::zero()) {
            return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
        }
        if !(growth.c >= F::zero()) || !(growth.alpha > F::zero() && growth.alpha < F::lit(2.0)) {
            return Err(Error::InvalidArgument(format!(
                "growth needs C >= 0 and alpha in (0, 2), got C = {}, alpha = {}",
                growth.c, growth.alpha
            )));
        }
        Ok(Self { period, kind, growth })
    }

    /// Builds a potential with the growth pair derived from its family.
    pub fn from_kind(period: F, kind: PotentialKind<F>) -> Result<Self> {
        let growth = kind.natural_growth();
        Self::new(period, kind, growth)
    }

    /// The unperturbed problem, `U ≡ 0`.
    pub fn zero(period: F) -> Self {
        Self {
            period,
            kind: PotentialKind::Constant(F::zero()),
            growth: Growth { c: F::zero(), alpha: F::one() },
        }
    }

    /// `U = coef·|x|^beta` with `beta ∈ (0, 2)`.
    pub fn radial_power(period: F, coef: F, beta: F) -> Result<Self> {
        if !(beta > F::zero() && beta < F::lit(2.0)) {
            return Err(Error::InvalidArgument(format!("radial exponent must lie in (0, 2), got {beta}")));
        }
        Self::from_kind(period, PotentialKind::RadialPower { coef, beta })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Constant(c) if c == F::zero())
    }

    pub fn eval(&self, t: F, x: Vec2<F>) -> F {
        self.kind.eval(t, x)
    }

    pub fn grad_x(&self, t: F, x: Vec2<F>) -> Vec2<F> {
        self.kind.grad_x(t, x)
    }

    pub fn dt(&self, t: F, x: Vec2<F>) -> F {
        self.kind.dt(t, x)
    }

    /// Adds a constant offset (used to check gradient invariance).
    pub fn shifted(&self, offset: F) -> Self {
        Self {
            period: self.period,
            kind: PotentialKind::Sum(vec![self.kind.clone(), PotentialKind::Constant(offset)]),
            growth: Growth { c: self.growth.c + offset.abs(), alpha: self.growth.alpha },
        }
    }
}

/// `U(t, x) = ⟨p(t), x⟩` with `C = max_t |p(t)|`, `α = 1`.
pub fn linear_potential<F: Scalar>(p: ForcingTerm<F>) -> Potential<F> {
    let c = p.max_norm();
    Potential {
        period: p.period,
        kind: PotentialKind::Linear(p),
        growth: Growth { c, alpha: F::one() },
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthReport<F> {
    /// Largest `|U|/(1 + |x|^α)` observed.
    pub max_ratio: F,
    pub witness_t: F,
    pub witness_x: Vec2<F>,
    pub samples: usize,
}

/// Samples `|U|` on circles of the given radii at random times and angles
/// and checks the claimed growth bound (with relative slack `10⁻⁹`).
pub fn validate_growth<F: Scalar>(
    u: &Potential<F>,
    radii: &[F],
    samples_per_radius: usize,
    seed: u64,
) -> Result<GrowthReport<F>> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > F::zero())) {
        return Err(Error::InvalidArgument("radius set must be nonempty and positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GrowthReport {
        max_ratio: F::zero(),
        witness_t: F::zero(),
        witness_x: Vec2::zero(),
        samples: 0,
    };
    for &r in radii {
        for _ in 0..samples_per_radius.max(1) {
            let t = u.period * F::lit(rng.gen_range(0.0..1.0));
            let x = Vec2::polar(F::lit(rng.gen_range(0.0..std::f64::consts::TAU))) * r;
            let ratio = u.eval(t, x).abs() / (F::one() + r.powf(u.growth.alpha));
            report.samples += 1;
            if ratio > report.max_ratio {
                report = GrowthReport { max_ratio: ratio, witness_t: t, witness_x: x, ..report };
            }
        }
    }
    if report.max_ratio > u.growth.c * (F::one() + F::lit(1e-9)) {
        return Err(Error::GrowthViolation {
            t: report.witness_t.as_f64(),
            x1: report.witness_x.x.as_f64(),
            x2: report.witness_x.y.as_f64(),
            ratio: report.max_ratio.as_f64(),
            bound: u.growth.c.as_f64(),
        });
    }
    Ok(report)
}
