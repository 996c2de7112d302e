//! Discretized `T`-periodic planar loops, their winding numbers and the
//! constraint class `X = X_c ∪ X_r`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fmt::sci12;
use crate::scalar::Scalar;
use crate::vec2::Vec2;

pub const MIN_NODES: usize = 8;

/// Relative scale of the collision threshold, `10⁻⁶·(max|x| + 1)`.
pub const COLLISION_THRESHOLD_SCALE: f64 = 1e-6;

/// A `T`-periodic planar path sampled on the uniform grid `t_k = kT/N`.
///
/// The final node is implied: `x_N ≡ x_0`. Positions and velocities are
/// stored independently; paths built from positions alone get centered
/// periodic finite-difference velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopPath<F> {
    period: F,
    positions: Vec<Vec2<F>>,
    velocities: Vec<Vec2<F>>,
}

impl<F: Scalar> LoopPath<F> {
    /// Builds a loop from positions, reconstructing velocities by centered
    /// periodic differences.
    pub fn from_positions(period: F, positions: Vec<Vec2<F>>) -> Result<Self> {
        check_grid(period, positions.len())?;
        let velocities = centered_velocities(period, &positions);
        let path = Self { period, positions, velocities };
        path.check_finite()?;
        Ok(path)
    }

    /// Builds a loop from explicit position and velocity samples.
    ///
    /// With `tolerance = Some(tol)` and a collision-free path, the stored
    /// velocities must agree with the finite-difference reconstruction to
    /// `tol` (max norm, relative to `1 + max|v|`).
    pub fn from_samples(
        period: F,
        positions: Vec<Vec2<F>>,
        velocities: Vec<Vec2<F>>,
        tolerance: Option<F>,
    ) -> Result<Self> {
        check_grid(period, positions.len())?;
        if velocities.len() != positions.len() {
            return Err(Error::InvalidPath(format!(
                "{} positions but {} velocities",
                positions.len(),
                velocities.len()
            )));
        }
        let path = Self { period, positions, velocities };
        path.check_finite()?;
        if let Some(tol) = tolerance {
            if path.min_radius().0 > path.collision_threshold() {
                let dev = path.velocity_inconsistency();
                if dev > tol {
                    return Err(Error::InvalidPath(format!(
                        "stored velocities deviate from finite differences by {:e} (tolerance {:e})",
                        dev.as_f64(),
                        tol.as_f64()
                    )));
                }
            }
        }
        Ok(path)
    }

    /// Samples an analytic curve returning `(x(t), ẋ(t))` on `n` nodes.
    pub fn from_fn(period: F, n: usize, f: impl Fn(F) -> (Vec2<F>, Vec2<F>)) -> Result<Self> {
        check_grid(period, n)?;
        let h = period / F::of_usize(n);
        let (positions, velocities) = (0..n).map(|k| f(h * F::of_usize(k))).unzip();
        Self::from_samples(period, positions, velocities, None)
    }

    fn check_finite(&self) -> Result<()> {
        let bad = self
            .positions
            .iter()
            .chain(self.velocities.iter())
            .position(|v| !v.is_finite());
        match bad {
            Some(i) => Err(Error::InvalidPath(format!("non-finite sample at index {}", i % self.n()))),
            None => Ok(()),
        }
    }

    pub fn period(&self) -> F {
        self.period
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// Grid spacing `T/N`.
    pub fn h(&self) -> F {
        self.period / F::of_usize(self.n())
    }

    pub fn time(&self, k: usize) -> F {
        self.h() * F::of_usize(k)
    }

    pub fn positions(&self) -> &[Vec2<F>] {
        &self.positions
    }

    pub fn velocities(&self) -> &[Vec2<F>] {
        &self.velocities
    }

    /// Position at node `k`, wrapping periodically.
    pub fn x(&self, k: usize) -> Vec2<F> {
        self.positions[k % self.n()]
    }

    pub fn v(&self, k: usize) -> Vec2<F> {
        self.velocities[k % self.n()]
    }

    /// Largest sample radius.
    pub fn scale(&self) -> F {
        self.positions.iter().map(|p| p.norm()).fold(F::zero(), F::max)
    }

    pub fn collision_threshold(&self) -> F {
        F::lit(COLLISION_THRESHOLD_SCALE) * (self.scale() + F::one())
    }

    /// `(min_k |x_k|, argmin k)`.
    pub fn min_radius(&self) -> (F, usize) {
        self.positions
            .iter()
            .enumerate()
            .map(|(k, p)| (p.norm(), k))
            .fold((F::infinity(), 0), |acc, cur| if cur.0 < acc.0 { cur } else { acc })
    }

    /// Position on the piecewise-linear interpolant, `t` taken modulo `T`.
    pub fn position_at(&self, t: F) -> Vec2<F> {
        let (k, s) = self.locate(t);
        self.x(k).lerp(self.x(k + 1), s)
    }

    /// Cell index and fractional offset of `t` (modulo `T`).
    pub fn locate(&self, t: F) -> (usize, F) {
        let h = self.h();
        let tau = t - (t / self.period).floor() * self.period;
        let u = tau / h;
        let k = u.floor();
        let mut idx = k.to_usize().unwrap_or(0);
        let mut s = u - k;
        if idx >= self.n() {
            idx = self.n() - 1;
            s = F::one();
        }
        (idx, s)
    }

    /// Max deviation of stored velocities from centered differences,
    /// relative to `1 + max|v|`.
    pub fn velocity_inconsistency(&self) -> F {
        let fd = centered_velocities(self.period, &self.positions);
        let vmax = self.velocities.iter().map(|v| v.norm()).fold(F::zero(), F::max);
        let dev = fd
            .iter()
            .zip(&self.velocities)
            .map(|(a, b)| (*a - *b).norm())
            .fold(F::zero(), F::max);
        dev / (F::one() + vmax)
    }

    /// Time-reversed loop `t ↦ x(-t)`.
    pub fn reversed(&self) -> Self {
        let n = self.n();
        let idx = |k: usize| (n - k) % n;
        Self {
            period: self.period,
            positions: (0..n).map(|k| self.positions[idx(k)]).collect(),
            velocities: (0..n).map(|k| -self.velocities[idx(k)]).collect(),
        }
    }

    /// Applies `f` to every position and velocity sample.
    pub fn map_samples(&self, f: impl Fn(Vec2<F>, Vec2<F>) -> (Vec2<F>, Vec2<F>)) -> Self {
        let (positions, velocities) = self
            .positions
            .iter()
            .zip(&self.velocities)
            .map(|(x, v)| f(*x, *v))
            .unzip();
        Self { period: self.period, positions, velocities }
    }

    /// Replaces positions and recomputes velocities by finite differences.
    pub fn with_positions(&self, positions: Vec<Vec2<F>>) -> Result<Self> {
        Self::from_positions(self.period, positions)
    }

    /// CSV with header `t,x1,x2,v1,v2`; the wraparound row is omitted.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x1,x2,v1,v2\n");
        for k in 0..self.n() {
            let (x, v) = (self.positions[k], self.velocities[k]);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                sci12(self.time(k)),
                sci12(x.x),
                sci12(x.y),
                sci12(v.x),
                sci12(v.y)
            );
        }
        out
    }

    /// Parses the CSV written by [`LoopPath::to_csv`].
    ///
    /// The period is inferred from the uniform spacing unless given.
    pub fn from_csv(text: &str, period: Option<F>) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::InvalidPath("empty CSV".into()))?;
        if header.split(',').map(str::trim).collect::<Vec<_>>() != ["t", "x1", "x2", "v1", "v2"] {
            return Err(Error::InvalidPath(format!("unexpected CSV header `{header}`")));
        }
        let mut times = Vec::new();
        let mut positions = Vec::new();
        let mut velocities = Vec::new();
        for (row, line) in lines.enumerate() {
            let vals = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidPath(format!("row {}: {e}", row + 2)))?;
            if vals.len() != 5 {
                return Err(Error::InvalidPath(format!("row {}: expected 5 fields", row + 2)));
            }
            let v = |i: usize| F::lit(vals[i]);
            times.push(v(0));
            positions.push(Vec2::new(v(1), v(2)));
            velocities.push(Vec2::new(v(3), v(4)));
        }
        let n = times.len();
        check_grid(F::one(), n)?;
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPath("time column must be strictly increasing".into()));
        }
        let h = (times[n - 1] - times[0]) / F::of_usize(n - 1);
        let period = period.unwrap_or(h * F::of_usize(n));
        let step = period / F::of_usize(n);
        let drift = times
            .iter()
            .enumerate()
            .map(|(k, t)| (*t - times[0] - step * F::of_usize(k)).abs())
            .fold(F::zero(), F::max);
        if drift > F::lit(1e-9) * period {
            return Err(Error::InvalidPath("time column is not a uniform grid".into()));
        }
        Self::from_samples(period, positions, velocities, None)
    }
}

fn check_grid<F: Scalar>(period: F, n: usize) -> Result<()> {
    if n < MIN_NODES {
        return Err(Error::InvalidPath(format!("need at least {MIN_NODES} nodes, got {n}")));
    }
    if !(period > F::zero()) || !period.is_finite() {
        return Err(Error::InvalidPath(format!("period must be positive, got {period}")));
    }
    Ok(())
}

fn centered_velocities<F: Scalar>(period: F, positions: &[Vec2<F>]) -> Vec<Vec2<F>> {
    let n = positions.len();
    let two_h = F::lit(2.0) * period / F::of_usize(n);
    (0..n)
        .map(|k| (positions[(k + 1) % n] - positions[(k + n - 1) % n]) / two_h)
        .collect()
}

/// Tag of [`ConstraintClass`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClassTag {
    /// Touches the origin.
    Xc,
    /// Collision-free with nonzero winding.
    Xr,
    /// Collision-free with zero winding: not in `X`.
    Outside,
}

impl ClassTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassTag::Xc => "Xc",
            ClassTag::Xr => "Xr",
            ClassTag::Outside => "Outside",
        }
    }

    pub fn in_x(self) -> bool {
        !matches!(self, ClassTag::Outside)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintClass<F> {
    pub tag: ClassTag,
    /// Meaningful only for `Xr` (zero otherwise).
    pub winding: i64,
    pub min_radius: F,
    pub argmin_time: F,
}

/// Signed angle swept from `a` to `b`, in `(-π, π]`.
pub fn angle_increment<F: Scalar>(a: Vec2<F>, b: Vec2<F>) -> F {
    a.cross(b).atan2(a.dot(b))
}

/// Per-step angular increments around the origin, checked for ambiguity.
fn increments<F: Scalar>(path: &LoopPath<F>) -> Result<Vec<F>> {
    let n = path.n();
    if let Some(index) = path.positions().iter().position(|p| p.norm() == F::zero()) {
        return Err(Error::PathTouchesOrigin { index });
    }
    let limit = F::PI() * (F::one() - F::lit(1e-12));
    (0..n)
        .map(|k| {
            let d = angle_increment(path.x(k), path.x(k + 1));
            if d.abs() >= limit {
                Err(Error::AmbiguousWinding { index: k, next: (k + 1) % n, increment: d.as_f64() })
            } else {
                Ok(d)
            }
        })
        .collect()
}

/// Winding number of the loop around the origin.
pub fn winding_number<F: Scalar>(path: &LoopPath<F>) -> Result<i64> {
    let total = increments(path)?.into_iter().fold(F::zero(), |a, b| a + b);
    Ok((total / F::TAU()).round().to_i64().unwrap_or(0))
}

/// Classifies the loop into `X_c`, `X_r` or neither.
pub fn classify<F: Scalar>(path: &LoopPath<F>) -> Result<ConstraintClass<F>> {
    let (min_radius, k) = path.min_radius();
    let argmin_time = path.time(k);
    if min_radius <= path.collision_threshold() {
        return Ok(ConstraintClass { tag: ClassTag::Xc, winding: 0, min_radius, argmin_time });
    }
    let winding = winding_number(path)?;
    let tag = if winding != 0 { ClassTag::Xr } else { ClassTag::Outside };
    Ok(ConstraintClass { tag, winding, min_radius, argmin_time })
}

/// Trapezoidal (periodic) integrals `(∫|x|², ∫|ẋ|²)` over one period.
pub fn l2_norms<F: Scalar>(path: &LoopPath<F>) -> (F, F) {
    let h = path.h();
    let x2 = path.positions().iter().fold(F::zero(), |a, p| a + p.norm_sq()) * h;
    let v2 = path.velocities().iter().fold(F::zero(), |a, v| a + v.norm_sq()) * h;
    (x2, v2)
}

/// `∫|x|² / ∫|ẋ|²`; for loops in `X` this never exceeds `2T²`.
pub fn poincare_ratio<F: Scalar>(path: &LoopPath<F>) -> Result<F> {
    let (x2, v2) = l2_norms(path);
    if v2 == F::zero() {
        return Err(Error::ZeroVelocity);
    }
    if !classify(path)?.tag.in_x() {
        return Err(Error::NotInConstraintClass);
    }
    Ok(x2 / v2)
}

/// The Poincaré constant `K = 2T²`.
pub fn poincare_constant<F: Scalar>(period: F) -> F {
    F::lit(2.0) * period * period
}

/// Polar samples; `theta` carries `N + 1` entries so that
/// `theta[N] - theta[0] = 2π·winding`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polar<F> {
    pub rho: Vec<F>,
    pub theta: Vec<F>,
}

pub fn polar_decompose<F: Scalar>(path: &LoopPath<F>) -> Result<Polar<F>> {
    let inc = increments(path)?;
    let rho = path.positions().iter().map(|p| p.norm()).collect();
    let mut theta0 = path.x(0).angle();
    if theta0 < F::zero() {
        theta0 = theta0 + F::TAU();
    }
    let mut theta = Vec::with_capacity(path.n() + 1);
    theta.push(theta0);
    let mut acc = theta0;
    for d in inc {
        acc = acc + d;
        theta.push(acc);
    }
    Ok(Polar { rho, theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn circle(period: f64, n: usize, radius: f64, turns: f64) -> LoopPath<f64> {
        let w = TAU * turns / period;
        LoopPath::from_fn(period, n, |t| {
            (Vec2::polar(w * t) * radius, Vec2::polar(w * t).perp() * (radius * w))
        })
        .unwrap()
    }

    #[test]
    fn winding_examples() {
        assert_eq!(winding_number(&circle(1.0, 64, 1.0, 1.0)).unwrap(), 1);
        assert_eq!(winding_number(&circle(1.0, 64, 1.0, 2.0)).unwrap(), 2);
        let off = LoopPath::from_fn(1.0, 64, |t| {
            let p = Vec2::polar(TAU * t);
            (Vec2::new(2.0, 0.0) + p * 0.5, p.perp() * (0.5 * TAU))
        })
        .unwrap();
        assert_eq!(winding_number(&off).unwrap(), 0);
        assert_eq!(classify(&off).unwrap().tag, ClassTag::Outside);
    }

    #[test]
    fn coarse_grid_is_ambiguous() {
        // two revolutions on 8 nodes: every step is exactly pi
        let err = winding_number(&circle(1.0, 8, 1.0, 4.0)).unwrap_err();
        assert!(matches!(err, Error::AmbiguousWinding { .. }));
    }

    #[test]
    fn origin_sample_is_xc_and_has_no_winding() {
        let mut pts: Vec<_> = circle(1.0, 32, 1.0, 1.0).positions().to_vec();
        pts[5] = Vec2::zero();
        let p = LoopPath::from_positions(1.0, pts).unwrap();
        assert_eq!(classify(&p).unwrap().tag, ClassTag::Xc);
        assert_eq!(winding_number(&p), Err(Error::PathTouchesOrigin { index: 5 }));
        assert!(polar_decompose(&p).is_err());
    }

    #[test]
    fn unit_circle_is_xr() {
        let c = classify(&circle(2.0, 64, 1.0, 1.0)).unwrap();
        assert_eq!((c.tag, c.winding), (ClassTag::Xr, 1));
        assert!((c.min_radius - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poincare_ratio_of_circle() {
        for &(t, r) in &[(1.0, 1.0), (2.0 * PI, 3.0), (0.3, 0.01)] {
            let ratio = poincare_ratio(&circle(t, 64, r, 1.0)).unwrap();
            assert!((ratio - t * t / (4.0 * PI * PI)).abs() < 1e-12 * t * t);
            assert!(ratio <= poincare_constant(t));
        }
    }

    #[test]
    fn constant_paths_have_zero_velocity() {
        let still = LoopPath::from_positions(1.0, vec![Vec2::new(1.0, 0.0); 16]).unwrap();
        assert_eq!(poincare_ratio(&still), Err(Error::ZeroVelocity));
        let zero = LoopPath::from_positions(1.0, vec![Vec2::zero(); 16]).unwrap();
        assert_eq!(poincare_ratio(&zero), Err(Error::ZeroVelocity));
    }

    #[test]
    fn polar_examples() {
        let p = polar_decompose(&circle(1.0, 64, 1.0, 1.0)).unwrap();
        assert!(p.rho.iter().all(|r| (r - 1.0).abs() < 1e-12));
        assert!((p.theta[64] - p.theta[0] - TAU).abs() < 1e-12);
        assert!((0.0..TAU).contains(&p.theta[0]));

        let p = polar_decompose(&circle(1.0, 128, 3.0, 2.0)).unwrap();
        assert!(p.rho.iter().all(|r| (r - 3.0).abs() < 1e-12));
        assert!((p.theta[128] - p.theta[0] - 2.0 * TAU).abs() < 1e-11);

        let ell = LoopPath::from_fn(1.0, 200, |t| {
            let (s, c) = (TAU * t).sin_cos();
            (Vec2::new(2.0 * c, s), Vec2::new(-2.0 * TAU * s, TAU * c))
        })
        .unwrap();
        let p = polar_decompose(&ell).unwrap();
        for (k, r) in p.rho.iter().enumerate() {
            let (s, c) = (TAU * ell.time(k)).sin_cos();
            assert!((r - (4.0 * c * c + s * s).sqrt()).abs() < 1e-14);
            assert!((1.0 - 1e-12..=2.0 + 1e-12).contains(r));
        }
        assert_eq!(winding_number(&ell).unwrap(), 1);
    }

    #[test]
    fn velocity_consistency_is_enforced() {
        let c = circle(1.0, 256, 1.0, 1.0);
        let ok = LoopPath::from_samples(1.0, c.positions().to_vec(), c.velocities().to_vec(), Some(1e-3));
        assert!(ok.is_ok());
        let bad = LoopPath::from_samples(
            1.0,
            c.positions().to_vec(),
            c.velocities().iter().map(|v| *v * 2.0).collect(),
            Some(1e-3),
        );
        assert!(matches!(bad, Err(Error::InvalidPath(_))));
    }

    #[test]
    fn rejects_small_grids_and_bad_periods() {
        assert!(LoopPath::from_positions(1.0, vec![Vec2::new(1.0, 0.0); 7]).is_err());
        assert!(LoopPath::from_positions(0.0, vec![Vec2::new(1.0, 0.0); 8]).is_err());
        assert!(LoopPath::from_positions(f64::NAN, vec![Vec2::new(1.0, 0.0); 8]).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let c = circle(2.5, 16, 1.5, 1.0);
        let back = LoopPath::<f64>::from_csv(&c.to_csv(), None).unwrap();
        assert!((back.period() - 2.5).abs() < 1e-10);
        for (a, b) in back.positions().iter().zip(c.positions()) {
            assert!((*a - *b).norm() < 1e-10);
        }
        assert!(LoopPath::<f64>::from_csv("t,x,y\n", None).is_err());
    }

    #[test]
    fn locate_wraps() {
        let c = circle(1.0, 10, 1.0, 1.0);
        let (k, s) = c.locate(1.25);
        assert_eq!(k, 2);
        assert!((s - 0.5).abs() < 1e-12);
        assert!((c.position_at(1.0) - c.x(0)).norm() < 1e-12);
    }
}
