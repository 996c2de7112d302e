//! Unperturbed Kepler objects near a collision: the parabolic collision
//! solution `ζ₀`, its constants `s₀` and `φ₀`, and the two Keplerian arcs
//! joining a pair of unit vectors in time `2s₀`.

use crate::error::{Error, Result};
use crate::fmt::sci12;
use crate::ode::{integrate, OdeOptions, OdeStats};
use crate::quadrature::composite;
use crate::scalar::{sperling_amplitude, Scalar};
use crate::sperling::side_integrals;
use crate::vec2::Vec2;

/// Number of nodes of the exported arc grid over `[-s₀, s₀]`.
pub const ARC_OUTPUT_NODES: usize = 2001;
/// Endpoints closer than this to antipodal are refused.
pub const ANTIPODAL_TOLERANCE: f64 = 1e-10;

/// `s₀ = √2/3`, the time at which `|ζ₀| = 1`.
pub fn s0<F: Scalar>() -> F {
    F::SQRT_2() / F::lit(3.0)
}

/// `φ₀ = 4·8^{1/6} = 4√2`, the action of `ζ₀` on `[-s₀, s₀]`.
pub fn phi0<F: Scalar>() -> F {
    F::lit(4.0) * F::SQRT_2()
}

pub fn constants<F: Scalar>() -> (F, F) {
    (s0(), phi0())
}

/// Parabolic collision-ejection solution with incoming direction
/// `dir_minus` and outgoing direction `dir_plus`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParabolicCollision<F> {
    pub dir_minus: Vec2<F>,
    pub dir_plus: Vec2<F>,
}

impl<F: Scalar> ParabolicCollision<F> {
    pub fn new(dir_minus: Vec2<F>, dir_plus: Vec2<F>) -> Result<Self> {
        check_unit(dir_minus, "dir_minus")?;
        check_unit(dir_plus, "dir_plus")?;
        Ok(Self { dir_minus, dir_plus })
    }

    /// `ζ₀(t) = (9/2)^{1/3}|t|^{2/3} x₀^±`.
    pub fn zeta0(&self, t: F) -> Vec2<F> {
        let r = sperling_amplitude::<F>() * t.abs().powf(F::lit(2.0 / 3.0));
        if t >= F::zero() {
            self.dir_plus * r
        } else {
            self.dir_minus * r
        }
    }

    /// `ζ̇₀(t)`; undefined (infinite) at `t = 0`.
    pub fn zeta0_velocity(&self, t: F) -> Vec2<F> {
        let speed = F::lit(2.0 / 3.0) * sperling_amplitude::<F>() * t.abs().powf(F::lit(-1.0 / 3.0));
        if t >= F::zero() {
            self.dir_plus * speed
        } else {
            self.dir_minus * (-speed)
        }
    }
}

/// Convenience wrapper for [`ParabolicCollision::zeta0`].
pub fn zeta0<F: Scalar>(pc: &ParabolicCollision<F>, t: F) -> Vec2<F> {
    pc.zeta0(t)
}

fn check_unit<F: Scalar>(v: Vec2<F>, name: &str) -> Result<()> {
    let tol = F::lit(1e-9).max(F::epsilon() * F::lit(64.0));
    if !v.is_finite() || (v.norm() - F::one()).abs() > tol {
        return Err(Error::InvalidArgument(format!("{name} must be a unit vector, got norm {}", v.norm())));
    }
    Ok(())
}

/// Action of `ζ₀` over `[-s₀, s₀]` by composite Gauss–Legendre on `cells`
/// cells, the two cells touching the collision done in closed form.
pub fn zeta0_action_quadrature<F: Scalar>(cells: usize) -> F {
    let cells = cells.max(2) + cells % 2;
    let s = s0::<F>();
    let h = F::lit(2.0) * s / F::of_usize(cells);
    let kappa = sperling_amplitude::<F>();
    let lagrangian = |t: F| {
        let tau = t.abs();
        let speed = F::lit(2.0 / 3.0) * kappa * tau.powf(F::lit(-1.0 / 3.0));
        speed * speed / F::lit(2.0) + F::one() / (kappa * tau.powf(F::lit(2.0 / 3.0)))
    };
    let (k, p) = side_integrals(F::zero(), h, kappa);
    let central = F::lit(2.0) * (k + p);
    let half = cells / 2 - 1;
    let outer = composite(lagrangian, h, s, half, 12);
    central + F::lit(2.0) * outer
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArcLabel {
    Direct,
    Indirect,
}

impl ArcLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ArcLabel::Direct => "direct",
            ArcLabel::Indirect => "indirect",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcSample<F> {
    pub t: F,
    pub x: Vec2<F>,
    pub v: Vec2<F>,
}

/// Solution of `ξ̈ = −ξ/|ξ|³`, `ξ(±s₀) = x₀^±`.
#[derive(Clone, Debug, PartialEq)]
pub struct KeplerArc<F> {
    pub label: ArcLabel,
    pub endpoints: (Vec2<F>, Vec2<F>),
    pub samples: Vec<ArcSample<F>>,
    pub initial_velocity: Vec2<F>,
    /// `½|ξ̇|² − 1/|ξ|` at `-s₀`.
    pub energy: F,
    pub action: F,
    /// `|x₀⁺ − x₀⁻|`.
    pub chord: F,
    /// `|ξ(-s₀)| + |ξ(s₀)|`.
    pub ell: F,
    pub transfer_time: F,
    /// `|ξ(s₀) − x₀⁺|`.
    pub boundary_residual: F,
    /// Max energy deviation over the output grid.
    pub energy_drift: F,
    /// Signed polar angle swept on `[-s₀, s₀]`.
    pub sweep: F,
    pub min_radius: F,
}

impl<F: Scalar> KeplerArc<F> {
    /// Winding number of this arc followed by `other` reversed.
    pub fn concatenation_winding(&self, other: &Self) -> i64 {
        ((self.sweep - other.sweep) / F::TAU()).round().to_i64().unwrap_or(0)
    }

    /// Scaled copy `t ↦ λ ξ(t/λ^{3/2})` on `[-λ^{3/2}s₀, λ^{3/2}s₀]`,
    /// again a Kepler solution.
    pub fn position_scaled(&self, lambda: F, t: F) -> Vec2<F> {
        self.position(t / lambda.powf(F::lit(1.5))) * lambda
    }

    /// Piecewise cubic Hermite interpolation of the output grid.
    pub fn position(&self, t: F) -> Vec2<F> {
        let m = self.samples.len() - 1;
        let t0 = self.samples[0].t;
        let h = (self.samples[m].t - t0) / F::of_usize(m);
        let u = ((t - t0) / h).max(F::zero()).min(F::of_usize(m));
        let k = u.floor().to_usize().unwrap_or(0).min(m - 1);
        let s = u - F::of_usize(k);
        let (a, b) = (self.samples[k], self.samples[k + 1]);
        let (s2, s3) = (s * s, s * s * s);
        let two = F::lit(2.0);
        let three = F::lit(3.0);
        let h00 = two * s3 - three * s2 + F::one();
        let h10 = s3 - two * s2 + s;
        let h01 = three * s2 - two * s3;
        let h11 = s3 - s2;
        a.x * h00 + a.v * (h10 * h) + b.x * h01 + b.v * (h11 * h)
    }

    /// Integrates the arc to each of the increasing `times` in `[-s₀, s₀]`.
    pub fn propagate(&self, times: &[F]) -> Result<Vec<ArcSample<F>>> {
        let opts = ArcOptions::<F>::default().ode;
        let x0 = self.endpoints.0;
        let v0 = self.initial_velocity;
        let mut y = [x0.x, x0.y, v0.x, v0.y, F::zero(), F::zero()];
        let mut t = -s0::<F>();
        let mut h = F::lit(1e-3);
        let mut stats = OdeStats::default();
        let mut out = Vec::with_capacity(times.len());
        for &target in times {
            if target < t {
                return Err(Error::InvalidArgument("propagation times must increase".into()));
            }
            let (yn, hn) = integrate(plain_rhs, t, y, target, h, &opts, &mut stats)?;
            y = yn;
            h = hn;
            t = target;
            out.push(ArcSample { t, x: Vec2::new(y[0], y[1]), v: Vec2::new(y[2], y[3]) });
        }
        Ok(out)
    }

    /// CSV `t,xi1,xi2,v1,v2` on the output grid.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,xi1,xi2,v1,v2\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{},{},{}\n", sci12(s.t), sci12(s.x.x), sci12(s.x.y), sci12(s.v.x), sci12(s.v.y)));
        }
        out
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} H={} action={} c={} residual={}",
            self.label.as_str(),
            sci12(self.energy),
            sci12(self.action),
            sci12(self.chord),
            sci12(self.boundary_residual)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcOptions<F> {
    pub ode: OdeOptions<F>,
    /// Target for the terminal boundary residual.
    pub residual_tol: F,
    pub max_newton: usize,
}

impl<F: Scalar> Default for ArcOptions<F> {
    fn default() -> Self {
        let eps = F::epsilon();
        let ode = OdeOptions {
            rtol: F::lit(1e-13).max(eps * F::lit(100.0)),
            atol: F::lit(1e-15).max(eps),
            ..OdeOptions::default()
        };
        Self { ode, residual_tol: F::lit(1e-12).max(eps * F::lit(1e3)), max_newton: 60 }
    }
}

fn accel<F: Scalar>(x: Vec2<F>) -> Option<(Vec2<F>, F)> {
    let r = x.norm();
    if !(r > F::lit(1e-12)) {
        return None;
    }
    Some((x * (-F::one() / (r * r * r)), r))
}

/// State `[x, y, vx, vy, action, angle, ∂(x,v)/∂v₀ (4×2, row-major)]`.
fn shooting_rhs<F: Scalar>(_t: F, y: &[F; 14]) -> [F; 14] {
    let x = Vec2::new(y[0], y[1]);
    let v = Vec2::new(y[2], y[3]);
    let Some((a, r)) = accel(x) else { return [F::nan(); 14] };
    let r3 = r * r * r;
    let r5 = r3 * r * r;
    let three = F::lit(3.0);
    let g = [
        [three * x.x * x.x / r5 - F::one() / r3, three * x.x * x.y / r5],
        [three * x.x * x.y / r5, three * x.y * x.y / r5 - F::one() / r3],
    ];
    let mut out = [F::zero(); 14];
    out[0] = v.x;
    out[1] = v.y;
    out[2] = a.x;
    out[3] = a.y;
    out[4] = v.norm_sq() / F::lit(2.0) + F::one() / r;
    out[5] = x.cross(v) / (r * r);
    let psi = |i: usize, j: usize| y[6 + 2 * i + j];
    for j in 0..2 {
        out[6 + j] = psi(2, j);
        out[6 + 2 + j] = psi(3, j);
        out[6 + 4 + j] = g[0][0] * psi(0, j) + g[0][1] * psi(1, j);
        out[6 + 6 + j] = g[1][0] * psi(0, j) + g[1][1] * psi(1, j);
    }
    out
}

fn plain_rhs<F: Scalar>(_t: F, y: &[F; 6]) -> [F; 6] {
    let x = Vec2::new(y[0], y[1]);
    let v = Vec2::new(y[2], y[3]);
    let Some((a, r)) = accel(x) else { return [F::nan(); 6] };
    [v.x, v.y, a.x, a.y, v.norm_sq() / F::lit(2.0) + F::one() / r, x.cross(v) / (r * r)]
}

struct Shot<F> {
    end: Vec2<F>,
    jac: [[F; 2]; 2],
    sweep: F,
}

fn shoot<F: Scalar>(x0: Vec2<F>, v0: Vec2<F>, opts: &OdeOptions<F>) -> Result<Shot<F>> {
    let s = s0::<F>();
    let mut y = [F::zero(); 14];
    y[0] = x0.x;
    y[1] = x0.y;
    y[2] = v0.x;
    y[3] = v0.y;
    y[6 + 4] = F::one();
    y[6 + 7] = F::one();
    let mut stats = OdeStats::default();
    let (y, _) = integrate(shooting_rhs, -s, y, s, F::lit(1e-3), opts, &mut stats)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration("non-finite state".into()));
    }
    Ok(Shot { end: Vec2::new(y[0], y[1]), jac: [[y[6], y[7]], [y[8], y[9]]], sweep: y[5] })
}

/// Damped Newton iteration on the initial velocity.
fn newton<F: Scalar>(x_minus: Vec2<F>, x_plus: Vec2<F>, seed: Vec2<F>, opts: &ArcOptions<F>) -> Result<(Vec2<F>, F)> {
    let mut v = seed;
    let mut shot = shoot(x_minus, v, &opts.ode)?;
    let mut res = shot.end - x_plus;
    for _ in 0..opts.max_newton {
        if res.norm() <= opts.residual_tol {
            return Ok((v, shot.sweep));
        }
        let [[a, b], [c, d]] = shot.jac;
        let det = a * d - b * c;
        if !(det.abs() > F::zero()) || !det.is_finite() {
            return Err(Error::ShootingFailed { side: "newton", reason: "singular shooting Jacobian".into() });
        }
        let mut step = Vec2::new((d * res.x - b * res.y) / det, (a * res.y - c * res.x) / det) * (-F::one());
        let cap = F::lit(2.0) * v.norm() + F::one();
        if step.norm() > cap {
            step = step * (cap / step.norm());
        }
        let mut accepted = false;
        for _ in 0..40 {
            if let Ok(trial) = shoot(x_minus, v + step, &opts.ode) {
                let r = trial.end - x_plus;
                if r.norm() < res.norm() {
                    v += step;
                    shot = trial;
                    res = r;
                    accepted = true;
                    break;
                }
            }
            step = step / F::lit(2.0);
        }
        if !accepted {
            if res.norm() <= opts.residual_tol * F::lit(1e3) {
                return Ok((v, shot.sweep));
            }
            return Err(Error::ShootingFailed {
                side: "newton",
                reason: format!("line search stalled at residual {}", sci12(res.norm())),
            });
        }
    }
    if res.norm() <= opts.residual_tol * F::lit(1e3) {
        return Ok((v, shot.sweep));
    }
    Err(Error::ShootingFailed { side: "newton", reason: format!("no convergence, residual {}", sci12(res.norm())) })
}

/// Integrates the converged arc onto the output grid.
fn build_arc<F: Scalar>(
    label: ArcLabel,
    x_minus: Vec2<F>,
    x_plus: Vec2<F>,
    v0: Vec2<F>,
    opts: &ArcOptions<F>,
) -> Result<KeplerArc<F>> {
    let s = s0::<F>();
    let m = ARC_OUTPUT_NODES - 1;
    let dt = F::lit(2.0) * s / F::of_usize(m);
    let mut y = [x_minus.x, x_minus.y, v0.x, v0.y, F::zero(), F::zero()];
    let energy_of = |y: &[F; 6]| {
        Vec2::new(y[2], y[3]).norm_sq() / F::lit(2.0) - F::one() / Vec2::new(y[0], y[1]).norm()
    };
    let energy = energy_of(&y);
    let mut samples = Vec::with_capacity(ARC_OUTPUT_NODES);
    let mut drift = F::zero();
    let mut min_radius = x_minus.norm();
    let mut h = F::lit(1e-3);
    let mut stats = OdeStats::default();
    let mut t = -s;
    samples.push(ArcSample { t, x: x_minus, v: v0 });
    for k in 1..=m {
        let t_next = if k == m { s } else { -s + dt * F::of_usize(k) };
        let (yn, hn) = integrate(plain_rhs, t, y, t_next, h, &opts.ode, &mut stats)?;
        y = yn;
        h = hn;
        t = t_next;
        let x = Vec2::new(y[0], y[1]);
        drift = drift.max((energy_of(&y) - energy).abs());
        min_radius = min_radius.min(x.norm());
        samples.push(ArcSample { t, x, v: Vec2::new(y[2], y[3]) });
    }
    // periapsis between grid nodes
    let l = x_minus.cross(v0);
    let e = (F::one() + F::lit(2.0) * energy * l * l).max(F::zero()).sqrt();
    let rp = l * l / (F::one() + e);
    let passes = samples.windows(2).any(|w| w[0].x.dot(w[0].v) < F::zero() && w[1].x.dot(w[1].v) >= F::zero());
    if passes {
        min_radius = min_radius.min(rp);
    }
    let end = samples[m].x;
    Ok(KeplerArc {
        label,
        endpoints: (x_minus, x_plus),
        initial_velocity: v0,
        energy,
        action: y[4],
        chord: (x_plus - x_minus).norm(),
        ell: x_minus.norm() + end.norm(),
        transfer_time: F::lit(2.0) * s,
        boundary_residual: (end - x_plus).norm(),
        energy_drift: drift,
        sweep: y[5],
        min_radius,
        samples,
    })
}

/// Direct and indirect arcs from `x_minus` at `-s₀` to `x_plus` at `s₀`,
/// returned as `(direct, indirect)`.
pub fn solve_arcs<F: Scalar>(x_minus: Vec2<F>, x_plus: Vec2<F>) -> Result<(KeplerArc<F>, KeplerArc<F>)> {
    solve_arcs_with(x_minus, x_plus, &ArcOptions::default())
}

pub fn solve_arcs_with<F: Scalar>(
    x_minus: Vec2<F>,
    x_plus: Vec2<F>,
    opts: &ArcOptions<F>,
) -> Result<(KeplerArc<F>, KeplerArc<F>)> {
    check_unit(x_minus, "x_minus")?;
    check_unit(x_plus, "x_plus")?;
    if (x_plus + x_minus).norm() <= F::lit(ANTIPODAL_TOLERANCE) {
        return Err(Error::AntipodalEndpoints);
    }
    if (x_plus - x_minus).norm() <= F::lit(ANTIPODAL_TOLERANCE) {
        return Err(Error::InvalidArgument("endpoints coincide".into()));
    }
    let speed = F::SQRT_2();
    let inward = -x_minus;
    let mut found: [Option<(Vec2<F>, F)>; 2] = [None, None];
    let betas = [0.5, 0.25, 0.75, 0.1, 0.9, 0.4, 0.6, 0.02, 0.98];
    for (slot, orient) in [(0usize, F::one()), (1, -F::one())] {
        if found[slot].is_some() {
            continue;
        }
        let mut last_err = None;
        for &b in &betas {
            let beta = F::lit(b) * F::PI();
            let seed = (inward * beta.cos() + inward.perp() * (-orient * beta.sin())) * speed;
            match newton(x_minus, x_plus, seed, opts) {
                Ok((v, sweep)) => {
                    let idx = if sweep > F::zero() { 0 } else { 1 };
                    if found[idx].is_none() {
                        found[idx] = Some((v, sweep));
                    }
                    if found[slot].is_some() {
                        break;
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        if found[slot].is_none() {
            let side = if slot == 0 { "counterclockwise" } else { "clockwise" };
            let reason = match last_err {
                Some(e) => e.to_string(),
                None => "every seed converged to the opposite arc".into(),
            };
            return Err(Error::ShootingFailed { side, reason });
        }
    }
    let (ccw, cw) = (found[0].unwrap(), found[1].unwrap());
    let (direct, indirect) = if ccw.1.abs() < cw.1.abs() { (ccw, cw) } else { (cw, ccw) };
    let d = build_arc(ArcLabel::Direct, x_minus, x_plus, direct.0, opts)?;
    let i = build_arc(ArcLabel::Indirect, x_minus, x_plus, indirect.0, opts)?;
    Ok((d, i))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambertReport<F> {
    pub ell: F,
    pub chord: F,
    pub transfer_time: F,
    pub energy: F,
    /// `|ℓ − 2|`.
    pub ell_residual: F,
}

pub fn lambert_relation_check<F: Scalar>(arc: &KeplerArc<F>) -> LambertReport<F> {
    LambertReport {
        ell: arc.ell,
        chord: arc.chord,
        transfer_time: arc.transfer_time,
        energy: arc.energy,
        ell_residual: (arc.ell - F::lit(2.0)).abs(),
    }
}

/// Largest per-label energy difference between two arc pairs; small when
/// their chords agree.
pub fn lambert_energy_gap<F: Scalar>(a: &(KeplerArc<F>, KeplerArc<F>), b: &(KeplerArc<F>, KeplerArc<F>)) -> F {
    (a.0.energy - b.0.energy).abs().max((a.1.energy - b.1.energy).abs())
}
