//! Multi-start minimization of `A_T` over loops with a prescribed winding
//! number, with a continuation in the regularization of the Keplerian term.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::action::{action_period, check_safe_radius, discrete_action, discrete_action_grad, ActionBreakdown, Regularization};
use crate::error::{Error, Result};
use crate::fourier::FourierLoop;
use crate::loops::{angle_increment, classify, ConstraintClass, LoopPath, MIN_NODES};
use crate::potentials::Potential;
use crate::scalar::Scalar;
use crate::vec2::Vec2;

/// How the continuation parameter `ε` enters the Keplerian term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegularizationKind {
    /// `1/√(|x|² + ε²)`.
    Softening,
    /// `1/|x| + ε²/|x|³`.
    Barrier,
}

impl RegularizationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegularizationKind::Softening => "softening",
            RegularizationKind::Barrier => "barrier",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "softening" => Some(RegularizationKind::Softening),
            "barrier" => Some(RegularizationKind::Barrier),
            _ => None,
        }
    }

    pub fn at<F: Scalar>(self, eps: F) -> Regularization<F> {
        if eps == F::zero() {
            Regularization::None
        } else {
            match self {
                RegularizationKind::Softening => Regularization::Softening(eps),
                RegularizationKind::Barrier => Regularization::Barrier(eps),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeConfig<F> {
    pub winding: i64,
    /// Grid size.
    pub n: usize,
    /// Iteration budget per continuation stage.
    pub max_iters: usize,
    /// Final-stage tolerance on `max_k |∂A/∂x_k| / h`.
    pub tol_grad: F,
    /// A stage stops when the accepted step moves no node further than
    /// `tol_step · scale`.
    pub tol_step: F,
    pub starts: usize,
    pub seed: u64,
    /// Continuation values of `ε`, in units of the initial mean radius.
    pub softening_schedule: Vec<F>,
    pub regularization: RegularizationKind,
    /// Degree of the random initial trigonometric polynomials.
    pub init_degree: i64,
    /// Relative size of the non-dominant initial Fourier terms.
    pub init_perturbation: F,
}

impl<F: Scalar> Default for MinimizeConfig<F> {
    fn default() -> Self {
        Self {
            winding: 1,
            n: 256,
            max_iters: 20_000,
            tol_grad: F::lit(1e-6),
            tol_step: F::lit(1e-14),
            starts: 8,
            seed: 0,
            softening_schedule: [1e-1, 1e-2, 1e-3, 1e-4, 0.0].iter().map(|e| F::lit(*e)).collect(),
            regularization: RegularizationKind::Barrier,
            init_degree: 5,
            init_perturbation: F::lit(0.3),
        }
    }
}

impl<F: Scalar> MinimizeConfig<F> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.winding == 0 {
            return bad("winding must be nonzero");
        }
        if self.n < MIN_NODES {
            return bad("grid too small");
        }
        if !(self.tol_grad > F::zero()) || !(self.tol_step > F::zero()) {
            return bad("tol_grad and tol_step must be positive");
        }
        if self.starts == 0 || self.max_iters == 0 {
            return bad("starts and max_iters must be positive");
        }
        let s = &self.softening_schedule;
        if s.last() != Some(&F::zero()) || s.iter().any(|e| !(*e >= F::zero())) || s.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("softening_schedule must be strictly decreasing and end at 0");
        }
        if self.init_degree < self.winding.abs() || !(self.init_perturbation >= F::zero()) {
            return bad("init_degree must cover the winding and init_perturbation must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeResult<F> {
    pub path: LoopPath<F>,
    pub action: ActionBreakdown<F>,
    pub constraint: ConstraintClass<F>,
    pub grad_norm: F,
    /// Accepted iterations summed over stages.
    pub iterations: usize,
    pub collided: bool,
    pub collision_suspects: Vec<F>,
    pub converged: bool,
    /// Index of the winning start.
    pub start: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum StageEnd {
    Converged,
    Stalled,
    Exhausted,
}

struct RunOutcome<F> {
    positions: Vec<Vec2<F>>,
    iterations: usize,
    grad_norm: F,
    end: StageEnd,
}

/// Stationary point search for `A_T` in the requested winding class.
pub fn minimize<F: Scalar>(u: &Potential<F>, cfg: &MinimizeConfig<F>) -> Result<MinimizeResult<F>> {
    cfg.validate()?;
    let runs: Vec<Result<RunOutcome<F>>> = (0..cfg.starts).into_par_iter().map(|s| run_start(u, cfg, s)).collect();

    let mut best: Option<(usize, RunOutcome<F>, F)> = None;
    let mut winding_lost = false;
    let mut best_grad = F::infinity();
    let mut total_iters = 0;
    let mut first_err = None;
    for (s, run) in runs.into_iter().enumerate() {
        match run {
            Err(Error::WindingLost) => winding_lost = true,
            Err(e) => {
                first_err.get_or_insert(e);
            }
            Ok(out) => {
                best_grad = best_grad.min(out.grad_norm);
                total_iters = total_iters.max(out.iterations);
                let collided = collision_suspects(&out.positions, u.period).0;
                if out.end == StageEnd::Exhausted && !collided {
                    continue;
                }
                let value = discrete_action(&out.positions, u.period, u, Regularization::None);
                let better = match &best {
                    None => true,
                    Some((_, b, bv)) => {
                        let tie = F::lit(1e-10) * F::one().max(bv.abs());
                        value < *bv - tie || ((value - *bv).abs() <= tie && out.grad_norm < b.grad_norm)
                    }
                };
                if better {
                    best = Some((s, out, value));
                }
            }
        }
    }
    let Some((start, out, _)) = best else {
        if winding_lost {
            return Err(Error::WindingLost);
        }
        if best_grad.is_finite() {
            return Err(Error::NoConvergence { best_grad_norm: best_grad.as_f64(), iterations: total_iters });
        }
        return Err(first_err.unwrap_or(Error::NoConvergence { best_grad_norm: f64::INFINITY, iterations: 0 }));
    };
    let path = LoopPath::from_positions(u.period, out.positions)?;
    let (collided, suspects) = collision_suspects(path.positions(), u.period);
    let constraint = classify(&path)?;
    let action = action_period(&path, u)?;
    Ok(MinimizeResult {
        converged: out.end == StageEnd::Converged && !collided,
        path,
        action,
        constraint,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        collided,
        collision_suspects: suspects,
        start,
    })
}

/// Whether the loop comes within the collision threshold of the origin,
/// and the times of the local minima of `|x|` that do.
fn collision_suspects<F: Scalar>(positions: &[Vec2<F>], period: F) -> (bool, Vec<F>) {
    let n = positions.len();
    let h = period / F::of_usize(n);
    let scale = positions.iter().fold(F::zero(), |m, p| m.max(p.norm()));
    let threshold = F::lit(crate::loops::COLLISION_THRESHOLD_SCALE) * (scale + F::one());
    let r: Vec<F> = positions.iter().map(|p| p.norm()).collect();
    let mut times = Vec::new();
    for k in 0..n {
        let (prev, next) = (r[(k + n - 1) % n], r[(k + 1) % n]);
        if r[k] < threshold && r[k] <= prev && r[k] < next {
            times.push(h * F::of_usize(k));
        }
    }
    // a segment may cross the origin between two nodes
    for k in 0..n {
        let (a, b) = (positions[k], positions[(k + 1) % n]);
        let d = b - a;
        let l2 = d.norm_sq();
        if l2 == F::zero() {
            continue;
        }
        let s = (-(a.dot(d)) / l2).max(F::zero()).min(F::one());
        if s > F::zero() && s < F::one() && (a + d * s).norm() < threshold && !times.iter().any(|t| (*t / h - F::of_usize(k)).abs() <= F::one()) {
            times.push(h * (F::of_usize(k) + s));
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (!times.is_empty(), times)
}

fn initial_loop<F: Scalar>(u: &Potential<F>, cfg: &MinimizeConfig<F>, start: usize) -> Result<Vec<Vec2<F>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(start as u64));
    let w = cfg.winding;
    let radius = (u.period / (F::TAU() * F::lit(w.abs() as f64))).powf(F::lit(2.0 / 3.0));
    let f = FourierLoop::random_with_winding(&mut rng, u.period, cfg.init_degree, w, radius, cfg.init_perturbation);
    Ok(f.sample(cfg.n)?.positions().to_vec())
}

fn winding_of<F: Scalar>(x: &[Vec2<F>]) -> Option<i64> {
    let n = x.len();
    let limit = F::PI() * (F::one() - F::lit(1e-12));
    let mut total = F::zero();
    for k in 0..n {
        if x[k].norm() == F::zero() {
            return None;
        }
        let d = angle_increment(x[k], x[(k + 1) % n]);
        if d.abs() >= limit {
            return None;
        }
        total = total + d;
    }
    (total / F::TAU()).round().to_i64()
}

fn run_start<F: Scalar>(u: &Potential<F>, cfg: &MinimizeConfig<F>, start: usize) -> Result<RunOutcome<F>> {
    let mut x = initial_loop(u, cfg, start)?;
    let r0 = x.iter().fold(F::zero(), |a, p| a + p.norm()) / F::of_usize(x.len());
    let mut iterations = 0;
    let mut last = None;
    let stages = cfg.softening_schedule.len();
    for (i, &eps) in cfg.softening_schedule.iter().enumerate() {
        let reg = cfg.regularization.at(eps * r0);
        let tol = if i + 1 == stages { cfg.tol_grad } else { cfg.tol_grad * F::lit(100.0) };
        let stage = descend(u, &mut x, reg, tol, cfg, r0, None)?;
        iterations += stage.0;
        last = Some((stage.1, stage.2));
    }
    let (grad_norm, end) = last.unwrap();
    Ok(RunOutcome { positions: x, iterations, grad_norm, end })
}

/// Result of minimizing one regularized functional from a given loop.
#[derive(Clone, Debug, PartialEq)]
pub struct StageOutcome<F> {
    pub positions: Vec<Vec2<F>>,
    /// Regularized discrete action at `positions`.
    pub value: F,
    pub grad_norm: F,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each accepted iteration.
    pub trace: Vec<F>,
}

/// Minimizes the functional regularized with absolute `eps` starting from
/// `positions`, keeping `cfg.winding`.
pub fn minimize_stage<F: Scalar>(
    u: &Potential<F>,
    positions: Vec<Vec2<F>>,
    kind: RegularizationKind,
    eps: F,
    cfg: &MinimizeConfig<F>,
) -> Result<StageOutcome<F>> {
    let mut x = positions;
    let r0 = x.iter().fold(F::zero(), |a, p| a + p.norm()) / F::of_usize(x.len());
    let reg = kind.at(eps);
    let mut trace = Vec::new();
    let (iterations, grad_norm, end) = descend(u, &mut x, reg, cfg.tol_grad, cfg, r0, Some(&mut trace))?;
    let value = discrete_action(&x, u.period, u, reg);
    Ok(StageOutcome { positions: x, value, grad_norm, iterations, converged: end == StageEnd::Converged, trace })
}

/// Periodic tridiagonal preconditioner `(2I − S − S^T)/h + c·h·I`.
type LbfgsPair<F> = (Vec<Vec2<F>>, Vec<Vec2<F>>, F);

struct Preconditioner<F> {
    diag: F,
    off: F,
}

impl<F: Scalar> Preconditioner<F> {
    /// Solves the cyclic system componentwise (Sherman–Morrison on Thomas).
    fn apply(&self, rhs: &[Vec2<F>]) -> Vec<Vec2<F>> {
        let n = rhs.len();
        let (a, b) = (self.diag, self.off);
        // A = T + u vᵀ with u = (γ, 0, .., b), v = (1, 0, .., b/γ)
        let gamma = -a;
        let mut d = vec![a; n];
        d[0] = a - gamma;
        d[n - 1] = a - b * b / gamma;
        let solve = |r: &dyn Fn(usize) -> F| -> Vec<F> {
            let mut c = vec![F::zero(); n];
            let mut y = vec![F::zero(); n];
            c[0] = b / d[0];
            y[0] = r(0) / d[0];
            for i in 1..n {
                let m = d[i] - b * c[i - 1];
                c[i] = b / m;
                y[i] = (r(i) - b * y[i - 1]) / m;
            }
            for i in (0..n - 1).rev() {
                y[i] = y[i] - c[i] * y[i + 1];
            }
            y
        };
        let z = solve(&|i| if i == 0 { gamma } else if i == n - 1 { b } else { F::zero() });
        let fix = |y: Vec<F>| -> Vec<F> {
            let dot = y[0] + y[n - 1] * b / gamma;
            let scale = dot / (F::one() + z[0] + z[n - 1] * b / gamma);
            y.iter().zip(&z).map(|(yi, zi)| *yi - *zi * scale).collect()
        };
        let xs = fix(solve(&|i| rhs[i].x));
        let ys = fix(solve(&|i| rhs[i].y));
        xs.into_iter().zip(ys).map(|(x, y)| Vec2::new(x, y)).collect()
    }
}

fn dot<F: Scalar>(a: &[Vec2<F>], b: &[Vec2<F>]) -> F {
    a.iter().zip(b).fold(F::zero(), |s, (p, q)| s + p.dot(*q))
}

fn max_norm<F: Scalar>(a: &[Vec2<F>]) -> F {
    a.iter().fold(F::zero(), |m, p| m.max(p.norm()))
}

/// One continuation stage of preconditioned L-BFGS with Armijo backtracking.
/// Returns `(iterations, grad_norm, end)`.
fn descend<F: Scalar>(
    u: &Potential<F>,
    x: &mut Vec<Vec2<F>>,
    reg: Regularization<F>,
    tol: F,
    cfg: &MinimizeConfig<F>,
    r0: F,
    mut trace: Option<&mut Vec<F>>,
) -> Result<(usize, F, StageEnd)> {
    const MEMORY: usize = 8;
    let n = x.len();
    let period = u.period;
    let h = period / F::of_usize(n);
    let pre = Preconditioner { diag: F::lit(2.0) / h + h / (r0 * r0 * r0), off: -F::one() / h };
    let (mut f, mut g) = discrete_action_grad(x, period, u, reg);
    let mut hist: Vec<LbfgsPair<F>> = Vec::new();
    let mut iters = 0;
    loop {
        let gnorm = max_norm(&g) / h;
        if gnorm <= tol {
            return Ok((iters, gnorm, StageEnd::Converged));
        }
        if iters >= cfg.max_iters {
            return Ok((iters, gnorm, StageEnd::Exhausted));
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = *rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= *yi * a;
            }
            alphas.push(a);
        }
        let mut r = pre.apply(&q);
        if let Some((s, y, _)) = hist.last() {
            let gamma = dot(s, y) / dot(y, &pre.apply(y));
            for ri in r.iter_mut() {
                *ri = *ri * gamma;
            }
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = *rho * dot(y, &r);
            for (ri, si) in r.iter_mut().zip(s) {
                *ri += *si * (*a - b);
            }
        }
        let mut d: Vec<Vec2<F>> = r.iter().map(|v| -*v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < F::zero()) {
            hist.clear();
            d = pre.apply(&g).into_iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        // keep every node well away from the origin within one step
        let rmin = x.iter().fold(F::infinity(), |m, p| m.min(p.norm()));
        let dmax = max_norm(&d);
        let mut alpha = F::one().min(F::lit(0.5) * rmin / dmax);
        let mut winding_rejections = 0usize;
        let mut other_rejections = 0usize;
        let accepted = loop {
            if alpha * dmax <= cfg.tol_step * r0 {
                break None;
            }
            let trial: Vec<Vec2<F>> = x.iter().zip(&d).map(|(p, q)| *p + *q * alpha).collect();
            if winding_of(&trial) != Some(cfg.winding) {
                winding_rejections += 1;
                alpha = alpha / F::lit(2.0);
                continue;
            }
            let ft = discrete_action(&trial, period, u, reg);
            if ft.is_finite() && ft <= f + F::lit(1e-4) * alpha * slope {
                break Some((trial, ft));
            }
            other_rejections += 1;
            alpha = alpha / F::lit(2.0);
        };
        let Some((trial, ft)) = accepted else {
            if winding_rejections > 0 && other_rejections == 0 {
                return Err(Error::WindingLost);
            }
            if !hist.is_empty() {
                hist.clear();
                continue;
            }
            return Ok((iters, gnorm, StageEnd::Stalled));
        };
        let (_, gt) = discrete_action_grad(&trial, period, u, reg);
        let s: Vec<Vec2<F>> = trial.iter().zip(x.iter()).map(|(a, b)| *a - *b).collect();
        let y: Vec<Vec2<F>> = gt.iter().zip(&g).map(|(a, b)| *a - *b).collect();
        let sy = dot(&s, &y);
        if sy > F::zero() {
            if hist.len() == MEMORY {
                hist.remove(0);
            }
            hist.push((s, y, F::one() / sy));
        }
        *x = trial;
        f = ft;
        if let Some(t) = trace.as_deref_mut() {
            t.push(f);
        }
        g = gt;
        iters += 1;
    }
}

/// `max_k |(x_{k+1} − 2x_k + x_{k−1})/h² + x_k/|x_k|³ − ∇_x U(t_k, x_k)|`.
pub fn euler_lagrange_residual<F: Scalar>(path: &LoopPath<F>, u: &Potential<F>) -> Result<F> {
    check_safe_radius(path)?;
    let h = path.h();
    let mut worst = F::zero();
    for k in 0..path.n() {
        let x = path.x(k);
        let km1 = if k == 0 { path.n() - 1 } else { k - 1 };
        let acc = (path.x(k + 1) - x * F::lit(2.0) + path.x(km1)) / (h * h);
        let r = x.norm();
        let res = acc + x / (r * r * r) - u.grad_x(path.time(k), x);
        worst = worst.max(res.norm());
    }
    Ok(worst)
}
