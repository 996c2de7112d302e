//! Adaptive Dormand–Prince 5(4) integration of `y' = f(t, y)` on fixed-size states.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions<F> {
    pub rtol: F,
    pub atol: F,
    pub max_steps: usize,
    /// Steps shorter than this are treated as a stall.
    pub min_step: F,
}

impl<F: Scalar> Default for OdeOptions<F> {
    fn default() -> Self {
        Self { rtol: F::lit(1e-13), atol: F::lit(1e-15), max_steps: 2_000_000, min_step: F::lit(1e-16) }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Integrates from `t0` to `t1` (either direction) starting with step `h0`.
/// Returns the final state and the last accepted step size.
pub fn integrate<F: Scalar, const D: usize>(
    f: impl Fn(F, &[F; D]) -> [F; D],
    t0: F,
    y0: [F; D],
    t1: F,
    h0: F,
    opts: &OdeOptions<F>,
    stats: &mut OdeStats,
) -> Result<([F; D], F)> {
    let span = t1 - t0;
    if span == F::zero() {
        return Ok((y0, h0));
    }
    let dir = span.signum();
    let mut h = h0.abs().min(span.abs()).max(opts.min_step) * dir;
    let mut t = t0;
    let mut y = y0;
    let mut k = [[F::zero(); D]; 7];
    k[0] = f(t, &y);
    let mut steps = 0usize;
    loop {
        let remaining = t1 - t;
        if remaining * dir <= F::zero() {
            return Ok((y, h));
        }
        let last = h.abs() >= remaining.abs();
        let step = if last { remaining } else { h };
        for s in 1..7 {
            let mut ys = y;
            for (i, v) in ys.iter_mut().enumerate() {
                let mut acc = F::zero();
                for j in 0..s {
                    acc = acc + F::lit(A[s][j]) * k[j][i];
                }
                *v = *v + step * acc;
            }
            k[s] = f(t + F::lit(C[s]) * step, &ys);
        }
        let mut y_new = y;
        let mut err = F::zero();
        for i in 0..D {
            let (mut hi, mut lo) = (F::zero(), F::zero());
            for s in 0..7 {
                hi = hi + F::lit(B5[s]) * k[s][i];
                lo = lo + F::lit(B4[s]) * k[s][i];
            }
            y_new[i] = y[i] + step * hi;
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((step * (hi - lo)).abs() / scale);
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Integration(format!("step budget exhausted at t = {t}")));
        }
        if !err.is_finite() {
            stats.rejected += 1;
            h = step / F::lit(4.0);
        } else if err <= F::one() {
            stats.accepted += 1;
            t = if last { t1 } else { t + step };
            y = y_new;
            k[0] = k[6];
            let grow = if err == F::zero() { F::lit(5.0) } else { (F::lit(0.9) * err.powf(F::lit(-0.2))).min(F::lit(5.0)) };
            h = step * grow.max(F::one());
            if last {
                return Ok((y, step.abs().max(h.abs()) * dir));
            }
        } else {
            stats.rejected += 1;
            h = step * (F::lit(0.9) * err.powf(F::lit(-0.2))).max(F::lit(0.1));
        }
        if h.abs() < opts.min_step {
            return Err(Error::Integration(format!("step size underflow at t = {t}")));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_harmonic() {
        let mut st = OdeStats::default();
        let (y, _) = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 2.0, 0.1, &OdeOptions::default(), &mut st).unwrap();
        assert!((y[0] - 2.0f64.exp()).abs() < 1e-11);
        let (y, _) =
            integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], -3.0, 0.1, &OdeOptions::default(), &mut st)
                .unwrap();
        assert!((y[0] - (-3.0f64).sin()).abs() < 1e-12 && (y[1] - 3.0f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn fifth_order_convergence_with_loose_tolerance() {
        // a fixed large step should realise the global order of the scheme
        let run = |h: f64| {
            let opts = OdeOptions { rtol: 1.0, atol: 1.0, ..OdeOptions::default() };
            let mut st = OdeStats::default();
            let mut y = [1.0f64];
            let mut t = 0.0;
            while t < 1.0 - 1e-12 {
                y = integrate(|t, y: &[f64; 1]| [t.cos() * y[0]], t, y, t + h, h, &opts, &mut st).unwrap().0;
                t += h;
            }
            (y[0] - 1.0f64.sin().exp()).abs()
        };
        let ratio = run(0.1) / run(0.05);
        assert!(ratio > 25.0, "ratio {ratio}");
    }
}
