//! Gauss–Legendre rules.

use crate::scalar::Scalar;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.reverse();
    out
}

/// Composite rule with `panels` equal panels of `order` points each.
pub fn composite<F: Scalar>(f: impl Fn(F) -> F, a: F, b: F, panels: usize, order: usize) -> F {
    let rule = gauss_legendre(order);
    let w = (b - a) / F::of_usize(panels);
    let mut acc = F::zero();
    for p in 0..panels {
        let lo = a + w * F::of_usize(p);
        let mid = lo + w / F::lit(2.0);
        for &(x, wt) in &rule {
            acc = acc + F::lit(wt) * w / F::lit(2.0) * f(mid + w / F::lit(2.0) * F::lit(x));
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in 1..10 {
            let rule = gauss_legendre(n);
            assert!((rule.iter().map(|r| r.1).sum::<f64>() - 2.0).abs() < 1e-14);
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            let got: f64 = rule.iter().map(|(x, w)| w * x.powi(deg as i32 - 1) * x).sum();
            assert!((got - exact).abs() < 1e-14);
            let even: f64 = rule.iter().map(|(x, w)| w * x.powi(2 * (n as i32 - 1))).sum();
            assert!((even - 2.0 / (2.0 * n as f64 - 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn composite_sine() {
        let v = composite(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 10, 6);
        assert!((v - 2.0).abs() < 1e-13);
    }
}
