//! Numerical integration: adaptive Simpson on split intervals and
//! Gauss–Hermite rules for Gaussian expectations.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::f64::consts::PI;

use once_cell::race::OnceBox;

/// Maximum bisection depth of one adaptive Simpson branch.
const MAX_DEPTH: u32 = 48;
/// Sub-intervals each piece is split into before adaptation starts.
const INITIAL_PANELS: usize = 8;

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let h = (b - a) / INITIAL_PANELS as f64;
    let panel_tol = tol / INITIAL_PANELS as f64;
    let mut total = 0.0;
    let mut x0 = a;
    let mut f0 = f(a);
    for i in 0..INITIAL_PANELS {
        let x1 = if i + 1 == INITIAL_PANELS {
            b
        } else {
            a + h * (i + 1) as f64
        };
        let f1 = f(x1);
        let m = 0.5 * (x0 + x1);
        let fm = f(m);
        let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        total += simpson_step(&mut f, x0, f0, x1, f1, m, fm, whole, panel_tol, MAX_DEPTH);
        x0 = x1;
        f0 = f1;
    }
    total
}

/// Integrates `f` over consecutive intervals `points[i]..points[i+1]` to a
/// tolerance relative to the size of the integral.
///
/// A coarse composite Simpson pass sizes the integral first; the adaptive
/// pass then runs with `rel_tol * max(|coarse|, abs_floor)`.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    rel_tol: f64,
    abs_floor: f64,
) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let mut coarse = 0.0;
    for w in points.windows(2) {
        coarse += composite_simpson(&mut f, w[0], w[1], 32);
    }
    let tol = rel_tol * coarse.abs().max(abs_floor);
    let pieces = (points.len() - 1) as f64;
    points
        .windows(2)
        .map(|w| adaptive_simpson(&mut f, w[0], w[1], tol / pieces))
        .sum()
}

/// Composite Simpson rule with `panels` (rounded up to even) sub-intervals.
pub fn composite_simpson<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// Gauss–Hermite rule for the weight `exp(-x²)`.
#[derive(Debug, Clone)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HermiteRule {
    /// Computes an `n`-point rule by Newton iteration on the normalised
    /// Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        const PIM4: f64 = 0.751_125_544_464_942_5;
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => libm::sqrt(2.0 * nf + 1.0) - 1.855_75 * libm::pow(2.0 * nf + 1.0, -1.0 / 6.0),
                1 => z - 1.14 * libm::pow(nf, 0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * libm::sqrt(2.0 / (jf + 1.0)) * p2 - libm::sqrt(jf / (jf + 1.0)) * p3;
                }
                pp = libm::sqrt(2.0 * nf) * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * (1.0 + z.abs()) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        // odd n: the middle node is exactly zero
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        nodes.reverse();
        weights.reverse();
        Self { nodes, weights }
    }

    /// `E[f(X)]` for `X ~ N(mean, sd²)`.
    pub fn expect_normal<F: FnMut(f64) -> f64>(&self, mean: f64, sd: f64, mut f: F) -> f64 {
        let scale = core::f64::consts::SQRT_2 * sd;
        let norm = 1.0 / libm::sqrt(PI);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mean + scale * x))
            .sum::<f64>()
            * norm
    }
}

/// The shared 64-node rule used for smooth expected utilities.
pub fn hermite64() -> &'static HermiteRule {
    static RULE: OnceBox<HermiteRule> = OnceBox::new();
    RULE.get_or_init(|| Box::new(HermiteRule::new(64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_weights_and_moments() {
        for n in [3usize, 9, 17, 64] {
            let rule = HermiteRule::new(n);
            let s: f64 = rule.weights.iter().sum();
            assert!((s - libm::sqrt(PI)).abs() < 1e-12, "n={n} sum={s}");
            // nodes ascending
            assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
            let var = rule.expect_normal(0.0, 2.0, |x| x * x);
            assert!((var - 4.0).abs() < 1e-11, "n={n} var={var}");
        }
        let r = HermiteRule::new(9);
        assert_eq!(r.nodes[4], 0.0);
        let m4 = hermite64().expect_normal(1.0, 1.0, |x| (x - 1.0).powi(4));
        assert!((m4 - 3.0).abs() < 1e-10);
    }

    #[test]
    fn simpson_handles_kinks_when_split() {
        let f = |x: f64| (x - 0.3).abs();
        let v = integrate_pieces(f, &[-1.0, 0.3, 1.0], 1e-12, 1.0);
        let exact = 0.5 * 1.3 * 1.3 + 0.5 * 0.7 * 0.7;
        assert!((v - exact).abs() < 1e-12);
        let g = |x: f64| libm::exp(x);
        let v = adaptive_simpson(g, 0.0, 1.0, 1e-12);
        assert!((v - (core::f64::consts::E - 1.0)).abs() < 1e-11);
    }
}
