//! Bounded utility functions over item values and their expectations under
//! Gaussian beliefs.

use alloc::vec::Vec;

use crate::belief::GaussianBelief;
use crate::error::{invalid, Result};
use crate::quad::{hermite64, integrate_pieces};
use crate::special::{norm_cdf, norm_pdf, norm_ppf, norm_sf};

/// Half-width, in standard deviations, of the window used by quadrature
/// fallbacks. The Gaussian mass outside it is below 1e-30.
const Z_SPAN: f64 = 12.0;

#[derive(Debug, Clone, PartialEq)]
pub enum UtilityFn {
    /// `low` below the threshold, `mid` exactly at it, `high` above.
    Step {
        threshold: f64,
        low: f64,
        mid: f64,
        high: f64,
    },
    /// `tanh((x - shift) / scale)`.
    Tanh { scale: f64, shift: f64 },
    /// Linear interpolation between knots, constant beyond the end knots.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl UtilityFn {
    pub fn step(threshold: f64, low: f64, mid: f64, high: f64) -> Result<Self> {
        if ![threshold, low, mid, high].iter().all(|v| v.is_finite()) {
            return Err(invalid("step utility parameters must be finite"));
        }
        if !(low <= mid && mid <= high) {
            return Err(invalid("step utility needs low <= mid <= high"));
        }
        Ok(UtilityFn::Step {
            threshold,
            low,
            mid,
            high,
        })
    }

    pub fn tanh(scale: f64, shift: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() || !shift.is_finite() {
            return Err(invalid(
                "tanh utility needs finite scale > 0 and finite shift",
            ));
        }
        Ok(UtilityFn::Tanh { scale, shift })
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(invalid("piecewise-linear utility needs at least one knot"));
        }
        if knots.iter().any(|(x, u)| !x.is_finite() || !u.is_finite()) {
            return Err(invalid("piecewise-linear knots must be finite"));
        }
        if knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(invalid(
                "piecewise-linear knots must be strictly increasing in x",
            ));
        }
        Ok(UtilityFn::PiecewiseLinear { knots })
    }

    /// The utility used throughout the pathological example: 0 below 1,
    /// 0.5 at 1, 1 above.
    pub fn unit_step() -> Self {
        UtilityFn::Step {
            threshold: 1.0,
            low: 0.0,
            mid: 0.5,
            high: 1.0,
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            UtilityFn::Step {
                threshold,
                low,
                mid,
                high,
            } => {
                if x < *threshold {
                    *low
                } else if x > *threshold {
                    *high
                } else {
                    *mid
                }
            }
            UtilityFn::Tanh { scale, shift } => libm::tanh((x - shift) / scale),
            UtilityFn::PiecewiseLinear { knots } => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if x <= first.0 {
                    return first.1;
                }
                if x >= last.0 {
                    return last.1;
                }
                let i = knots.partition_point(|k| k.0 <= x);
                let (x0, u0) = knots[i - 1];
                let (x1, u1) = knots[i];
                u0 + (u1 - u0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Infimum and supremum of the utility.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            UtilityFn::Step { low, high, .. } => (*low, *high),
            UtilityFn::Tanh { .. } => (-1.0, 1.0),
            UtilityFn::PiecewiseLinear { knots } => knots
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
                    (lo.min(k.1), hi.max(k.1))
                }),
        }
    }

    /// Whether the utility is non-decreasing in the item value.
    pub fn is_monotone(&self) -> bool {
        match self {
            UtilityFn::Step { .. } | UtilityFn::Tanh { .. } => true,
            UtilityFn::PiecewiseLinear { knots } => knots.windows(2).all(|w| w[0].1 <= w[1].1),
        }
    }

    /// Points where the utility is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            UtilityFn::Step { threshold, .. } => alloc::vec![*threshold],
            UtilityFn::Tanh { .. } => Vec::new(),
            UtilityFn::PiecewiseLinear { knots } => knots.iter().map(|k| k.0).collect(),
        }
    }

    pub fn expected_utility(&self, belief: &GaussianBelief) -> f64 {
        self.expected_at(belief.mean, belief.variance)
    }

    /// `E[u(X)]` for `X ~ N(mean, variance)`.
    ///
    /// Step and piecewise-linear utilities are integrated exactly piece by
    /// piece; tanh uses 64-node Gauss–Hermite while the belief is no wider
    /// than the tanh scale and a trapezoid rule otherwise.
    pub fn expected_at(&self, mean: f64, variance: f64) -> f64 {
        if variance == 0.0 {
            return self.evaluate(mean);
        }
        let sd = libm::sqrt(variance);
        match self {
            UtilityFn::Step {
                threshold,
                low,
                high,
                ..
            } => low + (high - low) * norm_sf((threshold - mean) / sd),
            UtilityFn::Tanh { scale, shift } => {
                if sd <= *scale {
                    hermite64().expect_normal(mean, sd, |x| self.evaluate(x))
                } else {
                    tanh_wide_expectation((mean - shift) / scale, sd / scale)
                }
            }
            UtilityFn::PiecewiseLinear { knots } => piecewise_linear_expectation(knots, mean, sd),
        }
    }

    /// Generic path: adaptive Simpson against the Gaussian density, split at
    /// every kink. Used to cross-check the closed forms.
    pub fn expected_by_quadrature(&self, mean: f64, variance: f64, rel_tol: f64) -> f64 {
        if variance == 0.0 {
            return self.evaluate(mean);
        }
        let sd = libm::sqrt(variance);
        let kinks: Vec<f64> = self.kinks().iter().map(|k| (k - mean) / sd).collect();
        self.gaussian_quadrature(mean, sd, &kinks, rel_tol)
    }

    fn gaussian_quadrature(&self, mean: f64, sd: f64, kinks_z: &[f64], rel_tol: f64) -> f64 {
        let mut points: Vec<f64> = Vec::with_capacity(kinks_z.len() + 2);
        points.push(-Z_SPAN);
        points.extend(kinks_z.iter().copied().filter(|z| z.abs() < Z_SPAN));
        points.push(Z_SPAN);
        points.sort_by(f64::total_cmp);
        points.dedup();
        let (lo, hi) = self.bounds();
        let floor = (hi - lo).abs().max(f64::MIN_POSITIVE);
        integrate_pieces(
            |z| self.evaluate(mean + sd * z) * norm_pdf(z),
            &points,
            rel_tol,
            floor,
        )
    }

    /// Belief mean at which the expected utility under `variance` equals
    /// `target`, for monotone utilities.
    ///
    /// Returns `None` when `target` lies outside the open range of attainable
    /// expected utilities or the utility is not monotone.
    pub fn mean_for_expected(&self, variance: f64, target: f64) -> Option<f64> {
        if !self.is_monotone() || !(variance > 0.0) {
            return None;
        }
        let (lo, hi) = self.bounds();
        if !(target > lo && target < hi) {
            return None;
        }
        match self {
            UtilityFn::Step {
                threshold,
                low,
                high,
                ..
            } => {
                let p = (target - low) / (high - low);
                let m = threshold + libm::sqrt(variance) * norm_ppf(p);
                m.is_finite().then_some(m)
            }
            _ => self.invert_by_bisection(variance, target),
        }
    }

    fn invert_by_bisection(&self, variance: f64, target: f64) -> Option<f64> {
        let sd = libm::sqrt(variance);
        let centre = match self {
            UtilityFn::Tanh { shift, .. } => *shift,
            UtilityFn::PiecewiseLinear { knots } => 0.5 * (knots[0].0 + knots[knots.len() - 1].0),
            UtilityFn::Step { threshold, .. } => *threshold,
        };
        let mut width = sd.max(1.0);
        let mut a = centre - width;
        let mut b = centre + width;
        let mut tries = 0;
        while self.expected_at(a, variance) > target || self.expected_at(b, variance) < target {
            width *= 2.0;
            a = centre - width;
            b = centre + width;
            tries += 1;
            if tries > 200 {
                return None;
            }
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.expected_at(m, variance) < target {
                a = m;
            } else {
                b = m;
            }
            if b - a <= 1e-13 * (1.0 + m.abs()) {
                break;
            }
        }
        Some(0.5 * (a + b))
    }
}

/// Exact `E[u(X)]` for a piecewise-linear `u` and `X ~ N(mean, sd²)`.
/// `E[tanh(T)]`, `T ~ N(mu, s²)` with `s > 1`, by the trapezoid rule in `t`.
/// The integrand is analytic in a strip of half-width π/2, so the error of
/// step `h` decays like `exp(-π²/h)` (about 2e-11 at `h = 0.4`).
fn tanh_wide_expectation(mu: f64, s: f64) -> f64 {
    const H: f64 = 0.4;
    let half = libm::ceil(Z_SPAN * s / H) as i64;
    let mut acc = 0.0;
    for j in -half..=half {
        let d = j as f64 * H;
        acc += libm::tanh(mu + d) * norm_pdf(d / s);
    }
    acc * H / s
}

fn piecewise_linear_expectation(knots: &[(f64, f64)], mean: f64, sd: f64) -> f64 {
    let z = |x: f64| (x - mean) / sd;
    let (x_first, u_first) = knots[0];
    let (x_last, u_last) = knots[knots.len() - 1];
    let mut total = u_first * norm_cdf(z(x_first)) + u_last * norm_sf(z(x_last));
    for w in knots.windows(2) {
        let ((x0, u0), (x1, u1)) = (w[0], w[1]);
        let (a, b) = (z(x0), z(x1));
        let mass = if a > 0.0 {
            norm_sf(a) - norm_sf(b)
        } else {
            norm_cdf(b) - norm_cdf(a)
        };
        let slope = (u1 - u0) / (x1 - x0);
        // E[X 1{x0 < X < x1}] = mean * mass + sd * (φ(a) - φ(b))
        let first_moment = mean * mass + sd * (norm_pdf(a) - norm_pdf(b));
        total += (u0 - slope * x0) * mass + slope * first_moment;
    }
    total
}
