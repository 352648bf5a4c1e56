//! Small numerical utilities shared across the crate: the error function,
//! the standard normal CDF, and scalar root bracketing/refinement.

use std::f64::consts::{FRAC_2_SQRT_PI, SQRT_2};

/// Error function, accurate to roughly 1e-15 relative over the real line.
///
/// Uses the Maclaurin series for |x| <= 2 and a Lentz-style continued
/// fraction for the complementary function beyond that, so no accuracy
/// cliff at the switchover.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    if ax <= 2.0 {
        erf_series(x)
    } else {
        let tail = erfc_cf(ax);
        let value = 1.0 - tail;
        if x < 0.0 {
            -value
        } else {
            value
        }
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    if ax <= 2.0 {
        1.0 - erf_series(x)
    } else if x > 0.0 {
        erfc_cf(ax)
    } else {
        2.0 - erfc_cf(ax)
    }
}

/// erf via its Maclaurin series; converges quickly for |x| <= 2.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    for n in 1..=60 {
        let n = n as f64;
        term *= -x2 / n;
        let contrib = term / (2.0 * n + 1.0);
        sum += contrib;
        if contrib.abs() < sum.abs() * 1e-18 {
            break;
        }
    }
    FRAC_2_SQRT_PI * sum
}

/// erfc for x > 2 via the classical continued fraction
/// erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
/// evaluated backward at fixed depth. For x >= 2 the truncation error at
/// this depth is far below f64 resolution, and backward evaluation is
/// unconditionally stable (every partial denominator exceeds x).
fn erfc_cf(x: f64) -> f64 {
    let mut t = x;
    for k in (1..=120).rev() {
        t = x + (0.5 * k as f64) / t;
    }
    (-x * x).exp() / (std::f64::consts::PI.sqrt() * t)
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    // Route through erfc so deep tails keep relative accuracy.
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal log-density.
pub fn normal_log_pdf(z: f64) -> f64 {
    const LOG_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
    -0.5 * z * z - LOG_SQRT_2PI
}

/// Standard normal quantile via bisection on `normal_cdf`.
///
/// Only used at setup time (chain initialization, critical values), so the
/// ~90 CDF evaluations per call are irrelevant.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0, 1), got {p}");
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Result of a bracketed scalar root solve.
#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
}

/// Find a root of `f` on `[lo, hi]`, where `f(lo)` and `f(hi)` have opposite
/// signs. Bisection with a secant refinement step each iteration; the secant
/// candidate is only taken when it lands strictly inside the current bracket,
/// so convergence is guaranteed.
pub fn bracketed_root<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Option<Root> {
    let (mut lo, mut hi) = (lo, hi);
    let (mut flo, mut fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Some(Root { x: lo, residual: 0.0 });
    }
    if fhi == 0.0 {
        return Some(Root { x: hi, residual: 0.0 });
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return None;
    }
    let mut x = 0.5 * (lo + hi);
    let mut fx = f(x);
    for _ in 0..200 {
        // Shrink the bracket around the sign change.
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        if hi - lo <= tol * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        // Secant through the bracket endpoints, safeguarded by bisection.
        let secant = lo - flo * (hi - lo) / (fhi - flo);
        let mid = 0.5 * (lo + hi);
        x = if secant.is_finite() && secant > lo && secant < hi {
            secant
        } else {
            mid
        };
        // Alternate toward bisection when the secant stops making progress.
        if (x - lo).min(hi - x) < 1e-3 * (hi - lo) {
            x = mid;
        }
        fx = f(x);
        if fx == 0.0 {
            return Some(Root { x, residual: 0.0 });
        }
    }
    let x = if flo.abs() <= fhi.abs() { lo } else { hi };
    let residual = if flo.abs() <= fhi.abs() { flo } else { fhi };
    Some(Root { x, residual })
}
