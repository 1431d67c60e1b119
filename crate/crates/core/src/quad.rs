//! Adaptive Simpson quadrature.
//!
//! All integrands in this crate are smooth on the intervals they are asked to
//! integrate over (kernel supports are split at their kinks by the callers),
//! so a plain recursive Simpson rule with Richardson correction is enough.

/// Absolute tolerance used throughout the crate.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Maximum recursion depth.
pub const DEFAULT_MAX_DEPTH: u32 = 50;

/// Integrate `f` over `[a, b]` with the default tolerance and depth.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    adaptive_simpson(&f, a, b, DEFAULT_TOL, DEFAULT_MAX_DEPTH)
}

/// Integrate over `[a, b]` split into `pieces` equal panels first.
///
/// Long windows of oscillating integrands converge faster when the initial
/// Simpson estimate is not a single panel spanning several periods.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize) -> f64 {
    let pieces = pieces.max(1);
    let width = (b - a) / pieces as f64;
    let tol = DEFAULT_TOL / pieces as f64;
    (0..pieces)
        .map(|k| {
            let lo = a + width * k as f64;
            let hi = if k + 1 == pieces { b } else { lo + width };
            adaptive_simpson(&f, lo, hi, tol, DEFAULT_MAX_DEPTH)
        })
        .sum()
}

/// Adaptive Simpson rule with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -adaptive_simpson(f, b, a, tol, max_depth);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0;
    recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) * (fa + 4.0 * flm + fm) / 6.0;
    let right = (b - m) * (fm + 4.0 * frm + fb) / 6.0;
    let delta = left + right - whole;
    // A panel narrower than a few ulps cannot be refined further.
    if depth == 0 || delta.abs() <= 15.0 * tol || (m - a) <= f64::EPSILON * a.abs().max(1.0) {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Midpoint Riemann sum with `n` cells. Used as a brute-force oracle.
pub fn midpoint_sum<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}
