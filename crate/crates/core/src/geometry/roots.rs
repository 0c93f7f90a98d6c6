//! Real roots of univariate polynomials with `f64` coefficients.
//!
//! Roots are isolated on intervals where the polynomial is monotone: the
//! critical points (real roots of the derivative, found recursively) split
//! `[-R, R]` into such intervals, `R` being the Cauchy bound. Each interval
//! with a sign change holds exactly one root, found by bisection with
//! Newton polishing. A critical point where the value is within `tol` of
//! zero is reported as a (touching) root.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RootError {
    #[error("polynomial is identically zero")]
    IdenticallyZero,
}

fn eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(i, &a)| a * i as f64).collect()
}

/// Sorted real roots of `sum c[i] x^i`.
pub fn real_roots(coeffs: &[f64], tol: f64) -> Result<Vec<f64>, RootError> {
    let mut c = coeffs.to_vec();
    while c.last() == Some(&0.0) {
        c.pop();
    }
    match c.len() {
        0 => Err(RootError::IdenticallyZero),
        1 => Ok(Vec::new()),
        2 => Ok(vec![-c[0] / c[1]]),
        _ => Ok(roots_monotone(&c, tol)),
    }
}

fn roots_monotone(c: &[f64], tol: f64) -> Vec<f64> {
    let n = c.len() - 1;
    let lead = c[n];
    let bound = 1.0 + c[..n].iter().map(|a| (a / lead).abs()).fold(0.0, f64::max);

    let dc = derivative(c);
    let mut breaks = vec![-bound];
    if let Ok(crit) = real_roots(&dc, tol) {
        breaks.extend(crit.into_iter().filter(|x| x.abs() < bound));
    }
    breaks.push(bound);
    let values: Vec<f64> = breaks.iter().map(|&x| eval(c, x)).collect();
    let crosses = |i: usize| values[i] * values[i + 1] < 0.0;

    let mut roots: Vec<f64> = Vec::new();
    for i in 0..breaks.len() {
        let interior = i > 0 && i + 1 < breaks.len();
        let touching = interior && values[i].abs() <= tol && !crosses(i - 1) && !crosses(i);
        if values[i] == 0.0 || touching {
            roots.push(breaks[i]);
        }
        if i + 1 < breaks.len() && crosses(i) {
            roots.push(bracketed(c, &dc, breaks[i], breaks[i + 1], values[i]));
        }
    }
    roots.dedup_by(|b, a| (*b - *a).abs() <= 1e-12 * (1.0 + a.abs()));
    roots
}

/// Safeguarded Newton on a bracket `[a, b]` with `f(a)` and `f(b)` of
/// opposite sign; falls back to bisection when a Newton step leaves the
/// bracket.
fn bracketed(c: &[f64], dc: &[f64], mut a: f64, mut b: f64, fa: f64) -> f64 {
    let neg_at_a = fa < 0.0;
    let mut x = 0.5 * (a + b);
    for _ in 0..400 {
        let fx = eval(c, x);
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == neg_at_a {
            a = x;
        } else {
            b = x;
        }
        let dfx = eval(dc, x);
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton > a.min(b) && newton < a.max(b) {
            newton
        } else {
            0.5 * (a + b)
        };
        if next == x || next == a || next == b {
            return x;
        }
        x = next;
    }
    x
}
