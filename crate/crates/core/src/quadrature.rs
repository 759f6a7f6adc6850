//! Gauss–Legendre quadrature: fixed nodes and an adaptive panel scheme.

use crate::error::{Error, Result};

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
///
/// Computed by Newton iteration on the Legendre recurrence; accurate to machine
/// precision for the modest orders used here (n ≤ 64).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Fixed n-point Gauss–Legendre approximation of ∫_a^b f dt.
pub fn fixed_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Adaptive Gauss–Legendre panels: a 15-point estimate on each panel is accepted when
/// splitting the panel in two changes it by less than the panel's tolerance share.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (nodes, weights) = gauss_legendre(15);
    let whole = fixed_panel(f, a, b, &nodes, &weights);
    adaptive(f, a, b, whole, tol, 0, &nodes, &weights)
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    nodes: &[f64],
    weights: &[f64],
) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let left = fixed_panel(f, a, mid, nodes, weights);
    let right = fixed_panel(f, mid, b, nodes, weights);
    let refined = left + right;
    if !refined.is_finite() {
        return Err(Error::NonFiniteCoefficient {
            t: mid,
            what: "quadrature integrand",
        });
    }
    if (refined - whole).abs() <= tol.max(1e-15 * refined.abs()) {
        return Ok(refined);
    }
    if depth >= 30 {
        return Err(Error::QuadratureFailure { a, b });
    }
    let half_tol = 0.5 * tol;
    Ok(adaptive(f, a, mid, left, half_tol, depth + 1, nodes, weights)?
        + adaptive(f, mid, b, right, half_tol, depth + 1, nodes, weights)?)
}
