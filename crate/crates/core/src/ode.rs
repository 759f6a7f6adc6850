//! Adaptive Dormand–Prince 5(4) integration for small smooth ODE systems.
//!
//! This is deliberately minimal: fixed-size state vectors are not worth a trait here,
//! so the integrator works on `&[f64]` slices with a user RHS closure.  Step size is
//! controlled by the standard embedded 4th-order error estimate with a PI-free
//! controller (plain 0.9·(tol/err)^(1/5) rescaling), which is plenty for the linear
//! classical equations this crate integrates.

use crate::error::{Error, Result};

/// Butcher tableau of the Dormand–Prince 5(4) pair.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
/// 5th-order weights (same as the last A row: FSAL pair).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
/// Embedded 4th-order weights.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Tolerances for the embedded error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel: 1e-10,
            abs: 1e-12,
        }
    }
}

/// Integrate `dy/dt = rhs(t, y)` from `t0` to `t1` (either direction).
///
/// `y` is updated in place; returns the number of accepted steps.  The RHS must
/// return finite values; a NaN/inf aborts with `NonFiniteCoefficient`.
pub fn integrate<F>(rhs: &F, t0: f64, t1: f64, y: &mut [f64], tol: Tolerances) -> Result<usize>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = y.len();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(0);
    }
    let dir = span.signum();
    let mut t = t0;
    let mut h = (span.abs() * 0.01).max(1e-8) * dir;
    let h_min = span.abs() * 1e-14 + f64::MIN_POSITIVE;

    let mut k = vec![vec![0.0; dim]; 7];
    let mut ytmp = vec![0.0; dim];
    let mut accepted = 0usize;
    let mut steps_total = 0usize;

    rhs(t, y, &mut k[0]);
    check_finite(t, &k[0])?;

    while (t1 - t) * dir > 0.0 {
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        steps_total += 1;
        if steps_total > 1_000_000 {
            return Err(Error::IntegrationFailure {
                t,
                why: "step budget exhausted",
            });
        }

        for s in 0..6 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s + 1) {
                    acc += A[s][j] * kj[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            let ts = t + C[s] * h;
            let (head, tail) = k.split_at_mut(s + 1);
            let _ = head;
            rhs(ts, &ytmp, &mut tail[0]);
            check_finite(ts, &tail[0])?;
        }

        // Error estimate: |y5 - y4| against mixed tolerance.
        let mut err = 0.0f64;
        for i in 0..dim {
            let mut y5 = 0.0;
            let mut y4 = 0.0;
            for (s, ks) in k.iter().enumerate() {
                y5 += B5[s] * ks[i];
                y4 += B4[s] * ks[i];
            }
            let ynew = y[i] + h * y5;
            let scale = tol.abs + tol.rel * y[i].abs().max(ynew.abs());
            let e = h * (y5 - y4) / scale;
            err = err.max(e.abs());
            ytmp[i] = ynew;
        }

        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&ytmp);
            // FSAL: stage 7 of the accepted step is stage 1 of the next one.
            let (head, tail) = k.split_at_mut(6);
            let _ = head;
            rhs(t, y, &mut tail[0]);
            check_finite(t, &tail[0])?;
            k.swap(0, 6);
            accepted += 1;
        }

        let fac = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= fac;
        if h.abs() < h_min {
            return Err(Error::IntegrationFailure {
                t,
                why: "step size underflow",
            });
        }
    }
    Ok(accepted)
}

fn check_finite(t: f64, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteCoefficient {
            t,
            what: "ODE right-hand side",
        })
    }
}
