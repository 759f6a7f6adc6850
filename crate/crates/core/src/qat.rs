//! The time-dependent point transformation between the lab frame and the
//! auxiliary free frame.
//!
//! Given a solution basis of the classical equation, a wave function φ(x, t)
//! of the quadratic (possibly damped and driven) problem maps to a free-frame
//! function ψ(κ, τ) with
//!
//! ```text
//!     τ = u₁/u₂,          κ = (x − u_p)/u₂,
//!     ψ = √u₂ · exp(−(i m / 2ħ) (u̇₂ / W u₂) (x − u_p)²)
//!            · exp(−(i m / ħ) (u̇_p / W) x)
//!            · exp(−(i m / 2ħ) A_p) · φ,
//! ```
//!
//! and the image satisfies the free Schrödinger equation in (κ, τ).  On the
//! grid the map factors into exactly unitary primitives — translate, phase
//! multipliers, dilate — applied here in that order; the √u₂ prefactor is the
//! Jacobian half-power the unitary dilation carries on its own.
//!
//! The map is valid on the window around t = 0 where u₂ stays positive; τ(t)
//! is strictly increasing there (dτ/dt = W/u₂² > 0), so lab time can be
//! recovered from frame time by bisection.

use crate::classical::{solve_basis, ClassicalBasis, LsodeSpec};
use crate::wavegrid::WaveFunction;
use crate::{C64, Error, Result};

/// A classical basis packaged for wave-function transformation work.
#[derive(Debug, Clone)]
pub struct QatContext {
    pub basis: ClassicalBasis,
}

impl QatContext {
    pub fn new(basis: ClassicalBasis) -> Self {
        QatContext { basis }
    }

    /// Solve the classical problem over `[t_min, t_max]` and wrap it.
    pub fn solve(spec: &LsodeSpec, t_min: f64, t_max: f64) -> Result<Self> {
        Ok(QatContext::new(solve_basis(spec, t_min, t_max)?))
    }

    pub fn spec(&self) -> &LsodeSpec {
        &self.basis.spec
    }

    /// Frame time τ(t) = u₁/u₂.
    pub fn tau(&self, t: f64) -> Result<f64> {
        let p = self.basis.point_windowed(t)?;
        Ok(p.u1 / p.u2)
    }

    /// Invert τ(t) on the validity window by bisection (to 1e-12 in t).
    pub fn map_time(&self, tau: f64) -> Result<f64> {
        if !tau.is_finite() {
            return Err(Error::TimeNotInImage { tau });
        }
        let (w_lo, w_hi) = self.basis.window;
        let span = w_hi - w_lo;
        // Pull clipped edges inward until the bracket is finite; τ diverges
        // at a u₂ zero, so a geometric approach always brackets eventually.
        let edge = |clipped: bool, base: f64, sign: f64| -> Vec<f64> {
            if clipped {
                (0..12).map(|k| base + sign * span * 1e-4 * 0.25f64.powi(k)).collect()
            } else {
                vec![base]
            }
        };
        let mut a = f64::NAN;
        for cand in edge(self.basis.clipped.0, w_lo, 1.0) {
            a = cand;
            if self.tau(cand)? <= tau {
                break;
            }
        }
        let mut b = f64::NAN;
        for cand in edge(self.basis.clipped.1, w_hi, -1.0) {
            b = cand;
            if self.tau(cand)? >= tau {
                break;
            }
        }
        let (fa, fb) = (self.tau(a)? - tau, self.tau(b)? - tau);
        if fa > 0.0 || fb < 0.0 {
            return Err(Error::TimeNotInImage { tau });
        }
        let (mut a, mut b) = (a, b);
        while b - a > 1e-12 {
            let m = 0.5 * (a + b);
            if self.tau(m)? - tau <= 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Map a lab-frame wave function at time `t` into the free frame.
    pub fn qat_forward(&self, phi: &WaveFunction, t: f64) -> Result<WaveFunction> {
        let p = self.basis.point_windowed(t)?;
        let m = self.spec().mass;
        let hb = self.spec().hbar;
        // Center the packet so the remaining factors act at x − u_p = y.
        let mut out = phi.translate(-p.up);
        out = out.quadratic_phase(-m * p.du2 / (2.0 * hb * p.w * p.u2), 0.0);
        if self.spec().is_forced() {
            out = out.linear_phase(-m * p.dup / (hb * p.w));
            let angle = -(m / hb) * (p.dup * p.up / p.w + 0.5 * p.ap);
            out = out.scaled(C64::from_polar(1.0, angle));
        }
        Ok(out.dilate(1.0 / p.u2))
    }

    /// Map a free-frame function at frame time τ(t) back to the lab at `t`.
    pub fn qat_inverse(&self, psi: &WaveFunction, t: f64) -> Result<WaveFunction> {
        let p = self.basis.point_windowed(t)?;
        let m = self.spec().mass;
        let hb = self.spec().hbar;
        let mut out = psi.dilate(p.u2);
        out = out.quadratic_phase(m * p.du2 / (2.0 * hb * p.w * p.u2), 0.0);
        if self.spec().is_forced() {
            out = out.linear_phase(m * p.dup / (hb * p.w));
            let angle = (m / hb) * (p.dup * p.up / p.w + 0.5 * p.ap);
            out = out.scaled(C64::from_polar(1.0, angle));
        }
        Ok(out.translate(p.up))
    }
}

/// Central finite-difference ∂ₜψ from equally spaced snapshots.
///
/// Returns the index of the sample the derivative refers to (the center) and
/// the derivative amplitudes.  With five or more samples the fourth-order
/// stencil is used, otherwise the second-order one.
pub(crate) fn central_time_derivative(samples: &[(f64, WaveFunction)]) -> Result<(usize, Vec<C64>)> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::InsufficientSamples { need: 3, got: n });
    }
    let dt = samples[1].0 - samples[0].0;
    if dt == 0.0 {
        return Err(Error::MalformedData("coincident sample times"));
    }
    for w in samples.windows(2) {
        if ((w[1].0 - w[0].0) - dt).abs() > 1e-9 * dt.abs() {
            return Err(Error::MalformedData("sample times are not equally spaced"));
        }
        if w[0].1.grid != w[1].1.grid {
            return Err(Error::GridMismatch("samples live on different grids"));
        }
    }
    let c = (n / 2).clamp(1, n - 2);
    let npts = samples[0].1.grid.n;
    let mut dpsi = vec![C64::new(0.0, 0.0); npts];
    if c >= 2 && c + 2 < n {
        for i in 0..npts {
            dpsi[i] = (samples[c - 2].1.amps[i] - samples[c - 1].1.amps[i] * 8.0
                + samples[c + 1].1.amps[i] * 8.0
                - samples[c + 2].1.amps[i])
                / (12.0 * dt);
        }
    } else {
        for i in 0..npts {
            dpsi[i] = (samples[c + 1].1.amps[i] - samples[c - 1].1.amps[i]) / (2.0 * dt);
        }
    }
    Ok((c, dpsi))
}

/// Finite-difference Schrödinger residual ‖iħ ∂ₜψ − Ĥψ‖ / ‖ψ‖ from a series
/// of equally spaced snapshots.
///
/// At least three samples are required; with five or more, the time
/// derivative at the central sample uses the fourth-order stencil.
pub fn schrodinger_residual<H>(h: H, samples: &[(f64, WaveFunction)], hbar: f64) -> Result<f64>
where
    H: Fn(f64, &WaveFunction) -> Result<WaveFunction>,
{
    let (c, dpsi) = central_time_derivative(samples)?;
    let (t_c, psi_c) = (&samples[c].0, &samples[c].1);
    let hpsi = h(*t_c, psi_c)?;
    let dx = psi_c.grid.dx();
    let mut defect = 0.0;
    for i in 0..psi_c.grid.n {
        defect += (C64::new(0.0, hbar) * dpsi[i] - hpsi.amps[i]).norm_sqr();
    }
    Ok((defect * dx).sqrt() / psi_c.norm())
}
