//! Spectral side of the invariant quadratic Hamiltonian.
//!
//! Every linear system handled by [`crate::classical`] carries a conserved
//! quadratic operator Ĥ* = (1/2m)P̂² + ½mω̃²X̂² + (γ̃/2)(X̂P̂)ₛ built from the
//! invariant position/momentum pair.  Its eigenfunctions are closed-form
//! parabolic-cylinder packets riding on the classical basis functions, with a
//! discrete ladder when Ω̃ = √(ω̃² − γ̃²/4) is real and a doubly degenerate
//! continuum when it is imaginary.  This module assembles the operator,
//! evaluates both eigenfunction families on a [`Grid`], and provides the
//! windowed finite-difference measures used to check them.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::classical::BasisPoint;
use crate::error::{Error, Result};
use crate::operators::{
    invariant_momentum_sq, invariant_momentum_sq_on_shell, invariant_position_momentum,
    invariant_position_momentum_on_shell, invariant_position_sq, invariant_position_sq_on_shell,
    MonomialCoeffs, OperatorRep,
};
use crate::qat::QatContext;
use crate::special::gamma;
use crate::wavegrid::{Grid, WaveFunction};
use crate::C64;

pub use crate::special::parabolic_cylinder_d;

/// Stand-in frequency for the critically damped point Ω̃ = 0, which both
/// eigenfunction families reach only as a limit.
const CRITICAL_OMEGA: f64 = 1e-6;

/// Frequency pair (ω̃, γ̃) selecting one conserved quadratic operator.
///
/// The derived mode frequency Ω̃ = √(ω̃² − γ̃²/4) decides the spectral type:
/// real Ω̃ gives the discrete ladder h*ₙ = ħΩ̃(n + ½), imaginary Ω̃ gives the
/// two-fold degenerate continuum h* = −ħ|Ω̃|λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HStarParams {
    pub omega_tilde: f64,
    pub gamma_tilde: f64,
}

impl HStarParams {
    pub fn new(omega_tilde: f64, gamma_tilde: f64) -> Self {
        assert!(
            omega_tilde >= 0.0 && gamma_tilde >= 0.0,
            "mode frequencies must be non-negative"
        );
        HStarParams { omega_tilde, gamma_tilde }
    }

    /// Ω̃² = ω̃² − γ̃²/4; sign selects the spectral regime.
    pub fn omega_sq(&self) -> f64 {
        self.omega_tilde * self.omega_tilde - 0.25 * self.gamma_tilde * self.gamma_tilde
    }

    /// Ω̃ as a complex number: real for ω̃ > γ̃/2, positive imaginary below.
    pub fn big_omega(&self) -> C64 {
        C64::from(self.omega_sq()).sqrt()
    }

    /// Real Ω̃ for the discrete ladder, floored at the critical limit.
    fn real_omega(&self) -> Result<f64> {
        if self.omega_tilde < 0.5 * self.gamma_tilde {
            return Err(Error::ComplexOmegaTilde { omega_sq: self.omega_sq() });
        }
        Ok(self.omega_sq().sqrt().max(CRITICAL_OMEGA))
    }

    /// |Ω̃| for the continuous branches, floored at the critical limit.
    fn imag_omega(&self) -> Result<f64> {
        if self.omega_tilde > 0.5 * self.gamma_tilde {
            return Err(Error::RealOmegaTilde { omega_sq: self.omega_sq() });
        }
        Ok((-self.omega_sq()).sqrt().max(CRITICAL_OMEGA))
    }
}

/// Eigenvalue h* = ħΩ̃(ν + ½) of Ĥ* on the ν-th cylinder solution.
pub fn hstar_eigenvalue(params: &HStarParams, hbar: f64, nu: C64) -> C64 {
    hbar * params.big_omega() * (nu + 0.5)
}

/// The conserved operator Ĥ* = (1/2m)P̂² + ½mω̃²X̂² + (γ̃/2)(X̂P̂)ₛ.
///
/// Assembled from the invariant quadratics, so it acts on a single snapshot
/// (no ∂ₜ term).  Forced systems are rejected with `ForcedNotSupported`.
pub fn hstar_operator(ctx: &QatContext, params: &HStarParams) -> Result<OperatorRep> {
    let p2 = invariant_momentum_sq(ctx)?;
    let x2 = invariant_position_sq(ctx)?;
    let xp = invariant_position_momentum(ctx)?;
    Ok(combine_quadratics(ctx, params, p2, x2, xp))
}

/// Same combination built from the on-shell forms, which trade spatial for
/// time derivatives and therefore act on solution sample series only.
pub fn hstar_operator_on_shell(ctx: &QatContext, params: &HStarParams) -> Result<OperatorRep> {
    let p2 = invariant_momentum_sq_on_shell(ctx)?;
    let x2 = invariant_position_sq_on_shell(ctx)?;
    let xp = invariant_position_momentum_on_shell(ctx)?;
    Ok(combine_quadratics(ctx, params, p2, x2, xp))
}

fn combine_quadratics(
    ctx: &QatContext,
    params: &HStarParams,
    p2: OperatorRep,
    x2: OperatorRep,
    xp: OperatorRep,
) -> OperatorRep {
    let m = ctx.spec().mass;
    let w2 = params.omega_tilde * params.omega_tilde;
    let gt = params.gamma_tilde;
    OperatorRep::new("H*", move |t| {
        let kin = p2.coeffs(t)?.scale(C64::from(0.5 / m));
        let pot = x2.coeffs(t)?.scale(C64::from(0.5 * m * w2));
        let cross = xp.coeffs(t)?.scale(C64::from(0.5 * gt));
        Ok(kin.add(&pot).add(&cross))
    })
}

/// Which of the two degenerate continuum solutions to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    /// Cylinder function of the argument itself: (C₁, C₂) = (1, 0).
    Plus,
    /// Cylinder function of the rotated argument: (C₁, C₂) = (0, 1).
    Minus,
}

/// One solved member of the Ĥ* eigenproblem.
///
/// The amplitude is C₁·D_ν(z) + C₂·D₋₁₋ν(iz) dressed with the classical
/// envelope; `omega` holds the regime-resolved Ω̃ (real on the ladder,
/// positive imaginary on the continuum, floored at the critical point).
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub nu: C64,
    pub c1: C64,
    pub c2: C64,
    pub params: HStarParams,
    pub omega: C64,
    pub ctx: QatContext,
}

impl EigenSolution {
    /// Ladder state n = 0, 1, 2, …; requires real Ω̃ (ω̃ ≥ γ̃/2).
    pub fn discrete(ctx: &QatContext, params: &HStarParams, n: u32) -> Result<Self> {
        let om = params.real_omega()?;
        Ok(EigenSolution {
            nu: C64::from(n as f64),
            c1: C64::from(1.0),
            c2: C64::from(0.0),
            params: *params,
            omega: C64::from(om),
            ctx: ctx.clone(),
        })
    }

    /// Continuum state ν = −½ + iλ; requires imaginary Ω̃ (ω̃ ≤ γ̃/2).
    pub fn continuous(
        ctx: &QatContext,
        params: &HStarParams,
        lambda: f64,
        branch: Degeneracy,
    ) -> Result<Self> {
        let om = params.imag_omega()?;
        let (c1, c2) = match branch {
            Degeneracy::Plus => (C64::from(1.0), C64::from(0.0)),
            Degeneracy::Minus => (C64::from(0.0), C64::from(1.0)),
        };
        Ok(EigenSolution {
            nu: C64::new(-0.5, lambda),
            c1,
            c2,
            params: *params,
            omega: C64::new(0.0, om),
            ctx: ctx.clone(),
        })
    }

    /// h* = ħΩ̃(ν + ½) with the regime-resolved Ω̃.
    pub fn eigenvalue(&self) -> C64 {
        self.ctx.spec().hbar * self.omega * (self.nu + 0.5)
    }

    /// Amplitudes on `grid` at time `t` (must lie inside the basis window).
    ///
    /// The closed-form prefactor 1/√(√(2π)Γ(ν+1)S) is used exactly as it
    /// stands; on the ladder its measured L² norm is (2mΩ̃/ħ)^(−1/4),
    /// constant in time.  Callers wanting unit norm scale by the inverse.
    pub fn evaluate(&self, grid: &Grid, t: f64) -> Result<WaveFunction> {
        let spec = self.ctx.spec();
        let (m, hb) = (spec.mass, spec.hbar);
        let fr = frame(&self.ctx, &self.params, self.omega, t)?;
        let p = &fr.point;

        let nu_half = self.nu + 0.5;
        let pref = C64::from((2.0 * PI).powf(-0.25))
            * gamma(self.nu + 1.0).sqrt().inv()
            * (-(fr.lw + fr.lv) * 0.25).exp()
            * ((fr.lw - fr.lv) * 0.5 * nu_half).exp();
        let s = ((fr.lw + fr.lv) * 0.5).exp();
        let scale = (C64::from(2.0 * m / hb) * self.omega).sqrt() / s;
        let quad = 0.5 * m * fr.q_sum / hb;
        let lin = m * p.dup / (hb * p.w);
        let global = 0.5 * m * p.ap / hb;
        if !(pref.is_finite() && scale.is_finite() && quad.is_finite()) {
            return Err(Error::NonFiniteCoefficient { t, what: "eigenfunction envelope" });
        }

        let zero = C64::from(0.0);
        let rot = C64::i();
        let mut amps = Vec::with_capacity(grid.n);
        for i in 0..grid.n {
            let x = grid.x(i);
            let xi = x - p.up;
            let z = scale * xi;
            let mut d = zero;
            if self.c1 != zero {
                d += self.c1 * parabolic_cylinder_d(self.nu, z)?;
            }
            if self.c2 != zero {
                d += self.c2 * parabolic_cylinder_d(-self.nu - 1.0, rot * z)?;
            }
            let phase = C64::new(0.0, quad * xi * xi + lin * x + global).exp();
            amps.push(pref * phase * d);
        }
        WaveFunction::new(*grid, amps)
    }
}

/// Ladder eigenfunction φₙ on `grid` at time `t`.
pub fn eigenfunction_phi_n(
    ctx: &QatContext,
    params: &HStarParams,
    n: u32,
    grid: &Grid,
    t: f64,
) -> Result<WaveFunction> {
    EigenSolution::discrete(ctx, params, n)?.evaluate(grid, t)
}

/// Continuum eigenfunction for spectral parameter λ on the chosen branch.
///
/// Not square integrable; no normalization is attempted.  Residual checks
/// should use the windowed measures below.
pub fn continuous_branch_phi(
    ctx: &QatContext,
    params: &HStarParams,
    lambda: f64,
    branch: Degeneracy,
    grid: &Grid,
    t: f64,
) -> Result<WaveFunction> {
    EigenSolution::continuous(ctx, params, lambda, branch)?.evaluate(grid, t)
}

/// Everything about the classical envelope at one instant.
struct Frame {
    point: BasisPoint,
    /// Continuously tracked log of w = a − iΩ̃u₁ (a = u₂ − γ̃u₁/2).
    lw: C64,
    /// Continuously tracked log of v = a + iΩ̃u₁.
    lv: C64,
    /// Q₁ + Q₂, the quadratic phase rate, as a single fraction.
    q_sum: f64,
}

fn frame(ctx: &QatContext, params: &HStarParams, omega: C64, t: f64) -> Result<Frame> {
    let point = ctx.basis.point_windowed(t)?;
    let gt = params.gamma_tilde;
    let om2 = (omega * omega).re;
    let (lw, lv) = tracked_logs(ctx, gt, omega, t)?;

    let a = point.u2 - 0.5 * gt * point.u1;
    let adot = point.du2 - 0.5 * gt * point.du1;
    let s2 = a * a + om2 * point.u1 * point.u1;
    // Q₁ + Q₂ = Ω̃²u₁/(aS²) + ȧ/(aW) combined over the common denominator;
    // the numerator stays O(1) where a itself crosses zero.
    let q_sum = (om2 * point.u1 * point.w + adot * s2) / (a * s2 * point.w);
    if !q_sum.is_finite() {
        return Err(Error::NonFiniteCoefficient { t, what: "eigenfunction phase rate" });
    }
    Ok(Frame { point, lw, lv, q_sum })
}

/// Logs of w(t) and v(t) followed continuously from w(0) = v(0) = 1.
///
/// Branch powers like B^(ν+½) = exp((ν+½)(ln w − ln v)/2) need arguments that
/// never jump by a full turn; steps are refined until every increment turns
/// the phase by less than π/2.
fn tracked_logs(ctx: &QatContext, gt: f64, omega: C64, t: f64) -> Result<(C64, C64)> {
    let zero = C64::from(0.0);
    if t == 0.0 {
        return Ok((zero, zero));
    }
    let i_om = C64::i() * omega;
    let mut steps = 16usize.max((t.abs() / 0.05).ceil() as usize);
    'refine: loop {
        let (mut lw, mut lv) = (zero, zero);
        let (mut w_prev, mut v_prev) = (C64::from(1.0), C64::from(1.0));
        for k in 1..=steps {
            let tk = t * (k as f64) / (steps as f64);
            let p = ctx.basis.point(tk)?;
            let a = C64::from(p.u2 - 0.5 * gt * p.u1);
            let w = a - i_om * p.u1;
            let v = a + i_om * p.u1;
            let (rw, rv) = (w / w_prev, v / v_prev);
            if !(rw.is_finite() && rv.is_finite())
                || rw.norm() == 0.0
                || rv.norm() == 0.0
                || rw.arg().abs() >= FRAC_PI_2
                || rv.arg().abs() >= FRAC_PI_2
            {
                if steps >= 1 << 22 {
                    return Err(Error::AccuracyLoss {
                        what: "eigenfunction branch tracking",
                        measured: steps as f64,
                    });
                }
                steps *= 2;
                continue 'refine;
            }
            lw += rw.ln();
            lv += rv.ln();
            w_prev = w;
            v_prev = v;
        }
        return Ok((lw, lv));
    }
}

/// Gaussian window for residual measurements: exp(−(x−x_c)²/2σ²) centered on
/// the box, zeroed on the outermost rows a wrap-around stencil would touch.
pub fn taper_weights(grid: &Grid, sigma: f64) -> Vec<f64> {
    let center = 0.5 * (grid.x_min + grid.x_max);
    let mut w: Vec<f64> = (0..grid.n)
        .map(|i| {
            let d = grid.x(i) - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let guard = FD_REACH.min(grid.n / 2);
    for i in 0..guard {
        w[i] = 0.0;
        w[grid.n - 1 - i] = 0.0;
    }
    w
}

/// Half-width of the sixth-order difference stencils.
const FD_REACH: usize = 3;

/// Apply a ∂ₜ-free coefficient table with local sixth-order differences.
///
/// Unlike the spectral application in [`crate::operators`], differentiation
/// here never couples distant points, so states that are not box periodic
/// (continuum eigenfunctions) stay clean away from the edges.  Rows within
/// [`FD_REACH`] of the boundary wrap around and should be masked by
/// [`taper_weights`].
pub fn apply_coeffs_fd(c: &MonomialCoeffs, psi: &WaveFunction) -> Result<WaveFunction> {
    if c.has_time_derivative() {
        return Err(Error::MalformedData(
            "operator carries a time derivative; apply it to a sample series",
        ));
    }
    let grid = psi.grid;
    let n = grid.n;
    let dx = grid.dx();
    let at = |i: usize, off: isize| {
        let j = (i as isize + off).rem_euclid(n as isize) as usize;
        psi.amps[j]
    };
    let mut amps = Vec::with_capacity(n);
    for i in 0..n {
        let d1 = (at(i, 3) - at(i, 2) * 9.0 + at(i, 1) * 45.0 - at(i, -1) * 45.0
            + at(i, -2) * 9.0
            - at(i, -3))
            / (60.0 * dx);
        let d2 = (at(i, 3) * 2.0 - at(i, 2) * 27.0 + at(i, 1) * 270.0 - at(i, 0) * 490.0
            + at(i, -1) * 270.0
            - at(i, -2) * 27.0
            + at(i, -3) * 2.0)
            / (180.0 * dx * dx);
        let x = grid.x(i);
        amps.push(
            (c.one + c.x * x + c.x2 * (x * x)) * at(i, 0) + (c.dx + c.x_dx * x) * d1 + c.dx2 * d2,
        );
    }
    WaveFunction::new(grid, amps)
}

/// Weighted defect ratio ‖T·d‖ / ‖T·ψ‖ over the grid measure.
pub fn tapered_ratio(defect: &WaveFunction, reference: &WaveFunction, weights: &[f64]) -> Result<f64> {
    if defect.grid != reference.grid || weights.len() != defect.grid.n {
        return Err(Error::GridMismatch("tapered ratio inputs disagree"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ((d, r), w) in defect.amps.iter().zip(&reference.amps).zip(weights) {
        num += (w * d.norm()).powi(2);
        den += (w * r.norm()).powi(2);
    }
    Ok((num / den).sqrt())
}
