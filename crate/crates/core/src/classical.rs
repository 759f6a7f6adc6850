//! The classical side: a linear second-order equation and its solution basis.
//!
//! Everything downstream is driven by the scalar equation
//!
//! ```text
//!     ü + ḟ(t) u̇ + ω²(t) u = Λ(t)
//! ```
//!
//! together with the Wronskian weight W(t) = e^{−f(t)}.  A [`ClassicalBasis`]
//! bundles the two homogeneous solutions with initial data
//! u₁(0)=0, u̇₁(0)=1, u₂(0)=1, u̇₂(0)=0, the particular solution u_p
//! (u_p(0)=u̇_p(0)=0) when a drive Λ is present, and the accumulated action
//! phase used by the forced wave-function maps.
//!
//! The basis is integrated once over the requested range with an adaptive
//! Runge–Kutta scheme, stored on a dense uniform grid, and re-evaluated by
//! cubic Hermite interpolation.  Zeros of u₂ are located by bisection: they
//! bound the window on which grid-side transformations that divide by u₂ are
//! valid, and they are also where the exact propagator picks up its
//! quarter-turn phase.

use crate::curve::{Curve, SampledCurve};
use crate::ode::{self, Tolerances};
use crate::{Error, Result};
use std::sync::Arc;

/// Coefficient data for ü + ḟu̇ + ω²u = Λ plus the physical constants.
#[derive(Debug, Clone)]
pub struct LsodeSpec {
    /// Human-readable name used in reports.
    pub label: String,
    /// Damping integral f(t); the curve yields (f, ḟ).  W = e^{−f}.
    pub damping: Curve,
    /// Squared frequency; the curve yields (ω², d(ω²)/dt).
    pub omega_sq: Curve,
    /// Inhomogeneous drive Λ(t); `None` means the homogeneous problem.
    pub forcing: Option<Curve>,
    pub mass: f64,
    pub hbar: f64,
}

impl LsodeSpec {
    pub fn new(label: &str, damping: Curve, omega_sq: Curve, forcing: Option<Curve>) -> Self {
        LsodeSpec {
            label: label.to_string(),
            damping,
            omega_sq,
            forcing,
            mass: 1.0,
            hbar: 1.0,
        }
    }

    pub fn with_units(mut self, mass: f64, hbar: f64) -> Self {
        self.mass = mass;
        self.hbar = hbar;
        self
    }

    /// Free particle: no damping, no restoring force.
    pub fn free() -> Self {
        Self::new("free", Curve::Zero, Curve::Zero, None)
    }

    /// Linear friction only: f = γt.
    pub fn damped_particle(gamma: f64) -> Self {
        Self::new(
            "damped_particle",
            Curve::analytic(move |t| (gamma * t, gamma)),
            Curve::Zero,
            None,
        )
    }

    /// Conservative oscillator of constant frequency ω.
    pub fn harmonic(omega: f64) -> Self {
        Self::new("harmonic", Curve::Zero, Curve::constant(omega * omega), None)
    }

    /// Caldirola–Kanai oscillator: constant γ and ω.
    pub fn damped_harmonic(gamma: f64, omega: f64) -> Self {
        Self::new(
            "damped_harmonic",
            Curve::analytic(move |t| (gamma * t, gamma)),
            Curve::constant(omega * omega),
            None,
        )
    }

    /// Damped oscillator with an external drive Λ(t).
    pub fn forced_damped_harmonic(gamma: f64, omega: f64, forcing: Curve) -> Self {
        Self::new(
            "forced_damped_harmonic",
            Curve::analytic(move |t| (gamma * t, gamma)),
            Curve::constant(omega * omega),
            Some(forcing),
        )
    }

    /// (W, Ẇ) at time t, with W = e^{−f}.
    pub fn w_pair(&self, t: f64) -> (f64, f64) {
        let (f, df) = self.damping.eval(t);
        let w = (-f).exp();
        (w, -df * w)
    }

    pub fn is_forced(&self) -> bool {
        self.forcing.is_some()
    }
}

/// Everything the basis knows at one instant.
#[derive(Debug, Clone, Copy)]
pub struct BasisPoint {
    pub t: f64,
    pub u1: f64,
    pub du1: f64,
    pub u2: f64,
    pub du2: f64,
    pub up: f64,
    pub dup: f64,
    /// Accumulated phase integral ∫₀ᵗ (u_p²ω² − u̇_p²)/W dt′.
    pub ap: f64,
    pub w: f64,
    pub dw: f64,
}

/// Solution basis of the classical equation over a fixed time range.
#[derive(Debug, Clone)]
pub struct ClassicalBasis {
    pub spec: LsodeSpec,
    pub u1: Curve,
    pub u2: Curve,
    pub up: Curve,
    pub action: Curve,
    /// Full integrated range; curves are evaluable on all of it.
    pub range: (f64, f64),
    /// Sub-range bounded by the u₂ zeros nearest to t = 0 (or by `range`).
    pub window: (f64, f64),
    /// Whether each window edge is a u₂ zero (true) or just the range end.
    pub clipped: (bool, bool),
    /// All zeros of u₂ inside `range`, ascending.
    pub u2_zeros: Vec<f64>,
}

impl ClassicalBasis {
    /// Evaluate the whole basis at `t`, which must lie in the integrated range.
    pub fn point(&self, t: f64) -> Result<BasisPoint> {
        let slack = 1e-9 * (1.0 + self.range.1 - self.range.0);
        if t < self.range.0 - slack || t > self.range.1 + slack {
            return Err(Error::OutsideWindow {
                t,
                lo: self.range.0,
                hi: self.range.1,
            });
        }
        let (u1, du1) = self.u1.eval(t);
        let (u2, du2) = self.u2.eval(t);
        let (up, dup) = self.up.eval(t);
        let (ap, _) = self.action.eval(t);
        let (w, dw) = self.spec.w_pair(t);
        Ok(BasisPoint {
            t,
            u1,
            du1,
            u2,
            du2,
            up,
            dup,
            ap,
            w,
            dw,
        })
    }

    /// Like [`point`](Self::point), but additionally requires u₂ ≠ 0 between
    /// here and t = 0, i.e. `t` inside the clipped window.
    pub fn point_windowed(&self, t: f64) -> Result<BasisPoint> {
        if !self.in_window(t) {
            return Err(Error::OutsideWindow {
                t,
                lo: self.window.0,
                hi: self.window.1,
            });
        }
        self.point(t)
    }

    pub fn in_window(&self, t: f64) -> bool {
        let slack = 1e-12 * (1.0 + self.range.1 - self.range.0);
        let lo_ok = if self.clipped.0 {
            t > self.window.0
        } else {
            t >= self.window.0 - slack
        };
        let hi_ok = if self.clipped.1 {
            t < self.window.1
        } else {
            t <= self.window.1 + slack
        };
        lo_ok && hi_ok
    }

    /// Number of u₂ zeros strictly between 0 and `t` (sign-aware).
    pub fn zeros_crossed(&self, t: f64) -> usize {
        self.u2_zeros
            .iter()
            .filter(|&&z| if t >= 0.0 { z > 0.0 && z < t } else { z < 0.0 && z > t })
            .count()
    }
}

/// Integrate the basis (and particular solution, if forced) over `[t_min, t_max]`.
///
/// The range is widened to contain t = 0 where the initial data live.
pub fn solve_basis(spec: &LsodeSpec, t_min: f64, t_max: f64) -> Result<ClassicalBasis> {
    if !(t_min.is_finite() && t_max.is_finite()) || t_min > t_max {
        return Err(Error::InvalidGrid("time range must be finite and ordered"));
    }
    let lo = t_min.min(0.0);
    let hi = t_max.max(0.0);
    let span = (hi - lo).max(1e-6);

    // Node density: generous enough that quartic interpolation error sits far
    // below the integrator tolerance for every system we drive.
    let n_nodes = ((span * 2048.0).ceil() as usize).clamp(4096, 262_144);
    let dt = span / n_nodes as f64;

    // Lay the nodes out so that t = 0 falls exactly on one: both sweeps anchor
    // their initial conditions there, and the stored curves must not shift the
    // anchor by a fraction of a step.
    let n_lo = if lo < 0.0 { ((-lo) / dt - 1e-9).ceil() as usize } else { 0 };
    let n_hi = if hi > 0.0 { (hi / dt - 1e-9).ceil() as usize } else { 0 };
    let i0 = n_lo;
    let total = n_lo + n_hi;
    let t_at = |i: usize| (i as f64 - i0 as f64) * dt;

    let forced = spec.is_forced();
    let dim = if forced { 7 } else { 4 };
    let rhs = make_rhs(spec);
    let tol = Tolerances::default();

    // y = [u1, u̇1, u2, u̇2, (K1, K2, A_p)]
    let mut nodes: Vec<(f64, Vec<f64>)> = Vec::with_capacity(total + 1);

    // Forward sweep 0 → hi, then backward sweep 0 → lo; both anchored at t=0.
    let mut y = vec![0.0; dim];
    y[1] = 1.0;
    y[2] = 1.0;
    nodes.push((t_at(i0), y.clone()));
    for i in i0..total {
        ode::integrate(&rhs, t_at(i), t_at(i + 1), &mut y, tol)?;
        nodes.push((t_at(i + 1), y.clone()));
    }
    let mut back = Vec::new();
    let mut y = vec![0.0; dim];
    y[1] = 1.0;
    y[2] = 1.0;
    for i in (0..i0).rev() {
        ode::integrate(&rhs, t_at(i + 1), t_at(i), &mut y, tol)?;
        back.push((t_at(i), y.clone()));
    }
    back.reverse();
    back.extend(nodes);
    let nodes = back;

    // Package nodal values + derivatives into interpolating curves.
    let n = nodes.len();
    let mut u1 = CurveBuilder::new(n);
    let mut u2 = CurveBuilder::new(n);
    let mut up = CurveBuilder::new(n);
    let mut action = CurveBuilder::new(n);
    let mut dy = vec![0.0; dim];
    for (t, y) in &nodes {
        rhs(*t, y, &mut dy);
        u1.push(y[0], y[1], dy[1]);
        u2.push(y[2], y[3], dy[3]);
        if forced {
            let (om2, dom2) = spec.omega_sq.eval(*t);
            let (_, df) = spec.damping.eval(*t);
            let (w, _) = spec.w_pair(*t);
            let lam = spec.forcing.as_ref().unwrap().value(*t);
            // u_p = K1 u1 + K2 u2; the K̇ cross terms cancel in u̇_p.
            let upv = y[4] * y[0] + y[5] * y[2];
            let dupv = y[4] * y[1] + y[5] * y[3];
            let ddupv = lam - df * dupv - om2 * upv;
            up.push(upv, dupv, ddupv);
            let dap = (upv * upv * om2 - dupv * dupv) / w;
            let ddap = df * dap + (2.0 * upv * dupv * om2 + upv * upv * dom2 - 2.0 * dupv * ddupv) / w;
            action.push(y[6], dap, ddap);
        }
    }
    let t0 = nodes[0].0;
    let u1 = u1.build(t0, dt);
    let u2 = u2.build(t0, dt);
    let (up, action) = if forced {
        (up.build(t0, dt), action.build(t0, dt))
    } else {
        (Curve::Zero, Curve::Zero)
    };

    // Locate every zero of u₂ in the range, then clip the window at the
    // zeros nearest to t = 0 on either side.
    let u2_zeros = find_zeros(&u2, t0, dt, n);
    let (window, clipped) = window_from_zeros(&u2_zeros, (lo, hi));

    Ok(ClassicalBasis {
        spec: spec.clone(),
        u1,
        u2,
        up,
        action,
        range: (lo, hi),
        window,
        clipped,
        u2_zeros,
    })
}

struct CurveBuilder {
    v: Vec<f64>,
    dv: Vec<f64>,
    ddv: Vec<f64>,
}

impl CurveBuilder {
    fn new(n: usize) -> Self {
        CurveBuilder {
            v: Vec::with_capacity(n),
            dv: Vec::with_capacity(n),
            ddv: Vec::with_capacity(n),
        }
    }
    fn push(&mut self, v: f64, dv: f64, ddv: f64) {
        self.v.push(v);
        self.dv.push(dv);
        self.ddv.push(ddv);
    }
    fn build(self, t0: f64, dt: f64) -> Curve {
        Curve::Sampled(Arc::new(SampledCurve {
            t0,
            dt,
            v: self.v,
            dv: self.dv,
            ddv: self.ddv,
        }))
    }
}

fn make_rhs(spec: &LsodeSpec) -> impl Fn(f64, &[f64], &mut [f64]) {
    let damping = spec.damping.clone();
    let omega_sq = spec.omega_sq.clone();
    let forcing = spec.forcing.clone();
    move |t: f64, y: &[f64], dy: &mut [f64]| {
        let (f, df) = damping.eval(t);
        let om2 = omega_sq.value(t);
        dy[0] = y[1];
        dy[1] = -df * y[1] - om2 * y[0];
        dy[2] = y[3];
        dy[3] = -df * y[3] - om2 * y[2];
        if let Some(lam) = &forcing {
            let w = (-f).exp();
            let l = lam.value(t);
            // K̇1 = u2Λ/W, K̇2 = −u1Λ/W
            dy[4] = y[2] * l / w;
            dy[5] = -y[0] * l / w;
            // Ȧ_p with u_p reconstructed from the running K's.
            let upv = y[4] * y[0] + y[5] * y[2];
            let dupv = y[4] * y[1] + y[5] * y[3];
            dy[6] = (upv * upv * om2 - dupv * dupv) / w;
        }
    }
}

/// The window is bounded by the zeros nearest to t = 0 on either side.
pub(crate) fn window_from_zeros(zeros: &[f64], range: (f64, f64)) -> ((f64, f64), (bool, bool)) {
    let mut window = range;
    let mut clipped = (false, false);
    for &z in zeros.iter().rev() {
        if z < 0.0 {
            window.0 = z;
            clipped.0 = true;
            break;
        }
    }
    for &z in zeros {
        if z > 0.0 {
            window.1 = z;
            clipped.1 = true;
            break;
        }
    }
    (window, clipped)
}

/// Scan the sampled curve for sign changes and bisect each bracket.
pub(crate) fn find_zeros(u2: &Curve, t0: f64, dt: f64, n_nodes: usize) -> Vec<f64> {
    let mut zeros = Vec::new();
    let mut prev_t = t0;
    let mut prev_v = u2.value(prev_t);
    for i in 1..n_nodes {
        let t = t0 + i as f64 * dt;
        let v = u2.value(t);
        if prev_v == 0.0 {
            zeros.push(prev_t);
        } else if prev_v * v < 0.0 {
            let (mut a, mut b, mut fa) = (prev_t, t, prev_v);
            while b - a > 1e-10 {
                let m = 0.5 * (a + b);
                let fm = u2.value(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                } else if fa * fm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            zeros.push(0.5 * (a + b));
        }
        prev_t = t;
        prev_v = v;
    }
    if prev_v == 0.0 {
        zeros.push(prev_t);
    }
    zeros
}

/// Closed-form basis of the constant-coefficient damped oscillator.
///
/// Returns analytic (u₁, u₂) curves valid for all t, covering the
/// oscillatory, critical and overdamped parameter regimes.
pub fn analytic_basis_damped_ho(gamma: f64, omega: f64) -> (Curve, Curve) {
    let disc = omega * omega - 0.25 * gamma * gamma;
    if disc > f64::EPSILON {
        let om = disc.sqrt();
        let om_sq = omega * omega;
        let u1 = Curve::analytic(move |t| {
            let e = (-0.5 * gamma * t).exp();
            let (s, c) = (om * t).sin_cos();
            (e * s / om, e * (c - 0.5 * gamma * s / om))
        });
        let u2 = Curve::analytic(move |t| {
            let e = (-0.5 * gamma * t).exp();
            let (s, c) = (om * t).sin_cos();
            (e * (c + 0.5 * gamma * s / om), -e * om_sq * s / om)
        });
        (u1, u2)
    } else if disc < -f64::EPSILON {
        let s0 = (-disc).sqrt();
        let om_sq = omega * omega;
        let u1 = Curve::analytic(move |t| {
            let e = (-0.5 * gamma * t).exp();
            let (sh, ch) = ((s0 * t).sinh(), (s0 * t).cosh());
            (e * sh / s0, e * (ch - 0.5 * gamma * sh / s0))
        });
        let u2 = Curve::analytic(move |t| {
            let e = (-0.5 * gamma * t).exp();
            let (sh, ch) = ((s0 * t).sinh(), (s0 * t).cosh());
            (e * (ch + 0.5 * gamma * sh / s0), -e * om_sq * sh / s0)
        });
        (u1, u2)
    } else {
        let u1 = Curve::analytic(move |t| {
            let e = (-0.5 * gamma * t).exp();
            (t * e, e * (1.0 - 0.5 * gamma * t))
        });
        let u2 = Curve::analytic(move |t| {
            let e = (-0.5 * gamma * t).exp();
            (e * (1.0 + 0.5 * gamma * t), -0.25 * gamma * gamma * t * e)
        });
        (u1, u2)
    }
}
