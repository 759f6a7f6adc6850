//! Invariant observables of the quadratic problem and their algebra.
//!
//! The transformation carries the free particle's x̂ and p̂ back to the lab
//! frame, where they become explicitly time-dependent but *conserved*
//! operators: their expectation values in any solution do not move.  This
//! module builds those operators, their symmetrized quadratics, the variants
//! that trade ∂ₓ² for ∂ₜ through the equation of motion, and the Hamiltonian
//! itself — all as coefficient tables over the monomial basis
//! {1, x, x², ∂ₓ, x∂ₓ, ∂ₓ², ∂ₜ}.
//!
//! Operators can be applied spectrally to wave functions, realized as dense
//! matrices, and checked against the sl(2,ℝ)-like commutator table.  Raw
//! matrix differences are dominated by Nyquist-edge artifacts of the discrete
//! derivative, so algebra measurements compress everything onto a family of
//! Hermite-function probes that live far from both the box edge and the
//! spectral edge.

use crate::classical::{find_zeros, window_from_zeros, ClassicalBasis, LsodeSpec};
use crate::curve::Curve;
use crate::fftutil;
use crate::qat::{central_time_derivative, QatContext};
use crate::wavegrid::{Grid, WaveFunction};
use crate::{C64, Error, Result};
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Coefficients over {1, x, x², ∂ₓ, x∂ₓ, ∂ₓ², ∂ₜ}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonomialCoeffs {
    pub one: C64,
    pub x: C64,
    pub x2: C64,
    pub dx: C64,
    pub x_dx: C64,
    pub dx2: C64,
    pub dt: C64,
}

impl MonomialCoeffs {
    pub fn zero() -> Self {
        let z = C64::new(0.0, 0.0);
        MonomialCoeffs {
            one: z,
            x: z,
            x2: z,
            dx: z,
            x_dx: z,
            dx2: z,
            dt: z,
        }
    }

    pub fn scale(&self, z: C64) -> Self {
        MonomialCoeffs {
            one: self.one * z,
            x: self.x * z,
            x2: self.x2 * z,
            dx: self.dx * z,
            x_dx: self.x_dx * z,
            dx2: self.dx2 * z,
            dt: self.dt * z,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        MonomialCoeffs {
            one: self.one + other.one,
            x: self.x + other.x,
            x2: self.x2 + other.x2,
            dx: self.dx + other.dx,
            x_dx: self.x_dx + other.x_dx,
            dx2: self.dx2 + other.dx2,
            dt: self.dt + other.dt,
        }
    }

    /// Largest coefficient-wise modulus difference.
    pub fn max_diff(&self, other: &Self) -> f64 {
        [
            self.one - other.one,
            self.x - other.x,
            self.x2 - other.x2,
            self.dx - other.dx,
            self.x_dx - other.x_dx,
            self.dx2 - other.dx2,
            self.dt - other.dt,
        ]
        .iter()
        .map(|d| d.norm())
        .fold(0.0, f64::max)
    }

    pub fn has_time_derivative(&self) -> bool {
        self.dt.norm() > 0.0
    }
}

type CoeffFn = Arc<dyn Fn(f64) -> Result<MonomialCoeffs> + Send + Sync>;

/// A (possibly time-dependent) differential operator in monomial form.
#[derive(Clone)]
pub struct OperatorRep {
    pub label: String,
    coeffs: CoeffFn,
}

impl std::fmt::Debug for OperatorRep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "OperatorRep({})", self.label)
    }
}

impl OperatorRep {
    pub fn new<F>(label: &str, coeffs: F) -> Self
    where
        F: Fn(f64) -> Result<MonomialCoeffs> + Send + Sync + 'static,
    {
        OperatorRep {
            label: label.to_string(),
            coeffs: Arc::new(coeffs),
        }
    }

    pub fn coeffs(&self, t: f64) -> Result<MonomialCoeffs> {
        (self.coeffs)(t)
    }

    /// Apply the operator to a single snapshot.  Operators carrying a ∂ₜ
    /// term cannot act on one instant; use [`apply_on_series`](Self::apply_on_series).
    pub fn apply(&self, psi: &WaveFunction, t: f64) -> Result<WaveFunction> {
        let c = self.coeffs(t)?;
        if c.has_time_derivative() {
            return Err(Error::MalformedData(
                "operator carries a time derivative; apply it to a sample series",
            ));
        }
        self.apply_parts(&c, psi, None)
    }

    /// Apply the operator at the central sample of an equally spaced series,
    /// realizing any ∂ₜ term with a finite-difference stencil.  Returns the
    /// center time and the resulting snapshot.
    pub fn apply_on_series(&self, samples: &[(f64, WaveFunction)]) -> Result<(f64, WaveFunction)> {
        let (center, dpsi) = central_time_derivative(samples)?;
        let (t, psi) = &samples[center];
        let c = self.coeffs(*t)?;
        let out = self.apply_parts(&c, psi, Some(&dpsi))?;
        Ok((*t, out))
    }

    fn apply_parts(
        &self,
        c: &MonomialCoeffs,
        psi: &WaveFunction,
        dpsi: Option<&[C64]>,
    ) -> Result<WaveFunction> {
        let grid = psi.grid;
        let l = grid.length();
        let need_d1 = c.dx.norm() > 0.0 || c.x_dx.norm() > 0.0;
        let d1 = if need_d1 {
            fftutil::derivative(&psi.amps, l, 1)
        } else {
            Vec::new()
        };
        let d2 = if c.dx2.norm() > 0.0 {
            fftutil::derivative(&psi.amps, l, 2)
        } else {
            Vec::new()
        };
        let mut out = vec![C64::new(0.0, 0.0); grid.n];
        for (i, o) in out.iter_mut().enumerate() {
            let x = grid.x(i);
            let mut acc = (c.one + c.x * x + c.x2 * (x * x)) * psi.amps[i];
            if need_d1 {
                acc += (c.dx + c.x_dx * x) * d1[i];
            }
            if !d2.is_empty() {
                acc += c.dx2 * d2[i];
            }
            if let Some(d) = dpsi {
                acc += c.dt * d[i];
            }
            *o = acc;
        }
        WaveFunction::new(grid, out)
    }

    /// Expectation value ⟨ψ|Ô|ψ⟩ / ⟨ψ|ψ⟩ at time `t`.
    pub fn expectation(&self, psi: &WaveFunction, t: f64) -> Result<C64> {
        let opsi = self.apply(psi, t)?;
        Ok(psi.inner(&opsi)? / psi.norm_sq())
    }

    /// Dense matrix of the operator on a grid (∂ₜ-free operators only).
    pub fn to_matrix(&self, grid: &Grid, t: f64) -> Result<DMatrix<C64>> {
        let c = self.coeffs(t)?;
        if c.has_time_derivative() {
            return Err(Error::MalformedData(
                "operator carries a time derivative; it has no single-time matrix",
            ));
        }
        let n = grid.n;
        let derivs = diff_matrices(grid);
        let (d1, d2) = (&derivs.0, &derivs.1);
        let mut m = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            let x = grid.x(i);
            for j in 0..n {
                let mut v = c.dx * d1[(i, j)] + c.x_dx * x * d1[(i, j)] + c.dx2 * d2[(i, j)];
                if i == j {
                    v += c.one + c.x * x + c.x2 * x * x;
                }
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }
}

/// Spectral first/second derivative matrices for a grid, cached per grid.
pub fn diff_matrices(grid: &Grid) -> Arc<(DMatrix<C64>, DMatrix<C64>)> {
    type Key = (usize, u64, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<(DMatrix<C64>, DMatrix<C64>)>>>> =
        OnceLock::new();
    let key = (grid.n, grid.x_min.to_bits(), grid.x_max.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(key)
        .or_insert_with(|| {
            let n = grid.n;
            let l = grid.length();
            let mut d1 = DMatrix::<C64>::zeros(n, n);
            let mut d2 = DMatrix::<C64>::zeros(n, n);
            let mut e = vec![C64::new(0.0, 0.0); n];
            for j in 0..n {
                e[j] = C64::new(1.0, 0.0);
                for (i, v) in fftutil::derivative(&e, l, 1).into_iter().enumerate() {
                    d1[(i, j)] = v;
                }
                for (i, v) in fftutil::derivative(&e, l, 2).into_iter().enumerate() {
                    d2[(i, j)] = v;
                }
                e[j] = C64::new(0.0, 0.0);
            }
            Arc::new((d1, d2))
        })
        .clone()
}

fn ensure_unforced(basis: &ClassicalBasis, _what: &str) -> Result<()> {
    if basis.spec.is_forced() {
        Err(Error::ForcedNotSupported)
    } else {
        Ok(())
    }
}

/// The conserved position observable X̂ = (u̇₁/W)(x − u_p) + (u₁/W)u̇_p + (iħ/m)u₁∂ₓ.
pub fn invariant_position(ctx: &QatContext) -> OperatorRep {
    let basis = ctx.basis.clone();
    let (m, hb) = (basis.spec.mass, basis.spec.hbar);
    OperatorRep::new("X", move |t| {
        let p = basis.point(t)?;
        let mut c = MonomialCoeffs::zero();
        c.x = C64::new(p.du1 / p.w, 0.0);
        c.one = C64::new((p.u1 * p.dup - p.du1 * p.up) / p.w, 0.0);
        c.dx = C64::new(0.0, hb * p.u1 / m);
        Ok(c)
    })
}

/// The conserved momentum observable P̂ = −iħu₂∂ₓ − m(u̇₂/W)(x − u_p) − m(u₂/W)u̇_p.
pub fn invariant_momentum(ctx: &QatContext) -> OperatorRep {
    let basis = ctx.basis.clone();
    let (m, hb) = (basis.spec.mass, basis.spec.hbar);
    OperatorRep::new("P", move |t| {
        let p = basis.point(t)?;
        let mut c = MonomialCoeffs::zero();
        c.dx = C64::new(0.0, -hb * p.u2);
        c.x = C64::new(-m * p.du2 / p.w, 0.0);
        c.one = C64::new(m * (p.du2 * p.up - p.u2 * p.dup) / p.w, 0.0);
        Ok(c)
    })
}

/// P̂² (undriven problems only).
pub fn invariant_momentum_sq(ctx: &QatContext) -> Result<OperatorRep> {
    ensure_unforced(&ctx.basis, "P^2")?;
    let basis = ctx.basis.clone();
    let (m, hb) = (basis.spec.mass, basis.spec.hbar);
    Ok(OperatorRep::new("P2", move |t| {
        let p = basis.point(t)?;
        let mut c = MonomialCoeffs::zero();
        c.dx2 = C64::new(-hb * hb * p.u2 * p.u2, 0.0);
        c.x_dx = C64::new(0.0, 2.0 * hb * m * p.u2 * p.du2 / p.w);
        c.x2 = C64::new((m * p.du2 / p.w).powi(2), 0.0);
        c.one = C64::new(0.0, hb * m * p.u2 * p.du2 / p.w);
        Ok(c)
    }))
}

/// X̂² (undriven problems only).
pub fn invariant_position_sq(ctx: &QatContext) -> Result<OperatorRep> {
    ensure_unforced(&ctx.basis, "X^2")?;
    let basis = ctx.basis.clone();
    let (m, hb) = (basis.spec.mass, basis.spec.hbar);
    Ok(OperatorRep::new("X2", move |t| {
        let p = basis.point(t)?;
        let mut c = MonomialCoeffs::zero();
        c.x2 = C64::new((p.du1 / p.w).powi(2), 0.0);
        c.x_dx = C64::new(0.0, 2.0 * hb * p.u1 * p.du1 / (m * p.w));
        c.dx2 = C64::new(-(hb * p.u1 / m).powi(2), 0.0);
        c.one = C64::new(0.0, hb * p.u1 * p.du1 / (m * p.w));
        Ok(c)
    }))
}

/// Symmetrized (X̂P̂ + P̂X̂)/2 (undriven problems only).
pub fn invariant_position_momentum(ctx: &QatContext) -> Result<OperatorRep> {
    ensure_unforced(&ctx.basis, "XP")?;
    let basis = ctx.basis.clone();
    let (m, hb) = (basis.spec.mass, basis.spec.hbar);
    Ok(OperatorRep::new("XP", move |t| {
        let p = basis.point(t)?;
        let cross = p.du1 * p.u2 + p.u1 * p.du2;
        let mut c = MonomialCoeffs::zero();
        c.dx2 = C64::new(hb * hb * p.u1 * p.u2 / m, 0.0);
        c.x_dx = C64::new(0.0, -hb * cross / p.w);
        c.x2 = C64::new(-m * p.du1 * p.du2 / (p.w * p.w), 0.0);
        c.one = C64::new(0.0, -hb * cross / (2.0 * p.w));
        Ok(c)
    }))
}

/// P̂² with ∂ₓ² eliminated through the equation of motion (adds an ∂ₜ term).
pub fn invariant_momentum_sq_on_shell(ctx: &QatContext) -> Result<OperatorRep> {
    ensure_unforced(&ctx.basis, "P^2")?;
    let basis = ctx.basis.clone();
    let (m, hb) = (basis.spec.mass, basis.spec.hbar);
    let om2 = basis.spec.omega_sq.clone();
    Ok(OperatorRep::new("P2'", move |t| {
        let p = basis.point(t)?;
        let w2 = om2.value(t);
        let mut c = MonomialCoeffs::zero();
        c.x_dx = C64::new(0.0, 2.0 * hb * m * p.u2 * p.du2 / p.w);
        c.x2 = C64::new(m * m * (p.du2 * p.du2 - w2 * p.u2 * p.u2) / (p.w * p.w), 0.0);
        c.one = C64::new(0.0, hb * m * p.u2 * p.du2 / p.w);
        c.dt = C64::new(0.0, 2.0 * hb * m * p.u2 * p.u2 / p.w);
        Ok(c)
    }))
}

/// X̂² with ∂ₓ² eliminated through the equation of motion (adds an ∂ₜ term).
pub fn invariant_position_sq_on_shell(ctx: &QatContext) -> Result<OperatorRep> {
    ensure_unforced(&ctx.basis, "X^2")?;
    let basis = ctx.basis.clone();
    let (m, hb) = (basis.spec.mass, basis.spec.hbar);
    let om2 = basis.spec.omega_sq.clone();
    Ok(OperatorRep::new("X2'", move |t| {
        let p = basis.point(t)?;
        let w2 = om2.value(t);
        let mut c = MonomialCoeffs::zero();
        c.x_dx = C64::new(0.0, 2.0 * hb * p.u1 * p.du1 / (m * p.w));
        c.x2 = C64::new((p.du1 * p.du1 - w2 * p.u1 * p.u1) / (p.w * p.w), 0.0);
        c.one = C64::new(0.0, hb * p.u1 * p.du1 / (m * p.w));
        c.dt = C64::new(0.0, 2.0 * hb * p.u1 * p.u1 / (m * p.w));
        Ok(c)
    }))
}

/// Symmetrized X̂P with ∂ₓ² eliminated (adds an ∂ₜ term).
pub fn invariant_position_momentum_on_shell(ctx: &QatContext) -> Result<OperatorRep> {
    ensure_unforced(&ctx.basis, "XP")?;
    let basis = ctx.basis.clone();
    let (m, hb) = (basis.spec.mass, basis.spec.hbar);
    let om2 = basis.spec.omega_sq.clone();
    Ok(OperatorRep::new("XP'", move |t| {
        let p = basis.point(t)?;
        let w2 = om2.value(t);
        let cross = p.du1 * p.u2 + p.u1 * p.du2;
        let mut c = MonomialCoeffs::zero();
        c.x_dx = C64::new(0.0, -hb * cross / p.w);
        c.x2 = C64::new(-m * (p.du1 * p.du2 - w2 * p.u1 * p.u2) / (p.w * p.w), 0.0);
        c.one = C64::new(0.0, -hb * cross / (2.0 * p.w));
        c.dt = C64::new(0.0, -2.0 * hb * p.u1 * p.u2 / p.w);
        Ok(c)
    }))
}

/// The lab-frame Hamiltonian: Ĥ = −(ħ²/2m)W∂ₓ² + (½mω²x² − mΛx)/W.
pub fn hamiltonian(spec: &LsodeSpec) -> OperatorRep {
    let spec = spec.clone();
    OperatorRep::new("H", move |t| {
        let (w, _) = spec.w_pair(t);
        if !w.is_finite() || w == 0.0 {
            return Err(Error::NonFiniteCoefficient {
                t,
                what: "Hamiltonian weight",
            });
        }
        let om2 = spec.omega_sq.value(t);
        let mut c = MonomialCoeffs::zero();
        c.dx2 = C64::new(-spec.hbar * spec.hbar * w / (2.0 * spec.mass), 0.0);
        c.x2 = C64::new(0.5 * spec.mass * om2 / w, 0.0);
        if let Some(f) = &spec.forcing {
            c.x = C64::new(-spec.mass * f.value(t) / w, 0.0);
        }
        Ok(c)
    })
}

/// Default probe-family size and width for a grid: the probes should span a
/// healthy fraction of the box and of the spectral band while staying clear
/// of both edges.
pub fn probe_recipe(grid: &Grid) -> (usize, f64) {
    let l = grid.length();
    let k_nyq = std::f64::consts::PI * grid.n as f64 / l;
    let x_ext = 0.3 * l * 0.8;
    let k_ext = 0.5 * k_nyq * 0.8;
    let modes = (((x_ext * k_ext) - 1.0) / 2.0).floor().max(4.0) as usize;
    let sigma = (x_ext / k_ext).sqrt();
    (modes, sigma)
}

/// Orthonormal Hermite-function probes as matrix columns (ℓ²-normalized).
pub fn hermite_probe_basis(grid: &Grid, modes: usize, sigma: f64) -> DMatrix<C64> {
    let n = grid.n;
    let mut b = DMatrix::<C64>::zeros(n, modes);
    let colscale = (grid.dx() / sigma).sqrt();
    let mut prev = vec![0.0f64; n];
    let mut cur: Vec<f64> = (0..n)
        .map(|i| {
            let y = grid.x(i) / sigma;
            std::f64::consts::PI.powf(-0.25) * (-y * y / 2.0).exp()
        })
        .collect();
    for j in 0..modes {
        for i in 0..n {
            b[(i, j)] = C64::new(cur[i] * colscale, 0.0);
        }
        let a1 = (2.0 / (j as f64 + 1.0)).sqrt();
        let a2 = (j as f64 / (j as f64 + 1.0)).sqrt();
        let next: Vec<f64> = (0..n)
            .map(|i| a1 * (grid.x(i) / sigma) * cur[i] - a2 * prev[i])
            .collect();
        prev = std::mem::replace(&mut cur, next);
    }
    b
}

/// ‖B† M B‖_F — the operator norm proxy seen through the probe family.
pub fn compressed_norm(probes: &DMatrix<C64>, m: &DMatrix<C64>) -> f64 {
    (probes.adjoint() * m * probes).norm()
}

/// One verified commutator relation.
#[derive(Debug, Clone)]
pub struct CommutatorCheck {
    pub label: String,
    pub abs_error: f64,
    pub rel_error: f64,
}

/// Verify the full commutator table of {X̂, P̂, X̂², P̂², X̂P} at time `t`.
///
/// Errors are measured after compression onto the Hermite probe family;
/// relative errors are taken against the compressed right-hand side (or
/// against the product magnitude when the right-hand side vanishes).
pub fn commutator_table(ctx: &QatContext, grid: &Grid, t: f64) -> Result<Vec<CommutatorCheck>> {
    let hb = ctx.spec().hbar;
    let x = invariant_position(ctx).to_matrix(grid, t)?;
    let p = invariant_momentum(ctx).to_matrix(grid, t)?;
    let x2 = invariant_position_sq(ctx)?.to_matrix(grid, t)?;
    let p2 = invariant_momentum_sq(ctx)?.to_matrix(grid, t)?;
    let xp = invariant_position_momentum(ctx)?.to_matrix(grid, t)?;
    let eye = DMatrix::<C64>::identity(grid.n, grid.n);
    let i_hb = C64::new(0.0, hb);

    let (modes, sigma) = probe_recipe(grid);
    let probes = hermite_probe_basis(grid, modes, sigma);

    // (label, lhs, rhs, expected), expected = None for vanishing commutators.
    let table: Vec<(&str, &DMatrix<C64>, &DMatrix<C64>, Option<DMatrix<C64>>)> = vec![
        ("[X,P] = ihb", &x, &p, Some(eye * i_hb)),
        ("[X,P2] = 2ihb P", &x, &p2, Some(p.clone() * (i_hb * 2.0))),
        ("[X,X2] = 0", &x, &x2, None),
        ("[X,XP] = ihb X", &x, &xp, Some(x.clone() * i_hb)),
        ("[P,P2] = 0", &p, &p2, None),
        ("[P,X2] = -2ihb X", &p, &x2, Some(x.clone() * (-i_hb * 2.0))),
        ("[P,XP] = -ihb P", &p, &xp, Some(p.clone() * (-i_hb))),
        ("[X2,P2] = 4ihb XP", &x2, &p2, Some(xp.clone() * (i_hb * 4.0))),
        ("[X2,XP] = 2ihb X2", &x2, &xp, Some(x2.clone() * (i_hb * 2.0))),
        ("[P2,XP] = -2ihb P2", &p2, &xp, Some(p2.clone() * (-i_hb * 2.0))),
    ];

    let mut out = Vec::with_capacity(table.len());
    for (label, l, r, expected) in table {
        let prod = l * r;
        let comm = &prod - r * l;
        let (defect, denom) = match &expected {
            Some(e) => (comm - e, compressed_norm(&probes, e)),
            None => (comm, compressed_norm(&probes, &prod)),
        };
        let abs_error = compressed_norm(&probes, &defect);
        out.push(CommutatorCheck {
            label: label.to_string(),
            abs_error,
            rel_error: abs_error / denom.max(f64::MIN_POSITIVE),
        });
    }
    Ok(out)
}

/// Re-express the solution basis through a unimodular change
/// u₁′ = a·u₁ + b·u₂, u₂′ = c·u₁ + d·u₂ and rebuild the window data.
///
/// On the operator side this is exactly X̂′ = aX̂ − (b/m)P̂,
/// P̂′ = −cmX̂ + dP̂ — checked in the tests rather than assumed.
pub fn sl2_shift(ctx: &QatContext, mat: [[f64; 2]; 2]) -> Result<QatContext> {
    let [[a, b], [c, d]] = mat;
    let det = a * d - b * c;
    if !det.is_finite() || (det - 1.0).abs() > 1e-12 {
        return Err(Error::NotUnimodular { det });
    }
    let base = &ctx.basis;
    let u1 = Curve::combine(a, &base.u1, b, &base.u2);
    let u2 = Curve::combine(c, &base.u1, d, &base.u2);
    let (lo, hi) = base.range;
    let n_scan = (((hi - lo) * 2048.0).ceil() as usize).clamp(4096, 262_144);
    let dt = (hi - lo) / n_scan as f64;
    let u2_zeros = find_zeros(&u2, lo, dt, n_scan + 1);
    let (window, clipped) = window_from_zeros(&u2_zeros, (lo, hi));
    Ok(QatContext::new(ClassicalBasis {
        spec: base.spec.clone(),
        u1,
        u2,
        up: base.up.clone(),
        action: base.action.clone(),
        range: base.range,
        window,
        clipped,
        u2_zeros,
    }))
}

/// The boundary (t = 0) unitary induced by a unimodular basis change with
/// d > 0: (Âψ)(x) = √d · e^{−i m c d x² / 2ħ} · ψ(d·x).
pub fn boundary_map(
    psi: &WaveFunction,
    mat: [[f64; 2]; 2],
    mass: f64,
    hbar: f64,
) -> Result<WaveFunction> {
    let [[a, b], [c, d]] = mat;
    let det = a * d - b * c;
    if !det.is_finite() || (det - 1.0).abs() > 1e-12 {
        return Err(Error::NotUnimodular { det });
    }
    if d <= 0.0 {
        return Err(Error::MalformedData("boundary map requires d > 0"));
    }
    Ok(psi.dilate(1.0 / d).quadratic_phase(-mass * c * d / (2.0 * hbar), 0.0))
}
