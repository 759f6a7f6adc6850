//! Periodic spatial grids and wave functions living on them.
//!
//! A [`Grid`] is a uniform periodic discretization of `[x_min, x_max)` with a
//! power-of-two point count, so every spatial operation can go through the
//! FFT.  A [`WaveFunction`] owns complex amplitudes on such a grid plus a
//! sticky `support_overflow` flag that is raised whenever an operation pushes
//! visible probability mass into the outermost cells — the border where the
//! periodic wrap-around starts lying about free-space behaviour.

use crate::fftutil;
use crate::{C64, Error, Result};
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"QWV1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl Grid {
    pub fn uniform(n: usize, x_min: f64, x_max: f64) -> Result<Grid> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid("point count must be a power of two, at least 8"));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid("grid bounds must be finite with x_max > x_min"));
        }
        Ok(Grid { n, x_min, x_max })
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn ks(&self) -> Vec<f64> {
        fftutil::k_grid(self.n, self.length())
    }
}

#[derive(Debug, Clone)]
pub struct WaveFunction {
    pub grid: Grid,
    pub amps: Vec<C64>,
    /// Set once noticeable mass reaches the outer grid cells; never cleared.
    pub support_overflow: bool,
}

impl WaveFunction {
    pub fn new(grid: Grid, amps: Vec<C64>) -> Result<WaveFunction> {
        if amps.len() != grid.n {
            return Err(Error::GridMismatch("amplitude count differs from grid size"));
        }
        Ok(WaveFunction {
            grid,
            amps,
            support_overflow: false,
        })
    }

    pub fn from_fn<F: Fn(f64) -> C64>(grid: Grid, f: F) -> WaveFunction {
        let amps = (0..grid.n).map(|i| f(grid.x(i))).collect();
        WaveFunction {
            grid,
            amps,
            support_overflow: false,
        }
    }

    /// Normalized Gaussian packet: density standard deviation `sigma`,
    /// centered at `x0`, mean momentum `p0`.
    pub fn gaussian(grid: Grid, x0: f64, sigma: f64, p0: f64, hbar: f64) -> WaveFunction {
        let norm = 1.0 / ((std::f64::consts::TAU * sigma * sigma).sqrt()).sqrt();
        WaveFunction::from_fn(grid, |x| {
            let u = x - x0;
            C64::new(0.0, p0 * x / hbar).exp() * (norm * (-u * u / (4.0 * sigma * sigma)).exp())
        })
    }

    /// Unit-amplitude plane wave e^{ikx}, with `k` snapped to the nearest
    /// mode commensurate with the box (an integer multiple of 2π/L).
    pub fn plane_wave(grid: Grid, k: f64) -> WaveFunction {
        let dk = std::f64::consts::TAU / grid.length();
        let k = (k / dk).round() * dk;
        WaveFunction::from_fn(grid, |x| C64::new(0.0, k * x).exp())
    }

    pub fn inner(&self, other: &WaveFunction) -> Result<C64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("inner product across different grids"));
        }
        let dx = self.grid.dx();
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            * dx)
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let s = 1.0 / n;
            for a in &mut self.amps {
                *a *= s;
            }
        }
    }

    /// Largest pointwise modulus difference against `other`.
    pub fn max_abs_diff(&self, other: &WaveFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("comparison across different grids"));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Multiply by e^{i c (x − center)²}.
    pub fn quadratic_phase(&self, c: f64, center: f64) -> WaveFunction {
        let mut out = self.clone();
        for (i, a) in out.amps.iter_mut().enumerate() {
            let u = self.grid.x(i) - center;
            *a *= C64::new(0.0, c * u * u).exp();
        }
        out
    }

    /// Multiply by e^{i c x}.
    pub fn linear_phase(&self, c: f64) -> WaveFunction {
        let mut out = self.clone();
        for (i, a) in out.amps.iter_mut().enumerate() {
            *a *= C64::new(0.0, c * self.grid.x(i)).exp();
        }
        out
    }

    pub fn scaled(&self, z: C64) -> WaveFunction {
        let mut out = self.clone();
        for a in &mut out.amps {
            *a *= z;
        }
        out
    }

    /// ψ(x) → ψ(x − a), implemented as a Fourier multiplier (periodic shift).
    pub fn translate(&self, a: f64) -> WaveFunction {
        let mut buf = self.amps.clone();
        fftutil::fft(&mut buf);
        for (v, &k) in buf.iter_mut().zip(self.grid.ks().iter()) {
            *v *= C64::new(0.0, -k * a).exp();
        }
        fftutil::ifft(&mut buf);
        let mut out = WaveFunction {
            grid: self.grid,
            amps: buf,
            support_overflow: self.support_overflow,
        };
        out.update_overflow();
        out
    }

    /// Free-particle step: multiply each mode by e^{−iħk²τ/2m}.
    ///
    /// `tau` is whatever effective time parameter the caller's frame calls
    /// for; the map is unitary for any real value.
    pub fn free_evolve(&self, tau: f64, hbar: f64, mass: f64) -> WaveFunction {
        let mut buf = self.amps.clone();
        fftutil::fft(&mut buf);
        for (v, &k) in buf.iter_mut().zip(self.grid.ks().iter()) {
            *v *= C64::new(0.0, -hbar * k * k * tau / (2.0 * mass)).exp();
        }
        fftutil::ifft(&mut buf);
        let mut out = WaveFunction {
            grid: self.grid,
            amps: buf,
            support_overflow: self.support_overflow,
        };
        out.update_overflow();
        out
    }

    /// Evaluate the band-limited (trigonometric) interpolant at arbitrary
    /// points.  The unpaired Nyquist coefficient is symmetrized so the
    /// interpolant is real for real data.
    ///
    /// Points outside the box read as zero: the grid models a localized state
    /// on the line, and the periodic images beyond the edges are artifacts.
    pub fn eval_interpolant(&self, targets: &[f64]) -> Vec<C64> {
        let n = self.grid.n;
        let l = self.grid.length();
        let mut coeff = self.amps.clone();
        fftutil::fft(&mut coeff);
        let scale = 1.0 / n as f64;
        let dk = std::f64::consts::TAU / l;
        let half = n / 2;
        let nyq = coeff[half] * scale;
        let k_nyq = half as f64 * dk;
        let slack = 1e-9 * l;
        targets
            .iter()
            .map(|&x| {
                let xi = x - self.grid.x_min;
                if !(-slack..=l + slack).contains(&xi) {
                    return C64::new(0.0, 0.0);
                }
                // Walk modes j = −n/2+1 … n/2−1 with a phase recurrence.
                let step = C64::new(0.0, dk * xi).exp();
                let mut phase = C64::new(0.0, -((half - 1) as f64) * dk * xi).exp();
                let mut acc = C64::new(0.0, 0.0);
                for c in &coeff[half + 1..] {
                    acc += c * scale * phase;
                    phase *= step;
                }
                for c in coeff.iter().take(half) {
                    acc += c * scale * phase;
                    phase *= step;
                }
                acc + nyq * (k_nyq * xi).cos()
            })
            .collect()
    }

    /// Unitary dilation (D_s ψ)(x) = |s|^{−1/2} ψ(x/s), s ≠ 0.
    ///
    /// Negative `s` composes the scaling with a parity flip.  Off-grid values
    /// come from the trigonometric interpolant, so the operation is exact on
    /// band-limited data up to the periodic wrap (watched by the overflow flag).
    pub fn dilate(&self, s: f64) -> WaveFunction {
        assert!(s != 0.0 && s.is_finite(), "dilation scale must be finite and nonzero");
        let targets: Vec<f64> = (0..self.grid.n).map(|i| self.grid.x(i) / s).collect();
        let mut amps = self.eval_interpolant(&targets);
        let pref = 1.0 / s.abs().sqrt();
        for a in &mut amps {
            *a *= pref;
        }
        let mut out = WaveFunction {
            grid: self.grid,
            amps,
            support_overflow: self.support_overflow,
        };
        out.update_overflow();
        out
    }

    pub(crate) fn update_overflow(&mut self) {
        let n = self.grid.n;
        let edge = (n / 64).max(2);
        let total = self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>();
        if total == 0.0 {
            return;
        }
        let outer: f64 = self.amps[..edge]
            .iter()
            .chain(&self.amps[n - edge..])
            .map(|a| a.norm_sqr())
            .sum();
        if outer / total > 1e-6 {
            self.support_overflow = true;
        }
    }

    /// CSV rows `x,re,im` in fixed scientific notation, LF line endings.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"x,re,im\n")?;
        for (i, a) in self.amps.iter().enumerate() {
            let line = format!(
                "{},{},{}\n",
                fmt_e(self.grid.x(i)),
                fmt_e(a.re),
                fmt_e(a.im)
            );
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// Compact binary form: magic, grid header, interleaved re/im doubles.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.grid.n as u32).to_le_bytes())?;
        w.write_all(&self.grid.x_min.to_le_bytes())?;
        w.write_all(&self.grid.x_max.to_le_bytes())?;
        for a in &self.amps {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<WaveFunction> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::MalformedData("truncated header"))?;
        if &magic != MAGIC {
            return Err(Error::MalformedData("bad magic bytes"));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)
            .map_err(|_| Error::MalformedData("truncated header"))?;
        let n = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)
            .map_err(|_| Error::MalformedData("truncated header"))?;
        let x_min = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)
            .map_err(|_| Error::MalformedData("truncated header"))?;
        let x_max = f64::from_le_bytes(b8);
        let grid = Grid::uniform(n, x_min, x_max)
            .map_err(|_| Error::MalformedData("header describes an invalid grid"))?;
        let mut amps = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)
                .map_err(|_| Error::MalformedData("truncated amplitude data"))?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)
                .map_err(|_| Error::MalformedData("truncated amplitude data"))?;
            let im = f64::from_le_bytes(b8);
            amps.push(C64::new(re, im));
        }
        WaveFunction::new(grid, amps)
    }
}

/// C-style `%.12e` formatting: two-digit signed exponent, deterministic.
pub fn fmt_e(x: f64) -> String {
    let s = format!("{x:.12e}");
    match s.split_once('e') {
        Some((mant, exp)) => {
            let (sign, digits) = match exp.strip_prefix('-') {
                Some(d) => ('-', d),
                None => ('+', exp),
            };
            format!("{mant}e{sign}{digits:0>2}")
        }
        None => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn test_grid() -> Grid {
        Grid::uniform(256, -16.0, 16.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(Grid::uniform(100, -1.0, 1.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::uniform(4, -1.0, 1.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::uniform(64, 2.0, -2.0), Err(Error::InvalidGrid(_))));
        assert!(Grid::uniform(64, -2.0, 2.0).is_ok());
    }

    #[test]
    fn gaussian_is_normalized_with_correct_moments() {
        let g = test_grid();
        let psi = WaveFunction::gaussian(g, 1.5, 0.8, 2.0, 1.0);
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
        let dx = g.dx();
        let mean_x: f64 = psi
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| g.x(i) * a.norm_sqr())
            .sum::<f64>()
            * dx;
        assert_abs_diff_eq!(mean_x, 1.5, epsilon = 1e-10);
        let var: f64 = psi
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| (g.x(i) - 1.5).powi(2) * a.norm_sqr())
            .sum::<f64>()
            * dx;
        assert_abs_diff_eq!(var, 0.64, epsilon = 1e-10);
    }

    #[test]
    fn translate_moves_the_packet() {
        let g = test_grid();
        let psi = WaveFunction::gaussian(g, 0.0, 1.0, 0.0, 1.0);
        let shifted = psi.translate(2.5);
        let expect = WaveFunction::gaussian(g, 2.5, 1.0, 0.0, 1.0);
        assert!(shifted.max_abs_diff(&expect).unwrap() < 1e-11);
        assert!(!shifted.support_overflow);
    }

    #[test]
    fn dilate_matches_closed_form_and_flips_parity_when_negative() {
        let g = test_grid();
        let psi = WaveFunction::gaussian(g, 0.0, 1.0, 0.0, 1.0);
        let wide = psi.dilate(1.7);
        // |s|^{-1/2} ψ(x/s) for a centered Gaussian is a Gaussian of width sσ.
        let expect = WaveFunction::gaussian(g, 0.0, 1.7, 0.0, 1.0);
        assert!(wide.max_abs_diff(&expect).unwrap() < 1e-10);

        let odd = WaveFunction::from_fn(g, |x| C64::new(x * (-x * x / 4.0).exp(), 0.0));
        let flipped = odd.dilate(-1.0);
        let expect = WaveFunction::from_fn(g, |x| C64::new(-x * (-x * x / 4.0).exp(), 0.0));
        assert!(flipped.max_abs_diff(&expect).unwrap() < 1e-11);
    }

    #[test]
    fn free_evolution_spreads_a_gaussian_by_the_width_law() {
        let g = Grid::uniform(512, -24.0, 24.0).unwrap();
        let sigma0 = 1.0;
        let psi = WaveFunction::gaussian(g, 0.0, sigma0, 0.0, 1.0);
        let tau = 1.2;
        let evolved = psi.free_evolve(tau, 1.0, 1.0);
        let dx = g.dx();
        let var: f64 = evolved
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| g.x(i).powi(2) * a.norm_sqr())
            .sum::<f64>()
            * dx;
        let expect = sigma0 * sigma0 + (tau / (2.0 * sigma0)).powi(2);
        assert_abs_diff_eq!(var, expect, epsilon = 1e-8);
    }

    #[test]
    fn overflow_flag_trips_when_mass_hits_the_border() {
        let g = test_grid();
        let psi = WaveFunction::gaussian(g, 0.0, 1.0, 0.0, 1.0);
        let pushed = psi.translate(14.5);
        assert!(pushed.support_overflow);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let g = test_grid();
        let psi = WaveFunction::gaussian(g, 0.3, 0.9, -1.0, 1.0);
        let mut buf = Vec::new();
        psi.write_binary(&mut buf).unwrap();
        let back = WaveFunction::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back.grid, psi.grid);
        assert_eq!(back.amps, psi.amps);
        assert!(WaveFunction::read_binary(&buf[..40]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            WaveFunction::read_binary(bad.as_slice()),
            Err(Error::MalformedData(_))
        ));
    }

    #[test]
    fn csv_format_is_c_style() {
        assert_eq!(fmt_e(1.0), "1.000000000000e+00");
        assert_eq!(fmt_e(-0.0625), "-6.250000000000e-02");
        assert_eq!(fmt_e(3.5e-120), "3.500000000000e-120");
        let g = Grid::uniform(8, 0.0, 1.0).unwrap();
        let psi = WaveFunction::from_fn(g, |x| C64::new(x, -x));
        let mut out = Vec::new();
        psi.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("x,re,im\n0.000000000000e+00,"));
        assert!(!text.contains('\r'));
    }

    /// Random packet that is localized near the box center and band-limited
    /// to the lowest eighth of the spectrum, so compressive dilations stay
    /// within the Nyquist budget.
    fn random_packet(seed: u64) -> WaveFunction {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = test_grid();
        let n = g.n;
        let mut modes = vec![C64::new(0.0, 0.0); n];
        for j in 0..=n / 8 {
            modes[j] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if j > 0 {
                modes[n - j] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        crate::fftutil::ifft(&mut modes);
        let mut psi = WaveFunction::new(g, modes).unwrap();
        // Envelope tight enough that a 2× stretch still has ~1e-12 tails at
        // the box edge, so clipped-tail effects stay below the assertions.
        for (i, a) in psi.amps.iter_mut().enumerate() {
            *a *= (-g.x(i).powi(2) / 3.0).exp();
        }
        psi.normalize();
        psi
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn unitary_maps_preserve_norm(seed in 0u64..1_000, a in -3.0f64..3.0, s in 0.5f64..2.0, tau in -1.0f64..1.0) {
            let psi = random_packet(seed);
            prop_assert!((psi.translate(a).norm() - 1.0).abs() < 1e-9);
            prop_assert!((psi.dilate(s).norm() - 1.0).abs() < 1e-9);
            prop_assert!((psi.free_evolve(tau, 1.0, 1.0).norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn free_evolution_composes(seed in 0u64..1_000, t1 in -0.6f64..0.6, t2 in -0.6f64..0.6) {
            let psi = random_packet(seed);
            let once = psi.free_evolve(t1 + t2, 1.0, 1.0);
            let twice = psi.free_evolve(t1, 1.0, 1.0).free_evolve(t2, 1.0, 1.0);
            prop_assert!(once.max_abs_diff(&twice).unwrap() < 1e-12);
        }

        #[test]
        fn dilation_inverts(seed in 0u64..1_000, s in 0.5f64..1.8) {
            let psi = random_packet(seed);
            let back = psi.dilate(s).dilate(1.0 / s);
            prop_assert!(back.max_abs_diff(&psi).unwrap() < 1e-8);
        }
    }
}
