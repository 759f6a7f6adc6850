//! Thin FFT layer: cached plans, wavenumber grids, spectral derivatives.
//!
//! All transforms use the convention forward = Σ e^{−ikx}, inverse carries the
//! 1/n normalization.  Plans are cached per length for the lifetime of the
//! process; every grid size we use is a power of two.

use crate::C64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                fwd: planner.plan_fft_forward(n),
                inv: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

pub fn fft(buf: &mut [C64]) {
    plans(buf.len()).fwd.process(buf);
}

pub fn ifft(buf: &mut [C64]) {
    let n = buf.len();
    plans(n).inv.process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Wavenumbers k_j = 2πj/L in FFT storage order (negative half wrapped).
pub fn k_grid(n: usize, length: f64) -> Vec<f64> {
    let dk = std::f64::consts::TAU / length;
    (0..n)
        .map(|j| {
            let j = if j <= (n - 1) / 2 { j as isize } else { j as isize - n as isize };
            j as f64 * dk
        })
        .collect()
}

/// Spectral derivative of periodic samples.
///
/// First derivatives zero the unpaired Nyquist mode (its odd multiplier has no
/// real representative); the second derivative keeps the full −k² symbol.
pub fn derivative(values: &[C64], length: f64, order: u32) -> Vec<C64> {
    let n = values.len();
    let mut buf = values.to_vec();
    fft(&mut buf);
    let ks = k_grid(n, length);
    match order {
        1 => {
            for (v, &k) in buf.iter_mut().zip(&ks) {
                *v *= C64::new(0.0, k);
            }
            if n % 2 == 0 {
                buf[n / 2] = C64::new(0.0, 0.0);
            }
        }
        2 => {
            for (v, &k) in buf.iter_mut().zip(&ks) {
                *v *= -k * k;
            }
        }
        _ => panic!("derivative order must be 1 or 2"),
    }
    ifft(&mut buf);
    buf
}
