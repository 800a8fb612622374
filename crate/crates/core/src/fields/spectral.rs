//! Internal FFT engine: d-dimensional complex transforms on the torus,
//! wavenumber tables, and the 2/3-rule truncation mask.
//!
//! Conventions: forward transforms are unnormalized (`c[m] = sum_x f(x)
//! e^{-ik.x}`), the inverse applies the `1/N^d` factor and returns the real
//! part. Odd-order operators (gradient, divergence, curl) zero the Nyquist
//! wavenumber so real fields map to real fields; the Laplacian keeps it.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};

use super::GridSpec;

static PLANS: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = PLANS.lock().expect("fft plan cache poisoned");
    cache
        .entry((n, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            }
        })
        .clone()
}

/// Logical shape padded to three axes; unused trailing axes have extent 1.
pub(crate) fn shape(grid: &GridSpec) -> [usize; 3] {
    match grid.dim() {
        2 => [grid.n(), grid.n(), 1],
        _ => [grid.n(), grid.n(), grid.n()],
    }
}

/// In-place FFT along every grid axis (C order, last axis fastest).
fn fft_all_axes(grid: &GridSpec, data: &mut [Complex64], forward: bool) {
    let n = grid.n();
    let dim = grid.dim();
    let total = grid.node_count();
    debug_assert_eq!(data.len(), total);
    let fft = plan(n, forward);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        let mut base = 0;
        while base < total {
            for offset in 0..stride {
                let start = base + offset;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[start + j * stride];
                }
                fft.process(&mut line);
                for (j, v) in line.iter().enumerate() {
                    data[start + j * stride] = *v;
                }
            }
            base += block;
        }
    }
}

/// Unnormalized forward transform of a real-valued grid function.
pub(crate) fn forward(grid: &GridSpec, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_all_axes(grid, &mut data, true);
    data
}

/// Normalized inverse transform; returns the real part.
pub(crate) fn inverse(grid: &GridSpec, mut spec: Vec<Complex64>) -> Vec<f64> {
    fft_all_axes(grid, &mut spec, false);
    let scale = 1.0 / grid.node_count() as f64;
    spec.iter().map(|c| c.re * scale).collect()
}

/// Signed integer frequency for index `i` on an axis of length `n`
/// (fftfreq convention, Nyquist mapped to `-n/2`).
fn signed_mode(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Per-axis wavenumber and truncation tables, padded to three axes.
pub(crate) struct Modes {
    /// Full wavenumbers, Nyquist included (used by the Laplacian).
    pub k_full: [Vec<f64>; 3],
    /// Wavenumbers with the Nyquist mode zeroed (odd-order operators).
    pub k_deriv: [Vec<f64>; 3],
    /// 2/3-rule keep mask: `3|m| < n` per axis.
    pub keep: [Vec<bool>; 3],
}

impl Modes {
    pub(crate) fn new(grid: &GridSpec) -> Self {
        let n = grid.n();
        let mut k_full: [Vec<f64>; 3] = [vec![0.0], vec![0.0], vec![0.0]];
        let mut k_deriv: [Vec<f64>; 3] = [vec![0.0], vec![0.0], vec![0.0]];
        let mut keep: [Vec<bool>; 3] = [vec![true], vec![true], vec![true]];
        for axis in 0..grid.dim() {
            let len = grid.length(axis);
            let scale = 2.0 * std::f64::consts::PI / len;
            let mut full = Vec::with_capacity(n);
            let mut deriv = Vec::with_capacity(n);
            let mut mask = Vec::with_capacity(n);
            for i in 0..n {
                let m = signed_mode(i, n);
                full.push(scale * m as f64);
                deriv.push(if i == n / 2 { 0.0 } else { scale * m as f64 });
                mask.push(3 * m.unsigned_abs() < n as u64);
            }
            k_full[axis] = full;
            k_deriv[axis] = deriv;
            keep[axis] = mask;
        }
        Modes {
            k_full,
            k_deriv,
            keep,
        }
    }
}

/// Visit every spectral coefficient with its padded 3-axis index.
/// Iteration order matches the flat C-order layout.
pub(crate) fn for_each_mode<F: FnMut(usize, [usize; 3])>(grid: &GridSpec, mut f: F) {
    let [s0, s1, s2] = shape(grid);
    let mut flat = 0;
    for i0 in 0..s0 {
        for i1 in 0..s1 {
            for i2 in 0..s2 {
                f(flat, [i0, i1, i2]);
                flat += 1;
            }
        }
    }
}

/// Subtract the arithmetic mean so the zero mode is exactly zero.
/// Differential operators annihilate constants; this removes the FFT
/// round-off that would otherwise leak into the mean.
pub(crate) fn remove_mean(values: &mut [f64]) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    for v in values.iter_mut() {
        *v -= mean;
    }
}

/// Partial derivative along `axis` computed from an existing spectrum.
pub(crate) fn deriv_from_spectrum(
    grid: &GridSpec,
    modes: &Modes,
    spec: &[Complex64],
    axis: usize,
) -> Vec<f64> {
    let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
    let k = &modes.k_deriv[axis];
    for_each_mode(grid, |flat, idx| {
        let kk = k[idx[axis]];
        out[flat] = Complex64::new(0.0, kk) * spec[flat];
    });
    let mut vals = inverse(grid, out);
    remove_mean(&mut vals);
    vals
}

/// Laplacian computed from an existing spectrum.
pub(crate) fn laplacian_from_spectrum(
    grid: &GridSpec,
    modes: &Modes,
    spec: &[Complex64],
) -> Vec<f64> {
    let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
    for_each_mode(grid, |flat, idx| {
        let k2 = (0..grid.dim())
            .map(|a| {
                let k = modes.k_full[a][idx[a]];
                k * k
            })
            .sum::<f64>();
        out[flat] = -k2 * spec[flat];
    });
    inverse(grid, out)
}

/// Zero every mode outside the 2/3-rule band, in place.
pub(crate) fn truncate_spectrum(grid: &GridSpec, modes: &Modes, spec: &mut [Complex64]) {
    for_each_mode(grid, |flat, idx| {
        let kept = (0..grid.dim()).all(|a| modes.keep[a][idx[a]]);
        if !kept {
            spec[flat] = Complex64::new(0.0, 0.0);
        }
    });
}

/// Divergence of a vector of spectra: `sum_a i k_a  u^_a`, one inverse pass.
pub(crate) fn divergence_from_spectra(
    grid: &GridSpec,
    modes: &Modes,
    spectra: &[Vec<Complex64>],
) -> Vec<f64> {
    let total = grid.node_count();
    let mut acc = vec![Complex64::new(0.0, 0.0); total];
    for (axis, spec) in spectra.iter().enumerate() {
        let k = &modes.k_deriv[axis];
        for_each_mode(grid, |flat, idx| {
            acc[flat] += Complex64::new(0.0, k[idx[axis]]) * spec[flat];
        });
    }
    let mut vals = inverse(grid, acc);
    remove_mean(&mut vals);
    vals
}
