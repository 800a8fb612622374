//! Dense reference implementations used to cross-check the FFT pipeline.
//!
//! Everything here is computed by direct O(N^2d) summation (no FFT library)
//! or by a dense LU factorization, so the results are an independent route to
//! the same quantities. Intended for small grids (N = 8 or 16); the `verify`
//! subcommand and the test suites call these as oracles.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::CoreError;
use crate::fields::{GridSpec, ScalarField, VectorField, Vorticity};
use crate::state::State;

fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|j| {
            let phase = -2.0 * std::f64::consts::PI * j as f64 / n as f64;
            Complex64::new(phase.cos(), phase.sin())
        })
        .collect()
}

/// Kahan-compensated complex accumulator; the direct summations here run
/// over N^d terms and would otherwise dominate the oracle's own error.
#[derive(Clone, Copy, Default)]
struct CompensatedSum {
    sum: Complex64,
    carry: Complex64,
}

impl CompensatedSum {
    fn add(&mut self, value: Complex64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> Complex64 {
        self.sum
    }
}

fn signed_mode(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn wavenumber(grid: &GridSpec, axis: usize, i: usize) -> f64 {
    2.0 * std::f64::consts::PI * signed_mode(i, grid.n()) as f64 / grid.length(axis)
}

/// Direct forward DFT; coefficients are normalized by `1/N^d` so that
/// `f(x) = sum_m c_m e^{i k_m . x}` on the grid.
pub fn dft_coefficients(f: &ScalarField) -> Vec<Complex64> {
    let grid = f.grid();
    let n = grid.n();
    let total = grid.node_count();
    let w = twiddles(n);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); total];
    for (mi, c) in coeffs.iter_mut().enumerate() {
        let m = grid.decompose(mi);
        let mut acc = CompensatedSum::default();
        for (xi, &v) in f.values().iter().enumerate() {
            let x = grid.decompose(xi);
            let mut phase_idx = 0usize;
            for a in 0..grid.dim() {
                phase_idx = (phase_idx + m[a] * x[a]) % n;
            }
            acc.add(v * w[phase_idx]);
        }
        *c = acc.value();
    }
    let scale = 1.0 / total as f64;
    for c in coeffs.iter_mut() {
        *c *= scale;
    }
    coeffs
}

/// Direct inverse DFT of normalized coefficients; returns the real part.
pub fn dft_synthesize(grid: &GridSpec, coeffs: &[Complex64]) -> ScalarField {
    let n = grid.n();
    let w = twiddles(n);
    let values = (0..grid.node_count())
        .map(|xi| {
            let x = grid.decompose(xi);
            let mut acc = CompensatedSum::default();
            for (mi, c) in coeffs.iter().enumerate() {
                let m = grid.decompose(mi);
                let mut phase_idx = 0usize;
                for a in 0..grid.dim() {
                    phase_idx = (phase_idx + m[a] * x[a]) % n;
                }
                // conjugate twiddle = inverse kernel
                acc.add(c * w[phase_idx].conj());
            }
            acc.value().re
        })
        .collect();
    ScalarField::from_values(grid, values)
}

fn apply_multiplier<F: Fn([usize; 3]) -> Complex64>(f: &ScalarField, mult: F) -> ScalarField {
    let grid = f.grid();
    let mut coeffs = dft_coefficients(f);
    for (mi, c) in coeffs.iter_mut().enumerate() {
        *c *= mult(grid.decompose(mi));
    }
    dft_synthesize(grid, &coeffs)
}

/// Dense-DFT spectral gradient.
pub fn gradient(f: &ScalarField) -> VectorField {
    let grid = f.grid().clone();
    let comps = (0..grid.dim())
        .map(|axis| apply_multiplier(f, |m| Complex64::new(0.0, wavenumber(&grid, axis, m[axis]))))
        .collect();
    VectorField::new(comps).expect("dense gradient components")
}

/// Dense-DFT spectral divergence.
pub fn divergence(u: &VectorField) -> ScalarField {
    let grid = u.grid().clone();
    let mut acc = ScalarField::zeros(&grid);
    for axis in 0..grid.dim() {
        let d = apply_multiplier(u.component(axis), |m| {
            Complex64::new(0.0, wavenumber(&grid, axis, m[axis]))
        });
        acc = acc.zip_with(&d, |a, b| a + b);
    }
    acc
}

/// Dense-DFT spectral curl (scalar in 2D, vector in 3D).
pub fn curl(u: &VectorField) -> Vorticity {
    let grid = u.grid().clone();
    let d = |comp: usize, axis: usize| {
        apply_multiplier(u.component(comp), |m| {
            Complex64::new(0.0, wavenumber(&grid, axis, m[axis]))
        })
    };
    if grid.dim() == 2 {
        Vorticity::Scalar(d(1, 0).zip_with(&d(0, 1), |a, b| a - b))
    } else {
        let comps = vec![
            d(2, 1).zip_with(&d(1, 2), |a, b| a - b),
            d(0, 2).zip_with(&d(2, 0), |a, b| a - b),
            d(1, 0).zip_with(&d(0, 1), |a, b| a - b),
        ];
        Vorticity::Vector(VectorField::new(comps).expect("dense curl components"))
    }
}

/// Dense-DFT spectral Laplacian.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let grid = f.grid().clone();
    apply_multiplier(f, |m| {
        let k2: f64 = (0..grid.dim())
            .map(|a| {
                let k = wavenumber(&grid, a, m[a]);
                k * k
            })
            .sum();
        Complex64::new(-k2, 0.0)
    })
}

/// `integral of f^2` computed from the Parseval identity on dense DFT
/// coefficients: `V * sum_m |c_m|^2`.
pub fn parseval_l2_squared(f: &ScalarField) -> f64 {
    let coeffs = dft_coefficients(f);
    f.grid().volume() * coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
}

/// 2/3-rule truncation realized by dense transforms.
pub fn dealias(f: &ScalarField) -> ScalarField {
    let grid = f.grid().clone();
    let n = grid.n() as i64;
    apply_multiplier(f, |m| {
        let kept = (0..grid.dim()).all(|a| 3 * signed_mode(m[a], grid.n()).abs() < n);
        Complex64::new(if kept { 1.0 } else { 0.0 }, 0.0)
    })
}

/// True (non-aliased) Fourier convolution of two grid functions, restricted
/// to the 2/3-rule band and synthesized back on the grid.
pub fn truncated_convolution(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let grid = a.grid().clone();
    assert_eq!(&grid, b.grid(), "grid mismatch");
    let n = grid.n() as i64;
    let ca = dft_coefficients(a);
    let cb = dft_coefficients(b);
    let dim = grid.dim();
    let to_signed = |mi: usize| {
        let m = grid.decompose(mi);
        [
            signed_mode(m[0], grid.n()),
            signed_mode(m[1], grid.n()),
            if dim == 3 {
                signed_mode(m[2], grid.n())
            } else {
                0
            },
        ]
    };
    let kept = |s: [i64; 3]| (0..dim).all(|a| 3 * s[a].abs() < n);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.node_count()];
    for (pi, cp) in ca.iter().enumerate() {
        let p = to_signed(pi);
        for (qi, cq) in cb.iter().enumerate() {
            let q = to_signed(qi);
            let s = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
            if !kept(s) {
                continue;
            }
            // signed frequency back to storage index
            let mut idx = [0usize; 3];
            for a in 0..dim {
                idx[a] = s[a].rem_euclid(n) as usize;
            }
            let flat = if dim == 2 {
                idx[0] * grid.n() + idx[1]
            } else {
                (idx[0] * grid.n() + idx[1]) * grid.n() + idx[2]
            };
            out[flat] += cp * cq;
        }
    }
    dft_synthesize(&grid, &out)
}

/// Term-by-term dense evaluation of the semi-discrete right-hand side:
/// the same grid products as the production path, but with dense truncation
/// and dense differentiation. Returns `(d_rho, d_momentum, d_pressure)`.
pub fn rhs_reference(s: &State) -> (ScalarField, VectorField, ScalarField) {
    let grid = s.grid().clone();
    let dim = grid.dim();
    let mu = s.params.mu;
    let lam = s.params.lambda;
    let u = s.velocity();

    let d_rho = divergence(&s.momentum).map(|v| -v);

    let grad_u: Vec<VectorField> = (0..dim).map(|i| gradient(u.component(i))).collect();
    let div_u = divergence(&u);
    let lap_u =
        VectorField::new((0..dim).map(|i| laplacian(u.component(i))).collect()).expect("lap u");
    let grad_div_u = gradient(&div_u);
    let grad_p = gradient(&s.pressure);

    let mut d_m = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut conv = ScalarField::zeros(&grid);
        for j in 0..dim {
            let flux = dealias(
                &s.momentum
                    .component(i)
                    .zip_with(u.component(j), |m, v| m * v),
            );
            conv = conv.zip_with(gradient(&flux).component(j), |c, d| c + d);
        }
        let vals = (0..grid.node_count())
            .map(|n| {
                -conv.values()[n]
                    + mu * lap_u.component(i).values()[n]
                    + (mu + lam) * grad_div_u.component(i).values()[n]
                    - grad_p.component(i).values()[n]
            })
            .collect();
        d_m.push(ScalarField::from_values(&grid, vals));
    }

    let mut p_conv = ScalarField::zeros(&grid);
    for j in 0..dim {
        let flux = dealias(&s.pressure.zip_with(u.component(j), |p, v| p * v));
        p_conv = p_conv.zip_with(gradient(&flux).component(j), |c, d| c + d);
    }
    let mut source = vec![0.0; grid.node_count()];
    for i in 0..dim {
        for j in 0..dim {
            let a = grad_u[i].component(j).values();
            let b = grad_u[j].component(i).values();
            for (n, sv) in source.iter_mut().enumerate() {
                let d = 0.5 * (a[n] + b[n]);
                *sv += 2.0 * mu * d * d;
            }
        }
    }
    for (n, sv) in source.iter_mut().enumerate() {
        let dv = div_u.values()[n];
        *sv += lam * dv * dv - s.pressure.values()[n] * dv;
    }
    let source = dealias(&ScalarField::from_values(&grid, source));
    let d_p = p_conv.zip_with(&source, |c, s| -c + s);

    (
        d_rho,
        VectorField::new(d_m).expect("momentum tendency"),
        d_p,
    )
}

/// Solve the periodic Lame system `-mu lap v - (mu+lambda) grad div v = f`
/// by assembling the full operator matrix and LU-factorizing it. The
/// constant nullspace is pinned by adding `mu` times the per-component mean
/// projector, so mean-zero sources yield the mean-zero solution.
pub fn lame_solve(f: &VectorField, mu: f64, lambda: f64) -> Result<VectorField, CoreError> {
    if mu <= 0.0 || 2.0 * mu + lambda <= 0.0 {
        return Err(CoreError::InvalidParams(format!(
            "lame solve requires mu > 0 and 2mu + lambda > 0, got mu={mu}, lambda={lambda}"
        )));
    }
    let grid = f.grid().clone();
    let dim = grid.dim();
    let m = grid.node_count();
    let size = dim * m;

    let apply = |v: &VectorField| -> VectorField {
        let lap = v.vector_laplacian();
        let grad_div = v.divergence().gradient();
        let comps = (0..dim)
            .map(|a| {
                lap.component(a)
                    .zip_with(grad_div.component(a), |l, g| -mu * l - (mu + lambda) * g)
            })
            .collect();
        VectorField::new(comps).expect("lame operator output")
    };

    let mut a = DMatrix::<f64>::zeros(size, size);
    for col in 0..size {
        let comp = col / m;
        let node = col % m;
        let mut basis = VectorField::zeros(&grid);
        basis.component_mut(comp).values_mut()[node] = 1.0;
        let out = apply(&basis);
        for c in 0..dim {
            let vals = out.component(c).values();
            for r in 0..m {
                a[(c * m + r, col)] = vals[r];
            }
        }
        // mean projector pins the constant nullspace
        for r in 0..m {
            a[(comp * m + r, col)] += mu / m as f64;
        }
    }

    let mut rhs = DVector::<f64>::zeros(size);
    for c in 0..dim {
        let mean = f.component(c).mean();
        for (r, v) in f.component(c).values().iter().enumerate() {
            rhs[c * m + r] = v - mean;
        }
    }

    let solution = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| CoreError::InvalidParams("dense lame operator is singular".into()))?;

    let comps = (0..dim)
        .map(|c| ScalarField::from_values(&grid, solution.as_slice()[c * m..(c + 1) * m].to_vec()))
        .collect();
    Ok(VectorField::new(comps).expect("dense lame solution"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn dense_gradient_matches_analytic_sine() {
        let grid = GridSpec::new(2, 8, 1.0).unwrap();
        let f = ScalarField::from_fn(&grid, |x| (2.0 * PI * x[0]).sin());
        let g = gradient(&f);
        let exact = ScalarField::from_fn(&grid, |x| 2.0 * PI * (2.0 * PI * x[0]).cos());
        assert!(g.component(0).zip_with(&exact, |a, b| a - b).sup_norm() < 1e-11);
        assert!(g.component(1).sup_norm() < 1e-11);
    }

    #[test]
    fn parseval_on_single_mode() {
        let grid = GridSpec::new(2, 8, 1.0).unwrap();
        let f = ScalarField::from_fn(&grid, |x| (2.0 * PI * x[0]).sin());
        // integral of sin^2 over the unit torus is 1/2
        assert!((parseval_l2_squared(&f) - 0.5).abs() < 1e-12);
    }
}
