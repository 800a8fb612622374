//! Particle-path integration and verification of the exponential
//! pressure-transport formula along paths,
//! `P(X(t), t) = e^{-2 A(t)} [P(0) + int_0^t e^{2 A(s)} F ds]` with
//! `A(t) = int_0^t div u(X(s), s) ds`, whose nonnegativity underlies
//! `theta >= 0`.
//!
//! Tracers use RK4 in time on multilinearly interpolated velocity samples
//! (linear interpolation in time between stored snapshots); this is a
//! verification tool, not a production advection scheme.

use crate::error::CoreError;
use crate::fields::{GridSpec, ScalarField, VectorField};
use crate::state::State;

/// The fields a tracer needs from one stored snapshot.
#[derive(Debug, Clone)]
pub struct FlowSample {
    pub t: f64,
    pub u: VectorField,
    pub div_u: ScalarField,
    pub pressure: ScalarField,
    /// Viscous heating `2 mu |D(u)|^2 + lambda (div u)^2`, sampled pointwise.
    pub heat_source: ScalarField,
    pub rho: ScalarField,
}

impl FlowSample {
    pub fn from_state(s: &State) -> Self {
        let u = s.velocity();
        let grad_u = u.gradient_tensor();
        let div_u = {
            let mut acc = grad_u[0].component(0).clone();
            for a in 1..u.dim() {
                acc = acc.zip_with(grad_u[a].component(a), |x, y| x + y);
            }
            acc
        };
        let grid = s.grid().clone();
        let mu = s.params.mu;
        let lam = s.params.lambda;
        let mut src = vec![0.0; grid.node_count()];
        for i in 0..u.dim() {
            for j in 0..u.dim() {
                let a = grad_u[i].component(j).values();
                let b = grad_u[j].component(i).values();
                for (n, s) in src.iter_mut().enumerate() {
                    let d = 0.5 * (a[n] + b[n]);
                    *s += 2.0 * mu * d * d;
                }
            }
        }
        for (n, s) in src.iter_mut().enumerate() {
            let dv = div_u.values()[n];
            *s += lam * dv * dv;
        }
        FlowSample {
            t: s.t,
            u,
            div_u,
            pressure: s.pressure.clone(),
            heat_source: ScalarField::from_values(&grid, src),
            rho: s.rho.clone(),
        }
    }
}

/// Periodic multilinear interpolation of a scalar field at `pos`.
fn interp(field: &ScalarField, pos: &[f64; 3]) -> f64 {
    let grid = field.grid();
    let dim = grid.dim();
    let n = grid.n();
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..dim {
        let l = grid.length(a);
        let h = grid.spacing(a);
        let x = pos[a].rem_euclid(l);
        let cell = (x / h).floor();
        base[a] = (cell as usize) % n;
        frac[a] = x / h - cell;
    }
    let corners = 1usize << dim;
    let mut acc = 0.0;
    for c in 0..corners {
        let mut weight = 1.0;
        let mut idx = [0usize; 3];
        for a in 0..dim {
            if (c >> a) & 1 == 1 {
                idx[a] = (base[a] + 1) % n;
                weight *= frac[a];
            } else {
                idx[a] = base[a];
                weight *= 1.0 - frac[a];
            }
        }
        let flat = if dim == 2 {
            idx[0] * n + idx[1]
        } else {
            (idx[0] * n + idx[1]) * n + idx[2]
        };
        acc += weight * field.values()[flat];
    }
    acc
}

fn interp_velocity(u: &VectorField, pos: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for a in 0..u.dim() {
        out[a] = interp(u.component(a), pos);
    }
    out
}

/// One tracer's history at the sample times of the driving snapshots.
#[derive(Debug, Clone)]
pub struct Tracer {
    pub seed: [f64; 3],
    pub positions: Vec<[f64; 3]>,
    /// Accumulated `int_0^t div u` along the path.
    pub div_accum: Vec<f64>,
    pub pressure: Vec<f64>,
    pub heat_source: Vec<f64>,
    /// Smallest density sampled along the path; paths through near-vacuum
    /// regions carry floor-contaminated velocities.
    pub min_rho: f64,
}

/// All tracers plus the shared sample times.
#[derive(Debug, Clone)]
pub struct TracerSet {
    pub times: Vec<f64>,
    pub tracers: Vec<Tracer>,
    pub grid: GridSpec,
}

/// Integrate `dX/dt = u(X, t)` and `dA/dt = div u(X, t)` through the sample
/// sequence with RK4, taking `substeps` RK4 steps per snapshot interval.
pub fn advect(
    samples: &[FlowSample],
    seeds: &[[f64; 3]],
    substeps: usize,
) -> Result<TracerSet, CoreError> {
    if seeds.is_empty() {
        return Err(CoreError::InvalidArgument(
            "tracer seed list is empty".into(),
        ));
    }
    if samples.len() < 2 {
        return Err(CoreError::InvalidArgument(
            "need at least two flow samples".into(),
        ));
    }
    if substeps == 0 {
        return Err(CoreError::InvalidArgument("substeps must be >= 1".into()));
    }
    for w in samples.windows(2) {
        if w[1].t <= w[0].t {
            return Err(CoreError::InvalidArgument(
                "sample times must strictly increase".into(),
            ));
        }
    }
    let grid = samples[0].u.grid().clone();
    let dim = grid.dim();

    let wrap = |pos: &mut [f64; 3]| {
        for a in 0..dim {
            pos[a] = pos[a].rem_euclid(grid.length(a));
        }
    };

    let mut tracers: Vec<Tracer> = seeds
        .iter()
        .map(|&seed| {
            let mut p = seed;
            wrap(&mut p);
            Tracer {
                seed: p,
                positions: vec![p],
                div_accum: vec![0.0],
                pressure: vec![interp(&samples[0].pressure, &p)],
                heat_source: vec![interp(&samples[0].heat_source, &p)],
                min_rho: interp(&samples[0].rho, &p),
            }
        })
        .collect();

    for w in samples.windows(2) {
        let (s0, s1) = (&w[0], &w[1]);
        let span = s1.t - s0.t;
        // velocity and divergence linearly interpolated in time
        let eval = |pos: &[f64; 3], tau: f64| -> ([f64; 3], f64) {
            let alpha = (tau - s0.t) / span;
            let v0 = interp_velocity(&s0.u, pos);
            let v1 = interp_velocity(&s1.u, pos);
            let d0 = interp(&s0.div_u, pos);
            let d1 = interp(&s1.div_u, pos);
            let mut v = [0.0; 3];
            for a in 0..dim {
                v[a] = (1.0 - alpha) * v0[a] + alpha * v1[a];
            }
            (v, (1.0 - alpha) * d0 + alpha * d1)
        };

        for tracer in tracers.iter_mut() {
            let mut pos = *tracer.positions.last().expect("tracer history");
            let mut accum = *tracer.div_accum.last().expect("tracer history");
            let h = span / substeps as f64;
            for step in 0..substeps {
                let tau = s0.t + step as f64 * h;
                let (k1v, k1d) = eval(&pos, tau);
                let mid1 = offset(&pos, &k1v, 0.5 * h, dim);
                let (k2v, k2d) = eval(&mid1, tau + 0.5 * h);
                let mid2 = offset(&pos, &k2v, 0.5 * h, dim);
                let (k3v, k3d) = eval(&mid2, tau + 0.5 * h);
                let end = offset(&pos, &k3v, h, dim);
                let (k4v, k4d) = eval(&end, tau + h);
                for a in 0..dim {
                    pos[a] += h / 6.0 * (k1v[a] + 2.0 * k2v[a] + 2.0 * k3v[a] + k4v[a]);
                }
                accum += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            }
            wrap(&mut pos);
            tracer.positions.push(pos);
            tracer.div_accum.push(accum);
            tracer.pressure.push(interp(&s1.pressure, &pos));
            tracer.heat_source.push(interp(&s1.heat_source, &pos));
            tracer.min_rho = tracer.min_rho.min(interp(&s1.rho, &pos));
        }
    }

    Ok(TracerSet {
        times: samples.iter().map(|s| s.t).collect(),
        tracers,
        grid,
    })
}

fn offset(pos: &[f64; 3], vel: &[f64; 3], h: f64, dim: usize) -> [f64; 3] {
    let mut out = *pos;
    for a in 0..dim {
        out[a] += h * vel[a];
    }
    out
}

/// Result of evaluating the path pressure formula against sampled pressure.
#[derive(Debug, Clone)]
pub struct PressureFormulaReport {
    /// Max over included tracers and times of the relative mismatch.
    pub max_rel_error: f64,
    /// Smallest formula value seen; must be nonnegative when the initial
    /// pressure and the heating source are.
    pub min_rhs: f64,
    /// Tracers excluded because their path sampled near-vacuum density.
    pub excluded: usize,
    /// Per-tracer max relative error (`None` for excluded tracers).
    pub per_tracer: Vec<Option<f64>>,
}

/// Evaluate `e^{-2A}[P(0) + int e^{2A} F ds]` by trapezoidal quadrature
/// along each path and compare with the sampled pressure. Tracers whose
/// path dips below `vacuum_threshold` in density are excluded.
pub fn pressure_formula_check(tr: &TracerSet, vacuum_threshold: f64) -> PressureFormulaReport {
    let mut max_rel_error = 0.0f64;
    let mut min_rhs = f64::INFINITY;
    let mut excluded = 0;
    let mut per_tracer = Vec::with_capacity(tr.tracers.len());
    for tracer in &tr.tracers {
        if tracer.min_rho <= vacuum_threshold {
            excluded += 1;
            per_tracer.push(None);
            continue;
        }
        let p0 = tracer.pressure[0];
        let scale = tracer
            .pressure
            .iter()
            .fold(0.0f64, |m, p| m.max(p.abs()))
            .max(1e-30);
        let mut integral = 0.0;
        let mut worst = 0.0f64;
        for j in 0..tr.times.len() {
            if j > 0 {
                let dt = tr.times[j] - tr.times[j - 1];
                let f_prev = (2.0 * tracer.div_accum[j - 1]).exp() * tracer.heat_source[j - 1];
                let f_here = (2.0 * tracer.div_accum[j]).exp() * tracer.heat_source[j];
                integral += 0.5 * dt * (f_prev + f_here);
            }
            let rhs = (-2.0 * tracer.div_accum[j]).exp() * (p0 + integral);
            min_rhs = min_rhs.min(rhs);
            worst = worst.max((rhs - tracer.pressure[j]).abs() / scale);
        }
        max_rel_error = max_rel_error.max(worst);
        per_tracer.push(Some(worst));
    }
    PressureFormulaReport {
        max_rel_error,
        min_rhs: if min_rhs.is_finite() { min_rhs } else { 0.0 },
        excluded,
        per_tracer,
    }
}

/// Evenly spaced seed grid (per-axis count `per_axis`), offset from the
/// nodes to exercise the interpolation.
pub fn lattice_seeds(grid: &GridSpec, per_axis: usize) -> Vec<[f64; 3]> {
    let dim = grid.dim();
    let mut seeds = Vec::new();
    let counts = if dim == 2 {
        [per_axis, per_axis, 1]
    } else {
        [per_axis, per_axis, per_axis]
    };
    for i0 in 0..counts[0] {
        for i1 in 0..counts[1] {
            for i2 in 0..counts[2] {
                let mut p = [0.0; 3];
                let idx = [i0, i1, i2];
                for a in 0..dim {
                    p[a] = grid.length(a) * (idx[a] as f64 + 0.37) / counts[a] as f64;
                }
                seeds.push(p);
            }
        }
    }
    seeds
}
