//! Right-hand-side evaluation of the compressible system in conserved
//! variables, SSP-RK3 time stepping with adaptive CFL, the simulation loop,
//! and the concentration (blowup) monitor.
//!
//! The evolved equations, with `u = m / rho` and all nonlinear products
//! dealiased by the 2/3 rule:
//!
//! ```text
//! rho_t = -div m
//! m_t   = -div(m (x) u) + mu lap u + (mu+lambda) grad div u - grad P
//! P_t   = -div(P u) - P div u + 2 mu |D(u)|^2 + lambda (div u)^2
//! ```
//!
//! where `D(u)` is the symmetric part of the velocity gradient.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticRecord};
use crate::error::CoreError;
use crate::fields::{divergence_dealiased, ScalarField, VectorField};
use crate::state::State;

/// Time derivative of the conserved triple.
#[derive(Debug, Clone)]
pub struct Tendency {
    pub d_rho: ScalarField,
    pub d_momentum: VectorField,
    pub d_pressure: ScalarField,
}

/// Evaluate the semi-discrete right-hand side.
pub fn rhs(s: &State) -> Result<Tendency, CoreError> {
    let grid = s.grid().clone();
    let dim = grid.dim();
    let mu = s.params.mu;
    let lam = s.params.lambda;
    let u = s.velocity();

    // velocity gradient tensor: grad_u[i] = grad(u_i)
    let grad_u = u.gradient_tensor();
    let div_u = {
        let mut acc = grad_u[0].component(0).clone();
        for a in 1..dim {
            acc = acc.zip_with(grad_u[a].component(a), |x, y| x + y);
        }
        acc
    };
    let lap_u = u.vector_laplacian();
    let grad_div_u = div_u.gradient();
    let grad_p = s.pressure.gradient();

    // mass: conserved form needs no product, so discrete mass is exact
    let d_rho = s.momentum.divergence().map(|v| -v);

    // momentum: -div(m_i u_j) per row, dealiased, plus viscous and pressure
    let mut d_m = Vec::with_capacity(dim);
    for i in 0..dim {
        let flux: Vec<ScalarField> = (0..dim)
            .map(|j| {
                s.momentum
                    .component(i)
                    .zip_with(u.component(j), |m, v| m * v)
            })
            .collect();
        let conv = divergence_dealiased(&flux);
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
    let d_momentum = VectorField::new(d_m)?;

    // pressure: transport plus viscous heating
    let p_flux: Vec<ScalarField> = (0..dim)
        .map(|j| s.pressure.zip_with(u.component(j), |p, v| p * v))
        .collect();
    let p_conv = divergence_dealiased(&p_flux);
    // 2 mu |D(u)|^2 + lambda (div u)^2 - P div u, one truncation for the sum
    let mut source_vals = vec![0.0; grid.node_count()];
    for i in 0..dim {
        for j in 0..dim {
            let dij_a = grad_u[i].component(j).values();
            let dij_b = grad_u[j].component(i).values();
            for (n, sv) in source_vals.iter_mut().enumerate() {
                let d = 0.5 * (dij_a[n] + dij_b[n]);
                *sv += 2.0 * mu * d * d;
            }
        }
    }
    for (n, sv) in source_vals.iter_mut().enumerate() {
        let dv = div_u.values()[n];
        *sv += lam * dv * dv - s.pressure.values()[n] * dv;
    }
    let source = ScalarField::from_values(&grid, source_vals).dealias();
    let d_pressure = p_conv.zip_with(&source, |conv, src| -conv + src);

    let tend = Tendency {
        d_rho,
        d_momentum,
        d_pressure,
    };
    if !tend.d_rho.is_finite() || !tend.d_momentum.is_finite() || !tend.d_pressure.is_finite() {
        return Err(CoreError::NonFinite("tendency".into()));
    }
    Ok(tend)
}

/// CFL time step: `cfl * min(advective, viscous)` with acoustic speed
/// `sqrt(2 theta)` and the viscous bound taken at the smallest density.
pub fn compute_dt(s: &State, cfl: f64) -> f64 {
    let grid = s.grid();
    let h = grid.min_spacing();
    let dim = grid.dim() as f64;
    let u_max = s.velocity().sup_magnitude();
    let c_max = (2.0 * s.sup_temperature()).sqrt();
    let advective = if u_max + c_max > 0.0 {
        h / (u_max + c_max)
    } else {
        f64::INFINITY
    };
    let rho_eff = s.rho.min_value().max(s.params.rho_floor);
    let visc_coeff = 2.0 * s.params.mu + s.params.lambda;
    let viscous = if visc_coeff > 0.0 {
        h * h * rho_eff / (2.0 * dim * visc_coeff)
    } else {
        f64::INFINITY
    };
    cfl * advective.min(viscous)
}

/// One SSP-RK3 step plus the clip telemetry for this step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: State,
    /// Mass (integral) removed by clipping negative density values.
    pub clip_rho_mass: f64,
    /// Pressure mass removed by clipping negative pressure values.
    pub clip_p_mass: f64,
    /// Pre-clip minima of density and pressure after the full step.
    pub min_rho_preclip: f64,
    pub min_p_preclip: f64,
}

fn stage(
    base: &State,
    w_base: f64,
    incr: &State,
    w_incr: f64,
    tend: &Tendency,
    w_dt: f64,
) -> State {
    let comb = |a: &ScalarField, b: &ScalarField, d: &ScalarField| {
        let vals = (0..a.values().len())
            .map(|n| w_base * a.values()[n] + w_incr * b.values()[n] + w_dt * d.values()[n])
            .collect();
        ScalarField::from_values(a.grid(), vals)
    };
    let rho = comb(&base.rho, &incr.rho, &tend.d_rho);
    let momentum = VectorField::new(
        (0..base.momentum.dim())
            .map(|a| {
                comb(
                    base.momentum.component(a),
                    incr.momentum.component(a),
                    tend.d_momentum.component(a),
                )
            })
            .collect(),
    )
    .expect("stage momentum");
    let pressure = comb(&base.pressure, &incr.pressure, &tend.d_pressure);
    State {
        t: base.t,
        rho,
        momentum,
        pressure,
        params: base.params,
    }
}

/// Advance one time step with the three-stage strong-stability-preserving
/// Runge-Kutta scheme. Density and pressure values below `-1e-12` are
/// clipped to zero afterwards and the removed mass is reported.
pub fn step(s: &State, dt: f64) -> Result<StepOutcome, CoreError> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "step requires dt > 0, got {dt}"
        )));
    }
    let l0 = rhs(s)?;
    let u1 = stage(s, 1.0, s, 0.0, &l0, dt);
    let l1 = rhs(&u1)?;
    let u2 = stage(s, 0.75, &u1, 0.25, &l1, 0.25 * dt);
    let l2 = rhs(&u2)?;
    let mut out = stage(s, 1.0 / 3.0, &u2, 2.0 / 3.0, &l2, 2.0 / 3.0 * dt);
    out.t = s.t + dt;

    if !out.is_finite() {
        return Err(CoreError::NonFinite("state after step".into()));
    }

    let dv = out.grid().cell_volume();
    let clip = |field: &mut ScalarField| -> (f64, f64) {
        let mut removed = 0.0;
        let mut min_pre = f64::INFINITY;
        for v in field.values_mut() {
            min_pre = min_pre.min(*v);
            if *v < -1e-12 {
                removed += -*v * dv;
                *v = 0.0;
            }
        }
        (removed, min_pre)
    };
    let (clip_rho_mass, min_rho_preclip) = clip(&mut out.rho);
    let (clip_p_mass, min_p_preclip) = clip(&mut out.pressure);

    Ok(StepOutcome {
        state: out,
        clip_rho_mass,
        clip_p_mass,
        min_rho_preclip,
        min_p_preclip,
    })
}

/// Concentration indicator `sup rho + sup_{off-vacuum} theta`; divergence of
/// this quantity is the continuation-principle signal being monitored.
pub fn blowup_monitor(s: &State) -> f64 {
    s.rho.sup_norm() + s.sup_temperature()
}

/// Loop controls for [`run`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    /// The run stops with `suspected_blowup` once the indicator reaches this
    /// multiple of its initial value.
    #[serde(default = "default_blowup_factor")]
    pub blowup_factor: f64,
    /// Steps between diagnostic records.
    #[serde(default = "default_output_every")]
    pub output_every: u64,
    /// Steps between snapshots handed to the observer (0 disables them).
    #[serde(default)]
    pub snapshot_every: u64,
    /// Lebesgue exponent for the density/pressure gradient norms in records.
    #[serde(default = "default_q_tilde")]
    pub q_tilde: f64,
}

fn default_cfl() -> f64 {
    0.4
}
fn default_dt_min() -> f64 {
    1e-9
}
fn default_blowup_factor() -> f64 {
    50.0
}
fn default_output_every() -> u64 {
    10
}
fn default_q_tilde() -> f64 {
    4.0
}

impl RunConfig {
    pub fn new(t_end: f64) -> Self {
        RunConfig {
            t_end,
            cfl: default_cfl(),
            dt_min: default_dt_min(),
            blowup_factor: default_blowup_factor(),
            output_every: default_output_every(),
            snapshot_every: 0,
            q_tilde: default_q_tilde(),
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !self.t_end.is_finite() || self.t_end <= 0.0 {
            return Err(CoreError::InvalidArgument("t_end must be positive".into()));
        }
        if self.cfl.is_nan() || self.cfl <= 0.0 || self.cfl > 1.0 {
            return Err(CoreError::InvalidArgument("cfl must lie in (0, 1]".into()));
        }
        if !self.dt_min.is_finite() || self.dt_min <= 0.0 {
            return Err(CoreError::InvalidArgument("dt_min must be positive".into()));
        }
        if !self.blowup_factor.is_finite() || self.blowup_factor <= 0.0 {
            return Err(CoreError::InvalidArgument(
                "blowup_factor must be positive".into(),
            ));
        }
        if self.output_every == 0 {
            return Err(CoreError::InvalidArgument(
                "output_every must be >= 1".into(),
            ));
        }
        if self.q_tilde.is_nan() || self.q_tilde <= 3.0 || self.q_tilde > 6.0 {
            return Err(CoreError::InvalidArgument(
                "q_tilde must lie in (3, 6]".into(),
            ));
        }
        Ok(())
    }
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Completed,
    SuspectedBlowup,
    DtCollapse,
    NonfiniteAbort,
}

/// Run-loop metadata accompanying a snapshot hand-off.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SnapshotInfo {
    pub step: u64,
    pub t: f64,
    pub dt: Option<f64>,
    pub clip_rho_mass: f64,
    pub clip_p_mass: f64,
}

/// Callbacks invoked by the run loop as records and snapshots are produced.
/// Records and snapshots arrive in time order from the loop thread.
pub trait RunObserver {
    fn on_record(&mut self, _record: &DiagnosticRecord, _state: &State) {}
    fn on_snapshot(&mut self, _state: &State, _info: &SnapshotInfo) {}
}

/// Observer that discards everything.
pub struct NullObserver;

impl RunObserver for NullObserver {}

/// Ordered diagnostic series plus termination verdict for one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub verdict: Verdict,
    pub records: Vec<DiagnosticRecord>,
    pub snapshots: Vec<SnapshotInfo>,
    pub final_state: State,
    pub steps: u64,
    pub initial_indicator: f64,
    /// Cumulative clip budgets over the whole run.
    pub clip_rho_mass: f64,
    pub clip_p_mass: f64,
    /// Worst pre-clip minima seen at any step.
    pub min_rho_preclip: f64,
    pub min_p_preclip: f64,
}

/// Advance `initial` until `t_end`, a collapse of the time step, a suspected
/// concentration event, or loss of finiteness.
pub fn run(initial: State, rc: &RunConfig) -> Result<Trajectory, CoreError> {
    run_observed(initial, rc, &mut NullObserver)
}

pub fn run_observed(
    initial: State,
    rc: &RunConfig,
    observer: &mut dyn RunObserver,
) -> Result<Trajectory, CoreError> {
    rc.validate()?;
    initial.validate()?;

    let m0 = blowup_monitor(&initial);
    let mut state = initial;
    let mut records: Vec<DiagnosticRecord> = Vec::new();
    let mut snapshots: Vec<SnapshotInfo> = Vec::new();
    let mut step_count: u64 = 0;
    let mut last_dt: Option<f64> = None;
    let mut clip_rho_total = 0.0;
    let mut clip_p_total = 0.0;
    let mut min_rho_preclip = state.rho.min_value();
    let mut min_p_preclip = state.pressure.min_value();
    let mut last_recorded_step: Option<u64> = None;

    // a record can fail even on a finite state (overflowing tendency);
    // that is the same signal as a non-finite state
    fn emit_record(
        rc: &RunConfig,
        state: &State,
        step_count: u64,
        last_dt: Option<f64>,
        clip_rho_total: f64,
        clip_p_total: f64,
        records: &mut Vec<DiagnosticRecord>,
        last_recorded_step: &mut Option<u64>,
        observer: &mut dyn RunObserver,
    ) -> bool {
        if *last_recorded_step == Some(step_count) {
            return true;
        }
        match diagnostics::collect_record(
            state,
            step_count,
            last_dt,
            Some(clip_rho_total),
            Some(clip_p_total),
            rc.q_tilde,
        ) {
            Ok(rec) => {
                observer.on_record(&rec, state);
                records.push(rec);
                *last_recorded_step = Some(step_count);
                true
            }
            Err(_) => false,
        }
    }

    let verdict = loop {
        if !state.is_finite() {
            break Verdict::NonfiniteAbort;
        }
        if step_count % rc.output_every == 0
            && !emit_record(
                rc,
                &state,
                step_count,
                last_dt,
                clip_rho_total,
                clip_p_total,
                &mut records,
                &mut last_recorded_step,
                observer,
            )
        {
            break Verdict::NonfiniteAbort;
        }
        if rc.snapshot_every > 0 && step_count % rc.snapshot_every == 0 {
            let info = SnapshotInfo {
                step: step_count,
                t: state.t,
                dt: last_dt,
                clip_rho_mass: clip_rho_total,
                clip_p_mass: clip_p_total,
            };
            observer.on_snapshot(&state, &info);
            snapshots.push(info);
        }
        if blowup_monitor(&state) >= rc.blowup_factor * m0 {
            break Verdict::SuspectedBlowup;
        }
        if rc.t_end - state.t <= 1e-12 * rc.t_end {
            break Verdict::Completed;
        }
        let raw_dt = compute_dt(&state, rc.cfl);
        if raw_dt < rc.dt_min {
            break Verdict::DtCollapse;
        }
        let dt = raw_dt.min(rc.t_end - state.t);
        match step(&state, dt) {
            Ok(outcome) => {
                clip_rho_total += outcome.clip_rho_mass;
                clip_p_total += outcome.clip_p_mass;
                min_rho_preclip = min_rho_preclip.min(outcome.min_rho_preclip);
                min_p_preclip = min_p_preclip.min(outcome.min_p_preclip);
                state = outcome.state;
                step_count += 1;
                last_dt = Some(dt);
            }
            Err(CoreError::NonFinite(_)) => break Verdict::NonfiniteAbort,
            Err(e) => return Err(e),
        }
    };

    // terminal record regardless of cadence
    if state.is_finite() {
        let _ = emit_record(
            rc,
            &state,
            step_count,
            last_dt,
            clip_rho_total,
            clip_p_total,
            &mut records,
            &mut last_recorded_step,
            observer,
        );
    }

    Ok(Trajectory {
        verdict,
        records,
        snapshots,
        final_state: state,
        steps: step_count,
        initial_indicator: m0,
        clip_rho_mass: clip_rho_total,
        clip_p_mass: clip_p_total,
        min_rho_preclip,
        min_p_preclip,
    })
}
