//! The `run` subcommand: scenario dispatch, the observed simulation loop,
//! monitor evaluation, tracer post-processing, and artifact writing.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use cnslab_core::diagnostics::{self, DiagnosticRecord};
use cnslab_core::dynamics::{self, RunObserver, SnapshotInfo, Trajectory, Verdict};
use cnslab_core::estimates::{self, GronwallLedger};
use cnslab_core::lagrangian::{self, FlowSample};
use cnslab_core::lame;
use cnslab_core::state::{make_scenario, State};

use crate::config::Config;
use crate::output::{
    self, ConservationBudget, IndicatorSummary, NdjsonWriter, StreamLine, TracerCheckSummary,
    VerdictDocument,
};

pub struct RunArtifacts {
    pub verdict: Verdict,
    pub output_dir: PathBuf,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

struct StreamingObserver<'a> {
    writer: &'a mut NdjsonWriter,
    config: &'a Config,
    output_dir: &'a Path,
    flow_samples: Vec<FlowSample>,
    errors: Vec<anyhow::Error>,
}

impl StreamingObserver<'_> {
    fn monitors(&mut self, record: &DiagnosticRecord, state: &State) -> Result<()> {
        let enabled = &self.config.monitors.enabled;
        let q_tilde = self.config.run.q_tilde;
        let mk_line = |report| StreamLine::Monitor {
            t: record.t,
            step: record.step,
            report,
        };
        if enabled.iter().any(|m| m == "sobolev_flux") {
            let flux = diagnostics::effective_viscous_flux(state);
            self.writer
                .write(&mk_line(estimates::sobolev_ratio(&flux)))?;
        }
        if enabled.iter().any(|m| m == "sobolev_rho") {
            self.writer
                .write(&mk_line(estimates::sobolev_ratio(&state.rho)))?;
        }
        if enabled.iter().any(|m| m == "sup_bound_rho") {
            let rep = estimates::sup_bound_ratio(&state.rho, 2.0, q_tilde)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            self.writer.write(&mk_line(rep))?;
        }
        if enabled.iter().any(|m| m == "log_gradient") {
            let rep = estimates::log_gradient_monitor(&state.velocity(), q_tilde)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            self.writer.write(&mk_line(rep))?;
        }
        if enabled.iter().any(|m| m == "pointwise_gradient") {
            let v = estimates::pointwise_gradient_inequality(&state.velocity());
            self.writer.write(&StreamLine::PointwiseGradient {
                t: record.t,
                step: record.step,
                max_violation: v,
            })?;
        }
        if enabled.iter().any(|m| m == "lame_decomposition") {
            let dec = lame::decompose_velocity(state).map_err(|e| anyhow::anyhow!("{e}"))?;
            self.writer.write(&StreamLine::LameDecomposition {
                t: record.t,
                step: record.step,
                w_equation_residual: dec.w_equation_residual,
                v_solve_residual: dec.v_solve_residual,
            })?;
        }
        Ok(())
    }
}

impl RunObserver for StreamingObserver<'_> {
    fn on_record(&mut self, record: &DiagnosticRecord, state: &State) {
        if let Err(e) = self.writer.write(&StreamLine::Diag(record.clone())) {
            self.errors.push(e);
            return;
        }
        if record.step % self.config.monitors.every == 0 {
            if let Err(e) = self.monitors(record, state) {
                self.errors.push(e);
            }
        }
    }

    fn on_snapshot(&mut self, state: &State, info: &SnapshotInfo) {
        if self.config.run.snapshot_every > 0 {
            let dir = self
                .output_dir
                .join("snapshots")
                .join(format!("step_{:08}", info.step));
            if let Err(e) = state
                .save_snapshot_with_meta(
                    &dir,
                    Some(info.step),
                    info.dt,
                    Some(info.clip_rho_mass),
                    Some(info.clip_p_mass),
                )
                .map_err(|e| anyhow::anyhow!("{e}"))
            {
                self.errors.push(e);
            }
        }
    }
}

/// Execute one simulation from a validated config, writing all artifacts
/// into `output_dir`.
pub fn run_simulation(config: &Config, output_dir: &Path) -> Result<RunArtifacts> {
    let warnings = config.validate()?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    std::fs::create_dir_all(output_dir)
        .with_context(|| format!("creating output dir {}", output_dir.display()))?;

    let grid = config.grid_spec()?;
    let params = config.phys_params()?;
    let initial = make_scenario(&config.seeded_scenario(), &grid, params)
        .map_err(|e| anyhow::anyhow!("building scenario: {e}"))?;

    // initial compatibility report, written next to the stream
    let compat = cnslab_core::state::compatibility_residual(&initial);
    std::fs::write(
        output_dir.join("compatibility.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "norm_g": compat.norm_g,
            "vacuum_residual_sup": compat.vacuum_residual_sup,
            "vacuum_fraction": compat.vacuum_fraction,
        }))?,
    )?;

    let mut writer = NdjsonWriter::create(&output_dir.join("diagnostics.ndjson"))?;

    // tracer flow samples are collected by a separate cadence via a wrapper
    // run config that also drives disk snapshots; the loop must fire on the
    // gcd of the two cadences so neither misses its multiples
    let mut rc = config.run.clone();
    let tracer_on = config.tracers.per_axis > 0;
    if tracer_on {
        rc.snapshot_every = if rc.snapshot_every == 0 {
            config.tracers.sample_every
        } else {
            gcd(rc.snapshot_every, config.tracers.sample_every)
        };
    }

    let mut observer = StreamingObserver {
        writer: &mut writer,
        config,
        output_dir,
        flow_samples: Vec::new(),
        errors: Vec::new(),
    };

    // wrap the snapshot callback: collect flow samples at the tracer cadence
    struct Wrapper<'a> {
        inner: StreamingObserver<'a>,
        tracer_on: bool,
        sample_every: u64,
        disk_every: u64,
    }
    impl RunObserver for Wrapper<'_> {
        fn on_record(&mut self, record: &DiagnosticRecord, state: &State) {
            self.inner.on_record(record, state);
        }
        fn on_snapshot(&mut self, state: &State, info: &SnapshotInfo) {
            if self.tracer_on && info.step % self.sample_every == 0 {
                self.inner.flow_samples.push(FlowSample::from_state(state));
            }
            if self.disk_every > 0 && info.step % self.disk_every == 0 {
                self.inner.on_snapshot(state, info);
            }
        }
    }
    let mut wrapper = Wrapper {
        inner: observer,
        tracer_on,
        sample_every: config.tracers.sample_every,
        disk_every: config.run.snapshot_every,
    };

    let trajectory = dynamics::run_observed(initial, &rc, &mut wrapper)
        .map_err(|e| anyhow::anyhow!("run failed: {e}"))?;
    observer = wrapper.inner;

    if let Some(e) = observer.errors.into_iter().next() {
        return Err(e.context("output error during run"));
    }

    // tracer post-processing
    let mut tracer_summary = None;
    if tracer_on && observer.flow_samples.len() >= 2 {
        let seeds = lagrangian::lattice_seeds(&grid, config.tracers.per_axis);
        let tr = lagrangian::advect(&observer.flow_samples, &seeds, config.tracers.substeps)
            .map_err(|e| anyhow::anyhow!("tracer advection: {e}"))?;
        let report = lagrangian::pressure_formula_check(&tr, params.vacuum_threshold);
        output::write_tracer_csv(&output_dir.join("tracers.csv"), &tr)?;
        writer.write(&StreamLine::TracerCheck {
            tracers: tr.tracers.len(),
            excluded: report.excluded,
            max_rel_error: report.max_rel_error,
            min_rhs: report.min_rhs,
        })?;
        tracer_summary = Some(TracerCheckSummary {
            tracers: tr.tracers.len(),
            excluded: report.excluded,
            max_rel_error: report.max_rel_error,
            min_rhs: report.min_rhs,
        });
    }

    // logarithmic Gronwall ledger over the recorded series
    let mut gronwall_c_fit = None;
    if config.monitors.enabled.iter().any(|m| m == "gronwall") {
        let mut ledger = GronwallLedger::default();
        for r in &trajectory.records {
            ledger.push(r.t, r.grad_rho_lq, r.grad_p_lq, r.grad_udot_l2);
        }
        if ledger.len() >= 3 {
            let c_fit = estimates::gronwall_fit(&ledger).map_err(|e| anyhow::anyhow!("{e}"))?;
            writer.write(&StreamLine::Gronwall {
                samples: ledger.len(),
                c_fit,
            })?;
            gronwall_c_fit = Some(c_fit);
        }
    }

    output::write_csv(&output_dir.join("diagnostics.csv"), &trajectory.records)?;
    let doc = verdict_document(&trajectory, gronwall_c_fit, tracer_summary, warnings);
    output::write_verdict(&output_dir.join("verdict.json"), &doc)?;

    Ok(RunArtifacts {
        verdict: trajectory.verdict,
        output_dir: output_dir.to_path_buf(),
    })
}

fn verdict_document(
    trajectory: &Trajectory,
    gronwall_c_fit: Option<f64>,
    tracer_check: Option<TracerCheckSummary>,
    warnings: Vec<String>,
) -> VerdictDocument {
    let records = &trajectory.records;
    let first = records.first();
    let last = records.last();
    let mass_initial = first.map(|r| r.mass).unwrap_or(f64::NAN);
    let mass_final = last.map(|r| r.mass).unwrap_or(f64::NAN);
    let energy_initial = first.map(|r| r.total_energy).unwrap_or(f64::NAN);
    let energy_final = last.map(|r| r.total_energy).unwrap_or(f64::NAN);
    let indicator_max = records
        .iter()
        .map(|r| r.blowup_indicator)
        .fold(f64::NEG_INFINITY, f64::max);
    VerdictDocument {
        verdict: trajectory.verdict,
        t_final: trajectory.final_state.t,
        steps: trajectory.steps,
        indicator: IndicatorSummary {
            initial: trajectory.initial_indicator,
            max: indicator_max,
            final_value: last.map(|r| r.blowup_indicator).unwrap_or(f64::NAN),
        },
        conservation: ConservationBudget {
            mass_initial,
            mass_final,
            mass_drift_rel: ((mass_final - mass_initial) / mass_initial).abs(),
            energy_initial,
            energy_final,
            energy_drift_rel: ((energy_final - energy_initial) / energy_initial).abs(),
            clip_rho_mass: trajectory.clip_rho_mass,
            clip_p_mass: trajectory.clip_p_mass,
        },
        min_rho_preclip: trajectory.min_rho_preclip,
        min_p_preclip: trajectory.min_p_preclip,
        gronwall_c_fit,
        tracer_check,
        warnings,
    }
}
