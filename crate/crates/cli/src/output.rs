//! Output artifacts: the append-only NDJSON diagnostics stream, the CSV
//! export with fixed column order, and the final verdict document.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use cnslab_core::diagnostics::DiagnosticRecord;
use cnslab_core::dynamics::Verdict;
use cnslab_core::estimates::InequalityReport;

/// One line of the diagnostics stream. Every line is independently
/// parseable; the stream is append-only and survives truncation.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamLine {
    Diag(DiagnosticRecord),
    Monitor {
        t: f64,
        step: u64,
        #[serde(flatten)]
        report: InequalityReport,
    },
    LameDecomposition {
        t: f64,
        step: u64,
        w_equation_residual: f64,
        v_solve_residual: f64,
    },
    PointwiseGradient {
        t: f64,
        step: u64,
        max_violation: f64,
    },
    TracerCheck {
        tracers: usize,
        excluded: usize,
        max_rel_error: f64,
        min_rhs: f64,
    },
    Gronwall {
        samples: usize,
        c_fit: f64,
    },
}

pub struct NdjsonWriter {
    out: BufWriter<File>,
}

impl NdjsonWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path)
            .with_context(|| format!("creating NDJSON stream {}", path.display()))?;
        Ok(NdjsonWriter {
            out: BufWriter::new(file),
        })
    }

    pub fn write(&mut self, line: &StreamLine) -> Result<()> {
        let json = serde_json::to_string(line).context("serializing stream line")?;
        self.out.write_all(json.as_bytes())?;
        self.out.write_all(b"\n")?;
        // flush per line so a crash leaves whole lines behind
        self.out.flush()?;
        Ok(())
    }
}

/// Fixed CSV column order for the plotting export.
pub const CSV_COLUMNS: &[&str] = &[
    "t",
    "step",
    "dt",
    "mass",
    "total_energy",
    "sup_rho",
    "sup_theta",
    "min_rho",
    "min_p",
    "min_theta",
    "vacuum_fraction",
    "blowup_indicator",
    "weighted_kinetic_q2",
    "weighted_kinetic_q4",
    "weighted_kinetic_q6",
    "dissipation_functional",
    "grad_u_l2",
    "q_tilde",
    "grad_rho_lq",
    "grad_p_lq",
    "grad_udot_l2",
    "momentum_identity_relres",
    "energy_law_relres",
    "energy_law_reliable",
    "vacuum_momentum_sup",
    "clip_rho_mass",
    "clip_p_mass",
];

pub fn write_csv(path: &Path, records: &[DiagnosticRecord]) -> Result<()> {
    let file =
        File::create(path).with_context(|| format!("creating CSV export {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", CSV_COLUMNS.join(","))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let row = [
            r.t.to_string(),
            r.step.to_string(),
            opt(r.dt),
            r.mass.to_string(),
            r.total_energy.to_string(),
            r.sup_rho.to_string(),
            r.sup_theta.to_string(),
            r.min_rho.to_string(),
            r.min_p.to_string(),
            r.min_theta.to_string(),
            r.vacuum_fraction.to_string(),
            r.blowup_indicator.to_string(),
            r.weighted_kinetic_q2.to_string(),
            r.weighted_kinetic_q4.to_string(),
            r.weighted_kinetic_q6.to_string(),
            r.dissipation_functional.to_string(),
            r.grad_u_l2.to_string(),
            r.q_tilde.to_string(),
            r.grad_rho_lq.to_string(),
            r.grad_p_lq.to_string(),
            r.grad_udot_l2.to_string(),
            r.momentum_identity_relres.to_string(),
            r.energy_law_relres.to_string(),
            r.energy_law_reliable.to_string(),
            r.vacuum_momentum_sup.to_string(),
            opt(r.clip_rho_mass),
            opt(r.clip_p_mass),
        ];
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Tracer trajectories export: one row per (tracer, time).
pub fn write_tracer_csv(path: &Path, tr: &cnslab_core::lagrangian::TracerSet) -> Result<()> {
    let file =
        File::create(path).with_context(|| format!("creating tracer CSV {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(
        out,
        "tracer,t,x0,x1,x2,div_accum,p_sampled,p_formula,heat_source"
    )?;
    for (ti, tracer) in tr.tracers.iter().enumerate() {
        let p0 = tracer.pressure[0];
        let mut integral = 0.0;
        for (j, &t) in tr.times.iter().enumerate() {
            if j > 0 {
                let dt = tr.times[j] - tr.times[j - 1];
                let f_prev = (2.0 * tracer.div_accum[j - 1]).exp() * tracer.heat_source[j - 1];
                let f_here = (2.0 * tracer.div_accum[j]).exp() * tracer.heat_source[j];
                integral += 0.5 * dt * (f_prev + f_here);
            }
            let formula = (-2.0 * tracer.div_accum[j]).exp() * (p0 + integral);
            let pos = tracer.positions[j];
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                ti,
                t,
                pos[0],
                pos[1],
                pos[2],
                tracer.div_accum[j],
                tracer.pressure[j],
                formula,
                tracer.heat_source[j]
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Final run summary written as `verdict.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct VerdictDocument {
    pub verdict: Verdict,
    pub t_final: f64,
    pub steps: u64,
    pub indicator: IndicatorSummary,
    pub conservation: ConservationBudget,
    pub min_rho_preclip: f64,
    pub min_p_preclip: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gronwall_c_fit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracer_check: Option<TracerCheckSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IndicatorSummary {
    pub initial: f64,
    pub max: f64,
    pub final_value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConservationBudget {
    pub mass_initial: f64,
    pub mass_final: f64,
    pub mass_drift_rel: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub energy_drift_rel: f64,
    pub clip_rho_mass: f64,
    pub clip_p_mass: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TracerCheckSummary {
    pub tracers: usize,
    pub excluded: usize,
    pub max_rel_error: f64,
    pub min_rhs: f64,
}

pub fn write_verdict(path: &Path, doc: &VerdictDocument) -> Result<()> {
    let json = serde_json::to_string_pretty(doc).context("serializing verdict")?;
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
