//! The `analyze` subcommand: recompute diagnostics and monitors offline from
//! stored snapshot directories.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use cnslab_core::diagnostics;
use cnslab_core::estimates;
use cnslab_core::lame;
use cnslab_core::state::State;

use crate::output::{write_csv, NdjsonWriter, StreamLine};

/// Locate snapshot directories: either `dir` itself holds a manifest, or its
/// `snapshots/` children do (run-output layout).
fn find_snapshots(dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = dir.join("manifest.json");
    if manifest.is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let root = if dir.join("snapshots").is_dir() {
        dir.join("snapshots")
    } else {
        dir.to_path_buf()
    };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(&root)
        .with_context(|| format!("reading snapshot root {}", root.display()))?
    {
        let path = entry?.path();
        if path.is_dir() && path.join("manifest.json").is_file() {
            out.push(path);
        }
    }
    out.sort();
    if out.is_empty() {
        bail!("no snapshot manifests under {}", dir.display());
    }
    Ok(out)
}

/// Recompute every diagnostic record (and the standard monitors) from the
/// snapshots in `input`, writing `analysis.ndjson` and `analysis.csv`
/// into `output_dir`. Grid/manifest mismatches abort; unreadable snapshots
/// are reported and skipped so partial directories still analyze cleanly.
pub fn analyze(input: &Path, output_dir: &Path, q_tilde: f64) -> Result<usize> {
    if q_tilde.is_nan() || q_tilde <= 3.0 || q_tilde > 6.0 {
        bail!("q_tilde must lie in (3, 6], got {q_tilde}");
    }
    let dirs = find_snapshots(input)?;
    std::fs::create_dir_all(output_dir)?;
    let mut writer = NdjsonWriter::create(&output_dir.join("analysis.ndjson"))?;
    let mut records = Vec::new();
    let mut analyzed = 0usize;
    let mut reference_grid = None;

    for dir in &dirs {
        let (state, manifest) = match State::load_snapshot(dir) {
            Ok(x) => x,
            Err(e) => {
                eprintln!("skipping {}: {e}", dir.display());
                continue;
            }
        };
        match &reference_grid {
            None => reference_grid = Some(state.grid().clone()),
            Some(g) => {
                if g != state.grid() {
                    bail!(
                        "snapshot {} grid differs from the first snapshot",
                        dir.display()
                    );
                }
            }
        }
        let step = manifest.step.unwrap_or(0);
        let record = diagnostics::collect_record(
            &state,
            step,
            manifest.dt,
            manifest.clip_rho_mass,
            manifest.clip_p_mass,
            q_tilde,
        )
        .map_err(|e| anyhow::anyhow!("{}: {e}", dir.display()))?;
        writer.write(&StreamLine::Diag(record.clone()))?;

        let flux = diagnostics::effective_viscous_flux(&state);
        writer.write(&StreamLine::Monitor {
            t: record.t,
            step,
            report: estimates::sobolev_ratio(&flux),
        })?;
        let log_rep = estimates::log_gradient_monitor(&state.velocity(), q_tilde)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        writer.write(&StreamLine::Monitor {
            t: record.t,
            step,
            report: log_rep,
        })?;
        let dec = lame::decompose_velocity(&state).map_err(|e| anyhow::anyhow!("{e}"))?;
        writer.write(&StreamLine::LameDecomposition {
            t: record.t,
            step,
            w_equation_residual: dec.w_equation_residual,
            v_solve_residual: dec.v_solve_residual,
        })?;

        records.push(record);
        analyzed += 1;
    }
    if analyzed == 0 {
        bail!("no readable snapshots under {}", input.display());
    }

    // ledger over whatever span the snapshots cover
    if records.len() >= 3 {
        let mut ledger = estimates::GronwallLedger::default();
        for r in &records {
            ledger.push(r.t, r.grad_rho_lq, r.grad_p_lq, r.grad_udot_l2);
        }
        let c_fit = estimates::gronwall_fit(&ledger).map_err(|e| anyhow::anyhow!("{e}"))?;
        writer.write(&StreamLine::Gronwall {
            samples: ledger.len(),
            c_fit,
        })?;
    }

    write_csv(&output_dir.join("analysis.csv"), &records)?;
    Ok(analyzed)
}
