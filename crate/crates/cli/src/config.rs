//! Run configuration: one TOML file with nested sections, dotted-path
//! overrides, and validation of every module invariant at load time.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use cnslab_core::dynamics::RunConfig;
use cnslab_core::fields::GridSpec;
use cnslab_core::state::{PhysParams, Scenario};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Master seed; all randomness (random scenarios, tracer jitter) flows
    /// from it.
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSection,
    pub params: ParamsSection,
    pub scenario: Scenario,
    pub run: RunConfig,
    #[serde(default)]
    pub monitors: MonitorsSection,
    #[serde(default)]
    pub tracers: TracersSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
    #[serde(default = "default_box_length")]
    pub box_length: f64,
    /// Per-axis lengths; overrides `box_length` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
}

fn default_box_length() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub mu: f64,
    pub lambda: f64,
    #[serde(default = "default_rho_floor")]
    pub rho_floor: f64,
    #[serde(default = "default_vacuum_threshold")]
    pub vacuum_threshold: f64,
}

fn default_rho_floor() -> f64 {
    cnslab_core::state::DEFAULT_RHO_FLOOR
}

fn default_vacuum_threshold() -> f64 {
    cnslab_core::state::DEFAULT_VACUUM_THRESHOLD
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorsSection {
    /// Which inequality monitors to evaluate during the run.
    #[serde(default = "default_monitors")]
    pub enabled: Vec<String>,
    /// Steps between monitor evaluations (on record steps).
    #[serde(default = "default_monitor_every")]
    pub every: u64,
}

impl Default for MonitorsSection {
    fn default() -> Self {
        MonitorsSection {
            enabled: default_monitors(),
            every: default_monitor_every(),
        }
    }
}

pub const KNOWN_MONITORS: &[&str] = &[
    "sobolev_flux",
    "sobolev_rho",
    "sup_bound_rho",
    "log_gradient",
    "pointwise_gradient",
    "lame_decomposition",
    "gronwall",
];

fn default_monitors() -> Vec<String> {
    KNOWN_MONITORS.iter().map(|s| s.to_string()).collect()
}

fn default_monitor_every() -> u64 {
    50
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracersSection {
    /// Number of tracer seeds per axis; 0 disables tracing.
    #[serde(default)]
    pub per_axis: usize,
    /// Steps between stored flow samples driving the tracer integration.
    #[serde(default = "default_sample_every")]
    pub sample_every: u64,
    /// RK4 substeps per sample interval.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

impl Default for TracersSection {
    fn default() -> Self {
        TracersSection {
            per_axis: 0,
            sample_every: default_sample_every(),
            substeps: default_substeps(),
        }
    }
}

fn default_sample_every() -> u64 {
    10
}

fn default_substeps() -> usize {
    2
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; the `--output` flag overrides it.
    #[serde(default)]
    pub directory: Option<String>,
}

impl Config {
    pub fn from_path(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_str_with_overrides(&text, overrides, seed)
    }

    pub fn from_str_with_overrides(
        text: &str,
        overrides: &[String],
        seed: Option<u64>,
    ) -> Result<Config> {
        let mut value: toml::Value = text.parse().context("parsing config TOML")?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        if let Some(s) = seed {
            value
                .as_table_mut()
                .context("config root must be a table")?
                .insert("seed".into(), toml::Value::Integer(s as i64));
        }
        let config: Config = value.try_into().context("deserializing config")?;
        config.validate()?;
        Ok(config)
    }

    /// Validate every module invariant; returns warnings to be logged.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        self.grid_spec().context("grid section")?;
        let params = self.phys_params().context("params section")?;
        self.run
            .validate()
            .map_err(|e| anyhow::anyhow!("run section: {e}"))?;
        if !params.concentration_bound_holds(self.grid.dim) {
            warnings.push(format!(
                "mu <= 4*lambda (mu={}, lambda={}): the 3D concentration criterion is only \
                 proven for mu > 4*lambda; the run proceeds but the indicator carries no \
                 proven continuation guarantee",
                params.mu, params.lambda
            ));
        }
        for m in &self.monitors.enabled {
            if !KNOWN_MONITORS.contains(&m.as_str()) {
                bail!("unknown monitor '{m}' (known: {KNOWN_MONITORS:?})");
            }
        }
        if self.monitors.every == 0 {
            bail!("monitors.every must be >= 1");
        }
        if self.tracers.per_axis > 0 {
            if self.tracers.sample_every == 0 {
                bail!("tracers.sample_every must be >= 1");
            }
            if self.tracers.substeps == 0 {
                bail!("tracers.substeps must be >= 1");
            }
        }
        Ok(warnings)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let spec = match &self.grid.lengths {
            Some(lengths) => GridSpec::with_lengths(self.grid.dim, self.grid.n, lengths),
            None => GridSpec::new(self.grid.dim, self.grid.n, self.grid.box_length),
        };
        spec.map_err(|e| anyhow::anyhow!("{e}"))
    }

    pub fn phys_params(&self) -> Result<PhysParams> {
        PhysParams::new(self.params.mu, self.params.lambda)
            .and_then(|p| p.with_floors(self.params.rho_floor, self.params.vacuum_threshold))
            .map_err(|e| anyhow::anyhow!("{e}"))
    }

    /// Scenario with the master seed injected into seeded variants.
    pub fn seeded_scenario(&self) -> Scenario {
        let mut sc = self.scenario.clone();
        if let Scenario::RandomSmooth { seed, .. } = &mut sc {
            *seed = self.seed;
        }
        sc
    }
}

/// Apply one `KEY=VALUE` override with a dotted path, e.g.
/// `run.t_end=0.25` or `scenario.amplitude=0.3`.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .with_context(|| format!("override '{spec}' must look like key.path=value"))?;
    // parse the value through a one-entry document so numbers, booleans,
    // and arrays keep their types; otherwise treat it as a string
    let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Value>() {
        Ok(doc) => doc
            .as_table()
            .and_then(|t| t.get("v").cloned())
            .unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut cursor = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cursor
            .as_table_mut()
            .with_context(|| format!("override path '{path}' hits a non-table at '{part}'"))?;
        if i == parts.len() - 1 {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        cursor = table
            .entry(part.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    Ok(())
}
