//! State representations in conserved variables, primitive/conserved
//! conversions with vacuum handling, initial-data scenario generators, and
//! the compatibility-condition evaluator.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::fields::snapshot::{self, SnapshotManifest};
use crate::fields::{GridSpec, ScalarField, VectorField};

pub const DEFAULT_RHO_FLOOR: f64 = 1e-10;
pub const DEFAULT_VACUUM_THRESHOLD: f64 = 1e-8;

/// Viscosity coefficients plus the numerical floors used around vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub mu: f64,
    pub lambda: f64,
    #[serde(default = "default_rho_floor")]
    pub rho_floor: f64,
    #[serde(default = "default_vacuum_threshold")]
    pub vacuum_threshold: f64,
}

fn default_rho_floor() -> f64 {
    DEFAULT_RHO_FLOOR
}

fn default_vacuum_threshold() -> f64 {
    DEFAULT_VACUUM_THRESHOLD
}

impl PhysParams {
    /// Validates `mu > 0` and `2 mu + 3 lambda >= 0`. The stricter condition
    /// `mu > 4 lambda` is not required here; see [`PhysParams::concentration_bound_holds`].
    pub fn new(mu: f64, lambda: f64) -> Result<Self, CoreError> {
        let p = PhysParams {
            mu,
            lambda,
            rho_floor: DEFAULT_RHO_FLOOR,
            vacuum_threshold: DEFAULT_VACUUM_THRESHOLD,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_floors(mut self, rho_floor: f64, vacuum_threshold: f64) -> Result<Self, CoreError> {
        self.rho_floor = rho_floor;
        self.vacuum_threshold = vacuum_threshold;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !self.mu.is_finite() || self.mu <= 0.0 {
            return Err(CoreError::InvalidParams(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if !self.lambda.is_finite() || 2.0 * self.mu + 3.0 * self.lambda < 0.0 {
            return Err(CoreError::InvalidParams(format!(
                "need 2*mu + 3*lambda >= 0, got mu={}, lambda={}",
                self.mu, self.lambda
            )));
        }
        if self.rho_floor < 0.0 || self.vacuum_threshold < 0.0 {
            return Err(CoreError::InvalidParams(
                "floors must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// In 3D the concentration criterion is only proven for `mu > 4 lambda`.
    /// Returns false when that hypothesis fails (a warning, not an error; in
    /// 2D no restriction is needed).
    pub fn concentration_bound_holds(&self, dim: usize) -> bool {
        dim == 2 || self.mu > 4.0 * self.lambda
    }
}

/// Conserved variables `(rho, m = rho u, P)` at one instant, plus grid and
/// physical parameters. Temperature is recovered as `P / rho` off vacuum
/// (the gas constant and heat capacity are normalized to one).
#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub rho: ScalarField,
    pub momentum: VectorField,
    pub pressure: ScalarField,
    pub params: PhysParams,
}

impl State {
    pub fn new(
        t: f64,
        rho: ScalarField,
        momentum: VectorField,
        pressure: ScalarField,
        params: PhysParams,
    ) -> Result<Self, CoreError> {
        params.validate()?;
        let s = State {
            t,
            rho,
            momentum,
            pressure,
            params,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let grid = self.rho.grid();
        if self.momentum.grid() != grid || self.pressure.grid() != grid {
            return Err(CoreError::InvalidGrid(
                "state fields on different grids".into(),
            ));
        }
        if !self.is_finite() {
            return Err(CoreError::NonFinite("state".into()));
        }
        if self.rho.min_value() < -1e-12 {
            return Err(CoreError::InvalidScenario(format!(
                "negative density: min rho = {}",
                self.rho.min_value()
            )));
        }
        if self.pressure.min_value() < -1e-12 {
            return Err(CoreError::InvalidScenario(format!(
                "negative pressure: min P = {}",
                self.pressure.min_value()
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        self.rho.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.momentum.is_finite() && self.pressure.is_finite()
    }

    /// Build a state from primitive variables `(rho, u, P)`.
    pub fn from_primitive(
        t: f64,
        rho: ScalarField,
        u: &VectorField,
        pressure: ScalarField,
        params: PhysParams,
    ) -> Result<Self, CoreError> {
        let comps = (0..u.dim())
            .map(|a| rho.zip_with(u.component(a), |r, v| r * v))
            .collect();
        let momentum = VectorField::new(comps)?;
        State::new(t, rho, momentum, pressure, params)
    }

    /// Velocity reconstruction `u = m / max(rho, rho_floor)`, zeroed where
    /// both density and momentum sit below the floor.
    pub fn velocity(&self) -> VectorField {
        let floor = self.params.rho_floor;
        let comps = (0..self.momentum.dim())
            .map(|a| {
                self.momentum.component(a).zip_with(&self.rho, |m, r| {
                    if r <= floor && m.abs() <= floor {
                        0.0
                    } else {
                        m / r.max(floor)
                    }
                })
            })
            .collect();
        VectorField::new(comps).expect("velocity components")
    }

    /// Largest momentum magnitude found on the vacuum set
    /// (`rho <= rho_floor`); nonzero values flag inconsistent data.
    pub fn vacuum_momentum(&self) -> f64 {
        let floor = self.params.rho_floor;
        let mut worst = 0.0_f64;
        for i in 0..self.grid().node_count() {
            if self.rho.values()[i] <= floor {
                let m2: f64 = (0..self.momentum.dim())
                    .map(|a| {
                        let m = self.momentum.component(a).values()[i];
                        m * m
                    })
                    .sum();
                worst = worst.max(m2);
            }
        }
        worst.sqrt()
    }

    /// Temperature `theta = P / rho` where `rho > vacuum_threshold`, zero on
    /// the vacuum set.
    pub fn temperature(&self) -> ScalarField {
        let thresh = self.params.vacuum_threshold;
        self.pressure
            .zip_with(&self.rho, |p, r| if r > thresh { p / r } else { 0.0 })
    }

    /// Fraction of nodes on the vacuum set.
    pub fn vacuum_fraction(&self) -> f64 {
        let thresh = self.params.vacuum_threshold;
        let count = self.rho.values().iter().filter(|&&r| r <= thresh).count();
        count as f64 / self.grid().node_count() as f64
    }

    /// Sup of the temperature over the complement of the vacuum set.
    pub fn sup_temperature(&self) -> f64 {
        let thresh = self.params.vacuum_threshold;
        let mut sup = 0.0_f64;
        for (p, r) in self.pressure.values().iter().zip(self.rho.values()) {
            if *r > thresh {
                sup = sup.max((p / r).abs());
            }
        }
        sup
    }

    /// Write the conserved fields plus manifest into `dir`.
    pub fn save_snapshot(&self, dir: &Path) -> Result<(), CoreError> {
        self.save_snapshot_with_meta(dir, None, None, None, None)
    }

    pub fn save_snapshot_with_meta(
        &self,
        dir: &Path,
        step: Option<u64>,
        dt: Option<f64>,
        clip_rho_mass: Option<f64>,
        clip_p_mass: Option<f64>,
    ) -> Result<(), CoreError> {
        let mut fields = vec!["rho".to_string()];
        for a in 0..self.momentum.dim() {
            fields.push(format!("m{a}"));
        }
        fields.push("p".to_string());
        let manifest = SnapshotManifest {
            grid: self.grid().clone(),
            time: self.t,
            fields,
            mu: self.params.mu,
            lambda: self.params.lambda,
            rho_floor: self.params.rho_floor,
            vacuum_threshold: self.params.vacuum_threshold,
            step,
            dt,
            clip_rho_mass,
            clip_p_mass,
        };
        snapshot::write_manifest(dir, &manifest)?;
        snapshot::write_field(dir, "rho", &self.rho)?;
        for a in 0..self.momentum.dim() {
            snapshot::write_field(dir, &format!("m{a}"), self.momentum.component(a))?;
        }
        snapshot::write_field(dir, "p", &self.pressure)?;
        Ok(())
    }

    /// Load a snapshot directory written by `save_snapshot`.
    pub fn load_snapshot(dir: &Path) -> Result<(Self, SnapshotManifest), CoreError> {
        let manifest = snapshot::read_manifest(dir)?;
        let grid = manifest.grid.clone();
        let rho = snapshot::read_field(dir, "rho", &grid)?;
        let comps = (0..grid.dim())
            .map(|a| snapshot::read_field(dir, &format!("m{a}"), &grid))
            .collect::<Result<Vec<_>, _>>()?;
        let momentum = VectorField::new(comps)?;
        let pressure = snapshot::read_field(dir, "p", &grid)?;
        let params = PhysParams {
            mu: manifest.mu,
            lambda: manifest.lambda,
            rho_floor: manifest.rho_floor,
            vacuum_threshold: manifest.vacuum_threshold,
        };
        let state = State::new(manifest.time, rho, momentum, pressure, params)?;
        Ok((state, manifest))
    }
}

/// Initial-data generators. Every scenario produces nonnegative density and
/// pressure with the regularity the solver expects at grid resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Scenario {
    /// Spatially constant state.
    Uniform {
        #[serde(default = "one")]
        rho: f64,
        #[serde(default)]
        velocity: Vec<f64>,
        #[serde(default = "one")]
        pressure: f64,
    },
    /// Unit density, `u = (a sin(2 pi y / L), 0, ...)`, constant pressure.
    Shear {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "one")]
        background_pressure: f64,
    },
    /// Smooth single-mode perturbation of a constant state along x.
    Acoustic {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "one")]
        background_rho: f64,
        #[serde(default = "one")]
        background_pressure: f64,
    },
    /// Isolated mass group: a Gaussian density bump smoothly cut to a
    /// (possibly zero) background, proportional pressure, and a smooth
    /// compactly supported velocity (negative `velocity` points inward).
    GaussianBumpVacuum {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default = "default_cutoff")]
        cutoff_radius: f64,
        #[serde(default = "default_background")]
        background: f64,
        #[serde(default = "default_pressure_ratio")]
        pressure_ratio: f64,
        #[serde(default)]
        velocity: f64,
    },
    /// Same bump over a non-vacuum constant far field.
    NonvacuumFarfield {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default = "half")]
        background_rho: f64,
        #[serde(default = "half")]
        background_pressure: f64,
    },
    /// Deterministic smooth trigonometric fields for verification runs.
    Manufactured {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// Seeded random low-mode smooth perturbation of the constant state;
    /// stays non-vacuum for amplitudes below one.
    RandomSmooth {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_max_mode")]
        max_mode: usize,
    },
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_amplitude() -> f64 {
    0.1
}
fn default_width() -> f64 {
    0.1
}
fn default_cutoff() -> f64 {
    0.35
}
fn default_background() -> f64 {
    1e-6
}
fn default_pressure_ratio() -> f64 {
    1.0
}
fn default_max_mode() -> usize {
    2
}

/// C-infinity step: 0 for s <= 0, 1 for s >= 1.
fn smooth_step(s: f64) -> f64 {
    let phi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = phi(s);
    let b = phi(1.0 - s);
    a / (a + b)
}

/// Squared distance to `center` under the minimum-image convention.
fn torus_dist_sq(grid: &GridSpec, x: &[f64; 3], center: &[f64; 3]) -> f64 {
    let mut r2 = 0.0;
    for a in 0..grid.dim() {
        let l = grid.length(a);
        let mut d = (x[a] - center[a]).abs() % l;
        if d > l / 2.0 {
            d = l - d;
        }
        r2 += d * d;
    }
    r2
}

/// Construct the `t = 0` state for a scenario.
pub fn make_scenario(
    sc: &Scenario,
    grid: &GridSpec,
    params: PhysParams,
) -> Result<State, CoreError> {
    params.validate()?;
    match sc {
        Scenario::Uniform {
            rho,
            velocity,
            pressure,
        } => {
            if *rho < 0.0 || *pressure < 0.0 {
                return Err(CoreError::InvalidScenario(
                    "uniform: rho and P must be >= 0".into(),
                ));
            }
            let mut vel = [0.0; 3];
            for (a, v) in velocity.iter().take(grid.dim()).enumerate() {
                vel[a] = *v;
            }
            let u = VectorField::from_fn(grid, |_| vel);
            State::from_primitive(
                0.0,
                ScalarField::constant(grid, *rho),
                &u,
                ScalarField::constant(grid, *pressure),
                params,
            )
        }
        Scenario::Shear {
            amplitude,
            background_pressure,
        } => {
            if *background_pressure < 0.0 {
                return Err(CoreError::InvalidScenario("shear: P must be >= 0".into()));
            }
            let ly = grid.length(1);
            let a = *amplitude;
            let u = VectorField::from_fn(grid, |x| {
                [a * (2.0 * std::f64::consts::PI * x[1] / ly).sin(), 0.0, 0.0]
            });
            State::from_primitive(
                0.0,
                ScalarField::constant(grid, 1.0),
                &u,
                ScalarField::constant(grid, *background_pressure),
                params,
            )
        }
        Scenario::Acoustic {
            amplitude,
            background_rho,
            background_pressure,
        } => {
            let a = *amplitude;
            if a.abs() >= *background_rho || a.abs() >= *background_pressure {
                return Err(CoreError::InvalidScenario(
                    "acoustic: amplitude must stay below the background".into(),
                ));
            }
            let lx = grid.length(0);
            let wave = |x: f64| (2.0 * std::f64::consts::PI * x / lx).sin();
            let rho = ScalarField::from_fn(grid, |x| background_rho + a * wave(x[0]));
            let p = ScalarField::from_fn(grid, |x| background_pressure + a * wave(x[0]));
            let u = VectorField::from_fn(grid, |x| [a * wave(x[0]), 0.0, 0.0]);
            State::from_primitive(0.0, rho, &u, p, params)
        }
        Scenario::GaussianBumpVacuum {
            amplitude,
            width,
            cutoff_radius,
            background,
            pressure_ratio,
            velocity,
        } => {
            if *amplitude <= 0.0 || *width <= 0.0 || *background < 0.0 || *pressure_ratio < 0.0 {
                return Err(CoreError::InvalidScenario(
                    "gaussian bump: need amplitude, width > 0 and background, ratio >= 0".into(),
                ));
            }
            let min_half = (0..grid.dim())
                .map(|a| grid.length(a) / 2.0)
                .fold(f64::INFINITY, f64::min);
            if *cutoff_radius <= *width || *cutoff_radius >= min_half {
                return Err(CoreError::InvalidScenario(
                    "gaussian bump: cutoff radius must lie between the width and half the box"
                        .into(),
                ));
            }
            let mut center = [0.0; 3];
            for a in 0..grid.dim() {
                center[a] = grid.length(a) / 2.0;
            }
            let (amp, w, rc, bg) = (*amplitude, *width, *cutoff_radius, *background);
            // transition band occupies the outer half of the cutoff radius
            let r_inner = 0.5 * rc;
            let cut = move |r: f64| 1.0 - smooth_step((r - r_inner) / (rc - r_inner));
            let bump = {
                let gr = grid.clone();
                move |x: &[f64; 3]| {
                    let r = torus_dist_sq(&gr, x, &center).sqrt();
                    amp * (-(r * r) / (w * w)).exp() * cut(r)
                }
            };
            let rho = ScalarField::from_fn(grid, |x| bg + bump(&x));
            let p = ScalarField::from_fn(grid, |x| pressure_ratio * (bg + bump(&x)));
            let v0 = *velocity;
            let gr = grid.clone();
            let u = VectorField::from_fn(grid, move |x| {
                let r = torus_dist_sq(&gr, &x, &center).sqrt();
                let profile = v0 / w * (-(r * r) / (w * w)).exp() * cut(r);
                let mut out = [0.0; 3];
                for a in 0..gr.dim() {
                    let l = gr.length(a);
                    let mut d = x[a] - center[a];
                    if d > l / 2.0 {
                        d -= l;
                    } else if d < -l / 2.0 {
                        d += l;
                    }
                    out[a] = profile * d;
                }
                out
            });
            State::from_primitive(0.0, rho, &u, p, params)
        }
        Scenario::NonvacuumFarfield {
            amplitude,
            width,
            background_rho,
            background_pressure,
        } => {
            if *background_rho <= 0.0 || *background_pressure <= 0.0 {
                return Err(CoreError::InvalidScenario(
                    "nonvacuum farfield: backgrounds must be positive".into(),
                ));
            }
            let mut center = [0.0; 3];
            for a in 0..grid.dim() {
                center[a] = grid.length(a) / 2.0;
            }
            let (amp, w) = (*amplitude, *width);
            let gr = grid.clone();
            let bump = move |x: &[f64; 3]| {
                let r2 = torus_dist_sq(&gr, x, &center);
                amp * (-r2 / (w * w)).exp()
            };
            let rho = ScalarField::from_fn(grid, |x| background_rho + bump(&x));
            let p = ScalarField::from_fn(grid, |x| background_pressure + bump(&x));
            let u = VectorField::zeros(grid);
            State::from_primitive(0.0, rho, &u, p, params)
        }
        Scenario::Manufactured { amplitude } => {
            let a = *amplitude;
            if a.abs() >= 1.0 {
                return Err(CoreError::InvalidScenario(
                    "manufactured: |amplitude| < 1".into(),
                ));
            }
            let tau = 2.0 * std::f64::consts::PI;
            let l0 = grid.length(0);
            let l1 = grid.length(1);
            let rho = ScalarField::from_fn(grid, |x| {
                1.0 + a * (tau * x[0] / l0).sin() * (tau * x[1] / l1).cos()
            });
            let p = ScalarField::from_fn(grid, |x| {
                1.0 + a * (tau * x[0] / l0).cos() * (tau * x[1] / l1).sin()
            });
            let u = VectorField::from_fn(grid, |x| {
                [
                    a * (tau * x[1] / l1).sin(),
                    a * (tau * x[0] / l0).sin(),
                    0.0,
                ]
            });
            State::from_primitive(0.0, rho, &u, p, params)
        }
        Scenario::RandomSmooth {
            seed,
            amplitude,
            max_mode,
        } => random_smooth_state(grid, params, *seed, *amplitude, *max_mode),
    }
}

/// Seeded random low-mode trigonometric state around `(rho, u, P) = (1, 0, 1)`.
///
/// Coefficients depend only on the seed (not on the grid), so the same seed
/// yields the same continuum fields at every resolution; the perturbation
/// sup is bounded by `amplitude` exactly.
pub fn random_smooth_state(
    grid: &GridSpec,
    params: PhysParams,
    seed: u64,
    amplitude: f64,
    max_mode: usize,
) -> Result<State, CoreError> {
    if amplitude.is_nan() || amplitude < 0.0 || amplitude >= 1.0 {
        return Err(CoreError::InvalidScenario(
            "random smooth: amplitude must lie in [0, 1)".into(),
        ));
    }
    if max_mode == 0 {
        return Err(CoreError::InvalidScenario(
            "random smooth: max_mode >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let mut draw_field = |grid: &GridSpec| -> ScalarField {
        // draw modes first so the rng stream does not depend on the grid
        let mm = max_mode as i64;
        let mut modes: Vec<([i64; 3], f64, f64)> = Vec::new();
        for m0 in -mm..=mm {
            for m1 in -mm..=mm {
                let m2_range: Vec<i64> = if dim == 3 {
                    (-mm..=mm).collect()
                } else {
                    vec![0]
                };
                for &m2 in &m2_range {
                    if m0 == 0 && m1 == 0 && m2 == 0 {
                        continue;
                    }
                    let coeff: f64 = rng.gen_range(-1.0..1.0);
                    let phase: f64 = rng.gen_range(0.0..(2.0 * std::f64::consts::PI));
                    modes.push(([m0, m1, m2], coeff, phase));
                }
            }
        }
        let total: f64 = modes.iter().map(|(_, c, _)| c.abs()).sum();
        let scale = if total > 0.0 { amplitude / total } else { 0.0 };
        let tau = 2.0 * std::f64::consts::PI;
        let lengths: Vec<f64> = (0..dim).map(|a| grid.length(a)).collect();
        ScalarField::from_fn(grid, |x| {
            modes
                .iter()
                .map(|(m, c, phi)| {
                    let arg: f64 = (0..dim)
                        .map(|a| tau * m[a] as f64 * x[a] / lengths[a])
                        .sum();
                    scale * c * (arg + phi).cos()
                })
                .sum()
        })
    };
    let rho = draw_field(grid).map(|v| 1.0 + v);
    let mut comps = Vec::with_capacity(dim);
    for _ in 0..dim {
        comps.push(draw_field(grid));
    }
    let u = VectorField::new(comps)?;
    let p = draw_field(grid).map(|v| 1.0 + v);
    State::from_primitive(0.0, rho, &u, p, params)
}

/// Seeded random state whose fields carry a full geometrically decaying
/// Fourier tail (`|coefficient| ~ decay^|m|`), mimicking an analytic
/// function. Unlike [`random_smooth_state`], the truncation error under
/// grid refinement stays above round-off over several doublings, which is
/// what resolution studies of the identity residuals need.
pub fn random_analytic_state(
    grid: &GridSpec,
    params: PhysParams,
    seed: u64,
    amplitude: f64,
    decay: f64,
    max_mode: usize,
) -> Result<State, CoreError> {
    if amplitude.is_nan() || amplitude < 0.0 || amplitude >= 1.0 {
        return Err(CoreError::InvalidScenario(
            "random analytic: amplitude must lie in [0, 1)".into(),
        ));
    }
    if decay.is_nan() || decay <= 0.0 || decay >= 1.0 {
        return Err(CoreError::InvalidScenario(
            "random analytic: decay in (0, 1)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(17));
    let dim = grid.dim();
    let mm = max_mode as i64;
    let mut draw_field = |grid: &GridSpec| -> ScalarField {
        let mut modes: Vec<([i64; 3], f64, f64)> = Vec::new();
        for m0 in -mm..=mm {
            for m1 in -mm..=mm {
                let m2_range: Vec<i64> = if dim == 3 {
                    (-mm..=mm).collect()
                } else {
                    vec![0]
                };
                for &m2 in &m2_range {
                    if m0 == 0 && m1 == 0 && m2 == 0 {
                        continue;
                    }
                    let order = m0.abs().max(m1.abs()).max(m2.abs()) as i32;
                    let coeff: f64 = rng.gen_range(-1.0..1.0) * decay.powi(order);
                    let phase: f64 = rng.gen_range(0.0..(2.0 * std::f64::consts::PI));
                    modes.push(([m0, m1, m2], coeff, phase));
                }
            }
        }
        let total: f64 = modes.iter().map(|(_, c, _)| c.abs()).sum();
        let scale = if total > 0.0 { amplitude / total } else { 0.0 };
        let tau = 2.0 * std::f64::consts::PI;
        let lengths: Vec<f64> = (0..dim).map(|a| grid.length(a)).collect();
        ScalarField::from_fn(grid, |x| {
            modes
                .iter()
                .map(|(m, c, phi)| {
                    let arg: f64 = (0..dim)
                        .map(|a| tau * m[a] as f64 * x[a] / lengths[a])
                        .sum();
                    scale * c * (arg + phi).cos()
                })
                .sum()
        })
    };
    let rho = draw_field(grid).map(|v| 1.0 + v);
    let mut comps = Vec::with_capacity(dim);
    for _ in 0..dim {
        comps.push(draw_field(grid));
    }
    let u = VectorField::new(comps)?;
    let p = draw_field(grid).map(|v| 1.0 + v);
    State::from_primitive(0.0, rho, &u, p, params)
}

/// Result of the compatibility-condition evaluation at `t = 0`.
#[derive(Debug, Clone)]
pub struct CompatibilityReport {
    /// `g = (-mu lap u0 - (mu+lambda) grad div u0 + grad P0) / sqrt(rho0)`
    /// off vacuum, zero on the vacuum set.
    pub g: VectorField,
    /// L2 norm of `g`.
    pub norm_g: f64,
    /// Sup of the raw left-hand side magnitude over the vacuum set.
    pub vacuum_residual_sup: f64,
    /// Fraction of nodes on the vacuum set.
    pub vacuum_fraction: f64,
}

/// Evaluate the compatibility condition
/// `-mu lap u0 - (mu+lambda) grad div u0 + grad P0 = sqrt(rho0) g`.
pub fn compatibility_residual(s: &State) -> CompatibilityReport {
    let u = s.velocity();
    let lap = u.vector_laplacian();
    let grad_div = u.divergence().gradient();
    let grad_p = s.pressure.gradient();
    let mu = s.params.mu;
    let lam = s.params.lambda;
    let thresh = s.params.vacuum_threshold;
    let dim = u.dim();
    let grid = s.grid().clone();

    let lhs: Vec<ScalarField> = (0..dim)
        .map(|a| {
            let l = lap.component(a);
            let gd = grad_div.component(a);
            let gp = grad_p.component(a);
            let vals = (0..grid.node_count())
                .map(|i| -mu * l.values()[i] - (mu + lam) * gd.values()[i] + gp.values()[i])
                .collect();
            ScalarField::from_values(&grid, vals)
        })
        .collect();

    let mut vacuum_residual_sup = 0.0_f64;
    let mut vacuum_count = 0usize;
    let g_comps: Vec<ScalarField> = (0..dim)
        .map(|a| lhs[a].zip_with(&s.rho, |l, r| if r > thresh { l / r.sqrt() } else { 0.0 }))
        .collect();
    for i in 0..grid.node_count() {
        if s.rho.values()[i] <= thresh {
            vacuum_count += 1;
            let mag2: f64 = lhs.iter().map(|c| c.values()[i] * c.values()[i]).sum();
            vacuum_residual_sup = vacuum_residual_sup.max(mag2.sqrt());
        }
    }
    let g = VectorField::new(g_comps).expect("compatibility g components");
    let norm_g = g.l2_norm();
    CompatibilityReport {
        g,
        norm_g,
        vacuum_residual_sup,
        vacuum_fraction: vacuum_count as f64 / grid.node_count() as f64,
    }
}
