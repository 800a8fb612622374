//! Periodic structured grid, scalar/vector field storage, and the spectral
//! differential calculus (gradient, divergence, curl, Laplacian), quadrature,
//! norms, and 2/3-rule dealiased products that every other module computes on.
//!
//! Fields live in physical space; transforms are performed on demand. All
//! operations are pure and deterministic (fixed reduction order), so fields
//! can be shared freely across threads.

pub mod snapshot;
pub(crate) mod spectral;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Uniform collocated grid on the d-torus, `n` nodes per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    lengths: Vec<f64>,
}

impl GridSpec {
    /// Cubic torus of side `length`.
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self, CoreError> {
        Self::with_lengths(dim, n, &vec![length; dim])
    }

    /// Torus with one side length per axis.
    pub fn with_lengths(dim: usize, n: usize, lengths: &[f64]) -> Result<Self, CoreError> {
        if dim != 2 && dim != 3 {
            return Err(CoreError::InvalidGrid(format!(
                "dim must be 2 or 3, got {dim}"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(CoreError::InvalidGrid(format!(
                "n per axis must be a power of two >= 8, got {n}"
            )));
        }
        if lengths.len() != dim {
            return Err(CoreError::InvalidGrid(format!(
                "expected {dim} box lengths, got {}",
                lengths.len()
            )));
        }
        if lengths.iter().any(|&l| !l.is_finite() || l <= 0.0) {
            return Err(CoreError::InvalidGrid(
                "box lengths must be positive".into(),
            ));
        }
        Ok(GridSpec {
            dim,
            n,
            lengths: lengths.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn node_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.n as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim)
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.node_count() as f64
    }

    /// Multi-index of a flat node index, padded to three axes.
    pub fn decompose(&self, flat: usize) -> [usize; 3] {
        match self.dim {
            2 => [flat / self.n, flat % self.n, 0],
            _ => [
                flat / (self.n * self.n),
                (flat / self.n) % self.n,
                flat % self.n,
            ],
        }
    }

    /// Physical coordinates of a flat node index, padded to three axes.
    pub fn node_position(&self, flat: usize) -> [f64; 3] {
        let idx = self.decompose(flat);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.lengths[a] * idx[a] as f64 / self.n as f64;
        }
        x
    }
}

/// Real-valued grid samples of one scalar quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self, CoreError> {
        if values.len() != grid.node_count() {
            return Err(CoreError::InvalidGrid(format!(
                "value count {} does not match grid node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(CoreError::NonFinite("scalar field".into()));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![c; grid.node_count()],
        }
    }

    /// Sample a function of the node position (third coordinate is 0 in 2D).
    pub fn from_fn<F: Fn([f64; 3]) -> f64>(grid: &GridSpec, f: F) -> Self {
        let values = (0..grid.node_count())
            .map(|i| f(grid.node_position(i)))
            .collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Exact Fourier differentiation of the trigonometric interpolant.
    /// Each component has exactly zero mean.
    pub fn gradient(&self) -> VectorField {
        let modes = spectral::Modes::new(&self.grid);
        let spec = spectral::forward(&self.grid, &self.values);
        let comps = (0..self.grid.dim())
            .map(|axis| ScalarField {
                grid: self.grid.clone(),
                values: spectral::deriv_from_spectrum(&self.grid, &modes, &spec, axis),
            })
            .collect();
        VectorField { components: comps }
    }

    /// Spectral Laplacian (`-|k|^2` multiplier).
    pub fn laplacian(&self) -> ScalarField {
        let modes = spectral::Modes::new(&self.grid);
        let spec = spectral::forward(&self.grid, &self.values);
        ScalarField {
            grid: self.grid.clone(),
            values: spectral::laplacian_from_spectrum(&self.grid, &modes, &spec),
        }
    }

    /// Torus quadrature: mean times volume; exact for resolved trigonometric
    /// polynomials.
    pub fn integrate(&self) -> f64 {
        self.mean() * self.grid.volume()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Grid-quadrature L^p norm; `p = infinity` is the max-abs norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64, CoreError> {
        if p.is_nan() || p < 1.0 {
            return Err(CoreError::InvalidArgument(format!(
                "lp_norm requires p >= 1, got {p}"
            )));
        }
        if p.is_infinite() {
            return Ok(self.sup_norm());
        }
        let dv = self.grid.cell_volume();
        let sum = self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>();
        Ok((sum * dv).powf(1.0 / p))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// Pointwise map into a new field.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &ScalarField, f: F) -> ScalarField {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// 2/3-rule spectral truncation of this field.
    pub fn dealias(&self) -> ScalarField {
        let modes = spectral::Modes::new(&self.grid);
        let mut spec = spectral::forward(&self.grid, &self.values);
        spectral::truncate_spectrum(&self.grid, &modes, &mut spec);
        ScalarField {
            grid: self.grid.clone(),
            values: spectral::inverse(&self.grid, spec),
        }
    }

    pub(crate) fn spectrum(&self) -> Vec<Complex64> {
        spectral::forward(&self.grid, &self.values)
    }

    pub(crate) fn from_values(grid: &GridSpec, values: Vec<f64>) -> ScalarField {
        debug_assert_eq!(values.len(), grid.node_count());
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }
}

/// Pointwise product with 2/3-rule spectral truncation applied to the result.
pub fn dealias_product(a: &ScalarField, b: &ScalarField) -> ScalarField {
    assert_eq!(a.grid, b.grid, "grid mismatch");
    a.zip_with(b, |x, y| x * y).dealias()
}

/// Divergence of a flux whose components are truncated by the 2/3 rule,
/// fused into one spectral round trip. Truncation and differentiation are
/// diagonal multipliers, so this equals `div` of the dealiased components.
pub fn divergence_dealiased(components: &[ScalarField]) -> ScalarField {
    let grid = components[0].grid().clone();
    assert_eq!(components.len(), grid.dim(), "component count mismatch");
    let modes = spectral::Modes::new(&grid);
    let spectra: Vec<_> = components
        .iter()
        .map(|c| {
            assert_eq!(c.grid(), &grid, "grid mismatch");
            let mut s = c.spectrum();
            spectral::truncate_spectrum(&grid, &modes, &mut s);
            s
        })
        .collect();
    ScalarField::from_values(
        &grid,
        spectral::divergence_from_spectra(&grid, &modes, &spectra),
    )
}

/// `dim` scalar components sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self, CoreError> {
        if components.is_empty() {
            return Err(CoreError::InvalidGrid(
                "vector field needs components".into(),
            ));
        }
        let grid = components[0].grid.clone();
        if components.len() != grid.dim() {
            return Err(CoreError::InvalidGrid(format!(
                "expected {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        if components.iter().any(|c| c.grid != grid) {
            return Err(CoreError::InvalidGrid("component grids differ".into()));
        }
        Ok(VectorField { components })
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        VectorField {
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    /// Sample a vector function of the node position.
    pub fn from_fn<F: Fn([f64; 3]) -> [f64; 3]>(grid: &GridSpec, f: F) -> Self {
        let mut comps: Vec<Vec<f64>> = (0..grid.dim())
            .map(|_| Vec::with_capacity(grid.node_count()))
            .collect();
        for i in 0..grid.node_count() {
            let v = f(grid.node_position(i));
            for (a, comp) in comps.iter_mut().enumerate() {
                comp.push(v[a]);
            }
        }
        VectorField {
            components: comps
                .into_iter()
                .map(|values| ScalarField::from_values(grid, values))
                .collect(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.components[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut ScalarField {
        &mut self.components[axis]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(ScalarField::is_finite)
    }

    /// Spectral divergence; the result has exactly zero mean.
    pub fn divergence(&self) -> ScalarField {
        let grid = self.grid().clone();
        let modes = spectral::Modes::new(&grid);
        let spectra: Vec<_> = self.components.iter().map(ScalarField::spectrum).collect();
        ScalarField {
            grid: grid.clone(),
            values: spectral::divergence_from_spectra(&grid, &modes, &spectra),
        }
    }

    /// Spectral curl: a vector field in 3D, the scalar `d1 u2 - d2 u1` in 2D.
    pub fn curl(&self) -> Vorticity {
        let grid = self.grid().clone();
        let modes = spectral::Modes::new(&grid);
        let spectra: Vec<_> = self.components.iter().map(ScalarField::spectrum).collect();
        let d = |comp: usize, axis: usize| {
            ScalarField::from_values(
                &grid,
                spectral::deriv_from_spectrum(&grid, &modes, &spectra[comp], axis),
            )
        };
        if grid.dim() == 2 {
            Vorticity::Scalar(d(1, 0).zip_with(&d(0, 1), |a, b| a - b))
        } else {
            let w0 = d(2, 1).zip_with(&d(1, 2), |a, b| a - b);
            let w1 = d(0, 2).zip_with(&d(2, 0), |a, b| a - b);
            let w2 = d(1, 0).zip_with(&d(0, 1), |a, b| a - b);
            Vorticity::Vector(VectorField {
                components: vec![w0, w1, w2],
            })
        }
    }

    /// Componentwise spectral Laplacian.
    pub fn vector_laplacian(&self) -> VectorField {
        VectorField {
            components: self.components.iter().map(ScalarField::laplacian).collect(),
        }
    }

    /// Full velocity-gradient tensor: `grad[i][j] = d_j u_i`.
    pub fn gradient_tensor(&self) -> Vec<VectorField> {
        self.components.iter().map(ScalarField::gradient).collect()
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let grid = self.grid().clone();
        let mut sq = vec![0.0; grid.node_count()];
        for comp in &self.components {
            for (s, v) in sq.iter_mut().zip(comp.values()) {
                *s += v * v;
            }
        }
        ScalarField {
            grid,
            values: sq.into_iter().map(f64::sqrt).collect(),
        }
    }

    /// Pointwise squared magnitude (no square root).
    pub fn magnitude_squared(&self) -> ScalarField {
        let grid = self.grid().clone();
        let mut sq = vec![0.0; grid.node_count()];
        for comp in &self.components {
            for (s, v) in sq.iter_mut().zip(comp.values()) {
                *s += v * v;
            }
        }
        ScalarField { grid, values: sq }
    }

    /// Max over nodes of the pointwise magnitude.
    pub fn sup_magnitude(&self) -> f64 {
        let mut m = 0.0_f64;
        let count = self.grid().node_count();
        for i in 0..count {
            let s: f64 = self
                .components
                .iter()
                .map(|c| c.values[i] * c.values[i])
                .sum();
            m = m.max(s);
        }
        m.sqrt()
    }

    /// L2 norm of the pointwise magnitude.
    pub fn l2_norm(&self) -> f64 {
        let dv = self.grid().cell_volume();
        let mut sum = 0.0;
        for comp in &self.components {
            sum += comp.values.iter().map(|v| v * v).sum::<f64>();
        }
        (sum * dv).sqrt()
    }

    /// Lp norm of the pointwise magnitude.
    pub fn lp_norm(&self, p: f64) -> Result<f64, CoreError> {
        self.magnitude().lp_norm(p)
    }
}

/// Curl output: scalar in 2D, vector in 3D.
#[derive(Debug, Clone)]
pub enum Vorticity {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl Vorticity {
    /// `curl` of the vorticity itself: in 3D the usual vector curl, in 2D the
    /// rotated gradient `(d2 w, -d1 w)` so that `lap u = grad div u - curl w`
    /// holds in both dimensions.
    pub fn curl_field(&self) -> VectorField {
        match self {
            Vorticity::Vector(w) => match w.curl() {
                Vorticity::Vector(v) => v,
                Vorticity::Scalar(_) => unreachable!("3D curl is a vector"),
            },
            Vorticity::Scalar(w) => {
                let g = w.gradient();
                VectorField {
                    components: vec![g.components[1].clone(), g.components[0].map(|v| -v)],
                }
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Vorticity::Scalar(w) => w.sup_norm(),
            Vorticity::Vector(w) => w.sup_magnitude(),
        }
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64, CoreError> {
        match self {
            Vorticity::Scalar(w) => w.lp_norm(p),
            Vorticity::Vector(w) => w.lp_norm(p),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Vorticity::Scalar(w) => w.is_finite(),
            Vorticity::Vector(w) => w.is_finite(),
        }
    }
}
