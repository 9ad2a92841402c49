//! Quadrature grids and probability densities on them.

use std::sync::Arc;

use crate::{Error, Result};

/// Default tolerance on `|∫p dμ − 1|` when constructing a [`Density`].
pub const DEFAULT_NORMALIZATION_TOL: f64 = 1e-9;

/// Discretization of an interval with explicit quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lower: f64,
    upper: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Composite trapezoid rule on `n` equally spaced nodes including both endpoints.
    pub fn uniform(lower: f64, upper: f64, n: usize) -> Result<Grid> {
        if n < 2 {
            return Err(Error::Structural(format!("grid needs at least 2 nodes, got {n}")));
        }
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::Structural(format!("invalid interval [{lower}, {upper}]")));
        }
        let h = (upper - lower) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n)
            .map(|k| if k == n - 1 { upper } else { lower + k as f64 * h })
            .collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Grid::new(lower, upper, nodes, weights)
    }

    /// Grid with caller-supplied nodes and weights (alternative quadrature rules).
    pub fn new(lower: f64, upper: f64, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Grid> {
        if nodes.len() < 2 {
            return Err(Error::Structural("grid needs at least 2 nodes".into()));
        }
        if nodes.len() != weights.len() {
            return Err(Error::Structural(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Structural("nodes must be strictly increasing".into()));
        }
        if nodes[0] < lower || nodes[nodes.len() - 1] > upper {
            return Err(Error::Structural("nodes must lie inside [lower, upper]".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Structural("weights must be positive and finite".into()));
        }
        Ok(Grid { lower, upper, nodes, weights })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ_k w_k v_k`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values.len())?;
        Ok(self.integrate_unchecked(values))
    }

    pub(crate) fn integrate_unchecked(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Integral of `f(z_k, k)` over the grid.
    pub fn integrate_fn(&self, mut f: impl FnMut(f64, usize) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(|(k, (&z, &w))| w * f(z, k))
            .sum()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&z| f(z)).collect()
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.nodes.len() {
            return Err(Error::Structural(format!(
                "expected {} values, got {len}",
                self.nodes.len()
            )));
        }
        Ok(())
    }

    /// Same nodes (to 1e-12 relative) and same length.
    pub fn matches_nodes(&self, nodes: &[f64]) -> bool {
        nodes.len() == self.nodes.len()
            && self
                .nodes
                .iter()
                .zip(nodes)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
    }
}

/// Nonnegative node values integrating to one on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Density {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Density> {
        Density::with_tolerance(grid, values, DEFAULT_NORMALIZATION_TOL)
    }

    pub fn with_tolerance(grid: Arc<Grid>, values: Vec<f64>, tol: f64) -> Result<Density> {
        grid.check_len(values.len())?;
        if let Some(k) = values.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!(
                "density value {} at node {k} is not a finite nonnegative number",
                values[k]
            )));
        }
        let mass = grid.integrate_unchecked(&values);
        if (mass - 1.0).abs() > tol {
            return Err(Error::Domain(format!(
                "density integrates to {mass}, tolerance {tol}"
            )));
        }
        Ok(Density { grid, values })
    }

    /// Rescales nonnegative values to unit integral.
    pub fn normalize(grid: Arc<Grid>, values: Vec<f64>) -> Result<Density> {
        grid.check_len(values.len())?;
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain("values must be finite and nonnegative".into()));
        }
        let mass = grid.integrate_unchecked(&values);
        if !(mass > 0.0) {
            return Err(Error::Domain("values integrate to zero".into()));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        Density::new(grid, values)
    }

    pub fn uniform(grid: Arc<Grid>) -> Density {
        let n = grid.len();
        Density::normalize(grid, vec![1.0; n]).expect("positive weights")
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate_unchecked(&self.values)
    }

    /// `∫ z^k p(z) dμ(z)`.
    pub fn moment(&self, k: u32) -> f64 {
        self.grid
            .integrate_fn(|z, i| z.powi(k as i32) * self.values[i])
    }

    /// `(1 − t) self + t other`, which stays a density.
    pub fn mix(&self, other: &Density, t: f64) -> Result<Density> {
        if !self.grid.matches_nodes(other.grid.nodes()) {
            return Err(Error::Structural("densities live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        Density::new(self.grid.clone(), values)
    }
}
