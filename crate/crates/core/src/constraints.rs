//! Linear equality constraints, convex inequality constraints and the
//! feasible set they define.
//!
//! The normalization `∫p dμ = 1` is never listed among the equalities. It is
//! always present and occupies the last slot of every equality residual and
//! multiplier vector.

use std::fmt;
use std::sync::Arc;

use crate::density::Grid;
use crate::functionals::{self, Convexity, FunctionalSpec};
use crate::{Error, Result};

pub const DEFAULT_TOL_EQ: f64 = 1e-8;
pub const DEFAULT_TOL_INEQ: f64 = 1e-8;

/// `∫ φ p dμ − c = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEqualityConstraint {
    phi: Vec<f64>,
    c: f64,
}

impl LinearEqualityConstraint {
    pub fn new(grid: &Grid, phi: Vec<f64>, c: f64) -> Result<Self> {
        grid.check_len(phi.len())?;
        if phi.iter().any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(Error::Config("φ and c must be finite".into()));
        }
        Ok(LinearEqualityConstraint { phi, c })
    }

    pub fn from_fn(grid: &Grid, phi: impl Fn(f64) -> f64, c: f64) -> Result<Self> {
        LinearEqualityConstraint::new(grid, grid.sample(phi), c)
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn target(&self) -> f64 {
        self.c
    }

    fn residual(&self, grid: &Grid, p: &[f64]) -> f64 {
        grid.integrate_fn(|_, k| self.phi[k] * p[k]) - self.c
    }
}

/// `Ψ[p] ≤ 0` for a differentiable convex functional `Ψ`.
#[derive(Debug, Clone)]
pub struct InequalityConstraint {
    spec: FunctionalSpec,
}

impl InequalityConstraint {
    pub fn new(spec: FunctionalSpec) -> Self {
        InequalityConstraint { spec }
    }

    /// `∫ φ p dμ − bound ≤ 0`.
    pub fn moment(grid: Arc<Grid>, phi: Vec<f64>, bound: f64) -> Result<Self> {
        let spec = functionals::linear(grid, phi)?
            .with_offset(-bound)
            .with_name("moment");
        Ok(InequalityConstraint { spec })
    }

    /// `F[p] − radius ≤ 0` for a divergence (or any convex) functional `F`.
    pub fn ball(spec: FunctionalSpec, radius: f64) -> Self {
        InequalityConstraint { spec: spec.with_offset(-radius) }
    }

    pub fn spec(&self) -> &FunctionalSpec {
        &self.spec
    }

    /// Moment bounds are affine; divergence balls are not.
    pub fn is_affine(&self) -> bool {
        self.spec.convexity() == Convexity::Affine
    }
}

/// Objective plus constraints: minimize `F[p]` over the feasible set.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    grid: Arc<Grid>,
    objective: FunctionalSpec,
    equalities: Vec<LinearEqualityConstraint>,
    inequalities: Vec<InequalityConstraint>,
}

impl ProblemSpec {
    pub fn new(grid: Arc<Grid>, objective: FunctionalSpec) -> Result<Self> {
        if !grid.matches_nodes(objective.grid().nodes()) {
            return Err(Error::Structural("objective lives on a different grid".into()));
        }
        if objective.convexity() == Convexity::Affine {
            return Err(Error::Config(format!(
                "objective {} is affine; a convex objective is required",
                objective.name()
            )));
        }
        Ok(ProblemSpec { grid, objective, equalities: Vec::new(), inequalities: Vec::new() })
    }

    pub fn with_equality(mut self, c: LinearEqualityConstraint) -> Result<Self> {
        self.grid.check_len(c.phi.len())?;
        self.equalities.push(c);
        Ok(self)
    }

    pub fn with_inequality(mut self, c: InequalityConstraint) -> Result<Self> {
        if !self.grid.matches_nodes(c.spec.grid().nodes()) {
            return Err(Error::Structural("inequality lives on a different grid".into()));
        }
        self.inequalities.push(c);
        Ok(self)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn objective(&self) -> &FunctionalSpec {
        &self.objective
    }

    pub fn equalities(&self) -> &[LinearEqualityConstraint] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[InequalityConstraint] {
        &self.inequalities
    }

    /// Number of user equalities (the normalization is not counted).
    pub fn m(&self) -> usize {
        self.equalities.len()
    }

    pub fn n(&self) -> usize {
        self.inequalities.len()
    }
}

/// `[∫φ_1 p − c_1, …, ∫φ_m p − c_m, ∫p − 1]`.
pub fn equality_residuals(problem: &ProblemSpec, p: &[f64]) -> Result<Vec<f64>> {
    let grid = problem.grid();
    grid.check_len(p.len())?;
    let mut out: Vec<f64> = problem.equalities.iter().map(|c| c.residual(grid, p)).collect();
    out.push(grid.integrate_unchecked(p) - 1.0);
    Ok(out)
}

/// `[Ψ_1[p], …, Ψ_n[p]]`.
pub fn inequality_values(problem: &ProblemSpec, p: &[f64]) -> Result<Vec<f64>> {
    problem.grid().check_len(p.len())?;
    problem.inequalities.iter().map(|c| c.spec.value(p)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// User equality `i` (0-based).
    Equality { index: usize, residual: f64 },
    Normalization { residual: f64 },
    Inequality { index: usize, value: f64 },
    Negative { node: usize, value: f64 },
    /// A constraint functional could not be evaluated.
    Undefined { index: usize, reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Equality { index, residual } => {
                write!(f, "equality {} residual {residual:e}", index + 1)
            }
            Violation::Normalization { residual } => write!(f, "normalization residual {residual:e}"),
            Violation::Inequality { index, value } => {
                write!(f, "inequality {} value {value:e}", index + 1)
            }
            Violation::Negative { node, value } => write!(f, "negative value {value:e} at node {node}"),
            Violation::Undefined { index, reason } => {
                write!(f, "inequality {} undefined: {reason}", index + 1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub equality_residuals: Vec<f64>,
    pub inequality_values: Vec<f64>,
    /// `max_i |Φ_i[p]|` including the normalization.
    pub max_equality_violation: f64,
    /// `max(0, max_j Ψ_j[p])`.
    pub max_inequality_violation: f64,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn normalization_residual(&self) -> f64 {
        *self.equality_residuals.last().expect("normalization slot")
    }
}

pub fn is_feasible(problem: &ProblemSpec, p: &[f64], tol_eq: f64, tol_ineq: f64) -> Result<FeasibilityReport> {
    let eq = equality_residuals(problem, p)?;
    let mut violations = Vec::new();
    let m = problem.m();
    for (i, &r) in eq.iter().enumerate() {
        if !(r.abs() <= tol_eq) {
            violations.push(if i == m {
                Violation::Normalization { residual: r }
            } else {
                Violation::Equality { index: i, residual: r }
            });
        }
    }
    let mut ineq = Vec::with_capacity(problem.n());
    for (j, c) in problem.inequalities.iter().enumerate() {
        match c.spec.value(p) {
            Ok(v) => {
                if !(v <= tol_ineq) {
                    violations.push(Violation::Inequality { index: j, value: v });
                }
                ineq.push(v);
            }
            Err(e) => {
                violations.push(Violation::Undefined { index: j, reason: e.to_string() });
                ineq.push(f64::INFINITY);
            }
        }
    }
    if let Some((node, &value)) = p.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        violations.push(Violation::Negative { node, value });
    }
    let max_eq = eq.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let max_ineq = ineq.iter().fold(0.0f64, |a, v| a.max(*v));
    Ok(FeasibilityReport {
        feasible: violations.is_empty(),
        equality_residuals: eq,
        inequality_values: ineq,
        max_equality_violation: max_eq,
        max_inequality_violation: max_ineq,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Density;
    use crate::functionals::{neg_shannon, relative_entropy_first};

    fn sym() -> Arc<Grid> {
        Arc::new(Grid::uniform(-1.0, 1.0, 2001).unwrap())
    }

    #[test]
    fn normalization_only() {
        let g = sym();
        let pr = ProblemSpec::new(g.clone(), neg_shannon(g.clone())).unwrap();
        let r = equality_residuals(&pr, Density::uniform(g).values()).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].abs() < 1e-9);
    }

    #[test]
    fn moment_residuals_on_uniform() {
        let g = sym();
        let pr = ProblemSpec::new(g.clone(), neg_shannon(g.clone()))
            .unwrap()
            .with_equality(LinearEqualityConstraint::from_fn(&g, |z| z, 0.0).unwrap())
            .unwrap()
            .with_equality(LinearEqualityConstraint::from_fn(&g, |z| z * z, 1.0 / 3.0).unwrap())
            .unwrap();
        let r = equality_residuals(&pr, Density::uniform(g).values()).unwrap();
        assert_eq!(r.len(), 3);
        assert!(r[0].abs() < 1e-12);
        assert!(r[1].abs() < 1e-6);
    }

    #[test]
    fn inequality_values_on_uniform() {
        let g = sym();
        let u = Density::uniform(g.clone());
        let pr = ProblemSpec::new(g.clone(), neg_shannon(g.clone()))
            .unwrap()
            .with_inequality(InequalityConstraint::moment(g.clone(), g.sample(|z| z), 0.0).unwrap())
            .unwrap()
            .with_inequality(InequalityConstraint::moment(g.clone(), g.sample(|z| z * z), 1.0).unwrap())
            .unwrap()
            .with_inequality(InequalityConstraint::ball(
                relative_entropy_first(g.clone(), &u).unwrap(),
                0.1,
            ))
            .unwrap();
        let v = inequality_values(&pr, u.values()).unwrap();
        assert!(v[0].abs() < 1e-12);
        assert!((v[1] + 2.0 / 3.0).abs() < 1e-6);
        assert!((v[2] + 0.1).abs() < 1e-15);
        let rep = is_feasible(&pr, u.values(), DEFAULT_TOL_EQ, DEFAULT_TOL_INEQ).unwrap();
        assert!(rep.feasible, "{:?}", rep.violations);

        let scaled: Vec<f64> = u.values().iter().map(|v| v * 1.01).collect();
        let rep = is_feasible(&pr, &scaled, DEFAULT_TOL_EQ, DEFAULT_TOL_INEQ).unwrap();
        assert!(!rep.feasible);
        assert!((rep.normalization_residual() - 0.01).abs() < 1e-9);
        assert!(rep
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Normalization { .. })));
    }

    #[test]
    fn affine_objective_is_rejected() {
        let g = sym();
        let f = functionals::linear(g.clone(), vec![1.0; g.len()]).unwrap();
        assert!(matches!(ProblemSpec::new(g, f), Err(Error::Config(_))));
    }

    #[test]
    fn grid_mismatch_is_structural() {
        let g = sym();
        let pr = ProblemSpec::new(g.clone(), neg_shannon(g)).unwrap();
        assert!(matches!(equality_residuals(&pr, &[1.0; 5]), Err(Error::Structural(_))));
    }
}
