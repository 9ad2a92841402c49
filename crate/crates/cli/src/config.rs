//! Run configuration: a TOML document describing the grid, the objective,
//! the constraints and solver settings.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use densopt::functionals::{self, FunctionalSpec, ScalarFn};
use densopt::kkt::{CandidateMode, Multipliers, Tolerances};
use densopt::sampling;
use densopt::solver::{ActiveSetStrategy, SolveOptions};
use densopt::{Convexity, Density, Error, Grid, InequalityConstraint, LinearEqualityConstraint, ProblemSpec};
use serde::{Deserialize, Serialize};

use crate::phi::Phi;

pub const MIN_NODES: usize = 16;

pub const FUNCTIONAL_NAMES: [&str; 8] =
    ["neg_shannon", "kl_first", "kl_second", "chi2", "bregman_square", "renyi_div", "power", "linear"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub objective: FunctionalConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub equality: Vec<EqualityConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inequality: Vec<InequalityConfig>,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub check: CheckConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: f64,
    pub upper: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ReferenceConfig {
    Uniform,
    Gaussian { mean: f64, sd: f64 },
    /// Density proportional to `exp(φ(z))`.
    Tilted { phi: Phi },
}

/// A built-in functional with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Phi>,
    /// Overrides the convexity class of the functional.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convexity: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualityConfig {
    pub phi: Phi,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InequalityConfig {
    /// `∫ φ p dμ ≤ bound`.
    Moment { phi: Phi, bound: f64 },
    /// `D[p] ≤ radius` for a divergence in its optimization argument.
    DivergenceBall {
        divergence: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<ReferenceConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        radius: f64,
    },
    /// `F[p] ≤ bound` for any built-in convex functional.
    CustomBuiltin {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<ReferenceConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phi: Option<Phi>,
        bound: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub mode: String,
    pub strategy: String,
    pub seed: u64,
    pub multiplier_tolerance: f64,
    pub tol_eq: f64,
    pub tol_ineq: f64,
    pub tol_stat: f64,
    pub tol_slack: f64,
    pub tol_theta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_lambda: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_nu: Option<Vec<f64>>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        let tol = Tolerances::default();
        let opts = SolveOptions::default();
        SolveConfig {
            mode: opts.mode.as_str().into(),
            strategy: opts.active_set_strategy.as_str().into(),
            seed: sampling::DEFAULT_SEED,
            multiplier_tolerance: opts.multiplier_tolerance,
            tol_eq: tol.eq,
            tol_ineq: tol.ineq,
            tol_stat: tol.stat,
            tol_slack: tol.slack,
            tol_theta: tol.theta,
            initial_lambda: None,
            initial_nu: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("densopt-out") }
    }
}

/// Sample sizes for `check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    /// Density pairs for `lemma1` and `convexity`.
    pub pairs: usize,
    /// Density/direction draws for `deriv`.
    pub samples: usize,
    pub epsilon: f64,
    pub floor: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { pairs: 1000, samples: 50, epsilon: 1e-5, floor: 1e-3 }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> densopt::Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> densopt::Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Structural checks that do not need the grid.
    pub fn validate(&self) -> densopt::Result<()> {
        if self.grid.nodes < MIN_NODES {
            return Err(Error::Config(format!("grid.nodes must be at least {MIN_NODES}, got {}", self.grid.nodes)));
        }
        check_name("objective.name", &self.objective.name)?;
        for (j, c) in self.inequality.iter().enumerate() {
            match c {
                InequalityConfig::DivergenceBall { divergence, .. } => {
                    check_name(&format!("inequality[{j}].divergence"), divergence)?
                }
                InequalityConfig::CustomBuiltin { name, .. } => check_name(&format!("inequality[{j}].name"), name)?,
                InequalityConfig::Moment { .. } => {}
            }
        }
        self.solve.mode.parse::<CandidateMode>()?;
        self.solve.strategy.parse::<ActiveSetStrategy>()?;
        if let Some(c) = &self.objective.convexity {
            c.parse::<Convexity>()?;
        }
        Ok(())
    }

    pub fn grid(&self) -> densopt::Result<Arc<Grid>> {
        Ok(Arc::new(Grid::uniform(self.grid.lower, self.grid.upper, self.grid.nodes)?))
    }

    pub fn objective_spec(&self, grid: &Arc<Grid>) -> densopt::Result<FunctionalSpec> {
        let spec = build_functional(grid, &self.objective.name, self.objective.alpha, &self.objective.reference, &self.objective.phi)?;
        match &self.objective.convexity {
            Some(c) => Ok(spec.with_declared_convexity(c.parse()?)),
            None => Ok(spec),
        }
    }

    pub fn problem(&self) -> densopt::Result<ProblemSpec> {
        let grid = self.grid()?;
        let mut problem = ProblemSpec::new(grid.clone(), self.objective_spec(&grid)?)?;
        for e in &self.equality {
            problem = problem.with_equality(LinearEqualityConstraint::from_fn(&grid, |z| e.phi.eval(z), e.c)?)?;
        }
        for c in &self.inequality {
            let constraint = match c {
                InequalityConfig::Moment { phi, bound } => {
                    InequalityConstraint::moment(grid.clone(), grid.sample(|z| phi.eval(z)), *bound)?
                }
                InequalityConfig::DivergenceBall { divergence, reference, alpha, radius } => {
                    let spec = build_functional(&grid, divergence, *alpha, reference, &None)?;
                    if !matches!(divergence.as_str(), "kl_first" | "kl_second" | "chi2" | "bregman_square" | "renyi_div") {
                        return Err(Error::Config(format!("`{divergence}` is not a divergence")));
                    }
                    InequalityConstraint::ball(spec, *radius)
                }
                InequalityConfig::CustomBuiltin { name, alpha, reference, phi, bound } => {
                    let spec = build_functional(&grid, name, *alpha, reference, phi)?;
                    InequalityConstraint::new(spec.with_offset(-bound))
                }
            };
            problem = problem.with_inequality(constraint)?;
        }
        Ok(problem)
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            eq: self.solve.tol_eq,
            ineq: self.solve.tol_ineq,
            stat: self.solve.tol_stat,
            slack: self.solve.tol_slack,
            theta: self.solve.tol_theta,
        }
    }

    pub fn solve_options(&self) -> densopt::Result<SolveOptions> {
        let initial_multipliers = match (&self.solve.initial_lambda, &self.solve.initial_nu) {
            (None, None) => None,
            (l, n) => Some(Multipliers::new(
                l.clone().unwrap_or_else(|| vec![0.0; self.equality.len() + 1]),
                n.clone().unwrap_or_else(|| vec![0.0; self.inequality.len()]),
            )),
        };
        Ok(SolveOptions {
            mode: self.solve.mode.parse()?,
            active_set_strategy: self.solve.strategy.parse()?,
            multiplier_tolerance: self.solve.multiplier_tolerance,
            initial_multipliers,
            seed: self.solve.seed,
            tolerances: self.tolerances(),
            ..SolveOptions::default()
        })
    }
}

fn check_name(field: &str, name: &str) -> densopt::Result<()> {
    if FUNCTIONAL_NAMES.contains(&name) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{field}: unknown functional `{name}` (expected one of {})",
            FUNCTIONAL_NAMES.join(", ")
        )))
    }
}

pub fn reference_density(grid: &Arc<Grid>, reference: &Option<ReferenceConfig>) -> densopt::Result<Density> {
    match reference {
        None | Some(ReferenceConfig::Uniform) => Ok(Density::uniform(grid.clone())),
        Some(ReferenceConfig::Gaussian { mean, sd }) => {
            if !(*sd > 0.0) {
                return Err(Error::Config(format!("reference sd must be positive, got {sd}")));
            }
            Density::normalize(grid.clone(), grid.sample(|z| (-0.5 * ((z - mean) / sd).powi(2)).exp()))
        }
        Some(ReferenceConfig::Tilted { phi }) => {
            let s = grid.sample(|z| phi.eval(z));
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Density::normalize(grid.clone(), s.into_iter().map(|v| (v - max).exp()).collect())
        }
    }
}

pub fn build_functional(
    grid: &Arc<Grid>,
    name: &str,
    alpha: Option<f64>,
    reference: &Option<ReferenceConfig>,
    phi: &Option<Phi>,
) -> densopt::Result<FunctionalSpec> {
    let alpha_or = |default: f64| alpha.unwrap_or(default);
    let refd = || reference_density(grid, reference);
    let g = grid.clone();
    match name {
        "neg_shannon" => Ok(functionals::neg_shannon(g)),
        "kl_first" => functionals::relative_entropy_first(g, &refd()?),
        "kl_second" => functionals::relative_entropy_second(g, &refd()?),
        "chi2" => functionals::chi_square(g, &refd()?),
        "bregman_square" => Ok(functionals::bregman(g, ScalarFn::square(), &refd()?)?.with_name("bregman_square")),
        "renyi_div" => functionals::renyi_divergence_second(g, alpha_or(2.0), &refd()?),
        "power" => functionals::power_functional(g, alpha_or(2.0)),
        "linear" => {
            let phi = phi.as_ref().ok_or_else(|| Error::Config("`linear` needs `phi`".into()))?;
            functionals::linear(g.clone(), g.sample(|z| phi.eval(z)))
        }
        other => Err(Error::Config(format!("unknown functional `{other}`"))),
    }
}
