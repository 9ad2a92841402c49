//! Multiplier search, closed-form Rényi oracles and property probes.
//!
//! [`solve`] looks for multipliers `(λ, ν)` whose primal candidate is feasible
//! and complementary. Inequalities are handled by active sets: on an active
//! set `A` each `Ψ_j` with `j ∈ A` is treated as an equality and `ν_j = 0`
//! off `A`. For a fixed active set the square system "constraint residuals of
//! the candidate vanish" is solved by a damped Newton iteration with a
//! finite-difference Jacobian.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::constraints::{self, InequalityConstraint, ProblemSpec};
use crate::density::{Density, Grid};
use crate::functionals::{self, FunctionalSpec};
use crate::kkt::{self, CandidateMode, KktCertificate, Multipliers, Tolerances};
use crate::sampling;
use crate::{Error, Result};

/// Largest inequality count accepted by [`ActiveSetStrategy::Enumerate`].
pub const MAX_ENUMERATED_INEQUALITIES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveSetStrategy {
    /// All subsets by increasing cardinality, lexicographic within a size.
    Enumerate,
    /// Add the most violated inequality or drop the most negative `ν`.
    Greedy,
}

impl std::str::FromStr for ActiveSetStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "enumerate" => Ok(ActiveSetStrategy::Enumerate),
            "greedy" => Ok(ActiveSetStrategy::Greedy),
            other => Err(Error::Parse(format!("unknown active-set strategy `{other}`"))),
        }
    }
}

impl ActiveSetStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            ActiveSetStrategy::Enumerate => "enumerate",
            ActiveSetStrategy::Greedy => "greedy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub mode: CandidateMode,
    pub active_set_strategy: ActiveSetStrategy,
    /// Convergence threshold on the max constraint residual of the inner solve.
    pub multiplier_tolerance: f64,
    /// Active sets tried (enumerate) or add/drop steps taken (greedy).
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    pub initial_multipliers: Option<Multipliers>,
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mode: CandidateMode::Corollary,
            active_set_strategy: ActiveSetStrategy::Enumerate,
            multiplier_tolerance: 1e-10,
            max_outer_iterations: 1 << MAX_ENUMERATED_INEQUALITIES,
            max_inner_iterations: 100,
            initial_multipliers: None,
            seed: sampling::DEFAULT_SEED,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub density: Density,
    pub multipliers: Multipliers,
    pub certificate: KktCertificate,
    /// Total inner Newton iterations over all active sets tried.
    pub iterations: usize,
    /// 0-based indices of the inequalities treated as equalities.
    pub active_set: Vec<usize>,
}

/// Outcome of one active set that did not certify.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub active_set: Vec<usize>,
    /// Max constraint residual at the last inner iterate (`inf` if none was valid).
    pub residual: f64,
    pub reason: String,
}

impl fmt::Display for Attempt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let set: Vec<String> = self.active_set.iter().map(|j| (j + 1).to_string()).collect();
        write!(f, "active set {{{}}}: residual {:e}, {}", set.join(","), self.residual, self.reason)
    }
}

/// No active set produced a certified solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveFailure {
    pub attempts: Vec<Attempt>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    /// The search ran to completion without a passing certificate.
    NoCertificate(SolveFailure),
    Invalid(Error),
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::NoCertificate(fail) => {
                writeln!(f, "no active set certified ({} tried)", fail.attempts.len())?;
                for a in &fail.attempts {
                    writeln!(f, "  {a}")?;
                }
                Ok(())
            }
            SolveError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SolveError {}

impl From<Error> for SolveError {
    fn from(e: Error) -> Self {
        SolveError::Invalid(e)
    }
}

struct InnerOutcome {
    mult: Multipliers,
    values: Vec<f64>,
    residual: f64,
    iterations: usize,
    converged: bool,
}

/// Minimizes the problem's objective over its feasible set.
pub fn solve(problem: &ProblemSpec, options: &SolveOptions) -> std::result::Result<SolveResult, SolveError> {
    let n = problem.n();
    if options.active_set_strategy == ActiveSetStrategy::Enumerate && n > MAX_ENUMERATED_INEQUALITIES {
        return Err(Error::Config(format!(
            "{n} inequalities exceed the enumeration limit of {MAX_ENUMERATED_INEQUALITIES}"
        ))
        .into());
    }
    if !problem.objective().is_local()
        || problem.inequalities().iter().any(|c| !c.spec().is_local())
    {
        return Err(Error::Config(
            "solve needs objective and inequality functionals with local derivatives".into(),
        )
        .into());
    }
    let start = match &options.initial_multipliers {
        Some(m) => {
            m.check_dims(problem)?;
            m.clone()
        }
        None => default_initial_multipliers(problem, options)?,
    };

    let mut attempts = Vec::new();
    let mut iterations = 0;
    let mut try_set = |active: &[usize], attempts: &mut Vec<Attempt>| -> Result<Option<(SolveResult, InnerOutcome)>> {
        let inner = solve_active_set(problem, options, &start, active)?;
        iterations += inner.iterations;
        if !inner.converged {
            attempts.push(Attempt {
                active_set: active.to_vec(),
                residual: inner.residual,
                reason: "inner solve did not converge".into(),
            });
            return Ok(None);
        }
        let cert = kkt::kkt_certificate(problem, &inner.values, &inner.mult, &options.tolerances)?;
        if !cert.pass {
            let failed: Vec<&str> = cert.failed_conditions().iter().map(|c| c.label()).collect();
            attempts.push(Attempt {
                active_set: active.to_vec(),
                residual: inner.residual,
                reason: format!("certificate failed: {}", failed.join(", ")),
            });
            return Ok(Some((placeholder_result(problem, cert, active), inner)));
        }
        let density = Density::new(problem.grid().clone(), inner.values.clone())?;
        let result = SolveResult {
            density,
            multipliers: inner.mult.clone(),
            certificate: cert,
            iterations: 0,
            active_set: active.to_vec(),
        };
        Ok(Some((result, inner)))
    };

    match options.active_set_strategy {
        ActiveSetStrategy::Enumerate => {
            let mut tried = 0;
            'outer: for size in 0..=n {
                for active in combinations(n, size) {
                    if tried >= options.max_outer_iterations {
                        break 'outer;
                    }
                    tried += 1;
                    if let Some((result, _)) = try_set(&active, &mut attempts)? {
                        if result.certificate.pass {
                            return Ok(SolveResult { iterations, ..result });
                        }
                    }
                }
            }
        }
        ActiveSetStrategy::Greedy => {
            let mut active: Vec<usize> = Vec::new();
            let mut seen: Vec<Vec<usize>> = Vec::new();
            for _ in 0..options.max_outer_iterations.max(1) {
                if seen.contains(&active) {
                    break;
                }
                seen.push(active.clone());
                let Some((result, inner)) = try_set(&active, &mut attempts)? else { break };
                if result.certificate.pass {
                    return Ok(SolveResult { iterations, ..result });
                }
                // drop the most negative multiplier, else add the most violated constraint
                let most_negative = active
                    .iter()
                    .copied()
                    .filter(|&j| inner.mult.nu[j] < -options.tolerances.slack)
                    .min_by(|&a, &b| inner.mult.nu[a].total_cmp(&inner.mult.nu[b]));
                if let Some(j) = most_negative {
                    active.retain(|&x| x != j);
                    continue;
                }
                let values = constraints::inequality_values(problem, &inner.values).unwrap_or_default();
                let most_violated = (0..n)
                    .filter(|j| !active.contains(j))
                    .filter(|&j| values.get(j).is_none_or(|v| *v > options.tolerances.ineq))
                    .max_by(|&a, &b| {
                        let va = values.get(a).copied().unwrap_or(f64::INFINITY);
                        let vb = values.get(b).copied().unwrap_or(f64::INFINITY);
                        va.total_cmp(&vb)
                    });
                match most_violated {
                    Some(j) => {
                        active.push(j);
                        active.sort_unstable();
                    }
                    None => break,
                }
            }
        }
    }
    Err(SolveError::NoCertificate(SolveFailure { attempts }))
}

fn placeholder_result(problem: &ProblemSpec, cert: KktCertificate, active: &[usize]) -> SolveResult {
    SolveResult {
        density: Density::uniform(problem.grid().clone()),
        multipliers: cert.multipliers.clone(),
        certificate: cert,
        iterations: 0,
        active_set: active.to_vec(),
    }
}

fn combinations(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            rec(j + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::with_capacity(size), &mut out);
    out
}

/// Candidate mass as a function of the normalization multiplier, other
/// multipliers fixed. Rejected candidates are unbounded, so they count as `+∞`.
fn candidate_mass(problem: &ProblemSpec, mult: &Multipliers, mode: CandidateMode) -> Result<f64> {
    match kkt::primal_candidate(problem, mult, mode, kkt::ROOT_TOL) {
        Ok(c) => Ok(problem.grid().integrate_unchecked(&c.values)),
        Err(Error::CandidateRejected { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Zero multipliers except `λ_{m+1}`, chosen by bisection so that the
/// unconstrained candidate integrates to one.
pub fn default_initial_multipliers(problem: &ProblemSpec, options: &SolveOptions) -> Result<Multipliers> {
    let mut mult = Multipliers::zeros(problem);
    let last = problem.m();
    let mut mass_at = |l: f64| -> Result<f64> {
        mult.lambda[last] = l;
        candidate_mass(problem, &mult, options.mode)
    };
    // mass is nonincreasing in λ_{m+1}
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut expand = 0;
    while mass_at(lo)? <= 1.0 {
        lo = 2.0 * lo - 1.0;
        expand += 1;
        if expand > 80 {
            return Err(Error::Domain("could not bracket the normalization multiplier".into()));
        }
    }
    while mass_at(hi)? >= 1.0 {
        hi = 2.0 * hi + 1.0;
        expand += 1;
        if expand > 160 {
            return Err(Error::Domain("could not bracket the normalization multiplier".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let mass = mass_at(mid)?;
        if (mass - 1.0).abs() <= 1e-14 {
            lo = mid;
            hi = mid;
            break;
        }
        if mass > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut out = Multipliers::zeros(problem);
    out.lambda[last] = 0.5 * (lo + hi);
    Ok(out)
}

/// Residuals of the square system for one active set.
fn residuals(
    problem: &ProblemSpec,
    options: &SolveOptions,
    mult: &Multipliers,
    active: &[usize],
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let cand = match kkt::primal_candidate(problem, mult, options.mode, kkt::ROOT_TOL) {
        Ok(c) => c,
        Err(Error::CandidateRejected { .. }) | Err(Error::Indeterminate { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut r = constraints::equality_residuals(problem, &cand.values)?;
    for &j in active {
        match problem.inequalities()[j].spec().value(&cand.values) {
            Ok(v) if v.is_finite() => r.push(v),
            _ => return Ok(None),
        }
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Ok(None);
    }
    Ok(Some((r, cand.values)))
}

fn pack(mult: &Multipliers, active: &[usize]) -> DVector<f64> {
    DVector::from_iterator(
        mult.lambda.len() + active.len(),
        mult.lambda.iter().copied().chain(active.iter().map(|&j| mult.nu[j])),
    )
}

fn unpack(x: &DVector<f64>, template: &Multipliers, active: &[usize]) -> Multipliers {
    let l = template.lambda.len();
    let mut nu = vec![0.0; template.nu.len()];
    for (i, &j) in active.iter().enumerate() {
        nu[j] = x[l + i];
    }
    Multipliers::new(x.rows(0, l).iter().copied().collect(), nu)
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn solve_active_set(
    problem: &ProblemSpec,
    options: &SolveOptions,
    start: &Multipliers,
    active: &[usize],
) -> Result<InnerOutcome> {
    let mut x = pack(start, active);
    let failed = |mult: Multipliers, residual: f64, iterations: usize| InnerOutcome {
        mult,
        values: Vec::new(),
        residual,
        iterations,
        converged: false,
    };
    let Some((mut r, mut values)) = residuals(problem, options, &unpack(&x, start, active), active)? else {
        return Ok(failed(start.clone(), f64::INFINITY, 0));
    };
    let dim = x.len();
    for it in 0..options.max_inner_iterations {
        if max_abs(&r) <= options.multiplier_tolerance {
            return Ok(InnerOutcome {
                mult: unpack(&x, start, active),
                values,
                residual: max_abs(&r),
                iterations: it,
                converged: true,
            });
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let h = 1e-6 * (1.0 + x[col].abs());
            let mut xp = x.clone();
            xp[col] += h;
            // one-sided difference; fall back to the other side if the candidate is rejected
            let (rp, hs) = match residuals(problem, options, &unpack(&xp, start, active), active)? {
                Some((rp, _)) => (rp, h),
                None => {
                    xp[col] = x[col] - h;
                    match residuals(problem, options, &unpack(&xp, start, active), active)? {
                        Some((rp, _)) => (rp, -h),
                        None => return Ok(failed(unpack(&x, start, active), max_abs(&r), it)),
                    }
                }
            };
            for row in 0..dim {
                jac[(row, col)] = (rp[row] - r[row]) / hs;
            }
        }
        let rv = DVector::from_column_slice(&r);
        let step = jac
            .clone()
            .lu()
            .solve(&(-&rv))
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .or_else(|| {
                // Levenberg–Marquardt fallback for a singular Jacobian
                let jt = jac.transpose();
                let jtj = &jt * &jac;
                let mu = 1e-10 * (1.0 + jtj.diagonal().amax());
                (jtj + DMatrix::identity(dim, dim) * mu).lu().solve(&(-(&jt * &rv)))
            });
        let Some(step) = step else {
            return Ok(failed(unpack(&x, start, active), max_abs(&r), it));
        };
        let current = norm(&r);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &x + &step * t;
            if let Some((rt, vt)) = residuals(problem, options, &unpack(&trial, start, active), active)? {
                if norm(&rt) < current {
                    x = trial;
                    r = rt;
                    values = vt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Ok(failed(unpack(&x, start, active), max_abs(&r), it + 1));
        }
    }
    let residual = max_abs(&r);
    Ok(InnerOutcome {
        mult: unpack(&x, start, active),
        converged: residual <= options.multiplier_tolerance,
        values,
        residual,
        iterations: options.max_inner_iterations,
    })
}

/// `β = 1/(3α − 1)`.
pub fn renyi_beta(alpha: f64) -> f64 {
    1.0 / (3.0 * alpha - 1.0)
}

/// Normalizer `A_α` of the Rényi maximizer at scale `σ`.
pub fn renyi_normalizer(alpha: f64, sigma: f64) -> Result<f64> {
    check_renyi_params(alpha, sigma)?;
    use statrs::function::gamma::ln_gamma;
    let r = alpha / (alpha - 1.0);
    let beta = renyi_beta(alpha);
    let log_a = ln_gamma(r + 0.5) - ln_gamma(r) + 0.5 * (beta * (alpha - 1.0)).ln()
        - 0.5 * std::f64::consts::PI.ln()
        - sigma.ln();
    Ok(log_a.exp())
}

fn check_renyi_params(alpha: f64, sigma: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("Rényi maximizer needs α > 1, got {alpha}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("σ must be positive, got {sigma}")));
    }
    Ok(())
}

/// `g_α(z) = A_α (1 − (α−1) β z²/σ²)₊^{1/(α−1)}`.
pub fn closed_form_renyi(alpha: f64, sigma: f64, z: f64) -> Result<f64> {
    let a = renyi_normalizer(alpha, sigma)?;
    let base = 1.0 - (alpha - 1.0) * renyi_beta(alpha) * z * z / (sigma * sigma);
    Ok(if base <= 0.0 { 0.0 } else { a * base.powf(1.0 / (alpha - 1.0)) })
}

/// Half-width of the support of `g_α`.
pub fn renyi_support_radius(alpha: f64, sigma: f64) -> f64 {
    sigma / ((alpha - 1.0) * renyi_beta(alpha)).sqrt()
}

/// Multipliers certifying `g_α` for the problem built by
/// [`renyi_maxent_problem`], in the stored sign convention
/// (`λ_{m+1} = −α A_α^{α−1}`).
pub fn renyi_oracle_multipliers(alpha: f64, sigma: f64) -> Result<Multipliers> {
    let a = renyi_normalizer(alpha, sigma)?;
    let lambda1 = alpha * a.powf(alpha - 1.0);
    let nu2 = (alpha - 1.0) * renyi_beta(alpha) * lambda1 / (sigma * sigma);
    Ok(Multipliers::new(vec![-lambda1], vec![0.0, nu2]))
}

/// Minimize `∫ p^α` subject to `∫ z p ≤ 0` and `∫ z² p ≤ σ²`.
pub fn renyi_maxent_problem(grid: Arc<Grid>, alpha: f64, sigma: f64) -> Result<ProblemSpec> {
    check_renyi_params(alpha, sigma)?;
    ProblemSpec::new(grid.clone(), functionals::power_functional(grid.clone(), alpha)?)?
        .with_inequality(InequalityConstraint::moment(grid.clone(), grid.sample(|z| z), 0.0)?)?
        .with_inequality(InequalityConstraint::moment(
            grid.clone(),
            grid.sample(|z| z * z),
            sigma * sigma,
        )?)
}

/// `G[q] − G[p] − ∫ δG/δp(p(z), z) (q(z) − p(z)) dμ`, nonnegative for convex `G`.
///
/// A node where the derivative at `p` is infinite and `q ≠ p` is a boundary
/// case and reported as a domain error.
pub fn verify_lemma1(spec: &FunctionalSpec, p: &Density, q: &Density) -> Result<f64> {
    if !p.grid().matches_nodes(q.grid().nodes()) || !spec.grid().matches_nodes(p.grid().nodes()) {
        return Err(Error::Structural("densities and functional live on different grids".into()));
    }
    let grad = spec.gradient(p.values())?;
    let w = spec.grid().weights();
    let mut linear = 0.0;
    for (k, g) in grad.iter().enumerate() {
        let diff = q.values()[k] - p.values()[k];
        if diff == 0.0 {
            continue;
        }
        match g.finite() {
            Some(g) => linear += w[k] * g * diff,
            None => {
                return Err(Error::Domain(format!(
                    "boundary case: derivative is infinite at node {k} where q ≠ p"
                )))
            }
        }
    }
    Ok(spec.value(q.values())? - spec.value(p.values())? - linear)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    /// Max pairwise L∞ distance between certified densities.
    pub max_distance: f64,
    pub certified: usize,
    /// Seeds that failed to certify, with the reason.
    pub failures: Vec<(u64, String)>,
}

impl UniquenessReport {
    pub fn conclusive(&self) -> bool {
        self.failures.is_empty() && self.certified >= 2
    }
}

/// Solves from `k_seeds` randomly perturbed starting multipliers and compares
/// the resulting densities.
pub fn uniqueness_probe(problem: &ProblemSpec, options: &SolveOptions, k_seeds: usize) -> Result<UniquenessReport> {
    let base = match &options.initial_multipliers {
        Some(m) => m.clone(),
        None => default_initial_multipliers(problem, options)?,
    };
    let mut densities: Vec<Vec<f64>> = Vec::new();
    let mut failures = Vec::new();
    for s in 0..k_seeds as u64 {
        let seed = options.seed.wrapping_add(s);
        let mut rng = sampling::rng(seed);
        let mut start = base.clone();
        for l in start.lambda.iter_mut() {
            *l += rng.gen_range(-0.1..0.1) * (1.0 + l.abs());
        }
        for nu in start.nu.iter_mut() {
            *nu = nu.abs() + rng.gen_range(0.0..0.1);
        }
        let opts = SolveOptions { initial_multipliers: Some(start), seed, ..options.clone() };
        match solve(problem, &opts) {
            Ok(r) => densities.push(r.density.into_values()),
            Err(e) => failures.push((seed, e.to_string())),
        }
    }
    let mut max_distance = 0.0f64;
    for i in 0..densities.len() {
        for j in i + 1..densities.len() {
            let d = densities[i]
                .iter()
                .zip(&densities[j])
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            max_distance = max_distance.max(d);
        }
    }
    Ok(UniquenessReport { max_distance, certified: densities.len(), failures })
}
