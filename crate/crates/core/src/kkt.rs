//! Lagrangian, pointwise stationarity and KKT certificates.
//!
//! Multiplier convention: `λ_i` multiplies `∫φ_i p dμ − c_i` for the user
//! equalities, the last entry `λ_{m+1}` multiplies `∫p dμ − 1`, and `ν_j`
//! multiplies `Ψ_j[p]`. The pointwise derivative of the Lagrangian is
//!
//! ```text
//! δL/δp(p, z) = δF/δp(p, z) + Σ_i λ_i φ_i(z) + λ_{m+1} + Σ_j ν_j δΨ_j/δp(p, z)
//! ```
//!
//! For each node the stationarity set `Λ` contains the nodes where this has a
//! root in `[0, ∞)`. Off `Λ` the candidate is zero and the multiplier of the
//! pointwise constraint `p(z) ≥ 0` is `θ(z) = δL/δp(0, z)`.

use crate::constraints::{self, FeasibilityReport, ProblemSpec};
use crate::ext::ExtReal;
use crate::functionals::PointArg;
use crate::{Error, Result};

/// Largest upper bracket tried when searching for a pointwise root.
pub const BRACKET_CAP: f64 = 1_152_921_504_606_846_976.0; // 2^60
/// Target `|δL/δp|` for the pointwise root solve.
pub const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    /// `λ_1..λ_m` for user equalities, then `λ_{m+1}` for the normalization.
    pub lambda: Vec<f64>,
    pub nu: Vec<f64>,
}

impl Multipliers {
    pub fn new(lambda: Vec<f64>, nu: Vec<f64>) -> Self {
        Multipliers { lambda, nu }
    }

    pub fn zeros(problem: &ProblemSpec) -> Self {
        Multipliers { lambda: vec![0.0; problem.m() + 1], nu: vec![0.0; problem.n()] }
    }

    pub fn normalization(&self) -> f64 {
        *self.lambda.last().expect("normalization multiplier")
    }

    pub fn check_dims(&self, problem: &ProblemSpec) -> Result<()> {
        if self.lambda.len() != problem.m() + 1 || self.nu.len() != problem.n() {
            return Err(Error::Structural(format!(
                "multipliers have dimensions ({}, {}), problem needs ({}, {})",
                self.lambda.len(),
                self.nu.len(),
                problem.m() + 1,
                problem.n()
            )));
        }
        if self.lambda.iter().chain(&self.nu).any(|v| !v.is_finite()) {
            return Err(Error::Domain("multipliers must be finite".into()));
        }
        Ok(())
    }
}

/// `L[p](λ, ν)`.
pub fn lagrangian_value(problem: &ProblemSpec, p: &[f64], mult: &Multipliers) -> Result<f64> {
    mult.check_dims(problem)?;
    let eq = constraints::equality_residuals(problem, p)?;
    let mut total = problem.objective().value(p)?;
    for (l, r) in mult.lambda.iter().zip(&eq) {
        total += l * r;
    }
    for (nu, c) in mult.nu.iter().zip(problem.inequalities()) {
        if *nu != 0.0 {
            total += nu * c.spec().value(p)?;
        }
    }
    Ok(total)
}

/// `δL/δp` at node `k` with non-local factors frozen at `at` (if given).
fn derivative_impl(
    problem: &ProblemSpec,
    at: Option<&[f64]>,
    x: PointArg,
    k: usize,
    mult: &Multipliers,
) -> Result<ExtReal> {
    let eval = |spec: &crate::FunctionalSpec| match at {
        Some(at) => spec.derivative_in_context(at, x, k),
        None => match x {
            PointArg::Zero => spec.derivative_at_zero(k),
            PointArg::Infinity => spec.derivative_at_infinity(k),
            PointArg::Value(v) => spec.derivative(v, k),
        },
    };
    let mut linear = *mult.lambda.last().expect("normalization multiplier");
    for (l, c) in mult.lambda.iter().zip(problem.equalities()) {
        linear += l * c.phi()[k];
    }
    let mut total = eval(problem.objective())?;
    total = total
        .checked_add(ExtReal::from(linear))
        .ok_or(Error::Indeterminate { node: k })?;
    for (nu, c) in mult.nu.iter().zip(problem.inequalities()) {
        if *nu == 0.0 {
            continue;
        }
        let d = eval(c.spec())?.scale(*nu);
        total = total.checked_add(d).ok_or(Error::Indeterminate { node: k })?;
    }
    Ok(total)
}

/// `δL/δp(p, z_k, λ, ν)`. Requires local objective and constraint derivatives;
/// `p = +∞` evaluates the upper limit.
pub fn lagrangian_derivative_at(
    problem: &ProblemSpec,
    p: f64,
    k: usize,
    mult: &Multipliers,
) -> Result<ExtReal> {
    mult.check_dims(problem)?;
    if k >= problem.grid().len() {
        return Err(Error::Structural(format!("node {k} out of range")));
    }
    derivative_impl(problem, None, point_arg(p), k, mult)
}

fn point_arg(p: f64) -> PointArg {
    if p == f64::INFINITY {
        PointArg::Infinity
    } else if p == 0.0 {
        PointArg::Zero
    } else {
        PointArg::Value(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stationary {
    /// `p̂ ≥ 0` with `|δL/δp(p̂)| ≤ tol`, or `p̂ = 0` when the derivative at
    /// zero is already within tolerance of zero.
    Root(f64),
    NoRoot,
}

impl Stationary {
    pub fn root(self) -> Option<f64> {
        match self {
            Stationary::Root(x) => Some(x),
            Stationary::NoRoot => None,
        }
    }
}

/// Per-node stationarity outcomes; `Root` nodes form `Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    pub outcomes: Vec<Stationary>,
}

impl StationaryResult {
    pub fn lambda_mask(&self) -> Vec<bool> {
        self.outcomes.iter().map(|o| matches!(o, Stationary::Root(_))).collect()
    }
}

fn ensure_local(problem: &ProblemSpec, mult: &Multipliers) -> Result<()> {
    let objective_ok = problem.objective().is_local();
    let constraints_ok = problem
        .inequalities()
        .iter()
        .zip(&mult.nu)
        .all(|(c, nu)| *nu == 0.0 || c.spec().is_local());
    if objective_ok && constraints_ok {
        Ok(())
    } else {
        Err(Error::Precondition(
            "pointwise stationarity needs functionals with local derivatives".into(),
        ))
    }
}

/// Unique root of `p ↦ δL/δp(p, z_k)` on `[0, ∞)`, if any.
pub fn stationary_point_at(
    problem: &ProblemSpec,
    k: usize,
    mult: &Multipliers,
    tol: f64,
) -> Result<Stationary> {
    stationary_point_from(problem, k, mult, tol, 1.0)
}

/// As [`stationary_point_at`] with a caller-chosen initial upper bracket.
pub fn stationary_point_from(
    problem: &ProblemSpec,
    k: usize,
    mult: &Multipliers,
    tol: f64,
    initial_upper: f64,
) -> Result<Stationary> {
    mult.check_dims(problem)?;
    ensure_local(problem, mult)?;
    if k >= problem.grid().len() {
        return Err(Error::Structural(format!("node {k} out of range")));
    }
    solve_node(problem, k, mult, tol, initial_upper)
}

fn solve_node(
    problem: &ProblemSpec,
    k: usize,
    mult: &Multipliers,
    tol: f64,
    initial_upper: f64,
) -> Result<Stationary> {
    let at_zero = derivative_impl(problem, None, PointArg::Zero, k, mult)?;
    if at_zero.gt(tol) {
        return Ok(Stationary::NoRoot);
    }
    if !at_zero.lt(-tol) {
        return Ok(Stationary::Root(0.0));
    }
    let at_inf = derivative_impl(problem, None, PointArg::Infinity, k, mult)?;
    if !at_inf.gt(0.0) {
        return Ok(Stationary::NoRoot);
    }
    let g = |x: f64| -> Result<f64> {
        let v = derivative_impl(problem, None, PointArg::Value(x), k, mult)?;
        // finite on (0, ∞) for the catalogue; clamp keeps comparisons ordered
        Ok(v.to_f64().clamp(-f64::MAX, f64::MAX))
    };

    let mut lo = 0.0;
    let mut g_lo = f64::NEG_INFINITY;
    let mut hi = initial_upper.max(f64::MIN_POSITIVE);
    let mut g_hi = g(hi)?;
    // the expansion starts from whichever side of the root the seed is on
    if g_hi > 0.0 {
        // shrink toward zero until the derivative turns negative
        loop {
            if g_hi.abs() <= tol {
                return Ok(Stationary::Root(hi));
            }
            let x = 0.5 * hi;
            if x == 0.0 {
                return Ok(Stationary::Root(0.0));
            }
            let gx = g(x)?;
            if gx > g_hi {
                return Err(Error::NonMonotone { node: k });
            }
            if gx < 0.0 {
                lo = x;
                g_lo = gx;
                break;
            }
            hi = x;
            g_hi = gx;
        }
    } else {
        while g_hi < 0.0 {
            if g_hi.abs() <= tol {
                return Ok(Stationary::Root(hi));
            }
            if hi >= BRACKET_CAP {
                return Err(Error::Domain(format!(
                    "stationary point at node {k} exceeds the bracket cap 2^60"
                )));
            }
            lo = hi;
            g_lo = g_hi;
            hi *= 2.0;
            let next = g(hi)?;
            if next < g_hi {
                return Err(Error::NonMonotone { node: k });
            }
            g_hi = next;
        }
    }

    let mut best = if g_hi.abs() < g_lo.abs() { (hi, g_hi) } else { (lo, g_lo) };
    loop {
        if best.1.abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid)?;
        if gm < g_lo || gm > g_hi {
            return Err(Error::NonMonotone { node: k });
        }
        if gm.abs() < best.1.abs() {
            best = (mid, gm);
        }
        if gm < 0.0 {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
            g_hi = gm;
        }
    }
    Ok(Stationary::Root(best.0))
}

/// Which off-support side condition a candidate must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateMode {
    /// `δL/δp(0, z) > 0` off `Λ`.
    Theorem,
    /// `δL/δp(+∞, z) > 0` off `Λ`; valid when `δL/δp` is continuous in `p`.
    Corollary,
}

impl std::str::FromStr for CandidateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theorem" => Ok(CandidateMode::Theorem),
            "corollary" => Ok(CandidateMode::Corollary),
            other => Err(Error::Parse(format!("unknown mode `{other}`"))),
        }
    }
}

impl CandidateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CandidateMode::Theorem => "theorem",
            CandidateMode::Corollary => "corollary",
        }
    }
}

/// Primal candidate built from multipliers. Not necessarily normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub values: Vec<f64>,
    pub stationary: StationaryResult,
}

/// `p*(z) = p̂(z)` on `Λ` and `0` elsewhere, with the side condition of `mode`
/// checked at every node off `Λ`.
pub fn primal_candidate(
    problem: &ProblemSpec,
    mult: &Multipliers,
    mode: CandidateMode,
    tol: f64,
) -> Result<Candidate> {
    mult.check_dims(problem)?;
    ensure_local(problem, mult)?;
    let n = problem.grid().len();
    let mut values = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    let mut rejected = Vec::new();
    for k in 0..n {
        let outcome = match solve_node(problem, k, mult, tol, 1.0) {
            Ok(o) => o,
            Err(Error::Domain(_)) => {
                rejected.push(k);
                Stationary::NoRoot
            }
            Err(e) => return Err(e),
        };
        match outcome {
            Stationary::Root(x) => values.push(x),
            Stationary::NoRoot => {
                let side = match mode {
                    CandidateMode::Theorem => PointArg::Zero,
                    CandidateMode::Corollary => PointArg::Infinity,
                };
                let d = derivative_impl(problem, None, side, k, mult)?;
                if !d.gt(0.0) && rejected.last() != Some(&k) {
                    rejected.push(k);
                }
                values.push(0.0);
            }
        }
        outcomes.push(outcome);
    }
    if !rejected.is_empty() {
        return Err(Error::CandidateRejected { nodes: rejected });
    }
    Ok(Candidate { values, stationary: StationaryResult { outcomes } })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub eq: f64,
    pub ineq: f64,
    /// Stationarity, in units of the Lagrangian derivative.
    pub stat: f64,
    /// Complementary slackness and `ν ≥ 0`.
    pub slack: f64,
    /// `θ ≥ 0` and `θ p* = 0`.
    pub theta: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eq: constraints::DEFAULT_TOL_EQ,
            ineq: constraints::DEFAULT_TOL_INEQ,
            stat: 1e-8,
            slack: 1e-8,
            theta: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    A,
    B,
    C,
    D,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::A => "a_feasibility",
            Condition::B => "b_stationarity",
            Condition::C => "c_complementary_slackness",
            Condition::D => "d_nonnegativity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktCertificate {
    pub multipliers: Multipliers,
    /// Condition a: `p* ∈ D`.
    pub feasibility: FeasibilityReport,
    pub condition_a: bool,
    /// Condition b: `max_z |δL̃/δp(p*(z), z)|`, i.e. `|δL/δp − θ|`.
    pub max_stationarity_residual: f64,
    pub worst_stationarity_node: Option<usize>,
    pub condition_b: bool,
    /// Condition c: `max_j |ν_j Ψ_j[p*]|` and `min_j ν_j`.
    pub max_slackness: f64,
    pub min_nu: f64,
    pub condition_c: bool,
    /// Condition d: `θ(z)` per node with `min θ` and `max |θ p*|`.
    pub theta: Vec<ExtReal>,
    pub lambda_mask: Vec<bool>,
    pub min_theta: ExtReal,
    pub max_theta_p: f64,
    pub condition_d: bool,
    pub pass: bool,
}

impl KktCertificate {
    pub fn failed_conditions(&self) -> Vec<Condition> {
        let mut out = Vec::new();
        for (ok, c) in [
            (self.condition_a, Condition::A),
            (self.condition_b, Condition::B),
            (self.condition_c, Condition::C),
            (self.condition_d, Condition::D),
        ] {
            if !ok {
                out.push(c);
            }
        }
        out
    }

    pub fn flags(&self, c: Condition) -> bool {
        !match c {
            Condition::A => self.condition_a,
            Condition::B => self.condition_b,
            Condition::C => self.condition_c,
            Condition::D => self.condition_d,
        }
    }
}

/// Checks the KKT conditions a–d for the triple `(p, λ, ν)`.
///
/// Derivatives of non-local functionals are linearized at `p`. Failures are
/// reported in the certificate; only dimension mismatches are errors.
pub fn kkt_certificate(
    problem: &ProblemSpec,
    p: &[f64],
    mult: &Multipliers,
    tol: &Tolerances,
) -> Result<KktCertificate> {
    problem.grid().check_len(p.len())?;
    if mult.lambda.len() != problem.m() + 1 || mult.nu.len() != problem.n() {
        return Err(Error::Structural("multiplier dimensions do not match the problem".into()));
    }
    let feasibility = constraints::is_feasible(problem, p, tol.eq, tol.ineq)?;
    let condition_a = feasibility.feasible;

    let n_nodes = p.len();
    let mut theta = Vec::with_capacity(n_nodes);
    let mut lambda_mask = Vec::with_capacity(n_nodes);
    let mut max_res = 0.0f64;
    let mut worst = None;
    let mut off_support_positive = true;
    let finite_mult = mult.lambda.iter().chain(&mult.nu).all(|v| v.is_finite());
    for k in 0..n_nodes {
        let eval = |x: PointArg| -> Option<ExtReal> {
            if !finite_mult || !(p[k] >= 0.0) {
                return None;
            }
            derivative_impl(problem, Some(p), x, k, mult).ok()
        };
        let (at_zero, at_inf, at_p) = match (
            eval(PointArg::Zero),
            eval(PointArg::Infinity),
            eval(point_arg(p[k])),
        ) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                theta.push(ExtReal::NegInf);
                lambda_mask.push(false);
                max_res = f64::INFINITY;
                worst = Some(k);
                continue;
            }
        };
        let in_lambda = !at_zero.gt(tol.stat) && at_inf.gt(0.0);
        let th = if in_lambda { ExtReal::ZERO } else { at_zero };
        let residual = if !in_lambda && p[k] == 0.0 {
            if !at_zero.gt(0.0) {
                off_support_positive = false;
            }
            0.0
        } else {
            at_p.checked_add(-th).map(|r| r.abs().to_f64()).unwrap_or(f64::INFINITY)
        };
        if !(residual <= max_res) {
            max_res = residual;
            worst = Some(k);
        }
        theta.push(th);
        lambda_mask.push(in_lambda);
    }
    let condition_b = max_res <= tol.stat && off_support_positive;

    let mut max_slack = 0.0f64;
    let mut min_nu = f64::INFINITY;
    for (nu, psi) in mult.nu.iter().zip(&feasibility.inequality_values) {
        min_nu = min_nu.min(*nu);
        let s = if *nu == 0.0 { 0.0 } else { (nu * psi).abs() };
        max_slack = max_slack.max(if s.is_nan() { f64::INFINITY } else { s });
    }
    let condition_c = (mult.nu.is_empty() || min_nu >= -tol.slack) && max_slack <= tol.slack;

    let min_theta = theta
        .iter()
        .copied()
        .fold(ExtReal::PosInf, |a, b| if b < a { b } else { a });
    let max_theta_p = theta
        .iter()
        .zip(p)
        .map(|(t, &v)| if v == 0.0 { 0.0 } else { t.scale(v).abs().to_f64() })
        .fold(0.0f64, f64::max);
    let condition_d = !min_theta.lt(-tol.theta) && max_theta_p <= tol.theta;

    Ok(KktCertificate {
        multipliers: mult.clone(),
        feasibility,
        condition_a,
        max_stationarity_residual: max_res,
        worst_stationarity_node: worst,
        condition_b,
        max_slackness: max_slack,
        min_nu: if mult.nu.is_empty() { 0.0 } else { min_nu },
        condition_c,
        theta,
        lambda_mask,
        min_theta,
        max_theta_p,
        condition_d,
        pass: condition_a && condition_b && condition_c && condition_d,
    })
}
