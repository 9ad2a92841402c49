//! Convex functionals of densities with pointwise functional derivatives.
//!
//! Every [`FunctionalSpec`] is a functional of one density-valued variable.
//! Divergences bind their other argument (the reference density) at
//! construction. Derivatives are returned as [`ExtReal`] so that the boundary
//! limits at `p ↓ 0` and `p ↑ ∞` can be infinite.

use std::fmt;
use std::sync::Arc;

use crate::density::{Density, Grid};
use crate::ext::ExtReal;
use crate::{Error, Result};

/// Relative tolerance used when checking a user-supplied `f'` against `f`.
pub const SCALAR_DERIVATIVE_TOL: f64 = 1e-6;
/// `|∫η dμ|` allowed for a perturbation direction.
pub const PERTURBATION_MASS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convexity {
    StrictlyConvex,
    Convex,
    Affine,
}

impl Convexity {
    pub fn as_str(self) -> &'static str {
        match self {
            Convexity::StrictlyConvex => "strictly_convex",
            Convexity::Convex => "convex",
            Convexity::Affine => "affine",
        }
    }
}

impl std::str::FromStr for Convexity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strictly_convex" => Ok(Convexity::StrictlyConvex),
            "convex" => Ok(Convexity::Convex),
            "affine" => Ok(Convexity::Affine),
            other => Err(Error::Parse(format!("unknown convexity class `{other}`"))),
        }
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A differentiable scalar function `f` with its derivative `f'`.
#[derive(Clone)]
pub struct ScalarFn {
    f: RealFn,
    df: RealFn,
}

impl ScalarFn {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarFn { f: Arc::new(f), df: Arc::new(df) }
    }

    /// `x log x`, the generator of the relative entropy.
    pub fn x_log_x() -> Self {
        ScalarFn::new(
            |x| if x == 0.0 { 0.0 } else { x * x.ln() },
            |x| x.ln() + 1.0,
        )
    }

    /// `(x − 1)²`, the generator of the χ² divergence.
    pub fn chi_square() -> Self {
        ScalarFn::new(|x| (x - 1.0) * (x - 1.0), |x| 2.0 * (x - 1.0))
    }

    pub fn square() -> Self {
        ScalarFn::new(|x| x * x, |x| 2.0 * x)
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.df)(x)
    }

    /// `f'` at `x`, falling back to the nearest representable point when the
    /// closure returns NaN at an endpoint.
    fn derivative_limit(&self, x: f64, fallback: f64) -> ExtReal {
        ExtReal::from_f64(self.derivative(x))
            .or_else(|| ExtReal::from_f64(self.derivative(fallback)))
            .unwrap_or(ExtReal::ZERO)
    }

    /// Central-difference spot check of `f'` at ten points in `(0, 10]`.
    fn check_consistency(&self) -> Result<()> {
        for x in [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0] {
            let h = 1e-5 * x;
            let fd = (self.value(x + h) - self.value(x - h)) / (2.0 * h);
            let d = self.derivative(x);
            if !((fd - d).abs() <= SCALAR_DERIVATIVE_TOL * (1.0 + d.abs())) {
                return Err(Error::Config(format!(
                    "f' disagrees with finite differences of f at x = {x}: {d} vs {fd}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarFn")
    }
}

#[derive(Debug, Clone)]
enum Kind {
    NegShannon,
    KlFirst { reference: Vec<f64> },
    KlSecond { reference: Vec<f64> },
    FDivFirst { f: ScalarFn, reference: Vec<f64> },
    FDivSecond { f: ScalarFn, reference: Vec<f64> },
    Bregman { f: ScalarFn, reference: Vec<f64> },
    RenyiSecond { alpha: f64, reference: Vec<f64> },
    Power { alpha: f64 },
    Linear { phi: Vec<f64> },
}

/// Argument of a pointwise derivative: a finite value or one of the two limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointArg {
    Zero,
    Value(f64),
    Infinity,
}

impl PointArg {
    fn of(p: f64) -> PointArg {
        if p == 0.0 {
            PointArg::Zero
        } else if p == f64::INFINITY {
            PointArg::Infinity
        } else {
            PointArg::Value(p)
        }
    }
}

/// A functional `F[p]` with its functional derivative `δF/δp(p(z), z)`.
#[derive(Debug, Clone)]
pub struct FunctionalSpec {
    name: String,
    grid: Arc<Grid>,
    kind: Kind,
    convexity: Convexity,
    offset: f64,
}

/// `∫ p log p dμ`, the negative Shannon entropy.
pub fn neg_shannon(grid: Arc<Grid>) -> FunctionalSpec {
    FunctionalSpec::build("neg_shannon", grid, Kind::NegShannon, Convexity::StrictlyConvex)
}

fn reference_values(grid: &Grid, reference: &Density) -> Result<Vec<f64>> {
    if !grid.matches_nodes(reference.grid().nodes()) {
        return Err(Error::Structural("reference density lives on a different grid".into()));
    }
    Ok(reference.values().to_vec())
}

/// `D(P‖Q)` as a functional of `p` with `q` fixed.
pub fn relative_entropy_first(grid: Arc<Grid>, reference_q: &Density) -> Result<FunctionalSpec> {
    let reference = reference_values(&grid, reference_q)?;
    Ok(FunctionalSpec::build(
        "kl_first",
        grid,
        Kind::KlFirst { reference },
        Convexity::StrictlyConvex,
    ))
}

/// `D(P‖Q)` as a functional of `q` with `p` fixed.
pub fn relative_entropy_second(grid: Arc<Grid>, reference_p: &Density) -> Result<FunctionalSpec> {
    let reference = reference_values(&grid, reference_p)?;
    Ok(FunctionalSpec::build(
        "kl_second",
        grid,
        Kind::KlSecond { reference },
        Convexity::StrictlyConvex,
    ))
}

fn check_generator(f: &ScalarFn) -> Result<()> {
    let at_one = f.value(1.0);
    if !(at_one.abs() <= 1e-12) {
        return Err(Error::Config(format!("f(1) must be 0, got {at_one}")));
    }
    f.check_consistency()
}

/// `∫ q f(p/q) dμ` as a functional of `p`.
pub fn f_divergence(grid: Arc<Grid>, f: ScalarFn, reference_q: &Density) -> Result<FunctionalSpec> {
    check_generator(&f)?;
    let reference = reference_values(&grid, reference_q)?;
    Ok(FunctionalSpec::build(
        "f_divergence",
        grid,
        Kind::FDivFirst { f, reference },
        Convexity::StrictlyConvex,
    ))
}

/// `∫ q f(p/q) dμ` as a functional of `q` with `p` fixed, written as
/// `∫ p f̃(q/p) dμ` with `f̃(x) = x f(1/x)`.
pub fn f_divergence_second(
    grid: Arc<Grid>,
    f: ScalarFn,
    reference_p: &Density,
) -> Result<FunctionalSpec> {
    check_generator(&f)?;
    let reference = reference_values(&grid, reference_p)?;
    Ok(FunctionalSpec::build(
        "f_divergence_second",
        grid,
        Kind::FDivSecond { f, reference },
        Convexity::StrictlyConvex,
    ))
}

/// `χ²(P‖Q) = ∫ q (p/q − 1)² dμ` as a functional of `p`.
pub fn chi_square(grid: Arc<Grid>, reference_q: &Density) -> Result<FunctionalSpec> {
    let mut spec = f_divergence(grid, ScalarFn::chi_square(), reference_q)?;
    spec.name = "chi2".into();
    Ok(spec)
}

/// Bregman divergence `∫ f(p) − f(q) − f'(q)(p − q) dμ` in its first argument.
pub fn bregman(grid: Arc<Grid>, f: ScalarFn, reference_q: &Density) -> Result<FunctionalSpec> {
    f.check_consistency()?;
    let reference = reference_values(&grid, reference_q)?;
    Ok(FunctionalSpec::build(
        "bregman",
        grid,
        Kind::Bregman { f, reference },
        Convexity::StrictlyConvex,
    ))
}

/// Rényi divergence `D_α(P‖Q)` as a functional of `q` with `p` fixed.
pub fn renyi_divergence_second(
    grid: Arc<Grid>,
    alpha: f64,
    reference_p: &Density,
) -> Result<FunctionalSpec> {
    if !(alpha > 0.0 && alpha.is_finite()) || alpha == 1.0 {
        return Err(Error::Config(format!(
            "Rényi divergence order must be in (0, ∞) \\ {{1}}, got {alpha}"
        )));
    }
    let reference = reference_values(&grid, reference_p)?;
    Ok(FunctionalSpec::build(
        "renyi_div",
        grid,
        Kind::RenyiSecond { alpha, reference },
        Convexity::StrictlyConvex,
    ))
}

/// `∫ p^α dμ` for `α > 1`.
pub fn power_functional(grid: Arc<Grid>, alpha: f64) -> Result<FunctionalSpec> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("power functional needs α > 1, got {alpha}")));
    }
    Ok(FunctionalSpec::build("power", grid, Kind::Power { alpha }, Convexity::StrictlyConvex))
}

/// `∫ φ p dμ`.
pub fn linear(grid: Arc<Grid>, phi: Vec<f64>) -> Result<FunctionalSpec> {
    grid.check_len(phi.len())?;
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("φ must be finite at every node".into()));
    }
    Ok(FunctionalSpec::build("linear", grid, Kind::Linear { phi }, Convexity::Affine))
}

/// `H_α(p) = (1/(1−α)) log ∫ p^α dμ`.
pub fn renyi_entropy(p: &Density, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) || alpha == 1.0 {
        return Err(Error::Config(format!("Rényi order must be in (0, ∞) \\ {{1}}, got {alpha}")));
    }
    let integral = p.grid().integrate_fn(|_, k| p.values()[k].powf(alpha));
    if !(integral > 0.0) {
        return Err(Error::Domain("∫ p^α dμ vanishes".into()));
    }
    Ok(integral.ln() / (1.0 - alpha))
}

impl FunctionalSpec {
    fn build(name: &str, grid: Arc<Grid>, kind: Kind, convexity: Convexity) -> Self {
        FunctionalSpec { name: name.to_string(), grid, kind, convexity, offset: 0.0 }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn convexity(&self) -> Convexity {
        self.convexity
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Adds a constant to the value, e.g. `D(p‖q) − ε` for a divergence ball.
    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset += offset;
        self
    }

    /// Overrides the declared convexity class. Used to test the checkers
    /// against deliberately mislabeled functionals.
    pub fn with_declared_convexity(mut self, convexity: Convexity) -> Self {
        self.convexity = convexity;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// The bound reference density values, if this is a divergence.
    pub fn reference(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::KlFirst { reference }
            | Kind::KlSecond { reference }
            | Kind::FDivFirst { reference, .. }
            | Kind::FDivSecond { reference, .. }
            | Kind::Bregman { reference, .. }
            | Kind::RenyiSecond { reference, .. } => Some(reference),
            _ => None,
        }
    }

    /// `(φ, offset)` if the functional is `∫ φ p dμ + offset`.
    pub fn affine_parts(&self) -> Option<(&[f64], f64)> {
        match &self.kind {
            Kind::Linear { phi } => Some((phi, self.offset)),
            _ => None,
        }
    }

    /// Whether `δF/δp(z)` depends only on `p(z)`. The Rényi divergence
    /// derivative carries a global normalizing integral and is not local.
    pub fn is_local(&self) -> bool {
        !matches!(self.kind, Kind::RenyiSecond { .. })
    }

    pub fn value(&self, p: &[f64]) -> Result<f64> {
        self.grid.check_len(p.len())?;
        let g = &self.grid;
        let undefined = |k: usize| {
            Error::Domain(format!(
                "{} is infinite: reference vanishes at node {k} where the argument is positive",
                self.name
            ))
        };
        let base = match &self.kind {
            Kind::NegShannon => g.integrate_fn(|_, k| xlogx(p[k])),
            Kind::KlFirst { reference } => {
                relative_entropy_sum(g, p, reference).ok_or_else(|| undefined(first_bad(p, reference)))?
            }
            Kind::KlSecond { reference } => {
                relative_entropy_sum(g, reference, p).ok_or_else(|| undefined(first_bad(reference, p)))?
            }
            Kind::FDivFirst { f, reference } => {
                if let Some(k) = (0..p.len()).find(|&k| reference[k] == 0.0 && p[k] > 0.0) {
                    return Err(undefined(k));
                }
                g.integrate_fn(|_, k| {
                    let q = reference[k];
                    if q == 0.0 { 0.0 } else { q * f.value(p[k] / q) }
                })
            }
            Kind::FDivSecond { f, reference } => {
                // ∫ r f̃(v/r) = ∫ v f(r/v)
                if let Some(k) = (0..p.len()).find(|&k| p[k] == 0.0 && reference[k] > 0.0) {
                    return Err(undefined(k));
                }
                g.integrate_fn(|_, k| {
                    let v = p[k];
                    if v == 0.0 { 0.0 } else { v * f.value(reference[k] / v) }
                })
            }
            Kind::Bregman { f, reference } => g.integrate_fn(|_, k| {
                let (x, q) = (p[k], reference[k]);
                f.value(x) - f.value(q) - f.derivative(q) * (x - q)
            }),
            Kind::RenyiSecond { alpha, reference } => {
                let integral = self.renyi_integral(*alpha, reference, p)?;
                integral.ln() / (alpha - 1.0)
            }
            Kind::Power { alpha } => g.integrate_fn(|_, k| p[k].powf(*alpha)),
            Kind::Linear { phi } => g.integrate_fn(|_, k| phi[k] * p[k]),
        };
        Ok(base + self.offset)
    }

    fn renyi_integral(&self, alpha: f64, reference: &[f64], q: &[f64]) -> Result<f64> {
        if alpha > 1.0 {
            if let Some(k) = (0..q.len()).find(|&k| q[k] == 0.0 && reference[k] > 0.0) {
                return Err(Error::Domain(format!(
                    "renyi_div is infinite: argument vanishes at node {k} where the reference is positive"
                )));
            }
        }
        let integral = self.grid.integrate_fn(|_, k| {
            let (r, v) = (reference[k], q[k]);
            if r == 0.0 { 0.0 } else { r.powf(alpha) * v.powf(1.0 - alpha) }
        });
        if !(integral > 0.0 && integral.is_finite()) {
            return Err(Error::Domain(format!("∫ p^α q^(1−α) dμ = {integral}")));
        }
        Ok(integral)
    }

    /// Pointwise derivative with any global factor fixed to `scale`.
    fn pointwise(&self, x: PointArg, k: usize, scale: f64) -> ExtReal {
        use ExtReal::{NegInf, PosInf};
        use PointArg::*;
        match &self.kind {
            Kind::NegShannon => match x {
                Zero => NegInf,
                Infinity => PosInf,
                Value(p) => ExtReal::from(p.ln() + 1.0),
            },
            Kind::KlFirst { reference } => {
                let q = reference[k];
                if q == 0.0 {
                    return PosInf;
                }
                match x {
                    Zero => NegInf,
                    Infinity => PosInf,
                    Value(p) => ExtReal::from((p / q).ln() + 1.0),
                }
            }
            Kind::KlSecond { reference } => {
                let r = reference[k];
                if r == 0.0 {
                    return ExtReal::ZERO;
                }
                match x {
                    Zero => NegInf,
                    Infinity => ExtReal::ZERO,
                    Value(q) => ExtReal::from(-r / q),
                }
            }
            Kind::FDivFirst { f, reference } => {
                let q = reference[k];
                if q == 0.0 {
                    return PosInf;
                }
                match x {
                    Zero => f.derivative_limit(0.0, f64::MIN_POSITIVE),
                    Infinity => f.derivative_limit(f64::INFINITY, f64::MAX),
                    Value(p) => f.derivative_limit(p / q, p / q),
                }
            }
            Kind::FDivSecond { f, reference } => {
                let r = reference[k];
                // f̃'(x) = f(1/x) − f'(1/x)/x, evaluated through y = r/v = 1/x
                let tilde = |y: f64| {
                    let val = f.value(y) - y * f.derivative(y);
                    ExtReal::from_f64(val).unwrap_or(ExtReal::ZERO)
                };
                if r == 0.0 {
                    return ExtReal::from_f64(f.value(0.0)).unwrap_or(ExtReal::ZERO);
                }
                match x {
                    Zero => tilde(f64::MAX.sqrt()),
                    Infinity => tilde(0.0),
                    Value(v) => tilde(r / v),
                }
            }
            Kind::Bregman { f, reference } => {
                let shift = f.derivative(reference[k]);
                let d = match x {
                    Zero => f.derivative_limit(0.0, f64::MIN_POSITIVE),
                    Infinity => f.derivative_limit(f64::INFINITY, f64::MAX),
                    Value(p) => f.derivative_limit(p, p),
                };
                d.checked_add(ExtReal::from(-shift)).unwrap_or(d)
            }
            Kind::RenyiSecond { alpha, reference } => {
                let r = reference[k];
                if r == 0.0 {
                    return ExtReal::ZERO;
                }
                match x {
                    Zero => NegInf,
                    Infinity => ExtReal::ZERO,
                    Value(q) => ExtReal::from_f64(-scale * (r / q).powf(*alpha)).unwrap_or(NegInf),
                }
            }
            Kind::Power { alpha } => match x {
                Zero => ExtReal::ZERO,
                Infinity => PosInf,
                Value(p) => ExtReal::from_f64(alpha * p.powf(alpha - 1.0)).unwrap_or(PosInf),
            },
            Kind::Linear { phi } => ExtReal::from(phi[k]),
        }
    }

    fn require_local(&self) -> Result<()> {
        if self.is_local() {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "{} has a non-local derivative; evaluate it through gradient()",
                self.name
            )))
        }
    }

    /// `δF/δp(p, z_k)` for a local functional.
    pub fn derivative(&self, p: f64, k: usize) -> Result<ExtReal> {
        self.require_local()?;
        Ok(self.pointwise(PointArg::of(p), k, 1.0))
    }

    /// `lim_{p↓0} δF/δp(p, z_k)` for a local functional.
    pub fn derivative_at_zero(&self, k: usize) -> Result<ExtReal> {
        self.require_local()?;
        Ok(self.pointwise(PointArg::Zero, k, 1.0))
    }

    /// `lim_{p↑∞} δF/δp(p, z_k)` for a local functional.
    pub fn derivative_at_infinity(&self, k: usize) -> Result<ExtReal> {
        self.require_local()?;
        Ok(self.pointwise(PointArg::Infinity, k, 1.0))
    }

    fn global_scale(&self, at: &[f64]) -> Result<f64> {
        match &self.kind {
            Kind::RenyiSecond { alpha, reference } => Ok(1.0 / self.renyi_integral(*alpha, reference, at)?),
            _ => Ok(1.0),
        }
    }

    /// `δF/δp(z_k)` at every node, evaluated at the density `at`.
    pub fn gradient(&self, at: &[f64]) -> Result<Vec<ExtReal>> {
        self.grid.check_len(at.len())?;
        let scale = self.global_scale(at)?;
        Ok(at
            .iter()
            .enumerate()
            .map(|(k, &p)| self.pointwise(PointArg::of(p), k, scale))
            .collect())
    }

    /// Derivative at an arbitrary pointwise argument, with any global factor
    /// frozen at the density `at`.
    pub fn derivative_in_context(&self, at: &[f64], x: PointArg, k: usize) -> Result<ExtReal> {
        self.grid.check_len(at.len())?;
        let scale = self.global_scale(at)?;
        Ok(self.pointwise(x, k, scale))
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 { 0.0 } else { x * x.ln() }
}

/// `∫ a log(a/b) dμ`, `None` if `b` vanishes where `a` is positive.
fn relative_entropy_sum(g: &Grid, a: &[f64], b: &[f64]) -> Option<f64> {
    let mut total = 0.0;
    for k in 0..a.len() {
        if a[k] == 0.0 {
            continue;
        }
        if b[k] == 0.0 {
            return None;
        }
        total += g.weights()[k] * a[k] * (a[k] / b[k]).ln();
    }
    Some(total)
}

fn first_bad(a: &[f64], b: &[f64]) -> usize {
    (0..a.len()).find(|&k| a[k] > 0.0 && b[k] == 0.0).unwrap_or(0)
}

/// A zero-mass direction `η` along which `p + εη` stays normalized.
#[derive(Debug, Clone)]
pub struct PerturbationDirection {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PerturbationDirection {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        let mass = grid.integrate(&values)?;
        if mass.abs() > PERTURBATION_MASS_TOL {
            return Err(Error::Domain(format!("perturbation has mass {mass}")));
        }
        Ok(PerturbationDirection { grid, values })
    }

    /// Subtracts the mean so that the result has zero integral.
    pub fn centered(grid: Arc<Grid>, mut values: Vec<f64>) -> Result<Self> {
        let mass = grid.integrate(&values)?;
        let length = grid.integrate_fn(|_, _| 1.0);
        let mean = mass / length;
        values.iter_mut().for_each(|v| *v -= mean);
        PerturbationDirection::new(grid, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
}

/// `|(F[p+εη] − F[p−εη])/(2ε) − ∫ δF/δp(p(z),z) η(z) dμ|`.
pub fn check_functional_derivative(
    spec: &FunctionalSpec,
    p: &Density,
    eta: &PerturbationDirection,
    eps: f64,
) -> Result<f64> {
    let (plus, minus, directional) = derivative_parts(spec, p, eta, eps)?;
    Ok(((plus - minus) / (2.0 * eps) - directional).abs())
}

/// Same residual divided by `1 + |∫ δF η dμ|`.
pub fn relative_derivative_residual(
    spec: &FunctionalSpec,
    p: &Density,
    eta: &PerturbationDirection,
    eps: f64,
) -> Result<f64> {
    let (plus, minus, directional) = derivative_parts(spec, p, eta, eps)?;
    Ok(((plus - minus) / (2.0 * eps) - directional).abs() / (1.0 + directional.abs()))
}

fn derivative_parts(
    spec: &FunctionalSpec,
    p: &Density,
    eta: &PerturbationDirection,
    eps: f64,
) -> Result<(f64, f64, f64)> {
    let grid = spec.grid();
    if !grid.matches_nodes(p.grid().nodes()) || !grid.matches_nodes(eta.grid().nodes()) {
        return Err(Error::Structural("density, direction and functional grids differ".into()));
    }
    let shifted = |sign: f64| -> Result<Vec<f64>> {
        p.values()
            .iter()
            .zip(eta.values())
            .enumerate()
            .map(|(k, (&a, &e))| {
                let v = a + sign * eps * e;
                if v < 0.0 {
                    Err(Error::Precondition(format!(
                        "p ± εη is negative at node {k}; shrink ε or mask η"
                    )))
                } else {
                    Ok(v)
                }
            })
            .collect()
    };
    let plus = spec.value(&shifted(1.0)?)?;
    let minus = spec.value(&shifted(-1.0)?)?;
    let grad = spec.gradient(p.values())?;
    let mut directional = 0.0;
    for (k, (g, &e)) in grad.iter().zip(eta.values()).enumerate() {
        if e == 0.0 {
            continue;
        }
        match g.finite() {
            Some(g) => directional += grid.weights()[k] * g * e,
            None => {
                return Err(Error::Precondition(format!(
                    "functional derivative is infinite at node {k} where η ≠ 0"
                )))
            }
        }
    }
    Ok((plus, minus, directional))
}

/// `(1−t)F[p] + tF[q] − F[(1−t)p + tq]`.
pub fn convexity_gap(spec: &FunctionalSpec, p: &[f64], q: &[f64], t: f64) -> Result<f64> {
    let mix: Vec<f64> = p.iter().zip(q).map(|(a, b)| (1.0 - t) * a + t * b).collect();
    Ok((1.0 - t) * spec.value(p)? + t * spec.value(q)? - spec.value(&mix)?)
}
