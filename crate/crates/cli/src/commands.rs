use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use densopt::functionals::{self, relative_derivative_residual};
use densopt::io::{self, Report};
use densopt::kkt::{kkt_certificate, Condition, KktCertificate};
use densopt::sampling::{self, random_density, random_density_with_floor, random_direction};
use densopt::solver::{self, solve, SolveError, SolveFailure, SolveOptions};
use densopt::{Convexity, Density, Error, Grid, ProblemSpec, Result};

use crate::config::RunConfig;

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_SOLVE_FAILED: u8 = 2;
pub const EXIT_INPUT: u8 = 3;

const SLACK_TOL: f64 = 1e-10;
/// Midpoint gaps within this of zero count as zero.
const GAP_TOL: f64 = 1e-12;
const DERIVATIVE_TOL: f64 = 1e-6;

pub const DENSITY_FILE: &str = "density.csv";
pub const REPORT_FILE: &str = "certificate.txt";
pub const FAILURE_FILE: &str = "failure.txt";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub tol_eq: Option<f64>,
    pub tol_ineq: Option<f64>,
    pub tol_stat: Option<f64>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(d) = &self.out {
            cfg.output.dir = d.clone();
        }
        if let Some(v) = self.tol_eq {
            cfg.solve.tol_eq = v;
        }
        if let Some(v) = self.tol_ineq {
            cfg.solve.tol_ineq = v;
        }
        if let Some(v) = self.tol_stat {
            cfg.solve.tol_stat = v;
        }
        if let Some(v) = self.seed {
            cfg.solve.seed = v;
        }
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    overrides.apply(&mut cfg);
    Ok(cfg)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn failure_report(fail: &SolveFailure) -> String {
    let mut out = String::from("# no active set produced a certificate\n");
    for a in &fail.attempts {
        out.push_str(&format!("{a}\n"));
    }
    out
}

fn print_flags(cert: &KktCertificate) {
    for c in [Condition::A, Condition::B, Condition::C, Condition::D] {
        println!("condition {}: {}", c.label(), if cert.flags(c) { "FLAGGED" } else { "ok" });
    }
}

fn solve_and_write(problem: &ProblemSpec, options: &SolveOptions, dir: &Path) -> Result<Option<(Density, KktCertificate)>> {
    match solve(problem, options) {
        Ok(r) => {
            let value = problem.objective().value(r.density.values())?;
            let mut report = Report::new();
            report.push_real("objective", value);
            let set: Vec<String> = r.active_set.iter().map(|j| (j + 1).to_string()).collect();
            report.push("active_set", format!("[{}]", set.join(",")));
            report.push("iterations", r.iterations);
            report.extend(io::certificate_report(&r.certificate));
            let csv = io::write_density_csv(problem.grid().nodes(), r.density.values());
            let d = write(dir, DENSITY_FILE, &csv)?;
            let c = write(dir, REPORT_FILE, &report.to_text())?;
            println!("objective = {}", io::format_real(value));
            println!("active set = {{{}}}", set.join(","));
            print!("{}", io::multipliers_report(&r.multipliers).to_text());
            println!("certificate pass = {}", r.certificate.pass);
            println!("wrote {} and {}", d.display(), c.display());
            Ok(Some((r.density, r.certificate)))
        }
        Err(SolveError::NoCertificate(fail)) => {
            let text = failure_report(&fail);
            let path = write(dir, FAILURE_FILE, &text)?;
            print!("{text}");
            println!("wrote {}", path.display());
            Ok(None)
        }
        Err(SolveError::Invalid(e)) => Err(e),
    }
}

pub fn cmd_solve(config: &Path, overrides: &Overrides) -> Result<u8> {
    let cfg = load(config, overrides)?;
    let problem = cfg.problem()?;
    let options = cfg.solve_options()?;
    Ok(match solve_and_write(&problem, &options, &cfg.output.dir)? {
        Some(_) => EXIT_PASS,
        None => EXIT_SOLVE_FAILED,
    })
}

pub fn cmd_verify(density_csv: &Path, config: &Path, multipliers: &Path, overrides: &Overrides) -> Result<u8> {
    let cfg = load(config, overrides)?;
    let problem = cfg.problem()?;
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())));
    let (nodes, values) = io::parse_density_csv(&read(density_csv)?)?;
    let grid = problem.grid();
    if nodes.len() != grid.len() || !grid.matches_nodes(&nodes) {
        return Err(Error::Structural(format!(
            "{} has {} nodes that do not match the configured grid ({} nodes on [{}, {}])",
            density_csv.display(),
            nodes.len(),
            grid.len(),
            grid.lower(),
            grid.upper()
        )));
    }
    let mult = io::parse_multipliers(&Report::parse(&read(multipliers)?)?)?;
    let cert = kkt_certificate(&problem, &values, &mult, &cfg.tolerances())?;
    print!("{}", io::certificate_report(&cert).to_text());
    print_flags(&cert);
    Ok(if cert.pass { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CheckKind {
    Deriv,
    Lemma1,
    Convexity,
}

pub fn cmd_check(kind: CheckKind, config: &Path, overrides: &Overrides) -> Result<u8> {
    let cfg = load(config, overrides)?;
    let grid = cfg.grid()?;
    let spec = cfg.objective_spec(&grid)?;
    let mut rng = sampling::rng(cfg.solve.seed);
    let pass = match kind {
        CheckKind::Deriv => {
            let mut worst = 0.0f64;
            for _ in 0..cfg.check.samples {
                let p = random_density_with_floor(&grid, &mut rng, cfg.check.floor);
                let eta = random_direction(&grid, &mut rng);
                worst = worst.max(relative_derivative_residual(&spec, &p, &eta, cfg.check.epsilon)?);
            }
            println!("{}: worst relative derivative residual = {} over {} draws", spec.name(), io::format_real(worst), cfg.check.samples);
            worst <= DERIVATIVE_TOL
        }
        CheckKind::Lemma1 => {
            let mut min = f64::INFINITY;
            let mut masked = 0;
            for _ in 0..cfg.check.pairs {
                let p = random_density(&grid, &mut rng);
                let q = random_density(&grid, &mut rng);
                match solver::verify_lemma1(&spec, &p, &q) {
                    Ok(v) => min = min.min(v),
                    Err(Error::Domain(_)) => masked += 1,
                    Err(e) => return Err(e),
                }
            }
            println!(
                "{}: min gradient-inequality slack = {} over {} pairs ({masked} boundary pairs masked)",
                spec.name(),
                io::format_real(min),
                cfg.check.pairs
            );
            min >= -SLACK_TOL
        }
        CheckKind::Convexity => {
            let mut min = f64::INFINITY;
            let mut max_abs = 0.0f64;
            for _ in 0..cfg.check.pairs {
                let p = random_density(&grid, &mut rng);
                let q = random_density(&grid, &mut rng);
                let gap = functionals::convexity_gap(&spec, p.values(), q.values(), 0.5)?;
                min = min.min(gap);
                max_abs = max_abs.max(gap.abs());
            }
            println!(
                "{} (declared {}): midpoint gap min = {}, max |gap| = {} over {} pairs",
                spec.name(),
                spec.convexity().as_str(),
                io::format_real(min),
                io::format_real(max_abs),
                cfg.check.pairs
            );
            match spec.convexity() {
                Convexity::StrictlyConvex => min > GAP_TOL,
                Convexity::Convex => min >= -GAP_TOL,
                Convexity::Affine => max_abs <= GAP_TOL,
            }
        }
    };
    println!("{}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

pub fn cmd_renyi_demo(alpha: f64, sigma: f64, nodes: usize, overrides: &Overrides) -> Result<u8> {
    let oracle = solver::renyi_oracle_multipliers(alpha, sigma)?;
    let half = (4.0 * sigma).max(1.05 * solver::renyi_support_radius(alpha, sigma));
    let grid = Arc::new(Grid::uniform(-half, half, nodes)?);
    let problem = solver::renyi_maxent_problem(grid.clone(), alpha, sigma)?;
    let mut options = SolveOptions::default();
    if let Some(s) = overrides.seed {
        options.seed = s;
    }
    let tol = &mut options.tolerances;
    tol.eq = overrides.tol_eq.unwrap_or(tol.eq);
    tol.ineq = overrides.tol_ineq.unwrap_or(tol.ineq);
    tol.stat = overrides.tol_stat.unwrap_or(tol.stat);
    let dir = overrides.out.clone().unwrap_or_else(|| PathBuf::from("densopt-out"));
    let Some((density, cert)) = solve_and_write(&problem, &options, &dir)? else {
        return Ok(EXIT_SOLVE_FAILED);
    };
    let exact = grid
        .nodes()
        .iter()
        .map(|&z| solver::closed_form_renyi(alpha, sigma, z))
        .collect::<Result<Vec<f64>>>()?;
    write(&dir, "closed_form.csv", &io::write_density_csv(grid.nodes(), &exact))?;
    let l1 = grid.integrate_fn(|_, k| (density.values()[k] - exact[k]).abs());
    let got = &cert.multipliers;
    println!("L1 distance to closed form = {}", io::format_real(l1));
    println!(
        "lambda_1 = {} (closed form {})",
        io::format_real(-got.normalization()),
        io::format_real(-oracle.normalization())
    );
    for j in 0..2 {
        println!(
            "nu_{} = {} (closed form {})",
            j + 1,
            io::format_real(got.nu[j]),
            io::format_real(oracle.nu[j])
        );
    }
    Ok(EXIT_PASS)
}
