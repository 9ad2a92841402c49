//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{catalogue, gaussian, grid, l1, mirror_descent_maxent, random_feasible, test_matrix, Instance};
use densopt::functionals::{self, relative_derivative_residual, Convexity, ScalarFn};
use densopt::kkt::{kkt_certificate, Condition, Multipliers, Tolerances};
use densopt::sampling::{random_density, random_density_with_floor, random_direction, rng};
use densopt::solver::{
    closed_form_renyi, renyi_oracle_multipliers, solve, uniqueness_probe, verify_lemma1, SolveOptions, SolveResult,
};
use densopt::constraints;

struct Line {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

struct Solved {
    instance: Instance,
    result: Result<SolveResult, String>,
    seconds: f64,
}

fn solve_matrix() -> Vec<Solved> {
    test_matrix()
        .into_iter()
        .map(|instance| {
            let start = Instant::now();
            let result = solve(&instance.problem, &SolveOptions::default()).map_err(|e| e.to_string());
            Solved { instance, result, seconds: start.elapsed().as_secs_f64() }
        })
        .collect()
}

fn close_rel(got: f64, want: f64, rel: f64, scale: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(scale)
}

fn renyi_reproduction(solved: &[Solved]) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for (alpha, name) in [(2.0, "renyi alpha=2"), (1.5, "renyi alpha=1.5"), (3.0, "renyi alpha=3")] {
        let s = solved.iter().find(|s| s.instance.name == name).unwrap();
        let r = match &s.result {
            Ok(r) => r,
            Err(e) => {
                pass = false;
                parts.push(format!("α={alpha}: {e}"));
                continue;
            }
        };
        let g = s.instance.problem.grid();
        let exact = g.sample(|z| closed_form_renyi(alpha, 1.0, z).unwrap());
        let dist = l1(g, r.density.values(), &exact);
        let oracle = renyi_oracle_multipliers(alpha, 1.0).unwrap();
        // ν₁ has target 0, so its relative tolerance is taken against |λ₁|
        let lam_scale = oracle.lambda[0].abs();
        let mult_ok = close_rel(r.multipliers.lambda[0], oracle.lambda[0], 1e-3, 0.0)
            && close_rel(r.multipliers.nu[0], oracle.nu[0], 1e-3, lam_scale)
            && close_rel(r.multipliers.nu[1], oracle.nu[1], 1e-3, 0.0);
        let ok = dist <= 1e-3 && mult_ok && s.seconds <= 10.0;
        pass &= ok;
        parts.push(format!(
            "α={alpha}: L1={dist:.2e} λ₁={:.7} ν=({:.2e}, {:.7}) t={:.2}s",
            -r.multipliers.lambda[0], r.multipliers.nu[0], r.multipliers.nu[1], s.seconds
        ));
    }
    Line { id: 1, title: "Rényi reproduction", pass, detail: parts.join("; ") }
}

fn renyi_constraints(solved: &[Solved]) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in solved.iter().filter(|s| s.instance.name.starts_with("renyi")) {
        let Ok(r) = &s.result else {
            pass = false;
            parts.push(format!("{}: unsolved", s.instance.name));
            continue;
        };
        let psi = constraints::inequality_values(&s.instance.problem, r.density.values()).unwrap();
        let worst = psi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        pass &= worst <= 1e-6;
        parts.push(format!("{}: max|Ψ|={worst:.2e}", s.instance.name));
    }
    Line { id: 2, title: "constraint attainment at the Rényi optimum", pass, detail: parts.join("; ") }
}

fn certificate_soundness(solved: &[Solved]) -> Line {
    let tol = Tolerances::default();
    let mut certified = 0;
    let mut failures = Vec::new();
    let mut mutations = 0;
    let mut detected = 0;
    for s in solved {
        let problem = &s.instance.problem;
        let r = match &s.result {
            Ok(r) if r.certificate.pass => r,
            Ok(_) => {
                failures.push(format!("{}: certificate failed", s.instance.name));
                continue;
            }
            Err(e) => {
                failures.push(format!("{}: {e}", s.instance.name));
                continue;
            }
        };
        certified += 1;
        let p = r.density.values();
        let m = &r.multipliers;

        let scaled: Vec<f64> = p.iter().map(|v| v * 1.01).collect();
        let cert = kkt_certificate(problem, &scaled, m, &tol).unwrap();
        mutations += 1;
        if cert.flags(Condition::A) {
            detected += 1;
        } else {
            failures.push(format!("{}: scaling not flagged as a", s.instance.name));
        }

        if m.nu.iter().any(|&v| v > tol.slack) {
            let flipped = Multipliers::new(m.lambda.clone(), m.nu.iter().map(|v| -v).collect());
            let cert = kkt_certificate(problem, p, &flipped, &tol).unwrap();
            mutations += 1;
            if cert.flags(Condition::C) {
                detected += 1;
            } else {
                failures.push(format!("{}: ν flip not flagged as c", s.instance.name));
            }
        }

        let mut shifted = m.clone();
        *shifted.lambda.last_mut().unwrap() -= 1e-2;
        let cert = kkt_certificate(problem, p, &shifted, &tol).unwrap();
        mutations += 1;
        if cert.flags(Condition::B) {
            detected += 1;
        } else {
            failures.push(format!("{}: multiplier shift not flagged as b", s.instance.name));
        }
    }
    let pass = certified == solved.len() && certified >= 8 && detected == mutations;
    let mut detail = format!("{certified}/{} certified, {detected}/{mutations} mutations detected", solved.len());
    if !failures.is_empty() {
        detail.push_str(&format!(" [{}]", failures.join("; ")));
    }
    Line { id: 3, title: "KKT certificate soundness", pass, detail }
}

fn lemma1() -> Line {
    let g = grid(-3.0, 3.0, 301);
    let mut rand = rng(101);
    let reference = random_density_with_floor(&g, &mut rand, 1e-3);
    let mut pass = true;
    let mut parts = Vec::new();
    for spec in catalogue(&g, &reference) {
        let mut rand = rng(1);
        let mut min_slack = f64::INFINITY;
        for _ in 0..1000 {
            let p = random_density(&g, &mut rand);
            let q = random_density(&g, &mut rand);
            match verify_lemma1(&spec, &p, &q) {
                Ok(v) => min_slack = min_slack.min(v),
                Err(e) => {
                    min_slack = f64::NEG_INFINITY;
                    parts.push(format!("{}: {e}", spec.name()));
                    break;
                }
            }
        }
        pass &= min_slack >= -1e-10;
        parts.push(format!("{} {min_slack:.1e}", spec.name()));
    }
    Line { id: 4, title: "gradient inequality (min slack)", pass, detail: parts.join(", ") }
}

fn derivative_checks() -> Line {
    let g = grid(-2.0, 2.0, 401);
    let mut rand = rng(202);
    let reference = random_density_with_floor(&g, &mut rand, 1e-3);
    let mut specs = catalogue(&g, &reference);
    specs.push(functionals::f_divergence(g.clone(), ScalarFn::x_log_x(), &reference).unwrap());
    specs.push(functionals::f_divergence_second(g.clone(), ScalarFn::x_log_x(), &reference).unwrap());
    specs.push(
        functionals::f_divergence_second(g.clone(), ScalarFn::chi_square(), &reference)
            .unwrap()
            .with_name("f_divergence_second(chi2)"),
    );
    let hellinger = ScalarFn::new(|x| (x.sqrt() - 1.0).powi(2), |x| 1.0 - 1.0 / x.sqrt());
    specs.push(
        functionals::f_divergence_second(g.clone(), hellinger, &reference)
            .unwrap()
            .with_name("f_divergence_second(hellinger)"),
    );
    specs.push(functionals::bregman(g.clone(), ScalarFn::x_log_x(), &reference).unwrap());
    specs.push(functionals::renyi_divergence_second(g.clone(), 0.5, &reference).unwrap().with_name("renyi_div(0.5)"));
    specs.push(functionals::power_functional(g.clone(), 3.5).unwrap());
    specs.push(functionals::linear(g.clone(), g.sample(|z| z.sin() + z * z)).unwrap());
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut worst_name = String::new();
    for spec in &specs {
        let mut rand = rng(3);
        for _ in 0..50 {
            let p = random_density_with_floor(&g, &mut rand, 1e-3);
            let eta = random_direction(&g, &mut rand);
            match relative_derivative_residual(spec, &p, &eta, 1e-5) {
                Ok(r) => {
                    if r > worst {
                        worst = r;
                        worst_name = spec.name().to_string();
                    }
                }
                Err(e) => {
                    pass = false;
                    worst_name = format!("{}: {e}", spec.name());
                }
            }
        }
    }
    pass &= worst <= 1e-6;
    Line {
        id: 5,
        title: "functional-derivative checks",
        pass,
        detail: format!("{} functionals × 50, worst {worst:.2e} ({worst_name})", specs.len()),
    }
}

fn uniqueness() -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, problem) in [("renyi alpha=2", common::renyi(2.0, 2001)), ("shannon maxent", common::shannon_maxent(1001))] {
        let report = uniqueness_probe(&problem, &SolveOptions::default(), 5).unwrap();
        let ok = report.conclusive() && report.certified == 5 && report.max_distance <= 1e-6;
        pass &= ok;
        parts.push(format!("{name}: {}/5 certified, max L∞ {:.1e}", report.certified, report.max_distance));
    }
    Line { id: 6, title: "uniqueness probe", pass, detail: parts.join("; ") }
}

fn shannon_baseline(solved: &[Solved]) -> Line {
    let s = solved.iter().find(|s| s.instance.name == "shannon mean/variance").unwrap();
    let Ok(r) = &s.result else {
        return Line { id: 7, title: "Shannon maxent baseline", pass: false, detail: "unsolved".into() };
    };
    let g = s.instance.problem.grid();
    let phis = vec![g.sample(|z| z), g.sample(|z| z * z)];
    let (oracle, gnorm) = mirror_descent_maxent(g, &phis, &[0.0, 0.25], 1e-10);
    let d_oracle = l1(g, r.density.values(), &oracle);
    let normal = gaussian(g, 0.0, 0.5);
    let d_normal = l1(g, r.density.values(), normal.values());
    Line {
        id: 7,
        title: "Shannon maxent baseline",
        pass: d_oracle <= 1e-4 && d_normal <= 1e-3 && gnorm <= 1e-10,
        detail: format!("L1 to mirror descent {d_oracle:.2e} (oracle gradient {gnorm:.1e}), L1 to N(0,0.25) {d_normal:.2e}"),
    }
}

fn optimality(solved: &[Solved]) -> Line {
    let mut pass = true;
    let mut worst = f64::INFINITY;
    let mut worst_name = "";
    let mut checked = 0;
    for (i, s) in solved.iter().enumerate() {
        let Ok(r) = &s.result else {
            pass = false;
            continue;
        };
        if !r.certificate.pass {
            continue;
        }
        let problem = &s.instance.problem;
        let objective = problem.objective();
        let best = objective.value(r.density.values()).unwrap();
        let mut rand = rng(500 + i as u64);
        for _ in 0..500 {
            let q = random_feasible(problem, r.density.values(), s.instance.interior.as_ref(), &mut rand);
            let margin = objective.value(q.values()).unwrap() + 1e-6 - best;
            if margin < worst {
                worst = margin;
                worst_name = s.instance.name;
            }
            checked += 1;
        }
    }
    pass &= worst >= 0.0;
    Line {
        id: 8,
        title: "optimality sampling",
        pass,
        detail: format!("{checked} feasible samples, min F[q] + 1e-6 − F[p*] = {worst:.2e} ({worst_name})"),
    }
}

fn midpoint_gap() -> Line {
    let g = grid(-3.0, 3.0, 301);
    let mut rand = rng(909);
    let reference = random_density_with_floor(&g, &mut rand, 1e-3);
    let mut pass = true;
    let mut parts = Vec::new();
    for spec in catalogue(&g, &reference) {
        if spec.convexity() != Convexity::StrictlyConvex {
            continue;
        }
        let mut rand = rng(9);
        let mut min_gap = f64::INFINITY;
        for _ in 0..200 {
            let p = random_density(&g, &mut rand);
            let q = random_density(&g, &mut rand);
            min_gap = min_gap.min(functionals::convexity_gap(&spec, p.values(), q.values(), 0.5).unwrap());
        }
        pass &= min_gap > 0.0;
        parts.push(format!("{} {min_gap:.1e}", spec.name()));
    }
    let mut rand = rng(10);
    let mut max_affine = 0.0f64;
    for phi in [g.sample(|z| z), g.sample(|z| z * z - 1.0), g.sample(|z| (-z * z).exp())] {
        let spec = functionals::linear(g.clone(), phi).unwrap();
        for _ in 0..200 {
            let p = random_density(&g, &mut rand);
            let q = random_density(&g, &mut rand);
            max_affine = max_affine.max(functionals::convexity_gap(&spec, p.values(), q.values(), 0.5).unwrap().abs());
        }
    }
    pass &= max_affine <= 1e-12;
    parts.push(format!("affine max |gap| {max_affine:.1e}"));
    Line { id: 9, title: "strict-convexity midpoint gap", pass, detail: parts.join(", ") }
}

fn main() -> ExitCode {
    let solved = solve_matrix();
    let checks: Vec<Box<dyn Fn() -> Line + '_>> = vec![
        Box::new(|| renyi_reproduction(&solved)),
        Box::new(|| renyi_constraints(&solved)),
        Box::new(|| certificate_soundness(&solved)),
        Box::new(lemma1),
        Box::new(derivative_checks),
        Box::new(uniqueness),
        Box::new(|| shannon_baseline(&solved)),
        Box::new(|| optimality(&solved)),
        Box::new(midpoint_gap),
    ];
    let mut all = true;
    for check in checks {
        let start = Instant::now();
        let line = check();
        let secs = start.elapsed().as_secs_f64();
        all &= line.pass;
        println!(
            "{} criterion {}: {} | {} ({secs:.1}s)",
            if line.pass { "PASS" } else { "FAIL" },
            line.id,
            line.title,
            line.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
