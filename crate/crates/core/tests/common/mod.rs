#![allow(dead_code)]

use std::sync::Arc;

use densopt::functionals::{self, FunctionalSpec, ScalarFn};
use densopt::sampling;
use densopt::{constraints, Density, Grid, InequalityConstraint, LinearEqualityConstraint, ProblemSpec};
use rand::Rng;

pub fn grid(a: f64, b: f64, n: usize) -> Arc<Grid> {
    Arc::new(Grid::uniform(a, b, n).unwrap())
}

pub fn l1(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    grid.integrate_fn(|_, k| (a[k] - b[k]).abs())
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn gaussian(grid: &Arc<Grid>, mean: f64, sd: f64) -> Density {
    Density::normalize(grid.clone(), grid.sample(|z| (-0.5 * ((z - mean) / sd).powi(2)).exp())).unwrap()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Relative-entropy projection of `y` onto `{q : Σ w q s_i = t_i}` where the
/// statistics include the constant 1. `q = y exp(Σ μ_i s_i)`, Newton on μ.
fn kl_project(w: &[f64], y: &[f64], stats: &[Vec<f64>], targets: &[f64]) -> Vec<f64> {
    let d = stats.len();
    let mut mu = vec![0.0; d];
    let log_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let eval = |mu: &[f64]| -> Vec<f64> {
        (0..y.len())
            .map(|k| (log_y[k] + (0..d).map(|i| mu[i] * stats[i][k]).sum::<f64>()).exp())
            .collect()
    };
    let mut q = eval(&mu);
    for _ in 0..100 {
        let r: Vec<f64> = (0..d)
            .map(|i| (0..q.len()).map(|k| w[k] * stats[i][k] * q[k]).sum::<f64>() - targets[i])
            .collect();
        if r.iter().all(|v| v.abs() < 1e-15) {
            break;
        }
        let jac: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| (0..q.len()).map(|k| w[k] * stats[i][k] * stats[j][k] * q[k]).sum())
                    .collect()
            })
            .collect();
        let step = gauss_solve(jac, r.iter().map(|v| -v).collect());
        let merit = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
        let current = merit(&r);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = mu.iter().zip(&step).map(|(m, s)| m + t * s).collect();
            let qt = eval(&trial);
            let rt: Vec<f64> = (0..d)
                .map(|i| (0..qt.len()).map(|k| w[k] * stats[i][k] * qt[k]).sum::<f64>() - targets[i])
                .collect();
            if merit(&rt) < current || t < 1e-10 {
                mu = trial;
                q = qt;
                break;
            }
            t *= 0.5;
        }
    }
    q
}

/// Entropic mirror descent for `min ∫ p log p` subject to `∫ φ_i p = c_i` and
/// `∫ p = 1`, each step followed by a relative-entropy projection onto the
/// affine constraint set. Runs until the gradient, projected onto the
/// tangent space of the constraints, has weighted norm ≤ `gtol`.
pub fn mirror_descent_maxent(grid: &Grid, phis: &[Vec<f64>], targets: &[f64], gtol: f64) -> (Vec<f64>, f64) {
    let w = grid.weights();
    let n = grid.len();
    let mut stats = vec![vec![1.0; n]];
    stats.extend(phis.iter().cloned());
    let mut t = vec![1.0];
    t.extend_from_slice(targets);
    let length: f64 = w.iter().sum();
    let mut p = kl_project(w, &vec![1.0 / length; n], &stats, &t);
    let step = 0.5;
    let mut gnorm = f64::INFINITY;
    for _ in 0..2000 {
        let grad: Vec<f64> = p.iter().map(|v| v.ln() + 1.0).collect();
        // weighted least-squares fit of the gradient by the statistics
        let d = stats.len();
        let gram: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| (0..n).map(|k| w[k] * stats[i][k] * stats[j][k]).sum()).collect())
            .collect();
        let rhs: Vec<f64> = (0..d).map(|i| (0..n).map(|k| w[k] * stats[i][k] * grad[k]).sum()).collect();
        let coef = gauss_solve(gram, rhs);
        gnorm = (0..n)
            .map(|k| {
                let fit: f64 = (0..d).map(|i| coef[i] * stats[i][k]).sum();
                w[k] * (grad[k] - fit).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        if gnorm <= gtol {
            break;
        }
        let y: Vec<f64> = p.iter().zip(&grad).map(|(v, g)| v * (-step * g).exp()).collect();
        p = kl_project(w, &y, &stats, &t);
    }
    (p, gnorm)
}

/// A random density in the feasible set of `problem`.
///
/// A random density is tilted so that every equality holds and every moment
/// inequality holds with random slack. It is then mixed with `anchor` (a
/// feasible point) with the largest weight, out of a random start, that keeps
/// the non-affine inequalities satisfied. When `interior` (a strictly feasible
/// density) is given, the random density is first pulled towards it until it
/// is feasible itself.
pub fn random_feasible<R: Rng>(
    problem: &ProblemSpec,
    anchor: &[f64],
    interior: Option<&Density>,
    rng: &mut R,
) -> Density {
    let g = problem.grid();
    let mut phis = Vec::new();
    let mut targets = Vec::new();
    for c in problem.equalities() {
        phis.push(c.phi().to_vec());
        targets.push(c.target());
    }
    let anchor_vals = constraints::inequality_values(problem, anchor).unwrap();
    for (c, &at_anchor) in problem.inequalities().iter().zip(&anchor_vals) {
        if let Some((phi, offset)) = c.spec().affine_parts() {
            // bound is −offset; keep ∫φq between the anchor value and the bound
            let bound = -offset;
            let anchor_moment = at_anchor + bound;
            let lo = anchor_moment.min(bound) - 0.3 * (1.0 + bound.abs());
            phis.push(phi.to_vec());
            targets.push(rng.gen_range(lo..=bound));
        }
    }
    let base = sampling::random_density(g, rng);
    let r = match sampling::tilt_to_moments(&base, &phis, &targets) {
        Ok(r) => r,
        Err(_) => return random_feasible(problem, anchor, interior, rng),
    };
    let r: Vec<f64> = match interior {
        // pull towards the interior until every inequality holds, so that
        // the whole segment to the anchor is feasible
        Some(c) => {
            let mut s: f64 = rng.gen_range(0.0..1.0);
            loop {
                let pulled: Vec<f64> = r.values().iter().zip(c.values()).map(|(a, b)| (1.0 - s) * a + s * b).collect();
                let vals = constraints::inequality_values(problem, &pulled).unwrap();
                if vals.iter().all(|v| *v <= 0.0) || s == 1.0 {
                    break pulled;
                }
                s = if s > 1.0 - 1e-6 { 1.0 } else { 0.5 * (1.0 + s) };
            }
        }
        None => r.into_values(),
    };
    let mut t: f64 = rng.gen_range(0.05..1.0);
    loop {
        let mix: Vec<f64> = anchor.iter().zip(&r).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        let rep = constraints::is_feasible(problem, &mix, 1e-8, 1e-9).unwrap();
        if rep.feasible {
            return Density::with_tolerance(g.clone(), mix, 1e-8).unwrap();
        }
        t *= 0.5;
        assert!(t > 1e-12, "no feasible mixture");
    }
}

pub struct Instance {
    pub name: &'static str,
    pub problem: ProblemSpec,
    pub interior: Option<Density>,
}

pub fn renyi(alpha: f64, nodes: usize) -> ProblemSpec {
    densopt::solver::renyi_maxent_problem(grid(-4.0, 4.0, nodes), alpha, 1.0).unwrap()
}

pub fn shannon_maxent(nodes: usize) -> ProblemSpec {
    let g = grid(-4.0, 4.0, nodes);
    ProblemSpec::new(g.clone(), functionals::neg_shannon(g.clone()))
        .unwrap()
        .with_equality(LinearEqualityConstraint::from_fn(&g, |z| z, 0.0).unwrap())
        .unwrap()
        .with_equality(LinearEqualityConstraint::from_fn(&g, |z| z * z, 0.25).unwrap())
        .unwrap()
}

/// The solved-instance matrix used by the certificate and optimality checks.
pub fn test_matrix() -> Vec<Instance> {
    let mut out = vec![
        Instance { name: "renyi alpha=2", problem: renyi(2.0, 2001), interior: None },
        Instance { name: "renyi alpha=1.5", problem: renyi(1.5, 2001), interior: None },
        Instance { name: "renyi alpha=3", problem: renyi(3.0, 2001), interior: None },
        Instance { name: "shannon mean/variance", problem: shannon_maxent(1001), interior: None },
    ];

    let g = grid(0.0, 1.0, 501);
    out.push(Instance {
        name: "shannon unconstrained",
        problem: ProblemSpec::new(g.clone(), functionals::neg_shannon(g.clone())).unwrap(),
        interior: None,
    });
    out.push(Instance {
        name: "shannon mean bound",
        problem: ProblemSpec::new(g.clone(), functionals::neg_shannon(g.clone()))
            .unwrap()
            .with_inequality(InequalityConstraint::moment(g.clone(), g.sample(|z| z), 0.3).unwrap())
            .unwrap(),
        interior: None,
    });

    let g = grid(-4.0, 4.0, 801);
    let q = gaussian(&g, 0.0, 1.0);
    out.push(Instance {
        name: "kl_first mean shift",
        problem: ProblemSpec::new(g.clone(), functionals::relative_entropy_first(g.clone(), &q).unwrap())
            .unwrap()
            .with_equality(LinearEqualityConstraint::from_fn(&g, |z| z, 0.5).unwrap())
            .unwrap(),
        interior: None,
    });
    out.push(Instance {
        name: "kl_second mean shift",
        problem: ProblemSpec::new(g.clone(), functionals::relative_entropy_second(g.clone(), &q).unwrap())
            .unwrap()
            .with_equality(LinearEqualityConstraint::from_fn(&g, |z| z, 0.1).unwrap())
            .unwrap(),
        interior: None,
    });

    let g = grid(-1.0, 1.0, 801);
    let u = Density::uniform(g.clone());
    out.push(Instance {
        name: "chi2 mean shift with zero region",
        problem: ProblemSpec::new(g.clone(), functionals::chi_square(g.clone(), &u).unwrap())
            .unwrap()
            .with_equality(LinearEqualityConstraint::from_fn(&g, |z| z, 0.45).unwrap())
            .unwrap(),
        interior: None,
    });
    out.push(Instance {
        name: "bregman_square second-moment bound",
        problem: ProblemSpec::new(g.clone(), functionals::bregman(g.clone(), ScalarFn::square(), &u).unwrap())
            .unwrap()
            .with_inequality(InequalityConstraint::moment(g.clone(), g.sample(|z| z * z), 0.2).unwrap())
            .unwrap()
            .with_inequality(InequalityConstraint::moment(g.clone(), g.sample(|z| -z), 0.5).unwrap())
            .unwrap(),
        interior: None,
    });

    let g = grid(-4.0, 4.0, 801);
    let q = gaussian(&g, 0.0, 1.0);
    let ball = functionals::relative_entropy_first(g.clone(), &q).unwrap();
    out.push(Instance {
        name: "power alpha=2 in a KL ball",
        problem: ProblemSpec::new(g.clone(), functionals::power_functional(g.clone(), 2.0).unwrap())
            .unwrap()
            .with_inequality(InequalityConstraint::ball(ball, 0.05))
            .unwrap(),
        interior: Some(q),
    });
    out
}

pub fn catalogue(g: &Arc<Grid>, reference: &Density) -> Vec<FunctionalSpec> {
    vec![
        functionals::neg_shannon(g.clone()),
        functionals::relative_entropy_first(g.clone(), reference).unwrap(),
        functionals::relative_entropy_second(g.clone(), reference).unwrap(),
        functionals::chi_square(g.clone(), reference).unwrap(),
        functionals::bregman(g.clone(), ScalarFn::square(), reference).unwrap().with_name("bregman_square"),
        functionals::renyi_divergence_second(g.clone(), 2.0, reference).unwrap(),
        functionals::power_functional(g.clone(), 2.0).unwrap(),
    ]
}
