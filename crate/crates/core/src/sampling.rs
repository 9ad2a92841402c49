//! Seeded random densities and moment tilting, used by property checks.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::density::{Density, Grid};
use crate::functionals::PerturbationDirection;
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 42;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random low-frequency cosine series on the grid.
pub fn smooth_noise<R: Rng + ?Sized>(grid: &Grid, rng: &mut R, modes: usize) -> Vec<f64> {
    let span = grid.upper() - grid.lower();
    let terms: Vec<(f64, f64, f64)> = (1..=modes)
        .map(|j| {
            let amp = rng.gen_range(-1.0..1.0) * 2.0 / j as f64;
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            (j as f64, amp, phase)
        })
        .collect();
    grid.sample(|z| {
        let u = (z - grid.lower()) / span;
        terms
            .iter()
            .map(|(j, a, ph)| a * (std::f64::consts::PI * j * u + ph).cos())
            .sum()
    })
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 { x } else { x.exp().ln_1p() }
}

/// Normalized softplus of smooth noise. Strictly positive.
pub fn random_density<R: Rng + ?Sized>(grid: &Arc<Grid>, rng: &mut R) -> Density {
    let raw: Vec<f64> = smooth_noise(grid, rng, 6).into_iter().map(softplus).collect();
    Density::normalize(grid.clone(), raw).expect("softplus is positive")
}

/// As [`random_density`], mixed with the uniform density so every value is at
/// least `floor`.
pub fn random_density_with_floor<R: Rng + ?Sized>(grid: &Arc<Grid>, rng: &mut R, floor: f64) -> Density {
    let base = random_density(grid, rng);
    let length = grid.upper() - grid.lower();
    let min = base.values().iter().copied().fold(f64::INFINITY, f64::min);
    if min >= floor {
        return base;
    }
    // (1 − τ) min + τ / length ≥ floor
    let tau = ((floor - min) / (1.0 / length - min)).clamp(0.0, 1.0) * 1.001;
    let tau = tau.min(1.0);
    let values = base
        .values()
        .iter()
        .map(|v| (1.0 - tau) * v + tau / length)
        .collect();
    Density::normalize(grid.clone(), values).expect("positive mixture")
}

/// Smooth zero-mass perturbation direction with unit max norm.
pub fn random_direction<R: Rng + ?Sized>(grid: &Arc<Grid>, rng: &mut R) -> PerturbationDirection {
    let raw = smooth_noise(grid, rng, 5);
    let scale = raw.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let raw = raw.into_iter().map(|v| v / scale).collect();
    PerturbationDirection::centered(grid.clone(), raw).expect("matching length")
}

/// The density closest to `base` in relative entropy with
/// `∫ φ_i q dμ = targets_i`: `q ∝ base · exp(Σ μ_i φ_i)`.
///
/// Solved by Newton's method on the convex dual `log Z(μ) − μ·t`.
pub fn tilt_to_moments(base: &Density, phis: &[Vec<f64>], targets: &[f64]) -> Result<Density> {
    let grid = base.grid().clone();
    if phis.len() != targets.len() {
        return Err(Error::Structural("one target per statistic".into()));
    }
    for phi in phis {
        grid.check_len(phi.len())?;
    }
    let d = phis.len();
    let log_base: Vec<f64> = base.values().iter().map(|v| v.ln()).collect();
    let tilted = |mu: &DVector<f64>| -> (Vec<f64>, f64) {
        let s: Vec<f64> = (0..grid.len())
            .map(|k| log_base[k] + (0..d).map(|i| mu[i] * phis[i][k]).sum::<f64>())
            .collect();
        let smax = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = s.iter().map(|v| (v - smax).exp()).collect();
        let z = grid.integrate_unchecked(&w);
        (w.into_iter().map(|v| v / z).collect(), z.ln() + smax)
    };
    let dual = |mu: &DVector<f64>, log_z: f64| {
        log_z - (0..d).map(|i| mu[i] * targets[i]).sum::<f64>()
    };
    let residual = |q: &[f64]| -> DVector<f64> {
        DVector::from_iterator(d, (0..d).map(|i| grid.integrate_fn(|_, k| phis[i][k] * q[k]) - targets[i]))
    };
    let scale = 1.0 + targets.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let mut mu = DVector::zeros(d);
    let (mut q, mut log_z) = tilted(&mu);
    let mut grad = residual(&q);
    for _ in 0..200 {
        if grad.amax() <= 1e-13 * scale {
            return Density::new(grid, q);
        }
        let mean: Vec<f64> = (0..d).map(|i| grad[i] + targets[i]).collect();
        let hess = DMatrix::from_fn(d, d, |i, j| {
            grid.integrate_fn(|_, k| (phis[i][k] - mean[i]) * (phis[j][k] - mean[j]) * q[k])
        });
        let step = hess
            .clone()
            .cholesky()
            .map(|c| c.solve(&grad))
            .or_else(|| (hess + DMatrix::identity(d, d) * 1e-12).lu().solve(&grad))
            .ok_or_else(|| Error::Domain("degenerate statistics".into()))?;
        let current = dual(&mu, log_z);
        // near the optimum the dual decrease falls below rounding; the
        // gradient norm then decides
        let flat = 1e-14 * (1.0 + current.abs());
        let mut t = 1.0;
        loop {
            let trial = &mu - &step * t;
            let (tq, tz) = tilted(&trial);
            let value = dual(&trial, tz);
            let tgrad = residual(&tq);
            if value < current - flat || (value <= current + flat && tgrad.amax() < grad.amax()) {
                mu = trial;
                q = tq;
                log_z = tz;
                grad = tgrad;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::Domain("moment tilting stalled".into()));
            }
        }
    }
    Err(Error::Domain("moment targets are not attainable by tilting".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_densities_are_valid_and_reproducible() {
        let g = Arc::new(Grid::uniform(-2.0, 3.0, 301).unwrap());
        let a = random_density(&g, &mut rng(7));
        let b = random_density(&g, &mut rng(7));
        assert_eq!(a, b);
        assert!(a.values().iter().all(|&v| v > 0.0));
        let f = random_density_with_floor(&g, &mut rng(8), 1e-3);
        assert!(f.values().iter().all(|&v| v >= 1e-3));
        let eta = random_direction(&g, &mut rng(9));
        assert!(g.integrate(eta.values()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn tilting_hits_mean_and_variance() {
        let g = Arc::new(Grid::uniform(-4.0, 4.0, 801).unwrap());
        let base = random_density(&g, &mut rng(3));
        let phis = vec![g.sample(|z| z), g.sample(|z| z * z)];
        let q = tilt_to_moments(&base, &phis, &[0.2, 0.9]).unwrap();
        assert!((q.moment(1) - 0.2).abs() < 1e-12);
        assert!((q.moment(2) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn impossible_targets_fail() {
        let g = Arc::new(Grid::uniform(-1.0, 1.0, 101).unwrap());
        let base = Density::uniform(g.clone());
        assert!(tilt_to_moments(&base, &[g.sample(|z| z * z)], &[-1.0]).is_err());
    }
}
