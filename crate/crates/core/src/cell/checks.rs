use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CellProblem, CellSolution, CellSpec, Weighting};
use crate::error::Result;

/// Hill's identity `<grad z> . A_H <grad v> = a(v, z) / |I|` for every pair
/// of load directions, with `A_H` taken from `sol_v` (unweighted) and the
/// bilinear form from `problem`. The residual is normalised by
/// `sqrt(a(v,v) a(z,z)) / |I|`; the maximum over the four pairs is returned.
pub fn hill_residual_with(problem: &CellProblem, sol_v: &CellSolution, sol_z: &CellSolution) -> Result<f64> {
    let a_h = sol_v.effective(Weighting::None)?;
    let area = problem.spec().area();
    let mut worst = 0.0_f64;
    for v in &sol_v.directions {
        for z in &sol_z.directions {
            let lhs = z.mean_grad.dot(&(a_h * v.mean_grad));
            let rhs = problem.bilinear(&v.dofs, &z.dofs) / area;
            let scale = (problem.bilinear(&v.dofs, &v.dofs) * problem.bilinear(&z.dofs, &z.dofs)).sqrt() / area;
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(worst)
}

pub fn hill_residual(spec: &CellSpec, sol_v: &CellSolution, sol_z: &CellSolution) -> Result<f64> {
    hill_residual_with(&CellProblem::new(spec)?, sol_v, sol_z)
}

/// `max_j |<grad v_j> - e_j|`.
pub fn constraint_defect(sol: &CellSolution) -> f64 {
    let e = [Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)];
    sol.directions
        .iter()
        .zip(e)
        .map(|(d, e)| (d.mean_grad - e).amax())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy)]
pub struct StabilityReport {
    /// `max_j (|grad v_j| + iota |hess v_j|) / |grad V_j|` in L2(I).
    pub lhs: f64,
    /// `sqrt(Lambda) + sqrt(Lambda / lambda)`.
    pub bound: f64,
    pub lambda: f64,
    pub big_lambda: f64,
    /// Smallest `diffusion energy / lambda` over directions (at least 1).
    pub coercivity_ratio: f64,
}

impl StabilityReport {
    pub fn holds(&self) -> bool {
        self.lhs <= self.bound * (1.0 + 1e-6)
    }
}

pub fn stability_check(problem: &CellProblem, sol: &CellSolution) -> StabilityReport {
    let (lambda, big_lambda) = problem.ellipticity();
    let iota = problem.spec().params.iota();
    let lhs = sol
        .directions
        .iter()
        .map(|d| d.grad_sq.sqrt() + iota * d.hess_sq.sqrt())
        .fold(0.0, f64::max);
    let coercivity_ratio = sol
        .directions
        .iter()
        .map(|d| d.diffusion_energy / lambda)
        .fold(f64::INFINITY, f64::min);
    StabilityReport {
        lhs,
        bound: big_lambda.sqrt() + (big_lambda / lambda).sqrt(),
        lambda,
        big_lambda,
        coercivity_ratio,
    }
}

/// Smallest margin of `A_H xi . xi >= lambda` and
/// `A_H xi . xi >= |A_H xi|^2 / Lambda` over `probes` random unit vectors.
pub fn ah_ellipticity_margin(a_h: &Matrix2<f64>, lambda: f64, big_lambda: f64, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut margin = f64::INFINITY;
    for _ in 0..probes {
        let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let xi = Vector2::new(t.cos(), t.sin());
        let axi = a_h * xi;
        let q = axi.dot(&xi);
        margin = margin.min(q - lambda).min(q - axi.norm_squared() / big_lambda);
    }
    margin
}
