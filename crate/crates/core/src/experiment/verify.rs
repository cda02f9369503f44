//! Quick self-checks behind `hmm-sp verify`: small instances of the
//! identities the solvers must satisfy, each reported pass/fail.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::study::compute_rates;
use crate::cell::{
    ah_ellipticity_margin, constraint_defect, hill_residual_with, solve_cell, stability_check, BoundaryCondition,
    CellProblem, CellSpec, Weighting,
};
use crate::coefficients::{corrector_1d, example1_profile, AnalyticEffective, CoefficientField, Example, ScaleParams};
use crate::error::Result;
use crate::geometry::{build_square_mesh, MeshPattern, Point2};
use crate::linsys::{solve_saddle, SparseSystem};
use crate::macro_hmm::{assemble_macro, exact_gradient, exact_solution, relative_h1_error, solve_macro, EffectiveMap};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, r: Result<(bool, String)>) -> Check {
    match r {
        Ok((passed, detail)) => Check {
            name: name.into(),
            passed,
            detail,
        },
        Err(e) => Check {
            name: name.into(),
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Random matrix with symmetric part eigenvalues in `[0.5, 3]`.
pub fn random_elliptic(rng: &mut impl Rng) -> Matrix2<f64> {
    let t: f64 = rng.random_range(0.0..PI);
    let (c, s) = (t.cos(), t.sin());
    let q = Matrix2::new(c, -s, s, c);
    let d = Matrix2::new(rng.random_range(0.5..3.0), 0.0, 0.0, rng.random_range(0.5..3.0));
    let skew = rng.random_range(-0.5..0.5);
    q * d * q.transpose() + Matrix2::new(0.0, skew, -skew, 0.0)
}

fn kkt() -> Result<(bool, String)> {
    let mut k = SparseSystem::new(3);
    for i in 0..3 {
        k.add(i, i, 1.0);
    }
    let (x, mu) = solve_saddle(&k, &[vec![(0, 1.0), (1, 1.0), (2, 1.0)]], &[-1.0, 0.0, 1.0], &[0.0])?;
    let ok = (x[0] + 1.0).abs() < 1e-12 && x[1].abs() < 1e-12 && (x[2] - 1.0).abs() < 1e-12 && mu[0].abs() < 1e-12;
    Ok((ok, format!("x = {x:?}, mu = {mu:?}")))
}

fn constants(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..2 {
        let c = random_elliptic(&mut rng);
        for bc in BoundaryCondition::ALL {
            for w in [Weighting::None, Weighting::Cosine] {
                let spec = CellSpec::new(
                    Point2::new(0.3, 0.6),
                    0.25,
                    6,
                    bc,
                    ScaleParams::new(0.125, 1.0, 1.0)?,
                    CoefficientField::constant(c),
                )?
                .with_weighting(w);
                let a_h = solve_cell(&spec)?.effective(w)?;
                worst = worst.max((a_h - c).norm() / c.norm());
            }
        }
    }
    Ok((worst <= 1e-10, format!("max relative gap {worst:.2e}")))
}

fn identities(seed: u64) -> Result<(bool, String)> {
    let eps = 0.125;
    let spec = CellSpec::new(
        Point2::new(0.4, 0.7),
        0.25,
        8,
        BoundaryCondition::Essential,
        ScaleParams::new(eps, 1.0, 1.0)?,
        CoefficientField::example2(eps)?,
    )?;
    let p = CellProblem::new(&spec)?;
    let sol = p.solve()?;
    let hill = hill_residual_with(&p, &sol, &sol)?;
    let defect = constraint_defect(&sol);
    let st = stability_check(&p, &sol);
    let (lambda, big) = p.ellipticity();
    let margin = ah_ellipticity_margin(&sol.effective(Weighting::None)?, lambda, big, 64, seed);
    let ok = hill <= 1e-9 && defect <= 1e-9 && st.holds() && margin >= -1e-12;
    Ok((
        ok,
        format!("hill {hill:.2e}, defect {defect:.2e}, stability {:.3} <= {:.3}, margin {margin:.2e}", st.lhs, st.bound),
    ))
}

fn free_formulation() -> Result<(bool, String)> {
    let eps = 0.125;
    let spec = CellSpec::new(
        Point2::new(0.5, 0.5),
        0.25,
        8,
        BoundaryCondition::Free,
        ScaleParams::new(eps, 1.0, 1.0)?,
        CoefficientField::example2(eps)?,
    )?;
    let p = CellProblem::new(&spec)?;
    let a = p.solve()?.effective(Weighting::None)?;
    let b = p.solve_free_formulation()?.effective(Weighting::None)?;
    let gap = (a - b).norm() / a.norm();
    Ok((gap <= 1e-9, format!("relative gap {gap:.2e}")))
}

fn oracle() -> Result<(bool, String)> {
    let c = corrector_1d(&example1_profile, &ScaleParams::new(0.0625, 1.0, 1.0)?, 128)?;
    let gap = (c.a_bar - 25.0 / PI).abs() / (25.0 / PI);
    Ok((gap <= 1e-9, format!("a_bar = {:.12}, gap {gap:.2e}", c.a_bar)))
}

fn analytic() -> Result<(bool, String)> {
    let (a11, a22) = AnalyticEffective::new(Example::One, 4.0)?.diagonal();
    let closed = 4.0 * PI * PI / ((25.0 + 4.0 * PI.powi(3)) / (625.0 - 4.0 * PI.powi(4)).sqrt() - 1.0);
    let ok = (a11 - closed).abs() <= 1e-9 * closed && a22 > a11;
    Ok((ok, format!("Abar11 = {a11:.10}, closed form {closed:.10}")))
}

fn macro_rate() -> Result<(bool, String)> {
    let mut errs = Vec::new();
    for n in [4, 8, 16] {
        let mesh = build_square_mesh(Point2::new(0.0, 0.0), 1.0, n, MeshPattern::UniformDiagonal)?;
        let sys = assemble_macro(&mesh, &EffectiveMap::from_fn(&mesh, |_| Matrix2::identity()))?;
        let sol = solve_macro(&mesh, &sys, &|x| 2.0 * PI * PI * exact_solution(x))?;
        errs.push(relative_h1_error(&mesh, &sol, &exact_gradient)?);
    }
    let rates = compute_rates(&errs)?;
    let ok = rates.iter().flatten().all(|r| (0.75..=1.25).contains(r));
    Ok((ok, format!("errors {errs:.3?}, rates {rates:.2?}")))
}

fn rates() -> Result<(bool, String)> {
    let r = compute_rates(&[0.4, 0.2, 0.1])?;
    Ok((r == vec![None, Some(1.0), Some(1.0)], format!("{r:?}")))
}

pub fn run_verify(seed: u64) -> Vec<Check> {
    vec![
        check("saddle solver KKT example", kkt()),
        check("constant coefficients reproduced", constants(seed)),
        check("Hill / constraint / stability / ellipticity", identities(seed)),
        check("free formulation equivalence", free_formulation()),
        check("1D corrector oracle at gamma = 1", oracle()),
        check("analytic effective matrix closed form", analytic()),
        check("macro P1 first-order rate", macro_rate()),
        check("rate arithmetic", rates()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_verify(7) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
