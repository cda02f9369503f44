//! Cross-module identities on small cells.

use hmm_sp::cell::{
    constraint_defect, hill_residual_with, second_order_cell, solve_cell, BoundaryCondition, CellProblem, CellSpec,
    Weighting,
};
use hmm_sp::coefficients::{CoefficientField, ScaleParams};
use hmm_sp::experiment::random_elliptic;
use hmm_sp::geometry::{MeshPattern, Point2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec(bc: BoundaryCondition, field: CoefficientField, center: Point2, n: usize) -> CellSpec {
    CellSpec::new(center, 0.25, n, bc, ScaleParams::new(0.125, 1.0, 1.0).unwrap(), field).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn constants_are_reproduced(seed in any::<u64>(), cx in 0.0..1.0f64, cy in 0.0..1.0f64) {
        let c = random_elliptic(&mut ChaCha8Rng::seed_from_u64(seed));
        for bc in BoundaryCondition::ALL {
            for pattern in [MeshPattern::UniformDiagonal, MeshPattern::Crisscross] {
                let s = spec(bc, CoefficientField::constant(c), Point2::new(cx, cy), 4).with_pattern(pattern);
                let a_h = solve_cell(&s).unwrap().effective(Weighting::Cosine).unwrap();
                prop_assert!((a_h - c).norm() <= 1e-10 * c.norm());
            }
        }
    }

    #[test]
    fn hill_holds_at_any_centre(cx in 0.0..1.0f64, cy in 0.0..1.0f64) {
        let s = spec(BoundaryCondition::Natural, CoefficientField::example2(0.125).unwrap(), Point2::new(cx, cy), 8);
        let p = CellProblem::new(&s).unwrap();
        let sol = p.solve().unwrap();
        prop_assert!(hill_residual_with(&p, &sol, &sol).unwrap() <= 1e-9);
        prop_assert!(constraint_defect(&sol) <= 1e-9);
    }
}

#[test]
fn translation_by_a_period_is_invisible() {
    let field = || CoefficientField::example1(0.125).unwrap();
    let a = solve_cell(&spec(BoundaryCondition::Essential, field(), Point2::new(0.5, 0.5), 8)).unwrap();
    let b = solve_cell(&spec(BoundaryCondition::Essential, field(), Point2::new(0.625, 0.375), 8)).unwrap();
    let (a, b) = (a.effective(Weighting::None).unwrap(), b.effective(Weighting::None).unwrap());
    assert!((a - b).norm() <= 1e-10 * a.norm());
}

#[test]
fn second_order_limit_is_close_for_tiny_iota() {
    let field = CoefficientField::example1(0.125).unwrap();
    let s = CellSpec::new(
        Point2::new(0.5, 0.5),
        0.25,
        32,
        BoundaryCondition::Essential,
        ScaleParams::new(0.125, 8.0, 1.0).unwrap(),
        field,
    )
    .unwrap();
    let four = solve_cell(&s).unwrap().effective(Weighting::None).unwrap();
    let two = second_order_cell(&s).unwrap().effective(Weighting::None).unwrap();
    assert!((four - two).norm() / two.norm() < 1e-2);
}
