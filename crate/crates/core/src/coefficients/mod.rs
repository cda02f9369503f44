//! Coefficient fields, scale parameters and ellipticity diagnostics.

mod corrector;
mod effective;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::Point2;

pub use corrector::{corrector_1d, example1_profile, solve_corrector_1d, Corrector1D};
pub use effective::{AnalyticEffective, Example, Regime};

/// `epsilon`, `gamma`, `mu` and the derived fourth-order weight
/// `iota = mu * epsilon^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParams {
    epsilon: f64,
    gamma: f64,
    mu: f64,
    iota: f64,
}

impl ScaleParams {
    pub fn new(epsilon: f64, gamma: f64, mu: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0,1), got {epsilon}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid(format!("gamma must be positive, got {gamma}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid(format!("mu must be positive, got {mu}")));
        }
        Ok(Self {
            epsilon,
            gamma,
            mu,
            iota: mu * epsilon.powf(gamma),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn iota(&self) -> f64 {
        self.iota
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.gamma)
    }
}

/// Structural tag of a coefficient field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Layered,
    LocallyPeriodic,
    Constant,
    Custom,
}

#[derive(Clone)]
enum Evaluator {
    Example1 { eps: f64 },
    Example2 { eps: f64 },
    Constant(Matrix2<f64>),
    Custom(Arc<dyn Fn(Point2) -> Matrix2<f64> + Send + Sync>),
}

/// A 2x2 matrix-valued coefficient `x -> A(x)`, cheap to clone and safe to
/// evaluate from several threads.
#[derive(Clone)]
pub struct CoefficientField {
    eval: Evaluator,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.eval {
            Evaluator::Example1 { eps } => write!(f, "example1(eps={eps})"),
            Evaluator::Example2 { eps } => write!(f, "example2(eps={eps})"),
            Evaluator::Constant(a) => write!(f, "constant({}, {}, {}, {})", a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]),
            Evaluator::Custom(_) => write!(f, "custom"),
        }
    }
}

impl CoefficientField {
    /// Layered benchmark depending on `x1 / eps` only.
    pub fn example1(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(invalid(format!("eps must be positive, got {eps}")));
        }
        Ok(Self { eval: Evaluator::Example1 { eps } })
    }

    /// Locally periodic, nonsymmetric benchmark with slow off-diagonal terms.
    pub fn example2(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(invalid(format!("eps must be positive, got {eps}")));
        }
        Ok(Self { eval: Evaluator::Example2 { eps } })
    }

    pub fn constant(a: Matrix2<f64>) -> Self {
        Self { eval: Evaluator::Constant(a) }
    }

    pub fn identity() -> Self {
        Self::constant(Matrix2::identity())
    }

    pub fn custom(f: impl Fn(Point2) -> Matrix2<f64> + Send + Sync + 'static) -> Self {
        Self { eval: Evaluator::Custom(Arc::new(f)) }
    }

    /// Parse `"example1"`, `"example2"` (using `eps`) or `"constant:a11,a12,a21,a22"`.
    pub fn from_id(id: &str, eps: f64) -> Result<Self> {
        let id = id.trim();
        match id {
            "example1" => Self::example1(eps),
            "example2" => Self::example2(eps),
            _ => {
                let Some(rest) = id.strip_prefix("constant:") else {
                    return Err(invalid(format!("unknown coefficient id '{id}'")));
                };
                let vals = rest
                    .split(|c| c == ',' || c == ' ')
                    .filter(|s| !s.is_empty())
                    .map(f64::from_str)
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| invalid(format!("bad constant coefficient '{rest}': {e}")))?;
                if vals.len() != 4 {
                    return Err(invalid(format!("constant coefficient needs 4 entries, got {}", vals.len())));
                }
                Ok(Self::constant(Matrix2::new(vals[0], vals[1], vals[2], vals[3])))
            }
        }
    }

    pub fn kind(&self) -> FieldKind {
        match self.eval {
            Evaluator::Example1 { .. } => FieldKind::Layered,
            Evaluator::Example2 { .. } => FieldKind::LocallyPeriodic,
            Evaluator::Constant(_) => FieldKind::Constant,
            Evaluator::Custom(_) => FieldKind::Custom,
        }
    }

    /// Period of the fast variable, when known.
    pub fn period(&self) -> Option<f64> {
        match self.eval {
            Evaluator::Example1 { eps } | Evaluator::Example2 { eps } => Some(eps),
            _ => None,
        }
    }

    #[inline]
    pub fn eval(&self, x: Point2) -> Matrix2<f64> {
        match &self.eval {
            Evaluator::Example1 { eps } => {
                let t = 2.0 * PI * x.x1 / eps;
                let (s, c) = t.sin_cos();
                let d = 2.0 * PI - c;
                Matrix2::new(
                    (50.0 + 4.0 * PI * PI * c) / d,
                    (4.0 * PI * PI + 25.0 / PI) * s / d,
                    0.0,
                    (4.0 * PI * PI - 1.0 + s) / d,
                )
            }
            Evaluator::Example2 { eps } => {
                let c1 = (2.0 * PI * x.x1 / eps).cos();
                let s1 = (2.0 * PI * x.x1 / eps).sin();
                let c2 = (2.0 * PI * x.x2 / eps).cos();
                let s2 = (2.0 * PI * x.x2 / eps).sin();
                Matrix2::new(
                    (20.0 * PI + 4.0 * PI * PI * c1) / (2.0 * PI - c1),
                    2.0 + (2.0 * PI * x.x1).sin() + c2,
                    3.0 + (2.0 * PI * x.x2).cos() + s1,
                    (22.0 * PI + 4.0 * PI * PI * s2) / (2.0 * PI - s2),
                )
            }
            Evaluator::Constant(a) => *a,
            Evaluator::Custom(f) => f(x),
        }
    }
}

/// Pointwise ellipticity constants of `A`: the smallest eigenvalue of the
/// symmetric part (`min A xi.xi / |xi|^2`) and the largest value of
/// `|A xi|^2 / (A xi . xi)` over unit `xi`, both exact for a 2x2 matrix.
pub fn pointwise_ellipticity(a: &Matrix2<f64>) -> std::result::Result<(f64, f64), (Vector2<f64>, f64)> {
    let s = 0.5 * (a + a.transpose());
    let eig = SymmetricEigen::new(s);
    let (imin, lam) = if eig.eigenvalues[0] <= eig.eigenvalues[1] {
        (0, eig.eigenvalues[0])
    } else {
        (1, eig.eigenvalues[1])
    };
    if !(lam > 0.0) {
        return Err((eig.eigenvectors.column(imin).into_owned(), lam));
    }
    // Largest generalized eigenvalue of (A^T A, S): eigenvalues of S^{-1} A^T A
    // solve t^2 - tr(M) t + det(M) = 0 with real nonnegative roots.
    let m = s.try_inverse().expect("positive definite") * (a.transpose() * a);
    let tr = m.trace();
    let det = m.determinant();
    let disc = (0.25 * tr * tr - det).max(0.0);
    Ok((lam, 0.5 * tr + disc.sqrt()))
}

/// Ellipticity constants `(lambda, Lambda)` over the given points.
pub fn ellipticity_over(field: &CoefficientField, points: impl IntoIterator<Item = Point2>) -> Result<(f64, f64)> {
    let mut lam = f64::INFINITY;
    let mut big = 0.0_f64;
    for x in points {
        let a = field.eval(x);
        match pointwise_ellipticity(&a) {
            Ok((l, b)) => {
                lam = lam.min(l);
                big = big.max(b);
            }
            Err((xi, value)) => {
                return Err(Error::NotElliptic {
                    x,
                    xi: (xi[0], xi[1]),
                    value,
                })
            }
        }
    }
    if !lam.is_finite() {
        return Err(invalid("ellipticity check needs at least one sample"));
    }
    Ok((lam, big))
}

/// Monte-Carlo estimate of `(lambda, Lambda)` over `samples` random points in
/// the unit square, exact in the direction `xi`.
pub fn ellipticity_check(field: &CoefficientField, samples: usize) -> Result<(f64, f64)> {
    ellipticity_check_seeded(field, samples, 0x5eed)
}

pub fn ellipticity_check_seeded(field: &CoefficientField, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(invalid("samples must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Point2> = (0..samples)
        .map(|_| Point2::new(rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    ellipticity_over(field, pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn example1_values() {
        let f = CoefficientField::example1(0.1).unwrap();
        let a = f.eval(Point2::new(0.0, 0.3));
        assert!((a[(0, 0)] - (50.0 + 4.0 * PI * PI) / (2.0 * PI - 1.0)).abs() < 1e-12);
        assert!((a[(0, 0)] - 16.935).abs() < 2e-3);
        let b = f.eval(Point2::new(0.025, 0.7));
        assert_eq!(b[(1, 0)], 0.0);
        assert!((b[(1, 1)] - 4.0 * PI * PI / (2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn example2_offdiagonal_gap_at_origin() {
        for eps in [0.5, 0.1, 1.0 / 16.0] {
            let a = CoefficientField::example2(eps).unwrap().eval(Point2::new(0.0, 0.0));
            assert!((a[(0, 1)] - a[(1, 0)] + 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn example2_is_elliptic() {
        let f = CoefficientField::example2(1.0 / 16.0).unwrap();
        let (lam, big) = ellipticity_check(&f, 10_000).unwrap();
        assert!(lam > 0.0 && big >= lam);
    }

    #[test]
    fn ellipticity_of_simple_matrices() {
        let (l, b) = ellipticity_check(&CoefficientField::identity(), 10).unwrap();
        assert!((l - 1.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
        let d = CoefficientField::constant(Matrix2::new(2.0, 0.0, 0.0, 3.0));
        let (l, b) = ellipticity_check(&d, 10).unwrap();
        assert!((l - 2.0).abs() < 1e-14 && (b - 3.0).abs() < 1e-13);
        let rot = CoefficientField::constant(Matrix2::new(0.0, -1.0, 1.0, 0.0));
        assert!(matches!(ellipticity_check(&rot, 10), Err(Error::NotElliptic { .. })));
    }

    #[test]
    fn parse_ids() {
        let c = CoefficientField::from_id("constant:1,0.5,0,2", 0.1).unwrap();
        assert_eq!(c.eval(Point2::new(0.3, 0.3)), Matrix2::new(1.0, 0.5, 0.0, 2.0));
        assert_eq!(CoefficientField::from_id("example1", 0.1).unwrap().kind(), FieldKind::Layered);
        assert!(CoefficientField::from_id("example3", 0.1).is_err());
        assert!(CoefficientField::from_id("constant:1,2", 0.1).is_err());
    }

    #[test]
    fn scale_params_validation() {
        assert!(ScaleParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ScaleParams::new(1.0, 1.0, 1.0).is_err());
        assert!(ScaleParams::new(0.1, 0.0, 1.0).is_err());
        assert!(ScaleParams::new(0.1, 1.0, -1.0).is_err());
        let p = ScaleParams::new(0.0625, 4.0, 1.0).unwrap();
        assert!((p.iota() - 0.0625_f64.powi(4)).abs() <= 1e-15 * p.iota());
    }

    proptest! {
        #[test]
        fn example1_is_periodic(x1 in -3.0..3.0f64, x2 in -1.0..1.0f64, k in 1u32..6) {
            let eps = 1.0 / f64::from(1u32 << k);
            let f = CoefficientField::example1(eps).unwrap();
            let d = (f.eval(Point2::new(x1, x2)) - f.eval(Point2::new(x1 + eps, x2))).abs().max();
            prop_assert!(d < 1e-11);
        }

        #[test]
        fn example2_fast_periodicity(x1 in 0.0..1.0f64, x2 in 0.0..1.0f64, y1 in 0.0..1.0f64, y2 in 0.0..1.0f64) {
            // A(x, y) with the slow variable frozen: shifting only the fast
            // arguments by whole periods leaves the matrix unchanged.
            let eps = 1.0 / 8.0;
            let fast = |s: f64, t: f64| {
                let c1 = (2.0 * PI * s).cos();
                let s1 = (2.0 * PI * s).sin();
                let c2 = (2.0 * PI * t).cos();
                let s2 = (2.0 * PI * t).sin();
                Matrix2::new(
                    (20.0 * PI + 4.0 * PI * PI * c1) / (2.0 * PI - c1),
                    2.0 + (2.0 * PI * x1).sin() + c2,
                    3.0 + (2.0 * PI * x2).cos() + s1,
                    (22.0 * PI + 4.0 * PI * PI * s2) / (2.0 * PI - s2),
                )
            };
            prop_assert!((fast(y1, y2) - fast(y1 + 1.0, y2 + 1.0)).abs().max() < 1e-10);
            let f = CoefficientField::example2(eps).unwrap();
            let on_grid = f.eval(Point2::new(x1, x2));
            prop_assert!((on_grid - fast(x1 / eps, x2 / eps)).abs().max() < 1e-9);
        }

        #[test]
        fn iota_decreases_in_gamma(eps in 0.01..0.99f64, g1 in 0.1..8.0f64, dg in 0.01..2.0f64) {
            let a = ScaleParams::new(eps, g1, 1.0).unwrap().iota();
            let b = ScaleParams::new(eps, g1 + dg, 1.0).unwrap().iota();
            prop_assert!(b < a);
        }
    }
}
