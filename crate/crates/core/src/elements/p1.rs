use nalgebra::{Matrix2, Matrix3, Vector2};

use crate::error::{invalid, Result};
use crate::geometry::Point2;

/// Area and constant gradients of the three P1 hat functions.
pub fn p1_gradients(tri: &[Point2; 3]) -> Result<(f64, [Vector2<f64>; 3])> {
    let [a, b, c] = *tri;
    let twice = (b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2);
    let diam = a.dist(&b).max(b.dist(&c)).max(c.dist(&a));
    if !(twice.abs() > 1e-14 * diam * diam) {
        return Err(invalid("degenerate triangle"));
    }
    let grads = [0, 1, 2].map(|i| {
        let p = tri[(i + 1) % 3];
        let q = tri[(i + 2) % 3];
        Vector2::new(p.x2 - q.x2, q.x1 - p.x1) / twice
    });
    Ok((0.5 * twice.abs(), grads))
}

/// `K[i][j] = |K| grad(phi_i) . A grad(phi_j)`; row `i` is the test function.
pub fn p1_local_diffusion(tri: &[Point2; 3], a: &Matrix2<f64>) -> Result<Matrix3<f64>> {
    let (area, g) = p1_gradients(tri)?;
    Ok(Matrix3::from_fn(|i, j| area * g[i].dot(&(a * g[j]))))
}
