//! Macroscopic P1 solver driven by cell-extracted effective matrices.
//!
//! The bilinear form uses the vertex rule on each triangle (nodes = the
//! three vertices, weights 1/3), so one cell problem per mesh vertex suffices
//! and is shared by all incident triangles.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::cell::{effective_matrix, solve_cell, CellSpec, EffectiveSample};
use crate::coefficients::AnalyticEffective;
use crate::elements::p1::{p1_gradients, p1_local_diffusion};
use crate::elements::quadrature::QuadratureRule;
use crate::error::{invalid, Error, Result};
use crate::geometry::{Mesh, Point2};
use crate::linsys::{Factorization, SparseSystem};

/// Effective matrices indexed by macro vertex.
#[derive(Debug, Clone, Default)]
pub struct EffectiveMap {
    samples: Vec<Option<Matrix2<f64>>>,
}

impl EffectiveMap {
    pub fn with_vertices(n: usize) -> Self {
        Self { samples: vec![None; n] }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(Point2) -> Matrix2<f64>) -> Self {
        Self {
            samples: mesh.vertices().iter().map(|&p| Some(f(p))).collect(),
        }
    }

    pub fn from_samples(n: usize, samples: impl IntoIterator<Item = (usize, EffectiveSample)>) -> Self {
        let mut m = Self::with_vertices(n);
        for (v, s) in samples {
            m.set(v, s.a_h);
        }
        m
    }

    pub fn set(&mut self, vertex: usize, a_h: Matrix2<f64>) {
        self.samples[vertex] = Some(a_h);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, vertex: usize) -> Result<&Matrix2<f64>> {
        self.samples
            .get(vertex)
            .and_then(|s| s.as_ref())
            .ok_or(Error::IncompleteEffectiveMap(vertex))
    }
}

/// Solve one cell per macro vertex (in parallel on the current rayon pool).
/// `template` supplies everything but the centre.
pub fn compute_effective_map(mesh: &Mesh, template: &CellSpec) -> Result<EffectiveMap> {
    let samples: Vec<Result<Matrix2<f64>>> = mesh
        .vertices()
        .par_iter()
        .map(|&x| {
            let mut spec = template.clone();
            spec.center = x;
            let sol = solve_cell(&spec)?;
            Ok(effective_matrix(&spec, &sol, spec.weighting)?.a_h)
        })
        .collect();
    let mut map = EffectiveMap::with_vertices(mesh.n_vertices());
    for (v, s) in samples.into_iter().enumerate() {
        map.set(v, s?);
    }
    Ok(map)
}

/// `K_ij = sum_K |K| grad phi_i . (1/3 sum_l A_H(x_l)) grad phi_j`.
pub fn assemble_macro(mesh: &Mesh, eff: &EffectiveMap) -> Result<SparseSystem> {
    if eff.len() != mesh.n_vertices() {
        return Err(invalid(format!(
            "effective map has {} entries for {} vertices",
            eff.len(),
            mesh.n_vertices()
        )));
    }
    let mut sys = SparseSystem::with_capacity(mesh.n_vertices(), 9 * mesh.n_triangles());
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let mut a = Matrix2::zeros();
        for &v in tri {
            a += eff.get(v)? / 3.0;
        }
        let local = p1_local_diffusion(&mesh.triangle_points(k), &a)?;
        for i in 0..3 {
            for j in 0..3 {
                sys.add(tri[i], tri[j], local[(i, j)]);
            }
        }
    }
    Ok(sys)
}

/// Exact solution `sin(pi x1) sin(pi x2)` of the macro benchmark.
pub fn exact_solution(x: Point2) -> f64 {
    (PI * x.x1).sin() * (PI * x.x2).sin()
}

pub fn exact_gradient(x: Point2) -> Vector2<f64> {
    let (s1, c1) = (PI * x.x1).sin_cos();
    let (s2, c2) = (PI * x.x2).sin_cos();
    Vector2::new(PI * c1 * s2, PI * s1 * c2)
}

/// `-div(A grad u) = -div_A . grad u - A : hess u` for the exact solution,
/// given `A(x)` and its column divergence at `x`.
pub fn manufactured_source_with(x: Point2, a: &Matrix2<f64>, div_a: &Vector2<f64>) -> f64 {
    let (s1, c1) = (PI * x.x1).sin_cos();
    let (s2, c2) = (PI * x.x2).sin_cos();
    let grad = Vector2::new(PI * c1 * s2, PI * s1 * c2);
    let pi2 = PI * PI;
    let hess = Matrix2::new(-pi2 * s1 * s2, pi2 * c1 * c2, pi2 * c1 * c2, -pi2 * s1 * s2);
    -div_a.dot(&grad) - a.component_mul(&hess).sum()
}

/// Source for the analytic effective matrix of a benchmark.
pub fn manufactured_source(x: Point2, effective: &AnalyticEffective) -> f64 {
    manufactured_source_with(x, &effective.eval(x), &effective.divergence(x))
}

#[derive(Debug, Clone)]
pub struct MacroSolution {
    /// Nodal values, zero on the boundary.
    pub u: Vec<f64>,
    pub n_unknowns: usize,
}

/// Homogeneous Dirichlet solve with a degree-4 load rule.
pub fn solve_macro(mesh: &Mesh, system: &SparseSystem, f: &dyn Fn(Point2) -> f64) -> Result<MacroSolution> {
    let nv = mesh.n_vertices();
    if system.dim() != nv {
        return Err(invalid("macro system does not match the mesh"));
    }
    let rule = QuadratureRule::dunavant6();
    let mut load = vec![0.0; nv];
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let pts = mesh.triangle_points(k);
        let area = mesh.triangle_area(k);
        for (l, w) in rule.iter() {
            let x = Point2::new(
                l[0] * pts[0].x1 + l[1] * pts[1].x1 + l[2] * pts[2].x1,
                l[0] * pts[0].x2 + l[1] * pts[1].x2 + l[2] * pts[2].x2,
            );
            let fx = f(x);
            for i in 0..3 {
                load[tri[i]] += w * area * fx * l[i];
            }
        }
    }
    let mut index = vec![None; nv];
    let mut n = 0;
    for v in 0..nv {
        if !mesh.is_boundary_vertex(v) {
            index[v] = Some(n);
            n += 1;
        }
    }
    let mut u = vec![0.0; nv];
    if n > 0 {
        let mut reduced = SparseSystem::with_capacity(n, system.n_triplets());
        for &(i, j, val) in system.triplets() {
            if let (Some(a), Some(b)) = (index[i], index[j]) {
                reduced.add(a, b, val);
            }
        }
        let rhs: Vec<f64> = (0..nv).filter(|v| index[*v].is_some()).map(|v| load[v]).collect();
        let x = Factorization::new(reduced.compress()?)?.solve(&rhs)?;
        for v in 0..nv {
            if let Some(r) = index[v] {
                u[v] = x[r];
            }
        }
    }
    Ok(MacroSolution { u, n_unknowns: n })
}

/// `||grad(u - u_H)|| / ||grad u||` with a degree-5 rule per triangle.
pub fn relative_h1_error(mesh: &Mesh, sol: &MacroSolution, grad_exact: &dyn Fn(Point2) -> Vector2<f64>) -> Result<f64> {
    let rule = QuadratureRule::dunavant7();
    let (mut num, mut den) = (0.0, 0.0);
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let pts = mesh.triangle_points(k);
        let (area, g) = p1_gradients(&pts)?;
        let gh: Vector2<f64> = (0..3).map(|i| g[i] * sol.u[tri[i]]).sum();
        for (l, w) in rule.iter() {
            let x = Point2::new(
                l[0] * pts[0].x1 + l[1] * pts[1].x1 + l[2] * pts[2].x1,
                l[0] * pts[0].x2 + l[1] * pts[1].x2 + l[2] * pts[2].x2,
            );
            let ge = grad_exact(x);
            num += w * area * (ge - gh).norm_squared();
            den += w * area * ge.norm_squared();
        }
    }
    if !(den > 0.0) {
        return Err(invalid("exact gradient has zero norm"));
    }
    Ok((num / den).sqrt())
}

/// `max_v ||A_H(v) - Abar(v)||_F / ||Abar(v)||_F` over the given vertices,
/// in index order.
pub fn ef_hmm(eff: &EffectiveMap, points: &[Point2], analytic: &AnalyticEffective) -> Result<f64> {
    ef_with(eff, points, |x| analytic.eval(x))
}

pub fn ef_with(eff: &EffectiveMap, points: &[Point2], reference: impl Fn(Point2) -> Matrix2<f64>) -> Result<f64> {
    let mut worst = 0.0_f64;
    for (v, &x) in points.iter().enumerate() {
        let abar = reference(x);
        worst = worst.max((eff.get(v)? - abar).norm() / abar.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::Example;
    use crate::geometry::{build_square_mesh, MeshPattern};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_mesh(n: usize) -> Mesh {
        build_square_mesh(Point2::new(0.0, 0.0), 1.0, n, MeshPattern::UniformDiagonal).unwrap()
    }

    fn dense(sys: &SparseSystem) -> Vec<Vec<f64>> {
        let c = sys.compress().unwrap();
        (0..c.dim()).map(|i| (0..c.dim()).map(|j| c.get(i, j)).collect()).collect()
    }

    #[test]
    fn assembly_matches_direct_p1() {
        let mesh = unit_mesh(3);
        for a in [Matrix2::identity(), Matrix2::new(2.0, 0.0, 0.0, 3.0)] {
            let sys = assemble_macro(&mesh, &EffectiveMap::from_fn(&mesh, |_| a)).unwrap();
            let mut direct = SparseSystem::new(mesh.n_vertices());
            for (k, tri) in mesh.triangles().iter().enumerate() {
                let l = p1_local_diffusion(&mesh.triangle_points(k), &a).unwrap();
                for i in 0..3 {
                    for j in 0..3 {
                        direct.add(tri[i], tri[j], l[(i, j)]);
                    }
                }
            }
            let (x, y) = (dense(&sys), dense(&direct));
            for (r, s) in x.iter().zip(&y) {
                for (p, q) in r.iter().zip(s) {
                    assert!((p - q).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_triangle_vertex_rule() {
        let verts = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let mesh = Mesh::from_parts(verts, vec![[0, 1, 2]], None, 100.0).unwrap();
        let mut eff = EffectiveMap::with_vertices(3);
        let a11 = [1.0, 2.0, 6.0];
        for v in 0..3 {
            eff.set(v, Matrix2::new(a11[v], 0.5, 0.0, 1.0));
        }
        let c = assemble_macro(&mesh, &eff).unwrap().compress().unwrap();
        // Nodal values of x1 are (0, 1, 0).
        let x1 = [0.0, 1.0, 0.0];
        let e = c.bilinear(&x1, &x1);
        assert!((e - 0.5 * (1.0 + 2.0 + 6.0) / 3.0).abs() < 1e-14);
    }

    #[test]
    fn missing_sample_is_reported() {
        let mesh = unit_mesh(2);
        let mut eff = EffectiveMap::from_fn(&mesh, |_| Matrix2::identity());
        eff.samples[4] = None;
        assert!(matches!(assemble_macro(&mesh, &eff), Err(Error::IncompleteEffectiveMap(4))));
    }

    #[test]
    fn source_values() {
        let e = AnalyticEffective::new(Example::Two, 1.0).unwrap();
        let (a11, a22) = e.diagonal();
        let centre = manufactured_source(Point2::new(0.5, 0.5), &e);
        assert!((centre - PI * PI * (a11 + a22)).abs() < 1e-11);
        let corner = manufactured_source(Point2::new(0.0, 0.0), &e);
        assert!((corner + 6.0 * PI * PI).abs() < 1e-11);
        let x = Point2::new(0.3, 0.7);
        let (a, d) = (e.eval(x), e.divergence(x));
        let f1 = manufactured_source_with(x, &a, &d);
        let f2 = manufactured_source_with(x, &(2.0 * a), &(2.0 * d));
        assert!((f2 - 2.0 * f1).abs() < 1e-12);
    }

    #[test]
    fn source_matches_finite_differences() {
        let e = AnalyticEffective::new(Example::Two, 4.0).unwrap();
        let h = 1e-4;
        let flux = |x: Point2| e.eval(x) * exact_gradient(x);
        for x in [Point2::new(0.21, 0.63), Point2::new(0.8, 0.1)] {
            let d1 = (flux(Point2::new(x.x1 + h, x.x2))[0] - flux(Point2::new(x.x1 - h, x.x2))[0]) / (2.0 * h);
            let d2 = (flux(Point2::new(x.x1, x.x2 + h))[1] - flux(Point2::new(x.x1, x.x2 - h))[1]) / (2.0 * h);
            assert!((manufactured_source(x, &e) + d1 + d2).abs() < 1e-5);
        }
    }

    #[test]
    fn zero_source_zero_solution() {
        let mesh = unit_mesh(4);
        let sys = assemble_macro(&mesh, &EffectiveMap::from_fn(&mesh, |_| Matrix2::identity())).unwrap();
        let sol = solve_macro(&mesh, &sys, &|_| 0.0).unwrap();
        assert!(sol.u.iter().all(|v| *v == 0.0));
        assert!((relative_h1_error(&mesh, &sol, &exact_gradient).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn laplace_benchmark_converges_first_order() {
        let mut errs = Vec::new();
        for n in [4, 8, 16, 32] {
            let mesh = unit_mesh(n);
            let sys = assemble_macro(&mesh, &EffectiveMap::from_fn(&mesh, |_| Matrix2::identity())).unwrap();
            let sol = solve_macro(&mesh, &sys, &|x| 2.0 * PI * PI * exact_solution(x)).unwrap();
            errs.push(relative_h1_error(&mesh, &sol, &exact_gradient).unwrap());
        }
        for w in errs.windows(2) {
            let r = (w[0] / w[1]).log2();
            assert!((0.75..=1.25).contains(&r), "{errs:?}");
        }
    }

    #[test]
    fn relative_error_is_homogeneous() {
        let mesh = unit_mesh(6);
        let sol = MacroSolution {
            u: mesh.vertices().iter().map(|&x| exact_solution(x)).collect(),
            n_unknowns: 0,
        };
        let doubled = MacroSolution {
            u: sol.u.iter().map(|v| 2.0 * v).collect(),
            n_unknowns: 0,
        };
        let e1 = relative_h1_error(&mesh, &sol, &exact_gradient).unwrap();
        let e2 = relative_h1_error(&mesh, &doubled, &|x| 2.0 * exact_gradient(x)).unwrap();
        assert!(e1 < 0.3 && (e1 - e2).abs() < 1e-14);
        assert!(relative_h1_error(&mesh, &sol, &|_| Vector2::zeros()).is_err());
    }

    #[test]
    fn ef_values() {
        let mesh = unit_mesh(2);
        let e = AnalyticEffective::new(Example::Two, 0.25).unwrap();
        let mut eff = EffectiveMap::from_fn(&mesh, |x| e.eval(x));
        assert_eq!(ef_hmm(&eff, mesh.vertices(), &e).unwrap(), 0.0);
        let x = mesh.vertices()[3];
        let a = e.eval(x);
        eff.set(3, a + Matrix2::new(0.01 * a.norm(), 0.0, 0.0, 0.0));
        assert!((ef_hmm(&eff, mesh.vertices(), &e).unwrap() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn coercivity_probe() {
        let mesh = unit_mesh(5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lambda = 0.5;
        // Random nonsymmetric matrices with symmetric part >= lambda.
        let eff = EffectiveMap::from_fn(&mesh, |x| {
            let s = (7.0 * x.x1 + 3.0 * x.x2).sin();
            Matrix2::new(lambda + 1.0 + s * s, 2.0 * s, -2.0 * s, lambda + 0.2)
        });
        let k = assemble_macro(&mesh, &eff).unwrap().compress().unwrap();
        let lap = assemble_macro(&mesh, &EffectiveMap::from_fn(&mesh, |_| Matrix2::identity()))
            .unwrap()
            .compress()
            .unwrap();
        for _ in 0..50 {
            let xi: Vec<f64> = (0..mesh.n_vertices())
                .map(|v| if mesh.is_boundary_vertex(v) { 0.0 } else { rng.random_range(-1.0..1.0) })
                .collect();
            assert!(k.bilinear(&xi, &xi) >= lambda * lap.bilinear(&xi, &xi) - 1e-9);
        }
    }
}
