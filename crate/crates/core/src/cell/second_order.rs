//! P1 solve of the second-order limit `-div(A grad v0) = 0`, `v0 = V_l` on
//! the cell boundary.

use nalgebra::{Matrix2, Vector2};

use super::{cosine_weight, CellSolution, CellSpec, DirectionSolution, ElementKind};
use crate::elements::p1::p1_gradients;
use crate::elements::quadrature::micro_rule;
use crate::error::Result;
use crate::geometry::build_square_mesh;
use crate::linsys::{Factorization, SparseSystem};

pub fn second_order_cell(spec: &CellSpec) -> Result<CellSolution> {
    spec.validate()?;
    let mesh = build_square_mesh(spec.origin(), spec.delta, spec.n_h, spec.pattern)?;
    let rule = micro_rule(spec.quadrature_degree)?;
    let nv = mesh.n_vertices();

    // Per-triangle gradients and quadrature-mean coefficient.
    let mut elems = Vec::with_capacity(mesh.n_triangles());
    for k in 0..mesh.n_triangles() {
        let pts = mesh.triangle_points(k);
        let (area, grads) = p1_gradients(&pts)?;
        let mut a_mean = Matrix2::zeros();
        let mut nodes = Vec::with_capacity(rule.len());
        for (l, w) in rule.iter() {
            let x = crate::geometry::Point2::new(
                l[0] * pts[0].x1 + l[1] * pts[1].x1 + l[2] * pts[2].x1,
                l[0] * pts[0].x2 + l[1] * pts[1].x2 + l[2] * pts[2].x2,
            );
            let a = spec.field.eval(x);
            a_mean += w * a;
            nodes.push((w, a, cosine_weight(spec.center, spec.delta, x)));
        }
        elems.push((area, grads, a_mean, nodes));
    }

    let mut index = vec![None; nv];
    let mut n_free = 0;
    for v in 0..nv {
        if !mesh.is_boundary_vertex(v) {
            index[v] = Some(n_free);
            n_free += 1;
        }
    }
    let mut sys = SparseSystem::new(n_free);
    // Couplings from free rows to clamped columns, kept to build the loads.
    let mut coupling: Vec<(usize, usize, f64)> = Vec::new();
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let (area, g, a, _) = &elems[k];
        for i in 0..3 {
            let Some(ri) = index[tri[i]] else { continue };
            for j in 0..3 {
                let val = area * g[i].dot(&(a * g[j]));
                match index[tri[j]] {
                    Some(rj) => sys.add(ri, rj, val),
                    None => coupling.push((ri, tri[j], val)),
                }
            }
        }
    }
    let fact = if n_free > 0 { Some(Factorization::new(sys.compress()?)?) } else { None };

    let area_cell = spec.area();
    let c = [spec.center.x1, spec.center.x2];
    let mut dirs = Vec::with_capacity(2);
    for j in 0..2 {
        let big_v: Vec<f64> = mesh.vertices().iter().map(|p| [p.x1, p.x2][j] - c[j]).collect();
        let mut rhs = vec![0.0; n_free];
        for &(ri, col, val) in &coupling {
            rhs[ri] -= val * big_v[col];
        }
        let mut v = big_v.clone();
        if let Some(f) = &fact {
            let x = f.solve(&rhs)?;
            for (vi, idx) in v.iter_mut().zip(&index) {
                if let Some(r) = idx {
                    *vi = x[*r];
                }
            }
        }
        let mut d = DirectionSolution {
            dofs: Vec::new(),
            mean_grad: Vector2::zeros(),
            mean_flux: Vector2::zeros(),
            weighted_mean_grad: Vector2::zeros(),
            weighted_mean_flux: Vector2::zeros(),
            diffusion_energy: 0.0,
            hessian_energy: 0.0,
            grad_sq: 0.0,
            hess_sq: 0.0,
        };
        for (k, tri) in mesh.triangles().iter().enumerate() {
            let (area, g, a_mean, nodes) = &elems[k];
            let grad: Vector2<f64> = (0..3).map(|i| g[i] * v[tri[i]]).sum();
            let s = area / area_cell;
            d.mean_grad += s * grad;
            d.mean_flux += s * (a_mean * grad);
            d.diffusion_energy += s * grad.dot(&(a_mean * grad));
            d.grad_sq += s * grad.norm_squared();
            for (w, a, om) in nodes {
                d.weighted_mean_grad += s * w * om * grad;
                d.weighted_mean_flux += s * w * om * (a * grad);
            }
        }
        d.dofs = v;
        dirs.push(d);
    }
    let d2 = dirs.pop().unwrap();
    let d1 = dirs.pop().unwrap();
    Ok(CellSolution {
        element: ElementKind::P1,
        directions: [d1, d2],
    })
}
