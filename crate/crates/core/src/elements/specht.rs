//! Nine-parameter Specht plate triangle.
//!
//! Degrees of freedom at each vertex are the value and both Cartesian
//! derivatives. The local space is the 9-dimensional subspace of
//! `P3 + L1 L2 L3 * P1` (all edge traces cubic) on which, for every edge,
//! the integral of the normal derivative equals the trapezoidal value built
//! from the two endpoint gradients. That space contains `P2`, its trace on an
//! edge is fixed by the edge's vertex data (H1 conformity), and the mean jump
//! of the normal derivative across an interior edge vanishes because both
//! neighbours see the same endpoint gradients.

use std::sync::OnceLock;

use nalgebra::{SMatrix, Vector2};

use crate::coefficients::CoefficientField;
use crate::elements::quadrature::{gauss_legendre_unit, QuadratureRule};
use crate::error::{invalid, Result};
use crate::geometry::Point2;

pub const N_DOF: usize = 9;
const N_SPAN: usize = 12;

pub type Mat9 = SMatrix<f64, 9, 9>;
type Mat12 = SMatrix<f64, 12, 12>;
type Coef = SMatrix<f64, 12, 9>;

/// Area-coordinate exponents of the spanning set: the ten cubic monomials and
/// two quartic bubbles `L1^2 L2 L3`, `L1 L2^2 L3`.
const SPAN: [[i32; 3]; N_SPAN] = [
    [3, 0, 0],
    [0, 3, 0],
    [0, 0, 3],
    [2, 1, 0],
    [2, 0, 1],
    [1, 2, 0],
    [0, 2, 1],
    [1, 0, 2],
    [0, 1, 2],
    [1, 1, 1],
    [2, 1, 1],
    [1, 2, 1],
];

const EDGE_GAUSS: usize = 3;

/// Values and area-coordinate derivatives of the spanning set at one point.
#[derive(Debug, Clone, Copy)]
pub struct SpanDerivs {
    val: [f64; N_SPAN],
    d1: [[f64; 3]; N_SPAN],
    d2: [[[f64; 3]; 3]; N_SPAN],
}

fn pw(x: f64, k: i32) -> f64 {
    if k < 0 {
        0.0
    } else {
        x.powi(k)
    }
}

impl SpanDerivs {
    pub fn at(l: &[f64; 3]) -> Self {
        let mut out = Self {
            val: [0.0; N_SPAN],
            d1: [[0.0; 3]; N_SPAN],
            d2: [[[0.0; 3]; 3]; N_SPAN],
        };
        for (k, e) in SPAN.iter().enumerate() {
            out.val[k] = pw(l[0], e[0]) * pw(l[1], e[1]) * pw(l[2], e[2]);
            for m in 0..3 {
                let mut d = [e[0], e[1], e[2]];
                let cm = d[m] as f64;
                d[m] -= 1;
                out.d1[k][m] = cm * pw(l[0], d[0]) * pw(l[1], d[1]) * pw(l[2], d[2]);
                for n in 0..3 {
                    let mut dd = d;
                    let cn = dd[n] as f64;
                    dd[n] -= 1;
                    out.d2[k][m][n] = cm * cn * pw(l[0], dd[0]) * pw(l[1], dd[1]) * pw(l[2], dd[2]);
                }
            }
        }
        out
    }
}

/// Span derivatives at the vertices and along the edges; shared by every
/// triangle.
struct ReferenceTables {
    vertices: [SpanDerivs; 3],
    /// Per local edge: Gauss parameters/weights on `[0,1]` and span data.
    edge_points: [[(f64, f64, SpanDerivs); EDGE_GAUSS]; 3],
}

fn reference_tables() -> &'static ReferenceTables {
    static TABLES: OnceLock<ReferenceTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let e = |i: usize| {
            let mut l = [0.0; 3];
            l[i] = 1.0;
            l
        };
        let vertices = [0, 1, 2].map(|i| SpanDerivs::at(&e(i)));
        let (s, w) = gauss_legendre_unit(EDGE_GAUSS);
        let edge_points = [0, 1, 2].map(|r| {
            let (a, b) = ((r + 1) % 3, (r + 2) % 3);
            [0, 1, 2].map(|g| {
                let mut l = [0.0; 3];
                l[a] = 1.0 - s[g];
                l[b] = s[g];
                (s[g], w[g], SpanDerivs::at(&l))
            })
        });
        ReferenceTables { vertices, edge_points }
    })
}

/// Precomputed span data at the points of a triangle rule.
#[derive(Debug, Clone)]
pub struct SpanTable {
    pub rule: QuadratureRule,
    pub derivs: Vec<SpanDerivs>,
}

impl SpanTable {
    pub fn new(rule: QuadratureRule) -> Self {
        let derivs = rule.points.iter().map(SpanDerivs::at).collect();
        Self { rule, derivs }
    }
}

/// Shape function data at one point.
#[derive(Debug, Clone, Copy)]
pub struct ShapeEval {
    pub value: [f64; N_DOF],
    pub grad: [[f64; 2]; N_DOF],
    /// `(xx, xy, yy)` second derivatives.
    pub hess: [[f64; 3]; N_DOF],
}

impl ShapeEval {
    pub fn value_of(&self, dofs: &[f64; N_DOF]) -> f64 {
        (0..N_DOF).map(|i| dofs[i] * self.value[i]).sum()
    }

    pub fn grad_of(&self, dofs: &[f64; N_DOF]) -> Vector2<f64> {
        let mut g = Vector2::zeros();
        for i in 0..N_DOF {
            g[0] += dofs[i] * self.grad[i][0];
            g[1] += dofs[i] * self.grad[i][1];
        }
        g
    }

    pub fn hess_of(&self, dofs: &[f64; N_DOF]) -> [f64; 3] {
        let mut h = [0.0; 3];
        for i in 0..N_DOF {
            for c in 0..3 {
                h[c] += dofs[i] * self.hess[i][c];
            }
        }
        h
    }
}

/// Frobenius product of two symmetric Hessians stored as `(xx, xy, yy)`.
pub fn hess_dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + 2.0 * a[1] * b[1] + a[2] * b[2]
}

/// Specht shape functions on one physical triangle.
#[derive(Debug, Clone)]
pub struct SpechtBasis {
    points: [Point2; 3],
    area: f64,
    grad_l: [Vector2<f64>; 3],
    coef: Coef,
}

/// Local element matrices; row index is the test function.
#[derive(Debug, Clone)]
pub struct LocalMatrices {
    /// `int_K A grad(phi_j) . grad(phi_i)`.
    pub diffusion: Mat9,
    /// `int_K hess(phi_j) : hess(phi_i)`.
    pub hessian: Mat9,
}

impl SpechtBasis {
    pub fn new(points: [Point2; 3]) -> Result<Self> {
        let [a, b, c] = points;
        let twice = (b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2);
        let lens = [b.dist(&c), c.dist(&a), a.dist(&b)];
        let diam = lens.iter().cloned().fold(0.0, f64::max);
        if !(twice.abs() > 1e-14 * diam * diam) {
            return Err(invalid("degenerate triangle"));
        }
        let grad_l = [0, 1, 2].map(|i| {
            let p = points[(i + 1) % 3];
            let q = points[(i + 2) % 3];
            Vector2::new(p.x2 - q.x2, q.x1 - p.x1) / twice
        });
        let mut basis = Self {
            points,
            area: 0.5 * twice.abs(),
            grad_l,
            coef: Coef::zeros(),
        };
        let orientation = twice.signum();
        let tables = reference_tables();
        let mut g = Mat12::zeros();
        for i in 0..3 {
            let v = &tables.vertices[i];
            for k in 0..N_SPAN {
                let grad = basis.span_grad(v, k);
                g[(3 * i, k)] = v.val[k];
                g[(3 * i + 1, k)] = diam * grad[0];
                g[(3 * i + 2, k)] = diam * grad[1];
            }
        }
        for r in 0..3 {
            let (ia, ib) = ((r + 1) % 3, (r + 2) % 3);
            let normal = basis.outward_normal(r, orientation);
            for k in 0..N_SPAN {
                let dn = |d: &SpanDerivs| basis.span_grad(d, k).dot(&normal);
                let integral: f64 = tables.edge_points[r].iter().map(|(_, w, d)| w * dn(d)).sum();
                let trapezoid = 0.5 * (dn(&tables.vertices[ia]) + dn(&tables.vertices[ib]));
                // Scaled by diam/|e| so the row is O(1) like the vertex rows.
                g[(9 + r, k)] = diam * (integral - trapezoid);
            }
        }
        let lu = g.full_piv_lu();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| invalid("Specht moment matrix is singular"))?;
        for i in 0..N_DOF {
            let s = if i % 3 == 0 { 1.0 } else { diam };
            for k in 0..N_SPAN {
                basis.coef[(k, i)] = s * inv[(k, i)];
            }
        }
        Ok(basis)
    }

    pub fn points(&self) -> &[Point2; 3] {
        &self.points
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    /// Unit outward normal of local edge `r` (opposite vertex `r`).
    fn outward_normal(&self, r: usize, orientation: f64) -> Vector2<f64> {
        let p = self.points[(r + 1) % 3];
        let q = self.points[(r + 2) % 3];
        let t = Vector2::new(q.x1 - p.x1, q.x2 - p.x2);
        orientation * Vector2::new(t[1], -t[0]) / t.norm()
    }

    pub fn edge_normal(&self, r: usize) -> Vector2<f64> {
        let [a, b, c] = self.points;
        let twice = (b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2);
        self.outward_normal(r, twice.signum())
    }

    pub fn edge_length(&self, r: usize) -> f64 {
        self.points[(r + 1) % 3].dist(&self.points[(r + 2) % 3])
    }

    fn span_grad(&self, d: &SpanDerivs, k: usize) -> Vector2<f64> {
        self.grad_l[0] * d.d1[k][0] + self.grad_l[1] * d.d1[k][1] + self.grad_l[2] * d.d1[k][2]
    }

    fn span_hess(&self, d: &SpanDerivs, k: usize) -> [f64; 3] {
        let mut h = [0.0; 3];
        for m in 0..3 {
            for n in 0..3 {
                let c = d.d2[k][m][n];
                if c == 0.0 {
                    continue;
                }
                let (gm, gn) = (self.grad_l[m], self.grad_l[n]);
                h[0] += c * gm[0] * gn[0];
                h[1] += c * gm[0] * gn[1];
                h[2] += c * gm[1] * gn[1];
            }
        }
        h
    }

    /// Physical point for barycentric coordinates.
    pub fn point_at(&self, l: &[f64; 3]) -> Point2 {
        let [a, b, c] = self.points;
        Point2::new(
            l[0] * a.x1 + l[1] * b.x1 + l[2] * c.x1,
            l[0] * a.x2 + l[1] * b.x2 + l[2] * c.x2,
        )
    }

    pub fn barycentric(&self, x: Point2) -> [f64; 3] {
        let a = self.points[0];
        let d = Vector2::new(x.x1 - a.x1, x.x2 - a.x2);
        let l1 = self.grad_l[1].dot(&d);
        let l2 = self.grad_l[2].dot(&d);
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn eval_span(&self, d: &SpanDerivs) -> ShapeEval {
        let mut sv = [0.0; N_SPAN];
        let mut sg = [Vector2::zeros(); N_SPAN];
        let mut sh = [[0.0; 3]; N_SPAN];
        for k in 0..N_SPAN {
            sv[k] = d.val[k];
            sg[k] = self.span_grad(d, k);
            sh[k] = self.span_hess(d, k);
        }
        let mut out = ShapeEval {
            value: [0.0; N_DOF],
            grad: [[0.0; 2]; N_DOF],
            hess: [[0.0; 3]; N_DOF],
        };
        for i in 0..N_DOF {
            for k in 0..N_SPAN {
                let c = self.coef[(k, i)];
                out.value[i] += c * sv[k];
                out.grad[i][0] += c * sg[k][0];
                out.grad[i][1] += c * sg[k][1];
                for m in 0..3 {
                    out.hess[i][m] += c * sh[k][m];
                }
            }
        }
        out
    }

    pub fn eval_barycentric(&self, l: &[f64; 3]) -> ShapeEval {
        self.eval_span(&SpanDerivs::at(l))
    }

    pub fn eval_at(&self, x: Point2) -> ShapeEval {
        self.eval_barycentric(&self.barycentric(x))
    }

    /// Diffusion and Hessian matrices by quadrature; the caller forms
    /// `diffusion + iota^2 * hessian`.
    pub fn local_forms(&self, field: &CoefficientField, table: &SpanTable) -> LocalMatrices {
        let mut diffusion = Mat9::zeros();
        let mut hessian = Mat9::zeros();
        for (q, (l, w)) in table.rule.iter().enumerate() {
            let s = self.eval_span(&table.derivs[q]);
            let a = field.eval(self.point_at(l));
            let wa = w * self.area;
            for j in 0..N_DOF {
                let gj = Vector2::new(s.grad[j][0], s.grad[j][1]);
                let flux = a * gj;
                for i in 0..N_DOF {
                    diffusion[(i, j)] += wa * (s.grad[i][0] * flux[0] + s.grad[i][1] * flux[1]);
                    hessian[(i, j)] += wa * hess_dot(&s.hess[i], &s.hess[j]);
                }
            }
        }
        LocalMatrices { diffusion, hessian }
    }

    /// `int_e n_c phi_j ds` over local edge `r` for the nine shapes.
    pub fn edge_normal_load(&self, r: usize, component: usize) -> [f64; N_DOF] {
        let n = self.edge_normal(r)[component];
        let len = self.edge_length(r);
        let mut out = [0.0; N_DOF];
        for (_, w, d) in &reference_tables().edge_points[r] {
            let s = self.eval_span(d);
            for j in 0..N_DOF {
                out[j] += w * len * n * s.value[j];
            }
        }
        out
    }

    /// Apply the nine DOF functionals (vertex value and gradient) to the
    /// shape functions; the identity for a unisolvent element.
    pub fn dof_matrix(&self) -> Mat9 {
        let tables = reference_tables();
        let mut m = Mat9::zeros();
        for i in 0..3 {
            let s = self.eval_span(&tables.vertices[i]);
            for j in 0..N_DOF {
                m[(3 * i, j)] = s.value[j];
                m[(3 * i + 1, j)] = s.grad[j][0];
                m[(3 * i + 2, j)] = s.grad[j][1];
            }
        }
        m
    }

    /// Interpolation DOFs of a function given by its value and gradient.
    pub fn interpolate(&self, f: impl Fn(Point2) -> (f64, [f64; 2])) -> [f64; N_DOF] {
        let mut d = [0.0; N_DOF];
        for i in 0..3 {
            let (v, g) = f(self.points[i]);
            d[3 * i] = v;
            d[3 * i + 1] = g[0];
            d[3 * i + 2] = g[1];
        }
        d
    }

    /// Mean normal-derivative defect `int_e d_n v - |e|/2 (d_n v(a) + d_n v(b))`
    /// of a shape function; zero for every member of the local space.
    pub fn normal_derivative_defect(&self, r: usize, dof: usize) -> f64 {
        let tables = reference_tables();
        let n = self.edge_normal(r);
        let len = self.edge_length(r);
        let dn = |d: &SpanDerivs| {
            let s = self.eval_span(d);
            s.grad[dof][0] * n[0] + s.grad[dof][1] * n[1]
        };
        let integral: f64 = tables.edge_points[r].iter().map(|(_, w, d)| w * dn(d)).sum();
        let (ia, ib) = ((r + 1) % 3, (r + 2) % 3);
        len * (integral - 0.5 * (dn(&tables.vertices[ia]) + dn(&tables.vertices[ib])))
    }

    /// Edge data used by global jump checks: `(t, weight, shape values/grads)`
    /// at the Gauss points of local edge `r`, with `t` running from vertex
    /// `(r+1)%3` to `(r+2)%3`.
    pub fn edge_samples(&self, r: usize) -> Vec<(f64, f64, ShapeEval)> {
        reference_tables().edge_points[r]
            .iter()
            .map(|(t, w, d)| (*t, *w, self.eval_span(d)))
            .collect()
    }
}
