//! Micro cell problems on Specht elements and the effective matrix they
//! define.
//!
//! The unknown is always `w = v - V` where `V` interpolates the affine load
//! `x_j - x_{l,j}`; boundary conditions then act on `w` only: clamped DOFs
//! (essential, natural), identified DOFs (periodic) or exact mean constraints
//! (free).

mod checks;
mod dump;
mod second_order;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};

use crate::coefficients::{pointwise_ellipticity, CoefficientField, ScaleParams};
use crate::elements::quadrature::micro_rule;
use crate::elements::specht::{hess_dot, SpanTable, SpechtBasis, N_DOF};
use crate::error::{invalid, Error, Result};
use crate::geometry::{build_square_mesh, periodic_pairing, Mesh, MeshPattern, Point2, DEFAULT_PERIODIC_TOL};
use crate::linsys::{Compressed, ConstraintRow, Factorization, SaddleSolver, SparseSystem};

pub use checks::{ah_ellipticity_margin, constraint_defect, hill_residual, hill_residual_with, stability_check, StabilityReport};
pub use dump::write_cell_dump;
pub use second_order::second_order_cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryCondition {
    Essential,
    Natural,
    Free,
    Periodic,
}

impl BoundaryCondition {
    pub const ALL: [BoundaryCondition; 4] = [
        BoundaryCondition::Essential,
        BoundaryCondition::Natural,
        BoundaryCondition::Free,
        BoundaryCondition::Periodic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BoundaryCondition::Essential => "essential",
            BoundaryCondition::Natural => "natural",
            BoundaryCondition::Free => "free",
            BoundaryCondition::Periodic => "periodic",
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "essential" => Ok(Self::Essential),
            "natural" => Ok(Self::Natural),
            "free" => Ok(Self::Free),
            "periodic" => Ok(Self::Periodic),
            other => Err(invalid(format!("unknown boundary condition '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Weighting {
    None,
    Cosine,
}

impl Weighting {
    pub fn name(&self) -> &'static str {
        match self {
            Weighting::None => "none",
            Weighting::Cosine => "cosine",
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "cosine" => Ok(Self::Cosine),
            other => Err(invalid(format!("unknown weighting '{other}'"))),
        }
    }
}

/// Cosine filter `(1 + cos(2 pi (x1 - c1)/delta)) (1 + cos(2 pi (x2 - c2)/delta))`:
/// 4 at the centre, 0 on the cell boundary, unit mean.
pub fn cosine_weight(center: Point2, delta: f64, x: Point2) -> f64 {
    let t = 2.0 * std::f64::consts::PI / delta;
    (1.0 + (t * (x.x1 - center.x1)).cos()) * (1.0 + (t * (x.x2 - center.x2)).cos())
}

pub const DEFAULT_QUADRATURE_DEGREE: usize = 4;

/// One micro problem: cell `x_l + (-delta/2, delta/2)^2` meshed with
/// `n_h x n_h` squares, so the grid spacing is `h = delta / n_h`.
#[derive(Debug, Clone)]
pub struct CellSpec {
    pub center: Point2,
    pub delta: f64,
    pub n_h: usize,
    pub bc: BoundaryCondition,
    pub params: ScaleParams,
    pub field: CoefficientField,
    pub weighting: Weighting,
    pub pattern: MeshPattern,
    pub quadrature_degree: usize,
}

impl CellSpec {
    pub fn new(
        center: Point2,
        delta: f64,
        n_h: usize,
        bc: BoundaryCondition,
        params: ScaleParams,
        field: CoefficientField,
    ) -> Result<Self> {
        let spec = Self {
            center,
            delta,
            n_h,
            bc,
            params,
            field,
            weighting: Weighting::None,
            pattern: MeshPattern::UniformDiagonal,
            quadrature_degree: DEFAULT_QUADRATURE_DEGREE,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_weighting(mut self, weighting: Weighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn with_pattern(mut self, pattern: MeshPattern) -> Self {
        self.pattern = pattern;
        self
    }

    pub fn with_quadrature_degree(mut self, degree: usize) -> Self {
        self.quadrature_degree = degree;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!("cell size must be positive, got {}", self.delta)));
        }
        if self.n_h == 0 {
            return Err(invalid("micro divisions must be >= 1"));
        }
        if !self.center.is_finite() {
            return Err(invalid("cell centre must be finite"));
        }
        micro_rule(self.quadrature_degree)?;
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.delta / self.n_h as f64
    }

    pub fn area(&self) -> f64 {
        self.delta * self.delta
    }

    pub fn origin(&self) -> Point2 {
        Point2::new(self.center.x1 - 0.5 * self.delta, self.center.x2 - 0.5 * self.delta)
    }

    /// Whether `delta / epsilon` is a positive integer (to 1e-9).
    pub fn is_commensurate(&self) -> bool {
        let r = self.delta / self.params.epsilon();
        r >= 1.0 - 1e-9 && (r - r.round()).abs() <= 1e-9 * r.max(1.0)
    }
}

/// Per-direction results of a cell solve.
#[derive(Debug, Clone)]
pub struct DirectionSolution {
    /// Full DOF vector of `v` (Specht layout `3*vertex + {0,1,2}`, or one
    /// value per vertex for the P1 limit problem).
    pub dofs: Vec<f64>,
    pub mean_grad: Vector2<f64>,
    pub mean_flux: Vector2<f64>,
    pub weighted_mean_grad: Vector2<f64>,
    pub weighted_mean_flux: Vector2<f64>,
    /// `<grad v . A grad v>`.
    pub diffusion_energy: f64,
    /// `iota^2 <hess v : hess v>` (broken).
    pub hessian_energy: f64,
    /// `<|grad v|^2>` and `<|hess v|^2>`, for the stability bound.
    pub grad_sq: f64,
    pub hess_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Specht,
    P1,
}

/// Solutions for both load directions `V_l = x_1`, `V_l = x_2`.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub element: ElementKind,
    pub directions: [DirectionSolution; 2],
}

impl CellSolution {
    fn columns(&self, weighted: bool) -> (Matrix2<f64>, Matrix2<f64>) {
        let [d1, d2] = &self.directions;
        let (g1, g2, f1, f2) = if weighted {
            (d1.weighted_mean_grad, d2.weighted_mean_grad, d1.weighted_mean_flux, d2.weighted_mean_flux)
        } else {
            (d1.mean_grad, d2.mean_grad, d1.mean_flux, d2.mean_flux)
        };
        (Matrix2::from_columns(&[f1, f2]), Matrix2::from_columns(&[g1, g2]))
    }

    /// `[fluxes] [gradients]^{-1}` with or without the cosine weight.
    pub fn effective(&self, weighting: Weighting) -> Result<Matrix2<f64>> {
        let (f, g) = self.columns(weighting == Weighting::Cosine);
        let sv = g.singular_values();
        let cond = sv.max() / sv.min();
        if !(cond < 1e12) {
            return Err(Error::DegenerateCell { cond });
        }
        Ok(f * g.try_inverse().ok_or(Error::DegenerateCell { cond })?)
    }
}

/// Homogenized matrix at one macro point with its provenance.
#[derive(Debug, Clone)]
pub struct EffectiveSample {
    pub location: Point2,
    pub a_h: Matrix2<f64>,
    pub bc: BoundaryCondition,
    pub weighting: Weighting,
    pub h: f64,
    pub delta: f64,
}

pub fn effective_matrix(spec: &CellSpec, sol: &CellSolution, weighting: Weighting) -> Result<EffectiveSample> {
    Ok(EffectiveSample {
        location: spec.center,
        a_h: sol.effective(weighting)?,
        bc: spec.bc,
        weighting,
        h: spec.h(),
        delta: spec.delta,
    })
}

/// Map from full DOFs to reduced unknowns.
#[derive(Debug, Clone)]
enum DofMap {
    Identity,
    /// Reduced index or `None` for a clamped DOF.
    Reduced { map: Vec<Option<usize>>, n: usize },
}

impl DofMap {
    fn n_reduced(&self, n_full: usize) -> usize {
        match self {
            DofMap::Identity => n_full,
            DofMap::Reduced { n, .. } => *n,
        }
    }

    fn index(&self, d: usize) -> Option<usize> {
        match self {
            DofMap::Identity => Some(d),
            DofMap::Reduced { map, .. } => map[d],
        }
    }
}

enum Solver {
    Direct(Factorization),
    Saddle(SaddleSolver),
}

/// Assembled micro problem; reusable for both load directions.
pub struct CellProblem {
    spec: CellSpec,
    mesh: Mesh,
    bases: Vec<SpechtBasis>,
    table: SpanTable,
    /// `K = D + iota^2 H` on all `3 n_v` DOFs.
    matrix: Compressed,
    /// Ellipticity constants of `A` over the assembly quadrature nodes.
    lambda: f64,
    big_lambda: f64,
    /// `<phi_d>`, `<d1 phi_d>`, `<d2 phi_d>` as sparse rows.
    mean_rows: [ConstraintRow; 3],
    dof_map: DofMap,
    solver: Solver,
}

impl fmt::Debug for CellProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CellProblem")
            .field("bc", &self.spec.bc)
            .field("n_dof", &self.n_dof())
            .field("lambda", &self.lambda)
            .field("Lambda", &self.big_lambda)
            .finish()
    }
}

fn sorted_row(mut entries: Vec<(usize, f64)>) -> ConstraintRow {
    entries.sort_by_key(|e| e.0);
    let mut out: ConstraintRow = Vec::with_capacity(entries.len());
    for (j, v) in entries {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += v,
            _ => out.push((j, v)),
        }
    }
    out
}

impl CellProblem {
    pub fn new(spec: &CellSpec) -> Result<Self> {
        spec.validate()?;
        if spec.bc == BoundaryCondition::Periodic && !spec.is_commensurate() {
            log::warn!(
                "periodic cell with delta/epsilon = {} not an integer; resonance error is not removed",
                spec.delta / spec.params.epsilon()
            );
        }
        let mesh = build_square_mesh(spec.origin(), spec.delta, spec.n_h, spec.pattern)?;
        let rule = micro_rule(spec.quadrature_degree)?;
        let table = SpanTable::new(rule);
        let n = 3 * mesh.n_vertices();
        let iota2 = spec.params.iota().powi(2);
        let area_cell = spec.area();

        let mut bases = Vec::with_capacity(mesh.n_triangles());
        let mut sys = SparseSystem::with_capacity(n, 81 * mesh.n_triangles());
        let mut means: [Vec<(usize, f64)>; 3] = Default::default();
        let mut lambda = f64::INFINITY;
        let mut big_lambda = 0.0_f64;
        for (k, tri) in mesh.triangles().iter().enumerate() {
            let basis = SpechtBasis::new(mesh.triangle_points(k))?;
            let dofs: [usize; N_DOF] = std::array::from_fn(|i| 3 * tri[i / 3] + i % 3);
            let local = basis.local_forms(&spec.field, &table);
            for i in 0..N_DOF {
                for j in 0..N_DOF {
                    sys.add(dofs[i], dofs[j], local.diffusion[(i, j)] + iota2 * local.hessian[(i, j)]);
                }
            }
            let mut m = [[0.0; N_DOF]; 3];
            for (q, (l, w)) in table.rule.iter().enumerate() {
                let x = basis.point_at(l);
                let a = spec.field.eval(x);
                let (lam, big) = pointwise_ellipticity(&a).map_err(|(xi, value)| Error::NotElliptic {
                    x,
                    xi: (xi[0], xi[1]),
                    value,
                })?;
                lambda = lambda.min(lam);
                big_lambda = big_lambda.max(big);
                let s = basis.eval_span(&table.derivs[q]);
                let wa = w * basis.area() / area_cell;
                for i in 0..N_DOF {
                    m[0][i] += wa * s.value[i];
                    m[1][i] += wa * s.grad[i][0];
                    m[2][i] += wa * s.grad[i][1];
                }
            }
            for r in 0..3 {
                means[r].extend(dofs.iter().zip(m[r]).filter(|(_, v)| *v != 0.0).map(|(&d, v)| (d, v)));
            }
            bases.push(basis);
        }
        let matrix = sys.compress()?;
        let mean_rows = means.map(sorted_row);

        let (dof_map, solver) = Self::build_solver(spec, &mesh, &matrix, &mean_rows)?;
        Ok(Self {
            spec: spec.clone(),
            mesh,
            bases,
            table,
            matrix,
            lambda,
            big_lambda,
            mean_rows,
            dof_map,
            solver,
        })
    }

    fn build_solver(
        spec: &CellSpec,
        mesh: &Mesh,
        matrix: &Compressed,
        mean_rows: &[ConstraintRow; 3],
    ) -> Result<(DofMap, Solver)> {
        let n = matrix.dim();
        match spec.bc {
            BoundaryCondition::Free => {
                let solver = SaddleSolver::from_compressed(matrix.clone(), mean_rows.to_vec())?;
                Ok((DofMap::Identity, Solver::Saddle(solver)))
            }
            BoundaryCondition::Essential | BoundaryCondition::Natural => {
                let mut clamped = vec![false; n];
                for &v in &mesh.boundary().boundary_vertices {
                    clamped[3 * v] = true;
                    if spec.bc == BoundaryCondition::Essential {
                        clamped[3 * v + 1] = true;
                        clamped[3 * v + 2] = true;
                    } else {
                        let faces = mesh.faces_of(v);
                        // Tangential derivative: d2 along vertical faces, d1 along horizontal.
                        if faces.vertical() {
                            clamped[3 * v + 2] = true;
                        }
                        if faces.horizontal() {
                            clamped[3 * v + 1] = true;
                        }
                    }
                }
                let mut map = vec![None; n];
                let mut next = 0;
                for d in 0..n {
                    if !clamped[d] {
                        map[d] = Some(next);
                        next += 1;
                    }
                }
                let dof_map = DofMap::Reduced { map, n: next };
                let reduced = reduce(matrix, &dof_map)?;
                Ok((dof_map, Solver::Direct(Factorization::new(reduced)?)))
            }
            BoundaryCondition::Periodic => {
                let pm = periodic_pairing(mesh, DEFAULT_PERIODIC_TOL * spec.delta)?;
                let mut class_of_master = vec![usize::MAX; mesh.n_vertices()];
                let mut next = 0;
                let mut map = vec![None; n];
                for v in 0..mesh.n_vertices() {
                    let m = pm.master(v);
                    if class_of_master[m] == usize::MAX {
                        class_of_master[m] = next;
                        next += 1;
                    }
                }
                for v in 0..mesh.n_vertices() {
                    let c = class_of_master[pm.master(v)];
                    for kind in 0..3 {
                        map[3 * v + kind] = Some(3 * c + kind);
                    }
                }
                let dof_map = DofMap::Reduced { map, n: 3 * next };
                let reduced = reduce(matrix, &dof_map)?;
                let mean = reduce_row(&mean_rows[0], &dof_map);
                let solver = SaddleSolver::from_compressed(reduced, vec![mean])?;
                Ok((dof_map, Solver::Saddle(solver)))
            }
        }
    }

    pub fn spec(&self) -> &CellSpec {
        &self.spec
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn matrix(&self) -> &Compressed {
        &self.matrix
    }

    pub fn n_dof(&self) -> usize {
        self.matrix.dim()
    }

    pub fn n_unknowns(&self) -> usize {
        self.dof_map.n_reduced(self.n_dof())
    }

    /// `(lambda, Lambda)` of the coefficient over the assembly nodes.
    pub fn ellipticity(&self) -> (f64, f64) {
        (self.lambda, self.big_lambda)
    }

    pub fn mean_rows(&self) -> &[ConstraintRow; 3] {
        &self.mean_rows
    }

    /// Interpolant of the affine load `x_j - x_{l,j}` (j = 0, 1).
    pub fn load_interpolant(&self, j: usize) -> Vec<f64> {
        let c = [self.spec.center.x1, self.spec.center.x2][j];
        let mut v = vec![0.0; self.n_dof()];
        for (i, p) in self.mesh.vertices().iter().enumerate() {
            v[3 * i] = [p.x1, p.x2][j] - c;
            v[3 * i + 1 + j] = 1.0;
        }
        v
    }

    /// `a_h(v, z) = int grad z . A grad v + iota^2 hess z : hess v`, evaluated
    /// element by element with the assembly quadrature. Equal to `z^T K v`
    /// but free of the cancellation between the large entries of `K`.
    pub fn bilinear(&self, v: &[f64], z: &[f64]) -> f64 {
        let iota2 = self.spec.params.iota().powi(2);
        let mut total = 0.0;
        for (k, tri) in self.mesh.triangles().iter().enumerate() {
            let basis = &self.bases[k];
            let lv: [f64; N_DOF] = std::array::from_fn(|i| v[3 * tri[i / 3] + i % 3]);
            let lz: [f64; N_DOF] = std::array::from_fn(|i| z[3 * tri[i / 3] + i % 3]);
            for (q, (l, w)) in self.table.rule.iter().enumerate() {
                let s = basis.eval_span(&self.table.derivs[q]);
                let a = self.spec.field.eval(basis.point_at(l));
                let gv = s.grad_of(&lv);
                let gz = s.grad_of(&lz);
                let hv = s.hess_of(&lv);
                let hz = s.hess_of(&lz);
                total += w * basis.area() * (gz.dot(&(a * gv)) + iota2 * hess_dot(&hz, &hv));
            }
        }
        total
    }

    fn solve_reduced(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n_red = self.n_unknowns();
        let mut fr = vec![0.0; n_red];
        for (d, fd) in f.iter().enumerate() {
            if let Some(r) = self.dof_map.index(d) {
                fr[r] += fd;
            }
        }
        let wr = match &self.solver {
            Solver::Direct(fact) => fact.solve(&fr)?,
            Solver::Saddle(s) => {
                let m = s.constraints().len();
                s.solve(&fr, &vec![0.0; m])?.0
            }
        };
        Ok((0..self.n_dof()).map(|d| self.dof_map.index(d).map_or(0.0, |r| wr[r])).collect())
    }

    /// Solve for load direction `j` (0 or 1).
    pub fn solve_direction(&self, j: usize) -> Result<DirectionSolution> {
        if j > 1 {
            return Err(invalid(format!("direction must be 0 or 1, got {j}")));
        }
        let big_v = self.load_interpolant(j);
        let f: Vec<f64> = self.matrix.matvec(&big_v).iter().map(|x| -x).collect();
        let w = self.solve_reduced(&f)?;
        let v: Vec<f64> = w.iter().zip(&big_v).map(|(a, b)| a + b).collect();
        Ok(self.postprocess(v))
    }

    pub fn solve(&self) -> Result<CellSolution> {
        Ok(CellSolution {
            element: ElementKind::Specht,
            directions: [self.solve_direction(0)?, self.solve_direction(1)?],
        })
    }

    /// Means, weighted means and energies of a full DOF vector.
    pub fn postprocess(&self, v: Vec<f64>) -> DirectionSolution {
        let mut out = DirectionSolution {
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
        let area_cell = self.spec.area();
        for (k, tri) in self.mesh.triangles().iter().enumerate() {
            let basis = &self.bases[k];
            let local: [f64; N_DOF] = std::array::from_fn(|i| v[3 * tri[i / 3] + i % 3]);
            for (q, (l, w)) in self.table.rule.iter().enumerate() {
                let s = basis.eval_span(&self.table.derivs[q]);
                let x = basis.point_at(l);
                let a = self.spec.field.eval(x);
                let g = s.grad_of(&local);
                let h = s.hess_of(&local);
                let flux = a * g;
                let wa = w * basis.area() / area_cell;
                let om = cosine_weight(self.spec.center, self.spec.delta, x);
                out.mean_grad += wa * g;
                out.mean_flux += wa * flux;
                out.weighted_mean_grad += wa * om * g;
                out.weighted_mean_flux += wa * om * flux;
                out.diffusion_energy += wa * g.dot(&flux);
                out.grad_sq += wa * g.norm_squared();
                out.hess_sq += wa * hess_dot(&h, &h);
            }
        }
        out.hessian_energy = self.spec.params.iota().powi(2) * out.hess_sq;
        out.dofs = v;
        out
    }

    /// Per-element `(diffusion, iota^2 hessian)` energies of `v`.
    pub fn element_energies(&self, v: &[f64]) -> Vec<(f64, f64)> {
        self.element_energies_iter(v).map(|(_, e)| e).collect()
    }

    fn element_energies_iter<'a>(&'a self, v: &'a [f64]) -> impl Iterator<Item = (usize, (f64, f64))> + 'a {
        let iota2 = self.spec.params.iota().powi(2);
        self.mesh.triangles().iter().enumerate().map(move |(k, tri)| {
            let basis = &self.bases[k];
            let local: [f64; N_DOF] = std::array::from_fn(|i| v[3 * tri[i / 3] + i % 3]);
            let mut d = 0.0;
            let mut hh = 0.0;
            for (q, (l, w)) in self.table.rule.iter().enumerate() {
                let s = basis.eval_span(&self.table.derivs[q]);
                let a = self.spec.field.eval(basis.point_at(l));
                let g = s.grad_of(&local);
                let h = s.hess_of(&local);
                d += w * basis.area() * g.dot(&(a * g));
                hh += w * basis.area() * hess_dot(&h, &h);
            }
            (k, (d, iota2 * hh))
        })
    }

    /// Free formulation: `a(v_i, z) = int_{boundary} n_i z` for mean-zero
    /// `z`, returning `v_i` (mean zero) for `i = 0, 1`.
    pub fn solve_free_formulation(&self) -> Result<CellSolution> {
        let n = self.n_dof();
        let solver = SaddleSolver::from_compressed(self.matrix.clone(), vec![self.mean_rows[0].clone()])?;
        let mut dirs = Vec::with_capacity(2);
        for i in 0..2 {
            let f = self.boundary_normal_load(i);
            let (v, _) = solver.solve(&f, &[0.0])?;
            debug_assert_eq!(v.len(), n);
            dirs.push(self.postprocess(v));
        }
        let d2 = dirs.pop().unwrap();
        let d1 = dirs.pop().unwrap();
        Ok(CellSolution {
            element: ElementKind::Specht,
            directions: [d1, d2],
        })
    }

    /// Global vector `int_{boundary} n_i phi_d`.
    pub fn boundary_normal_load(&self, i: usize) -> Vec<f64> {
        let mut f = vec![0.0; self.n_dof()];
        for &(k, r) in self.mesh.boundary_edge_owners() {
            let tri = self.mesh.triangles()[k];
            let load = self.bases[k].edge_normal_load(r, i);
            for (a, l) in load.iter().enumerate() {
                f[3 * tri[a / 3] + a % 3] += l;
            }
        }
        f
    }
}

fn reduce(matrix: &Compressed, map: &DofMap) -> Result<Compressed> {
    let n_red = map.n_reduced(matrix.dim());
    let mut sys = SparseSystem::with_capacity(n_red, matrix.nnz());
    for i in 0..matrix.dim() {
        let Some(ri) = map.index(i) else { continue };
        for (j, v) in matrix.row(i) {
            if let Some(rj) = map.index(j) {
                sys.add(ri, rj, v);
            }
        }
    }
    sys.compress()
}

fn reduce_row(row: &ConstraintRow, map: &DofMap) -> ConstraintRow {
    sorted_row(row.iter().filter_map(|&(j, v)| map.index(j).map(|r| (r, v))).collect())
}

/// Assemble and solve both load directions.
pub fn solve_cell(spec: &CellSpec) -> Result<CellSolution> {
    CellProblem::new(spec)?.solve()
}

/// Free-formulation solves; requires `bc = free`.
pub fn solve_cell_free_formulation(spec: &CellSpec) -> Result<CellSolution> {
    if spec.bc != BoundaryCondition::Free {
        return Err(invalid(format!("free formulation needs bc = free, got {}", spec.bc)));
    }
    CellProblem::new(spec)?.solve_free_formulation()
}
