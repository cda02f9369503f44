//! Sparse assembly and direct solves.
//!
//! Matrices are collected as triplets, merged deterministically (sorted by
//! position, duplicates summed in sorted order) and factorized with faer's
//! sparse LU. Linear equality constraints are imposed exactly by a bordered
//! system, but the border is never handed to the sparse factorization: dense
//! constraint rows destroy the fill pattern. Instead the bordered system is
//! reduced to a small dense Schur complement, see [`SaddleSolver`].

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// Relative residual accepted after iterative refinement.
pub const RESIDUAL_TOL: f64 = 1e-10;
const MAX_REFINEMENT: usize = 3;
const MAX_IMPLIED_CONDITION: f64 = 1e15;

/// Square sparse matrix under assembly.
#[derive(Debug, Clone, Default)]
pub struct SparseSystem {
    n: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl SparseSystem {
    pub fn new(n: usize) -> Self {
        Self { n, triplets: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            triplets: Vec::with_capacity(cap),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn n_triplets(&self) -> usize {
        self.triplets.len()
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n, "triplet ({row}, {col}) out of range {}", self.n);
        self.triplets.push((row, col, value));
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = (usize, usize, f64)>) {
        self.triplets.extend(other);
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    /// Merge into compressed rows. Duplicates are summed in sorted value
    /// order, so the result does not depend on the triplet order and is
    /// exactly symmetric for symmetric input.
    pub fn compress(&self) -> Result<Compressed> {
        let mut t = self.triplets.clone();
        if let Some(&(r, c, _)) = t.iter().find(|(r, c, _)| *r >= self.n || *c >= self.n) {
            return Err(invalid(format!("triplet ({r}, {c}) out of range for dimension {}", self.n)));
        }
        if let Some(&(r, c, v)) = t.iter().find(|(_, _, v)| !v.is_finite()) {
            return Err(invalid(format!("non-finite triplet value {v} at ({r}, {c})")));
        }
        t.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Compressed {
            n: self.n,
            row_ptr,
            cols,
            vals,
        })
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Compressed {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Compressed {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|(c, _)| *c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>()).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Row sums of absolute values; used for bordered-system norms.
    fn abs_row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v.abs()).sum()).collect()
    }

    pub fn is_symmetric_exact(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// Copy with `value` added to selected diagonal positions.
    fn with_diagonal_shift(&self, positions: &[usize], value: f64) -> Compressed {
        let mut sys = SparseSystem::with_capacity(self.n, self.nnz() + positions.len());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                sys.add(i, j, v);
            }
        }
        for &p in positions {
            sys.add(p, p, value);
        }
        sys.compress().expect("shifted copy is in range")
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Sparse LU factorization of a compressed matrix.
pub struct Factorization {
    matrix: Compressed,
    lu: Lu<usize, f64>,
    norm: f64,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("n", &self.matrix.n)
            .field("nnz", &self.matrix.nnz())
            .finish()
    }
}

impl Factorization {
    pub fn new(matrix: Compressed) -> Result<Self> {
        let n = matrix.n;
        if n == 0 {
            return Err(invalid("empty system"));
        }
        let mut trip = Vec::with_capacity(matrix.nnz());
        for i in 0..n {
            for (j, v) in matrix.row(i) {
                trip.push(Triplet::new(i, j, v));
            }
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| Error::FactorizationFailed(format!("matrix construction: {e:?}")))?;
        let lu = a
            .sp_lu()
            .map_err(|e| Error::FactorizationFailed(format!("sparse LU on n = {n}: {e:?}")))?;
        let norm = matrix.norm_inf();
        Ok(Self { matrix, lu, norm })
    }

    pub fn matrix(&self) -> &Compressed {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    /// Raw LU solve for several right-hand sides (columns), no checks.
    fn raw_solve(&self, cols: &[&[f64]]) -> Vec<Vec<f64>> {
        let n = self.matrix.n;
        if cols.is_empty() {
            return Vec::new();
        }
        let b = Mat::<f64>::from_fn(n, cols.len(), |i, j| cols[j][i]);
        let x = self.lu.solve(&b);
        (0..cols.len()).map(|j| (0..n).map(|i| x[(i, j)]).collect()).collect()
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let ax = self.matrix.matvec(x);
        ax.iter().zip(b).map(|(a, b)| a - b).collect()
    }

    fn tolerance(&self, x: &[f64], b: &[f64]) -> f64 {
        RESIDUAL_TOL * (self.norm * norm_inf(x) + norm_inf(b))
    }

    /// Solve with residual verification and up to three refinement steps.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_many(&[b])?.remove(0))
    }

    pub fn solve_many(&self, bs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        for b in bs {
            if b.len() != self.matrix.n {
                return Err(invalid(format!("rhs length {} != dimension {}", b.len(), self.matrix.n)));
            }
        }
        let mut xs = self.raw_solve(bs);
        for (x, b) in xs.iter_mut().zip(bs) {
            let mut r = self.residual(x, b);
            let mut steps = 0;
            while !(norm_inf(&r) <= self.tolerance(x, b)) {
                if steps == MAX_REFINEMENT || !x.iter().all(|v| v.is_finite()) {
                    return Err(Error::FactorizationFailed(format!(
                        "singular to working precision: residual {:.3e} > tolerance {:.3e} (n = {}, |A| = {:.3e})",
                        norm_inf(&r),
                        self.tolerance(x, b),
                        self.matrix.n,
                        self.norm
                    )));
                }
                let dx = self.raw_solve(&[&r]).remove(0);
                for (xi, d) in x.iter_mut().zip(dx) {
                    *xi -= d;
                }
                r = self.residual(x, b);
                steps += 1;
            }
            // A tiny pivot shows up as a huge solution with a residual that is
            // small only relative to |A||x|: ||A|| ||x|| / ||b|| bounds the
            // condition number from below.
            let implied = self.norm * norm_inf(x) / norm_inf(b);
            if norm_inf(b) > 0.0 && implied > MAX_IMPLIED_CONDITION {
                return Err(Error::FactorizationFailed(format!(
                    "singular to working precision: pivot growth gives condition >= {implied:.3e} (n = {})",
                    self.matrix.n
                )));
            }
        }
        Ok(xs)
    }
}

/// Factorize and solve in one step.
pub fn solve_direct(system: &SparseSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    Factorization::new(system.compress()?)?.solve(rhs)
}

/// One sparse constraint row `sum_j c_j x_j`.
pub type ConstraintRow = Vec<(usize, f64)>;

/// Exact solver for `K x + C^T mu = f`, `C x = g`.
///
/// For each constraint row `r` a pin `p_r = argmax_j |C_rj|` is chosen and
/// `K_r = K + rho sum_r e_{p_r} e_{p_r}^T` is factorized (nonsingular when K
/// is positive semidefinite and its kernel is detected by the pins). With
/// `xi = P^T x` the bordered system is equivalent to
///
/// ```text
/// x = X_f - X_C mu + rho X_P xi,    X_* = K_r^{-1} (f, C^T, P)
/// [ C X_C     -rho C X_P     ] [mu]   [C X_f - g]
/// [ P^T X_C   I - rho P^T X_P] [xi] = [P^T X_f  ]
/// ```
///
/// which needs `2m + 1` sparse solves and one dense `2m x 2m` solve.
pub struct SaddleSolver {
    fact: Factorization,
    original: Compressed,
    constraints: Vec<ConstraintRow>,
    dense_c: Vec<Vec<f64>>,
    pins: Vec<usize>,
    rho: f64,
    xc: Vec<Vec<f64>>,
    xp: Vec<Vec<f64>>,
    schur: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    norm: f64,
}

impl std::fmt::Debug for SaddleSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SaddleSolver")
            .field("n", &self.original.n)
            .field("m", &self.constraints.len())
            .field("pins", &self.pins)
            .finish()
    }
}

/// Smallest/largest eigenvalue ratio of the constraint Gram matrix.
pub fn constraint_rank_ratio(n: usize, rows: &[ConstraintRow]) -> f64 {
    let dense: Vec<Vec<f64>> = rows.iter().map(|r| densify(n, r)).collect();
    gram_ratio(&dense)
}

fn densify(n: usize, row: &ConstraintRow) -> Vec<f64> {
    let mut d = vec![0.0; n];
    for &(j, v) in row {
        d[j] += v;
    }
    d
}

fn gram_ratio(rows: &[Vec<f64>]) -> f64 {
    let m = rows.len();
    let g = DMatrix::<f64>::from_fn(m, m, |a, b| rows[a].iter().zip(&rows[b]).map(|(x, y)| x * y).sum::<f64>());
    let eig = SymmetricEigen::new(g).eigenvalues;
    let max = eig.iter().cloned().fold(0.0, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        min.max(0.0) / max
    } else {
        0.0
    }
}

impl SaddleSolver {
    pub fn new(k: &SparseSystem, constraints: Vec<ConstraintRow>) -> Result<Self> {
        Self::from_compressed(k.compress()?, constraints)
    }

    pub fn from_compressed(original: Compressed, constraints: Vec<ConstraintRow>) -> Result<Self> {
        let n = original.n;
        let m = constraints.len();
        if m == 0 || m >= n {
            return Err(invalid(format!("need 0 < m < n constraints, got m = {m}, n = {n}")));
        }
        for row in &constraints {
            if let Some(&(j, _)) = row.iter().find(|(j, _)| *j >= n) {
                return Err(invalid(format!("constraint column {j} out of range {n}")));
            }
        }
        let dense_c: Vec<Vec<f64>> = constraints.iter().map(|r| densify(n, r)).collect();
        let ratio = gram_ratio(&dense_c);
        if !(ratio > 1e-12) {
            return Err(Error::ConstraintDegenerate { ratio });
        }
        let mut pins = Vec::with_capacity(m);
        for row in &dense_c {
            let mut best = None;
            for (j, v) in row.iter().enumerate() {
                if pins.contains(&j) {
                    continue;
                }
                if best.map_or(true, |(_, b): (usize, f64)| v.abs() > b) {
                    best = Some((j, v.abs()));
                }
            }
            pins.push(best.expect("m < n leaves a free column").0);
        }
        let rho = original.diagonal().iter().fold(0.0, |a: f64, b| a.max(b.abs())).max(1.0);
        let fact = Factorization::new(original.with_diagonal_shift(&pins, rho))?;
        let ct: Vec<&[f64]> = dense_c.iter().map(|r| r.as_slice()).collect();
        let xc = fact.solve_many(&ct)?;
        let unit: Vec<Vec<f64>> = pins
            .iter()
            .map(|&p| {
                let mut e = vec![0.0; n];
                e[p] = 1.0;
                e
            })
            .collect();
        let ur: Vec<&[f64]> = unit.iter().map(|r| r.as_slice()).collect();
        let xp = fact.solve_many(&ur)?;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut s = DMatrix::<f64>::zeros(2 * m, 2 * m);
        for a in 0..m {
            for b in 0..m {
                s[(a, b)] = dot(&dense_c[a], &xc[b]);
                s[(a, m + b)] = -rho * dot(&dense_c[a], &xp[b]);
                s[(m + a, b)] = xc[b][pins[a]];
                s[(m + a, m + b)] = if a == b { 1.0 } else { 0.0 } - rho * xp[b][pins[a]];
            }
        }
        let schur = s.lu();
        if !schur.is_invertible() {
            return Err(Error::FactorizationFailed("singular constraint Schur complement".into()));
        }
        let mut sums = original.abs_row_sums();
        let mut csum = vec![0.0; m];
        for (r, row) in dense_c.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                sums[j] += v.abs();
                csum[r] += v.abs();
            }
        }
        let norm = sums.iter().chain(&csum).cloned().fold(0.0, f64::max);
        Ok(Self {
            fact,
            original,
            constraints,
            dense_c,
            pins,
            rho,
            xc,
            xp,
            schur,
            norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.original.n
    }

    pub fn matrix(&self) -> &Compressed {
        &self.original
    }

    pub fn constraints(&self) -> &[ConstraintRow] {
        &self.constraints
    }

    fn raw(&self, f: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.constraints.len();
        let xf = self.fact.solve(f)?;
        let mut rhs = DVector::<f64>::zeros(2 * m);
        for a in 0..m {
            rhs[a] = self.dense_c[a].iter().zip(&xf).map(|(c, x)| c * x).sum::<f64>() - g[a];
            rhs[m + a] = xf[self.pins[a]];
        }
        let z = self
            .schur
            .solve(&rhs)
            .ok_or_else(|| Error::FactorizationFailed("constraint Schur solve".into()))?;
        let mut x = xf;
        for b in 0..m {
            let (mu, xi) = (z[b], z[m + b]);
            for (i, xi_i) in x.iter_mut().enumerate() {
                *xi_i += -self.xc[b][i] * mu + self.rho * self.xp[b][i] * xi;
            }
        }
        Ok((x, z.as_slice()[..m].to_vec()))
    }

    /// Residuals `(K x + C^T mu - f, C x - g)`.
    fn residuals(&self, x: &[f64], mu: &[f64], f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut r1 = self.original.matvec(x);
        for (i, r) in r1.iter_mut().enumerate() {
            *r -= f[i];
        }
        for (row, &m) in self.constraints.iter().zip(mu) {
            for &(j, v) in row {
                r1[j] += v * m;
            }
        }
        let r2 = self
            .constraints
            .iter()
            .zip(g)
            .map(|(row, gi)| row.iter().map(|&(j, v)| v * x[j]).sum::<f64>() - gi)
            .collect();
        (r1, r2)
    }

    /// Solve for `(x, mu)` with residual verification and refinement.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.original.n;
        let m = self.constraints.len();
        if f.len() != n || g.len() != m {
            return Err(invalid(format!(
                "saddle rhs sizes ({}, {}) != ({n}, {m})",
                f.len(),
                g.len()
            )));
        }
        let (mut x, mut mu) = self.raw(f, g)?;
        let tol = |x: &[f64], mu: &[f64]| {
            RESIDUAL_TOL * (self.norm * norm_inf(x).max(norm_inf(mu)) + norm_inf(f).max(norm_inf(g)))
        };
        for step in 0..=MAX_REFINEMENT {
            let (r1, r2) = self.residuals(&x, &mu, f, g);
            let r = norm_inf(&r1).max(norm_inf(&r2));
            if r <= tol(&x, &mu) {
                return Ok((x, mu));
            }
            if step == MAX_REFINEMENT {
                return Err(Error::FactorizationFailed(format!(
                    "saddle residual {r:.3e} above tolerance {:.3e}",
                    tol(&x, &mu)
                )));
            }
            let (dx, dmu) = self.raw(&r1, &r2)?;
            for (a, d) in x.iter_mut().zip(dx) {
                *a -= d;
            }
            for (a, d) in mu.iter_mut().zip(dmu) {
                *a -= d;
            }
        }
        unreachable!()
    }
}

/// One-shot constrained solve.
pub fn solve_saddle(k: &SparseSystem, c: &[ConstraintRow], f: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    SaddleSolver::new(k, c.to_vec())?.solve(f, g)
}
