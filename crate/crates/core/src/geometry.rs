//! Structured triangulations of axis-aligned squares.
//!
//! The same mesh type serves the macroscopic domain and the microscopic
//! sampling cells. Meshes are immutable after construction; all derived
//! tables (boundary classification, edge lists, owners of boundary edges)
//! are computed once in [`Mesh::from_parts`].
//!
//! # Text dump format
//!
//! ```text
//! <vertex count>
//! x1 x2            (one line per vertex)
//! <triangle count>
//! i j k            (one line per triangle, 0-based, counterclockwise)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default upper bound for the chunkiness `h_K / rho_K` of any triangle.
pub const DEFAULT_MAX_CHUNKINESS: f64 = 10.0;

/// Relative tolerance (times the side length) for periodic vertex matching.
pub const DEFAULT_PERIODIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x1 - other.x1).hypot(self.x2 - other.x2)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x1, self.x2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshPattern {
    /// Every grid square is cut into four triangles by both diagonals.
    Crisscross,
    /// Every grid square is cut along the diagonal from its lower-left to its
    /// upper-right corner.
    UniformDiagonal,
}

impl std::str::FromStr for MeshPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "crisscross" => Ok(Self::Crisscross),
            "uniform-diagonal" | "uniform_diagonal" | "diagonal" => Ok(Self::UniformDiagonal),
            other => Err(invalid(format!("unknown mesh pattern '{other}'"))),
        }
    }
}

/// Axis-aligned square `origin + [0, side]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Square {
    pub origin: Point2,
    pub side: f64,
}

impl Square {
    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.origin.x1 + 0.5 * self.side, self.origin.x2 + 0.5 * self.side)
    }
}

/// Which faces of the bounding square a vertex lies on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Faces {
    pub left: bool,
    pub right: bool,
    pub bottom: bool,
    pub top: bool,
}

impl Faces {
    pub fn any(&self) -> bool {
        self.left || self.right || self.bottom || self.top
    }

    /// On a face with constant `x1` (left or right).
    pub fn vertical(&self) -> bool {
        self.left || self.right
    }

    /// On a face with constant `x2` (bottom or top).
    pub fn horizontal(&self) -> bool {
        self.bottom || self.top
    }

    pub fn is_corner(&self) -> bool {
        self.vertical() && self.horizontal()
    }
}

/// Boundary classification of a triangulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryInfo {
    pub boundary_vertices: Vec<usize>,
    pub boundary_edges: Vec<[usize; 2]>,
    pub interior_edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary: BoundaryInfo,
    is_boundary_vertex: Vec<bool>,
    boundary_edge_owners: Vec<(usize, usize)>,
    h_max: f64,
    square: Option<Square>,
}

fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2))
}

fn sorted_edge(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Classify edges and vertices of a triangle soup.
///
/// An edge is a boundary edge iff exactly one triangle uses it; an edge used
/// by more than two triangles makes the mesh non-manifold.
pub fn classify_boundary(triangles: &[[usize; 3]], n_vertices: usize) -> Result<BoundaryInfo> {
    let mut counts: BTreeMap<[usize; 2], usize> = BTreeMap::new();
    for t in triangles {
        for e in 0..3 {
            *counts.entry(sorted_edge(t[(e + 1) % 3], t[(e + 2) % 3])).or_insert(0) += 1;
        }
    }
    let mut boundary_edges = Vec::new();
    let mut interior_edges = Vec::new();
    let mut on_boundary = vec![false; n_vertices];
    for (edge, count) in counts {
        match count {
            1 => {
                on_boundary[edge[0]] = true;
                on_boundary[edge[1]] = true;
                boundary_edges.push(edge);
            }
            2 => interior_edges.push(edge),
            _ => {
                return Err(Error::InvalidMesh(format!(
                    "edge {:?} is shared by {count} triangles",
                    edge
                )))
            }
        }
    }
    let boundary_vertices = (0..n_vertices).filter(|&v| on_boundary[v]).collect();
    Ok(BoundaryInfo {
        boundary_vertices,
        boundary_edges,
        interior_edges,
    })
}

impl Mesh {
    /// Assemble a mesh from raw parts. Triangles are reoriented to be
    /// counterclockwise; degenerate or overly flat triangles are rejected.
    pub fn from_parts(
        vertices: Vec<Point2>,
        mut triangles: Vec<[usize; 3]>,
        square: Option<Square>,
        max_chunkiness: f64,
    ) -> Result<Self> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        let mut h_max: f64 = 0.0;
        for (k, t) in triangles.iter_mut().enumerate() {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {k} references a missing vertex")));
            }
            let mut area = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if area < 0.0 {
                t.swap(1, 2);
                area = -area;
            }
            let [a, b, c] = t.map(|i| vertices[i]);
            let lens = [b.dist(&c), c.dist(&a), a.dist(&b)];
            let diam = lens.iter().cloned().fold(0.0, f64::max);
            if !(area > 1e-14 * diam * diam) {
                return Err(Error::InvalidMesh(format!("triangle {k} is degenerate")));
            }
            let inscribed_diameter = 4.0 * area / (lens[0] + lens[1] + lens[2]);
            let chunkiness = diam / inscribed_diameter;
            if chunkiness > max_chunkiness {
                return Err(Error::InvalidMesh(format!(
                    "triangle {k} has chunkiness {chunkiness:.3} > {max_chunkiness}"
                )));
            }
            h_max = h_max.max(diam);
        }
        let boundary = classify_boundary(&triangles, vertices.len())?;
        let mut is_boundary_vertex = vec![false; vertices.len()];
        for &v in &boundary.boundary_vertices {
            is_boundary_vertex[v] = true;
        }
        let bset: std::collections::BTreeSet<[usize; 2]> = boundary.boundary_edges.iter().cloned().collect();
        let mut boundary_edge_owners = Vec::with_capacity(bset.len());
        for (k, t) in triangles.iter().enumerate() {
            for e in 0..3 {
                if bset.contains(&sorted_edge(t[(e + 1) % 3], t[(e + 2) % 3])) {
                    boundary_edge_owners.push((k, e));
                }
            }
        }
        Ok(Self {
            vertices,
            triangles,
            boundary,
            is_boundary_vertex,
            boundary_edge_owners,
            h_max,
            square,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn square(&self) -> Option<Square> {
        self.square
    }

    pub fn boundary(&self) -> &BoundaryInfo {
        &self.boundary
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.is_boundary_vertex[v]
    }

    /// `(triangle, local edge)` pairs for every boundary edge; local edge `e`
    /// is the edge opposite local vertex `e`.
    pub fn boundary_edge_owners(&self) -> &[(usize, usize)] {
        &self.boundary_edge_owners
    }

    pub fn triangle_points(&self, k: usize) -> [Point2; 3] {
        self.triangles[k].map(|i| self.vertices[i])
    }

    pub fn triangle_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_points(k);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|k| self.triangle_area(k)).sum()
    }

    /// Number of distinct edges.
    pub fn n_edges(&self) -> usize {
        self.boundary.boundary_edges.len() + self.boundary.interior_edges.len()
    }

    /// Faces of the bounding square touched by vertex `v` (empty when the
    /// mesh carries no square).
    pub fn faces_of(&self, v: usize) -> Faces {
        let Some(sq) = self.square else {
            return Faces::default();
        };
        let p = self.vertices[v];
        let tol = DEFAULT_PERIODIC_TOL * sq.side;
        Faces {
            left: (p.x1 - sq.origin.x1).abs() <= tol,
            right: (p.x1 - sq.origin.x1 - sq.side).abs() <= tol,
            bottom: (p.x2 - sq.origin.x2).abs() <= tol,
            top: (p.x2 - sq.origin.x2 - sq.side).abs() <= tol,
        }
    }

    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.vertices.len())?;
        for p in &self.vertices {
            writeln!(out, "{:e} {:e}", p.x1, p.x2)?;
        }
        writeln!(out, "{}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    /// Read a mesh written by [`Mesh::write_dump`]. The result carries no
    /// bounding square.
    pub fn read_dump<R: BufRead>(input: R) -> Result<Self> {
        let bad = |m: &str| Error::InvalidMesh(format!("malformed mesh dump: {m}"));
        let mut lines = input.lines().map(|l| l.map_err(|e| bad(&e.to_string())));
        let mut next = || lines.next().unwrap_or_else(|| Err(bad("unexpected end of input")));
        let nv: usize = next()?.trim().parse().map_err(|_| bad("vertex count"))?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = next()?;
            let xs: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad("vertex line")))
                .collect::<Result<_>>()?;
            if xs.len() != 2 {
                return Err(bad("vertex line"));
            }
            vertices.push(Point2::new(xs[0], xs[1]));
        }
        let nt: usize = next()?.trim().parse().map_err(|_| bad("triangle count"))?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let line = next()?;
            let ix: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad("triangle line")))
                .collect::<Result<_>>()?;
            if ix.len() != 3 {
                return Err(bad("triangle line"));
            }
            triangles.push([ix[0], ix[1], ix[2]]);
        }
        Self::from_parts(vertices, triangles, None, DEFAULT_MAX_CHUNKINESS)
    }
}

/// Structured `n x n` mesh of the square `origin + [0, side]^2`.
pub fn build_square_mesh(origin: Point2, side: f64, n: usize, pattern: MeshPattern) -> Result<Mesh> {
    if n == 0 {
        return Err(invalid("mesh divisions must be at least 1"));
    }
    if !(side > 0.0) || !side.is_finite() || !origin.is_finite() {
        return Err(invalid(format!("square side must be positive and finite, got {side}")));
    }
    let step = side / n as f64;
    let grid = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1) + n * n);
    for j in 0..=n {
        for i in 0..=n {
            // Pin the last row/column exactly on the far faces.
            let x1 = if i == n { origin.x1 + side } else { origin.x1 + i as f64 * step };
            let x2 = if j == n { origin.x2 + side } else { origin.x2 + j as f64 * step };
            vertices.push(Point2::new(x1, x2));
        }
    }
    let mut triangles = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let a = grid(i, j);
            let b = grid(i + 1, j);
            let c = grid(i, j + 1);
            let d = grid(i + 1, j + 1);
            match pattern {
                MeshPattern::UniformDiagonal => {
                    triangles.push([a, b, d]);
                    triangles.push([a, d, c]);
                }
                MeshPattern::Crisscross => {
                    let m = vertices.len();
                    vertices.push(Point2::new(
                        origin.x1 + (i as f64 + 0.5) * step,
                        origin.x2 + (j as f64 + 0.5) * step,
                    ));
                    triangles.extend_from_slice(&[[a, b, m], [b, d, m], [d, c, m], [c, a, m]]);
                }
            }
        }
    }
    Mesh::from_parts(vertices, triangles, Some(Square { origin, side }), DEFAULT_MAX_CHUNKINESS)
}

/// Identification of vertices on opposite faces of a square mesh.
///
/// Masters are on the left (`x1 = min`) and bottom (`x2 = min`) faces; the
/// four corners form one group whose master is the lower-left corner.
#[derive(Debug, Clone)]
pub struct PeriodicMap {
    /// `(master on left face, slave on right face)`, corners excluded.
    pub x_pairs: Vec<(usize, usize)>,
    /// `(master on bottom face, slave on top face)`, corners excluded.
    pub y_pairs: Vec<(usize, usize)>,
    /// Lower-left, lower-right, upper-right, upper-left.
    pub corners: [usize; 4],
    master: Vec<usize>,
}

impl PeriodicMap {
    /// Representative vertex of the periodic class containing `v`.
    pub fn master(&self, v: usize) -> usize {
        self.master[v]
    }

    pub fn n_classes(&self) -> usize {
        self.master.iter().enumerate().filter(|&(v, &m)| v == m).count()
    }
}

pub fn periodic_pairing(mesh: &Mesh, tol: f64) -> Result<PeriodicMap> {
    let sq = mesh
        .square()
        .ok_or_else(|| invalid("periodic pairing requires a square mesh"))?;
    let tol = tol.max(0.0);
    let verts = mesh.vertices();
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut bottom = Vec::new();
    let mut top = Vec::new();
    let mut corners = [usize::MAX; 4];
    let near = |a: f64, b: f64| (a - b).abs() <= tol;
    let (x0, y0, x1, y1) = (sq.origin.x1, sq.origin.x2, sq.origin.x1 + sq.side, sq.origin.x2 + sq.side);
    for &v in &mesh.boundary().boundary_vertices {
        let p = verts[v];
        let f = Faces {
            left: near(p.x1, x0),
            right: near(p.x1, x1),
            bottom: near(p.x2, y0),
            top: near(p.x2, y1),
        };
        if !f.any() {
            return Err(Error::IncompatiblePeriodicMesh { vertex: v, x: p.x1, y: p.x2 });
        }
        match (f.left, f.right, f.bottom, f.top) {
            (true, _, true, _) => corners[0] = v,
            (_, true, true, _) => corners[1] = v,
            (_, true, _, true) => corners[2] = v,
            (true, _, _, true) => corners[3] = v,
            _ => {
                if f.left {
                    left.push(v)
                } else if f.right {
                    right.push(v)
                } else if f.bottom {
                    bottom.push(v)
                } else {
                    top.push(v)
                }
            }
        }
    }
    if let Some(i) = corners.iter().position(|&c| c == usize::MAX) {
        return Err(invalid(format!("square mesh is missing corner {i}")));
    }
    let mut master: Vec<usize> = (0..verts.len()).collect();
    let mut pair = |masters: &[usize], slaves: &[usize], along_x1: bool| -> Result<Vec<(usize, usize)>> {
        let mut used = vec![false; masters.len()];
        let mut pairs = Vec::with_capacity(slaves.len());
        for &s in slaves {
            let ps = verts[s];
            let hit = masters.iter().enumerate().position(|(k, &m)| {
                let pm = verts[m];
                !used[k]
                    && if along_x1 {
                        near(pm.x2, ps.x2)
                    } else {
                        near(pm.x1, ps.x1)
                    }
            });
            match hit {
                Some(k) => {
                    used[k] = true;
                    master[s] = masters[k];
                    pairs.push((masters[k], s));
                }
                None => return Err(Error::IncompatiblePeriodicMesh { vertex: s, x: ps.x1, y: ps.x2 }),
            }
        }
        if let Some(k) = used.iter().position(|u| !u) {
            let p = verts[masters[k]];
            return Err(Error::IncompatiblePeriodicMesh { vertex: masters[k], x: p.x1, y: p.x2 });
        }
        pairs.sort_unstable();
        Ok(pairs)
    };
    let x_pairs = pair(&left, &right, true)?;
    let y_pairs = pair(&bottom, &top, false)?;
    for &c in &corners[1..] {
        master[c] = corners[0];
    }
    Ok(PeriodicMap { x_pairs, y_pairs, corners, master })
}
