//! Quadrature on triangles and intervals.

use crate::error::{invalid, Result};

/// Symmetric or collapsed-product rule on a triangle.
///
/// Points are barycentric coordinates; weights sum to one and are scaled by
/// the triangle area at use.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Rule with the requested exactness degree: the symmetric rules for
    /// degrees up to 5, a collapsed Gauss product rule beyond.
    pub fn with_degree(degree: usize) -> Self {
        match degree {
            0 | 1 => Self::centroid(),
            2 => Self::three_point(),
            3 | 4 => Self::dunavant6(),
            5 => Self::dunavant7(),
            d => Self::collapsed_gauss(d),
        }
    }

    pub fn centroid() -> Self {
        Self {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
            degree: 1,
        }
    }

    pub fn three_point() -> Self {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        Self {
            points: vec![[a, b, b], [b, a, b], [b, b, a]],
            weights: vec![1.0 / 3.0; 3],
            degree: 2,
        }
    }

    /// Six-point symmetric rule, exact for degree 4.
    pub fn dunavant6() -> Self {
        let a = 0.445_948_490_915_964_886_32;
        let wa = 0.223_381_589_678_011_465_70;
        let b = 0.091_576_213_509_770_743_46;
        let wb = 0.109_951_743_655_321_867_64;
        let mut points = Vec::with_capacity(6);
        let mut weights = Vec::with_capacity(6);
        for (p, w) in [(a, wa), (b, wb)] {
            let q = 1.0 - 2.0 * p;
            points.extend_from_slice(&[[q, p, p], [p, q, p], [p, p, q]]);
            weights.extend_from_slice(&[w; 3]);
        }
        Self { points, weights, degree: 4 }
    }

    /// Seven-point symmetric rule, exact for degree 5.
    pub fn dunavant7() -> Self {
        let a = 0.470_142_064_105_115_089_77;
        let wa = 0.132_394_152_788_506_180_74;
        let b = 0.101_286_507_323_456_338_80;
        let wb = 0.125_939_180_544_827_152_60;
        let mut points = vec![[1.0 / 3.0; 3]];
        let mut weights = vec![0.225];
        for (p, w) in [(a, wa), (b, wb)] {
            let q = 1.0 - 2.0 * p;
            points.extend_from_slice(&[[q, p, p], [p, q, p], [p, p, q]]);
            weights.extend_from_slice(&[w; 3]);
        }
        Self { points, weights, degree: 5 }
    }

    /// Duffy-collapsed tensor Gauss-Legendre rule of arbitrary degree.
    pub fn collapsed_gauss(degree: usize) -> Self {
        let m = (degree + 3) / 2;
        let (nodes, w) = gauss_legendre_unit(m);
        let mut points = Vec::with_capacity(m * m);
        let mut weights = Vec::with_capacity(m * m);
        for (u, wu) in nodes.iter().zip(&w) {
            for (v, wv) in nodes.iter().zip(&w) {
                let x = *u;
                let y = v * (1.0 - u);
                points.push([1.0 - x - y, x, y]);
                weights.push(2.0 * wu * wv * (1.0 - u));
            }
        }
        Self { points, weights, degree }
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect())
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        dp = if d != 0.0 { d } else { dp };
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Rule for a declared degree, rejecting degrees the micro assembly cannot use.
pub fn micro_rule(degree: usize) -> Result<QuadratureRule> {
    if degree < 4 {
        return Err(invalid(format!("micro assembly needs quadrature degree >= 4, got {degree}")));
    }
    Ok(QuadratureRule::with_degree(degree))
}
