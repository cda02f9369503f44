use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};

use crate::error::{invalid, Error, Result};
use crate::geometry::Point2;

/// Which of the two benchmark coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Example {
    One,
    Two,
}

impl Example {
    pub fn id(&self) -> &'static str {
        match self {
            Example::One => "example1",
            Example::Two => "example2",
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "example1" | "1" => Ok(Example::One),
            "example2" | "2" => Ok(Example::Two),
            other => Err(invalid(format!("unknown example id '{other}'"))),
        }
    }
}

/// Position of `gamma` relative to the critical scaling `gamma = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Below,
    Critical,
    Above,
}

impl Regime {
    /// Exact comparison; the closed forms are piecewise, not continuous.
    pub fn of(gamma: f64) -> Self {
        if gamma < 1.0 {
            Regime::Below
        } else if gamma == 1.0 {
            Regime::Critical
        } else {
            Regime::Above
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Regime::Below => "gamma<1",
            Regime::Critical => "gamma=1",
            Regime::Above => "gamma>1",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Closed-form homogenized matrix of a benchmark for a given `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticEffective {
    pub example: Example,
    pub gamma: f64,
}

impl AnalyticEffective {
    pub fn new(example: Example, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { example, gamma })
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.gamma)
    }

    /// The constant diagonal `(Abar11, Abar22)`.
    pub fn diagonal(&self) -> (f64, f64) {
        let pi2 = PI * PI;
        let s = (4.0 * pi2 - 1.0).sqrt();
        match (self.example, self.regime()) {
            (Example::One, Regime::Below) => ((50.0 + 8.0 * PI * pi2) / s - 4.0 * pi2, s),
            (Example::One, Regime::Critical) => (25.0 / PI, s),
            (Example::One, Regime::Above) => (
                4.0 * pi2 / ((25.0 + 4.0 * PI * pi2) / (625.0 - 4.0 * pi2 * pi2).sqrt() - 1.0),
                s,
            ),
            (Example::Two, Regime::Below) => (
                4.0 * PI * (2.0 * pi2 + 5.0) / s - 4.0 * pi2,
                2.0 * PI * (4.0 * pi2 + 11.0) / s - 4.0 * pi2,
            ),
            (Example::Two, Regime::Critical) => (10.0, 11.0),
            (Example::Two, Regime::Above) => (
                4.0 * pi2 / ((5.0 + 2.0 * pi2) / (25.0 - pi2).sqrt() - 1.0),
                4.0 * pi2 / ((11.0 + 4.0 * pi2) / (121.0 - 4.0 * pi2).sqrt() - 1.0),
            ),
        }
    }

    pub fn eval(&self, x: Point2) -> Matrix2<f64> {
        let (a11, a22) = self.diagonal();
        match self.example {
            Example::One => Matrix2::new(a11, 0.0, 0.0, a22),
            Example::Two => Matrix2::new(
                a11,
                2.0 + (2.0 * PI * x.x1).sin(),
                3.0 + (2.0 * PI * x.x2).cos(),
                a22,
            ),
        }
    }

    /// Column divergence `(sum_i d_i Abar_i1, sum_i d_i Abar_i2)`, so that
    /// `div(Abar grad u) = divergence . grad u + Abar : hess u`.
    pub fn divergence(&self, x: Point2) -> Vector2<f64> {
        match self.example {
            Example::One => Vector2::zeros(),
            Example::Two => Vector2::new(
                -2.0 * PI * (2.0 * PI * x.x2).sin(),
                2.0 * PI * (2.0 * PI * x.x1).cos(),
            ),
        }
    }
}
