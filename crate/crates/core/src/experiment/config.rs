//! Flat `key = value` study configuration.
//!
//! One assignment per line, `#` starts a comment, list values are
//! comma-separated. Numbers accept `2^-5`, `1/64` and products of those
//! written with `*` in addition to plain decimal literals.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Matrix2;

use crate::cell::{BoundaryCondition, Weighting, DEFAULT_QUADRATURE_DEGREE};
use crate::coefficients::{AnalyticEffective, CoefficientField, Example};
use crate::error::{Error, Result};
use crate::geometry::{MeshPattern, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    VsDelta,
    VsEpsilon,
    /// Micro mesh size sweep.
    VsH,
    /// Macro mesh size sweep with a relative H1 error.
    VsMacroH,
    Single,
}

impl StudyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::VsDelta => "vs_delta",
            StudyKind::VsEpsilon => "vs_epsilon",
            StudyKind::VsH => "vs_h",
            StudyKind::VsMacroH => "vs_H",
            StudyKind::Single => "single",
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "vs_delta" => StudyKind::VsDelta,
            "vs_epsilon" => StudyKind::VsEpsilon,
            "vs_h" => StudyKind::VsH,
            "vs_H" | "vs_macro_h" => StudyKind::VsMacroH,
            "single" => StudyKind::Single,
            other => return Err(Error::Config(format!("unknown study kind `{other}`"))),
        })
    }
}

/// The coefficient under study and the matrix it is compared against.
#[derive(Debug, Clone, PartialEq)]
pub enum ExampleSpec {
    Benchmark(Example),
    Constant(Matrix2<f64>),
}

impl ExampleSpec {
    pub fn field(&self, eps: f64) -> Result<CoefficientField> {
        match self {
            ExampleSpec::Benchmark(Example::One) => CoefficientField::example1(eps),
            ExampleSpec::Benchmark(Example::Two) => CoefficientField::example2(eps),
            ExampleSpec::Constant(c) => Ok(CoefficientField::constant(*c)),
        }
    }

    pub fn reference(&self, gamma: f64) -> Result<Reference> {
        Ok(match self {
            ExampleSpec::Benchmark(e) => Reference::Analytic(AnalyticEffective::new(*e, gamma)?),
            ExampleSpec::Constant(c) => Reference::Constant(*c),
        })
    }
}

impl fmt::Display for ExampleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExampleSpec::Benchmark(e) => write!(f, "{e}"),
            ExampleSpec::Constant(c) => write!(f, "constant:{},{},{},{}", c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]),
        }
    }
}

impl FromStr for ExampleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("constant:") {
            let vals = rest.split(',').map(parse_number).collect::<Result<Vec<_>>>()?;
            if vals.len() != 4 {
                return Err(Error::Config(format!("constant example needs 4 entries, got {}", vals.len())));
            }
            return Ok(ExampleSpec::Constant(Matrix2::new(vals[0], vals[1], vals[2], vals[3])));
        }
        s.parse::<Example>()
            .map(ExampleSpec::Benchmark)
            .map_err(|e| Error::Config(e.to_string()))
    }
}

/// Analytic comparison matrix with its column divergence.
#[derive(Debug, Clone, Copy)]
pub enum Reference {
    Analytic(AnalyticEffective),
    Constant(Matrix2<f64>),
}

impl Reference {
    pub fn eval(&self, x: Point2) -> Matrix2<f64> {
        match self {
            Reference::Analytic(a) => a.eval(x),
            Reference::Constant(c) => *c,
        }
    }

    pub fn divergence(&self, x: Point2) -> nalgebra::Vector2<f64> {
        match self {
            Reference::Analytic(a) => a.divergence(x),
            Reference::Constant(_) => nalgebra::Vector2::zeros(),
        }
    }
}

/// A length given either absolutely or as a multiple of epsilon.
#[derive(Debug, Clone, PartialEq)]
pub enum Scaled {
    Absolute(Vec<f64>),
    OverEpsilon(Vec<f64>),
}

impl Scaled {
    pub fn values(&self) -> &[f64] {
        match self {
            Scaled::Absolute(v) | Scaled::OverEpsilon(v) => v,
        }
    }

    pub fn resolve(&self, value: f64, eps: f64) -> f64 {
        match self {
            Scaled::Absolute(_) => value,
            Scaled::OverEpsilon(_) => value * eps,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub study: StudyKind,
    pub example: ExampleSpec,
    pub gammas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub deltas: Scaled,
    pub hs: Scaled,
    pub bcs: Vec<BoundaryCondition>,
    pub weightings: Vec<Weighting>,
    /// Macro mesh sizes. For non-macro studies the vertices of the (single)
    /// macro mesh are the points where `e_F` is evaluated.
    pub macro_h: Vec<f64>,
    pub mu: f64,
    pub pattern: MeshPattern,
    pub quadrature_degree: usize,
    /// Worker count; `0` lets the thread pool decide.
    pub threads: usize,
    pub seed: u64,
    /// Fill the `wall_ms` column (makes output run-dependent).
    pub timings: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            study: StudyKind::Single,
            example: ExampleSpec::Benchmark(Example::One),
            gammas: vec![1.0],
            epsilons: vec![0.0625],
            deltas: Scaled::OverEpsilon(vec![1.0]),
            hs: Scaled::OverEpsilon(vec![1.0 / 16.0]),
            bcs: vec![BoundaryCondition::Periodic],
            weightings: vec![Weighting::None],
            macro_h: vec![0.5],
            mu: 1.0,
            pattern: MeshPattern::UniformDiagonal,
            quadrature_degree: DEFAULT_QUADRATURE_DEGREE,
            threads: 1,
            seed: 0x5eed,
            timings: false,
            output: None,
        }
    }
}

/// Parse `2^-5`, `1/64`, `3*2^-4` or a decimal literal.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse number `{s}`"));
    if s.is_empty() {
        return Err(bad());
    }
    if s.contains('*') {
        return s.split('*').try_fold(1.0, |acc, part| Ok(acc * parse_number(part)?));
    }
    if let Some((num, den)) = s.split_once('/') {
        let d = parse_number(den)?;
        if d == 0.0 {
            return Err(bad());
        }
        return Ok(parse_number(num)? / d);
    }
    if let Some((base, exp)) = s.split_once('^') {
        return Ok(parse_number(base)?.powf(parse_number(exp)?));
    }
    let v: f64 = s.parse().map_err(|_| bad())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn parse_list<T>(key: &str, value: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).map_err(|e| Error::Config(format!("{key}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

fn positive_list(key: &str, value: &str) -> Result<Vec<f64>> {
    let v = parse_list(key, value, parse_number)?;
    if let Some(bad) = v.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::Config(format!("{key}: value {bad} is not positive")));
    }
    Ok(v)
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected on/off, got `{value}`"))),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }

    /// Check the invariants that can be checked without running anything.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return cfg(format!("epsilon {e} outside (0, 1)"));
        }
        if !matches!(self.study, StudyKind::Single | StudyKind::VsMacroH) && self.macro_h.len() != 1 {
            return cfg("only vs_H and single studies accept more than one H".into());
        }
        for &h_mac in &self.macro_h {
            let n = (1.0 / h_mac).round();
            if !(h_mac > 0.0 && h_mac <= 1.0) || (n * h_mac - 1.0).abs() > 1e-9 {
                return cfg(format!("H = {h_mac} does not divide the unit square"));
            }
        }
        for &eps in &self.epsilons {
            for &d in self.deltas.values() {
                let delta = self.deltas.resolve(d, eps);
                for &h in self.hs.values() {
                    self.micro_divisions(delta, self.hs.resolve(h, eps))?;
                }
            }
        }
        if self.mu <= 0.0 {
            return cfg("mu must be positive".into());
        }
        Ok(())
    }

    /// `delta / h`, required to be an integer >= 2.
    pub fn micro_divisions(&self, delta: f64, h: f64) -> Result<usize> {
        if !(h > 0.0 && h < delta) {
            return Err(Error::Config(format!("micro size h = {h} must lie in (0, delta = {delta})")));
        }
        let n = (delta / h).round();
        if (n * h - delta).abs() > 1e-9 * delta {
            return Err(Error::Config(format!("h = {h} does not divide delta = {delta}")));
        }
        Ok(n as usize)
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let k = k.trim().to_string();
            if entries.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", lineno + 1)));
            }
        }

        let mut c = ExperimentConfig::default();
        if entries.contains_key("delta") && entries.contains_key("delta_over_epsilon") {
            return Err(Error::Config("give either delta or delta_over_epsilon".into()));
        }
        if entries.contains_key("h") && entries.contains_key("h_over_epsilon") {
            return Err(Error::Config("give either h or h_over_epsilon".into()));
        }
        for (k, v) in &entries {
            let v = v.as_str();
            match k.as_str() {
                "study" => c.study = v.parse()?,
                "example" => c.example = v.parse()?,
                "gamma" => c.gammas = positive_list(k, v)?,
                "epsilon" => c.epsilons = positive_list(k, v)?,
                "delta" => c.deltas = Scaled::Absolute(positive_list(k, v)?),
                "delta_over_epsilon" => c.deltas = Scaled::OverEpsilon(positive_list(k, v)?),
                "h" => c.hs = Scaled::Absolute(positive_list(k, v)?),
                "h_over_epsilon" => c.hs = Scaled::OverEpsilon(positive_list(k, v)?),
                "bc" => c.bcs = parse_list(k, v, |s| s.parse())?,
                "weighting" => c.weightings = parse_list(k, v, |s| s.parse())?,
                "H" => c.macro_h = positive_list(k, v)?,
                "mu" => c.mu = parse_number(v)?,
                "pattern" => c.pattern = v.parse()?,
                "quadrature" => {
                    c.quadrature_degree = v.parse().map_err(|_| Error::Config(format!("quadrature: `{v}`")))?
                }
                "threads" => c.threads = v.parse().map_err(|_| Error::Config(format!("threads: `{v}`")))?,
                "seed" => c.seed = v.parse().map_err(|_| Error::Config(format!("seed: `{v}`")))?,
                "timings" => c.timings = parse_bool(k, v)?,
                "output" => c.output = Some(PathBuf::from(v)),
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(parse_number("2^-5").unwrap(), 1.0 / 32.0);
        assert_eq!(parse_number("1/64").unwrap(), 1.0 / 64.0);
        assert_eq!(parse_number("3*2^-2").unwrap(), 0.75);
        assert_eq!(parse_number(" 0.25 ").unwrap(), 0.25);
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("two").is_err());
        assert!(parse_number("").is_err());
    }

    #[test]
    fn full_config() {
        let c: ExperimentConfig = "
            # resonance sweep
            study = vs_delta
            example = example1
            gamma = 4, 0.25
            epsilon = 2^-5
            delta = 2^-4, 2^-3, 2^-2
            h = 2^-8
            bc = essential
            weighting = none
            threads = 2
        "
        .parse()
        .unwrap();
        assert_eq!(c.study, StudyKind::VsDelta);
        assert_eq!(c.gammas, vec![4.0, 0.25]);
        assert_eq!(c.deltas, Scaled::Absolute(vec![0.0625, 0.125, 0.25]));
        assert_eq!(c.hs, Scaled::Absolute(vec![1.0 / 256.0]));
        assert_eq!(c.bcs, vec![BoundaryCondition::Essential]);
        assert_eq!(c.threads, 2);
        assert!(!c.timings);
    }

    #[test]
    fn relative_lengths_and_constants() {
        let c: ExperimentConfig = "example = constant:2,0.5,0,1\ndelta_over_epsilon = 1\nh_over_epsilon = 1/8\nbc = essential, natural, free, periodic"
            .parse()
            .unwrap();
        assert_eq!(c.example, ExampleSpec::Constant(Matrix2::new(2.0, 0.5, 0.0, 1.0)));
        assert_eq!(c.hs.resolve(c.hs.values()[0], 0.0625), 0.0625 / 8.0);
        assert_eq!(c.bcs.len(), 4);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            "gamma = ",
            "gamma = -1",
            "colour = blue",
            "gamma = 1\ngamma = 2",
            "delta = 0.25\ndelta_over_epsilon = 1",
            "epsilon = 2^-4\ndelta = 0.25\nh = 0.3",
            "epsilon = 2^-4\ndelta = 0.25\nh = 0.1",
            "study = vs_delta\nH = 0.5, 0.25",
            "H = 0.3",
            "no equals sign",
            "bc = sticky",
        ] {
            assert!(matches!(bad.parse::<ExperimentConfig>(), Err(Error::Config(_))), "{bad}");
        }
    }
}
