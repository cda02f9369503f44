use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::StudyKind;
use crate::cell::{BoundaryCondition, Weighting};
use crate::coefficients::Regime;
use crate::error::{Error, Result};
use crate::geometry::MeshPattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub study: String,
    pub example: String,
    pub bc: BoundaryCondition,
    pub weighting: Weighting,
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub h: f64,
    pub macro_h: f64,
    pub error: f64,
    pub rate: Option<f64>,
    pub wall_ms: Option<f64>,
}

impl Row {
    /// Regime used to pick the analytic comparison matrix.
    pub fn regime(&self) -> Regime {
        Regime::of(self.gamma)
    }
}

#[derive(Debug, Clone)]
pub struct Metadata {
    pub study: StudyKind,
    pub example: String,
    pub threads: usize,
    pub seed: u64,
    pub quadrature_degree: usize,
    pub pattern: MeshPattern,
    pub residual_tol: f64,
    pub total_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub rows: Vec<Row>,
    pub meta: Metadata,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    study: String,
    example: String,
    bc: String,
    weighting: String,
    gamma: f64,
    epsilon: f64,
    delta: f64,
    h: f64,
    #[serde(rename = "H")]
    macro_h: f64,
    error: f64,
    rate: Option<f64>,
    wall_ms: Option<f64>,
}

const HEADER: [&str; 12] = [
    "study", "example", "bc", "weighting", "gamma", "epsilon", "delta", "h", "H", "error", "rate", "wall_ms",
];

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    // Written explicitly so that an empty report still has its header.
    w.write_record(HEADER)?;
    for r in rows {
        w.serialize(Record {
            study: r.study.clone(),
            example: r.example.clone(),
            bc: r.bc.to_string(),
            weighting: r.weighting.to_string(),
            gamma: r.gamma,
            epsilon: r.epsilon,
            delta: r.delta,
            h: r.h,
            macro_h: r.macro_h,
            error: r.error,
            rate: r.rate,
            wall_ms: r.wall_ms,
        })?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<Row>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    rdr.deserialize::<Record>()
        .map(|rec| {
            let r = rec?;
            Ok(Row {
                study: r.study,
                example: r.example,
                bc: r.bc.parse()?,
                weighting: r.weighting.parse()?,
                gamma: r.gamma,
                epsilon: r.epsilon,
                delta: r.delta,
                h: r.h,
                macro_h: r.macro_h,
                error: r.error,
                rate: r.rate,
                wall_ms: r.wall_ms,
            })
        })
        .collect()
}

fn swept_value(study: StudyKind, r: &Row) -> Option<(&'static str, f64)> {
    match study {
        StudyKind::VsDelta => Some(("delta", r.delta)),
        StudyKind::VsEpsilon => Some(("epsilon", r.epsilon)),
        StudyKind::VsH => Some(("h", r.h)),
        StudyKind::VsMacroH => Some(("H", r.macro_h)),
        StudyKind::Single => None,
    }
}

/// Rows belong to one sweep when everything but the swept value agrees.
fn same_sweep(study: StudyKind, a: &Row, b: &Row) -> bool {
    let fixed = |r: &Row| {
        let mut v = [r.epsilon, r.delta, r.h, r.macro_h];
        let skip = match study {
            StudyKind::VsEpsilon => 0,
            StudyKind::VsDelta => 1,
            StudyKind::VsH => 2,
            _ => 3,
        };
        v[skip] = 0.0;
        // delta and h given relative to epsilon move with it.
        if study == StudyKind::VsEpsilon {
            v[1] /= r.epsilon;
            v[2] /= r.epsilon;
        }
        v
    };
    a.bc == b.bc && a.weighting == b.weighting && a.gamma == b.gamma && fixed(a) == fixed(b)
}

/// Dyadic values print as `2^-k`, everything else in shortest form.
fn pretty(x: f64) -> String {
    let k = x.log2();
    if x > 0.0 && (k - k.round()).abs() < 1e-12 {
        format!("2^{}", k.round() as i64)
    } else {
        format!("{x}")
    }
}

/// One table per sweep: swept parameter, error and rate columns, with the
/// fixed parameters and regime in the table heading.
pub fn markdown(report: &Report) -> String {
    let m = &report.meta;
    let mut s = String::new();
    let _ = writeln!(s, "# {} study, {}\n", m.study, m.example);
    let _ = writeln!(
        s,
        "quadrature degree {}, micro mesh {:?}, residual tolerance {:e}, threads {}, seed {}",
        m.quadrature_degree, m.pattern, m.residual_tol, m.threads, m.seed
    );
    if let Some(t) = m.total_ms {
        let _ = writeln!(s, "total wall time {:.0} ms", t);
    }
    let mut i = 0;
    while i < report.rows.len() {
        let first = &report.rows[i];
        let mut j = i + 1;
        match swept_value(m.study, first) {
            Some(_) => {
                while j < report.rows.len() && same_sweep(m.study, first, &report.rows[j]) {
                    j += 1;
                }
            }
            None => j = report.rows.len(),
        }
        let _ = write!(s, "\n## bc={}, weighting={}, gamma={} ({})", first.bc, first.weighting, first.gamma, first.regime());
        let fixed: Vec<String> = [
            ("epsilon", first.epsilon),
            ("delta", first.delta),
            ("h", first.h),
            ("H", first.macro_h),
        ]
        .iter()
        .filter(|(name, _)| swept_value(m.study, first).map(|(n, _)| n) != Some(*name))
        .map(|(name, v)| format!("{name}={}", pretty(*v)))
        .collect();
        if swept_value(m.study, first).is_some() {
            let _ = write!(s, ", {}", fixed.join(", "));
        }
        let _ = writeln!(s, "\n");
        match swept_value(m.study, first) {
            Some((name, _)) => {
                let _ = writeln!(s, "| {name} | error | rate |\n|---|---|---|");
                for r in &report.rows[i..j] {
                    let rate = r.rate.map(|x| format!("{x:.2}")).unwrap_or_default();
                    let _ = writeln!(s, "| {} | {:.4e} | {} |", pretty(swept_value(m.study, r).unwrap().1), r.error, rate);
                }
            }
            None => {
                let _ = writeln!(s, "| bc | weighting | gamma | regime | epsilon | delta | h | H | error |\n|---|---|---|---|---|---|---|---|---|");
                for r in &report.rows[i..j] {
                    let _ = writeln!(
                        s,
                        "| {} | {} | {} | {} | {} | {} | {} | {} | {:.4e} |",
                        r.bc,
                        r.weighting,
                        r.gamma,
                        r.regime(),
                        pretty(r.epsilon),
                        pretty(r.delta),
                        pretty(r.h),
                        pretty(r.macro_h),
                        r.error
                    );
                }
            }
        }
        i = j;
    }
    s
}

pub fn write_report(report: &Report, path: &Path, format: ReportFormat) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut out = std::io::BufWriter::new(file);
    match format {
        ReportFormat::Csv => write_csv(&report.rows, &mut out)?,
        ReportFormat::Markdown => out.write_all(markdown(report).as_bytes()).map_err(io)?,
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let row = |delta: f64, error: f64, rate| Row {
            study: "vs_delta".into(),
            example: "example1".into(),
            bc: BoundaryCondition::Essential,
            weighting: Weighting::None,
            gamma: 4.0,
            epsilon: 0.03125,
            delta,
            h: 1.0 / 256.0,
            macro_h: 0.5,
            error,
            rate,
            wall_ms: None,
        };
        Report {
            rows: vec![row(0.125, 0.05, None), row(0.25, 0.025, Some(1.0))],
            meta: Metadata {
                study: StudyKind::VsDelta,
                example: "example1".into(),
                threads: 1,
                seed: 1,
                quadrature_degree: 4,
                pattern: MeshPattern::UniformDiagonal,
                residual_tol: 1e-10,
                total_ms: None,
            },
        }
    }

    #[test]
    fn empty_report_has_header() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "study,example,bc,weighting,gamma,epsilon,delta,h,H,error,rate,wall_ms\n");
    }

    #[test]
    fn csv_round_trip() {
        let rep = sample();
        let mut buf = Vec::new();
        write_csv(&rep.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].ends_with(",0.05,,"), "{}", lines[1]);
        assert!(lines[2].ends_with(",0.025,1.0,"), "{}", lines[2]);
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rep.rows);
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn markdown_shape() {
        let md = markdown(&sample());
        assert!(md.contains("## bc=essential, weighting=none, gamma=4 (gamma>1), epsilon=2^-5, h=2^-8, H=2^-1"));
        assert!(md.contains("| 2^-3 | 5.0000e-2 |  |"));
        assert!(md.contains("| 2^-2 | 2.5000e-2 | 1.00 |"));
    }

    #[test]
    fn unwritable_path() {
        let r = write_report(&sample(), Path::new("/nonexistent-dir/x.csv"), ReportFormat::Csv);
        assert!(matches!(r, Err(Error::Io { .. })));
    }
}
