use std::collections::BTreeMap;
use std::time::Instant;

use log::{debug, info};
use nalgebra::Matrix2;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Reference, StudyKind};
use super::report::{Metadata, Report, Row};
use crate::cell::{effective_matrix, solve_cell, BoundaryCondition, CellSpec, Weighting};
use crate::coefficients::{ellipticity_check_seeded, ScaleParams};
use crate::error::{invalid, Error, Result};
use crate::geometry::{build_square_mesh, Mesh, MeshPattern, Point2};
use crate::linsys::RESIDUAL_TOL;
use crate::macro_hmm::{assemble_macro, ef_with, exact_gradient, manufactured_source_with, relative_h1_error, solve_macro, EffectiveMap};

/// `rate_i = log2(e_{i-1} / e_i)`; the first entry has no rate.
pub fn compute_rates(errors: &[f64]) -> Result<Vec<Option<f64>>> {
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0)) {
        return Err(invalid(format!("rates need positive errors, got {e}")));
    }
    Ok((0..errors.len())
        .map(|i| (i > 0).then(|| (errors[i - 1] / errors[i]).log2()))
        .collect())
}

/// Least-squares slope of `log2(e_{i-1}/e_i)` over a whole sweep, i.e. the
/// average rate per halving step.
pub fn fitted_rate(errors: &[f64]) -> Result<f64> {
    compute_rates(errors)?;
    let n = errors.len();
    if n < 2 {
        return Err(invalid("a fitted rate needs at least two errors"));
    }
    let xm = (n - 1) as f64 / 2.0;
    let ym = errors.iter().map(|e| e.log2()).sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, e) in errors.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (e.log2() - ym);
        sxx += dx * dx;
    }
    Ok(-sxy / sxx)
}

/// Micro parameters shared by every cell of one report row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellParams {
    pub bc: BoundaryCondition,
    pub weighting: Weighting,
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub h: f64,
    pub n_h: usize,
}

#[derive(Debug, Clone)]
struct PlannedRow {
    cell: usize,
    macro_h: f64,
    group: usize,
}

struct Plan {
    cells: Vec<CellParams>,
    rows: Vec<PlannedRow>,
}

fn plan(cfg: &ExperimentConfig) -> Result<Plan> {
    // Axis lengths in the order (epsilon, delta, h, H).
    let lens = [cfg.epsilons.len(), cfg.deltas.values().len(), cfg.hs.values().len(), cfg.macro_h.len()];
    let swept = match cfg.study {
        StudyKind::VsEpsilon => Some(0),
        StudyKind::VsDelta => Some(1),
        StudyKind::VsH => Some(2),
        StudyKind::VsMacroH => Some(3),
        StudyKind::Single => None,
    };
    let mut combos = Vec::new();
    for e in 0..lens[0] {
        for d in 0..lens[1] {
            for h in 0..lens[2] {
                for m in 0..lens[3] {
                    combos.push([e, d, h, m]);
                }
            }
        }
    }
    // Keep the swept axis innermost so each sweep is contiguous.
    let key = |c: &[usize; 4]| {
        let mut k: Vec<usize> = (0..4).filter(|a| Some(*a) != swept).map(|a| c[a]).collect();
        if let Some(s) = swept {
            k.push(c[s]);
        }
        k
    };
    combos.sort_by_key(key);

    let mut cells = Vec::new();
    let mut cell_index: BTreeMap<(usize, usize, usize, usize, usize, usize), usize> = BTreeMap::new();
    let mut rows = Vec::new();
    let mut group = 0;
    for (ib, &bc) in cfg.bcs.iter().enumerate() {
        for (iw, &weighting) in cfg.weightings.iter().enumerate() {
            for (ig, &gamma) in cfg.gammas.iter().enumerate() {
                let mut last_outer: Option<Vec<usize>> = None;
                for c in &combos {
                    let outer: Vec<usize> = (0..4).filter(|a| Some(*a) != swept).map(|a| c[a]).collect();
                    if swept.is_none() || last_outer.as_ref() != Some(&outer) {
                        group += 1;
                        last_outer = Some(outer);
                    }
                    let epsilon = cfg.epsilons[c[0]];
                    let delta = cfg.deltas.resolve(cfg.deltas.values()[c[1]], epsilon);
                    let h = cfg.hs.resolve(cfg.hs.values()[c[2]], epsilon);
                    let n_h = cfg.micro_divisions(delta, h)?;
                    let id = *cell_index.entry((ib, iw, ig, c[0], c[1], c[2])).or_insert_with(|| {
                        cells.push(CellParams { bc, weighting, gamma, epsilon, delta, h, n_h });
                        cells.len() - 1
                    });
                    rows.push(PlannedRow {
                        cell: id,
                        macro_h: cfg.macro_h[c[3]],
                        group,
                    });
                }
            }
        }
    }
    Ok(Plan { cells, rows })
}

fn macro_mesh(h_mac: f64) -> Result<Mesh> {
    build_square_mesh(Point2::new(0.0, 0.0), 1.0, (1.0 / h_mac).round() as usize, MeshPattern::UniformDiagonal)
}

/// Exact-on-dyadics key for sharing cells between nested macro meshes.
fn point_key(p: Point2) -> (i64, i64) {
    let s = (1u64 << 40) as f64;
    ((p.x1 * s).round() as i64, (p.x2 * s).round() as i64)
}

fn describe(cfg: &ExperimentConfig, c: &CellParams, macro_h: f64) -> String {
    format!(
        "{} example={} bc={} weighting={} gamma={} epsilon={} delta={} h={} H={}",
        cfg.study, cfg.example, c.bc, c.weighting, c.gamma, c.epsilon, c.delta, c.h, macro_h
    )
}

fn cell_spec(cfg: &ExperimentConfig, c: &CellParams, center: Point2) -> Result<CellSpec> {
    let params = ScaleParams::new(c.epsilon, c.gamma, cfg.mu)?;
    Ok(CellSpec::new(center, c.delta, c.n_h, c.bc, params, cfg.example.field(c.epsilon)?)?
        .with_weighting(c.weighting)
        .with_pattern(cfg.pattern)
        .with_quadrature_degree(cfg.quadrature_degree))
}

/// Run a study. On failure the rows completed before the failing one are
/// returned together with the error (tagged with the offending tuple).
pub fn run_study_partial(cfg: &ExperimentConfig) -> (Report, Option<Error>) {
    let start = Instant::now();
    let meta = Metadata {
        study: cfg.study,
        example: cfg.example.to_string(),
        threads: cfg.threads,
        seed: cfg.seed,
        quadrature_degree: cfg.quadrature_degree,
        pattern: cfg.pattern,
        residual_tol: RESIDUAL_TOL,
        total_ms: None,
    };
    let mut report = Report { rows: Vec::new(), meta };
    let err = run_into(cfg, &mut report).err();
    if cfg.timings {
        report.meta.total_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    (report, err)
}

pub fn run_study(cfg: &ExperimentConfig) -> Result<Report> {
    match run_study_partial(cfg) {
        (report, None) => Ok(report),
        (_, Some(e)) => Err(e),
    }
}

fn run_into(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    cfg.validate()?;
    let plan = plan(cfg)?;

    for &eps in &cfg.epsilons {
        ellipticity_check_seeded(&cfg.example.field(eps)?, 256, cfg.seed)?;
    }

    // Unique (cell tuple, vertex) tasks, in deterministic order.
    let mut meshes: BTreeMap<u64, Mesh> = BTreeMap::new();
    for &h_mac in &cfg.macro_h {
        meshes.insert(h_mac.to_bits(), macro_mesh(h_mac)?);
    }
    let mut task_index: BTreeMap<(usize, (i64, i64)), usize> = BTreeMap::new();
    let mut tasks: Vec<(usize, Point2)> = Vec::new();
    for row in &plan.rows {
        for &p in meshes[&row.macro_h.to_bits()].vertices() {
            task_index.entry((row.cell, point_key(p))).or_insert_with(|| {
                tasks.push((row.cell, p));
                tasks.len() - 1
            });
        }
    }
    info!("{} rows, {} cell tuples, {} cell solves", plan.rows.len(), plan.cells.len(), tasks.len());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let solved: Vec<Result<(Matrix2<f64>, f64)>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(cell, p)| {
                let t = Instant::now();
                let spec = cell_spec(cfg, &plan.cells[cell], p)?;
                let sol = solve_cell(&spec)?;
                let a_h = effective_matrix(&spec, &sol, spec.weighting)?.a_h;
                debug!("cell {cell} at {p}: {:?}", t.elapsed());
                Ok((a_h, t.elapsed().as_secs_f64() * 1e3))
            })
            .collect()
    });
    let mut solved: Vec<Option<Result<(Matrix2<f64>, f64)>>> = solved.into_iter().map(Some).collect();

    let mut prev: Option<(usize, f64)> = None;
    for row in &plan.rows {
        let c = &plan.cells[row.cell];
        let tag = || describe(cfg, c, row.macro_h);
        let wrap = |e: Error| Error::Study {
            tuple: tag(),
            source: Box::new(e),
        };
        let t = Instant::now();
        let mesh = &meshes[&row.macro_h.to_bits()];
        let mut eff = EffectiveMap::with_vertices(mesh.n_vertices());
        let mut cell_ms = 0.0;
        for (v, &p) in mesh.vertices().iter().enumerate() {
            let ti = task_index[&(row.cell, point_key(p))];
            match &solved[ti] {
                Some(Ok((a_h, ms))) => {
                    eff.set(v, *a_h);
                    cell_ms += ms;
                }
                _ => {
                    let e = solved[ti].take().and_then(|r| r.err()).unwrap_or_else(|| {
                        Error::OracleFailure("cell failed in an earlier row".into())
                    });
                    return Err(wrap(e));
                }
            }
        }
        let reference: Reference = cfg.example.reference(c.gamma).map_err(wrap)?;
        let error = if cfg.study == StudyKind::VsMacroH {
            (|| {
                let sys = assemble_macro(mesh, &eff)?;
                let f = |x: Point2| manufactured_source_with(x, &reference.eval(x), &reference.divergence(x));
                let sol = solve_macro(mesh, &sys, &f)?;
                relative_h1_error(mesh, &sol, &exact_gradient)
            })()
            .map_err(wrap)?
        } else {
            ef_with(&eff, mesh.vertices(), |x| reference.eval(x)).map_err(wrap)?
        };
        let rate = match prev {
            Some((g, e_prev)) if g == row.group && e_prev > 0.0 && error > 0.0 => Some((e_prev / error).log2()),
            _ => None,
        };
        prev = Some((row.group, error));
        let row_out = Row {
            study: cfg.study.name().to_string(),
            example: cfg.example.to_string(),
            bc: c.bc,
            weighting: c.weighting,
            gamma: c.gamma,
            epsilon: c.epsilon,
            delta: c.delta,
            h: c.h,
            macro_h: row.macro_h,
            error,
            rate,
            wall_ms: cfg.timings.then(|| cell_ms + t.elapsed().as_secs_f64() * 1e3),
        };
        info!("{}: error {:.4e} rate {:?}", tag(), error, rate);
        report.rows.push(row_out);
    }
    Ok(())
}
