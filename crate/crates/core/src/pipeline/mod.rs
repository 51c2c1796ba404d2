//! End-to-end commands: solve → detect → verify, and 1D Lipschitz analysis.
//!
//! Detection works on second-derivative surfaces of the solution: the
//! `(2,0)` surface `σ² ∂²_x (G_σ * u)` and the `(0,2)` surface. A weak
//! discontinuity (a jump in `u_xx`) shows up there as a step, so the
//! gradient transform of each surface has modulus maxima along it. Both
//! stages have an untrusted border and the bands add up.

pub mod config;

use std::path::{Path, PathBuf};

use serde_json::json;

use crate::characteristics::{
    coverage, fit_ridge_lines, verify_alignment, CharacteristicReport, FittedLine,
};
use crate::cwt::{
    cwt1d_with, gradient_transform, multiscale_derivative_2d, untrusted_band, GradientField,
    ScaleSet,
};
use crate::error::{Error, Result};
use crate::grid::{sample_initial_data, Field2D, Grid1D, Grid2D, Signal1D};
use crate::lipschitz::{
    estimate_exponent_with, estimates_table, Classification, LipschitzEstimate,
};
use crate::solver::solve_on_grid;
use crate::table::{cell, write_atomic, Table};
use crate::wtmm::{
    chain_across_scales, chain_ridges, chains_table, find_maxima_1d, find_maxima_2d, group_by_row,
    MaximaChain, MaximaPoint, ScaleMaxima,
};

pub use config::{PipelineConfig, Surface};

/// Order of the surfaces; subtracted from fitted exponents so they describe
/// the regularity of `u_xx` (resp. `u_tt`).
pub const SURFACE_ORDER: f64 = 2.0;

pub const FIELD_FILE: &str = "solution.field";

/// What a successful command concluded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NotAligned,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::NotAligned => 2,
        }
    }
}

/// Maxima and ridges of one surface at one level.
#[derive(Clone, Debug)]
pub struct LevelDetection {
    pub surface: Surface,
    pub level: i32,
    pub sigma: f64,
    pub band_x: usize,
    pub band_t: usize,
    pub maxima: Vec<MaximaPoint>,
    /// Ridges with at least `min_ridge_points` points.
    pub ridges: Vec<MaximaChain>,
    pub gradient: Option<GradientField>,
}

/// Scale chains through one time row of one surface.
#[derive(Clone, Debug)]
pub struct SurfaceChains {
    pub surface: Surface,
    pub row: usize,
    /// Levels trusted at `row`; chains need three of them.
    pub levels: Vec<i32>,
    pub chains: Vec<MaximaChain>,
    /// Exponents relative to the surface (the raw fit minus 2).
    pub estimates: Vec<LipschitzEstimate>,
}

#[derive(Clone, Debug)]
pub struct Detection {
    pub grid: Grid2D,
    pub reference_level: i32,
    pub levels: Vec<LevelDetection>,
    pub chains: Vec<SurfaceChains>,
}

impl Detection {
    pub fn at(&self, surface: Surface, level: i32) -> Option<&LevelDetection> {
        self.levels
            .iter()
            .find(|d| d.surface == surface && d.level == level)
    }

    /// Classification of each reference-level ridge of `surface`, taken from
    /// the scale chain it passes through at the analysis row.
    pub fn ridge_classes(&self, surface: Surface, radius_cells: f64) -> Vec<Classification> {
        let Some(det) = self.at(surface, self.reference_level) else {
            return Vec::new();
        };
        let chains = self.chains.iter().find(|c| c.surface == surface);
        let dx = self.grid.dx();
        det.ridges
            .iter()
            .map(|ridge| {
                let Some(sc) = chains else {
                    return Classification::Indeterminate;
                };
                let Some(p) = ridge.points.iter().find(|p| p.row == Some(sc.row)) else {
                    return Classification::Indeterminate;
                };
                sc.chains
                    .iter()
                    .zip(&sc.estimates)
                    .filter_map(|(c, e)| {
                        let q = c
                            .points
                            .iter()
                            .find(|q| q.level == Some(self.reference_level))?;
                        let d = (q.x - p.x).abs();
                        (d <= radius_cells * dx).then_some((d, e.classification))
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .map_or(Classification::Indeterminate, |(_, c)| c)
            })
            .collect()
    }
}

pub fn solve(cfg: &PipelineConfig) -> Result<Field2D> {
    let grid = cfg.grid.build()?;
    let problem = cfg.problem.build(grid.x())?;
    solve_on_grid(&problem, &grid)
}

fn under_resolved_hint(e: Error, surface: Surface, level: i32) -> Error {
    match e {
        Error::UnderResolved { sigma, min } => Error::Config(format!(
            "level j={level} on surface {} has σ={sigma} below the resolvable minimum {min}; \
             raise the lowest level in detect.levels (or use --scales)",
            surface.as_str()
        )),
        other => other,
    }
}

/// Gradient transforms, maxima, ridges and scale chains of `field`.
pub fn detect(field: &Field2D, cfg: &PipelineConfig) -> Result<Detection> {
    let d = &cfg.detect;
    let opts = cfg.transform.options();
    let grid = *field.grid();
    let dx = grid.dx();
    let mut levels = Vec::new();
    for &surface in &d.surfaces {
        let (ox, ot) = surface.orders();
        for level in d.levels.levels() {
            let sigma = d.levels.sigma(level, dx);
            let s = multiscale_derivative_2d(field, ox, ot, sigma, &opts)
                .map_err(|e| under_resolved_hint(e, surface, level))?;
            let (bx, bt) = untrusted_band(&grid, sigma, opts.truncation);
            let gf = gradient_transform(&s, sigma, &opts)?.widen_band(bx, bt);
            let mut maxima = find_maxima_2d(&gf, d.threshold)?;
            for p in &mut maxima {
                p.level = Some(level);
            }
            let ridges = chain_ridges(&group_by_row(&maxima, grid.m()), dx, d.ridge_max_jump_cells)
                .into_iter()
                .filter(|r| r.len() >= d.min_ridge_points)
                .collect();
            levels.push(LevelDetection {
                surface,
                level,
                sigma,
                band_x: gf.band_x,
                band_t: gf.band_t,
                maxima,
                ridges,
                gradient: d.dump_fields.then_some(gf),
            });
        }
    }
    let row = grid.m() / 2;
    let mut chains = Vec::new();
    for &surface in &d.surfaces {
        let trusted: Vec<&LevelDetection> = levels
            .iter()
            .filter(|l| l.surface == surface)
            .take_while(|l| row >= l.band_t && row + l.band_t < grid.m())
            .collect();
        let level_ids: Vec<i32> = trusted.iter().map(|l| l.level).collect();
        let mut sc = SurfaceChains {
            surface,
            row,
            levels: level_ids.clone(),
            chains: Vec::new(),
            estimates: Vec::new(),
        };
        if let (Some(&lo), Some(&hi)) = (level_ids.first(), level_ids.last()) {
            let maxima = ScaleMaxima {
                grid: *grid.x(),
                scales: ScaleSet::new(lo, hi)?,
                per_scale: trusted
                    .iter()
                    .map(|l| {
                        l.maxima
                            .iter()
                            .filter(|p| p.row == Some(row))
                            .copied()
                            .collect()
                    })
                    .collect(),
            };
            sc.chains = chain_across_scales(&maxima, d.linking_radius_cells);
            sc.estimates = sc
                .chains
                .iter()
                .map(|c| Ok(estimate_exponent_with(c, &d.bands)?.shifted(SURFACE_ORDER, &d.bands)))
                .collect::<Result<_>>()?;
        }
        chains.push(sc);
    }
    Ok(Detection {
        grid,
        reference_level: d.reference_level,
        levels,
        chains,
    })
}

/// Characteristic report for one surface.
#[derive(Clone, Debug)]
pub struct SurfaceReport {
    pub surface: Surface,
    pub report: CharacteristicReport,
}

#[derive(Clone, Debug)]
pub struct Verification {
    pub reports: Vec<SurfaceReport>,
    pub aligned: bool,
}

/// Fits lines to the reference-level ridges of each surface and compares
/// them with the characteristics. Aligned only if every surface aligns.
pub fn verify(det: &Detection, cfg: &PipelineConfig) -> Result<Verification> {
    let coeffs = cfg.verify_coefficients()?;
    let v = &cfg.verify;
    let x0 = cfg.verify_x0();
    let mut reports = Vec::new();
    for &surface in &cfg.detect.surfaces {
        let ridges = det
            .at(surface, det.reference_level)
            .map(|l| l.ridges.as_slice())
            .unwrap_or_default();
        let fitted: Vec<FittedLine> = match fit_ridge_lines(ridges, v.n_lines) {
            Ok(f) => f,
            Err(Error::Empty(_)) => Vec::new(),
            Err(e) => return Err(e),
        };
        let report = verify_alignment(&fitted, &coeffs, x0, v.slope_tol, v.intercept_tol)?;
        let cov = coverage(ridges, &report.expected, v.coverage_cells);
        reports.push(SurfaceReport {
            surface,
            report: report.with_coverage(cov),
        });
    }
    let aligned = reports.iter().all(|r| r.report.aligned);
    Ok(Verification { reports, aligned })
}

/// Scale chains and exponent estimates of a 1D signal.
#[derive(Clone, Debug)]
pub struct LipschitzAnalysis {
    pub maxima: ScaleMaxima,
    pub chains: Vec<MaximaChain>,
    pub estimates: Vec<LipschitzEstimate>,
}

pub fn lipschitz_signal(cfg: &PipelineConfig) -> Result<Signal1D> {
    let l = &cfg.lipschitz;
    let grid = Grid1D::new(l.x_min, l.x_max, l.n)?;
    sample_initial_data(&l.signal.spec("lipschitz.signal")?, &grid)
}

pub fn analyse_signal(signal: &Signal1D, cfg: &PipelineConfig) -> Result<LipschitzAnalysis> {
    let l = &cfg.lipschitz;
    let stack = cwt1d_with(signal, l.order, l.scales, &cfg.transform.options())?;
    let maxima = find_maxima_1d(&stack, l.threshold)?;
    let chains = chain_across_scales(&maxima, l.linking_radius_cells);
    let estimates = chains
        .iter()
        .map(|c| estimate_exponent_with(c, &l.bands))
        .collect::<Result<_>>()?;
    Ok(LipschitzAnalysis {
        maxima,
        chains,
        estimates,
    })
}

/// Where a command reads its input from.
#[derive(Clone, Debug, Default)]
pub enum Input {
    /// Computed from the config.
    #[default]
    Config,
    /// A FIELD2D dump.
    Field(PathBuf),
    /// A SIGNAL1D dump (Lipschitz analysis only).
    Signal(PathBuf),
    /// One time row of a FIELD2D dump (Lipschitz analysis only).
    FieldRow(PathBuf, usize),
}

fn field_input(cfg: &PipelineConfig, input: &Input) -> Result<Field2D> {
    match input {
        Input::Config => solve(cfg),
        Input::Field(p) => Field2D::read(p),
        Input::Signal(_) | Input::FieldRow(..) => Err(Error::InvalidArgument(
            "this command takes a field, not a signal".into(),
        )),
    }
}

fn signal_input(cfg: &PipelineConfig, input: &Input) -> Result<Signal1D> {
    match input {
        Input::Config => lipschitz_signal(cfg),
        Input::Signal(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Signal1D::from_dump(&text)
        }
        Input::FieldRow(p, j) => {
            let f = Field2D::read(p)?;
            if *j >= f.grid().m() {
                return Err(Error::InvalidArgument(format!(
                    "row {j} is outside the field's {} rows",
                    f.grid().m()
                )));
            }
            Ok(f.row_signal(*j))
        }
        Input::Field(_) => Err(Error::InvalidArgument(
            "lipschitz takes a signal or a field row".into(),
        )),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    write_atomic(path, text.as_bytes())
}

pub fn cmd_solve(cfg: &PipelineConfig, out: &Path) -> Result<Field2D> {
    let field = solve(cfg)?;
    write_atomic(&out.join(FIELD_FILE), field.to_dump().as_bytes())?;
    Ok(field)
}

fn maxima_table(det: &Detection) -> Table {
    let mut t = Table::new(&[
        "surface", "level", "sigma", "t", "x", "modulus", "angle", "row", "col",
    ]);
    for l in &det.levels {
        for p in &l.maxima {
            t.push(vec![
                cell(l.surface.as_str()),
                cell(l.level),
                cell(p.sigma),
                cell(p.t.unwrap_or(f64::NAN)),
                cell(p.x),
                cell(p.modulus),
                cell(p.angle),
                cell(p.row.unwrap_or(0)),
                cell(p.index),
            ]);
        }
    }
    t
}

fn prefixed(prefix: &[String], inner: &Table, header: &[&str], into: &mut Option<Table>) {
    let t = into.get_or_insert_with(|| {
        let mut h: Vec<&str> = header.to_vec();
        h.extend(inner.header().iter().map(String::as_str));
        Table::new(&h)
    });
    for row in inner.rows() {
        let mut r = prefix.to_vec();
        r.extend(row.iter().cloned());
        t.push(r);
    }
}

pub fn write_detection(det: &Detection, cfg: &PipelineConfig, out: &Path) -> Result<()> {
    maxima_table(det).write(&out.join("maxima.tsv"))?;
    let mut ridges = None;
    let mut summary = Table::new(&[
        "surface",
        "level",
        "ridge_id",
        "points",
        "t_start",
        "t_end",
        "classification",
    ]);
    for l in &det.levels {
        let classes = if l.level == det.reference_level {
            det.ridge_classes(l.surface, cfg.detect.linking_radius_cells)
        } else {
            Vec::new()
        };
        prefixed(
            &[cell(l.surface.as_str()), cell(l.level)],
            &chains_table(&l.ridges),
            &["surface", "level"],
            &mut ridges,
        );
        for (id, r) in l.ridges.iter().enumerate() {
            let ts = |p: Option<&MaximaPoint>| p.and_then(|p| p.t).unwrap_or(f64::NAN);
            summary.push(vec![
                cell(l.surface.as_str()),
                cell(l.level),
                cell(id),
                cell(r.len()),
                cell(ts(r.points.first())),
                cell(ts(r.points.last())),
                cell(
                    classes
                        .get(id)
                        .copied()
                        .unwrap_or(Classification::Indeterminate),
                ),
            ]);
        }
    }
    let empty_chains = || {
        let mut h = vec!["surface", "level"];
        h.extend(["kind", "chain_id", "sigma", "t", "x", "modulus", "angle"]);
        Table::new(&h)
    };
    ridges
        .unwrap_or_else(empty_chains)
        .write(&out.join("ridges.tsv"))?;
    summary.write(&out.join("ridge_summary.tsv"))?;
    let mut scale = None;
    let mut estimates = None;
    for sc in &det.chains {
        prefixed(
            &[cell(sc.surface.as_str()), cell(sc.row)],
            &chains_table(&sc.chains),
            &["surface", "row"],
            &mut scale,
        );
        let rows: Vec<(usize, LipschitzEstimate)> =
            sc.estimates.iter().copied().enumerate().collect();
        prefixed(
            &[cell(sc.surface.as_str()), cell(sc.row)],
            &estimates_table(&rows),
            &["surface", "row"],
            &mut estimates,
        );
    }
    let empty = |h: &[&str]| Table::new(h);
    scale
        .unwrap_or_else(|| {
            empty(&[
                "surface", "row", "kind", "chain_id", "sigma", "t", "x", "modulus", "angle",
            ])
        })
        .write(&out.join("scale_chains.tsv"))?;
    estimates
        .unwrap_or_else(|| {
            empty(&[
                "surface",
                "row",
                "chain_id",
                "alpha",
                "log_K",
                "residual_rms",
                "classification",
            ])
        })
        .write(&out.join("scale_estimates.tsv"))?;
    let g = det.grid;
    let mut per_level = Vec::new();
    for l in &det.levels {
        per_level.push(json!({
            "surface": l.surface.as_str(),
            "level": l.level,
            "sigma": l.sigma,
            "band_x": l.band_x,
            "band_t": l.band_t,
            "maxima": l.maxima.len(),
            "ridges": l.ridges.len(),
        }));
        if let Some(gf) = &l.gradient {
            gf.export(
                out,
                &format!("gradient_{}_j{}", l.surface.as_str(), l.level),
                json!({ "surface": l.surface.as_str(), "level": l.level }),
            )?;
        }
    }
    let manifest = json!({
        "grid": {
            "x_min": g.x().x_min(), "x_max": g.x().x_max(), "n": g.n(),
            "t_min": g.t_min(), "t_max": g.t_max(), "m": g.m(),
        },
        "reference_level": det.reference_level,
        "threshold": cfg.detect.threshold,
        "surface_order": SURFACE_ORDER,
        "levels": per_level,
        "scale_chains": det.chains.iter().map(|c| json!({
            "surface": c.surface.as_str(), "row": c.row, "levels": c.levels, "chains": c.chains.len(),
        })).collect::<Vec<_>>(),
        "files": ["maxima.tsv", "ridges.tsv", "ridge_summary.tsv", "scale_chains.tsv", "scale_estimates.tsv"],
    });
    write_json(&out.join("detect_manifest.json"), &manifest)
}

pub fn cmd_detect(cfg: &PipelineConfig, input: &Input, out: &Path) -> Result<Detection> {
    let field = field_input(cfg, input)?;
    let det = detect(&field, cfg)?;
    write_detection(&det, cfg, out)?;
    Ok(det)
}

pub fn write_verification(v: &Verification, out: &Path) -> Result<()> {
    let mut summary = String::new();
    summary.push_str(if v.aligned {
        "verdict: aligned\n"
    } else {
        "verdict: not_aligned\n"
    });
    for r in &v.reports {
        let name = r.surface.as_str();
        write_atomic(
            &out.join(format!("characteristics_{name}.txt")),
            r.report.to_text().as_bytes(),
        )?;
        r.report
            .lines_table()
            .write(&out.join(format!("characteristics_{name}.tsv")))?;
        summary.push_str(&format!(
            "{name}: {}\n",
            if r.report.aligned {
                "aligned"
            } else {
                "not_aligned"
            }
        ));
    }
    write_atomic(&out.join("verdict.txt"), summary.as_bytes())
}

pub fn cmd_verify(
    cfg: &PipelineConfig,
    input: &Input,
    out: &Path,
) -> Result<(Verification, Outcome)> {
    let field = field_input(cfg, input)?;
    let det = detect(&field, cfg)?;
    let v = verify(&det, cfg)?;
    write_verification(&v, out)?;
    let outcome = if v.aligned {
        Outcome::Success
    } else {
        Outcome::NotAligned
    };
    Ok((v, outcome))
}

pub fn cmd_lipschitz(cfg: &PipelineConfig, input: &Input, out: &Path) -> Result<LipschitzAnalysis> {
    let signal = signal_input(cfg, input)?;
    let a = analyse_signal(&signal, cfg)?;
    chains_table(&a.chains).write(&out.join("lipschitz_chains.tsv"))?;
    let rows: Vec<(usize, LipschitzEstimate)> = a.estimates.iter().copied().enumerate().collect();
    estimates_table(&rows).write(&out.join("lipschitz.tsv"))?;
    Ok(a)
}

/// Solve, detect and verify, writing every intermediate artifact.
pub fn cmd_full(cfg: &PipelineConfig, out: &Path) -> Result<(Verification, Outcome)> {
    let field = cmd_solve(cfg, out)?;
    let det = detect(&field, cfg)?;
    write_detection(&det, cfg, out)?;
    let v = verify(&det, cfg)?;
    write_verification(&v, out)?;
    let outcome = if v.aligned {
        Outcome::Success
    } else {
        Outcome::NotAligned
    };
    Ok((v, outcome))
}
