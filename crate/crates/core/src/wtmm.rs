//! Wavelet transform modulus maxima.
//!
//! 1D maxima are local maxima of `|W|` along x at each scale. 2D maxima use
//! Canny-style non-maximum suppression: a cell is kept when its modulus
//! dominates the two bilinear-interpolated neighbours one cell away along the
//! gradient direction. Both are refined to sub-cell precision with a parabola
//! through the three samples.
//!
//! Where a steep ridge crosses a row between two cells, both cells pass the
//! directional test; the weaker of such adjacent pairs is dropped.
//!
//! Ties on two-cell plateaus go to the cell on the backward side: a point
//! must strictly exceed its backward neighbour and at least equal its forward
//! one. This keeps exactly one maximum when a jump falls halfway between two
//! samples.

use crate::cwt::{CwtStack1D, GradientField, ScaleSet};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::Grid1D;
use crate::table::{cell, Table};

pub const DEFAULT_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaximaPoint {
    pub x: f64,
    /// Time coordinate; `None` for 1D maxima.
    pub t: Option<f64>,
    pub sigma: f64,
    /// Dyadic level `j` with `sigma = 2^j dx`, when known.
    pub level: Option<i32>,
    /// Refined peak modulus, always `>= ` the sampled modulus.
    pub modulus: f64,
    pub angle: f64,
    /// Column of the sample the maximum was found at.
    pub index: usize,
    /// Time row of the sample (2D only).
    pub row: Option<usize>,
}

/// Maxima of a 1D transform, grouped by scale (finest first).
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleMaxima {
    pub grid: Grid1D,
    pub scales: ScaleSet,
    pub per_scale: Vec<Vec<MaximaPoint>>,
}

impl ScaleMaxima {
    pub fn total(&self) -> usize {
        self.per_scale.iter().map(Vec::len).sum()
    }
}

fn check_threshold(threshold_rel: f64) -> Result<()> {
    if !(threshold_rel > 0.0 && threshold_rel < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold_rel must lie in (0, 1), got {threshold_rel}"
        )));
    }
    Ok(())
}

/// Parabolic vertex offset and peak value through `(−1, back), (0, mid), (1, fwd)`.
fn refine(back: f64, mid: f64, fwd: f64) -> (f64, f64) {
    let curvature = back - 2.0 * mid + fwd;
    if curvature >= 0.0 {
        return (0.0, mid);
    }
    let delta = (0.5 * (back - fwd) / curvature).clamp(-0.5, 0.5);
    (delta, mid - 0.25 * (back - fwd) * delta)
}

#[inline]
pub fn is_directional_max(mid: f64, back: f64, fwd: f64) -> bool {
    mid > back && mid >= fwd
}

/// Rises smaller than this fraction of the peak are rounding noise.
const PLATEAU_TOL: f64 = 1e-9;

/// A flat stretch where the "maximum" only exceeds its neighbours by noise.
#[inline]
fn is_plateau(mid: f64, back: f64, fwd: f64, peak: f64) -> bool {
    mid - back.min(fwd) <= PLATEAU_TOL * peak
}

pub fn find_maxima_1d(stack: &CwtStack1D, threshold_rel: f64) -> Result<ScaleMaxima> {
    check_threshold(threshold_rel)?;
    if stack.coefficients.is_empty() {
        return Err(Error::Empty("wavelet stack has no scales"));
    }
    let g = stack.grid;
    let n = g.len();
    let per_scale = stack
        .coefficients
        .iter()
        .enumerate()
        .map(|(k, coeffs)| {
            let range = stack.trusted(k);
            let lo = range.start.max(1);
            let hi = range.end.min(n - 1);
            let peak = coeffs[range].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let mut found = Vec::new();
            if peak == 0.0 {
                return found;
            }
            let floor = threshold_rel * peak;
            for i in lo..hi {
                let (b, m, f) = (coeffs[i - 1].abs(), coeffs[i].abs(), coeffs[i + 1].abs());
                if m <= floor || !is_directional_max(m, b, f) || is_plateau(m, b, f, peak) {
                    continue;
                }
                let (delta, value) = refine(b, m, f);
                found.push(MaximaPoint {
                    x: g.coord(i) + delta * g.dx(),
                    t: None,
                    sigma: stack.sigma(k),
                    level: Some(stack.level(k)),
                    modulus: value,
                    angle: if coeffs[i] >= 0.0 {
                        0.0
                    } else {
                        std::f64::consts::PI
                    },
                    index: i,
                    row: None,
                });
            }
            found
        })
        .collect();
    Ok(ScaleMaxima {
        grid: g,
        scales: stack.scales,
        per_scale,
    })
}

/// Bilinear interpolation of a row-major `n × m` array at fractional `(px, py)`.
fn bilinear(values: &[f64], n: usize, m: usize, px: f64, py: f64) -> f64 {
    let px = px.clamp(0.0, (n - 1) as f64);
    let py = py.clamp(0.0, (m - 1) as f64);
    let i0 = (px.floor() as usize).min(n - 2);
    let j0 = (py.floor() as usize).min(m - 2);
    let fx = px - i0 as f64;
    let fy = py - j0 as f64;
    let v = |i: usize, j: usize| values[j * n + i];
    let top = v(i0, j0) * (1.0 - fx) + v(i0 + 1, j0) * fx;
    let bottom = v(i0, j0 + 1) * (1.0 - fx) + v(i0 + 1, j0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Unit gradient direction in index space, `(wt_x dx, wt_t dt)` normalized.
fn index_direction(gf: &GradientField, k: usize) -> Option<(f64, f64)> {
    let ux = gf.wt_x.values()[k] * gf.grid.dx();
    let uy = gf.wt_t.values()[k] * gf.grid.dt();
    let norm = ux.hypot(uy);
    (norm > 0.0).then(|| (ux / norm, uy / norm))
}

/// Modulus values `(back, mid, fwd)` along the gradient through cell `(i, j)`.
pub fn directional_triplet(gf: &GradientField, i: usize, j: usize) -> Option<(f64, f64, f64)> {
    let (n, m) = (gf.grid.n(), gf.grid.m());
    let k = gf.grid.index(i, j);
    let (ux, uy) = index_direction(gf, k)?;
    let md = gf.modulus.values();
    let (x, y) = (i as f64, j as f64);
    Some((
        bilinear(md, n, m, x - ux, y - uy),
        md[k],
        bilinear(md, n, m, x + ux, y + uy),
    ))
}

/// A ridge whose normal satisfies `|n_t| <= ratio · |n_x|` (index space)
/// advances at most `ratio` cells per row. Two such maxima in adjacent
/// columns of one row are the same crossing, and only the stronger is kept.
const ROW_CROSSING_RATIO: f64 = 2.0;

pub fn find_maxima_2d(gf: &GradientField, threshold_rel: f64) -> Result<Vec<MaximaPoint>> {
    find_maxima_2d_with(gf, threshold_rel, Exec::default())
}

/// Non-maximum suppression over the trusted interior; rows in increasing
/// time, columns in increasing x.
pub fn find_maxima_2d_with(
    gf: &GradientField,
    threshold_rel: f64,
    exec: Exec,
) -> Result<Vec<MaximaPoint>> {
    check_threshold(threshold_rel)?;
    let g = gf.grid;
    let (n, m) = (g.n(), g.m());
    let i_lo = gf.band_x.max(1);
    let i_hi = n.saturating_sub(gf.band_x).min(n - 1);
    let j_lo = gf.band_t.max(1);
    let j_hi = m.saturating_sub(gf.band_t).min(m - 1);
    if i_lo >= i_hi || j_lo >= j_hi {
        return Ok(Vec::new());
    }
    let mut peak = 0.0_f64;
    for j in j_lo..j_hi {
        for i in i_lo..i_hi {
            peak = peak.max(gf.modulus.at(i, j));
        }
    }
    if peak == 0.0 {
        return Ok(Vec::new());
    }
    let floor = threshold_rel * peak;
    let rows = exec.map(j_hi - j_lo, |r| {
        let j = j_lo + r;
        let mut found: Vec<(MaximaPoint, bool)> = Vec::new();
        for i in i_lo..i_hi {
            let k = g.index(i, j);
            if gf.modulus.values()[k] <= floor {
                continue;
            }
            let Some((ux, uy)) = index_direction(gf, k) else {
                continue;
            };
            let (b, mid, f) = directional_triplet(gf, i, j).expect("direction exists");
            if !is_directional_max(mid, b, f) || is_plateau(mid, b, f, peak) {
                continue;
            }
            let (delta, value) = refine(b, mid, f);
            if let Some(last) = found.last_mut() {
                let (prev, steep) = (&last.0, last.1);
                if prev.index + 1 == i && steep && uy.abs() <= ROW_CROSSING_RATIO * ux.abs() {
                    if value > prev.modulus {
                        found.pop();
                    } else {
                        continue;
                    }
                }
            }
            let steep = uy.abs() <= ROW_CROSSING_RATIO * ux.abs();
            found.push((
                MaximaPoint {
                    x: g.x().coord(i) + delta * ux * g.dx(),
                    t: Some(g.t(j) + delta * uy * g.dt()),
                    sigma: gf.sigma,
                    level: None,
                    modulus: value,
                    angle: gf.angle.values()[k],
                    index: i,
                    row: Some(j),
                },
                steep,
            ));
        }
        found.into_iter().map(|(p, _)| p).collect::<Vec<_>>()
    });
    Ok(rows.into_iter().flatten().collect())
}

/// Groups 2D maxima by their time row (`m` rows).
pub fn group_by_row(points: &[MaximaPoint], m: usize) -> Vec<Vec<MaximaPoint>> {
    let mut rows = vec![Vec::new(); m];
    for p in points {
        if let Some(j) = p.row {
            rows[j].push(*p);
        }
    }
    rows
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChainKind {
    ScaleChain,
    Ridge,
}

impl ChainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChainKind::ScaleChain => "scale_chain",
            ChainKind::Ridge => "ridge",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaximaChain {
    pub kind: ChainKind,
    /// Ordered by increasing σ (scale chains) or increasing t (ridges).
    pub points: Vec<MaximaPoint>,
    /// Grid spacing `dx` used to express distances in cells.
    pub base_unit: f64,
}

impl MaximaChain {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Greedy nearest-neighbour linking of consecutive layers. Candidate links
/// are taken in order of increasing distance, ties broken toward the larger
/// modulus; each point joins at most one chain. Unclaimed points start new
/// chains.
fn link_layers(
    layers: &[Vec<MaximaPoint>],
    radius: impl Fn(usize) -> f64,
) -> Vec<Vec<MaximaPoint>> {
    let mut done: Vec<Vec<MaximaPoint>> = Vec::new();
    let mut active: Vec<Vec<MaximaPoint>> = layers
        .first()
        .map(|l| l.iter().map(|p| vec![*p]).collect())
        .unwrap_or_default();
    for (k, next) in layers.iter().enumerate().skip(1) {
        let r = radius(k - 1);
        let mut pairs: Vec<(f64, f64, usize, usize)> = Vec::new();
        for (a, chain) in active.iter().enumerate() {
            let last = chain.last().expect("chains are never empty");
            for (b, p) in next.iter().enumerate() {
                let d = (p.x - last.x).abs();
                if d <= r {
                    pairs.push((d, p.modulus, a, b));
                }
            }
        }
        pairs.sort_by(|u, v| {
            u.0.total_cmp(&v.0)
                .then_with(|| v.1.total_cmp(&u.1))
                .then_with(|| u.2.cmp(&v.2))
                .then_with(|| u.3.cmp(&v.3))
        });
        let mut chain_taken = vec![false; active.len()];
        let mut point_taken = vec![false; next.len()];
        let mut extended: Vec<(usize, usize)> = Vec::new();
        for &(_, _, a, b) in &pairs {
            if !chain_taken[a] && !point_taken[b] {
                chain_taken[a] = true;
                point_taken[b] = true;
                extended.push((a, b));
            }
        }
        let mut new_active = Vec::with_capacity(next.len());
        let mut chains: Vec<Option<Vec<MaximaPoint>>> = active.into_iter().map(Some).collect();
        extended.sort_by_key(|&(_, b)| b);
        for (a, b) in extended {
            let mut c = chains[a].take().expect("each chain extends once");
            c.push(next[b]);
            new_active.push(c);
        }
        done.extend(chains.into_iter().flatten());
        for (b, p) in next.iter().enumerate() {
            if !point_taken[b] {
                new_active.push(vec![*p]);
            }
        }
        active = new_active;
    }
    done.extend(active);
    done.sort_by(|u, v| {
        let (p, q) = (&u[0], &v[0]);
        p.sigma
            .total_cmp(&q.sigma)
            .then_with(|| p.t.unwrap_or(0.0).total_cmp(&q.t.unwrap_or(0.0)))
            .then_with(|| p.x.total_cmp(&q.x))
    });
    done
}

pub const MIN_SCALE_CHAIN: usize = 3;

/// Links maxima from the finest to the coarsest scale. The search radius
/// between levels `j` and `j+1` is `linking_radius_cells · σ_{j+1}/σ_{j_min}`
/// cells, so it grows with the kernel width. Chains spanning fewer than
/// three scales are dropped.
pub fn chain_across_scales(maxima: &ScaleMaxima, linking_radius_cells: f64) -> Vec<MaximaChain> {
    if maxima.per_scale.len() < MIN_SCALE_CHAIN {
        return Vec::new();
    }
    let dx = maxima.grid.dx();
    let radius = |k: usize| linking_radius_cells * 2f64.powi(k as i32 + 1) * dx;
    link_layers(&maxima.per_scale, radius)
        .into_iter()
        .filter(|c| c.len() >= MIN_SCALE_CHAIN)
        .map(|points| MaximaChain {
            kind: ChainKind::ScaleChain,
            points,
            base_unit: dx,
        })
        .collect()
}

/// Links per-row 2D maxima into ridges, rejecting row-to-row jumps larger
/// than `max_jump_cells`. `rows[j]` holds the maxima of time row `j`.
pub fn chain_ridges(rows: &[Vec<MaximaPoint>], dx: f64, max_jump_cells: f64) -> Vec<MaximaChain> {
    link_layers(rows, |_| max_jump_cells * dx)
        .into_iter()
        .map(|points| MaximaChain {
            kind: ChainKind::Ridge,
            points,
            base_unit: dx,
        })
        .collect()
}

/// Tabular export: `kind chain_id sigma t x modulus angle`. 1D points carry
/// `NaN` in the `t` column.
pub fn chains_table(chains: &[MaximaChain]) -> Table {
    let mut t = Table::new(&["kind", "chain_id", "sigma", "t", "x", "modulus", "angle"]);
    for (id, c) in chains.iter().enumerate() {
        for p in &c.points {
            t.push(vec![
                cell(c.kind.as_str()),
                cell(id),
                cell(p.sigma),
                cell(p.t.unwrap_or(f64::NAN)),
                cell(p.x),
                cell(p.modulus),
                cell(p.angle),
            ]);
        }
    }
    t
}
