//! Characteristic slopes of `a u_xx + 2b u_xt + c u_tt = 0`, straight-line
//! fits to detected ridges, and the alignment check between the two.
//!
//! Characteristics `x = x0 + λ t` have slopes solving `c λ² − 2b λ + a = 0`;
//! for the wave equation `u_tt = ν² u_xx` that is `λ = ±ν`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{cell, Table};
use crate::wtmm::{ChainKind, MaximaChain, MaximaPoint};

/// Ridge points farther than this many cells (horizontally) from a line are
/// not its inliers.
pub const INLIER_CELLS: f64 = 3.0;
pub const MIN_RIDGE_POINTS: usize = 5;

/// Cap on the points used to propose candidate lines.
const MAX_PROPOSAL_POINTS: usize = 160;
const MAX_REFITS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PdeCoefficients {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let k = Self { a, b, c };
        k.check()?;
        Ok(k)
    }

    /// `u_tt = ν² u_xx`, i.e. `a = −ν², b = 0, c = 1`.
    pub fn wave(nu: f64) -> Self {
        Self {
            a: -nu * nu,
            b: 0.0,
            c: 1.0,
        }
    }

    pub fn discriminant(&self) -> f64 {
        self.b * self.b - self.a * self.c
    }

    fn check(&self) -> Result<()> {
        let d = self.discriminant();
        if !(self.c > 0.0 && d > 0.0) || !d.is_finite() {
            return Err(Error::NotHyperbolic {
                discriminant: d,
                c: self.c,
            });
        }
        Ok(())
    }
}

/// Both real roots of `c λ² − 2b λ + a = 0`, ascending. Uses
/// `q = b + sign(b) sqrt(b² − ac)` and the pair `q/c, a/q` to avoid
/// cancellation.
pub fn char_roots(coeffs: &PdeCoefficients) -> Result<(f64, f64)> {
    coeffs.check()?;
    let PdeCoefficients { a, b, c } = *coeffs;
    let sign = if b < 0.0 { -1.0 } else { 1.0 };
    let q = b + sign * coeffs.discriminant().sqrt();
    let (r1, r2) = (q / c, a / q);
    Ok(if r1 <= r2 { (r1, r2) } else { (r2, r1) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicLine {
    /// Intercept at `t = 0`.
    pub x0: f64,
    /// Slope `dx/dt`.
    pub lambda: f64,
}

impl CharacteristicLine {
    pub fn x_at(&self, t: f64) -> f64 {
        self.x0 + self.lambda * t
    }

    /// Horizontal offset of `(x, t)` from the line.
    pub fn offset(&self, x: f64, t: f64) -> f64 {
        x - self.x_at(t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedLine {
    pub line: CharacteristicLine,
    pub inliers: usize,
    /// RMS horizontal residual over the inliers.
    pub rms: f64,
    /// Sum of inlier moduli.
    pub weight: f64,
}

#[derive(Clone, Copy, Debug)]
struct RidgePoint {
    x: f64,
    t: f64,
    w: f64,
}

fn ridge_points(chain: &MaximaChain) -> Result<Vec<RidgePoint>> {
    if chain.kind != ChainKind::Ridge {
        return Err(Error::InvalidArgument(
            "line fitting needs ridge chains".into(),
        ));
    }
    chain
        .points
        .iter()
        .map(|p: &MaximaPoint| {
            let t = p.t.ok_or_else(|| {
                Error::InvalidArgument("ridge point without a time coordinate".into())
            })?;
            Ok(RidgePoint {
                x: p.x,
                t,
                w: p.modulus.max(0.0),
            })
        })
        .collect()
}

/// Modulus-weighted orthogonal fit in the `(t, x)` plane.
fn tls(points: &[RidgePoint]) -> Result<CharacteristicLine> {
    let (t_lo, t_hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.t), hi.max(p.t))
        });
    if !(t_hi > t_lo) {
        return Err(Error::Degenerate("ridge points all lie at one time".into()));
    }
    let mut w_sum: f64 = points.iter().map(|p| p.w).sum();
    let uniform = !(w_sum > 0.0);
    let weight = |p: &RidgePoint| if uniform { 1.0 } else { p.w };
    if uniform {
        w_sum = points.len() as f64;
    }
    let tm = points.iter().map(|p| weight(p) * p.t).sum::<f64>() / w_sum;
    let xm = points.iter().map(|p| weight(p) * p.x).sum::<f64>() / w_sum;
    let (mut stt, mut stx, mut sxx) = (0.0, 0.0, 0.0);
    for p in points {
        let (dt, dx) = (p.t - tm, p.x - xm);
        let w = weight(p);
        stt += w * dt * dt;
        stx += w * dt * dx;
        sxx += w * dx * dx;
    }
    let phi = 0.5 * (2.0 * stx).atan2(stt - sxx);
    if phi.cos().abs() < 1e-12 {
        return Err(Error::Degenerate("ridge is parallel to the x axis".into()));
    }
    let lambda = phi.tan();
    Ok(CharacteristicLine {
        x0: xm - lambda * tm,
        lambda,
    })
}

fn inliers_of(points: &[RidgePoint], line: &CharacteristicLine, tol: f64) -> Vec<bool> {
    points
        .iter()
        .map(|p| line.offset(p.x, p.t).abs() <= tol)
        .collect()
}

fn score(points: &[RidgePoint], mask: &[bool]) -> (usize, f64) {
    points
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0, 0.0), |(n, w), (p, _)| (n + 1, w + p.w))
}

/// Pair consensus followed by iterated weighted TLS on the inliers.
/// Returns the fit and its inlier mask.
fn robust_fit(points: &[RidgePoint], tol: f64) -> Result<(FittedLine, Vec<bool>)> {
    let stride = points.len().div_ceil(MAX_PROPOSAL_POINTS).max(1);
    let proposals: Vec<&RidgePoint> = points.iter().step_by(stride).collect();
    let mut best: Option<((usize, f64), CharacteristicLine)> = None;
    for (i, p) in proposals.iter().enumerate() {
        for q in &proposals[i + 1..] {
            if p.t == q.t {
                continue;
            }
            let lambda = (q.x - p.x) / (q.t - p.t);
            let line = CharacteristicLine {
                x0: p.x - lambda * p.t,
                lambda,
            };
            let s = score(points, &inliers_of(points, &line, tol));
            let better = match &best {
                None => true,
                Some((b, _)) => s.1 > b.1 || (s.1 == b.1 && s.0 > b.0),
            };
            if better {
                best = Some((s, line));
            }
        }
    }
    let Some((_, mut line)) = best else {
        return Err(Error::Degenerate("ridge points all lie at one time".into()));
    };
    let mut mask = inliers_of(points, &line, tol);
    for _ in 0..MAX_REFITS {
        let chosen: Vec<RidgePoint> = points
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(p, _)| *p)
            .collect();
        if chosen.len() < 2 {
            break;
        }
        line = match tls(&chosen) {
            Ok(l) => l,
            Err(_) => break,
        };
        let next = inliers_of(points, &line, tol);
        if next == mask {
            break;
        }
        mask = next;
    }
    let (n, weight) = score(points, &mask);
    let ss: f64 = points
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|(p, _)| line.offset(p.x, p.t).powi(2))
        .sum();
    let fitted = FittedLine {
        line,
        inliers: n,
        rms: if n > 0 { (ss / n as f64).sqrt() } else { 0.0 },
        weight,
    };
    Ok((fitted, mask))
}

/// Fits straight lines to ridges. Each ridge gets a robust weighted
/// orthogonal fit with a 3-cell inlier rule; with `n_lines = 2`, a ridge
/// whose outliers still form at least five points (both branches through the
/// apex) yields a second line fitted to the remainder. The `n_lines` lines
/// with the largest inlier weight are returned.
pub fn fit_ridge_lines(ridges: &[MaximaChain], n_lines: usize) -> Result<Vec<FittedLine>> {
    if !(1..=2).contains(&n_lines) {
        return Err(Error::InvalidArgument(format!(
            "n_lines must be 1 or 2, got {n_lines}"
        )));
    }
    if ridges.is_empty() {
        return Err(Error::Empty("no ridges to fit"));
    }
    let mut lines = Vec::new();
    for ridge in ridges {
        if ridge.len() < MIN_RIDGE_POINTS {
            return Err(Error::TooFewPoints {
                need: MIN_RIDGE_POINTS,
                got: ridge.len(),
            });
        }
        let tol = INLIER_CELLS * ridge.base_unit;
        let points = ridge_points(ridge)?;
        let (first, mask) = robust_fit(&points, tol)?;
        lines.push(first);
        if n_lines == 2 {
            let rest: Vec<RidgePoint> = points
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| !m)
                .map(|(p, _)| *p)
                .collect();
            if rest.len() >= MIN_RIDGE_POINTS {
                if let Ok((second, _)) = robust_fit(&rest, tol) {
                    lines.push(second);
                }
            }
        }
    }
    lines.sort_by(|u, v| {
        v.weight
            .total_cmp(&u.weight)
            .then_with(|| v.inliers.cmp(&u.inliers))
            .then_with(|| u.line.lambda.total_cmp(&v.line.lambda))
    });
    lines.truncate(n_lines);
    lines.sort_by(|u, v| u.line.lambda.total_cmp(&v.line.lambda));
    Ok(lines)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineMatch {
    pub expected: usize,
    pub fitted: usize,
    pub slope_error: f64,
    pub intercept_error: f64,
    pub within_tolerance: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharacteristicReport {
    pub coefficients: PdeCoefficients,
    pub x0_true: f64,
    pub slope_tol: f64,
    pub intercept_tol: f64,
    pub fitted: Vec<FittedLine>,
    pub expected: Vec<CharacteristicLine>,
    pub matching: Vec<LineMatch>,
    /// Fraction of ridge points near an expected line, when computed.
    pub coverage: Option<f64>,
    pub aligned: bool,
}

/// Compares fitted lines with the characteristics through `x0_true`.
/// Matching is greedy by slope error; every expected line needs a partner
/// within both tolerances for the verdict to hold.
pub fn verify_alignment(
    fitted: &[FittedLine],
    coeffs: &PdeCoefficients,
    x0_true: f64,
    slope_tol: f64,
    intercept_tol: f64,
) -> Result<CharacteristicReport> {
    if !(slope_tol > 0.0 && intercept_tol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    let (l1, l2) = char_roots(coeffs)?;
    let expected = vec![
        CharacteristicLine {
            x0: x0_true,
            lambda: l1,
        },
        CharacteristicLine {
            x0: x0_true,
            lambda: l2,
        },
    ];
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (e, ex) in expected.iter().enumerate() {
        for (f, fl) in fitted.iter().enumerate() {
            pairs.push(((fl.line.lambda - ex.lambda).abs(), e, f));
        }
    }
    pairs.sort_by(|u, v| u.0.total_cmp(&v.0).then(u.1.cmp(&v.1)).then(u.2.cmp(&v.2)));
    let mut e_taken = vec![false; expected.len()];
    let mut f_taken = vec![false; fitted.len()];
    let mut matching = Vec::new();
    for (slope_error, e, f) in pairs {
        if e_taken[e] || f_taken[f] {
            continue;
        }
        e_taken[e] = true;
        f_taken[f] = true;
        let intercept_error = (fitted[f].line.x0 - expected[e].x0).abs();
        matching.push(LineMatch {
            expected: e,
            fitted: f,
            slope_error,
            intercept_error,
            within_tolerance: slope_error <= slope_tol && intercept_error <= intercept_tol,
        });
    }
    matching.sort_by_key(|m| m.expected);
    let aligned = matching.len() == expected.len() && matching.iter().all(|m| m.within_tolerance);
    Ok(CharacteristicReport {
        coefficients: *coeffs,
        x0_true,
        slope_tol,
        intercept_tol,
        fitted: fitted.to_vec(),
        expected,
        matching,
        coverage: None,
        aligned,
    })
}

/// Fraction of ridge points within `cells · base_unit` (horizontally) of
/// some line.
pub fn coverage(ridges: &[MaximaChain], lines: &[CharacteristicLine], cells: f64) -> f64 {
    let mut total = 0usize;
    let mut near = 0usize;
    for r in ridges {
        let tol = cells * r.base_unit;
        for p in &r.points {
            let Some(t) = p.t else { continue };
            total += 1;
            if lines.iter().any(|l| l.offset(p.x, t).abs() <= tol) {
                near += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        near as f64 / total as f64
    }
}

impl CharacteristicReport {
    pub fn with_coverage(mut self, coverage: f64) -> Self {
        self.coverage = Some(coverage);
        self
    }

    /// Key-value report with one indented block per line.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let k = &self.coefficients;
        let _ = writeln!(
            s,
            "verdict: {}",
            if self.aligned {
                "aligned"
            } else {
                "not_aligned"
            }
        );
        let _ = writeln!(s, "coefficients: a={} b={} c={}", k.a, k.b, k.c);
        let _ = writeln!(s, "x0_true: {}", self.x0_true);
        let _ = writeln!(s, "slope_tol: {}", self.slope_tol);
        let _ = writeln!(s, "intercept_tol: {}", self.intercept_tol);
        if let Some(c) = self.coverage {
            let _ = writeln!(s, "coverage: {c}");
        }
        let _ = writeln!(s, "expected:");
        for (i, l) in self.expected.iter().enumerate() {
            let _ = writeln!(s, "  - id: {i}\n    x0: {}\n    lambda: {}", l.x0, l.lambda);
        }
        let _ = writeln!(s, "fitted:");
        for (i, f) in self.fitted.iter().enumerate() {
            let _ = writeln!(
                s,
                "  - id: {i}\n    x0: {}\n    lambda: {}\n    inliers: {}\n    rms: {}",
                f.line.x0, f.line.lambda, f.inliers, f.rms
            );
        }
        let _ = writeln!(s, "matching:");
        for m in &self.matching {
            let _ = writeln!(
                s,
                "  - expected: {}\n    fitted: {}\n    slope_error: {}\n    intercept_error: {}\n    within_tolerance: {}",
                m.expected, m.fitted, m.slope_error, m.intercept_error, m.within_tolerance
            );
        }
        s
    }

    /// One row per expected and fitted line: `role id x0 lambda inliers rms
    /// partner slope_error intercept_error`.
    pub fn lines_table(&self) -> Table {
        let mut t = Table::new(&[
            "role",
            "id",
            "x0",
            "lambda",
            "inliers",
            "rms",
            "partner",
            "slope_error",
            "intercept_error",
        ]);
        let nan = f64::NAN;
        for (i, l) in self.expected.iter().enumerate() {
            let m = self.matching.iter().find(|m| m.expected == i);
            t.push(vec![
                cell("expected"),
                cell(i),
                cell(l.x0),
                cell(l.lambda),
                cell(0),
                cell(0.0),
                m.map_or_else(|| cell(-1), |m| cell(m.fitted)),
                cell(m.map_or(nan, |m| m.slope_error)),
                cell(m.map_or(nan, |m| m.intercept_error)),
            ]);
        }
        for (i, f) in self.fitted.iter().enumerate() {
            let m = self.matching.iter().find(|m| m.fitted == i);
            t.push(vec![
                cell("fitted"),
                cell(i),
                cell(f.line.x0),
                cell(f.line.lambda),
                cell(f.inliers),
                cell(f.rms),
                m.map_or_else(|| cell(-1), |m| cell(m.expected)),
                cell(m.map_or(nan, |m| m.slope_error)),
                cell(m.map_or(nan, |m| m.intercept_error)),
            ]);
        }
        t
    }
}
