//! Uniform space-time grids, sampled signals and fields, and the synthetic
//! initial data used to plant singularities at known locations.
//!
//! Fields are stored row-major by time row: sample `(i, j)` (column `i`
//! along x, row `j` along t) lives at `values[j * n + i]`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Endpoint-inclusive uniform grid on `[x_min, x_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
}

impl Grid1D {
    pub const MIN_SAMPLES: usize = 8;

    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::InvalidGrid("non-finite bounds".into()));
        }
        if x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "reversed bounds: x_min = {x_min} >= x_max = {x_max}"
            )));
        }
        if n < Self::MIN_SAMPLES {
            return Err(Error::InvalidGrid(format!(
                "undersized: n = {n} < {}",
                Self::MIN_SAMPLES
            )));
        }
        let dx = (x_max - x_min) / (n - 1) as f64;
        Ok(Self {
            x_min,
            x_max,
            n,
            dx,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// Fractional index of `x` (not clamped).
    #[inline]
    pub fn position(&self, x: f64) -> f64 {
        (x - self.x_min) / self.dx
    }

    /// Index of the sample nearest to `x`, clamped into the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let p = self.position(x).round();
        p.clamp(0.0, (self.n - 1) as f64) as usize
    }

    pub fn coords(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.coord(i))
    }
}

/// Space-time grid: `x` columns and `m` time rows on `[t_min, t_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    x: Grid1D,
    t_min: f64,
    t_max: f64,
    m: usize,
    dt: f64,
}

impl Grid2D {
    pub const MIN_ROWS: usize = 4;

    pub fn new(x: Grid1D, t_min: f64, t_max: f64, m: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite()) {
            return Err(Error::InvalidGrid("non-finite time bounds".into()));
        }
        if t_min < 0.0 {
            return Err(Error::InvalidGrid(format!("t_min = {t_min} < 0")));
        }
        if t_min >= t_max {
            return Err(Error::InvalidGrid(format!(
                "reversed bounds: t_min = {t_min} >= t_max = {t_max}"
            )));
        }
        if m < Self::MIN_ROWS {
            return Err(Error::InvalidGrid(format!(
                "undersized: m = {m} < {}",
                Self::MIN_ROWS
            )));
        }
        let dt = (t_max - t_min) / (m - 1) as f64;
        Ok(Self {
            x,
            t_min,
            t_max,
            m,
            dt,
        })
    }

    pub fn x(&self) -> &Grid1D {
        &self.x
    }

    /// Time axis viewed as a 1D grid (for convolution along t).
    pub fn t_axis(&self) -> Grid1D {
        Grid1D {
            x_min: self.t_min,
            x_max: self.t_max,
            n: self.m,
            dx: self.dt,
        }
    }

    pub fn n(&self) -> usize {
        self.x.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dx(&self) -> f64 {
        self.x.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    #[inline]
    pub fn t(&self, j: usize) -> f64 {
        self.t_min + j as f64 * self.dt
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.x.n + i
    }

    pub fn size(&self) -> usize {
        self.x.n * self.m
    }
}

/// Builds a space-time grid from raw bounds and counts.
pub fn make_grid2d(
    x_min: f64,
    x_max: f64,
    n: usize,
    t_min: f64,
    t_max: f64,
    m: usize,
) -> Result<Grid2D> {
    Grid2D::new(Grid1D::new(x_min, x_max, n)?, t_min, t_max, m)
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::InvalidArgument(format!(
            "non-finite sample {} at index {k}",
            values[k]
        ))),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Signal1D {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Signal1D {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "signal length {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.coords().map(f).collect())
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same grid, every sample multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|v| v * c).collect())
    }

    /// `SIGNAL1D n x_min x_max` header followed by one line of samples.
    pub fn to_dump(&self) -> String {
        let g = &self.grid;
        let mut out = format!("SIGNAL1D {} {} {}\n", g.n, g.x_min, g.x_max);
        push_row(&mut out, &self.values);
        out
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("SIGNAL1D", "missing header"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "SIGNAL1D" {
            return Err(Error::parse("SIGNAL1D", format!("bad header `{header}`")));
        }
        let n = parse_num::<usize>(h[1], "SIGNAL1D header")?;
        let grid = Grid1D::new(
            parse_num(h[2], "SIGNAL1D header")?,
            parse_num(h[3], "SIGNAL1D header")?,
            n,
        )?;
        let values = lines
            .flat_map(str::split_whitespace)
            .map(|s| parse_num::<f64>(s, "SIGNAL1D values"))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, values)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field2D {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field2D {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::InvalidArgument(format!(
                "field length {} does not match grid size {}",
                values.len(),
                grid.size()
            )));
        }
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.size());
        for j in 0..grid.m() {
            let t = grid.t(j);
            values.extend(grid.x().coords().map(|x| f(x, t)));
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.grid.n();
        &self.values[j * n..(j + 1) * n]
    }

    /// One time row as a 1D signal.
    pub fn row_signal(&self, j: usize) -> Signal1D {
        Signal1D {
            grid: *self.grid.x(),
            values: self.row(j).to_vec(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// `FIELD2D n m x_min x_max t_min t_max`, then `m` rows of `n` samples.
    /// Floats use the shortest representation that parses back exactly.
    pub fn to_dump(&self) -> String {
        let g = &self.grid;
        let mut out = format!(
            "FIELD2D {} {} {} {} {} {}\n",
            g.n(),
            g.m,
            g.x.x_min,
            g.x.x_max,
            g.t_min,
            g.t_max
        );
        for j in 0..g.m {
            push_row(&mut out, self.row(j));
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("FIELD2D", "missing header"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 7 || h[0] != "FIELD2D" {
            return Err(Error::parse("FIELD2D", format!("bad header `{header}`")));
        }
        let ctx = "FIELD2D header";
        let grid = make_grid2d(
            parse_num(h[3], ctx)?,
            parse_num(h[4], ctx)?,
            parse_num(h[1], ctx)?,
            parse_num(h[5], ctx)?,
            parse_num(h[6], ctx)?,
            parse_num(h[2], ctx)?,
        )?;
        let mut values = Vec::with_capacity(grid.size());
        let mut rows = 0;
        for line in lines {
            let before = values.len();
            for s in line.split_whitespace() {
                values.push(parse_num::<f64>(s, "FIELD2D values")?);
            }
            if values.len() - before != grid.n() {
                return Err(Error::parse(
                    "FIELD2D",
                    format!(
                        "row {rows} has {} values, expected {}",
                        values.len() - before,
                        grid.n()
                    ),
                ));
            }
            rows += 1;
        }
        if rows != grid.m() {
            return Err(Error::parse(
                "FIELD2D",
                format!("found {rows} rows, expected {}", grid.m()),
            ));
        }
        Self::new(grid, values)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_dump(&text)
    }
}

fn push_row(out: &mut String, values: &[f64]) {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        write!(out, "{v}").expect("writing to a String cannot fail");
    }
    out.push('\n');
}

fn parse_num<T: std::str::FromStr>(s: &str, ctx: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>()
        .map_err(|e| Error::parse(ctx, format!("`{s}`: {e}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// `amplitude * (x - x0)^2 / 2` right of `x0`, zero left of it: C¹ with a
    /// jump of `amplitude` in the second derivative.
    C1ParabolicKink,
    Step,
    RampCorner,
    /// Single-sample impulse of total mass `amplitude`.
    Dirac,
    SmoothSine,
    SmoothGaussian,
    /// `amplitude` everywhere.
    Constant,
}

impl InitialKind {
    pub fn is_singular(self) -> bool {
        matches!(
            self,
            InitialKind::C1ParabolicKink
                | InitialKind::Step
                | InitialKind::RampCorner
                | InitialKind::Dirac
        )
    }
}

/// Synthetic initial data with a singularity (or none) at `x0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSpec {
    pub kind: InitialKind,
    pub x0: f64,
    pub amplitude: f64,
    /// Standard deviation of `smooth_gaussian`; ignored otherwise.
    pub width: f64,
}

impl InitialDataSpec {
    pub const DEFAULT_WIDTH: f64 = 0.5;

    pub fn new(kind: InitialKind, x0: f64, amplitude: f64) -> Self {
        Self {
            kind,
            x0,
            amplitude,
            width: Self::DEFAULT_WIDTH,
        }
    }

    pub fn with_width(mut self, width: f64) -> Self {
        self.width = width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude != 0.0) {
            return Err(Error::InvalidInitialData(format!(
                "amplitude must be finite and non-zero, got {}",
                self.amplitude
            )));
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidInitialData("x0 must be finite".into()));
        }
        if self.kind == InitialKind::SmoothGaussian && !(self.width > 0.0 && self.width.is_finite())
        {
            return Err(Error::InvalidInitialData(format!(
                "smooth_gaussian width must be positive, got {}",
                self.width
            )));
        }
        Ok(())
    }

    /// Checks that singular kinds place `x0` strictly inside the grid.
    pub fn validate_on(&self, grid: &Grid1D) -> Result<()> {
        self.validate()?;
        if self.kind.is_singular() && !(self.x0 > grid.x_min() && self.x0 < grid.x_max()) {
            return Err(Error::InvalidInitialData(format!(
                "x0 = {} must lie strictly inside ({}, {})",
                self.x0,
                grid.x_min(),
                grid.x_max()
            )));
        }
        Ok(())
    }

    /// Pointwise value; `None` for the grid-dependent Dirac impulse.
    pub fn value_at(&self, x: f64) -> Option<f64> {
        let a = self.amplitude;
        let s = x - self.x0;
        let v = match self.kind {
            InitialKind::C1ParabolicKink => {
                if s >= 0.0 {
                    a * s * s / 2.0
                } else {
                    0.0
                }
            }
            InitialKind::Step => {
                if s >= 0.0 {
                    a
                } else {
                    0.0
                }
            }
            InitialKind::RampCorner => a * s.abs(),
            InitialKind::Dirac => return None,
            InitialKind::SmoothSine => a * s.sin(),
            InitialKind::SmoothGaussian => {
                let z = s / self.width;
                a * (-0.5 * z * z).exp()
            }
            InitialKind::Constant => a,
        };
        Some(v)
    }

    /// Location where the data is not smooth, if any.
    pub fn breakpoint(&self) -> Option<f64> {
        self.kind.is_singular().then_some(self.x0)
    }
}

/// Samples initial data on a grid.
pub fn sample_initial_data(spec: &InitialDataSpec, grid: &Grid1D) -> Result<Signal1D> {
    spec.validate_on(grid)?;
    if spec.kind == InitialKind::Dirac {
        let mut values = vec![0.0; grid.len()];
        values[grid.nearest(spec.x0)] = spec.amplitude / grid.dx();
        return Signal1D::new(*grid, values);
    }
    Signal1D::from_fn(*grid, |x| {
        spec.value_at(x)
            .expect("only the Dirac kind lacks pointwise values")
    })
}
