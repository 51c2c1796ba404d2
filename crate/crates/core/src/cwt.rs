//! Discrete wavelet transforms built on Gaussian-derivative kernels.
//!
//! All convolutions use the rectangle rule, `y_i = dx · Σ_k K_k f_{i-k}`,
//! with either a whole-sample mirror (`reflect`) or zero extension at the
//! borders. Two evaluation paths are provided: a direct sum that pairs
//! symmetric taps (so derivative kernels annihilate constants exactly) and an
//! FFT-based linear convolution. Outputs within one kernel half-width of a
//! border depend on the extension and are reported as an untrusted band.

use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{Field2D, Grid1D, Grid2D, Signal1D};
use crate::table::write_atomic;
use crate::wavelets::{GaussianKernel, Kernel2D, SampledKernel, DEFAULT_TRUNCATION};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Whole-sample mirror: `f[-k] = f[k]`, `f[n-1+k] = f[n-1-k]`.
    #[default]
    Reflect,
    Zero,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflect" => Ok(Boundary::Reflect),
            "zero" => Ok(Boundary::Zero),
            other => Err(Error::InvalidArgument(format!(
                "unknown boundary mode `{other}` (expected reflect or zero)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Direct,
    Fft,
}

/// Knobs shared by every transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformOptions {
    pub boundary: Boundary,
    pub method: Method,
    /// Kernel support half-width in units of σ.
    pub truncation: f64,
    pub exec: Exec,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self {
            boundary: Boundary::Reflect,
            method: Method::Direct,
            truncation: DEFAULT_TRUNCATION,
            exec: Exec::default(),
        }
    }
}

impl TransformOptions {
    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }
}

#[inline]
fn extended(values: &[f64], idx: isize, boundary: Boundary) -> f64 {
    let n = values.len() as isize;
    if (0..n).contains(&idx) {
        return values[idx as usize];
    }
    match boundary {
        Boundary::Zero => 0.0,
        Boundary::Reflect => {
            let r = if idx < 0 { -idx } else { 2 * (n - 1) - idx };
            values[r as usize]
        }
    }
}

fn check_width(kernel: &SampledKernel, len: usize) -> Result<()> {
    if kernel.len() > 2 * len {
        return Err(Error::KernelTooWide {
            taps: kernel.len(),
            len,
        });
    }
    Ok(())
}

/// Direct rectangle-rule convolution of raw samples.
pub fn convolve_direct(
    values: &[f64],
    kernel: &SampledKernel,
    boundary: Boundary,
) -> Result<Vec<f64>> {
    check_width(kernel, values.len())?;
    let mut out = vec![0.0; values.len()];
    convolve_direct_into(values, kernel, boundary, &mut out);
    Ok(out)
}

fn convolve_direct_into(
    values: &[f64],
    kernel: &SampledKernel,
    boundary: Boundary,
    out: &mut [f64],
) {
    let half = kernel.half_width() as isize;
    let taps = &kernel.taps()[kernel.half_width()..];
    let h = kernel.spacing();
    let odd = kernel.is_odd();
    let n = values.len() as isize;
    for (i, y) in out.iter_mut().enumerate() {
        let i = i as isize;
        let interior = i - half >= 0 && i + half < n;
        let mut acc = taps[0] * values[i as usize];
        for k in 1..=half {
            let (lo, hi) = if interior {
                (values[(i - k) as usize], values[(i + k) as usize])
            } else {
                (
                    extended(values, i - k, boundary),
                    extended(values, i + k, boundary),
                )
            };
            let pair = if odd { lo - hi } else { lo + hi };
            acc += taps[k as usize] * pair;
        }
        *y = h * acc;
    }
}

/// FFT-based linear convolution of the boundary-extended signal.
pub fn convolve_fft(
    values: &[f64],
    kernel: &SampledKernel,
    boundary: Boundary,
) -> Result<Vec<f64>> {
    check_width(kernel, values.len())?;
    let mut planner = FftPlanner::new();
    Ok(FftConvolver::new(&mut planner, values.len(), kernel).run(values, boundary))
}

/// Precomputed kernel spectrum for repeated FFT convolutions of equal length.
struct FftConvolver {
    n: usize,
    half: usize,
    size: usize,
    spacing: f64,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn rustfft::Fft<f64>>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
}

impl FftConvolver {
    fn new(planner: &mut FftPlanner<f64>, n: usize, kernel: &SampledKernel) -> Self {
        let half = kernel.half_width();
        let size = (n + 4 * half + 1).next_power_of_two();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut spectrum = vec![Complex::new(0.0, 0.0); size];
        for (k, &v) in kernel.taps().iter().enumerate() {
            spectrum[k] = Complex::new(v, 0.0);
        }
        forward.process(&mut spectrum);
        Self {
            n,
            half,
            size,
            spacing: kernel.spacing(),
            spectrum,
            forward,
            inverse,
        }
    }

    fn run(&self, values: &[f64], boundary: Boundary) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.n);
        let r = self.half as isize;
        let mut buf = vec![Complex::new(0.0, 0.0); self.size];
        for (p, slot) in buf.iter_mut().take(self.n + 2 * self.half).enumerate() {
            *slot = Complex::new(extended(values, p as isize - r, boundary), 0.0);
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.spectrum) {
            *b *= *k;
        }
        self.inverse.process(&mut buf);
        let scale = self.spacing / self.size as f64;
        (0..self.n)
            .map(|i| buf[i + 2 * self.half].re * scale)
            .collect()
    }
}

fn convolve_samples(
    values: &[f64],
    kernel: &SampledKernel,
    boundary: Boundary,
    method: Method,
) -> Result<Vec<f64>> {
    match method {
        Method::Direct => convolve_direct(values, kernel, boundary),
        Method::Fft => convolve_fft(values, kernel, boundary),
    }
}

/// Convolves a signal with a sampled kernel; output has the input's length.
pub fn convolve_1d(
    signal: &Signal1D,
    kernel: &SampledKernel,
    boundary: Boundary,
) -> Result<Signal1D> {
    convolve_1d_with(signal, kernel, boundary, Method::Direct)
}

pub fn convolve_1d_with(
    signal: &Signal1D,
    kernel: &SampledKernel,
    boundary: Boundary,
    method: Method,
) -> Result<Signal1D> {
    let out = convolve_samples(signal.values(), kernel, boundary, method)?;
    Signal1D::new(*signal.grid(), out)
}

/// Applies `kernel` along every contiguous `width`-long line of `data`.
fn convolve_lines(
    data: &[f64],
    width: usize,
    kernel: &SampledKernel,
    opts: &TransformOptions,
) -> Result<Vec<f64>> {
    check_width(kernel, width)?;
    let mut out = vec![0.0; data.len()];
    match opts.method {
        Method::Direct => opts.exec.for_each_row(&mut out, width, |r, line| {
            convolve_direct_into(
                &data[r * width..(r + 1) * width],
                kernel,
                opts.boundary,
                line,
            )
        }),
        Method::Fft => {
            let conv = FftConvolver::new(&mut FftPlanner::new(), width, kernel);
            opts.exec.for_each_row(&mut out, width, |r, line| {
                line.copy_from_slice(&conv.run(&data[r * width..(r + 1) * width], opts.boundary))
            })
        }
    }
    Ok(out)
}

fn transpose(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

/// Separable convolution: along x within each time row, then along t.
pub fn convolve_separable(
    field: &Field2D,
    along_x: &SampledKernel,
    along_t: &SampledKernel,
    opts: &TransformOptions,
) -> Result<Field2D> {
    let g = field.grid();
    let (n, m) = (g.n(), g.m());
    let rows = convolve_lines(field.values(), n, along_x, opts)?;
    let cols = convolve_lines(&transpose(&rows, m, n), m, along_t, opts)?;
    Field2D::new(*g, transpose(&cols, n, m))
}

/// Dyadic scale ladder `σ_j = 2^j · base_unit`, `j_min <= j <= j_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleSet {
    pub j_min: i32,
    pub j_max: i32,
}

impl ScaleSet {
    pub fn new(j_min: i32, j_max: i32) -> Result<Self> {
        if j_min > j_max {
            return Err(Error::InvalidArgument(format!(
                "empty scale range {j_min}..{j_max}"
            )));
        }
        Ok(Self { j_min, j_max })
    }

    pub fn levels(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max
    }

    pub fn len(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sigma(&self, j: i32, base_unit: f64) -> f64 {
        base_unit * 2f64.powi(j)
    }

    pub fn sigmas(&self, base_unit: f64) -> Vec<f64> {
        self.levels().map(|j| self.sigma(j, base_unit)).collect()
    }
}

impl std::str::FromStr for ScaleSet {
    type Err = Error;

    /// Parses `JMIN..JMAX`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| Error::parse("scales", format!("expected JMIN..JMAX, got `{s}`")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<i32>()
                .map_err(|e| Error::parse("scales", format!("`{v}`: {e}")))
        };
        ScaleSet::new(parse(a)?, parse(b)?)
    }
}

/// Per-scale coefficients of a 1D wavelet transform.
#[derive(Clone, Debug, PartialEq)]
pub struct CwtStack1D {
    pub grid: Grid1D,
    pub scales: ScaleSet,
    pub order: u8,
    pub boundary: Boundary,
    /// `coefficients[k]` belongs to level `scales.j_min + k`.
    pub coefficients: Vec<Vec<f64>>,
    /// Per-scale untrusted border width in samples.
    pub bands: Vec<usize>,
}

impl CwtStack1D {
    pub fn sigma(&self, k: usize) -> f64 {
        self.scales
            .sigma(self.scales.j_min + k as i32, self.grid.dx())
    }

    pub fn level(&self, k: usize) -> i32 {
        self.scales.j_min + k as i32
    }

    pub fn trusted(&self, k: usize) -> std::ops::Range<usize> {
        let b = self.bands[k];
        b..self.grid.len().saturating_sub(b)
    }

    /// One FIELD2D dump with one row per level; the time columns of the
    /// header carry `j_min` and `j_max`.
    pub fn to_dump(&self) -> Result<String> {
        let g = Grid2D::new(
            self.grid,
            self.scales.j_min as f64,
            self.scales.j_max as f64,
            self.scales.len(),
        )
        .map_err(|e| Error::InvalidArgument(format!("stack cannot be dumped as FIELD2D: {e}")))?;
        Ok(Field2D::new(g, self.coefficients.concat())?.to_dump())
    }
}

pub fn cwt1d(signal: &Signal1D, m: u8, scales: ScaleSet) -> Result<CwtStack1D> {
    cwt1d_with(signal, m, scales, &TransformOptions::default())
}

pub fn cwt1d_with(
    signal: &Signal1D,
    m: u8,
    scales: ScaleSet,
    opts: &TransformOptions,
) -> Result<CwtStack1D> {
    let dx = signal.grid().dx();
    let kernels = scales
        .levels()
        .map(|j| {
            GaussianKernel::with_truncation(m, scales.sigma(j, dx), opts.truncation)?.sample(dx)
        })
        .collect::<Result<Vec<_>>>()?;
    let coefficients = opts
        .exec
        .map(kernels.len(), |k| {
            convolve_samples(signal.values(), &kernels[k], opts.boundary, opts.method)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(CwtStack1D {
        grid: *signal.grid(),
        scales,
        order: m,
        boundary: opts.boundary,
        coefficients,
        bands: kernels.iter().map(SampledKernel::half_width).collect(),
    })
}

/// Untrusted border widths `(columns, rows)` of a single 2D transform at `sigma`.
pub fn untrusted_band(grid: &Grid2D, sigma: f64, truncation: f64) -> (usize, usize) {
    let r = truncation * sigma;
    (
        (r / grid.dx() + 1e-9).floor() as usize,
        (r / grid.dt() + 1e-9).floor() as usize,
    )
}

/// `σ^(ox+ot) ∂^ox_x ∂^ot_t (G_σ * u)` sampled on the field's grid.
pub fn multiscale_derivative_2d(
    field: &Field2D,
    order_x: u8,
    order_t: u8,
    sigma: f64,
    opts: &TransformOptions,
) -> Result<Field2D> {
    let g = field.grid();
    let k = Kernel2D::with_truncation(order_x, order_t, sigma, opts.truncation)?
        .sample(g.dx(), g.dt())?;
    convolve_separable(field, &k.along_x, &k.along_t, opts)
}

/// Smoothed gradient `σ ∇(G_σ * u)` with modulus and angle.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub grid: Grid2D,
    pub sigma: f64,
    pub wt_x: Field2D,
    pub wt_t: Field2D,
    pub modulus: Field2D,
    /// `atan2(wt_t, wt_x)`, in `(-π, π]`.
    pub angle: Field2D,
    /// Untrusted border width in columns.
    pub band_x: usize,
    /// Untrusted border width in rows.
    pub band_t: usize,
}

impl GradientField {
    pub fn from_components(
        wt_x: Field2D,
        wt_t: Field2D,
        sigma: f64,
        band: (usize, usize),
    ) -> Result<Self> {
        let grid = *wt_x.grid();
        if *wt_t.grid() != grid {
            return Err(Error::InvalidArgument(
                "gradient components on different grids".into(),
            ));
        }
        let modulus = wt_x
            .values()
            .iter()
            .zip(wt_t.values())
            .map(|(gx, gt)| gx.hypot(*gt))
            .collect();
        let angle = wt_x
            .values()
            .iter()
            .zip(wt_t.values())
            .map(|(gx, gt)| {
                let a = gt.atan2(*gx);
                if a == -std::f64::consts::PI {
                    std::f64::consts::PI
                } else {
                    a
                }
            })
            .collect();
        Ok(Self {
            grid,
            sigma,
            modulus: Field2D::new(grid, modulus)?,
            angle: Field2D::new(grid, angle)?,
            wt_x,
            wt_t,
            band_x: band.0,
            band_t: band.1,
        })
    }

    /// Widens the untrusted band, e.g. when the input was itself a transform.
    pub fn widen_band(mut self, extra_x: usize, extra_t: usize) -> Self {
        self.band_x += extra_x;
        self.band_t += extra_t;
        self
    }

    pub fn is_trusted(&self, i: usize, j: usize) -> bool {
        i >= self.band_x
            && i + self.band_x < self.grid.n()
            && j >= self.band_t
            && j + self.band_t < self.grid.m()
    }

    /// Writes one FIELD2D dump per component plus a JSON manifest.
    pub fn export(
        &self,
        dir: &Path,
        prefix: &str,
        manifest_extra: serde_json::Value,
    ) -> Result<()> {
        for (name, f) in [
            ("wt_x", &self.wt_x),
            ("wt_t", &self.wt_t),
            ("modulus", &self.modulus),
            ("angle", &self.angle),
        ] {
            write_atomic(
                &dir.join(format!("{prefix}_{name}.field")),
                f.to_dump().as_bytes(),
            )?;
        }
        let manifest = serde_json::json!({
            "sigma": self.sigma,
            "orders": { "wt_x": [1, 0], "wt_t": [0, 1] },
            "band_x": self.band_x,
            "band_t": self.band_t,
            "components": ["wt_x", "wt_t", "modulus", "angle"],
            "extra": manifest_extra,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(
            &dir.join(format!("{prefix}_manifest.json")),
            text.as_bytes(),
        )
    }
}

pub fn gradient_transform(
    field: &Field2D,
    sigma: f64,
    opts: &TransformOptions,
) -> Result<GradientField> {
    let wt_x = multiscale_derivative_2d(field, 1, 0, sigma, opts)?;
    let wt_t = multiscale_derivative_2d(field, 0, 1, sigma, opts)?;
    GradientField::from_components(
        wt_x,
        wt_t,
        sigma,
        untrusted_band(field.grid(), sigma, opts.truncation),
    )
}
