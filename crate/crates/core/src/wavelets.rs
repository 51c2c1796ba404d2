//! Gaussian smoothing kernel `θ` and its first two derivatives, sampled at
//! dyadic-friendly scales.
//!
//! A sampled kernel of order `m` at scale `σ` holds
//! `σ^m · d^m/dx^m [(1/σ) θ(x/σ)] = (1/σ) θ^(m)(x/σ)` on the lattice
//! `k·dx`, `|k·dx| <= radius`. The base factor `(1/σ) θ(x/σ)` has unit mass,
//! and the `σ^m` prefactor makes modulus maxima scale as `σ^α` for a
//! singularity of Lipschitz exponent `α`. The 2D kernels are separable
//! products with the same convention, so the base 2D Gaussian is
//! `(1/σ²) Ψ(r/σ)`.

use crate::error::{Error, Result};

/// `1 / sqrt(2π)`
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Default truncation radius in units of `σ`.
pub const DEFAULT_TRUNCATION: f64 = 5.0;
/// Smallest accepted truncation radius in units of `σ`.
pub const MIN_TRUNCATION: f64 = 4.0;

/// `θ`, `θ'` or `θ''` at `x`.
pub fn theta(m: u8, x: f64) -> Result<f64> {
    let g = INV_SQRT_2PI * (-0.5 * x * x).exp();
    match m {
        0 => Ok(g),
        1 => Ok(-x * g),
        2 => Ok((x * x - 1.0) * g),
        _ => Err(Error::UnsupportedOrder(m)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianKernel {
    pub order: u8,
    pub sigma: f64,
    pub truncation_radius: f64,
}

impl GaussianKernel {
    pub fn new(order: u8, sigma: f64) -> Result<Self> {
        Self::with_truncation(order, sigma, DEFAULT_TRUNCATION)
    }

    /// `truncation` is the support half-width in units of `sigma`.
    pub fn with_truncation(order: u8, sigma: f64, truncation: f64) -> Result<Self> {
        if order > 2 {
            return Err(Error::UnsupportedOrder(order));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !(truncation >= MIN_TRUNCATION) {
            return Err(Error::InvalidArgument(format!(
                "truncation radius {truncation}σ is below {MIN_TRUNCATION}σ"
            )));
        }
        Ok(Self {
            order,
            sigma,
            truncation_radius: truncation * sigma,
        })
    }

    /// Continuous kernel value `(1/σ) θ^(m)(x/σ)`.
    pub fn eval(&self, x: f64) -> f64 {
        theta(self.order, x / self.sigma).expect("order validated at construction") / self.sigma
    }

    pub fn sample(&self, dx: f64) -> Result<SampledKernel> {
        if !(dx > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "spacing must be positive, got {dx}"
            )));
        }
        if self.sigma < 2.0 * dx {
            return Err(Error::UnderResolved {
                sigma: self.sigma,
                min: 2.0 * dx,
            });
        }
        let half = (self.truncation_radius / dx + 1e-9).floor() as usize;
        let sign = if self.order % 2 == 1 { -1.0 } else { 1.0 };
        let mut taps = vec![0.0; 2 * half + 1];
        for k in 0..=half {
            let v = self.eval(k as f64 * dx);
            taps[half + k] = v;
            taps[half - k] = sign * v;
        }
        if self.order % 2 == 1 {
            taps[half] = 0.0;
        }
        if self.order == 2 {
            // Truncation and sampling leave a small mass; remove it along the
            // smoother so constants (and, by symmetry, affine data) map to 0.
            let smooth: Vec<f64> = (0..taps.len())
                .map(|i| {
                    INV_SQRT_2PI
                        * (-0.5 * ((i as f64 - half as f64) * dx / self.sigma).powi(2)).exp()
                })
                .collect();
            let lambda = taps.iter().sum::<f64>() / smooth.iter().sum::<f64>();
            for (t, s) in taps.iter_mut().zip(&smooth) {
                *t -= lambda * s;
            }
        }
        Ok(SampledKernel {
            order: self.order,
            sigma: self.sigma,
            spacing: dx,
            half,
            taps,
        })
    }
}

/// Kernel samples at `k·spacing` for `k` in `-half..=half`. Exactly even
/// for order 0 and 2, exactly odd for order 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledKernel {
    order: u8,
    sigma: f64,
    spacing: f64,
    half: usize,
    taps: Vec<f64>,
}

impl SampledKernel {
    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Support half-width in samples.
    pub fn half_width(&self) -> usize {
        self.half
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn is_odd(&self) -> bool {
        self.order % 2 == 1
    }

    /// Sample at lattice offset `k` (zero outside the support).
    pub fn at(&self, k: isize) -> f64 {
        let idx = k + self.half as isize;
        if idx < 0 || idx as usize >= self.taps.len() {
            0.0
        } else {
            self.taps[idx as usize]
        }
    }

    /// Rectangle-rule integral `spacing · Σ taps`.
    pub fn mass(&self) -> f64 {
        self.spacing * self.taps.iter().sum::<f64>()
    }
}

/// Sampled `σ^m d^m/dx^m [(1/σ) θ(x/σ)]` with the default 5σ support.
pub fn scaled_kernel_1d(m: u8, sigma: f64, dx: f64) -> Result<SampledKernel> {
    GaussianKernel::new(m, sigma)?.sample(dx)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel2D {
    pub order_x: u8,
    pub order_t: u8,
    pub sigma: f64,
    pub truncation: f64,
}

impl Kernel2D {
    pub fn new(order_x: u8, order_t: u8, sigma: f64) -> Result<Self> {
        Self::with_truncation(order_x, order_t, sigma, DEFAULT_TRUNCATION)
    }

    pub fn with_truncation(order_x: u8, order_t: u8, sigma: f64, truncation: f64) -> Result<Self> {
        if order_x + order_t > 2 {
            return Err(Error::InvalidArgument(format!(
                "total derivative order {} exceeds 2",
                order_x + order_t
            )));
        }
        // validates the individual orders, sigma and truncation
        GaussianKernel::with_truncation(order_x, sigma, truncation)?;
        GaussianKernel::with_truncation(order_t, sigma, truncation)?;
        Ok(Self {
            order_x,
            order_t,
            sigma,
            truncation,
        })
    }

    pub fn sample(&self, dx: f64, dt: f64) -> Result<SampledKernel2D> {
        let min = 2.0 * dx.max(dt);
        if self.sigma < min {
            return Err(Error::UnderResolved {
                sigma: self.sigma,
                min,
            });
        }
        Ok(SampledKernel2D {
            along_x: GaussianKernel::with_truncation(self.order_x, self.sigma, self.truncation)?
                .sample(dx)?,
            along_t: GaussianKernel::with_truncation(self.order_t, self.sigma, self.truncation)?
                .sample(dt)?,
        })
    }
}

/// Separable 2D kernel: `K(x, t) = Kx(x) · Kt(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledKernel2D {
    pub along_x: SampledKernel,
    pub along_t: SampledKernel,
}

impl SampledKernel2D {
    pub fn at(&self, kx: isize, kt: isize) -> f64 {
        self.along_x.at(kx) * self.along_t.at(kt)
    }

    pub fn mass(&self) -> f64 {
        self.along_x.mass() * self.along_t.mass()
    }
}

pub fn scaled_kernel_2d(
    order_x: u8,
    order_t: u8,
    sigma: f64,
    dx: f64,
    dt: f64,
) -> Result<SampledKernel2D> {
    Kernel2D::new(order_x, order_t, sigma)?.sample(dx, dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_values_at_origin() {
        assert!((theta(0, 0.0).unwrap() - 0.398_942_280_4).abs() < 1e-10);
        assert_eq!(theta(1, 0.0).unwrap(), 0.0);
        assert!((theta(2, 0.0).unwrap() + 0.398_942_280_4).abs() < 1e-10);
        assert!(matches!(theta(3, 0.0), Err(Error::UnsupportedOrder(3))));
    }

    #[test]
    fn theta_derivatives_match_finite_differences() {
        let h = 1e-5;
        for k in -40..=40 {
            let x = k as f64 * 0.1;
            let d1 = (theta(0, x + h).unwrap() - theta(0, x - h).unwrap()) / (2.0 * h);
            let d2 = (theta(1, x + h).unwrap() - theta(1, x - h).unwrap()) / (2.0 * h);
            assert!((d1 - theta(1, x).unwrap()).abs() < 1e-9);
            assert!((d2 - theta(2, x).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn smoother_has_unit_mass() {
        let k = scaled_kernel_1d(0, 1.0, 0.01).unwrap();
        assert!((k.mass() - 1.0).abs() < 1e-6);
        // coarsest resolvable sampling
        let k = scaled_kernel_1d(0, 0.02, 0.01).unwrap();
        assert!((k.mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn first_derivative_kernel_is_odd() {
        let k = scaled_kernel_1d(1, 2.0, 0.01).unwrap();
        let sum: f64 = k.taps().iter().sum();
        assert!(sum.abs() < 1e-12);
        for j in 0..=k.half_width() as isize {
            assert_eq!(k.at(j), -k.at(-j));
        }
    }

    #[test]
    fn first_derivative_peak_is_theta_at_one() {
        let dx = 0.01;
        let k = scaled_kernel_1d(1, 1.0, dx).unwrap();
        let peak = k.taps().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        // θ'(x) peaks at |x| = 1 with |θ'(1)| = θ(1); sampling error is O(dx²)
        let oracle = (1.0 / (2.0 * std::f64::consts::PI).sqrt()) * (-0.5_f64).exp();
        assert!((oracle - 0.241_970_7).abs() < 1e-7);
        assert!((peak - oracle).abs() < dx * 1e-2);
    }

    #[test]
    fn under_resolved_scale_rejected() {
        assert!(matches!(
            scaled_kernel_1d(1, 0.019, 0.01),
            Err(Error::UnderResolved { .. })
        ));
        assert!(GaussianKernel::with_truncation(0, 1.0, 3.0).is_err());
    }

    #[test]
    fn two_dimensional_kernel_normalization() {
        let k = scaled_kernel_2d(0, 0, 1.0, 0.05, 0.05).unwrap();
        assert!((k.mass() - 1.0).abs() < 1e-5);
        assert!((k.at(0, 0) - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
        let k = scaled_kernel_2d(1, 0, 1.0, 0.05, 0.05).unwrap();
        assert_eq!(k.at(0, 0), 0.0);
        assert!(scaled_kernel_2d(2, 1, 1.0, 0.05, 0.05).is_err());
        assert!(scaled_kernel_2d(0, 1, 0.15, 0.05, 0.1).is_err());
    }

    #[test]
    fn derivative_consistency_over_scales() {
        // centered differences of the order-0 samples match the order-1 samples
        // divided by σ (the multiscale prefactor), within the O(dx²) bound
        // dx²/6 · max|d³/dx³ (1/σ)θ(x/σ)|
        let dx = 0.01;
        for mult in [2.0, 4.0, 8.0] {
            let sigma = mult * dx;
            let k0 = scaled_kernel_1d(0, sigma, dx).unwrap();
            let k1 = scaled_kernel_1d(1, sigma, dx).unwrap();
            let h = k0.half_width() as isize;
            let third_max = (0..=4000)
                .map(|i| {
                    let u = i as f64 * 1e-3;
                    ((3.0 * u - u * u * u) * INV_SQRT_2PI * (-0.5 * u * u).exp()).abs()
                })
                .fold(0.0_f64, f64::max)
                / sigma.powi(4);
            let bound = dx * dx / 6.0 * third_max * 1.01;
            for j in -h + 1..h {
                let fd = (k0.at(j + 1) - k0.at(j - 1)) / (2.0 * dx);
                let want = k1.at(j) / sigma;
                assert!((fd - want).abs() <= bound, "σ={sigma} j={j}");
            }
        }
    }

    #[test]
    fn scale_covariance_of_smoother() {
        let dx = 0.01;
        let sigma = 0.05;
        let fine = scaled_kernel_1d(0, sigma, dx).unwrap();
        let coarse = scaled_kernel_1d(0, 2.0 * sigma, dx).unwrap();
        for j in -(fine.half_width() as isize)..=fine.half_width() as isize {
            let lhs = coarse.at(2 * j);
            let rhs = 0.5 * fine.at(j);
            assert!((lhs - rhs).abs() < 1e-12 * fine.at(0));
        }
    }

    #[test]
    fn truncation_tail_is_negligible() {
        let sigma = 1.0;
        let k = scaled_kernel_1d(0, sigma, 0.001).unwrap();
        let wide = GaussianKernel::with_truncation(0, sigma, 12.0)
            .unwrap()
            .sample(0.001)
            .unwrap();
        let lost = wide.mass() - k.mass();
        assert!(lost >= 0.0 && lost < 1e-6 * wide.mass());
    }
}
