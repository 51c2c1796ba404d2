//! Exact d'Alembert solution of the Cauchy problem
//! `u_tt - nu^2 u_xx = 0`, `u(x,0) = phi(x)`, `u_t(x,0) = psi(x)`.
//!
//! The solution is evaluated pointwise from the closed form, so singularities
//! sit exactly on the characteristics `x -/+ nu t = const` with no scheme
//! dispersion. The `psi` integral uses adaptive Simpson quadrature, split at
//! known breakpoints of the data.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{Field2D, Grid2D, InitialDataSpec, InitialKind};

pub const QUADRATURE_TOL: f64 = 1e-10;
pub const QUADRATURE_MAX_DEPTH: u32 = 30;

type AnalyticFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Initial position or velocity profile.
#[derive(Clone)]
pub enum InitialData {
    Zero,
    Spec(InitialDataSpec),
    Analytic {
        f: AnalyticFn,
        /// Interval on which `f` may be evaluated; unbounded when `None`.
        domain: Option<(f64, f64)>,
        /// Points where `f` is not smooth; quadrature splits there.
        breakpoints: Vec<f64>,
    },
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::Zero => f.write_str("Zero"),
            InitialData::Spec(s) => f.debug_tuple("Spec").field(s).finish(),
            InitialData::Analytic {
                domain,
                breakpoints,
                ..
            } => f
                .debug_struct("Analytic")
                .field("domain", domain)
                .field("breakpoints", breakpoints)
                .finish_non_exhaustive(),
        }
    }
}

impl InitialData {
    pub fn analytic(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        InitialData::Analytic {
            f: Arc::new(f),
            domain: None,
            breakpoints: Vec::new(),
        }
    }

    fn check(&self) -> Result<()> {
        if let InitialData::Spec(s) = self {
            s.validate()?;
            if s.kind == InitialKind::Dirac {
                return Err(Error::InvalidInitialData(
                    "dirac data has no pointwise values and cannot drive the solver".into(),
                ));
            }
        }
        Ok(())
    }

    fn in_domain(&self, x: f64) -> Result<()> {
        if let InitialData::Analytic {
            domain: Some((lo, hi)),
            ..
        } = self
        {
            if x < *lo || x > *hi {
                return Err(Error::OutsideDomain {
                    x,
                    lo: *lo,
                    hi: *hi,
                });
            }
        }
        Ok(())
    }

    fn value(&self, x: f64) -> f64 {
        match self {
            InitialData::Zero => 0.0,
            InitialData::Spec(s) => s.value_at(x).unwrap_or(0.0),
            InitialData::Analytic { f, .. } => f(x),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            InitialData::Zero => Vec::new(),
            InitialData::Spec(s) => s.breakpoint().into_iter().collect(),
            InitialData::Analytic { breakpoints, .. } => breakpoints.clone(),
        }
    }

    /// `∫_a^b f`, split at breakpoints inside `(a, b)`.
    fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        if matches!(self, InitialData::Zero) || a == b {
            return Ok(0.0);
        }
        self.in_domain(a)?;
        self.in_domain(b)?;
        let mut cuts: Vec<f64> = self
            .breakpoints()
            .into_iter()
            .filter(|&p| p > a && p < b)
            .collect();
        cuts.sort_by(f64::total_cmp);
        let mut knots = Vec::with_capacity(cuts.len() + 2);
        knots.push(a);
        knots.extend(cuts);
        knots.push(b);
        let pieces = (knots.len() - 1) as f64;
        let mut total = 0.0;
        for w in knots.windows(2) {
            // Endpoint samples take the one-sided limit from inside the piece.
            let (lo, hi) = (w[0].next_up(), w[1].next_down());
            let g = |s: f64| self.value(s.clamp(lo, hi));
            total += adaptive_simpson(g, w[0], w[1], QUADRATURE_TOL / pieces)?;
        }
        Ok(total)
    }
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, QUADRATURE_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureDiverged {
            a,
            b,
            max_depth: QUADRATURE_MAX_DEPTH,
        });
    }
    Ok(
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?,
    )
}

#[derive(Clone, Debug)]
pub struct CauchyProblem {
    nu: f64,
    phi: InitialData,
    psi: InitialData,
}

impl CauchyProblem {
    pub fn new(nu: f64, phi: InitialData, psi: InitialData) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "wave speed must be positive, got {nu}"
            )));
        }
        phi.check()?;
        psi.check()?;
        Ok(Self { nu, phi, psi })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn phi(&self) -> &InitialData {
        &self.phi
    }

    pub fn psi(&self) -> &InitialData {
        &self.psi
    }

    /// `u(x, t) = [phi(x - nu t) + phi(x + nu t)] / 2 + (1 / 2nu) ∫ psi`.
    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        dalembert_eval(self, x, t)
    }
}

pub fn dalembert_eval(problem: &CauchyProblem, x: f64, t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    let nu = problem.nu;
    let lo = x - nu * t;
    let hi = x + nu * t;
    problem.phi.in_domain(lo)?;
    problem.phi.in_domain(hi)?;
    let travelling = 0.5 * (problem.phi.value(lo) + problem.phi.value(hi));
    let integral = problem.psi.integrate(lo, hi)?;
    Ok(travelling + integral / (2.0 * nu))
}

pub fn solve_on_grid(problem: &CauchyProblem, grid: &Grid2D) -> Result<Field2D> {
    solve_on_grid_with(problem, grid, Exec::default())
}

/// Evaluates the solution at every node. Each node is computed
/// independently, so the result does not depend on `exec`.
pub fn solve_on_grid_with(problem: &CauchyProblem, grid: &Grid2D, exec: Exec) -> Result<Field2D> {
    let xg = *grid.x();
    let rows = exec.map(grid.m(), |j| {
        let t = grid.t(j);
        (0..xg.len())
            .map(|i| dalembert_eval(problem, xg.coord(i), t))
            .collect::<Result<Vec<f64>>>()
    });
    let mut values = Vec::with_capacity(grid.size());
    for row in rows {
        values.extend(row?);
    }
    Field2D::new(*grid, values)
}
