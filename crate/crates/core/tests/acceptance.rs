//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weakshock::characteristics::{char_roots, PdeCoefficients};
use weakshock::cwt::{
    convolve_separable, gradient_transform, Boundary, Method, ScaleSet, TransformOptions,
};
use weakshock::grid::{make_grid2d, Field2D, InitialDataSpec, InitialKind, Signal1D};
use weakshock::lipschitz::{estimate_exponent, Classification};
use weakshock::pipeline::config::InitialDataConfig;
use weakshock::pipeline::{self, PipelineConfig};
use weakshock::solver::{solve_on_grid, CauchyProblem, InitialData};
use weakshock::wavelets::Kernel2D;
use weakshock::wtmm::find_maxima_2d;

// Criterion 1: characteristic alignment.
const SLOPE_TOL: f64 = 0.05;
const INTERCEPT_TOL: f64 = 0.02;
const MIN_COVERAGE: f64 = 0.95;
const COVERAGE_CELLS: f64 = 2.0;
const MAX_RUNTIME_S: f64 = 60.0;
// Criterion 2: exponent bands.
const STEP_ALPHA: (f64, f64) = (-0.2, 0.2);
const DIRAC_ALPHA: (f64, f64) = (-1.3, -0.7);
const CORNER_ALPHA: (f64, f64) = (0.8, 1.2);
// Criterion 3: step amplitudes.
const STEP_SLOPE_TOL: f64 = 0.1;
const STEP_AMPLITUDE_REL: f64 = 0.05;
// Criterion 4: solver.
const SINE_TOL: f64 = 1e-9;
const VELOCITY_TOL: f64 = 1e-8;
// Criterion 5: direct vs FFT.
const CONV_REL_TOL: f64 = 1e-9;
const CONV_SEED: u64 = 0x5eed_c0de;
// Criterion 6: angles.
const AXIS_ANGLE_TOL: f64 = 1e-3;
const DIAGONAL_ANGLE_TOL: f64 = 2e-2;
// Criterion 7: invariants.
const TRANSLATION_TOL: f64 = 1e-9;
const ALPHA_SCALING_TOL: f64 = 1e-9;
const VIETA_TOL: f64 = 1e-12;
const VIETA_SAMPLES: usize = 1000;
const VIETA_SEED: u64 = 20_240_611;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tempdir() -> tempfile::TempDir {
    tempfile::tempdir().expect("temporary directory")
}

fn reference_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.grid.x_min = -2.0;
    cfg.grid.x_max = 2.0;
    cfg.grid.n = 1024;
    cfg.grid.t_min = 0.0;
    cfg.grid.t_max = 1.0;
    cfg.grid.m = 256;
    cfg.problem.nu = 1.0;
    cfg.problem.phi = InitialDataConfig::new(InitialKind::C1ParabolicKink, 0.0);
    cfg.problem.psi = None;
    // σ = 4 dx
    cfg.detect.reference_level = 2;
    cfg.verify.slope_tol = SLOPE_TOL;
    cfg.verify.intercept_tol = INTERCEPT_TOL;
    cfg.verify.coverage_cells = COVERAGE_CELLS;
    cfg.output.dir = out.to_path_buf();
    cfg
}

fn criterion_alignment() -> Outcome {
    let dir = tempdir();
    let cfg = reference_config(dir.path());
    let (v, _) = pipeline::cmd_full(&cfg, dir.path()).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut ok = v.aligned;
    for r in &v.reports {
        let rep = &r.report;
        if rep.fitted.len() != 2 {
            ok = false;
        }
        for f in &rep.fitted {
            let want = f.line.lambda.signum();
            ok &= (f.line.lambda - want).abs() <= SLOPE_TOL && f.line.x0.abs() <= INTERCEPT_TOL;
            notes.push(format!(
                "{}:x={:+.4}{:+.4}t",
                r.surface.as_str(),
                f.line.x0,
                f.line.lambda
            ));
        }
        let cov = rep.coverage.unwrap_or(0.0);
        ok &= cov >= MIN_COVERAGE;
        notes.push(format!("{}:coverage={cov:.3}", r.surface.as_str()));
    }

    let cfg_path = dir.path().join("reference.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_weakshock"))
        .args(["verify", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path().join("cli"))
        .env("RAYON_NUM_THREADS", "1")
        .output()
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let code = status.status.code();
    ok &= code == Some(0) && secs < MAX_RUNTIME_S;
    notes.push(format!("cli exit={code:?} in {secs:.1}s single-threaded"));
    check(ok, notes.join(" "))
}

fn lipschitz_cfg(kind: InitialKind, order: u8) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.lipschitz.n = 4096;
    cfg.lipschitz.scales = ScaleSet::new(1, 5).unwrap();
    cfg.lipschitz.order = order;
    cfg.lipschitz.signal = InitialDataConfig::new(kind, 0.0);
    cfg
}

fn analyse(kind: InitialKind, order: u8) -> Result<pipeline::LipschitzAnalysis, String> {
    let cfg = lipschitz_cfg(kind, order);
    let s = pipeline::lipschitz_signal(&cfg).map_err(|e| e.to_string())?;
    pipeline::analyse_signal(&s, &cfg).map_err(|e| e.to_string())
}

fn criterion_exponents() -> Outcome {
    let cases = [
        (
            "step",
            InitialKind::Step,
            1,
            STEP_ALPHA,
            Classification::Jump,
        ),
        (
            "dirac",
            InitialKind::Dirac,
            1,
            DIRAC_ALPHA,
            Classification::DiracLike,
        ),
        (
            "corner",
            InitialKind::RampCorner,
            2,
            CORNER_ALPHA,
            Classification::Smooth,
        ),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, kind, order, (lo, hi), class) in cases {
        let a = analyse(kind, order)?;
        if a.estimates.is_empty() {
            ok = false;
            notes.push(format!("{name}: no chains"));
            continue;
        }
        for e in &a.estimates {
            ok &= e.alpha >= lo && e.alpha <= hi && e.classification == class;
            notes.push(format!("{name}: α={:.4} {}", e.alpha, e.classification));
        }
    }
    check(ok, notes.join(", "))
}

fn criterion_step_amplitudes() -> Outcome {
    let a = analyse(InitialKind::Step, 1)?;
    // 1/sqrt(2π), the peak of the unit Gaussian
    let theta0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let [chain] = a.chains.as_slice() else {
        return Err(format!("expected one step chain, got {}", a.chains.len()));
    };
    let e = &a.estimates[0];
    let worst = chain
        .points
        .iter()
        .map(|p| (p.modulus - theta0).abs() / theta0)
        .fold(0.0_f64, f64::max);
    check(
        chain.len() == 5 && e.alpha.abs() <= STEP_SLOPE_TOL && worst <= STEP_AMPLITUDE_REL,
        format!(
            "{} scales, log2 slope {:.4}, worst amplitude deviation {:.2}% from θ(0)={theta0:.5}",
            chain.len(),
            e.alpha,
            100.0 * worst
        ),
    )
}

fn criterion_solver() -> Outcome {
    let grid = make_grid2d(-4.0, 4.0, 512, 0.0, 2.0, 256).unwrap();
    let sine = CauchyProblem::new(
        1.0,
        InitialData::Spec(InitialDataSpec::new(InitialKind::SmoothSine, 0.0, 1.0)),
        InitialData::Zero,
    )
    .unwrap();
    let u = solve_on_grid(&sine, &grid).map_err(|e| e.to_string())?;
    let exact = Field2D::from_fn(grid, |x, t| x.sin() * t.cos()).unwrap();
    let e1 = max_diff(u.values(), exact.values());
    let velocity = CauchyProblem::new(
        1.0,
        InitialData::Zero,
        InitialData::Spec(InitialDataSpec::new(InitialKind::Constant, 0.0, 1.0)),
    )
    .unwrap();
    let v = solve_on_grid(&velocity, &grid).map_err(|e| e.to_string())?;
    let tt = Field2D::from_fn(grid, |_, t| t).unwrap();
    let e2 = max_diff(v.values(), tt.values());
    check(
        e1 <= SINE_TOL && e2 <= VELOCITY_TOL,
        format!("sine max error {e1:.2e}, ψ≡1 max error {e2:.2e}"),
    )
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn criterion_fast_path() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(CONV_SEED);
    let grid = make_grid2d(0.0, 1.0, 128, 0.0, 1.0, 128).unwrap();
    let field = Field2D::new(
        grid,
        (0..grid.size())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .unwrap();
    let dx = grid.dx();
    let mut worst = 0.0_f64;
    for boundary in [Boundary::Reflect, Boundary::Zero] {
        for (ox, ot) in [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1)] {
            for sigma in [2.0 * dx, 5.0 * dx, 12.0 * dx] {
                let k = Kernel2D::new(ox, ot, sigma)
                    .unwrap()
                    .sample(dx, grid.dt())
                    .unwrap();
                let opts = TransformOptions::default().with_boundary(boundary);
                let direct = convolve_separable(
                    &field,
                    &k.along_x,
                    &k.along_t,
                    &opts.with_method(Method::Direct),
                )
                .map_err(|e| e.to_string())?;
                let fast = convolve_separable(
                    &field,
                    &k.along_x,
                    &k.along_t,
                    &opts.with_method(Method::Fft),
                )
                .map_err(|e| e.to_string())?;
                let scale = direct.max_abs().max(f64::MIN_POSITIVE);
                worst = worst.max(max_diff(direct.values(), fast.values()) / scale);
            }
        }
    }
    check(
        worst <= CONV_REL_TOL,
        format!("worst relative difference {worst:.2e} over 36 transforms"),
    )
}

fn edge_angles(f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>, String> {
    let grid = make_grid2d(-1.0, 1.0, 256, 0.0, 2.0, 256).unwrap();
    let field = Field2D::from_fn(grid, f).unwrap();
    let gf = gradient_transform(&field, 4.0 * grid.dx(), &TransformOptions::default())
        .map_err(|e| e.to_string())?;
    let maxima = find_maxima_2d(&gf, 0.1).map_err(|e| e.to_string())?;
    if maxima.is_empty() {
        return Err("no maxima".into());
    }
    Ok(maxima.iter().map(|p| p.angle).collect())
}

/// Distance between angles modulo π.
fn angle_gap_mod_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::PI);
    d.min(std::f64::consts::PI - d)
}

fn criterion_angles() -> Outcome {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
    let h = |s: f64| if s >= 0.0 { 1.0 } else { 0.0 };
    let vertical = edge_angles(|x, _| h(x - 0.1))?;
    let horizontal = edge_angles(|_, t| h(t - 0.93))?;
    let diagonal = edge_angles(|x, t| h(x + t - 1.02))?;
    let v = vertical.iter().map(|a| a.abs()).fold(0.0, f64::max);
    let hz = horizontal
        .iter()
        .map(|a| (a - FRAC_PI_2).abs())
        .fold(0.0, f64::max);
    let d = diagonal
        .iter()
        .map(|&a| angle_gap_mod_pi(a, FRAC_PI_4).min(angle_gap_mod_pi(a, -FRAC_PI_4)))
        .fold(0.0, f64::max);
    check(
        v <= AXIS_ANGLE_TOL && hz <= AXIS_ANGLE_TOL && d <= DIAGONAL_ANGLE_TOL,
        format!(
            "vertical {v:.1e} ({} maxima), horizontal {hz:.1e} ({}), diagonal {d:.1e} ({})",
            vertical.len(),
            horizontal.len(),
            diagonal.len()
        ),
    )
}

fn invariant_translation() -> Result<f64, String> {
    let cfg = lipschitz_cfg(InitialKind::Step, 1);
    let grid =
        weakshock::grid::Grid1D::new(cfg.lipschitz.x_min, cfg.lipschitz.x_max, cfg.lipschitz.n)
            .unwrap();
    let dx = grid.dx();
    let mut worst = 0.0_f64;
    let base = grid.coord(1500);
    let reference = {
        let s = Signal1D::from_fn(grid, |x| if x >= base { 1.0 } else { 0.0 }).unwrap();
        pipeline::analyse_signal(&s, &cfg).map_err(|e| e.to_string())?
    };
    for shift in [1usize, 7, 64, 333] {
        let x0 = grid.coord(1500 + shift);
        let s = Signal1D::from_fn(grid, |x| if x >= x0 { 1.0 } else { 0.0 }).unwrap();
        let a = pipeline::analyse_signal(&s, &cfg).map_err(|e| e.to_string())?;
        if a.maxima.per_scale.len() != reference.maxima.per_scale.len() {
            return Err("scale count changed under translation".into());
        }
        for (p, q) in reference.maxima.per_scale.iter().zip(&a.maxima.per_scale) {
            if p.len() != q.len() {
                return Err(format!("maxima count changed under shift {shift}"));
            }
            for (u, v) in p.iter().zip(q) {
                worst = worst.max((v.x - u.x - shift as f64 * dx).abs());
                worst = worst.max((v.modulus - u.modulus).abs());
            }
        }
    }
    Ok(worst)
}

fn invariant_thresholding() -> Result<bool, String> {
    let grid = make_grid2d(-2.0, 2.0, 256, 0.0, 1.0, 96).unwrap();
    let problem = CauchyProblem::new(
        1.0,
        InitialData::Spec(InitialDataSpec::new(InitialKind::C1ParabolicKink, 0.0, 1.0)),
        InitialData::Zero,
    )
    .unwrap();
    let u = solve_on_grid(&problem, &grid).map_err(|e| e.to_string())?;
    let gf = gradient_transform(&u, 4.0 * grid.dt(), &TransformOptions::default())
        .map_err(|e| e.to_string())?;
    let mut previous: Option<Vec<(usize, usize)>> = None;
    for thr in [0.05, 0.1, 0.2, 0.4, 0.8] {
        let set: Vec<(usize, usize)> = find_maxima_2d(&gf, thr)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|p| (p.row.unwrap(), p.index))
            .collect();
        if let Some(prev) = &previous {
            if !set.iter().all(|k| prev.contains(k)) {
                return Ok(false);
            }
        }
        previous = Some(set);
    }
    Ok(true)
}

fn invariant_vieta() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(VIETA_SEED);
    let mut worst = 0.0_f64;
    let mut done = 0;
    while done < VIETA_SAMPLES {
        let k = PdeCoefficients {
            a: rng.random_range(-10.0..10.0),
            b: rng.random_range(-10.0..10.0),
            c: rng.random_range(0.01..10.0),
        };
        if k.discriminant() <= 1e-6 {
            continue;
        }
        done += 1;
        let (l1, l2) = char_roots(&k).unwrap();
        let rel =
            |got: f64, want: f64, scale: f64| (got - want).abs() / scale.max(f64::MIN_POSITIVE);
        worst = worst.max(rel(l1 + l2, 2.0 * k.b / k.c, l1.abs() + l2.abs()));
        worst = worst.max(rel(l1 * l2, k.a / k.c, (l1 * l2).abs()));
        for l in [l1, l2] {
            let scale = (k.c * l * l).abs() + (2.0 * k.b * l).abs() + k.a.abs();
            worst = worst.max(rel(k.c * l * l - 2.0 * k.b * l + k.a, 0.0, scale));
        }
    }
    worst
}

fn invariant_alpha_scaling() -> Result<f64, String> {
    let mut worst = 0.0_f64;
    for (kind, order) in [
        (InitialKind::Step, 1),
        (InitialKind::Dirac, 1),
        (InitialKind::RampCorner, 2),
    ] {
        let cfg = lipschitz_cfg(kind, order);
        let s = pipeline::lipschitz_signal(&cfg).map_err(|e| e.to_string())?;
        let base = pipeline::analyse_signal(&s, &cfg).map_err(|e| e.to_string())?;
        for c in [-3.0, 0.01, 250.0] {
            let scaled =
                pipeline::analyse_signal(&s.scaled(c).unwrap(), &cfg).map_err(|e| e.to_string())?;
            if scaled.chains.len() != base.chains.len() {
                return Err(format!("chain count changed under scaling by {c}"));
            }
            for (p, q) in base.chains.iter().zip(&scaled.chains) {
                let (a, b) = (estimate_exponent(p).unwrap(), estimate_exponent(q).unwrap());
                worst = worst.max((a.alpha - b.alpha).abs());
            }
        }
    }
    Ok(worst)
}

fn invariant_reproducible() -> Result<bool, String> {
    let (a, b) = (tempdir(), tempdir());
    let mut cfg = reference_config(a.path());
    cfg.grid.n = 384;
    cfg.grid.m = 128;
    for d in [a.path(), b.path()] {
        pipeline::cmd_full(&cfg, d).map_err(|e| e.to_string())?;
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    if names.is_empty() {
        return Ok(false);
    }
    for n in names {
        let x = std::fs::read(a.path().join(&n)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.path().join(&n)).map_err(|e| e.to_string())?;
        if x != y {
            return Ok(false);
        }
    }
    Ok(true)
}

fn criterion_invariants() -> Outcome {
    let translation = invariant_translation()?;
    let monotone = invariant_thresholding()?;
    let vieta = invariant_vieta();
    let scaling = invariant_alpha_scaling()?;
    let reproducible = invariant_reproducible()?;
    check(
        translation <= TRANSLATION_TOL
            && monotone
            && vieta <= VIETA_TOL
            && scaling <= ALPHA_SCALING_TOL
            && reproducible,
        format!(
            "translation {translation:.1e}, monotone thresholds {monotone}, \
             Vieta/root worst {vieta:.1e} over {VIETA_SAMPLES}, α scaling {scaling:.1e}, \
             byte-identical {reproducible}"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("characteristic alignment", criterion_alignment),
        ("Lipschitz exponents", criterion_exponents),
        ("step amplitude scale invariance", criterion_step_amplitudes),
        ("solver exactness", criterion_solver),
        ("direct vs FFT convolution", criterion_fast_path),
        ("gradient angles", criterion_angles),
        ("invariant suites", criterion_invariants),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {}: {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
