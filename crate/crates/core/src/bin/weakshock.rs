use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use weakshock::cwt::{Boundary, ScaleSet};
use weakshock::pipeline::{self, Input, Outcome, PipelineConfig};
use weakshock::{Error, Result};

/// Detect weak discontinuities of 1D wave-equation solutions with wavelet
/// modulus maxima and check them against the characteristics.
#[derive(Parser, Debug)]
#[command(name = "weakshock", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the solution on the grid and write a FIELD2D dump.
    Solve(Common),
    /// Find modulus maxima, ridges and scale chains of a field.
    Detect {
        #[command(flatten)]
        common: Common,
        /// Analyse this FIELD2D dump instead of solving.
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Estimate Lipschitz exponents of a 1D signal.
    Lipschitz {
        #[command(flatten)]
        common: Common,
        /// Analyse this SIGNAL1D dump.
        #[arg(long, conflicts_with = "field")]
        signal: Option<PathBuf>,
        /// Analyse one row of this FIELD2D dump (see --row).
        #[arg(long, requires = "row")]
        field: Option<PathBuf>,
        #[arg(long)]
        row: Option<usize>,
    },
    /// Detect ridges and compare them with the characteristics.
    /// Exits 2 when they do not align.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Solve, detect and verify in one run.
    Full(Common),
    /// Print the default configuration.
    PrintDefaults,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration; defaults apply to anything it omits.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scale range JMIN..JMAX, σ = 2^j dx.
    #[arg(long, value_parser = parse_scales)]
    scales: Option<ScaleSet>,
    /// Relative modulus threshold in (0, 1).
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_parser = parse_boundary)]
    boundary: Option<Boundary>,
}

fn parse_scales(s: &str) -> std::result::Result<ScaleSet, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_boundary(s: &str) -> std::result::Result<Boundary, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    /// Loads the config and applies command-line overrides. `lipschitz`
    /// selects which section `--scales`/`--threshold` refer to.
    fn config(&self, lipschitz: bool) -> Result<(PipelineConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.scales {
            if lipschitz {
                cfg.lipschitz.scales = s;
            } else {
                cfg.detect.levels = s;
                if !s.levels().any(|j| j == cfg.detect.reference_level) {
                    cfg.detect.reference_level = s.j_min;
                }
            }
        }
        if let Some(t) = self.threshold {
            if lipschitz {
                cfg.lipschitz.threshold = t;
            } else {
                cfg.detect.threshold = t;
            }
        }
        if let Some(b) = self.boundary {
            cfg.transform.boundary = b;
        }
        cfg.validate()?;
        let out = self.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        Ok((cfg, out))
    }
}

fn field_input(field: Option<PathBuf>) -> Input {
    field.map_or(Input::Config, Input::Field)
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Solve(c) => {
            let (cfg, out) = c.config(false)?;
            pipeline::cmd_solve(&cfg, &out)?;
            eprintln!("wrote {}", out.join(pipeline::FIELD_FILE).display());
            Ok(Outcome::Success)
        }
        Command::Detect { common, field } => {
            let (cfg, out) = common.config(false)?;
            let det = pipeline::cmd_detect(&cfg, &field_input(field), &out)?;
            for l in &det.levels {
                eprintln!(
                    "{} j={}: {} maxima, {} ridges",
                    l.surface.as_str(),
                    l.level,
                    l.maxima.len(),
                    l.ridges.len()
                );
            }
            Ok(Outcome::Success)
        }
        Command::Lipschitz {
            common,
            signal,
            field,
            row,
        } => {
            let (cfg, out) = common.config(true)?;
            let input = match (signal, field, row) {
                (Some(s), _, _) => Input::Signal(s),
                (None, Some(f), Some(r)) => Input::FieldRow(f, r),
                _ => Input::Config,
            };
            let a = pipeline::cmd_lipschitz(&cfg, &input, &out)?;
            for (id, e) in a.estimates.iter().enumerate() {
                eprintln!("chain {id}: alpha={:.4} {}", e.alpha, e.classification);
            }
            Ok(Outcome::Success)
        }
        Command::Verify { common, field } => {
            let (cfg, out) = common.config(false)?;
            let (v, outcome) = pipeline::cmd_verify(&cfg, &field_input(field), &out)?;
            report(&v);
            Ok(outcome)
        }
        Command::Full(c) => {
            let (cfg, out) = c.config(false)?;
            let (v, outcome) = pipeline::cmd_full(&cfg, &out)?;
            report(&v);
            Ok(outcome)
        }
        Command::PrintDefaults => {
            print!("{}", PipelineConfig::default().to_toml());
            Ok(Outcome::Success)
        }
    }
}

fn report(v: &pipeline::Verification) {
    for r in &v.reports {
        let lines: Vec<String> = r
            .report
            .fitted
            .iter()
            .map(|f| format!("x={:.4}{:+.4}t", f.line.x0, f.line.lambda))
            .collect();
        eprintln!(
            "{}: {} [{}] coverage={:.3}",
            r.surface.as_str(),
            if r.report.aligned {
                "aligned"
            } else {
                "not aligned"
            },
            lines.join(", "),
            r.report.coverage.unwrap_or(0.0)
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
