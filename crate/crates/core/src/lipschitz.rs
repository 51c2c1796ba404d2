//! Lipschitz exponents from the decay of modulus maxima across dyadic scales.
//!
//! Along a scale chain the maxima obey `|W(σ)| <= K σ^α`. The exponent is
//! estimated by least squares on `log2 |W|` against `j = log2(σ / dx)`; the
//! slope is `α` and the intercept `log2 K`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{cell, Table};
use crate::wtmm::{ChainKind, MaximaChain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Smooth,
    Jump,
    DiracLike,
    Indeterminate,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Smooth => "smooth",
            Classification::Jump => "jump",
            Classification::DiracLike => "dirac_like",
            Classification::Indeterminate => "indeterminate",
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Decision thresholds on `α` and on the fit residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassificationBands {
    /// `|α| <= jump` classifies as a jump.
    pub jump: f64,
    /// `α <= dirac` classifies as Dirac-like.
    pub dirac: f64,
    /// `α >= smooth` classifies as smooth.
    pub smooth: f64,
    /// Fits with a larger RMS residual (log2 units) are indeterminate.
    pub max_residual: f64,
}

impl Default for ClassificationBands {
    fn default() -> Self {
        Self {
            jump: 0.35,
            dirac: -0.65,
            smooth: 0.65,
            max_residual: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzEstimate {
    pub alpha: f64,
    /// `log2 K`.
    pub log_k: f64,
    pub residual_rms: f64,
    pub n_scales: usize,
    pub classification: Classification,
}

impl LipschitzEstimate {
    /// Re-expresses the exponent relative to a derivative of the analysed
    /// signal: a transform of `∂^order u` sees `α(u) - order`.
    pub fn shifted(mut self, order: f64, bands: &ClassificationBands) -> Self {
        self.alpha -= order;
        self.classification = classify_with(&self, bands);
        self
    }

    /// Points of `chain` exceeding the bound `log2 K + residual_rms + α j`.
    pub fn bound_violations(&self, chain: &MaximaChain) -> usize {
        chain
            .points
            .iter()
            .filter(|p| {
                let j = (p.sigma / chain.base_unit).log2();
                p.modulus.log2() > self.log_k + self.residual_rms + self.alpha * j + 1e-12
            })
            .count()
    }
}

/// Ordinary least squares `y = intercept + slope · x`; returns
/// `(slope, intercept, rms residual)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    (slope, intercept, (ss / n).sqrt())
}

pub fn estimate_exponent(chain: &MaximaChain) -> Result<LipschitzEstimate> {
    estimate_exponent_with(chain, &ClassificationBands::default())
}

pub fn estimate_exponent_with(
    chain: &MaximaChain,
    bands: &ClassificationBands,
) -> Result<LipschitzEstimate> {
    if chain.kind != ChainKind::ScaleChain {
        return Err(Error::InvalidArgument(
            "exponent estimation needs a scale chain".into(),
        ));
    }
    if chain.len() < 3 {
        return Err(Error::TooFewPoints {
            need: 3,
            got: chain.len(),
        });
    }
    if let Some(p) = chain.points.iter().find(|p| !(p.modulus > 0.0)) {
        return Err(Error::NonPositiveModulus(p.modulus));
    }
    let js: Vec<f64> = chain
        .points
        .iter()
        .map(|p| (p.sigma / chain.base_unit).log2())
        .collect();
    let logs: Vec<f64> = chain.points.iter().map(|p| p.modulus.log2()).collect();
    let (alpha, log_k, residual_rms) = fit_line(&js, &logs);
    let mut est = LipschitzEstimate {
        alpha,
        log_k,
        residual_rms,
        n_scales: chain.len(),
        classification: Classification::Indeterminate,
    };
    est.classification = classify_with(&est, bands);
    Ok(est)
}

pub fn classify(est: &LipschitzEstimate) -> Classification {
    classify_with(est, &ClassificationBands::default())
}

pub fn classify_with(est: &LipschitzEstimate, bands: &ClassificationBands) -> Classification {
    let a = est.alpha;
    if !(est.residual_rms <= bands.max_residual) || !a.is_finite() {
        Classification::Indeterminate
    } else if a.abs() <= bands.jump {
        Classification::Jump
    } else if a <= bands.dirac {
        Classification::DiracLike
    } else if a >= bands.smooth {
        Classification::Smooth
    } else {
        Classification::Indeterminate
    }
}

/// Tabular export: `chain_id alpha log_K residual_rms classification`.
pub fn estimates_table(rows: &[(usize, LipschitzEstimate)]) -> Table {
    let mut t = Table::new(&[
        "chain_id",
        "alpha",
        "log_K",
        "residual_rms",
        "classification",
    ]);
    for (id, e) in rows {
        t.push(vec![
            cell(id),
            cell(e.alpha),
            cell(e.log_k),
            cell(e.residual_rms),
            cell(e.classification),
        ]);
    }
    t
}
