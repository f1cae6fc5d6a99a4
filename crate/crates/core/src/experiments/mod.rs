//! Experiment pipelines behind the command-line tool: threshold tables,
//! ξ curves, truncation curves, certification runs and the toy comparisons.

mod counterexample;
mod run;
mod toy;

use std::io::Write;

use serde::Serialize;

use crate::config::SCHEMA_VERSION;
use crate::dimension::{
    corollary_bound, practical_threshold, practical_threshold_less, theoretical_threshold,
    theoretical_threshold_less, ThresholdQuery,
};
use crate::error::{Error, Result};
use crate::smoothing::{linear_truncation_curve, SmoothingConfig, TruncationPoint};
use crate::special::{normal_cdf, normal_quantile, EvalPath, NumericsPolicy};
use crate::worst_case::{xi_with, AdversaryPair};

pub use counterexample::{counterexample_report, CertificateCheck, CounterexampleReport, Probe};
pub use run::{
    certify_dataset, read_jsonl_results, summarize, write_jsonl, CertifyMethod, ExperimentRun,
    SampleRecord, Summary,
};
pub use toy::{cone_sweep, run_toy, ProbeCell, SweepRow, ToyReport, ToySeedReport};

/// One row of the threshold table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub schema_version: u32,
    #[serde(rename = "N")]
    pub dof: u32,
    #[serde(rename = "pA")]
    pub p_a: f64,
    /// Hopeless-ratio bound for `σ₁ < σ₀`.
    pub theoretical: f64,
    /// Ratio where `ξ_>(0) = 1/2`.
    pub practical: f64,
    /// Simpler closed-form bound; empty when it carries no information.
    pub corollary: Option<f64>,
    pub theoretical_less: f64,
    pub practical_less: f64,
}

pub fn threshold_table(dims: &[u32], p_as: &[f64]) -> Result<Vec<ThresholdRow>> {
    let mut rows = Vec::with_capacity(dims.len() * p_as.len());
    for &n in dims {
        for &p in p_as {
            let q = ThresholdQuery::new(n, p)?;
            let (theoretical_less, practical_less) = if n >= 2 {
                (
                    theoretical_threshold_less(&q)?,
                    practical_threshold_less(&q)?,
                )
            } else {
                (f64::NAN, f64::NAN)
            };
            rows.push(ThresholdRow {
                schema_version: SCHEMA_VERSION,
                dof: n,
                p_a: p,
                theoretical: theoretical_threshold(&q)?,
                practical: practical_threshold(&q)?,
                corollary: corollary_bound(&q).ratio(),
                theoretical_less,
                practical_less,
            });
        }
    }
    Ok(rows)
}

/// One point of a ξ curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct XiRow {
    pub schema_version: u32,
    pub distance: f64,
    pub xi: f64,
    /// Class-B probability at the adversary for the half-space of `P₀`-mass
    /// `p_B`: `Φ((a - σ₀ Φ⁻¹(1 - p_B)) / σ₁)`.
    pub half_space: f64,
    pub underflow: bool,
    pub approximate: bool,
}

pub fn xi_curve(
    sigma0: f64,
    sigma1: f64,
    dof: u32,
    p_a: f64,
    distances: &[f64],
    policy: &NumericsPolicy,
) -> Result<Vec<XiRow>> {
    let z = normal_quantile(p_a)?;
    distances
        .iter()
        .map(|&a| {
            let pair = AdversaryPair::new(sigma0, sigma1, a, dof, p_a)?;
            let v = xi_with(&pair, policy)?;
            Ok(XiRow {
                schema_version: SCHEMA_VERSION,
                distance: a,
                xi: v.value,
                half_space: normal_cdf((a - sigma0 * z) / sigma1),
                underflow: v.underflow,
                approximate: v.path == EvalPath::NormalApproximation,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncationRow {
    pub schema_version: u32,
    pub distance: f64,
    pub p_a: f64,
    pub p_a_lower: f64,
    pub radius: f64,
    pub certified_fraction: f64,
}

impl From<TruncationPoint> for TruncationRow {
    fn from(p: TruncationPoint) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            distance: p.distance,
            p_a: p.p_a,
            p_a_lower: p.p_a_lower,
            radius: p.radius,
            certified_fraction: p.certified_fraction,
        }
    }
}

pub fn truncation_table(
    sigma: f64,
    distances: &[f64],
    cfg: &SmoothingConfig,
) -> Result<Vec<TruncationRow>> {
    Ok(linear_truncation_curve(sigma, distances, cfg)?
        .into_iter()
        .map(TruncationRow::from)
        .collect())
}

/// Writes serializable rows as CSV with a header.
pub fn write_csv<T: Serialize, W: Write>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `n` evenly spaced values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Parses `lo:hi:n` or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse grid '{s}'"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        Ok(linspace(lo, hi, n))
    } else {
        s.split(',')
            .map(|v| v.trim().parse().map_err(|_| bad()))
            .collect()
    }
}
