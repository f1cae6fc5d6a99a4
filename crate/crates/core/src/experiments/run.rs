use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{certify_point, RadiusSearchConfig};
use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::renyi::{renyi_certified_radius, RenyiQuery};
use crate::sigma::SigmaField;
use crate::smoothing::{
    certify_constant, estimate_pa, BaseClassifier, CertificationResult, Diagnostics, Method,
    SmoothingConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum CertifyMethod {
    CohenConstant {
        sigma: f64,
    },
    Idrs,
    /// Fixed-σ₁ Rényi certificate with `σ₁ = ratio · σ(x₀)`.
    Renyi {
        sigma1_ratio: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub label: usize,
    pub result: CertificationResult,
}

impl SampleRecord {
    pub fn correct(&self) -> bool {
        self.result.predicted == Some(self.label)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub samples: usize,
    pub clean_accuracy: f64,
    pub abstention_rate: f64,
    pub misclassification_rate: f64,
    /// Population standard deviation of per-class accuracies.
    pub classwise_accuracy_std: f64,
    pub mean_sigma0: f64,
    pub mean_radius_correct: f64,
    /// `(radius, fraction correct with certified radius ≥ radius)`.
    pub certified_accuracy: Vec<(f64, f64)>,
    pub unstable_points: usize,
}

impl Summary {
    pub fn certified_accuracy_at(&self, r: f64) -> Option<f64> {
        self.certified_accuracy
            .iter()
            .find(|(x, _)| (*x - r).abs() < 1e-12)
            .map(|&(_, a)| a)
    }

    /// Rate decomposition and curve monotonicity.
    pub fn check_invariants(&self) -> Result<()> {
        let total = self.clean_accuracy + self.abstention_rate + self.misclassification_rate;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("rates sum to {total}")));
        }
        if self.certified_accuracy.windows(2).any(|w| w[1].1 > w[0].1) {
            return Err(Error::Config("certified accuracy curve increases".into()));
        }
        Ok(())
    }
}

/// Aggregates per-sample results.
pub fn summarize(
    records: &[SampleRecord],
    radius_grid: &[f64],
    num_classes: usize,
) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = records.len();
    let correct = records.iter().filter(|r| r.correct()).count();
    let abstained = records.iter().filter(|r| r.result.abstained()).count();
    let wrong = n - correct - abstained;
    let mut per_class = vec![(0usize, 0usize); num_classes.max(1)];
    for r in records {
        if r.label >= per_class.len() {
            per_class.resize(r.label + 1, (0, 0));
        }
        per_class[r.label].1 += 1;
        if r.correct() {
            per_class[r.label].0 += 1;
        }
    }
    let accs: Vec<f64> = per_class
        .iter()
        .filter(|(_, t)| *t > 0)
        .map(|&(c, t)| c as f64 / t as f64)
        .collect();
    let mean_acc = accs.iter().sum::<f64>() / accs.len() as f64;
    let var = accs.iter().map(|a| (a - mean_acc).powi(2)).sum::<f64>() / accs.len() as f64;
    let certified_accuracy = radius_grid
        .iter()
        .map(|&r| {
            let k = records
                .iter()
                .filter(|s| s.correct() && s.result.radius >= r)
                .count();
            (r, k as f64 / n as f64)
        })
        .collect();
    let correct_radii: Vec<f64> = records
        .iter()
        .filter(|r| r.correct())
        .map(|r| r.result.radius)
        .collect();
    Ok(Summary {
        samples: n,
        clean_accuracy: correct as f64 / n as f64,
        abstention_rate: abstained as f64 / n as f64,
        misclassification_rate: wrong as f64 / n as f64,
        classwise_accuracy_std: var.sqrt(),
        mean_sigma0: records.iter().map(|r| r.result.sigma0).sum::<f64>() / n as f64,
        mean_radius_correct: if correct_radii.is_empty() {
            0.0
        } else {
            correct_radii.iter().sum::<f64>() / correct_radii.len() as f64
        },
        certified_accuracy,
        unstable_points: records
            .iter()
            .map(|r| r.result.diagnostics.unstable_points)
            .sum(),
    })
}

fn certify_renyi<F: BaseClassifier + ?Sized>(
    f: &F,
    field: &SigmaField,
    ratio: f64,
    x: &[f64],
    cfg: &SmoothingConfig,
) -> Result<CertificationResult> {
    let sigma0 = field.sigma_at(x)?;
    let est = estimate_pa(f, sigma0, x, cfg)?;
    let ok = est.certifiable(cfg.pb_mode);
    let radius = if ok {
        renyi_certified_radius(&RenyiQuery::new(
            sigma0,
            sigma0 * ratio,
            x.len() as u32,
            est.p_a_lower,
            est.p_b_upper.min(est.p_a_lower),
        )?)?
        .radius
    } else {
        0.0
    };
    Ok(CertificationResult {
        predicted: ok.then_some(est.top_class),
        p_a_lower: est.p_a_lower,
        p_b_upper: est.p_b_upper,
        sigma0,
        radius,
        method: Method::Renyi,
        diagnostics: Diagnostics::default(),
    })
}

/// Certifies every point of `data`, in parallel over points.
pub fn certify_dataset<F: BaseClassifier + ?Sized>(
    f: &F,
    field: &SigmaField,
    data: &Dataset,
    method: CertifyMethod,
    cfg: &SmoothingConfig,
    search: &RadiusSearchConfig,
) -> Result<Vec<SampleRecord>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    (0..data.len())
        .into_par_iter()
        .map(|i| {
            let x = data.point(i);
            let result = match method {
                CertifyMethod::CohenConstant { sigma } => certify_constant(f, sigma, x, cfg)?,
                CertifyMethod::Idrs => certify_point(f, field, x, cfg, search)?,
                CertifyMethod::Renyi { sigma1_ratio } => {
                    certify_renyi(f, field, sigma1_ratio, x, cfg)?
                }
            };
            Ok(SampleRecord {
                index: i,
                label: data.label(i),
                result,
            })
        })
        .collect()
}

/// A self-describing certification run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub config: RunConfig,
    pub method: CertifyMethod,
    pub records: Vec<SampleRecord>,
    pub summary: Summary,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
enum Line {
    Header {
        schema_version: u32,
        method: CertifyMethod,
        config: Box<RunConfig>,
    },
    Sample {
        schema_version: u32,
        #[serde(flatten)]
        record: SampleRecord,
    },
    Summary {
        schema_version: u32,
        summary: Summary,
    },
}

/// Header line with the config, one line per sample, then a summary line.
pub fn write_jsonl<W: Write>(mut out: W, run: &ExperimentRun) -> Result<()> {
    let header = Line::Header {
        schema_version: SCHEMA_VERSION,
        method: run.method,
        config: Box::new(run.config.clone()),
    };
    serde_json::to_writer(&mut out, &header)?;
    writeln!(out)?;
    for r in &run.records {
        serde_json::to_writer(
            &mut out,
            &Line::Sample {
                schema_version: SCHEMA_VERSION,
                record: r.clone(),
            },
        )?;
        writeln!(out)?;
    }
    serde_json::to_writer(
        &mut out,
        &Line::Summary {
            schema_version: SCHEMA_VERSION,
            summary: run.summary.clone(),
        },
    )?;
    writeln!(out)?;
    Ok(())
}

pub fn read_jsonl_results<R: BufRead>(input: R) -> Result<ExperimentRun> {
    let (mut config, mut method, mut summary) = (None, None, None);
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line)? {
            Line::Header {
                schema_version,
                method: m,
                config: c,
            } => {
                if schema_version != SCHEMA_VERSION {
                    return Err(Error::Config(format!(
                        "unsupported schema version {schema_version}"
                    )));
                }
                config = Some(*c);
                method = Some(m);
            }
            Line::Sample { record, .. } => records.push(record),
            Line::Summary { summary: s, .. } => summary = Some(s),
        }
    }
    match (config, method, summary) {
        (Some(config), Some(method), Some(summary)) => Ok(ExperimentRun {
            config,
            method,
            records,
            summary,
        }),
        _ => Err(Error::Config(
            "results file lacks a header or summary".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::Method;

    fn record(label: usize, predicted: Option<usize>, radius: f64) -> SampleRecord {
        SampleRecord {
            index: 0,
            label,
            result: CertificationResult {
                predicted,
                p_a_lower: 0.9,
                p_b_upper: 0.1,
                sigma0: 0.5,
                radius,
                method: Method::Idrs,
                diagnostics: Diagnostics::default(),
            },
        }
    }

    #[test]
    fn summary_decomposition() {
        let recs = vec![
            record(0, Some(0), 0.3),
            record(0, None, 0.0),
            record(1, Some(0), 0.2),
            record(1, Some(1), 0.0),
            record(1, Some(1), 1.0),
        ];
        let s = summarize(&recs, &[0.0, 0.25, 0.5, 2.0], 2).unwrap();
        s.check_invariants().unwrap();
        assert_eq!(s.clean_accuracy, 0.6);
        assert_eq!(s.abstention_rate, 0.2);
        assert_eq!(s.certified_accuracy_at(0.25), Some(0.4));
        assert_eq!(s.certified_accuracy_at(2.0), Some(0.0));
        // per-class accuracies 1/2 and 2/3
        assert!((s.classwise_accuracy_std - (1.0 / 12.0)).abs() < 1e-12);
        assert!(summarize(&[], &[0.0], 2).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let recs = vec![record(0, Some(0), 0.3), record(1, None, 0.0)];
        let run = ExperimentRun {
            config: RunConfig::default(),
            method: CertifyMethod::Idrs,
            summary: summarize(&recs, &[0.0, 0.1], 2).unwrap(),
            records: recs,
        };
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &run).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().all(|l| l.contains("\"schema_version\":1")));
        assert_eq!(read_jsonl_results(&buf[..]).unwrap(), run);
    }
}
