use serde::Serialize;

use super::run::{certify_dataset, summarize, CertifyMethod, SampleRecord, Summary};
use crate::config::{DatasetSource, RunConfig};
use crate::datasets::{
    generate_cone, generate_sector, ConeDatasetSpec, Dataset, SectorDatasetSpec,
};
use crate::error::{Error, Result};
use crate::sigma::SigmaField;
use crate::smoothing::{truncation_ceiling, BaseClassifier, SmoothingConfig};

#[derive(Clone, Debug, Serialize)]
pub struct ToySeedReport {
    pub seed: u64,
    pub field_m: f64,
    pub base_test_accuracy: f64,
    pub constant: Summary,
    pub idrs: Summary,
    pub constant_records: Vec<SampleRecord>,
    pub idrs_records: Vec<SampleRecord>,
}

/// Base prediction and σ(x) on a grid, for drawing decision regions.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProbeCell {
    pub x: f64,
    pub y: f64,
    pub base_class: usize,
    pub sigma: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ToyReport {
    pub schema_version: u32,
    pub config: RunConfig,
    /// `σ Φ⁻¹(α^{1/n})` for the constant baseline.
    pub constant_ceiling: f64,
    pub mean_constant_clean: f64,
    pub mean_idrs_clean: f64,
    pub mean_idrs_sigma: f64,
    pub seeds: Vec<ToySeedReport>,
    /// Only for two-dimensional data, from the first seed.
    pub probe_grid: Vec<ProbeCell>,
}

impl ToyReport {
    /// Mean over seeds of the certified accuracy at radius `r`.
    pub fn mean_certified_accuracy(&self, r: f64, idrs: bool) -> f64 {
        let per_seed = self.seeds.iter().map(|s| {
            let recs = if idrs {
                &s.idrs_records
            } else {
                &s.constant_records
            };
            recs.iter()
                .filter(|x| x.correct() && x.result.radius >= r)
                .count() as f64
                / recs.len() as f64
        });
        per_seed.sum::<f64>() / self.seeds.len() as f64
    }
}

fn generate_split(
    source: &DatasetSource,
    seed: u64,
    n_per_class: Option<usize>,
) -> Result<Dataset> {
    match (source, n_per_class) {
        (DatasetSource::Sector(spec), Some(n)) => generate_sector(&SectorDatasetSpec {
            n_per_class: n,
            seed,
            ..spec.clone()
        }),
        (DatasetSource::Cone(spec), Some(n)) => Ok(generate_cone(&ConeDatasetSpec {
            n_per_class: n,
            seed,
            ..spec.clone()
        })?
        .0),
        (DatasetSource::File { .. }, Some(_)) => Err(Error::Config(
            "toy runs need a generated dataset, not a file".into(),
        )),
        (s, None) => s.load(seed),
    }
}

fn probe_grid(
    model: &dyn BaseClassifier,
    field: &SigmaField,
    data: &Dataset,
    cells: usize,
) -> Result<Vec<ProbeCell>> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for i in 0..data.len() {
        let p = data.point(i);
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let mut out = Vec::with_capacity(cells * cells);
    for i in 0..cells {
        for j in 0..cells {
            let x = lo[0] + (hi[0] - lo[0]) * i as f64 / (cells - 1) as f64;
            let y = lo[1] + (hi[1] - lo[1]) * j as f64 / (cells - 1) as f64;
            out.push(ProbeCell {
                x,
                y,
                base_class: model.classify(&[x, y]),
                sigma: field.sigma_at(&[x, y])?,
            });
        }
    }
    Ok(out)
}

/// Constant-σ against IDRS on freshly generated train/test splits, one per
/// seed. Both methods share the trained base model of each seed.
pub fn run_toy(cfg: &RunConfig, seeds: &[u64]) -> Result<ToyReport> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let mut reports = Vec::with_capacity(seeds.len());
    let mut grid = Vec::new();
    for (si, &seed) in seeds.iter().enumerate() {
        let train = generate_split(&cfg.train_data, seed, None)?;
        let test = generate_split(
            &cfg.train_data,
            RunConfig::test_seed(seed),
            Some(cfg.test_per_class),
        )?;
        let field = cfg.field.build(&train)?;
        let model = cfg.model.build(&train, Some(&field), seed)?;
        let base_correct = (0..test.len())
            .filter(|&i| model.classify(test.point(i)) == test.label(i))
            .count();
        let smoothing = SmoothingConfig {
            seed,
            ..cfg.smoothing.clone()
        };
        let constant_records = certify_dataset(
            &*model,
            &field,
            &test,
            CertifyMethod::CohenConstant {
                sigma: cfg.constant_sigma,
            },
            &smoothing,
            &cfg.search,
        )?;
        let idrs_records = certify_dataset(
            &*model,
            &field,
            &test,
            CertifyMethod::Idrs,
            &smoothing,
            &cfg.search,
        )?;
        let classes = train.num_classes();
        if si == 0 && train.dim() == 2 {
            grid = probe_grid(&*model, &field, &train, 41)?;
        }
        reports.push(ToySeedReport {
            seed,
            field_m: field.m(),
            base_test_accuracy: base_correct as f64 / test.len() as f64,
            constant: summarize(&constant_records, &cfg.radius_grid, classes)?,
            idrs: summarize(&idrs_records, &cfg.radius_grid, classes)?,
            constant_records,
            idrs_records,
        });
    }
    let k = reports.len() as f64;
    Ok(ToyReport {
        schema_version: crate::config::SCHEMA_VERSION,
        config: cfg.clone(),
        constant_ceiling: truncation_ceiling(
            cfg.constant_sigma,
            cfg.smoothing.n,
            cfg.smoothing.alpha,
        )?,
        mean_constant_clean: reports
            .iter()
            .map(|r| r.constant.clean_accuracy)
            .sum::<f64>()
            / k,
        mean_idrs_clean: reports.iter().map(|r| r.idrs.clean_accuracy).sum::<f64>() / k,
        mean_idrs_sigma: reports.iter().map(|r| r.idrs.mean_sigma0).sum::<f64>() / k,
        seeds: reports,
        probe_grid: grid,
    })
}

/// One dimension of the cone comparison.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub dim: usize,
    pub constant_sigma: f64,
    pub sigma_b: f64,
    pub rate: f64,
    pub constant_clean: f64,
    pub idrs_clean: f64,
    pub idrs_mean_sigma: f64,
    pub unstable_points: usize,
}

/// Runs [`run_toy`] on the cone dataset for each `(dim, σ, σ_b, r)`.
pub fn cone_sweep(
    base: &RunConfig,
    settings: &[(usize, f64, f64, f64)],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    let spec = match &base.train_data {
        DatasetSource::Cone(s) => s.clone(),
        _ => ConeDatasetSpec::default(),
    };
    settings
        .iter()
        .map(|&(dim, sigma, sigma_b, rate)| {
            let mut cfg = base.clone();
            cfg.train_data = DatasetSource::Cone(ConeDatasetSpec {
                dim,
                ..spec.clone()
            });
            cfg.constant_sigma = sigma;
            cfg.field.sigma_b = sigma_b;
            cfg.field.rate = rate;
            let rep = run_toy(&cfg, seeds)?;
            Ok(SweepRow {
                dim,
                constant_sigma: sigma,
                sigma_b,
                rate,
                constant_clean: rep.mean_constant_clean,
                idrs_clean: rep.mean_idrs_clean,
                idrs_mean_sigma: rep.mean_idrs_sigma,
                unstable_points: rep.seeds.iter().map(|s| s.idrs.unstable_points).sum(),
            })
        })
        .collect()
}
