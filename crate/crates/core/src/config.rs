//! Structured run configuration, read from TOML and echoed into outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certify::RadiusSearchConfig;
use crate::datasets::{
    generate_cone, generate_sector, load_dataset, ConeDatasetSpec, Dataset, SectorDatasetSpec,
};
use crate::error::{Error, Result};
use crate::sigma::{calibrate_m, CalibrationMode, Neighborhood, SigmaField};
use crate::smoothing::{
    Augmentation, BaseClassifier, KnnVote, SmoothingConfig, TinyMlp, TrainConfig,
};

/// Version tag written into every output file.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DatasetSource {
    Sector(SectorDatasetSpec),
    Cone(ConeDatasetSpec),
    File { path: PathBuf },
}

impl Default for DatasetSource {
    fn default() -> Self {
        Self::Cone(ConeDatasetSpec::default())
    }
}

impl DatasetSource {
    /// Materializes the dataset, overriding the generator seed.
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            Self::Sector(spec) => generate_sector(&SectorDatasetSpec {
                seed,
                ..spec.clone()
            }),
            Self::Cone(spec) => Ok(generate_cone(&ConeDatasetSpec {
                seed,
                ..spec.clone()
            })?
            .0),
            Self::File { path } => load_dataset(path),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Sector(_) => Some(2),
            Self::Cone(spec) => Some(spec.dim),
            Self::File { .. } => None,
        }
    }
}

/// Parameters of `σ(x) = σ_b exp(r (mean kNN distance - m))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldConfig {
    pub sigma_b: f64,
    pub rate: f64,
    pub k: usize,
    /// Fixed `m`; calibrated on the reference set when absent.
    pub m: Option<f64>,
    pub m_mode: CalibrationMode,
    /// `σ(x) ≤ cap_factor · σ_b`.
    pub cap_factor: Option<f64>,
    pub neighborhood: Neighborhood,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            sigma_b: 0.4,
            rate: 0.2,
            k: 20,
            m: None,
            m_mode: CalibrationMode::MinDist,
            cap_factor: Some(5.0),
            neighborhood: Neighborhood::IncludeSelf,
        }
    }
}

impl FieldConfig {
    pub fn build(&self, reference: &Dataset) -> Result<SigmaField> {
        if reference.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let points = reference.points();
        let m = match self.m {
            Some(m) => m,
            None => calibrate_m(&points, self.k, self.m_mode)?,
        };
        let cap = self.cap_factor.map(|c| c * self.sigma_b);
        Ok(
            SigmaField::new(&points, self.sigma_b, self.rate, self.k, m, cap)?
                .with_neighborhood(self.neighborhood),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AugmentationSpec {
    None,
    Constant {
        sigma: f64,
    },
    /// Noise from the run's σ field.
    Field,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        Self::None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ModelSpec {
    Mlp {
        #[serde(default)]
        train: TrainConfigSpec,
        #[serde(default)]
        augmentation: AugmentationSpec,
    },
    /// A trained network stored as JSON.
    MlpFile {
        path: PathBuf,
    },
    Knn {
        k: usize,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::Mlp {
            train: TrainConfigSpec::default(),
            augmentation: AugmentationSpec::None,
        }
    }
}

/// Serializable mirror of [`TrainConfig`] with defaults per field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfigSpec {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for TrainConfigSpec {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden: t.hidden,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
        }
    }
}

impl TrainConfigSpec {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden.clone(),
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed,
        }
    }
}

pub type Model = Box<dyn BaseClassifier>;

impl ModelSpec {
    /// Builds or loads the base classifier. `field` is only consulted for
    /// field-driven augmentation.
    pub fn build(&self, train: &Dataset, field: Option<&SigmaField>, seed: u64) -> Result<Model> {
        match self {
            Self::Mlp { .. } => Ok(Box::new(self.train_mlp(train, field, seed)?)),
            Self::MlpFile { path } => Ok(Box::new(load_model(path)?)),
            Self::Knn { k } => Ok(Box::new(KnnVote::new(train.clone(), *k)?)),
        }
    }

    /// Trains the network of an `Mlp` spec.
    pub fn train_mlp(
        &self,
        train: &Dataset,
        field: Option<&SigmaField>,
        seed: u64,
    ) -> Result<TinyMlp> {
        let Self::Mlp {
            train: spec,
            augmentation,
        } = self
        else {
            return Err(Error::Config(
                "model spec is not a trainable network".into(),
            ));
        };
        let aug = match augmentation {
            AugmentationSpec::None => Augmentation::None,
            AugmentationSpec::Constant { sigma } => Augmentation::Constant(*sigma),
            AugmentationSpec::Field => Augmentation::Field(
                field
                    .cloned()
                    .ok_or_else(|| Error::Config("field augmentation needs a field".into()))?,
            ),
        };
        TinyMlp::train(train, &spec.with_seed(seed), &aug)
    }
}

pub fn save_model(path: impl AsRef<Path>, model: &TinyMlp) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer(std::io::BufWriter::new(file), model)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TinyMlp> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// Everything a certification or toy run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
    pub train_data: DatasetSource,
    /// Test points are drawn from the same generator with a shifted seed.
    pub test_per_class: usize,
    pub model: ModelSpec,
    pub field: FieldConfig,
    /// σ of the constant-σ baseline.
    pub constant_sigma: f64,
    pub smoothing: SmoothingConfig,
    pub search: RadiusSearchConfig,
    /// Radii at which certified accuracy is reported.
    pub radius_grid: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 0,
            train_data: DatasetSource::default(),
            test_per_class: 100,
            model: ModelSpec::default(),
            field: FieldConfig::default(),
            constant_sigma: 0.5,
            smoothing: SmoothingConfig::default(),
            search: RadiusSearchConfig::default(),
            radius_grid: (0..=60).map(|i| i as f64 / 20.0).collect(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.smoothing.validate()?;
        self.search.validate()?;
        if !(self.constant_sigma > 0.0) {
            return Err(Error::Config(format!(
                "constant_sigma = {} must be positive",
                self.constant_sigma
            )));
        }
        if self.radius_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(
                "radius_grid must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Generator seed for the test split of `seed`.
    pub fn test_seed(seed: u64) -> u64 {
        seed ^ 0x5eed_7e57_0000_0000
    }
}
