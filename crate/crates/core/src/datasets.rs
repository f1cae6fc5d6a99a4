//! Labeled point sets, the synthetic toy generators and CSV I/O.
//!
//! CSV rows hold the feature columns followed by an integer label. A header
//! row is optional on input and always written on output.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, norm};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    points: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: labels.len(),
            });
        }
        let dim = points.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(dim * points.len());
        for p in &points {
            check_dim(dim, p.len())?;
            flat.extend_from_slice(p);
        }
        Ok(Self {
            dim,
            points: flat,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i).to_vec()).collect()
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            dim: self.dim,
            points: self.points[..n * self.dim].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SectorDatasetSpec {
    pub n_per_class: usize,
    /// Opening angle of the class-1 sector `[0, sector_angle)`.
    pub sector_angle: f64,
    /// The radius is `√χ²(radial_dof)`.
    pub radial_dof: u32,
    pub seed: u64,
}

impl Default for SectorDatasetSpec {
    fn default() -> Self {
        Self {
            n_per_class: 500,
            sector_angle: 0.4,
            radial_dof: 4,
            seed: 0,
        }
    }
}

/// Two classes in complementary circular sectors: class 1 with angle in
/// `[0, sector_angle)`, class 0 in `[sector_angle, 2π)`.
pub fn generate_sector(spec: &SectorDatasetSpec) -> Result<Dataset> {
    if !(spec.sector_angle > 0.0 && spec.sector_angle < 2.0 * PI) {
        return Err(Error::Config(format!(
            "sector angle {} must lie in (0, 2π)",
            spec.sector_angle
        )));
    }
    if spec.radial_dof == 0 || spec.n_per_class == 0 {
        return Err(Error::Config(
            "radial_dof and n_per_class must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let radial =
        ChiSquared::new(spec.radial_dof as f64).map_err(|e| Error::Config(e.to_string()))?;
    let mut points = Vec::with_capacity(2 * spec.n_per_class);
    let mut labels = Vec::with_capacity(2 * spec.n_per_class);
    for class in [1usize, 0] {
        for _ in 0..spec.n_per_class {
            let angle = if class == 1 {
                rng.random_range(0.0..spec.sector_angle)
            } else {
                rng.random_range(spec.sector_angle..2.0 * PI)
            };
            let r = radial.sample(&mut rng).sqrt();
            points.push(vec![r * angle.cos(), r * angle.sin()]);
            labels.push(class);
        }
    }
    Dataset::new(points, labels)
}

/// Class-1 membership predicate for the sector dataset.
pub fn in_sector(x: &[f64], sector_angle: f64) -> bool {
    let mut a = x[1].atan2(x[0]);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    a < sector_angle
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ConeDatasetSpec {
    pub dim: usize,
    pub n_per_class: usize,
    /// Half-angle of the class-1 cone around the first axis.
    pub cone_half_angle: f64,
    /// Both classes have density proportional to `exp(-c ‖x‖)`; `None` means
    /// `c = dim / 4`, which keeps the mean radius at 4.
    pub density_concentration: Option<f64>,
    pub seed: u64,
}

impl Default for ConeDatasetSpec {
    fn default() -> Self {
        Self {
            dim: 2,
            n_per_class: 500,
            cone_half_angle: 0.3,
            density_concentration: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ConeStats {
    /// Class-0 proposals discarded for landing inside the cone.
    pub class0_rejections: usize,
    /// Proposals spent on class-1 cone angles.
    pub class1_angle_proposals: usize,
}

/// Whether `x` lies in the cone of half-angle `half_angle` around `e₁`.
pub fn in_cone(x: &[f64], half_angle: f64) -> bool {
    let r = norm(x);
    r > 0.0 && x[0] >= r * half_angle.cos()
}

fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

/// Class 1 uniform in direction inside a cone around `e₁`, class 0 uniform
/// in direction outside it; both with radial density `∝ r^{N-1} e^{-c r}`.
pub fn generate_cone(spec: &ConeDatasetSpec) -> Result<(Dataset, ConeStats)> {
    if spec.dim < 2 {
        return Err(Error::Config("cone dataset needs dim >= 2".into()));
    }
    if !(spec.cone_half_angle > 0.0 && spec.cone_half_angle < PI / 2.0) {
        return Err(Error::Config(format!(
            "cone half-angle {} must lie in (0, π/2)",
            spec.cone_half_angle
        )));
    }
    if spec.n_per_class == 0 {
        return Err(Error::Config("n_per_class must be positive".into()));
    }
    let n = spec.dim;
    let c = spec.density_concentration.unwrap_or(n as f64 / 4.0);
    if !(c > 0.0) {
        return Err(Error::Config(format!(
            "density concentration {c} must be positive"
        )));
    }
    let radial = Gamma::new(n as f64, 1.0 / c).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let theta = spec.cone_half_angle;
    let mut stats = ConeStats {
        class0_rejections: 0,
        class1_angle_proposals: 0,
    };
    let mut points = Vec::with_capacity(2 * spec.n_per_class);
    let mut labels = Vec::with_capacity(2 * spec.n_per_class);

    for _ in 0..spec.n_per_class {
        // the polar angle from e₁ has density ∝ sin^{N-2} φ on [0, θ]
        let phi = loop {
            stats.class1_angle_proposals += 1;
            let phi = rng.random_range(0.0..theta);
            let accept = (phi.sin() / theta.sin()).powi(n as i32 - 2);
            if rng.random::<f64>() < accept {
                break phi;
            }
        };
        let mut dir = vec![0.0; n];
        dir[0] = phi.cos();
        let ortho = unit_direction(&mut rng, n - 1);
        for (d, o) in dir[1..].iter_mut().zip(&ortho) {
            *d = phi.sin() * o;
        }
        let r = radial.sample(&mut rng);
        points.push(dir.into_iter().map(|v| r * v).collect());
        labels.push(1);
    }
    for _ in 0..spec.n_per_class {
        let p = loop {
            let dir = unit_direction(&mut rng, n);
            let r = radial.sample(&mut rng);
            let p: Vec<f64> = dir.into_iter().map(|v| r * v).collect();
            if in_cone(&p, theta) {
                stats.class0_rejections += 1;
            } else {
                break p;
            }
        };
        points.push(p);
        labels.push(0);
    }
    Ok((Dataset::new(points, labels)?, stats))
}

pub fn save_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.point(i).iter().map(|v| format!("{v:e}")).collect();
        row.push(data.label(i).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    let parse_err = |line: usize, detail: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        detail,
    };
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(idx as u64 + 1, |p| p.line()) as usize;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if idx == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() < 2 {
            return Err(parse_err(
                line,
                "need at least one feature and a label".into(),
            ));
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(parse_err(
                    line,
                    format!("expected {w} fields, found {}", rec.len()),
                ));
            }
            _ => {}
        }
        let n = rec.len() - 1;
        let mut p = Vec::with_capacity(n);
        for (j, f) in rec.iter().take(n).enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(line, format!("column {j}: cannot parse {f:?}")))?;
            p.push(v);
        }
        let label: usize = rec[n]
            .parse()
            .map_err(|_| parse_err(line, format!("label {:?} is not a class index", &rec[n])))?;
        points.push(p);
        labels.push(label);
    }
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(points, labels)
}
